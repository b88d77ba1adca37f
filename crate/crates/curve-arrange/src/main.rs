//! Command-line front end: parse flags, run the pipeline, write artifacts.
//!
//! Exit codes: 0 on success; 1 for flag, expression, or region problems;
//! 2 when the run itself fails (resolution limit, boundary root), with a
//! machine-readable JSON diagnostic on stderr.

use std::process::ExitCode;

use clap::Parser;

use curve_arrange::arrange::build_arrangement;
use curve_arrange::config::{OutFormat, RunConfig};
use curve_arrange::error::Error;
use curve_arrange::funcmodel::{CurveSystem, Expr};
use curve_arrange::output;

#[derive(Parser, Debug)]
#[command(
    name = "curve-arrange",
    about = "Certified piecewise-linear arrangement of two implicit plane curves",
    long_about = "Computes a topologically exact piecewise-linear approximation of the \
                  arrangement of two non-singular curves f=0, g=0 over a rectangular \
                  region, with every curve intersection isolated and certified."
)]
struct Cli {
    /// First curve f(x,y), e.g. "y - x^2"
    #[arg(long, allow_hyphen_values = true)]
    f: String,
    /// Second curve g(x,y), e.g. "x^2 + y^2 - 1"
    #[arg(long, allow_hyphen_values = true)]
    g: String,
    /// Region of interest as four dyadic decimals "x0,y0,x1,y1"
    #[arg(long, allow_hyphen_values = true)]
    roi: String,
    /// Hausdorff tolerance: a positive decimal, or "inf" for topology-only
    #[arg(long, default_value = "inf")]
    eps: String,
    /// Subdivision depth cap before giving up on unresolved boxes
    #[arg(long, default_value_t = 40)]
    max_depth: u32,
    /// Comma-separated output formats: json, svg, roots
    #[arg(long, default_value = "json")]
    out: String,
    /// Output file prefix; files become <prefix>.json etc.
    #[arg(long, default_value = "arrangement")]
    out_prefix: String,
    /// Include the final box complex in JSON and SVG output
    #[arg(long)]
    include_boxes: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not flag errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn run(cli: &Cli) -> Result<(), u8> {
    let precision = std::env::var("CURVE_ARRANGE_PRECISION")
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok());
    let cfg = RunConfig::build(
        &cli.f,
        &cli.g,
        &cli.roi,
        &cli.eps,
        cli.max_depth,
        &cli.out,
        &cli.out_prefix,
        cli.include_boxes,
        precision,
    )
    .map_err(config_error)?;

    let f = Expr::parse(&cfg.f_text).map_err(config_error)?;
    let g = Expr::parse(&cfg.g_text).map_err(config_error)?;
    let sys = CurveSystem::new(f, g);

    let arr = build_arrangement(&sys, &cfg.roi, &cfg.options()).map_err(|e| match e {
        Error::ResolutionLimit { .. } | Error::BoundaryRoot { .. } | Error::Internal(_) => {
            eprintln!("{}", e.diagnostic_json());
            2u8
        }
        other => config_error(other),
    })?;

    if arr.perturbed_corners > 0 {
        eprintln!(
            "warning: {} corner sign(s) decided by the perturbation convention",
            arr.perturbed_corners
        );
    }

    let root_rects: Vec<_> = arr.roots.iter().map(|r| r.b2.clone()).collect();
    let boxes = cfg.include_boxes.then_some(arr.cells.as_slice());
    for fmt in &cfg.out {
        let path = format!("{}.{}", cfg.out_prefix, fmt.extension());
        let contents = match fmt {
            OutFormat::Json => output::emit_json(&arr.pslg, &root_rects, boxes),
            OutFormat::Svg => output::emit_svg(&arr.pslg, &cfg.roi, boxes),
            OutFormat::Roots => output::emit_roots(&root_rects),
        };
        std::fs::write(&path, contents).map_err(|e| {
            eprintln!("cannot write {path}: {e}");
            1u8
        })?;
        println!("wrote {path}");
    }
    Ok(())
}

fn config_error(e: Error) -> u8 {
    eprintln!("{e}");
    1
}
