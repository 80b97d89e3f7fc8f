//! `opbmo`: norms, identities, sweeps, sign averages and growth tables for
//! dyadic operator-valued BMO symbols.
//!
//! Exit status: 0 when everything passes, 1 when an assertion fails, 2 for
//! usage or configuration errors, 3 for I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use opbmo::averaging::{
    avchar_check, averaged_norm_sq, phi_norm, pythagoras_check, sweep_from_average, sweep_norm_check, Mode,
    SWEEP_NORM_POLICY,
};
use opbmo::format::{read_symbol, symbol_to_json, write_symbol};
use opbmo::growth::{run_growth, sweep_trend_breaks, Ensemble, ExperimentConfig, OutputFormat};
use opbmo::linalg;
use opbmo::norms::{bmo_so, sbmo, NormKind};
use opbmo::symbol::HaarSymbol;
use opbmo::verify::{mean_zero_input, run_verify, VerifyConfig};
use opbmo::{sweep, Error};

#[derive(Parser)]
#[command(name = "opbmo", version, about = "Dyadic operator-valued BMO at finite resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every norm of a symbol file, with witnesses.
    Norms {
        file: PathBuf,
        /// Restrict to these norms (comma separated).
        #[arg(long, value_delimiter = ',')]
        kind: Vec<String>,
    },
    /// Run the identity and estimate suite over random symbols.
    Verify {
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3])]
        depth: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4])]
        dim: Vec<usize>,
        #[arg(long, default_value_t = 25)]
        seeds: u64,
        /// Relative residual tolerance for the exact identities.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Write the sweep S_B of a symbol file as a symbol file.
    Sweep {
        file: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Averages over martingale transforms of a symbol file.
    Average {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = KindArg::Mult)]
        kind: KindArg,
        #[arg(long, value_enum)]
        check: Option<CheckArg>,
    },
    /// Dimensional-growth table over a random ensemble.
    Growth {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value = "gaussian")]
        ensemble: String,
        /// Norm columns to fill (comma separated); all by default.
        #[arg(long, value_delimiter = ',')]
        norms: Vec<String>,
        /// Records go here (summary next to it); stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Norm,
    Mult,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Sweep,
    Pythagoras,
    Avchar,
    Phinorm,
}

enum Failure {
    Assert(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

const AVERAGE_SLACK: f64 = 1e-9;
const EXACT_SWEEP_TOL: f64 = 1e-12;
const MC_STDERRS: f64 = 4.0;

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn assertion(name: &str, value: f64, bound: f64, passed: bool) -> Value {
    json!({"name": name, "value": value, "bound": bound, "passed": passed})
}

fn finish(asserts: &[Value]) -> Outcome {
    let failed: Vec<&str> = asserts
        .iter()
        .filter(|a| a["passed"] == json!(false))
        .map(|a| a["name"].as_str().unwrap_or_default())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assert(failed.join("; ")))
    }
}

fn cmd_norms(file: &Path, kinds: &[String]) -> Outcome {
    let b = read_symbol(file)?;
    let kinds = if kinds.is_empty() {
        NormKind::ALL.to_vec()
    } else {
        kinds.iter().map(|k| NormKind::parse(k)).collect::<opbmo::Result<_>>()?
    };
    let mut out = Map::new();
    for k in kinds {
        let r = k.compute(&b)?;
        let mut entry = json!({"value": r.value, "exact": r.exact, "witness": r.witness});
        if let Some(u) = r.upper {
            entry["upper"] = json!(u);
        }
        out.insert(k.as_str().to_string(), entry);
    }
    print_json(&Value::Object(out));
    Ok(())
}

fn cmd_verify(cfg: VerifyConfig) -> Outcome {
    let report = run_verify(&cfg)?;
    print_json(&serde_json::to_value(&report).expect("report serializes"));
    let failed: Vec<String> = report
        .failures()
        .map(|c| format!("{} ({} = {:e} > {:e})", c.name, c.statistic, c.worst, c.limit))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assert(failed.join("; ")))
    }
}

fn cmd_sweep(file: &Path, output: Option<&PathBuf>) -> Outcome {
    let b = read_symbol(file)?;
    let s = sweep::sweep(&b).haar;
    match output {
        Some(path) => write_symbol(path, &s)?,
        None => print_json(&symbol_to_json(&s)?),
    }
    Ok(())
}

fn sweep_asserts(b: &HaarSymbol, mode: Mode) -> opbmo::Result<Vec<Value>> {
    let avg = sweep_from_average(b, mode)?;
    let s = sweep::sweep(b).step;
    let mut asserts = Vec::new();
    match mode {
        Mode::Exact => {
            let dev = avg
                .step
                .cells()
                .iter()
                .zip(s.cells())
                .map(|(x, y)| linalg::max_abs(&(x - y)))
                .fold(0.0, f64::max);
            asserts.push(assertion("average reproduces the sweep", dev, EXACT_SWEEP_TOL, dev <= EXACT_SWEEP_TOL));
        }
        Mode::MonteCarlo { .. } => {
            // worst cell deviation in units of that cell's standard error
            let z = avg
                .step
                .cells()
                .iter()
                .zip(s.cells())
                .zip(&avg.stderr)
                .map(|((x, y), e)| linalg::frobenius(&(x - y)) / e.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            asserts.push(assertion("average reproduces the sweep (stderr units)", z, MC_STDERRS, z <= MC_STDERRS));
        }
    }
    let check = sweep_norm_check(b, mode)?;
    let a = check.average;
    let allowance = MC_STDERRS * a.stderr;
    let l1_bound = 2.0 * (a.value + allowance);
    asserts.push(assertion(
        "max_I |I|^-1 ||P_I S_B||_L1 <= 2 E||T_sigma B||^2_norm",
        check.l1_max,
        l1_bound,
        check.l1_max <= l1_bound * (1.0 + AVERAGE_SLACK) + AVERAGE_SLACK,
    ));
    let policy = SWEEP_NORM_POLICY * (a.value + allowance);
    asserts.push(assertion(
        "||S_B||_norm <= 8 E||T_sigma B||^2_norm",
        check.sweep_norm,
        policy,
        check.sweep_norm <= policy * (1.0 + AVERAGE_SLACK) + AVERAGE_SLACK,
    ));
    Ok(asserts)
}

fn cmd_average(file: &Path, mode: Mode, kind: KindArg, check: Option<CheckArg>, seed: u64) -> Outcome {
    let b = read_symbol(file)?;
    let kind = match kind {
        KindArg::Norm => NormKind::BmoNorm,
        KindArg::Mult => NormKind::BmoMult,
    };
    let est = averaged_norm_sq(&b, kind, mode)?;
    let mut asserts = Vec::new();
    let mut extra = Map::new();
    match check {
        None => {}
        Some(CheckArg::Sweep) => asserts = sweep_asserts(&b, mode)?,
        Some(CheckArg::Pythagoras) => {
            let f = mean_zero_input(b.cfg(), seed);
            let p = pythagoras_check(&b, &f)?;
            let tol = 1e-10 * p.scale;
            asserts.push(assertion("E||T B f||^2 = pi + delta + gamma parts", p.full_residual(), tol, p.full_residual() <= tol));
            asserts.push(assertion("E||Lambda f||^2 = pi + delta parts", p.lambda_residual(), tol, p.lambda_residual() <= tol));
            let ctol = 1e-12 * p.scale;
            asserts.push(assertion("averaged cross terms vanish", p.max_cross(), ctol, p.max_cross() <= ctol));
            extra.insert("pythagoras".into(), serde_json::to_value(p).expect("serializes"));
        }
        Some(CheckArg::Avchar) => {
            let a = avchar_check(&b, mode)?;
            let v = a.average.value;
            let spread = MC_STDERRS * a.average.stderr;
            let lo_ok = a.lower() <= (v + spread) * (1.0 + AVERAGE_SLACK) + AVERAGE_SLACK;
            let hi_ok = v - spread <= a.upper() * (1.0 + AVERAGE_SLACK) + AVERAGE_SLACK;
            asserts.push(assertion("(||pi||+||delta||)^2/4 <= E||T B||^2_mult", v, a.lower(), lo_ok));
            asserts.push(assertion("E||T B||^2_mult <= (||pi||+||delta||)^2", v, a.upper(), hi_ok));
        }
        Some(CheckArg::Phinorm) => {
            let phi = phi_norm(&b)?;
            let star = phi_norm(&b.adjoint())?;
            let sb = sbmo(&b).value;
            let so = bmo_so(&b).value;
            let d1 = (phi.value() - sb).abs();
            let d2 = (phi.value() + star.value() - so).abs();
            asserts.push(assertion("||Phi_B|| = sbmo(B)", d1, 1e-8, d1 < 1e-8));
            asserts.push(assertion("||Phi_B|| + ||Phi_B*|| = bmo_so(B)", d2, 1e-8, d2 < 1e-8));
            extra.insert("phi_norm".into(), json!(phi.value()));
        }
    }
    let mut out = json!({
        "kind": kind.as_str(),
        "mode": est.mode,
        "samples": est.samples,
        "estimate": est.value,
        "stderr": est.stderr,
        "asserts": asserts,
    });
    for (k, v) in extra {
        out[k] = v;
    }
    print_json(&out);
    finish(&asserts)
}

fn cmd_growth(cfg: ExperimentConfig, output: Option<&PathBuf>, format: OutputFormat) -> Outcome {
    let report = run_growth(&cfg)?;
    match output {
        Some(path) => report.write(path, format)?,
        None => match format {
            OutputFormat::Csv => print!("{}", report.records_csv()?),
            OutputFormat::Json => println!("{}", report.to_json()),
        },
    }
    for s in &report.summary {
        eprintln!("{s}");
    }
    let breaks = sweep_trend_breaks(&report);
    if !breaks.is_empty() {
        eprintln!("warning: sweep ratio maximum decreases at n = {breaks:?}");
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Norms { file, kind } => cmd_norms(&file, &kind),
        Command::Verify {
            depth,
            dim,
            seeds,
            tolerance,
        } => cmd_verify(VerifyConfig {
            dims: dim,
            depths: depth,
            seeds,
            tolerance,
        }),
        Command::Sweep { file, output } => cmd_sweep(&file, output.as_ref()),
        Command::Average {
            file,
            mode,
            samples,
            seed,
            kind,
            check,
        } => {
            let mode = match mode {
                ModeArg::Exact => Mode::Exact,
                ModeArg::Mc => Mode::MonteCarlo { samples, seed },
            };
            cmd_average(&file, mode, kind, check, seed)
        }
        Command::Growth {
            dims,
            depth,
            seeds,
            ensemble,
            norms,
            output,
            format,
        } => {
            let mut cfg = ExperimentConfig::new(dims, depth, seeds);
            cfg.ensemble = Ensemble::parse(&ensemble)?;
            if !norms.is_empty() {
                cfg.norms = norms.iter().map(|k| NormKind::parse(k)).collect::<opbmo::Result<_>>()?;
            }
            cmd_growth(cfg, output.as_ref(), OutputFormat::parse(&format)?)
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var("OPBMO_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("OPBMO_THREADS must be a positive integer, found \"{value}\""))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assert(names)) => {
            eprintln!("assertion failed: {names}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
