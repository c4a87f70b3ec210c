use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use refocus::bounds::bounds_report;
use refocus::coupling::classify_detailed;
use refocus::coupling::CLASSIFY_TOL;
use refocus::hilbert::error_scaling;
use refocus::io::{parse_coupling, parse_scheme, scheme_to_json, search_result_to_json};
use refocus::schemes::{synthesize, verify};
use refocus::search::{greedy_pool_growth, CandidatePool, PoolSource};
use refocus::{classify_type, CaseLabel, CouplingSpec, Error};

const DEFAULT_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "refocus", version, about = "Inversion and decoupling schemes for coupled spins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the case of the coupling type.
    Classify {
        #[arg(long)]
        coupling: PathBuf,
    },
    /// Build a constructive inversion scheme.
    Synthesize {
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scheme against a coupling.
    Verify {
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Lower bounds on overhead and step count.
    Bounds {
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long)]
        p: Option<usize>,
    },
    /// Numerical search over candidate steps.
    Search {
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        max_pool: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// octahedral, cyclic or pi; defaults by case.
        #[arg(long)]
        pool: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact per-cycle error against the ideal inverted evolution.
    Simulate {
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        eps: Vec<f64>,
    },
}

enum Failure {
    /// The input was fine but the answer is negative.
    Domain(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::WrongCase { .. }
            | Error::NotVerified { .. }
            | Error::BoundNotApplicable(_)
            | Error::DegenerateFit(_)
            | Error::InvalidScheme(_) => Failure::Domain(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<Value, Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_coupling(path: &Path) -> std::result::Result<CouplingSpec, Failure> {
    Ok(parse_coupling(&read(path)?)?)
}

fn positive_tol(tol: f64) -> std::result::Result<(), Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input(format!("--tol must be positive, got {tol}")))
    }
}

fn write_json(out: Option<&Path>, v: &Value) -> std::result::Result<bool, Failure> {
    match out {
        Some(p) => {
            let text = serde_json::to_string_pretty(v).expect("json value");
            std::fs::write(p, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            Ok(true)
        }
        None => Ok(false),
    }
}

fn classify(coupling: &Path) -> Outcome {
    let spec = load_coupling(coupling)?;
    let Some((_, a)) = spec.factors() else {
        return Err(Failure::Input("classify needs a factored coupling with \"W\" and \"A\"".into()));
    };
    Ok(serde_json::to_value(classify_detailed(a, CLASSIFY_TOL)?).expect("serializable"))
}

fn cmd_synthesize(coupling: &Path, out: Option<&Path>) -> Outcome {
    let spec = load_coupling(coupling)?;
    let Some((w, a)) = spec.factors() else {
        return Err(Failure::Input("synthesize needs a factored coupling with \"W\" and \"A\"".into()));
    };
    if classify_type(a, CLASSIFY_TOL)? == CaseLabel::Case3 {
        return Err(Failure::Domain(
            "no constructive scheme for case 3; try `refocus search`".into(),
        ));
    }
    let scheme = synthesize(w, a)?;
    let v = verify(&scheme, &spec.coupling(), DEFAULT_TOL)?;
    if !v.ok {
        return Err(Failure::Domain(format!(
            "synthesized scheme failed self-verification (residual {:.3e})",
            v.residual
        )));
    }
    let stats = serde_json::to_value(scheme.stats()).expect("serializable");
    let body = scheme_to_json(&scheme);
    if write_json(out, &body)? {
        Ok(stats)
    } else {
        eprintln!("{stats}");
        Ok(body)
    }
}

fn cmd_verify(coupling: &Path, scheme: &Path, tol: f64) -> Outcome {
    positive_tol(tol)?;
    let j = load_coupling(coupling)?.coupling();
    let s = parse_scheme(&read(scheme)?)?;
    let v = verify(&s, &j, tol)?;
    let body = json!({"ok": v.ok, "residual": v.residual, "N": s.len(), "tau": s.tau()});
    if v.ok {
        Ok(body)
    } else {
        println!("{body}");
        Err(Failure::Domain(format!("residual {:.3e} exceeds tolerance {tol:e}", v.residual)))
    }
}

fn cmd_bounds(coupling: &Path, p: Option<usize>) -> Outcome {
    let spec = load_coupling(coupling)?;
    Ok(serde_json::to_value(bounds_report(&spec, p)?).expect("serializable"))
}

fn cmd_search(
    coupling: &Path,
    seed: u64,
    max_pool: usize,
    tol: f64,
    pool: Option<&str>,
    out: Option<&Path>,
) -> Outcome {
    positive_tol(tol)?;
    let spec = load_coupling(coupling)?;
    let j = spec.coupling();
    let base = match pool {
        Some(name) => CandidatePool::from_source(name.parse::<PoolSource>()?, j.n(), seed)?,
        None => {
            let case = match spec.factors() {
                Some((_, a)) => Some(classify_type(a, CLASSIFY_TOL)?),
                None => None,
            };
            CandidatePool::default_for(case, j.n(), seed)?
        }
    };
    let result = greedy_pool_growth(&j, &base, tol, max_pool)?;
    let body = search_result_to_json(&result);
    if result.scheme.is_none() {
        println!("{body}");
        for d in &result.diagnostics {
            eprintln!("{d}");
        }
        return Err(Failure::Domain("no scheme found within the pool limit".into()));
    }
    if write_json(out, &body)? {
        Ok(json!({"residual": result.residual, "tau": result.tau, "iterations": result.iterations}))
    } else {
        Ok(body)
    }
}

fn cmd_simulate(coupling: &Path, scheme: &Path, eps: &[f64]) -> Outcome {
    let j = load_coupling(coupling)?.coupling();
    let s = parse_scheme(&read(scheme)?)?;
    Ok(error_scaling(&j, &s, eps)?.to_json())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Classify { coupling } => classify(&coupling),
        Command::Synthesize { coupling, out } => cmd_synthesize(&coupling, out.as_deref()),
        Command::Verify { coupling, scheme, tol } => cmd_verify(&coupling, &scheme, tol),
        Command::Bounds { coupling, p } => cmd_bounds(&coupling, p),
        Command::Search {
            coupling,
            seed,
            max_pool,
            tol,
            pool,
            out,
        } => cmd_search(&coupling, seed, max_pool, tol, pool.as_deref(), out.as_deref()),
        Command::Simulate { coupling, scheme, eps } => cmd_simulate(&coupling, &scheme, &eps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
