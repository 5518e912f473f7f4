//! Command-line front end.
//!
//! Exit codes: 0 on success or a positive verdict, 2 on a negative verdict,
//! 1 on any error (usage, I/O, model or solver).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::model::{build_gallery, load_instance, GameInstance};
use crate::potential::{check_gradient_identity, check_potential_existence, PotentialError};
use crate::solvers::{solve_p_implicit, solve_p_pessimistic, solve_p_quasi, SolveConfig};
use crate::verify::{
    certify_nonexistence_on_grid, check_nash_b_stationarity, verify_global, verify_local,
    StationarityConfig, VerifyConfig,
};
use crate::vi::{enumerate_solutions, ViConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT_FALSE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mlmf",
    version,
    about = "Multi-leader multi-follower games: solve, verify, certify"
)]
struct Cli {
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Grid points per leader coordinate.
    #[arg(long)]
    grid: Option<usize>,
    /// Natural-map residual tolerance of the follower solver.
    #[arg(long)]
    vi_tol: Option<f64>,
    /// Follower multistart points per dimension.
    #[arg(long)]
    multistart: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl Common {
    fn vi(&self) -> ViConfig<f64> {
        let mut vi = ViConfig::default();
        if let Some(t) = self.vi_tol {
            vi.residual_tol = t;
        }
        if let Some(m) = self.multistart {
            vi.multistart = m;
        }
        vi
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quasi-potential checks (gradient identity, potential existence).
    Check {
        instance: PathBuf,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate the follower solution set S(x).
    Followers {
        instance: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the reduced problem.
    Solve {
        instance: PathBuf,
        #[arg(long, conflicts_with = "implicit")]
        pessimistic: bool,
        #[arg(long)]
        implicit: bool,
        /// Skip the pattern-search refinement.
        #[arg(long)]
        no_refine: bool,
        /// Dump every scanned (x, w, objective) triple.
        #[arg(long)]
        scan_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Verify a candidate profile (x, y).
    Verify {
        instance: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Per-leader follower responses, e.g. "1;1".
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        local: bool,
        #[arg(long, default_value_t = 0.05, requires = "local")]
        radius: f64,
        #[arg(long, default_value_t = 21, requires = "local")]
        samples: usize,
        #[arg(long)]
        stationarity: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Grid certificate of ε-equilibrium nonexistence.
    Nonexist {
        instance: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Dump every candidate profile with its max gap.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Build a built-in instance.
    Gallery {
        name: String,
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Vi(#[from] crate::vi::ViError),
    #[error(transparent)]
    Solve(#[from] crate::solvers::SolveError),
    #[error(transparent)]
    Verify(#[from] crate::verify::VerifyError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("not a number: '{s}' in '{text}'")))
        })
        .collect()
}

fn parse_blocks(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';').map(parse_vector).collect()
}

fn load(path: &Path) -> Result<GameInstance<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(load_instance(&text)?)
}

fn emit(report: &Value, target: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    match target {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_value<S: serde::Serialize>(v: &S) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Check {
            instance,
            samples,
            tol,
            common,
        } => {
            let g = load(&instance)?;
            let identity = match check_gradient_identity(&g, samples, tol) {
                Ok(r) => to_value(&r),
                Err(e @ (PotentialError::MissingPotential | PotentialError::RawMode)) => {
                    json!({ "skipped": e.to_string() })
                }
                Err(e) => return Err(e.into()),
            };
            let existence = check_potential_existence(&g, samples, tol.max(1e-4))?;
            let pass = identity
                .get("pass")
                .and_then(Value::as_bool)
                .unwrap_or(true)
                && existence.pass;
            let report = json!({
                "instance": g.name(),
                "gradient_identity": identity,
                "potential_existence": existence,
                "pass": pass,
            });
            emit(&report, common.report.as_deref())?;
            Ok(if pass { EXIT_OK } else { EXIT_VERDICT_FALSE })
        }
        Command::Followers {
            instance,
            x,
            common,
        } => {
            let g = load(&instance)?;
            let x = parse_vector(&x)?;
            let set = enumerate_solutions(&g, &x, &common.vi())?;
            emit(
                &json!({ "instance": g.name(), "solutions": set }),
                common.report.as_deref(),
            )?;
            Ok(EXIT_OK)
        }
        Command::Solve {
            instance,
            pessimistic,
            implicit,
            no_refine,
            scan_csv,
            common,
        } => {
            let g = load(&instance)?;
            let mut cfg = SolveConfig {
                vi: common.vi(),
                refine: !no_refine,
                record_scan: scan_csv.is_some(),
                ..SolveConfig::default()
            };
            if let Some(n) = common.grid {
                cfg.grid = n;
            }
            let (formulation, r) = if pessimistic {
                ("pessimistic", solve_p_pessimistic(&g, &cfg)?)
            } else if implicit {
                ("implicit", solve_p_implicit(&g, &cfg)?)
            } else {
                ("optimistic", solve_p_quasi(&g, &cfg)?)
            };
            if let Some(path) = &scan_csv {
                let file = fs::File::create(path).map_err(io_err(path))?;
                r.write_scan_csv(&g, file)?;
            }
            let mut report = to_value(&r);
            report["instance"] = json!(g.name());
            report["formulation"] = json!(formulation);
            emit(&report, common.report.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            instance,
            x,
            y,
            eps,
            local,
            radius,
            samples,
            stationarity,
            common,
        } => {
            let g = load(&instance)?;
            let x = parse_vector(&x)?;
            let y = parse_blocks(&y)?;
            let mut cfg = VerifyConfig {
                vi: common.vi(),
                ..VerifyConfig::default()
            };
            if let Some(n) = common.grid {
                cfg.grid = n;
            }
            let r = if local {
                verify_local(&g, &x, &y, radius, eps, samples, &cfg)?
            } else {
                verify_global(&g, &x, &y, eps, &cfg)?
            };
            let mut verdict = r.verdict;
            let mut report = json!({ "instance": g.name(), "verification": r });
            if stationarity {
                let scfg = StationarityConfig {
                    vi: cfg.vi,
                    ..StationarityConfig::default()
                };
                let s = check_nash_b_stationarity(&g, &x, &y, &scfg)?;
                verdict &= s.verdict;
                report["stationarity"] = to_value(&s);
            }
            report["verdict"] = json!(verdict);
            emit(&report, common.report.as_deref())?;
            Ok(if verdict { EXIT_OK } else { EXIT_VERDICT_FALSE })
        }
        Command::Nonexist {
            instance,
            eps,
            csv,
            common,
        } => {
            let g = load(&instance)?;
            let cfg = VerifyConfig {
                vi: common.vi(),
                ..VerifyConfig::default()
            };
            let r = certify_nonexistence_on_grid(&g, common.grid.unwrap_or(21), eps, &cfg)?;
            if let Some(path) = &csv {
                let file = fs::File::create(path).map_err(io_err(path))?;
                r.write_csv(&g, file)?;
            }
            let mut report = to_value(&r);
            report["instance"] = json!(g.name());
            emit(&report, common.report.as_deref())?;
            Ok(if r.exists {
                EXIT_OK
            } else {
                EXIT_VERDICT_FALSE
            })
        }
        Command::Gallery { name, params, emit } => {
            let mut map = BTreeMap::new();
            for p in &params {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--param expects K=V, got '{p}'")))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            let g: GameInstance<f64> = build_gallery(&name, &map)?;
            let text = g.to_json() + "\n";
            match &emit {
                Some(path) => fs::write(path, text).map_err(io_err(path))?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(CliError::Usage(format!(
                "cannot start {n} worker threads: {e}"
            ))),
        },
        None => execute(cli.command),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
