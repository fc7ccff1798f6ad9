//! Command line driver: run orchestration, inequality batches,
//! convergence studies and the acceptance suites.
//!
//! Exit codes: 0 success, 1 acceptance criterion failed, 2 instability,
//! 3 configuration or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

use dkg_core::acceptance::run_suite;
use dkg_core::config::ConfigFile;
use dkg_core::driver::{convergence_study, execute, read_checkpoint, resume, ConvergeMode};
use dkg_core::ineq::{check, IneqId, IneqParams};
use dkg_core::Error;

#[derive(Parser)]
#[command(
    name = "dkg",
    about = "Numerical laboratory for the Dirac-Klein-Gordon system",
    version
)]
struct Cli {
    /// Worker threads for data-parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root; also read from DKG_OUTPUT_ROOT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configured system and emit reports.
    Run(RunArgs),
    /// Continue a run from a checkpoint file.
    Resume(ResumeArgs),
    /// Numerically exercise one functional inequality.
    Ineq(IneqArgs),
    /// Grid/time refinement study.
    Converge(ConvergeArgs),
    /// Acceptance suites (one pass/fail line per criterion).
    Accept(AcceptArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Stock configuration: "2d" or "3d" (optionally "3d:<mass>").
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct ResumeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct IneqArgs {
    /// Inequality id, e.g. EXT_HARDY, GAMMA0_RADIAL.
    #[arg(long)]
    ineq: String,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Weight exponent Lambda of the L^2-type lemmas.
    #[arg(long, default_value_t = 1.0)]
    big_lambda: f64,
    /// Weight exponent lambda of the sup-type lemmas.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// free | coupled | mms
    #[arg(long, default_value = "free")]
    mode: String,
}

#[derive(Args)]
struct AcceptArgs {
    /// algebra | conservation | convergence | identity | transforms |
    /// decay2d | mass3d | ineq | scattering | bootstrap | free | all
    #[arg(long, default_value = "all")]
    suite: String,
}

fn load_config(args: &RunArgs) -> Result<ConfigFile, Error> {
    match (&args.config, &args.preset) {
        (Some(path), _) => ConfigFile::load(path),
        (None, Some(preset)) => match preset.as_str() {
            "2d" => Ok(ConfigFile::default_2d()),
            "3d" => Ok(ConfigFile::default_3d(1.0)),
            other => {
                if let Some(mass) = other.strip_prefix("3d:") {
                    let m: f64 = mass
                        .parse()
                        .map_err(|_| Error::config(format!("bad mass '{mass}'")))?;
                    Ok(ConfigFile::default_3d(m))
                } else {
                    Err(Error::config(format!("unknown preset '{other}'")))
                }
            }
        },
        (None, None) => Err(Error::config("either --config or --preset is required")),
    }
}

fn out_dir(cli_out: &Option<PathBuf>, cfg_out: Option<&String>) -> Option<PathBuf> {
    if let Some(p) = cli_out {
        return Some(p.clone());
    }
    if let Some(p) = cfg_out {
        return Some(PathBuf::from(p));
    }
    std::env::var_os("DKG_OUTPUT_ROOT").map(PathBuf::from)
}

fn dispatch(cli: Cli) -> Result<(), (u8, String)> {
    let code_of = |e: &Error| -> u8 {
        match e {
            Error::Instability { .. } => 2,
            _ => 3,
        }
    };
    let fail = |e: Error| (code_of(&e), e.to_string());

    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (3, format!("cannot configure thread pool: {e}")))?;
    }

    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args).map_err(fail)?;
            let dir = out_dir(&cli.out, cfg.output.as_ref());
            let out = execute(&cfg, dir.as_deref()).map_err(fail)?;
            println!(
                "run complete: {} steps to t = {:.3}, sup|psi| = {:.3e}, sup|v| = {:.3e}",
                out.steps,
                out.final_state.t,
                out.rows.last().map(|r| r.sup_psi).unwrap_or(0.0),
                out.rows.last().map(|r| r.sup_v).unwrap_or(0.0),
            );
            if let Some(d) = dir {
                println!("artifacts in {}", d.display());
            }
            Ok(())
        }
        Command::Resume(args) => {
            let cfg = ConfigFile::load(&args.config).map_err(fail)?;
            let state = read_checkpoint(&args.checkpoint).map_err(fail)?;
            let dir = out_dir(&cli.out, cfg.output.as_ref());
            let out = resume(&cfg, state, dir.as_deref()).map_err(fail)?;
            println!(
                "resumed run complete: {} further steps to t = {:.3}",
                out.steps, out.final_state.t
            );
            Ok(())
        }
        Command::Ineq(args) => {
            let id = IneqId::parse(&args.ineq).map_err(fail)?;
            let params = IneqParams {
                dim: args.dim,
                resolution: args.resolution,
                samples: args.samples,
                seed: args.seed,
                big_lambda: args.big_lambda,
                lambda: args.lambda,
            };
            let report = check(id, &params).map_err(fail)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| (3, format!("cannot serialize report: {e}")))?;
            if let Some(dir) = out_dir(&cli.out, None) {
                let sub = dir.join("ineq");
                std::fs::create_dir_all(&sub).map_err(|e| (3, e.to_string()))?;
                let path = sub.join(format!("{}.json", id.as_str()));
                std::fs::write(&path, &json).map_err(|e| (3, e.to_string()))?;
                println!("wrote {}", path.display());
            }
            println!("{json}");
            if report.pass {
                Ok(())
            } else {
                Err((1, format!("{} did not pass", id.as_str())))
            }
        }
        Command::Converge(args) => {
            let cfg = ConfigFile::load(&args.config).map_err(fail)?;
            let mode = match args.mode.as_str() {
                "free" => ConvergeMode::Free,
                "coupled" => ConvergeMode::Coupled,
                "mms" => ConvergeMode::Mms,
                other => return Err((3, format!("unknown converge mode '{other}'"))),
            };
            let table = convergence_study(&cfg, args.levels, mode).map_err(fail)?;
            println!("mode: {}", table.mode);
            print!("{:>6} {:>8} {:>12}", "level", "points", "dt");
            for n in &table.quantity_names {
                print!(" {n:>18}");
            }
            println!();
            for row in &table.rows {
                print!("{:>6} {:>8} {:>12.5e}", row.level, row.points, row.dt);
                for e in &row.errors {
                    print!(" {e:>18.6e}");
                }
                println!();
            }
            print!("orders:");
            for (n, o) in table.quantity_names.iter().zip(table.orders.iter()) {
                match o {
                    Some(v) => print!(" {n} = {v:.2}"),
                    None => print!(" {n} = N/A"),
                }
            }
            println!();
            Ok(())
        }
        Command::Accept(args) => {
            let results = run_suite(&args.suite).map_err(fail)?;
            let mut all_pass = true;
            for r in &results {
                println!("{}", r.line());
                all_pass &= r.pass;
            }
            if all_pass {
                println!("suite '{}': all criteria PASS", args.suite);
                Ok(())
            } else {
                Err((1, format!("suite '{}' has failing criteria", args.suite)))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
