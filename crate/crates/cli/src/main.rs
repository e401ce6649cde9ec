use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use lrgw_cli::validate::Hooks;
use lrgw_cli::{init_threads, report, run, scale, validate, CliError, RunConfig, EXIT_FAILURE};

#[derive(Parser)]
#[command(name = "lrgw", version, about = "Low-rank dielectric inversion and static COHSEX self-energies")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides threads)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Self-energies and quasiparticle energies for the configured system
    Run(Common),
    /// Cross-check every stage against its oracle
    Validate {
        #[command(flatten)]
        common: Common,
        /// Flip the sign of the low-rank screened exchange (checks that validation catches it)
        #[arg(long, hide = true)]
        inject_sex_sign_flip: bool,
    },
    /// Time the low-rank inversion against the dense oracle over system sizes
    Scale {
        #[command(flatten)]
        common: Common,
        /// N_v = N_c per size, ascending (overrides scale.sizes)
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Option<Vec<usize>>,
    },
    /// Convert result JSON files into CSV tables
    Report {
        #[command(flatten)]
        common: Common,
        /// Result files; defaults to those found in the output directory
        inputs: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    init_threads(cfg.threads);
    let out = cfg.output.dir.clone();
    Ok((cfg, out))
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run(common) => {
            let (cfg, out) = load(&common)?;
            let r = run::cmd_run(&cfg, &out)?;
            println!(
                "{} bands, pipeline {:?}; results in {}",
                r.bands.len(),
                r.pipeline,
                out.display()
            );
            Ok(0)
        }
        Command::Validate {
            common,
            inject_sex_sign_flip,
        } => {
            let (cfg, out) = load(&common)?;
            let hooks = Hooks {
                flip_sex_sign: inject_sex_sign_flip,
            };
            let report = validate::cmd_validate(&cfg, hooks, &out)?;
            for c in &report.checks {
                let worst = c.worst.map_or("n/a".to_string(), |w| format!("{w:.3e}"));
                println!(
                    "{:<28} {}  worst {worst}  threshold {:.1e}",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.threshold
                );
            }
            Ok(if report.passed { 0 } else { EXIT_FAILURE })
        }
        Command::Scale { common, sizes } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(s) = sizes {
                cfg.scale.sizes = s;
            }
            let r = scale::cmd_scale(&cfg, &out)?;
            if let Some(l) = r.lowrank_slope {
                println!("low-rank exponent {l:.2}");
            }
            if let Some(d) = r.dense_slope {
                println!("dense exponent {d:.2}");
            }
            if let Some(s) = r.speedup_at_largest {
                println!("dense/low-rank time at largest size {s:.2}");
            }
            Ok(0)
        }
        Command::Report { common, inputs } => {
            let (_, out) = load(&common)?;
            for p in report::cmd_report(&inputs, &out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match dispatch(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lrgw: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
