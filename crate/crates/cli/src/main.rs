use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};

use brokenpde_cli::commands::{self, CommonArgs, TransformKind};
use brokenpde_cli::output;
use brokenpde_cli::verify::{self, Suite};
use brokenpde_cli::CliError;

/// Numerical laboratory for elliptic equations with sign-broken conductivity.
#[derive(Parser)]
#[command(name = "brokenpde", version, about)]
struct Cli {
    /// Seed for all randomized sweeps.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Point argument in the form `x,y` (or `x` in one dimension).
#[derive(Debug, Clone, Copy)]
struct PointArg([f64; 2]);

impl FromStr for PointArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.is_empty() || parts.len() > 2 {
            return Err("expected `x,y`".into());
        }
        let mut p = [0.0; 2];
        for (k, part) in parts.iter().enumerate() {
            p[k] = part.trim().parse::<f64>().map_err(|e| e.to_string())?;
        }
        Ok(PointArg(p))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the broken problem described by a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a straightening transform to the solution.
    Transform {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: TransformKind,
        /// Base point for the frozen transform.
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        z: PointArg,
        /// Solution CSV to transform; solves the config when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the nodal set, normals and sign measures of a solution.
    Nodal {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the vanishing order of a field at a point.
    Order {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        z: PointArg,
        #[arg(long, default_value_t = 0.4)]
        r_max: f64,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frequency profile H, I, N over a radius range.
    Frequency {
        /// Transformed field w (CSV).
        #[arg(long = "in")]
        input: PathBuf,
        /// Field paired with the lower-order terms; defaults to `--in`.
        #[arg(long)]
        u: Option<PathBuf>,
        /// First-order coefficient field (vector CSV).
        #[arg(long)]
        bvec: Option<PathBuf>,
        /// Zero-order coefficient field (CSV).
        #[arg(long)]
        c: Option<PathBuf>,
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        z: PointArg,
        #[arg(long)]
        rmin: f64,
        #[arg(long)]
        rmax: f64,
        #[arg(long, default_value_t = 9)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve and compare against the matching reference solution.
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification suite and emit a pass/fail report.
    Verify {
        /// all | constant-coeff | regularity | order | measures | frequency |
        /// transforms | nodal-length
        #[arg(long, default_value = "all", value_parser = Suite::from_str)]
        suite: Suite,
        /// Where report.json and manifest.json go.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = CommonArgs { seed: cli.seed, threads: cli.threads };
    match cli.command {
        Command::Solve { config, out } => commands::cmd_solve(&config, &out, &common),
        Command::Transform { config, kind, z, input, out } => {
            commands::cmd_transform(&config, kind, z.0, input.as_deref(), &out, &common)
        }
        Command::Nodal { config, input, out } => {
            commands::cmd_nodal(&config, &input, &out, &common)
        }
        Command::Order { input, z, r_max, levels, out } => {
            commands::cmd_order(&input, z.0, r_max, levels, &out, &common)
        }
        Command::Frequency { input, u, bvec, c, z, rmin, rmax, steps, out } => {
            commands::cmd_frequency(
                &input,
                u.as_deref(),
                bvec.as_deref(),
                c.as_deref(),
                z.0,
                rmin,
                rmax,
                steps,
                &out,
                &common,
            )
        }
        Command::OracleCompare { config, out } => {
            commands::cmd_oracle_compare(&config, &out, &common)
        }
        Command::Verify { suite, out } => {
            let started = Instant::now();
            let results = verify::run_suite(suite, cli.seed)?;
            let mut failed = 0usize;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.summary());
                if !r.passed {
                    failed += 1;
                }
            }
            let report = serde_json::json!({
                "seed": cli.seed,
                "all_passed": failed == 0,
                "criteria": results.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
            });
            output::ensure_dir(&out)?;
            output::write_json(&out, "report.json", &report)?;
            output::write_manifest(
                &out,
                &output::Manifest {
                    command: "verify".into(),
                    config_sha256: None,
                    seed: cli.seed,
                    threads: cli.threads,
                    wall_time_s: started.elapsed().as_secs_f64(),
                },
            )?;
            if failed > 0 {
                return Err(CliError::Acceptance { failed, total: results.len() });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("BROKENPDE_LOG", "error"),
    )
    .init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
