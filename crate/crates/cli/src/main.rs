use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use entangle_cli::{run, CliError, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "entangle", version, about = "Measurement-based feedback entanglement of two modulated oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one parameter point and write the periodic solution.
    Solve(Common),
    /// Period-averaged negativity over a (g1, Ω) grid.
    Map(Common),
    /// Entanglement boundary in g0 for each efficiency.
    Boundary(Common),
    /// Negativity time traces, with the g1 = 0 reference.
    Trace(Common),
    /// Ensemble check of the excess noise.
    Montecarlo(Common),
}

#[derive(Args)]
struct Common {
    /// Strict TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the first `montecarlo.dump_count` trajectories.
    #[arg(long)]
    dump_trajectories: bool,
}

fn execute(mode: Mode, args: Common) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if cfg.mode != mode {
        return Err(CliError::Usage(format!(
            "{}: config is for `{}` but the subcommand is `{mode}`",
            args.config.display(),
            cfg.mode
        )));
    }
    if args.dump_trajectories && mode != Mode::Montecarlo {
        return Err(CliError::Usage("--dump-trajectories only applies to `montecarlo`".into()));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let out = args.out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    let start = Instant::now();
    let report = pool.install(|| run::run(&cfg, &out, args.dump_trajectories))?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    println!("{}", report.message);
    eprintln!("elapsed {:.2?} on {} threads", start.elapsed(), pool.current_num_threads());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Solve(a) => (Mode::Solve, a),
        Command::Map(a) => (Mode::Map, a),
        Command::Boundary(a) => (Mode::Boundary, a),
        Command::Trace(a) => (Mode::Trace, a),
        Command::Montecarlo(a) => (Mode::Montecarlo, a),
    };
    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
