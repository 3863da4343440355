use clap::{Args, Parser, Subcommand};
use rvlab::config::{parse_config, Parsed};
use rvlab::report::fmt_f64;
use rvlab::runner::{self, Outcome, EXIT_CONFIG, EXIT_OK};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rvlab", version, about = "Reduced-volume experiments on evolving metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized checks, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat warnings and inconclusive checks as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve, compute reduced volumes and run every check.
    Run { config: PathBuf },
    /// Randomized trace-identity and closed-form D checks.
    CheckIdentities { config: PathBuf },
    /// One minimizing L-geodesic, written as CSV.
    Geodesic {
        config: PathBuf,
        /// Start point, comma separated (`θ,φ` on the sphere).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        to: Vec<f64>,
        /// Flow time of the endpoint.
        #[arg(long)]
        time: f64,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Parsed, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut p = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        p.config.seed = s;
    }
    Ok(p)
}

fn finish(out: &Outcome, dir: &Path, strict: bool) -> ExitCode {
    print!("{}", out.summary());
    if let Err(e) = out.write(dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    let code = out.exit_code(strict);
    for r in out.failures() {
        eprintln!("failed: {} (max {} at node {:?})", r.check, fmt_f64(r.max_abs), r.worst_node);
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    if let Some(n) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let config_path = match &cli.command {
        Command::Run { config } | Command::CheckIdentities { config } | Command::Geodesic { config, .. } => config,
    };
    let parsed = match load(config_path, c.seed) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from(&parsed.config.outputs.directory));
    let result = match &cli.command {
        Command::Run { .. } => runner::run_experiment(&parsed.config, parsed.warnings.clone()).map(|o| finish(&o, &dir, c.strict)),
        Command::CheckIdentities { .. } => {
            runner::check_identities(&parsed.config, parsed.warnings.clone()).map(|o| finish(&o, &dir, c.strict))
        }
        Command::Geodesic { from, to, time, .. } => runner::geodesic(&parsed.config, from, to, *time).and_then(|g| {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("geodesic.csv"), &g.csv)?;
            let b = &g.result.best;
            println!("orientation = {}", g.orientation.name());
            println!("s1 = {}", fmt_f64(g.s1));
            println!("action = {}", fmt_f64(b.action));
            println!("reduced_distance = {}", fmt_f64(g.reduced_distance));
            println!("residual = {}", fmt_f64(b.residual));
            println!("converged = {}", b.converged);
            println!("tie = {}", g.result.tie);
            let code = if c.strict && (g.result.tie || !b.converged) { 1 } else { EXIT_OK };
            Ok(ExitCode::from(code as u8))
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(runner::error_exit_code(&e) as u8)
    })
}
