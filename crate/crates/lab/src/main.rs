use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tdlab::walk::{bridge_fixture_csv, WalkLaw};
use tdlab_cli::{CliError, ExperimentConfig};

/// Runs one experiment and writes its data, metadata and verdicts to `--out`.
///
/// Exit status: 0 when every verdict passes, 1 when some verdict fails,
/// 2 for usage errors, 3 for numerical failures, 4 for I/O errors.
#[derive(Parser, Debug)]
#[command(name = "lab", version = env!("LAB_GIT_DESCRIBE"))]
struct Args {
    /// Experiment kind (dist, lemma22, equidist, renewal-srt, renewal-tied,
    /// renewal-llt, renewal-nagaev, renewal-continuous, map-tail, map-density,
    /// map-dk, map-tied, walk-bridge) or `fixtures` to rewrite the bridge
    /// golden fixtures into `--out`.
    kind: Option<String>,
    /// Read parameters from a `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// const, identity, exp-decay or clamp
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    /// Map family, T or R
    #[arg(long)]
    family: Option<String>,
    /// Horizon of the bridge Monte Carlo comparison
    #[arg(long)]
    mc_n: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("LAB_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

fn run(args: Args) -> Result<bool, CliError> {
    configure_threads()?;
    if args.kind.as_deref() == Some("fixtures") {
        let dir = args
            .out
            .ok_or_else(|| CliError::Usage("fixtures needs --out <dir>".into()))?;
        std::fs::create_dir_all(&dir)?;
        for n in [2, 4] {
            let path = dir.join(format!("bridge_n{n}.csv"));
            std::fs::write(&path, bridge_fixture_csv(&WalkLaw::lazy(), n)?)?;
            println!("wrote {}", path.display());
        }
        return Ok(true);
    }
    let mut cfg = match &args.config {
        Some(path) => {
            let doc = std::fs::read_to_string(path)?;
            let mut cfg = ExperimentConfig::parse(&doc)?;
            if let Some(kind) = &args.kind {
                cfg.kind = kind.parse()?;
            }
            cfg
        }
        None => {
            let kind = args
                .kind
                .as_deref()
                .ok_or_else(|| CliError::Usage("missing experiment kind".into()))?;
            ExperimentConfig::new(kind.parse()?)
        }
    };
    let flags = [
        ("gamma", &args.gamma),
        ("p", &args.p),
        ("xi", &args.xi),
        ("n", &args.n),
        ("trials", &args.trials),
        ("seed", &args.seed),
        ("g", &args.g),
        ("bins", &args.bins),
        ("iters", &args.iters),
        ("kappa", &args.kappa),
        ("family", &args.family),
        ("mc_n", &args.mc_n),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    let outcome = tdlab_cli::run_experiment(&cfg)?;
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("lab-out").join(cfg.kind.name()));
    outcome.write_to(&dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_document())?;
    for v in &outcome.verdicts {
        println!("{v}");
    }
    println!("wrote {}", dir.display());
    Ok(outcome.pass())
}
