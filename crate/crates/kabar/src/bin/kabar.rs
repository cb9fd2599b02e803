use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kabar::driver::{self, Mode, RefineConfig};
use kabar::error::KabarError;
use kabar::io;
use kabar::partition::Partition;

/// Refine a k-way partition to perfect balance with minimized edge cut.
#[derive(Parser, Debug)]
#[command(name = "kabar", version)]
struct Args {
    /// Graph file (METIS/Chaco format)
    #[arg(long)]
    graph: PathBuf,
    /// Number of blocks (inferred from --input-partition when omitted)
    #[arg(long)]
    k: Option<usize>,
    /// Existing partition to refine; otherwise a seeded partition is grown
    #[arg(long)]
    input_partition: Option<PathBuf>,
    /// Imbalance allowance for the seed partitions
    #[arg(long, default_value_t = 0.04)]
    epsilon: f64,
    /// basic or advanced
    #[arg(long, default_value = "advanced")]
    mode: String,
    /// Max node movements per directed local search
    #[arg(long)]
    tau: Option<usize>,
    /// Packing iterations
    #[arg(long)]
    mu: Option<usize>,
    /// Unsuccessful iterations before a balancing step
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// RNG seed (falls back to $KABAR_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output partition file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics file, one JSON object per trial
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Drop inter-layer backward edges from the model
    #[arg(long, default_value_t = false)]
    conflict_free: bool,
    /// Disable zero-weight-cycle diversification
    #[arg(long, default_value_t = false)]
    no_zero_cycles: bool,
}

fn run(args: &Args) -> Result<ExitCode, KabarError> {
    let graph_text = std::fs::read_to_string(&args.graph)?;
    let g = io::parse_graph(&graph_text)?;

    let input = match &args.input_partition {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let assign = io::parse_partition(&text, g.num_nodes())?;
            Some(assign)
        }
        None => None,
    };
    let k = match (args.k, &input) {
        (Some(k), _) => k,
        (None, Some(assign)) => assign.iter().copied().max().map_or(1, |m| m as usize + 1),
        (None, None) => {
            return Err(KabarError::InvalidInput(
                "--k is required without --input-partition".into(),
            ))
        }
    };

    let seed = args
        .seed
        .or_else(|| std::env::var("KABAR_SEED").ok()?.parse().ok())
        .unwrap_or(0);
    let mut cfg = RefineConfig::defaults_for_k(k);
    cfg.seed = seed;
    cfg.mode = match args.mode.as_str() {
        "basic" => Mode::Basic,
        "advanced" => Mode::Advanced,
        other => {
            return Err(KabarError::InvalidInput(format!(
                "unknown mode '{other}' (use basic or advanced)"
            )))
        }
    };
    if let Some(tau) = args.tau {
        cfg.tau = tau.max(1);
    }
    if let Some(mu) = args.mu {
        cfg.mu = mu.max(1);
    }
    if let Some(lambda) = args.lambda {
        cfg.lambda = lambda.max(1);
    }
    cfg.conflict_free = args.conflict_free;
    cfg.zero_cycle_diversification = !args.no_zero_cycles;

    let start = std::time::Instant::now();
    let (best, metrics) = match input {
        Some(assign) => {
            let p0 = Partition::from_assignment(&g, k, args.epsilon, assign)?;
            let input_cut = p0.cut();
            let (p, trace) = driver::kabar_refine(&g, &p0, &cfg)?;
            let metrics = vec![driver::TrialMetrics {
                trial: 0,
                seed,
                epsilon_used: args.epsilon,
                tau: cfg.tau,
                mu: cfg.mu,
                lambda: cfg.lambda,
                cut: p.cut(),
                max_block_size: p.block_sizes().iter().copied().max().unwrap_or(0),
                perfectly_balanced: p.is_perfectly_balanced(),
                iterations: trace.iterations,
                balance_steps: trace.balance_steps,
                event_deltas: trace.events.iter().map(|e| e.realized_delta).collect(),
                wall_ms: start.elapsed().as_millis(),
            }];
            eprintln!("input cut {input_cut}, refined cut {}", p.cut());
            (p, metrics)
        }
        None => driver::portfolio_run(&g, k, args.trials, args.epsilon, &cfg, args.threads)?,
    };

    println!(
        "cut {} | max block size {} | cap {} | balanced {} | {} ms",
        best.cut(),
        best.block_sizes().iter().max().unwrap(),
        best.ceil_cap(),
        best.is_perfectly_balanced(),
        start.elapsed().as_millis()
    );

    if let Some(out) = &args.out {
        std::fs::write(out, io::emit_partition(best.assignment()))?;
    }
    if let Some(path) = &args.metrics {
        let mut text = String::new();
        for m in &metrics {
            text.push_str(&serde_json::to_string(m).expect("metrics serialize"));
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            // clap handles --help/--version with success
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&args) {
        Ok(code) => code,
        Err(e @ KabarError::Io(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e @ (KabarError::InvalidInput(_) | KabarError::Parse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
