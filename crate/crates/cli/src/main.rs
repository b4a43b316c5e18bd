use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magnon_rc::aor::{AnnSpec, Aor};
use magnon_rc::experiment::{
    emit_report, memory_benchmark, read_trials, run_experiment, ExperimentConfig, FeatureCache, MemorySpec, TrialReport,
};
use magnon_rc::readout::{ann_gradient_probe, ProbeSetup};

/// Spin-wave reservoir experiments.
#[derive(Debug, Parser)]
#[command(name = "magnon-rc", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Overrides the seed of the config or subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Reuse reservoir features across runs that share physics.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the trial protocol of an experiment config.
    Run {
        config: PathBuf,
        /// Base for relative dataset paths (default: current directory).
        #[arg(long)]
        data_root: Option<PathBuf>,
    },
    /// Input-memory and parity accuracy against delay for the ring.
    BenchMemory {
        /// Experiment config whose `aor` section is used; desk defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        j_max: usize,
        #[arg(long, default_value_t = 200)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        /// Input value standing for bit 1 (bit 0 is 0).
        #[arg(long, default_value_t = 1.0)]
        high: f64,
    },
    /// Forward-difference sensitivity of the readout loss to the network weights.
    GradientProbe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        intervals: usize,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        /// Comma-separated parameter indices (default: all).
        #[arg(long, value_delimiter = ',')]
        params: Option<Vec<usize>>,
    },
    /// Recompute the summary of one or more trial files.
    Report {
        #[arg(required = true)]
        trials: Vec<PathBuf>,
        #[arg(long, default_value = "combined")]
        name: String,
    },
}

fn aor_section(config: Option<&Path>) -> magnon_rc::Result<magnon_rc::aor::AorConfig> {
    Ok(match config {
        Some(p) => ExperimentConfig::load(p)?.aor,
        None => magnon_rc::aor::AorConfig::desk(),
    })
}

fn print_report(report: &TrialReport) {
    println!(
        "{:<10} {:<10} {:<5} {:>6} {:>7} {:>7} {:>6}",
        "method", "encoding", "ann", "trials", "max", "mean", "std"
    );
    for a in report.aggregates.iter().filter(|a| a.split.is_none()) {
        println!(
            "{:<10} {:<10} {:<5} {:>6} {:>7.2} {:>7.2} {:>6.2}",
            a.method, a.encoding, a.ann_flag, a.trials, a.max, a.mean, a.std
        );
    }
}

fn execute(cli: Cli) -> magnon_rc::Result<()> {
    let g = cli.global;
    std::fs::create_dir_all(&g.out_dir).map_err(|e| magnon_rc::Error::Io {
        path: g.out_dir.clone(),
        source: e,
    })?;
    match cli.command {
        Command::Run { config, data_root } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            let cache = g.cache_dir.map(FeatureCache::new).transpose()?;
            let base = data_root.unwrap_or_else(|| PathBuf::from("."));
            let outcome = run_experiment(&cfg, &base, cache.as_ref())?;
            let files = emit_report(&outcome.report, &g.out_dir)?;
            print_report(&outcome.report);
            println!("trials:  {}", files.trials.display());
            println!("summary: {}", files.summary.display());
            if let Some(o) = outcome.overlay {
                let p = g.out_dir.join(format!("{}_overlay.csv", outcome.report.name));
                o.write_csv(&p)?;
                println!("overlay: {}", p.display());
            }
        }
        Command::BenchMemory {
            config,
            j_max,
            n_train,
            n_test,
            high,
        } => {
            let cfg = aor_section(config.as_deref())?;
            let ann = AnnSpec::seeded(cfg.seed);
            let spec = MemorySpec {
                j_max,
                n_train,
                n_test,
                seed: g.seed.unwrap_or(0),
                levels: (0.0, high),
            };
            let curve = memory_benchmark(&Aor::new(cfg)?, &ann, &spec)?;
            println!("{:>5} {:>8} {:>10} {:>8} {:>10}", "delay", "memory", "p", "parity", "p");
            for p in &curve.points {
                let par = p.parity.map_or_else(|| "-".into(), |v| format!("{v:.1}"));
                let pp = p.parity_p.map_or_else(|| "-".into(), |v| format!("{v:.2e}"));
                println!(
                    "{:>5} {:>8.1} {:>10.2e} {:>8} {:>10}",
                    p.delay, p.memory, p.memory_p, par, pp
                );
            }
            let path = g.out_dir.join("memory.csv");
            curve.write_csv(&path)?;
            println!("curve: {}", path.display());
        }
        Command::GradientProbe {
            config,
            intervals,
            delta,
            params,
        } => {
            let cfg = aor_section(config.as_deref())?;
            let ann = AnnSpec::seeded(cfg.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed.unwrap_or(0));
            let inputs: Vec<f64> = (0..intervals).map(|_| rng.random::<f64>()).collect();
            let setup = ProbeSetup {
                targets: inputs.clone(),
                inputs,
                delta,
                indices: params,
            };
            let report = ann_gradient_probe(&Aor::new(cfg)?, &ann, &setup)?;
            let path = g.out_dir.join("gradient_probe.csv");
            report.write_csv(&path)?;
            println!(
                "parameters {}  nonzero {}  max |g| {:.3e}  base loss {:.4e}",
                report.estimates.len(),
                report.nonzero(),
                report.max_abs(),
                report.base_loss
            );
            println!("estimates: {}", path.display());
        }
        Command::Report { trials, name } => {
            let mut rows = Vec::new();
            for t in &trials {
                rows.extend(read_trials(t)?);
            }
            let report = TrialReport::new(name, rows);
            let files = emit_report(&report, &g.out_dir)?;
            print_report(&report);
            println!("summary: {}", files.summary.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // the message already embeds its source chain
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
