//! `flexkv` command-line harness.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use flexkv::analysis::{render_transition_table, transition_table, TransitionCostInput};
use flexkv::harness::microbench::{transition_microbench, MicrobenchConfig};
use flexkv::harness::{run_experiment, sweep_fixed_k, write_csv, ExperimentConfig};
use flexkv::workload::WorkloadSpec;
use flexkv::TransitionKind;

#[derive(Parser)]
#[command(name = "flexkv", version, about = "Flexible LSM-tree experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write per-mission metrics.
    Run(ExperimentArgs),
    /// Run every fixed policy on the same workload and report the best.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        /// Defaults to the size ratio.
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Switch every level from one policy to another halfway through a
    /// balanced workload.
    Microbench(MicrobenchArgs),
    /// Print transition costs, delays and additional costs.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Workload description (JSON); replaces the one in the config.
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)
                .with_context(|| format!("loading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.workload {
            cfg.workload = WorkloadSpec::from_json_file(p)
                .with_context(|| format!("loading workload {}", p.display()))?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MicrobenchArgs {
    /// greedy, lazy, flexible or all.
    #[arg(long, default_value = "all")]
    transition: String,
    #[arg(long, default_value_t = 60)]
    missions: usize,
    #[arg(long, default_value_t = 10_000)]
    mission_size: usize,
    #[arg(long, default_value_t = 200_000)]
    preload: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    from: usize,
    #[arg(long, default_value_t = 10)]
    to: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long = "T")]
    size_ratio: f64,
    #[arg(long = "C")]
    capacity: f64,
    #[arg(long = "B")]
    page_size: f64,
    #[arg(long = "E")]
    entry_size: f64,
    #[arg(long = "K")]
    old_policy: f64,
    #[arg(long = "Kp")]
    new_policy: f64,
    #[arg(long = "x")]
    fill: f64,
    #[arg(long = "f")]
    fpr: f64,
    #[arg(long = "gamma")]
    gamma: f64,
    #[arg(long = "Nu", default_value_t = 0.0)]
    updates_per_sec: f64,
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn run(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.load()?;
    create_out(&args.out)?;
    let result = run_experiment(&cfg)?;
    let csv_path = args.out.join("metrics.csv");
    let f = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(BufWriter::new(f), &result.records, cfg.engine.max_levels)?;
    let summary = serde_json::json!({
        "seed": cfg.seed,
        "mean_latency_per_op": result.mean_latency_per_op,
        "final_policies": result.final_policies,
        "converged_at": result.converged_at,
        "sessions": result.sessions,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    println!("missions: {}", result.records.len());
    for s in &result.sessions {
        println!(
            "session {} gamma {:.2}: mean latency/op {:.4}, policies {:?}",
            s.session, s.gamma, s.mean_latency_per_op, s.final_policies
        );
    }
    println!("overall mean latency/op {:.4}", result.mean_latency_per_op);
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn sweep(exp: &ExperimentArgs, k_min: usize, k_max: Option<usize>) -> Result<()> {
    let cfg = exp.load()?;
    let k_max = k_max.unwrap_or(cfg.engine.size_ratio);
    if k_min < 1 || k_min > k_max || k_max > cfg.engine.size_ratio {
        bail!("policy range {k_min}..={k_max} must lie within 1..={}", cfg.engine.size_ratio);
    }
    create_out(&exp.out)?;
    let result = sweep_fixed_k(&cfg, k_min..=k_max)?;
    let path = exp.out.join("sweep.csv");
    let mut w = String::from("K,mean_latency_per_op\n");
    for (k, l) in result.table() {
        println!("K={k:2}  mean latency/op {l:.4}");
        w.push_str(&format!("{k},{l:.6}\n"));
    }
    fs::write(&path, w).with_context(|| format!("writing {}", path.display()))?;
    println!("best K = {}", result.best());
    Ok(())
}

fn microbench(args: &MicrobenchArgs) -> Result<()> {
    let kinds: Vec<TransitionKind> = if args.transition.eq_ignore_ascii_case("all") {
        TransitionKind::ALL.to_vec()
    } else {
        vec![args.transition.parse()?]
    };
    let cfg = MicrobenchConfig {
        missions: args.missions,
        mission_size: args.mission_size,
        preload: args.preload,
        gamma: args.gamma,
        from_policy: args.from,
        to_policy: args.to,
        seed: args.seed,
        ..Default::default()
    };
    create_out(&args.out)?;
    for kind in kinds {
        let r = transition_microbench(kind, &cfg)?;
        let path = args.out.join(format!("microbench_{kind}.csv"));
        let mut text = String::from("mission,read_time,write_time,t_prime_sim\n");
        for m in &r.series {
            text.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                m.mission, m.read_time, m.write_time, m.t_prime
            ));
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{kind:<8} total {:.1}  transition-mission write {:.1} ({:.2}x trailing average)",
            r.total(),
            r.transition_write_time(),
            r.spike_ratio()
        );
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let input = TransitionCostInput {
        size_ratio: a.size_ratio,
        capacity: a.capacity,
        page_size: a.page_size,
        entry_size: a.entry_size,
        old_policy: a.old_policy,
        new_policy: a.new_policy,
        fill: a.fill,
        fpr: a.fpr,
        gamma: a.gamma,
        updates_per_sec: a.updates_per_sec,
    };
    let rows = transition_table(&input)?;
    print!("{}", render_transition_table(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep { exp, k_min, k_max } => sweep(exp, *k_min, *k_max),
        Command::Microbench(a) => microbench(a),
        Command::Analyze(a) => analyze(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
