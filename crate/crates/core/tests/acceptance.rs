//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Tolerances are fixed here and never adjusted per run.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use flexkv::analysis::{
    additional_cost_flexible, additional_cost_lazy, propagate_all, render_transition_table,
    transition_table, FlexibleFormula, TransitionCostInput,
};
use flexkv::engine::EngineConfig;
use flexkv::filter::{BloomFilter, FprSchedule};
use flexkv::harness::microbench::{
    flexible_extra_reads, transition_microbench, ExtraReadsConfig, MicrobenchConfig,
};
use flexkv::harness::{
    run_experiment, run_with_controller, sweep_fixed_k, Controller, Decision, ExperimentConfig,
    PolicyMode, SweepResult,
};
use flexkv::stats::MissionStats;
use flexkv::tuner::{
    ActorCritic, Batch, DdpgParams, ExperienceSample, LerpTuner, LevelState, TunerConfig,
};
use flexkv::workload::WorkloadSpec;
use flexkv::{FlsmTree, TransitionKind};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MISSION_SIZE: usize = 10_000;
/// Fixed policies settle within a few missions, so sweeps are shorter than
/// tuner runs.
const SWEEP_MISSIONS: usize = 150;
const RL_MISSIONS: usize = 400;
const RL_SEEDS: u64 = 10;
const DYNAMIC_MISSIONS_PER_SESSION: usize = 200;
const TUNER_START_POLICY: usize = 5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- 1, 2, 4

fn case_study() -> TransitionCostInput {
    TransitionCostInput {
        size_ratio: 10.0,
        capacity: 1_024_000.0,
        page_size: 4096.0,
        entry_size: 1024.0,
        old_policy: 5.0,
        new_policy: 4.0,
        fill: 0.5,
        fpr: 0.01,
        gamma: 0.5,
        updates_per_sec: 0.0,
    }
}

fn analytical_exactness() -> Outcome {
    let rows = transition_table(&case_study()).unwrap();
    let text = render_transition_table(&rows);
    let printed: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            (cols[0].to_string(), cols[3].to_string())
        })
        .collect();
    let want = [("greedy", "125.000"), ("lazy", "3.750"), ("flexible", "2.500")];
    let pass = want
        .iter()
        .all(|(k, v)| printed.iter().any(|(pk, pv)| pk == k && pv == v));
    outcome(pass, format!("printed {printed:?}"))
}

fn propagation_exactness() -> Outcome {
    let got = propagate_all(9, 7, 10, 4).unwrap();
    outcome(got == vec![9, 7, 3, 1], format!("{got:?}"))
}

fn dominance_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut checked, mut zero, mut worst) = (0, 0, 0.0f64);
    let mut bad = None;
    for _ in 0..10_000 {
        let t = rng.random_range(2..=20) as f64;
        let k = rng.random_range(1..=t as usize) as f64;
        let kp = rng.random_range(1..=t as usize) as f64;
        let input = TransitionCostInput {
            size_ratio: t,
            capacity: rng.random_range(1e5..1e9),
            page_size: 4096.0,
            entry_size: rng.random_range(16.0..2048.0),
            old_policy: k,
            new_policy: kp,
            fill: rng.random_range(0.01..=1.0),
            fpr: rng.random_range(1e-5..0.5),
            gamma: rng.random_range(0.01..0.99),
            updates_per_sec: 0.0,
        };
        let flex = additional_cost_flexible(&input).unwrap();
        let lazy = additional_cost_lazy(&input).unwrap();
        if k > kp {
            let x = input.fill;
            let want = (1.0 + x) / (2.0 * x);
            let rel = (lazy / flex - want).abs() / want;
            worst = worst.max(rel);
            checked += 1;
            if rel > 1e-12 {
                bad.get_or_insert(input);
            }
        } else {
            zero += 1;
            if flex != 0.0 {
                bad.get_or_insert(input);
            }
        }
    }
    outcome(
        bad.is_none(),
        format!("{checked} ratio samples (worst rel err {worst:.1e}), {zero} zero samples"),
    )
}

// ---------------------------------------------------------------- 3

fn tiny_engine(k: usize, dir: Option<std::path::PathBuf>) -> EngineConfig {
    EngineConfig {
        size_ratio: 4,
        key_width: 8,
        value_width: 8,
        page_size: 96,
        buffer_capacity: 8 * 24,
        initial_policy: k,
        persist_dir: dir,
        ..Default::default()
    }
}

fn run_bytes(tree: &FlsmTree, id: u64) -> Vec<u8> {
    std::fs::read(tree.run_path(id).unwrap()).unwrap()
}

fn flexible_guarantees() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 256,
        ..PropConfig::default()
    });
    let strategy = (
        1usize..=4,
        1usize..=4,
        proptest::collection::vec(any::<u16>(), 1..=16),
        proptest::collection::vec(any::<u16>(), 8),
    );
    let result = runner.run(&strategy, |(k, kp, before, after)| {
        let dir = tempfile::tempdir().unwrap();
        let mut t = FlsmTree::new(tiny_engine(k, Some(dir.path().to_path_buf()))).unwrap();
        for key in &before {
            t.put(&(*key as u64).to_be_bytes(), &[1; 8]).unwrap();
        }
        if t.buffer_len() > 0 {
            t.flush_buffer().unwrap();
        }
        let l1 = t.level(1).unwrap();
        let sealed: Vec<_> = l1.sealed_runs().cloned().collect();
        let files: Vec<Vec<u8>> = sealed.iter().map(|r| run_bytes(&t, r.id())).collect();
        let io = t.io_counters();

        t.apply_flexible(1, kp).unwrap();
        prop_assert_eq!(t.io_counters(), io);
        let l1 = t.level(1).unwrap();
        let now: Vec<_> = l1.sealed_runs().cloned().collect();
        prop_assert_eq!(&now[now.len() - sealed.len()..], &sealed[..]);
        for (r, bytes) in sealed.iter().zip(&files) {
            prop_assert_eq!(&run_bytes(&t, r.id()), bytes);
        }

        for key in &after {
            t.put(&(*key as u64 | 1 << 20).to_be_bytes(), &[2; 8]).unwrap();
        }
        let l1 = t.level(1).unwrap();
        let cap = l1.capacity() / kp as u64;
        prop_assert_eq!(l1.active_capacity(), cap);
        if let Some(active) = l1.active_run() {
            prop_assert_eq!(active.capacity(), cap);
            prop_assert!(active.data_size() <= cap);
        }
        for r in l1.sealed_runs().take(l1.sealed_runs().len() - sealed.len()) {
            prop_assert_eq!(r.capacity(), cap);
        }
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, "256 cases: 0 I/O, sealed runs and files unchanged, new capacity used"),
        Err(e) => outcome(false, format!("{e}")),
    }
}

// ---------------------------------------------------------------- 5, 6

fn simulation_vs_formula() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for x in [0.25, 0.5, 0.75] {
        let cfg = ExtraReadsConfig {
            fill: x,
            old_policy: 5,
            new_policy: 3,
            ..Default::default()
        };
        let (mut measured, mut predicted) = (0.0, 0.0);
        for seed in 0..20 {
            let m = flexible_extra_reads(&cfg, seed).unwrap();
            measured += m.measured_extra() / 20.0;
            predicted += m.predicted(FlexibleFormula::Table) / 20.0;
        }
        let rel = (measured - predicted) / predicted;
        pass &= rel.abs() <= 0.30;
        parts.push(format!("x={x}: {measured:.1} vs {predicted:.1} ({:+.1}%)", rel * 100.0));
    }
    outcome(pass, parts.join("; "))
}

fn transition_ordering() -> Outcome {
    let cfg = MicrobenchConfig::default();
    let run = |k| transition_microbench(k, &cfg).unwrap();
    let (g, l, f) = (
        run(TransitionKind::Greedy),
        run(TransitionKind::Lazy),
        run(TransitionKind::Flexible),
    );
    let order = f.total() <= l.total() && l.total() <= g.total();
    let pass = order && g.spike_ratio() >= 3.0 && f.spike_ratio() <= 1.2;
    outcome(
        pass,
        format!(
            "totals flexible {:.0} lazy {:.0} greedy {:.0}; spike greedy {:.2}x flexible {:.2}x",
            f.total(),
            l.total(),
            g.total(),
            g.spike_ratio(),
            f.spike_ratio()
        ),
    )
}

// ---------------------------------------------------------------- 7, 8, 9

fn static_config(gamma: f64, missions: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        workload: WorkloadSpec::static_workload(gamma, missions, MISSION_SIZE),
        seed,
        ..Default::default()
    }
}

fn tuner_config() -> TunerConfig {
    TunerConfig {
        start_policy: Some(TUNER_START_POLICY),
        ..Default::default()
    }
}

fn fmt_table(rows: &[(usize, f64)]) -> String {
    rows.iter()
        .map(|(k, l)| format!("{k}:{l:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

struct StaticSweeps {
    by_gamma: Vec<(f64, SweepResult)>,
}

impl StaticSweeps {
    fn run() -> Self {
        let by_gamma = [0.9, 0.1, 0.5]
            .into_iter()
            .map(|g| (g, sweep_fixed_k(&static_config(g, SWEEP_MISSIONS, 0), 1..=10).unwrap()))
            .collect();
        StaticSweeps { by_gamma }
    }

    fn get(&self, gamma: f64) -> &SweepResult {
        &self.by_gamma.iter().find(|(g, _)| *g == gamma).unwrap().1
    }
}

fn static_ordering(sweeps: &StaticSweeps) -> Outcome {
    let (r9, r1, r5) = (sweeps.get(0.9), sweeps.get(0.1), sweeps.get(0.5));
    let lat = |s: &SweepResult, k| s.latency_of(k).unwrap();
    // "Beats by 20%": the loser is at least 1.2 times slower.
    let read_heavy = lat(r9, 10) >= 1.2 * lat(r9, 1);
    let write_heavy = lat(r1, 1) >= 1.2 * lat(r1, 10);
    let interior = (2..=9).contains(&r5.best());
    outcome(
        read_heavy && write_heavy && interior,
        format!(
            "g=0.9 K10/K1={:.2}; g=0.1 K1/K10={:.2}; g=0.5 best K={} [{}]",
            lat(r9, 10) / lat(r9, 1),
            lat(r1, 1) / lat(r1, 10),
            r5.best(),
            fmt_table(&r5.table())
        ),
    )
}

fn rl_convergence(sweeps: &StaticSweeps) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma in [0.9, 0.1] {
        let best = sweeps.get(gamma).best();
        let mut hits = 0;
        let mut finals = Vec::new();
        for seed in 0..RL_SEEDS {
            let cfg = ExperimentConfig {
                policy: PolicyMode::Rl {
                    tuner: tuner_config(),
                },
                ..static_config(gamma, RL_MISSIONS, seed)
            };
            let r = run_experiment(&cfg).unwrap();
            let k = r.final_policies[0];
            let ok = r.converged_at.is_some() && k.abs_diff(best) <= 1;
            hits += usize::from(ok);
            finals.push(match r.converged_at {
                Some(m) => format!("{k}@{m}"),
                None => format!("{k}@-"),
            });
        }
        pass &= hits >= 8;
        parts.push(format!(
            "g={gamma}: best K={best}, {hits}/{RL_SEEDS} [{}]",
            finals.join(" ")
        ));
    }
    outcome(pass, parts.join("; "))
}

/// Records whether the tuner is settled after every mission.
struct Watched {
    inner: LerpTuner,
    settled: Vec<bool>,
}

impl Controller for Watched {
    fn start(&mut self, tree: &mut FlsmTree) -> flexkv::Result<()> {
        self.inner.start(tree)
    }

    fn end_of_mission(&mut self, stats: &MissionStats, tree: &mut FlsmTree) -> flexkv::Result<Decision> {
        let d = self.inner.end_of_mission(stats, tree)?;
        self.settled.push(self.inner.is_converged());
        Ok(d)
    }

    fn converged_at(&self) -> Option<usize> {
        self.inner.converged_at()
    }
}

fn average_ranks(rows: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|&x| {
            let below = rows.iter().filter(|&&y| y < x).count() as f64;
            let ties = rows.iter().filter(|&&y| y == x).count() as f64;
            below + (ties + 1.0) / 2.0
        })
        .collect()
}

fn dynamic_tracking() -> Outcome {
    let per = DYNAMIC_MISSIONS_PER_SESSION;
    let base = ExperimentConfig {
        workload: WorkloadSpec::dynamic_5session(per, MISSION_SIZE),
        ..Default::default()
    };
    let sweep = sweep_fixed_k(&base, 1..=10).unwrap();
    let cfg = ExperimentConfig {
        policy: PolicyMode::Rl {
            tuner: tuner_config(),
        },
        ..base.clone()
    };
    let mut ctrl = Watched {
        inner: LerpTuner::new(tuner_config(), &cfg.engine, cfg.transition, cfg.seed).unwrap(),
        settled: Vec::new(),
    };
    let res = run_with_controller(&cfg, &mut ctrl).unwrap();

    let baselines = [1usize, 5, 10];
    let mut within = true;
    let mut rank_sums = [0.0f64; 4];
    let mut parts = Vec::new();
    for s in 0..5 {
        let first = s * per;
        let settled_at = (first..first + per).find(|&m| ctrl.settled[m]);
        // Without a settled point in the session, its final quarter stands in.
        let from = settled_at.map_or(first + per * 3 / 4, |m| m + 1);
        let post = res.mean_latency_where(|m| m.session == s && m.mission >= from);
        let best_k = sweep.session_best(s);
        let best = sweep.session_table(s)[best_k - 1].1;
        let gap = post / best - 1.0;
        within &= gap <= 0.15;

        let whole = res.mean_latency_where(|m| m.session == s);
        let table = sweep.session_table(s);
        let mut row = vec![whole];
        row.extend(baselines.iter().map(|&k| table[k - 1].1));
        for (i, r) in average_ranks(&row).into_iter().enumerate() {
            rank_sums[i] += r;
        }
        parts.push(format!(
            "s{s}: post {post:.3} vs K{best_k} {best:.3} ({:+.0}%{})",
            gap * 100.0,
            if settled_at.is_some() { "" } else { ", unsettled" }
        ));
    }
    let ranks: Vec<f64> = rank_sums.iter().map(|r| r / 5.0).collect();
    let strictly_best = ranks[1..].iter().all(|&r| ranks[0] < r);
    parts.push(format!(
        "avg rank tuner {:.1}, K1 {:.1}, K5 {:.1}, K10 {:.1}",
        ranks[0], ranks[1], ranks[2], ranks[3]
    ));
    outcome(within && strictly_best, parts.join("; "))
}

// ---------------------------------------------------------------- 10

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Batch {
    let state = |rng: &mut ChaCha8Rng| LevelState(std::array::from_fn(|_| rng.random_range(0.0..1.0)));
    let samples: Vec<ExperienceSample> = (0..n)
        .map(|_| ExperienceSample {
            state: state(rng),
            action: rng.random_range(-1.0..=1.0),
            reward: rng.random_range(-2.0..0.0),
            next_state: state(rng),
        })
        .collect();
    Batch::from_samples(&samples.iter().collect::<Vec<_>>())
}

fn worst_relative_error(params: Vec<f64>, analytic: Vec<f64>, mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut p = params;
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss(&p);
        p[i] = orig - h;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = numeric.abs().max(analytic[i].abs());
        if scale > 1e-7 {
            worst = worst.max((numeric - analytic[i]).abs() / scale);
        }
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let params = DdpgParams {
        hidden_width: 32,
        hidden_layers: 3,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let ac = ActorCritic::new(params, &mut rng);
    let batch = random_batch(&mut rng, 16);
    let targets = ac.critic_targets(&batch);
    let mut probe = ac.clone();

    let (_, cg) = ac.critic_loss_and_grads(&batch, &targets);
    let critic = worst_relative_error(ac.critic.flat_params(), cg.flat(), |p| {
        probe.critic.set_flat_params(p);
        probe.critic_loss(&batch, &targets)
    });
    probe.critic = ac.critic.clone();
    let (_, ag) = ac.actor_loss_and_grads(&batch);
    let actor = worst_relative_error(ac.actor.flat_params(), ag.flat(), |p| {
        probe.actor.set_flat_params(p);
        probe.actor_loss(&batch)
    });
    outcome(
        critic < 1e-4 && actor < 1e-4,
        format!("worst relative error critic {critic:.1e}, actor {actor:.1e}"),
    )
}

// ---------------------------------------------------------------- 11

fn bloom_behavior() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut probes = 0u64;
    let mut misses = 0u64;
    while probes < 1_000_000 {
        let n = rng.random_range(1..20_000usize);
        let fpr = rng.random_range(1e-4..0.3);
        let keys: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..40);
                (0..len).map(|_| rng.random()).collect()
            })
            .collect();
        let filter = BloomFilter::build(keys.iter().map(|k| &k[..]), fpr).unwrap();
        for k in &keys {
            probes += 1;
            misses += u64::from(!filter.may_contain(k));
        }
    }

    let n = 100_000u64;
    let bits = 10 * n;
    let hashes = (10.0 * LN_2).round() as u32;
    let mut filter = BloomFilter::with_geometry(bits, hashes);
    for i in 0..n {
        filter.insert(&i.to_be_bytes());
    }
    let target = (1.0 - (-(hashes as f64) * n as f64 / bits as f64).exp()).powi(hashes as i32);
    let trials = 1_000_000u64;
    let fp = (n..n + trials).filter(|i| filter.may_contain(&i.to_be_bytes())).count();
    let measured = fp as f64 / trials as f64;
    let fpr_ok = measured >= 0.5 * target && measured <= 2.0 * target;

    let mut monkey_ok = true;
    for t in [2usize, 4, 10] {
        let s = FprSchedule::monkey(1e-6, t);
        for i in 1..15 {
            let want = (t as f64 * s.level_fpr(i)).min(1.0);
            monkey_ok &= (s.level_fpr(i + 1) - want).abs() <= 1e-12 * want;
        }
    }
    outcome(
        misses == 0 && fpr_ok && monkey_ok,
        format!(
            "{misses} false negatives in {probes} probes; fpr {measured:.5} vs {target:.5}; monkey schedule {}",
            if monkey_ok { "ok" } else { "broken" }
        ),
    )
}

// ---------------------------------------------------------------- 12

fn differential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut tree = FlsmTree::new(tiny_engine(2, None)).unwrap();
    let mut oracle: BTreeMap<u64, u64> = BTreeMap::new();
    let (mut transitions, mut forced) = (0, 0);
    for op in 0..100_000u64 {
        let roll = rng.random_range(0..1000);
        if roll < 550 {
            let k = rng.random_range(0..4000u64);
            tree.put(&k.to_be_bytes(), &op.to_be_bytes()).unwrap();
            oracle.insert(k, op);
        } else if roll < 995 {
            let k = rng.random_range(0..4400u64);
            let got = tree.get(&k.to_be_bytes()).unwrap();
            let want = oracle.get(&k).map(|v| v.to_be_bytes().to_vec());
            if got != want {
                return outcome(false, format!("op {op}: key {k} got {got:?}, want {want:?}"));
            }
        } else if roll < 998 {
            let level = rng.random_range(1..=tree.level_count().max(1));
            if tree.level(level).is_some() {
                tree.apply_flexible(level, rng.random_range(1..=4)).unwrap();
                transitions += 1;
            }
        } else if tree.level_count() > 0 {
            let level = rng.random_range(1..=tree.level_count());
            let k = tree.level(level).unwrap().policy();
            tree.apply_greedy(level, k).unwrap();
            forced += 1;
        }
    }
    let scanned: Vec<(Vec<u8>, Vec<u8>)> = tree.scan_all();
    let expected: Vec<(Vec<u8>, Vec<u8>)> = oracle
        .iter()
        .map(|(k, v)| (k.to_be_bytes().to_vec(), v.to_be_bytes().to_vec()))
        .collect();
    let sorted = tree
        .levels()
        .iter()
        .flat_map(|l| l.runs())
        .all(|r| r.entries().windows(2).all(|w| w[0].key < w[1].key));
    outcome(
        scanned == expected && sorted,
        format!(
            "100000 ops, {transitions} flexible transitions, {forced} forced compactions, {} levels, {} keys",
            tree.level_count(),
            expected.len()
        ),
    )
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |id: &str, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {id} {name} ({:.1}s): {}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    };
    report("C01", "analytical_exactness", &mut analytical_exactness);
    report("C02", "propagation_exactness", &mut propagation_exactness);
    report("C03", "flexible_transition_guarantees", &mut flexible_guarantees);
    report("C04", "dominance_law", &mut dominance_law);
    report("C05", "simulation_vs_formula", &mut simulation_vs_formula);
    report("C06", "transition_ordering", &mut transition_ordering);
    let sweeps = StaticSweeps::run();
    report("C07", "static_optimality_ordering", &mut || static_ordering(&sweeps));
    report("C08", "rl_convergence", &mut || rl_convergence(&sweeps));
    report("C09", "dynamic_tracking", &mut dynamic_tracking);
    report("C10", "gradient_correctness", &mut gradient_correctness);
    report("C11", "bloom_behavior", &mut bloom_behavior);
    report("C12", "differential_correctness", &mut differential);
    println!(
        "acceptance: {} of 12 passed in {:.0}s",
        12 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
