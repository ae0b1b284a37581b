use flexkv::harness::microbench::{transition_microbench, MicrobenchConfig};
use flexkv::harness::{run_experiment, sweep_fixed_k, write_csv, ExperimentConfig, PolicyMode};
use flexkv::stats::StatsCollector;
use flexkv::workload::{Op, WorkloadGenerator, WorkloadSpec};
use flexkv::{EngineConfig, FlsmTree, TransitionKind};

fn small_engine() -> EngineConfig {
    EngineConfig {
        buffer_capacity: 100 * 136,
        ..Default::default()
    }
}

fn fixed(k: usize, gamma: f64, missions: usize) -> ExperimentConfig {
    ExperimentConfig {
        engine: small_engine(),
        workload: WorkloadSpec::static_workload(gamma, missions, 1000)
            .with_preload(20_000)
            .with_key_space(100_000),
        policy: PolicyMode::Fixed { k },
        ..Default::default()
    }
}

#[test]
fn mission_lookup_counts_stay_within_binomial_bounds() {
    let spec = WorkloadSpec::dynamic_5session(20, 2000).with_preload(0);
    let gen = WorkloadGenerator::new(spec, 16, 112).unwrap();
    for m in gen {
        let n = m.ops.len() as f64;
        let p = m.lookup_fraction;
        let sd = (n * p * (1.0 - p)).sqrt();
        let dev = (m.lookups() as f64 - n * p).abs();
        assert!(dev <= 5.0 * sd + 1.0, "mission {}: {} lookups of {n} at {p}", m.index, m.lookups());
    }
}

#[test]
fn replaying_the_event_log_reproduces_mission_stats() {
    let mut tree = FlsmTree::new(small_engine()).unwrap();
    tree.stats_mut().set_record_wall_time(false);
    tree.stats_mut().enable_log();
    let spec = WorkloadSpec::static_workload(0.5, 3, 2000)
        .with_preload(0)
        .with_key_space(5000);
    for mission in WorkloadGenerator::new(spec, 16, 112).unwrap() {
        for op in &mission.ops {
            match op {
                Op::Lookup(k) => {
                    tree.get(k).unwrap();
                }
                Op::Update(k, v) => tree.put(k, v).unwrap(),
            }
        }
        let stats = tree.finalize_mission();
        let log = tree.stats_mut().take_log();
        let mut replay = StatsCollector::new(small_engine().max_levels);
        replay.set_record_wall_time(false);
        for e in log {
            replay.record_event(e).unwrap();
        }
        let mut again = replay.finalize_mission();
        again.mission = stats.mission;
        assert_eq!(again.levels, stats.levels);
        assert_eq!((again.lookups, again.updates), (stats.lookups, stats.updates));
        assert!((again.t_prime - stats.t_prime).abs() <= 1e-9 * stats.t_prime.max(1.0));
        let parts: f64 = stats.levels.iter().map(|l| l.time).sum();
        assert!((parts - stats.t_prime).abs() <= 1e-9 * stats.t_prime.max(1.0));
    }
}

#[test]
fn runs_are_reproducible_and_csv_has_fixed_columns() {
    let cfg = fixed(3, 0.5, 5);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.records, b.records);

    let mut buf = Vec::new();
    write_csv(&mut buf, &a.records, 3).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mission,session,gamma,t_prime_sim,wall_ms,K1,K2,K3,fill1,fill2,fill3,reads,writes,reward,action"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 15);
        assert_eq!(cols[0], i.to_string());
        assert_eq!(cols[4], "0.000");
        assert_eq!(cols[5], "3");
    }
}

#[test]
fn fixed_policies_hold_for_the_whole_run() {
    let res = run_experiment(&fixed(4, 0.3, 4)).unwrap();
    for r in &res.records {
        assert!(r.policies.iter().all(|k| *k == 4));
        assert!(r.action.is_empty());
    }
    let total: f64 = res.records.iter().map(|r| r.t_prime).sum();
    let ops: u64 = res.records.iter().map(|r| r.ops).sum();
    assert!((res.mean_latency_per_op - total / ops as f64).abs() < 1e-12);
}

#[test]
fn sweep_reports_each_policy() {
    let base = fixed(1, 0.5, 3);
    let sweep = sweep_fixed_k(&base, [1, 5, 10]).unwrap();
    let table = sweep.table();
    assert_eq!(table.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 5, 10]);
    let best = table.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert_eq!(sweep.best(), best);
}

#[test]
fn microbench_orders_transitions() {
    let cfg = MicrobenchConfig {
        engine: small_engine(),
        missions: 20,
        mission_size: 2000,
        preload: 30_000,
        key_space: 200_000,
        ..Default::default()
    };
    let greedy = transition_microbench(TransitionKind::Greedy, &cfg).unwrap();
    let flexible = transition_microbench(TransitionKind::Flexible, &cfg).unwrap();
    assert_eq!(greedy.series.len(), 20);
    assert!(greedy.spike_ratio() > flexible.spike_ratio());
    assert!(flexible.total() <= greedy.total());
}

#[test]
fn bad_configs_are_errors() {
    let mut cfg = fixed(11, 0.5, 2);
    assert!(run_experiment(&cfg).is_err());
    cfg.policy = PolicyMode::Fixed { k: 2 };
    cfg.workload.mission_size = 0;
    assert!(run_experiment(&cfg).is_err());
}
