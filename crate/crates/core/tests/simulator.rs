use ctxmatch::market::presets;
use ctxmatch::simulator::{read_trace, write_trace_file, AgentMode, RunConfig};
use ctxmatch::{run, summarize, Algorithm, Error};

#[test]
fn oracle_agents_have_zero_regret() {
    for inst in [
        presets::uniform_gap_basic(),
        presets::delta_example(0.05, 10),
    ] {
        let mut cfg = RunConfig::new(Algorithm::Etpgs, 2_000, 3);
        cfg.mode = AgentMode::Oracle;
        let r = run(&inst, &cfg).unwrap();
        assert!(r.replications[0]
            .ledger
            .cumulative
            .iter()
            .all(|&x| x == 0.0));
    }
}

#[test]
fn table1_regret_grows_linearly_for_p2() {
    let inst = presets::table1_counterexample();
    let mut cfg = RunConfig::new(Algorithm::Etpgs, 4_000, 0);
    cfg.mode = AgentMode::KnownRankings;
    assert!(matches!(run(&inst, &cfg), Err(Error::ValidationFailed(_))));
    cfg.skip_validation = true;
    let r = run(&inst, &cfg).unwrap();
    let rep = &r.replications[0];
    let half = rep.checkpoints.iter().position(|&t| t == 2_000).unwrap();
    let p2_half = rep.curve[half][1];
    let p2_full = rep.ledger.cumulative[1];
    assert!(p2_full >= 0.4 * rep.ledger.optimal_total[1]);
    assert!((p2_full / p2_half - 2.0).abs() < 0.05);
}

#[test]
fn conservation_of_rounds() {
    let inst = presets::piecewise_stationary();
    let mut cfg = RunConfig::new(Algorithm::Cdetpgs, 20_000, 5);
    cfg.replications = 2;
    let r = run(&inst, &cfg).unwrap();
    for rep in &r.replications {
        for i in 0..inst.n_agents {
            assert_eq!(rep.explore_rounds[i] + rep.gs_rounds[i], 20_000);
        }
        assert_eq!(rep.classes.total(), 20_000);
    }
}

#[test]
fn same_seed_same_trace_bytes() {
    let inst = presets::delta_example(0.1, 5);
    let mut cfg = RunConfig::new(Algorithm::Ietpgs, 3_000, 11);
    cfg.trace = true;
    cfg.replications = 2;
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let r = run(&inst, &cfg).unwrap();
        let rows: Vec<_> = r.trace_rows().cloned().collect();
        let p = dir.path().join(format!("t{k}.csv"));
        write_trace_file(&p, &rows).unwrap();
        assert_eq!(read_trace(&p).unwrap(), rows);
        bytes.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    cfg.seed = 12;
    let other: Vec<_> = run(&inst, &cfg).unwrap().trace_rows().cloned().collect();
    assert_ne!(other, read_trace(&dir.path().join("t0.csv")).unwrap());
}

#[test]
fn single_replication_summary_matches_run() {
    let inst = presets::uniform_gap_basic();
    let cfg = RunConfig::new(Algorithm::Etpgs, 5_000, 2);
    let r = run(&inst, &cfg).unwrap();
    let s = summarize(&inst, &r);
    let rep = &r.replications[0];
    assert_eq!(s.final_regret_mean, rep.ledger.total());
    let last = s.checkpoints.last().unwrap();
    assert_eq!(
        (last.p10, last.p50, last.p90),
        (last.mean, last.mean, last.mean)
    );
    assert_eq!(
        s.explore_rounds_mean,
        rep.explore_rounds
            .iter()
            .map(|&x| x as f64)
            .collect::<Vec<_>>()
    );
    assert_eq!(s.spectral_violations_total, 0);
}

#[test]
fn restart_is_global_when_one_agent_changes() {
    let mut inst = presets::piecewise_stationary();
    inst.change_points.truncate(1);
    let mut theta = inst.theta.clone();
    theta[0] = inst.change_points[0].theta[0].clone();
    inst.change_points[0].theta = theta;
    inst.anticipated_changes = Some(1.0);
    let mut cfg = RunConfig::new(Algorithm::Cdetpgs, 80_000, 4);
    cfg.replications = 3;
    let r = run(&inst, &cfg).unwrap();
    let s = summarize(&inst, &r);
    let det = s.detection.unwrap();
    assert!(det.synchronized);
    assert!(
        det.delays.iter().all(|d| d[0].is_some()),
        "{:?}",
        det.delays
    );
}
