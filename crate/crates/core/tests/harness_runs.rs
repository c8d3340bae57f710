use dgp_core::dgp::DgpNetwork;
use dgp_core::harness::{build_scenario, compute_metrics, csv_string, run, run_with, AlgorithmKind, RunOptions, ScenarioConfig};
use dgp_core::Family;

fn config(n: usize, family: Family, algorithm: AlgorithmKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.loads.n = n;
    cfg.loads.family = family;
    cfg.algorithm.kind = algorithm;
    cfg
}

#[test]
fn same_seed_gives_identical_csv() {
    let cfg = config(40, Family::FlatQuadratic, AlgorithmKind::Dgp);
    let opts = RunOptions { record_loads: true, record_u_hats: false };
    let a = run_with(&build_scenario(&cfg, Some(11)).unwrap(), opts).unwrap();
    let b = run_with(&build_scenario(&cfg, Some(11)).unwrap(), opts).unwrap();
    assert_eq!(csv_string(&a.trajectory, true).unwrap(), csv_string(&b.trajectory, true).unwrap());
    let c = run_with(&build_scenario(&cfg, Some(12)).unwrap(), opts).unwrap();
    assert_ne!(csv_string(&a.trajectory, true).unwrap(), csv_string(&c.trajectory, true).unwrap());
}

#[test]
fn perfect_noiseless_run_matches_bare_network() {
    let mut cfg = config(12, Family::Quadratic, AlgorithmKind::Dgp);
    cfg.noise.measurement_std = 0.0;
    cfg.noise.process_std = 0.0;
    cfg.algorithm.perfect_estimate = true;
    cfg.run.ticks = 400;
    cfg.schedule.steps = vec![[0.0, 200.0], [5.0, 195.0], [20.0, 185.0]];
    let scenario = build_scenario(&cfg, Some(4)).unwrap();
    let out = run_with(&scenario, RunOptions { record_loads: true, record_u_hats: false }).unwrap();

    let mut net = DgpNetwork::new(&scenario.specs, &scenario.topology, scenario.step_schedule).unwrap();
    for row in &out.trajectory {
        let x = net.positions();
        assert_eq!(row.x.as_ref().unwrap(), &x);
        let u = scenario.schedule.deviation_at(row.k) - x.iter().sum::<f64>();
        assert!((row.u - u).abs() <= 1e-12);
        net.tick(&[u; 12], row.k).unwrap();
    }
    assert_eq!(out.final_x, net.positions());
}

#[test]
fn governor_alone_recovers_from_both_drops() {
    let scenario = build_scenario(&config(50, Family::FlatQuadratic, AlgorithmKind::None), Some(2)).unwrap();
    let out = run(&scenario).unwrap();
    let m = compute_metrics(&out.trajectory, &scenario, &out.final_x);
    let [first, second] = m.contingency_nadirs() else { panic!("expected two events") };
    assert!(first.nadir < -0.5 && second.nadir < first.nadir);
    // droop settles at -dg / (D + 1/R), well above the nadir
    let end = out.trajectory.last().unwrap().freq_deviation;
    assert!((end + 30.0 / 21.0).abs() < 0.1, "{end}");
    assert!(end > second.nadir);
    assert!(out.final_x.iter().all(|&x| x == 0.0));
}

#[test]
fn smart_loads_reduce_both_nadirs() {
    let base = build_scenario(&config(200, Family::FlatQuadratic, AlgorithmKind::Dgp), Some(5)).unwrap();
    let nadirs = |alg| {
        let s = base.with_algorithm(alg).unwrap();
        let out = run(&s).unwrap();
        compute_metrics(&out.trajectory, &s, &out.final_x).contingency_nadirs().iter().map(|w| w.nadir).collect::<Vec<_>>()
    };
    let dgp = nadirs(AlgorithmKind::Dgp);
    let none = nadirs(AlgorithmKind::None);
    for (d, n) in dgp.iter().zip(&none) {
        assert!(d.abs() < n.abs(), "dgp {d} vs none {n}");
    }
}
