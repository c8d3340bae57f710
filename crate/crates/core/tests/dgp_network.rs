use dgp_core::dgp::{DgpNetwork, GradientMessage, StepSchedule};
use dgp_core::ode::{integrate, OdeConfig};
use dgp_core::oracle::solve_primal;
use dgp_core::{DisutilitySpec, GraphTopology};

#[test]
fn messages_carry_one_scalar_and_a_sender() {
    let m = GradientMessage::new(3, -1.25);
    assert_eq!((m.from(), m.gradient()), (3, -1.25));
    assert_eq!(std::mem::size_of::<GradientMessage>(), std::mem::size_of::<usize>() + std::mem::size_of::<f64>());
}

#[test]
fn iterates_stay_in_their_boxes() {
    let specs: Vec<_> = (0..6).map(|i| DisutilitySpec::flat_quadratic(1.0 + i as f64, 0.05, -0.2, 0.3).unwrap()).collect();
    let g = GraphTopology::band(6, 2).unwrap();
    let mut net = DgpNetwork::new(&specs, &g, StepSchedule::new(0.3, 0.8, 5.0).unwrap()).unwrap();
    for k in 0..500 {
        let u = if k % 7 < 3 { 50.0 } else { -80.0 };
        net.tick(&[u; 6], k).unwrap();
        for (s, x) in specs.iter().zip(net.positions()) {
            assert!(s.contains(x), "{x} outside [{}, {}]", s.box_lo(), s.box_hi());
        }
    }
}

#[test]
fn noiseless_iterates_shadow_the_flow() {
    let specs = vec![
        DisutilitySpec::quadratic(1.0, -2.0, 2.0).unwrap(),
        DisutilitySpec::quadratic(2.5, -1.0, 1.5).unwrap(),
        DisutilitySpec::flat_quadratic(0.8, 0.2, -1.5, 1.0).unwrap(),
        DisutilitySpec::quadratic(1.6, -1.0, 1.0).unwrap(),
    ];
    let topology = GraphTopology::band(4, 1).unwrap();
    let g_bar = -1.7;
    let c = 5.0;

    let mut cfg = OdeConfig::new(specs.clone(), topology.clone(), c, g_bar, 60.0 / c).unwrap();
    cfg.attach_oracle().unwrap();
    let flow_end = integrate(&cfg, &[0.0; 4]).unwrap().pop().unwrap().x;

    let mut net = DgpNetwork::new(&specs, &topology, StepSchedule::new(0.05, 0.8, c).unwrap()).unwrap();
    for k in 0..100_000 {
        let u = g_bar - net.positions().iter().sum::<f64>();
        net.tick(&[u; 4], k).unwrap();
    }
    let iter_end = net.positions();
    let gap = flow_end.iter().zip(&iter_end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-2, "flow {flow_end:?} vs iterates {iter_end:?}");

    let sol = solve_primal(&specs, g_bar).unwrap();
    assert!(sol.is_strictly_feasible);
    let err = sol.x_star.iter().zip(&iter_end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-2);
}
