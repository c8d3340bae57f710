//! Dual-decomposition baseline.
//!
//! Each load keeps a local estimate `lambda_i` of the common marginal
//! disutility, mixes it with its neighbors' estimates by Metropolis-weighted
//! consensus, nudges it by its mismatch estimate, and consumes
//! `x_i = P_box(grad_i^-1(lambda_i))`. Strictly convex disutilities only.

use rayon::prelude::*;

use crate::dgp::{StepSchedule, PARALLEL_MIN_AGENTS};
use crate::disutility::DisutilitySpec;
use crate::error::{Error, Result};
use crate::graph::GraphTopology;

#[derive(Debug, Clone, PartialEq)]
pub struct DualAgentState {
    pub lambda: f64,
    pub x: f64,
    pub spec: DisutilitySpec,
}

/// Metropolis weights over each closed neighborhood, `(j, w_ij)` with the
/// self weight first. Rows and columns sum to one.
pub fn metropolis_weights(topology: &GraphTopology) -> Vec<Vec<(usize, f64)>> {
    (0..topology.n())
        .map(|i| {
            let di = topology.degree(i);
            let off: Vec<(usize, f64)> =
                topology.neighbors(i).iter().map(|&j| (j, 1.0 / (1 + di.max(topology.degree(j))) as f64)).collect();
            let self_weight = 1.0 - off.iter().map(|&(_, w)| w).sum::<f64>();
            std::iter::once((i, self_weight)).chain(off).collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DualNetwork {
    agents: Vec<DualAgentState>,
    weights: Vec<Vec<(usize, f64)>>,
    schedule: StepSchedule,
}

impl DualNetwork {
    /// Fails with [`Error::NotInvertible`] if any disutility has a flat region.
    pub fn new(specs: &[DisutilitySpec], topology: &GraphTopology, schedule: StepSchedule) -> Result<Self> {
        if specs.len() != topology.n() {
            return Err(Error::InvalidParam(format!("{} disutility specs for {} graph nodes", specs.len(), topology.n())));
        }
        let agents = specs
            .iter()
            .map(|&spec| {
                let lambda = spec.grad(0.0);
                Ok(DualAgentState { lambda, x: spec.project(spec.inv_grad(lambda)?), spec })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { agents, weights: metropolis_weights(topology), schedule })
    }

    pub fn agents(&self) -> &[DualAgentState] {
        &self.agents
    }

    pub fn positions(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.x).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.lambda).collect()
    }

    pub fn set_lambdas(&mut self, lambdas: &[f64]) -> Result<()> {
        if lambdas.len() != self.agents.len() {
            return Err(Error::ArityMismatch { expected: self.agents.len(), got: lambdas.len() });
        }
        for (a, &l) in self.agents.iter_mut().zip(lambdas) {
            a.lambda = l;
            a.x = a.spec.project(a.spec.inv_grad(l)?);
        }
        Ok(())
    }

    /// One synchronous round using the schedule's `gamma[k]`.
    pub fn tick(&mut self, u_hats: &[f64], k: u64) -> Result<()> {
        self.tick_with_gamma(u_hats, self.schedule.gamma(k))
    }

    pub fn tick_with_gamma(&mut self, u_hats: &[f64], gamma: f64) -> Result<()> {
        let n = self.agents.len();
        if u_hats.len() != n {
            return Err(Error::ArityMismatch { expected: n, got: u_hats.len() });
        }
        // snapshot of the lambdas every agent hears this round
        let heard: Vec<f64> = self.lambdas();
        let weights = &self.weights;
        let update = |(i, (agent, &u_hat)): (usize, (&mut DualAgentState, &f64))| -> Result<()> {
            let mixed: f64 = weights[i].iter().map(|&(j, w)| w * heard[j]).sum();
            agent.lambda = mixed + gamma * u_hat;
            agent.x = agent.spec.project(agent.spec.inv_grad(agent.lambda)?);
            Ok(())
        };
        if n >= PARALLEL_MIN_AGENTS {
            self.agents.par_iter_mut().zip(u_hats.par_iter()).enumerate().try_for_each(update)
        } else {
            self.agents.iter_mut().zip(u_hats.iter()).enumerate().try_for_each(update)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::check_optimality;
    use proptest::prelude::*;

    fn quad_specs(qs: &[f64], lo: f64, hi: f64) -> Vec<DisutilitySpec> {
        qs.iter().map(|&q| DisutilitySpec::quadratic(q, lo, hi).unwrap()).collect()
    }

    #[test]
    fn flat_disutility_is_rejected() {
        let specs = vec![DisutilitySpec::quadratic(1.0, -1.0, 1.0).unwrap(), DisutilitySpec::flat_quadratic(1.0, 0.2, -1.0, 1.0).unwrap()];
        let g = GraphTopology::band(2, 1).unwrap();
        let sched = StepSchedule::new(0.1, 0.8, 5.0).unwrap();
        assert!(matches!(DualNetwork::new(&specs, &g, sched), Err(Error::NotInvertible)));
    }

    #[test]
    fn metropolis_weights_are_doubly_stochastic() {
        let g = GraphTopology::from_edges(5, &[(0, 1), (1, 2), (1, 3), (3, 4), (2, 3)]).unwrap();
        let w = metropolis_weights(&g);
        let mut cols = [0.0; 5];
        for row in &w {
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert!(row.iter().all(|&(_, v)| v > 0.0));
            for &(j, v) in row {
                cols[j] += v;
            }
        }
        assert!(cols.iter().all(|c| (c - 1.0).abs() < 1e-15));
    }

    #[test]
    fn consensus_at_optimum_is_fixed() {
        let specs = quad_specs(&[1.0, 2.0, 0.5], -5.0, 5.0);
        let g = GraphTopology::band(3, 1).unwrap();
        let mut net = DualNetwork::new(&specs, &g, StepSchedule::new(0.1, 0.8, 5.0).unwrap()).unwrap();
        net.set_lambdas(&[2.0; 3]).unwrap();
        let x0 = net.positions();
        for k in 0..20 {
            net.tick(&[0.0; 3], k).unwrap();
        }
        assert_eq!(net.lambdas(), vec![2.0; 3]);
        assert_eq!(net.positions(), x0);
        assert_eq!(x0, vec![1.0, 0.5, 2.0]);
        // interior fixed point with common gradient: optimal for its own total
        let total: f64 = x0.iter().sum();
        assert!(check_optimality(&specs, &x0, total, 1e-12).passed);
    }

    #[test]
    fn symmetric_pair_converges_to_equal_split() {
        let specs = quad_specs(&[1.0, 1.0], -2.0, 2.0);
        let g = GraphTopology::band(2, 1).unwrap();
        let mut net = DualNetwork::new(&specs, &g, StepSchedule::new(0.5, 0.8, 5.0).unwrap()).unwrap();
        let g_bar = 2.0;
        for k in 0..200_000 {
            let u = g_bar - net.positions().iter().sum::<f64>();
            net.tick(&[u, u], k).unwrap();
        }
        for x in net.positions() {
            assert!((x - 1.0).abs() < 1e-9, "{x}");
        }
        for l in net.lambdas() {
            assert!((l - 2.0).abs() < 1e-9, "{l}");
        }
    }

    proptest! {
        #[test]
        fn pure_consensus_preserves_average(lambdas in proptest::collection::vec(-10.0f64..10.0, 2..12)) {
            let n = lambdas.len();
            let specs = quad_specs(&vec![1.0; n], -100.0, 100.0);
            let g = GraphTopology::band(n, 1).unwrap();
            let mut net = DualNetwork::new(&specs, &g, StepSchedule::new(0.1, 0.8, 5.0).unwrap()).unwrap();
            net.set_lambdas(&lambdas).unwrap();
            let before: f64 = lambdas.iter().sum::<f64>() / n as f64;
            for _ in 0..25 {
                net.tick_with_gamma(&vec![0.0; n], 0.0).unwrap();
            }
            let after: f64 = net.lambdas().iter().sum::<f64>() / n as f64;
            prop_assert!((before - after).abs() < 1e-12);
        }
    }
}
