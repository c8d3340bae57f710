//! Distributed gradient projection agents.
//!
//! Every tick each load
//!
//! 1. takes its mismatch estimate `u_hat_i[k]`,
//! 2. broadcasts its own gradient to its neighbors and forms
//!    `dx_i = sum_{j in N_i} (grad_j - grad_i)`,
//! 3. moves to `P_box(x_i + alpha[k] dx_i + gamma[k] u_hat_i[k])`.
//!
//! Step 2 never changes the total consumption (the sum of all `dx_i` is
//! `-1' L grad = 0`), so the mismatch is handled by the `gamma` term alone.
//! Only gradients cross agent boundaries: [`GradientMessage`] carries a
//! sender id and one scalar.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disutility::DisutilitySpec;
use crate::error::{Error, Result};
use crate::graph::GraphTopology;

/// Agent counts at or above this fan out across the rayon pool.
pub(crate) const PARALLEL_MIN_AGENTS: usize = 256;

/// Diminishing steps `gamma[k] = gamma0 / k^exponent` (`gamma[0] = gamma0`)
/// and `alpha[k] = c gamma[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    gamma0: f64,
    exponent: f64,
    c: f64,
}

impl StepSchedule {
    pub fn new(gamma0: f64, exponent: f64, c: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidParam(format!("gamma0 must be > 0, got {gamma0}")));
        }
        // keeps sum(gamma) infinite and sum(gamma^2) finite
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidParam(format!("exponent must be in (0.5, 1], got {exponent}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParam(format!("c must be > 0, got {c}")));
        }
        Ok(Self { gamma0, exponent, c })
    }

    /// `gamma0 = 1.5 q_min / n`, exponent 0.8, `c = 5`.
    pub fn default_for(specs: &[DisutilitySpec]) -> Result<Self> {
        let q_min = specs.iter().map(DisutilitySpec::q).fold(f64::INFINITY, f64::min);
        Self::new(1.5 * q_min / specs.len() as f64, 0.8, 5.0)
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self, k: u64) -> f64 {
        if k == 0 {
            self.gamma0
        } else {
            self.gamma0 / (k as f64).powf(self.exponent)
        }
    }

    /// `(alpha[k], gamma[k])`.
    pub fn step_sizes(&self, k: u64) -> (f64, f64) {
        let gamma = self.gamma(k);
        (self.c * gamma, gamma)
    }
}

/// Restarts an agent's local step counter when its own mismatch estimate
/// jumps above `threshold` (MW). Off unless configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetPolicy {
    pub threshold: f64,
    /// Minimum ticks between two restarts of the same agent.
    pub holdoff: u64,
}

/// The only payload agents exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientMessage {
    from: usize,
    gradient: f64,
}

impl GradientMessage {
    pub fn new(from: usize, gradient: f64) -> Self {
        Self { from, gradient }
    }

    pub fn from(&self) -> usize {
        self.from
    }

    pub fn gradient(&self) -> f64 {
        self.gradient
    }
}

/// In-process transport with one FIFO per directed edge. Delivery is
/// reliable and ordered.
#[derive(Debug, Clone)]
pub struct Mailbox {
    neighbors: Vec<Vec<usize>>,
    /// `queues[j][p]` holds messages sent to `j` by `neighbors[j][p]`.
    queues: Vec<Vec<VecDeque<GradientMessage>>>,
    /// `slot[i][p]` is the position of `i` in the list of its `p`-th neighbor.
    slot: Vec<Vec<usize>>,
}

impl Mailbox {
    pub fn new(topology: &GraphTopology) -> Self {
        let n = topology.n();
        let neighbors: Vec<Vec<usize>> = (0..n).map(|i| topology.neighbors(i).to_vec()).collect();
        let queues = neighbors.iter().map(|nb| vec![VecDeque::new(); nb.len()]).collect();
        let slot = (0..n)
            .map(|i| neighbors[i].iter().map(|&j| neighbors[j].binary_search(&i).expect("topology is symmetric")).collect())
            .collect();
        Self { neighbors, queues, slot }
    }

    /// Sends `msg` from its sender to every neighbor of the sender.
    pub fn broadcast(&mut self, msg: GradientMessage) {
        let i = msg.from;
        for (p, &j) in self.neighbors[i].iter().enumerate() {
            self.queues[j][self.slot[i][p]].push_back(msg);
        }
    }

    /// Pops one message per incoming edge of `j`, ordered like its neighbor
    /// list. Returns `None` for edges with nothing pending.
    pub fn receive(&mut self, j: usize) -> Vec<Option<GradientMessage>> {
        self.queues[j].iter_mut().map(VecDeque::pop_front).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub x: f64,
    pub spec: DisutilitySpec,
    pub neighbor_ids: Vec<usize>,
    pub last_grad: f64,
    /// Tick at which the agent's step counter last started.
    pub schedule_origin: u64,
}

impl AgentState {
    pub fn new(id: usize, spec: DisutilitySpec, neighbor_ids: Vec<usize>) -> Self {
        Self { id, x: 0.0, spec, neighbor_ids, last_grad: spec.grad(0.0), schedule_origin: 0 }
    }

    pub fn gradient(&self) -> f64 {
        self.spec.grad(self.x)
    }
}

/// `sum_j (grad_j - grad_i)`, i.e. `-n_i grad_i + sum_j grad_j`.
pub fn gradient_step(agent: &AgentState, neighbor_grads: &[f64]) -> Result<f64> {
    if neighbor_grads.len() != agent.neighbor_ids.len() {
        return Err(Error::ArityMismatch { expected: agent.neighbor_ids.len(), got: neighbor_grads.len() });
    }
    let own = agent.last_grad;
    Ok(neighbor_grads.iter().map(|&g| g - own).sum())
}

/// Projected update `P(x + alpha dx + gamma u_hat)`.
pub fn dgp_update(agent: &mut AgentState, delta_x: f64, u_hat: f64, alpha: f64, gamma: f64) {
    agent.x = agent.spec.project(agent.x + alpha * delta_x + gamma * u_hat);
}

/// All agents of one network plus their transport.
#[derive(Debug, Clone)]
pub struct DgpNetwork {
    agents: Vec<AgentState>,
    schedule: StepSchedule,
    mailbox: Mailbox,
    reset: Option<ResetPolicy>,
}

impl DgpNetwork {
    pub fn new(specs: &[DisutilitySpec], topology: &GraphTopology, schedule: StepSchedule) -> Result<Self> {
        if specs.len() != topology.n() {
            return Err(Error::InvalidParam(format!("{} disutility specs for {} graph nodes", specs.len(), topology.n())));
        }
        let agents = specs.iter().enumerate().map(|(i, &spec)| AgentState::new(i, spec, topology.neighbors(i).to_vec())).collect();
        Ok(Self { agents, schedule, mailbox: Mailbox::new(topology), reset: None })
    }

    pub fn with_reset_policy(mut self, reset: Option<ResetPolicy>) -> Self {
        self.reset = reset;
        self
    }

    /// Overrides the starting point; every coordinate must lie in its box.
    pub fn set_positions(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.agents.len() {
            return Err(Error::InvalidParam("position vector has wrong length".into()));
        }
        for (i, (agent, &v)) in self.agents.iter_mut().zip(x).enumerate() {
            if !agent.spec.contains(v) {
                return Err(Error::DomainViolation { index: i, value: v });
            }
            agent.x = v;
        }
        Ok(())
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn positions(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.x).collect()
    }

    /// One synchronous round: every gradient is taken from the tick-`k`
    /// snapshot before any agent moves.
    pub fn tick(&mut self, u_hats: &[f64], k: u64) -> Result<()> {
        let n = self.agents.len();
        if u_hats.len() != n {
            return Err(Error::ArityMismatch { expected: n, got: u_hats.len() });
        }
        if n >= PARALLEL_MIN_AGENTS {
            self.agents.par_iter_mut().for_each(|a| a.last_grad = a.gradient());
        } else {
            self.agents.iter_mut().for_each(|a| a.last_grad = a.gradient());
        }
        for a in &self.agents {
            self.mailbox.broadcast(GradientMessage::new(a.id, a.last_grad));
        }
        let inbox: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                self.mailbox
                    .receive(j)
                    .into_iter()
                    .zip(&self.agents[j].neighbor_ids)
                    .map(|(msg, &expected)| match msg {
                        Some(m) if m.from() == expected => Ok(m.gradient()),
                        _ => Err(Error::ArityMismatch { expected: self.agents[j].neighbor_ids.len(), got: 0 }),
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;

        let schedule = self.schedule;
        let reset = self.reset;
        let update = |(agent, (grads, &u_hat)): (&mut AgentState, (&Vec<f64>, &f64))| -> Result<()> {
            if let Some(policy) = reset {
                if u_hat.abs() > policy.threshold && k.saturating_sub(agent.schedule_origin) >= policy.holdoff {
                    agent.schedule_origin = k;
                }
            }
            let (alpha, gamma) = schedule.step_sizes(k - agent.schedule_origin);
            let dx = gradient_step(agent, grads)?;
            dgp_update(agent, dx, u_hat, alpha, gamma);
            Ok(())
        };
        if n >= PARALLEL_MIN_AGENTS {
            self.agents.par_iter_mut().zip(inbox.par_iter().zip(u_hats.par_iter())).try_for_each(update)
        } else {
            self.agents.iter_mut().zip(inbox.iter().zip(u_hats.iter())).try_for_each(update)
        }
    }
}
