use super::scenario::Scenario;
use super::sim::TrajectoryRecord;
use crate::oracle::check_optimality;

/// Most negative frequency deviation over one schedule segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowNadir {
    pub start_tick: u64,
    /// Hz, never positive.
    pub nadir: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// One entry per schedule segment; entries after the first are the
    /// contingency windows.
    pub nadirs: Vec<WindowNadir>,
    /// Time after which `|dw|` stays inside the settling band, s. Infinite
    /// if the run ends outside the band.
    pub settling_time: f64,
    pub terminal_optimality_gap: f64,
    pub terminal_optimal: bool,
    /// Time integral of total disutility.
    pub total_disutility_integral: f64,
}

impl Metrics {
    pub fn contingency_nadirs(&self) -> &[WindowNadir] {
        self.nadirs.get(1..).unwrap_or(&[])
    }
}

/// Panics on an empty trajectory.
pub fn compute_metrics(trajectory: &[TrajectoryRecord], scenario: &Scenario, final_x: &[f64]) -> Metrics {
    assert!(!trajectory.is_empty(), "metrics need at least one row");
    let dt = scenario.dt();
    let steps = scenario.schedule.steps();
    let nadirs = steps
        .iter()
        .enumerate()
        .map(|(i, &(start, _))| {
            let end = steps.get(i + 1).map_or(u64::MAX, |s| s.0);
            let nadir = trajectory.iter().filter(|r| r.k >= start && r.k < end).map(|r| r.freq_deviation).fold(0.0, f64::min);
            WindowNadir { start_tick: start, nadir }
        })
        .collect();

    let settling_time = match trajectory.iter().rposition(|r| r.freq_deviation.abs() > scenario.settling_band) {
        None => 0.0,
        Some(i) if i + 1 == trajectory.len() => f64::INFINITY,
        Some(i) => trajectory[i + 1].t,
    };

    let last = trajectory.last().expect("nonempty");
    let target = scenario.schedule.deviation_at(last.k);
    let report = check_optimality(&scenario.specs, final_x, target, scenario.optimality_tol);

    Metrics {
        nadirs,
        settling_time,
        terminal_optimality_gap: report.gap,
        terminal_optimal: report.passed,
        total_disutility_integral: trajectory.iter().map(|r| r.total_disutility).sum::<f64>() * dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::scenario::build_scenario;

    fn rows(freqs: &[f64]) -> Vec<TrajectoryRecord> {
        freqs
            .iter()
            .enumerate()
            .map(|(k, &f)| TrajectoryRecord {
                k: k as u64,
                t: k as f64 * 0.1,
                freq_deviation: f,
                u: 0.0,
                mean_u_hat: 0.0,
                total_disutility: 1.0,
                y: 0.0,
                z: 0.0,
                generation: 200.0,
                total_load_deviation: 0.0,
                x: None,
                u_hat: None,
            })
            .collect()
    }

    fn scenario() -> Scenario {
        let mut cfg = ScenarioConfig::default();
        cfg.loads.n = 4;
        cfg.schedule.steps = vec![[0.0, 200.0], [0.5, 190.0]];
        build_scenario(&cfg, None).unwrap()
    }

    #[test]
    fn flat_trajectory() {
        let s = scenario();
        let m = compute_metrics(&rows(&[0.0; 10]), &s, &[0.0; 4]);
        assert_eq!(m.nadirs.iter().map(|w| w.nadir).collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(m.settling_time, 0.0);
        assert!((m.total_disutility_integral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_dip() {
        let s = scenario();
        let mut f = [0.0; 10];
        f[7] = -0.3;
        let m = compute_metrics(&rows(&f), &s, &[0.0; 4]);
        assert_eq!(m.contingency_nadirs(), &[WindowNadir { start_tick: 5, nadir: -0.3 }]);
        assert_eq!(m.nadirs[0].nadir, 0.0);
        assert!((m.settling_time - 0.8).abs() < 1e-12);
        // the loads never moved, so the -10 MW target is missed
        assert!(!m.terminal_optimal);
        assert!(m.terminal_optimality_gap >= 10.0);
        f[9] = 0.05;
        assert_eq!(compute_metrics(&rows(&f), &s, &[0.0; 4]).settling_time, f64::INFINITY);
    }
}
