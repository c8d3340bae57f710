//! Centralized reference solutions for
//!
//! ```text
//! minimize sum_i f_i(x_i)  subject to  sum_i x_i = g_bar,  x_i in [lo_i, hi_i]
//! ```
//!
//! [`solve_primal`] bisects on the common multiplier `lambda`: every load's
//! best response `argmin f_i(x) - lambda x` over its box is monotone in
//! `lambda`, so the total is too. [`brute_force_primal`] is an independent
//! grid search for tiny instances, used to check the former.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disutility::DisutilitySpec;
use crate::error::{Error, Result};

const BISECTION_ITERS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub x_star: Vec<f64>,
    /// Optimal gradient shared by all interior coordinates.
    pub lambda_star: f64,
    pub is_strictly_feasible: bool,
    pub optimal_cost: f64,
    /// When the optimum is not unique (flat regions at `lambda_star == 0`),
    /// the per-load ranges `x_i` may take; `None` for a unique optimum.
    pub plateau: Option<Vec<(f64, f64)>>,
}

/// How to pick a point from the optimal set when it is not a singleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlateauRule {
    /// Split the residual in proportion to the dead-band widths.
    ProportionalToWidth,
    /// Split with random weights drawn from the given seed.
    Seeded(u64),
}

fn bounds_sum(specs: &[DisutilitySpec]) -> (f64, f64) {
    specs.iter().fold((0.0, 0.0), |(lo, hi), s| (lo + s.box_lo(), hi + s.box_hi()))
}

fn check_feasible(specs: &[DisutilitySpec], g_bar: f64) -> Result<()> {
    let (lo, hi) = bounds_sum(specs);
    if specs.is_empty() || !(lo <= g_bar && g_bar <= hi) {
        return Err(Error::Infeasible { target: g_bar, lo, hi });
    }
    Ok(())
}

fn responses(specs: &[DisutilitySpec], lambda: f64) -> Vec<f64> {
    // away from zero the best response is single-valued
    specs.iter().map(|s| s.best_response(lambda).0).collect()
}

fn finish(specs: &[DisutilitySpec], x_star: Vec<f64>, lambda_star: f64, plateau: Option<Vec<(f64, f64)>>) -> PrimalSolution {
    let strictly_inside = |i: usize, v: f64| specs[i].box_lo() < v && v < specs[i].box_hi();
    let is_strictly_feasible = match &plateau {
        Some(ranges) => ranges.iter().enumerate().all(|(i, &(lo, hi))| strictly_inside(i, lo) && strictly_inside(i, hi)),
        None => x_star.iter().enumerate().all(|(i, &v)| strictly_inside(i, v)),
    };
    let optimal_cost = specs.iter().zip(&x_star).map(|(s, &v)| s.eval(v)).sum();
    PrimalSolution { x_star, lambda_star, is_strictly_feasible, optimal_cost, plateau }
}

pub fn solve_primal(specs: &[DisutilitySpec], g_bar: f64) -> Result<PrimalSolution> {
    solve_primal_with(specs, g_bar, PlateauRule::ProportionalToWidth)
}

pub fn solve_primal_with(specs: &[DisutilitySpec], g_bar: f64, rule: PlateauRule) -> Result<PrimalSolution> {
    check_feasible(specs, g_bar)?;
    let tol = 1e-10 * g_bar.abs().max(1.0);

    let at_zero: Vec<(f64, f64)> = specs.iter().map(|s| s.best_response(0.0)).collect();
    let zero_lo: f64 = at_zero.iter().map(|r| r.0).sum();
    let zero_hi: f64 = at_zero.iter().map(|r| r.1).sum();
    if zero_lo <= g_bar && g_bar <= zero_hi {
        let x = split_plateau(&at_zero, g_bar - zero_lo, rule);
        let plateau = (zero_hi > zero_lo).then_some(at_zero);
        return Ok(finish(specs, x, 0.0, plateau));
    }

    let (mut lo, mut hi) = if g_bar > zero_hi {
        let top = specs.iter().map(|s| s.grad(s.box_hi())).fold(f64::NEG_INFINITY, f64::max) + 1.0;
        (0.0, top)
    } else {
        let bottom = specs.iter().map(|s| s.grad(s.box_lo())).fold(f64::INFINITY, f64::min) - 1.0;
        (bottom, 0.0)
    };
    let total = |lambda: f64| responses(specs, lambda).iter().sum::<f64>();
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..BISECTION_ITERS {
        lambda = 0.5 * (lo + hi);
        if lambda == lo || lambda == hi {
            break;
        }
        let s = total(lambda);
        if (s - g_bar).abs() < tol {
            break;
        }
        if s < g_bar {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let lambda = polish(specs, g_bar, lambda);
    let mut x = responses(specs, lambda);
    absorb_residual(specs, &mut x, g_bar);
    Ok(finish(specs, x, lambda, None))
}

/// One Newton step on the locally linear total; kept only if it helps.
fn polish(specs: &[DisutilitySpec], g_bar: f64, lambda: f64) -> f64 {
    let x = responses(specs, lambda);
    let residual = g_bar - x.iter().sum::<f64>();
    let slope: f64 = specs.iter().zip(&x).filter(|(s, &v)| s.box_lo() < v && v < s.box_hi()).map(|(s, _)| 1.0 / (2.0 * s.q())).sum();
    if slope == 0.0 {
        return lambda;
    }
    let candidate = lambda + residual / slope;
    if candidate.signum() != lambda.signum() {
        return lambda;
    }
    let new_residual = g_bar - responses(specs, candidate).iter().sum::<f64>();
    if new_residual.abs() <= residual.abs() {
        candidate
    } else {
        lambda
    }
}

/// Spreads the last rounding-level residual over coordinates with room.
fn absorb_residual(specs: &[DisutilitySpec], x: &mut [f64], g_bar: f64) {
    let residual = g_bar - x.iter().sum::<f64>();
    if residual == 0.0 {
        return;
    }
    if let Some((i, _)) = specs.iter().enumerate().find(|(i, s)| {
        let v = x[*i] + residual;
        s.box_lo() < x[*i] && x[*i] < s.box_hi() && s.contains(v)
    }) {
        x[i] += residual;
    }
}

fn split_plateau(ranges: &[(f64, f64)], residual: f64, rule: PlateauRule) -> Vec<f64> {
    let widths: Vec<f64> = ranges.iter().map(|r| r.1 - r.0).collect();
    let total_width: f64 = widths.iter().sum();
    if total_width == 0.0 {
        return ranges.iter().map(|r| r.0).collect();
    }
    match rule {
        PlateauRule::ProportionalToWidth => {
            let t = (residual / total_width).clamp(0.0, 1.0);
            ranges.iter().zip(&widths).map(|(r, w)| r.0 + t * w).collect()
        }
        PlateauRule::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights: Vec<f64> = widths.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            // fill x_i = lo_i + min(w_i s, width_i), with s chosen so the sum matches
            let filled = |s: f64| -> f64 { weights.iter().zip(&widths).map(|(w, wd)| (w * s).min(*wd)).sum() };
            let (mut lo, mut hi) = (0.0, total_width / 0.05 + 1.0);
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if filled(mid) < residual {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut x: Vec<f64> = ranges.iter().zip(weights.iter().zip(&widths)).map(|(r, (w, wd))| r.0 + (w * hi).min(*wd)).collect();
            let err = residual - x.iter().zip(ranges).map(|(v, r)| v - r.0).sum::<f64>();
            if let Some(i) = (0..x.len()).find(|&i| x[i] + err >= ranges[i].0 && x[i] + err <= ranges[i].1) {
                x[i] += err;
            }
            x
        }
    }
}

/// Exhaustive search over a grid anchored at each box's lower bound (the
/// upper bound is always included). All but one coordinate are enumerated
/// and the remaining one is solved from the equality constraint; every
/// coordinate takes a turn as the solved one, so a boundary optimum is hit
/// exactly whenever its interior coordinates allow.
pub fn brute_force_primal(specs: &[DisutilitySpec], g_bar: f64, grid_step: f64) -> Result<PrimalSolution> {
    let n = specs.len();
    if n > 4 {
        return Err(Error::TooLarge { n });
    }
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParam(format!("grid step must be > 0, got {grid_step}")));
    }
    check_feasible(specs, g_bar)?;
    let grids: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| {
            let count = ((s.box_hi() - s.box_lo()) / grid_step).floor() as usize;
            let mut g: Vec<f64> = (0..=count).map(|k| s.box_lo() + k as f64 * grid_step).filter(|&v| v < s.box_hi()).collect();
            g.push(s.box_hi());
            g
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for solved in 0..n {
        let order: Vec<usize> = (0..n).filter(|&i| i != solved).collect();
        let mut point = vec![0.0; n];
        search(specs, &grids, &order, solved, g_bar, 0, 0.0, 0.0, &mut point, &mut best);
    }
    let (_, x) = best.ok_or_else(|| {
        let (lo, hi) = bounds_sum(specs);
        Error::Infeasible { target: g_bar, lo, hi }
    })?;
    let interior: Vec<f64> = specs.iter().zip(&x).filter(|(s, &v)| s.box_lo() < v && v < s.box_hi()).map(|(s, &v)| s.grad(v)).collect();
    let lambda = if interior.is_empty() { f64::NAN } else { interior.iter().sum::<f64>() / interior.len() as f64 };
    Ok(finish(specs, x, lambda, None))
}

#[allow(clippy::too_many_arguments)]
fn search(
    specs: &[DisutilitySpec],
    grids: &[Vec<f64>],
    order: &[usize],
    solved: usize,
    g_bar: f64,
    depth: usize,
    partial: f64,
    cost: f64,
    point: &mut [f64],
    best: &mut Option<(f64, Vec<f64>)>,
) {
    if depth == order.len() {
        let tail = g_bar - partial;
        let s = specs[solved];
        if s.contains(tail) {
            let total = cost + s.eval(tail);
            if best.as_ref().is_none_or(|(c, _)| total < *c) {
                point[solved] = tail;
                *best = Some((total, point.to_vec()));
            }
        }
        return;
    }
    let i = order[depth];
    // the remaining coordinates can absorb only so much
    let (rest_lo, rest_hi) = order[depth + 1..]
        .iter()
        .chain(std::iter::once(&solved))
        .fold((0.0, 0.0), |(lo, hi), &j| (lo + specs[j].box_lo(), hi + specs[j].box_hi()));
    let slack = 1e-12 * g_bar.abs().max(1.0);
    let need_lo = g_bar - partial - rest_hi - slack;
    let need_hi = g_bar - partial - rest_lo + slack;
    let grid = &grids[i];
    let first = grid.partition_point(|&v| v < need_lo);
    for &v in grid[first..].iter().take_while(|&&v| v <= need_hi) {
        point[i] = v;
        search(specs, grids, order, solved, g_bar, depth + 1, partial + v, cost + specs[i].eval(v), point, best);
    }
}

/// Per-load critical gradient sets `{x : grad_i(x) = lambda*}` clipped to
/// the box. When that set misses the box (boundary optimum) the optimal
/// coordinate itself is used.
pub fn critical_sets(specs: &[DisutilitySpec], solution: &PrimalSolution) -> Vec<(f64, f64)> {
    specs
        .iter()
        .zip(&solution.x_star)
        .map(|(s, &xi)| {
            let (lo, hi) = s.gradient_level_set(solution.lambda_star);
            let (lo, hi) = (lo.max(s.box_lo()), hi.min(s.box_hi()));
            if lo <= hi {
                (lo, hi)
            } else {
                (xi, xi)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfBox {
        index: usize,
        value: f64,
    },
    Sum {
        residual: f64,
    },
    GradientMismatch {
        index: usize,
        gradient: f64,
        lambda: f64,
    },
    /// Coordinate at its upper bound whose gradient exceeds `lambda`.
    UpperBound {
        index: usize,
        gradient: f64,
        lambda: f64,
    },
    /// Coordinate at its lower bound whose gradient is below `lambda`.
    LowerBound {
        index: usize,
        gradient: f64,
        lambda: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub passed: bool,
    /// Reference gradient: median over interior coordinates.
    pub lambda: f64,
    /// Largest violation magnitude over all conditions.
    pub gap: f64,
    pub violations: Vec<Violation>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// First-order optimality check with box-constraint complementarity.
pub fn check_optimality(specs: &[DisutilitySpec], x: &[f64], g_bar: f64, tol: f64) -> OptimalityReport {
    let mut violations = Vec::new();
    let mut gap: f64 = 0.0;
    let residual = x.iter().sum::<f64>() - g_bar;
    gap = gap.max(residual.abs());
    if residual.abs() > tol {
        violations.push(Violation::Sum { residual });
    }

    #[derive(PartialEq)]
    enum Place {
        Lo,
        Hi,
        Interior,
    }
    let place: Vec<Place> = specs
        .iter()
        .zip(x)
        .enumerate()
        .map(|(i, (s, &v))| {
            if !s.contains(v) {
                violations.push(Violation::OutOfBox { index: i, value: v });
                gap = f64::INFINITY;
            }
            let eps = 1e-9 * s.box_hi().abs().max(s.box_lo().abs()).max(1.0);
            if v >= s.box_hi() - eps {
                Place::Hi
            } else if v <= s.box_lo() + eps {
                Place::Lo
            } else {
                Place::Interior
            }
        })
        .collect();
    let grads: Vec<f64> = specs.iter().zip(x).map(|(s, &v)| s.grad(v)).collect();

    let mut interior: Vec<f64> = grads.iter().zip(&place).filter(|(_, p)| **p == Place::Interior).map(|(g, _)| *g).collect();
    let lambda = if !interior.is_empty() {
        median(&mut interior)
    } else {
        let top = grads.iter().zip(&place).filter(|(_, p)| **p == Place::Hi).map(|(g, _)| *g).fold(f64::NEG_INFINITY, f64::max);
        let bottom = grads.iter().zip(&place).filter(|(_, p)| **p == Place::Lo).map(|(g, _)| *g).fold(f64::INFINITY, f64::min);
        match (top.is_finite(), bottom.is_finite()) {
            (true, true) => 0.5 * (top + bottom),
            (true, false) => top,
            (false, true) => bottom,
            (false, false) => 0.0,
        }
    };

    for (i, (g, p)) in grads.iter().zip(&place).enumerate() {
        let (excess, violation) = match p {
            Place::Interior => ((g - lambda).abs(), Violation::GradientMismatch { index: i, gradient: *g, lambda }),
            Place::Hi => (g - lambda, Violation::UpperBound { index: i, gradient: *g, lambda }),
            Place::Lo => (lambda - g, Violation::LowerBound { index: i, gradient: *g, lambda }),
        };
        gap = gap.max(excess);
        if excess > tol {
            violations.push(violation);
        }
    }
    OptimalityReport { passed: violations.is_empty(), lambda, gap, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad(q: f64, lo: f64, hi: f64) -> DisutilitySpec {
        DisutilitySpec::quadratic_on_closed_box(q, lo, hi).unwrap()
    }

    #[test]
    fn symmetric_split() {
        let specs = [quad(1.0, 0.0, 1.0), quad(1.0, 0.0, 1.0)];
        let sol = solve_primal(&specs, 1.0).unwrap();
        assert!((sol.x_star[0] - 0.5).abs() < 1e-12 && (sol.x_star[1] - 0.5).abs() < 1e-12);
        assert!((sol.lambda_star - 1.0).abs() < 1e-9);
        assert!(sol.is_strictly_feasible);
    }

    #[test]
    fn boundary_solution_of_two_load_example() {
        let specs = [quad(1.0, 0.0, 0.25), quad(1.0, 0.0, 1.0)];
        let sol = solve_primal(&specs, 1.0).unwrap();
        assert!((sol.x_star[0] - 0.25).abs() < 1e-12);
        assert!((sol.x_star[1] - 0.75).abs() < 1e-12);
        assert!(!sol.is_strictly_feasible);
        assert!(check_optimality(&specs, &sol.x_star, 1.0, 1e-8).passed);
        // the non-optimal attractor of the projected flow
        let report = check_optimality(&specs, &[0.25, 5.0 / 12.0], 1.0, 1e-8);
        assert!(!report.passed);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Sum { .. })));
    }

    #[test]
    fn infeasible_targets() {
        let specs = [quad(1.0, -1.0, 1.0), quad(1.0, -1.0, 1.0)];
        assert!(matches!(solve_primal(&specs, 2.5), Err(Error::Infeasible { .. })));
        assert!(matches!(brute_force_primal(&specs, -2.5, 0.01), Err(Error::Infeasible { .. })));
        assert!(matches!(brute_force_primal(&[specs[0]; 5], 0.0, 0.1), Err(Error::TooLarge { n: 5 })));
    }

    #[test]
    fn flat_three_load_instance_matches_brute_force() {
        let specs = [
            DisutilitySpec::flat_quadratic(1.0, 0.2, -1.0, 1.0).unwrap(),
            DisutilitySpec::flat_quadratic(2.0, 0.1, -1.0, 1.0).unwrap(),
            DisutilitySpec::flat_quadratic(1.0, 0.3, -1.0, 1.0).unwrap(),
        ];
        let sol = solve_primal(&specs, 0.4).unwrap();
        let bf = brute_force_primal(&specs, 0.4, 1e-3).unwrap();
        // 0.4 fits inside the combined dead band (0.6), so the optimum costs nothing
        assert_eq!(sol.lambda_star, 0.0);
        assert!(sol.optimal_cost.abs() < 1e-12);
        assert!((sol.optimal_cost - bf.optimal_cost).abs() < 1e-4);
        let plateau = sol.plateau.as_ref().unwrap();
        assert_eq!(plateau[1], (-0.1, 0.1));
        // residual split in proportion to dead-band widths
        let sum_a = 0.6;
        for (s, x) in specs.iter().zip(&sol.x_star) {
            assert!((x - s.a() * 0.4 / sum_a).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_and_origin_cases() {
        let specs = [quad(1.0, -1.0, 2.0), quad(3.0, -0.5, 0.5), quad(0.5, -2.0, 1.0)];
        let bf = brute_force_primal(&specs, 3.5, 0.01).unwrap();
        assert_eq!(bf.x_star, vec![2.0, 0.5, 1.0]);
        let sol = solve_primal(&specs, 3.5).unwrap();
        assert_eq!(sol.x_star, vec![2.0, 0.5, 1.0]);
        let bf = brute_force_primal(&specs, 0.0, 0.01).unwrap();
        assert!(bf.optimal_cost.abs() < 1e-12);
        assert!(bf.x_star.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn perturbed_solution_fails_gradient_check() {
        let specs = [quad(1.0, -2.0, 2.0), quad(2.0, -2.0, 2.0), quad(1.5, -2.0, 2.0)];
        let sol = solve_primal(&specs, 1.3).unwrap();
        let tol = 1e-8;
        assert!(check_optimality(&specs, &sol.x_star, 1.3, tol).passed);
        let mut x = sol.x_star.clone();
        x[0] += 10.0 * tol;
        x[1] -= 10.0 * tol;
        let report = check_optimality(&specs, &x, 1.3, tol);
        assert!(!report.passed);
        assert!(report.violations.iter().all(|v| matches!(v, Violation::GradientMismatch { .. })));
    }

    #[test]
    fn plateau_tie_breaking_keeps_optimal_gradient() {
        let specs: Vec<_> = [(1.0, 0.3), (2.0, 0.5), (0.5, 0.2), (1.5, 0.4)]
            .iter()
            .map(|&(q, a)| DisutilitySpec::flat_quadratic(q, a, -1.0, 1.0).unwrap())
            .collect();
        let a = solve_primal_with(&specs, 0.7, PlateauRule::ProportionalToWidth).unwrap();
        let b = solve_primal_with(&specs, 0.7, PlateauRule::Seeded(11)).unwrap();
        assert!(a.x_star.iter().zip(&b.x_star).any(|(u, v)| (u - v).abs() > 1e-6));
        assert!((a.lambda_star - b.lambda_star).abs() < 1e-8);
        for sol in [&a, &b] {
            assert!((sol.x_star.iter().sum::<f64>() - 0.7).abs() < 1e-12);
            assert!(check_optimality(&specs, &sol.x_star, 0.7, 1e-8).passed);
        }
    }

    fn instance() -> impl Strategy<Value = (Vec<DisutilitySpec>, f64)> {
        let spec = (0.2f64..5.0, 0.2f64..2.0, 0.2f64..2.0, 0.0f64..0.9, any::<bool>()).prop_map(|(q, lo, hi, frac, flat)| {
            if flat {
                DisutilitySpec::flat_quadratic(q, frac * lo.min(hi), -lo, hi).unwrap()
            } else {
                DisutilitySpec::quadratic(q, -lo, hi).unwrap()
            }
        });
        (proptest::collection::vec(spec, 1..=3), 0.01f64..0.99).prop_map(|(specs, t)| {
            let (lo, hi) = bounds_sum(&specs);
            let g = lo + t * (hi - lo);
            (specs, g)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solution_invariants((specs, g) in instance()) {
            let sol = solve_primal(&specs, g).unwrap();
            let sum: f64 = sol.x_star.iter().sum();
            prop_assert!((sum - g).abs() <= 1e-9 * g.abs().max(1.0));
            for (s, &v) in specs.iter().zip(&sol.x_star) {
                prop_assert!(s.contains(v));
                if s.box_lo() < v && v < s.box_hi() {
                    prop_assert!((s.grad(v) - sol.lambda_star).abs() <= 1e-9 * sol.lambda_star.abs().max(1.0));
                }
            }
            prop_assert!(check_optimality(&specs, &sol.x_star, g, 1e-8).passed);
        }

        #[test]
        fn matches_brute_force((specs, g) in instance()) {
            let sol = solve_primal(&specs, g).unwrap();
            let bf = brute_force_primal(&specs, g, 5e-3).unwrap();
            prop_assert!(sol.optimal_cost <= bf.optimal_cost + 1e-12);
            prop_assert!(bf.optimal_cost - sol.optimal_cost <= 1e-3);
        }

        #[test]
        fn total_response_is_monotone((specs, _) in instance(), l1 in -20.0f64..20.0, l2 in -20.0f64..20.0) {
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let s_lo: f64 = specs.iter().map(|s| s.best_response(lo).0).sum();
            let s_hi: f64 = specs.iter().map(|s| s.best_response(hi).1).sum();
            prop_assert!(s_lo <= s_hi);
        }
    }
}
