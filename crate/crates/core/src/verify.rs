//! Property suites that check every closed form and search routine against
//! an independent oracle. Driven by `slice-weaver verify`.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocation::{
    conditional_prob, estimate_resource, lambda_weighted, poisson_pmf, rayleigh_term,
    total_probability, AllocationError, AllocationModelParams, LambdaWeighting, ServiceState,
};
use crate::capacity::{
    cantelli_lower_bound, geometric_grid, limit_conditions, service_cap, variance_bound,
    BoundParams, SchedulePoint,
};
use crate::graph::{
    build_dependency_graph, chromatic_number_brute, chromatic_poly_complete,
    chromatic_poly_layered_partite, greedy_color, is_maximal_clique, is_perfect_brute,
    DependencyGraph, GraphError,
};
use crate::oracle;
use crate::stochastic::{mc_sla_probability, mc_variance_of_load, FactorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Small,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Runs every suite; outcomes come back in a fixed order.
pub fn run_verification(budget: Budget) -> Vec<PropertyOutcome> {
    let full = budget == Budget::Full;
    let mc_samples = if full { 100_000 } else { 20_000 };
    let suites: Vec<Box<dyn Fn() -> PropertyOutcome + Send + Sync>> = vec![
        Box::new(|| check_complete_polynomial(chromatic_poly_complete, 8, 5)),
        Box::new(move || check_greedy_on_cliques(if full { 10 } else { 8 })),
        Box::new(move || check_perfectness(if full { 8 } else { 6 })),
        Box::new(|| check_layered_polynomial(chromatic_poly_layered_partite, 6, 5)),
        Box::new(move || check_greedy_proper(if full { 400 } else { 100 }, 17)),
        Box::new(move || check_pmf_ratio(if full { 1_000 } else { 200 }, 23)),
        Box::new(check_normalization),
        Box::new(move || {
            let (count, grid) = if full { (20, 100_000) } else { (8, 20_000) };
            check_optimizer(count, grid, 31)
        }),
        Box::new(move || check_variance_dominance(mc_samples, 41)),
        Box::new(move || check_sla_consistency(mc_samples, 43)),
        Box::new(check_vanishing_variance_trend),
    ];
    suites.par_iter().map(|suite| suite()).collect()
}

pub fn check_complete_polynomial(
    poly: fn(u64, u64) -> BigUint,
    max_u: usize,
    max_k: u64,
) -> PropertyOutcome {
    let mut cases = 0;
    for u in 0..=max_u {
        let g = build_dependency_graph(u);
        for k in 0..=max_k {
            cases += 1;
            let expected = oracle::count_proper_colorings(&g, k);
            let got = poly(u as u64, k);
            if got != BigUint::from(expected) {
                return PropertyOutcome::new(
                    "chromatic_poly_complete_vs_enumeration",
                    false,
                    format!("u={u} k={k}: polynomial {got}, enumeration {expected}"),
                );
            }
        }
    }
    PropertyOutcome::new(
        "chromatic_poly_complete_vs_enumeration",
        true,
        format!("{cases} cases, u<={max_u} k<={max_k}"),
    )
}

pub fn check_greedy_on_cliques(max_u: usize) -> PropertyOutcome {
    const NAME: &str = "greedy_colors_clique_optimally";
    for u in 1..=max_u {
        let g = build_dependency_graph(u);
        let greedy = greedy_color(&g);
        let brute = chromatic_number_brute(&g);
        if !greedy.is_proper(&g) || greedy.colors_used != u || brute != Ok(u) {
            return PropertyOutcome::new(
                NAME,
                false,
                format!(
                    "u={u}: greedy {} colors, brute {brute:?}",
                    greedy.colors_used
                ),
            );
        }
    }
    PropertyOutcome::new(NAME, true, format!("u=1..={max_u}: greedy == brute == u"))
}

pub fn check_perfectness(max_u: usize) -> PropertyOutcome {
    const NAME: &str = "clique_graph_is_perfect";
    for u in 0..=max_u {
        let g = build_dependency_graph(u);
        let all: Vec<usize> = (0..u).collect();
        let perfect = is_perfect_brute(&g);
        let maximal = is_maximal_clique(&g, &all);
        if perfect != Ok(true) || maximal != Ok(true) {
            return PropertyOutcome::new(
                NAME,
                false,
                format!("u={u}: perfect {perfect:?}, maximal {maximal:?}"),
            );
        }
    }
    let control = is_perfect_brute(&DependencyGraph::cycle(5));
    let passed = control == Ok(false);
    PropertyOutcome::new(
        NAME,
        passed,
        format!("K_0..K_{max_u} perfect and maximal; C5 control perfect={control:?}"),
    )
}

pub fn check_layered_polynomial(
    poly: impl Fn(u64, u64) -> Result<BigUint, GraphError>,
    max_n: usize,
    max_k: u64,
) -> PropertyOutcome {
    const NAME: &str = "chromatic_poly_layered_vs_enumeration";
    for n in 1..=max_n {
        for k in 1..=max_k {
            let expected = oracle::count_path_block_colorings(n, k);
            let got = poly(n as u64, k);
            if got != Ok(BigUint::from(expected)) {
                return PropertyOutcome::new(
                    NAME,
                    false,
                    format!("n={n} k={k}: polynomial {got:?}, enumeration {expected}"),
                );
            }
        }
    }
    PropertyOutcome::new(NAME, true, format!("n<={max_n} k<={max_k}"))
}

pub fn check_greedy_proper(trials: usize, seed: u64) -> PropertyOutcome {
    const NAME: &str = "greedy_always_proper";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let n = rng.random_range(0..=10);
        let density: f64 = rng.random_range(0.0..1.0);
        let mut g = DependencyGraph::empty(n);
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(density) {
                    g.add_edge(a, b).expect("vertices in range");
                }
            }
        }
        let coloring = greedy_color(&g);
        let contiguous = (0..coloring.colors_used).all(|c| coloring.assignment.contains(&c))
            && coloring
                .assignment
                .iter()
                .all(|&c| c < coloring.colors_used.max(1));
        let chi = chromatic_number_brute(&g).expect("n <= 10");
        if !coloring.is_proper(&g) || !contiguous || coloring.colors_used < chi {
            return PropertyOutcome::new(
                NAME,
                false,
                format!("trial {trial}: {g:?} -> {coloring:?}"),
            );
        }
    }
    PropertyOutcome::new(NAME, true, format!("{trials} random graphs"))
}

fn random_params<R: Rng>(rng: &mut R) -> AllocationModelParams {
    AllocationModelParams {
        f_d: rng.random_range(0.5..2.0),
        beta: rng.random_range(0.05..0.5),
        delta_t: rng.random_range(0.5..2.0),
        sigma_s_sq: rng.random_range(0.5..2.0),
        cell_throughput: rng.random_range(1.0..20.0),
        weighting: LambdaWeighting::IndexWeighted,
    }
}

fn random_states<R: Rng>(rng: &mut R, count: usize) -> Vec<ServiceState> {
    (0..count)
        .map(|_| ServiceState::new(rng.random_range(0.0..5.0), rng.random_range(0.1..3.0)))
        .collect()
}

pub fn check_pmf_ratio(cases: usize, seed: u64) -> PropertyOutcome {
    const NAME: &str = "conditional_prob_equals_pmf_ratio";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut redrawn = 0;
    let mut case = 0;
    while case < cases {
        let params = random_params(&mut rng);
        let u = rng.random_range(2..=8);
        let states = random_states(&mut rng, u);
        let n = rng.random_range(2..=u);
        let outcome = (|| -> Result<Option<(f64, f64)>, AllocationError> {
            let l1 = lambda_weighted(&params, &states, n)?;
            let l2 = lambda_weighted(&params, &states, n - 1)?;
            let num = poisson_pmf(l1, n as u64)?;
            let den = poisson_pmf(l2, n as u64 - 1)?;
            // Subnormal pmfs carry too few digits to serve as a reference.
            if num < f64::MIN_POSITIVE || den < f64::MIN_POSITIVE {
                return Ok(None);
            }
            Ok(Some((conditional_prob(&params, &states, n)?, num / den)))
        })();
        match outcome {
            Ok(None) => redrawn += 1,
            Ok(Some((got, direct))) => {
                let rel = (got - direct).abs() / direct.abs();
                worst = worst.max(rel);
                if !(rel <= 1e-12) {
                    return PropertyOutcome::new(
                        NAME,
                        false,
                        format!("case {case}: {got} vs {direct} (rel {rel:.3e})"),
                    );
                }
                case += 1;
            }
            Err(e) => return PropertyOutcome::new(NAME, false, format!("case {case}: {e}")),
        }
    }
    PropertyOutcome::new(
        NAME,
        true,
        format!("{cases} cases, worst rel err {worst:.3e}, {redrawn} underflowing draws redrawn"),
    )
}

pub fn check_normalization() -> PropertyOutcome {
    const NAME: &str = "densities_normalize";
    let mut details = Vec::new();
    let mut passed = true;
    for sigma in [0.5, 1.0, 2.0] {
        let integral = oracle::simpson(
            |x| rayleigh_term(sigma, x).expect("valid inputs"),
            0.0,
            80.0 * sigma,
            200_000,
        );
        let err = (integral - 1.0).abs();
        passed &= err <= 1e-8;
        details.push(format!("rayleigh(s2={sigma}) err {err:.2e}"));
    }
    for lambda in [0.0, 0.5, 1.0, 2.5, 5.0, 7.5, 10.0] {
        let total: f64 = (0..=120u64)
            .map(|n| poisson_pmf(lambda, n).expect("valid inputs"))
            .sum();
        let err = (total - 1.0).abs();
        passed &= err <= 1e-12;
        details.push(format!("poisson(l={lambda}) err {err:.2e}"));
    }
    PropertyOutcome::new(NAME, passed, details.join("; "))
}

/// Where the objective of an [`OptimizerScenario`] peaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Rate stays below the candidate index: the maximum sits at `r_hi`.
    Increasing,
    /// Rate already above the candidate index: the maximum sits at `r_lo`.
    Decreasing,
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerScenario {
    pub params: AllocationModelParams,
    pub states: Vec<ServiceState>,
    pub new_snr: f64,
    pub r_range: (f64, f64),
    pub regime: Regime,
}

impl OptimizerScenario {
    /// Objective with the candidate admitted at resource `r`.
    pub fn objective(&self, r: f64) -> Result<f64, AllocationError> {
        let mut all = self.states.clone();
        all.push(ServiceState::new(r, self.new_snr));
        Ok(total_probability(&self.params, &all, self.new_snr)?.value)
    }

    fn candidate_rate(&self, r: f64) -> Result<f64, AllocationError> {
        let mut all = self.states.clone();
        all.push(ServiceState::new(r, self.new_snr));
        lambda_weighted(&self.params, &all, all.len())
    }
}

/// Random estimation problems with at most five services (including the
/// candidate). Boundary scenarios are kept only when the objective moves by
/// at least `1e-3` across the range.
pub fn optimizer_scenarios(count: usize, seed: u64, regimes: &[Regime]) -> Vec<OptimizerScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let params = random_params(&mut rng);
        let existing = rng.random_range(1..=4);
        let states = random_states(&mut rng, existing);
        let new_snr = rng.random_range(0.2..3.0);
        let lo = rng.random_range(0.0..2.0);
        let hi = lo + rng.random_range(1.0..8.0);
        let mut scenario = OptimizerScenario {
            params,
            states,
            new_snr,
            r_range: (lo, hi),
            regime: Regime::Interior,
        };
        let n = (existing + 1) as f64;
        let (Ok(rate_lo), Ok(rate_hi)) = (scenario.candidate_rate(lo), scenario.candidate_rate(hi))
        else {
            continue;
        };
        scenario.regime = if rate_hi < n {
            Regime::Increasing
        } else if rate_lo > n {
            Regime::Decreasing
        } else {
            Regime::Interior
        };
        if !regimes.contains(&scenario.regime) {
            continue;
        }
        if scenario.regime != Regime::Interior {
            let (Ok(f_lo), Ok(f_hi)) = (scenario.objective(lo), scenario.objective(hi)) else {
                continue;
            };
            if (f_hi - f_lo).abs() < 1e-3 {
                continue;
            }
        }
        out.push(scenario);
    }
    out
}

pub fn check_optimizer(count: usize, grid_points: usize, seed: u64) -> PropertyOutcome {
    const NAME: &str = "estimate_resource_vs_dense_grid";
    let scenarios = optimizer_scenarios(
        count,
        seed,
        &[Regime::Increasing, Regime::Decreasing, Regime::Interior],
    );
    let mut worst_loc = 0.0f64;
    for (i, s) in scenarios.iter().enumerate() {
        let (lo, hi) = s.r_range;
        let width = hi - lo;
        let result =
            estimate_resource(&s.params, &s.states, s.new_snr, s.r_range).and_then(|est| {
                let oracle = oracle::dense_grid_argmax(|r| s.objective(r), lo, hi, grid_points)?;
                Ok((est, oracle))
            });
        let (est, (best_r, best_v)) = match result {
            Ok(v) => v,
            Err(e) => return PropertyOutcome::new(NAME, false, format!("scenario {i}: {e}")),
        };
        // Interior peaks can only be located to the oracle's own spacing.
        let loc_tol = match s.regime {
            Regime::Interior => width / (grid_points - 1) as f64,
            _ => 1e-6 * width,
        };
        let loc_err = (est.resource - best_r).abs();
        worst_loc = worst_loc.max(loc_err / width);
        let value_ok = est.objective >= best_v - 1e-9;
        if loc_err > loc_tol || !value_ok {
            return PropertyOutcome::new(
                NAME,
                false,
                format!(
                    "scenario {i} ({:?}): r {} vs oracle {best_r}, objective {} vs {best_v}",
                    s.regime, est.resource, est.objective
                ),
            );
        }
    }
    PropertyOutcome::new(
        NAME,
        true,
        format!(
            "{count} scenarios, {grid_points}-point oracle, worst rel location {worst_loc:.2e}"
        ),
    )
}

/// The 27-point moment grid: `a` x `sigma_a^2` x covariance fraction, `g = 1.5`, `a' = 2a`.
pub fn moment_grid() -> Vec<BoundParams> {
    let mut out = Vec::with_capacity(27);
    for a in [0.1, 0.25, 0.5] {
        for sigma in [0.0, 0.005, 0.02] {
            for cov in [0.0, sigma / 2.0, sigma] {
                out.push(BoundParams::new(a, 2.0 * a, sigma, cov, 1.5, 1.0));
            }
        }
    }
    out
}

/// Factor model whose moments equal the bounds of `p`, with `u = floor(g / a)`.
pub fn matched_model(p: &BoundParams) -> FactorModel {
    FactorModel {
        a_prime: p.a_prime,
        sigma_a_sq: p.sigma_a_sq,
        cov_a: p.cov_a,
        u: service_cap(p).expect("a > 0") as usize,
    }
}

pub fn check_variance_dominance(samples: usize, seed: u64) -> PropertyOutcome {
    const NAME: &str = "variance_bound_dominates_monte_carlo";
    let mut slack = f64::INFINITY;
    for (i, p) in moment_grid().iter().enumerate() {
        let bound = variance_bound(p).expect("a > 0").total;
        let est = match mc_variance_of_load(&matched_model(p), samples, seed + i as u64) {
            Ok(e) => e,
            Err(e) => return PropertyOutcome::new(NAME, false, format!("point {i}: {e}")),
        };
        let margin = bound + 3.0 * est.std_error - est.variance;
        slack = slack.min(margin);
        if margin < 0.0 {
            return PropertyOutcome::new(
                NAME,
                false,
                format!("point {i} {p:?}: mc {} > bound {bound}", est.variance),
            );
        }
    }
    PropertyOutcome::new(
        NAME,
        true,
        format!("27 points, {samples} samples, min slack {slack:.3e}"),
    )
}

pub fn check_sla_consistency(samples: usize, seed: u64) -> PropertyOutcome {
    const NAME: &str = "sla_probability_above_cantelli_bound";
    // The moment grid always has u a' = 2g > 1, so a sub-unit-load grid is
    // added: four services at a' = 0.2, with U = g / a = 4.
    let mut points: Vec<BoundParams> = moment_grid()
        .into_iter()
        .filter(|p| matched_model(p).mean_load() < 1.0)
        .collect();
    let from_grid = points.len();
    for sigma in [0.005, 0.01, 0.02] {
        for cov in [0.0, sigma / 2.0, sigma] {
            points.push(BoundParams::new(0.375, 0.2, sigma, cov, 1.5, 1.0));
        }
    }
    let mut checked = 0;
    for (i, p) in points.iter().enumerate() {
        let model = matched_model(p);
        let bound =
            cantelli_lower_bound(variance_bound(p).expect("a > 0").total, model.mean_load());
        let est = match mc_sla_probability(&model, samples, seed + i as u64) {
            Ok(e) => e,
            Err(e) => return PropertyOutcome::new(NAME, false, format!("point {i}: {e}")),
        };
        checked += 1;
        if est.mean < bound - 3.0 * est.std_error {
            return PropertyOutcome::new(
                NAME,
                false,
                format!("point {i}: mc {} < bound {bound}", est.mean),
            );
        }
    }
    PropertyOutcome::new(
        NAME,
        true,
        format!("{checked} points ({from_grid} from the moment grid), {samples} samples"),
    )
}

pub fn check_vanishing_variance_trend() -> PropertyOutcome {
    const NAME: &str = "vanishing_variance_trend";
    let grid = geometric_grid(0.5, 9);
    let decaying = limit_conditions(
        |a| SchedulePoint {
            sigma_a_sq: a.powi(3),
            cov_a: (2.0 * a).powi(5),
            a_prime: 2.0 * a,
        },
        1.5,
        &grid,
        f64::INFINITY,
    );
    let constant = limit_conditions(
        |a| SchedulePoint {
            sigma_a_sq: 0.1,
            cov_a: 0.0,
            a_prime: 2.0 * a,
        },
        1.5,
        &grid,
        f64::INFINITY,
    );
    match (decaying, constant) {
        (Ok(d), Ok(c)) => {
            let passed = d.verdict && !c.satisfied[0];
            let [s, cv, _] = d.final_values();
            PropertyOutcome::new(
                NAME,
                passed,
                format!(
                    "decaying schedule tails non-increasing={} (final {s:.3e}, {cv:.3e}); constant sigma diverges={}",
                    d.verdict, !c.satisfied[0]
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => PropertyOutcome::new(NAME, false, e.to_string()),
    }
}
