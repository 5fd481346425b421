//! Capacity and variance bounds for correlated per-service allocations.
//!
//! Each service `i` takes a relative allocation `A_i = R_i / r_max`. With the
//! conditional mean, variance and pairwise covariance of the `A_i` bounded by
//! `a'`, `sigma_a^2` and `c_a'`, and the service count pinned at `U = g / a`,
//! the load `R = sum A_i` has variance at most
//!
//! ```text
//! V[R] <= (sigma_a^2 / 2) (U^2 + U) + c_a' (U^4 - U^2) + 0
//! ```
//!
//! The last term is the covariance of two constants. The bound drives a
//! one-sided (Cantelli) lower bound on the SLA probability `P[R <= 1]`.

use thiserror::Error;

/// Default tolerance for treating a limit series as having reached zero.
pub const DEFAULT_LIMIT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error("mean relative allocation a is zero: service capacity is unbounded")]
    UnboundedCapacity,
    #[error("invalid parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("limit grid is empty")]
    EmptyGrid,
    #[error("limit grid must be strictly positive and strictly decreasing (index {index})")]
    BadGrid { index: usize },
    #[error("schedule value {field} at a = {a} is not a finite non-negative number")]
    BadSchedule { field: &'static str, a: f64 },
}

/// Moment bounds and budget for one network slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Mean relative allocation `E[A_i]`.
    pub a: f64,
    /// Bound on the conditional mean `E[A_i | U]`.
    pub a_prime: f64,
    /// Bound on the conditional variance `V[A_i | U]`.
    pub sigma_a_sq: f64,
    /// Bound on the conditional pairwise covariance.
    pub cov_a: f64,
    /// Headroom constant, `g > 1`.
    pub g: f64,
    /// Total system resources. `f64::INFINITY` removes the budget.
    pub r_max: f64,
    /// Mean per-service allocation `E[R_i] = a * r_max`.
    pub r: f64,
}

impl BoundParams {
    /// Builds the bundle with `r = a * r_max`.
    pub fn new(a: f64, a_prime: f64, sigma_a_sq: f64, cov_a: f64, g: f64, r_max: f64) -> Self {
        Self {
            a,
            a_prime,
            sigma_a_sq,
            cov_a,
            g,
            r_max,
            r: a * r_max,
        }
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        let bad = |field, reason: &str| {
            Err(CapacityError::InvalidParam {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.a > 0.0 && self.a <= 1.0) {
            return bad("a", "a must lie in (0, 1]");
        }
        if !(self.a_prime >= self.a && self.a_prime <= 1.0) {
            return bad("a_prime", "a_prime must lie in [a, 1]");
        }
        if !(self.sigma_a_sq >= 0.0 && self.sigma_a_sq.is_finite()) {
            return bad("sigma_a_sq", "sigma_a_sq must be finite and non-negative");
        }
        if !(self.cov_a >= 0.0 && self.cov_a.is_finite()) {
            return bad("cov_a", "cov_a must be finite and non-negative");
        }
        if !(self.g > 1.0 && self.g.is_finite()) {
            return bad("g", "g must exceed 1");
        }
        if !(self.r_max > 0.0) {
            return bad("r_max", "r_max must be positive");
        }
        let expected = self.a * self.r_max;
        let consistent = if expected.is_infinite() {
            self.r.is_infinite()
        } else {
            (self.r - expected).abs() <= 1e-9 * expected.abs().max(1.0)
        };
        if !consistent {
            return bad("r", "r must equal a * r_max");
        }
        Ok(())
    }
}

/// The two arguments of the service-count bound: `(g r_max / r, g / a)`.
///
/// With an unbounded budget the first argument is taken as `g / a`.
pub fn cap_arguments(p: &BoundParams) -> Result<(f64, f64), CapacityError> {
    if p.a == 0.0 || p.r == 0.0 {
        return Err(CapacityError::UnboundedCapacity);
    }
    let by_mean = p.g / p.a;
    let by_budget = if p.r_max.is_infinite() || p.r.is_infinite() {
        by_mean
    } else {
        budget_cap_argument(p.g, p.r_max, p.r)
    };
    Ok((by_budget, by_mean))
}

pub fn budget_cap_argument(g: f64, r_max: f64, r: f64) -> f64 {
    g * r_max / r
}

/// Largest number of services a category may host: `floor(min(g r_max / r, g / a))`.
pub fn service_cap(p: &BoundParams) -> Result<u64, CapacityError> {
    let (by_budget, by_mean) = cap_arguments(p)?;
    Ok(floor_tolerant(by_budget.min(by_mean)))
}

// Ratios such as 1.5 / 0.1 land one ulp below the integer they denote.
fn floor_tolerant(x: f64) -> u64 {
    let nudged = x + 1e-12 * x.abs().max(1.0);
    nudged.floor() as u64
}

/// How the covariance term is scaled in [`variance_bound_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovCoefficient {
    /// `c_a' (U^4 - U^2)`, the final simplified form.
    #[default]
    Full,
    /// `(c_a' / 4) (U^4 - U^2)`, the intermediate form before simplification.
    Quarter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBreakdown {
    pub term_sigma: f64,
    pub term_cov: f64,
    pub term_mean: f64,
    pub total: f64,
    /// The fixed service count `U = g / a`.
    pub u_effective: f64,
}

pub fn variance_bound(p: &BoundParams) -> Result<VarianceBreakdown, CapacityError> {
    variance_bound_with(p, CovCoefficient::Full)
}

pub fn variance_bound_with(
    p: &BoundParams,
    coefficient: CovCoefficient,
) -> Result<VarianceBreakdown, CapacityError> {
    if p.a == 0.0 {
        return Err(CapacityError::UnboundedCapacity);
    }
    let u = p.g / p.a;
    let cov = match coefficient {
        CovCoefficient::Full => p.cov_a,
        CovCoefficient::Quarter => p.cov_a / 4.0,
    };
    let term_sigma = p.sigma_a_sq / 2.0 * (u * u + u);
    let term_cov = cov * (u.powi(4) - u * u);
    let term_mean = 0.0;
    Ok(VarianceBreakdown {
        term_sigma,
        term_cov,
        term_mean,
        total: term_sigma + term_cov + term_mean,
        u_effective: u,
    })
}

/// Cantelli lower bound on `P[R <= 1]` for a load with the given mean and variance.
pub fn cantelli_lower_bound(variance: f64, mean_load: f64) -> f64 {
    if mean_load >= 1.0 {
        return 0.0;
    }
    let gap = 1.0 - mean_load;
    let denom = variance + gap * gap;
    (1.0 - variance / denom).clamp(0.0, 1.0)
}

/// SLA lower bound using the analytical variance bound of `p`.
pub fn sla_lower_bound(p: &BoundParams, mean_load: f64) -> Result<f64, CapacityError> {
    let v = variance_bound(p)?;
    Ok(cantelli_lower_bound(v.total, mean_load))
}

/// Moment bounds as functions of the mean allocation `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub sigma_a_sq: f64,
    pub cov_a: f64,
    pub a_prime: f64,
}

/// The three vanishing-variance expressions evaluated along a grid of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub a_grid: Vec<f64>,
    /// `(sigma_a^2 / 2)((g/a)^2 + g/a)`
    pub sigma_series: Vec<f64>,
    /// `c_a' ((g/a)^4 - (g/a)^2)`
    pub cov_series: Vec<f64>,
    /// `(a'^2 / 4) * 2 Cov(E[U^2], E[U])`, identically zero.
    pub mean_series: Vec<f64>,
    /// Per-series verdicts, in the order above.
    pub satisfied: [bool; 3],
    pub verdict: bool,
    pub epsilon: f64,
}

impl LimitReport {
    pub fn final_values(&self) -> [f64; 3] {
        let last = |s: &[f64]| *s.last().expect("grid is non-empty");
        [
            last(&self.sigma_series),
            last(&self.cov_series),
            last(&self.mean_series),
        ]
    }
}

/// Checks numerically that each vanishing-variance expression tends to zero
/// as `a` shrinks along `a_grid`.
///
/// A series passes when it is non-increasing over the last half of the grid
/// and its final value is below `epsilon`.
pub fn limit_conditions<F>(
    schedule: F,
    g: f64,
    a_grid: &[f64],
    epsilon: f64,
) -> Result<LimitReport, CapacityError>
where
    F: Fn(f64) -> SchedulePoint,
{
    if a_grid.is_empty() {
        return Err(CapacityError::EmptyGrid);
    }
    for (index, &a) in a_grid.iter().enumerate() {
        let decreasing = index == 0 || a < a_grid[index - 1];
        if !(a > 0.0 && a.is_finite() && decreasing) {
            return Err(CapacityError::BadGrid { index });
        }
    }

    let mut sigma_series = Vec::with_capacity(a_grid.len());
    let mut cov_series = Vec::with_capacity(a_grid.len());
    let mut mean_series = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let point = schedule(a);
        for (field, value) in [
            ("sigma_a_sq", point.sigma_a_sq),
            ("cov_a", point.cov_a),
            ("a_prime", point.a_prime),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(CapacityError::BadSchedule { field, a });
            }
        }
        let u = g / a;
        sigma_series.push(point.sigma_a_sq / 2.0 * (u * u + u));
        cov_series.push(point.cov_a * (u.powi(4) - u * u));
        // E[U^2] and E[U] are constants, so their covariance vanishes.
        mean_series.push(point.a_prime * point.a_prime / 4.0 * 2.0 * 0.0);
    }

    let passes = |series: &[f64]| {
        let tail = &series[series.len() / 2..];
        let monotone = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs());
        monotone && *series.last().expect("grid is non-empty") < epsilon
    };
    let satisfied = [
        passes(&sigma_series),
        passes(&cov_series),
        passes(&mean_series),
    ];
    Ok(LimitReport {
        a_grid: a_grid.to_vec(),
        sigma_series,
        cov_series,
        mean_series,
        verdict: satisfied.iter().all(|&s| s),
        satisfied,
        epsilon,
    })
}

/// `a_0, a_0/2, a_0/4, ...` with `steps` halvings.
pub fn geometric_grid(a0: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|j| a0 * 0.5f64.powi(j as i32)).collect()
}

/// Admitted service count of one slice-in-slice category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryCapacity {
    pub category: usize,
    pub admitted: u64,
}

/// Slice capacity: the sum of category capacities.
pub fn slice_capacity_sum(categories: &[CategoryCapacity]) -> u64 {
    categories.iter().map(|c| c.admitted).sum()
}
