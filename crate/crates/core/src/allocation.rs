//! Probabilistic resource estimation for an incoming user service.
//!
//! Service `i` with resource share `r_i` and SNR `s_i` has utility throughput
//! `f_d exp(beta r_i s_i) / delta_t`. The number of coexisting services is
//! modelled as Poisson with rate
//!
//! ```text
//! lambda(n) = (f_d / delta_t) * sum_{i=1..n} i exp(beta r_i s_i) / c(t)
//! ```
//!
//! and the objective scored for a configuration of `U` services is the
//! Rayleigh density of the first service's SNR plus the conditional pmf
//! ratios `P(u_1..u_n) / P(u_1..u_{n-1})` for `n = 2..U`.

use thiserror::Error;

/// Grid resolution of the first search pass in [`estimate_resource`].
pub const SEARCH_GRID_POINTS: usize = 1024;
/// Golden-section stopping width, relative to the search range.
pub const SEARCH_REL_TOL: f64 = 1e-6;
/// Objective values this close to the maximum count as ties.
pub const NEAR_MAX_BAND: f64 = 1e-9;
/// Relative step of the central difference in the SNR direction.
pub const SNR_STEP: f64 = 1e-5;

// exp(x) is finite for x below ln(f64::MAX).
const MAX_EXPONENT: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("invalid parameter {field}: {reason}")]
    InvalidParam {
        field: &'static str,
        reason: &'static str,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("exponent {exponent} overflows the throughput model")]
    Overflow { exponent: f64 },
    #[error("conditioning rate is zero for n = {n}")]
    DegenerateConditioning { n: usize },
    #[error("empty resource range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("objective is not finite ({value}) at r = {r}")]
    NonFinite { r: f64, value: f64 },
}

/// Whether service `i` contributes with weight `i` or `1` to the Poisson rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaWeighting {
    #[default]
    IndexWeighted,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationModelParams {
    pub f_d: f64,
    pub beta: f64,
    pub delta_t: f64,
    pub sigma_s_sq: f64,
    pub cell_throughput: f64,
    pub weighting: LambdaWeighting,
}

impl AllocationModelParams {
    pub fn validate(&self) -> Result<(), AllocationError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.f_d) {
            return Err(AllocationError::InvalidParam {
                field: "f_d",
                reason: "must be positive",
            });
        }
        if !self.beta.is_finite() {
            return Err(AllocationError::InvalidParam {
                field: "beta",
                reason: "must be finite",
            });
        }
        if !positive(self.delta_t) {
            return Err(AllocationError::InvalidParam {
                field: "delta_t",
                reason: "must be positive",
            });
        }
        if !positive(self.sigma_s_sq) {
            return Err(AllocationError::InvalidParam {
                field: "sigma_s_sq",
                reason: "must be positive",
            });
        }
        if !positive(self.cell_throughput) {
            return Err(AllocationError::InvalidParam {
                field: "cell_throughput",
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceState {
    pub resource: f64,
    pub snr: f64,
}

impl ServiceState {
    pub fn new(resource: f64, snr: f64) -> Self {
        Self { resource, snr }
    }

    fn validate(&self, index: usize) -> Result<(), AllocationError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if ok(self.resource) && ok(self.snr) {
            Ok(())
        } else {
            Err(AllocationError::InvalidInput(format!(
                "service {index} has non-finite or negative state {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub rayleigh_term: f64,
    /// Terms for `n = 2..U`, in order.
    pub conditional_terms: Vec<f64>,
}

fn utility_exp(beta: f64, resource: f64, snr: f64) -> Result<f64, AllocationError> {
    let exponent = beta * resource * snr;
    if exponent > MAX_EXPONENT || exponent.is_nan() {
        return Err(AllocationError::Overflow { exponent });
    }
    Ok(exponent.exp())
}

pub fn throughput(
    p: &AllocationModelParams,
    resource: f64,
    snr: f64,
) -> Result<f64, AllocationError> {
    p.validate()?;
    let e = utility_exp(p.beta, resource, snr)?;
    let value = p.f_d * e / p.delta_t;
    if !value.is_finite() {
        return Err(AllocationError::Overflow {
            exponent: p.beta * resource * snr,
        });
    }
    Ok(value)
}

/// Exponential SNR density `(1 / sigma_s^2) exp(-x / sigma_s^2)`.
pub fn rayleigh_term(sigma_s_sq: f64, x: f64) -> Result<f64, AllocationError> {
    if !(sigma_s_sq > 0.0) {
        return Err(AllocationError::InvalidParam {
            field: "sigma_s_sq",
            reason: "must be positive",
        });
    }
    if !(x >= 0.0) {
        return Err(AllocationError::InvalidInput(format!(
            "SNR sample must be non-negative, got {x}"
        )));
    }
    Ok((-x / sigma_s_sq).exp() / sigma_s_sq)
}

/// Poisson probability mass `exp(-lambda) lambda^n / n!`.
pub fn poisson_pmf(lambda: f64, n: u64) -> Result<f64, AllocationError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(AllocationError::InvalidInput(format!(
            "Poisson rate must be finite and non-negative, got {lambda}"
        )));
    }
    // exp(-lambda) turns subnormal near lambda = 708; past that, log space.
    if n <= 20 && lambda < 700.0 {
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        return Ok((-lambda).exp() * lambda.powi(n as i32) / factorial);
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let ln_factorial: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    Ok((-lambda + n as f64 * lambda.ln() - ln_factorial).exp())
}

/// Poisson rate of the first `n` services.
pub fn lambda_weighted(
    p: &AllocationModelParams,
    states: &[ServiceState],
    n: usize,
) -> Result<f64, AllocationError> {
    p.validate()?;
    if n == 0 || n > states.len() {
        return Err(AllocationError::InvalidInput(format!(
            "rate needs 1 <= n <= {}, got n = {n}",
            states.len()
        )));
    }
    for (i, s) in states[..n].iter().enumerate() {
        s.validate(i)?;
    }
    Ok(prefix_lambdas(p, &states[..n])?[n - 1])
}

// lambda(1), ..., lambda(len) in one pass.
fn prefix_lambdas(
    p: &AllocationModelParams,
    states: &[ServiceState],
) -> Result<Vec<f64>, AllocationError> {
    let scale = p.f_d / p.delta_t / p.cell_throughput;
    let mut acc = 0.0;
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let weight = match p.weighting {
                LambdaWeighting::IndexWeighted => (i + 1) as f64,
                LambdaWeighting::Unweighted => 1.0,
            };
            acc += weight * utility_exp(p.beta, s.resource, s.snr)?;
            let lambda = scale * acc;
            if !lambda.is_finite() {
                return Err(AllocationError::Overflow {
                    exponent: p.beta * s.resource * s.snr,
                });
            }
            Ok(lambda)
        })
        .collect()
}

// pmf(lambda_n, n) / pmf(lambda_{n-1}, n - 1)
//   = exp(-(lambda_n - lambda_{n-1})) (lambda_n / lambda_{n-1})^(n-1) lambda_n / n
fn pmf_ratio(lambda_n: f64, lambda_prev: f64, n: usize) -> Result<f64, AllocationError> {
    if lambda_prev == 0.0 {
        return Err(AllocationError::DegenerateConditioning { n });
    }
    let ratio = lambda_n / lambda_prev;
    let direct = (-(lambda_n - lambda_prev)).exp() * ratio.powi(n as i32 - 1) * lambda_n / n as f64;
    if direct.is_finite() {
        return Ok(direct);
    }
    // Huge rates: the power overflows while the exponential underflows.
    let log =
        -(lambda_n - lambda_prev) + (n as f64 - 1.0) * ratio.ln() + lambda_n.ln() - (n as f64).ln();
    Ok(log.exp())
}

/// Probability of the `n`-th service given the previous `n - 1`.
pub fn conditional_prob(
    p: &AllocationModelParams,
    states: &[ServiceState],
    n: usize,
) -> Result<f64, AllocationError> {
    if n < 2 {
        return Err(AllocationError::InvalidInput(format!(
            "conditioning needs n >= 2, got {n}"
        )));
    }
    let lambda_n = lambda_weighted(p, states, n)?;
    let lambda_prev = lambda_weighted(p, states, n - 1)?;
    pmf_ratio(lambda_n, lambda_prev, n)
}

/// Rayleigh term at `x` plus every conditional term of the configuration.
pub fn total_probability(
    p: &AllocationModelParams,
    states: &[ServiceState],
    x: f64,
) -> Result<ObjectiveEval, AllocationError> {
    p.validate()?;
    if states.is_empty() {
        return Err(AllocationError::InvalidInput(
            "objective needs at least one service".into(),
        ));
    }
    for (i, s) in states.iter().enumerate() {
        s.validate(i)?;
    }
    evaluate(p, states, x)
}

fn evaluate(
    p: &AllocationModelParams,
    states: &[ServiceState],
    x: f64,
) -> Result<ObjectiveEval, AllocationError> {
    let rayleigh = rayleigh_term(p.sigma_s_sq, x)?;
    let lambdas = prefix_lambdas(p, states)?;
    let conditional_terms = (2..=states.len())
        .map(|n| pmf_ratio(lambdas[n - 1], lambdas[n - 2], n))
        .collect::<Result<Vec<_>, _>>()?;
    let value = rayleigh + conditional_terms.iter().sum::<f64>();
    Ok(ObjectiveEval {
        value,
        rayleigh_term: rayleigh,
        conditional_terms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceEstimate {
    pub resource: f64,
    /// Objective with the candidate service admitted at `resource`.
    pub objective: f64,
    /// Central difference of the objective in the candidate's SNR.
    pub snr_derivative: f64,
    pub evaluations: usize,
}

// Existing services plus a mutable candidate slot at the end.
struct CandidateScorer<'a> {
    params: &'a AllocationModelParams,
    states: Vec<ServiceState>,
    x: f64,
    evaluations: usize,
}

impl CandidateScorer<'_> {
    fn score(&mut self, resource: f64, snr: f64) -> Result<f64, AllocationError> {
        self.evaluations += 1;
        *self.states.last_mut().expect("candidate slot") = ServiceState { resource, snr };
        let value = evaluate(self.params, &self.states, self.x)?.value;
        if !value.is_finite() {
            return Err(AllocationError::NonFinite { r: resource, value });
        }
        Ok(value)
    }

    fn snr_derivative(&mut self, resource: f64, snr: f64) -> Result<f64, AllocationError> {
        let h = SNR_STEP * snr.max(1.0);
        let up = self.score(resource, snr + h)?;
        let down = self.score(resource, snr - h)?;
        Ok((up - down) / (2.0 * h))
    }
}

/// Resource share for a new service with SNR `new_snr`.
///
/// The objective (evaluated at `x = new_snr` with the candidate appended) is
/// maximised over `r` by a uniform grid pass and golden-section refinement.
/// Among candidates within [`NEAR_MAX_BAND`] of the best value the one whose
/// SNR derivative is closest to zero wins, lowest `r` on exact ties. With no
/// existing services the objective does not depend on `r` and `r_lo` is
/// returned.
pub fn estimate_resource(
    p: &AllocationModelParams,
    states: &[ServiceState],
    new_snr: f64,
    r_range: (f64, f64),
) -> Result<ResourceEstimate, AllocationError> {
    p.validate()?;
    let (lo, hi) = r_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() || lo < 0.0 {
        return Err(AllocationError::EmptyRange { lo, hi });
    }
    if !(new_snr >= 0.0 && new_snr.is_finite()) {
        return Err(AllocationError::InvalidInput(format!(
            "new SNR must be finite and non-negative, got {new_snr}"
        )));
    }
    for (i, s) in states.iter().enumerate() {
        s.validate(i)?;
    }

    let mut all = states.to_vec();
    all.push(ServiceState::new(lo, new_snr));
    let mut scorer = CandidateScorer {
        params: p,
        states: all,
        x: new_snr,
        evaluations: 0,
    };

    let width = hi - lo;
    let points = if width == 0.0 { 1 } else { SEARCH_GRID_POINTS };
    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(points + 1);
    for k in 0..points {
        let r = if points == 1 {
            lo
        } else if k == points - 1 {
            hi
        } else {
            lo + width * k as f64 / (points - 1) as f64
        };
        candidates.push((r, scorer.score(r, new_snr)?));
    }

    let best = argmax(&candidates);
    if points > 1 {
        let left = candidates[best.saturating_sub(1)].0;
        let right = candidates[(best + 1).min(points - 1)].0;
        let refined =
            golden_section_max(&mut scorer, new_snr, left, right, SEARCH_REL_TOL * width)?;
        candidates.push(refined);
    }

    let max_value = candidates[argmax(&candidates)].1;
    let mut chosen: Option<(f64, f64, f64)> = None;
    let mut near: Vec<(f64, f64)> = candidates
        .into_iter()
        .filter(|&(_, v)| v >= max_value - NEAR_MAX_BAND)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (r, v) in near {
        let d = scorer.snr_derivative(r, new_snr)?;
        match chosen {
            Some((_, _, best_d)) if d.abs() >= best_d.abs() => {}
            _ => chosen = Some((r, v, d)),
        }
    }
    let (resource, objective, snr_derivative) = chosen.expect("at least one candidate");
    Ok(ResourceEstimate {
        resource,
        objective,
        snr_derivative,
        evaluations: scorer.evaluations,
    })
}

// First index of the largest value.
fn argmax(candidates: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(_, v)) in candidates.iter().enumerate() {
        if v > candidates[best].1 {
            best = i;
        }
    }
    best
}

fn golden_section_max(
    scorer: &mut CandidateScorer<'_>,
    snr: f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64), AllocationError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = scorer.score(c, snr)?;
    let mut fd = scorer.score(d, snr)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = scorer.score(c, snr)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = scorer.score(d, snr)?;
        }
    }
    let mid = 0.5 * (a + b);
    Ok((mid, scorer.score(mid, snr)?))
}
