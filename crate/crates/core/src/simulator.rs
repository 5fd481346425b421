//! Sequential-arrival scheduling loop.
//!
//! Each arrival gets a resource estimate conditioned on the services already
//! admitted to its category, passes budget and service-cap admission, and on
//! admission joins its category's dependency clique, where greedy coloring
//! hands it a fresh color (an opaque resource-pool label).

use thiserror::Error;

use crate::allocation::{estimate_resource, AllocationError, AllocationModelParams, ServiceState};
use crate::capacity::{
    cantelli_lower_bound, service_cap, slice_capacity_sum, variance_bound, BoundParams,
    CapacityError, CategoryCapacity, VarianceBreakdown,
};
use crate::graph::{build_dependency_graph, greedy_color};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid scenario: {field}: {reason}")]
    InvalidScenario { field: &'static str, reason: String },
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error("arrival {index}: {source}")]
    Arrival {
        index: usize,
        #[source]
        source: AllocationError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub category: usize,
    pub snr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub category_count: usize,
    pub arrivals: Vec<Arrival>,
    pub bound_params: BoundParams,
    pub allocation_params: AllocationModelParams,
    pub r_range: (f64, f64),
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let invalid =
            |field, reason: String| Err(SimulationError::InvalidScenario { field, reason });
        if self.category_count == 0 {
            return invalid("categories", "at least one category is required".into());
        }
        for (i, arrival) in self.arrivals.iter().enumerate() {
            if arrival.category >= self.category_count {
                return invalid(
                    "arrival",
                    format!(
                        "arrival {i} names category {} but only {} exist",
                        arrival.category, self.category_count
                    ),
                );
            }
            if !(arrival.snr >= 0.0 && arrival.snr.is_finite()) {
                return invalid(
                    "arrival",
                    format!("arrival {i} has invalid SNR {}", arrival.snr),
                );
            }
        }
        let (lo, hi) = self.r_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return invalid(
                "r_range",
                format!("need 0 <= r_lo <= r_hi, got [{lo}, {hi}]"),
            );
        }
        self.bound_params.validate()?;
        self.allocation_params.validate().map_err(|e| match e {
            AllocationError::InvalidParam { field, reason } => SimulationError::InvalidScenario {
                field,
                reason: reason.to_string(),
            },
            other => SimulationError::InvalidScenario {
                field: "allocation",
                reason: other.to_string(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRecord {
    pub index: usize,
    pub category: usize,
    pub resource: f64,
    pub admitted: bool,
    /// Total allocation `T` after the decision.
    pub total_after: f64,
    pub color: Option<usize>,
    /// Admitted services in the category after the decision.
    pub category_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySummary {
    pub category: usize,
    /// Services admitted over the run.
    pub admitted: u64,
    /// Analytical cap `floor(min(g r_max / r, g / a))`.
    pub service_cap: u64,
    pub colors_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub categories: Vec<CategorySummary>,
    pub slice_capacity: u64,
    pub total_allocated: f64,
    pub variance: VarianceBreakdown,
    /// Realised relative load `T / r_max` at the end of the run.
    pub sla_mean_load: f64,
    pub sla_lower_bound: f64,
    pub seed: u64,
    pub records: Vec<ArrivalRecord>,
}

/// Admission test: the budget `T + r <= r_max` and the service cap.
pub fn admit(
    candidate_resource: f64,
    current_total: f64,
    current_count: u64,
    p: &BoundParams,
) -> Result<bool, CapacityError> {
    let within_budget = current_total + candidate_resource <= p.r_max;
    let within_cap = current_count < service_cap(p)?;
    Ok(within_budget && within_cap)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationReport, SimulationError> {
    config.validate()?;
    let bounds = &config.bound_params;
    let cap = service_cap(bounds)?;

    let mut services: Vec<Vec<ServiceState>> = vec![Vec::new(); config.category_count];
    let mut colors_used = vec![0usize; config.category_count];
    let mut total = 0.0;
    let mut records = Vec::with_capacity(config.arrivals.len());

    for (index, arrival) in config.arrivals.iter().enumerate() {
        let existing = &services[arrival.category];
        let estimate = estimate_resource(
            &config.allocation_params,
            existing,
            arrival.snr,
            config.r_range,
        )
        .map_err(|source| SimulationError::Arrival { index, source })?;
        let resource = estimate.resource;
        let admitted = admit(resource, total, existing.len() as u64, bounds)?;

        let mut color = None;
        if admitted {
            total += resource;
            let members = &mut services[arrival.category];
            members.push(ServiceState::new(resource, arrival.snr));
            let graph = build_dependency_graph(members.len());
            let coloring = greedy_color(&graph);
            debug_assert_eq!(coloring.colors_used, members.len());
            colors_used[arrival.category] = coloring.colors_used;
            color = coloring.assignment.last().copied();
        }
        records.push(ArrivalRecord {
            index,
            category: arrival.category,
            resource,
            admitted,
            total_after: total,
            color,
            category_count: services[arrival.category].len(),
        });
    }

    let categories: Vec<CategorySummary> = services
        .iter()
        .enumerate()
        .map(|(category, members)| CategorySummary {
            category,
            admitted: members.len() as u64,
            service_cap: cap,
            colors_used: colors_used[category],
        })
        .collect();
    let capacities: Vec<CategoryCapacity> = categories
        .iter()
        .map(|c| CategoryCapacity {
            category: c.category,
            admitted: c.admitted,
        })
        .collect();

    let variance = variance_bound(bounds)?;
    let sla_mean_load = if bounds.r_max.is_finite() {
        total / bounds.r_max
    } else {
        0.0
    };
    Ok(SimulationReport {
        slice_capacity: slice_capacity_sum(&capacities),
        categories,
        total_allocated: total,
        sla_lower_bound: cantelli_lower_bound(variance.total, sla_mean_load),
        variance,
        sla_mean_load,
        seed: config.seed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::LambdaWeighting;

    fn allocation(beta: f64) -> AllocationModelParams {
        AllocationModelParams {
            f_d: 1.0,
            beta,
            delta_t: 1.0,
            sigma_s_sq: 1.0,
            cell_throughput: 10.0,
            weighting: LambdaWeighting::IndexWeighted,
        }
    }

    fn scenario(
        arrivals: Vec<Arrival>,
        bounds: BoundParams,
        r_range: (f64, f64),
    ) -> ScenarioConfig {
        ScenarioConfig {
            category_count: 2,
            arrivals,
            bound_params: bounds,
            allocation_params: allocation(0.0),
            r_range,
            seed: 9,
        }
    }

    fn arrivals(n: usize, category: usize) -> Vec<Arrival> {
        (0..n)
            .map(|i| Arrival {
                category,
                snr: 1.0 + i as f64,
            })
            .collect()
    }

    #[test]
    fn admit_examples() {
        // a = 0.01, g = 1.5: cap 150 never binds here.
        let p = BoundParams::new(0.01, 0.02, 0.0, 0.0, 1.5, 100.0);
        assert!(admit(10.0, 85.0, 3, &p).unwrap());
        assert!(!admit(20.0, 85.0, 3, &p).unwrap());
        let cap = service_cap(&p).unwrap();
        assert!(!admit(0.0, 0.0, cap, &p).unwrap());
        assert!(admit(0.0, 0.0, cap - 1, &p).unwrap());
    }

    #[test]
    fn zero_arrivals() {
        let bounds = BoundParams::new(0.1, 0.2, 0.0, 0.0, 1.5, 100.0);
        let report = run_scenario(&scenario(vec![], bounds, (0.0, 1.0))).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.slice_capacity, 0);
    }

    #[test]
    fn budget_binds_after_four_quarter_shares() {
        let bounds = BoundParams::new(0.1, 0.2, 0.0, 0.0, 1.5, 100.0);
        assert!(service_cap(&bounds).unwrap() >= 6);
        let report = run_scenario(&scenario(arrivals(6, 0), bounds, (25.0, 25.0))).unwrap();
        let admitted: Vec<bool> = report.records.iter().map(|r| r.admitted).collect();
        assert_eq!(admitted, vec![true, true, true, true, false, false]);
        assert_eq!(report.total_allocated, 100.0);
        assert_eq!(report.categories[0].admitted, 4);
        let colors: Vec<Option<usize>> = report.records.iter().map(|r| r.color).collect();
        assert_eq!(colors, vec![Some(0), Some(1), Some(2), Some(3), None, None]);
    }

    #[test]
    fn cap_binds_without_budget() {
        let bounds = BoundParams::new(0.25, 0.5, 0.0, 0.0, 1.5, f64::INFINITY);
        let mut all = arrivals(9, 0);
        all.extend(arrivals(3, 1));
        let report = run_scenario(&scenario(all, bounds, (1.0, 5.0))).unwrap();
        assert_eq!(report.categories[0].admitted, 6);
        assert_eq!(report.categories[1].admitted, 3);
        assert_eq!(report.slice_capacity, 9);
        assert_eq!(report.sla_mean_load, 0.0);
    }

    #[test]
    fn total_is_monotone_and_bounded() {
        let bounds = BoundParams::new(0.05, 0.1, 0.001, 0.0005, 1.5, 40.0);
        let mut cfg = scenario(arrivals(30, 0), bounds, (0.5, 6.0));
        cfg.allocation_params = allocation(0.2);
        cfg.arrivals.extend(arrivals(10, 1));
        let report = run_scenario(&cfg).unwrap();
        let mut last = 0.0;
        for r in &report.records {
            assert!(r.total_after >= last);
            assert!(r.total_after <= 40.0);
            assert_eq!(r.color.is_some(), r.admitted);
            last = r.total_after;
        }
        for c in &report.categories {
            assert_eq!(c.colors_used as u64, c.admitted);
            assert!(c.admitted <= c.service_cap);
        }
    }

    #[test]
    fn rerun_is_identical() {
        let bounds = BoundParams::new(0.05, 0.1, 0.001, 0.0005, 1.5, 40.0);
        let mut cfg = scenario(arrivals(12, 1), bounds, (0.5, 6.0));
        cfg.allocation_params = allocation(0.2);
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }

    #[test]
    fn bad_category_is_rejected() {
        let bounds = BoundParams::new(0.1, 0.2, 0.0, 0.0, 1.5, 100.0);
        let err = run_scenario(&scenario(arrivals(1, 2), bounds, (0.0, 1.0))).unwrap_err();
        assert!(matches!(
            err,
            SimulationError::InvalidScenario {
                field: "arrival",
                ..
            }
        ));
    }

    #[test]
    fn allocation_failure_names_the_arrival() {
        let bounds = BoundParams::new(0.01, 0.02, 0.0, 0.0, 1.5, 1e9);
        let mut cfg = scenario(
            vec![
                Arrival {
                    category: 0,
                    snr: 1.0,
                },
                Arrival {
                    category: 0,
                    snr: 100.0,
                },
            ],
            bounds,
            (0.0, 100.0),
        );
        cfg.allocation_params = allocation(1.0);
        let err = run_scenario(&cfg).unwrap_err();
        assert!(
            matches!(err, SimulationError::Arrival { index: 1, .. }),
            "{err}"
        );
    }
}
