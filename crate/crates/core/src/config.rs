//! Flat `key = value` scenario files.
//!
//! ```text
//! # one slice, two categories
//! categories = 2
//! a = 0.1
//! g = 1.5
//! r_max = 100
//! f_d = 1
//! delta_t = 1
//! sigma_s_sq = 1
//! cell_throughput = 20
//! r_lo = 0
//! r_hi = 10
//! arrival = 0, 3.5
//! arrival = 1, 0.8
//! ```
//!
//! Everything after `#` is a comment. `arrival` may repeat and keeps file
//! order; every other key may appear once. Optional keys and their defaults:
//! `a_prime` (= `a`), `sigma_a_sq` (0), `cov_a` (0), `beta` (0), `seed` (0),
//! `lambda_weighting` (`indexed`, or `unweighted`). `r_max` accepts `inf`.

use std::collections::HashMap;

use thiserror::Error;

use crate::allocation::{AllocationModelParams, LambdaWeighting};
use crate::capacity::{BoundParams, CapacityError};
use crate::simulator::{Arrival, ScenarioConfig, SimulationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("key `{key}` given twice (lines {first} and {second})")]
    DuplicateKey {
        key: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
}

const REQUIRED: [&str; 10] = [
    "categories",
    "a",
    "g",
    "r_max",
    "f_d",
    "delta_t",
    "sigma_s_sq",
    "cell_throughput",
    "r_lo",
    "r_hi",
];

const OPTIONAL: [&str; 6] = [
    "a_prime",
    "sigma_a_sq",
    "cov_a",
    "beta",
    "seed",
    "lambda_weighting",
];

struct Entry<'a> {
    value: &'a str,
    line: usize,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    parse_config_with_default_seed(text, 0)
}

/// Like [`parse_config`], with `default_seed` used when the file has no `seed`.
pub fn parse_config_with_default_seed(
    text: &str,
    default_seed: u64,
) -> Result<ScenarioConfig, ConfigError> {
    let mut scalars: HashMap<&str, Entry<'_>> = HashMap::new();
    let mut arrivals = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: "empty key or value".into(),
            });
        }
        if key == "arrival" {
            arrivals.push((parse_arrival(value, line)?, line));
            continue;
        }
        if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        if let Some(prev) = scalars.get(key) {
            return Err(ConfigError::DuplicateKey {
                key: key.to_string(),
                first: prev.line,
                second: line,
            });
        }
        scalars.insert(key, Entry { value, line });
    }

    for key in REQUIRED {
        if !scalars.contains_key(key) {
            return Err(ConfigError::MissingKey(key));
        }
    }

    let float = |key: &str| -> Result<Option<f64>, ConfigError> {
        scalars
            .get(key)
            .map(|e| parse_f64(e.value, e.line, key))
            .transpose()
    };
    let required = |key: &str| -> Result<f64, ConfigError> {
        Ok(float(key)?.expect("required keys checked above"))
    };

    let categories_entry = &scalars["categories"];
    let category_count: usize = categories_entry
        .value
        .parse()
        .map_err(|_| ConfigError::Parse {
            line: categories_entry.line,
            message: format!(
                "categories must be a non-negative integer, got `{}`",
                categories_entry.value
            ),
        })?;
    let seed = match scalars.get("seed") {
        Some(e) => e.value.parse::<u64>().map_err(|_| ConfigError::Parse {
            line: e.line,
            message: format!(
                "seed must be a decimal 64-bit unsigned integer, got `{}`",
                e.value
            ),
        })?,
        None => default_seed,
    };
    let weighting = match scalars.get("lambda_weighting") {
        None => LambdaWeighting::IndexWeighted,
        Some(e) => match e.value {
            "indexed" => LambdaWeighting::IndexWeighted,
            "unweighted" => LambdaWeighting::Unweighted,
            other => {
                return Err(ConfigError::Parse {
                    line: e.line,
                    message: format!(
                        "lambda_weighting must be `indexed` or `unweighted`, got `{other}`"
                    ),
                })
            }
        },
    };

    let a = required("a")?;
    let bound_params = BoundParams::new(
        a,
        float("a_prime")?.unwrap_or(a),
        float("sigma_a_sq")?.unwrap_or(0.0),
        float("cov_a")?.unwrap_or(0.0),
        required("g")?,
        required("r_max")?,
    );
    let allocation_params = AllocationModelParams {
        f_d: required("f_d")?,
        beta: float("beta")?.unwrap_or(0.0),
        delta_t: required("delta_t")?,
        sigma_s_sq: required("sigma_s_sq")?,
        cell_throughput: required("cell_throughput")?,
        weighting,
    };

    let config = ScenarioConfig {
        category_count,
        arrivals: arrivals.iter().map(|&(a, _)| a).collect(),
        bound_params,
        allocation_params,
        r_range: (required("r_lo")?, required("r_hi")?),
        seed,
    };

    for &(arrival, line) in &arrivals {
        if arrival.category >= category_count {
            return Err(ConfigError::Validation {
                field: "arrival".into(),
                message: format!(
                    "line {line}: category {} out of range for {category_count} categories",
                    arrival.category
                ),
            });
        }
    }
    config.validate().map_err(validation_error)?;
    Ok(config)
}

fn validation_error(err: SimulationError) -> ConfigError {
    match err {
        SimulationError::InvalidScenario { field, reason } => ConfigError::Validation {
            field: field.to_string(),
            message: reason,
        },
        SimulationError::Capacity(CapacityError::InvalidParam { field, reason }) => {
            ConfigError::Validation {
                field: field.to_string(),
                message: reason,
            }
        }
        other => ConfigError::Validation {
            field: "scenario".into(),
            message: other.to_string(),
        },
    }
}

fn parse_f64(value: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("{key} must be a number, got `{value}`"),
    })
}

fn parse_arrival(value: &str, line: usize) -> Result<Arrival, ConfigError> {
    let malformed = || ConfigError::Parse {
        line,
        message: format!("arrival must be `category, snr`, got `{value}`"),
    };
    let (category, snr) = value.split_once(',').ok_or_else(malformed)?;
    Ok(Arrival {
        category: category.trim().parse().map_err(|_| malformed())?,
        snr: snr.trim().parse().map_err(|_| malformed())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
categories = 1
a = 0.1
g = 1.5
r_max = 100
f_d = 1
delta_t = 1
sigma_s_sq = 1
cell_throughput = 20
r_lo = 0
r_hi = 10
arrival = 0, 2.5
";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.category_count, 1);
        assert_eq!(
            cfg.arrivals,
            vec![Arrival {
                category: 0,
                snr: 2.5
            }]
        );
        assert_eq!(cfg.bound_params.a_prime, 0.1);
        assert_eq!(cfg.bound_params.sigma_a_sq, 0.0);
        assert_eq!(cfg.bound_params.r, 10.0);
        assert_eq!(cfg.allocation_params.beta, 0.0);
        assert_eq!(
            cfg.allocation_params.weighting,
            LambdaWeighting::IndexWeighted
        );
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.r_range, (0.0, 10.0));
    }

    #[test]
    fn comments_and_order_are_preserved() {
        let text = format!(
            "# scenario\n{MINIMAL}arrival = 0, 1.0  # second\n\n  # indented comment\narrival = 0,0.5\nseed = 18446744073709551615\nlambda_weighting = unweighted\n"
        );
        let cfg = parse_config(&text).unwrap();
        let snrs: Vec<f64> = cfg.arrivals.iter().map(|a| a.snr).collect();
        assert_eq!(snrs, vec![2.5, 1.0, 0.5]);
        assert_eq!(cfg.seed, u64::MAX);
        assert_eq!(cfg.allocation_params.weighting, LambdaWeighting::Unweighted);
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = format!("{MINIMAL}g = 2\n");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::DuplicateKey {
                key: "g".into(),
                first: 3,
                second: 12
            })
        );
    }

    #[test]
    fn small_g_fails_validation() {
        let text = MINIMAL.replace("g = 1.5", "g = 0.5");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::Validation {
                field: "g".into(),
                message: "g must exceed 1".into()
            }
        );
        assert_eq!(err.to_string(), "invalid g: g must exceed 1");
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let text = MINIMAL.replace("f_d = 1", "f_d 1");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Parse { line: 5, .. })
        ));
        let text = MINIMAL.replace("f_d = 1", "f_d = one");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Parse { line: 5, .. })
        ));
        let text = MINIMAL.replace("arrival = 0, 2.5", "arrival = 0");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Parse { line: 11, .. })
        ));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let text = format!("{MINIMAL}colour = blue\n");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::UnknownKey {
                key: "colour".into(),
                line: 12
            })
        );
        let text = MINIMAL.replace("r_hi = 10\n", "");
        assert_eq!(parse_config(&text), Err(ConfigError::MissingKey("r_hi")));
    }

    #[test]
    fn arrival_category_out_of_range() {
        let text = format!("{MINIMAL}arrival = 3, 1.0\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "arrival"));
        assert!(err.to_string().contains("line 12"));
    }

    #[test]
    fn default_seed_only_fills_a_missing_key() {
        assert_eq!(
            parse_config_with_default_seed(MINIMAL, 77).unwrap().seed,
            77
        );
        let text = format!("{MINIMAL}seed = 5\n");
        assert_eq!(parse_config_with_default_seed(&text, 77).unwrap().seed, 5);
    }

    #[test]
    fn infinite_budget_is_accepted() {
        let text = MINIMAL.replace("r_max = 100", "r_max = inf");
        let cfg = parse_config(&text).unwrap();
        assert!(cfg.bound_params.r_max.is_infinite());
    }

    #[test]
    fn allocation_fields_are_validated() {
        let text = MINIMAL.replace("cell_throughput = 20", "cell_throughput = 0");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::Validation {
                field: "cell_throughput".into(),
                message: "must be positive".into()
            })
        );
    }
}
