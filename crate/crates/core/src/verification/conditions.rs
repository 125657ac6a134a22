use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

use super::spec::DistributionSpec;

/// Floating-point slack on every moment condition.
pub const CONDITION_SLACK: f64 = 1e-12;

/// Moment summary of a spec against a declared `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub per_variable_means: Vec<f64>,
    /// `sum E X_i^2`
    pub variance_total: f64,
    /// `sum E (X_i)_+^3`
    pub beta_total: f64,
    /// `sum E |X_i|^3`
    pub abs3_total: f64,
    pub declared_beta: f64,
    pub satisfies_conditions: bool,
    pub zero_means: bool,
}

impl ConstraintReport {
    /// Human-readable list of the failed conditions.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, m) in self.per_variable_means.iter().enumerate() {
            if *m > CONDITION_SLACK {
                out.push(format!("variable {i} has mean {m} > 0"));
            }
        }
        if self.variance_total > 1.0 + CONDITION_SLACK {
            out.push(format!("sum of second moments {} > 1", self.variance_total));
        }
        if self.beta_total > self.declared_beta + CONDITION_SLACK {
            out.push(format!(
                "sum of positive-part third moments {} > declared beta {}",
                self.beta_total, self.declared_beta
            ));
        }
        out
    }
}

/// Computes the moment sums directly from the atoms.
pub fn check_conditions(spec: &DistributionSpec, declared_beta: f64) -> Result<ConstraintReport> {
    ensure_finite("declared beta", declared_beta)?;
    if declared_beta < 0.0 {
        return Err(Error::OutOfRange {
            what: "declared beta",
            detail: format!("must be >= 0, got {declared_beta}"),
        });
    }
    let mut means = Vec::with_capacity(spec.variables().len());
    let (mut var, mut beta, mut abs3) = (0.0, 0.0, 0.0);
    for v in spec.variables() {
        means.push(v.mean());
        var += v.expect(|x| x * x);
        beta += v.expect(|x| if x > 0.0 { x * x * x } else { 0.0 });
        abs3 += v.expect(|x| x.abs().powi(3));
    }
    let means_ok = means.iter().all(|&m| m <= CONDITION_SLACK);
    let zero_means = means.iter().all(|&m| m.abs() <= CONDITION_SLACK);
    let satisfies = means_ok && var <= 1.0 + CONDITION_SLACK && beta <= declared_beta + CONDITION_SLACK;
    Ok(ConstraintReport {
        per_variable_means: means,
        variance_total: var,
        beta_total: beta,
        abs3_total: abs3,
        declared_beta,
        satisfies_conditions: satisfies,
        zero_means,
    })
}
