use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

use super::conditions::check_conditions;
use super::spec::{AtomicVariable, DistributionSpec};

pub const MAX_RANDOM_VARS: usize = 12;

/// Range of the positive atom's probability, drawn uniformly on the logit scale.
const LOGIT_RANGE: (f64, f64) = (-4.595_119_850_134_59, 5.293_304_824_724_49); // logit(0.01), logit(0.995)

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One two- or three-point law with mean `<= 0` and no particular scale.
fn random_variable<R: Rng>(rng: &mut R) -> Result<AtomicVariable> {
    let p = sigmoid(rng.random_range(LOGIT_RANGE.0..LOGIT_RANGE.1));
    let top = rng.random_range(-1.0f64..1.0).exp();
    let mut atoms = if rng.random_bool(0.5) {
        // two points with zero mean
        vec![(top, p), (-top * p / (1.0 - p), 1.0 - p)]
    } else {
        // a middle atom in [0, top) takes part of the remaining mass
        let m = rng.random_range(0.05..0.8) * (1.0 - p);
        let mid = rng.random_range(0.0..0.9) * top;
        let low = -(p * top + m * mid) / (1.0 - p - m);
        vec![(top, p), (mid, m), (low, 1.0 - p - m)]
    };
    if rng.random_bool(0.5) {
        let sd = atoms.iter().map(|&(v, q)| q * v * v).sum::<f64>().sqrt();
        let shift = rng.random_range(0.0..1.0) * sd;
        atoms.iter_mut().for_each(|(v, _)| *v -= shift);
    }
    AtomicVariable::from_pairs(&atoms)
}

/// A random spec satisfying the moment conditions: each variable is a two- or
/// three-point law with mean `<= 0`, and the family is rescaled so the second
/// moments sum to 1. Returns the spec and its `sum E (X_i)_+^3`; the spec
/// satisfies the conditions for any declared beta at or above that value,
/// in particular `max(beta_target, achieved)`.
pub fn random_valid_spec(seed: u64, n_vars: usize, beta_target: f64) -> Result<(DistributionSpec, f64)> {
    ensure_finite("beta_target", beta_target)?;
    if beta_target < 0.0 {
        return Err(Error::OutOfRange {
            what: "beta_target",
            detail: format!("must be >= 0, got {beta_target}"),
        });
    }
    if n_vars == 0 || n_vars > MAX_RANDOM_VARS {
        return Err(Error::OutOfRange {
            what: "n_vars",
            detail: format!("must lie in 1..={MAX_RANDOM_VARS}, got {n_vars}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = (0..n_vars)
        .map(|_| random_variable(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    let spec = DistributionSpec::new(vars)?;
    let second: f64 = spec.variables().iter().map(|v| v.expect(|x| x * x)).sum();
    let spec = spec.scaled(1.0 / second.sqrt())?;
    let achieved = check_conditions(&spec, 0.0)?.beta_total;
    Ok((spec, achieved))
}

/// [`random_valid_spec`] with every variable recentred to mean zero.
/// Centering only lowers the second moments.
pub fn random_zero_mean_spec(seed: u64, n_vars: usize) -> Result<(DistributionSpec, f64)> {
    let (spec, _) = random_valid_spec(seed, n_vars, 0.0)?;
    let spec = spec.centered()?;
    let achieved = check_conditions(&spec, 0.0)?.beta_total;
    Ok((spec, achieved))
}

/// A spike-plus-filler family together with its derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSpec {
    pub spec: DistributionSpec,
    /// Spike probability `beta / (n_spikes y^3)`.
    pub q: f64,
    /// Magnitude of the spikes' negative atom, `y q / (1 - q)`.
    pub h: f64,
    /// Probability that a filler is nonzero.
    pub filler_prob: f64,
    /// `sum E (X_i)_+^3` contributed by the fillers.
    pub leakage: f64,
    /// `beta + leakage`; the spec satisfies the conditions for this value.
    pub effective_beta: f64,
    pub variance_total: f64,
}

/// `n_spikes` i.i.d. zero-mean variables on `{y, -h}` whose positive parts
/// carry exactly `beta`, plus `n_fillers` i.i.d. symmetric fillers on
/// `{-s, 0, s}` that take up the remaining variance. Each filler is nonzero
/// with probability `min(1, R / (n_fillers s^2))`, `R` the variance left over
/// by the spikes, so the variance total is 1 whenever the fillers can reach
/// it and the positive-part leakage is `n_fillers * prob * s^3 / 2`.
pub fn extremal_spec(
    beta: f64,
    y: f64,
    n_spikes: usize,
    n_fillers: usize,
    filler_scale: f64,
) -> Result<ExtremalSpec> {
    ensure_finite("beta", beta)?;
    ensure_finite("y", y)?;
    ensure_finite("filler_scale", filler_scale)?;
    if beta <= 0.0 {
        return Err(Error::OutOfRange {
            what: "beta",
            detail: format!("must be > 0, got {beta}"),
        });
    }
    if y <= beta {
        return Err(Error::Precondition(format!("y = {y} must exceed beta = {beta}")));
    }
    if n_spikes == 0 || n_fillers == 0 {
        return Err(Error::OutOfRange {
            what: "n_spikes / n_fillers",
            detail: "both must be positive".into(),
        });
    }
    if filler_scale <= 0.0 {
        return Err(Error::OutOfRange {
            what: "filler_scale",
            detail: format!("must be > 0, got {filler_scale}"),
        });
    }
    let n = n_spikes as f64;
    let q = beta / (n * y * y * y);
    if q >= 1.0 {
        return Err(Error::Precondition(format!("spike probability {q} is not below 1")));
    }
    let h = y * q / (1.0 - q);
    let spike_var = n * q * y * y / (1.0 - q);
    if spike_var > 1.0 {
        return Err(Error::Precondition(format!(
            "spike variance {spike_var} exceeds the unit budget"
        )));
    }
    let remaining = 1.0 - spike_var;
    let nf = n_fillers as f64;
    let s = filler_scale;
    let filler_prob = (remaining / (nf * s * s)).min(1.0);
    let spike = AtomicVariable::from_pairs(&[(-h, 1.0 - q), (y, q)])?;
    let filler = if filler_prob >= 1.0 {
        AtomicVariable::from_pairs(&[(-s, 0.5), (s, 0.5)])?
    } else if filler_prob > 0.0 {
        AtomicVariable::from_pairs(&[(-s, 0.5 * filler_prob), (0.0, 1.0 - filler_prob), (s, 0.5 * filler_prob)])?
    } else {
        AtomicVariable::point(0.0)?
    };
    let mut vars = vec![spike; n_spikes];
    vars.extend(std::iter::repeat_n(filler, n_fillers));
    let spec = DistributionSpec::new(vars)?;
    let leakage = 0.5 * nf * filler_prob * s * s * s;
    let report = check_conditions(&spec, beta + leakage)?;
    Ok(ExtremalSpec {
        spec,
        q,
        h,
        filler_prob,
        leakage,
        effective_beta: beta + leakage,
        variance_total: report.variance_total,
    })
}
