use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::function_class::F3Function;

/// Probabilities of one variable must sum to 1 within this slack.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Largest number of candidate outcomes the exact convolution will form in a
/// single step.
pub const SUPPORT_LIMIT: u64 = 10_000_000;

/// Sum values closer than this (relative to the support's magnitude) are
/// treated as the same outcome.
const MERGE_REL_TOL: f64 = 1e-12;

/// One support point of a finite-support law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "v")]
    pub value: f64,
    #[serde(rename = "p")]
    pub prob: f64,
}

/// A random variable with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct AtomicVariable {
    atoms: Vec<Atom>,
}

impl TryFrom<Vec<Atom>> for AtomicVariable {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        AtomicVariable::new(atoms)
    }
}

impl From<AtomicVariable> for Vec<Atom> {
    fn from(v: AtomicVariable) -> Self {
        v.atoms
    }
}

impl AtomicVariable {
    /// Validates finiteness, positivity of probabilities, distinct values and
    /// total mass 1 (within [`PROB_SUM_TOL`]).
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSpec("variable has no atoms".into()));
        }
        for a in &atoms {
            ensure_finite("atom value", a.value)?;
            ensure_finite("atom probability", a.prob)?;
            if a.prob <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "atom at {} has probability {} (must be > 0)",
                    a.value, a.prob
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidSpec(format!("probabilities sum to {total}, not 1")));
        }
        let mut values: Vec<f64> = atoms.iter().map(|a| a.value).collect();
        values.sort_by(f64::total_cmp);
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("atom values must be distinct".into()));
        }
        Ok(AtomicVariable { atoms })
    }

    /// Convenience constructor from `(value, prob)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(value, prob)| Atom { value, prob }).collect())
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::from_pairs(&[(value, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.prob * g(a.value)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// The law of `X + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| Atom { value: a.value + c, prob: a.prob }).collect())
    }

    /// The law of `c X`, `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::OutOfRange {
                what: "scale factor",
                detail: format!("must be positive, got {c}"),
            });
        }
        Self::new(self.atoms.iter().map(|a| Atom { value: a.value * c, prob: a.prob }).collect())
    }

    /// The law of `min(X, y)`; atoms at or above `y` are pooled at `y`.
    pub fn truncated(&self, y: f64) -> Result<Self> {
        ensure_finite("y", y)?;
        let mut atoms: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        let mut capped = 0.0;
        for a in &self.atoms {
            if a.value >= y {
                capped += a.prob;
            } else {
                atoms.push(*a);
            }
        }
        if capped > 0.0 {
            atoms.push(Atom { value: y, prob: capped });
        }
        Self::new(atoms)
    }
}

/// A finite family of independent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct DistributionSpec {
    variables: Vec<AtomicVariable>,
}

/// `{"variables": [[{"v": .., "p": ..}, ...], ...]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    variables: Vec<AtomicVariable>,
}

impl TryFrom<SpecDoc> for DistributionSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        DistributionSpec::new(doc.variables)
    }
}

impl From<DistributionSpec> for SpecDoc {
    fn from(s: DistributionSpec) -> Self {
        SpecDoc { variables: s.variables }
    }
}

impl DistributionSpec {
    pub fn new(variables: Vec<AtomicVariable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidSpec("a spec needs at least one variable".into()));
        }
        Ok(DistributionSpec { variables })
    }

    pub fn variables(&self) -> &[AtomicVariable] {
        &self.variables
    }

    /// Product of the support sizes, saturating.
    pub fn product_support(&self) -> u64 {
        self.variables
            .iter()
            .fold(1u64, |acc, v| acc.saturating_mul(v.atoms.len() as u64))
    }

    pub fn max_atom(&self) -> f64 {
        self.variables.iter().map(|v| v.max_value()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every variable replaced by `min(X_i, y)`.
    pub fn truncated(&self, y: f64) -> Result<Self> {
        Self::new(self.variables.iter().map(|v| v.truncated(y)).collect::<Result<_>>()?)
    }

    /// Every variable shifted to mean zero.
    pub fn centered(&self) -> Result<Self> {
        Self::new(
            self.variables
                .iter()
                .map(|v| v.shifted(-v.mean()))
                .collect::<Result<_>>()?,
        )
    }

    /// Every variable multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.variables.iter().map(|v| v.scaled(c)).collect::<Result<_>>()?)
    }

    /// The exact law of `S = X_1 + ... + X_n`.
    pub fn sum_law(&self) -> Result<SumLaw> {
        SumLaw::of(self)
    }
}

/// The law of a sum, as sorted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SumLaw {
    atoms: Vec<Atom>,
}

impl SumLaw {
    /// Sequential convolution in variable order. Each step forms all
    /// `support x atoms` outcomes, sorts them and pools values that agree to
    /// rounding level, so i.i.d. blocks grow linearly rather than
    /// exponentially.
    pub fn of(spec: &DistributionSpec) -> Result<Self> {
        let mut law = vec![Atom { value: 0.0, prob: 1.0 }];
        for var in &spec.variables {
            let size = (law.len() as u64).saturating_mul(var.atoms.len() as u64);
            if size > SUPPORT_LIMIT {
                return Err(Error::SupportExplosion {
                    size,
                    limit: SUPPORT_LIMIT,
                });
            }
            let mut next = Vec::with_capacity(size as usize);
            for s in &law {
                for a in &var.atoms {
                    next.push(Atom {
                        value: s.value + a.value,
                        prob: s.prob * a.prob,
                    });
                }
            }
            law = merge_sorted(next);
        }
        Ok(SumLaw { atoms: law })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `E g(S)` with compensated summation in ascending order of `S`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for a in &self.atoms {
            let term = a.prob * g(a.value);
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    pub fn mean(&self) -> f64 {
        self.expect(|s| s)
    }
}

fn merge_sorted(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
    let scale = atoms.iter().map(|a| a.value.abs()).fold(1.0, f64::max);
    let tol = MERGE_REL_TOL * scale;
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if a.value - last.value <= tol => {
                let p = last.prob + a.prob;
                last.value = (last.value * last.prob + a.value * a.prob) / p;
                last.prob = p;
            }
            _ => out.push(a),
        }
    }
    out
}

/// `E f(S)` by exact convolution of the atoms.
pub fn exact_expectation(spec: &DistributionSpec, f: &F3Function) -> Result<f64> {
    Ok(spec.sum_law()?.expect(|s| f.value(s)))
}

/// `E f(S_y)` where `S_y` sums the capped variables `min(X_i, y)`.
pub fn exact_expectation_truncated(spec: &DistributionSpec, f: &F3Function, y: f64) -> Result<f64> {
    exact_expectation(&spec.truncated(y)?, f)
}
