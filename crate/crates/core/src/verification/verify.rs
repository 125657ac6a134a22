use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{abs_cube_bound, cube_plus_bound, mean_plus_bound, BoundResult, Constraints, InequalityId};
use crate::error::{Error, Result};
use crate::function_class::F3Function;

use super::conditions::{check_conditions, ConstraintReport};
use super::generate::{random_valid_spec, random_zero_mean_spec, MAX_RANDOM_VARS};
use super::spec::{DistributionSpec, SumLaw};

/// A check passes when `bound - exact >= -MARGIN_TOL`.
pub const MARGIN_TOL: f64 = 1e-12;

/// Thresholds used by the default sweeps.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// The left-hand side `E g(S)` being bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Function { f: F3Function },
    /// `E f(S_y)` with every summand capped at `y`.
    TruncatedFunction { f: F3Function, y: f64 },
    /// `E |S - x|^3`
    AbsCube { x: f64 },
    /// `E S_+^p`
    PositivePartPower { p: f64 },
}

impl Target {
    fn expect_on(&self, law: &SumLaw) -> f64 {
        match self {
            Target::Function { f } | Target::TruncatedFunction { f, .. } => law.expect(|s| f.value(s)),
            Target::AbsCube { x } => law.expect(|s| (s - x).abs().powi(3)),
            Target::PositivePartPower { p } => law.expect(|s| if s > 0.0 { s.powf(*p) } else { 0.0 }),
        }
    }

    /// Exact `E g(S)` by convolution.
    pub fn exact(&self, spec: &DistributionSpec) -> Result<f64> {
        match self {
            Target::TruncatedFunction { y, .. } => Ok(self.expect_on(&spec.truncated(*y)?.sum_law()?)),
            _ => Ok(self.expect_on(&spec.sum_law()?)),
        }
    }
}

/// Outcome of comparing one exact expectation to one bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub inequality: InequalityId,
    pub exact: f64,
    pub bound: f64,
    /// `bound - exact`
    pub margin: f64,
    pub pass: bool,
}

impl Verdict {
    fn new(inequality: InequalityId, exact: f64, bound: f64) -> Self {
        let margin = bound - exact;
        Verdict {
            inequality,
            exact,
            bound,
            margin,
            pass: margin >= -MARGIN_TOL,
        }
    }
}

fn gate(spec: &DistributionSpec, target: &Target, bound: &BoundResult) -> Result<ConstraintReport> {
    let beta = bound
        .beta()
        .ok_or_else(|| Error::Precondition("bound does not record the beta it was computed for".into()))?;
    let report = check_conditions(spec, beta)?;
    if !report.satisfies_conditions {
        return Err(Error::Precondition(format!(
            "spec violates the moment conditions: {}",
            report.violations().join("; ")
        )));
    }
    if (matches!(target, Target::AbsCube { .. }) || bound.inequality == InequalityId::AbsCube) && !report.zero_means {
        return Err(Error::Precondition("absolute third-moment check needs zero-mean summands".into()));
    }
    Ok(report)
}

/// Compares the exact `E g(S)` with `bound`, after checking that `spec`
/// satisfies the moment conditions for the beta recorded in `bound`.
pub fn verify_inequality(spec: &DistributionSpec, target: &Target, bound: &BoundResult) -> Result<Verdict> {
    gate(spec, target, bound)?;
    Ok(Verdict::new(bound.inequality, target.exact(spec)?, bound.value.to_f64()))
}

/// `(E S^2 + 2 E S + 1) / 4`, the quadratic-majorant upper value for `E S_+`.
pub fn mean_plus_via_majorant(spec: &DistributionSpec) -> Result<f64> {
    let law = spec.sum_law()?;
    Ok(crate::bounds::mean_plus_majorant(law.mean(), law.expect(|s| s * s)))
}

/// One comparison made by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCheck {
    pub spec_index: usize,
    pub x: Option<f64>,
    pub declared_beta: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// A failed check with the offending spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: SweepCheck,
    pub spec: DistributionSpec,
}

/// Check count and smallest margin for one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub checks: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub specs: usize,
    pub checks: usize,
    pub passed: usize,
    pub min_margin: f64,
    pub by_inequality: BTreeMap<InequalityId, Tally>,
    pub violations: Vec<Violation>,
}

impl SweepReport {
    fn new() -> Self {
        SweepReport {
            specs: 0,
            checks: 0,
            passed: 0,
            min_margin: f64::INFINITY,
            by_inequality: BTreeMap::new(),
            violations: Vec::new(),
        }
    }

    pub fn checks_of(&self, inequality: InequalityId) -> usize {
        self.by_inequality.get(&inequality).map_or(0, |t| t.checks)
    }

    pub fn min_margin_of(&self, inequality: InequalityId) -> f64 {
        self.by_inequality.get(&inequality).map_or(f64::INFINITY, |t| t.min_margin)
    }

    fn tally(&mut self, inequality: InequalityId, checks: usize, min_margin: f64) {
        let t = self.by_inequality.entry(inequality).or_insert(Tally {
            checks: 0,
            min_margin: f64::INFINITY,
        });
        t.checks += checks;
        t.min_margin = t.min_margin.min(min_margin);
    }

    fn record(&mut self, check: SweepCheck, spec: &DistributionSpec) {
        self.checks += 1;
        self.min_margin = self.min_margin.min(check.verdict.margin);
        self.tally(check.verdict.inequality, 1, check.verdict.margin);
        if check.verdict.pass {
            self.passed += 1;
        } else {
            self.violations.push(Violation {
                check,
                spec: spec.clone(),
            });
        }
    }

    pub fn all_passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Number of distinct specs with at least one violation.
    pub fn failed_specs(&self) -> usize {
        let mut ids: Vec<usize> = self.violations.iter().map(|v| v.check.spec_index).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Adds another report's counts and violations to this one.
    pub fn merge(&mut self, other: SweepReport) {
        self.specs += other.specs;
        self.checks += other.checks;
        self.passed += other.passed;
        self.min_margin = self.min_margin.min(other.min_margin);
        for (k, t) in other.by_inequality {
            self.tally(k, t.checks, t.min_margin);
        }
        self.violations.extend(other.violations);
    }
}

/// Runs every applicable inequality on one spec: the shifted cube bound at
/// each threshold and `E S_+ <= 1/2`, plus the absolute cube bound when the
/// summands are centered. `declared_beta` defaults to the spec's own
/// `sum E (X_i)_+^3`.
pub fn check_spec(
    spec: &DistributionSpec,
    declared_beta: Option<f64>,
    thresholds: &[f64],
    spec_index: usize,
) -> Result<SweepReport> {
    let own = check_conditions(spec, 0.0)?;
    let beta = declared_beta.unwrap_or(own.beta_total);
    let report = check_conditions(spec, beta)?;
    if !report.satisfies_conditions {
        return Err(Error::Precondition(format!(
            "spec violates the moment conditions: {}",
            report.violations().join("; ")
        )));
    }
    let c = Constraints::new(beta)?;
    let law = spec.sum_law()?;
    let mut out = SweepReport::new();
    out.specs = 1;
    let mut push = |x: Option<f64>, verdict: Verdict| {
        out.record(
            SweepCheck {
                spec_index,
                x,
                declared_beta: beta,
                verdict,
            },
            spec,
        )
    };
    for &x in thresholds {
        let bound = cube_plus_bound(x, &c)?;
        let exact = law.expect(|s| {
            let d = s - x;
            if d > 0.0 {
                d * d * d
            } else {
                0.0
            }
        });
        push(Some(x), Verdict::new(InequalityId::CubePlus, exact, bound.value.to_f64()));
    }
    if report.zero_means {
        let cz = c.with_zero_means();
        for &x in thresholds {
            let bound = abs_cube_bound(x, report.abs3_total, &cz)?;
            let exact = Target::AbsCube { x }.expect_on(&law);
            push(Some(x), Verdict::new(InequalityId::AbsCube, exact, bound.value.to_f64()));
        }
    }
    let exact = Target::PositivePartPower { p: 1.0 }.expect_on(&law);
    push(None, Verdict::new(InequalityId::MeanPlus, exact, mean_plus_bound(&c).value.to_f64()));
    Ok(out)
}

/// Parameters of a randomized soundness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    pub count: usize,
    /// Each spec has between 1 and `max_vars` variables.
    pub max_vars: usize,
    pub thresholds: Vec<f64>,
    /// Center every spec so the absolute cube bound is exercised too.
    pub zero_means: bool,
}

impl SweepConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        SweepConfig {
            seed,
            count,
            max_vars: 8,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            zero_means: false,
        }
    }
}

/// Seeds and sizes of the specs a sweep visits, in order.
pub fn sweep_seeds(seed: u64, count: usize, max_vars: usize) -> Vec<(u64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.random::<u64>(), rng.random_range(1..=max_vars)))
        .collect()
}

/// Generates `count` random valid specs and checks each with [`check_spec`]
/// at its own achieved beta.
pub fn soundness_sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.max_vars == 0 || config.max_vars > MAX_RANDOM_VARS {
        return Err(Error::OutOfRange {
            what: "max_vars",
            detail: format!("must lie in 1..={MAX_RANDOM_VARS}, got {}", config.max_vars),
        });
    }
    let mut total = SweepReport::new();
    for (i, (s, n)) in sweep_seeds(config.seed, config.count, config.max_vars).into_iter().enumerate() {
        let (spec, _) = if config.zero_means {
            random_zero_mean_spec(s, n)?
        } else {
            random_valid_spec(s, n, 0.0)?
        };
        total.merge(check_spec(&spec, None, &config.thresholds, i)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::theorem_bound;
    use crate::mixture::{mixture_expectation, MixtureParams};
    use crate::verification::spec::AtomicVariable;

    fn rademacher_spec() -> DistributionSpec {
        DistributionSpec::new(vec![AtomicVariable::from_pairs(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap()]).unwrap()
    }

    #[test]
    fn mean_plus_attained() {
        let spec = rademacher_spec();
        let c = Constraints::new(0.5).unwrap();
        let v = verify_inequality(&spec, &Target::PositivePartPower { p: 1.0 }, &mean_plus_bound(&c)).unwrap();
        assert_eq!(v.exact, 0.5);
        assert!(v.margin.abs() <= 1e-12 && v.pass);
        assert_eq!(mean_plus_via_majorant(&spec).unwrap(), 0.5);
    }

    #[test]
    fn cube_plus_on_random_specs() {
        for seed in 0..20 {
            let (spec, beta) = random_valid_spec(seed, 5, 0.0).unwrap();
            let c = Constraints::new(beta).unwrap();
            let v = verify_inequality(
                &spec,
                &Target::Function { f: F3Function::cube_plus(0.5).unwrap() },
                &cube_plus_bound(0.5, &c).unwrap(),
            )
            .unwrap();
            assert!(v.pass, "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn gate_rejects_invalid_specs() {
        let wide = DistributionSpec::new(vec![AtomicVariable::from_pairs(&[(-2.0, 0.5), (2.0, 0.5)]).unwrap()]).unwrap();
        let c = Constraints::new(10.0).unwrap();
        let t = Target::Function { f: F3Function::cube_plus(0.0).unwrap() };
        assert!(matches!(
            verify_inequality(&wide, &t, &cube_plus_bound(0.0, &c).unwrap()),
            Err(Error::Precondition(_))
        ));
        // beta gate
        let c = Constraints::new(0.1).unwrap();
        assert!(verify_inequality(&rademacher_spec(), &t, &cube_plus_bound(0.0, &c).unwrap()).is_err());
        // absolute cube needs centered summands
        let skew = DistributionSpec::new(vec![AtomicVariable::from_pairs(&[(-0.9, 0.5), (0.1, 0.5)]).unwrap()]).unwrap();
        let c = Constraints::new(1.0).unwrap().with_zero_means();
        let b = abs_cube_bound(0.0, 1.0, &c).unwrap();
        assert!(verify_inequality(&skew, &Target::AbsCube { x: 0.0 }, &b).is_err());
    }

    #[test]
    fn truncated_target_against_mixture() {
        let f = F3Function::cube_plus(0.0).unwrap();
        for seed in 0..10 {
            let (spec, beta) = random_valid_spec(seed, 4, 0.0).unwrap();
            let y = 5.0;
            if beta >= y {
                continue;
            }
            let mp = MixtureParams::new(beta, y).unwrap();
            let bound = mixture_expectation(&f, &mp, 1e-9).unwrap();
            let v = verify_inequality(&spec, &Target::TruncatedFunction { f: f.clone(), y }, &bound).unwrap();
            assert!(v.margin >= -1e-9, "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn theorem_target() {
        let f = F3Function::hinge(1.0, -0.5, 3.0).unwrap() + F3Function::affine(1.0, 2.0).unwrap();
        let (spec, beta) = random_valid_spec(3, 6, 0.0).unwrap();
        let b = theorem_bound(&f, &Constraints::new(beta).unwrap()).unwrap();
        assert!(verify_inequality(&spec, &Target::Function { f }, &b).unwrap().pass);
    }

    #[test]
    fn small_sweeps_pass() {
        let r = soundness_sweep(&SweepConfig::new(1, 25)).unwrap();
        assert!(r.all_passed(), "{:?}", r.violations);
        // centered specs also get the absolute cube checks
        assert!(r.checks >= 25 * 6);
        let mut zc = SweepConfig::new(2, 25);
        zc.zero_means = true;
        let r = soundness_sweep(&zc).unwrap();
        assert!(r.all_passed());
        assert_eq!(r.checks, 25 * 11);
    }

    #[test]
    fn sweep_is_deterministic() {
        assert_eq!(
            soundness_sweep(&SweepConfig::new(9, 5)).unwrap(),
            soundness_sweep(&SweepConfig::new(9, 5)).unwrap()
        );
    }
}
