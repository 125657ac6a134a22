//! Third-moment bounds for sums of independent random variables.
//!
//! All bounds assume independent summands with `E X_i <= 0`,
//! `sum E X_i^2 <= 1` and `sum E (X_i)_+^3 <= beta` (see [`Constraints`]).
//! `Z` below is standard normal.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::extended::ExtendedReal;
use crate::function_class::F3Function;
use crate::normal::{abs_moment3, partial_moment_plus, GaussianAffine};
use crate::optimize::minimize_positive;

/// Tolerance in `a` for [`optimize_corollary`].
pub const COROLLARY_A_TOL: f64 = 1e-6;

const BETA_EXTENSION_NOTE: &str = "beta = 0: bound evaluated by continuous extension";

/// The moment conditions on the summands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Upper bound on `sum E (X_i)_+^3`.
    pub beta: f64,
    /// Upper bound on `sum E X_i^2`; always 1.
    pub variance_budget: f64,
    pub means_nonpositive: bool,
    /// Whether every summand is additionally centered (`E X_i = 0`).
    pub zero_means: bool,
}

impl Constraints {
    /// `beta = 0` is accepted as the continuous extension of the bounds.
    pub fn new(beta: f64) -> Result<Self> {
        ensure_finite("beta", beta)?;
        if beta < 0.0 {
            return Err(Error::OutOfRange {
                what: "beta",
                detail: format!("must be >= 0, got {beta}"),
            });
        }
        Ok(Constraints {
            beta,
            variance_budget: 1.0,
            means_nonpositive: true,
            zero_means: false,
        })
    }

    pub fn with_zero_means(mut self) -> Self {
        self.zero_means = true;
        self
    }

    pub fn is_beta_extension(&self) -> bool {
        self.beta == 0.0
    }
}

/// Which inequality produced a [`BoundResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// `E f(S) <= E f(Z) + f'''(inf-) beta / 6`
    Theorem,
    /// `E (S - x)_+^3 <= E (Z - x)_+^3 + beta`
    CubePlus,
    /// `E |S - x|^3 <= E |Z - x|^3 + sum E |X_i|^3` (centered summands)
    AbsCube,
    /// `E S_+^p <= sup_ratio(p, a) (E (Z + a)_+^3 + beta)`
    Corollary,
    /// `E S_+ <= 1/2`
    MeanPlus,
    /// The finite-truncation Gaussian/centered-Poisson mixture bound.
    Mixture,
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InequalityId::Theorem => "theorem",
            InequalityId::CubePlus => "cube_plus",
            InequalityId::AbsCube => "abs_cube",
            InequalityId::Corollary => "corollary",
            InequalityId::MeanPlus => "mean_plus",
            InequalityId::Mixture => "mixture",
        };
        f.write_str(s)
    }
}

/// A bound value together with the inputs that produced it.
///
/// `value` already includes `error_budget` (series truncation or similar
/// slack), so it is an upper bound up to floating-point rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: ExtendedReal,
    pub inequality: InequalityId,
    pub parameters: BTreeMap<String, f64>,
    pub error_budget: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundResult {
    pub(crate) fn new(inequality: InequalityId, value: ExtendedReal) -> Self {
        BoundResult {
            value,
            inequality,
            parameters: BTreeMap::new(),
            error_budget: 0.0,
            notes: Vec::new(),
        }
    }

    pub(crate) fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub(crate) fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub(crate) fn with_beta(self, c: &Constraints) -> Self {
        let r = self.param("beta", c.beta);
        if c.is_beta_extension() {
            r.note(BETA_EXTENSION_NOTE)
        } else {
            r
        }
    }

    /// The `beta` the bound was computed for, if recorded.
    pub fn beta(&self) -> Option<f64> {
        self.parameters.get("beta").copied()
    }
}

/// `E f(S) <= E f(Z) + f'''(inf-)/3! * beta`. Infinite whenever `f'''` is
/// unbounded.
pub fn theorem_bound(f: &F3Function, c: &Constraints) -> Result<BoundResult> {
    let f3 = f.third_derivative_at_infinity();
    let value = match f3 {
        ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        ExtendedReal::Finite(d3) => f.expect_gaussian_affine(GaussianAffine::STANDARD)? + d3 / 6.0 * c.beta,
    };
    let mut r = BoundResult::new(InequalityId::Theorem, value).with_beta(c);
    if let ExtendedReal::Finite(d3) = f3 {
        r = r.param("third_derivative_at_infinity", d3);
    } else {
        r = r.note("f''' unbounded at infinity: bound is trivial");
    }
    Ok(r)
}

/// `E (S - x)_+^3 <= E (Z - x)_+^3 + beta`.
pub fn cube_plus_bound(x: f64, c: &Constraints) -> Result<BoundResult> {
    let value = partial_moment_plus(x, 3)? + c.beta;
    Ok(BoundResult::new(InequalityId::CubePlus, ExtendedReal::from_f64(value))
        .param("x", x)
        .with_beta(c))
}

/// `E |S - x|^3 <= E |Z - x|^3 + sum E |X_i|^3`, valid for centered summands only.
pub fn abs_cube_bound(x: f64, sum_abs3: f64, c: &Constraints) -> Result<BoundResult> {
    ensure_finite("sum_abs3", sum_abs3)?;
    if sum_abs3 < 0.0 {
        return Err(Error::OutOfRange {
            what: "sum_abs3",
            detail: format!("must be >= 0, got {sum_abs3}"),
        });
    }
    if !c.zero_means {
        return Err(Error::Precondition(
            "absolute third-moment bound requires zero-mean summands".into(),
        ));
    }
    let value = abs_moment3(x)? + sum_abs3;
    Ok(BoundResult::new(InequalityId::AbsCube, ExtendedReal::from_f64(value))
        .param("x", x)
        .param("sum_abs3", sum_abs3)
        .with_beta(c))
}

fn check_p_a(p: f64, a: f64) -> Result<()> {
    ensure_finite("p", p)?;
    ensure_finite("a", a)?;
    if !(p > 0.0 && p < 3.0) {
        return Err(Error::OutOfRange {
            what: "p",
            detail: format!("must lie in (0, 3), got {p}"),
        });
    }
    if a <= 0.0 {
        return Err(Error::OutOfRange {
            what: "a",
            detail: format!("must be > 0, got {a}"),
        });
    }
    Ok(())
}

/// `sup_{u >= 0} u^p / (u + a)^3 = p^p (3-p)^(3-p) / (27 a^(3-p))`, attained
/// at `u = p a / (3 - p)`.
pub fn sup_ratio(p: f64, a: f64) -> Result<f64> {
    check_p_a(p, a)?;
    let q = 3.0 - p;
    Ok(p.powf(p) * q.powf(q) / (27.0 * a.powf(q)))
}

/// `E S_+^p <= sup_ratio(p, a) * (E (Z + a)_+^3 + beta)`.
///
/// The parameters record the split `constant + coefficient * beta`.
pub fn corollary_bound(p: f64, a: f64, c: &Constraints) -> Result<BoundResult> {
    let coefficient = sup_ratio(p, a)?;
    let gaussian = partial_moment_plus(-a, 3)?;
    let value = coefficient * (gaussian + c.beta);
    Ok(BoundResult::new(InequalityId::Corollary, ExtendedReal::from_f64(value))
        .param("p", p)
        .param("a", a)
        .param("constant", coefficient * gaussian)
        .param("coefficient", coefficient)
        .with_beta(c))
}

/// Minimizes [`corollary_bound`] over `a > 0`. Returns `(a_star, bound)`.
pub fn optimize_corollary(p: f64, c: &Constraints) -> Result<(f64, BoundResult)> {
    check_p_a(p, 1.0)?;
    let objective = |a: f64| {
        corollary_bound(p, a, c)
            .map(|r| r.value.to_f64())
            .unwrap_or(f64::INFINITY)
    };
    let (a_star, _) = minimize_positive(objective, 1.0, COROLLARY_A_TOL)?;
    let bound = corollary_bound(p, a_star, c)?.note("a chosen by golden-section minimization");
    Ok((a_star, bound))
}

/// `E S_+ <= 1/2`, attained when `P(S = 1) = P(S = -1) = 1/2`.
pub fn mean_plus_bound(c: &Constraints) -> BoundResult {
    BoundResult::new(InequalityId::MeanPlus, ExtendedReal::Finite(0.5))
        .with_beta(c)
        .note("attained when P(S = 1) = P(S = -1) = 1/2")
}

/// `(u^2 + 2u + 1) / 4`, which dominates `u_+` pointwise.
pub fn quadratic_majorant(u: f64) -> f64 {
    (u * u + 2.0 * u + 1.0) / 4.0
}

/// `E (S^2 + 2S + 1) / 4` from the first two moments of `S`; an upper bound
/// on `E S_+`.
pub fn mean_plus_majorant(mean: f64, second_moment: f64) -> f64 {
    (second_moment + 2.0 * mean + 1.0) / 4.0
}

/// Rounds to `digits` significant figures.
pub fn round_significant(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    fn beta(b: f64) -> Constraints {
        Constraints::new(b).unwrap()
    }

    /// Quadrature of `z^3 phi(z)` over `[0, 40]`: E Z_+^3.
    fn ez_plus3() -> f64 {
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        integrate(|z| z * z * z * pdf(z), 0.0, 40.0, Tolerance::relative(1e-14)).unwrap().value
    }

    #[test]
    fn constraints_validation() {
        assert!(Constraints::new(-0.1).is_err());
        assert!(Constraints::new(f64::NAN).is_err());
        let c = Constraints::new(0.0).unwrap();
        assert!(c.is_beta_extension());
        assert_eq!(c.variance_budget, 1.0);
    }

    #[test]
    fn theorem_examples() {
        for &x in &[-2.0, 0.0, 1.5] {
            let f = F3Function::cube_plus(x).unwrap();
            let a = theorem_bound(&f, &beta(0.3)).unwrap().value.to_f64();
            let b = cube_plus_bound(x, &beta(0.3)).unwrap().value.to_f64();
            assert!((a - b).abs() <= 1e-12 * b);
        }
        let f = F3Function::hinge(1.0, 0.0, 3.5).unwrap();
        assert_eq!(theorem_bound(&f, &beta(0.1)).unwrap().value, ExtendedReal::PosInfinity);
        let f = F3Function::cube_plus(0.0).unwrap();
        let v = theorem_bound(&f, &beta(0.1)).unwrap().value.to_f64();
        assert!((v - (ez_plus3() + 0.1)).abs() < 1e-12);
        assert!((v - 0.8979).abs() < 1e-4);
    }

    #[test]
    fn theorem_scales_beta_by_third_derivative() {
        let f = F3Function::hinge(2.0, 1.0, 3.0).unwrap() + F3Function::affine(1.0, 0.5).unwrap();
        let r0 = theorem_bound(&f, &beta(0.0)).unwrap();
        let r1 = theorem_bound(&f, &beta(1.0)).unwrap();
        assert!((r1.value.to_f64() - r0.value.to_f64() - 2.0).abs() < 1e-12);
        assert!(r0.notes.iter().any(|n| n.contains("continuous extension")));
    }

    #[test]
    fn cube_plus_examples() {
        let v = cube_plus_bound(0.0, &beta(0.1)).unwrap().value.to_f64();
        assert!((v - (ez_plus3() + 0.1)).abs() < 1e-12);
        let v = cube_plus_bound(40.0, &beta(0.5)).unwrap().value.to_f64();
        assert!((v - 0.5).abs() < 1e-300);
        let v = cube_plus_bound(-1.746, &beta(0.0)).unwrap().value.to_f64();
        assert!((v - 10.572_627_084_320_352).abs() < 1e-12);
    }

    #[test]
    fn abs_cube_examples() {
        let c = beta(0.1).with_zero_means();
        let v = abs_cube_bound(0.0, 0.2, &c).unwrap().value.to_f64();
        assert!((v - (2.0 * ez_plus3() + 0.2)).abs() < 1e-12);
        assert!((v - 1.7958).abs() < 1e-4);
        assert_eq!(
            abs_cube_bound(1.3, 0.2, &c).unwrap().value,
            abs_cube_bound(-1.3, 0.2, &c).unwrap().value
        );
        assert!(matches!(abs_cube_bound(0.0, 0.2, &beta(0.1)), Err(Error::Precondition(_))));
        assert!(abs_cube_bound(0.0, -1.0, &c).is_err());
    }

    #[test]
    fn sup_ratio_examples() {
        let v = sup_ratio(1.0, 1.746).unwrap();
        assert!((v - 4.0 / (27.0 * 1.746 * 1.746)).abs() < 1e-16);
        assert!((v - 0.048_597).abs() < 1e-6);
        let v = sup_ratio(2.0, 0.639).unwrap();
        assert!((v - 4.0 / (27.0 * 0.639)).abs() < 1e-15);
        assert!((v - 0.231_844).abs() < 1e-6);
        assert!((sup_ratio(1.5, 1.0).unwrap() - 0.125).abs() < 1e-16);
        assert!(sup_ratio(0.0, 1.0).is_err());
        assert!(sup_ratio(3.0, 1.0).is_err());
        assert!(sup_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn sup_ratio_is_attained() {
        for &(p, a) in &[(0.5f64, 0.3f64), (1.0, 1.746), (2.5, 4.0)] {
            let u = p * a / (3.0 - p);
            let at = u.powf(p) / (u + a).powi(3);
            assert!((at - sup_ratio(p, a).unwrap()).abs() <= 1e-14 * at);
        }
    }

    #[test]
    fn corollary_examples() {
        let r = corollary_bound(1.0, 1.746, &beta(0.0)).unwrap();
        let v = r.value.to_f64();
        // sup_ratio * E(Z + 1.746)_+^3 with the Gaussian factor from quadrature
        assert!((v - 0.513_795_933_366_600_4).abs() < 1e-12);
        assert_eq!(round_significant(v, 3), 0.514);
        assert_eq!(round_significant(r.parameters["coefficient"], 3), 0.0486);

        let r = corollary_bound(2.0, 0.639, &beta(0.0)).unwrap();
        assert!((r.value.to_f64() - 0.554_556_235_910_134_7).abs() < 1e-12);
        assert_eq!(round_significant(r.value.to_f64(), 3), 0.555);
        assert_eq!(round_significant(r.parameters["coefficient"], 3), 0.232);

        let v1 = corollary_bound(1.0, 1.746, &beta(1.0)).unwrap().value.to_f64();
        assert!((v1 - (0.513_795_933_366_600_4 + 0.048_596_808_462_920_37)).abs() < 1e-12);
    }

    #[test]
    fn corollary_is_linear_in_beta() {
        let vals: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&b| corollary_bound(1.3, 0.8, &beta(b)).unwrap().value.to_f64())
            .collect();
        let slope = sup_ratio(1.3, 0.8).unwrap();
        assert!((vals[1] - vals[0] - slope).abs() < 1e-14);
        assert!((vals[2] - vals[1] - slope).abs() < 1e-14);
    }

    fn grid_min(p: f64, b: f64) -> (f64, f64) {
        (0..=20_000)
            .map(|i| 0.01 + i as f64 * (20.0 - 0.01) / 20_000.0)
            .map(|a| (a, corollary_bound(p, a, &beta(b)).unwrap().value.to_f64()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
    }

    #[test]
    fn optimizer_beats_rounded_choices() {
        for &(p, a_rounded) in &[(1.0, 1.746), (2.0, 0.639)] {
            for &b in &[0.0, 0.5, 3.0] {
                let (a_star, r) = optimize_corollary(p, &beta(b)).unwrap();
                let rounded = corollary_bound(p, a_rounded, &beta(b)).unwrap().value.to_f64();
                assert!(r.value.to_f64() <= rounded, "p={p} beta={b}");
                let (a_grid, v_grid) = grid_min(p, b);
                assert!(r.value.to_f64() <= v_grid + 1e-12);
                assert!((a_star - a_grid).abs() < 2e-3, "{a_star} vs {a_grid}");
            }
        }
        let (a1, r1) = optimize_corollary(1.0, &beta(0.0)).unwrap();
        assert!((a1 - 1.746_217_403).abs() < 1e-6, "{a1}");
        assert!(r1.value.to_f64() <= 0.5138);
        let (a2, r2) = optimize_corollary(2.0, &beta(0.0)).unwrap();
        assert!((a2 - 0.638_833_216).abs() < 1e-6, "{a2}");
        assert!(r2.value.to_f64() <= 0.5546);
    }

    #[test]
    fn large_beta_moves_minimizer_right() {
        for &p in &[0.5, 1.0, 2.0, 2.7] {
            let (a0, _) = optimize_corollary(p, &beta(0.0)).unwrap();
            let (a1, _) = optimize_corollary(p, &beta(1e3)).unwrap();
            assert!(a1 > a0, "p={p}: {a1} <= {a0}");
            let (g0, _) = grid_min(p, 0.0);
            let (g1, _) = grid_min(p, 1e3);
            assert!(g1 > g0);
        }
    }

    #[test]
    fn mean_plus_examples() {
        assert_eq!(mean_plus_bound(&beta(0.7)).value, ExtendedReal::Finite(0.5));
        assert_eq!(mean_plus_majorant(0.0, 1.0), 0.5);
        for &u in &[-3.0, 0.0, 1.0, 7.0] {
            assert!(4.0 * f64::max(u, 0.0) <= 4.0 * quadratic_majorant(u));
        }
        assert_eq!(quadratic_majorant(1.0), 1.0);
    }

    #[test]
    fn bound_result_document() {
        let r = corollary_bound(1.0, 1.746, &beta(0.0)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["inequality"], "corollary");
        assert_eq!(json["parameters"]["a"], 1.746);
        let back: BoundResult = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn significant_rounding() {
        assert_eq!(round_significant(0.048_597, 3), 0.0486);
        assert_eq!(round_significant(0.231_844, 3), 0.232);
        assert_eq!(round_significant(-1234.5, 2), -1200.0);
    }
}
