//! Test functions whose first three derivatives are nondecreasing.
//!
//! The representable cone is spanned by affine functions with nonnegative
//! slope, hinge powers `c (x - t)_+^alpha` with `alpha >= 3`, and exponentials
//! `c exp(lambda x)` with `lambda >= 0`, all with nonnegative coefficients.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::extended::ExtendedReal;
use crate::normal::{expect_exp, expect_hinge, GaussianAffine};

/// `coeff * (x - threshold)_+^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeTerm {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "t")]
    pub threshold: f64,
    #[serde(rename = "alpha")]
    pub exponent: f64,
}

/// `coeff * exp(rate * x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "lambda")]
    pub rate: f64,
}

impl HingeTerm {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        let d = x - self.threshold;
        if d <= 0.0 {
            0.0
        } else if self.exponent == 3.0 {
            self.coeff * d * d * d
        } else {
            self.coeff * d.powf(self.exponent)
        }
    }
}

/// A member of the representable F3 cone:
/// `x -> a + b x + sum c_i (x - t_i)_+^alpha_i + sum c_j exp(lambda_j x)`.
///
/// Constructed values are canonical: zero-coefficient terms are dropped and
/// `lambda = 0` exponentials are folded into the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "F3FunctionDoc", into = "F3FunctionDoc")]
pub struct F3Function {
    affine_intercept: f64,
    affine_slope: f64,
    hinges: Vec<HingeTerm>,
    exps: Vec<ExpTerm>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct AffineDoc {
    #[serde(default)]
    a: f64,
    #[serde(default)]
    b: f64,
}

/// On-disk form: `{"affine": {"a", "b"}, "hinges": [{"c", "t", "alpha"}], "exps": [{"c", "lambda"}]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct F3FunctionDoc {
    #[serde(default)]
    affine: AffineDoc,
    #[serde(default)]
    hinges: Vec<HingeTerm>,
    #[serde(default)]
    exps: Vec<ExpTerm>,
}

impl TryFrom<F3FunctionDoc> for F3Function {
    type Error = Error;

    fn try_from(doc: F3FunctionDoc) -> Result<Self> {
        F3Function::new(doc.affine.a, doc.affine.b, doc.hinges, doc.exps)
    }
}

impl From<F3Function> for F3FunctionDoc {
    fn from(f: F3Function) -> Self {
        F3FunctionDoc {
            affine: AffineDoc {
                a: f.affine_intercept,
                b: f.affine_slope,
            },
            hinges: f.hinges,
            exps: f.exps,
        }
    }
}

impl F3Function {
    pub fn new(
        affine_intercept: f64,
        affine_slope: f64,
        hinges: Vec<HingeTerm>,
        exps: Vec<ExpTerm>,
    ) -> Result<Self> {
        ensure_finite("affine intercept", affine_intercept)?;
        ensure_finite("affine slope", affine_slope)?;
        if affine_slope < 0.0 {
            return Err(Error::InvalidFunction(format!(
                "affine slope must be >= 0, got {affine_slope}"
            )));
        }
        for h in &hinges {
            ensure_finite("hinge coefficient", h.coeff)?;
            ensure_finite("hinge threshold", h.threshold)?;
            ensure_finite("hinge exponent", h.exponent)?;
            if h.coeff < 0.0 {
                return Err(Error::InvalidFunction(format!(
                    "hinge coefficient must be >= 0, got {}",
                    h.coeff
                )));
            }
            if h.exponent < 3.0 {
                return Err(Error::InvalidFunction(format!(
                    "hinge exponent must be >= 3, got {}",
                    h.exponent
                )));
            }
        }
        for e in &exps {
            ensure_finite("exponential coefficient", e.coeff)?;
            ensure_finite("exponential rate", e.rate)?;
            if e.coeff < 0.0 || e.rate < 0.0 {
                return Err(Error::InvalidFunction(format!(
                    "exponential term needs c >= 0 and lambda >= 0, got c={} lambda={}",
                    e.coeff, e.rate
                )));
            }
        }

        let mut intercept = affine_intercept;
        let mut kept_exps = Vec::with_capacity(exps.len());
        for e in exps {
            if e.coeff == 0.0 {
                continue;
            }
            if e.rate == 0.0 {
                intercept += e.coeff;
            } else {
                kept_exps.push(e);
            }
        }
        ensure_finite("affine intercept", intercept)?;
        let hinges = hinges.into_iter().filter(|h| h.coeff != 0.0).collect();
        Ok(F3Function {
            affine_intercept: intercept,
            affine_slope,
            hinges,
            exps: kept_exps,
        })
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, Vec::new(), Vec::new())
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::affine(a, 0.0)
    }

    pub fn hinge(coeff: f64, threshold: f64, exponent: f64) -> Result<Self> {
        Self::new(
            0.0,
            0.0,
            vec![HingeTerm {
                coeff,
                threshold,
                exponent,
            }],
            Vec::new(),
        )
    }

    /// `(x - threshold)_+^3`, the function behind the shifted third-moment bounds.
    pub fn cube_plus(threshold: f64) -> Result<Self> {
        Self::hinge(1.0, threshold, 3.0)
    }

    pub fn exponential(coeff: f64, rate: f64) -> Result<Self> {
        Self::new(0.0, 0.0, Vec::new(), vec![ExpTerm { coeff, rate }])
    }

    /// Parses the repeated command-line literals `hinge:c,t,alpha`,
    /// `exp:c,lambda`, `affine:a,b` and sums them.
    pub fn from_literals<S: AsRef<str>>(literals: &[S]) -> Result<Self> {
        let mut acc = F3Function::constant(0.0)?;
        for lit in literals {
            acc = acc + lit.as_ref().parse::<F3Function>()?;
        }
        Ok(acc)
    }

    pub fn affine_intercept(&self) -> f64 {
        self.affine_intercept
    }

    pub fn affine_slope(&self) -> f64 {
        self.affine_slope
    }

    pub fn hinges(&self) -> &[HingeTerm] {
        &self.hinges
    }

    pub fn exps(&self) -> &[ExpTerm] {
        &self.exps
    }

    /// True when the function is affine (no hinge or exponential terms).
    pub fn is_affine(&self) -> bool {
        self.hinges.is_empty() && self.exps.is_empty()
    }

    /// The same function with the affine part removed.
    pub fn nonlinear_part(&self) -> F3Function {
        F3Function {
            affine_intercept: 0.0,
            affine_slope: 0.0,
            hinges: self.hinges.clone(),
            exps: self.exps.clone(),
        }
    }

    /// Pointwise value; `+inf` on overflow.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let mut acc = self.affine_intercept + self.affine_slope * x;
        for h in &self.hinges {
            acc += h.value(x);
        }
        for e in &self.exps {
            acc += e.coeff * (e.rate * x).exp();
        }
        acc
    }

    pub fn evaluate(&self, x: f64) -> Result<ExtendedReal> {
        ensure_finite("x", x)?;
        Ok(ExtendedReal::from_f64(self.value(x)))
    }

    /// `f'''(inf-)`: `6 * sum c` over cubic hinges, or `+inf` as soon as any
    /// hinge has `alpha > 3` or any exponential grows.
    pub fn third_derivative_at_infinity(&self) -> ExtendedReal {
        if self.hinges.iter().any(|h| h.exponent > 3.0) || !self.exps.is_empty() {
            return ExtendedReal::PosInfinity;
        }
        ExtendedReal::from_f64(self.hinges.iter().map(|h| 6.0 * h.coeff).sum())
    }

    /// `E f(sigma Z + c)`, termwise.
    pub fn expect_gaussian_affine(&self, ga: GaussianAffine) -> Result<ExtendedReal> {
        let mut acc = ExtendedReal::from_f64(self.affine_intercept + self.affine_slope * ga.shift);
        for h in &self.hinges {
            acc = acc + h.coeff * expect_hinge(ga, h.threshold, h.exponent)?;
        }
        for e in &self.exps {
            acc = acc + ExtendedReal::from_f64(e.coeff * expect_exp(ga, e.rate)?.to_f64());
        }
        Ok(acc)
    }
}

impl Add for F3Function {
    type Output = F3Function;

    fn add(mut self, rhs: F3Function) -> F3Function {
        self.affine_intercept += rhs.affine_intercept;
        self.affine_slope += rhs.affine_slope;
        self.hinges.extend(rhs.hinges);
        self.exps.extend(rhs.exps);
        self
    }
}

impl FromStr for F3Function {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidFunction(format!(
                "cannot parse `{s}`; expected hinge:c,t,alpha | exp:c,lambda | affine:a,b"
            ))
        };
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("hinge", &[c, t, alpha]) => F3Function::hinge(c, t, alpha),
            ("exp", &[c, lambda]) => F3Function::exponential(c, lambda),
            ("affine", &[a, b]) => F3Function::affine(a, b),
            _ => Err(bad()),
        }
    }
}

fn shifted(t: f64) -> String {
    if t == 0.0 {
        "x".into()
    } else if t < 0.0 {
        format!("x + {}", -t)
    } else {
        format!("x - {t}")
    }
}

impl fmt::Display for F3Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.affine_intercept != 0.0 {
            parts.push(format!("{}", self.affine_intercept));
        }
        if self.affine_slope != 0.0 {
            parts.push(format!("{}x", self.affine_slope));
        }
        for h in &self.hinges {
            parts.push(format!("{}({})_+^{}", h.coeff, shifted(h.threshold), h.exponent));
        }
        for e in &self.exps {
            parts.push(format!("{}exp({}x)", e.coeff, e.rate));
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use proptest::prelude::*;

    fn quad_expect(f: &F3Function, ga: GaussianAffine) -> f64 {
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        integrate(|z| f.value(ga.scale * z + ga.shift) * pdf(z), -40.0, 40.0, Tolerance::relative(1e-13))
            .unwrap()
            .value
    }

    #[test]
    fn evaluate_examples() {
        let cube = F3Function::hinge(1.0, 0.0, 3.0).unwrap();
        assert_eq!(cube.evaluate(2.0).unwrap(), ExtendedReal::Finite(8.0));
        assert_eq!(cube.evaluate(-1.0).unwrap(), ExtendedReal::Finite(0.0));
        let f = F3Function::affine(1.0, 2.0).unwrap() + F3Function::exponential(1.0, 0.0).unwrap();
        assert_eq!(f.evaluate(3.0).unwrap(), ExtendedReal::Finite(8.0));
        let g = F3Function::exponential(1.0, 10.0).unwrap();
        assert_eq!(g.evaluate(100.0).unwrap(), ExtendedReal::PosInfinity);
        assert!(cube.evaluate(f64::NAN).is_err());
    }

    #[test]
    fn third_derivative_examples() {
        let f = F3Function::hinge(1.0, 0.0, 3.0).unwrap();
        assert_eq!(f.third_derivative_at_infinity(), ExtendedReal::Finite(6.0));
        let f = F3Function::hinge(1.0, 5.0, 3.5).unwrap();
        assert_eq!(f.third_derivative_at_infinity(), ExtendedReal::PosInfinity);
        let f = F3Function::hinge(2.0, -1.0, 3.0).unwrap() + F3Function::hinge(0.5, 7.0, 3.0).unwrap();
        assert_eq!(f.third_derivative_at_infinity(), ExtendedReal::Finite(15.0));
        let f = F3Function::exponential(1.0, 0.5).unwrap();
        assert_eq!(f.third_derivative_at_infinity(), ExtendedReal::PosInfinity);
        // a zero-coefficient steep term does not make f''' unbounded
        let f = F3Function::hinge(0.0, 0.0, 5.0).unwrap() + F3Function::exponential(0.0, 2.0).unwrap();
        assert_eq!(f.third_derivative_at_infinity(), ExtendedReal::Finite(0.0));
    }

    #[test]
    fn gaussian_expectation_examples() {
        let cube = F3Function::hinge(1.0, 0.0, 3.0).unwrap();
        let v = cube.expect_gaussian_affine(GaussianAffine::STANDARD).unwrap().to_f64();
        assert!((v - quad_expect(&cube, GaussianAffine::STANDARD)).abs() < 1e-12);
        assert!((v - 0.797_884_560_8).abs() < 1e-10);

        let lin = F3Function::affine(0.0, 1.0).unwrap();
        let ga = GaussianAffine::new(3.0, -2.0).unwrap();
        assert_eq!(lin.expect_gaussian_affine(ga).unwrap(), ExtendedReal::Finite(-2.0));

        let shifted = F3Function::hinge(1.0, -1.746, 3.0).unwrap();
        let v = shifted.expect_gaussian_affine(GaussianAffine::STANDARD).unwrap().to_f64();
        let oracle = quad_expect(&shifted, GaussianAffine::STANDARD);
        assert!((v - oracle).abs() < 1e-10 * oracle);
        assert!((v - 10.5726).abs() < 5e-4);
    }

    #[test]
    fn canonical_form() {
        let f = F3Function::new(
            1.0,
            0.0,
            vec![HingeTerm { coeff: 0.0, threshold: 1.0, exponent: 3.0 }],
            vec![ExpTerm { coeff: 2.0, rate: 0.0 }],
        )
        .unwrap();
        assert_eq!(f, F3Function::constant(3.0).unwrap());
        assert!(f.is_affine());
    }

    #[test]
    fn invalid_members_rejected() {
        assert!(F3Function::affine(0.0, -1.0).is_err());
        assert!(F3Function::hinge(-1.0, 0.0, 3.0).is_err());
        assert!(F3Function::hinge(1.0, 0.0, 2.0).is_err());
        assert!(F3Function::exponential(1.0, -0.1).is_err());
        assert!(F3Function::hinge(1.0, f64::INFINITY, 3.0).is_err());
    }

    #[test]
    fn display() {
        let f = F3Function::from_literals(&["hinge:1,-1,3", "affine:0,1", "exp:2,0.5"]).unwrap();
        assert_eq!(f.to_string(), "1x + 1(x + 1)_+^3 + 2exp(0.5x)");
        assert_eq!(F3Function::cube_plus(0.0).unwrap().to_string(), "1(x)_+^3");
        assert_eq!(F3Function::constant(0.0).unwrap().to_string(), "0");
    }

    #[test]
    fn literal_parsing() {
        let f = F3Function::from_literals(&["hinge:1,0,3", "affine:2,0.5", "exp:1,0.25"]).unwrap();
        assert_eq!(f.affine_intercept(), 2.0);
        assert_eq!(f.affine_slope(), 0.5);
        assert_eq!(f.hinges().len(), 1);
        assert_eq!(f.exps().len(), 1);
        assert!("hinge:1,0".parse::<F3Function>().is_err());
        assert!("cube:1,0,3".parse::<F3Function>().is_err());
        assert!("hinge:1,x,3".parse::<F3Function>().is_err());
    }

    #[test]
    fn document_roundtrip() {
        let json = r#"{"affine":{"a":1,"b":2},"hinges":[{"c":1,"t":0,"alpha":3}],"exps":[{"c":0.5,"lambda":0.1}]}"#;
        let f: F3Function = serde_json::from_str(json).unwrap();
        assert_eq!(f.hinges()[0].exponent, 3.0);
        let back: F3Function = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(f, back);
        let bad = r#"{"hinges":[{"c":1,"t":0,"alpha":2}]}"#;
        assert!(serde_json::from_str::<F3Function>(bad).is_err());
        let partial: F3Function = serde_json::from_str(r#"{"hinges":[{"c":1,"t":0,"alpha":3}]}"#).unwrap();
        assert_eq!(partial, F3Function::cube_plus(0.0).unwrap());
    }

    #[test]
    fn cubic_growth_matches_third_derivative() {
        let f = F3Function::hinge(2.0, -1.0, 3.0).unwrap()
            + F3Function::hinge(0.5, 7.0, 3.0).unwrap()
            + F3Function::affine(-4.0, 3.0).unwrap();
        let limit = f.third_derivative_at_infinity().to_f64() / 6.0;
        for &x in &[1e3, 1e4, 1e5] {
            let ratio = f.value(x) / (x * x * x);
            assert!((ratio - limit).abs() <= 10.0 / x * limit, "x={x} ratio={ratio}");
        }
    }

    fn arb_f3() -> impl Strategy<Value = F3Function> {
        let hinge = (0.0..2.0f64, -3.0..3.0f64, 3.0..5.0f64);
        let exp = (0.0..1.0f64, 0.0..1.5f64);
        (
            -2.0..2.0f64,
            0.0..2.0f64,
            prop::collection::vec(hinge, 0..3),
            prop::collection::vec(exp, 0..2),
        )
            .prop_map(|(a, b, hs, es)| {
                F3Function::new(
                    a,
                    b,
                    hs.into_iter()
                        .map(|(coeff, threshold, exponent)| HingeTerm { coeff, threshold, exponent })
                        .collect(),
                    es.into_iter().map(|(coeff, rate)| ExpTerm { coeff, rate }).collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn derivatives_nondecreasing(f in arb_f3(), x1 in -4.0..4.0f64, gap in 0.01..3.0f64) {
            let x2 = x1 + gap;
            let h = 1e-3;
            let d1 = |x: f64| (f.value(x + h) - f.value(x - h)) / (2.0 * h);
            let d2 = |x: f64| (f.value(x + h) - 2.0 * f.value(x) + f.value(x - h)) / (h * h);
            let scale = 1.0 + f.value(x2).abs();
            prop_assert!(f.value(x1) <= f.value(x2) + 1e-7 * scale);
            prop_assert!(d1(x1) <= d1(x2) + 1e-7 * scale);
            prop_assert!(d2(x1) <= d2(x2) + 1e-7 * scale);
        }

        #[test]
        fn expectation_is_linear(f in arb_f3(), g in arb_f3(), s in 0.1..2.0f64, c in -2.0..2.0f64) {
            let ga = GaussianAffine::new(s, c).unwrap();
            let lhs = (f.clone() + g.clone()).expect_gaussian_affine(ga).unwrap().to_f64();
            let rhs = f.expect_gaussian_affine(ga).unwrap().to_f64() + g.expect_gaussian_affine(ga).unwrap().to_f64();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
