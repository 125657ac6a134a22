//! Standard normal kernels: density, distribution function, partial moments
//! `E (Z - t)_+^k`, and expectations of hinge and exponential functions of
//! `sigma Z + c`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::extended::ExtendedReal;
use crate::quadrature::{integrate, Tolerance};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Width of the integration window for Gaussian integrands, in standard
/// deviations. `phi(40)` underflows binary64.
pub const GAUSS_WINDOW: f64 = 40.0;

/// Below this threshold the textbook closed forms are used directly; above
/// it they subtract nearly equal numbers and the backward recurrence takes over.
const RECURRENCE_THRESHOLD: f64 = 3.0;
const RECURRENCE_DEPTH: usize = 64;

/// The law of `scale * Z + shift` with `Z` standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianAffine {
    pub scale: f64,
    pub shift: f64,
}

impl GaussianAffine {
    pub const STANDARD: GaussianAffine = GaussianAffine {
        scale: 1.0,
        shift: 0.0,
    };

    pub fn new(scale: f64, shift: f64) -> Result<Self> {
        ensure_finite("scale", scale)?;
        ensure_finite("shift", shift)?;
        if scale < 0.0 {
            return Err(Error::OutOfRange {
                what: "scale",
                detail: format!("must be >= 0, got {scale}"),
            });
        }
        Ok(GaussianAffine { scale, shift })
    }

    /// The point mass at `c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(0.0, c)
    }

    pub fn is_degenerate(&self) -> bool {
        self.scale == 0.0
    }
}

/// `phi(t) = exp(-t^2 / 2) / sqrt(2 pi)`.
pub fn std_normal_pdf(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(pdf(t))
}

/// `Phi(t)`, via the complementary error function so both tails keep full
/// relative precision.
pub fn std_normal_cdf(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(cdf(t))
}

/// `1 - Phi(t)` without cancellation.
pub fn std_normal_sf(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(sf(t))
}

#[inline]
pub(crate) fn pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

#[inline]
pub(crate) fn cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn sf(t: f64) -> f64 {
    0.5 * libm::erfc(t * std::f64::consts::FRAC_1_SQRT_2)
}

/// `E (Z - t)_+^k` for `k` in `0..=3`.
///
/// ```text
/// k = 0:  1 - Phi(t)
/// k = 1:  phi(t) - t (1 - Phi(t))
/// k = 2:  (1 + t^2)(1 - Phi(t)) - t phi(t)
/// k = 3:  (t^2 + 2) phi(t) - (t^3 + 3t)(1 - Phi(t))
/// ```
pub fn partial_moment_plus(t: f64, k: u32) -> Result<f64> {
    ensure_finite("t", t)?;
    if k > 3 {
        return Err(Error::OutOfRange {
            what: "partial moment order",
            detail: format!("k must be in 0..=3, got {k}"),
        });
    }
    Ok(partial_moment_unchecked(t, k))
}

pub(crate) fn partial_moment_unchecked(t: f64, k: u32) -> f64 {
    if t >= RECURRENCE_THRESHOLD {
        partial_moment_recurrence(t, k)
    } else {
        partial_moment_closed_form(t, k)
    }
}

/// The closed forms as written, without any cancellation handling.
pub fn partial_moment_closed_form(t: f64, k: u32) -> f64 {
    let p = pdf(t);
    let q = sf(t);
    match k {
        0 => q,
        1 => p - t * q,
        2 => (1.0 + t * t) * q - t * p,
        3 => (t * t + 2.0) * p - (t * t * t + 3.0 * t) * q,
        _ => unreachable!("order checked by caller"),
    }
}

/// Evaluates `I_k(t) = E (Z - t)_+^k / k!` through the backward (Miller)
/// recurrence `I_{k-2} = k I_k + t I_{k-1}`, normalized by `I_0 = 1 - Phi(t)`.
/// `I_k` is the minimal solution for `t > 0`, so this is stable where the
/// forward closed forms cancel.
fn partial_moment_recurrence(t: f64, k: u32) -> f64 {
    let q = sf(t);
    if q == 0.0 {
        return 0.0;
    }
    let mut upper = 0.0; // I_{n}
    let mut lower = 1.0; // I_{n-1}
    let mut wanted = 0.0;
    for n in (2..=RECURRENCE_DEPTH).rev() {
        let next = n as f64 * upper + t * lower; // I_{n-2}
        upper = lower;
        lower = next;
        if n - 2 == k as usize {
            wanted = next;
        }
    }
    let factorial = [1.0, 1.0, 2.0, 6.0][k as usize];
    factorial * (wanted / lower) * q
}

/// `E |Z - x|^3 = E (Z - x)_+^3 + E (Z + x)_+^3`.
pub fn abs_moment3(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    let a = partial_moment_unchecked(x, 3);
    let b = partial_moment_unchecked(-x, 3);
    Ok(a + b)
}

/// `E (Z - t)_+^alpha` for real `alpha >= 0`, by adaptive quadrature over
/// `[max(t, -40), max(t, 0) + 40]`.
pub fn partial_moment_quadrature(t: f64, alpha: f64, rel_tol: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("alpha", alpha)?;
    let lo = t.max(-GAUSS_WINDOW);
    let hi = t.max(0.0) + GAUSS_WINDOW;
    let integrand = |z: f64| {
        let d = z - t;
        if d <= 0.0 {
            0.0
        } else {
            d.powf(alpha) * pdf(z)
        }
    };
    integrate(integrand, lo, hi, Tolerance::relative(rel_tol)).map(|r| r.value)
}

fn check_hinge_exponent(alpha: f64) -> Result<()> {
    ensure_finite("alpha", alpha)?;
    if alpha < 3.0 {
        return Err(Error::OutOfRange {
            what: "hinge exponent",
            detail: format!("alpha must be >= 3, got {alpha}"),
        });
    }
    Ok(())
}

/// `E (sigma Z + c - t)_+^alpha`. Closed form for `alpha = 3`, quadrature
/// (relative tolerance well under 1e-10) otherwise.
pub fn expect_hinge(ga: GaussianAffine, t: f64, alpha: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    check_hinge_exponent(alpha)?;
    if ga.is_degenerate() {
        return Ok((ga.shift - t).max(0.0).powf(alpha));
    }
    let s = (t - ga.shift) / ga.scale;
    if alpha == 3.0 {
        Ok(ga.scale.powi(3) * partial_moment_unchecked(s, 3))
    } else {
        Ok(ga.scale.powf(alpha) * partial_moment_quadrature(s, alpha, 1e-12)?)
    }
}

/// [`expect_hinge`] forced through the quadrature path for every exponent.
pub fn expect_hinge_quadrature(ga: GaussianAffine, t: f64, alpha: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    check_hinge_exponent(alpha)?;
    if ga.is_degenerate() {
        return Ok((ga.shift - t).max(0.0).powf(alpha));
    }
    let s = (t - ga.shift) / ga.scale;
    Ok(ga.scale.powf(alpha) * partial_moment_quadrature(s, alpha, 1e-12)?)
}

/// `E exp(lambda (sigma Z + c)) = exp(lambda c + lambda^2 sigma^2 / 2)`;
/// overflow comes back as [`ExtendedReal::PosInfinity`].
pub fn expect_exp(ga: GaussianAffine, lambda: f64) -> Result<ExtendedReal> {
    ensure_finite("lambda", lambda)?;
    if lambda < 0.0 {
        return Err(Error::OutOfRange {
            what: "exponential rate",
            detail: format!("lambda must be >= 0, got {lambda}"),
        });
    }
    let exponent = lambda * ga.shift + 0.5 * lambda * lambda * ga.scale * ga.scale;
    Ok(ExtendedReal::from_f64(exponent.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_pm(t: f64, k: u32) -> f64 {
        partial_moment_quadrature(t, k as f64, 1e-13).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * (1.0 + b.abs())
    }

    #[test]
    fn pdf_values() {
        assert_eq!(std_normal_pdf(0.0).unwrap(), 0.398_942_280_401_432_7);
        assert_eq!(std_normal_pdf(1.3).unwrap(), std_normal_pdf(-1.3).unwrap());
        // exp(-1.746^2/2)/sqrt(2 pi) = 0.08688268...
        let v = std_normal_pdf(1.746).unwrap();
        assert!((v - 0.086_882_683_729).abs() < 1e-12, "{v}");
        assert!(std_normal_pdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        let oracle = 0.5
            + integrate(pdf, 0.0, 1.746, Tolerance::relative(1e-15))
                .unwrap()
                .value;
        let v = std_normal_cdf(1.746).unwrap();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.95959).abs() < 1e-5);
        let far = std_normal_cdf(-8.0).unwrap();
        assert!(far > 0.0 && far < 1e-14);
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_symmetry_and_accuracy() {
        for i in -80..=80 {
            let t = i as f64 / 10.0;
            let s = cdf(t) + cdf(-t);
            assert!((s - 1.0).abs() < 1e-15, "t={t}");
            let oracle = if t <= 0.0 {
                integrate(pdf, -GAUSS_WINDOW, t, Tolerance::relative(1e-15)).unwrap().value
            } else {
                1.0 - integrate(pdf, t, GAUSS_WINDOW, Tolerance::relative(1e-15)).unwrap().value
            };
            assert!((cdf(t) - oracle).abs() <= 1e-14, "t={t}");
        }
    }

    #[test]
    fn partial_moment_examples() {
        let v = partial_moment_plus(0.0, 3).unwrap();
        assert!((v - 2.0 * INV_SQRT_2PI).abs() < 1e-15);
        assert!((v - quad_pm(0.0, 3)).abs() < 1e-12);
        let v = partial_moment_plus(-1.746, 3).unwrap();
        assert!(close(v, quad_pm(-1.746, 3), 1e-12));
        assert!((v - 10.5726).abs() < 5e-4, "{v}");
        assert!(partial_moment_plus(40.0, 3).unwrap() < 1e-300);
        assert!(partial_moment_plus(0.0, 4).is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for i in -40..=40 {
            let t = i as f64 * 0.2;
            for k in 0..=3 {
                let cf = partial_moment_plus(t, k).unwrap();
                let q = quad_pm(t, k);
                assert!((cf - q).abs() <= 1e-10 * q.abs(), "t={t} k={k}: {cf} vs {q}");
            }
        }
    }

    #[test]
    fn recurrence_agrees_with_closed_form_at_switch() {
        for &t in &[2.5, 2.9, 3.0, 3.1, 3.5] {
            for k in 0..=3 {
                let a = partial_moment_closed_form(t, k);
                let b = partial_moment_recurrence(t, k);
                assert!((a - b).abs() <= 1e-12 * b, "t={t} k={k}");
            }
        }
    }

    #[test]
    fn third_partial_moment_identity() {
        // E(Z-t)_+^3 = (t^2+2) phi(t) - (t^3+3t)(1-Phi(t)) on the stable side.
        for i in -30..15 {
            let t = i as f64 * 0.2;
            let lhs = partial_moment_plus(t, 3).unwrap();
            let rhs = (t * t + 2.0) * pdf(t) - (t * t * t + 3.0 * t) * (1.0 - cdf(t));
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs), "t={t}");
        }
    }

    #[test]
    fn partial_moments_strictly_decrease() {
        for k in 0..=3 {
            let mut prev = f64::INFINITY;
            for i in -160..=160 {
                let v = partial_moment_plus(i as f64 * 0.05, k).unwrap();
                if v <= 1e-12 {
                    break;
                }
                assert!(v < prev, "k={k} i={i}");
                prev = v;
            }
        }
    }

    #[test]
    fn far_left_tail_is_full_moment() {
        // E(Z - t)^3 = -t^3 - 3t once the Gaussian mass is entirely right of t.
        let t = -1e3;
        let v = partial_moment_plus(t, 3).unwrap();
        assert_eq!(v, -(t * t * t + 3.0 * t));
    }

    #[test]
    fn abs_moment_examples() {
        let v = abs_moment3(0.0).unwrap();
        assert!((v - 4.0 * INV_SQRT_2PI).abs() < 1e-15);
        assert!((v - 1.595_769_121_6).abs() < 1e-10);
        for &x in &[0.3, 1.0, 2.7, 5.0, 11.0] {
            assert_eq!(abs_moment3(x).unwrap(), abs_moment3(-x).unwrap());
        }
        let oracle = quad_pm(5.0, 3) + quad_pm(-5.0, 3);
        let v = abs_moment3(5.0).unwrap();
        assert!(close(v, oracle, 1e-12));
        // E|Z-5|^3 = 125 + 15 + small Gaussian tail corrections
        assert!((v - 140.0).abs() < 1e-4);
        // minimum at 0
        assert!(abs_moment3(0.1).unwrap() > v.min(abs_moment3(0.0).unwrap()));
    }

    #[test]
    fn hinge_examples() {
        let std = GaussianAffine::STANDARD;
        let v = expect_hinge(std, 0.0, 3.0).unwrap();
        assert_eq!(v, partial_moment_plus(0.0, 3).unwrap());
        let point = GaussianAffine::constant(2.0).unwrap();
        assert_eq!(expect_hinge(point, 1.0, 3.0).unwrap(), 1.0);
        let v = expect_hinge(std, 0.0, 4.0).unwrap();
        assert!((v - 1.5).abs() < 1e-10, "{v}");
        assert!(expect_hinge(std, 0.0, 2.5).is_err());
    }

    #[test]
    fn hinge_paths_agree() {
        for &(s, c, t) in &[(1.0, 0.0, 0.0), (0.5, 1.0, -2.0), (2.0, -3.0, 1.5), (0.9, 100.0, 0.0), (1.3, 0.2, 4.0)] {
            let ga = GaussianAffine::new(s, c).unwrap();
            let a = expect_hinge(ga, t, 3.0).unwrap();
            let b = expect_hinge_quadrature(ga, t, 3.0).unwrap();
            assert!((a - b).abs() <= 1e-9 * b, "{s} {c} {t}: {a} vs {b}");
        }
    }

    #[test]
    fn exp_examples() {
        let std = GaussianAffine::STANDARD;
        assert_eq!(expect_exp(std, 0.0).unwrap(), ExtendedReal::Finite(1.0));
        let v = expect_exp(std, 1.0).unwrap().to_f64();
        assert!((v - 0.5f64.exp()).abs() < 1e-15);
        let ga = GaussianAffine::new(2.0, 1.0).unwrap();
        let v = expect_exp(ga, 1.0).unwrap().to_f64();
        let oracle = integrate(|z| (2.0 * z + 1.0).exp() * pdf(z), -40.0, 44.0, Tolerance::relative(1e-13))
            .unwrap()
            .value;
        assert!((v - oracle).abs() < 1e-10 * oracle);
        assert!((v - 20.0855).abs() < 1e-4);
        assert_eq!(expect_exp(std, 40.0).unwrap(), ExtendedReal::PosInfinity);
        assert!(expect_exp(std, -1.0).is_err());
    }

    #[test]
    fn gaussian_affine_validation() {
        assert!(GaussianAffine::new(-1.0, 0.0).is_err());
        assert!(GaussianAffine::new(1.0, f64::NAN).is_err());
        assert!(GaussianAffine::constant(3.0).unwrap().is_degenerate());
    }
}
