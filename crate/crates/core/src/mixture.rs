//! The finite-level bound behind the main theorem.
//!
//! For summands capped at `y > beta`, `E f(S_y)` is at most
//! `E f(sqrt(1 - beta/y) Z + y (Pi_theta - theta))` with `Pi_theta` Poisson of
//! mean `theta = beta / y^3`. Conditioning on the Poisson count gives
//!
//! ```text
//! sum_j  E f(sqrt(1 - beta/y) Z + y j - beta/y^2) * theta^j e^-theta / j!
//! ```
//!
//! which is evaluated here to a certified tolerance. As `y -> inf` it tends to
//! `E f(Z) + f'''(inf-) beta / 6`.

use serde::{Deserialize, Serialize};

use crate::bounds::{theorem_bound, BoundResult, Constraints, InequalityId};
use crate::error::{ensure_finite, Error, Result};
use crate::extended::ExtendedReal;
use crate::function_class::F3Function;
use crate::normal::GaussianAffine;

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 1_000_000;

/// Tail tolerance used by [`convergence_profile`].
pub const PROFILE_EPS: f64 = 1e-12;

const ABS_Z_MEAN: f64 = 0.797_884_560_802_865_4; // E|Z| = sqrt(2/pi)
const ABS_Z_CUBE_MEAN: f64 = 1.595_769_121_605_730_7; // E|Z|^3 = 2 sqrt(2/pi)

/// `(beta, y)` together with the derived Poisson mean, Gaussian scale and drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub beta: f64,
    pub y: f64,
    /// `beta / y^3`
    pub theta: f64,
    /// `sqrt(1 - beta / y)`
    pub scale: f64,
    /// `-theta * y = -beta / y^2`
    pub drift: f64,
}

impl MixtureParams {
    /// Requires `y > beta >= 0`; `beta = 0` is the degenerate Gaussian case.
    pub fn new(beta: f64, y: f64) -> Result<Self> {
        ensure_finite("beta", beta)?;
        ensure_finite("y", y)?;
        if beta < 0.0 {
            return Err(Error::OutOfRange {
                what: "beta",
                detail: format!("must be >= 0, got {beta}"),
            });
        }
        if !(y > beta && y > 0.0) {
            return Err(Error::Precondition(format!(
                "truncation level y = {y} must exceed beta = {beta}"
            )));
        }
        let theta = beta / (y * y * y);
        Ok(MixtureParams {
            beta,
            y,
            theta,
            scale: (1.0 - beta / y).sqrt(),
            drift: -theta * y,
        })
    }

    /// The Gaussian law of the `j`-th mixture component.
    pub fn component(&self, j: usize) -> GaussianAffine {
        GaussianAffine {
            scale: self.scale,
            shift: self.y * j as f64 + self.drift,
        }
    }

    /// `ln P(Pi_theta = j)`.
    pub fn ln_poisson_weight(&self, j: usize) -> f64 {
        if self.theta == 0.0 {
            return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let jf = j as f64;
        jf * self.theta.ln() - self.theta - libm::lgamma(jf + 1.0)
    }

    pub fn poisson_weight(&self, j: usize) -> f64 {
        self.ln_poisson_weight(j).exp()
    }
}

/// `E |Z|^alpha = 2^(alpha/2) Gamma((alpha+1)/2) / sqrt(pi)`.
fn abs_normal_moment(alpha: f64) -> f64 {
    (0.5 * alpha * std::f64::consts::LN_2 + libm::lgamma(0.5 * (alpha + 1.0))
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-term envelope `B(j) >= E g(component j)` for the nonlinear part `g` of
/// `f`, valid for `j >= 1`, and a bound on `B(j+1) / B(j)` that is
/// nonincreasing in `j`.
struct TailEnvelope<'a> {
    f: &'a F3Function,
    mp: MixtureParams,
}

impl TailEnvelope<'_> {
    /// `ln B(j)`. Uses `(sigma Z + yj + drift - t)_+ <= |sigma Z| + yj + |t|`
    /// (the drift is nonpositive), then `E(|sigma Z| + K)^3` expanded exactly
    /// for cubic hinges and `(u + v)^a <= 2^(a-1) (u^a + v^a)` otherwise.
    fn ln_envelope(&self, j: usize) -> f64 {
        let s = self.mp.scale;
        let hinge_logs = self.f.hinges().iter().map(|h| {
            let k = self.mp.y * j as f64 + h.threshold.abs();
            let moment = if h.exponent == 3.0 {
                k * k * k + 3.0 * k * k * s * ABS_Z_MEAN + 3.0 * k * s * s + s * s * s * ABS_Z_CUBE_MEAN
            } else {
                let a = h.exponent;
                2f64.powf(a - 1.0) * (s.powf(a) * abs_normal_moment(a) + k.powf(a))
            };
            h.coeff.ln() + moment.ln()
        });
        let exp_logs = self.f.exps().iter().map(|e| {
            let shift = self.mp.y * j as f64 + self.mp.drift;
            e.coeff.ln() + e.rate * shift + 0.5 * e.rate * e.rate * s * s
        });
        log_sum_exp(hinge_logs.chain(exp_logs))
    }

    /// Upper bound on `ln(B(j+1) / B(j))`.
    fn ln_growth(&self, j: usize) -> f64 {
        let y = self.mp.y;
        let hinge = self.f.hinges().iter().map(|h| {
            let k = y * j as f64 + h.threshold.abs();
            h.exponent * (y / k).ln_1p()
        });
        let exp = self.f.exps().iter().map(|e| e.rate * y);
        hinge.chain(exp).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Certified bound on `sum_{j > big_j} P(Pi = j) E g(component j)`, or
    /// `None` when the ratio test does not yet give a factor of at most 1/2.
    fn tail_bound(&self, big_j: usize) -> Option<f64> {
        let next = big_j + 1;
        let ln_ratio = self.mp.theta.ln() - ((next + 1) as f64).ln() + self.ln_growth(next);
        if ln_ratio > -std::f64::consts::LN_2 {
            return None;
        }
        let ln_first = self.mp.ln_poisson_weight(next) + self.ln_envelope(next);
        Some(ln_first.exp() / (1.0 - ln_ratio.exp()))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    ensure_finite("eps", eps)?;
    if eps <= 0.0 {
        return Err(Error::OutOfRange {
            what: "eps",
            detail: format!("must be > 0, got {eps}"),
        });
    }
    Ok(())
}

/// `(J, tail)` with `J` the smallest index whose certified tail is `<= eps`.
fn truncation(f: &F3Function, mp: &MixtureParams, eps: f64) -> Result<(usize, f64)> {
    check_eps(eps)?;
    let g = f.nonlinear_part();
    if g.is_affine() || mp.theta == 0.0 {
        return Ok((0, 0.0));
    }
    let env = TailEnvelope { f: &g, mp: *mp };
    for big_j in 0..MAX_TERMS {
        if let Some(tail) = env.tail_bound(big_j) {
            if tail <= eps {
                return Ok((big_j, tail));
            }
        }
    }
    Err(Error::TruncationBudget {
        eps,
        max_terms: MAX_TERMS,
    })
}

/// Smallest `J` such that the certified tail beyond term `J` is at most `eps`.
pub fn truncation_index(f: &F3Function, mp: &MixtureParams, eps: f64) -> Result<usize> {
    truncation(f, mp, eps).map(|(j, _)| j)
}

/// The `j`-th series term `P(Pi = j) * E g(component j)` for the nonlinear
/// part `g` of `f`.
pub fn series_term(f: &F3Function, mp: &MixtureParams, j: usize) -> Result<ExtendedReal> {
    let ln_w = mp.ln_poisson_weight(j);
    if ln_w == f64::NEG_INFINITY {
        return Ok(ExtendedReal::ZERO);
    }
    let e = f.nonlinear_part().expect_gaussian_affine(mp.component(j))?;
    Ok(match e {
        // log space: the weight alone may underflow while the product does not
        ExtendedReal::Finite(v) if v > 0.0 => ExtendedReal::from_f64((ln_w + v.ln()).exp()),
        ExtendedReal::Finite(v) => ExtendedReal::Finite(ln_w.exp() * v),
        ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
    })
}

/// Certified upper evaluation of the mixture expectation.
///
/// The affine part of `f` is integrated exactly (the mixture is centered);
/// the remaining nonnegative part is summed over `j = 0..=J` and the
/// certified tail (at most `eps`) is added and recorded as `error_budget`.
pub fn mixture_expectation(f: &F3Function, mp: &MixtureParams, eps: f64) -> Result<BoundResult> {
    let (big_j, tail) = truncation(f, mp, eps)?;
    let g = f.nonlinear_part();
    let mut value = ExtendedReal::Finite(f.affine_intercept());
    if !g.is_affine() {
        for j in 0..=big_j {
            value = value + series_term(&g, mp, j)?;
            if !value.is_finite() {
                break;
            }
        }
    }
    value = value + tail;
    let mut r = BoundResult::new(InequalityId::Mixture, value)
        .param("beta", mp.beta)
        .param("y", mp.y)
        .param("theta", mp.theta)
        .param("scale", mp.scale)
        .param("drift", mp.drift)
        .param("eps", eps)
        .param("truncation_index", big_j as f64);
    r.error_budget = tail;
    if mp.beta == 0.0 {
        r = r.note("beta = 0: bound evaluated by continuous extension");
    }
    Ok(r)
}

/// One row of [`convergence_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub y: f64,
    pub mixture: f64,
    pub theorem: f64,
    /// `mixture - theorem`
    pub gap: f64,
}

/// Mixture value against the limiting theorem bound along a grid of `y`.
pub fn convergence_profile(f: &F3Function, beta: f64, y_grid: &[f64]) -> Result<Vec<ConvergencePoint>> {
    if !f.third_derivative_at_infinity().is_finite() {
        return Err(Error::Precondition(
            "f''' is unbounded at infinity: the mixture has no finite limit to compare".into(),
        ));
    }
    let theorem = theorem_bound(f, &Constraints::new(beta)?)?.value.to_f64();
    y_grid
        .iter()
        .map(|&y| {
            let mp = MixtureParams::new(beta, y)?;
            let mixture = mixture_expectation(f, &mp, PROFILE_EPS)?.value.to_f64();
            Ok(ConvergencePoint {
                y,
                mixture,
                theorem,
                gap: mixture - theorem,
            })
        })
        .collect()
}
