//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.
//!
//! Used as the general-purpose fallback for Gaussian expectations whose
//! integrand has no closed form, and as the independent reference the closed
//! forms are validated against.

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the embedded 7-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Sum of the per-panel |Kronrod - Gauss| differences.
    pub error: f64,
    pub evaluations: usize,
}

/// Tolerances for [`integrate`]. Convergence means
/// `error <= max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

impl Tolerance {
    pub fn relative(rel_tol: f64) -> Self {
        Tolerance {
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]`, bisecting the panel with the largest error
/// estimate until the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Integral> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::OutOfRange {
            what: "integration interval",
            detail: format!("[{lo}, {hi}] must be finite"),
        });
    }
    if lo == hi {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    if lo > hi {
        let r = integrate(f, hi, lo, tol)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }

    let mut panels = vec![kronrod_panel(&f, lo, hi)];
    let mut evaluations = 15;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: value,
                error,
            });
        }
        if error <= tol.abs_tol.max(tol.rel_tol * value.abs()) {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("at least one panel");
        let p = panels[worst];
        let mid = 0.5 * (p.lo + p.hi);
        // Panel no longer representable in floating point: accept what we have.
        if panels.len() >= tol.max_panels || mid <= p.lo || mid >= p.hi {
            if error <= 1e3 * tol.abs_tol.max(tol.rel_tol * value.abs()) + f64::MIN_POSITIVE {
                return Ok(Integral {
                    value,
                    error,
                    evaluations,
                });
            }
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: value,
                error,
            });
        }
        panels[worst] = kronrod_panel(&f, p.lo, mid);
        panels.push(kronrod_panel(&f, mid, p.hi));
        evaluations += 30;
    }
}
