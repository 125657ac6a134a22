//! Bracketed golden-section minimization of smooth scalar functions.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_EXPANSIONS: usize = 200;

/// A triple `lo < mid < hi` with `f(mid) <= min(f(lo), f(hi))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub mid: f64,
    pub hi: f64,
}

/// Walks downhill from `start` with geometrically growing steps until the
/// function turns back up on both sides.
pub fn bracket_minimum<F: Fn(f64) -> f64>(f: &F, start: f64, step: f64) -> Result<Bracket> {
    if !(start.is_finite() && step.is_finite() && step > 0.0) {
        return Err(Error::Bracket(format!("bad start {start} / step {step}")));
    }
    let mut a = start;
    let mut b = start + step;
    let mut fb = f(b);
    let fa = f(a);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        fb = fa;
    }
    let mut width = b - a;
    for _ in 0..MAX_EXPANSIONS {
        width *= 1.0 / INV_PHI;
        let c = b + width;
        let fc = f(c);
        if !fc.is_nan() && fc >= fb {
            let (lo, hi) = if a < c { (a, c) } else { (c, a) };
            return Ok(Bracket { lo, mid: b, hi });
        }
        a = b;
        b = c;
        fb = fc;
    }
    Err(Error::Bracket(format!(
        "objective still decreasing after {MAX_EXPANSIONS} expansions (last point {b})"
    )))
}

/// Golden-section search on `[lo, hi]` until the interval is shorter than
/// `tol`. Returns `(x_min, f_min)`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    golden_section_until(f, lo, hi, |lo, hi| hi - lo <= tol)
}

fn golden_section_until<F, S>(f: &F, mut lo: f64, mut hi: f64, done: S) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    S: Fn(f64, f64) -> bool,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // x1 >= x2 means the interval has collapsed to rounding level
    while !done(lo, hi) && x1 < x2 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes a coercive objective over `(0, inf)` by golden-section search in
/// `log a`, stopping once the bracket is narrower than `tol` in `a` itself.
/// Returns `(a_min, f_min)`.
pub fn minimize_positive<F: Fn(f64) -> f64>(f: F, start: f64, tol: f64) -> Result<(f64, f64)> {
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::Bracket(format!("start must be positive, got {start}")));
    }
    let g = |u: f64| f(u.exp());
    let br = bracket_minimum(&g, start.ln(), 0.1)?;
    let (u, v) = golden_section_until(&g, br.lo, br.hi, |lo, hi| hi.exp() - lo.exp() <= tol);
    Ok((u.exp(), v))
}
