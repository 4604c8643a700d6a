//! Scalar root finding and one-dimensional maximisation.

use crate::{Error, Result};

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops when `|f(mid)| < f_tol` or the bracket is narrower than `x_tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, f_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numeric(format!(
            "bisection bracket [{lo}, {hi}] does not straddle a root"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.abs() < f_tol || (hi - lo) < x_tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric("bisection did not converge".into()))
}

/// Golden-section search for the maximiser of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// 17 significant digits, enough to round-trip any `f64`. Non-finite values
/// print as `nan`, `inf` and `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}
