//! Kummer's confluent hypergeometric function 1F1(a; b; z).
//!
//! The safe t-test consumes this kernel with `a = -nu/2`, `b = 1/2`, `z <= 0`,
//! where every series term is non-negative, so the sum is cancellation-free
//! and only magnitude control is needed. Magnitudes are the real problem: at
//! `nu = 1e7` the value overflows f64 long before the series converges, which
//! is why the log-space form [`ln_hyp1f1`] is the production path and the
//! plain [`hyp1f1`] reports overflow explicitly instead of returning inf.
//!
//! Branch selection: for `z < 0, a > 0` the direct series alternates forever,
//! so Kummer's transformation `1F1(a; b; z) = e^z 1F1(b - a; b; -z)` rewrites
//! it into a sum whose terms eventually keep one sign. In the remaining mixed
//! case (`z > 0, a < 0`) the direct series alternates only for the first
//! `ceil(|a|)` terms, which is benign for the moderate `|a|` that case sees in
//! practice; precision degrades if such a call combines `|a| >> 20` with
//! large positive `z`, a regime no caller in this crate enters.

use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;
const MAX_TERMS: u64 = 20_000_000;

/// Value of `ln |1F1|` together with the sign of 1F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnHyp1f1 {
    pub ln_abs: f64,
    /// -1.0, 0.0, or 1.0.
    pub sign: f64,
}

impl LnHyp1f1 {
    fn one() -> Self {
        LnHyp1f1 { ln_abs: 0.0, sign: 1.0 }
    }
}

/// Signed log-space evaluation of 1F1(a; b; z).
pub fn ln_hyp1f1(a: f64, b: f64, z: f64) -> Result<LnHyp1f1> {
    if !a.is_finite() || !b.is_finite() || !z.is_finite() {
        return Err(Error::domain(format!(
            "hyp1f1 requires finite arguments, got a = {a}, b = {b}, z = {z}"
        )));
    }
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::domain(format!(
            "hyp1f1 has a pole at non-positive integer b, got b = {b}"
        )));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(LnHyp1f1::one());
    }
    if a == b {
        // 1F1(a; a; z) = e^z.
        return Ok(LnHyp1f1 { ln_abs: z, sign: 1.0 });
    }
    if z < 0.0 && a > 0.0 {
        // Direct terms would alternate indefinitely; transform first.
        let inner = series(b - a, b, -z)?;
        return Ok(LnHyp1f1 { ln_abs: inner.ln_abs + z, sign: inner.sign });
    }
    series(a, b, z)
}

/// Plain-value evaluation. Overflow of the finite result is an error; callers
/// that live in log space should use [`ln_hyp1f1`].
pub fn hyp1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    let v = ln_hyp1f1(a, b, z)?;
    if v.sign == 0.0 {
        return Ok(0.0);
    }
    if v.ln_abs > 709.0 {
        return Err(Error::Overflow(format!(
            "hyp1f1({a}, {b}, {z}) has ln |value| = {:.3}",
            v.ln_abs
        )));
    }
    Ok(v.sign * v.ln_abs.exp())
}

/// Power series with power-of-two rescaling. Terms are tracked in linear
/// space; scaling by 2^±1000 is exact, so the only rounding is the one
/// multiply-add per term.
fn series(a: f64, b: f64, z: f64) -> Result<LnHyp1f1> {
    // Non-positive integer `a` terminates the series at k = |a|.
    let terminating = a <= 0.0 && a.fract() == 0.0;
    let up = 2f64.powi(1000);
    let down = 2f64.powi(-1000);

    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut scale_ln = 0.0f64;
    let mut prev_abs = f64::INFINITY;
    let mut settled: u8 = 0;
    let mut k = 0u64;
    loop {
        let kf = k as f64;
        let num = a + kf;
        if terminating && num == 0.0 {
            break;
        }
        term *= num * z / ((b + kf) * (kf + 1.0));
        sum += term;
        k += 1;
        if !term.is_finite() || !sum.is_finite() {
            return Err(Error::NoConvergence(format!(
                "hyp1f1 series escaped f64 range at term {k} for a = {a}, b = {b}, z = {z}"
            )));
        }
        let ta = term.abs();
        if ta < prev_abs && ta <= sum.abs().max(f64::MIN_POSITIVE) * 1e-17 {
            settled += 1;
            if settled >= 3 {
                break;
            }
        } else {
            settled = 0;
        }
        prev_abs = ta;
        if k >= MAX_TERMS {
            return Err(Error::NoConvergence(format!(
                "hyp1f1 series exceeded {MAX_TERMS} terms for a = {a}, b = {b}, z = {z}"
            )));
        }
        let magnitude = sum.abs().max(ta);
        if magnitude > 1e270 {
            sum *= down;
            term *= down;
            prev_abs = term.abs();
            scale_ln += 1000.0 * LN_2;
        } else if magnitude > 0.0 && magnitude < 1e-270 {
            sum *= up;
            term *= up;
            prev_abs = term.abs();
            scale_ln -= 1000.0 * LN_2;
        }
    }
    if sum == 0.0 {
        return Ok(LnHyp1f1 { ln_abs: f64::NEG_INFINITY, sign: 0.0 });
    }
    Ok(LnHyp1f1 { ln_abs: sum.abs().ln() + scale_ln, sign: sum.signum() })
}
