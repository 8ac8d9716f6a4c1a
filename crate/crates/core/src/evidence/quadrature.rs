//! Adaptive Gauss-Kronrod quadrature and the quadrature route to the
//! dominance probability.
//!
//! `dominance_probability_quadrature` integrates the Beta density directly
//! and normalizes by integrating it over the whole unit interval, so it
//! shares no code with the continued-fraction path (not even log-gamma).

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (non-negative half); odd indices are
// the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Maximum number of subintervals before giving up.
pub const MAX_SEGMENTS: usize = 20_000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 15-point Gauss-Kronrod integration of `f` over `[lo, hi]`.
///
/// Bisects the subinterval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let first = gauss_kronrod_15(&f, lo, hi);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);
    loop {
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            // Re-sum to shed drift from the running totals.
            let exact_value: f64 = heap.iter().map(|s| s.value).sum();
            let exact_error: f64 = heap.iter().map(|s| s.error).sum();
            if exact_error <= abs_tol.max(rel_tol * exact_value.abs()) {
                return Ok(exact_value);
            }
            value = exact_value;
            error = exact_error;
        }
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Numerical(format!(
                "quadrature did not converge within {MAX_SEGMENTS} subintervals (error {error:e})"
            )));
        }
        let seg = heap.pop().expect("non-empty");
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            return Err(Error::Numerical("quadrature interval underflow".into()));
        }
        let left = gauss_kronrod_15(&f, seg.lo, mid);
        let right = gauss_kronrod_15(&f, mid, seg.hi);
        value += left.value + right.value - seg.value;
        error += left.error + right.error - seg.error;
        heap.push(left);
        heap.push(right);
    }
}

/// `∫_0^{1/2} t^{a-1} (1-t)^{b-1} dt`.
///
/// For `a < 1` the endpoint singularity is removed with `t = s^{1/a}`.
fn lower_half_beta_integral(a: f64, b: f64) -> Result<f64> {
    const REL_TOL: f64 = 1e-14;
    if a >= 1.0 {
        integrate(
            |t| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0),
            0.0,
            0.5,
            0.0,
            REL_TOL,
        )
    } else {
        let upper = 0.5f64.powf(a);
        let inv_a = 1.0 / a;
        let v = integrate(
            |s| (1.0 - s.powf(inv_a)).powf(b - 1.0),
            0.0,
            upper,
            0.0,
            REL_TOL,
        )?;
        Ok(v / a)
    }
}

/// `∫_{1/2}^1 t^{a-1}(1-t)^{b-1} dt / B(a, b)` by adaptive quadrature.
///
/// Independent check on `1 - I_{1/2}(a, b)`.
pub fn dominance_probability_quadrature(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!(
            "dominance quadrature needs a > 0 and b > 0, got a={a}, b={b}"
        )));
    }
    // Reflecting t -> 1 - t maps the upper half onto the lower half with (a, b) swapped.
    let lower = lower_half_beta_integral(a, b)?;
    let upper = lower_half_beta_integral(b, a)?;
    Ok(upper / (lower + upper))
}
