//! Unit-circle phase arithmetic.
//!
//! Every quantity in this crate that oscillates does so through factors
//! `e^{2πi k ξ}` with integer `k` and a frequency `ξ ∈ [0,1)`. For window
//! sums and fractal subsequences `k` reaches 10^7 and beyond, where the
//! naive `(k as f64 * xi).fract()` loses up to eight digits: the rounding
//! error of the product is magnified by the reduction mod 1. The helpers
//! here keep the reduction accurate to a few ulp by recovering the exact
//! product error with a fused multiply-add (two-product), so the phase of
//! `e^{2πi k ξ}` stays trustworthy over the whole integer range we use.

use num_complex::Complex64;

/// Fractional part `{k·x}` in `[0, 1)`, accurate to a few ulp.
///
/// `x` is treated as an exact binary64 rational; the result is the true
/// `k·x mod 1` of that rational up to ~1e-16, independent of the size of
/// `k` (for `|k·x| < 2^52`).
pub fn frac_mul(k: i64, x: f64) -> f64 {
    let kf = k as f64;
    let p = kf * x;
    // FMA recovers the exact rounding error of the product: p + e = k·x.
    let e = kf.mul_add(x, -p);
    frac(p) + e
}

/// Fractional part of a sum of already-reduced pieces, wrapped to `[0, 1)`.
pub fn frac(t: f64) -> f64 {
    let mut f = t - t.floor();
    // t slightly below an integer can round f up to exactly 1.0.
    if f >= 1.0 {
        f -= 1.0;
    }
    if f < 0.0 {
        f += 1.0;
    }
    f
}

/// `e^{2πi t}`. Negative arguments conjugate exactly, so
/// `unit_phase(-t) == unit_phase(t).conj()` bit for bit.
///
/// The angle is folded into an octant-sized remainder around the nearest
/// quarter turn before `sin_cos` runs; the fold is exact in binary64, so
/// quarter-turn phases come out as exact ±1 / ±i and nothing is evaluated
/// at arguments where sin/cos carry the π rounding error.
pub fn unit_phase(t: f64) -> Complex64 {
    if t < 0.0 {
        return unit_phase(-t).conj();
    }
    let tr = frac(t);
    // Quarter-turn index and remainder; tr and q/4 share the 2^-2 grid, so
    // the subtraction is exact and |r| ≤ 1/8.
    let q = (4.0 * tr).round();
    let r = tr - q * 0.25;
    let (s, c) = (std::f64::consts::TAU * r).sin_cos();
    match (q as i64) & 3 {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    }
}

/// `e^{2πi k x}` with the two-product reduction.
pub fn unit_phase_mul(k: i64, x: f64) -> Complex64 {
    unit_phase(frac_mul(k, x))
}

/// Distance from `t` to the nearest integer (the metric `‖t‖` on R/Z).
pub fn torus_distance(t: f64) -> f64 {
    (t - t.round()).abs()
}
