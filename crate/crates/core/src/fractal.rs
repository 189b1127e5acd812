//! Fractal integer sequences: construction from continued fractions,
//! extraction from arbitrary candidates, and verification.
//!
//! An increasing integer sequence `h` is called fractal for a frequency
//! group when `e^{2πi h(n) ξ}` converges for every `ξ` in the group; the
//! limits assemble into a character `τ`. Window endpoints steered along
//! fractal sequences make determinant and trace asymptotics converge even
//! though almost periodic diagonals never repeat.
//!
//! At desk scale fractality can only be certified over a finite tail, so
//! every [`FractalSeq`] carries a certificate: one phase diameter per
//! irrational generator plus one for the rational part, measured over the
//! last quarter of the sequence. Downstream reports quote it.
//!
//! Continued fraction denominators `q` of an irrational `ξ` satisfy
//! `‖q ξ‖ ≤ 1/q_next`, which makes them the canonical fractal raw
//! material. [`cf_denominators`] emits only denominators it can certify
//! against that inequality using exact phase arithmetic, so binary64
//! breakdown at deep levels truncates the list instead of corrupting it.

use num_complex::Complex64;
use std::sync::Arc;

use crate::group::{Character, FreqGroup, GroupError};
use crate::phase::{frac, frac_mul, torus_distance, unit_phase, unit_phase_mul};

/// Depth beyond which binary64 continued fractions are never trusted.
pub const CF_DEPTH_HORIZON: usize = 40;

/// Largest denominator for which `frac_mul` phase reduction is exact.
const CF_DENOMINATOR_CAP: i64 = 1 << 52;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FractalError {
    #[error("continued fraction input {0} outside (0,1)")]
    CfOutOfRange(f64),
    #[error("continued fraction depth {0} exceeds horizon {CF_DEPTH_HORIZON}")]
    CfDepthTooLarge(usize),
    #[error("sequence has {got} values, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("values must be non-decreasing")]
    NotSorted,
    #[error("certificate entries must be non-negative and finite")]
    BadCertificate,
    #[error("group has {0} irrational generators, expected 0 or 1")]
    WrongArity(usize),
    #[error("only {got} usable denominators congruent to the residue, need {want}")]
    InsufficientDenominators { want: usize, got: usize },
    #[error("arc width must be positive, got {0}")]
    DeltaOutOfRange(f64),
    #[error("only {survivors} candidates survived extraction, need at least 4")]
    ExtractTooSparse { survivors: usize },
    #[error("tail must contain at least 2 points, got {0}")]
    TailTooShort(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A finite non-decreasing integer sequence certified fractal over its
/// tail, with the estimated limit character.
///
/// The certificate holds one entry per irrational generator followed by
/// one entry for the rational generator `1/N`: each is the diameter of
/// the corresponding phase set over the last quarter of the values.
#[derive(Debug, Clone)]
pub struct FractalSeq {
    group: Arc<FreqGroup>,
    values: Vec<i64>,
    tau: Character,
    certificate: Vec<f64>,
}

impl FractalSeq {
    pub fn new(
        group: Arc<FreqGroup>,
        values: Vec<i64>,
        tau: Character,
        certificate: Vec<f64>,
    ) -> Result<Self, FractalError> {
        if values.len() < 4 {
            return Err(FractalError::TooShort {
                got: values.len(),
                need: 4,
            });
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(FractalError::NotSorted);
        }
        if certificate.len() != group.generator_count() + 1
            || certificate.iter().any(|c| !c.is_finite() || *c < 0.0)
        {
            return Err(FractalError::BadCertificate);
        }
        Ok(FractalSeq {
            group,
            values,
            tau,
            certificate,
        })
    }

    pub fn group(&self) -> &Arc<FreqGroup> {
        &self.group
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self) -> &Character {
        &self.tau
    }

    pub fn certificate(&self) -> &[f64] {
        &self.certificate
    }

    /// Largest certificate entry, the headline number for reports.
    pub fn certificate_max(&self) -> f64 {
        self.certificate.iter().copied().fold(0.0, f64::max)
    }
}

/// Denominators `q_1, q_2, …` of the continued fraction of `x`, at most
/// `m` of them. The list is shorter than `m` when the expansion ends
/// (rational `x`) or when a denominator can no longer be certified to
/// satisfy `‖q x‖ ≤ 1/q` in exact phase arithmetic; every returned
/// denominator passes that check.
pub fn cf_denominators(x: f64, m: usize) -> Result<Vec<i64>, FractalError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(FractalError::CfOutOfRange(x));
    }
    if m > CF_DEPTH_HORIZON {
        return Err(FractalError::CfDepthTooLarge(m));
    }
    let mut out = Vec::with_capacity(m);
    let mut q_prev: i64 = 0;
    let mut q: i64 = 1;
    let mut rem = x;
    for _ in 0..m {
        if rem <= 0.0 {
            break;
        }
        let inv = 1.0 / rem;
        if inv >= CF_DENOMINATOR_CAP as f64 {
            break;
        }
        let a = inv.floor() as i64;
        let q_next = match a.checked_mul(q).and_then(|aq| aq.checked_add(q_prev)) {
            Some(v) if v <= CF_DENOMINATOR_CAP => v,
            _ => break,
        };
        if torus_distance(frac_mul(q_next, x)) > 1.0 / q_next as f64 {
            break;
        }
        out.push(q_next);
        q_prev = q;
        q = q_next;
        rem = frac(inv);
    }
    Ok(out)
}

/// Fractal sequence `h(j) = k0 + q_{m_j}` from the continued fraction of
/// the group's single irrational generator, using the denominators
/// congruent to `c` modulo `N`, after discarding the first `skip` of
/// them. Deeper denominators converge faster, so `skip` trades sequence
/// reach against certificate size.
///
/// The limit character is exact: `u = [e^{2πi k0 ξ}]` because
/// `‖q ξ‖ → 0` along denominators, and residue `(k0 + c) mod N`.
pub fn fractal_from_cf_skipping(
    group: &Arc<FreqGroup>,
    c: u32,
    k0: i64,
    skip: usize,
    l: usize,
) -> Result<FractalSeq, FractalError> {
    let n_mod = group.modulus();
    if c >= n_mod {
        return Err(GroupError::ResidueOutOfRange {
            rho: c,
            modulus: n_mod,
        }
        .into());
    }
    match group.generator_count() {
        0 => {
            // Purely rational group: arithmetic progressions are already
            // fractal, so fall through to the explicit construction.
            let start = k0 + c as i64 + (skip as i64) * n_mod as i64;
            return arithmetic_from(group, start, l);
        }
        1 => {}
        n => return Err(FractalError::WrongArity(n)),
    }
    let xi = group.generators()[0];
    let denoms = cf_denominators(xi, CF_DEPTH_HORIZON)?;
    let chosen: Vec<i64> = denoms
        .into_iter()
        .filter(|q| q.rem_euclid(n_mod as i64) == c as i64)
        .skip(skip)
        .take(l)
        .collect();
    if chosen.len() < l.max(4) {
        return Err(FractalError::InsufficientDenominators {
            want: l.max(4),
            got: chosen.len(),
        });
    }
    let values: Vec<i64> = chosen.iter().map(|q| k0 + q).collect();
    let u = vec![unit_phase_mul(k0, xi)];
    let residue = (k0 + c as i64).rem_euclid(n_mod as i64) as u32;
    let tau = group.character(u, residue)?;
    let certificate = tail_certificate(group, &values);
    FractalSeq::new(group.clone(), values, tau, certificate)
}

/// [`fractal_from_cf_skipping`] with `skip = 0`: the first `l` congruent
/// denominators.
pub fn fractal_from_cf(
    group: &Arc<FreqGroup>,
    c: u32,
    k0: i64,
    l: usize,
) -> Result<FractalSeq, FractalError> {
    fractal_from_cf_skipping(group, c, k0, 0, l)
}

fn arithmetic_from(
    group: &Arc<FreqGroup>,
    k0: i64,
    l: usize,
) -> Result<FractalSeq, FractalError> {
    let n_mod = group.modulus() as i64;
    let values: Vec<i64> = (0..l as i64).map(|j| k0 + j * n_mod).collect();
    let residue = k0.rem_euclid(n_mod) as u32;
    let tau = group.character(vec![], residue)?;
    FractalSeq::new(group.clone(), values, tau, vec![0.0])
}

/// The arithmetic progression `h(j) = k0 + jN` on a purely rational
/// group: exactly fractal, certificate zero, `τ` the shift character of
/// `k0`.
pub fn arithmetic_fractal(
    group: &Arc<FreqGroup>,
    k0: i64,
    l: usize,
) -> Result<FractalSeq, FractalError> {
    if group.generator_count() != 0 {
        return Err(FractalError::WrongArity(group.generator_count()));
    }
    if l < 4 {
        return Err(FractalError::TooShort { got: l, need: 4 });
    }
    arithmetic_from(group, k0, l)
}

/// The constant sequence `h(j) = k0`, fractal on any group with
/// `τ = τ_{k0}` and zero certificate. Used as a fixed left endpoint.
pub fn constant_fractal(
    group: &Arc<FreqGroup>,
    k0: i64,
    l: usize,
) -> Result<FractalSeq, FractalError> {
    if l < 4 {
        return Err(FractalError::TooShort { got: l, need: 4 });
    }
    let tau = group.char_of_shift(k0);
    let certificate = vec![0.0; group.generator_count() + 1];
    FractalSeq::new(group.clone(), vec![k0; l], tau, certificate)
}

/// Phase of value `h` under the rational generator `1/N`, reduced through
/// the residue class first so equal residues give bit-identical phases.
fn rational_phase(h: i64, n_mod: u32) -> Complex64 {
    let r = h.rem_euclid(n_mod as i64) as f64;
    unit_phase(r / n_mod as f64)
}

/// Diameter (max pairwise distance) of a set of points on the unit circle.
fn diameter(points: &[Complex64]) -> f64 {
    let mut best = 0.0_f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

/// Per-generator phase diameters over the last quarter of `values`
/// (at least 2 points), irrational generators first, rational part last.
fn tail_certificate(group: &FreqGroup, values: &[i64]) -> Vec<f64> {
    let tail_len = (values.len() / 4).max(2).min(values.len());
    let tail = &values[values.len() - tail_len..];
    let mut cert = Vec::with_capacity(group.generator_count() + 1);
    for &xi in group.generators() {
        let phases: Vec<Complex64> = tail.iter().map(|&h| unit_phase_mul(h, xi)).collect();
        cert.push(diameter(&phases));
    }
    let rphases: Vec<Complex64> = tail
        .iter()
        .map(|&h| rational_phase(h, group.modulus()))
        .collect();
    cert.push(diameter(&rphases));
    cert
}

/// Outcome of [`verify_fractal`]: measured tail diameters, the character
/// estimated from the tail, and whether every diameter shrinks from the
/// first tail half to the second.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub certificate: Vec<f64>,
    pub tau: Character,
    pub shrinks: bool,
    /// Per generator: (first tail half diameter, second tail half diameter).
    pub halves: Vec<(f64, f64)>,
}

/// Measures fractality of `h` over its tail (`tail_fraction` of the
/// length, at least 2 points). The certificate lists phase diameters per
/// generator; `shrinks` is false as soon as one generator's diameter
/// fails to contract between the two tail halves, which is the desk-scale
/// signature of a non-converging phase.
pub fn verify_fractal(
    group: &Arc<FreqGroup>,
    h: &[i64],
    tail_fraction: f64,
) -> Result<VerifyReport, FractalError> {
    let tail_len = ((h.len() as f64 * tail_fraction).ceil() as usize)
        .max(2)
        .min(h.len());
    if h.len() < 2 {
        return Err(FractalError::TailTooShort(h.len()));
    }
    let tail = &h[h.len() - tail_len..];
    let mid = tail_len / 2;
    let mut certificate = Vec::new();
    let mut halves = Vec::new();
    let mut shrinks = true;
    let mut units = Vec::new();
    for &xi in group.generators() {
        let phases: Vec<Complex64> = tail.iter().map(|&v| unit_phase_mul(v, xi)).collect();
        let d_all = diameter(&phases);
        let d1 = diameter(&phases[..mid]);
        let d2 = diameter(&phases[mid..]);
        if d2 > 0.75 * d1 + 1e-9 {
            shrinks = false;
        }
        let mean: Complex64 = phases.iter().sum::<Complex64>() / phases.len() as f64;
        if mean.norm() < 1e-6 {
            // Phases spread around the circle; no meaningful limit.
            shrinks = false;
            units.push(Complex64::new(1.0, 0.0));
        } else {
            units.push(mean / mean.norm());
        }
        certificate.push(d_all);
        halves.push((d1, d2));
    }
    let n_mod = group.modulus();
    let rphases: Vec<Complex64> = tail.iter().map(|&v| rational_phase(v, n_mod)).collect();
    let d_all = diameter(&rphases);
    let d1 = diameter(&rphases[..mid]);
    let d2 = diameter(&rphases[mid..]);
    if d2 > 0.75 * d1 + 1e-9 {
        shrinks = false;
    }
    certificate.push(d_all);
    halves.push((d1, d2));
    let residue = h[h.len() - 1].rem_euclid(n_mod as i64) as u32;
    if tail
        .iter()
        .any(|&v| v.rem_euclid(n_mod as i64) as u32 != residue)
    {
        shrinks = false;
    }
    let tau = group.character(units, residue)?;
    Ok(VerifyReport {
        certificate,
        tau,
        shrinks,
        halves,
    })
}

/// Largest set of indices whose phases (in turns) fit inside a circular
/// arc of `width` turns; ties go to the leftmost arc. Returns indices
/// into `phases` in their original order.
fn largest_arc_cluster(phases: &[f64], width: f64) -> Vec<usize> {
    if width >= 1.0 {
        return (0..phases.len()).collect();
    }
    let mut order: Vec<usize> = (0..phases.len()).collect();
    order.sort_by(|&i, &j| phases[i].total_cmp(&phases[j]));
    let n = order.len();
    // Two-pointer over the circle, unrolled once past 1.0.
    let mut best_start = 0;
    let mut best_count = 0;
    let mut hi = 0;
    for lo in 0..n {
        if hi < lo {
            hi = lo;
        }
        while hi - lo < n {
            let theta = if hi < n {
                phases[order[hi]]
            } else {
                phases[order[hi - n]] + 1.0
            };
            if theta - phases[order[lo]] <= width {
                hi += 1;
            } else {
                break;
            }
        }
        let count = hi - lo;
        if count > best_count {
            best_count = count;
            best_start = lo;
        }
    }
    let mut keep: Vec<usize> = (best_start..best_start + best_count)
        .map(|i| order[i % n])
        .collect();
    keep.sort_unstable();
    keep
}

/// Desk-scale diagonal argument: for each irrational generator in turn,
/// keeps the largest cluster of candidates whose phases fit in an arc of
/// chord `delta`, halving `delta` per pass; a final pass keeps the
/// largest residue class mod `N`. The surviving subsequence is returned
/// with an empirical character (cluster centroids, normalized) and the
/// measured tail certificate.
pub fn extract_fractal(
    group: &Arc<FreqGroup>,
    candidate: &[i64],
    delta: f64,
) -> Result<FractalSeq, FractalError> {
    if candidate.len() < 16 {
        return Err(FractalError::TooShort {
            got: candidate.len(),
            need: 16,
        });
    }
    if delta <= 0.0 || !delta.is_finite() {
        return Err(FractalError::DeltaOutOfRange(delta));
    }
    if candidate.windows(2).any(|w| w[0] > w[1]) {
        return Err(FractalError::NotSorted);
    }
    let mut survivors: Vec<i64> = candidate.to_vec();
    let mut units = Vec::new();
    let mut chord = delta;
    for &xi in group.generators() {
        // Chord length -> arc width in turns.
        let width = if chord >= 2.0 {
            1.0
        } else {
            2.0 * (chord / 2.0).asin() / std::f64::consts::TAU
        };
        let phases: Vec<f64> = survivors.iter().map(|&h| frac_mul(h, xi)).collect();
        let keep = largest_arc_cluster(&phases, width);
        survivors = keep.iter().map(|&i| survivors[i]).collect();
        let centroid: Complex64 = keep
            .iter()
            .map(|&i| unit_phase(phases[i]))
            .sum::<Complex64>()
            / keep.len().max(1) as f64;
        units.push(if centroid.norm() < 1e-12 {
            Complex64::new(1.0, 0.0)
        } else {
            centroid / centroid.norm()
        });
        chord /= 2.0;
    }
    let n_mod = group.modulus();
    let residue = if n_mod > 1 {
        let mut counts = vec![0usize; n_mod as usize];
        for &h in &survivors {
            counts[h.rem_euclid(n_mod as i64) as usize] += 1;
        }
        let best = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(r, _)| r as u32)
            .unwrap_or(0);
        survivors.retain(|&h| h.rem_euclid(n_mod as i64) as u32 == best);
        best
    } else {
        0
    };
    if survivors.len() < 4 {
        return Err(FractalError::ExtractTooSparse {
            survivors: survivors.len(),
        });
    }
    let tau = group.character(units, residue)?;
    let certificate = tail_certificate(group, &survivors);
    FractalSeq::new(group.clone(), survivors, tau, certificate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    const SQRT2M1: f64 = 0.414_213_562_373_095_1;

    fn golden_group() -> Arc<FreqGroup> {
        Arc::new(FreqGroup::new(vec![GOLDEN], 1).unwrap())
    }

    #[test]
    fn cf_golden_gives_fibonacci() {
        let q = cf_denominators(GOLDEN, 8).unwrap();
        assert_eq!(q, vec![1, 2, 3, 5, 8, 13, 21, 34]);
    }

    #[test]
    fn cf_silver_gives_pell() {
        let q = cf_denominators(SQRT2M1, 5).unwrap();
        assert_eq!(q, vec![2, 5, 12, 29, 70]);
    }

    #[test]
    fn cf_rational_terminates() {
        assert_eq!(cf_denominators(1.0 / 3.0, 10).unwrap(), vec![3]);
        assert_eq!(cf_denominators(2.0 / 7.0, 10).unwrap(), vec![3, 7]);
    }

    #[test]
    fn cf_rejects_bad_input() {
        assert!(matches!(
            cf_denominators(1.5, 5),
            Err(FractalError::CfOutOfRange(_))
        ));
        assert!(matches!(
            cf_denominators(GOLDEN, 41),
            Err(FractalError::CfDepthTooLarge(41))
        ));
    }

    #[test]
    fn cf_deep_golden_denominators_stay_certified() {
        // Every emitted denominator satisfies ‖q ξ‖ ≤ 1/q by construction;
        // the golden ratio reaches at least depth 30 in binary64.
        let q = cf_denominators(GOLDEN, 40).unwrap();
        assert!(q.len() >= 30, "only {} levels", q.len());
        for &qi in &q {
            assert!(torus_distance(frac_mul(qi, GOLDEN)) <= 1.0 / qi as f64);
        }
        // The first 30 are exact Fibonacci numbers; beyond that the
        // certificate, not the recurrence, is the contract.
        let mut a = 1_i64;
        let mut b = 2_i64;
        for &qi in q.iter().take(30) {
            assert_eq!(qi, a);
            let next = a + b;
            a = b;
            b = next;
        }
    }

    #[test]
    fn from_cf_golden_basic() {
        let g = golden_group();
        let f = fractal_from_cf(&g, 0, 0, 8).unwrap();
        assert_eq!(f.values(), &[1, 2, 3, 5, 8, 13, 21, 34]);
        assert!(f.tau().is_trivial());
        // Tail diameter bounded by the CF tail bound 2π·Σ 1/q_next.
        let bound = std::f64::consts::TAU * (1.0 / 34.0 + 1.0 / 55.0);
        assert!(f.certificate()[0] <= bound, "{} > {bound}", f.certificate()[0]);
        assert_eq!(f.certificate()[1], 0.0);
    }

    #[test]
    fn from_cf_offset_shifts_character() {
        let g = golden_group();
        let f = fractal_from_cf(&g, 0, 3, 8).unwrap();
        assert_eq!(f.values()[0], 4);
        let expect = unit_phase_mul(3, GOLDEN);
        assert!((f.tau().units()[0] - expect).norm() < 1e-15);
    }

    #[test]
    fn from_cf_respects_residue_classes() {
        let g = Arc::new(FreqGroup::new(vec![GOLDEN], 2).unwrap());
        let f = fractal_from_cf(&g, 1, 0, 4).unwrap();
        // Odd Fibonacci denominators only.
        assert_eq!(f.values(), &[1, 3, 5, 13]);
        assert_eq!(f.tau().residue(), 1);
        for &v in f.values() {
            assert_eq!(v.rem_euclid(2), 1);
        }
    }

    #[test]
    fn from_cf_skipping_reaches_deeper_rungs() {
        let g = golden_group();
        let shallow = fractal_from_cf(&g, 0, 0, 6).unwrap();
        let deep = fractal_from_cf_skipping(&g, 0, 0, 10, 6).unwrap();
        assert!(deep.values()[0] > shallow.values()[5]);
        assert!(deep.certificate()[0] < shallow.certificate()[0] / 10.0);
    }

    #[test]
    fn from_cf_insufficient_denominators() {
        // Residue 3 mod 5 among Fibonacci numbers exists but thins out;
        // asking for many of them must fail loudly.
        let g = Arc::new(FreqGroup::new(vec![GOLDEN], 5).unwrap());
        let err = fractal_from_cf(&g, 3, 0, 30).unwrap_err();
        assert!(matches!(
            err,
            FractalError::InsufficientDenominators { want: 30, .. }
        ));
    }

    #[test]
    fn from_cf_rational_group_falls_back_to_arithmetic() {
        let g = Arc::new(FreqGroup::cyclic(3).unwrap());
        let f = fractal_from_cf(&g, 1, 0, 5).unwrap();
        assert_eq!(f.values(), &[1, 4, 7, 10, 13]);
        assert_eq!(f.tau().residue(), 1);
    }

    #[test]
    fn arithmetic_fractal_examples() {
        let g = Arc::new(FreqGroup::cyclic(3).unwrap());
        let f = arithmetic_fractal(&g, 1, 5).unwrap();
        assert_eq!(f.values(), &[1, 4, 7, 10, 13]);
        assert_eq!(f.tau().residue(), 1);
        assert_eq!(f.certificate(), &[0.0]);

        let trivial = FreqGroup::trivial();
        let f1 = arithmetic_fractal(&trivial, 0, 4).unwrap();
        assert_eq!(f1.values(), &[0, 1, 2, 3]);
        assert!(f1.tau().is_trivial());
    }

    #[test]
    fn constant_fractal_character_is_shift_character() {
        let g = golden_group();
        let f = constant_fractal(&g, 5, 4).unwrap();
        assert_eq!(f.values(), &[5, 5, 5, 5]);
        let expect = g.char_of_shift(5);
        assert!((f.tau().units()[0] - expect.units()[0]).norm() < 1e-15);
        assert_eq!(f.certificate(), &[0.0, 0.0]);
    }

    #[test]
    fn verify_flags_equidistributed_sequence() {
        let g = golden_group();
        let h: Vec<i64> = (1..=128).collect();
        let report = verify_fractal(&g, &h, 0.25).unwrap();
        assert!(!report.shrinks);
        assert!(report.certificate[0] > 1.5);
    }

    #[test]
    fn verify_accepts_fibonacci() {
        let g = golden_group();
        let f = fractal_from_cf(&g, 0, 0, 16).unwrap();
        let report = verify_fractal(&g, f.values(), 0.5).unwrap();
        assert!(report.shrinks);
        assert!(report.certificate[0] < 0.1);
        assert!((report.tau.units()[0] - Complex64::new(1.0, 0.0)).norm() < 0.05);
    }

    #[test]
    fn verify_trivial_group_is_vacuous() {
        let g = FreqGroup::trivial();
        let h: Vec<i64> = (0..32).map(|j| j * j + 1).collect();
        let report = verify_fractal(&g, &h, 0.25).unwrap();
        assert!(report.shrinks);
        assert_eq!(report.certificate, vec![0.0]);
    }

    #[test]
    fn extract_from_range_meets_delta() {
        let g = golden_group();
        let candidate: Vec<i64> = (1..=256).collect();
        let f = extract_fractal(&g, &candidate, 0.1).unwrap();
        assert!(f.len() >= 4);
        assert!(f.certificate()[0] <= 0.1 + 1e-12);
        // All survivor phases sit inside one arc of chord 0.1.
        let phases: Vec<Complex64> = f
            .values()
            .iter()
            .map(|&h| unit_phase_mul(h, GOLDEN))
            .collect();
        assert!(diameter(&phases) <= 0.1 + 1e-12);
    }

    #[test]
    fn extract_keeps_fibonacci_essentially_intact() {
        let g = golden_group();
        let candidate = cf_denominators(GOLDEN, 16).unwrap();
        let f = extract_fractal(&g, &candidate, 0.5).unwrap();
        assert!(f.len() >= 10, "only {} survived", f.len());
        for &v in &[89, 144, 233, 377, 610, 987] {
            assert!(f.values().contains(&v));
        }
    }

    #[test]
    fn extract_multiples_on_rational_group_survive_fully() {
        let g = Arc::new(FreqGroup::cyclic(3).unwrap());
        let candidate: Vec<i64> = (1..=16).map(|j| 3 * j).collect();
        let f = extract_fractal(&g, &candidate, 0.3).unwrap();
        assert_eq!(f.len(), 16);
        assert_eq!(f.tau().residue(), 0);
        assert_eq!(f.certificate(), &[0.0]);
    }

    #[test]
    fn extract_rejects_short_or_bad_input() {
        let g = golden_group();
        let short: Vec<i64> = (1..=10).collect();
        assert!(matches!(
            extract_fractal(&g, &short, 0.1),
            Err(FractalError::TooShort { got: 10, need: 16 })
        ));
        let unsorted: Vec<i64> = (1..=16).rev().collect();
        assert!(matches!(
            extract_fractal(&g, &unsorted, 0.1),
            Err(FractalError::NotSorted)
        ));
        let ok: Vec<i64> = (1..=16).collect();
        assert!(matches!(
            extract_fractal(&g, &ok, 0.0),
            Err(FractalError::DeltaOutOfRange(_))
        ));
    }

    #[test]
    fn fractal_seq_invariants() {
        let g = golden_group();
        let tau = g.trivial_char();
        assert!(matches!(
            FractalSeq::new(g.clone(), vec![1, 2, 3], tau.clone(), vec![0.0, 0.0]),
            Err(FractalError::TooShort { .. })
        ));
        assert!(matches!(
            FractalSeq::new(g.clone(), vec![3, 2, 4, 5], tau.clone(), vec![0.0, 0.0]),
            Err(FractalError::NotSorted)
        ));
        assert!(matches!(
            FractalSeq::new(g.clone(), vec![1, 2, 3, 4], tau.clone(), vec![0.0]),
            Err(FractalError::BadCertificate)
        ));
        assert!(FractalSeq::new(g, vec![1, 1, 2, 3], tau, vec![0.1, 0.0]).is_ok());
    }

    proptest! {
        #[test]
        fn extract_output_passes_verification(
            seed in 0u64..500,
            len in 16usize..120,
            delta in 0.05f64..1.5,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let mut candidate: Vec<i64> =
                (0..len).map(|_| rng.gen_range(0..1_000_000i64)).collect();
            candidate.sort_unstable();
            let g = golden_group();
            if let Ok(f) = extract_fractal(&g, &candidate, delta) {
                // Tail diameters can never exceed the advertised chord.
                let report = verify_fractal(&g, f.values(), 0.25).unwrap();
                prop_assert!(report.certificate[0] <= delta + 1e-9);
                prop_assert!(f.certificate()[0] <= delta + 1e-9);
            }
        }
    }
}
