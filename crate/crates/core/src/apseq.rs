//! Almost periodic sequences with finite frequency support.
//!
//! A sequence is a finite Fourier sum `a(k) = Σ_g c_g e^{2πik·ξ(g)}` over
//! elements of a frequency group. The central fact the crate is built on
//! is the closed form for window sums: because each summand is geometric,
//!
//! `Σ_{k=h1}^{h2-1} a(k) = (h2-h1)·M(a) + Σ_{g≠0} c_g (e^{2πih1ξ} - e^{2πih2ξ}) / (1 - e^{2πiξ})`
//!
//! holds exactly, where `M(a) = c_0` is the mean. Along window endpoints
//! whose phases converge (fractal sequences), the boundary terms converge
//! to the functional `F_a(τ) = Σ_{g≠0} c_g τ(g)/(1 - e^{2πiξ(g)})`, the
//! building block of every limit constant downstream.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::group::{Character, FreqGroup, GroupElement, GroupError, WeightSpec};
use crate::phase::{frac_mul, unit_phase, unit_phase_mul};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeqError {
    #[error("element {0} does not conform to the sequence's group")]
    ForeignElement(String),
    #[error("sequences live on different groups")]
    GroupMismatch,
    #[error("empty window: [{0}, {1})")]
    EmptyWindow(i64, i64),
    #[error("nonzero element {0} evaluates to an integer frequency; the geometric closed form divides by zero")]
    IntegerFrequency(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Non-negative sum with compensated (Kahan–Neumaier) accumulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Complex compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: Compensated,
    im: Compensated,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// A finitely supported Fourier sum over a frequency group.
#[derive(Debug, Clone, PartialEq)]
pub struct APSeq {
    group: Arc<FreqGroup>,
    coeffs: BTreeMap<GroupElement, Complex64>,
}

impl APSeq {
    pub fn zero(group: Arc<FreqGroup>) -> Self {
        APSeq {
            group,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(group: Arc<FreqGroup>, c: Complex64) -> Self {
        let mut s = Self::zero(group);
        if c != Complex64::new(0.0, 0.0) {
            let zero = s.group.zero();
            s.coeffs.insert(zero, c);
        }
        s
    }

    pub fn from_coeffs(
        group: Arc<FreqGroup>,
        coeffs: impl IntoIterator<Item = (GroupElement, Complex64)>,
    ) -> Result<Self, SeqError> {
        let mut map = BTreeMap::new();
        for (g, c) in coeffs {
            if !group.conforms(&g) {
                return Err(SeqError::ForeignElement(g.to_string()));
            }
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            *map.entry(g).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(APSeq { group, coeffs: map })
    }

    pub fn group(&self) -> &Arc<FreqGroup> {
        &self.group
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&GroupElement, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, g: &GroupElement) -> Complex64 {
        self.coeffs
            .get(g)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn add_term(&mut self, g: GroupElement, c: Complex64) -> Result<(), SeqError> {
        if !self.group.conforms(&g) {
            return Err(SeqError::ForeignElement(g.to_string()));
        }
        let new = self.coeff(&g) + c;
        if new == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&g);
        } else {
            self.coeffs.insert(g, new);
        }
        Ok(())
    }

    pub fn plus(&self, other: &APSeq) -> Result<APSeq, SeqError> {
        if self.group.as_ref() != other.group.as_ref() {
            return Err(SeqError::GroupMismatch);
        }
        let mut out = self.clone();
        for (g, c) in &other.coeffs {
            out.add_term(g.clone(), *c)?;
        }
        Ok(out)
    }

    /// Point evaluation `a(k) = Σ c_g e^{2πik ξ(g)}`.
    pub fn eval(&self, k: i64) -> Complex64 {
        let mut acc = ComplexSum::default();
        for (g, c) in &self.coeffs {
            let xi = self.group.eval_frequency(g);
            acc.add(c * unit_phase_mul(k, xi));
        }
        acc.value()
    }

    /// The mean `M(a)`: the coefficient of the zero frequency.
    pub fn mean(&self) -> Complex64 {
        self.coeff(&self.group.zero())
    }

    /// The translate `(U_m a)(k) = a(k - m)`; each coefficient picks up
    /// the phase `e^{-2πim ξ(g)}`.
    pub fn shift(&self, m: i64) -> APSeq {
        let mut coeffs = BTreeMap::new();
        for (g, c) in &self.coeffs {
            let xi = self.group.eval_frequency(g);
            coeffs.insert(g.clone(), c * unit_phase(-frac_mul(m, xi)));
        }
        APSeq {
            group: self.group.clone(),
            coeffs,
        }
    }

    /// Multiplies each coefficient by `τ(g)`; the limit of shifts along a
    /// sequence with character `τ`.
    pub fn apply_char(&self, tau: &Character) -> APSeq {
        let mut coeffs = BTreeMap::new();
        for (g, c) in &self.coeffs {
            coeffs.insert(g.clone(), c * tau.eval(&self.group, g));
        }
        APSeq {
            group: self.group.clone(),
            coeffs,
        }
    }

    /// Weighted coefficient norm `Σ β(g)·|c_g|`.
    pub fn weighted_norm(&self, weight: &WeightSpec) -> Result<f64, SeqError> {
        let mut acc = Compensated::default();
        for (g, c) in &self.coeffs {
            acc.add(weight.value(&self.group, g)? * c.norm());
        }
        Ok(acc.value())
    }

    /// Empirical Fourier coefficient at a raw frequency:
    /// `(1/K) Σ_{k<K} a(k) e^{-2πik x}`. Converges to the coefficient at
    /// `x` (if present in the support) at the geometric-sum rate.
    pub fn fourier_estimate(&self, x: f64, k_count: u64) -> Complex64 {
        let mut acc = ComplexSum::default();
        for k in 0..k_count as i64 {
            acc.add(self.eval(k) * unit_phase(-frac_mul(k, x)));
        }
        acc.value() / k_count as f64
    }

    /// Direct compensated window sum `Σ_{k=h1}^{h2-1} a(k)`.
    pub fn window_sum(&self, h1: i64, h2: i64) -> Result<Complex64, SeqError> {
        if h2 <= h1 {
            return Err(SeqError::EmptyWindow(h1, h2));
        }
        let mut acc = ComplexSum::default();
        for k in h1..h2 {
            acc.add(self.eval(k));
        }
        Ok(acc.value())
    }

    /// Geometric closed form of the same window sum; exact in exact
    /// arithmetic, O(support) instead of O(window).
    pub fn window_sum_closed(&self, h1: i64, h2: i64) -> Result<Complex64, SeqError> {
        if h2 <= h1 {
            return Err(SeqError::EmptyWindow(h1, h2));
        }
        let h = (h2 - h1) as f64;
        let mut acc = ComplexSum::default();
        acc.add(self.mean() * h);
        for (g, c) in &self.coeffs {
            if g.is_zero() {
                continue;
            }
            let xi = self.group.eval_frequency(g);
            let denom = Complex64::new(1.0, 0.0) - unit_phase(xi);
            if denom == Complex64::new(0.0, 0.0) {
                return Err(SeqError::IntegerFrequency(g.to_string()));
            }
            let num = unit_phase_mul(h1, xi) - unit_phase_mul(h2, xi);
            acc.add(c * num / denom);
        }
        Ok(acc.value())
    }

    /// The boundary functional `F_a(τ) = Σ_{g≠0} c_g τ(g)/(1 - e^{2πiξ(g)})`.
    pub fn boundary_functional(&self, tau: &Character) -> Result<Complex64, SeqError> {
        let mut acc = ComplexSum::default();
        for (g, c) in &self.coeffs {
            if g.is_zero() {
                continue;
            }
            let xi = self.group.eval_frequency(g);
            let denom = Complex64::new(1.0, 0.0) - unit_phase(xi);
            if denom == Complex64::new(0.0, 0.0) {
                return Err(SeqError::IntegerFrequency(g.to_string()));
            }
            acc.add(c * tau.eval(&self.group, g) / denom);
        }
        Ok(acc.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::frac;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    fn golden() -> Arc<FreqGroup> {
        Arc::new(FreqGroup::new(vec![GOLDEN], 1).unwrap())
    }

    fn mixed() -> Arc<FreqGroup> {
        Arc::new(FreqGroup::new(vec![GOLDEN], 3).unwrap())
    }

    fn sample_seq(group: &Arc<FreqGroup>) -> APSeq {
        let g1 = group.element(vec![1], 0).unwrap();
        let g2 = group.element(vec![-2], group.modulus().min(2) % group.modulus()).unwrap();
        APSeq::from_coeffs(
            group.clone(),
            [
                (group.zero(), Complex64::new(0.4, -0.1)),
                (g1, Complex64::new(0.7, 0.2)),
                (g2, Complex64::new(-0.3, 0.5)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn eval_single_frequency() {
        let group = golden();
        let e = group.element(vec![1], 0).unwrap();
        let a = APSeq::from_coeffs(group.clone(), [(e, Complex64::new(1.0, 0.0))]).unwrap();
        for k in [-3_i64, 0, 1, 5] {
            let expect = unit_phase(frac(k as f64 * GOLDEN));
            assert!((a.eval(k) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn mean_reads_zero_coefficient() {
        let a = sample_seq(&mixed());
        assert_eq!(a.mean(), Complex64::new(0.4, -0.1));
        let b = APSeq::zero(golden());
        assert_eq!(b.mean(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn shift_translates_pointwise() {
        let a = sample_seq(&mixed());
        for m in [-5_i64, 1, 17] {
            let s = a.shift(m);
            for k in [-2_i64, 0, 9] {
                assert!((s.eval(k) - a.eval(k - m)).norm() < 1e-12, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn shift_round_trip_is_machine_exact() {
        let a = sample_seq(&golden());
        let back = a.shift(11).shift(-11);
        for (g, c) in a.coeffs() {
            assert!((back.coeff(g) - c).norm() < 1e-15);
        }
    }

    #[test]
    fn window_sum_matches_closed_form() {
        let a = sample_seq(&mixed());
        for (h1, h2) in [(-7_i64, 5_i64), (0, 1), (3, 400), (-100, -50)] {
            let direct = a.window_sum(h1, h2).unwrap();
            let closed = a.window_sum_closed(h1, h2).unwrap();
            assert!(
                (direct - closed).norm() < 1e-10 * (1.0 + direct.norm()),
                "window [{h1},{h2}): {direct} vs {closed}"
            );
        }
    }

    #[test]
    fn window_sum_rejects_empty_windows() {
        let a = sample_seq(&golden());
        assert!(matches!(a.window_sum(3, 3), Err(SeqError::EmptyWindow(_, _))));
        assert!(matches!(
            a.window_sum_closed(5, 2),
            Err(SeqError::EmptyWindow(_, _))
        ));
    }

    #[test]
    fn closed_form_rejects_integer_frequencies() {
        // generator 0.5 with exponent 2 lands exactly on an integer.
        let group = Arc::new(FreqGroup::new(vec![0.5], 1).unwrap());
        let e = group.element(vec![2], 0).unwrap();
        let a = APSeq::from_coeffs(group, [(e, Complex64::new(1.0, 0.0))]).unwrap();
        assert!(matches!(
            a.window_sum_closed(0, 10),
            Err(SeqError::IntegerFrequency(_))
        ));
    }

    #[test]
    fn fourier_estimate_recovers_coefficient() {
        let group = golden();
        let a = sample_seq(&group);
        let e = group.element(vec![1], 0).unwrap();
        let est = a.fourier_estimate(group.eval_frequency(&e), 10_000);
        // Remainder is a geometric sum over the other two frequencies,
        // bounded by (1/K)·Σ 2|c|/|1-e^{2πi(ξ_g-x)}|.
        assert!((est - Complex64::new(0.7, 0.2)).norm() < 2e-4);
    }

    #[test]
    fn boundary_functional_under_trivial_char_matches_window_identity() {
        // With τ1 = τ_0 (h1 = 0 endpoint) and τ2 = τ_{h2}, the closed window
        // sum equals h·M + F(τ1) - F(τ2) exactly.
        let group = mixed();
        let a = sample_seq(&group);
        let h2 = 377;
        let lhs = a.window_sum_closed(0, h2).unwrap();
        let f1 = a.boundary_functional(&group.char_of_shift(0)).unwrap();
        let f2 = a.boundary_functional(&group.char_of_shift(h2)).unwrap();
        let rhs = a.mean() * h2 as f64 + f1 - f2;
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn apply_char_of_shift_equals_shift_by_minus_m() {
        // τ_m multiplies c_g by e^{2πimξ(g)}, i.e. the shift by -m.
        let group = mixed();
        let a = sample_seq(&group);
        let m = 13;
        let via_char = a.apply_char(&group.char_of_shift(m));
        let via_shift = a.shift(-m);
        for (g, c) in via_char.coeffs() {
            assert!((via_shift.coeff(g) - c).norm() < 1e-12);
        }
    }

    #[test]
    fn weighted_norm_sums_weights() {
        let group = golden();
        let a = sample_seq(&group);
        let w = WeightSpec::power(1.0).unwrap();
        // |0.4-0.1i|·1 + |0.7+0.2i|·2 + |-0.3+0.5i|·3
        let expect = (0.4f64.powi(2) + 0.01).sqrt()
            + 2.0 * (0.49f64 + 0.04).sqrt()
            + 3.0 * (0.09f64 + 0.25).sqrt();
        assert!((a.weighted_norm(&w).unwrap() - expect).abs() < 1e-12);
    }
}
