//! Finitely generated frequency groups `Ξ = gr{ξ_1, …, ξ_n, 1/N} ⊂ R/Z`
//! and their duals.
//!
//! A group element is an exponent vector: `α ∈ Z^n` over the irrational
//! generators plus a residue `ρ ∈ Z_N` over the rational one. The group is
//! free over the irrational part, so elements are compared and stored by
//! their exponents, never by the real number they evaluate to. Characters
//! `τ : Ξ → T` are points of `T^n × Z_N^`; the distinguished family
//! `τ_m(ξ) = e^{2πimξ}` realizes integer shifts.
//!
//! Weights `β : Ξ → [1, ∞)` select the coefficient algebra. The crate
//! cares about two diagnostics: admissibility (submultiplicativity with
//! `β ≥ 1`) and the compatibility constant
//! `C_β = inf_{ξ≠0} β(ξ)·‖ξ‖_{R/Z}`, which controls the small divisors
//! `1/(1 − e^{2πiξ})` in every limit constant downstream.

use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

use crate::phase::{frac, frac_mul, torus_distance, unit_phase, unit_phase_mul};

/// Hard cap on exponent magnitude; additions beyond it are reported as
/// overflow rather than wrapped.
pub const ELEMENT_EXPONENT_CAP: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroupError {
    #[error("irrational generator {0} outside (0,1): {1}")]
    GeneratorOutOfRange(usize, String),
    #[error("modulus must be >= 1")]
    ZeroModulus,
    #[error("element has {got} exponents, group has {expect} generators")]
    ArityMismatch { got: usize, expect: usize },
    #[error("residue {rho} not reduced mod {modulus}")]
    ResidueOutOfRange { rho: u32, modulus: u32 },
    #[error("exponent overflow beyond cap {cap}")]
    ExponentOverflow { cap: i64 },
    #[error("zero denominator in rational list")]
    ZeroDenominator,
    #[error("unit vector length {got} does not match group arity {expect}")]
    CharacterArity { got: usize, expect: usize },
    #[error("character unit {0} has modulus {1}, expected 1")]
    CharacterNotUnimodular(usize, f64),
    #[error("rational-denominator weight needs a purely rational group (n = 0)")]
    WeightNeedsRationalGroup,
    #[error("weight exponent must be positive, got {0}")]
    NonPositiveWeightExponent(f64),
    #[error("compatibility search space too large: about 10^{0:.1} elements")]
    SearchSpaceTooLarge(f64),
}

/// The frequency group `gr{ξ_1, …, ξ_n, 1/N}`.
///
/// Generators are binary64 numbers treated as exact; rational inputs are
/// expected to be folded into the modulus `N` via [`canonicalize_rationals`]
/// before construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGroup {
    xi: Vec<f64>,
    modulus: u32,
}

impl FreqGroup {
    pub fn new(xi: Vec<f64>, modulus: u32) -> Result<Self, GroupError> {
        if modulus == 0 {
            return Err(GroupError::ZeroModulus);
        }
        for (i, &x) in xi.iter().enumerate() {
            if !(x > 0.0 && x < 1.0) || !x.is_finite() {
                return Err(GroupError::GeneratorOutOfRange(i, format!("{x}")));
            }
        }
        Ok(FreqGroup { xi, modulus })
    }

    /// The purely rational group `Z_N` (no irrational generators).
    pub fn cyclic(modulus: u32) -> Result<Self, GroupError> {
        Self::new(Vec::new(), modulus)
    }

    /// The trivial group `{0}`; hosts plain Laurent operators.
    pub fn trivial() -> Arc<Self> {
        Arc::new(Self::new(Vec::new(), 1).expect("trivial group is valid"))
    }

    pub fn generator_count(&self) -> usize {
        self.xi.len()
    }

    pub fn generators(&self) -> &[f64] {
        &self.xi
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement {
            alpha: vec![0; self.xi.len()],
            rho: 0,
        }
    }

    pub fn element(&self, alpha: Vec<i64>, rho: u32) -> Result<GroupElement, GroupError> {
        if alpha.len() != self.xi.len() {
            return Err(GroupError::ArityMismatch {
                got: alpha.len(),
                expect: self.xi.len(),
            });
        }
        if rho >= self.modulus {
            return Err(GroupError::ResidueOutOfRange {
                rho,
                modulus: self.modulus,
            });
        }
        if alpha.iter().any(|a| a.abs() > ELEMENT_EXPONENT_CAP) {
            return Err(GroupError::ExponentOverflow {
                cap: ELEMENT_EXPONENT_CAP,
            });
        }
        Ok(GroupElement { alpha, rho })
    }

    pub fn conforms(&self, g: &GroupElement) -> bool {
        g.alpha.len() == self.xi.len() && g.rho < self.modulus
    }

    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        debug_assert!(self.conforms(a) && self.conforms(b));
        let mut alpha = Vec::with_capacity(a.alpha.len());
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            let s = x
                .checked_add(*y)
                .ok_or(GroupError::ExponentOverflow {
                    cap: ELEMENT_EXPONENT_CAP,
                })?;
            if s.abs() > ELEMENT_EXPONENT_CAP {
                return Err(GroupError::ExponentOverflow {
                    cap: ELEMENT_EXPONENT_CAP,
                });
            }
            alpha.push(s);
        }
        let rho = (a.rho + b.rho) % self.modulus;
        Ok(GroupElement { alpha, rho })
    }

    pub fn neg(&self, g: &GroupElement) -> GroupElement {
        debug_assert!(self.conforms(g));
        GroupElement {
            alpha: g.alpha.iter().map(|a| -a).collect(),
            rho: if g.rho == 0 { 0 } else { self.modulus - g.rho },
        }
    }

    /// `k·g` with overflow checking.
    pub fn scale(&self, g: &GroupElement, k: i64) -> Result<GroupElement, GroupError> {
        debug_assert!(self.conforms(g));
        let mut alpha = Vec::with_capacity(g.alpha.len());
        for a in &g.alpha {
            let s = a.checked_mul(k).ok_or(GroupError::ExponentOverflow {
                cap: ELEMENT_EXPONENT_CAP,
            })?;
            if s.abs() > ELEMENT_EXPONENT_CAP {
                return Err(GroupError::ExponentOverflow {
                    cap: ELEMENT_EXPONENT_CAP,
                });
            }
            alpha.push(s);
        }
        let rho = (g.rho as i64 * k).rem_euclid(self.modulus as i64) as u32;
        Ok(GroupElement { alpha, rho })
    }

    /// The real number `ξ(g) = Σ α_i ξ_i + ρ/N mod 1` in `[0, 1)`.
    pub fn eval_frequency(&self, g: &GroupElement) -> f64 {
        debug_assert!(self.conforms(g));
        let mut acc = g.rho as f64 / self.modulus as f64;
        for (a, x) in g.alpha.iter().zip(&self.xi) {
            acc = frac(acc + frac_mul(*a, *x));
        }
        acc
    }

    /// The character `τ_m`, `τ_m(ξ) = e^{2πimξ}`; it encodes translation
    /// of a sequence by `m`.
    pub fn char_of_shift(&self, m: i64) -> Character {
        let u = self.xi.iter().map(|&x| unit_phase_mul(m, x)).collect();
        Character {
            u,
            c: m.rem_euclid(self.modulus as i64) as u32,
        }
    }

    pub fn trivial_char(&self) -> Character {
        Character {
            u: vec![Complex64::new(1.0, 0.0); self.xi.len()],
            c: 0,
        }
    }

    /// Builds a character from torus coordinates, checking unimodularity.
    pub fn character(&self, u: Vec<Complex64>, c: u32) -> Result<Character, GroupError> {
        if u.len() != self.xi.len() {
            return Err(GroupError::CharacterArity {
                got: u.len(),
                expect: self.xi.len(),
            });
        }
        for (i, z) in u.iter().enumerate() {
            if (z.norm() - 1.0).abs() > 1e-12 {
                return Err(GroupError::CharacterNotUnimodular(i, z.norm()));
            }
        }
        Ok(Character {
            u,
            c: c % self.modulus,
        })
    }

    /// Iterates every element with `max_i |α_i| ≤ cap` (all residues).
    /// The zero element is included.
    pub fn elements_box(&self, cap: i64) -> Result<Vec<GroupElement>, GroupError> {
        let n = self.xi.len();
        let width = (2 * cap + 1) as f64;
        let log_size = width.log10() * n as f64 + (self.modulus as f64).log10();
        if log_size > 7.5 {
            return Err(GroupError::SearchSpaceTooLarge(log_size));
        }
        let mut out = Vec::new();
        let mut alpha = vec![-cap; n];
        'outer: loop {
            for rho in 0..self.modulus {
                out.push(GroupElement {
                    alpha: alpha.clone(),
                    rho,
                });
            }
            if n == 0 {
                break;
            }
            let mut i = 0;
            loop {
                alpha[i] += 1;
                if alpha[i] <= cap {
                    break;
                }
                alpha[i] = -cap;
                i += 1;
                if i == n {
                    break 'outer;
                }
            }
        }
        Ok(out)
    }
}

/// An element of the frequency group, stored by exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement {
    alpha: Vec<i64>,
    rho: u32,
}

impl GroupElement {
    pub fn alpha(&self) -> &[i64] {
        &self.alpha
    }

    pub fn rho(&self) -> u32 {
        self.rho
    }

    pub fn is_zero(&self) -> bool {
        self.rho == 0 && self.alpha.iter().all(|&a| a == 0)
    }

    /// `max_i |α_i|`, the degree the power weight sees.
    pub fn sup_degree(&self) -> i64 {
        self.alpha.iter().map(|a| a.abs()).max().unwrap_or(0)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.alpha.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ";{})", self.rho)
    }
}

/// A character `τ ∈ Hom(Ξ, T)`: one unimodular number per irrational
/// generator plus a residue acting on the rational part.
#[derive(Debug, Clone, PartialEq)]
pub struct Character {
    u: Vec<Complex64>,
    c: u32,
}

impl Character {
    pub fn units(&self) -> &[Complex64] {
        &self.u
    }

    pub fn residue(&self) -> u32 {
        self.c
    }

    pub fn is_trivial(&self) -> bool {
        self.c == 0 && self.u.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() == 0.0)
    }

    /// `τ(g) = Π u_i^{α_i} · e^{2πi ρ c / N}`, evaluated through angles so
    /// the result is exactly unimodular.
    pub fn eval(&self, group: &FreqGroup, g: &GroupElement) -> Complex64 {
        debug_assert!(group.conforms(g));
        debug_assert_eq!(self.u.len(), group.generator_count());
        let mut angle = 0.0; // in turns, reduced as we go
        for (a, u) in g.alpha.iter().zip(&self.u) {
            let theta = u.im.atan2(u.re) / std::f64::consts::TAU;
            angle = frac(angle + frac_mul(*a, frac(theta)));
        }
        if group.modulus() > 1 {
            angle = frac(angle + frac_mul(g.rho as i64 * self.c as i64, 1.0 / group.modulus() as f64));
        }
        unit_phase(angle)
    }
}

pub use crate::phase::torus_distance as circle_distance;

/// Collapses a list of reduced fractions `p/q` into the single modulus
/// `N = lcm(q_1, …, q_m)`, so `gr{p_1/q_1, …}` = `gr{1/N}`. Fractions are
/// reduced defensively; an empty list yields the trivial modulus 1.
pub fn canonicalize_rationals(fracs: &[(i64, u64)]) -> Result<u64, GroupError> {
    let mut n: u64 = 1;
    for &(p, q) in fracs {
        if q == 0 {
            return Err(GroupError::ZeroDenominator);
        }
        let g = gcd(p.unsigned_abs(), q);
        let q_red = q / g;
        n = lcm(n, q_red);
    }
    Ok(n)
}

fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    if a == 0 {
        1
    } else {
        a
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Weight choices on the frequency group.
///
/// `Power(ω)` is `β(g) = (1 + max_i |α_i|)^ω`; the rational part never
/// enters, so on a purely rational group it degenerates to the constant
/// weight. `RationalDenominator` is `β(ρ/N) = den(ρ/N)` and only makes
/// sense when there are no irrational generators.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant,
    Power(f64),
    RationalDenominator,
}

impl WeightSpec {
    pub fn power(omega: f64) -> Result<Self, GroupError> {
        if omega <= 0.0 || omega.is_nan() {
            return Err(GroupError::NonPositiveWeightExponent(omega));
        }
        Ok(WeightSpec::Power(omega))
    }

    /// Checks this weight can live on `group` at all.
    pub fn validate(&self, group: &FreqGroup) -> Result<(), GroupError> {
        match self {
            WeightSpec::RationalDenominator if group.generator_count() > 0 => {
                Err(GroupError::WeightNeedsRationalGroup)
            }
            WeightSpec::Power(omega) if *omega <= 0.0 || omega.is_nan() => {
                Err(GroupError::NonPositiveWeightExponent(*omega))
            }
            _ => Ok(()),
        }
    }

    /// `β(g) ≥ 1`.
    pub fn value(&self, group: &FreqGroup, g: &GroupElement) -> Result<f64, GroupError> {
        self.validate(group)?;
        debug_assert!(group.conforms(g));
        Ok(match self {
            WeightSpec::Constant => 1.0,
            WeightSpec::Power(omega) => (1.0 + g.sup_degree() as f64).powf(*omega),
            WeightSpec::RationalDenominator => {
                if g.rho == 0 {
                    1.0
                } else {
                    let n = group.modulus() as u64;
                    (n / gcd(g.rho as u64, n)) as f64
                }
            }
        })
    }
}

/// Outcome of an admissibility scan over a finite box of the group.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub pass: bool,
    /// Worst violating pair `(g1, g2, β(g1+g2), β(g1)·β(g2))`, if any.
    pub witness: Option<(GroupElement, GroupElement, f64, f64)>,
}

/// Checks `1 ≤ β(g1+g2) ≤ β(g1)·β(g2)` for all pairs with exponents in
/// the box `max|α| ≤ cap`, for an arbitrary weight function.
pub fn admissibility_check_fn<F>(
    group: &FreqGroup,
    beta: F,
    cap: i64,
) -> Result<AdmissibilityReport, GroupError>
where
    F: Fn(&GroupElement) -> f64,
{
    let elems = group.elements_box(cap)?;
    let mut worst: Option<(GroupElement, GroupElement, f64, f64)> = None;
    let mut worst_excess = 0.0_f64;
    for g1 in &elems {
        for g2 in &elems {
            let sum = group.add(g1, g2)?;
            let lhs = beta(&sum);
            let rhs = beta(g1) * beta(g2);
            // Tolerate a hair of float noise in products of large powers.
            let tol = 1e-9 * rhs.abs().max(1.0);
            let excess = if lhs < 1.0 - tol {
                1.0 - lhs
            } else if lhs > rhs + tol {
                lhs - rhs
            } else {
                continue;
            };
            if excess > worst_excess {
                worst_excess = excess;
                worst = Some((g1.clone(), g2.clone(), lhs, rhs));
            }
        }
    }
    Ok(AdmissibilityReport {
        pass: worst.is_none(),
        witness: worst,
    })
}

/// [`admissibility_check_fn`] specialized to a [`WeightSpec`].
pub fn admissibility_check(
    group: &FreqGroup,
    weight: &WeightSpec,
    cap: i64,
) -> Result<AdmissibilityReport, GroupError> {
    weight.validate(group)?;
    admissibility_check_fn(
        group,
        |g| weight.value(group, g).expect("weight validated against group"),
        cap,
    )
}

/// Result of the compatibility search: the empirical constant
/// `min β(g)·‖ξ(g)‖` over nonzero elements with `max|α| ≤ q_cap`.
#[derive(Debug, Clone)]
pub struct CompatibilityAudit {
    pub q_cap: i64,
    pub c_est: f64,
    pub argmin: GroupElement,
}

/// Exhaustive scan for `C_β = inf β(ξ)·‖ξ‖` over the box `max|α| ≤ q_cap`.
///
/// The returned value is an upper bound for the true infimum; a value
/// pinned away from zero over a large box is evidence of compatibility,
/// never a proof. A value at machine zero (exact rational collision)
/// disqualifies the weight for the limit constants downstream.
pub fn compatibility_audit(
    group: &FreqGroup,
    weight: &WeightSpec,
    q_cap: i64,
) -> Result<CompatibilityAudit, GroupError> {
    weight.validate(group)?;
    let n = group.generator_count();
    let width = (2 * q_cap + 1) as f64;
    let log_size = width.log10() * n as f64 + (group.modulus() as f64).log10();
    if log_size > 9.5 {
        return Err(GroupError::SearchSpaceTooLarge(log_size));
    }
    let mut best = f64::INFINITY;
    let mut argmin = group.zero();
    let mut visit = |g: GroupElement| -> Result<(), GroupError> {
        if g.is_zero() {
            return Ok(());
        }
        let v = weight.value(group, &g)? * torus_distance(group.eval_frequency(&g));
        if v < best {
            best = v;
            argmin = g;
        }
        Ok(())
    };
    if n == 0 {
        for rho in 0..group.modulus() {
            visit(GroupElement {
                alpha: vec![],
                rho,
            })?;
        }
    } else if n == 1 {
        // Specialized walk: the general box materializer would refuse
        // large q_cap, but one dimension streams fine.
        for a in -q_cap..=q_cap {
            for rho in 0..group.modulus() {
                visit(GroupElement {
                    alpha: vec![a],
                    rho,
                })?;
            }
        }
    } else {
        for g in group.elements_box(q_cap)? {
            visit(g)?;
        }
    }
    Ok(CompatibilityAudit {
        q_cap,
        c_est: best,
        argmin,
    })
}

/// The sequence `β(k·g)^{1/k}`, `k = 1..=k_max`; a growth-rate profile
/// whose drift toward 1 is the Gelfand–Raikov–Shilov behaviour needed for
/// inverse-closedness.
pub fn grs_profile(
    group: &FreqGroup,
    weight: &WeightSpec,
    g: &GroupElement,
    k_max: i64,
) -> Result<Vec<f64>, GroupError> {
    weight.validate(group)?;
    let mut out = Vec::with_capacity(k_max.max(0) as usize);
    for k in 1..=k_max {
        let kg = group.scale(g, k)?;
        out.push(weight.value(group, &kg)?.powf(1.0 / k as f64));
    }
    Ok(out)
}
