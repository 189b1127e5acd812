//! Limit constants for determinants of growing finite sections.
//!
//! An operator given as A = e^{A₁}···e^{Aʳ}, with every Aⁱ a band operator
//! with almost periodic diagonals, has section determinants that grow like
//! Gʰ times a bounded oscillating factor.  The three limit objects are
//! evaluated here independently of any section data:
//!
//!   G      = exp(M(a)),   a = main diagonal of A₁ + ··· + Aʳ,
//!   Θ₁(τ)  = exp(F_a(τ)) · det( T(UᵗA) e^{−T(UᵗAʳ)} ··· e^{−T(UᵗA₁)} ),
//!   Θ₂(τ)  = exp(−F_a(τ)) · det( e^{T(UᵗA₁)} ··· e^{T(UᵗAʳ)} T(UᵗA⁻¹) ),
//!
//! where Uᵗ twists the diagonals by a character τ and T(·) is the Toeplitz
//! compression.  The operator determinants exist because each argument is a
//! trace class perturbation of the identity; numerically they are reached by
//! a truncation ladder that doubles the section size until two consecutive
//! determinants agree.  Every truncation evaluates the factor product on a
//! padded window and only then cuts back, so the entries of the product are
//! correct wherever the determinant reads them.
//!
//! Ratio flows put the constants to work: [`ratio_flow`] compares section
//! determinants of A over prescribed windows against Gʰ or against the
//! exact windowed trace, and [`uniform_sweep`] measures the residual
//! det/Gʰ − Θ₁(τ_{n₁})Θ₂(τ_{n₂}) over a grid of windows.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::apop::{APOperator, ErrorBudget, OpError};
use crate::apseq::{APSeq, SeqError};
use crate::fractal::FractalSeq;
use crate::group::{Character, FreqGroup, GroupError};
use crate::linalg::{self, DenseMatrix, LinalgError};

/// Compatibility estimates below this value count as machine zero.
pub const COMPAT_MACHINE_ZERO: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LimitsError {
    #[error("factorization needs at least one factor")]
    EmptyFactorization,
    #[error("factors live in different algebras (group, weight, or band exponents differ)")]
    MixedAlgebras,
    #[error("factorization defect {defect:.3e} exceeds the budgeted bound {bound:.3e}")]
    FactorizationDefect { defect: f64, bound: f64 },
    #[error("ladder exhausted at sizes {sizes:?} without convergence, deltas {deltas:?}, last value {last}")]
    LadderExhausted {
        sizes: Vec<usize>,
        deltas: Vec<f64>,
        last: Complex64,
    },
    #[error("compatibility estimate {c_est:.3e} is zero to machine precision, boundary sums are unreliable")]
    CompatibilityRefused { c_est: f64 },
    #[error("window [{h1}, {h2}) is empty or reversed")]
    WindowOrder { h1: i64, h2: i64 },
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// An operator held in exponentially factored form A = e^{A₁}···e^{Aʳ}.
///
/// The product and its inverse e^{−Aʳ}···e^{−A₁} are cached as operators in
/// the same algebra, and the main diagonals of the factors are summed into
/// the sequence `a` that feeds both the growth base and the boundary sums.
/// Construction measures the defect ‖A·A⁻¹ − I‖ and refuses factor lists
/// whose arithmetic drifted past the tolerance budget.
#[derive(Debug, Clone)]
pub struct ExpFactorization {
    factors: Vec<APOperator>,
    product: APOperator,
    inverse: APOperator,
    diag_sum: APSeq,
    tol: f64,
    defect: f64,
    budget_used: f64,
}

impl ExpFactorization {
    pub fn new(
        factors: Vec<APOperator>,
        tol: f64,
        mut budget: ErrorBudget,
    ) -> Result<Self, LimitsError> {
        let first = factors.first().ok_or(LimitsError::EmptyFactorization)?;
        let same_algebra = |op: &APOperator| {
            op.group().as_ref() == first.group().as_ref()
                && op.weight() == first.weight()
                && op.band_exponents() == first.band_exponents()
        };
        if !factors.iter().all(same_algebra) {
            return Err(LimitsError::MixedAlgebras);
        }
        let group = first.group().clone();
        let weight = first.weight().clone();
        let exps = first.band_exponents();
        let minus_one = Complex64::new(-1.0, 0.0);

        let mut product = APOperator::identity(group.clone(), weight.clone(), exps)?;
        for a in &factors {
            product = product.mul(&a.exp(tol, &mut budget)?, &mut budget)?;
        }
        let mut inverse = APOperator::identity(group.clone(), weight, exps)?;
        for a in factors.iter().rev() {
            inverse = inverse.mul(&a.scale(minus_one).exp(tol, &mut budget)?, &mut budget)?;
        }
        let mut diag_sum = APSeq::zero(group);
        for a in &factors {
            diag_sum = diag_sum.plus(&a.diagonal(0))?;
        }

        let defect = product
            .mul(&inverse, &mut budget)?
            .plus_scalar(minus_one)?
            .norm();
        let total_norm: f64 = factors.iter().map(APOperator::norm).sum();
        let bound =
            8.0 * factors.len() as f64 * tol * (2.0 * total_norm).exp()
                + 10.0 * budget.accumulated
                + 1e-13;
        if defect > bound {
            return Err(LimitsError::FactorizationDefect { defect, bound });
        }

        Ok(ExpFactorization {
            factors,
            product,
            inverse,
            diag_sum,
            tol,
            defect,
            budget_used: budget.accumulated,
        })
    }

    pub fn factors(&self) -> &[APOperator] {
        &self.factors
    }

    pub fn product(&self) -> &APOperator {
        &self.product
    }

    pub fn inverse(&self) -> &APOperator {
        &self.inverse
    }

    /// Main diagonal of A₁ + ··· + Aʳ, the sequence behind G and F_a.
    pub fn diag_sum(&self) -> &APSeq {
        &self.diag_sum
    }

    pub fn group(&self) -> &Arc<FreqGroup> {
        self.product.group()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Measured ‖A·A⁻¹ − I‖ in the weighted norm.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    /// Truncation mass discarded while building the cached products.
    pub fn budget_used(&self) -> f64 {
        self.budget_used
    }

    /// log G = M(a), the mean of the summed main diagonal.
    pub fn log_growth(&self) -> Complex64 {
        self.diag_sum.mean()
    }

    /// The growth base G = exp(M(a)).
    pub fn growth(&self) -> Complex64 {
        self.log_growth().exp()
    }
}

/// Outcome of one determinant truncation ladder.
#[derive(Debug, Clone)]
pub struct LadderResult {
    pub value: Complex64,
    pub truncation_sizes: Vec<usize>,
    pub deltas: Vec<f64>,
    pub converged: bool,
}

/// Gate for the small-denominator hazard in the boundary sums.
///
/// `Audited` carries the empirical compatibility constant from
/// [`crate::group::compatibility_audit`]; a value at machine zero means some
/// group element has frequency too close to an integer for F_a to be
/// trusted, and theta evaluation refuses to run unless forced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompatGuard {
    Unchecked,
    Audited { c_est: f64, force: bool },
}

#[derive(Debug, Clone)]
pub struct ThetaOptions {
    /// Absolute difference between consecutive rungs that counts as converged.
    pub tol: f64,
    /// First truncation size; each rung doubles it.
    pub start: usize,
    /// Largest truncation size attempted before giving up.
    pub cap: usize,
    pub compat: CompatGuard,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions {
            tol: 1e-6,
            start: 64,
            cap: 1024,
            compat: CompatGuard::Unchecked,
        }
    }
}

fn check_guard(opts: &ThetaOptions) -> Result<(), LimitsError> {
    if let CompatGuard::Audited { c_est, force } = opts.compat {
        if c_est < COMPAT_MACHINE_ZERO && !force {
            return Err(LimitsError::CompatibilityRefused { c_est });
        }
    }
    Ok(())
}

fn run_ladder(
    opts: &ThetaOptions,
    mut rung: impl FnMut(usize) -> Result<Complex64, LimitsError>,
) -> Result<LadderResult, LimitsError> {
    let mut sizes = Vec::new();
    let mut deltas = Vec::new();
    let mut prev: Option<Complex64> = None;
    let mut m = opts.start.max(2);
    loop {
        let value = rung(m)?;
        sizes.push(m);
        if let Some(p) = prev {
            let delta = (value - p).norm();
            deltas.push(delta);
            if delta < opts.tol {
                return Ok(LadderResult {
                    value,
                    truncation_sizes: sizes,
                    deltas,
                    converged: true,
                });
            }
        }
        prev = Some(value);
        if m >= opts.cap {
            return Err(LimitsError::LadderExhausted {
                sizes,
                deltas,
                last: value,
            });
        }
        m *= 2;
    }
}

/// One factor of a section product: a plain Toeplitz compression or the
/// matrix exponential of one.
enum SectionFactor<'a> {
    Plain(&'a APOperator),
    Exp(APOperator),
}

impl SectionFactor<'_> {
    fn bandwidth(&self) -> usize {
        match self {
            SectionFactor::Plain(op) => op.bandwidth().unsigned_abs() as usize,
            SectionFactor::Exp(op) => op.bandwidth().unsigned_abs() as usize,
        }
    }
}

/// det of the top-left m×m block of the factor product.
///
/// The factors are compressions of semi-infinite operators, so the product
/// is formed at the padded size 2m + pad and cut back to m only afterwards;
/// within the band-decay range of the exponentials this reproduces the
/// entries the infinite product has on the m-window.
fn section_determinant(
    chain: &[SectionFactor],
    m: usize,
    pad: usize,
) -> Result<Complex64, LimitsError> {
    let mp = 2 * m + pad;
    let mut acc: Option<DenseMatrix> = None;
    for factor in chain {
        let next = match factor {
            SectionFactor::Plain(op) => linalg::toeplitz_comp(op, mp)?,
            SectionFactor::Exp(op) => linalg::mat_exp(&linalg::toeplitz_comp(op, mp)?),
        };
        acc = Some(match acc {
            None => next,
            Some(p) => p.mul(&next)?,
        });
    }
    let product = acc.expect("section chain is never empty");
    Ok(linalg::lu_det(&product.top_left(m)?))
}

fn chain_padding(chain: &[SectionFactor]) -> usize {
    chain.iter().map(SectionFactor::bandwidth).max().unwrap_or(0)
}

/// Θ₁(τ) = exp(F_a(τ)) · det( T(UᵗA) e^{−T(UᵗAʳ)} ··· e^{−T(UᵗA₁)} ).
pub fn theta1(
    f: &ExpFactorization,
    tau: &Character,
    opts: &ThetaOptions,
) -> Result<LadderResult, LimitsError> {
    check_guard(opts)?;
    let prefactor = f.diag_sum().boundary_functional(tau)?.exp();
    let minus_one = Complex64::new(-1.0, 0.0);
    let lead = f.product().apply_char(tau);
    let mut chain = vec![SectionFactor::Plain(&lead)];
    for a in f.factors().iter().rev() {
        chain.push(SectionFactor::Exp(a.apply_char(tau).scale(minus_one)));
    }
    let pad = chain_padding(&chain);
    run_ladder(opts, |m| Ok(prefactor * section_determinant(&chain, m, pad)?))
}

/// Θ₂(τ) = exp(−F_a(τ)) · det( e^{T(UᵗA₁)} ··· e^{T(UᵗAʳ)} T(UᵗA⁻¹) ).
pub fn theta2(
    f: &ExpFactorization,
    tau: &Character,
    opts: &ThetaOptions,
) -> Result<LadderResult, LimitsError> {
    check_guard(opts)?;
    let prefactor = (-f.diag_sum().boundary_functional(tau)?).exp();
    let lead = f.inverse().apply_char(tau);
    let mut chain: Vec<SectionFactor> = f
        .factors()
        .iter()
        .map(|a| SectionFactor::Exp(a.apply_char(tau)))
        .collect();
    chain.push(SectionFactor::Plain(&lead));
    let pad = chain_padding(&chain);
    run_ladder(opts, |m| Ok(prefactor * section_determinant(&chain, m, pad)?))
}

/// Θ₂ through the reflected product.
///
/// Transposition is an involution on the algebra that reverses products and
/// maps compressions to compressions of the transposed operator, entry for
/// entry: Tₘ(Aᵀ) = Tₘ(A)ᵀ.  The determinant is blind to the reflection, so
///
///   det( e^{T(C₁)} ··· e^{T(Cʳ)} T(A⁻¹) )
///     = det( T((A⁻¹)ᵀ) e^{T(Cʳᵀ)} ··· e^{T(C₁ᵀ)} ),
///
/// and the right-hand side is a leading-compression chain like Θ₁'s.
/// Agreement with [`theta2`] exercises the transpose involution and both
/// multiplication orders end to end.
pub fn theta2_dual(
    f: &ExpFactorization,
    tau: &Character,
    opts: &ThetaOptions,
) -> Result<LadderResult, LimitsError> {
    check_guard(opts)?;
    let prefactor = (-f.diag_sum().boundary_functional(tau)?).exp();
    let lead = f.inverse().apply_char(tau).transpose();
    let mut chain = vec![SectionFactor::Plain(&lead)];
    for a in f.factors().iter().rev() {
        chain.push(SectionFactor::Exp(a.apply_char(tau).transpose()));
    }
    let pad = chain_padding(&chain);
    run_ladder(opts, |m| Ok(prefactor * section_determinant(&chain, m, pad)?))
}

/// Denominator choice for a determinant ratio.
///
/// `GrowthPower` divides by G^{h₂−h₁}; `ExpTrace` divides by the
/// exponential of the exact windowed trace of A₁ + ··· + Aʳ.  The two
/// differ per row by exp(window sum − h·M(a)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    GrowthPower,
    ExpTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFlag {
    Ok,
    /// The section determinant vanished; the ratio is reported as zero and
    /// no log-determinant exists.
    Singular,
}

/// One window of a determinant ratio flow.
#[derive(Debug, Clone)]
pub struct RatioRow {
    pub h1: i64,
    pub h2: i64,
    pub gap: i64,
    pub log_det: Option<Complex64>,
    pub log_norm: Complex64,
    pub ratio: Option<Complex64>,
    pub residual: Option<f64>,
    pub flag: RowFlag,
}

fn flow_row(
    f: &ExpFactorization,
    h1: i64,
    h2: i64,
    normalization: Normalization,
    expected: Option<Complex64>,
) -> Result<RatioRow, LimitsError> {
    flow_row_with_cap(f, h1, h2, normalization, expected, linalg::DEFAULT_SIZE_CAP)
}

/// One ratio-flow window with an explicit size cap on the materialized
/// section, for callers that manage their own window budget.
pub fn flow_row_with_cap(
    f: &ExpFactorization,
    h1: i64,
    h2: i64,
    normalization: Normalization,
    expected: Option<Complex64>,
    cap: usize,
) -> Result<RatioRow, LimitsError> {
    if h2 <= h1 {
        return Err(LimitsError::WindowOrder { h1, h2 });
    }
    let section = linalg::materialize_with_cap(f.product(), h1, h2, cap)?;
    let log_norm = match normalization {
        Normalization::GrowthPower => f.log_growth() * (h2 - h1) as f64,
        Normalization::ExpTrace => f.diag_sum().window_sum_closed(h1, h2)?,
    };
    let (log_det, ratio, flag) = match linalg::lu_logdet(&section) {
        Some(ld) => (Some(ld), (ld - log_norm).exp(), RowFlag::Ok),
        None => (None, Complex64::new(0.0, 0.0), RowFlag::Singular),
    };
    let residual = expected.map(|e| (ratio - e).norm());
    Ok(RatioRow {
        h1,
        h2,
        gap: h2 - h1,
        log_det,
        log_norm,
        ratio: Some(ratio),
        residual,
        flag,
    })
}

/// Section determinants of A over the given windows, each divided by the
/// chosen normalization.  Determinants run in log space so that windows far
/// beyond the overflow point of Gʰ still produce finite ratios; an exactly
/// singular section becomes a [`RowFlag::Singular`] row with ratio zero
/// rather than an error.  When `expected` is supplied (the Θ₁Θ₂ product for
/// the windows' limit characters), each row reports |ratio − expected|.
pub fn ratio_flow(
    f: &ExpFactorization,
    windows: &[(i64, i64)],
    normalization: Normalization,
    expected: Option<Complex64>,
) -> Result<Vec<RatioRow>, LimitsError> {
    windows
        .iter()
        .map(|&(h1, h2)| flow_row(f, h1, h2, normalization, expected))
        .collect()
}

/// Pairs two window-edge sequences into ratio-flow windows.
pub fn paired_windows(
    lower: &FractalSeq,
    upper: &FractalSeq,
) -> Result<Vec<(i64, i64)>, LimitsError> {
    lower
        .values()
        .iter()
        .zip(upper.values())
        .map(|(&h1, &h2)| {
            if h2 <= h1 {
                Err(LimitsError::WindowOrder { h1, h2 })
            } else {
                Ok((h1, h2))
            }
        })
        .collect()
}

/// Residual table for one gap of a uniform sweep.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub gap: i64,
    pub max_residual: f64,
    pub rows: Vec<RatioRow>,
}

type CharKey = (u32, Vec<(u64, u64)>);

fn char_key(tau: &Character) -> CharKey {
    (
        tau.residue(),
        tau.units()
            .iter()
            .map(|u| (u.re.to_bits(), u.im.to_bits()))
            .collect(),
    )
}

/// det(P_{n₁,n₂} A P_{n₁,n₂}) / G^{n₂−n₁} against Θ₁(τ_{n₁})·Θ₂(τ_{n₂})
/// over every (gap, offset) pair, with windows [n₁, n₂) = [offset, offset+gap).
///
/// The shift characters are computed exactly per edge, never estimated from
/// a window sequence, and theta ladders are shared between rows whose edges
/// land on the same character.
pub fn uniform_sweep(
    f: &ExpFactorization,
    gaps: &[i64],
    offsets: &[i64],
    opts: &ThetaOptions,
) -> Result<Vec<GapReport>, LimitsError> {
    let group = f.group().clone();
    let mut theta1_cache: HashMap<CharKey, Complex64> = HashMap::new();
    let mut theta2_cache: HashMap<CharKey, Complex64> = HashMap::new();
    let mut reports = Vec::with_capacity(gaps.len());
    for &gap in gaps {
        let mut rows = Vec::with_capacity(offsets.len());
        let mut max_residual = 0.0f64;
        for &n1 in offsets {
            let n2 = n1 + gap;
            let tau1 = group.char_of_shift(n1);
            let tau2 = group.char_of_shift(n2);
            let t1 = match theta1_cache.get(&char_key(&tau1)) {
                Some(&v) => v,
                None => {
                    let v = theta1(f, &tau1, opts)?.value;
                    theta1_cache.insert(char_key(&tau1), v);
                    v
                }
            };
            let t2 = match theta2_cache.get(&char_key(&tau2)) {
                Some(&v) => v,
                None => {
                    let v = theta2(f, &tau2, opts)?.value;
                    theta2_cache.insert(char_key(&tau2), v);
                    v
                }
            };
            let row = flow_row(f, n1, n2, Normalization::GrowthPower, Some(t1 * t2))?;
            if let Some(r) = row.residual {
                max_residual = max_residual.max(r);
            }
            rows.push(row);
        }
        reports.push(GapReport {
            gap,
            max_residual,
            rows,
        });
    }
    Ok(reports)
}
