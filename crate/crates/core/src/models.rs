//! Concrete operator families: block Laurent operators from matrix symbols
//! and the shifted almost Mathieu operator.
//!
//! A matrix symbol a(t) = Σ aₖ tᵏ with N×N coefficient blocks describes a
//! block Laurent operator L(a) = (a_{j−k}).  Written entry by entry over Z
//! it becomes a band operator whose diagonals are N-periodic, hence almost
//! periodic over the cyclic frequency group Z_N; [`block_to_apop`] performs
//! that identification exactly through length-N discrete Fourier transforms
//! of the diagonals.  The circle-integral quantities attached to a symbol
//! (winding number of det a, the growth constant G) are evaluated by
//! phase-unwrapped quadrature with sample doubling, and scalar symbols with
//! winding zero are lifted to exponential factorizations through the
//! Fourier series of their continuous logarithm.
//!
//! The almost Mathieu family a(n) = β·cos(2π(ξn + δ)) rides on the rank-one
//! group gr{ξ}; for |λ| bigger than the operator norm, M − λI factors as
//! e^{log(−λ)I}·e^{Log(I − M/λ)} with a convergent logarithm series.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::apop::{APOperator, ErrorBudget, OpError, DEFAULT_BAND_EXPONENTS};
use crate::group::{FreqGroup, GroupError, WeightSpec};
use crate::limits::{ExpFactorization, LimitsError};
use crate::linalg::{lu_det, DenseMatrix, LinalgError};
use crate::phase::{frac_mul, unit_phase};

/// Determinant magnitudes on the circle below this bound disqualify a
/// symbol from winding and growth computations.
pub const CIRCLE_DET_FLOOR: f64 = 1e-10;

/// Starting sample count for circle quadrature; doubled until stable.
pub const DEFAULT_CIRCLE_SAMPLES: usize = 4096;

const MAX_CIRCLE_SAMPLES: usize = 1 << 17;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("block size must be at least 1")]
    BlockSizeZero,
    #[error("coefficient block at k={k} is {got}×{got}, symbol is {want}×{want}")]
    BlockShapeMismatch { k: i64, got: usize, want: usize },
    #[error("evaluation point has |t| = {0}, not on the unit circle")]
    OffCircle(f64),
    #[error("det a(t) reaches {min_abs:.3e} on the circle, below the {floor:.1e} floor")]
    NearSingularSymbol { min_abs: f64, floor: f64 },
    #[error("winding number did not stabilize under sample doubling (last {0} at {1} samples)")]
    UnstableWinding(i64, usize),
    #[error("circle quadrature did not stabilize under sample doubling (last delta {0:.3e})")]
    UnstableQuadrature(f64),
    #[error("symbol has winding number {0}, need 0")]
    NonzeroWinding(i64),
    #[error("operation needs a scalar symbol, block size is {0}")]
    ScalarOnly(usize),
    #[error("operator norm {norm} is not below the shift modulus {modulus}")]
    NormExceedsShift { norm: f64, modulus: f64 },
    #[error("factorization product misses the shifted operator by {defect:.3e}, bound {bound:.3e}")]
    FactorizationDrift { defect: f64, bound: f64 },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Limits(#[from] LimitsError),
}

/// A matrix-valued trigonometric polynomial a(t) = Σ aₖ tᵏ.
#[derive(Debug, Clone)]
pub struct MatrixSymbol {
    block_size: usize,
    fourier: BTreeMap<i64, DenseMatrix>,
}

impl MatrixSymbol {
    pub fn new(
        block_size: usize,
        fourier: impl IntoIterator<Item = (i64, DenseMatrix)>,
    ) -> Result<Self, ModelError> {
        if block_size == 0 {
            return Err(ModelError::BlockSizeZero);
        }
        let mut map = BTreeMap::new();
        for (k, block) in fourier {
            if block.dim() != block_size {
                return Err(ModelError::BlockShapeMismatch {
                    k,
                    got: block.dim(),
                    want: block_size,
                });
            }
            map.insert(k, block);
        }
        Ok(MatrixSymbol {
            block_size,
            fourier: map,
        })
    }

    /// Scalar symbol from plain Fourier coefficients.
    pub fn scalar(coeffs: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        let fourier = coeffs.into_iter().map(|(k, v)| {
            let mut block = DenseMatrix::zero(1);
            block.set(0, 0, v);
            (k, block)
        });
        MatrixSymbol::new(1, fourier).expect("1×1 blocks always conform")
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn fourier(&self) -> impl Iterator<Item = (&i64, &DenseMatrix)> {
        self.fourier.iter()
    }

    /// Largest |k| carrying a coefficient block.
    pub fn band_limit(&self) -> i64 {
        self.fourier
            .keys()
            .map(|k| k.abs())
            .max()
            .unwrap_or(0)
    }
}

/// a(t) = Σ aₖ tᵏ for t on the unit circle.
pub fn symbol_eval(a: &MatrixSymbol, t: Complex64) -> Result<DenseMatrix, ModelError> {
    let r = t.norm();
    if (r - 1.0).abs() > 1e-12 {
        return Err(ModelError::OffCircle(r));
    }
    let mut acc = DenseMatrix::zero(a.block_size);
    for (&k, block) in &a.fourier {
        let tk = t.powi(k as i32);
        acc = acc.plus(&block.scale(tk)).expect("blocks share the symbol size");
    }
    Ok(acc)
}

/// det a at the n-th roots of unity with the argument tracked continuously.
///
/// Returns the unwrapped logs log det a(e^{2πij/n}) and the total argument
/// increment around the circle (2π times the winding number).
fn unwrapped_circle_logs(
    a: &MatrixSymbol,
    samples: usize,
) -> Result<(Vec<Complex64>, f64), ModelError> {
    let mut logs = Vec::with_capacity(samples);
    let mut theta = 0.0f64;
    let mut first_arg = 0.0f64;
    let mut prev_arg = 0.0f64;
    for j in 0..samples {
        let t = unit_phase(j as f64 / samples as f64);
        let det = lu_det(&symbol_eval(a, t)?);
        let abs = det.norm();
        if abs <= CIRCLE_DET_FLOOR {
            return Err(ModelError::NearSingularSymbol {
                min_abs: abs,
                floor: CIRCLE_DET_FLOOR,
            });
        }
        let arg = det.arg();
        if j == 0 {
            first_arg = arg;
            theta = arg;
        } else {
            theta += wrap_to_half_turn(arg - prev_arg);
        }
        prev_arg = arg;
        logs.push(Complex64::new(abs.ln(), theta));
    }
    let total = theta + wrap_to_half_turn(first_arg - prev_arg) - first_arg;
    Ok((logs, total))
}

fn wrap_to_half_turn(d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = d % TAU;
    if w > PI {
        w -= TAU;
    }
    if w < -PI {
        w += TAU;
    }
    w
}

/// Winding number of det a around the origin, from `samples` circle points
/// doubled until two consecutive grids agree.
pub fn winding_number(a: &MatrixSymbol, samples: usize) -> Result<i64, ModelError> {
    let mut n = samples.max(16);
    let mut prev: Option<i64> = None;
    while n <= MAX_CIRCLE_SAMPLES {
        let (_, total) = unwrapped_circle_logs(a, n)?;
        let w = (total / std::f64::consts::TAU).round() as i64;
        if prev == Some(w) {
            return Ok(w);
        }
        prev = Some(w);
        n *= 2;
    }
    Err(ModelError::UnstableWinding(
        prev.unwrap_or(0),
        MAX_CIRCLE_SAMPLES,
    ))
}

/// log G = (1/2πN)∮ log det a, with the log tracked continuously around
/// the circle.  Requires winding number zero, otherwise no branch closes.
pub fn symbol_log_growth(a: &MatrixSymbol, samples: usize) -> Result<Complex64, ModelError> {
    let w = winding_number(a, samples)?;
    if w != 0 {
        return Err(ModelError::NonzeroWinding(w));
    }
    let mut n = samples.max(16);
    let mut prev: Option<Complex64> = None;
    while n <= MAX_CIRCLE_SAMPLES {
        let (logs, _) = unwrapped_circle_logs(a, n)?;
        let mean = logs.iter().sum::<Complex64>() / n as f64;
        let value = mean / a.block_size as f64;
        if let Some(p) = prev {
            if (value - p).norm() < 1e-12 * (1.0 + value.norm()) {
                return Ok(value);
            }
        }
        prev = Some(value);
        n *= 2;
    }
    Err(ModelError::UnstableQuadrature(
        prev.map_or(f64::NAN, |p| p.norm()),
    ))
}

/// The growth constant G = exp((1/2πN)∮ log det a).
pub fn symbol_growth(a: &MatrixSymbol, samples: usize) -> Result<Complex64, ModelError> {
    Ok(symbol_log_growth(a, samples)?.exp())
}

/// Exponential factorization of a scalar winding-zero symbol.
///
/// The continuous logarithm b = log a is sampled on the circle, its Fourier
/// coefficients are kept for |k| ≤ k_max, and the single-factor
/// factorization [L(b)] is returned together with the reconstruction
/// residual max_t |e^{b(t)} − a(t)| on the sample grid.  The residual is
/// reported, not judged: it belongs to the caller's error budget.
pub fn scalar_log_factorize(
    a: &MatrixSymbol,
    k_max: usize,
    tol: f64,
    budget: ErrorBudget,
) -> Result<(ExpFactorization, f64), ModelError> {
    if a.block_size != 1 {
        return Err(ModelError::ScalarOnly(a.block_size));
    }
    let w = winding_number(a, DEFAULT_CIRCLE_SAMPLES)?;
    if w != 0 {
        return Err(ModelError::NonzeroWinding(w));
    }
    // Power-of-two grid keeps the DFT phases on exact dyadic fractions and
    // leaves the coefficients alias-free up to k_max.
    let n = DEFAULT_CIRCLE_SAMPLES
        .max((8 * k_max).next_power_of_two());
    let (logs, _) = unwrapped_circle_logs(a, n)?;
    let inv = 1.0 / n as f64;
    let group = FreqGroup::trivial();
    let zero = group.zero();
    let mut terms = Vec::with_capacity(2 * k_max + 1);
    let mut coeffs = Vec::with_capacity(2 * k_max + 1);
    for k in -(k_max as i64)..=(k_max as i64) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, lg) in logs.iter().enumerate() {
            acc += lg * unit_phase(frac_mul(-(j as i64) * k, inv));
        }
        let bk = acc * inv;
        coeffs.push((k, bk));
        terms.push((k, zero.clone(), bk));
    }
    let op = APOperator::from_terms(
        group,
        WeightSpec::power(1.0)?,
        DEFAULT_BAND_EXPONENTS,
        terms,
    )?;
    let fact = ExpFactorization::new(vec![op], tol, budget)?;

    let mut residual = 0.0f64;
    for j in 0..n {
        let t = unit_phase(j as f64 * inv);
        let b = coeffs
            .iter()
            .map(|&(k, bk)| bk * t.powi(k as i32))
            .sum::<Complex64>();
        let aval = symbol_eval(a, t)?.get(0, 0);
        residual = residual.max((b.exp() - aval).norm());
    }
    Ok((fact, residual))
}

/// The band operator over Z_N whose matrix is the block Laurent matrix of
/// the symbol: entry (j, k) equals (a_{(j−k−s+t')/N})_{s,t'} for j = NJ+s,
/// k = NK+t'.  Each scalar offset contributes an N-periodic diagonal whose
/// exact length-N Fourier transform lands on the frequencies ρ/N.
pub fn block_to_apop(a: &MatrixSymbol) -> Result<APOperator, ModelError> {
    let n = a.block_size;
    let group = Arc::new(FreqGroup::cyclic(n as u32)?);
    // Coefficient of e^{2πijρ/N} on scalar offset d, accumulated entry by
    // entry: the block value at (s, t') rides the residue-s indicator, whose
    // DFT spreads it over all ρ with weight e^{−2πisρ/N}/N.
    let mut coeffs: BTreeMap<(i64, u32), Complex64> = BTreeMap::new();
    let mut scale = 0.0f64;
    let inv = 1.0 / n as f64;
    for (&m, block) in &a.fourier {
        for s in 0..n {
            for tp in 0..n {
                let v = block.get(s, tp);
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                scale = scale.max(v.norm());
                let d = n as i64 * m + s as i64 - tp as i64;
                for rho in 0..n as u32 {
                    let phase =
                        unit_phase(-(((s as i64 * rho as i64).rem_euclid(n as i64)) as f64) * inv);
                    *coeffs.entry((d, rho)).or_insert(Complex64::new(0.0, 0.0)) +=
                        v * phase * inv;
                }
            }
        }
    }
    // Phase-noise dust from inexact roots of unity would otherwise widen
    // finitely supported patterns.
    let floor = 1e-13 * scale;
    let group_ref = group.clone();
    let terms = coeffs.into_iter().filter_map(move |((d, rho), v)| {
        if v.norm() <= floor {
            None
        } else {
            let g = group_ref
                .element(Vec::new(), rho)
                .expect("residue is reduced mod N");
            Some((d, g, v))
        }
    });
    Ok(APOperator::from_terms(
        group,
        WeightSpec::power(1.0)?,
        DEFAULT_BAND_EXPONENTS,
        terms,
    )?)
}

/// The shifted almost Mathieu operator U₁ + U₋₁ + β·cos(2π(ξn + δ))·I
/// over the frequency group gr{ξ}.
pub fn build_mathieu(beta: f64, xi: f64, delta: f64) -> Result<APOperator, ModelError> {
    let group = Arc::new(FreqGroup::new(vec![xi], 1)?);
    let e1 = group.element(vec![1], 0)?;
    let e1n = group.neg(&e1);
    let zero = group.zero();
    let half = 0.5 * beta;
    let terms = [
        (1, zero.clone(), Complex64::new(1.0, 0.0)),
        (-1, zero, Complex64::new(1.0, 0.0)),
        (0, e1, Complex64::from_polar(half, std::f64::consts::TAU * delta)),
        (0, e1n, Complex64::from_polar(half, -std::f64::consts::TAU * delta)),
    ];
    Ok(APOperator::from_terms(
        group,
        WeightSpec::power(1.0)?,
        DEFAULT_BAND_EXPONENTS,
        terms,
    )?)
}

/// M − λI as e^{log(−λ)I}·e^{Log(I − M/λ)}, valid for ‖M‖ < |λ|.
///
/// log(−λ) takes the principal branch (imaginary part in (−π, π]); for
/// positive real λ this puts the branch point at +iπ, so the two routes to
/// G = −λ·e^{M(log-series diagonal)} carry the argument consistently.
pub fn factorize_shifted_mathieu(
    mop: &APOperator,
    lambda: Complex64,
    tol: f64,
    budget: ErrorBudget,
) -> Result<ExpFactorization, ModelError> {
    let norm = mop.norm();
    if norm >= lambda.norm() {
        return Err(ModelError::NormExceedsShift {
            norm,
            modulus: lambda.norm(),
        });
    }
    let mut working = budget.clone();
    // Negating a real λ lands on the branch cut with a −0.0 imaginary part,
    // which ln would read as the −iπ side; close the cut from above.
    let mut neg = -lambda;
    if neg.im == 0.0 {
        neg.im = 0.0;
    }
    let a1 = APOperator::identity(
        mop.group().clone(),
        mop.weight().clone(),
        mop.band_exponents(),
    )?
    .scale(neg.ln());
    let a2 = mop.log_shifted(lambda, tol, &mut working)?;
    let fact = ExpFactorization::new(vec![a1, a2], tol, budget)?;

    let shifted = mop.plus_scalar(-lambda)?;
    let defect = fact.product().minus(&shifted)?.norm();
    let bound = 8.0 * tol * (2.0 * (lambda.norm().ln().abs() + 4.0 + norm)).exp()
        + 10.0 * fact.budget_used()
        + 1e-12 * lambda.norm();
    if defect > bound {
        return Err(ModelError::FactorizationDrift { defect, bound });
    }
    Ok(fact)
}
