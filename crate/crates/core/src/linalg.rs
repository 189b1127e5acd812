//! Dense complex matrices for finite sections.
//!
//! Everything downstream reduces to moderately sized dense problems:
//! windows of a band operator are materialized entrywise, determinants
//! come from LU with partial pivoting, and matrix exponentials use
//! scaling and squaring with a plain Taylor core. Matrices are square,
//! row major, and deliberately carry no lifetime ties to the operators
//! they were cut from.
//!
//! The two compressions are
//!
//! * `toeplitz_comp(A, m)`: the window `(A_{j,k})` for `0 ≤ j,k < m`,
//! * `hankel_comp(A, m)`: the matrix `(A_{j,-k-1})` for `0 ≤ j,k < m`,
//!
//! which satisfy the exact splitting `T(AB) = T(A)T(B) + H(A)H(Ã)` on
//! entries far enough from the truncation edge; `tests` pins that down.

use num_complex::Complex64;

use crate::apop::APOperator;

/// Default refusal threshold for materializing windows.
pub const DEFAULT_SIZE_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("requested window of size {requested} exceeds cap {cap}")]
    SizeCap { requested: usize, cap: usize },
    #[error("empty window [{0}, {1})")]
    EmptyWindow(i64, i64),
}

/// A square complex matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zero(dim: usize) -> Self {
        DenseMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(LinalgError::DimMismatch(row.len(), dim));
            }
            data.extend_from_slice(row);
        }
        Ok(DenseMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.dim {
            let mut s = 0.0;
            for i in 0..self.dim {
                s += self.get(i, j).norm();
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn plus(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimMismatch(self.dim, other.dim));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseMatrix { dim: self.dim, data })
    }

    pub fn minus(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        self.plus(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, z: Complex64) -> DenseMatrix {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * z).collect(),
        }
    }

    /// Row-major ikj product; cache friendly for the sizes in play.
    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let mut out = DenseMatrix::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest `|i-j|` with a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if self.get(i, j) != Complex64::new(0.0, 0.0) {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        bw
    }

    /// Product exploiting band structure: only entries within `b_self`
    /// resp. `b_other` of the diagonal are read. The result has bandwidth
    /// at most `b_self + b_other`.
    fn band_mul(&self, other: &DenseMatrix, b_self: usize, b_other: usize) -> DenseMatrix {
        let n = self.dim;
        let mut out = DenseMatrix::zero(n);
        for i in 0..n {
            let k_lo = i.saturating_sub(b_self);
            let k_hi = (i + b_self).min(n - 1);
            for k in k_lo..=k_hi {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let j_lo = k.saturating_sub(b_other);
                let j_hi = (k + b_other).min(n - 1);
                let brow = &other.data[k * n + j_lo..k * n + j_hi + 1];
                let orow = &mut out.data[i * n + j_lo..i * n + j_hi + 1];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn top_left(&self, m: usize) -> Result<DenseMatrix, LinalgError> {
        if m > self.dim {
            return Err(LinalgError::DimMismatch(m, self.dim));
        }
        let mut out = DenseMatrix::zero(m);
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.get(i, j));
            }
        }
        Ok(out)
    }

    /// In-place LU with partial pivoting. Returns the number of row
    /// swaps, or `None` if a pivot vanished exactly.
    fn lu_in_place(&mut self) -> Option<usize> {
        let n = self.dim;
        let mut swaps = 0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = self.get(col, col).norm();
            for r in col + 1..n {
                let mag = self.get(r, col).norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    let a = self.get(col, j);
                    let b = self.get(pivot_row, j);
                    self.set(col, j, b);
                    self.set(pivot_row, j, a);
                }
                swaps += 1;
            }
            let pivot = self.get(col, col);
            for r in col + 1..n {
                let factor = self.get(r, col) / pivot;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                self.set(r, col, factor);
                for j in col + 1..n {
                    let v = self.get(r, j) - factor * self.get(col, j);
                    self.set(r, j, v);
                }
            }
        }
        Some(swaps)
    }
}

/// Determinant by partial-pivot LU. Exactly zero when a pivot vanishes.
pub fn lu_det(a: &DenseMatrix) -> Complex64 {
    if a.dim == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut lu = a.clone();
    match lu.lu_in_place() {
        None => Complex64::new(0.0, 0.0),
        Some(swaps) => {
            let mut det = if swaps % 2 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            };
            for i in 0..lu.dim {
                det *= lu.get(i, i);
            }
            det
        }
    }
}

/// Logarithm of the determinant, accumulated pivot by pivot so windows
/// whose determinant under- or overflows `f64` still report a finite
/// value. `None` when the matrix is numerically singular. The imaginary
/// part is a sum of principal branches, not unwound along any path.
pub fn lu_logdet(a: &DenseMatrix) -> Option<Complex64> {
    if a.dim == 0 {
        return Some(Complex64::new(0.0, 0.0));
    }
    let mut lu = a.clone();
    let swaps = lu.lu_in_place()?;
    let mut log = Complex64::new(0.0, if swaps % 2 == 0 { 0.0 } else { std::f64::consts::PI });
    for i in 0..lu.dim {
        let p = lu.get(i, i);
        if p.norm() == 0.0 {
            return None;
        }
        log += p.ln();
    }
    Some(log)
}

/// Matrix exponential. Arguments of moderate 1-norm are summed directly
/// with band-limited products, so exponentials of band sections cost
/// `O(n·M²·w²)` rather than `O(n³)` per Taylor term; larger arguments
/// fall back to scaling and squaring around a dense Taylor core.
pub fn mat_exp(a: &DenseMatrix) -> DenseMatrix {
    let norm = a.one_norm();
    if norm <= 8.0 {
        return taylor_exp_banded(a);
    }
    let n = a.dim;
    let squarings = (norm / 0.5).log2().ceil() as u32;
    let scaled = a.scale(Complex64::new(0.5_f64.powi(squarings as i32), 0.0));
    let mut acc = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for m in 1..=64u32 {
        term = term.mul(&scaled).expect("same dim");
        term = term.scale(Complex64::new(1.0 / m as f64, 0.0));
        let t = term.one_norm();
        acc = acc.plus(&term).expect("same dim");
        if t < 1e-18 * acc.one_norm().max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc.mul(&acc).expect("same dim");
    }
    acc
}

/// Plain Taylor sum with band tracking; the `m`-th power of a matrix of
/// bandwidth `w` has bandwidth `m·w`, and for 1-norm at most 8 the series
/// tail is below machine precision well before 96 terms.
fn taylor_exp_banded(a: &DenseMatrix) -> DenseMatrix {
    let n = a.dim;
    if n == 0 {
        return DenseMatrix::zero(0);
    }
    let w = a.bandwidth();
    let mut acc = DenseMatrix::identity(n).plus(a).expect("same dim");
    let mut term = a.clone();
    let mut term_bw = w;
    for m in 2..=96u32 {
        term = term.band_mul(a, term_bw, w);
        term = term.scale(Complex64::new(1.0 / m as f64, 0.0));
        term_bw = (term_bw + w).min(n - 1);
        let t = term.one_norm();
        acc = acc.plus(&term).expect("same dim");
        if t < 1e-18 * acc.one_norm().max(1.0) {
            break;
        }
    }
    acc
}

/// The window `(A_{j,k})`, `n1 ≤ j,k < n2`, as a dense matrix. Entry
/// `(j,k)` is the `(j-k)`-th diagonal evaluated at `j`.
pub fn materialize(op: &APOperator, n1: i64, n2: i64) -> Result<DenseMatrix, LinalgError> {
    materialize_with_cap(op, n1, n2, DEFAULT_SIZE_CAP)
}

pub fn materialize_with_cap(
    op: &APOperator,
    n1: i64,
    n2: i64,
    cap: usize,
) -> Result<DenseMatrix, LinalgError> {
    if n2 <= n1 {
        return Err(LinalgError::EmptyWindow(n1, n2));
    }
    let h = (n2 - n1) as usize;
    if h > cap {
        return Err(LinalgError::SizeCap { requested: h, cap });
    }
    let mut out = DenseMatrix::zero(h);
    for d in op.offsets() {
        let diag = op.diagonal(d);
        for j in n1.max(n1 + d)..n2.min(n2 + d) {
            let k = j - d;
            out.set((j - n1) as usize, (k - n1) as usize, diag.eval(j));
        }
    }
    Ok(out)
}

/// Finite Toeplitz-like compression `T_m(A) = (A_{j,k})_{0 ≤ j,k < m}`.
pub fn toeplitz_comp(op: &APOperator, m: usize) -> Result<DenseMatrix, LinalgError> {
    materialize(op, 0, m as i64)
}

/// Finite Hankel-like compression `H_m(A) = (A_{j,-k-1})_{0 ≤ j,k < m}`.
/// Entry `(j,k)` is the `(j+k+1)`-th diagonal evaluated at `j`; for a
/// band operator only the anti-diagonal corner `j+k+1 ≤ bandwidth` is
/// populated.
pub fn hankel_comp(op: &APOperator, m: usize) -> Result<DenseMatrix, LinalgError> {
    if m > DEFAULT_SIZE_CAP {
        return Err(LinalgError::SizeCap {
            requested: m,
            cap: DEFAULT_SIZE_CAP,
        });
    }
    let mut out = DenseMatrix::zero(m);
    for d in op.offsets() {
        if d < 1 || d > 2 * m as i64 - 1 {
            continue;
        }
        let diag = op.diagonal(d);
        let jmin = (d - m as i64).max(0);
        let jmax = (d - 1).min(m as i64 - 1);
        for j in jmin..=jmax {
            let k = d - 1 - j;
            out.set(j as usize, k as usize, diag.eval(j));
        }
    }
    Ok(out)
}
