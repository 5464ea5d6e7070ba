//! Dense complex matrices with Hermitian structure checks, PSD certification,
//! Schur-complement splits and block determinants.
//!
//! Every finite realization in the crate (truncated operators, adjoints, bundle
//! gram matrices, defect operators) is a [`ComplexMatrix`].

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

/// Default PSD tolerance, scaled by `max(1, ‖M‖₂)`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Condition number at or above which a leading block counts as singular.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries. Rejects NaN/Inf.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> LabResult<Self> {
        if rows * cols != entries.len() {
            return Err(LabError::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::Domain(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> LabResult<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LabError::Dimension("ragged rows".into()));
        }
        let entries = rows.iter().flatten().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(r, c, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn pow(&self, k: usize) -> LabResult<Self> {
        self.require_square("pow")?;
        let mut acc = Self::identity(self.rows());
        for _ in 0..k {
            acc = &acc * self;
        }
        Ok(acc)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols(), "vector length mismatch");
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Rectangular block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        Self(self.0.view((r0, c0), (nrows, ncols)).into_owned())
    }

    /// Principal submatrix on the given index set (order preserved).
    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |i, j| self.0[(idx[i], idx[j])])
    }

    /// Leading `k×k` principal submatrix.
    pub fn leading(&self, k: usize) -> Self {
        self.block(0, 0, k, k)
    }

    /// Places `blocks[i][j]` (all `n×n`) into an `m·n` square matrix.
    pub fn from_blocks(blocks: &[Vec<ComplexMatrix>]) -> LabResult<Self> {
        let m = blocks.len();
        if m == 0 || blocks.iter().any(|row| row.len() != m) {
            return Err(LabError::Dimension("block grid must be square and non-empty".into()));
        }
        let n = blocks[0][0].rows();
        if blocks.iter().flatten().any(|b| b.rows() != n || b.cols() != n) {
            return Err(LabError::Dimension("all blocks must share one square order".into()));
        }
        let mut out = DMatrix::zeros(m * n, m * n);
        for (bi, row) in blocks.iter().enumerate() {
            for (bj, b) in row.iter().enumerate() {
                out.view_mut((bi * n, bj * n), (n, n)).copy_from(&b.0);
            }
        }
        Ok(Self(out))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.0.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// `max |M − M*|` entrywise.
    pub fn max_abs_asymmetry(&self) -> LabResult<f64> {
        self.require_square("asymmetry")?;
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        Ok(worst)
    }

    /// `(M + M*)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> LabResult<Vec<f64>> {
        self.require_square("eigenvalues")?;
        if self.rows() == 0 {
            return Ok(Vec::new());
        }
        let h = self.hermitian_part();
        let mut ev: Vec<f64> = h.0.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Eigenpairs of the Hermitian part, ascending by eigenvalue. Eigenvectors
    /// are returned as columns.
    pub fn hermitian_eigen(&self) -> LabResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        self.require_square("eigen")?;
        let eig = self.hermitian_part().0.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        Ok((values, vectors))
    }

    /// 2-norm condition number from singular values; `inf` when singular.
    pub fn condition_number(&self) -> LabResult<f64> {
        self.require_square("condition number")?;
        let sv = self.singular_values();
        match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
            (Some(_), Some(_)) => Ok(f64::INFINITY),
            _ => Ok(1.0),
        }
    }

    /// Determinant by partial-pivoting LU.
    pub fn determinant_lu(&self) -> LabResult<Complex64> {
        self.require_square("determinant")?;
        Ok(self.0.clone().lu().determinant())
    }

    /// Determinant, through a Cholesky factorization when the matrix is
    /// Hermitian positive definite, otherwise through LU.
    pub fn determinant(&self) -> LabResult<Complex64> {
        self.require_square("determinant")?;
        let scale = self.frobenius_norm().max(1.0);
        if self.max_abs_asymmetry()? <= 1e-12 * scale {
            if let Some(ch) = self.hermitian_part().0.cholesky() {
                let l = ch.l();
                let d: f64 = (0..l.nrows()).map(|i| l[(i, i)].re * l[(i, i)].re).product();
                return Ok(Complex64::new(d, 0.0));
            }
        }
        self.determinant_lu()
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &ComplexMatrix) -> LabResult<ComplexMatrix> {
        self.require_square("solve")?;
        if rhs.rows() != self.rows() {
            return Err(LabError::Dimension(format!(
                "solve: lhs is {}x{}, rhs has {} rows",
                self.rows(),
                self.cols(),
                rhs.rows()
            )));
        }
        self.0
            .clone()
            .lu()
            .solve(&rhs.0)
            .map(Self)
            .ok_or_else(|| LabError::Singularity("LU solve hit a zero pivot".into()))
    }

    fn require_square(&self, what: &str) -> LabResult<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LabError::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }

    fn require_same_shape(&self, other: &Self, what: &str) {
        assert!(
            self.rows() == other.rows() && self.cols() == other.cols(),
            "{what}: shape mismatch {}x{} vs {}x{}",
            self.rows(),
            self.cols(),
            other.rows(),
            other.cols()
        );
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product dimension mismatch");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.require_same_shape(rhs, "add");
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.require_same_shape(rhs, "sub");
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Outcome of a positive-semidefiniteness test.
///
/// `is_psd` holds exactly when `min_eigenvalue >= -threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdVerdict {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub threshold: f64,
    pub is_psd: bool,
}

impl PsdVerdict {
    fn from_spectrum(eigs: &[f64], tol: f64) -> Self {
        let min = eigs.first().copied().unwrap_or(0.0);
        let max = eigs.last().copied().unwrap_or(0.0);
        let norm = min.abs().max(max.abs());
        let threshold = tol * norm.max(1.0);
        PsdVerdict { min_eigenvalue: min, max_eigenvalue: max, threshold, is_psd: min >= -threshold }
    }
}

pub fn hermitian_check(m: &ComplexMatrix, tol: f64) -> LabResult<bool> {
    Ok(m.max_abs_asymmetry()? <= tol)
}

/// PSD verdict for the Hermitian symmetrization of `m`.
///
/// The asymmetry allowance and the eigenvalue threshold are both
/// `tol·max(1, ‖M‖)`.
pub fn psd_check(m: &ComplexMatrix, tol: f64) -> LabResult<PsdVerdict> {
    if m.rows() == 0 {
        return Err(LabError::Dimension("psd_check on an empty matrix".into()));
    }
    let asym = m.max_abs_asymmetry()?;
    let scale = m.frobenius_norm().max(1.0);
    if asym > tol * scale {
        return Err(LabError::Structure(format!(
            "matrix is not Hermitian: max |M - M*| = {asym:.3e} exceeds {:.3e}",
            tol * scale
        )));
    }
    let eigs = m.hermitian_eigenvalues()?;
    Ok(PsdVerdict::from_spectrum(&eigs, tol))
}

fn check_split(a: &ComplexMatrix, split: usize) -> LabResult<()> {
    if !a.is_square() {
        return Err(LabError::Dimension(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    if split == 0 || split >= a.rows() {
        return Err(LabError::Dimension(format!(
            "split {split} must lie strictly inside 0..{}",
            a.rows()
        )));
    }
    Ok(())
}

/// Verdicts for the leading block `A₁₁` and its Schur complement
/// `A₂₂ − A₁₂* A₁₁⁻¹ A₁₂`. Jointly PSD exactly when `A` is.
pub fn schur_split_psd(a: &ComplexMatrix, split: usize, tol: f64) -> LabResult<(PsdVerdict, PsdVerdict)> {
    check_split(a, split)?;
    let n = a.rows();
    let scale = a.frobenius_norm().max(1.0);
    let asym = a.max_abs_asymmetry()?;
    if asym > tol * scale {
        return Err(LabError::Structure(format!("schur split of a non-Hermitian matrix (asymmetry {asym:.3e})")));
    }
    let h = a.hermitian_part();
    let a11 = h.block(0, 0, split, split);
    let a12 = h.block(0, split, split, n - split);
    let a22 = h.block(split, split, n - split, n - split);

    let eigs11 = a11.hermitian_eigenvalues()?;
    let largest = eigs11.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let smallest = eigs11.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if smallest == 0.0 || largest / smallest >= MAX_CONDITION {
        return Err(LabError::Singularity(format!(
            "leading {split}x{split} block has condition number {:.3e}",
            largest / smallest
        )));
    }
    let x = a11.solve(&a12)?;
    let complement = (&a22 - &(&a12.adjoint() * &x)).hermitian_part();
    let v11 = PsdVerdict::from_spectrum(&eigs11, tol);
    let v22 = psd_check(&complement, tol)?;
    Ok((v11, v22))
}

/// `det(M₁)·det(M₄ − M₃M₁⁻¹M₂)` for the split at `split`.
pub fn block_determinant(a: &ComplexMatrix, split: usize) -> LabResult<Complex64> {
    check_split(a, split)?;
    let n = a.rows();
    let m1 = a.block(0, 0, split, split);
    let m2 = a.block(0, split, split, n - split);
    let m3 = a.block(split, 0, n - split, split);
    let m4 = a.block(split, split, n - split, n - split);
    let cond = m1.condition_number()?;
    if cond >= MAX_CONDITION {
        return Err(LabError::Singularity(format!(
            "leading {split}x{split} block has condition number {cond:.3e}"
        )));
    }
    let complement = &m4 - &(&m3 * &m1.solve(&m2)?);
    Ok(m1.determinant()? * complement.determinant()?)
}
