use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense real matrix in row-major order, read as a linear map `R^cols -> R^rows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl MatOperator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in diag.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.entries[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.entries.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn transpose(&self) -> MatOperator {
        let mut t = MatOperator::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &MatOperator) -> Result<MatOperator> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = MatOperator::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.entries[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * selfᵀ`, symmetric by construction.
    pub fn gram_rows(&self) -> MatOperator {
        let mut out = MatOperator::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &MatOperator) -> Result<MatOperator> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} minus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(MatOperator {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Largest `|m_ij - m_ji|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `(M + Mᵀ) / 2`
    pub fn symmetrized(&self) -> Result<MatOperator> {
        self.require_square()?;
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        Ok(out)
    }

    fn require_square(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }
}

/// Eigenpairs of a symmetric matrix: eigenvalues descending, eigenvectors as the
/// orthonormal columns of `eigenvectors`, each with its first nonzero coordinate positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: MatOperator,
}

impl EigenDecomposition {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    /// `V Λ Vᵀ`
    pub fn reconstruct(&self) -> MatOperator {
        let n = self.eigenvalues.len();
        let mut out = MatOperator::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.vector(k);
            for i in 0..n {
                for j in 0..n {
                    out.entries[i * n + j] += lambda * v[i] * v[j];
                }
            }
        }
        out
    }
}

const SYMMETRY_TOL: f64 = 1e-8;

/// Full symmetric eigendecomposition with a deterministic sign convention.
pub fn sym_eig(m: &MatOperator) -> Result<EigenDecomposition> {
    m.require_square()?;
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = m.rows;
    let eig = SymmetricEigen::new(m.symmetrized()?.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut vectors = MatOperator::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let scale = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-12 * scale)
            .map_or(1.0, |x| x.signum());
        for i in 0..n {
            vectors.set(i, k, sign * col[i]);
        }
    }
    Ok(EigenDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// `Σ_{i<keep} λ_i^{-1/2} v_i v_iᵀ` over the top `keep` eigenpairs of a PSD matrix.
///
/// Fails when fewer than `keep` eigenvalues exceed `floor_tol * λ_max`.
pub fn psd_sqrt_pinv(m: &MatOperator, keep: usize, floor_tol: f64) -> Result<MatOperator> {
    if keep == 0 {
        return Err(Error::InvalidArgument("keep must be at least 1".into()));
    }
    let eig = sym_eig(m)?;
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let floor = floor_tol * lambda_max;
    let available = eig
        .eigenvalues
        .iter()
        .take_while(|&&l| lambda_max > 0.0 && l > floor)
        .count();
    if available < keep {
        return Err(Error::RankDeficient {
            wanted: keep,
            available,
        });
    }
    let n = m.rows;
    let mut out = MatOperator::zeros(n, n);
    for k in 0..keep {
        let w = eig.eigenvalues[k].powf(-0.5);
        let v = eig.vector(k);
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] += w * v[i] * v[j];
            }
        }
    }
    Ok(out)
}

/// Singular values in descending order.
pub fn singular_values(m: &MatOperator) -> Vec<f64> {
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol` times the largest; 0 for the zero matrix.
pub fn numerical_rank(m: &MatOperator, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}

/// Right singular vectors of a (possibly wide) matrix, as columns of a `cols x cols`
/// matrix, paired with singular values padded with zeros to length `cols`.
/// Both are sorted by descending singular value.
pub(crate) fn right_singular_system(m: &MatOperator) -> (Vec<f64>, MatOperator) {
    // Pad to square so the full right basis (including the null space) is returned.
    let n = m.rows.max(m.cols);
    let mut padded = DMatrix::<f64>::zeros(n, m.cols);
    for r in 0..m.rows {
        for c in 0..m.cols {
            padded[(r, c)] = m.get(r, c);
        }
    }
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut values = Vec::with_capacity(m.cols);
    let mut vectors = MatOperator::zeros(m.cols, m.cols);
    for (k, &src) in order.iter().take(m.cols).enumerate() {
        values.push(svd.singular_values[src]);
        for i in 0..m.cols {
            vectors.set(i, k, v_t[(src, i)]);
        }
    }
    (values, vectors)
}
