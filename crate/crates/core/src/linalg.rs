//! Dense kernels used by every other module: thin SVD, SPD solves with log-determinant,
//! and symmetric eigendecomposition.
//!
//! Factorizations are delegated to `nalgebra`. This module adds the contracts the rest of the
//! crate relies on: finite-input checks, descending order, and a deterministic sign for every
//! singular vector / eigenvector (largest-magnitude entry positive, ties to the lowest index).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-10;

/// Thin singular value decomposition `A = U diag(d) Vᵀ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// m × s, orthonormal columns.
    pub u: Matrix,
    /// s values, non-negative and non-increasing.
    pub singular_values: Vec<f64>,
    /// r × s, orthonormal columns.
    pub v: Matrix,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &d) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(d);
        }
        us * self.v.transpose()
    }
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

pub fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} contains non-finite entries"
        )))
    }
}

fn ensure_symmetric(a: &Matrix, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "{what} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Index of the entry with the largest magnitude; the first one wins ties.
fn dominant_index(col: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, v) in col.enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    best
}

/// Flips column `j` of `primary` (and of `partner`, if given) so that the dominant entry
/// of `primary[:, j]` is positive.
fn canonicalize_signs(primary: &mut Matrix, mut partner: Option<&mut Matrix>) {
    for j in 0..primary.ncols() {
        let idx = dominant_index(primary.column(j).iter().copied());
        if primary[(idx, j)] < 0.0 {
            primary.column_mut(j).neg_mut();
            if let Some(p) = partner.as_deref_mut() {
                p.column_mut(j).neg_mut();
            }
        }
    }
}

/// Descending order of `values`, stable on ties.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn permute_columns(m: &Matrix, order: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])])
}

pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    ensure_finite(a, "matrix")?;
    let (m, r) = a.shape();
    if m == 0 || r == 0 {
        return Ok(ThinSvd {
            u: Matrix::zeros(m, 0),
            singular_values: Vec::new(),
            v: Matrix::zeros(r, 0),
        });
    }
    // nalgebra's bidiagonal SVD returns wrong singular values on some rank-deficient inputs
    // (repeated rows), so the factorization goes through faer.
    let fa = faer::Mat::<f64>::from_fn(m, r, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|_| Error::Singular("SVD failed to converge".into()))?;
    let k = m.min(r);
    let u = Matrix::from_fn(m, k, |i, j| svd.U()[(i, j)]);
    let v = Matrix::from_fn(r, k, |i, j| svd.V()[(i, j)]);
    let values: Vec<f64> = (0..k).map(|j| svd.S()[j]).collect();
    let order = descending_order(&values);
    let mut u = permute_columns(&u, &order);
    let mut v = permute_columns(&v, &order);
    let singular_values = order.iter().map(|&i| values[i].max(0.0)).collect();
    canonicalize_signs(&mut u, Some(&mut v));
    Ok(ThinSvd {
        u,
        singular_values,
        v,
    })
}

/// Cholesky factor of a symmetric positive-definite matrix, with its log-determinant.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl SpdFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        ensure_finite(a, "SPD matrix")?;
        ensure_symmetric(a, "SPD matrix")?;
        let chol = Cholesky::new(a.clone())
            .ok_or_else(|| Error::Singular("matrix is not positive-definite".into()))?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Singular("log-determinant is not finite".into()));
        }
        Ok(Self { chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower-triangular factor `L` with `A = L Lᵀ`.
    pub fn l(&self) -> Matrix {
        self.chol.l()
    }

    pub fn solve(&self, y: &Matrix) -> Matrix {
        self.chol.solve(y)
    }

    pub fn solve_vec(&self, y: &Vector) -> Vector {
        self.chol.solve(y)
    }

    /// `vᵀ A⁻¹ v`, computed as `‖L⁻¹ v‖²`.
    pub fn mahalanobis_sq(&self, v: &Vector) -> f64 {
        let l = self.chol.l_dirty();
        let n = v.len();
        let mut w = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= l[(i, k)] * w[k];
            }
            w[i] = s / l[(i, i)];
            acc += w[i] * w[i];
        }
        acc
    }
}

/// Solution of `A Z = Y` for SPD `A`.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub solution: Matrix,
    pub log_det: f64,
}

pub fn spd_solve(a: &Matrix, y: &Matrix) -> Result<SpdSolution> {
    if a.nrows() != y.nrows() {
        return Err(Error::invalid(format!(
            "right-hand side has {} rows, matrix is {}x{}",
            y.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(y, "right-hand side")?;
    let factor = SpdFactor::new(a)?;
    Ok(SpdSolution {
        solution: factor.solve(y),
        log_det: factor.log_det(),
    })
}

pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    ensure_finite(a, "symmetric matrix")?;
    ensure_symmetric(a, "symmetric matrix")?;
    if a.nrows() == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    // Symmetrize exactly so tiny asymmetries below the tolerance cannot leak in.
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Singular("eigendecomposition failed to converge".into()))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&values);
    let mut vectors = permute_columns(&eig.eigenvectors, &order);
    canonicalize_signs(&mut vectors, None);
    Ok(SymEig {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors,
    })
}

pub fn frobenius_sq(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Column means of `a`.
pub fn column_means(a: &Matrix) -> Vector {
    let n = a.nrows().max(1) as f64;
    Vector::from_iterator(a.ncols(), a.column_iter().map(|c| c.sum() / n))
}

/// Returns `a` with every column shifted to mean zero.
pub fn center_columns(a: &Matrix) -> Matrix {
    let means = column_means(a);
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// Largest deviation of `aᵀa` from the identity.
pub fn orthonormality_error(a: &Matrix) -> f64 {
    let gram = a.transpose() * a;
    (gram - Matrix::identity(a.ncols(), a.ncols())).amax()
}
