//! Symmetric and positive semi-definite matrix primitives.
//!
//! Everything here works through a full symmetric eigendecomposition, which
//! doubles as the place where slightly indefinite covariance estimates get
//! clamped. Clamp tolerances are *relative*: an eigenvalue `λ` is compared to
//! `clamp_tol * max_i |λ_i|`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Default relative eigenvalue clamp tolerance.
pub const DEFAULT_CLAMP_TOL: f64 = 1e-12;

const EIGEN_MAX_ITER: usize = 10_000;

/// A dense symmetric matrix. Construction symmetrizes its input as `(A + Aᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimension must be >= 1".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation; callers guarantee a square finite input.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    /// Congruence `Q A Qᵀ`, symmetrized.
    pub fn congruence(&self, q: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrized(q * &self.0 * q.transpose())
    }

    /// Principal submatrix on the given coordinates.
    pub fn restrict(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            self.0[(idx[i], idx[j])]
        }))
    }
}

/// Eigendecomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn min_eigenvalue(&self) -> f64 {
        self.values[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V diag(f(λ)) Vᵀ`, symmetrized.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    fn clamp_threshold(&self, clamp_tol: f64) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        clamp_tol * scale.max(f64::MIN_POSITIVE)
    }
}

pub fn sym_eigen(a: &SymMatrix) -> Result<SymEigen> {
    let dim = a.dim();
    let eig = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence { dim })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Outcome of a positive-definiteness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdCheckReport {
    pub min_eigenvalue: f64,
    /// `min_eigenvalue` strictly above the clamp threshold.
    pub is_spd: bool,
    /// Some negative eigenvalue inside the tolerance band was set to zero.
    pub clamped: bool,
}

pub fn check_spd(a: &SymMatrix, clamp_tol: f64) -> Result<SpdCheckReport> {
    let eig = sym_eigen(a)?;
    Ok(report_for(&eig, clamp_tol))
}

fn report_for(eig: &SymEigen, clamp_tol: f64) -> SpdCheckReport {
    let min = eig.min_eigenvalue();
    SpdCheckReport {
        min_eigenvalue: min,
        is_spd: min > eig.clamp_threshold(clamp_tol),
        clamped: min < 0.0,
    }
}

/// Symmetric PSD square root together with the clamping report.
pub fn psd_sqrt_with_report(a: &SymMatrix, clamp_tol: f64) -> Result<(SymMatrix, SpdCheckReport)> {
    let eig = sym_eigen(a)?;
    let report = report_for(&eig, clamp_tol);
    if report.min_eigenvalue < -eig.clamp_threshold(clamp_tol) {
        return Err(Error::NotPsd {
            min_eigenvalue: report.min_eigenvalue,
        });
    }
    Ok((eig.map_values(|v| v.max(0.0).sqrt()), report))
}

pub fn psd_sqrt(a: &SymMatrix, clamp_tol: f64) -> Result<SymMatrix> {
    psd_sqrt_with_report(a, clamp_tol).map(|(r, _)| r)
}

pub fn psd_inv_sqrt(a: &SymMatrix, clamp_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eigen(a)?;
    let min = eig.min_eigenvalue();
    if min <= eig.clamp_threshold(clamp_tol) {
        return Err(Error::Singular {
            min_eigenvalue: min,
            context: None,
        });
    }
    Ok(eig.map_values(|v| 1.0 / v.sqrt()))
}

/// Square root and inverse square root from one decomposition.
pub(crate) fn psd_sqrt_and_inv_sqrt(
    a: &SymMatrix,
    clamp_tol: f64,
) -> Result<(SymMatrix, SymMatrix)> {
    let eig = sym_eigen(a)?;
    let min = eig.min_eigenvalue();
    if min <= eig.clamp_threshold(clamp_tol) {
        return Err(Error::Singular {
            min_eigenvalue: min,
            context: None,
        });
    }
    Ok((
        eig.map_values(f64::sqrt),
        eig.map_values(|v| 1.0 / v.sqrt()),
    ))
}

/// Bures distance `sqrt(tr(A + B − 2 (A^{1/2} B A^{1/2})^{1/2}))`.
///
/// Evaluated as `min_U ‖A^{1/2} − B^{1/2} U‖_F` over orthogonal `U`, with the
/// minimizer taken from the polar factor of `A^{1/2} B^{1/2}`. The value is the
/// same as the trace formula but does not lose precision through cancellation
/// when `A ≈ B`.
pub fn bures_dist(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    bures_dist_tol(a, b, DEFAULT_CLAMP_TOL)
}

pub fn bures_dist_tol(a: &SymMatrix, b: &SymMatrix, clamp_tol: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "bures distance between {}x{} and {}x{} matrices",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let ra = psd_sqrt(a, clamp_tol)?;
    let rb = psd_sqrt(b, clamp_tol)?;
    let product = ra.as_matrix() * rb.as_matrix();
    let svd = SVD::try_new(product, true, true, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence { dim: a.dim() })?;
    let (Some(w), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numerical(
            "SVD did not return singular vectors".into(),
        ));
    };
    let rotation = v_t.transpose() * w.transpose();
    let diff = ra.as_matrix() - rb.as_matrix() * rotation;
    Ok(diff.norm())
}

/// Squared 2-Wasserstein distance between two members of one location-scatter
/// family: `‖μ₁ − μ₂‖² + d(Σ₁, Σ₂)²`.
pub fn gaussian_w2_sq(
    mu1: &DVector<f64>,
    s1: &SymMatrix,
    mu2: &DVector<f64>,
    s2: &SymMatrix,
) -> Result<f64> {
    if mu1.len() != mu2.len() || mu1.len() != s1.dim() || s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "means of length {} and {} with covariances of dim {} and {}",
            mu1.len(),
            mu2.len(),
            s1.dim(),
            s2.dim()
        )));
    }
    let mean_part = (mu1 - mu2).norm_squared();
    let d = bures_dist(s1, s2)?;
    Ok(mean_part + d * d)
}
