//! Positive sesquilinear forms on the complexification of a real space.
//!
//! Everything is expressed in a fixed real basis of `V`, so complex
//! conjugation of vectors, maps and forms is entrywise conjugation. A form
//! `S` is stored as the Hermitian matrix with `S(x, y) = x^H S y`.
//!
//! Derived objects:
//!
//! * real part `R = S + conj(S)` (real symmetric, positive),
//! * alternating form `sigma = (S - conj(S))/i = 2 Im S` (real antisymmetric),
//! * ratio operator `M = R^{-1/2} S R^{-1/2}` on the range of `R`, which has
//!   spectrum in `[0, 1]` and satisfies `conj(M) = 1 - M`.

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::{self, CMat, HermEigen, RMat, SymEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by the whole toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity, relative to the Frobenius norm of the form.
    pub herm_rel: f64,
    /// Positivity, relative to the Frobenius norm of the form.
    pub psd_rel: f64,
    /// Absolute threshold on ratio-operator eigenvalues (0, 1/2, 1).
    pub spec: f64,
    /// Kernel threshold for `S + conj(S)`, relative to its largest eigenvalue.
    pub degenerate_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { herm_rel: 1e-10, psd_rel: 1e-10, spec: 1e-8, degenerate_rel: 1e-12 }
    }
}

/// A real vector space of dimension `dim` with optional basis labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSpace {
    dim: usize,
    labels: Option<Vec<String>>,
}

impl StarSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptySpace);
        }
        Ok(StarSpace { dim, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut space = StarSpace::new(labels.len())?;
        space.labels = Some(labels);
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn direct_sum(&self, other: &StarSpace) -> StarSpace {
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        StarSpace { dim: self.dim + other.dim, labels }
    }
}

/// A validated positive sesquilinear form on `V^C`.
#[derive(Debug, Clone)]
pub struct CovarianceForm {
    space: StarSpace,
    matrix: CMat,
    tol: Tolerances,
}

impl CovarianceForm {
    pub fn new(space: StarSpace, matrix: CMat) -> Result<Self> {
        Self::with_tolerances(space, matrix, Tolerances::default())
    }

    pub fn with_tolerances(space: StarSpace, matrix: CMat, tol: Tolerances) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let norm = linalg::frobenius(&matrix);
        let deviation = linalg::max_abs(&(&matrix - matrix.adjoint()));
        let herm_tol = tol.herm_rel * norm;
        if deviation > herm_tol {
            return Err(Error::NotHermitian { deviation, tolerance: herm_tol });
        }
        let matrix = linalg::hermitize(&matrix);
        let min_eigenvalue = linalg::min_eigenvalue(&matrix);
        let psd_tol = tol.psd_rel * norm;
        if min_eigenvalue < -psd_tol {
            return Err(Error::NotPositive { min_eigenvalue, tolerance: psd_tol });
        }
        Ok(CovarianceForm { space, matrix, tol })
    }

    /// Convenience constructor for an unlabeled space.
    pub fn from_matrix(matrix: CMat) -> Result<Self> {
        let space = StarSpace::new(matrix.nrows())?;
        Self::new(space, matrix)
    }

    /// Re-validates a derived matrix on the same space with the same tolerances.
    pub fn derive(&self, matrix: CMat) -> Result<Self> {
        Self::with_tolerances(self.space.clone(), matrix, self.tol)
    }

    pub fn space(&self) -> &StarSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn conj(&self) -> CMat {
        linalg::conj(&self.matrix)
    }

    /// `S + conj(S)`.
    pub fn real_part(&self) -> RMat {
        linalg::re(&self.matrix) * 2.0
    }

    /// `(S - conj(S))/i`.
    pub fn sigma(&self) -> RMat {
        linalg::im(&self.matrix) * 2.0
    }

    /// `S(x, y)` for complex coordinate vectors.
    pub fn pair(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                acc += xi.conj() * self.matrix[(i, j)] * yj;
            }
        }
        acc
    }

    /// Pull-back `(S phi)(x, y) = S(phi x, phi y)` along a real linear map.
    pub fn pullback(&self, phi: &RMat) -> Result<CovarianceForm> {
        if phi.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.dim()),
                found: format!("{} rows", phi.nrows()),
            });
        }
        let c = linalg::to_complex(phi);
        let space = StarSpace::new(phi.ncols())?;
        CovarianceForm::with_tolerances(space, c.transpose() * &self.matrix * c, self.tol)
    }

    pub fn direct_sum(&self, other: &CovarianceForm) -> Result<CovarianceForm> {
        let space = self.space.direct_sum(&other.space);
        CovarianceForm::with_tolerances(space, linalg::direct_sum(&self.matrix, &other.matrix), self.tol)
    }

    pub fn ratio_operator(&self) -> RatioOperator {
        RatioOperator::of(self)
    }

    pub fn normal_form(&self) -> Result<SymplecticNormalForm> {
        SymplecticNormalForm::of(self)
    }

    pub fn classify(&self) -> Classification {
        Classification::of_spectrum(self.ratio_operator().spectrum(), self.tol.spec)
    }
}

/// The ratio operator `(S + conj S) \ S` in orthonormal quotient coordinates.
///
/// With `R = U diag(lambda) U^T` and `U_m` the eigenvectors for the kept
/// (non-kernel) eigenvalues, `lift = U_m lambda^{-1/2}` (n x m) sends quotient
/// coordinates back to representatives in `V^C`, and `embed = lambda^{1/2}
/// U_m^T` (m x n) maps `x` to the coordinates of `[x]`. Then
/// `M = lift^T S lift` and `S = embed^T M embed`.
#[derive(Debug, Clone)]
pub struct RatioOperator {
    matrix: CMat,
    lift: RMat,
    embed: RMat,
    eigen: HermEigen,
}

impl RatioOperator {
    fn of(form: &CovarianceForm) -> Self {
        let real = form.real_part();
        let eig = SymEigen::new(&real);
        let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        let cutoff = form.tol.degenerate_rel * top;
        let kept: Vec<usize> = (0..eig.values.len()).filter(|&k| top > 0.0 && eig.values[k] > cutoff).collect();
        let n = form.dim();
        let m = kept.len();
        let mut lift = RMat::zeros(n, m);
        let mut embed = RMat::zeros(m, n);
        for (c, &k) in kept.iter().enumerate() {
            let lam = eig.values[k];
            for r in 0..n {
                lift[(r, c)] = eig.vectors[(r, k)] / lam.sqrt();
                embed[(c, r)] = eig.vectors[(r, k)] * lam.sqrt();
            }
        }
        let lc = linalg::to_complex(&lift);
        let matrix = linalg::hermitize(&(lc.transpose() * form.matrix() * &lc));
        let mut eigen = HermEigen::new(&matrix);
        eigen.values.iter_mut().for_each(|s| *s = kernel::snap_unit(*s));
        RatioOperator { matrix, lift, embed, eigen }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Quotient dimension `m = rank(S + conj S)`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn lift(&self) -> &RMat {
        &self.lift
    }

    pub fn embed(&self) -> &RMat {
        &self.embed
    }

    pub fn eigen(&self) -> &HermEigen {
        &self.eigen
    }

    /// Eigenvalues ascending, with values within `BOUNDARY_SNAP` of 0 or 1 set to the endpoint.
    pub fn spectrum(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Form matrix on `V^C` of an operator given in quotient coordinates:
    /// `embed^T op embed`.
    pub fn to_form(&self, op: &CMat) -> CMat {
        let e = linalg::to_complex(&self.embed);
        linalg::hermitize(&(e.transpose() * op * e))
    }

    /// Quotient-coordinate matrix `lift^T P lift` of a form on `V^C`.
    pub fn to_quotient(&self, form: &CMat) -> CMat {
        let l = linalg::to_complex(&self.lift);
        l.transpose() * form * l
    }

    /// `φ(M)` through the spectral decomposition, with eigenvalues clamped
    /// into `[0, 1]` and snapped to the endpoints within `BOUNDARY_SNAP`.
    pub fn apply(&self, phi: impl Fn(f64) -> f64) -> CMat {
        self.eigen.apply(phi)
    }
}

/// Normal form basis `(h_1..h_k, p_1, q_1, ..., p_m, q_m)`.
///
/// Columns of `basis` are orthonormal for `S + conj S`; in this basis
/// `sigma(q_j, p_j) = 2 mu_j` and every other pairing vanishes.
#[derive(Debug, Clone)]
pub struct SymplecticNormalForm {
    pub basis: RMat,
    pub mus: Vec<f64>,
    pub degenerate_dim: usize,
}

impl SymplecticNormalForm {
    fn of(form: &CovarianceForm) -> Result<Self> {
        let n = form.dim();
        let real = form.real_part();
        let eig = SymEigen::new(&real);
        let top = eig.values.last().copied().unwrap_or(0.0);
        let min = eig.values[0];
        if top <= 0.0 || min <= form.tol.degenerate_rel * top {
            return Err(Error::DegenerateRealPart { min_eigenvalue: min });
        }
        let inv_sqrt = eig.apply(|x| 1.0 / x.sqrt());
        let a = &inv_sqrt * form.sigma() * &inv_sqrt;
        let a = (&a - a.transpose()) * 0.5;

        // iA is Hermitian; a unit eigenvector v = (p + i q)/sqrt(2) with
        // eigenvalue 2 mu > 0 gives A p = 2 mu q and A q = -2 mu p, and p, q are
        // orthonormal because v is orthogonal to conj(v).
        let ia = linalg::to_complex(&a).map(|z| z * linalg::I);
        let herm = HermEigen::new(&ia);
        let threshold = 2.0 * form.tol.spec;
        let mut modes: Vec<(f64, usize)> = herm
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > threshold)
            .map(|(k, &v)| (v / 2.0, k))
            .collect();
        modes.sort_by(|x, y| y.0.total_cmp(&x.0));
        let k = n - 2 * modes.len();

        // kernel: top-k eigenvectors of the real projector Re(V0 V0^H) onto the
        // eigenvectors of iA with |eigenvalue| <= threshold
        let mut kernel_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        if k > 0 {
            let zero_idx: Vec<usize> = (0..n).filter(|&j| herm.values[j].abs() <= threshold).collect();
            let v0 = CMat::from_fn(n, zero_idx.len(), |r, c| herm.vectors[(r, zero_idx[c])]);
            let proj = linalg::re(&(&v0 * v0.adjoint()));
            let pe = SymEigen::new(&proj);
            for c in (n - k..n).rev() {
                kernel_cols.push(pe.vectors.column(c).iter().copied().collect());
            }
        }

        let mut columns: Vec<Vec<f64>> = kernel_cols;
        let sqrt2 = std::f64::consts::SQRT_2;
        for &(_, idx) in &modes {
            let v = herm.vectors.column(idx);
            columns.push(v.iter().map(|z| sqrt2 * z.re).collect());
            columns.push(v.iter().map(|z| sqrt2 * z.im).collect());
        }
        let ortho = RMat::from_fn(n, n, |r, c| columns[c][r]);
        let basis = inv_sqrt * ortho;
        let mus = modes.iter().map(|m| m.0.min(0.5)).collect();
        Ok(SymplecticNormalForm { basis, mus, degenerate_dim: k })
    }

    /// Number of symplectic pairs.
    pub fn modes(&self) -> usize {
        self.mus.len()
    }

    /// Canonical alternating matrix in the normal-form basis.
    pub fn canonical_sigma(&self) -> RMat {
        let k = self.degenerate_dim;
        let n = k + 2 * self.mus.len();
        let mut out = RMat::zeros(n, n);
        for (j, &mu) in self.mus.iter().enumerate() {
            let p = k + 2 * j;
            let q = p + 1;
            out[(q, p)] = 2.0 * mu;
            out[(p, q)] = -2.0 * mu;
        }
        out
    }
}

/// Spectral classification of a covariance form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub is_extremal: bool,
    pub is_center_free: bool,
    pub is_non_boundary: bool,
}

impl Classification {
    pub fn of_spectrum(spectrum: &[f64], tol: f64) -> Self {
        let is_extremal = spectrum.iter().all(|&s| s <= tol || s >= 1.0 - tol);
        let is_center_free = spectrum.iter().all(|&s| (s - 0.5).abs() >= tol);
        let is_non_boundary = spectrum.iter().all(|&s| s > tol && s < 1.0 - tol);
        Classification { is_extremal, is_center_free, is_non_boundary }
    }
}
