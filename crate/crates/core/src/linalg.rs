//! Dense matrix helpers shared by every module: Hermitian spectral
//! decompositions, spectral functional calculus and a few norms.
//!
//! All eigen-decompositions return eigenvalues sorted ascending with the
//! eigenvector columns permuted accordingly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spectral decomposition `A = U diag(values) U^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEigen {
    pub fn new(a: &CMat) -> Self {
        let a = hermitize(a);
        let n = a.nrows();
        let m = faer::Mat::<Complex64>::from_fn(n, n, |r, c| a[(r, c)]);
        let (values, u) = match m.self_adjoint_eigen(faer::Side::Lower) {
            Ok(evd) => {
                let s = evd.S();
                ((0..n).map(|k| s[k].re).collect::<Vec<f64>>(), evd.U().to_owned())
            }
            Err(_) => return fallback_herm(&a),
        };
        let vectors = CMat::from_fn(n, n, |r, c| u[(r, c)]);
        HermEigen { values, vectors }
    }

    /// `U diag(f(λ)) U^H`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        self.apply_complex(|x| Complex64::new(f(x), 0.0))
    }

    pub fn apply_complex(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for r in 0..n {
                scaled[(r, k)] *= fv;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Spectral decomposition of a real symmetric matrix, ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: RMat,
}

impl SymEigen {
    pub fn new(a: &RMat) -> Self {
        let n = a.nrows();
        let m = faer::Mat::<f64>::from_fn(n, n, |r, c| 0.5 * (a[(r, c)] + a[(c, r)]));
        match m.self_adjoint_eigen(faer::Side::Lower) {
            Ok(evd) => {
                let s = evd.S();
                let u = evd.U();
                SymEigen { values: (0..n).map(|k| s[k]).collect(), vectors: RMat::from_fn(n, n, |r, c| u[(r, c)]) }
            }
            Err(_) => fallback_sym(a),
        }
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> RMat {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(f(v));
        }
        &scaled * self.vectors.transpose()
    }
}

pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn re(a: &CMat) -> RMat {
    a.map(|z| z.re)
}

pub fn im(a: &CMat) -> RMat {
    a.map(|z| z.im)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_real(a: &RMat) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(a: &RMat) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    HermEigen::new(a).min()
}

/// Direct sum of two complex matrices.
pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

pub fn dvector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

// Only reached when the QR iteration fails to converge.
fn fallback_herm(a: &CMat) -> HermEigen {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    HermEigen { values, vectors }
}

fn fallback_sym(a: &RMat) -> SymEigen {
    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = RMat::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    SymEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn herm_eigen_sorted_and_reconstructs() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.3), Complex64::new(0.0, -0.3), Complex64::new(0.5, 0.0)],
        );
        let e = HermEigen::new(&a);
        assert!((e.values[0] - 0.2).abs() < 1e-14);
        assert!((e.values[1] - 0.8).abs() < 1e-14);
        assert!(max_abs(&(e.apply(|x| x) - &a)) < 1e-14);
    }

    #[test]
    fn sym_eigen_square_root() {
        let a = RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = SymEigen::new(&a);
        let s = e.apply(f64::sqrt);
        assert!(max_abs_real(&(&s * &s - &a)) < 1e-14);
    }
}
