//! Seeded random instances: forms with prescribed ratio spectra, PSD pairs,
//! symplectic maps.
//!
//! Generators are ChaCha streams, so `for_case(seed, k)` gives an independent,
//! reproducible stream per case index regardless of evaluation order.

use crate::linalg::{self, CMat, RMat, SymEigen};
use crate::star::{CovarianceForm, StarSpace};
use nalgebra::linalg::QR;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct InstanceGen {
    rng: ChaCha8Rng,
}

impl InstanceGen {
    pub fn new(seed: u64) -> Self {
        InstanceGen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn for_case(seed: u64, case: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(case);
        InstanceGen { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> RMat {
        RMat::from_fn(rows, cols, |_, _| self.normal())
    }

    /// Haar-distributed orthogonal matrix.
    pub fn orthogonal(&mut self, n: usize) -> RMat {
        let qr = QR::new(self.gaussian_matrix(n, n));
        let (q, r) = (qr.q(), qr.r());
        let mut q = q;
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        q
    }

    /// Haar-distributed unitary matrix.
    pub fn unitary(&mut self, n: usize) -> CMat {
        let g = CMat::from_fn(n, n, |_, _| Complex64::new(self.normal(), self.normal()));
        let qr = QR::new(g);
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..n {
            let d = r[(j, j)];
            if d.norm() > 0.0 {
                let phase = d / d.norm();
                for i in 0..n {
                    q[(i, j)] *= phase;
                }
            }
        }
        q
    }

    /// Symmetric positive definite matrix with log-eigenvalues uniform in
    /// `[-spread, spread]`.
    pub fn spd(&mut self, n: usize, spread: f64) -> RMat {
        let o = self.orthogonal(n);
        let d: Vec<f64> = (0..n).map(|_| self.uniform(-spread, spread).exp()).collect();
        let mut scaled = o.clone();
        for (j, &x) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(x);
        }
        &scaled * o.transpose()
    }

    /// Complex PSD matrix `U diag(exp(x_k)) U^H` with `x_k` uniform in
    /// `[lo, hi]`.
    pub fn psd_complex(&mut self, n: usize, lo: f64, hi: f64) -> CMat {
        let u = self.unitary(n);
        let d: Vec<f64> = (0..n).map(|_| self.uniform(lo, hi).exp()).collect();
        let mut scaled = u.clone();
        for (j, &x) in d.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= x;
            }
        }
        linalg::hermitize(&(&scaled * u.adjoint()))
    }

    /// Well-conditioned real invertible matrix (singular values in `[e^-1, e]`).
    pub fn invertible(&mut self, n: usize) -> RMat {
        let (a, b) = (self.orthogonal(n), self.orthogonal(n));
        let mut scaled = a;
        for j in 0..n {
            let s = self.uniform(-1.0, 1.0).exp();
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * b
    }

    /// Form on `R^n`, `n = kernel_dim + 2 len(mus)`, whose ratio operator has
    /// eigenvalues `1/2 ± mu_j` and `1/2` with multiplicity `kernel_dim`, with
    /// a random real part.
    pub fn form_with_modes(&mut self, mus: &[f64], kernel_dim: usize) -> CovarianceForm {
        let n = kernel_dim + 2 * mus.len();
        let mut a = RMat::zeros(n, n);
        for (j, &mu) in mus.iter().enumerate() {
            let p = kernel_dim + 2 * j;
            a[(p + 1, p)] = 2.0 * mu;
            a[(p, p + 1)] = -2.0 * mu;
        }
        let o = self.orthogonal(n);
        let a = &o * a * o.transpose();
        let m = CMat::from_fn(n, n, |i, j| {
            let d = if i == j { 0.5 } else { 0.0 };
            Complex64::new(d, 0.5 * a[(i, j)])
        });
        let root = SymEigen::new(&self.spd(n, 1.0)).apply(f64::sqrt);
        let rc = linalg::to_complex(&root);
        let s = linalg::hermitize(&(&rc * m * &rc));
        CovarianceForm::new(StarSpace::new(n).expect("n >= 1"), s).expect("generated form is valid")
    }

    /// Ratio spectrum in `[0.01, 0.99]`; odd `n` gets one central direction.
    pub fn well_conditioned(&mut self, n: usize) -> CovarianceForm {
        let mus: Vec<f64> = (0..n / 2).map(|_| self.uniform(0.0, 0.49)).collect();
        self.form_with_modes(&mus, n % 2)
    }

    /// Non-boundary, center-free form with `mu_j` drawn from `[lo, hi]`.
    pub fn center_free(&mut self, modes: usize, lo: f64, hi: f64) -> CovarianceForm {
        let mus: Vec<f64> = (0..modes).map(|_| self.uniform(lo, hi)).collect();
        self.form_with_modes(&mus, 0)
    }

    /// Extremal (Fock) form: every `mu_j = 1/2`, ratio operator a projection.
    pub fn extremal(&mut self, modes: usize) -> CovarianceForm {
        self.form_with_modes(&vec![0.5; modes], 0)
    }

    /// Pull-back of a well-conditioned form on `R^rank` along a random
    /// surjection `R^n -> R^rank` with singular values in `[e^-1, e]`, so
    /// that `S + conj S` has a kernel of dimension `n - rank`.
    pub fn degenerate(&mut self, n: usize, rank: usize) -> CovarianceForm {
        let inner = self.well_conditioned(rank);
        let left = self.spd(rank, 1.0);
        let right = self.orthogonal(n);
        let phi = left * right.rows(0, rank);
        inner.pullback(&phi).expect("pull-back of a valid form")
    }

    /// Real `G` with `G^T sigma G = sigma` for the alternating form of `form`
    /// (which must have a non-degenerate real part).
    ///
    /// In normal-form coordinates `sigma = D J D` with `D = diag(sqrt(2 mu))`;
    /// `D^{-1} exp(J K) D` is symplectic for symmetric `K` and stays finite
    /// for small `mu`.
    pub fn symplectic_for(&mut self, form: &CovarianceForm, strength: f64) -> RMat {
        let nf = form.normal_form().expect("non-degenerate real part");
        let n = form.dim();
        let k = nf.degenerate_dim;
        let mut gen = RMat::zeros(n, n);
        // any real map on the kernel of sigma
        for i in 0..k {
            for j in 0..k {
                gen[(i, j)] = strength * self.normal();
            }
        }
        let m = n - k;
        let mut d = RMat::identity(n, n);
        if m > 0 {
            let mut unit = RMat::zeros(m, m);
            for (j, &mu) in nf.mus.iter().enumerate() {
                let (p, q) = (2 * j, 2 * j + 1);
                unit[(q, p)] = 1.0;
                unit[(p, q)] = -1.0;
                d[(k + p, k + p)] = (2.0 * mu).sqrt();
                d[(k + q, k + q)] = (2.0 * mu).sqrt();
            }
            let g = self.gaussian_matrix(m, m);
            let sym = (&g + g.transpose()) * (0.5 * strength);
            gen.view_mut((k, k), (m, m)).copy_from(&(unit * sym));
        }
        let d_inv = d.map(|x| if x != 0.0 { 1.0 / x } else { 0.0 });
        let local = &d_inv * gen.exp() * &d;
        let b = &nf.basis;
        let binv = b.clone().try_inverse().expect("basis invertible");
        b * local * binv
    }

    /// Fermionic covariance `O (1/2 + i mu_j J) O^T` with `conj C = 1 - C`;
    /// eigenvalues `1/2 ± mu_j`.
    pub fn fermion_complementary(&mut self, mus: &[f64]) -> CMat {
        self.fermion_blocks(&vec![0.5; mus.len()], mus)
    }

    /// Commuting pair `(C, conj C)` from blocks `a_j + i b_j J`, eigenvalues
    /// `a_j ± b_j` in `[0, 1]`.
    pub fn fermion_commuting(&mut self, modes: usize) -> CMat {
        let a: Vec<f64> = (0..modes).map(|_| self.uniform(0.05, 0.95)).collect();
        let b: Vec<f64> = a.iter().map(|&x| x.min(1.0 - x) * self.uniform(-0.95, 0.95)).collect();
        self.fermion_blocks(&a, &b)
    }

    fn fermion_blocks(&mut self, a: &[f64], b: &[f64]) -> CMat {
        let n = 2 * a.len();
        let mut c = CMat::zeros(n, n);
        for (j, (&x, &y)) in a.iter().zip(b).enumerate() {
            let p = 2 * j;
            c[(p, p)] = Complex64::new(x, 0.0);
            c[(p + 1, p + 1)] = Complex64::new(x, 0.0);
            c[(p, p + 1)] = Complex64::new(0.0, y);
            c[(p + 1, p)] = Complex64::new(0.0, -y);
        }
        let o = linalg::to_complex(&self.orthogonal(n));
        linalg::hermitize(&(&o * c * o.transpose()))
    }
}
