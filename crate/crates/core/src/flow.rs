//! The scaling flow `S ↦ S^(r) = f_r(S, conj S)`.
//!
//! In terms of the ratio operator `M` of `S`, `S^(r)` is represented on the
//! quotient by `φ_r(M)` with `φ_r(s) = s^r (2s-1)/(s^r - (1-s)^r)`. The flow
//! keeps the alternating form, composes multiplicatively in `r`, fixes exactly
//! the extremal forms and decreases in the Loewner order towards
//! `S^(∞) = (2M - 1)_+`.
//!
//! On non-boundary forms the flow rescales the one-particle generator
//! `h = log((1-M)/M)`: the ratio operator of `S^(r)` is
//! `M^r / (M^r + (1-M)^r)`, i.e. `h ↦ r h`.

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::{self, CMat, HermEigen};
use crate::pw::{self, FormFunction};
use crate::star::{CovarianceForm, RatioOperator};
use rayon::prelude::*;
use serde::Serialize;

/// Threshold on the smallest eigenvalue of a Loewner difference.
pub const LOEWNER_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FlowPoint {
    pub r: f64,
    pub form: CovarianceForm,
}

impl FlowPoint {
    /// Largest entry of `sigma(S^(r)) - sigma(S)`.
    pub fn sigma_deviation(&self, source: &CovarianceForm) -> f64 {
        linalg::max_abs_real(&(self.form.sigma() - source.sigma()))
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveR(r))
    }
}

pub fn flow(form: &CovarianceForm, r: f64) -> Result<FlowPoint> {
    check_r(r)?;
    let matrix = pw::pw_apply(&FormFunction::flow(r), form)?;
    Ok(FlowPoint { r, form: form.derive(matrix)? })
}

/// Largest entry of `(S^(a))^(b) - S^(ab)`.
pub fn semigroup_check(form: &CovarianceForm, a: f64, b: f64) -> Result<f64> {
    let twice = flow(&flow(form, a)?.form, b)?;
    let once = flow(form, a * b)?;
    Ok(linalg::max_abs(&(twice.form.matrix() - once.form.matrix())))
}

/// `S^(∞)(x, y) = ([x] | (2M - 1)_+ [y])`.
pub fn freeze_limit(form: &CovarianceForm) -> Result<CovarianceForm> {
    let ratio = form.ratio_operator();
    let cut = ratio.apply(|s| (2.0 * s - 1.0).max(0.0));
    form.derive(ratio.to_form(&cut))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub r: f64,
    /// Spectrum of the operator representing `S^(r)` against `S + conj S`.
    pub eigenvalues: Vec<f64>,
    /// `|S^(r) - S^(∞)|_F`.
    pub dist_to_limit: f64,
    /// `|M_r (1 - M_r)|` (operator norm), `M_r` the ratio operator of `S^(r)`,
    /// from `M_r = M^r / (M^r + (1-M)^r)`.
    pub extremality_residual: f64,
}

impl TrajectoryRecord {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<FlowPoint>,
    pub records: Vec<TrajectoryRecord>,
    /// Smallest eigenvalue of `S^(r_k) - S^(r_{k+1})` in quotient coordinates.
    pub step_min_eigenvalues: Vec<f64>,
}

impl Trajectory {
    /// Every step decreases in the Loewner order (up to `LOEWNER_TOL`).
    pub fn loewner_decreasing(&self) -> bool {
        self.step_min_eigenvalues.iter().all(|&m| m > -LOEWNER_TOL)
    }

    /// Strictly decreasing until the distance underflows to zero.
    pub fn distances_decreasing(&self) -> bool {
        self.records.windows(2).all(|w| {
            let (a, b) = (w[0].dist_to_limit, w[1].dist_to_limit);
            b < a || (a == 0.0 && b == 0.0)
        })
    }
}

/// Flow points along an ascending grid, with distances to `S^(∞)` and
/// Loewner steps. Points are evaluated independently.
pub fn flow_trajectory(form: &CovarianceForm, grid: &[f64]) -> Result<Trajectory> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("r-grid is empty".into()));
    }
    for &r in grid {
        check_r(r)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("r-grid must be strictly ascending".into()));
    }
    let ratio = form.ratio_operator();
    let points: Vec<FlowPoint> = grid.par_iter().map(|&r| flow(form, r)).collect::<Result<_>>()?;
    let quotient: Vec<CMat> = points.iter().map(|p| linalg::hermitize(&ratio.to_quotient(p.form.matrix()))).collect();
    let records = grid
        .iter()
        .zip(&quotient)
        .map(|(&r, q)| {
            let eigenvalues = HermEigen::new(q).values;
            // spectral form of S^(r) - S^(∞), free of cancellation at large r
            let gap = ratio.apply(|s| kernel::freeze_gap(r, s));
            let dist_to_limit = linalg::frobenius(&ratio.to_form(&gap));
            let extremality_residual = ratio
                .spectrum()
                .iter()
                .map(|&s| {
                    let p = kernel::ratio_power(r, kernel::snap_unit(s));
                    p * (1.0 - p)
                })
                .fold(0.0, f64::max);
            TrajectoryRecord { r, eigenvalues, dist_to_limit, extremality_residual }
        })
        .collect();
    let step_min_eigenvalues = quotient.windows(2).map(|w| linalg::min_eigenvalue(&(&w[0] - &w[1]))).collect();
    Ok(Trajectory { points, records, step_min_eigenvalues })
}

/// `h = log((1 - M)/M)` on the quotient of a non-boundary form.
#[derive(Debug, Clone)]
pub struct Generator {
    pub h: CMat,
    pub non_boundary: bool,
    eigen: HermEigen,
}

impl Generator {
    pub fn eigen(&self) -> &HermEigen {
        &self.eigen
    }

    /// `(1 + e^h)^{-1}`, which reproduces the ratio operator.
    pub fn ratio(&self) -> CMat {
        self.eigen.apply(|x| 1.0 / (1.0 + x.exp()))
    }
}

fn boundary_check(ratio: &RatioOperator, tol: f64) -> Result<()> {
    match ratio.spectrum().iter().find(|&&s| s <= tol || s >= 1.0 - tol || (tol == 0.0 && (s <= 0.0 || s >= 1.0))) {
        Some(&eigenvalue) => Err(Error::BoundarySpectrum { eigenvalue }),
        None => Ok(()),
    }
}

pub fn generator(form: &CovarianceForm) -> Result<Generator> {
    generator_with_tol(form, form.tolerances().spec)
}

fn generator_with_tol(form: &CovarianceForm, tol: f64) -> Result<Generator> {
    let ratio = form.ratio_operator();
    boundary_check(&ratio, tol)?;
    let eig = ratio.eigen();
    let values: Vec<f64> = eig.values.iter().map(|&s| kernel::log_odds(s)).collect();
    let eigen = HermEigen { values, vectors: eig.vectors.clone() };
    let h = eigen.apply(|x| x);
    Ok(Generator { h, non_boundary: true, eigen })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmsReport {
    /// `|M_r - M^r/(M^r + (1-M)^r)|`, both in the quotient coordinates of `S`.
    pub ratio_deviation: f64,
    /// `|h_r - r h|`, both in the quotient coordinates of `S`.
    pub generator_deviation: f64,
}

impl KmsReport {
    pub fn max_deviation(&self) -> f64 {
        self.ratio_deviation.max(self.generator_deviation)
    }
}

/// Compares the ratio operator and generator of `S^(r)`, computed from the
/// flowed form with its own quotient construction, against the spectral
/// rescalings `M^r/(M^r + (1-M)^r)` and `r h` of `S`.
pub fn kms_rescaling_check(form: &CovarianceForm, r: f64) -> Result<KmsReport> {
    check_r(r)?;
    let ratio = form.ratio_operator();
    let tol = form.tolerances().spec;
    boundary_check(&ratio, tol)?;
    if let Some(&eigenvalue) = ratio.spectrum().iter().find(|&&s| (s - 0.5).abs() < tol) {
        return Err(Error::CenterNotFree { eigenvalue });
    }
    let h = generator(form)?;

    // flowed form, expressed in the orthonormal quotient coordinates of S
    let flowed = flow(form, r)?.form;
    let tq = linalg::hermitize(&ratio.to_quotient(flowed.matrix()));
    let t_form = CovarianceForm::from_matrix(tq)?;
    let t_ratio = t_form.ratio_operator();
    // operator on S-coordinates: lift_T M_T lift_T^{-1}
    let lt = linalg::to_complex(t_ratio.lift());
    let lt_inv = lt.clone().try_inverse().ok_or(Error::DegenerateRealPart { min_eigenvalue: 0.0 })?;
    let m_r = &lt * t_ratio.matrix() * &lt_inv;
    // the flowed spectrum may approach {0, 1} for large r; only exact
    // boundary values are excluded here
    let t_gen = generator_with_tol(&t_form, 0.0)?;
    let h_r = &lt * &t_gen.h * &lt_inv;

    let expected_ratio = ratio.apply(|s| kernel::ratio_power(r, s));
    let expected_h = h.h.scale(r);
    Ok(KmsReport {
        ratio_deviation: linalg::max_abs(&(m_r - expected_ratio)),
        generator_deviation: linalg::max_abs(&(h_r - expected_h)),
    })
}

/// `U_t = exp(i t h)` on the quotient `V_S^C`.
pub fn one_particle_group(form: &CovarianceForm, t: f64) -> Result<CMat> {
    let g = generator(form)?;
    Ok(g.eigen.apply_complex(|x| num_complex::Complex64::new(0.0, t * x).exp()))
}

/// Alternating form `σ_S = -i(2M - 1)` in quotient coordinates.
pub fn quotient_sigma(form: &CovarianceForm) -> CMat {
    let m = form.ratio_operator().matrix().clone();
    let n = m.nrows();
    (m.scale(2.0) - linalg::identity(n)).map(|z| z * -linalg::I)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::random::InstanceGen;
    use num_complex::Complex64;

    fn mode(mu: f64) -> CovarianceForm {
        let c = |re, im| Complex64::new(re, im);
        CovarianceForm::from_matrix(CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, mu), c(0.0, -mu), c(0.5, 0.0)])).unwrap()
    }

    #[test]
    fn flow_at_one_is_identity() {
        let mut gen = InstanceGen::new(1);
        let s = gen.well_conditioned(5);
        let p = flow(&s, 1.0).unwrap();
        assert!(max_abs(&(p.form.matrix() - s.matrix())) < 1e-12);
    }

    #[test]
    fn real_form_scales_by_inverse_r() {
        let s = CovarianceForm::from_matrix(CMat::from_row_slice(
            2,
            2,
            &[Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)],
        ))
        .unwrap();
        for r in [0.3, 2.0, 7.0] {
            let p = flow(&s, r).unwrap();
            assert!(max_abs(&(p.form.matrix() - s.matrix().unscale(r))) < 1e-13);
        }
    }

    #[test]
    fn single_mode_r2() {
        let s = mode(0.3);
        let p = flow(&s, 2.0).unwrap();
        // R = I, so S^(2) is φ_2(M) = M^2 directly
        let m = s.ratio_operator();
        let sp = HermEigen::new(p.form.matrix()).values;
        assert!((sp[0] - 0.04).abs() < 1e-14 && (sp[1] - 0.64).abs() < 1e-14);
        let new_ratio = p.form.ratio_operator();
        assert!((new_ratio.spectrum()[0] - 1.0 / 17.0).abs() < 1e-14);
        assert!((new_ratio.spectrum()[1] - 16.0 / 17.0).abs() < 1e-14);
        assert!(max_abs(&(p.form.matrix() - m.matrix() * m.matrix())) < 1e-14);
    }

    #[test]
    fn non_positive_r_rejected() {
        let s = mode(0.3);
        assert!(matches!(flow(&s, 0.0), Err(Error::NonPositiveR(_))));
        assert!(matches!(flow(&s, -1.0), Err(Error::NonPositiveR(_))));
        assert!(matches!(flow_trajectory(&s, &[1.0, -2.0]), Err(Error::NonPositiveR(_))));
        assert!(flow_trajectory(&s, &[2.0, 1.0]).is_err());
        assert!(flow_trajectory(&s, &[]).is_err());
    }

    #[test]
    fn semigroup_examples() {
        let s = mode(0.3);
        assert!(semigroup_check(&s, 1.0, 1.0).unwrap() < 1e-14);
        assert!(semigroup_check(&s, 2.0, 3.0).unwrap() < 1e-10);
        let mut gen = InstanceGen::new(2);
        let s6 = gen.center_free(3, 0.01, 0.49);
        assert!(semigroup_check(&s6, 0.5, 4.0).unwrap() < 1e-8);
    }

    #[test]
    fn freeze_limit_examples() {
        let s = mode(0.3);
        let lim = freeze_limit(&s).unwrap();
        let sp = HermEigen::new(lim.matrix()).values;
        assert!(sp[0].abs() < 1e-14 && (sp[1] - 0.6).abs() < 1e-14);
        assert!(lim.classify().is_extremal);

        let ext = mode(0.5);
        let lim = freeze_limit(&ext).unwrap();
        assert!(max_abs(&(lim.matrix() - ext.matrix())) < 1e-14);
        for r in [0.5, 2.0, 7.0] {
            assert!(max_abs(&(flow(&ext, r).unwrap().form.matrix() - ext.matrix())) < 1e-12);
        }

        let real = CovarianceForm::from_matrix(CMat::identity(3, 3)).unwrap();
        assert!(max_abs(freeze_limit(&real).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn trajectory_single_mode_converges() {
        let s = mode(0.3);
        let grid: Vec<f64> = (0..=5).map(|k| 2f64.powi(k)).collect();
        let traj = flow_trajectory(&s, &grid).unwrap();
        assert!(traj.distances_decreasing());
        assert!(traj.loewner_decreasing());
        let one = flow_trajectory(&s, &[1.0]).unwrap();
        let lim = freeze_limit(&s).unwrap();
        let d = linalg::frobenius(&(s.matrix() - lim.matrix()));
        assert!((one.records[0].dist_to_limit - d).abs() < 1e-14);
    }

    #[test]
    fn high_temperature_diverges() {
        let mut gen = InstanceGen::new(4);
        let s = gen.center_free(2, 0.1, 0.4);
        let traj = flow_trajectory(&s, &[0.01, 0.1]).unwrap();
        assert!(traj.records[0].lambda_max() > traj.records[1].lambda_max());
    }

    #[test]
    fn generator_examples() {
        let g = generator(&mode(0.3)).unwrap();
        let v = &g.eigen().values;
        // eigenvectors follow M's ascending order: 0.2 then 0.8
        assert!((v[0] - 4f64.ln()).abs() < 1e-13 && (v[1] + 4f64.ln()).abs() < 1e-13);
        assert!(max_abs(&(linalg::conj(&g.h) + &g.h)) < 1e-13);
        assert!(max_abs(&(g.ratio() - mode(0.3).ratio_operator().matrix())) < 1e-14);

        let real = CovarianceForm::from_matrix(CMat::identity(2, 2)).unwrap();
        assert!(max_abs(&generator(&real).unwrap().h) < 1e-15);

        assert!(matches!(generator(&mode(0.5)), Err(Error::BoundarySpectrum { .. })));
    }

    #[test]
    fn kms_examples() {
        let rep = kms_rescaling_check(&mode(0.3), 2.0).unwrap();
        assert!(rep.max_deviation() < 1e-12);
        assert!(kms_rescaling_check(&mode(0.3), 1.0).unwrap().max_deviation() < 1e-13);
        let mut gen = InstanceGen::new(9);
        let s = gen.center_free(2, 0.05, 0.45);
        assert!(kms_rescaling_check(&s, 0.5).unwrap().max_deviation() < 1e-8);
        let real = CovarianceForm::from_matrix(CMat::identity(2, 2)).unwrap();
        assert!(matches!(kms_rescaling_check(&real, 2.0), Err(Error::CenterNotFree { .. })));
        assert!(matches!(kms_rescaling_check(&mode(0.5), 2.0), Err(Error::BoundarySpectrum { .. })));
    }

    #[test]
    fn one_particle_group_examples() {
        let s = mode(0.3);
        let u0 = one_particle_group(&s, 0.0).unwrap();
        assert!(max_abs(&(u0 - linalg::identity(2))) < 1e-15);
        let t = 0.7;
        let u = one_particle_group(&s, t).unwrap();
        let m = s.ratio_operator();
        let low = m.eigen().vectors.column(0).clone_owned(); // eigenvalue 0.2
        let high = m.eigen().vectors.column(1).clone_owned(); // eigenvalue 0.8
        let l4 = 4f64.ln();
        let expect_low = low.scale(1.0).map(|z| z * Complex64::new(0.0, t * l4).exp());
        let expect_high = high.map(|z| z * Complex64::new(0.0, -t * l4).exp());
        assert!((&u * &low - expect_low).norm() < 1e-13);
        assert!((&u * &high - expect_high).norm() < 1e-13);
        // real, unitary, σ-preserving
        assert!(max_abs(&(linalg::conj(&u) - &u)) < 1e-13);
        assert!(max_abs(&(u.adjoint() * &u - linalg::identity(2))) < 1e-13);
        let sig = quotient_sigma(&s);
        assert!(max_abs(&(u.transpose() * &sig * &u - &sig)) < 1e-13);
    }
}
