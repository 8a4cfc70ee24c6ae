//! Fermionic scaling `C ↦ C^r / (C^r + C̄^r)` on covariance operators
//! `0 ≤ C ≤ 1`, by joint spectral calculus of the commuting pair `(C, C̄)`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, HermEigen};
use serde::Serialize;

/// Eigenvalues closer than this to 1/2 are reported by `fermion_limits`.
pub const THRESHOLD_BAND: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct FermionCovariance {
    matrix: CMat,
    tol: f64,
}

/// Joint eigenbasis of `C` and `conj C`: `C v = c v`, `conj(C) v = d v`.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    pub vectors: CMat,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl FermionCovariance {
    pub fn new(matrix: CMat) -> Result<Self> {
        Self::with_tolerance(matrix, 1e-10)
    }

    /// `tol` is relative to `max(1, |C|_F)`.
    pub fn with_tolerance(matrix: CMat, tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: "non-empty square matrix".into(), found: format!("{}x{}", n, matrix.ncols()) });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let tol = tol * linalg::frobenius(&matrix).max(1.0);
        let dev = linalg::max_abs(&(&matrix - matrix.adjoint()));
        if dev > tol {
            return Err(Error::NotHermitian { deviation: dev, tolerance: tol });
        }
        let matrix = linalg::hermitize(&matrix);
        let eig = HermEigen::new(&matrix);
        if eig.min() < -tol {
            return Err(Error::OutOfUnitInterval { eigenvalue: eig.min() });
        }
        if eig.max() > 1.0 + tol {
            return Err(Error::OutOfUnitInterval { eigenvalue: eig.max() });
        }
        let cbar = linalg::conj(&matrix);
        let comm = linalg::max_abs(&(&matrix * &cbar - &cbar * &matrix));
        if comm > tol {
            return Err(Error::NonCommuting { deviation: comm });
        }
        Ok(FermionCovariance { matrix, tol })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `|conj(C) - (1 - C)|`.
    pub fn complementarity_deviation(&self) -> f64 {
        let n = self.dim();
        linalg::max_abs(&(linalg::conj(&self.matrix) + &self.matrix - linalg::identity(n)))
    }

    /// Eigendecomposition of `C`, refined inside each eigenvalue cluster so
    /// that `conj C` is diagonal too.
    pub fn joint_spectrum(&self) -> JointSpectrum {
        let n = self.dim();
        let eig = HermEigen::new(&self.matrix);
        let cbar = linalg::conj(&self.matrix);
        let gap = self.tol.max(1e-9);
        let mut vectors = CMat::zeros(n, n);
        let (mut c, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && eig.values[end] - eig.values[end - 1] <= gap {
                end += 1;
            }
            let v = eig.vectors.columns(start, end - start).clone_owned();
            let inner = linalg::hermitize(&(v.adjoint() * &cbar * &v));
            let sub = HermEigen::new(&inner);
            let rotated = &v * &sub.vectors;
            for k in 0..end - start {
                let col = rotated.column(k);
                let ck = (col.adjoint() * &self.matrix * col)[(0, 0)].re;
                vectors.set_column(start + k, &col);
                c.push(ck.clamp(0.0, 1.0));
                d.push(sub.values[k].clamp(0.0, 1.0));
            }
            start = end;
        }
        JointSpectrum { vectors, c, d }
    }
}

fn diag_in(vectors: &CMat, values: &[f64]) -> CMat {
    let mut scaled = vectors.clone();
    for (j, &x) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(x);
    }
    linalg::hermitize(&(scaled * vectors.adjoint()))
}

/// `c^r / (c^r + d^r)`; `None` when `c = d = 0`.
pub fn scaled_value(r: f64, c: f64, d: f64) -> Option<f64> {
    match (c > 0.0, d > 0.0) {
        (false, false) => None,
        (true, false) => Some(1.0),
        (false, true) => Some(0.0),
        (true, true) => Some(1.0 / (1.0 + (r * (d.ln() - c.ln())).exp())),
    }
}

pub fn fermion_flow(cov: &FermionCovariance, r: f64) -> Result<FermionCovariance> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonPositiveR(r));
    }
    let joint = cov.joint_spectrum();
    let floor = cov.tol;
    let values = joint
        .c
        .iter()
        .zip(&joint.d)
        .map(|(&c, &d)| {
            let c = if c <= floor { 0.0 } else { c };
            let d = if d <= floor { 0.0 } else { d };
            scaled_value(r, c, d).ok_or(Error::SingularDenominator)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FermionCovariance { matrix: diag_in(&joint.vectors, &values), tol: cov.tol })
}

#[derive(Debug, Clone)]
pub struct FermionLimits {
    /// `r → 0`: `0` at `c = 0`, `1/2` inside, `1` at `c = 1`.
    pub high_temp: CMat,
    /// `r → ∞`: `0` below 1/2, `1/2` at 1/2, `1` above.
    pub low_temp: CMat,
    /// Eigenvalues within `THRESHOLD_BAND` of 1/2.
    pub near_threshold: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FermionLimitSpectra {
    pub eigenvalues: Vec<f64>,
    pub high_temp: Vec<f64>,
    pub low_temp: Vec<f64>,
    pub near_threshold: Vec<f64>,
}

/// `lim_{r→0} c^r / (c^r + (1-c)^r)`.
pub fn high_temp_value(c: f64, tol: f64) -> f64 {
    if c <= tol {
        0.0
    } else if c >= 1.0 - tol {
        1.0
    } else {
        0.5
    }
}

/// `lim_{r→∞} c^r / (c^r + (1-c)^r)`.
pub fn low_temp_value(c: f64, tol: f64) -> f64 {
    if (c - 0.5).abs() <= tol {
        0.5
    } else if c < 0.5 {
        0.0
    } else {
        1.0
    }
}

/// Limit tables, applied on the spectrum of `C`; needs `conj C = 1 - C`.
/// `tol` decides which eigenvalues count as `0`, `1/2` or `1`.
pub fn fermion_limits(cov: &FermionCovariance, tol: f64) -> Result<FermionLimits> {
    let spectra = fermion_limit_spectra(cov, tol)?;
    let eig = HermEigen::new(cov.matrix());
    Ok(FermionLimits {
        high_temp: diag_in(&eig.vectors, &spectra.high_temp),
        low_temp: diag_in(&eig.vectors, &spectra.low_temp),
        near_threshold: spectra.near_threshold,
    })
}

pub fn fermion_limit_spectra(cov: &FermionCovariance, tol: f64) -> Result<FermionLimitSpectra> {
    let dev = cov.complementarity_deviation();
    if dev > cov.tol {
        return Err(Error::NotComplementary { deviation: dev });
    }
    let eigenvalues = HermEigen::new(cov.matrix()).values;
    let high_temp = eigenvalues.iter().map(|&c| high_temp_value(c, tol)).collect();
    let low_temp = eigenvalues.iter().map(|&c| low_temp_value(c, tol)).collect();
    let near_threshold = eigenvalues.iter().copied().filter(|c| (c - 0.5).abs() < THRESHOLD_BAND).collect();
    Ok(FermionLimitSpectra { eigenvalues, high_temp, low_temp, near_threshold })
}
