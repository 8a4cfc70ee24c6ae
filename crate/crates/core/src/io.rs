//! Shared matrix format: `{"dim": n, "re": [[...]], "im": [[...]] | null}`.

use crate::error::{Error, Result};
use crate::linalg::CMat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Option<Vec<Vec<f64>>>,
}

fn check_rows(rows: &[Vec<f64>], dim: usize, part: &str) -> Result<()> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        let found = format!("{} rows of lengths {:?}", rows.len(), rows.iter().map(Vec::len).collect::<Vec<_>>());
        return Err(Error::DimensionMismatch { expected: format!("{part}: {dim}x{dim}"), found });
    }
    Ok(())
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMat> {
        if self.dim == 0 {
            return Err(Error::EmptySpace);
        }
        check_rows(&self.re, self.dim, "re")?;
        if let Some(im) = &self.im {
            check_rows(im, self.dim, "im")?;
        }
        Ok(CMat::from_fn(self.dim, self.dim, |i, j| {
            Complex64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |m| m[i][j]))
        }))
    }

    /// `im` is written as `null` when every imaginary part is zero.
    pub fn from_matrix(m: &CMat) -> Self {
        let n = m.nrows();
        let re = (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect();
        let real = m.iter().all(|z| z.im == 0.0);
        let im = (!real).then(|| (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect());
        MatrixJson { dim: n, re, im }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_complex_and_real() {
        let m = CMat::from_fn(2, 2, |i, j| Complex64::new(i as f64 + 0.5, j as f64 - i as f64));
        let j = MatrixJson::from_matrix(&m);
        assert!(j.im.is_some());
        assert_eq!(j.to_matrix().unwrap(), m);
        let real = CMat::identity(3, 3);
        let j = MatrixJson::from_matrix(&real);
        assert!(j.im.is_none());
        assert_eq!(j.to_matrix().unwrap(), real);
    }

    #[test]
    fn ragged_rejected() {
        let j = MatrixJson { dim: 2, re: vec![vec![1.0, 0.0], vec![0.0]], im: None };
        assert!(matches!(j.to_matrix(), Err(Error::DimensionMismatch { .. })));
        let j = MatrixJson { dim: 0, re: vec![], im: None };
        assert!(matches!(j.to_matrix(), Err(Error::EmptySpace)));
    }
}
