//! Gaussian sector of the twisted convolution algebra `L¹(V, σ)`.
//!
//! Elements are `x ↦ w e^{-xᵀQx/2}`. The product is
//! `(fg)(x) = ∫ f(y) g(x-y) e^{iσ(x,y)/2} dy` for a fixed reference measure,
//! and the trace is `τ(f) = f(0) = w`.
//!
//! In a symplectic block with `σ(q, p) = 2μ` and measure `2m dp dq`, writing
//! `Q = (μ/a) I`, two Gaussians multiply by `a∗b = (a+b)/(1+ab)` with weight
//! factor `4πm ab / (μ(a+b))`. With `a = tanh θ` this is the tanh addition
//! law, which gives the closed-form powers
//!
//! `ρ_S^r = (4πm/μ)^{r-1} sinh^r θ / sinh(rθ) · ρ_{S^(r)}`,  `tanh θ = 2μ`.
//!
//! Directions where `σ` vanishes carry ordinary convolution.

use crate::error::{Error, Result};
use crate::flow;
use crate::kernel;
use crate::linalg::{self, RMat, SymEigen};
use crate::star::{CovarianceForm, SymplecticNormalForm};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Reference Lebesgue measure on `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Symplectic volume of `σ`; needs `σ` non-degenerate.
    Liouville,
    /// Unit volume on cubes orthonormal for `S + conj S`.
    Euclidean,
    /// `(2m)^{n/2}` times the Euclidean measure, i.e. `2m dp dq` per block.
    Explicit(f64),
}

impl Measure {
    /// Block density `m` of a mode with parameter `mu`.
    fn block_density(self, mu: f64) -> f64 {
        match self {
            Measure::Liouville => mu,
            Measure::Euclidean => 0.5,
            Measure::Explicit(m) => m,
        }
    }

    /// Density per coordinate on a direction where `σ` vanishes.
    fn line_density(self) -> Option<f64> {
        match self {
            Measure::Liouville => None,
            Measure::Euclidean => Some(1.0),
            Measure::Explicit(m) => Some((2.0 * m).sqrt()),
        }
    }

    pub fn name(self) -> String {
        match self {
            Measure::Liouville => "liouville".into(),
            Measure::Euclidean => "euclidean".into(),
            Measure::Explicit(m) => format!("explicit({m})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianElement {
    pub q: RMat,
    pub weight: f64,
    pub measure: Measure,
}

impl GaussianElement {
    pub fn new(q: RMat, weight: f64, measure: Measure) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: "non-empty square matrix".into(),
                found: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        let scale = linalg::frobenius_real(&q);
        let asym = linalg::max_abs_real(&(&q - q.transpose()));
        if asym > 1e-10 * scale.max(1.0) {
            return Err(Error::NotHermitian { deviation: asym, tolerance: 1e-10 * scale.max(1.0) });
        }
        let q = (&q + q.transpose()) * 0.5;
        let min = SymEigen::new(&q).values[0];
        if min <= 0.0 {
            return Err(Error::NotPositive { min_eigenvalue: min, tolerance: 0.0 });
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight must be positive, got {weight}")));
        }
        Ok(GaussianElement { q, weight, measure })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.q[(i, j)] * x[j];
            }
        }
        self.weight * (-0.5 * acc).exp()
    }

    /// Same element in the coordinates `x = B ξ`.
    pub fn pulled_back(&self, basis: &RMat) -> GaussianElement {
        let q = basis.transpose() * &self.q * basis;
        GaussianElement { q: (&q + q.transpose()) * 0.5, weight: self.weight, measure: self.measure }
    }

    pub fn q_eigenvalues(&self) -> Vec<f64> {
        SymEigen::new(&self.q).values
    }
}

/// `τ(f) = f(0)`.
pub fn trace(f: &GaussianElement) -> f64 {
    f.weight
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Block {
    /// Pair `(p, q)` with `σ(q, p) = 2 mu` and measure `2 density dp dq`.
    Symplectic { mu: f64, density: f64 },
    /// One coordinate with `σ = 0` and measure `density dx`.
    Commutative { density: f64 },
}

impl Block {
    fn size(&self) -> usize {
        match self {
            Block::Symplectic { .. } => 2,
            Block::Commutative { .. } => 1,
        }
    }
}

/// Block decomposition of `(V, σ, dx)` in normal-form coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedContext {
    pub blocks: Vec<Block>,
    pub measure: Measure,
}

impl TwistedContext {
    /// Context of the normal-form coordinates of `form`: commutative
    /// directions first, then the modes in normal-form order.
    pub fn for_form(form: &CovarianceForm, measure: Measure) -> Result<(Self, SymplecticNormalForm)> {
        let nf = form.normal_form()?;
        let ctx = Self::from_normal_form(&nf, measure)?;
        Ok((ctx, nf))
    }

    pub fn from_normal_form(nf: &SymplecticNormalForm, measure: Measure) -> Result<Self> {
        if let Measure::Explicit(m) = measure {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidArgument(format!("measure density must be positive, got {m}")));
            }
        }
        let mut blocks = Vec::with_capacity(nf.degenerate_dim + nf.modes());
        if nf.degenerate_dim > 0 {
            let density = measure.line_density().ok_or(Error::MeasureMismatch { degenerate_dim: nf.degenerate_dim })?;
            blocks.extend((0..nf.degenerate_dim).map(|_| Block::Commutative { density }));
        }
        blocks.extend(nf.mus.iter().map(|&mu| Block::Symplectic { mu, density: measure.block_density(mu) }));
        Ok(TwistedContext { blocks, measure })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::size).sum()
    }

    /// Matrix of `σ(x, y) = xᵀ σ y`.
    pub fn sigma(&self) -> RMat {
        let n = self.dim();
        let mut out = RMat::zeros(n, n);
        let mut at = 0;
        for b in &self.blocks {
            if let Block::Symplectic { mu, .. } = *b {
                out[(at + 1, at)] = 2.0 * mu;
                out[(at, at + 1)] = -2.0 * mu;
            }
            at += b.size();
        }
        out
    }

    /// Density of the reference measure against `dx` in these coordinates.
    pub fn density(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match *b {
                Block::Symplectic { density, .. } => 2.0 * density,
                Block::Commutative { density } => density,
            })
            .product()
    }
}

const ISOTROPY_TOL: f64 = 1e-9;

fn block_parameter(q: &RMat, at: usize, block: &Block, index: usize) -> Result<f64> {
    let n = q.nrows();
    let size = block.size();
    let scale = q[(at, at)].abs();
    for i in at..at + size {
        for j in 0..n {
            if (at..at + size).contains(&j) {
                continue;
            }
            if q[(i, j)].abs() > ISOTROPY_TOL * scale {
                return Err(Error::BlockMismatch { block: index });
            }
        }
    }
    if size == 2 && ((q[(at, at)] - q[(at + 1, at + 1)]).abs() > ISOTROPY_TOL * scale || q[(at, at + 1)].abs() > ISOTROPY_TOL * scale) {
        return Err(Error::BlockMismatch { block: index });
    }
    Ok(q[(at, at)])
}

/// Closed-form product of two Gaussians whose quadratic forms are
/// block-diagonal and isotropic in the coordinates of `ctx`.
pub fn twisted_convolve_gaussian(f: &GaussianElement, g: &GaussianElement, ctx: &TwistedContext) -> Result<GaussianElement> {
    let n = ctx.dim();
    if f.dim() != n || g.dim() != n {
        return Err(Error::DimensionMismatch { expected: format!("{n}"), found: format!("{} and {}", f.dim(), g.dim()) });
    }
    if f.measure != g.measure || f.measure != ctx.measure {
        return Err(Error::InvalidArgument(format!(
            "measure tags differ: {}, {} in context {}",
            f.measure.name(),
            g.measure.name(),
            ctx.measure.name()
        )));
    }
    let mut q = RMat::zeros(n, n);
    let mut weight = f.weight * g.weight;
    let mut at = 0;
    for (index, block) in ctx.blocks.iter().enumerate() {
        let qf = block_parameter(&f.q, at, block, index)?;
        let qg = block_parameter(&g.q, at, block, index)?;
        match *block {
            Block::Symplectic { mu, density } => {
                let (a, b) = (mu / qf, mu / qg);
                let ab = (a + b) / (1.0 + a * b);
                weight *= 4.0 * PI * density * a * b / (mu * (a + b));
                q[(at, at)] = mu / ab;
                q[(at + 1, at + 1)] = mu / ab;
            }
            Block::Commutative { density } => {
                weight *= density * (2.0 * PI / (qf + qg)).sqrt();
                q[(at, at)] = qf * qg / (qf + qg);
            }
        }
        at += block.size();
    }
    GaussianElement::new(q, weight, f.measure)
}

/// Per-mode `(μ_j, θ_j)` with `tanh θ_j = 2μ_j`; `θ = ∞` for `μ = 1/2`.
pub fn mode_angles(nf: &SymplecticNormalForm, tol: f64) -> Vec<(f64, f64)> {
    nf.mus.iter().map(|&mu| (mu, if mu >= 0.5 - tol { f64::INFINITY } else { (2.0 * mu).atanh() })).collect()
}

/// `ln sinh x` for `x > 0`.
fn ln_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

/// `ln` of the per-mode power weight `(4πm/μ)^{r-1} sinh^r θ / sinh(rθ)`.
fn ln_mode_weight(mu: f64, theta: f64, r: f64, m: f64) -> f64 {
    let prefactor = (r - 1.0) * (4.0 * PI * m / mu).ln();
    if theta.is_infinite() {
        prefactor + (1.0 - r) * std::f64::consts::LN_2
    } else {
        prefactor + r * ln_sinh(theta) - ln_sinh(r * theta)
    }
}

/// `ln` of the factor `c^{r-1} (2π)^{(r-1)/2} r^{-1/2} s^{(1-r)/2}` at `s = 1/2`.
fn ln_line_weight(r: f64, c: f64) -> f64 {
    (r - 1.0) * c.ln() + 0.5 * (r - 1.0) * (2.0 * PI).ln() - 0.5 * r.ln() + 0.5 * (r - 1.0) * std::f64::consts::LN_2
}

fn measure_check(form: &CovarianceForm, measure: Measure) -> Result<SymplecticNormalForm> {
    let nf = form.normal_form()?;
    TwistedContext::from_normal_form(&nf, measure)?;
    Ok(nf)
}

/// `w(r)` as a product over the normal-form modes and the directions where
/// `σ` vanishes.
pub fn power_weight_per_mode(form: &CovarianceForm, r: f64, measure: Measure) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonPositiveR(r));
    }
    let nf = measure_check(form, measure)?;
    let mut ln_w = 0.0;
    for (mu, theta) in mode_angles(&nf, form.tolerances().spec) {
        ln_w += ln_mode_weight(mu, theta, r, measure.block_density(mu));
    }
    if let Some(c) = measure.line_density() {
        ln_w += nf.degenerate_dim as f64 * ln_line_weight(r, c);
    }
    Ok(ln_w.exp())
}

/// `w(r)` from the determinant over the ratio-operator spectrum:
/// `(2π)^{(r-1)n/2} det(|S-S̄|^r / |S^r - S̄^r|)^{1/2}` (Liouville) or
/// `(2π)^{(r-1)n/2} det((S+S̄)^{r-1} |S-S̄| / |S^r - S̄^r|)^{1/2}` (Euclidean).
pub fn power_weight_global(form: &CovarianceForm, r: f64, measure: Measure) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonPositiveR(r));
    }
    measure_check(form, measure)?;
    let ratio = form.ratio_operator();
    let n = ratio.dim() as f64;
    let mut ln_det = 0.0;
    for &m in ratio.spectrum() {
        if m <= 0.0 || m >= 1.0 {
            continue;
        }
        let u = kernel::log_odds(m);
        ln_det += match measure {
            Measure::Liouville => r * kernel::ln_abs_expm1(u) - kernel::ln_abs_expm1(r * u),
            _ => (1.0 - r) * m.ln() + kernel::ln_rel_expm1(u) - kernel::ln_rel_expm1(r * u) - r.ln(),
        };
    }
    let mut ln_w = 0.5 * (r - 1.0) * n * (2.0 * PI).ln() + 0.5 * ln_det;
    if let Measure::Explicit(m) = measure {
        ln_w += 0.5 * (r - 1.0) * n * (2.0 * m).ln();
    }
    Ok(ln_w.exp())
}

/// `ρ_S^r = w(r) ρ_{S^(r)}` with `ρ_T(x) = e^{-T(x,x)/2}` on real `x`.
pub fn density_power(form: &CovarianceForm, r: f64, measure: Measure) -> Result<GaussianElement> {
    let weight = power_weight_per_mode(form, r, measure)?;
    let flowed = flow::flow(form, r)?.form;
    GaussianElement::new(linalg::re(flowed.matrix()), weight, measure)
}

/// `ρ_S` itself (weight one).
pub fn density(form: &CovarianceForm, measure: Measure) -> Result<GaussianElement> {
    measure_check(form, measure)?;
    GaussianElement::new(linalg::re(form.matrix()), 1.0, measure)
}

/// Serializable summary of a density power.
#[derive(Debug, Clone, Serialize)]
pub struct DensityPowerRecord {
    pub r: f64,
    pub measure: String,
    /// `w(r) = τ(ρ_S^r)`, per-mode route.
    pub w: f64,
    /// `w(r)` from the determinant over the ratio spectrum.
    pub w_global: f64,
    pub q_eigenvalues: Vec<f64>,
    pub modes: Vec<ModeRecord>,
    pub degenerate_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeRecord {
    pub mu: f64,
    /// `None` for `μ = 1/2`.
    pub theta: Option<f64>,
}

pub fn density_power_record(form: &CovarianceForm, r: f64, measure: Measure) -> Result<DensityPowerRecord> {
    let element = density_power(form, r, measure)?;
    let nf = form.normal_form()?;
    Ok(DensityPowerRecord {
        r,
        measure: measure.name(),
        w: element.weight,
        w_global: power_weight_global(form, r, measure)?,
        q_eigenvalues: element.q_eigenvalues(),
        modes: mode_angles(&nf, form.tolerances().spec)
            .into_iter()
            .map(|(mu, t)| ModeRecord { mu, theta: t.is_finite().then_some(t) })
            .collect(),
        degenerate_dim: nf.degenerate_dim,
    })
}

/// Largest relative deviation between `ρ_S^r ρ_S^{r'}` (closed-form product
/// in normal-form coordinates) and `ρ_S^{r+r'}`, over `Q` and `w`.
pub fn power_semigroup_check(form: &CovarianceForm, r: f64, r2: f64, measure: Measure) -> Result<f64> {
    let (ctx, nf) = TwistedContext::for_form(form, measure)?;
    let f = density_power(form, r, measure)?.pulled_back(&nf.basis);
    let g = density_power(form, r2, measure)?.pulled_back(&nf.basis);
    let h = density_power(form, r + r2, measure)?.pulled_back(&nf.basis);
    let prod = twisted_convolve_gaussian(&f, &g, &ctx)?;
    let q_dev = linalg::max_abs_real(&(&prod.q - &h.q)) / linalg::max_abs_real(&h.q);
    let w_dev = (prod.weight - h.weight).abs() / h.weight;
    Ok(q_dev.max(w_dev))
}

/// Trapezoid grid for the brute-force product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    /// Nodes per axis.
    pub nodes: usize,
    /// Half-width of the domain in standard deviations of the integrand.
    pub half_width: f64,
    /// Largest accepted error estimate, relative to the largest value.
    pub tolerance: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { nodes: 256, half_width: 10.0, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct NumericProduct {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<Complex64>,
    /// Largest `|I_N - I_{N/2}|` relative to the largest `|I_N|`.
    pub error_estimate: f64,
}

fn trapezoid(f: &GaussianElement, g: &GaussianElement, sigma: &RMat, density: f64, x: [f64; 2], nodes: usize, half_width: f64) -> Complex64 {
    let qs = &f.q + &g.q;
    let inv = qs.clone().try_inverse().expect("positive definite");
    let gx = &g.q * nalgebra::DVector::from_column_slice(&x);
    let center = &inv * gx;
    let sd = SymEigen::new(&inv).values.iter().fold(0.0_f64, |a, &v| a.max(v.sqrt()));
    let len = half_width * sd;
    let h = 2.0 * len / (nodes - 1) as f64;
    let sx = [sigma[(0, 0)] * x[0] + sigma[(1, 0)] * x[1], sigma[(0, 1)] * x[0] + sigma[(1, 1)] * x[1]];
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..nodes {
        let wi = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
        let y0 = center[0] - len + i as f64 * h;
        for j in 0..nodes {
            let wj = if j == 0 || j == nodes - 1 { 0.5 } else { 1.0 };
            let y1 = center[1] - len + j as f64 * h;
            let y = [y0, y1];
            let d = [x[0] - y0, x[1] - y1];
            let val = f.eval(&y) * g.eval(&d);
            let phase = 0.5 * (sx[0] * y0 + sx[1] * y1);
            acc += Complex64::from_polar(wi * wj * val, phase);
        }
    }
    acc * (h * h * density)
}

/// `(fg)(x)` by tensor trapezoid quadrature, for `n = 2`.
pub fn twisted_convolve_numeric(
    f: &GaussianElement,
    g: &GaussianElement,
    ctx: &TwistedContext,
    grid: Quadrature,
    points: &[[f64; 2]],
) -> Result<NumericProduct> {
    if ctx.dim() != 2 || f.dim() != 2 || g.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: "2".into(), found: format!("{}", ctx.dim()) });
    }
    if grid.nodes < 256 || grid.half_width < 8.0 {
        return Err(Error::InvalidArgument("quadrature needs >= 256 nodes per axis and >= 8 standard deviations".into()));
    }
    let sigma = ctx.sigma();
    let density = ctx.density();
    let fine: Vec<Complex64> =
        points.par_iter().map(|&x| trapezoid(f, g, &sigma, density, x, grid.nodes, grid.half_width)).collect();
    let coarse: Vec<Complex64> =
        points.par_iter().map(|&x| trapezoid(f, g, &sigma, density, x, grid.nodes / 2, grid.half_width)).collect();
    let scale = fine.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let diff = fine.iter().zip(&coarse).fold(0.0_f64, |a, (p, q)| a.max((p - q).norm()));
    let error_estimate = if scale > 0.0 { diff / scale } else { diff };
    if error_estimate > grid.tolerance {
        return Err(Error::GridTooCoarse { estimate: error_estimate, tolerance: grid.tolerance });
    }
    Ok(NumericProduct { points: points.to_vec(), values: fine, error_estimate })
}
