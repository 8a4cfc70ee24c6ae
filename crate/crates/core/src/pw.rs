//! Two-variable functional calculus of positive forms.
//!
//! A form function `f(s, t)` is homogeneous of degree one and is carried by
//! its section `φ(s) = f(s, 1-s)` on `[0, 1]`. For a pair of positive forms
//! `(α, β)` on a common space, `f(α, β)` is computed in the Hilbert space of
//! `α + β`: with `A = (α+β)^{-1/2} α (α+β)^{-1/2}` on the range of `α+β`,
//! `f(α, β) = (α+β)^{1/2} φ(A) (α+β)^{1/2}`, extended by zero on the kernel.
//!
//! For a covariance form the pair is `(S, conj S)` and the construction goes
//! through the ratio operator, see [`pw_apply`].
//!
//! The integral representation of the form-concave functions,
//! `f(s,t) = ∫ (1+λ) st/(λs + t) μ(dλ)`, is not used as a computational route.

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::{self, CMat, HermEigen};
use crate::random::InstanceGen;
use crate::star::CovarianceForm;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

type Section = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Joint = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const BOUNDED_GRID: usize = 10_000;
const OVERFLOW_GUARD: f64 = 1e150;

/// Homogeneous degree-one function represented by its section on `[0, 1]`.
#[derive(Clone)]
pub struct FormFunction {
    label: String,
    section: Section,
    joint: Option<Joint>,
}

impl fmt::Debug for FormFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormFunction")
            .field("label", &self.label)
            .field("joint", &self.joint.is_some())
            .finish()
    }
}

impl FormFunction {
    pub fn new(label: impl Into<String>, section: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FormFunction { label: label.into(), section: Arc::new(section), joint: None }
    }

    pub fn with_joint(mut self, joint: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.joint = Some(Arc::new(joint));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn section(&self, s: f64) -> f64 {
        (self.section)(s)
    }

    pub fn has_joint(&self) -> bool {
        self.joint.is_some()
    }

    /// `f(s, t)`, from the closed form when present, else `(s+t) φ(s/(s+t))`.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match &self.joint {
            Some(j) => j(s, t),
            None => self.eval_from_section(s, t),
        }
    }

    pub fn eval_from_section(&self, s: f64, t: f64) -> f64 {
        let sum = s + t;
        if sum <= 0.0 {
            0.0
        } else {
            sum * self.section(s / sum)
        }
    }

    /// `f(s, t)` for the scaling flow: `s^r (s-t)/(s^r - t^r)`.
    pub fn flow(r: f64) -> Self {
        FormFunction::new(format!("f_{r}"), move |s| kernel::flow_section(r, s))
            .with_joint(move |s, t| kernel::flow_joint(r, s, t))
    }

    /// `g_r(s,t) = r/(1-r) (s t^r - s^r t)/(s^r - t^r)`.
    pub fn g(r: f64) -> Self {
        FormFunction::new(format!("g_{r}"), move |s| kernel::g_section(r, s)).with_joint(move |s, t| kernel::g_joint(r, s, t))
    }

    pub fn geometric() -> Self {
        FormFunction::new("geo", |s| (s * (1.0 - s)).max(0.0).sqrt()).with_joint(|s, t| (s * t).sqrt())
    }

    pub fn arithmetic() -> Self {
        FormFunction::new("arith", |_| 0.5).with_joint(|s, t| (s + t) / 2.0)
    }

    pub fn left() -> Self {
        FormFunction::new("left", |s| s).with_joint(|s, _| s)
    }

    pub fn right() -> Self {
        FormFunction::new("right", |s| 1.0 - s).with_joint(|_, t| t)
    }

    /// Catalog lookup: `f_r`, `g_r` (need `param`), `geo`, `arith`, `left`, `right`.
    pub fn by_name(name: &str, param: Option<f64>) -> Result<Self> {
        let need = |p: Option<f64>| p.ok_or_else(|| Error::MissingParameter(name.to_string()));
        match name {
            "f_r" => {
                let r = need(param)?;
                if r <= 0.0 {
                    return Err(Error::NonPositiveR(r));
                }
                Ok(Self::flow(r))
            }
            "g_r" => {
                let r = need(param)?;
                if r <= 0.0 {
                    return Err(Error::NonPositiveR(r));
                }
                Ok(Self::g(r))
            }
            "geo" => Ok(Self::geometric()),
            "arith" => Ok(Self::arithmetic()),
            "left" => Ok(Self::left()),
            "right" => Ok(Self::right()),
            other => Err(Error::UnknownFunction(other.to_string())),
        }
    }

    /// `f∘swap`, i.e. `(s, t) ↦ f(t, s)`.
    pub fn swapped(&self) -> Self {
        let sec = self.section.clone();
        let out = FormFunction::new(format!("{}∘swap", self.label), move |s| sec(1.0 - s));
        match &self.joint {
            Some(j) => {
                let j = j.clone();
                out.with_joint(move |s, t| j(t, s))
            }
            None => out,
        }
    }

    pub fn sum(&self, other: &FormFunction) -> Self {
        let (a, b) = (self.section.clone(), other.section.clone());
        FormFunction::new(format!("{}+{}", self.label, other.label), move |s| a(s) + b(s))
    }

    /// Largest `|φ|` on a uniform grid of `[0, 1]`; errors when non-finite or
    /// beyond the overflow guard.
    pub fn check_bounded(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for k in 0..=BOUNDED_GRID {
            let s = k as f64 / BOUNDED_GRID as f64;
            let v = self.section(s);
            if !v.is_finite() || v.abs() > OVERFLOW_GUARD {
                return Err(Error::UnboundedSection { label: self.label.clone(), value: v, at: s });
            }
            worst = worst.max(v.abs());
        }
        Ok(worst)
    }

    /// Largest relative mismatch between the closed form and
    /// `(s+t) φ(s/(s+t))` on a grid of `[0, 2]^2`; `None` without a closed form.
    pub fn check_homogeneity(&self, grid: usize) -> Option<f64> {
        let joint = self.joint.as_ref()?;
        let mut worst = 0.0_f64;
        for i in 0..=grid {
            for j in 0..=grid {
                let s = 2.0 * i as f64 / grid as f64;
                let t = 2.0 * j as f64 / grid as f64;
                let a = joint(s, t);
                let b = self.eval_from_section(s, t);
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        Some(worst)
    }
}

fn section_values(f: &FormFunction, spectrum: &[f64]) -> Result<Vec<f64>> {
    spectrum
        .iter()
        .map(|&s| {
            let s = kernel::snap_unit(s);
            let v = f.section(s);
            if !v.is_finite() || v.abs() > OVERFLOW_GUARD {
                Err(Error::UnboundedSection { label: f.label.clone(), value: v, at: s })
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Matrix of `f(S, conj S)` on `V^C`: `embed^T φ(M) embed`, zero on the kernel
/// of `S + conj S`.
pub fn pw_apply(f: &FormFunction, form: &CovarianceForm) -> Result<CMat> {
    let ratio = form.ratio_operator();
    let values = section_values(f, ratio.spectrum())?;
    let eig = ratio.eigen();
    let op = HermEigen { values: values.clone(), vectors: eig.vectors.clone() }.apply(|x| x);
    Ok(ratio.to_form(&op))
}

/// `f(α, β)` for an arbitrary pair of positive forms, computed in the
/// Hilbert space of `α + β` with its own (complex) square root.
pub fn pw_pair(f: &FormFunction, alpha: &CMat, beta: &CMat) -> Result<CMat> {
    let n = alpha.nrows();
    if beta.nrows() != n || alpha.ncols() != n || beta.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", beta.nrows(), beta.ncols()),
        });
    }
    let total = HermEigen::new(&(alpha + beta));
    let top = total.max().max(0.0);
    let cutoff = 1e-12 * top;
    let kept: Vec<usize> = (0..n).filter(|&k| top > 0.0 && total.values[k] > cutoff).collect();
    let m = kept.len();
    let lift = CMat::from_fn(n, m, |r, c| total.vectors[(r, kept[c])] / total.values[kept[c]].sqrt());
    let embed = CMat::from_fn(m, n, |c, r| total.vectors[(r, kept[c])].conj() * total.values[kept[c]].sqrt());
    let a = linalg::hermitize(&(lift.adjoint() * alpha * &lift));
    let eig = HermEigen::new(&a);
    let values = section_values(f, &eig.values)?;
    let op = HermEigen { values, vectors: eig.vectors }.apply(|x| x);
    Ok(linalg::hermitize(&(embed.adjoint() * op * embed)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentationReport {
    pub trials: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

pub const REPRESENTATION_TOL: f64 = 1e-8;

/// Recomputes `f(S, conj S)` after a random real change of coordinates `G`
/// (pair `(G^T S G, G^T conj(S) G)`, evaluated with [`pw_pair`]) and maps the
/// result back with `G^{-T} · G^{-1}`; reports the largest entry deviation
/// relative to `max(1, |f(S, conj S)|)`.
pub fn check_representation_independence(
    f: &FormFunction,
    form: &CovarianceForm,
    trials: usize,
    seed: u64,
) -> Result<RepresentationReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let reference = pw_apply(f, form)?;
    let scale = linalg::max_abs(&reference).max(1.0);
    let n = form.dim();
    let mut worst = 0.0_f64;
    for trial in 0..trials {
        let mut gen = InstanceGen::for_case(seed, trial as u64);
        let g = gen.invertible(n);
        let gc = linalg::to_complex(&g);
        let alpha = gc.transpose() * form.matrix() * &gc;
        let beta = gc.transpose() * form.conj() * &gc;
        let pulled = pw_pair(f, &alpha, &beta)?;
        let ginv = linalg::to_complex(&g.clone().try_inverse().expect("invertible by construction"));
        let back = ginv.transpose() * pulled * &ginv;
        worst = worst.max(linalg::max_abs(&(back - &reference)) / scale);
    }
    Ok(RepresentationReport { trials, max_deviation: worst, passed: worst < REPRESENTATION_TOL })
}

pub const ORDER_TOL: f64 = 1e-9;

/// A certified violation of `A ⪯ B ⇒ φ(A) ⪯ φ(B)`.
#[derive(Debug, Clone)]
pub struct MonotoneCounterexample {
    pub trial: usize,
    pub a: CMat,
    pub b: CMat,
    /// Smallest eigenvalue of `φ(B) - φ(A)`.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct MonotoneProbe {
    pub trials: usize,
    pub counterexample: Option<MonotoneCounterexample>,
}

/// Random search for a violation of operator monotonicity of `phi` on
/// `[0, ∞)`. Pairs are `A` PSD with log-uniform spectrum in `[e^-3, e^3]` and
/// `B = A + P` with `P` PSD, spectrum in `[e^-5, e]`. A pair counts when
/// `φ(B) - φ(A)` has an eigenvalue below `-ORDER_TOL`.
///
/// Trial `k` draws from its own stream, so the first counterexample is the
/// same whatever the thread schedule. Finding none is evidence, not proof.
pub fn probe_operator_monotone<F>(phi: F, dim: usize, trials: usize, seed: u64) -> Result<MonotoneProbe>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(2..=4).contains(&dim) {
        return Err(Error::InvalidArgument(format!("probe dimension must be 2, 3 or 4, got {dim}")));
    }
    let counterexample = (0..trials).into_par_iter().find_map_first(|trial| {
        let mut gen = InstanceGen::for_case(seed, trial as u64);
        let a = gen.psd_complex(dim, -3.0, 3.0);
        let p = gen.psd_complex(dim, -5.0, 1.0);
        let b = &a + p;
        let fa = HermEigen::new(&a).apply(|x| phi(x.max(0.0)));
        let fb = HermEigen::new(&b).apply(|x| phi(x.max(0.0)));
        let min_eigenvalue = linalg::min_eigenvalue(&(fb - fa));
        (min_eigenvalue < -ORDER_TOL).then_some(MonotoneCounterexample { trial, a, b, min_eigenvalue })
    });
    Ok(MonotoneProbe { trials, counterexample })
}

/// A violation of `(1-t) f(α0,β0) + t f(α1,β1) ⪯ f((1-t)α0 + tα1, (1-t)β0 + tβ1)`.
#[derive(Debug, Clone)]
pub struct ConcavityCounterexample {
    pub trial: usize,
    pub alpha: [CMat; 2],
    pub beta: [CMat; 2],
    pub t: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct ConcavityProbe {
    pub trials: usize,
    pub counterexample: Option<ConcavityCounterexample>,
}

/// Random search for a violation of form concavity. The four forms are
/// independent PSD matrices on `C^dim`; each side is evaluated with
/// [`pw_pair`], whose inner product is `α + β` of the respective pair.
pub fn form_concavity_probe(f: &FormFunction, dim: usize, trials: usize, seed: u64) -> Result<ConcavityProbe> {
    if dim == 0 {
        return Err(Error::EmptySpace);
    }
    f.check_bounded()?;
    let found = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Option<ConcavityCounterexample>> {
            let mut gen = InstanceGen::for_case(seed, trial as u64);
            let a0 = gen.psd_complex(dim, -2.0, 2.0);
            let b0 = gen.psd_complex(dim, -2.0, 2.0);
            let a1 = gen.psd_complex(dim, -2.0, 2.0);
            let b1 = gen.psd_complex(dim, -2.0, 2.0);
            let t = gen.uniform(0.05, 0.95);
            let lhs = pw_pair(f, &a0, &b0)?.scale(1.0 - t) + pw_pair(f, &a1, &b1)?.scale(t);
            let rhs = pw_pair(f, &(a0.scale(1.0 - t) + a1.scale(t)), &(b0.scale(1.0 - t) + b1.scale(t)))?;
            let min_eigenvalue = linalg::min_eigenvalue(&(rhs - lhs));
            Ok((min_eigenvalue < -ORDER_TOL).then_some(ConcavityCounterexample {
                trial,
                alpha: [a0, a1],
                beta: [b0, b1],
                t,
                min_eigenvalue,
            }))
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        });
    let counterexample = match found {
        None => None,
        Some(r) => r?,
    };
    Ok(ConcavityProbe { trials, counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use num_complex::Complex64;

    fn mode(mu: f64) -> CovarianceForm {
        let c = |re, im| Complex64::new(re, im);
        CovarianceForm::from_matrix(CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, mu), c(0.0, -mu), c(0.5, 0.0)])).unwrap()
    }

    #[test]
    fn left_and_right_recover_form_and_conjugate() {
        let mut gen = InstanceGen::new(3);
        let s = gen.well_conditioned(5);
        let left = pw_apply(&FormFunction::left(), &s).unwrap();
        let right = pw_apply(&FormFunction::right(), &s).unwrap();
        let scale = max_abs(s.matrix());
        assert!(max_abs(&(left - s.matrix())) < 1e-11 * scale);
        assert!(max_abs(&(right - s.conj())) < 1e-11 * scale);
    }

    #[test]
    fn geometric_mean_vanishes_on_extremal() {
        let s = mode(0.5);
        let g = pw_apply(&FormFunction::geometric(), &s).unwrap();
        assert!(max_abs(&g) < 1e-7);
    }

    #[test]
    fn catalog_lookup() {
        assert_eq!(FormFunction::by_name("geo", None).unwrap().label(), "geo");
        assert!(matches!(FormFunction::by_name("f_r", None), Err(Error::MissingParameter(_))));
        assert!(matches!(FormFunction::by_name("nope", None), Err(Error::UnknownFunction(_))));
        assert!(matches!(FormFunction::by_name("g_r", Some(-1.0)), Err(Error::NonPositiveR(_))));
        for name in ["f_r", "g_r", "geo", "arith", "left", "right"] {
            let f = FormFunction::by_name(name, Some(1.7)).unwrap();
            assert!(f.check_bounded().is_ok());
            assert!(f.check_homogeneity(40).unwrap() < 1e-12, "{name}");
        }
    }

    #[test]
    fn unbounded_section_rejected() {
        let f = FormFunction::new("blowup", |s| 1.0 / (s - 0.25));
        assert!(matches!(f.check_bounded(), Err(Error::UnboundedSection { .. })));
        let f = FormFunction::new("nan", |_| f64::NAN);
        assert!(matches!(pw_apply(&f, &mode(0.3)), Err(Error::UnboundedSection { .. })));
    }

    #[test]
    fn pair_calculus_agrees_with_ratio_route() {
        let mut gen = InstanceGen::new(11);
        let s = gen.well_conditioned(4);
        for f in [FormFunction::geometric(), FormFunction::flow(2.5), FormFunction::g(1.3)] {
            let a = pw_apply(&f, &s).unwrap();
            let b = pw_pair(&f, s.matrix(), &s.conj()).unwrap();
            assert!(max_abs(&(a - b)) < 1e-11, "{}", f.label());
        }
    }

    #[test]
    fn identity_is_representation_independent() {
        let mut gen = InstanceGen::new(5);
        let s = gen.well_conditioned(3);
        let rep = check_representation_independence(&FormFunction::left(), &s, 10, 1).unwrap();
        assert!(rep.max_deviation < 1e-10, "{}", rep.max_deviation);
        assert!(check_representation_independence(&FormFunction::left(), &s, 0, 1).is_err());
    }

    #[test]
    fn geometric_and_flow_are_representation_independent() {
        let mut gen = InstanceGen::new(6);
        let s4 = gen.well_conditioned(4);
        assert!(check_representation_independence(&FormFunction::geometric(), &s4, 10, 2).unwrap().passed);
        let s2 = gen.well_conditioned(2);
        assert!(check_representation_independence(&FormFunction::flow(2.0), &s2, 10, 3).unwrap().passed);
    }

    #[test]
    fn identity_function_is_monotone() {
        let probe = probe_operator_monotone(|t| t, 3, 500, 9).unwrap();
        assert!(probe.counterexample.is_none());
        assert!(probe_operator_monotone(|t| t, 5, 1, 9).is_err());
    }

    #[test]
    fn flow_r3_is_not_operator_monotone() {
        let phi = |t: f64| FormFunction::flow(3.0).eval(1.0, t);
        let probe = probe_operator_monotone(phi, 2, 10_000, 42).unwrap();
        let ce = probe.counterexample.expect("counterexample");
        // certify independently
        let fa = HermEigen::new(&ce.a).apply(phi);
        let fb = HermEigen::new(&ce.b).apply(phi);
        assert!(linalg::min_eigenvalue(&(fb - fa)) < -ORDER_TOL);
        assert!(linalg::min_eigenvalue(&(&ce.b - &ce.a)) >= -1e-12);
    }

    #[test]
    fn g_r15_shows_no_counterexample() {
        let phi = |t: f64| FormFunction::g(1.5).eval(1.0, t);
        assert!(probe_operator_monotone(phi, 2, 10_000, 42).unwrap().counterexample.is_none());
    }

    #[test]
    fn affine_function_is_form_concave() {
        let probe = form_concavity_probe(&FormFunction::arithmetic(), 2, 200, 4).unwrap();
        assert!(probe.counterexample.is_none());
    }

    #[test]
    fn flow_concavity_boundary() {
        assert!(form_concavity_probe(&FormFunction::flow(0.5), 2, 1000, 4).unwrap().counterexample.is_none());
        assert!(form_concavity_probe(&FormFunction::flow(2.0), 2, 10_000, 4).unwrap().counterexample.is_some());
    }

    #[test]
    fn swap_conjugates() {
        let mut gen = InstanceGen::new(8);
        let s = gen.well_conditioned(4);
        let f = FormFunction::flow(1.7);
        let a = pw_apply(&f.swapped(), &s).unwrap();
        let b = linalg::conj(&pw_apply(&f, &s).unwrap());
        assert!(max_abs(&(a - b)) < 1e-12);
    }
}
