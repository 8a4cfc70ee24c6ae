//! Scaling flow `S ↦ S^(r)` on covariance forms of quasi-free CCR states.
//!
//! A covariance form is a positive Hermitian matrix `S` on `C^n` in a fixed
//! real basis, so that complex conjugation acts entrywise. Everything is
//! expressed through the ratio operator `M` of `S` against `S + conj S`.

pub mod error;
pub mod fermion;
pub mod flow;
pub mod gaussian;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod pw;
pub mod random;
pub mod star;
pub mod suite;

pub use error::{Error, Result};
pub use fermion::FermionCovariance;
pub use flow::{flow, flow_trajectory, freeze_limit, FlowPoint, Trajectory};
pub use gaussian::{density_power, GaussianElement, Measure, TwistedContext};
pub use pw::{pw_apply, pw_pair, FormFunction};
pub use star::{Classification, CovarianceForm, RatioOperator, StarSpace, SymplecticNormalForm, Tolerances};
