//! Belief propagation for community detection with side information on two
//! stochastic block models, together with the density-evolution and
//! EXIT-chart analysis that predicts BP's asymptotic residual error, phase
//! transitions, and iteration counts — and the machinery to cross-validate
//! prediction against simulation.
//!
//! Module map:
//! * [`channels`] — M-ary side-information channels and their LLR spectra.
//! * [`graphgen`] — SBM graph samplers and the matching branching-process trees.
//! * [`bp`] — message passing on graphs, exact tree recursions, estimators.
//! * [`devo`] — density-evolution recursions, residual-error predictors,
//!   Monte Carlo validation of the Gaussian approximations.
//! * [`exit`] — J functionals, transfer maps, crossings, threshold scans.
//! * [`numerics`] — quadrature, Q-function, bisection, least squares.

pub mod bp;
pub mod channels;
pub mod cli;
pub mod devo;
pub mod error;
pub mod exit;
pub mod graphgen;
pub mod numerics;
pub mod validate;

pub use error::{Error, Result};
