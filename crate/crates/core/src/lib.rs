//! Spectral collocation solver for a front-fixed free-boundary model of
//! prostate tumor growth.
//!
//! The moving domain [0, R(t)] is mapped onto the fixed interval [-1, 1]
//! by the change of variables rho = 2r/R(t) - 1. On the fixed domain the
//! model couples
//!
//! * a parabolic equation for the androgen-dependent cell fraction p(rho, t),
//! * an elliptic (first-order integrable) equation for the cell velocity
//!   v(rho, t), and
//! * an ODE dR/dt = v(1, t) for the tumor radius.
//!
//! Space is discretized by collocation at Gauss-Legendre points with a trial
//! basis of Legendre combinations whose first derivatives vanish at both
//! endpoints, so the Neumann boundary conditions are built into the
//! approximation space. Time stepping uses a two-history-level second-order
//! formula with the nonlinear coefficients linearized by extrapolation, so
//! every step solves a single dense linear system.
//!
//! The crate also ships manufactured-solution cases with independently
//! verified source terms ([`mms`]) and a refinement/stability study harness
//! ([`harness`]).

pub mod error;
pub mod harness;
pub mod linalg;
pub mod mms;
pub mod model;
pub mod polybasis;
pub mod stepper;

pub use error::Error;
pub use model::ModelParams;
pub use polybasis::{QuadratureRule, TrialBasis};
pub use stepper::{SolverState, SpectralScheme, TimeGrid, Trajectory};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
