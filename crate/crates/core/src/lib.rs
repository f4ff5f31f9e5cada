//! Numerical laboratory for a scalar semilinear degenerate parabolic SPDE
//! with stochastic forcing on the periodic torus,
//!
//! ```text
//! du + div(B(u)) dt = div(A(x) ∇u) dt + Φ(u) dW,   x ∈ T^N, t ∈ (0,T),
//! ```
//!
//! driven by a cylindrical Wiener process. The crate solves nondegenerate
//! viscous approximations (diffusion `A + εI`, mollified flux and noise),
//! builds the kinetic-formulation objects (kinetic function `1_{u>ξ}`,
//! dissipative measures), and verifies the structural properties of the
//! solution theory — L¹ contraction, energy bounds, fractional regularity,
//! and the vanishing-viscosity Cauchy property — as quantitative Monte-Carlo
//! experiments.
//!
//! Modules follow the pipeline:
//!
//! * [`torus`] — periodic grids, fields, discrete calculus, norms, seminorms
//! * [`coeffs`] — flux `B`, diffusion `A(x)`, square roots, ε-regularization
//! * [`noise`] — coefficient families `g_k`, Wiener path sampling
//! * [`solver`] — Euler–Maruyama time stepping of the viscous approximation
//! * [`kinetic`] — kinetic function, measure estimates, weak-form residuals
//! * [`verify`] — Monte-Carlo harness turning theorems into pass/fail reports
//!
//! The `parallel` feature (default) runs ensembles and double sums on rayon;
//! disabling it falls back to sequential loops with bit-identical results.

pub mod coeffs;
pub mod error;
pub mod kinetic;
pub mod noise;
pub mod par;
pub mod solver;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
