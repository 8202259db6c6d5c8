//! Numerical laboratory for the parabolic dominative p-Laplace equation
//! `2(n+p) u_t = D_p u`, where `D_p u = Δu + (p-2) λ_max(D²u)`.
//!
//! The crate solves the game's dynamic programming principle on Cartesian
//! grids, simulates the single-controller stochastic game, and checks the
//! structural facts that tie the two together: the asymptotic mean value
//! formula, comparison, martingale drifts and convergence as `ε → 0`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod dpp;
pub mod error;
pub mod exec;
pub mod game;
pub mod harness;
pub mod model;
pub mod operators;
pub mod quadrature;
pub mod reference;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{BoundaryStrip, GameParams, PayoffField, Shape, SpaceTimeDomain, TimeScaling};
pub use operators::{dominative, lambda_max, Field, SmoothField};
pub use reference::{BarrierFunction, ReferenceSolution};
pub use dpp::{solve_dpp, DirectionMode, GridConfig, ValueGrid};
