//! Grid solvers for the first infinity-eigenvalue problem
//! `min{-Δ∞v, |∇v| - λ v} = 0` and its sublinear relatives.
//!
//! The crate covers the whole pipeline on uniform Cartesian grids:
//!
//! * [`grid`] and [`distance`]: rasterized catalog domains, the exact
//!   Euclidean distance to the boundary, the inradius `R` and the geometric
//!   eigenvalue `1/R`, ridge and max-set detection.
//! * [`plap`]: log-space discrete Rayleigh quotients
//!   `∫|∇u|^p / ‖u‖_q^p` and their projected-gradient minimization, plus
//!   warm-started sweeps in `p` with `q = ⌈ℓp⌉`.
//! * [`infinity`]: a monotone finite-difference fixed-point scheme for the
//!   sublinear problem `min{-Δ∞v, |∇v| - λ v^ℓ} = 0`, the `ℓ = 1` eigenvalue
//!   problem with sup-renormalization, and the `ℓ ↗ 1` continuation that
//!   produces the maximal eigenfunction.
//! * [`verify`]: named checks returning reproducible verdicts and evidence.
//! * [`io`]: CSV grids, greymaps and JSON records.
//!
//! Per-cell kernels are data-parallel through rayon when the `parallel`
//! feature is on (the default); see [`exec`].

pub mod distance;
pub mod error;
pub mod exec;
pub mod grid;
pub mod infinity;
pub mod io;
pub mod plap;
pub mod verify;

pub use distance::{
    distance_transform, inradius, lambda_infinity, ridge_analysis, DistanceField, RidgeInfo,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{make_domain, GridDomain, ScalarField, Shape, ShapeSpec};
pub use infinity::{
    concave_update, gradient_norm_upwind, maximal_eigenfunction, residual, solve_concave,
    solve_eigen_l1, stencil_extrema, ConcaveProblem, SolveOptions, SolveReport,
};
pub use plap::{
    log_rayleigh_gradient, log_rayleigh_pq, lq_norm, minimize_pq, minimize_pq_from, p_energy,
    rayleigh_pq, sweep_pq, EigenResult, MinimizeOptions, PQParams, SweepTable,
};
pub use verify::{CheckOutcome, CheckSpec, Verdict, VerifyOptions};
