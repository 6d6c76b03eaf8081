//! Simulation and maximum-likelihood estimation for a spatial birth-death
//! process whose individuals carry mean-reverting square-root (CIR) diffusion
//! marks.
//!
//! Individuals arrive as a Poisson process on a rectangular window, live
//! exponentially distributed lifetimes, and while alive grow along independent
//! CIR paths started at a common initial size. The process is observed on a
//! discrete time grid; estimation recovers the growth parameters (λ, K, σ)
//! from the observed marks and the demographic parameters (α, μ) from the
//! population counts, together with asymptotic covariance matrices.
//!
//! Module map:
//! - [`specfun`]: log-gamma, polygamma, log Bessel-I building blocks.
//! - [`cir`]: CIR transition/stationary densities, moments, exact and Euler
//!   samplers.
//! - [`idproc`]: immigration-death count kernel, its likelihood, the Ξ
//!   constant, and the count-side Fisher information.
//! - [`sgmodel`]: model parameter bundle, window/grid types, and the process
//!   simulator.
//! - [`likelihood`]: observed-data log-likelihood in both regimes, with
//!   stationary score/Hessian and expected information.
//! - [`estimate`]: Nelder-Mead driver, mark and count fits, asymptotic
//!   covariance assembly.
//! - [`dataio`]: trajectory CSV round-trip, fit reports, SVG snapshots.
//! - [`table1`]: the simulation-study harness reproducing the reference
//!   parameter grid.

pub mod cir;
pub mod sgmodel;
pub mod idproc;
pub mod likelihood;
pub mod specfun;
pub mod estimate;
pub mod table1;
pub mod dataio;
