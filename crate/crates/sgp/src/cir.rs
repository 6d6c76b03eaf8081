//! Single-mark mathematics for the growth diffusion
//! dY = λ(1 − Y/K) dt + σ√Y dW: transition law, stationary law, conditional
//! moments, and exact / Euler sampling.
//!
//! With r = λ/K and e_t = e^{−rt}, the transition density from y_s to y_t over
//! a lag t is the scaled noncentral χ² form
//!
//!   p(t, y_t | y_s) = a e^{−(u+v)} (v/u)^{q/2} I_q(2√(uv)),
//!
//! where a = 2λ/(σ²K(1−e_t)), u = a y_s e_t, v = a y_t and q = 2λ/σ² − 1.
//! u and v reach ~10³ for the parameter scales used here, so the density is
//! only ever computed in the log domain. Its t → ∞ limit is the stationary
//! Gamma(2λ/σ², σ²K/2λ) law, which the log-pdf falls back to once u underflows
//! (the limit is exact there, not an approximation).

use crate::specfun::{ln_gamma, log_bessel_i};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("constraint 2λ ≥ σ² violated: λ = {lambda}, σ = {sigma}")]
    DiffusionTooLarge { lambda: f64, sigma: f64 },
}

/// Parameters (λ, K, σ) of one mark diffusion. Constructed only through
/// [`CirParams::new`], which rejects nonpositive values and 2λ < σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    lambda: f64,
    capacity: f64,
    sigma: f64,
}

impl CirParams {
    pub fn new(lambda: f64, capacity: f64, sigma: f64) -> Result<Self, ParamError> {
        for (name, value) in [("lambda", lambda), ("capacity", capacity), ("sigma", sigma)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        if 2.0 * lambda < sigma * sigma {
            return Err(ParamError::DiffusionTooLarge { lambda, sigma });
        }
        Ok(Self { lambda, capacity, sigma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mean-reversion rate λ/K.
    pub fn rate(&self) -> f64 {
        self.lambda / self.capacity
    }
}

/// Shape/scale pair of a Gamma law; for the mark diffusion the stationary
/// distribution has shape 2λ/σ² and scale σ²K/2λ, so shape·scale = K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaShapeScale {
    pub shape: f64,
    pub scale: f64,
}

/// The (a, u, v, q) intermediates of the transition density over a lag `dt`
/// from `y_from`. `v` is stored as the multiplier applied to the destination
/// mark: the density's v equals `v * y_to` (and numerically v = a).
#[derive(Debug, Clone, Copy)]
pub struct CirTransitionTerms {
    pub a: f64,
    pub u: f64,
    pub v: f64,
    pub q: f64,
}

pub fn transition_terms(dt: f64, y_from: f64, params: &CirParams) -> CirTransitionTerms {
    assert!(dt > 0.0, "transition_terms: dt must be positive, got {dt}");
    assert!(y_from > 0.0, "transition_terms: y_from must be positive, got {y_from}");
    let sig2 = params.sigma * params.sigma;
    let rt = params.rate() * dt;
    // 1 − e^{−rt} via expm1 so short lags keep full precision
    let a = 2.0 * params.lambda / (sig2 * params.capacity * (-(-rt).exp_m1()));
    CirTransitionTerms {
        a,
        u: a * y_from * (-rt).exp(),
        v: a,
        q: 2.0 * params.lambda / sig2 - 1.0,
    }
}

/// log p(dt, y_to | y_from), finite for all positive arguments.
pub fn transition_log_pdf(dt: f64, y_to: f64, y_from: f64, params: &CirParams) -> f64 {
    assert!(y_to > 0.0, "transition_log_pdf: y_to must be positive, got {y_to}");
    let terms = transition_terms(dt, y_from, params);
    let CirTransitionTerms { a, u, q, .. } = terms;
    if u == 0.0 {
        // lag so long that a·y_from·e^{−rt} underflowed: the transition law has
        // converged to the stationary law to far below f64 resolution
        return stationary_log_pdf(y_to, params);
    }
    let v = terms.v * y_to;
    a.ln() - (u + v) + 0.5 * q * (v.ln() - u.ln()) + log_bessel_i(q, 2.0 * (u * v).sqrt())
}

/// E[Y(t+dt) | Y(t) = y_from] = K − (K − y_from) e^{−dt·λ/K}.
pub fn transition_mean(dt: f64, y_from: f64, params: &CirParams) -> f64 {
    assert!(dt >= 0.0, "transition_mean: dt must be nonnegative, got {dt}");
    assert!(y_from > 0.0, "transition_mean: y_from must be positive, got {y_from}");
    params.capacity - (params.capacity - y_from) * (-params.rate() * dt).exp()
}

/// Var[Y(t+dt) | Y(t) = y_from]
///   = y_from (σ²K/λ)(e_t − e_t²) + (σ²K²/2λ)(1 − e_t)², e_t = e^{−dt·λ/K}.
pub fn transition_var(dt: f64, y_from: f64, params: &CirParams) -> f64 {
    assert!(dt >= 0.0, "transition_var: dt must be nonnegative, got {dt}");
    assert!(y_from > 0.0, "transition_var: y_from must be positive, got {y_from}");
    let sig2 = params.sigma * params.sigma;
    let et = (-params.rate() * dt).exp();
    let omet = -(-params.rate() * dt).exp_m1();
    y_from * (sig2 * params.capacity / params.lambda) * (et - et * et)
        + (sig2 * params.capacity * params.capacity / (2.0 * params.lambda)) * omet * omet
}

pub fn stationary_shape_scale(params: &CirParams) -> GammaShapeScale {
    let sig2 = params.sigma * params.sigma;
    GammaShapeScale {
        shape: 2.0 * params.lambda / sig2,
        scale: sig2 * params.capacity / (2.0 * params.lambda),
    }
}

/// log π(y): the stationary Gamma(2λ/σ², σ²K/2λ) density.
pub fn stationary_log_pdf(y: f64, params: &CirParams) -> f64 {
    assert!(y > 0.0, "stationary_log_pdf: y must be positive, got {y}");
    let GammaShapeScale { shape, scale } = stationary_shape_scale(params);
    (shape - 1.0) * y.ln() - y / scale - shape * scale.ln() - ln_gamma(shape)
}

/// Exact transition draw via the Poisson–Gamma mixture representation:
/// J ~ Poisson(u), G ~ Gamma(J + 2λ/σ², 1), Y = G/a.
pub fn sample_transition<R: Rng + ?Sized>(
    rng: &mut R,
    dt: f64,
    y_from: f64,
    params: &CirParams,
) -> f64 {
    let CirTransitionTerms { a, u, q, .. } = transition_terms(dt, y_from, params);
    let j = if u > 0.0 {
        Poisson::new(u).expect("u is positive and finite").sample(rng)
    } else {
        0.0
    };
    let shape = j + q + 1.0;
    Gamma::new(shape, 1.0).expect("shape is positive").sample(rng) / a
}

/// Stationary draw Gamma(2λ/σ², σ²K/2λ).
pub fn sample_stationary<R: Rng + ?Sized>(rng: &mut R, params: &CirParams) -> f64 {
    let GammaShapeScale { shape, scale } = stationary_shape_scale(params);
    Gamma::new(shape, scale).expect("shape and scale are positive").sample(rng)
}

/// How an Euler step that lands below zero is repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeFix {
    /// Reflect to the absolute value.
    #[default]
    Reflect,
    /// Full truncation: clamp the diffusion argument at zero.
    Truncate,
}

/// Euler–Maruyama path from `y0` over `[0, horizon]` at the given step,
/// returning ⌈horizon/step⌉ + 1 values including both endpoints.
pub fn euler_path<R: Rng + ?Sized>(
    rng: &mut R,
    y0: f64,
    step: f64,
    horizon: f64,
    params: &CirParams,
    fix: NegativeFix,
) -> Vec<f64> {
    assert!(y0 > 0.0, "euler_path: y0 must be positive, got {y0}");
    assert!(step > 0.0, "euler_path: step must be positive, got {step}");
    assert!(horizon > 0.0, "euler_path: horizon must be positive, got {horizon}");
    let nsteps = (horizon / step).ceil() as usize;
    let mut path = Vec::with_capacity(nsteps + 1);
    path.push(y0);
    let mut y = y0;
    let sqrt_step = step.sqrt();
    for i in 0..nsteps {
        // final step may be shorter so the path ends exactly at the horizon
        let (h, sh) = if i + 1 == nsteps {
            // rounding in ceil() can leave the remainder at or barely below zero
            let h = (horizon - step * i as f64).max(f64::MIN_POSITIVE);
            (h, h.sqrt())
        } else {
            (step, sqrt_step)
        };
        let z: f64 = StandardNormal.sample(rng);
        let drift = params.lambda * (1.0 - y / params.capacity);
        let diff_arg = match fix {
            NegativeFix::Reflect => y,
            NegativeFix::Truncate => y.max(0.0),
        };
        y += drift * h + params.sigma * diff_arg.max(0.0).sqrt() * sh * z;
        if y < 0.0 {
            y = match fix {
                NegativeFix::Reflect => -y,
                NegativeFix::Truncate => 0.0,
            };
        }
        path.push(y);
    }
    path
}

/// Advance a mark by one Euler stretch of length `dt`, substepping at `step`.
/// This is the piece the process simulator uses between consecutive event and
/// grid times.
pub fn euler_step_to<R: Rng + ?Sized>(
    rng: &mut R,
    y0: f64,
    step: f64,
    dt: f64,
    params: &CirParams,
    fix: NegativeFix,
) -> f64 {
    *euler_path(rng, y0, step, dt, params, fix)
        .last()
        .expect("euler_path returns at least y0")
}
