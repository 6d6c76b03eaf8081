//! Observed-data log-likelihood of a discretely sampled trajectory, in both
//! regimes, plus the analytic derivative/information machinery of the
//! stationary mark law.
//!
//! Nonstationary regime (marks started at a known m0):
//!   l1 — CIR transition terms over consecutive observations of each
//!        individual,
//!   l2 — first-observation terms: the transition density from m0 averaged
//!        uniformly over the unobserved birth position inside its grid gap
//!        (Gauss–Legendre quadrature),
//!   l3 — immigration-death likelihood of the count sequence, census
//!        |ω_0| = 0 included.
//!
//! Stationary regime (marks started from the stationary law): the mark term
//! pools every observation through the stationary Gamma log-density (stored
//! in l1) and keeps the same count term (stored in the l3 slot for a uniform
//! shape; l2 is unused). Parameter-free combinatorial constants are omitted
//! throughout, so reported values are relative log-likelihoods.

use crate::cir::{self, CirParams};
use crate::idproc::{self, IdParams};
use crate::sgmodel::{support_sets, ModelParams, Trajectory};
use crate::specfun::polygamma;

/// Which likelihood decomposition a breakdown came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Nonstationary,
    Stationary,
}

/// Additive parts of a log-likelihood evaluation; `total` is always the sum
/// of the parts that the regime defines (l2 is identically 0 when unused).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
    pub regime: Regime,
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial (Abramowitz & Stegun 25.4.29 initial guesses).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "gauss_legendre: need at least 2 nodes, got {n}");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P'_n(x) by upward recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Count sequence with the implicit empty census at T_0 = 0, and the grid
/// gaps that pair with it.
fn counts_with_census(traj: &Trajectory) -> (Vec<u64>, Vec<f64>) {
    let ss = support_sets(traj).expect("trajectory was validated at construction");
    let mut counts = Vec::with_capacity(traj.n() + 1);
    counts.push(0);
    counts.extend_from_slice(&ss.counts);
    (counts, traj.grid().gaps())
}

/// The count-side term shared by both regimes: the immigration-death
/// log-likelihood of |ω_k| with total arrival rate α·ν(W).
fn count_term(traj: &Trajectory, params: &ModelParams) -> f64 {
    let id = IdParams::new(params.alpha() * traj.window().area(), params.mu())
        .expect("model parameters are validated positive");
    let (counts, gaps) = counts_with_census(traj);
    idproc::count_log_lik(&counts, &gaps, &id)
}

/// Nonstationary log-likelihood; `m0` is the common initial mark and
/// `quad_nodes` the Gauss–Legendre order of the birth-average in l2.
pub fn loglik_nonstationary(
    traj: &Trajectory,
    params: &ModelParams,
    m0: f64,
    quad_nodes: usize,
) -> LogLikBreakdown {
    loglik_nonstationary_with(traj, params, m0, quad_nodes, false)
}

/// As [`loglik_nonstationary`], with the documented approximation of setting
/// the first-observation part l2 to zero available as an option.
pub fn loglik_nonstationary_with(
    traj: &Trajectory,
    params: &ModelParams,
    m0: f64,
    quad_nodes: usize,
    drop_l2: bool,
) -> LogLikBreakdown {
    assert!(m0 > 0.0, "loglik_nonstationary: m0 must be positive, got {m0}");
    assert!(quad_nodes >= 8, "loglik_nonstationary: need at least 8 quadrature nodes");
    let times = traj.grid().times();
    let gaps = traj.grid().gaps();

    let mut l1 = 0.0;
    for i in 0..traj.d() {
        let row = traj.row(i);
        let (s, e) = traj.alive_range(i);
        for k in (s + 1)..e {
            l1 += cir::transition_log_pdf(times[k] - times[k - 1], row[k], row[k - 1], &params.cir);
        }
    }

    let l2 = if drop_l2 {
        0.0
    } else {
        let (gl_nodes, gl_weights) = gauss_legendre(quad_nodes);
        let mut acc = 0.0;
        for i in 0..traj.d() {
            let (s, _) = traj.alive_range(i);
            let m_first = traj.row(i)[s];
            let gap = gaps[s];
            // (1/gap)·∫ p_Y(t, m_first | m0) dt over (ε·gap, gap]; the
            // integrand vanishes smoothly at t → 0 for m_first ≠ m0
            let lo = 1e-8 * gap;
            let half = 0.5 * (gap - lo);
            let mid = 0.5 * (gap + lo);
            // log-sum-exp over the quadrature terms
            let mut log_terms = Vec::with_capacity(quad_nodes);
            for (&x, &w) in gl_nodes.iter().zip(gl_weights.iter()) {
                let t = mid + half * x;
                log_terms.push(
                    cir::transition_log_pdf(t, m_first, m0, &params.cir) + (w * half).ln(),
                );
            }
            let mx = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = log_terms.iter().map(|&lt| (lt - mx).exp()).sum();
            acc += mx + sum.ln() - gap.ln();
        }
        acc
    };

    let l3 = count_term(traj, params);
    LogLikBreakdown { l1, l2, l3, total: l1 + l2 + l3, regime: Regime::Nonstationary }
}

/// Stationary log-likelihood: every observed mark through the stationary
/// Gamma law, plus the shared count term.
pub fn loglik_stationary(traj: &Trajectory, params: &ModelParams) -> LogLikBreakdown {
    let mut l1 = 0.0;
    for i in 0..traj.d() {
        let row = traj.row(i);
        let (s, e) = traj.alive_range(i);
        for &m in &row[s..e] {
            l1 += cir::stationary_log_pdf(m, &params.cir);
        }
    }
    let l3 = count_term(traj, params);
    LogLikBreakdown { l1, l2: 0.0, l3, total: l1 + l3, regime: Regime::Stationary }
}

/// Gradient of the stationary mark log-density in (λ, K, σ).
pub fn score_stationary(z: f64, params: &CirParams) -> [f64; 3] {
    assert!(z > 0.0, "score_stationary: z must be positive, got {z}");
    let (lam, cap, sig) = (params.lambda(), params.capacity(), params.sigma());
    let sig2 = sig * sig;
    let ps = polygamma(0, 2.0 * lam / sig2);
    let dl = (z.ln() - z / cap + 1.0 + std::f64::consts::LN_2 - (cap * sig2 / lam).ln() - ps)
        / (sig2 / 2.0);
    let dk = 2.0 * lam * (z - cap) / (sig2 * cap * cap);
    let ds = (z / cap - z.ln() - std::f64::consts::LN_2 - 1.0 + (cap * sig2 / lam).ln() + ps)
        / (sig2 * sig / (4.0 * lam));
    [dl, dk, ds]
}

/// Hessian of the stationary mark log-density in (λ, K, σ), symmetric 3×3.
pub fn hessian_stationary(z: f64, params: &CirParams) -> [[f64; 3]; 3] {
    assert!(z > 0.0, "hessian_stationary: z must be positive, got {z}");
    let (lam, cap, sig) = (params.lambda(), params.capacity(), params.sigma());
    let sig2 = sig * sig;
    let b1 = 2.0 * lam / sig2;
    let ps = polygamma(0, b1);
    let ps1 = polygamma(1, b1);
    let ln2 = std::f64::consts::LN_2;
    let h00 = 2.0 / (lam * sig2 * sig2) * (sig2 - 2.0 * lam * ps1);
    let h01 = 2.0 * (z - cap) / (sig2 * cap * cap);
    let h02 = (z / cap - z.ln() - 2.0 - ln2 + (sig2 * cap / lam).ln() + ps + b1 * ps1)
        / (sig2 * sig / 4.0);
    let h11 = 2.0 * lam * (cap - 2.0 * z) / (sig2 * cap * cap * cap);
    let h12 = 4.0 * lam * (cap - z) / (sig2 * sig * cap * cap);
    let h22 = (-z / cap + z.ln() + (5.0 + (8.0f64).ln()) / 3.0 - (sig2 * cap / lam).ln() - ps
        - 4.0 * lam / (3.0 * sig2) * ps1)
        / (sig2 * sig2 / (12.0 * lam));
    [[h00, h01, h02], [h01, h11, h12], [h02, h12, h22]]
}

/// C(θ) = (2λ/σ²)·ψ′(2λ/σ²) − 1, the positive constant scaling the mark
/// information.
pub fn c_theta(params: &CirParams) -> f64 {
    let b1 = 2.0 * params.lambda() / (params.sigma() * params.sigma());
    b1 * polygamma(1, b1) - 1.0
}

/// −E_π[hessian]: the 3×3 expected mark information per observation. It is
/// singular (the stationary law only identifies two of (λ, K, σ)).
pub fn expected_info_marks(params: &CirParams) -> [[f64; 3]; 3] {
    let (lam, cap, sig) = (params.lambda(), params.capacity(), params.sigma());
    let sig2 = sig * sig;
    let c = c_theta(params);
    let pref = 2.0 * c / sig2;
    [
        [pref / lam, 0.0, pref * (-2.0 / sig)],
        [0.0, pref * (lam / (cap * cap)) / c, 0.0],
        [pref * (-2.0 / sig), 0.0, pref * 4.0 * lam / sig2],
    ]
}

/// Which mark parameter is treated as known in the two-parameter asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedMark {
    LambdaKnown,
    SigmaKnown,
}

/// The invertible 2×2 mark block of the Fisher information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkFisherBlock {
    pub fixed: FixedMark,
    pub matrix: [[f64; 2]; 2],
    pub c_theta: f64,
}

/// I_Y for the identifiable two-parameter mark families, scaled by the mean
/// number of alive individuals α·ν(W)/μ per observation time.
pub fn mark_fisher_block(
    params: &CirParams,
    alpha_over_mu: f64,
    fixed: FixedMark,
) -> MarkFisherBlock {
    assert!(
        alpha_over_mu > 0.0,
        "mark_fisher_block: alpha_over_mu must be positive, got {alpha_over_mu}"
    );
    let (lam, cap, sig) = (params.lambda(), params.capacity(), params.sigma());
    let sig2 = sig * sig;
    let c = c_theta(params);
    let kk = 2.0 * lam / (cap * cap * sig2);
    let matrix = match fixed {
        // parameters (K, σ)
        FixedMark::LambdaKnown => [
            [alpha_over_mu * kk, 0.0],
            [0.0, alpha_over_mu * 8.0 * lam * c / (sig2 * sig2)],
        ],
        // parameters (λ, K)
        FixedMark::SigmaKnown => [
            [alpha_over_mu * 2.0 * c / (lam * sig2), 0.0],
            [0.0, alpha_over_mu * kk],
        ],
    };
    MarkFisherBlock { fixed, matrix, c_theta: c }
}

/// Closed-form moments of the stationary mark law used by the asymptotic
/// theory: E[log Z], E[(log Z)²], E[(log Z)⁴], and E[Z⁴].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMoments {
    pub e_log_z: f64,
    pub e_log_z2: f64,
    pub e_log_z4: f64,
    pub e_z4: f64,
}

pub fn log_moments(params: &CirParams) -> LogMoments {
    let (lam, cap, sig) = (params.lambda(), params.capacity(), params.sigma());
    let sig2 = sig * sig;
    let b1 = 2.0 * lam / sig2;
    let ps = polygamma(0, b1);
    let ps1 = polygamma(1, b1);
    let ps2 = polygamma(2, b1);
    let ps3 = polygamma(3, b1);
    let ln2 = std::f64::consts::LN_2;
    // L = log(2λ/(Kσ²)) = −log scale; L1 = log(λ/(Kσ²)) = L − log 2
    let l_big = (2.0 * lam / (cap * sig2)).ln();
    let l1 = (lam / (cap * sig2)).ln();

    let e_log_z = -l_big + ps;
    let e_log_z2 = l_big * l_big - 2.0 * l_big * ps + ps * ps + ps1;
    let e_log_z4 = ln2.powi(4)
        + 4.0 * ln2.powi(3) * l1
        + 6.0 * ln2 * ln2 * l1 * l1
        + (16.0f64).ln() * l1.powi(3)
        + l1.powi(4)
        - 4.0 * l_big * ps.powi(3)
        + ps.powi(4)
        + 6.0 * l_big * l_big * ps1
        + 3.0 * ps1 * ps1
        + 6.0 * ps * ps * (l_big * l_big + ps1)
        - 4.0 * ps * (l_big.powi(3) + ((8.0f64).ln() + 3.0 * l1) * ps1 - ps2)
        - 4.0 * ln2 * ps2
        - 4.0 * l1 * ps2
        + ps3;
    let e_z4 = cap.powi(4) * (lam + sig2) * (2.0 * lam + sig2) * (2.0 * lam + 3.0 * sig2)
        / (4.0 * lam.powi(3));
    LogMoments { e_log_z, e_log_z2, e_log_z4, e_z4 }
}
