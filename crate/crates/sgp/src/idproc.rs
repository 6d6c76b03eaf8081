//! Population-count kernel of the process: an immigration-death (M/M/∞) chain
//! with arrival rate α·ν(W) and per-individual death rate μ.
//!
//! Over a lag t the count moves from x to y by thinning the x incumbents with
//! survival probability e^{−μt} and adding Poisson(ρ) immigrants,
//! ρ = arrival·(1 − e^{−μt})/μ, so the transition pmf is the convolution of a
//! Binomial(x, e^{−μt}) and a Poisson(ρ). Stationary law: Poisson(arrival/μ).
//!
//! This module also carries the count side of the asymptotic theory: the Ξ
//! constant (an expectation of squared pmf ratios under the stationary law)
//! and the 2×2 Fisher information for (α, μ) with its closed-form inverse.

use crate::specfun::ln_gamma;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("state-space truncation needs {needed} states, more than the 1e6 cap")]
    TooManyStates { needed: u64 },
}

/// Count-chain parameters. `arrival_rate` is the total rate α·ν(W), i.e. the
/// window measure is already folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdParams {
    arrival_rate: f64,
    death_rate: f64,
}

impl IdParams {
    pub fn new(arrival_rate: f64, death_rate: f64) -> Result<Self, IdError> {
        for (name, value) in [("arrival_rate", arrival_rate), ("death_rate", death_rate)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(IdError::NotPositive { name, value });
            }
        }
        Ok(Self { arrival_rate, death_rate })
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    pub fn death_rate(&self) -> f64 {
        self.death_rate
    }

    /// Stationary mean arrival/μ.
    pub fn stationary_mean(&self) -> f64 {
        self.arrival_rate / self.death_rate
    }
}

/// Immigrant mass ρ and incumbent survival probability e^{−μt} over a lag t.
#[derive(Debug, Clone, Copy)]
pub struct IdTransitionTerms {
    pub rho: f64,
    pub survive: f64,
}

pub fn transition_terms(t: f64, params: &IdParams) -> IdTransitionTerms {
    assert!(t > 0.0, "transition_terms: t must be positive, got {t}");
    let mt = params.death_rate * t;
    IdTransitionTerms {
        rho: params.arrival_rate * (-(-mt).exp_m1()) / params.death_rate,
        survive: (-mt).exp(),
    }
}

/// log p_N(t, y | x): log-sum-exp over the Poisson ⊛ Binomial convolution.
pub fn transition_log_pmf(t: f64, y: u64, x: u64, params: &IdParams) -> f64 {
    let IdTransitionTerms { rho, survive } = transition_terms(t, params);
    let ln_rho = rho.ln();
    let ln_s = survive.ln();
    // log(1 − e^{−μt}) without cancellation at short lags
    let ln_1ms = (-(-params.death_rate * t).exp_m1()).ln();
    let k_lo = y.saturating_sub(x);
    // first term: k_lo immigrants, j_hi = y − k_lo survivors of the x incumbents
    let j_hi = (y - k_lo) as f64;
    let lpois0 = -rho
        + if k_lo == 0 { 0.0 } else { k_lo as f64 * ln_rho - ln_gamma(k_lo as f64 + 1.0) };
    let lbin0 = ln_gamma(x as f64 + 1.0) - ln_gamma(j_hi + 1.0) - ln_gamma(x as f64 - j_hi + 1.0)
        + j_hi * ln_s
        + (x as f64 - j_hi) * ln_1ms;
    let mut terms = Vec::with_capacity((y - k_lo + 1) as usize);
    let mut lterm = lpois0 + lbin0;
    terms.push(lterm);
    for k in (k_lo + 1)..=y {
        // one more immigrant, one fewer survivor (j = y − k)
        let j = (y - k) as f64;
        lterm += ln_rho - (k as f64).ln();
        lterm += (j + 1.0).ln() - (x as f64 - j).ln() - ln_s + ln_1ms;
        terms.push(lterm);
    }
    log_sum_exp(&terms)
}

/// Linear-domain pmf row p_N(t, 0..=ymax | x); used where whole rows are
/// consumed (Ξ and the test oracles). All terms are positive, so plain
/// summation keeps full relative accuracy outside far-underflow tails.
fn transition_pmf_row(t: f64, ymax: u64, x: u64, params: &IdParams) -> Vec<f64> {
    let IdTransitionTerms { rho, survive } = transition_terms(t, params);
    // Poisson(ρ) pmf up to ymax
    let mut pois = Vec::with_capacity(ymax as usize + 1);
    let mut p = (-rho).exp();
    pois.push(p);
    for k in 1..=ymax {
        p *= rho / k as f64;
        pois.push(p);
    }
    // Binomial(x, survive) pmf, built in log domain so an underflowing
    // leading entry cannot zero out the recurrence
    let ln_s = survive.ln();
    let ln_q = (-(-params.death_rate * t).exp_m1()).ln();
    let mut bin = Vec::with_capacity(x as usize + 1);
    let mut lb = x as f64 * ln_q;
    bin.push(lb.exp());
    for j in 1..=x {
        lb += ((x - j + 1) as f64 / j as f64).ln() + ln_s - ln_q;
        bin.push(lb.exp());
    }
    let mut row = vec![0.0; ymax as usize + 1];
    for (j, &bj) in bin.iter().enumerate() {
        if bj == 0.0 {
            continue;
        }
        for y in j..=(ymax as usize) {
            row[y] += bj * pois[y - j];
        }
    }
    row
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// log π_N(n): Poisson(arrival/μ) log-pmf.
pub fn stationary_log_pmf(n: u64, params: &IdParams) -> f64 {
    let nu = params.stationary_mean();
    -nu + if n == 0 { 0.0 } else { n as f64 * nu.ln() - ln_gamma(n as f64 + 1.0) }
}

/// Conditional mean and second moment of the count after a lag t from x:
/// E = x e^{−μt} + ρ and E² = x(x−1)e^{−2μt} + (1+2ρ)x e^{−μt} + ρ² + ρ.
pub fn conditional_moments(t: f64, x: u64, params: &IdParams) -> (f64, f64) {
    let IdTransitionTerms { rho, survive } = transition_terms(t, params);
    let x = x as f64;
    let mean = x * survive + rho;
    let second = x * (x - 1.0) * survive * survive + (1.0 + 2.0 * rho) * x * survive + rho * rho + rho;
    (mean, second)
}

/// Count log-likelihood: Σ_k log p_N(Δ_k, counts[k] | counts[k−1]).
/// `counts` has one more entry than `deltas` (the k = 0 census included).
pub fn count_log_lik(counts: &[u64], deltas: &[f64], params: &IdParams) -> f64 {
    assert_eq!(
        counts.len(),
        deltas.len() + 1,
        "count_log_lik: counts must have exactly one more entry than deltas"
    );
    deltas
        .iter()
        .zip(counts.windows(2))
        .map(|(&dt, w)| transition_log_pmf(dt, w[1], w[0], params))
        .sum()
}

/// Smallest m with P(Poi(ν) > m) < tol, by scanning the pmf.
fn poisson_tail_cut(nu: f64, tol: f64) -> Result<u64, IdError> {
    let cap_estimate = nu + 12.0 * nu.sqrt() + 50.0;
    if cap_estimate > 1e6 {
        return Err(IdError::TooManyStates { needed: cap_estimate as u64 });
    }
    let mut log_p = -nu; // pmf at 0
    let mut cum = log_p.exp();
    let mut m = 0u64;
    while cum < 1.0 - tol {
        m += 1;
        log_p += nu.ln() - (m as f64).ln();
        cum += log_p.exp();
        if m as f64 > 1e6 {
            return Err(IdError::TooManyStates { needed: m });
        }
    }
    Ok(m)
}

/// Ξ = Σ_i π_N(i) Σ_j p_N(Δ, j−1 | i)² / p_N(Δ, j | i), the pmf-ratio constant
/// of the count Fisher information. Both sums are truncated where their tails
/// contribute less than `tail_tol`; j = 0 contributes nothing (p_N(Δ, −1|i) ≔ 0).
pub fn xi_constant(params: &IdParams, delta: f64, tail_tol: f64) -> Result<f64, IdError> {
    assert!(
        tail_tol > 0.0 && tail_tol <= 1e-4,
        "xi_constant: tail_tol must lie in (0, 1e-4], got {tail_tol}"
    );
    assert!(delta > 0.0, "xi_constant: delta must be positive, got {delta}");
    let nu = params.stationary_mean();
    let imax = poisson_tail_cut(nu, tail_tol)?;
    let IdTransitionTerms { rho, survive } = transition_terms(delta, params);
    let mut total = 0.0;
    let mut log_pi = -nu; // log π_N(0)
    for i in 0..=imax {
        if i > 0 {
            log_pi += nu.ln() - (i as f64).ln();
        }
        let mean_i = i as f64 * survive + rho;
        let jcap = (mean_i + 12.0 * (mean_i + 1.0).sqrt() + 40.0) as u64;
        if jcap > 1_000_000 {
            return Err(IdError::TooManyStates { needed: jcap });
        }
        let row = transition_pmf_row(delta, jcap + 1, i, params);
        let mut inner = 0.0;
        for jm1 in 0..=(jcap as usize) {
            let p = row[jm1];
            if p < 1e-250 {
                continue;
            }
            let term = p * p / row[jm1 + 1];
            inner += term;
            if jm1 as f64 > mean_i && term < 0.01 * tail_tol * inner {
                break;
            }
        }
        total += log_pi.exp() * inner;
    }
    Ok(total)
}

/// Ξ, τ₀, ρ₀ and the 2×2 count-side Fisher information for (α, μ) at lag Δ,
/// with both the closed-form and the numerically computed inverse and the
/// asymptotic-validity flag (log(α+μ) − log α)/μ ≥ 2Δ.
#[derive(Debug, Clone)]
pub struct FisherInfoId {
    pub xi: f64,
    pub tau0: f64,
    pub rho0: f64,
    pub matrix: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
    pub inverse_numeric: [[f64; 2]; 2],
    pub validity_holds: bool,
}

pub fn fisher_info(params: &IdParams, delta: f64) -> Result<FisherInfoId, IdError> {
    let xi = xi_constant(params, delta, 1e-10)?;
    let arr = params.arrival_rate;
    let mu = params.death_rate;
    let md = mu * delta;
    let emd = (-md).exp();
    let omd = -(-md).exp_m1(); // 1 − e^{−μΔ}
    let rho0 = arr / mu * omd;
    let tau0 = 1.0 - emd - md * emd;
    let i11 = (xi - 1.0) * rho0 * rho0 / (arr * arr);
    let i12 = ((xi - 1.0) * rho0 * (md - tau0) - md) / (mu * mu);
    let i22 = arr * arr * md * (2.0 * tau0 - md) / (rho0 * mu.powi(4))
        + arr * arr * delta * delta * emd / (mu * mu * rho0)
        + (xi - 1.0) * arr * arr * (tau0 - md) * (tau0 - md) / mu.powi(4);
    let matrix = [[i11, i12], [i12, i22]];

    let pref = mu / (delta * ((1.0 + emd) * rho0 * (xi - 1.0) - 1.0));
    let a11 = (rho0 * (2.0 * tau0 - md * omd)
        + rho0 * rho0 / md * (xi - 1.0) * (tau0 - md) * (tau0 - md))
        / (omd * omd);
    let a12 = 1.0 + rho0 * (xi - 1.0) * (tau0 - md) / md;
    let a22 = (xi - 1.0) * omd * omd / md;
    let inverse = [[pref * a11, pref * a12], [pref * a12, pref * a22]];

    let det = i11 * i22 - i12 * i12;
    let inverse_numeric = [[i22 / det, -i12 / det], [-i12 / det, i11 / det]];

    let validity_holds = ((arr + mu).ln() - arr.ln()) / mu >= 2.0 * delta;
    Ok(FisherInfoId { xi, tau0, rho0, matrix, inverse, inverse_numeric, validity_holds })
}
