//! Maximum-likelihood fitting. The log-likelihood splits additively into a
//! mark part (λ, K, σ) and a count part (α, μ), so the two are maximized
//! separately and assembled into one result.
//!
//! Mark fitting runs a Nelder–Mead simplex in constraint-mapped coordinates
//! (log(2λ − σ²), log K, log σ), which makes 2λ ≥ σ² structural, with a
//! smooth penalty outside the search box. The stationary mark fit first
//! computes the Gamma MLE of the pooled marks (each individual's second
//! observation onward, past the initial-size transient), anchors (λ, σ) on
//! the ridge through the lag-one regression slope, and then lets the boxed
//! simplex confirm the optimum; with one mark parameter fixed the remaining
//! pair is exactly identified from (shape, scale).

use crate::cir::CirParams;
use crate::idproc::{self, IdError, IdParams};
use crate::likelihood::{
    self, loglik_nonstationary_with, loglik_stationary, FixedMark, LogLikBreakdown, Regime,
};
use crate::sgmodel::{support_sets, ModelParams, Trajectory};
use crate::specfun::polygamma;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("trajectory has no individuals")]
    EmptyTrajectory,
    #[error("need at least {needed} {what}, found {found}")]
    NotEnoughData { what: &'static str, needed: usize, found: usize },
    #[error("mark pool is degenerate: all {0} pooled values are identical")]
    DegenerateMarks(usize),
    #[error("count-side information unavailable: {0}")]
    Id(#[from] IdError),
    #[error("estimate violates parameter constraints: {0}")]
    Params(String),
}

/// Positive search intervals per parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub lambda: (f64, f64),
    pub capacity: (f64, f64),
    pub sigma: (f64, f64),
    pub alpha: (f64, f64),
    pub mu: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            lambda: (1e-3, 50.0),
            capacity: (1e-3, 100.0),
            sigma: (1e-3, 5.0),
            alpha: (1e-6, 100.0),
            mu: (1e-6, 10.0),
        }
    }
}

/// Which mark parameter is held at a known value during fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedParam {
    None,
    LambdaKnown(f64),
    SigmaKnown(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub regime: Regime,
    /// Common initial mark (nonstationary regime only).
    pub m0: f64,
    pub fixed: FixedParam,
    pub bounds: ParamBounds,
    /// Convergence tolerance on the simplex function-value spread.
    pub tol: f64,
    pub max_iter: usize,
    pub quad_nodes: usize,
    /// Replace the first-observation part l2 by zero during fitting.
    pub drop_l2: bool,
    /// Number of jittered simplex starts; the best objective wins.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            regime: Regime::Nonstationary,
            m0: 0.1,
            fixed: FixedParam::None,
            bounds: ParamBounds::default(),
            tol: 1e-10,
            max_iter: 2000,
            quad_nodes: 32,
            drop_l2: false,
            restarts: 3,
        }
    }
}

/// Nelder–Mead control knobs.
#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

/// Simplex minimization outcome; `best_history` records the best objective
/// value after each iteration (non-increasing by construction).
#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_history: Vec<f64>,
}

/// Standard Nelder–Mead with reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5; terminates when the simplex function-value spread drops below
/// `tol` or after `max_iter` iterations.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NmOptions) -> NmResult {
    let p = x0.len();
    assert!(p >= 1, "nelder_mead: empty starting point");
    let f0 = f(x0);
    assert!(f0.is_finite(), "nelder_mead: objective is not finite at the starting point ({f0})");

    // initial simplex: x0 plus per-coordinate displacements
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    simplex.push(x0.to_vec());
    for i in 0..p {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-8 { 0.05 * v[i].abs() } else { 0.00025 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut best_history = Vec::new();
    while iterations < opts.max_iter {
        // order ascending by value
        let mut idx: Vec<usize> = (0..=p).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("objective is finite"));
        let reorder_s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let reorder_v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = reorder_s;
        values = reorder_v;

        // converge on both the value spread and the simplex diameter: a
        // value tie between symmetric vertices must not stop the search
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(simplex[0].iter()).map(|(&a, &b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[p] - values[0] < opts.tol && diameter < opts.tol.sqrt() {
            converged = true;
            break;
        }
        iterations += 1;

        // centroid of all but the worst
        let mut centroid = vec![0.0; p];
        for v in simplex.iter().take(p) {
            for (c, &vi) in centroid.iter_mut().zip(v.iter()) {
                *c += vi / p as f64;
            }
        }
        let lerp = |from: &[f64], coeff: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from.iter())
                .map(|(&c, &w)| c + coeff * (c - w))
                .collect()
        };

        let reflected = lerp(&simplex[p], 1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = lerp(&simplex[p], 2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[p] = expanded;
                values[p] = fe;
            } else {
                simplex[p] = reflected;
                values[p] = fr;
            }
        } else if fr < values[p - 1] {
            simplex[p] = reflected;
            values[p] = fr;
        } else {
            // contraction: outside if the reflection improved on the worst,
            // inside otherwise
            let (contracted, better_than) = if fr < values[p] {
                (lerp(&simplex[p], 0.5), fr)
            } else {
                (lerp(&simplex[p], -0.5), values[p])
            };
            let fc = f(&contracted);
            if fc <= better_than {
                simplex[p] = contracted;
                values[p] = fc;
            } else {
                // shrink toward the best vertex
                let best = simplex[0].clone();
                for j in 1..=p {
                    for (s, &b) in simplex[j].iter_mut().zip(best.iter()) {
                        *s = b + 0.5 * (*s - b);
                    }
                    values[j] = f(&simplex[j]);
                }
            }
        }
        let best_now = values.iter().cloned().fold(f64::INFINITY, f64::min);
        best_history.push(best_now);
    }

    let (mut bi, mut bv) = (0, values[0]);
    for (i, &v) in values.iter().enumerate() {
        if v < bv {
            bi = i;
            bv = v;
        }
    }
    NmResult { x: simplex[bi].clone(), value: bv, iterations, converged, best_history }
}

/// Quadratic log-space penalty for leaving a box, and the boxed value.
fn box_clamp(v: f64, (lo, hi): (f64, f64)) -> (f64, f64) {
    if v < lo {
        (lo, (lo.ln() - v.ln()).powi(2))
    } else if v > hi {
        (hi, (v.ln() - hi.ln()).powi(2))
    } else {
        (v, 0.0)
    }
}

const PENALTY_WEIGHT: f64 = 1e6;

/// Count-parameter fit report. `alpha` is per unit area.
#[derive(Debug, Clone, PartialEq)]
pub struct IdFit {
    pub alpha: f64,
    pub mu: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

/// Maximize the count log-likelihood over (α, μ) in log-parameter space.
/// `area` is ν(W); the reported α divides it out.
pub fn fit_id(
    counts: &[u64],
    deltas: &[f64],
    area: f64,
    opts: &FitOptions,
) -> Result<IdFit, EstimateError> {
    if deltas.len() < 2 {
        return Err(EstimateError::NotEnoughData {
            what: "count transitions",
            needed: 2,
            found: deltas.len(),
        });
    }
    assert_eq!(counts.len(), deltas.len() + 1, "fit_id: counts/deltas length mismatch");
    assert!(area > 0.0, "fit_id: window area must be positive");

    let total_bounds = (opts.bounds.alpha.0 * area, opts.bounds.alpha.1 * area);
    let objective = |x: &[f64]| -> f64 {
        let (a_raw, m_raw) = (x[0].exp(), x[1].exp());
        let (a, pa) = box_clamp(a_raw, total_bounds);
        let (m, pm) = box_clamp(m_raw, opts.bounds.mu);
        let id = IdParams::new(a, m).expect("clamped parameters are positive");
        -idproc::count_log_lik(counts, deltas, &id) + PENALTY_WEIGHT * (pa + pm)
    };

    // moment initialization: the stationary mean is α·ν(W)/μ; μ starts at a
    // mild default since it is only weakly identified by short windows
    let cbar = counts[1..].iter().sum::<u64>() as f64 / (counts.len() - 1) as f64;
    let mu0: f64 = 0.05;
    let a0 = (cbar.max(1.0) * mu0).clamp(total_bounds.0, total_bounds.1);
    let x0 = [a0.ln(), mu0.ln()];
    let nm = nelder_mead(objective, &x0, &NmOptions { tol: opts.tol, max_iter: opts.max_iter });

    let a_hat = nm.x[0].exp().clamp(total_bounds.0, total_bounds.1);
    let m_hat = nm.x[1].exp().clamp(opts.bounds.mu.0, opts.bounds.mu.1);
    let mut notes = Vec::new();
    if counts.iter().all(|&c| c == 0) {
        notes.push(
            "no arrivals observed: alpha is pushed to the lower search bound".to_string(),
        );
    } else if counts[1..].windows(2).all(|w| w[0] == w[1]) && counts[1] > 0 {
        notes.push(
            "constant count sequence: likelihood is flat in directions preserving the level"
                .to_string(),
        );
    }
    if a_hat <= total_bounds.0 * 1.05 {
        notes.push("alpha at the lower search bound".to_string());
    }
    let id = IdParams::new(a_hat, m_hat).expect("clamped parameters are positive");
    Ok(IdFit {
        alpha: a_hat / area,
        mu: m_hat,
        loglik: idproc::count_log_lik(counts, deltas, &id),
        iterations: nm.iterations,
        converged: nm.converged,
        notes,
    })
}

/// Mark-parameter fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct MarksFit {
    pub lambda: f64,
    pub capacity: f64,
    pub sigma: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

/// (λ, K, σ) from x = (log(2λ − σ²), log K, log σ).
fn marks_from_reparam(x: &[f64]) -> (f64, f64, f64) {
    let sigma = x[2].exp();
    let lambda = 0.5 * (x[0].exp() + sigma * sigma);
    (lambda, x[1].exp(), sigma)
}

fn marks_to_reparam(lambda: f64, capacity: f64, sigma: f64) -> [f64; 3] {
    [(2.0 * lambda - sigma * sigma).ln(), capacity.ln(), sigma.ln()]
}

/// Penalized negative mark log-likelihood in reparameterized coordinates.
/// The CIR parameters are clamped into the box for evaluation (preserving
/// 2λ ≥ σ²) and the penalty pushes the simplex back inside.
fn marks_objective(
    x: &[f64],
    bounds: &ParamBounds,
    loglik: &dyn Fn(&CirParams) -> f64,
) -> f64 {
    let (lambda, capacity, sigma) = marks_from_reparam(x);
    let (sc, ps) = box_clamp(sigma, bounds.sigma);
    let (lc_raw, pl) = box_clamp(lambda, bounds.lambda);
    let lc = lc_raw.max(sc * sc / 2.0);
    let (kc, pk) = box_clamp(capacity, bounds.capacity);
    let params = CirParams::new(lc, kc, sc).expect("clamped parameters satisfy the constraints");
    -loglik(&params) + PENALTY_WEIGHT * (ps + pl + pk)
}

/// Deterministic jitter offsets for simplex restarts in reparam space.
fn restart_offset(r: usize) -> [f64; 3] {
    match r % 3 {
        0 => [0.0, 0.0, 0.0],
        1 => [0.4, -0.25, 0.3],
        _ => [-0.3, 0.25, -0.4],
    }
}

fn run_restarts(
    objective: &dyn Fn(&[f64]) -> f64,
    x0: [f64; 3],
    opts: &FitOptions,
    notes: &mut Vec<String>,
) -> NmResult {
    let nm_opts = NmOptions { tol: opts.tol, max_iter: opts.max_iter };
    let mut best: Option<NmResult> = None;
    let mut values = Vec::new();
    for r in 0..opts.restarts.max(1) {
        let off = restart_offset(r);
        let start: Vec<f64> = x0.iter().zip(off.iter()).map(|(&a, &b)| a + b).collect();
        let result = nelder_mead(|x| objective(x), &start, &nm_opts);
        values.push(result.value);
        let better = best.as_ref().map_or(true, |b| result.value < b.value);
        if better {
            best = Some(result);
        }
    }
    let best = best.expect("at least one restart ran");
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.len() > 1 && spread > opts.tol.max(1e-6) {
        notes.push(format!(
            "simplex restarts disagree by {spread:.3e} in objective; best kept"
        ));
    }
    best
}

fn note_boundary(lambda: f64, capacity: f64, sigma: f64, b: &ParamBounds, notes: &mut Vec<String>) {
    let near = |v: f64, (lo, hi): (f64, f64)| v <= lo * 1.0001 || v >= hi * 0.9999;
    if near(lambda, b.lambda) || near(capacity, b.capacity) || near(sigma, b.sigma) {
        notes.push("estimate lies on the search-box boundary".to_string());
    }
    if 2.0 * lambda - sigma * sigma <= 1e-9 * lambda {
        notes.push("estimate lies on the 2λ = σ² constraint boundary".to_string());
    }
}

/// Maximize l1 (+ l2 unless dropped) over (λ, K, σ) for marks started at m0.
pub fn fit_marks_nonstationary(
    traj: &Trajectory,
    m0: f64,
    opts: &FitOptions,
) -> Result<MarksFit, EstimateError> {
    let n_pairs: usize = (0..traj.d())
        .map(|i| {
            let (s, e) = traj.alive_range(i);
            e - s - 1
        })
        .sum();
    if n_pairs == 0 {
        return Err(EstimateError::NotEnoughData {
            what: "mark transitions",
            needed: 1,
            found: 0,
        });
    }

    // initialization: K from the mean observed mark, λ = 1, σ from the
    // stationary-variance relation Var = σ²K²/2λ
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut count = 0usize;
    for i in 0..traj.d() {
        let (s, e) = traj.alive_range(i);
        for &m in &traj.row(i)[s..e] {
            sum += m;
            sumsq += m * m;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let var = (sumsq / count as f64 - mean * mean).max(1e-12);
    let k0 = mean.clamp(opts.bounds.capacity.0, opts.bounds.capacity.1);
    let l0: f64 = 1.0;
    let sig0 = (2.0 * l0 * var).sqrt() / k0;
    let sig0 = sig0
        .min(0.9 * (2.0 * l0).sqrt())
        .clamp(opts.bounds.sigma.0, opts.bounds.sigma.1.min(0.95 * (2.0 * l0).sqrt()));
    let x0 = marks_to_reparam(l0, k0, sig0);

    // no closure state is mutated: the kernel evaluations are pure
    let nonstat_ll = |p: &CirParams| -> f64 {
        let model = match ModelParams::new(*p, 1.0, 1.0) {
            Ok(m) => m,
            Err(_) => unreachable!("alpha, mu fixed at valid dummies"),
        };
        // only l1 + l2 depend on the mark parameters; evaluate them alone by
        // reusing the breakdown and discarding the count part
        let b = loglik_nonstationary_with(traj, &model, m0, opts.quad_nodes, opts.drop_l2);
        b.l1 + b.l2
    };
    let objective = |x: &[f64]| marks_objective(x, &opts.bounds, &nonstat_ll);

    let mut notes = Vec::new();
    let best = run_restarts(&objective, x0, opts, &mut notes);
    let (lambda, capacity, sigma) = marks_from_reparam(&best.x);
    let (sigma, _) = box_clamp(sigma, opts.bounds.sigma);
    let (lambda, _) = box_clamp(lambda, opts.bounds.lambda);
    let lambda = lambda.max(sigma * sigma / 2.0);
    let (capacity, _) = box_clamp(capacity, opts.bounds.capacity);
    note_boundary(lambda, capacity, sigma, &opts.bounds, &mut notes);
    let params = CirParams::new(lambda, capacity, sigma)
        .map_err(|e| EstimateError::Params(e.to_string()))?;
    Ok(MarksFit {
        lambda,
        capacity,
        sigma,
        loglik: nonstat_ll(&params),
        iterations: best.iterations,
        converged: best.converged,
        notes,
    })
}

/// Stationary mark fit report; (shape, scale) is the Gamma MLE of the pooled
/// marks and K̂ = shape·scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMarksFit {
    pub lambda: f64,
    pub capacity: f64,
    pub sigma: f64,
    pub shape: f64,
    pub scale: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

/// Newton iteration for the Gamma MLE on the digamma equation
/// log(shape) − ψ(shape) = log(mean) − mean(log).
fn gamma_mle(pool: &[f64]) -> (f64, f64) {
    let n = pool.len() as f64;
    let mean = pool.iter().sum::<f64>() / n;
    let mean_log = pool.iter().map(|&v| v.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;
    let mut shape = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..80 {
        let step = (shape.ln() - polygamma(0, shape) - s) / (1.0 / shape - polygamma(1, shape));
        shape -= step;
        if step.abs() < 1e-12 * shape {
            break;
        }
    }
    (shape, mean / shape)
}

/// Stationary mark fit: Gamma MLE on the second-observation-onward pool,
/// ridge anchor for (λ, σ) when nothing is fixed, exact inversion otherwise.
pub fn fit_marks_stationary(
    traj: &Trajectory,
    opts: &FitOptions,
) -> Result<StatMarksFit, EstimateError> {
    // pool marks past each individual's first observation: the first value
    // still carries the initial-size transient, the rest are the closest the
    // data comes to stationary draws
    let mut pool = Vec::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut pair_gaps = 0.0;
    let times = traj.grid().times();
    for i in 0..traj.d() {
        let (s, e) = traj.alive_range(i);
        let row = traj.row(i);
        pool.extend_from_slice(&row[(s + 1).min(e)..e]);
        for k in (s + 1)..e {
            pairs.push((row[k - 1], row[k]));
            pair_gaps += times[k] - times[k - 1];
        }
    }
    if pool.len() < 2 {
        // fall back to every observation when rows are too short
        pool.clear();
        for i in 0..traj.d() {
            let (s, e) = traj.alive_range(i);
            pool.extend_from_slice(&traj.row(i)[s..e]);
        }
    }
    if pool.len() < 2 {
        return Err(EstimateError::NotEnoughData {
            what: "pooled marks",
            needed: 2,
            found: pool.len(),
        });
    }
    let (lo, hi) = pool.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if lo == hi {
        return Err(EstimateError::DegenerateMarks(pool.len()));
    }

    let (shape, scale) = gamma_mle(&pool);
    let capacity = shape * scale;
    let mut notes = Vec::new();
    let mut iterations = 0;
    let mut converged = true;

    let (lambda, capacity, sigma) = match opts.fixed {
        FixedParam::LambdaKnown(v) => (v, capacity, (2.0 * v / shape).sqrt()),
        FixedParam::SigmaKnown(v) => (shape * v * v / 2.0, capacity, v),
        FixedParam::None => {
            // ridge anchor: the lag-one regression slope estimates e^{−λΔ/K}
            let np = pairs.len() as f64;
            let mean_gap = if pairs.is_empty() { 1.0 } else { pair_gaps / np };
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / np;
            let my = pairs.iter().map(|p| p.1).sum::<f64>() / np;
            let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
            let lambda0 = if slope > 0.0 && slope < 1.0 {
                -capacity * slope.ln() / mean_gap
            } else {
                notes.push(format!(
                    "lag-one slope {slope:.4} outside (0, 1); lambda anchored at 1"
                ));
                1.0
            };
            let lambda0 = lambda0.clamp(opts.bounds.lambda.0, opts.bounds.lambda.1);
            let sigma0 = (2.0 * lambda0 / shape)
                .sqrt()
                .clamp(opts.bounds.sigma.0, opts.bounds.sigma.1);
            // boxed simplex confirmation on the pooled stationary likelihood;
            // (λ, σ) sit on a ridge (only the Gamma shape and scale are
            // identified), so the simplex terminates at the anchor
            let pooled = pool.clone();
            let stat_ll = move |p: &CirParams| -> f64 {
                pooled.iter().map(|&z| crate::cir::stationary_log_pdf(z, p)).sum()
            };
            let objective = |x: &[f64]| marks_objective(x, &opts.bounds, &stat_ll);
            let x0 = marks_to_reparam(
                lambda0.max(sigma0 * sigma0 / 2.0 * 1.0000001),
                capacity.clamp(opts.bounds.capacity.0, opts.bounds.capacity.1),
                sigma0,
            );
            let single_start = FitOptions { restarts: 1, ..opts.clone() };
            let best = run_restarts(&objective, x0, &single_start, &mut notes);
            iterations = best.iterations;
            converged = best.converged;
            notes.push(
                "(lambda, sigma) lie on a likelihood ridge: the stationary mark law \
                 identifies only 2λ/σ² and σ²K/2λ; covariance withheld"
                    .to_string(),
            );
            let (l, k, sg) = marks_from_reparam(&best.x);
            (l, k, sg)
        }
    };

    // keep the diffusion constraint strict after inversions with small shape
    let (lambda, sigma) = if 2.0 * lambda >= sigma * sigma {
        (lambda, sigma)
    } else {
        notes.push("2λ ≥ σ² enforced at the boundary".to_string());
        (sigma * sigma / 2.0, sigma)
    };
    let params = CirParams::new(lambda, capacity, sigma)
        .map_err(|e| EstimateError::Params(e.to_string()))?;
    let loglik: f64 = pool.iter().map(|&z| crate::cir::stationary_log_pdf(z, &params)).sum();
    Ok(StatMarksFit {
        lambda,
        capacity,
        sigma,
        shape,
        scale,
        loglik,
        iterations,
        converged,
        notes,
    })
}

/// Complete fit outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimate: ModelParams,
    pub loglik: LogLikBreakdown,
    pub iterations: usize,
    pub converged: bool,
    /// Asymptotic covariance in block order (mark pair, then α, μ);
    /// present only for stationary fits with one mark parameter fixed.
    pub covariance: Option<[[f64; 4]; 4]>,
    /// 95% confidence intervals for the 4 free parameters, same order.
    pub ci95: Option<[(f64, f64); 4]>,
    /// Names of the 4 covariance-ordered parameters.
    pub cov_params: Option<[&'static str; 4]>,
    /// Asymptotic-theory validity condition (log(α̂+μ̂) − log α̂)/μ̂ ≥ 2Δ.
    pub validity_flag: Option<bool>,
    pub notes: Vec<String>,
}

/// Block-diagonal asymptotic covariance of the 4 free parameters under one
/// fixed mark parameter: the inverted mark block and the closed-form
/// count-block inverse. `area` is ν(W); the count side uses the total
/// arrival rate α·ν(W).
pub fn asymptotic_cov(
    params: &ModelParams,
    area: f64,
    delta: f64,
    fixed: FixedMark,
) -> Result<[[f64; 4]; 4], IdError> {
    let cir = &params.cir;
    let (lam, cap, sig) = (cir.lambda(), cir.capacity(), cir.sigma());
    let sig2 = sig * sig;
    let c = likelihood::c_theta(cir);
    let mu_over_alpha = params.mu() / (params.alpha() * area);
    let (m11, m22) = match fixed {
        // free mark parameters (K, σ)
        FixedMark::LambdaKnown => (
            mu_over_alpha * cap * cap * sig2 / (2.0 * lam),
            mu_over_alpha * sig2 * sig2 / (8.0 * lam * c),
        ),
        // free mark parameters (λ, K)
        FixedMark::SigmaKnown => (
            mu_over_alpha * lam * sig2 / (2.0 * c),
            mu_over_alpha * cap * cap * sig2 / (2.0 * lam),
        ),
    };
    let id = IdParams::new(params.alpha() * area, params.mu())
        .expect("model parameters are positive");
    let fi = idproc::fisher_info(&id, delta)?;
    let mut cov = [[0.0; 4]; 4];
    cov[0][0] = m11;
    cov[1][1] = m22;
    for r in 0..2 {
        for cidx in 0..2 {
            cov[2 + r][2 + cidx] = fi.inverse[r][cidx];
        }
    }
    Ok(cov)
}

/// Run the separable fits and assemble the result.
pub fn fit_full(traj: &Trajectory, opts: &FitOptions) -> Result<FitResult, EstimateError> {
    if traj.d() == 0 {
        return Err(EstimateError::EmptyTrajectory);
    }
    let ss = support_sets(traj).expect("trajectory was validated");
    let mut counts = Vec::with_capacity(traj.n() + 1);
    counts.push(0u64);
    counts.extend_from_slice(&ss.counts);
    let gaps = traj.grid().gaps();
    let area = traj.window().area();

    let id = fit_id(&counts, &gaps, area, opts)?;
    let mut notes = id.notes.clone();
    let (cir, iterations, converged) = match opts.regime {
        Regime::Nonstationary => {
            let mf = fit_marks_nonstationary(traj, opts.m0, opts)?;
            notes.extend(mf.notes.iter().cloned());
            if let FixedParam::LambdaKnown(_) | FixedParam::SigmaKnown(_) = opts.fixed {
                notes.push(
                    "fixed mark parameters are honored by the stationary regime only; \
                     the nonstationary fit estimated all three"
                        .to_string(),
                );
            }
            (
                CirParams::new(mf.lambda, mf.capacity, mf.sigma)
                    .map_err(|e| EstimateError::Params(e.to_string()))?,
                mf.iterations + id.iterations,
                mf.converged && id.converged,
            )
        }
        Regime::Stationary => {
            let mf = fit_marks_stationary(traj, opts)?;
            notes.extend(mf.notes.iter().cloned());
            (
                CirParams::new(mf.lambda, mf.capacity, mf.sigma)
                    .map_err(|e| EstimateError::Params(e.to_string()))?,
                mf.iterations + id.iterations,
                mf.converged && id.converged,
            )
        }
    };
    let estimate = ModelParams::new(cir, id.alpha, id.mu)
        .map_err(|e| EstimateError::Params(e.to_string()))?;
    let loglik = match opts.regime {
        Regime::Nonstationary => {
            loglik_nonstationary_with(traj, &estimate, opts.m0, opts.quad_nodes, opts.drop_l2)
        }
        Regime::Stationary => loglik_stationary(traj, &estimate),
    };

    let mut covariance = None;
    let mut ci95 = None;
    let mut cov_params = None;
    let mut validity_flag = None;
    if opts.regime == Regime::Stationary {
        let fixed_mark = match opts.fixed {
            FixedParam::LambdaKnown(_) => Some(FixedMark::LambdaKnown),
            FixedParam::SigmaKnown(_) => Some(FixedMark::SigmaKnown),
            FixedParam::None => None,
        };
        if let Some(fm) = fixed_mark {
            match traj.grid().delta() {
                Some(delta) => {
                    let cov = asymptotic_cov(&estimate, area, delta, fm)?;
                    let n = traj.n() as f64;
                    let free: [f64; 4] = match fm {
                        FixedMark::LambdaKnown => {
                            cov_params = Some(["capacity", "sigma", "alpha", "mu"]);
                            [cir.capacity(), cir.sigma(), id.alpha, id.mu]
                        }
                        FixedMark::SigmaKnown => {
                            cov_params = Some(["lambda", "capacity", "alpha", "mu"]);
                            [cir.lambda(), cir.capacity(), id.alpha, id.mu]
                        }
                    };
                    let mut intervals = [(0.0, 0.0); 4];
                    for j in 0..4 {
                        let half = 1.96 * (cov[j][j] / n).sqrt();
                        intervals[j] = (free[j] - half, free[j] + half);
                    }
                    let idp = IdParams::new(id.alpha * area, id.mu)
                        .expect("fitted parameters are positive");
                    let fi = idproc::fisher_info(&idp, delta)?;
                    validity_flag = Some(fi.validity_holds);
                    if !fi.validity_holds {
                        notes.push(
                            "asymptotic validity condition (log(α+μ) − log α)/μ ≥ 2Δ \
                             fails at the estimate; intervals are reported but the \
                             Gaussian approximation is not guaranteed"
                                .to_string(),
                        );
                    }
                    covariance = Some(cov);
                    ci95 = Some(intervals);
                }
                None => notes.push(
                    "grid is not equidistant: asymptotic covariance is not computed"
                        .to_string(),
                ),
            }
        }
    }

    Ok(FitResult {
        estimate,
        loglik,
        iterations,
        converged,
        covariance,
        ci95,
        cov_params,
        validity_flag,
        notes,
    })
}
