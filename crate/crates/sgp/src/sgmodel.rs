//! The full marked point process: individuals arrive on a rectangular window
//! as a Poisson process in space-time, live exponential lifetimes, and carry
//! independent CIR growth marks observed on a discrete sampling grid.
//!
//! Conventions fixed here and relied on everywhere else:
//! - Grid times are strictly increasing and positive with an implicit census
//!   at time 0 where the process is empty.
//! - Individual i is alive at grid time T_k iff B_i ≤ T_k < B_i + L_i with
//!   L_i its raw exponential lifetime. The *recorded* death time is truncated
//!   at the horizon, D_i = (B_i + L_i) ∧ T, so a survivor carries D_i = T and
//!   is alive at a final grid time that equals the horizon. Size-matrix
//!   validation accepts exactly this reading.
//! - Individuals never alive at any grid time are dropped and the survivors
//!   are re-labelled 1..d in birth order.

use crate::cir::{self, CirParams, NegativeFix};
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("sampling grid must contain at least one time")]
    EmptyGrid,
    #[error("grid times must be finite, positive, strictly increasing; violation at index {index}")]
    BadGridTime { index: usize },
    #[error("horizon {horizon} is earlier than the last grid time {last}")]
    HorizonBeforeGrid { horizon: f64, last: f64 },
    #[error("Euler step must be positive and finite, got {step}")]
    BadEulerStep { step: f64 },
    #[error("individual {id}: location ({x}, {y}) lies outside the {width} x {height} window")]
    LocationOutsideWindow { id: u64, x: f64, y: f64, width: f64, height: f64 },
    #[error("individual {id}: birth {birth} and death {death} violate 0 <= birth < death")]
    BadLifetime { id: u64, birth: f64, death: f64 },
    #[error("size matrix has {rows} rows but there are {individuals} individuals")]
    DimensionMismatch { rows: usize, individuals: usize },
    #[error("size-matrix row {row} has {len} entries, grid has {n} times")]
    RowLength { row: usize, len: usize, n: usize },
    #[error("size-matrix entry at row {row}, column {col} is negative or not finite")]
    BadMark { row: usize, col: usize },
    #[error("individual {id} (row {row}) has no positive entries: never alive on the grid")]
    AllZeroRow { row: usize, id: u64 },
    #[error("individual {id} (row {row}) resurrects: support broken at column {col}")]
    Contiguity { row: usize, id: u64, col: usize },
    #[error("individual {id} (row {row}): support disagrees with its lifetime at column {col}")]
    SupportMismatch { row: usize, id: u64, col: usize },
    #[error("grid index {index} out of range: {n} grid times")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Full parameter vector θ = (λ, K, σ, α, μ): CIR mark parameters plus the
/// arrival intensity α (per unit area and time) and death rate μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub cir: CirParams,
    alpha: f64,
    mu: f64,
}

impl ModelParams {
    pub fn new(cir: CirParams, alpha: f64, mu: f64) -> Result<Self, ModelError> {
        for (name, value) in [("alpha", alpha), ("mu", mu)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NotPositive { name, value });
            }
        }
        Ok(Self { cir, alpha, mu })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Rectangular observation window with its Lebesgue measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    width: f64,
    height: f64,
}

impl WindowSpec {
    pub fn new(width: f64, height: f64) -> Result<Self, ModelError> {
        for (name, value) in [("width", width), ("height", height)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NotPositive { name, value });
            }
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// ν(W) = width · height.
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

/// Strictly increasing positive sampling times T_1 < … < T_n with an implicit
/// census at T_0 = 0. `delta` is set when the grid is equidistant, T_k = kΔ.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    times: Vec<f64>,
    delta: Option<f64>,
}

impl SamplingGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, ModelError> {
        if times.is_empty() {
            return Err(ModelError::EmptyGrid);
        }
        let mut prev = 0.0;
        for (index, &t) in times.iter().enumerate() {
            if !(t.is_finite() && t > prev) {
                return Err(ModelError::BadGridTime { index });
            }
            prev = t;
        }
        let d0 = times[0];
        let equi = times
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - (k + 1) as f64 * d0).abs() <= 1e-9 * d0 * (k + 1) as f64);
        let delta = if equi { Some(d0) } else { None };
        Ok(Self { times, delta })
    }

    /// T_k = kΔ for k = 1..=n.
    pub fn equidistant(delta: f64, n: usize) -> Result<Self, ModelError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(ModelError::NotPositive { name: "delta", value: delta });
        }
        Self::new((1..=n).map(|k| k as f64 * delta).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// Spacing Δ when the grid is equidistant.
    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// Gaps T_k − T_{k−1} for k = 1..=n, including the implicit T_0 = 0,
    /// so the first entry is T_1 itself.
    pub fn gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect()
    }
}

/// One individual: label, spatial location, birth time, and recorded death
/// time D = (B + L) ∧ horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub location: (f64, f64),
    pub birth: f64,
    pub death: f64,
}

/// How marks start at birth: a common fixed value or a stationary draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    Fixed(f64),
    Stationary,
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::Fixed(0.1)
    }
}

/// Mark evolution between event and grid times: exact CIR transitions or
/// Euler–Maruyama substepping at the given step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkScheme {
    Exact,
    Euler { step: f64 },
}

/// A discretely observed realization: the window, the grid, the surviving
/// individuals, and the d×n size matrix M with m_{ik} > 0 exactly when
/// individual i is alive at T_k.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    window: WindowSpec,
    grid: SamplingGrid,
    individuals: Vec<Individual>,
    sizes: Vec<Vec<f64>>,
    init_mode: InitMode,
}

impl Trajectory {
    /// Validating constructor; enforces every structural invariant.
    pub fn new(
        window: WindowSpec,
        grid: SamplingGrid,
        individuals: Vec<Individual>,
        sizes: Vec<Vec<f64>>,
        init_mode: InitMode,
    ) -> Result<Self, ModelError> {
        if sizes.len() != individuals.len() {
            return Err(ModelError::DimensionMismatch {
                rows: sizes.len(),
                individuals: individuals.len(),
            });
        }
        let n = grid.n();
        let times = grid.times();
        let t_last = times[n - 1];
        for (row, (ind, r)) in individuals.iter().zip(sizes.iter()).enumerate() {
            if r.len() != n {
                return Err(ModelError::RowLength { row, len: r.len(), n });
            }
            if !(ind.birth >= 0.0 && ind.birth < ind.death && ind.death.is_finite()) {
                return Err(ModelError::BadLifetime {
                    id: ind.id,
                    birth: ind.birth,
                    death: ind.death,
                });
            }
            let (x, y) = ind.location;
            if !window.contains(x, y) {
                return Err(ModelError::LocationOutsideWindow {
                    id: ind.id,
                    x,
                    y,
                    width: window.width,
                    height: window.height,
                });
            }
            for (col, &m) in r.iter().enumerate() {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(ModelError::BadMark { row, col });
                }
                // alive ⟺ B ≤ T_k < D, plus the truncated-survivor case
                // T_k = D = last grid time
                let t = times[col];
                let alive = ind.birth <= t
                    && (t < ind.death || (t == ind.death && ind.death == t_last));
                if (m > 0.0) != alive {
                    return Err(ModelError::SupportMismatch { row, id: ind.id, col });
                }
            }
            // contiguity and non-emptiness of the positive block
            let first = r.iter().position(|&m| m > 0.0);
            match first {
                None => return Err(ModelError::AllZeroRow { row, id: ind.id }),
                Some(f) => {
                    let len_alive = r[f..].iter().take_while(|&&m| m > 0.0).count();
                    if let Some(gap) =
                        r[f + len_alive..].iter().position(|&m| m > 0.0)
                    {
                        return Err(ModelError::Contiguity {
                            row,
                            id: ind.id,
                            col: f + len_alive + gap,
                        });
                    }
                }
            }
        }
        Ok(Self { window, grid, individuals, sizes, init_mode })
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn init_mode(&self) -> InitMode {
        self.init_mode
    }

    /// Number of individuals d.
    pub fn d(&self) -> usize {
        self.individuals.len()
    }

    /// Number of grid times n.
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Size-matrix row of individual `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.sizes[i]
    }

    pub fn sizes(&self) -> &[Vec<f64>] {
        &self.sizes
    }

    /// Half-open column range [start, end) of the positive block in row `i`.
    pub fn alive_range(&self, i: usize) -> (usize, usize) {
        let r = &self.sizes[i];
        let start = r.iter().position(|&m| m > 0.0).expect("validated: no all-zero rows");
        let end = start + r[start..].iter().take_while(|&&m| m > 0.0).count();
        (start, end)
    }
}

/// Per-column index sets ω_k, first-alive index k_i per row, and the count
/// sequence |ω_k| for k = 1..=n (the census |ω_0| = 0 is implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSets {
    pub omega: Vec<Vec<usize>>,
    pub first_alive: Vec<usize>,
    pub counts: Vec<u64>,
}

/// Recompute ω_k, k_i and |ω_k| from the size matrix. Contiguity violations
/// are reported with the offending row (they cannot arise from a validated
/// [`Trajectory`], but the check keeps this entry point self-contained).
pub fn support_sets(traj: &Trajectory) -> Result<SupportSets, ModelError> {
    let n = traj.n();
    let mut omega = vec![Vec::new(); n];
    let mut first_alive = Vec::with_capacity(traj.d());
    for (row, r) in traj.sizes.iter().enumerate() {
        let first = match r.iter().position(|&m| m > 0.0) {
            Some(f) => f,
            None => return Err(ModelError::AllZeroRow { row, id: traj.individuals[row].id }),
        };
        let len_alive = r[first..].iter().take_while(|&&m| m > 0.0).count();
        if let Some(gap) = r[first + len_alive..].iter().position(|&m| m > 0.0) {
            return Err(ModelError::Contiguity {
                row,
                id: traj.individuals[row].id,
                col: first + len_alive + gap,
            });
        }
        first_alive.push(first);
        for k in first..first + len_alive {
            omega[k].push(row);
        }
    }
    let counts = omega.iter().map(|o| o.len() as u64).collect();
    Ok(SupportSets { omega, first_alive, counts })
}

/// The Boolean-model view at one grid time: a disk of radius m_{ik} around
/// each alive individual.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskSnapshot {
    pub time: f64,
    pub disks: Vec<(f64, f64, f64)>,
}

pub fn boolean_snapshot(traj: &Trajectory, k: usize) -> Result<DiskSnapshot, ModelError> {
    if k >= traj.n() {
        return Err(ModelError::IndexOutOfRange { index: k, n: traj.n() });
    }
    let disks = traj
        .individuals
        .iter()
        .zip(traj.sizes.iter())
        .filter(|(_, r)| r[k] > 0.0)
        .map(|(ind, r)| (ind.location.0, ind.location.1, r[k]))
        .collect();
    Ok(DiskSnapshot { time: traj.grid.times()[k], disks })
}

/// Simulate one realization.
///
/// Draws N ~ Poisson(α·ν(W)·horizon) arrivals, birth times iid uniform on
/// (0, horizon) sorted ascending, locations iid uniform on the window, and
/// lifetimes iid Exp(μ); evolves each mark from its initial value by exact
/// CIR transitions between birth/grid times or by Euler substepping; drops
/// individuals with no alive grid time.
pub fn simulate<R: Rng + ?Sized>(
    params: &ModelParams,
    window: &WindowSpec,
    horizon: f64,
    grid: &SamplingGrid,
    init_mode: InitMode,
    mark_scheme: MarkScheme,
    rng: &mut R,
) -> Result<Trajectory, ModelError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ModelError::NotPositive { name: "horizon", value: horizon });
    }
    let t_last = *grid.times().last().expect("grid is nonempty");
    if horizon < t_last {
        return Err(ModelError::HorizonBeforeGrid { horizon, last: t_last });
    }
    if let MarkScheme::Euler { step } = mark_scheme {
        if !(step.is_finite() && step > 0.0) {
            return Err(ModelError::BadEulerStep { step });
        }
    }
    if let InitMode::Fixed(v) = init_mode {
        if !(v.is_finite() && v > 0.0) {
            return Err(ModelError::NotPositive { name: "fixed initial mark", value: v });
        }
    }

    let n = grid.n();
    let times = grid.times();
    let total_rate = params.alpha * window.area() * horizon;
    let n_arrivals = Poisson::new(total_rate)
        .expect("total rate is positive and finite")
        .sample(rng) as u64;
    let mut births: Vec<f64> = (0..n_arrivals).map(|_| rng.gen::<f64>() * horizon).collect();
    births.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are not NaN"));

    let life_dist = Exp::new(params.mu).expect("mu is positive");
    let mut individuals = Vec::new();
    let mut sizes: Vec<Vec<f64>> = Vec::new();
    let mut next_id = 1u64;
    for birth in births {
        let location = (rng.gen::<f64>() * window.width, rng.gen::<f64>() * window.height);
        let lifetime: f64 = life_dist.sample(rng);
        let raw_death = birth + lifetime;
        // alive at T_k ⟺ B ≤ T_k < B + L (untruncated death)
        let k_first = times.partition_point(|&t| t < birth);
        let k_end = times.partition_point(|&t| t < raw_death);
        if k_first >= k_end {
            continue; // never alive at a grid time
        }
        let m0 = match init_mode {
            InitMode::Fixed(v) => v,
            InitMode::Stationary => cir::sample_stationary(rng, &params.cir),
        };
        let mut row = vec![0.0; n];
        let mut y = m0;
        let mut t_prev = birth;
        for (k, &t) in times.iter().enumerate().take(k_end).skip(k_first) {
            let dt = t - t_prev;
            if dt > 0.0 {
                y = match mark_scheme {
                    MarkScheme::Exact => cir::sample_transition(rng, dt, y, &params.cir),
                    MarkScheme::Euler { step } => {
                        cir::euler_step_to(rng, y, step, dt, &params.cir, NegativeFix::Reflect)
                    }
                };
            }
            // an exactly-zero mark would contradict the aliveness encoding;
            // it has probability zero but Euler truncation could produce it
            row[k] = y.max(f64::MIN_POSITIVE);
            t_prev = t;
        }
        individuals.push(Individual {
            id: next_id,
            location,
            birth,
            death: raw_death.min(horizon),
        });
        next_id += 1;
        sizes.push(row);
    }
    Trajectory::new(window.clone(), grid.clone(), individuals, sizes, init_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cir::CirParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row1_params() -> ModelParams {
        ModelParams::new(CirParams::new(0.5, 5.0, 0.1).unwrap(), 0.5, 0.01).unwrap()
    }

    fn unit_window() -> WindowSpec {
        WindowSpec::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(SamplingGrid::new(vec![]), Err(ModelError::EmptyGrid)));
        assert!(matches!(
            SamplingGrid::new(vec![1.0, 1.0]),
            Err(ModelError::BadGridTime { index: 1 })
        ));
        assert!(matches!(
            SamplingGrid::new(vec![-1.0, 2.0]),
            Err(ModelError::BadGridTime { index: 0 })
        ));
        let g = SamplingGrid::equidistant(1.0, 100).unwrap();
        assert_eq!(g.n(), 100);
        assert_eq!(g.delta(), Some(1.0));
        assert_eq!(g.times()[99], 100.0);
        assert_eq!(g.gaps()[0], 1.0);
        let irregular = SamplingGrid::new(vec![0.5, 1.0, 3.0]).unwrap();
        assert_eq!(irregular.delta(), None);
        assert_eq!(irregular.gaps(), vec![0.5, 0.5, 2.0]);
    }

    #[test]
    fn mean_arrival_count_matches_rate() {
        // α·ν(W)·horizon = 50; nearly every arrival is alive at some grid
        // time for μ = 0.01 and Δ = 1 (only deaths inside the birth gap are
        // dropped, expected fraction ≈ μΔ/2), so the kept count d has mean
        // ≈ 49.88. Band: 50 ± 3·√(50/200) plus the small drop allowance.
        let params = row1_params();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut total = 0usize;
        for _ in 0..200 {
            let traj = simulate(
                &params,
                &window,
                100.0,
                &grid,
                InitMode::Fixed(0.1),
                MarkScheme::Exact,
                &mut rng,
            )
            .unwrap();
            total += traj.d();
        }
        let mean = total as f64 / 200.0;
        assert!((mean - 50.0).abs() < 1.5 + 0.3, "mean kept count {mean}");
    }

    #[test]
    fn long_run_alive_count_reaches_stationary_mean() {
        // μ = 0.1, α = 5 on the unit window: stationary mean α/μ = 50.
        // The final grid time equals the horizon, so survivors must be
        // counted there — the truncated-death reading.
        let params =
            ModelParams::new(CirParams::new(0.5, 5.0, 0.1).unwrap(), 5.0, 0.1).unwrap();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut total = 0u64;
        let reps = 200;
        for _ in 0..reps {
            let traj = simulate(
                &params,
                &window,
                200.0,
                &grid,
                InitMode::Fixed(0.1),
                MarkScheme::Exact,
                &mut rng,
            )
            .unwrap();
            let ss = support_sets(&traj).unwrap();
            total += ss.counts[199];
        }
        let mean = total as f64 / reps as f64;
        // Var of a stationary count is ≈ 50, so 3 SE ≈ 3·√(50/200) = 1.5
        assert!((mean - 50.0).abs() < 1.5, "final-time mean count {mean}");
    }

    #[test]
    fn sigma_zero_is_rejected_and_tiny_sigma_follows_the_ode() {
        // σ = 0 cannot be expressed: parameter validation rejects it for
        // every scheme.
        assert!(CirParams::new(0.5, 5.0, 0.0).is_err());
        // At σ = 1e-8 the Euler scheme must track the deterministic
        // mean-reversion curve K − (K − m0)e^{−λ(t−B)/K} at every grid time.
        let cir = CirParams::new(0.5, 5.0, 1e-8).unwrap();
        let params = ModelParams::new(cir, 3.0, 0.05).unwrap();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let traj = simulate(
            &params,
            &window,
            10.0,
            &grid,
            InitMode::Fixed(0.1),
            MarkScheme::Euler { step: 1e-3 },
            &mut rng,
        )
        .unwrap();
        assert!(traj.d() > 0);
        let r = 0.5 / 5.0;
        for (ind, row) in traj.individuals().iter().zip(traj.sizes().iter()) {
            for (k, &m) in row.iter().enumerate() {
                if m > 0.0 {
                    let t = traj.grid().times()[k] - ind.birth;
                    let want = 5.0 - (5.0 - 0.1) * (-r * t).exp();
                    assert!(
                        (m - want).abs() < 1e-3,
                        "individual {} at grid time {}: {m} vs {want}",
                        ind.id,
                        traj.grid().times()[k]
                    );
                }
            }
        }
    }

    #[test]
    fn trajectory_invariants_and_count_recount() {
        let params =
            ModelParams::new(CirParams::new(0.5, 5.0, 0.1).unwrap(), 2.0, 0.05).unwrap();
        let window = WindowSpec::new(2.0, 1.5).unwrap();
        let grid = SamplingGrid::equidistant(0.5, 60).unwrap();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = simulate(
                &params,
                &window,
                31.0,
                &grid,
                InitMode::Stationary,
                MarkScheme::Exact,
                &mut rng,
            )
            .unwrap();
            // re-validation is the constructive invariant check
            let rebuilt = Trajectory::new(
                traj.window().clone(),
                traj.grid().clone(),
                traj.individuals().to_vec(),
                traj.sizes().to_vec(),
                traj.init_mode(),
            );
            assert!(rebuilt.is_ok());
            // counts equal per-column positive-entry recounts
            let ss = support_sets(&traj).unwrap();
            for k in 0..traj.n() {
                let recount =
                    traj.sizes().iter().filter(|r| r[k] > 0.0).count() as u64;
                assert_eq!(ss.counts[k], recount);
                assert_eq!(ss.omega[k].len() as u64, recount);
            }
            for (i, &f) in ss.first_alive.iter().enumerate() {
                assert_eq!(traj.alive_range(i).0, f);
            }
        }
    }

    #[test]
    fn support_sets_single_row_example() {
        // row (0, 2.1, 2.3, 0) on grid (1, 2, 3, 4): alive exactly at the
        // second and third grid times, so the first-alive index is the
        // second grid position
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 4).unwrap();
        let ind = Individual { id: 1, location: (0.5, 0.5), birth: 1.5, death: 3.5 };
        let traj = Trajectory::new(
            window,
            grid,
            vec![ind],
            vec![vec![0.0, 2.1, 2.3, 0.0]],
            InitMode::Fixed(0.1),
        )
        .unwrap();
        let ss = support_sets(&traj).unwrap();
        assert_eq!(ss.omega[0], Vec::<usize>::new());
        assert_eq!(ss.omega[1], vec![0]);
        assert_eq!(ss.omega[2], vec![0]);
        assert_eq!(ss.omega[3], Vec::<usize>::new());
        assert_eq!(ss.first_alive, vec![1]); // zero-based: the k = 2 grid slot
        assert_eq!(ss.counts, vec![0, 1, 1, 0]);
    }

    #[test]
    fn trajectory_rejects_broken_invariants() {
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 4).unwrap();
        let ind = Individual { id: 1, location: (0.5, 0.5), birth: 1.5, death: 3.5 };
        // resurrection
        let err = Trajectory::new(
            window.clone(),
            grid.clone(),
            vec![ind],
            vec![vec![0.0, 2.1, 0.0, 2.3]],
            InitMode::Fixed(0.1),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::SupportMismatch { .. } | ModelError::Contiguity { .. }
        ));
        // all-zero row (with a lifetime that misses the grid)
        let ghost = Individual { id: 2, location: (0.5, 0.5), birth: 1.1, death: 1.9 };
        let err = Trajectory::new(
            window.clone(),
            grid.clone(),
            vec![ghost],
            vec![vec![0.0, 0.0, 0.0, 0.0]],
            InitMode::Fixed(0.1),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::AllZeroRow { .. }));
        // location outside the window
        let outside = Individual { id: 3, location: (1.5, 0.5), birth: 1.5, death: 3.5 };
        let err = Trajectory::new(
            window.clone(),
            grid.clone(),
            vec![outside],
            vec![vec![0.0, 2.1, 2.3, 0.0]],
            InitMode::Fixed(0.1),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::LocationOutsideWindow { .. }));
        // support disagrees with the recorded lifetime
        let mismatched = Individual { id: 4, location: (0.5, 0.5), birth: 0.5, death: 3.5 };
        let err = Trajectory::new(
            window,
            grid,
            vec![mismatched],
            vec![vec![0.0, 2.1, 2.3, 0.0]],
            InitMode::Fixed(0.1),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::SupportMismatch { col: 0, .. }));
    }

    #[test]
    fn snapshot_matches_support() {
        let params = row1_params();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let traj = simulate(
            &params,
            &window,
            30.0,
            &grid,
            InitMode::Fixed(0.1),
            MarkScheme::Exact,
            &mut rng,
        )
        .unwrap();
        let ss = support_sets(&traj).unwrap();
        for k in [0usize, 10, 29] {
            let snap = boolean_snapshot(&traj, k).unwrap();
            assert_eq!(snap.disks.len() as u64, ss.counts[k]);
            assert!(snap.disks.iter().all(|&(_, _, r)| r > 0.0));
            assert_eq!(snap.time, traj.grid().times()[k]);
        }
        assert!(matches!(
            boolean_snapshot(&traj, 30),
            Err(ModelError::IndexOutOfRange { index: 30, n: 30 })
        ));
    }

    #[test]
    fn identical_seeds_reproduce_identically() {
        let params = row1_params();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 100).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            simulate(
                &params,
                &window,
                100.0,
                &grid,
                InitMode::Fixed(0.1),
                MarkScheme::Exact,
                &mut rng,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        // bitwise equality of every mark
        for (ra, rb) in a.sizes().iter().zip(b.sizes().iter()) {
            for (ma, mb) in ra.iter().zip(rb.iter()) {
                assert_eq!(ma.to_bits(), mb.to_bits());
            }
        }
    }

    #[test]
    fn first_marks_follow_the_transition_law() {
        // Two-sample KS: first observed mark of each individual vs fresh
        // exact transition draws over the same elapsed times.
        let params =
            ModelParams::new(CirParams::new(0.5, 5.0, 0.1).unwrap(), 100.0, 0.01).unwrap();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let traj = simulate(
            &params,
            &window,
            100.0,
            &grid,
            InitMode::Fixed(0.1),
            MarkScheme::Exact,
            &mut rng,
        )
        .unwrap();
        let ss = support_sets(&traj).unwrap();
        let mut firsts = Vec::with_capacity(traj.d());
        let mut oracle = Vec::with_capacity(traj.d());
        let mut rng2 = ChaCha8Rng::seed_from_u64(100);
        for (i, ind) in traj.individuals().iter().enumerate() {
            let k = ss.first_alive[i];
            let elapsed = traj.grid().times()[k] - ind.birth;
            firsts.push(traj.row(i)[k]);
            oracle.push(cir::sample_transition(&mut rng2, elapsed, 0.1, &params.cir));
        }
        firsts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n1 = firsts.len() as f64;
        // two-sample KS statistic
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < firsts.len() && j < oracle.len() {
            if firsts[i] <= oracle[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n1 - j as f64 / n1).abs());
        }
        let crit = 1.628 * (2.0 / n1).sqrt(); // 1% level
        assert!(n1 > 5000.0, "need a large sample, got {n1}");
        assert!(d < crit, "KS statistic {d} at n = {n1}, critical {crit}");
    }

    #[test]
    fn count_transitions_match_conditional_moments() {
        // Standardized residuals of |ω_{k+1}| against the immigration-death
        // conditional mean/variance must average out over 10⁴ transitions.
        use crate::idproc::{conditional_moments, IdParams};
        let params =
            ModelParams::new(CirParams::new(0.5, 5.0, 0.1).unwrap(), 5.0, 0.1).unwrap();
        let idp = IdParams::new(5.0, 0.1).unwrap();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut sum = 0.0;
        let mut count = 0u64;
        for _ in 0..200 {
            let traj = simulate(
                &params,
                &window,
                50.0,
                &grid,
                InitMode::Fixed(0.1),
                MarkScheme::Exact,
                &mut rng,
            )
            .unwrap();
            let ss = support_sets(&traj).unwrap();
            let mut prev = 0u64; // census at T_0 = 0: empty
            for &c in &ss.counts {
                let (mean, second) = conditional_moments(1.0, prev, &idp);
                let var = second - mean * mean;
                sum += (c as f64 - mean) / var.sqrt();
                count += 1;
                prev = c;
            }
        }
        let avg = sum / count as f64;
        assert!(count >= 10_000, "only {count} transitions");
        assert!(avg.abs() < 0.1, "standardized residual mean {avg}");
    }

    #[test]
    fn horizon_and_step_validation() {
        let params = row1_params();
        let window = unit_window();
        let grid = SamplingGrid::equidistant(1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            simulate(
                &params,
                &window,
                5.0,
                &grid,
                InitMode::Fixed(0.1),
                MarkScheme::Exact,
                &mut rng
            ),
            Err(ModelError::HorizonBeforeGrid { .. })
        ));
        assert!(matches!(
            simulate(
                &params,
                &window,
                10.0,
                &grid,
                InitMode::Fixed(0.1),
                MarkScheme::Euler { step: 0.0 },
                &mut rng
            ),
            Err(ModelError::BadEulerStep { .. })
        ));
    }
}
