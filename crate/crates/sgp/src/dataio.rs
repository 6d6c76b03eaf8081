//! Line-oriented text formats: trajectory files, fit reports, and
//! Boolean-snapshot exports (CSV/SVG).
//!
//! A trajectory file is self-describing: `#meta key=value` lines carry the
//! window, the sampling grid, the initialization mode, and the exact birth
//! and death times, followed by the data header
//! `time_index,time,individual_id,x,y,radius` and one row per (time,
//! individual) observation, sorted by (time_index, individual_id) with
//! 1-based time indices. All numbers are serialized as shortest
//! round-trip decimals, so `read(write(t)) == t` bit for bit.

use crate::estimate::FitResult;
use crate::likelihood::{LogLikBreakdown, Regime};
use crate::sgmodel::{
    DiskSnapshot, Individual, InitMode, ModelError, ModelParams, SamplingGrid, Trajectory,
    WindowSpec,
};
use crate::cir::CirParams;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("trajectory validation: {0}")]
    Model(#[from] ModelError),
}

fn bad(line: usize, msg: impl Into<String>) -> DataIoError {
    DataIoError::Malformed { line, msg: msg.into() }
}

const HEADER: &str = "time_index,time,individual_id,x,y,radius";

/// Serialize a trajectory, appending `extra` metadata entries (e.g. a seed
/// or generator parameters) after the structural keys. Unknown keys are
/// ignored by the reader, so extras never break the round trip.
pub fn trajectory_to_string_with_meta(traj: &Trajectory, extra: &[(String, String)]) -> String {
    let mut out = String::new();
    let w = traj.window();
    writeln!(out, "#meta format_version=1").unwrap();
    writeln!(out, "#meta window_width={}", w.width()).unwrap();
    writeln!(out, "#meta window_height={}", w.height()).unwrap();
    writeln!(out, "#meta n={}", traj.n()).unwrap();
    let times = traj.grid().times();
    let exact_equidistant = traj.grid().delta().filter(|&d| {
        times.iter().enumerate().all(|(k, &t)| t == (k + 1) as f64 * d)
    });
    match exact_equidistant {
        Some(d) => writeln!(out, "#meta delta={d}").unwrap(),
        None => {
            let list: Vec<String> = times.iter().map(|t| t.to_string()).collect();
            writeln!(out, "#meta times={}", list.join(",")).unwrap();
        }
    }
    match traj.init_mode() {
        InitMode::Fixed(v) => writeln!(out, "#meta init_mode=fixed:{v}").unwrap(),
        InitMode::Stationary => writeln!(out, "#meta init_mode=stationary").unwrap(),
    }
    if traj.d() > 0 {
        let births: Vec<String> =
            traj.individuals().iter().map(|i| format!("{}:{}", i.id, i.birth)).collect();
        let deaths: Vec<String> =
            traj.individuals().iter().map(|i| format!("{}:{}", i.id, i.death)).collect();
        writeln!(out, "#meta births={}", births.join(",")).unwrap();
        writeln!(out, "#meta deaths={}", deaths.join(",")).unwrap();
    }
    for (k, v) in extra {
        writeln!(out, "#meta {k}={v}").unwrap();
    }
    writeln!(out, "{HEADER}").unwrap();

    // rows sorted by (time_index, individual_id); individuals are stored in
    // id order for simulated trajectories, but sort defensively
    let mut order: Vec<usize> = (0..traj.d()).collect();
    order.sort_by_key(|&i| traj.individuals()[i].id);
    for k in 0..traj.n() {
        for &i in &order {
            let (s, e) = traj.alive_range(i);
            if k >= s && k < e {
                let ind = &traj.individuals()[i];
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    k + 1,
                    times[k],
                    ind.id,
                    ind.location.0,
                    ind.location.1,
                    traj.row(i)[k]
                )
                .unwrap();
            }
        }
    }
    out
}

pub fn trajectory_to_string(traj: &Trajectory) -> String {
    trajectory_to_string_with_meta(traj, &[])
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64, DataIoError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| bad(line, format!("{what} is not a number: {s:?}")))
}

/// Parse `id:value` pair lists from the births/deaths metadata.
fn parse_id_map(s: &str, line: usize, what: &str) -> Result<BTreeMap<u64, f64>, DataIoError> {
    let mut map = BTreeMap::new();
    for part in s.split(',') {
        let (id, v) = part
            .split_once(':')
            .ok_or_else(|| bad(line, format!("{what} entry {part:?} is not id:value")))?;
        let id: u64 = id
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("{what} id is not an integer: {id:?}")))?;
        let v = parse_f64(v, line, what)?;
        if map.insert(id, v).is_some() {
            return Err(bad(line, format!("{what} repeats id {id}")));
        }
    }
    Ok(map)
}

struct RowAccum {
    location: (f64, f64),
    first_k: usize,
    last_k: usize,
    radii: Vec<f64>,
    first_line: usize,
}

pub fn trajectory_from_str(text: &str) -> Result<Trajectory, DataIoError> {
    let mut meta: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut header_line = 0;
    for (idx, raw) in lines.by_ref() {
        let line = idx + 1;
        if raw == HEADER {
            header_line = line;
            break;
        }
        let rest = raw
            .strip_prefix("#meta ")
            .ok_or_else(|| bad(line, format!("expected '#meta key=value' or the data header, got {raw:?}")))?;
        let (k, v) = rest
            .split_once('=')
            .ok_or_else(|| bad(line, "metadata line is missing '='"))?;
        if meta.insert(k.trim().to_string(), (v.to_string(), line)).is_some() {
            return Err(bad(line, format!("duplicate metadata key {k:?}")));
        }
    }
    if header_line == 0 {
        return Err(bad(text.lines().count(), "data header line is missing"));
    }

    let take = |key: &str| -> Result<(String, usize), DataIoError> {
        meta.get(key)
            .cloned()
            .ok_or_else(|| bad(header_line, format!("metadata key {key} is missing")))
    };
    let (fv, fv_line) = take("format_version")?;
    if fv.trim() != "1" {
        return Err(bad(fv_line, format!("unsupported format_version {fv:?}")));
    }
    let (wv, wl) = take("window_width")?;
    let width = parse_f64(&wv, wl, "window_width")?;
    let (hv, hl) = take("window_height")?;
    let height = parse_f64(&hv, hl, "window_height")?;
    let window = WindowSpec::new(width, height).map_err(|e| bad(wl.min(hl), e.to_string()))?;
    let (nv, nl) = take("n")?;
    let n: usize = nv
        .trim()
        .parse()
        .map_err(|_| bad(nl, format!("n is not a positive integer: {nv:?}")))?;

    let grid = match (meta.get("delta"), meta.get("times")) {
        (Some((dv, dl)), None) => {
            let delta = parse_f64(dv, *dl, "delta")?;
            SamplingGrid::equidistant(delta, n).map_err(|e| bad(*dl, e.to_string()))?
        }
        (None, Some((tv, tl))) => {
            let mut times = Vec::with_capacity(n);
            for part in tv.split(',') {
                times.push(parse_f64(part, *tl, "times entry")?);
            }
            if times.len() != n {
                return Err(bad(*tl, format!("times lists {} entries, n={n}", times.len())));
            }
            SamplingGrid::new(times).map_err(|e| bad(*tl, e.to_string()))?
        }
        (Some(_), Some((_, tl))) => {
            return Err(bad(*tl, "both delta and times are present; exactly one is allowed"))
        }
        (None, None) => return Err(bad(header_line, "neither delta nor times metadata present")),
    };
    let times = grid.times().to_vec();

    let (iv, il) = take("init_mode")?;
    let init_mode = match iv.trim() {
        "stationary" => InitMode::Stationary,
        s => match s.strip_prefix("fixed:") {
            Some(v) => InitMode::Fixed(parse_f64(v, il, "init_mode fixed value")?),
            None => return Err(bad(il, format!("init_mode must be stationary or fixed:<v>, got {s:?}"))),
        },
    };
    let births = match meta.get("births") {
        Some((v, l)) => Some(parse_id_map(v, *l, "births")?),
        None => None,
    };
    let deaths = match meta.get("deaths") {
        Some((v, l)) => Some(parse_id_map(v, *l, "deaths")?),
        None => None,
    };
    if births.is_some() != deaths.is_some() {
        return Err(bad(header_line, "births and deaths metadata must come together"));
    }

    // data rows
    let mut accum: BTreeMap<u64, RowAccum> = BTreeMap::new();
    let mut prev_key: Option<(usize, u64)> = None;
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            return Err(bad(line, "blank line inside the data section"));
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(line, format!("expected 6 comma-separated fields, got {}", fields.len())));
        }
        let k: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("time_index is not an integer: {:?}", fields[0])))?;
        if !(1..=n).contains(&k) {
            return Err(bad(line, format!("time_index {k} outside 1..={n}")));
        }
        let t = parse_f64(fields[1], line, "time")?;
        if t != times[k - 1] {
            return Err(bad(line, format!("time {t} does not match grid time {} at index {k}", times[k - 1])));
        }
        let id: u64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("individual_id is not an integer: {:?}", fields[2])))?;
        let x = parse_f64(fields[3], line, "x")?;
        let y = parse_f64(fields[4], line, "y")?;
        let radius = parse_f64(fields[5], line, "radius")?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(bad(line, format!("radius must be positive, got {radius}")));
        }
        if !window.contains(x, y) {
            return Err(bad(line, format!("location ({x}, {y}) outside the window")));
        }
        if let Some((pk, pid)) = prev_key {
            if k < pk || (k == pk && id <= pid) {
                return Err(bad(line, format!(
                    "rows not sorted by (time_index, individual_id): ({k}, {id}) after ({pk}, {pid})"
                )));
            }
        }
        prev_key = Some((k, id));
        match accum.get_mut(&id) {
            None => {
                accum.insert(id, RowAccum {
                    location: (x, y),
                    first_k: k,
                    last_k: k,
                    radii: vec![radius],
                    first_line: line,
                });
            }
            Some(a) => {
                if (x, y) != a.location {
                    return Err(bad(line, format!(
                        "location drift for individual {id}: ({x}, {y}) vs ({}, {})",
                        a.location.0, a.location.1
                    )));
                }
                if k != a.last_k + 1 {
                    return Err(bad(line, format!(
                        "individual {id} resurrected at time_index {k} after {}",
                        a.last_k
                    )));
                }
                a.last_k = k;
                a.radii.push(radius);
            }
        }
    }

    // assemble in id order
    let mean_gap = times[n - 1] / n as f64;
    let mut individuals = Vec::with_capacity(accum.len());
    let mut sizes = Vec::with_capacity(accum.len());
    for (&id, a) in &accum {
        let (birth, death) = match (&births, &deaths) {
            (Some(b), Some(d)) => {
                let birth = *b.get(&id).ok_or_else(|| {
                    bad(a.first_line, format!("births metadata is missing id {id}"))
                })?;
                let death = *d.get(&id).ok_or_else(|| {
                    bad(a.first_line, format!("deaths metadata is missing id {id}"))
                })?;
                (birth, death)
            }
            // impute: born at the first observed grid time, dead at the
            // first grid time past the block (one mean gap past the grid
            // when the block runs to the end)
            _ => {
                let birth = times[a.first_k - 1];
                let death = if a.last_k < n { times[a.last_k] } else { times[n - 1] + mean_gap };
                (birth, death)
            }
        };
        individuals.push(Individual { id, location: a.location, birth, death });
        let mut row = vec![0.0; n];
        row[(a.first_k - 1)..a.last_k].copy_from_slice(&a.radii);
        sizes.push(row);
    }
    if let (Some(b), _) = (&births, &deaths) {
        if b.len() != accum.len() {
            return Err(bad(header_line, format!(
                "births metadata lists {} ids but the data has {}",
                b.len(),
                accum.len()
            )));
        }
    }

    Ok(Trajectory::new(window, grid, individuals, sizes, init_mode)?)
}

pub fn write_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<(), DataIoError> {
    Ok(std::fs::write(path, trajectory_to_string(traj))?)
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, DataIoError> {
    trajectory_from_str(&std::fs::read_to_string(path)?)
}

/// Serialize a fit result as commented key=value lines.
pub fn fit_report_to_string(fit: &FitResult) -> String {
    let mut out = String::new();
    writeln!(out, "# fit report").unwrap();
    writeln!(out, "format_version=1").unwrap();
    let regime = match fit.loglik.regime {
        Regime::Nonstationary => "nonstationary",
        Regime::Stationary => "stationary",
    };
    writeln!(out, "regime={regime}").unwrap();
    writeln!(out, "lambda={}", fit.estimate.cir.lambda()).unwrap();
    writeln!(out, "capacity={}", fit.estimate.cir.capacity()).unwrap();
    writeln!(out, "sigma={}", fit.estimate.cir.sigma()).unwrap();
    writeln!(out, "alpha={}", fit.estimate.alpha()).unwrap();
    writeln!(out, "mu={}", fit.estimate.mu()).unwrap();
    writeln!(out, "# log-likelihood parts: mark transitions, first marks, counts").unwrap();
    writeln!(out, "loglik_l1={}", fit.loglik.l1).unwrap();
    writeln!(out, "loglik_l2={}", fit.loglik.l2).unwrap();
    writeln!(out, "loglik_l3={}", fit.loglik.l3).unwrap();
    writeln!(out, "loglik_total={}", fit.loglik.total).unwrap();
    writeln!(out, "iterations={}", fit.iterations).unwrap();
    writeln!(out, "converged={}", fit.converged).unwrap();
    if let Some(v) = fit.validity_flag {
        writeln!(out, "validity={v}").unwrap();
    }
    if let Some(names) = fit.cov_params {
        writeln!(out, "# asymptotic covariance of the free parameters, row by row").unwrap();
        writeln!(out, "cov_params={}", names.join(",")).unwrap();
    }
    if let Some(cov) = fit.covariance {
        for (r, row) in cov.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                writeln!(out, "cov_{r}_{c}={v}").unwrap();
            }
        }
    }
    if let Some(ci) = fit.ci95 {
        for (j, (lo, hi)) in ci.iter().enumerate() {
            writeln!(out, "ci95_{j}={lo},{hi}").unwrap();
        }
    }
    for (j, note) in fit.notes.iter().enumerate() {
        writeln!(out, "note_{j}={note}").unwrap();
    }
    out
}

pub fn fit_report_from_str(text: &str) -> Result<FitResult, DataIoError> {
    let mut kv: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut last = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last = line;
        if raw.starts_with("# ") || raw.is_empty() {
            continue;
        }
        let (k, v) = raw
            .split_once('=')
            .ok_or_else(|| bad(line, "expected key=value"))?;
        if kv.insert(k.to_string(), (v.to_string(), line)).is_some() {
            return Err(bad(line, format!("duplicate key {k:?}")));
        }
    }
    let take = |key: &str| -> Result<(String, usize), DataIoError> {
        kv.get(key).cloned().ok_or_else(|| bad(last, format!("key {key} is missing")))
    };
    let num = |key: &str| -> Result<f64, DataIoError> {
        let (v, l) = take(key)?;
        parse_f64(&v, l, key)
    };
    let (fv, fl) = take("format_version")?;
    if fv.trim() != "1" {
        return Err(bad(fl, format!("unsupported format_version {fv:?}")));
    }
    let (rv, rl) = take("regime")?;
    let regime = match rv.trim() {
        "nonstationary" => Regime::Nonstationary,
        "stationary" => Regime::Stationary,
        other => return Err(bad(rl, format!("unknown regime {other:?}"))),
    };
    let cir = CirParams::new(num("lambda")?, num("capacity")?, num("sigma")?)
        .map_err(|e| bad(last, e.to_string()))?;
    let estimate = ModelParams::new(cir, num("alpha")?, num("mu")?)
        .map_err(|e| bad(last, e.to_string()))?;
    let loglik = LogLikBreakdown {
        l1: num("loglik_l1")?,
        l2: num("loglik_l2")?,
        l3: num("loglik_l3")?,
        total: num("loglik_total")?,
        regime,
    };
    let (it, itl) = take("iterations")?;
    let iterations: usize = it
        .trim()
        .parse()
        .map_err(|_| bad(itl, format!("iterations is not an integer: {it:?}")))?;
    let (cv, cl) = take("converged")?;
    let converged: bool = cv
        .trim()
        .parse()
        .map_err(|_| bad(cl, format!("converged is not a boolean: {cv:?}")))?;
    let validity_flag = match kv.get("validity") {
        Some((v, l)) => Some(
            v.trim()
                .parse::<bool>()
                .map_err(|_| bad(*l, format!("validity is not a boolean: {v:?}")))?,
        ),
        None => None,
    };
    let cov_params = match kv.get("cov_params") {
        Some((v, l)) => {
            const ORDERS: [[&str; 4]; 2] = [
                ["capacity", "sigma", "alpha", "mu"],
                ["lambda", "capacity", "alpha", "mu"],
            ];
            let got: Vec<&str> = v.trim().split(',').collect();
            let matched = ORDERS.iter().find(|o| o.as_slice() == got.as_slice());
            Some(*matched.ok_or_else(|| bad(*l, format!("unknown cov_params order {v:?}")))?)
        }
        None => None,
    };
    let covariance = if kv.contains_key("cov_0_0") {
        let mut cov = [[0.0; 4]; 4];
        for (r, row) in cov.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = num(&format!("cov_{r}_{c}"))?;
            }
        }
        Some(cov)
    } else {
        None
    };
    let ci95 = if kv.contains_key("ci95_0") {
        let mut ci = [(0.0, 0.0); 4];
        for (j, slot) in ci.iter_mut().enumerate() {
            let (v, l) = take(&format!("ci95_{j}"))?;
            let (lo, hi) = v
                .split_once(',')
                .ok_or_else(|| bad(l, "ci95 entry must be lo,hi"))?;
            *slot = (parse_f64(lo, l, "ci95 low")?, parse_f64(hi, l, "ci95 high")?);
        }
        Some(ci)
    } else {
        None
    };
    let mut notes = Vec::new();
    for j in 0.. {
        match kv.get(&format!("note_{j}")) {
            Some((v, _)) => notes.push(v.clone()),
            None => break,
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

pub fn write_fit_report(fit: &FitResult, path: impl AsRef<Path>) -> Result<(), DataIoError> {
    Ok(std::fs::write(path, fit_report_to_string(fit))?)
}

pub fn read_fit_report(path: impl AsRef<Path>) -> Result<FitResult, DataIoError> {
    fit_report_from_str(&std::fs::read_to_string(path)?)
}

/// Snapshot export format; the SVG variant scales displayed radii (the
/// underlying data is untouched).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnapshotFormat {
    Csv,
    Svg { scale: f64 },
}

/// Render a Boolean-model snapshot: CSV rows (x, y, radius) or an SVG with
/// one circle per disk and the window as the view box.
pub fn snapshot_to_string(
    snapshot: &DiskSnapshot,
    window: &WindowSpec,
    format: SnapshotFormat,
) -> String {
    let mut out = String::new();
    match format {
        SnapshotFormat::Csv => {
            writeln!(out, "x,y,radius").unwrap();
            for &(x, y, r) in &snapshot.disks {
                writeln!(out, "{x},{y},{r}").unwrap();
            }
        }
        SnapshotFormat::Svg { scale } => {
            writeln!(
                out,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\">",
                window.width(),
                window.height()
            )
            .unwrap();
            for &(x, y, r) in &snapshot.disks {
                writeln!(
                    out,
                    "  <circle cx=\"{x}\" cy=\"{y}\" r=\"{}\" fill=\"black\" fill-opacity=\"0.6\"/>",
                    r * scale
                )
                .unwrap();
            }
            writeln!(out, "</svg>").unwrap();
        }
    }
    out
}

pub fn export_snapshot(
    snapshot: &DiskSnapshot,
    window: &WindowSpec,
    format: SnapshotFormat,
    path: impl AsRef<Path>,
) -> Result<(), DataIoError> {
    Ok(std::fs::write(path, snapshot_to_string(snapshot, window, format))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgmodel::{boolean_snapshot, simulate, MarkScheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sim(seed: u64) -> Trajectory {
        let cir = CirParams::new(0.5, 5.0, 0.1).unwrap();
        let model = ModelParams::new(cir, 0.5, 0.01).unwrap();
        let window = WindowSpec::new(1.0, 1.0).unwrap();
        let grid = SamplingGrid::equidistant(1.0, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simulate(&model, &window, 40.0, &grid, InitMode::Fixed(0.1), MarkScheme::Exact, &mut rng)
            .unwrap()
    }

    #[test]
    fn trajectory_round_trip_is_identity() {
        for seed in 0..20u64 {
            let traj = sim(seed);
            let text = trajectory_to_string(&traj);
            let back = trajectory_from_str(&text).unwrap();
            assert_eq!(back, traj, "seed {seed}");
            // and the second write is bytewise identical
            assert_eq!(trajectory_to_string(&back), text, "seed {seed}");
        }
    }

    #[test]
    fn non_equidistant_grid_round_trips_via_times_list() {
        let window = WindowSpec::new(2.0, 1.0).unwrap();
        let grid = SamplingGrid::new(vec![0.5, 1.0, 2.5, 4.0]).unwrap();
        let ind = Individual { id: 3, location: (1.5, 0.25), birth: 0.7, death: 3.1 };
        let traj = Trajectory::new(
            window,
            grid,
            vec![ind],
            vec![vec![0.0, 0.2, 0.25, 0.0]],
            InitMode::Stationary,
        )
        .unwrap();
        let text = trajectory_to_string(&traj);
        assert!(text.contains("#meta times=0.5,1,2.5,4"), "{text}");
        assert_eq!(trajectory_from_str(&text).unwrap(), traj);
    }

    #[test]
    fn reader_imputes_birth_and_death_without_meta() {
        let traj = sim(4);
        let text = trajectory_to_string(&traj);
        let stripped: String = text
            .lines()
            .filter(|l| !l.starts_with("#meta births=") && !l.starts_with("#meta deaths="))
            .map(|l| format!("{l}\n"))
            .collect();
        let back = trajectory_from_str(&stripped).unwrap();
        assert_eq!(back.d(), traj.d());
        for i in 0..traj.d() {
            assert_eq!(back.alive_range(i), traj.alive_range(i), "support preserved");
            assert_eq!(back.row(i), traj.row(i), "marks preserved");
        }
    }

    #[test]
    fn reader_rejects_corruptions_with_line_numbers() {
        let traj = sim(9);
        let text = trajectory_to_string(&traj);
        let lines: Vec<&str> = text.lines().collect();
        let first_data = lines.iter().position(|l| *l == HEADER).unwrap() + 1;

        let reject = |mutated: String, needle: &str| {
            let err = trajectory_from_str(&mutated).expect_err(needle);
            let msg = err.to_string();
            assert!(msg.contains(needle), "wanted {needle:?} in {msg:?}");
            msg
        };

        // radius zero on a data row, diagnostic carries the line number
        let mut v = lines.clone();
        let victim = first_data;
        let mut fields: Vec<String> = v[victim].split(',').map(str::to_string).collect();
        fields[5] = "0".to_string();
        let row = fields.join(",");
        v[victim] = &row;
        let msg = reject(v.join("\n"), "radius");
        assert!(msg.contains(&format!("line {}", victim + 1)), "{msg}");

        // resurrection: pick an individual whose block ends two indices
        // before the grid does and splice a row for it one step past its
        // death, at the correct sorted position
        let (idx, (_, e)) = (0..traj.d())
            .map(|i| (i, traj.alive_range(i)))
            .find(|&(_, (_, e))| e + 1 < traj.n())
            .expect("the seed provides an individual dying early enough");
        let ind = &traj.individuals()[idx];
        let times = traj.grid().times();
        let k_resurrect = e + 2; // 1-based index e+2 = two past the block end
        let resurrect = format!(
            "{},{},{},{},{},0.04",
            k_resurrect,
            times[k_resurrect - 1],
            ind.id,
            ind.location.0,
            ind.location.1
        );
        let mut v = lines.clone();
        let insert_at = v
            .iter()
            .position(|l| {
                if !l.contains(',') || l.starts_with('#') || *l == HEADER {
                    return false;
                }
                let f: Vec<&str> = l.split(',').collect();
                let k: usize = f[0].parse().unwrap();
                let id: u64 = f[2].parse().unwrap();
                (k, id) > (k_resurrect, ind.id)
            })
            .unwrap_or(v.len());
        v.insert(insert_at, &resurrect);
        let err = trajectory_from_str(&v.join("\n")).expect_err("resurrected row accepted");
        let s = err.to_string();
        assert!(s.contains(&format!("individual {} resurrected", ind.id)), "{s}");

        // location drift
        let mut v = lines.clone();
        let mut fields: Vec<String> = v[victim].split(',').map(str::to_string).collect();
        fields[3] = "0.123456".to_string();
        let row = fields.join(",");
        // drift needs a second row of the same individual; mutate the first
        v[victim] = &row;
        let err = trajectory_from_str(&v.join("\n")).expect_err("drift accepted");
        let s = err.to_string();
        assert!(s.contains("drift") || s.contains("births"), "{s}");

        // unsorted rows
        let mut v = lines.clone();
        v.swap(first_data, first_data + 1);
        reject(v.join("\n"), "not sorted");

        // malformed header
        let mut v = lines.clone();
        let pos = v.iter().position(|l| *l == HEADER).unwrap();
        v[pos] = "time_index,time,individual,x,y,radius";
        reject(v.join("\n"), "expected");

        // missing metadata
        let v: Vec<&str> = lines.iter().filter(|l| !l.starts_with("#meta n=")).cloned().collect();
        reject(v.join("\n"), "metadata key n");
    }

    #[test]
    fn fit_report_round_trips() {
        use crate::estimate::{fit_full, FitOptions, FixedParam};
        use crate::likelihood::Regime;
        let traj = sim(13);
        let opts = FitOptions {
            regime: Regime::Stationary,
            fixed: FixedParam::SigmaKnown(0.1),
            ..FitOptions::default()
        };
        let fit = fit_full(&traj, &opts).unwrap();
        assert!(fit.covariance.is_some());
        let text = fit_report_to_string(&fit);
        let back = fit_report_from_str(&text).unwrap();
        assert_eq!(back, fit);

        // a report without optional blocks also round-trips
        let opts = FitOptions { regime: Regime::Stationary, ..FitOptions::default() };
        let fit = fit_full(&traj, &opts).unwrap();
        assert!(fit.covariance.is_none());
        let back = fit_report_from_str(&fit_report_to_string(&fit)).unwrap();
        assert_eq!(back, fit);
    }

    #[test]
    fn snapshot_exports() {
        let traj = sim(2);
        let k = traj.n() - 1;
        let snap = boolean_snapshot(&traj, k).unwrap();
        let window = *traj.window();

        let csv = snapshot_to_string(&snap, &window, SnapshotFormat::Csv);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "x,y,radius");
        assert_eq!(rows.len() - 1, snap.disks.len(), "disk count preserved");

        let svg = snapshot_to_string(&snap, &window, SnapshotFormat::Svg { scale: 10.0 });
        assert!(svg.contains("viewBox=\"0 0 1 1\""), "{svg}");
        assert_eq!(svg.matches("<circle").count(), snap.disks.len());
        // scale multiplies the first radius by 10
        let r0 = snap.disks[0].2;
        assert!(svg.contains(&format!("r=\"{}\"", r0 * 10.0)), "{svg}");

        // empty snapshot → header-only csv
        let empty = DiskSnapshot { time: snap.time, disks: vec![] };
        assert_eq!(snapshot_to_string(&empty, &window, SnapshotFormat::Csv), "x,y,radius\n");
    }
}
