//! Sensor series, z-score scaling, chronological windowing and a synthetic
//! traffic generator.
//!
//! Missing readings are encoded as exact `0.0`. The scaler ignores them and
//! every loss or metric masks them out.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{normalize, NodeGraph};
use crate::numerics::{Matrix, Rng};

/// Steps per synthetic day.
pub const SYNTH_PERIOD: usize = 288;

/// Readings for `n` sensors over `steps` timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    ids: Vec<String>,
    timestamps: Vec<String>,
    readings: Matrix,
}

impl SeriesTable {
    pub fn new(ids: Vec<String>, timestamps: Vec<String>, readings: Matrix) -> Result<Self> {
        if readings.cols() != ids.len() || readings.rows() != timestamps.len() {
            return Err(Error::contract(format!(
                "{} timestamps and {} ids do not fit a {}x{} table",
                timestamps.len(),
                ids.len(),
                readings.rows(),
                readings.cols()
            )));
        }
        if let Some(t) = (1..timestamps.len())
            .find(|&t| timestamp_order(&timestamps[t - 1], &timestamps[t]) != Ordering::Less)
        {
            return Err(Error::contract(format!(
                "timestamp `{}` at step {t} does not follow `{}`",
                timestamps[t],
                timestamps[t - 1]
            )));
        }
        Ok(Self {
            ids,
            timestamps,
            readings,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    /// `steps × n`.
    pub fn readings(&self) -> &Matrix {
        &self.readings
    }

    pub fn steps(&self) -> usize {
        self.readings.rows()
    }

    pub fn node_count(&self) -> usize {
        self.readings.cols()
    }

    /// Rows `start..end` as a new table.
    pub fn slice(&self, start: usize, end: usize) -> SeriesTable {
        SeriesTable {
            ids: self.ids.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            readings: self.readings.slice_rows(start, end),
        }
    }

    /// Columns reordered so that old column `v` becomes column `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<SeriesTable> {
        crate::graphs::check_permutation(perm, self.node_count())?;
        let mut ids = self.ids.clone();
        let mut readings = Matrix::zeros(self.steps(), self.node_count());
        for (v, &to) in perm.iter().enumerate() {
            ids[to] = self.ids[v].clone();
            for t in 0..self.steps() {
                readings[(t, to)] = self.readings[(t, v)];
            }
        }
        Ok(SeriesTable {
            ids,
            timestamps: self.timestamps.clone(),
            readings,
        })
    }
}

/// Numeric timestamps compare as numbers, anything else lexicographically.
fn timestamp_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

/// Reads a `timestamp,<id1>,<id2>,…` table whose id columns must match `ids_path`.
pub fn load_series(readings_path: &Path, ids_path: &Path) -> Result<SeriesTable> {
    let ids = crate::graphs::read_ids(ids_path)?;
    let text = std::fs::read_to_string(readings_path).map_err(|e| Error::io(readings_path, e))?;
    parse_series(&text, &ids, &readings_path.display().to_string())
}

pub fn parse_series(text: &str, ids: &[String], origin: &str) -> Result<SeriesTable> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty readings file".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() != ids.len() + 1 {
        return Err(err(
            hline,
            format!("header has {} sensor columns, id file lists {}", columns.len() - 1, ids.len()),
        ));
    }
    if let Some((col, (got, want))) = columns[1..]
        .iter()
        .zip(ids)
        .enumerate()
        .find(|(_, (got, want))| **got != want.as_str())
    {
        return Err(err(
            hline,
            format!("column {} is `{got}`, id file expects `{want}`", col + 2),
        ));
    }

    let n = ids.len();
    let mut timestamps: Vec<String> = Vec::new();
    let mut data = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(err(
                lineno,
                format!("expected {} fields, found {}", n + 1, fields.len()),
            ));
        }
        let stamp = fields[0];
        if let Some(prev) = timestamps.last() {
            if timestamp_order(prev, stamp) != Ordering::Less {
                return Err(err(
                    lineno,
                    format!("timestamp `{stamp}` does not follow `{prev}`"),
                ));
            }
        }
        for (col, field) in fields[1..].iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| err(lineno, format!("bad reading `{field}` for `{}`", ids[col])))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite reading for `{}`", ids[col])));
            }
            data.push(v);
        }
        timestamps.push(stamp.to_string());
    }
    let readings = Matrix::from_vec(timestamps.len(), n, data)?;
    SeriesTable::new(ids.to_vec(), timestamps, readings)
}

/// Text form accepted by [`parse_series`]; values use the shortest exact representation.
pub fn format_series(table: &SeriesTable) -> String {
    let mut out = String::from("timestamp");
    for id in &table.ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (t, stamp) in table.timestamps.iter().enumerate() {
        out.push_str(stamp);
        for v in table.readings.row(t) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn write_series(table: &SeriesTable, path: &Path) -> Result<()> {
    std::fs::write(path, format_series(table)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// scaling

/// Global z-score transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

/// Lower bound applied to the fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

impl Scaler {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_matrix(&self, m: &Matrix) -> Matrix {
        m.map(|x| self.apply(x))
    }

    pub fn inverse_matrix(&self, m: &Matrix) -> Matrix {
        m.map(|z| self.inverse(z))
    }
}

/// Number of leading steps in a split of `fraction · steps`, rounded down.
pub fn split_len(steps: usize, fraction: f64) -> usize {
    ((steps as f64) * fraction).floor() as usize
}

/// Mean and population standard deviation of the nonzero readings among the
/// first `⌊train_fraction · steps⌋` steps.
pub fn fit_scaler(table: &SeriesTable, train_fraction: f64) -> Result<Scaler> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::contract(format!(
            "train fraction {train_fraction} outside (0, 1]"
        )));
    }
    let rows = split_len(table.steps(), train_fraction);
    let values: Vec<f64> = table
        .readings
        .slice_rows(0, rows)
        .into_vec()
        .into_iter()
        .filter(|&v| v != 0.0)
        .collect();
    if values.is_empty() {
        return Err(Error::contract("training slice has no nonzero readings"));
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let std = var.sqrt();
    if std < STD_FLOOR {
        log::warn!("training readings are constant; std floored at {STD_FLOOR:e}");
    }
    Ok(Scaler {
        mean,
        std: std.max(STD_FLOOR),
    })
}

// ---------------------------------------------------------------------------
// windowing

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Chronological train and validation fractions; the test split takes the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Splits {
    pub train: f64,
    pub val: f64,
}

impl Default for Splits {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
        }
    }
}

impl Splits {
    pub fn validate(&self) -> Result<()> {
        let ok = self.train > 0.0 && self.val >= 0.0 && self.train + self.val <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "splits train={} val={} must be non-negative and sum to at most 1",
                self.train, self.val
            )))
        }
    }

    /// Step counts `(train, val, test)`.
    pub fn sizes(&self, steps: usize) -> (usize, usize, usize) {
        let train = split_len(steps, self.train);
        let val = split_len(steps, self.val).min(steps - train);
        (train, val, steps - train - val)
    }
}

#[derive(Debug)]
struct Prepared {
    raw: Matrix,
    normalized: Matrix,
    scaler: Scaler,
}

/// Stride-1 windows over one chronological split.
///
/// Samples are views: window `i` reads steps `start(i) .. start(i) + T′` as
/// input and the following `T` steps as target.
#[derive(Clone, Debug)]
pub struct WindowedDataset {
    split: Split,
    series: Arc<Prepared>,
    offset: usize,
    count: usize,
    history: usize,
    horizon: usize,
}

/// One mini-batch with the `B` samples stacked node-major per sample:
/// row `b·n + v` belongs to sample `b`, node `v`.
#[derive(Clone, Debug)]
pub struct Batch {
    /// `T′` normalized inputs, each `(B·n) × 1`.
    pub inputs: Vec<Matrix>,
    /// `T` normalized targets.
    pub targets: Vec<Matrix>,
    /// `T` targets in original units.
    pub raw_targets: Vec<Matrix>,
    /// `T` masks, 1 where the raw target is nonzero.
    pub masks: Vec<Matrix>,
}

impl WindowedDataset {
    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn node_count(&self) -> usize {
        self.series.raw.cols()
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Absolute step index of window `i`'s first input.
    pub fn start(&self, i: usize) -> usize {
        assert!(i < self.count, "window {i} out of range");
        self.offset + i
    }

    /// Absolute step index of the first target of window `i`.
    pub fn target_start(&self, i: usize) -> usize {
        self.start(i) + self.history
    }

    /// The scaler that produced the normalized inputs and targets.
    pub fn scaler(&self) -> Scaler {
        self.series.scaler
    }

    /// The full raw series the windows index into.
    pub fn raw_series(&self) -> &Matrix {
        &self.series.raw
    }

    fn column(m: &Matrix, rows: &[usize], t: usize) -> Matrix {
        let n = m.cols();
        let mut out = Matrix::zeros(rows.len() * n, 1);
        for (b, &start) in rows.iter().enumerate() {
            out.as_mut_slice()[b * n..(b + 1) * n].copy_from_slice(m.row(start + t));
        }
        out
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let starts: Vec<usize> = indices.iter().map(|&i| self.start(i)).collect();
        let s = &self.series;
        let h = self.history;
        let inputs = (0..h).map(|t| Self::column(&s.normalized, &starts, t)).collect();
        let targets = (h..h + self.horizon)
            .map(|t| Self::column(&s.normalized, &starts, t))
            .collect();
        let raw_targets: Vec<Matrix> = (h..h + self.horizon)
            .map(|t| Self::column(&s.raw, &starts, t))
            .collect();
        let masks = raw_targets
            .iter()
            .map(|m| m.map(|v| if v != 0.0 { 1.0 } else { 0.0 }))
            .collect();
        Batch {
            inputs,
            targets,
            raw_targets,
            masks,
        }
    }
}

/// The three chronological splits and the scaler fitted on the training steps.
#[derive(Clone, Debug)]
pub struct Windows {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
    pub scaler: Scaler,
}

impl Windows {
    pub fn get(&self, split: Split) -> &WindowedDataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Splits `table` chronologically, fits the scaler on the training steps and
/// cuts each split into stride-1 windows of `history` inputs and `horizon`
/// targets. A split holding fewer than `history + horizon` steps yields an
/// empty dataset and a warning.
pub fn make_windows(
    table: &SeriesTable,
    history: usize,
    horizon: usize,
    splits: Splits,
) -> Result<Windows> {
    splits.validate()?;
    let scaler = fit_scaler(table, splits.train)?;
    make_windows_scaled(table, history, horizon, splits, scaler)
}

/// [`make_windows`] with a given scaler, e.g. one restored from a checkpoint.
pub fn make_windows_scaled(
    table: &SeriesTable,
    history: usize,
    horizon: usize,
    splits: Splits,
    scaler: Scaler,
) -> Result<Windows> {
    splits.validate()?;
    if history == 0 || horizon == 0 {
        return Err(Error::contract("history and horizon must be at least 1"));
    }
    let span = history + horizon;
    if table.steps() < span {
        return Err(Error::contract(format!(
            "{} steps cannot hold a window of {span}",
            table.steps()
        )));
    }
    let series = Arc::new(Prepared {
        normalized: scaler.apply_matrix(table.readings()),
        raw: table.readings().clone(),
        scaler,
    });
    let (train, val, _) = splits.sizes(table.steps());
    let bounds = [
        (Split::Train, 0, train),
        (Split::Val, train, train + val),
        (Split::Test, train + val, table.steps()),
    ];
    let mut sets = bounds.into_iter().map(|(split, start, end)| {
        let len = end - start;
        let count = (len + 1).saturating_sub(span);
        if count == 0 {
            log::warn!("{split:?} split has {len} steps, fewer than a {span}-step window; it is empty");
        }
        WindowedDataset {
            split,
            series: Arc::clone(&series),
            offset: start,
            count,
            history,
            horizon,
        }
    });
    Ok(Windows {
        train: sets.next().expect("three splits"),
        val: sets.next().expect("three splits"),
        test: sets.next().expect("three splits"),
        scaler,
    })
}

// ---------------------------------------------------------------------------
// synthetic data

/// Per-node daily profile `base + amplitude · sin(2π (t mod 288)/288 + phase)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub base: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl Profile {
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut p = Profile {
            base: Vec::with_capacity(n),
            amplitude: Vec::with_capacity(n),
            phase: Vec::with_capacity(n),
        };
        for _ in 0..n {
            p.base.push(rng.uniform(2.0, 6.0));
            p.amplitude.push(rng.uniform(1.0, 2.0));
            p.phase.push(rng.uniform(0.0, std::f64::consts::TAU));
        }
        p
    }

    pub fn at(&self, node: usize, t: usize) -> f64 {
        let angle = std::f64::consts::TAU * (t % SYNTH_PERIOD) as f64 / SYNTH_PERIOD as f64;
        self.base[node] + self.amplitude[node] * (angle + self.phase[node]).sin()
    }
}

/// Steps simulated and discarded before the first recorded reading, so the
/// recorded series starts on its periodic orbit.
pub const SYNTH_BURN_IN: usize = 4 * SYNTH_PERIOD;

/// Runs `X(t+1) = 0.7·normalize(A)·X(t) + 0.3·s(t) + noise·η(t)` from
/// `X = s(0)`, with `η` standard normal per node and step.
///
/// The state is advanced [`SYNTH_BURN_IN`] steps before recording, and the
/// recorded step `t` uses `s` at phase `t`, so a noiseless run is periodic.
pub fn synth_generate(g: &NodeGraph, steps: usize, seed: u64, noise: f64) -> Result<SeriesTable> {
    synth_with_profile(g, steps, seed, noise).map(|(table, _)| table)
}

/// [`synth_generate`] also returning the drawn profile.
pub fn synth_with_profile(
    g: &NodeGraph,
    steps: usize,
    seed: u64,
    noise: f64,
) -> Result<(SeriesTable, Profile)> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::contract(format!("noise level {noise} must be finite and >= 0")));
    }
    let n = g.node_count();
    let p = normalize(g.adjacency())?;
    let mut rng = Rng::seeded(seed);
    let profile = Profile::random(n, &mut rng);

    let total = SYNTH_BURN_IN + steps;
    // phase of the first simulated step, chosen so recorded step 0 has phase 0
    let phase0 = SYNTH_PERIOD - SYNTH_BURN_IN % SYNTH_PERIOD;
    let mut x: Vec<f64> = (0..n).map(|v| profile.at(v, phase0)).collect();
    let mut next = vec![0.0; n];
    let mut readings = Matrix::zeros(steps, n);
    for step in 0..total {
        if step >= SYNTH_BURN_IN {
            readings.row_mut(step - SYNTH_BURN_IN).copy_from_slice(&x);
        }
        let phase = phase0 + step;
        for (i, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += p[(i, j)] * xj;
            }
            let eta = if noise > 0.0 { noise * rng.normal() } else { 0.0 };
            *out = 0.7 * acc + 0.3 * profile.at(i, phase) + eta;
        }
        std::mem::swap(&mut x, &mut next);
    }
    let ids = (0..n).map(|v| format!("s{v}")).collect();
    let timestamps = (0..steps).map(|t| t.to_string()).collect();
    Ok((SeriesTable::new(ids, timestamps, readings)?, profile))
}

/// Synthetic road distances for `n` sensors with exactly `edges` short links
/// (`n ≤ edges ≤ n(n − 1)/2`): a directed ring `v → v + 1` plus random extra
/// pairs at distances in `[0.1, 0.5)`. Every other pair is `[2, 3)` apart,
/// far enough for the Gaussian kernel at the default threshold to drop it.
pub fn synth_network(n: usize, edges: usize, seed: u64) -> Result<(Vec<String>, Matrix)> {
    if n < 3 || edges < n || edges > n * (n - 1) / 2 {
        return Err(Error::contract(format!(
            "cannot place {edges} links on {n} sensors (need n >= 3 and n <= links <= n(n-1)/2)"
        )));
    }
    let mut rng = Rng::seeded(seed);
    let mut near = Matrix::zeros(n, n);
    for v in 0..n {
        near[(v, (v + 1) % n)] = 1.0;
    }
    let mut extra: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && j != (i + 1) % n)
        .collect();
    rng.shuffle(&mut extra);
    for &(i, j) in extra.iter().take(edges - n) {
        near[(i, j)] = 1.0;
    }
    let d = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if near[(i, j)] == 1.0 {
            rng.uniform(0.1, 0.5)
        } else {
            rng.uniform(2.0, 3.0)
        }
    });
    let ids = (0..n).map(|v| format!("s{v}")).collect();
    Ok((ids, d))
}
