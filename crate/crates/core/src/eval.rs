//! Masked metrics, the historical-average baseline and horizon reports.

use std::fmt::Write as _;

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::graphs::GraphOperators;
use crate::model::{predict, Checkpoint};
use crate::numerics::Matrix;

/// Horizons emphasised in reports (15, 30 and 60 minutes at 5-minute steps).
pub const HIGHLIGHT: [usize; 3] = [3, 6, 12];
/// Minutes per step.
pub const STEP_MINUTES: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Percentage.
    pub mape: f64,
}

/// Running sums for masked metrics; entries with a zero target are skipped.
#[derive(Clone, Copy, Debug, Default)]
pub struct MetricAccumulator {
    abs: f64,
    sq: f64,
    pct: f64,
    count: usize,
}

impl MetricAccumulator {
    pub fn push(&mut self, pred: f64, target: f64) {
        if target == 0.0 {
            return;
        }
        let d = (pred - target).abs();
        self.abs += d;
        self.sq += d * d;
        self.pct += d / target.abs();
        self.count += 1;
    }

    pub fn push_matrix(&mut self, pred: &Matrix, target: &Matrix) -> Result<()> {
        if pred.shape() != target.shape() {
            return Err(pred.mismatch("metrics", target));
        }
        for (p, t) in pred.as_slice().iter().zip(target.as_slice()) {
            self.push(*p, *t);
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Metrics {
        if self.count == 0 {
            log::warn!("metrics over an entirely masked target");
            return Metrics::default();
        }
        let c = self.count as f64;
        Metrics {
            mae: self.abs / c,
            rmse: (self.sq / c).sqrt(),
            mape: 100.0 * self.pct / c,
        }
    }
}

/// MAE, RMSE and MAPE over the entries with nonzero target.
pub fn metrics(pred: &Matrix, target: &Matrix) -> Result<Metrics> {
    let mut acc = MetricAccumulator::default();
    acc.push_matrix(pred, target)?;
    Ok(acc.finish())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizonRow {
    /// Counted from 1.
    pub horizon: usize,
    pub metrics: Metrics,
}

/// Per-horizon metrics and their means over horizons.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<HorizonRow>,
    pub mean: Metrics,
}

impl MetricsReport {
    pub fn from_accumulators(accs: &[MetricAccumulator]) -> Self {
        let rows: Vec<HorizonRow> = accs
            .iter()
            .enumerate()
            .map(|(h, a)| HorizonRow {
                horizon: h + 1,
                metrics: a.finish(),
            })
            .collect();
        let n = rows.len().max(1) as f64;
        let mean = Metrics {
            mae: rows.iter().map(|r| r.metrics.mae).sum::<f64>() / n,
            rmse: rows.iter().map(|r| r.metrics.rmse).sum::<f64>() / n,
            mape: rows.iter().map(|r| r.metrics.mape).sum::<f64>() / n,
        };
        Self { rows, mean }
    }

    pub fn row(&self, horizon: usize) -> Option<&HorizonRow> {
        self.rows.iter().find(|r| r.horizon == horizon)
    }

    /// `horizon,mae,rmse,mape`, one line per horizon.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,mae,rmse,mape\n");
        for r in &self.rows {
            let m = r.metrics;
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.horizon, m.mae, m.rmse, m.mape);
        }
        out
    }

    /// Aligned table; highlighted horizons are starred.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>8} {:>8} {:>10} {:>10} {:>9}\n",
            "horizon", "minutes", "MAE", "RMSE", "MAPE"
        );
        for r in &self.rows {
            let star = if HIGHLIGHT.contains(&r.horizon) { "*" } else { " " };
            let m = r.metrics;
            let _ = writeln!(
                out,
                "{:>7}{star} {:>8} {:>10.4} {:>10.4} {:>8.2}%",
                r.horizon,
                r.horizon * STEP_MINUTES,
                m.mae,
                m.rmse,
                m.mape
            );
        }
        let m = self.mean;
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>10.4} {:>10.4} {:>8.2}%",
            "mean", "", m.mae, m.rmse, m.mape
        );
        out
    }
}

/// Forecast of a model-free baseline plus how many entries used the fallback.
#[derive(Clone, Debug, PartialEq)]
pub struct HaForecast {
    /// One `horizon × n` matrix per query.
    pub predictions: Vec<Matrix>,
    pub fallbacks: usize,
}

/// Historical average: the value at absolute step `t` is the mean of the
/// nonzero readings at `t − period, t − 2·period, …` that fall inside
/// `history` (`steps × n`, starting at step 0). Without any such reading the
/// node's mean nonzero history value is used and counted as a fallback.
///
/// Query `q` predicts steps `q, q + 1, …, q + horizon − 1`.
pub fn ha_forecast(
    history: &Matrix,
    period: usize,
    queries: &[usize],
    horizon: usize,
) -> Result<HaForecast> {
    if period == 0 {
        return Err(Error::contract("HA period must be at least 1"));
    }
    let (steps, n) = history.shape();
    let node_mean: Vec<f64> = (0..n)
        .map(|v| running_mean((0..steps).map(|t| history[(t, v)])).unwrap_or(0.0))
        .collect();
    let mut fallbacks = 0;
    let predictions = queries
        .iter()
        .map(|&q| {
            Matrix::from_fn(horizon, n, |h, v| {
                let t = q + h;
                let first = t.checked_sub(period);
                let same_phase = first
                    .into_iter()
                    .flat_map(|f| (0..=f).rev().step_by(period))
                    .filter(|&s| s < steps)
                    .map(|s| history[(s, v)]);
                running_mean(same_phase).unwrap_or_else(|| {
                    fallbacks += 1;
                    node_mean[v]
                })
            })
        })
        .collect();
    if fallbacks > 0 {
        log::warn!("HA fell back to node means for {fallbacks} entries");
    }
    Ok(HaForecast {
        predictions,
        fallbacks,
    })
}

/// Mean of the nonzero values, updated incrementally so that equal values
/// average to themselves exactly.
fn running_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut mean = 0.0;
    let mut k = 0usize;
    for x in values.filter(|&x| x != 0.0) {
        k += 1;
        mean += (x - mean) / k as f64;
    }
    (k > 0).then_some(mean)
}

/// HA over every window of `set`, using the first `train_steps` steps of the
/// series as history.
pub fn ha_report(
    set: &WindowedDataset,
    train_steps: usize,
    period: usize,
) -> Result<(MetricsReport, usize)> {
    let raw = set.raw_series();
    let history = raw.slice_rows(0, train_steps.min(raw.rows()));
    let queries: Vec<usize> = (0..set.len()).map(|i| set.target_start(i)).collect();
    let ha = ha_forecast(&history, period, &queries, set.horizon())?;
    let mut accs = vec![MetricAccumulator::default(); set.horizon()];
    for (pred, &q) in ha.predictions.iter().zip(&queries) {
        for (h, acc) in accs.iter_mut().enumerate() {
            for (p, t) in pred.row(h).iter().zip(raw.row(q + h)) {
                acc.push(*p, *t);
            }
        }
    }
    Ok((MetricsReport::from_accumulators(&accs), ha.fallbacks))
}

/// Runs the checkpoint with the decoder feeding itself over every window of
/// `set` and scores the inverse-transformed forecasts in original units.
pub fn evaluate(
    ck: &Checkpoint,
    set: &WindowedDataset,
    ops: &GraphOperators,
    batch_size: usize,
) -> Result<MetricsReport> {
    let c = &ck.config;
    if set.history() != c.history || set.horizon() != c.horizon {
        return Err(Error::contract(format!(
            "dataset windows are {}→{}, checkpoint expects {}→{}",
            set.history(),
            set.horizon(),
            c.history,
            c.horizon
        )));
    }
    if set.node_count() != ops.node_count() {
        return Err(Error::Dimension {
            op: "evaluate",
            left: (set.node_count(), 1),
            right: (ops.node_count(), 1),
        });
    }
    if set.scaler() != ck.scaler {
        return Err(Error::contract(
            "dataset was normalised with a different scaler than the checkpoint",
        ));
    }
    let mut accs = vec![MetricAccumulator::default(); c.horizon];
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = set.batch(chunk);
        let preds = predict(&ck.params, c, ops, &batch.inputs)?;
        for ((acc, pred), target) in accs.iter_mut().zip(&preds).zip(&batch.raw_targets) {
            acc.push_matrix(&ck.scaler.inverse_matrix(pred), target)?;
        }
    }
    Ok(MetricsReport::from_accumulators(&accs))
}

/// One row of a variant comparison.
#[derive(Clone, Debug)]
pub struct VariantResult {
    pub label: String,
    pub report: MetricsReport,
}

/// Side-by-side MAE / RMSE / MAPE at the highlighted horizons plus the mean.
pub fn comparison_table(results: &[VariantResult]) -> String {
    let width = results.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
    let mut out = format!("{:<width$}", "variant");
    for h in HIGHLIGHT {
        let _ = write!(out, " | {:^26}", format!("{} min", h * STEP_MINUTES));
    }
    let _ = writeln!(out, " | {:^26}", "mean");
    let _ = write!(out, "{:<width$}", "");
    for _ in 0..HIGHLIGHT.len() + 1 {
        let _ = write!(out, " | {:>7} {:>7} {:>9}", "MAE", "RMSE", "MAPE");
    }
    out.push('\n');
    for r in results {
        let _ = write!(out, "{:<width$}", r.label);
        let cells = HIGHLIGHT
            .iter()
            .map(|&h| r.report.row(h).map(|row| row.metrics))
            .chain(std::iter::once(Some(r.report.mean)));
        for m in cells {
            match m {
                Some(m) => {
                    let _ = write!(out, " | {:>7.4} {:>7.4} {:>8.2}%", m.mae, m.rmse, m.mape);
                }
                None => {
                    let _ = write!(out, " | {:>7} {:>7} {:>9}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// `variant,horizon,mae,rmse,mape` for every variant and horizon.
pub fn comparison_csv(results: &[VariantResult]) -> String {
    let mut out = String::from("variant,horizon,mae,rmse,mape\n");
    for r in results {
        for row in &r.report.rows {
            let m = row.metrics;
            let _ = writeln!(out, "{},{},{:?},{:?},{:?}", r.label, row.horizon, m.mae, m.rmse, m.mape);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_hand_values() {
        let m = metrics(&Matrix::column(&[2.0]), &Matrix::column(&[4.0])).unwrap();
        assert_eq!(m, Metrics { mae: 2.0, rmse: 2.0, mape: 50.0 });

        let m = metrics(&Matrix::column(&[3.0, 4.0]), &Matrix::column(&[6.0, 8.0])).unwrap();
        assert_eq!(m.mae, 3.5);
        assert!((m.rmse - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((m.rmse - 3.5355).abs() < 1e-4);
        assert_eq!(m.mape, 50.0);

        let masked = metrics(&Matrix::column(&[3.0, 4.0]), &Matrix::zeros(2, 1)).unwrap();
        assert_eq!(masked, Metrics::default());
        assert!(metrics(&Matrix::zeros(1, 2), &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn ha_phase_means() {
        let history = Matrix::column(&[1.0, 2.0, 3.0, 4.0]);
        let ha = ha_forecast(&history, 2, &[4], 2).unwrap();
        assert_eq!(ha.predictions[0], Matrix::column(&[2.0, 3.0]));
        assert_eq!(ha.fallbacks, 0);
        // same phase, same prediction
        let ha = ha_forecast(&history, 2, &[4, 6], 1).unwrap();
        assert_eq!(ha.predictions[0], ha.predictions[1]);
    }

    #[test]
    fn ha_skips_zeros_and_falls_back() {
        let history = Matrix::column(&[1.0, 0.0, 3.0, 4.0]);
        let ha = ha_forecast(&history, 2, &[4], 2).unwrap();
        assert_eq!(ha.predictions[0][(0, 0)], 2.0);
        assert_eq!(ha.predictions[0][(1, 0)], 4.0);
        let early = ha_forecast(&history, 10, &[1], 1).unwrap();
        assert_eq!(early.fallbacks, 1);
        assert!((early.predictions[0][(0, 0)] - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn running_mean_of_equal_values_is_exact() {
        let v = 0.1 + 0.2;
        assert_eq!(running_mean(std::iter::repeat_n(v, 7)), Some(v));
        assert_eq!(running_mean(std::iter::empty()), None);
    }

    #[test]
    fn report_formats() {
        let mut accs = vec![MetricAccumulator::default(); 12];
        for (h, a) in accs.iter_mut().enumerate() {
            a.push(1.0 + h as f64, 2.0);
        }
        let r = MetricsReport::from_accumulators(&accs);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.starts_with("horizon,mae,rmse,mape\n1,1.0,1.0,50.0\n"));
        let text = r.to_text();
        assert!(text.contains("3*") && text.contains("60"));
        let table = comparison_table(&[VariantResult {
            label: "x".into(),
            report: r,
        }]);
        assert!(table.contains("15 min") && table.lines().count() == 3);
    }
}
