//! Ensemble batch prediction intervals (EnbPI) for one-step-ahead series
//! forecasting: bootstrap-trained ridge regressors on lagged windows,
//! leave-one-out aggregation, and sliding residual quantiles.
//!
//! No data splitting: every training pair participates, and the interval
//! half-width is the conservative order statistic of the most recent
//! absolute residuals.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("history length {got} too short: need more than lag + 10 = {need}")]
    InsufficientHistory { got: usize, need: usize },
    #[error("ensemble size must be at least 2, got {0}")]
    EnsembleTooSmall(usize),
    #[error("could not cover every index with an excluding bootstrap sample; increase the ensemble size")]
    ResampleFailed,
    #[error("lag window has length {got}, expected {expected}")]
    WindowLength { got: usize, expected: usize },
    #[error("no regressor excludes training index {0}")]
    NoLooRegressor(usize),
    #[error("residual window is empty")]
    EmptyWindow,
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    BadData { path: String, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnbpiParams {
    /// Number of bootstrap regressors B.
    pub ensemble_size: usize,
    /// Lag order M: how many past values form a feature window.
    pub lag: usize,
    /// Ridge penalty of the base regressor.
    pub ridge_lambda: f64,
    /// Residual window capacity T.
    pub window: usize,
}

impl Default for EnbpiParams {
    fn default() -> Self {
        EnbpiParams {
            ensemble_size: 20,
            lag: 48,
            ridge_lambda: 1e-3,
            window: 200,
        }
    }
}

/// Ridge regression on centered data; the intercept is not penalized.
#[derive(Debug, Clone)]
struct Ridge {
    weights: Vec<f64>,
    intercept: f64,
}

impl Ridge {
    /// Least squares with an L2 penalty, solved on the Gram matrix by a
    /// symmetric eigendecomposition so a zero penalty degrades gracefully to
    /// the pseudo-inverse even on exactly collinear designs.
    fn fit(xs: &[&[f64]], ys: &[f64], lambda: f64) -> Ridge {
        let rows = xs.len();
        let cols = xs[0].len();
        let mut x_mean = vec![0.0; cols];
        for row in xs {
            for (m, v) in x_mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut x_mean {
            *m /= rows as f64;
        }
        let y_mean = ys.iter().sum::<f64>() / rows as f64;

        let xc = DMatrix::from_fn(rows, cols, |i, j| xs[i][j] - x_mean[j]);
        let yc = DVector::from_fn(rows, |i, _| ys[i] - y_mean);
        let gram = xc.transpose() * &xc;
        let rhs = xc.transpose() * yc;

        let eig = gram.symmetric_eigen();
        let e_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        // Eigenvalues this far below the leading one are rounding noise;
        // with lambda = 0 they would otherwise be amplified by 1/e.
        let tol = 1e-12 * e_max.max(1.0);
        let mut w = DVector::zeros(cols);
        for k in 0..cols {
            let e = eig.eigenvalues[k].max(0.0);
            if e <= tol && lambda <= 0.0 {
                continue;
            }
            let v_k = eig.eigenvectors.column(k);
            w += v_k * (v_k.dot(&rhs) / (e + lambda));
        }
        let weights: Vec<f64> = w.iter().copied().collect();
        let intercept = y_mean
            - weights
                .iter()
                .zip(&x_mean)
                .map(|(w, m)| w * m)
                .sum::<f64>();
        Ridge { weights, intercept }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}

/// Which leave-one-out aggregation to use for a prediction.
#[derive(Debug, Clone, Copy)]
pub enum LooIndex {
    /// In-sample point: average only regressors whose bootstrap sample
    /// excludes this training pair.
    Train(usize),
    /// Out-of-sample point: average the whole ensemble.
    New,
}

/// Bootstrap ensemble with per-pair membership masks.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    lag: usize,
    regressors: Vec<Ridge>,
    /// `in_sample[b][i]`: pair i appeared in regressor b's bootstrap sample.
    in_sample: Vec<Vec<bool>>,
    /// Training pairs retained for residual computation.
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

/// Trains B ridge regressors on bootstrap resamples of the lagged pairs of
/// `history`. Resamples the whole set until every pair is excluded from at
/// least one sample, then fits; deterministic from `seed`.
pub fn fit(history: &[f64], params: &EnbpiParams, seed: u64) -> Result<EnsembleModel, ConformalError> {
    let m = params.lag;
    let b_count = params.ensemble_size;
    if b_count < 2 {
        return Err(ConformalError::EnsembleTooSmall(b_count));
    }
    if history.len() <= m + 10 {
        return Err(ConformalError::InsufficientHistory {
            got: history.len(),
            need: m + 10,
        });
    }
    let n = history.len() - m;
    let xs: Vec<Vec<f64>> = (0..n).map(|i| history[i..i + m].to_vec()).collect();
    let ys: Vec<f64> = (0..n).map(|i| history[i + m]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_sample: Vec<Vec<bool>> = Vec::new();
    let mut samples: Vec<Vec<usize>> = Vec::new();
    let mask_of = |idx: &[usize]| {
        let mut mask = vec![false; n];
        for &i in idx {
            mask[i] = true;
        }
        mask
    };
    // Plain rejection covers every pair almost surely for B >= 10; retry a
    // bounded number of times before conditioning the draw.
    const MAX_ATTEMPTS: usize = 50;
    let mut covered = false;
    for _ in 0..MAX_ATTEMPTS {
        samples.clear();
        in_sample.clear();
        for _ in 0..b_count {
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            in_sample.push(mask_of(&idx));
            samples.push(idx);
        }
        covered = (0..n).all(|i| in_sample.iter().any(|mask| !mask[i]));
        if covered {
            break;
        }
    }
    if !covered {
        // Small ensembles: pre-assign each pair one sample that must exclude
        // it, then bootstrap each sample over its allowed pairs.
        let excluder: Vec<usize> = (0..n).map(|_| rng.gen_range(0..b_count)).collect();
        samples.clear();
        in_sample.clear();
        for b in 0..b_count {
            let allowed: Vec<usize> = (0..n).filter(|&i| excluder[i] != b).collect();
            if allowed.is_empty() {
                return Err(ConformalError::ResampleFailed);
            }
            let idx: Vec<usize> = (0..n)
                .map(|_| allowed[rng.gen_range(0..allowed.len())])
                .collect();
            in_sample.push(mask_of(&idx));
            samples.push(idx);
        }
    }

    let regressors = samples
        .iter()
        .map(|idx| {
            let sx: Vec<&[f64]> = idx.iter().map(|&i| xs[i].as_slice()).collect();
            let sy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
            Ridge::fit(&sx, &sy, params.ridge_lambda)
        })
        .collect();

    Ok(EnsembleModel {
        lag: m,
        regressors,
        in_sample,
        xs,
        ys,
    })
}

impl EnsembleModel {
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn ensemble_size(&self) -> usize {
        self.regressors.len()
    }

    /// Number of training pairs: history length minus the lag order.
    pub fn n_pairs(&self) -> usize {
        self.ys.len()
    }

    /// Leave-one-out aggregated prediction for a lag window.
    pub fn loo_predict(&self, x: &[f64], index: LooIndex) -> Result<f64, ConformalError> {
        if x.len() != self.lag {
            return Err(ConformalError::WindowLength {
                got: x.len(),
                expected: self.lag,
            });
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        match index {
            LooIndex::Train(i) => {
                for (reg, mask) in self.regressors.iter().zip(&self.in_sample) {
                    if !mask[i] {
                        sum += reg.predict(x);
                        count += 1;
                    }
                }
                if count == 0 {
                    return Err(ConformalError::NoLooRegressor(i));
                }
            }
            LooIndex::New => {
                for reg in &self.regressors {
                    sum += reg.predict(x);
                }
                count = self.regressors.len();
            }
        }
        Ok(sum / count as f64)
    }

    /// Absolute leave-one-out residuals of every training pair, in order.
    pub fn training_residuals(&self) -> Result<Vec<f64>, ConformalError> {
        (0..self.n_pairs())
            .map(|i| {
                let point = self.loo_predict(&self.xs[i], LooIndex::Train(i))?;
                Ok((self.ys[i] - point).abs())
            })
            .collect()
    }

    /// Interval centered on the leave-one-out point prediction with the
    /// residual-quantile half-width.
    pub fn interval(
        &self,
        x: &[f64],
        index: LooIndex,
        window: &ResidualWindow,
        alpha: f64,
    ) -> Result<PredictionInterval, ConformalError> {
        let point = self.loo_predict(x, index)?;
        let half = window.quantile(alpha)?;
        Ok(PredictionInterval {
            point,
            lower: point - half,
            upper: point + half,
            alpha,
        })
    }
}

/// FIFO of the most recent absolute residuals, capacity T.
#[derive(Debug, Clone)]
pub struct ResidualWindow {
    values: VecDeque<f64>,
    capacity: usize,
}

impl ResidualWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ResidualWindow {
            values: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, residual: f64) {
        debug_assert!(residual >= 0.0);
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(residual);
    }

    /// Records the absolute error of a realized prediction.
    pub fn update(&mut self, truth: f64, point: f64) {
        self.push((truth - point).abs());
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.values.iter()
    }

    /// Conservative empirical (1 - alpha) quantile: the order statistic at
    /// rank `ceil((1 - alpha)(n + 1))`, capped at n.
    pub fn quantile(&self, alpha: f64) -> Result<f64, ConformalError> {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        let n = self.values.len();
        if n == 0 {
            return Err(ConformalError::EmptyWindow);
        }
        let mut sorted: Vec<f64> = self.values.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let rank = ((1.0 - alpha) * (n as f64 + 1.0)).ceil() as usize;
        let rank = rank.clamp(1, n);
        Ok(sorted[rank - 1])
    }
}

/// One-step-ahead prediction interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

// ---------------------------------------------------------------------------
// Per-channel interval sets for the control environment
// ---------------------------------------------------------------------------

/// A named scalar series to fit intervals over.
#[derive(Debug, Clone)]
pub struct ChannelSeries {
    pub name: String,
    pub values: Vec<f64>,
}

/// Prediction intervals for every channel at every timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    pub channel_names: Vec<String>,
    pub alpha: f64,
    /// `rows[t][c] = (point, lower, upper)`.
    pub rows: Vec<Vec<(f64, f64, f64)>>,
}

impl IntervalSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    /// Degenerate set with zero width everywhere (ablation input).
    pub fn zero_width(channel_names: Vec<String>, len: usize, alpha: f64) -> IntervalSet {
        IntervalSet {
            rows: vec![vec![(0.0, 0.0, 0.0); channel_names.len()]; len],
            channel_names,
            alpha,
        }
    }
}

/// Walks each channel through the EnbPI recipe and collects intervals for
/// every timestep of the series.
///
/// Pairs up to `split_at` are the training span: their intervals use
/// in-sample leave-one-out points and the static training-residual quantile.
/// Later steps use whole-ensemble points and a window that slides as each
/// true value arrives. The first `lag` steps carry a zero-point interval
/// whose width is the training quantile.
pub fn build_interval_set(
    channels: &[ChannelSeries],
    split_at: usize,
    params: &EnbpiParams,
    alpha: f64,
    seed: u64,
) -> Result<IntervalSet, ConformalError> {
    let len = channels.first().map(|c| c.values.len()).unwrap_or(0);
    let mut per_channel: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(channels.len());

    for (c, chan) in channels.iter().enumerate() {
        assert_eq!(chan.values.len(), len, "channel lengths must agree");
        let train = &chan.values[..split_at];
        let model = fit(train, params, seed.wrapping_add(c as u64))?;
        let residuals = model.training_residuals()?;

        let mut train_window = ResidualWindow::new(params.window);
        for &r in &residuals {
            train_window.push(r);
        }
        let train_half = train_window.quantile(alpha)?;

        let mut rows = Vec::with_capacity(len);
        // Warm-up steps without a full lag window.
        for t in 0..params.lag.min(len) {
            let point = chan.values[t];
            rows.push((point, point - train_half, point + train_half));
        }
        // Training span: in-sample leave-one-out points, static width.
        let mut t = params.lag;
        while t < split_at.min(len) {
            let x = &chan.values[t - params.lag..t];
            let point = model.loo_predict(x, LooIndex::Train(t - params.lag))?;
            rows.push((point, point - train_half, point + train_half));
            t += 1;
        }
        // Test span: ensemble points, sliding residual window.
        let mut window = train_window;
        while t < len {
            let x = &chan.values[t - params.lag..t];
            let point = model.loo_predict(x, LooIndex::New)?;
            let half = window.quantile(alpha)?;
            rows.push((point, point - half, point + half));
            window.update(chan.values[t], point);
            t += 1;
        }
        per_channel.push(rows);
    }

    let rows = (0..len)
        .map(|t| per_channel.iter().map(|ch| ch[t]).collect())
        .collect();
    Ok(IntervalSet {
        channel_names: channels.iter().map(|c| c.name.clone()).collect(),
        alpha,
        rows,
    })
}

/// Writes an interval set as `timestamp, channel, point, lower, upper, alpha`
/// with timestamps derived from `start` at half-hour spacing.
pub fn write_interval_set<P: AsRef<Path>>(
    path: P,
    set: &IntervalSet,
    start: chrono::DateTime<chrono::Utc>,
) -> Result<(), ConformalError> {
    let path_str = path.as_ref().display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|source| ConformalError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let werr = |source: csv::Error| ConformalError::Csv {
        path: path_str.clone(),
        source,
    };
    w.write_record(["timestamp", "channel", "point", "lower", "upper", "alpha"])
        .map_err(werr)?;
    for (t, row) in set.rows.iter().enumerate() {
        let stamp = (start + chrono::Duration::minutes(30 * t as i64))
            .to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        for (c, &(point, lower, upper)) in row.iter().enumerate() {
            w.write_record([
                stamp.as_str(),
                &set.channel_names[c],
                &format!("{point}"),
                &format!("{lower}"),
                &format!("{upper}"),
                &format!("{}", set.alpha),
            ])
            .map_err(|e| ConformalError::Csv {
                path: path_str.clone(),
                source: e,
            })?;
        }
    }
    w.flush().map_err(|source| ConformalError::Csv {
        path: path_str.clone(),
        source: csv::Error::from(source),
    })?;
    Ok(())
}

/// Reads an interval set written by [`write_interval_set`]. Channel order
/// follows first appearance in the file.
pub fn read_interval_set<P: AsRef<Path>>(path: P) -> Result<IntervalSet, ConformalError> {
    let path_str = path.as_ref().display().to_string();
    let bad = |reason: String| ConformalError::BadData {
        path: path_str.clone(),
        reason,
    };
    let mut r = csv::Reader::from_path(&path).map_err(|source| ConformalError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let mut channel_names: Vec<String> = Vec::new();
    let mut alpha = f64::NAN;
    let mut rows: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    let mut last_stamp: Option<String> = None;
    for record in r.records() {
        let record = record.map_err(|source| ConformalError::Csv {
            path: path_str.clone(),
            source,
        })?;
        if record.len() != 6 {
            return Err(bad(format!("expected 6 columns, got {}", record.len())));
        }
        let stamp = record[0].to_string();
        if last_stamp.as_deref() != Some(stamp.as_str()) {
            last_stamp = Some(stamp);
            rows.push(Vec::new());
        }
        let chan = record[1].to_string();
        if rows.len() == 1 {
            channel_names.push(chan.clone());
        }
        let parse = |s: &str| -> Result<f64, ConformalError> {
            s.parse().map_err(|e| bad(format!("bad float {s:?}: {e}")))
        };
        let point = parse(&record[2])?;
        let lower = parse(&record[3])?;
        let upper = parse(&record[4])?;
        alpha = parse(&record[5])?;
        rows.last_mut().unwrap().push((point, lower, upper));
    }
    if rows.is_empty() {
        return Err(bad("file contains no data rows".to_string()));
    }
    for row in &rows {
        if row.len() != channel_names.len() {
            return Err(bad("inconsistent channel count across timesteps".to_string()));
        }
    }
    Ok(IntervalSet {
        channel_names,
        alpha,
        rows,
    })
}
