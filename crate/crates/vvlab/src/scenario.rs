//! Synthetic half-hourly load and PV time series with forecast errors.
//!
//! Loads follow a fixed double-peak daily template (morning rise, evening
//! peak at 19:00) with Gaussian noise proportional to the template value. PV
//! follows a clear-sky cosine bell between 06:00 and 18:00 multiplied by a
//! lognormal irradiance factor, clipped to the panel rating. Forecasts are
//! truth times `(1 + N(0, sigma))`. Everything is reproducible from a seed,
//! and real data with the same CSV schema can be ingested instead.

use std::path::Path;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;

/// Half-hour resolution: 48 steps per day.
pub const STEPS_PER_DAY: usize = 48;
const STEP_MINUTES: i64 = 30;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    BadData { path: String, reason: String },
    #[error("series too short to split: length {0}")]
    TooShort(usize),
}

/// Distribution parameters for the generator. The defaults are artifact
/// configuration, not quantities from measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Load noise as a fraction of the profile value.
    pub sigma_load: f64,
    /// Lognormal sigma of the irradiance factor.
    pub sigma_irradiance: f64,
    /// Forecast noise as a fraction of the true value.
    pub forecast_noise: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            sigma_load: 0.05,
            sigma_irradiance: 0.2,
            forecast_noise: 0.05,
        }
    }
}

/// True per-bus load and per-inverter PV series, kW / kvar, indexed
/// `[timestep][entity]`. Entity order matches `Network::buses` (slack
/// included, with zero load) and `Network::inverters`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    pub start: DateTime<Utc>,
    pub load_p: Vec<Vec<f64>>,
    pub load_q: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
}

/// Forecast counterpart of [`TimeSeriesSet`], aligned timestep for timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub start: DateTime<Utc>,
    pub load_p: Vec<Vec<f64>>,
    pub load_q: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
}

impl TimeSeriesSet {
    pub fn len(&self) -> usize {
        self.load_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_p.is_empty()
    }

    pub fn n_days(&self) -> usize {
        self.len() / STEPS_PER_DAY
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::minutes(STEP_MINUTES * t as i64)
    }
}

impl ForecastSet {
    pub fn len(&self) -> usize {
        self.load_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_p.is_empty()
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::minutes(STEP_MINUTES * t as i64)
    }
}

/// Chronological train/test split point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
        }
    }
}

impl SplitSpec {
    pub fn boundary(&self, len: usize) -> usize {
        assert!(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train fraction must lie in (0, 1)"
        );
        (self.train_fraction * len as f64).floor() as usize
    }
}

fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap()
}

/// Normalized 48-point daily load template, peak 1.0 at 19:00.
pub fn load_template() -> [f64; STEPS_PER_DAY] {
    let mut out = [0.0; STEPS_PER_DAY];
    let mut peak = 0.0f64;
    for (t, slot) in out.iter_mut().enumerate() {
        let h = t as f64 * 0.5;
        let morning = 0.22 * (-((h - 8.0) * (h - 8.0)) / (2.0 * 2.0 * 2.0)).exp();
        let evening = 0.55 * (-((h - 19.0) * (h - 19.0)) / (2.0 * 2.2 * 2.2)).exp();
        *slot = 0.40 + morning + evening;
        peak = peak.max(*slot);
    }
    for slot in &mut out {
        *slot /= peak;
    }
    out
}

/// Clear-sky production shape: cosine bell over 06:00-18:00, zero otherwise.
pub fn clear_sky_shape(step_in_day: usize) -> f64 {
    let h = (step_in_day % STEPS_PER_DAY) as f64 * 0.5;
    if !(6.0..=18.0).contains(&h) {
        return 0.0;
    }
    (std::f64::consts::PI * (h - 12.0) / 12.0).cos().max(0.0)
}

/// Generates `days` of synchronized true load and PV series for a network.
pub fn generate(net: &Network, days: usize, seed: u64, cfg: &ScenarioConfig) -> TimeSeriesSet {
    assert!(days >= 1, "need at least one day");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = load_template();
    let len = days * STEPS_PER_DAY;
    let n_bus = net.n_buses();
    let n_inv = net.inverters.len();

    let mut load_p = Vec::with_capacity(len);
    let mut load_q = Vec::with_capacity(len);
    let mut pv = Vec::with_capacity(len);
    for t in 0..len {
        let slot = t % STEPS_PER_DAY;
        let mu = template[slot];
        let mut p_row = Vec::with_capacity(n_bus);
        let mut q_row = Vec::with_capacity(n_bus);
        for bus in &net.buses {
            // One noise draw per bus-step keeps the power factor constant.
            let z: f64 = StandardNormal.sample(&mut rng);
            let factor = (1.0 + cfg.sigma_load * z).max(0.0);
            p_row.push(bus.load_p_kw * mu * factor);
            q_row.push(bus.load_q_kvar * mu * factor);
        }
        let bell = clear_sky_shape(slot);
        let mut pv_row = Vec::with_capacity(n_inv);
        for inv in &net.inverters {
            // Drawn unconditionally so the stream layout is independent of
            // daylight.
            let z: f64 = StandardNormal.sample(&mut rng);
            let irradiance = (cfg.sigma_irradiance * z).exp();
            pv_row.push((inv.rated_kw * bell * irradiance).clamp(0.0, inv.rated_kw));
        }
        load_p.push(p_row);
        load_q.push(q_row);
        pv.push(pv_row);
    }
    TimeSeriesSet {
        start: default_start(),
        load_p,
        load_q,
        pv,
    }
}

/// Forecast = truth x (1 + N(0, noise_std)), with PV clipped at zero.
pub fn make_forecasts(truth: &TimeSeriesSet, noise_std: f64, seed: u64) -> ForecastSet {
    assert!(noise_std >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = |v: f64, clip_zero: bool| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        let out = v * (1.0 + noise_std * z);
        if clip_zero {
            out.max(0.0)
        } else {
            out
        }
    };
    let load_p = truth
        .load_p
        .iter()
        .map(|row| row.iter().map(|&v| noisy(v, false)).collect())
        .collect();
    let load_q = truth
        .load_q
        .iter()
        .map(|row| row.iter().map(|&v| noisy(v, false)).collect())
        .collect();
    let pv = truth
        .pv
        .iter()
        .map(|row| row.iter().map(|&v| noisy(v, true)).collect())
        .collect();
    ForecastSet {
        start: truth.start,
        load_p,
        load_q,
        pv,
    }
}

/// Chronological partition at `floor(fraction * len)`.
pub fn split(
    ts: &TimeSeriesSet,
    spec: &SplitSpec,
) -> Result<(TimeSeriesSet, TimeSeriesSet), ScenarioError> {
    let len = ts.len();
    if len < 2 {
        return Err(ScenarioError::TooShort(len));
    }
    let b = spec.boundary(len);
    let take = |rows: &Vec<Vec<f64>>, range: std::ops::Range<usize>| rows[range].to_vec();
    let train = TimeSeriesSet {
        start: ts.start,
        load_p: take(&ts.load_p, 0..b),
        load_q: take(&ts.load_q, 0..b),
        pv: take(&ts.pv, 0..b),
    };
    let test = TimeSeriesSet {
        start: ts.timestamp(b),
        load_p: take(&ts.load_p, b..len),
        load_q: take(&ts.load_q, b..len),
        pv: take(&ts.pv, b..len),
    };
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// CSV interface: timestamp, entity_type (load|pv), entity_id, p_kw, q_kvar
// ---------------------------------------------------------------------------

fn write_rows<P: AsRef<Path>>(
    path: P,
    net: &Network,
    start: DateTime<Utc>,
    load_p: &[Vec<f64>],
    load_q: &[Vec<f64>],
    pv: &[Vec<f64>],
) -> Result<(), ScenarioError> {
    let path_str = path.as_ref().display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|source| ScenarioError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let io_err = |source: csv::Error| ScenarioError::Csv {
        path: path_str.clone(),
        source,
    };
    w.write_record(["timestamp", "entity_type", "entity_id", "p_kw", "q_kvar"])
        .map_err(io_err)?;
    for t in 0..load_p.len() {
        let stamp = (start + chrono::Duration::minutes(STEP_MINUTES * t as i64))
            .to_rfc3339_opts(SecondsFormat::Secs, true);
        for (i, bus) in net.buses.iter().enumerate() {
            if bus.id == 0 {
                continue; // the substation carries no load rows
            }
            w.write_record([
                stamp.as_str(),
                "load",
                &bus.id.to_string(),
                &format!("{}", load_p[t][i]),
                &format!("{}", load_q[t][i]),
            ])
            .map_err(|e| ScenarioError::Csv {
                path: path_str.clone(),
                source: e,
            })?;
        }
        for (k, _) in net.inverters.iter().enumerate() {
            w.write_record([
                stamp.as_str(),
                "pv",
                &k.to_string(),
                &format!("{}", pv[t][k]),
                "0",
            ])
            .map_err(|e| ScenarioError::Csv {
                path: path_str.clone(),
                source: e,
            })?;
        }
    }
    w.flush().map_err(|source| ScenarioError::Io {
        path: path_str,
        source,
    })?;
    Ok(())
}

pub fn write_time_series<P: AsRef<Path>>(
    path: P,
    net: &Network,
    ts: &TimeSeriesSet,
) -> Result<(), ScenarioError> {
    write_rows(path, net, ts.start, &ts.load_p, &ts.load_q, &ts.pv)
}

pub fn write_forecast_set<P: AsRef<Path>>(
    path: P,
    net: &Network,
    fc: &ForecastSet,
) -> Result<(), ScenarioError> {
    write_rows(path, net, fc.start, &fc.load_p, &fc.load_q, &fc.pv)
}

struct RawSeries {
    start: DateTime<Utc>,
    load_p: Vec<Vec<f64>>,
    load_q: Vec<Vec<f64>>,
    pv: Vec<Vec<f64>>,
}

fn read_rows<P: AsRef<Path>>(path: P, net: &Network) -> Result<RawSeries, ScenarioError> {
    let path_str = path.as_ref().display().to_string();
    let bad = |reason: String| ScenarioError::BadData {
        path: path_str.clone(),
        reason,
    };
    let mut r = csv::Reader::from_path(&path).map_err(|source| ScenarioError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let n_bus = net.n_buses();
    let n_inv = net.inverters.len();
    let mut start: Option<DateTime<Utc>> = None;
    let mut stamps: Vec<DateTime<Utc>> = Vec::new();
    let mut load_p: Vec<Vec<f64>> = Vec::new();
    let mut load_q: Vec<Vec<f64>> = Vec::new();
    let mut pv: Vec<Vec<f64>> = Vec::new();

    for record in r.records() {
        let record = record.map_err(|source| ScenarioError::Csv {
            path: path_str.clone(),
            source,
        })?;
        if record.len() != 5 {
            return Err(bad(format!("expected 5 columns, got {}", record.len())));
        }
        let stamp = DateTime::parse_from_rfc3339(&record[0])
            .map_err(|e| bad(format!("bad timestamp {:?}: {e}", &record[0])))?
            .with_timezone(&Utc);
        if start.is_none() {
            start = Some(stamp);
        }
        if stamps.last() != Some(&stamp) {
            stamps.push(stamp);
            load_p.push(vec![0.0; n_bus]);
            load_q.push(vec![0.0; n_bus]);
            pv.push(vec![0.0; n_inv]);
        }
        let t = stamps.len() - 1;
        let p: f64 = record[3]
            .parse()
            .map_err(|e| bad(format!("bad p_kw {:?}: {e}", &record[3])))?;
        let q: f64 = record[4]
            .parse()
            .map_err(|e| bad(format!("bad q_kvar {:?}: {e}", &record[4])))?;
        match &record[1] {
            "load" => {
                let id: u32 = record[2]
                    .parse()
                    .map_err(|e| bad(format!("bad bus id {:?}: {e}", &record[2])))?;
                let idx = net
                    .bus_index(id)
                    .ok_or_else(|| bad(format!("unknown load bus id {id}")))?;
                load_p[t][idx] = p;
                load_q[t][idx] = q;
            }
            "pv" => {
                let k: usize = record[2]
                    .parse()
                    .map_err(|e| bad(format!("bad inverter index {:?}: {e}", &record[2])))?;
                if k >= n_inv {
                    return Err(bad(format!("inverter index {k} out of range")));
                }
                pv[t][k] = p;
            }
            other => return Err(bad(format!("unknown entity_type {other:?}"))),
        }
    }
    let start = start.ok_or_else(|| bad("file contains no data rows".to_string()))?;
    Ok(RawSeries {
        start,
        load_p,
        load_q,
        pv,
    })
}

pub fn read_time_series<P: AsRef<Path>>(
    path: P,
    net: &Network,
) -> Result<TimeSeriesSet, ScenarioError> {
    let raw = read_rows(path, net)?;
    Ok(TimeSeriesSet {
        start: raw.start,
        load_p: raw.load_p,
        load_q: raw.load_q,
        pv: raw.pv,
    })
}

pub fn read_forecast_set<P: AsRef<Path>>(
    path: P,
    net: &Network,
) -> Result<ForecastSet, ScenarioError> {
    let raw = read_rows(path, net)?;
    Ok(ForecastSet {
        start: raw.start,
        load_p: raw.load_p,
        load_q: raw.load_q,
        pv: raw.pv,
    })
}
