//! The Volt-VAR control environment: composes forecasts, conformal interval
//! bounds, device state, and the power-flow engine into a step/reward loop.
//!
//! The agent only ever observes forecasts, interval bounds, past actuals,
//! and its own device state; each step is then settled against the *true*
//! injections. That gap between observation and settlement is the
//! uncertainty the interval features exist to absorb.
//!
//! Feature layout of an observation, all entries in [-1, 1]:
//!
//! ```text
//! [ prev actual net P per non-slack bus   (n-1)
//! | prev actual net Q per non-slack bus   (n-1)
//! | forecast net P per non-slack bus      (n-1)
//! | forecast net Q per non-slack bus      (n-1)
//! | tap / tap_max                         (1)
//! | capacitor statuses 0/1                (n_caps)
//! | sin(2 pi t / 48), cos(2 pi t / 48)    (2) ]
//! ```
//!
//! followed, in the adversarial variant, by the normalized channel lower
//! bounds then upper bounds. Channels are load P per non-slack bus in bus
//! order, then PV output per inverter. Net injections are generation minus
//! load; injections and bounds are normalized by the feeder's aggregate
//! apparent-power rating.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::{IntervalSet, PredictionInterval};
use crate::network::{build_admittance, inverter_q_limit, Network};
use crate::powerflow::{compute_losses, count_violations, solve, InjectionVector};
use crate::scenario::{ForecastSet, TimeSeriesSet};

pub use crate::scenario::STEPS_PER_DAY;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("day index {got} out of range: dataset has {days} full days")]
    DayOutOfRange { got: usize, days: usize },
    #[error("expected {expected} interval channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("episode finished; call reset before stepping")]
    EpisodeDone,
    #[error("dataset misaligned: {0}")]
    Misaligned(String),
}

/// Cost coefficients and voltage band of the reward function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Power-loss cost, $ per MW of loss at a step.
    pub c_p: f64,
    /// Per-violation cost.
    pub c_v: f64,
    /// Per-tap-step and per-capacitor-toggle switching cost.
    pub c_u: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    /// Reward assigned to a step whose power flow fails to converge.
    pub nonconvergence_reward: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            c_p: 20.0,
            c_v: 0.1,
            c_u: 1.0,
            v_lo: 0.95,
            v_hi: 1.05,
            nonconvergence_reward: -100.0,
        }
    }
}

/// Device command for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector {
    pub tap: i32,
    pub caps: Vec<bool>,
    pub q_dg_kvar: Vec<f64>,
}

impl ActionVector {
    /// The do-nothing action: tap 0, capacitors off, zero inverter q.
    pub fn neutral(net: &Network) -> ActionVector {
        ActionVector {
            tap: 0,
            caps: vec![false; net.capacitors.len()],
            q_dg_kvar: vec![0.0; net.inverters.len()],
        }
    }
}

/// Static description of the observation geometry for a network.
#[derive(Debug, Clone)]
pub struct FeatureLayout {
    pub n_buses: usize,
    pub n_caps: usize,
    pub n_inverters: usize,
    pub tap_max: i32,
    /// Normalization scale: aggregate apparent rating of the feeder, kVA.
    pub scale_kva: f64,
}

impl FeatureLayout {
    pub fn for_network(net: &Network) -> FeatureLayout {
        let load_kva: f64 = net
            .buses
            .iter()
            .map(|b| (b.load_p_kw * b.load_p_kw + b.load_q_kvar * b.load_q_kvar).sqrt())
            .sum();
        let inv_kva: f64 = net.inverters.iter().map(|i| i.rated_kva).sum();
        FeatureLayout {
            n_buses: net.n_buses(),
            n_caps: net.capacitors.len(),
            n_inverters: net.inverters.len(),
            tap_max: net.regulator.tap_max,
            scale_kva: (load_kva + inv_kva).max(1.0),
        }
    }

    /// Interval channels: load P per non-slack bus, then PV per inverter.
    pub fn n_channels(&self) -> usize {
        self.n_buses - 1 + self.n_inverters
    }

    pub fn channel_names(&self, net: &Network) -> Vec<String> {
        let mut names: Vec<String> = net
            .buses
            .iter()
            .filter(|b| b.id != 0)
            .map(|b| format!("load:{}", b.id))
            .collect();
        names.extend((0..self.n_inverters).map(|k| format!("pv:{k}")));
        names
    }

    pub fn base_len(&self) -> usize {
        4 * (self.n_buses - 1) + 1 + self.n_caps + 2
    }

    pub fn adversarial_len(&self) -> usize {
        self.base_len() + 2 * self.n_channels()
    }

    fn normalize(&self, kw: f64) -> f64 {
        (kw / self.scale_kva).clamp(-1.0, 1.0)
    }

    /// Stable description string; its hash rides along with saved models so
    /// an agent is never evaluated against the wrong geometry.
    pub fn describe(&self) -> String {
        format!(
            "v1 buses={} caps={} inverters={} tap_max={} scale_kva={} \
             order=prev_p,prev_q,fc_p,fc_q,tap,caps,sin,cos,lower,upper",
            self.n_buses, self.n_caps, self.n_inverters, self.tap_max, self.scale_kva
        )
    }
}

/// Extracts the per-channel truth series used to fit conformal models:
/// load P per non-slack bus in bus order, then PV output per inverter.
pub fn channel_series(net: &Network, ts: &TimeSeriesSet) -> Vec<crate::conformal::ChannelSeries> {
    let layout = FeatureLayout::for_network(net);
    let names = layout.channel_names(net);
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(ts.len()); names.len()];
    for t in 0..ts.len() {
        for i in 1..net.n_buses() {
            series[i - 1].push(ts.load_p[t][i]);
        }
        for k in 0..net.inverters.len() {
            series[net.n_buses() - 1 + k].push(ts.pv[t][k]);
        }
    }
    names
        .into_iter()
        .zip(series)
        .map(|(name, values)| crate::conformal::ChannelSeries { name, values })
        .collect()
}

/// Normalized observation before interval augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub prev_p: Vec<f64>,
    pub prev_q: Vec<f64>,
    pub forecast_p: Vec<f64>,
    pub forecast_q: Vec<f64>,
    pub tap: f64,
    pub caps: Vec<f64>,
    pub time_sin: f64,
    pub time_cos: f64,
}

impl EnvState {
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.prev_p.len() * 4 + 1 + self.caps.len() + 2,
        );
        out.extend_from_slice(&self.prev_p);
        out.extend_from_slice(&self.prev_q);
        out.extend_from_slice(&self.forecast_p);
        out.extend_from_slice(&self.forecast_q);
        out.push(self.tap);
        out.extend_from_slice(&self.caps);
        out.push(self.time_sin);
        out.push(self.time_cos);
        out
    }
}

/// Observation plus normalized uncertainty-set bounds per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialState {
    pub base: EnvState,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AdversarialState {
    pub fn features(&self) -> Vec<f64> {
        let mut out = self.base.features();
        out.extend_from_slice(&self.lower);
        out.extend_from_slice(&self.upper);
        out
    }
}

/// Appends normalized interval bounds to a state. One interval per channel,
/// in channel order.
pub fn augment(
    base: EnvState,
    intervals: &[PredictionInterval],
    layout: &FeatureLayout,
) -> Result<AdversarialState, EnvError> {
    if intervals.len() != layout.n_channels() {
        return Err(EnvError::ChannelMismatch {
            expected: layout.n_channels(),
            got: intervals.len(),
        });
    }
    let lower = intervals.iter().map(|iv| layout.normalize(iv.lower)).collect();
    let upper = intervals.iter().map(|iv| layout.normalize(iv.upper)).collect();
    Ok(AdversarialState { base, lower, upper })
}

/// Everything a policy needs to turn raw head outputs into a legal action
/// at the current step. Inverter limits come from *forecast* PV output; the
/// environment re-clips against the true output at settlement.
#[derive(Debug, Clone)]
pub struct ActionContext {
    pub tap_min: i32,
    pub tap_max: i32,
    pub n_caps: usize,
    pub q_limits_kvar: Vec<f64>,
}

/// Per-step settlement record. [`reward_from`] reproduces the reward from
/// this record exactly.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub t: usize,
    pub p_loss_mw: f64,
    pub violations: usize,
    pub switches: i32,
    pub converged: bool,
    pub tap: i32,
    pub caps: Vec<bool>,
    pub q_dg_kvar: Vec<f64>,
}

/// The reward rule: `-(c_p * loss + c_v * violations + c_u * switches)` for
/// a converged step, the configured floor otherwise.
pub fn reward_from(cfg: &EnvConfig, info: &StepInfo) -> f64 {
    if !info.converged {
        return cfg.nonconvergence_reward;
    }
    -(cfg.c_p * info.p_loss_mw
        + cfg.c_v * info.violations as f64
        + cfg.c_u * f64::from(info.switches))
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    /// None when the episode just ended.
    pub next: Option<AdversarialState>,
    pub info: StepInfo,
}

/// Accumulated per-step records of one or more evaluation episodes.
#[derive(Debug, Clone, Default)]
pub struct EpisodeMetrics {
    pub rewards: Vec<f64>,
    pub infos: Vec<StepInfo>,
}

impl EpisodeMetrics {
    pub fn push(&mut self, reward: f64, info: StepInfo) {
        self.rewards.push(reward);
        self.infos.push(info);
    }

    pub fn steps(&self) -> usize {
        self.rewards.len()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.rewards.is_empty() {
            return 0.0;
        }
        self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
    }

    pub fn total_violations(&self) -> usize {
        self.infos.iter().map(|i| i.violations).sum()
    }

    pub fn mean_loss_mw(&self) -> f64 {
        let converged: Vec<f64> = self
            .infos
            .iter()
            .filter(|i| i.converged)
            .map(|i| i.p_loss_mw)
            .collect();
        if converged.is_empty() {
            return 0.0;
        }
        converged.iter().sum::<f64>() / converged.len() as f64
    }

    pub fn std_loss_mw(&self) -> f64 {
        let converged: Vec<f64> = self
            .infos
            .iter()
            .filter(|i| i.converged)
            .map(|i| i.p_loss_mw)
            .collect();
        if converged.len() < 2 {
            return 0.0;
        }
        let mean = converged.iter().sum::<f64>() / converged.len() as f64;
        let var = converged.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / converged.len() as f64;
        var.sqrt()
    }
}

/// Voltage violation ratio: total bus-step violations over steps x phases.
/// In this balanced model the phase count is the bus count.
pub fn vvr(metrics: &EpisodeMetrics, n_phases: usize) -> f64 {
    assert!(n_phases >= 1);
    if metrics.steps() == 0 {
        return 0.0;
    }
    metrics.total_violations() as f64 / (metrics.steps() * n_phases) as f64
}

/// The environment. One instance owns its cursor; clones are independent.
#[derive(Debug, Clone)]
pub struct VvEnv {
    net: Network,
    cfg: EnvConfig,
    truth: TimeSeriesSet,
    forecast: ForecastSet,
    intervals: IntervalSet,
    layout: FeatureLayout,
    // Cursor state.
    day: usize,
    step_in_day: usize,
    done: bool,
    tap: i32,
    caps: Vec<bool>,
    /// Actual net injections settled at the previous step, kW / kvar,
    /// non-slack buses in order.
    prev_p_kw: Vec<f64>,
    prev_q_kvar: Vec<f64>,
}

impl VvEnv {
    pub fn new(
        net: Network,
        cfg: EnvConfig,
        truth: TimeSeriesSet,
        forecast: ForecastSet,
        intervals: IntervalSet,
    ) -> Result<VvEnv, EnvError> {
        let layout = FeatureLayout::for_network(&net);
        if forecast.len() != truth.len() {
            return Err(EnvError::Misaligned(format!(
                "forecast has {} steps, truth has {}",
                forecast.len(),
                truth.len()
            )));
        }
        if intervals.len() < truth.len() {
            return Err(EnvError::Misaligned(format!(
                "interval set covers {} steps, truth has {}",
                intervals.len(),
                truth.len()
            )));
        }
        if intervals.n_channels() != layout.n_channels() {
            return Err(EnvError::ChannelMismatch {
                expected: layout.n_channels(),
                got: intervals.n_channels(),
            });
        }
        let n = net.n_buses();
        Ok(VvEnv {
            caps: vec![false; net.capacitors.len()],
            prev_p_kw: vec![0.0; n - 1],
            prev_q_kvar: vec![0.0; n - 1],
            net,
            cfg,
            truth,
            forecast,
            intervals,
            layout,
            day: 0,
            step_in_day: 0,
            done: true,
            tap: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn n_days(&self) -> usize {
        self.truth.n_days()
    }

    fn global_t(&self) -> usize {
        self.day * STEPS_PER_DAY + self.step_in_day
    }

    /// Global timestep the next `step` call will settle.
    pub fn timestep(&self) -> usize {
        self.global_t()
    }

    /// True net injections at a timestep, kW / kvar per non-slack bus, with
    /// the given inverter outputs already clipped.
    fn true_injections_kw(&self, t: usize, q_dg_kvar: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.net.n_buses();
        let mut p = vec![0.0; n - 1];
        let mut q = vec![0.0; n - 1];
        for i in 1..n {
            p[i - 1] = -self.truth.load_p[t][i];
            q[i - 1] = -self.truth.load_q[t][i];
        }
        for (k, inv) in self.net.inverters.iter().enumerate() {
            if inv.bus > 0 {
                p[inv.bus - 1] += self.truth.pv[t][k];
                q[inv.bus - 1] += q_dg_kvar[k];
            }
        }
        (p, q)
    }

    /// Forecast net injections at a timestep (inverter q unknown before the
    /// action is chosen, so the reactive forecast is load only).
    fn forecast_injections_kw(&self, t: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.net.n_buses();
        let mut p = vec![0.0; n - 1];
        let mut q = vec![0.0; n - 1];
        for i in 1..n {
            p[i - 1] = -self.forecast.load_p[t][i];
            q[i - 1] = -self.forecast.load_q[t][i];
        }
        for (k, inv) in self.net.inverters.iter().enumerate() {
            if inv.bus > 0 {
                p[inv.bus - 1] += self.forecast.pv[t][k];
            }
        }
        (p, q)
    }

    /// Channel forecast values at a timestep: load P per non-slack bus then
    /// PV per inverter, kW.
    fn channel_forecasts(&self, t: usize) -> Vec<f64> {
        let mut out: Vec<f64> = (1..self.net.n_buses())
            .map(|i| self.forecast.load_p[t][i])
            .collect();
        out.extend(self.forecast.pv[t].iter().copied());
        out
    }

    /// Per-channel intervals at a timestep, centered on the channel
    /// forecast and widened by the conformal half-widths.
    pub fn channel_intervals_at(&self, t: usize) -> Vec<PredictionInterval> {
        let forecasts = self.channel_forecasts(t);
        forecasts
            .iter()
            .zip(&self.intervals.rows[t])
            .map(|(&fc, &(point, lower, upper))| {
                let w_lo = (point - lower).max(0.0);
                let w_hi = (upper - point).max(0.0);
                PredictionInterval {
                    point: fc,
                    lower: fc - w_lo,
                    upper: fc + w_hi,
                    alpha: self.intervals.alpha,
                }
            })
            .collect()
    }

    fn observe(&self) -> Result<AdversarialState, EnvError> {
        let t = self.global_t();
        let (fc_p, fc_q) = self.forecast_injections_kw(t);
        let base = EnvState {
            prev_p: self.prev_p_kw.iter().map(|&v| self.layout.normalize(v)).collect(),
            prev_q: self.prev_q_kvar.iter().map(|&v| self.layout.normalize(v)).collect(),
            forecast_p: fc_p.iter().map(|&v| self.layout.normalize(v)).collect(),
            forecast_q: fc_q.iter().map(|&v| self.layout.normalize(v)).collect(),
            tap: f64::from(self.tap) / f64::from(self.layout.tap_max),
            caps: self.caps.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
            time_sin: (2.0 * std::f64::consts::PI * self.step_in_day as f64 / 48.0).sin(),
            time_cos: (2.0 * std::f64::consts::PI * self.step_in_day as f64 / 48.0).cos(),
        };
        augment(base, &self.channel_intervals_at(t), &self.layout)
    }

    /// Positions the environment at the first step of a day with devices in
    /// their neutral state (tap 0, capacitors off).
    pub fn reset(&mut self, day: usize) -> Result<AdversarialState, EnvError> {
        if day >= self.n_days() {
            return Err(EnvError::DayOutOfRange {
                got: day,
                days: self.n_days(),
            });
        }
        self.day = day;
        self.step_in_day = 0;
        self.done = false;
        self.tap = 0;
        self.caps = vec![false; self.net.capacitors.len()];
        // Previous actuals come from the preceding timestep when one
        // exists, with zero inverter q (devices were just reset).
        let t0 = self.global_t();
        let t_prev = t0.saturating_sub(1);
        let zeros = vec![0.0; self.net.inverters.len()];
        let (p, q) = self.true_injections_kw(t_prev, &zeros);
        self.prev_p_kw = p;
        self.prev_q_kvar = q;
        self.observe()
    }

    /// Context for decoding raw policy outputs at the current step.
    pub fn action_context(&self) -> ActionContext {
        let t = self.global_t();
        let q_limits = self
            .net
            .inverters
            .iter()
            .enumerate()
            .map(|(k, inv)| {
                let p_fc = self.forecast.pv[t][k].clamp(0.0, inv.rated_kva);
                inverter_q_limit(inv, p_fc).expect("clamped forecast is in domain")
            })
            .collect();
        ActionContext {
            tap_min: self.net.regulator.tap_min,
            tap_max: self.net.regulator.tap_max,
            n_caps: self.net.capacitors.len(),
            q_limits_kvar: q_limits,
        }
    }

    /// Applies an action: solves the power flow against true injections,
    /// prices the step, advances the cursor. Out-of-range taps and inverter
    /// setpoints beyond the true headroom are clipped, not rejected.
    pub fn step(&mut self, action: &ActionVector) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let t = self.global_t();
        let tap = self.net.regulator.clamp_tap(action.tap);
        let caps: Vec<bool> = (0..self.net.capacitors.len())
            .map(|k| action.caps.get(k).copied().unwrap_or(false))
            .collect();
        let q_dg: Vec<f64> = self
            .net
            .inverters
            .iter()
            .enumerate()
            .map(|(k, inv)| {
                let p_true = self.truth.pv[t][k].clamp(0.0, inv.rated_kva);
                let limit = inverter_q_limit(inv, p_true).expect("clamped output is in domain");
                action.q_dg_kvar.get(k).copied().unwrap_or(0.0).clamp(-limit, limit)
            })
            .collect();

        let switches = (tap - self.tap).abs()
            + caps
                .iter()
                .zip(&self.caps)
                .filter(|(a, b)| a != b)
                .count() as i32;

        let y = build_admittance(&self.net, &caps).expect("cap status length matches");
        let v_ref = self.net.regulator.ratio(tap);
        let (p_kw, q_kvar) = self.true_injections_kw(t, &q_dg);
        let base_kw = self.net.base_mva * 1000.0;
        let mut inj = InjectionVector::zeros(self.net.n_buses());
        for i in 0..p_kw.len() {
            inj.p[i + 1] = p_kw[i] / base_kw;
            inj.q[i + 1] = q_kvar[i] / base_kw;
        }
        let sol = solve(&y, &inj, v_ref);

        let info = if sol.converged {
            let losses = compute_losses(&self.net, &sol).expect("converged");
            StepInfo {
                t,
                p_loss_mw: losses.p_loss_mw,
                violations: count_violations(&sol, self.cfg.v_lo, self.cfg.v_hi),
                switches,
                converged: true,
                tap,
                caps: caps.clone(),
                q_dg_kvar: q_dg.clone(),
            }
        } else {
            StepInfo {
                t,
                p_loss_mw: 0.0,
                violations: 0,
                switches,
                converged: false,
                tap,
                caps: caps.clone(),
                q_dg_kvar: q_dg.clone(),
            }
        };
        let reward = reward_from(&self.cfg, &info);

        // Settle state for the next observation.
        self.tap = tap;
        self.caps = caps;
        self.prev_p_kw = p_kw;
        self.prev_q_kvar = q_kvar;
        self.step_in_day += 1;
        let next = if self.step_in_day == STEPS_PER_DAY {
            self.done = true;
            None
        } else {
            Some(self.observe()?)
        };
        Ok(StepOutcome { reward, next, info })
    }
}
