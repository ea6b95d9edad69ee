//! Brute-force references for agent verification: exhaustive single-step
//! Volt-VAR optimization over an action grid, a corner-scenario min-max
//! variant over an uncertainty box, and a uniform random policy.
//!
//! These oracles are stateless single-step optimizers, so the switching cost
//! does not enter their objective; comparisons against an agent leave the
//! agent's realized switching cost out on both sides.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{ActionVector, EnvConfig};
use crate::network::{build_admittance, inverter_q_limit, Network};
use crate::powerflow::{compute_losses, count_violations, solve, InjectionVector};

const GRID_GUARD: usize = 1_000_000;
const CORNER_GUARD: usize = 4096;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("action grid enumerates {got} combinations, guard is {GRID_GUARD}")]
    GridTooLarge { got: usize },
    #[error("scenario box enumerates {got} corners, guard is {CORNER_GUARD}")]
    TooManyCorners { got: usize },
    #[error("grid is empty")]
    EmptyGrid,
}

/// Discretized action space: tap candidates, every capacitor combination,
/// and K evenly spaced reactive levels per inverter.
#[derive(Debug, Clone)]
pub struct ActionGrid {
    pub taps: Vec<i32>,
    pub n_caps: usize,
    pub q_levels: usize,
}

impl ActionGrid {
    pub fn total(&self, n_inverters: usize) -> usize {
        self.taps.len() * (1 << self.n_caps) * self.q_levels.pow(n_inverters as u32)
    }

    fn check(&self, n_inverters: usize) -> Result<(), OracleError> {
        if self.taps.is_empty() || self.q_levels == 0 {
            return Err(OracleError::EmptyGrid);
        }
        let total = self.total(n_inverters);
        if total > GRID_GUARD {
            return Err(OracleError::GridTooLarge { got: total });
        }
        Ok(())
    }

    /// Level index -> fraction of the reactive limit in [-1, 1]. A single
    /// level degenerates to zero injection.
    fn level_fraction(&self, idx: usize) -> f64 {
        if self.q_levels == 1 {
            0.0
        } else {
            -1.0 + 2.0 * idx as f64 / (self.q_levels - 1) as f64
        }
    }
}

/// One snapshot of exogenous conditions: per-bus loads and per-inverter
/// active PV output, physical units.
#[derive(Debug, Clone)]
pub struct SnapshotInjections {
    pub load_p_kw: Vec<f64>,
    pub load_q_kvar: Vec<f64>,
    pub pv_kw: Vec<f64>,
}

/// Evaluates the single-step cost `c_p * loss + c_v * violations` of an
/// action at a snapshot; non-convergence scores +inf.
pub fn evaluate_action(
    net: &Network,
    snap: &SnapshotInjections,
    action: &ActionVector,
    cfg: &EnvConfig,
) -> f64 {
    let y = build_admittance(net, &action.caps).expect("cap status length");
    let v_ref = net.regulator.ratio(action.tap);
    let base_kw = net.base_mva * 1000.0;
    let n = net.n_buses();
    let mut inj = InjectionVector::zeros(n);
    for i in 1..n {
        inj.p[i] = -snap.load_p_kw[i] / base_kw;
        inj.q[i] = -snap.load_q_kvar[i] / base_kw;
    }
    for (k, inv) in net.inverters.iter().enumerate() {
        if inv.bus > 0 {
            inj.p[inv.bus] += snap.pv_kw[k] / base_kw;
            inj.q[inv.bus] += action.q_dg_kvar[k] / base_kw;
        }
    }
    let sol = solve(&y, &inj, v_ref);
    if !sol.converged {
        return f64::INFINITY;
    }
    let losses = compute_losses(net, &sol).expect("converged");
    cfg.c_p * losses.p_loss_mw + cfg.c_v * count_violations(&sol, cfg.v_lo, cfg.v_hi) as f64
}

fn action_at(
    net: &Network,
    grid: &ActionGrid,
    snap: &SnapshotInjections,
    tap_i: usize,
    cap_mask: usize,
    q_idx: &[usize],
) -> ActionVector {
    let caps = (0..grid.n_caps).map(|k| cap_mask >> k & 1 == 1).collect();
    let q_dg_kvar = net
        .inverters
        .iter()
        .enumerate()
        .map(|(k, inv)| {
            let p = snap.pv_kw[k].clamp(0.0, inv.rated_kva);
            let limit = inverter_q_limit(inv, p).expect("clamped output in domain");
            grid.level_fraction(q_idx[k]) * limit
        })
        .collect();
    ActionVector {
        tap: grid.taps[tap_i],
        caps,
        q_dg_kvar,
    }
}

/// Iterates the grid in lexicographic order (tap, capacitor mask, q levels)
/// and folds each decoded action into `visit`.
fn scan_grid<F: FnMut(ActionVector)>(
    net: &Network,
    grid: &ActionGrid,
    snap: &SnapshotInjections,
    mut visit: F,
) {
    let n_inv = net.inverters.len();
    let combos = grid.q_levels.pow(n_inv as u32);
    let mut q_idx = vec![0usize; n_inv];
    for tap_i in 0..grid.taps.len() {
        for cap_mask in 0..(1usize << grid.n_caps) {
            for combo in 0..combos {
                let mut rem = combo;
                for k in (0..n_inv).rev() {
                    q_idx[k] = rem % grid.q_levels;
                    rem /= grid.q_levels;
                }
                visit(action_at(net, grid, snap, tap_i, cap_mask, &q_idx));
            }
        }
    }
}

/// Exhaustive single-step VVO: evaluates every grid action with one power
/// flow each and returns the objective minimizer. Ties break to the
/// lexicographically smallest action in enumeration order.
pub fn exhaustive_vvo(
    net: &Network,
    snap: &SnapshotInjections,
    grid: &ActionGrid,
    cfg: &EnvConfig,
) -> Result<(ActionVector, f64), OracleError> {
    grid.check(net.inverters.len())?;
    let mut best: Option<(ActionVector, f64)> = None;
    scan_grid(net, grid, snap, |action| {
        let objective = evaluate_action(net, snap, &action, cfg);
        let better = match &best {
            None => true,
            Some((_, incumbent)) => objective < *incumbent,
        };
        if better {
            best = Some((action, objective));
        }
    });
    best.ok_or(OracleError::EmptyGrid)
}

/// Interval bounds per channel for the min-max oracle: load P per non-slack
/// bus (bus order), then PV per inverter. Load Q scales with the same
/// relative factor as its bus's P so power factors survive the excursion.
#[derive(Debug, Clone)]
pub struct ScenarioBox {
    pub nominal: SnapshotInjections,
    /// (lower, upper) absolute kW bounds per non-slack bus.
    pub load_p_bounds: Vec<(f64, f64)>,
    /// (lower, upper) absolute kW bounds per inverter.
    pub pv_bounds: Vec<(f64, f64)>,
    /// Move all loads together and all PV together (4 corners) instead of
    /// every per-channel corner combination.
    pub grouped: bool,
}

impl ScenarioBox {
    /// Box of zero width around the nominal snapshot.
    pub fn degenerate(net: &Network, nominal: SnapshotInjections) -> ScenarioBox {
        let load_p_bounds = (1..net.n_buses())
            .map(|i| (nominal.load_p_kw[i], nominal.load_p_kw[i]))
            .collect();
        let pv_bounds = nominal.pv_kw.iter().map(|&p| (p, p)).collect();
        ScenarioBox {
            nominal,
            load_p_bounds,
            pv_bounds,
            grouped: true,
        }
    }

    fn n_channels(&self) -> usize {
        self.load_p_bounds.len() + self.pv_bounds.len()
    }

    fn corner_count(&self) -> usize {
        if self.grouped {
            4
        } else {
            1usize << self.n_channels()
        }
    }

    /// Materializes corner `idx` as a snapshot. Grouped: bit 0 drives all
    /// loads, bit 1 all PV; ungrouped: one bit per channel, loads first.
    /// A set bit selects the upper bound.
    fn corner(&self, net: &Network, idx: usize) -> SnapshotInjections {
        let mut snap = self.nominal.clone();
        let load_hi = |c: usize| -> bool {
            if self.grouped {
                idx & 1 == 1
            } else {
                idx >> c & 1 == 1
            }
        };
        let pv_hi = |k: usize| -> bool {
            if self.grouped {
                idx >> 1 & 1 == 1
            } else {
                idx >> (self.load_p_bounds.len() + k) & 1 == 1
            }
        };
        for (c, &(lo, hi)) in self.load_p_bounds.iter().enumerate() {
            let bus = c + 1;
            let p = if load_hi(c) { hi } else { lo };
            let nominal_p = self.nominal.load_p_kw[bus];
            let ratio = if nominal_p.abs() > 1e-12 {
                p / nominal_p
            } else {
                1.0
            };
            snap.load_p_kw[bus] = p;
            snap.load_q_kvar[bus] = self.nominal.load_q_kvar[bus] * ratio;
        }
        for (k, &(lo, hi)) in self.pv_bounds.iter().enumerate() {
            let rated = net.inverters[k].rated_kva;
            snap.pv_kw[k] = (if pv_hi(k) { hi } else { lo }).clamp(0.0, rated);
        }
        snap
    }
}

/// Corner min-max VVO: for every grid action take the worst corner
/// objective, then return the action minimizing that worst case. Exact only
/// when the objective is monotone in the injections, hence "corner",
/// not "certified".
pub fn robust_exhaustive(
    net: &Network,
    scenario_box: &ScenarioBox,
    grid: &ActionGrid,
    cfg: &EnvConfig,
) -> Result<(ActionVector, f64), OracleError> {
    grid.check(net.inverters.len())?;
    let corners = scenario_box.corner_count();
    if corners > CORNER_GUARD {
        return Err(OracleError::TooManyCorners { got: corners });
    }
    let snaps: Vec<SnapshotInjections> = (0..corners)
        .map(|i| scenario_box.corner(net, i))
        .collect();
    let mut best: Option<(ActionVector, f64)> = None;
    // The q limits of the decoded action depend on PV output; decode against
    // the nominal snapshot so one action means one command across corners.
    scan_grid(net, grid, &scenario_box.nominal, |action| {
        let mut worst = f64::NEG_INFINITY;
        for snap in &snaps {
            worst = worst.max(evaluate_action(net, snap, &action, cfg));
        }
        let better = match &best {
            None => true,
            Some((_, incumbent)) => worst < *incumbent,
        };
        if better {
            best = Some((action, worst));
        }
    });
    best.ok_or(OracleError::EmptyGrid)
}

/// Uniform random draws over an action grid, reproducible from a seed.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> RandomPolicy {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(
        &mut self,
        net: &Network,
        grid: &ActionGrid,
        snap: &SnapshotInjections,
    ) -> ActionVector {
        let tap_i = self.rng.gen_range(0..grid.taps.len());
        let cap_mask = self.rng.gen_range(0..(1usize << grid.n_caps));
        let q_idx: Vec<usize> = (0..net.inverters.len())
            .map(|_| self.rng.gen_range(0..grid.q_levels))
            .collect();
        action_at(net, grid, snap, tap_i, cap_mask, &q_idx)
    }
}
