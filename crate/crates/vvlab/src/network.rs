//! Radial distribution network model: buses, branches, voltage-regulation
//! devices, and the complex nodal admittance matrix.
//!
//! All electrical computation downstream of this module is carried out in
//! per-unit on the network's `base_mva` and each bus's `base_kv`. The input
//! file format accepts physical units (ohms, kW, kvar) and conversion happens
//! once, when the admittance matrix is assembled.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// serde_json reports line and column in its message.
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("network has no buses")]
    Empty,
    #[error("no slack bus defined")]
    MissingSlack,
    #[error("multiple slack buses ({0} found)")]
    MultipleSlack(usize),
    #[error("slack bus must be node 0, found id {0}")]
    SlackNotAtZero(u32),
    #[error("duplicate bus id {0}")]
    DuplicateBusId(u32),
    #[error("bus {0} disconnected from the slack bus")]
    Disconnected(u32),
    #[error("bus {id}: {reason}")]
    BadBus { id: u32, reason: String },
    #[error("branch references unknown bus id {0}")]
    UnknownBus(u32),
    #[error("branch from bus {0} to itself")]
    SelfLoop(u32),
    #[error("branch {from}-{to} has invalid impedance (r={r} ohm, x={x} ohm)")]
    BadImpedance { from: u32, to: u32, r: f64, x: f64 },
    #[error("regulator range invalid: {0}")]
    BadRegulator(String),
    #[error("capacitor at bus {0}: rated_kvar must be > 0")]
    BadCapacitor(u32),
    #[error("inverter at bus {id}: {reason}")]
    BadInverter { id: u32, reason: String },
    #[error("device references unknown bus id {0}")]
    DeviceUnknownBus(u32),
    #[error("capacitor status vector has length {got}, expected {expected}")]
    CapStatusLength { got: usize, expected: usize },
    #[error("inverter active power {p} kW outside [0, {s}] kVA")]
    QLimitDomain { p: f64, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pq,
}

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub base_kv: f64,
    pub load_p_kw: f64,
    pub load_q_kvar: f64,
}

/// Series branch between two buses. `from`/`to` are indices into
/// [`Network::buses`], not raw file ids.
#[derive(Debug, Clone)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
    /// Total line-charging susceptance in siemens, split half per end.
    pub b_s: f64,
}

/// Substation tap changer. The commanded tap is a control variable held by
/// the environment, not network data; this type carries the admissible range
/// and the per-tap step.
#[derive(Debug, Clone)]
pub struct Regulator {
    pub tap_min: i32,
    pub tap_max: i32,
    pub step_pu: f64,
}

impl Regulator {
    /// Network reference voltage for a given tap: `1 + tap * step`.
    pub fn ratio(&self, tap: i32) -> f64 {
        debug_assert!(tap >= self.tap_min && tap <= self.tap_max);
        1.0 + f64::from(tap) * self.step_pu
    }

    pub fn clamp_tap(&self, tap: i32) -> i32 {
        tap.clamp(self.tap_min, self.tap_max)
    }
}

#[derive(Debug, Clone)]
pub struct CapacitorBank {
    /// Bus index.
    pub bus: usize,
    pub rated_kvar: f64,
}

#[derive(Debug, Clone)]
pub struct SmartInverter {
    /// Bus index.
    pub bus: usize,
    pub rated_kw: f64,
    pub rated_kva: f64,
}

/// Reactive-power headroom of an inverter at a given active output:
/// `sqrt(s^2 - p^2)` in kvar.
pub fn inverter_q_limit(inv: &SmartInverter, active_p_kw: f64) -> Result<f64, NetworkError> {
    if !(0.0..=inv.rated_kva).contains(&active_p_kw) || !active_p_kw.is_finite() {
        return Err(NetworkError::QLimitDomain {
            p: active_p_kw,
            s: inv.rated_kva,
        });
    }
    Ok((inv.rated_kva * inv.rated_kva - active_p_kw * active_p_kw).sqrt())
}

/// Immutable, validated network. Bus index 0 is always the slack.
#[derive(Debug, Clone)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub regulator: Regulator,
    pub capacitors: Vec<CapacitorBank>,
    pub inverters: Vec<SmartInverter>,
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    base_mva: f64,
    buses: Vec<BusFile>,
    branches: Vec<BranchFile>,
    regulator: RegulatorFile,
    #[serde(default)]
    capacitors: Vec<CapacitorFile>,
    #[serde(default)]
    inverters: Vec<InverterFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BusFile {
    id: u32,
    kind: BusKind,
    base_kv: f64,
    #[serde(default)]
    load_p_kw: f64,
    #[serde(default)]
    load_q_kvar: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    from: u32,
    to: u32,
    r_ohm: f64,
    x_ohm: f64,
    #[serde(default)]
    b_s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegulatorFile {
    tap_min: i32,
    tap_max: i32,
    step_pu: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacitorFile {
    bus: u32,
    rated_kvar: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InverterFile {
    bus: u32,
    rated_kw: f64,
    rated_kva: f64,
}

/// Loads and validates a network file (see the formats chapter of the guide).
pub fn load_network<P: AsRef<Path>>(path: P) -> Result<Network, NetworkError> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|source| NetworkError::Io {
        path: path_str.clone(),
        source,
    })?;
    from_json_str(&text, &path_str)
}

/// Parses a network from JSON text. `origin` appears in parse errors.
pub fn from_json_str(text: &str, origin: &str) -> Result<Network, NetworkError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|source| NetworkError::Parse {
        path: origin.to_string(),
        source,
    })?;

    let mut buses: Vec<Bus> = file
        .buses
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            kind: b.kind,
            base_kv: b.base_kv,
            load_p_kw: b.load_p_kw,
            load_q_kvar: b.load_q_kvar,
        })
        .collect();
    buses.sort_by_key(|b| b.id);

    let index_of: BTreeMap<u32, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let lookup = |id: u32| -> Result<usize, NetworkError> {
        index_of.get(&id).copied().ok_or(NetworkError::UnknownBus(id))
    };

    let branches = file
        .branches
        .iter()
        .map(|br| {
            Ok(Branch {
                from: lookup(br.from)?,
                to: lookup(br.to)?,
                r_ohm: br.r_ohm,
                x_ohm: br.x_ohm,
                b_s: br.b_s,
            })
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;

    let device_lookup = |id: u32| -> Result<usize, NetworkError> {
        index_of
            .get(&id)
            .copied()
            .ok_or(NetworkError::DeviceUnknownBus(id))
    };
    let capacitors = file
        .capacitors
        .iter()
        .map(|c| {
            Ok(CapacitorBank {
                bus: device_lookup(c.bus)?,
                rated_kvar: c.rated_kvar,
            })
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;
    let inverters = file
        .inverters
        .iter()
        .map(|iv| {
            Ok(SmartInverter {
                bus: device_lookup(iv.bus)?,
                rated_kw: iv.rated_kw,
                rated_kva: iv.rated_kva,
            })
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;

    Network::new(
        file.base_mva,
        buses,
        branches,
        Regulator {
            tap_min: file.regulator.tap_min,
            tap_max: file.regulator.tap_max,
            step_pu: file.regulator.step_pu,
        },
        capacitors,
        inverters,
    )
}

impl Network {
    /// Builds a network from already-indexed parts and validates every
    /// structural invariant. Bus order must be ascending by id.
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        regulator: Regulator,
        capacitors: Vec<CapacitorBank>,
        inverters: Vec<SmartInverter>,
    ) -> Result<Self, NetworkError> {
        let net = Network {
            base_mva,
            buses,
            branches,
            regulator,
            capacitors,
            inverters,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        if self.buses.is_empty() {
            return Err(NetworkError::Empty);
        }
        for pair in self.buses.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(NetworkError::DuplicateBusId(pair[0].id));
            }
        }
        let slacks: Vec<&Bus> = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .collect();
        match slacks.len() {
            0 => return Err(NetworkError::MissingSlack),
            1 => {
                if slacks[0].id != 0 {
                    return Err(NetworkError::SlackNotAtZero(slacks[0].id));
                }
            }
            n => return Err(NetworkError::MultipleSlack(n)),
        }
        for bus in &self.buses {
            if bus.base_kv.is_nan() || bus.base_kv <= 0.0 {
                return Err(NetworkError::BadBus {
                    id: bus.id,
                    reason: format!("base_kv must be > 0, got {}", bus.base_kv),
                });
            }
            if !bus.load_p_kw.is_finite() || !bus.load_q_kvar.is_finite() {
                return Err(NetworkError::BadBus {
                    id: bus.id,
                    reason: "load values must be finite".to_string(),
                });
            }
        }

        let reg = &self.regulator;
        if reg.tap_min > 0 || reg.tap_max < 0 || reg.step_pu.is_nan() || reg.step_pu <= 0.0 {
            return Err(NetworkError::BadRegulator(format!(
                "need tap_min <= 0 <= tap_max and step_pu > 0, got [{}, {}] step {}",
                reg.tap_min, reg.tap_max, reg.step_pu
            )));
        }
        let (lo, hi) = (reg.ratio(reg.tap_min), reg.ratio(reg.tap_max));
        if lo < 0.9 - 1e-9 || hi > 1.1 + 1e-9 {
            return Err(NetworkError::BadRegulator(format!(
                "ratio range [{lo}, {hi}] exceeds [0.9, 1.1] p.u."
            )));
        }

        for br in &self.branches {
            let (fid, tid) = (self.buses[br.from].id, self.buses[br.to].id);
            if br.from == br.to {
                return Err(NetworkError::SelfLoop(fid));
            }
            if br.r_ohm < 0.0 || br.r_ohm * br.r_ohm + br.x_ohm * br.x_ohm == 0.0 {
                return Err(NetworkError::BadImpedance {
                    from: fid,
                    to: tid,
                    r: br.r_ohm,
                    x: br.x_ohm,
                });
            }
        }

        // Every bus must be reachable from the slack over the branch set.
        let n = self.buses.len();
        let mut adjacency = vec![Vec::new(); n];
        for br in &self.branches {
            adjacency[br.from].push(br.to);
            adjacency[br.to].push(br.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(NetworkError::Disconnected(self.buses[i].id));
        }

        for cap in &self.capacitors {
            if cap.rated_kvar.is_nan() || cap.rated_kvar <= 0.0 {
                return Err(NetworkError::BadCapacitor(self.buses[cap.bus].id));
            }
        }
        for inv in &self.inverters {
            let id = self.buses[inv.bus].id;
            if inv.rated_kva.is_nan() || inv.rated_kva <= 0.0 {
                return Err(NetworkError::BadInverter {
                    id,
                    reason: "rated_kva must be > 0".to_string(),
                });
            }
            if !(0.0..=inv.rated_kva).contains(&inv.rated_kw) {
                return Err(NetworkError::BadInverter {
                    id,
                    reason: format!(
                        "need 0 <= rated_kw <= rated_kva, got {} kW / {} kVA",
                        inv.rated_kw, inv.rated_kva
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Index of the bus with the given file id.
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.binary_search_by_key(&id, |b| b.id).ok()
    }

    /// Series admittance of a branch in per-unit on this network's base.
    pub fn branch_series_admittance_pu(&self, br: &Branch) -> Complex64 {
        let z_base = self.z_base_ohm(br.from);
        let z_pu = Complex64::new(br.r_ohm, br.x_ohm) / z_base;
        Complex64::new(1.0, 0.0) / z_pu
    }

    fn z_base_ohm(&self, bus: usize) -> f64 {
        let kv = self.buses[bus].base_kv;
        kv * kv / self.base_mva
    }
}

/// Dense complex nodal admittance matrix, per-unit, symmetric.
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Conductance G_ij.
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).re
    }

    /// Susceptance B_ij.
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).im
    }

    fn add(&mut self, i: usize, j: usize, y: Complex64) {
        self.data[i * self.n + j] += y;
    }
}

/// Assembles Y = G + jB with the given capacitor statuses.
///
/// Each active capacitor enters as a shunt susceptance `rated_kvar / S_base`
/// on its bus diagonal, so its injected reactive power is exactly
/// `status * rated * v^2` in per-unit. Line-charging susceptance is split
/// half per branch end.
pub fn build_admittance(
    net: &Network,
    cap_status: &[bool],
) -> Result<AdmittanceMatrix, NetworkError> {
    if cap_status.len() != net.capacitors.len() {
        return Err(NetworkError::CapStatusLength {
            got: cap_status.len(),
            expected: net.capacitors.len(),
        });
    }
    let n = net.n_buses();
    let mut y = AdmittanceMatrix {
        n,
        data: vec![Complex64::new(0.0, 0.0); n * n],
    };
    for br in &net.branches {
        let ys = net.branch_series_admittance_pu(br);
        let b_half = Complex64::new(0.0, 0.5 * br.b_s * net.z_base_ohm(br.from));
        y.add(br.from, br.to, -ys);
        y.add(br.to, br.from, -ys);
        y.add(br.from, br.from, ys + b_half);
        y.add(br.to, br.to, ys + b_half);
    }
    for (cap, &on) in net.capacitors.iter().zip(cap_status) {
        if on {
            let b_pu = cap.rated_kvar / (net.base_mva * 1000.0);
            y.add(cap.bus, cap.bus, Complex64::new(0.0, b_pu));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_bus_net(r_ohm: f64, x_ohm: f64) -> Network {
        // base_kv = 1, base_mva = 1 makes ohms equal per-unit.
        Network::new(
            1.0,
            vec![
                Bus {
                    id: 0,
                    kind: BusKind::Slack,
                    base_kv: 1.0,
                    load_p_kw: 0.0,
                    load_q_kvar: 0.0,
                },
                Bus {
                    id: 1,
                    kind: BusKind::Pq,
                    base_kv: 1.0,
                    load_p_kw: 0.0,
                    load_q_kvar: 0.0,
                },
            ],
            vec![Branch {
                from: 0,
                to: 1,
                r_ohm,
                x_ohm,
                b_s: 0.0,
            }],
            Regulator {
                tap_min: -16,
                tap_max: 16,
                step_pu: 0.2 / 32.0,
            },
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn single_reactive_branch_admittance() {
        // 1/(j0.1) = -j10, so Y_01 = +j10 and diagonals are -j10.
        let net = two_bus_net(0.0, 0.1);
        let y = build_admittance(&net, &[]).unwrap();
        assert_relative_eq!(y.get(0, 1).im, 10.0, max_relative = 1e-12);
        assert_relative_eq!(y.get(0, 1).re, 0.0);
        assert_relative_eq!(y.get(0, 0).im, -10.0, max_relative = 1e-12);
        assert_relative_eq!(y.get(1, 1).im, -10.0, max_relative = 1e-12);
    }

    #[test]
    fn capacitor_shunt_on_unit_base() {
        let mut net = two_bus_net(0.0, 0.1);
        net.capacitors.push(CapacitorBank {
            bus: 1,
            rated_kvar: 100.0,
        });
        let off = build_admittance(&net, &[false]).unwrap();
        let on = build_admittance(&net, &[true]).unwrap();
        // 100 kvar on a 1 MVA base adds +j0.1 to the bus diagonal.
        assert_relative_eq!(on.get(1, 1).im - off.get(1, 1).im, 0.1, max_relative = 1e-12);
        assert_relative_eq!(on.get(0, 0).im, off.get(0, 0).im);
    }

    #[test]
    fn empty_branch_set_is_rejected_as_disconnected() {
        let err = Network::new(
            1.0,
            vec![
                Bus {
                    id: 0,
                    kind: BusKind::Slack,
                    base_kv: 1.0,
                    load_p_kw: 0.0,
                    load_q_kvar: 0.0,
                },
                Bus {
                    id: 1,
                    kind: BusKind::Pq,
                    base_kv: 1.0,
                    load_p_kw: 0.0,
                    load_q_kvar: 0.0,
                },
            ],
            vec![],
            Regulator {
                tap_min: -16,
                tap_max: 16,
                step_pu: 0.00625,
            },
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Disconnected(1)));
    }

    #[test]
    fn no_branches_single_bus_gives_zero_matrix() {
        let net = Network::new(
            1.0,
            vec![Bus {
                id: 0,
                kind: BusKind::Slack,
                base_kv: 1.0,
                load_p_kw: 0.0,
                load_q_kvar: 0.0,
            }],
            vec![],
            Regulator {
                tap_min: -16,
                tap_max: 16,
                step_pu: 0.00625,
            },
            vec![],
            vec![],
        )
        .unwrap();
        let y = build_admittance(&net, &[]).unwrap();
        assert_eq!(y.get(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn regulator_ratio_endpoints() {
        let reg = Regulator {
            tap_min: -16,
            tap_max: 16,
            step_pu: 0.00625,
        };
        assert_eq!(reg.ratio(0), 1.0);
        assert_relative_eq!(reg.ratio(-16), 0.9, max_relative = 1e-12);
        assert_relative_eq!(reg.ratio(16), 1.1, max_relative = 1e-12);
    }

    #[test]
    fn q_limit_formula() {
        let inv = SmartInverter {
            bus: 1,
            rated_kw: 1.0,
            rated_kva: 1.1,
        };
        // sqrt(1.21 - 1.0) in whatever unit rated_kva carries.
        let q = inverter_q_limit(&inv, 1.0).unwrap();
        assert_relative_eq!(q, (1.21f64 - 1.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(q, 0.45825756949558405, max_relative = 1e-12);
        // Headroom exhausted at p = s.
        assert_relative_eq!(inverter_q_limit(&inv, 1.1).unwrap(), 0.0);
        assert!(inverter_q_limit(&inv, 1.2).is_err());

        let big = SmartInverter {
            bus: 1,
            rated_kw: 500.0,
            rated_kva: 550.0,
        };
        assert_relative_eq!(inverter_q_limit(&big, 0.0).unwrap(), 550.0);
    }

    #[test]
    fn q_limit_monotone_decreasing() {
        let inv = SmartInverter {
            bus: 0,
            rated_kw: 500.0,
            rated_kva: 550.0,
        };
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let p = 550.0 * f64::from(k) / 100.0;
            let q = inverter_q_limit(&inv, p).unwrap();
            assert!(q <= prev);
            prev = q;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"{
            "base_mva": 1.0, "frequency_hz": 60,
            "buses": [{"id":0,"kind":"slack","base_kv":1.0}],
            "branches": [],
            "regulator": {"tap_min":-16,"tap_max":16,"step_pu":0.00625}
        }"#;
        let err = from_json_str(text, "inline").unwrap_err();
        assert!(matches!(err, NetworkError::Parse { .. }));
        assert!(err.to_string().contains("frequency_hz"));
    }

    #[test]
    fn bundled_fixtures_load() {
        let bus5 = load_network("fixtures/bus5.json").unwrap();
        assert_eq!(bus5.n_buses(), 5);
        assert_eq!(bus5.branches.len(), 4);
        assert_eq!(bus5.buses[0].kind, BusKind::Slack);
        assert_eq!(bus5.buses[0].id, 0);

        let bus13 = load_network("fixtures/bus13.json").unwrap();
        assert_eq!(bus13.n_buses(), 13);
        assert_eq!(bus13.capacitors.len(), 2);
        assert_eq!(bus13.inverters.len(), 3);
        let ratings: Vec<f64> = bus13.capacitors.iter().map(|c| c.rated_kvar).collect();
        assert_eq!(ratings, vec![100.0, 150.0]);
        for inv in &bus13.inverters {
            assert_eq!(inv.rated_kw, 500.0);
            assert_eq!(inv.rated_kva, 550.0);
        }
    }

    #[test]
    fn rejects_multiple_slack() {
        let text = r#"{
            "base_mva": 1.0,
            "buses": [
                {"id":0,"kind":"slack","base_kv":1.0},
                {"id":1,"kind":"slack","base_kv":1.0}
            ],
            "branches": [{"from":0,"to":1,"r_ohm":0.1,"x_ohm":0.1}],
            "regulator": {"tap_min":-16,"tap_max":16,"step_pu":0.00625}
        }"#;
        let err = from_json_str(text, "inline").unwrap_err();
        assert!(err.to_string().contains("multiple slack buses"));
    }

    #[test]
    fn rejects_disconnected_bus() {
        let text = r#"{
            "base_mva": 1.0,
            "buses": [
                {"id":0,"kind":"slack","base_kv":1.0},
                {"id":1,"kind":"pq","base_kv":1.0},
                {"id":2,"kind":"pq","base_kv":1.0}
            ],
            "branches": [{"from":0,"to":1,"r_ohm":0.1,"x_ohm":0.1}],
            "regulator": {"tap_min":-16,"tap_max":16,"step_pu":0.00625}
        }"#;
        let err = from_json_str(text, "inline").unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }
}
