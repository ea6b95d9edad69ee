//! Shared helpers for the integration suites: an independent fixed-point
//! power-flow oracle and a random radial network generator.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

use vvlab::network::{AdmittanceMatrix, Branch, Bus, BusKind, Network, Regulator};
use vvlab::powerflow::InjectionVector;

/// Gauss-Seidel fixed-point iteration on complex bus voltages, independent
/// of the Newton path: `v_i <- (conj(S_i / v_i) - sum_{j != i} Y_ij v_j) / Y_ii`
/// with the slack pinned at `v_ref` angle zero. Returns magnitudes and
/// angles, or None if the sweep fails to settle.
pub fn gauss_seidel(
    y: &AdmittanceMatrix,
    inj: &InjectionVector,
    v_ref: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = y.n();
    let mut v: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); n];
    v[0] = Complex64::new(v_ref, 0.0);
    for _ in 0..200_000 {
        let mut delta = 0.0f64;
        for i in 1..n {
            let yii = y.get(i, i);
            if yii.norm() == 0.0 {
                return None;
            }
            let s = Complex64::new(inj.p[i], inj.q[i]);
            let mut sum = Complex64::new(0.0, 0.0);
            for (j, vj) in v.iter().enumerate() {
                if j != i {
                    sum += y.get(i, j) * vj;
                }
            }
            let next = ((s / v[i]).conj() - sum) / yii;
            delta = delta.max((next - v[i]).norm());
            v[i] = next;
        }
        if !v.iter().all(|x| x.norm().is_finite()) {
            return None;
        }
        if delta < 1e-13 {
            let mags = v.iter().map(|x| x.norm()).collect();
            let angs = v.iter().map(|x| x.arg()).collect();
            return Some((mags, angs));
        }
    }
    None
}

/// Random radial (tree) network on a 1 MVA / 12.47 kV base with moderate
/// impedances, no shunts, and no devices beyond the regulator.
pub fn random_radial_network<R: Rng>(rng: &mut R, max_buses: usize) -> Network {
    let n = rng.gen_range(2..=max_buses);
    let buses = (0..n)
        .map(|i| Bus {
            id: i as u32,
            kind: if i == 0 { BusKind::Slack } else { BusKind::Pq },
            base_kv: 12.47,
            load_p_kw: 0.0,
            load_q_kvar: 0.0,
        })
        .collect();
    let z_base = 12.47f64 * 12.47;
    let branches = (1..n)
        .map(|i| {
            let parent = rng.gen_range(0..i);
            Branch {
                from: parent,
                to: i,
                r_ohm: rng.gen_range(0.002..0.02) * z_base,
                x_ohm: rng.gen_range(0.004..0.04) * z_base,
                b_s: 0.0,
            }
        })
        .collect();
    Network::new(
        1.0,
        buses,
        branches,
        Regulator {
            tap_min: -16,
            tap_max: 16,
            step_pu: 0.00625,
        },
        vec![],
        vec![],
    )
    .expect("generated network is valid")
}

/// Mild random PQ injections that keep the case well inside the feasible
/// region.
pub fn random_injections<R: Rng>(rng: &mut R, n: usize) -> InjectionVector {
    let mut inj = InjectionVector::zeros(n);
    for i in 1..n {
        inj.p[i] = -rng.gen_range(0.0..0.08);
        inj.q[i] = -rng.gen_range(0.0..0.03);
    }
    inj
}
