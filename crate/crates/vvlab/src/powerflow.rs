//! Newton-Raphson power flow on the nodal admittance matrix, plus branch
//! loss accounting and voltage-limit checks.
//!
//! Bus index 0 is the slack, pinned at the commanded reference voltage with
//! angle zero; every other bus is PQ. Networks here are small enough that a
//! dense Jacobian and LU factorization are the right tool.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::{AdmittanceMatrix, Network};

/// Convergence threshold on the infinity norm of the power mismatch, p.u.
pub const MISMATCH_TOL: f64 = 1e-8;
/// Newton iteration cap. Desk-scale feeders converge in well under ten
/// iterations or not at all.
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("power flow solution did not converge (max mismatch {0} p.u.)")]
    NotConverged(f64),
}

/// Net scheduled power injection per bus (generation minus load), per-unit.
/// Slack entries are ignored; the slack balances the system.
#[derive(Debug, Clone)]
pub struct InjectionVector {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl InjectionVector {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        assert_eq!(p.len(), q.len());
        InjectionVector { p, q }
    }

    pub fn zeros(n: usize) -> Self {
        InjectionVector {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, p.u.
    pub v: Vec<f64>,
    /// Voltage angle per bus, radians.
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LossReport {
    pub p_loss_mw: f64,
    pub q_loss_mvar: f64,
}

/// Computed complex power injections at every bus for a voltage profile:
/// `p_i = v_i * sum_j v_j (G_ij cos t_ij + B_ij sin t_ij)` and the reactive
/// counterpart.
pub fn bus_injections(y: &AdmittanceMatrix, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.n();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut pi = 0.0;
        let mut qi = 0.0;
        for j in 0..n {
            let g = y.g(i, j);
            let b = y.b(i, j);
            if g == 0.0 && b == 0.0 {
                continue;
            }
            let t = theta[i] - theta[j];
            let (sin_t, cos_t) = t.sin_cos();
            pi += v[j] * (g * cos_t + b * sin_t);
            qi += v[j] * (g * sin_t - b * cos_t);
        }
        p[i] = v[i] * pi;
        q[i] = v[i] * qi;
    }
    (p, q)
}

/// Solves the power-flow equations. Non-convergence is reported in the
/// result, not as an error; callers decide what a failed solve is worth.
pub fn solve(y: &AdmittanceMatrix, inj: &InjectionVector, v_ref: f64) -> PowerFlowSolution {
    let n = y.n();
    assert_eq!(inj.p.len(), n, "injection length must match bus count");
    assert!(
        (0.8..=1.2).contains(&v_ref),
        "reference voltage {v_ref} outside [0.8, 1.2] p.u."
    );

    // Flat start; slack pinned at v_ref angle 0.
    let mut v = vec![1.0; n];
    let mut theta = vec![0.0; n];
    v[0] = v_ref;

    if n == 1 {
        return PowerFlowSolution {
            v,
            theta,
            iterations: 1,
            max_mismatch: 0.0,
            converged: true,
        };
    }

    let m = n - 1; // PQ bus count
    let mut max_mismatch = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let (p_calc, q_calc) = bus_injections(y, &v, &theta);
        let mut rhs = DVector::zeros(2 * m);
        for k in 0..m {
            rhs[k] = inj.p[k + 1] - p_calc[k + 1];
            rhs[m + k] = inj.q[k + 1] - q_calc[k + 1];
        }
        max_mismatch = rhs.amax();
        if max_mismatch <= MISMATCH_TOL {
            return PowerFlowSolution {
                v,
                theta,
                iterations: iteration,
                max_mismatch,
                converged: true,
            };
        }

        let jac = jacobian(y, &v, &theta, &p_calc, &q_calc);
        let step = match jac.lu().solve(&rhs) {
            Some(s) => s,
            None => break, // singular Jacobian: voltage collapse territory
        };
        for k in 0..m {
            theta[k + 1] += step[k];
            v[k + 1] += step[m + k];
        }
        if v.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            break;
        }
    }

    PowerFlowSolution {
        v,
        theta,
        iterations: MAX_ITERATIONS,
        max_mismatch,
        converged: false,
    }
}

/// Analytic Newton Jacobian in the ordering
/// `[dP/dtheta dP/dV; dQ/dtheta dQ/dV]` over PQ buses 1..n.
fn jacobian(
    y: &AdmittanceMatrix,
    v: &[f64],
    theta: &[f64],
    p_calc: &[f64],
    q_calc: &[f64],
) -> DMatrix<f64> {
    let n = y.n();
    let m = n - 1;
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for a in 0..m {
        let i = a + 1;
        for bcol in 0..m {
            let j = bcol + 1;
            let g = y.g(i, j);
            let b = y.b(i, j);
            if i == j {
                jac[(a, bcol)] = -q_calc[i] - b * v[i] * v[i];
                jac[(a, m + bcol)] = p_calc[i] / v[i] + g * v[i];
                jac[(m + a, bcol)] = p_calc[i] - g * v[i] * v[i];
                jac[(m + a, m + bcol)] = q_calc[i] / v[i] - b * v[i];
            } else {
                let t = theta[i] - theta[j];
                let (sin_t, cos_t) = t.sin_cos();
                let cross = v[i] * v[j] * (g * sin_t - b * cos_t);
                let along = v[i] * (g * cos_t + b * sin_t);
                jac[(a, bcol)] = cross;
                jac[(a, m + bcol)] = along;
                jac[(m + a, bcol)] = -v[i] * v[j] * (g * cos_t + b * sin_t);
                jac[(m + a, m + bcol)] = v[i] * (g * sin_t - b * cos_t);
            }
        }
    }
    jac
}

/// Branch-sum network losses of a converged solution, in MW and Mvar.
///
/// Each branch contributes `g (v_i^2 + v_j^2 - 2 v_i v_j cos t_ij)` active
/// and `-b (...)` reactive, where g + jb is its series admittance in
/// per-unit. Line-charging and capacitor shunts generate reactive power and
/// are deliberately outside this sum.
pub fn compute_losses(
    net: &Network,
    sol: &PowerFlowSolution,
) -> Result<LossReport, PowerFlowError> {
    if !sol.converged {
        return Err(PowerFlowError::NotConverged(sol.max_mismatch));
    }
    let mut p_loss = 0.0;
    let mut q_loss = 0.0;
    for br in &net.branches {
        let ys = net.branch_series_admittance_pu(br);
        let (vi, vj) = (sol.v[br.from], sol.v[br.to]);
        let t = sol.theta[br.from] - sol.theta[br.to];
        let span = vi * vi + vj * vj - 2.0 * vi * vj * t.cos();
        p_loss += ys.re * span;
        q_loss += -ys.im * span;
    }
    Ok(LossReport {
        p_loss_mw: p_loss * net.base_mva,
        q_loss_mvar: q_loss * net.base_mva,
    })
}

/// Number of buses strictly outside the band `(v_lo, v_hi)`.
pub fn count_violations(sol: &PowerFlowSolution, v_lo: f64, v_hi: f64) -> usize {
    assert!(v_lo < v_hi);
    sol.v.iter().filter(|&&v| v > v_hi || v < v_lo).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_admittance, Branch, Bus, BusKind, Network, Regulator};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain_net(impedances: &[(f64, f64)]) -> Network {
        let n = impedances.len() + 1;
        let buses = (0..n)
            .map(|i| Bus {
                id: i as u32,
                kind: if i == 0 { BusKind::Slack } else { BusKind::Pq },
                base_kv: 1.0,
                load_p_kw: 0.0,
                load_q_kvar: 0.0,
            })
            .collect();
        let branches = impedances
            .iter()
            .enumerate()
            .map(|(i, &(r, x))| Branch {
                from: i,
                to: i + 1,
                r_ohm: r,
                x_ohm: x,
                b_s: 0.0,
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
        .unwrap()
    }

    #[test]
    fn zero_injection_flat_profile_in_one_iteration() {
        let net = chain_net(&[(0.01, 0.05), (0.02, 0.04)]);
        let y = build_admittance(&net, &[]).unwrap();
        let sol = solve(&y, &InjectionVector::zeros(3), 1.0);
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        for i in 0..3 {
            assert_relative_eq!(sol.v[i], 1.0, max_relative = 1e-14);
            assert_relative_eq!(sol.theta[i], 0.0);
        }
        let losses = compute_losses(&net, &sol).unwrap();
        assert!(losses.p_loss_mw.abs() < 1e-12);
        assert!(losses.q_loss_mvar.abs() < 1e-12);
    }

    #[test]
    fn two_bus_case_matches_gauss_seidel() {
        // Slack-load pair, x = 0.1 p.u., load p = 0.1 p.u.
        let net = chain_net(&[(0.0, 0.1)]);
        let y = build_admittance(&net, &[]).unwrap();
        let mut inj = InjectionVector::zeros(2);
        inj.p[1] = -0.1;
        let sol = solve(&y, &inj, 1.0);
        assert!(sol.converged);

        // Independent fixed-point iteration on the same case:
        // v1 = (1/Y11) * ((p - jq)/conj(v1) - Y10 * v0)
        use num_complex::Complex64;
        let y11 = y.get(1, 1);
        let y10 = y.get(1, 0);
        let v0 = Complex64::new(1.0, 0.0);
        let s1 = Complex64::new(-0.1, 0.0);
        let mut v1 = Complex64::new(1.0, 0.0);
        for _ in 0..10_000 {
            let next = (s1.conj() / v1.conj() - y10 * v0) / y11;
            if (next - v1).norm() < 1e-14 {
                v1 = next;
                break;
            }
            v1 = next;
        }
        assert_relative_eq!(sol.v[1], v1.norm(), epsilon = 1e-8);
        assert_relative_eq!(sol.theta[1], v1.arg(), epsilon = 1e-8);

        // Loss from the branch sum equals slack injection minus load.
        let losses = compute_losses(&net, &sol).unwrap();
        let (p_calc, _) = bus_injections(&y, &sol.v, &sol.theta);
        let slack_p = p_calc[0];
        assert_relative_eq!(losses.p_loss_mw, slack_p + inj.p[1], epsilon = 1e-8);
    }

    #[test]
    fn hopeless_load_reports_non_convergence() {
        let net = chain_net(&[(0.0, 0.1)]);
        let y = build_admittance(&net, &[]).unwrap();
        let mut inj = InjectionVector::zeros(2);
        inj.p[1] = -10.0; // 100x the feasible-ish case above
        let sol = solve(&y, &inj, 1.0);
        assert!(!sol.converged);
        assert!(compute_losses(&net, &sol).is_err());
    }

    #[test]
    fn lossless_network_has_zero_active_loss() {
        let net = chain_net(&[(0.0, 0.08), (0.0, 0.12)]);
        let y = build_admittance(&net, &[]).unwrap();
        let mut inj = InjectionVector::zeros(3);
        inj.p[1] = -0.2;
        inj.q[2] = -0.1;
        let sol = solve(&y, &inj, 1.0);
        assert!(sol.converged);
        let losses = compute_losses(&net, &sol).unwrap();
        assert!(losses.p_loss_mw.abs() < 1e-10);
        assert!(losses.q_loss_mvar > 0.0);
    }

    #[test]
    fn violation_counting_is_strict() {
        let flat = PowerFlowSolution {
            v: vec![1.0, 1.0, 1.0],
            theta: vec![0.0; 3],
            iterations: 1,
            max_mismatch: 0.0,
            converged: true,
        };
        assert_eq!(count_violations(&flat, 0.95, 1.05), 0);

        let mixed = PowerFlowSolution {
            v: vec![1.0, 0.94, 1.06],
            theta: vec![0.0; 3],
            iterations: 1,
            max_mismatch: 0.0,
            converged: true,
        };
        assert_eq!(count_violations(&mixed, 0.95, 1.05), 2);

        let boundary = PowerFlowSolution {
            v: vec![1.0, 1.05, 0.95],
            theta: vec![0.0; 3],
            iterations: 1,
            max_mismatch: 0.0,
            converged: true,
        };
        assert_eq!(count_violations(&boundary, 0.95, 1.05), 0);
    }

    #[test]
    fn jacobian_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n_branches = rng.gen_range(1..=5);
            let imp: Vec<(f64, f64)> = (0..n_branches)
                .map(|_| (rng.gen_range(0.005..0.05), rng.gen_range(0.01..0.1)))
                .collect();
            let net = chain_net(&imp);
            let y = build_admittance(&net, &[]).unwrap();
            let n = net.n_buses();
            let m = n - 1;

            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.95..1.05)).collect();
            let mut theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect();
            v[0] = 1.0;
            theta[0] = 0.0;

            let (p_calc, q_calc) = bus_injections(&y, &v, &theta);
            let jac = jacobian(&y, &v, &theta, &p_calc, &q_calc);

            let h = 1e-6;
            let eval = |v: &[f64], theta: &[f64]| -> Vec<f64> {
                let (p, q) = bus_injections(&y, v, theta);
                let mut f = Vec::with_capacity(2 * m);
                f.extend_from_slice(&p[1..]);
                f.extend_from_slice(&q[1..]);
                f
            };
            for col in 0..2 * m {
                let mut vp = v.clone();
                let mut vm = v.clone();
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                if col < m {
                    tp[col + 1] += h;
                    tm[col + 1] -= h;
                } else {
                    vp[col - m + 1] += h;
                    vm[col - m + 1] -= h;
                }
                let fp = eval(&vp, &tp);
                let fm = eval(&vm, &tm);
                for row in 0..2 * m {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let analytic = jac[(row, col)];
                    let denom = analytic.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        ((analytic - fd) / denom).abs() < 1e-5,
                        "J[{row},{col}] analytic {analytic} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn raising_tap_raises_every_voltage() {
        let net = chain_net(&[(0.02, 0.05), (0.02, 0.05), (0.02, 0.05)]);
        let y = build_admittance(&net, &[]).unwrap();
        let mut inj = InjectionVector::zeros(4);
        for k in 1..4 {
            inj.p[k] = -0.15;
            inj.q[k] = -0.05;
        }
        let mut prev: Option<Vec<f64>> = None;
        for tap in [-4, -2, 0, 2, 4] {
            let v_ref = net.regulator.ratio(tap);
            let sol = solve(&y, &inj, v_ref);
            assert!(sol.converged);
            if let Some(prev_v) = prev {
                for (a, b) in prev_v.iter().zip(&sol.v) {
                    assert!(b >= a, "tap increase lowered a bus voltage");
                }
            }
            prev = Some(sol.v);
        }
    }
}
