//! Structural invariants checked over generated inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use vvlab::conformal::ResidualWindow;
use vvlab::ddpg::{decode, ActionHead, ReplayBuffer, Transition};
use vvlab::env::ActionContext;
use vvlab::network::{
    build_admittance, Branch, Bus, BusKind, CapacitorBank, Network, Regulator,
};
use vvlab::nn::{Activation, DenseNet, Layer};

#[derive(Debug, Clone)]
struct NetSpec {
    parents: Vec<usize>,
    impedances: Vec<(f64, f64)>,
    shunts: Vec<f64>,
    cap_bus: Option<usize>,
    cap_on: bool,
}

fn net_spec() -> impl Strategy<Value = NetSpec> {
    (2usize..10)
        .prop_flat_map(|n| {
            let parents: Vec<BoxedStrategy<usize>> =
                (1..n).map(|i| (0..i).boxed()).collect();
            (
                parents,
                proptest::collection::vec((0.001f64..0.05, 0.005f64..0.1), n - 1),
                proptest::collection::vec(0.0f64..1e-4, n - 1),
                proptest::option::of(0usize..n),
                any::<bool>(),
            )
        })
        .prop_map(|(parents, impedances, shunts, cap_bus, cap_on)| NetSpec {
            parents,
            impedances,
            shunts,
            cap_bus,
            cap_on,
        })
}

fn build(spec: &NetSpec) -> Network {
    let n = spec.parents.len() + 1;
    let buses = (0..n)
        .map(|i| Bus {
            id: i as u32,
            kind: if i == 0 { BusKind::Slack } else { BusKind::Pq },
            base_kv: 1.0, // ohms equal per-unit on this base
            load_p_kw: 0.0,
            load_q_kvar: 0.0,
        })
        .collect();
    let branches = spec
        .parents
        .iter()
        .enumerate()
        .map(|(k, &parent)| Branch {
            from: parent,
            to: k + 1,
            r_ohm: spec.impedances[k].0,
            x_ohm: spec.impedances[k].1,
            b_s: spec.shunts[k],
        })
        .collect();
    let capacitors = spec
        .cap_bus
        .map(|bus| {
            vec![CapacitorBank {
                bus,
                rated_kvar: 120.0,
            }]
        })
        .unwrap_or_default();
    Network::new(
        1.0,
        buses,
        branches,
        Regulator {
            tap_min: -16,
            tap_max: 16,
            step_pu: 0.00625,
        },
        capacitors,
        vec![],
    )
    .expect("spec generates valid networks")
}

proptest! {
    /// Y is symmetric, every off-diagonal is minus a branch series
    /// admittance, and each diagonal is the negated off-diagonal row sum
    /// plus that bus's shunt terms.
    #[test]
    fn admittance_structure(spec in net_spec()) {
        let net = build(&spec);
        let statuses: Vec<bool> = net.capacitors.iter().map(|_| spec.cap_on).collect();
        let y = build_admittance(&net, &statuses).unwrap();
        let n = net.n_buses();

        for i in 0..n {
            for j in 0..n {
                let diff = (y.get(i, j) - y.get(j, i)).norm();
                prop_assert!(diff == 0.0, "asymmetry at ({i},{j})");
            }
        }
        for br in &net.branches {
            let expected = -net.branch_series_admittance_pu(br);
            prop_assert!((y.get(br.from, br.to) - expected).norm() < 1e-12);
        }
        for i in 0..n {
            let mut offdiag = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    offdiag += y.get(i, j);
                }
            }
            let mut shunt = Complex64::new(0.0, 0.0);
            for br in &net.branches {
                if br.from == i || br.to == i {
                    shunt += Complex64::new(0.0, 0.5 * br.b_s); // z_base is 1 ohm
                }
            }
            for (cap, &on) in net.capacitors.iter().zip(&statuses) {
                if cap.bus == i && on {
                    shunt += Complex64::new(0.0, cap.rated_kvar / 1000.0);
                }
            }
            let expected = -offdiag + shunt;
            // Accumulation order differs between the two routes, so allow
            // reassociation-level rounding.
            let tol = 1e-9 * expected.norm().max(1.0);
            prop_assert!(
                (y.get(i, i) - expected).norm() < tol,
                "diagonal {i}: {} vs {}", y.get(i, i), expected
            );
        }
    }

    /// Regulator ratios stay inside the hardware band across the tap range.
    #[test]
    fn regulator_ratio_band(tap in -16i32..=16) {
        let reg = Regulator { tap_min: -16, tap_max: 16, step_pu: 0.00625 };
        let ratio = reg.ratio(tap);
        // One ulp of slack: 0.00625 is not exactly representable.
        prop_assert!(ratio >= 0.9 - 1e-12 && ratio <= 1.1 + 1e-12);
        if tap == 0 {
            prop_assert!(ratio == 1.0);
        }
    }

    /// Model bytes round-trip exactly through the versioned format.
    #[test]
    fn model_serialization_round_trips(
        dims in proptest::collection::vec(1usize..6, 2..5),
        seed in any::<u64>(),
    ) {
        use rand::SeedableRng;
        let acts: Vec<Activation> = dims
            .windows(2)
            .enumerate()
            .map(|(k, _)| match k % 4 {
                0 => Activation::Relu,
                1 => Activation::Tanh,
                2 => Activation::Sigmoid,
                _ => Activation::Identity,
            })
            .collect();
        let net = DenseNet::init(&dims, &acts, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let back = DenseNet::deserialize(&net.serialize()).unwrap();
        prop_assert_eq!(net, back);
    }

    /// A rebuilt single layer with hand weights also survives the format.
    #[test]
    fn handmade_layer_round_trips(w in proptest::collection::vec(-10.0f64..10.0, 6)) {
        let net = DenseNet::from_layers(vec![Layer {
            in_dim: 3,
            out_dim: 2,
            weights: w.clone(),
            biases: vec![0.25, -0.5],
            activation: Activation::Tanh,
        }]);
        let back = DenseNet::deserialize(&net.serialize()).unwrap();
        prop_assert_eq!(net, back);
    }

    /// Interval half-widths shrink (weakly) as alpha grows, for any window.
    #[test]
    fn quantile_monotone_in_alpha(
        residuals in proptest::collection::vec(0.0f64..100.0, 1..60),
        a in 0.01f64..0.5,
        b in 0.01f64..0.5,
    ) {
        let mut window = ResidualWindow::new(100);
        for r in &residuals {
            window.push(*r);
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(window.quantile(lo).unwrap() >= window.quantile(hi).unwrap());
    }

    /// The FIFO keeps exactly the last `capacity` pushes, in order.
    #[test]
    fn replay_buffer_window(capacity in 1usize..20, extra in 0usize..40) {
        let mut buffer = ReplayBuffer::new(capacity);
        let total = capacity + extra;
        for k in 0..total {
            buffer.push(Transition {
                state: vec![],
                action: vec![],
                reward: k as f64,
                next_state: vec![],
                done: false,
            });
        }
        let kept: Vec<f64> = buffer.iter().map(|t| t.reward).collect();
        let expected: Vec<f64> = (extra..total).map(|k| k as f64).collect();
        prop_assert_eq!(kept, expected);
    }

    /// Decoded actions respect device ranges for any in-range head values.
    #[test]
    fn decode_respects_device_ranges(
        sig in proptest::collection::vec(0.0f64..=1.0, 3),
        tanh in proptest::collection::vec(-1.0f64..=1.0, 2),
    ) {
        let head = ActionHead { n_sigmoid: 3, n_tanh: 2 };
        let ctx = ActionContext {
            tap_min: -16,
            tap_max: 16,
            n_caps: 2,
            q_limits_kvar: vec![120.0, 90.0],
        };
        let mut squashed = sig.clone();
        squashed.extend_from_slice(&tanh);
        let action = decode(&head, &squashed, &ctx);
        prop_assert!(action.tap >= -16 && action.tap <= 16);
        prop_assert_eq!(action.caps.len(), 2);
        prop_assert!(action.q_dg_kvar[0].abs() <= 120.0);
        prop_assert!(action.q_dg_kvar[1].abs() <= 90.0);
    }
}
