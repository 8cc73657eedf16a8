use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use qmarl::pshift::{self, ActorSample, ReadoutSelector, ShiftRule};
use qmarl::vqc::{self, EPS_FLOOR};
use qmarl::{CircuitTemplate, ParamVector, ReadoutMode};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(r: &mut ChaCha8Rng, t: &CircuitTemplate) -> ParamVector {
    ParamVector::new((0..t.param_slots()).map(|_| r.random_range(-3.2..3.2)).collect()).unwrap()
}

fn random_selector(r: &mut ChaCha8Rng, n: usize) -> ReadoutSelector {
    if r.random_bool(0.5) {
        ReadoutSelector::ExpectationZ(r.random_range(0..n))
    } else {
        let k = r.random_range(1..=n);
        ReadoutSelector::Probability {
            wires: sample(r, n, k).into_vec(),
            pattern: r.random_range(0..1 << k),
        }
    }
}

#[test]
fn shift_rule_matches_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..=4);
        let t = CircuitTemplate::new(n, r.random_range(1..=3)).unwrap();
        let p = random_params(&mut r, &t);
        let obs: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let sel = random_selector(&mut r, n);
        let shift = pshift::shift_gradient(&t, &p, &obs, &sel).unwrap();
        let fd = pshift::finite_difference_oracle(&t, &p, &obs, &sel, 1e-4).unwrap();
        worst = worst.max(shift.max_abs_diff(&fd));
    }
    assert!(worst <= 1e-5, "max deviation {worst:e}");
}

#[test]
fn three_qubit_eighteen_parameter_example() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let t = CircuitTemplate::new(3, 2).unwrap();
    assert_eq!(t.param_slots(), 18);
    let p = random_params(&mut r, &t);
    let sel = ReadoutSelector::ExpectationZ(2);
    let shift = pshift::shift_gradient(&t, &p, &[0.4, -1.0], &sel).unwrap();
    let fd = pshift::finite_difference_oracle(&t, &p, &[0.4, -1.0], &sel, 1e-4).unwrap();
    assert!(shift.max_abs_diff(&fd) <= 1e-5);
}

#[test]
fn evaluation_count_is_twice_the_parameter_count() {
    for (n, layers) in [(1, 1), (2, 3), (4, 3), (6, 2)] {
        let t = CircuitTemplate::new(n, layers).unwrap();
        let p = ParamVector::zeros(t.param_slots());
        for sel in [
            ReadoutSelector::ExpectationZ(n - 1),
            ReadoutSelector::Probability {
                wires: (0..n).collect(),
                pattern: 0,
            },
        ] {
            let counter = AtomicUsize::new(0);
            pshift::shift_gradient_with(&t, &p, &[0.5], &sel, ShiftRule::default(), Some(&counter)).unwrap();
            assert_eq!(counter.load(Ordering::Relaxed), 2 * t.param_slots());
        }
    }
}

#[test]
fn invalid_selectors_are_configuration_errors() {
    let t = CircuitTemplate::new(2, 1).unwrap();
    let p = ParamVector::zeros(6);
    for sel in [
        ReadoutSelector::ExpectationZ(2),
        ReadoutSelector::Probability {
            wires: vec![0, 0],
            pattern: 0,
        },
        ReadoutSelector::Probability {
            wires: vec![1],
            pattern: 2,
        },
    ] {
        assert!(matches!(pshift::shift_gradient(&t, &p, &[], &sel), Err(qmarl::Error::Config(_))));
    }
}

/// The actor loss written directly from `actor_forward`.
fn actor_loss(batch: &[ActorSample], t: &CircuitTemplate, p: &ParamVector, readout: &ReadoutMode, a: usize) -> f64 {
    -batch
        .iter()
        .map(|s| vqc::actor_forward(t, p, &s.obs, readout, a).unwrap().log_prob(s.action) * s.advantage)
        .sum::<f64>()
        / batch.len() as f64
}

fn critic_loss(batch: &[(Vec<f64>, f64)], t: &CircuitTemplate, p: &ParamVector, v_scale: f64) -> f64 {
    batch
        .iter()
        .map(|(s, y)| (vqc::critic_forward(t, p, s, v_scale).unwrap() - y).powi(2))
        .sum::<f64>()
        / batch.len() as f64
}

const H: f64 = 1e-5;

#[test]
fn actor_loss_gradient_matches_end_to_end_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for trial in 0..12 {
        let (t, readout, a) = if trial % 2 == 0 {
            let t = CircuitTemplate::new(3, 2).unwrap();
            (t, ReadoutMode::ExpectationSoftmax { beta: r.random_range(0.5..4.0) }, 3)
        } else {
            let t = CircuitTemplate::new(3, 2).unwrap();
            (t, ReadoutMode::Pvm { wires: vec![2, 0] }, 4)
        };
        let p = random_params(&mut r, &t);
        let batch: Vec<ActorSample> = (0..r.random_range(1..6))
            .map(|_| ActorSample {
                // Repeat observations sometimes so grouping is exercised.
                obs: vec![f64::from(r.random_range(0..2)), 0.3],
                action: r.random_range(0..a),
                advantage: r.random_range(-2.0..2.0),
            })
            .collect();
        let out = pshift::actor_loss_gradient(&batch, &t, &p, &readout, a).unwrap();
        assert!((out.loss - actor_loss(&batch, &t, &p, &readout, a)).abs() < 1e-12);
        for j in 0..p.len() {
            let fd = (actor_loss(&batch, &t, &p.shifted(j, H), &readout, a)
                - actor_loss(&batch, &t, &p.shifted(j, -H), &readout, a))
                / (2.0 * H);
            worst = worst.max((fd - out.grad.values()[j]).abs());
        }
        if let ReadoutMode::ExpectationSoftmax { beta } = readout {
            let at = |b: f64| actor_loss(&batch, &t, &p, &ReadoutMode::ExpectationSoftmax { beta: b }, a);
            let fd = (at(beta + H) - at(beta - H)) / (2.0 * H);
            worst = worst.max((fd - out.beta_grad).abs());
        } else {
            assert_eq!(out.beta_grad, 0.0);
        }
    }
    assert!(worst <= 1e-4, "max deviation {worst:e}");
}

#[test]
fn critic_loss_gradient_matches_end_to_end_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let t = CircuitTemplate::new(2, 2).unwrap();
        let p = random_params(&mut r, &t);
        let v_scale = r.random_range(1.0..20.0);
        let batch: Vec<(Vec<f64>, f64)> = (0..r.random_range(1..6))
            .map(|_| {
                let s = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
                (s, r.random_range(-10.0..10.0))
            })
            .collect();
        let out = pshift::critic_loss_gradient(&batch, &t, &p, v_scale).unwrap();
        assert!((out.loss - critic_loss(&batch, &t, &p, v_scale)).abs() < 1e-9);
        for j in 0..p.len() {
            let fd = (critic_loss(&batch, &t, &p.shifted(j, H), v_scale)
                - critic_loss(&batch, &t, &p.shifted(j, -H), v_scale))
                / (2.0 * H);
            worst = worst.max((fd - out.grad.values()[j]).abs() / fd.abs().max(1.0));
        }
        let fd = (critic_loss(&batch, &t, &p, v_scale + H) - critic_loss(&batch, &t, &p, v_scale - H)) / (2.0 * H);
        worst = worst.max((fd - out.scale_grad).abs() / fd.abs().max(1.0));
    }
    assert!(worst <= 1e-4, "max deviation {worst:e}");
}

#[test]
fn loss_examples() {
    let t = CircuitTemplate::new(2, 1).unwrap();
    let p = ParamVector::new(vec![0.3; 6]).unwrap();
    let soft = ReadoutMode::ExpectationSoftmax { beta: 0.0 };
    let zero = vec![ActorSample {
        obs: vec![0.2],
        action: 1,
        advantage: 0.0,
    }];
    let out = pshift::actor_loss_gradient(&zero, &t, &p, &soft, 2).unwrap();
    assert_eq!(out.loss, 0.0);
    assert!(out.grad.values().iter().all(|g| *g == 0.0));

    let one = vec![ActorSample {
        advantage: 1.0,
        ..zero[0].clone()
    }];
    let out = pshift::actor_loss_gradient(&one, &t, &p, &soft, 2).unwrap();
    assert!((out.loss - 2f64.ln()).abs() < 1e-12);

    assert!(matches!(
        pshift::actor_loss_gradient(&[], &t, &p, &soft, 2),
        Err(qmarl::Error::Batch(_))
    ));
    let nan = vec![ActorSample {
        advantage: f64::NAN,
        ..zero[0].clone()
    }];
    assert!(matches!(
        pshift::actor_loss_gradient(&nan, &t, &p, &soft, 2),
        Err(qmarl::Error::Data(_))
    ));

    let v = vqc::critic_forward(&t, &p, &[0.1, 0.2], 20.0).unwrap();
    let exact = pshift::critic_loss_gradient(&[(vec![0.1, 0.2], v)], &t, &p, 20.0).unwrap();
    assert!(exact.loss < 1e-24);
    assert!(exact.grad.values().iter().all(|g| g.abs() < 1e-10));
    let off = pshift::critic_loss_gradient(&[(vec![0.1, 0.2], v + 1.0)], &t, &p, 20.0).unwrap();
    assert!((off.loss - 1.0).abs() < 1e-12);
}

#[test]
fn optimizer_examples() {
    let p = ParamVector::new(vec![0.5, -0.5, 1.0]).unwrap();
    let state = qmarl::OptimizerState::new(0.01, 3);
    let (same, s1) = pshift::optimizer_step(&p, &qmarl::GradientVector::zeros(3), &state).unwrap();
    assert_eq!(same, p);
    assert_eq!(s1.step_count(), 1);

    let g = qmarl::GradientVector::new(vec![2.0, -0.001, 0.0]).unwrap();
    let (p1, s1) = pshift::optimizer_step(&p, &g, &state).unwrap();
    let d1: Vec<f64> = p1.values().iter().zip(p.values()).map(|(a, b)| a - b).collect();
    assert!((d1[0] + 0.01).abs() < 1e-9);
    assert!((d1[1] - 0.01).abs() < 1e-6);
    assert_eq!(d1[2], 0.0);
    let (p2, _) = pshift::optimizer_step(&p1, &g, &s1).unwrap();
    for i in 0..3 {
        assert!((p2.values()[i] - p1.values()[i]).abs() <= d1[i].abs() + 1e-15);
    }
    assert!(pshift::optimizer_step(&p, &qmarl::GradientVector::zeros(2), &state).is_err());
}

#[test]
fn floor_bound_in_loss_denominator() {
    // A PVM policy with near-certain outcome still has finite log-probabilities.
    let t = CircuitTemplate::new(2, 1).unwrap();
    let p = ParamVector::zeros(6);
    let d = vqc::actor_forward(&t, &p, &[], &ReadoutMode::pvm(2), 4).unwrap();
    let min = EPS_FLOOR / (1.0 + 4.0 * EPS_FLOOR);
    assert!((d.prob(3) - min).abs() < 1e-18);
    assert!(d.log_prob(3).is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shift_rule_is_exact_for_any_angles(seed in any::<u64>(), n in 1usize..=3, layers in 1usize..=2) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let t = CircuitTemplate::new(n, layers).unwrap();
        let p = random_params(&mut r, &t);
        let obs: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let sel = random_selector(&mut r, n);
        let shift = pshift::shift_gradient(&t, &p, &obs, &sel).unwrap();
        let fd = pshift::finite_difference_oracle(&t, &p, &obs, &sel, 1e-4).unwrap();
        prop_assert!(shift.max_abs_diff(&fd) <= 1e-5);
    }

    #[test]
    fn optimizer_is_deterministic(values in proptest::collection::vec(-3.0f64..3.0, 1..8), seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = values.iter().map(|_| r.random_range(-1.0..1.0)).collect();
        let p = ParamVector::new(values.clone()).unwrap();
        let g = qmarl::GradientVector::new(g).unwrap();
        let s = qmarl::OptimizerState::new(0.01, values.len());
        prop_assert_eq!(pshift::optimizer_step(&p, &g, &s).unwrap(), pshift::optimizer_step(&p, &g, &s).unwrap());
    }
}
