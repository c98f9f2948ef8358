use dqn_core::optim::*;
use proptest::prelude::*;

/// Scalar re-derivation of one RMSProp step, written independently of the
/// library's array code.
fn oracle_hinton(w: f64, g: f64, ms: f64, decay: f64, lr: f64, eps: f64) -> (f64, f64) {
    let ms1 = decay * ms + (1.0 - decay) * g.powi(2);
    (w - lr * g / (ms1 + eps).sqrt(), ms1)
}

fn oracle_deepmind(w: f64, g: f64, ms: f64, mom: f64, decay: f64, eta: f64, lr: f64, eps: f64) -> (f64, f64, f64) {
    let mom1 = eta * mom + (1.0 - eta) * g;
    let ms1 = decay * ms + (1.0 - decay) * g.powi(2);
    let denom = (f64::max(ms1 - mom1.powi(2), 0.0) + eps).sqrt();
    (w - lr * g / denom, ms1, mom1)
}

#[test]
fn hinton_worked_example() {
    let cfg = OptimizerConfig { learning_rate: 0.1, ..OptimizerConfig::hinton() };
    let mut opt = Optimizer::<f64>::new(cfg, 1).unwrap();
    let mut w = [1.0];
    opt.step(&mut w, &[2.0]).unwrap();
    let (ew, ems) = oracle_hinton(1.0, 2.0, 0.0, 0.95, 0.1, 0.01);
    assert!((opt.state.mean_square[0] - 0.2).abs() < 1e-12);
    assert!((opt.state.mean_square[0] - ems).abs() < 1e-12);
    assert!((w[0] - ew).abs() < 1e-12);
    assert!((w[0] - 0.5636).abs() < 1e-4);
}

#[test]
fn deepmind_worked_example() {
    let cfg = OptimizerConfig { learning_rate: 0.1, ..OptimizerConfig::deepmind() };
    let mut opt = Optimizer::<f64>::new(cfg, 1).unwrap();
    let mut w = [1.0];
    opt.step(&mut w, &[2.0]).unwrap();
    let (ew, ems, emom) = oracle_deepmind(1.0, 2.0, 0.0, 0.0, 0.95, 0.95, 0.1, 0.01);
    assert!((opt.state.mean_square[0] - ems).abs() < 1e-12);
    assert!((opt.state.momentum[0] - emom).abs() < 1e-12);
    assert!((opt.state.momentum[0] - 0.1).abs() < 1e-12);
    assert!((w[0] - ew).abs() < 1e-12);
    assert!((w[0] - (1.0 - 0.2 / 0.2f64.sqrt())).abs() < 1e-12);
    assert!((w[0] - 0.5528).abs() < 1e-4);
}

#[test]
fn multi_step_matches_oracle() {
    let cfg = OptimizerConfig { learning_rate: 0.01, ..OptimizerConfig::deepmind() };
    let mut opt = Optimizer::<f64>::new(cfg, 1).unwrap();
    let (mut w, mut ow, mut ms, mut mom) = ([0.3], 0.3, 0.0, 0.0);
    for t in 0..200 {
        let g = ((t * 7919) % 13) as f64 - 6.0;
        opt.step(&mut w, &[g]).unwrap();
        (ow, ms, mom) = oracle_deepmind(ow, g, ms, mom, 0.95, 0.95, 0.01, 0.01);
        assert!((w[0] - ow).abs() < 1e-12);
    }
}

#[test]
fn constant_gradient_step_tends_to_learning_rate() {
    let g = 3.0;
    let mut opt = Optimizer::<f64>::new(OptimizerConfig { learning_rate: 0.1, ..OptimizerConfig::hinton() }, 1).unwrap();
    let mut w = [0.0];
    let mut prev = 0.0;
    let mut step = 0.0;
    for _ in 0..2000 {
        opt.step(&mut w, &[g]).unwrap();
        step = prev - w[0];
        prev = w[0];
    }
    let limit = 0.1 * g / (g * g + 0.01f64).sqrt();
    assert!((step - limit).abs() < 1e-9);
    assert!((step - 0.1).abs() < 1e-3);
}

#[test]
fn momentum_variant_with_unit_eta_is_plain_rmsprop() {
    let mut a = Optimizer::<f64>::new(OptimizerConfig { momentum_decay: 1.0, ..OptimizerConfig::deepmind() }, 4).unwrap();
    let mut b = Optimizer::<f64>::new(OptimizerConfig { learning_rate: 0.00025, ..OptimizerConfig::hinton() }, 4).unwrap();
    let (mut wa, mut wb) = ([0.1, -0.2, 0.3, 0.0], [0.1, -0.2, 0.3, 0.0]);
    for t in 0..500 {
        let g: Vec<f64> = (0..4).map(|i| ((t * 31 + i * 17) % 11) as f64 - 5.0).collect();
        a.step(&mut wa, &g).unwrap();
        b.step(&mut wb, &g).unwrap();
        assert_eq!(wa, wb);
    }
}

#[test]
fn sgd_steps_add_on_a_linear_model() {
    // gradient of a linear loss is independent of the parameters
    let cfg = OptimizerConfig::sgd(0.1);
    let (g1, g2) = ([0.5, -1.0], [2.0, 0.25]);
    let mut two = [1.0f64, 1.0];
    step_sgd(&mut two, &g1, &cfg).unwrap();
    step_sgd(&mut two, &g2, &cfg).unwrap();
    let mut one = [1.0, 1.0];
    step_sgd(&mut one, &[g1[0] + g2[0], g1[1] + g2[1]], &cfg).unwrap();
    for (a, b) in two.iter().zip(&one) {
        assert!((a - b).abs() < 1e-15);
    }
}

fn adversarial() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            (-1e6f64..1e6),
            (-1e-12f64..1e-12),
            Just(0.0),
            Just(1e150),
            Just(-1e150),
        ],
        1..200,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mean_square_stays_non_negative_and_params_finite(stream in adversarial(), variant in prop_oneof![Just(Variant::RmspropHinton), Just(Variant::RmspropDeepmind)]) {
        let mut opt = Optimizer::<f64>::new(OptimizerConfig::for_variant(variant), 1).unwrap();
        let mut w = [0.0];
        for (t, &g) in stream.iter().enumerate() {
            let g = if t % 2 == 0 { g } else { -g };
            opt.step(&mut w, &[g]).unwrap();
            prop_assert!(w[0].is_finite());
            prop_assert!(opt.state.mean_square[0] >= 0.0);
        }
    }

    #[test]
    fn clip_is_identity_inside_and_bounded(e in -1e9f64..1e9) {
        let c = clip_error(e).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        if e.abs() <= 1.0 {
            prop_assert_eq!(c, e);
        }
    }
}
