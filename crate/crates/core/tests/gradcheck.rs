use dqn_core::neural::gradcheck::{analytic_gradient, min_relu_margin, numeric_gradient, relative_error};
use dqn_core::neural::{InitScheme, QNetwork, Topology};
use dqn_core::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

/// Max per-coordinate relative error for one random instance. Instances with
/// a ReLU input within 1e-3 of zero are redrawn.
fn max_error(topology: &Topology, batch: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    for attempt in 0..500u64 {
        let mut net = QNetwork::<f64>::with_init(topology.clone(), InitScheme::FanInUniform, seed ^ (attempt << 32)).unwrap();
        for p in net.params_mut() {
            if *p == 0.0 {
                *p = rng.random_range(-0.1..0.1);
            }
        }
        let input: Vec<f64> = (0..batch * net.input_len()).map(|_| rng.random_range(0.0..1.0)).collect();
        if min_relu_margin(&net, &input, batch).unwrap() < 1e-3 {
            continue;
        }
        let out_grad: Vec<f64> = (0..batch * net.num_actions()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = analytic_gradient(&net, &input, batch, &out_grad).unwrap();
        let n = numeric_gradient(&mut net, &input, batch, &out_grad, STEP).unwrap();
        return a.iter().zip(&n).map(|(&a, &n)| relative_error(a, n, FLOOR)).fold(0.0, f64::max);
    }
    panic!("no instance away from ReLU kinks for {topology}");
}

const TOPOLOGIES: &[&str] = &[
    "in=2x7x7;conv3k3s2",
    "in=1x1x6;dense4",
    "in=1x1x6;dense4nb",
    "in=1x1x5;dense5;relu",
    "in=2x6x6;conv3k2s1;relu;dense3",
    "in=1x1x6;dense4;relu;dense2",
    "in=2x8x8;conv2k3s1;relu;conv3k2s2",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_gradient_matches_central_differences(which in 0..TOPOLOGIES.len(), batch in 1usize..4, seed in any::<u64>()) {
        let topo = Topology::parse(TOPOLOGIES[which]).unwrap();
        let err = max_error(&topo, batch, seed);
        prop_assert!(err < 1e-4, "{}: max relative error {err:e}", TOPOLOGIES[which]);
    }
}

#[test]
fn toy_topology_matches_central_differences() {
    let topo = Topology::toy(2, 12, 12, 3);
    let err = max_error(&topo, 2, 11);
    assert!(err < 1e-4, "max relative error {err:e}");
}
