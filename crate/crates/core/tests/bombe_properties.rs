use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tow_bombe::bombe::{apply_coupling, compute_heights, BombeConfig, BombeState};
use tow_bombe::environment::{BernoulliEnv, CollisionPolicy, Environment, MachineSet};
use tow_bombe::tow::OmegaMode;

fn permute_columns(a: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    // column perm[k] of the result is column k of `a`
    let mut out = Array2::zeros(a.dim());
    for (k, &pk) in perm.iter().enumerate() {
        out.column_mut(pk).assign(&a.column(k));
    }
    out
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    perm
}

fn selections(
    q0: Array2<f64>,
    probs: Vec<f64>,
    steps: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let (players, machines) = q0.dim();
    let cfg = BombeConfig::new(players, machines, OmegaMode::Fixed(0.08));
    let env = BernoulliEnv::new(MachineSet::new(probs).unwrap(), CollisionPolicy::SplitProbability);
    let mut state = BombeState::from_estimates(q0);
    let osc = Array2::zeros((players, machines));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| state.step(&cfg, &env, &osc, &mut rng).unwrap().selections)
        .collect()
}

#[test]
fn relabeling_machines_relabels_selections() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let q0 = Array2::from_shape_fn((3, 5), |_| rng.random_range(-3.0..3.0));
        let probs: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..0.95)).collect();
        let perm = shuffled(5, &mut rng);
        let mut permuted_probs = vec![0.0; 5];
        for (k, &pk) in perm.iter().enumerate() {
            permuted_probs[pk] = probs[k];
        }
        let plain = selections(q0.clone(), probs, 300, seed);
        let relabeled = selections(permute_columns(&q0, &perm), permuted_probs, 300, seed);
        for (a, b) in plain.iter().zip(&relabeled) {
            let mapped: Vec<usize> = a.iter().map(|&k| perm[k]).collect();
            assert_eq!(&mapped, b, "seed {seed}");
        }
    }
}

#[test]
fn classification_ignores_machine_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let probs = vec![0.03, 0.05, 0.1, 0.2, 0.9];
    let env = BernoulliEnv::new(MachineSet::new(probs.clone()).unwrap(), CollisionPolicy::default());
    for _ in 0..50 {
        let perm = shuffled(5, &mut rng);
        let mut permuted = vec![0.0; 5];
        for (k, &pk) in perm.iter().enumerate() {
            permuted[pk] = probs[k];
        }
        let relabeled =
            BernoulliEnv::new(MachineSet::new(permuted).unwrap(), CollisionPolicy::default());
        for _ in 0..20 {
            let pattern: Vec<usize> = (0..3).map(|_| rng.random_range(0..5)).collect();
            let mapped: Vec<usize> = pattern.iter().map(|&k| perm[k]).collect();
            assert_eq!(env.classify(&pattern), relabeled.classify(&mapped));
        }
    }
}

fn matrix(players: usize, machines: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-50.0f64..50.0, players * machines)
        .prop_map(move |v| Array2::from_shape_vec((players, machines), v).unwrap())
}

proptest! {
    #[test]
    fn heights_commute_with_column_permutation(
        q in matrix(3, 5),
        seed in any::<u64>(),
    ) {
        let perm = shuffled(5, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = permute_columns(&compute_heights(&q).unwrap(), &perm);
        let b = compute_heights(&permute_columns(&q, &perm)).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn coupling_commutes_with_player_reordering(
        q in matrix(4, 3),
        dq in matrix(4, 3),
    ) {
        let rev = |a: &Array2<f64>| {
            let mut r = a.clone();
            r.invert_axis(Axis(0));
            r
        };
        let a = rev(&apply_coupling(&q, &dq).unwrap());
        let b = apply_coupling(&rev(&q), &rev(&dq)).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn reachable_states_conserve_both_fluids(seed in any::<u64>(), steps in 1usize..400) {
        let cfg = BombeConfig::new(3, 5, OmegaMode::Adaptive);
        let env = BernoulliEnv::new(MachineSet::canonical(), CollisionPolicy::default());
        let mut state = BombeState::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..steps {
            let osc = Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0));
            state.step(&cfg, &env, &osc, &mut rng).unwrap();
        }
        for s in state.estimates().sum_axis(Axis(0)) {
            prop_assert!(s.abs() <= 1e-9);
        }
        for s in state.heights().unwrap().sum_axis(Axis(1)) {
            prop_assert!(s.abs() <= 1e-9);
        }
    }
}
