use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tow_bombe::environment::{contention, CollisionPolicy, MachineSet};

fn game() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0..n, 1..5),
        )
    })
}

proptest! {
    #[test]
    fn splitting_keeps_the_expected_total((probs, pattern) in game()) {
        let ms = MachineSet::new(probs.clone()).unwrap();
        let payoff = ms.expected_payoff(&pattern).unwrap();
        let c = contention(&pattern, probs.len());
        let occupied: f64 = (0..probs.len()).filter(|&k| c[k] > 0).map(|k| probs[k]).sum();
        prop_assert!((payoff.iter().sum::<f64>() - occupied).abs() <= 1e-12);
    }

    #[test]
    fn split_value_rewards_are_shares_of_one_coin(
        (probs, pattern) in game(),
        seed in any::<u64>(),
    ) {
        let ms = MachineSet::new(probs.clone()).unwrap();
        let c = contention(&pattern, probs.len());
        let r = ms
            .draw_round(&pattern, CollisionPolicy::SplitValue, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        for (&k, &v) in pattern.iter().zip(&r) {
            prop_assert!(v == 0.0 || v == 1.0 / c[k] as f64);
        }
    }
}

#[test]
fn draw_means_converge_to_expected_payoff() {
    let ms = MachineSet::canonical();
    let patterns: [&[usize]; 4] = [&[4, 4, 4], &[4, 3, 2], &[4, 4, 0], &[1, 3, 3]];
    let draws = 20_000;
    for policy in [CollisionPolicy::SplitProbability, CollisionPolicy::SplitValue] {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for pattern in patterns {
            let expected = ms.expected_payoff(pattern).unwrap();
            let mut sums = vec![0.0; pattern.len()];
            for _ in 0..draws {
                for (s, r) in sums.iter_mut().zip(ms.draw_round(pattern, policy, &mut rng).unwrap()) {
                    *s += r;
                }
            }
            let c = contention(pattern, ms.len());
            for (i, &k) in pattern.iter().enumerate() {
                let mean = sums[i] / draws as f64;
                // rewards lie in [0, 1], so the Bernoulli variance bounds theirs
                let p = expected[i];
                let sigma = match policy {
                    CollisionPolicy::SplitProbability => (p * (1.0 - p) / draws as f64).sqrt(),
                    CollisionPolicy::SplitValue => {
                        let pk = ms.probs()[k];
                        (pk * (1.0 - pk) / draws as f64).sqrt() / c[k] as f64
                    }
                };
                assert!(
                    (mean - p).abs() <= 3.0 * sigma + 1e-12,
                    "{policy:?} {pattern:?} player {i}: {mean} vs {p}"
                );
            }
        }
    }
}
