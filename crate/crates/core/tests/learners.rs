use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tow_bombe::baselines::{selfish_cbp_run, BaselineKind, BaselineStrategy};
use tow_bombe::environment::{BernoulliEnv, CollisionPolicy, MachineSet};
use tow_bombe::harness::rng_stream;
use tow_bombe::metrics::OutcomeClass;
use tow_bombe::tow::{gamma_star, omega0, solvability_check, GeneralTowState, OmegaMode, TowState};

fn bernoulli(p: f64, rng: &mut ChaCha8Rng) -> bool {
    rng.random::<f64>() < p
}

#[test]
fn ucb1_tuned_identifies_the_better_machine() {
    let probs = [0.9, 0.2];
    let correct: usize = (0..1000u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng_stream(3, run);
            let mut s = BaselineStrategy::new(BaselineKind::Ucb1Tuned, 2).unwrap();
            for t in 1..=1000 {
                let k = s.select(t, &mut rng).unwrap();
                let r = f64::from(u8::from(bernoulli(probs[k], &mut rng)));
                s.observe(k, r).unwrap();
            }
            usize::from(s.best() == 0)
        })
        .sum();
    assert!(correct as f64 / 1000.0 > 0.95, "{correct}/1000");
}

fn tow_accuracy(horizon: u64, runs: u64) -> f64 {
    let (pa, pb) = (0.6, 0.4);
    let w = omega0(pa + pb).unwrap();
    let correct: u64 = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng_stream(11, run);
            let mut s = TowState::new(2, OmegaMode::Fixed(w)).unwrap();
            for _ in 0..horizon {
                let k = s.select(0.0, &mut rng).unwrap();
                let hit = bernoulli([pa, pb][k], &mut rng);
                s.update(k, hit).unwrap();
            }
            u64::from(s.estimates()[0] > s.estimates()[1])
        })
        .sum();
    correct as f64 / runs as f64
}

#[test]
fn tow_accuracy_grows_with_horizon() {
    let w = omega0(1.0).unwrap();
    assert!(solvability_check(1.0, w, 0.6, 0.4));
    let short = tow_accuracy(100, 2000);
    let long = tow_accuracy(1000, 2000);
    assert!(long > short, "{short} -> {long}");
}

#[test]
fn general_tow_selects_like_bernoulli_tow() {
    let (pa, pb) = (0.7, 0.35);
    for seed in 0..10u64 {
        let mut tape_rng = ChaCha8Rng::seed_from_u64(seed);
        let tape: Vec<[bool; 2]> = (0..5000)
            .map(|_| [bernoulli(pa, &mut tape_rng), bernoulli(pb, &mut tape_rng)])
            .collect();
        let mut tow = TowState::new(2, OmegaMode::Fixed(omega0(pa + pb).unwrap())).unwrap();
        let mut general = GeneralTowState::new(2, gamma_star(pa, pb), 1.0).unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
        let mut rng_b = ChaCha8Rng::seed_from_u64(seed);
        for hits in &tape {
            let a = tow.select(0.0, &mut rng_a).unwrap();
            let b = general.select(0.0, &mut rng_b).unwrap();
            assert_eq!(a, b);
            tow.update(a, hits[a]).unwrap();
            general.update(b, f64::from(u8::from(hits[b]))).unwrap();
        }
    }
}

fn greedy_outcomes(kind: BaselineKind, samples: u64) -> (usize, usize) {
    let env = BernoulliEnv::new(MachineSet::canonical(), CollisionPolicy::default());
    let outcomes: Vec<OutcomeClass> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut players: Vec<BaselineStrategy> =
                (0..3).map(|_| BaselineStrategy::new(kind, 5).unwrap()).collect();
            selfish_cbp_run(&mut players, &env, 1000, 100, &mut rng_stream(21, s))
                .unwrap()
                .outcome
        })
        .collect();
    let ne = outcomes.iter().filter(|o| **o == OutcomeClass::NashEquilibrium).count();
    let sm = outcomes.iter().filter(|o| o.is_social_maximum()).count();
    (ne, sm)
}

#[test]
fn selfish_greedy_learners_drift_to_nash() {
    for kind in [BaselineKind::EpsilonGreedy(0.1), BaselineKind::Ucb1Tuned] {
        let (ne, sm) = greedy_outcomes(kind, 200);
        assert!(ne > sm, "{kind}: NE {ne}, SM {sm}");
    }
}

#[test]
fn single_selfish_player_is_a_plain_bandit() {
    let env = BernoulliEnv::new(MachineSet::new(vec![0.2, 0.9]).unwrap(), CollisionPolicy::default());
    let kind = BaselineKind::EpsilonGreedy(0.05);
    let mut players = vec![BaselineStrategy::new(kind, 2).unwrap()];
    let rec = selfish_cbp_run(&mut players, &env, 2000, 100, &mut rng_stream(1, 0)).unwrap();

    let mut solo = BaselineStrategy::new(kind, 2).unwrap();
    let mut rng = rng_stream(1, 0);
    let mut score = 0.0;
    for t in 1..=2000 {
        let k = solo.select(t, &mut rng).unwrap();
        let r = f64::from(u8::from(rng.random::<f64>() < [0.2, 0.9][k]));
        solo.observe(k, r).unwrap();
        score += r;
    }
    assert_eq!(rec.scores, vec![score]);
    assert_eq!(rec.histogram[0], solo.counts());
}
