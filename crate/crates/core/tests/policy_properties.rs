mod common;

use common::{kuhn, rng};
use proptest::prelude::*;
use psro_core::game::{expected_utility, Player};
use psro_core::policy::{
    mixture_to_behavioral, sequence_to_behavioral, simplex_point, to_sequence_form, BehavioralPolicy, MixedPolicy,
    Population,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sequence_form_of_mixture_is_linear(seed in any::<u64>(), alpha in 0.0f64..=1.0, second in any::<bool>()) {
        let game = kuhn();
        let owner = if second { Player::Two } else { Player::One };
        let mut r = rng(seed);
        let pop = Population::new(vec![
            BehavioralPolicy::random(&game, owner, &mut r),
            BehavioralPolicy::random(&game, owner, &mut r),
        ]).unwrap();
        let mix = MixedPolicy::new(&pop, vec![alpha, 1.0 - alpha]).unwrap();
        let x = to_sequence_form(&game, &mixture_to_behavioral(&game, &mix));
        let a = to_sequence_form(&game, pop.get(0));
        let b = to_sequence_form(&game, pop.get(1));
        for ((m, u), v) in x.values().iter().zip(a.values()).zip(b.values()) {
            prop_assert!((m - (alpha * u + (1.0 - alpha) * v)).abs() <= 1e-9);
        }
    }

    #[test]
    fn behavioral_round_trip_on_reached_states(seed in any::<u64>(), zero_state in 0usize..6) {
        let game = kuhn();
        let mut r = rng(seed);
        let mut probs = BehavioralPolicy::random(&game, Player::One, &mut r).all_probs().to_vec();
        // cut off some states so the unreached branch is exercised
        probs[zero_state] = vec![1.0, 0.0];
        let pi = BehavioralPolicy::new(&game, Player::One, probs).unwrap();
        let x = to_sequence_form(&game, &pi);
        let back = sequence_to_behavioral(&game, &x);
        for s in 0..game.infostates(Player::One).len() {
            if x.state_reach(&game, s) > 0.0 {
                for (p, q) in pi.probs(s).iter().zip(back.probs(s)) {
                    prop_assert!((p - q).abs() < 1e-12);
                }
            }
        }
        prop_assert!(x.consistency_error(&game) < 1e-12);
    }

    #[test]
    fn mixture_realizes_weighted_payoff(seed in any::<u64>(), k in 1usize..5) {
        let game = kuhn();
        let mut r = rng(seed);
        let members: Vec<_> = (0..k).map(|_| BehavioralPolicy::random(&game, Player::Two, &mut r)).collect();
        let opp = BehavioralPolicy::random(&game, Player::One, &mut r);
        let w = simplex_point(k, &mut r);
        let pop = Population::new(members).unwrap();
        let mix = mixture_to_behavioral(&game, &MixedPolicy::new(&pop, w.clone()).unwrap());
        let lhs = expected_utility(&game, &opp, &mix).unwrap();
        let rhs: f64 = w.iter().enumerate().map(|(i, wi)| wi * expected_utility(&game, &opp, pop.get(i)).unwrap()).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }
}
