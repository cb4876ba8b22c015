//! Measures checked against brute-force recomputation from their definitions,
//! plus the ordering chain on randomly generated sequences.

mod common;

use common::{
    brute_bad_round, brute_bad_segments, brute_significant_switches, dense_first_crossing,
    dense_phase_starts, random_cw_matrix, random_sequence,
};
use nsdb::measures::{bad_round, bad_segments, last_safe_arms, significant_cw_switches};
use nsdb::prefs::PreferenceSequence;
use nsdb::rng::stream;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    /// Ordering chain and report shape on arbitrary sequences from all three
    /// generator families.
    #[test]
    fn measure_chain_holds_on_random_sequences(seed in any::<u64>()) {
        let seq = random_sequence(seed, 300);
        let r = seq.measure_report();
        prop_assert!(r.sig_switches() <= r.cw_switches);
        prop_assert!(r.cw_switches <= r.pref_switches);
        // The winner-row drift never exceeds the full-matrix drift in any
        // round, and f64 accumulation preserves termwise order.
        prop_assert!(r.cw_variation <= r.total_variation);
        prop_assert!(r.cw_variation >= 0.0);
        let t = seq.horizon();
        let mut prev = 1;
        for &tau in &r.sig_switch_rounds {
            prop_assert!(tau > prev && tau < t, "switch {} outside ({}, {})", tau, prev, t);
            // A significant switch needs a real winner change inside the
            // phase, else the phase winner accumulates no regret and never
            // crosses its threshold.
            prop_assert!(
                seq.cw_switch_rounds().iter().any(|&s| s > prev && s < tau),
                "no winner change inside ({}, {})", prev, tau
            );
            prev = tau;
        }
    }
}

#[test]
fn significant_switches_match_brute_force() {
    let mut nonempty = 0;
    for seed in 0..40u64 {
        let seq = random_sequence(seed, 120);
        let got = significant_cw_switches(&seq);
        assert_eq!(got, brute_significant_switches(&seq), "seed {seed}");
        nonempty += usize::from(!got.is_empty());
        // Winner-phase boundaries agree with a dense per-round winner scan.
        assert_eq!(
            seq.cw_switch_rounds(),
            &dense_phase_starts(&seq)[1..],
            "seed {seed}"
        );
    }
    // Random short sequences rarely cross the significance threshold, so add
    // wide-gap rotations where crossings provably occur within the horizon.
    for (k, horizon, switches, gap, rotate) in [
        (2, 120, 1, 0.4, 2),
        (2, 120, 2, 0.4, 2),
        (2, 100, 3, 0.45, 2),
        (3, 120, 1, 0.45, 3),
        (3, 110, 2, 0.45, 2),
        (4, 120, 1, 0.5, 4),
    ] {
        let seq = PreferenceSequence::scripted_rotation(
            k,
            horizon,
            switches,
            gap,
            nsdb::prefs::GapStyle::Flat,
            rotate,
        )
        .unwrap();
        let got = significant_cw_switches(&seq);
        assert_eq!(
            got,
            brute_significant_switches(&seq),
            "k {k} horizon {horizon} switches {switches}"
        );
        assert!(!got.is_empty(), "k {k} switches {switches} found no significant switch");
        nonempty += 1;
    }
    assert!(nonempty >= 7, "only {nonempty}/46 sequences had significant switches");
}

#[test]
fn bad_segments_and_bad_round_match_brute_force() {
    let mut seg_hits = 0;
    let mut round_hits = 0;
    for seed in 0..25u64 {
        let seq = random_sequence(seed, 140);
        let mut rng = stream(seed, "probe", 2);
        for _ in 0..4 {
            let t_start = rng.gen_range(1..seq.horizon());
            let a = rng.gen_range(0..seq.arms());
            let c3 = rng.gen_range(0.02..=0.4);
            let c4 = rng.gen_range(0.005..=0.2);
            let got: Vec<_> = bad_segments(&seq, t_start, a, c3)
                .iter()
                .map(|s| (s.phase, s.start, s.end, s.bad))
                .collect();
            let want = brute_bad_segments(&seq, t_start, a, c3);
            assert_eq!(got, want, "seed {seed} t_start {t_start} arm {a} c3 {c3}");
            seg_hits += usize::from(got.iter().any(|s| s.3));
            let got_round = bad_round(&seq, t_start, a, c3, c4);
            let want_round = brute_bad_round(&seq, t_start, a, c3, c4);
            assert_eq!(got_round, want_round, "seed {seed} t_start {t_start} arm {a}");
            round_hits += usize::from(got_round.is_some());
        }
    }
    assert!(seg_hits >= 15, "only {seg_hits}/100 probes had a bad segment");
    assert!(round_hits >= 5, "only {round_hits}/100 probes had a bad round");
}

#[test]
fn last_safe_arm_matches_dense_recomputation() {
    for seed in 0..25u64 {
        let seq = random_sequence(seed, 120);
        let horizon = seq.horizon();
        let taus = significant_cw_switches(&seq);
        let recs = last_safe_arms(&seq);
        assert_eq!(recs.len(), taus.len() + 1, "seed {seed}");
        let starts: Vec<usize> = std::iter::once(1).chain(taus.iter().copied()).collect();
        for (i, rec) in recs.iter().enumerate() {
            assert_eq!(rec.phase_start, starts[i], "seed {seed} phase {i}");
            assert_eq!(rec.phase_end, taus.get(i).copied(), "seed {seed} phase {i}");
            let hi = rec.phase_end.map_or(horizon, |e| e - 1);
            // Latest first crossing wins; never crossing outranks crossing;
            // ties go to the smallest arm index.
            let mut best_arm = 0;
            let mut best_round = dense_first_crossing(&seq, 0, starts[i], hi);
            for arm in 1..seq.arms() {
                let cr = dense_first_crossing(&seq, arm, starts[i], hi);
                let later = match (cr, best_round) {
                    (None, Some(_)) => true,
                    (Some(c), Some(b)) => c > b,
                    _ => false,
                };
                if later {
                    best_arm = arm;
                    best_round = cr;
                }
            }
            assert_eq!((rec.arm, rec.crossing_round), (best_arm, best_round), "seed {seed} phase {i}");
        }
    }
}

#[test]
fn stationary_sequences_have_all_zero_measures() {
    for seed in 0..10u64 {
        let mut rng = stream(seed, "probe", 3);
        let k = rng.gen_range(2..=6);
        let winner = rng.gen_range(0..k);
        let m = random_cw_matrix(&mut rng, k, winner);
        let seq = PreferenceSequence::stationary(m, 250).unwrap();
        let r = seq.measure_report();
        assert_eq!(r.pref_switches, 0);
        assert_eq!(r.cw_switches, 0);
        assert!(r.sig_switch_rounds.is_empty());
        assert_eq!(r.total_variation, 0.0);
        assert_eq!(r.cw_variation, 0.0);
        // One phase for the whole run; the winner never crosses, so the last
        // safe arm never carries a crossing round.
        let recs = last_safe_arms(&seq);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].phase_end, None);
        assert_eq!(recs[0].crossing_round, None);
    }
}
