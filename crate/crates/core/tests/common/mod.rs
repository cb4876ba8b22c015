//! Shared brute-force oracles and random-input generators for integration
//! tests. Everything here recomputes quantities directly from definitions,
//! with dense scans over rounds, so agreement with the library's sparse or
//! pruned implementations is meaningful.

#![allow(dead_code)]

use nsdb::estimator::{DuelEvent, EstimateStore, Violation};
use nsdb::prefs::{LinkKind, PreferenceMatrix, PreferenceSequence, UtilityModel};
use nsdb::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Estimator oracles
// ---------------------------------------------------------------------------

/// Dense per-round estimate sum: every round in `[s1, s2]` contributes
/// `-1/2`, plus `active_size^2` when it carries a positive outcome for the
/// ordered pair. Rounds absent from `events` contribute the baseline only.
pub fn dense_interval_sum(
    events: &[DuelEvent],
    a_prime: usize,
    a: usize,
    s1: usize,
    s2: usize,
) -> f64 {
    let mut sum = 0.0;
    for t in s1..=s2 {
        sum -= 0.5;
        if let Some(e) = events.iter().find(|e| e.t == t) {
            if e.first == a_prime && e.second == a && e.outcome == 1 {
                sum += (e.active_size * e.active_size) as f64;
            }
        }
    }
    sum
}

/// Exhaustive violation search over every `(a_prime, s1, s2)` with
/// `window_start <= s1 <= s2` and `s2` in `[s2_lo, s2_hi]`, reporting the
/// canonical witness: smallest violating `s2`, then smallest `a_prime`, then
/// the `s1` maximizing `sum - threshold` with ties to the smallest `s1`.
pub fn dense_violation(
    events: &[DuelEvent],
    k: usize,
    a: usize,
    window_start: usize,
    s2_lo: usize,
    s2_hi: usize,
    horizon: usize,
    c: f64,
) -> Option<Violation> {
    let last = events.iter().map(|e| e.t).max().unwrap_or(0);
    let lo = s2_lo.max(window_start).max(1);
    let hi = s2_hi.min(last);
    if lo > hi {
        return None;
    }
    // Dense prefix of the estimate stream per opponent.
    let mut prefix = vec![vec![0.0f64; hi + 1]; k];
    for ap in 0..k {
        for t in 1..=hi {
            let mut v = -0.5;
            if let Some(e) = events.iter().find(|e| e.t == t) {
                if e.first == ap && e.second == a && e.outcome == 1 {
                    v += (e.active_size * e.active_size) as f64;
                }
            }
            prefix[ap][t] = prefix[ap][t - 1] + v;
        }
    }
    for s2 in lo..=hi {
        for ap in 0..k {
            let mut best: Option<Violation> = None;
            for s1 in window_start..=s2 {
                let sum = prefix[ap][s2] - prefix[ap][s1 - 1];
                let len = s2 - s1;
                let threshold =
                    c * (horizon as f64).ln() * k as f64 * ((len.max(k * k)) as f64).sqrt();
                let better = match &best {
                    None => true,
                    Some(b) => sum - threshold > b.sum - b.threshold,
                };
                if better {
                    best = Some(Violation { a_prime: ap, s1, s2, sum, threshold });
                }
            }
            if let Some(b) = best {
                if b.sum > b.threshold {
                    return Some(b);
                }
            }
        }
    }
    None
}

pub fn store_from_events(k: usize, events: &[DuelEvent]) -> EstimateStore {
    let mut store = EstimateStore::new(k);
    for e in events {
        store.record(e).expect("generated events are ordered and in range");
    }
    store
}

/// Random duel trace: rounds `1..=t_max`, each present with high probability
/// (occasional gaps exercise the store's round-skip handling), random ordered
/// pair, fair outcome, and an arbitrary active-set size in `1..=k`.
pub fn random_trace(seed: u64, t_max: usize, k: usize) -> Vec<DuelEvent> {
    let mut rng = stream(seed, "trace-gen", 0);
    let mut events = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        if rng.gen::<f64>() < 0.05 {
            continue;
        }
        events.push(DuelEvent {
            t,
            first: rng.gen_range(0..k),
            second: rng.gen_range(0..k),
            outcome: u8::from(rng.gen::<f64>() < 0.5),
            active_size: rng.gen_range(1..=k),
        });
    }
    events
}

// ---------------------------------------------------------------------------
// Sequence generators
// ---------------------------------------------------------------------------

/// Random matrix with a designated winner; non-winner pairs are arbitrary,
/// so these matrices need not be transitive in any sense.
pub fn random_cw_matrix(rng: &mut ChaCha8Rng, k: usize, winner: usize) -> PreferenceMatrix {
    PreferenceMatrix::from_upper(k, |a, b| {
        if a == winner {
            0.5 + rng.gen_range(0.01..=0.49)
        } else if b == winner {
            rng.gen_range(0.01..=0.49)
        } else {
            rng.gen_range(0.0..=1.0)
        }
    })
    .expect("constructed matrix is valid")
}

/// Random valid sequence from one of three families: piecewise-constant
/// random-winner matrices, smoothly drifting utilities, or a scripted winner
/// rotation. Horizon lands in `[10, max_t]`.
pub fn random_sequence(seed: u64, max_t: usize) -> PreferenceSequence {
    let mut rng = stream(seed, "seq-gen", 0);
    let k = rng.gen_range(2..=5);
    let horizon = rng.gen_range(10..=max_t);
    match rng.gen_range(0..3) {
        0 => {
            let segments = rng.gen_range(1..=6.min(horizon));
            let mut starts: Vec<usize> = vec![1];
            while starts.len() < segments {
                let s = rng.gen_range(2..=horizon);
                if !starts.contains(&s) {
                    starts.push(s);
                }
            }
            starts.sort_unstable();
            let pieces: Vec<(usize, PreferenceMatrix)> = starts
                .iter()
                .map(|&s| {
                    let w = rng.gen_range(0..k);
                    (s, random_cw_matrix(&mut rng, k, w))
                })
                .collect();
            PreferenceSequence::piecewise(pieces, horizon).expect("valid piecewise sequence")
        }
        1 => {
            // Retry with a salted stream in the astronomically unlikely case
            // of an exact utility tie at some round.
            for attempt in 0..20 {
                let mut r = stream(seed, "seq-gen-util", attempt);
                let frames = r.gen_range(2..=4);
                let mut rounds: Vec<usize> = vec![1];
                while rounds.len() < frames {
                    let s = r.gen_range(2..=horizon);
                    if !rounds.contains(&s) {
                        rounds.push(s);
                    }
                }
                rounds.sort_unstable();
                let keyframes: Vec<(usize, Vec<f64>)> = rounds
                    .iter()
                    .map(|&s| (s, (0..k).map(|_| r.gen_range(-1.0..1.0)).collect()))
                    .collect();
                let link = if r.gen::<bool>() {
                    LinkKind::Logistic { scale: r.gen_range(0.5..3.0) }
                } else {
                    LinkKind::Linear { scale: 0.2 }
                };
                let model = UtilityModel::new(keyframes, link).expect("valid keyframes");
                if let Ok(seq) = PreferenceSequence::utility_drift(model, horizon) {
                    return seq;
                }
            }
            panic!("no tie-free utility sequence in 20 attempts");
        }
        _ => {
            let switches = rng.gen_range(0..=6.min(horizon / 2 - 1));
            let gap = rng.gen_range(0.05..=0.5);
            let style = if rng.gen::<bool>() {
                nsdb::prefs::GapStyle::Flat
            } else {
                nsdb::prefs::GapStyle::Ladder
            };
            let rotate = rng.gen_range(2..=k);
            PreferenceSequence::scripted_rotation(k, horizon, switches, gap, style, rotate)
                .expect("valid rotation")
        }
    }
}

// ---------------------------------------------------------------------------
// Measure oracles
// ---------------------------------------------------------------------------

/// First round `s2` at which arm `a` has a detection window inside
/// `[phase_lo, cap]`: some `phase_lo <= s1 < s2 <= cap` with
/// `sum_{t=s1..=s2} gap_t(winner_t, a) >= sqrt(K (s2 - s1))`, by dense scan.
pub fn dense_first_crossing(
    seq: &PreferenceSequence,
    a: usize,
    phase_lo: usize,
    cap: usize,
) -> Option<usize> {
    let k = seq.arms() as f64;
    for s2 in (phase_lo + 1)..=cap {
        for s1 in phase_lo..s2 {
            let mut sum = 0.0;
            for t in s1..=s2 {
                sum += seq.gap_at(t, seq.cw_at(t), a);
            }
            if sum >= (k * (s2 - s1) as f64).sqrt() {
                return Some(s2);
            }
        }
    }
    None
}

/// Significant winner switches from the definition: each next switch is the
/// first round after which every arm has completed a detection window inside
/// the current phase. A switch round never exceeds `T - 1`.
pub fn brute_significant_switches(seq: &PreferenceSequence) -> Vec<usize> {
    let horizon = seq.horizon();
    let mut taus = Vec::new();
    let mut tau = 1usize;
    if horizon < 3 {
        return taus;
    }
    loop {
        // All arms must cross with s2 <= T - 2 so the switch lands <= T - 1.
        let mut worst: Option<usize> = Some(0);
        for a in 0..seq.arms() {
            match dense_first_crossing(seq, a, tau, horizon - 2) {
                Some(r) => worst = worst.map(|w| w.max(r)),
                None => {
                    worst = None;
                    break;
                }
            }
        }
        match worst {
            Some(w) if w + 1 <= horizon - 1 => {
                taus.push(w + 1);
                tau = w + 1;
            }
            _ => return taus,
        }
    }
}

/// Winner-phase boundaries recomputed densely from per-round winners: phase
/// start rounds, beginning with 1.
pub fn dense_phase_starts(seq: &PreferenceSequence) -> Vec<usize> {
    let mut starts = vec![1];
    for t in 2..=seq.horizon() {
        if seq.cw_at(t) != seq.cw_at(t - 1) {
            starts.push(t);
        }
    }
    starts
}

/// Bad segments for arm `a` from the definition, with every sum recomputed
/// densely: returns `(phase_index, start, end, bad)` per segment.
pub fn brute_bad_segments(
    seq: &PreferenceSequence,
    t_start: usize,
    a: usize,
    c3: f64,
) -> Vec<(usize, usize, usize, bool)> {
    let horizon = seq.horizon();
    let factor = c3 * (horizon as f64).ln() * seq.arms() as f64;
    let starts = dense_phase_starts(seq);
    let mut out = Vec::new();
    for (i, &phase_start) in starts.iter().enumerate() {
        let phase_end = starts.get(i + 1).copied().unwrap_or(horizon + 1);
        if phase_end <= t_start || phase_start >= horizon {
            continue;
        }
        let w = seq.cw_at(phase_start);
        let mut s = phase_start.max(t_start);
        while s < phase_end - 1 {
            let mut found = None;
            for e in (s + 1)..phase_end.min(horizon + 1) {
                let mut sum = 0.0;
                for t in s..=e {
                    sum += seq.gap_at(t, w, a);
                }
                if sum > factor * ((e - s) as f64).sqrt() {
                    found = Some(e);
                    break;
                }
            }
            match found {
                Some(e) => {
                    out.push((i, s, e, true));
                    s = e;
                }
                None => {
                    out.push((i, s, phase_end - 1, false));
                    break;
                }
            }
        }
    }
    out
}

/// Bad round from the definition by scanning every candidate round densely.
pub fn brute_bad_round(
    seq: &PreferenceSequence,
    t_start: usize,
    a: usize,
    c3: f64,
    c4: f64,
) -> Option<usize> {
    let horizon = seq.horizon();
    let ln_t = (horizon as f64).ln();
    let segments = brute_bad_segments(seq, t_start, a, c3);
    for s in (t_start + 1)..=horizon {
        let acc: f64 = segments
            .iter()
            .filter(|&&(_, _, end, bad)| bad && end < s)
            .map(|&(_, start, end, _)| ((end - start) as f64).sqrt())
            .sum();
        if acc > c4 * ln_t * ((s - t_start) as f64).sqrt() {
            return Some(s);
        }
    }
    None
}
