//! Non-stationarity measures of a preference sequence.
//!
//! Five summary measures, ordered here from coarsest to finest:
//! matrix switches (any entry change), winner switches (identity change of
//! the Condorcet winner), significant winner switches (phase boundaries where
//! every arm has provably suffered large regret), total variation (entrywise
//! drift), and winner variation (drift of the current winner's row only).
//! The chains `sig <= cw_switches <= pref_switches` and
//! `cw_variation <= total_variation` always hold.
//!
//! Also houses the diagnostic decompositions used to reason about elimination
//! timing: bad segments, the bad round, and the last safe arm per significant
//! phase. Interval sums are inclusive of both endpoints while thresholds use
//! the exclusive length `s2 - s1`; `log` is the natural logarithm.

use std::sync::Arc;

use serde::Serialize;

use crate::prefs::PreferenceSequence;

/// Summary of all five measures for one sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    /// Rounds t >= 2 with P_t != P_{t-1} (exact equality).
    pub pref_switches: usize,
    /// Rounds t >= 2 where the Condorcet winner identity changes.
    pub cw_switches: usize,
    /// Significant winner-switch rounds, in increasing order.
    pub sig_switch_rounds: Vec<usize>,
    /// Sum over rounds of the largest entrywise drift.
    pub total_variation: f64,
    /// Sum over rounds of the largest drift in the current winner's row.
    pub cw_variation: f64,
}

impl MeasureReport {
    pub fn sig_switches(&self) -> usize {
        self.sig_switch_rounds.len()
    }
}

impl PreferenceSequence {
    /// Computes (once) and caches the full measure report.
    pub fn measure_report(&self) -> Arc<MeasureReport> {
        self.report_cache
            .get_or_init(|| {
                Arc::new(MeasureReport {
                    pref_switches: count_pref_switches(self),
                    cw_switches: count_cw_switches(self),
                    sig_switch_rounds: significant_cw_switches(self),
                    total_variation: total_variation(self),
                    cw_variation: cw_variation(self),
                })
            })
            .clone()
    }
}

/// Number of rounds t >= 2 with `P_t != P_{t-1}`, by exact comparison.
pub fn count_pref_switches(seq: &PreferenceSequence) -> usize {
    let mut n = 0;
    let mut prev = seq.matrix_at(1);
    for t in 2..=seq.horizon() {
        let cur = seq.matrix_at(t);
        if *cur != *prev {
            n += 1;
        }
        prev = cur;
    }
    n
}

/// Number of rounds t >= 2 where the Condorcet winner changes.
pub fn count_cw_switches(seq: &PreferenceSequence) -> usize {
    seq.cw_switch_rounds().len()
}

/// Sum over t >= 2 of `max_{a,b} |P_t(a,b) - P_{t-1}(a,b)|`.
pub fn total_variation(seq: &PreferenceSequence) -> f64 {
    let k = seq.arms();
    let mut v = 0.0;
    let mut prev = seq.matrix_at(1);
    for t in 2..=seq.horizon() {
        let cur = seq.matrix_at(t);
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                worst = worst.max((cur.prob(a, b) - prev.prob(a, b)).abs());
            }
        }
        v += worst;
        prev = cur;
    }
    v
}

/// Sum over t >= 2 of `max_a |P_t(w, a) - P_{t-1}(w, a)|` where `w` is the
/// round-t Condorcet winner.
pub fn cw_variation(seq: &PreferenceSequence) -> f64 {
    let k = seq.arms();
    let mut v = 0.0;
    let mut prev = seq.matrix_at(1);
    for t in 2..=seq.horizon() {
        let cur = seq.matrix_at(t);
        let w = seq.cw_at(t);
        let mut worst: f64 = 0.0;
        for a in 0..k {
            worst = worst.max((cur.prob(w, a) - prev.prob(w, a)).abs());
        }
        v += worst;
        prev = cur;
    }
    v
}

/// First round `s2` in `(lo, hi]` such that some `s1` in `[lo, s2)` satisfies
/// `sum_{t=s1..=s2} delta_t(w_t, a) >= sqrt(K (s2 - s1))`, where `w_t` is the
/// round-t winner. `None` if no such round exists.
fn first_crossing(seq: &PreferenceSequence, a: usize, lo: usize, hi: usize) -> Option<usize> {
    if hi <= lo {
        return None;
    }
    let k = seq.arms() as f64;
    let sqrt_k = k.sqrt();
    // pre[j] = regret of arm a accumulated over rounds [lo, lo + j).
    let mut pre = Vec::with_capacity(hi - lo + 2);
    pre.push(0.0);
    pre.push(seq.gap_at(lo, seq.cw_at(lo), a));
    for s2 in (lo + 1)..=hi {
        let g = seq.gap_at(s2, seq.cw_at(s2), a);
        debug_assert!(g >= 0.0, "winner regret is nonnegative");
        let j2 = s2 - lo + 1;
        let total = pre[j2 - 1] + g;
        pre.push(total);
        // Regret is nonnegative, so no sub-interval sum exceeds the running
        // total; intervals whose threshold already exceeds it cannot cross.
        if total < sqrt_k {
            continue;
        }
        let d_max = (s2 - lo).min((total * total / k) as usize);
        for d in 1..=d_max {
            if pre[j2] - pre[j2 - 1 - d] >= (k * d as f64).sqrt() {
                return Some(s2);
            }
        }
    }
    None
}

/// Significant winner-switch rounds: starting from round 1, the next switch
/// is the first round `r < T` such that every arm has crossed the
/// `sqrt(K (s2 - s1))` regret threshold on some interval `[s1, s2]` with
/// `phase_start <= s1 < s2 < r`.
pub fn significant_cw_switches(seq: &PreferenceSequence) -> Vec<usize> {
    let t = seq.horizon();
    if t < 3 {
        return Vec::new();
    }
    let k = seq.arms();
    let mut taus = Vec::new();
    let mut start = 1;
    'phases: loop {
        // The switch round must lie in [start, T), so crossings can use
        // s2 at most T - 2.
        let mut worst = 0;
        for a in 0..k {
            match first_crossing(seq, a, start, t - 2) {
                Some(s2) => worst = worst.max(s2),
                None => break 'phases,
            }
        }
        let tau = worst + 1;
        taus.push(tau);
        start = tau;
    }
    taus
}

/// One significant phase's last safe arm: the arm whose first
/// threshold-crossing round is latest, ties broken by smallest index. Arms
/// that never cross outrank all that do (possible only in the final phase).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SafeArmRecord {
    pub phase_start: usize,
    /// Next significant switch round; `None` for the final phase.
    pub phase_end: Option<usize>,
    pub arm: usize,
    /// First crossing round of `arm`, `None` if it never crossed.
    pub crossing_round: Option<usize>,
}

/// Last safe arm of every significant phase, in phase order.
pub fn last_safe_arms(seq: &PreferenceSequence) -> Vec<SafeArmRecord> {
    let t = seq.horizon();
    let taus = significant_cw_switches(seq);
    let starts: Vec<usize> = std::iter::once(1).chain(taus.iter().copied()).collect();
    let mut out = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = taus.get(i).copied();
        // Crossings stay strictly inside the phase; the final phase may use
        // every remaining round.
        let hi = end.map_or(t, |e| e - 1);
        let mut best_arm = 0;
        let mut best_key = 0u64;
        let mut best_round = None;
        for a in 0..seq.arms() {
            let crossing = first_crossing(seq, a, start, hi);
            let key = crossing.map_or(u64::MAX, |r| r as u64);
            if a == 0 || key > best_key {
                best_arm = a;
                best_key = key;
                best_round = crossing;
            }
        }
        out.push(SafeArmRecord {
            phase_start: start,
            phase_end: end,
            arm: best_arm,
            crossing_round: best_round,
        });
    }
    out
}

/// One maximal interval `[start, end)` of accumulated regret for a fixed arm
/// inside one winner phase. `bad` records whether the regret sum over
/// `[start, end]` exceeded its threshold (the final segment of a phase may
/// not).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SegmentRecord {
    /// Index of the winner phase containing the segment.
    pub phase: usize,
    pub start: usize,
    pub end: usize,
    pub bad: bool,
}

/// Splits every winner phase intersecting `[t_start, T)` into segments for
/// arm `a`. Within a phase starting at `s`, the next boundary is the smallest
/// round `e` with `sum_{t=s..=e} delta_t(w, a) > c3 ln(T) K sqrt(e - s)`
/// (`w` = the phase's winner); if none exists the segment runs to the round
/// before the phase end and is flagged non-bad.
pub fn bad_segments(
    seq: &PreferenceSequence,
    t_start: usize,
    a: usize,
    c3: f64,
) -> Vec<SegmentRecord> {
    assert!(t_start >= 1 && t_start < seq.horizon(), "t_start out of range");
    assert!(c3 > 0.0);
    let t = seq.horizon();
    let factor = c3 * (t as f64).ln() * seq.arms() as f64;
    let mut out = Vec::new();
    let mut phase_start = 1;
    for (i, phase_end) in seq
        .cw_switch_rounds()
        .iter()
        .copied()
        .chain(std::iter::once(t + 1))
        .enumerate()
    {
        // Only phases overlapping [t_start, T).
        if phase_end > t_start && phase_start < t {
            let w = seq.cw_at(phase_start);
            let mut s = phase_start.max(t_start);
            while s < phase_end - 1 {
                let mut sum = seq.gap_at(s, w, a);
                let mut found = None;
                for e in (s + 1)..phase_end.min(t + 1) {
                    sum += seq.gap_at(e, w, a);
                    if sum > factor * ((e - s) as f64).sqrt() {
                        found = Some(e);
                        break;
                    }
                }
                match found {
                    Some(e) => {
                        out.push(SegmentRecord { phase: i, start: s, end: e, bad: true });
                        s = e;
                    }
                    None => {
                        out.push(SegmentRecord {
                            phase: i,
                            start: s,
                            end: phase_end - 1,
                            bad: false,
                        });
                        break;
                    }
                }
            }
        }
        phase_start = phase_end;
    }
    out
}

/// Smallest round `s > t_start` at which the accumulated `sqrt(length)` of
/// completed bad segments for arm `a` exceeds `c4 ln(T) sqrt(s - t_start)`;
/// `None` if that never happens within the horizon.
pub fn bad_round(
    seq: &PreferenceSequence,
    t_start: usize,
    a: usize,
    c3: f64,
    c4: f64,
) -> Option<usize> {
    assert!(c4 > 0.0);
    let ln_t = (seq.horizon() as f64).ln();
    let mut acc = 0.0;
    // Between consecutive segment ends the left side is constant while the
    // right side grows, so only rounds just after a bad segment completes
    // can be the answer.
    for seg in bad_segments(seq, t_start, a, c3) {
        if !seg.bad {
            continue;
        }
        acc += ((seg.end - seg.start) as f64).sqrt();
        let s = seg.end + 1;
        if s <= seq.horizon() && acc > c4 * ln_t * ((s - t_start) as f64).sqrt() {
            return Some(s);
        }
    }
    None
}
