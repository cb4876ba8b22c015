//! Preference matrices, Condorcet-winner logic, and generators of
//! non-stationary preference sequences.
//!
//! A preference matrix holds pairwise win probabilities: `p[a][b]` is the
//! probability that arm `a` beats arm `b` in a duel. Valid matrices satisfy
//! `p[a][b] + p[b][a] = 1` and `p[a][a] = 0.5`. The gap
//! `delta(a, b) = p[a][b] - 1/2` is positive when `a` dominates `b`, and the
//! Condorcet winner (when it exists) beats every other arm with probability
//! strictly above one half.
//!
//! A [`PreferenceSequence`] assigns one matrix to every round `1..=T`. Every
//! round is required to have a Condorcet winner; sequences that lose it at any
//! round are rejected at construction. Sequences also precompute the winner
//! identity per round and the rounds where it changes, so downstream measures
//! and scripted experiments can read ground truth instead of re-deriving it.

use std::borrow::Cow;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::measures::MeasureReport;

/// Tolerance for the row-complement validity check.
pub const COMPLEMENT_TOL: f64 = 1e-12;
/// Tolerance for the stochastic-transitivity checks.
pub const TRANSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum PrefsError {
    #[error("invalid preference matrix: {0}")]
    InvalidMatrix(String),
    #[error("no Condorcet winner{}", round.map(|r| format!(" at round {r}")).unwrap_or_default())]
    NoCondorcetWinner { round: Option<usize> },
    #[error("invalid utility model: {0}")]
    InvalidUtilityModel(String),
    #[error("invalid preference sequence: {0}")]
    InvalidSequence(String),
}

// ---------------------------------------------------------------------------
// Preference matrices
// ---------------------------------------------------------------------------

/// Pairwise win probabilities for `k` arms, stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PreferenceMatrix {
    k: usize,
    p: Vec<f64>,
}

impl PreferenceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, PrefsError> {
        let k = rows.len();
        if k < 2 {
            return Err(PrefsError::InvalidMatrix(format!(
                "need at least 2 arms, got {k}"
            )));
        }
        let mut p = Vec::with_capacity(k * k);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(PrefsError::InvalidMatrix(format!(
                    "row {a} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (b, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(PrefsError::InvalidMatrix(format!(
                        "p[{a}][{b}] = {v} outside [0, 1]"
                    )));
                }
                p.push(v);
            }
        }
        let m = PreferenceMatrix { k, p };
        for a in 0..k {
            for b in a..k {
                let sum = m.prob(a, b) + m.prob(b, a);
                if (sum - 1.0).abs() > COMPLEMENT_TOL {
                    return Err(PrefsError::InvalidMatrix(format!(
                        "p[{a}][{b}] + p[{b}][{a}] = {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix from its strict upper triangle; the lower triangle is
    /// the exact complement and the diagonal is 0.5.
    pub fn from_upper(k: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Result<Self, PrefsError> {
        if k < 2 {
            return Err(PrefsError::InvalidMatrix(format!(
                "need at least 2 arms, got {k}"
            )));
        }
        let mut p = vec![0.5; k * k];
        for a in 0..k {
            for b in (a + 1)..k {
                let v = upper(a, b);
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(PrefsError::InvalidMatrix(format!(
                        "p[{a}][{b}] = {v} outside [0, 1]"
                    )));
                }
                p[a * k + b] = v;
                p[b * k + a] = 1.0 - v;
            }
        }
        Ok(PreferenceMatrix { k, p })
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.k + b]
    }

    /// `delta(a, b) = p[a][b] - 1/2`; antisymmetric, zero on the diagonal.
    pub fn gap(&self, a: usize, b: usize) -> f64 {
        self.prob(a, b) - 0.5
    }

    /// The arm beating every other arm with probability > 1/2, if one exists.
    /// Ties at exactly 0.5 count as "no domination", so they disqualify.
    pub fn condorcet_winner(&self) -> Option<usize> {
        (0..self.k).find(|&a| (0..self.k).all(|b| b == a || self.prob(a, b) > 0.5))
    }

    /// Draws one duel outcome: 1 with probability `p[a][b]`.
    pub fn sample_outcome<R: Rng + ?Sized>(&self, a: usize, b: usize, rng: &mut R) -> u8 {
        u8::from(rng.gen::<f64>() < self.prob(a, b))
    }

    /// Strong stochastic transitivity: for every chain a ≽ b ≽ c,
    /// `delta(a, c) >= max(delta(a, b), delta(b, c))`.
    pub fn check_sst(&self) -> bool {
        self.for_all_chains(|dab, dbc, dac| dac >= dab.max(dbc) - TRANSITIVITY_TOL)
    }

    /// Stochastic triangle inequality: for every chain a ≽ b ≽ c,
    /// `delta(a, c) <= delta(a, b) + delta(b, c)`.
    pub fn check_sti(&self) -> bool {
        self.for_all_chains(|dab, dbc, dac| dac <= dab + dbc + TRANSITIVITY_TOL)
    }

    /// Relaxed triangle inequality: whenever a ≽ b and a ≽ c,
    /// `delta(a, c) <= 2 delta(a, b) + delta(b, c)`. Implied by SST + STI.
    pub fn check_triangle(&self) -> bool {
        for a in 0..self.k {
            for b in 0..self.k {
                for c in 0..self.k {
                    if a == b || a == c || b == c {
                        continue;
                    }
                    if self.gap(a, b) >= 0.0 && self.gap(a, c) >= 0.0 {
                        let lhs = self.gap(a, c);
                        let rhs = 2.0 * self.gap(a, b) + self.gap(b, c);
                        if lhs > rhs + TRANSITIVITY_TOL {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn for_all_chains(&self, mut ok: impl FnMut(f64, f64, f64) -> bool) -> bool {
        for a in 0..self.k {
            for b in 0..self.k {
                for c in 0..self.k {
                    if a == b || a == c || b == c {
                        continue;
                    }
                    let (dab, dbc) = (self.gap(a, b), self.gap(b, c));
                    if dab >= 0.0 && dbc >= 0.0 && !ok(dab, dbc, self.gap(a, c)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Relabels arms: entry `(a, b)` moves to `(perm[a], perm[b])`.
    pub fn permuted(&self, perm: &[usize]) -> PreferenceMatrix {
        assert_eq!(perm.len(), self.k);
        let mut p = vec![0.0; self.k * self.k];
        for a in 0..self.k {
            for b in 0..self.k {
                p[perm[a] * self.k + perm[b]] = self.prob(a, b);
            }
        }
        PreferenceMatrix { k: self.k, p }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|a| self.p[a * self.k..(a + 1) * self.k].to_vec())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for PreferenceMatrix {
    type Error = PrefsError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        PreferenceMatrix::from_rows(rows)
    }
}

impl From<PreferenceMatrix> for Vec<Vec<f64>> {
    fn from(m: PreferenceMatrix) -> Self {
        m.to_rows()
    }
}

impl std::fmt::Debug for PreferenceMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreferenceMatrix")
            .field("k", &self.k)
            .field("rows", &self.to_rows())
            .finish()
    }
}

/// Winner margin over all losers in generated matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapStyle {
    /// Winner beats everyone with probability 0.5 + gap; all other duels are
    /// fair coin flips.
    Flat,
    /// Arms are totally ordered; each rank step adds `gap` to the win
    /// probability, clamping at 1.
    Ladder,
}

/// `p[winner][b] = 0.5 + gap` for every other arm; remaining pairs tie.
pub fn flat_gap_matrix(k: usize, winner: usize, gap: f64) -> Result<PreferenceMatrix, PrefsError> {
    validate_gap(gap)?;
    if winner >= k {
        return Err(PrefsError::InvalidMatrix(format!(
            "winner {winner} out of range for {k} arms"
        )));
    }
    PreferenceMatrix::from_upper(k, |a, b| {
        if a == winner {
            0.5 + gap
        } else if b == winner {
            0.5 - gap
        } else {
            0.5
        }
    })
}

/// Total order with `winner` first and the rest in index order; the duel win
/// probability grows by `gap` per rank step, clamped to 1.
pub fn ladder_matrix(k: usize, winner: usize, gap: f64) -> Result<PreferenceMatrix, PrefsError> {
    validate_gap(gap)?;
    if winner >= k {
        return Err(PrefsError::InvalidMatrix(format!(
            "winner {winner} out of range for {k} arms"
        )));
    }
    let mut rank = vec![0usize; k];
    let mut next = 1;
    for a in 0..k {
        if a != winner {
            rank[a] = next;
            next += 1;
        }
    }
    PreferenceMatrix::from_upper(k, |a, b| {
        let d = rank[b] as f64 - rank[a] as f64;
        (0.5 + gap * d).clamp(0.0, 1.0)
    })
}

fn validate_gap(gap: f64) -> Result<(), PrefsError> {
    if !gap.is_finite() || gap <= 0.0 || gap > 0.5 {
        return Err(PrefsError::InvalidMatrix(format!(
            "gap {gap} outside (0, 0.5]"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Utility models
// ---------------------------------------------------------------------------

/// Symmetric monotone link mapping a utility difference to a win probability.
/// Both links satisfy `sigma(0) = 0.5` and `sigma(x) = 1 - sigma(-x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkKind {
    /// `sigma(x) = 0.5 + scale * x / 2`. Only valid while `|scale * x| <= 1`.
    Linear { scale: f64 },
    /// `sigma(x) = 1 / (1 + exp(-scale * x))`.
    Logistic { scale: f64 },
}

impl LinkKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            LinkKind::Linear { scale } => 0.5 + scale * x / 2.0,
            LinkKind::Logistic { scale } => 1.0 / (1.0 + (-scale * x).exp()),
        }
    }

    fn scale(self) -> f64 {
        match self {
            LinkKind::Linear { scale } | LinkKind::Logistic { scale } => scale,
        }
    }
}

/// Per-arm utilities drifting piecewise-linearly between keyframes, converted
/// to preference matrices through a link function.
#[derive(Clone, Debug)]
pub struct UtilityModel {
    /// `(round, utilities)` pairs with strictly increasing rounds.
    keyframes: Vec<(usize, Vec<f64>)>,
    link: LinkKind,
}

impl UtilityModel {
    pub fn new(keyframes: Vec<(usize, Vec<f64>)>, link: LinkKind) -> Result<Self, PrefsError> {
        let scale = link.scale();
        if !scale.is_finite() || scale <= 0.0 {
            return Err(PrefsError::InvalidUtilityModel(format!(
                "link scale {scale} must be positive and finite"
            )));
        }
        let first = keyframes
            .first()
            .ok_or_else(|| PrefsError::InvalidUtilityModel("no keyframes".into()))?;
        let k = first.1.len();
        if k < 2 {
            return Err(PrefsError::InvalidUtilityModel(format!(
                "need at least 2 arms, got {k}"
            )));
        }
        let mut prev_round = None;
        for (round, utils) in &keyframes {
            if *round == 0 {
                return Err(PrefsError::InvalidUtilityModel(
                    "keyframe rounds are 1-based".into(),
                ));
            }
            if let Some(p) = prev_round {
                if *round <= p {
                    return Err(PrefsError::InvalidUtilityModel(format!(
                        "keyframe rounds must strictly increase ({p} then {round})"
                    )));
                }
            }
            prev_round = Some(*round);
            if utils.len() != k {
                return Err(PrefsError::InvalidUtilityModel(format!(
                    "keyframe at round {round} has {} utilities, expected {k}",
                    utils.len()
                )));
            }
            if utils.iter().any(|u| !u.is_finite()) {
                return Err(PrefsError::InvalidUtilityModel(format!(
                    "non-finite utility at round {round}"
                )));
            }
            if let LinkKind::Linear { scale } = link {
                // Interpolated differences are convex combinations of keyframe
                // differences, so checking keyframes bounds every round.
                for a in 0..k {
                    for b in 0..k {
                        let d = scale * (utils[a] - utils[b]);
                        if d.abs() > 1.0 + COMPLEMENT_TOL {
                            return Err(PrefsError::InvalidUtilityModel(format!(
                                "linear link overflows [0, 1]: scale * (u[{a}] - u[{b}]) = {d} at round {round}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(UtilityModel { keyframes, link })
    }

    pub fn arms(&self) -> usize {
        self.keyframes[0].1.len()
    }

    pub fn link(&self) -> LinkKind {
        self.link
    }

    /// Utilities at round `t`, clamped to the first/last keyframe outside the
    /// keyframe span.
    pub fn utilities_at(&self, t: usize) -> Vec<f64> {
        let kf = &self.keyframes;
        if t <= kf[0].0 {
            return kf[0].1.clone();
        }
        if t >= kf[kf.len() - 1].0 {
            return kf[kf.len() - 1].1.clone();
        }
        let i = kf.partition_point(|(r, _)| *r <= t) - 1;
        let (r0, u0) = &kf[i];
        let (r1, u1) = &kf[i + 1];
        let alpha = (t - r0) as f64 / (r1 - r0) as f64;
        u0.iter()
            .zip(u1)
            .map(|(a, b)| a * (1.0 - alpha) + b * alpha)
            .collect()
    }

    pub fn matrix_at(&self, t: usize) -> PreferenceMatrix {
        let u = self.utilities_at(t);
        PreferenceMatrix::from_upper(u.len(), |a, b| self.link.apply(u[a] - u[b]).clamp(0.0, 1.0))
            .expect("validated at construction")
    }
}

// ---------------------------------------------------------------------------
// Preference sequences
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum SequenceKind {
    /// One matrix per round, `mats[t-1]` for round `t`.
    Explicit(Vec<PreferenceMatrix>),
    /// `(start_round, matrix)` segments; the first starts at round 1.
    Piecewise(Vec<(usize, PreferenceMatrix)>),
    Utility(UtilityModel),
}

/// A per-round assignment of preference matrices over rounds `1..=horizon`,
/// with a Condorcet winner guaranteed at every round.
#[derive(Debug)]
pub struct PreferenceSequence {
    horizon: usize,
    k: usize,
    kind: SequenceKind,
    /// `cw[t-1]` is the Condorcet winner at round `t`.
    cw: Vec<usize>,
    /// Rounds `t >= 2` where the winner differs from round `t-1`.
    cw_switch_rounds: Vec<usize>,
    pub(crate) report_cache: OnceLock<Arc<MeasureReport>>,
}

impl Clone for PreferenceSequence {
    fn clone(&self) -> Self {
        PreferenceSequence {
            horizon: self.horizon,
            k: self.k,
            kind: self.kind.clone(),
            cw: self.cw.clone(),
            cw_switch_rounds: self.cw_switch_rounds.clone(),
            report_cache: self.report_cache.clone(),
        }
    }
}

impl PreferenceSequence {
    pub fn stationary(matrix: PreferenceMatrix, horizon: usize) -> Result<Self, PrefsError> {
        Self::piecewise(vec![(1, matrix)], horizon)
    }

    pub fn explicit(mats: Vec<PreferenceMatrix>) -> Result<Self, PrefsError> {
        let horizon = mats.len();
        if horizon == 0 {
            return Err(PrefsError::InvalidSequence("no matrices".into()));
        }
        let k = mats[0].arms();
        if mats.iter().any(|m| m.arms() != k) {
            return Err(PrefsError::InvalidSequence(
                "matrices disagree on arm count".into(),
            ));
        }
        let mut cw = Vec::with_capacity(horizon);
        for (i, m) in mats.iter().enumerate() {
            cw.push(
                m.condorcet_winner()
                    .ok_or(PrefsError::NoCondorcetWinner { round: Some(i + 1) })?,
            );
        }
        Ok(Self::finish(horizon, k, SequenceKind::Explicit(mats), cw))
    }

    pub fn piecewise(
        segments: Vec<(usize, PreferenceMatrix)>,
        horizon: usize,
    ) -> Result<Self, PrefsError> {
        if horizon == 0 {
            return Err(PrefsError::InvalidSequence("horizon must be >= 1".into()));
        }
        if segments.is_empty() {
            return Err(PrefsError::InvalidSequence("no segments".into()));
        }
        if segments[0].0 != 1 {
            return Err(PrefsError::InvalidSequence(format!(
                "first segment starts at round {}, expected 1",
                segments[0].0
            )));
        }
        let k = segments[0].1.arms();
        let mut seg_cw = Vec::with_capacity(segments.len());
        for (i, (start, m)) in segments.iter().enumerate() {
            if i > 0 && *start <= segments[i - 1].0 {
                return Err(PrefsError::InvalidSequence(format!(
                    "segment starts must strictly increase ({} then {start})",
                    segments[i - 1].0
                )));
            }
            if *start > horizon {
                return Err(PrefsError::InvalidSequence(format!(
                    "segment start {start} beyond horizon {horizon}"
                )));
            }
            if m.arms() != k {
                return Err(PrefsError::InvalidSequence(
                    "matrices disagree on arm count".into(),
                ));
            }
            seg_cw.push(
                m.condorcet_winner()
                    .ok_or(PrefsError::NoCondorcetWinner { round: Some(*start) })?,
            );
        }
        let mut cw = Vec::with_capacity(horizon);
        let mut seg = 0;
        for t in 1..=horizon {
            while seg + 1 < segments.len() && segments[seg + 1].0 <= t {
                seg += 1;
            }
            cw.push(seg_cw[seg]);
        }
        Ok(Self::finish(horizon, k, SequenceKind::Piecewise(segments), cw))
    }

    pub fn utility_drift(model: UtilityModel, horizon: usize) -> Result<Self, PrefsError> {
        if horizon == 0 {
            return Err(PrefsError::InvalidSequence("horizon must be >= 1".into()));
        }
        let k = model.arms();
        let mut cw = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            // The winner under a monotone link is the arm with the strictly
            // largest utility; a tie at the top means no Condorcet winner.
            let u = model.utilities_at(t);
            let best = (0..k)
                .max_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap())
                .unwrap();
            if (0..k).any(|a| a != best && u[a] >= u[best]) {
                return Err(PrefsError::NoCondorcetWinner { round: Some(t) });
            }
            cw.push(best);
        }
        Ok(Self::finish(horizon, k, SequenceKind::Utility(model), cw))
    }

    /// Scripted piecewise environment with `switches` equally spaced winner
    /// changes. Segment `j` (0-based) starts at round `1 + j*horizon/(switches+1)`
    /// and its winner is arm `j % rotate`.
    pub fn scripted_rotation(
        k: usize,
        horizon: usize,
        switches: usize,
        gap: f64,
        style: GapStyle,
        rotate: usize,
    ) -> Result<Self, PrefsError> {
        if k < 2 {
            return Err(PrefsError::InvalidSequence(format!(
                "need at least 2 arms, got {k}"
            )));
        }
        if !(2..=k).contains(&rotate) {
            return Err(PrefsError::InvalidSequence(format!(
                "rotate {rotate} outside 2..={k}"
            )));
        }
        if horizon < switches + 1 {
            return Err(PrefsError::InvalidSequence(format!(
                "horizon {horizon} too short for {switches} switches"
            )));
        }
        let segments = (0..=switches)
            .map(|j| {
                let start = 1 + j * horizon / (switches + 1);
                let winner = j % rotate;
                let m = match style {
                    GapStyle::Flat => flat_gap_matrix(k, winner, gap)?,
                    GapStyle::Ladder => ladder_matrix(k, winner, gap)?,
                };
                Ok((start, m))
            })
            .collect::<Result<Vec<_>, PrefsError>>()?;
        Self::piecewise(segments, horizon)
    }

    fn finish(horizon: usize, k: usize, kind: SequenceKind, cw: Vec<usize>) -> Self {
        let cw_switch_rounds = (2..=horizon)
            .filter(|&t| cw[t - 1] != cw[t - 2])
            .collect();
        PreferenceSequence {
            horizon,
            k,
            kind,
            cw,
            cw_switch_rounds,
            report_cache: OnceLock::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    /// The matrix in force at round `t` (1-based).
    pub fn matrix_at(&self, t: usize) -> Cow<'_, PreferenceMatrix> {
        assert!(t >= 1 && t <= self.horizon, "round {t} out of range");
        match &self.kind {
            SequenceKind::Explicit(mats) => Cow::Borrowed(&mats[t - 1]),
            SequenceKind::Piecewise(segs) => {
                let i = segs.partition_point(|(start, _)| *start <= t) - 1;
                Cow::Borrowed(&segs[i].1)
            }
            SequenceKind::Utility(model) => Cow::Owned(model.matrix_at(t)),
        }
    }

    pub fn prob_at(&self, t: usize, a: usize, b: usize) -> f64 {
        assert!(t >= 1 && t <= self.horizon, "round {t} out of range");
        match &self.kind {
            SequenceKind::Explicit(mats) => mats[t - 1].prob(a, b),
            SequenceKind::Piecewise(segs) => {
                let i = segs.partition_point(|(start, _)| *start <= t) - 1;
                segs[i].1.prob(a, b)
            }
            SequenceKind::Utility(model) => {
                if a == b {
                    return 0.5;
                }
                let u = model.utilities_at(t);
                model.link.apply(u[a] - u[b]).clamp(0.0, 1.0)
            }
        }
    }

    pub fn gap_at(&self, t: usize, a: usize, b: usize) -> f64 {
        self.prob_at(t, a, b) - 0.5
    }

    /// Condorcet winner at round `t` (1-based).
    pub fn cw_at(&self, t: usize) -> usize {
        assert!(t >= 1 && t <= self.horizon, "round {t} out of range");
        self.cw[t - 1]
    }

    /// Rounds `t >= 2` where the winner changed; its length is the
    /// winner-switch count of the sequence.
    pub fn cw_switch_rounds(&self) -> &[usize] {
        &self.cw_switch_rounds
    }

    pub fn sample_outcome_at<R: Rng + ?Sized>(
        &self,
        t: usize,
        a: usize,
        b: usize,
        rng: &mut R,
    ) -> u8 {
        u8::from(rng.gen::<f64>() < self.prob_at(t, a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn example_flip_matrices() -> (PreferenceMatrix, PreferenceMatrix) {
        let p1 = PreferenceMatrix::from_rows(vec![vec![0.5, 1.0], vec![0.0, 0.5]]).unwrap();
        let p2 = PreferenceMatrix::from_rows(vec![vec![0.5, 0.0], vec![1.0, 0.5]]).unwrap();
        (p1, p2)
    }

    #[test]
    fn validation_rejects_malformed_matrices() {
        // Row length mismatch.
        assert!(PreferenceMatrix::from_rows(vec![vec![0.5, 1.0], vec![0.0]]).is_err());
        // Complement broken.
        assert!(PreferenceMatrix::from_rows(vec![vec![0.5, 0.7], vec![0.4, 0.5]]).is_err());
        // Diagonal not 0.5.
        assert!(PreferenceMatrix::from_rows(vec![vec![0.6, 1.0], vec![0.0, 0.5]]).is_err());
        // Out of range.
        assert!(PreferenceMatrix::from_rows(vec![vec![0.5, 1.2], vec![-0.2, 0.5]]).is_err());
        // One arm.
        assert!(PreferenceMatrix::from_rows(vec![vec![0.5]]).is_err());
    }

    #[test]
    fn condorcet_winner_cases() {
        let (p1, _) = example_flip_matrices();
        assert_eq!(p1.condorcet_winner(), Some(0));
        assert_eq!(p1.gap(0, 1), 0.5);
        assert_eq!(p1.gap(1, 1), 0.0);
        assert_eq!(p1.gap(1, 0), -p1.gap(0, 1));

        let tie = PreferenceMatrix::from_rows(vec![
            vec![0.5, 0.5, 0.5],
            vec![0.5, 0.5, 0.5],
            vec![0.5, 0.5, 0.5],
        ])
        .unwrap();
        assert_eq!(tie.condorcet_winner(), None);

        let three = PreferenceMatrix::from_rows(vec![
            vec![0.5, 0.55, 0.55],
            vec![0.45, 0.5, 1.0],
            vec![0.45, 0.0, 0.5],
        ])
        .unwrap();
        assert_eq!(three.condorcet_winner(), Some(0));
    }

    #[test]
    fn winner_is_stable_under_relabeling() {
        let m = PreferenceMatrix::from_rows(vec![
            vec![0.5, 0.55, 0.55],
            vec![0.45, 0.5, 1.0],
            vec![0.45, 0.0, 0.5],
        ])
        .unwrap();
        let perm = [2, 0, 1];
        let pm = m.permuted(&perm);
        assert_eq!(pm.condorcet_winner(), Some(perm[m.condorcet_winner().unwrap()]));
        assert_eq!(pm.prob(perm[1], perm[2]), m.prob(1, 2));
    }

    #[test]
    fn outcome_sampling_tracks_probabilities() {
        let (p1, _) = example_flip_matrices();
        let mut rng = stream(11, "test", 0);
        assert!((0..200).all(|_| p1.sample_outcome(0, 1, &mut rng) == 1));
        assert!((0..200).all(|_| p1.sample_outcome(1, 0, &mut rng) == 0));

        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| f64::from(p1.sample_outcome(0, 0, &mut rng)))
            .sum::<f64>()
            / f64::from(n);
        assert!((mean - 0.5).abs() < 0.02, "diagonal mean {mean}");
    }

    #[test]
    fn transitivity_checks_distinguish_shapes() {
        // Two arms: no chains at all.
        let (p1, _) = example_flip_matrices();
        assert!(p1.check_sst() && p1.check_sti() && p1.check_triangle());

        // Cycle 0 > 1 > 2 > 0 breaks SST but not STI.
        let cycle = PreferenceMatrix::from_rows(vec![
            vec![0.5, 0.6, 0.4],
            vec![0.4, 0.5, 0.6],
            vec![0.6, 0.4, 0.5],
        ])
        .unwrap();
        assert!(!cycle.check_sst());
        assert!(cycle.check_sti());

        // Huge far-pair gap with tiny adjacent gaps breaks STI but not SST.
        let steep = PreferenceMatrix::from_rows(vec![
            vec![0.5, 0.51, 0.99],
            vec![0.49, 0.5, 0.51],
            vec![0.01, 0.49, 0.5],
        ])
        .unwrap();
        assert!(steep.check_sst());
        assert!(!steep.check_sti());
    }

    #[test]
    fn utility_links_generate_transitive_matrices() {
        for link in [LinkKind::Linear { scale: 1.0 }, LinkKind::Logistic { scale: 2.5 }] {
            let model = UtilityModel::new(vec![(1, vec![0.9, 0.4, 0.1, 0.55])], link).unwrap();
            let m = model.matrix_at(1);
            assert!(m.check_sst(), "{link:?}");
            assert!(m.check_sti(), "{link:?}");
            assert!(m.check_triangle(), "{link:?}");
            assert_eq!(m.condorcet_winner(), Some(0));
        }
    }

    #[test]
    fn linear_link_rejects_overflow() {
        let err = UtilityModel::new(vec![(1, vec![0.0, 2.0])], LinkKind::Linear { scale: 1.0 });
        assert!(err.is_err());
        // Rescaling the same utilities makes them valid.
        assert!(UtilityModel::new(vec![(1, vec![0.0, 2.0])], LinkKind::Linear { scale: 0.5 }).is_ok());
    }

    #[test]
    fn keyframe_interpolation_is_piecewise_linear() {
        let model = UtilityModel::new(
            vec![(1, vec![0.0, 1.0]), (11, vec![1.0, 0.0])],
            LinkKind::Linear { scale: 1.0 },
        )
        .unwrap();
        let u = model.utilities_at(5);
        assert!((u[0] - 0.4).abs() < 1e-12 && (u[1] - 0.6).abs() < 1e-12);
        // Clamped outside the keyframe span.
        assert_eq!(model.utilities_at(40), vec![1.0, 0.0]);

        // Utilities cross at round 6, so the drift has no winner there.
        let err = PreferenceSequence::utility_drift(model, 20);
        assert!(matches!(err, Err(PrefsError::NoCondorcetWinner { round: Some(6) })));
    }

    #[test]
    fn piecewise_sequence_resolves_rounds_to_segments() {
        let (p1, p2) = example_flip_matrices();
        let seq =
            PreferenceSequence::piecewise(vec![(1, p1.clone()), (6, p2.clone())], 10).unwrap();
        assert_eq!(seq.cw_at(1), 0);
        assert_eq!(seq.cw_at(5), 0);
        assert_eq!(seq.cw_at(6), 1);
        assert_eq!(seq.cw_at(10), 1);
        assert_eq!(seq.cw_switch_rounds(), &[6]);
        assert_eq!(seq.prob_at(5, 0, 1), 1.0);
        assert_eq!(seq.prob_at(6, 0, 1), 0.0);
        assert_eq!(&*seq.matrix_at(3), &p1);
        assert_eq!(&*seq.matrix_at(9), &p2);
    }

    #[test]
    fn stationary_sequence_never_switches() {
        let m = flat_gap_matrix(5, 2, 0.2).unwrap();
        let seq = PreferenceSequence::stationary(m, 500).unwrap();
        assert!(seq.cw_switch_rounds().is_empty());
        assert!((1..=500).all(|t| seq.cw_at(t) == 2));
    }

    #[test]
    fn scripted_rotation_places_switches_evenly() {
        let seq =
            PreferenceSequence::scripted_rotation(5, 100, 4, 0.3, GapStyle::Flat, 2).unwrap();
        assert_eq!(seq.cw_switch_rounds(), &[21, 41, 61, 81]);
        assert_eq!(
            (0..5).map(|j| seq.cw_at(1 + 20 * j)).collect::<Vec<_>>(),
            vec![0, 1, 0, 1, 0]
        );
        let full = PreferenceSequence::scripted_rotation(5, 100, 3, 0.3, GapStyle::Ladder, 5)
            .unwrap();
        assert_eq!(full.cw_switch_rounds().len(), 3);
        assert_eq!(
            (0..4).map(|j| full.cw_at(1 + 25 * j)).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn ladder_matrix_orders_all_pairs() {
        let m = ladder_matrix(4, 1, 0.3).unwrap();
        // Rank order: 1, 0, 2, 3.
        assert_eq!(m.condorcet_winner(), Some(1));
        assert_eq!(m.prob(1, 0), 0.8);
        assert!((m.prob(0, 2) - 0.8).abs() < 1e-12);
        assert_eq!(m.prob(1, 2), 1.0); // two rank steps, clamped from 1.1
        assert_eq!(m.prob(3, 1), 0.0);
        assert!(m.check_sst() && m.check_sti() && m.check_triangle());
    }

    #[test]
    fn matrix_serde_round_trips_and_validates() {
        let (p1, _) = example_flip_matrices();
        let json = serde_json::to_string(&p1).unwrap();
        assert_eq!(json, "[[0.5,1.0],[0.0,0.5]]");
        let back: PreferenceMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p1);
        let bad: Result<PreferenceMatrix, _> = serde_json::from_str("[[0.5,0.7],[0.4,0.5]]");
        assert!(bad.is_err());
    }
}
