//! Comparison policies sharing the adaptive policy's estimator and
//! elimination rule, so regret differences isolate the replay and episode
//! machinery rather than the statistics.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::anaconda::{ElimOrigin, Elimination, PolicyTrace, ReplayNode, RoundLog};
use crate::armset::ArmSet;
use crate::estimator::{find_violation_in, DuelEvent, EstimateStore};
use crate::rng::stream;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("no playable arm at round {t}")]
    EmptyActiveSet { t: usize },
    #[error("driver is at round {got}, policy at round {expected}")]
    RoundMismatch { expected: usize, got: usize },
    #[error("observe at round {t} without a selected pair")]
    NoPendingPair { t: usize },
}

/// One ordered pair per round, then its outcome. Implementations are
/// deterministic given their seed and the observed history.
pub trait Policy {
    fn select_pair(&mut self, t: usize) -> Result<(usize, usize), PolicyError>;
    fn observe(&mut self, t: usize, outcome: u8) -> Result<(), PolicyError>;
    /// Surrenders the accumulated trace; the policy is spent afterwards.
    fn finish(&mut self) -> PolicyTrace;
}

// ---------------------------------------------------------------------------
// Uniform random play
// ---------------------------------------------------------------------------

/// Plays a uniform independent ordered pair every round and learns nothing.
pub struct UniformRandom {
    arms: usize,
    rng: ChaCha8Rng,
    t: usize,
    pending: Option<(usize, usize)>,
    log_rounds: bool,
    trace: PolicyTrace,
}

impl UniformRandom {
    pub fn new(arms: usize, seed: u64) -> Self {
        assert!((2..=ArmSet::MAX_ARMS).contains(&arms), "arm count {arms} outside 2..=64");
        let mut trace = PolicyTrace::default();
        trace.episodes.push(1);
        UniformRandom {
            arms,
            rng: stream(seed, "pairs", 0),
            t: 1,
            pending: None,
            log_rounds: true,
            trace,
        }
    }

    pub fn log_rounds(mut self, on: bool) -> Self {
        self.log_rounds = on;
        self
    }
}

impl Policy for UniformRandom {
    fn select_pair(&mut self, t: usize) -> Result<(usize, usize), PolicyError> {
        if t != self.t {
            return Err(PolicyError::RoundMismatch { expected: self.t, got: t });
        }
        let a = self.rng.gen_range(0..self.arms);
        let b = self.rng.gen_range(0..self.arms);
        self.pending = Some((a, b));
        Ok((a, b))
    }

    fn observe(&mut self, t: usize, outcome: u8) -> Result<(), PolicyError> {
        if t != self.t {
            return Err(PolicyError::RoundMismatch { expected: self.t, got: t });
        }
        let (first, second) = self.pending.take().ok_or(PolicyError::NoPendingPair { t })?;
        if self.log_rounds {
            self.trace.rounds.push(RoundLog {
                t,
                first,
                second,
                outcome,
                active_size: self.arms,
                depth: 0,
                episode: 0,
            });
        }
        self.t += 1;
        Ok(())
    }

    fn finish(&mut self) -> PolicyTrace {
        std::mem::take(&mut self.trace)
    }
}

// ---------------------------------------------------------------------------
// Restarted elimination
// ---------------------------------------------------------------------------

/// Single-frame elimination: uniform pairs from an active set, arms removed
/// by the violation rule over the window since the last restart, the active
/// set reset to all arms at each scheduled restart round. No replays, so a
/// stale elimination only heals at the next restart. If the active set ever
/// empties on its own, a fresh segment starts at the next round; that keeps
/// every round playable.
pub struct RestartElimination {
    arms: usize,
    horizon: usize,
    elim_constant: f64,
    restarts: Vec<usize>,
    next_restart: usize,
    store: EstimateStore,
    rng: ChaCha8Rng,
    t: usize,
    segment_start: usize,
    segment_index: usize,
    active: ArmSet,
    checked: usize,
    pending: Option<(usize, usize)>,
    log_rounds: bool,
    trace: PolicyTrace,
}

impl RestartElimination {
    /// Restarts at the supplied rounds (strictly increasing, each in 2..=T).
    /// Feeding it an environment's true switch rounds makes it the
    /// known-change-points comparison policy.
    pub fn oracle_restart(
        arms: usize,
        horizon: usize,
        elim_constant: f64,
        seed: u64,
        switch_rounds: &[usize],
    ) -> Self {
        for w in switch_rounds.windows(2) {
            assert!(w[0] < w[1], "restart rounds must be strictly increasing");
        }
        if let (Some(&first), Some(&last)) = (switch_rounds.first(), switch_rounds.last()) {
            assert!(first >= 2 && last <= horizon, "restart rounds must lie in 2..=T");
        }
        Self::with_restarts(arms, horizon, elim_constant, seed, switch_rounds.to_vec())
    }

    /// Restarts every `ceil(T / (num_restarts + 1))` rounds, evenly spaced
    /// and blind to where the environment actually changes.
    pub fn fixed_budget_restart(
        arms: usize,
        horizon: usize,
        elim_constant: f64,
        seed: u64,
        num_restarts: usize,
    ) -> Self {
        let period = horizon.div_ceil(num_restarts + 1);
        let restarts: Vec<usize> = (1..)
            .map(|j| 1 + j * period)
            .take_while(|&r| r <= horizon)
            .collect();
        Self::with_restarts(arms, horizon, elim_constant, seed, restarts)
    }

    fn with_restarts(
        arms: usize,
        horizon: usize,
        elim_constant: f64,
        seed: u64,
        restarts: Vec<usize>,
    ) -> Self {
        assert!((2..=ArmSet::MAX_ARMS).contains(&arms), "arm count {arms} outside 2..=64");
        assert!(horizon >= 2, "horizon {horizon} must be at least 2");
        assert!(
            elim_constant.is_finite() && elim_constant > 0.0,
            "elimination constant must be positive"
        );
        let mut trace = PolicyTrace::default();
        trace.episodes.push(1);
        trace.replays.push(ReplayNode {
            id: 0,
            parent: None,
            start: 1,
            scheduled_len: restarts.first().map_or(horizon, |&r| r - 1),
            episode: 0,
        });
        RestartElimination {
            arms,
            horizon,
            elim_constant,
            restarts,
            next_restart: 0,
            store: EstimateStore::new(arms),
            rng: stream(seed, "pairs", 0),
            t: 1,
            segment_start: 1,
            segment_index: 0,
            active: ArmSet::full(arms),
            checked: 0,
            pending: None,
            log_rounds: true,
            trace,
        }
    }

    pub fn log_rounds(mut self, on: bool) -> Self {
        self.log_rounds = on;
        self
    }

    pub fn restart_rounds(&self) -> &[usize] {
        &self.restarts
    }

    fn reset_segment(&mut self, start: usize) {
        self.segment_start = start;
        self.active = ArmSet::full(self.arms);
        self.checked = start - 1;
        if self.trace.episodes.last() != Some(&start) {
            self.segment_index += 1;
            self.trace.episodes.push(start);
            let next = self
                .restarts
                .iter()
                .find(|&&r| r > start)
                .copied()
                .unwrap_or(self.horizon + 1);
            self.trace.replays.push(ReplayNode {
                id: self.segment_index,
                parent: None,
                start,
                scheduled_len: next - start,
                episode: self.segment_index,
            });
        }
    }
}

impl Policy for RestartElimination {
    fn select_pair(&mut self, t: usize) -> Result<(usize, usize), PolicyError> {
        if t != self.t {
            return Err(PolicyError::RoundMismatch { expected: self.t, got: t });
        }
        while self.next_restart < self.restarts.len() && self.restarts[self.next_restart] <= t {
            if self.restarts[self.next_restart] == t {
                self.reset_segment(t);
            }
            self.next_restart += 1;
        }
        if self.active.is_empty() {
            return Err(PolicyError::EmptyActiveSet { t });
        }
        let n = self.active.len();
        let i = self.rng.gen_range(0..n);
        let j = self.rng.gen_range(0..n);
        let pair = (self.active.nth(i), self.active.nth(j));
        self.pending = Some(pair);
        Ok(pair)
    }

    fn observe(&mut self, t: usize, outcome: u8) -> Result<(), PolicyError> {
        if t != self.t {
            return Err(PolicyError::RoundMismatch { expected: self.t, got: t });
        }
        let (first, second) = self.pending.take().ok_or(PolicyError::NoPendingPair { t })?;
        let active_size = self.active.len();
        self.store
            .record(&DuelEvent { t, first, second, outcome, active_size })
            .expect("rounds strictly increase");
        if self.log_rounds {
            self.trace.rounds.push(RoundLog {
                t,
                first,
                second,
                outcome,
                active_size,
                depth: 0,
                episode: self.segment_index,
            });
        }
        self.t += 1;

        // Prune over [segment_start, t) with t already advanced, matching the
        // adaptive policy's post-increment scan.
        let s2_hi = self.t - 1;
        let s2_lo = self.checked + 1;
        if s2_lo <= s2_hi {
            for arm in self.active.iter() {
                if let Some(witness) = find_violation_in(
                    &self.store,
                    arm,
                    self.segment_start,
                    s2_lo,
                    s2_hi,
                    self.horizon,
                    self.elim_constant,
                ) {
                    self.active.remove(arm);
                    self.trace.eliminations.push(Elimination {
                        round: self.t,
                        arm,
                        origin: ElimOrigin::Active,
                        frame: self.segment_index,
                        window_start: self.segment_start,
                        witness,
                    });
                }
            }
        }
        self.checked = s2_hi;
        if self.active.is_empty() && self.t <= self.horizon {
            self.reset_segment(self.t);
        }
        Ok(())
    }

    fn finish(&mut self) -> PolicyTrace {
        std::mem::take(&mut self.trace)
    }
}
