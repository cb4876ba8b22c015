//! Adaptive elimination policy with randomly scheduled replays.
//!
//! The policy runs in episodes. An episode starting at round `t_ell` keeps a
//! good set (arms not yet proven bad since `t_ell`) and runs a root
//! procedure over the remaining horizon. The procedure plays uniform ordered
//! pairs from its own active set, eliminates arms from the good set using
//! estimate sums over the episode window `[t_ell, t)`, and at every round may
//! enter a scheduled child instance of itself with a fresh active set; on the
//! child's return it prunes its active set over its own window
//! `[t_start, t)`. When the good set empties, every instance unwinds and a
//! new episode begins.
//!
//! A child instance of duration `m` begins at round `s` with probability
//! `1 / sqrt(m (s - t_ell))`, independently for every `m` in
//! `{2, 4, ..., 2^ceil(log2 T)}`; when several durations fire at once the
//! largest wins. This schedule is what lets stale eliminations heal: a replay
//! restores every arm to play and can thus gather fresh evidence against an
//! arm the episode had wrongly retired, or against a former winner that has
//! since gone bad.
//!
//! The recursion is flattened into an explicit frame stack; each frame's
//! active-set pruning is deferred while a child runs, exactly like the
//! procedure call it replaces, and resumes (over the rounds played in
//! between) when the child pops. One extra rule makes the procedure total:
//! a frame whose active set empties pops immediately, since it has nothing
//! left to play. When the root frame pops this way the episode restarts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::armset::ArmSet;
use crate::baselines::{Policy, PolicyError};
use crate::estimator::{find_violation_in, DuelEvent, EstimateStore, Violation};
use crate::rng::{stream, unit_hash};

#[derive(Debug, thiserror::Error)]
pub enum AnacondaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("environment mismatch: {0}")]
    EnvMismatch(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Clone, Debug)]
pub struct AnacondaConfig {
    pub horizon: usize,
    pub arms: usize,
    /// Multiplier on the elimination threshold. Larger values make both
    /// good-set and active-set eliminations more conservative.
    pub elim_constant: f64,
    pub seed: u64,
    /// Extra replays injected at fixed `(start_round, duration)` points for
    /// diagnostics; they take precedence over the random schedule that round.
    pub forced_replays: Vec<(usize, usize)>,
    /// Record the per-round log (the bulk of a trace's memory).
    pub log_rounds: bool,
    /// Record replay-tree nodes.
    pub log_replay_tree: bool,
}

impl AnacondaConfig {
    pub fn new(horizon: usize, arms: usize, seed: u64) -> Self {
        AnacondaConfig {
            horizon,
            arms,
            elim_constant: 1.0,
            seed,
            forced_replays: Vec::new(),
            log_rounds: true,
            log_replay_tree: true,
        }
    }

    pub fn validate(&self) -> Result<(), AnacondaError> {
        if self.horizon < 2 {
            return Err(AnacondaError::InvalidConfig(format!(
                "horizon {} must be at least 2",
                self.horizon
            )));
        }
        if self.arms < 2 || self.arms > ArmSet::MAX_ARMS {
            return Err(AnacondaError::InvalidConfig(format!(
                "arm count {} outside 2..={}",
                self.arms,
                ArmSet::MAX_ARMS
            )));
        }
        if !self.elim_constant.is_finite() || self.elim_constant <= 0.0 {
            return Err(AnacondaError::InvalidConfig(format!(
                "elimination constant {} must be positive",
                self.elim_constant
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Replay schedule
// ---------------------------------------------------------------------------

/// Counter-based view of the replay indicators. The indicator for
/// `(episode, s, m)` is a pure function of the seed and those labels, so
/// repeated queries agree without memoization and the schedule costs no
/// per-episode state.
#[derive(Clone, Copy, Debug)]
pub struct ReplaySchedule {
    seed: u64,
    horizon: usize,
}

impl ReplaySchedule {
    pub fn new(seed: u64, horizon: usize) -> Self {
        ReplaySchedule { seed, horizon }
    }

    /// Largest duration in the grid, `2^ceil(log2 T)`.
    pub fn max_duration(&self) -> usize {
        self.horizon.next_power_of_two().max(2)
    }

    /// The indicator for a replay of duration `m` starting at round `s` of
    /// the episode beginning at `t_ell`: Bernoulli `1/sqrt(m (s - t_ell))`.
    pub fn query(&self, episode: usize, t_ell: usize, s: usize, m: usize) -> bool {
        debug_assert!(s > t_ell && s <= self.horizon);
        debug_assert!(m.is_power_of_two() && (2..=self.max_duration()).contains(&m));
        let p = 1.0 / ((m * (s - t_ell)) as f64).sqrt();
        unit_hash(self.seed, "schedule", &[episode as u64, s as u64, m as u64]) < p
    }

    /// Largest scheduled duration at round `s`, if any fired.
    pub fn max_scheduled(&self, episode: usize, t_ell: usize, s: usize) -> Option<usize> {
        let mut m = self.max_duration();
        while m >= 2 {
            if self.query(episode, t_ell, s, m) {
                return Some(m);
            }
            m /= 2;
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RoundLog {
    pub t: usize,
    pub first: usize,
    pub second: usize,
    pub outcome: u8,
    pub active_size: usize,
    /// Replay nesting depth; 0 means the episode's root.
    pub depth: usize,
    pub episode: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ElimOrigin {
    /// Removed from the episode's good set (window `[t_ell, t)`).
    Good,
    /// Removed from a frame's active set (window `[t_start, t)`).
    Active,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Elimination {
    /// Round at which the removal was decided (the witness ends earlier).
    pub round: usize,
    pub arm: usize,
    pub origin: ElimOrigin,
    /// Frame performing the scan (innermost frame for good-set removals).
    pub frame: usize,
    pub window_start: usize,
    pub witness: Violation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayNode {
    pub id: usize,
    /// `None` for an episode's root frame.
    pub parent: Option<usize>,
    pub start: usize,
    pub scheduled_len: usize,
    pub episode: usize,
}

/// Everything a run leaves behind.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PolicyTrace {
    /// Start round of each episode; the first entry is 1.
    pub episodes: Vec<usize>,
    pub rounds: Vec<RoundLog>,
    pub eliminations: Vec<Elimination>,
    pub replays: Vec<ReplayNode>,
}

// ---------------------------------------------------------------------------
// Policy state
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
struct Frame {
    id: usize,
    start: usize,
    duration: usize,
    active: ArmSet,
    /// Active set saved before the round's increment; the base for pruning.
    saved: ArmSet,
    /// Largest right endpoint already scanned by this frame's pruning.
    checked: usize,
}

/// The adaptive policy as an incremental state machine: `select_pair` then
/// `observe` exactly once per round, in round order.
pub struct Anaconda {
    cfg: AnacondaConfig,
    schedule: ReplaySchedule,
    pair_rng: ChaCha8Rng,
    store: EstimateStore,
    t: usize,
    episode: usize,
    t_ell: usize,
    a_good: ArmSet,
    good_checked: usize,
    frames: Vec<Frame>,
    next_frame_id: usize,
    pending: Option<(usize, usize)>,
    trace: PolicyTrace,
}

impl Anaconda {
    pub fn new(cfg: AnacondaConfig) -> Result<Self, AnacondaError> {
        cfg.validate()?;
        let schedule = ReplaySchedule::new(cfg.seed, cfg.horizon);
        let pair_rng = stream(cfg.seed, "pairs", 0);
        let store = EstimateStore::new(cfg.arms);
        let mut pol = Anaconda {
            cfg,
            schedule,
            pair_rng,
            store,
            t: 1,
            episode: 0,
            t_ell: 1,
            a_good: ArmSet::empty(),
            good_checked: 0,
            frames: Vec::new(),
            next_frame_id: 0,
            pending: None,
            trace: PolicyTrace::default(),
        };
        pol.start_episode(1);
        Ok(pol)
    }

    pub fn config(&self) -> &AnacondaConfig {
        &self.cfg
    }

    pub fn good_set(&self) -> ArmSet {
        self.a_good
    }

    pub fn active_set(&self) -> ArmSet {
        self.frames.last().map_or(ArmSet::empty(), |f| f.active)
    }

    pub fn current_episode(&self) -> usize {
        self.episode
    }

    pub fn frame_depth(&self) -> usize {
        self.frames.len()
    }

    pub fn trace(&self) -> &PolicyTrace {
        &self.trace
    }

    pub fn into_trace(self) -> PolicyTrace {
        self.trace
    }

    fn start_episode(&mut self, t_ell: usize) {
        self.t_ell = t_ell;
        self.a_good = ArmSet::full(self.cfg.arms);
        self.good_checked = t_ell - 1;
        self.trace.episodes.push(t_ell);
        // Root frame spans the whole remaining horizon: its duration bound
        // t <= t_ell + (T + 1 - t_ell) can never trip while t <= T.
        self.push_frame(t_ell, self.cfg.horizon + 1 - t_ell, None);
    }

    fn push_frame(&mut self, start: usize, duration: usize, parent: Option<usize>) {
        let id = self.next_frame_id;
        self.next_frame_id += 1;
        let full = ArmSet::full(self.cfg.arms);
        self.frames.push(Frame { id, start, duration, active: full, saved: full, checked: start - 1 });
        if self.cfg.log_replay_tree {
            self.trace.replays.push(ReplayNode {
                id,
                parent,
                start,
                scheduled_len: duration,
                episode: self.episode,
            });
        }
    }

    /// Two independent uniform draws (ordered, with replacement) from the
    /// innermost active set.
    pub fn select_pair_checked(&mut self, t: usize) -> Result<(usize, usize), PolicyError> {
        if t != self.t || self.t > self.cfg.horizon {
            return Err(PolicyError::RoundMismatch { expected: self.t, got: t });
        }
        let f = self
            .frames
            .last()
            .ok_or(PolicyError::EmptyActiveSet { t: self.t })?;
        if f.active.is_empty() {
            return Err(PolicyError::EmptyActiveSet { t: self.t });
        }
        let n = f.active.len();
        let i = self.pair_rng.gen_range(0..n);
        let j = self.pair_rng.gen_range(0..n);
        let pair = (f.active.nth(i), f.active.nth(j));
        self.pending = Some(pair);
        Ok(pair)
    }

    /// Consumes the round's outcome and advances the state machine: record,
    /// good-set elimination, save, increment, child entry, active-set
    /// pruning, and any frame pops (each running its parent's deferred
    /// pruning), possibly rolling over into a new episode.
    pub fn observe_outcome(&mut self, t: usize, outcome: u8) -> Result<(), PolicyError> {
        if t != self.t {
            return Err(PolicyError::RoundMismatch { expected: self.t, got: t });
        }
        let (first, second) = self
            .pending
            .take()
            .ok_or(PolicyError::NoPendingPair { t })?;
        let depth = self.frames.len() - 1;
        let active_size = self.frames.last().expect("frame exists mid-round").active.len();
        self.store
            .record(&DuelEvent { t, first, second, outcome, active_size })
            .expect("rounds strictly increase");
        if self.cfg.log_rounds {
            self.trace.rounds.push(RoundLog {
                t,
                first,
                second,
                outcome,
                active_size,
                depth,
                episode: self.episode,
            });
        }

        // Good-set elimination over the episode window [t_ell, t); only the
        // newly completed endpoint t-1 is unscanned.
        self.eliminate_from_good();

        // Save the active set, then advance time.
        let f = self.frames.last_mut().expect("frame exists mid-round");
        f.saved = f.active;
        self.t += 1;

        // Child entry at the incremented round. Forced replays trump the
        // random schedule; a child consumes this round's indicators, and the
        // parent's pruning waits until the child pops.
        let mut spawned = false;
        if self.t <= self.cfg.horizon {
            let forced = self
                .cfg
                .forced_replays
                .iter()
                .filter(|(s, _)| *s == self.t)
                .map(|(_, m)| *m)
                .max();
            let scheduled = forced.or_else(|| {
                self.schedule
                    .max_scheduled(self.episode, self.t_ell, self.t)
            });
            if let Some(m) = scheduled {
                let parent = self.frames.last().map(|fr| fr.id);
                self.push_frame(self.t, m, parent);
                spawned = true;
            }
        }
        if !spawned {
            self.prune_innermost();
        }
        self.settle();
        Ok(())
    }

    fn eliminate_from_good(&mut self) {
        let s2_hi = self.t - 1;
        let s2_lo = self.good_checked + 1;
        if s2_lo > s2_hi {
            return;
        }
        let frame_id = self.frames.last().expect("frame exists mid-round").id;
        for arm in self.a_good.iter() {
            if let Some(witness) = find_violation_in(
                &self.store,
                arm,
                self.t_ell,
                s2_lo,
                s2_hi,
                self.cfg.horizon,
                self.cfg.elim_constant,
            ) {
                self.a_good.remove(arm);
                self.trace.eliminations.push(Elimination {
                    round: self.t,
                    arm,
                    origin: ElimOrigin::Good,
                    frame: frame_id,
                    window_start: self.t_ell,
                    witness,
                });
            }
        }
        self.good_checked = s2_hi;
    }

    /// The innermost frame rebuilds its active set from the saved one minus
    /// arms violating over `[t_start, t)`. Endpoints up to `checked` were
    /// scanned in this frame's earlier iterations.
    fn prune_innermost(&mut self) {
        let frame = *self.frames.last().expect("pruning requires a frame");
        let s2_hi = self.t - 1;
        let s2_lo = frame.checked + 1;
        let mut active = frame.saved;
        if s2_lo <= s2_hi {
            for arm in frame.saved.iter() {
                if let Some(witness) = find_violation_in(
                    &self.store,
                    arm,
                    frame.start,
                    s2_lo,
                    s2_hi,
                    self.cfg.horizon,
                    self.cfg.elim_constant,
                ) {
                    active.remove(arm);
                    self.trace.eliminations.push(Elimination {
                        round: self.t,
                        arm,
                        origin: ElimOrigin::Active,
                        frame: frame.id,
                        window_start: frame.start,
                        witness,
                    });
                }
            }
        }
        let f = self.frames.last_mut().expect("pruning requires a frame");
        f.active = active;
        f.checked = s2_hi;
    }

    /// Pops frames whose loop condition fails, running each parent's deferred
    /// pruning as the call returns to it. When the root pops, either a new
    /// episode starts at the current round or the run is over.
    fn settle(&mut self) {
        loop {
            match self.frames.last() {
                None => {
                    if self.t > self.cfg.horizon {
                        return;
                    }
                    self.episode += 1;
                    self.start_episode(self.t);
                }
                Some(f) => {
                    let runs = self.t <= self.cfg.horizon
                        && self.t <= f.start + f.duration
                        && !self.a_good.is_empty()
                        && !f.active.is_empty();
                    if runs {
                        return;
                    }
                    self.frames.pop();
                    if !self.frames.is_empty() {
                        self.prune_innermost();
                    }
                }
            }
        }
    }
}

impl Policy for Anaconda {
    fn select_pair(&mut self, t: usize) -> Result<(usize, usize), PolicyError> {
        self.select_pair_checked(t)
    }

    fn observe(&mut self, t: usize, outcome: u8) -> Result<(), PolicyError> {
        self.observe_outcome(t, outcome)
    }

    fn finish(&mut self) -> PolicyTrace {
        std::mem::take(&mut self.trace)
    }
}

/// Runs the policy against an environment for its whole horizon. Outcome
/// draws come from the run's "env" stream, one per round; pair draws come
/// from the policy's own stream, so the two never interleave.
pub fn run(
    cfg: &AnacondaConfig,
    env: &crate::prefs::PreferenceSequence,
) -> Result<PolicyTrace, AnacondaError> {
    if env.horizon() != cfg.horizon {
        return Err(AnacondaError::EnvMismatch(format!(
            "environment horizon {} != configured {}",
            env.horizon(),
            cfg.horizon
        )));
    }
    if env.arms() != cfg.arms {
        return Err(AnacondaError::EnvMismatch(format!(
            "environment has {} arms, configured {}",
            env.arms(),
            cfg.arms
        )));
    }
    let mut pol = Anaconda::new(cfg.clone())?;
    let mut env_rng = stream(cfg.seed, "env", 0);
    for t in 1..=cfg.horizon {
        let (a, b) = pol.select_pair_checked(t)?;
        let o = env.sample_outcome_at(t, a, b, &mut env_rng);
        pol.observe_outcome(t, o)?;
    }
    Ok(pol.into_trace())
}
