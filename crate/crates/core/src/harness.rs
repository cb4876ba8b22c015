//! Experiment execution: exact expected-regret accounting, seed sweeps with
//! scaling fits, and a Monte Carlo check of the estimator's deviation bound.
//!
//! Regret is charged in expectation from the true preference matrix rather
//! than from sampled losses, so a run's regret curve is a deterministic
//! function of the played pairs and carries no sampling variance of its own.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

use crate::anaconda::{Anaconda, AnacondaConfig, AnacondaError, PolicyTrace};
use crate::baselines::{Policy, PolicyError, RestartElimination, UniformRandom};
use crate::measures::MeasureReport;
use crate::prefs::{PreferenceMatrix, PreferenceSequence, PrefsError};
use crate::rng::stream;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Prefs(#[from] PrefsError),
    #[error(transparent)]
    Anaconda(#[from] AnacondaError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Which policy to run; constructed fresh per (env, seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Anaconda { elim_constant: f64 },
    UniformRandom,
    /// Restarts at the environment's true switch rounds.
    OracleRestart { elim_constant: f64 },
    FixedBudgetRestart { elim_constant: f64, num_restarts: usize },
}

pub fn build_policy(
    spec: &PolicySpec,
    env: &PreferenceSequence,
    seed: u64,
    log_rounds: bool,
) -> Result<Box<dyn Policy + Send>, RunError> {
    let pol: Box<dyn Policy + Send> = match spec {
        PolicySpec::Anaconda { elim_constant } => {
            let cfg = AnacondaConfig {
                elim_constant: *elim_constant,
                log_rounds,
                ..AnacondaConfig::new(env.horizon(), env.arms(), seed)
            };
            Box::new(Anaconda::new(cfg)?)
        }
        PolicySpec::UniformRandom => Box::new(UniformRandom::new(env.arms(), seed).log_rounds(log_rounds)),
        PolicySpec::OracleRestart { elim_constant } => Box::new(
            RestartElimination::oracle_restart(
                env.arms(),
                env.horizon(),
                *elim_constant,
                seed,
                env.cw_switch_rounds(),
            )
            .log_rounds(log_rounds),
        ),
        PolicySpec::FixedBudgetRestart { elim_constant, num_restarts } => Box::new(
            RestartElimination::fixed_budget_restart(
                env.arms(),
                env.horizon(),
                *elim_constant,
                seed,
                *num_restarts,
            )
            .log_rounds(log_rounds),
        ),
    };
    Ok(pol)
}

// ---------------------------------------------------------------------------
// Regret
// ---------------------------------------------------------------------------

/// Expected instantaneous regret of playing the ordered pair: the mean of the
/// winner's gaps to both played arms, computed from the true matrix.
pub fn regret_increment(
    matrix: &PreferenceMatrix,
    first: usize,
    second: usize,
) -> Result<f64, PrefsError> {
    let cw = matrix
        .condorcet_winner()
        .ok_or(PrefsError::NoCondorcetWinner { round: None })?;
    Ok((matrix.gap(cw, first) + matrix.gap(cw, second)) / 2.0)
}

fn regret_increment_at(env: &PreferenceSequence, t: usize, first: usize, second: usize) -> f64 {
    let cw = env.cw_at(t);
    (env.gap_at(t, cw, first) + env.gap_at(t, cw, second)) / 2.0
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Expected regret charged at each round, in `[0, 1/2]`.
    pub increments: Vec<f64>,
    /// Running prefix sums of `increments`.
    pub cumulative: Vec<f64>,
    pub trace: PolicyTrace,
    /// Non-stationarity measures of the environment the run faced.
    pub measures: MeasureReport,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn total_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

pub fn run_single(
    env: &PreferenceSequence,
    spec: &PolicySpec,
    seed: u64,
) -> Result<RunRecord, RunError> {
    run_with(env, spec, seed, true)
}

/// As `run_single`, with control over per-round trace logging (the bulk of a
/// record's memory; sweeps turn it off).
pub fn run_with(
    env: &PreferenceSequence,
    spec: &PolicySpec,
    seed: u64,
    log_rounds: bool,
) -> Result<RunRecord, RunError> {
    let started = Instant::now();
    let horizon = env.horizon();
    let mut policy = build_policy(spec, env, seed, log_rounds)?;
    let mut env_rng = stream(seed, "env", 0);
    let mut increments = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon);
    let mut total = 0.0;
    for t in 1..=horizon {
        let (a, b) = policy.select_pair(t)?;
        let o = env.sample_outcome_at(t, a, b, &mut env_rng);
        policy.observe(t, o)?;
        let r = regret_increment_at(env, t, a, b);
        debug_assert!((0.0..=0.5).contains(&r));
        total += r;
        increments.push(r);
        cumulative.push(total);
    }
    Ok(RunRecord {
        seed,
        increments,
        cumulative,
        trace: policy.finish(),
        measures: (*env.measure_report()).clone(),
        wall_time: started.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One labeled environment in a sweep grid.
pub struct SweepEnv {
    pub label: String,
    pub env: PreferenceSequence,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub label: String,
    /// Winner switches of the environment, from generator ground truth.
    pub switches: usize,
    pub horizon: usize,
    pub arms: usize,
    pub seeds: Vec<u64>,
    /// Final cumulative regret per seed, in seed order.
    pub regrets: Vec<f64>,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_episodes: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// Least-squares slope of `ln(mean regret)` against `ln(switches + 1)`,
    /// when at least two cells with distinct switch counts exist.
    pub slope_vs_switches: Option<f64>,
}

/// Runs every (environment, seed) combination in parallel and aggregates in
/// index order, so results are independent of scheduling. Seeds are
/// `base_seed..base_seed + num_seeds`, shared across cells.
pub fn run_sweep(
    envs: &[SweepEnv],
    spec: &PolicySpec,
    base_seed: u64,
    num_seeds: usize,
) -> Result<SweepResult, RunError> {
    if num_seeds < 2 {
        return Err(RunError::InvalidSweep(format!(
            "need at least 2 seeds for a standard error, got {num_seeds}"
        )));
    }
    if envs.is_empty() {
        return Err(RunError::InvalidSweep("no environments given".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..envs.len())
        .flat_map(|c| (0..num_seeds as u64).map(move |s| (c, base_seed + s)))
        .collect();
    let outcomes: Vec<Result<(f64, usize), RunError>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let rec = run_with(&envs[c].env, spec, seed, false)?;
            Ok((rec.total_regret(), rec.trace.episodes.len()))
        })
        .collect();

    let mut cells = Vec::with_capacity(envs.len());
    let mut it = jobs.iter().zip(outcomes);
    for (c, sweep_env) in envs.iter().enumerate() {
        let mut regrets = Vec::with_capacity(num_seeds);
        let mut seeds = Vec::with_capacity(num_seeds);
        let mut episodes = 0usize;
        for _ in 0..num_seeds {
            let (&(jc, seed), outcome) = it.next().expect("job per (cell, seed)");
            debug_assert_eq!(jc, c);
            let (regret, eps) = outcome?;
            seeds.push(seed);
            regrets.push(regret);
            episodes += eps;
        }
        let mean = regrets.iter().sum::<f64>() / num_seeds as f64;
        let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (num_seeds - 1) as f64;
        cells.push(SweepCell {
            label: sweep_env.label.clone(),
            switches: sweep_env.env.cw_switch_rounds().len(),
            horizon: sweep_env.env.horizon(),
            arms: sweep_env.env.arms(),
            seeds,
            regrets,
            mean_regret: mean,
            stderr_regret: (var / num_seeds as f64).sqrt(),
            mean_episodes: episodes as f64 / num_seeds as f64,
        });
    }
    let slope = slope_vs_switches(&cells);
    Ok(SweepResult { cells, slope_vs_switches: slope })
}

/// Least-squares slope through `(x, y)` points. Needs two distinct `x`.
pub fn scaling_fit(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2, "need at least two points");
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    assert!(sxx > 0.0, "x values must not all coincide");
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

fn slope_vs_switches(cells: &[SweepCell]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.mean_regret > 0.0)
        .map(|c| (((c.switches + 1) as f64).ln(), c.mean_regret.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let x0 = pts[0].0;
    if pts.iter().all(|p| p.0 == x0) {
        return None;
    }
    Some(scaling_fit(&pts))
}

// ---------------------------------------------------------------------------
// Concentration suite
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationSummary {
    pub horizon: usize,
    pub arms: usize,
    pub c1: f64,
    pub trials: usize,
    pub violating_trials: usize,
    pub frequency: f64,
}

/// Monte Carlo check of the estimator's deviation bound under stationary
/// uniform play over the full arm set: a trial fails if any ordered pair and
/// any dyadic-grid window has
/// `|sum of estimates - sum of true gaps| > c1 ln(T) (K sqrt(len) + K^2)`,
/// with `len` the window length minus one. The grid stands in for the full
/// quadratic family of windows the bound quantifies over.
pub fn concentration_suite(
    matrix: &PreferenceMatrix,
    horizon: usize,
    c1: f64,
    trials: usize,
    base_seed: u64,
) -> ConcentrationSummary {
    assert!(horizon >= 2 && trials >= 1);
    assert!(c1 >= 0.0 && c1.is_finite());
    let violating = (0..trials)
        .into_par_iter()
        .filter(|&trial| concentration_trial_violates(matrix, horizon, c1, base_seed, trial as u64))
        .count();
    ConcentrationSummary {
        horizon,
        arms: matrix.arms(),
        c1,
        trials,
        violating_trials: violating,
        frequency: violating as f64 / trials as f64,
    }
}

fn concentration_trial_violates(
    matrix: &PreferenceMatrix,
    horizon: usize,
    c1: f64,
    base_seed: u64,
    trial: u64,
) -> bool {
    use rand::Rng;
    let k = matrix.arms();
    let mut env_rng = stream(base_seed, "conc-env", trial);
    let mut pair_rng = stream(base_seed, "conc-pairs", trial);
    // Positive-outcome counts per ordered pair, prefix-summed over rounds.
    let mut cum = vec![0u32; k * k * (horizon + 1)];
    let at = |p: usize, t: usize| p * (horizon + 1) + t;
    for t in 1..=horizon {
        let a = pair_rng.gen_range(0..k);
        let b = pair_rng.gen_range(0..k);
        let o = matrix.sample_outcome(a, b, &mut env_rng);
        for p in 0..k * k {
            cum[at(p, t)] = cum[at(p, t - 1)];
        }
        if o == 1 {
            cum[at(a * k + b, t)] += 1;
        }
    }

    let w = (k * k) as f64;
    let lnt = (horizon as f64).ln();
    let mut block = 2usize;
    while block <= horizon {
        let len = (block - 1) as f64;
        let bound = c1 * lnt * (k as f64 * len.sqrt() + w);
        let mut s1 = 1;
        while s1 + block - 1 <= horizon {
            let s2 = s1 + block - 1;
            for a in 0..k {
                for b in 0..k {
                    let p = a * k + b;
                    let pos = f64::from(cum[at(p, s2)] - cum[at(p, s1 - 1)]);
                    let est = w * pos - block as f64 * 0.5;
                    let truth = block as f64 * matrix.gap(a, b);
                    if (est - truth).abs() > bound {
                        return true;
                    }
                }
            }
            s1 += block;
        }
        block *= 2;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefs::{flat_gap_matrix, GapStyle, PreferenceMatrix};

    fn two_arm_sure_winner() -> PreferenceMatrix {
        PreferenceMatrix::from_rows(vec![vec![0.5, 1.0], vec![0.0, 0.5]]).unwrap()
    }

    #[test]
    fn regret_increment_cases() {
        let m = two_arm_sure_winner();
        assert_eq!(regret_increment(&m, 0, 0).unwrap(), 0.0);
        assert_eq!(regret_increment(&m, 1, 1).unwrap(), 0.5);
        let m = flat_gap_matrix(4, 1, 0.3).unwrap();
        assert!((regret_increment(&m, 1, 3).unwrap() - 0.15).abs() < 1e-15);
        // A cyclic matrix has no winner to charge against.
        let cycle = PreferenceMatrix::from_rows(vec![
            vec![0.5, 0.6, 0.4],
            vec![0.4, 0.5, 0.6],
            vec![0.6, 0.4, 0.5],
        ])
        .unwrap();
        assert!(regret_increment(&cycle, 0, 1).is_err());
    }

    #[test]
    fn regret_is_permutation_equivariant() {
        let m = flat_gap_matrix(5, 2, 0.25).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let pm = m.permuted(&perm);
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(
                    regret_increment(&m, a, b).unwrap(),
                    regret_increment(&pm, perm[a], perm[b]).unwrap()
                );
            }
        }
    }

    #[test]
    fn measures_are_permutation_invariant() {
        let seq = PreferenceSequence::scripted_rotation(4, 300, 3, 0.2, GapStyle::Ladder, 3).unwrap();
        let perm = [2, 0, 3, 1];
        let permuted: Vec<PreferenceMatrix> =
            (1..=300).map(|t| seq.matrix_at(t).permuted(&perm)).collect();
        let pseq = PreferenceSequence::explicit(permuted).unwrap();
        let a = seq.measure_report();
        let b = pseq.measure_report();
        assert_eq!(a.pref_switches, b.pref_switches);
        assert_eq!(a.cw_switches, b.cw_switches);
        assert_eq!(a.sig_switch_rounds, b.sig_switch_rounds);
        assert_eq!(a.total_variation, b.total_variation);
        assert_eq!(a.cw_variation, b.cw_variation);
    }

    #[test]
    fn uniform_random_matches_closed_form_regret() {
        let env = PreferenceSequence::stationary(two_arm_sure_winner(), 10_000).unwrap();
        let rec = run_single(&env, &PolicySpec::UniformRandom, 3).unwrap();
        let total = rec.total_regret();
        // Mean per-round regret over uniform ordered pairs is 1/4.
        assert!((total - 2500.0).abs() < 125.0, "total {total}");
        assert_eq!(rec.increments.len(), 10_000);
        let mut prefix = 0.0;
        for (r, c) in rec.increments.iter().zip(&rec.cumulative) {
            assert!((0.0..=0.5).contains(r));
            prefix += r;
            assert_eq!(prefix, *c);
        }
    }

    #[test]
    fn identical_inputs_give_identical_records() {
        let env = PreferenceSequence::scripted_rotation(3, 400, 2, 0.3, GapStyle::Flat, 2).unwrap();
        for spec in [
            PolicySpec::Anaconda { elim_constant: 0.3 },
            PolicySpec::UniformRandom,
            PolicySpec::OracleRestart { elim_constant: 0.3 },
            PolicySpec::FixedBudgetRestart { elim_constant: 0.3, num_restarts: 2 },
        ] {
            let a = run_single(&env, &spec, 17).unwrap();
            let b = run_single(&env, &spec, 17).unwrap();
            assert_eq!(a.increments, b.increments);
            assert_eq!(a.trace, b.trace);
        }
    }

    #[test]
    fn sweep_aggregates_and_uniform_slope_is_flat() {
        let mk = |s| {
            let env =
                PreferenceSequence::scripted_rotation(3, 4000, s, 0.3, GapStyle::Flat, 2).unwrap();
            SweepEnv { label: format!("s={s}"), env }
        };
        let envs = vec![mk(0), mk(2), mk(5)];
        let res = run_sweep(&envs, &PolicySpec::UniformRandom, 100, 4).unwrap();
        assert_eq!(res.cells.len(), 3);
        for cell in &res.cells {
            assert_eq!(cell.regrets.len(), 4);
            assert!(cell.stderr_regret >= 0.0);
            assert!((cell.mean_regret - 800.0).abs() < 40.0, "mean {}", cell.mean_regret);
        }
        let slope = res.slope_vs_switches.expect("distinct switch counts");
        assert!(slope.abs() < 0.1, "slope {slope}");
        // Bit-exact reproduction under the same seed list.
        let again = run_sweep(&envs, &PolicySpec::UniformRandom, 100, 4).unwrap();
        for (a, b) in res.cells.iter().zip(&again.cells) {
            assert_eq!(a.regrets, b.regrets);
        }
        assert!(run_sweep(&envs, &PolicySpec::UniformRandom, 100, 1).is_err());
    }

    #[test]
    fn scaling_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 0.5 * i as f64 + 2.0)).collect();
        assert!((scaling_fit(&pts) - 0.5).abs() < 1e-12);
        let pts = [(0.0, 1.0), (1.0, 0.9), (2.0, 1.1), (3.0, 1.0)];
        assert!(scaling_fit(&pts).abs() < 0.06);
    }

    #[test]
    fn concentration_extremes() {
        let m = flat_gap_matrix(2, 0, 0.2).unwrap();
        let zero = concentration_suite(&m, 64, 0.0, 5, 9);
        assert_eq!(zero.frequency, 1.0);
        let huge = concentration_suite(&m, 64, 1e6, 5, 9);
        assert_eq!(huge.frequency, 0.0);
    }

    #[test]
    fn anaconda_runs_through_the_harness() {
        let env = PreferenceSequence::scripted_rotation(4, 600, 2, 0.3, GapStyle::Flat, 2).unwrap();
        let rec = run_single(&env, &PolicySpec::Anaconda { elim_constant: 0.3 }, 5).unwrap();
        assert_eq!(rec.trace.rounds.len(), 600);
        assert_eq!(rec.measures.cw_switches, 2);
        assert!(rec.cumulative.windows(2).all(|w| w[1] >= w[0]));
        assert!(rec.total_regret() > 0.0);
    }
}
