//! Diagnostics behind the calibration choice: how much time the policy
//! spends inside young replays (which play the full arm set uniformly), and
//! a finer false-restart sweep near the constant the shipped configs use.

use nsdb::harness::{run_with, PolicySpec};
use nsdb::prefs::{GapStyle, PreferenceSequence};
use rayon::prelude::*;

fn scripted(k: usize, horizon: usize, switches: usize) -> PreferenceSequence {
    PreferenceSequence::scripted_rotation(k, horizon, switches, 0.3, GapStyle::Flat, 2).unwrap()
}

fn main() {
    // Where do the rounds go? Depth distribution and active-set sizes for a
    // single representative run.
    let env = scripted(5, 20_000, 4);
    for c in [0.3, 0.5] {
        let rec = run_with(&env, &PolicySpec::Anaconda { elim_constant: c }, 7, true).unwrap();
        let rounds = &rec.trace.rounds;
        let total = rounds.len() as f64;
        let replayed = rounds.iter().filter(|r| r.depth > 0).count() as f64;
        let full = rounds.iter().filter(|r| r.active_size == 5).count() as f64;
        let mean_active: f64 =
            rounds.iter().map(|r| r.active_size as f64).sum::<f64>() / total;
        let mean_depth: f64 = rounds.iter().map(|r| r.depth as f64).sum::<f64>() / total;
        println!(
            "C={c}: replays {} | depth>0 {:.1}% | active=K {:.1}% | mean active {:.2} | mean depth {:.1} | elims {} | episodes {} | DR {:.0}",
            rec.trace.replays.len(),
            100.0 * replayed / total,
            100.0 * full / total,
            mean_active,
            mean_depth,
            rec.trace.eliminations.len(),
            rec.trace.episodes.len(),
            rec.total_regret(),
        );
    }

    // Finer false-restart sweep, acceptance-sized: 100 seeds pooled over the
    // two scripted-switch settings.
    for c in [0.42, 0.45, 0.48, 0.5, 0.55, 0.6] {
        let mut restarts = 0usize;
        let mut false_restarts = 0usize;
        for s in [2usize, 4] {
            let env = scripted(5, 20_000, s);
            let switches = env.cw_switch_rounds().to_vec();
            let (r, f) = (0..100u64)
                .into_par_iter()
                .map(|seed| {
                    let rec = run_with(
                        &env,
                        &PolicySpec::Anaconda { elim_constant: c },
                        seed,
                        false,
                    )
                    .unwrap();
                    let eps = &rec.trace.episodes;
                    let mut total = 0usize;
                    let mut bad = 0usize;
                    for i in 1..eps.len() {
                        total += 1;
                        let ok = switches.iter().any(|&s| s > eps[i - 1] && s < eps[i]);
                        bad += usize::from(!ok);
                    }
                    (total, bad)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            restarts += r;
            false_restarts += f;
        }
        let frac = if restarts == 0 { 0.0 } else { false_restarts as f64 / restarts as f64 };
        println!("C={c}: false {false_restarts}/{restarts} = {:.1}%", 100.0 * frac);
    }
}
