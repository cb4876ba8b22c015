//! Calibration sweep for the elimination constant.
//!
//! Prints, for each candidate constant: the pooled false-restart fraction on
//! scripted-switch environments, the log-log slope of mean dynamic regret
//! against the switch count, and the horizon scaling of regret. The shipped
//! experiment configs pin the constant this sweep selects.

use nsdb::harness::{run_with, scaling_fit, PolicySpec};
use nsdb::prefs::{GapStyle, PreferenceSequence};
use rayon::prelude::*;

fn scripted(k: usize, horizon: usize, switches: usize, rotate: usize) -> PreferenceSequence {
    PreferenceSequence::scripted_rotation(k, horizon, switches, 0.3, GapStyle::Flat, rotate)
        .unwrap()
}

fn spec(c: f64) -> PolicySpec {
    PolicySpec::Anaconda { elim_constant: c }
}

/// (restarts, false restarts, mean regret, mean episodes) over `seeds` runs.
fn batch(env: &PreferenceSequence, c: f64, seeds: u64) -> (usize, usize, f64, f64) {
    let switches = env.cw_switch_rounds().to_vec();
    let (total, false_r, regret, episodes) = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let rec = run_with(env, &spec(c), seed, false).unwrap();
            let eps = &rec.trace.episodes;
            let mut total = 0usize;
            let mut false_r = 0usize;
            for i in 1..eps.len() {
                total += 1;
                let justified = switches.iter().any(|&s| s > eps[i - 1] && s < eps[i]);
                false_r += usize::from(!justified);
            }
            (total, false_r, rec.total_regret(), eps.len())
        })
        .reduce(
            || (0, 0, 0.0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
        );
    (total, false_r, regret / seeds as f64, episodes as f64 / seeds as f64)
}

fn main() {
    let k = 5;
    let t_mid = 20_000;
    for rotate in [2usize, 5] {
        println!("== rotation cycle {rotate} ==");
        for c in [0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.75, 1.0] {
            // False restarts, pooled over the two scripted-switch settings.
            let mut restarts = 0;
            let mut false_restarts = 0;
            for s in [2usize, 4] {
                let env = scripted(k, t_mid, s, rotate);
                let (r, f, _, _) = batch(&env, c, 30);
                restarts += r;
                false_restarts += f;
            }

            // Regret against switch count at fixed horizon.
            let mut pts = Vec::new();
            let mut cells = Vec::new();
            for s in [1usize, 2, 4, 8, 16] {
                let env = scripted(k, t_mid, s, rotate);
                let (_, _, dr, eps) = batch(&env, c, 10);
                pts.push((((s + 1) as f64).ln(), dr.ln()));
                cells.push(format!("S{s}:{dr:.0}/{eps:.1}ep"));
            }
            let slope = scaling_fit(&pts);

            // Regret against horizon at four switches.
            let mut ratios = Vec::new();
            let mut prev: Option<f64> = None;
            let mut norms = Vec::new();
            for t in [5_000usize, 20_000, 80_000] {
                let env = scripted(k, t, 4, rotate);
                let (_, _, dr, _) = batch(&env, c, 8);
                let norm = dr / (t as f64).sqrt();
                if let Some(p) = prev {
                    ratios.push(format!("{:.2}", norm / p));
                }
                norms.push(format!("{norm:.1}"));
                prev = Some(norm);
            }

            println!(
                "C={c:<4} false {false_restarts}/{restarts} | slope {slope:+.2} | {} | DR/sqrtT {} ratios {}",
                cells.join(" "),
                norms.join(" "),
                ratios.join(" ")
            );
        }
    }
}
