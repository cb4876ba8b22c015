//! Artifact writers. Every byte written here is a pure function of the
//! resolved config and seed list: no timestamps, no map iteration order, no
//! machine identifiers. Rerunning a config reproduces the files exactly.
//!
//! Arm indices are 1-based in all artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use nsdb::anaconda::{ElimOrigin, PolicyTrace};
use nsdb::harness::{ConcentrationSummary, RunRecord, SweepResult};
use nsdb::measures::MeasureReport;

use crate::config::SCHEMA_VERSION;

/// Collects relative paths as files are written, then drops a `manifest.json`
/// naming them all.
pub struct ArtifactDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl ArtifactDir {
    pub fn new(root: PathBuf) -> Self {
        ArtifactDir { root, outputs: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> io::Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, contents)?;
        self.outputs.push(rel.to_owned());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> io::Result<()> {
        self.write(rel, &json_doc(value))
    }

    /// Writes `manifest.json` listing every artifact written so far. The
    /// manifest does not list itself.
    pub fn finish(mut self, command: &str, config_sha256: &str) -> io::Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            schema_version: u32,
            command: &'a str,
            config_sha256: &'a str,
            outputs: &'a [String],
        }
        self.outputs.sort();
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command,
            config_sha256,
            outputs: &self.outputs,
        };
        fs::write(self.root.join("manifest.json"), json_doc(&manifest))
    }
}

/// Pretty JSON with a trailing newline; struct field order fixes byte layout.
pub fn json_doc<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

/// Per-round regret curve with the policy's phase at each round.
pub fn regret_csv(rec: &RunRecord) -> String {
    let mut out = String::from("round,regret,cum_regret,episode,frame_depth\n");
    for (i, (inc, cum)) in rec.increments.iter().zip(&rec.cumulative).enumerate() {
        let (episode, depth) = rec.trace.rounds.get(i).map_or((0, 0), |r| (r.episode, r.depth));
        out.push_str(&format!("{},{},{},{},{}\n", i + 1, inc, cum, episode, depth));
    }
    out
}

/// Played pairs and outcomes, one row per round.
pub fn trace_csv(trace: &PolicyTrace) -> String {
    let mut out = String::from("t,a,b,o,active_size,frame_depth,episode\n");
    for r in &trace.rounds {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t,
            r.first + 1,
            r.second + 1,
            r.outcome,
            r.active_size,
            r.depth,
            r.episode
        ));
    }
    out
}

#[derive(Serialize)]
pub struct RunSidecar {
    schema_version: u32,
    seed: u64,
    horizon: usize,
    arms: usize,
    total_regret: f64,
    /// Start round of each episode.
    episodes: Vec<usize>,
    eliminations: Vec<ElimJson>,
    replays: Vec<ReplayJson>,
}

#[derive(Serialize)]
struct ElimJson {
    round: usize,
    arm: usize,
    origin: &'static str,
    frame: usize,
    window_start: usize,
    witness: WitnessJson,
}

#[derive(Serialize)]
struct WitnessJson {
    /// The arm whose wins over the removed arm crossed the threshold.
    against: usize,
    s1: usize,
    s2: usize,
    sum: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct ReplayJson {
    id: usize,
    parent: Option<usize>,
    episode: usize,
    start: usize,
    scheduled_len: usize,
}

pub fn run_sidecar(rec: &RunRecord, horizon: usize, arms: usize) -> RunSidecar {
    let trace = &rec.trace;
    RunSidecar {
        schema_version: SCHEMA_VERSION,
        seed: rec.seed,
        horizon,
        arms,
        total_regret: rec.total_regret(),
        episodes: trace.episodes.clone(),
        eliminations: trace
            .eliminations
            .iter()
            .map(|e| ElimJson {
                round: e.round,
                arm: e.arm + 1,
                origin: match e.origin {
                    ElimOrigin::Good => "good",
                    ElimOrigin::Active => "active",
                },
                frame: e.frame,
                window_start: e.window_start,
                witness: WitnessJson {
                    against: e.witness.a_prime + 1,
                    s1: e.witness.s1,
                    s2: e.witness.s2,
                    sum: e.witness.sum,
                    threshold: e.witness.threshold,
                },
            })
            .collect(),
        replays: trace
            .replays
            .iter()
            .map(|n| ReplayJson {
                id: n.id,
                parent: n.parent,
                episode: n.episode,
                start: n.start,
                scheduled_len: n.scheduled_len,
            })
            .collect(),
    }
}

#[derive(Serialize)]
pub struct MeasuresDoc<'a> {
    pub schema_version: u32,
    pub horizon: usize,
    pub arms: usize,
    pub report: &'a MeasureReport,
}

#[derive(Serialize)]
pub struct SweepDoc<'a> {
    pub schema_version: u32,
    pub config_sha256: &'a str,
    pub horizon: usize,
    pub base_seed: u64,
    pub num_seeds: usize,
    pub result: &'a SweepResult,
}

#[derive(Serialize)]
pub struct ConcentrationDoc<'a> {
    pub schema_version: u32,
    pub config_sha256: &'a str,
    pub base_seed: u64,
    pub summary: &'a ConcentrationSummary,
}
