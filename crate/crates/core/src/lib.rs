//! Simulation and analysis library for dueling bandits whose preference
//! matrix drifts, jumps, or flips over time.
//!
//! The pieces fit together like this:
//!
//! * [`prefs`] builds single preference matrices and whole time-varying
//!   sequences of them (explicit, piecewise, utility-driven, or scripted
//!   winner rotations), each validated to carry a Condorcet winner.
//! * [`measures`] quantifies how non-stationary a sequence is: raw matrix
//!   switches, winner switches, significant winner switches, and two total
//!   variation flavors, plus the segment machinery built on top of them.
//! * [`estimator`] turns played duels into importance-weighted gap estimates
//!   and finds windows where an arm is provably beaten.
//! * [`anaconda`] is the adaptive policy: elimination over an episode window
//!   combined with randomly scheduled replays that let wrongly retired arms
//!   return.
//! * [`baselines`] holds comparison policies built on the same estimator.
//! * [`harness`] runs policies against environments with exact expected
//!   regret accounting, seed sweeps, scaling fits, and a Monte Carlo check
//!   of the deviation bound.
//!
//! Every random quantity in a run derives from one `u64` seed through named
//! [`rng`] streams, so runs are reproducible bit for bit.

pub mod anaconda;
pub mod armset;
pub mod baselines;
pub mod estimator;
pub mod harness;
pub mod measures;
pub mod prefs;
pub mod rng;

pub use anaconda::{Anaconda, AnacondaConfig, PolicyTrace};
pub use armset::ArmSet;
pub use baselines::{Policy, RestartElimination, UniformRandom};
pub use estimator::{DuelEvent, EstimateStore, Violation};
pub use harness::{run_single, run_sweep, PolicySpec, RunRecord, SweepResult};
pub use measures::MeasureReport;
pub use prefs::{PreferenceMatrix, PreferenceSequence};
