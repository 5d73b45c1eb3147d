//! Driver cognitive-behavior mining pipeline for an intelligent transportation
//! cyber-physical system.
//!
//! Sensor layers (body-area network, cabin environment, camera) feed an edge
//! node that recognizes activity, estimates mood and mines
//! `context -> content` association rules. The on-vehicle node turns those
//! rules and a Bayesian transition model learned from the driver's lifelog
//! into a mood-repair content sequence, and emits a safety notification on
//! every activity tick.
//!
//! Modules:
//!
//! - [`domain`]: activity classes, the valence/arousal mood map, catalog and
//!   environment buckets.
//! - [`sigproc`]: bandpass filtering, smoothing and window features.
//! - [`inference`]: stand-in classifiers and classification reports.
//! - [`mining`]: context fusion and Apriori rule mining.
//! - [`recommend`]: transition model learning and Viterbi repair planning.
//! - [`cpsnet`]: envelope codec and the discrete-event node simulator.
//! - [`evalstats`]: descriptive statistics, one-way ANOVA, binomial intervals.
//! - [`scenario`]: synthetic driver sessions and replay bundles.

pub mod cpsnet;
pub mod domain;
pub mod evalstats;
pub mod inference;
pub mod mining;
pub mod recommend;
pub mod scenario;
pub mod sigproc;

mod tsv;
