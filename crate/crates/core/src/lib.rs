//! Decentralized coverage control with sparse Gaussian-process UCB exploration.
//!
//! Each agent keeps its own subset-of-data Gaussian process of an unknown
//! density, moves by descending a cost made of the expected locational cost
//! of its Voronoi cell plus a scaled standard deviation of that cost, and
//! talks to its Delaunay neighbors only: hyperparameters every round, inducing
//! sets every `T` rounds.
//!
//! Module map:
//!
//! - [`geometry`]: grid Voronoi partition, Delaunay neighbor graph, Laplacian.
//! - [`gp`]: kernel, posterior, incremental inverse, greedy inducing selection.
//! - [`cost`]: the cell cost, its gradient, and the ground-truth metric.
//! - [`control`]: normalized gradient descent, plateau switch, Adam, projection.
//! - [`consensus`]: Laplacian averaging of hyperparameters.
//! - [`scenario`]: ground-truth density fields.
//! - [`sim`]: the round-based engine and the Lloyd baseline.
//! - [`config`] and [`batch`]: experiment configuration, trace CSVs, summaries.

pub mod batch;
pub mod config;
pub mod consensus;
pub mod control;
pub mod cost;
pub mod geometry;
pub mod gp;
pub mod scenario;
pub mod sim;

pub use config::SimConfig;
pub use geometry::{Domain, Point, VoronoiPartition};
pub use gp::{Hyperparams, Sample, SparseGP};
pub use scenario::{DensityField, Scenario};
pub use sim::{run, run_lloyd_baseline, SimTrace};
