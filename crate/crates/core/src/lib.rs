//! Social hypergraph convolutional network (SHGCN) for inhomogeneous social
//! recommendation.
//!
//! The crate covers the full pipeline:
//!
//! - [`graph`]: hypergraph construction from user-item interactions and
//!   user-user-item triplets, with compressed incidence indices.
//! - [`numeric`]: dense matrices, a define-by-run reverse-mode tape and a
//!   finite-difference gradient checker.
//! - [`model`]: the four-stage hypergraph convolution (hyperedge, relation,
//!   user, item) and inner-product scoring.
//! - [`baseline`]: matrix factorization trained by the same BPR loop.
//! - [`train`]: negative sampling, BPR loss, Adam and epoch orchestration.
//! - [`eval`]: leave-one-out splits, sampled ranking, Recall@K and NDCG@K.
//! - [`synth`]: synthetic data with planted per-pair shared interests.
//! - [`io`]: dataset ingestion, checkpoints and run manifests.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod synth;
pub mod train;

pub use baseline::MfState;
pub use error::{Error, Result};
pub use eval::{EvalSplit, MetricReport, Scorer};
pub use graph::{Dataset, Hypergraph};
pub use model::{ModelConfig, ModelKind, Recommender, Representations, ShgcnState};
pub use numeric::{Matrix, Tape, Var};
pub use train::{TrainConfig, Trainer};
