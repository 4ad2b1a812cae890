//! Weighted ring extreme learning machine.
//!
//! A single-hidden-layer random-feature regressor is trained offline by
//! weighted least squares, then corrected at every step from a small ring of
//! the most recent input/target pairs. The correction is a rank-`m` update of
//! the frozen offline solution and is recomputed from scratch each step, so
//! old pairs are forgotten as soon as they leave the ring.
//!
//! ```no_run
//! use std::sync::Arc;
//! use wrelm::{synthgen, train_offline, OnlinePredictor, GenConfig, TrainConfig};
//!
//! let ds = synthgen::generate(&GenConfig { n_steps: 2000, ..Default::default() })?;
//! let model = Arc::new(train_offline(&ds, &TrainConfig::default())?);
//! let mut p = OnlinePredictor::new(model, 8)?;
//! for r in ds.records() {
//!     let _next = p.predict(&r.features)?;
//!     p.observe(&r.features, r.target)?;
//! }
//! # Ok::<(), wrelm::Error>(())
//! ```

pub mod adapter;
pub mod bench;
pub mod cli;
pub mod dataset;
pub mod elm;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model_io;
pub mod oracle;
pub mod rng;
pub mod scaler;
pub mod synthgen;
pub mod trainer;
pub mod verify;

pub use adapter::{adapt, predict, AdaptedState, Mode, OnlinePredictor, OnlineWeights, RingBuffer};
pub use dataset::{Record, SeriesDataset};
pub use elm::{Activation, InputWeights};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalConfig, EvalReport};
pub use model_io::{load_model, save_model};
pub use scaler::Scaler;
pub use synthgen::GenConfig;
pub use trainer::{train_offline, OfflineModel, OfflineWeights, PruneConfig, TrainConfig};
