//! Models of how human teams decide whether to answer or to consult one of
//! several AI agents, how those models are fitted to observed sessions,
//! and how they are scored.
//!
//! Start with [`session::SessionLog`] for the data format,
//! [`models::ModelKind`] for the model family, [`fit`] and [`eval`] for the
//! training and evaluation pipeline, and [`sim`] for synthetic sessions.

pub mod appraisal;
pub mod error;
pub mod eval;
pub mod fit;
pub mod loss;
pub mod models;
pub mod prob;
pub mod prospect;
pub mod replay;
pub mod reward;
pub mod session;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use loss::LossKind;
pub use models::{ModelKind, ModelParams, Task, TeamBeliefState};
pub use prob::ActionDistribution;
pub use prospect::PtParams;
pub use reward::RewardScheme;
pub use session::SessionLog;
