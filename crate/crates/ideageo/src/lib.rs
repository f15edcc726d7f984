//! Analytics toolkit for networked collective-design sessions.
//!
//! The crate covers the full pipeline from raw session data to the utility
//! terrain of the explored problem space:
//!
//! - [`corpus`]: tokenization, vocabulary construction, negative-sampling
//!   statistics.
//! - [`embedding`]: from-scratch paragraph-vector training (PV-DM / PV-DBOW
//!   with negative sampling) and inference for unseen texts.
//! - [`allocation`]: ring-lattice networks and seat placement of participants
//!   under clustered / random / dispersed background-distribution conditions.
//! - [`analytics`]: idea distance matrices, per-day diversity series,
//!   Mann-Whitney group comparisons, and PCA projection to 2D.
//! - [`geography`]: kernel-smoothed utility terrain over the projected space,
//!   peak finding, and grid/image export.
//! - [`session_io`]: session file loading/validation, embedding-model
//!   persistence, and report output.
//! - [`synth`]: synthetic session generator with planted ground truth.
//! - [`pipeline`]: glue that runs the stages in a fixed, reproducible order.

pub mod allocation;
pub mod analytics;
pub mod corpus;
pub mod embedding;
pub mod geography;
pub mod linalg;
pub mod pipeline;
pub mod session_io;
pub mod synth;
