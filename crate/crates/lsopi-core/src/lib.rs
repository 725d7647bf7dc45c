//! Exact decision procedure for two-input control-affine systems:
//! is the system linearizable by a chain of one-fold prolongations, each of
//! which enlarges the set of involutive distributions in the
//! linearizability filtration?
//!
//! The crate is organized in layers:
//! * [`symcore`] — exact scalar symbolics (rational functions over Q).
//! * [`funlinalg`] — linear algebra over the field of rational functions,
//!   with seeded rational sampling as an independent cross-check.
//! * [`geometry`] — vector fields, Lie brackets, distributions and the
//!   involutivity/filtration toolbox.
//! * [`lsopi`] — the decision engine: case classification, construction of
//!   the corank-one involutive distribution driving each prolongation, and
//!   the outer verdict loop.
//! * [`oracle`] — independent brute-force checks used to corroborate the
//!   engine (breadth-first prolongation search, pointwise characteristic
//!   spaces, projective candidate sweeps).
//! * [`sysfile`] / [`report`] — the on-disk system format and the report
//!   emitted by the command-line interface.

pub mod error;
pub mod funlinalg;
pub mod geometry;
pub mod lsopi;
pub mod oracle;
pub mod report;
pub mod symcore;
pub mod sysfile;

pub use error::{Error, Result};
