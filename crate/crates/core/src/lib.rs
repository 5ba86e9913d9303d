//! Sequential unsharp measurements on one wing of a two-qubit singlet.
//!
//! - [`qops`]: fixed-size complex linear algebra, the singlet, traces.
//! - [`povm`]: unsharp effects, Lüders updates and the `(F, G)` pointer model.
//! - [`scenario`]: the sequential Bob chain, joint probabilities and CHSH.
//! - [`analysis`]: violation regions and the triple-violation bound.
//! - [`mc`]: seeded trajectory sampling of single experimental runs.
//! - [`cli`]: command-line front end and table output.

pub mod error;
pub mod qops;
pub mod povm;
pub mod scenario;
pub mod analysis;
pub mod mc;
pub mod cli;

pub use error::{Error, Result};
