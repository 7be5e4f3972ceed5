//! Verification toolkit for bound entangled states that carry distillable secret key.
//!
//! * [`matrix`]: dense operators on multipartite spaces (partial trace and transpose, spectra, norms).
//! * [`states`]: the projector families, `X_D` and the 2D⊗2D PPT states built from them.
//! * [`private`]: purification, ccq states, twisting, private states and one-way key rates.
//! * [`protocol`]: the C-NOT recurrence protocol and its key-block convergence.
//! * [`cli`]: the `boundkey` command-line front end.

pub mod cli;
pub mod error;
pub mod matrix;
pub mod private;
pub mod protocol;
pub mod random;
pub mod report;
pub mod states;

pub use error::{Error, Result};
pub use matrix::Operator;
pub use states::KeyShieldState;
