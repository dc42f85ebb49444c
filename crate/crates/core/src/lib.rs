//! Image obfuscation operators that reproduce practical blur libraries
//! byte-for-byte, the optimization-based reversal attack against them, a
//! discrimination attack, and numeric audits of profile-based privacy.
//!
//! Module map:
//!
//! - [`tensor`], [`rng`], [`io`], [`data`]: images, masks, deterministic
//!   randomness, PNM/IDX formats and labeled datasets.
//! - [`obfuscation`]: crop, PIL-compatible Gaussian blur, OpenCV-compatible
//!   box blur, pixelization, DP-Pix and masked application.
//! - [`diffops`]: real-valued surrogates of each pipeline with hand-written
//!   adjoints and straight-through rounding.
//! - [`reversal`]: momentum gradient descent reversal attack and metrics.
//! - [`privacy`]: Rényi divergences, pushforwards and proposition checks.
//! - [`discrimination`]: logistic-regression discrimination attack.

pub mod cli;
pub mod data;
pub mod diffops;
pub mod discrimination;
pub mod error;
pub mod io;
pub mod json;
pub mod manifest;
pub mod obfuscation;
pub mod privacy;
pub mod reversal;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use obfuscation::{Method, ObfuscationSpec};
pub use tensor::{ImageTensor, Mask, QuantizedImage};
