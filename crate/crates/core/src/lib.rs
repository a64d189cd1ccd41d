//! Numerical laboratory for rotary positional encodings at desk scale.
//!
//! The crate covers five areas:
//!
//! * [`pe`]: the RoPE family of embedding maps (plain, position interpolation,
//!   adjusted base frequency, xPos with adjusted base), attention decay curves
//!   and the geometric quantities used to compare them.
//! * [`theory`]: numerical checks of the consecutive-image sine-similarity
//!   bounds and their large-dimension limits.
//! * [`attention`]: a single-head attention layer with analytic gradients and
//!   deterministic long-range probes.
//! * [`scaling`]: power-law-plus-constant loss fits and curriculum FLOPs ratios.
//! * [`selfinstruct`]: chunking, prompt rendering, tagged QA extraction and
//!   packing/padding of training instances.
//!
//! Brute-force scans run on rayon when the `parallel` feature is enabled (the
//! default). Every parallel reduction is order-independent, so serial and
//! parallel runs return identical bits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod exec;
pub mod export;
pub mod pe;
pub mod scaling;
pub mod selfinstruct;
pub mod theory;

pub use exec::Exec;
pub use pe::{EmbeddingImage, PeError, PeKind, PeVariant, Role};
