//! Software LED-to-camera visible light link.
//!
//! The crate covers the whole path of a light identifier:
//!
//! 1. [`codec`]: OOK + Manchester packets with a `10001` preamble.
//! 2. [`camera`]: rolling-shutter frame synthesis and blob-size physics.
//! 3. [`imaging`]: contrast stretch, 3x3 blur, adaptive threshold, blob
//!    detection and run-length decoding of an offset column.
//! 4. [`ranging`]: link distance from blob size, by the pinhole relation
//!    and by a fitted linear model.
//! 5. [`cli`]: the `ledcam` command line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cli;
pub mod codec;
pub mod experiment;
pub mod frame;
pub mod imaging;
pub mod ranging;

pub use camera::{CameraParams, LinkGeometry, TxParams};
pub use codec::{FramingConfig, Payload, SymbolStream};
pub use frame::Frame;
