//! Functional and performance model of the NullHop sparse CNN accelerator.
//!
//! The crate is organised around the accelerator's data path:
//!
//! - [`fxp`]: 16-bit fixed-point values, quantization and the saturating MAC.
//! - [`netmodel`]: feature-map tensors, kernels, layer/network descriptors and
//!   their on-disk formats (`.nht`, `.nhw`, network JSON).
//! - [`codec`]: the sparsity-map (SM) compressed stream, its streaming decoder,
//!   size analytics and the run-length baseline.
//! - [`refmodel`]: the dense golden model of one layer.
//! - [`accel`]: the pipeline simulator (IDP stripe decoding, MAC clusters,
//!   PRE reduction/pooling/encoding) with cycle and traffic accounting.
//! - [`report`]: whole-network runs and codec sweeps.
//! - [`check`]: randomised pipeline-vs-golden-model and codec self-checks.
//! - [`zoo`]: descriptors of the networks used to characterise the design.
//!
//! Runnable walkthroughs live in `examples/`; the `nullhop` binary exposes the
//! same capabilities from the command line.

pub mod accel;
pub mod check;
pub mod codec;
pub mod error;
pub mod fxp;
pub mod netmodel;
pub mod refmodel;
pub mod report;
pub mod zoo;

pub use error::{Error, Result};
pub use fxp::{Fx16, Fx32, QFormat};
pub use netmodel::{FeatureMapTensor, KernelSet, LayerDescriptor, NetworkDescriptor};
