//! Lie group equivariant convolutions on point clouds, and an invariant
//! pooling layer that keeps track of which orbit each point lies on.
//!
//! Points are lifted to group elements and orbit identifiers, passed through
//! equivariant convolution blocks, and pooled to an invariant vector. The
//! [`oracle`] module checks the underlying orbit-sum decomposition exactly on
//! small finite domains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gigp;
pub mod group;
pub mod lieconv;
pub mod lifting;
pub mod nn;
pub mod oracle;

pub use error::{Error, Result};
pub use gigp::{assign_orbits, gigp_forward, init_anchors, GigpLayer};
pub use group::{AlgebraVector, GroupElement, GroupId};
pub use lieconv::{conv_forward, residual_block, ConvGeometry, ConvLayer, ConvLayerConfig, ResidualBlock};
pub use lifting::{lift, LiftedCloud, LiftedPoint, RawPointCloud};
