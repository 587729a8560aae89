//! Core statistics for collections of trained 3×3 convolution filters.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation: the in-memory catalog model and its queries, max-abs
//! preprocessing, streaming moment accumulation and full-rank PCA, coefficient
//! histograms with the variance-weighted symmetric KL shift, and the
//! analytics built on top (shift matrices, depth deciles, scale statistics and
//! phenotype classification).
//!
//! File formats, the on-disk catalog and the command-line tool live in the
//! `filterscope` crate.
#![no_std]
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod catalog;
pub mod density;
pub mod divergence;
mod error;
pub mod filter;
pub mod linalg;
pub mod meta;
pub mod pca;
pub mod preprocess;
pub mod stats;

pub use error::Error;
pub use filter::{FilterRecord, FilterSet, ModelId, Weights, KERNEL_LEN};
pub use meta::{LayerRecord, ModelMeta};

pub type Result<T, E = Error> = core::result::Result<T, E>;
