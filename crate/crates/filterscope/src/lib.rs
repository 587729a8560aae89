//! File formats, the on-disk catalog, report artifacts and the `filterscope` command line.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod filter_csv;
pub mod fpack;
pub mod report;
pub mod store;
pub mod svg;
