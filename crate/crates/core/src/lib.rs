//! Weighted Sobolev (Kondratiev) spaces, conformal rescaling and graded finite
//! elements on planar domains with conical, cuspidal and oscillating boundary points.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod domains;
pub mod error;
pub mod expr;
pub mod fem;
pub mod geometry;
pub mod hardy;
pub mod lab;
pub mod mesh;
pub mod metric;
pub mod quadrature;
pub mod wnorm;

pub use error::{Error, Result};
pub use geometry::{Mat2, Point};
