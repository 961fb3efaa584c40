//! Spectral laboratory for the non-relativistic limit of the cubic
//! Klein-Gordon equation on a periodic square.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod jet;
pub mod kg;
pub mod nls;
pub mod snapshot;
pub mod wkb;

pub use error::{Error, Result};
pub use field::{ComplexField, Field, RealField, Spectral};
pub use grid::{make_grid, TorusGrid};
pub use kg::{KgParams, KgState};
pub use nls::{NlsParams, ProfileSet};
pub use rustfft::num_complex::Complex64;
pub use wkb::{HarmonicTable, SystemVector, WkbOrder};
