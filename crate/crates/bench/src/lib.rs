//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use kgnr_core::harness::gaussian_data;
use kgnr_core::kg::kg_init;
use kgnr_core::nls::init_g0;
use kgnr_core::{make_grid, ComplexField, KgState, RealField, TorusGrid};

/// Grid sizes the kernels are timed at.
pub const SIZES: [usize; 3] = [64, 128, 256];

pub fn grid(n: usize) -> Arc<TorusGrid> {
    make_grid(n, 16.0 * PI).expect("benchmark grid")
}

pub fn gaussian(n: usize) -> RealField {
    gaussian_data(1.0, 1.0, [0.0, 0.0], &grid(n)).expect("gaussian fits the box")
}

pub fn profile(n: usize) -> ComplexField {
    let phi = gaussian(n);
    init_g0(&phi, &phi).expect("profile")
}

pub fn kg_state(n: usize, eps: f64) -> KgState {
    let phi = gaussian(n);
    kg_init(&phi, &phi, eps).expect("kg state")
}
