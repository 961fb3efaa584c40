//! Initial data generators.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::TorusGrid;
use crate::Complex64;

/// Edge magnitude allowed relative to the maximum.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// `amp exp(-|x - center|^2 / width^2)` sampled on the grid.
pub fn gaussian_data(amp: f64, width: f64, center: [f64; 2], grid: &Arc<TorusGrid>) -> Result<RealField> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::config(format!("gaussian width must be positive, got {width}")));
    }
    if !amp.is_finite() || !center.iter().all(|c| c.is_finite()) {
        return Err(Error::config("gaussian amplitude and center must be finite"));
    }
    let w2 = width * width;
    let f = RealField::from_fn(grid, |x, y| {
        let (dx, dy) = (x - center[0], y - center[1]);
        amp * (-(dx * dx + dy * dy) / w2).exp()
    });
    check_tail(&f)?;
    Ok(f)
}

/// Fails when the field is not negligible on the boundary of the box.
pub fn check_tail(f: &RealField) -> Result<()> {
    let max = f.max_abs();
    let edge = f.edge_max();
    let limit = TAIL_TOLERANCE * max;
    if max > 0.0 && edge >= limit {
        return Err(Error::TailCheck { edge, limit });
    }
    Ok(())
}

/// Real random field with `|c_k| = (1 + |xi_k|)^-(s_target + 1)` and phases
/// drawn from a ChaCha stream seeded by `seed`. Nyquist modes are zero.
pub fn rough_data(s_target: f64, seed: u64, grid: &Arc<TorusGrid>) -> Result<RealField> {
    if !(s_target > 1.0 && s_target.is_finite()) {
        return Err(Error::config(format!("s_target must exceed 1, got {s_target}")));
    }
    let n = grid.n_per_dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    let idx = |k: i64| k.rem_euclid(n as i64) as usize;
    let half = (n / 2) as i64;
    // each +-k pair is visited once
    for k1 in (1 - half)..half {
        for k2 in (1 - half)..half {
            let (i, j) = (idx(k1), idx(k2));
            let (ci, cj) = (idx(-k1), idx(-k2));
            if (k1, k2) < (-k1, -k2) {
                continue;
            }
            let xi = (grid.xi(i).powi(2) + grid.xi(j).powi(2)).sqrt();
            let mag = (1.0 + xi).powf(-(s_target + 1.0));
            let z = if (k1, k2) == (0, 0) {
                Complex64::new(mag, 0.0)
            } else {
                Complex64::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU))
            };
            c[i * n + j] = z;
            c[ci * n + cj] = z.conj();
        }
    }
    Ok(RealField::from_spectrum(grid, c))
}
