//! Periodic square grid standing in for the plane, plus the FFT machinery
//! that every spectral operation runs through.
//!
//! Spectra are stored in FFT order: flat index `i * n + j` holds the mode
//! `(k1, k2)` with `k = i` for `i < n/2` and `k = i - n` otherwise. Sample
//! `(i, j)` sits at `x = (-L/2 + i h, -L/2 + j h)`, so `i` runs along `x1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Discretized periodic square `[-L/2, L/2)^2`.
pub struct TorusGrid {
    n: usize,
    side: f64,
    wavenumbers: Vec<f64>,
    plans: Plans,
}

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n_per_dim", &self.n)
            .field("side_length", &self.side)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.side.to_bits() == other.side.to_bits()
    }
}

/// Builds a grid with `n_per_dim` points per dimension on a box of side `side_length`.
pub fn make_grid(n_per_dim: usize, side_length: f64) -> Result<Arc<TorusGrid>> {
    TorusGrid::new(n_per_dim, side_length).map(Arc::new)
}

impl TorusGrid {
    pub fn new(n_per_dim: usize, side_length: f64) -> Result<Self> {
        if n_per_dim < 8 || !n_per_dim.is_multiple_of(2) {
            return Err(Error::config(format!(
                "n_per_dim must be even and >= 8, got {n_per_dim}"
            )));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::config(format!(
                "side_length must be positive and finite, got {side_length}"
            )));
        }
        let n = n_per_dim;
        let half = (n / 2) as i64;
        let wavenumbers = (-half..half)
            .map(|k| 2.0 * PI * k as f64 / side_length)
            .collect();
        let mut planner = FftPlanner::new();
        let plans = Plans {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(2 * n),
            inv_pad: planner.plan_fft_inverse(2 * n),
        };
        Ok(TorusGrid {
            n,
            side: side_length,
            wavenumbers,
            plans,
        })
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn side_length(&self) -> f64 {
        self.side
    }

    /// Grid spacing `h = L / n`.
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Number of samples, `n^2`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `xi_k = 2 pi k / L` for `k = -n/2, ..., n/2 - 1`, ascending.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Spectral step `2 pi / L`.
    pub fn wavenumber_step(&self) -> f64 {
        2.0 * PI / self.side
    }

    /// Signed integer mode of FFT-order index `i`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Wavenumber of FFT-order index `i`.
    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        self.wavenumbers[(self.mode(i) + (self.n / 2) as i64) as usize]
    }

    /// True when index `i` is the unpaired mode `-n/2`.
    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Zeroes the unpaired `-n/2` rows and columns of a spectrum. The padded
    /// products never produce them, so nonlinear flows live on the rest.
    pub(crate) fn drop_nyquist(&self, s: &mut [Complex64]) {
        let n = self.n;
        let half = n / 2;
        s[half * n..(half + 1) * n].fill(Complex64::new(0.0, 0.0));
        for i in 0..n {
            s[i * n + half] = Complex64::new(0.0, 0.0);
        }
    }

    /// Coordinate of sample index `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.side + i as f64 * self.spacing()
    }

    /// Evaluates `m(xi1, xi2)` on every mode, FFT order.
    pub fn multiplier_table<F>(&self, m: F) -> Vec<Complex64>
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let x1 = self.xi(i);
            for j in 0..n {
                out.push(m(x1, self.xi(j)));
            }
        }
        out
    }

    /// `|xi|^2` per mode, FFT order.
    pub fn xi_squared(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let a = self.xi(i);
            for j in 0..n {
                let b = self.xi(j);
                out.push(a * a + b * b);
            }
        }
        out
    }

    /// Samples to normalized Fourier coefficients of `e^{i xi . x}`.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(values.len(), n * n, "sample count does not match grid");
        let mut buf = values.to_vec();
        fft2_square(&mut buf, n, self.plans.fwd.as_ref());
        let scale = 1.0 / (n * n) as f64;
        for i in 0..n {
            for j in 0..n {
                let s = if (i + j) % 2 == 0 { scale } else { -scale };
                buf[i * n + j] *= s;
            }
        }
        buf
    }

    /// Normalized Fourier coefficients back to samples.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(coeffs.len(), n * n, "coefficient count does not match grid");
        let mut buf = coeffs.to_vec();
        for i in 0..n {
            for j in 0..n {
                if (i + j) % 2 == 1 {
                    buf[i * n + j] = -buf[i * n + j];
                }
            }
        }
        fft2_square(&mut buf, n, self.plans.inv.as_ref());
        buf
    }

    /// Dealiased product of three spectra: band-limited interpolation onto a
    /// grid refined by two in each dimension, pointwise product, and
    /// truncation back to the modes `|k_i| < n/2`. Exact for cubic products.
    pub fn cube_spectra(&self, a: &[Complex64], b: &[Complex64], c: &[Complex64]) -> Vec<Complex64> {
        let mut ws = PadWorkspace::new(self.n);
        self.cube_spectra_with(&mut ws, a, b, c)
    }

    pub(crate) fn cube_spectra_with(
        &self,
        ws: &mut PadWorkspace,
        a: &[Complex64],
        b: &[Complex64],
        c: &[Complex64],
    ) -> Vec<Complex64> {
        let same_ab = std::ptr::eq(a.as_ptr(), b.as_ptr());
        self.pad_inverse(a, &mut ws.a);
        if same_ab {
            if std::ptr::eq(a.as_ptr(), c.as_ptr()) {
                for x in ws.a.iter_mut() {
                    *x = *x * *x * *x;
                }
            } else {
                self.pad_inverse(c, &mut ws.b);
                for (x, y) in ws.a.iter_mut().zip(&ws.b) {
                    *x = *x * *x * y;
                }
            }
        } else {
            self.pad_inverse(b, &mut ws.b);
            for (x, y) in ws.a.iter_mut().zip(&ws.b) {
                *x *= y;
            }
            self.pad_inverse(c, &mut ws.b);
            for (x, y) in ws.a.iter_mut().zip(&ws.b) {
                *x *= y;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        self.pad_forward(&mut ws.a, &mut out);
        out
    }

    /// Dealiased product of two spectra (exact for quadratic products).
    pub fn product_spectra(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut ws = PadWorkspace::new(self.n);
        self.pad_inverse(a, &mut ws.a);
        self.pad_inverse(b, &mut ws.b);
        for (x, y) in ws.a.iter_mut().zip(&ws.b) {
            *x *= y;
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        self.pad_forward(&mut ws.a, &mut out);
        out
    }

    /// Dealiased cube of a real field given by its spectrum, `P(u^3)`.
    pub(crate) fn real_cube_with(&self, ws: &mut PadWorkspace, a: &[Complex64]) -> Vec<Complex64> {
        self.pad_inverse(a, &mut ws.a);
        for x in ws.a.iter_mut() {
            let r = x.re;
            *x = Complex64::new(r * r * r, 0.0);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        self.pad_forward(&mut ws.a, &mut out);
        out
    }

    /// `P(|g|^2 g)` from the spectrum of `g`, two padded transforms.
    pub(crate) fn abs2_cube_with(&self, ws: &mut PadWorkspace, a: &[Complex64]) -> Vec<Complex64> {
        self.pad_inverse(a, &mut ws.a);
        for x in ws.a.iter_mut() {
            *x *= x.norm_sqr();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        self.pad_forward(&mut ws.a, &mut out);
        out
    }

    /// Padded samples of a spectrum; pairs with `project_padded`.
    pub(crate) fn padded_samples(&self, a: &[Complex64]) -> Vec<Complex64> {
        let m = 2 * self.n;
        let mut big = vec![Complex64::new(0.0, 0.0); m * m];
        self.pad_inverse(a, &mut big);
        big
    }

    pub(crate) fn padded_samples_into(&self, a: &[Complex64], big: &mut [Complex64]) {
        self.pad_inverse(a, big);
    }

    /// Truncated spectrum of padded samples; consumes the buffer contents.
    pub(crate) fn project_padded(&self, big: &mut [Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        self.pad_forward(big, &mut out);
        out
    }

    /// Spectrum on the `n` grid to samples on the `2n` grid. The output is
    /// left transposed (`[x2][x1]`), which is harmless for pointwise work
    /// and undone by `pad_forward`.
    fn pad_inverse(&self, coeffs: &[Complex64], big: &mut [Complex64]) {
        let n = self.n;
        let m = 2 * n;
        let half = n / 2;
        debug_assert_eq!(big.len(), m * m);
        big.fill(Complex64::new(0.0, 0.0));
        // the unpaired -n/2 mode is split evenly between -n/2 and +n/2 so
        // that real samples interpolate to real samples
        let targets = |i: usize| -> [(usize, f64); 2] {
            if i == half {
                [(m - half, 0.5), (half, 0.5)]
            } else if i < half {
                [(i, 1.0), (usize::MAX, 0.0)]
            } else {
                [(i + n, 1.0), (usize::MAX, 0.0)]
            }
        };
        for i in 0..n {
            for (ti, wi) in targets(i) {
                if ti == usize::MAX {
                    continue;
                }
                for j in 0..n {
                    let c = coeffs[i * n + j];
                    let s = if (i + j) % 2 == 0 { wi } else { -wi };
                    for (tj, wj) in targets(j) {
                        if tj == usize::MAX {
                            continue;
                        }
                        big[ti * m + tj] += c * (s * wj);
                    }
                }
            }
        }
        // rows with data: k1 in [-n/2, n/2]
        let inv = self.plans.inv_pad.as_ref();
        let mut scratch = vec![Complex64::new(0.0, 0.0); inv.get_inplace_scratch_len()];
        inv.process_with_scratch(&mut big[..(half + 1) * m], &mut scratch);
        inv.process_with_scratch(&mut big[(m - half) * m..], &mut scratch);
        transpose_square(big, m);
        inv.process_with_scratch(big, &mut scratch);
    }

    /// Transposed `2n` samples to the truncated spectrum on the `n` grid.
    fn pad_forward(&self, big: &mut [Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let m = 2 * n;
        let half = n / 2;
        let fwd = self.plans.fwd_pad.as_ref();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        // rows are x2, transform along x1
        fwd.process_with_scratch(big, &mut scratch);
        transpose_square(big, m);
        // rows are k1 now; only |k1| < n/2 survive
        fwd.process_with_scratch(&mut big[..half * m], &mut scratch);
        fwd.process_with_scratch(&mut big[(m - half + 1) * m..], &mut scratch);
        let scale = 1.0 / (m * m) as f64;
        let src = |i: usize| if i < half { i } else { i + n };
        for i in 0..n {
            let row = i * n;
            if i == half {
                out[row..row + n].fill(Complex64::new(0.0, 0.0));
                continue;
            }
            let si = src(i);
            for j in 0..n {
                out[row + j] = if j == half {
                    Complex64::new(0.0, 0.0)
                } else {
                    let s = if (i + j) % 2 == 0 { scale } else { -scale };
                    big[si * m + src(j)] * s
                };
            }
        }
    }
}

/// Scratch buffers for padded products; reuse across steps to avoid
/// reallocating two `(2n)^2` arrays every call.
pub(crate) struct PadWorkspace {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl PadWorkspace {
    pub(crate) fn new(n: usize) -> Self {
        let m = 2 * n;
        PadWorkspace {
            a: vec![Complex64::new(0.0, 0.0); m * m],
            b: vec![Complex64::new(0.0, 0.0); m * m],
        }
    }

    /// Free `(2n)^2` buffer for callers doing their own padded pointwise work.
    pub(crate) fn scratch(&mut self) -> &mut [Complex64] {
        &mut self.b
    }
}

fn fft2_square(buf: &mut [Complex64], n: usize, plan: &dyn Fft<f64>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, n);
    plan.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, n);
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(make_grid(7, 1.0).is_err());
        assert!(make_grid(6, 1.0).is_err());
        assert!(make_grid(8, 0.0).is_err());
        assert!(make_grid(8, -2.0).is_err());
        assert!(make_grid(8, f64::NAN).is_err());
    }

    #[test]
    fn unit_wavenumbers_on_two_pi_box() {
        let g = make_grid(8, 2.0 * PI).unwrap();
        let expect: Vec<f64> = (-4..4).map(|k| k as f64).collect();
        for (a, b) in g.wavenumbers().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wavenumber_step_and_extent() {
        let g = make_grid(16, 16.0 * PI).unwrap();
        assert!((g.wavenumber_step() - 0.125).abs() < 1e-15);
        let g = make_grid(256, 48.0 * PI).unwrap();
        let max = g.wavenumbers().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((max - 128.0 / 24.0).abs() < 1e-12);
        assert!((g.spacing() - 48.0 * PI / 256.0).abs() < 1e-15);
    }

    #[test]
    fn wavenumbers_are_exact_multiples() {
        let g = make_grid(32, 3.7).unwrap();
        for (idx, xi) in g.wavenumbers().iter().enumerate() {
            let k = idx as i64 - 16;
            assert_eq!(xi.to_bits(), (2.0 * PI * k as f64 / 3.7).to_bits());
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let n = 37;
        let orig: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let mut b = orig.clone();
        transpose_square(&mut b, n);
        assert_eq!(b[1], orig[n]);
        transpose_square(&mut b, n);
        assert_eq!(b, orig);
    }

    #[test]
    fn single_mode_coefficient() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let n = 16;
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = (g.coord(i), g.coord(j));
                v.push(Complex64::from_polar(1.0, 2.0 * x1 - 3.0 * x2));
            }
        }
        let c = g.forward(&v);
        let idx = 2 * n + (n - 3);
        assert!((c[idx] - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let others: f64 = c.iter().enumerate().filter(|(k, _)| *k != idx).map(|(_, z)| z.norm()).sum();
        assert!(others < 1e-12);
    }
}
