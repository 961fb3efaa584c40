//! Grid samples with a spectral view.
//!
//! Both field flavours keep their samples and lazily cache the normalized
//! Fourier coefficients, `f(x) = sum_k c_k e^{i xi_k . x}`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Anything living on a grid with a Fourier view.
pub trait Spectral {
    fn grid(&self) -> &Arc<TorusGrid>;
    fn spectrum(&self) -> &[Complex64];
    fn is_real(&self) -> bool;
}

/// Real-valued samples.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

/// Complex-valued samples.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<TorusGrid>,
    values: Vec<Complex64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

/// Either flavour; returned where the kind depends on the operation.
#[derive(Debug, Clone)]
pub enum Field {
    Real(RealField),
    Complex(ComplexField),
}

pub(crate) fn check_same_grid(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::config(format!(
            "grid mismatch: ({}, {}) vs ({}, {})",
            a.n_per_dim(),
            a.side_length(),
            b.n_per_dim(),
            b.side_length()
        )))
    }
}

impl RealField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::from_values_unchecked(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Arc<TorusGrid>, c: f64) -> Self {
        Self::from_values_unchecked(grid, vec![c; grid.len()])
    }

    pub fn from_values(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Self {
        RealField {
            grid: Arc::clone(grid),
            values,
            spectrum: OnceLock::new(),
        }
    }

    /// Samples `f(x1, x2)` at the grid points.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n_per_dim();
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            let x1 = grid.coord(i);
            for j in 0..n {
                v.push(f(x1, grid.coord(j)));
            }
        }
        Self::from_values_unchecked(grid, v)
    }

    /// Builds from a spectrum assumed Hermitian; the imaginary residue of
    /// the inverse transform is dropped.
    pub fn from_spectrum(grid: &Arc<TorusGrid>, coeffs: Vec<Complex64>) -> Self {
        let values = grid.inverse(&coeffs).into_iter().map(|z| z.re).collect();
        let f = Self::from_values_unchecked(grid, values);
        let _ = f.spectrum.set(coeffs);
        f
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_complex(&self) -> ComplexField {
        let c = ComplexField::from_values_unchecked(
            &self.grid,
            self.values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        );
        if let Some(s) = self.spectrum.get() {
            let _ = c.spectrum.set(s.clone());
        }
        c
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, a: f64) -> RealField {
        self.map(|x| a * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    /// Largest magnitude on the outermost ring of samples.
    pub fn edge_max(&self) -> f64 {
        let n = self.grid.n_per_dim();
        let mut m = 0.0f64;
        for k in 0..n {
            for idx in [k, (n - 1) * n + k, k * n, k * n + n - 1] {
                m = m.max(self.values[idx].abs());
            }
        }
        m
    }

    /// Applies a multiplier with `m(-xi) = conj(m(xi))`, keeping the result real.
    pub fn apply_real_multiplier(&self, m: impl Fn(f64, f64) -> Complex64) -> Result<RealField> {
        match apply_multiplier(&Field::Real(self.clone()), m)? {
            Field::Real(r) => Ok(r),
            Field::Complex(_) => Err(Error::config(
                "multiplier lacks the symmetry m(-xi) = conj(m(xi)) needed for a real result",
            )),
        }
    }

    pub fn laplacian(&self) -> RealField {
        let s: Vec<Complex64> = self
            .spectrum()
            .iter()
            .zip(self.grid.xi_squared())
            .map(|(c, k2)| c * -k2)
            .collect();
        RealField::from_spectrum(&self.grid, s)
    }

    /// Spectral gradient; the unpaired Nyquist mode is dropped.
    pub fn gradient(&self) -> [RealField; 2] {
        let [a, b] = gradient_spectra(&self.grid, self.spectrum());
        [
            RealField::from_spectrum(&self.grid, a),
            RealField::from_spectrum(&self.grid, b),
        ]
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_of_spectrum(&self.grid, self.spectrum(), s)
    }
}

impl Spectral for RealField {
    fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let z: Vec<Complex64> = self.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            self.grid.forward(&z)
        })
    }

    fn is_real(&self) -> bool {
        true
    }
}

impl ComplexField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::from_values_unchecked(grid, vec![ZERO; grid.len()])
    }

    pub fn constant(grid: &Arc<TorusGrid>, c: Complex64) -> Self {
        Self::from_values_unchecked(grid, vec![c; grid.len()])
    }

    pub fn from_values(grid: &Arc<TorusGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<TorusGrid>, values: Vec<Complex64>) -> Self {
        ComplexField {
            grid: Arc::clone(grid),
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n_per_dim();
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            let x1 = grid.coord(i);
            for j in 0..n {
                v.push(f(x1, grid.coord(j)));
            }
        }
        Self::from_values_unchecked(grid, v)
    }

    pub fn from_spectrum(grid: &Arc<TorusGrid>, coeffs: Vec<Complex64>) -> Self {
        let values = grid.inverse(&coeffs);
        let f = Self::from_values_unchecked(grid, values);
        let _ = f.spectrum.set(coeffs);
        f
    }

    /// `re + i im` from two real fields.
    pub fn from_parts(re: &RealField, im: &RealField) -> Result<Self> {
        check_same_grid(&re.grid, &im.grid)?;
        let v = re
            .values
            .iter()
            .zip(&im.values)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Ok(Self::from_values_unchecked(&re.grid, v))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn re(&self) -> RealField {
        RealField::from_values_unchecked(&self.grid, self.values.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> RealField {
        RealField::from_values_unchecked(&self.grid, self.values.iter().map(|z| z.im).collect())
    }

    pub fn conj(&self) -> ComplexField {
        let f = Self::from_values_unchecked(&self.grid, self.values.iter().map(|z| z.conj()).collect());
        if let Some(s) = self.spectrum.get() {
            // conj of sum c_k e^{ik.x} has coefficient conj(c_{-k})
            let _ = f.spectrum.set(conj_reflect(&self.grid, s));
        }
        f
    }

    pub fn scale(&self, a: Complex64) -> ComplexField {
        let f = Self::from_values_unchecked(&self.grid, self.values.iter().map(|z| z * a).collect());
        if let Some(s) = self.spectrum.get() {
            let _ = f.spectrum.set(s.iter().map(|z| z * a).collect());
        }
        f
    }

    pub fn scale_re(&self, a: f64) -> ComplexField {
        self.scale(Complex64::new(a, 0.0))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|&z| f(z)).collect())
    }

    /// Pointwise product without dealiasing; only for factors that are
    /// themselves band-limited to a single mode or constant.
    pub fn mul_pointwise(&self, other: &ComplexField) -> ComplexField {
        let v = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self::from_values_unchecked(&self.grid, v)
    }

    /// Squared modulus samples.
    pub fn norm_sqr(&self) -> RealField {
        RealField::from_values_unchecked(&self.grid, self.values.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn apply_multiplier(&self, m: impl Fn(f64, f64) -> Complex64) -> Result<ComplexField> {
        let table = self.grid.multiplier_table(m);
        check_table(&table)?;
        let s = self.spectrum().iter().zip(&table).map(|(c, m)| c * m).collect();
        Ok(ComplexField::from_spectrum(&self.grid, s))
    }

    pub fn laplacian(&self) -> ComplexField {
        let s = self
            .spectrum()
            .iter()
            .zip(self.grid.xi_squared())
            .map(|(c, k2)| c * -k2)
            .collect();
        ComplexField::from_spectrum(&self.grid, s)
    }

    /// Spectral gradient; the unpaired Nyquist mode is dropped.
    pub fn gradient(&self) -> [ComplexField; 2] {
        let [a, b] = gradient_spectra(&self.grid, self.spectrum());
        [
            ComplexField::from_spectrum(&self.grid, a),
            ComplexField::from_spectrum(&self.grid, b),
        ]
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_of_spectrum(&self.grid, self.spectrum(), s)
    }
}

impl Spectral for ComplexField {
    fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    fn is_real(&self) -> bool {
        false
    }
}

impl Spectral for Field {
    fn grid(&self) -> &Arc<TorusGrid> {
        match self {
            Field::Real(f) => f.grid(),
            Field::Complex(f) => f.grid(),
        }
    }

    fn spectrum(&self) -> &[Complex64] {
        match self {
            Field::Real(f) => f.spectrum(),
            Field::Complex(f) => f.spectrum(),
        }
    }

    fn is_real(&self) -> bool {
        matches!(self, Field::Real(_))
    }
}

impl Field {
    pub fn to_complex(&self) -> ComplexField {
        match self {
            Field::Real(f) => f.to_complex(),
            Field::Complex(f) => f.clone(),
        }
    }
}

macro_rules! impl_arith {
    ($t:ty) => {
        impl Add for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                assert!(*self.grid == *rhs.grid, "grid mismatch");
                let v = self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect();
                <$t>::from_values_unchecked(&self.grid, v)
            }
        }

        impl Sub for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                assert!(*self.grid == *rhs.grid, "grid mismatch");
                let v = self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect();
                <$t>::from_values_unchecked(&self.grid, v)
            }
        }

        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                <$t>::from_values_unchecked(&self.grid, self.values.iter().map(|a| -a).collect())
            }
        }
    };
}

impl_arith!(RealField);
impl_arith!(ComplexField);

impl Mul<&ComplexField> for Complex64 {
    type Output = ComplexField;
    fn mul(self, rhs: &ComplexField) -> ComplexField {
        rhs.scale(self)
    }
}

impl Mul<&RealField> for f64 {
    type Output = RealField;
    fn mul(self, rhs: &RealField) -> RealField {
        rhs.scale(self)
    }
}

fn check_table(table: &[Complex64]) -> Result<()> {
    if let Some(pos) = table.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical(format!(
            "multiplier is not finite at spectral index {pos}"
        )));
    }
    Ok(())
}

/// Coefficients of `conj(f)` from those of `f`: `c'_k = conj(c_{-k})`.
fn conj_reflect(grid: &TorusGrid, s: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n_per_dim();
    let neg = |i: usize| (n - i) % n;
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = s[neg(i) * n + neg(j)].conj();
        }
    }
    out
}

/// `c'_k = m(xi_k) c_k`. The output is real when `f` is real and the
/// multiplier table is Hermitian-symmetric on every paired mode.
pub fn apply_multiplier(f: &Field, m: impl Fn(f64, f64) -> Complex64) -> Result<Field> {
    let grid = f.grid();
    let table = grid.multiplier_table(m);
    check_table(&table)?;
    let s: Vec<Complex64> = f.spectrum().iter().zip(&table).map(|(c, m)| c * m).collect();
    if f.is_real() && is_hermitian_table(grid, &table) {
        Ok(Field::Real(RealField::from_spectrum(grid, s)))
    } else {
        Ok(Field::Complex(ComplexField::from_spectrum(grid, s)))
    }
}

fn is_hermitian_table(grid: &TorusGrid, table: &[Complex64]) -> bool {
    let n = grid.n_per_dim();
    let scale = table.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    for i in 0..n {
        for j in 0..n {
            let (ni, nj) = ((n - i) % n, (n - j) % n);
            let a = table[i * n + j];
            let b = table[ni * n + nj];
            if grid.is_nyquist(i) || grid.is_nyquist(j) {
                // unpaired mode: the coefficient of a real field is real
                // along that axis only if m is real there
                if a.im.abs() > 1e-14 * scale {
                    return false;
                }
                continue;
            }
            if (a - b.conj()).norm() > 1e-14 * scale {
                return false;
            }
        }
    }
    true
}

pub(crate) fn gradient_spectra(grid: &TorusGrid, s: &[Complex64]) -> [Vec<Complex64>; 2] {
    let n = grid.n_per_dim();
    let mut a = vec![ZERO; n * n];
    let mut b = vec![ZERO; n * n];
    for i in 0..n {
        let k1 = if grid.is_nyquist(i) { 0.0 } else { grid.xi(i) };
        for j in 0..n {
            let k2 = if grid.is_nyquist(j) { 0.0 } else { grid.xi(j) };
            let c = s[i * n + j];
            a[i * n + j] = Complex64::new(-k1 * c.im, k1 * c.re);
            b[i * n + j] = Complex64::new(-k2 * c.im, k2 * c.re);
        }
    }
    [a, b]
}

pub(crate) fn sobolev_of_spectrum(grid: &TorusGrid, s: &[Complex64], order: f64) -> f64 {
    let l2 = grid.side_length() * grid.side_length();
    let sum: f64 = if order == 0.0 {
        s.iter().map(|c| c.norm_sqr()).sum()
    } else {
        s.iter()
            .zip(grid.xi_squared())
            .map(|(c, k2)| (1.0 + k2).powf(order) * c.norm_sqr())
            .sum()
    };
    (sum * l2).sqrt()
}

/// Fraction of spectral mass in the top octave, `max(|k1|, |k2|) >= n/4`.
pub fn spectral_tail(grid: &TorusGrid, s: &[Complex64]) -> f64 {
    band_fraction(grid, s, grid.n_per_dim() / 4)
}

/// Fraction of spectral mass with `max(|k1|, |k2|) >= cut`.
pub fn band_fraction(grid: &TorusGrid, s: &[Complex64], cut: usize) -> f64 {
    let n = grid.n_per_dim();
    let cut = cut as i64;
    let mut total = 0.0;
    let mut outer = 0.0;
    for i in 0..n {
        let ki = grid.mode(i).abs();
        for j in 0..n {
            let w = s[i * n + j].norm_sqr();
            total += w;
            if ki >= cut || grid.mode(j).abs() >= cut {
                outer += w;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

/// Discrete `H^s` norm `( sum_k (1+|xi_k|^2)^s |c_k|^2 L^2 )^{1/2}`.
pub fn sobolev_norm<F: Spectral>(f: &F, s: f64) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::config(format!("Sobolev index must be >= 0, got {s}")));
    }
    let v = sobolev_of_spectrum(f.grid(), f.spectrum(), s);
    if !v.is_finite() {
        return Err(Error::Numerical("non-finite Sobolev norm".into()));
    }
    Ok(v)
}

/// Sampled `L^2` norm, `(sum |f|^2 h^2)^{1/2}`.
pub fn l2_norm_samples(values: impl Iterator<Item = f64>, grid: &TorusGrid) -> f64 {
    let h = grid.spacing();
    (values.map(|x| x * x).sum::<f64>() * h * h).sqrt()
}

/// Dealiased product `P(a b c)` of three complex fields.
pub fn dealiased_cube(a: &ComplexField, b: &ComplexField, c: &ComplexField) -> Result<ComplexField> {
    check_same_grid(&a.grid, &b.grid)?;
    check_same_grid(&a.grid, &c.grid)?;
    let s = a.grid.cube_spectra(a.spectrum(), b.spectrum(), c.spectrum());
    Ok(ComplexField::from_spectrum(&a.grid, s))
}

/// Dealiased product `P(a b c)` of three real fields.
pub fn dealiased_cube_real(a: &RealField, b: &RealField, c: &RealField) -> Result<RealField> {
    check_same_grid(&a.grid, &b.grid)?;
    check_same_grid(&a.grid, &c.grid)?;
    let s = a.grid.cube_spectra(a.spectrum(), b.spectrum(), c.spectrum());
    Ok(RealField::from_spectrum(&a.grid, s))
}

/// Dealiased cube on either flavour; real only when all three inputs are real.
pub fn dealiased_cube_any(a: &Field, b: &Field, c: &Field) -> Result<Field> {
    match (a, b, c) {
        (Field::Real(x), Field::Real(y), Field::Real(z)) => dealiased_cube_real(x, y, z).map(Field::Real),
        _ => dealiased_cube(&a.to_complex(), &b.to_complex(), &c.to_complex()).map(Field::Complex),
    }
}

/// Dealiased product `P(a b)`.
pub fn dealiased_product(a: &ComplexField, b: &ComplexField) -> Result<ComplexField> {
    check_same_grid(&a.grid, &b.grid)?;
    let s = a.grid.product_spectra(a.spectrum(), b.spectrum());
    Ok(ComplexField::from_spectrum(&a.grid, s))
}
