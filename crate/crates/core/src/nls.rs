//! Profile equations: the cubic Schrödinger flow for `g0` and the forced
//! linear Schrödinger flow for the corrector `g2`, plus their time
//! derivatives obtained by substituting the equations.
//!
//! Every product is dealiased, so the profiles solve the same Galerkin
//! truncation that the Klein-Gordon reference solver uses.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{check_same_grid, sobolev_of_spectrum, band_fraction, ComplexField, RealField, Spectral};
use crate::grid::{PadWorkspace, TorusGrid};
use crate::jet::Jet;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// H^1 growth factor that trips the focusing monitor.
pub const BLOWUP_H1_FACTOR: f64 = 1e6;

/// Spectral mass fraction with `max(|k1|, |k2|) >= 3n/8` that also trips the
/// monitor: a truncated Galerkin system cannot blow up, it loses resolution
/// instead.
/// The effective threshold is never below ten times the initial fraction.
pub const BLOWUP_TAIL_FRACTION: f64 = 1e-4;

/// Parameters of a profile solve.
#[derive(Debug, Clone)]
pub struct NlsParams {
    pub lambda: f64,
    pub grid: Arc<TorusGrid>,
    pub dt: f64,
    pub t_final: f64,
    /// Allows `lambda = 0`; only meant for oracle tests.
    pub linear_mode: bool,
}

impl NlsParams {
    pub fn new(lambda: f64, grid: &Arc<TorusGrid>, dt: f64, t_final: f64) -> Result<Self> {
        let p = NlsParams {
            lambda,
            grid: Arc::clone(grid),
            dt,
            t_final,
            linear_mode: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn linear(grid: &Arc<TorusGrid>, dt: f64, t_final: f64) -> Result<Self> {
        let p = NlsParams {
            lambda: 0.0,
            grid: Arc::clone(grid),
            dt,
            t_final,
            linear_mode: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.dt > self.t_final {
            return Err(Error::config("dt must not exceed t_final"));
        }
        if !self.lambda.is_finite() || (self.lambda == 0.0 && !self.linear_mode) {
            return Err(Error::config("lambda must be finite and non-zero"));
        }
        Ok(())
    }
}

/// `g0(0) = (phi - i psi) / 2`.
pub fn init_g0(phi: &RealField, psi: &RealField) -> Result<ComplexField> {
    check_same_grid(phi.grid(), psi.grid())?;
    let v = phi
        .values()
        .iter()
        .zip(psi.values())
        .map(|(&a, &b)| Complex64::new(0.5 * a, -0.5 * b))
        .collect();
    ComplexField::from_values(phi.grid(), v)
}

/// Reusable state for stepping the profile equations on spectra.
pub(crate) struct NlsStepper {
    grid: Arc<TorusGrid>,
    lambda: f64,
    ws: PadWorkspace,
    xi2: Vec<f64>,
    phase: Option<(u64, Vec<Complex64>)>,
}

impl NlsStepper {
    pub(crate) fn new(grid: &Arc<TorusGrid>, lambda: f64) -> Self {
        NlsStepper {
            grid: Arc::clone(grid),
            lambda,
            ws: PadWorkspace::new(grid.n_per_dim()),
            xi2: grid.xi_squared(),
            phase: None,
        }
    }

    /// Free flow `exp(i |xi|^2 tau / 2)` applied in place.
    fn linear(&mut self, s: &mut [Complex64], tau: f64) {
        let key = tau.to_bits();
        if self.phase.as_ref().map(|p| p.0) != Some(key) {
            let table = self.xi2.iter().map(|k2| Complex64::from_polar(1.0, 0.5 * k2 * tau)).collect();
            self.phase = Some((key, table));
        }
        let table = &self.phase.as_ref().unwrap().1;
        for (c, p) in s.iter_mut().zip(table) {
            *c *= p;
        }
    }

    /// `(3 i lambda / 2) P(|g|^2 g)`.
    fn nonlinear_rhs(&mut self, s: &[Complex64]) -> Vec<Complex64> {
        let a = I * (1.5 * self.lambda);
        let mut out = self.grid.abs2_cube_with(&mut self.ws, s);
        for z in out.iter_mut() {
            *z *= a;
        }
        out
    }

    /// Nonlinear sub-flow over `tau`, one classical RK4 stage set.
    fn nonlinear(&mut self, s: &mut [Complex64], tau: f64) {
        if self.lambda == 0.0 {
            return;
        }
        let k1 = self.nonlinear_rhs(s);
        let y: Vec<_> = s.iter().zip(&k1).map(|(a, k)| a + k * (0.5 * tau)).collect();
        let k2 = self.nonlinear_rhs(&y);
        let y: Vec<_> = s.iter().zip(&k2).map(|(a, k)| a + k * (0.5 * tau)).collect();
        let k3 = self.nonlinear_rhs(&y);
        let y: Vec<_> = s.iter().zip(&k3).map(|(a, k)| a + k * tau).collect();
        let k4 = self.nonlinear_rhs(&y);
        for i in 0..s.len() {
            s[i] += (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) * (tau / 6.0);
        }
    }

    /// Strang step: half nonlinear, full linear, half nonlinear.
    pub(crate) fn step(&mut self, s: &mut [Complex64], dt: f64) {
        if self.lambda != 0.0 {
            self.grid.drop_nyquist(s);
        }
        self.nonlinear(s, 0.5 * dt);
        self.linear(s, dt);
        self.nonlinear(s, 0.5 * dt);
    }

    /// One `g2` step with `g0` frozen at the midpoint spectrum `g0_mid`.
    pub(crate) fn g2_step(&mut self, s: &mut [Complex64], g0_mid: &[Complex64], dt: f64) {
        self.grid.drop_nyquist(s);
        self.linear(s, 0.5 * dt);
        let coeffs = G2Coefficients::new(&self.grid, self.lambda, g0_mid, &self.xi2);
        let rhs = |y: &[Complex64], ws: &mut PadWorkspace| coeffs.rhs(&self.grid, y, ws);
        let k1 = rhs(s, &mut self.ws);
        let y: Vec<_> = s.iter().zip(&k1).map(|(a, k)| a + k * (0.5 * dt)).collect();
        let k2 = rhs(&y, &mut self.ws);
        let y: Vec<_> = s.iter().zip(&k2).map(|(a, k)| a + k * (0.5 * dt)).collect();
        let k3 = rhs(&y, &mut self.ws);
        let y: Vec<_> = s.iter().zip(&k3).map(|(a, k)| a + k * dt).collect();
        let k4 = rhs(&y, &mut self.ws);
        for i in 0..s.len() {
            s[i] += (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) * (dt / 6.0);
        }
        self.linear(s, 0.5 * dt);
    }
}

/// Frozen coefficients of the local part of the `g2` equation,
/// `d/dt g2 = (3 i lambda / 2)(g0^2 conj(g2) + 2 |g0|^2 g2) + source`.
struct G2Coefficients {
    g0_sq: Vec<Complex64>,
    g0_abs2: Vec<f64>,
    source: Vec<Complex64>,
    a: Complex64,
}

impl G2Coefficients {
    fn new(grid: &Arc<TorusGrid>, lambda: f64, g0: &[Complex64], xi2: &[f64]) -> Self {
        let big = grid.padded_samples(g0);
        let source = g2_source(grid, lambda, g0, &big, xi2);
        let g0_sq = big.iter().map(|z| z * z).collect();
        let g0_abs2 = big.iter().map(|z| z.norm_sqr()).collect();
        G2Coefficients {
            g0_sq,
            g0_abs2,
            source,
            a: I * (1.5 * lambda),
        }
    }

    fn rhs(&self, grid: &TorusGrid, y: &[Complex64], ws: &mut PadWorkspace) -> Vec<Complex64> {
        let mut out = if self.a == ZERO {
            vec![ZERO; y.len()]
        } else {
            let big = ws.scratch();
            grid.padded_samples_into(y, big);
            for ((z, sq), ab) in big.iter_mut().zip(&self.g0_sq).zip(&self.g0_abs2) {
                *z = (sq * z.conj() + *z * (2.0 * ab)) * self.a;
            }
            grid.project_padded(big)
        };
        for (o, s) in out.iter_mut().zip(&self.source) {
            *o += s;
        }
        out
    }
}

/// `(i/2)(d^2/dt^2 g0 + (3 lambda^2 / 8) |g0|^4 g0)` from the spectrum `g0`
/// and its padded samples `big`, in seven padded transforms.
fn g2_source(grid: &TorusGrid, lambda: f64, g0: &[Complex64], big: &[Complex64], xi2: &[f64]) -> Vec<Complex64> {
    let a = I * (1.5 * lambda);
    let lin = |s: &[Complex64], k: usize| I * (0.5 * xi2[k]) * s[k];
    let mut work: Vec<Complex64> = big.iter().map(|z| z * z.norm_sqr()).collect();
    let n1 = grid.project_padded(&mut work);
    let g1: Vec<Complex64> = (0..g0.len()).map(|k| lin(g0, k) + a * n1[k]).collect();
    let big1 = grid.padded_samples(&g1);
    let mut work: Vec<Complex64> = big
        .iter()
        .zip(&big1)
        .map(|(g, d)| d * (2.0 * g.norm_sqr()) + g * g * d.conj())
        .collect();
    let m = grid.project_padded(&mut work);
    let mut out: Vec<Complex64> = (0..g0.len()).map(|k| lin(&g1, k) + a * m[k]).collect();
    if lambda != 0.0 {
        let mut work: Vec<Complex64> = big.iter().map(|z| z * z * z).collect();
        let cube = grid.project_padded(&mut work);
        let mut work = grid.padded_samples(&cube);
        for (w, g) in work.iter_mut().zip(big) {
            let c = g.conj();
            *w *= c * c;
        }
        let q = grid.project_padded(&mut work);
        let b = 3.0 * lambda * lambda / 8.0;
        for (o, q) in out.iter_mut().zip(q) {
            *o += q * b;
        }
    }
    for o in out.iter_mut() {
        *o *= 0.5 * I;
    }
    out
}

/// One Strang step of the cubic Schrödinger flow,
/// `d/dt g = -(i/2) Lap g + (3 i lambda / 2) P(|g|^2 g)`.
pub fn nls_step(g: &ComplexField, params: &NlsParams, dt: f64) -> Result<ComplexField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    check_same_grid(g.grid(), &params.grid)?;
    let mut st = NlsStepper::new(&params.grid, params.lambda);
    let mut s = g.spectrum().to_vec();
    st.step(&mut s, dt);
    finite_or_blowup(&s, dt, "g0")?;
    Ok(ComplexField::from_spectrum(&params.grid, s))
}

fn finite_or_blowup(s: &[Complex64], time: f64, what: &str) -> Result<()> {
    if s.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp {
            time,
            what: format!("{what} became non-finite"),
        })
    }
}

/// Right-hand side of the `g0` equation as a jet map: feeding a jet of
/// order `k` returns the derivative jet of order `k`.
fn g0_rhs(g: &Jet, lambda: f64) -> Jet {
    let lin = g.laplacian().scale(-0.5 * I);
    if lambda == 0.0 {
        return lin;
    }
    let cube = Jet::cube(g, g, &g.conj());
    lin.add(&cube.scale(I * (1.5 * lambda)))
}

/// `d/dt g0 = -(i/2) Lap g0 + (3 i lambda / 2) |g0|^2 g0`.
pub fn dt_g0(g: &ComplexField, lambda: f64) -> ComplexField {
    g0_rhs(&Jet::constant(g.clone()), lambda).value().clone()
}

/// `d^2/dt^2 g0`, the equation differentiated once with `dt_g0` substituted.
pub fn dtt_g0(g: &ComplexField, lambda: f64) -> ComplexField {
    g0_jet(g, lambda, 2).term(2).clone()
}

/// Taylor jet `(g0, g0', ..., g0^(order))` at one instant.
pub fn g0_jet(g: &ComplexField, lambda: f64, order: usize) -> Jet {
    let mut jet = Jet::constant(g.clone());
    for _ in 0..order {
        jet = g0_rhs(&jet, lambda).integrate_with(g.clone());
    }
    jet
}

/// `P(conj(g0) conj(g0) P(g0^3))`, the Galerkin form of `|g0|^4 g0`.
pub(crate) fn quintic_jet(g0: &Jet) -> Jet {
    let cube = Jet::cube(g0, g0, g0);
    let c = g0.conj();
    Jet::cube(&c, &c, &cube)
}

fn f21_jet(g0: &Jet, g2: &Jet, lambda: f64) -> Jet {
    let g0c = g0.conj();
    let a = Jet::cube(g0, g0, &g2.conj());
    let b = Jet::cube(g0, &g0c, g2).scale_re(2.0);
    let c = quintic_jet(g0).scale_re(lambda / 8.0);
    a.add(&b).add(&c).scale_re(3.0 * lambda)
}

/// `f21 = 3 lambda (g0^2 conj(g2) + 2 |g0|^2 g2 + (lambda/8) |g0|^4 g0)`.
pub fn f21(g0: &ComplexField, g2: &ComplexField, lambda: f64) -> Result<ComplexField> {
    check_same_grid(g0.grid(), g2.grid())?;
    Ok(f21_jet(&Jet::constant(g0.clone()), &Jet::constant(g2.clone()), lambda)
        .value()
        .clone())
}

/// `g2(0)` chosen so that the second-order block of the approximation
/// vanishes at `t = 0`:
/// `Im g2 = -Lap psi / 4 + (21 lambda/64) phi^2 psi + (9 lambda/64) psi^3`,
/// `Re g2 = -(lambda/64)(phi^3 - 3 phi psi^2)`.
pub fn g2_initial(phi: &RealField, psi: &RealField, lambda: f64) -> Result<ComplexField> {
    check_same_grid(phi.grid(), psi.grid())?;
    let grid = phi.grid();
    let (p, q) = (phi.spectrum(), psi.spectrum());
    let ppp = grid.cube_spectra(p, p, p);
    let ppq = grid.cube_spectra(p, p, q);
    let pqq = grid.cube_spectra(p, q, q);
    let qqq = grid.cube_spectra(q, q, q);
    let xi2 = grid.xi_squared();
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        im.push(
            q[k] * (0.25 * xi2[k]) + ppq[k] * (21.0 * lambda / 64.0) + qqq[k] * (9.0 * lambda / 64.0),
        );
        re.push((ppp[k] - pqq[k] * 3.0) * (-lambda / 64.0));
    }
    let s = re.iter().zip(&im).map(|(a, b)| a + I * b).collect();
    Ok(ComplexField::from_spectrum(grid, s))
}

fn g2_rhs(g2: &Jet, g0: &Jet, lambda: f64) -> Jet {
    // d/dt g2 = (i/2)(g0'' - Lap g2 + f21)
    let g0tt = g0.dt().dt();
    let mut acc = g2.laplacian().scale_re(-1.0);
    if lambda != 0.0 {
        acc = acc.add(&f21_jet(g0, g2, lambda));
    }
    acc.add(&g0tt).scale(0.5 * I)
}

/// `d/dt g2 = (i/2)(d^2/dt^2 g0 - Lap g2 + f21)`.
pub fn dt_g2(g2: &ComplexField, g0: &ComplexField, lambda: f64) -> ComplexField {
    let g0j = g0_jet(g0, lambda, 2);
    g2_rhs(&Jet::constant(g2.clone()), &g0j, lambda).value().clone()
}

/// Taylor jet of `g2`; `g0` must carry at least `order + 1` more derivatives
/// than requested here, which `g0_jet(_, _, order + 2)` provides.
pub fn g2_jet(g2: &ComplexField, g0: &Jet, lambda: f64, order: usize) -> Jet {
    assert!(g0.order() > order, "g0 jet too short for g2 jet of order {order}");
    let mut jet = Jet::constant(g2.clone());
    for _ in 0..order {
        jet = g2_rhs(&jet, g0, lambda).integrate_with(g2.clone());
    }
    jet
}

/// One `g2` step: half free flow, RK4 of the local part with `g0` frozen at
/// `g0_mid`, half free flow.
pub fn g2_step(
    g2: &ComplexField,
    g0_mid: &ComplexField,
    params: &NlsParams,
    dt: f64,
) -> Result<ComplexField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    check_same_grid(g2.grid(), &params.grid)?;
    check_same_grid(g0_mid.grid(), &params.grid)?;
    let mut st = NlsStepper::new(&params.grid, params.lambda);
    let mut s = g2.spectrum().to_vec();
    st.g2_step(&mut s, g0_mid.spectrum(), dt);
    finite_or_blowup(&s, dt, "g2")?;
    Ok(ComplexField::from_spectrum(&params.grid, s))
}

/// Time-indexed profiles. Snapshots are exact solver states, never
/// interpolated.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    grid: Arc<TorusGrid>,
    lambda: f64,
    times: Vec<f64>,
    g0: Vec<ComplexField>,
    g2: Option<Vec<ComplexField>>,
    truncated_at: Option<f64>,
}

/// Tolerance for matching a requested time against a stored one.
fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl ProfileSet {
    /// A set holding only the instant `t` (used by direct harmonic builds).
    pub fn from_snapshot(t: f64, lambda: f64, g0: ComplexField, g2: Option<ComplexField>) -> Self {
        ProfileSet {
            grid: Arc::clone(g0.grid()),
            lambda,
            times: vec![t],
            g0: vec![g0],
            g2: g2.map(|g| vec![g]),
            truncated_at: None,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn has_g2(&self) -> bool {
        self.g2.is_some()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated_at.is_some()
    }

    /// Time at which the focusing monitor tripped.
    pub fn truncated_at(&self) -> Option<f64> {
        self.truncated_at
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| same_time(s, t))
            .ok_or(Error::MissingTime(t))
    }

    pub fn g0(&self, t: f64) -> Result<&ComplexField> {
        Ok(&self.g0[self.index_of(t)?])
    }

    pub fn g2(&self, t: f64) -> Result<&ComplexField> {
        let idx = self.index_of(t)?;
        match &self.g2 {
            Some(v) => Ok(&v[idx]),
            None => Err(Error::config("profile set was solved without g2")),
        }
    }

    pub fn dt_g0(&self, t: f64) -> Result<ComplexField> {
        Ok(dt_g0(self.g0(t)?, self.lambda))
    }

    pub fn dtt_g0(&self, t: f64) -> Result<ComplexField> {
        Ok(dtt_g0(self.g0(t)?, self.lambda))
    }

    pub fn dt_g2(&self, t: f64) -> Result<ComplexField> {
        Ok(dt_g2(self.g2(t)?, self.g0(t)?, self.lambda))
    }

    /// `g0` jet of the given order at `t`.
    pub fn g0_jet(&self, t: f64, order: usize) -> Result<Jet> {
        Ok(g0_jet(self.g0(t)?, self.lambda, order))
    }

    /// `g2` jet of the given order at `t`, or zeros when `g2` was not solved.
    pub fn g2_jet(&self, t: f64, order: usize) -> Result<Jet> {
        if self.g2.is_none() {
            return Ok(Jet::zeros(&self.grid, order));
        }
        let g0 = self.g0_jet(t, order + 2)?;
        Ok(g2_jet(self.g2(t)?, &g0, self.lambda, order))
    }

    /// Discrete mass `sum |g0|^2 h^2` at every stored time.
    pub fn masses(&self) -> Vec<f64> {
        let h2 = self.grid.spacing().powi(2);
        self.g0
            .iter()
            .map(|g| g.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * h2)
            .collect()
    }

    /// Rows `(time, mass, energy, h1_norm, linf_norm)` for the manifest CSV.
    pub fn manifest_rows(&self) -> Vec<[f64; 5]> {
        let masses = self.masses();
        self.times
            .iter()
            .zip(&self.g0)
            .zip(masses)
            .map(|((&t, g), m)| [t, m, nls_energy(g, self.lambda), g.sobolev_norm(1.0), g.max_abs()])
            .collect()
    }
}

/// `E = int (1/4)|grad g|^2 + (3 lambda / 8)|g|^4`; the quartic term is
/// integrated on the refined grid where it is resolved.
pub fn nls_energy(g: &ComplexField, lambda: f64) -> f64 {
    let grid = g.grid();
    let n = grid.n_per_dim();
    let l2 = grid.side_length().powi(2);
    let kinetic: f64 = g
        .spectrum()
        .iter()
        .zip(grid.xi_squared())
        .map(|(c, k2)| k2 * c.norm_sqr())
        .sum::<f64>()
        * l2;
    let big = grid.padded_samples(g.spectrum());
    let hf = grid.side_length() / (2 * n) as f64;
    let quartic: f64 = big.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() * hf * hf;
    0.25 * kinetic + 0.375 * lambda * quartic
}

/// Options for a profile solve.
#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Solve the `g2` corrector alongside `g0`.
    pub with_g2: bool,
    /// Stop (and mark truncated) when the focusing monitor trips.
    pub monitor: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            with_g2: true,
            monitor: true,
        }
    }
}

/// Solves `g0` (and optionally `g2`) from `(phi, psi)` up to
/// `params.t_final`, landing exactly on every requested sample time.
///
/// With `g2`, `g0` is advanced in half steps so the `g2` step always sees
/// an exact midpoint state. Intervals between consecutive landing times are
/// split into equal steps no longer than `params.dt`.
pub fn solve_profiles(
    phi: &RealField,
    psi: &RealField,
    params: &NlsParams,
    opts: ProfileOptions,
    sample_times: &[f64],
) -> Result<ProfileSet> {
    params.validate()?;
    check_same_grid(phi.grid(), &params.grid)?;
    check_same_grid(psi.grid(), &params.grid)?;
    let grid = Arc::clone(&params.grid);
    let lambda = params.lambda;

    let mut stops: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= params.t_final * (1.0 + 1e-14))
        .collect();
    stops.push(params.t_final);
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup_by(|a, b| same_time(*a, *b));

    let total_steps: usize = {
        let mut prev = 0.0;
        stops
            .iter()
            .map(|&t| {
                let k = ((t - prev) / params.dt - 1e-9).ceil().max(1.0) as usize;
                prev = t;
                k
            })
            .sum()
    };
    let cadence = total_steps.div_ceil(256).max(1);

    // the stored trajectory starts on the modes the steps act on
    let mut s0 = init_g0(phi, psi)?.spectrum().to_vec();
    if lambda != 0.0 || opts.with_g2 {
        grid.drop_nyquist(&mut s0);
    }
    let g0_init = ComplexField::from_spectrum(&grid, s0.clone());
    let mut s2 = if opts.with_g2 {
        let mut s = g2_initial(phi, psi, lambda)?.spectrum().to_vec();
        grid.drop_nyquist(&mut s);
        Some(s)
    } else {
        None
    };
    let h1_initial = sobolev_of_spectrum(&grid, &s0, 1.0);
    let tail_limit = BLOWUP_TAIL_FRACTION.max(10.0 * band_fraction(&grid, &s0, 3 * grid.n_per_dim() / 8));

    let mut set = ProfileSet {
        grid: Arc::clone(&grid),
        lambda,
        times: vec![0.0],
        g0: vec![g0_init],
        g2: s2.as_ref().map(|s| vec![ComplexField::from_spectrum(&grid, s.clone())]),
        truncated_at: None,
    };

    let mut st = NlsStepper::new(&grid, lambda);
    let mut t = 0.0;
    let mut step_count = 0usize;
    'outer: for &stop in &stops {
        let k = ((stop - t) / params.dt - 1e-9).ceil().max(1.0) as usize;
        let tau = (stop - t) / k as f64;
        let t_start = t;
        for m in 0..k {
            match s2.as_mut() {
                Some(s2) => {
                    st.step(&mut s0, 0.5 * tau);
                    st.g2_step(s2, &s0, tau);
                    st.step(&mut s0, 0.5 * tau);
                }
                None => st.step(&mut s0, tau),
            }
            step_count += 1;
            t = if m + 1 == k { stop } else { t_start + (m + 1) as f64 * tau };

            let finite = s0.iter().chain(s2.iter().flatten()).all(|z| z.re.is_finite() && z.im.is_finite());
            if opts.monitor {
                let tripped = !finite
                    || sobolev_of_spectrum(&grid, &s0, 1.0) > BLOWUP_H1_FACTOR * h1_initial
                    || band_fraction(&grid, &s0, 3 * grid.n_per_dim() / 8) > tail_limit;
                if tripped {
                    set.truncated_at = Some(t);
                    break 'outer;
                }
            } else if !finite {
                return Err(Error::BlowUp {
                    time: t,
                    what: "profile solve became non-finite".into(),
                });
            }

            let at_stop = m + 1 == k;
            if at_stop || step_count.is_multiple_of(cadence) {
                set.times.push(t);
                set.g0.push(ComplexField::from_spectrum(&grid, s0.clone()));
                if let (Some(v), Some(s2)) = (set.g2.as_mut(), s2.as_ref()) {
                    v.push(ComplexField::from_spectrum(&grid, s2.clone()));
                }
            }
        }
    }
    Ok(set)
}
