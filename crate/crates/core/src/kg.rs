//! Reference solver for `eps^2 u_tt - Lap u + u / eps^2 + lambda u^3 = 0`.
//!
//! Strang splitting: half nonlinear kick, exact per-mode linear flow, half
//! kick. The state is carried as spectra of `(u, u_t)`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{check_same_grid, gradient_spectra, spectral_tail, RealField, Spectral};
use crate::grid::{PadWorkspace, TorusGrid};
use crate::wkb::SystemVector;

/// Default `dt / eps^2`.
pub const DEFAULT_SAFETY: f64 = 0.125;

/// Top-octave spectral mass fraction above which a run is under-resolved.
pub const RESOLUTION_TAIL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct KgParams {
    pub eps: f64,
    pub lambda: f64,
    pub grid: Arc<TorusGrid>,
    pub dt: f64,
    pub t_final: f64,
    /// Skip the `dt <= safety * eps^2` check.
    pub dt_override: bool,
    pub safety: f64,
}

impl KgParams {
    /// Parameters with the default step `dt = eps^2 / 8`.
    pub fn new(eps: f64, lambda: f64, grid: &Arc<TorusGrid>, t_final: f64) -> Result<Self> {
        let p = KgParams {
            eps,
            lambda,
            grid: Arc::clone(grid),
            dt: DEFAULT_SAFETY * eps * eps,
            t_final,
            dt_override: false,
            safety: DEFAULT_SAFETY,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_override(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.dt_override = true;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::config("lambda must be finite"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final must be finite and non-negative"));
        }
        if !(self.safety > 0.0) {
            return Err(Error::config("dt safety factor must be positive"));
        }
        let limit = self.safety * self.eps * self.eps;
        if !self.dt_override && self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt = {} exceeds {} * eps^2 = {limit}; set the override to force it",
                self.dt, self.safety
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KgState {
    pub u: RealField,
    pub ut: RealField,
    pub t: f64,
    pub eps: f64,
}

impl KgState {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.u.grid()
    }

    pub fn to_system(&self) -> SystemVector {
        let grid = self.grid();
        let [gx, gy] = gradient_spectra(grid, self.u.spectrum());
        let e = self.eps;
        let scale = |s: Vec<Complex64>| RealField::from_spectrum(grid, s.into_iter().map(|c| c * e).collect());
        SystemVector {
            w: [scale(gx), scale(gy)],
            v: self.ut.scale(e * e),
            u: self.u.clone(),
            t: self.t,
            eps: e,
        }
    }

    /// Top-octave fraction of the spectral mass of `u`.
    pub fn spectral_tail(&self) -> f64 {
        spectral_tail(self.grid(), self.u.spectrum())
    }
}

/// `u = phi`, `u_t = psi / eps^2`.
pub fn kg_init(phi: &RealField, psi: &RealField, eps: f64) -> Result<KgState> {
    check_same_grid(phi.grid(), psi.grid())?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("eps must be positive, got {eps}")));
    }
    Ok(KgState {
        u: phi.clone(),
        ut: psi.scale(1.0 / (eps * eps)),
        t: 0.0,
        eps,
    })
}

/// Per-mode frequencies `eps^-2 sqrt(1 + eps^2 |xi|^2)`.
fn omegas(grid: &TorusGrid, eps: f64) -> Vec<f64> {
    let e2 = eps * eps;
    grid.xi_squared()
        .into_iter()
        .map(|k2| (1.0 + e2 * k2).sqrt() / e2)
        .collect()
}

/// Spectral stepper with cached propagator tables.
pub(crate) struct KgStepper {
    grid: Arc<TorusGrid>,
    eps: f64,
    lambda: f64,
    omega: Vec<f64>,
    table: Option<(u64, Vec<[f64; 3]>)>,
    ws: PadWorkspace,
}

impl KgStepper {
    pub(crate) fn new(grid: &Arc<TorusGrid>, eps: f64, lambda: f64) -> Self {
        KgStepper {
            grid: Arc::clone(grid),
            eps,
            lambda,
            omega: omegas(grid, eps),
            table: None,
            ws: PadWorkspace::new(grid.n_per_dim()),
        }
    }

    pub(crate) fn linear(&mut self, u: &mut [Complex64], ut: &mut [Complex64], dt: f64) {
        if dt == 0.0 {
            return;
        }
        let key = dt.to_bits();
        if self.table.as_ref().map(|t| t.0) != Some(key) {
            let tab = self
                .omega
                .iter()
                .map(|&w| {
                    let (s, c) = (w * dt).sin_cos();
                    [c, s / w, w * s]
                })
                .collect();
            self.table = Some((key, tab));
        }
        let tab = &self.table.as_ref().unwrap().1;
        for ((a, b), &[c, s_over_w, w_s]) in u.iter_mut().zip(ut.iter_mut()).zip(tab) {
            let (u0, v0) = (*a, *b);
            *a = u0 * c + v0 * s_over_w;
            *b = v0 * c - u0 * w_s;
        }
    }

    pub(crate) fn kick(&mut self, u: &[Complex64], ut: &mut [Complex64], dt: f64) {
        if self.lambda == 0.0 || dt == 0.0 {
            return;
        }
        let cube = self.grid.real_cube_with(&mut self.ws, u);
        let a = dt * self.lambda / (self.eps * self.eps);
        for (v, c) in ut.iter_mut().zip(cube) {
            *v -= c * a;
        }
    }

    /// `steps` Strang steps of size `dt` with adjacent half kicks merged.
    pub(crate) fn advance(&mut self, u: &mut [Complex64], ut: &mut [Complex64], dt: f64, steps: usize) {
        if steps == 0 {
            return;
        }
        if self.lambda != 0.0 {
            self.grid.drop_nyquist(u);
            self.grid.drop_nyquist(ut);
        }
        self.kick(u, ut, 0.5 * dt);
        for k in 0..steps {
            self.linear(u, ut, dt);
            let w = if k + 1 == steps { 0.5 } else { 1.0 };
            self.kick(u, ut, w * dt);
        }
    }
}

fn finite(s: &[Complex64]) -> bool {
    s.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn state_from_spectra(grid: &Arc<TorusGrid>, u: Vec<Complex64>, ut: Vec<Complex64>, t: f64, eps: f64) -> KgState {
    KgState {
        u: RealField::from_spectrum(grid, u),
        ut: RealField::from_spectrum(grid, ut),
        t,
        eps,
    }
}

/// Exact linear flow over `dt` (any sign).
pub fn kg_linear_flow(state: &KgState, dt: f64) -> KgState {
    let grid = state.grid();
    let mut st = KgStepper::new(grid, state.eps, 0.0);
    let mut u = state.u.spectrum().to_vec();
    let mut ut = state.ut.spectrum().to_vec();
    st.linear(&mut u, &mut ut, dt);
    state_from_spectra(grid, u, ut, state.t + dt, state.eps)
}

/// `u_t -= dt lambda P(u^3) / eps^2`, `u` unchanged.
pub fn kg_nonlinear_kick(state: &KgState, lambda: f64, dt: f64) -> Result<KgState> {
    let grid = state.grid();
    let mut st = KgStepper::new(grid, state.eps, lambda);
    let mut ut = state.ut.spectrum().to_vec();
    st.kick(state.u.spectrum(), &mut ut, dt);
    if !finite(&ut) {
        return Err(Error::BlowUp {
            time: state.t,
            what: "nonlinear kick produced non-finite values".into(),
        });
    }
    Ok(KgState {
        u: state.u.clone(),
        ut: RealField::from_spectrum(grid, ut),
        t: state.t,
        eps: state.eps,
    })
}

/// One Strang step; negative `dt` steps backwards.
pub fn kg_step(state: &KgState, params: &KgParams, dt: f64) -> Result<KgState> {
    check_same_grid(state.grid(), &params.grid)?;
    let grid = state.grid();
    let mut st = KgStepper::new(grid, state.eps, params.lambda);
    let mut u = state.u.spectrum().to_vec();
    let mut ut = state.ut.spectrum().to_vec();
    st.advance(&mut u, &mut ut, dt, 1);
    if !finite(&u) || !finite(&ut) {
        return Err(Error::BlowUp {
            time: state.t + dt,
            what: "Klein-Gordon step produced non-finite values".into(),
        });
    }
    Ok(state_from_spectra(grid, u, ut, state.t + dt, state.eps))
}

/// Advances to `params.t_final`, returning the state at every requested
/// sample time in `(0, t_final]` (sorted) and at `t_final`. Steps have size
/// `params.dt`; the last step before each landing time is shortened.
pub fn kg_solve(state: &KgState, params: &KgParams, sample_times: &[f64]) -> Result<Vec<KgState>> {
    params.validate()?;
    check_same_grid(state.grid(), &params.grid)?;
    if (state.eps - params.eps).abs() > 0.0 {
        return Err(Error::config("state and parameters disagree on eps"));
    }
    let grid = state.grid();
    let mut stops: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&t| t > state.t && t <= params.t_final * (1.0 + 1e-14))
        .collect();
    if params.t_final > state.t {
        stops.push(params.t_final);
    }
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));

    let mut st = KgStepper::new(grid, params.eps, params.lambda);
    let mut u = state.u.spectrum().to_vec();
    let mut ut = state.ut.spectrum().to_vec();
    let mut t = state.t;
    let mut out = Vec::with_capacity(stops.len());
    for stop in stops {
        let span = stop - t;
        let ratio = span / params.dt;
        let mut full = ratio.floor() as usize;
        let mut rest = span - full as f64 * params.dt;
        // a remainder that is roundoff is folded into the full steps
        if rest <= 1e-9 * params.dt {
            rest = 0.0;
        } else if params.dt - rest <= 1e-9 * params.dt {
            full += 1;
            rest = 0.0;
        }
        // chunks keep blow-up detection timely without costing transforms
        let chunk = 64;
        let mut done = 0;
        while done < full {
            let k = chunk.min(full - done);
            st.advance(&mut u, &mut ut, params.dt, k);
            done += k;
            if !finite(&u) || !finite(&ut) {
                return Err(Error::BlowUp {
                    time: t + done as f64 * params.dt,
                    what: "Klein-Gordon solve became non-finite".into(),
                });
            }
        }
        st.advance(&mut u, &mut ut, rest, usize::from(rest > 0.0));
        if !finite(&u) || !finite(&ut) {
            return Err(Error::BlowUp {
                time: stop,
                what: "Klein-Gordon solve became non-finite".into(),
            });
        }
        t = stop;
        out.push(state_from_spectra(grid, u.clone(), ut.clone(), t, params.eps));
    }
    Ok(out)
}

/// `int (eps^2/2) u_t^2 + (1/2)|grad u|^2 + u^2/(2 eps^2) + (lambda/4) u^4`,
/// with the quartic term integrated on the refined grid.
pub fn kg_energy(state: &KgState, lambda: f64) -> f64 {
    let grid = state.grid();
    let e2 = state.eps * state.eps;
    let l2 = grid.side_length().powi(2);
    let xi2 = grid.xi_squared();
    let quad: f64 = state
        .u
        .spectrum()
        .iter()
        .zip(state.ut.spectrum())
        .zip(&xi2)
        .map(|((u, v), k2)| 0.5 * e2 * v.norm_sqr() + 0.5 * (k2 + 1.0 / e2) * u.norm_sqr())
        .sum::<f64>()
        * l2;
    if lambda == 0.0 {
        return quad;
    }
    let big = grid.padded_samples(state.u.spectrum());
    let hf = grid.side_length() / (2 * grid.n_per_dim()) as f64;
    let quartic: f64 = big.iter().map(|z| z.re.powi(4)).sum::<f64>() * hf * hf;
    quad + 0.25 * lambda * quartic
}

/// Manifest row `(time, energy, h1_norm, linf_norm, spectral_tail)`.
pub fn manifest_row(state: &KgState, lambda: f64) -> [f64; 5] {
    [
        state.t,
        kg_energy(state, lambda),
        state.u.sobolev_norm(1.0),
        state.u.max_abs(),
        state.spectral_tail(),
    ]
}
