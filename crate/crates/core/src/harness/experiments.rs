//! Limit-rate, decay, growth and self-convergence experiments.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{RealField, Spectral};
use crate::grid::TorusGrid;
use crate::harness::fit::{fit_rate, secant_slope, RateFit};
use crate::harness::spec::ExperimentSpec;
use crate::kg::{kg_init, kg_solve, KgParams, KgState, RESOLUTION_TAIL_LIMIT};
use crate::nls::{solve_profiles, NlsParams, ProfileOptions, ProfileSet};
use crate::wkb::{build_harmonics, evaluate_u_a, leading_order, system_residual, WkbOrder};

/// How many times the Klein-Gordon step may be halved per epsilon.
pub const MAX_TIGHTEN: usize = 3;

pub const FLAG_SELF_CONV: &str = "self_conv";
pub const FLAG_UNDER_RESOLVED: &str = "under_resolved";
pub const FLAG_BLOWUP: &str = "blowup";
pub const FLAG_TRUNCATED: &str = "truncated";
pub const FLAG_TWO_POINT: &str = "two_point";

/// One `(eps, t)` cell of a limit experiment.
#[derive(Debug, Clone)]
pub struct LimitRow {
    pub eps: f64,
    pub time: f64,
    pub order_k: u32,
    pub norm_s: f64,
    /// `||u - u_a||_{H^s}` at order `K`.
    pub error: f64,
    /// `||u - 2 Re(e^{i theta} g0)||_{H^s}`.
    pub leading_error: f64,
    /// `H^s` norm of the system residual of `U_a`.
    pub residual: f64,
    /// Richardson estimate `||u_dt - u_{dt/2}|| / 3` of the reference error.
    pub self_conv_residual: f64,
    /// Step of the accepted (finer) Klein-Gordon solve.
    pub kg_dt: f64,
    pub spectral_tail: f64,
    pub flags: Vec<&'static str>,
}

impl LimitRow {
    fn failed(eps: f64, time: f64, spec: &ExperimentSpec, flag: &'static str) -> Self {
        LimitRow {
            eps,
            time,
            order_k: spec.order.k(),
            norm_s: spec.norm_s,
            error: f64::NAN,
            leading_error: f64::NAN,
            residual: f64::NAN,
            self_conv_residual: f64::NAN,
            kg_dt: f64::NAN,
            spectral_tail: f64::NAN,
            flags: vec![flag],
        }
    }

    /// Whether the reference passed `self_conv_residual <= error / 10`.
    pub fn guard_ok(&self) -> bool {
        self.self_conv_residual <= self.error / 10.0
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_finite() && !self.flags.contains(&FLAG_BLOWUP) && !self.flags.contains(&FLAG_TRUNCATED)
    }
}

/// Slopes against `eps` at one time.
#[derive(Debug, Clone)]
pub struct FitRow {
    pub time: f64,
    pub order_k: u32,
    pub norm_s: f64,
    pub error: RateFit,
    pub leading: RateFit,
    pub residual: RateFit,
    pub flags: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    pub fits: Vec<FitRow>,
    /// Set when the profile solve was cut short by the focusing monitor.
    pub truncated_at: Option<f64>,
}

impl LimitReport {
    pub fn fit_at(&self, t: f64) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.time == t)
    }
}

/// Solves the profiles needed for `order` up to the largest spec time.
pub fn solve_spec_profiles(spec: &ExperimentSpec, phi: &RealField, psi: &RealField) -> Result<ProfileSet> {
    let grid = spec.grid()?;
    let t_max = spec.t_max();
    let params = NlsParams::new(spec.lambda, &grid, spec.profile_dt.min(t_max), t_max)?;
    let opts = ProfileOptions {
        with_g2: spec.order == WkbOrder::K2,
        monitor: true,
    };
    solve_profiles(phi, psi, &params, opts, &spec.times)
}

/// Klein-Gordon states at `times`, or `None` on blow-up.
fn kg_at(state: &KgState, params: &KgParams, times: &[f64]) -> Result<Option<Vec<KgState>>> {
    match kg_solve(state, params, times) {
        Ok(v) => Ok(Some(v)),
        Err(Error::BlowUp { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn pick(states: &[KgState], t: f64) -> &KgState {
    states
        .iter()
        .find(|s| (s.t - t).abs() <= 1e-12 * t.max(1.0))
        .expect("solver lands on every requested time")
}

/// Rows for one `eps`, with the step halved until the self-convergence
/// guard holds or `MAX_TIGHTEN` halvings were spent.
fn limit_cell(
    spec: &ExperimentSpec,
    grid: &Arc<TorusGrid>,
    phi: &RealField,
    psi: &RealField,
    profiles: &ProfileSet,
    eps: f64,
) -> Result<Vec<LimitRow>> {
    let times: Vec<f64> = spec.times.clone();
    let valid: Vec<f64> = times
        .iter()
        .copied()
        .filter(|&t| profiles.index_of(t).is_ok())
        .collect();
    let mut rows = Vec::new();
    for &t in &times {
        if !valid.contains(&t) {
            rows.push(LimitRow::failed(eps, t, spec, FLAG_TRUNCATED));
        }
    }
    if valid.is_empty() {
        return Ok(rows);
    }
    let t_end = valid.iter().copied().fold(0.0, f64::max);
    let state = kg_init(phi, psi, eps)?;
    let mut params = KgParams::new(eps, spec.lambda, grid, t_end)?;
    params.safety = spec.dt_safety;
    params = params.with_dt(spec.dt_safety * eps * eps)?;

    let approx: Vec<(RealField, RealField)> = valid
        .iter()
        .map(|&t| {
            let table = build_harmonics(profiles, t, spec.order)?;
            Ok((evaluate_u_a(&table, eps, spec.order)?, leading_order(profiles, t, eps)?))
        })
        .collect::<Result<_>>()?;

    let Some(mut coarse) = kg_at(&state, &params, &valid)? else {
        rows.extend(valid.iter().map(|&t| LimitRow::failed(eps, t, spec, FLAG_BLOWUP)));
        return Ok(rows);
    };
    let mut tighten = 0;
    loop {
        let fine_params = params.clone().with_dt(params.dt / 2.0)?;
        let Some(fine) = kg_at(&state, &fine_params, &valid)? else {
            rows.extend(valid.iter().map(|&t| LimitRow::failed(eps, t, spec, FLAG_BLOWUP)));
            return Ok(rows);
        };
        let mut cells = Vec::with_capacity(valid.len());
        let mut all_ok = true;
        for (&t, (ua, lead)) in valid.iter().zip(&approx) {
            let f = pick(&fine, t);
            let c = pick(&coarse, t);
            let error = (&f.u - ua).sobolev_norm(spec.norm_s);
            let leading_error = (&f.u - lead).sobolev_norm(spec.norm_s);
            let sc = (&c.u - &f.u).sobolev_norm(spec.norm_s) / 3.0;
            all_ok &= sc <= error / 10.0;
            cells.push((t, error, leading_error, sc, f.spectral_tail()));
        }
        if all_ok || tighten == MAX_TIGHTEN {
            for (t, error, leading_error, sc, tail) in cells {
                let mut flags = Vec::new();
                if sc > error / 10.0 {
                    flags.push(FLAG_SELF_CONV);
                }
                if tail > RESOLUTION_TAIL_LIMIT {
                    flags.push(FLAG_UNDER_RESOLVED);
                }
                let residual = system_residual(profiles, t, eps, spec.order, spec.norm_s)?;
                rows.push(LimitRow {
                    eps,
                    time: t,
                    order_k: spec.order.k(),
                    norm_s: spec.norm_s,
                    error,
                    leading_error,
                    residual,
                    self_conv_residual: sc,
                    kg_dt: fine_params.dt,
                    spectral_tail: tail,
                    flags,
                });
            }
            return Ok(rows);
        }
        tighten += 1;
        coarse = fine;
        params = fine_params;
    }
}

/// Runs the Klein-Gordon reference against the WKB approximation for every
/// `(eps, t)` in the spec and fits slopes in `eps` at each time.
pub fn run_limit_experiment(spec: &ExperimentSpec) -> Result<LimitReport> {
    spec.validate()?;
    let (phi, psi) = spec.initial_data()?;
    let profiles = solve_spec_profiles(spec, &phi, &psi)?;
    run_limit_with_profiles(spec, &phi, &psi, &profiles)
}

/// `run_limit_experiment` with data and profiles supplied by the caller.
pub fn run_limit_with_profiles(
    spec: &ExperimentSpec,
    phi: &RealField,
    psi: &RealField,
    profiles: &ProfileSet,
) -> Result<LimitReport> {
    spec.validate()?;
    let grid = spec.grid()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(spec.eps.len());
    let cells: Vec<Result<Vec<LimitRow>>> = if workers <= 1 {
        spec.eps
            .iter()
            .map(|&e| limit_cell(spec, &grid, phi, psi, profiles, e))
            .collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = spec
                .eps
                .iter()
                .map(|&e| {
                    let grid = &grid;
                    s.spawn(move || limit_cell(spec, grid, phi, psi, profiles, e))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut rows = Vec::new();
    for c in cells {
        rows.extend(c?);
    }
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps).then(a.time.total_cmp(&b.time)));

    let mut fits = Vec::new();
    let mut times = spec.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for t in times {
        let cell: Vec<&LimitRow> = rows.iter().filter(|r| r.time == t && r.is_valid()).collect();
        if cell.len() < 2 {
            continue;
        }
        let pts = |f: fn(&LimitRow) -> f64| -> Vec<(f64, f64)> { cell.iter().map(|r| (r.eps, f(r))).collect() };
        let fit_or_secant = |p: Vec<(f64, f64)>| -> Result<(RateFit, bool)> {
            if p.len() >= 3 {
                Ok((fit_rate(&p)?, false))
            } else {
                let slope = secant_slope(p[0], p[1]);
                let intercept = p[0].1.ln() - slope * p[0].0.ln();
                Ok((
                    RateFit {
                        slope,
                        intercept,
                        r_squared: 1.0,
                        points: p.iter().map(|&(x, y)| (x.ln(), y.ln())).collect(),
                    },
                    true,
                ))
            }
        };
        let (error, two) = fit_or_secant(pts(|r| r.error))?;
        let (leading, _) = fit_or_secant(pts(|r| r.leading_error))?;
        let (residual, _) = fit_or_secant(pts(|r| r.residual))?;
        fits.push(FitRow {
            time: t,
            order_k: spec.order.k(),
            norm_s: spec.norm_s,
            error,
            leading,
            residual,
            flags: if two { vec![FLAG_TWO_POINT] } else { Vec::new() },
        });
    }
    Ok(LimitReport {
        rows,
        fits,
        truncated_at: profiles.truncated_at(),
    })
}

/// Residual norms over the spec's `eps` ladder and times; no Klein-Gordon solve.
pub fn residual_scaling(spec: &ExperimentSpec) -> Result<Vec<(f64, f64, f64)>> {
    spec.validate()?;
    let (phi, psi) = spec.initial_data()?;
    let profiles = solve_spec_profiles(spec, &phi, &psi)?;
    let mut out = Vec::new();
    for &eps in &spec.eps {
        for &t in &spec.times {
            out.push((eps, t, system_residual(&profiles, t, eps, spec.order, spec.norm_s)?));
        }
    }
    Ok(out)
}

/// Options of the decay measurement.
#[derive(Debug, Clone)]
pub struct DecayOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Sample spacing on `[1, t_final]`.
    pub sample_every: f64,
    /// Mass fraction in the boundary strip that ends the fit window.
    pub wrap_threshold: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            t_final: 10.0,
            dt: 0.01,
            sample_every: 0.25,
            wrap_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    /// `(t, max |g0(t)|, boundary-strip mass fraction)`.
    pub samples: Vec<(f64, f64, f64)>,
    /// Fit of `log max|g0|` against `log(1 + t)` over `[1, window_end]`.
    pub fit: Option<RateFit>,
    pub window_end: f64,
    /// The fit window was shortened by the wrap-around guard.
    pub wrap_shortened: bool,
    /// All-zero datum; nothing to fit.
    pub degenerate: bool,
}

/// Mass fraction of `|g|^2` with `max(|x1|, |x2|) >= 3L/8`.
fn boundary_fraction(g: &crate::field::ComplexField) -> f64 {
    let grid = g.grid();
    let n = grid.n_per_dim();
    let edge = 0.375 * grid.side_length();
    let mut total = 0.0;
    let mut strip = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = g.values()[i * n + j].norm_sqr();
            total += w;
            if grid.coord(i).abs() >= edge || grid.coord(j).abs() >= edge {
                strip += w;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        strip / total
    }
}

/// Decay of `max |g0(t)|` for defocusing data on a large box.
pub fn decay_experiment(spec: &ExperimentSpec, opts: &DecayOptions) -> Result<DecayReport> {
    if !(spec.lambda > 0.0) {
        return Err(Error::config("the decay experiment needs lambda > 0"));
    }
    if spec.grid_l < 48.0 * std::f64::consts::PI * (1.0 - 1e-12) {
        return Err(Error::config("the decay experiment needs side_length >= 48 pi"));
    }
    if !(opts.t_final > 1.0) {
        return Err(Error::config("decay t_final must exceed 1"));
    }
    let grid = spec.grid()?;
    let (phi, psi) = spec.initial_data()?;
    if phi.max_abs() == 0.0 && psi.max_abs() == 0.0 {
        return Ok(DecayReport {
            samples: vec![(0.0, 0.0, 0.0)],
            fit: None,
            window_end: 0.0,
            wrap_shortened: false,
            degenerate: true,
        });
    }
    let count = ((opts.t_final - 1.0) / opts.sample_every).round() as usize;
    let times: Vec<f64> = (0..=count)
        .map(|k| if k == count { opts.t_final } else { 1.0 + k as f64 * opts.sample_every })
        .collect();
    let params = NlsParams::new(spec.lambda, &grid, opts.dt, opts.t_final)?;
    let set = solve_profiles(
        &phi,
        &psi,
        &params,
        ProfileOptions {
            with_g2: false,
            monitor: true,
        },
        &times,
    )?;
    let mut samples = Vec::new();
    let mut window_end = opts.t_final;
    let mut shortened = false;
    for &t in &times {
        let Ok(g) = set.g0(t) else { break };
        let frac = boundary_fraction(g);
        if frac > opts.wrap_threshold && !shortened {
            shortened = true;
            window_end = samples.last().map_or(1.0, |s: &(f64, f64, f64)| s.0);
        }
        samples.push((t, g.max_abs(), frac));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 <= window_end)
        .map(|s| (1.0 + s.0, s.1))
        .collect();
    let fit = if pts.len() >= 3 { Some(fit_rate(&pts)?) } else { None };
    Ok(DecayReport {
        samples,
        fit,
        window_end,
        wrap_shortened: shortened,
        degenerate: false,
    })
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub eps: f64,
    pub order_k: u32,
    /// `(t, error, error / eps^(K+1))`.
    pub samples: Vec<(f64, f64, f64)>,
    /// Exponent of `error / eps^(K+1)` against `1 + t`.
    pub fit: Option<RateFit>,
    pub rows: Vec<LimitRow>,
}

/// Growth of the scaled error in time at the first `eps` of the spec.
pub fn growth_experiment(spec: &ExperimentSpec) -> Result<GrowthReport> {
    if !(spec.lambda > 0.0) {
        return Err(Error::config("the growth experiment needs lambda > 0"));
    }
    let mut one = spec.clone();
    one.eps.truncate(1);
    let report = run_limit_experiment(&one)?;
    Ok(growth_from_rows(one.eps[0], one.order.k(), report.rows))
}

/// Fits the growth exponent from rows at one `eps`.
pub fn growth_from_rows(eps: f64, order_k: u32, rows: Vec<LimitRow>) -> GrowthReport {
    let scale = eps.powi(order_k as i32 + 1);
    let samples: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.is_valid())
        .map(|r| (r.time, r.error, r.error / scale))
        .collect();
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (1.0 + s.0, s.2)).collect();
    GrowthReport {
        eps,
        order_k,
        fit: fit_rate(&pts).ok(),
        samples,
        rows,
    }
}

/// Which integrator a self-convergence study exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Nls,
    G2,
    Kg,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nls" => Ok(SolverKind::Nls),
            "g2" => Ok(SolverKind::G2),
            "kg" => Ok(SolverKind::Kg),
            _ => Err(Error::config(format!("unknown solver {s:?}; expected nls, g2 or kg"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelfConvergence {
    pub solver: SolverKind,
    pub dt: f64,
    pub t_final: f64,
    /// Errors at `dt` and `dt/2` against the `dt/16` solution.
    pub errors: [f64; 2],
    pub order: f64,
}

/// Observed order `log2(e(dt) / e(dt/2))` against a `dt/16` reference, with
/// errors in `H^1` at `t_final`.
pub fn self_convergence(
    solver: SolverKind,
    spec: &ExperimentSpec,
    eps: f64,
    dt: f64,
    t_final: f64,
) -> Result<SelfConvergence> {
    let grid = spec.grid()?;
    let (phi, psi) = spec.initial_data()?;
    let run = |h: f64| -> Result<RealOrComplex> {
        match solver {
            SolverKind::Nls | SolverKind::G2 => {
                let p = NlsParams::new(spec.lambda, &grid, h, t_final)?;
                let opts = ProfileOptions {
                    with_g2: solver == SolverKind::G2,
                    monitor: false,
                };
                let set = solve_profiles(&phi, &psi, &p, opts, &[])?;
                let f = if solver == SolverKind::G2 { set.g2(t_final)? } else { set.g0(t_final)? };
                Ok(RealOrComplex::C(f.clone()))
            }
            SolverKind::Kg => {
                let s0 = kg_init(&phi, &psi, eps)?;
                let p = KgParams::new(eps, spec.lambda, &grid, t_final)?.with_override(h)?;
                let out = kg_solve(&s0, &p, &[])?;
                Ok(RealOrComplex::R(out.last().expect("final state").u.clone()))
            }
        }
    };
    let reference = run(dt / 16.0)?;
    let a = run(dt)?.distance(&reference);
    let b = run(dt / 2.0)?.distance(&reference);
    Ok(SelfConvergence {
        solver,
        dt,
        t_final,
        errors: [a, b],
        order: (a / b).log2(),
    })
}

enum RealOrComplex {
    R(RealField),
    C(crate::field::ComplexField),
}

impl RealOrComplex {
    fn distance(&self, other: &RealOrComplex) -> f64 {
        match (self, other) {
            (RealOrComplex::R(a), RealOrComplex::R(b)) => (a - b).sobolev_norm(1.0),
            (RealOrComplex::C(a), RealOrComplex::C(b)) => (a - b).sobolev_norm(1.0),
            _ => unreachable!("same solver on both sides"),
        }
    }
}
