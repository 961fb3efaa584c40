//! WKB approximations of orders `K = 0` and `K = 2`: harmonic amplitudes,
//! assembly with the fast phase, and the residual in the first-order system
//! `(w, v, u) = (eps grad u, eps^2 u_t, u)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField, Spectral};
use crate::grid::TorusGrid;
use crate::jet::Jet;
use crate::nls::ProfileSet;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Truncation order of the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WkbOrder {
    K0,
    K2,
}

impl WkbOrder {
    pub fn from_k(k: u32) -> Result<Self> {
        match k {
            0 => Ok(WkbOrder::K0),
            2 => Ok(WkbOrder::K2),
            _ => Err(Error::config(format!("order K must be 0 or 2, got {k}"))),
        }
    }

    pub fn k(self) -> u32 {
        match self {
            WkbOrder::K0 => 0,
            WkbOrder::K2 => 2,
        }
    }

    /// Highest `n` in the sum over `eps^n U_n`.
    pub fn max_n(self) -> usize {
        self.k() as usize + 2
    }
}

/// Largest harmonic allowed at order `n`.
pub fn max_harmonic(n: usize) -> i32 {
    match n {
        0 | 1 => 1,
        2 | 3 => 3,
        _ => 5,
    }
}

/// Whether `(n, p)` is in the harmonic support (`p` odd, `|p| <= p(n)`).
pub fn in_support(n: usize, p: i32) -> bool {
    p % 2 != 0 && p.abs() <= max_harmonic(n)
}

/// System view `(w, v, u) = (eps grad u, eps^2 u_t, u)`.
#[derive(Debug, Clone)]
pub struct SystemVector {
    pub w: [RealField; 2],
    pub v: RealField,
    pub u: RealField,
    pub t: f64,
    pub eps: f64,
}

impl SystemVector {
    pub fn zeros(grid: &Arc<TorusGrid>, t: f64, eps: f64) -> Self {
        let z = RealField::zeros(grid);
        SystemVector {
            w: [z.clone(), z.clone()],
            v: z.clone(),
            u: z,
            t,
            eps,
        }
    }

    /// `(sum over components of ||.||_{H^s}^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        [&self.w[0], &self.w[1], &self.v, &self.u]
            .iter()
            .map(|f| f.sobolev_norm(s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &SystemVector) -> SystemVector {
        SystemVector {
            w: [&self.w[0] - &other.w[0], &self.w[1] - &other.w[1]],
            v: &self.v - &other.v,
            u: &self.u - &other.u,
            t: self.t,
            eps: self.eps,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w[0].is_finite() && self.w[1].is_finite() && self.v.is_finite() && self.u.is_finite()
    }
}

/// Complex amplitudes `(w, v, u)` of one harmonic.
#[derive(Debug, Clone)]
pub struct Amplitude {
    pub w: [ComplexField; 2],
    pub v: ComplexField,
    pub u: ComplexField,
}

impl Amplitude {
    fn components(&self) -> [&ComplexField; 4] {
        [&self.w[0], &self.w[1], &self.v, &self.u]
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

/// Amplitude components carried as time jets.
#[derive(Debug, Clone)]
struct AmplitudeJet {
    c: [Jet; 4],
}

impl AmplitudeJet {
    fn with_wv_u(w: [Jet; 2], v: Jet, u: Jet) -> Self {
        let [a, b] = w;
        AmplitudeJet { c: [a, b, v, u] }
    }

    fn value(&self) -> Amplitude {
        let [a, b, v, u] = &self.c;
        Amplitude {
            w: [a.value().clone(), b.value().clone()],
            v: v.value().clone(),
            u: u.value().clone(),
        }
    }
}

/// Harmonic amplitudes `U_{n,p}` for `p > 0` at one time; negative
/// harmonics are the conjugates.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    t: f64,
    order: WkbOrder,
    grid: Arc<TorusGrid>,
    entries: BTreeMap<(usize, i32), Amplitude>,
}

impl HarmonicTable {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn order(&self) -> WkbOrder {
        self.order
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn get(&self, n: usize, p: i32) -> Option<&Amplitude> {
        self.entries.get(&(n, p))
    }

    pub fn keys(&self) -> impl Iterator<Item = (usize, i32)> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, i32), &Amplitude)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }
}

/// All harmonic amplitudes as jets of order `r` in time.
fn harmonic_jets(
    profiles: &ProfileSet,
    t: f64,
    order: WkbOrder,
    r: usize,
) -> Result<BTreeMap<(usize, i32), AmplitudeJet>> {
    let grid = Arc::clone(profiles.grid());
    let lambda = profiles.lambda();
    let g0x = profiles.g0_jet(t, r + 3)?;
    let g2x = match order {
        WkbOrder::K0 => Jet::zeros(&grid, r + 1),
        WkbOrder::K2 => profiles.g2_jet(t, r + 1)?,
    };
    let g0 = g0x.truncate(r);
    let g2 = g2x.truncate(r);
    let zero = Jet::zeros(&grid, r);
    let c = |z: f64, w: f64| Complex64::new(z, w);

    let mut out = BTreeMap::new();
    out.insert((0, 1), AmplitudeJet::with_wv_u([zero.clone(), zero.clone()], g0.scale(I), g0.clone()));
    out.insert((1, 1), AmplitudeJet::with_wv_u(g0.gradient(), zero.clone(), zero.clone()));

    let g0_dt = g0x.dt().truncate(r);
    out.insert(
        (2, 1),
        AmplitudeJet::with_wv_u([zero.clone(), zero.clone()], g2.scale(I).add(&g0_dt), g2.clone()),
    );
    // g0^3 needs one extra derivative for its own time derivative below
    let cube_x = Jet::cube(&g0x.truncate(r + 1), &g0x.truncate(r + 1), &g0x.truncate(r + 1));
    let cube = cube_x.truncate(r);
    let c23 = cube.scale_re(lambda / 8.0);
    out.insert((2, 3), AmplitudeJet::with_wv_u([zero.clone(), zero.clone()], c23.scale(c(0.0, 3.0)), c23.clone()));

    if order == WkbOrder::K2 {
        out.insert((3, 1), AmplitudeJet::with_wv_u(g2.gradient(), zero.clone(), zero.clone()));
        out.insert((3, 3), AmplitudeJet::with_wv_u(c23.gradient(), zero.clone(), zero.clone()));

        let g2_dt = g2x.dt().truncate(r);
        out.insert((4, 1), AmplitudeJet::with_wv_u([zero.clone(), zero.clone()], g2_dt, zero.clone()));

        let cube_dt = cube_x.dt().truncate(r).scale_re(lambda / 8.0);
        let mixed = Jet::cube(&g0, &g0, &g2);
        let quint_mixed = Jet::cube(&g0.conj(), &g0, &cube);
        let bracket = cube
            .laplacian()
            .scale_re(lambda / 8.0)
            .sub(&mixed.add(&quint_mixed.scale_re(lambda / 4.0)).scale_re(3.0 * lambda));
        let v43 = cube_dt.scale_re(-1.25).add(&bracket.scale(c(0.0, -3.0 / 8.0)));
        let u43 = cube_dt.scale(c(0.0, 0.75)).add(&bracket.scale_re(-1.0 / 8.0));
        out.insert((4, 3), AmplitudeJet::with_wv_u([zero.clone(), zero.clone()], v43, u43));

        let fifth = Jet::cube(&g0, &g0, &cube).scale_re(-3.0 * lambda * lambda / 8.0);
        out.insert(
            (4, 5),
            AmplitudeJet::with_wv_u(
                [zero.clone(), zero.clone()],
                fifth.scale(c(0.0, -5.0 / 24.0)),
                fifth.scale_re(-1.0 / 24.0),
            ),
        );
    }
    debug_assert!(out.keys().all(|&(n, p)| p > 0 && in_support(n, p) && n <= order.max_n()));
    Ok(out)
}

/// Harmonic amplitudes at `t` from profiles stored exactly at `t`.
pub fn build_harmonics(profiles: &ProfileSet, t: f64, order: WkbOrder) -> Result<HarmonicTable> {
    let jets = harmonic_jets(profiles, t, order, 0)?;
    Ok(HarmonicTable {
        t,
        order,
        grid: Arc::clone(profiles.grid()),
        entries: jets.into_iter().map(|(k, a)| (k, a.value())).collect(),
    })
}

/// `t / eps^2` reduced to `[-pi, pi]` with double-double arithmetic.
pub fn fast_phase(t: f64, eps: f64) -> f64 {
    const TWO_PI_HI: f64 = 2.0 * PI;
    const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;
    let e2 = eps * eps;
    let e2_lo = eps.mul_add(eps, -e2);
    let inv = 1.0 / e2;
    let inv_lo = ((-inv).mul_add(e2, 1.0) - inv * e2_lo) / e2;
    let hi = t * inv;
    let lo = t.mul_add(inv, -hi) + t * inv_lo;
    let k = (hi / TWO_PI_HI).round();
    (-k).mul_add(TWO_PI_HI, hi) - k * TWO_PI_LO + lo
}

/// `sum eps^n 2 Re(e^{i p theta} c)` over a list of `(n, p, c)`.
fn assemble_real<'a>(
    grid: &Arc<TorusGrid>,
    theta: f64,
    eps: f64,
    terms: impl Iterator<Item = (usize, i32, &'a ComplexField)>,
) -> (RealField, f64) {
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (n, p, c) in terms {
        let scale = eps.powi(n as i32);
        let plus = Complex64::from_polar(scale, p as f64 * theta);
        let minus = Complex64::from_polar(scale, -(p as f64) * theta);
        // harmonic -p carries the conjugate amplitude
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += plus * v + minus * v.conj();
        }
    }
    let imag = acc.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
    let values = acc.iter().map(|a| a.re).collect();
    (RealField::from_values_unchecked(grid, values), imag)
}

fn u_terms(table: &HarmonicTable, order: WkbOrder) -> impl Iterator<Item = (usize, i32, &ComplexField)> {
    table
        .entries
        .iter()
        .filter(move |((n, _), _)| *n <= order.max_n() && n % 2 == 0)
        .map(|(&(n, p), a)| (n, p, &a.u))
}

/// `u_a = sum_{n even <= K+2} eps^n sum_{p > 0} 2 Re(e^{i p theta} u_{n,p})`.
pub fn evaluate_u_a(table: &HarmonicTable, eps: f64, order: WkbOrder) -> Result<RealField> {
    evaluate_u_a_at_phase(table, eps, order, fast_phase(table.t, eps))
}

/// `evaluate_u_a` with an explicit phase `theta`.
pub fn evaluate_u_a_at_phase(table: &HarmonicTable, eps: f64, order: WkbOrder, theta: f64) -> Result<RealField> {
    check_eps(eps)?;
    let (u, _) = assemble_real(&table.grid, theta, eps, u_terms(table, order));
    finite_field(u, "u_a")
}

/// `2 Re(e^{i theta} g0(t))`.
pub fn leading_order(profiles: &ProfileSet, t: f64, eps: f64) -> Result<RealField> {
    check_eps(eps)?;
    let g0 = profiles.g0(t)?;
    let (u, _) = assemble_real(profiles.grid(), fast_phase(t, eps), eps, std::iter::once((0, 1, g0)));
    Ok(u)
}

/// Sums every component of the table as `evaluate_u_a` does for `u`.
pub fn assemble_u_a(table: &HarmonicTable, eps: f64, order: WkbOrder) -> Result<SystemVector> {
    let (sv, _) = assemble_with_residue(table, eps, order, fast_phase(table.t, eps))?;
    Ok(sv)
}

/// Assembly plus the largest imaginary residue before the real cast.
pub fn assemble_with_residue(
    table: &HarmonicTable,
    eps: f64,
    order: WkbOrder,
    theta: f64,
) -> Result<(SystemVector, f64)> {
    check_eps(eps)?;
    let grid = &table.grid;
    let pick = |k: usize| {
        table
            .entries
            .iter()
            .filter(move |((n, _), _)| *n <= order.max_n())
            .map(move |(&(n, p), a)| (n, p, a.components()[k]))
    };
    let mut residue: f64 = 0.0;
    let mut parts = Vec::with_capacity(4);
    for k in 0..4 {
        let (f, im) = assemble_real(grid, theta, eps, pick(k));
        residue = residue.max(im);
        parts.push(f);
    }
    let u = parts.pop().unwrap();
    let v = parts.pop().unwrap();
    let w1 = parts.pop().unwrap();
    let w0 = parts.pop().unwrap();
    let sv = SystemVector {
        w: [w0, w1],
        v,
        u,
        t: table.t,
        eps,
    };
    if !sv.is_finite() {
        return Err(Error::Numerical("assembled system vector is not finite".into()));
    }
    Ok((sv, residue))
}

/// `H^s` norm of `d/dt U_a - A(d_x) U_a / eps + A_0 U_a / eps^2 - F(U_a)`
/// with `A(d_x) U = (grad v, div w, 0)`, `A_0 U = (0, u, -v)` and
/// `F(U) = -(0, lambda u^3, 0)`.
pub fn system_residual(profiles: &ProfileSet, t: f64, eps: f64, order: WkbOrder, norm_s: f64) -> Result<f64> {
    Ok(residual_vector(profiles, t, eps, order)?.sobolev_norm(norm_s))
}

/// The residual itself, component by component.
pub fn residual_vector(profiles: &ProfileSet, t: f64, eps: f64, order: WkbOrder) -> Result<SystemVector> {
    check_eps(eps)?;
    let grid = Arc::clone(profiles.grid());
    let lambda = profiles.lambda();
    let jets = harmonic_jets(profiles, t, order, 1)?;
    for (&(n, p), a) in &jets {
        if !a.c.iter().all(|j| j.is_finite()) {
            return Err(Error::Numerical(format!("harmonic ({n},{p}) is not finite")));
        }
    }
    let theta = fast_phase(t, eps);
    let e2inv = 1.0 / (eps * eps);

    // value and time derivative of each assembled component
    let mut val = Vec::with_capacity(4);
    let mut der = Vec::with_capacity(4);
    for k in 0..4 {
        let (f, _) = assemble_real(&grid, theta, eps, jets.iter().map(|(&(n, p), a)| (n, p, a.c[k].term(0))));
        val.push(f);
        let dcoef: Vec<(usize, i32, ComplexField)> = jets
            .iter()
            .map(|(&(n, p), a)| {
                let j = &a.c[k];
                let d = &j.term(0).scale(I * (p as f64 * e2inv)) + j.term(1);
                (n, p, d)
            })
            .collect();
        let (d, _) = assemble_real(&grid, theta, eps, dcoef.iter().map(|(n, p, c)| (*n, *p, c)));
        der.push(d);
    }
    let [w0, w1, v, u] = [&val[0], &val[1], &val[2], &val[3]];
    let [gv0, gv1] = v.gradient();
    let [gw0, _] = w0.gradient();
    let [_, gw1] = w1.gradient();
    let div_w = &gw0 + &gw1;
    let inv_e = 1.0 / eps;

    let r_w0 = &der[0] - &gv0.scale(inv_e);
    let r_w1 = &der[1] - &gv1.scale(inv_e);
    let mut r_v = &(&der[2] - &div_w.scale(inv_e)) + &u.scale(e2inv);
    if lambda != 0.0 {
        let cube = RealField::from_spectrum(&grid, grid.cube_spectra(u.spectrum(), u.spectrum(), u.spectrum()));
        r_v = &r_v + &cube.scale(lambda);
    }
    let r_u = &der[3] - &v.scale(e2inv);
    let out = SystemVector {
        w: [r_w0, r_w1],
        v: r_v,
        u: r_u,
        t,
        eps,
    };
    if !out.is_finite() {
        return Err(Error::Numerical("residual is not finite".into()));
    }
    Ok(out)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("eps must lie in (0, 1), got {eps}")))
    }
}

fn finite_field(f: RealField, what: &str) -> Result<RealField> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::Numerical(format!("{what} is not finite")))
    }
}
