//! Acceptance checks. One line per criterion; `A10` is report-only.
//!
//! Pass criterion ids as arguments to run a subset. Failures are printed and
//! counted; the process exits non-zero on failure only when
//! `KGNR_STRICT_ACCEPTANCE=1` is set.

use std::f64::consts::PI;
use std::time::Instant;

use kgnr_core::harness::experiments::{run_limit_with_profiles, solve_spec_profiles, FLAG_TRUNCATED};
use kgnr_core::harness::{
    decay_experiment, fit_rate, gaussian_data, growth_experiment, rough_data, run_limit_experiment,
    self_convergence, DataSpec, DecayOptions, ExperimentSpec, LimitReport, SolverKind,
};
use kgnr_core::kg::{kg_init, kg_step};
use kgnr_core::nls::{g2_initial, init_g0, solve_profiles, ProfileOptions};
use kgnr_core::wkb::{build_harmonics, residual_vector};
use kgnr_core::{make_grid, Complex64, KgParams, NlsParams, ProfileSet, RealField, Result, Spectral, WkbOrder};

const MASS_DRIFT: f64 = 1e-10;
const ORDER_BAND: (f64, f64) = (1.8, 2.2);
const LINEAR_ORACLE: f64 = 1e-10;
const CANCELLATION: f64 = 1e-9;
const LEADING_BAND: (f64, f64) = (1.7, 2.3);
const LEADING_R2: f64 = 0.98;
const CORRECTED_BAND: (f64, f64) = (2.6, 3.4);
const RESIDUAL_SLACK: f64 = 0.4;
const DECAY_BAND: (f64, f64) = (-1.3, -0.7);
const DECAY_BOX_SHIFT: f64 = 0.1;
const LADDER: [f64; 4] = [0.2, 0.1414, 0.1, 0.0707];

enum Verdict {
    Pass,
    Fail,
    Report,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn within(x: f64, band: (f64, f64)) -> bool {
    x >= band.0 && x <= band.1
}

fn headline_spec(order: WkbOrder) -> ExperimentSpec {
    ExperimentSpec {
        eps: LADDER.to_vec(),
        order,
        ..ExperimentSpec::default()
    }
}

/// Limit runs shared by the rate criteria.
struct Shared {
    profiles: Option<(RealField, RealField, ProfileSet)>,
    k0: Option<LimitReport>,
    k2: Option<LimitReport>,
}

impl Shared {
    fn profiles(&mut self) -> Result<&(RealField, RealField, ProfileSet)> {
        if self.profiles.is_none() {
            let spec = headline_spec(WkbOrder::K2);
            let (phi, psi) = spec.initial_data()?;
            let set = solve_spec_profiles(&spec, &phi, &psi)?;
            self.profiles = Some((phi, psi, set));
        }
        Ok(self.profiles.as_ref().unwrap())
    }

    fn report(&mut self, order: WkbOrder) -> Result<LimitReport> {
        let cached = match order {
            WkbOrder::K0 => &self.k0,
            WkbOrder::K2 => &self.k2,
        };
        if let Some(r) = cached {
            return Ok(r.clone());
        }
        let (phi, psi, set) = self.profiles()?;
        let r = run_limit_with_profiles(&headline_spec(order), phi, psi, set)?;
        match order {
            WkbOrder::K0 => self.k0 = Some(r.clone()),
            WkbOrder::K2 => self.k2 = Some(r.clone()),
        }
        Ok(r)
    }
}

fn a1() -> Result<Outcome> {
    let g = make_grid(64, 16.0 * PI)?;
    let phi = gaussian_data(1.0, 1.0, [0.0, 0.0], &g)?;
    let p = NlsParams::new(1.0, &g, 1e-3, 1.0)?;
    let times: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    let set = solve_profiles(&phi, &phi, &p, ProfileOptions { with_g2: false, monitor: true }, &times)?;
    let m = set.masses();
    let drift = m.iter().map(|x| (x - m[0]).abs() / m[0]).fold(0.0, f64::max);
    Ok(judge(
        drift <= MASS_DRIFT && !set.is_truncated(),
        format!("max relative mass drift {drift:.3e} over {} samples (limit {MASS_DRIFT:e})", m.len()),
    ))
}

fn a2() -> Result<Outcome> {
    let spec = ExperimentSpec {
        grid_n: 64,
        ..ExperimentSpec::default()
    };
    let runs = [
        (SolverKind::Nls, 0.1, "nls"),
        (SolverKind::G2, 0.1, "g2"),
        (SolverKind::Kg, 0.005, "kg"),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, dt, name) in runs {
        let started = Instant::now();
        let sc = self_convergence(kind, &spec, 0.2, dt, 1.0)?;
        ok &= within(sc.order, ORDER_BAND);
        parts.push(format!("{name} {:.3} ({:.1}s)", sc.order, started.elapsed().as_secs_f64()));
    }
    Ok(judge(ok, format!("observed orders {}", parts.join(", "))))
}

fn a3() -> Result<Outcome> {
    let eps = 0.1;
    let g = make_grid(16, 2.0 * PI)?;
    let phi = RealField::from_fn(&g, |x, y| (x + 2.0 * y).cos());
    let mut s = kg_init(&phi, &RealField::zeros(&g), eps)?;
    let p = KgParams::new(eps, 0.0, &g, 1.0)?;
    for _ in 0..1000 {
        s = kg_step(&s, &p, p.dt)?;
    }
    let omega = (1.0 + 5.0 * eps * eps).sqrt() / (eps * eps);
    let c = (omega * s.t).cos();
    let err = s
        .u
        .values()
        .iter()
        .zip(phi.values())
        .map(|(u, f)| (u - c * f).abs())
        .fold(0.0, f64::max);
    Ok(judge(err <= LINEAR_ORACLE, format!("max error {err:.3e} after 1000 steps")))
}

/// `H^1` size of the `eps^2` block of `(u_a, v_a)` at `t = 0` and the data scale.
fn start_block(phi: &RealField, psi: &RealField) -> Result<(f64, f64)> {
    let set = ProfileSet::from_snapshot(0.0, 1.0, init_g0(phi, psi)?, Some(g2_initial(phi, psi, 1.0)?));
    let table = build_harmonics(&set, 0.0, WkbOrder::K2)?;
    let grid = phi.grid();
    let mut u = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut v = u.clone();
    for ((n, _), a) in table.iter() {
        if n == 2 {
            for k in 0..grid.len() {
                u[k] += a.u.values()[k];
                v[k] += a.v.values()[k];
            }
        }
    }
    let re = |z: &[Complex64]| RealField::from_values(grid, z.iter().map(|c| 2.0 * c.re).collect());
    let (u, v) = (re(&u)?, re(&v)?);
    let block = (u.sobolev_norm(1.0).powi(2) + v.sobolev_norm(1.0).powi(2)).sqrt();
    Ok((block, phi.sobolev_norm(3.0) + psi.sobolev_norm(3.0)))
}

fn a4() -> Result<Outcome> {
    let g = make_grid(128, 16.0 * PI)?;
    let gauss = gaussian_data(1.0, 1.0, [0.0, 0.0], &g)?;
    let (b1, s1) = start_block(&gauss, &gauss)?;
    let (b2, s2) = start_block(&rough_data(6.0, 1, &g)?, &rough_data(6.0, 2, &g)?)?;
    let (r1, r2) = (b1 / s1, b2 / s2);
    Ok(judge(
        r1 <= CANCELLATION && r2 <= CANCELLATION,
        format!("block / data norm: gaussian {r1:.3e}, rough s=6 {r2:.3e} (limit {CANCELLATION:e})"),
    ))
}

fn a5(shared: &mut Shared) -> Result<Outcome> {
    let r = shared.report(WkbOrder::K0)?;
    let pts: Vec<(f64, f64)> = r.rows.iter().map(|row| (row.eps, row.leading_error)).collect();
    let fit = fit_rate(&pts)?;
    let guard = r.rows.iter().all(|row| row.self_conv_residual <= row.leading_error / 10.0);
    let flagged: Vec<String> = r
        .rows
        .iter()
        .filter(|row| !row.flags.is_empty())
        .map(|row| format!("{}:{}", row.eps, row.flags.join("+")))
        .collect();
    let errors: Vec<String> = pts.iter().map(|p| format!("{:.4e}", p.1)).collect();
    Ok(judge(
        within(fit.slope, LEADING_BAND) && fit.r_squared >= LEADING_R2 && guard,
        format!(
            "slope {:.3}, r2 {:.4}, guard {}, errors [{}], flags [{}]",
            fit.slope,
            fit.r_squared,
            if guard { "ok" } else { "violated" },
            errors.join(" "),
            flagged.join(" ")
        ),
    ))
}

fn a6(shared: &mut Shared) -> Result<Outcome> {
    let r = shared.report(WkbOrder::K2)?;
    let pts: Vec<(f64, f64)> = r.rows.iter().map(|row| (row.eps, row.error)).collect();
    let fit = fit_rate(&pts)?;
    let guard = r.rows.iter().all(|row| row.guard_ok());
    let errors: Vec<String> = pts.iter().map(|p| format!("{:.4e}", p.1)).collect();
    Ok(judge(
        within(fit.slope, CORRECTED_BAND),
        format!(
            "slope {:.3}, r2 {:.4}, guard {}, errors [{}]",
            fit.slope,
            fit.r_squared,
            if guard { "ok" } else { "violated" },
            errors.join(" ")
        ),
    ))
}

fn a7() -> Result<Outcome> {
    let t = 1.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for order in [WkbOrder::K0, WkbOrder::K2] {
        let spec = headline_spec(order);
        let (phi, psi) = spec.initial_data()?;
        let set = solve_spec_profiles(&spec, &phi, &psi)?;
        let mut total = Vec::new();
        let mut grad_row = Vec::new();
        for &eps in &spec.eps {
            let r = residual_vector(&set, t, eps, order)?;
            total.push((eps, r.sobolev_norm(spec.norm_s)));
            let w = (r.w[0].sobolev_norm(spec.norm_s).powi(2) + r.w[1].sobolev_norm(spec.norm_s).powi(2)).sqrt();
            grad_row.push((eps, w));
        }
        let fit = fit_rate(&total)?;
        let w_fit = fit_rate(&grad_row)?;
        let want = order.k() as f64 + 1.0;
        ok &= (fit.slope - want).abs() <= RESIDUAL_SLACK;
        parts.push(format!(
            "K={} slope {:.3} (want {want} +/- {RESIDUAL_SLACK}; gradient row alone {:.3})",
            order.k(),
            fit.slope,
            w_fit.slope
        ));
    }
    Ok(judge(ok, parts.join(", ")))
}

fn a8() -> Result<Outcome> {
    let run = |l: f64| {
        let spec = ExperimentSpec {
            grid_n: 256,
            grid_l: l,
            ..ExperimentSpec::default()
        };
        decay_experiment(&spec, &DecayOptions::default())
    };
    let a = run(48.0 * PI)?;
    let b = run(64.0 * PI)?;
    let (Some(fa), Some(fb)) = (&a.fit, &b.fit) else {
        return Ok(judge(false, "decay window too short to fit".into()));
    };
    let shift = (fa.slope - fb.slope).abs();
    let note = |short: bool, end: f64| if short { format!(" (window ends {end})") } else { String::new() };
    Ok(judge(
        within(fa.slope, DECAY_BAND) && shift < DECAY_BOX_SHIFT,
        format!(
            "slope {:.4} at L=48pi{}, {:.4} at L=64pi{}, shift {shift:.4}",
            fa.slope,
            note(a.wrap_shortened, a.window_end),
            fb.slope,
            note(b.wrap_shortened, b.window_end)
        ),
    ))
}

fn a9() -> Result<Outcome> {
    let focusing = |amp: f64| ExperimentSpec {
        data: DataSpec::Gaussian {
            amp,
            width: 1.0,
            center: [0.0, 0.0],
        },
        lambda: -1.0,
        eps: LADDER.to_vec(),
        ..ExperimentSpec::default()
    };
    let small = run_limit_experiment(&focusing(0.5))?;
    let pts: Vec<(f64, f64)> = small.rows.iter().map(|r| (r.eps, r.error)).collect();
    let fit = fit_rate(&pts)?;
    let small_ok = within(fit.slope, LEADING_BAND) && small.truncated_at.is_none();

    let big = run_limit_experiment(&focusing(4.0))?;
    let labelled = big
        .rows
        .iter()
        .all(|r| r.error.is_finite() || r.flags.contains(&FLAG_TRUNCATED));
    let big_ok = big.truncated_at.is_some() && labelled;
    Ok(judge(
        small_ok && big_ok,
        format!(
            "amp 0.5: slope {:.3}, monitor {}; amp 4: truncated at {}, rows labelled {}",
            fit.slope,
            if small.truncated_at.is_none() { "quiet" } else { "tripped" },
            big.truncated_at.map_or("never".to_string(), |t| format!("t={t}")),
            labelled
        ),
    ))
}

fn a10() -> Result<Outcome> {
    let rough = ExperimentSpec {
        data: DataSpec::Rough { s_target: 6.0, seed: 1 },
        eps: LADDER.to_vec(),
        ..ExperimentSpec::default()
    };
    let r = run_limit_experiment(&rough)?;
    let fit = r.fits.first().map(|f| (f.error.slope, f.error.r_squared, f.leading.slope));
    let mut detail = match fit {
        Some((s, r2, lead)) => format!("rough s=6: K=0 slope {s:.3} (r2 {r2:.3}), leading slope {lead:.3}"),
        None => "rough s=6: no fit".to_string(),
    };
    let flagged = r.rows.iter().filter(|row| !row.flags.is_empty()).count();
    detail.push_str(&format!(", {flagged}/{} rows flagged", r.rows.len()));
    for order in [WkbOrder::K0, WkbOrder::K2] {
        let spec = ExperimentSpec {
            eps: vec![0.2],
            times: vec![1.0, 2.0, 4.0, 8.0],
            order,
            ..ExperimentSpec::default()
        };
        let g = growth_experiment(&spec)?;
        let ex = g.fit.map_or("none".to_string(), |f| format!("{:.3}", f.slope));
        detail.push_str(&format!("; growth K={} at eps 0.2: exponent {ex}", order.k()));
    }
    Ok(Outcome {
        verdict: Verdict::Report,
        detail,
    })
}

type Check = Box<dyn FnMut(&mut Shared) -> Result<Outcome>>;

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let run = |id: &str| wanted.is_empty() || wanted.iter().any(|w| w.eq_ignore_ascii_case(id));
    let strict = std::env::var("KGNR_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");

    let mut shared = Shared {
        profiles: None,
        k0: None,
        k2: None,
    };
    let mut checks: Vec<(&str, Check)> = vec![
        ("A1", Box::new(|_| a1())),
        ("A2", Box::new(|_| a2())),
        ("A3", Box::new(|_| a3())),
        ("A4", Box::new(|_| a4())),
        ("A5", Box::new(a5)),
        ("A6", Box::new(a6)),
        ("A7", Box::new(|_| a7())),
        ("A8", Box::new(|_| a8())),
        ("A9", Box::new(|_| a9())),
        ("A10", Box::new(|_| a10())),
    ];

    let (mut passed, mut failed) = (0, 0);
    for (id, check) in checks.iter_mut() {
        if !run(id) {
            continue;
        }
        let started = Instant::now();
        let outcome = check(&mut shared).unwrap_or_else(|e| Outcome {
            verdict: Verdict::Fail,
            detail: format!("error: {e}"),
        });
        let tag = match outcome.verdict {
            Verdict::Pass => {
                passed += 1;
                "PASS"
            }
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Report => "REPORT",
        };
        println!(
            "{id:<4} {tag:<6} {} [{:.1}s]",
            outcome.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
