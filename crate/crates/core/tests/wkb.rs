use std::f64::consts::PI;
use std::sync::Arc;

use kgnr_core::field::dealiased_cube;
use kgnr_core::harness::fit_rate;
use kgnr_core::harness::{gaussian_data, rough_data};
use kgnr_core::kg::{kg_init, kg_solve};
use kgnr_core::nls::{dt_g0, g2_initial, init_g0, solve_profiles, ProfileOptions};
use kgnr_core::wkb::{
    assemble_u_a, assemble_with_residue, build_harmonics, evaluate_u_a, evaluate_u_a_at_phase, fast_phase,
    leading_order, system_residual,
};
use kgnr_core::{make_grid, Complex64, ComplexField, KgParams, NlsParams, ProfileSet, RealField, TorusGrid, WkbOrder};

fn max_diff(a: &RealField, b: &RealField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn at_start(phi: &RealField, psi: &RealField, lambda: f64) -> ProfileSet {
    let g0 = init_g0(phi, psi).unwrap();
    let g2 = g2_initial(phi, psi, lambda).unwrap();
    ProfileSet::from_snapshot(0.0, lambda, g0, Some(g2))
}

fn gaussian(n: usize, width: f64) -> (Arc<TorusGrid>, RealField) {
    let g = make_grid(n, 16.0 * PI).unwrap();
    let phi = gaussian_data(1.0, width, [0.0, 0.0], &g).unwrap();
    (g, phi)
}

/// `H^1` norms of the `eps^2` blocks of `u_a` and `v_a` at `t = 0`.
fn second_order_block(set: &ProfileSet) -> f64 {
    let table = build_harmonics(set, 0.0, WkbOrder::K2).unwrap();
    let grid = table.grid().clone();
    let mut u = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut v = u.clone();
    for ((n, _), a) in table.iter() {
        if n != 2 {
            continue;
        }
        for k in 0..grid.len() {
            u[k] += a.u.values()[k];
            v[k] += a.v.values()[k];
        }
    }
    let re = |z: Vec<Complex64>| RealField::from_values(&grid, z.iter().map(|c| 2.0 * c.re).collect()).unwrap();
    let (u, v) = (re(u), re(v));
    (u.sobolev_norm(1.0).powi(2) + v.sobolev_norm(1.0).powi(2)).sqrt()
}

#[test]
fn corrector_cancels_second_order_block_at_start() {
    let (g, phi) = gaussian(128, 1.0);
    let psi = phi.scale(0.5);
    let scale = phi.sobolev_norm(3.0) + psi.sobolev_norm(3.0);
    let block = second_order_block(&at_start(&phi, &psi, 1.0));
    assert!(block <= 1e-9 * scale, "gaussian block {block:e}");

    let phi = rough_data(6.0, 11, &g).unwrap();
    let psi = rough_data(6.0, 12, &g).unwrap();
    let scale = phi.sobolev_norm(3.0) + psi.sobolev_norm(3.0);
    let block = second_order_block(&at_start(&phi, &psi, 1.0));
    assert!(block <= 1e-9 * scale, "rough block {block:e}");
}

#[test]
fn leading_correction_at_start_matches_expansion() {
    // wide enough that the cubes are resolved, so pointwise and dealiased
    // products agree
    let (g, phi) = gaussian(128, 2.0);
    let psi = phi.map(|x| 0.5 * x * x);
    let (lambda, eps) = (1.0, 0.1);
    let set = at_start(&phi, &psi, lambda);
    let table = build_harmonics(&set, 0.0, WkbOrder::K0).unwrap();
    let got = evaluate_u_a(&table, eps, WkbOrder::K0).unwrap();
    let expansion = phi
        .values()
        .iter()
        .zip(psi.values())
        .map(|(f, p)| f + eps * eps * lambda / 32.0 * (f * f * f - 3.0 * f * p * p))
        .collect();
    let want = RealField::from_values(&g, expansion).unwrap();
    assert!(max_diff(&got, &want) <= 1e-9, "{:e}", max_diff(&got, &want));
    assert!(max_diff(&leading_order(&set, 0.0, eps).unwrap(), &phi) <= 1e-12);
}

#[test]
fn velocity_block_at_start() {
    let (_, phi) = gaussian(64, 2.0);
    let psi = phi.scale(-0.7);
    let (lambda, eps) = (2.0, 0.15);
    let set = at_start(&phi, &psi, lambda);
    let table = build_harmonics(&set, 0.0, WkbOrder::K0).unwrap();
    let sv = assemble_u_a(&table, eps, WkbOrder::K0).unwrap();
    let g0 = set.g0(0.0).unwrap();
    let cube = dealiased_cube(g0, g0, g0).unwrap();
    let extra: ComplexField = &cube.scale(Complex64::new(0.0, 3.0 * lambda / 8.0)) + &dt_g0(g0, lambda);
    let want = &psi + &extra.re().scale(2.0 * eps * eps);
    assert!(max_diff(&sv.v, &want) <= 1e-12);
}

#[test]
fn phase_is_periodic_and_assembly_is_real() {
    let (_, phi) = gaussian(64, 1.5);
    let psi = phi.scale(0.3);
    let g0 = init_g0(&phi, &psi).unwrap();
    let g2 = g2_initial(&phi, &psi, 1.0).unwrap();
    let t = 0.73;
    let set = ProfileSet::from_snapshot(t, 1.0, g0, Some(g2));
    let table = build_harmonics(&set, t, WkbOrder::K2).unwrap();
    for eps in [0.2, 0.05] {
        let theta = fast_phase(t, eps);
        let a = evaluate_u_a(&table, eps, WkbOrder::K2).unwrap();
        let b = evaluate_u_a_at_phase(&table, eps, WkbOrder::K2, theta + 2.0 * PI).unwrap();
        assert!(max_diff(&a, &b) <= 1e-12);
        let (_, residue) = assemble_with_residue(&table, eps, WkbOrder::K2, theta).unwrap();
        assert!(residue <= 1e-12);
    }
}

#[test]
fn gradient_block_is_consistent() {
    let (_, phi) = gaussian(64, 1.5);
    let set = at_start(&phi, &phi, 1.0);
    let table = build_harmonics(&set, 0.0, WkbOrder::K0).unwrap();
    let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let sv = assemble_u_a(&table, eps, WkbOrder::K0).unwrap();
            let [gx, gy] = sv.u.gradient();
            let dx = &sv.w[0] - &gx.scale(eps);
            let dy = &sv.w[1] - &gy.scale(eps);
            (eps, (dx.sobolev_norm(0.0).powi(2) + dy.sobolev_norm(0.0).powi(2)).sqrt())
        })
        .collect();
    assert!(fit_rate(&pts).unwrap().slope >= 1.9);
}

#[test]
fn higher_order_start_is_close_to_data() {
    let (_, phi) = gaussian(128, 1.0);
    let psi = phi.scale(0.5);
    let set = at_start(&phi, &psi, 1.0);
    let table = build_harmonics(&set, 0.0, WkbOrder::K2).unwrap();
    let gap = |eps: f64| {
        let sv = assemble_u_a(&table, eps, WkbOrder::K2).unwrap();
        let [gx, gy] = phi.gradient();
        let parts = [
            &sv.w[0] - &gx.scale(eps),
            &sv.w[1] - &gy.scale(eps),
            &sv.v - &psi,
            &sv.u - &phi,
        ];
        parts.iter().map(|f| f.sobolev_norm(1.0).powi(2)).sum::<f64>().sqrt()
    };
    let slope = (gap(0.2) / gap(0.1)).log2();
    assert!((3.6..4.4).contains(&slope), "slope {slope}");
}

#[test]
fn zero_profile_has_zero_residual() {
    let g = make_grid(16, 2.0 * PI).unwrap();
    let z = ComplexField::zeros(&g);
    let set = ProfileSet::from_snapshot(0.5, 1.0, z.clone(), Some(z));
    for order in [WkbOrder::K0, WkbOrder::K2] {
        assert_eq!(system_residual(&set, 0.5, 0.1, order, 1.0).unwrap(), 0.0);
    }
}

#[test]
fn linear_dispersion_mismatch_is_second_order() {
    // the free Schrodinger phase misses omega - eps^-2 - |k|^2/2 = O(eps^2);
    // for a single mode u - i u_t / omega = e^{i omega t} cos x, so comparing
    // it with 2 e^{i theta} g0 removes the fast phase from the mismatch
    let g = make_grid(16, 2.0 * PI).unwrap();
    let phi = RealField::from_fn(&g, |x, _| x.cos());
    let psi = RealField::zeros(&g);
    let t = 1.0;
    let np = NlsParams::linear(&g, 0.05, t).unwrap();
    let opts = ProfileOptions {
        with_g2: false,
        monitor: false,
    };
    let set = solve_profiles(&phi, &psi, &np, opts, &[]).unwrap();
    let pts: Vec<(f64, f64)> = [0.2f64, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let omega = (1.0 + eps * eps).sqrt() / (eps * eps);
            let p = KgParams::new(eps, 0.0, &g, t).unwrap();
            let s = kg_solve(&kg_init(&phi, &psi, eps).unwrap(), &p, &[]).unwrap().pop().unwrap();
            let z = ComplexField::from_parts(&s.u, &s.ut.scale(-1.0 / omega)).unwrap();
            let lead = set.g0(t).unwrap().scale(Complex64::from_polar(2.0, fast_phase(t, eps)));
            (eps, (&z - &lead).sobolev_norm(1.0))
        })
        .collect();
    let slope = fit_rate(&pts).unwrap().slope;
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
}
