use std::f64::consts::PI;

use kgnr_core::harness::report::write_limit_csv;
use kgnr_core::harness::{
    decay_experiment, fit_rate, gaussian_data, rough_data, run_limit_experiment, DataSpec, DecayOptions,
    ExperimentSpec, LimitRow,
};
use kgnr_core::harness::experiments::growth_from_rows;
use kgnr_core::snapshot::Snapshot;
use kgnr_core::{make_grid, Complex64, ComplexField, Error, Field, RealField, WkbOrder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gaussian_l2_norm_matches_integral() {
    // int amp^2 exp(-2|x|^2 / w^2) dx = amp^2 pi w^2 / 2
    let g = make_grid(128, 16.0 * PI).unwrap();
    let (amp, w) = (1.7, 1.3);
    let f = gaussian_data(amp, w, [0.5, -1.0], &g).unwrap();
    let want = amp * w * (PI / 2.0).sqrt();
    assert!((f.sobolev_norm(0.0) - want).abs() <= 1e-8 * want);
    assert_eq!(gaussian_data(0.0, 1.0, [0.0, 0.0], &g).unwrap().max_abs(), 0.0);
}

#[test]
fn gaussian_on_small_box_fails_tail_check() {
    let g = make_grid(32, 6.0).unwrap();
    assert!(matches!(gaussian_data(1.0, 1.0, [0.0, 0.0], &g), Err(Error::TailCheck { .. })));
}

#[test]
fn rough_norms_track_target_regularity() {
    let s = 3.0;
    let coarse = make_grid(32, 2.0 * PI).unwrap();
    let fine = make_grid(64, 2.0 * PI).unwrap();
    let a = rough_data(s, 5, &coarse).unwrap();
    let b = rough_data(s, 5, &fine).unwrap();
    assert_eq!(a.values(), rough_data(s, 5, &coarse).unwrap().values());
    let above = b.sobolev_norm(s + 1.0) / a.sobolev_norm(s + 1.0);
    let below = b.sobolev_norm(s - 1.0) / a.sobolev_norm(s - 1.0);
    assert!(above >= 1.5, "{above}");
    assert!((below - 1.0).abs() < 0.01, "{below}");
}

#[test]
fn limit_run_with_one_eps_has_no_fit() {
    let spec = ExperimentSpec {
        eps: vec![0.3],
        grid_n: 32,
        ..ExperimentSpec::default()
    };
    let report = run_limit_experiment(&spec).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.fits.is_empty());
    let row = &report.rows[0];
    assert!(row.error.is_finite() && row.self_conv_residual.is_finite());
}

#[test]
fn limit_csv_is_deterministic() {
    let spec = ExperimentSpec {
        data: DataSpec::Rough { s_target: 4.0, seed: 3 },
        eps: vec![0.3, 0.25, 0.2],
        grid_n: 32,
        grid_l: 2.0 * PI,
        ..ExperimentSpec::default()
    };
    let csv = || {
        let mut out = Vec::new();
        write_limit_csv(&run_limit_experiment(&spec).unwrap(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    };
    let a = csv();
    assert_eq!(a, csv());
    assert_eq!(a.lines().count(), 1 + 3 + 1);
}

#[test]
fn higher_order_error_is_smaller() {
    let base = ExperimentSpec {
        eps: vec![0.2, 0.1],
        grid_n: 64,
        ..ExperimentSpec::default()
    };
    let k0 = run_limit_experiment(&base).unwrap();
    let k2 = run_limit_experiment(&ExperimentSpec {
        order: WkbOrder::K2,
        ..base
    })
    .unwrap();
    for (a, b) in k0.rows.iter().zip(&k2.rows) {
        assert!(b.error <= a.error, "eps {}: {} vs {}", a.eps, b.error, a.error);
        assert!(a.guard_ok() && b.guard_ok());
    }
}

#[test]
fn zero_datum_gives_degenerate_decay() {
    let spec = ExperimentSpec {
        data: DataSpec::Gaussian {
            amp: 0.0,
            width: 1.0,
            center: [0.0, 0.0],
        },
        grid_n: 32,
        grid_l: 48.0 * PI,
        ..ExperimentSpec::default()
    };
    let r = decay_experiment(&spec, &DecayOptions::default()).unwrap();
    assert!(r.degenerate && r.fit.is_none());
    let small = ExperimentSpec { grid_l: 16.0 * PI, ..spec };
    assert!(decay_experiment(&small, &DecayOptions::default()).is_err());
}

fn synthetic_row(t: f64, error: f64) -> LimitRow {
    LimitRow {
        eps: 0.1,
        time: t,
        order_k: 0,
        norm_s: 1.0,
        error,
        leading_error: error,
        residual: 0.0,
        self_conv_residual: 0.0,
        kg_dt: 1e-3,
        spectral_tail: 0.0,
        flags: Vec::new(),
    }
}

#[test]
fn growth_exponent_of_synthetic_errors() {
    let times = [1.0, 2.0, 4.0, 8.0];
    let flat = growth_from_rows(0.1, 0, times.iter().map(|&t| synthetic_row(t, 0.02)).collect());
    assert!(flat.fit.unwrap().slope.abs() < 1e-12);
    let square = growth_from_rows(0.1, 0, times.iter().map(|&t| synthetic_row(t, 1e-3 * (1.0 + t).powi(2))).collect());
    assert!((square.fit.unwrap().slope - 2.0).abs() < 1e-12);
}

#[test]
fn config_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("kgnr-spec-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    std::fs::write(
        &path,
        "# ladder\ndata.kind = rough\ndata.seed = 9\ndata.s_target = 6\neps = 0.2, 0.1\ntimes = 1,2\norder_k = 2\ngrid.n = 64\ngrid.l = 16pi\n",
    )
    .unwrap();
    let spec = ExperimentSpec::from_config_file(&path).unwrap();
    assert_eq!(spec.data, DataSpec::Rough { s_target: 6.0, seed: 9 });
    assert_eq!(spec.eps, vec![0.2, 0.1]);
    assert_eq!(spec.order, WkbOrder::K2);
    assert!((spec.grid_l - 16.0 * PI).abs() < 1e-12);
    std::fs::write(&path, "eps = 0.1, 0.2\n").unwrap();
    assert!(ExperimentSpec::from_config_file(&path).and_then(|s| s.validate()).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_cubic_data_fits_near_three(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = [0.2, 0.1414, 0.1, 0.0707, 0.05]
            .iter()
            .map(|&e: &f64| (e, 2.0 * e.powi(3) * (1.0 + rng.gen_range(-0.05..0.05))))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        prop_assert!((2.8..=3.2).contains(&fit.slope));
    }

    #[test]
    fn fit_ignores_error_scale(c in 1e-6f64..1e6, p in 0.5f64..4.0) {
        let pts: Vec<(f64, f64)> = [0.3, 0.2, 0.1, 0.05].iter().map(|&e: &f64| (e, e.powf(p) * (1.0 + e))).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(e, y)| (e, c * y)).collect();
        let (a, b) = (fit_rate(&pts).unwrap(), fit_rate(&scaled).unwrap());
        prop_assert!((a.slope - b.slope).abs() <= 1e-9);
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() <= 1e-9);
    }

    #[test]
    fn snapshots_round_trip(
        v in prop::collection::vec(-1e3f64..1e3, 64),
        w in prop::collection::vec(-1e3f64..1e3, 64),
        t in 0.0f64..10.0,
        eps in 0.0f64..0.5,
        complex in any::<bool>(),
    ) {
        let g = make_grid(8, 3.5).unwrap();
        let snap = if complex {
            let z = v.iter().zip(&w).map(|(a, b)| Complex64::new(*a, *b)).collect();
            Snapshot::complex(ComplexField::from_values(&g, z).unwrap(), t, eps)
        } else {
            Snapshot::real(RealField::from_values(&g, v.clone()).unwrap(), t, eps)
        };
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let back = Snapshot::read_from(&buf[..]).unwrap();
        prop_assert_eq!(back.time.to_bits(), t.to_bits());
        prop_assert_eq!(back.eps.to_bits(), eps.to_bits());
        prop_assert_eq!(back.grid().side_length(), 3.5);
        match (&snap.field, &back.field) {
            (Field::Real(a), Field::Real(b)) => prop_assert_eq!(a.values(), b.values()),
            (Field::Complex(a), Field::Complex(b)) => prop_assert_eq!(a.values(), b.values()),
            _ => prop_assert!(false, "kind changed"),
        }
        prop_assert!(Snapshot::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
