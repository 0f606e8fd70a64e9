use mchjm_core::curves::{nelson_siegel, uniform_grid, ForwardCurve, MultiCurveState};
use mchjm_core::fdr::*;
use mchjm_core::hjm::{simulate_hjm_path, ConstantVolSpec, SimConfig, VolatilitySpec};
use mchjm_core::qe::QeFunction;
use mchjm_core::rng::brownian_increments;
use mchjm_core::Error;
use proptest::prelude::*;

fn theta() -> Theta {
    Theta {
        a: [0.53041117, 0.66253001, 0.65812121],
        sigma: [0.00285941, 0.09546952, 0.09083773],
        beta: [0.41734616, 0.82477578],
    }
}

fn hw3() -> Hw3Fdr {
    Hw3Fdr::new(theta(), [0.05, -0.02, 0.01], [0.001, 0.002]).unwrap()
}

fn cdv_params(beta12: f64, beta23: f64) -> CdvParams {
    CdvParams {
        sigma: [0.01, 0.012, 0.015],
        a: [0.3, 0.5, 0.8],
        beta11: 0.1,
        beta12,
        beta21: 0.05,
        beta23,
    }
}

fn cdv_initial() -> MultiCurveState {
    MultiCurveState::new(
        vec![
            ForwardCurve::Analytic(nelson_siegel([0.02, -0.01, 0.005], 0.3)),
            ForwardCurve::Analytic(nelson_siegel([0.025, -0.01, 0.004], 0.5)),
            ForwardCurve::Analytic(nelson_siegel([0.03, -0.012, 0.003], 0.8)),
        ],
        vec![0.01, 0.02],
    )
    .unwrap()
}

fn sup_gap(a: &dyn Realization, za: &[f64], b: &dyn Realization, zb: &[f64]) -> f64 {
    (0..=40)
        .map(|k| 0.25 * k as f64)
        .flat_map(|x| a.embed(za, x).into_iter().zip(b.embed(zb, x)).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn check_base_point(fdr: &dyn Realization, init: &MultiCurveState) {
    let z = vec![0.0; fdr.n()];
    for k in 0..=40 {
        let x = 0.25 * k as f64;
        let g = fdr.embed(&z, x);
        for j in 0..=fdr.m() {
            assert!((g[j] - init.curves[j].value(x)).abs() < 1e-12, "curve {j} at {x}");
        }
        for j in 1..=fdr.m() {
            assert!((g[fdr.m() + j] - init.log_spreads[j - 1]).abs() < 1e-12);
        }
    }
}

#[test]
fn embeddings_pass_through_the_initial_point() {
    let h = hw3();
    check_base_point(&h, &h.initial_state());
    let cv = ConstantVolFdr::new(&theta().spec(), &h.initial_state()).unwrap();
    check_base_point(&cv, &h.initial_state());
    let cdv = CdvExampleFdr::new(cdv_params(0.2, 0.15), &cdv_initial()).unwrap();
    check_base_point(&cdv, &cdv_initial());
}

#[test]
fn first_coordinate_is_time() {
    let h = hw3();
    let mut cfg = SimConfig::new(0.01, 1.0, 1, 3, Vec::new());
    cfg.record_every = 10;
    let inc = brownian_increments(3, 0, 100, 1, 0.01);
    let path = simulate_state_path(&h, &[0.0; 5], &cfg, &inc).unwrap();
    for (t, z) in path.times.iter().zip(&path.states) {
        assert!((z[0] - t).abs() < 1e-12);
    }
    let cdv = CdvExampleFdr::new(cdv_params(0.2, 0.15), &cdv_initial()).unwrap();
    let inc3 = brownian_increments(3, 0, 100, 3, 0.01);
    let path = simulate_state_path(&cdv, &[0.0; 12], &cfg, &inc3).unwrap();
    assert!((path.states.last().unwrap()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn closed_form_and_generic_realizations_agree() {
    let h = hw3();
    let cv = ConstantVolFdr::new(&theta().spec(), &h.initial_state()).unwrap();
    assert_eq!(cv.n(), 5);
    assert_eq!(cv.blocks()[0].n, 3);
    let cfg = SimConfig::new(1e-3, 1.0, 1, 11, Vec::new());
    let inc = brownian_increments(11, 0, 1000, 1, 1e-3);
    let p = simulate_state_path(&h, &[0.0; 5], &cfg, &inc).unwrap();
    let q = simulate_state_path(&cv, &[0.0; 5], &cfg, &inc).unwrap();
    let gap = sup_gap(&h, p.states.last().unwrap(), &cv, q.states.last().unwrap());
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn degenerate_cdv_matches_constant_volatility() {
    let p = cdv_params(0.0, 0.0);
    let cdv = CdvExampleFdr::new(p, &cdv_initial()).unwrap();
    let sigma = (0..3)
        .map(|j| {
            (0..3)
                .map(|i| if i == j { QeFunction::exp(p.sigma[j], -p.a[j]) } else { QeFunction::zero() })
                .collect()
        })
        .collect();
    let spec = ConstantVolSpec::new(sigma, vec![vec![p.beta11, 0.0, 0.0], vec![p.beta21, 0.0, 0.0]]).unwrap();
    let cv = ConstantVolFdr::new(&spec, &cdv_initial()).unwrap();
    assert_eq!(cv.n(), 7);
    let mut gaps = Vec::new();
    for dt in [1e-2, 5e-3] {
        let steps = (1.0 / dt) as usize;
        let cfg = SimConfig::new(dt, 1.0, 1, 4, Vec::new());
        let inc = brownian_increments(4, 0, steps, 3, dt);
        let a = simulate_state_path(&cdv, &[0.0; 12], &cfg, &inc).unwrap();
        let b = simulate_state_path(&cv, &[0.0; 7], &cfg, &inc).unwrap();
        gaps.push(sup_gap(&cdv, a.states.last().unwrap(), &cv, b.states.last().unwrap()));
    }
    // The deterministic convexity states are integrated by the scheme, so the gap is second order.
    assert!(gaps[0] < 1e-7, "{gaps:?}");
    assert!(gaps[0] / gaps[1] > 3.5, "{gaps:?}");
}

#[test]
fn cdv_realization_tracks_the_hjm_dynamics() {
    let p = cdv_params(0.2, 0.15);
    let init = cdv_initial();
    let cdv = CdvExampleFdr::new(p, &init).unwrap();
    assert_eq!(cdv.n(), 12);
    let spec: VolatilitySpec = p.spec().into();
    let dt = 1e-3;
    let inc = brownian_increments(21, 0, 500, 3, dt);
    let grid = uniform_grid(11.0, 0.05);
    let cfg = SimConfig::new(dt, 0.5, 1, 21, grid.clone());
    let hjm = simulate_hjm_path(&init, &spec, &cfg, &inc).unwrap();
    let state = simulate_state_path(&cdv, &[0.0; 12], &cfg, &inc).unwrap();
    let (r, z) = (hjm.states.last().unwrap(), state.states.last().unwrap());
    let mut curve_err = 0.0f64;
    for &x in grid.iter().filter(|x| **x <= 10.0) {
        let g = cdv.embed(z, x);
        for j in 0..3 {
            curve_err = curve_err.max((g[j] - r.curves[j].value(x)).abs());
        }
    }
    let g = cdv.embed(z, 0.0);
    let spread_err = (1..=2).map(|j| (g[2 + j] - r.log_spreads[j - 1]).abs()).fold(0.0, f64::max);
    assert!(curve_err < 5e-3, "{curve_err}");
    assert!(spread_err < 5e-3, "{spread_err}");
}

#[test]
fn coinciding_rates_are_rejected() {
    let mut th = theta();
    th.a[2] = th.a[1];
    assert!(matches!(Hw3Fdr::new(th, [0.05, -0.02, 0.01], [0.001, 0.002]), Err(Error::Domain(_))));
    let p = CdvParams { a: [0.3, 0.0, 0.8], ..cdv_params(0.2, 0.15) };
    assert!(CdvExampleFdr::new(p, &cdv_initial()).is_err());
    let zero = MultiCurveState::new(cdv_initial().curves, vec![0.0, 0.02]).unwrap();
    assert!(matches!(CdvExampleFdr::new(cdv_params(0.2, 0.15), &zero), Err(Error::Domain(_))));
}

#[test]
fn analytic_tangents_match_differences() {
    let h = hw3();
    let cv = ConstantVolFdr::new(&theta().spec(), &h.initial_state()).unwrap();
    let z = [0.4, 0.01, -0.003, 0.002, 0.0007];
    for k in 1..5 {
        for x in [0.0, 0.5, 3.0] {
            let exact = cv.tangent(&z, k, x);
            let h = 1e-6;
            let mut up = z;
            let mut dn = z;
            up[k] += h;
            dn[k] -= h;
            let fd: Vec<f64> = cv.embed(&up, x).iter().zip(cv.embed(&dn, x)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            for (e, f) in exact.iter().zip(&fd) {
                assert!((e - f).abs() < 1e-7 * (1.0 + e.abs()), "{k} {x} {e} {f}");
            }
        }
    }
}

const MATURITIES: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn benchmark_round_trip(
        tau in 0.0f64..2.0,
        w in prop::array::uniform4(-0.02f64..0.02),
    ) {
        let h = hw3();
        let z = [tau, w[0], w[1], w[2], w[3]];
        let search = choose_benchmark_coefficients(&h, &z, &MATURITIES, 50, 8).unwrap();
        let bc = search.best;
        prop_assert!(bc.invertible);
        let obs = bc.observables(&h, &z);
        let start: Vec<f64> = z.iter().map(|v| v + 0.01).collect();
        let back = bc.state_from_observables(&h, &obs, &start).unwrap();
        for k in 0..5 {
            prop_assert!((back[k] - z[k]).abs() < 1e-8, "{:?} {:?}", back, z);
        }
    }
}

#[test]
fn benchmark_search_is_deterministic_and_keeps_the_best() {
    let h = hw3();
    let z = [0.3, 0.01, 0.0, -0.001, 0.0002];
    let a = choose_benchmark_coefficients(&h, &z, &MATURITIES, 30, 5).unwrap();
    let b = choose_benchmark_coefficients(&h, &z, &MATURITIES, 30, 5).unwrap();
    assert_eq!(a.best.coeffs, b.best.coeffs);
    assert_eq!(a.trial_conditions, b.trial_conditions);
    assert_eq!(a.trial_conditions.len(), 30);
    let min = a.trial_conditions.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(a.best.condition, min);
    let c = choose_benchmark_coefficients(&h, &z, &MATURITIES, 30, 6).unwrap();
    assert_ne!(a.best.coeffs, c.best.coeffs);
    assert!(choose_benchmark_coefficients(&h, &z, &MATURITIES, 0, 5).is_err());
}

#[test]
fn repeated_benchmarks_are_singular() {
    let h = hw3();
    let z = [0.3, 0.01, 0.0, -0.001, 0.0002];
    let row = vec![1.0, 0.0, 0.0, 0.0, 0.0];
    let coeffs = vec![row; 5];
    let bc = benchmark_coordinates(&h, &z, &[1.0, 1.0, 2.0, 5.0, 10.0], &coeffs).unwrap();
    assert!(!bc.invertible);
    let obs = bc.observables(&h, &z);
    assert!(matches!(bc.state_from_observables(&h, &obs, &z), Err(Error::Numerical(_))));
    assert!(benchmark_coordinates(&h, &z, &MATURITIES[..4], &coeffs[..4]).is_err());
}

#[test]
fn spreads_follow_the_short_rate_differential() {
    // Without noise the log-spread grows by ∫(r^0 − r^j) − ½β²t.
    let h = hw3();
    let tau = 0.75;
    let z = [tau, 0.0, 0.0, 0.0, 0.0];
    let cv = ConstantVolFdr::new(&theta().spec(), &h.initial_state()).unwrap();
    for j in 1..=2 {
        let a = h.log_spread(j, &z);
        let b = cv.log_spread(j, &z);
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }
    let steps = 20000;
    let dt = tau / steps as f64;
    let mut y = h.y_m;
    let mut zz = [0.0; 5];
    for s in 0..steps {
        let t = (s as f64 + 0.5) * dt;
        zz[0] = t;
        let r = h.embed(&zz, 0.0);
        for j in 1..=2 {
            y[j - 1] += (r[0] - r[j] - 0.5 * theta().beta[j - 1].powi(2)) * dt;
        }
    }
    for j in 1..=2 {
        assert!((h.log_spread(j, &z) - y[j - 1]).abs() < 1e-10, "{j}");
    }
}
