//! End-to-end acceptance criteria A1–A10. Each criterion prints one PASS/FAIL line with its
//! measured value and elapsed time; the test fails if any criterion fails.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mchjm_core::calibration::{
    error_metrics, inner_solve, outer_calibrate, residual_at, stability_analysis, synthesize_market_data,
    synthesize_regime_switch, Bounds, OuterOptions, SynthSpec, Theta, DAY, MONTH_DAYS,
};
use mchjm_core::curves::{nelson_siegel, uniform_grid};
use mchjm_core::fdr::{choose_benchmark_coefficients, simulate_state_path, CdvParams, Hw3Fdr, Realization};
use mchjm_core::geometry::{
    build_modified_ns_family, build_plain_ns_family, span_dimension_estimate, tangency_residual_fields,
    verify_strategy2_consistency, Discretization, HwParams, ModelFields, Strategy, Verdict,
};
use mchjm_core::hjm::{martingale_check, simulate_hjm, simulate_hjm_path, ConstantVolSpec, SimConfig, VolatilitySpec};
use mchjm_core::qe::QeFunction;
use mchjm_core::rng::{brownian_increments, coarsen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Y: [f64; 3] = [0.05, -0.02, 0.01];
const Y_M: [f64; 2] = [0.001, 0.002];

fn initial_guess() -> Theta {
    Theta {
        a: [0.53041117, 0.66253001, 0.65812121],
        sigma: [0.00285941, 0.09546952, 0.09083773],
        beta: [0.41734616, 0.82477578],
    }
}

fn calibrated() -> Theta {
    Theta {
        a: [0.3719, 0.3721, 0.3727],
        sigma: [0.1643, 0.1590, 0.1598],
        beta: [0.4814, 0.8825],
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", items.join(", "))
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn a1() -> Outcome {
    let th = initial_guess();
    let f = (0..3).fold(QeFunction::zero(), |acc, j| &acc + &QeFunction::exp(th.sigma[j], -th.a[j]));
    let m = f.annihilator().unwrap();
    let worst = sup((0..3).flat_map(|j| {
        let g = m.apply(&QeFunction::exp(th.sigma[j], -th.a[j]));
        (0..=1000).map(move |k| g.evaluate(0.01 * k as f64).abs())
    }));
    let e = QeFunction::exp(1.0, -1.0);
    let d = e.multiply(&e.integrate_from_zero());
    let md = d.annihilator().unwrap();
    let expected = [2.0, 3.0, 1.0];
    let coeff_gap = if md.coeffs.len() == 3 { sup(md.coeffs.iter().zip(expected).map(|(c, e)| (c - e).abs())) } else { f64::INFINITY };
    let d_res = sup((0..=1000).map(|k| md.apply(&d).evaluate(0.01 * k as f64).abs()));
    outcome(
        m.degree() == 3 && worst <= 1e-10 && coeff_gap < 1e-12 && d_res <= 1e-10,
        format!("deg M = {}, sup |M(σe^(-ax))| = {worst:.2e}; D annihilator {:?}, sup residual {d_res:.2e}", m.degree(), md.coeffs),
    )
}

/// Sup over paths, recorded times and maturities in [0, 10] of the gap between the realization
/// and the discretized HJM curves. The grid extends one horizon past 10 so that the inflow
/// boundary never reaches the compared range.
fn a2_gap(fdr: &Hw3Fdr, spec: &VolatilitySpec, dt: f64, dx: f64, fine_dt: f64, paths: usize) -> f64 {
    let factor = (dt / fine_dt).round() as usize;
    let steps = (1.0 / dt).round() as usize;
    let mut cfg = SimConfig::new(dt, 1.0, 1, 7, uniform_grid(11.0, dx));
    cfg.record_every = (0.01 / dt).round() as usize;
    let init = fdr.initial_state();
    sup((0..paths).map(|p| {
        let inc = coarsen(&brownian_increments(7, p as u64, steps * factor, 1, fine_dt), factor);
        let hjm = simulate_hjm_path(&init, spec, &cfg, &inc).unwrap();
        let zp = simulate_state_path(fdr, &[0.0; 5], &cfg, &inc).unwrap();
        sup(hjm.states.iter().zip(&zp.states).flat_map(|(st, z)| {
            let curves = cfg.grid.iter().filter(|x| **x <= 10.0 + 1e-9).flat_map(|&x| {
                let g = fdr.embed(z, x);
                (0..3).map(move |j| (g[j] - st.curves[j].value(x)).abs()).collect::<Vec<_>>()
            });
            let g0 = fdr.embed(z, 0.0);
            let spreads = (0..2).map(move |j| (g0[3 + j] - st.log_spreads[j]).abs());
            curves.chain(spreads).collect::<Vec<_>>()
        }))
    }))
}

fn a2() -> Outcome {
    let th = initial_guess();
    let fdr = Hw3Fdr::new(th, Y, Y_M).unwrap();
    let spec: VolatilitySpec = th.spec().into();
    let coarse = a2_gap(&fdr, &spec, 1e-3, 0.05, 5e-4, 16);
    let fine = a2_gap(&fdr, &spec, 5e-4, 0.025, 5e-4, 16);
    let ratio = coarse / fine;
    outcome(
        coarse <= 5e-3 && (1.5..=3.0).contains(&ratio),
        format!("sup gap {coarse:.3e} at (dt, dx) = (1e-3, 0.05), {fine:.3e} halved, ratio {ratio:.3}"),
    )
}

fn a3() -> Outcome {
    let th = initial_guess();
    let spec: VolatilitySpec = th.spec().into();
    let init = Hw3Fdr::new(th, Y, Y_M).unwrap().initial_state();
    // A CFL number of one makes the upwind transport an exact shift; coarser ratios add a
    // numerical diffusion the B⁰/S⁰ test resolves at 10⁴ paths.
    let cfg = SimConfig::new(0.01, 1.0, 10_000, 20211119, uniform_grid(6.0, 0.01));
    let z = |cfg: &SimConfig| -> Vec<f64> {
        let set = simulate_hjm(&init, &spec, cfg).unwrap();
        (0..3).map(|j| martingale_check(&set, j, 1.0, 5.0).unwrap().z).collect()
    };
    let clean = z(&cfg);
    let biased = z(&SimConfig { drift_bias: 0.01, ..cfg.clone() });
    let clean_ok = clean.iter().all(|v| v.abs() < 3.0);
    let rejected = biased.iter().any(|v| v.abs() > 5.0);
    outcome(
        clean_ok && rejected,
        format!("z = {:.3?}; with drift +0.01: z = {:.3?}", clean, biased),
    )
}

fn random_state(rng: &mut ChaCha8Rng, disc: &Discretization, a: &[f64]) -> Vec<f64> {
    let curves: Vec<QeFunction> = a
        .iter()
        .map(|&aj| nelson_siegel([rng.random_range(0.01..0.05), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02)], aj))
        .collect();
    let spreads: Vec<f64> = (1..a.len()).map(|_| rng.random_range(0.001..0.02)).collect();
    disc.sample(|x| curves.iter().map(|c| c.evaluate(x)).chain(spreads.iter().copied()).collect())
}

fn a4() -> Outcome {
    let th = initial_guess();
    let disc = Discretization::chebyshev(48, 10.0, 2);
    let hw: VolatilitySpec = ConstantVolSpec::hull_white(&th.a, &th.sigma, &th.beta).unwrap().into();
    let cdv: VolatilitySpec = CdvParams { sigma: th.sigma, a: th.a, beta11: th.beta[0], beta12: 0.2, beta21: th.beta[1], beta23: 0.15 }
        .spec()
        .into();
    let (hw, cdv) = (ModelFields::new(&hw, &disc).unwrap(), ModelFields::new(&cdv, &disc).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dims = Vec::new();
    for _ in 0..3 {
        let r = random_state(&mut rng, &disc, &th.a);
        dims.push((
            span_dimension_estimate(&hw.generators(), &r, 3).unwrap(),
            span_dimension_estimate(&cdv.generators(), &r, 3).unwrap(),
        ));
    }
    outcome(
        dims.iter().all(|&(h, c)| h == 5 && c <= 12),
        format!("(HW3, CDV) span dimensions at depth 3: {dims:?}"),
    )
}

fn a5() -> Outcome {
    let th = initial_guess();
    let (a, s, b) = (th.a.to_vec(), th.sigma.to_vec(), th.beta.to_vec());
    let disc = Discretization::chebyshev(48, 10.0, 2);
    let spec: VolatilitySpec = ConstantVolSpec::hull_white(&a, &s, &b).unwrap().into();
    let fields = ModelFields::new(&spec, &disc).unwrap();
    let fam = build_modified_ns_family(&HwParams { a: a.clone(), sigma: s.clone(), beta: b }, Strategy::One);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s1 = sup((0..3).map(|_| {
        let z: Vec<f64> = (0..fam.param_dim).map(|_| rng.random_range(-0.02..0.02)).collect();
        tangency_residual_fields(&fam, &fields, &z, &disc).unwrap().max_residual()
    }));
    let points: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..12).map(|k| if k % 4 == 2 { rng.random_range(0.2..2.0) } else { rng.random_range(-0.02..0.02) }).collect())
        .collect();
    let s2 = verify_strategy2_consistency(&a, &s, &points, &disc).unwrap();

    let disc0 = Discretization::chebyshev(48, 10.0, 0);
    let single: VolatilitySpec = ConstantVolSpec::hull_white(&[0.4], &[0.02], &[]).unwrap().into();
    let plain = tangency_residual_fields(
        &build_plain_ns_family(0.4),
        &ModelFields::new(&single, &disc0).unwrap(),
        &[0.03, -0.002, 0.001],
        &disc0,
    )
    .unwrap()
    .max_residual();
    outcome(
        s1 < 1e-6 && s2.verdict == Verdict::Consistent && s2.control_verdict == Verdict::Inconsistent && plain > 1e-2,
        format!(
            "strategy 1 residual {s1:.2e}; strategy 2 {:?}, +10% β {:?}; plain NS residual {plain:.3e}",
            s2.verdict, s2.control_verdict
        ),
    )
}

fn a6() -> Outcome {
    let th = initial_guess();
    let noisy = synthesize_market_data(&th, &SynthSpec { days: 30, noise_sd: 1e-3, seed: 3, ..SynthSpec::default() }).unwrap();
    let snap = &noisy.snapshots[29];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let affinity = sup((0..100).map(|_| {
        let u: [f64; 7] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let v: [f64; 7] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let al: f64 = rng.random_range(0.0..=1.0);
        let mix: [f64; 7] = std::array::from_fn(|k| al * u[k] + (1.0 - al) * v[k]);
        let (rm, ru, rv) = (residual_at(snap, &noisy.anchor, &th, &mix), residual_at(snap, &noisy.anchor, &th, &u), residual_at(snap, &noisy.anchor, &th, &v));
        sup((0..rm.len()).map(|i| (rm[i] - (al * ru[i] + (1.0 - al) * rv[i])).abs()))
    }));

    // Regenerate the driving state path independently of the dataset.
    let spec = SynthSpec { days: 30, ..SynthSpec::default() };
    let data = synthesize_market_data(&th, &spec).unwrap();
    let fdr = Hw3Fdr::new(th, spec.y, spec.y_m).unwrap();
    let steps = spec.days - 1;
    let mut cfg = SimConfig::new(DAY, steps as f64 * DAY, 1, spec.seed, Vec::new());
    cfg.record_every = 1;
    let states = simulate_state_path(&fdr, &[0.0; 5], &cfg, &brownian_increments(spec.seed, 0, steps, 1, DAY)).unwrap().states;
    let recovery = sup(data.snapshots.iter().zip(&states).flat_map(|(snap, z)| {
        let fit = inner_solve(snap, &data.anchor, &th).unwrap();
        let dz = (0..4).map(|k| (fit.z1[k] - z[k + 1]).abs()).collect::<Vec<_>>();
        let dy = (0..3).map(|k| (fit.y[k] - spec.y[k]).abs()).collect::<Vec<_>>();
        dz.into_iter().chain(dy)
    }));
    outcome(
        affinity <= 1e-10 && recovery <= 1e-8,
        format!("affinity defect {affinity:.2e}; (z₁, y) recovery error {recovery:.2e}"),
    )
}

fn a7() -> Outcome {
    let (b, o) = (Bounds::default(), OuterOptions::default());
    let clean = synthesize_market_data(&calibrated(), &SynthSpec::default()).unwrap();
    let res = outer_calibrate(&clean, &initial_guess(), &b, &o).unwrap();
    let m = error_metrics(&res, &clean).unwrap();
    let noisy = synthesize_market_data(&calibrated(), &SynthSpec { noise_sd: 1e-3, ..SynthSpec::default() }).unwrap();
    let nres = outer_calibrate(&noisy, &initial_guess(), &b, &o).unwrap();
    let nm = error_metrics(&nres, &noisy).unwrap();
    let pass = res.total_sse < 1e-12
        && m.yield_errors.iter().all(|e| *e < 1e-6)
        && m.spread_errors.iter().all(|e| *e < 1e-6)
        && nm.yield_errors.iter().all(|e| (1e-4..=5e-2).contains(e));
    outcome(
        pass,
        format!(
            "noiseless SSE {:.2e}, yield errors {}, spread errors {}; noise 1e-3 yield errors {}",
            res.total_sse,
            sci(&m.yield_errors),
            sci(&m.spread_errors),
            sci(&nm.yield_errors)
        ),
    )
}

fn a8() -> Outcome {
    let (b, o) = (Bounds::default(), OuterOptions::default());
    let window = 4 * MONTH_DAYS;
    let rolls = 50;
    let spec = SynthSpec { days: window + rolls - 1, ..SynthSpec::default() };
    let stationary = synthesize_market_data(&calibrated(), &spec).unwrap();
    let switched = synthesize_regime_switch(&calibrated(), &initial_guess(), window + rolls / 2, &spec).unwrap();
    let s = stability_analysis(&stationary, window, rolls, &initial_guess(), &b, &o).unwrap();
    let n = stability_analysis(&switched, window, rolls, &initial_guess(), &b, &o).unwrap();
    let stable = (0..8).all(|k| s.std[k] < 1e-6 * (1.0 + s.mean[k].abs()));
    let ratios: Vec<f64> = (0..8).map(|k| n.std[k] / s.std[k]).collect();
    let control = (0..8).all(|k| n.std[k] >= 100.0 * s.std[k]);
    outcome(
        stable && control && s.excluded.is_empty(),
        format!(
            "stationary std {} ({} excluded); regime-switch/stationary std ratios {}",
            sci(&s.std),
            s.excluded.len(),
            sci(&ratios)
        ),
    )
}

fn a9() -> Outcome {
    const MATURITIES: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];
    let fdr = Hw3Fdr::new(initial_guess(), Y, Y_M).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut invertible = true;
    for s in 0..20 {
        let z: Vec<f64> = std::iter::once(rng.random_range(0.0..2.0)).chain((0..4).map(|_| rng.random_range(-0.02..0.02))).collect();
        let bc = choose_benchmark_coefficients(&fdr, &z, &MATURITIES, 50, s).unwrap().best;
        invertible &= bc.invertible;
        let start: Vec<f64> = z.iter().map(|v| v + 0.01).collect();
        let back = bc.state_from_observables(&fdr, &bc.observables(&fdr, &z), &start).unwrap();
        worst = worst.max(sup(back.iter().zip(&z).map(|(p, q)| (p - q).abs())));
    }
    outcome(invertible && worst <= 1e-8, format!("K₅ invertible at all states: {invertible}; round-trip error {worst:.2e}"))
}

fn mchjm(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_mchjm")).args(args).output().map(|o| o.status.success()).unwrap_or(false)
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn a10() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let data_dir = root.path().join("data");
    let data = data_dir.join("dataset.csv");
    let d = data.to_str().unwrap();
    if !mchjm(&["synth", "--out", data_dir.to_str().unwrap(), "--seed", "11", "--set", "days=30", "--set", "noise_sd=0.0005"]) {
        return outcome(false, "synth failed".into());
    }
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("synth", vec!["--set", "days=30", "--set", "noise_sd=0.0005"]),
        ("calibrate", vec!["--dataset", d]),
        ("check", vec!["--set", "family=hw3-constant-vol"]),
        ("check", vec!["--set", "family=hw3-strategy2"]),
        ("check", vec!["--set", "family=cdv-example"]),
        ("check", vec!["--set", "family=ns-plain"]),
        ("simulate", vec!["--set", "paths=200", "--set", "horizon=0.5"]),
        ("stability", vec!["--dataset", d, "--set", "window_days=25", "--set", "rolls=3"]),
        ("sweep", vec!["--dataset", d, "--set", "months=1"]),
    ];
    let mut differing = Vec::new();
    for (k, (cmd, extra)) in runs.iter().enumerate() {
        let outs: Vec<PathBuf> = (0..2).map(|r| root.path().join(format!("{k}_{r}"))).collect();
        for o in &outs {
            let mut args = vec![*cmd, "--seed", "11", "--out", o.to_str().unwrap()];
            args.extend(extra);
            if !mchjm(&args) {
                return outcome(false, format!("`{cmd}` failed"));
            }
        }
        let (x, y) = (files(&outs[0]), files(&outs[1]));
        if x.is_empty() || x != y {
            differing.push(*cmd);
        }
    }
    outcome(differing.is_empty(), format!("{} runs compared byte for byte; differing: {differing:?}", runs.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Option<f64>, fn() -> Outcome); 10] = [
        ("A1", Some(1.0), a1),
        ("A2", Some(120.0), a2),
        ("A3", Some(300.0), a3),
        ("A4", Some(60.0), a4),
        ("A5", Some(60.0), a5),
        ("A6", Some(10.0), a6),
        ("A7", Some(600.0), a7),
        ("A8", Some(1800.0), a8),
        ("A9", Some(30.0), a9),
        ("A10", None, a10),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    writeln!(err).unwrap();
    for (id, budget, run) in criteria {
        let t0 = Instant::now();
        let o = run();
        let secs = t0.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| secs < b);
        let pass = o.pass && in_time;
        let limit = budget.map(|b| format!(" < {b} s")).unwrap_or_default();
        writeln!(err, "{id} {} [{secs:.2} s{limit}] {}", if pass { "PASS" } else { "FAIL" }, o.detail).unwrap();
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
