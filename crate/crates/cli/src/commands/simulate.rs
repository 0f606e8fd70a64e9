use mchjm_core::curves::{nelson_siegel, uniform_grid, ForwardCurve, MultiCurveState};
use mchjm_core::fdr::{simulate_state_path, Hw3Fdr, Realization};
use mchjm_core::hjm::{martingale_check, simulate_hjm, ConstantVolSpec, SimConfig, VolatilitySpec};
use mchjm_core::rng::brownian_increments;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{Emitter, Table};

/// Paths below this count skip the martingale tests.
const MIN_MARTINGALE_PATHS: usize = 100;

pub fn run(cfg: &RunConfig, out: &mut Emitter) -> Result<String> {
    let model = cfg.raw("model").unwrap_or("hw3");
    let theta = cfg.theta()?;
    let (y, y_m) = cfg.initial_curve()?;
    let (sigma, beta) = match model {
        "hw3" => (theta.sigma, theta.beta),
        "zero-vol" => ([0.0; 3], [0.0; 2]),
        other => return Err(CliError::Config(format!("unknown model `{other}` (hw3 | zero-vol)"))),
    };
    let spec: VolatilitySpec = ConstantVolSpec::hull_white(&theta.a, &sigma, &beta)?.into();
    let initial = MultiCurveState::new(
        (0..3).map(|j| ForwardCurve::Analytic(nelson_siegel(y, theta.a[j]))).collect(),
        y_m.to_vec(),
    )?;

    let dt = cfg.positive("dt", 0.01)?;
    let horizon = cfg.positive("horizon", 1.0)?;
    let dx = cfg.positive("dx", 0.05)?;
    let grid_max = cfg.positive("grid_max", 10.0)?;
    let n_paths = cfg.count("paths", 1000)?;
    let write_paths: usize = cfg.get("write_paths", 4)?;
    let mt: f64 = cfg.get("martingale_t", horizon)?;
    let maturity = cfg.positive("martingale_maturity", 5.0)?;
    let record_dt = cfg.positive("record_dt", mt.max(dt))?;
    if !(0.0..=horizon).contains(&mt) || maturity < mt {
        return Err(CliError::Config("need 0 ≤ martingale_t ≤ horizon and martingale_t ≤ martingale_maturity".into()));
    }
    if maturity > grid_max {
        return Err(CliError::Config("martingale_maturity exceeds grid_max".into()));
    }
    let every = (record_dt / dt).round();
    if every < 1.0 || (every * dt - record_dt).abs() > 1e-9 * record_dt {
        return Err(CliError::Config("record_dt must be a positive multiple of dt".into()));
    }

    let mut sim = SimConfig::new(dt, horizon, n_paths, cfg.seed()?, uniform_grid(grid_max, dx));
    sim.record_every = every as usize;
    sim.drift_bias = cfg.get("drift_bias", 0.0)?;
    let set = simulate_hjm(&initial, &spec, &sim)?;

    let mut paths = Table::new(&["path", "time", "curve_id", "maturity", "forward"]);
    let mut spreads = Table::new(&["path", "time", "log_numeraire", "log_spread_1", "log_spread_2"]);
    for (p, path) in set.paths.iter().take(write_paths).enumerate() {
        for (k, (t, st)) in path.times.iter().zip(&path.states).enumerate() {
            for (j, c) in st.curves.iter().enumerate() {
                for &x in sim.grid.iter() {
                    paths.row([p.to_string(), t.to_string(), j.to_string(), x.to_string(), c.value(x).to_string()]);
                }
            }
            spreads.row([
                p.to_string(),
                t.to_string(),
                path.log_numeraire[k].to_string(),
                st.log_spreads[0].to_string(),
                st.log_spreads[1].to_string(),
            ]);
        }
    }
    out.table("paths.csv", paths)?;
    out.table("spreads.csv", spreads)?;

    let mut summary = format!("model {model}, {n_paths} paths, dt {dt}, horizon {horizon}\n");
    if model == "hw3" {
        let fdr = Hw3Fdr::new(theta, y, y_m)?;
        let steps = sim.steps()?;
        let mut table = Table::new(&["path", "time", "z0", "z1", "z2", "z3", "z4", "max_embedding_gap"]);
        let mut worst = 0.0f64;
        for (p, path) in set.paths.iter().take(write_paths).enumerate() {
            let inc = brownian_increments(sim.seed, p as u64, steps, 1, dt);
            let zp = simulate_state_path(&fdr, &[0.0; 5], &sim, &inc)?;
            for ((t, z), st) in zp.times.iter().zip(&zp.states).zip(&path.states) {
                let mut gap = 0.0f64;
                for &x in sim.grid.iter() {
                    let g = fdr.embed(z, x);
                    for j in 0..3 {
                        gap = gap.max((g[j] - st.curves[j].value(x)).abs());
                    }
                    for j in 0..2 {
                        gap = gap.max((g[3 + j] - st.log_spreads[j]).abs());
                    }
                }
                worst = worst.max(gap);
                let mut row = vec![p.to_string(), t.to_string()];
                row.extend(z.iter().map(f64::to_string));
                row.push(gap.to_string());
                table.row(row);
            }
        }
        out.table("fdr.csv", table)?;
        if write_paths > 0 {
            summary.push_str(&format!("max |embedding - HJM| over written paths: {worst:.3e}\n"));
        }
    }

    let mut mart = Table::new(&["test", "t", "maturity", "mean", "reference", "stderr", "z"]);
    if n_paths >= MIN_MARTINGALE_PATHS {
        for j in 0..3 {
            let s = martingale_check(&set, j, mt, maturity)?;
            let name = if j == 0 { "B0/S0".to_string() } else { format!("S{j}*B{j}/S0") };
            summary.push_str(&format!("martingale {name} at ({mt}, {maturity}): z = {:.3}\n", s.z));
            mart.row([name, mt.to_string(), maturity.to_string(), s.mean.to_string(), s.reference.to_string(), s.stderr.to_string(), s.z.to_string()]);
        }
    } else {
        summary.push_str(&format!("martingale tests skipped: fewer than {MIN_MARTINGALE_PATHS} paths\n"));
    }
    out.table("martingale.csv", mart)?;
    out.emit("summary.txt", summary.as_bytes())?;
    Ok(summary)
}
