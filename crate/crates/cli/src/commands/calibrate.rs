use mchjm_core::calibration::{
    default_maturities, error_metrics, model_log_spreads, model_yields, outer_calibrate, stability_analysis,
    synthesize_market_data, window_sweep, Bounds, Dataset, OuterOptions, SynthSpec, Theta, MONTH_DAYS,
};

use crate::config::RunConfig;
use crate::dataset;
use crate::error::{CliError, Result};
use crate::output::{opt, Emitter, Table};

fn options(cfg: &RunConfig) -> Result<OuterOptions> {
    let d = OuterOptions::default();
    Ok(OuterOptions {
        max_iter: cfg.count("max_iter", d.max_iter)?,
        rel_improvement: cfg.positive("rel_improvement", d.rel_improvement)?,
        step_tol: cfg.positive("step_tol", d.step_tol)?,
        ident_cond: cfg.positive("ident_cond", d.ident_cond)?,
        free: d.free,
    })
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    dataset::read(&cfg.dataset()?)
}

fn theta_line(th: &Theta) -> String {
    Theta::NAMES
        .iter()
        .zip(th.to_vec())
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn synth(cfg: &RunConfig, out: &mut Emitter) -> Result<String> {
    let (y, y_m) = cfg.initial_curve()?;
    let noise_sd: f64 = cfg.get("noise_sd", 0.0)?;
    if !(noise_sd >= 0.0) {
        return Err(CliError::Config("`noise_sd` must be non-negative".into()));
    }
    let spec = SynthSpec {
        y,
        y_m,
        days: cfg.count("days", 80)?,
        maturities: default_maturities(),
        noise_sd,
        seed: cfg.seed()?,
    };
    let theta = cfg.theta()?;
    let data = synthesize_market_data(&theta, &spec)?;
    out.emit("dataset.csv", &dataset::to_csv(&data))?;
    Ok(format!("{} days generated with {}\n", data.len(), theta_line(&theta)))
}

pub fn calibrate(cfg: &RunConfig, out: &mut Emitter) -> Result<String> {
    let data = load(cfg)?;
    let theta0 = cfg.theta()?;
    let res = outer_calibrate(&data, &theta0, &Bounds::default(), &options(cfg)?)?;
    let metrics = error_metrics(&res, &data)?;

    let mut theta = Table::new(&["parameter", "initial", "calibrated"]);
    for (k, name) in Theta::NAMES.iter().enumerate() {
        theta.row([name.to_string(), theta0.to_vec()[k].to_string(), res.theta_star.to_vec()[k].to_string()]);
    }
    out.table("theta.csv", theta)?;

    let mut states = Table::new(&["date_index", "z1_0", "z1_1", "z1_2", "z1_3", "y0", "y1", "y2", "residual_norm"]);
    let mut yields = Table::new(&["date_index", "curve_id", "maturity_years", "market_yield", "model_yield"]);
    let mut spreads = Table::new(&["date_index", "tenor_id", "market_log_spread", "model_log_spread"]);
    for (snap, fit) in data.snapshots.iter().zip(&res.per_day) {
        let mut row = vec![snap.date.to_string()];
        row.extend(fit.z1.iter().chain(&fit.y).map(f64::to_string));
        row.push(fit.residual_norm.to_string());
        states.row(row);
        let model = model_yields(&res.theta_star, &data.anchor, snap.date, &fit.z1, &fit.y, &snap.maturities);
        for j in 0..3 {
            for ((x, m), g) in snap.maturities.iter().zip(snap.yields(j)).zip(&model[j]) {
                yields.row([snap.date.to_string(), j.to_string(), x.to_string(), m.to_string(), g.to_string()]);
            }
        }
        let g = model_log_spreads(&res.theta_star, &data.anchor, snap.date, &fit.z1, &fit.y);
        for j in 0..2 {
            spreads.row([snap.date.to_string(), (j + 1).to_string(), snap.log_spreads[j].to_string(), g[j].to_string()]);
        }
    }
    out.table("states.csv", states)?;
    out.table("fitted_yields.csv", yields)?;
    out.table("fitted_spreads.csv", spreads)?;

    let mut errors = Table::new(&["quantity", "relative_error"]);
    for j in 0..3 {
        errors.row([format!("yield_{j}"), metrics.yield_errors[j].to_string()]);
    }
    for j in 0..2 {
        errors.row([format!("log_spread_{}", j + 1), metrics.spread_errors[j].to_string()]);
        errors.row([format!("log_spread_{}_last_day", j + 1), metrics.end_spread_errors[j].to_string()]);
    }
    out.table("errors.csv", errors)?;

    let summary = format!(
        "initial: {}\ncalibrated: {}\nSSE {:e}, {} iterations, stop {:?}, converged {}\n\
         normalized condition {:e}, weakly identified {}\nyield errors {:?}\nlog-spread errors {:?}\n",
        theta_line(&theta0),
        theta_line(&res.theta_star),
        res.total_sse,
        res.iterations,
        res.stop_reason,
        res.converged,
        res.condition,
        res.weakly_identified,
        metrics.yield_errors,
        metrics.spread_errors,
    );
    out.emit("summary.txt", summary.as_bytes())?;
    Ok(summary)
}

pub fn stability(cfg: &RunConfig, out: &mut Emitter) -> Result<String> {
    let data = load(cfg)?;
    let window = cfg.count("window_days", 4 * MONTH_DAYS)?;
    let rolls = cfg.count("rolls", 50)?;
    let rep = stability_analysis(&data, window, rolls, &cfg.theta()?, &Bounds::default(), &options(cfg)?)?;
    let mut stats = Table::new(&["parameter", "mean", "std"]);
    for (k, name) in Theta::NAMES.iter().enumerate() {
        stats.row([name.to_string(), rep.mean[k].to_string(), rep.std[k].to_string()]);
    }
    out.table("stability.csv", stats)?;
    let mut header = vec!["roll"];
    header.extend(Theta::NAMES);
    let mut per_roll = Table::new(&header);
    for (r, th) in rep.thetas.iter().enumerate() {
        let mut row = vec![r.to_string()];
        row.extend((0..8).map(|k| opt(th.map(|t| t.to_vec()[k]))));
        per_roll.row(row);
    }
    out.table("rolls.csv", per_roll)?;
    let summary = format!(
        "{rolls} rolls of {window} days, {} excluded\nmean {:?}\nstd {:?}\n",
        rep.excluded.len(),
        rep.mean,
        rep.std
    );
    out.emit("summary.txt", summary.as_bytes())?;
    Ok(summary)
}

pub fn sweep(cfg: &RunConfig, out: &mut Emitter) -> Result<String> {
    let data = load(cfg)?;
    let months = cfg.list("months", &[1, 2, 3, 4, 5, 6])?;
    let end = cfg.get("end_date", data.last_date())?;
    let rows = window_sweep(&data, &months, end, &cfg.theta()?, &Bounds::default(), &options(cfg)?)?;
    let mut t = Table::new(&[
        "months", "days", "yield_error_0", "yield_error_1", "yield_error_2", "log_spread_error_1", "log_spread_error_2",
        "converged",
    ]);
    let mut summary = String::new();
    for r in &rows {
        let m = r.metrics.as_ref();
        let mut row = vec![r.months.to_string(), r.days.to_string()];
        row.extend((0..3).map(|j| opt(m.map(|m| m.yield_errors[j]))));
        row.extend((0..2).map(|j| opt(m.map(|m| m.spread_errors[j]))));
        row.push(if m.is_some() { r.converged.to_string() } else { String::new() });
        t.row(row);
        match m {
            Some(m) => summary.push_str(&format!("{} months: yield errors {:?}\n", r.months, m.yield_errors)),
            None => summary.push_str(&format!("{} months: window exceeds the dataset\n", r.months)),
        }
    }
    out.table("sweep.csv", t)?;
    out.emit("summary.txt", summary.as_bytes())?;
    Ok(summary)
}
