use mchjm_core::curves::nelson_siegel;
use mchjm_core::fdr::CdvParams;
use mchjm_core::geometry::{
    build_modified_ns_family, build_plain_ns_family, commutation_check, span_dimension_estimate, tangency_residual_fields,
    verify_strategy2_consistency, Discretization, HwParams, ModelFields, Strategy, TangencyReport,
};
use mchjm_core::hjm::{ConstantVolSpec, VolatilitySpec};
use mchjm_core::rng::path_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{Emitter, Table};

pub const FAMILIES: [&str; 4] = ["hw3-constant-vol", "hw3-strategy2", "cdv-example", "ns-plain"];

/// Single-curve Hull–White `(a, σ)` for `ns-plain` unless `a0`/`sigma0` are set. The drift
/// mismatch grows like `σ²`, so a small volatility hides it below the verdict thresholds.
pub const PLAIN_NS_DEFAULT: (f64, f64) = (0.4, 0.02);

struct Report {
    table: Table,
    text: String,
    family: String,
}

impl Report {
    fn row(&mut self, state: usize, kind: &str, item: &str, value: impl ToString, verdict: &str) {
        self.table.row([self.family.clone(), state.to_string(), kind.into(), item.into(), value.to_string(), verdict.into()]);
    }

    fn tangency(&mut self, state: usize, label: &str, rep: &TangencyReport) {
        let v = format!("{:?}", rep.verdict);
        self.row(state, label, "drift", rep.drift_residual, &v);
        for (i, r) in rep.diffusion_residuals.iter().enumerate() {
            self.row(state, label, &format!("diffusion_{i}"), r, &v);
        }
        self.text
            .push_str(&format!("state {state} {label}: max residual {:.3e} → {v}\n", rep.max_residual()));
    }
}

/// Random multi-curve state on `disc`: a Nelson–Siegel curve per rate and small log-spreads.
fn random_state(rng: &mut ChaCha8Rng, disc: &Discretization, a: &[f64]) -> Vec<f64> {
    let ys: Vec<[f64; 3]> = a
        .iter()
        .map(|_| [rng.random_range(0.01..0.05), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02)])
        .collect();
    let spreads: Vec<f64> = (1..a.len()).map(|_| rng.random_range(0.001..0.02)).collect();
    let curves: Vec<_> = ys.iter().zip(a).map(|(y, &aj)| nelson_siegel(*y, aj)).collect();
    disc.sample(|x| curves.iter().map(|c| c.evaluate(x)).chain(spreads.iter().copied()).collect())
}

fn spans(rep: &mut Report, fields: &ModelFields, r: &[f64], s: usize, depth: usize) -> Result<()> {
    let mut dims = Vec::new();
    for d in 0..=depth {
        let dim = span_dimension_estimate(&fields.generators(), r, d)?;
        rep.row(s, "span_dimension", &format!("depth_{d}"), dim, "");
        dims.push(dim);
    }
    rep.text.push_str(&format!("state {s}: span dimension by depth {dims:?}\n"));
    Ok(())
}

fn commutation(rep: &mut Report, spec: &VolatilitySpec, r: &[f64], s: usize, disc: &Discretization) -> Result<()> {
    for (k, ok, worst) in commutation_check(spec, &[1, 2], r, disc)? {
        rep.row(s, "commutation", &format!("spread_{k}"), worst, if ok { "commutes" } else { "does not commute" });
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, out: &mut Emitter) -> Result<String> {
    let family = cfg.raw("family").unwrap_or("hw3-constant-vol").to_string();
    if !FAMILIES.contains(&family.as_str()) {
        return Err(CliError::Config(format!("unknown family `{family}` ({})", FAMILIES.join(" | "))));
    }
    let th = cfg.theta()?;
    let nodes = cfg.count("nodes", 48)?;
    let depth: usize = cfg.get("depth", 3)?;
    let n_states = cfg.count("states", 3)?;
    let seed = cfg.seed()?;
    let mut rep = Report {
        table: Table::new(&["family", "state", "kind", "item", "value", "verdict"]),
        text: format!("family {family}\n"),
        family: family.clone(),
    };
    let (a, sigma, beta) = (th.a.to_vec(), th.sigma.to_vec(), th.beta.to_vec());
    match family.as_str() {
        "hw3-constant-vol" => {
            let disc = Discretization::chebyshev(nodes, 10.0, 2);
            let spec: VolatilitySpec = ConstantVolSpec::hull_white(&a, &sigma, &beta)?.into();
            let fields = ModelFields::new(&spec, &disc)?;
            let fam = build_modified_ns_family(&HwParams { a: a.clone(), sigma, beta }, Strategy::One);
            for s in 0..n_states {
                let mut rng = path_rng(seed, s as u64);
                let r = random_state(&mut rng, &disc, &a);
                spans(&mut rep, &fields, &r, s, depth)?;
                let z: Vec<f64> = (0..fam.param_dim).map(|_| rng.random_range(-0.02..0.02)).collect();
                rep.tangency(s, "tangency_strategy1", &tangency_residual_fields(&fam, &fields, &z, &disc)?);
                commutation(&mut rep, &spec, &r, s, &disc)?;
            }
        }
        "hw3-strategy2" => {
            let disc = Discretization::chebyshev(nodes, 10.0, 2);
            let points: Vec<Vec<f64>> = (0..n_states)
                .map(|s| {
                    let mut rng = path_rng(seed, s as u64);
                    (0..12)
                        .map(|k| if k % 4 == 2 { rng.random_range(0.2..2.0) } else { rng.random_range(-0.02..0.02) })
                        .collect()
                })
                .collect();
            let r2 = verify_strategy2_consistency(&a, &sigma, &points, &disc)?;
            for (s, (c, p)) in r2.consistent_runs.iter().zip(&r2.control_runs).enumerate() {
                rep.tangency(s, "tangency_matched_beta", c);
                rep.tangency(s, "tangency_beta_plus_10pct", p);
            }
            rep.text.push_str(&format!(
                "matched beta {:?}: {:?}; +10% control: {:?}\n",
                r2.beta, r2.verdict, r2.control_verdict
            ));
        }
        "cdv-example" => {
            let disc = Discretization::chebyshev(nodes, 10.0, 2);
            let p = CdvParams {
                sigma: th.sigma,
                a: th.a,
                beta11: th.beta[0],
                beta12: cfg.get("beta12", 0.2)?,
                beta21: th.beta[1],
                beta23: cfg.get("beta23", 0.15)?,
            };
            let spec: VolatilitySpec = p.spec().into();
            let fields = ModelFields::new(&spec, &disc)?;
            for s in 0..n_states {
                let r = random_state(&mut path_rng(seed, s as u64), &disc, &a);
                spans(&mut rep, &fields, &r, s, depth)?;
                commutation(&mut rep, &spec, &r, s, &disc)?;
            }
        }
        _ => {
            let disc = Discretization::chebyshev(nodes, 10.0, 0);
            let a0 = cfg.positive("a0", PLAIN_NS_DEFAULT.0)?;
            let s0 = cfg.positive("sigma0", PLAIN_NS_DEFAULT.1)?;
            let spec: VolatilitySpec = ConstantVolSpec::hull_white(&[a0], &[s0], &[])?.into();
            let fields = ModelFields::new(&spec, &disc)?;
            let fam = build_plain_ns_family(a0);
            for s in 0..n_states {
                let mut rng = path_rng(seed, s as u64);
                let z = [rng.random_range(0.01..0.05), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02)];
                rep.tangency(s, "tangency_plain_ns", &tangency_residual_fields(&fam, &fields, &z, &disc)?);
            }
        }
    }
    let Report { table, text, .. } = rep;
    out.table("check.csv", table)?;
    out.emit("summary.txt", text.as_bytes())?;
    Ok(text)
}
