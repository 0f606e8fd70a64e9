//! Two-section CSV market data.
//!
//! ```text
//! date_index,curve_id,maturity_years,bond_price
//! 0,0,0.08333333333333333,0.9958...
//! date_index,tenor_id,log_spread
//! 0,1,0.001
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use mchjm_core::calibration::{Dataset, MarketSnapshot};

use crate::error::{CliError, Result};

pub const BOND_HEADER: [&str; 4] = ["date_index", "curve_id", "maturity_years", "bond_price"];
pub const SPREAD_HEADER: [&str; 3] = ["date_index", "tenor_id", "log_spread"];

pub fn to_csv(data: &Dataset) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut put = |rec: &[String]| w.write_record(rec).expect("writing to memory");
    put(&BOND_HEADER.map(String::from));
    for s in &data.snapshots {
        for j in 0..3 {
            for (x, b) in s.maturities.iter().zip(&s.bonds[j]) {
                put(&[s.date.to_string(), j.to_string(), x.to_string(), b.to_string()]);
            }
        }
    }
    put(&SPREAD_HEADER.map(String::from));
    for s in &data.snapshots {
        for j in 1..=2 {
            put(&[s.date.to_string(), j.to_string(), s.log_spreads[j - 1].to_string()]);
        }
    }
    w.into_inner().expect("in-memory writer")
}

#[derive(Default)]
struct Day {
    curves: [Vec<(f64, f64)>; 3],
    spreads: [Option<f64>; 2],
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, what: &str, bad: &dyn Fn(String) -> CliError) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(format!("invalid {what} `{}`", rec.get(k).unwrap_or(""))))
}

/// Parses the two sections; diagnostics carry the source name and line number.
pub fn from_csv(bytes: &[u8], origin: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut days: BTreeMap<usize, Day> = BTreeMap::new();
    let mut section = 0;
    let mut last_line = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Dataset(format!("{origin}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        last_line = line;
        let bad = |msg: String| CliError::Data {
            path: origin.to_string(),
            line,
            msg,
        };
        let is = |h: &[&str]| rec.len() == h.len() && rec.iter().zip(h).all(|(a, b)| a.trim() == *b);
        match section {
            0 if is(&BOND_HEADER) => section = 1,
            0 => return Err(bad(format!("expected header `{}`", BOND_HEADER.join(",")))),
            1 if is(&SPREAD_HEADER) => section = 2,
            1 => {
                if rec.len() != 4 {
                    return Err(bad(format!("expected 4 fields, found {}", rec.len())));
                }
                let date: usize = field(&rec, 0, "date_index", &bad)?;
                let j: usize = field(&rec, 1, "curve_id", &bad)?;
                let x: f64 = field(&rec, 2, "maturity", &bad)?;
                let p: f64 = field(&rec, 3, "bond price", &bad)?;
                if j > 2 {
                    return Err(bad(format!("curve_id {j} outside 0..=2")));
                }
                if !(x > 0.0 && x.is_finite()) || !(p > 0.0 && p.is_finite()) {
                    return Err(bad("maturity and bond price must be positive".into()));
                }
                days.entry(date).or_default().curves[j].push((x, p));
            }
            _ => {
                if rec.len() != 3 {
                    return Err(bad(format!("expected 3 fields, found {}", rec.len())));
                }
                let date: usize = field(&rec, 0, "date_index", &bad)?;
                let j: usize = field(&rec, 1, "tenor_id", &bad)?;
                let y: f64 = field(&rec, 2, "log_spread", &bad)?;
                if !(1..=2).contains(&j) {
                    return Err(bad(format!("tenor_id {j} outside 1..=2")));
                }
                let day = days
                    .get_mut(&date)
                    .ok_or_else(|| bad(format!("log-spread for date {date} without bond prices")))?;
                if day.spreads[j - 1].replace(y).is_some() {
                    return Err(bad(format!("duplicate log-spread for date {date}, tenor {j}")));
                }
            }
        }
    }
    if section < 2 {
        return Err(CliError::Data {
            path: origin.to_string(),
            line: last_line + 1,
            msg: format!("missing spreads section `{}`", SPREAD_HEADER.join(",")),
        });
    }
    let mut snapshots = Vec::with_capacity(days.len());
    let mut reference: Option<Vec<f64>> = None;
    for (date, day) in days {
        let mats: Vec<f64> = day.curves[0].iter().map(|p| p.0).collect();
        let reference = reference.get_or_insert_with(|| mats.clone());
        for (j, c) in day.curves.iter().enumerate() {
            let m: Vec<f64> = c.iter().map(|p| p.0).collect();
            if m != *reference {
                return Err(CliError::Dataset(format!(
                    "{origin}: date {date}, curve {j}: maturity set differs from the first date"
                )));
            }
        }
        let spreads = match day.spreads {
            [Some(a), Some(b)] => [a, b],
            _ => return Err(CliError::Dataset(format!("{origin}: date {date} lacks a log-spread"))),
        };
        let bonds = day.curves.map(|c| c.into_iter().map(|p| p.1).collect());
        snapshots.push(
            MarketSnapshot::new(date, mats, bonds, spreads)
                .map_err(|e| CliError::Dataset(format!("{origin}: {e}")))?,
        );
    }
    Dataset::new(snapshots).map_err(|e| CliError::Dataset(format!("{origin}: {e}")))
}

pub fn read(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))?;
    from_csv(&bytes, &path.display().to_string())
}
