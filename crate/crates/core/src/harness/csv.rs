use std::io::Write;

use super::runner::ResultRow;
use super::scenario::Algorithm;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "scenario_id,algorithm,T,snr_db,mrf_nrf,trial,nmse_h,nmse_c,eta,wall_ms,support_size";

/// Fixed-point decimal with nine significant digits; `NaN`, `inf`, `-inf`
/// for non-finite values.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[ResultRow]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario_id,
            r.algorithm,
            r.snapshots,
            r.snr_db,
            r.mrf_nrf,
            r.trial,
            format_sig(r.nmse_h),
            format_sig(r.nmse_c),
            format_sig(r.eta),
            format_sig(r.wall_ms),
            r.support_size
        )?;
    }
    Ok(())
}

/// Reads rows written by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::invalid("missing or unexpected CSV header")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::invalid(format!("line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(bad("field count"));
            }
            let float = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
            let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(what));
            Ok(ResultRow {
                scenario_id: f[0].to_string(),
                algorithm: Algorithm::from_name(f[1]).ok_or_else(|| bad("algorithm"))?,
                snapshots: int(f[2], "T")?,
                snr_db: float(f[3], "snr_db")?,
                mrf_nrf: int(f[4], "mrf_nrf")?,
                trial: int(f[5], "trial")?,
                nmse_h: float(f[6], "nmse_h")?,
                nmse_c: float(f[7], "nmse_c")?,
                eta: float(f[8], "eta")?,
                wall_ms: float(f[9], "wall_ms")?,
                support_size: int(f[10], "support_size")?,
            })
        })
        .collect()
}
