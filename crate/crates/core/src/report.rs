//! Deterministic file output for simulation reports.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::simulator::SimulationReport;

pub const ARRIVALS_FILE: &str = "arrivals.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const ARRIVALS_HEADER: &str =
    "index,category,resource,admitted,total_after,color,category_count";

/// Plain decimal rendering with nine significant digits.
///
/// `25` becomes `25.0000000`, `0.000123` becomes `0.000123000000`, and
/// `1.5e12` becomes `1500000000000`. Zero is `0`.
pub fn format_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".to_string()
        } else if value > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    // Rounding happens here; afterwards only the decimal point moves.
    let sci = format!("{:.8e}", value.abs());
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let mut out = String::new();
    if value < 0.0 {
        out.push('-');
    }
    if exponent < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exponent - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exponent as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

pub fn arrivals_csv(report: &SimulationReport) -> String {
    let mut out = String::new();
    out.push_str(ARRIVALS_HEADER);
    out.push('\n');
    for r in &report.records {
        let color = r.color.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.index,
            r.category,
            format_sig9(r.resource),
            r.admitted,
            format_sig9(r.total_after),
            color,
            r.category_count
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn summary_text(report: &SimulationReport) -> String {
    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        writeln!(out, "{key}={value}").expect("writing to a String cannot fail");
    };
    line("seed", report.seed.to_string());
    line("slice_capacity", report.slice_capacity.to_string());
    for c in &report.categories {
        line(
            &format!("category_{}_capacity", c.category),
            c.admitted.to_string(),
        );
        line(
            &format!("category_{}_service_cap", c.category),
            c.service_cap.to_string(),
        );
        line(
            &format!("category_{}_colors_used", c.category),
            c.colors_used.to_string(),
        );
    }
    line("total_allocated", format_sig9(report.total_allocated));
    let v = &report.variance;
    line("variance_u_effective", format_sig9(v.u_effective));
    line("variance_term_sigma", format_sig9(v.term_sigma));
    line("variance_term_cov", format_sig9(v.term_cov));
    line("variance_term_mean", format_sig9(v.term_mean));
    line("variance_total", format_sig9(v.total));
    line("sla_mean_load", format_sig9(report.sla_mean_load));
    line("sla_lower_bound", format_sig9(report.sla_lower_bound));
    out
}

/// Writes `arrivals.csv` and `summary.txt` into `out_dir`.
///
/// Each file is written to a temporary sibling and renamed into place, so a
/// failed run never leaves a truncated file behind.
pub fn emit_report(report: &SimulationReport, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let csv = arrivals_csv(report);
    let summary = summary_text(report);
    let mut staged = Vec::with_capacity(2);
    for (name, contents) in [(ARRIVALS_FILE, csv), (SUMMARY_FILE, summary)] {
        let mut tmp = NamedTempFile::new_in(out_dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, out_dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| e.error)?;
        written.push(path);
    }
    Ok(written)
}
