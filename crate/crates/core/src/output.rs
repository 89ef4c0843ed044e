//! Run artifacts: per-sample and per-day CSV, JSON summary and text tables.
//!
//! Floats use Rust's shortest round-trip formatting so files are reproducible
//! byte for byte.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::config::ConfigDocument;
use crate::scenario::{DailyTotals, Gap, KpiSummary, RunOutput, SampleRecord, Scenario};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const DAILY_FILE: &str = "daily.csv";
pub const SUMMARY_JSON_FILE: &str = "summary.json";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

const SAMPLE_HEADER: &str = "epoch,elevation1_deg,elevation2_deg,range1_km,range2_km,\
attenuation1_db,attenuation2_db,eta1,eta2,dual_vis,night,comm,q,raw_rate_cps,\
raw_rate_unsifted_cps,qber,distilled_rate_cps,far_field_clamped";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Communication samples, one row each.
pub fn samples_csv(samples: &[SampleRecord]) -> String {
    let mut out = String::with_capacity(256 * samples.len() + SAMPLE_HEADER.len());
    out.push_str(SAMPLE_HEADER);
    out.push('\n');
    for s in samples.iter().filter(|s| s.comm) {
        let c = &s.coincidence;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.epoch.to_iso(),
            s.elevation_deg[0],
            s.elevation_deg[1],
            s.range_km[0],
            s.range_km[1],
            s.attenuation_db[0],
            s.attenuation_db[1],
            s.efficiency[0],
            s.efficiency[1],
            s.dual_vis,
            s.night,
            s.comm,
            c.q,
            c.raw_rate,
            c.raw_rate_unsifted,
            opt(c.qber),
            c.distilled_rate,
            s.far_field_clamped,
        );
    }
    out
}

pub fn daily_csv(daily: &[DailyTotals]) -> String {
    let mut out = String::from("day,date,dual_visibility_s,communication_s,raw_coincidences,distilled_bits\n");
    for d in daily {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            d.day, d.date, d.dual_visibility_s, d.communication_s, d.raw, d.distilled
        );
    }
    out
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    scenario: &'a str,
    wavelength_nm: f64,
    detector: &'a str,
    start: String,
    summary: &'a KpiSummary,
    gaps: &'a [Gap],
}

pub fn summary_json(scenario: &Scenario, run: &RunOutput) -> String {
    let file = SummaryFile {
        scenario: &scenario.name,
        wavelength_nm: (scenario.links[0].wavelength_m * 1e9 * 1e3).round() / 1e3,
        detector: scenario.links[0].detector.label(),
        start: scenario.start.to_iso(),
        summary: &run.summary,
        gaps: &run.gaps,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("summary serializes");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_else(|| "-".into())
}

/// Side-by-side KPI table, one column per scenario.
pub fn summary_table(columns: &[(&Scenario, &KpiSummary)]) -> String {
    type Row = (&'static str, fn(&Scenario, &KpiSummary) -> String);
    let rows: [Row; 12] = [
        ("Scenario", |s, _| s.name.clone()),
        ("Wavelength (nm)", |s, _| format!("{:.0}", s.links[0].wavelength_m * 1e9)),
        ("Detector", |s, _| s.links[0].detector.label().into()),
        ("Avg dual link attenuation (dB)", |_, k| fmt_opt(k.avg_dual_link_attenuation_db, 1)),
        ("Avg atmospheric losses (dB)", |_, k| fmt_opt(k.avg_atm_losses_db, 1)),
        ("System losses (dB)", |_, k| format!("{:.1}", k.system_losses_db)),
        ("Avg dual visibility (min/day)", |_, k| format!("{:.2}", k.avg_dual_visibility_min_per_day)),
        ("Avg communication time (min/day)", |_, k| format!("{:.2}", k.avg_communication_min_per_day)),
        ("Avg raw coincidences (/day)", |_, k| format!("{:.1}", k.avg_raw_per_day)),
        ("Avg distilled bits (/day)", |_, k| format!("{:.1}", k.avg_distilled_per_day)),
        ("Avg QBER (%)", |_, k| fmt_opt(k.avg_qber.map(|q| 100.0 * q), 2)),
        ("Far-field clamped samples", |_, k| k.flagged_samples.to_string()),
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(_, f)| columns.iter().map(|(s, k)| f(s, k)).collect())
        .collect();
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let col_w: Vec<usize> = (0..columns.len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0).max(8))
        .collect();
    let mut out = String::new();
    for ((label, _), row) in rows.iter().zip(&cells) {
        let _ = write!(out, "{label:<label_w$}");
        for (cell, w) in row.iter().zip(&col_w) {
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    }
    out
}

/// Writes every artifact of one run into `dir`, creating it if needed.
pub fn write_run(dir: &Path, scenario: &Scenario, resolved: &ConfigDocument, run: &RunOutput) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(SAMPLES_FILE), samples_csv(&run.samples))?;
    std::fs::write(dir.join(DAILY_FILE), daily_csv(&run.daily))?;
    std::fs::write(dir.join(SUMMARY_JSON_FILE), summary_json(scenario, run))?;
    std::fs::write(dir.join(SUMMARY_TEXT_FILE), summary_table(&[(scenario, &run.summary)]))?;
    let mut cfg = resolved.to_json_pretty();
    cfg.push('\n');
    std::fs::write(dir.join(RESOLVED_CONFIG_FILE), cfg)?;
    Ok(())
}
