use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::metrics::MetricsReport;

/// One CSV line: a report's config fields plus a single (k, accuracy).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub mode: String,
    pub pathway: String,
    pub fusion: String,
    pub image_model: String,
    pub text_model: String,
    pub ratio: Option<f64>,
    pub color: Option<String>,
    pub location: Option<String>,
    pub seed: u64,
    pub fingerprint: String,
    pub k: usize,
    pub accuracy: f64,
    pub n_queries: usize,
    pub n_products: usize,
    pub wall_ms: u64,
}

pub fn csv_rows(reports: &[MetricsReport]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for r in reports {
        let c = &r.config;
        let spec = c.render_spec.as_ref().filter(|_| c.mode.rendered());
        for acc in &r.accuracy {
            rows.push(CsvRow {
                mode: c.mode.to_string(),
                pathway: c.mode.pathway().to_string(),
                fusion: c
                    .mode
                    .fusion()
                    .map_or("none".to_string(), |f| f.to_string()),
                image_model: c.image_encoder.model_id().to_string(),
                text_model: c.text_encoder.model_id().to_string(),
                ratio: spec.map(|s| s.font_size_ratio),
                color: spec.map(|s| s.color.to_string()),
                location: spec.map(|s| s.location.to_string()),
                seed: c.seed,
                fingerprint: r.fingerprint.clone(),
                k: acc.k,
                accuracy: acc.accuracy,
                n_queries: r.n_queries,
                n_products: r.n_products,
                wall_ms: r.wall.total_ms,
            });
        }
    }
    rows
}

pub fn reports_to_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in csv_rows(reports) {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn reports_to_json(reports: &[MetricsReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`.
pub fn write_reports(dir: &Path, stem: &str, reports: &[MetricsReport]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.json")), reports_to_json(reports)? + "\n")?;
    std::fs::write(dir.join(format!("{stem}.csv")), reports_to_csv(reports)?)?;
    Ok(())
}

/// Plain-text table, one line per report.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut ks: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.accuracy.iter().map(|a| a.k))
        .collect();
    ks.sort_unstable();
    ks.dedup();

    let mut out = format!("{:<20} {:>6} {:>8} {:>8}", "mode", "ratio", "color", "location");
    for k in &ks {
        let _ = write!(out, " {:>7}", format!("Acc@{k}"));
    }
    out.push('\n');
    for r in reports {
        let c = &r.config;
        let (ratio, color, location) = match c.render_spec.as_ref().filter(|_| c.mode.rendered()) {
            Some(s) => (
                format!("{:.2}", s.font_size_ratio),
                s.color.to_string(),
                s.location.to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let _ = write!(out, "{:<20} {ratio:>6} {color:>8} {location:>8}", c.mode.as_str());
        for k in &ks {
            match r.accuracy_at(*k) {
                Some(a) => {
                    let _ = write!(out, " {a:>7.4}");
                }
                None => {
                    let _ = write!(out, " {:>7}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
