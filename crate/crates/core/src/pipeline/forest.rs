use std::fmt::Write;

use serde::Serialize;

use super::format::format_sig3;
use super::manifest::NetworkType;
use super::run::PooledFile;
use crate::error::{Error, Result};
use crate::terms::Preset;

pub const FOREST_HEADER: &str = "network_type,model,term,label,mean,ci_lower,ci_upper";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForestRow {
    pub network_type: NetworkType,
    pub model: Preset,
    pub term: String,
    pub label: String,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// One row per pooled term and network type; rejects malformed intervals.
pub fn forest_rows(pooled: &PooledFile) -> Result<Vec<ForestRow>> {
    pooled
        .terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let bad = |msg: String| Error::Validation { file: "pooled.json".into(), line: k as u64 + 1, msg };
            if ![t.mean, t.ci_lower, t.ci_upper].iter().all(|v| v.is_finite()) {
                return Err(bad(format!("non-finite summary for `{}`", t.term)));
            }
            if t.ci_lower > t.ci_upper {
                return Err(bad(format!("interval bounds out of order for `{}`: [{}, {}]", t.term, t.ci_lower, t.ci_upper)));
            }
            Ok(ForestRow {
                network_type: t.network_type,
                model: t.model,
                term: t.term.clone(),
                label: t.label.clone(),
                mean: t.mean,
                ci_lower: t.ci_lower,
                ci_upper: t.ci_upper,
            })
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub(super) fn render_csv(rows: &[ForestRow]) -> String {
    let mut out = String::from(FOREST_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.network_type,
            r.model,
            csv_field(&r.term),
            csv_field(&r.label),
            r.mean,
            r.ci_lower,
            r.ci_upper
        );
    }
    out
}

/// Minimal standalone SVG: one labeled interval per row on a shared axis.
pub fn render_svg(rows: &[ForestRow]) -> String {
    const LABEL_W: f64 = 420.0;
    const PLOT_W: f64 = 360.0;
    const ROW_H: f64 = 22.0;
    const TOP: f64 = 30.0;
    let height = TOP + ROW_H * rows.len() as f64 + 40.0;
    let width = LABEL_W + PLOT_W + 40.0;
    let (mut lo, mut hi) = rows.iter().fold((0.0_f64, 0.0_f64), |(l, h), r| (l.min(r.ci_lower), h.max(r.ci_upper)));
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |v: f64| LABEL_W + (v - lo) / (hi - lo) * PLOT_W;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="10" y="18" font-weight="bold">Pooled posterior estimates (95% credible intervals)</text>"#);
    let bottom = TOP + ROW_H * rows.len() as f64;
    let _ = writeln!(
        s,
        r##"<line x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{bottom:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        x(0.0)
    );
    for (k, r) in rows.iter().enumerate() {
        let y = TOP + ROW_H * (k as f64 + 0.5);
        let label = format!("{} | {} | {}", r.network_type.title(), r.model, r.label);
        let _ = writeln!(s, r#"<text x="10" y="{:.2}">{}</text>"#, y + 4.0, xml_escape(&label));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="1.5"/>"#,
            x(r.ci_lower),
            x(r.ci_upper)
        );
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="3.5" fill="black"/>"#, x(r.mean));
    }
    let _ = writeln!(s, r#"<line x1="{LABEL_W:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#, LABEL_W + PLOT_W);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x(v),
            bottom + 16.0,
            format_sig3(v)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Parses pooled JSON and returns the forest CSV and SVG texts.
pub fn render_forest(pooled_json: &str) -> Result<(String, String)> {
    let pooled: PooledFile = serde_json::from_str(pooled_json)?;
    let rows = forest_rows(&pooled)?;
    Ok((render_csv(&rows), render_svg(&rows)))
}
