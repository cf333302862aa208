use std::fmt::Write;

use serde::Serialize;

use super::format::format_cell;
use super::manifest::NetworkType;
use crate::network::Attribute;
use crate::terms::{Preset, TermKind};

/// Row group as printed in the first table column.
pub fn group_label(preset: Preset, term: TermKind) -> &'static str {
    use Attribute::*;
    match preset {
        Preset::H1 => "H1",
        Preset::H2 => "H2",
        Preset::Custom => "Custom",
        Preset::Rq1 | Preset::Rq2 => match term {
            TermKind::Edges | TermKind::Mutual => "--",
            TermKind::NodeOCov(Skills) | TermKind::NodeICov(Skills) => "RQ1a",
            TermKind::NodeOCov(PerceivedSkills) | TermKind::NodeICov(PerceivedSkills) => "RQ1b",
            TermKind::AbsDiff(Skills) => "RQ1c",
            TermKind::NodeOCov(Female) => "RQ2",
            _ => "--",
        },
    }
}

fn section_title(preset: Preset) -> &'static str {
    match preset {
        Preset::Rq1 | Preset::Rq2 => "Research Questions",
        Preset::H1 | Preset::H2 => "Hypotheses",
        Preset::Custom => "Custom Models",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: Preset,
    pub group: String,
    pub parameter: String,
    /// Formatted `estimate [lower, upper]` per network type; `None` when that
    /// type was not run.
    pub seeking: Option<String>,
    pub giving: Option<String>,
}

impl ReportRow {
    pub fn new(model: Preset, term: TermKind) -> Self {
        Self {
            model,
            group: group_label(model, term).to_string(),
            parameter: term.label(),
            seeking: None,
            giving: None,
        }
    }

    pub fn set(&mut self, network_type: NetworkType, mean: f64, lower: f64, upper: f64) {
        let cell = Some(format_cell(mean, lower, upper));
        match network_type {
            NetworkType::Seeking => self.seeking = cell,
            NetworkType::Giving => self.giving = cell,
        }
    }
}

/// Pooled estimates juxtaposed by network type.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn render(&self) -> String {
        const DASH: &str = "--";
        let headers = ["Group", "Parameter", NetworkType::Seeking.title(), NetworkType::Giving.title()];
        let cells: Vec<[&str; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.group.as_str(),
                    r.parameter.as_str(),
                    r.seeking.as_deref().unwrap_or(DASH),
                    r.giving.as_deref().unwrap_or(DASH),
                ]
            })
            .collect();
        let mut widths = headers.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[&str; 4]| -> String {
            let mut s = String::new();
            for (k, (c, w)) in row.iter().zip(widths).enumerate() {
                if k == 3 {
                    s.push_str(c);
                } else {
                    let _ = write!(s, "{c:<w$}  ");
                }
            }
            s.trim_end().to_string()
        };
        let total: usize = widths.iter().sum::<usize>() + 6;
        let mut out = String::new();
        out.push_str("ERGM estimates for advice seeking and giving networks\n");
        out.push_str("Posterior means of the pooled effects; 95% credible intervals in brackets.\n");
        out.push_str(&"=".repeat(total));
        out.push('\n');
        out.push_str(&line(&headers));
        out.push('\n');
        out.push_str(&"-".repeat(total));
        out.push('\n');
        let mut section = None;
        let mut previous_model: Option<Preset> = None;
        for (row, c) in self.rows.iter().zip(&cells) {
            let title = section_title(row.model);
            if section != Some(title) {
                if section.is_some() {
                    out.push('\n');
                }
                out.push_str(title);
                out.push('\n');
                section = Some(title);
            } else if previous_model.is_some_and(|m| m != row.model) {
                out.push('\n');
            }
            previous_model = Some(row.model);
            out.push_str(&line(c));
            out.push('\n');
        }
        out.push_str(&"=".repeat(total));
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::ModelSpec;

    #[test]
    fn group_labels_follow_the_research_questions() {
        let labels: Vec<_> = ModelSpec::preset(Preset::Rq2).terms().iter().map(|&t| group_label(Preset::Rq2, t)).collect();
        assert_eq!(labels, ["--", "--", "RQ1a", "RQ1a", "RQ1b", "RQ1b", "RQ1c", "RQ2"]);
        assert_eq!(group_label(Preset::H1, TermKind::Edges), "H1");
    }

    #[test]
    fn renders_aligned_columns() {
        let mut table = ReportTable::default();
        for term in ModelSpec::preset(Preset::H2).terms() {
            let mut row = ReportRow::new(Preset::H2, *term);
            row.set(NetworkType::Seeking, 1.05, 0.983, 1.11);
            table.rows.push(row);
        }
        let text = table.render();
        assert!(text.contains("Same-gender preference (homophily)"));
        assert!(text.contains("1.05 [0.983, 1.11]"));
        let row = text.lines().find(|l| l.starts_with("H2") && l.contains("Density")).unwrap();
        assert!(row.trim_end().ends_with("--"));
        assert!(text.contains("Hypotheses"));
    }
}
