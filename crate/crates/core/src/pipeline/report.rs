//! Rendering of evaluation reports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalReport, PipelineConfig};
use crate::metrics::fmt2;

/// What is needed to rerun a report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub config: PipelineConfig,
    pub segmenter: Option<String>,
    pub normalizer: Option<String>,
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "setup_id",
    "cer",
    "wer",
    "htr_cer",
    "config_hash",
    "segmenter",
    "normalizer",
    "noise_seed",
];

/// A report row as it appears in rendered output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub setup_id: String,
    pub cer: String,
    pub wer: String,
    pub htr_cer: String,
    pub config_hash: String,
    pub segmenter: String,
    pub normalizer: String,
    pub noise_seed: String,
}

impl SummaryRow {
    fn cells(&self) -> [&str; 8] {
        [
            &self.setup_id,
            &self.cer,
            &self.wer,
            &self.htr_cer,
            &self.config_hash,
            &self.segmenter,
            &self.normalizer,
            &self.noise_seed,
        ]
    }
}

fn short(fp: &Option<String>) -> String {
    fp.as_deref()
        .map(|s| s[..s.len().min(12)].to_string())
        .unwrap_or_else(|| "-".into())
}

pub fn summary_rows(report: &EvalReport) -> Vec<SummaryRow> {
    report
        .rows
        .iter()
        .map(|r| SummaryRow {
            setup_id: r.setup_id.clone(),
            cer: fmt2(r.cer),
            wer: fmt2(r.wer),
            htr_cer: r.htr_cer.map(fmt2).unwrap_or_else(|| "-".into()),
            config_hash: r.provenance.config_hash.clone(),
            segmenter: short(&r.provenance.segmenter),
            normalizer: short(&r.provenance.normalizer),
            noise_seed: r
                .provenance
                .noise_seed
                .map(|s| s.to_string())
                .unwrap_or_else(|| "-".into()),
        })
        .collect()
}

/// Renders `report` with metrics to two decimals. An empty report renders the header only.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    let rows = summary_rows(report);
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for r in &rows {
                w.write_record(r.cells()).expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", CSV_HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(CSV_HEADER.len()));
            for r in &rows {
                let _ = writeln!(out, "| {} |", r.cells().join(" | "));
            }
        }
        ReportFormat::Text => {
            let mut widths = CSV_HEADER.map(str::len);
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r.cells()) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let mut line = |cells: [&str; 8]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            };
            line(CSV_HEADER);
            for r in &rows {
                line(r.cells());
            }
        }
    }
    out
}

/// Reads back the CSV rendering.
pub fn parse_report_csv(text: &str) -> Result<Vec<SummaryRow>, csv::Error> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or_default().to_string();
        rows.push(SummaryRow {
            setup_id: get(0),
            cer: get(1),
            wer: get(2),
            htr_cer: get(3),
            config_hash: get(4),
            segmenter: get(5),
            normalizer: get(6),
            noise_seed: get(7),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VariantKind;
    use crate::pipeline::ReportRow;

    fn report() -> EvalReport {
        let cfg = PipelineConfig::identity("1, quoted", VariantKind::Exp1);
        EvalReport {
            rows: vec![ReportRow {
                setup_id: cfg.setup_id.clone(),
                cer: 0.12345,
                wer: 1.0,
                htr_cer: None,
                lines: 3,
                provenance: Provenance {
                    config_hash: cfg.hash(),
                    config: cfg,
                    segmenter: None,
                    normalizer: Some("abcdef0123456789".into()),
                    noise_seed: Some(7),
                },
            }],
            gold_fingerprint: String::new(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let text = render_report(&report(), ReportFormat::Csv);
        let rows = parse_report_csv(&text).unwrap();
        assert_eq!(rows, summary_rows(&report()));
        assert_eq!(rows[0].cer, "0.12");
        assert_eq!(rows[0].normalizer, "abcdef012345");
    }

    #[test]
    fn empty_report_is_header_only() {
        let empty = EvalReport::default();
        for f in [ReportFormat::Csv, ReportFormat::Text] {
            assert_eq!(render_report(&empty, f).lines().count(), 1);
        }
        assert_eq!(
            render_report(&empty, ReportFormat::Markdown)
                .lines()
                .count(),
            2
        );
    }

    #[test]
    fn format_names() {
        assert_eq!(
            "MD".parse::<ReportFormat>().unwrap(),
            ReportFormat::Markdown
        );
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
