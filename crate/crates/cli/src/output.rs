//! Artifact writers. A single collector writes every file, ordered by
//! replica index then step, so repeated runs are byte-identical.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliResult;

/// One line of `series.ndjson`. Absent statistics are omitted from the
/// record entirely, keeping the format stable across experiments.
#[derive(Debug, Clone, Serialize, Default)]
pub struct SeriesRecord {
    pub replica: u32,
    pub step: u64,
    pub total_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupied: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin_positive: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
}

/// Replica summary table written as `summary.csv`.
#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl SummaryTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        SummaryTable { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Collected outputs of one experiment, written together at the end.
#[derive(Debug, Default)]
pub struct ArtifactSet {
    pub summary: Option<SummaryTable>,
    pub series: Vec<SeriesRecord>,
    /// (file name, contents) for extra text artifacts (snapshots, tables).
    pub extra: Vec<(String, String)>,
}

impl ArtifactSet {
    /// Write everything under `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if let Some(summary) = &self.summary {
            let path = dir.join("summary.csv");
            std::fs::write(&path, summary.render())?;
            written.push(path);
        }
        if !self.series.is_empty() {
            let path = dir.join("series.ndjson");
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            for record in &self.series {
                serde_json::to_writer(&mut file, record)?;
                file.write_all(b"\n")?;
            }
            file.flush()?;
            written.push(path);
        }
        for (name, contents) in &self.extra {
            let path = dir.join(name);
            std::fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn fmt_bool(b: bool) -> String {
    if b { "true".into() } else { "false".into() }
}

pub fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_renders_csv() {
        let mut t = SummaryTable::new(vec!["replica", "alive"]);
        t.push(vec!["0".into(), "true".into()]);
        t.push(vec!["1".into(), "false".into()]);
        assert_eq!(t.render(), "replica,alive\n0,true\n1,false\n");
    }

    #[test]
    fn series_record_omits_absent_fields() {
        let r = SeriesRecord { replica: 1, step: 2, total_mass: 3.5, ..Default::default() };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"replica":1,"step":2,"total_mass":3.5}"#);
    }
}
