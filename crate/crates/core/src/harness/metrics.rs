use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_VERSION: u32 = 1;

/// One logging event.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    /// Mean batch risk over the iterations since the previous row.
    pub train_batch_mean_risk: f64,
    pub val_mean: f64,
    /// Aligned with the configured α levels.
    pub val_cvar: Vec<f64>,
    /// Window mean of per-iteration selection-time PCCs (MPTS only).
    pub pcc: Option<f64>,
    /// Between this evaluation pass and the previous one.
    pub rank_preservation_rate: Option<f64>,
    /// Window mean of the selected candidates' scores (DRM, MPTS).
    pub selected_score_mean: Option<f64>,
    /// Window mean of the largest batch weight.
    pub max_weight: f64,
}

pub fn alpha_column(alpha: f64) -> String {
    format!("val_cvar_{alpha}")
}

pub fn metrics_columns(alphas: &[f64]) -> Vec<String> {
    let mut cols = vec![
        "iteration".to_string(),
        "train_batch_mean_risk".into(),
        "val_mean".into(),
    ];
    cols.extend(alphas.iter().map(|&a| alpha_column(a)));
    cols.extend(
        ["pcc", "rank_preservation_rate", "selected_score_mean", "max_weight"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    fn cells(&self) -> Vec<String> {
        let mut out = vec![
            self.iteration.to_string(),
            self.train_batch_mean_risk.to_string(),
            self.val_mean.to_string(),
        ];
        out.extend(self.val_cvar.iter().map(|v| v.to_string()));
        out.push(cell(self.pcc));
        out.push(cell(self.rank_preservation_rate));
        out.push(cell(self.selected_score_mean));
        out.push(self.max_weight.to_string());
        out
    }
}

fn header_lines(kind: &str, config_hash: &str) -> String {
    format!("# mpts {kind} v{METRICS_VERSION}\n# config_sha256 {config_hash}\n")
}

fn render(preamble: String, columns: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(|e| Error::Parse(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(preamble + &String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?)
}

pub fn render_metrics(config_hash: &str, alphas: &[f64], rows: &[MetricsRow]) -> Result<String> {
    render(
        header_lines("metrics", config_hash),
        &metrics_columns(alphas),
        rows.iter().map(MetricsRow::cells),
    )
}

/// Wall-clock sidecar: cumulative training seconds at each logging event.
pub fn render_timing(config_hash: &str, timing: &[(usize, f64)]) -> Result<String> {
    render(
        header_lines("timing", config_hash),
        &["iteration".to_string(), "wall_clock_seconds".to_string()],
        timing.iter().map(|(i, s)| vec![i.to_string(), s.to_string()]),
    )
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// A parsed metrics or timing file.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub config_hash: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let config_hash = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# config_sha256 ").map(|h| h.trim().to_string()));
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let row = rec
                .iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|e| Error::Parse(format!("`{c}`: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self {
            config_hash,
            columns,
            rows,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.get(i).copied().flatten()).collect())
    }

    pub fn last(&self, name: &str) -> Result<Option<f64>> {
        Ok(self.column(name)?.last().copied().flatten())
    }
}
