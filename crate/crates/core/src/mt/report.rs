//! Campaign records, aggregation and serialization.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{spearman, StatsError};
use super::MtError;
use crate::geometry::TauKind;
use crate::sutmetrics::MetricKind;

pub const IMAGE_METRICS: [&str; 3] = ["psnr", "ssim", "lpips"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Transform,
    Mutation,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Transform => "transform",
            Arm::Mutation => "mutation",
        }
    }
}

/// One SUT comparison. `metric`/`raw`/`deviation` are absent for failed or
/// skipped comparisons; `inc` maps ε labels to `deviation > ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncRecord {
    pub frame: String,
    pub sut: String,
    pub arm: Arm,
    pub case: String,
    pub metric: Option<MetricKind>,
    pub raw: Option<f64>,
    pub deviation: Option<f64>,
    pub inc: BTreeMap<String, bool>,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Image quality of a rendered view against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub frame: String,
    pub case: String,
    /// "real" for τ0 (dataset camera), "raytrace" for transformed poses.
    pub reference: String,
    /// `None` with `psnr_infinite` set when the images are identical.
    pub psnr: Option<f64>,
    pub psnr_infinite: bool,
    pub ssim: Option<f64>,
    pub lpips: Option<f64>,
    pub lpips_available: bool,
}

impl QualityRow {
    fn value(&self, metric: &str) -> Option<f64> {
        match metric {
            "psnr" if self.psnr_infinite => Some(f64::INFINITY),
            "psnr" => self.psnr,
            "ssim" => self.ssim,
            "lpips" => self.lpips,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub sut: String,
    pub arm: Arm,
    pub case: String,
    pub metric: MetricKind,
    /// Records that produced a value.
    pub evaluated: usize,
    /// Inconsistency count per ε label.
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub sut: String,
    pub metric: MetricKind,
    pub image_metric: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub epsilons: Vec<f64>,
    pub frames: Vec<String>,
    pub records: Vec<IncRecord>,
    pub counts: Vec<CountRow>,
    pub quality: Vec<QualityRow>,
    pub correlations: Vec<CorrelationEntry>,
    pub failures: usize,
}

/// "0.1" → "0.1"; keeps ε labels stable in JSON keys.
pub fn eps_label(eps: f64) -> String {
    format!("{eps}")
}

fn csv_column(eps: f64) -> String {
    format!("inc_{}", eps_label(eps).replace('.', ""))
}

/// Aggregate records into per-(sut, arm, case, metric) counts. Failed and
/// skipped records contribute nothing.
pub fn count_inconsistencies(records: &[IncRecord], epsilons: &[f64]) -> Vec<CountRow> {
    let mut map: BTreeMap<(String, Arm, String, MetricKind), CountRow> = BTreeMap::new();
    for r in records {
        let (Some(metric), Some(_)) = (r.metric, r.deviation) else { continue };
        let row = map.entry((r.sut.clone(), r.arm, r.case.clone(), metric)).or_insert_with(|| CountRow {
            sut: r.sut.clone(),
            arm: r.arm,
            case: r.case.clone(),
            metric,
            evaluated: 0,
            counts: epsilons.iter().map(|e| (eps_label(*e), 0)).collect(),
        });
        row.evaluated += 1;
        for (label, flag) in &r.inc {
            if *flag {
                *row.counts.entry(label.clone()).or_insert(0) += 1;
            }
        }
    }
    map.into_values().collect()
}

/// Rank-correlate each SUT metric's τ0 raw values with each image-quality
/// metric over the same frames.
pub fn correlation_table(records: &[IncRecord], quality: &[QualityRow]) -> Result<Vec<CorrelationEntry>, MtError> {
    let tau0 = TauKind::Tau0.id();
    let q_by_frame: BTreeMap<&str, &QualityRow> =
        quality.iter().filter(|q| q.case == tau0).map(|q| (q.frame.as_str(), q)).collect();
    if q_by_frame.is_empty() {
        return Err(MtError::InsufficientData("no τ0 image-quality rows".into()));
    }
    let mut series: BTreeMap<(String, MetricKind), Vec<(&str, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.arm == Arm::Transform && r.case == tau0) {
        if let (Some(m), Some(raw)) = (r.metric, r.raw) {
            series.entry((r.sut.clone(), m)).or_default().push((r.frame.as_str(), raw));
        }
    }
    let mut out = Vec::new();
    for ((sut, metric), vals) in series {
        for im in IMAGE_METRICS {
            let pairs: Vec<(f64, f64)> = vals
                .iter()
                .filter_map(|(f, v)| q_by_frame.get(f).and_then(|q| q.value(im)).map(|qv| (*v, qv)))
                .collect();
            let mut entry = CorrelationEntry {
                sut: sut.clone(),
                metric,
                image_metric: im.to_string(),
                n: pairs.len(),
                rho: None,
                p: None,
                significant: false,
                note: None,
            };
            if im == "lpips" && pairs.is_empty() {
                entry.note = Some("unavailable".into());
            } else {
                let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                match spearman(&x, &y) {
                    Ok((rho, p)) => {
                        entry.rho = Some(rho);
                        entry.p = Some(p);
                        entry.significant = p <= 0.05;
                    }
                    Err(StatsError::ConstantInput) => entry.note = Some("constant input".into()),
                    Err(e) => entry.note = Some(e.to_string()),
                }
            }
            out.push(entry);
        }
    }
    Ok(out)
}

/// Aligned plain-text table of inconsistency counts.
pub fn summary_table(report: &CampaignReport) -> String {
    let mut rows: Vec<Vec<String>> = vec![["sut", "arm", "case", "metric", "n"]
        .iter()
        .map(|s| s.to_string())
        .chain(report.epsilons.iter().map(|e| format!("eps={}", eps_label(*e))))
        .collect()];
    for c in &report.counts {
        let mut r = vec![c.sut.clone(), c.arm.as_str().into(), c.case.clone(), c.metric.id().into(), c.evaluated.to_string()];
        r.extend(report.epsilons.iter().map(|e| c.counts.get(&eps_label(*e)).copied().unwrap_or(0).to_string()));
        rows.push(r);
    }
    let ncol = rows[0].len();
    let widths: Vec<usize> = (0..ncol).map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        s.push_str(line.join("  ").trim_end());
        s.push('\n');
    }
    s.push_str(&format!("failed records: {}\n", report.failures));
    s
}

impl CampaignReport {
    /// JSON with keys in sorted order.
    pub fn to_canonical_json(&self) -> Result<String, MtError> {
        let v = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    pub fn to_csv(&self) -> Result<String, MtError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> =
            ["frame", "sut", "arm", "tau_or_mutation", "metric", "raw", "deviation"].iter().map(|s| s.to_string()).collect();
        header.extend(self.epsilons.iter().map(|e| csv_column(*e)));
        header.push("failed".into());
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.frame.clone(),
                r.sut.clone(),
                r.arm.as_str().to_string(),
                r.case.clone(),
                r.metric.map(|m| m.id().to_string()).unwrap_or_default(),
                opt(r.raw),
                opt(r.deviation),
            ];
            row.extend(
                self.epsilons.iter().map(|e| r.inc.get(&eps_label(*e)).map(|b| (*b as u8).to_string()).unwrap_or_default()),
            );
            row.push((r.failed as u8).to_string());
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| MtError::Io { path: "<csv>".into(), source: e.into_error() })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), MtError> {
    let io = |source| MtError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Write `report.json`, `records.csv` and `summary.txt` into `dir`.
pub fn write_report(report: &CampaignReport, dir: &Path) -> Result<(), MtError> {
    std::fs::create_dir_all(dir).map_err(|source| MtError::Io { path: dir.display().to_string(), source })?;
    write_atomic(&dir.join("report.json"), &report.to_canonical_json()?)?;
    write_atomic(&dir.join("records.csv"), &report.to_csv()?)?;
    write_atomic(&dir.join("summary.txt"), &summary_table(report))
}
