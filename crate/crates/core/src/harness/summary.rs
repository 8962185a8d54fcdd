//! Run summaries: per-condition error statistics, marginal means, scalar
//! metrics, and the manifest that lets a log directory be summarised again.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ScenarioKind;
use super::reference;
use super::HarnessError;
use crate::control::{format_g9, TimeSeriesLog};
use crate::plant::STATE_UNCERTAINTY;

pub const PRNG_NAME: &str = "chacha8";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SAMPLES_HEADER: &str =
    "condition,repetition,inflation,load_n,volume_ml,bend_deg,pressure_kpa,extension_mm,f_est_n,f_true_n";

/// Error statistics of one (inflation, target) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub table: String,
    pub inflation: f64,
    /// Demand or applied load, N.
    pub target: f64,
    pub count: usize,
    /// Mean `|f − target|` over the whole record, N.
    pub mean_abs_error: f64,
    /// Sample standard deviation of `|f − target|` in the steady window, N.
    pub std_error: f64,
    /// Mean `|f − target|` in the steady window, N.
    pub steady_state_error: f64,
    pub settling_time_s: Option<f64>,
    pub reference: Option<f64>,
}

/// Count-weighted mean over a row, a column, or the whole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub table: String,
    pub inflation: Option<f64>,
    pub target: Option<f64>,
    pub count: usize,
    pub mean_abs_error: f64,
    pub steady_state_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub reference: Option<f64>,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: f64, reference: Option<f64>) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub prng: String,
    pub cells: Vec<CellSummary>,
    pub marginals: Vec<Marginal>,
    pub metrics: Vec<Metric>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SummaryFormat {
    #[default]
    Csv,
    Json,
}

impl RunSummary {
    pub fn cell(&self, table: &str, inflation: f64, target: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.table == table && (c.inflation - inflation).abs() < 1e-9 && (c.target - target).abs() < 1e-9)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn row_marginal(&self, table: &str, inflation: f64) -> Option<&Marginal> {
        self.marginals.iter().find(|m| {
            m.table == table && m.target.is_none() && m.inflation.is_some_and(|i| (i - inflation).abs() < 1e-9)
        })
    }

    pub fn column_marginal(&self, table: &str, target: f64) -> Option<&Marginal> {
        self.marginals.iter().find(|m| {
            m.table == table && m.inflation.is_none() && m.target.is_some_and(|t| (t - target).abs() < 1e-9)
        })
    }

    pub fn grand_marginal(&self, table: &str) -> Option<&Marginal> {
        self.marginals
            .iter()
            .find(|m| m.table == table && m.inflation.is_none() && m.target.is_none())
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_g9).unwrap_or_default();
        let mut out = format!(
            "# prng={} seed={} schema_version={} kind={}\n",
            self.prng, self.seed, self.schema_version, self.kind
        );
        out.push_str(
            "section,table,inflation,target,count,mean_abs_error,std_error,steady_state_error,settling_time_s,value,reference\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "cell,{},{},{},{},{},{},{},{},,{}\n",
                c.table,
                format_g9(c.inflation),
                format_g9(c.target),
                c.count,
                format_g9(c.mean_abs_error),
                format_g9(c.std_error),
                format_g9(c.steady_state_error),
                opt(c.settling_time_s),
                opt(c.reference),
            ));
        }
        for m in &self.marginals {
            out.push_str(&format!(
                "marginal,{},{},{},{},{},,{},,,\n",
                m.table,
                opt(m.inflation),
                opt(m.target),
                m.count,
                format_g9(m.mean_abs_error),
                format_g9(m.steady_state_error),
            ));
        }
        for m in &self.metrics {
            out.push_str(&format!(
                "metric,{},,,,,,,,{},{}\n",
                m.name,
                format_g9(m.value),
                opt(m.reference)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary is always serialisable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: SummaryFormat) -> String {
        match format {
            SummaryFormat::Csv => self.to_csv(),
            SummaryFormat::Json => self.to_json(),
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Row, column and grand count-weighted means of every table.
pub fn marginals(cells: &[CellSummary]) -> Vec<Marginal> {
    let mut tables: Vec<&str> = Vec::new();
    for c in cells {
        if !tables.contains(&c.table.as_str()) {
            tables.push(&c.table);
        }
    }
    let mut out = Vec::new();
    for table in tables {
        let in_table: Vec<&CellSummary> = cells.iter().filter(|c| c.table == table).collect();
        let aggregate = |sel: &dyn Fn(&CellSummary) -> bool, inflation, target| {
            let chosen: Vec<&&CellSummary> = in_table.iter().filter(|c| sel(c)).collect();
            let count: usize = chosen.iter().map(|c| c.count).sum();
            let w = |f: fn(&CellSummary) -> f64| {
                if count == 0 {
                    0.0
                } else {
                    chosen.iter().map(|c| f(c) * c.count as f64).sum::<f64>() / count as f64
                }
            };
            Marginal {
                table: table.to_string(),
                inflation,
                target,
                count,
                mean_abs_error: w(|c| c.mean_abs_error),
                steady_state_error: w(|c| c.steady_state_error),
            }
        };
        let mut rows: Vec<f64> = Vec::new();
        let mut cols: Vec<f64> = Vec::new();
        for c in &in_table {
            if !rows.iter().any(|r| (r - c.inflation).abs() < 1e-9) {
                rows.push(c.inflation);
            }
            if !cols.iter().any(|t| (t - c.target).abs() < 1e-9) {
                cols.push(c.target);
            }
        }
        rows.sort_by(f64::total_cmp);
        cols.sort_by(f64::total_cmp);
        for r in rows {
            out.push(aggregate(&|c| (c.inflation - r).abs() < 1e-9, Some(r), None));
        }
        for t in cols {
            out.push(aggregate(&|c| (c.target - t).abs() < 1e-9, None, Some(t)));
        }
        out.push(aggregate(&|_| true, None, None));
    }
    out
}

/// A constant-demand stretch of a closed-loop log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub table: String,
    /// Cartesian component compared against `target` (0, 1, 2).
    pub axis: usize,
    pub target: f64,
    pub repetition: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub index: usize,
    pub label: String,
    pub inflation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub prng: String,
    pub actuators: usize,
    pub conditions: Vec<ConditionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_band_n: Option<f64>,
    /// Results computed at run time (fits, calibration).
    #[serde(default)]
    pub metrics: Vec<Metric>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest is always serialisable");
        std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        if manifest.schema_version != super::config::SCHEMA_VERSION {
            return Err(HarnessError::Data(format!(
                "{}: unsupported schema_version {}",
                path.display(),
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }
}

/// One record of `samples.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub condition: usize,
    pub repetition: usize,
    pub inflation: f64,
    pub load_n: f64,
    pub volume_ml: f64,
    pub bend_deg: f64,
    pub pressure_kpa: f64,
    pub extension_mm: f64,
    pub f_est_n: f64,
    pub f_true_n: f64,
}

pub fn write_samples<W: Write>(mut w: W, rows: &[SampleRow]) -> std::io::Result<()> {
    writeln!(w, "{SAMPLES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.condition,
            r.repetition,
            format_g9(r.inflation),
            format_g9(r.load_n),
            format_g9(r.volume_ml),
            format_g9(r.bend_deg),
            format_g9(r.pressure_kpa),
            format_g9(r.extension_mm),
            format_g9(r.f_est_n),
            format_g9(r.f_true_n),
        )?;
    }
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |line: usize, msg: &str| HarnessError::Data(format!("{}:{line}: {msg}", path.display()));
    let mut lines = BufReader::new(file).lines();
    match lines.next().transpose().map_err(|e| HarnessError::io(path, e))? {
        Some(h) if h == SAMPLES_HEADER => {}
        Some(_) => return Err(bad(1, "unexpected header")),
        None => return Err(bad(1, "empty file")),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(bad(k + 2, "truncated row"));
        }
        let f = |i: usize| cols[i].parse::<f64>().map_err(|_| bad(k + 2, "malformed number"));
        let u = |i: usize| cols[i].parse::<usize>().map_err(|_| bad(k + 2, "malformed index"));
        rows.push(SampleRow {
            condition: u(0)?,
            repetition: u(1)?,
            inflation: f(2)?,
            load_n: f(3)?,
            volume_ml: f(4)?,
            bend_deg: f(5)?,
            pressure_kpa: f(6)?,
            extension_mm: f(7)?,
            f_est_n: f(8)?,
            f_true_n: f(9)?,
        });
    }
    if rows.is_empty() {
        return Err(bad(2, "no data rows"));
    }
    Ok(rows)
}

/// Orders floats by value for grouping keys.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn cell_reference(kind: ScenarioKind, table: &str, inflation: f64, target: f64) -> Option<f64> {
    match (kind, table) {
        (ScenarioKind::SfaSteps, _) => reference::sfa_reference(inflation, target),
        (ScenarioKind::SeeSteps, "fx") => reference::see_reference(0, inflation, target),
        (ScenarioKind::SeeSteps, "fy") => reference::see_reference(1, inflation, target),
        (ScenarioKind::SeeSteps, "fz") => reference::see_reference(2, inflation, target),
        _ => None,
    }
}

#[derive(Default)]
struct StepAccumulator {
    all: Vec<f64>,
    steady: Vec<f64>,
    settling: Vec<Option<f64>>,
}

fn step_cells(dir: &Path, manifest: &Manifest) -> Result<Vec<CellSummary>, HarnessError> {
    let fraction = manifest.steady_fraction.unwrap_or(0.2);
    let band = manifest.settle_band_n.unwrap_or(0.1);
    let mut groups: BTreeMap<(String, Key, Key), StepAccumulator> = BTreeMap::new();
    let mut order: Vec<(String, Key, Key)> = Vec::new();
    for cond in &manifest.conditions {
        let Some(log) = &cond.log else {
            return Err(HarnessError::Data(format!("condition {} has no log", cond.index)));
        };
        let path = dir.join(log);
        let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
        let rows = TimeSeriesLog::read_csv(BufReader::new(file))
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        let first: Vec<_> = rows.iter().filter(|r| r.act_index == 0).collect();
        for seg in &cond.segments {
            let eps = 1e-9;
            let in_seg: Vec<_> = first
                .iter()
                .filter(|r| r.t >= seg.start_s - eps && r.t < seg.end_s - eps)
                .collect();
            if in_seg.is_empty() {
                return Err(HarnessError::Data(format!(
                    "{}: no rows for segment starting at {} s; log truncated?",
                    path.display(),
                    seg.start_s
                )));
            }
            let steady_start = seg.end_s - fraction * (seg.end_s - seg.start_s);
            let errors: Vec<(f64, f64)> = in_seg
                .iter()
                .map(|r| (r.t, (r.cartesian_true()[seg.axis] - seg.target).abs()))
                .collect();
            let settling = match errors.iter().rposition(|&(_, e)| e > band) {
                None => Some(0.0),
                Some(i) if i + 1 < errors.len() => Some(errors[i + 1].0 - seg.start_s),
                Some(_) => None,
            };
            let key = (cond_table(seg), Key(cond.inflation), Key(seg.target));
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            let acc = groups.entry(key).or_default();
            acc.all.extend(errors.iter().map(|e| e.1));
            acc.steady
                .extend(errors.iter().filter(|e| e.0 >= steady_start - eps).map(|e| e.1));
            acc.settling.push(settling);
        }
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let acc = &groups[&key];
            let (table, inflation, target) = key;
            let (steady_state_error, std_error) = mean_std(&acc.steady);
            let settling_time_s = acc
                .settling
                .iter()
                .try_fold(0.0f64, |m, s| s.map(|v| m.max(v)));
            CellSummary {
                reference: cell_reference(manifest.kind, &table, inflation.0, target.0),
                table,
                inflation: inflation.0,
                target: target.0,
                count: acc.steady.len(),
                mean_abs_error: mean_std(&acc.all).0,
                std_error,
                steady_state_error,
                settling_time_s,
            }
        })
        .collect())
}

fn cond_table(seg: &SegmentRecord) -> String {
    seg.table.clone()
}

fn sample_cells(rows: &[SampleRow]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(Key, Key), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((Key(r.inflation), Key(r.load_n)))
            .or_default()
            .push((r.f_est_n - r.f_true_n).abs());
    }
    groups
        .into_iter()
        .map(|((inflation, load), errors)| {
            let (mean, std) = mean_std(&errors);
            CellSummary {
                table: "force".into(),
                inflation: inflation.0,
                target: load.0,
                count: errors.len(),
                mean_abs_error: mean,
                std_error: std,
                steady_state_error: mean,
                settling_time_s: None,
                reference: None,
            }
        })
        .collect()
}

fn repeatability_metrics(rows: &[SampleRow]) -> Vec<Metric> {
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry(Key(r.inflation)).or_default();
        g.0.push(r.extension_mm);
        g.1.push(r.pressure_kpa);
    }
    let mut metrics = Vec::new();
    let mut sigma_p = Vec::new();
    let mut sigma_x = Vec::new();
    for (level, (x, p)) in &groups {
        let reference = (0..8)
            .find(|&k| (k as f64 / 7.0 - level.0).abs() < 1e-9)
            .map(|k| STATE_UNCERTAINTY[k]);
        let pct = format_g9(level.0 * 100.0);
        let sx = mean_std(x).1;
        let sp = mean_std(p).1;
        sigma_x.push(sx);
        sigma_p.push(sp);
        metrics.push(Metric::new(format!("sigma_x_mm@{pct}%"), sx, reference.map(|r| r.0)));
        metrics.push(Metric::new(format!("sigma_p_kpa@{pct}%"), sp, reference.map(|r| r.1)));
    }
    metrics.push(Metric::new("mean_sigma_x_mm", mean_std(&sigma_x).0, Some(0.20)));
    metrics.push(Metric::new("mean_sigma_p_kpa", mean_std(&sigma_p).0, Some(2.95)));
    metrics
}

/// Builds the summary of a finished run from its log directory.
pub fn summarize(dir: &Path) -> Result<RunSummary, HarnessError> {
    let manifest = Manifest::read(dir)?;
    let mut metrics = Vec::new();
    let cells = match manifest.kind {
        ScenarioKind::SfaSteps | ScenarioKind::SeeSteps => step_cells(dir, &manifest)?,
        ScenarioKind::StaticSensing | ScenarioKind::QuasistaticValidation => {
            let rows = read_samples(&dir.join(manifest.samples.as_deref().unwrap_or(SAMPLES_FILE)))?;
            let errors: Vec<f64> = rows.iter().map(|r| (r.f_est_n - r.f_true_n).abs()).collect();
            let (mean, std) = mean_std(&errors);
            let quasi = manifest.kind == ScenarioKind::QuasistaticValidation;
            metrics.push(Metric::new(
                "mean_abs_error",
                mean,
                quasi.then_some(reference::QUASISTATIC_MEAN_ERROR),
            ));
            metrics.push(Metric::new(
                "abs_error_std",
                std,
                quasi.then_some(reference::QUASISTATIC_ERROR_SPREAD),
            ));
            sample_cells(&rows)
        }
        ScenarioKind::Repeatability => {
            let rows = read_samples(&dir.join(manifest.samples.as_deref().unwrap_or(SAMPLES_FILE)))?;
            metrics.extend(repeatability_metrics(&rows));
            Vec::new()
        }
        ScenarioKind::TransmissionSweep | ScenarioKind::DampingId => Vec::new(),
    };
    metrics.extend(manifest.metrics.iter().cloned());
    Ok(RunSummary {
        schema_version: manifest.schema_version,
        kind: manifest.kind,
        seed: manifest.seed,
        prng: manifest.prng.clone(),
        marginals: marginals(&cells),
        cells,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Tick, TimeSeriesLog};
    use crate::types::ActuatorVector;
    use nalgebra::Vector3;

    fn synthetic_log(dir: &Path, offsets: &dyn Fn(f64, f64) -> f64) -> Manifest {
        let inflations = [0.5, 0.6, 0.7, 0.8];
        let demands = [0.0, 2.0, 4.0, 6.0];
        let mut conditions = Vec::new();
        std::fs::create_dir_all(dir.join("logs")).unwrap();
        for (ci, &inf) in inflations.iter().enumerate() {
            let mut log = TimeSeriesLog::default();
            let mut segments = Vec::new();
            for (si, &d) in demands.iter().enumerate() {
                let start = si as f64 * 2.0;
                for k in 0..500 {
                    let t = start + k as f64 * 0.004;
                    let f = d + offsets(inf, d);
                    let v = ActuatorVector::from_slice(&[f]);
                    log.ticks.push(Tick {
                        t,
                        volume: v.clone(),
                        flow_command: v.clone(),
                        pressure_raw: v.clone(),
                        pressure_filtered: v.clone(),
                        force_estimate: v.clone(),
                        force_true: v,
                        cartesian_estimate: Vector3::new(0.0, 0.0, f),
                        cartesian_true: Vector3::new(0.0, 0.0, f),
                    });
                }
                segments.push(SegmentRecord {
                    table: "force".into(),
                    axis: 2,
                    target: d,
                    repetition: 0,
                    start_s: start,
                    end_s: start + 2.0,
                });
            }
            let name = format!("logs/c{ci}.csv");
            log.write_csv(File::create(dir.join(&name)).unwrap()).unwrap();
            conditions.push(ConditionRecord {
                index: ci,
                label: format!("{inf}"),
                inflation: inf,
                log: Some(name),
                segments,
            });
        }
        let m = Manifest {
            schema_version: 1,
            kind: ScenarioKind::SfaSteps,
            seed: 3,
            prng: PRNG_NAME.into(),
            actuators: 1,
            conditions,
            samples: None,
            steady_fraction: Some(0.2),
            settle_band_n: Some(0.1),
            metrics: Vec::new(),
        };
        m.write(dir).unwrap();
        m
    }

    #[test]
    fn exact_tracking_gives_zero_cells() {
        let dir = tempfile::tempdir().unwrap();
        synthetic_log(dir.path(), &|_, _| 0.0);
        let s = summarize(dir.path()).unwrap();
        assert_eq!(s.cells.len(), 16);
        for c in &s.cells {
            assert_eq!(c.steady_state_error, 0.0);
            assert_eq!(c.settling_time_s, Some(0.0));
            assert_eq!(c.count, 100);
        }
        assert!(s.cells.iter().all(|c| c.reference.is_some()));
    }

    #[test]
    fn constant_offset_shows_in_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        synthetic_log(dir.path(), &|_, _| 0.5);
        let s = summarize(dir.path()).unwrap();
        for c in &s.cells {
            assert!((c.steady_state_error - 0.5).abs() < 1e-12);
            assert_eq!(c.settling_time_s, None);
        }
    }

    #[test]
    fn marginals_match_hand_computed_means() {
        let dir = tempfile::tempdir().unwrap();
        // offset = 0.1·row + 0.01·col
        let offset = |inf: f64, d: f64| ((inf - 0.5) * 10.0).round() * 0.1 + d / 2.0 * 0.01;
        synthetic_log(dir.path(), &offset);
        let s = summarize(dir.path()).unwrap();
        let col_mean = (0.0 + 0.01 + 0.02 + 0.03) / 4.0;
        let row_mean = (0.0 + 0.1 + 0.2 + 0.3) / 4.0;
        for (i, inf) in [0.5, 0.6, 0.7, 0.8].into_iter().enumerate() {
            let m = s.row_marginal("force", inf).unwrap();
            assert!((m.steady_state_error - (0.1 * i as f64 + col_mean)).abs() < 1e-9);
        }
        for (j, d) in [0.0, 2.0, 4.0, 6.0].into_iter().enumerate() {
            let m = s.column_marginal("force", d).unwrap();
            assert!((m.steady_state_error - (row_mean + 0.01 * j as f64)).abs() < 1e-9);
        }
        let g = s.grand_marginal("force").unwrap();
        let cell_mean = s.cells.iter().map(|c| c.steady_state_error).sum::<f64>() / 16.0;
        assert!((g.steady_state_error - cell_mean).abs() < 1e-12);
    }

    #[test]
    fn truncated_logs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        synthetic_log(dir.path(), &|_, _| 0.0);
        let path = dir.path().join("logs/c2.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 3 - 7]).unwrap();
        assert!(matches!(summarize(dir.path()), Err(HarnessError::Data(_))));
        std::fs::write(&path, "").unwrap();
        assert!(summarize(dir.path()).is_err());
    }

    #[test]
    fn csv_has_header_and_sections() {
        let dir = tempfile::tempdir().unwrap();
        synthetic_log(dir.path(), &|_, _| 0.25);
        let csv = summarize(dir.path()).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# prng=chacha8 seed=3 schema_version=1 kind=sfa_steps");
        assert!(lines.next().unwrap().starts_with("section,table"));
        assert_eq!(csv.lines().filter(|l| l.starts_with("cell,")).count(), 16);
        assert_eq!(csv.lines().filter(|l| l.starts_with("marginal,")).count(), 9);
        let json = summarize(dir.path()).unwrap().to_json();
        let back: RunSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.cells.len(), 16);
    }

    proptest::proptest! {
        #[test]
        fn equal_counts_give_plain_means(
            values in proptest::collection::vec(0.0..2.0f64, 12),
            count in 1usize..500,
        ) {
            let cells: Vec<CellSummary> = values
                .iter()
                .enumerate()
                .map(|(k, &v)| CellSummary {
                    table: "t".into(),
                    inflation: (k / 4) as f64,
                    target: (k % 4) as f64,
                    count,
                    mean_abs_error: v,
                    std_error: 0.0,
                    steady_state_error: v,
                    settling_time_s: None,
                    reference: None,
                })
                .collect();
            let m = marginals(&cells);
            let grand = m.iter().find(|m| m.inflation.is_none() && m.target.is_none()).unwrap();
            let plain = values.iter().sum::<f64>() / 12.0;
            proptest::prop_assert!((grand.steady_state_error - plain).abs() < 1e-12);
            for r in 0..3 {
                let row = m.iter().find(|m| m.inflation == Some(r as f64)).unwrap();
                let plain = values[4 * r..4 * r + 4].iter().sum::<f64>() / 4.0;
                proptest::prop_assert!((row.steady_state_error - plain).abs() < 1e-12);
            }
            for c in 0..4 {
                let col = m.iter().find(|m| m.target == Some(c as f64)).unwrap();
                let plain = (0..3).map(|r| values[4 * r + c]).sum::<f64>() / 3.0;
                proptest::prop_assert!((col.steady_state_error - plain).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_statistics() {
        let rows: Vec<SampleRow> = (0..40)
            .map(|i| SampleRow {
                condition: 0,
                repetition: i,
                inflation: if i % 2 == 0 { 0.5 } else { 1.0 },
                load_n: 2.0,
                volume_ml: 0.0,
                bend_deg: 0.0,
                pressure_kpa: if i % 4 < 2 { 1.0 } else { -1.0 },
                extension_mm: 0.0,
                f_est_n: 2.0 + if i % 2 == 0 { 0.1 } else { 0.3 },
                f_true_n: 2.0,
            })
            .collect();
        let cells = sample_cells(&rows);
        assert_eq!(cells.len(), 2);
        assert!((cells[0].mean_abs_error - 0.1).abs() < 1e-12);
        assert!((cells[1].mean_abs_error - 0.3).abs() < 1e-12);
        let m = repeatability_metrics(&rows);
        let p = m.iter().find(|m| m.name == "sigma_p_kpa@50%").unwrap();
        assert!((p.value - (20.0f64 / 19.0).sqrt()).abs() < 1e-12);
        let mut buf = Vec::new();
        write_samples(&mut buf, &rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, &buf).unwrap();
        assert_eq!(read_samples(&path).unwrap(), rows);
    }
}
