use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{ReferenceRisk, RepetitionRecord, RunMeta};
use crate::error::{Error, Result};
use crate::metrics::{anchored_reference, confidence_interval, fit_rate, phi_rate, RateCurvePoint};

pub(crate) const BSPLINE_NOTE: &str =
    "table.csv: the bspline column is left blank; the B-spline plug-in baseline is not implemented";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PlugIn,
    Bayes,
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PlugIn => "plug_in",
            Method::Bayes => "bayes",
            Method::Direct => "direct",
        }
    }
}

/// Mean with a 95% Student-t interval; the bounds are NaN below two repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n: usize,
}

impl Summary {
    fn of(values: &[f64]) -> Result<Summary> {
        match values.len() {
            0 => Ok(Summary {
                mean: f64::NAN,
                ci_lower: f64::NAN,
                ci_upper: f64::NAN,
                n: 0,
            }),
            1 => Ok(Summary {
                mean: values[0],
                ci_lower: f64::NAN,
                ci_upper: f64::NAN,
                n: 1,
            }),
            n => {
                let ci = confidence_interval(values, 0.95)?;
                Ok(Summary {
                    mean: ci.mean,
                    ci_lower: ci.lower,
                    ci_upper: ci.upper,
                    n,
                })
            }
        }
    }
}

/// One (scenario, N, method) row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub method: Method,
    /// Mean excess risk with its interval.
    pub point: RateCurvePoint,
    pub risk: Summary,
    /// Reference curves `c N^{-1/2} (log N)^a` for `a = 3/2` and `a = 3`,
    /// anchored at the first positive point of the same curve.
    pub reference_a15: Option<f64>,
    pub reference_a3: Option<f64>,
    /// `c phi_N^{1/2} (log N)^{3/2}` when a smoothness is configured.
    pub phi_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub scenario: String,
    pub method: Method,
    pub n_from: usize,
    pub n_to: usize,
    pub slope: Option<f64>,
    pub used: usize,
    pub excluded: usize,
}

/// Aggregated results of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config_hash: String,
    pub scenarios: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<FitRow>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub wall_time_s: Option<f64>,
}

impl RiskReport {
    pub fn row(&self, scenario: &str, n: usize, method: Method) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.point.n == n && r.method == method)
    }

    /// Rows of one curve in increasing `N`.
    pub fn curve(&self, scenario: &str, method: Method) -> Vec<&ReportRow> {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method)
            .collect();
        rows.sort_by_key(|r| r.point.n);
        rows
    }

    pub fn fit(&self, scenario: &str, method: Method) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.scenario == scenario && f.method == method)
    }
}

/// Deterministic reduction of repetition records (in any order) to a report.
pub fn aggregate(
    config: &ExperimentConfig,
    records: &[RepetitionRecord],
    references: &[ReferenceRisk],
) -> Result<RiskReport> {
    let hash = config.hash();
    if let Some(bad) = records.iter().find(|r| r.config_hash != hash) {
        return Err(Error::RecordMismatch(format!(
            "repetition {} has config hash {}, expected {hash}",
            bad.rep_index, bad.config_hash
        )));
    }
    let mut ok: Vec<&RepetitionRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    ok.sort_by_key(|r| r.rep_index);
    let scenarios = config.scenarios()?;
    let mut methods = vec![Method::PlugIn, Method::Bayes];
    if config.direct.enabled {
        methods.push(Method::Direct);
    }
    let mut sizes = config.train_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();

    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (s, scenario) in scenarios.iter().enumerate() {
        let reference = references.iter().find(|r| r.scenario == s).map(|r| r.error_rate);
        for &method in &methods {
            let mut curve = Vec::new();
            for &n in &sizes {
                let mut risks = Vec::new();
                let mut excess = Vec::new();
                for rec in &ok {
                    let cell = rec
                        .results
                        .iter()
                        .find(|c| c.scenario == s && c.n == n)
                        .ok_or_else(|| {
                            Error::RecordMismatch(format!("repetition {} lacks scenario {s}, N = {n}", rec.rep_index))
                        })?;
                    let value = match method {
                        Method::PlugIn => cell.plug_in,
                        Method::Bayes => cell.bayes,
                        Method::Direct => cell.direct.ok_or_else(|| {
                            Error::RecordMismatch(format!("repetition {} lacks direct results", rec.rep_index))
                        })?,
                    };
                    risks.push(value);
                    excess.push(value - reference.unwrap_or(cell.bayes));
                }
                let risk = Summary::of(&risks)?;
                let ex = Summary::of(&excess)?;
                curve.push(ReportRow {
                    scenario: scenario.label.clone(),
                    method,
                    point: RateCurvePoint {
                        n,
                        mean_excess: ex.mean,
                        ci_lower: ex.ci_lower,
                        ci_upper: ex.ci_upper,
                        n_reps: ex.n,
                    },
                    risk,
                    reference_a15: None,
                    reference_a3: None,
                    phi_reference: None,
                });
            }
            attach_references(&mut curve, config)?;
            if method != Method::Bayes {
                fits.push(fit_row(&curve, config.fit_window));
            }
            rows.extend(curve);
        }
    }
    Ok(RiskReport {
        config_hash: hash,
        scenarios: scenarios.into_iter().map(|s| s.label).collect(),
        rows,
        fits,
        n_ok: ok.len(),
        n_failed: records.len() - ok.len(),
        wall_time_s: None,
    })
}

fn attach_references(curve: &mut [ReportRow], config: &ExperimentConfig) -> Result<()> {
    let points: Vec<RateCurvePoint> = curve.iter().map(|r| r.point).collect();
    for (a, slot) in [(1.5, 0), (3.0, 1)] {
        for (row, (_, v)) in curve.iter_mut().zip(anchored_reference(&points, a)) {
            match slot {
                0 => row.reference_a15 = Some(v),
                _ => row.reference_a3 = Some(v),
            }
        }
    }
    if let Some(sm) = &config.smoothness {
        let shape = |n: usize| -> Result<f64> {
            let phi = phi_rate(&sm.betas, &sm.ts, n as f64)?;
            Ok(phi.sqrt() * (n as f64).ln().powf(1.5))
        };
        if let Some(anchor) = points.iter().find(|p| p.mean_excess > 0.0) {
            let c = anchor.mean_excess / shape(anchor.n)?;
            for row in curve.iter_mut() {
                row.phi_reference = Some(c * shape(row.point.n)?);
            }
        }
    }
    Ok(())
}

fn fit_row(curve: &[ReportRow], window: usize) -> FitRow {
    let points: Vec<RateCurvePoint> = curve.iter().map(|r| r.point).collect();
    let start = points.len().saturating_sub(window);
    let fit = fit_rate(&points, start..points.len());
    let (slope, used, excluded) = match fit {
        Ok(f) => (Some(f.slope), f.used, f.excluded),
        Err(_) => {
            let excluded = points[start..].iter().filter(|p| !(p.mean_excess > 0.0)).count();
            (None, points.len() - start - excluded, excluded)
        }
    };
    FitRow {
        scenario: curve.first().map(|r| r.scenario.clone()).unwrap_or_default(),
        method: curve.first().map(|r| r.method).unwrap_or(Method::PlugIn),
        n_from: points.get(start).map(|p| p.n).unwrap_or(0),
        n_to: points.last().map(|p| p.n).unwrap_or(0),
        slope,
        used,
        excluded,
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `report.csv`, `table.csv` and `fits.csv`; every row carries the config hash.
pub fn write_report_files(dir: &Path, report: &RiskReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let h = report.config_hash.as_str();

    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record([
        "config_hash",
        "scenario",
        "method",
        "N",
        "mean_excess",
        "ci_lower",
        "ci_upper",
        "n_reps",
        "mean_risk",
        "risk_ci_lower",
        "risk_ci_upper",
        "reference_log_1_5",
        "reference_log_3",
        "reference_phi",
    ])?;
    for r in &report.rows {
        w.write_record([
            h.to_string(),
            r.scenario.clone(),
            r.method.name().to_string(),
            r.point.n.to_string(),
            num(r.point.mean_excess),
            num(r.point.ci_lower),
            num(r.point.ci_upper),
            r.point.n_reps.to_string(),
            num(r.risk.mean),
            num(r.risk.ci_lower),
            num(r.risk.ci_upper),
            opt(r.reference_a15),
            opt(r.reference_a3),
            opt(r.phi_reference),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("report.csv"), e))?;

    let mut w = csv::Writer::from_path(dir.join("table.csv"))?;
    w.write_record([
        "config_hash",
        "scenario",
        "N",
        "n_reps",
        "bspline",
        "plug_in",
        "plug_in_ci_lower",
        "plug_in_ci_upper",
        "bayes",
        "bayes_ci_lower",
        "bayes_ci_upper",
        "direct",
        "direct_ci_lower",
        "direct_ci_upper",
    ])?;
    let mut cells: Vec<(String, usize)> = Vec::new();
    for r in &report.rows {
        let key = (r.scenario.clone(), r.point.n);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    for (scenario, n) in cells {
        let mut rec = vec![h.to_string(), scenario.clone(), n.to_string()];
        let plug = report.row(&scenario, n, Method::PlugIn);
        rec.push(plug.map(|r| r.risk.n.to_string()).unwrap_or_default());
        rec.push(String::new());
        for m in [Method::PlugIn, Method::Bayes, Method::Direct] {
            match report.row(&scenario, n, m) {
                Some(r) => rec.extend([num(r.risk.mean), num(r.risk.ci_lower), num(r.risk.ci_upper)]),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(dir.join("table.csv"), e))?;

    let mut w = csv::Writer::from_path(dir.join("fits.csv"))?;
    w.write_record([
        "config_hash",
        "scenario",
        "method",
        "n_from",
        "n_to",
        "slope",
        "used",
        "excluded",
    ])?;
    for f in &report.fits {
        w.write_record([
            h.to_string(),
            f.scenario.clone(),
            f.method.name().to_string(),
            f.n_from.to_string(),
            f.n_to.to_string(),
            opt(f.slope),
            f.used.to_string(),
            f.excluded.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("fits.csv"), e))?;
    Ok(())
}

/// Reads `meta.json` and `records.jsonl` from a run directory.
pub fn load_run(dir: &Path) -> Result<(RunMeta, Vec<RepetitionRecord>)> {
    let meta_path = dir.join("meta.json");
    let file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RunMeta = serde_json::from_reader(BufReader::new(file))?;
    let rec_path = dir.join("records.jsonl");
    let file = File::open(&rec_path).map_err(|e| Error::io(&rec_path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&rec_path, e))?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok((meta, records))
}

/// Re-aggregates the records of one or more run directories into `out`.
///
/// All runs must share one config hash; duplicate repetition indices are rejected.
pub fn reaggregate(dirs: &[PathBuf], out: &Path) -> Result<RiskReport> {
    let Some(first) = dirs.first() else {
        return Err(Error::InvalidArgument("no run directories given".into()));
    };
    let (meta, mut records) = load_run(first)?;
    let mut references = meta.references.clone();
    for dir in &dirs[1..] {
        let (m, r) = load_run(dir)?;
        if m.config_hash != meta.config_hash {
            return Err(Error::RecordMismatch(format!(
                "{} has config hash {}, {} has {}",
                dir.display(),
                m.config_hash,
                first.display(),
                meta.config_hash
            )));
        }
        if references.is_empty() {
            references = m.references;
        }
        records.extend(r);
    }
    if let Some(bad) = records.iter().find(|r| r.config_hash != meta.config_hash) {
        return Err(Error::RecordMismatch(format!(
            "record {} has config hash {}, expected {}",
            bad.rep_index, bad.config_hash, meta.config_hash
        )));
    }
    records.sort_by_key(|r| r.rep_index);
    if let Some(w) = records.windows(2).find(|w| w[0].rep_index == w[1].rep_index) {
        return Err(Error::RecordMismatch(format!(
            "repetition {} appears twice",
            w[0].rep_index
        )));
    }
    let report = aggregate(&meta.config, &records, &references)?;
    write_report_files(out, &report)?;
    Ok(report)
}
