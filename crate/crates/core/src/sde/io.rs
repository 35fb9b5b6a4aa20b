//! Dataset persistence: a CSV of states plus a JSON header sidecar.
//!
//! The CSV has columns `class, path_id, m, x_1 .. x_d`, one row per grid
//! point, and floats are written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::simulate::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub delta: f64,
    pub t: f64,
    pub seed: u64,
    pub class_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn paths_for(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("csv"), stem.with_extension("json"))
}

/// Writes `<stem>.csv` and `<stem>.json`. Returns the two paths.
pub fn write_dataset(ds: &LabeledDataset, stem: &Path, config_hash: Option<&str>) -> Result<(PathBuf, PathBuf)> {
    let (csv_path, json_path) = paths_for(stem);
    let header = DatasetHeader {
        d: ds.dim(),
        k: ds.num_classes(),
        m: ds.steps(),
        delta: ds.delta(),
        t: ds.horizon(),
        seed: ds.seed(),
        class_counts: ds.counts(),
        config_hash: config_hash.map(str::to_owned),
    };
    let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &header)?;

    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut row: Vec<String> = ["class", "path_id", "m"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=ds.dim()).map(|i| format!("x_{i}")))
        .collect();
    w.write_record(&row)?;
    for (k, paths) in ds.classes().iter().enumerate() {
        for (n, p) in paths.iter().enumerate() {
            for (m, x) in p.rows().enumerate() {
                row.clear();
                row.push(k.to_string());
                row.push(n.to_string());
                row.push(m.to_string());
                row.extend(x.iter().map(|&v| fmt_f64(v)));
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok((csv_path, json_path))
}

/// Reads a dataset written by [`write_dataset`], given either file or the bare stem.
pub fn read_dataset(stem: &Path) -> Result<(LabeledDataset, DatasetHeader)> {
    let (csv_path, json_path) = paths_for(stem);
    let file = File::open(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: DatasetHeader = serde_json::from_reader(BufReader::new(file))?;
    let d = header.d;
    let rows_per_path = header.m + 1;

    let mut classes: Vec<Vec<Vec<f64>>> = header
        .class_counts
        .iter()
        .map(|&c| vec![Vec::with_capacity(rows_per_path * d); c])
        .collect();
    let mut r = csv::Reader::from_path(&csv_path)?;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::InvalidArgument(format!("{}: row {}: {what}", csv_path.display(), line + 2));
        if rec.len() != 3 + d {
            return Err(bad("wrong number of columns"));
        }
        let k: usize = rec[0].parse().map_err(|_| bad("bad class"))?;
        let n: usize = rec[1].parse().map_err(|_| bad("bad path_id"))?;
        let m: usize = rec[2].parse().map_err(|_| bad("bad m"))?;
        let buf = classes
            .get_mut(k)
            .and_then(|c| c.get_mut(n))
            .ok_or_else(|| bad("class/path outside header counts"))?;
        if buf.len() != m * d {
            return Err(bad("rows out of order"));
        }
        for field in rec.iter().skip(3) {
            buf.push(field.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
        }
    }
    let classes = classes
        .into_iter()
        .map(|paths| {
            paths
                .into_iter()
                .map(|s| {
                    if s.len() != rows_per_path * d {
                        return Err(Error::InvalidArgument(format!(
                            "{}: incomplete path",
                            csv_path.display()
                        )));
                    }
                    Trajectory::new(d, header.t, s)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = LabeledDataset::from_classes(classes, header.seed)?;
    Ok((ds, header))
}
