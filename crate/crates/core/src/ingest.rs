//! Reading curve data from CSV and writing result artifacts.
//!
//! Curve files are column-oriented: a header `t,<id1>,<id2>,...` followed by
//! one row per grid point. Grids are mapped affinely onto `[0, 1]`.
//! Floats are written with 17 significant digits so that a write/read cycle
//! reproduces every value exactly.

use std::collections::HashMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::derivative::{derivative_generating_function, DerivativeEstimate};
use crate::error::{Error, Result};
use crate::fpca::{EigenSystem, Sample};
use crate::function_space::{Curve, Grid};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn parse_num(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::format(path, format!("line {line}: non-finite value '{field}'")));
    }
    Ok(v)
}

/// Maps strictly increasing points affinely onto `[0, 1]`.
fn rescale(points: &[f64]) -> Vec<f64> {
    let (lo, hi) = (points[0], points[points.len() - 1]);
    let span = hi - lo;
    let mut out: Vec<f64> = points.iter().map(|t| (t - lo) / span).collect();
    out[0] = 0.0;
    *out.last_mut().unwrap() = 1.0;
    out
}

fn check_increasing(path: &Path, points: &[f64], what: &str) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::format(
            path,
            format!("need at least 2 {what}, got {}", points.len()),
        ));
    }
    if let Some(k) = points.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::format(
            path,
            format!("{what} not strictly increasing at position {}", k + 2),
        ));
    }
    Ok(())
}

/// Reads a column-oriented curve file into a sample on `[0, 1]`.
pub fn load_curves_csv(path: impl AsRef<Path>) -> Result<Sample> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 2 {
        return Err(Error::format(path, "header needs a grid column and at least one curve"));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut t = Vec::new();
    let mut cols = vec![Vec::new(); ids.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::format(
                path,
                format!("line {line}: expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        t.push(parse_num(path, line, &rec[0])?);
        for (col, field) in cols.iter_mut().zip(rec.iter().skip(1)) {
            col.push(parse_num(path, line, field)?);
        }
    }
    check_increasing(path, &t, "grid points")?;
    let range = (t[0], t[t.len() - 1]);
    let grid = Grid::new(rescale(&t))?;
    Sample::from_rows(grid, cols)?
        .with_ids(ids)
        .map(|s| s.with_time_range(range))
}

/// Writes a sample in the format read by [`load_curves_csv`].
pub fn write_curves_csv(sample: &Sample, path: impl AsRef<Path>) -> Result<()> {
    let labels: Vec<String> = (0..sample.len()).map(|i| sample.label(i)).collect();
    let curves: Vec<&Curve> = sample.curves().iter().collect();
    write_columns(path.as_ref(), sample.grid(), &labels, &curves)
}

fn write_columns(path: &Path, grid: &Grid, labels: &[String], curves: &[&Curve]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_owned()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, t) in grid.points().iter().enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(curves.iter().map(|c| fmt_f64(c.values()[k])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads scalar responses from an `id,y` file.
///
/// When the sample carries ids, responses are matched by id; otherwise they
/// are taken in file order.
pub fn load_responses(path: impl AsRef<Path>, sample: &Sample) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::format(path, format!("line {line}: expected 2 fields (id,y)")));
        }
        rows.push((rec[0].to_owned(), parse_num(path, line, &rec[1])?));
    }
    if rows.len() != sample.len() {
        return Err(Error::format(
            path,
            format!("{} responses for {} curves", rows.len(), sample.len()),
        ));
    }
    match sample.ids() {
        None => Ok(rows.into_iter().map(|(_, y)| y).collect()),
        Some(ids) => {
            let by_id: HashMap<&str, f64> = rows.iter().map(|(id, y)| (id.as_str(), *y)).collect();
            if by_id.len() != rows.len() {
                return Err(Error::format(path, "duplicate response ids"));
            }
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::format(path, format!("no response for curve '{id}'")))
                })
                .collect()
        }
    }
}

pub fn write_responses_csv(ids: &[String], y: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["id", "y"]).map_err(|e| csv_err(path, e))?;
    for (id, v) in ids.iter().zip(y) {
        w.write_record([id.as_str(), &fmt_f64(*v)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Heights of `n` subjects measured at `J` common ages.
#[derive(Debug, Clone)]
pub struct LongitudinalTable {
    ages: Vec<f64>,
    heights: Vec<Vec<f64>>,
    ids: Vec<String>,
}

impl LongitudinalTable {
    pub fn new(ages: Vec<f64>, heights: Vec<Vec<f64>>, ids: Vec<String>) -> Result<Self> {
        if ages.windows(2).any(|w| w[1] <= w[0]) || ages.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(
                "ages must be finite and strictly increasing".into(),
            ));
        }
        if ids.len() != heights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} subjects",
                ids.len(),
                heights.len()
            )));
        }
        for (id, row) in ids.iter().zip(&heights) {
            if row.len() != ages.len() || row.iter().any(|h| !h.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "subject '{id}' needs {} finite heights",
                    ages.len()
                )));
            }
        }
        Ok(LongitudinalTable { ages, heights, ids })
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn heights(&self) -> &[Vec<f64>] {
        &self.heights
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Keeps only the ages for which `keep` holds.
    pub fn select_ages(&self, keep: impl Fn(f64) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.ages.len()).filter(|&k| keep(self.ages[k])).collect();
        LongitudinalTable::new(
            idx.iter().map(|&k| self.ages[k]).collect(),
            self.heights
                .iter()
                .map(|r| idx.iter().map(|&k| r[k]).collect())
                .collect(),
            self.ids.clone(),
        )
    }
}

/// Midpoints `(s_j + s_{j+1}) / 2` of consecutive ages.
pub fn midpoints(ages: &[f64]) -> Vec<f64> {
    ages.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// First-order difference quotients of one height record, one per
/// consecutive pair of ages, located at the age midpoints.
pub fn difference_quotients(heights: &[f64], ages: &[f64]) -> Vec<f64> {
    heights
        .windows(2)
        .zip(ages.windows(2))
        .map(|(h, a)| (h[1] - h[0]) / (a[1] - a[0]))
        .collect()
}

/// Growth-rate curves on the age-midpoint grid, rescaled to `[0, 1]`.
pub fn growth_rates(table: &LongitudinalTable) -> Result<Sample> {
    let j = table.ages.len();
    if j < 3 {
        return Err(Error::InsufficientTimepoints(j));
    }
    let mid = midpoints(&table.ages);
    let rows: Vec<Vec<f64>> = table
        .heights
        .iter()
        .map(|h| difference_quotients(h, &table.ages))
        .collect();
    let grid = Grid::new(rescale(&mid))?;
    Sample::from_rows(grid, rows)?
        .with_ids(table.ids.clone())
        .map(|s| s.with_time_range((mid[0], mid[mid.len() - 1])))
}

/// Reads ages (one column, header `age`) and heights (header
/// `id,<label per age>`, one row per subject).
pub fn load_growth_table(heights: impl AsRef<Path>, ages: impl AsRef<Path>) -> Result<LongitudinalTable> {
    let (hpath, apath) = (heights.as_ref(), ages.as_ref());
    let mut age_vals = Vec::new();
    let mut rdr = reader(apath)?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(apath, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 1 {
            return Err(Error::format(
                apath,
                format!("line {line}: expected a single age column"),
            ));
        }
        age_vals.push(parse_num(apath, line, &rec[0])?);
    }
    check_increasing(apath, &age_vals, "ages")?;

    let mut rdr = reader(hpath)?;
    let width = rdr.headers().map_err(|e| csv_err(hpath, e))?.len();
    if width != age_vals.len() + 1 {
        return Err(Error::format(
            hpath,
            format!(
                "header has {} height columns for {} ages",
                width.saturating_sub(1),
                age_vals.len()
            ),
        ));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(hpath, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::format(
                hpath,
                format!("line {line}: expected {width} fields, got {}", rec.len()),
            ));
        }
        ids.push(rec[0].to_owned());
        rows.push(
            rec.iter()
                .skip(1)
                .map(|f| parse_num(hpath, line, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::format(hpath, "no subjects"));
    }
    LongitudinalTable::new(age_vals, rows, ids).map_err(|e| Error::format(hpath, e.to_string()))
}

/// Everything an analysis run writes to its output directory.
#[derive(Debug, Default)]
pub struct Report {
    pub eigen: Option<EigenSystem>,
    /// Labels for the rows of `eigen.scores`.
    pub score_ids: Vec<String>,
    /// Derivative estimates with the label of their evaluation point.
    pub gammas: Vec<(String, DerivativeEstimate)>,
    pub time_range: Option<(f64, f64)>,
    /// Free-form run configuration, echoed into `summary.json`.
    pub config: serde_json::Value,
    /// Extra named results for `summary.json`.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct GammaSummary<'a> {
    id: &'a str,
    gammas: &'a [Option<f64>],
    pair_counts: &'a [usize],
    bandwidths: &'a [Option<crate::derivative::DerivBandwidths>],
}

/// Writes `eigen.csv`, `scores.csv`, `gamma.csv`, `dgf.csv` and
/// `summary.json` into `dir`, creating it if needed.
pub fn export_report(report: &Report, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let k = report.eigen.as_ref().map_or(0, EigenSystem::components);
    let kg = report.gammas.iter().map(|(_, e)| e.components()).max().unwrap_or(0);

    let eigen_path = dir.join("eigen.csv");
    match &report.eigen {
        Some(eig) => {
            let mut labels = vec!["mean".to_owned()];
            labels.extend((1..=k).map(|j| format!("psi{j}")));
            let mut curves = vec![&eig.mean];
            curves.extend(eig.eigenfunctions.iter());
            write_columns(&eigen_path, eig.grid(), &labels, &curves)?;
        }
        None => write_header(&eigen_path, &["t".into(), "mean".into()])?,
    }

    let scores_path = dir.join("scores.csv");
    let mut w = writer(&scores_path)?;
    let mut header = vec!["id".to_owned()];
    header.extend((1..=k).map(|j| format!("xi{j}")));
    w.write_record(&header).map_err(|e| csv_err(&scores_path, e))?;
    if let Some(eig) = &report.eigen {
        for (i, row) in eig.scores.iter().enumerate() {
            let id = report.score_ids.get(i).cloned().unwrap_or_else(|| (i + 1).to_string());
            let mut rec = vec![id];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec).map_err(|e| csv_err(&scores_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&scores_path, e))?;

    let gamma_path = dir.join("gamma.csv");
    let mut w = writer(&gamma_path)?;
    let mut header = vec!["id".to_owned()];
    header.extend((1..=kg).map(|j| format!("gamma{j}")));
    header.extend((1..=kg).map(|j| format!("pairs{j}")));
    header.extend((1..=kg).map(|j| format!("absent{j}")));
    w.write_record(&header).map_err(|e| csv_err(&gamma_path, e))?;
    for (id, est) in &report.gammas {
        let mut rec = vec![id.clone()];
        rec.extend((0..kg).map(|j| est.gammas.get(j).copied().flatten().map(fmt_f64).unwrap_or_default()));
        rec.extend((0..kg).map(|j| est.pair_counts.get(j).copied().unwrap_or(0).to_string()));
        rec.extend((0..kg).map(|j| match est.gammas.get(j) {
            Some(Some(_)) => "0".to_owned(),
            _ => "1".to_owned(),
        }));
        w.write_record(&rec).map_err(|e| csv_err(&gamma_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&gamma_path, e))?;

    // Derivative generating functions need every component; incomplete
    // estimates are listed in the summary instead.
    let dgf_path = dir.join("dgf.csv");
    let mut labels = Vec::new();
    let mut curves = Vec::new();
    let mut omitted = Vec::new();
    for (id, est) in &report.gammas {
        if est.is_complete() {
            labels.push(id.clone());
            curves.push(derivative_generating_function(est, est.components())?);
        } else {
            omitted.push(id.clone());
        }
    }
    match curves.first() {
        Some(c) => {
            let grid = Arc::clone(c.grid());
            write_columns(&dgf_path, &grid, &labels, &curves.iter().collect::<Vec<_>>())?;
        }
        None => write_header(&dgf_path, &["t".into()])?,
    }

    let mut summary = serde_json::Map::new();
    if let Some(eig) = &report.eigen {
        summary.insert("components".into(), k.into());
        summary.insert("eigenvalues".into(), serde_json::to_value(&eig.eigenvalues).unwrap());
        summary.insert("fve".into(), serde_json::to_value(&eig.fve).unwrap());
        summary.insert("total_variance".into(), eig.total_variance.into());
    }
    if let Some((lo, hi)) = report.time_range {
        summary.insert("time_range".into(), serde_json::json!([lo, hi]));
    }
    let gs: Vec<GammaSummary<'_>> = report
        .gammas
        .iter()
        .map(|(id, e)| GammaSummary {
            id,
            gammas: &e.gammas,
            pair_counts: &e.pair_counts,
            bandwidths: &e.bandwidths,
        })
        .collect();
    summary.insert("derivatives".into(), serde_json::to_value(gs).unwrap());
    summary.insert("dgf_omitted".into(), serde_json::to_value(omitted).unwrap());
    summary.insert("config".into(), report.config.clone());
    for (key, v) in &report.extra {
        summary.insert(key.clone(), v.clone());
    }
    write_json(&dir.join("summary.json"), &serde_json::Value::Object(summary))
}

fn write_header(path: &Path, header: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes pretty-printed JSON. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(PathBuf::from(path), e))
}
