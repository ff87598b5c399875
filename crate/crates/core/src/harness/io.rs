//! Plain-text dataset formats.
//!
//! All indices in files are 1-based; they are converted to 0-based on load
//! and back on write.
//!
//! | file       | format                                                     |
//! |------------|------------------------------------------------------------|
//! | features   | CSV without header, one row per instance, `m` columns       |
//! | candidates | line `j`: comma-separated classes of instance `j`          |
//! | groups     | line `k`: comma-separated instances of group `k`           |
//! | truth      | one class per line, or a predictions CSV with `label`      |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::group::GroupStructure;
use crate::labels::{AmbiguousDataset, CandidateSet, ClassIndex, SoftLabelMatrix};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

/// Reads an `N × m` CSV and returns it transposed to `m × N`.
pub fn read_features(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(rows + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {w} columns, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(path, line, format!("column {}: '{cell}' is not a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("column {}: non-finite value", col + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let m = width.ok_or_else(|| parse_err(path, 1, "no feature rows"))?;
    // row-major N × m is column-major m × N
    Ok(DMatrix::from_column_slice(m, rows, &values))
}

/// Lines of comma-separated 1-based indices, converted to 0-based. Trailing
/// blank lines are ignored; any other blank line is an error.
fn read_index_lines(path: &Path, what: &str) -> Result<Vec<(usize, Vec<usize>)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    let mut out = Vec::with_capacity(last);
    for (k, raw) in lines[..last].iter().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(parse_err(path, line, format!("empty {what} line")));
        }
        let mut idx = Vec::new();
        for tok in raw.split(',') {
            let tok = tok.trim();
            let v: usize = tok
                .parse()
                .map_err(|_| parse_err(path, line, format!("'{tok}' is not a positive integer")))?;
            if v == 0 {
                return Err(parse_err(path, line, "indices are 1-based; found 0"));
            }
            idx.push(v - 1);
        }
        out.push((line, idx));
    }
    Ok(out)
}

pub fn read_candidates(path: &Path, num_classes: Option<usize>) -> Result<Vec<CandidateSet>> {
    let mut out = Vec::new();
    for (line, idx) in read_index_lines(path, "candidate")? {
        if let Some(c) = num_classes {
            if let Some(&bad) = idx.iter().find(|&&i| i >= c) {
                return Err(parse_err(path, line, format!("class {} exceeds {c} classes", bad + 1)));
            }
        }
        out.push(CandidateSet::new(idx).map_err(|e| parse_err(path, line, e.to_string()))?);
    }
    if out.is_empty() {
        return Err(parse_err(path, 1, "no candidate sets"));
    }
    Ok(out)
}

/// Groups over `n` instances; instances not listed become singleton groups.
pub fn read_groups(path: &Path, n: usize) -> Result<GroupStructure> {
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut groups = Vec::new();
    for (line, idx) in read_index_lines(path, "group")? {
        for &j in &idx {
            if j >= n {
                return Err(parse_err(path, line, format!("instance {} exceeds {n} instances", j + 1)));
            }
            if let Some(prev) = owner[j] {
                return Err(parse_err(
                    path,
                    line,
                    format!("instance {} already in the group on line {prev}", j + 1),
                ));
            }
            owner[j] = Some(line);
        }
        groups.push(idx);
    }
    GroupStructure::from_partial(groups, n)
}

/// One 1-based class per line, or a CSV whose header has a `label` column
/// (the predictions format written by [`write_predictions`]).
pub fn read_truth(path: &Path) -> Result<Vec<ClassIndex>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let first = text.lines().next().unwrap_or("");
    if first.split(',').any(|h| h.trim() == "label") {
        return read_label_column(path);
    }
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    lines[..last]
        .iter()
        .enumerate()
        .map(|(k, raw)| {
            let tok = raw.trim();
            match tok.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v - 1),
                _ => Err(parse_err(path, k + 1, format!("'{tok}' is not a 1-based class index"))),
            }
        })
        .collect()
}

fn read_label_column(path: &Path) -> Result<Vec<ClassIndex>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| parse_err(path, 1, "no 'label' column"))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = record.get(col).ok_or_else(|| parse_err(path, line, "missing label"))?;
        match cell.parse::<usize>() {
            Ok(v) if v > 0 => out.push(v - 1),
            _ => return Err(parse_err(path, line, format!("'{cell}' is not a 1-based class index"))),
        }
    }
    Ok(out)
}

/// Rescales all entries to `[0, 1]` by the global min and max. A constant
/// matrix maps to zeros.
pub fn normalize_features(x: &mut DMatrix<f64>) {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if span > 0.0 {
        x.apply(|v| *v = (*v - lo) / span);
    } else {
        x.fill(0.0);
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetPaths {
    pub features: PathBuf,
    pub candidates: PathBuf,
    #[serde(default)]
    pub groups: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LoadOptions {
    /// Number of classes; inferred from the largest index seen when absent.
    #[serde(default)]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Debug)]
pub struct LoadedData {
    pub dataset: AmbiguousDataset,
    pub groups: Option<GroupStructure>,
    /// Instances whose ground truth is not among their candidates.
    pub truth_violations: Vec<usize>,
}

pub fn load_dataset(paths: &DatasetPaths, options: &LoadOptions) -> Result<LoadedData> {
    let mut x = read_features(&paths.features)?;
    if options.normalize {
        normalize_features(&mut x);
    }
    let candidates = read_candidates(&paths.candidates, options.num_classes)?;
    let n = candidates.len();
    if x.ncols() != n {
        return Err(Error::shape(format!(
            "{} has {} rows but {} has {n} lines",
            paths.features.display(),
            x.ncols(),
            paths.candidates.display()
        )));
    }
    let truth = match &paths.truth {
        Some(p) => {
            let t = read_truth(p)?;
            if t.len() != n {
                return Err(Error::shape(format!("{} has {} labels for {n} instances", p.display(), t.len())));
            }
            Some(t)
        }
        None => None,
    };
    let inferred = candidates
        .iter()
        .map(CandidateSet::max_label)
        .chain(truth.iter().flatten().copied())
        .max()
        .unwrap_or(0)
        + 1;
    let c = match options.num_classes {
        Some(c) if c < inferred => {
            return Err(Error::invalid(format!("{c} classes, but index {inferred} appears")));
        }
        Some(c) => c,
        None => inferred,
    };
    let groups = match &paths.groups {
        Some(p) => Some(read_groups(p, n)?),
        None => None,
    };
    let (dataset, violations) = AmbiguousDataset::new_lenient(x, candidates, c, truth)?;
    if !violations.is_empty() {
        log::warn!(
            "{} instances have ground truth outside their candidate set (first: instance {})",
            violations.len(),
            violations[0] + 1
        );
    }
    Ok(LoadedData {
        dataset,
        groups,
        truth_violations: violations,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(io_err(path))
}

/// Writes `m × N` features as `N` rows. `{:?}` formatting round-trips `f64` exactly.
pub fn write_features(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    for j in 0..x.ncols() {
        let row: Vec<String> = x.column(j).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(",")).map_err(io_err(path))?;
    }
    finish(path, w)
}

fn write_index_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a [usize]>) -> Result<()> {
    let mut w = create(path)?;
    for idx in lines {
        let s: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(w, "{}", s.join(",")).map_err(io_err(path))?;
    }
    finish(path, w)
}

pub fn write_candidates(path: &Path, candidates: &[CandidateSet]) -> Result<()> {
    write_index_lines(path, candidates.iter().map(CandidateSet::as_slice))
}

pub fn write_groups(path: &Path, groups: &GroupStructure) -> Result<()> {
    write_index_lines(path, groups.groups().iter().map(Vec::as_slice))
}

pub fn write_truth(path: &Path, labels: &[ClassIndex]) -> Result<()> {
    let mut w = create(path)?;
    for l in labels {
        writeln!(w, "{}", l + 1).map_err(io_err(path))?;
    }
    finish(path, w)
}

/// `instance,label,score_1,…,score_c`, all indices 1-based.
pub fn write_predictions(path: &Path, labels: &[ClassIndex], scores: &SoftLabelMatrix) -> Result<()> {
    if scores.num_instances() != labels.len() {
        return Err(Error::shape(format!(
            "{} labels but {} score columns",
            labels.len(),
            scores.num_instances()
        )));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["instance".to_string(), "label".to_string()];
    header.extend((1..=scores.num_classes()).map(|i| format!("score_{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (j, l) in labels.iter().enumerate() {
        let mut row = vec![(j + 1).to_string(), (l + 1).to_string()];
        row.extend(scores.column(j).iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e.into() })?;
    writeln!(w).map_err(io_err(path))?;
    finish(path, w)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}
