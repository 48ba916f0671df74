//! Tabular datasets, train/test partitioning and standardization.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// Sentinel for missing cells in CSV and raster inputs.
pub const DEFAULT_NODATA: f64 = -9999.0;

const TARGET_COLUMN: &str = "target";
const ROW_COLUMN: &str = "row";
const COL_COLUMN: &str = "col";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

/// Feature matrix with binary labels.
///
/// Rows are samples (raster cells for map data). Values are stored row-major.
/// The dataset is immutable apart from its partition tags.
#[derive(Debug, Clone)]
pub struct Dataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    grid_pos: Option<Vec<(i64, i64)>>,
    partition: Vec<Partition>,
}

impl Dataset {
    /// Builds a dataset from rows. Every sample starts tagged `Train`.
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        grid_pos: Option<Vec<(i64, i64)>>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if n_features == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::Data(format!(
                    "row {i} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "row {i}, feature '{}' is not finite",
                    feature_names[j]
                )));
            }
            values.extend_from_slice(row);
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("label of row {i} is not 0 or 1")));
        }
        if let Some(pos) = &grid_pos {
            if pos.len() != labels.len() {
                return Err(Error::Data("grid position count differs from row count".into()));
            }
            let mut seen = HashSet::with_capacity(pos.len());
            for (i, p) in pos.iter().enumerate() {
                if !seen.insert(*p) {
                    return Err(Error::Data(format!(
                        "row {i} repeats grid position ({}, {})",
                        p.0, p.1
                    )));
                }
            }
        }
        let n = labels.len();
        Ok(Dataset {
            feature_names,
            values,
            n_features,
            labels,
            grid_pos,
            partition: vec![Partition::Train; n],
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, j)).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn grid_pos(&self) -> Option<&[(i64, i64)]> {
        self.grid_pos.as_deref()
    }

    pub fn partition(&self) -> &[Partition] {
        &self.partition
    }

    pub fn set_partition(&mut self, tags: Vec<Partition>) -> Result<()> {
        if tags.len() != self.len() {
            return Err(Error::Data("partition tag count differs from row count".into()));
        }
        self.partition = tags;
        Ok(())
    }

    /// Indices of samples carrying the given tag, ascending.
    pub fn indices(&self, tag: Partition) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.partition[i] == tag).collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Partition::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices(Partition::Test)
    }

    /// Labels as reals for the given rows.
    pub fn targets(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.labels[i] as f64).collect()
    }

    /// New dataset holding only the given rows (partition tags carried over).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            n_features: self.n_features,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            grid_pos: self
                .grid_pos
                .as_ref()
                .map(|p| rows.iter().map(|&i| p[i]).collect()),
            partition: rows.iter().map(|&i| self.partition[i]).collect(),
        }
    }

    /// True when every value of feature `j` is 0 or 1.
    pub fn is_binary_feature(&self, j: usize) -> bool {
        (0..self.len()).all(|i| {
            let v = self.value(i, j);
            v == 0.0 || v == 1.0
        })
    }
}

fn parse_cell(path: &Path, line: usize, column: &str, raw: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line,
        column: column.to_string(),
        message: format!("'{s}' is not a number"),
    })?;
    if v == DEFAULT_NODATA || !v.is_finite() {
        Ok(None)
    } else {
        Ok(Some(v))
    }
}

/// Reads a dataset from CSV.
///
/// The header must contain a `target` column with values 0/1. Optional
/// `row`/`col` columns become grid positions. Every other column is a
/// feature, in header order. Rows with empty, `NaN` or `-9999` feature cells
/// are dropped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target = header
        .iter()
        .position(|h| h == TARGET_COLUMN)
        .ok_or_else(|| Error::Data(format!("{}: missing 'target' column", path.display())))?;
    let row_col = header.iter().position(|h| h == ROW_COLUMN);
    let col_col = header.iter().position(|h| h == COL_COLUMN);
    if row_col.is_some() != col_col.is_some() {
        return Err(Error::Data(format!(
            "{}: 'row' and 'col' columns must appear together",
            path.display()
        )));
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != target && Some(c) != row_col && Some(c) != col_col)
        .collect();
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut positions = Vec::new();
    let mut dropped = 0usize;
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                column: "*".into(),
                message: format!("{} cells, header has {}", record.len(), header.len()),
            });
        }
        let label = match parse_cell(path, line, TARGET_COLUMN, &record[target])? {
            Some(v) if v == 0.0 => 0u8,
            Some(v) if v == 1.0 => 1u8,
            other => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line,
                    column: TARGET_COLUMN.into(),
                    message: format!(
                        "target must be 0 or 1, found '{}'",
                        other.map_or_else(|| record[target].trim().to_string(), |v| v.to_string())
                    ),
                })
            }
        };
        let mut row = Vec::with_capacity(feature_cols.len());
        let mut missing = false;
        for &c in &feature_cols {
            match parse_cell(path, line, &header[c], &record[c])? {
                Some(v) => row.push(v),
                None => missing = true,
            }
        }
        if missing {
            dropped += 1;
            continue;
        }
        if let (Some(rc), Some(cc)) = (row_col, col_col) {
            let r = parse_cell(path, line, ROW_COLUMN, &record[rc])?;
            let c = parse_cell(path, line, COL_COLUMN, &record[cc])?;
            match (r, c) {
                (Some(r), Some(c)) if r.fract() == 0.0 && c.fract() == 0.0 => {
                    positions.push((r as i64, c as i64))
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line,
                        column: "row/col".into(),
                        message: "grid position must be integer".into(),
                    })
                }
            }
        }
        rows.push(row);
        labels.push(label);
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with NODATA cells", path.display());
    }
    Dataset::new(names, rows, labels, row_col.map(|_| positions))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.display().to_string(),
        line,
        column: "*".into(),
        message: e.to_string(),
    }
}

/// Writes a dataset in the format read by [`load_csv`].
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = ds.feature_names.clone();
    if ds.grid_pos.is_some() {
        header.push(ROW_COLUMN.into());
        header.push(COL_COLUMN.into());
    }
    header.push(TARGET_COLUMN.into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(p) = &ds.grid_pos {
            rec.push(p[i].0.to_string());
            rec.push(p[i].1.to_string());
        }
        rec.push(ds.labels[i].to_string());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Tags samples train/test in a seeded checkerboard of `block`×`block` tiles.
///
/// Tiles follow a repeating 10-tile cycle in which `round(10·train_fraction)`
/// slots are train; the cycle position of tile `(tr, tc)` is
/// `(3·tr + tc + offset) mod 10` with `offset` drawn from the seed, which
/// scatters train and test tiles in both directions. Without grid positions
/// the sample index is blocked instead.
pub fn checkerboard_split(
    ds: &Dataset,
    block: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if block == 0 {
        return Err(Error::Config("checkerboard block must be at least 1 cell".into()));
    }
    let train_slots = ((10.0 * train_fraction).round() as i64).clamp(1, 9);
    let offset = (seed::derive(seed, 0xc4ec) % 10) as i64;
    let b = block as i64;
    let tags: Vec<Partition> = (0..ds.len())
        .map(|i| {
            let slot = match &ds.grid_pos {
                Some(p) => {
                    let (r, c) = p[i];
                    3 * r.div_euclid(b) + c.div_euclid(b)
                }
                None => i as i64 / b,
            };
            if (slot + offset).rem_euclid(10) < train_slots {
                Partition::Train
            } else {
                Partition::Test
            }
        })
        .collect();
    let n_train = tags.iter().filter(|t| **t == Partition::Train).count();
    if n_train == 0 || n_train == tags.len() {
        return Err(Error::Data(
            "partition degenerate: every sample landed in one partition (block too large?)".into(),
        ));
    }
    let mut out = ds.clone();
    out.partition = tags;
    Ok(out)
}

/// Draws half of the train-tagged and half of the test-tagged samples for
/// one cross-validation trial. Deterministic per `(seed, trial)`.
pub fn cv_subsample(ds: &Dataset, trial: u64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = ds.train_indices();
    let mut test = ds.test_indices();
    if train.len() < 2 || test.len() < 2 {
        return Err(Error::Data(format!(
            "cross-validation needs at least 2 samples per partition (train {}, test {})",
            train.len(),
            test.len()
        )));
    }
    let mut rng = seed::rng(seed::derive(seed::derive(seed, 0xcf), trial));
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    train.truncate(train.len() / 2);
    test.truncate(test.len() / 2);
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Inverse-frequency class weights on the train partition: `(N_neg/N_pos, 1)`.
pub fn class_weights(ds: &Dataset) -> Result<(f64, f64)> {
    class_weights_for(ds.labels(), &ds.train_indices())
}

/// Class weights for an arbitrary set of rows.
pub fn class_weights_for(labels: &[u8], rows: &[usize]) -> Result<(f64, f64)> {
    let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
    let neg = rows.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data(format!(
            "single-class training data ({pos} positive, {neg} negative)"
        )));
    }
    Ok((neg as f64 / pos as f64, 1.0))
}

/// Per-sample weights for `rows` using [`class_weights_for`].
pub fn sample_weights(labels: &[u8], rows: &[usize]) -> Result<Vec<f64>> {
    let (w_pos, w_neg) = class_weights_for(labels, rows)?;
    Ok(rows
        .iter()
        .map(|&i| if labels[i] == 1 { w_pos } else { w_neg })
        .collect())
}

/// Per-column zero-mean, unit-variance scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the given rows of each column. Population statistics, so
    /// applying the fit to its own rows gives exactly unit variance.
    pub fn fit(columns: &[&[f64]], rows: &[usize], names: &[String]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("cannot standardize an empty row set".into()));
        }
        let n = rows.len() as f64;
        let mut mean = Vec::with_capacity(columns.len());
        let mut std = Vec::with_capacity(columns.len());
        for (j, col) in columns.iter().enumerate() {
            let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n;
            let var = rows.iter().map(|&i| (col[i] - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if !(s > 1e-12 * m.abs().max(1.0)) {
                let name = names.get(j).map_or_else(|| format!("#{j}"), |s| s.clone());
                return Err(Error::Data(format!(
                    "feature '{name}' has zero variance on the training rows"
                )));
            }
            mean.push(m);
            std.push(s);
        }
        Ok(Standardizer { mean, std })
    }

    /// Fits on the train partition of a dataset's original features.
    pub fn fit_dataset(ds: &Dataset) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..ds.n_features()).map(|j| ds.column(j)).collect();
        let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        Standardizer::fit(&views, &ds.train_indices(), ds.feature_names())
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    #[inline]
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        (v - self.mean[j]) / self.std[j]
    }

    #[inline]
    pub fn invert(&self, j: usize, z: f64) -> f64 {
        z * self.std[j] + self.mean[j]
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.apply(j, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    fn grid(n: i64) -> Dataset {
        let mut rows = Vec::new();
        let mut pos = Vec::new();
        let mut labels = Vec::new();
        for r in 0..n {
            for c in 0..n {
                rows.push(vec![r as f64, c as f64]);
                pos.push((r, c));
                labels.push(((r + c) % 7 == 0) as u8);
            }
        }
        Dataset::new(vec!["a".into(), "b".into()], rows, labels, Some(pos)).unwrap()
    }

    #[test]
    fn loads_three_column_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "f1,f2,target\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n");
        let ds = load_csv(&p).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.feature_names(), ["f1", "f2"]);
        assert_eq!(ds.row(1), [3.0, 4.0]);
        assert!(ds.grid_pos().is_none());
    }

    #[test]
    fn loads_grid_positions() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "row,f1,col,target\n0,1.5,0,0\n0,2.5,1,1\n");
        let ds = load_csv(&p).unwrap();
        assert_eq!(ds.feature_names(), ["f1"]);
        assert_eq!(ds.grid_pos().unwrap(), [(0, 0), (0, 1)]);
    }

    #[test]
    fn bad_target_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "f1,target\n1,0\n2,2\n");
        let err = load_csv(&p).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        assert!(err.contains("target"), "{err}");
    }

    #[test]
    fn missing_target_and_non_numeric_cells_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f1,f2\n1,2\n");
        assert!(load_csv(&p).unwrap_err().to_string().contains("target"));
        let p = write(&dir, "b.csv", "f1,target\nabc,1\n");
        let err = load_csv(&p).unwrap_err().to_string();
        assert!(err.contains("f1") && err.contains(":2:"), "{err}");
        let p = write(&dir, "c.csv", "f1,target\n1,1,5\n");
        assert!(load_csv(&p).is_err());
    }

    #[test]
    fn nodata_rows_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "f1,target\n1,0\n-9999,1\nNaN,0\n,1\n4,1\n");
        let ds = load_csv(&p).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.column(0), [1.0, 4.0]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = grid(4);
        let p = dir.path().join("g.csv");
        write_csv(&ds, &p).unwrap();
        let back = load_csv(&p).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.grid_pos(), ds.grid_pos());
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.row(5), ds.row(5));
    }

    #[test]
    fn duplicate_grid_positions_rejected() {
        let r = Dataset::new(
            vec!["a".into()],
            vec![vec![1.0], vec![2.0]],
            vec![0, 1],
            Some(vec![(0, 0), (0, 0)]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn checkerboard_hits_train_fraction() {
        let ds = grid(100);
        for seed in 0..5 {
            let s = checkerboard_split(&ds, 16, 0.7, seed).unwrap();
            let frac = s.train_indices().len() as f64 / s.len() as f64;
            assert!((0.65..=0.75).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn checkerboard_is_deterministic_and_tile_consistent() {
        let ds = grid(64);
        let a = checkerboard_split(&ds, 8, 0.7, 3).unwrap();
        let b = checkerboard_split(&ds, 8, 0.7, 3).unwrap();
        assert_eq!(a.partition(), b.partition());
        let pos = ds.grid_pos().unwrap();
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                if pos[i].0 / 8 == pos[j].0 / 8 && pos[i].1 / 8 == pos[j].1 / 8 {
                    assert_eq!(a.partition()[i], a.partition()[j]);
                }
            }
        }
    }

    #[test]
    fn checkerboard_degenerate_and_bad_fraction() {
        let ds = grid(10);
        let err = checkerboard_split(&ds, 50, 0.7, 1).unwrap_err().to_string();
        assert!(err.contains("partition degenerate"), "{err}");
        assert!(checkerboard_split(&ds, 2, 1.0, 1).is_err());
        assert!(checkerboard_split(&ds, 2, 0.0, 1).is_err());
    }

    #[test]
    fn checkerboard_without_grid_blocks_rows() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let labels = (0..1000).map(|i| (i % 3 == 0) as u8).collect();
        let ds = Dataset::new(vec!["x".into()], rows, labels, None).unwrap();
        let s = checkerboard_split(&ds, 5, 0.7, 9).unwrap();
        let frac = s.train_indices().len() as f64 / 1000.0;
        assert!((frac - 0.7).abs() <= 0.05);
        for blk in s.partition().chunks(5) {
            assert!(blk.iter().all(|t| *t == blk[0]));
        }
    }

    fn tagged(n_train: usize, n_test: usize) -> Dataset {
        let n = n_train + n_test;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        let mut ds = Dataset::new(vec!["x".into()], rows, labels, None).unwrap();
        let tags = (0..n)
            .map(|i| if i < n_train { Partition::Train } else { Partition::Test })
            .collect();
        ds.set_partition(tags).unwrap();
        ds
    }

    #[test]
    fn cv_subsample_halves_each_partition() {
        let ds = tagged(1000, 400);
        let (tr, te) = cv_subsample(&ds, 0, 11).unwrap();
        assert_eq!(tr.len(), 500);
        assert_eq!(te.len(), 200);
        assert!(tr.iter().all(|&i| ds.partition()[i] == Partition::Train));
        assert!(te.iter().all(|&i| ds.partition()[i] == Partition::Test));
        assert_eq!((tr.clone(), te.clone()), cv_subsample(&ds, 0, 11).unwrap());
        let mut distinct = HashSet::new();
        for trial in 0..10 {
            distinct.insert(cv_subsample(&ds, trial, 11).unwrap().0);
        }
        assert_eq!(distinct.len(), 10);
        assert!(cv_subsample(&tagged(5, 1), 0, 1).is_err());
    }

    #[test]
    fn class_weight_ratios() {
        let mk = |neg: usize, pos: usize| {
            let labels: Vec<u8> = (0..neg + pos).map(|i| (i >= neg) as u8).collect();
            let rows = (0..neg + pos).map(|i| vec![i as f64]).collect();
            Dataset::new(vec!["x".into()], rows, labels, None).unwrap()
        };
        assert_eq!(class_weights(&mk(100, 100)).unwrap(), (1.0, 1.0));
        let (wp, wn) = class_weights(&mk(993, 7)).unwrap();
        assert!((wp - 993.0 / 7.0).abs() < 1e-12 && (wp - 141.857).abs() < 1e-3);
        assert_eq!(wn, 1.0);
        assert!(class_weights(&mk(10, 0)).is_err());
    }

    #[test]
    fn standardizer_fit_apply_and_zero_variance() {
        let a = [1.0, 2.0, 3.0, 10.0, -4.0];
        let b = [5.0, 5.0, 5.0, 5.0, 5.0];
        let rows: Vec<usize> = (0..5).collect();
        let s = Standardizer::fit(&[&a], &rows, &["a".into()]).unwrap();
        let z: Vec<f64> = a.iter().map(|&v| s.apply(0, v)).collect();
        let m = z.iter().sum::<f64>() / 5.0;
        let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 5.0).sqrt();
        assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        let err = Standardizer::fit(&[&a, &b], &rows, &["a".into(), "flat".into()])
            .unwrap_err()
            .to_string();
        assert!(err.contains("flat"), "{err}");
    }

    proptest::proptest! {
        #[test]
        fn standardizer_normalizes_own_fit(
            vals in proptest::collection::vec(-1e3f64..1e3, 3..60)
        ) {
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
                - vals.iter().cloned().fold(f64::MAX, f64::min);
            proptest::prop_assume!(spread > 1e-3);
            let rows: Vec<usize> = (0..vals.len()).collect();
            let s = Standardizer::fit(&[&vals], &rows, &["v".into()]).unwrap();
            let z: Vec<f64> = vals.iter().map(|&v| s.apply(0, v)).collect();
            let n = z.len() as f64;
            let m = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            proptest::prop_assert!(m.abs() < 1e-9);
            proptest::prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }
}
