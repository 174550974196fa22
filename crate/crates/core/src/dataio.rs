//! Observation ingestion and preprocessing: CSV in and out, log returns,
//! normal-scores transform, 1/n sample covariances and seeded splits.
//!
//! Rows are treated as independent observations even when they come from a
//! time series.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::objective::{CovarianceSet, PrecisionSet};

/// K groups of observations (rows) over the same named variables (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    names: Vec<String>,
    groups: Vec<DMatrix<f64>>,
}

impl ObservationSet {
    pub fn new(names: Vec<String>, groups: Vec<DMatrix<f64>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Invalid("need at least one group".into()));
        }
        for (k, g) in groups.iter().enumerate() {
            if g.ncols() != names.len() {
                return Err(Error::Dimension(format!(
                    "group {k} has {} columns but there are {} variable names",
                    g.ncols(),
                    names.len()
                )));
            }
        }
        Ok(ObservationSet { names, groups })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn group(&self, k: usize) -> &DMatrix<f64> {
        &self.groups[k]
    }

    pub fn groups(&self) -> &[DMatrix<f64>] {
        &self.groups
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(DMatrix::nrows).collect()
    }

    /// Applies `f` to every group.
    pub fn try_map(&self, f: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>) -> Result<Self> {
        let groups = self.groups.iter().map(f).collect::<Result<Vec<_>>>()?;
        ObservationSet::new(self.names.clone(), groups)
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads one numeric CSV. Returns the header (if requested) and the rows.
fn read_numeric_csv(path: &Path, has_header: bool) -> Result<(Option<Vec<String>>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut header = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut nrows = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx as u64 + 1;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if idx == 0 && has_header {
            header = Some(rec.iter().map(str::to_owned).collect::<Vec<_>>());
            width = Some(rec.len());
            continue;
        }
        match width {
            Some(w) if w != rec.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {w} fields, found {}", rec.len()),
                ))
            }
            None => width = Some(rec.len()),
            _ => {}
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(path, line, format!("column {}: not a number: {cell:?}", col + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    format!("column {}: non-finite value {cell:?}", col + 1),
                ));
            }
            rows.push(v);
        }
        nrows += 1;
    }
    let width = width.ok_or_else(|| parse_err(path, 0, "file is empty"))?;
    Ok((header, DMatrix::from_row_slice(nrows, width, &rows)))
}

/// Loads one observation CSV per group. With `has_header` the first row gives
/// the variable names, which must agree across files; otherwise names are
/// `V1..Vp`.
pub fn load_csv<P: AsRef<Path>>(paths: &[P], has_header: bool) -> Result<ObservationSet> {
    if paths.is_empty() {
        return Err(Error::Invalid("no input files".into()));
    }
    let mut names: Option<Vec<String>> = None;
    let mut groups = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let (header, data) = read_numeric_csv(path, has_header)?;
        let these = header.unwrap_or_else(|| (1..=data.ncols()).map(|j| format!("V{j}")).collect());
        match &names {
            Some(n) if n != &these => {
                return Err(parse_err(
                    path,
                    1,
                    format!("columns {these:?} do not match earlier files {n:?}"),
                ))
            }
            None => names = Some(these),
            _ => {}
        }
        groups.push(data);
    }
    ObservationSet::new(names.unwrap_or_default(), groups)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// CSV bytes with a header row; values use Rust's shortest round-trip
/// formatting, so re-reading reproduces them bit for bit.
pub fn matrix_csv(names: &[String], m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names)?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_matrix_csv(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, &matrix_csv(names, m)?)
}

/// Writes each group to `dir/<stem>_<k>.csv` (1-based) and returns the paths.
pub fn write_observations(obs: &ObservationSet, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    obs.groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let path = dir.join(format!("{stem}_{}.csv", k + 1));
            write_matrix_csv(&path, &obs.names, g)?;
            Ok(path)
        })
        .collect()
}

/// Reads square symmetric matrices (covariances or precisions) with a header
/// row of variable names.
pub fn load_sym_matrices<P: AsRef<Path>>(paths: &[P]) -> Result<(Vec<String>, Vec<SymMatrix>)> {
    let obs = load_csv(paths, true)?;
    let mut out = Vec::with_capacity(obs.k());
    for (path, g) in paths.iter().zip(&obs.groups) {
        if g.nrows() != g.ncols() {
            return Err(parse_err(
                path.as_ref(),
                0,
                format!("expected a square matrix, got {}x{}", g.nrows(), g.ncols()),
            ));
        }
        out.push(
            SymMatrix::from_dense_checked(g, 1e-9)
                .map_err(|e| parse_err(path.as_ref(), 0, e.to_string()))?,
        );
    }
    Ok((obs.names, out))
}

/// Row `i` of the output is `log(prices[i+1] / prices[i])`.
pub fn log_returns(prices: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if prices.nrows() < 2 {
        return Err(Error::Invalid("need at least two price rows".into()));
    }
    for i in 0..prices.nrows() {
        for j in 0..prices.ncols() {
            let v = prices[(i, j)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "price at row {}, column {} is not positive: {v}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(DMatrix::from_fn(prices.nrows() - 1, prices.ncols(), |i, j| {
        (prices[(i + 1, j)] / prices[(i, j)]).ln()
    }))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Per-column normal scores `Φ⁻¹((rank − 0.5)/n)`.
pub fn gaussianize(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Invalid("need at least two rows to rank".into()));
    }
    let normal = Normal::standard();
    let mut out = DMatrix::zeros(n, x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            out[(i, j)] = normal.inverse_cdf((r - 0.5) / n as f64);
        }
    }
    Ok(out)
}

/// `S = (1/n) Σ (x − x̄)(x − x̄)ᵀ` for one group.
pub fn covariance_of(x: &DMatrix<f64>) -> SymMatrix {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n).collect();
    let mut centered = x.clone();
    for j in 0..p {
        centered.column_mut(j).add_scalar_mut(-means[j]);
    }
    let s = centered.transpose() * &centered / n;
    SymMatrix::from_fn(p, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
}

/// One 1/n covariance per group, with `n_k` the group's row count.
pub fn sample_covariance(obs: &ObservationSet) -> CovarianceSet {
    let s = obs.groups.iter().map(covariance_of).collect();
    let n = obs.groups.iter().map(|g| g.nrows() as f64).collect();
    CovarianceSet::new(s, n).expect("observation groups share p and have rows")
}

/// Per-group random row split. Each side gets `round(train_frac·n_k)` /
/// the remainder, with at least two rows each; rows keep their original
/// order within each part.
pub fn split(
    obs: &ObservationSet,
    train_frac: f64,
    seed: u64,
) -> Result<(ObservationSet, ObservationSet)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Invalid(format!("train_frac must be in (0, 1), got {train_frac}")));
    }
    let mut train = Vec::with_capacity(obs.k());
    let mut hold = Vec::with_capacity(obs.k());
    for (k, g) in obs.groups.iter().enumerate() {
        let n = g.nrows();
        if n < 4 {
            return Err(Error::Invalid(format!(
                "group {} has {n} rows; a split needs at least 4",
                k + 1
            )));
        }
        let n_train = ((train_frac * n as f64).round() as usize).clamp(2, n - 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (a, b) = idx.split_at_mut(n_train);
        a.sort_unstable();
        b.sort_unstable();
        train.push(g.select_rows(a.iter()));
        hold.push(g.select_rows(b.iter()));
    }
    Ok((
        ObservationSet::new(obs.names.clone(), train)?,
        ObservationSet::new(obs.names.clone(), hold)?,
    ))
}

/// Writes precision matrices as `precision_<k>.csv` (1-based) in `dir`.
pub fn write_precisions(omega: &PrecisionSet, names: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    omega
        .matrices()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let path = dir.join(format!("precision_{}.csv", k + 1));
            write_matrix_csv(&path, names, &m.to_dense())?;
            Ok(path)
        })
        .collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
