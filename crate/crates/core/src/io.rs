//! Ingestion of embeddings and similarity matrices, and CSV persistence.
//!
//! Two CSV layouts are understood:
//!
//! * embeddings: header `id,dim_0,..,dim_{D-1}`, one item per row;
//! * square matrices: header row and first column both carry item ids,
//!   cell `(i, j)` holds the pairwise value.
//!
//! Lines starting with `#` are comments and are skipped on read.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSetKind {
    Embeddings,
    Similarity,
}

impl FromStr for PointSetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embeddings" | "embedding" => Ok(Self::Embeddings),
            "similarity" => Ok(Self::Similarity),
            other => Err(Error::Parse(format!("unknown point set kind `{other}`"))),
        }
    }
}

impl fmt::Display for PointSetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Embeddings => f.write_str("embeddings"),
            Self::Similarity => f.write_str("similarity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// N rows of D coordinates.
    Embeddings(Vec<Vec<f64>>),
    /// Row-major N x N similarity values.
    Similarity(Vec<f64>),
}

/// A raw representational space: N identified items, either as vectors or
/// through their pairwise similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    ids: Vec<String>,
    payload: Payload,
}

impl PointSet {
    pub fn from_embeddings(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Validation(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        check_len(ids.len())?;
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::Validation("embeddings have zero dimensions".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("row {i} holds non-finite value {v}")));
            }
        }
        Ok(Self {
            ids,
            payload: Payload::Embeddings(rows),
        })
    }

    /// `values` is row-major N x N.
    pub fn from_similarity(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        check_len(n)?;
        if values.len() != n * n {
            return Err(Error::Validation(format!(
                "similarity matrix has {} entries, expected {}",
                values.len(),
                n * n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let s = values[i * n + j];
                if !s.is_finite() {
                    return Err(Error::Validation(format!("non-finite similarity at ({i}, {j})")));
                }
                if s < 0.0 {
                    return Err(Error::Validation(format!("negative similarity {s} at ({i}, {j})")));
                }
                if j > i && (s - values[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "similarity is asymmetric at ({i}, {j}): {s} vs {}",
                        values[j * n + i]
                    )));
                }
            }
        }
        Ok(Self {
            ids,
            payload: Payload::Similarity(values),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn kind(&self) -> PointSetKind {
        match self.payload {
            Payload::Embeddings(_) => PointSetKind::Embeddings,
            Payload::Similarity(_) => PointSetKind::Similarity,
        }
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    /// Embedding dimension, `None` for similarity payloads.
    pub fn dim(&self) -> Option<usize> {
        match &self.payload {
            Payload::Embeddings(rows) => Some(rows[0].len()),
            Payload::Similarity(_) => None,
        }
    }

    /// Restriction to the given item indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        match &self.payload {
            Payload::Embeddings(rows) => {
                Self::from_embeddings(ids, indices.iter().map(|&i| rows[i].clone()).collect())
            }
            Payload::Similarity(values) => {
                let n = self.len();
                let mut sub = Vec::with_capacity(indices.len() * indices.len());
                for &i in indices {
                    for &j in indices {
                        sub.push(values[i * n + j]);
                    }
                }
                Self::from_similarity(ids, sub)
            }
        }
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 items, got {n}")));
    }
    Ok(())
}

/// Where a dissimilarity came from. Also serves as the RDM metric tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Metric {
    Euclidean,
    Cosine,
    Minkowski(f64),
    /// `d = max(0, 1 - s)` applied to a similarity matrix.
    FromSimilarity,
    ShortestPath,
    FlowMetric,
}

/// Minkowski exponent used when none is given.
pub const DEFAULT_MINKOWSKI_P: f64 = 3.0;

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean => f.write_str("euclidean"),
            Self::Cosine => f.write_str("cosine"),
            Self::Minkowski(p) => write!(f, "minkowski:{p}"),
            Self::FromSimilarity => f.write_str("from_similarity"),
            Self::ShortestPath => f.write_str("shortest_path"),
            Self::FlowMetric => f.write_str("flow_metric"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let metric = match lower.as_str() {
            "euclidean" => Self::Euclidean,
            "cosine" => Self::Cosine,
            "minkowski" => Self::Minkowski(DEFAULT_MINKOWSKI_P),
            "from_similarity" | "similarity" => Self::FromSimilarity,
            "shortest_path" => Self::ShortestPath,
            "flow_metric" | "flow" => Self::FlowMetric,
            other => match other.strip_prefix("minkowski:") {
                Some(p) => Self::Minkowski(
                    p.parse()
                        .map_err(|_| Error::InvalidMetric(format!("bad Minkowski exponent `{p}`")))?,
                ),
                None => return Err(Error::InvalidMetric(format!("unknown metric `{s}`"))),
            },
        };
        Ok(metric)
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> Self {
        m.to_string()
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Symmetric, zero-diagonal, nonnegative N x N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    /// Validates the metric-matrix invariants on a row-major buffer.
    pub fn new(n: usize, values: Vec<f64>, metric: Metric) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Validation(format!(
                "distance matrix has {} entries, expected {}",
                values.len(),
                n * n
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!("invalid distance {v} at ({i}, {j})")));
                }
                if v != values[j * n + i] {
                    return Err(Error::Validation(format!("asymmetric distance at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, values, metric })
    }

    /// Builds from a pairwise function evaluated on the strict upper triangle.
    pub(crate) fn from_upper(n: usize, metric: Metric, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self { n, values, metric }
    }

    pub(crate) fn from_raw(n: usize, values: Vec<f64>, metric: Metric) -> Self {
        debug_assert_eq!(values.len(), n * n);
        Self { n, values, metric }
    }

    /// Same values under a different source tag.
    pub fn retagged(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }
}

/// Converts a point set into pairwise distances.
///
/// Similarity payloads only accept [`Metric::FromSimilarity`]; embeddings
/// accept Euclidean, cosine and Minkowski (p >= 1).
pub fn to_distance(ps: &PointSet, metric: Metric) -> Result<DistanceMatrix> {
    let n = ps.len();
    match (&ps.payload, metric) {
        (Payload::Similarity(s), Metric::FromSimilarity) => Ok(DistanceMatrix::from_upper(
            n,
            metric,
            |i, j| (1.0 - s[i * n + j]).max(0.0),
        )),
        (Payload::Similarity(_), other) => Err(Error::InvalidMetric(format!(
            "similarity input requires from_similarity, got {other}"
        ))),
        (Payload::Embeddings(rows), Metric::Euclidean) => {
            Ok(DistanceMatrix::from_upper(n, metric, |i, j| minkowski(&rows[i], &rows[j], 2.0)))
        }
        (Payload::Embeddings(rows), Metric::Minkowski(p)) => {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::InvalidMetric(format!("Minkowski exponent {p} < 1")));
            }
            Ok(DistanceMatrix::from_upper(n, metric, |i, j| minkowski(&rows[i], &rows[j], p)))
        }
        (Payload::Embeddings(rows), Metric::Cosine) => {
            let norms: Vec<f64> = rows.iter().map(|r| dot(r, r).sqrt()).collect();
            if let Some(i) = norms.iter().position(|&v| v == 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "zero-norm vector `{}` under cosine distance",
                    ps.ids[i]
                )));
            }
            Ok(DistanceMatrix::from_upper(n, metric, |i, j| {
                (1.0 - dot(&rows[i], &rows[j]) / (norms[i] * norms[j])).max(0.0)
            }))
        }
        (Payload::Embeddings(_), other) => Err(Error::InvalidMetric(format!(
            "{other} is not an embedding metric"
        ))),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    }
    if p == 1.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(false).comment(Some(b'#')).trim(csv::Trim::All);
    b
}

fn parse_cell(cell: &str, line: usize, col: usize) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}, column {col}: `{cell}` is not a number")))
}

/// Reads a point set from a file; see the module docs for the layouts.
pub fn load_pointset(path: impl AsRef<Path>, kind: PointSetKind) -> Result<PointSet> {
    read_pointset(File::open(path)?, kind)
}

pub fn read_pointset<R: Read>(reader: R, kind: PointSetKind) -> Result<PointSet> {
    let records = read_records(reader)?;
    match kind {
        PointSetKind::Embeddings => {
            let (ids, rows) = parse_embeddings(&records)?;
            PointSet::from_embeddings(ids, rows)
        }
        PointSetKind::Similarity => {
            let (ids, values) = parse_square(&records)?;
            PointSet::from_similarity(ids, values)
        }
    }
}

fn read_records<R: Read>(reader: R) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = reader_builder().from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec.map_err(|e| Error::Parse(e.to_string()))?);
    }
    if records.is_empty() {
        return Err(Error::Parse("empty CSV".into()));
    }
    Ok(records)
}

fn parse_embeddings(records: &[csv::StringRecord]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let width = records[0].len();
    if width < 2 {
        return Err(Error::Parse("embeddings CSV needs an id column and at least one dimension".into()));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in records.iter().enumerate().skip(1) {
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "line {}: {} fields, header has {width}",
                line + 1,
                rec.len()
            )));
        }
        ids.push(rec[0].to_string());
        let row = (1..width)
            .map(|c| parse_cell(&rec[c], line + 1, c))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((ids, rows))
}

fn parse_square(records: &[csv::StringRecord]) -> Result<(Vec<String>, Vec<f64>)> {
    let header: Vec<String> = records[0].iter().skip(1).map(str::to_string).collect();
    let n = header.len();
    if records.len() - 1 != n {
        return Err(Error::Parse(format!(
            "square matrix has {n} header ids but {} rows",
            records.len() - 1
        )));
    }
    let mut values = Vec::with_capacity(n * n);
    for (r, rec) in records[1..].iter().enumerate() {
        if rec.len() != n + 1 {
            return Err(Error::Parse(format!("line {}: expected {} fields", r + 2, n + 1)));
        }
        if rec[0] != header[r] {
            return Err(Error::Parse(format!(
                "row id `{}` does not match column id `{}`",
                &rec[0], header[r]
            )));
        }
        for c in 1..=n {
            values.push(parse_cell(&rec[c], r + 2, c)?);
        }
    }
    Ok((header, values))
}

/// Reads a square matrix CSV as a distance matrix tagged with `metric`.
pub fn load_distance_matrix(
    path: impl AsRef<Path>,
    metric: Metric,
) -> Result<(Vec<String>, DistanceMatrix)> {
    let records = read_records(File::open(path)?)?;
    let (ids, values) = parse_square(&records)?;
    let n = ids.len();
    Ok((ids, DistanceMatrix::new(n, values, metric)?))
}

fn format_value(v: f64) -> String {
    // `{}` on f64 is the shortest round-tripping representation.
    format!("{v}")
}

fn write_comment<W: Write>(w: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// Writes embeddings or a similarity matrix in the layout `read_pointset` expects.
pub fn write_pointset<W: Write>(mut w: W, ps: &PointSet, comment: Option<&str>) -> Result<()> {
    write_comment(&mut w, comment)?;
    match &ps.payload {
        Payload::Embeddings(rows) => {
            let mut wtr = csv::Writer::from_writer(w);
            let mut header = vec!["id".to_string()];
            header.extend((0..rows[0].len()).map(|d| format!("dim_{d}")));
            wtr.write_record(&header)?;
            for (id, row) in ps.ids.iter().zip(rows) {
                let mut rec = vec![id.clone()];
                rec.extend(row.iter().map(|&v| format_value(v)));
                wtr.write_record(&rec)?;
            }
            wtr.flush()?;
            Ok(())
        }
        Payload::Similarity(values) => write_square(w, &ps.ids, values, None),
    }
}

/// Writes an N x N matrix with ids on both axes.
pub fn write_square<W: Write>(mut w: W, ids: &[String], values: &[f64], comment: Option<&str>) -> Result<()> {
    write_comment(&mut w, comment)?;
    let n = ids.len();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string()];
    header.extend(ids.iter().cloned());
    wtr.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(values[i * n..(i + 1) * n].iter().map(|&v| format_value(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_pointset(path: impl AsRef<Path>, ps: &PointSet, comment: Option<&str>) -> Result<()> {
    write_pointset(File::create(path)?, ps, comment)
}
