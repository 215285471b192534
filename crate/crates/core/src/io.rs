//! Text file formats: ASCII grids, sample CSV files and model-set documents.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassId, ClassInfo, ClassTable, GridGeometry, ProportionVector, Raster, SamplePoint, SampleSet};
use crate::model::{Knot, ModelKind, ModelSpec};
use crate::modelset::{validate_model_set, TransiogramModelSet, ValidationReport};

/// NODATA marker written by [`write_ascii_grid`].
pub const DEFAULT_NODATA: i64 = -9999;

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

/// Parses an ASCII grid. Data rows run from the top (northernmost) row down.
/// With `n_classes = None` the class count is one more than the largest label.
pub fn parse_ascii_grid<R: Read>(input: R, path: Option<&Path>, n_classes: Option<usize>) -> Result<Raster> {
    let reader = BufReader::new(input);
    let mut header: HashMap<&str, (String, usize)> = HashMap::new();
    let mut values: Vec<i64> = Vec::new();
    let mut ncols = None;
    let mut rows_seen = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let first = t.split_whitespace().next().unwrap_or_default();
        let key = first.to_ascii_lowercase();
        if values.is_empty() && rows_seen == 0 && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            let Some(k) = HEADER_KEYS.iter().find(|k| **k == key) else {
                return Err(Error::parse(path, lineno, format!("unknown header key `{first}`")));
            };
            let mut parts = t.split_whitespace();
            parts.next();
            let (Some(v), None) = (parts.next(), parts.next()) else {
                return Err(Error::parse(path, lineno, format!("header `{first}` needs exactly one value")));
            };
            if header.insert(k, (v.to_string(), lineno)).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate header `{first}`")));
            }
            continue;
        }
        if ncols.is_none() {
            ncols = Some(header_usize(&header, "ncols", path, lineno)?);
        }
        let mut n = 0;
        for tok in t.split_whitespace() {
            let v: i64 =
                tok.parse().map_err(|_| Error::parse(path, lineno, format!("label `{tok}` is not an integer")))?;
            values.push(v);
            n += 1;
        }
        if Some(n) != ncols {
            return Err(Error::parse(path, lineno, format!("row has {n} values, expected {}", ncols.unwrap_or(0))));
        }
        rows_seen += 1;
    }
    let last_line = header.values().map(|(_, l)| *l).max().unwrap_or(0);
    let ncols = header_usize(&header, "ncols", path, last_line)?;
    let nrows = header_usize(&header, "nrows", path, last_line)?;
    let xll = header_f64(&header, "xllcorner", path, last_line)?;
    let yll = header_f64(&header, "yllcorner", path, last_line)?;
    let cell = header_f64(&header, "cellsize", path, last_line)?;
    let nodata = match header.get("nodata_value") {
        Some((v, l)) => {
            v.parse::<i64>().map_err(|_| Error::parse(path, *l, format!("NODATA_value `{v}` is not an integer")))?
        }
        None => DEFAULT_NODATA,
    };
    if rows_seen != nrows {
        return Err(Error::parse(path, last_line, format!("expected {nrows} rows, found {rows_seen}")));
    }
    let geometry = GridGeometry::new(nrows, ncols, cell, xll, yll)?;
    let max = values.iter().filter(|&&v| v != nodata).copied().max();
    if let Some(bad) = values.iter().find(|&&v| v != nodata && v < 0) {
        return Err(Error::Data(format!("negative class label {bad}")));
    }
    let n_classes = match n_classes {
        Some(n) => n,
        None => max.map(|m| m as usize + 1).unwrap_or(1),
    };
    let mut labels = vec![None; nrows * ncols];
    for (k, &v) in values.iter().enumerate() {
        let (top_row, col) = (k / ncols, k % ncols);
        let row = nrows - 1 - top_row;
        labels[row * ncols + col] = (v != nodata).then_some(v as ClassId);
    }
    Raster::from_labels(geometry, n_classes, &labels)
}

fn header_usize(h: &HashMap<&str, (String, usize)>, key: &str, path: Option<&Path>, line: usize) -> Result<usize> {
    let (v, l) = h.get(key).ok_or_else(|| Error::parse(path, line, format!("missing header `{key}`")))?;
    v.parse().map_err(|_| Error::parse(path, *l, format!("header `{key}` value `{v}` is not a nonnegative integer")))
}

fn header_f64(h: &HashMap<&str, (String, usize)>, key: &str, path: Option<&Path>, line: usize) -> Result<f64> {
    let (v, l) = h.get(key).ok_or_else(|| Error::parse(path, line, format!("missing header `{key}`")))?;
    v.parse().map_err(|_| Error::parse(path, *l, format!("header `{key}` value `{v}` is not a number")))
}

pub fn read_ascii_grid(path: &Path, n_classes: Option<usize>) -> Result<Raster> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_grid(f, Some(path), n_classes)
}

fn grid_header(g: &GridGeometry, nodata: &str) -> String {
    format!(
        "ncols {}\nnrows {}\nxllcorner {:?}\nyllcorner {:?}\ncellsize {:?}\nNODATA_value {}\n",
        g.ncols, g.nrows, g.origin_x, g.origin_y, g.cell_size, nodata
    )
}

pub fn format_ascii_grid(r: &Raster) -> String {
    let g = r.geometry();
    let mut s = grid_header(g, &DEFAULT_NODATA.to_string());
    for row in (0..g.nrows).rev() {
        for col in 0..g.ncols {
            if col > 0 {
                s.push(' ');
            }
            match r.get(row, col) {
                Some(l) => write!(s, "{l}").unwrap(),
                None => write!(s, "{DEFAULT_NODATA}").unwrap(),
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_ascii_grid(path: &Path, r: &Raster) -> Result<()> {
    write_text(path, &format_ascii_grid(r))
}

/// Real-valued grid (e.g. occurrence probabilities) in the same layout.
pub fn write_ascii_real_grid(path: &Path, g: &GridGeometry, values: &[f64]) -> Result<()> {
    if values.len() != g.n_cells() {
        return Err(Error::Argument(format!("{} values for {} cells", values.len(), g.n_cells())));
    }
    let mut s = grid_header(g, &DEFAULT_NODATA.to_string());
    for row in (0..g.nrows).rev() {
        let line: Vec<String> = (0..g.ncols).map(|c| format!("{}", values[g.index(row, c)])).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

pub(crate) fn write_text(path: &Path, s: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize, Serialize)]
struct SampleRecord {
    x: f64,
    y: f64,
    class: i64,
}

/// Reads `x,y,class` rows. With `n_classes = None` the class count is one
/// more than the largest class.
pub fn parse_samples_csv<R: Read>(input: R, path: Option<&Path>, n_classes: Option<usize>) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "class"] {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `x,y,class`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.deserialize::<SampleRecord>() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = points.len() + 2;
        if !rec.x.is_finite() || !rec.y.is_finite() {
            return Err(Error::parse(path, line, "coordinates must be finite"));
        }
        if rec.class < 0 || n_classes.is_some_and(|n| rec.class as usize >= n) {
            return Err(Error::Data(format!("line {line}: unknown class {}", rec.class)));
        }
        if !seen.insert((rec.x.to_bits(), rec.y.to_bits())) {
            return Err(Error::Data(format!("line {line}: duplicate coordinates ({}, {})", rec.x, rec.y)));
        }
        points.push(SamplePoint { x: rec.x, y: rec.y, class: rec.class as ClassId });
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("sample file has no points".into()));
    }
    let n = n_classes.unwrap_or_else(|| points.iter().map(|p| p.class).max().unwrap_or(0) + 1);
    SampleSet::new(points, n)
}

pub fn read_samples_csv(path: &Path, n_classes: Option<usize>) -> Result<SampleSet> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_samples_csv(f, Some(path), n_classes)
}

pub fn format_samples_csv(s: &SampleSet) -> String {
    let mut out = String::from("x,y,class\n");
    for p in s.points() {
        writeln!(out, "{:?},{:?},{}", p.x, p.y, p.class).unwrap();
    }
    out
}

pub fn write_samples_csv(path: &Path, s: &SampleSet) -> Result<()> {
    write_text(path, &format_samples_csv(s))
}

/// Serialized form of a model set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSetDocument {
    pub n_classes: usize,
    pub marginals: Vec<f64>,
    /// Lag up to which the set is validated on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<ClassInfo>,
    pub rows: Vec<RowDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDocument {
    pub tail: ClassId,
    /// Head of the row's `rest` entry; may be omitted when that entry is listed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_head: Option<ClassId>,
    pub entries: Vec<EntryDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDocument {
    pub head: ClassId,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sill: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<Knot>>,
}

impl EntryDocument {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            sill: self.sill,
            range: self.range,
            alpha: self.alpha,
            theta: self.theta,
            weight: self.weight,
            knots: self.knots.clone(),
        }
    }

    pub fn from_spec(head: ClassId, s: ModelSpec) -> Self {
        Self {
            head,
            kind: s.kind,
            sill: s.sill,
            range: s.range,
            alpha: s.alpha,
            theta: s.theta,
            weight: s.weight,
            knots: s.knots,
        }
    }
}

impl ModelSetDocument {
    pub fn from_set(set: &TransiogramModelSet) -> Self {
        let n = set.n_classes();
        Self {
            n_classes: n,
            marginals: set.marginals().as_slice().to_vec(),
            lag_max: set.validated_lag_max(),
            classes: set.classes().classes.clone(),
            rows: (0..n)
                .map(|i| RowDocument {
                    tail: i,
                    rest_head: Some(set.rest_head(i)),
                    entries: (0..n).map(|j| EntryDocument::from_spec(j, ModelSpec::from(set.entry(i, j)))).collect(),
                })
                .collect(),
        }
    }

    /// Builds the set without validating it.
    pub fn to_set(&self) -> Result<TransiogramModelSet> {
        let n = self.n_classes;
        if self.marginals.len() != n {
            return Err(Error::Schema(format!("{} marginals for {n} classes", self.marginals.len())));
        }
        let marginals = ProportionVector::new(self.marginals.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        let classes = if self.classes.is_empty() {
            None
        } else {
            Some(ClassTable::new(self.classes.clone()).map_err(|e| Error::Schema(e.to_string()))?)
        };
        let mut by_tail: Vec<Option<&RowDocument>> = vec![None; n];
        for row in &self.rows {
            if row.tail >= n {
                return Err(Error::Schema(format!("row tail {} out of range", row.tail)));
            }
            if by_tail[row.tail].replace(row).is_some() {
                return Err(Error::Schema(format!("row {} listed twice", row.tail)));
            }
        }
        let mut specs = HashMap::new();
        for (i, row) in by_tail.iter().enumerate() {
            let row = row.ok_or_else(|| Error::Schema(format!("row {i} is missing")))?;
            let rests: Vec<ClassId> =
                row.entries.iter().filter(|e| e.kind == ModelKind::Rest).map(|e| e.head).collect();
            let rest_head = match (row.rest_head, rests.as_slice()) {
                (Some(h), []) | (Some(h), [_]) if rests.first().is_none_or(|&r| r == h) => h,
                (None, [h]) => *h,
                _ => {
                    return Err(Error::Schema(format!(
                        "row {i} must have exactly one rest entry (rest_head {:?}, rest entries at {rests:?})",
                        row.rest_head
                    )))
                }
            };
            for e in &row.entries {
                if e.head >= n {
                    return Err(Error::Schema(format!("entry ({i}, {}) head out of range", e.head)));
                }
                if specs.insert((i, e.head), e.spec()).is_some() {
                    return Err(Error::Schema(format!("entry ({i}, {}) listed twice", e.head)));
                }
            }
            if rest_head >= n {
                return Err(Error::Schema(format!("row {i}: rest head {rest_head} out of range")));
            }
            specs.entry((i, rest_head)).or_insert_with(ModelSpec::rest);
        }
        crate::modelset::set_from_specs(&specs, marginals, classes)
    }
}

fn toml_line(src: &str, e: &toml::de::Error) -> usize {
    e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1).unwrap_or(0)
}

/// Parses a model-set document and validates it up to its `lag_max`
/// (or `default_lag_max`). Invalid sets are returned with a failing report.
pub fn parse_modelset(
    src: &str,
    path: Option<&Path>,
    default_lag_max: f64,
) -> Result<(TransiogramModelSet, ValidationReport)> {
    let doc: ModelSetDocument = toml::from_str(src).map_err(|e| Error::parse(path, toml_line(src, &e), e.message()))?;
    let mut set = doc.to_set()?;
    let report = validate_model_set(&mut set, doc.lag_max.unwrap_or(default_lag_max))?;
    Ok((set, report))
}

pub fn read_modelset(path: &Path, default_lag_max: f64) -> Result<(TransiogramModelSet, ValidationReport)> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_modelset(&src, Some(path), default_lag_max)
}

pub fn format_modelset(set: &TransiogramModelSet) -> Result<String> {
    toml::to_string(&ModelSetDocument::from_set(set))
        .map_err(|e| Error::Schema(format!("cannot serialize model set: {e}")))
}

pub fn write_modelset(path: &Path, set: &TransiogramModelSet) -> Result<()> {
    write_text(path, &format_modelset(set)?)
}

/// Writes any serializable value as pretty TOML.
pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = toml::to_string(value).map_err(|e| Error::Schema(format!("cannot serialize: {e}")))?;
    write_text(path, &s)
}

pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}
