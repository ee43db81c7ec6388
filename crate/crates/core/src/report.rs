//! Serialization of reports, tables, matrices and state files.
//!
//! Floats are written with 17 significant digits so that parsing them back is bit-exact.
//! Non-finite values are written as the literals `nan`, `inf` and `-inf` in both JSON and CSV.

use crate::error::{Error, Result};
use crate::fem::{Dims, StateVector};
use crate::linalg::Csr;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_value::Value;
use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Serde(format!("unsupported format '{s}'"))),
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "nan" | "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| Error::Serde(format!("not a number: '{t}'"))),
    }
}

struct Digits17(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        })*
    };
}

impl Formatter for Digits17 {
    delegate!(begin_array, end_array, begin_object, end_object, end_array_value, end_object_value);

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
}

fn to_json_value(v: Value, path: &str, non_finite: &mut Vec<String>) -> serde_json::Value {
    use serde_json::Value as J;
    let float = |x: f64, non_finite: &mut Vec<String>| {
        if x.is_finite() {
            J::from(x)
        } else {
            non_finite.push(path.to_string());
            J::String(fmt_f64(x))
        }
    };
    match v {
        Value::Bool(b) => J::Bool(b),
        Value::U8(x) => J::from(x),
        Value::U16(x) => J::from(x),
        Value::U32(x) => J::from(x),
        Value::U64(x) => J::from(x),
        Value::I8(x) => J::from(x),
        Value::I16(x) => J::from(x),
        Value::I32(x) => J::from(x),
        Value::I64(x) => J::from(x),
        Value::F32(x) => float(x as f64, non_finite),
        Value::F64(x) => float(x, non_finite),
        Value::Char(c) => J::String(c.to_string()),
        Value::String(s) => J::String(s),
        Value::Unit | Value::Option(None) => J::Null,
        Value::Option(Some(b)) | Value::Newtype(b) => to_json_value(*b, path, non_finite),
        Value::Seq(items) => J::Array(items.into_iter().enumerate().map(|(i, x)| to_json_value(x, &format!("{path}[{i}]"), non_finite)).collect()),
        Value::Map(m) => J::Object(
            m.into_iter()
                .map(|(k, x)| {
                    let key = match k {
                        Value::String(s) => s,
                        other => format!("{other:?}"),
                    };
                    let sub = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                    (key.clone(), to_json_value(x, &sub, non_finite))
                })
                .collect(),
        ),
        Value::Bytes(b) => J::Array(b.into_iter().map(J::from).collect()),
    }
}

fn from_json_value(v: serde_json::Value) -> Value {
    use serde_json::Value as J;
    match v {
        J::Null => Value::Unit,
        J::Bool(b) => Value::Bool(b),
        J::Number(n) => {
            if let Some(u) = n.as_u64() {
                Value::U64(u)
            } else if let Some(i) = n.as_i64() {
                Value::I64(i)
            } else {
                Value::F64(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        J::String(s) => match s.as_str() {
            "nan" | "inf" | "-inf" => Value::F64(parse_f64(&s).unwrap()),
            _ => Value::String(s),
        },
        J::Array(a) => Value::Seq(a.into_iter().map(from_json_value).collect()),
        J::Object(m) => Value::Map(m.into_iter().map(|(k, x)| (Value::String(k), from_json_value(x))).collect::<BTreeMap<_, _>>()),
    }
}

/// Pretty JSON with 17-digit floats; also returns the paths of non-finite fields.
pub fn to_json_flagged<T: Serialize>(v: &T) -> Result<(String, Vec<String>)> {
    let value = serde_value::to_value(v).map_err(|e| Error::Serde(e.to_string()))?;
    let mut non_finite = Vec::new();
    let json = to_json_value(value, "", &mut non_finite);
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    json.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok((String::from_utf8(buf).expect("json is utf-8"), non_finite))
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(to_json_flagged(v)?.0)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let json: serde_json::Value = serde_json::from_str(text)?;
    from_json_value(json).deserialize_into().map_err(|e| Error::Serde(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Num(x) => fmt_f64(*x),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a CSV produced by `to_csv`; numeric-looking cells become `Num`, integers `Int`.
    pub fn from_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Serde("empty csv".into()))?.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<Cell> = line
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    if let Ok(v) = s.parse::<i64>() {
                        Cell::Int(v)
                    } else if let Ok(v) = parse_f64(s) {
                        Cell::Num(v)
                    } else {
                        Cell::Text(s.to_string())
                    }
                })
                .collect();
            if row.len() != header.len() {
                return Err(Error::Serde(format!("csv row {} has {} fields, expected {}", i + 2, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }
}

/// Coordinate text format, 1-based indices.
pub fn matrix_market(a: &Csr) -> String {
    let t = a.triplets();
    let mut out = format!("%%MatrixMarket matrix coordinate real general\n{} {} {}\n", a.nrows, a.ncols, t.len());
    for (i, j, v) in t {
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, fmt_f64(v)));
    }
    out
}

pub fn parse_matrix_market(text: &str) -> Result<Csr> {
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let bad = |m: &str| Error::Serde(format!("matrix file: {m}"));
    let size: Vec<usize> = lines.next().ok_or_else(|| bad("missing size line"))?.split_whitespace().map(|s| s.parse().map_err(|_| bad("bad size line"))).collect::<Result<_>>()?;
    if size.len() != 3 {
        return Err(bad("size line needs rows, cols, nnz"));
    }
    let mut t = Vec::with_capacity(size[2]);
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(&format!("bad entry '{line}'")));
        }
        let i: usize = f[0].parse().map_err(|_| bad("bad row index"))?;
        let j: usize = f[1].parse().map_err(|_| bad("bad column index"))?;
        if i == 0 || j == 0 || i > size[0] || j > size[1] {
            return Err(bad(&format!("index ({i}, {j}) out of range")));
        }
        t.push((i - 1, j - 1, parse_f64(f[2])?));
    }
    if t.len() != size[2] {
        return Err(bad(&format!("expected {} entries, found {}", size[2], t.len())));
    }
    Ok(Csr::from_triplets(size[0], size[1], t))
}

pub const STATE_FIELDS: [&str; 5] = ["u", "h0", "h1", "w0", "w1"];

/// State file: `field,index,value` rows in blocks `u`, `h0`, `h1`, `w0`, `w1`.
pub fn state_csv(s: &StateVector) -> String {
    let mut t = Table::new(&["field", "index", "value"]);
    for (name, block) in s.blocks() {
        for (i, v) in block.iter().enumerate() {
            t.push(vec![name.into(), i.into(), (*v).into()]);
        }
    }
    t.to_csv()
}

pub fn parse_state_csv(text: &str, dims: &Dims) -> Result<StateVector> {
    let t = Table::from_csv(text)?;
    if t.header != ["field", "index", "value"] {
        return Err(Error::Serde(format!("state file header must be field,index,value, got {}", t.header.join(","))));
    }
    let mut s = StateVector::zeros(dims);
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let expected = [dims.n_u, dims.n_h, dims.n_h, dims.n_w, dims.n_w];
    for row in &t.rows {
        let (Cell::Text(name), Cell::Int(i)) = (&row[0], &row[1]) else {
            return Err(Error::Serde(format!("malformed state row {row:?}")));
        };
        let v = match &row[2] {
            Cell::Num(x) => *x,
            Cell::Int(x) => *x as f64,
            Cell::Text(x) => return Err(Error::Serde(format!("not a number: '{x}'"))),
        };
        let block = match name.as_str() {
            "u" => &mut s.u,
            "h0" => &mut s.h0,
            "h1" => &mut s.h1,
            "w0" => &mut s.w0,
            "w1" => &mut s.w1,
            _ => return Err(Error::Serde(format!("unknown state field '{name}'"))),
        };
        let i = *i as usize;
        if i >= block.len() {
            return Err(Error::Incompatible(format!("state dimension mismatch ({name}: index {i} but expected {} entries)", block.len())));
        }
        block[i] = v;
        *seen.entry(name.clone()).or_default() += 1;
    }
    let mut bad = Vec::new();
    for (name, n) in STATE_FIELDS.iter().zip(expected) {
        let got = seen.get(*name).copied().unwrap_or(0);
        if got != n {
            bad.push(format!("{name}: expected {n} entries, got {got}"));
        }
    }
    if !bad.is_empty() {
        return Err(Error::Incompatible(format!("state dimension mismatch ({})", bad.join("; "))));
    }
    Ok(s)
}

/// Vertex-value pressure table `x,y[,z],p`.
pub fn pressure_csv(dim: usize, points: &[[f64; 3]], p: &[f64]) -> String {
    let header: &[&str] = if dim == 3 { &["x", "y", "z", "p"] } else { &["x", "y", "p"] };
    let mut t = Table::new(header);
    for (x, v) in points.iter().zip(p) {
        let mut row: Vec<Cell> = x[..dim].iter().map(|c| Cell::Num(*c)).collect();
        row.push(Cell::Num(*v));
        t.push(row);
    }
    t.to_csv()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub status: String,
    pub outputs: Vec<String>,
    /// Report fields that held NaN or infinity.
    pub non_finite: Vec<String>,
    pub timings: Vec<Timing>,
}

/// Writes artifacts into one directory and remembers what was written.
#[derive(Debug)]
pub struct ArtifactWriter {
    pub dir: std::path::PathBuf,
    pub outputs: Vec<String>,
    pub non_finite: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), outputs: Vec::new(), non_finite: Vec::new() })
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::file(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let (text, nf) = to_json_flagged(v)?;
        self.non_finite.extend(nf.into_iter().map(|p| format!("{name}:{p}")));
        self.text(name, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        c: Option<f64>,
        n: usize,
        s: String,
    }

    #[test]
    fn json_floats_round_trip_bit_exactly() {
        let v = Sample { a: 0.1 + 0.2, b: vec![1.0 / 3.0, -2.5e-300, 1e300, 5e-324], c: None, n: 7, s: "x".into() };
        let text = to_json(&v).unwrap();
        let back: Sample = from_json(&text).unwrap();
        assert_eq!(back, v);
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
    }

    #[test]
    fn nan_is_a_literal_and_flagged() {
        let v = Sample { a: f64::NAN, b: vec![f64::INFINITY], c: Some(1.0), n: 0, s: String::new() };
        let (text, flagged) = to_json_flagged(&v).unwrap();
        assert!(text.contains("\"nan\""));
        assert_eq!(flagged, vec!["a".to_string(), "b[0]".to_string()]);
        let back: Sample = from_json(&text).unwrap();
        assert!(back.a.is_nan());
        assert_eq!(back.b[0], f64::INFINITY);
        assert_eq!(back.c, Some(1.0));
    }

    #[test]
    fn csv_cells_round_trip() {
        let mut t = Table::new(&["k", "x"]);
        t.push(vec![3usize.into(), (2.0f64 / 7.0).into()]);
        t.push(vec![4usize.into(), f64::NAN.into()]);
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows[0], t.rows[0]);
        assert!(matches!(back.rows[1][1], Cell::Num(x) if x.is_nan()));
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(Table::new(&["t", "E"]).to_csv(), "t,E\n");
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = Csr::from_triplets(3, 2, vec![(0, 0, 1.5), (2, 1, -1.0 / 3.0), (1, 0, 1e-17)]);
        let b = parse_matrix_market(&matrix_market(&a)).unwrap();
        assert_eq!(a.triplets(), b.triplets());
        assert!(parse_matrix_market("%%MatrixMarket\n2 2 1\n3 1 1.0\n").is_err());
    }
}
