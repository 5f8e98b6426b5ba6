//! CSV export with a fixed dialect: comma separator, header row, LF line
//! endings, floats in scientific notation with 17 significant digits.

use std::fs;
use std::io;
use std::path::Path;

use crate::hyptimes::{FirstTimeDistribution, HypTimesResult};
use crate::measures::{cell_left, EmpiricalDensity};
use crate::orbits::OrbitTrace;

/// Formats a float with 17 significant digits; round-trips exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV document built in memory.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
    columns: usize,
}

/// A CSV field.
pub enum Field {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer, columns: header.len() }
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = Field>) -> &mut Self {
        let record: Vec<String> = fields
            .into_iter()
            .map(|f| match f {
                Field::Int(v) => v.to_string(),
                Field::Float(v) => fmt_float(v),
                Field::Text(s) => s,
            })
            .collect();
        assert_eq!(record.len(), self.columns, "row width differs from header");
        self.writer.write_record(&record).expect("in-memory write");
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn into_string(self) -> String {
        String::from_utf8(self.into_bytes()).expect("CSV fields are UTF-8")
    }
}

/// j, x_j, a_j, r_j for a trace with stored points.
pub fn trace_csv(trace: &OrbitTrace) -> Csv {
    let mut csv = Csv::new(&["j", "x_j", "a_j", "r_j"]);
    let has_x = trace.has_points();
    for j in 0..trace.len() {
        let x = if has_x { trace.points()[j].coord() } else { f64::NAN };
        csv.row([j.into(), x.into(), trace.inv_deriv()[j].into(), trace.log_dist()[j].into()]);
    }
    csv
}

/// One row per hyperbolic time.
pub fn times_csv(result: &HypTimesResult) -> Csv {
    let mut csv = Csv::new(&["n"]);
    for &n in result.times() {
        csv.row([n.into()]);
    }
    csv
}

/// k, count, mass for every observed first time.
pub fn histogram_csv(dist: &FirstTimeDistribution) -> Csv {
    let mut csv = Csv::new(&["k", "count", "mass"]);
    for (&k, &c) in &dist.histogram {
        csv.row([k.into(), c.into(), dist.mass(k).into()]);
    }
    csv
}

/// cell_index, left_endpoint, value (density against normalized Lebesgue).
pub fn density_csv(density: &EmpiricalDensity) -> Csv {
    let mut csv = Csv::new(&["cell_index", "left_endpoint", "value"]);
    let k = density.k();
    for i in 0..k {
        csv.row([i.into(), cell_left(i, k).into(), density.density(i).into()]);
    }
    csv
}

/// Two-column plot data.
pub fn xy_csv<X: Into<Field> + Copy, Y: Into<Field> + Copy>(x: &str, y: &str, rows: &[(X, Y)]) -> Csv {
    let mut csv = Csv::new(&[x, y]);
    for &(a, b) in rows {
        csv.row([a.into(), b.into()]);
    }
    csv
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
