//! Text tables, their schemas, and the binary superoperator dump.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly; identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::io::{Read, Write};

use faer::Mat;

use crate::liouvillian::Superoperator;
use crate::{Error, Result, C64};

/// `f64` with 17 significant digits in scientific notation; NaN and ±inf spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Float,
    Int,
    Bool,
    /// One of a fixed set of labels.
    Label(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Schema {
    pub name: &'static str,
    pub columns: &'static [(&'static str, ColumnKind)],
}

const CLASSES: &[&str] = &["incoherent", "coherent", "intermediate"];

pub const SPECTRUM: Schema = Schema {
    name: "spectrum",
    columns: &[
        ("re_lambda", ColumnKind::Float),
        ("im_lambda", ColumnKind::Float),
        ("n_b", ColumnKind::Float),
        ("s_diag", ColumnKind::Float),
        ("s_off", ColumnKind::Float),
        ("group", ColumnKind::Int),
        ("class", ColumnKind::Label(CLASSES)),
        ("residual", ColumnKind::Float),
    ],
};

pub const SINGLE_PARTICLE: Schema = Schema {
    name: "single-particle",
    columns: &[
        ("k", ColumnKind::Float),
        ("re_lambda", ColumnKind::Float),
        ("im_lambda", ColumnKind::Float),
        ("re_alpha", ColumnKind::Float),
        ("im_alpha", ColumnKind::Float),
        ("xi_con", ColumnKind::Float),
        ("exists", ColumnKind::Bool),
    ],
};

pub const DYNAMICS: Schema = Schema {
    name: "dynamics",
    columns: &[
        ("t", ColumnKind::Float),
        ("re_n_k", ColumnKind::Float),
        ("im_n_k", ColumnKind::Float),
        ("chi1", ColumnKind::Float),
        ("chi2", ColumnKind::Float),
        ("chi1_tilde", ColumnKind::Float),
        ("gamma1", ColumnKind::Float),
        ("gamma2", ColumnKind::Float),
        ("trace_err", ColumnKind::Float),
        ("min_eig", ColumnKind::Float),
    ],
};

pub const STRINGS: Schema = Schema {
    name: "strings",
    columns: &[
        ("m", ColumnKind::Int),
        ("p", ColumnKind::Float),
        ("kappa", ColumnKind::Float),
        ("mu", ColumnKind::Float),
        ("K", ColumnKind::Float),
        ("re_lambda", ColumnKind::Float),
        ("im_lambda", ColumnKind::Float),
        ("exists", ColumnKind::Bool),
    ],
};

pub const TOY_DOS: Schema = Schema {
    name: "toydos",
    columns: &[("t", ColumnKind::Float), ("chi1", ColumnKind::Float), ("gamma1", ColumnKind::Float)],
};

pub const SCHEMAS: &[Schema] = &[SPECTRUM, SINGLE_PARTICLE, DYNAMICS, STRINGS, TOY_DOS];

/// Columns whose names start with this prefix may follow the fixed ones
/// (e.g. `residual_L16`); they hold floats.
pub const EXTRA_FLOAT_PREFIX: &str = "residual_L";

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: vec![] }
    }

    pub fn for_schema(schema: &Schema) -> Self {
        Self::new(schema.columns.iter().map(|c| c.0))
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

fn parse_float(s: &str) -> bool {
    matches!(s, "nan" | "inf" | "-inf") || s.parse::<f64>().is_ok_and(|x| x.is_finite())
}

/// Check a CSV text against a schema; returns the number of data rows.
pub fn validate_csv(text: &str, schema: &Schema) -> Result<usize> {
    let bad = |msg: String| Err(Error::InvalidArguments(format!("{} CSV: {msg}", schema.name)));
    if !text.ends_with('\n') {
        return bad("missing final newline".into());
    }
    let mut lines = text.lines();
    let Some(head) = lines.next() else { return bad("empty".into()) };
    let names: Vec<&str> = head.split(',').collect();
    let fixed = schema.columns.len();
    if names.len() < fixed || names[..fixed].iter().zip(schema.columns).any(|(n, c)| *n != c.0) {
        return bad(format!("header {head:?} does not start with the schema columns"));
    }
    if let Some(extra) = names[fixed..].iter().find(|n| !n.starts_with(EXTRA_FLOAT_PREFIX)) {
        return bad(format!("unexpected column {extra:?}"));
    }
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return bad(format!("row {} has {} cells, expected {}", i + 1, cells.len(), names.len()));
        }
        for (c, cell) in cells.iter().enumerate() {
            let kind = schema.columns.get(c).map_or(ColumnKind::Float, |x| x.1);
            let ok = match kind {
                ColumnKind::Float => parse_float(cell),
                ColumnKind::Int => cell.parse::<i64>().is_ok(),
                ColumnKind::Bool => matches!(*cell, "true" | "false"),
                ColumnKind::Label(set) => set.contains(cell),
            };
            if !ok {
                return bad(format!("row {} column {} has invalid value {cell:?}", i + 1, names[c]));
            }
        }
        count += 1;
    }
    Ok(count)
}

/// Schema whose fixed columns open the header of `text`.
pub fn detect_schema(text: &str) -> Option<&'static Schema> {
    let head = text.lines().next()?;
    SCHEMAS.iter().filter(|s| head.split(',').take(s.columns.len()).eq(s.columns.iter().map(|c| c.0))).max_by_key(|s| s.columns.len())
}

pub const LSOP_MAGIC: &[u8; 4] = b"LSOP";
pub const LSOP_VERSION: u32 = 1;
/// Flat index `ket·D + bra`.
pub const ORDERING_KET_MAJOR: u32 = 0;

/// Dense row-major dump: magic, version, D, ordering tag, then (re, im) pairs.
pub fn write_lsop(m: &Superoperator, out: &mut impl Write) -> Result<()> {
    let d = m.dim();
    out.write_all(LSOP_MAGIC)?;
    out.write_all(&LSOP_VERSION.to_le_bytes())?;
    out.write_all(&(d as u64).to_le_bytes())?;
    out.write_all(&ORDERING_KET_MAJOR.to_le_bytes())?;
    let n = d * d;
    let sp = m.sparse();
    let mut row = vec![C64::default(); n];
    for r in 0..n {
        row.iter_mut().for_each(|z| *z = C64::default());
        for (c, v) in sp.row(r) {
            row[c] = v;
        }
        let mut buf = Vec::with_capacity(16 * n);
        for z in &row {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Inverse of [`write_lsop`]; returns D and the D²×D² matrix.
pub fn read_lsop(input: &mut impl Read) -> Result<(usize, Mat<C64>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != LSOP_MAGIC {
        return Err(Error::InvalidArguments("not an LSOP dump".into()));
    }
    let mut w4 = [0u8; 4];
    let mut w8 = [0u8; 8];
    input.read_exact(&mut w4)?;
    let version = u32::from_le_bytes(w4);
    if version != LSOP_VERSION {
        return Err(Error::InvalidArguments(format!("unsupported LSOP version {version}")));
    }
    input.read_exact(&mut w8)?;
    let d = u64::from_le_bytes(w8) as usize;
    input.read_exact(&mut w4)?;
    if u32::from_le_bytes(w4) != ORDERING_KET_MAJOR {
        return Err(Error::InvalidArguments("unknown flat ordering tag".into()));
    }
    let n = d * d;
    let mut m = Mat::<C64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            input.read_exact(&mut w8)?;
            let re = f64::from_le_bytes(w8);
            input.read_exact(&mut w8)?;
            m[(r, c)] = C64::new(re, f64::from_le_bytes(w8));
        }
    }
    Ok((d, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{assemble, ModelParams};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn table_passes_its_schema() {
        let mut t = Table::for_schema(&SINGLE_PARTICLE);
        t.push(vec![0.5.into(), (-0.1).into(), 0.0.into(), 1.2.into(), (-0.25).into(), 0.83.into(), true.into()]);
        let csv = t.to_csv();
        assert_eq!(validate_csv(&csv, &SINGLE_PARTICLE).unwrap(), 1);
        assert_eq!(detect_schema(&csv).unwrap().name, "single-particle");
        assert!(validate_csv(&csv.replace("true", "yes"), &SINGLE_PARTICLE).is_err());
        assert!(validate_csv(csv.trim_end(), &SINGLE_PARTICLE).is_err());
    }

    #[test]
    fn extra_residual_columns() {
        let mut header: Vec<String> = STRINGS.columns.iter().map(|c| c.0.to_string()).collect();
        header.push("residual_L16".into());
        let mut t = Table::new(header);
        t.push(vec![1usize.into(), (-1.5).into(), 0.69.into(), 0.0.into(), (-3.0).into(), (-0.4).into(), 0.0.into(), true.into(), 1e-6.into()]);
        assert_eq!(validate_csv(&t.to_csv(), &STRINGS).unwrap(), 1);
        assert!(validate_csv(&t.to_csv().replace("residual_L16", "other"), &STRINGS).is_err());
    }

    #[test]
    fn lsop_round_trip() {
        let (_, m) = assemble(&ModelParams::hardcore(3, 1, 0.3, 1.0)).unwrap();
        let mut buf = Vec::new();
        write_lsop(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"LSOP");
        assert_eq!(buf.len(), 4 + 4 + 8 + 4 + 81 * 16);
        let (d, back) = read_lsop(&mut buf.as_slice()).unwrap();
        assert_eq!(d, 3);
        assert_eq!(back, m.to_dense());
        buf[0] = b'X';
        assert!(read_lsop(&mut buf.as_slice()).is_err());
    }
}
