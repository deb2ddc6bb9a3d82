//! Plain-text and binary exports. Every file carries the digest of the
//! configuration that produced it: CSV files in a leading `#` comment, JSON
//! files as a `config_digest` field, binary dumps in their JSON sidecar.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::helmholtz::DriftReport;
use crate::potential::DenseOperator;
use crate::spectrum::{multiplicity_groups, EigenSystem};
use crate::symbol::{Trajectory, VarietySample};

/// Relative gap below which neighbouring eigenvalues share a group.
pub const GROUP_TOL: f64 = 1e-6;

/// Scalar with 17 significant digits, enough to round-trip any `f64`.
#[must_use]
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// CSV table with a provenance comment and a header row.
#[derive(Debug, Clone)]
pub struct Table {
    digest: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    #[must_use]
    pub fn new(digest: &str, header: &[&'static str]) -> Self {
        Self { digest: digest.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return invalid(format!("row has {} fields, header has {}", row.len(), self.header.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[must_use]
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config_digest={}", self.digest);
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Spectrum: `index, lambda, c_weight, multiplicity_group`.
pub fn spectrum_table(es: &EigenSystem, digest: &str) -> Result<Table> {
    let groups = multiplicity_groups(&es.values, GROUP_TOL);
    let mut t = Table::new(digest, &["index", "lambda", "c_weight", "multiplicity_group"]);
    for (i, (v, w)) in es.values.iter().zip(&es.weights).enumerate() {
        t.push(vec![i.to_string(), num(*v), num(*w), groups[i].to_string()])?;
    }
    Ok(t)
}

/// Trajectory: `t, u1, u2, xi1, xi2, H`. Chart switches show up as jumps in
/// the coordinates; the chart index is not a column.
pub fn trajectory_table(traj: &Trajectory, digest: &str) -> Result<Table> {
    let mut t = Table::new(digest, &["t", "u1", "u2", "xi1", "xi2", "H"]);
    for ((time, st), h) in traj.times.iter().zip(&traj.states).zip(&traj.h_values) {
        t.push(vec![num(*time), num(st.base.u[0]), num(st.base.u[1]), num(st.xi[0]), num(st.xi[1]), num(*h)])?;
    }
    Ok(t)
}

/// Variety: `theta, r, weight`.
pub fn variety_table(vs: &VarietySample, digest: &str) -> Result<Table> {
    let mut t = Table::new(digest, &["theta", "r", "weight"]);
    for ((th, r), w) in vs.theta.iter().zip(&vs.r).zip(&vs.weights) {
        t.push(vec![num(*th), num(*r), num(*w)])?;
    }
    Ok(t)
}

/// Drift: `omega, mu1_re, mu1_im, lambda_drift, residual, iterations`.
pub fn drift_table(report: &DriftReport, digest: &str) -> Result<Table> {
    let mut t = Table::new(digest, &["omega", "mu1_re", "mu1_im", "lambda_drift", "residual", "iterations"]);
    for p in &report.points {
        t.push(vec![
            num(p.omega),
            num(p.mu1.re),
            num(p.mu1.im),
            num(p.lambda_drift),
            num(p.residual),
            p.iterations.to_string(),
        ])?;
    }
    Ok(t)
}

/// Field: `x, y, z, re_u, im_u`.
pub fn field_table(points: &[Vector3<f64>], values: &[Complex64], digest: &str) -> Result<Table> {
    if points.len() != values.len() {
        return invalid("field points and values differ in length");
    }
    let mut t = Table::new(digest, &["x", "y", "z", "re_u", "im_u"]);
    for (x, u) in points.iter().zip(values) {
        t.push(vec![num(x.x), num(x.y), num(x.z), num(u.re), num(u.im)])?;
    }
    Ok(t)
}

/// Serializes `value` as a JSON object with `config_digest` added.
pub fn json_with_digest<T: Serialize>(value: &T, digest: &str) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Numerical(format!("serialization: {e}")))?;
    match &mut v {
        Value::Object(map) => {
            map.insert("config_digest".into(), Value::String(digest.to_string()));
        }
        _ => {
            v = serde_json::json!({ "config_digest": digest, "value": v });
        }
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Numerical(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Header written next to a binary matrix dump.
#[derive(Debug, Clone, Serialize)]
pub struct BinaryHeader {
    pub rows: usize,
    pub cols: usize,
    /// `f64` or `c64` (interleaved real and imaginary parts).
    pub scalar: &'static str,
    pub layout: &'static str,
    pub kernel: Option<String>,
    pub surface: String,
    /// Hex SHA-256 of the binary file.
    pub checksum: String,
    pub config_digest: String,
}

fn dump(path: &Path, bytes: &[u8], header: &BinaryHeader) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    let side = path.with_extension("json");
    let mut text = serde_json::to_string_pretty(header).map_err(|e| Error::Numerical(e.to_string()))?;
    text.push('\n');
    write_text(&side, &text)
}

fn row_major_f64(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.len() * 8);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

#[must_use]
pub fn checksum(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the operator's `range` matrix (nodes by basis functions) as
/// little-endian row-major `f64` plus a `.json` sidecar.
pub fn write_operator(path: &Path, op: &DenseOperator<f64>, digest: &str) -> Result<BinaryHeader> {
    let bytes = row_major_f64(&op.range);
    let header = BinaryHeader {
        rows: op.range.nrows(),
        cols: op.range.ncols(),
        scalar: "f64",
        layout: "row-major little-endian",
        kernel: Some(op.kernel.label()),
        surface: op.surface.clone(),
        checksum: checksum(&bytes),
        config_digest: digest.to_string(),
    };
    dump(path, &bytes, &header)?;
    Ok(header)
}

/// Complex operator dump with interleaved parts.
pub fn write_complex_operator(path: &Path, op: &DenseOperator<Complex64>, digest: &str) -> Result<BinaryHeader> {
    let m = &op.range;
    let mut bytes = Vec::with_capacity(m.len() * 16);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            bytes.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    let header = BinaryHeader {
        rows: m.nrows(),
        cols: m.ncols(),
        scalar: "c64",
        layout: "row-major little-endian",
        kernel: Some(op.kernel.label()),
        surface: op.surface.clone(),
        checksum: checksum(&bytes),
        config_digest: digest.to_string(),
    };
    dump(path, &bytes, &header)?;
    Ok(header)
}

/// Eigenfunction node values, one column per eigenpair.
pub fn write_eigenfunctions(path: &Path, es: &EigenSystem, digest: &str) -> Result<BinaryHeader> {
    let bytes = row_major_f64(&es.functions);
    let header = BinaryHeader {
        rows: es.functions.nrows(),
        cols: es.functions.ncols(),
        scalar: "f64",
        layout: "row-major little-endian",
        kernel: None,
        surface: es.surface.clone(),
        checksum: checksum(&bytes),
        config_digest: digest.to_string(),
    };
    dump(path, &bytes, &header)?;
    Ok(header)
}

/// Reads back a real dump written by this module and verifies its checksum.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path)?;
    let side: Value = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)
        .map_err(|e| Error::Validation(format!("sidecar: {e}")))?;
    let field = |k: &str| side.get(k).ok_or_else(|| Error::Validation(format!("sidecar lacks '{k}'")));
    let rows = field("rows")?.as_u64().unwrap_or(0) as usize;
    let cols = field("cols")?.as_u64().unwrap_or(0) as usize;
    if field("scalar")?.as_str() != Some("f64") {
        return invalid("only f64 dumps can be read back as real matrices");
    }
    if field("checksum")?.as_str() != Some(checksum(&bytes).as_str()) {
        return Err(Error::Validation("checksum mismatch".into()));
    }
    if bytes.len() != rows * cols * 8 {
        return invalid("dump size does not match the sidecar");
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}
