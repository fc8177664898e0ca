//! Contours as CSV, matrices as a length-prefixed JSON header followed by
//! row-major little-endian `f64` values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::cwt::{Contour, ContourKind, CwtMatrix};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ContourRow {
    kind: ContourKind,
    position: usize,
    value: f64,
}

pub fn write_contour_csv<W: Write>(contour: &Contour<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (position, &value) in contour.values.iter().enumerate() {
        w.serialize(ContourRow { kind: contour.kind, position, value })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_contour_csv<R: Read>(input: R) -> Result<Contour<f64>> {
    let mut rows: Vec<ContourRow> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        rows.push(row?);
    }
    let kind = rows.first().map(|r| r.kind).ok_or_else(|| Error::Data("empty contour file".into()))?;
    for (i, r) in rows.iter().enumerate() {
        if r.position != i || r.kind != kind {
            return Err(Error::Data(format!("contour row {i} out of order or mixed kinds")));
        }
    }
    Contour::new(kind, rows.into_iter().map(|r| r.value).collect())
}

/// Header of the binary matrix format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub kind: ContourKind,
    pub scales: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn write_matrix<W: Write>(m: &CwtMatrix<f64>, mut out: W) -> Result<()> {
    let header = MatrixHeader {
        rows: m.n_scales(),
        cols: m.len,
        dtype: "f64le".into(),
        kind: m.kind,
        scales: m.scales.clone(),
        mean: m.mean,
        std: m.std,
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for v in &m.coefficients {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<CwtMatrix<f64>> {
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: MatrixHeader = serde_json::from_slice(&json)?;
    if header.dtype != "f64le" {
        return Err(Error::Data(format!("unsupported dtype {}", header.dtype)));
    }
    if header.scales.len() != header.rows {
        return Err(Error::Shape { expected: header.rows, got: header.scales.len() });
    }
    let mut coefficients = Vec::with_capacity(header.rows * header.cols);
    let mut buf = [0u8; 8];
    for _ in 0..header.rows * header.cols {
        input.read_exact(&mut buf)?;
        coefficients.push(f64::from_le_bytes(buf));
    }
    Ok(CwtMatrix {
        kind: header.kind,
        scales: header.scales,
        len: header.cols,
        coefficients,
        mean: header.mean,
        std: header.std,
    })
}
