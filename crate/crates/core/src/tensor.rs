//! Flat little-endian f64 tensors behind a one-line JSON header.
//!
//! Layout: a single line of JSON describing the array, a newline, then
//! `prod(shape)` values (real) or `2 * prod(shape)` values (complex,
//! interleaved re/im) in row-major order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub kind: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Frequency step of a spectral grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<usize>,
    /// Time step of a sampled kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Laguerre rate per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Laguerre order per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<usize>>,
}

impl TensorHeader {
    pub fn new(kind: &str, dtype: Dtype, shape: Vec<usize>) -> Self {
        TensorHeader {
            kind: kind.to_string(),
            dtype,
            shape,
            order: None,
            dw: None,
            half_width: None,
            dt: None,
            a: None,
            r: None,
        }
    }

    /// Number of f64 words in the payload.
    pub fn words(&self) -> usize {
        let n: usize = self.shape.iter().product();
        match self.dtype {
            Dtype::F64 => n,
            Dtype::C64 => 2 * n,
        }
    }
}

pub fn write_tensor<W: Write>(mut w: W, header: &TensorHeader, data: &[f64]) -> Result<()> {
    if data.len() != header.words() {
        return Err(Error::LengthMismatch(format!(
            "tensor payload has {} words, header implies {}",
            data.len(),
            header.words()
        )));
    }
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(8 * data.len());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: BufRead>(mut r: R) -> Result<(TensorHeader, Vec<f64>)> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: TensorHeader = serde_json::from_slice(&line)?;
    let words = header.words();
    let mut bytes = vec![0u8; 8 * words];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("tensor payload shorter than its header declares".into()))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after tensor payload".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut h = TensorHeader::new("test", Dtype::C64, vec![2, 3]);
        h.dw = Some(0.1);
        let data: Vec<f64> = (0..12).map(|k| k as f64 * 0.5 - 1.0).collect();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &h, &data).unwrap();
        let (h2, d2) = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(h2, h);
        assert_eq!(d2, data);
    }

    #[test]
    fn truncated_payload_rejected() {
        let h = TensorHeader::new("test", Dtype::F64, vec![4]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &h, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_tensor(buf.as_slice()).is_err());
    }
}
