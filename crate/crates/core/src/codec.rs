//! Dense arrays embedded in JSON as base64 of little-endian f64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Dense {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseFile {
    rows: usize,
    cols: usize,
    data: String,
}

pub fn encode(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode(s: &str) -> Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err(format!("{} bytes is not a whole number of f64", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl Serialize for Dense {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DenseFile { rows: self.rows, cols: self.cols, data: encode(&self.data) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dense {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = DenseFile::deserialize(d)?;
        let data = decode(&f.data).map_err(serde::de::Error::custom)?;
        if data.len() != f.rows * f.cols {
            return Err(serde::de::Error::custom(format!(
                "{} values for a {}x{} array",
                data.len(),
                f.rows,
                f.cols
            )));
        }
        Ok(Dense { rows: f.rows, cols: f.cols, data })
    }
}

/// Serde adapter for `Vec<f64>` fields.
pub mod vec_b64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        encode(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = Dense::from_rows(&[vec![1.0, -0.0, f64::MIN_POSITIVE], vec![1e300, 0.1, 3.0]]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Dense>(&s).unwrap(), m);
        assert!(serde_json::from_str::<Dense>(r#"{"rows":2,"cols":2,"data":"AAAAAAAA8D8="}"#).is_err());
    }
}
