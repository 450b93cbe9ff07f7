//! Serde adapters that write matrices and vectors with explicit shapes,
//! row-major.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct Shaped {
    shape: [usize; 2],
    data: Vec<f64>,
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Shaped {
            shape: [m.nrows(), m.ncols()],
            data: m.transpose().as_slice().to_vec(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let Shaped { shape: [r, c], data } = Shaped::deserialize(d)?;
        if data.len() != r * c {
            return Err(D::Error::custom(format!("shape {r}x{c} does not match {} values", data.len())));
        }
        Ok(DMatrix::from_row_slice(r, c, &data))
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        Shaped {
            shape: [v.len(), 1],
            data: v.as_slice().to_vec(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let Shaped { shape: [r, c], data } = Shaped::deserialize(d)?;
        if c != 1 || data.len() != r {
            return Err(D::Error::custom(format!("expected a {r}x1 column, got {} values", data.len())));
        }
        Ok(DVector::from_vec(data))
    }
}
