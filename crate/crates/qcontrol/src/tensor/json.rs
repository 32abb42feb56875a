//! JSON codec for [`ComplexMatrix`].
//!
//! Wire format:
//!
//! ```json
//! {"rows": 2, "cols": 2, "data": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}
//! ```
//!
//! `data` is row-major; each entry is a `[re, im]` pair. serde_json prints
//! floats in shortest round-trip form, so encode → decode reproduces the
//! matrix bit-exactly (non-finite entries are rejected on both sides).

use super::{ComplexMatrix, C64};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<(f64, f64)>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(serde::ser::Error::custom("matrix entries must be finite"));
        }
        let repr = MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            data: self.as_slice().iter().map(|z| (z.re, z.im)).collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.data.len() != repr.rows * repr.cols {
            return Err(D::Error::custom(format!(
                "matrix data length {} does not match shape {}x{}",
                repr.data.len(),
                repr.rows,
                repr.cols
            )));
        }
        if repr.data.iter().any(|(re, im)| !re.is_finite() || !im.is_finite()) {
            return Err(D::Error::custom("matrix entries must be finite"));
        }
        let entries: Vec<C64> = repr.data.iter().map(|&(re, im)| C64::new(re, im)).collect();
        Ok(ComplexMatrix::from_row_slice(repr.rows, repr.cols, &entries))
    }
}
