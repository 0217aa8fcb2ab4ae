//! Serde adapters so coefficient vectors and network weights serialize as
//! plain JSON arrays instead of ndarray's internal representation.

pub(crate) mod array1 {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(arr: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        arr.as_slice()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| arr.to_vec())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Ok(Array1::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub(crate) mod vec_array1 {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(arrs: &[Array1<f64>], s: S) -> Result<S::Ok, S::Error> {
        arrs.iter()
            .map(|a| a.to_vec())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Array1<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(Array1::from_vec)
            .collect())
    }
}

pub(crate) mod vec_array2 {
    use ndarray::Array2;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mats: &[Array2<f64>], s: S) -> Result<S::Ok, S::Error> {
        mats.iter()
            .map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Array2<f64>>, D::Error> {
        let nested = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        nested
            .into_iter()
            .map(|rows| {
                let nrows = rows.len();
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != ncols) {
                    return Err(D::Error::custom("ragged weight matrix"));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Array2::from_shape_vec((nrows, ncols), flat)
                    .map_err(|e| D::Error::custom(e.to_string()))
            })
            .collect()
    }
}
