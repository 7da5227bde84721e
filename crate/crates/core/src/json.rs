//! JSON encodings. Complex numbers are always `{"re": .., "im": ..}`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for JsonComplex {
    fn from(z: C64) -> Self {
        JsonComplex { re: z.re, im: z.im }
    }
}

impl From<JsonComplex> for C64 {
    fn from(z: JsonComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

/// `#[serde(with = "crate::json::complex")]`
pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        JsonComplex::from(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        JsonComplex::deserialize(d).map(C64::from)
    }
}

/// `#[serde(with = "crate::json::complex_vec")]`
pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let tmp: Vec<JsonComplex> = v.iter().copied().map(JsonComplex::from).collect();
        tmp.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<JsonComplex>::deserialize(d)?.into_iter().map(C64::from).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Holder {
        #[serde(with = "complex")]
        z: C64,
        #[serde(with = "complex_vec")]
        zs: Vec<C64>,
    }

    #[test]
    fn complex_wire_format() {
        let h = Holder { z: C64::new(1.5, -2.0), zs: vec![C64::new(0.0, 1.0)] };
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(text, r#"{"z":{"re":1.5,"im":-2.0},"zs":[{"re":0.0,"im":1.0}]}"#);
        assert_eq!(serde_json::from_str::<Holder>(&text).unwrap(), h);
    }
}
