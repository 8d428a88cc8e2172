//! Serde adapters that write complex numbers as `{"re": .., "im": ..}` objects.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct ReIm {
    re: f64,
    im: f64,
}

pub fn serialize_vec<S: Serializer>(v: &[Complex64], ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_seq(v.iter().map(|z| ReIm { re: z.re, im: z.im }))
}

pub fn deserialize_vec<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Complex64>, D::Error> {
    let raw = Vec::<ReIm>::deserialize(de)?;
    Ok(raw.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

pub fn serialize_one<S: Serializer>(z: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
    ReIm { re: z.re, im: z.im }.serialize(ser)
}

pub fn deserialize_one<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
    let z = ReIm::deserialize(de)?;
    Ok(Complex64::new(z.re, z.im))
}

/// `with`-style module for `Vec<Complex64>` fields.
pub mod vec {
    pub use super::deserialize_vec as deserialize;
    pub use super::serialize_vec as serialize;
}

/// `with`-style module for single `Complex64` fields.
pub mod one {
    pub use super::deserialize_one as deserialize;
    pub use super::serialize_one as serialize;
}
