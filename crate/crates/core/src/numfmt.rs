//! Fixed-precision float serialization.
//!
//! Vectors and weights are written with 9 significant digits so scores
//! recomputed from stored files agree across platforms to about 1e-8.

use serde::{Deserialize, Deserializer, Serializer};

/// `x` rounded to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

pub fn serialize_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round9(*x))
}

pub fn serialize_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| round9(*x)))
}

pub fn serialize_array4<S: Serializer>(v: &[f64; 4], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| round9(*x)))
}

pub fn deserialize_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Vec::<f64>::deserialize(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounds_to_nine_digits() {
        assert_eq!(round9(0.123456789123), 0.123456789);
        assert_eq!(round9(-1234567890.5), -1234567890.0);
        assert_eq!(round9(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn relative_error_bounded(x in -1e6f64..1e6) {
            prop_assume!(x != 0.0);
            prop_assert!(((round9(x) - x) / x).abs() <= 5e-9);
            prop_assert_eq!(round9(round9(x)), round9(x));
        }
    }
}
