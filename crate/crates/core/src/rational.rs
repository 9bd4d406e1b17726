//! Exact rational helpers and their JSON rendering.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};

pub fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

pub fn int(v: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(v.into())
}

/// `p/q`, always with an explicit denominator.
pub fn to_pq(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Largest rational not exceeding `v * (1 - rel)`; used to turn an irrational
/// constant into a conservative exact bound.
pub fn rational_below(v: f64, rel: f64) -> BigRational {
    let shrink = if v >= 0.0 { 1.0 - rel } else { 1.0 + rel };
    BigRational::from_float(v * shrink).expect("finite value")
}

pub fn rational_above(v: f64, rel: f64) -> BigRational {
    let grow = if v >= 0.0 { 1.0 + rel } else { 1.0 - rel };
    BigRational::from_float(v * grow).expect("finite value")
}

/// A rational rendered as `{"exact": "p/q", "approx": float}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(pub BigRational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            exact: String,
            approx: f64,
        }
        Repr {
            exact: to_pq(&self.0),
            approx: to_f64(&self.0),
        }
        .serialize(s)
    }
}

impl From<BigRational> for Exact {
    fn from(r: BigRational) -> Self {
        Exact(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_explicit_denominator() {
        assert_eq!(to_pq(&int(1)), "1/1");
        assert_eq!(to_pq(&ratio(6, 8)), "3/4");
        let json = serde_json::to_string(&Exact(ratio(1, 4))).unwrap();
        assert_eq!(json, r#"{"exact":"1/4","approx":0.25}"#);
    }

    #[test]
    fn conservative_bounds() {
        let v = 2.0f64.sqrt();
        assert!(to_f64(&rational_below(v, 1e-12)) < v);
        assert!(to_f64(&rational_above(v, 1e-12)) > v);
    }
}
