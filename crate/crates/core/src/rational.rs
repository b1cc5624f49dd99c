//! Small helpers around `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive};
use serde::{Deserialize, Serialize};

pub type Ratio = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Ratio {
    Ratio::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: u64) -> Ratio {
    Ratio::from_integer(BigInt::from(value))
}

/// `base^-exp` as an exact rational.
pub fn inv_pow(base: u64, exp: u32) -> Ratio {
    Ratio::new(BigInt::one(), BigInt::from(base).pow(exp))
}

/// Lossy conversion used only for display companions and float comparisons.
pub fn to_f64(value: &Ratio) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Huge numerators/denominators can overflow the direct conversion;
        // scale both down by the same power of two.
        let shift = value.denom().bits().max(value.numer().bits()).saturating_sub(1000);
        let n = (value.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (value.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// A rational serialized as `"255/511"` with a decimal companion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalValue {
    pub exact: String,
    pub approx: f64,
}

impl From<&Ratio> for RationalValue {
    fn from(value: &Ratio) -> Self {
        RationalValue {
            exact: value.to_string(),
            approx: to_f64(value),
        }
    }
}

impl RationalValue {
    pub fn parse(&self) -> Option<Ratio> {
        self.exact.parse().ok()
    }
}

/// Serde adapter writing a [`Ratio`] as its `"a/b"` string.
pub mod as_string {
    use super::Ratio;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Ratio, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(|_| D::Error::custom(format!("not a rational: {text:?}")))
    }
}
