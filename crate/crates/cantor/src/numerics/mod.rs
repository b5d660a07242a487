//! Exact rationals, dyadic enclosures and certified elementary functions.

mod dyadic;
mod log;
mod pow;
mod rat;
mod scalar;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use dyadic::{Dyadic, Round};
pub use log::{ln_bounds, log2_rat, log2_scalar};
pub use pow::{exact_pow, pow_bounds, pow_ge_one, pow_prec, pow_scalar, powi_nonneg};
pub use rat::{
    ceil_int, exact_log2, format_rat, is_dyadic, log2_floor, parse_rat, pow2, rat, rat_int, rat_max,
    rat_min, rat_to_f64, Rat,
};
pub use scalar::{bits_for, Recipe, Scalar, DEFAULT_PREC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("cannot parse number `{0}`")]
    Parse(String),
    #[error("lower bound exceeds upper bound")]
    InvalidBounds,
    #[error("division by an enclosure containing zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("exponent too large")]
    ExponentTooLarge,
    #[error("refinement failed, width still {achieved}")]
    Refinement { achieved: String },
}

/// Significant decimal digits used when serializing enclosures.
const DECIMAL_DIGITS: usize = 45;

#[derive(Serialize, Deserialize)]
struct ScalarRepr {
    lower: String,
    upper: String,
    precision: u32,
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ScalarRepr {
            lower: self.lower().to_decimal(DECIMAL_DIGITS, Round::Down),
            upper: self.upper().to_decimal(DECIMAL_DIGITS, Round::Up),
            precision: self.prec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ScalarRepr::deserialize(d)?;
        let lo = parse_rat(&r.lower).map_err(D::Error::custom)?;
        let hi = parse_rat(&r.upper).map_err(D::Error::custom)?;
        let prec = r.precision.max(16);
        Scalar::from_bounds(
            Dyadic::from_rat(&lo, prec + 8, Round::Down),
            Dyadic::from_rat(&hi, prec + 8, Round::Up),
            prec,
        )
        .map_err(D::Error::custom)
    }
}

/// Serde adapter for `Rat` as a `num/den` string.
pub mod rat_serde {
    use super::{format_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rat>`.
pub mod rat_vec_serde {
    use super::{format_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(format_rat).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_rat(s).map_err(serde::de::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_json_roundtrip_encloses() {
        let s = pow_bounds(&rat(1, 3), &rat(1, 2), &pow2(-100)).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: Scalar = serde_json::from_str(&j).unwrap();
        assert!(back.contains(&s));
        assert!(back.width().to_rat() < pow2(-100));
    }
}
