use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::{format_rat, rat_serde, Rat};

use super::ConstructionError;

/// A sequence `(α_n)_{n >= 1}` in `(0, 1)`.
#[derive(Clone)]
pub enum AlphaSeq {
    Constant(Rat),
    /// `scale * ratio^n`
    Geometric { scale: Rat, ratio: Rat },
    /// `1 / (n + shift)`
    Harmonic { shift: u64 },
    /// Listed values; the last one repeats.
    Explicit(Vec<Rat>),
    Custom { name: String, f: Arc<dyn Fn(u32) -> Rat + Send + Sync>, nonincreasing: bool },
}

impl fmt::Debug for AlphaSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSeq::Constant(r) => write!(f, "Constant({})", format_rat(r)),
            AlphaSeq::Geometric { scale, ratio } => {
                write!(f, "Geometric({} * {}^n)", format_rat(scale), format_rat(ratio))
            }
            AlphaSeq::Harmonic { shift } => write!(f, "Harmonic(1/(n+{shift}))"),
            AlphaSeq::Explicit(v) => write!(f, "Explicit({} values)", v.len()),
            AlphaSeq::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

fn one() -> Rat {
    Rat::from_integer(1.into())
}

fn zero() -> Rat {
    Rat::from_integer(0.into())
}

impl AlphaSeq {
    pub fn constant(r: Rat) -> Self {
        AlphaSeq::Constant(r)
    }

    pub fn geometric(scale: Rat, ratio: Rat) -> Self {
        AlphaSeq::Geometric { scale, ratio }
    }

    /// Unchecked value of `α_n`.
    pub fn value(&self, n: u32) -> Rat {
        match self {
            AlphaSeq::Constant(r) => r.clone(),
            AlphaSeq::Geometric { scale, ratio } => scale * num_traits::pow(ratio.clone(), n as usize),
            AlphaSeq::Harmonic { shift } => Rat::new(1.into(), (n as u64 + shift).into()),
            AlphaSeq::Explicit(v) => v[(n as usize).saturating_sub(1).min(v.len() - 1)].clone(),
            AlphaSeq::Custom { f, .. } => f(n),
        }
    }

    /// `α_n`, checked to lie in `(0, 1)`.
    pub fn alpha(&self, n: u32) -> Result<Rat, ConstructionError> {
        if n == 0 {
            return Err(ConstructionError::InvalidSequence("index starts at 1".into()));
        }
        if let AlphaSeq::Explicit(v) = self {
            if v.is_empty() {
                return Err(ConstructionError::InvalidSequence("empty explicit list".into()));
            }
        }
        let a = self.value(n);
        if a <= zero() || a >= one() {
            return Err(ConstructionError::InvalidSequence(format!("α_{n} = {} not in (0,1)", format_rat(&a))));
        }
        Ok(a)
    }

    /// Whether `α_n >= α_{n+1}` for all `n >= k`.
    pub fn nonincreasing_from(&self, k: u32) -> bool {
        match self {
            AlphaSeq::Constant(_) | AlphaSeq::Harmonic { .. } => true,
            AlphaSeq::Geometric { ratio, .. } => *ratio <= one(),
            AlphaSeq::Explicit(v) => {
                let start = (k as usize).saturating_sub(1);
                start >= v.len() || v[start..].windows(2).all(|w| w[0] >= w[1])
            }
            AlphaSeq::Custom { nonincreasing, .. } => *nonincreasing,
        }
    }

    /// An upper bound for `Σ_{n > l} α_n`, when one is known to be finite.
    pub fn tail_sum_bound(&self, l: u32) -> Option<Rat> {
        match self {
            AlphaSeq::Geometric { scale, ratio } if *ratio < one() => {
                Some(scale * num_traits::pow(ratio.clone(), l as usize + 1) / (one() - ratio))
            }
            _ => None,
        }
    }

    pub fn to_spec(&self) -> Option<SeqSpec> {
        Some(match self {
            AlphaSeq::Constant(r) => SeqSpec::Constant { r: r.clone() },
            AlphaSeq::Geometric { scale, ratio } => SeqSpec::Geometric { r: ratio.clone(), scale: scale.clone() },
            AlphaSeq::Harmonic { shift } => SeqSpec::Harmonic { shift: *shift },
            AlphaSeq::Explicit(v) => SeqSpec::Explicit { values: v.clone() },
            AlphaSeq::Custom { .. } => return None,
        })
    }
}

/// File form of a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum SeqSpec {
    Constant {
        #[serde(with = "rat_serde")]
        r: Rat,
    },
    Geometric {
        #[serde(with = "rat_serde")]
        r: Rat,
        #[serde(with = "rat_serde", default = "one")]
        scale: Rat,
    },
    Harmonic {
        #[serde(default = "default_shift")]
        shift: u64,
    },
    Explicit {
        #[serde(with = "crate::numerics::rat_vec_serde")]
        values: Vec<Rat>,
    },
}

fn default_shift() -> u64 {
    1
}

impl SeqSpec {
    pub fn build(&self) -> Result<AlphaSeq, ConstructionError> {
        let s = match self {
            SeqSpec::Constant { r } => AlphaSeq::Constant(r.clone()),
            SeqSpec::Geometric { r, scale } => AlphaSeq::Geometric { scale: scale.clone(), ratio: r.clone() },
            SeqSpec::Harmonic { shift } => AlphaSeq::Harmonic { shift: *shift },
            SeqSpec::Explicit { values } => AlphaSeq::Explicit(values.clone()),
        };
        s.alpha(1)?;
        Ok(s)
    }
}
