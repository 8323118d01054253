//! The four supported semirings and exact arithmetic over their carriers.
//!
//! | kind              | carrier                 | ⊕   | ⊙            | 𝟘   | 𝟙   |
//! |-------------------|-------------------------|-----|--------------|-----|-----|
//! | Boolean           | {0, 1}                  | ∨   | ∧            | 0   | 1   |
//! | Tropical          | ℕ ∪ {∞}                 | min | +            | ∞   | 0   |
//! | BoundedTropical b | {0..b} ∪ {∞}            | min | + (∞ above b)| ∞   | 0   |
//! | Bottleneck        | ℕ ∪ {−∞, ∞}             | max | min          | −∞  | ∞   |
//!
//! Finite values are stored as `u64`. Tropical products are sums of at most
//! `word length + 2` factors, each at most the largest weight in the
//! automaton, so overflow needs `len × max weight > 2^64`. `mul` checks it
//! anyway and reports [`SemiringError::Overflow`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemiringError {
    #[error("weight {weight} is not valid in the {spec} semiring")]
    InvalidWeight { weight: Weight, spec: SemiringSpec },
    #[error("invalid semiring specification: {0}")]
    InvalidSpec(String),
    #[error("cannot parse weight {0:?}")]
    ParseWeight(String),
    #[error("finite weight overflow while computing {0} + {1}")]
    Overflow(u64, u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemiringKind {
    Boolean,
    Tropical,
    BoundedTropical,
    Bottleneck,
}

impl SemiringKind {
    pub fn name(self) -> &'static str {
        match self {
            SemiringKind::Boolean => "boolean",
            SemiringKind::Tropical => "tropical",
            SemiringKind::BoundedTropical => "btropical",
            SemiringKind::Bottleneck => "bottleneck",
        }
    }
}

impl fmt::Display for SemiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemiringKind {
    type Err = SemiringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boolean" => Ok(SemiringKind::Boolean),
            "tropical" => Ok(SemiringKind::Tropical),
            "btropical" => Ok(SemiringKind::BoundedTropical),
            "bottleneck" => Ok(SemiringKind::Bottleneck),
            other => Err(SemiringError::InvalidSpec(format!("unknown semiring {other:?}"))),
        }
    }
}

/// A semiring together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemiringSpec {
    Boolean,
    Tropical,
    /// Bounded tropical semiring with bound `b ≥ 1`.
    BoundedTropical(u64),
    Bottleneck,
}

impl SemiringSpec {
    /// Builds a spec from a kind and an optional bound, enforcing that the
    /// bound is present (and ≥ 1) exactly for the bounded tropical semiring.
    pub fn new(kind: SemiringKind, bound: Option<u64>) -> Result<Self, SemiringError> {
        match (kind, bound) {
            (SemiringKind::BoundedTropical, Some(b)) if b >= 1 => Ok(SemiringSpec::BoundedTropical(b)),
            (SemiringKind::BoundedTropical, Some(_)) => {
                Err(SemiringError::InvalidSpec("bound must be at least 1".into()))
            }
            (SemiringKind::BoundedTropical, None) => {
                Err(SemiringError::InvalidSpec("btropical requires a bound".into()))
            }
            (_, Some(_)) => Err(SemiringError::InvalidSpec(format!(
                "{kind} does not take a bound"
            ))),
            (SemiringKind::Boolean, None) => Ok(SemiringSpec::Boolean),
            (SemiringKind::Tropical, None) => Ok(SemiringSpec::Tropical),
            (SemiringKind::Bottleneck, None) => Ok(SemiringSpec::Bottleneck),
        }
    }

    pub fn kind(&self) -> SemiringKind {
        match self {
            SemiringSpec::Boolean => SemiringKind::Boolean,
            SemiringSpec::Tropical => SemiringKind::Tropical,
            SemiringSpec::BoundedTropical(_) => SemiringKind::BoundedTropical,
            SemiringSpec::Bottleneck => SemiringKind::Bottleneck,
        }
    }

    pub fn bound(&self) -> Option<u64> {
        match self {
            SemiringSpec::BoundedTropical(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SemiringSpec::Boolean | SemiringSpec::BoundedTropical(_))
    }

    pub fn zero(&self) -> Weight {
        match self {
            SemiringSpec::Boolean => Weight::Bit(false),
            SemiringSpec::Tropical | SemiringSpec::BoundedTropical(_) => Weight::PlusInf,
            SemiringSpec::Bottleneck => Weight::MinusInf,
        }
    }

    pub fn one(&self) -> Weight {
        match self {
            SemiringSpec::Boolean => Weight::Bit(true),
            SemiringSpec::Tropical | SemiringSpec::BoundedTropical(_) => Weight::Finite(0),
            SemiringSpec::Bottleneck => Weight::PlusInf,
        }
    }

    pub fn is_valid(&self, w: Weight) -> bool {
        match (self, w) {
            (SemiringSpec::Boolean, Weight::Bit(_)) => true,
            (SemiringSpec::Tropical, Weight::Finite(_) | Weight::PlusInf) => true,
            (SemiringSpec::BoundedTropical(b), Weight::Finite(v)) => v <= *b,
            (SemiringSpec::BoundedTropical(_), Weight::PlusInf) => true,
            (SemiringSpec::Bottleneck, Weight::Finite(_) | Weight::PlusInf | Weight::MinusInf) => true,
            _ => false,
        }
    }

    pub fn validate(&self, w: Weight) -> Result<Weight, SemiringError> {
        if self.is_valid(w) {
            Ok(w)
        } else {
            Err(SemiringError::InvalidWeight { weight: w, spec: *self })
        }
    }

    /// `x ⊕ y`.
    pub fn add(&self, x: Weight, y: Weight) -> Result<Weight, SemiringError> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.plus(x, y))
    }

    /// `x ⊙ y`.
    pub fn mul(&self, x: Weight, y: Weight) -> Result<Weight, SemiringError> {
        self.validate(x)?;
        self.validate(y)?;
        self.times(x, y)
    }

    /// ⊕ on operands already known to be valid.
    pub(crate) fn plus(&self, x: Weight, y: Weight) -> Weight {
        match self {
            SemiringSpec::Boolean => Weight::Bit(x.bit() || y.bit()),
            SemiringSpec::Tropical | SemiringSpec::BoundedTropical(_) => {
                if x.numeric_cmp(&y) == Ordering::Greater {
                    y
                } else {
                    x
                }
            }
            SemiringSpec::Bottleneck => {
                if x.numeric_cmp(&y) == Ordering::Less {
                    y
                } else {
                    x
                }
            }
        }
    }

    /// ⊙ on operands already known to be valid.
    pub(crate) fn times(&self, x: Weight, y: Weight) -> Result<Weight, SemiringError> {
        Ok(match self {
            SemiringSpec::Boolean => Weight::Bit(x.bit() && y.bit()),
            SemiringSpec::Tropical => match (x, y) {
                (Weight::Finite(a), Weight::Finite(b)) => {
                    Weight::Finite(a.checked_add(b).ok_or(SemiringError::Overflow(a, b))?)
                }
                _ => Weight::PlusInf,
            },
            SemiringSpec::BoundedTropical(bound) => match (x, y) {
                (Weight::Finite(a), Weight::Finite(b)) if a.saturating_add(b) <= *bound => {
                    Weight::Finite(a + b)
                }
                _ => Weight::PlusInf,
            },
            SemiringSpec::Bottleneck => {
                if x.numeric_cmp(&y) == Ordering::Greater {
                    y
                } else {
                    x
                }
            }
        })
    }

    /// Parses a weight rendered by [`Weight`]'s `Display` and validates it.
    pub fn parse_weight(&self, s: &str) -> Result<Weight, SemiringError> {
        let w = match (self, s) {
            (SemiringSpec::Boolean, "0") => Weight::Bit(false),
            (SemiringSpec::Boolean, "1") => Weight::Bit(true),
            (SemiringSpec::Boolean, _) => return Err(SemiringError::ParseWeight(s.to_string())),
            (_, "inf") => Weight::PlusInf,
            (_, "-inf") => Weight::MinusInf,
            (_, digits) if !digits.is_empty() && digits.bytes().all(|c| c.is_ascii_digit()) => {
                Weight::Finite(
                    digits.parse().map_err(|_| SemiringError::ParseWeight(s.to_string()))?,
                )
            }
            _ => return Err(SemiringError::ParseWeight(s.to_string())),
        };
        self.validate(w)
    }
}

impl fmt::Display for SemiringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiringSpec::BoundedTropical(b) => write!(f, "btropical({b})"),
            other => f.write_str(other.kind().name()),
        }
    }
}

/// A semiring element. Which variants are legal depends on the
/// [`SemiringSpec`]; see [`SemiringSpec::is_valid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weight {
    Bit(bool),
    Finite(u64),
    PlusInf,
    MinusInf,
}

impl Weight {
    fn bit(&self) -> bool {
        matches!(self, Weight::Bit(true))
    }

    /// Order on the extended naturals −∞ < 0 < 1 < … < ∞. Bits compare as 0/1.
    fn numeric_cmp(&self, other: &Weight) -> Ordering {
        fn rank(w: &Weight) -> (u8, u64) {
            match w {
                Weight::MinusInf => (0, 0),
                Weight::Bit(b) => (1, *b as u64),
                Weight::Finite(v) => (1, *v),
                Weight::PlusInf => (2, 0),
            }
        }
        rank(self).cmp(&rank(other))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Bit(b) => write!(f, "{}", *b as u8),
            Weight::Finite(v) => write!(f, "{v}"),
            Weight::PlusInf => f.write_str("inf"),
            Weight::MinusInf => f.write_str("-inf"),
        }
    }
}
