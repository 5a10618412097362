use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A value in {-1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct SpinBit(i8);

impl SpinBit {
    pub const PLUS: SpinBit = SpinBit(1);
    pub const MINUS: SpinBit = SpinBit(-1);

    pub fn new(value: i8) -> Result<Self> {
        match value {
            1 | -1 => Ok(SpinBit(value)),
            other => Err(Error::Format(format!("spin value must be -1 or +1, got {other}"))),
        }
    }

    #[inline]
    pub fn value(self) -> i8 {
        self.0
    }

    /// Boolean view under `s = 2q - 1`.
    #[inline]
    pub fn to_bool(self) -> BoolBit {
        BoolBit(((self.0 + 1) / 2) as u8)
    }

    #[inline]
    pub fn flip(self) -> Self {
        SpinBit(-self.0)
    }
}

impl TryFrom<i8> for SpinBit {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        SpinBit::new(v)
    }
}

impl From<SpinBit> for i8 {
    fn from(s: SpinBit) -> i8 {
        s.0
    }
}

/// A value in {0, 1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BoolBit(u8);

impl BoolBit {
    pub const ZERO: BoolBit = BoolBit(0);
    pub const ONE: BoolBit = BoolBit(1);

    pub fn new(value: u8) -> Result<Self> {
        match value {
            0 | 1 => Ok(BoolBit(value)),
            other => Err(Error::Format(format!("bit value must be 0 or 1, got {other}"))),
        }
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn is_set(self) -> bool {
        self.0 == 1
    }

    #[inline]
    pub fn to_spin(self) -> SpinBit {
        SpinBit(2 * self.0 as i8 - 1)
    }
}

impl From<bool> for BoolBit {
    fn from(b: bool) -> Self {
        BoolBit(b as u8)
    }
}

/// Sign of a nonzero integer. Zero means a fan-in that is not `2^n - 1`.
pub fn sgn_spin(x: i64) -> Result<SpinBit> {
    match x.signum() {
        1 => Ok(SpinBit::PLUS),
        -1 => Ok(SpinBit::MINUS),
        _ => Err(Error::SignAtZero),
    }
}

/// True for widths of the form `2^n - 1` with `n >= 1`.
pub fn is_mersenne_width(width: usize) -> bool {
    width >= 1 && (width + 1).is_power_of_two()
}
