//! Wire labels and the security parameter that sizes them.
//!
//! Labels are K-bit strings held in the low bits of a `u128`; bits at
//! positions `K..128` are always zero. Bit 0 is the point-and-permute bit for
//! ordinary circuit wires.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use rand::{CryptoRng, Rng};
use thiserror::Error;

/// Number of zero bits appended to an output label inside a garbled row.
pub const VALIDITY_PAD_BITS: usize = 8;

/// Largest K for which a label plus its validity pad fits in one block.
pub const MAX_SECURITY_BITS: usize = 128 - VALIDITY_PAD_BITS;

/// Smallest K accepted.
pub const MIN_SECURITY_BITS: usize = 16;

/// Default bit security.
pub const DEFAULT_SECURITY_BITS: usize = 80;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SecurityError {
    #[error("security parameter {0} outside supported range {MIN_SECURITY_BITS}..={MAX_SECURITY_BITS}")]
    OutOfRange(usize),
    #[error("label encoding needs {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("label has bits set above position {0}")]
    Overflow(usize),
}

/// Bit security K. Determines label width and all derived encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Security {
    bits: u8,
}

impl Security {
    pub fn new(bits: usize) -> Result<Self, SecurityError> {
        if !(MIN_SECURITY_BITS..=MAX_SECURITY_BITS).contains(&bits) {
            return Err(SecurityError::OutOfRange(bits));
        }
        Ok(Self { bits: bits as u8 })
    }

    pub fn bits(self) -> usize {
        self.bits as usize
    }

    /// Bytes needed for one serialized label.
    pub fn label_bytes(self) -> usize {
        self.bits().div_ceil(8)
    }

    /// Bytes needed for one garbled row (label plus validity pad).
    pub fn row_bytes(self) -> usize {
        (self.bits() + VALIDITY_PAD_BITS).div_ceil(8)
    }

    pub fn label_mask(self) -> u128 {
        (1u128 << self.bits()) - 1
    }

    pub fn row_mask(self) -> u128 {
        let width = self.bits() + VALIDITY_PAD_BITS;
        if width == 128 {
            u128::MAX
        } else {
            (1u128 << width) - 1
        }
    }

    pub fn truncate(self, raw: u128) -> Label {
        Label(raw & self.label_mask())
    }

    pub fn random_label<R: Rng + CryptoRng>(self, rng: &mut R) -> Label {
        self.truncate(rng.gen())
    }

    pub fn write_label(self, out: &mut Vec<u8>, label: Label) {
        out.extend_from_slice(&label.0.to_le_bytes()[..self.label_bytes()]);
    }

    pub fn read_label(self, bytes: &[u8]) -> Result<Label, SecurityError> {
        let n = self.label_bytes();
        if bytes.len() < n {
            return Err(SecurityError::Truncated {
                expected: n,
                actual: bytes.len(),
            });
        }
        let mut buf = [0u8; 16];
        buf[..n].copy_from_slice(&bytes[..n]);
        let raw = u128::from_le_bytes(buf);
        if raw & !self.label_mask() != 0 {
            return Err(SecurityError::Overflow(self.bits()));
        }
        Ok(Label(raw))
    }
}

impl Default for Security {
    fn default() -> Self {
        Self {
            bits: DEFAULT_SECURITY_BITS as u8,
        }
    }
}

/// A garbled wire value.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub u128);

impl Label {
    pub const ZERO: Label = Label(0);

    /// Point-and-permute bit at the conventional position 0.
    pub fn pp(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn bit(self, index: usize) -> bool {
        (self.0 >> index) & 1 == 1
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Returns `self` if `bit` is false, `self ^ delta` otherwise.
    pub fn select(self, delta: Label, bit: bool) -> Label {
        if bit {
            self ^ delta
        } else {
            self
        }
    }
}

impl BitXor for Label {
    type Output = Label;

    fn bitxor(self, rhs: Label) -> Label {
        Label(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for Label {
    fn bitxor_assign(&mut self, rhs: Label) {
        self.0 ^= rhs.0;
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label({:032x})", self.0)
    }
}

/// Per-circuit free-XOR offset. Its point-and-permute bit is always 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitKey(Label);

impl CircuitKey {
    /// Forces the pp bit so label pairs always differ in it.
    pub fn from_raw(security: Security, raw: u128) -> Self {
        CircuitKey(Label((raw | 1) & security.label_mask()))
    }

    pub fn label(self) -> Label {
        self.0
    }
}

/// PRG seed from which a whole circuit instance is regenerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CircuitSeed(pub Label);

impl CircuitSeed {
    pub fn random<R: Rng + CryptoRng>(security: Security, rng: &mut R) -> Self {
        CircuitSeed(security.random_label(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn widths_for_default_security() {
        let sec = Security::default();
        assert_eq!(sec.bits(), 80);
        assert_eq!(sec.label_bytes(), 10);
        assert_eq!(sec.row_bytes(), 11);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Security::new(8).is_err());
        assert!(Security::new(121).is_err());
        assert!(Security::new(120).is_ok());
    }

    #[test]
    fn label_round_trip_and_overflow() {
        let sec = Security::new(63).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let l = sec.random_label(&mut rng);
        let mut buf = Vec::new();
        sec.write_label(&mut buf, l);
        assert_eq!(buf.len(), 8);
        assert_eq!(sec.read_label(&buf).unwrap(), l);
        buf[7] |= 0x80;
        assert_eq!(sec.read_label(&buf), Err(SecurityError::Overflow(63)));
        assert!(sec.read_label(&buf[..3]).is_err());
    }

    #[test]
    fn circuit_key_has_pp_bit() {
        let sec = Security::default();
        for raw in [0u128, 2, u128::MAX - 1] {
            let k = CircuitKey::from_raw(sec, raw);
            assert!(k.label().pp());
            assert!(!k.label().is_zero());
        }
    }
}
