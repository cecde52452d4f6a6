use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HexError {
    #[error("hash hex must be exactly 64 characters, got {0}")]
    Length(usize),
    #[error("invalid hex digit in hash: {0}")]
    Digit(#[from] hex::FromHexError),
}

/// 256-bit fingerprint. Bit 0 is the most significant bit of byte 0, so the
/// hex form reads bits in index order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashBits([u8; 32]);

impl HashBits {
    pub const BITS: usize = 256;
    pub const ZERO: HashBits = HashBits([0; 32]);

    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        HashBits(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn bit(&self, index: usize) -> bool {
        self.0[index / 8] & (0x80 >> (index % 8)) != 0
    }

    pub fn set(&mut self, index: usize, value: bool) {
        let mask = 0x80 >> (index % 8);
        if value {
            self.0[index / 8] |= mask;
        } else {
            self.0[index / 8] &= !mask;
        }
    }

    pub fn flip(&mut self, index: usize) {
        self.0[index / 8] ^= 0x80 >> (index % 8);
    }

    pub fn complement(&self) -> Self {
        HashBits(self.0.map(|b| !b))
    }

    /// Four big-endian 64-bit words covering bits 0..64, 64..128, ...
    pub fn words(&self) -> [u64; 4] {
        std::array::from_fn(|i| u64::from_be_bytes(self.0[i * 8..i * 8 + 8].try_into().expect("8 bytes")))
    }

    pub fn count_ones(&self) -> u32 {
        self.words().iter().map(|w| w.count_ones()).sum()
    }

    pub fn distance(&self, other: &HashBits) -> u32 {
        self.words()
            .iter()
            .zip(other.words())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        if s.len() != 64 {
            return Err(HexError::Length(s.len()));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(HashBits(out))
    }

    /// Parses the hex layout printed by the ThreatExchange PDQ tools, where
    /// the string is a big-endian 256-bit integer and bit `k` has value `2^k`.
    pub fn from_reference_hex(s: &str) -> Result<Self, HexError> {
        let reference = Self::from_hex(s)?;
        Ok(HashBits(std::array::from_fn(|i| reference.0[31 - i].reverse_bits())))
    }

    pub fn to_reference_hex(&self) -> String {
        let flipped: [u8; 32] = std::array::from_fn(|i| self.0[31 - i].reverse_bits());
        hex::encode(flipped)
    }
}

impl fmt::Display for HashBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for HashBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashBits({})", self.to_hex())
    }
}

impl FromStr for HashBits {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

impl serde::Serialize for HashBits {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> serde::Deserialize<'de> for HashBits {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        HashBits::from_hex(&text).map_err(serde::de::Error::custom)
    }
}
