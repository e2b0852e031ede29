use std::fmt;
use std::str::FromStr;

use crate::error::NofError;

/// A fixed-length string of bits, first bit leftmost.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    /// `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        Self((0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn set(&mut self, index: usize, bit: bool) {
        self.0[index] = bit;
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Interpret as an unsigned integer, first bit most significant.
    pub fn to_u64(&self) -> u64 {
        debug_assert!(self.0.len() <= 64);
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn parity(&self) -> bool {
        self.count_ones() % 2 == 1
    }

    pub fn slice(&self, start: usize, len: usize) -> BitString {
        BitString(self.0[start..start + len].to_vec())
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> BitString {
        let mut out = BitString::new();
        for p in parts {
            out.extend(p);
        }
        out
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = NofError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(NofError::Parse(format!("unexpected character `{other}` in bit string"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// Parity of `a & b` over the low bits.
#[inline]
pub fn dot(a: u64, b: u64) -> bool {
    (a & b).count_ones() % 2 == 1
}
