//! Finite binary strings.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid bit string {0:?}: only '0' and '1' allowed")]
pub struct BitStringError(pub String);

/// A finite binary string.
///
/// Ordering is by length first, then lexicographic. Every string of length
/// `n` therefore sorts before every string of length `n + 1`, which lets
/// ordered maps answer "all entries of length at most `n`" with one range.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        BitString {
            bits: bits.into_iter().collect(),
        }
    }

    /// The `len` low-order bits of `value`, most significant first.
    pub fn from_index(value: u64, len: usize) -> Self {
        BitString {
            bits: (0..len).rev().map(|i| (value >> i) & 1 == 1).collect(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        BitString { bits: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn last(&self) -> Option<bool> {
        self.bits.last().copied()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn pop(&mut self) -> Option<bool> {
        self.bits.pop()
    }

    pub fn child(&self, bit: bool) -> BitString {
        let mut bits = Vec::with_capacity(self.bits.len() + 1);
        bits.extend_from_slice(&self.bits);
        bits.push(bit);
        BitString { bits }
    }

    pub fn parent(&self) -> Option<BitString> {
        if self.bits.is_empty() {
            None
        } else {
            Some(self.prefix(self.bits.len() - 1))
        }
    }

    /// The first `n` bits. Panics if `n > len`.
    pub fn prefix(&self, n: usize) -> BitString {
        BitString {
            bits: self.bits[..n].to_vec(),
        }
    }

    pub fn truncate(&mut self, n: usize) {
        self.bits.truncate(n);
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.bits.starts_with(&self.bits)
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitString { bits }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Length of the longest common prefix.
    pub fn common_prefix_len(&self, other: &BitString) -> usize {
        self.bits.iter().zip(&other.bits).take_while(|(a, b)| a == b).count()
    }

    /// All strings of length exactly `len`, in lexicographic order.
    pub fn all_of_length(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "enumerating 2^{len} strings");
        (0..1u64 << len).map(move |v| BitString::from_index(v, len))
    }
}

impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bits
            .len()
            .cmp(&other.bits.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return f.write_str("ε");
        }
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = BitStringError;

    /// Accepts `0`/`1` characters; the empty string and `ε` both denote the
    /// empty bit string.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ε" {
            return Ok(BitString::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(BitStringError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|bits| BitString { bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let s: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a bit-string literal; panics on bad input. For tests and constants.
pub fn bits(s: &str) -> BitString {
    s.parse().expect("bit string literal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_relation() {
        let a = bits("01");
        let b = bits("0110");
        assert!(a.is_prefix_of(&b));
        assert!(!b.is_prefix_of(&a));
        assert!(BitString::empty().is_prefix_of(&a));
        assert!(a.is_prefix_of(&a));
        assert_eq!(a.concat(&bits("10")), b);
        assert_eq!(b.prefix(2), a);
        assert_eq!(b.common_prefix_len(&bits("0101")), 2);
    }

    #[test]
    fn length_first_order() {
        let mut v = vec![bits("1"), bits("00"), BitString::empty(), bits("0"), bits("01")];
        v.sort();
        assert_eq!(
            v,
            vec![BitString::empty(), bits("0"), bits("1"), bits("00"), bits("01")]
        );
        assert!(bits("11") < BitString::zeros(3));
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(BitString::empty().to_string(), "ε");
        assert_eq!("ε".parse::<BitString>().unwrap(), BitString::empty());
        assert_eq!("".parse::<BitString>().unwrap(), BitString::empty());
        assert!("012".parse::<BitString>().is_err());
        assert_eq!(BitString::from_index(5, 4), bits("0101"));
        assert_eq!(BitString::all_of_length(2).count(), 4);
    }
}
