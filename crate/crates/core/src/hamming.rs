//! Bitstrings and the Hamming-space metric.
//!
//! A [`BitString`] is a packed measurement outcome of up to 64 qubits. Its
//! textual form uses ASCII `0`/`1` with the leftmost character being qubit 0,
//! the same convention used for Bernstein-Vazirani secret strings. Packing puts
//! qubit 0 in the most significant of the `n_qubits` low bits, so integer order
//! on equal-length strings coincides with lexicographic order of their text.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Widest supported register.
pub const MAX_QUBITS: usize = 64;

/// Largest register for which the full space may be enumerated densely.
pub const DENSE_LIMIT: usize = 20;

/// Fixed-length binary string, the node identity in Hamming space.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    n_qubits: u8,
    bits: u64,
}

impl BitString {
    /// Builds a bitstring from its packed value (qubit 0 is the most significant bit).
    pub fn new(bits: u64, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if n_qubits < 64 && bits >> n_qubits != 0 {
            return Err(Error::invalid(format!(
                "value {bits:#x} does not fit in {n_qubits} qubits"
            )));
        }
        Ok(Self { n_qubits: n_qubits as u8, bits })
    }

    pub fn zeros(n_qubits: usize) -> Result<Self> {
        Self::new(0, n_qubits)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let n = text.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "bitstring length must be in 1..={MAX_QUBITS}, got {n}"
            )));
        }
        let mut bits = 0u64;
        for ch in text.bytes() {
            bits <<= 1;
            match ch {
                b'0' => {}
                b'1' => bits |= 1,
                other => {
                    return Err(Error::invalid(format!(
                        "bitstring {text:?} contains non-binary symbol {:?}",
                        other as char
                    )))
                }
            }
        }
        Self::new(bits, n)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    /// Packed value.
    pub fn as_u64(&self) -> u64 {
        self.bits
    }

    fn mask(&self) -> u64 {
        if self.n_qubits == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_qubits) - 1
        }
    }

    fn shift_of(&self, qubit: usize) -> u32 {
        (self.n_qubits as usize - 1 - qubit) as u32
    }

    /// Value of qubit `qubit` (0 = leftmost character).
    pub fn bit(&self, qubit: usize) -> bool {
        assert!(qubit < self.n_qubits(), "qubit {qubit} out of range");
        (self.bits >> self.shift_of(qubit)) & 1 == 1
    }

    pub fn with_flipped(&self, qubit: usize) -> Self {
        assert!(qubit < self.n_qubits(), "qubit {qubit} out of range");
        Self { n_qubits: self.n_qubits, bits: self.bits ^ (1 << self.shift_of(qubit)) }
    }

    /// XORs a packed mask into the string. Bits above `n_qubits` are ignored.
    pub fn xor_mask(&self, mask: u64) -> Self {
        Self { n_qubits: self.n_qubits, bits: (self.bits ^ mask) & self.mask() }
    }

    /// Flips every bit.
    pub fn complement(&self) -> Self {
        self.xor_mask(u64::MAX)
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Moves qubit `i` to position `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_qubits();
        if perm.len() != n || !perm.iter().all(|&p| p < n) || perm.iter().unique().count() != n {
            return Err(Error::invalid(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let mut out = Self::zeros(n)?;
        for (i, &target) in perm.iter().enumerate() {
            if self.bit(i) {
                out = out.with_flipped(target);
            }
        }
        Ok(out)
    }

    /// Hamming distance, without the length check.
    #[inline]
    pub(crate) fn distance_unchecked(&self, other: &Self) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    pub fn distance(&self, other: &Self) -> Result<u32> {
        hamming_distance(self, other)
    }
}

/// Number of positions at which `x` and `y` differ.
pub fn hamming_distance(x: &BitString, y: &BitString) -> Result<u32> {
    if x.n_qubits != y.n_qubits {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {} qubits",
            x.n_qubits, y.n_qubits
        )));
    }
    Ok(x.distance_unchecked(y))
}

/// All strings at exactly distance `i` from `x`, in lexicographic order.
pub fn neighbors_at_distance(x: &BitString, i: usize) -> Result<Vec<BitString>> {
    let n = x.n_qubits();
    if i > n {
        return Err(Error::invalid(format!("distance {i} exceeds string length {n}")));
    }
    let mut out: Vec<BitString> = (0..n)
        .combinations(i)
        .map(|positions| positions.into_iter().fold(*x, |acc, q| acc.with_flipped(q)))
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Parameters of the space H_N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HammingSpace {
    pub n_qubits: usize,
}

impl HammingSpace {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        Ok(Self { n_qubits })
    }

    /// 2^N, or `None` when it does not fit in a `u64`.
    pub fn size(&self) -> Option<u64> {
        1u64.checked_shl(self.n_qubits as u32)
    }

    /// Every string of the space exactly once, in lexicographic order.
    pub fn enumerate(&self) -> Result<impl Iterator<Item = BitString>> {
        enumerate_space(self)
    }
}

pub fn enumerate_space(space: &HammingSpace) -> Result<impl Iterator<Item = BitString>> {
    let n = space.n_qubits;
    if n > DENSE_LIMIT {
        return Err(Error::Capacity(format!(
            "dense enumeration is limited to {DENSE_LIMIT} qubits, got {n}"
        )));
    }
    Ok((0..1u64 << n).map(move |bits| BitString { n_qubits: n as u8, bits }))
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits() {
            f.write_str(if self.bit(q) { "1" } else { "0" })?;
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
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn distance_examples() {
        assert_eq!(hamming_distance(&bs("1111"), &bs("1011")).unwrap(), 1);
        assert_eq!(hamming_distance(&bs("0101"), &bs("0101")).unwrap(), 0);
        assert_eq!(hamming_distance(&bs("000"), &bs("111")).unwrap(), 3);
    }

    #[test]
    fn distance_rejects_length_mismatch() {
        assert!(matches!(
            hamming_distance(&bs("01"), &bs("011")),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn qubit_zero_is_leftmost() {
        let x = bs("100");
        assert!(x.bit(0));
        assert!(!x.bit(2));
        assert_eq!(x.as_u64(), 0b100);
        assert_eq!(bs("000").with_flipped(2).to_string(), "001");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(BitString::parse("").is_err());
        assert!(BitString::parse("01a").is_err());
        assert!(BitString::parse(&"1".repeat(65)).is_err());
        assert!(BitString::new(0b100, 2).is_err());
        assert_eq!(BitString::parse(&"1".repeat(64)).unwrap().count_ones(), 64);
    }

    #[test]
    fn neighbors_examples() {
        let got: Vec<String> = neighbors_at_distance(&bs("111"), 1)
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(got, ["011", "101", "110"]);
        assert_eq!(neighbors_at_distance(&bs("111"), 0).unwrap(), vec![bs("111")]);
        assert!(neighbors_at_distance(&bs("111"), 4).is_err());
    }

    #[test]
    fn neighbors_nine_qubits_distance_four_matches_enumeration() {
        let x = bs("011010011");
        let brute: Vec<BitString> = HammingSpace::new(9)
            .unwrap()
            .enumerate()
            .unwrap()
            .filter(|y| x.distance(y).unwrap() == 4)
            .collect();
        assert_eq!(brute.len(), 126);
        assert_eq!(neighbors_at_distance(&x, 4).unwrap(), brute);
    }

    #[test]
    fn neighbor_counts_are_binomial_exhaustively() {
        for n in 1..=6 {
            for x in HammingSpace::new(n).unwrap().enumerate().unwrap() {
                for i in 0..=n {
                    let ys = neighbors_at_distance(&x, i).unwrap();
                    assert_eq!(ys.len(), binomial(n, i));
                    assert_eq!(ys.iter().unique().count(), ys.len());
                }
            }
        }
    }

    #[test]
    fn enumeration_order_and_size() {
        let one: Vec<String> =
            HammingSpace::new(1).unwrap().enumerate().unwrap().map(|b| b.to_string()).collect();
        assert_eq!(one, ["0", "1"]);
        let three: Vec<String> =
            HammingSpace::new(3).unwrap().enumerate().unwrap().map(|b| b.to_string()).collect();
        assert_eq!(three.len(), 8);
        assert_eq!(three.first().unwrap(), "000");
        assert_eq!(three.last().unwrap(), "111");
        let mut sorted = three.clone();
        sorted.sort();
        assert_eq!(sorted, three);
        assert_eq!(HammingSpace::new(9).unwrap().enumerate().unwrap().count(), 512);
        assert!(matches!(
            HammingSpace::new(21).unwrap().enumerate().err(),
            Some(Error::Capacity(_))
        ));
    }

    #[test]
    fn round_trip_exhaustive_small() {
        for n in 1..=6 {
            for x in HammingSpace::new(n).unwrap().enumerate().unwrap() {
                assert_eq!(bs(&x.to_string()), x);
            }
        }
    }

    #[test]
    fn serde_uses_text_form() {
        let x = bs("0110");
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, "\"0110\"");
        assert_eq!(serde_json::from_str::<BitString>(&json).unwrap(), x);
        assert!(serde_json::from_str::<BitString>("\"0120\"").is_err());
    }

    #[test]
    fn permute_and_complement() {
        assert_eq!(bs("110").permute(&[2, 0, 1]).unwrap(), bs("101"));
        assert_eq!(bs("1100").complement(), bs("0011"));
        assert!(bs("110").permute(&[0, 0, 1]).is_err());
    }

    fn triple() -> impl Strategy<Value = (BitString, BitString, BitString)> {
        (1usize..=64).prop_flat_map(|n| {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            (any::<u64>(), any::<u64>(), any::<u64>()).prop_map(move |(a, b, c)| {
                (
                    BitString::new(a & mask, n).unwrap(),
                    BitString::new(b & mask, n).unwrap(),
                    BitString::new(c & mask, n).unwrap(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn metric_axioms((x, y, z) in triple()) {
            let xy = hamming_distance(&x, &y).unwrap();
            let yx = hamming_distance(&y, &x).unwrap();
            let xz = hamming_distance(&x, &z).unwrap();
            let yz = hamming_distance(&y, &z).unwrap();
            prop_assert_eq!(xy, yx);
            prop_assert!(xy as usize <= x.n_qubits());
            prop_assert_eq!(xy == 0, x == y);
            prop_assert!(xz <= xy + yz);
        }

        #[test]
        fn text_round_trip((x, _, _) in triple()) {
            prop_assert_eq!(BitString::parse(&x.to_string()).unwrap(), x);
        }
    }
}
