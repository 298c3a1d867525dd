//! Plaintext AND and dot product of binary vectors through regular and
//! modular addition.
//!
//! For bits `a_1..a_l` at one position, the sum `s` lies in `[0, l]` and
//! equals `l` exactly when every bit is set, so `(s - s mod l) / l` is their
//! AND. Summing the two-vector case over positions gives the dot product.
//! Arithmetic here is over the integers; field reduction happens only in the
//! protocol.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// An ordered sequence of bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Self {
        BitVector(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitVector(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        BitVector(vec![true; len])
    }

    /// From 0/1 integers; anything else is rejected.
    pub fn from_u8s(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::input(format!("{other} is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitVector)
    }

    /// The vector whose bits are the binary digits of `value`, least
    /// significant first.
    pub fn from_index(value: u64, len: usize) -> Self {
        BitVector((0..len).map(|i| value >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        check_lengths(self, other)?;
        Ok(BitVector(
            self.iter().zip(other.iter()).map(|(x, y)| x ^ y).collect(),
        ))
    }

    /// Bits as single bytes 0x00/0x01.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.iter().map(u8::from).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        BitVector::from_u8s(bytes).map_err(|e| Error::Wire(e.to_string()))
    }
}

impl FromIterator<bool> for BitVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitVector(iter.into_iter().collect())
    }
}

/// Parses text over `{0, 1}`; whitespace is ignored.
impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::input(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(Error::input("bit vector is empty"));
        }
        Ok(BitVector(bits))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn check_lengths(a: &BitVector, b: &BitVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "bit vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Element-wise sum, its residue mod l, and the resulting AND.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomaDecomposition {
    pub sums: Vec<u64>,
    pub residues: Vec<u64>,
    pub and: BitVector,
}

/// AND of `l >= 2` equal-length bit vectors via `(s - (s mod l)) / l`.
pub fn and_via_modadd(inputs: &[BitVector]) -> Result<DomaDecomposition> {
    and_with_divisor(inputs, inputs.len() as u64)
}

pub(crate) fn and_with_divisor(inputs: &[BitVector], divisor: u64) -> Result<DomaDecomposition> {
    if inputs.len() < 2 {
        return Err(Error::input(format!(
            "AND needs at least two vectors, got {}",
            inputs.len()
        )));
    }
    let n = inputs[0].len();
    if n == 0 {
        return Err(Error::input("vectors must be non-empty"));
    }
    for v in &inputs[1..] {
        check_lengths(&inputs[0], v)?;
    }
    let sums: Vec<u64> = (0..n)
        .map(|i| inputs.iter().map(|v| v.get(i) as u64).sum())
        .collect();
    let residues: Vec<u64> = sums.iter().map(|s| s % divisor).collect();
    let and = sums
        .iter()
        .zip(&residues)
        .map(|(s, m)| (s - m) / divisor == 1)
        .collect();
    Ok(DomaDecomposition {
        sums,
        residues,
        and,
    })
}

/// Dot product of two bit vectors as `sum_i ((a_i + b_i) - ((a_i + b_i) mod 2)) / 2`.
pub fn dot_via_modadd(a: &BitVector, b: &BitVector) -> Result<u64> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Err(Error::input("vectors must be non-empty"));
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let s = x as u64 + y as u64;
            (s - s % 2) / 2
        })
        .sum())
}

/// Reference dot product by direct multiplication.
pub fn brute_force_dot(a: &BitVector, b: &BitVector) -> Result<u64> {
    check_lengths(a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| x as u64 * y as u64)
        .sum())
}
