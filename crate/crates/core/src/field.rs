//! Arithmetic in a prime field F_q with a runtime modulus.
//!
//! Every masked value in the protocol lives in one session field. Moduli are
//! capped below 2^31 so that a product of two residues fits in a `u64`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::doma::BitVector;
use crate::error::{Error, Result};

/// Exclusive upper bound on supported moduli.
pub const MODULUS_CAP: u64 = 1 << 31;

/// A validated odd prime below [`MODULUS_CAP`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Modulus(u64);

impl Modulus {
    pub fn new(q: u64) -> Result<Self> {
        if q >= MODULUS_CAP {
            return Err(Error::config(format!("modulus {q} is not below 2^31")));
        }
        if !is_prime(q) {
            return Err(Error::config(format!("modulus {q} is not prime")));
        }
        if q == 2 {
            return Err(Error::config("modulus 2 has no inverse of 2"));
        }
        Ok(Modulus(q))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Bits needed to write any value below q, i.e. ceil(log2 q).
    pub fn sample_bits(self) -> u32 {
        64 - (self.0 - 1).leading_zeros()
    }

    /// Serialized width of one element: ceil(bits(q) / 8) bytes.
    pub fn byte_width(self) -> usize {
        let bits = 64 - self.0.leading_zeros();
        bits.div_ceil(8) as usize
    }

    pub fn zero(self) -> FieldElement {
        FieldElement {
            value: 0,
            modulus: self,
        }
    }

    pub fn one(self) -> FieldElement {
        FieldElement {
            value: 1,
            modulus: self,
        }
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element(self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.0,
            modulus: self,
        }
    }

    pub fn from_bit(self, bit: bool) -> FieldElement {
        self.element(bit as u64)
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Deterministic trial-division primality test; moduli are small.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest prime strictly greater than `bound`.
pub fn smallest_prime_above(bound: u64) -> Result<u64> {
    if bound < 2 {
        return Err(Error::input(format!(
            "prime search bound {bound} is below 2"
        )));
    }
    let mut candidate = bound + 1;
    while !is_prime(candidate) {
        candidate += 1;
    }
    Ok(candidate)
}

/// A residue modulo a session prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: Modulus,
}

impl FieldElement {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> Modulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    /// Appends the fixed-width little-endian encoding.
    pub fn write_le(self, out: &mut Vec<u8>) {
        let width = self.modulus.byte_width();
        out.extend_from_slice(&self.value.to_le_bytes()[..width]);
    }

    /// Decodes one element; rejects values that are not reduced.
    pub fn read_le(bytes: &[u8], modulus: Modulus) -> Result<Self> {
        if bytes.len() != modulus.byte_width() {
            return Err(Error::Wire(format!(
                "field element needs {} bytes, got {}",
                modulus.byte_width(),
                bytes.len()
            )));
        }
        let mut buf = [0u8; 8];
        buf[..bytes.len()].copy_from_slice(bytes);
        let value = u64::from_le_bytes(buf);
        if value >= modulus.value() {
            return Err(Error::Wire(format!(
                "value {value} is not reduced mod {modulus}"
            )));
        }
        Ok(FieldElement { value, modulus })
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

fn same_modulus(x: FieldElement, y: FieldElement) -> Result<Modulus> {
    if x.modulus != y.modulus {
        return Err(Error::config(format!(
            "modulus mismatch: {} vs {}",
            x.modulus, y.modulus
        )));
    }
    Ok(x.modulus)
}

pub fn mod_add(x: FieldElement, y: FieldElement) -> Result<FieldElement> {
    let q = same_modulus(x, y)?;
    Ok(q.element(x.value + y.value))
}

pub fn mod_sub(x: FieldElement, y: FieldElement) -> Result<FieldElement> {
    let q = same_modulus(x, y)?;
    Ok(q.element(x.value + q.value() - y.value))
}

pub fn mod_mul(x: FieldElement, y: FieldElement) -> Result<FieldElement> {
    let q = same_modulus(x, y)?;
    Ok(q.element(x.value * y.value))
}

pub fn mod_neg(x: FieldElement) -> FieldElement {
    x.modulus.element(x.modulus.value() - x.value)
}

/// Multiplicative inverse via the extended Euclidean algorithm.
pub fn mod_inv(x: FieldElement) -> Result<FieldElement> {
    let q = x.modulus;
    if x.value == 0 {
        return Err(Error::DivisionByZero { modulus: q.value() });
    }
    let (mut r0, mut r1) = (q.value() as i64, x.value as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let quot = r0 / r1;
        (r0, r1) = (r1, r0 - quot * r1);
        (t0, t1) = (t1, t0 - quot * t1);
    }
    debug_assert_eq!(r0, 1);
    Ok(q.element(t0.rem_euclid(q.value() as i64) as u64))
}

// Operator forms panic on a modulus mismatch; use the `mod_*` functions when
// the operands come from different sources.
impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: Self) -> Self {
        mod_add(self, rhs).expect("field operands share a modulus")
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;

    fn sub(self, rhs: Self) -> Self {
        mod_sub(self, rhs).expect("field operands share a modulus")
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;

    fn mul(self, rhs: Self) -> Self {
        mod_mul(self, rhs).expect("field operands share a modulus")
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> Self {
        mod_neg(self)
    }
}

/// A fixed-length sequence of elements of one field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldVector {
    modulus: Modulus,
    values: Vec<u64>,
}

impl FieldVector {
    /// Builds a vector, reducing every entry.
    pub fn new(modulus: Modulus, values: impl IntoIterator<Item = u64>) -> Self {
        let values = values.into_iter().map(|v| v % modulus.value()).collect();
        FieldVector { modulus, values }
    }

    pub fn zeros(modulus: Modulus, len: usize) -> Self {
        FieldVector {
            modulus,
            values: vec![0; len],
        }
    }

    pub fn from_elements(modulus: Modulus, elements: &[FieldElement]) -> Result<Self> {
        let mut values = Vec::with_capacity(elements.len());
        for e in elements {
            if e.modulus != modulus {
                return Err(Error::config(format!(
                    "modulus mismatch: {} vs {}",
                    e.modulus, modulus
                )));
            }
            values.push(e.value);
        }
        Ok(FieldVector { modulus, values })
    }

    /// Embeds a bit vector as 0/1 residues.
    pub fn from_bits(modulus: Modulus, bits: &BitVector) -> Self {
        FieldVector::new(modulus, bits.iter().map(u64::from))
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> FieldElement {
        FieldElement {
            value: self.values[i],
            modulus: self.modulus,
        }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = FieldElement> + '_ {
        let modulus = self.modulus;
        self.values
            .iter()
            .map(move |&value| FieldElement { value, modulus })
    }

    pub fn sum(&self) -> FieldElement {
        self.iter().fold(self.modulus.zero(), |acc, x| acc + x)
    }

    fn zip_with(
        &self,
        other: &FieldVector,
        f: impl Fn(FieldElement, FieldElement) -> FieldElement,
    ) -> Result<FieldVector> {
        if self.modulus != other.modulus {
            return Err(Error::config(format!(
                "modulus mismatch: {} vs {}",
                self.modulus, other.modulus
            )));
        }
        if self.len() != other.len() {
            return Err(Error::protocol(format!(
                "vector length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let values = self
            .iter()
            .zip(other.iter())
            .map(|(x, y)| f(x, y).value)
            .collect();
        Ok(FieldVector {
            modulus: self.modulus,
            values,
        })
    }

    pub fn add(&self, other: &FieldVector) -> Result<FieldVector> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &FieldVector) -> Result<FieldVector> {
        self.zip_with(other, |x, y| x - y)
    }

    /// `[self : tail]`.
    pub fn concat(&self, tail: &FieldVector) -> Result<FieldVector> {
        if self.modulus != tail.modulus {
            return Err(Error::config("modulus mismatch in concatenation"));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&tail.values);
        Ok(FieldVector {
            modulus: self.modulus,
            values,
        })
    }

    pub fn write_le(&self, out: &mut Vec<u8>) {
        for e in self.iter() {
            e.write_le(out);
        }
    }

    pub fn read_le(bytes: &[u8], modulus: Modulus) -> Result<Self> {
        let width = modulus.byte_width();
        if !bytes.len().is_multiple_of(width) {
            return Err(Error::Wire(format!(
                "payload of {} bytes is not a whole number of {width}-byte elements",
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(width)
            .map(|chunk| FieldElement::read_le(chunk, modulus).map(FieldElement::value))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldVector { modulus, values })
    }
}

/// A source of raw random bit blocks.
pub trait BlockSource {
    /// Returns a value in `[0, 2^bits)`.
    fn next_block(&mut self, bits: u32) -> Result<u64>;
}

/// Uniform field element by rejection sampling on ceil(log2 q)-bit blocks.
pub fn sample_uniform<S: BlockSource + ?Sized>(
    source: &mut S,
    modulus: Modulus,
) -> Result<FieldElement> {
    let bits = modulus.sample_bits();
    loop {
        let block = source.next_block(bits)?;
        if block < modulus.value() {
            return Ok(modulus.element(block));
        }
    }
}

pub fn sample_vector<S: BlockSource + ?Sized>(
    source: &mut S,
    modulus: Modulus,
    len: usize,
) -> Result<FieldVector> {
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(sample_uniform(source, modulus)?.value);
    }
    Ok(FieldVector { modulus, values })
}
