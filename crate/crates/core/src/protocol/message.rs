//! Party-to-party messages and their wire format.
//!
//! ```text
//! +-----+------+----+-----------------+------------------+---------+
//! | tag | from | to | OT index (u32)  | payload len (u32)| payload |
//! +-----+------+----+-----------------+------------------+---------+
//!   1B    1B    1B     4B LE             4B LE
//! ```
//!
//! The OT index is `0xFFFFFFFF` when unused. Field elements in the payload
//! use the session's fixed-width little-endian encoding; bits are single
//! bytes `0x00`/`0x01`.

use std::fmt;

use crate::doma::BitVector;
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldVector, Modulus};

pub const HEADER_LEN: usize = 11;
pub const NO_OT_INDEX: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PartyId {
    Master = 0,
    W1 = 1,
    W2 = 2,
}

impl PartyId {
    pub const ALL: [PartyId; 3] = [PartyId::W1, PartyId::W2, PartyId::Master];

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(PartyId::Master),
            1 => Ok(PartyId::W1),
            2 => Ok(PartyId::W2),
            other => Err(Error::Wire(format!("unknown party id {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PartyId::Master => "M",
            PartyId::W1 => "W1",
            PartyId::W2 => "W2",
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PartyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "master" | "Master" => Ok(PartyId::Master),
            "W1" | "w1" => Ok(PartyId::W1),
            "W2" | "w2" => Ok(PartyId::W2),
            other => Err(Error::input(format!("unknown party {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum StepTag {
    AdditiveShare = 1,
    XorMaskedInput = 2,
    OtMaskedChoice = 3,
    OtMaskedLabels = 4,
    OtDelivery = 5,
    PadVector = 6,
    KeySum = 7,
}

impl StepTag {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => StepTag::AdditiveShare,
            2 => StepTag::XorMaskedInput,
            3 => StepTag::OtMaskedChoice,
            4 => StepTag::OtMaskedLabels,
            5 => StepTag::OtDelivery,
            6 => StepTag::PadVector,
            7 => StepTag::KeySum,
            other => return Err(Error::Wire(format!("unknown step tag {other}"))),
        })
    }
}

impl fmt::Display for StepTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtocolMessage {
    pub from: PartyId,
    pub to: PartyId,
    pub tag: StepTag,
    pub ot_index: Option<u32>,
    pub payload: Vec<u8>,
}

impl ProtocolMessage {
    fn new(
        from: PartyId,
        to: PartyId,
        tag: StepTag,
        ot_index: Option<u32>,
        payload: Vec<u8>,
    ) -> Self {
        ProtocolMessage {
            from,
            to,
            tag,
            ot_index,
            payload,
        }
    }

    pub fn additive_share(from: PartyId, share: &FieldVector) -> Self {
        let mut payload = Vec::with_capacity(16);
        share.write_le(&mut payload);
        Self::new(from, PartyId::Master, StepTag::AdditiveShare, None, payload)
    }

    pub fn xor_masked_input(masked: &BitVector) -> Self {
        Self::new(
            PartyId::W2,
            PartyId::W1,
            StepTag::XorMaskedInput,
            None,
            masked.to_bytes(),
        )
    }

    pub fn ot_masked_choice(index: u32, masked_choice: bool) -> Self {
        Self::new(
            PartyId::W1,
            PartyId::W2,
            StepTag::OtMaskedChoice,
            Some(index),
            vec![masked_choice as u8],
        )
    }

    pub fn ot_masked_labels(index: u32, labels: (FieldElement, FieldElement)) -> Self {
        let mut payload = Vec::with_capacity(16);
        labels.0.write_le(&mut payload);
        labels.1.write_le(&mut payload);
        Self::new(
            PartyId::W2,
            PartyId::W1,
            StepTag::OtMaskedLabels,
            Some(index),
            payload,
        )
    }

    pub fn ot_delivery(index: u32, delivery: FieldElement) -> Self {
        let mut payload = Vec::with_capacity(16);
        delivery.write_le(&mut payload);
        Self::new(
            PartyId::W1,
            PartyId::Master,
            StepTag::OtDelivery,
            Some(index),
            payload,
        )
    }

    pub fn pad_vector(pad: &FieldVector) -> Self {
        let mut payload = Vec::with_capacity(16);
        pad.write_le(&mut payload);
        Self::new(
            PartyId::W1,
            PartyId::Master,
            StepTag::PadVector,
            None,
            payload,
        )
    }

    pub fn key_sum(from: PartyId, key: FieldElement) -> Self {
        let mut payload = Vec::with_capacity(16);
        key.write_le(&mut payload);
        Self::new(from, PartyId::Master, StepTag::KeySum, None, payload)
    }

    pub fn field_vector(&self, modulus: Modulus) -> Result<FieldVector> {
        FieldVector::read_le(&self.payload, modulus)
    }

    pub fn field_element(&self, modulus: Modulus) -> Result<FieldElement> {
        FieldElement::read_le(&self.payload, modulus)
    }

    pub fn field_pair(&self, modulus: Modulus) -> Result<(FieldElement, FieldElement)> {
        let v = self.field_vector(modulus)?;
        if v.len() != 2 {
            return Err(Error::Wire(format!(
                "expected 2 field elements, got {}",
                v.len()
            )));
        }
        Ok((v.get(0), v.get(1)))
    }

    pub fn bits(&self) -> Result<BitVector> {
        BitVector::from_bytes(&self.payload)
    }

    pub fn bit(&self) -> Result<bool> {
        match self.payload.as_slice() {
            [0] => Ok(false),
            [1] => Ok(true),
            other => Err(Error::Wire(format!("expected one bit byte, got {other:?}"))),
        }
    }

    pub fn ot_index(&self) -> Result<u32> {
        self.ot_index
            .ok_or_else(|| Error::Wire(format!("{} message carries no OT index", self.tag)))
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.reserve(self.wire_len());
        out.push(self.tag as u8);
        out.push(self.from as u8);
        out.push(self.to as u8);
        out.extend_from_slice(&self.ot_index.unwrap_or(NO_OT_INDEX).to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut out);
        out
    }

    /// Decodes one message from the front of `bytes`, returning it with the
    /// number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Wire(format!(
                "truncated header: {} bytes",
                bytes.len()
            )));
        }
        let tag = StepTag::from_u8(bytes[0])?;
        let from = PartyId::from_u8(bytes[1])?;
        let to = PartyId::from_u8(bytes[2])?;
        let raw_index = u32::from_le_bytes(bytes[3..7].try_into().expect("4 bytes"));
        let len = u32::from_le_bytes(bytes[7..11].try_into().expect("4 bytes")) as usize;
        let end = HEADER_LEN
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Wire(format!("payload length {len} overruns buffer")))?;
        let ot_index = (raw_index != NO_OT_INDEX).then_some(raw_index);
        Ok((
            Self::new(from, to, tag, ot_index, bytes[HEADER_LEN..end].to_vec()),
            end,
        ))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (msg, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(Error::Wire(format!(
                "{} trailing bytes after message",
                bytes.len() - used
            )));
        }
        Ok(msg)
    }
}
