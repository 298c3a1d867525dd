//! Captured message flow of one session, and per-party views of it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::Modulus;
use crate::harness::rng::{SharedDraw, PRG_NAME};
use crate::protocol::{PartyId, ProtocolMessage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub delivery_index: u64,
    pub message: ProtocolMessage,
}

/// Session parameters recorded alongside the messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptHeader {
    pub modulus: Modulus,
    pub n: usize,
    pub pad_len: usize,
    pub session_id: u64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpMode {
    /// Everything, including the true input length.
    Debug,
    /// `n` and `n'` replaced by their sum, as the master would see it.
    Redacted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub header: Option<TranscriptHeader>,
    pub entries: Vec<TranscriptEntry>,
    pub parties: Vec<PartyId>,
    pub shared: BTreeMap<PartyId, Vec<SharedDraw>>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn messages(&self) -> impl Iterator<Item = &ProtocolMessage> {
        self.entries.iter().map(|e| &e.message)
    }

    /// Messages addressed to `party`, in delivery order.
    pub fn received_by(&self, party: PartyId) -> impl Iterator<Item = &ProtocolMessage> {
        self.messages().filter(move |m| m.to == party)
    }

    /// Structured-text dump, one record per message.
    pub fn dump(&self, mode: DumpMode) -> String {
        let mut out = String::from("# bimpc transcript v1\n");
        if let Some(h) = &self.header {
            let _ = write!(out, "# q={} total_len={}", h.modulus, h.n + h.pad_len);
            match mode {
                DumpMode::Debug => {
                    let _ = write!(out, " n={} pad_len={}", h.n, h.pad_len);
                }
                DumpMode::Redacted => out.push_str(" n=redacted pad_len=redacted"),
            }
            let _ = write!(out, " session={} prg={PRG_NAME}", h.session_id);
            match h.seed {
                Some(seed) => {
                    let _ = writeln!(out, " seed={seed}");
                }
                None => out.push_str(" seed=none\n"),
            }
        }
        out.push_str("# index\tfrom\tto\tstep\tot\tpayload\n");
        for e in &self.entries {
            let m = &e.message;
            let ot = m
                .ot_index
                .map_or_else(|| "-".to_string(), |i| i.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.delivery_index,
                m.from,
                m.to,
                m.tag,
                ot,
                hex::encode(&m.payload)
            );
        }
        out
    }
}

/// What one party observes: the messages it receives and the randomness it
/// shares with other parties.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct View {
    pub party: PartyId,
    pub messages: Vec<ProtocolMessage>,
    pub shared: Vec<SharedDraw>,
}

impl View {
    /// Injective byte encoding, used as the key for distribution counting.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        out.push(self.party as u8);
        out.extend_from_slice(&(self.messages.len() as u32).to_le_bytes());
        for m in &self.messages {
            m.encode_into(&mut out);
        }
        let mut shared: Vec<&SharedDraw> = self.shared.iter().collect();
        shared.sort_by_key(|d| (d.purpose, d.index));
        out.extend_from_slice(&(shared.len() as u32).to_le_bytes());
        for d in shared {
            out.push(d.purpose.tag());
            out.extend_from_slice(&d.index.to_le_bytes());
            out.extend_from_slice(&(d.values.len() as u32).to_le_bytes());
            for v in d.values.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// The view of `party`; fails if it took no part in the session.
pub fn project_view(transcript: &Transcript, party: PartyId) -> Result<View> {
    if !transcript.parties.contains(&party) {
        return Err(Error::input(format!(
            "{party} is not a party of this transcript"
        )));
    }
    Ok(View {
        party,
        messages: transcript.received_by(party).cloned().collect(),
        shared: transcript.shared.get(&party).cloned().unwrap_or_default(),
    })
}
