//! Labeled randomness streams.
//!
//! Every random value in a session is drawn from a stream identified by a
//! [`StreamLabel`]. In seeded mode the stream is ChaCha20 keyed by
//! SHA-256 over the scope seed and the label, so parties holding the same
//! pairwise seed derive identical streams. In enumerated mode the stream
//! replays values from an [`Assignment`]; the privacy audit uses this to walk
//! every possible randomness assignment. A recording mode hands out zeros
//! while noting which streams were read, to discover the randomness layout of
//! a configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{
    sample_uniform, sample_vector, BlockSource, FieldElement, FieldVector, Modulus,
};
use crate::protocol::PartyId;

/// Identifier of the seeded generator, recorded in transcript headers.
pub const PRG_NAME: &str = "chacha20/sha256-label-v1";

pub type Seed = [u8; 32];

/// Who holds a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    W1,
    W2,
    W1W2,
    W1Master,
    W2Master,
}

impl Scope {
    pub const ALL: [Scope; 5] = [
        Scope::W1,
        Scope::W2,
        Scope::W1W2,
        Scope::W1Master,
        Scope::W2Master,
    ];

    pub fn holders(self) -> &'static [PartyId] {
        match self {
            Scope::W1 => &[PartyId::W1],
            Scope::W2 => &[PartyId::W2],
            Scope::W1W2 => &[PartyId::W1, PartyId::W2],
            Scope::W1Master => &[PartyId::W1, PartyId::Master],
            Scope::W2Master => &[PartyId::W2, PartyId::Master],
        }
    }

    pub fn is_shared(self) -> bool {
        self.holders().len() > 1
    }

    fn tag(self) -> &'static [u8] {
        match self {
            Scope::W1 => b"w1",
            Scope::W2 => b"w2",
            Scope::W1W2 => b"w1-w2",
            Scope::W1Master => b"w1-master",
            Scope::W2Master => b"w2-master",
        }
    }
}

/// What a stream is used for. Each purpose belongs to exactly one scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Purpose {
    /// `k_1^s`
    AdditiveMaskW1 = 1,
    /// `k_2^s`
    AdditiveMaskW2 = 2,
    /// `p_1^s`
    PadW1 = 3,
    /// `p_2^s`
    PadW2 = 4,
    /// `k_2^m`
    XorMask = 5,
    /// `k`
    LabelMask = 6,
    /// `p^m`
    SharedPad = 7,
    /// `k^m[i]`
    OtChoiceMask = 8,
    /// `(alpha_0[i], alpha_1[i])`
    OtPads = 9,
}

impl Purpose {
    pub fn scope(self) -> Scope {
        match self {
            Purpose::AdditiveMaskW1 | Purpose::PadW1 => Scope::W1,
            Purpose::AdditiveMaskW2 | Purpose::PadW2 | Purpose::XorMask | Purpose::LabelMask => {
                Scope::W2
            }
            Purpose::SharedPad => Scope::W1W2,
            Purpose::OtChoiceMask => Scope::W1Master,
            Purpose::OtPads => Scope::W2Master,
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamKey {
    pub purpose: Purpose,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamLabel {
    pub session: u64,
    pub purpose: Purpose,
    pub index: u32,
}

impl StreamLabel {
    pub fn key(self) -> StreamKey {
        StreamKey {
            purpose: self.purpose,
            index: self.index,
        }
    }
}

/// Pairwise and private seeds for one two-client session.
#[derive(Clone, PartialEq, Eq)]
pub struct SeedMaterial {
    seeds: BTreeMap<Scope, Seed>,
}

impl SeedMaterial {
    /// Expands one harness seed into the five scope seeds.
    pub fn from_master_seed(seed: u64) -> Self {
        let seeds = Scope::ALL
            .iter()
            .map(|&scope| {
                let digest = Sha256::new()
                    .chain_update(b"bimpc-seed-v1")
                    .chain_update(seed.to_le_bytes())
                    .chain_update(scope.tag())
                    .finalize();
                (scope, digest.into())
            })
            .collect();
        SeedMaterial { seeds }
    }

    pub fn from_seeds(seeds: BTreeMap<Scope, Seed>) -> Result<Self> {
        for scope in Scope::ALL {
            if !seeds.contains_key(&scope) {
                return Err(Error::config(format!("missing seed for scope {scope:?}")));
            }
        }
        Ok(SeedMaterial { seeds })
    }

    pub fn seed(&self, scope: Scope) -> &Seed {
        &self.seeds[&scope]
    }
}

impl fmt::Debug for SeedMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SeedMaterial(..)")
    }
}

/// Values for every stream of one session, replayed verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    offsets: Arc<BTreeMap<StreamKey, (usize, usize)>>,
    values: Vec<u64>,
}

impl Assignment {
    pub fn from_streams(streams: BTreeMap<StreamKey, Vec<u64>>) -> Self {
        let mut offsets = BTreeMap::new();
        let mut values = Vec::new();
        for (key, stream) in streams {
            offsets.insert(key, (values.len(), values.len() + stream.len()));
            values.extend(stream);
        }
        Assignment {
            offsets: Arc::new(offsets),
            values,
        }
    }

    /// An assignment sharing `template`'s stream layout, with new values in
    /// the same flattened order.
    pub fn with_values(template: &Assignment, values: Vec<u64>) -> Result<Self> {
        if values.len() != template.values.len() {
            return Err(Error::Enumeration(format!(
                "assignment needs {} values, got {}",
                template.values.len(),
                values.len()
            )));
        }
        Ok(Assignment {
            offsets: template.offsets.clone(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stream(&self, key: StreamKey) -> Option<&[u64]> {
        self.offsets.get(&key).map(|&(s, e)| &self.values[s..e])
    }
}

/// Shared log of the streams read during a dry run, with the block width of
/// each draw.
#[derive(Debug, Default)]
pub struct Recorder {
    draws: Mutex<BTreeMap<StreamKey, Vec<u32>>>,
}

impl Recorder {
    fn record(&self, key: StreamKey, position: usize, bits: u32) {
        let mut draws = self.draws.lock().expect("recorder lock");
        let widths = draws.entry(key).or_default();
        if position == widths.len() {
            widths.push(bits);
        }
    }

    fn touch(&self, key: StreamKey) {
        self.draws
            .lock()
            .expect("recorder lock")
            .entry(key)
            .or_default();
    }

    pub fn draws(&self) -> BTreeMap<StreamKey, Vec<u32>> {
        self.draws.lock().expect("recorder lock").clone()
    }
}

#[derive(Debug, Clone)]
pub enum RandomnessSource {
    Seeded(SeedMaterial),
    Enumerated(Arc<Assignment>),
    Recording(Arc<Recorder>),
}

impl RandomnessSource {
    pub fn seeded(seed: u64) -> Self {
        RandomnessSource::Seeded(SeedMaterial::from_master_seed(seed))
    }

    pub fn enumerated(assignment: Assignment) -> Self {
        RandomnessSource::Enumerated(Arc::new(assignment))
    }

    /// The slice of this source a party may read: its private scope and the
    /// pairwise scopes it belongs to.
    pub fn for_party(&self, party: PartyId, session: u64) -> PartyRandomness {
        let scopes = party_scopes(party);
        let source = match self {
            RandomnessSource::Seeded(material) => {
                let mut seeds = BTreeMap::new();
                for &s in scopes {
                    seeds.insert(s, *material.seed(s));
                }
                PartySource::Seeded(seeds)
            }
            RandomnessSource::Enumerated(a) => PartySource::Enumerated(a.clone()),
            RandomnessSource::Recording(r) => PartySource::Recording(r.clone()),
        };
        PartyRandomness {
            party,
            session,
            scopes,
            source,
            shared_log: Vec::new(),
        }
    }
}

/// The private scope of `party` and the pairwise scopes it belongs to.
fn party_scopes(party: PartyId) -> &'static [Scope] {
    match party {
        PartyId::W1 => &[Scope::W1, Scope::W1W2, Scope::W1Master],
        PartyId::W2 => &[Scope::W2, Scope::W1W2, Scope::W2Master],
        PartyId::Master => &[Scope::W1Master, Scope::W2Master],
    }
}

/// Derives the stream for `label` with access to every scope.
pub fn derive_stream(source: &RandomnessSource, label: StreamLabel) -> Result<RandomStream> {
    match source {
        RandomnessSource::Seeded(material) => {
            Ok(seeded_stream(material.seed(label.purpose.scope()), label))
        }
        RandomnessSource::Enumerated(a) => replay_stream(a, label.key()),
        RandomnessSource::Recording(r) => Ok(recording_stream(r, label.key())),
    }
}

fn recording_stream(recorder: &Arc<Recorder>, key: StreamKey) -> RandomStream {
    recorder.touch(key);
    RandomStream(Inner::Recording {
        recorder: recorder.clone(),
        key,
        position: 0,
    })
}

fn seeded_stream(seed: &Seed, label: StreamLabel) -> RandomStream {
    let key: [u8; 32] = Sha256::new()
        .chain_update(b"bimpc-stream-v1")
        .chain_update(seed)
        .chain_update(label.session.to_le_bytes())
        .chain_update([label.purpose.tag()])
        .chain_update(label.index.to_le_bytes())
        .finalize()
        .into();
    RandomStream(Inner::Seeded(Box::new(ChaCha20Rng::from_seed(key))))
}

fn replay_stream(assignment: &Arc<Assignment>, key: StreamKey) -> Result<RandomStream> {
    let &(start, end) = assignment.offsets.get(&key).ok_or_else(|| {
        Error::Enumeration(format!(
            "assignment has no stream {}[{}]",
            key.purpose, key.index
        ))
    })?;
    Ok(RandomStream(Inner::Replay {
        assignment: assignment.clone(),
        cursor: start,
        end,
    }))
}

enum Inner {
    Seeded(Box<ChaCha20Rng>),
    Replay {
        assignment: Arc<Assignment>,
        cursor: usize,
        end: usize,
    },
    Recording {
        recorder: Arc<Recorder>,
        key: StreamKey,
        position: usize,
    },
}

/// One labeled stream of random blocks.
pub struct RandomStream(Inner);

impl BlockSource for RandomStream {
    fn next_block(&mut self, bits: u32) -> Result<u64> {
        debug_assert!((1..64).contains(&bits));
        match &mut self.0 {
            Inner::Seeded(rng) => Ok(rng.next_u64() & ((1u64 << bits) - 1)),
            Inner::Replay {
                assignment,
                cursor,
                end,
            } => {
                if *cursor == *end {
                    return Err(Error::Enumeration("replayed stream exhausted".into()));
                }
                let v = assignment.values[*cursor];
                *cursor += 1;
                if v >> bits != 0 {
                    return Err(Error::Enumeration(format!(
                        "replayed value {v} does not fit in {bits} bits"
                    )));
                }
                Ok(v)
            }
            Inner::Recording {
                recorder,
                key,
                position,
            } => {
                recorder.record(*key, *position, bits);
                *position += 1;
                Ok(0)
            }
        }
    }
}

impl RandomStream {
    pub fn draw_field(&mut self, modulus: Modulus) -> Result<FieldElement> {
        sample_uniform(self, modulus)
    }

    pub fn draw_vector(&mut self, modulus: Modulus, len: usize) -> Result<FieldVector> {
        sample_vector(self, modulus, len)
    }

    pub fn draw_bit(&mut self) -> Result<bool> {
        Ok(self.next_block(1)? == 1)
    }
}

enum PartySource {
    Seeded(BTreeMap<Scope, Seed>),
    Enumerated(Arc<Assignment>),
    Recording(Arc<Recorder>),
}

/// Values drawn from a pairwise scope, as they appear in a party's view.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SharedDraw {
    pub purpose: Purpose,
    pub index: u32,
    pub values: Arc<[u64]>,
}

/// A party's restricted access to session randomness. Draws from pairwise
/// scopes are logged for view projection.
pub struct PartyRandomness {
    party: PartyId,
    session: u64,
    scopes: &'static [Scope],
    source: PartySource,
    shared_log: Vec<SharedDraw>,
}

impl PartyRandomness {
    pub fn party(&self) -> PartyId {
        self.party
    }

    pub fn stream(&self, purpose: Purpose, index: u32) -> Result<RandomStream> {
        let scope = purpose.scope();
        if !self.scopes.contains(&scope) {
            return Err(Error::config(format!(
                "{} cannot derive {purpose} streams: scope {scope:?} is not shared with it",
                self.party
            )));
        }
        let label = StreamLabel {
            session: self.session,
            purpose,
            index,
        };
        match &self.source {
            PartySource::Seeded(seeds) => Ok(seeded_stream(&seeds[&scope], label)),
            PartySource::Enumerated(a) => replay_stream(a, label.key()),
            PartySource::Recording(r) => Ok(recording_stream(r, label.key())),
        }
    }

    fn log(&mut self, purpose: Purpose, index: u32, values: &[u64]) {
        if purpose.scope().is_shared() {
            self.shared_log.push(SharedDraw {
                purpose,
                index,
                values: values.into(),
            });
        }
    }

    pub fn field_vector(
        &mut self,
        purpose: Purpose,
        index: u32,
        modulus: Modulus,
        len: usize,
    ) -> Result<FieldVector> {
        let v = self.stream(purpose, index)?.draw_vector(modulus, len)?;
        self.log(purpose, index, v.values());
        Ok(v)
    }

    pub fn field_pair(
        &mut self,
        purpose: Purpose,
        index: u32,
        modulus: Modulus,
    ) -> Result<[FieldElement; 2]> {
        let mut s = self.stream(purpose, index)?;
        let pair = [s.draw_field(modulus)?, s.draw_field(modulus)?];
        self.log(purpose, index, &[pair[0].value(), pair[1].value()]);
        Ok(pair)
    }

    pub fn bits(&mut self, purpose: Purpose, index: u32, len: usize) -> Result<Vec<bool>> {
        let mut s = self.stream(purpose, index)?;
        let bits = (0..len).map(|_| s.draw_bit()).collect::<Result<Vec<_>>>()?;
        self.log(
            purpose,
            index,
            &bits.iter().map(|&b| b as u64).collect::<Vec<_>>(),
        );
        Ok(bits)
    }

    pub fn shared_draws(&self) -> &[SharedDraw] {
        &self.shared_log
    }

    pub fn into_shared_draws(self) -> Vec<SharedDraw> {
        self.shared_log
    }
}
