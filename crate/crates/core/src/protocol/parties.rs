//! The three party state machines of the two-client protocol.
//!
//! Client W1 holds `a`, client W2 holds `b`, and the master learns
//! `y = a . b`. Each party consumes one message at a time and rejects any
//! message that arrives out of step order. Message flow:
//!
//! | step | message                              | route     |
//! |------|--------------------------------------|-----------|
//! | 1-2  | `s''_u = [x_u + k_u^s : p_u^s]`      | Wu -> M   |
//! | 4    | `b xor k_2^m`                        | W2 -> W1  |
//! | 7    | per element: `m''`, `(g0, g1)`, `g_{m'}` | W1 -> W2 -> W1 -> M |
//! | 8    | `p^m`, one element per message       | W1 -> M   |
//! | 9    | `k'_u`                               | Wu -> M   |
//!
//! Step 3 (summing shares) and step 10 (reconstruction) are local to the
//! master; steps 5 and 6 are local to W1 and W2.

use crate::doma::BitVector;
use crate::error::{Error, Result};
use crate::field::{mod_inv, FieldElement, FieldVector, Modulus};
use crate::harness::network::Party;
use crate::harness::rng::{PartyRandomness, Purpose, SharedDraw};
use crate::protocol::config::{Fault, SessionConfig};
use crate::protocol::message::{PartyId, ProtocolMessage, StepTag};
use crate::triot::{
    receiver_unmask, selector_forward, selector_mask_choice, sender_mask_labels,
    ReceiverSharedState, SelectorInput, SenderInput,
};

fn unexpected(party: PartyId, msg: &ProtocolMessage, awaiting: &str) -> Error {
    Error::protocol(format!(
        "{party} received {} from {} while awaiting {awaiting}",
        msg.tag, msg.from
    ))
}

fn check_len(what: &str, v: usize, expected: usize) -> Result<()> {
    if v != expected {
        return Err(Error::input(format!(
            "{what} has length {v}, expected {expected}"
        )));
    }
    Ok(())
}

/// Randomness held by W1, for building a state from explicit values.
#[derive(Debug, Clone)]
pub struct W1Randomness {
    /// `k_1^s`
    pub additive_mask: FieldVector,
    /// `p_1^s`
    pub pad: FieldVector,
    /// `p^m`, shared with W2
    pub shared_pad: FieldVector,
    /// `k^m[i]`, shared with the master
    pub ot_masks: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum W1Phase {
    Start,
    AwaitMaskedInput,
    AwaitLabels { next: usize },
    Done,
}

/// Client W1: selector in every oblivious transfer.
pub struct W1State {
    modulus: Modulus,
    input: BitVector,
    rand: W1Randomness,
    selector_bits: Option<BitVector>,
    phase: W1Phase,
    shared: Vec<SharedDraw>,
}

impl W1State {
    pub fn new(config: &SessionConfig, input: BitVector) -> Result<Self> {
        check_len("input a", input.len(), config.n())?;
        let q = config.modulus();
        let n = config.n();
        let mut r = config
            .randomness()
            .for_party(PartyId::W1, config.session_id());
        let additive_mask = r.field_vector(Purpose::AdditiveMaskW1, 0, q, n)?;
        let mut pad = r.field_vector(Purpose::PadW1, 0, q, config.pad_len())?;
        let mut shared_pad = r.field_vector(Purpose::SharedPad, 0, q, config.pad_len())?;
        if config.fault() == Some(Fault::SkipPadding) {
            pad = FieldVector::zeros(q, 0);
            shared_pad = FieldVector::zeros(q, 0);
        }
        let ot_masks = (0..n)
            .map(|i| Ok(r.bits(Purpose::OtChoiceMask, i as u32, 1)?[0]))
            .collect::<Result<Vec<_>>>()?;
        let rand = W1Randomness {
            additive_mask,
            pad,
            shared_pad,
            ot_masks,
        };
        Ok(Self::build(config, input, rand, r.into_shared_draws()))
    }

    pub fn from_parts(
        config: &SessionConfig,
        input: BitVector,
        rand: W1Randomness,
    ) -> Result<Self> {
        let n = config.n();
        check_len("input a", input.len(), n)?;
        check_len("k_1^s", rand.additive_mask.len(), n)?;
        check_len("p_1^s", rand.pad.len(), config.pad_len())?;
        check_len("p^m", rand.shared_pad.len(), config.pad_len())?;
        check_len("k^m", rand.ot_masks.len(), n)?;
        let mut shared = vec![SharedDraw {
            purpose: Purpose::SharedPad,
            index: 0,
            values: rand.shared_pad.values().into(),
        }];
        shared.extend(rand.ot_masks.iter().enumerate().map(|(i, &b)| SharedDraw {
            purpose: Purpose::OtChoiceMask,
            index: i as u32,
            values: [b as u64].into(),
        }));
        Ok(Self::build(config, input, rand, shared))
    }

    fn build(
        config: &SessionConfig,
        input: BitVector,
        rand: W1Randomness,
        shared: Vec<SharedDraw>,
    ) -> Self {
        W1State {
            modulus: config.modulus(),
            input,
            rand,
            selector_bits: None,
            phase: W1Phase::Start,
            shared,
        }
    }

    fn n(&self) -> usize {
        self.input.len()
    }

    /// Steps 1-2: `s''_1 = [a + k_1^s : p_1^s]`.
    pub fn make_additive_share(&self) -> Result<ProtocolMessage> {
        let masked =
            FieldVector::from_bits(self.modulus, &self.input).add(&self.rand.additive_mask)?;
        Ok(ProtocolMessage::additive_share(
            PartyId::W1,
            &masked.concat(&self.rand.pad)?,
        ))
    }

    /// Step 5: `m' = a xor (b xor k_2^m)`.
    pub fn compute_selector_bits(&mut self, masked_b: &BitVector) -> Result<BitVector> {
        if masked_b.len() != self.n() {
            return Err(Error::protocol(format!(
                "masked input has length {}, expected {}",
                masked_b.len(),
                self.n()
            )));
        }
        let bits = self.input.xor(masked_b)?;
        self.selector_bits = Some(bits.clone());
        Ok(bits)
    }

    pub fn selector_bits(&self) -> Option<&BitVector> {
        self.selector_bits.as_ref()
    }

    /// Selector input of OT instance `i`; needs the step-5 bits.
    pub fn selector_input(&self, i: usize) -> Result<SelectorInput> {
        let bits = self
            .selector_bits
            .as_ref()
            .ok_or_else(|| Error::protocol("selector bits are not computed before step 5"))?;
        Ok(SelectorInput {
            choice: bits.get(i),
            shared_mask: self.rand.ot_masks[i],
        })
    }

    /// Step 8: the shared pad `p^m`, one element per message so that every
    /// master-bound XOR-phase message has the same length.
    pub fn pad_messages(&self) -> Vec<ProtocolMessage> {
        self.rand
            .shared_pad
            .iter()
            .map(|e| ProtocolMessage::pad_vector(&FieldVector::new(self.modulus, [e.value()])))
            .collect()
    }

    /// Step 9: `k'_1 = sum k_1^s + sum (p_1^s - p^m)`.
    pub fn key_sum(&self) -> FieldElement {
        self.rand.additive_mask.sum() + self.rand.pad.sum() - self.rand.shared_pad.sum()
    }

    pub fn randomness(&self) -> &W1Randomness {
        &self.rand
    }
}

impl Party for W1State {
    fn id(&self) -> PartyId {
        PartyId::W1
    }

    fn start(&mut self) -> Result<Vec<ProtocolMessage>> {
        if self.phase != W1Phase::Start {
            return Err(Error::protocol("W1 started twice"));
        }
        self.phase = W1Phase::AwaitMaskedInput;
        Ok(vec![self.make_additive_share()?])
    }

    fn receive(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>> {
        match (self.phase, msg.tag, msg.from) {
            (W1Phase::AwaitMaskedInput, StepTag::XorMaskedInput, PartyId::W2) => {
                let masked_b = msg.bits()?;
                self.compute_selector_bits(&masked_b)?;
                let out = (0..self.n())
                    .map(|i| {
                        let masked = selector_mask_choice(&self.selector_input(i)?);
                        Ok(ProtocolMessage::ot_masked_choice(i as u32, masked))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.phase = W1Phase::AwaitLabels { next: 0 };
                Ok(out)
            }
            (W1Phase::AwaitLabels { next }, StepTag::OtMaskedLabels, PartyId::W2) => {
                let index = msg.ot_index()? as usize;
                if index != next {
                    return Err(Error::protocol(format!(
                        "W1 expected labels for OT {next}, got OT {index}"
                    )));
                }
                let gammas = msg.field_pair(self.modulus)?;
                let choice = self.selector_input(index)?.choice;
                let mut out = vec![ProtocolMessage::ot_delivery(
                    index as u32,
                    selector_forward(gammas, choice),
                )];
                if next + 1 == self.n() {
                    out.extend(self.pad_messages());
                    out.push(ProtocolMessage::key_sum(PartyId::W1, self.key_sum()));
                    self.phase = W1Phase::Done;
                } else {
                    self.phase = W1Phase::AwaitLabels { next: next + 1 };
                }
                Ok(out)
            }
            _ => Err(unexpected(PartyId::W1, msg, &self.awaiting())),
        }
    }

    fn is_finished(&self) -> bool {
        self.phase == W1Phase::Done
    }

    fn awaiting(&self) -> String {
        match self.phase {
            W1Phase::Start => "start".into(),
            W1Phase::AwaitMaskedInput => "XorMaskedInput (step 4)".into(),
            W1Phase::AwaitLabels { next } => format!("OtMaskedLabels for OT {next} (step 7)"),
            W1Phase::Done => "nothing".into(),
        }
    }

    fn shared_randomness(&self) -> Vec<SharedDraw> {
        self.shared.clone()
    }
}

/// Randomness held by W2, for building a state from explicit values.
#[derive(Debug, Clone)]
pub struct W2Randomness {
    /// `k_2^s`
    pub additive_mask: FieldVector,
    /// `p_2^s`
    pub pad: FieldVector,
    /// `k_2^m`
    pub xor_mask: BitVector,
    /// `k`
    pub label_mask: FieldVector,
    /// `p^m`, shared with W1
    pub shared_pad: FieldVector,
    /// `(alpha_0[i], alpha_1[i])`, shared with the master
    pub ot_pads: Vec<[FieldElement; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum W2Phase {
    Start,
    AwaitChoices { next: usize },
    Done,
}

/// Client W2: sender in every oblivious transfer.
pub struct W2State {
    modulus: Modulus,
    input: BitVector,
    rand: W2Randomness,
    fault: Option<Fault>,
    phase: W2Phase,
    shared: Vec<SharedDraw>,
}

impl W2State {
    pub fn new(config: &SessionConfig, input: BitVector) -> Result<Self> {
        check_len("input b", input.len(), config.n())?;
        let q = config.modulus();
        let n = config.n();
        let mut r: PartyRandomness = config
            .randomness()
            .for_party(PartyId::W2, config.session_id());
        let additive_mask = r.field_vector(Purpose::AdditiveMaskW2, 0, q, n)?;
        let mut pad = r.field_vector(Purpose::PadW2, 0, q, config.pad_len())?;
        let mut xor_mask = BitVector::new(r.bits(Purpose::XorMask, 0, n)?);
        let label_mask = r.field_vector(Purpose::LabelMask, 0, q, n)?;
        let mut shared_pad = r.field_vector(Purpose::SharedPad, 0, q, config.pad_len())?;
        let ot_pads = (0..n)
            .map(|i| r.field_pair(Purpose::OtPads, i as u32, q))
            .collect::<Result<Vec<_>>>()?;
        match config.fault() {
            Some(Fault::ZeroXorMask) => xor_mask = BitVector::zeros(n),
            Some(Fault::SkipPadding) => {
                pad = FieldVector::zeros(q, 0);
                shared_pad = FieldVector::zeros(q, 0);
            }
            _ => {}
        }
        let rand = W2Randomness {
            additive_mask,
            pad,
            xor_mask,
            label_mask,
            shared_pad,
            ot_pads,
        };
        Ok(Self::build(config, input, rand, r.into_shared_draws()))
    }

    pub fn from_parts(
        config: &SessionConfig,
        input: BitVector,
        rand: W2Randomness,
    ) -> Result<Self> {
        let n = config.n();
        check_len("input b", input.len(), n)?;
        check_len("k_2^s", rand.additive_mask.len(), n)?;
        check_len("p_2^s", rand.pad.len(), config.pad_len())?;
        check_len("k_2^m", rand.xor_mask.len(), n)?;
        check_len("k", rand.label_mask.len(), n)?;
        check_len("p^m", rand.shared_pad.len(), config.pad_len())?;
        check_len("alpha", rand.ot_pads.len(), n)?;
        let mut shared = vec![SharedDraw {
            purpose: Purpose::SharedPad,
            index: 0,
            values: rand.shared_pad.values().into(),
        }];
        shared.extend(rand.ot_pads.iter().enumerate().map(|(i, p)| SharedDraw {
            purpose: Purpose::OtPads,
            index: i as u32,
            values: [p[0].value(), p[1].value()].into(),
        }));
        Ok(Self::build(config, input, rand, shared))
    }

    fn build(
        config: &SessionConfig,
        input: BitVector,
        rand: W2Randomness,
        shared: Vec<SharedDraw>,
    ) -> Self {
        W2State {
            modulus: config.modulus(),
            input,
            rand,
            fault: config.fault(),
            phase: W2Phase::Start,
            shared,
        }
    }

    fn n(&self) -> usize {
        self.input.len()
    }

    /// Steps 1-2: `s''_2 = [b + k_2^s : p_2^s]`.
    pub fn make_additive_share(&self) -> Result<ProtocolMessage> {
        let masked =
            FieldVector::from_bits(self.modulus, &self.input).add(&self.rand.additive_mask)?;
        Ok(ProtocolMessage::additive_share(
            PartyId::W2,
            &masked.concat(&self.rand.pad)?,
        ))
    }

    /// Step 4: `b xor k_2^m`.
    pub fn xor_mask_input(&self) -> Result<ProtocolMessage> {
        Ok(ProtocolMessage::xor_masked_input(
            &self.input.xor(&self.rand.xor_mask)?,
        ))
    }

    /// Step 6: `beta_0 = k_2^m + k`, `beta_1 = (1 - k_2^m) + k`, paired with
    /// the pads shared with the master.
    pub fn prepare_labels(&self) -> Vec<SenderInput> {
        (0..self.n()).map(|i| self.sender_input(i)).collect()
    }

    /// Sender input of OT instance `i`.
    pub fn sender_input(&self, i: usize) -> SenderInput {
        let q = self.modulus;
        let mask = self.rand.xor_mask.get(i);
        let k = self.rand.label_mask.get(i);
        SenderInput {
            labels: [q.from_bit(mask) + k, q.from_bit(!mask) + k],
            pads: self.rand.ot_pads[i],
        }
    }

    /// Step 9: `k'_2 = sum (k_2^s - k) + sum p_2^s`.
    pub fn key_sum(&self) -> FieldElement {
        let label_term = if self.fault == Some(Fault::KeySumOmitsLabelMask) {
            self.modulus.zero()
        } else {
            self.rand.label_mask.sum()
        };
        self.rand.additive_mask.sum() - label_term + self.rand.pad.sum()
    }

    pub fn randomness(&self) -> &W2Randomness {
        &self.rand
    }
}

impl Party for W2State {
    fn id(&self) -> PartyId {
        PartyId::W2
    }

    fn start(&mut self) -> Result<Vec<ProtocolMessage>> {
        if self.phase != W2Phase::Start {
            return Err(Error::protocol("W2 started twice"));
        }
        self.phase = W2Phase::AwaitChoices { next: 0 };
        Ok(vec![self.make_additive_share()?, self.xor_mask_input()?])
    }

    fn receive(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>> {
        match (self.phase, msg.tag, msg.from) {
            (W2Phase::AwaitChoices { next }, StepTag::OtMaskedChoice, PartyId::W1) => {
                let index = msg.ot_index()? as usize;
                if index != next {
                    return Err(Error::protocol(format!(
                        "W2 expected the masked choice for OT {next}, got OT {index}"
                    )));
                }
                let gammas = sender_mask_labels(&self.sender_input(index), msg.bit()?)?;
                let mut out = vec![ProtocolMessage::ot_masked_labels(index as u32, gammas)];
                if next + 1 == self.n() {
                    out.push(ProtocolMessage::key_sum(PartyId::W2, self.key_sum()));
                    self.phase = W2Phase::Done;
                } else {
                    self.phase = W2Phase::AwaitChoices { next: next + 1 };
                }
                Ok(out)
            }
            _ => Err(unexpected(PartyId::W2, msg, &self.awaiting())),
        }
    }

    fn is_finished(&self) -> bool {
        self.phase == W2Phase::Done
    }

    fn awaiting(&self) -> String {
        match self.phase {
            W2Phase::Start => "start".into(),
            W2Phase::AwaitChoices { next } => format!("OtMaskedChoice for OT {next} (step 7)"),
            W2Phase::Done => "nothing".into(),
        }
    }

    fn shared_randomness(&self) -> Vec<SharedDraw> {
        self.shared.clone()
    }
}

/// Step 3: element-wise sum of the two additive shares.
pub fn master_sum_shares(share_w1: &FieldVector, share_w2: &FieldVector) -> Result<FieldVector> {
    share_w1.add(share_w2)
}

/// Step 10: `y = 2^{-1} (sum(s'' - m'') - k'_1 - k'_2) mod q`.
///
/// `bound` is the largest admissible output; anything above it means the
/// transcript was corrupted.
pub fn master_finalize(
    summed: &FieldVector,
    masked_xor: &FieldVector,
    key_w1: FieldElement,
    key_w2: FieldElement,
    bound: usize,
) -> Result<u64> {
    let total = reconstruction_sum(summed, masked_xor, key_w1, key_w2)?;
    let half = mod_inv(summed.modulus().element(2))?;
    let y = (half * total).value();
    if y > bound as u64 {
        return Err(Error::Integrity { output: y });
    }
    Ok(y)
}

/// `sum(s'' - m'') - k'_1 - k'_2`, which equals twice the dot product in an
/// honest run.
pub fn reconstruction_sum(
    summed: &FieldVector,
    masked_xor: &FieldVector,
    key_w1: FieldElement,
    key_w2: FieldElement,
) -> Result<FieldElement> {
    let diff = summed.sub(masked_xor)?;
    Ok(diff.sum() - key_w1 - key_w2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StreamPhase {
    AwaitShare,
    XorElements,
    AwaitKey,
    Done,
}

/// The master: receiver in every oblivious transfer. It never learns `n`
/// from its configuration, only the padded length `n + n'` from the shares.
pub struct MasterState {
    modulus: Modulus,
    rand: Option<PartyRandomness>,
    ot_shared: Vec<ReceiverSharedState>,
    total_len: Option<usize>,
    share_w1: Option<FieldVector>,
    share_w2: Option<FieldVector>,
    summed: Option<FieldVector>,
    xor_values: Vec<FieldElement>,
    pad_values: Vec<FieldElement>,
    key_w1: Option<FieldElement>,
    key_w2: Option<FieldElement>,
    w1_phase: StreamPhase,
    w2_phase: StreamPhase,
    outcome: Option<Result<u64>>,
}

impl MasterState {
    pub fn new(config: &SessionConfig) -> Self {
        let rand = config
            .randomness()
            .for_party(PartyId::Master, config.session_id());
        Self::build(config.modulus(), Some(rand), Vec::new())
    }

    /// A master whose per-OT shared randomness is given up front.
    pub fn from_parts(config: &SessionConfig, ot_shared: Vec<ReceiverSharedState>) -> Self {
        Self::build(config.modulus(), None, ot_shared)
    }

    fn build(
        modulus: Modulus,
        rand: Option<PartyRandomness>,
        ot_shared: Vec<ReceiverSharedState>,
    ) -> Self {
        MasterState {
            modulus,
            rand,
            ot_shared,
            total_len: None,
            share_w1: None,
            share_w2: None,
            summed: None,
            xor_values: Vec::new(),
            pad_values: Vec::new(),
            key_w1: None,
            key_w2: None,
            w1_phase: StreamPhase::AwaitShare,
            w2_phase: StreamPhase::AwaitShare,
            outcome: None,
        }
    }

    /// Shared randomness of OT instance `i`, derived on first use.
    pub fn receiver_state(&mut self, i: usize) -> Result<ReceiverSharedState> {
        while self.ot_shared.len() <= i {
            let idx = self.ot_shared.len() as u32;
            let rand = self
                .rand
                .as_mut()
                .ok_or_else(|| Error::protocol(format!("no shared randomness for OT {idx}")))?;
            let pads = rand.field_pair(Purpose::OtPads, idx, self.modulus)?;
            let shared_mask = rand.bits(Purpose::OtChoiceMask, idx, 1)?[0];
            self.ot_shared
                .push(ReceiverSharedState { pads, shared_mask });
        }
        Ok(self.ot_shared[i])
    }

    /// Accepts the unmasked result of OT `i` (step 7).
    pub fn record_xor_value(&mut self, i: usize, value: FieldElement) -> Result<()> {
        if i != self.xor_values.len() || !self.pad_values.is_empty() {
            return Err(Error::protocol(format!(
                "OT {i} result arrived out of order"
            )));
        }
        self.xor_values.push(value);
        Ok(())
    }

    fn accept_share(&mut self, from: PartyId, share: FieldVector) -> Result<()> {
        match self.total_len {
            None => self.total_len = Some(share.len()),
            Some(len) if len != share.len() => {
                return Err(Error::protocol(format!(
                    "share lengths differ: {len} vs {}",
                    share.len()
                )))
            }
            Some(_) => {}
        }
        if from == PartyId::W1 {
            self.share_w1 = Some(share);
        } else {
            self.share_w2 = Some(share);
        }
        if let (Some(s1), Some(s2)) = (&self.share_w1, &self.share_w2) {
            self.summed = Some(master_sum_shares(s1, s2)?);
        }
        Ok(())
    }

    fn xor_count(&self) -> usize {
        self.xor_values.len() + self.pad_values.len()
    }

    fn check_xor_complete(&mut self) {
        if Some(self.xor_count()) == self.total_len {
            self.w1_phase = StreamPhase::AwaitKey;
        }
    }

    fn receive_from_w1(&mut self, msg: &ProtocolMessage) -> Result<()> {
        match (self.w1_phase, msg.tag) {
            (StreamPhase::AwaitShare, StepTag::AdditiveShare) => {
                let share = msg.field_vector(self.modulus)?;
                if share.is_empty() {
                    return Err(Error::protocol("empty share"));
                }
                self.accept_share(PartyId::W1, share)?;
                self.w1_phase = StreamPhase::XorElements;
            }
            (StreamPhase::XorElements, StepTag::OtDelivery) => {
                let index = msg.ot_index()? as usize;
                let delivery = msg.field_element(self.modulus)?;
                let shared = self.receiver_state(index)?;
                self.record_xor_value(index, receiver_unmask(delivery, &shared)?)?;
                self.check_xor_complete();
            }
            (StreamPhase::XorElements, StepTag::PadVector) => {
                let pad = msg.field_vector(self.modulus)?;
                if self.xor_count() + pad.len() > self.total_len.unwrap_or(0) {
                    return Err(Error::protocol("pad overruns the padded length"));
                }
                self.pad_values.extend(pad.iter());
                self.check_xor_complete();
            }
            (StreamPhase::AwaitKey, StepTag::KeySum) => {
                self.key_w1 = Some(msg.field_element(self.modulus)?);
                self.w1_phase = StreamPhase::Done;
            }
            _ => return Err(unexpected(PartyId::Master, msg, &self.awaiting())),
        }
        Ok(())
    }

    fn receive_from_w2(&mut self, msg: &ProtocolMessage) -> Result<()> {
        match (self.w2_phase, msg.tag) {
            (StreamPhase::AwaitShare, StepTag::AdditiveShare) => {
                let share = msg.field_vector(self.modulus)?;
                self.accept_share(PartyId::W2, share)?;
                self.w2_phase = StreamPhase::AwaitKey;
            }
            (StreamPhase::AwaitKey, StepTag::KeySum) => {
                self.key_w2 = Some(msg.field_element(self.modulus)?);
                self.w2_phase = StreamPhase::Done;
            }
            _ => return Err(unexpected(PartyId::Master, msg, &self.awaiting())),
        }
        Ok(())
    }

    pub fn summed_shares(&self) -> Option<&FieldVector> {
        self.summed.as_ref()
    }

    /// `m + k`, the unmasked OT results.
    pub fn xor_values(&self) -> FieldVector {
        FieldVector::from_elements(self.modulus, &self.xor_values).expect("one modulus")
    }

    /// `m'' = [m + k : p^m]`.
    pub fn padded_xor_vector(&self) -> FieldVector {
        let mut all = self.xor_values.clone();
        all.extend_from_slice(&self.pad_values);
        FieldVector::from_elements(self.modulus, &all).expect("one modulus")
    }

    pub fn shares(&self) -> (Option<&FieldVector>, Option<&FieldVector>) {
        (self.share_w1.as_ref(), self.share_w2.as_ref())
    }

    pub fn key_sums(&self) -> (Option<FieldElement>, Option<FieldElement>) {
        (self.key_w1, self.key_w2)
    }

    pub fn reconstruction_sum(&self) -> Option<FieldElement> {
        let summed = self.summed.as_ref()?;
        reconstruction_sum(
            summed,
            &self.padded_xor_vector(),
            self.key_w1?,
            self.key_w2?,
        )
        .ok()
    }

    /// Step 10. The output bound is the number of OT results received.
    pub fn finalize(&self) -> Result<u64> {
        let missing = || Error::protocol("master finalized before receiving every message");
        let summed = self.summed.as_ref().ok_or_else(missing)?;
        master_finalize(
            summed,
            &self.padded_xor_vector(),
            self.key_w1.ok_or_else(missing)?,
            self.key_w2.ok_or_else(missing)?,
            self.xor_values.len(),
        )
    }
}

impl Party for MasterState {
    fn id(&self) -> PartyId {
        PartyId::Master
    }

    fn start(&mut self) -> Result<Vec<ProtocolMessage>> {
        Ok(Vec::new())
    }

    fn receive(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>> {
        if msg.to != PartyId::Master {
            return Err(Error::protocol(format!(
                "master received a message for {}",
                msg.to
            )));
        }
        match msg.from {
            PartyId::W1 => self.receive_from_w1(msg)?,
            PartyId::W2 => self.receive_from_w2(msg)?,
            PartyId::Master => return Err(unexpected(PartyId::Master, msg, &self.awaiting())),
        }
        if self.w1_phase == StreamPhase::Done && self.w2_phase == StreamPhase::Done {
            // An integrity failure is recorded rather than raised so that the
            // transcript of a corrupted run can still be inspected.
            self.outcome = Some(self.finalize());
        }
        Ok(Vec::new())
    }

    fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    fn awaiting(&self) -> String {
        let w1 = match self.w1_phase {
            StreamPhase::AwaitShare => "AdditiveShare from W1 (step 2)",
            StreamPhase::XorElements => "OtDelivery/PadVector from W1 (steps 7-8)",
            StreamPhase::AwaitKey => "KeySum from W1 (step 9)",
            StreamPhase::Done => "",
        };
        let w2 = match self.w2_phase {
            StreamPhase::AwaitShare => "AdditiveShare from W2 (step 2)",
            StreamPhase::AwaitKey => "KeySum from W2 (step 9)",
            _ => "",
        };
        match (w1.is_empty(), w2.is_empty()) {
            (true, true) => "nothing".into(),
            (false, true) => w1.into(),
            (true, false) => w2.into(),
            (false, false) => format!("{w1} and {w2}"),
        }
    }

    fn outcome(&self) -> Option<&Result<u64>> {
        self.outcome.as_ref()
    }

    fn shared_randomness(&self) -> Vec<SharedDraw> {
        match &self.rand {
            Some(r) => r.shared_draws().to_vec(),
            None => self
                .ot_shared
                .iter()
                .enumerate()
                .flat_map(|(i, s)| {
                    [
                        SharedDraw {
                            purpose: Purpose::OtPads,
                            index: i as u32,
                            values: [s.pads[0].value(), s.pads[1].value()].into(),
                        },
                        SharedDraw {
                            purpose: Purpose::OtChoiceMask,
                            index: i as u32,
                            values: [s.shared_mask as u64].into(),
                        },
                    ]
                })
                .collect(),
        }
    }
}
