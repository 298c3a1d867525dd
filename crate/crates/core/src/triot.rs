//! Three-party oblivious transfer.
//!
//! The selector holds a choice bit `m'`, the sender two labels `beta_0`,
//! `beta_1`, and the receiver learns `beta_{m'}` only. The selector and the
//! receiver share a mask bit `k^m`; the sender and the receiver share two pads
//! `alpha_0`, `alpha_1`. One instance exchanges three messages:
//!
//! 1. selector -> sender: `m'' = m' xor k^m`
//! 2. sender -> selector: `gamma_0 = beta_0 + alpha_{m''}`, `gamma_1 = beta_1 + alpha_{1 - m''}`
//! 3. selector -> receiver: `gamma_{m'}`, which equals `beta_{m'} + alpha_{k^m}`
//!
//! The functions below are the per-role computations; [`run_triot_instance`]
//! composes them in-process.

use crate::error::{Error, Result};
use crate::field::{mod_add, mod_sub, FieldElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectorInput {
    pub choice: bool,
    /// `k^m`, shared with the receiver.
    pub shared_mask: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SenderInput {
    pub labels: [FieldElement; 2],
    /// `(alpha_0, alpha_1)`, shared with the receiver.
    pub pads: [FieldElement; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceiverSharedState {
    pub pads: [FieldElement; 2],
    pub shared_mask: bool,
}

/// The three messages of one instance, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriOtMessages {
    pub masked_choice: bool,
    pub masked_labels: (FieldElement, FieldElement),
    pub delivery: FieldElement,
}

/// Sender-side label masking, replaceable for fault-injection tests.
pub type SenderFn = fn(&SenderInput, bool) -> Result<(FieldElement, FieldElement)>;

pub fn selector_mask_choice(input: &SelectorInput) -> bool {
    input.choice ^ input.shared_mask
}

pub fn sender_mask_labels(
    input: &SenderInput,
    masked_choice: bool,
) -> Result<(FieldElement, FieldElement)> {
    let m = masked_choice as usize;
    let gamma_0 = mod_add(input.labels[0], input.pads[m])?;
    let gamma_1 = mod_add(input.labels[1], input.pads[1 - m])?;
    Ok((gamma_0, gamma_1))
}

pub fn selector_forward(masked_labels: (FieldElement, FieldElement), choice: bool) -> FieldElement {
    if choice {
        masked_labels.1
    } else {
        masked_labels.0
    }
}

pub fn receiver_unmask(
    delivery: FieldElement,
    shared: &ReceiverSharedState,
) -> Result<FieldElement> {
    mod_sub(delivery, shared.pads[shared.shared_mask as usize])
}

/// Runs one instance end to end and returns the received label with the
/// messages exchanged.
///
/// Fails if the roles' copies of the shared randomness disagree, which only a
/// harness with access to all three inputs can detect.
pub fn run_triot_instance(
    selector: &SelectorInput,
    sender: &SenderInput,
    receiver: &ReceiverSharedState,
) -> Result<(FieldElement, TriOtMessages)> {
    run_triot_instance_with(selector, sender, receiver, sender_mask_labels)
}

pub fn run_triot_instance_with(
    selector: &SelectorInput,
    sender: &SenderInput,
    receiver: &ReceiverSharedState,
    mask_labels: SenderFn,
) -> Result<(FieldElement, TriOtMessages)> {
    if selector.shared_mask != receiver.shared_mask {
        return Err(Error::protocol(
            "selector and receiver disagree on the shared mask bit",
        ));
    }
    if sender.pads != receiver.pads {
        return Err(Error::protocol("sender and receiver disagree on the pads"));
    }
    let masked_choice = selector_mask_choice(selector);
    let masked_labels = mask_labels(sender, masked_choice)?;
    let delivery = selector_forward(masked_labels, selector.choice);
    let label = receiver_unmask(delivery, receiver)?;
    Ok((
        label,
        TriOtMessages {
            masked_choice,
            masked_labels,
            delivery,
        },
    ))
}
