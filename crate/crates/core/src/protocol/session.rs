//! Composition of the three parties into one session.

use crate::doma::BitVector;
use crate::error::{Error, Result};
use crate::field::FieldVector;
use crate::harness::network::{deliver_until_quiescent, run_threaded, Party, Scheduler};
use crate::harness::transcript::{Transcript, TranscriptHeader};
use crate::protocol::config::SessionConfig;
use crate::protocol::parties::{MasterState, W1State, W2State};
use crate::triot::run_triot_instance;

/// Everything a finished session leaves behind, for white-box inspection.
pub struct SessionRun {
    pub transcript: Transcript,
    /// The master's output; an integrity failure is kept here rather than
    /// discarding the transcript.
    pub outcome: Result<u64>,
    pub w1: W1State,
    pub w2: W2State,
    pub master: MasterState,
}

fn header(config: &SessionConfig) -> TranscriptHeader {
    TranscriptHeader {
        modulus: config.modulus(),
        n: config.n(),
        pad_len: config.pad_len(),
        session_id: config.session_id(),
        seed: config.seed(),
    }
}

/// Runs one session on the in-memory network.
///
/// Setup and protocol errors are returned directly; the master's own verdict
/// is in [`SessionRun::outcome`].
pub fn execute_session(
    a: &BitVector,
    b: &BitVector,
    config: &SessionConfig,
    scheduler: Scheduler,
) -> Result<SessionRun> {
    let mut w1 = W1State::new(config, a.clone())?;
    let mut w2 = W2State::new(config, b.clone())?;
    let mut master = MasterState::new(config);
    let mut pending = w1.start()?;
    pending.extend(w2.start()?);
    pending.extend(master.start()?);
    let mut transcript =
        deliver_until_quiescent(&mut [&mut w1, &mut w2, &mut master], pending, scheduler)?;
    transcript.header = Some(header(config));
    let outcome = master
        .outcome()
        .cloned()
        .ok_or_else(|| Error::protocol("master finished without an output"))?;
    Ok(SessionRun {
        transcript,
        outcome,
        w1,
        w2,
        master,
    })
}

fn check_bound(y: u64, config: &SessionConfig) -> Result<u64> {
    if y > config.n() as u64 {
        return Err(Error::Integrity { output: y });
    }
    Ok(y)
}

/// Runs one session with FIFO delivery and returns `y = a . b`.
pub fn run_session(
    a: &BitVector,
    b: &BitVector,
    config: &SessionConfig,
) -> Result<(u64, Transcript)> {
    let run = execute_session(a, b, config, Scheduler::Fifo)?;
    let y = check_bound(run.outcome?, config)?;
    Ok((y, run.transcript))
}

/// As [`run_session`], with each party on its own thread.
pub fn run_session_threaded(
    a: &BitVector,
    b: &BitVector,
    config: &SessionConfig,
) -> Result<(u64, Transcript)> {
    let mut w1 = W1State::new(config, a.clone())?;
    let mut w2 = W2State::new(config, b.clone())?;
    let master = MasterState::new(config);
    let mut pending = w1.start()?;
    pending.extend(w2.start()?);
    let parties: Vec<Box<dyn Party + Send>> = vec![Box::new(w1), Box::new(w2), Box::new(master)];
    let (mut transcript, parties) = run_threaded(parties, pending)?;
    transcript.header = Some(header(config));
    let outcome = parties[2]
        .outcome()
        .cloned()
        .ok_or_else(|| Error::protocol("master finished without an output"))?;
    let y = check_bound(outcome?, config)?;
    Ok((y, transcript))
}

/// Step 7 driven in-process: one oblivious transfer per input element, with
/// the master recording each result. Returns `m + k`.
///
/// W1 must already hold its selector bits (steps 4-5).
pub fn execute_xor_phase(
    w1: &W1State,
    w2: &W2State,
    master: &mut MasterState,
) -> Result<FieldVector> {
    for (i, sender) in w2.prepare_labels().iter().enumerate() {
        let receiver = master.receiver_state(i)?;
        let (label, _) = run_triot_instance(&w1.selector_input(i)?, sender, &receiver)?;
        master.record_xor_value(i, label)?;
    }
    Ok(master.xor_values())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::doma::brute_force_dot;
    use crate::field::{FieldElement, Modulus};
    use crate::harness::rng::{Assignment, Purpose, RandomnessSource, StreamKey};
    use crate::harness::transcript::project_view;
    use crate::protocol::message::{PartyId, ProtocolMessage, StepTag};
    use crate::protocol::parties::{
        master_finalize, master_sum_shares, W1Randomness, W2Randomness,
    };
    use crate::triot::ReceiverSharedState;

    fn q7() -> Modulus {
        Modulus::new(7).unwrap()
    }

    fn fv(values: &[u64]) -> FieldVector {
        FieldVector::new(q7(), values.iter().copied())
    }

    fn fe(v: u64) -> FieldElement {
        q7().element(v)
    }

    fn bits(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    /// Hand-traced session: n=2, n'=1, q=7, a=(1,0), b=(1,1).
    fn trace_streams() -> BTreeMap<StreamKey, Vec<u64>> {
        let key = |purpose, index| StreamKey { purpose, index };
        BTreeMap::from([
            (key(Purpose::AdditiveMaskW1, 0), vec![3, 5]),
            (key(Purpose::PadW1, 0), vec![4]),
            (key(Purpose::AdditiveMaskW2, 0), vec![2, 6]),
            (key(Purpose::PadW2, 0), vec![1]),
            (key(Purpose::XorMask, 0), vec![1, 0]),
            (key(Purpose::LabelMask, 0), vec![2, 3]),
            (key(Purpose::SharedPad, 0), vec![5]),
            (key(Purpose::OtChoiceMask, 0), vec![1]),
            (key(Purpose::OtChoiceMask, 1), vec![0]),
            (key(Purpose::OtPads, 0), vec![4, 2]),
            (key(Purpose::OtPads, 1), vec![6, 1]),
        ])
    }

    fn trace_config() -> SessionConfig {
        let source = RandomnessSource::enumerated(Assignment::from_streams(trace_streams()));
        SessionConfig::new(2, 1, q7(), source).unwrap()
    }

    fn trace_parts() -> (W1Randomness, W2Randomness, Vec<ReceiverSharedState>) {
        let w1 = W1Randomness {
            additive_mask: fv(&[3, 5]),
            pad: fv(&[4]),
            shared_pad: fv(&[5]),
            ot_masks: vec![true, false],
        };
        let w2 = W2Randomness {
            additive_mask: fv(&[2, 6]),
            pad: fv(&[1]),
            xor_mask: bits("10"),
            label_mask: fv(&[2, 3]),
            shared_pad: fv(&[5]),
            ot_pads: vec![[fe(4), fe(2)], [fe(6), fe(1)]],
        };
        let master = vec![
            ReceiverSharedState {
                pads: [fe(4), fe(2)],
                shared_mask: true,
            },
            ReceiverSharedState {
                pads: [fe(6), fe(1)],
                shared_mask: false,
            },
        ];
        (w1, w2, master)
    }

    #[test]
    fn trace_step_by_step() {
        let config = trace_config();
        let (r1, r2, rm) = trace_parts();
        let mut w1 = W1State::from_parts(&config, bits("10"), r1).unwrap();
        let w2 = W2State::from_parts(&config, bits("11"), r2).unwrap();
        let mut master = MasterState::from_parts(&config, rm);

        let s1 = w1
            .make_additive_share()
            .unwrap()
            .field_vector(q7())
            .unwrap();
        let s2 = w2
            .make_additive_share()
            .unwrap()
            .field_vector(q7())
            .unwrap();
        assert_eq!(s1.values(), &[4, 5, 4]);
        assert_eq!(s2.values(), &[3, 0, 1]);
        let summed = master_sum_shares(&s1, &s2).unwrap();
        assert_eq!(summed.values(), &[0, 5, 5]);

        let masked_b = w2.xor_mask_input().unwrap().bits().unwrap();
        assert_eq!(masked_b, bits("01"));
        assert_eq!(w1.compute_selector_bits(&masked_b).unwrap(), bits("11"));

        let labels = w2.prepare_labels();
        assert_eq!(labels[0].labels, [fe(3), fe(2)]);
        assert_eq!(labels[1].labels, [fe(3), fe(4)]);

        let mk = execute_xor_phase(&w1, &w2, &mut master).unwrap();
        assert_eq!(mk.values(), &[2, 4]);
        // m + k - k = a xor b
        assert_eq!(
            mk.sub(&w2.randomness().label_mask).unwrap().values(),
            &[0, 1]
        );

        let pads: Vec<u64> = w1
            .pad_messages()
            .iter()
            .flat_map(|m| m.field_vector(q7()).unwrap().values().to_vec())
            .collect();
        assert_eq!(pads, vec![5]);
        let m2 = mk.concat(&fv(&pads)).unwrap();
        assert_eq!(m2.values(), &[2, 4, 5]);

        assert_eq!(w1.key_sum(), fe(0));
        assert_eq!(w2.key_sum(), fe(4));
        assert_eq!(summed.sub(&m2).unwrap().values(), &[5, 1, 0]);
        assert_eq!(master_finalize(&summed, &m2, fe(0), fe(4), 2).unwrap(), 1);
    }

    #[test]
    fn trace_over_the_network() {
        let config = trace_config();
        let run = execute_session(&bits("10"), &bits("11"), &config, Scheduler::Fifo).unwrap();
        assert_eq!(run.outcome, Ok(1));

        let q = q7();
        let payload = |tag: StepTag, from: PartyId, ot: Option<u32>| -> Vec<u8> {
            run.transcript
                .messages()
                .find(|m| m.tag == tag && m.from == from && m.ot_index == ot)
                .unwrap()
                .payload
                .clone()
        };
        assert_eq!(
            payload(StepTag::AdditiveShare, PartyId::W1, None),
            vec![4, 5, 4]
        );
        assert_eq!(
            payload(StepTag::AdditiveShare, PartyId::W2, None),
            vec![3, 0, 1]
        );
        assert_eq!(
            payload(StepTag::XorMaskedInput, PartyId::W2, None),
            vec![0, 1]
        );
        assert_eq!(
            payload(StepTag::OtMaskedChoice, PartyId::W1, Some(0)),
            vec![0]
        );
        assert_eq!(
            payload(StepTag::OtMaskedChoice, PartyId::W1, Some(1)),
            vec![1]
        );
        assert_eq!(
            payload(StepTag::OtMaskedLabels, PartyId::W2, Some(0)),
            vec![0, 4]
        );
        assert_eq!(
            payload(StepTag::OtMaskedLabels, PartyId::W2, Some(1)),
            vec![4, 3]
        );
        assert_eq!(payload(StepTag::OtDelivery, PartyId::W1, Some(0)), vec![4]);
        assert_eq!(payload(StepTag::OtDelivery, PartyId::W1, Some(1)), vec![3]);
        assert_eq!(payload(StepTag::PadVector, PartyId::W1, None), vec![5]);
        assert_eq!(payload(StepTag::KeySum, PartyId::W1, None), vec![0]);
        assert_eq!(payload(StepTag::KeySum, PartyId::W2, None), vec![4]);

        assert_eq!(run.master.summed_shares().unwrap().values(), &[0, 5, 5]);
        assert_eq!(run.master.padded_xor_vector().values(), &[2, 4, 5]);
        assert_eq!(run.master.key_sums(), (Some(fe(0)), Some(fe(4))));
        assert_eq!(run.master.reconstruction_sum(), Some(q.element(2)));
    }

    #[test]
    fn trace_from_parts_matches_enumerated() {
        let config = trace_config();
        let (r1, r2, rm) = trace_parts();
        let mut w1 = W1State::from_parts(&config, bits("10"), r1).unwrap();
        let mut w2 = W2State::from_parts(&config, bits("11"), r2).unwrap();
        let mut master = MasterState::from_parts(&config, rm);
        let mut pending = w1.start().unwrap();
        pending.extend(w2.start().unwrap());
        let t = deliver_until_quiescent(
            &mut [&mut w1, &mut w2, &mut master],
            pending,
            Scheduler::Fifo,
        )
        .unwrap();
        let run = execute_session(&bits("10"), &bits("11"), &config, Scheduler::Fifo).unwrap();
        assert_eq!(t.entries, run.transcript.entries);
        assert_eq!(t.shared, run.transcript.shared);
    }

    fn count(t: &Transcript, tag: StepTag) -> usize {
        t.messages().filter(|m| m.tag == tag).count()
    }

    #[test]
    fn message_counts() {
        for (n, pad) in [(2, 1), (1, 0), (3, 4)] {
            let q = Modulus::new(11).unwrap();
            let config = SessionConfig::seeded(n, pad, q, 3).unwrap();
            let (_, t) = run_session(&BitVector::ones(n), &BitVector::zeros(n), &config).unwrap();
            assert_eq!(count(&t, StepTag::AdditiveShare), 2);
            assert_eq!(count(&t, StepTag::XorMaskedInput), 1);
            assert_eq!(count(&t, StepTag::OtMaskedChoice), n);
            assert_eq!(count(&t, StepTag::OtMaskedLabels), n);
            assert_eq!(count(&t, StepTag::OtDelivery), n);
            assert_eq!(count(&t, StepTag::PadVector), pad);
            assert_eq!(count(&t, StepTag::KeySum), 2);
            assert_eq!(t.len(), 2 + 1 + 3 * n + pad + 2);
        }
    }

    #[test]
    fn mask_cancellation_and_correctness_small() {
        let q = Modulus::new(11).unwrap();
        for n in 1..=4usize {
            for idx in 0..(1u64 << (2 * n)) {
                let a = BitVector::from_index(idx & ((1 << n) - 1), n);
                let b = BitVector::from_index(idx >> n, n);
                let config = SessionConfig::seeded(n, 2, q, idx).unwrap();
                let run = execute_session(&a, &b, &config, Scheduler::Fifo).unwrap();
                let y = brute_force_dot(&a, &b).unwrap();
                assert_eq!(run.outcome, Ok(y));
                assert_eq!(run.master.reconstruction_sum(), Some(q.element(2 * y)));
                let xor = a.xor(&b).unwrap();
                let unmasked = run
                    .master
                    .xor_values()
                    .sub(&run.w2.randomness().label_mask)
                    .unwrap();
                assert_eq!(unmasked, FieldVector::from_bits(q, &xor));
            }
        }
    }

    #[test]
    fn out_of_order_message_is_rejected() {
        let config = SessionConfig::seeded(2, 1, q7(), 1).unwrap();
        let mut w1 = W1State::new(&config, bits("10")).unwrap();
        let msg = ProtocolMessage::ot_masked_labels(0, (fe(1), fe(2)));
        let msg = ProtocolMessage {
            from: PartyId::W2,
            ..msg
        };
        // W1 has not started, so labels are out of step
        assert!(matches!(w1.receive(&msg), Err(Error::Protocol(_))));
        w1.start().unwrap();
        assert!(matches!(w1.receive(&msg), Err(Error::Protocol(_))));

        let mut master = MasterState::new(&config);
        let key = ProtocolMessage::key_sum(PartyId::W1, fe(3));
        assert!(matches!(master.receive(&key), Err(Error::Protocol(_))));

        let mut w2 = W2State::new(&config, bits("11")).unwrap();
        w2.start().unwrap();
        let choice = ProtocolMessage::ot_masked_choice(1, true);
        assert!(matches!(w2.receive(&choice), Err(Error::Protocol(_))));
    }

    #[test]
    fn master_bound_rejects_corrupted_key() {
        // W2's key sum off by one: the sum becomes 3 and y = 3 * 4 mod 7 = 5 > 2
        let err = master_finalize(&fv(&[0, 5, 5]), &fv(&[2, 4, 5]), fe(0), fe(3), 2).unwrap_err();
        assert_eq!(err, Error::Integrity { output: 5 });
    }

    #[test]
    fn structural_length_hiding() {
        let q = Modulus::new(11).unwrap();
        let left = SessionConfig::seeded(2, 3, q, 1).unwrap();
        let right = SessionConfig::seeded(3, 2, q, 2).unwrap();
        let (_, tl) = run_session(&bits("11"), &bits("10"), &left).unwrap();
        let (_, tr) = run_session(&bits("101"), &bits("001"), &right).unwrap();
        let vl = project_view(&tl, PartyId::Master).unwrap();
        let vr = project_view(&tr, PartyId::Master).unwrap();
        let shape = |v: &crate::harness::View| -> Vec<(PartyId, usize)> {
            v.messages.iter().map(|m| (m.from, m.wire_len())).collect()
        };
        assert_eq!(shape(&vl), shape(&vr));
        assert_eq!(vl.messages.len(), 2 + 5 + 2);
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let q = Modulus::new(13).unwrap();
        let config = SessionConfig::seeded(4, 4, q, 99).unwrap();
        let a = bits("1101");
        let b = bits("0111");
        let (y1, t1) = run_session(&a, &b, &config).unwrap();
        let (y2, t2) = run_session(&a, &b, &config).unwrap();
        assert_eq!((y1, &t1), (y2, &t2));
        assert_eq!(y1, 2);
        let other = SessionConfig::seeded(4, 4, q, 100).unwrap();
        let (_, t3) = run_session(&a, &b, &other).unwrap();
        assert_ne!(t1.entries, t3.entries);
    }

    fn is_fifo_reordering(canonical: &Transcript, other: &Transcript) -> bool {
        let pairs = |t: &Transcript| -> BTreeMap<(PartyId, PartyId), Vec<ProtocolMessage>> {
            let mut map: BTreeMap<_, Vec<_>> = BTreeMap::new();
            for m in t.messages() {
                map.entry((m.from, m.to)).or_default().push(m.clone());
            }
            map
        };
        canonical.len() == other.len() && pairs(canonical) == pairs(other)
    }

    #[test]
    fn interleaved_and_threaded_runs_agree() {
        let q = Modulus::new(11).unwrap();
        let config = SessionConfig::seeded(5, 3, q, 17).unwrap();
        let a = bits("11011");
        let b = bits("10111");
        let (y, canonical) = run_session(&a, &b, &config).unwrap();
        assert_eq!(y, 3);
        for seed in 0..20 {
            let run = execute_session(&a, &b, &config, Scheduler::Interleaved { seed }).unwrap();
            assert_eq!(run.outcome, Ok(3));
            assert!(is_fifo_reordering(&canonical, &run.transcript));
        }
        for _ in 0..5 {
            let (yt, tt) = run_session_threaded(&a, &b, &config).unwrap();
            assert_eq!(yt, 3);
            assert!(is_fifo_reordering(&canonical, &tt));
        }
    }

    #[test]
    fn views_partition_the_transcript() {
        let q = Modulus::new(11).unwrap();
        let config = SessionConfig::seeded(3, 2, q, 5).unwrap();
        let (_, t) = run_session(&bits("101"), &bits("110"), &config).unwrap();
        let sizes: usize = PartyId::ALL
            .iter()
            .map(|&p| project_view(&t, p).unwrap().messages.len())
            .sum();
        assert_eq!(sizes, t.len());

        let w2 = project_view(&t, PartyId::W2).unwrap();
        assert!(w2.messages.iter().all(|m| m.tag == StepTag::OtMaskedChoice));
        let purposes: Vec<Purpose> = w2.shared.iter().map(|d| d.purpose).collect();
        assert!(purposes
            .iter()
            .all(|p| matches!(p, Purpose::SharedPad | Purpose::OtPads)));

        let master = project_view(&t, PartyId::Master).unwrap();
        assert!(master
            .shared
            .iter()
            .all(|d| matches!(d.purpose, Purpose::OtPads | Purpose::OtChoiceMask)));
        assert_eq!(master.shared.len(), 6);
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let config = SessionConfig::seeded(3, 0, q7(), 0).unwrap();
        assert!(matches!(
            run_session(&bits("10"), &bits("110"), &config),
            Err(Error::Input(_))
        ));
    }
}
