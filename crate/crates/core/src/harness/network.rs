//! In-memory message delivery between party state machines.

use std::collections::VecDeque;
use std::sync::mpsc;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::rng::SharedDraw;
use crate::harness::transcript::{Transcript, TranscriptEntry};
use crate::protocol::{PartyId, ProtocolMessage};

/// A serial state machine that consumes one message at a time.
pub trait Party {
    fn id(&self) -> PartyId;

    /// Messages the party emits before receiving anything.
    fn start(&mut self) -> Result<Vec<ProtocolMessage>>;

    fn receive(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>>;

    fn is_finished(&self) -> bool;

    /// Human-readable description of the step the party is blocked on.
    fn awaiting(&self) -> String;

    fn shared_randomness(&self) -> Vec<SharedDraw>;

    /// The party's output once finished, if it produces one.
    fn outcome(&self) -> Option<&Result<u64>> {
        None
    }
}

/// Delivery order of pending messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheduler {
    /// Oldest pending message first.
    #[default]
    Fifo,
    /// Seed-driven choice among the oldest pending message of each
    /// sender-receiver pair; per-pair FIFO is preserved.
    Interleaved { seed: u64 },
}

/// Delivers pending messages until none remain and returns the transcript.
///
/// Fails with [`Error::Deadlock`] if the queue drains while some party is
/// still waiting.
pub fn deliver_until_quiescent(
    parties: &mut [&mut dyn Party],
    pending: Vec<ProtocolMessage>,
    scheduler: Scheduler,
) -> Result<Transcript> {
    let mut queue = VecDeque::with_capacity(16);
    queue.extend(pending);
    let mut rng = match scheduler {
        Scheduler::Fifo => None,
        Scheduler::Interleaved { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut transcript = Transcript {
        entries: Vec::with_capacity(32),
        parties: parties.iter().map(|p| p.id()).collect(),
        ..Transcript::default()
    };
    let mut delivered = 0u64;
    while !queue.is_empty() {
        let pos = match rng.as_mut() {
            None => 0,
            Some(rng) => {
                let heads = pair_heads(&queue);
                heads[rng.gen_range(0..heads.len())]
            }
        };
        let msg = queue.remove(pos).expect("position in range");
        let party = parties
            .iter_mut()
            .find(|p| p.id() == msg.to)
            .ok_or_else(|| Error::input(format!("message addressed to absent party {}", msg.to)))?;
        queue.extend(party.receive(&msg)?);
        transcript.entries.push(TranscriptEntry {
            delivery_index: delivered,
            message: msg,
        });
        delivered += 1;
    }
    if let Some(p) = parties.iter().find(|p| !p.is_finished()) {
        return Err(Error::Deadlock {
            stalled: format!("{} is waiting for {}", p.id(), p.awaiting()),
        });
    }
    for p in parties.iter() {
        transcript.shared.insert(p.id(), p.shared_randomness());
    }
    Ok(transcript)
}

/// Queue positions of the first message of every (from, to) pair.
fn pair_heads(queue: &VecDeque<ProtocolMessage>) -> Vec<usize> {
    let mut seen = Vec::new();
    let mut heads = Vec::new();
    for (i, m) in queue.iter().enumerate() {
        if !seen.contains(&(m.from, m.to)) {
            seen.push((m.from, m.to));
            heads.push(i);
        }
    }
    heads
}

enum Event {
    Processed { outputs: Vec<ProtocolMessage> },
    Failed(Error),
}

/// Runs every party on its own thread; a router on the calling thread
/// forwards messages and records them in the order it hands them out.
///
/// The resulting transcript is a per-pair-FIFO reordering of the
/// single-threaded one. Parties are returned in their original order.
pub fn run_threaded(
    parties: Vec<Box<dyn Party + Send>>,
    pending: Vec<ProtocolMessage>,
) -> Result<(Transcript, Vec<Box<dyn Party + Send>>)> {
    let ids: Vec<PartyId> = parties.iter().map(|p| p.id()).collect();
    let (event_tx, event_rx) = mpsc::channel::<Event>();
    let mut inboxes = Vec::new();
    let mut handles = Vec::new();
    for mut party in parties {
        let (tx, rx) = mpsc::channel::<ProtocolMessage>();
        inboxes.push(tx);
        let events = event_tx.clone();
        handles.push(thread::spawn(move || {
            for msg in rx {
                let event = match party.receive(&msg) {
                    Ok(outputs) => Event::Processed { outputs },
                    Err(e) => Event::Failed(e),
                };
                if events.send(event).is_err() {
                    break;
                }
            }
            party
        }));
    }
    drop(event_tx);

    let mut transcript = Transcript {
        parties: ids.clone(),
        ..Transcript::default()
    };
    let mut queue: VecDeque<ProtocolMessage> = pending.into();
    let mut in_flight = 0usize;
    let mut failure = None;
    loop {
        while let Some(msg) = queue.pop_front() {
            let Some(slot) = ids.iter().position(|&id| id == msg.to) else {
                failure = Some(Error::input(format!(
                    "message addressed to absent party {}",
                    msg.to
                )));
                break;
            };
            transcript.entries.push(TranscriptEntry {
                delivery_index: transcript.entries.len() as u64,
                message: msg.clone(),
            });
            inboxes[slot].send(msg).expect("party thread alive");
            in_flight += 1;
        }
        if in_flight == 0 || failure.is_some() {
            break;
        }
        match event_rx.recv().expect("party threads alive") {
            Event::Processed { outputs } => queue.extend(outputs),
            Event::Failed(e) => failure = Some(e),
        }
        in_flight -= 1;
    }
    drop(inboxes);
    let parties: Vec<Box<dyn Party + Send>> = handles
        .into_iter()
        .map(|h| h.join().expect("party thread panicked"))
        .collect();
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(p) = parties.iter().find(|p| !p.is_finished()) {
        return Err(Error::Deadlock {
            stalled: format!("{} is waiting for {}", p.id(), p.awaiting()),
        });
    }
    for p in &parties {
        transcript.shared.insert(p.id(), p.shared_randomness());
    }
    Ok((transcript, parties))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replies to `peer` while it has replies left; done after `expected`
    /// receptions.
    struct Echo {
        id: PartyId,
        peer: PartyId,
        received: usize,
        expected: usize,
        replies: usize,
    }

    fn echo(id: PartyId, peer: PartyId, expected: usize, replies: usize) -> Echo {
        Echo {
            id,
            peer,
            received: 0,
            expected,
            replies,
        }
    }

    impl Party for Echo {
        fn id(&self) -> PartyId {
            self.id
        }
        fn start(&mut self) -> Result<Vec<ProtocolMessage>> {
            Ok(Vec::new())
        }
        fn receive(&mut self, _msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>> {
            self.received += 1;
            if self.replies == 0 {
                return Ok(Vec::new());
            }
            self.replies -= 1;
            Ok(vec![ProtocolMessage {
                to: self.peer,
                from: self.id,
                ..ProtocolMessage::ot_masked_choice(self.received as u32, false)
            }])
        }
        fn is_finished(&self) -> bool {
            self.received >= self.expected
        }
        fn awaiting(&self) -> String {
            format!("message {}", self.received)
        }
        fn shared_randomness(&self) -> Vec<SharedDraw> {
            Vec::new()
        }
    }

    fn kickoff(to: PartyId) -> ProtocolMessage {
        ProtocolMessage {
            to,
            from: PartyId::Master,
            ..ProtocolMessage::ot_masked_choice(0, true)
        }
    }

    #[test]
    fn empty_party_set_gives_empty_transcript() {
        let t = deliver_until_quiescent(&mut [], Vec::new(), Scheduler::Fifo).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn deadlock_names_stalled_party() {
        let mut a = echo(PartyId::W1, PartyId::W2, 1, 1);
        let err =
            deliver_until_quiescent(&mut [&mut a], vec![kickoff(PartyId::W1)], Scheduler::Fifo)
                .unwrap_err();
        // W1's reply goes to W2, which is absent
        assert!(matches!(err, Error::Input(_)));

        let mut a = echo(PartyId::W1, PartyId::W2, 1, 1);
        let mut b = echo(PartyId::W2, PartyId::W1, 5, 0);
        let err = deliver_until_quiescent(
            &mut [&mut a, &mut b],
            vec![kickoff(PartyId::W1)],
            Scheduler::Fifo,
        )
        .unwrap_err();
        match err {
            Error::Deadlock { stalled } => {
                assert!(stalled.starts_with("W2 is waiting for message 1"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ping_pong_delivers_in_order() {
        let mut a = echo(PartyId::W1, PartyId::W2, 3, 2);
        let mut b = echo(PartyId::W2, PartyId::W1, 2, 2);
        let t = deliver_until_quiescent(
            &mut [&mut a, &mut b],
            vec![kickoff(PartyId::W1)],
            Scheduler::Fifo,
        )
        .unwrap();
        let route: Vec<_> = t.messages().map(|m| (m.from, m.to)).collect();
        assert_eq!(
            route,
            vec![
                (PartyId::Master, PartyId::W1),
                (PartyId::W1, PartyId::W2),
                (PartyId::W2, PartyId::W1),
                (PartyId::W1, PartyId::W2),
                (PartyId::W2, PartyId::W1),
            ]
        );
        assert!(t
            .entries
            .iter()
            .enumerate()
            .all(|(i, e)| e.delivery_index == i as u64));
    }
}
