use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::message::{Message, Transcript};
use super::world::World;
use super::{AbortReason, Halt, PartyId, ProtocolError, Variant};

/// The set of directed channels a protocol may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelPolicy {
    allowed: BTreeSet<(PartyId, PartyId)>,
}

impl ChannelPolicy {
    pub fn new(pairs: impl IntoIterator<Item = (PartyId, PartyId)>) -> Self {
        Self {
            allowed: pairs.into_iter().collect(),
        }
    }

    /// Channels of each protocol. Double-server runs forbid any traffic
    /// between the two servers; triple-server runs allow it.
    pub fn for_variant(v: Variant) -> Self {
        use PartyId::*;
        let both = |a, b| [(a, b), (b, a)];
        let pairs: Vec<(PartyId, PartyId)> = match v {
            Variant::Bfk => both(Alice, Bob).to_vec(),
            Variant::Single => [both(Alice, Bob), both(Center, Alice), both(Center, Bob)].concat(),
            Variant::Double => [
                both(Alice, Bob1),
                both(Alice, Bob2),
                both(Center, Bob1),
                both(Center, Bob2),
                both(Center, Alice),
            ]
            .concat(),
            Variant::Triple => {
                let parties = v.parties();
                parties
                    .iter()
                    .flat_map(|&a| parties.iter().map(move |&b| (a, b)))
                    .filter(|(a, b)| a != b)
                    .collect()
            }
        };
        Self::new(pairs)
    }

    pub fn allows(&self, from: PartyId, to: PartyId) -> bool {
        self.allowed.contains(&(from, to))
    }
}

/// FIFO channels between parties with a shared transcript.
#[derive(Debug, Clone)]
pub struct Network {
    policy: ChannelPolicy,
    queues: BTreeMap<(PartyId, PartyId), VecDeque<Message>>,
    transcript: Transcript,
}

impl Network {
    pub fn new(policy: ChannelPolicy) -> Self {
        Self {
            policy,
            queues: BTreeMap::new(),
            transcript: Transcript::default(),
        }
    }

    /// Delivers a message. A send on a forbidden channel is not logged and
    /// aborts the run.
    pub fn send(
        &mut self,
        world: &mut World<'_>,
        from: PartyId,
        to: PartyId,
        msg: Message,
    ) -> Result<(), Halt> {
        if !self.policy.allows(from, to) {
            return Err(Halt::Abort(AbortReason::Policy { from, to }));
        }
        if let Message::QubitTransfer(ids) = &msg {
            world.release(from, ids)?;
        }
        self.transcript.push(from, to, msg.clone());
        self.queues.entry((from, to)).or_default().push_back(msg);
        Ok(())
    }

    /// Takes the oldest pending message on `from → to`.
    pub fn recv(
        &mut self,
        world: &mut World<'_>,
        to: PartyId,
        from: PartyId,
    ) -> Result<Message, ProtocolError> {
        let msg = self
            .queues
            .get_mut(&(from, to))
            .and_then(|q| q.pop_front())
            .ok_or(ProtocolError::NoMessage { from, to })?;
        if let Message::QubitTransfer(ids) = &msg {
            world.claim(to, ids)?;
        }
        Ok(msg)
    }

    pub fn pending(&self, from: PartyId, to: PartyId) -> usize {
        self.queues.get(&(from, to)).map_or(0, |q| q.len())
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
