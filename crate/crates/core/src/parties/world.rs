use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{PartyId, ProtocolError};
use crate::qsim::{self, bell_state, plus_state, Angle, BasisSign, BellLabel, Statevector};
use crate::sampling::BranchSampler;

/// Opaque handle to a simulated particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Held(PartyId),
    InTransit,
    Discarded,
    Measured,
}

/// Ground-truth record of a quantum operation, kept for inspection only.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldEvent {
    Bell {
        actor: PartyId,
        a: QubitId,
        b: QubitId,
        label: BellLabel,
    },
    Rotated {
        actor: PartyId,
        qubit: QubitId,
        angle: Angle,
        bit: u8,
    },
    Z {
        actor: PartyId,
        qubit: QubitId,
        bit: u8,
    },
}

#[derive(Debug, Clone)]
struct Factor {
    state: Statevector,
    /// Qubit held at each position of `state`.
    qubits: Vec<QubitId>,
}

/// The joint quantum state of every particle in a run, stored as a product
/// of independent factors, together with who holds each particle.
///
/// Operations are checked against ownership: a party may only act on
/// particles it currently holds. Measurement outcomes are drawn from
/// `nature`.
pub struct World<'a> {
    factors: Vec<Option<Factor>>,
    slot: BTreeMap<QubitId, usize>,
    location: BTreeMap<QubitId, Location>,
    next: u64,
    nature: Box<dyn BranchSampler + 'a>,
    events: Vec<WorldEvent>,
}

impl<'a> World<'a> {
    pub fn new(nature: Box<dyn BranchSampler + 'a>) -> Self {
        Self {
            factors: Vec::new(),
            slot: BTreeMap::new(),
            location: BTreeMap::new(),
            next: 0,
            nature,
            events: Vec::new(),
        }
    }

    fn fresh(&mut self) -> QubitId {
        let q = QubitId(self.next);
        self.next += 1;
        q
    }

    fn add_factor(&mut self, state: Statevector, qubits: Vec<QubitId>, owner: PartyId) {
        let slot = self.factors.len();
        for &q in &qubits {
            self.slot.insert(q, slot);
            self.location.insert(q, Location::Held(owner));
        }
        self.factors.push(Some(Factor { state, qubits }));
    }

    /// `(|0⟩ + e^{iθ}|1⟩)/√2` held by `owner`.
    pub fn prepare_plus(&mut self, owner: PartyId, theta: Angle) -> QubitId {
        let q = self.fresh();
        self.add_factor(plus_state(theta), vec![q], owner);
        q
    }

    /// A Bell pair `|ψ_label⟩`, first particle returned first.
    pub fn prepare_bell(&mut self, owner: PartyId, label: BellLabel) -> (QubitId, QubitId) {
        let a = self.fresh();
        let b = self.fresh();
        self.add_factor(bell_state(label), vec![a, b], owner);
        (a, b)
    }

    pub fn location(&self, q: QubitId) -> Option<Location> {
        self.location.get(&q).copied()
    }

    pub fn events(&self) -> &[WorldEvent] {
        &self.events
    }

    /// Number of qubits in the largest factor, dead ones included.
    pub fn largest_factor(&self) -> usize {
        self.factors
            .iter()
            .flatten()
            .map(|f| f.qubits.len())
            .max()
            .unwrap_or(0)
    }

    fn check_held(&self, actor: PartyId, q: QubitId) -> Result<(), ProtocolError> {
        match self.location.get(&q) {
            Some(Location::Held(p)) if *p == actor => Ok(()),
            Some(Location::Held(_)) | Some(Location::InTransit) => {
                Err(ProtocolError::NotHeld { qubit: q, actor })
            }
            Some(Location::Discarded) | Some(Location::Measured) => {
                Err(ProtocolError::QubitGone(q))
            }
            None => Err(ProtocolError::UnknownQubit(q)),
        }
    }

    fn check_distinct(qs: &[QubitId]) -> Result<(), ProtocolError> {
        for (i, q) in qs.iter().enumerate() {
            if qs[..i].contains(q) {
                return Err(ProtocolError::RepeatedQubit(*q));
            }
        }
        Ok(())
    }

    /// Hands particles to the channel.
    pub fn release(&mut self, actor: PartyId, qs: &[QubitId]) -> Result<(), ProtocolError> {
        Self::check_distinct(qs)?;
        for &q in qs {
            self.check_held(actor, q)?;
        }
        for &q in qs {
            self.location.insert(q, Location::InTransit);
        }
        Ok(())
    }

    /// Takes particles off the channel.
    pub fn claim(&mut self, actor: PartyId, qs: &[QubitId]) -> Result<(), ProtocolError> {
        for &q in qs {
            if self.location.get(&q) != Some(&Location::InTransit) {
                return Err(ProtocolError::NotInTransit(q));
            }
            self.location.insert(q, Location::Held(actor));
        }
        Ok(())
    }

    /// Puts every listed qubit in one factor and returns its slot.
    fn merge(&mut self, qs: &[QubitId]) -> usize {
        let mut slots: Vec<usize> = qs.iter().map(|q| self.slot[q]).collect();
        slots.sort_unstable();
        slots.dedup();
        let target = slots[0];
        for &s in &slots[1..] {
            let f = self.factors[s].take().expect("live factor");
            let t = self.factors[target].as_mut().expect("live factor");
            t.state = t.state.tensor(&f.state);
            for &q in &f.qubits {
                self.slot.insert(q, target);
            }
            t.qubits.extend(f.qubits);
        }
        target
    }

    fn position(&self, slot: usize, q: QubitId) -> usize {
        let f = self.factors[slot].as_ref().expect("live factor");
        f.qubits
            .iter()
            .position(|&x| x == q)
            .expect("qubit in its factor")
    }

    /// Replaces a factor after measuring `gone`, dropping it when nothing
    /// live remains.
    fn shrink(&mut self, slot: usize, gone: &[QubitId], residual: Statevector) {
        for q in gone {
            self.slot.remove(q);
            self.location.insert(*q, Location::Measured);
        }
        let mut f = self.factors[slot].take().expect("live factor");
        f.qubits.retain(|q| !gone.contains(q));
        f.state = residual;
        self.factors[slot] = Some(f);
        self.drop_if_dead(slot);
    }

    fn drop_if_dead(&mut self, slot: usize) {
        let dead = match &self.factors[slot] {
            Some(f) => f
                .qubits
                .iter()
                .all(|q| self.location[q] == Location::Discarded),
            None => false,
        };
        if dead {
            let f = self.factors[slot].take().expect("live factor");
            for q in f.qubits {
                self.slot.remove(&q);
            }
        }
    }

    pub fn cz(&mut self, actor: PartyId, a: QubitId, b: QubitId) -> Result<(), ProtocolError> {
        Self::check_distinct(&[a, b])?;
        self.check_held(actor, a)?;
        self.check_held(actor, b)?;
        let slot = self.merge(&[a, b]);
        let (i, j) = (self.position(slot, a), self.position(slot, b));
        self.factors[slot]
            .as_mut()
            .expect("live factor")
            .state
            .apply_cz(i, j)?;
        Ok(())
    }

    /// Measures `q` in `{(|0⟩ ± e^{i·sign·θ}|1⟩)/√2}`.
    pub fn measure_rotated(
        &mut self,
        actor: PartyId,
        q: QubitId,
        angle: Angle,
        sign: BasisSign,
    ) -> Result<u8, ProtocolError> {
        self.check_held(actor, q)?;
        let slot = self.slot[&q];
        let i = self.position(slot, q);
        let state = &self.factors[slot].as_ref().expect("live factor").state;
        let (o, rest) = qsim::rotated_collapse(state, i, angle, sign, &mut self.nature)?;
        self.shrink(slot, &[q], rest);
        self.events.push(WorldEvent::Rotated {
            actor,
            qubit: q,
            angle,
            bit: o.bit,
        });
        Ok(o.bit)
    }

    pub fn measure_z(&mut self, actor: PartyId, q: QubitId) -> Result<u8, ProtocolError> {
        self.check_held(actor, q)?;
        let slot = self.slot[&q];
        let i = self.position(slot, q);
        let state = &self.factors[slot].as_ref().expect("live factor").state;
        let (o, rest) = qsim::z_collapse(state, i, &mut self.nature)?;
        self.shrink(slot, &[q], rest);
        self.events.push(WorldEvent::Z {
            actor,
            qubit: q,
            bit: o.bit,
        });
        Ok(o.bit)
    }

    /// Bell-basis measurement with `a` as the first particle.
    pub fn measure_bell(
        &mut self,
        actor: PartyId,
        a: QubitId,
        b: QubitId,
    ) -> Result<BellLabel, ProtocolError> {
        Self::check_distinct(&[a, b])?;
        self.check_held(actor, a)?;
        self.check_held(actor, b)?;
        let slot = self.merge(&[a, b]);
        let (i, j) = (self.position(slot, a), self.position(slot, b));
        let state = &self.factors[slot].as_ref().expect("live factor").state;
        let (label, _, rest) = qsim::bell_collapse(state, i, j, &mut self.nature)?;
        self.shrink(slot, &[a, b], rest);
        self.events.push(WorldEvent::Bell { actor, a, b, label });
        Ok(label)
    }

    /// Throws a particle away without measuring it. Its partners keep their
    /// reduced state; nothing is sampled.
    pub fn discard(&mut self, actor: PartyId, q: QubitId) -> Result<(), ProtocolError> {
        self.check_held(actor, q)?;
        self.location.insert(q, Location::Discarded);
        let slot = self.slot[&q];
        self.drop_if_dead(slot);
        Ok(())
    }

    /// State of `qs` (qubit `j` is `qs[j]`), provided they share a factor and
    /// every other qubit of it is in a product state with them.
    pub fn joint_state(&self, qs: &[QubitId]) -> Result<Statevector, ProtocolError> {
        Self::check_distinct(qs)?;
        let slots: Vec<usize> = qs
            .iter()
            .map(|q| {
                self.slot
                    .get(q)
                    .copied()
                    .ok_or(ProtocolError::QubitGone(*q))
            })
            .collect::<Result<_, _>>()?;
        if slots.iter().any(|&s| s != slots[0]) {
            // independent factors: the joint state is their product
            let mut state = self.joint_state(&qs[..1])?;
            for q in &qs[1..] {
                state = state.tensor(&self.joint_state(std::slice::from_ref(q))?);
            }
            return Ok(state);
        }
        let f = self.factors[slots[0]].as_ref().expect("live factor");
        let others: Vec<usize> = (0..f.qubits.len())
            .filter(|&i| !qs.contains(&f.qubits[i]))
            .collect();
        let mut state = f.state.clone();
        let mut kept: Vec<QubitId> = f.qubits.clone();
        if !others.is_empty() {
            state = state.remove_qubits(&others, 1e-9)?;
            kept = f
                .qubits
                .iter()
                .copied()
                .filter(|q| qs.contains(q))
                .collect();
        }
        let order: Vec<usize> = qs
            .iter()
            .map(|q| kept.iter().position(|k| k == q).expect("kept"))
            .collect();
        Ok(state.permuted(&order)?)
    }
}
