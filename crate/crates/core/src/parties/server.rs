use super::world::{QubitId, World};
use super::{PartyId, ProtocolError, Strategy};
use crate::qsim::{Angle, BasisSign, BellLabel};
use crate::sampling::BranchSampler;

/// A server's quantum actions, filtered through its strategy.
pub struct Server<'r> {
    pub id: PartyId,
    pub strategy: Strategy,
    rng: Box<dyn BranchSampler + 'r>,
}

impl<'r> Server<'r> {
    pub fn new(id: PartyId, strategy: Strategy, rng: Box<dyn BranchSampler + 'r>) -> Self {
        Self { id, strategy, rng }
    }

    pub fn colludes(&self) -> bool {
        self.strategy == Strategy::Collude
    }

    /// Equatorial measurement at `angle`; returns the reported bit.
    pub fn measure_angle(
        &mut self,
        world: &mut World<'_>,
        q: QubitId,
        angle: Angle,
        sign: BasisSign,
    ) -> Result<u8, ProtocolError> {
        let angle = match self.strategy {
            Strategy::WrongBasis { offset } => angle + offset,
            _ => angle,
        };
        let bit = world.measure_rotated(self.id, q, angle, sign)?;
        Ok(match self.strategy {
            Strategy::FlipBits => bit ^ 1,
            _ => bit,
        })
    }

    /// Bell measurement of `(a, b)`; returns the reported label.
    pub fn bell_measure(
        &mut self,
        world: &mut World<'_>,
        a: QubitId,
        b: QubitId,
    ) -> Result<BellLabel, ProtocolError> {
        match self.strategy {
            Strategy::GuessBell => {
                world.discard(self.id, a)?;
                world.discard(self.id, b)?;
                Ok(BellLabel::from_index(self.rng.uniform(4)))
            }
            _ => world.measure_bell(self.id, a, b),
        }
    }

    /// Computational-basis readout of an output qubit; always honest.
    pub fn readout(&mut self, world: &mut World<'_>, q: QubitId) -> Result<u8, ProtocolError> {
        world.measure_z(self.id, q)
    }

    pub fn discard(&mut self, world: &mut World<'_>, q: QubitId) -> Result<(), ProtocolError> {
        world.discard(self.id, q)
    }

    pub fn cz(
        &mut self,
        world: &mut World<'_>,
        a: QubitId,
        b: QubitId,
    ) -> Result<(), ProtocolError> {
        world.cz(self.id, a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Forced;

    #[test]
    fn strategies_alter_reports() {
        let mut w = World::new(Box::new(Forced(0)));
        let q = w.prepare_plus(PartyId::Bob, Angle::new(2));
        let mut honest = Server::new(PartyId::Bob, Strategy::Honest, Box::new(Forced(0)));
        assert_eq!(
            honest
                .measure_angle(&mut w, q, Angle::new(2), BasisSign::Plus)
                .unwrap(),
            0
        );

        let q = w.prepare_plus(PartyId::Bob, Angle::new(2));
        let mut flip = Server::new(PartyId::Bob, Strategy::FlipBits, Box::new(Forced(0)));
        assert_eq!(
            flip.measure_angle(&mut w, q, Angle::new(2), BasisSign::Plus)
                .unwrap(),
            1
        );

        // outcome 1 is impossible for the matching basis but certain after a π offset
        let mut w = World::new(Box::new(Forced(1)));
        let q = w.prepare_plus(PartyId::Bob, Angle::new(2));
        let mut wrong = Server::new(
            PartyId::Bob,
            Strategy::WrongBasis { offset: Angle::PI },
            Box::new(Forced(0)),
        );
        assert_eq!(
            wrong
                .measure_angle(&mut w, q, Angle::new(2), BasisSign::Plus)
                .unwrap(),
            1
        );

        let (a, b) = w.prepare_bell(PartyId::Bob, BellLabel::PHI_PLUS);
        let mut guess = Server::new(PartyId::Bob, Strategy::GuessBell, Box::new(Forced(3)));
        assert_eq!(
            guess.bell_measure(&mut w, a, b).unwrap(),
            BellLabel::from_index(3)
        );
        assert!(w
            .events()
            .iter()
            .all(|e| !matches!(e, crate::parties::WorldEvent::Bell { .. })));
    }
}
