use super::world::{QubitId, World};
use super::{DecoyVerdict, PartyId, ProtocolError};
use crate::qsim::BellLabel;
use crate::sampling::BranchSampler;

/// Decoy Bell pairs prepared by the center.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoys {
    pub pairs: Vec<(QubitId, QubitId)>,
    pub labels: Vec<BellLabel>,
}

impl Decoys {
    pub fn first(&self) -> Vec<QubitId> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn second(&self) -> Vec<QubitId> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

/// `h` Bell pairs with uniformly random labels, held by the center.
pub fn make_decoys(world: &mut World<'_>, h: usize, rng: &mut dyn BranchSampler) -> Decoys {
    let labels: Vec<BellLabel> = (0..h)
        .map(|_| BellLabel::from_index(rng.uniform(4)))
        .collect();
    let pairs = labels
        .iter()
        .map(|&l| world.prepare_bell(PartyId::Center, l))
        .collect();
    Decoys { pairs, labels }
}

/// Compares reported decoy labels with the ones the center announced.
pub fn verify_decoys(
    reported: &[BellLabel],
    expected: &[BellLabel],
) -> Result<DecoyVerdict, ProtocolError> {
    if reported.len() != expected.len() {
        return Err(ProtocolError::LengthMismatch {
            expected: expected.len(),
            got: reported.len(),
        });
    }
    let mismatches = reported
        .iter()
        .zip(expected)
        .filter(|(a, b)| a != b)
        .count();
    Ok(if mismatches == 0 {
        DecoyVerdict::Pass
    } else {
        DecoyVerdict::Cheating { mismatches }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        let l = |i| BellLabel::from_index(i);
        assert_eq!(
            verify_decoys(&[l(1), l(2)], &[l(1), l(2)]).unwrap(),
            DecoyVerdict::Pass
        );
        assert_eq!(
            verify_decoys(&[l(1), l(3)], &[l(1), l(2)]).unwrap(),
            DecoyVerdict::Cheating { mismatches: 1 }
        );
        assert!(verify_decoys(&[l(1)], &[l(1), l(2)]).is_err());
    }
}
