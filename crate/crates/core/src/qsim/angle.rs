use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use std::fmt;

use super::QsimError;

/// An element `k·π/4` of the eight-element angle set, stored as `k mod 8`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(try_from = "i64", into = "u8")]
pub struct Angle(u8);

impl Angle {
    pub const ZERO: Angle = Angle(0);
    pub const PI: Angle = Angle(4);

    /// Reduces any integer multiple of π/4 into the set.
    pub const fn new(k: i64) -> Self {
        Angle(k.rem_euclid(8) as u8)
    }

    pub fn all() -> impl Iterator<Item = Angle> {
        (0..8).map(Angle)
    }

    pub const fn k(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * FRAC_PI_4
    }

    /// Adds `bit · π`.
    pub fn plus_pi(self, bit: u8) -> Self {
        Angle::new(self.0 as i64 + 4 * (bit & 1) as i64)
    }

    /// `(−1)^x · θ + z·π` for the frame `(z, x)`.
    pub fn tilde(self, frame: BellLabel) -> Self {
        tilde_angle(self, frame)
    }

    /// The unique θ with `θ.tilde(frame) == self`.
    pub fn untilde(self, frame: BellLabel) -> Self {
        untilde_angle(self, frame)
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        angle_add(self, rhs)
    }
}

impl std::ops::Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle::new(self.0 as i64 - rhs.0 as i64)
    }
}

impl std::ops::Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle::new(-(self.0 as i64))
    }
}

impl TryFrom<i64> for Angle {
    type Error = QsimError;
    fn try_from(k: i64) -> Result<Self, Self::Error> {
        if (0..8).contains(&k) {
            Ok(Angle(k as u8))
        } else {
            Err(QsimError::InvalidAngle(k))
        }
    }
}

impl From<Angle> for u8 {
    fn from(a: Angle) -> u8 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}π/4", self.0)
    }
}

pub fn angle_add(a: Angle, b: Angle) -> Angle {
    Angle((a.0 + b.0) % 8)
}

pub fn tilde_angle(theta: Angle, frame: BellLabel) -> Angle {
    let signed = if frame.x() == 1 {
        -(theta.0 as i64)
    } else {
        theta.0 as i64
    };
    Angle::new(signed + 4 * frame.z() as i64)
}

/// Inverse of [`tilde_angle`] for a fixed frame: θ = (−1)^x · (θ̃ − z·π).
pub fn untilde_angle(tilde: Angle, frame: BellLabel) -> Angle {
    let shifted = tilde.0 as i64 - 4 * frame.z() as i64;
    Angle::new(if frame.x() == 1 { -shifted } else { shifted })
}

/// Bell-state label `(z, x)`; also read as the Pauli frame `X^x Z^z`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(try_from = "(u8, u8)", into = "(u8, u8)")]
pub struct BellLabel {
    z: u8,
    x: u8,
}

impl BellLabel {
    pub const PHI_PLUS: BellLabel = BellLabel { z: 0, x: 0 };
    pub const ALL: [BellLabel; 4] = [
        BellLabel { z: 0, x: 0 },
        BellLabel { z: 0, x: 1 },
        BellLabel { z: 1, x: 0 },
        BellLabel { z: 1, x: 1 },
    ];

    pub fn new(z: u8, x: u8) -> Result<Self, QsimError> {
        if z > 1 || x > 1 {
            return Err(QsimError::InvalidBit);
        }
        Ok(BellLabel { z, x })
    }

    pub const fn z(self) -> u8 {
        self.z
    }

    pub const fn x(self) -> u8 {
        self.x
    }

    /// Position in [`BellLabel::ALL`].
    pub const fn index(self) -> usize {
        (2 * self.z + self.x) as usize
    }

    pub const fn from_index(i: usize) -> Self {
        Self::ALL[i & 3]
    }
}

impl TryFrom<(u8, u8)> for BellLabel {
    type Error = QsimError;
    fn try_from((z, x): (u8, u8)) -> Result<Self, Self::Error> {
        BellLabel::new(z, x)
    }
}

impl From<BellLabel> for (u8, u8) {
    fn from(l: BellLabel) -> (u8, u8) {
        (l.z, l.x)
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.z, self.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(z: u8, x: u8) -> BellLabel {
        BellLabel::new(z, x).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(angle_add(Angle::new(1), Angle::new(2)), Angle::new(3));
        assert_eq!(angle_add(Angle::new(7), Angle::new(4)), Angle::new(3));
        assert_eq!(angle_add(Angle::new(0), Angle::new(5)), Angle::new(5));
    }

    #[test]
    fn tilde_examples() {
        assert_eq!(tilde_angle(Angle::new(3), l(0, 0)).k(), 3);
        assert_eq!(tilde_angle(Angle::new(3), l(1, 1)).k(), 1);
        assert_eq!(tilde_angle(Angle::new(0), l(1, 0)).k(), 4);
    }

    #[test]
    fn tilde_is_a_bijection_with_inverse() {
        for frame in BellLabel::ALL {
            let mut seen = [false; 8];
            for theta in Angle::all() {
                let t = theta.tilde(frame);
                assert!(!seen[t.k() as usize]);
                seen[t.k() as usize] = true;
                assert_eq!(t.untilde(frame), theta);
                assert_eq!(theta.untilde(frame).tilde(frame), theta);
            }
        }
    }

    #[test]
    fn reduction_and_validation() {
        assert_eq!(Angle::new(-1).k(), 7);
        assert_eq!(Angle::new(17).k(), 1);
        assert!(Angle::try_from(8).is_err());
        assert!(BellLabel::new(2, 0).is_err());
        assert_eq!(serde_json::to_string(&l(1, 0)).unwrap(), "[1,0]");
        assert!(serde_json::from_str::<Angle>("9").is_err());
        assert_eq!(serde_json::from_str::<Angle>("6").unwrap(), Angle::new(6));
    }
}
