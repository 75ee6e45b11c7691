//! Self-checks of the identities the protocols rely on.
//!
//! These run on tiny exact statevectors and are cheap enough to execute
//! before a protocol run, which is how the protocol layer validates the basis
//! sign conventions it was configured with.

use super::*;
use crate::sampling::Forced;

pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub cases: usize,
    pub failures: usize,
    /// Largest deviation observed in a branch probability.
    pub max_probability_error: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Bell-measures the middle qubits of `|ψ_a⟩ ⊗ |ψ_b⟩` for all 16 input
/// label pairs and all four outcomes. Each outcome must have probability
/// 1/4 and leave the outer qubits in `|ψ_{a⊕b⊕outcome}⟩`.
pub fn swap_oracle() -> Result<CheckOutcome, QsimError> {
    let mut out = CheckOutcome {
        cases: 0,
        failures: 0,
        max_probability_error: 0.0,
    };
    for a in BellLabel::ALL {
        for b in BellLabel::ALL {
            let joint = bell_state(a).tensor(&bell_state(b));
            for outcome in BellLabel::ALL {
                out.cases += 1;
                let m = measure_bell_with(&joint, 1, 2, &mut Forced(outcome.index()))?;
                let err = (m.probability - 0.25).abs();
                out.max_probability_error = out.max_probability_error.max(err);
                let outer = m.state.remove_qubits(&[1, 2], IDENTITY_TOL)?;
                let want = swapped_label(a, b, outcome);
                if err > IDENTITY_TOL
                    || !equal_up_to_phase(&outer, &bell_state(want), IDENTITY_TOL)?
                {
                    out.failures += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Label of the outer pair after swapping: Pauli frames compose by XOR.
pub fn swapped_label(a: BellLabel, b: BellLabel, outcome: BellLabel) -> BellLabel {
    BellLabel::new(a.z() ^ b.z() ^ outcome.z(), a.x() ^ b.x() ^ outcome.x()).expect("bits")
}

/// Measures one half of `|ψ_frame⟩` in the basis of `tilde_angle(θ, frame)`
/// with the given sign, for all 8 θ, 4 frames and both outcomes, and checks
/// that the partner is left in `plus_state(θ + bπ)`.
pub fn residual_identity(sign: BasisSign) -> Result<CheckOutcome, QsimError> {
    let mut out = CheckOutcome {
        cases: 0,
        failures: 0,
        max_probability_error: 0.0,
    };
    for theta in Angle::all() {
        for frame in BellLabel::ALL {
            for b in 0..2u8 {
                out.cases += 1;
                let (o, state) = measure_rotated_with(
                    &bell_state(frame),
                    0,
                    theta.tilde(frame),
                    sign,
                    &mut Forced(b as usize),
                )?;
                let err = (o.probability - 0.5).abs();
                out.max_probability_error = out.max_probability_error.max(err);
                let partner = state.remove_qubits(&[0], IDENTITY_TOL)?;
                if err > IDENTITY_TOL
                    || !equal_up_to_phase(&partner, &plus_state(theta.plus_pi(b)), IDENTITY_TOL)?
                {
                    out.failures += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Blind-measurement identity: measuring a qubit prepared as `|θ⟩` at
/// `θ + α` acts on its graph neighbour exactly like measuring `|0⟩`'s plus
/// state at `α`.
pub fn blind_measurement_identity(sign: BasisSign) -> Result<CheckOutcome, QsimError> {
    let mut out = CheckOutcome {
        cases: 0,
        failures: 0,
        max_probability_error: 0.0,
    };
    let reference =
        |prep: Angle| apply_cz(&plus_state(prep).tensor(&plus_state(Angle::ZERO)), 0, 1);
    for theta in Angle::all() {
        for alpha in Angle::all() {
            for b in 0..2u8 {
                out.cases += 1;
                let (o_blind, s_blind) = measure_rotated_with(
                    &reference(theta)?,
                    0,
                    theta + alpha,
                    sign,
                    &mut Forced(b as usize),
                )?;
                let (o_plain, s_plain) = measure_rotated_with(
                    &reference(Angle::ZERO)?,
                    0,
                    alpha,
                    BasisSign::Plus,
                    &mut Forced(b as usize),
                )?;
                let err = (o_blind.probability - o_plain.probability).abs();
                out.max_probability_error = out.max_probability_error.max(err);
                let a = s_blind.remove_qubits(&[0], IDENTITY_TOL)?;
                let p = s_plain.remove_qubits(&[0], IDENTITY_TOL)?;
                if err > IDENTITY_TOL || !equal_up_to_phase(&a, &p, IDENTITY_TOL)? {
                    out.failures += 1;
                }
            }
        }
    }
    Ok(out)
}
