//! Dense statevector engine.
//!
//! Only the primitives the protocols need are provided: single-qubit
//! equatorial states, Bell pairs, controlled-Z, Bell-basis measurement and
//! measurement in a rotated equatorial basis. Measurements come in two
//! flavours: `measure_*` keep the collapsed qubits in the returned state, the
//! `*_collapse` variants trace them out and draw from a [`BranchSampler`].

mod angle;
pub mod checks;
mod state;

pub use angle::{angle_add, tilde_angle, untilde_angle, Angle, BellLabel};
pub use state::{Statevector, NORM_TOL};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

use crate::sampling::{BranchSampler, RngSampler, SampleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsimError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {0} used twice in one operation")]
    RepeatedQubit(usize),
    #[error("amplitude vector length {0} is not a power of two")]
    BadLength(usize),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("qubits to remove are entangled with the rest of the state")]
    NotProduct,
    #[error("cannot remove every qubit of a state")]
    EmptyState,
    #[error("angle index {0} is outside 0..8")]
    InvalidAngle(i64),
    #[error("bit value must be 0 or 1")]
    InvalidBit,
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Sign of the phase in the measurement basis `{|0⟩ ± e^{i·sign·θ}|1⟩}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum BasisSign {
    Plus,
    Minus,
}

impl BasisSign {
    pub fn flipped(self) -> Self {
        match self {
            BasisSign::Plus => BasisSign::Minus,
            BasisSign::Minus => BasisSign::Plus,
        }
    }

    /// The angle actually appearing in the basis phase.
    pub fn apply(self, theta: Angle) -> Angle {
        match self {
            BasisSign::Plus => theta,
            BasisSign::Minus => -theta,
        }
    }
}

impl TryFrom<i8> for BasisSign {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(BasisSign::Plus),
            -1 => Ok(BasisSign::Minus),
            other => Err(format!("basis sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<BasisSign> for i8 {
    fn from(s: BasisSign) -> i8 {
        match s {
            BasisSign::Plus => 1,
            BasisSign::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasOutcome {
    pub bit: u8,
    pub probability: f64,
}

fn phase(theta: Angle) -> Complex64 {
    Complex64::from_polar(1.0, theta.radians())
}

/// `(|0⟩ + e^{iθ}|1⟩)/√2`.
pub fn plus_state(theta: Angle) -> Statevector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Statevector::from_amplitudes(vec![h, h * phase(theta)]).expect("unit vector")
}

/// `(I ⊗ X^x Z^z)(|00⟩ + |11⟩)/√2` with qubit 0 the first particle; `Z^z`
/// acts first.
pub fn bell_state(label: BellLabel) -> Statevector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut s = Statevector::from_amplitudes(vec![h, zero, zero, h]).expect("unit vector");
    if label.z() == 1 {
        s.apply_z(1).expect("qubit 1 exists");
    }
    if label.x() == 1 {
        s.apply_x(1).expect("qubit 1 exists");
    }
    s
}

pub fn apply_cz(state: &Statevector, i: usize, j: usize) -> Result<Statevector, QsimError> {
    let mut out = state.clone();
    out.apply_cz(i, j)?;
    Ok(out)
}

/// Basis vector for outcome `bit` of the rotated measurement.
pub fn rotated_ket(theta: Angle, sign: BasisSign, bit: u8) -> [Complex64; 2] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let rel = sign.apply(theta).plus_pi(bit);
    [h, h * phase(rel)]
}

/// Projects `qubits` onto one of `kets`, sampled by Born probabilities, and
/// traces the projected qubits out. Returns the branch index, its
/// probability and the renormalized residual state, which has zero qubits
/// when every qubit was measured.
pub fn collapse(
    state: &Statevector,
    qubits: &[usize],
    kets: &[Vec<Complex64>],
    sampler: &mut dyn BranchSampler,
) -> Result<(usize, f64, Statevector), QsimError> {
    let branches = kets
        .iter()
        .map(|k| state.contract(qubits, k))
        .collect::<Result<Vec<_>, _>>()?;
    let probs: Vec<f64> = branches
        .iter()
        .map(|b| b.iter().map(|a| a.norm_sqr()).sum())
        .collect();
    let pick = sampler.select(&probs)?;
    let p = probs[pick];
    let norm = p.sqrt();
    let residual = Statevector::from_amplitudes(branches[pick].iter().map(|a| a / norm).collect())?;
    Ok((pick, p, residual))
}

fn bell_kets() -> Vec<Vec<Complex64>> {
    BellLabel::ALL
        .iter()
        .map(|&l| bell_state(l).amplitudes().to_vec())
        .collect()
}

/// Born probabilities of the four Bell outcomes on `(i, j)`, indexed like
/// [`BellLabel::ALL`].
pub fn bell_probabilities(state: &Statevector, i: usize, j: usize) -> Result<[f64; 4], QsimError> {
    let mut out = [0.0; 4];
    for (o, k) in out.iter_mut().zip(bell_kets()) {
        *o = state
            .contract(&[i, j], &k)?
            .iter()
            .map(|a| a.norm_sqr())
            .sum();
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BellMeasurement {
    pub label: BellLabel,
    pub probability: f64,
    /// Post-measurement state; qubits `(i, j)` are left in `|ψ_label⟩`.
    pub state: Statevector,
}

/// Bell-basis measurement on `(i, j)`, `i` taken as the first particle.
pub fn measure_bell<R: Rng>(
    state: &Statevector,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<BellMeasurement, QsimError> {
    measure_bell_with(state, i, j, &mut RngSampler(rng))
}

pub fn measure_bell_with(
    state: &Statevector,
    i: usize,
    j: usize,
    sampler: &mut dyn BranchSampler,
) -> Result<BellMeasurement, QsimError> {
    let kets = bell_kets();
    let (pick, p, residual) = collapse(state, &[i, j], &kets, sampler)?;
    let label = BellLabel::from_index(pick);
    let state = residual.embed(&[i, j], &kets[pick])?;
    Ok(BellMeasurement {
        label,
        probability: p,
        state,
    })
}

/// Bell measurement that removes the two measured qubits from the state.
pub fn bell_collapse(
    state: &Statevector,
    i: usize,
    j: usize,
    sampler: &mut dyn BranchSampler,
) -> Result<(BellLabel, f64, Statevector), QsimError> {
    let (pick, p, residual) = collapse(state, &[i, j], &bell_kets(), sampler)?;
    Ok((BellLabel::from_index(pick), p, residual))
}

/// Measurement of qubit `i` in `{(|0⟩ ± e^{i·sign·θ}|1⟩)/√2}`; bit 0 is the
/// `+` element. The collapsed qubit stays in the returned state.
pub fn measure_rotated<R: Rng>(
    state: &Statevector,
    i: usize,
    theta: Angle,
    sign: BasisSign,
    rng: &mut R,
) -> Result<(MeasOutcome, Statevector), QsimError> {
    measure_rotated_with(state, i, theta, sign, &mut RngSampler(rng))
}

pub fn measure_rotated_with(
    state: &Statevector,
    i: usize,
    theta: Angle,
    sign: BasisSign,
    sampler: &mut dyn BranchSampler,
) -> Result<(MeasOutcome, Statevector), QsimError> {
    let (outcome, residual) = rotated_collapse(state, i, theta, sign, sampler)?;
    let ket = rotated_ket(theta, sign, outcome.bit);
    let state = residual.embed(&[i], &ket)?;
    Ok((outcome, state))
}

/// Rotated measurement that removes qubit `i` from the state.
pub fn rotated_collapse(
    state: &Statevector,
    i: usize,
    theta: Angle,
    sign: BasisSign,
    sampler: &mut dyn BranchSampler,
) -> Result<(MeasOutcome, Statevector), QsimError> {
    state.check_qubit(i)?;
    let kets = [
        rotated_ket(theta, sign, 0).to_vec(),
        rotated_ket(theta, sign, 1).to_vec(),
    ];
    let (bit, probability, residual) = collapse(state, &[i], &kets, sampler)?;
    Ok((
        MeasOutcome {
            bit: bit as u8,
            probability,
        },
        residual,
    ))
}

/// Computational-basis measurement that removes qubit `i`.
pub fn z_collapse(
    state: &Statevector,
    i: usize,
    sampler: &mut dyn BranchSampler,
) -> Result<(MeasOutcome, Statevector), QsimError> {
    state.check_qubit(i)?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let kets = [vec![one, zero], vec![zero, one]];
    let (bit, probability, residual) = collapse(state, &[i], &kets, sampler)?;
    Ok((
        MeasOutcome {
            bit: bit as u8,
            probability,
        },
        residual,
    ))
}

/// True iff some unit complex `c` gives `‖a − c·b‖ ≤ tol`.
pub fn equal_up_to_phase(a: &Statevector, b: &Statevector, tol: f64) -> Result<bool, QsimError> {
    if a.num_qubits() != b.num_qubits() {
        return Err(QsimError::DimensionMismatch(a.num_qubits(), b.num_qubits()));
    }
    let overlap: Complex64 = b
        .amplitudes()
        .iter()
        .zip(a.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum();
    let c = if overlap.norm() > f64::EPSILON {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let dist = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - c * y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(dist <= tol)
}
