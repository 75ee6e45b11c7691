//! Parties, channels and the protocols they run.
//!
//! A run is a sequence of sends and receives between the client (`Alice`),
//! one to three servers and, for the Bell-pair based protocols, a trusted
//! `Center`. All particles live in one [`World`] that tracks who holds each
//! of them; every message goes through a [`Network`] that enforces the
//! protocol's channel policy and logs a [`Transcript`].
//!
//! Positions and indices on the wire are 0-based. A Bell label `(z, x)`
//! always describes a pair with the first-named particle first.

mod center;
mod client;
mod config;
mod message;
mod network;
mod protocols;
mod server;
mod shots;
mod world;

pub use center::{make_decoys, verify_decoys, Decoys};
pub use client::{
    alice_forward, angle_counts, choose_pairs, interleave, pad_angles, plan_tilde_sequence,
    sample_ordered, shuffle, Forwarded, Padding, PairingRecord,
};
pub use config::{
    AdversaryConfig, ForwardOrder, PaddingStrategy, RunConfig, SignConventions, Strategy, Variant,
};
pub use message::{Message, Record, Transcript};
pub use network::{ChannelPolicy, Network};
pub use protocols::{
    decoy_trial, exact_output_distribution, exact_with_retries, run_bfk, run_double_server,
    run_protocol, run_single_server, run_single_server_classical, run_triple_server,
    run_with_retries, DecoyTrial, ExactRun, MAX_ATTEMPTS,
};
pub use server::Server;
pub use shots::{sample_shots, ShotSummary};
pub use world::{Location, QubitId, World, WorldEvent};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::mbqc::MbqcError;
use crate::qsim::{BasisSign, QsimError};
use crate::sampling::SampleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyId {
    Alice,
    Bob,
    Bob1,
    Bob2,
    Bob3,
    Center,
}

impl PartyId {
    pub fn is_server(self) -> bool {
        matches!(
            self,
            PartyId::Bob | PartyId::Bob1 | PartyId::Bob2 | PartyId::Bob3
        )
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Faults: the simulation itself went wrong or was misconfigured.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{actor} does not hold qubit {}", qubit.0)]
    NotHeld { qubit: QubitId, actor: PartyId },
    #[error("qubit {} was already measured or discarded", .0.0)]
    QubitGone(QubitId),
    #[error("unknown qubit {}", .0.0)]
    UnknownQubit(QubitId),
    #[error("qubit {} is not in transit", .0.0)]
    NotInTransit(QubitId),
    #[error("qubit {} used twice in one operation", .0.0)]
    RepeatedQubit(QubitId),
    #[error("no pending message from {from} to {to}")]
    NoMessage { from: PartyId, to: PartyId },
    #[error("expected a {expected} message, got {got}")]
    UnexpectedMessage {
        expected: &'static str,
        got: &'static str,
    },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("position {0} is out of range")]
    BadPosition(usize),
    #[error("need {needed} survivors per half, have {first} and {second}")]
    InsufficientSurvivors {
        needed: usize,
        first: usize,
        second: usize,
    },
    #[error("{role} measurements with sign {sign:?} fail the identity check")]
    SignConvention { role: &'static str, sign: BasisSign },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Mbqc(#[from] MbqcError),
}

impl From<SampleError> for ProtocolError {
    fn from(e: SampleError) -> Self {
        ProtocolError::Qsim(e.into())
    }
}

/// Why a run stopped early. Aborts are legitimate protocol outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    /// A party tried to use a channel the protocol forbids.
    Policy { from: PartyId, to: PartyId },
    /// Decoy check failed.
    Cheating { mismatches: usize },
    /// Too few particles survived forwarding.
    Retry {
        needed: usize,
        first: usize,
        second: usize,
    },
}

impl AbortReason {
    pub fn name(&self) -> &'static str {
        match self {
            AbortReason::Policy { .. } => "policy",
            AbortReason::Cheating { .. } => "cheating",
            AbortReason::Retry { .. } => "retry",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::Policy { from, to } => write!(f, "policy: {from} may not send to {to}"),
            AbortReason::Cheating { mismatches } => {
                write!(f, "cheating: {mismatches} decoy label(s) wrong")
            }
            AbortReason::Retry {
                needed,
                first,
                second,
            } => {
                write!(
                    f,
                    "retry: {first} and {second} survivors, need {needed} per half"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyVerdict {
    Pass,
    Cheating { mismatches: usize },
}

/// Either an abort or a fault; internal control flow of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    Abort(AbortReason),
    Fault(ProtocolError),
}

impl From<ProtocolError> for Halt {
    fn from(e: ProtocolError) -> Self {
        Halt::Fault(e)
    }
}

impl From<QsimError> for Halt {
    fn from(e: QsimError) -> Self {
        Halt::Fault(e.into())
    }
}

impl From<MbqcError> for Halt {
    fn from(e: MbqcError) -> Self {
        Halt::Fault(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Completed { output: Vec<u8> },
    Aborted { reason: AbortReason },
}

impl RunOutcome {
    pub fn output(&self) -> Option<&[u8]> {
        match self {
            RunOutcome::Completed { output } => Some(output),
            RunOutcome::Aborted { .. } => None,
        }
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        match self {
            RunOutcome::Aborted { reason } => Some(reason),
            RunOutcome::Completed { .. } => None,
        }
    }
}

/// Comparisons between the client's bookkeeping and the simulator's true
/// state, gathered when [`RunConfig::inspect`] is set. `None` means the
/// check does not apply to the protocol or the run stopped before it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inspection {
    /// Reported Bell labels equal the labels actually projected onto.
    pub frames_match: Option<bool>,
    /// Each selected pair is in the Bell state the client believes.
    pub pair_states_match: Option<bool>,
    /// Each computation qubit is `|+_{θ_eff}⟩` for the client's `θ_eff`.
    pub resource_states_match: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub variant: Variant,
    pub outcome: RunOutcome,
    pub transcript: Transcript,
    pub inspection: Option<Inspection>,
    /// Attempts made, counting the final one.
    pub attempts: usize,
}

impl ProtocolResult {
    pub fn output_bits(&self) -> Option<&[u8]> {
        self.outcome.output()
    }

    pub fn aborted(&self) -> Option<&AbortReason> {
        self.outcome.abort_reason()
    }

    /// Classical messages the servers received or sent.
    pub fn bob_view(&self) -> Vec<Record> {
        self.transcript.bob_view()
    }
}
