use serde::{Deserialize, Serialize};

use super::{PartyId, ProtocolError};
use crate::qsim::{Angle, BasisSign};

/// Which protocol a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Client prepares rotated qubits and runs the blind pattern with one server.
    Bfk,
    /// Two non-communicating servers sharing Bell pairs.
    Double,
    /// Three servers joined by entanglement swapping.
    Triple,
    /// One server; the client only forwards particles from the trusted center.
    Single,
}

impl Variant {
    pub fn parties(self) -> &'static [PartyId] {
        use PartyId::*;
        match self {
            Variant::Bfk => &[Alice, Bob],
            Variant::Double => &[Alice, Bob1, Bob2, Center],
            Variant::Triple => &[Alice, Bob1, Bob2, Bob3, Center],
            Variant::Single => &[Alice, Bob, Center],
        }
    }

    pub fn servers(self) -> impl Iterator<Item = PartyId> {
        self.parties().iter().copied().filter(|p| p.is_server())
    }

    /// Server an adversary strategy applies to when no role is given.
    pub fn default_adversary_role(self) -> PartyId {
        match self {
            Variant::Bfk | Variant::Single => PartyId::Bob,
            Variant::Double | Variant::Triple => PartyId::Bob1,
        }
    }
}

/// Behaviour of a (possibly dishonest) server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Honest,
    /// Skips every Bell measurement and reports uniformly random labels.
    GuessBell,
    /// Reports the negation of every equatorial measurement outcome.
    FlipBits,
    /// Measures every equatorial basis rotated by `offset`.
    WrongBasis { offset: Angle },
    /// Forwards every classical message it receives to another server.
    Collude,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim().replace('-', "_");
        match s.split_once(':') {
            Some(("wrong_basis", k)) => {
                let k: i64 = k
                    .parse()
                    .map_err(|_| format!("bad wrong_basis offset {k:?}"))?;
                Ok(Strategy::WrongBasis {
                    offset: Angle::new(k),
                })
            }
            None if s == "honest" => Ok(Strategy::Honest),
            None if s == "guess_bell" => Ok(Strategy::GuessBell),
            None if s == "flip_bits" => Ok(Strategy::FlipBits),
            None if s == "wrong_basis" => Ok(Strategy::WrongBasis {
                offset: Angle::new(1),
            }),
            None if s == "collude" => Ok(Strategy::Collude),
            _ => Err(format!("unknown adversary strategy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AdversaryConfig {
    #[serde(default)]
    pub strategy: Strategy,
    /// Server running the strategy; defaults per variant.
    #[serde(default)]
    pub role: Option<PartyId>,
}

/// How padding angles are chosen for positions that carry no real qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingStrategy {
    /// Makes the per-angle counts of the whole sequence as equal as possible.
    #[default]
    Equalizing,
    /// Every padding position announces angle 0.
    ConstantZero,
}

/// Order in which forwarded particles reach the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardOrder {
    /// Survivors keep their original relative order.
    #[default]
    Arrival,
    /// Survivors are permuted uniformly before forwarding.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignConventions {
    /// Sign used by the server's blind pattern measurements.
    pub bfk: BasisSign,
    /// Sign used when a Bell-pair half is measured to remotely prepare its
    /// partner (`θ̃_k` measurements and the double-server preparation).
    pub frame: BasisSign,
}

impl Default for SignConventions {
    fn default() -> Self {
        Self {
            bfk: BasisSign::Plus,
            frame: BasisSign::Minus,
        }
    }
}

fn default_delta() -> f64 {
    2.0
}

fn default_p_forward() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// Parameters of one protocol run, as read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    /// Number of computation qubits; must equal the computation's vertex
    /// count when given.
    #[serde(default)]
    pub m: Option<usize>,
    /// Slack factor: each half of the particle stream has `ceil((2+δ)m)`
    /// particles.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_p_forward")]
    pub p_forward: f64,
    /// Decoy pairs generated by the center.
    #[serde(default)]
    pub h: usize,
    /// Decoy pairs the client asks to have checked.
    #[serde(default)]
    pub l: usize,
    /// Center forwards the particles and only informs the client.
    #[serde(default)]
    pub classical_client: bool,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub signs: SignConventions,
    #[serde(default)]
    pub padding: PaddingStrategy,
    #[serde(default)]
    pub forward_order: ForwardOrder,
    /// Test hook: when false, every θ, r and padding angle is zero.
    #[serde(default = "default_true")]
    pub blinding: bool,
    /// Test hook: compare the client's bookkeeping with the simulator's
    /// actual state while the run progresses.
    #[serde(default, skip_serializing)]
    pub inspect: bool,
}

impl RunConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            m: None,
            delta: default_delta(),
            p_forward: default_p_forward(),
            h: 0,
            l: 0,
            classical_client: false,
            adversary: AdversaryConfig::default(),
            seed: 0,
            signs: SignConventions::default(),
            padding: PaddingStrategy::default(),
            forward_order: ForwardOrder::default(),
            blinding: true,
            inspect: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ProtocolError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Particles per half of the stream for `m` computation qubits.
    pub fn n_for(&self, m: usize) -> usize {
        ((2.0 + self.delta) * m as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn adversary_role(&self) -> PartyId {
        self.adversary
            .role
            .unwrap_or(self.variant.default_adversary_role())
    }

    pub fn strategy_of(&self, server: PartyId) -> Strategy {
        if self.adversary_role() == server {
            self.adversary.strategy
        } else {
            Strategy::Honest
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::Config(msg));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.p_forward > 0.0 && self.p_forward <= 1.0) {
            return bad(format!(
                "p_forward must lie in (0, 1], got {}",
                self.p_forward
            ));
        }
        if self.h > 0 && self.l >= self.h {
            return bad(format!(
                "checked decoys l={} must be fewer than generated h={}",
                self.l, self.h
            ));
        }
        if self.h == 0 && self.l > 0 {
            return bad("cannot check decoys when none are generated".into());
        }
        if (self.h > 0 || self.classical_client) && self.variant != Variant::Single {
            return bad(
                "decoys and the classical-client mode apply to the single-server protocol only"
                    .into(),
            );
        }
        if let Some(role) = self.adversary.role {
            if !self.variant.servers().any(|s| s == role) {
                return bad(format!(
                    "{role:?} is not a server of the {:?} protocol",
                    self.variant
                ));
            }
        }
        Ok(())
    }
}
