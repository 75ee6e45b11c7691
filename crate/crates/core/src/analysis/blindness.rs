use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

use super::AnalysisError;
use crate::enumerate::{for_each_path, EnumerateError, ExhaustiveTape};
use crate::parties::{plan_tilde_sequence, PaddingStrategy, ProtocolError};
use crate::qsim::{bell_probabilities, bell_state, Angle, BellLabel};
use crate::sampling::BranchSampler;

/// Largest number of enumeration paths per secret value.
pub const VIEW_BUDGET: usize = 10_000_000;

/// A single-server instance with one computation qubit, every particle
/// forwarded, and `n` first-half positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindnessParams {
    pub n: usize,
    /// `None` disables padding, which only makes sense for `n = 1`.
    pub padding: Option<PaddingStrategy>,
    /// Replaces the swap outcome with a fixed frame.
    pub forced_frame: Option<BellLabel>,
}

impl BlindnessParams {
    pub fn equalizing(n: usize) -> Self {
        Self {
            n,
            padding: Some(PaddingStrategy::Equalizing),
            forced_frame: None,
        }
    }
}

/// For each secret angle, the exact distribution of the server's view:
/// the announced angle sequence together with the Bell label it reported.
/// Views are packed, three bits per angle followed by the label index.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTable {
    pub rows: BTreeMap<Angle, HashMap<u64, f64>>,
    /// Enumeration paths summed over all rows.
    pub paths: usize,
}

impl ViewTable {
    pub fn row_sums(&self) -> BTreeMap<Angle, f64> {
        self.rows
            .iter()
            .map(|(a, r)| (*a, r.values().sum()))
            .collect()
    }

    /// Largest total-variation distance between two rows.
    pub fn leak_score(&self) -> f64 {
        let rows: Vec<&HashMap<u64, f64>> = self.rows.values().collect();
        let mut worst = 0.0f64;
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                worst = worst.max(tv(a, b));
            }
        }
        worst
    }
}

fn tv(a: &HashMap<u64, f64>, b: &HashMap<u64, f64>) -> f64 {
    let mut sum: f64 = a
        .iter()
        .map(|(k, p)| (p - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    sum += b
        .iter()
        .filter(|(k, _)| !a.contains_key(k))
        .map(|(_, p)| p.abs())
        .sum::<f64>();
    0.5 * sum
}

fn pack(seq: &[Angle], label: BellLabel) -> u64 {
    let body = seq
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, a)| acc | (a.k() as u64) << (3 * i));
    body | (label.index() as u64) << (3 * seq.len())
}

/// Enumerates every choice the client makes (which first-half position
/// carries the real qubit and the padding layout) and every swap outcome,
/// for each of the eight secret angles.
pub fn blindness_enumeration(params: BlindnessParams) -> Result<ViewTable, AnalysisError> {
    let n = params.n;
    if n == 0 || 3 * n + 2 > 64 {
        return Err(AnalysisError::Invalid(format!("n = {n} is outside 1..=20")));
    }
    if params.padding.is_none() && n != 1 {
        return Err(AnalysisError::Invalid(
            "padding can only be disabled when n = 1".into(),
        ));
    }
    // label distribution of the swap on two fresh pairs, from the simulator
    let pairs = bell_state(BellLabel::PHI_PLUS).tensor(&bell_state(BellLabel::PHI_PLUS));
    let swap = bell_probabilities(&pairs, 1, 3).map_err(ProtocolError::from)?;

    let mut rows = BTreeMap::new();
    let mut paths = 0;
    for theta in Angle::all() {
        let mut row: HashMap<u64, f64> = HashMap::new();
        paths += for_each_path::<_, ProtocolError>(
            VIEW_BUDGET,
            |tape: &mut ExhaustiveTape| {
                let label = match params.forced_frame {
                    Some(f) => f,
                    None => BellLabel::from_index(tape.select(&swap)?),
                };
                let s = tape.uniform(n);
                let real = BTreeMap::from([(s, theta.tilde(label))]);
                let seq = match params.padding {
                    Some(p) => plan_tilde_sequence(&real, n, p, tape)?,
                    None => vec![real[&s]],
                };
                Ok(pack(&seq, label))
            },
            |w, key| *row.entry(key).or_insert(0.0) += w,
        )
        .map_err(|e| match e {
            EnumerateError::BudgetExceeded { budget } => AnalysisError::TooLarge { budget },
            EnumerateError::Body(e) => e.into(),
        })?;
        rows.insert(theta, row);
    }
    Ok(ViewTable { rows, paths })
}

/// Padding choices whose leakage is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakCase {
    /// Equalizing padding at `n = 8`.
    Equalizing,
    /// Every padding angle is zero, `n = 8`.
    ConstantZero,
    /// Equalizing padding with fewer than eight positions.
    ShortN(usize),
    /// One position, no padding and frame `(0,0)`: the angle is sent in
    /// the clear.
    Unblinded,
}

impl LeakCase {
    pub fn params(self) -> BlindnessParams {
        match self {
            LeakCase::Equalizing => BlindnessParams::equalizing(8),
            LeakCase::ConstantZero => BlindnessParams {
                n: 8,
                padding: Some(PaddingStrategy::ConstantZero),
                forced_frame: None,
            },
            LeakCase::ShortN(n) => BlindnessParams::equalizing(n),
            LeakCase::Unblinded => BlindnessParams {
                n: 1,
                padding: None,
                forced_frame: Some(BellLabel::PHI_PLUS),
            },
        }
    }
}

/// Leak score (largest pairwise row distance) of a padding choice.
pub fn leak_demo(case: LeakCase) -> Result<f64, AnalysisError> {
    Ok(blindness_enumeration(case.params())?.leak_score())
}
