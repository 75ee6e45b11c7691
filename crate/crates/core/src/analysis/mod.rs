//! Checks of the security claims: homogeneity of the announced angles,
//! blindness by exact enumeration of the server's view, decoy detection
//! rates and the probability that forwarding leaves enough particles.
//!
//! Every estimate is packaged as a [`Report`].

mod blindness;

pub use blindness::{
    blindness_enumeration, leak_demo, BlindnessParams, LeakCase, ViewTable, VIEW_BUDGET,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parties::{
    alice_forward, decoy_trial, pad_angles, PaddingStrategy, ProtocolError, Strategy,
};
use crate::qsim::{Angle, BellLabel};
use crate::sampling::RngSampler;
use crate::seed::SeedTree;
use crate::stats::binomial_stderr;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("instance needs more than {budget} enumeration paths")]
    TooLarge { budget: usize },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// One checked claim, in the common report format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub claim: String,
    pub expected: Option<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-angle counts of a sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub counts: [u64; 8],
}

impl AngleHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest minus smallest count.
    pub fn spread(&self) -> u64 {
        self.counts.iter().max().unwrap() - self.counts.iter().min().unwrap()
    }
}

pub fn histogram_angles(seq: &[Angle]) -> AngleHistogram {
    let mut h = AngleHistogram::default();
    for a in seq {
        h.counts[a.k() as usize] += 1;
    }
    h
}

/// Total-variation distance between the empirical angle distribution and
/// the uniform one.
pub fn uniformity_tv(h: &AngleHistogram) -> Result<f64, AnalysisError> {
    let total = h.total();
    if total == 0 {
        return Err(AnalysisError::EmptyHistogram);
    }
    Ok(0.5
        * h.counts
            .iter()
            .map(|&c| (c as f64 / total as f64 - 0.125).abs())
            .sum::<f64>())
}

/// Pads `instances` random placements of `m` real angles into `n`
/// positions and counts how often the spread exceeds one.
pub fn padding_homogeneity(
    n: usize,
    m: usize,
    instances: u64,
    seeds: SeedTree,
) -> Result<Report, AnalysisError> {
    if m > n {
        return Err(AnalysisError::Invalid(format!("m = {m} exceeds n = {n}")));
    }
    let mut rng = RngSampler(seeds.child("padding").rng());
    let positions: Vec<usize> = (0..n).collect();
    let mut bad = 0u64;
    for _ in 0..instances {
        let chosen = crate::parties::sample_ordered(&positions, m, &mut rng);
        let real: BTreeMap<usize, (Angle, BellLabel)> = chosen
            .into_iter()
            .map(|k| {
                let theta = Angle::new(crate::sampling::BranchSampler::uniform(&mut rng, 8) as i64);
                let frame =
                    BellLabel::from_index(crate::sampling::BranchSampler::uniform(&mut rng, 4));
                (k, (theta, frame))
            })
            .collect();
        let p = pad_angles(&real, n, PaddingStrategy::Equalizing, true, &mut rng)?;
        if histogram_angles(&p.tilde).spread() > 1 {
            bad += 1;
        }
    }
    Ok(Report {
        claim: format!("padded angle counts differ by at most one (n={n}, m={m})"),
        expected: Some(0.0),
        estimate: bad as f64 / instances.max(1) as f64,
        stderr: 0.0,
        trials: instances,
        pass: bad == 0,
    })
}

/// Outcome counts of repeated decoy checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub l: usize,
    pub h: usize,
    pub trials: u64,
    /// Trials in which at least one checked decoy was wrong.
    pub caught: u64,
    /// Trials in which a cheating server passed every check.
    pub accepted_incorrect: u64,
    /// Checked decoys, over all trials.
    pub checked: u64,
    /// Wrong decoy labels, over all trials.
    pub mismatches: u64,
}

impl DetectionReport {
    pub fn per_decoy_catch_rate(&self) -> f64 {
        self.mismatches as f64 / self.checked.max(1) as f64
    }

    pub fn accept_rate(&self) -> f64 {
        self.accepted_incorrect as f64 / self.trials.max(1) as f64
    }
}

/// Runs the decoy phase `trials` times against `strategy`.
pub fn detection_rate(
    l: usize,
    h: usize,
    trials: u64,
    strategy: Strategy,
    seeds: SeedTree,
) -> Result<DetectionReport, AnalysisError> {
    if l > h || trials == 0 {
        return Err(AnalysisError::Invalid(format!(
            "need l ≤ h and trials ≥ 1, got l={l}, h={h}, trials={trials}"
        )));
    }
    let cheating = strategy != Strategy::Honest;
    let mut rep = DetectionReport {
        l,
        h,
        trials,
        caught: 0,
        accepted_incorrect: 0,
        checked: 0,
        mismatches: 0,
    };
    let base = seeds.child("detect");
    for t in 0..trials {
        let trial = decoy_trial(h, l, strategy, base.index(t))?;
        rep.checked += trial.checked as u64;
        rep.mismatches += trial.mismatches as u64;
        if trial.caught() {
            rep.caught += 1;
        } else if cheating {
            rep.accepted_incorrect += 1;
        }
    }
    Ok(rep)
}

/// Per-decoy catch rate of a Bell-guessing server against 3/4, within 0.01.
pub fn catch_rate_report(rep: &DetectionReport) -> Report {
    let est = rep.per_decoy_catch_rate();
    Report {
        claim: "a guessed decoy label is wrong with probability 3/4".into(),
        expected: Some(0.75),
        estimate: est,
        stderr: binomial_stderr(est, rep.checked),
        trials: rep.trials,
        pass: (est - 0.75).abs() <= 0.01,
    }
}

/// Acceptance rate of a Bell-guessing server against `4^{-l}`, within three
/// binomial standard errors.
pub fn acceptance_report(rep: &DetectionReport) -> Report {
    let expected = 4f64.powi(-(rep.l as i32));
    let sigma = binomial_stderr(expected, rep.trials);
    let est = rep.accept_rate();
    Report {
        claim: format!(
            "a Bell-guessing server passes {} decoy checks with probability 4^-{}",
            rep.l, rep.l
        ),
        expected: Some(expected),
        estimate: est,
        stderr: binomial_stderr(est, rep.trials),
        trials: rep.trials,
        pass: (est - expected).abs() <= 3.0 * sigma,
    }
}

/// `P(Binomial(n, p) ≥ k)`.
pub fn binomial_tail(n: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    // sum the lower tail in log space to stay accurate for large n
    let ln_choose =
        |i: usize| -> f64 { (1..=i).map(|j| ((n - i + j) as f64 / j as f64).ln()).sum() };
    let lower: f64 = (0..k.min(n + 1))
        .map(|i| {
            let lp = if p == 0.0 {
                if i == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else if p == 1.0 {
                if i == n {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                ln_choose(i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()
            };
            lp.exp()
        })
        .sum();
    (1.0 - lower).clamp(0.0, 1.0)
}

/// Exact probability that both halves of `n` particles keep at least `m`.
pub fn forwarding_success_exact(m: usize, n: usize, p_forward: f64) -> f64 {
    binomial_tail(n, p_forward, m).powi(2)
}

/// Fraction of `trials` forwarding rounds leaving at least `m` survivors in
/// each half of `2n` particles, `n = ceil((2+δ)m)`.
pub fn forwarding_stats(
    m: usize,
    delta: f64,
    p_forward: f64,
    trials: u64,
    seeds: SeedTree,
) -> Result<Report, AnalysisError> {
    if trials == 0 || !(0.0..=1.0).contains(&p_forward) || delta <= 0.0 {
        return Err(AnalysisError::Invalid(format!(
            "need trials ≥ 1, p_forward in [0, 1] and delta > 0, got {trials}, {p_forward}, {delta}"
        )));
    }
    let n = ((2.0 + delta) * m as f64 - 1e-9).ceil() as usize;
    let items: Vec<usize> = (0..2 * n).collect();
    let mut rng = RngSampler(seeds.child("forward").rng());
    let mut ok = 0u64;
    for _ in 0..trials {
        let f = alice_forward(&items, p_forward, &mut rng);
        let first = f.origin.iter().filter(|&&i| i < n).count();
        if first >= m && f.origin.len() - first >= m {
            ok += 1;
        }
    }
    let expected = forwarding_success_exact(m, n, p_forward);
    let est = ok as f64 / trials as f64;
    let sigma = binomial_stderr(expected, trials);
    Ok(Report {
        claim: format!(
            "forwarding leaves at least {m} particles in each half of {} (p={p_forward})",
            2 * n
        ),
        expected: Some(expected),
        estimate: est,
        stderr: binomial_stderr(est, trials),
        trials,
        pass: (est - expected).abs() <= 3.0 * sigma + 1e-12,
    })
}
