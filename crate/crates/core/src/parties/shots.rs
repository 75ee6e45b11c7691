use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use super::protocols::{run_with_retries, MAX_ATTEMPTS};
use super::{ProtocolError, ProtocolResult, RunConfig, RunOutcome};
use crate::mbqc::Computation;
use crate::seed::SeedTree;
use crate::stats::{bits_to_string, frequencies, Distribution};

/// Aggregate of many independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSummary {
    pub shots: u64,
    /// Output bitstring counts over completed shots.
    pub counts: BTreeMap<String, u64>,
    /// Aborted shots by abort name.
    pub aborts: BTreeMap<String, u64>,
    /// Attempts made over all shots, retries included.
    pub attempts: u64,
    /// Full result of shot 0.
    pub first: ProtocolResult,
    /// Lowest-numbered aborted shot, if any.
    pub first_abort: Option<(u64, ProtocolResult)>,
}

impl ShotSummary {
    pub fn completed(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn frequencies(&self) -> Distribution {
        frequencies(&self.counts)
    }
}

struct Partial {
    counts: BTreeMap<String, u64>,
    aborts: BTreeMap<String, u64>,
    attempts: u64,
    results: Vec<(u64, ProtocolResult)>,
}

fn run_range(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
    shots: impl Iterator<Item = u64>,
) -> Result<Partial, ProtocolError> {
    let mut p = Partial {
        counts: BTreeMap::new(),
        aborts: BTreeMap::new(),
        attempts: 0,
        results: Vec::new(),
    };
    let mut kept_abort = false;
    for i in shots {
        let r = run_with_retries(cfg, comp, seeds.index(i), MAX_ATTEMPTS)?;
        p.attempts += r.attempts as u64;
        match &r.outcome {
            RunOutcome::Completed { output } => {
                *p.counts.entry(bits_to_string(output)).or_insert(0) += 1
            }
            RunOutcome::Aborted { reason } => {
                *p.aborts.entry(reason.name().to_string()).or_insert(0) += 1;
                if !kept_abort {
                    kept_abort = true;
                    p.results.push((i, r));
                    continue;
                }
            }
        }
        if i == 0 {
            p.results.push((i, r));
        }
    }
    Ok(p)
}

/// Runs `shots` independent protocol executions, shot `i` seeded from
/// `seeds.child("shot").index(i)`, spread over the available cores. The
/// summary does not depend on the number of threads.
pub fn sample_shots(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
    shots: u64,
) -> Result<ShotSummary, ProtocolError> {
    if shots == 0 {
        return Err(ProtocolError::Config("shots must be at least 1".into()));
    }
    let threads = std::thread::available_parallelism()
        .map_or(1, NonZeroUsize::get)
        .min(shots as usize) as u64;
    let base = seeds.child("shot");
    let parts: Vec<Result<Partial, ProtocolError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope
                    .spawn(move || run_range(cfg, comp, base, (t..shots).step_by(threads as usize)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut counts = BTreeMap::new();
    let mut aborts = BTreeMap::new();
    let mut attempts = 0;
    let mut results = Vec::new();
    for part in parts {
        let part = part?;
        for (k, v) in part.counts {
            *counts.entry(k).or_insert(0) += v;
        }
        for (k, v) in part.aborts {
            *aborts.entry(k).or_insert(0) += v;
        }
        attempts += part.attempts;
        results.extend(part.results);
    }
    results.sort_by_key(|(i, _)| *i);
    let first = results
        .iter()
        .find(|(i, _)| *i == 0)
        .map(|(_, r)| r.clone())
        .expect("shot 0 is kept");
    let first_abort = results.into_iter().find(|(_, r)| r.aborted().is_some());
    Ok(ShotSummary {
        shots,
        counts,
        aborts,
        attempts,
        first,
        first_abort,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parties::{Strategy, Variant};
    use crate::qsim::Angle;

    #[test]
    fn summary_counts_every_shot() {
        let comp = Computation::linear(&[Angle::new(1)]).unwrap();
        let mut cfg = RunConfig::new(Variant::Single);
        cfg.h = 2;
        cfg.l = 1;
        cfg.adversary.strategy = Strategy::GuessBell;
        let s = sample_shots(&cfg, &comp, SeedTree::new(1), 64).unwrap();
        assert_eq!(s.completed() + s.aborts.values().sum::<u64>(), 64);
        assert!(s.aborts["cheating"] > 30);
        let (i, r) = s.first_abort.as_ref().unwrap();
        assert!(r.aborted().is_some());
        assert_eq!(
            *i,
            (0..64)
                .find(|&i| {
                    run_with_retries(
                        &cfg,
                        &comp,
                        SeedTree::new(1).child("shot").index(i),
                        MAX_ATTEMPTS,
                    )
                    .unwrap()
                    .aborted()
                    .is_some()
                })
                .unwrap()
        );
        let again = sample_shots(&cfg, &comp, SeedTree::new(1), 64).unwrap();
        assert_eq!(s, again);
    }
}
