use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{PaddingStrategy, ProtocolError};
use crate::qsim::{Angle, BellLabel};
use crate::sampling::BranchSampler;

/// Survivors of the client's forwarding step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forwarded<T> {
    /// Forwarded items in arrival order.
    pub items: Vec<T>,
    /// Original index of each forwarded item.
    pub origin: Vec<usize>,
    /// Original indices of dropped items.
    pub dropped: Vec<usize>,
}

/// Independently keeps each item with probability `p_forward`.
pub fn alice_forward<T: Clone>(
    handles: &[T],
    p_forward: f64,
    rng: &mut dyn BranchSampler,
) -> Forwarded<T> {
    let mut out = Forwarded {
        items: Vec::new(),
        origin: Vec::new(),
        dropped: Vec::new(),
    };
    let weights = [1.0 - p_forward, p_forward];
    for (i, h) in handles.iter().enumerate() {
        let keep = match p_forward {
            p if p >= 1.0 => true,
            p if p <= 0.0 => false,
            _ => rng.select(&weights).expect("both weights positive") == 1,
        };
        if keep {
            out.items.push(h.clone());
            out.origin.push(i);
        } else {
            out.dropped.push(i);
        }
    }
    out
}

/// Uniform in-place permutation.
pub fn shuffle<T>(items: &mut [T], rng: &mut dyn BranchSampler) {
    for i in (1..items.len()).rev() {
        let j = rng.uniform(i + 1);
        items.swap(i, j);
    }
}

/// Uniformly random ordered selection of `k` items.
pub fn sample_ordered<T: Clone>(items: &[T], k: usize, rng: &mut dyn BranchSampler) -> Vec<T> {
    let mut pool = items.to_vec();
    for i in 0..k.min(pool.len()) {
        let j = i + rng.uniform(pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Places `extra` items at uniformly random positions among `base`, whose
/// relative order is kept. Returns the merged sequence and the position of
/// each extra item.
pub fn interleave<T: Clone>(
    base: &[T],
    extra: &[T],
    rng: &mut dyn BranchSampler,
) -> (Vec<T>, Vec<usize>) {
    let total = base.len() + extra.len();
    let slots: Vec<usize> = (0..total).collect();
    let chosen = sample_ordered(&slots, extra.len(), rng);
    let mut merged: Vec<Option<T>> = vec![None; total];
    for (e, &pos) in extra.iter().zip(&chosen) {
        merged[pos] = Some(e.clone());
    }
    let mut rest = base.iter();
    let merged = merged
        .into_iter()
        .map(|slot| slot.unwrap_or_else(|| rest.next().expect("enough base items").clone()))
        .collect();
    (merged, chosen)
}

/// Which first-half and second-half particles the client joined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingRecord {
    /// Original indices in `0..n`.
    pub s: Vec<usize>,
    /// Original indices in `n..2n`.
    pub t: Vec<usize>,
    /// Bell label of `(B_s[i], B_t[i])`, filled once reported.
    pub frames: Vec<BellLabel>,
}

/// Uniformly random ordered selection of `m` survivors from each half,
/// paired in order.
pub fn choose_pairs(
    first: &[usize],
    second: &[usize],
    m: usize,
    rng: &mut dyn BranchSampler,
) -> Result<PairingRecord, ProtocolError> {
    if first.len() < m || second.len() < m {
        return Err(ProtocolError::InsufficientSurvivors {
            needed: m,
            first: first.len(),
            second: second.len(),
        });
    }
    let s = sample_ordered(first, m, rng);
    let t = sample_ordered(second, m, rng);
    Ok(PairingRecord {
        s,
        t,
        frames: Vec::new(),
    })
}

/// Angles of every first-half position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Padding {
    /// Public angles `θ̃_k`.
    pub tilde: Vec<Angle>,
    /// Secret angles `θ_k`.
    pub theta: Vec<Angle>,
    /// Frames `(z_k, x_k)`; `θ̃_k = (−1)^{x_k}θ_k + z_k·π`.
    pub frames: Vec<BellLabel>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// The `rank`-th `k`-subset of `items` in lexicographic order.
fn unrank_combination<T: Copy>(items: &[T], k: usize, mut rank: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(k);
    let mut need = k;
    for (i, &it) in items.iter().enumerate() {
        if need == 0 {
            break;
        }
        let with = binomial(items.len() - i - 1, need - 1);
        if rank < with {
            out.push(it);
            need -= 1;
        } else {
            rank -= with;
        }
    }
    out
}

/// Public angles for every position: real ones where given, padding
/// elsewhere.
pub fn plan_tilde_sequence(
    real: &BTreeMap<usize, Angle>,
    n: usize,
    strategy: PaddingStrategy,
    rng: &mut dyn BranchSampler,
) -> Result<Vec<Angle>, ProtocolError> {
    if let Some((&k, _)) = real.iter().next_back().filter(|(&k, _)| k >= n) {
        return Err(ProtocolError::Config(format!(
            "real position {k} outside 0..{n}"
        )));
    }
    let pads = n - real.len();
    let mut pad_angles: Vec<Angle> = match strategy {
        PaddingStrategy::ConstantZero => vec![Angle::ZERO; pads],
        PaddingStrategy::Equalizing => {
            let mut counts = [0usize; 8];
            for a in real.values() {
                counts[a.k() as usize] += 1;
            }
            // raise every count to a common level, spending as many pads as possible
            let cost = |level: usize| {
                counts
                    .iter()
                    .map(|&c| level.saturating_sub(c))
                    .sum::<usize>()
            };
            let mut level = 0;
            while cost(level + 1) <= pads {
                level += 1;
            }
            let rem = pads - cost(level);
            let mut extra: Vec<usize> = (0..8)
                .flat_map(|a| std::iter::repeat_n(a, level.saturating_sub(counts[a])))
                .collect();
            // leftover pads go to a uniformly chosen set of angles at the level
            let candidates: Vec<usize> = (0..8).filter(|&a| counts[a] <= level).collect();
            let rank = rng.uniform(binomial(candidates.len(), rem));
            extra.extend(unrank_combination(&candidates, rem, rank));
            extra.into_iter().map(|a| Angle::new(a as i64)).collect()
        }
    };
    shuffle(&mut pad_angles, rng);
    let mut next = pad_angles.into_iter();
    Ok((0..n)
        .map(|k| {
            real.get(&k)
                .copied()
                .unwrap_or_else(|| next.next().expect("one pad per free position"))
        })
        .collect())
}

/// Full first-half angle assignment. `real` maps a position to its secret
/// angle and frame; padding frames are uniform (or `(0,0)` when
/// `uniform_frames` is false) and padding θ is solved from the frame.
pub fn pad_angles(
    real: &BTreeMap<usize, (Angle, BellLabel)>,
    n: usize,
    strategy: PaddingStrategy,
    uniform_frames: bool,
    rng: &mut dyn BranchSampler,
) -> Result<Padding, ProtocolError> {
    let real_tilde = real
        .iter()
        .map(|(&k, &(theta, frame))| (k, theta.tilde(frame)))
        .collect();
    let tilde = plan_tilde_sequence(&real_tilde, n, strategy, rng)?;
    let mut theta = Vec::with_capacity(n);
    let mut frames = Vec::with_capacity(n);
    for (k, &t) in tilde.iter().enumerate() {
        let (th, fr) = match real.get(&k) {
            Some(&pair) => pair,
            None => {
                let fr = if uniform_frames {
                    BellLabel::from_index(rng.uniform(4))
                } else {
                    BellLabel::PHI_PLUS
                };
                (t.untilde(fr), fr)
            }
        };
        theta.push(th);
        frames.push(fr);
    }
    Ok(Padding {
        tilde,
        theta,
        frames,
    })
}

/// Histogram of angles by `k`.
pub fn angle_counts(angles: &[Angle]) -> [usize; 8] {
    let mut c = [0; 8];
    for a in angles {
        c[a.k() as usize] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::for_each_path;
    use crate::sampling::RngSampler;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> RngSampler<ChaCha8Rng> {
        RngSampler(ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn forward_extremes() {
        let items: Vec<u32> = (0..10).collect();
        let all = alice_forward(&items, 1.0, &mut rng(0));
        assert_eq!(all.items, items);
        assert!(all.dropped.is_empty());
        let none = alice_forward(&items, 0.0, &mut rng(0));
        assert!(none.items.is_empty());
        assert_eq!(none.dropped.len(), 10);
    }

    #[test]
    fn forward_keeps_order() {
        let items: Vec<u32> = (0..200).collect();
        let f = alice_forward(&items, 0.5, &mut rng(4));
        assert!(f.origin.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(f.items.len() + f.dropped.len(), 200);
        assert!(f.items.len() > 60 && f.items.len() < 140);
    }

    #[test]
    fn pairs_fail_without_survivors() {
        assert!(matches!(
            choose_pairs(&[0, 1], &[5], 2, &mut rng(1)),
            Err(ProtocolError::InsufficientSurvivors {
                needed: 2,
                first: 2,
                second: 1
            })
        ));
    }

    #[test]
    fn pairing_is_a_uniform_ordered_selection() {
        // every ordered 2-selection from 3 items gets weight 1/6
        let mut seen = BTreeMap::new();
        for_each_path::<_, ProtocolError>(
            1000,
            |tape| choose_pairs(&[0, 1, 2], &[3, 4], 2, tape),
            |w, r| *seen.entry((r.s, r.t)).or_insert(0.0) += w,
        )
        .unwrap();
        assert_eq!(seen.len(), 12);
        for w in seen.values() {
            assert!((w - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interleave_keeps_base_order() {
        let (merged, pos) = interleave(&[1, 2, 3], &[10, 20], &mut rng(9));
        assert_eq!(merged.len(), 5);
        for (p, e) in pos.iter().zip([10, 20]) {
            assert_eq!(merged[*p], e);
        }
        let base: Vec<_> = merged.iter().filter(|&&x| x < 10).copied().collect();
        assert_eq!(base, vec![1, 2, 3]);
    }

    #[test]
    fn padding_counts_at_divisible_n() {
        // m = 4 real angles, n = 16: every angle appears exactly twice
        let real: BTreeMap<usize, Angle> = [(0, 3), (5, 3), (7, 1), (15, 6)]
            .iter()
            .map(|&(k, a)| (k, Angle::new(a)))
            .collect();
        let seq = plan_tilde_sequence(&real, 16, PaddingStrategy::Equalizing, &mut rng(2)).unwrap();
        assert_eq!(angle_counts(&seq), [2; 8]);
        for (k, a) in &real {
            assert_eq!(seq[*k], *a);
        }
    }

    #[test]
    fn padding_when_real_angles_dominate() {
        // four copies of one angle exceed what n = 12 can balance
        let real: BTreeMap<usize, Angle> = (0..4).map(|k| (k, Angle::new(2))).collect();
        let seq = plan_tilde_sequence(&real, 12, PaddingStrategy::Equalizing, &mut rng(2)).unwrap();
        let c = angle_counts(&seq);
        assert_eq!(c[2], 4);
        assert_eq!(c.iter().sum::<usize>(), 12);
        // seven pads raise the other angles to one; the eighth lands on one of them
        let others: Vec<usize> = c
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != 2)
            .map(|(_, &x)| x)
            .collect();
        assert_eq!(others.iter().filter(|&&x| x == 1).count(), 6);
        assert_eq!(others.iter().filter(|&&x| x == 2).count(), 1);
    }

    #[test]
    fn constant_zero_pads() {
        let real: BTreeMap<usize, Angle> = [(1, Angle::new(5))].into_iter().collect();
        let seq =
            plan_tilde_sequence(&real, 4, PaddingStrategy::ConstantZero, &mut rng(0)).unwrap();
        assert_eq!(
            seq,
            vec![Angle::ZERO, Angle::new(5), Angle::ZERO, Angle::ZERO]
        );
    }

    #[test]
    fn unranking_covers_all_subsets() {
        let items = [0, 1, 2, 3, 4];
        let mut all: Vec<Vec<i32>> = (0..binomial(5, 2))
            .map(|r| unrank_combination(&items, 2, r))
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
    }

    proptest! {
        #[test]
        fn padding_is_balanced(n in 1usize..40, picks in proptest::collection::vec((0usize..40, 0i64..8), 0..12), seed: u64) {
            let real: BTreeMap<usize, Angle> = picks.into_iter().filter(|(k, _)| *k < n).map(|(k, a)| (k, Angle::new(a))).collect();
            let seq = plan_tilde_sequence(&real, n, PaddingStrategy::Equalizing, &mut rng(seed)).unwrap();
            prop_assert_eq!(seq.len(), n);
            for (k, a) in &real {
                prop_assert_eq!(seq[*k], *a);
            }
            // pads only ever go to angles whose real count is below the maximum
            let c = angle_counts(&seq);
            let real_c = angle_counts(&real.values().copied().collect::<Vec<_>>());
            let max = *c.iter().max().unwrap();
            let min = *c.iter().min().unwrap();
            let real_max = *real_c.iter().max().unwrap();
            prop_assert!(max - min <= 1 || max == real_max);
            if real_max <= n / 8 {
                prop_assert!(max - min <= 1);
            }
        }

        #[test]
        fn pad_secrets_are_consistent(seed: u64, n in 1usize..20) {
            let real: BTreeMap<usize, (Angle, BellLabel)> =
                [(0usize, (Angle::new(3), BellLabel::from_index(3)))].into_iter().collect();
            let p = pad_angles(&real, n, PaddingStrategy::Equalizing, true, &mut rng(seed)).unwrap();
            for k in 0..n {
                prop_assert_eq!(p.theta[k].tilde(p.frames[k]), p.tilde[k]);
            }
            prop_assert_eq!(p.theta[0], Angle::new(3));
        }
    }
}
