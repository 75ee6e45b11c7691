//! Distributions over output bitstrings and distances between them.

use std::collections::BTreeMap;

/// Probability (or frequency) table keyed by bitstrings such as `"01"`.
pub type Distribution = BTreeMap<String, f64>;

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b == 0 { '0' } else { '1' })
        .collect()
}

/// Total-variation distance: half the L1 distance over the union of supports.
pub fn tv_distance(a: &Distribution, b: &Distribution) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb.abs();
        }
    }
    0.5 * sum
}

/// Normalizes raw counts into frequencies.
pub fn frequencies(counts: &BTreeMap<String, u64>) -> Distribution {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(k, &c)| {
            (
                k.clone(),
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                },
            )
        })
        .collect()
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
