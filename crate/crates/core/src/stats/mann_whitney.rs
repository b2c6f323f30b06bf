use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

/// Samples up to this size (both sides) use the exact permutation
/// distribution.
pub const EXACT_MAX_N: usize = 20;

/// Samples smaller than this are reported as inconclusive.
pub const MIN_SAMPLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwOutcome {
    Accepted,
    Rejected,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: pairs `(a, b)` with `a > b`, ties counting ½.
    pub u_statistic: f64,
    pub p_value: f64,
    pub outcome: MwOutcome,
    pub exact: bool,
}

impl MannWhitney {
    pub fn accepted(&self) -> bool {
        self.outcome == MwOutcome::Accepted
    }
}

/// Two-sided Mann-Whitney U test of "both samples come from the same
/// distribution". Accepted when `p_value ≥ alpha`.
pub fn mann_whitney(a: &[f64], b: &[f64], alpha: f64) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let ranked = RankedSamples::new(a, b);
    let exact = a.len() <= EXACT_MAX_N && b.len() <= EXACT_MAX_N;
    let p_value = if exact {
        ranked.exact_p_value()
    } else {
        ranked.normal_p_value()
    };
    let outcome = if a.len() < MIN_SAMPLE || b.len() < MIN_SAMPLE {
        MwOutcome::Inconclusive
    } else if p_value >= alpha {
        MwOutcome::Accepted
    } else {
        MwOutcome::Rejected
    };
    Ok(MannWhitney {
        u_statistic: ranked.u_a(),
        p_value,
        outcome,
        exact,
    })
}

/// Midranks of the pooled sample, doubled so ties stay integral.
pub(crate) struct RankedSamples {
    n_a: usize,
    n_b: usize,
    /// Doubled ranks of the first sample followed by the second.
    ranks2: Vec<u64>,
    tie_sizes: Vec<usize>,
}

impl RankedSamples {
    pub(crate) fn new(a: &[f64], b: &[f64]) -> Self {
        let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
        pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut ranks2 = vec![0u64; pooled.len()];
        let mut tie_sizes = Vec::new();
        let mut i = 0;
        while i < pooled.len() {
            let mut j = i + 1;
            while j < pooled.len() && pooled[j].0 == pooled[i].0 {
                j += 1;
            }
            // ranks i+1..=j share (i+1+j)/2
            let mid2 = (i + 1 + j) as u64;
            for &(_, idx) in &pooled[i..j] {
                ranks2[idx] = mid2;
            }
            if j - i > 1 {
                tie_sizes.push(j - i);
            }
            i = j;
        }
        Self {
            n_a: a.len(),
            n_b: b.len(),
            ranks2,
            tie_sizes,
        }
    }

    fn rank_sum2_a(&self) -> u64 {
        self.ranks2[..self.n_a].iter().sum()
    }

    pub(crate) fn u_a(&self) -> f64 {
        let n = self.n_a as f64;
        self.rank_sum2_a() as f64 / 2.0 - n * (n + 1.0) / 2.0
    }

    /// Normal approximation with tie-corrected variance and continuity
    /// correction.
    pub(crate) fn normal_p_value(&self) -> f64 {
        let (na, nb) = (self.n_a as f64, self.n_b as f64);
        let n = na + nb;
        let ties: f64 = self.tie_sizes.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
        let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
        if var <= 0.0 {
            return 1.0;
        }
        let z = ((self.u_a() - na * nb / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    }

    /// Two-sided p-value from the exact permutation distribution of the
    /// first sample's rank sum, conditional on the observed ties.
    pub(crate) fn exact_p_value(&self) -> f64 {
        let n = self.ranks2.len();
        let k = self.n_a;
        let max_sum: usize = self.ranks2.iter().map(|&r| r as usize).sum();
        // ways[j][s]: subsets of size j with doubled rank sum s
        let mut ways = vec![vec![0f64; max_sum + 1]; k + 1];
        ways[0][0] = 1.0;
        for (seen, &r) in self.ranks2.iter().enumerate() {
            let r = r as usize;
            for j in (1..=k.min(seen + 1)).rev() {
                let (lower, upper) = ways.split_at_mut(j);
                for s in (r..=max_sum).rev() {
                    upper[0][s] += lower[j - 1][s - r];
                }
            }
        }
        let dist = &ways[k];
        let total: f64 = dist.iter().sum();
        let observed = self.rank_sum2_a() as usize;
        let lower: f64 = dist[..=observed].iter().sum();
        let upper: f64 = dist[observed..].iter().sum();
        debug_assert!(total > 0.0 && n >= k);
        (2.0 * lower.min(upper) / total).min(1.0)
    }
}
