use rayon::prelude::*;

use super::combinatorics::CompensatedSum;
use super::{
    atom_prob_detected, atom_prob_undetected, compensated_sum, ln_multinomial, LapVector, ModelError, Pmf,
    PmfAtom,
};
use crate::config::{ModelParams, RegionMap};

/// Exact truncated distribution of reports for an event in `event_region`.
///
/// Lap vectors are built region by region. A branch is cut when its time
/// exceeds `params.duration`, when its lap count would pass
/// `params.max_laps`, or when the total mass of everything below it is under
/// `params.mass_epsilon`. That subtree mass has a closed form (see
/// [`subtree_mass`]), so the bound on what pruning removed is tracked
/// exactly. Branches on the first region are enumerated in parallel; atoms
/// are sorted by `(time, bit, lap vector)` afterwards so output does not
/// depend on scheduling.
pub fn enumerate_pmf(map: &RegionMap, event_region: u32, params: &ModelParams) -> Result<Pmf, ModelError> {
    map.validate()?;
    params.validate()?;
    map.index_of(event_region).ok_or(ModelError::UnknownRegion(event_region))?;
    let min_travel_time = map.min_travel_time();
    if params.duration < min_travel_time {
        return Err(ModelError::DurationBelowMinTravelTime {
            duration: params.duration,
            min_travel_time,
        });
    }

    let walker = Walker::new(map, event_region, params);
    let first_choices: Vec<u32> = (0..=params.max_laps).collect();
    let branches: Vec<Branch> = first_choices
        .par_iter()
        .map(|&n0| {
            let mut branch = Branch::default();
            let mut counts = vec![0u32; map.len()];
            walker.choose(0, n0, &mut counts, 0, 0.0, 0.0, &mut branch);
            branch
        })
        .collect();

    let mut atoms = Vec::new();
    let mut pruned = Vec::with_capacity(branches.len());
    for b in branches {
        atoms.extend(b.atoms);
        pruned.push(compensated_sum(b.pruned));
    }
    atoms.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.bit.cmp(&b.bit))
            .then_with(|| a.lap_vectors.cmp(&b.lap_vectors))
    });

    let retained = compensated_sum(atoms.iter().map(|a| a.prob));
    Ok(Pmf {
        atoms,
        event_region,
        params: *params,
        truncated_mass: (1.0 - retained).max(0.0),
        pruned_mass_bound: compensated_sum(pruned),
        map_fingerprint: map.fingerprint(),
    })
}

#[derive(Default)]
struct Branch {
    atoms: Vec<PmfAtom>,
    pruned: Vec<f64>,
}

struct Walker<'a> {
    map: &'a RegionMap,
    event_region: u32,
    params: &'a ModelParams,
    times: Vec<f64>,
    ln_probs: Vec<f64>,
    /// `tail_probs[d]` = Σ of traversal probabilities of regions `d..`.
    tail_probs: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(map: &'a RegionMap, event_region: u32, params: &'a ModelParams) -> Self {
        let probs = map.probabilities();
        let mut tail_probs = vec![0.0; probs.len() + 1];
        for d in (0..probs.len()).rev() {
            tail_probs[d] = tail_probs[d + 1] + probs[d];
        }
        Self {
            map,
            event_region,
            params,
            times: map.travel_times(),
            ln_probs: probs.iter().map(|p| p.ln()).collect(),
            tail_probs,
        }
    }

    /// Assigns `n` laps to region `depth`, then recurses into the remaining
    /// regions. `laps`/`time`/`ln_weight` describe the prefix before this
    /// assignment; `ln_weight` is `ln(multinomial(prefix) · Π P^n)`.
    #[allow(clippy::too_many_arguments)]
    fn choose(
        &self,
        depth: usize,
        n: u32,
        counts: &mut Vec<u32>,
        laps: u32,
        time: f64,
        ln_weight: f64,
        out: &mut Branch,
    ) {
        let laps_after = laps + n;
        let ln_weight_after = ln_weight + ln_binomial(laps_after, n) + self.ln_term(depth, n);
        let bound = subtree_mass(
            ln_weight_after,
            laps_after,
            self.tail_probs[depth + 1],
            self.params.max_laps,
            self.params.p_trans,
        );
        if bound == 0.0 {
            return;
        }
        let time_after = time + f64::from(n) * self.times[depth];
        if time_after > self.params.duration || bound < self.params.mass_epsilon {
            out.pruned.push(bound);
            return;
        }

        counts[depth] = n;
        if depth + 1 == counts.len() {
            if laps_after > 0 {
                self.emit(counts, time_after, out);
            }
        } else {
            for next in 0..=(self.params.max_laps - laps_after) {
                self.choose(depth + 1, next, counts, laps_after, time_after, ln_weight_after, out);
            }
        }
        counts[depth] = 0;
    }

    fn ln_term(&self, depth: usize, n: u32) -> f64 {
        if n == 0 {
            0.0
        } else {
            f64::from(n) * self.ln_probs[depth]
        }
    }

    fn emit(&self, counts: &[u32], time: f64, out: &mut Branch) {
        let lap_vector = LapVector::new(counts.to_vec());
        let detected = atom_prob_detected(&lap_vector, self.event_region, self.map, self.params).ok();
        let undetected = atom_prob_undetected(&lap_vector, self.event_region, self.map, self.params)
            .expect("lap vector was built against this map");
        for (bit, prob) in [(0u8, Some(undetected)), (1u8, detected)] {
            if let Some(prob) = prob.filter(|&p| p > 0.0) {
                out.atoms.push(PmfAtom {
                    time,
                    bit,
                    prob,
                    lap_vectors: vec![lap_vector.clone()],
                });
            }
        }
    }
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_multinomial(&[k, n - k])
}

/// Total mass (both bits) of every window whose first regions are fixed to a
/// prefix with `laps` laps and log-weight `ln_weight`, the remaining regions
/// having total traversal probability `rest_prob`:
///
/// `W · Σ_{s ≥ 0, laps+s ≥ 1}^{max_laps − laps} C(laps+s, s) · rest^s · (1−p)^{laps+s−1} · p`
pub(crate) fn subtree_mass(ln_weight: f64, laps: u32, rest_prob: f64, max_laps: u32, p_trans: f64) -> f64 {
    if laps > max_laps {
        return 0.0;
    }
    let miss = 1.0 - p_trans;
    let (mut s, mut term) = if laps == 0 {
        (1u32, rest_prob * p_trans)
    } else {
        (0u32, miss.powi(laps as i32 - 1) * p_trans)
    };
    let mut acc = CompensatedSum::default();
    while laps + s <= max_laps {
        acc.add(term);
        if term == 0.0 {
            break;
        }
        term *= f64::from(laps + s + 1) / f64::from(s + 1) * rest_prob * miss;
        s += 1;
    }
    ln_weight.exp() * acc.total()
}
