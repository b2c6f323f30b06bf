use rand::Rng;
use rand_distr::{Distribution, Normal, weighted::WeightedIndex};

use super::{ModelError, Pmf};

/// Draws `(iteration_time, bit)` reports from an analytic [`Pmf`].
///
/// Atoms are chosen proportionally to their probability (so the truncated
/// mass is renormalized away) and one Gaussian noise term is added per
/// report, redrawn while the result is not positive.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    atoms: Vec<(f64, u8)>,
    index: WeightedIndex<f64>,
    noise: Option<Normal<f64>>,
}

impl ModelSampler {
    pub fn new(pmf: &Pmf, noise_sigma: f64) -> Result<Self, ModelError> {
        let index = WeightedIndex::new(pmf.atoms.iter().map(|a| a.prob)).map_err(|_| ModelError::Empty)?;
        let noise = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("sigma is finite and positive"));
        Ok(Self {
            atoms: pmf.atoms.iter().map(|a| (a.time, a.bit)).collect(),
            index,
            noise,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, u8) {
        let (time, bit) = self.atoms[self.index.sample(rng)];
        (add_noise(time, self.noise.as_ref(), rng), bit)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, u8)> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

pub(crate) fn add_noise<R: Rng + ?Sized>(time: f64, noise: Option<&Normal<f64>>, rng: &mut R) -> f64 {
    match noise {
        None => time,
        Some(n) => loop {
            let t = time + n.sample(rng);
            if t > 0.0 {
                break t;
            }
        },
    }
}
