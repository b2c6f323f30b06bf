use statrs::function::factorial::ln_factorial;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("multinomial coefficient of {counts:?} exceeds u128; use ln_multinomial")]
pub struct MultinomialOverflow {
    pub counts: Vec<u32>,
}

/// Exact `(Σn_i)! / Π n_i!`.
///
/// Built as a product of binomials `C(n_1+..+n_k, n_k)`, each evaluated with
/// the running-product recurrence that stays integral at every step. Fails
/// with [`MultinomialOverflow`] once any intermediate leaves `u128`; callers
/// that only need magnitudes should use [`ln_multinomial`].
pub fn multinomial_coefficient(counts: &[u32]) -> Result<u128, MultinomialOverflow> {
    let overflow = || MultinomialOverflow {
        counts: counts.to_vec(),
    };
    let mut result: u128 = 1;
    let mut total: u128 = 0;
    for &k in counts {
        let k = u128::from(k);
        total += k;
        let mut binom: u128 = 1;
        for i in 1..=k {
            // binom == C(total - k + i - 1, i - 1) here
            binom = binom.checked_mul(total - k + i).ok_or_else(overflow)? / i;
        }
        result = result.checked_mul(binom).ok_or_else(overflow)?;
    }
    Ok(result)
}

/// Natural log of the multinomial coefficient, valid for any size.
pub fn ln_multinomial(counts: &[u32]) -> f64 {
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    ln_factorial(total) - counts.iter().map(|&c| ln_factorial(u64::from(c))).sum::<f64>()
}

/// Multinomial coefficient as a float: exact when it fits, otherwise
/// through the log domain.
pub fn multinomial_f64(counts: &[u32]) -> f64 {
    match multinomial_coefficient(counts) {
        Ok(v) => v as f64,
        Err(_) => ln_multinomial(counts).exp(),
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: u32) -> u128 {
        (1..=u128::from(n)).product()
    }

    #[test]
    fn small_values() {
        assert_eq!(multinomial_coefficient(&[2, 1]), Ok(3));
        assert_eq!(multinomial_coefficient(&[5, 0, 0]), Ok(1));
        assert_eq!(multinomial_coefficient(&[3, 2, 1]), Ok(60));
        assert_eq!(multinomial_coefficient(&[]), Ok(1));
        assert_eq!(multinomial_coefficient(&[0, 0]), Ok(1));
    }

    #[test]
    fn overflow_is_signalled() {
        let err = multinomial_coefficient(&[60, 60, 60]).unwrap_err();
        assert_eq!(err.counts, vec![60, 60, 60]);
        let ln = ln_multinomial(&[60, 60, 60]);
        assert!(ln.is_finite() && ln > (u128::MAX as f64).ln());
        assert!(multinomial_f64(&[60, 60, 60]).is_finite());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((compensated_sum(values) - 4e-16).abs() < 1e-30);
    }

    proptest! {
        #[test]
        fn matches_factorial_ratio(counts in prop::collection::vec(0u32..8, 0..5)) {
            let total: u32 = counts.iter().sum();
            prop_assume!(total <= 30);
            let expected = factorial(total) / counts.iter().map(|&c| factorial(c)).product::<u128>();
            prop_assert_eq!(multinomial_coefficient(&counts).unwrap(), expected);
            let ln = ln_multinomial(&counts);
            prop_assert!((ln - (expected as f64).ln()).abs() < 1e-9);
        }

        #[test]
        fn invariant_under_permutation(mut counts in prop::collection::vec(0u32..10, 1..5)) {
            let a = multinomial_coefficient(&counts).unwrap();
            counts.reverse();
            prop_assert_eq!(a, multinomial_coefficient(&counts).unwrap());
        }
    }
}
