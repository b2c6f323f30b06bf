use super::StatsError;

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Walks the merged step functions, calling `visit(x, next_x, F_a, F_b)` on
/// each interval `[x, next_x)` after both ECDFs have stepped at `x`.
fn walk(a: &[f64], b: &[f64], mut visit: impl FnMut(f64, Option<f64>, f64, f64)) -> Result<(), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        let next = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => Some(p.min(q)),
            (p, q) => p.or(q).copied(),
        };
        visit(x, next, i as f64 / na, j as f64 / nb);
    }
    Ok(())
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ecdf_max_distance(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let mut d = 0.0f64;
    walk(a, b, |_, _, fa, fb| d = d.max((fa - fb).abs()))?;
    Ok(d)
}

/// `∫ (F_a(x) − F_b(x))² dx` over the pooled range.
pub fn ecdf_squared_area(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let mut area = 0.0;
    walk(a, b, |x, next, fa, fb| {
        if let Some(next) = next {
            area += (fa - fb).powi(2) * (next - x);
        }
    })?;
    Ok(area)
}
