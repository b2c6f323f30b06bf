/// Bernoulli KL divergence `D(p‖q)` in nats, with both ratios clamped to
/// `[eps, 1 − eps]`.
pub fn kl_bit_divergence(ratio_a: f64, ratio_b: f64, smoothing_eps: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&ratio_a) && (0.0..=1.0).contains(&ratio_b),
        "ratios must lie in [0,1]"
    );
    let clamp = |r: f64| r.clamp(smoothing_eps, 1.0 - smoothing_eps);
    let (p, q) = (clamp(ratio_a), clamp(ratio_b));
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    (term(p, q) + term(1.0 - p, 1.0 - q)).max(0.0)
}
