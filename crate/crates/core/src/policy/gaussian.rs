use rand::Rng;
use rand_distr::StandardNormal;

/// `ln(2 pi)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log density of a diagonal Gaussian at `x`.
pub fn log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * LN_2PI + ls).sum()
}

/// Draws `mean + std * z` and returns it with its log density. The sample is
/// not clamped; the environment clamps it when decoding.
pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let x: Vec<f64> = mean
        .iter()
        .zip(std)
        .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let log_std: Vec<f64> = std.iter().map(|s| s.ln()).collect();
    let lp = log_prob(&x, mean, &log_std);
    (x, lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_prob_at_the_mean() {
        let d = 4;
        let lp = log_prob(&vec![0.3; d], &vec![0.3; d], &vec![0.0; d]);
        assert!((lp - (-(d as f64) / 2.0 * LN_2PI)).abs() < 1e-12);
        assert!((LN_2PI - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }
}
