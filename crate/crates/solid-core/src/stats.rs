//! Scalar normal-distribution helpers shared across the crate.

use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile function.
pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Mean and variance of a normal with mean `mu` and sd `sigma` truncated to
/// `[lo, hi]`.
pub fn truncated_normal_moments(mu: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let z = norm_cdf(b) - norm_cdf(a);
    let pa = norm_pdf(a);
    let pb = norm_pdf(b);
    let mean = mu + sigma * (pa - pb) / z;
    let var = sigma * sigma
        * (1.0 + (a * pa - b * pb) / z - ((pa - pb) / z).powi(2));
    (mean, var)
}

/// Sample mean and (unbiased) sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Squared Pearson correlation of two equal-length samples.
///
/// Returns `None` when either sample has zero variance.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab * sab) / (saa * sbb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_and_pdf_reference_values() {
        assert_relative_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(norm_cdf(1.96), 0.9750021048517795, epsilon = 1e-7);
        assert_relative_eq!(norm_pdf(0.0), 0.3989422804014327, epsilon = 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[0.01, 0.2, 0.5, 0.77, 0.999] {
            assert_relative_eq!(norm_cdf(norm_quantile(p)), p, epsilon = 1e-9);
        }
    }

    #[test]
    fn squared_correlation_perfect_linear() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 4.0, 6.0];
        assert_relative_eq!(squared_correlation(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squared_correlation_constant_is_none() {
        let a = [1.0, 1.0, 1.0];
        let b = [2.0, 4.0, 6.0];
        assert!(squared_correlation(&a, &b).is_none());
    }
}
