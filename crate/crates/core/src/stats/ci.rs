use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-sided 95% t-interval for the mean.
pub fn ci95(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput("confidence interval needs at least 2 values".into()));
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975);
    let half = t * (var / n as f64).sqrt();
    Ok((m - half, m + half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_variance() {
        assert_eq!(ci95(&[5.0; 4]).unwrap(), (5.0, 5.0));
    }

    #[test]
    fn two_values_symmetric() {
        let (lo, hi) = ci95(&[0.0, 10.0]).unwrap();
        assert!(((lo + hi) / 2.0 - 5.0).abs() < 1e-12);
        // t(0.975, 1) = 12.706..., sd/sqrt(2) = 5
        assert!((hi - 5.0 - 12.706204736174707 * 5.0).abs() < 1e-6);
    }

    #[test]
    fn large_sample_width() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (lo, hi) = ci95(&v).unwrap();
        assert!(((hi - lo) - 0.0392).abs() < 0.002, "{}", hi - lo);
    }

    #[test]
    fn too_few() {
        assert!(ci95(&[1.0]).is_err());
    }
}
