//! Principal components of the raw (centred, unscaled) feature covariance.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{covariance, symmetric_eigen};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PcaTransform<F> {
    pub mean: Vec<F>,
    /// Retained unit-length loading vectors, by decreasing eigenvalue.
    pub components: Vec<Vec<F>>,
    pub eigenvalues: Vec<F>,
    pub explained_fraction: Vec<F>,
}

impl<F: Scalar> PcaTransform<F> {
    pub fn cumulative_explained(&self) -> F {
        self.explained_fraction.iter().copied().sum()
    }

    pub fn apply(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut out = Array2::<F>::zeros((x.nrows(), self.components.len()));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (c, comp) in self.components.iter().enumerate() {
                out[[i, c]] = comp
                    .iter()
                    .zip(row.iter().zip(&self.mean))
                    .fold(F::zero(), |s, (&w, (&v, &m))| s + w * (v - m));
            }
        }
        Ok(out)
    }

    /// Maps coordinates back to feature space.
    pub fn reconstruct(&self, coords: &[F]) -> Vec<F> {
        let mut x = self.mean.clone();
        for (c, comp) in self.components.iter().enumerate() {
            for (xj, &w) in x.iter_mut().zip(comp) {
                *xj += coords[c] * w;
            }
        }
        x
    }
}

/// Keeps the shortest prefix of components whose explained fraction
/// reaches `threshold`.
pub fn pca_fit<F: Scalar>(x: ArrayView2<F>, threshold: f64) -> Result<PcaTransform<F>> {
    if x.nrows() < 2 {
        return Err(Error::InvalidInput("pca needs at least two observations".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("variance threshold {threshold} outside (0, 1]")));
    }
    let (mean, cov) = covariance(x);
    let (values, vectors) = symmetric_eigen(cov.view());
    let clamped: Vec<F> = values.iter().map(|&v| v.max(F::zero())).collect();
    let total: F = clamped.iter().copied().sum();
    if !(total > F::zero()) {
        return Err(Error::Degenerate("all features are constant".into()));
    }
    let fractions: Vec<F> = clamped.iter().map(|&v| v / total).collect();
    // a hair of slack so that exactly reaching the threshold counts
    let target = F::lit(threshold) - F::epsilon() * F::lit(64.0);
    let mut cum = F::zero();
    let mut keep = 0;
    for &f in &fractions {
        cum += f;
        keep += 1;
        if cum >= target {
            break;
        }
    }
    if cum < target {
        return Err(Error::Degenerate(format!("variance threshold {threshold} unreachable")));
    }
    Ok(PcaTransform {
        mean: mean.to_vec(),
        components: (0..keep).map(|c| vectors.row(c).to_vec()).collect(),
        eigenvalues: clamped[..keep].to_vec(),
        explained_fraction: fractions[..keep].to_vec(),
    })
}

pub fn pca_apply<F: Scalar>(t: &PcaTransform<F>, x: &[F]) -> Result<Vec<F>> {
    if x.len() != t.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: t.mean.len(),
            got: x.len(),
        });
    }
    Ok(t.components
        .iter()
        .map(|comp| {
            comp.iter()
                .zip(x.iter().zip(&t.mean))
                .fold(F::zero(), |s, (&w, (&v, &m))| s + w * (v - m))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn line_has_one_component() {
        let x = Array2::from_shape_fn((10, 2), |(i, _)| i as f64);
        let t = pca_fit(x.view(), 0.99).unwrap();
        assert_eq!(t.components.len(), 1);
        assert!((t.explained_fraction[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_needs_all() {
        // ±1 on each axis: identity covariance up to scale
        let p = 22;
        let x = Array2::from_shape_fn((2 * p, p), |(i, j)| {
            if i / 2 == j {
                if i % 2 == 0 { 1.0 } else { -1.0 }
            } else {
                0.0
            }
        });
        let t = pca_fit(x.view(), 0.99).unwrap();
        assert_eq!(t.components.len(), p);
    }

    #[test]
    fn properties_on_random_data() {
        let mut rng = crate::seed::rng(4);
        let n = 300;
        let x = Array2::from_shape_fn((n, 5), |(_, j)| rng.random::<f64>() * (5 - j) as f64);
        let t = pca_fit(x.view(), 0.99).unwrap();
        for a in 0..t.components.len() {
            for b in 0..t.components.len() {
                let d: f64 = t.components[a].iter().zip(&t.components[b]).map(|(u, v)| u * v).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-10);
            }
        }
        assert!(t.explained_fraction.windows(2).all(|w| w[0] >= w[1]));
        assert!(t.cumulative_explained() >= 0.99);
        let z = t.apply(x.view()).unwrap();
        for c in 0..z.ncols() {
            let col = z.column(c);
            let m = col.sum() / n as f64;
            let v = col.iter().map(|u| (u - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((v - t.eigenvalues[c]).abs() < 1e-8);
        }
        assert!(pca_apply(&t, &t.mean).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(pca_apply(&t, &[0.0; 3]).is_err());
    }

    #[test]
    fn first_component_maximises_variance() {
        let mut rng = crate::seed::rng(6);
        let x = Array2::from_shape_fn((200, 3), |(i, j)| (i as f64 * 0.1).sin() * (j + 1) as f64 + rng.random::<f64>());
        let t = pca_fit(x.view(), 1.0).unwrap();
        let var_along = |d: &[f64]| {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let proj: Vec<f64> = x.rows().into_iter().map(|r| r.iter().zip(d).map(|(a, b)| a * b / norm).sum()).collect();
            let m = proj.iter().sum::<f64>() / proj.len() as f64;
            proj.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (proj.len() - 1) as f64
        };
        let best = var_along(&t.components[0]);
        for _ in 0..200 {
            let d: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            assert!(var_along(&d) <= best + 1e-9);
        }
    }
}
