//! LIME-style local surrogate for binary features.
//!
//! Perturbations resample every coordinate with a fair coin; each sample is
//! weighted by an exponential kernel on the normalised Hamming distance to
//! the explained instance, and a weighted ridge regression of the target
//! class probability on the perturbed features gives the attribution.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::LimeError;

use super::tree::DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// `n_samples` coin-flip perturbations, the instance itself first.
    Random,
    /// All 2^d binary vectors; `n_samples` is ignored.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width σ. `f64::INFINITY` weights every sample equally.
    pub kernel_width: f64,
    pub seed: u64,
    /// Ridge coefficient on the weights (the intercept is not penalised).
    pub regularization: f64,
    pub sampling: Sampling,
}

impl LimeConfig {
    /// Defaults for `d` features: 1000 samples, σ = 0.75·√d, λ = 1e-6.
    pub fn for_features(d: usize) -> Self {
        LimeConfig {
            n_samples: 1000,
            kernel_width: 0.75 * (d as f64).sqrt(),
            seed: 0,
            regularization: 1e-6,
            sampling: Sampling::Random,
        }
    }

    fn validate(&self) -> Result<(), LimeError> {
        if self.n_samples == 0 && self.sampling == Sampling::Random {
            return Err(LimeError::Config("n_samples must be at least 1".into()));
        }
        if self.kernel_width.is_nan() || self.kernel_width <= 0.0 {
            return Err(LimeError::Config("kernel width must be positive".into()));
        }
        if self.regularization.is_nan() || self.regularization < 0.0 {
            return Err(LimeError::Config("regularization must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Highest-weighted feature among those present in the instance.
    pub top_present: Option<usize>,
}

impl Attribution {
    /// Present features ordered by weight, highest first; ties keep
    /// feature order.
    pub fn ranking(&self, x: &[u8]) -> Vec<usize> {
        let mut present: Vec<usize> = (0..x.len()).filter(|&i| x[i] == 1).collect();
        present.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        present
    }
}

/// Perturbation set for `x` under `cfg`.
pub fn perturbations(x: &[u8], cfg: &LimeConfig) -> Vec<Vec<u8>> {
    let d = x.len();
    match cfg.sampling {
        Sampling::Exhaustive => (0..1usize << d)
            .map(|m| (0..d).map(|j| ((m >> j) & 1) as u8).collect())
            .collect(),
        Sampling::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut out = Vec::with_capacity(cfg.n_samples);
            out.push(x.to_vec());
            while out.len() < cfg.n_samples {
                out.push((0..d).map(|_| rng.gen::<bool>() as u8).collect());
            }
            out
        }
    }
}

/// exp(−h²/σ²) with h the Hamming distance divided by √d.
pub fn kernel_weight(x: &[u8], z: &[u8], width: f64) -> f64 {
    let d = x.len().max(1) as f64;
    let hamming = x.iter().zip(z).filter(|(a, b)| a != b).count() as f64;
    let h = hamming / d.sqrt();
    (-(h * h) / (width * width)).exp()
}

/// Minimises Σ wᵢ(yᵢ − β·zᵢ − b)² + λ‖β‖² through the normal equations.
pub fn weighted_ridge(
    samples: &[Vec<u8>],
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, f64), LimeError> {
    let d = samples.first().map_or(0, Vec::len);
    let p = d + 1;
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut atb = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for ((z, &y), &w) in samples.iter().zip(targets).zip(weights) {
        for (j, v) in z.iter().enumerate() {
            row[j] = *v as f64;
        }
        row[d] = 1.0;
        for a in 0..p {
            if row[a] == 0.0 {
                continue;
            }
            atb[a] += w * row[a] * y;
            for b in 0..p {
                ata[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for j in 0..d {
        ata[(j, j)] += lambda;
    }
    let beta = ata
        .cholesky()
        .ok_or(LimeError::Singular)?
        .solve(&atb);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(LimeError::Singular);
    }
    Ok((beta.iter().take(d).copied().collect(), beta[d]))
}

/// Attributes the tree's probability of `target_class` at `x` to the
/// individual features.
pub fn lime_attribute(
    tree: &DecisionTree,
    x: &[u8],
    target_class: &str,
    cfg: &LimeConfig,
) -> Result<Attribution, LimeError> {
    cfg.validate()?;
    let target = tree.class_index(target_class)?;
    tree.predict_proba(x)?;
    let samples = perturbations(x, cfg);
    let targets = samples
        .iter()
        .map(|z| tree.predict_proba(z).map(|p| p[target]))
        .collect::<Result<Vec<f64>, _>>()?;
    let weights: Vec<f64> = samples
        .iter()
        .map(|z| kernel_weight(x, z, cfg.kernel_width))
        .collect();
    let (w, intercept) = weighted_ridge(&samples, &targets, &weights, cfg.regularization)?;
    let mut attribution = Attribution {
        weights: w,
        intercept,
        top_present: None,
    };
    attribution.top_present = attribution.ranking(x).first().copied();
    Ok(attribution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pizza::tree::train_tree;

    fn names(n: usize, p: &str) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let tree = train_tree(&names(4, "f"), &names(1, "c"), &[(vec![0, 1, 0, 1], 0)]).unwrap();
        let cfg = LimeConfig::for_features(4);
        let a = lime_attribute(&tree, &[1, 0, 1, 0], "c0", &cfg).unwrap();
        assert!(a.weights.iter().all(|w| w.abs() < 1e-9), "{:?}", a.weights);
        assert!((a.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_ridge_with_one_sample_is_singular() {
        let tree = train_tree(&names(3, "f"), &names(1, "c"), &[(vec![0, 1, 0], 0)]).unwrap();
        let cfg = LimeConfig {
            n_samples: 1,
            regularization: 0.0,
            ..LimeConfig::for_features(3)
        };
        assert_eq!(
            lime_attribute(&tree, &[1, 1, 0], "c0", &cfg),
            Err(LimeError::Singular)
        );
    }

    #[test]
    fn instance_is_the_first_sample() {
        let cfg = LimeConfig::for_features(3);
        let s = perturbations(&[1, 0, 1], &cfg);
        assert_eq!(s.len(), 1000);
        assert_eq!(s[0], vec![1, 0, 1]);
        assert_eq!(perturbations(&[1, 0, 1], &LimeConfig { sampling: Sampling::Exhaustive, ..cfg }).len(), 8);
    }

    #[test]
    fn kernel_is_one_at_the_instance_and_uniform_at_infinity() {
        assert_eq!(kernel_weight(&[1, 0], &[1, 0], 1.0), 1.0);
        assert!(kernel_weight(&[1, 0], &[0, 1], 1.0) < 1.0);
        assert_eq!(kernel_weight(&[1, 0], &[0, 1], f64::INFINITY), 1.0);
    }

    #[test]
    fn bad_config_is_rejected() {
        let tree = train_tree(&names(1, "f"), &names(1, "c"), &[(vec![0], 0)]).unwrap();
        let cfg = LimeConfig {
            kernel_width: 0.0,
            ..LimeConfig::for_features(1)
        };
        assert!(matches!(lime_attribute(&tree, &[0], "c0", &cfg), Err(LimeError::Config(_))));
        assert!(matches!(
            lime_attribute(&tree, &[0], "nope", &LimeConfig::for_features(1)),
            Err(LimeError::UnknownClass(_))
        ));
    }
}
