//! Samplable synthetic distributions on R^d used for Monte Carlo validation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One Gaussian component of a mixture.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: f64,
}

/// A synthetic measure on R^d that can be sampled with a seeded generator.
#[derive(Debug, Clone)]
pub enum DistributionSpec {
    /// Isotropic Gaussian.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Mixture of isotropic Gaussians; weights must be positive and sum to 1.
    Mixture { components: Vec<MixtureComponent> },
    /// Uniform on the closed ball of the given radius.
    UniformBall { center: Vec<f64>, radius: f64 },
    /// 2-d ring: uniform angle, radius perturbed by Gaussian noise.
    Ring {
        center: Vec<f64>,
        radius: f64,
        noise_std: f64,
    },
    /// All mass at a single point.
    PointMass { point: Vec<f64> },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            DistributionSpec::Gaussian { mean, std } => {
                if mean.is_empty() || !finite(mean) {
                    return Err(Error::invalid_input("gaussian mean must be finite and nonempty"));
                }
                if !std.is_finite() || *std < 0.0 {
                    return Err(Error::invalid_input("gaussian std must be nonnegative"));
                }
            }
            DistributionSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::invalid_input("mixture needs at least one component"));
                }
                let dim = components[0].mean.len();
                let mut total = 0.0;
                for c in components {
                    if c.mean.len() != dim || dim == 0 || !finite(&c.mean) {
                        return Err(Error::invalid_input(
                            "mixture component means must be finite with equal dimension",
                        ));
                    }
                    if !c.std.is_finite() || c.std < 0.0 {
                        return Err(Error::invalid_input("mixture component std must be nonnegative"));
                    }
                    if !c.weight.is_finite() || c.weight <= 0.0 {
                        return Err(Error::invalid_input("mixture weights must be positive"));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid_input(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
            }
            DistributionSpec::UniformBall { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return Err(Error::invalid_input("ball center must be finite and nonempty"));
                }
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::invalid_input("ball radius must be positive"));
                }
            }
            DistributionSpec::Ring {
                center,
                radius,
                noise_std,
            } => {
                if center.len() != 2 || !finite(center) {
                    return Err(Error::invalid_input("ring distributions are 2-dimensional"));
                }
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::invalid_input("ring radius must be positive"));
                }
                if !noise_std.is_finite() || *noise_std < 0.0 {
                    return Err(Error::invalid_input("ring noise std must be nonnegative"));
                }
            }
            DistributionSpec::PointMass { point } => {
                if point.is_empty() || !finite(point) {
                    return Err(Error::invalid_input("point mass must be finite and nonempty"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Gaussian { mean, .. } => mean.len(),
            DistributionSpec::Mixture { components } => components[0].mean.len(),
            DistributionSpec::UniformBall { center, .. } => center.len(),
            DistributionSpec::Ring { .. } => 2,
            DistributionSpec::PointMass { point } => point.len(),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            DistributionSpec::Gaussian { mean, std } => gaussian(mean, *std, rng),
            DistributionSpec::Mixture { components } => {
                let u: f64 = rng.random::<f64>();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return gaussian(&c.mean, c.std, rng);
                    }
                }
                let last = components.last().expect("validated nonempty");
                gaussian(&last.mean, last.std, rng)
            }
            DistributionSpec::UniformBall { center, radius } => {
                let d = center.len();
                // Direction from a normalized Gaussian, radius via u^(1/d).
                loop {
                    let dir: Vec<f64> =
                        (0..d).map(|_| StandardNormal.sample(rng)).collect();
                    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                    return center
                        .iter()
                        .zip(&dir)
                        .map(|(c, x)| c + r * x / norm)
                        .collect();
                }
            }
            DistributionSpec::Ring {
                center,
                radius,
                noise_std,
            } => {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let noise: f64 = StandardNormal.sample(rng);
                let r = radius + noise_std * noise;
                vec![center[0] + r * theta.cos(), center[1] + r * theta.sin()]
            }
            DistributionSpec::PointMass { point } => point.clone(),
        }
    }
}

fn gaussian<R: Rng>(mean: &[f64], std: f64, rng: &mut R) -> Vec<f64> {
    mean.iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            m + std * z
        })
        .collect()
}
