//! Synthetic linear-regression data: `x ~ N(0, I)`, `y = w*ᵀx + n`,
//! `n ~ N(0, label_noise_std²)`.

use crate::error::Result;
use crate::experiment::config::ExperimentConfig;
use crate::fedcore::LocalDataset;
use crate::rng::{SeedTree, StreamLabel};
use crate::scalar::Scalar;

/// One dataset per agent, each drawn from its own stream so the result does
/// not depend on generation order.
pub fn generate_data<T: Scalar>(cfg: &ExperimentConfig, seeds: &SeedTree) -> Result<Vec<LocalDataset<T>>> {
    cfg.validate()?;
    let base = cfg.w_star()?;
    let d = cfg.d;
    (0..cfg.agents)
        .map(|k| {
            let mut stream = seeds.stream(StreamLabel::Data, k, 0);
            let w: Vec<f64> = if cfg.heterogeneity > 0.0 {
                base.iter().map(|&b| b + stream.gaussian(cfg.heterogeneity)).collect()
            } else {
                base.clone()
            };
            let mut features = Vec::with_capacity(cfg.samples_per_agent * d);
            let mut labels = Vec::with_capacity(cfg.samples_per_agent);
            for _ in 0..cfg.samples_per_agent {
                let x: Vec<f64> = (0..d).map(|_| stream.standard_normal()).collect();
                let clean: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                let noise = if cfg.label_noise_std > 0.0 {
                    stream.gaussian(cfg.label_noise_std)
                } else {
                    0.0
                };
                features.extend(x.into_iter().map(T::of));
                labels.push(T::of(clean + noise));
            }
            LocalDataset::new(k, d, features, labels)
        })
        .collect()
}
