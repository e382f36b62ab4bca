use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{RoadSeries, RoadSlot};
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

/// Gaussian flow-estimation error with std proportional to the true flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_fraction: f64,
    pub seed: u64,
}

/// Perturbs every flow to `round(v + e)`, `e ~ N(0, sigma_fraction * v)`,
/// clamped at zero. Speeds are left untouched.
pub fn add_flow_noise(series: &RoadSeries, cfg: &NoiseConfig) -> Result<RoadSeries> {
    if !(cfg.sigma_fraction >= 0.0) || !cfg.sigma_fraction.is_finite() {
        return Err(Error::Config(format!(
            "sigma_fraction must be non-negative, got {}",
            cfg.sigma_fraction
        )));
    }
    let mut rng = stream(cfg.seed, 0, Phase::FlowNoise);
    let slots = series
        .slots
        .iter()
        .map(|s| {
            // One draw per slot keeps the stream aligned across sigma values.
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = s.flow as f64;
            let noisy = (v + z * cfg.sigma_fraction * v).round().max(0.0);
            RoadSlot {
                flow: noisy as u32,
                ..*s
            }
        })
        .collect();
    Ok(RoadSeries::new(series.detector_id.clone(), series.origin, slots))
}
