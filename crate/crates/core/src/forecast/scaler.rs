use serde::{Deserialize, Serialize};

use super::{Feature, FeatureSet, WindowSample};
use crate::error::{Error, Result};

/// Per-feature min-max scaling to `[0, 1]`, fitted on training windows only.
///
/// The target shares the total-calls statistics, computed over both input
/// rows and targets. A constant feature maps to 0 and inverts to its value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub features: Vec<Feature>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

fn unscale(z: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + z * (hi - lo)
    } else {
        lo
    }
}

pub fn fit_scaler(set: FeatureSet, train: &[WindowSample]) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::Validation("cannot fit a scaler on an empty training set".into()));
    }
    let features = set.features().to_vec();
    let width = features.len();
    let mut min = vec![f64::INFINITY; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    for w in train {
        if w.width != width {
            return Err(Error::Shape {
                expected: format!("{width} features"),
                actual: format!("{} features", w.width),
            });
        }
        for chunk in w.inputs.chunks_exact(width) {
            for (j, &v) in chunk.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
    }
    let total = features
        .iter()
        .position(|f| *f == Feature::TotalCalls)
        .expect("every feature set includes total calls");
    for w in train {
        min[total] = min[total].min(w.target);
        max[total] = max[total].max(w.target);
    }
    Ok(Scaler {
        target_min: min[total],
        target_max: max[total],
        features,
        min,
        max,
    })
}

impl Scaler {
    pub fn transform_value(&self, feature: usize, x: f64) -> f64 {
        scale(x, self.min[feature], self.max[feature])
    }

    pub fn inverse_value(&self, feature: usize, z: f64) -> f64 {
        unscale(z, self.min[feature], self.max[feature])
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        scale(y, self.target_min, self.target_max)
    }

    pub fn inverse_target(&self, z: f64) -> f64 {
        unscale(z, self.target_min, self.target_max)
    }

    pub fn apply(&self, window: &WindowSample) -> WindowSample {
        let width = self.features.len();
        let inputs = window
            .inputs
            .iter()
            .enumerate()
            .map(|(i, &v)| self.transform_value(i % width, v))
            .collect();
        WindowSample {
            inputs,
            target: self.transform_target(window.target),
            ..window.clone()
        }
    }

    pub fn invert(&self, window: &WindowSample) -> WindowSample {
        let width = self.features.len();
        let inputs = window
            .inputs
            .iter()
            .enumerate()
            .map(|(i, &z)| self.inverse_value(i % width, z))
            .collect();
        WindowSample {
            inputs,
            target: self.inverse_target(window.target),
            ..window.clone()
        }
    }

    pub fn apply_all(&self, windows: &[WindowSample]) -> Vec<WindowSample> {
        windows.iter().map(|w| self.apply(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(rows: &[[f64; 3]], target: f64) -> WindowSample {
        WindowSample {
            inputs: rows.iter().flatten().copied().collect(),
            steps: rows.len(),
            width: 3,
            target,
            slot_index: 0,
        }
    }

    #[test]
    fn midpoint_maps_to_half() {
        let train = [window(&[[10.0, 5.0, 0.0], [110.0, 5.0, 200.0]], 100.0)];
        let s = fit_scaler(FeatureSet::FSC, &train).unwrap();
        assert_eq!(s.transform_value(0, 60.0), 0.5);
        assert_eq!(s.inverse_target(0.5), 100.0);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let train = [window(&[[10.0, 5.0, 0.0], [110.0, 5.0, 200.0]], 100.0)];
        let s = fit_scaler(FeatureSet::FSC, &train).unwrap();
        let z = s.apply(&train[0]);
        assert_eq!(z.row(0)[1], 0.0);
        assert_eq!(z.row(1)[1], 0.0);
        assert_eq!(s.invert(&z).row(1)[1], 5.0);
    }

    #[test]
    fn target_shares_total_stats_and_extends_them() {
        let train = [window(&[[0.0, 1.0, 3.0], [1.0, 2.0, 4.0]], 9.0)];
        let s = fit_scaler(FeatureSet::FSC, &train).unwrap();
        assert_eq!((s.min[2], s.max[2]), (3.0, 9.0));
        assert_eq!((s.target_min, s.target_max), (3.0, 9.0));
    }

    #[test]
    fn empty_training_set_is_error() {
        assert!(fit_scaler(FeatureSet::C, &[]).is_err());
    }

    proptest! {
        #[test]
        fn invert_apply_is_identity(
            rows in prop::collection::vec(prop::array::uniform3(-1e4f64..1e4), 2..10),
            target in -1e4f64..1e4,
        ) {
            let w = window(&rows, target);
            let s = fit_scaler(FeatureSet::FSC, std::slice::from_ref(&w)).unwrap();
            let back = s.invert(&s.apply(&w));
            for (a, b) in back.inputs.iter().zip(&w.inputs) {
                let same_const = (a - b).abs() <= 1e-12 * (1.0 + b.abs());
                prop_assert!(same_const, "{} vs {}", a, b);
            }
            prop_assert!((back.target - w.target).abs() <= 1e-12 * (1.0 + w.target.abs()));
        }
    }
}
