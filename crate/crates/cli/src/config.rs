//! Experiment and corridor files.
//!
//! Every setting is optional in TOML. Resolution fills the gaps with the
//! library defaults and records the dotted name of each filled field, so
//! the manifest written next to the results lists what was assumed.

use std::path::{Path, PathBuf};

use roadcell::cellgen::DurationComponent;
use roadcell::forecast::{FeatureSet, SplitRatios, TrainConfig};
use roadcell::road_data::{build_corridor, Corridor, DiurnalShape, SiteSpec, SynthProfile};
use roadcell::GenParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "roadcell-out";
const FLAT_FLOW: f64 = 100.0;
const FLAT_SPEED: f64 = 60.0;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    corridor: Option<PathBuf>,
    road: Option<RawRoad>,
    generation: Option<RawGeneration>,
    training: Option<RawTraining>,
    feature_sets: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    split: Option<String>,
    history: Option<usize>,
    mape_floor: Option<f64>,
    noise: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoad {
    dir: Option<PathBuf>,
    synthetic: Option<RawSynthetic>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    weeks: Option<usize>,
    seed: Option<u64>,
    profile: Option<ProfileKind>,
    flow: Option<f64>,
    speed: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeneration {
    lambda_per_min: Option<f64>,
    speed_noise_std: Option<f64>,
    duration_mix: Option<Vec<DurationComponent>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    learning_rate: Option<f64>,
    rmsprop_decay: Option<f64>,
    epsilon: Option<f64>,
    batch_size: Option<usize>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    hidden_size: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Diurnal,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticRoad {
    pub weeks: usize,
    pub seed: u64,
    pub profile: ProfileKind,
    /// Used by the flat profile only.
    pub flow: f64,
    pub speed: f64,
}

impl SyntheticRoad {
    pub fn profile(&self) -> SynthProfile {
        match self.profile {
            ProfileKind::Diurnal => SynthProfile::diurnal(&DiurnalShape::default()),
            ProfileKind::Flat => SynthProfile::flat(self.flow, self.speed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadSource {
    /// One `<detector_id>.csv` per site.
    Dir(PathBuf),
    Synthetic(SyntheticRoad),
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub corridor: PathBuf,
    pub road: RoadSource,
    pub generation: GenParams,
    pub training: TrainConfig,
    pub feature_sets: Vec<FeatureSet>,
    pub seeds: Vec<u64>,
    pub split: SplitRatios,
    pub history: usize,
    pub mape_floor: f64,
    pub noise: Option<f64>,
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub defaults_applied: Vec<String>,
}

struct Filler {
    applied: Vec<String>,
}

impl Filler {
    fn take<T>(&mut self, name: &str, value: Option<T>, default: impl FnOnce() -> T) -> T {
        value.unwrap_or_else(|| {
            self.applied.push(name.to_string());
            default()
        })
    }
}

fn relative_to(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

pub fn parse_feature_sets(items: &[String]) -> Result<Vec<FeatureSet>, CliError> {
    let sets = items
        .iter()
        .map(|s| s.parse::<FeatureSet>())
        .collect::<Result<Vec<_>, _>>()?;
    if sets.is_empty() {
        return Err(CliError::Usage("no feature sets given".into()));
    }
    Ok(sets)
}

impl ExperimentConfig {
    /// Reads a TOML experiment file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Resolved, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Resolved, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut f = Filler { applied: Vec::new() };
        let corridor = raw
            .corridor
            .map(|p| relative_to(base, p))
            .ok_or_else(|| CliError::Usage("`corridor` is required".into()))?;

        let split_text = f.take("split", raw.split, || "12:6:6".to_string());
        let split: SplitRatios = split_text.parse()?;

        let road_raw = f.take("road", raw.road, RawRoad::default);
        let road = match (road_raw.dir, road_raw.synthetic) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "set either road.dir or road.synthetic, not both".into(),
                ))
            }
            (Some(dir), None) => RoadSource::Dir(relative_to(base, dir)),
            (None, syn) => {
                let syn = f.take("road.synthetic", syn, RawSynthetic::default);
                RoadSource::Synthetic(SyntheticRoad {
                    weeks: f.take("road.synthetic.weeks", syn.weeks, || split.total()),
                    seed: f.take("road.synthetic.seed", syn.seed, || 0),
                    profile: f.take("road.synthetic.profile", syn.profile, || ProfileKind::Diurnal),
                    flow: f.take("road.synthetic.flow", syn.flow, || FLAT_FLOW),
                    speed: f.take("road.synthetic.speed", syn.speed, || FLAT_SPEED),
                })
            }
        };

        let gd = GenParams::default();
        let g = f.take("generation", raw.generation, RawGeneration::default);
        let generation = GenParams {
            lambda_per_min: f.take("generation.lambda_per_min", g.lambda_per_min, || gd.lambda_per_min),
            speed_noise_std: f.take("generation.speed_noise_std", g.speed_noise_std, || gd.speed_noise_std),
            duration_mix: f.take("generation.duration_mix", g.duration_mix, || gd.duration_mix.clone()),
            seed: 0,
        };

        let td = TrainConfig::default();
        let t = f.take("training", raw.training, RawTraining::default);
        let training = TrainConfig {
            learning_rate: f.take("training.learning_rate", t.learning_rate, || td.learning_rate),
            rmsprop_decay: f.take("training.rmsprop_decay", t.rmsprop_decay, || td.rmsprop_decay),
            epsilon: f.take("training.epsilon", t.epsilon, || td.epsilon),
            batch_size: f.take("training.batch_size", t.batch_size, || td.batch_size),
            max_epochs: f.take("training.max_epochs", t.max_epochs, || td.max_epochs),
            patience: f.take("training.patience", t.patience, || td.patience),
            hidden_size: f.take("training.hidden_size", t.hidden_size, || td.hidden_size),
            seed: 0,
        };

        let set_names = f.take("feature_sets", raw.feature_sets, || {
            ["C", "FSC", "NHC", "FSNHC"].map(String::from).to_vec()
        });
        let config = ExperimentConfig {
            corridor,
            road,
            generation,
            training,
            feature_sets: parse_feature_sets(&set_names)?,
            seeds: f.take("seeds", raw.seeds, || (1..=5).collect()),
            split,
            history: f.take("history", raw.history, || 6),
            mape_floor: f.take("mape_floor", raw.mape_floor, || roadcell::evalbench::DEFAULT_MAPE_FLOOR),
            noise: raw.noise,
            out: f.take("out", raw.out, || PathBuf::from(DEFAULT_OUT)),
        };
        // Absent noise means no noise experiment; recorded like any default.
        if config.noise.is_none() {
            f.applied.push("noise".into());
        }
        Ok(Resolved { config, defaults_applied: f.applied })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorridorFile {
    site: Vec<SiteSpec>,
}

/// Reads `[[site]]` tables (`bs_id`, `detector_id`, `range_miles`) in corridor order.
pub fn load_corridor(path: &Path) -> Result<Corridor, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read corridor {}: {e}", path.display())))?;
    let file: CorridorFile = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(build_corridor(&file.site)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_records_defaults() {
        let r = ExperimentConfig::from_toml("corridor = \"c.toml\"\n", Path::new("/cfg")).unwrap();
        assert_eq!(r.config.corridor, PathBuf::from("/cfg/c.toml"));
        assert_eq!(r.config.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(r.config.split, SplitRatios::new(12, 6, 6));
        match &r.config.road {
            RoadSource::Synthetic(s) => assert_eq!(s.weeks, 24),
            other => panic!("{other:?}"),
        }
        for key in ["split", "seeds", "history", "training.learning_rate", "road.synthetic.weeks", "noise"] {
            assert!(r.defaults_applied.iter().any(|k| k == key), "{key} missing");
        }
    }

    #[test]
    fn explicit_values_are_not_defaults() {
        let text = r#"
            corridor = "/abs/c.toml"
            seeds = [3]
            split = "2:1:1"
            feature_sets = ["C", "FSC"]
            noise = 0.05
            [road]
            dir = "data"
            [training]
            max_epochs = 20
            patience = 5
        "#;
        let r = ExperimentConfig::from_toml(text, Path::new("/cfg")).unwrap();
        assert_eq!(r.config.road, RoadSource::Dir(PathBuf::from("/cfg/data")));
        assert_eq!(r.config.training.max_epochs, 20);
        assert_eq!(r.config.noise, Some(0.05));
        assert!(!r.defaults_applied.iter().any(|k| k == "seeds" || k == "noise"));
        assert!(r.defaults_applied.iter().any(|k| k == "training.batch_size"));
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        for text in [
            "",
            "corridor = \"c\"\nbogus = 1\n",
            "corridor = \"c\"\nfeature_sets = [\"XYZ\"]\n",
            "corridor = \"c\"\nsplit = \"a:b\"\n",
            "corridor = \"c\"\n[road]\ndir = \"d\"\n[road.synthetic]\nweeks = 2\n",
        ] {
            assert!(ExperimentConfig::from_toml(text, Path::new(".")).is_err(), "{text}");
        }
    }
}
