use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{
    ErrorReport, ImprovementRow, NoiseSection, Protocol, ReportMetadata, RunRecord, SetRow,
    SiteReport, SEEDING_NOTE,
};
use super::{compute_metrics, improvement, summarize_runs, Metric, DEFAULT_MAPE_FLOOR};
use crate::cellgen::{generate, GenParams};
use crate::error::{Error, Result, ResultExt};
use crate::forecast::{
    fit_and_forecast, split_chronological, FeatureSet, FeatureTable, SplitRatios, TrainConfig,
};
use crate::road_data::{add_flow_noise, lag_align, Corridor, NoiseConfig, RoadSeries};

/// Baseline/enriched pairs reported for the clean experiment.
pub const IMPROVEMENT_PAIRS: [(FeatureSet, FeatureSet); 5] = [
    (FeatureSet::C, FeatureSet::FSC),
    (FeatureSet::NHC, FeatureSet::FSNHC),
    (FeatureSet::C, FeatureSet::NHC),
    (FeatureSet::FSC, FeatureSet::FSNHC),
    (FeatureSet::NHC, FeatureSet::FSC),
];

/// Pairs reported for the noisy-flow experiment.
pub const NOISE_PAIRS: [(FeatureSet, FeatureSet); 2] = [
    (FeatureSet::C, FeatureSet::FSC),
    (FeatureSet::NHC, FeatureSet::FSNHC),
];

/// A corridor with its validated detector data and the evaluation protocol.
///
/// `road[k]` is the series recorded by the detector of site `k`, all on a
/// shared calendar. Calls are generated from the lag-aligned series; the
/// models see the readings as recorded.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub corridor: Corridor,
    pub road: Vec<RoadSeries>,
    pub generation: GenParams,
    pub training: TrainConfig,
    pub feature_sets: Vec<FeatureSet>,
    pub seeds: Vec<u64>,
    pub split: SplitRatios,
    pub history: usize,
    pub mape_floor: f64,
}

impl Scenario {
    /// Protocol defaults: all four feature sets, seeds 1 to 5, six-slot
    /// history and a 12:6:6 week split.
    pub fn new(corridor: Corridor, road: Vec<RoadSeries>) -> Self {
        Self {
            corridor,
            road,
            generation: GenParams::default(),
            training: TrainConfig::default(),
            feature_sets: vec![FeatureSet::C, FeatureSet::FSC, FeatureSet::NHC, FeatureSet::FSNHC],
            seeds: (1..=5).collect(),
            split: SplitRatios::new(12, 6, 6),
            history: 6,
            mape_floor: DEFAULT_MAPE_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.road.len() != self.corridor.len() {
            return Err(Error::Config(format!(
                "{} road series for {} sites",
                self.road.len(),
                self.corridor.len()
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.feature_sets.is_empty() {
            return Err(Error::Config("at least one feature set is required".into()));
        }
        if has_duplicates(&self.seeds) || has_duplicates(&self.feature_sets) {
            return Err(Error::Config("seeds and feature sets must be unique".into()));
        }
        if !(self.mape_floor >= 0.0) {
            return Err(Error::Config("mape_floor must be non-negative".into()));
        }
        if self.history == 0 {
            return Err(Error::Config("history must be at least 1".into()));
        }
        self.generation.validate()?;
        self.training.validate()
    }

    fn protocol(&self) -> Protocol {
        Protocol {
            history: self.history,
            split: self.split,
            seeds: self.seeds.clone(),
            feature_sets: self.feature_sets.clone(),
            mape_floor: self.mape_floor,
            generation: self.generation.clone(),
            training: self.training.clone(),
            seeding: SEEDING_NOTE.to_string(),
        }
    }
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, x)| v[..i].contains(x))
}

/// Trains and scores every (site, feature set, seed) cell on clean data.
pub fn run_experiment(scenario: &Scenario) -> Result<ErrorReport> {
    run_study(scenario, None).map(|(report, _)| report)
}

/// Noisy-flow experiment alone: calls are generated from the true flow, the
/// enriched sets (FSC, FSNHC) see perturbed flow, baselines (C, NHC) stay
/// clean. The result holds only the noise section.
pub fn run_noise_experiment(scenario: &Scenario, sigma_fraction: f64) -> Result<ErrorReport> {
    scenario.validate()?;
    let noisy = noisy_sets(scenario)?;
    let baselines: Vec<FeatureSet> = NOISE_PAIRS
        .iter()
        .filter(|(_, e)| noisy.contains(e))
        .map(|&(b, _)| b)
        .collect();
    let results = execute(scenario, &baselines, &noisy, Some(sigma_fraction))?;
    Ok(ErrorReport {
        metadata: ReportMetadata::default(),
        protocol: scenario.protocol(),
        sites: Vec::new(),
        noise: Some(noise_section(scenario, &results, sigma_fraction)?),
    })
}

/// Clean experiment plus, when `noise` is given, the noisy-flow section.
/// Baselines are trained once and shared by both sections. Also returns the
/// number of models trained.
pub fn run_study(scenario: &Scenario, noise: Option<f64>) -> Result<(ErrorReport, usize)> {
    scenario.validate()?;
    let noisy = match noise {
        Some(_) => noisy_sets(scenario)?,
        None => Vec::new(),
    };
    let mut clean = scenario.feature_sets.clone();
    for (b, e) in NOISE_PAIRS {
        if noisy.contains(&e) && !clean.contains(&b) {
            clean.push(b);
        }
    }
    let results = execute(scenario, &clean, &noisy, noise)?;
    let trained = results.values().map(Vec::len).sum();

    let mut sites = Vec::new();
    for site in scenario.corridor.sites() {
        let rows = scenario
            .feature_sets
            .iter()
            .map(|&set| set_row(&results, site.position, set, false))
            .collect::<Result<Vec<_>>>()?;
        let improvements = improvement_rows(&rows, &IMPROVEMENT_PAIRS)?;
        sites.push(SiteReport {
            bs_id: site.bs_id.clone(),
            detector_id: site.detector_id.clone(),
            position: site.position,
            rows,
            improvements,
        });
    }
    let noise = match noise {
        Some(sigma) => Some(noise_section(scenario, &results, sigma)?),
        None => None,
    };
    let report = ErrorReport {
        metadata: ReportMetadata::default(),
        protocol: scenario.protocol(),
        sites,
        noise,
    };
    Ok((report, trained))
}

fn noisy_sets(scenario: &Scenario) -> Result<Vec<FeatureSet>> {
    let sets: Vec<FeatureSet> = scenario
        .feature_sets
        .iter()
        .copied()
        .filter(|s| s.uses_road())
        .collect();
    if sets.is_empty() {
        return Err(Error::Config(
            "the flow-noise experiment needs FSC or FSNHC among the feature sets".into(),
        ));
    }
    Ok(sets)
}

/// (site, set, noisy) -> one record per seed, in seed order. Cells that do
/// not apply map to an empty list.
type Results = BTreeMap<(usize, FeatureSet, bool), Vec<RunRecord>>;

struct Tables {
    clean: Vec<FeatureTable>,
    noisy: Option<Vec<FeatureTable>>,
}

/// Noise stream per (run seed, site), distinct from every generation stream.
fn noise_seed(seed: u64, position: usize) -> u64 {
    seed ^ ((position as u64 + 1) << 48)
}

fn tables_for_seed(scenario: &Scenario, seed: u64, sigma: Option<f64>) -> Result<Tables> {
    let lagged = scenario
        .road
        .iter()
        .map(lag_align)
        .collect::<Result<Vec<_>>>()?;
    let generated = generate(&scenario.corridor, &lagged, &scenario.generation.clone().with_seed(seed))?;
    let clean = scenario
        .road
        .iter()
        .zip(&generated.cells)
        .map(|(road, cells)| FeatureTable::assemble(road, cells))
        .collect::<Result<Vec<_>>>()?;
    let noisy = match sigma {
        None => None,
        Some(sigma_fraction) => Some(
            scenario
                .road
                .iter()
                .zip(&generated.cells)
                .enumerate()
                .map(|(k, (road, cells))| {
                    let cfg = NoiseConfig { sigma_fraction, seed: noise_seed(seed, k) };
                    FeatureTable::assemble(&add_flow_noise(road, &cfg)?, cells)
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(Tables { clean, noisy })
}

fn execute(
    scenario: &Scenario,
    clean_sets: &[FeatureSet],
    noisy_sets: &[FeatureSet],
    sigma: Option<f64>,
) -> Result<Results> {
    // Generate sequentially (generation itself is parallel per site) so only
    // the compact feature tables of each seed stay in memory.
    let mut per_seed = Vec::with_capacity(scenario.seeds.len());
    for &seed in &scenario.seeds {
        let want_noise = sigma.filter(|_| !noisy_sets.is_empty());
        per_seed.push(
            tables_for_seed(scenario, seed, want_noise)
                .context(|| format!("generating call data for seed {seed}"))?,
        );
    }

    let mut jobs = Vec::new();
    for site in scenario.corridor.sites() {
        let cells = clean_sets
            .iter()
            .map(|&s| (s, false))
            .chain(noisy_sets.iter().map(|&s| (s, true)));
        for (set, noisy) in cells {
            if set.uses_handovers() && site.position == 0 {
                continue;
            }
            for (i, &seed) in scenario.seeds.iter().enumerate() {
                jobs.push((site.position, set, noisy, i, seed));
            }
        }
    }
    log::info!("training {} models", jobs.len());

    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(position, set, noisy, i, seed)| {
            let tables = &per_seed[i];
            let table = if noisy {
                &tables.noisy.as_ref().expect("noisy tables generated")[position]
            } else {
                &tables.clean[position]
            };
            run_cell(scenario, table, set, seed).context(|| {
                let noise = if noisy { " (noisy flow)" } else { "" };
                format!(
                    "BS {}, feature set {set}{noise}, seed {seed}",
                    scenario.corridor.sites()[position].bs_id
                )
            })
        })
        .collect::<Result<_>>()?;

    let mut results = Results::new();
    for site in scenario.corridor.sites() {
        for &set in clean_sets {
            results.insert((site.position, set, false), Vec::new());
        }
        for &set in noisy_sets {
            results.insert((site.position, set, true), Vec::new());
        }
    }
    for (&(position, set, noisy, _, _), record) in jobs.iter().zip(records) {
        results
            .get_mut(&(position, set, noisy))
            .expect("cell registered")
            .push(record);
    }
    Ok(results)
}

/// One train/evaluate cycle.
fn run_cell(scenario: &Scenario, table: &FeatureTable, set: FeatureSet, seed: u64) -> Result<RunRecord> {
    let ranges = split_chronological(table.week_count(), scenario.split)?;
    let cfg = scenario.training.clone().with_seed(seed);
    let run = fit_and_forecast(table, set, scenario.history, &ranges, &cfg)?;
    let p = &run.predictions;
    let scaled_pred: Vec<f64> = p.iter().map(|x| x.prediction_scaled).collect();
    let scaled_target: Vec<f64> = p.iter().map(|x| x.target_scaled).collect();
    let pred: Vec<f64> = p.iter().map(|x| x.prediction).collect();
    let target: Vec<f64> = p.iter().map(|x| x.target).collect();
    Ok(RunRecord {
        seed,
        epochs: run.history.train_loss.len(),
        best_epoch: run.history.best_epoch,
        stopped_early: run.history.stopped_early,
        normalized: compute_metrics(&scaled_pred, &scaled_target, scenario.mape_floor)?,
        original: compute_metrics(&pred, &target, scenario.mape_floor)?,
    })
}

fn set_row(results: &Results, position: usize, set: FeatureSet, noisy: bool) -> Result<SetRow> {
    let runs = results
        .get(&(position, set, noisy))
        .cloned()
        .expect("every requested cell is registered");
    let applicable = !(set.uses_handovers() && position == 0);
    let (summary, original_summary) = if runs.is_empty() {
        (None, None)
    } else {
        let norm: Vec<_> = runs.iter().map(|r| r.normalized).collect();
        let orig: Vec<_> = runs.iter().map(|r| r.original).collect();
        (Some(summarize_runs(&norm)?), Some(summarize_runs(&orig)?))
    };
    Ok(SetRow { feature_set: set, noisy_flow: noisy, applicable, runs, summary, original_summary })
}

fn improvement_rows(rows: &[SetRow], pairs: &[(FeatureSet, FeatureSet)]) -> Result<Vec<ImprovementRow>> {
    let summary = |set: FeatureSet| rows.iter().find(|r| r.feature_set == set).and_then(|r| r.summary);
    let mut out = Vec::new();
    for &(baseline, enriched) in pairs {
        let (Some(b), Some(e)) = (summary(baseline), summary(enriched)) else {
            continue;
        };
        for metric in Metric::ALL {
            let (Some(bs), Some(es)) = (metric.stats(&b), metric.stats(&e)) else {
                continue;
            };
            // A zero baseline leaves the percentage undefined.
            let pct = |x: f64, y: f64| improvement(x, y).ok();
            out.push(ImprovementRow {
                baseline,
                enriched,
                metric,
                min: pct(bs.min, es.min),
                median: pct(bs.median, es.median),
                max: pct(bs.max, es.max),
            });
        }
    }
    Ok(out)
}

fn noise_section(scenario: &Scenario, results: &Results, sigma_fraction: f64) -> Result<NoiseSection> {
    let mut sites = Vec::new();
    for site in scenario.corridor.sites() {
        let mut rows = Vec::new();
        for (b, e) in NOISE_PAIRS {
            if results.contains_key(&(site.position, e, true)) {
                rows.push(set_row(results, site.position, b, false)?);
                rows.push(set_row(results, site.position, e, true)?);
            }
        }
        let improvements = improvement_rows(&rows, &NOISE_PAIRS)?;
        sites.push(SiteReport {
            bs_id: site.bs_id.clone(),
            detector_id: site.detector_id.clone(),
            position: site.position,
            rows,
            improvements,
        });
    }
    Ok(NoiseSection { sigma_fraction, sites })
}
