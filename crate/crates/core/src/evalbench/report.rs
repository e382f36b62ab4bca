use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Metric, MetricValues, RunSummary, Stat};
use crate::cellgen::GenParams;
use crate::error::{Error, Result};
use crate::forecast::{FeatureSet, SplitRatios, TrainConfig};

pub const SEEDING_NOTE: &str =
    "each seed drives both call generation and model training; runs differ in both";

/// Wall-clock details kept apart so the rest of a report is reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub generated_at: Option<String>,
}

/// Settings shared by every run in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub history: usize,
    pub split: SplitRatios,
    pub seeds: Vec<u64>,
    pub feature_sets: Vec<FeatureSet>,
    pub mape_floor: f64,
    /// The seed field is replaced per run.
    pub generation: GenParams,
    /// The seed field is replaced per run.
    pub training: TrainConfig,
    pub seeding: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Errors on the scaled target; these are the reported metrics.
    pub normalized: MetricValues,
    /// Errors in calls per slot.
    pub original: MetricValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetRow {
    pub feature_set: FeatureSet,
    /// Flow input carries injected estimation noise.
    pub noisy_flow: bool,
    /// False for handover sets at the first site, which receives no handovers.
    pub applicable: bool,
    pub runs: Vec<RunRecord>,
    pub summary: Option<RunSummary>,
    pub original_summary: Option<RunSummary>,
}

/// Percent error reduction of `enriched` over `baseline`, per order statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub baseline: FeatureSet,
    pub enriched: FeatureSet,
    pub metric: Metric,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

impl ImprovementRow {
    pub fn get(&self, stat: Stat) -> Option<f64> {
        match stat {
            Stat::Min => self.min,
            Stat::Median => self.median,
            Stat::Max => self.max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteReport {
    pub bs_id: String,
    pub detector_id: String,
    pub position: usize,
    pub rows: Vec<SetRow>,
    pub improvements: Vec<ImprovementRow>,
}

impl SiteReport {
    pub fn row(&self, set: FeatureSet) -> Option<&SetRow> {
        self.rows.iter().find(|r| r.feature_set == set)
    }

    pub fn improvement(
        &self,
        baseline: FeatureSet,
        enriched: FeatureSet,
        metric: Metric,
    ) -> Option<&ImprovementRow> {
        self.improvements
            .iter()
            .find(|r| r.baseline == baseline && r.enriched == enriched && r.metric == metric)
    }
}

/// Noisy-flow comparison: enriched sets see perturbed flow, baselines are clean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    pub sigma_fraction: f64,
    pub sites: Vec<SiteReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metadata: ReportMetadata,
    pub protocol: Protocol,
    pub sites: Vec<SiteReport>,
    pub noise: Option<NoiseSection>,
}

impl ErrorReport {
    pub fn site(&self, bs_id: &str) -> Option<&SiteReport> {
        self.sites.iter().find(|s| s.bs_id == bs_id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// JSON with the metadata block reset; equal for equal experiments.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.metadata = ReportMetadata::default();
        copy.to_json()
    }

    /// Aligned text tables: error order statistics per site and feature
    /// set, then improvement percentages.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let p = &self.protocol;
        let _ = writeln!(
            out,
            "history {} slots, split {}, seeds {:?}, MAPE floor {:e}",
            p.history, p.split, p.seeds, p.mape_floor
        );
        let _ = writeln!(out, "{}", p.seeding);
        if !self.sites.is_empty() {
            out.push('\n');
            render_errors(&mut out, "Prediction errors (normalized units)", &self.sites);
            out.push('\n');
            render_improvements(&mut out, "Improvement (%)", &self.sites);
        }
        if let Some(noise) = &self.noise {
            out.push('\n');
            let title = format!(
                "Prediction errors with flow noise sigma = {} (normalized units)",
                noise.sigma_fraction
            );
            render_errors(&mut out, &title, &noise.sites);
            out.push('\n');
            render_improvements(&mut out, "Improvement with flow noise (%)", &noise.sites);
        }
        out
    }

    /// Plot data for one baseline/enriched pair: `bs_id,metric,min,median,max`.
    pub fn improvement_csv(sites: &[SiteReport], baseline: FeatureSet, enriched: FeatureSet) -> String {
        let mut out = String::from("bs_id,metric,min,median,max\n");
        for site in sites {
            for metric in Metric::ALL {
                let Some(row) = site.improvement(baseline, enriched, metric) else {
                    continue;
                };
                let cell = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    site.bs_id,
                    metric.name(),
                    cell(row.min),
                    cell(row.median),
                    cell(row.max)
                );
            }
        }
        out
    }

    /// Combines reports of the same protocol covering different sites.
    pub fn merge(reports: Vec<ErrorReport>) -> Result<ErrorReport> {
        let mut iter = reports.into_iter();
        let mut merged = iter
            .next()
            .ok_or_else(|| Error::Config("no reports to merge".into()))?;
        merged.metadata = ReportMetadata::default();
        for other in iter {
            let (a, b) = (&merged.protocol, &other.protocol);
            if a.history != b.history {
                return Err(Error::Config(format!(
                    "history length differs between reports ({} vs {})",
                    a.history, b.history
                )));
            }
            if a != b {
                return Err(Error::Config(
                    "reports were produced with different settings".into(),
                ));
            }
            merge_sites(&mut merged.sites, other.sites)?;
            match (&mut merged.noise, other.noise) {
                (None, None) => {}
                (Some(x), Some(y)) if x.sigma_fraction == y.sigma_fraction => {
                    merge_sites(&mut x.sites, y.sites)?;
                }
                _ => {
                    return Err(Error::Config(
                        "reports disagree on the flow-noise experiment".into(),
                    ))
                }
            }
        }
        Ok(merged)
    }
}

fn merge_sites(into: &mut Vec<SiteReport>, from: Vec<SiteReport>) -> Result<()> {
    for site in from {
        match into.iter().find(|s| s.bs_id == site.bs_id) {
            Some(existing) if *existing == site => {}
            Some(_) => {
                return Err(Error::Config(format!(
                    "BS {} has different results in two reports",
                    site.bs_id
                )))
            }
            None => into.push(site),
        }
    }
    Ok(())
}

fn fmt_value(metric: Metric, v: f64) -> String {
    match metric {
        Metric::Mape => format!("{v:.1}"),
        _ => format!("{v:.3}"),
    }
}

fn render_errors(out: &mut String, title: &str, sites: &[SiteReport]) {
    let _ = writeln!(out, "{title}");
    let mut header = format!("{:<12} {:<10}", "BS", "set");
    let mut sub = format!("{:<12} {:<10}", "", "");
    for m in Metric::ALL {
        let _ = write!(header, " | {:^23}", m.name());
        let _ = write!(sub, " | {:>7} {:>7} {:>7}", "min", "mdn", "max");
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{sub}");
    for site in sites {
        for row in &site.rows {
            let label = if row.noisy_flow {
                format!("{}*", row.feature_set)
            } else {
                row.feature_set.to_string()
            };
            let _ = write!(out, "{:<12} {:<10}", site.bs_id, label);
            for m in Metric::ALL {
                match row.summary.as_ref().and_then(|s| m.stats(s)) {
                    Some(st) => {
                        let _ = write!(
                            out,
                            " | {:>7} {:>7} {:>7}",
                            fmt_value(m, st.min),
                            fmt_value(m, st.median),
                            fmt_value(m, st.max)
                        );
                    }
                    None => {
                        let na = if row.applicable { "undef" } else { "n/a" };
                        let _ = write!(out, " | {na:>7} {na:>7} {na:>7}");
                    }
                }
            }
            out.push('\n');
        }
    }
    if sites.iter().any(|s| s.rows.iter().any(|r| r.noisy_flow)) {
        let _ = writeln!(out, "* flow input perturbed by estimation noise");
    }
}

fn render_improvements(out: &mut String, title: &str, sites: &[SiteReport]) {
    let _ = writeln!(out, "{title}");
    let mut header = format!("{:<12} {:<14}", "BS", "pair");
    for m in Metric::ALL {
        let _ = write!(header, " | {:^23}", m.name());
    }
    let _ = writeln!(out, "{header}");
    for site in sites {
        let mut pairs: Vec<(FeatureSet, FeatureSet)> = Vec::new();
        for r in &site.improvements {
            if !pairs.contains(&(r.baseline, r.enriched)) {
                pairs.push((r.baseline, r.enriched));
            }
        }
        for (b, e) in pairs {
            let _ = write!(out, "{:<12} {:<14}", site.bs_id, format!("{b}->{e}"));
            for m in Metric::ALL {
                let row = site.improvement(b, e, m);
                let cell = |s: Stat| {
                    row.and_then(|r| r.get(s))
                        .map(|v| format!("{v:.1}"))
                        .unwrap_or_else(|| "-".into())
                };
                let _ = write!(
                    out,
                    " | {:>7} {:>7} {:>7}",
                    cell(Stat::Min),
                    cell(Stat::Median),
                    cell(Stat::Max)
                );
            }
            out.push('\n');
        }
    }
}
