use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One configured site, as listed in a corridor file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub bs_id: String,
    pub detector_id: String,
    pub range_miles: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSite {
    pub bs_id: String,
    pub range_miles: f64,
    pub detector_id: String,
    /// Order along the corridor; traffic flows from 0 upwards.
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    sites: Vec<CellSite>,
}

impl Corridor {
    pub fn sites(&self) -> &[CellSite] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, position: usize) -> Option<&CellSite> {
        self.sites.get(position)
    }

    pub fn by_bs(&self, bs_id: &str) -> Option<&CellSite> {
        self.sites.iter().find(|s| s.bs_id == bs_id)
    }

    pub fn specs(&self) -> Vec<SiteSpec> {
        self.sites
            .iter()
            .map(|s| SiteSpec {
                bs_id: s.bs_id.clone(),
                detector_id: s.detector_id.clone(),
                range_miles: s.range_miles,
            })
            .collect()
    }

    /// US50 eastbound detectors from Pollock Pines towards South Lake Tahoe,
    /// with each BS range equal to the distance to the next detector.
    pub fn us50_eastbound() -> Corridor {
        const SITES: [(&str, f64); 8] = [
            ("3086071", 7.67),
            ("3086081", 1.62),
            ("320287", 13.27),
            ("320280", 13.41),
            ("317706", 3.89),
            ("3054051", 0.99),
            ("3410061", 3.22),
            ("317715", 1.46),
        ];
        let specs: Vec<SiteSpec> = SITES
            .iter()
            .map(|&(id, range)| SiteSpec {
                bs_id: id.to_string(),
                detector_id: id.to_string(),
                range_miles: range,
            })
            .collect();
        build_corridor(&specs).expect("built-in corridor is valid")
    }
}

/// Builds a corridor from sites listed in travel order.
pub fn build_corridor(specs: &[SiteSpec]) -> Result<Corridor> {
    if specs.is_empty() {
        return Err(Error::Config("corridor needs at least one site".into()));
    }
    let mut detectors = HashSet::new();
    let mut bs_ids = HashSet::new();
    let mut sites = Vec::with_capacity(specs.len());
    for (position, spec) in specs.iter().enumerate() {
        if !(spec.range_miles > 0.0) || !spec.range_miles.is_finite() {
            return Err(Error::Config(format!(
                "site {}: range must be positive, got {}",
                spec.bs_id, spec.range_miles
            )));
        }
        if !detectors.insert(spec.detector_id.as_str()) {
            return Err(Error::Config(format!("duplicate detector {}", spec.detector_id)));
        }
        if !bs_ids.insert(spec.bs_id.as_str()) {
            return Err(Error::Config(format!("duplicate bs_id {}", spec.bs_id)));
        }
        sites.push(CellSite {
            bs_id: spec.bs_id.clone(),
            range_miles: spec.range_miles,
            detector_id: spec.detector_id.clone(),
            position,
        });
    }
    Ok(Corridor { sites })
}
