use std::fs;
use std::path::Path;

use roadcell::cellgen::{write_call_log, write_cell_csv};
use roadcell::evalbench::{run_study, ErrorReport, IMPROVEMENT_PAIRS, NOISE_PAIRS};
use roadcell::road_data::{
    align_calendars, lag_align, parse_road_csv, synth_corridor, validate_and_fill_with,
    write_road_csv, Corridor, RoadSeries, SiteSpec, ValidationConfig, ValidationReport,
};
use roadcell::{generate, Error, GenParams, Scenario};
use serde_json::json;

use crate::config::{
    load_corridor, parse_feature_sets, ExperimentConfig, Resolved, RoadSource, SyntheticRoad,
};
use crate::error::CliError;
use crate::{GenerateArgs, IngestArgs, ReportArgs, RunArgs, SourceArgs, SynthArgs};

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_manifest(out: &Path, manifest: serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&manifest).map_err(roadcell::Error::from)?;
    text.push('\n');
    write_file(&out.join("manifest.json"), text)
}

type LoadedRoad = (Vec<RoadSeries>, Vec<(String, ValidationReport)>);

/// Loads every site's detector file, fills short gaps, drops days with
/// long gaps, and keeps the days all detectors share.
pub fn load_road_dir(
    corridor: &Corridor,
    dir: &Path,
    cfg: ValidationConfig,
) -> Result<LoadedRoad> {
    let mut series = Vec::new();
    let mut reports = Vec::new();
    for site in corridor.sites() {
        let path = dir.join(format!("{}.csv", site.detector_id));
        if !path.is_file() {
            return Err(Error::UnknownDetector(site.detector_id.clone())
                .context(format!("no road file {}", path.display()))
                .into());
        }
        let raw = parse_road_csv(&path, &site.detector_id)?;
        let (filled, report) = validate_and_fill_with(&raw, &cfg)
            .map_err(|e| e.context(format!("validating {}", path.display())))?;
        series.push(filled);
        reports.push((site.detector_id.clone(), report));
    }
    Ok((align_calendars(&series)?, reports))
}

fn load_road(corridor: &Corridor, source: &RoadSource) -> Result<Vec<RoadSeries>> {
    match source {
        RoadSource::Dir(dir) => Ok(load_road_dir(corridor, dir, ValidationConfig::default())?.0),
        RoadSource::Synthetic(s) => Ok(synth_corridor(corridor, &s.profile(), s.weeks, s.seed)?),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn print_road_summary(series: &RoadSeries, path: &Path) {
    println!(
        "{}: {} slots, mean flow {:.1} veh/slot, mean speed {:.1} mph -> {}",
        series.detector_id,
        series.len(),
        mean(series.flows().into_iter().map(f64::from)),
        mean(series.speeds().into_iter()),
        path.display()
    );
}

pub fn synth_road(args: &SynthArgs) -> Result<()> {
    if args.weeks == 0 {
        return Err(CliError::Usage("--weeks must be at least 1".into()));
    }
    let corridor = match &args.corridor {
        Some(path) => load_corridor(path)?,
        None => {
            if args.sites == 0 {
                return Err(CliError::Usage("--sites must be at least 1".into()));
            }
            let specs: Vec<SiteSpec> = (0..args.sites)
                .map(|k| SiteSpec {
                    bs_id: format!("bs{k}"),
                    detector_id: format!("det{k}"),
                    range_miles: 1.0,
                })
                .collect();
            roadcell::road_data::build_corridor(&specs)?
        }
    };
    let synthetic = SyntheticRoad {
        weeks: args.weeks,
        seed: args.seed,
        profile: args.profile,
        flow: args.flow,
        speed: args.speed,
    };
    let series = synth_corridor(&corridor, &synthetic.profile(), args.weeks, args.seed)?;
    create_dir(&args.out)?;
    for s in &series {
        let path = args.out.join(format!("{}.csv", s.detector_id));
        write_road_csv(s, create_file(&path)?)?;
        print_road_summary(s, &path);
    }
    Ok(())
}

/// Corridor and road source from `--config`, overridden by explicit flags.
fn resolve_source(src: &SourceArgs) -> Result<(Corridor, RoadSource, Option<Resolved>)> {
    let resolved = src.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let corridor_path = src
        .corridor
        .clone()
        .or_else(|| resolved.as_ref().map(|r| r.config.corridor.clone()))
        .ok_or_else(|| CliError::Usage("give --corridor or --config".into()))?;
    let road = match (&src.road_dir, &resolved) {
        (Some(dir), _) => RoadSource::Dir(dir.clone()),
        (None, Some(r)) => r.config.road.clone(),
        (None, None) => return Err(CliError::Usage("give --road-dir or --config".into())),
    };
    Ok((load_corridor(&corridor_path)?, road, resolved))
}

pub fn ingest_validate(args: &IngestArgs) -> Result<()> {
    let (corridor, road, _) = resolve_source(&args.source)?;
    let RoadSource::Dir(dir) = road else {
        return Err(CliError::Usage("ingest-validate needs a road data directory".into()));
    };
    let cfg = ValidationConfig { max_gap: args.max_gap };
    let (series, reports) = load_road_dir(&corridor, &dir, cfg)?;
    for ((id, report), s) in reports.iter().zip(&series) {
        println!(
            "{id}: {} slots after alignment, {} filled, {} days excluded",
            s.len(),
            report.filled.len(),
            report.excluded_days.len()
        );
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        for s in &series {
            write_road_csv(s, create_file(&out.join(format!("{}.csv", s.detector_id)))?)?;
        }
        let map: serde_json::Map<String, serde_json::Value> = reports
            .iter()
            .map(|(id, r)| Ok((id.clone(), serde_json::to_value(r).map_err(Error::from)?)))
            .collect::<Result<_>>()?;
        let mut text = serde_json::to_string_pretty(&map).map_err(Error::from)?;
        text.push('\n');
        write_file(&out.join("validation.json"), text)?;
    }
    Ok(())
}

pub fn generate_cells(args: &GenerateArgs) -> Result<()> {
    let (corridor, road_source, resolved) = resolve_source(&args.source)?;
    let mut defaults = Vec::new();
    let base = match &resolved {
        Some(r) => r.config.generation.clone(),
        None => {
            defaults.push("generation".to_string());
            GenParams::default()
        }
    };
    let seed = match (args.seed, &resolved) {
        (Some(s), _) => s,
        (None, Some(r)) => {
            defaults.push("seed (first configured seed)".to_string());
            r.config.seeds.first().copied().unwrap_or(0)
        }
        (None, None) => {
            defaults.push("seed".to_string());
            0
        }
    };
    let params = base.with_seed(seed);
    let road = load_road(&corridor, &road_source)?;
    let lagged = road.iter().map(lag_align).collect::<roadcell::Result<Vec<_>>>()?;
    let generated = generate(&corridor, &lagged, &params)?;

    let cells_dir = args.out.join("cells");
    create_dir(&cells_dir)?;
    for cell in &generated.cells {
        let path = cells_dir.join(format!("{}.csv", cell.bs_id));
        write_cell_csv(cell, create_file(&path)?)?;
        println!(
            "{}: {} slots, {} new, {} handover -> {}",
            cell.bs_id,
            cell.len(),
            cell.new_calls.iter().map(|&v| u64::from(v)).sum::<u64>(),
            cell.handover_calls.iter().map(|&v| u64::from(v)).sum::<u64>(),
            path.display()
        );
    }
    if !args.no_call_log {
        write_call_log(&generated.calls, create_file(&args.out.join("calls.jsonl"))?)?;
    }
    write_manifest(
        &args.out,
        json!({
            "command": "generate",
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_at": now(),
            "corridor": corridor.specs(),
            "road": road_source,
            "generation": params,
            "defaults_applied": defaults,
            "calls": generated.calls.len(),
        }),
    )
}

/// Feature sets, seeds, noise and output directory after command-line overrides.
fn apply_overrides(resolved: &mut Resolved, args: &RunArgs) -> Result<Vec<String>> {
    let mut overrides = Vec::new();
    let cfg = &mut resolved.config;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
        overrides.push("seeds".to_string());
    }
    if let Some(sets) = &args.feature_sets {
        cfg.feature_sets = parse_feature_sets(sets)?;
        overrides.push("feature_sets".to_string());
    }
    if let Some(noise) = args.noise {
        cfg.noise = (noise > 0.0).then_some(noise);
        overrides.push("noise".to_string());
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
        overrides.push("out".to_string());
    }
    resolved.defaults_applied.retain(|d| !overrides.contains(d));
    Ok(overrides)
}

pub fn run(args: &RunArgs) -> Result<()> {
    let mut resolved = ExperimentConfig::load(&args.config)?;
    let overrides = apply_overrides(&mut resolved, args)?;
    let cfg = &resolved.config;
    let corridor = load_corridor(&cfg.corridor)?;
    let road = load_road(&corridor, &cfg.road)?;

    let mut scenario = Scenario::new(corridor, road);
    scenario.generation = cfg.generation.clone();
    scenario.training = cfg.training.clone();
    scenario.feature_sets = cfg.feature_sets.clone();
    scenario.seeds = cfg.seeds.clone();
    scenario.split = cfg.split;
    scenario.history = cfg.history;
    scenario.mape_floor = cfg.mape_floor;

    let (mut report, trained) = run_study(&scenario, cfg.noise)?;
    let started = now();
    report.metadata.generated_at = Some(started.clone());

    create_dir(&cfg.out)?;
    let outputs = write_report_files(&cfg.out, &report)?;
    write_manifest(
        &cfg.out,
        json!({
            "command": "run",
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_at": started,
            "config_file": args.config,
            "config": cfg,
            "corridor": scenario.corridor.specs(),
            "defaults_applied": resolved.defaults_applied,
            "cli_overrides": overrides,
            "models_trained": trained,
            "outputs": outputs,
        }),
    )?;
    print!("{}", report.render_text());
    Ok(())
}

fn pair_file(prefix: &str, b: impl std::fmt::Display, e: impl std::fmt::Display) -> String {
    format!("{prefix}improvement_{b}_{e}.csv")
}

/// Writes the JSON and text reports plus one plot-data CSV per pair.
fn write_report_files(out: &Path, report: &ErrorReport) -> Result<Vec<String>> {
    let mut written = vec!["report.json".to_string(), "report.txt".to_string()];
    write_file(&out.join("report.json"), report.to_json()?)?;
    write_file(&out.join("report.txt"), report.render_text())?;
    let has_pair = |sites: &[roadcell::evalbench::SiteReport], b, e| {
        sites.iter().any(|s| s.improvements.iter().any(|r| r.baseline == b && r.enriched == e))
    };
    for (b, e) in IMPROVEMENT_PAIRS {
        if has_pair(&report.sites, b, e) {
            let name = pair_file("", b, e);
            write_file(&out.join(&name), ErrorReport::improvement_csv(&report.sites, b, e))?;
            written.push(name);
        }
    }
    if let Some(noise) = &report.noise {
        for (b, e) in NOISE_PAIRS {
            if has_pair(&noise.sites, b, e) {
                let name = pair_file("noise_", b, e);
                write_file(&out.join(&name), ErrorReport::improvement_csv(&noise.sites, b, e))?;
                written.push(name);
            }
        }
    }
    Ok(written)
}

pub fn read_report(dir: &Path) -> Result<ErrorReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    ErrorReport::from_json(&text).map_err(|e| e.context(path.display().to_string()).into())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let reports = args.dirs.iter().map(|d| read_report(d)).collect::<Result<Vec<_>>>()?;
    let merged = ErrorReport::merge(reports).map_err(|e| match e {
        Error::Config(msg) => CliError::Usage(format!("cannot merge reports: {msg}")),
        other => other.into(),
    })?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        let outputs = write_report_files(out, &merged)?;
        write_manifest(
            out,
            json!({
                "command": "report",
                "tool_version": env!("CARGO_PKG_VERSION"),
                "started_at": now(),
                "sources": args.dirs,
                "outputs": outputs,
            }),
        )?;
    }
    print!("{}", merged.render_text());
    Ok(())
}

