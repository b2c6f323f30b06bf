use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use nanoflow::analytic::{collapse_pmf, enumerate_pmf, write_bar_chart, write_pmf_csv, write_pmf_json, Pmf};
use nanoflow::config::{save_region_map, ModelParams, RegionMap, ScenarioFile, SCHEMA_VERSION};
use nanoflow::sim::{empirical_pmf, read_dataset, simulate_population, write_dataset, Dataset, SimError};
use nanoflow::stats::{
    compare_datasets, compare_with_model, pmf_mse, CompareOptions, ComparisonReport, EcdfMetric, StatsError,
};

use crate::scenario::ScenarioSpec;
use crate::CliError;

/// Region map written next to every run; `scenario_region<id>.json`
/// files reference it and replay the run through `--scenario`.
const REPLAY_MAP: &str = "region_map.json";

/// Time tolerance used to merge analytic atoms for output.
const COLLAPSE_TOLERANCE: f64 = 1e-9;

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::validation(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_error(path))?))
}

fn warn_placeholder(map: &RegionMap) {
    if map.placeholder {
        eprintln!(
            "warning: region map is an uncalibrated template (placeholder travel times and probabilities); \
             results do not describe real physiology"
        );
    }
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    command: &'a str,
    map_source: &'a str,
    map_fingerprint: String,
    map: &'a RegionMap,
    event_regions: &'a [u32],
    params: &'a ModelParams,
    device_count: u64,
    seed: u64,
    extra: T,
}

fn write_run_record<T: Serialize>(spec: &ScenarioSpec, command: &str, extra: T) -> Result<(), CliError> {
    let path = spec.output_dir.join("run.json");
    let record = RunRecord {
        command,
        map_source: &spec.map_source,
        map_fingerprint: spec.map.fingerprint(),
        map: &spec.map,
        event_regions: &spec.event_regions,
        params: &spec.params,
        device_count: spec.device_count,
        seed: spec.seed,
        extra,
    };
    serde_json::to_writer_pretty(create(&path)?, &record).map_err(CliError::validation)?;

    save_region_map(&spec.map, spec.output_dir.join(REPLAY_MAP)).map_err(CliError::validation)?;
    for &event_region in &spec.event_regions {
        let replay = ScenarioFile {
            schema_version: SCHEMA_VERSION,
            region_map_path: Some(REPLAY_MAP.to_string()),
            event_region,
            params: spec.params,
            device_count: spec.device_count,
            seed: spec.seed,
        };
        let path = spec.output_dir.join(format!("scenario_region{event_region}.json"));
        serde_json::to_writer_pretty(create(&path)?, &replay).map_err(CliError::validation)?;
    }
    Ok(())
}

/// Retained mass below which the model is flagged as over-truncated.
const LOW_RETAINED_MASS: f64 = 0.99;

fn model(spec: &ScenarioSpec, event_region: u32) -> Result<Pmf, CliError> {
    checked_model(&spec.map, event_region, &spec.params)
}

fn checked_model(map: &RegionMap, event_region: u32, params: &ModelParams) -> Result<Pmf, CliError> {
    let pmf = enumerate_pmf(map, event_region, params).map_err(CliError::validation)?;
    if pmf.retained_mass() < LOW_RETAINED_MASS {
        eprintln!(
            "warning: analytic model for region {event_region} retains {:.4} of the mass; raise --max-laps or --duration",
            pmf.retained_mass()
        );
    }
    Ok(pmf)
}

/// Writes the collapsed PMF of every selected event region as
/// `pmf_region<id>.csv`, `.json` and `_bars.dat`. Returns the written paths.
pub fn cmd_dist(spec: &ScenarioSpec) -> Result<Vec<PathBuf>, CliError> {
    warn_placeholder(&spec.map);
    let mut written = Vec::new();
    for &event in &spec.event_regions {
        let pmf = collapse_pmf(&model(spec, event)?, COLLAPSE_TOLERANCE);
        let stem = spec.output_dir.join(format!("pmf_region{event}"));
        let csv = stem.with_extension("csv");
        let json = stem.with_extension("json");
        let bars = spec.output_dir.join(format!("pmf_region{event}_bars.dat"));
        write_pmf_csv(&pmf, create(&csv)?).map_err(CliError::validation)?;
        write_pmf_json(&pmf, create(&json)?).map_err(CliError::validation)?;
        write_bar_chart(&pmf, COLLAPSE_TOLERANCE, create(&bars)?).map_err(CliError::validation)?;
        written.extend([csv, json, bars]);
    }
    write_run_record(spec, "dist", ())?;
    Ok(written)
}

fn simulate(spec: &ScenarioSpec, event_region: u32) -> Result<Dataset, CliError> {
    simulate_population(&spec.scenario(event_region)).map_err(CliError::validation)
}

/// Simulates every selected event region into `dataset_region<id>.csv` plus
/// sidecar. Returns `(path, record count)` per region.
pub fn cmd_simulate(spec: &ScenarioSpec) -> Result<Vec<(PathBuf, usize)>, CliError> {
    warn_placeholder(&spec.map);
    let mut out = Vec::new();
    for &event in &spec.event_regions {
        let ds = simulate(spec, event)?;
        let path = spec.output_dir.join(format!("dataset_region{event}.csv"));
        create(&path)?;
        write_dataset(&ds, &path).map_err(CliError::validation)?;
        out.push((path, ds.len()));
    }
    write_run_record(spec, "simulate", ())?;
    Ok(out)
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Dataset CSV, or a directory of dataset CSVs (one per event region)
    pub dataset_a: Option<PathBuf>,
    /// Second dataset CSV or directory; omit with --analytic
    pub dataset_b: Option<PathBuf>,
    /// Compare against samples drawn from the analytic model
    #[arg(long)]
    pub analytic: bool,
    /// Mann-Whitney significance level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Clamp for bit ratios in the KL divergence
    #[arg(long, default_value_t = 1e-6)]
    pub kl_eps: f64,
    /// ECDF distance averaged in the summary
    #[arg(long, value_enum, default_value = "max-vertical")]
    pub ecdf_metric: EcdfMetricArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EcdfMetricArg {
    MaxVertical,
    SquaredArea,
}

impl From<EcdfMetricArg> for EcdfMetric {
    fn from(v: EcdfMetricArg) -> Self {
        match v {
            EcdfMetricArg::MaxVertical => EcdfMetric::MaxVertical,
            EcdfMetricArg::SquaredArea => EcdfMetric::SquaredArea,
        }
    }
}

const DATASET_HEADER: &str = "device_id,timestamp_s,iteration_time_s,bit";

fn is_dataset_csv(path: &Path) -> bool {
    File::open(path)
        .ok()
        .and_then(|f| std::io::BufRead::lines(std::io::BufReader::new(f)).next())
        .and_then(Result::ok)
        .is_some_and(|line| line.trim_end() == DATASET_HEADER)
}

fn load_datasets(path: &Path) -> Result<Vec<Dataset>, CliError> {
    let paths = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_error(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv") && p.with_extension("json").exists())
            .filter(|p| is_dataset_csv(p))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if paths.is_empty() {
        return Err(CliError::validation(format!("no datasets found in {}", path.display())));
    }
    paths
        .iter()
        .map(|p| {
            read_dataset(p).map_err(|e| match e {
                SimError::Metadata(_) => CliError::incompatible(e),
                other => CliError::validation(other),
            })
        })
        .collect()
}

fn stats_error(e: StatsError) -> CliError {
    match e {
        StatsError::ScenarioMismatch(_) | StatsError::InconsistentLattice { .. } | StatsError::DuplicateRegion(_) => {
            CliError::incompatible(e)
        }
        other => CliError::validation(other),
    }
}

fn model_for(datasets: &[Dataset]) -> Result<Vec<Pmf>, CliError> {
    datasets
        .iter()
        .map(|d| checked_model(&d.scenario.map, d.scenario.event_region, &d.scenario.params))
        .collect()
}

fn report_csv(report: &ComparisonReport, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header = [
        "region_id",
        "records_a",
        "records_b",
        "mw_u",
        "mw_p_value",
        "mw_accepted",
        "ecdf_max_distance",
        "ecdf_squared_area",
        "kl_bit_divergence",
        "bit_ratio_a",
        "bit_ratio_b",
        "missing",
    ];
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut write = || -> Result<(), csv::Error> {
        w.write_record(header)?;
        for r in report.per_region.values() {
            w.write_record([
                r.region_id.to_string(),
                r.records_a.to_string(),
                r.records_b.to_string(),
                opt(r.mann_whitney.map(|m| m.u_statistic)),
                opt(r.mw_p_value),
                r.mw_accepted.to_string(),
                opt(r.ecdf_max_distance),
                opt(r.ecdf_squared_area),
                opt(r.kl_bit_divergence),
                opt(r.bit_ratio_a),
                opt(r.bit_ratio_b),
                r.missing
                    .map(|m| format!("{m:?}").to_lowercase())
                    .unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(CliError::validation)
}

fn write_report(report: &ComparisonReport, dir: &Path) -> Result<(), CliError> {
    let json = dir.join("report.json");
    serde_json::to_writer_pretty(create(&json)?, report).map_err(CliError::validation)?;
    report_csv(report, &dir.join("report.csv"))
}

/// Compares two dataset sets, a dataset set against the model, or (with
/// `--analytic` and no paths) freshly simulated data against the model for
/// every scenario in `specs`. Each report lands in its scenario's output
/// directory (`specs[0]`'s when paths are given).
pub fn cmd_compare(args: &CompareArgs, specs: &[ScenarioSpec]) -> Result<Vec<ComparisonReport>, CliError> {
    let opts = CompareOptions {
        alpha: args.alpha,
        smoothing_eps: args.kl_eps,
        ecdf_metric: args.ecdf_metric.into(),
    };
    if !(0.0..=1.0).contains(&opts.alpha) || !(0.0..0.5).contains(&opts.smoothing_eps) {
        return Err(CliError::validation("alpha must be in [0,1] and kl-eps in [0,0.5)"));
    }
    let first = specs.first().ok_or_else(|| CliError::validation("no scenario"))?;

    match (&args.dataset_a, &args.dataset_b) {
        (Some(a), Some(b)) => {
            if args.analytic {
                return Err(CliError::validation("--analytic takes at most one dataset path"));
            }
            let (a, b) = (load_datasets(a)?, load_datasets(b)?);
            let report = compare_datasets(&a, &b, &opts).map_err(stats_error)?;
            write_report(&report, &first.output_dir)?;
            Ok(vec![report])
        }
        (Some(a), None) => {
            if !args.analytic {
                return Err(CliError::validation("give two datasets, or one with --analytic"));
            }
            let a = load_datasets(a)?;
            let report = compare_with_model(&a, &model_for(&a)?, first.seed, &opts).map_err(stats_error)?;
            write_report(&report, &first.output_dir)?;
            Ok(vec![report])
        }
        (None, _) => {
            if !args.analytic {
                return Err(CliError::validation("give dataset paths, or --analytic to simulate from the scenario"));
            }
            let mut reports = Vec::new();
            for spec in specs {
                warn_placeholder(&spec.map);
                let datasets: Vec<Dataset> = spec
                    .event_regions
                    .iter()
                    .map(|&e| simulate(spec, e))
                    .collect::<Result<_, _>>()?;
                let pmfs: Vec<Pmf> = spec
                    .event_regions
                    .iter()
                    .map(|&e| model(spec, e))
                    .collect::<Result<_, _>>()?;
                let report = compare_with_model(&datasets, &pmfs, spec.seed, &opts).map_err(stats_error)?;
                write_report(&report, &spec.output_dir)?;
                write_run_record(spec, "compare", opts)?;
                reports.push(report);
            }
            Ok(reports)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub devices: u64,
    pub mse: f64,
}

/// Binning tolerance for comparing noisy data with lattice times.
pub fn default_time_tolerance(params: &ModelParams) -> f64 {
    if params.noise_sigma > 0.0 {
        3.0 * params.noise_sigma
    } else {
        1e-6
    }
}

/// For each device count in `ladder`, simulates the scenario and computes
/// the MSE of the binned frequencies against the analytic PMF. Writes
/// `converge_region<id>.csv` (`devices,mse`) per event region.
pub fn cmd_converge(
    spec: &ScenarioSpec,
    ladder: &[u64],
    time_tolerance: Option<f64>,
) -> Result<Vec<(u32, Vec<ConvergeRow>)>, CliError> {
    if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::validation("device ladder must be non-empty, positive and strictly increasing"));
    }
    warn_placeholder(&spec.map);
    let tol = time_tolerance.unwrap_or_else(|| default_time_tolerance(&spec.params));
    let mut out = Vec::new();
    for &event in &spec.event_regions {
        let pmf = model(spec, event)?;
        let mut rows = Vec::new();
        for &devices in ladder {
            let scenario = nanoflow::Scenario {
                device_count: devices,
                ..spec.scenario(event)
            };
            let ds = simulate_population(&scenario).map_err(CliError::validation)?;
            let mse = if ds.is_empty() {
                f64::NAN
            } else {
                let emp = empirical_pmf(&ds, &spec.map, tol).map_err(CliError::validation)?;
                pmf_mse(&emp, &pmf, tol).map_err(stats_error)?
            };
            rows.push(ConvergeRow { devices, mse });
        }
        let path = spec.output_dir.join(format!("converge_region{event}.csv"));
        let mut w = csv::Writer::from_writer(create(&path)?);
        for r in &rows {
            w.serialize(r).map_err(CliError::validation)?;
        }
        w.flush().map_err(io_error(&path))?;
        out.push((event, rows));
    }
    write_run_record(spec, "converge", serde_json::json!({ "ladder": ladder, "time_tolerance": tol }))?;
    Ok(out)
}
