use std::path::{Path, PathBuf};

use clap::Args;
use nanoflow::config::{
    builtin_24_region_template, builtin_two_region_example, load_region_map, load_scenario_file, ModelParams,
    RegionMap, Scenario,
};

use crate::CliError;

pub const BUILTIN_TWO_REGION: &str = "builtin:two-region";
pub const BUILTIN_24_REGION: &str = "builtin:24-region";

/// Flags shared by every scenario-driven command. Unset flags fall back to
/// the scenario file (if any), then to the two-region example defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// JSON scenario file (region_map_path, event_region, p_det, p_trans, ...)
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Region-map JSON path, or builtin:two-region / builtin:24-region
    #[arg(long)]
    pub map: Option<String>,
    /// Event region id, or "all" for one run per region
    #[arg(long)]
    pub event_region: Option<String>,
    #[arg(long)]
    pub p_det: Option<f64>,
    #[arg(long)]
    pub p_trans: Option<f64>,
    /// Gaussian noise sigma on reported times [s]
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Administration duration [s]
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub max_laps: Option<u32>,
    #[arg(long)]
    pub mass_epsilon: Option<f64>,
    #[arg(long)]
    pub devices: Option<u64>,
    /// Master seed; falls back to $NANOFLOW_SEED, then 0
    #[arg(long, env = "NANOFLOW_SEED")]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Vary one parameter, e.g. p_trans=0.2,0.4,0.6,0.8
    #[arg(long)]
    pub sweep: Option<String>,
}

/// A resolved scenario: everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub map: RegionMap,
    pub map_source: String,
    pub event_regions: Vec<u32>,
    pub params: ModelParams,
    pub device_count: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ScenarioSpec {
    pub fn scenario(&self, event_region: u32) -> Scenario {
        Scenario {
            map: self.map.clone(),
            event_region,
            params: self.params,
            device_count: self.device_count,
            seed: self.seed,
        }
    }

    /// Checks parameters and that the administration can fit one lap.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(CliError::validation)?;
        if self.device_count == 0 {
            return Err(CliError::validation("device count must be >= 1"));
        }
        let min = self.map.min_travel_time();
        if self.params.duration < min {
            return Err(CliError::validation(format!(
                "duration below minimum travel time ({} s < {min} s)",
                self.params.duration
            )));
        }
        Ok(())
    }
}

fn load_map(source: &str, base: Option<&Path>) -> Result<RegionMap, CliError> {
    match source {
        BUILTIN_TWO_REGION => Ok(builtin_two_region_example().0),
        BUILTIN_24_REGION => Ok(builtin_24_region_template()),
        path => {
            let path = match base {
                Some(dir) if Path::new(path).is_relative() => dir.join(path),
                _ => PathBuf::from(path),
            };
            load_region_map(&path).map_err(CliError::validation)
        }
    }
}

fn parse_events(text: &str, map: &RegionMap) -> Result<Vec<u32>, CliError> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(map.ids().collect());
    }
    let id: u32 = text
        .parse()
        .map_err(|_| CliError::validation(format!("event region must be an id or \"all\", got {text:?}")))?;
    if map.index_of(id).is_none() {
        return Err(CliError::validation(format!("event region {id} is not in the map")));
    }
    Ok(vec![id])
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<ScenarioSpec, CliError> {
        let file = self
            .scenario
            .as_ref()
            .map(|p| load_scenario_file(p).map_err(CliError::validation))
            .transpose()?;
        let base = self.scenario.as_ref().and_then(|p| p.parent());

        let map_source = self
            .map
            .clone()
            .or_else(|| file.as_ref().and_then(|f| f.region_map_path.clone()))
            .unwrap_or_else(|| BUILTIN_TWO_REGION.to_string());
        let map = load_map(&map_source, if self.map.is_some() { None } else { base })?;

        let mut params = file.as_ref().map_or_else(|| builtin_two_region_example().1, |f| f.params);
        if let Some(v) = self.p_det {
            params.p_det = v;
        }
        if let Some(v) = self.p_trans {
            params.p_trans = v;
        }
        if let Some(v) = self.noise_sigma {
            params.noise_sigma = v;
        }
        if let Some(v) = self.duration {
            params.duration = v;
        }
        if let Some(v) = self.max_laps {
            params.max_laps = v;
        }
        if let Some(v) = self.mass_epsilon {
            params.mass_epsilon = v;
        }

        let events = match (&self.event_region, &file) {
            (Some(text), _) => parse_events(text, &map)?,
            (None, Some(f)) => parse_events(&f.event_region.to_string(), &map)?,
            (None, None) => vec![map.regions[0].id],
        };

        let spec = ScenarioSpec {
            map,
            map_source,
            event_regions: events,
            params,
            device_count: self.devices.or(file.as_ref().map(|f| f.device_count)).unwrap_or(1000),
            seed: self.seed.or(file.as_ref().map(|f| f.seed)).unwrap_or(0),
            output_dir: self.out.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// One resolved scenario per sweep value (or just one without a sweep),
    /// each with its own output subdirectory.
    pub fn resolve_sweep(&self) -> Result<Vec<(Option<String>, ScenarioSpec)>, CliError> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![(None, self.resolve()?)]);
        };
        let (name, values) = sweep
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("sweep must look like name=v1,v2; got {sweep:?}")))?;
        let values: Vec<f64> = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::validation(format!("sweep values must be numbers: {values:?}")))?;
        let mut out = Vec::new();
        for v in values {
            let mut args = self.clone();
            match name.trim() {
                "p_trans" => args.p_trans = Some(v),
                "p_det" => args.p_det = Some(v),
                "noise_sigma" => args.noise_sigma = Some(v),
                "duration" => args.duration = Some(v),
                other => {
                    return Err(CliError::validation(format!(
                        "cannot sweep {other:?}; use p_trans, p_det, noise_sigma or duration"
                    )))
                }
            }
            let label = format!("{}={v}", name.trim());
            args.out = self.out.join(label.replace('=', "_"));
            out.push((Some(label), args.resolve()?));
        }
        Ok(out)
    }
}
