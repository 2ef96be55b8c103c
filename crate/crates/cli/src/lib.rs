//! Scenario files, run orchestration and report output for the
//! `rkhs-observer` command-line tool.

pub mod config;
pub mod output;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rkhs_observer::sim::{integrate, SimOutput};

use config::ScenarioFile;
use output::KeyValues;
use scenario::{build, design_report, BuiltScenario, DesignReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] rkhs_observer::Error),
    #[error("i/o error on {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// 2 for configuration and validation errors, 3 for divergence or a
    /// kinematic singularity during integration, 1 for file system errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Model(rkhs_observer::Error::Divergence { .. } | rkhs_observer::Error::KinematicSingularity { .. }) => 3,
            Self::Model(_) => 2,
            Self::Io { .. } => 1,
        }
    }
}

/// Result of a single simulated scenario.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub built: BuiltScenario,
    pub report: DesignReport,
    pub output: SimOutput,
    pub summary: KeyValues,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Build, simulate and, when `out` is given, write `timeseries.csv`,
/// `summary.txt` and `effective_config.toml` into it.
pub fn run_scenario(file: &ScenarioFile, overrides: &[String], out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let built = build(file)?;
    let report = design_report(&built)?;
    let output = integrate(&built.scenario, &built.design, &built.sim)?;

    let mut summary = KeyValues::default();
    for (i, o) in overrides.iter().enumerate() {
        summary.push(format!("override_{}", i + 1), o.clone());
    }
    summary.push("h", output::num(built.sim.h));
    summary.push("steps", built.sim.steps()?.to_string());
    summary.push("record_stride", built.sim.record_stride.to_string());
    output::design_key_values(&report, &mut summary);
    output::summary_key_values(&output.summary, output.max_delta_norm, &mut summary);

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        if file.output.timeseries {
            output::write_csv(&dir.join("timeseries.csv"), &output.records, file.output.alpha_columns)?;
        }
        write_file(&dir.join("summary.txt"), &summary.render())?;
        write_file(&dir.join("effective_config.toml"), &built.effective.to_toml_string()?)?;
    }
    Ok(RunOutcome {
        built,
        report,
        output,
        summary,
    })
}

/// `run`: load the config with overrides, simulate and write outputs to `out`.
pub fn cmd_run(config: &Path, overrides: &[String], out: &Path) -> Result<RunOutcome, CliError> {
    let file = ScenarioFile::load(config, overrides)?;
    run_scenario(&file, overrides, Some(out))
}

/// `design-report`: design-stage quantities without simulating.
pub fn cmd_design_report(config: &Path, overrides: &[String]) -> Result<(DesignReport, KeyValues), CliError> {
    let file = ScenarioFile::load(config, overrides)?;
    let built = build(&file)?;
    let report = design_report(&built)?;
    let mut kv = KeyValues::default();
    output::design_key_values(&report, &mut kv);
    Ok((report, kv))
}

/// Pseudo-axis that scales the measurement error, its bound and the dead-zone width together.
pub const NOISE_SCALE_AXIS: &str = "noise_scale";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub centers: usize,
    pub sup_power: f64,
    pub d_n: Option<f64>,
    pub ultimate_bound: f64,
    pub t_enter: Option<f64>,
}

fn sweep_overrides(base: &ScenarioFile, overrides: &[String], axis: &str, value: &str) -> Result<Vec<String>, CliError> {
    let mut all = overrides.to_vec();
    if axis == NOISE_SCALE_AXIS {
        let scale: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("noise_scale value `{value}` is not a number")))?;
        all.push(format!("plant.noise_scale={scale:e}"));
        all.push(format!("deadzone.width={:e}", base.deadzone.width * scale));
    } else {
        all.push(format!("{axis}={value}"));
    }
    Ok(all)
}

/// `sweep`: run the scenario once per value of `axis` (an override key or
/// [`NOISE_SCALE_AXIS`]), in parallel, writing each run to `out/run_XXX`
/// and the merged table to `out/sweep.csv` in value order.
pub fn cmd_sweep(
    config: &Path,
    overrides: &[String],
    axis: &str,
    values: &[String],
    out: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let text = fs::read_to_string(config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
    let base = ScenarioFile::from_toml_str(&text, overrides)?;
    let rows: Vec<Result<SweepRow, CliError>> = values
        .par_iter()
        .enumerate()
        .map(|(i, value)| {
            let all = sweep_overrides(&base, overrides, axis, value)?;
            let file = ScenarioFile::from_toml_str(&text, &all)?;
            let run = run_scenario(&file, &all, Some(&out.join(format!("run_{i:03}"))))?;
            Ok(SweepRow {
                value: value.clone(),
                centers: run.report.centers,
                sup_power: run.report.sup_power,
                d_n: run.report.d_n,
                ultimate_bound: run.output.summary.ultimate_bound,
                t_enter: run.output.summary.t_enter,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("value,N,sup_power,d_n,ultimate_bound,t_enter\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.value,
            r.centers,
            output::num(r.sup_power),
            r.d_n.map_or("NaN".into(), output::num),
            output::num(r.ultimate_bound),
            r.t_enter.map_or("not reached".into(), output::num),
        ));
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_file(&out.join("sweep.csv"), &csv)?;
    Ok(rows)
}

/// Path of a scenario bundled with this crate.
pub fn bundled_scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}
