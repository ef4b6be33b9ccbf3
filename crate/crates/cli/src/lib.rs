//! Command implementations behind the `corrfade` binary.
//!
//! Exit status: 0 on success, 1 when recovery conditions or decoding fail,
//! 2 for malformed or invalid input.

pub mod spec;

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

use corrfade::dof::{
    calibrate_effective_sigma0, db_to_linear, estimate_dof, linear_to_db, run_sweep_records, synthetic_table, Scheme,
    SweepTable,
};
use corrfade::{ConditionFailure, Error};

pub use spec::{parse_grid, ExperimentSpec, Overrides};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Failure(format!("write failed: {e}"))
    }
}

fn core_error(e: Error) -> CliError {
    match e {
        Error::InvalidConfig(_) | Error::InvalidProfile(_) | Error::DimensionMismatch(_) | Error::NonPositiveSnr(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Failure(other.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub profile_id: String,
    pub decoder: String,
    pub passed: bool,
    pub failures: Vec<ConditionFailure>,
    pub notes: Vec<String>,
}

/// Writes the human-readable report to `log` and one JSON object to `data`.
pub fn cmd_check(spec: &ExperimentSpec, data: &mut dyn Write, log: &mut dyn Write) -> Result<bool, CliError> {
    let scheme = spec.scheme()?;
    let report = scheme.check_recovery();
    writeln!(
        log,
        "profile {} (Q = {}, T = {}), decoder {}, n_t = {}, n_r = {}",
        spec.profile_id,
        scheme.profile().rank(),
        scheme.profile().block_len(),
        scheme.kind(),
        scheme.n_t(),
        scheme.n_r()
    )?;
    write!(log, "{report}")?;
    let out = CheckOutput {
        profile_id: spec.profile_id.clone(),
        decoder: scheme.kind().to_string(),
        passed: report.passed,
        failures: report.failures,
        notes: report.notes,
    };
    writeln!(data, "{}", serde_json::to_string(&out).expect("report serializes"))?;
    Ok(out.passed)
}

fn require_conditions(scheme: &Scheme, force: bool, log: &mut dyn Write) -> Result<(), CliError> {
    let report = scheme.check_recovery();
    if report.passed {
        return Ok(());
    }
    write!(log, "{report}")?;
    if force {
        writeln!(log, "continuing because of --force")?;
        Ok(())
    } else {
        Err(CliError::Failure("recovery conditions fail (use --force to run anyway)".into()))
    }
}

fn resolve_sigma0(spec: &ExperimentSpec, scheme: &Scheme, log: &mut dyn Write) -> Result<f64, CliError> {
    if let Some(s) = spec.sigma0 {
        return Ok(s);
    }
    let s = calibrate_effective_sigma0(
        scheme,
        spec.calibration_probes,
        spec.epsilon,
        db_to_linear(spec.calibration_snr_db),
        spec.seed,
    )
    .map_err(core_error)?;
    writeln!(log, "calibrated sigma0 = {s:.6e}")?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub snr_db: f64,
    pub grid: usize,
    pub trials: usize,
    pub block_error_rate: f64,
    pub symbol_error_rate: f64,
    pub decoder_failures: usize,
    pub mean_pivot_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub payload_symbols: usize,
    pub sigma0: f64,
    pub points: Vec<PointSummary>,
}

/// Streams one JSON record per trial to `data`, then a summary to `log`.
/// In noiseless mode any block error is a decoder failure.
pub fn cmd_simulate(
    spec: &ExperimentSpec,
    force: bool,
    data: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<SimulateSummary, CliError> {
    let scheme = spec.scheme()?;
    require_conditions(&scheme, force, log)?;
    let sigma0 = resolve_sigma0(spec, &scheme, log)?;
    let config = spec.dof_config(sigma0)?;
    let (table, records) = run_sweep_records(&config, &scheme, spec.seed, &spec.profile_id).map_err(core_error)?;
    let mut conditions: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for record in &records {
        writeln!(data, "{}", serde_json::to_string(record).expect("record serializes"))?;
        if let Some(c) = record.diagnostics.as_ref().map(|d| d.pivot_condition).filter(|c| c.is_finite()) {
            let entry = conditions.entry(record.stream >> 32).or_default();
            entry.0 += c;
            entry.1 += 1;
        }
    }
    let points: Vec<PointSummary> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| PointSummary {
            snr_db: linear_to_db(row.snr),
            grid: row.grid,
            trials: row.trials,
            block_error_rate: row.block_error_rate,
            symbol_error_rate: row.symbol_error_rate,
            decoder_failures: row.decoder_failures,
            mean_pivot_condition: conditions
                .get(&(i as u64))
                .map_or(f64::NAN, |&(sum, n)| sum / n as f64),
        })
        .collect();
    writeln!(
        log,
        "decoder {}: {} payload symbols per block, sigma0 = {:.6e}{}",
        scheme.kind(),
        scheme.payload_len(),
        sigma0,
        if spec.noiseless { ", noiseless" } else { "" }
    )?;
    for p in &points {
        writeln!(
            log,
            "  {:>6.1} dB  grid {:>7}  trials {:>6}  bler {:.4}  ser {:.4}  failures {}  mean pivot cond {:.3e}",
            p.snr_db, p.grid, p.trials, p.block_error_rate, p.symbol_error_rate, p.decoder_failures, p.mean_pivot_condition
        )?;
    }
    let summary = SimulateSummary {
        payload_symbols: scheme.payload_len(),
        sigma0,
        points,
    };
    if spec.noiseless && table.rows.iter().any(|r| r.block_errors > 0) {
        return Err(CliError::Failure("noiseless trials failed to decode exactly".into()));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub table: SweepTable,
    pub slope: f64,
    /// `(1 - 2 delta) D`.
    pub target: f64,
}

/// Writes the sweep table to `data` and the slope report to `log`.
pub fn cmd_sweep(
    spec: &ExperimentSpec,
    force: bool,
    data: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<SweepOutcome, CliError> {
    let scheme = spec.scheme()?;
    let dims = scheme.payload_len();
    let (table, target) = if spec.synthetic {
        let grid = spec.snr_grid();
        if grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CliError::Usage("snr grid must be finite".into()));
        }
        (synthetic_table(dims, &grid), dims as f64)
    } else {
        require_conditions(&scheme, force, log)?;
        let sigma0 = resolve_sigma0(spec, &scheme, log)?;
        let config = spec.dof_config(sigma0)?;
        let (table, _) = run_sweep_records(&config, &scheme, spec.seed, &spec.profile_id).map_err(core_error)?;
        (table, (1.0 - 2.0 * spec.delta) * dims as f64)
    };
    data.write_all(table.to_csv().as_bytes())?;
    writeln!(log, "decoder {}: D = {dims} payload symbols per block", table.decoder)?;
    let slope = match estimate_dof(&table, spec.error_ceiling) {
        Ok(s) => s,
        Err(e) => {
            writeln!(log, "slope unavailable: {e}")?;
            return Err(CliError::Failure(e.to_string()));
        }
    };
    writeln!(log, "estimated slope: {slope:.4} (target {target:.4}, ratio {:.4})", slope / target)?;
    Ok(SweepOutcome { table, slope, target })
}
