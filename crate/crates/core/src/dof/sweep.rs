//! Monte Carlo SNR sweeps with SNR-scaled QAM and pre-log slope fitting.
//!
//! At each SNR the per-dimension grid spacing is
//! `d_min = 1 / (sigma0 * snr^(1/2 - delta))`, so the codebook rate grows
//! like `D (1 - 2 delta) ln snr` nats while the decision distance shrinks
//! slower than the noise amplitude. The fitted slope of rate against
//! `ln snr` over the rows that decode reliably estimates the pre-log factor.
//!
//! Every trial draws from its own ChaCha stream, `(point << 32) | trial`,
//! under the master seed, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{add_noise, apply_channel, sample_fading};
use crate::dof::jacobian::lower_quantile;
use crate::dof::qam::QamCodebook;
use crate::dof::scheme::Scheme;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::simo::Diagnostics;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofConfig {
    pub delta: f64,
    pub sigma0: f64,
    pub epsilon: f64,
    /// Linear SNR values.
    pub snr_grid: Vec<f64>,
    pub trials_per_point: usize,
    /// Skip the noise; the grid still sizes the codebooks.
    pub noiseless: bool,
}

impl Default for DofConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            sigma0: 1.0,
            epsilon: 0.05,
            snr_grid: Vec::new(),
            trials_per_point: 1000,
            noiseless: false,
        }
    }
}

impl DofConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidConfig(format!("delta = {} not in (0, 1/2)", self.delta)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma0 = {} must be positive", self.sigma0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon = {} not in (0, 1)", self.epsilon)));
        }
        if self.snr_grid.is_empty() || self.snr_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("snr grid must be non-empty, finite and positive".into()));
        }
        if self.trials_per_point == 0 {
            return Err(Error::InvalidConfig("trials_per_point must be positive".into()));
        }
        Ok(())
    }

    /// `1 / (sigma0 snr^(1/2 - delta))`.
    pub fn d_min(&self, snr: f64) -> f64 {
        1.0 / (self.sigma0 * snr.powf(0.5 - self.delta))
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(snr: f64) -> f64 {
    10.0 * snr.log10()
}

/// One end-to-end block: encode, fade, add noise, decode, hard-decide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub stream: u64,
    pub profile_id: String,
    pub decoder: String,
    /// Linear SNR; `None` when noiseless.
    pub snr: Option<f64>,
    pub sent: Vec<usize>,
    /// Empty when the decoder failed.
    pub decided: Vec<usize>,
    pub success: bool,
    pub symbol_errors: usize,
    pub diagnostics: Option<Diagnostics>,
    pub failure: Option<String>,
}

/// Stream id for trial `trial` at grid point `point`.
pub fn trial_stream(point: usize, trial: usize) -> u64 {
    ((point as u64) << 32) | trial as u64
}

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs a single trial. `snr = None` is noiseless.
pub fn run_trial(
    scheme: &Scheme,
    codebook: &QamCodebook,
    snr: Option<f64>,
    seed: u64,
    stream: u64,
    profile_id: &str,
) -> Result<TrialRecord> {
    if codebook.dims() != scheme.payload_len() {
        return Err(Error::DimensionMismatch(format!(
            "codebook has {} dimensions, scheme carries {}",
            codebook.dims(),
            scheme.payload_len()
        )));
    }
    let mut rng = trial_rng(seed, stream);
    let sent = codebook.random_indices(&mut rng);
    let block = scheme.encode(&codebook.encode(&sent))?;
    let fading = sample_fading(scheme.profile(), scheme.n_t(), scheme.n_r(), &mut rng)?;
    let y = apply_channel(&block, &fading)?;
    let y_noisy = add_noise(&y, snr.unwrap_or(f64::INFINITY), &mut rng)?;
    let mut record = TrialRecord {
        seed,
        stream,
        profile_id: profile_id.to_string(),
        decoder: scheme.kind().to_string(),
        snr,
        sent: sent.clone(),
        decided: Vec::new(),
        success: false,
        symbol_errors: sent.len(),
        diagnostics: None,
        failure: None,
    };
    match scheme.decode(&y_noisy) {
        Ok(out) => {
            let decided = codebook.decide(&out.payload);
            record.symbol_errors = decided.iter().zip(&sent).filter(|(a, b)| a != b).count();
            record.success = record.symbol_errors == 0;
            record.decided = decided;
            record.diagnostics = Some(out.diagnostics);
        }
        Err(err) => record.failure = Some(err.to_string()),
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr: f64,
    pub d_min: f64,
    /// Constellation points per complex dimension (0 when the grid is empty).
    pub grid: usize,
    pub block_error_rate: f64,
    pub symbol_error_rate: f64,
    pub rate_bits: f64,
    pub dims: usize,
    pub trials: usize,
    pub block_errors: usize,
    pub decoder_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub decoder: String,
    pub dims: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Delimited text: header `snr,dmin,grid,bler,rate_bits`, one row per
    /// SNR, `\n` line ends.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr,dmin,grid,bler,rate_bits\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.snr, row.d_min, row.grid, row.block_error_rate, row.rate_bits
            ));
        }
        out
    }
}

/// Codebook for one grid point; `None` when `d_min` leaves no points.
pub fn codebook_for(scheme: &Scheme, config: &DofConfig, snr: f64) -> Result<Option<QamCodebook>> {
    let d_min = config.d_min(snr);
    match QamCodebook::new(scheme.payload_len(), d_min, d_min / 2.0, scheme.amplitude()) {
        Ok(cb) => Ok(Some(cb)),
        Err(Error::EmptyCodebook { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs every trial at every grid point. Decoder failures count as block
/// errors; a grid point whose codebook is empty is reported with `grid = 0`
/// and block error rate 1.
pub fn run_sweep_records(
    config: &DofConfig,
    scheme: &Scheme,
    seed: u64,
    profile_id: &str,
) -> Result<(SweepTable, Vec<TrialRecord>)> {
    config.validate()?;
    let dims = scheme.payload_len();
    let mut rows = Vec::with_capacity(config.snr_grid.len());
    let mut records = Vec::new();
    for (point, &snr) in config.snr_grid.iter().enumerate() {
        let d_min = config.d_min(snr);
        let Some(codebook) = codebook_for(scheme, config, snr)? else {
            rows.push(SweepRow {
                snr,
                d_min,
                grid: 0,
                block_error_rate: 1.0,
                symbol_error_rate: 1.0,
                rate_bits: 0.0,
                dims,
                trials: 0,
                block_errors: 0,
                decoder_failures: 0,
            });
            continue;
        };
        let noise = (!config.noiseless).then_some(snr);
        let point_records = (0..config.trials_per_point)
            .into_par_iter()
            .map(|trial| run_trial(scheme, &codebook, noise, seed, trial_stream(point, trial), profile_id))
            .collect::<Result<Vec<_>>>()?;
        let trials = point_records.len();
        let block_errors = point_records.iter().filter(|r| !r.success).count();
        let symbol_errors: usize = point_records.iter().map(|r| r.symbol_errors).sum();
        let decoder_failures = point_records.iter().filter(|r| r.failure.is_some()).count();
        rows.push(SweepRow {
            snr,
            d_min,
            grid: codebook.points_per_dim(),
            block_error_rate: block_errors as f64 / trials as f64,
            symbol_error_rate: symbol_errors as f64 / (trials * dims) as f64,
            rate_bits: codebook.rate_bits(),
            dims,
            trials,
            block_errors,
            decoder_failures,
        });
        records.extend(point_records);
    }
    Ok((
        SweepTable {
            decoder: scheme.kind().to_string(),
            dims,
            rows,
        },
        records,
    ))
}

pub fn run_sweep(config: &DofConfig, scheme: &Scheme, seed: u64) -> Result<SweepTable> {
    run_sweep_records(config, scheme, seed, "profile").map(|(table, _)| table)
}

/// Self-test table that bypasses the channel: `grid = snr` points per
/// dimension, so the rate is exactly `dims ln snr` nats.
pub fn synthetic_table(dims: usize, snr_grid: &[f64]) -> SweepTable {
    let rows = snr_grid
        .iter()
        .map(|&snr| SweepRow {
            snr,
            d_min: f64::NAN,
            grid: snr.round() as usize,
            block_error_rate: 0.0,
            symbol_error_rate: 0.0,
            rate_bits: dims as f64 * snr.log2(),
            dims,
            trials: 0,
            block_errors: 0,
            decoder_failures: 0,
        })
        .collect();
    SweepTable {
        decoder: "synthetic".into(),
        dims,
        rows,
    }
}

/// Least-squares slope of rate (nats) against `ln snr` over the rows with
/// block error rate at most `error_ceiling` and a non-empty codebook.
pub fn estimate_dof(table: &SweepTable, error_ceiling: f64) -> Result<f64> {
    let points: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.grid > 0 && r.block_error_rate <= error_ceiling)
        .map(|r| (r.snr.ln(), r.rate_bits * std::f64::consts::LN_2))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            found: points.len(),
            needed: 3,
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidConfig("qualifying points share a single snr".into()));
    }
    Ok(sxy / sxx)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// End-to-end calibration of `sigma0` for sweeps.
///
/// At `reference_snr` the largest per-symbol decoding error, scaled by
/// `sqrt(snr)`, measures how much the fading, subspace estimation and
/// canonical inversion amplify unit receiver noise. With `a` the
/// `(1 - epsilon)`-quantile of that amplification, `sigma0 = 1 / (2 a)`
/// puts the decision half-distance `d_min / 2` at `a snr^delta / sqrt(snr)`,
/// above the typical error for a `1 - epsilon` fraction of blocks at every
/// grid point. Decoder failures count as unbounded amplification.
pub fn calibrate_effective_sigma0(
    scheme: &Scheme,
    n_probe: usize,
    epsilon: f64,
    reference_snr: f64,
    seed: u64,
) -> Result<f64> {
    if n_probe == 0 || !(epsilon > 0.0 && epsilon < 1.0) || !(reference_snr > 0.0) {
        return Err(Error::InvalidConfig("need n_probe > 0, 0 < epsilon < 1, snr > 0".into()));
    }
    let amp = scheme.amplitude();
    let d = scheme.payload_len();
    let amplification: Vec<f64> = (0..n_probe)
        .into_par_iter()
        .map(|probe| {
            let mut rng = trial_rng(seed, probe as u64);
            let payload: Vec<C64> = (0..d)
                .map(|_| C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp)))
                .collect();
            let mut run = || -> Result<f64> {
                let block = scheme.encode(&payload)?;
                let fading = sample_fading(scheme.profile(), scheme.n_t(), scheme.n_r(), &mut rng)?;
                let y = add_noise(&apply_channel(&block, &fading)?, reference_snr, &mut rng)?;
                let out = scheme.decode(&y)?;
                let worst = out
                    .payload
                    .iter()
                    .zip(&payload)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                Ok(worst * reference_snr.sqrt())
            };
            run().unwrap_or(f64::INFINITY)
        })
        .collect();
    // (1 - epsilon) upper quantile of the amplification
    let a = lower_quantile(&amplification, 1.0 - epsilon);
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::PremiseViolated {
            rate: amplification.iter().filter(|v| !v.is_finite()).count() as f64 / n_probe as f64,
            epsilon,
        });
    }
    Ok(1.0 / (2.0 * a))
}
