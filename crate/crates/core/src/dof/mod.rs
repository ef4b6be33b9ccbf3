//! Degrees-of-freedom harness: SNR-scaled QAM, Monte Carlo sweeps and
//! pre-log slope estimation, with a pilot-based coherent baseline.

pub mod baseline;
pub mod jacobian;
pub mod qam;
pub mod scheme;
pub mod sweep;

pub use baseline::{baseline_training_decoder, check_recovery_conditions_baseline, BaselineDecoder};
pub use jacobian::{calibrate_sigma0, calibrate_sigma0_with, complex_jacobian, Sigma0Calibration};
pub use qam::{qam_codebook, QamCodebook};
pub use scheme::{check_regime, DecoderKind, Scheme, SchemeDecoded, SchemeOptions};
pub use sweep::{
    calibrate_effective_sigma0, db_to_linear, estimate_dof, linear_to_db, run_sweep, run_sweep_records, run_trial,
    synthetic_table,
    wilson_interval, DofConfig, SweepRow, SweepTable, TrialRecord,
};
