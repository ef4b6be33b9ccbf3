//! Experiment description: a flat TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use corrfade::dof::{db_to_linear, DecoderKind, DofConfig, Scheme, SchemeOptions};
use corrfade::CorrelationProfile;

use crate::CliError;

/// Matrix literal: rows of `[re, im]` pairs.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Inline `Q x T` whitening matrix.
    pub profile: Option<MatrixLiteral>,
    /// File holding `profile = [...]`, relative to the spec file.
    pub profile_file: Option<PathBuf>,
    #[serde(default = "default_profile_id")]
    pub profile_id: String,
    #[serde(default = "one")]
    pub n_t: usize,
    pub n_r: usize,
    /// Optional cross-checks against the profile shape.
    #[serde(rename = "T")]
    pub block_len: Option<usize>,
    #[serde(rename = "Q")]
    pub rank: Option<usize>,
    #[serde(default = "default_decoder")]
    pub decoder: DecoderKind,
    pub pilots: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epsilon")]
    pub error_ceiling: f64,
    /// Calibrated end to end when absent.
    pub sigma0: Option<f64>,
    #[serde(default = "default_probes")]
    pub calibration_probes: usize,
    #[serde(default = "default_reference_db")]
    pub calibration_snr_db: f64,
    #[serde(default = "default_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noiseless: bool,
    /// Sweep self-test that skips the channel.
    #[serde(default)]
    pub synthetic: bool,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_profile_id() -> String {
    "profile".into()
}
fn one() -> usize {
    1
}
fn default_decoder() -> DecoderKind {
    DecoderKind::Simo
}
fn default_delta() -> f64 {
    0.05
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_probes() -> usize {
    2000
}
fn default_reference_db() -> f64 {
    80.0
}
fn default_grid() -> Vec<f64> {
    vec![60.0]
}
fn default_trials() -> usize {
    100
}

#[derive(Deserialize)]
struct ProfileFile {
    profile: MatrixLiteral,
}

/// Values given on the command line win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub decoder: Option<DecoderKind>,
    pub noiseless: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("malformed spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut spec = Self::parse(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(out) = &spec.out {
            if out.is_relative() {
                spec.out = Some(spec.base_dir.join(out));
            }
        }
        Ok(spec)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(trials) = o.trials {
            self.trials = trials;
        }
        if let Some(grid) = &o.snr_grid_db {
            self.snr_grid_db = grid.clone();
        }
        if let Some(kind) = o.decoder {
            self.decoder = kind;
        }
        self.noiseless |= o.noiseless;
        if o.out.is_some() {
            self.out = o.out.clone();
        }
    }

    pub fn profile(&self) -> Result<CorrelationProfile, CliError> {
        let literal = match (&self.profile, &self.profile_file) {
            (Some(p), None) => p.clone(),
            (None, Some(file)) => {
                let path = self.base_dir.join(file);
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<ProfileFile>(&text)
                    .map_err(|e| CliError::Usage(format!("malformed profile file: {e}")))?
                    .profile
            }
            _ => return Err(CliError::Usage("give exactly one of profile and profile_file".into())),
        };
        let profile = CorrelationProfile::from_pairs(&literal).map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(t) = self.block_len {
            if t != profile.block_len() {
                return Err(CliError::Usage(format!("T = {t} but the profile has {} columns", profile.block_len())));
            }
        }
        if let Some(q) = self.rank {
            if q != profile.rank() {
                return Err(CliError::Usage(format!("Q = {q} but the profile has {} rows", profile.rank())));
            }
        }
        Ok(profile)
    }

    /// Builds the scheme; regime violations are validation errors.
    pub fn scheme(&self) -> Result<Scheme, CliError> {
        let options = SchemeOptions {
            pilots: self.pilots,
            ..Default::default()
        };
        Scheme::new(self.decoder, self.profile()?, self.n_t, self.n_r, options)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        self.snr_grid_db.iter().map(|&db| db_to_linear(db)).collect()
    }

    /// Sweep configuration with a known `sigma0`.
    pub fn dof_config(&self, sigma0: f64) -> Result<DofConfig, CliError> {
        let config = DofConfig {
            delta: self.delta,
            sigma0,
            epsilon: self.epsilon,
            snr_grid: self.snr_grid(),
            trials_per_point: self.trials,
            noiseless: self.noiseless,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

/// Parses `30,40.5,50` (dB).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad snr '{s}': {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"
profile = [[[1, 0], [0, 0], [1, 0]], [[0, 0], [1, 0], [2, 0]]]
n_r = 2
T = 3
Q = 2
"#;

    #[test]
    fn parses_defaults() {
        let spec = ExperimentSpec::parse(FIXTURE).unwrap();
        assert_eq!(spec.n_t, 1);
        assert_eq!(spec.decoder, DecoderKind::Simo);
        assert_eq!(spec.delta, 0.05);
        let scheme = spec.scheme().unwrap();
        assert_eq!(scheme.payload_len(), 2);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let spec = ExperimentSpec::parse(&FIXTURE.replace("T = 3", "T = 4")).unwrap();
        assert!(matches!(spec.profile(), Err(CliError::Usage(_))));
        assert!(ExperimentSpec::parse("n_r = 2\nbogus = 1\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut spec = ExperimentSpec::parse(FIXTURE).unwrap();
        spec.apply(&Overrides {
            seed: Some(9),
            snr_grid_db: Some(parse_grid("30, 40").unwrap()),
            decoder: Some(DecoderKind::Baseline),
            ..Default::default()
        });
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.snr_grid_db, vec![30.0, 40.0]);
        assert_eq!(spec.decoder, DecoderKind::Baseline);
        assert!(parse_grid("30,x").is_err());
    }
}
