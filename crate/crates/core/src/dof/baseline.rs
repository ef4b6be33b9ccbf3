//! Classical pilot-based coherent receiver used as a comparison point.
//!
//! The first `P >= n_t Q` slots carry unit pilots, cycling through the
//! transmit antennas. Each receive antenna's `n_t Q` innovations are fit by
//! least squares from those slots, the fading is rebuilt for the remaining
//! slots, and each payload column is solved coherently.

use crate::channel::{CorrelationProfile, Pin, TransmitBlock};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::recovery::{ConditionFailure, RecoveryReport};
use crate::simo::Diagnostics;

#[derive(Debug, Clone)]
pub struct BaselineDecoder {
    profile: CorrelationProfile,
    n_t: usize,
    pilots: usize,
}

impl BaselineDecoder {
    pub fn new(profile: CorrelationProfile, n_t: usize, pilots: usize) -> Result<Self> {
        let unknowns = n_t * profile.rank();
        if n_t == 0 {
            return Err(Error::InvalidConfig("n_t must be positive".into()));
        }
        if pilots < unknowns {
            return Err(Error::Underdetermined {
                equations: pilots,
                unknowns,
            });
        }
        if pilots >= profile.block_len() {
            return Err(Error::InvalidConfig(format!(
                "{pilots} pilot slots leave no payload in T = {}",
                profile.block_len()
            )));
        }
        Ok(Self { profile, n_t, pilots })
    }

    /// The usual choice: `n_t Q` pilot slots.
    pub fn minimal(profile: CorrelationProfile, n_t: usize) -> Result<Self> {
        let pilots = n_t * profile.rank();
        Self::new(profile, n_t, pilots)
    }

    pub fn pilots(&self) -> usize {
        self.pilots
    }

    /// `n_t (T - P)` payload symbols per block.
    pub fn payload_len(&self) -> usize {
        self.n_t * (self.profile.block_len() - self.pilots)
    }

    fn pilot_column(&self, t: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let active = t % self.n_t;
        (0..self.n_t).map(move |m| (m, if m == active { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
    }

    /// Builds `X` from an `n_t x (T - P)` payload matrix.
    pub fn encode(&self, payload: &CMatrix) -> Result<TransmitBlock> {
        let t_len = self.profile.block_len();
        if payload.shape() != (self.n_t, t_len - self.pilots) {
            return Err(Error::DimensionMismatch(format!(
                "payload must be {}x{}",
                self.n_t,
                t_len - self.pilots
            )));
        }
        let mut x = CMatrix::zeros(self.n_t, t_len);
        let mut pins = Vec::new();
        for t in 0..self.pilots {
            for (m, value) in self.pilot_column(t) {
                x[(m, t)] = value;
                pins.push(Pin { antenna: m, time: t, value });
            }
        }
        x.columns_mut(self.pilots, t_len - self.pilots).copy_from(payload);
        TransmitBlock::new(x, pins)
    }

    /// Returns the full `n_t x T` estimate (pilots included).
    pub fn decode(&self, y_noisy: &CMatrix) -> Result<(CMatrix, Diagnostics)> {
        let q = self.profile.rank();
        let t_len = self.profile.block_len();
        let n_r = y_noisy.nrows();
        if y_noisy.ncols() != t_len || n_r < self.n_t {
            return Err(Error::DimensionMismatch(format!(
                "need an n_r x {t_len} block with n_r >= {}, got {}x{}",
                self.n_t,
                n_r,
                y_noisy.ncols()
            )));
        }
        let a = self.profile.matrix();
        // y_n(t) = sum_{m,q} A[q,t] x_m(t) s[m][n,q] over the pilot slots
        let mut pilot_system = CMatrix::zeros(self.pilots, self.n_t * q);
        for t in 0..self.pilots {
            for (m, value) in self.pilot_column(t) {
                for k in 0..q {
                    pilot_system[(t, m * q + k)] = a[(k, t)] * value;
                }
            }
        }
        let observed = y_noisy.columns(0, self.pilots).transpose();
        let fit = linalg::least_squares(&pilot_system, &observed, "pilot system")?;
        // fit.solution[(m*Q + q, n)] = s[m][n, q]
        let s = &fit.solution;

        let mut x = CMatrix::zeros(self.n_t, t_len);
        for t in 0..self.pilots {
            for (m, value) in self.pilot_column(t) {
                x[(m, t)] = value;
            }
        }
        let mut worst_condition: f64 = 0.0;
        for t in self.pilots..t_len {
            let h = CMatrix::from_fn(n_r, self.n_t, |n, m| (0..q).map(|k| a[(k, t)] * s[(m * q + k, n)]).sum());
            let y_t = y_noisy.columns(t, 1).into_owned();
            let sol = linalg::least_squares(&h, &y_t, "estimated channel")?;
            worst_condition = worst_condition.max(sol.condition);
            x.set_column(t, &sol.solution.column(0));
        }
        Ok((
            x,
            Diagnostics {
                subspace_gap: f64::NAN,
                pivot_condition: fit.condition,
                system_condition: Some(worst_condition),
                residual: Some(fit.relative_residual),
                min_guard_ratio: f64::INFINITY,
            },
        ))
    }
}

/// The pilot slots of antenna `m` (every `n_t`-th slot among the first
/// `pilots`) must see `Q` independent columns of `A`, or its innovations are
/// not identifiable.
pub fn check_recovery_conditions_baseline(profile: &CorrelationProfile, n_t: usize, pilots: usize) -> RecoveryReport {
    let q = profile.rank();
    let a = profile.matrix();
    let scale = linalg::singular_values(a)[0];
    let failures = (0..n_t)
        .filter_map(|m| {
            let cols: Vec<usize> = (0..pilots.min(profile.block_len())).filter(|t| t % n_t == m).collect();
            let sv = linalg::singular_values(&a.select_columns(&cols));
            let sigma_min = if sv.len() == q { sv[q - 1] } else { 0.0 };
            (sigma_min <= linalg::RANK_TOLERANCE * scale).then(|| ConditionFailure {
                name: "pilot_rank_deficient".into(),
                indices: vec![("m".to_string(), m + 1)],
                magnitude: sigma_min,
            })
        })
        .collect();
    RecoveryReport::from_failures(failures, Vec::new())
}

/// Single-antenna baseline with `pilots` leading unit pilots.
pub fn baseline_training_decoder(y_noisy: &CMatrix, profile: &CorrelationProfile, pilots: usize) -> Result<Vec<C64>> {
    let decoder = BaselineDecoder::new(profile.clone(), 1, pilots)?;
    decoder.decode(y_noisy).map(|(x, _)| x.row(0).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, sample_fading};
    use crate::linalg::random_cn_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_roundtrip_simo() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = CorrelationProfile::random(&mut rng, 2, 5).unwrap();
        let dec = BaselineDecoder::minimal(p.clone(), 1).unwrap();
        assert_eq!(dec.payload_len(), 3);
        let payload = random_cn_matrix(&mut rng, 1, 3);
        let block = dec.encode(&payload).unwrap();
        let y = apply_channel(&block, &sample_fading(&p, 1, 2, &mut rng).unwrap()).unwrap();
        let xhat = baseline_training_decoder(&y, &p, 2).unwrap();
        for (j, t) in (2..5).enumerate() {
            assert!((xhat[t] - payload[(0, j)]).norm() < 1e-9);
        }
    }

    #[test]
    fn noiseless_roundtrip_mimo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = CorrelationProfile::random(&mut rng, 2, 8).unwrap();
        let dec = BaselineDecoder::minimal(p.clone(), 2).unwrap();
        let payload = random_cn_matrix(&mut rng, 2, 4);
        let block = dec.encode(&payload).unwrap();
        let y = apply_channel(&block, &sample_fading(&p, 2, 3, &mut rng).unwrap()).unwrap();
        let (xhat, _) = dec.decode(&y).unwrap();
        assert!((xhat - block.matrix()).norm() < 1e-9);
    }

    #[test]
    fn pilot_rank_check() {
        let p = CorrelationProfile::from_real_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 2.0]]).unwrap();
        assert!(check_recovery_conditions_baseline(&p, 1, 2).passed);
        let bad = CorrelationProfile::from_real_rows(&[&[1.0, 2.0, 1.0, 0.0], &[1.0, 2.0, 0.0, 1.0]]).unwrap();
        let report = check_recovery_conditions_baseline(&bad, 1, 2);
        assert!(!report.passed);
        assert_eq!(report.failures[0].indices, vec![("m".to_string(), 1)]);
        assert!(check_recovery_conditions_baseline(&bad, 1, 3).passed);
    }

    #[test]
    fn too_few_pilots() {
        let p = CorrelationProfile::from_real_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 2.0]]).unwrap();
        assert!(matches!(BaselineDecoder::new(p.clone(), 1, 1), Err(Error::Underdetermined { .. })));
        assert!(BaselineDecoder::new(p, 1, 3).is_err());
    }
}
