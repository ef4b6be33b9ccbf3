//! Finite-difference Jacobians of the payload-to-canonical-coordinates map.
//!
//! The map is holomorphic, so the complex Jacobian is estimated by central
//! differences along the real axis of each input. Its smallest singular
//! value lower-bounds how far apart distinct payloads land in canonical
//! coordinates.

use rand::Rng;
use serde::Serialize;

use crate::dof::scheme::Scheme;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// Step for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Jacobians whose `sigma_min / sigma_max` falls below this are counted as
/// rank deficient.
pub const JACOBIAN_RANK_TOLERANCE: f64 = 1e-7;

/// Central-difference complex Jacobian, `outputs x inputs`.
pub fn complex_jacobian<F>(map: F, point: &[C64], step: f64) -> Result<CMatrix>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let mut columns = Vec::with_capacity(point.len());
    let mut probe = point.to_vec();
    for k in 0..point.len() {
        probe[k] = point[k] + step;
        let plus = map(&probe)?;
        probe[k] = point[k] - step;
        let minus = map(&probe)?;
        probe[k] = point[k];
        if plus.len() != minus.len() {
            return Err(Error::DimensionMismatch("map output length changed".into()));
        }
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * step))
                .collect::<Vec<_>>(),
        );
    }
    let rows = columns.first().map_or(0, Vec::len);
    Ok(CMatrix::from_fn(rows, point.len(), |i, j| columns[j][i]))
}

#[derive(Debug, Clone, Serialize)]
pub struct Sigma0Calibration {
    /// `epsilon`-quantile of the smallest singular values: at least a
    /// `1 - epsilon` fraction of probes sit at or above it.
    pub sigma0: f64,
    /// Fraction of probes with a full-column-rank Jacobian.
    pub full_rank_rate: f64,
    /// Smallest singular value at each probe, in probe order.
    pub smallest: Vec<f64>,
    /// Input dimension `D`.
    pub dims: usize,
}

/// Lower `p`-quantile by the nearest-rank rule.
pub fn lower_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Probes `map` at `n_probe` points from `sample`; errors when more than an
/// `epsilon` fraction of Jacobians lack full column rank.
pub fn calibrate_sigma0_with<F, S, R>(
    map: F,
    mut sample: S,
    n_probe: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Sigma0Calibration>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
    S: FnMut(&mut R) -> Vec<C64>,
    R: Rng + ?Sized,
{
    if n_probe == 0 || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig("need n_probe > 0 and 0 < epsilon < 1".into()));
    }
    let mut smallest = Vec::with_capacity(n_probe);
    let mut full_rank = 0usize;
    let mut dims = 0;
    for _ in 0..n_probe {
        let point = sample(rng);
        dims = point.len();
        let sv = match complex_jacobian(&map, &point, FD_STEP) {
            Ok(j) if j.nrows() >= j.ncols() => linalg::singular_values(&j),
            // a probe where the map itself fails counts as rank deficient
            _ => vec![0.0],
        };
        let hi = sv.first().copied().unwrap_or(0.0);
        let lo = if sv.len() == dims { sv.last().copied().unwrap_or(0.0) } else { 0.0 };
        if hi > 0.0 && lo / hi > JACOBIAN_RANK_TOLERANCE {
            full_rank += 1;
        }
        smallest.push(lo);
    }
    let full_rank_rate = full_rank as f64 / n_probe as f64;
    if 1.0 - full_rank_rate > epsilon {
        return Err(Error::PremiseViolated {
            rate: 1.0 - full_rank_rate,
            epsilon,
        });
    }
    Ok(Sigma0Calibration {
        sigma0: lower_quantile(&smallest, epsilon),
        full_rank_rate,
        smallest,
        dims,
    })
}

/// Calibrates `sigma0` on a scheme's canonical map at generic payloads drawn
/// i.i.d. CN(0, 1).
pub fn calibrate_sigma0<R: Rng + ?Sized>(
    scheme: &Scheme,
    n_probe: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Sigma0Calibration> {
    let d = scheme.payload_len();
    calibrate_sigma0_with(
        |x| scheme.canonical_map(x),
        |r: &mut R| (0..d).map(|_| linalg::sample_cn(r)).collect(),
        n_probe,
        epsilon,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::CorrelationProfile;
    use crate::dof::scheme::{DecoderKind, SchemeOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_closed_form_derivative() {
        // T = 2, Q = 1: B(2) = E(2) / x(1), |dB/dx| = |E(2)| / |x(1)|^2
        let a = [C64::new(0.7, -0.4), C64::new(1.3, 0.9)];
        let p = CorrelationProfile::new(CMatrix::from_row_slice(1, 2, &a)).unwrap();
        let scheme = Scheme::new(DecoderKind::Simo, p, 1, 1, SchemeOptions::default()).unwrap();
        let e = a[1] / a[0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = linalg::sample_cn(&mut rng) + C64::new(0.3, 0.0);
            let j = complex_jacobian(|v| scheme.canonical_map(v), &[x], FD_STEP).unwrap();
            let closed = -e / (x * x);
            assert!((j[(0, 0)] - closed).norm() <= 1e-4 * closed.norm().max(1.0));
        }
    }

    #[test]
    fn linear_map_has_constant_sigma0() {
        let m = CMatrix::from_row_slice(
            3,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
            ],
        );
        let expected = *linalg::singular_values(&m).last().unwrap();
        let map = |x: &[C64]| Ok((&m * CMatrix::from_column_slice(2, 1, x)).iter().copied().collect());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cal = calibrate_sigma0_with(map, |r: &mut ChaCha8Rng| vec![linalg::sample_cn(r), linalg::sample_cn(r)], 40, 0.05, &mut rng)
            .unwrap();
        assert_eq!(cal.full_rank_rate, 1.0);
        for s in &cal.smallest {
            assert!((s - expected).abs() < 1e-8);
        }
        assert!((cal.sigma0 - expected).abs() < 1e-8);
    }

    #[test]
    fn baseline_map_is_linear() {
        // pilots in the pivot slots: B(:, t) = E(t) x(t), sigma_min = min_t ||E(t)||
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = CorrelationProfile::random(&mut rng, 2, 5).unwrap();
        let scheme = Scheme::new(DecoderKind::Baseline, p.clone(), 1, 2, SchemeOptions::default()).unwrap();
        let side = crate::simo::compute_side_information(&p).unwrap();
        let expected = (2..5).map(|t| side.column(t).norm()).fold(f64::INFINITY, f64::min);
        let cal = calibrate_sigma0(&scheme, 20, 0.05, &mut rng).unwrap();
        for s in &cal.smallest {
            assert!((s - expected).abs() < 1e-6 * expected);
        }
    }

    #[test]
    fn degenerate_map_violates_premise() {
        let map = |x: &[C64]| Ok(vec![x[0] + x[1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err = calibrate_sigma0_with(map, |r: &mut ChaCha8Rng| vec![linalg::sample_cn(r), linalg::sample_cn(r)], 10, 0.1, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::PremiseViolated { .. }));
    }

    #[test]
    fn quantile_rule() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(lower_quantile(&v, 0.2), 1.0);
        assert_eq!(lower_quantile(&v, 0.21), 2.0);
        assert_eq!(lower_quantile(&v, 1.0), 5.0);
    }
}
