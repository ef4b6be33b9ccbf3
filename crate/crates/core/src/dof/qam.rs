//! Square QAM per complex dimension with a prescribed minimum distance.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// `D` independent copies of one square grid.
///
/// Each real axis holds `floor(2 a / d_min)` levels spaced `d_min` apart and
/// centred on zero, all within `(-a, a)` for box half-width `a`, so the
/// average power per dimension stays below `2 a^2 / 3`. Points closer to the
/// origin than `zero_exclusion` are removed; only the centre point of an odd
/// grid can be that close.
#[derive(Debug, Clone, PartialEq)]
pub struct QamCodebook {
    dims: usize,
    d_min: f64,
    levels: Vec<f64>,
    points: Vec<C64>,
    /// `lookup[i * n + k]` is the point index at levels `(i, k)`.
    lookup: Vec<Option<usize>>,
}

/// Levels per real axis inside a box of half-width `amplitude`.
pub fn levels_per_axis(d_min: f64, amplitude: f64) -> usize {
    // tolerance keeps exact ratios such as 2 / 0.5 from flooring down
    ((2.0 * amplitude / d_min) * (1.0 + 1e-12)).floor() as usize
}

/// Unit-box codebook; see [`QamCodebook::new`].
pub fn qam_codebook(dims: usize, d_min: f64, zero_exclusion: f64) -> Result<QamCodebook> {
    QamCodebook::new(dims, d_min, zero_exclusion, 1.0)
}

impl QamCodebook {
    pub fn new(dims: usize, d_min: f64, zero_exclusion: f64, amplitude: f64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidConfig("codebook needs at least one dimension".into()));
        }
        if !(d_min > 0.0) || !(amplitude > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "d_min ({d_min}) and amplitude ({amplitude}) must be positive"
            )));
        }
        if !(zero_exclusion >= 0.0 && zero_exclusion < d_min) {
            return Err(Error::InvalidConfig(format!(
                "zero exclusion {zero_exclusion} must lie in [0, d_min)"
            )));
        }
        let n = levels_per_axis(d_min, amplitude);
        if n == 0 {
            return Err(Error::EmptyCodebook { d_min });
        }
        let offset = (n as f64 - 1.0) / 2.0;
        let levels: Vec<f64> = (0..n).map(|k| (k as f64 - offset) * d_min).collect();
        let mut points = Vec::with_capacity(n * n);
        let mut lookup = vec![None; n * n];
        for (i, &re) in levels.iter().enumerate() {
            for (k, &im) in levels.iter().enumerate() {
                let z = C64::new(re, im);
                if z.norm() >= zero_exclusion {
                    lookup[i * n + k] = Some(points.len());
                    points.push(z);
                }
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyCodebook { d_min });
        }
        Ok(Self {
            dims,
            d_min,
            levels,
            points,
            lookup,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn levels_per_axis(&self) -> usize {
        self.levels.len()
    }

    /// Constellation points of one complex dimension.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn points_per_dim(&self) -> usize {
        self.points.len()
    }

    /// `D log2(points per dimension)`.
    pub fn rate_bits(&self) -> f64 {
        self.dims as f64 * (self.points.len() as f64).log2()
    }

    /// Average `|x|^2` of one dimension under uniform indices.
    pub fn power_per_dim(&self) -> f64 {
        self.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn encode(&self, indices: &[usize]) -> Vec<C64> {
        indices.iter().map(|&i| self.points[i]).collect()
    }

    pub fn random_indices<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.dims).map(|_| rng.random_range(0..self.points.len())).collect()
    }

    fn nearest_level(&self, v: f64) -> usize {
        let n = self.levels.len();
        let offset = (n as f64 - 1.0) / 2.0;
        let k = (v / self.d_min + offset).round();
        if k.is_nan() {
            return 0;
        }
        k.clamp(0.0, (n - 1) as f64) as usize
    }

    /// Per-dimension hard decision.
    pub fn nearest(&self, z: C64) -> usize {
        let n = self.levels.len();
        let (i, k) = (self.nearest_level(z.re), self.nearest_level(z.im));
        if let Some(idx) = self.lookup[i * n + k] {
            return idx;
        }
        // the excluded centre: fall back to the closest surviving point
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - z).norm_sqr().total_cmp(&(b.1 - z).norm_sqr()))
            .map(|(idx, _)| idx)
            .expect("codebook is non-empty")
    }

    pub fn decide(&self, values: &[C64]) -> Vec<usize> {
        values.iter().map(|&z| self.nearest(z)).collect()
    }

    /// Lazily enumerates the `points_per_dim^D` payload vectors.
    pub fn iter(&self) -> impl Iterator<Item = Vec<C64>> + '_ {
        let base = self.points.len();
        let total = (base as u128).checked_pow(self.dims as u32).unwrap_or(u128::MAX);
        (0..total).map(move |mut code| {
            (0..self.dims)
                .map(|_| {
                    let idx = (code % base as u128) as usize;
                    code /= base as u128;
                    self.points[idx]
                })
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_spacing_gives_four_points() {
        let cb = qam_codebook(1, 1.0, 0.5).unwrap();
        assert_eq!(cb.levels_per_axis(), 2);
        assert_eq!(cb.points_per_dim(), 4);
        assert!((cb.rate_bits() - 2.0).abs() < 1e-15);
        assert_eq!(cb.iter().count(), 4);
    }

    #[test]
    fn boundary_spacing_is_degenerate() {
        assert_eq!(levels_per_axis(2.0, 1.0), 1);
        // the single centre point is removed by any positive exclusion
        assert_eq!(qam_codebook(1, 2.0, 1.0).unwrap_err(), Error::EmptyCodebook { d_min: 2.0 });
        assert_eq!(qam_codebook(1, 3.0, 1.0).unwrap_err(), Error::EmptyCodebook { d_min: 3.0 });
    }

    #[test]
    fn count_tracks_square_of_two_over_dmin() {
        for &d in &[0.5, 0.25, 0.1, 0.03, 0.011] {
            let cb = qam_codebook(2, d, d / 2.0).unwrap();
            let ideal = (2.0 / d).powi(2);
            let n = cb.levels_per_axis() as f64;
            assert!(n * n <= ideal + 1e-9);
            assert!((n + 1.0) * (n + 1.0) > ideal);
            // odd grids lose exactly the centre
            let expected = if cb.levels_per_axis() % 2 == 1 { n * n - 1.0 } else { n * n };
            assert_eq!(cb.points_per_dim() as f64, expected);
            assert!(cb.power_per_dim() <= 2.0 / 3.0);
            assert!(cb.points().iter().all(|z| z.norm() >= d / 2.0));
        }
    }

    #[test]
    fn nearest_decision() {
        let cb = qam_codebook(1, 0.5, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let idx = cb.random_indices(&mut rng)[0];
            let p = cb.points()[idx];
            let jitter = C64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            assert_eq!(cb.nearest(p + jitter), idx);
        }
        // odd grid: the origin maps to one of its four neighbours
        let odd = qam_codebook(1, 2.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(odd.levels_per_axis(), 3);
        let near = odd.points()[odd.nearest(C64::new(0.01, 0.0))];
        assert!((near - C64::new(2.0 / 3.0, 0.0)).norm() < 1e-12);
        // far outside the box clamps to the corner
        let corner = cb.points()[cb.nearest(C64::new(10.0, -10.0))];
        assert!((corner - C64::new(0.75, -0.75)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(qam_codebook(0, 0.5, 0.1).is_err());
        assert!(qam_codebook(1, 0.5, 0.6).is_err());
        assert!(qam_codebook(1, -0.5, 0.1).is_err());
    }
}
