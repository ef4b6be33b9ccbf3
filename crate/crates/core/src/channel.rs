//! Correlated fading, the time-varying channel map and receiver noise.
//!
//! Each transmit/receive pair `(m, n)` carries `Q` innovations `s[m][n, q]`
//! drawn i.i.d. CN(0, 1). The fading at time `t` is
//! `h_{m,n}(t) = sum_q A[q, t] s[m][n, q]`, so every trajectory lies in the
//! row span of `A` and `E[h^H h] = A^H A`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// The `Q x T` whitening matrix `A` shared by every antenna pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    a: CMatrix,
}

impl CorrelationProfile {
    /// Validates `1 <= Q < T` and full row rank (smallest singular value
    /// above `1e-8` times the largest). `A` is not normalized.
    pub fn new(a: CMatrix) -> Result<Self> {
        let (q, t) = a.shape();
        if q == 0 {
            return Err(Error::InvalidProfile("A has no rows".into()));
        }
        if q >= t {
            return Err(Error::InvalidProfile(format!(
                "rank Q = {q} must be smaller than the block length T = {t}"
            )));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidProfile("A has non-finite entries".into()));
        }
        let ratio = linalg::rank_ratio(&a);
        if ratio <= linalg::RANK_TOLERANCE {
            return Err(Error::InvalidProfile(format!(
                "A is not full row rank (singular value ratio {ratio:.3e})"
            )));
        }
        Ok(Self { a })
    }

    /// Builds a profile from real row-major entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let q = rows.len();
        let t = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidProfile("ragged rows".into()));
        }
        Self::new(CMatrix::from_fn(q, t, |i, j| C64::new(rows[i][j], 0.0)))
    }

    /// The worked three-slot profile `A = [[1, 0, alpha], [0, 1, beta]]`.
    pub fn two_innovation_example(alpha: C64, beta: C64) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self::new(CMatrix::from_row_slice(2, 3, &[one, zero, alpha, zero, one, beta]))
    }

    /// Block fading over `t` slots: `A = [1, 1, ..., 1]`.
    pub fn block_fading(t: usize) -> Result<Self> {
        Self::new(CMatrix::from_element(1, t, C64::new(1.0, 0.0)))
    }

    /// `A` with i.i.d. CN(0, 1) entries (full rank with probability one).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, q: usize, t: usize) -> Result<Self> {
        Self::new(linalg::random_cn_matrix(rng, q, t))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn block_len(&self) -> usize {
        self.a.ncols()
    }

    /// `K_H = A^H A`.
    pub fn correlation(&self) -> CMatrix {
        self.a.adjoint() * &self.a
    }

    /// Column `t` of `A` (0-based).
    pub fn column(&self, t: usize) -> CMatrix {
        self.a.columns(t, 1).into_owned()
    }

    /// First `cols` columns of `A`.
    pub fn leading(&self, cols: usize) -> CMatrix {
        self.a.columns(0, cols).into_owned()
    }

    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        linalg::to_pairs(&self.a)
    }

    pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        Self::new(linalg::from_pairs(rows)?)
    }
}

/// Innovations for every antenna pair and the fading matrices they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    /// `innovations[m]` is `n_r x Q`; row `n` holds `s[m, n, 1..Q]`.
    innovations: Vec<CMatrix>,
    /// `channels[t]` is `H(t)`, `n_r x n_t`.
    channels: Vec<CMatrix>,
}

impl FadingRealization {
    /// Computes `H(t)[n, m] = sum_q A[q, t] s[m][n, q]`.
    pub fn from_innovations(profile: &CorrelationProfile, innovations: Vec<CMatrix>) -> Result<Self> {
        let n_t = innovations.len();
        if n_t == 0 {
            return Err(Error::DimensionMismatch("no transmit antennas".into()));
        }
        let n_r = innovations[0].nrows();
        let q = profile.rank();
        if n_r == 0 || innovations.iter().any(|s| s.shape() != (n_r, q)) {
            return Err(Error::DimensionMismatch(format!(
                "innovations must all be {n_r}x{q} with n_r >= 1"
            )));
        }
        let a = profile.matrix();
        let channels = (0..profile.block_len())
            .map(|t| {
                let col = a.column(t);
                let mut h = CMatrix::zeros(n_r, n_t);
                for (m, s) in innovations.iter().enumerate() {
                    h.set_column(m, &(s * col));
                }
                h
            })
            .collect();
        Ok(Self {
            innovations,
            channels,
        })
    }

    pub fn n_t(&self) -> usize {
        self.innovations.len()
    }

    pub fn n_r(&self) -> usize {
        self.innovations[0].nrows()
    }

    pub fn block_len(&self) -> usize {
        self.channels.len()
    }

    pub fn innovations(&self, m: usize) -> &CMatrix {
        &self.innovations[m]
    }

    pub fn channel(&self, t: usize) -> &CMatrix {
        &self.channels[t]
    }

    pub fn channels(&self) -> &[CMatrix] {
        &self.channels
    }

    /// `(h_{m,n}(1), ..., h_{m,n}(T))` as a `1 x T` row.
    pub fn trajectory(&self, m: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(1, self.block_len(), |_, t| self.channels[t][(n, m)])
    }
}

/// Draws i.i.d. CN(0, 1) innovations for each of the `n_t * n_r` pairs.
///
/// Draw order is antenna `m`, then the `n_r x Q` matrix in column-major
/// order, so a fixed rng state reproduces the realization exactly.
pub fn sample_fading<R: Rng + ?Sized>(
    profile: &CorrelationProfile,
    n_t: usize,
    n_r: usize,
    rng: &mut R,
) -> Result<FadingRealization> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::DimensionMismatch(format!(
            "need at least one antenna on each side, got n_t = {n_t}, n_r = {n_r}"
        )));
    }
    let innovations = (0..n_t)
        .map(|_| linalg::random_cn_matrix(rng, n_r, profile.rank()))
        .collect();
    FadingRealization::from_innovations(profile, innovations)
}

/// A transmit entry pinned to a known value (training).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub antenna: usize,
    pub time: usize,
    pub value: C64,
}

/// An `n_t x T` transmit block with its declared training entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBlock {
    x: CMatrix,
    training: Vec<Pin>,
    power: f64,
}

impl TransmitBlock {
    /// Checks that every pin matches `x` exactly.
    pub fn new(x: CMatrix, training: Vec<Pin>) -> Result<Self> {
        for pin in &training {
            if pin.antenna >= x.nrows() || pin.time >= x.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "pin ({}, {}) outside a {}x{} block",
                    pin.antenna,
                    pin.time,
                    x.nrows(),
                    x.ncols()
                )));
            }
            if x[(pin.antenna, pin.time)] != pin.value {
                return Err(Error::InvalidConfig(format!(
                    "entry ({}, {}) does not match its training value",
                    pin.antenna, pin.time
                )));
            }
        }
        let power = x.norm_squared() / x.ncols().max(1) as f64;
        Ok(Self { x, training, power })
    }

    /// Single-antenna block without training.
    pub fn from_symbols(symbols: &[C64]) -> Self {
        let x = CMatrix::from_row_slice(1, symbols.len(), symbols);
        Self::new(x, Vec::new()).expect("no pins to violate")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.x
    }

    pub fn training(&self) -> &[Pin] {
        &self.training
    }

    /// Average `||x(t)||^2` over the block.
    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn within_budget(&self, budget: f64) -> bool {
        self.power <= budget * (1.0 + 1e-12)
    }

    pub fn n_t(&self) -> usize {
        self.x.nrows()
    }

    pub fn block_len(&self) -> usize {
        self.x.ncols()
    }
}

/// Column `t` of the result is `H(t) x(t)`.
pub fn apply_channel(x: &TransmitBlock, fading: &FadingRealization) -> Result<CMatrix> {
    if x.n_t() != fading.n_t() || x.block_len() != fading.block_len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} block against fading for n_t = {}, T = {}",
            x.n_t(),
            x.block_len(),
            fading.n_t(),
            fading.block_len()
        )));
    }
    let xm = x.matrix();
    let mut y = CMatrix::zeros(fading.n_r(), x.block_len());
    for (t, h) in fading.channels().iter().enumerate() {
        y.set_column(t, &(h * xm.column(t)));
    }
    Ok(y)
}

/// Adds i.i.d. CN(0, 1/snr) noise. `snr = +inf` is the noiseless limit and
/// returns `y` unchanged without consuming randomness.
pub fn add_noise<R: Rng + ?Sized>(y: &CMatrix, snr: f64, rng: &mut R) -> Result<CMatrix> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::NonPositiveSnr(snr));
    }
    if snr.is_infinite() {
        return Ok(y.clone());
    }
    let sigma = (1.0 / snr).sqrt();
    let w = linalg::random_cn_matrix(rng, y.nrows(), y.ncols());
    Ok(y + w * C64::new(sigma, 0.0))
}

/// Noiseless and noisy observations of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub y: CMatrix,
    pub y_noisy: CMatrix,
    /// Linear SNR, `+inf` when noiseless.
    pub snr: f64,
}

impl ReceivedBlock {
    pub fn observe<R: Rng + ?Sized>(
        x: &TransmitBlock,
        fading: &FadingRealization,
        snr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let y = apply_channel(x, fading)?;
        let y_noisy = add_noise(&y, snr, rng)?;
        Ok(Self { y, y_noisy, snr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn profile_validation() {
        assert!(CorrelationProfile::from_real_rows(&[&[1.0, 1.0, 1.0]]).is_ok());
        // Q == T
        assert!(CorrelationProfile::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).is_err());
        // rank deficient
        let err = CorrelationProfile::from_real_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile(_)));
    }

    #[test]
    fn correlation_is_hermitian_rank_q() {
        let p = CorrelationProfile::random(&mut rng(3), 2, 5).unwrap();
        let k = p.correlation();
        assert!((&k - k.adjoint()).norm() < 1e-12);
        let sv = linalg::singular_values(&k);
        assert!(sv[1] > 1e-6 * sv[0]);
        assert!(sv[2] < 1e-10 * sv[0]);
    }

    #[test]
    fn block_fading_is_constant() {
        let p = CorrelationProfile::block_fading(3).unwrap();
        let f = sample_fading(&p, 2, 3, &mut rng(1)).unwrap();
        for m in 0..2 {
            for n in 0..3 {
                let s = f.innovations(m)[(n, 0)];
                for t in 0..3 {
                    assert_eq!(f.channel(t)[(n, m)], s);
                }
            }
        }
    }

    #[test]
    fn third_slot_is_combination_of_first_two() {
        let (alpha, beta) = (c64(0.3, -1.2), c64(2.0, 0.5));
        let p = CorrelationProfile::two_innovation_example(alpha, beta).unwrap();
        let f = sample_fading(&p, 1, 4, &mut rng(9)).unwrap();
        for n in 0..4 {
            let h = |t: usize| f.channel(t)[(n, 0)];
            assert!((h(2) - (alpha * h(0) + beta * h(1))).norm() < 1e-14);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = CorrelationProfile::random(&mut rng(5), 2, 4).unwrap();
        let a = sample_fading(&p, 2, 3, &mut rng(77)).unwrap();
        let b = sample_fading(&p, 2, 3, &mut rng(77)).unwrap();
        assert_eq!(a, b);
        // recomputing from the innovations is bit-exact
        let c = FadingRealization::from_innovations(&p, (0..2).map(|m| a.innovations(m).clone()).collect())
            .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let p = CorrelationProfile::random(&mut rng(2), 2, 4).unwrap();
        let f = sample_fading(&p, 1, 2, &mut rng(4)).unwrap();
        let x = TransmitBlock::from_symbols(&[c64(0.0, 0.0); 4]);
        assert!(apply_channel(&x, &f).unwrap().iter().all(|z| *z == c64(0.0, 0.0)));
    }

    #[test]
    fn channel_rows_expand_over_innovations() {
        // row n of Y equals sum_q s[n, q] (A^q ⊙ x)
        let mut r = rng(11);
        let p = CorrelationProfile::random(&mut r, 3, 6).unwrap();
        let f = sample_fading(&p, 1, 3, &mut r).unwrap();
        let symbols: Vec<C64> = (0..6).map(|_| linalg::sample_cn(&mut r)).collect();
        let y = apply_channel(&TransmitBlock::from_symbols(&symbols), &f).unwrap();
        let a = p.matrix();
        for n in 0..3 {
            for t in 0..6 {
                let expected: C64 = (0..3)
                    .map(|q| f.innovations(0)[(n, q)] * a[(q, t)] * symbols[t])
                    .sum();
                assert!((y[(n, t)] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = CorrelationProfile::block_fading(4).unwrap();
        let f = sample_fading(&p, 2, 2, &mut rng(0)).unwrap();
        let x = TransmitBlock::from_symbols(&[c64(1.0, 0.0); 4]);
        assert!(matches!(apply_channel(&x, &f), Err(Error::DimensionMismatch(_))));
        assert!(sample_fading(&p, 0, 2, &mut rng(0)).is_err());
    }

    #[test]
    fn pins_and_budget() {
        let x = CMatrix::from_row_slice(1, 2, &[c64(0.5, 0.0), c64(1.0, 0.0)]);
        let pin = Pin {
            antenna: 0,
            time: 1,
            value: c64(1.0, 0.0),
        };
        let block = TransmitBlock::new(x.clone(), vec![pin]).unwrap();
        assert!((block.power() - 0.625).abs() < 1e-15);
        assert!(block.within_budget(1.0));
        assert!(!block.within_budget(0.6));
        let bad = Pin {
            value: c64(2.0, 0.0),
            ..pin
        };
        assert!(TransmitBlock::new(x, vec![bad]).is_err());
    }

    #[test]
    fn noise_contract() {
        let y = CMatrix::from_element(2, 3, c64(1.0, 1.0));
        assert_eq!(add_noise(&y, f64::INFINITY, &mut rng(0)).unwrap(), y);
        assert_eq!(add_noise(&y, 0.0, &mut rng(0)), Err(Error::NonPositiveSnr(0.0)));
        assert!(add_noise(&y, -1.0, &mut rng(0)).is_err());
        let a = add_noise(&y, 10.0, &mut rng(8)).unwrap();
        let b = add_noise(&y, 10.0, &mut rng(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, y);
    }
}
