use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use corrfade::dof::{DecoderKind, Scheme, SchemeOptions};
use corrfade::linalg::{self, C64};
use corrfade::mimo::LinearPhase;
use corrfade::simo::{check_recovery_conditions_simo, Chaining, DecodeOptions};
use corrfade::{apply_channel, sample_fading, subspace_distance, CorrelationProfile, ReceivedBlock};

fn fixture() -> CorrelationProfile {
    CorrelationProfile::two_innovation_example(C64::new(1.0, 0.0), C64::new(2.0, 0.0)).unwrap()
}

fn payload(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| linalg::sample_cn(rng)).collect()
}

fn max_error(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simo_noiseless_roundtrip(seed in any::<u64>(), q in 1usize..=3, extra in 1usize..=4, spare in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = CorrelationProfile::random(&mut rng, q, q + extra).unwrap();
        prop_assume!(check_recovery_conditions_simo(&profile).passed);
        for chaining in [Chaining::FirstRow, Chaining::LeastSquares] {
            let options = SchemeOptions { simo: DecodeOptions { chaining, ..Default::default() }, ..Default::default() };
            let s = Scheme::new(DecoderKind::Simo, profile.clone(), 1, q + spare, options).unwrap();
            let x = payload(&mut rng, s.payload_len());
            let fading = sample_fading(&profile, 1, q + spare, &mut rng).unwrap();
            let y = apply_channel(&s.encode(&x).unwrap(), &fading).unwrap();
            match s.decode(&y) {
                Ok(out) => prop_assert!(max_error(&out.payload, &x) <= 1e-8 * x.iter().map(|z| z.norm()).fold(1.0, f64::max)),
                Err(e) => prop_assert!(e.is_guard_trip(), "unguarded failure: {e}"),
            }
        }
    }

    #[test]
    fn mimo_noiseless_roundtrip(seed in any::<u64>(), q in 1usize..=2, n_t in 1usize..=2, spare in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = n_t * q + n_t + spare;
        let profile = CorrelationProfile::random(&mut rng, q, t).unwrap();
        for linear_phase in [LinearPhase::FirstRow, LinearPhase::LeastSquares] {
            let options = SchemeOptions { linear_phase, ..Default::default() };
            let s = Scheme::new(DecoderKind::Mimo, profile.clone(), n_t, n_t * q + spare, options).unwrap();
            prop_assert_eq!(s.payload_len(), n_t * (t - n_t));
            let x = payload(&mut rng, s.payload_len());
            let fading = sample_fading(&profile, n_t, n_t * q + spare, &mut rng).unwrap();
            let y = apply_channel(&s.encode(&x).unwrap(), &fading).unwrap();
            match s.decode(&y) {
                Ok(out) => prop_assert!(max_error(&out.payload, &x) <= 1e-7),
                Err(e) => prop_assert!(e.is_guard_trip(), "unguarded failure: {e}"),
            }
        }
    }

    #[test]
    fn received_rows_lie_in_the_signal_subspace(seed in any::<u64>(), q in 1usize..=3, n_r in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = CorrelationProfile::random(&mut rng, q, q + 3).unwrap();
        let x = payload(&mut rng, q + 3);
        let block = corrfade::TransmitBlock::from_symbols(&x);
        let y = apply_channel(&block, &sample_fading(&profile, 1, n_r, &mut rng).unwrap()).unwrap();
        let r = corrfade::mimo::build_r(&profile, block.matrix()).unwrap();
        // projecting the rows of Y onto span(R) leaves them unchanged
        let basis = linalg::orthonormal_rows(&r);
        let projected = &y * basis.adjoint() * &basis;
        prop_assert!((projected - &y).norm() <= 1e-10 * y.norm().max(1.0));
    }
}

#[test]
fn fading_pairs_are_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let profile = CorrelationProfile::random(&mut rng, 2, 4).unwrap();
    let k = profile.correlation();
    let n = 40_000;
    let (mut cross, mut auto) = (C64::new(0.0, 0.0), 0.0);
    for _ in 0..n {
        let f = sample_fading(&profile, 2, 2, &mut rng).unwrap();
        let a = f.trajectory(0, 0);
        let b = f.trajectory(1, 1);
        cross += a[(0, 1)].conj() * b[(0, 1)];
        auto += a[(0, 1)].norm_sqr();
    }
    let cross = cross / n as f64;
    let auto = auto / n as f64;
    assert!(cross.norm() < 0.03 * k[(1, 1)].re, "cross correlation {cross}");
    assert!((auto - k[(1, 1)].re).abs() < 0.05 * k[(1, 1)].re);
}

#[test]
fn decoding_error_falls_with_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let s = Scheme::new(DecoderKind::Simo, fixture(), 1, 2, SchemeOptions::default()).unwrap();
    let mut mse = Vec::new();
    let mut distance = Vec::new();
    for snr_db in [20.0, 40.0, 60.0, 80.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        let (mut err, mut dist, mut count) = (0.0, 0.0, 0usize);
        for _ in 0..400 {
            let x = payload(&mut rng, 2);
            let block = s.encode(&x).unwrap();
            let fading = sample_fading(s.profile(), 1, 2, &mut rng).unwrap();
            let rx = ReceivedBlock::observe(&block, &fading, snr, &mut rng).unwrap();
            let truth = corrfade::mimo::build_r(s.profile(), block.matrix()).unwrap();
            let estimate = corrfade::estimate_signal_subspace(&rx.y_noisy, 2).unwrap();
            dist += subspace_distance(&estimate, &truth).unwrap();
            if let Ok(out) = s.decode(&rx.y_noisy) {
                // median-robust: cap outliers from deep fades
                err += out.payload.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr().min(1.0)).sum::<f64>();
                count += 1;
            }
        }
        mse.push(err / count as f64);
        distance.push(dist / 400.0);
    }
    assert!(mse.windows(2).all(|w| w[1] < w[0]), "{mse:?}");
    assert!(distance.windows(2).all(|w| w[1] < w[0]), "{distance:?}");
    // 20 dB per step shrinks the noise amplitude tenfold
    assert!(distance[3] < 0.05 * distance[1]);
}

#[test]
fn noise_has_requested_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = corrfade::CMatrix::zeros(50, 200);
    let noisy = corrfade::add_noise(&y, 100.0, &mut rng).unwrap();
    let power = noisy.iter().map(|z| z.norm_sqr()).sum::<f64>() / 10_000.0;
    assert!((power - 0.01).abs() < 0.0005, "{power}");
    assert_eq!(corrfade::add_noise(&y, f64::INFINITY, &mut rng).unwrap(), y);
    assert!(corrfade::add_noise(&y, 0.0, &mut rng).is_err());
}

#[test]
fn qam_blocks_respect_the_power_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (kind, profile, n_t, n_r) in [
        (DecoderKind::Simo, fixture(), 1, 2),
        (DecoderKind::Mimo, CorrelationProfile::block_fading(6).unwrap(), 2, 2),
        (DecoderKind::Baseline, fixture(), 1, 2),
    ] {
        let s = Scheme::new(kind, profile, n_t, n_r, SchemeOptions::default()).unwrap();
        let cb = corrfade::dof::QamCodebook::new(s.payload_len(), 0.05, 0.025, s.amplitude()).unwrap();
        let mut total = 0.0;
        for _ in 0..500 {
            let block = s.encode(&cb.encode(&cb.random_indices(&mut rng))).unwrap();
            total += block.power();
        }
        assert!(total / 500.0 <= 1.0 + 1e-9, "{kind}: {}", total / 500.0);
    }
}
