//! One interface over the four decoders: payload layout, encoding,
//! decoding and the input-to-canonical-coordinates map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{CorrelationProfile, TransmitBlock};
use crate::dof::baseline::{check_recovery_conditions_baseline, BaselineDecoder};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::mimo::{self, LinearPhase, MimoDecoder};
use crate::recovery::RecoveryReport;
use crate::simo::{self, DecodeOptions, Diagnostics, ReducedDecoder, SimoDecoder};
use crate::subspace::{self, PivotPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    Simo,
    SimoReduced,
    Mimo,
    Baseline,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 4] = [
        DecoderKind::Simo,
        DecoderKind::SimoReduced,
        DecoderKind::Mimo,
        DecoderKind::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Simo => "simo",
            DecoderKind::SimoReduced => "simo-reduced",
            DecoderKind::Mimo => "mimo",
            DecoderKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecoderKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown decoder '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SchemeOptions {
    pub simo: DecodeOptions,
    pub linear_phase: LinearPhase,
    /// Pilot count override for the reduced and baseline decoders.
    pub pilots: Option<usize>,
}

#[derive(Debug, Clone)]
enum Inner {
    Simo(SimoDecoder),
    Reduced(ReducedDecoder),
    Mimo(MimoDecoder),
    Baseline(BaselineDecoder),
}

/// A profile, antenna configuration and decoder, validated against the
/// decoder's operating regime.
#[derive(Debug, Clone)]
pub struct Scheme {
    kind: DecoderKind,
    profile: CorrelationProfile,
    n_t: usize,
    n_r: usize,
    inner: Inner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeDecoded {
    pub payload: Vec<C64>,
    pub diagnostics: Diagnostics,
}

/// Checks the antenna/rank regime a decoder needs.
pub fn check_regime(kind: DecoderKind, q: usize, t_len: usize, n_t: usize, n_r: usize) -> Result<()> {
    let fail = |msg: String| Err(Error::InvalidConfig(msg));
    if n_t == 0 || n_r == 0 {
        return fail("antenna counts must be positive".into());
    }
    if q >= t_len {
        return fail(format!("Q = {q} must be below T = {t_len}"));
    }
    match kind {
        DecoderKind::Simo => {
            if n_t != 1 {
                return fail("simo decoder needs n_t = 1".into());
            }
            if q > n_r {
                return fail(format!("simo decoder needs Q <= n_r (Q = {q}, n_r = {n_r}); try simo-reduced"));
            }
        }
        DecoderKind::SimoReduced => {
            if n_t != 1 {
                return fail("simo-reduced decoder needs n_t = 1".into());
            }
            let pilots = simo::reduced_pilot_count(q, n_r);
            if q + pilots > t_len {
                return fail(format!("Q + ceil(Q/n_r) = {} exceeds T = {t_len}", q + pilots));
            }
        }
        DecoderKind::Mimo => {
            if n_t * q > n_r.min(t_len.saturating_sub(n_t)) {
                return fail(format!(
                    "mimo decoder needs n_t Q <= min(T - n_t, n_r) (n_t Q = {}, T = {t_len}, n_r = {n_r})",
                    n_t * q
                ));
            }
        }
        DecoderKind::Baseline => {
            if n_r < n_t {
                return fail("baseline decoder needs n_r >= n_t".into());
            }
            if n_t * q >= t_len {
                return fail(format!("n_t Q = {} pilots leave no payload in T = {t_len}", n_t * q));
            }
        }
    }
    Ok(())
}

impl Scheme {
    pub fn new(
        kind: DecoderKind,
        profile: CorrelationProfile,
        n_t: usize,
        n_r: usize,
        options: SchemeOptions,
    ) -> Result<Self> {
        let q = profile.rank();
        check_regime(kind, q, profile.block_len(), n_t, n_r)?;
        let inner = match kind {
            DecoderKind::Simo => Inner::Simo(SimoDecoder::new(profile.clone(), options.simo)?),
            DecoderKind::SimoReduced => {
                let pilots = options.pilots.unwrap_or_else(|| simo::reduced_pilot_count(q, n_r));
                Inner::Reduced(ReducedDecoder::new(profile.clone(), n_r, pilots, options.simo)?)
            }
            DecoderKind::Mimo => Inner::Mimo(MimoDecoder::new(profile.clone(), n_t, options.linear_phase)?),
            DecoderKind::Baseline => {
                let pilots = options.pilots.unwrap_or(n_t * q);
                Inner::Baseline(BaselineDecoder::new(profile.clone(), n_t, pilots)?)
            }
        };
        Ok(Self {
            kind,
            profile,
            n_t,
            n_r,
            inner,
        })
    }

    /// Recovery conditions for this decoder on this profile.
    pub fn check_recovery(&self) -> RecoveryReport {
        match &self.inner {
            Inner::Simo(_) | Inner::Reduced(_) => simo::check_recovery_conditions_simo(&self.profile),
            Inner::Mimo(_) => mimo::check_recovery_conditions_mimo(&self.profile, self.n_t),
            Inner::Baseline(d) => check_recovery_conditions_baseline(&self.profile, self.n_t, d.pilots()),
        }
    }

    pub fn kind(&self) -> DecoderKind {
        self.kind
    }

    pub fn profile(&self) -> &CorrelationProfile {
        &self.profile
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Payload symbols per block, `D`.
    pub fn payload_len(&self) -> usize {
        match &self.inner {
            Inner::Simo(d) => d.payload_len(),
            Inner::Reduced(d) => d.payload_len(),
            Inner::Mimo(d) => d.plan().payload_len(),
            Inner::Baseline(d) => d.payload_len(),
        }
    }

    /// Box half-width per transmit antenna that keeps `E||x(t)||^2 <= 1`.
    pub fn amplitude(&self) -> f64 {
        1.0 / (self.n_t as f64).sqrt()
    }

    pub fn encode(&self, payload: &[C64]) -> Result<TransmitBlock> {
        if payload.len() != self.payload_len() {
            return Err(Error::DimensionMismatch(format!(
                "{} payload symbols, scheme carries {}",
                payload.len(),
                self.payload_len()
            )));
        }
        match &self.inner {
            Inner::Simo(_) => Ok(simo::encode_simo(payload)),
            Inner::Reduced(d) => Ok(simo::encode_simo_reduced(payload, d.pilots())),
            Inner::Mimo(d) => {
                let cols = payload.len() / self.n_t;
                d.plan().encode(&CMatrix::from_column_slice(self.n_t, cols, payload))
            }
            Inner::Baseline(d) => {
                let cols = payload.len() / self.n_t;
                d.encode(&CMatrix::from_column_slice(self.n_t, cols, payload))
            }
        }
    }

    /// Payload entries of a full `n_t x T` signal, in encoding order.
    pub fn extract_payload(&self, x: &CMatrix) -> Vec<C64> {
        match &self.inner {
            Inner::Simo(d) => x.row(0).iter().take(d.payload_len()).copied().collect(),
            Inner::Reduced(d) => x.row(0).iter().take(d.payload_len()).copied().collect(),
            Inner::Mimo(d) => d.plan().extract_payload(x).iter().copied().collect(),
            Inner::Baseline(d) => x.columns(d.pilots(), x.ncols() - d.pilots()).iter().copied().collect(),
        }
    }

    pub fn decode(&self, y_noisy: &CMatrix) -> Result<SchemeDecoded> {
        let (x, diagnostics) = match &self.inner {
            Inner::Simo(d) => {
                let out = d.decode(y_noisy)?;
                (CMatrix::from_row_slice(1, out.symbols.len(), &out.symbols), out.diagnostics)
            }
            Inner::Reduced(d) => {
                let out = d.decode(y_noisy)?;
                (CMatrix::from_row_slice(1, out.symbols.len(), &out.symbols), out.diagnostics)
            }
            Inner::Mimo(d) => {
                let out = d.decode(y_noisy)?;
                (out.x, out.diagnostics)
            }
            Inner::Baseline(d) => d.decode(y_noisy)?,
        };
        Ok(SchemeDecoded {
            payload: self.extract_payload(&x),
            diagnostics,
        })
    }

    /// Noiseless map from payload to the free coordinates of the canonical
    /// basis of the signal subspace spanned by `A diag(x_m)`.
    pub fn canonical_map(&self, payload: &[C64]) -> Result<Vec<C64>> {
        let block = self.encode(payload)?;
        let r = mimo::build_r(&self.profile, block.matrix())?;
        Ok(subspace::canonical_form(&r, PivotPolicy::FixedLeading)?.free_coordinates())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, sample_fading};
    use crate::linalg::sample_cn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decoder_names_roundtrip() {
        for kind in DecoderKind::ALL {
            assert_eq!(kind.as_str().parse::<DecoderKind>().unwrap(), kind);
        }
        assert!("ml".parse::<DecoderKind>().is_err());
    }

    #[test]
    fn regimes() {
        assert!(check_regime(DecoderKind::Simo, 2, 3, 1, 2).is_ok());
        assert!(check_regime(DecoderKind::Simo, 2, 3, 1, 1).is_err());
        assert!(check_regime(DecoderKind::SimoReduced, 2, 5, 1, 1).is_ok());
        assert!(check_regime(DecoderKind::SimoReduced, 2, 3, 1, 1).is_err());
        assert!(check_regime(DecoderKind::Mimo, 1, 6, 2, 2).is_ok());
        assert!(check_regime(DecoderKind::Mimo, 2, 8, 2, 3).is_err());
        assert!(check_regime(DecoderKind::Mimo, 2, 5, 2, 4).is_err());
        assert!(check_regime(DecoderKind::Simo, 3, 3, 1, 4).is_err());
    }

    #[test]
    fn payload_sizes() {
        let p = CorrelationProfile::two_innovation_example(C64::new(1.0, 0.0), C64::new(2.0, 0.0)).unwrap();
        let simo = Scheme::new(DecoderKind::Simo, p.clone(), 1, 2, SchemeOptions::default()).unwrap();
        let base = Scheme::new(DecoderKind::Baseline, p, 1, 2, SchemeOptions::default()).unwrap();
        assert_eq!(simo.payload_len(), 2);
        assert_eq!(base.payload_len(), 1);
        let flat = CorrelationProfile::block_fading(6).unwrap();
        let mimo = Scheme::new(DecoderKind::Mimo, flat, 2, 2, SchemeOptions::default()).unwrap();
        assert_eq!(mimo.payload_len(), 8);
    }

    #[test]
    fn every_scheme_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let p = CorrelationProfile::random(&mut rng, 2, 8).unwrap();
        for (kind, n_t, n_r) in [
            (DecoderKind::Simo, 1, 3),
            (DecoderKind::SimoReduced, 1, 1),
            (DecoderKind::Mimo, 2, 4),
            (DecoderKind::Baseline, 2, 2),
        ] {
            let scheme = Scheme::new(kind, p.clone(), n_t, n_r, SchemeOptions::default()).unwrap();
            let payload: Vec<C64> = (0..scheme.payload_len()).map(|_| sample_cn(&mut rng)).collect();
            let block = scheme.encode(&payload).unwrap();
            assert_eq!(scheme.extract_payload(block.matrix()), payload);
            let y = apply_channel(&block, &sample_fading(&p, n_t, n_r, &mut rng).unwrap()).unwrap();
            let out = scheme.decode(&y).unwrap();
            for (a, b) in out.payload.iter().zip(&payload) {
                assert!((a - b).norm() < 1e-8, "{kind}: {a} vs {b}");
            }
        }
    }
}
