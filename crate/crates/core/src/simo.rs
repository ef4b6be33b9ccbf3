//! Single-transmit-antenna noncoherent decoding.
//!
//! With `x(T) = 1` as the only pilot, the canonical basis of the received
//! signal subspace satisfies `B[q, t] = E[q, t] x(t) / x(q)` for `t > Q`,
//! where `E(t) = A(1:Q)^{-1} A(:, t)` is known to the receiver. The last
//! column gives `x(1..Q)` directly and row 1 chains out the rest.
//!
//! All indices in this module are 0-based; `t = T - 1` is the pilot slot.

use serde::Serialize;

use crate::channel::{CorrelationProfile, Pin, TransmitBlock};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::recovery::{ConditionFailure, RecoveryReport};
use crate::subspace::{self, PivotPolicy};

/// `E(t)` for `t = Q..T-1`, stored as the columns of a `Q x (T - Q)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInformation {
    e: CMatrix,
    rank: usize,
    lead_condition: f64,
}

impl SideInformation {
    /// `E[q, t]` for absolute time `t >= Q`.
    pub fn entry(&self, q: usize, t: usize) -> C64 {
        self.e[(q, t - self.rank)]
    }

    /// `E(t)` as a `Q x 1` column, `t >= Q`.
    pub fn column(&self, t: usize) -> CMatrix {
        self.e.columns(t - self.rank, 1).into_owned()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.e
    }

    pub fn lead_condition(&self) -> f64 {
        self.lead_condition
    }

    fn scale(&self) -> f64 {
        linalg::max_abs(&self.e)
    }
}

pub fn compute_side_information(profile: &CorrelationProfile) -> Result<SideInformation> {
    let q = profile.rank();
    let lead = profile.leading(q);
    let rest = profile.matrix().columns(q, profile.block_len() - q).into_owned();
    let (e, lead_condition) = match linalg::solve_square(&lead, &rest, "leading block of A") {
        Ok(solved) => solved,
        Err(Error::Singular { condition, .. }) => {
            return Err(Error::SingularPivotBlock { condition })
        }
        Err(err) => return Err(err),
    };
    Ok(SideInformation {
        e,
        rank: q,
        lead_condition,
    })
}

/// Which `(q, t)` pairs the single-pilot decoder divides by: every
/// `E[q, T-1]` and `E[0, t]` for `Q <= t < T-1`.
pub fn required_side_entries(profile: &CorrelationProfile) -> Vec<(usize, usize)> {
    let q = profile.rank();
    let t_len = profile.block_len();
    let mut pairs: Vec<(usize, usize)> = (0..q).map(|k| (k, t_len - 1)).collect();
    pairs.extend((q..t_len - 1).map(|t| (0, t)));
    pairs
}

/// Checks that every side-information entry the decoder divides by is
/// nonzero, once through `E` and once through the Cramer determinant
/// `det(A(1:Q) with column q replaced by A(:, t))`. The two routes must
/// agree; a disagreement is itself reported as a failure.
pub fn check_recovery_conditions_simo(profile: &CorrelationProfile) -> RecoveryReport {
    let notes = vec![
        "encoder must keep x(q) away from zero for q = 1..Q".to_string(),
    ];
    let q = profile.rank();
    let lead = profile.leading(q);
    let lead_sv = linalg::singular_values(&lead);
    let sigma_min = lead_sv.last().copied().unwrap_or(0.0);
    let side = match compute_side_information(profile) {
        Ok(side) => side,
        Err(_) => {
            let failure = ConditionFailure {
                name: "singular_leading_block".into(),
                indices: (1..=q).map(|k| ("t".to_string(), k)).collect(),
                magnitude: sigma_min,
            };
            return RecoveryReport::from_failures(vec![failure], notes);
        }
    };
    let lead_det = lead.clone().lu().determinant();
    let mut failures = Vec::new();
    for (k, t) in required_side_entries(profile) {
        let column = profile.column(t);
        // |E(t)| <= ||A(:,t)|| / sigma_min(A(1:Q))
        let scale = column.norm() / sigma_min;
        let threshold = linalg::GUARD_TOLERANCE * scale;
        let via_e = side.entry(k, t).norm();
        let mut replaced = lead.clone();
        replaced.set_column(k, &column.column(0));
        let det = replaced.lu().determinant().norm();
        let zero_by_e = via_e <= threshold;
        let zero_by_det = det <= threshold * lead_det.norm();
        let indices = vec![("q".to_string(), k + 1), ("t".to_string(), t + 1)];
        if zero_by_e != zero_by_det {
            failures.push(ConditionFailure {
                name: "method_disagreement".into(),
                indices,
                magnitude: via_e,
            });
        } else if zero_by_e {
            let name = if t == profile.block_len() - 1 {
                "pilot_column_zero"
            } else {
                "chaining_entry_zero"
            };
            failures.push(ConditionFailure {
                name: name.into(),
                indices,
                magnitude: det,
            });
        }
    }
    RecoveryReport::from_failures(failures, notes)
}

/// How step 5 recovers `x(t)` for `Q <= t < T-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Chaining {
    /// `x(t) = x(1) B[0, t] / E[0, t]`.
    #[default]
    FirstRow,
    /// Least-squares over every row `q` with nonzero `E[q, t]`.
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DecodeOptions {
    pub chaining: Chaining,
    /// Over-determined pilot systems whose relative residual exceeds this
    /// are rejected. `None` only records the residual.
    pub max_relative_residual: Option<f64>,
}

/// Per-decode numerical diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `sigma_L / sigma_1` of the received block.
    pub subspace_gap: f64,
    /// Condition number of the canonical pivot block.
    pub pivot_condition: f64,
    /// Condition number of the pilot-anchored linear system, when one is solved.
    pub system_condition: Option<f64>,
    /// Relative residual of an over-determined pilot system.
    pub residual: Option<f64>,
    /// Smallest `|divisor| / scale` seen by a division guard.
    pub min_guard_ratio: f64,
}

fn guard(what: impl FnOnce() -> String, value: C64, scale: f64, min_ratio: &mut f64) -> Result<C64> {
    let magnitude = value.norm();
    let threshold = linalg::GUARD_TOLERANCE * scale;
    let ratio = if scale > 0.0 { magnitude / scale } else { 0.0 };
    *min_ratio = min_ratio.min(ratio);
    if magnitude <= threshold {
        return Err(Error::GuardTrip {
            what: what(),
            magnitude,
            threshold,
        });
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Estimated `x(1..T)` (pilots included).
    pub symbols: Vec<C64>,
    pub diagnostics: Diagnostics,
}

/// Places `payload` in slots `0..T-1` and the unit pilot at `T-1`.
pub fn encode_simo(payload: &[C64]) -> TransmitBlock {
    let t_len = payload.len() + 1;
    let mut symbols = payload.to_vec();
    symbols.push(C64::new(1.0, 0.0));
    let x = CMatrix::from_row_slice(1, t_len, &symbols);
    let pin = Pin {
        antenna: 0,
        time: t_len - 1,
        value: C64::new(1.0, 0.0),
    };
    TransmitBlock::new(x, vec![pin]).expect("pilot matches by construction")
}

/// Single-pilot decoder for `Q <= min(T - 1, n_r)`.
#[derive(Debug, Clone)]
pub struct SimoDecoder {
    profile: CorrelationProfile,
    side: SideInformation,
    options: DecodeOptions,
}

impl SimoDecoder {
    pub fn new(profile: CorrelationProfile, options: DecodeOptions) -> Result<Self> {
        let side = compute_side_information(&profile)?;
        Ok(Self {
            profile,
            side,
            options,
        })
    }

    pub fn profile(&self) -> &CorrelationProfile {
        &self.profile
    }

    pub fn side_information(&self) -> &SideInformation {
        &self.side
    }

    /// Number of payload symbols per block, `T - 1`.
    pub fn payload_len(&self) -> usize {
        self.profile.block_len() - 1
    }

    pub fn decode(&self, y_noisy: &CMatrix) -> Result<Decoded> {
        let q = self.profile.rank();
        let t_len = self.profile.block_len();
        if y_noisy.ncols() != t_len {
            return Err(Error::DimensionMismatch(format!(
                "received block has {} slots, profile has {t_len}",
                y_noisy.ncols()
            )));
        }
        if y_noisy.nrows() < q {
            return Err(Error::DimensionMismatch(format!(
                "{} receive antennas cannot resolve a rank-{q} subspace",
                y_noisy.nrows()
            )));
        }
        let estimate = subspace::signal_subspace(y_noisy, q)?.require_full_rank()?;
        let subspace_gap = estimate.gap_ratio();
        let canon = subspace::canonical_form(&estimate.basis, PivotPolicy::FixedLeading)?;
        let b = canon.matrix();
        let b_scale = linalg::max_abs(b);
        let e_scale = self.side.scale();
        let pilot = t_len - 1;
        let mut min_guard_ratio = f64::INFINITY;

        let mut x = vec![C64::new(0.0, 0.0); t_len];
        x[pilot] = C64::new(1.0, 0.0);
        for k in 0..q {
            let b_kt = guard(|| format!("B[{},{}]", k + 1, t_len), b[(k, pilot)], b_scale, &mut min_guard_ratio)?;
            x[k] = self.side.entry(k, pilot) / b_kt;
        }
        for t in q..pilot {
            x[t] = match self.options.chaining {
                Chaining::FirstRow => {
                    let e = guard(|| format!("E[1,{}]", t + 1), self.side.entry(0, t), e_scale, &mut min_guard_ratio)?;
                    x[0] * b[(0, t)] / e
                }
                Chaining::LeastSquares => {
                    // B[k, t] = (E[k, t] / x(k)) x(t)
                    let (num, den) = (0..q).fold((C64::new(0.0, 0.0), 0.0), |(num, den), k| {
                        let c = self.side.entry(k, t) / x[k];
                        (num + c.conj() * b[(k, t)], den + c.norm_sqr())
                    });
                    let den = guard(
                        || format!("||E(t)/x|| at t={}", t + 1),
                        C64::new(den.sqrt(), 0.0),
                        e_scale / x[..q].iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE),
                        &mut min_guard_ratio,
                    )?;
                    num / (den * den)
                }
            };
        }
        Ok(Decoded {
            symbols: x,
            diagnostics: Diagnostics {
                subspace_gap,
                pivot_condition: canon.pivot_condition(),
                system_condition: None,
                residual: None,
                min_guard_ratio,
            },
        })
    }
}

/// Convenience wrapper: single-pilot decode with default options.
pub fn decode_simo(y_noisy: &CMatrix, profile: &CorrelationProfile) -> Result<Vec<C64>> {
    SimoDecoder::new(profile.clone(), DecodeOptions::default())?
        .decode(y_noisy)
        .map(|d| d.symbols)
}

/// Number of unit pilots the reduced-antenna decoder needs: `ceil(Q / L)`
/// with `L = min(n_r, Q)`.
pub fn reduced_pilot_count(q: usize, n_r: usize) -> usize {
    q.div_ceil(n_r.min(q).max(1))
}

/// Places `payload` in slots `0..T-pilots` followed by `pilots` unit pilots.
pub fn encode_simo_reduced(payload: &[C64], pilots: usize) -> TransmitBlock {
    let t_len = payload.len() + pilots;
    let mut symbols = payload.to_vec();
    symbols.extend(std::iter::repeat_n(C64::new(1.0, 0.0), pilots));
    let x = CMatrix::from_row_slice(1, t_len, &symbols);
    let pins = (payload.len()..t_len)
        .map(|time| Pin {
            antenna: 0,
            time,
            value: C64::new(1.0, 0.0),
        })
        .collect();
    TransmitBlock::new(x, pins).expect("pilots match by construction")
}

/// Decoder for fewer receive antennas than innovations.
///
/// The received rows span only an `L = min(n_r, Q)` dimensional part of the
/// signal subspace. Their canonical basis `G` still satisfies
/// `G(:, t) = G(:, 1:Q) diag(E(t)) [x(t)/x(1), ..., x(t)/x(Q)]^T`, so the
/// last `pilots` unit slots give `L * pilots` linear equations in the `Q`
/// unknowns `1/x(q)`.
#[derive(Debug, Clone)]
pub struct ReducedDecoder {
    profile: CorrelationProfile,
    side: SideInformation,
    n_r: usize,
    pilots: usize,
    options: DecodeOptions,
}

impl ReducedDecoder {
    pub fn new(profile: CorrelationProfile, n_r: usize, pilots: usize, options: DecodeOptions) -> Result<Self> {
        let q = profile.rank();
        let t_len = profile.block_len();
        if n_r == 0 {
            return Err(Error::DimensionMismatch("no receive antennas".into()));
        }
        let l = n_r.min(q);
        if pilots * l < q {
            return Err(Error::Underdetermined {
                equations: pilots * l,
                unknowns: q,
            });
        }
        // pilots must sit after the pivot slots 1..Q
        if pilots + q > t_len {
            return Err(Error::InvalidConfig(format!(
                "{pilots} pilots and {q} pivot slots do not fit in T = {t_len}"
            )));
        }
        let side = compute_side_information(&profile)?;
        Ok(Self {
            profile,
            side,
            n_r,
            pilots,
            options,
        })
    }

    pub fn pilots(&self) -> usize {
        self.pilots
    }

    pub fn payload_len(&self) -> usize {
        self.profile.block_len() - self.pilots
    }

    pub fn decode(&self, y_noisy: &CMatrix) -> Result<Decoded> {
        let q = self.profile.rank();
        let t_len = self.profile.block_len();
        if y_noisy.shape() != (self.n_r, t_len) {
            return Err(Error::DimensionMismatch(format!(
                "expected a {}x{t_len} block, got {}x{}",
                self.n_r,
                y_noisy.nrows(),
                y_noisy.ncols()
            )));
        }
        let l = self.n_r.min(q);
        let estimate = subspace::signal_subspace(y_noisy, l)?.require_full_rank()?;
        let subspace_gap = estimate.gap_ratio();
        let canon = subspace::canonical_form(&estimate.basis, PivotPolicy::FixedLeading)?;
        let g = canon.matrix();
        let g_lead = g.columns(0, q).into_owned();
        let first_pilot = t_len - self.pilots;

        let mut system = CMatrix::zeros(l * self.pilots, q);
        let mut rhs = CMatrix::zeros(l * self.pilots, 1);
        for (j, t) in (first_pilot..t_len).enumerate() {
            let block = &g_lead * CMatrix::from_diagonal(&self.side.column(t).column(0));
            system.view_mut((j * l, 0), (l, q)).copy_from(&block);
            rhs.view_mut((j * l, 0), (l, 1)).copy_from(&g.column(t));
        }
        let ls = linalg::least_squares(&system, &rhs, "stacked pilot system")?;
        if let Some(tolerance) = self.options.max_relative_residual {
            if ls.relative_residual > tolerance {
                return Err(Error::Inconsistent {
                    residual: ls.relative_residual,
                    tolerance,
                });
            }
        }
        let inv_x = ls.solution;
        let inv_scale = linalg::max_abs(&inv_x);
        let mut min_guard_ratio = f64::INFINITY;
        let mut x = vec![C64::new(1.0, 0.0); t_len];
        for k in 0..q {
            let u = guard(|| format!("1/x({})", k + 1), inv_x[(k, 0)], inv_scale, &mut min_guard_ratio)?;
            x[k] = C64::new(1.0, 0.0) / u;
        }
        let g_scale = linalg::max_abs(g);
        for t in q..first_pilot {
            let v = &g_lead * CMatrix::from_diagonal(&self.side.column(t).column(0)) * &inv_x;
            let norm = guard(
                || format!("predicted column norm at t={}", t + 1),
                C64::new(v.norm(), 0.0),
                g_scale * inv_scale * self.side.scale(),
                &mut min_guard_ratio,
            )?
            .re;
            let num = (v.adjoint() * g.column(t))[(0, 0)];
            x[t] = num / (norm * norm);
        }
        Ok(Decoded {
            symbols: x,
            diagnostics: Diagnostics {
                subspace_gap,
                pivot_condition: canon.pivot_condition(),
                system_condition: Some(ls.condition),
                residual: Some(ls.relative_residual),
                min_guard_ratio,
            },
        })
    }
}

/// Convenience wrapper: reduced-antenna decode with `ceil(Q / n_r)` pilots.
pub fn decode_simo_reduced(y_noisy: &CMatrix, profile: &CorrelationProfile) -> Result<Vec<C64>> {
    let n_r = y_noisy.nrows();
    let pilots = reduced_pilot_count(profile.rank(), n_r);
    ReducedDecoder::new(profile.clone(), n_r, pilots, DecodeOptions::default())?
        .decode(y_noisy)
        .map(|d| d.symbols)
}
