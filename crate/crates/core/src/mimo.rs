//! Two-phase decoding for `n_t` transmit antennas.
//!
//! The received signal subspace is spanned by the rows of
//! `R = [A diag(x_1); ...; A diag(x_{n_t})]` and has dimension `n_t Q`.
//! Its canonical basis `B` satisfies, for every antenna `m` and `t > n_t Q`,
//!
//! ```text
//! A(:, t) x_m(t) = A(:, 1:n_t Q) diag(B(:, t)) x_m(1:n_t Q)^T
//! ```
//!
//! An identity training block in slots `n_t Q + 1 ..= n_t (Q + 1)` makes the
//! left side known there, which pins `x_m(1:n_t Q)` (nonlinear phase). Every
//! later slot then follows from a single division (linear phase).

use itertools::Itertools;
use serde::Serialize;

use crate::channel::{CorrelationProfile, Pin, TransmitBlock};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::recovery::{ConditionFailure, RecoveryReport};
use crate::simo::Diagnostics;
use crate::subspace::{self, CanonicalSubspace, PivotPolicy};

/// Identity training in slots `n_t Q .. n_t (Q + 1)` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MimoTrainingPlan {
    n_t: usize,
    rank: usize,
    block_len: usize,
}

impl MimoTrainingPlan {
    pub fn new(n_t: usize, rank: usize, block_len: usize) -> Result<Self> {
        if n_t == 0 || rank == 0 {
            return Err(Error::InvalidConfig("n_t and Q must be positive".into()));
        }
        if block_len < n_t * (rank + 1) {
            return Err(Error::InvalidConfig(format!(
                "T = {block_len} is shorter than n_t (Q + 1) = {}",
                n_t * (rank + 1)
            )));
        }
        Ok(Self { n_t, rank, block_len })
    }

    pub fn for_profile(profile: &CorrelationProfile, n_t: usize) -> Result<Self> {
        Self::new(n_t, profile.rank(), profile.block_len())
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Signal subspace dimension `n_t Q`.
    pub fn subspace_dim(&self) -> usize {
        self.n_t * self.rank
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn training_slots(&self) -> std::ops::Range<usize> {
        self.subspace_dim()..self.subspace_dim() + self.n_t
    }

    /// Slots carrying payload, in order.
    pub fn payload_slots(&self) -> Vec<usize> {
        let training = self.training_slots();
        (0..self.block_len).filter(|t| !training.contains(t)).collect()
    }

    /// `n_t (T - n_t)` payload symbols per block.
    pub fn payload_len(&self) -> usize {
        self.n_t * (self.block_len - self.n_t)
    }

    /// Builds `X` from an `n_t x (T - n_t)` payload matrix.
    pub fn encode(&self, payload: &CMatrix) -> Result<TransmitBlock> {
        if payload.shape() != (self.n_t, self.block_len - self.n_t) {
            return Err(Error::DimensionMismatch(format!(
                "payload must be {}x{}, got {}x{}",
                self.n_t,
                self.block_len - self.n_t,
                payload.nrows(),
                payload.ncols()
            )));
        }
        let mut x = CMatrix::zeros(self.n_t, self.block_len);
        for (j, t) in self.payload_slots().into_iter().enumerate() {
            x.set_column(t, &payload.column(j));
        }
        let mut pins = Vec::with_capacity(self.n_t * self.n_t);
        for (j, t) in self.training_slots().enumerate() {
            for m in 0..self.n_t {
                let value = if m == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                x[(m, t)] = value;
                pins.push(Pin { antenna: m, time: t, value });
            }
        }
        TransmitBlock::new(x, pins)
    }

    /// Payload columns of `x`, inverse of [`Self::encode`].
    pub fn extract_payload(&self, x: &CMatrix) -> CMatrix {
        x.select_columns(&self.payload_slots())
    }
}

/// `R = [A diag(x_1); ...; A diag(x_{n_t})]`, `n_t Q x T`.
pub fn build_r(profile: &CorrelationProfile, x: &CMatrix) -> Result<CMatrix> {
    let (q, t_len) = profile.matrix().shape();
    if x.ncols() != t_len || x.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "signal is {}x{}, profile has T = {t_len}",
            x.nrows(),
            x.ncols()
        )));
    }
    let a = profile.matrix();
    let mut r = CMatrix::zeros(x.nrows() * q, t_len);
    for m in 0..x.nrows() {
        let block = CMatrix::from_fn(q, t_len, |i, t| a[(i, t)] * x[(m, t)]);
        r.view_mut((m * q, 0), (q, t_len)).copy_from(&block);
    }
    Ok(r)
}

/// The `n_t Q x n_t Q` matrix stacking `A(:, 1:n_t Q) diag(B(:, t))` over
/// the training slots.
pub fn nonlinear_system(b: &CanonicalSubspace, profile: &CorrelationProfile, plan: &MimoTrainingPlan) -> CMatrix {
    let l = plan.subspace_dim();
    let q = profile.rank();
    let a_lead = profile.leading(l);
    let mut system = CMatrix::zeros(l, l);
    for (j, t) in plan.training_slots().enumerate() {
        let block = &a_lead * CMatrix::from_diagonal(&b.matrix().column(t).into_owned());
        system.view_mut((j * q, 0), (q, l)).copy_from(&block);
    }
    system
}

/// Solves the training-anchored systems for `X(1:n_t Q)`, returned as
/// `n_t x n_t Q`, with the system's condition number.
pub fn nonlinear_phase(
    b: &CanonicalSubspace,
    profile: &CorrelationProfile,
    plan: &MimoTrainingPlan,
) -> Result<(CMatrix, f64)> {
    let l = plan.subspace_dim();
    let q = profile.rank();
    if b.dim() != l || b.ambient_dim() != plan.block_len() || profile.block_len() != plan.block_len() {
        return Err(Error::DimensionMismatch(format!(
            "canonical basis is {}x{}, plan expects {l}x{}",
            b.dim(),
            b.ambient_dim(),
            plan.block_len()
        )));
    }
    let system = nonlinear_system(b, profile, plan);
    // identity training: antenna m sends 1 only in training slot m
    let mut rhs = CMatrix::zeros(l, plan.n_t());
    for (j, t) in plan.training_slots().enumerate() {
        rhs.view_mut((j * q, j), (q, 1)).copy_from(&profile.column(t));
    }
    let (solution, condition) = linalg::solve_square(&system, &rhs, "nonlinear-phase system")?;
    Ok((solution.transpose(), condition))
}

/// How the linear phase recovers `x_m(t)` for `t >= n_t (Q + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum LinearPhase {
    /// Divide row 1: `x_m(t) = A^1(1:n_tQ) diag(B(:,t)) x_m^T / A^1(t)`.
    #[default]
    FirstRow,
    /// Least squares over all `Q` rows.
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimoDecoded {
    /// `n_t x T` estimate with the training block set exactly.
    pub x: CMatrix,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct MimoDecoder {
    profile: CorrelationProfile,
    plan: MimoTrainingPlan,
    linear_phase: LinearPhase,
}

impl MimoDecoder {
    pub fn new(profile: CorrelationProfile, n_t: usize, linear_phase: LinearPhase) -> Result<Self> {
        let plan = MimoTrainingPlan::for_profile(&profile, n_t)?;
        Ok(Self {
            profile,
            plan,
            linear_phase,
        })
    }

    pub fn plan(&self) -> &MimoTrainingPlan {
        &self.plan
    }

    pub fn profile(&self) -> &CorrelationProfile {
        &self.profile
    }

    pub fn decode(&self, y_noisy: &CMatrix) -> Result<MimoDecoded> {
        let l = self.plan.subspace_dim();
        let n_t = self.plan.n_t();
        let t_len = self.plan.block_len();
        if y_noisy.ncols() != t_len {
            return Err(Error::DimensionMismatch(format!(
                "received block has {} slots, expected {t_len}",
                y_noisy.ncols()
            )));
        }
        if y_noisy.nrows() < l {
            return Err(Error::DimensionMismatch(format!(
                "{} receive antennas cannot resolve a {l}-dimensional subspace",
                y_noisy.nrows()
            )));
        }
        let estimate = subspace::signal_subspace(y_noisy, l)?.require_full_rank()?;
        let subspace_gap = estimate.gap_ratio();
        let canon = subspace::canonical_form(&estimate.basis, PivotPolicy::FixedLeading)?;
        let b = canon.matrix();
        let b_scale = linalg::max_abs(b);
        let training_min = self
            .plan
            .training_slots()
            .flat_map(|t| b.column(t).iter().map(|z| z.norm()).collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min);
        let mut min_guard_ratio = training_min / b_scale;

        let (lead, system_condition) = nonlinear_phase(&canon, &self.profile, &self.plan)?;
        let mut x = CMatrix::zeros(n_t, t_len);
        x.columns_mut(0, l).copy_from(&lead);
        for (j, t) in self.plan.training_slots().enumerate() {
            x[(j, t)] = C64::new(1.0, 0.0);
        }

        let a = self.profile.matrix();
        let a_lead = self.profile.leading(l);
        let a_scale = linalg::max_abs(a);
        for t in self.plan.training_slots().end..t_len {
            let mixed = &a_lead * CMatrix::from_diagonal(&b.column(t).into_owned());
            // predicted[:, m] = A(:,1:l) diag(B(:,t)) x_m(1:l)^T
            let predicted = &mixed * lead.transpose();
            match self.linear_phase {
                LinearPhase::FirstRow => {
                    let pivot = a[(0, t)];
                    let magnitude = pivot.norm();
                    min_guard_ratio = min_guard_ratio.min(magnitude / a_scale);
                    if magnitude <= linalg::GUARD_TOLERANCE * a_scale {
                        return Err(Error::GuardTrip {
                            what: format!("A[1,{}]", t + 1),
                            magnitude,
                            threshold: linalg::GUARD_TOLERANCE * a_scale,
                        });
                    }
                    for m in 0..n_t {
                        x[(m, t)] = predicted[(0, m)] / pivot;
                    }
                }
                LinearPhase::LeastSquares => {
                    let col = self.profile.column(t);
                    let norm_sq = col.norm_squared();
                    min_guard_ratio = min_guard_ratio.min(norm_sq.sqrt() / a_scale);
                    for m in 0..n_t {
                        let num = (col.adjoint() * predicted.column(m))[(0, 0)];
                        x[(m, t)] = num / norm_sq;
                    }
                }
            }
        }
        Ok(MimoDecoded {
            x,
            diagnostics: Diagnostics {
                subspace_gap,
                pivot_condition: canon.pivot_condition(),
                system_condition: Some(system_condition),
                residual: None,
                min_guard_ratio,
            },
        })
    }
}

pub fn decode_mimo(y_noisy: &CMatrix, profile: &CorrelationProfile, plan: &MimoTrainingPlan) -> Result<CMatrix> {
    MimoDecoder::new(profile.clone(), plan.n_t(), LinearPhase::default())?
        .decode(y_noisy)
        .map(|d| d.x)
}

/// Every `Q` columns among the first `n_t (Q + 1)` columns of `A` must be
/// linearly independent. All `C(n_t (Q + 1), Q)` subsets are enumerated.
pub fn check_recovery_conditions_mimo(profile: &CorrelationProfile, n_t: usize) -> RecoveryReport {
    let notes = vec![
        "transmit signal needs a continuous distribution over n_t-dimensional row spans; \
         finite QAM payloads only approximate this"
            .to_string(),
    ];
    let q = profile.rank();
    let t_len = profile.block_len();
    let span = n_t * (q + 1);
    if n_t == 0 || span > t_len {
        let failure = ConditionFailure {
            name: "block_too_short".into(),
            indices: vec![("T".to_string(), t_len), ("n_t(Q+1)".to_string(), span)],
            magnitude: 0.0,
        };
        return RecoveryReport::from_failures(vec![failure], notes);
    }
    let a = profile.matrix();
    let scale = linalg::singular_values(a)[0];
    let failures = (0..span)
        .combinations(q)
        .filter_map(|cols| {
            let sub = a.select_columns(&cols);
            let sigma_min = linalg::singular_values(&sub).last().copied().unwrap_or(0.0);
            (sigma_min <= linalg::RANK_TOLERANCE * scale).then(|| ConditionFailure {
                name: "dependent_columns".into(),
                indices: cols.iter().map(|&c| ("t".to_string(), c + 1)).collect(),
                magnitude: sigma_min,
            })
        })
        .collect();
    RecoveryReport::from_failures(failures, notes)
}
