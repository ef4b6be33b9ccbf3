//! Noncoherent communication over correlatively changing fading channels.
//!
//! The fading trajectory between every transmit/receive antenna pair is a
//! linear combination of `Q < T` independent Gaussian innovations, fixed by
//! a known `Q x T` whitening matrix `A`. Neither side knows the innovations.
//! The noiseless received rows then live in the subspace spanned by the rows
//! of `A diag(x_m)`, and the decoders here read the transmitted symbols back
//! out of the canonical coordinates of that subspace.
//!
//! Modules:
//!
//! * [`channel`]: profiles, fading draws, the channel map and receiver noise.
//! * [`subspace`]: canonical subspace coordinates and signal-subspace estimation.
//! * [`simo`]: single-transmit-antenna decoders and their recovery conditions.
//! * [`mimo`]: the two-phase multi-antenna decoder.
//! * [`dof`]: QAM codebooks, Jacobian calibration, Monte Carlo sweeps and
//!   pre-log slope estimation, plus the pilot-based coherent baseline.

pub mod channel;
pub mod dof;
pub mod error;
pub mod linalg;
pub mod mimo;
pub mod recovery;
pub mod simo;
pub mod subspace;

pub use channel::{
    add_noise, apply_channel, sample_fading, CorrelationProfile, FadingRealization, Pin,
    ReceivedBlock, TransmitBlock,
};
pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use recovery::{ConditionFailure, RecoveryReport};
pub use subspace::{
    canonical_form, estimate_signal_subspace, subspace_distance, CanonicalSubspace, PivotPolicy,
};
