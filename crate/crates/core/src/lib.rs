//! Full and low-rank continuous-time Kalman/Riccati flows on their natural
//! Riemannian geometries, and tools to measure their contraction.
//!
//! * [`spd`]: affine-invariant geometry of the SPD cone.
//! * [`riccati`]: the full-rank Riccati flow, stationary solution and filter.
//! * [`fixed_rank`]: quotient geometry of fixed-rank PSD matrices `U S U'`.
//! * [`lowrank`]: rank-preserving low-rank filter (subspace flow plus
//!   projected Riccati), continuous and discrete time.
//! * [`contraction`]: pairwise distance series, rate fits and contraction checks.

pub mod contraction;
pub mod error;
pub mod fixed_rank;
pub mod linalg;
pub mod lowrank;
pub mod par;
pub mod random;
pub mod riccati;
pub mod spd;

pub use error::{Error, Result};
pub use fixed_rank::{
    align, approx_distance, approx_distance_parts, grassmann_distance, horizontal_project, metric_fixed_rank,
    to_matrix, ApproxDistance, FixedRankPsd, HorizontalTangent, StiefelFrame,
};
pub use lowrank::{
    discrete_step, dominant_subspace, integrate_lowrank, lowrank_riccati_rhs, oja_rhs, LowRankConfig,
    LowRankFilterState,
};
pub use riccati::{
    filter_step, integrate_riccati, riccati_rhs, solve_are, FilterState, LtiSystem, MeasurementRecord, SystemModel,
};
pub use spd::{congruence, distance_spd, geodesic_spd, metric_spd, sqrt_spd, SpdMatrix, SpdTangent};
