//! Simulation library for multi-antenna transceiver architectures.
//!
//! Models a point-to-point downlink in which a base station radiates through
//! an environment-facing planar aperture toward a single-antenna user, and
//! compares how different transceiver front ends (fully digital, hybrid
//! analog/digital, microwave linear analog computing, stacked metasurfaces,
//! and transceiver-integrated beyond-diagonal surfaces) realize the same
//! beamforming task. Three benchmark axes are covered:
//!
//! * communication spectral efficiency over seeded channel realizations,
//! * angle-of-departure estimation accuracy (maximum likelihood vs. the
//!   Cramér–Rao bound) with a swept unit-modulus codebook,
//! * reconfigurable-component counts as the aperture scales.
//!
//! All randomness is injected through explicit seeds; every experiment is
//! reproducible bit-for-bit from its configuration.

pub mod comm;
pub mod complexity;
pub mod error;
pub mod geometry;
pub mod propagation;
pub mod scenario;
pub mod sensing;
pub mod synthesis;
pub(crate) mod util;

pub use error::{Error, Result};
pub use geometry::{steering_vector, ArrayGeometry, CarrierConfig, Direction};
pub use propagation::{
    cascade_gain, near_field_coupling, normalize_passive, user_channel, ChannelModel,
    CouplingMatrix, UserChannel,
};
pub use synthesis::{
    bdris_full_configure, bdris_tree_configure, digital_precoder, fit_residual,
    hybrid_precoder, milac_precoder, realizable_sweep_beam, sim_configure, tree_scattering,
    AnalogConfig, ArchInstance, ArchitectureSpec, BdrisTopology, BeamSolution, OptimizerBudget,
    SimStack, TreeNetwork, TreeShape,
};

// Re-export the linear-algebra types that appear in public signatures.
pub use nalgebra::{DMatrix, DVector, Vector3};
pub use num_complex::Complex64;
