//! Per-architecture analog/digital configuration: given a channel
//! realization, compute the configuration that maximizes the end-to-end gain
//! to a single-antenna user, and expose the beam set each architecture can
//! realize for codebook sweeping.

mod bdris;
mod instance;
mod precoder;
mod sim;
mod tree;

pub use bdris::bdris_full_configure;
pub use instance::{fit_residual, realizable_sweep_beam, ArchInstance, OptimizerBudget};
pub use precoder::{digital_precoder, hybrid_precoder, milac_precoder};
pub use sim::{sim_configure, sim_objective, sim_phase_gradient, SimStack};
pub use tree::{bdris_tree_configure, tree_scattering, TreeNetwork, TreeShape};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagation::spectral_norm;

/// Connectivity of the reconfigurable impedance network behind a
/// beyond-diagonal surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdrisTopology {
    Full,
    Tree,
}

/// One transceiver architecture and its tunable-parameter counts.
///
/// `m` is the environment-facing element count, `k` the RF-chain count,
/// `n` the antenna-facing element count of a beyond-diagonal surface, and
/// `layers` the metasurface stack depth.
#[derive(Debug, Clone, PartialEq)]
pub enum ArchitectureSpec {
    /// One RF chain per element; the baseline (k = m by construction).
    Digital { m: usize },
    Hybrid { m: usize, k: usize },
    Milac { m: usize, k: usize },
    Sim {
        m: usize,
        k: usize,
        layers: usize,
        /// Spacing between adjacent metasurface layers, meters.
        layer_spacing: f64,
    },
    Bdris {
        m: usize,
        n: usize,
        k: usize,
        topology: BdrisTopology,
    },
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        let (m, k) = (self.m(), self.k());
        if m < 1 {
            return Err(Error::InvalidArchitecture(
                "environment-facing element count must be at least 1".into(),
            ));
        }
        if k < 1 {
            return Err(Error::InvalidArchitecture(
                "RF-chain count must be at least 1".into(),
            ));
        }
        match self {
            ArchitectureSpec::Sim {
                layers,
                layer_spacing,
                ..
            } => {
                if *layers < 1 {
                    return Err(Error::InvalidArchitecture(
                        "a metasurface stack needs at least one layer".into(),
                    ));
                }
                if !(*layer_spacing > 0.0) || !layer_spacing.is_finite() {
                    return Err(Error::InvalidArchitecture(format!(
                        "layer spacing must be positive, got {layer_spacing}"
                    )));
                }
            }
            ArchitectureSpec::Bdris { n, .. } => {
                if *n < 1 {
                    return Err(Error::InvalidArchitecture(
                        "antenna-facing element count must be at least 1".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Environment-facing element count (M).
    pub fn m(&self) -> usize {
        match self {
            ArchitectureSpec::Digital { m }
            | ArchitectureSpec::Hybrid { m, .. }
            | ArchitectureSpec::Milac { m, .. }
            | ArchitectureSpec::Sim { m, .. }
            | ArchitectureSpec::Bdris { m, .. } => *m,
        }
    }

    /// RF-chain count (K); a fully digital array has one chain per element.
    pub fn k(&self) -> usize {
        match self {
            ArchitectureSpec::Digital { m } => *m,
            ArchitectureSpec::Hybrid { k, .. }
            | ArchitectureSpec::Milac { k, .. }
            | ArchitectureSpec::Sim { k, .. }
            | ArchitectureSpec::Bdris { k, .. } => *k,
        }
    }

    /// Antenna-facing element count (N); zero for architectures without a
    /// separate antenna-facing sector.
    pub fn n(&self) -> usize {
        match self {
            ArchitectureSpec::Bdris { n, .. } => *n,
            _ => 0,
        }
    }

    /// Metasurface layer count (L); zero for non-stacked architectures.
    pub fn layers(&self) -> usize {
        match self {
            ArchitectureSpec::Sim { layers, .. } => *layers,
            _ => 0,
        }
    }

    /// Stable label used in result rows and CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            ArchitectureSpec::Digital { .. } => "digital",
            ArchitectureSpec::Hybrid { .. } => "hybrid",
            ArchitectureSpec::Milac { .. } => "milac",
            ArchitectureSpec::Sim { .. } => "sim",
            ArchitectureSpec::Bdris {
                topology: BdrisTopology::Full,
                ..
            } => "bdris_full",
            ArchitectureSpec::Bdris {
                topology: BdrisTopology::Tree,
                ..
            } => "bdris_tree",
        }
    }
}

/// The analog payload realizing a beam, tagged per architecture.
#[derive(Debug, Clone)]
pub enum AnalogConfig {
    Digital,
    /// Circuit-domain linear map from the logical stream to the antenna
    /// ports; spectral norm at most one.
    Milac { transmission: DMatrix<Complex64> },
    /// Per-element phase-shifter settings, radians.
    HybridPhases { phases: DVector<f64> },
    /// Wave-domain transmission matrix of a fully-connected surface.
    BdrisTransmission { transmission: DMatrix<Complex64> },
    /// Susceptance assignment on a tree-connected network plus the resulting
    /// transmission block.
    BdrisTree {
        network: TreeNetwork,
        transmission: DMatrix<Complex64>,
    },
    /// Per-layer metasurface phases, radians.
    SimPhases { phases: Vec<DVector<f64>> },
}

/// Optimized analog configuration plus the resulting beam at the
/// environment-facing aperture and the achieved end-to-end gain under unit
/// transmit power.
#[derive(Debug, Clone)]
pub struct BeamSolution {
    /// Feed excitation at the RF chains, unit norm.
    pub feed: DVector<Complex64>,
    pub analog: AnalogConfig,
    /// Beam radiated by the environment-facing aperture (length M).
    pub effective_beam: DVector<Complex64>,
    /// |end-to-end channel| with unit transmit power.
    pub gain: f64,
}

impl BeamSolution {
    /// Checks the constraint set of the tagged payload: unit-norm feed,
    /// unit-modulus phases, passive transmission matrices.
    pub fn validate(&self) -> Result<()> {
        if (self.feed.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArchitecture(format!(
                "feed norm {} is not 1",
                self.feed.norm()
            )));
        }
        if !self.gain.is_finite() || self.gain < 0.0 {
            return Err(Error::InvalidArchitecture(format!(
                "gain {} is not a nonnegative real",
                self.gain
            )));
        }
        match &self.analog {
            AnalogConfig::Digital => {}
            AnalogConfig::Milac { transmission }
            | AnalogConfig::BdrisTransmission { transmission }
            | AnalogConfig::BdrisTree { transmission, .. } => {
                let s = spectral_norm(transmission);
                if s > 1.0 + 1e-9 {
                    return Err(Error::InvalidArchitecture(format!(
                        "transmission payload has spectral norm {s} > 1"
                    )));
                }
            }
            AnalogConfig::HybridPhases { phases } => {
                if phases.iter().any(|p| !p.is_finite()) {
                    return Err(Error::InvalidArchitecture(
                        "phase payload contains non-finite values".into(),
                    ));
                }
            }
            AnalogConfig::SimPhases { phases } => {
                for layer in phases {
                    if layer.iter().any(|p| !p.is_finite()) {
                        return Err(Error::InvalidArchitecture(
                            "phase payload contains non-finite values".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
