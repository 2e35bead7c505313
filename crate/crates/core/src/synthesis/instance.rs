//! A configured architecture bound to its physical context (couplings,
//! carrier, optimizer budgets), ready to be driven by the evaluation loops.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::bdris::bdris_full_configure;
use super::precoder::{digital_precoder, hybrid_precoder, milac_precoder};
use super::sim::{sim_configure, sim_fit_codeword, SimStack};
use super::tree::{bdris_tree_configure, tree_fit_codeword, TreeShape};
use super::BeamSolution;
use crate::error::{Error, Result};
use crate::geometry::CarrierConfig;
use crate::propagation::{CouplingMatrix, UserChannel};

/// Optimizer knobs shared by the iterative configurators.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerBudget {
    pub iterations: usize,
    pub restarts: usize,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            iterations: 500,
            restarts: 4,
        }
    }
}

/// One architecture with everything fixed except the channel realization.
#[derive(Debug, Clone)]
pub enum ArchInstance {
    Digital {
        m: usize,
    },
    Hybrid {
        m: usize,
    },
    Milac {
        m: usize,
    },
    BdrisFull {
        /// Environment-facing element count.
        m: usize,
        /// Antenna-to-surface coupling, passivity-normalized.
        coupling: CouplingMatrix,
        /// Scale applied by the passivity normalization (1 when untouched).
        passivity_factor: f64,
    },
    BdrisTree {
        m: usize,
        coupling: CouplingMatrix,
        passivity_factor: f64,
        shape: TreeShape,
        carrier: CarrierConfig,
        budget: OptimizerBudget,
    },
    Sim {
        stack: SimStack,
        feed_coupling: CouplingMatrix,
        passivity_factor: f64,
        budget: OptimizerBudget,
    },
}

impl ArchInstance {
    pub fn label(&self) -> &'static str {
        match self {
            ArchInstance::Digital { .. } => "digital",
            ArchInstance::Hybrid { .. } => "hybrid",
            ArchInstance::Milac { .. } => "milac",
            ArchInstance::BdrisFull { .. } => "bdris_full",
            ArchInstance::BdrisTree { .. } => "bdris_tree",
            ArchInstance::Sim { .. } => "sim",
        }
    }

    /// Environment-facing element count.
    pub fn aperture_elements(&self) -> usize {
        match self {
            ArchInstance::Digital { m }
            | ArchInstance::Hybrid { m }
            | ArchInstance::Milac { m }
            | ArchInstance::BdrisFull { m, .. }
            | ArchInstance::BdrisTree { m, .. } => *m,
            ArchInstance::Sim { stack, .. } => stack.output_size(),
        }
    }

    /// Best configuration for a channel realization; `seed` drives the
    /// iterative configurators and is ignored by the closed-form ones.
    pub fn configure_comm(&self, h: &UserChannel, seed: u64) -> Result<BeamSolution> {
        self.check_channel(h)?;
        match self {
            ArchInstance::Digital { .. } => {
                digital_precoder(&row_matrix(h.gains()))
            }
            ArchInstance::Milac { .. } => milac_precoder(&row_matrix(h.gains())),
            ArchInstance::Hybrid { .. } => hybrid_precoder(h.gains()),
            ArchInstance::BdrisFull { coupling, .. } => bdris_full_configure(coupling, h),
            ArchInstance::BdrisTree {
                coupling,
                shape,
                carrier,
                budget,
                ..
            } => bdris_tree_configure(coupling, h, *shape, carrier, budget.iterations, seed),
            ArchInstance::Sim {
                stack,
                feed_coupling,
                budget,
                ..
            } => sim_configure(
                stack,
                feed_coupling,
                h,
                budget.iterations,
                budget.restarts,
                seed,
            ),
        }
    }

    /// The beam this architecture actually radiates when asked to transmit a
    /// unit-modulus codeword `c`: exact `c/√M` for architectures with direct
    /// element-level control, a least-squares fit for the cascaded ones.
    pub fn realize_codeword(
        &self,
        codeword: &DVector<Complex64>,
        seed: u64,
    ) -> Result<DVector<Complex64>> {
        let m = self.aperture_elements();
        if codeword.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "codeword has {} entries but the aperture has {m}",
                codeword.len()
            )));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let target = codeword.map(|e| e * scale);
        match self {
            ArchInstance::Digital { .. }
            | ArchInstance::Milac { .. }
            | ArchInstance::Hybrid { .. } => Ok(target),
            ArchInstance::BdrisFull { coupling, .. } => {
                // Rank-one least squares: exact replica up to the passive
                // amplitude limit min(1, ‖G·f‖).
                let (feed, _) = super::precoder::dominant_right_singular(coupling.entries())?;
                let x = coupling.entries() * &feed;
                let reach = x.norm().min(1.0);
                Ok(target.map(|e| e * reach))
            }
            ArchInstance::BdrisTree {
                coupling,
                shape,
                carrier,
                budget,
                ..
            } => {
                let (_, _, beam) = tree_fit_codeword(
                    coupling,
                    &target,
                    *shape,
                    carrier,
                    budget.iterations,
                    seed,
                )?;
                Ok(beam)
            }
            ArchInstance::Sim {
                stack,
                feed_coupling,
                budget,
                ..
            } => {
                let (_, _, beam) = sim_fit_codeword(
                    stack,
                    feed_coupling,
                    &target,
                    budget.iterations,
                    budget.restarts,
                    seed,
                )?;
                Ok(beam)
            }
        }
    }

    fn check_channel(&self, h: &UserChannel) -> Result<()> {
        let m = self.aperture_elements();
        if h.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} entries but the aperture has {m}",
                h.len()
            )));
        }
        Ok(())
    }
}

fn row_matrix(h: &DVector<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(1, h.len(), |_, j| h[j])
}

/// Beam radiated at the environment-facing aperture for a sweeping codeword.
/// Architectures with per-element control return `c/√M` exactly; cascaded
/// architectures return their least-squares fit.
pub fn realizable_sweep_beam(
    instance: &ArchInstance,
    codeword: &DVector<Complex64>,
    seed: u64,
) -> Result<DVector<Complex64>> {
    instance.realize_codeword(codeword, seed)
}

/// Residual of a realized beam against the ray of the codeword:
/// min_α ‖beam − α·c‖ / ‖c‖.
pub fn fit_residual(beam: &DVector<Complex64>, codeword: &DVector<Complex64>) -> f64 {
    let c_norm_sq = codeword.norm_squared();
    if c_norm_sq == 0.0 {
        return beam.norm();
    }
    let overlap = codeword.dotc(beam);
    let alpha = overlap / Complex64::new(c_norm_sq, 0.0);
    (beam - codeword.map(|e| e * alpha)).norm() / c_norm_sq.sqrt()
}
