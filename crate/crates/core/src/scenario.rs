//! Physical layout of the benchmark scene and construction of per-architecture
//! instances from an [`ArchitectureSpec`].
//!
//! The environment-facing aperture sits at the origin with broadside +x for
//! every architecture, so the user channel is shared across them. Cascaded
//! architectures place their feed array behind the surface on boresight and
//! couple through the near field.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CarrierConfig};
use crate::propagation::{near_field_coupling, normalize_passive, CouplingMatrix};
use crate::synthesis::{
    ArchInstance, ArchitectureSpec, BdrisTopology, OptimizerBudget, SimStack, TreeShape,
};

/// Placement parameters shared by all cascaded architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemLayout {
    pub carrier: CarrierConfig,
    /// Boresight gap between the feed array and the surface it illuminates.
    pub feed_distance: f64,
    /// Feed element pitch; the feed element area defaults to its square.
    pub feed_spacing: f64,
    pub feed_element_area: f64,
    /// Cap coupling spectral norms at one (a passive aperture cannot
    /// amplify). On by default.
    pub normalize_couplings: bool,
}

impl SystemLayout {
    /// Defaults: feed 5λ behind the surface, 2λ feed pitch with unit-cell
    /// areas, passivity normalization on.
    pub fn new(carrier: CarrierConfig) -> Self {
        let lam = carrier.wavelength();
        Self {
            carrier,
            feed_distance: 5.0 * lam,
            feed_spacing: 2.0 * lam,
            feed_element_area: (2.0 * lam) * (2.0 * lam),
            normalize_couplings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feed_distance > 0.0) || !self.feed_distance.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "feed distance must be positive, got {}",
                self.feed_distance
            )));
        }
        if !(self.feed_spacing > 0.0) || !(self.feed_element_area > 0.0) {
            return Err(Error::InvalidScenario(
                "feed spacing and element area must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The 9×9 half-wavelength aperture at the origin used by the default
/// benchmarks.
pub fn default_aperture(carrier: &CarrierConfig) -> ArrayGeometry {
    let lam = carrier.wavelength();
    ArrayGeometry::planar(9, 9, lam / 2.0, Vector3::zeros(), Vector3::x())
        .expect("default aperture parameters are valid")
}

/// Near-square grid factorization: rows × cols = count with rows ≤ cols.
fn near_square(count: usize) -> (usize, usize) {
    let mut rows = (count as f64).sqrt().floor() as usize;
    while rows > 1 && count % rows != 0 {
        rows -= 1;
    }
    (rows.max(1), count / rows.max(1))
}

/// Feed array of `k` elements centered `distance` behind `front` along its
/// broadside axis.
fn feed_array(layout: &SystemLayout, k: usize, front: &ArrayGeometry, distance: f64) -> Result<ArrayGeometry> {
    let (rows, cols) = near_square(k);
    let center = front.center() - distance * front.normal();
    ArrayGeometry::planar(rows, cols, layout.feed_spacing, center, front.normal())?
        .with_element_area(layout.feed_element_area)
}

fn maybe_normalize(layout: &SystemLayout, g: CouplingMatrix) -> (CouplingMatrix, f64) {
    if layout.normalize_couplings {
        normalize_passive(&g)
    } else {
        (g, 1.0)
    }
}

/// Builds the runnable instance of one architecture against the shared
/// environment-facing aperture.
pub fn build_instance(
    spec: &ArchitectureSpec,
    aperture: &ArrayGeometry,
    layout: &SystemLayout,
    budget: OptimizerBudget,
) -> Result<ArchInstance> {
    spec.validate()?;
    layout.validate()?;
    let m = aperture.len();
    if spec.m() != m {
        return Err(Error::InvalidScenario(format!(
            "spec expects {} environment-facing elements but the aperture has {m}",
            spec.m()
        )));
    }
    match spec {
        ArchitectureSpec::Digital { .. } => Ok(ArchInstance::Digital { m }),
        ArchitectureSpec::Hybrid { .. } => Ok(ArchInstance::Hybrid { m }),
        ArchitectureSpec::Milac { .. } => Ok(ArchInstance::Milac { m }),
        ArchitectureSpec::Bdris { n, k, topology, .. } => {
            // The antenna-facing sector sits in the surface plane; its
            // spacing follows the aperture grid.
            let sector = if *n == m {
                aperture.clone()
            } else {
                let (rows, cols) = near_square(*n);
                let spacing = if aperture.element_spacing() > 0.0 {
                    aperture.element_spacing()
                } else {
                    layout.carrier.wavelength() / 2.0
                };
                ArrayGeometry::planar(rows, cols, spacing, aperture.center(), aperture.normal())?
            };
            let feed = feed_array(layout, *k, aperture, layout.feed_distance)?;
            let raw = near_field_coupling(&feed, &sector, &layout.carrier)?;
            let (coupling, passivity_factor) = maybe_normalize(layout, raw);
            Ok(match topology {
                BdrisTopology::Full => ArchInstance::BdrisFull {
                    m,
                    coupling,
                    passivity_factor,
                },
                BdrisTopology::Tree => ArchInstance::BdrisTree {
                    m,
                    coupling,
                    passivity_factor,
                    shape: TreeShape::Path,
                    carrier: layout.carrier.clone(),
                    budget,
                },
            })
        }
        ArchitectureSpec::Sim {
            k,
            layers,
            layer_spacing,
            ..
        } => {
            // Layer L-1 is the environment-facing aperture itself; earlier
            // layers stack behind it.
            let normal = aperture.normal();
            let geoms: Vec<ArrayGeometry> = (0..*layers)
                .map(|l| {
                    let depth = (*layers - 1 - l) as f64 * layer_spacing;
                    aperture.translated(-depth * normal)
                })
                .collect();
            let mut inter = Vec::with_capacity(layers - 1);
            let mut factors = 1.0;
            for l in 0..layers - 1 {
                let raw = near_field_coupling(&geoms[l], &geoms[l + 1], &layout.carrier)?;
                let (w, f) = maybe_normalize(layout, raw);
                factors *= f;
                inter.push(w);
            }
            let feed = feed_array(layout, *k, &geoms[0], layout.feed_distance)?;
            let raw0 = near_field_coupling(&feed, &geoms[0], &layout.carrier)?;
            let (g0, f0) = maybe_normalize(layout, raw0);
            factors *= f0;
            Ok(ArchInstance::Sim {
                stack: SimStack::new(geoms, inter)?,
                feed_coupling: g0,
                passivity_factor: factors,
                budget,
            })
        }
    }
}

/// Specs for the default benchmark lineup at a given aperture size.
pub fn default_specs(m: usize, k: usize, sim_layers: usize, layer_spacing: f64) -> Vec<ArchitectureSpec> {
    vec![
        ArchitectureSpec::Digital { m },
        ArchitectureSpec::Milac { m, k },
        ArchitectureSpec::Hybrid { m, k },
        ArchitectureSpec::Bdris {
            m,
            n: m,
            k,
            topology: BdrisTopology::Full,
        },
        ArchitectureSpec::Sim {
            m,
            k,
            layers: sim_layers,
            layer_spacing,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn near_square_factorizations() {
        assert_eq!(near_square(4), (2, 2));
        assert_eq!(near_square(81), (9, 9));
        assert_eq!(near_square(40), (5, 8));
        assert_eq!(near_square(7), (1, 7));
        assert_eq!(near_square(1), (1, 1));
    }

    #[test]
    fn builds_every_default_instance() {
        let carrier = CarrierConfig::with_wavelength(0.01).unwrap();
        let aperture = default_aperture(&carrier);
        let layout = SystemLayout::new(carrier);
        let budget = OptimizerBudget {
            iterations: 5,
            restarts: 1,
        };
        for spec in default_specs(81, 4, 3, layout.carrier.wavelength() / 2.0) {
            let inst = build_instance(&spec, &aperture, &layout, budget).unwrap();
            assert_eq!(inst.aperture_elements(), 81);
            assert_eq!(inst.label(), spec.label());
        }
    }

    #[test]
    fn feed_coupling_is_passivity_normalized() {
        let carrier = CarrierConfig::with_wavelength(0.01).unwrap();
        let aperture = default_aperture(&carrier);
        let layout = SystemLayout::new(carrier);
        let spec = ArchitectureSpec::Bdris {
            m: 81,
            n: 81,
            k: 4,
            topology: BdrisTopology::Full,
        };
        let inst = build_instance(&spec, &aperture, &layout, OptimizerBudget::default()).unwrap();
        match inst {
            ArchInstance::BdrisFull {
                coupling,
                passivity_factor,
                ..
            } => {
                assert!(coupling.spectral_norm() <= 1.0 + 1e-12);
                assert!(passivity_factor <= 1.0);
            }
            _ => panic!("wrong instance"),
        }
    }

    #[test]
    fn spec_aperture_mismatch_is_rejected() {
        let carrier = CarrierConfig::with_wavelength(0.01).unwrap();
        let aperture = default_aperture(&carrier);
        let layout = SystemLayout::new(carrier);
        let spec = ArchitectureSpec::Digital { m: 16 };
        assert!(build_instance(&spec, &aperture, &layout, OptimizerBudget::default()).is_err());
    }
}
