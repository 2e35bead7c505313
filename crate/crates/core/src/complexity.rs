//! Closed-form tunable-component counts per architecture and the
//! complexity-vs-size sweep.
//!
//! Convention: a reconfigurable network over P ports counts its tunable
//! branches plus one shunt per port, so a fully-connected network costs
//! C(P,2) + P = P(P+1)/2 and a spanning tree costs (P−1) + P = 2P−1.
//! The digital baseline has zero analog components (its cost sits in RF
//! chains and converters, outside this count).

use crate::error::{Error, Result};
use crate::synthesis::{ArchitectureSpec, BdrisTopology};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub arch: &'static str,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityRow>,
}

fn fully_connected(ports: u64) -> u64 {
    ports * (ports + 1) / 2
}

/// Number of tunable analog components of one architecture.
pub fn component_count(spec: &ArchitectureSpec) -> Result<u64> {
    spec.validate()?;
    let m = spec.m() as u64;
    let k = spec.k() as u64;
    Ok(match spec {
        ArchitectureSpec::Digital { .. } => 0,
        ArchitectureSpec::Hybrid { .. } => k * m,
        ArchitectureSpec::Sim { layers, .. } => *layers as u64 * m,
        ArchitectureSpec::Milac { .. } => fully_connected(m + k),
        ArchitectureSpec::Bdris { n, topology, .. } => {
            let ports = m + *n as u64;
            match topology {
                BdrisTopology::Full => fully_connected(ports),
                BdrisTopology::Tree => 2 * ports - 1,
            }
        }
    })
}

fn make_row(spec: &ArchitectureSpec, label_override: Option<&'static str>) -> Result<ComplexityRow> {
    Ok(ComplexityRow {
        arch: label_override.unwrap_or_else(|| spec.label()),
        m: spec.m(),
        n: spec.n(),
        k: spec.k(),
        l: spec.layers(),
        count: component_count(spec)?,
    })
}

/// One row per (architecture, M): digital, hybrid, metasurface stack,
/// circuit-analog computer, fully-connected surface with N = M and with the
/// asymmetric N = ⌈M/2⌉ arrangement, and the tree-connected surface.
pub fn complexity_sweep(m_values: &[usize], k: usize, layers: usize) -> Result<ComplexityReport> {
    if m_values.is_empty() {
        return Err(Error::InvalidScenario("no aperture sizes given".into()));
    }
    let mut rows = Vec::new();
    for &m in m_values {
        rows.push(make_row(&ArchitectureSpec::Digital { m }, None)?);
        rows.push(make_row(&ArchitectureSpec::Hybrid { m, k }, None)?);
        rows.push(make_row(
            &ArchitectureSpec::Sim {
                m,
                k,
                layers,
                layer_spacing: 1.0,
            },
            None,
        )?);
        rows.push(make_row(&ArchitectureSpec::Milac { m, k }, None)?);
        rows.push(make_row(
            &ArchitectureSpec::Bdris {
                m,
                n: m,
                k,
                topology: BdrisTopology::Full,
            },
            None,
        )?);
        rows.push(make_row(
            &ArchitectureSpec::Bdris {
                m,
                n: m.div_ceil(2),
                k,
                topology: BdrisTopology::Full,
            },
            Some("bdris_asym"),
        )?);
        rows.push(make_row(
            &ArchitectureSpec::Bdris {
                m,
                n: m,
                k,
                topology: BdrisTopology::Tree,
            },
            None,
        )?);
    }
    Ok(ComplexityReport { rows })
}
