//! Fully-connected beyond-diagonal surface: closed-form optimal transmissive
//! configuration for a single-antenna user.
//!
//! The feasible set is modeled as {T : σmax(T) ≤ 1} (a passive transmissive
//! network). For a rank-one objective |hᵀ T G f| the optimum is the rank-one
//! matrix aligning the surface output with conj(h) and its input with the
//! dominant mode of G, giving gain ‖h‖·σmax(G).

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::precoder::dominant_right_singular;
use super::{AnalogConfig, BeamSolution};
use crate::error::{Error, Result};
use crate::propagation::{CouplingMatrix, UserChannel};

pub fn bdris_full_configure(g: &CouplingMatrix, h: &UserChannel) -> Result<BeamSolution> {
    let h_norm = h.gains().norm();
    if h_norm == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let (feed, _sigma) = dominant_right_singular(g.entries())?;
    let x = g.entries() * &feed;
    let x_norm = x.norm();
    if x_norm == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let u = h.gains().map(|e| e.conj() / Complex64::new(h_norm, 0.0));
    let v = x.map(|e| e / Complex64::new(x_norm, 0.0));
    // Rank-one outer product u·vᴴ with unit factors: σmax(T) = 1.
    let transmission = DMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj());
    let beam = &transmission * &x;
    let gain = h.gains().dot(&beam).norm();
    Ok(BeamSolution {
        feed,
        analog: AnalogConfig::BdrisTransmission { transmission },
        effective_beam: beam,
        gain,
    })
}
