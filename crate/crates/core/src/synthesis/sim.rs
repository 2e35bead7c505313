//! Stacked phase-only metasurfaces: a feed aperture couples into L cascaded
//! layers, each applying a per-element unit-modulus phase, with fixed
//! diffraction couplings between adjacent layers. The stack approximates a
//! target precoder by optimizing the layer phases; unlike the interconnected
//! surfaces there is no amplitude control within a layer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnalogConfig, BeamSolution};
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::propagation::{CouplingMatrix, UserChannel};
use crate::util::derive_seed;

/// Geometry and fixed inter-layer couplings of a metasurface stack.
/// `inter_layer[l]` propagates from layer l to layer l+1 (so a stack of L
/// layers carries L−1 couplings).
#[derive(Debug, Clone)]
pub struct SimStack {
    layer_geoms: Vec<ArrayGeometry>,
    inter_layer: Vec<CouplingMatrix>,
}

impl SimStack {
    pub fn new(layer_geoms: Vec<ArrayGeometry>, inter_layer: Vec<CouplingMatrix>) -> Result<Self> {
        if layer_geoms.is_empty() {
            return Err(Error::InvalidArchitecture(
                "a metasurface stack needs at least one layer".into(),
            ));
        }
        if inter_layer.len() + 1 != layer_geoms.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} layers need {} inter-layer couplings, got {}",
                layer_geoms.len(),
                layer_geoms.len() - 1,
                inter_layer.len()
            )));
        }
        for (l, w) in inter_layer.iter().enumerate() {
            if w.tx_count() != layer_geoms[l].len() || w.rx_count() != layer_geoms[l + 1].len() {
                return Err(Error::DimensionMismatch(format!(
                    "coupling {l} is {}x{} but layers have {} and {} elements",
                    w.rx_count(),
                    w.tx_count(),
                    layer_geoms[l + 1].len(),
                    layer_geoms[l].len()
                )));
            }
        }
        Ok(Self {
            layer_geoms,
            inter_layer,
        })
    }

    pub fn layers(&self) -> usize {
        self.layer_geoms.len()
    }

    pub fn layer_geoms(&self) -> &[ArrayGeometry] {
        &self.layer_geoms
    }

    pub fn inter_layer(&self) -> &[CouplingMatrix] {
        &self.inter_layer
    }

    pub fn layer_size(&self, l: usize) -> usize {
        self.layer_geoms[l].len()
    }

    pub fn output_size(&self) -> usize {
        self.layer_geoms[self.layers() - 1].len()
    }

    fn check_feed_coupling(&self, g0: &CouplingMatrix) -> Result<()> {
        if g0.rx_count() != self.layer_size(0) {
            return Err(Error::DimensionMismatch(format!(
                "feed coupling reaches {} elements but the first layer has {}",
                g0.rx_count(),
                self.layer_size(0)
            )));
        }
        Ok(())
    }
}

fn phasor(phases: &DVector<f64>) -> DVector<Complex64> {
    phases.map(|p| Complex64::from_polar(1.0, p))
}

/// Field states just before each phase layer, given the feed excitation.
fn forward_states(
    stack: &SimStack,
    g0: &CouplingMatrix,
    feed: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> Vec<DVector<Complex64>> {
    let l = stack.layers();
    let mut states = Vec::with_capacity(l);
    let mut s = g0.entries() * feed;
    for layer in 0..l {
        states.push(s.clone());
        if layer + 1 < l {
            let shaped = s.zip_map(&phasor(&phases[layer]), |a, v| a * v);
            s = stack.inter_layer[layer].entries() * shaped;
        }
    }
    states
}

/// Beam radiated by the last layer.
fn output_beam(
    stack: &SimStack,
    g0: &CouplingMatrix,
    feed: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> DVector<Complex64> {
    let states = forward_states(stack, g0, feed, phases);
    let last = stack.layers() - 1;
    states[last].zip_map(&phasor(&phases[last]), |a, v| a * v)
}

/// Left partial products: r_l such that the end-to-end scalar is
/// z = Σ_m r_l[m]·e^{jφ_l[m]}·s_l[m] for every layer l.
fn backward_states(
    stack: &SimStack,
    h: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> Vec<DVector<Complex64>> {
    let l = stack.layers();
    let mut states = vec![DVector::zeros(0); l];
    let mut r = h.clone();
    for layer in (0..l).rev() {
        states[layer] = r.clone();
        if layer > 0 {
            let shaped = r.zip_map(&phasor(&phases[layer]), |a, v| a * v);
            r = stack.inter_layer[layer - 1].entries().transpose() * shaped;
        }
    }
    states
}

/// |hᵀ · Φ_L W_{L-1} ⋯ Φ_1 · G0 · f|², the squared end-to-end amplitude for
/// a fixed feed.
pub fn sim_objective(
    stack: &SimStack,
    g0: &CouplingMatrix,
    h: &UserChannel,
    feed: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> f64 {
    let beam = output_beam(stack, g0, feed, phases);
    h.gains().dot(&beam).norm_sqr()
}

/// Analytic gradient of [`sim_objective`] with respect to every layer phase:
/// ∂J/∂φ_l[m] = −2·Im( conj(z) · r_l[m] · e^{jφ_l[m]} · s_l[m] ).
pub fn sim_phase_gradient(
    stack: &SimStack,
    g0: &CouplingMatrix,
    h: &UserChannel,
    feed: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let s = forward_states(stack, g0, feed, phases);
    let r = backward_states(stack, h.gains(), phases);
    let last = stack.layers() - 1;
    let z = r[last]
        .zip_map(&phasor(&phases[last]), |a, v| a * v)
        .dot(&s[last]);
    (0..stack.layers())
        .map(|l| {
            let v = phasor(&phases[l]);
            DVector::from_fn(s[l].len(), |m, _| {
                -2.0 * (z.conj() * r[l][m] * v[m] * s[l][m]).im
            })
        })
        .collect()
}

/// Gradient of the least-squares fit residual ‖beam − target‖² with respect
/// to the layer phases.
fn fit_gradient(
    stack: &SimStack,
    g0: &CouplingMatrix,
    target: &DVector<Complex64>,
    feed: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let s = forward_states(stack, g0, feed, phases);
    let beam = {
        let last = stack.layers() - 1;
        s[last].zip_map(&phasor(&phases[last]), |a, v| a * v)
    };
    // Adjoint chain on the conjugated residual: same recursion as
    // backward_states but with Wᴴ in place of Wᵀ, realized by conjugating.
    let residual_conj = (&beam - target).map(|e| e.conj());
    let w = backward_states(stack, &residual_conj, phases);
    (0..stack.layers())
        .map(|l| {
            let v = phasor(&phases[l]);
            DVector::from_fn(s[l].len(), |m, _| {
                // d‖b−t‖²/dφ = 2·Re⟨b−t, ∂b/∂φ⟩ with ∂b/∂φ = j·(chain)·v·s.
                -2.0 * (w[l][m] * v[m] * s[l][m]).im
            })
        })
        .collect()
}

/// Feed matched to the current phase configuration: the dominant right
/// singular vector of the 1×K composite channel hᵀ·Φ_L⋯G0, which is the
/// normalized conjugate of G0ᵀ·(backward chain). Returns (feed, gain).
fn matched_feed(
    stack: &SimStack,
    g0: &CouplingMatrix,
    h: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> (DVector<Complex64>, f64) {
    let r = backward_states(stack, h, phases);
    let shaped = r[0].zip_map(&phasor(&phases[0]), |a, v| a * v);
    let c = g0.entries().transpose() * shaped;
    let norm = c.norm();
    if norm == 0.0 {
        let k = g0.tx_count();
        let mut f = DVector::zeros(k);
        f[0] = Complex64::new(1.0, 0.0);
        (f, 0.0)
    } else {
        (c.map(|e| e.conj() / Complex64::new(norm, 0.0)), norm)
    }
}

/// Layer-by-layer phase alignment toward a target output field: cheap
/// deterministic initialization for the ascent.
fn greedy_phases(
    stack: &SimStack,
    g0: &CouplingMatrix,
    feed: &DVector<Complex64>,
    target: &DVector<Complex64>,
) -> Vec<DVector<f64>> {
    let l = stack.layers();
    // Back-propagate the target through the adjoint couplings.
    let mut targets = vec![DVector::zeros(0); l];
    let mut t = target.clone();
    for layer in (0..l).rev() {
        targets[layer] = t.clone();
        if layer > 0 {
            t = stack.inter_layer[layer - 1].entries().adjoint() * t;
        }
    }
    let mut phases = Vec::with_capacity(l);
    let mut s = g0.entries() * feed;
    for layer in 0..l {
        let phi = DVector::from_fn(s.len(), |m, _| {
            let want = targets[layer][m];
            let have = s[m];
            if want.norm_sqr() == 0.0 || have.norm_sqr() == 0.0 {
                0.0
            } else {
                (want * have.conj()).arg()
            }
        });
        if layer + 1 < l {
            let shaped = s.zip_map(&phasor(&phi), |a, v| a * v);
            s = stack.inter_layer[layer].entries() * shaped;
        }
        phases.push(phi);
    }
    phases
}

/// Backtracking gradient ascent in phase space; the iterate stays on the
/// unit circle by construction of e^{jφ}. Objective values are non-decreasing
/// across accepted steps.
fn ascend<F, G>(
    phases: &mut Vec<DVector<f64>>,
    objective: F,
    gradient: G,
    budget: usize,
) -> f64
where
    F: Fn(&[DVector<f64>]) -> f64,
    G: Fn(&[DVector<f64>]) -> Vec<DVector<f64>>,
{
    let mut current = objective(phases);
    let mut step = 0.0f64;
    for _ in 0..budget {
        let grad = gradient(phases);
        let gmax = grad
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax < 1e-15 {
            break;
        }
        if step == 0.0 {
            step = 0.5 / gmax;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<DVector<f64>> = phases
                .iter()
                .zip(grad.iter())
                .map(|(p, g)| p + g * step)
                .collect();
            let value = objective(&trial);
            if value > current {
                *phases = trial;
                current = value;
                step *= 1.25;
                accepted = true;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    current
}

/// Optimizes the per-layer phases to maximize the end-to-end amplitude toward
/// the user. Projected gradient ascent with analytic gradient, backtracking
/// step control, and seeded restarts; the feed is recomputed per restart as
/// the matched filter of the composite channel.
pub fn sim_configure(
    stack: &SimStack,
    g0: &CouplingMatrix,
    h: &UserChannel,
    budget: usize,
    restarts: usize,
    rng_seed: u64,
) -> Result<BeamSolution> {
    stack.check_feed_coupling(g0)?;
    if h.len() != stack.output_size() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} entries but the output layer has {}",
            h.len(),
            stack.output_size()
        )));
    }
    if h.gains().norm() == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let target = h.gains().map(|e| e.conj());
    let seed_feed = super::precoder::dominant_right_singular(g0.entries())?.0;
    let mut best: Option<(Vec<DVector<f64>>, DVector<Complex64>, f64)> = None;
    for restart in 0..restarts.max(1) {
        let mut phases = initial_phases(stack, g0, &seed_feed, &target, restart, rng_seed);
        let (feed, _) = matched_feed(stack, g0, h.gains(), &phases);
        ascend(
            &mut phases,
            |p| sim_objective(stack, g0, h, &feed, p),
            |p| sim_phase_gradient(stack, g0, h, &feed, p),
            budget,
        );
        // Matched feed of the final composite; never below the fixed-feed value.
        let (final_feed, gain) = matched_feed(stack, g0, h.gains(), &phases);
        if best.as_ref().map_or(true, |(_, _, g)| gain > *g) {
            best = Some((phases, final_feed, gain));
        }
    }
    let (phases, feed, gain) = best.expect("at least one restart runs");
    let beam = output_beam(stack, g0, &feed, &phases);
    Ok(BeamSolution {
        feed,
        analog: AnalogConfig::SimPhases { phases },
        effective_beam: beam,
        gain,
    })
}

fn initial_phases(
    stack: &SimStack,
    g0: &CouplingMatrix,
    seed_feed: &DVector<Complex64>,
    target: &DVector<Complex64>,
    restart: usize,
    rng_seed: u64,
) -> Vec<DVector<f64>> {
    match restart {
        0 => greedy_phases(stack, g0, seed_feed, target),
        1 => (0..stack.layers())
            .map(|l| DVector::zeros(stack.layer_size(l)))
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, 0x51, restart as u64));
            (0..stack.layers())
                .map(|l| {
                    DVector::from_fn(stack.layer_size(l), |_, _| {
                        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                    })
                })
                .collect()
        }
    }
}

/// Least-squares fit of a target beam at the output aperture: minimizes
/// ‖beam(φ, f) − target‖² over phases (gradient descent with backtracking)
/// and feed (ridge least squares, renormalized), with seeded restarts.
/// Returns (phases, feed, realized beam).
pub(crate) fn sim_fit_codeword(
    stack: &SimStack,
    g0: &CouplingMatrix,
    target: &DVector<Complex64>,
    budget: usize,
    restarts: usize,
    rng_seed: u64,
) -> Result<(Vec<DVector<f64>>, DVector<Complex64>, DVector<Complex64>)> {
    stack.check_feed_coupling(g0)?;
    if target.len() != stack.output_size() {
        return Err(Error::DimensionMismatch(format!(
            "target has {} entries but the output layer has {}",
            target.len(),
            stack.output_size()
        )));
    }
    let seed_feed = super::precoder::dominant_right_singular(g0.entries())?.0;
    let mut best: Option<(Vec<DVector<f64>>, DVector<Complex64>, f64)> = None;
    for restart in 0..restarts.max(1) {
        let mut phases = initial_phases(stack, g0, &seed_feed, target, restart, rng_seed);
        let feed = ls_feed(stack, g0, target, &phases);
        // Descent on the residual = ascent on its negation.
        ascend(
            &mut phases,
            |p| -residual(stack, g0, target, &feed, p),
            |p| {
                fit_gradient(stack, g0, target, &feed, p)
                    .into_iter()
                    .map(|g| -g)
                    .collect()
            },
            budget,
        );
        let final_feed = ls_feed(stack, g0, target, &phases);
        let score = -residual(stack, g0, target, &final_feed, &phases);
        if best.as_ref().map_or(true, |(_, _, s)| score > *s) {
            best = Some((phases, final_feed, score));
        }
    }
    let (phases, feed, _) = best.expect("at least one restart runs");
    let beam = output_beam(stack, g0, &feed, &phases);
    Ok((phases, feed, beam))
}

fn residual(
    stack: &SimStack,
    g0: &CouplingMatrix,
    target: &DVector<Complex64>,
    feed: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> f64 {
    (output_beam(stack, g0, feed, phases) - target).norm_squared()
}

/// Unit-norm ridge least-squares feed for a fixed phase configuration.
fn ls_feed(
    stack: &SimStack,
    g0: &CouplingMatrix,
    target: &DVector<Complex64>,
    phases: &[DVector<f64>],
) -> DVector<Complex64> {
    let k = g0.tx_count();
    // Composite map columns by unit-impulse forward passes.
    let mut composite = DMatrix::zeros(stack.output_size(), k);
    for col in 0..k {
        let mut e = DVector::zeros(k);
        e[col] = Complex64::new(1.0, 0.0);
        composite.set_column(col, &output_beam(stack, g0, &e, phases));
    }
    let gram = composite.adjoint() * &composite
        + DMatrix::from_diagonal_element(k, k, Complex64::new(1e-12, 0.0));
    let rhs = composite.adjoint() * target;
    let f = gram
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| DVector::from_element(k, Complex64::new(1.0, 0.0)));
    let norm = f.norm();
    if norm == 0.0 {
        let mut unit = DVector::zeros(k);
        unit[0] = Complex64::new(1.0, 0.0);
        unit
    } else {
        f.map(|e| e / Complex64::new(norm, 0.0))
    }
}
