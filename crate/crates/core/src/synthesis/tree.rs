//! Tree-connected reconfigurable impedance networks.
//!
//! A surface with M environment-facing and N antenna-facing ports is
//! interconnected by a spanning tree of tunable susceptances plus one shunt
//! susceptance per port. The scattering matrix follows from the nodal
//! admittance matrix Y = jB through the Cayley transform
//! S = (I − Z0·Y)(I + Z0·Y)⁻¹, which is unitary (lossless) and symmetric
//! (reciprocal) for every real susceptance assignment.
//!
//! Port convention: indices 0..N are antenna-facing, N..N+M environment-facing.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::precoder::dominant_right_singular;
use super::{AnalogConfig, BeamSolution};
use crate::error::{Error, Result};
use crate::geometry::CarrierConfig;
use crate::propagation::{CouplingMatrix, UserChannel};

/// Spanning-tree layout of the reconfigurable network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeShape {
    /// Path visiting antenna-facing and environment-facing ports alternately.
    Path,
    /// Star centered on the first antenna-facing port.
    Star,
}

/// Spanning tree over M+N ports with per-edge and per-port susceptances.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNetwork {
    antenna_ports: usize,
    env_ports: usize,
    edges: Vec<(usize, usize)>,
    edge_susceptances: Vec<f64>,
    shunt_susceptances: Vec<f64>,
}

impl TreeNetwork {
    pub fn new(
        antenna_ports: usize,
        env_ports: usize,
        edges: Vec<(usize, usize)>,
        edge_susceptances: Vec<f64>,
        shunt_susceptances: Vec<f64>,
    ) -> Result<Self> {
        let ports = antenna_ports + env_ports;
        if ports < 2 {
            return Err(Error::InvalidNetwork(
                "a tree network needs at least two ports".into(),
            ));
        }
        if edges.len() != ports - 1 {
            return Err(Error::InvalidNetwork(format!(
                "a spanning tree over {} ports has {} edges, got {}",
                ports,
                ports - 1,
                edges.len()
            )));
        }
        if edge_susceptances.len() != edges.len() || shunt_susceptances.len() != ports {
            return Err(Error::InvalidNetwork(
                "susceptance vectors must match edge and port counts".into(),
            ));
        }
        if edge_susceptances
            .iter()
            .chain(shunt_susceptances.iter())
            .any(|b| !b.is_finite())
        {
            return Err(Error::InvalidNetwork("susceptances must be finite".into()));
        }
        // Connectivity check; P-1 edges + connected implies acyclic.
        let mut adjacency = vec![Vec::new(); ports];
        for &(i, j) in &edges {
            if i >= ports || j >= ports || i == j {
                return Err(Error::InvalidNetwork(format!("invalid edge ({i}, {j})")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut seen = vec![false; ports];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidNetwork("edge set is not connected".into()));
        }
        Ok(Self {
            antenna_ports,
            env_ports,
            edges,
            edge_susceptances,
            shunt_susceptances,
        })
    }

    /// Tree of the requested shape with all susceptances zero (open network).
    pub fn with_shape(shape: TreeShape, antenna_ports: usize, env_ports: usize) -> Result<Self> {
        let ports = antenna_ports + env_ports;
        let order: Vec<usize> = match shape {
            TreeShape::Path => {
                // Interleave the two sectors so every edge crosses them where
                // possible.
                let mut order = Vec::with_capacity(ports);
                for i in 0..antenna_ports.max(env_ports) {
                    if i < antenna_ports {
                        order.push(i);
                    }
                    if i < env_ports {
                        order.push(antenna_ports + i);
                    }
                }
                order
            }
            TreeShape::Star => (0..ports).collect(),
        };
        let edges: Vec<(usize, usize)> = match shape {
            TreeShape::Path => order.windows(2).map(|w| (w[0], w[1])).collect(),
            TreeShape::Star => (1..ports).map(|p| (0, p)).collect(),
        };
        let n_edges = edges.len();
        Self::new(
            antenna_ports,
            env_ports,
            edges,
            vec![0.0; n_edges],
            vec![0.0; ports],
        )
    }

    pub fn antenna_ports(&self) -> usize {
        self.antenna_ports
    }

    pub fn env_ports(&self) -> usize {
        self.env_ports
    }

    pub fn ports(&self) -> usize {
        self.antenna_ports + self.env_ports
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_susceptances(&self) -> &[f64] {
        &self.edge_susceptances
    }

    pub fn shunt_susceptances(&self) -> &[f64] {
        &self.shunt_susceptances
    }

    /// Nodal susceptance matrix B (graph Laplacian over edge susceptances
    /// plus the shunt diagonal); Y = jB.
    pub fn susceptance_matrix(&self) -> DMatrix<f64> {
        let p = self.ports();
        let mut b = DMatrix::zeros(p, p);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let be = self.edge_susceptances[e];
            b[(i, i)] += be;
            b[(j, j)] += be;
            b[(i, j)] -= be;
            b[(j, i)] -= be;
        }
        for (k, &bs) in self.shunt_susceptances.iter().enumerate() {
            b[(k, k)] += bs;
        }
        b
    }

    /// B·v exploiting tree sparsity.
    fn apply_susceptance(&self, v: &DVector<Complex64>, out: &mut DVector<Complex64>) {
        out.fill(Complex64::default());
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let be = self.edge_susceptances[e];
            let diff = (v[i] - v[j]) * be;
            out[i] += diff;
            out[j] -= diff;
        }
        for (k, &bs) in self.shunt_susceptances.iter().enumerate() {
            out[k] += v[k] * bs;
        }
    }
}

/// Scattering matrix of a tree network and its transmission block T mapping
/// antenna-facing ports to environment-facing ports (M×N).
pub fn tree_scattering(
    net: &TreeNetwork,
    carrier: &CarrierConfig,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let p = net.ports();
    let z0 = carrier.reference_impedance();
    let b = net.susceptance_matrix();
    let x = DMatrix::from_fn(p, p, |i, j| Complex64::new(0.0, z0 * b[(i, j)]));
    let a = DMatrix::identity(p, p) + &x;
    let a_inv = a.try_inverse().ok_or(Error::ResonantConfiguration)?;
    let s = (DMatrix::identity(p, p) - &x) * a_inv;
    let t = s
        .view((net.antenna_ports, 0), (net.env_ports, net.antenna_ports))
        .into_owned();
    Ok((s, t))
}

/// What the susceptance search maximizes.
enum TreeObjective<'a> {
    /// |hᵀ · b_env|, the end-to-end gain.
    Gain { h: &'a DVector<Complex64> },
    /// −‖b_env − target‖², least-squares fit of a codeword.
    Fit { target: &'a DVector<Complex64> },
}

impl TreeObjective<'_> {
    fn score(&self, b_env: &DVector<Complex64>) -> f64 {
        match self {
            TreeObjective::Gain { h } => h.dot(b_env).norm(),
            TreeObjective::Fit { target } => -(b_env - *target).norm_squared(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    Edge(usize),
    Shunt(usize),
}

/// Coordinate-ascent optimizer over the susceptances of a tree network.
///
/// Changing one susceptance is a rank-one update of I + jZ0·B, so candidate
/// objective values along a coordinate are evaluated in O(P) from a cached
/// inverse; the inverse is refreshed from scratch at every sweep to keep
/// drift bounded.
struct TreeSearch<'a> {
    net: TreeNetwork,
    z0: f64,
    excitation: DVector<Complex64>,
    objective: TreeObjective<'a>,
    inv: DMatrix<Complex64>,
    q: DVector<Complex64>,
    scratch: DVector<Complex64>,
}

const PSI_LIMIT: f64 = 1.55;
const LINE_GRID: usize = 25;
const GOLDEN_ITERS: usize = 32;

impl<'a> TreeSearch<'a> {
    fn new(
        net: TreeNetwork,
        z0: f64,
        excitation: DVector<Complex64>,
        objective: TreeObjective<'a>,
    ) -> Option<Self> {
        let p = net.ports();
        let mut s = Self {
            net,
            z0,
            excitation,
            objective,
            inv: DMatrix::identity(p, p),
            q: DVector::zeros(p),
            scratch: DVector::zeros(p),
        };
        if s.refactor() {
            Some(s)
        } else {
            None
        }
    }

    fn refactor(&mut self) -> bool {
        let p = self.net.ports();
        let b = self.net.susceptance_matrix();
        let a = DMatrix::from_fn(p, p, |i, j| {
            let jzb = Complex64::new(0.0, self.z0 * b[(i, j)]);
            if i == j {
                Complex64::new(1.0, 0.0) + jzb
            } else {
                jzb
            }
        });
        match a.try_inverse() {
            Some(inv) => {
                self.q = &inv * &self.excitation;
                self.inv = inv;
                true
            }
            None => false,
        }
    }

    fn coord_value(&self, coord: Coord) -> f64 {
        match coord {
            Coord::Edge(e) => self.net.edge_susceptances[e],
            Coord::Shunt(k) => self.net.shunt_susceptances[k],
        }
    }

    /// w vector of the rank-one update for a coordinate, as index/sign pairs.
    fn coord_stencil(&self, coord: Coord) -> ((usize, f64), Option<(usize, f64)>) {
        match coord {
            Coord::Edge(e) => {
                let (i, j) = self.net.edges[e];
                ((i, 1.0), Some((j, -1.0)))
            }
            Coord::Shunt(k) => ((k, 1.0), None),
        }
    }

    fn w_dot(&self, v: &DVector<Complex64>, coord: Coord) -> Complex64 {
        let ((i, si), rest) = self.coord_stencil(coord);
        let mut acc = v[i] * si;
        if let Some((j, sj)) = rest {
            acc += v[j] * sj;
        }
        acc
    }

    fn inv_w(&self, coord: Coord) -> DVector<Complex64> {
        let ((i, si), rest) = self.coord_stencil(coord);
        let mut y = DVector::from_iterator(
            self.net.ports(),
            self.inv.column(i).iter().map(|v| v * si),
        );
        if let Some((j, sj)) = rest {
            y.iter_mut()
                .zip(self.inv.column(j).iter())
                .for_each(|(a, b)| *a += b * sj);
        }
        y
    }

    /// Objective for a candidate value of one coordinate, using the cached
    /// inverse. Returns None when the candidate drives the network resonant.
    fn candidate_score(
        &mut self,
        coord: Coord,
        y: &DVector<Complex64>,
        w_dot_y: Complex64,
        w_dot_q: Complex64,
        b_new: f64,
    ) -> Option<f64> {
        let delta = b_new - self.coord_value(coord);
        let c = Complex64::new(0.0, self.z0 * delta);
        let denom = Complex64::new(1.0, 0.0) + c * w_dot_y;
        if denom.norm() < 1e-12 {
            return None;
        }
        let scale = c * w_dot_q / denom;
        // q' = (A + c·wwᵀ)⁻¹·p by the rank-one inverse-update formula.
        let q_new = self.q.clone() - y * scale;
        // S·p = q' − jZ0·B'·q' with B' = B + Δ·wwᵀ.
        let wq_new = self.w_dot(&q_new, coord);
        self.net.apply_susceptance(&q_new, &mut self.scratch);
        let ((i, si), rest) = self.coord_stencil(coord);
        self.scratch[i] += wq_new * delta * si;
        if let Some((j, sj)) = rest {
            self.scratch[j] += wq_new * delta * sj;
        }
        let n = self.net.antenna_ports;
        let m = self.net.env_ports;
        let b_env = DVector::from_fn(m, |r, _| {
            let idx = n + r;
            q_new[idx] - Complex64::new(0.0, self.z0) * self.scratch[idx]
        });
        let score = self.objective.score(&b_env);
        score.is_finite().then_some(score)
    }

    fn commit(&mut self, coord: Coord, b_new: f64) -> bool {
        let y = self.inv_w(coord);
        let w_dot_y = self.w_dot(&y, coord);
        let delta = b_new - self.coord_value(coord);
        let c = Complex64::new(0.0, self.z0 * delta);
        let denom = Complex64::new(1.0, 0.0) + c * w_dot_y;
        if denom.norm() < 1e-12 {
            return false;
        }
        let ((i, si), rest) = self.coord_stencil(coord);
        let mut wt_inv = RowDVector::from_iterator(
            self.net.ports(),
            self.inv.row(i).iter().map(|v| v * si),
        );
        if let Some((j, sj)) = rest {
            wt_inv
                .iter_mut()
                .zip(self.inv.row(j).iter())
                .for_each(|(a, b)| *a += b * sj);
        }
        let scale = c / denom;
        self.inv -= (&y * &wt_inv) * scale;
        match coord {
            Coord::Edge(e) => self.net.edge_susceptances[e] = b_new,
            Coord::Shunt(k) => self.net.shunt_susceptances[k] = b_new,
        }
        self.q = &self.inv * &self.excitation;
        true
    }

    /// One coordinate update: grid scan in the compactified variable
    /// ψ = atan(Z0·b) followed by golden-section refinement. Returns the new
    /// objective value when the coordinate improved.
    fn line_search(&mut self, coord: Coord, current: f64) -> Option<f64> {
        let y = self.inv_w(coord);
        let w_dot_y = self.w_dot(&y, coord);
        let w_dot_q = self.w_dot(&self.q.clone(), coord);
        let z0 = self.z0;
        let value_of = move |psi: f64| psi.tan() / z0;
        let step = 2.0 * PSI_LIMIT / (LINE_GRID as f64 - 1.0);
        let mut best_psi = None;
        let mut best_score = current;
        for g in 0..LINE_GRID {
            let psi = -PSI_LIMIT + g as f64 * step;
            if let Some(score) = self.candidate_score(coord, &y, w_dot_y, w_dot_q, value_of(psi))
            {
                if score > best_score {
                    best_score = score;
                    best_psi = Some(psi);
                }
            }
        }
        let seed_psi = match best_psi {
            Some(p) => p,
            None => (self.z0 * self.coord_value(coord)).atan(),
        };
        let (mut lo, mut hi) = (
            (seed_psi - step).max(-PSI_LIMIT),
            (seed_psi + step).min(PSI_LIMIT),
        );
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let eval = |s: &mut Self, psi: f64| {
            s.candidate_score(coord, &y, w_dot_y, w_dot_q, value_of(psi))
                .unwrap_or(f64::NEG_INFINITY)
        };
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = eval(self, x1);
        let mut f2 = eval(self, x2);
        for _ in 0..GOLDEN_ITERS {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(self, x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(self, x1);
            }
        }
        let (psi_opt, score_opt) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
        let (final_psi, final_score) = if score_opt > best_score {
            (psi_opt, score_opt)
        } else if let Some(p) = best_psi {
            (p, best_score)
        } else {
            return None;
        };
        let improvement = final_score - current;
        if improvement > 1e-14 * (1.0 + current.abs()) && self.commit(coord, value_of(final_psi))
        {
            Some(final_score)
        } else {
            None
        }
    }

    fn current_score(&mut self) -> f64 {
        self.net.apply_susceptance(&self.q.clone(), &mut self.scratch);
        let n = self.net.antenna_ports;
        let m = self.net.env_ports;
        let b_env = DVector::from_fn(m, |r, _| {
            let idx = n + r;
            self.q[idx] - Complex64::new(0.0, self.z0) * self.scratch[idx]
        });
        self.objective.score(&b_env)
    }

    /// Full coordinate sweeps until the budget is exhausted or no coordinate
    /// improves. Returns the best objective value reached.
    fn run(&mut self, budget: usize) -> f64 {
        let n_edges = self.net.edges.len();
        let n_ports = self.net.ports();
        let mut score = self.current_score();
        for _ in 0..budget.max(1) {
            if !self.refactor() {
                break;
            }
            score = self.current_score();
            let mut improved = false;
            for e in 0..n_edges {
                if let Some(s) = self.line_search(Coord::Edge(e), score) {
                    debug_assert!(s >= score - 1e-12 * (1.0 + score.abs()));
                    score = s;
                    improved = true;
                }
            }
            for k in 0..n_ports {
                if let Some(s) = self.line_search(Coord::Shunt(k), score) {
                    debug_assert!(s >= score - 1e-12 * (1.0 + score.abs()));
                    score = s;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        score
    }
}

fn random_susceptances(net: &TreeNetwork, z0: f64, rng: &mut impl Rng) -> TreeNetwork {
    let mut out = net.clone();
    for b in out
        .edge_susceptances
        .iter_mut()
        .chain(out.shunt_susceptances.iter_mut())
    {
        *b = rng.random_range(-1.3..1.3f64).tan() / z0;
    }
    out
}

fn best_tree_search(
    template: &TreeNetwork,
    carrier: &CarrierConfig,
    excitation: &DVector<Complex64>,
    objective: impl Fn() -> TreeObjectiveOwned,
    budget: usize,
    rng_seed: u64,
) -> Result<(TreeNetwork, f64)> {
    let z0 = carrier.reference_impedance();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<(TreeNetwork, f64)> = None;
    const STARTS: usize = 4;
    for start in 0..STARTS {
        let init = if start == 0 {
            template.clone()
        } else {
            random_susceptances(template, z0, &mut rng)
        };
        let owned = objective();
        let obj = match &owned {
            TreeObjectiveOwned::Gain(h) => TreeObjective::Gain { h },
            TreeObjectiveOwned::Fit(t) => TreeObjective::Fit { target: t },
        };
        let Some(mut search) = TreeSearch::new(init, z0, excitation.clone(), obj) else {
            continue;
        };
        let score = search.run(budget);
        if best.as_ref().map_or(true, |(_, s)| score > *s) {
            best = Some((search.net, score));
        }
    }
    best.ok_or(Error::ResonantConfiguration)
}

/// Owned objective payload so each restart can borrow it fresh.
enum TreeObjectiveOwned {
    Gain(DVector<Complex64>),
    Fit(DVector<Complex64>),
}

/// Optimizes a tree-connected surface for end-to-end gain: the feed is fixed
/// to the dominant right singular vector of G and the susceptances are tuned
/// by seeded multi-start coordinate ascent with a golden-section line search
/// per susceptance. Best-effort: always returns the best iterate found.
pub fn bdris_tree_configure(
    g: &CouplingMatrix,
    h: &UserChannel,
    tree_shape: TreeShape,
    carrier: &CarrierConfig,
    budget: usize,
    rng_seed: u64,
) -> Result<BeamSolution> {
    if budget < 1 {
        return Err(Error::InvalidArchitecture(
            "optimizer budget must be at least 1".into(),
        ));
    }
    if h.gains().norm() == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let n = g.rx_count();
    let m = h.len();
    let (feed, _) = dominant_right_singular(g.entries())?;
    let x = g.entries() * &feed;
    let mut excitation = DVector::zeros(n + m);
    excitation.rows_mut(0, n).copy_from(&x);

    let template = TreeNetwork::with_shape(tree_shape, n, m)?;
    let h_gains = h.gains().clone();
    let (net, _) = best_tree_search(
        &template,
        carrier,
        &excitation,
        || TreeObjectiveOwned::Gain(h_gains.clone()),
        budget,
        rng_seed,
    )?;

    let (_, t) = tree_scattering(&net, carrier)?;
    let beam = &t * &x;
    let gain = h.gains().dot(&beam).norm();
    Ok(BeamSolution {
        feed,
        analog: AnalogConfig::BdrisTree {
            network: net,
            transmission: t,
        },
        effective_beam: beam,
        gain,
    })
}

/// Least-squares fit of a target beam with a tree-connected surface; used by
/// codebook sweeping. Returns the network and the realized beam.
pub(crate) fn tree_fit_codeword(
    g: &CouplingMatrix,
    target: &DVector<Complex64>,
    tree_shape: TreeShape,
    carrier: &CarrierConfig,
    budget: usize,
    rng_seed: u64,
) -> Result<(TreeNetwork, DVector<Complex64>, DVector<Complex64>)> {
    let n = g.rx_count();
    let m = target.len();
    let (feed, _) = dominant_right_singular(g.entries())?;
    let x = g.entries() * &feed;
    let mut excitation = DVector::zeros(n + m);
    excitation.rows_mut(0, n).copy_from(&x);
    let template = TreeNetwork::with_shape(tree_shape, n, m)?;
    let target_owned = target.clone();
    let (net, _) = best_tree_search(
        &template,
        carrier,
        &excitation,
        || TreeObjectiveOwned::Fit(target_owned.clone()),
        budget,
        rng_seed,
    )?;
    let (_, t) = tree_scattering(&net, carrier)?;
    let beam = &t * &x;
    Ok((net, feed, beam))
}
