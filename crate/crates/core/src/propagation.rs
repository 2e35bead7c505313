//! Near-field coupling between apertures, user channels, and the cascaded
//! end-to-end link.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{steering_vector, ArrayGeometry, CarrierConfig, Direction};

/// Complex coupling matrix between a transmit and a receive aperture,
/// `rx_count × tx_count`.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    entries: DMatrix<Complex64>,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
}

impl CouplingMatrix {
    /// Wraps explicit entries; dimensions must match the two geometries.
    pub fn from_entries(
        entries: DMatrix<Complex64>,
        tx_geom: ArrayGeometry,
        rx_geom: ArrayGeometry,
    ) -> Result<Self> {
        if entries.nrows() != rx_geom.len() || entries.ncols() != tx_geom.len() {
            return Err(Error::DimensionMismatch(format!(
                "coupling is {}x{} but geometries give {}x{}",
                entries.nrows(),
                entries.ncols(),
                rx_geom.len(),
                tx_geom.len()
            )));
        }
        if entries.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
            return Err(Error::InvalidGeometry(
                "coupling entries must be finite".into(),
            ));
        }
        Ok(Self {
            entries,
            tx_geom,
            rx_geom,
        })
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn tx_geom(&self) -> &ArrayGeometry {
        &self.tx_geom
    }

    pub fn rx_geom(&self) -> &ArrayGeometry {
        &self.rx_geom
    }

    pub fn rx_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tx_count(&self) -> usize {
        self.entries.ncols()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Scalar diffraction coefficient between one transmit element and one
/// receive point: (A·cosχ/d)·(1/(2πd) − j/λ)·exp(j·2πd/λ).
fn diffraction_coefficient(
    tx_pos: &nalgebra::Vector3<f64>,
    tx_normal: &nalgebra::Vector3<f64>,
    tx_area: f64,
    rx_pos: &nalgebra::Vector3<f64>,
    wavelength: f64,
) -> Result<Complex64> {
    let link = rx_pos - tx_pos;
    let d = link.norm();
    if d <= f64::EPSILON {
        return Err(Error::SingularGeometry(
            "coincident elements give a singular coupling coefficient".into(),
        ));
    }
    let cos_chi = link.dot(tx_normal) / d;
    let radial = Complex64::new(1.0 / (2.0 * std::f64::consts::PI * d), -1.0 / wavelength);
    let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * d / wavelength);
    Ok(Complex64::new(tx_area * cos_chi / d, 0.0) * radial * phase)
}

/// Near-field coupling between two apertures under scalar diffraction.
/// Entry (m, n) couples transmit element n to receive element m.
pub fn near_field_coupling(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    carrier: &CarrierConfig,
) -> Result<CouplingMatrix> {
    let lambda = carrier.wavelength();
    let n_tx = tx.len();
    let n_rx = rx.len();
    let tx_normal = tx.normal();
    let tx_area = tx.element_area();
    let mut entries = DMatrix::zeros(n_rx, n_tx);
    for (n, q) in tx.positions().iter().enumerate() {
        for (m, p) in rx.positions().iter().enumerate() {
            entries[(m, n)] = diffraction_coefficient(q, &tx_normal, tx_area, p, lambda)?;
        }
    }
    CouplingMatrix::from_entries(entries, tx.clone(), rx.clone())
}

/// Caps the largest singular value at one: a passive aperture cannot amplify.
/// Returns the scaled matrix and the applied factor (1 when already passive).
pub fn normalize_passive(g: &CouplingMatrix) -> (CouplingMatrix, f64) {
    let sigma_max = g.spectral_norm();
    if sigma_max > 1.0 {
        let factor = 1.0 / sigma_max;
        let scaled = g.entries.map(|e| e * factor);
        (
            CouplingMatrix {
                entries: scaled,
                tx_geom: g.tx_geom.clone(),
                rx_geom: g.rx_geom.clone(),
            },
            factor,
        )
    } else {
        (g.clone(), 1.0)
    }
}

/// Propagation model between the environment-facing aperture and the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    LineOfSight,
    /// Line-of-sight component plus `path_count` random planar paths with
    /// complex Gaussian gains. `k_factor` is the linear power ratio of the
    /// line-of-sight component to the scattered aggregate.
    Rician { k_factor: f64, path_count: usize },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelModel::LineOfSight => Ok(()),
            ChannelModel::Rician {
                k_factor,
                path_count,
            } => {
                if !(*k_factor >= 0.0) || !k_factor.is_finite() {
                    return Err(Error::InvalidChannelModel(format!(
                        "k-factor must be nonnegative, got {k_factor}"
                    )));
                }
                if *path_count == 0 {
                    return Err(Error::InvalidChannelModel(
                        "rician model needs at least one scattered path".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Channel gains from the environment-facing aperture to the single-antenna
/// user (length M).
#[derive(Debug, Clone)]
pub struct UserChannel {
    gains: DVector<Complex64>,
    model: ChannelModel,
}

impl UserChannel {
    pub fn from_gains(gains: DVector<Complex64>, model: ChannelModel) -> Self {
        Self { gains, model }
    }

    pub fn gains(&self) -> &DVector<Complex64> {
        &self.gains
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.len() == 0
    }
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / Complex64::new(std::f64::consts::SQRT_2, 0.0)
}

/// Draws the aperture-to-user channel. Line-of-sight uses unit gain along
/// `dir`; the rician model adds seeded planar scatterers in the forward
/// half-space. Deterministic for a fixed seed.
pub fn user_channel(
    env_aperture: &ArrayGeometry,
    dir: Direction,
    carrier: &CarrierConfig,
    model: ChannelModel,
    rng_seed: u64,
) -> Result<UserChannel> {
    model.validate()?;
    let los = steering_vector(env_aperture, dir, carrier);
    let gains = match model {
        ChannelModel::LineOfSight => los,
        ChannelModel::Rician {
            k_factor,
            path_count,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let mut scatter = DVector::from_element(env_aperture.len(), Complex64::default());
            for _ in 0..path_count {
                let az = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                let gain = complex_gaussian(&mut rng);
                let path = steering_vector(
                    env_aperture,
                    Direction::azimuth_cut(az).expect("sampled azimuth is in range"),
                    carrier,
                );
                scatter += path * gain;
            }
            scatter /= Complex64::new((path_count as f64).sqrt(), 0.0);
            let los_w = (k_factor / (k_factor + 1.0)).sqrt();
            let sc_w = (1.0 / (k_factor + 1.0)).sqrt();
            los * Complex64::new(los_w, 0.0) + scatter * Complex64::new(sc_w, 0.0)
        }
    };
    Ok(UserChannel { gains, model })
}

/// End-to-end scalar of the cascaded link: hᵀ · T · G · f.
pub fn cascade_gain(
    h: &UserChannel,
    t: &DMatrix<Complex64>,
    g: &CouplingMatrix,
    f: &DVector<Complex64>,
) -> Result<Complex64> {
    if t.ncols() != g.rx_count() {
        return Err(Error::DimensionMismatch(format!(
            "T has {} columns but G has {} rows",
            t.ncols(),
            g.rx_count()
        )));
    }
    if g.tx_count() != f.len() {
        return Err(Error::DimensionMismatch(format!(
            "G has {} columns but f has length {}",
            g.tx_count(),
            f.len()
        )));
    }
    if h.len() != t.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "h has length {} but T has {} rows",
            h.len(),
            t.nrows()
        )));
    }
    let x = g.entries() * f;
    let y = t * x;
    Ok(h.gains().dot(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn carrier() -> CarrierConfig {
        CarrierConfig::with_wavelength(0.01).unwrap()
    }

    fn single_element(x: f64, normal: Vector3<f64>, area: f64) -> ArrayGeometry {
        ArrayGeometry::from_positions(vec![Vector3::new(x, 0.0, 0.0)], normal, area, 1, 1)
            .unwrap()
    }

    #[test]
    fn boresight_coefficient_magnitude_matches_closed_form() {
        let lam = carrier().wavelength();
        let area = 2.3e-5;
        for d in [3.0 * lam, 5.0 * lam, 20.0 * lam] {
            let tx = single_element(0.0, Vector3::x(), area);
            let rx = single_element(d, -Vector3::x(), area);
            let g = near_field_coupling(&tx, &rx, &carrier()).unwrap();
            let expected = (area / d)
                * (1.0 / (2.0 * std::f64::consts::PI * d).powi(2) + 1.0 / (lam * lam)).sqrt();
            assert!((g.entries()[(0, 0)].norm() - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn coincident_elements_are_rejected() {
        let tx = single_element(0.0, Vector3::x(), 1e-5);
        let rx = single_element(0.0, -Vector3::x(), 1e-5);
        assert!(matches!(
            near_field_coupling(&tx, &rx, &carrier()),
            Err(Error::SingularGeometry(_))
        ));
    }

    #[test]
    fn mirror_symmetric_grids_give_reflection_invariant_coupling() {
        let lam = carrier().wavelength();
        let tx = ArrayGeometry::planar(1, 3, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let rx = ArrayGeometry::planar(
            1,
            3,
            lam / 2.0,
            Vector3::new(4.0 * lam, 0.0, 0.0),
            -Vector3::x(),
        )
        .unwrap();
        let g = near_field_coupling(&tx, &rx, &carrier()).unwrap();
        let e = g.entries();
        // Reflecting both indices maps element i to count-1-i on each side.
        for m in 0..3 {
            for n in 0..3 {
                let a = e[(m, n)];
                let b = e[(2 - m, 2 - n)];
                assert!((a - b).norm() < 1e-12 * a.norm().max(1e-30));
            }
        }
    }

    #[test]
    fn doubling_distances_strictly_shrinks_every_entry() {
        // Scaling all positions by 2 doubles every pairwise distance; element
        // areas are pinned so only the distance factors change.
        let lam = carrier().wavelength();
        let area = lam * lam / 4.0;
        let tx = ArrayGeometry::planar(2, 2, lam / 2.0, Vector3::zeros(), Vector3::x())
            .unwrap()
            .with_element_area(area)
            .unwrap();
        let rx_near = ArrayGeometry::planar(
            2,
            2,
            lam,
            Vector3::new(3.0 * lam, 0.0, 0.0),
            -Vector3::x(),
        )
        .unwrap();
        let tx_far = ArrayGeometry::planar(2, 2, lam, Vector3::zeros(), Vector3::x())
            .unwrap()
            .with_element_area(area)
            .unwrap();
        let rx_far = ArrayGeometry::planar(
            2,
            2,
            2.0 * lam,
            Vector3::new(6.0 * lam, 0.0, 0.0),
            -Vector3::x(),
        )
        .unwrap();
        let near = near_field_coupling(&tx, &rx_near, &carrier()).unwrap();
        let far = near_field_coupling(&tx_far, &rx_far, &carrier()).unwrap();
        for (a, b) in near.entries().iter().zip(far.entries().iter()) {
            assert!(b.norm() < a.norm());
        }
    }

    #[test]
    fn facing_apertures_with_equal_areas_couple_reciprocally() {
        let lam = carrier().wavelength();
        let a = ArrayGeometry::planar(2, 3, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let b = ArrayGeometry::planar(
            3,
            2,
            lam / 2.0,
            Vector3::new(5.0 * lam, 0.0, 0.0),
            -Vector3::x(),
        )
        .unwrap();
        let fwd = near_field_coupling(&a, &b, &carrier()).unwrap();
        let rev = near_field_coupling(&b, &a, &carrier()).unwrap();
        let diff = (fwd.entries().transpose() - rev.entries()).norm();
        assert!(diff < 1e-12 * fwd.entries().norm());
    }

    #[test]
    fn normalize_passive_examples() {
        let lam = carrier().wavelength();
        let g1 = ArrayGeometry::planar(1, 2, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let g2 = g1.translated(Vector3::new(5.0 * lam, 0.0, 0.0));

        // Already passive: unchanged with factor 1.
        let small = CouplingMatrix::from_entries(
            DMatrix::from_diagonal_element(2, 2, Complex64::new(0.3, 0.0)),
            g1.clone(),
            g2.clone(),
        )
        .unwrap();
        let (out, factor) = normalize_passive(&small);
        assert_eq!(factor, 1.0);
        assert_eq!(out.entries(), small.entries());

        // 2·I scales to I with factor 0.5.
        let big = CouplingMatrix::from_entries(
            DMatrix::from_diagonal_element(2, 2, Complex64::new(2.0, 0.0)),
            g1,
            g2,
        )
        .unwrap();
        let (out, factor) = normalize_passive(&big);
        assert!((factor - 0.5).abs() < 1e-15);
        assert!((out.entries()[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn normalize_passive_caps_sigma_max_at_one() {
        let lam = carrier().wavelength();
        let g1 = ArrayGeometry::planar(1, 4, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let g2 = ArrayGeometry::planar(
            1,
            3,
            lam / 2.0,
            Vector3::new(5.0 * lam, 0.0, 0.0),
            -Vector3::x(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(3, 4, |_, _| complex_gaussian(&mut rng) * 3.0);
        let g = CouplingMatrix::from_entries(m, g1, g2).unwrap();
        assert!(g.spectral_norm() > 1.0);
        let (out, factor) = normalize_passive(&g);
        assert!((out.spectral_norm() - 1.0).abs() < 1e-12);
        assert!(factor < 1.0);
    }

    #[test]
    fn los_broadside_channel_is_all_ones() {
        let lam = carrier().wavelength();
        let env = ArrayGeometry::planar(3, 3, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let h = user_channel(
            &env,
            Direction::broadside(),
            &carrier(),
            ChannelModel::LineOfSight,
            0,
        )
        .unwrap();
        for v in h.gains().iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rician_converges_to_los_for_huge_k() {
        let lam = carrier().wavelength();
        let env = ArrayGeometry::planar(3, 3, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let dir = Direction::azimuth_cut(0.3).unwrap();
        let los = user_channel(&env, dir, &carrier(), ChannelModel::LineOfSight, 1).unwrap();
        let ric = user_channel(
            &env,
            dir,
            &carrier(),
            ChannelModel::Rician {
                k_factor: 1e12,
                path_count: 4,
            },
            1,
        )
        .unwrap();
        assert!((ric.gains() - los.gains()).norm() < 1e-5);
    }

    #[test]
    fn rician_is_bit_identical_for_a_fixed_seed() {
        let lam = carrier().wavelength();
        let env = ArrayGeometry::planar(2, 4, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let model = ChannelModel::Rician {
            k_factor: 3.16,
            path_count: 4,
        };
        let dir = Direction::azimuth_cut(-0.5).unwrap();
        let a = user_channel(&env, dir, &carrier(), model, 42).unwrap();
        let b = user_channel(&env, dir, &carrier(), model, 42).unwrap();
        assert_eq!(a.gains(), b.gains());
        let c = user_channel(&env, dir, &carrier(), model, 43).unwrap();
        assert_ne!(a.gains(), c.gains());
    }

    #[test]
    fn negative_k_factor_is_rejected() {
        let model = ChannelModel::Rician {
            k_factor: -0.1,
            path_count: 4,
        };
        assert!(model.validate().is_err());
    }

    fn scalar_chain(
        h_val: f64,
        t_val: f64,
        g_val: f64,
        f_val: f64,
    ) -> (UserChannel, DMatrix<Complex64>, CouplingMatrix, DVector<Complex64>) {
        let lam = carrier().wavelength();
        let g1 = single_element(0.0, Vector3::x(), 1e-5);
        let g2 = single_element(5.0 * lam, -Vector3::x(), 1e-5);
        let h = UserChannel::from_gains(
            DVector::from_element(1, Complex64::new(h_val, 0.0)),
            ChannelModel::LineOfSight,
        );
        let t = DMatrix::from_element(1, 1, Complex64::new(t_val, 0.0));
        let g = CouplingMatrix::from_entries(
            DMatrix::from_element(1, 1, Complex64::new(g_val, 0.0)),
            g1,
            g2,
        )
        .unwrap();
        let f = DVector::from_element(1, Complex64::new(f_val, 0.0));
        (h, t, g, f)
    }

    #[test]
    fn cascade_scalar_chain_and_zero_t() {
        let (h, _t, g, f) = scalar_chain(2.0, 0.0, 0.25, 1.0);
        let zero = DMatrix::from_element(1, 1, Complex64::default());
        assert_eq!(cascade_gain(&h, &zero, &g, &f).unwrap(), Complex64::default());
        let (h, t, g, f) = scalar_chain(2.0, 0.5, 0.25, 1.0);
        let v = cascade_gain(&h, &t, &g, &f).unwrap();
        assert!((v - Complex64::new(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cascade_matches_naive_triple_loop() {
        let lam = carrier().wavelength();
        let (m, n, k) = (4usize, 3usize, 2usize);
        let ga = ArrayGeometry::planar(1, k, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        let gb = ArrayGeometry::planar(
            1,
            n,
            lam / 2.0,
            Vector3::new(5.0 * lam, 0.0, 0.0),
            -Vector3::x(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = UserChannel::from_gains(
            DVector::from_fn(m, |_, _| complex_gaussian(&mut rng)),
            ChannelModel::LineOfSight,
        );
        let t = DMatrix::from_fn(m, n, |_, _| complex_gaussian(&mut rng));
        let g = CouplingMatrix::from_entries(
            DMatrix::from_fn(n, k, |_, _| complex_gaussian(&mut rng)),
            ga,
            gb,
        )
        .unwrap();
        let f = DVector::from_fn(k, |_, _| complex_gaussian(&mut rng));

        let mut naive = Complex64::default();
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    naive += h.gains()[i] * t[(i, j)] * g.entries()[(j, l)] * f[l];
                }
            }
        }
        let fast = cascade_gain(&h, &t, &g, &f).unwrap();
        assert!((fast - naive).norm() < 1e-12 * naive.norm().max(1.0));
    }

    #[test]
    fn cascade_rejects_dimension_mismatch() {
        let (h, t, g, _f) = scalar_chain(1.0, 1.0, 1.0, 1.0);
        let bad_f = DVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(cascade_gain(&h, &t, &g, &bad_f).is_err());
    }

    proptest! {
        #[test]
        fn cascade_is_linear_in_the_feed(re1 in -2.0..2.0f64, im1 in -2.0..2.0f64,
                                         re2 in -2.0..2.0f64, im2 in -2.0..2.0f64) {
            let (h, t, g, _f) = scalar_chain(1.3, 0.7, 0.4, 1.0);
            let f1 = DVector::from_element(1, Complex64::new(0.3, -0.8));
            let f2 = DVector::from_element(1, Complex64::new(-1.1, 0.2));
            let alpha = Complex64::new(re1, im1);
            let beta = Complex64::new(re2, im2);
            let combo = &f1 * alpha + &f2 * beta;
            let lhs = cascade_gain(&h, &t, &g, &combo).unwrap();
            let rhs = alpha * cascade_gain(&h, &t, &g, &f1).unwrap()
                + beta * cascade_gain(&h, &t, &g, &f2).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}
