//! Planar apertures, propagation directions, and far-field steering vectors.
//!
//! Conventions used throughout the crate: an aperture lies in the plane
//! orthogonal to its `normal`, broadside is the normal direction, and a
//! [`Direction`] is an (azimuth, elevation) pair measured from broadside.
//! Azimuth rotates toward the aperture's horizontal tangent axis, elevation
//! toward the vertical one.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

const UNIT_NORMAL_TOL: f64 = 1e-12;
const COPLANAR_TOL: f64 = 1e-9;

/// Carrier wavelength plus the circuit reference impedance shared by the
/// multiport network models.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierConfig {
    wavelength: f64,
    reference_impedance: f64,
}

impl CarrierConfig {
    pub fn new(wavelength: f64, reference_impedance: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidCarrier(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(reference_impedance > 0.0) || !reference_impedance.is_finite() {
            return Err(Error::InvalidCarrier(format!(
                "reference impedance must be positive, got {reference_impedance}"
            )));
        }
        Ok(Self {
            wavelength,
            reference_impedance,
        })
    }

    /// Carrier with the conventional 50 Ω reference impedance.
    pub fn with_wavelength(wavelength: f64) -> Result<Self> {
        Self::new(wavelength, 50.0)
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn reference_impedance(&self) -> f64 {
        self.reference_impedance
    }

    /// 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }
}

/// Departure direction relative to an aperture's broadside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        use std::f64::consts::{FRAC_PI_2, PI};
        if !azimuth.is_finite() || azimuth < -PI || azimuth > PI {
            return Err(Error::InvalidDirection(format!(
                "azimuth must lie in [-pi, pi], got {azimuth}"
            )));
        }
        if !elevation.is_finite() || elevation < -FRAC_PI_2 || elevation > FRAC_PI_2 {
            return Err(Error::InvalidDirection(format!(
                "elevation must lie in [-pi/2, pi/2], got {elevation}"
            )));
        }
        Ok(Self { azimuth, elevation })
    }

    /// Azimuth-only direction in the horizontal cut (elevation 0).
    pub fn azimuth_cut(azimuth: f64) -> Result<Self> {
        Self::new(azimuth, 0.0)
    }

    pub fn broadside() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }
}

/// A planar array of radiating elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Vector3<f64>>,
    normal: Vector3<f64>,
    element_area: f64,
    rows: usize,
    cols: usize,
    azimuth_axis: Vector3<f64>,
    elevation_axis: Vector3<f64>,
}

/// Deterministic tangent basis: azimuth axis, then elevation axis, both unit
/// and orthogonal to the normal.
fn tangent_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let reference = if normal.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let azimuth_axis = reference.cross(normal).normalize();
    let elevation_axis = normal.cross(&azimuth_axis);
    (azimuth_axis, elevation_axis)
}

fn check_unit_normal(normal: &Vector3<f64>) -> Result<()> {
    if (normal.norm() - 1.0).abs() > UNIT_NORMAL_TOL {
        return Err(Error::InvalidGeometry(format!(
            "normal must be a unit vector, |n| = {}",
            normal.norm()
        )));
    }
    Ok(())
}

impl ArrayGeometry {
    /// Uniform rectangular grid of `rows × cols` elements with the given
    /// inter-element spacing, centered at `center` in the plane orthogonal to
    /// `normal`. The element area defaults to `spacing²` (unit-cell tiling).
    pub fn planar(
        rows: usize,
        cols: usize,
        spacing: f64,
        center: Vector3<f64>,
        normal: Vector3<f64>,
    ) -> Result<Self> {
        if rows < 1 || cols < 1 {
            return Err(Error::InvalidGeometry(format!(
                "grid must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        check_unit_normal(&normal)?;
        let (azimuth_axis, elevation_axis) = tangent_basis(&normal);
        let mut positions = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let dv = (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
                let dh = (c as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
                positions.push(center + dh * azimuth_axis + dv * elevation_axis);
            }
        }
        Ok(Self {
            positions,
            normal,
            element_area: spacing * spacing,
            rows,
            cols,
            azimuth_axis,
            elevation_axis,
        })
    }

    /// Builds a geometry from explicit element positions. The positions must
    /// be coplanar (within 1e-9 m) in the plane orthogonal to `normal`.
    pub fn from_positions(
        positions: Vec<Vector3<f64>>,
        normal: Vector3<f64>,
        element_area: f64,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        if positions.is_empty() || positions.len() != rows * cols {
            return Err(Error::InvalidGeometry(format!(
                "expected rows*cols = {} positions, got {}",
                rows * cols,
                positions.len()
            )));
        }
        check_unit_normal(&normal)?;
        if !(element_area > 0.0) || !element_area.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "element area must be positive, got {element_area}"
            )));
        }
        let p0 = positions[0];
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidGeometry(format!("position {i} is not finite")));
            }
            if (p - p0).dot(&normal).abs() > COPLANAR_TOL {
                return Err(Error::InvalidGeometry(format!(
                    "position {i} deviates {} m from the aperture plane",
                    (p - p0).dot(&normal).abs()
                )));
            }
        }
        let (azimuth_axis, elevation_axis) = tangent_basis(&normal);
        Ok(Self {
            positions,
            normal,
            element_area,
            rows,
            cols,
            azimuth_axis,
            elevation_axis,
        })
    }

    /// Replaces the default unit-cell element area.
    pub fn with_element_area(mut self, element_area: f64) -> Result<Self> {
        if !(element_area > 0.0) || !element_area.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "element area must be positive, got {element_area}"
            )));
        }
        self.element_area = element_area;
        Ok(self)
    }

    /// Translates every element by `offset` (the plane orientation is kept).
    pub fn translated(&self, offset: Vector3<f64>) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            *p += offset;
        }
        out
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    /// Element count (M).
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn element_area(&self) -> f64 {
        self.element_area
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Centroid of the element positions.
    pub fn center(&self) -> Vector3<f64> {
        self.positions.iter().sum::<Vector3<f64>>() / self.positions.len() as f64
    }

    /// Distance between the first two elements of a grid row; falls back to 0
    /// for single-element apertures.
    pub fn element_spacing(&self) -> f64 {
        if self.cols >= 2 {
            (self.positions[1] - self.positions[0]).norm()
        } else if self.rows >= 2 {
            (self.positions[self.cols] - self.positions[0]).norm()
        } else {
            0.0
        }
    }

    /// Unit propagation vector for a direction measured from this aperture's
    /// broadside.
    pub fn unit_direction(&self, dir: Direction) -> Vector3<f64> {
        let (ca, sa) = (dir.azimuth().cos(), dir.azimuth().sin());
        let (ce, se) = (dir.elevation().cos(), dir.elevation().sin());
        ce * ca * self.normal + ce * sa * self.azimuth_axis + se * self.elevation_axis
    }
}

/// Far-field steering vector: entry m is exp(+j·(2π/λ)·⟨p_m, u(dir)⟩).
/// Every entry has unit modulus.
pub fn steering_vector(
    geom: &ArrayGeometry,
    dir: Direction,
    carrier: &CarrierConfig,
) -> DVector<Complex64> {
    let u = geom.unit_direction(dir);
    let k = carrier.wavenumber();
    DVector::from_iterator(
        geom.len(),
        geom.positions()
            .iter()
            .map(|p| Complex64::from_polar(1.0, k * p.dot(&u))),
    )
}

/// Derivative of the steering vector with respect to azimuth at fixed
/// elevation: entry m is j·(2π/λ)·⟨p_m, ∂u/∂az⟩ · a_m(dir).
pub fn steering_azimuth_derivative(
    geom: &ArrayGeometry,
    dir: Direction,
    carrier: &CarrierConfig,
) -> DVector<Complex64> {
    let (ca, sa) = (dir.azimuth().cos(), dir.azimuth().sin());
    let ce = dir.elevation().cos();
    let du = ce * (-sa * geom.normal() + ca * geom.azimuth_axis);
    let k = carrier.wavenumber();
    let a = steering_vector(geom, dir, carrier);
    DVector::from_iterator(
        geom.len(),
        geom.positions()
            .iter()
            .zip(a.iter())
            .map(|(p, am)| Complex64::new(0.0, k * p.dot(&du)) * am),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn carrier() -> CarrierConfig {
        CarrierConfig::with_wavelength(0.01).unwrap()
    }

    #[test]
    fn nine_by_nine_grid_has_81_elements_and_4_lambda_extent() {
        let lam = carrier().wavelength();
        let g = ArrayGeometry::planar(9, 9, lam / 2.0, Vector3::zeros(), Vector3::x()).unwrap();
        assert_eq!(g.len(), 81);
        let xs: Vec<f64> = g.positions().iter().map(|p| p.y).collect();
        let ys: Vec<f64> = g.positions().iter().map(|p| p.z).collect();
        let extent_h = xs.iter().cloned().fold(f64::MIN, f64::max)
            - xs.iter().cloned().fold(f64::MAX, f64::min);
        let extent_v = ys.iter().cloned().fold(f64::MIN, f64::max)
            - ys.iter().cloned().fold(f64::MAX, f64::min);
        assert!((extent_h - 4.0 * lam).abs() < 1e-12);
        assert!((extent_v - 4.0 * lam).abs() < 1e-12);
        assert!((g.element_area() - (lam / 2.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn single_element_grid_sits_at_center() {
        let g = ArrayGeometry::planar(1, 1, 0.005, Vector3::zeros(), Vector3::x()).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.positions()[0].norm() < 1e-15);
    }

    #[test]
    fn two_by_two_grid_has_uniform_adjacent_spacing() {
        let g = ArrayGeometry::planar(2, 2, 0.01, Vector3::zeros(), Vector3::z()).unwrap();
        let p = g.positions();
        let mut adjacent = 0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d = (p[i] - p[j]).norm();
                if d < 0.012 {
                    assert!((d - 0.01).abs() < 1e-15);
                    adjacent += 1;
                }
            }
        }
        assert_eq!(adjacent, 4);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(ArrayGeometry::planar(0, 3, 0.01, Vector3::zeros(), Vector3::x()).is_err());
        assert!(ArrayGeometry::planar(2, 2, 0.0, Vector3::zeros(), Vector3::x()).is_err());
        assert!(
            ArrayGeometry::planar(2, 2, 0.01, Vector3::zeros(), Vector3::x() * 1.1).is_err()
        );
    }

    #[test]
    fn rejects_non_coplanar_positions() {
        let lam = 0.01;
        let pos = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1e-6, lam / 2.0, 0.0),
        ];
        assert!(ArrayGeometry::from_positions(pos, Vector3::x(), 1e-4, 1, 2).is_err());
    }

    #[test]
    fn broadside_steering_is_all_ones_for_centered_array() {
        let g = ArrayGeometry::planar(5, 7, 0.005, Vector3::zeros(), Vector3::x()).unwrap();
        let a = steering_vector(&g, Direction::broadside(), &carrier());
        for v in a.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn endfire_two_element_array_alternates_sign() {
        // Elements at 0 and λ/2 along the array axis; steering along that axis
        // puts a π phase delay on the second element.
        let lam = carrier().wavelength();
        let pos = vec![Vector3::zeros(), Vector3::new(0.0, lam / 2.0, 0.0)];
        let g = ArrayGeometry::from_positions(pos, Vector3::x(), lam * lam / 4.0, 1, 2).unwrap();
        let a = steering_vector(&g, Direction::azimuth_cut(FRAC_PI_2).unwrap(), &carrier());
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn thirty_degrees_off_broadside_steps_quarter_turn() {
        // λ/2 line array: (2π/λ)(λ/2)sin(30°) = π/2 per element.
        let lam = carrier().wavelength();
        let pos: Vec<Vector3<f64>> = (0..4)
            .map(|m| Vector3::new(0.0, m as f64 * lam / 2.0, 0.0))
            .collect();
        let g = ArrayGeometry::from_positions(pos, Vector3::x(), lam * lam / 4.0, 1, 4).unwrap();
        let a = steering_vector(&g, Direction::azimuth_cut(PI / 6.0).unwrap(), &carrier());
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (v, e) in a.iter().zip(expected.iter()) {
            assert!((v - e).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_is_conjugate_symmetric_in_the_broadside_plane() {
        let g = ArrayGeometry::planar(3, 5, 0.004, Vector3::zeros(), Vector3::x()).unwrap();
        for az in [-1.2f64, -0.3, 0.7, 1.5] {
            let plus = steering_vector(&g, Direction::azimuth_cut(az).unwrap(), &carrier());
            let minus = steering_vector(&g, Direction::azimuth_cut(-az).unwrap(), &carrier());
            for (p, m) in plus.iter().zip(minus.iter()) {
                assert!((p.conj() - m).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn direction_range_checks() {
        assert!(Direction::new(3.2, 0.0).is_err());
        assert!(Direction::new(0.0, 1.6).is_err());
        assert!(Direction::new(-PI, FRAC_PI_2).is_ok());
    }

    #[test]
    fn azimuth_derivative_matches_finite_difference() {
        let g = ArrayGeometry::planar(3, 3, 0.005, Vector3::zeros(), Vector3::x()).unwrap();
        let az = 0.4;
        let h = 1e-7;
        let d = steering_azimuth_derivative(&g, Direction::azimuth_cut(az).unwrap(), &carrier());
        let ap = steering_vector(&g, Direction::azimuth_cut(az + h).unwrap(), &carrier());
        let am = steering_vector(&g, Direction::azimuth_cut(az - h).unwrap(), &carrier());
        for i in 0..g.len() {
            let fd = (ap[i] - am[i]) / Complex64::new(2.0 * h, 0.0);
            assert!((fd - d[i]).norm() < 1e-5 * (1.0 + d[i].norm()));
        }
    }

    proptest! {
        #[test]
        fn steering_entries_have_unit_modulus(
            az in -PI..PI,
            el in -FRAC_PI_2..FRAC_PI_2,
            rows in 1usize..5,
            cols in 1usize..5,
        ) {
            let g = ArrayGeometry::planar(rows, cols, 0.005, Vector3::zeros(), Vector3::x())
                .unwrap();
            let a = steering_vector(&g, Direction::new(az, el).unwrap(), &carrier());
            for v in a.iter() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
