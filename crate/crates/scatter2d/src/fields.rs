//! Direction grids, piecewise-constant index fields and nodal fields.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{ProbePoints, TriangleMesh};
use crate::scalar::{s, Scalar, C};
use crate::zoning::Zoning;

/// A set of unit direction vectors on the circle with the quadrature weight
/// of the underlying angular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid<T: Scalar> {
    pub angles: Vec<T>,
    /// Quadrature weight per direction: aperture length / M.
    pub weight: T,
    /// Angular aperture `[start, end]`.
    pub aperture: (T, T),
}

impl<T: Scalar> DirectionGrid<T> {
    /// `m` directions equally distributed over the full circle.
    pub fn full(m: usize) -> Self {
        let two_pi = s::<T>(2.0) * T::pi();
        let angles = (0..m).map(|j| two_pi * s::<T>(j as f64) / s::<T>(m as f64)).collect();
        Self {
            angles,
            weight: two_pi / s::<T>(m as f64),
            aperture: (T::zero(), two_pi),
        }
    }

    /// `m` directions over the aperture `[start, end]` (midpoint rule).
    pub fn partial(start: T, end: T, m: usize) -> Self {
        let len = end - start;
        let angles = (0..m)
            .map(|j| start + len * (s::<T>(j as f64) + s::<T>(0.5)) / s::<T>(m as f64))
            .collect();
        Self {
            angles,
            weight: len / s::<T>(m as f64),
            aperture: (start, end),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn direction(&self, i: usize) -> Vector2<T> {
        Vector2::new(self.angles[i].cos(), self.angles[i].sin())
    }

    pub fn directions(&self) -> Vec<Vector2<T>> {
        (0..self.len()).map(|i| self.direction(i)).collect()
    }

    /// True when this grid covers the full circle.
    pub fn is_full_aperture(&self) -> bool {
        let two_pi = s::<T>(2.0) * T::pi();
        ((self.aperture.1 - self.aperture.0) - two_pi).abs() < s::<T>(1e-12)
    }
}

/// Piecewise-constant complex refraction index over a zoning; implicitly 1
/// outside D.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexField<T: Scalar> {
    pub zoning: Zoning,
    /// One complex parameter per zone.
    pub values: Vec<C<T>>,
    /// When set, imaginary parts are forced to zero by the reconstruction.
    pub real_constraint: bool,
}

impl<T: Scalar> IndexField<T> {
    pub fn new(zoning: Zoning, values: Vec<C<T>>, real_constraint: bool) -> Result<Self> {
        if values.len() != zoning.num_zones() {
            return Err(Error::Mismatch(format!(
                "{} parameters for {} zones",
                values.len(),
                zoning.num_zones()
            )));
        }
        Ok(Self {
            zoning,
            values,
            real_constraint,
        })
    }

    pub fn constant(zoning: Zoning, value: C<T>, real_constraint: bool) -> Self {
        let values = vec![value; zoning.num_zones()];
        Self {
            zoning,
            values,
            real_constraint,
        }
    }

    /// Index value on the D-element with local index `e`.
    #[inline]
    pub fn value_on_element(&self, e: usize) -> C<T> {
        self.values[self.zoning.zone_of[e]]
    }

    /// Per-element sample of the field over all D-elements.
    pub fn element_values(&self) -> Vec<C<T>> {
        (0..self.zoning.num_elements()).map(|e| self.value_on_element(e)).collect()
    }
}

/// Nodal complex P1 field on a mesh, tied to the plane-wave direction it was
/// solved for.
#[derive(Debug, Clone)]
pub struct NodalField<T: Scalar> {
    pub values: Vec<C<T>>,
    pub direction: Vector2<T>,
}

impl<T: Scalar> NodalField<T> {
    /// Barycentric (P1) interpolation at the probe points.
    pub fn interpolate(&self, mesh: &TriangleMesh<T>, probes: &ProbePoints<T>) -> Result<Vec<C<T>>> {
        let mut out = Vec::with_capacity(probes.points.len());
        for (p, &t) in probes.points.iter().zip(&probes.owner) {
            let bary = mesh.barycentric(t, p);
            if bary.iter().any(|&l| l < s::<T>(-1e-9)) {
                return Err(Error::invalid("probe point outside its owning element"));
            }
            let [v0, v1, v2] = mesh.triangles[t];
            out.push(
                self.values[v0] * bary[0] + self.values[v1] * bary[1] + self.values[v2] * bary[2],
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, probe_points};
    use num_complex::Complex64;

    #[test]
    fn full_grid_weights_sum_to_circle() {
        let g = DirectionGrid::<f64>::full(30);
        assert_eq!(g.len(), 30);
        assert!((g.weight * 30.0 - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(g.is_full_aperture());
        for i in 0..30 {
            assert!((g.direction(i).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_grid_weights_sum_to_aperture() {
        let end = 1.5 * std::f64::consts::PI;
        let g = DirectionGrid::<f64>::partial(0.0, end, 25);
        assert!((g.weight * 25.0 - end).abs() < 1e-12);
        assert!(!g.is_full_aperture());
    }

    #[test]
    fn interpolation_reproduces_linears_and_constants() {
        let lambda = 2.0 * std::f64::consts::PI / 5.0;
        let mesh = build_disc_mesh(1.0, 5.0, 12, lambda, 0.5 * lambda, 5).unwrap();
        let probes = probe_points(&mesh);

        let cval = Complex64::new(2.5, -1.0);
        let constant = NodalField {
            values: vec![cval; mesh.vertices.len()],
            direction: Vector2::new(1.0, 0.0),
        };
        for v in constant.interpolate(&mesh, &probes).unwrap() {
            assert!((v - cval).norm() < 1e-13);
        }

        // u(x, y) = x + i y is reproduced exactly by P1.
        let linear = NodalField {
            values: mesh.vertices.iter().map(|p| Complex64::new(p.x, p.y)).collect(),
            direction: Vector2::new(1.0, 0.0),
        };
        let vals = linear.interpolate(&mesh, &probes).unwrap();
        for (v, p) in vals.iter().zip(&probes.points) {
            assert!((v - Complex64::new(p.x, p.y)).norm() < 1e-12);
        }
    }

    #[test]
    fn index_field_evaluates_per_zone() {
        let zoning = Zoning::from_zone_of(vec![0, 0, 1, 1, 1], 2).unwrap();
        let f = IndexField::new(
            zoning,
            vec![Complex64::new(1.3, 0.0), Complex64::new(1.6, 0.0)],
            true,
        )
        .unwrap();
        assert_eq!(f.value_on_element(1), Complex64::new(1.3, 0.0));
        assert_eq!(f.value_on_element(4), Complex64::new(1.6, 0.0));
        assert!(IndexField::<f64>::new(f.zoning.clone(), vec![], true).is_err());
    }
}
