//! P1 finite-element solver for the Helmholtz scattering problem with
//! Cartesian perfectly matched layers.
//!
//! The scattered field u^s solves
//!   div(Λ grad u^s) + k² n s_x s_y u^s = -k² (n - 1) u^i   in the box,
//! with Λ = diag(s_y/s_x, s_x/s_y), complex stretches s = 1 + i σ/k active
//! only in the PML layer, u^s = 0 on the outer boundary, and the plane-wave
//! source u^i(x) = exp(i k θ·x) supported (through n - 1) on D only. The
//! system matrix is complex symmetric and source independent, so it is
//! factored once per index and reused across incidence directions.

use nalgebra::Vector2;

use crate::band::{BandFactor, BandMatrix};
use crate::error::{Error, Result};
use crate::fields::{IndexField, NodalField};
use crate::mesh::{RegionTag, TriangleMesh};
use crate::scalar::{cis, s, Scalar, C};

/// Far-field normalization constant γ for d = 2: e^{iπ/4} / sqrt(8πk).
pub fn gamma_2d<T: Scalar>(k: T) -> C<T> {
    let r = (s::<T>(8.0) * T::pi() * k).sqrt().recip();
    cis(T::pi() / s::<T>(4.0)) * r
}

/// The d = 3 branch of γ; kept for reference, unused by the 2D solver.
pub fn gamma_3d<T: Scalar>() -> C<T> {
    C::new((s::<T>(4.0) * T::pi()).recip(), T::zero())
}

/// Nominal normal-incidence PML reflection coefficient.
const PML_REFLECTION: f64 = 1e-6;

/// Plane wave exp(i k θ·x).
#[inline]
pub fn incident_wave<T: Scalar>(k: T, theta: &Vector2<T>, x: &Vector2<T>) -> C<T> {
    cis(k * theta.dot(x))
}

/// Degree-2 triangle quadrature: edge midpoints, weight area/3 each.
/// Returns (point, P1 shape values) per node.
pub fn midpoint_rule<T: Scalar>(mesh: &TriangleMesh<T>, t: usize) -> [(Vector2<T>, [T; 3]); 3] {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let half = s::<T>(0.5);
    [
        ((pa + pb) * half, [half, half, T::zero()]),
        ((pb + pc) * half, [T::zero(), half, half]),
        ((pc + pa) * half, [half, T::zero(), half]),
    ]
}

pub struct HelmholtzSolver<'a, T: Scalar> {
    mesh: &'a TriangleMesh<T>,
    k: T,
    factor: BandFactor<T>,
    /// Contrast n - 1 per D-element, local indexing.
    contrast: Vec<C<T>>,
}

impl<'a, T: Scalar> HelmholtzSolver<'a, T> {
    /// Assembles and factorizes the system for the given index field.
    pub fn new(mesh: &'a TriangleMesh<T>, index: &IndexField<T>, k: T) -> Result<Self> {
        if k <= T::zero() {
            return Err(Error::invalid("wave number must be positive"));
        }
        if index.zoning.num_elements() != mesh.num_d_elements() {
            return Err(Error::Mismatch(format!(
                "index field has {} elements, mesh has {} D-elements",
                index.zoning.num_elements(),
                mesh.num_d_elements()
            )));
        }
        let contrast: Vec<C<T>> = (0..mesh.num_d_elements())
            .map(|e| index.value_on_element(e) - C::new(T::one(), T::zero()))
            .collect();

        let n = mesh.vertices.len();
        let mut bw = 0usize;
        for t in &mesh.triangles {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    bw = bw.max(t[i].abs_diff(t[j]));
                }
            }
        }
        let mut matrix = BandMatrix::<T>::zeros(n, bw);

        let pml_start = mesh.half_width - mesh.pml_thickness;
        let sigma0 = s::<T>(-1.5) * s::<T>(PML_REFLECTION.ln()) / mesh.pml_thickness;
        let stretch = |coord: T| -> C<T> {
            let depth = coord.abs() - pml_start;
            if depth <= T::zero() {
                C::new(T::one(), T::zero())
            } else {
                let ratio = depth / mesh.pml_thickness;
                C::new(T::one(), sigma0 * ratio * ratio / k)
            }
        };

        let mut d_local = 0usize;
        let k2 = k * k;
        for (ti, tri) in mesh.triangles.iter().enumerate() {
            let (p0, p1, p2) = (
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            );
            let area = mesh.triangle_area(ti);
            let inv2a = (s::<T>(2.0) * area).recip();
            let gb = [
                (p1.y - p2.y) * inv2a,
                (p2.y - p0.y) * inv2a,
                (p0.y - p1.y) * inv2a,
            ];
            let gc = [
                (p2.x - p1.x) * inv2a,
                (p0.x - p2.x) * inv2a,
                (p1.x - p0.x) * inv2a,
            ];
            let centroid = (p0 + p1 + p2) / s::<T>(3.0);
            let (sx, sy) = (stretch(centroid.x), stretch(centroid.y));
            let ax = sy / sx;
            let ay = sx / sy;
            let mass_coef = sx * sy;
            let n_e = match mesh.tags[ti] {
                RegionTag::Inhomogeneity => {
                    let v = contrast[d_local] + C::new(T::one(), T::zero());
                    d_local += 1;
                    v
                }
                _ => C::new(T::one(), T::zero()),
            };
            let mass_scale = n_e * mass_coef * (k2 * area / s::<T>(12.0));
            for i in 0..3 {
                for j in i..3 {
                    let stiff = (ax * (gb[i] * gb[j]) + ay * (gc[i] * gc[j])) * area;
                    let mass = mass_scale * s::<T>(if i == j { 2.0 } else { 1.0 });
                    matrix.add(tri[i], tri[j], stiff - mass);
                }
            }
        }
        debug_assert_eq!(d_local, mesh.num_d_elements());

        for (v, &on_boundary) in mesh.boundary.iter().enumerate() {
            if on_boundary {
                matrix.dirichlet(v);
            }
        }

        let factor = matrix.factorize()?;
        Ok(Self {
            mesh,
            k,
            factor,
            contrast,
        })
    }

    /// Total field u_n = u^s + a·u^i for a plane wave a·exp(ikθ·x).
    pub fn solve_plane_wave_with_amplitude(
        &self,
        theta: Vector2<T>,
        amplitude: C<T>,
    ) -> NodalField<T> {
        let n = self.mesh.vertices.len();
        let mut rhs = vec![C::new(T::zero(), T::zero()); n];
        let k2 = self.k * self.k;
        for (local, &ti) in self.mesh.d_elements.iter().enumerate() {
            let chi = self.contrast[local];
            if chi.norm_sqr() == T::zero() {
                continue;
            }
            let area3 = self.mesh.triangle_area(ti) / s::<T>(3.0);
            let tri = self.mesh.triangles[ti];
            for (point, shape) in midpoint_rule(self.mesh, ti) {
                let src = chi * incident_wave(self.k, &theta, &point) * amplitude * (k2 * area3);
                for i in 0..3 {
                    rhs[tri[i]] += src * shape[i];
                }
            }
        }
        for (v, &on_boundary) in self.mesh.boundary.iter().enumerate() {
            if on_boundary {
                rhs[v] = C::new(T::zero(), T::zero());
            }
        }
        let mut x = self.factor.solve(&rhs);
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            x[v] += incident_wave(self.k, &theta, p) * amplitude;
        }
        NodalField {
            values: x,
            direction: theta,
        }
    }

    /// Total field for a unit plane wave.
    pub fn solve_plane_wave(&self, theta: Vector2<T>) -> NodalField<T> {
        self.solve_plane_wave_with_amplitude(theta, C::new(T::one(), T::zero()))
    }

    /// Scattered part only (total minus incident), for diagnostics.
    pub fn scattered_part(&self, field: &NodalField<T>) -> Vec<C<T>> {
        field
            .values
            .iter()
            .zip(&self.mesh.vertices)
            .map(|(u, p)| u - incident_wave(self.k, &field.direction, p))
            .collect()
    }

    pub fn mesh(&self) -> &TriangleMesh<T> {
        self.mesh
    }

    pub fn wave_number(&self) -> T {
        self.k
    }
}

/// Convenience wrapper: one factorization, one solve.
pub fn solve_total_field<T: Scalar>(
    mesh: &TriangleMesh<T>,
    index: &IndexField<T>,
    k: T,
    theta: Vector2<T>,
) -> Result<NodalField<T>> {
    Ok(HelmholtzSolver::new(mesh, index, k)?.solve_plane_wave(theta))
}
