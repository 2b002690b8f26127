//! Triangulated geometry: a disc-shaped inhomogeneity embedded in a square
//! box padded by an absorbing (PML) layer.
//!
//! The mesh is built from a hexagonal lattice of interior points, an exact
//! point ring on the disc boundary and a structured loop on the outer box,
//! Delaunay-triangulated and then smoothed. The disc interior is tiled
//! exactly by the triangles whose centroid falls inside the boundary ring.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delaunay::triangulate;
use crate::error::{Error, Result};
use crate::scalar::{fp, s, Scalar};

/// Region label per triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    /// Inside the inhomogeneity support D.
    Inhomogeneity,
    /// Homogeneous buffer between D and the absorbing layer.
    Buffer,
    /// Absorbing layer next to the outer boundary.
    Pml,
}

impl RegionTag {
    pub fn to_code(self) -> u8 {
        match self {
            RegionTag::Inhomogeneity => 0,
            RegionTag::Buffer => 1,
            RegionTag::Pml => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(RegionTag::Inhomogeneity),
            1 => Ok(RegionTag::Buffer),
            2 => Ok(RegionTag::Pml),
            _ => Err(Error::Parse(format!("unknown region tag {c}"))),
        }
    }
}

/// Conforming 2D triangulation of the computational box.
#[derive(Clone)]
pub struct TriangleMesh<T: Scalar> {
    pub vertices: Vec<Vector2<T>>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<RegionTag>,
    /// True for vertices on the outer box boundary.
    pub boundary: Vec<bool>,
    /// Indices of triangles tagged `Inhomogeneity`, ascending.
    pub d_elements: Vec<usize>,
    /// Half-width of the computational box.
    pub half_width: T,
    /// Thickness of the PML layer along each axis.
    pub pml_thickness: T,
    /// Radius of the disc inhomogeneity.
    pub radius: T,
}

/// Probe points where the localization indicator is evaluated: one per
/// D-element, at its centroid.
#[derive(Clone)]
pub struct ProbePoints<T: Scalar> {
    pub points: Vec<Vector2<T>>,
    /// Owning triangle index (into `mesh.triangles`) per point.
    pub owner: Vec<usize>,
}

/// Calibration of lattice spacing against `elements_per_wavelength` so the
/// reference resolution (radius 1, k = 5, 20 elements per wavelength)
/// produces about 2700 disc elements.
const SPACING_CAL: f64 = 0.83;

impl<T: Scalar> TriangleMesh<T> {
    pub fn num_d_elements(&self) -> usize {
        self.d_elements.len()
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        ((pb.x - pa.x) * (pc.y - pa.y) - (pb.y - pa.y) * (pc.x - pa.x)) * s::<T>(0.5)
    }

    pub fn centroid(&self, t: usize) -> Vector2<T> {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / s::<T>(3.0)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> T {
        let mut min = T::pi();
        for t in &self.triangles {
            for i in 0..3 {
                let p0 = self.vertices[t[i]];
                let p1 = self.vertices[t[(i + 1) % 3]];
                let p2 = self.vertices[t[(i + 2) % 3]];
                let u = p1 - p0;
                let v = p2 - p0;
                let ang = (u.dot(&v) / (u.norm() * v.norm())).clamp(-T::one(), T::one()).acos();
                if ang < min {
                    min = ang;
                }
            }
        }
        min * s::<T>(180.0) / T::pi()
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: &Vector2<T>) -> [T; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y);
        let l0 = ((pb.x - p.x) * (pc.y - p.y) - (pc.x - p.x) * (pb.y - p.y)) / det;
        let l1 = ((pc.x - p.x) * (pa.y - p.y) - (pa.x - p.x) * (pc.y - p.y)) / det;
        [l0, l1, T::one() - l0 - l1]
    }

    /// Checks conformity (every edge in 1 or 2 triangles, hull edges on the
    /// outer box), positive areas and the minimum-angle bound.
    /// Reassembles a mesh from raw vertices, triangles and region tags (the
    /// content of the text format). Boundary flags are derived from hull
    /// edges; the box half-width is exact, while the disc radius and PML
    /// thickness are recovered from the tagged geometry at element accuracy.
    pub fn from_parts(
        vertices: Vec<Vector2<T>>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<RegionTag>,
    ) -> Result<Self> {
        if triangles.len() != tags.len() {
            return Err(Error::invalid("one region tag per triangle required"));
        }
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                if a >= vertices.len() || b >= vertices.len() {
                    return Err(Error::invalid("triangle references missing vertex"));
                }
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut boundary = vec![false; vertices.len()];
        for (&(a, b), &cnt) in &edges {
            if cnt == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        let d_elements: Vec<usize> = (0..triangles.len())
            .filter(|&t| tags[t] == RegionTag::Inhomogeneity)
            .collect();
        if d_elements.is_empty() {
            return Err(Error::invalid("mesh has no D-tagged elements"));
        }
        let inf_norm = |v: &Vector2<T>| v.x.abs().max(v.y.abs());
        let half_width = vertices
            .iter()
            .map(inf_norm)
            .fold(T::zero(), |a, b| a.max(b));
        let mut radius = T::zero();
        let mut interior_extent = T::zero();
        for (t, tag) in triangles.iter().zip(&tags) {
            for &v in t {
                match tag {
                    RegionTag::Inhomogeneity => radius = radius.max(vertices[v].norm()),
                    RegionTag::Buffer => {
                        interior_extent = interior_extent.max(inf_norm(&vertices[v]))
                    }
                    RegionTag::Pml => {}
                }
            }
        }
        let pml_thickness = half_width - interior_extent;
        Ok(Self {
            vertices,
            triangles,
            tags,
            boundary,
            d_elements,
            half_width,
            pml_thickness,
            radius,
        })
    }

    pub fn validate(&self) -> Result<()> {
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            if self.triangle_area(ti) <= T::zero() {
                return Err(Error::invalid(format!("triangle {ti} has non-positive area")));
            }
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for (&(a, b), &cnt) in &edges {
            match cnt {
                2 => {}
                1 => {
                    if !(self.boundary[a] && self.boundary[b]) {
                        return Err(Error::invalid(format!(
                            "hull edge ({a},{b}) not on the outer boundary"
                        )));
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "edge ({a},{b}) shared by {cnt} triangles"
                    )))
                }
            }
        }
        let min_angle = self.min_angle_deg();
        if min_angle < s::<T>(20.0) {
            return Err(Error::invalid(format!(
                "mesh quality below bound: min angle {min_angle:?} < 20 deg"
            )));
        }
        Ok(())
    }
}

/// Builds the disc-in-a-box mesh.
///
/// Distinct seeds shift and jitter the interior lattice, producing distinct
/// but statistically equivalent meshes (used for the two-mesh data versus
/// reconstruction split).
pub fn build_disc_mesh<T: Scalar>(
    radius: T,
    wave_number: T,
    elements_per_wavelength: usize,
    pml_thickness: T,
    buffer: T,
    seed: u64,
) -> Result<TriangleMesh<T>> {
    if radius <= T::zero() || wave_number <= T::zero() || pml_thickness <= T::zero() || buffer < T::zero() {
        return Err(Error::invalid("radius, wave number and PML thickness must be positive"));
    }
    if elements_per_wavelength < 10 {
        return Err(Error::invalid("need at least 10 elements per wavelength"));
    }
    let lambda = s::<T>(2.0) * T::pi() / wave_number;
    let h = lambda * s::<T>(SPACING_CAL) / s::<T>(elements_per_wavelength as f64);
    let hw = radius + buffer + pml_thickness;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points: Vec<Vector2<T>> = Vec::new();
    let mut movable_from = 0usize;

    // Outer box loop, corners included, spacing <= h.
    let side = s::<T>(2.0) * hw;
    let nb = (fp(side / h).ceil() as usize).max(4);
    let step = side / s::<T>(nb as f64);
    for i in 0..nb {
        let t = -hw + step * s::<T>(i as f64);
        points.push(Vector2::new(t, -hw));
        points.push(Vector2::new(hw, t));
        points.push(Vector2::new(-t, hw));
        points.push(Vector2::new(-hw, -t));
    }

    // Exact ring on the disc boundary; seeded start angle.
    let two_pi = s::<T>(2.0) * T::pi();
    let mc = (fp(two_pi * radius / h).round() as usize).max(8);
    let phase = s::<T>(rng.gen::<f64>()) * two_pi;
    for j in 0..mc {
        let a = phase + two_pi * s::<T>(j as f64) / s::<T>(mc as f64);
        points.push(Vector2::new(radius * a.cos(), radius * a.sin()));
    }
    movable_from = points.len().max(movable_from);

    // Hexagonal interior lattice with a seeded offset and jitter, cleared
    // near the box boundary and the disc ring.
    let row = h * s::<T>(0.8660254037844386);
    let ox = s::<T>(rng.gen::<f64>()) * h;
    let oy = s::<T>(rng.gen::<f64>()) * row;
    let margin = h * s::<T>(0.55);
    let jitter = s::<T>(0.12);
    let nrows = fp(side / row).ceil() as usize + 2;
    let ncols = fp(side / h).ceil() as usize + 2;
    for j in 0..nrows {
        let y0 = -hw + oy + row * s::<T>(j as f64);
        let shift = if j % 2 == 0 { T::zero() } else { h * s::<T>(0.5) };
        for i in 0..ncols {
            let x0 = -hw + ox + shift + h * s::<T>(i as f64);
            let jx = s::<T>(rng.gen::<f64>() * 2.0 - 1.0) * jitter * h;
            let jy = s::<T>(rng.gen::<f64>() * 2.0 - 1.0) * jitter * h;
            let p = Vector2::new(x0 + jx, y0 + jy);
            if p.x.abs() > hw - margin || p.y.abs() > hw - margin {
                continue;
            }
            if (p.norm() - radius).abs() < margin {
                continue;
            }
            points.push(p);
        }
    }

    let (verts, tris) = triangulate(&points, hw * s::<T>(1.5));
    if verts.len() != points.len() {
        return Err(Error::invalid("duplicate points in mesh generation"));
    }
    let mut verts = verts;

    // Laplacian smoothing of the lattice points (ring and box fixed).
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for t in &tris {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for v in adj.iter_mut() {
        v.sort_unstable();
        v.dedup();
    }
    for _pass in 0..6 {
        let snapshot = verts.clone();
        for (i, nbrs) in adj.iter().enumerate() {
            if i < movable_from || nbrs.is_empty() {
                continue;
            }
            let mut acc = Vector2::new(T::zero(), T::zero());
            for &nb in nbrs {
                acc += snapshot[nb];
            }
            verts[i] = acc / s::<T>(nbrs.len() as f64);
        }
        // Revert the pass if it flipped any triangle.
        let flipped = tris.iter().any(|t| {
            let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x) <= T::zero()
        });
        if flipped {
            verts = snapshot;
            break;
        }
    }

    // Reorder vertices lexicographically by (y, x) to keep the FEM matrix
    // bandwidth small, then retag and classify.
    let mut order: Vec<usize> = (0..verts.len()).collect();
    order.sort_by(|&a, &b| {
        (verts[a].y, verts[a].x)
            .partial_cmp(&(verts[b].y, verts[b].x))
            .expect("non-finite vertex")
    });
    let mut perm = vec![0usize; verts.len()];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    let vertices: Vec<Vector2<T>> = order.iter().map(|&o| verts[o]).collect();
    let mut triangles: Vec<[usize; 3]> = tris
        .iter()
        .map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]])
        .collect();
    triangles.sort_unstable();

    let btol = hw * s::<T>(1e-9);
    let boundary: Vec<bool> = vertices
        .iter()
        .map(|p| (p.x.abs() - hw).abs() < btol || (p.y.abs() - hw).abs() < btol)
        .collect();

    let pml_start = hw - pml_thickness;
    let mut tags = Vec::with_capacity(triangles.len());
    let mut d_elements = Vec::new();
    for (ti, t) in triangles.iter().enumerate() {
        let c = (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / s::<T>(3.0);
        let tag = if c.norm() < radius {
            d_elements.push(ti);
            RegionTag::Inhomogeneity
        } else if c.x.abs() > pml_start || c.y.abs() > pml_start {
            RegionTag::Pml
        } else {
            RegionTag::Buffer
        };
        tags.push(tag);
    }

    let mesh = TriangleMesh {
        vertices,
        triangles,
        tags,
        boundary,
        d_elements,
        half_width: hw,
        pml_thickness,
        radius,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// One probe point per D-element, at its centroid.
pub fn probe_points<T: Scalar>(mesh: &TriangleMesh<T>) -> ProbePoints<T> {
    let points = mesh.d_elements.iter().map(|&t| mesh.centroid(t)).collect();
    ProbePoints {
        points,
        owner: mesh.d_elements.clone(),
    }
}
