//! Incremental Bowyer-Watson Delaunay triangulation of a 2D point set.
//!
//! Points are inserted one by one; the containing triangle is found by
//! walking from the last touched triangle, the conflicting cavity is grown
//! over circumcircle tests and re-triangulated as a star around the new
//! point. Three auxiliary "super" vertices enclose the whole point set and
//! are stripped on extraction.

use std::collections::HashMap;

use nalgebra::Vector2;

use crate::scalar::{s, Scalar};

const NONE: usize = usize::MAX;

#[derive(Clone)]
struct Tri {
    v: [usize; 3],
    /// Neighbor opposite vertex `v[i]`, `NONE` on the hull.
    n: [usize; 3],
    alive: bool,
}

pub struct Triangulation<T: Scalar> {
    pts: Vec<Vector2<T>>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    last: usize,
    scale: T,
    stamp: Vec<u64>,
    epoch: u64,
}

impl<T: Scalar> Triangulation<T> {
    /// Starts a triangulation whose super triangle encloses the square
    /// `[-extent, extent]^2`.
    pub fn new(extent: T) -> Self {
        let big = extent * s::<T>(64.0);
        let pts = vec![
            Vector2::new(T::zero(), big + big),
            Vector2::new(-big - big, -big),
            Vector2::new(big + big, -big),
        ];
        let tris = vec![Tri {
            v: [0, 1, 2],
            n: [NONE, NONE, NONE],
            alive: true,
        }];
        Self {
            pts,
            tris,
            free: Vec::new(),
            last: 0,
            scale: extent,
            stamp: vec![0],
            epoch: 0,
        }
    }

    fn orient(&self, a: usize, b: usize, c: &Vector2<T>) -> T {
        let pa = &self.pts[a];
        let pb = &self.pts[b];
        (pb.x - pa.x) * (c.y - pa.y) - (pb.y - pa.y) * (c.x - pa.x)
    }

    fn in_circumcircle(&self, t: &Tri, p: &Vector2<T>) -> bool {
        let [a, b, c] = t.v;
        let (pa, pb, pc) = (&self.pts[a], &self.pts[b], &self.pts[c]);
        let ax = pa.x - p.x;
        let ay = pa.y - p.y;
        let bx = pb.x - p.x;
        let by = pb.y - p.y;
        let cx = pc.x - p.x;
        let cy = pc.y - p.y;
        let a2 = ax * ax + ay * ay;
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let det = ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
        // Relative tolerance keeps co-circular configurations (lattices,
        // points on the disc boundary) out of the cavity.
        let mag = a2.max(b2).max(c2);
        det > mag * mag.sqrt() * s::<T>(1e-11)
    }

    /// Walks to a triangle containing `p`. Falls back to a linear scan if the
    /// walk cycles (should not happen for points inside the super triangle).
    fn locate(&self, p: &Vector2<T>) -> usize {
        let mut t = self.last;
        if !self.tris[t].alive {
            t = self.tris.iter().position(|t| t.alive).expect("empty triangulation");
        }
        let tol = -self.scale * self.scale * s::<T>(1e-14);
        let mut steps = 0usize;
        let max_steps = 4 * self.tris.len() + 64;
        loop {
            let tri = &self.tris[t];
            let mut moved = false;
            for i in 0..3 {
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if self.orient(a, b, p) < tol {
                    let next = tri.n[i];
                    if next != NONE {
                        t = next;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return t;
            }
            steps += 1;
            if steps > max_steps {
                break;
            }
        }
        // Robust fallback.
        for (i, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            let inside = (0..3).all(|k| {
                let a = tri.v[(k + 1) % 3];
                let b = tri.v[(k + 2) % 3];
                self.orient(a, b, p) >= tol
            });
            if inside {
                return i;
            }
        }
        panic!("point location failed: point outside the super triangle");
    }

    fn alloc(&mut self, t: Tri) -> usize {
        if let Some(i) = self.free.pop() {
            self.tris[i] = t;
            self.stamp[i] = 0;
            i
        } else {
            self.tris.push(t);
            self.stamp.push(0);
            self.tris.len() - 1
        }
    }

    /// Inserts a point; returns its vertex index (super vertices occupy 0..3).
    /// Points closer than `1e-12 * extent` to an existing vertex of the
    /// containing triangle are ignored and the existing index is returned.
    pub fn insert(&mut self, p: Vector2<T>) -> usize {
        let t0 = self.locate(&p);
        let dup_tol = self.scale * s::<T>(1e-12);
        for &v in &self.tris[t0].v {
            if (self.pts[v] - p).norm() < dup_tol {
                return v;
            }
        }
        let pi = self.pts.len();
        self.pts.push(p);

        // Grow the cavity of triangles whose circumcircle contains p.
        // Stamps (not hash sets) keep discovery order deterministic, which in
        // turn keeps the final triangle ordering reproducible.
        self.epoch += 1;
        let epoch = self.epoch;
        let mut cavity = vec![t0];
        self.stamp[t0] = epoch;
        let mut head = 0;
        while head < cavity.len() {
            let t = cavity[head];
            head += 1;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb == NONE || self.stamp[nb] == epoch {
                    continue;
                }
                let nb_tri = self.tris[nb].clone();
                if self.in_circumcircle(&nb_tri, &p) {
                    self.stamp[nb] = epoch;
                    cavity.push(nb);
                }
            }
        }

        // Boundary edges (a, b) with their outer neighbor, oriented so that p
        // lies to the left.
        let mut boundary: Vec<(usize, usize, usize)> = Vec::new();
        for &t in &cavity {
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb == NONE || self.stamp[nb] != epoch {
                    let a = self.tris[t].v[(i + 1) % 3];
                    let b = self.tris[t].v[(i + 2) % 3];
                    boundary.push((a, b, nb));
                }
            }
        }
        for &t in &cavity {
            self.tris[t].alive = false;
            self.free.push(t);
        }

        // Star the cavity from p.
        let mut edge_map: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, outer) in &boundary {
            let t = self.alloc(Tri {
                v: [pi, a, b],
                n: [outer, NONE, NONE],
                alive: true,
            });
            created.push(t);
            if outer != NONE {
                let o = &mut self.tris[outer];
                for i in 0..3 {
                    if (o.v[(i + 1) % 3], o.v[(i + 2) % 3]) == (b, a) {
                        o.n[i] = t;
                    }
                }
            }
            // Edge opposite v[1]=a is (b, p); opposite v[2]=b is (p, a).
            edge_map.insert((b, pi), (t, 1));
            edge_map.insert((pi, a), (t, 2));
        }
        for &t in &created {
            let v = self.tris[t].v;
            for slot in 1..3 {
                let (ea, eb) = (v[(slot + 1) % 3], v[(slot + 2) % 3]);
                if let Some(&(u, _)) = edge_map.get(&(eb, ea)) {
                    self.tris[t].n[slot] = u;
                }
            }
        }
        self.last = *created.first().expect("cavity produced no triangles");
        pi
    }

    /// Finished triangulation: user points (input order) and CCW triangles,
    /// super triangles removed.
    pub fn extract(&self) -> (Vec<Vector2<T>>, Vec<[usize; 3]>) {
        let pts = self.pts[3..].to_vec();
        let mut tris = Vec::new();
        for t in &self.tris {
            if !t.alive || t.v.iter().any(|&v| v < 3) {
                continue;
            }
            tris.push([t.v[0] - 3, t.v[1] - 3, t.v[2] - 3]);
        }
        (pts, tris)
    }
}

/// Delaunay-triangulates `points` in the given order; `extent` must bound
/// their coordinates.
pub fn triangulate<T: Scalar>(points: &[Vector2<T>], extent: T) -> (Vec<Vector2<T>>, Vec<[usize; 3]>) {
    let mut tr = Triangulation::new(extent);
    for p in points {
        tr.insert(*p);
    }
    tr.extract()
}
