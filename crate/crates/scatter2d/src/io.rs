//! Text serialization of meshes, zonings and far-field data.
//!
//! All floats are written with Rust's shortest-roundtrip formatting, so a
//! write → read → write cycle is byte-identical and outputs are diff-able
//! across runs.

use std::path::Path;

use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::fields::DirectionGrid;
use crate::mesh::{RegionTag, TriangleMesh};
use crate::scalar::{fp, s, Scalar, C};
use crate::scattering::FarFieldData;
use crate::zoning::Zoning;

fn parse_err(what: &str, line: usize) -> Error {
    Error::Parse(format!("{what} (line {})", line + 1))
}

fn f<T: Scalar>(x: T) -> String {
    format!("{}", fp(x))
}

/// MESH2D v1: header, counts, vertex lines "x y", triangle lines
/// "v0 v1 v2 tag".
pub fn mesh_to_string<T: Scalar>(mesh: &TriangleMesh<T>) -> String {
    let mut out = String::from("MESH2D v1\n");
    out.push_str(&format!("{} {}\n", mesh.vertices.len(), mesh.triangles.len()));
    for v in &mesh.vertices {
        out.push_str(&format!("{} {}\n", f(v.x), f(v.y)));
    }
    for (t, tag) in mesh.triangles.iter().zip(&mesh.tags) {
        out.push_str(&format!("{} {} {} {}\n", t[0], t[1], t[2], tag.to_code()));
    }
    out
}

/// Parses MESH2D v1. Geometry metadata that the format does not carry
/// (half-width, PML thickness, disc radius) is reconstructed from the
/// coordinates and tags; it is exact for the box extent and approximate at
/// the element scale for the layer boundaries.
pub fn mesh_from_string<T: Scalar>(text: &str) -> Result<TriangleMesh<T>> {
    let mut lines = text.lines().enumerate();
    let (i, header) = lines.next().ok_or_else(|| parse_err("empty mesh file", 0))?;
    if header.trim() != "MESH2D v1" {
        return Err(parse_err("expected 'MESH2D v1' header", i));
    }
    let (i, counts) = lines
        .next()
        .ok_or_else(|| parse_err("missing count line", 1))?;
    let mut it = counts.split_whitespace();
    let nv: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad vertex count", i))?;
    let nt: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad triangle count", i))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err("unexpected end of vertex list", 0))?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| parse_err("bad vertex x", i))?;
        let y: f64 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| parse_err("bad vertex y", i))?;
        vertices.push(Vector2::new(s::<T>(x), s::<T>(y)));
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut tags = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err("unexpected end of triangle list", 0))?;
        let mut it = line.split_whitespace();
        let mut tri = [0usize; 3];
        for v in &mut tri {
            *v = it
                .next()
                .and_then(|x| x.parse().ok())
                .filter(|&x: &usize| x < nv)
                .ok_or_else(|| parse_err("bad vertex index", i))?;
        }
        let tag: u8 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| parse_err("bad region tag", i))?;
        triangles.push(tri);
        tags.push(RegionTag::from_code(tag).map_err(|_| parse_err("unknown region tag", i))?);
    }
    TriangleMesh::from_parts(vertices, triangles, tags)
}

pub fn write_mesh<T: Scalar>(path: &Path, mesh: &TriangleMesh<T>) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh<T: Scalar>(path: &Path) -> Result<TriangleMesh<T>> {
    mesh_from_string(&std::fs::read_to_string(path)?)
}

/// ZONES v1: header, "<n_D_elements> <N>", then "element_index zone_index"
/// per D-element.
pub fn zoning_to_string(zoning: &Zoning) -> String {
    let mut out = String::from("ZONES v1\n");
    out.push_str(&format!(
        "{} {}\n",
        zoning.num_elements(),
        zoning.num_zones()
    ));
    for (e, &z) in zoning.zone_of.iter().enumerate() {
        out.push_str(&format!("{e} {z}\n"));
    }
    out
}

pub fn zoning_from_string(text: &str) -> Result<Zoning> {
    let mut lines = text.lines().enumerate();
    let (i, header) = lines
        .next()
        .ok_or_else(|| parse_err("empty zoning file", 0))?;
    if header.trim() != "ZONES v1" {
        return Err(parse_err("expected 'ZONES v1' header", i));
    }
    let (i, counts) = lines
        .next()
        .ok_or_else(|| parse_err("missing count line", 1))?;
    let mut it = counts.split_whitespace();
    let ne: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad element count", i))?;
    let nz: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad zone count", i))?;
    let mut zone_of = vec![usize::MAX; ne];
    for _ in 0..ne {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err("unexpected end of zoning list", 0))?;
        let mut it = line.split_whitespace();
        let e: usize = it
            .next()
            .and_then(|x| x.parse().ok())
            .filter(|&x: &usize| x < ne)
            .ok_or_else(|| parse_err("bad element index", i))?;
        let z: usize = it
            .next()
            .and_then(|x| x.parse().ok())
            .filter(|&x: &usize| x < nz)
            .ok_or_else(|| parse_err("bad zone index", i))?;
        zone_of[e] = z;
    }
    Zoning::from_zone_of(zone_of, nz)
}

pub fn write_zoning(path: &Path, zoning: &Zoning) -> Result<()> {
    std::fs::write(path, zoning_to_string(zoning))?;
    Ok(())
}

pub fn read_zoning(path: &Path) -> Result<Zoning> {
    zoning_from_string(&std::fs::read_to_string(path)?)
}

/// FARFIELD v1: header, "<k> <M_e> <M_m>", Γ_e angles, Γ_m angles, then M_m
/// rows of M_e "re im" pairs (row = measurement direction).
pub fn farfield_to_string<T: Scalar>(data: &FarFieldData<T>) -> String {
    let (mm, me) = data.values.shape();
    let mut out = String::from("FARFIELD v1\n");
    out.push_str(&format!("{} {me} {mm}\n", f(data.wave_number)));
    for &a in &data.incident.angles {
        out.push_str(&format!("{}\n", f(a)));
    }
    for &a in &data.measurement.angles {
        out.push_str(&format!("{}\n", f(a)));
    }
    for im in 0..mm {
        let row: Vec<String> = (0..me)
            .map(|ie| {
                let v = data.values[(im, ie)];
                format!("{} {}", f(v.re), f(v.im))
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Rebuilds a uniform direction grid from its stored angles. The quadrature
/// weight equals the angular spacing; the aperture is centered on the
/// samples, so full circles are recognized as full apertures.
fn grid_from_angles<T: Scalar>(angles: Vec<T>, line: usize) -> Result<DirectionGrid<T>> {
    if angles.is_empty() {
        return Err(parse_err("empty direction grid", line));
    }
    let two_pi = s::<T>(2.0) * T::pi();
    let spacing = if angles.len() == 1 {
        two_pi
    } else {
        let d = angles[1] - angles[0];
        for w in angles.windows(2) {
            if ((w[1] - w[0]) - d).abs() > s::<T>(1e-9) {
                return Err(parse_err("non-uniform direction grid", line));
            }
        }
        d
    };
    let half = spacing / s::<T>(2.0);
    let start = angles[0] - half;
    let end = *angles.last().unwrap() + half;
    Ok(DirectionGrid {
        angles,
        weight: spacing,
        aperture: (start, end),
    })
}

pub fn farfield_from_string<T: Scalar>(text: &str) -> Result<FarFieldData<T>> {
    let mut lines = text.lines().enumerate();
    let (i, header) = lines
        .next()
        .ok_or_else(|| parse_err("empty far-field file", 0))?;
    if header.trim() != "FARFIELD v1" {
        return Err(parse_err("expected 'FARFIELD v1' header", i));
    }
    let (i, meta) = lines
        .next()
        .ok_or_else(|| parse_err("missing header line", 1))?;
    let mut it = meta.split_whitespace();
    let k: f64 = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad wave number", i))?;
    let me: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad incidence count", i))?;
    let mm: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err("bad measurement count", i))?;
    let mut read_angles = |count: usize| -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| parse_err("unexpected end of angle list", 0))?;
            let a: f64 = line
                .trim()
                .parse()
                .map_err(|_| parse_err("bad angle", i))?;
            out.push(s::<T>(a));
        }
        Ok(out)
    };
    let inc_angles = read_angles(me)?;
    let meas_angles = read_angles(mm)?;
    let mut values = DMatrix::from_element(mm, me, C::new(T::zero(), T::zero()));
    for im in 0..mm {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err("unexpected end of data rows", 0))?;
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err("bad data value", i))?;
        if nums.len() != 2 * me {
            return Err(parse_err("wrong number of data pairs", i));
        }
        for ie in 0..me {
            values[(im, ie)] = C::new(s::<T>(nums[2 * ie]), s::<T>(nums[2 * ie + 1]));
        }
    }
    Ok(FarFieldData {
        wave_number: s(k),
        incident: grid_from_angles(inc_angles, 2)?,
        measurement: grid_from_angles(meas_angles, 2)?,
        values,
    })
}

pub fn write_farfield<T: Scalar>(path: &Path, data: &FarFieldData<T>) -> Result<()> {
    std::fs::write(path, farfield_to_string(data))?;
    Ok(())
}

pub fn read_farfield<T: Scalar>(path: &Path) -> Result<FarFieldData<T>> {
    farfield_from_string(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disc_mesh;
    use crate::scattering::ForwardOperator;
    use crate::zoning::partition_zones;
    use num_complex::Complex64;

    fn mesh() -> TriangleMesh<f64> {
        let lambda = 2.0 * std::f64::consts::PI / 5.0;
        build_disc_mesh(1.0, 5.0, 10, lambda, 0.5 * lambda, 2).unwrap()
    }

    #[test]
    fn mesh_roundtrip_is_byte_identical() {
        let m = mesh();
        let text = mesh_to_string(&m);
        let back: TriangleMesh<f64> = mesh_from_string(&text).unwrap();
        assert_eq!(mesh_to_string(&back), text);
        assert_eq!(back.vertices.len(), m.vertices.len());
        assert_eq!(back.num_d_elements(), m.num_d_elements());
        back.validate().unwrap();
        assert!(mesh_from_string::<f64>("BOGUS\n").is_err());
    }

    #[test]
    fn zoning_roundtrip_is_byte_identical() {
        let m = mesh();
        let z = partition_zones(&m, 7, 3).unwrap();
        let text = zoning_to_string(&z);
        let back = zoning_from_string(&text).unwrap();
        assert_eq!(zoning_to_string(&back), text);
        assert_eq!(back.zone_of, z.zone_of);
        assert!(zoning_from_string("ZONES v2\n1 1\n0 0\n").is_err());
    }

    #[test]
    fn farfield_roundtrip_preserves_grids_and_values() {
        let m = mesh();
        let ge = DirectionGrid::full(5);
        let gm = DirectionGrid::partial(0.0, 1.5 * std::f64::consts::PI, 4);
        let op = ForwardOperator::new(&m, 5.0, ge, gm).unwrap();
        let index = crate::fields::IndexField::constant(
            Zoning::single(m.num_d_elements()),
            Complex64::new(1.3, 0.0),
            true,
        );
        let (data, _) = op.evaluate(&index).unwrap();
        let text = farfield_to_string(&data);
        let back: FarFieldData<f64> = farfield_from_string(&text).unwrap();
        assert_eq!(farfield_to_string(&back), text);
        assert_eq!(back.values, data.values);
        assert!((back.incident.weight - data.incident.weight).abs() < 1e-12);
        assert!((back.measurement.weight - data.measurement.weight).abs() < 1e-12);
        assert!(back.incident.is_full_aperture());
        assert!(!back.measurement.is_full_aperture());
    }
}
