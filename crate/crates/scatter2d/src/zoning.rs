//! Zone partition of the inhomogeneity elements.
//!
//! A zone is a set of edge-connected D-elements carrying one complex index
//! parameter. Zones are produced by a balanced k-means over element
//! centroids with a connectivity repair pass, and refined by splitting one
//! zone into four sub-zones.
//!
//! Elements are addressed by their *local* D-element index, i.e. the
//! position in `TriangleMesh::d_elements`.

use std::collections::HashMap;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::scalar::{fp, s, Scalar};

/// Partition of the D-elements into `N` zones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zoning {
    /// Element-index sets, each sorted ascending.
    pub zones: Vec<Vec<usize>>,
    /// Inverse map: local D-element index -> zone index.
    pub zone_of: Vec<usize>,
}

impl Zoning {
    pub fn num_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn num_elements(&self) -> usize {
        self.zone_of.len()
    }

    /// Single zone covering all of D.
    pub fn single(n_elements: usize) -> Self {
        Self {
            zones: vec![(0..n_elements).collect()],
            zone_of: vec![0; n_elements],
        }
    }

    /// One zone per element.
    pub fn per_element(n_elements: usize) -> Self {
        Self {
            zones: (0..n_elements).map(|e| vec![e]).collect(),
            zone_of: (0..n_elements).collect(),
        }
    }

    pub fn from_zone_of(zone_of: Vec<usize>, n_zones: usize) -> Result<Self> {
        let mut zones = vec![Vec::new(); n_zones];
        for (e, &z) in zone_of.iter().enumerate() {
            if z >= n_zones {
                return Err(Error::invalid(format!("zone index {z} out of range")));
            }
            zones[z].push(e);
        }
        let zoning = Self { zones, zone_of };
        zoning.check_partition()?;
        Ok(zoning)
    }

    /// Disjointness, coverage and non-emptiness (connectivity is checked
    /// separately where it is guaranteed).
    pub fn check_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.zone_of.len()];
        for (z, zone) in self.zones.iter().enumerate() {
            if zone.is_empty() {
                return Err(Error::invalid(format!("zone {z} is empty")));
            }
            for &e in zone {
                if e >= seen.len() || seen[e] {
                    return Err(Error::invalid(format!("element {e} out of range or duplicated")));
                }
                if self.zone_of[e] != z {
                    return Err(Error::invalid(format!("inverse map mismatch at element {e}")));
                }
                seen[e] = true;
            }
        }
        if !seen.iter().all(|&b| b) {
            return Err(Error::invalid("zones do not cover all D-elements"));
        }
        Ok(())
    }

    /// Total area per zone.
    pub fn areas<T: Scalar>(&self, mesh: &TriangleMesh<T>) -> Vec<T> {
        self.zones
            .iter()
            .map(|zone| {
                zone.iter()
                    .map(|&e| mesh.triangle_area(mesh.d_elements[e]))
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }
}

/// Edge-adjacency between D-elements (local indices).
pub fn d_adjacency<T: Scalar>(mesh: &TriangleMesh<T>) -> Vec<Vec<usize>> {
    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (local, &t) in mesh.d_elements.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(local);
        }
    }
    let mut adj = vec![Vec::new(); mesh.d_elements.len()];
    for elems in by_edge.values() {
        if elems.len() == 2 {
            adj[elems[0]].push(elems[1]);
            adj[elems[1]].push(elems[0]);
        }
    }
    for v in adj.iter_mut() {
        v.sort_unstable();
    }
    adj
}

fn is_connected(elems: &[usize], adjacency: &[Vec<usize>], skip: Option<usize>) -> bool {
    let member: std::collections::HashSet<usize> = elems.iter().copied().collect();
    let start = match elems.iter().find(|&&e| Some(e) != skip) {
        Some(&e) => e,
        None => return true,
    };
    let target = elems.len() - usize::from(skip.map_or(false, |x| member.contains(&x)));
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![start];
    seen.insert(start);
    while let Some(e) = stack.pop() {
        for &nb in &adjacency[e] {
            if Some(nb) == skip || !member.contains(&nb) || seen.contains(&nb) {
                continue;
            }
            seen.insert(nb);
            stack.push(nb);
        }
    }
    seen.len() == target
}

/// Connected components of a set of elements, each sorted; components sorted
/// by size descending, ties by smallest element.
pub(crate) fn components(elems: &[usize], adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let member: std::collections::HashSet<usize> = elems.iter().copied().collect();
    let mut seen: std::collections::HashSet<usize> = std::collections::HashSet::new();
    let mut comps = Vec::new();
    for &e0 in elems {
        if seen.contains(&e0) {
            continue;
        }
        let mut comp = vec![e0];
        seen.insert(e0);
        let mut stack = vec![e0];
        while let Some(e) = stack.pop() {
            for &nb in &adjacency[e] {
                if member.contains(&nb) && !seen.contains(&nb) {
                    seen.insert(nb);
                    comp.push(nb);
                    stack.push(nb);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort_by_key(|c| (usize::MAX - c.len(), c[0]));
    comps
}

fn kmeans<T: Scalar>(
    centroids: &[Vector2<T>],
    elems: &[usize],
    k: usize,
    mut init: Vec<Vector2<T>>,
) -> Vec<usize> {
    let mut assign = vec![0usize; elems.len()];
    for _ in 0..60 {
        let mut changed = false;
        for (i, &e) in elems.iter().enumerate() {
            let mut best = 0;
            let mut best_d = T::max_value().unwrap();
            for (c, ctr) in init.iter().enumerate() {
                let d = (centroids[e] - ctr).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        // Re-seed empty clusters with the element farthest from its center.
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far_i, _) = elems
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| (i, (centroids[e] - init[assign[i]]).norm_squared()))
                    .fold((0, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
                assign[far_i] = c;
                counts[c] = 1;
                changed = true;
            }
        }
        let mut sums = vec![Vector2::new(T::zero(), T::zero()); k];
        let mut n = vec![T::zero(); k];
        for (i, &e) in elems.iter().enumerate() {
            sums[assign[i]] += centroids[e];
            n[assign[i]] += T::one();
        }
        for c in 0..k {
            init[c] = sums[c] / n[c];
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Reassigns every element stranded outside its zone's main component to an
/// adjacent zone, preferring the nearest zone centroid.
fn repair_connectivity<T: Scalar>(
    centroids: &[Vector2<T>],
    adjacency: &[Vec<usize>],
    elems: &[usize],
    assign: &mut [usize],
    k: usize,
) {
    let pos: HashMap<usize, usize> = elems.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut kept: HashMap<usize, bool> = HashMap::new();
    for c in 0..k {
        let zone: Vec<usize> = elems
            .iter()
            .enumerate()
            .filter(|(i, _)| assign[*i] == c)
            .map(|(_, &e)| e)
            .collect();
        if zone.is_empty() {
            continue;
        }
        let comps = components(&zone, adjacency);
        for &e in &comps[0] {
            kept.insert(e, true);
        }
        for comp in &comps[1..] {
            for &e in comp {
                kept.insert(e, false);
            }
        }
    }
    let mut stranded: Vec<usize> = elems.iter().copied().filter(|e| !kept[e]).collect();
    while !stranded.is_empty() {
        let mut progress = false;
        let mut rest = Vec::new();
        for &e in &stranded {
            let mut best: Option<(T, usize)> = None;
            for &nb in &adjacency[e] {
                if let Some(&true) = kept.get(&nb) {
                    let z = assign[pos[&nb]];
                    // Center of the target zone, cheap proxy: neighbor centroid.
                    let d = (centroids[e] - centroids[nb]).norm_squared();
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, z));
                    }
                }
            }
            if let Some((_, z)) = best {
                assign[pos[&e]] = z;
                kept.insert(e, true);
                progress = true;
            } else {
                rest.push(e);
            }
        }
        if !progress {
            // Isolated island with no repaired neighbor at all; leave it as
            // its own part of the zone (callers validate where required).
            break;
        }
        stranded = rest;
    }
}

/// Moves elements between zones until `max_size <= ratio * min_size` (or the
/// move budget runs out), preserving donor connectivity.
fn rebalance(
    adjacency: &[Vec<usize>],
    elems: &[usize],
    assign: &mut [usize],
    k: usize,
    min_size: usize,
    ratio: usize,
) {
    let pos: HashMap<usize, usize> = elems.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let budget = 8 * elems.len() + 64;
    for _ in 0..budget {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let (zmin, &smin) = sizes.iter().enumerate().min_by_key(|(i, &s)| (s, *i)).unwrap();
        let smax = *sizes.iter().max().unwrap();
        if smin >= min_size && smax <= ratio.saturating_mul(smin) {
            return;
        }
        // Move one connectivity-preserving border element from the biggest
        // adjacent donor into the smallest zone.
        let mut candidate: Option<(usize, usize)> = None; // (element, donor size)
        for (i, &e) in elems.iter().enumerate() {
            if assign[i] != zmin && adjacency[e].iter().any(|nb| pos.get(nb).map(|&j| assign[j]) == Some(zmin)) {
                let donor = assign[i];
                if sizes[donor] <= smin + 1 {
                    continue;
                }
                let donor_elems: Vec<usize> = elems
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| assign[*j] == donor)
                    .map(|(_, &x)| x)
                    .collect();
                if !is_connected(&donor_elems, adjacency, Some(e)) {
                    continue;
                }
                if candidate.map_or(true, |(_, ds)| sizes[donor] > ds) {
                    candidate = Some((e, sizes[donor]));
                }
            }
        }
        match candidate {
            Some((e, _)) => assign[pos[&e]] = zmin,
            None => return,
        }
    }
}

fn assignment_to_zoning(elems: &[usize], assign: &[usize], k: usize, n_elements: usize) -> Vec<Vec<usize>> {
    let mut zones = vec![Vec::new(); k];
    for (i, &e) in elems.iter().enumerate() {
        debug_assert!(e < n_elements);
        zones[assign[i]].push(e);
    }
    for z in zones.iter_mut() {
        z.sort_unstable();
    }
    zones
}

/// Partitions the D-elements into `n` balanced, edge-connected zones.
pub fn partition_zones<T: Scalar>(mesh: &TriangleMesh<T>, n: usize, seed: u64) -> Result<Zoning> {
    let nd = mesh.num_d_elements();
    if n < 1 || n > nd {
        return Err(Error::invalid(format!("zone count {n} out of range 1..={nd}")));
    }
    if n == nd {
        return Ok(Zoning::per_element(nd));
    }
    if n == 1 {
        return Ok(Zoning::single(nd));
    }
    let centroids: Vec<Vector2<T>> = mesh.d_elements.iter().map(|&t| mesh.centroid(t)).collect();
    let elems: Vec<usize> = (0..nd).collect();
    let adjacency = d_adjacency(mesh);

    // k-means++ style seeding.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![centroids[rng.gen_range(0..nd)]];
    while centers.len() < n {
        let weights: Vec<f64> = centroids
            .iter()
            .map(|c| {
                fp(centers
                    .iter()
                    .map(|ctr| (c - ctr).norm_squared())
                    .fold(T::max_value().unwrap(), |a, b| a.min(b)))
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = nd - 1;
        for (i, w) in weights.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                pick = i;
                break;
            }
        }
        centers.push(centroids[pick]);
    }

    let mut assign = kmeans(&centroids, &elems, n, centers);
    repair_connectivity(&centroids, &adjacency, &elems, &mut assign, n);
    rebalance(&adjacency, &elems, &mut assign, n, 1, 3);

    let zones = assignment_to_zoning(&elems, &assign, n, nd);
    let mut zone_of = vec![0usize; nd];
    for (z, zone) in zones.iter().enumerate() {
        for &e in zone {
            zone_of[e] = z;
        }
    }
    let zoning = Zoning { zones, zone_of };
    zoning.check_partition()?;
    for zone in &zoning.zones {
        if !is_connected(zone, &adjacency, None) {
            return Err(Error::invalid("partition produced a disconnected zone"));
        }
    }
    Ok(zoning)
}

/// Splits zone `zone_index` into four connected sub-zones of at least four
/// elements each. The first sub-zone keeps the original index, the other
/// three are appended at the end (matching the parameter-duplication rule).
pub fn split_zone<T: Scalar>(
    mesh: &TriangleMesh<T>,
    zoning: &Zoning,
    zone_index: usize,
) -> Result<Zoning> {
    let nd = zoning.num_elements();
    let zone = zoning
        .zones
        .get(zone_index)
        .ok_or_else(|| Error::invalid(format!("zone index {zone_index} out of range")))?;
    if zone.len() <= 16 {
        return Err(Error::invalid(format!(
            "zone {zone_index} has {} elements; splitting requires more than 16",
            zone.len()
        )));
    }
    let centroids: Vec<Vector2<T>> = mesh.d_elements.iter().map(|&t| mesh.centroid(t)).collect();
    let adjacency = d_adjacency(mesh);

    // Deterministic farthest-point seeding inside the zone.
    let mean = zone
        .iter()
        .map(|&e| centroids[e])
        .fold(Vector2::new(T::zero(), T::zero()), |a, b| a + b)
        / s::<T>(zone.len() as f64);
    let first = *zone
        .iter()
        .max_by(|&&a, &&b| {
            (centroids[a] - mean)
                .norm_squared()
                .partial_cmp(&(centroids[b] - mean).norm_squared())
                .unwrap()
                .then(b.cmp(&a))
        })
        .unwrap();
    let mut seeds = vec![first];
    while seeds.len() < 4 {
        let next = *zone
            .iter()
            .max_by(|&&a, &&b| {
                let da = seeds.iter().map(|&sd| (centroids[a] - centroids[sd]).norm_squared()).fold(T::max_value().unwrap(), |x, y| x.min(y));
                let db = seeds.iter().map(|&sd| (centroids[b] - centroids[sd]).norm_squared()).fold(T::max_value().unwrap(), |x, y| x.min(y));
                da.partial_cmp(&db).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        seeds.push(next);
    }
    let init: Vec<Vector2<T>> = seeds.iter().map(|&e| centroids[e]).collect();

    let mut assign = kmeans(&centroids, zone, 4, init);
    repair_connectivity(&centroids, &adjacency, zone, &mut assign, 4);
    rebalance(&adjacency, zone, &mut assign, 4, 4, usize::MAX);

    let parts = assignment_to_zoning(zone, &assign, 4, nd);
    if parts.iter().any(|p| p.len() < 4) {
        return Err(Error::invalid("split could not keep four elements in every sub-zone"));
    }

    let mut zones = zoning.zones.clone();
    zones[zone_index] = parts[0].clone();
    zones.push(parts[1].clone());
    zones.push(parts[2].clone());
    zones.push(parts[3].clone());
    let mut zone_of = zoning.zone_of.clone();
    for (offset, part) in parts.iter().enumerate() {
        let z = if offset == 0 { zone_index } else { zoning.zones.len() + offset - 1 };
        for &e in part {
            zone_of[e] = z;
        }
    }
    let out = Zoning { zones, zone_of };
    out.check_partition()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disc_mesh;

    fn small_mesh() -> TriangleMesh<f64> {
        let lambda = 2.0 * std::f64::consts::PI / 5.0;
        build_disc_mesh(1.0, 5.0, 12, lambda, 0.5 * lambda, 3).unwrap()
    }

    #[test]
    fn partition_edges() {
        let mesh = small_mesh();
        let nd = mesh.num_d_elements();
        assert!(partition_zones(&mesh, 0, 0).is_err());
        assert!(partition_zones(&mesh, nd + 1, 0).is_err());
        let one = partition_zones(&mesh, 1, 0).unwrap();
        assert_eq!(one.num_zones(), 1);
        assert_eq!(one.zones[0].len(), nd);
        let all = partition_zones(&mesh, nd, 0).unwrap();
        assert!(all.zones.iter().all(|z| z.len() == 1));
    }

    #[test]
    fn partition_is_balanced_connected_deterministic() {
        let mesh = small_mesh();
        let z = partition_zones(&mesh, 10, 42).unwrap();
        assert_eq!(z.num_zones(), 10);
        z.check_partition().unwrap();
        let adjacency = d_adjacency(&mesh);
        for zone in &z.zones {
            assert!(is_connected(zone, &adjacency, None));
        }
        let sizes: Vec<usize> = z.zones.iter().map(|z| z.len()).collect();
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(max <= &(3 * min), "sizes {sizes:?}");

        let z2 = partition_zones(&mesh, 10, 42).unwrap();
        assert_eq!(z, z2);
    }

    #[test]
    fn split_conserves_elements_and_respects_floor() {
        let mesh = small_mesh();
        let z = partition_zones(&mesh, 6, 1).unwrap();
        let (zi, zone) = z
            .zones
            .iter()
            .enumerate()
            .find(|(_, z)| z.len() > 16)
            .expect("need a splittable zone");
        let before: Vec<usize> = zone.clone();
        let split = split_zone(&mesh, &z, zi).unwrap();
        assert_eq!(split.num_zones(), z.num_zones() + 3);
        let mut after: Vec<usize> = split.zones[zi].clone();
        for extra in &split.zones[z.num_zones()..] {
            after.extend(extra);
        }
        after.sort_unstable();
        assert_eq!(after, before);
        assert!(split.zones[zi].len() >= 4);
        for extra in &split.zones[z.num_zones()..] {
            assert!(extra.len() >= 4);
        }
        let adjacency = d_adjacency(&mesh);
        assert!(is_connected(&split.zones[zi], &adjacency, None));
        for extra in &split.zones[z.num_zones()..] {
            assert!(is_connected(extra, &adjacency, None));
        }
    }

    #[test]
    fn split_rejects_small_zones() {
        let mesh = small_mesh();
        let nd = mesh.num_d_elements();
        let z = Zoning::per_element(nd);
        assert!(split_zone(&mesh, &z, 0).is_err());
    }

    #[test]
    fn split_single_zone_preserves_partition() {
        let mesh = small_mesh();
        let z = Zoning::single(mesh.num_d_elements());
        let split = split_zone(&mesh, &z, 0).unwrap();
        assert_eq!(split.num_zones(), 4);
        split.check_partition().unwrap();
    }
}
