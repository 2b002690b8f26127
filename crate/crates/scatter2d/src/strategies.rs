//! Composite reconstruction strategies built on localization and
//! Gauss-Newton: selective reconstruction (restrict the unknowns to the
//! zones highlighted by the indicator), adaptive refinement (split the most
//! suspicious zone into four and re-reconstruct until a budget or size floor
//! is hit), and their combination (selection first, refinement inside the
//! selected region with the background frozen).

use crate::error::{Error, Result};
use crate::fields::IndexField;
use crate::gauss_newton::{gauss_newton_warm, GNConfig, GNTrace};
use crate::localization::{localize, LocalizationMap};
use crate::mesh::TriangleMesh;
use crate::scalar::{s, Scalar, C};
use crate::scattering::{FarFieldData, ForwardOperator};
use crate::zoning::{components, d_adjacency, split_zone, Zoning};

#[derive(Debug, Clone)]
pub struct StrategyConfig<T: Scalar> {
    /// Selection threshold 𝒯 ∈ (0, 1].
    pub threshold: T,
    /// Zone budget for refinement.
    pub n_max: usize,
    /// Zones with at most this many elements are never split.
    pub min_split_size: usize,
    /// Floor on sub-zone size produced by a split.
    pub min_zone_size: usize,
    /// Relative Picard cutoff for the localization step.
    pub truncation: T,
    pub gn: GNConfig<T>,
}

impl<T: Scalar> Default for StrategyConfig<T> {
    fn default() -> Self {
        Self {
            threshold: s(0.1),
            n_max: 76,
            min_split_size: 16,
            min_zone_size: 4,
            truncation: s(1e-4),
            gn: GNConfig::default(),
        }
    }
}

impl<T: Scalar> StrategyConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.threshold <= T::zero() || self.threshold > T::one() {
            return Err(Error::invalid("threshold must lie in (0, 1]"));
        }
        if self.n_max < 4 {
            return Err(Error::invalid("refinement budget must be at least 4"));
        }
        if self.truncation <= T::zero() || self.truncation >= T::one() {
            return Err(Error::invalid("truncation must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-zone score 𝒮_i: maximum of the normalized indicator over the zone.
fn zone_scores<T: Scalar>(map: &LocalizationMap<T>, zoning: &Zoning) -> Result<Vec<T>> {
    if map.normalized.len() != zoning.num_elements() {
        return Err(Error::Mismatch(format!(
            "indicator sampled at {} probes, zoning has {} elements",
            map.normalized.len(),
            zoning.num_elements()
        )));
    }
    Ok(zoning
        .zones
        .iter()
        .map(|zone| {
            zone.iter()
                .map(|&e| map.normalized[e])
                .fold(T::zero(), |a, b| a.max(b))
        })
        .collect())
}

/// Zones whose score reaches the threshold: { i : 𝒮_i ≥ 𝒯 · max_i 𝒮_i }.
/// The comparison is inclusive so 𝒯 = 1 still returns the argmax zone(s).
pub fn select_zones<T: Scalar>(
    map: &LocalizationMap<T>,
    zoning: &Zoning,
    threshold: T,
) -> Result<Vec<usize>> {
    if threshold <= T::zero() || threshold > T::one() {
        return Err(Error::invalid("threshold must lie in (0, 1]"));
    }
    let scores = zone_scores(map, zoning)?;
    let max = scores.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if max <= T::zero() {
        return Err(Error::EmptySelection);
    }
    let selected: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] >= threshold * max)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(selected)
}

/// Localizes the defect against n₀, then runs Gauss-Newton with only the
/// selected zones free; everything else keeps its n₀ value exactly.
/// Returns the reconstruction, the trace, and the selected zone indices.
pub fn selective_reconstruction<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    n0: &IndexField<T>,
    measured: &FarFieldData<T>,
    cfg: &StrategyConfig<T>,
    truth: Option<&IndexField<T>>,
) -> Result<(IndexField<T>, GNTrace<T>, Vec<usize>)> {
    cfg.validate()?;
    let map = localize(op, n0, measured, cfg.truncation)?;
    let selected = select_zones(&map, &n0.zoning, cfg.threshold)?;
    let mut free = vec![false; n0.zoning.num_zones()];
    for &z in &selected {
        free[z] = true;
    }
    let (result, trace) = gauss_newton_warm(op, n0, None, measured, &cfg.gn, truth, &free)?;
    Ok((result, trace, selected))
}

/// Area-weighted projection of a per-element field onto a zoning.
pub fn project_to_zoning<T: Scalar>(
    mesh: &TriangleMesh<T>,
    elem_field: &IndexField<T>,
    zoning: &Zoning,
) -> Result<IndexField<T>> {
    if elem_field.zoning.num_zones() != mesh.num_d_elements()
        || zoning.num_elements() != mesh.num_d_elements()
    {
        return Err(Error::Mismatch(
            "projection needs a per-element field over the mesh's D-elements".into(),
        ));
    }
    let values = zoning
        .zones
        .iter()
        .map(|zone| {
            let mut acc = C::new(T::zero(), T::zero());
            let mut area = T::zero();
            for &e in zone {
                let a = mesh.triangle_area(mesh.d_elements[e]);
                acc += elem_field.values[e] * C::new(a, T::zero());
                area += a;
            }
            acc / C::new(area, T::zero())
        })
        .collect();
    IndexField::new(zoning.clone(), values, elem_field.real_constraint)
}

fn append_trace<T: Scalar>(total: &mut GNTrace<T>, run: GNTrace<T>) {
    let offset = total.records.len();
    for mut r in run.records {
        r.iter += offset;
        total.records.push(r);
    }
    total.converged = run.converged;
}

/// Core refinement loop shared by the adaptive and combined strategies.
/// `free` marks the refinable zones; frozen zones are never split and keep
/// their anchor value.
fn refinement_loop<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    anchor_elem: &IndexField<T>,
    mut zoning: Zoning,
    mut free: Vec<bool>,
    measured: &FarFieldData<T>,
    cfg: &StrategyConfig<T>,
    truth: Option<&IndexField<T>>,
) -> Result<(IndexField<T>, GNTrace<T>, Vec<Zoning>)> {
    cfg.validate()?;
    let mut history = vec![zoning.clone()];
    let mut anchor = project_to_zoning(op.mesh, anchor_elem, &zoning)?;
    let mut trace = GNTrace::default();
    let (mut current, first) =
        gauss_newton_warm(op, &anchor, None, measured, &cfg.gn, truth, &free)?;
    append_trace(&mut trace, first);

    // Zones whose geometry does not admit four connected sub-zones of four
    // elements each; they count as unsplittable from then on. Safe to keep
    // across iterations: a zone's element set only changes by being split.
    let mut unsplittable: std::collections::HashSet<usize> = std::collections::HashSet::new();
    loop {
        let n = zoning.num_zones();
        // Budget check happens before a split is attempted, so a run never
        // exceeds n_max zones.
        if n + 3 > cfg.n_max {
            break;
        }
        let splittable: Vec<usize> = (0..n)
            .filter(|&i| {
                free[i] && zoning.zones[i].len() > cfg.min_split_size && !unsplittable.contains(&i)
            })
            .collect();
        if splittable.is_empty() {
            break;
        }
        let map = localize(op, &current, measured, cfg.truncation)?;
        let scores = zone_scores(&map, &zoning)?;
        // Most suspicious splittable zone first; lowest index wins ties.
        let mut by_score = splittable.clone();
        by_score.sort_by(|&a, &b| {
            scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mut split = None;
        let mut target = usize::MAX;
        for &candidate in &by_score {
            match split_zone(op.mesh, &zoning, candidate) {
                Ok(z) => {
                    split = Some(z);
                    target = candidate;
                    break;
                }
                Err(Error::InvalidInput(_)) => {
                    unsplittable.insert(candidate);
                }
                Err(e) => return Err(e),
            }
        }
        let Some(next_zoning) = split else {
            break;
        };
        zoning = next_zoning;
        history.push(zoning.clone());
        // The split keeps the parent at `target` and appends three children
        // at the end: replicate values and freedom accordingly.
        for _ in 0..3 {
            free.push(free[target]);
            anchor.values.push(anchor.values[target]);
            current.values.push(current.values[target]);
        }
        anchor.zoning = zoning.clone();
        current.zoning = zoning.clone();
        let (next, run) = gauss_newton_warm(
            op,
            &anchor,
            Some(&current),
            measured,
            &cfg.gn,
            truth,
            &free,
        )?;
        current = next;
        append_trace(&mut trace, run);
    }
    Ok((current, trace, history))
}

/// Adaptive refinement from a given starting zoning (default: a single zone
/// covering D); every zone is refinable.
pub fn adaptive_refinement<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    anchor_elem: &IndexField<T>,
    initial_zoning: Zoning,
    measured: &FarFieldData<T>,
    cfg: &StrategyConfig<T>,
    truth: Option<&IndexField<T>>,
) -> Result<(IndexField<T>, GNTrace<T>, Vec<Zoning>)> {
    let free = vec![true; initial_zoning.num_zones()];
    refinement_loop(op, anchor_elem, initial_zoning, free, measured, cfg, truth)
}

/// Selection followed by refinement: localize against n₀ at element
/// granularity, gather the elements above the threshold into a single root
/// zone, freeze the complement (split into its connected components), and
/// refine inside the selection only.
pub fn combined<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    anchor_elem: &IndexField<T>,
    measured: &FarFieldData<T>,
    cfg: &StrategyConfig<T>,
    truth: Option<&IndexField<T>>,
) -> Result<(IndexField<T>, GNTrace<T>, Vec<Zoning>)> {
    cfg.validate()?;
    let nd = op.mesh.num_d_elements();
    if anchor_elem.zoning.num_zones() != nd {
        return Err(Error::Mismatch(
            "combined strategy expects a per-element initial guess".into(),
        ));
    }
    let map = localize(op, anchor_elem, measured, cfg.truncation)?;
    let per_element = Zoning::per_element(nd);
    let selected = select_zones(&map, &per_element, cfg.threshold)?;
    let in_sel = {
        let mut mask = vec![false; nd];
        for &e in &selected {
            mask[e] = true;
        }
        mask
    };
    let complement: Vec<usize> = (0..nd).filter(|&e| !in_sel[e]).collect();
    // Root zone 0 is the selection (possibly disconnected); the frozen
    // complement is stored by connected components.
    let mut zones = vec![selected.clone()];
    let adjacency = d_adjacency(op.mesh);
    zones.extend(components(&complement, &adjacency));
    let n_zones = zones.len();
    let mut zone_of = vec![usize::MAX; nd];
    for (z, zone) in zones.iter().enumerate() {
        for &e in zone {
            zone_of[e] = z;
        }
    }
    let zoning = Zoning::from_zone_of(zone_of, n_zones)?;
    let mut free = vec![false; n_zones];
    free[0] = true;
    refinement_loop(op, anchor_elem, zoning, free, measured, cfg, truth)
}
