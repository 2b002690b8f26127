//! Synthetic "measured" data: exact far fields of a reference index n*
//! computed on an independent mesh, plus calibrated noise.
//!
//! The perturbed data 𝔲^ε satisfies ‖𝔲^ε − u^∞‖ = ε ‖u^∞‖ exactly: an
//! isotropic complex Gaussian draw is rescaled to the prescribed relative
//! level in the weighted direction-grid norm, so ε is sharp rather than an
//! upper bound.

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fields::{DirectionGrid, IndexField};
use crate::mesh::TriangleMesh;
use crate::scalar::{c, s, Scalar, C};
use crate::scattering::{FarFieldData, ForwardOperator};
use crate::zoning::Zoning;

/// A disc-shaped region carrying a constant index value; later features
/// override earlier ones where they overlap.
#[derive(Debug, Clone)]
pub struct DiscFeature<T: Scalar> {
    pub center: Vector2<T>,
    pub radius: T,
    pub value: C<T>,
}

/// A reference medium n*: a constant background on D decorated with disc
/// features, plus the matching initial guess for the reconstruction.
#[derive(Debug, Clone)]
pub struct Scenario<T: Scalar> {
    pub name: String,
    pub background: C<T>,
    pub features: Vec<DiscFeature<T>>,
    /// Feature treated as the unknown defect: the initial guess omits it.
    pub defect: Option<usize>,
    /// Whether the scenario is real-valued (sets the reconstruction flag).
    pub real_valued: bool,
}

impl<T: Scalar> Scenario<T> {
    /// The built-in scenario catalogue.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            // Background 1.3 on D, defect 1.6 in the disc of radius 0.3 at
            // (0.3, 0.3).
            "disc-in-disc" => Ok(Self {
                name: name.to_string(),
                background: c(1.3, 0.0),
                features: vec![DiscFeature {
                    center: Vector2::new(s(0.3), s(0.3)),
                    radius: s(0.3),
                    value: c(1.6, 0.0),
                }],
                defect: Some(0),
                real_valued: true,
            }),
            // Constant 1.3 on D: far fields admit a separation-of-variables
            // reference solution.
            "homogeneous" => Ok(Self {
                name: name.to_string(),
                background: c(1.3, 0.0),
                features: vec![],
                defect: None,
                real_valued: true,
            }),
            // Absorbing multizone medium: complex background, one known
            // off-center inclusion, and a central absorbing perturbation
            // that plays the unknown defect (the initial guess is the medium
            // without it).
            "complex-multizone" => Ok(Self {
                name: name.to_string(),
                background: c(1.4, 0.2),
                features: vec![
                    DiscFeature {
                        center: Vector2::new(s(0.45), s(-0.35)),
                        radius: s(0.2),
                        value: c(1.2, 0.1),
                    },
                    DiscFeature {
                        center: Vector2::new(s(0.0), s(0.0)),
                        radius: s(0.3),
                        value: c(1.55, 0.3),
                    },
                ],
                defect: Some(1),
                real_valued: false,
            }),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    /// n* at a point of D.
    pub fn index_at(&self, p: &Vector2<T>) -> C<T> {
        let mut v = self.background;
        for f in &self.features {
            if (p - f.center).norm() <= f.radius {
                v = f.value;
            }
        }
        v
    }

    /// Initial guess at a point: the medium with the defect feature removed.
    pub fn initial_guess_at(&self, p: &Vector2<T>) -> C<T> {
        let mut v = self.background;
        for (i, f) in self.features.iter().enumerate() {
            if Some(i) == self.defect {
                continue;
            }
            if (p - f.center).norm() <= f.radius {
                v = f.value;
            }
        }
        v
    }

    /// Element-wise sample of n* on a mesh (value at each D-element
    /// centroid), as a per-element index field.
    pub fn sample_truth(&self, mesh: &TriangleMesh<T>) -> IndexField<T> {
        let nd = mesh.num_d_elements();
        let values = mesh
            .d_elements
            .iter()
            .map(|&t| self.index_at(&mesh.centroid(t)))
            .collect();
        IndexField {
            zoning: Zoning::per_element(nd),
            values,
            real_constraint: self.real_valued,
        }
    }

    /// The initial guess sampled on a zoning of the reconstruction mesh:
    /// each zone takes the guess value at the centroid of its first element.
    pub fn sample_initial_guess(
        &self,
        mesh: &TriangleMesh<T>,
        zoning: &Zoning,
    ) -> Result<IndexField<T>> {
        if zoning.num_elements() != mesh.num_d_elements() {
            return Err(Error::Mismatch(format!(
                "zoning covers {} elements, mesh has {} D-elements",
                zoning.num_elements(),
                mesh.num_d_elements()
            )));
        }
        let values = zoning
            .zones
            .iter()
            .map(|zone| {
                let t = mesh.d_elements[zone[0]];
                self.initial_guess_at(&mesh.centroid(t))
            })
            .collect();
        IndexField::new(zoning.clone(), values, self.real_valued)
    }
}

/// Exact far fields of n* on the (independent) data mesh.
pub fn make_truth<T: Scalar>(
    scenario: &Scenario<T>,
    data_mesh: &TriangleMesh<T>,
    k: T,
    incident: DirectionGrid<T>,
    measurement: DirectionGrid<T>,
) -> Result<FarFieldData<T>> {
    let truth = scenario.sample_truth(data_mesh);
    let op = ForwardOperator::new(data_mesh, k, incident, measurement)?;
    let (data, _) = op.evaluate(&truth)?;
    Ok(data)
}

/// Adds complex Gaussian noise rescaled so the relative perturbation equals
/// `epsilon` exactly in the weighted grid norm. Deterministic per seed.
pub fn add_noise<T: Scalar>(u: &FarFieldData<T>, epsilon: T, seed: u64) -> Result<FarFieldData<T>> {
    if epsilon < T::zero() {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    if epsilon == T::zero() {
        return Ok(u.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> T {
        let x: f64 = StandardNormal.sample(&mut rng);
        s(x)
    };
    let (mm, me) = u.values.shape();
    let mut noise = Vec::with_capacity(mm * me);
    // Row-major draw order keeps the perturbation independent of storage.
    for _ in 0..mm * me {
        let re = draw();
        let im = draw();
        noise.push(C::new(re, im));
    }
    let w = u.incident.weight * u.measurement.weight;
    let noise_norm = (noise.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b) * w).sqrt();
    if noise_norm == T::zero() {
        return Err(Error::invalid("degenerate noise draw"));
    }
    let scale = epsilon * u.norm() / noise_norm;
    let mut out = u.clone();
    let mut it = noise.into_iter();
    for im_i in 0..mm {
        for ie in 0..me {
            out.values[(im_i, ie)] += it.next().unwrap() * scale;
        }
    }
    Ok(out)
}
