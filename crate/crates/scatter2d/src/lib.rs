//! 2D inverse medium scattering toolkit.
//!
//! Reconstructs a piecewise-constant acoustic refraction index from noisy
//! far-field data via regularized Gauss-Newton, with a factorization-method
//! defect-localization map used to pre-select and adaptively refine the
//! parameter zoning.
//!
//! The core is generic over the real scalar type (see [`scalar::Scalar`]);
//! the aliases below fix the default `f64` instantiation.

pub mod band;
pub mod config;
pub mod delaunay;
pub mod error;
pub mod fields;
pub mod gauss_newton;
pub mod helmholtz;
pub mod io;
pub mod localization;
pub mod mesh;
pub mod scalar;
pub mod scattering;
pub mod strategies;
pub mod synth;
pub mod zoning;

pub use error::{Error, Result};
pub use fields::{DirectionGrid, IndexField, NodalField};
pub use gauss_newton::{gauss_newton, relative_error, GNConfig, GNTrace};
pub use helmholtz::{gamma_2d, incident_wave, HelmholtzSolver};
pub use localization::{localize, LocalizationMap, SpectralSystem, SpectralVariant};
pub use mesh::{build_disc_mesh, probe_points, RegionTag};
pub use scattering::{FarFieldData, FieldSet, ForwardOperator};
pub use strategies::{
    adaptive_refinement, combined, select_zones, selective_reconstruction, StrategyConfig,
};
pub use synth::{add_noise, make_truth, Scenario};
pub use zoning::{partition_zones, split_zone, Zoning};

/// Default real scalar.
pub type Real = f64;
/// Default complex scalar.
pub type Cplx = num_complex::Complex<f64>;
/// Default mesh instantiation.
pub type Mesh = mesh::TriangleMesh<Real>;
/// Default probe set instantiation.
pub type Probes = mesh::ProbePoints<Real>;
