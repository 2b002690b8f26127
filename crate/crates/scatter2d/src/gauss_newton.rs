//! Regularized Gauss-Newton reconstruction of the zone parameters.
//!
//! Minimizes the Tikhonov functional
//!   J̃(n) = c₁ ‖𝓕(n) − 𝔲^ε‖² + c₂ ‖n − n₀‖²
//! by the normal-equation iteration
//!   (D𝓕* D𝓕 + (c₂/2c₁) id)(n_{p+1} − n₀)
//!       = −D𝓕*(𝓕(n_p) − 𝔲^ε − D𝓕(n_p)(n_p − n₀)),
//! stopped when the relative parameter step falls below the tolerance.
//! Adjoints are taken with respect to the weighted direction-grid inner
//! product on data space and the zone-area-weighted L²(D) inner product on
//! parameter space, so refining the zoning does not silently rescale the
//! regularization. In the scaled coordinates x̃ = A^{1/2} x the normal
//! matrix is J̃^H J̃ + μ I; when the data dimension is smaller than the
//! parameter dimension the equivalent dual system (J̃ J̃^H + μ I) y = r̃ is
//! solved instead.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::IndexField;
use crate::mesh::TriangleMesh;
use crate::scalar::{fp, s, Scalar, C};
use crate::scattering::{FarFieldData, ForwardOperator};

#[derive(Debug, Clone)]
pub struct GNConfig<T: Scalar> {
    /// Fidelity normalization; `None` means the default ‖𝔲^ε‖⁻².
    pub c1: Option<T>,
    /// Regularization weight.
    pub c2: T,
    /// Relative-step stopping tolerance.
    pub stop_tol: T,
    pub max_iters: usize,
    /// Project iterates to their real parts.
    pub real_constraint: bool,
}

impl<T: Scalar> Default for GNConfig<T> {
    fn default() -> Self {
        Self {
            c1: None,
            c2: s(1e-2),
            stop_tol: s(1e-4),
            max_iters: 20,
            real_constraint: false,
        }
    }
}

impl<T: Scalar> GNConfig<T> {
    fn validate(&self) -> Result<()> {
        if let Some(c1) = self.c1 {
            if c1 <= T::zero() {
                return Err(Error::invalid("c1 must be positive"));
            }
        }
        if self.c2 <= T::zero() || self.stop_tol <= T::zero() {
            return Err(Error::invalid("c2 and stop_tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// One completed Gauss-Newton iteration.
#[derive(Debug, Clone)]
pub struct GNRecord<T: Scalar> {
    pub iter: usize,
    /// c₁ ‖𝓕(n_p) − 𝔲^ε‖².
    pub fidelity: T,
    /// ‖n_p − n_{p−1}‖ / (1 + ‖n_{p−1}‖), zone-area-weighted.
    pub step: T,
    /// Area-weighted relative error vs the sampled truth, when known.
    pub rel_error: Option<T>,
    /// Parameter snapshot after the iteration.
    pub params: Vec<C<T>>,
}

#[derive(Debug, Clone, Default)]
pub struct GNTrace<T: Scalar> {
    pub records: Vec<GNRecord<T>>,
    pub converged: bool,
}

impl<T: Scalar> GNTrace<T> {
    pub fn final_fidelity(&self) -> Option<T> {
        self.records.last().map(|r| r.fidelity)
    }

    /// CSV export, header `iter,fidelity,step,rel_error`; `rel_error` is
    /// empty when no truth was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,fidelity,step,rel_error\n");
        for r in &self.records {
            let e = r
                .rel_error
                .map(|v| format!("{}", fp(v)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iter,
                fp(r.fidelity),
                fp(r.step),
                e
            ));
        }
        out
    }
}

/// Zone-area-weighted L²(D) norm of a parameter vector.
pub fn weighted_norm<T: Scalar>(areas: &[T], v: &[C<T>]) -> T {
    areas
        .iter()
        .zip(v)
        .map(|(&a, z)| a * z.norm_sqr())
        .fold(T::zero(), |acc, x| acc + x)
        .sqrt()
}

/// Area-weighted relative L²(D) error between two index fields over the same
/// mesh (zonings may differ; comparison is element-wise).
pub fn relative_error<T: Scalar>(
    mesh: &TriangleMesh<T>,
    n: &IndexField<T>,
    truth: &IndexField<T>,
) -> Result<T> {
    let nd = mesh.num_d_elements();
    if n.zoning.num_elements() != nd || truth.zoning.num_elements() != nd {
        return Err(Error::Mismatch(
            "index fields do not cover the mesh's D-elements".into(),
        ));
    }
    let mut err2 = T::zero();
    let mut ref2 = T::zero();
    for (e, &t) in mesh.d_elements.iter().enumerate() {
        let a = mesh.triangle_area(t);
        err2 += a * (n.value_on_element(e) - truth.value_on_element(e)).norm_sqr();
        ref2 += a * truth.value_on_element(e).norm_sqr();
    }
    if ref2 == T::zero() {
        return Err(Error::invalid("truth field has zero norm"));
    }
    Ok((err2 / ref2).sqrt())
}

/// Runs Algorithm-style Gauss-Newton with every zone free.
pub fn gauss_newton<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    n0: &IndexField<T>,
    data: &FarFieldData<T>,
    cfg: &GNConfig<T>,
    truth: Option<&IndexField<T>>,
) -> Result<(IndexField<T>, GNTrace<T>)> {
    let free = vec![true; n0.zoning.num_zones()];
    gauss_newton_masked(op, n0, data, cfg, truth, &free)
}

/// Gauss-Newton with a free mask: zones flagged `false` stay at their n₀
/// value (used by the selective strategies to freeze the background).
pub fn gauss_newton_masked<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    n0: &IndexField<T>,
    data: &FarFieldData<T>,
    cfg: &GNConfig<T>,
    truth: Option<&IndexField<T>>,
    free: &[bool],
) -> Result<(IndexField<T>, GNTrace<T>)> {
    gauss_newton_warm(op, n0, None, data, cfg, truth, free)
}

/// Gauss-Newton with an explicit starting iterate: the Tikhonov anchor stays
/// n₀ while the iteration begins at `start` (used by the refinement loop,
/// which warm-starts each run from the previous reconstruction).
pub fn gauss_newton_warm<T: Scalar>(
    op: &ForwardOperator<'_, T>,
    n0: &IndexField<T>,
    start: Option<&IndexField<T>>,
    data: &FarFieldData<T>,
    cfg: &GNConfig<T>,
    truth: Option<&IndexField<T>>,
    free: &[bool],
) -> Result<(IndexField<T>, GNTrace<T>)> {
    cfg.validate()?;
    let nz = n0.zoning.num_zones();
    if free.len() != nz {
        return Err(Error::Mismatch(format!(
            "free mask covers {} zones, zoning has {}",
            free.len(),
            nz
        )));
    }
    if n0.zoning.num_elements() != op.mesh.num_d_elements() {
        return Err(Error::Mismatch(
            "initial guess zoning does not cover the operator's mesh".into(),
        ));
    }
    let data_norm = data.norm();
    if data_norm <= T::zero() {
        return Err(Error::invalid("data has zero norm"));
    }
    let c1 = cfg.c1.unwrap_or_else(|| (data_norm * data_norm).recip());
    let mu = cfg.c2 / (s::<T>(2.0) * c1);
    let areas = n0.zoning.areas(op.mesh);
    let free_cols: Vec<usize> = (0..nz).filter(|&z| free[z]).collect();
    if free_cols.is_empty() {
        return Err(Error::invalid("no free zones to reconstruct"));
    }
    let sqrt_w = (op.incident.weight * op.measurement.weight).sqrt();
    let target = data.flatten();
    let m_rows = target.len();

    let mut current = match start {
        Some(st) => {
            if st.zoning.num_zones() != nz {
                return Err(Error::Mismatch(
                    "starting iterate zoning differs from the anchor's".into(),
                ));
            }
            st.clone()
        }
        None => n0.clone(),
    };
    if cfg.real_constraint {
        for v in &mut current.values {
            v.im = T::zero();
        }
    }
    let mut trace = GNTrace::default();

    for iter in 1..=cfg.max_iters {
        let fields = op.solve_fields(&current)?;
        let forward = op.far_field(&current, &fields);
        let jac = op.jacobian(&current, &fields);

        // Residual of the linearization around n₀:
        //   r = 𝓕(n_p) − 𝔲^ε − D𝓕(n_p)(n_p − n₀), scaled by √w.
        let fwd = forward.flatten();
        let mut r = DVector::from_element(m_rows, C::new(T::zero(), T::zero()));
        for row in 0..m_rows {
            let mut lin = C::new(T::zero(), T::zero());
            for z in 0..nz {
                lin += jac[(row, z)] * (current.values[z] - n0.values[z]);
            }
            let val = (fwd[row] - target[row] - lin) * sqrt_w;
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(Error::NonFinite(format!(
                    "non-finite residual at data row {row}, iteration {iter}"
                )));
            }
            r[row] = val;
        }

        // J̃ = √w · J · A^{-1/2}, restricted to the free columns.
        let nf = free_cols.len();
        let mut jt = DMatrix::from_element(m_rows, nf, C::new(T::zero(), T::zero()));
        for (cf, &z) in free_cols.iter().enumerate() {
            let col_scale = sqrt_w / areas[z].sqrt();
            for row in 0..m_rows {
                jt[(row, cf)] = jac[(row, z)] * col_scale;
            }
        }

        // Solve (J̃^H J̃ + μ) x̃ = −J̃^H r̃, through the dual when data is
        // the smaller space.
        let xt: DVector<C<T>> = if m_rows < nf {
            let mut g = &jt * jt.adjoint();
            for i in 0..m_rows {
                g[(i, i)] += C::new(mu, T::zero());
            }
            let chol = g
                .cholesky()
                .ok_or_else(|| Error::SingularSystem("dual normal equations".into()))?;
            let y = chol.solve(&r);
            -(jt.adjoint() * y)
        } else {
            let mut h = jt.adjoint() * &jt;
            for i in 0..nf {
                h[(i, i)] += C::new(mu, T::zero());
            }
            let rhs = -(jt.adjoint() * &r);
            let chol = h
                .cholesky()
                .ok_or_else(|| Error::SingularSystem("normal equations".into()))?;
            chol.solve(&rhs)
        };

        let previous = current.values.clone();
        for (cf, &z) in free_cols.iter().enumerate() {
            let step = xt[cf] / areas[z].sqrt();
            current.values[z] = n0.values[z] + step;
            if cfg.real_constraint {
                current.values[z].im = T::zero();
            }
        }

        let diff: Vec<C<T>> = current
            .values
            .iter()
            .zip(&previous)
            .map(|(a, b)| a - b)
            .collect();
        let step = weighted_norm(&areas, &diff)
            / (T::one() + weighted_norm(&areas, &previous));
        let misfit = forward.difference(data)?.norm();
        let rel_error = match truth {
            Some(t) => Some(relative_error(op.mesh, &current, t)?),
            None => None,
        };
        trace.records.push(GNRecord {
            iter,
            fidelity: c1 * misfit * misfit,
            step,
            rel_error,
            params: current.values.clone(),
        });
        if step < cfg.stop_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::DirectionGrid;
    use crate::mesh::build_disc_mesh;
    use crate::synth::{add_noise, make_truth, Scenario};
    use crate::zoning::{partition_zones, Zoning};
    use num_complex::Complex64;

    fn small_mesh(seed: u64) -> crate::mesh::TriangleMesh<f64> {
        let lambda = 2.0 * std::f64::consts::PI / 5.0;
        build_disc_mesh(1.0, 5.0, 12, lambda, 0.5 * lambda, seed).unwrap()
    }

    #[test]
    fn frozen_relative_error_value_for_uniform_guess() {
        // Closed-form: truth 1.3 in D minus the defect disc (radius 0.3,
        // value 1.6); guess 1.3 everywhere. The area-weighted quotient is
        // 0.3·sqrt(0.09π) / sqrt(π(1.69·0.91 + 2.56·0.09)) ≈ 0.0677.
        let mesh = small_mesh(3);
        let sc = Scenario::<f64>::by_name("disc-in-disc").unwrap();
        let truth = sc.sample_truth(&mesh);
        let guess = IndexField::constant(
            Zoning::single(mesh.num_d_elements()),
            Complex64::new(1.3, 0.0),
            true,
        );
        let e = relative_error(&mesh, &guess, &truth).unwrap();
        assert!((e - 0.0677).abs() < 0.004, "e = {e}");
        assert!(relative_error(&mesh, &truth, &truth).unwrap() < 1e-15);
    }

    #[test]
    fn relative_error_is_scale_invariant() {
        let mesh = small_mesh(3);
        let sc = Scenario::<f64>::by_name("disc-in-disc").unwrap();
        let truth = sc.sample_truth(&mesh);
        let guess = IndexField::constant(
            Zoning::single(mesh.num_d_elements()),
            Complex64::new(1.45, 0.0),
            true,
        );
        let e1 = relative_error(&mesh, &guess, &truth).unwrap();
        let mut g2 = guess.clone();
        let mut t2 = truth.clone();
        for v in &mut g2.values {
            *v *= 2.0;
        }
        for v in &mut t2.values {
            *v *= 2.0;
        }
        let e2 = relative_error(&mesh, &g2, &t2).unwrap();
        assert!((e1 - e2).abs() < 1e-14);
    }

    #[test]
    fn noise_free_self_data_is_a_fixed_point() {
        let mesh = small_mesh(3);
        let zoning = partition_zones(&mesh, 6, 5).unwrap();
        let n0 = IndexField::constant(zoning, Complex64::new(1.3, 0.0), true);
        let op = ForwardOperator::new(
            &mesh,
            5.0,
            DirectionGrid::full(8),
            DirectionGrid::full(8),
        )
        .unwrap();
        let (data, _) = op.evaluate(&n0).unwrap();
        let cfg = GNConfig {
            real_constraint: true,
            ..GNConfig::default()
        };
        let (result, trace) = gauss_newton(&op, &n0, &data, &cfg, None).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.records.len(), 1);
        assert!(trace.records[0].step < 1e-8);
        for (a, b) in result.values.iter().zip(&n0.values) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn reconstructs_the_defect_on_a_coarse_setup() {
        let recon_mesh = small_mesh(3);
        let data_mesh = small_mesh(11);
        let sc = Scenario::<f64>::by_name("disc-in-disc").unwrap();
        let ge = DirectionGrid::full(10);
        let gm = DirectionGrid::full(10);
        let clean = make_truth(&sc, &data_mesh, 5.0, ge.clone(), gm.clone()).unwrap();
        let data = add_noise(&clean, 0.02, 17).unwrap();

        let zoning = partition_zones(&recon_mesh, 12, 5).unwrap();
        let n0 = sc.sample_initial_guess(&recon_mesh, &zoning).unwrap();
        let truth = sc.sample_truth(&recon_mesh);
        let op = ForwardOperator::new(&recon_mesh, 5.0, ge, gm).unwrap();
        let cfg = GNConfig {
            real_constraint: true,
            ..GNConfig::default()
        };
        let (result, trace) = gauss_newton(&op, &n0, &data, &cfg, Some(&truth)).unwrap();
        assert!(trace.converged, "did not converge: {:?}", trace.records.len());
        let e0 = relative_error(&recon_mesh, &n0, &truth).unwrap();
        let e = relative_error(&recon_mesh, &result, &truth).unwrap();
        // With only 12 zones the defect boundary cannot be resolved, so the
        // achievable error stays close to the zoning-approximation limit;
        // require genuine improvement plus an absolute cap.
        assert!(e < 0.92 * e0, "no improvement: {e} vs initial {e0}");
        assert!(e < 0.06, "error too large: {e}");
        // Fidelity endpoint is not above its starting value.
        let f0 = trace.records.first().unwrap().fidelity;
        let f1 = trace.records.last().unwrap().fidelity;
        assert!(f1 <= f0 + 1e-12, "fidelity grew: {f0} -> {f1}");
    }

    #[test]
    fn strong_regularization_pins_the_iterate_to_the_anchor() {
        let recon_mesh = small_mesh(3);
        let data_mesh = small_mesh(11);
        let sc = Scenario::<f64>::by_name("disc-in-disc").unwrap();
        let ge = DirectionGrid::full(8);
        let gm = DirectionGrid::full(8);
        let data =
            add_noise(&make_truth(&sc, &data_mesh, 5.0, ge.clone(), gm.clone()).unwrap(), 0.02, 4)
                .unwrap();
        let zoning = partition_zones(&recon_mesh, 8, 5).unwrap();
        let n0 = sc.sample_initial_guess(&recon_mesh, &zoning).unwrap();
        let op = ForwardOperator::new(&recon_mesh, 5.0, ge, gm).unwrap();
        let areas = n0.zoning.areas(&recon_mesh);

        let dist = |c2: f64| -> f64 {
            let cfg = GNConfig {
                c2,
                real_constraint: true,
                ..GNConfig::default()
            };
            let (res, _) = gauss_newton(&op, &n0, &data, &cfg, None).unwrap();
            let d: Vec<Complex64> = res
                .values
                .iter()
                .zip(&n0.values)
                .map(|(a, b)| a - b)
                .collect();
            weighted_norm(&areas, &d)
        };
        let loose = dist(1e-2);
        let tight = dist(1e4);
        assert!(
            tight < 0.01 * loose,
            "anchor not enforced: tight {tight:e} vs loose {loose:e}"
        );
    }

    #[test]
    fn masked_zones_stay_at_their_anchor() {
        let recon_mesh = small_mesh(3);
        let data_mesh = small_mesh(11);
        let sc = Scenario::<f64>::by_name("disc-in-disc").unwrap();
        let ge = DirectionGrid::full(8);
        let gm = DirectionGrid::full(8);
        let data = make_truth(&sc, &data_mesh, 5.0, ge.clone(), gm.clone()).unwrap();
        let zoning = partition_zones(&recon_mesh, 6, 5).unwrap();
        let n0 = sc.sample_initial_guess(&recon_mesh, &zoning).unwrap();
        let op = ForwardOperator::new(&recon_mesh, 5.0, ge, gm).unwrap();
        let mut free = vec![true; 6];
        free[0] = false;
        free[3] = false;
        let cfg = GNConfig {
            real_constraint: true,
            ..GNConfig::default()
        };
        let (res, _) = gauss_newton_masked(&op, &n0, &data, &cfg, None, &free).unwrap();
        assert_eq!(res.values[0], n0.values[0]);
        assert_eq!(res.values[3], n0.values[3]);
        assert!(res
            .values
            .iter()
            .zip(&n0.values)
            .enumerate()
            .any(|(z, (a, b))| free[z] && (a - b).norm() > 1e-6));
    }
}
