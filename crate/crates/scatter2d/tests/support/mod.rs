//! Test-only oracles, independent of the library's solver path.
//!
//! Scattering of a plane wave by a penetrable disc of radius `a` with
//! constant refraction index `n` has a closed-form separation-of-variables
//! solution in cylindrical harmonics; the Bessel machinery below is
//! self-contained so the expected values do not depend on the code under
//! test.

#![allow(dead_code)]

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_0..J_nmax` by Miller's downward recurrence, normalized with
/// `J_0 + 2 * sum J_{2m} = 1`.
pub fn bessel_j(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "oracle only needs positive arguments");
    let start = (nmax + 2).max(x as usize + 2) + 24;
    let start = start + (start % 2); // even start keeps the normalizer simple
    let mut jp = 0.0_f64; // J_{m+1} (unnormalized)
    let mut j = 1e-30_f64; // J_m
    let mut out = vec![0.0_f64; nmax + 1];
    let mut norm = 0.0_f64;
    for m in (0..=start).rev() {
        let jm = (2.0 * (m as f64 + 1.0) / x) * j - jp;
        jp = j;
        j = jm;
        if m <= nmax {
            out[m] = j;
        }
        if m % 2 == 0 {
            norm += if m == 0 { j } else { 2.0 * j };
        }
        // Rescale to dodge overflow during the recurrence.
        if j.abs() > 1e250 {
            jp /= 1e250;
            j /= 1e250;
            norm /= 1e250;
            for v in &mut out {
                *v /= 1e250;
            }
        }
    }
    for v in &mut out {
        *v /= norm;
    }
    out
}

/// `Y_0..Y_nmax`: power series for `Y_0`, Wronskian identity for `Y_1`,
/// upward recurrence above (stable for the `x = O(ka)` range used in tests).
pub fn bessel_y(nmax: usize, x: f64) -> Vec<f64> {
    let j = bessel_j(nmax.max(1), x);
    let mut y = vec![0.0_f64; nmax + 1];
    // Y_0 = (2/pi)[(ln(x/2)+gamma) J_0 + sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k/(k!)^2]
    let q = 0.25 * x * x;
    let mut term = 1.0_f64; // (x^2/4)^k / (k!)^2
    let mut harmonic = 0.0_f64;
    let mut series = 0.0_f64;
    for k in 1..60 {
        term *= q / ((k * k) as f64);
        harmonic += 1.0 / k as f64;
        let contrib = if k % 2 == 1 { term * harmonic } else { -term * harmonic };
        series += contrib;
        if term < 1e-18 * series.abs().max(1.0) {
            break;
        }
    }
    y[0] = std::f64::consts::FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j[0] + series);
    if nmax >= 1 {
        // Wronskian: J_1 Y_0 - J_0 Y_1 = 2/(pi x).
        y[1] = (j[1] * y[0] - std::f64::consts::FRAC_2_PI / x) / j[0];
    }
    for m in 2..=nmax {
        y[m] = (2.0 * (m as f64 - 1.0) / x) * y[m - 1] - y[m - 2];
    }
    y
}

fn hankel1(j: &[f64], y: &[f64], m: usize) -> Complex64 {
    Complex64::new(j[m], y[m])
}

fn deriv(f: &[f64], m: usize, _x: f64) -> f64 {
    if m == 0 {
        -f[1]
    } else {
        0.5 * (f[m - 1] - f[m + 1])
    }
}

fn hankel1_deriv(j: &[f64], y: &[f64], m: usize, x: f64) -> Complex64 {
    Complex64::new(deriv(j, m, x), deriv(y, m, x))
}

/// Series solution for a homogeneous disc of radius `a`, index `n > 0`
/// inside, unit background, wave number `k`.
pub struct DiscScattering {
    pub k: f64,
    pub radius: f64,
    pub index: f64,
    k1: f64,
    /// Scattered-wave coefficients b_m (m = 0..=mmax).
    b: Vec<Complex64>,
    /// Interior-wave coefficients a_m.
    a: Vec<Complex64>,
}

impl DiscScattering {
    pub fn new(k: f64, radius: f64, index: f64) -> Self {
        assert!(k > 0.0 && radius > 0.0 && index > 0.0);
        let k1 = k * index.sqrt();
        let mmax = (k.max(k1) * radius) as usize + 22;
        let x = k * radius;
        let x1 = k1 * radius;
        let j = bessel_j(mmax + 1, x);
        let y = bessel_y(mmax + 1, x);
        let j1 = bessel_j(mmax + 1, x1);
        let mut b = Vec::with_capacity(mmax + 1);
        let mut a = Vec::with_capacity(mmax + 1);
        for m in 0..=mmax {
            let jm = j[m];
            let djm = deriv(&j, m, x);
            let j1m = j1[m];
            let dj1m = deriv(&j1, m, x1);
            let hm = hankel1(&j, &y, m);
            let dhm = hankel1_deriv(&j, &y, m, x);
            let num = Complex64::new(k1 * dj1m * jm - k * djm * j1m, 0.0);
            let den = dhm * (k * j1m) - hm * (k1 * dj1m);
            let bm = num / den;
            b.push(bm);
            a.push((Complex64::new(jm, 0.0) + bm * hm) / j1m);
        }
        Self {
            k,
            radius,
            index,
            k1,
            b,
            a,
        }
    }

    /// Far-field pattern u^inf(x_hat; theta), with u^s ~ gamma-normalized so
    /// that u^inf = -4i * sum_m b_m e^{i m (phi_obs - phi_inc)}.
    pub fn far_field(&self, obs_angle: f64, inc_angle: f64) -> Complex64 {
        let phi = obs_angle - inc_angle;
        let mut acc = self.b[0];
        for (m, bm) in self.b.iter().enumerate().skip(1) {
            acc += bm * (2.0 * (m as f64 * phi).cos());
        }
        Complex64::new(0.0, -4.0) * acc
    }

    /// Total field at a point strictly inside the disc.
    pub fn total_field_inside(&self, x: f64, y_coord: f64, inc_angle: f64) -> Complex64 {
        let r = x.hypot(y_coord);
        assert!(r < self.radius * (1.0 + 1e-12));
        let phi = y_coord.atan2(x) - inc_angle;
        let jr = bessel_j(self.a.len() - 1, (self.k1 * r).max(1e-12));
        let mut acc = self.a[0] * jr[0];
        let mut im = Complex64::new(0.0, 1.0); // i^m
        for m in 1..self.a.len() {
            acc += self.a[m] * im * jr[m] * (2.0 * (m as f64 * phi).cos());
            im *= Complex64::new(0.0, 1.0);
        }
        acc
    }
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn bessel_values_match_tabulated() {
        // Abramowitz & Stegun tables at x = 5.
        let j = bessel_j(3, 5.0);
        assert!((j[0] - (-0.177_596_77)).abs() < 1e-7);
        assert!((j[1] - (-0.327_579_14)).abs() < 1e-7);
        assert!((j[2] - 0.046_565_12).abs() < 1e-7);
        let y = bessel_y(2, 5.0);
        assert!((y[0] - (-0.308_517_63)).abs() < 1e-7);
        assert!((y[1] - 0.147_863_14).abs() < 1e-7);
        assert!((y[2] - 0.367_663_26).abs() < 1e-6);
    }

    #[test]
    fn wronskian_holds_across_orders() {
        for &x in &[1.3, 5.0, 6.2, 11.0] {
            let j = bessel_j(8, x);
            let y = bessel_y(8, x);
            for m in 0..8 {
                let w = j[m + 1] * y[m] - j[m] * y[m + 1];
                assert!(
                    (w - std::f64::consts::FRAC_2_PI / x).abs() < 1e-12,
                    "x={x}, m={m}: {w}"
                );
            }
        }
    }

    #[test]
    fn interface_conditions_hold() {
        let d = DiscScattering::new(5.0, 1.0, 1.3);
        // Continuity of the total field across r = a along several angles.
        let x = d.k * d.radius;
        let j = bessel_j(d.b.len(), x);
        let y = bessel_y(d.b.len(), x);
        for &phi in &[0.0_f64, 0.7, 2.1] {
            let inside = d.total_field_inside(
                d.radius * (1.0 - 1e-13) * phi.cos(),
                d.radius * (1.0 - 1e-13) * phi.sin(),
                0.0,
            );
            let mut outside = Complex64::new(j[0], 0.0) + d.b[0] * hankel1(&j, &y, 0);
            let mut im = Complex64::new(0.0, 1.0);
            for m in 1..d.b.len() {
                let jm = Complex64::new(j[m], 0.0);
                outside += im * (jm + d.b[m] * hankel1(&j, &y, m)) * (2.0 * (m as f64 * phi).cos());
                im *= Complex64::new(0.0, 1.0);
            }
            assert!(
                (inside - outside).norm() < 1e-10,
                "phi={phi}: {:?}",
                inside - outside
            );
        }
    }
}
