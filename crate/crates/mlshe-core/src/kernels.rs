//! Closed-form reference quantities: the Gaussian heat kernel, the
//! Karlin–McGregor killed transition density, Vandermonde factors, and the
//! normalization-constant ledger used to calibrate the determinant
//! identities.

use crate::error::{Error, Result};
use crate::linalg;
use serde::{Deserialize, Serialize};

/// A point of the closed Weyl chamber: coordinates stored in decreasing
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylPoint {
    coords: Vec<f64>,
}

impl WeylPoint {
    /// Builds a chamber point; fails if the coordinates are not decreasing.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("WeylPoint needs at least one coordinate"));
        }
        if coords.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain(format!(
                "coordinates must be decreasing, got {coords:?}"
            )));
        }
        Ok(WeylPoint { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// True when all inequalities are strict (interior of the chamber).
    pub fn is_strictly_interior(&self) -> bool {
        self.coords.windows(2).all(|w| w[0] > w[1])
    }
}

/// One calibrated normalization constant, as emitted to `ledger.json`.
///
/// `printed_constant` is the closed-form value `t^{n(n-1)/2} * prod_j j!`;
/// `calibrated_constant` is the value forced by requiring the layer
/// hierarchy to reduce to powers of the heat kernel at zero potential
/// (which differs by the square of the superfactorial; see
/// [`calibrated_constant`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantLedger {
    pub n: usize,
    pub t: f64,
    pub printed_constant: f64,
    pub calibrated_constant: f64,
    pub orientation_sign: f64,
}

/// Gaussian heat kernel `p(t,x,y) = exp(-(x-y)^2/2t)/sqrt(2 pi t)`.
pub fn heat_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::domain(format!("heat_kernel needs t > 0, got {t}")));
    }
    let d = x - y;
    Ok((-d * d / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt())
}

/// Log of the heat kernel; used where products of many kernel values
/// would underflow.
pub fn log_heat_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::domain(format!("heat_kernel needs t > 0, got {t}")));
    }
    let d = x - y;
    Ok(-d * d / (2.0 * t) - 0.5 * (2.0 * std::f64::consts::PI * t).ln())
}

/// Karlin–McGregor density of Brownian motion in the Weyl chamber killed at
/// the boundary: the signed permutation sum `det[p(t, x_i, y_j)]`.
///
/// Computed as a determinant in log space with per-row scaling; the
/// permutation-sum form would cost n! and underflow first.
pub fn km_density(t: f64, x: &WeylPoint, y: &WeylPoint) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "km_density length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let mut logs = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            logs[i * n + j] = log_heat_kernel(t, x.coords()[i], y.coords()[j])?;
        }
    }
    let (log_scale, d) = linalg::det_log_scaled(&logs, n);
    Ok(log_scale.exp() * d)
}

/// Vandermonde product over ordered index pairs: `prod_{i<j} (x_i - x_j)`.
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut out = 1.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            out *= x[i] - x[j];
        }
    }
    out
}

/// Superfactorial `prod_{j=1}^{n-1} j!`.
pub fn superfactorial(n: usize) -> f64 {
    let mut out = 1.0;
    let mut fact = 1.0;
    for j in 1..n {
        fact *= j as f64;
        out *= fact;
    }
    out
}

/// The constant as printed alongside the confluent determinant identity:
/// `t^{n(n-1)/2} * prod_{j=1}^{n-1} j!`.
pub fn printed_constant(n: usize, t: f64) -> f64 {
    t.powi((n * (n - 1) / 2) as i32) * superfactorial(n)
}

/// The constant that actually reconciles `Z_n = c * det[d_x^i d_y^j Z]`
/// with `Z_n = p^n` at zero potential: `t^{n(n-1)/2} / prod_{j=1}^{n-1} j!`.
///
/// Pinned once by the calibration protocol (the Gaussian Wronskian equals
/// `prod j! * p^n / t^{n(n-1)/2}`) and re-verified empirically across
/// potentials by the calibration suite; differs from the printed constant
/// by the square of the superfactorial.
pub fn calibrated_constant(n: usize, t: f64) -> f64 {
    t.powi((n * (n - 1) / 2) as i32) / superfactorial(n)
}

/// Sign relating the interlacing integral to the determinant of function
/// values under the decreasing-coordinate convention: `(-1)^(n+1)`.
pub fn orientation_sign(n: usize) -> f64 {
    if n % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Accumulated orientation sign for the full Gelfand–Tsetlin factorization
/// (one interlacing reduction per level from n down to 2).
pub fn gt_orientation_sign(n: usize) -> f64 {
    (2..=n).map(orientation_sign).product()
}

/// Both constants plus the orientation sign for layer `n` at time `t`.
pub fn confluent_constants(n: usize, t: f64) -> Result<ConstantLedger> {
    if n < 1 {
        return Err(Error::domain("confluent_constants needs n >= 1"));
    }
    if t <= 0.0 {
        return Err(Error::domain("confluent_constants needs t > 0"));
    }
    Ok(ConstantLedger {
        n,
        t,
        printed_constant: printed_constant(n, t),
        calibrated_constant: calibrated_constant(n, t),
        orientation_sign: gt_orientation_sign(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn heat_kernel_values() {
        assert_relative_eq!(
            heat_kernel(1.0, 0.0, 0.0).unwrap(),
            0.3989422804014327,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            heat_kernel(2.0, 1.0, -1.0).unwrap(),
            0.2820947917738781 * (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn heat_kernel_symmetric() {
        for (t, a, b) in [(0.3, 1.2, -0.7), (2.0, 0.0, 5.0), (1.0, 3.3, 3.3)] {
            assert_eq!(heat_kernel(t, a, b).unwrap(), heat_kernel(t, b, a).unwrap());
        }
    }

    #[test]
    fn heat_kernel_rejects_bad_t() {
        assert!(heat_kernel(0.0, 0.0, 0.0).is_err());
        assert!(heat_kernel(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn heat_kernel_integrates_to_one() {
        // Simpson over +-8 sqrt(t)
        let t: f64 = 0.7;
        let (a, b) = (-8.0 * t.sqrt(), 8.0 * t.sqrt());
        let m = 4000;
        let h = (b - a) / m as f64;
        let mut s = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * heat_kernel(t, 0.3, a + k as f64 * h).unwrap();
        }
        s *= h / 3.0;
        assert!((s - 1.0).abs() < 1e-8);
    }

    #[test]
    fn chapman_kolmogorov() {
        let (s, t, x, y) = (0.4, 0.9, 0.2, -0.5);
        let (a, b) = (-12.0, 12.0);
        let m = 6000;
        let h = (b - a) / m as f64;
        let mut acc = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let z = a + k as f64 * h;
            acc += w * heat_kernel(s, x, z).unwrap() * heat_kernel(t, z, y).unwrap();
        }
        acc *= h / 3.0;
        assert!((acc - heat_kernel(s + t, x, y).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn km_density_reduces_to_heat_kernel_for_n1() {
        let x = WeylPoint::new(vec![0.4]).unwrap();
        let y = WeylPoint::new(vec![-1.1]).unwrap();
        assert_relative_eq!(
            km_density(1.3, &x, &y).unwrap(),
            heat_kernel(1.3, 0.4, -1.1).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn km_density_two_particle_value() {
        // (1,(1,0),(1,0)) -> (1/2pi)(1 - e^{-1})
        let x = WeylPoint::new(vec![1.0, 0.0]).unwrap();
        let expect = (1.0 - (-1.0f64).exp()) / (2.0 * std::f64::consts::PI);
        assert_relative_eq!(
            km_density(1.0, &x, &x).unwrap(),
            expect,
            max_relative = 1e-10
        );
        assert!((expect - 0.100605112).abs() < 1e-9);
    }

    #[test]
    fn km_density_vanishes_on_ties() {
        let x = WeylPoint::new(vec![1.0, 0.0]).unwrap();
        for c in [-2.0, 0.0, 1.7] {
            let y = WeylPoint::new(vec![c, c]).unwrap();
            assert!(km_density(1.0, &x, &y).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn km_density_rejects_length_mismatch() {
        let x = WeylPoint::new(vec![1.0, 0.0]).unwrap();
        let y = WeylPoint::new(vec![0.0]).unwrap();
        assert!(km_density(1.0, &x, &y).is_err());
    }

    #[test]
    fn km_density_far_tails_do_not_underflow_to_garbage() {
        // entries individually underflow; scaled determinant stays finite
        let x = WeylPoint::new(vec![30.0, 0.0]).unwrap();
        let y = WeylPoint::new(vec![0.5, -30.0]).unwrap();
        let v = km_density(0.5, &x, &y).unwrap();
        assert!(v.is_finite());
        assert!(v >= 0.0);
    }

    #[test]
    fn vandermonde_values() {
        assert_eq!(vandermonde(&[3.0, 1.0]), 2.0);
        assert_eq!(vandermonde(&[2.0, 1.0, 0.0]), 2.0);
        assert_eq!(vandermonde(&[1.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn constants_and_ratio_identity() {
        assert_eq!(printed_constant(2, 0.7), 0.7);
        assert_eq!(printed_constant(3, 1.0), 2.0);
        assert_eq!(calibrated_constant(3, 1.0), 0.5);
        for n in 2..=5 {
            for t in [0.25, 1.0, 3.0] {
                let ratio = printed_constant(n - 1, t) * printed_constant(n + 1, t)
                    / printed_constant(n, t).powi(2);
                assert_relative_eq!(ratio, n as f64 * t, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn weyl_point_ordering() {
        assert!(WeylPoint::new(vec![1.0, 0.0, -1.0]).is_ok());
        assert!(WeylPoint::new(vec![0.0, 1.0]).is_err());
        let tied = WeylPoint::new(vec![1.0, 1.0]).unwrap();
        assert!(!tied.is_strictly_interior());
    }
}
