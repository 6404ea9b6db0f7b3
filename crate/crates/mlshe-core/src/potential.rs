//! Smooth space-time potentials built from Gaussian bumps; the
//! deterministic stand-in for white noise.

use serde::{Deserialize, Serialize};

/// One Gaussian bump `a * exp(-(s-c_t)^2/2w_t^2 - (y-c_y)^2/2w_y^2)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center_t: f64,
    pub center_y: f64,
    pub width_t: f64,
    pub width_y: f64,
}

/// A sum of Gaussian bumps, optionally reflected in space
/// (`phi^dagger(s, y) = phi(s, -y)`). Smooth and rapidly decaying by
/// construction.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PotentialField {
    pub bumps: Vec<Bump>,
    pub reflected: bool,
}

impl PotentialField {
    pub fn zero() -> Self {
        PotentialField::default()
    }

    pub fn from_bumps(bumps: Vec<Bump>) -> Self {
        PotentialField {
            bumps,
            reflected: false,
        }
    }

    /// The standard single off-origin bump used across the verification
    /// suites.
    pub fn single_bump() -> Self {
        PotentialField::from_bumps(vec![Bump {
            amplitude: 1.0,
            center_t: 0.5,
            center_y: 0.0,
            width_t: 0.2,
            width_y: 0.5,
        }])
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.is_empty() || self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    /// Space-reflected potential.
    pub fn dagger(&self) -> Self {
        PotentialField {
            bumps: self.bumps.clone(),
            reflected: !self.reflected,
        }
    }

    pub fn eval(&self, s: f64, y: f64) -> f64 {
        let y = if self.reflected { -y } else { y };
        self.bumps
            .iter()
            .map(|b| {
                let dt = (s - b.center_t) / b.width_t;
                let dy = (y - b.center_y) / b.width_y;
                b.amplitude * (-0.5 * dt * dt - 0.5 * dy * dy).exp()
            })
            .sum()
    }

    /// Bound on |phi| (sum of |amplitudes|).
    pub fn sup_norm(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude.abs()).sum()
    }

    /// Largest |center_y| + 3 width_y over bumps: the effective spatial
    /// support radius used in boundary-clearance checks.
    pub fn support_radius(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.center_y.abs() + 3.0 * b.width_y)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_flips_space() {
        let phi = PotentialField::from_bumps(vec![Bump {
            amplitude: 1.0,
            center_t: 0.5,
            center_y: 0.7,
            width_t: 0.2,
            width_y: 0.5,
        }]);
        let dag = phi.dagger();
        for (s, y) in [(0.1, 0.3), (0.5, -0.7), (0.9, 1.4)] {
            assert_eq!(dag.eval(s, y), phi.eval(s, -y));
        }
        assert!(dag.dagger().eval(0.2, 0.4) == phi.eval(0.2, 0.4));
    }

    #[test]
    fn even_bump_is_self_reflected() {
        let phi = PotentialField::single_bump();
        let dag = phi.dagger();
        for y in [-1.0, 0.0, 0.5] {
            assert!((phi.eval(0.5, y) - dag.eval(0.5, y)).abs() < 1e-15);
        }
    }

    #[test]
    fn sup_norm_bounds_values() {
        let phi = PotentialField::single_bump();
        assert!(phi.eval(0.5, 0.0) <= phi.sup_norm());
    }
}
