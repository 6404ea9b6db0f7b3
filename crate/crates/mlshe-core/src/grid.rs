//! Space-time grid shared by the smooth-potential solver and the
//! white-noise lattice.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Product grid for the forward solves: uniform y nodes, uniform time steps
/// from `init_epsilon` to `t_final`, and a pencil of start positions.
///
/// The delta initial condition is replaced by the exact heat kernel at
/// `init_epsilon`; marching continues one extra step past `t_final` so
/// residual checks can center a time stencil on the final slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub n_t: usize,
    pub t_final: f64,
    pub x_nodes: Vec<f64>,
    pub init_epsilon: f64,
}

impl GridSpec {
    /// Grid with a symmetric x-pencil of `2*half_width + 1` start nodes
    /// around `x_center`, spaced by the y grid step.
    pub fn with_pencil(
        y_min: f64,
        y_max: f64,
        n_y: usize,
        n_t: usize,
        t_final: f64,
        x_center: f64,
        half_width: usize,
        init_epsilon: f64,
    ) -> Self {
        let dy = (y_max - y_min) / (n_y - 1) as f64;
        let x_nodes = (0..=2 * half_width)
            .map(|k| x_center + (k as f64 - half_width as f64) * dy)
            .collect();
        GridSpec {
            y_min,
            y_max,
            n_y,
            n_t,
            t_final,
            x_nodes,
            init_epsilon,
        }
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_y - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_final - self.init_epsilon) / self.n_t as f64
    }

    pub fn y_coord(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy()
    }

    pub fn y_coords(&self) -> Vec<f64> {
        (0..self.n_y).map(|j| self.y_coord(j)).collect()
    }

    /// Index of the grid node closest to `y`.
    pub fn nearest_y_index(&self, y: f64) -> usize {
        let j = ((y - self.y_min) / self.dy()).round() as i64;
        j.clamp(0, self.n_y as i64 - 1) as usize
    }

    /// Diffusion number dt/dy^2, reported for diagnostics (the implicit
    /// scheme is unconditionally stable).
    pub fn diffusion_number(&self) -> f64 {
        self.dt() / (self.dy() * self.dy())
    }

    pub fn validate(&self) -> Result<()> {
        if self.y_max <= self.y_min {
            return Err(Error::config("y_max must exceed y_min"));
        }
        if self.n_y < 8 || self.n_t < 2 {
            return Err(Error::config("grid too coarse: need n_y >= 8, n_t >= 2"));
        }
        if self.t_final <= 0.0 {
            return Err(Error::config("t_final must be positive"));
        }
        if self.init_epsilon <= 0.0 || self.init_epsilon > self.t_final / 100.0 {
            return Err(Error::config(
                "init_epsilon must lie in (0, t_final/100]",
            ));
        }
        if self.x_nodes.is_empty() {
            return Err(Error::config("need at least one start node"));
        }
        let pad = 6.0 * self.t_final.sqrt();
        for &x in &self.x_nodes {
            if x - self.y_min < pad || self.y_max - x < pad {
                return Err(Error::config(format!(
                    "start node {x} closer than 6 sqrt(t) = {pad} to the domain boundary"
                )));
            }
        }
        Ok(())
    }

    /// Refined copy: halves dt and dy (keeping the same extents).
    pub fn refined(&self) -> GridSpec {
        let mut g = self.clone();
        g.n_y = 2 * (self.n_y - 1) + 1;
        g.n_t = 2 * self.n_t;
        g
    }

    /// Trust region: nodes with |y - x| <= 4 sqrt(t); Wronskians underflow
    /// in far tails.
    pub fn in_trust_region(&self, x: f64, y: f64) -> bool {
        (y - x).abs() <= 4.0 * self.t_final.sqrt()
    }
}
