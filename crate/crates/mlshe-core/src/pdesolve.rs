//! Smooth-potential solver: Crank–Nicolson with Strang splitting for
//! `d_t Z = 1/2 d_y^2 Z + phi(t,y) Z`, the Wronskian layer hierarchy
//! `Z_n, u_n, S_n`, evolution-equation residuals, the Gelfand–Tsetlin
//! reconstruction check and the reflection (RSK) symmetry check.

use crate::detcalc::{central_stencil, DerivativeTable};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::GridSpec;
use crate::kernels::{
    self, calibrated_constant, heat_kernel, vandermonde, ConstantLedger, WeylPoint,
};
use crate::linalg::{self, Tridiag};
use crate::potential::PotentialField;

/// Half-step Crank–Nicolson diffusion operator with Dirichlet-zero
/// boundaries. Two applications advance diffusion by one full `dt`; the
/// white-noise lattice uses the identical stencil so zero-potential runs
/// of the two solvers agree bit for bit.
pub struct DiffusionStepper {
    a: f64,
    tri: Tridiag,
    n_y: usize,
}

impl DiffusionStepper {
    /// `tau` is the half step (dt/2); diffusivity is fixed at 1/2.
    pub fn new(n_y: usize, dy: f64, tau: f64) -> Self {
        let a = 0.5 * tau / (2.0 * dy * dy);
        DiffusionStepper {
            a,
            tri: Tridiag::new(n_y - 2, -a, 1.0 + 2.0 * a),
            n_y,
        }
    }

    /// Advances `u` by one half step in place.
    pub fn apply(&self, u: &mut [f64]) {
        let n = self.n_y;
        let a = self.a;
        let mut rhs = vec![0.0; n - 2];
        for j in 1..n - 1 {
            rhs[j - 1] = a * u[j - 1] + (1.0 - 2.0 * a) * u[j] + a * u[j + 1];
        }
        self.tri.solve(&mut rhs);
        u[0] = 0.0;
        u[n - 1] = 0.0;
        u[1..n - 1].copy_from_slice(&rhs);
    }
}

/// One retained time slice of the pencil solve: `z[x_node][y_node]`.
#[derive(Debug, Clone)]
pub struct TimeSlice {
    pub t: f64,
    pub z: Vec<Vec<f64>>,
}

/// The kernel `Z(t, x, y)` tabulated over the start-point pencil and the
/// y grid, with slices at `t_final - dt`, `t_final`, `t_final + dt`.
pub struct HeatSurface {
    pub grid: GridSpec,
    pub phi: PotentialField,
    pub slices: Vec<TimeSlice>,
}

impl HeatSurface {
    /// The final-time slice.
    pub fn final_slice(&self) -> &TimeSlice {
        &self.slices[1]
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.slices[1].z[ix][iy]
    }

    pub fn t_final(&self) -> f64 {
        self.slices[1].t
    }

    /// Mixed partial `d_x^i d_y^j Z` at pencil node `ix`, grid node `iy`,
    /// within slice `slice`, by second-order central stencils.
    pub fn mixed_derivative(
        &self,
        slice: usize,
        ix: usize,
        iy: usize,
        i_ord: usize,
        j_ord: usize,
    ) -> f64 {
        let z = &self.slices[slice].z;
        let hx = self.grid.x_nodes[1] - self.grid.x_nodes[0];
        let hy = self.grid.dy();
        let (cx, wx) = central_stencil(i_ord);
        let (cy, wy) = central_stencil(j_ord);
        let mut acc = 0.0;
        for (a, &ca) in cx.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            let row = &z[ix + a - wx];
            for (b, &cb) in cy.iter().enumerate() {
                if cb != 0.0 {
                    acc += ca * cb * row[iy + b - wy];
                }
            }
        }
        acc / (hx.powi(i_ord as i32) * hy.powi(j_ord as i32))
    }
}

fn check_potential_clearance(phi: &PotentialField, grid: &GridSpec) -> Result<()> {
    for b in &phi.bumps {
        let margin = 3.0 * b.width_y;
        if b.center_y + 2.0 * margin > grid.y_max || b.center_y - 2.0 * margin < grid.y_min {
            return Err(Error::config(format!(
                "potential bump at y = {} (width {}) too close to the domain boundary",
                b.center_y, b.width_y
            )));
        }
    }
    Ok(())
}

/// Solves the heat equation with potential on the pencil of start nodes.
///
/// Each start node initializes with the exact heat kernel at
/// `init_epsilon` and marches by Strang splitting: half-step potential
/// multiplier, two half-step Crank–Nicolson diffusions, half-step
/// potential multiplier. Marching runs one step past `t_final`; the three
/// final slices are retained.
pub fn solve_smooth(phi: &PotentialField, grid: &GridSpec) -> Result<HeatSurface> {
    grid.validate()?;
    check_potential_clearance(phi, grid)?;
    let dt = grid.dt();
    let dy = grid.dy();
    let n_y = grid.n_y;
    let ys = grid.y_coords();
    let stepper = DiffusionStepper::new(n_y, dy, dt / 2.0);
    let n_steps = grid.n_t + 1; // one past t_final
    let retain_from = grid.n_t - 2; // slices at t_final - dt, t_final, t_final + dt

    let per_x: Vec<Vec<Vec<f64>>> = exec::map_indexed(grid.x_nodes.len(), |ix| {
        let x = grid.x_nodes[ix];
        let mut u: Vec<f64> = ys
            .iter()
            .map(|&y| heat_kernel(grid.init_epsilon, x, y).unwrap())
            .collect();
        u[0] = 0.0;
        u[n_y - 1] = 0.0;
        let mut kept = Vec::with_capacity(3);
        for k in 0..n_steps {
            let t_k = grid.init_epsilon + k as f64 * dt;
            if !phi.is_zero() {
                for (j, v) in u.iter_mut().enumerate() {
                    *v *= (phi.eval(t_k + 0.25 * dt, ys[j]) * 0.5 * dt).exp();
                }
            }
            stepper.apply(&mut u);
            stepper.apply(&mut u);
            if !phi.is_zero() {
                for (j, v) in u.iter_mut().enumerate() {
                    *v *= (phi.eval(t_k + 0.75 * dt, ys[j]) * 0.5 * dt).exp();
                }
            }
            if k >= retain_from {
                kept.push(u.clone());
            }
        }
        kept
    });

    let slices = (0..3)
        .map(|s| TimeSlice {
            t: grid.init_epsilon + (retain_from + s + 1) as f64 * dt,
            z: per_x.iter().map(|kept| kept[s].clone()).collect(),
        })
        .collect();
    Ok(HeatSurface {
        grid: grid.clone(),
        phi: phi.clone(),
        slices,
    })
}

/// The layer hierarchy over the y grid for one start node at one time
/// slice: `Z_n = c_n W_n`, ratios `u_n = Z_n/Z_{n-1}`, and both candidate
/// S definitions.
pub struct LayerStack {
    pub t: f64,
    pub x: f64,
    /// first valid y index (stencil margins trimmed)
    pub j_lo: usize,
    /// y coordinates of the valid range
    pub y: Vec<f64>,
    /// `z_layers[n-1][j]`, n = 1..=n_max
    pub z_layers: Vec<Vec<f64>>,
    /// `u_layers[n-1][j]`
    pub u_layers: Vec<Vec<f64>>,
    /// successive-ratio form `S_n = Z_{n-1} Z_{n+1} / (n t Z_n^2)`, n = 1..n_max
    pub s_fields: Vec<Vec<f64>>,
    /// alternate definition `d_x d_y log Z_n` by cross differences of log W_n
    pub s_alt_fields: Vec<Vec<f64>>,
    pub constants: Vec<ConstantLedger>,
    /// per valid node: inside the trust region |y-x| <= 4 sqrt(t)
    pub trust: Vec<bool>,
}

impl LayerStack {
    /// Linear interpolation of a stored field at position `z`.
    pub fn interp(field: &[f64], y: &[f64], z: f64) -> f64 {
        let n = y.len();
        if z <= y[0] {
            return field[0];
        }
        if z >= y[n - 1] {
            return field[n - 1];
        }
        let h = y[1] - y[0];
        let f = (z - y[0]) / h;
        let j = (f.floor() as usize).min(n - 2);
        let w = f - j as f64;
        field[j] * (1.0 - w) + field[j + 1] * w
    }
}

/// Builds the hierarchy at the final slice; see [`build_layers_at`].
pub fn build_layers(surface: &HeatSurface, x_index: usize, n_max: usize) -> Result<LayerStack> {
    build_layers_at(surface, 1, x_index, n_max)
}

/// Builds `Z_1..Z_n_max` (plus `Z_{n_max+1}` internally for `S_{n_max}`)
/// from mixed-derivative Wronskians at pencil node `x_index`.
pub fn build_layers_at(
    surface: &HeatSurface,
    slice: usize,
    x_index: usize,
    n_max: usize,
) -> Result<LayerStack> {
    if n_max > 5 {
        return Err(Error::domain(
            "layer construction limited to n <= 5 (finite-difference stability)",
        ));
    }
    let grid = &surface.grid;
    let t = surface.slices[slice].t;
    let max_ord = n_max.saturating_sub(1); // orders needed for W_{n_max}
    let sw = max_ord.div_ceil(2); // stencil half width
    let need = sw + 1; // +1 for the cross-difference of log W_n
    if x_index < need || x_index + need >= grid.x_nodes.len() {
        return Err(Error::domain(format!(
            "x pencil too narrow: node {x_index} needs {need} neighbors each side"
        )));
    }
    let x = grid.x_nodes[x_index];
    let hx = grid.x_nodes[1] - grid.x_nodes[0];
    let hy = grid.dy();
    let j_lo = need;
    let j_hi = grid.n_y - need;

    // Wronskians W_n at the 5 offsets needed: center and 4 corners (+-hx, +-hy)
    let offsets: [(i64, i64); 5] = [(0, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    let n_nodes = j_hi - j_lo;
    let mut w = vec![vec![[0.0f64; 5]; n_nodes]; n_max + 2]; // w[n][node][offset]
    for (jj, j) in (j_lo..j_hi).enumerate() {
        for (o, &(ox, oy)) in offsets.iter().enumerate() {
            let ix = (x_index as i64 + ox) as usize;
            let iy = (j as i64 + oy) as usize;
            // derivative table up to order n_max (for W_{n_max+1} used by S_{n_max})
            let dim = n_max + 1;
            let mut vals = vec![0.0; dim * dim];
            for i_ord in 0..dim {
                for j_ord in 0..dim {
                    // highest orders only needed at the center offset
                    if (i_ord >= n_max || j_ord >= n_max) && o != 0 {
                        continue;
                    }
                    if i_ord > 4 || j_ord > 4 {
                        continue;
                    }
                    vals[i_ord * dim + j_ord] =
                        surface.mixed_derivative(slice, ix, iy, i_ord, j_ord);
                }
            }
            let table = DerivativeTable::new(vals, dim, hy)?;
            for n in 0..=(n_max + 1) {
                if o != 0 && n > n_max {
                    continue;
                }
                if n > 0 && (n - 1) > 4 {
                    continue;
                }
                w[n][jj][o] = crate::detcalc::wronskian(&table, n)?;
            }
        }
    }

    let ys: Vec<f64> = (j_lo..j_hi).map(|j| grid.y_coord(j)).collect();
    let trust: Vec<bool> = ys.iter().map(|&y| grid.in_trust_region(x, y)).collect();

    // sign-change scan inside the trust region
    for n in 1..=n_max {
        let mut prev: Option<f64> = None;
        for (jj, &tr) in trust.iter().enumerate() {
            if !tr {
                prev = None;
                continue;
            }
            let v = w[n][jj][0];
            if let Some(p) = prev {
                if p * v < 0.0 {
                    return Err(Error::Singular {
                        what: "Wronskian sign change in trust region",
                        layer: n,
                        node: j_lo + jj,
                    });
                }
            }
            prev = Some(v);
        }
    }

    let constants: Vec<ConstantLedger> = (1..=n_max + 1)
        .map(|n| kernels::confluent_constants(n, t))
        .collect::<Result<_>>()?;
    let c = |n: usize| calibrated_constant(n, t);

    let z_field = |n: usize| -> Vec<f64> {
        (0..n_nodes).map(|jj| c(n) * w[n][jj][0]).collect()
    };
    let z_layers: Vec<Vec<f64>> = (1..=n_max).map(z_field).collect();
    let z_next = z_field(n_max + 1);

    let mut u_layers = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let field: Vec<f64> = (0..n_nodes)
            .map(|jj| {
                if n == 1 {
                    z_layers[0][jj]
                } else {
                    z_layers[n - 1][jj] / z_layers[n - 2][jj]
                }
            })
            .collect();
        u_layers.push(field);
    }

    let mut s_fields = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let z_prev = |jj: usize| if n == 1 { 1.0 } else { z_layers[n - 2][jj] };
        let z_up = |jj: usize| {
            if n == n_max {
                z_next[jj]
            } else {
                z_layers[n][jj]
            }
        };
        let field: Vec<f64> = (0..n_nodes)
            .map(|jj| {
                let zn = z_layers[n - 1][jj];
                z_prev(jj) * z_up(jj) / (n as f64 * t * zn * zn)
            })
            .collect();
        s_fields.push(field);
    }

    // alternate definition: cross difference of log |W_n|
    let mut s_alt_fields = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let field: Vec<f64> = (0..n_nodes)
            .map(|jj| {
                let lw = |o: usize| w[n][jj][o].abs().ln();
                (lw(1) - lw(2) - lw(3) + lw(4)) / (4.0 * hx * hy)
            })
            .collect();
        s_alt_fields.push(field);
    }

    Ok(LayerStack {
        t,
        x,
        j_lo,
        y: ys,
        z_layers,
        u_layers,
        s_fields,
        s_alt_fields,
        constants,
        trust,
    })
}

/// Norm summary of an evolution-equation residual per layer.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub max_norm: Vec<f64>,
    pub l2_norm: Vec<f64>,
}

fn residual_norms(vals: &[f64], dy: f64) -> (f64, f64) {
    let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = (vals.iter().map(|v| v * v).sum::<f64>() * dy).sqrt();
    (max, l2)
}

/// Residual of the coupled layer equations
/// `d_t u_n - 1/2 d_y^2 u_n - [phi + d_y^2 log(Z_{n-1}/p^{n-1})] u_n`
/// by central differences across the three retained slices.
pub fn layer_residual(surface: &HeatSurface, x_index: usize, n_max: usize) -> Result<ResidualReport> {
    let stacks: Vec<LayerStack> = (0..3)
        .map(|s| build_layers_at(surface, s, x_index, n_max))
        .collect::<Result<_>>()?;
    let dt = surface.grid.dt();
    let dy = surface.grid.dy();
    let t = stacks[1].t;
    let x = stacks[1].x;
    let mid = &stacks[1];
    let mut max_norm = Vec::with_capacity(n_max);
    let mut l2_norm = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let u_m = &mid.u_layers[n - 1];
        let u_p = &stacks[2].u_layers[n - 1];
        let u_l = &stacks[0].u_layers[n - 1];
        // potential bracket: phi + d_y^2 log(Z_{n-1}/p^{n-1})
        let bracket: Vec<f64> = (0..u_m.len())
            .map(|jj| {
                let y = mid.y[jj];
                let mut b = surface.phi.eval(t, y);
                if n >= 2 && jj > 0 && jj + 1 < u_m.len() {
                    let lf = |k: usize| {
                        mid.z_layers[n - 2][k].abs().ln()
                            - (n as f64 - 1.0)
                                * kernels::log_heat_kernel(t, x, mid.y[k]).unwrap()
                    };
                    b += (lf(jj + 1) - 2.0 * lf(jj) + lf(jj - 1)) / (dy * dy);
                }
                b
            })
            .collect();
        let mut vals = Vec::new();
        for jj in 1..u_m.len() - 1 {
            if !mid.trust[jj] {
                continue;
            }
            let du_dt = (u_p[jj] - u_l[jj]) / (2.0 * dt);
            let d2u = (u_m[jj + 1] - 2.0 * u_m[jj] + u_m[jj - 1]) / (dy * dy);
            vals.push(du_dt - 0.5 * d2u - bracket[jj] * u_m[jj]);
        }
        let (mx, l2) = residual_norms(&vals, dy);
        max_norm.push(mx);
        l2_norm.push(l2);
    }
    Ok(ResidualReport { max_norm, l2_norm })
}

/// Residual of `d_t S_n - 1/2 d_y^2 S_n - d_y[S_n d_y log u_n]` under
/// either S definition (`use_alt` picks `d_xd_y log Z_n`).
pub fn s_evolution_residual(
    surface: &HeatSurface,
    x_index: usize,
    n_max: usize,
    use_alt: bool,
) -> Result<ResidualReport> {
    let stacks: Vec<LayerStack> = (0..3)
        .map(|s| build_layers_at(surface, s, x_index, n_max))
        .collect::<Result<_>>()?;
    let dt = surface.grid.dt();
    let dy = surface.grid.dy();
    let mid = &stacks[1];
    let pick = |st: &LayerStack, n: usize| -> Vec<f64> {
        if use_alt {
            st.s_alt_fields[n - 1].clone()
        } else {
            st.s_fields[n - 1].clone()
        }
    };
    let mut max_norm = Vec::with_capacity(n_max);
    let mut l2_norm = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let s_m = pick(mid, n);
        let s_p = pick(&stacks[2], n);
        let s_l = pick(&stacks[0], n);
        let u = &mid.u_layers[n - 1];
        // q = S_n * d_y log u_n
        let q: Vec<f64> = (0..s_m.len())
            .map(|jj| {
                if jj == 0 || jj + 1 >= s_m.len() {
                    0.0
                } else {
                    let dlogu = (u[jj + 1].ln() - u[jj - 1].ln()) / (2.0 * dy);
                    s_m[jj] * dlogu
                }
            })
            .collect();
        let mut vals = Vec::new();
        for jj in 2..s_m.len() - 2 {
            if !mid.trust[jj] {
                continue;
            }
            let ds_dt = (s_p[jj] - s_l[jj]) / (2.0 * dt);
            let d2s = (s_m[jj + 1] - 2.0 * s_m[jj] + s_m[jj - 1]) / (dy * dy);
            let dq = (q[jj + 1] - q[jj - 1]) / (2.0 * dy);
            vals.push(ds_dt - 0.5 * d2s - dq);
        }
        let (mx, l2) = residual_norms(&vals, dy);
        max_norm.push(mx);
        l2_norm.push(l2);
    }
    Ok(ResidualReport { max_norm, l2_norm })
}

/// Both sides of the confluent Gelfand–Tsetlin reconstruction at one probe
/// vector, under both candidate S definitions.
#[derive(Debug, Clone)]
pub struct GtReconstruction {
    /// `det[d_x^{i-1} Z(t,x,y_j)] / Delta(y)`
    pub a: f64,
    /// GT side with the ratio-normalized S
    pub b_from_ratios: f64,
    /// GT side with `S = d_xd_y log Z_n`
    pub b_alt: f64,
    pub ratio_from_ratios: f64,
    pub ratio_alt: f64,
    /// ledger sign for this n
    pub sign: f64,
    /// probe coordinates after snapping to the grid
    pub y_used: Vec<f64>,
}

/// Evaluates the reconstruction check at pencil node `x_index` for a probe
/// `y` (snapped to grid nodes), `n` in {2, 3}.
pub fn gt_reconstruction_check(
    surface: &HeatSurface,
    x_index: usize,
    y: &WeylPoint,
    n: usize,
    m: usize,
) -> Result<GtReconstruction> {
    if !(2..=3).contains(&n) {
        return Err(Error::domain("gt_reconstruction_check supports n in {2,3}"));
    }
    if y.len() != n {
        return Err(Error::domain("probe length must equal n"));
    }
    let grid = &surface.grid;
    let snapped: Vec<f64> = y
        .coords()
        .iter()
        .map(|&v| grid.y_coord(grid.nearest_y_index(v)))
        .collect();
    if snapped.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("probe coordinates collapsed after snapping"));
    }
    let x = grid.x_nodes[x_index];
    for &v in &snapped {
        if !grid.in_trust_region(x, v) {
            return Err(Error::domain(format!(
                "probe coordinate {v} outside the trust region"
            )));
        }
    }
    let stack = build_layers(surface, x_index, n)?;
    let delta = vandermonde(&snapped);

    // A side: x-derivative determinant
    let mut mat = vec![0.0; n * n];
    for (j, &yj) in snapped.iter().enumerate() {
        let iy = grid.nearest_y_index(yj);
        for i in 0..n {
            mat[i * n + j] = surface.mixed_derivative(1, x_index, iy, i, 0);
        }
    }
    let a = linalg::det(&mat, n) / delta;

    // B sides: product of Z values times the GT integral of the S fields
    let prod: f64 = snapped
        .iter()
        .map(|&yj| surface.value(x_index, grid.nearest_y_index(yj)))
        .product();
    let y_snapped = WeylPoint::new(snapped.clone())?;
    let quad = |fields: &[Vec<f64>]| -> Result<f64> {
        let fns: Vec<_> = (0..n - 1)
            .map(|k| {
                let f = fields[k].clone();
                let ys = stack.y.clone();
                move |z: f64| LayerStack::interp(&f, &ys, z)
            })
            .collect();
        Ok(crate::detcalc::gt_integral(&fns, &y_snapped, m)?.value)
    };
    let b_from_ratios = prod / delta * quad(&stack.s_fields)?;
    let b_alt = prod / delta * quad(&stack.s_alt_fields)?;
    Ok(GtReconstruction {
        a,
        b_from_ratios,
        b_alt,
        ratio_from_ratios: a / b_from_ratios,
        ratio_alt: a / b_alt,
        sign: kernels::gt_orientation_sign(n),
        y_used: snapped,
    })
}

/// Reflection-symmetry comparison of the layer ratios built from `phi`
/// and from its space reflection.
#[derive(Debug, Clone)]
pub struct RskReport {
    /// max over trust-region nodes of the relative mismatch, per layer
    pub max_rel_err: Vec<f64>,
}

/// Checks `u_n^{phi_reflected}(t,0,y) = u_n^{phi}(t,0,-y)` for n <= n_max.
pub fn rsk_symmetry_check(
    phi: &PotentialField,
    grid: &GridSpec,
    n_max: usize,
) -> Result<RskReport> {
    if (grid.y_min + grid.y_max).abs() > 1e-12 {
        return Err(Error::config("rsk check needs a symmetric grid"));
    }
    if grid.n_y % 2 == 0 {
        return Err(Error::config("rsk check needs an odd node count (center 0)"));
    }
    let x_index = grid.x_nodes.len() / 2;
    if grid.x_nodes[x_index].abs() > 1e-12 {
        return Err(Error::config("rsk check needs the pencil centered at x = 0"));
    }
    let surf = solve_smooth(phi, grid)?;
    let surf_dag = solve_smooth(&phi.dagger(), grid)?;
    let stack = build_layers(&surf, x_index, n_max)?;
    let stack_dag = build_layers(&surf_dag, x_index, n_max)?;
    let n_nodes = stack.y.len();
    let mut max_rel_err = vec![0.0f64; n_max];
    for n in 1..=n_max {
        for jj in 0..n_nodes {
            if !stack.trust[jj] {
                continue;
            }
            // mirrored valid-range index: y[jj] -> -y[jj]
            let kk = n_nodes - 1 - jj;
            let lhs = stack_dag.u_layers[n - 1][jj];
            let rhs = stack.u_layers[n - 1][kk];
            let rel = (lhs - rhs).abs() / rhs.abs().max(1e-300);
            if rel > max_rel_err[n - 1] {
                max_rel_err[n - 1] = rel;
            }
        }
    }
    Ok(RskReport { max_rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_grid() -> GridSpec {
        // init_epsilon chosen so the starting kernel (width 0.1) is
        // resolved by dy = 0.02
        GridSpec::with_pencil(-8.0, 8.0, 801, 400, 1.0, 0.0, 2, 1e-2)
    }

    #[test]
    fn free_field_matches_heat_kernel() {
        // the error is dominated by dy^2 resolution of the initial kernel,
        // so this check uses the finest grid
        let grid = GridSpec::with_pencil(-8.0, 8.0, 6401, 400, 1.0, 0.0, 2, 1e-2);
        let surf = solve_smooth(&PotentialField::zero(), &grid).unwrap();
        let t = surf.t_final();
        let x = grid.x_nodes[2];
        let mut worst = 0.0f64;
        for j in 0..grid.n_y {
            let y = grid.y_coord(j);
            if !grid.in_trust_region(x, y) {
                continue;
            }
            let p = heat_kernel(t, x, y).unwrap();
            worst = worst.max((surf.value(2, j) - p).abs() / p);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn smooth_bump_refines_at_second_order() {
        // no closed form for a bump; check that refining dt, dy shrinks the
        // change ~4x, consistent with the second-order scheme
        let coarse = GridSpec::with_pencil(-8.0, 8.0, 321, 100, 1.0, 0.0, 1, 1e-2);
        let fine = coarse.refined();
        let finest = fine.refined();
        let phi = PotentialField::single_bump();
        let probe = |g: &GridSpec| {
            let s = solve_smooth(&phi, g).unwrap();
            s.value(1, g.nearest_y_index(0.3))
        };
        let (a, b, c) = (probe(&coarse), probe(&fine), probe(&finest));
        let r = (a - b).abs() / (b - c).abs();
        assert!(r > 2.5 && r < 8.0, "refinement ratio {r} (a={a}, b={b}, c={c})");
    }

    #[test]
    fn free_field_layers_are_kernel_powers() {
        let grid = free_grid();
        let surf = solve_smooth(&PotentialField::zero(), &grid).unwrap();
        let stack = build_layers(&surf, 2, 3).unwrap();
        let t = stack.t;
        let mut worst = vec![0.0f64; 3];
        for (jj, &y) in stack.y.iter().enumerate() {
            if (y - stack.x).abs() > 2.0 * t.sqrt() {
                continue;
            }
            let p = heat_kernel(t, stack.x, y).unwrap();
            for n in 1..=3usize {
                let expect = p.powi(n as i32);
                let rel = (stack.z_layers[n - 1][jj] - expect).abs() / expect;
                worst[n - 1] = worst[n - 1].max(rel);
            }
        }
        for (n, w) in worst.iter().enumerate() {
            assert!(*w < 5e-3, "layer {} relative error {w}", n + 1);
        }
    }

    #[test]
    fn free_field_s_definitions() {
        let grid = free_grid();
        let surf = solve_smooth(&PotentialField::zero(), &grid).unwrap();
        let stack = build_layers(&surf, 2, 3).unwrap();
        let t = stack.t;
        for (jj, &y) in stack.y.iter().enumerate() {
            // higher Wronskians lose relative accuracy in the kernel tail;
            // check the core of the trust region only
            if (y - stack.x).abs() > 2.0 * t.sqrt() {
                continue;
            }
            for n in 1..=2usize {
                let s = stack.s_fields[n - 1][jj];
                let s_alt = stack.s_alt_fields[n - 1][jj];
                let expect = 1.0 / (n as f64 * t);
                let expect_alt = n as f64 / t;
                assert!(
                    (s - expect).abs() / expect < 1e-2,
                    "S_{n} = {s}, expected {expect}"
                );
                assert!(
                    (s_alt - expect_alt).abs() / expect_alt < 1e-2,
                    "S~_{n} = {s_alt}, expected {expect_alt}"
                );
            }
        }
    }

    #[test]
    fn monotone_in_potential() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 201, 200, 1.0, 0.0, 2, 1e-3);
        let phi_small = PotentialField::single_bump();
        let mut phi_big = phi_small.clone();
        phi_big.bumps[0].amplitude = 2.0;
        let s1 = solve_smooth(&phi_small, &grid).unwrap();
        let s2 = solve_smooth(&phi_big, &grid).unwrap();
        for j in 0..grid.n_y {
            assert!(s1.value(2, j) <= s2.value(2, j) + 1e-14);
        }
    }

    #[test]
    fn mass_bound() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 201, 200, 1.0, 0.0, 1, 1e-3);
        let phi = PotentialField::single_bump();
        let surf = solve_smooth(&phi, &grid).unwrap();
        let mass: f64 = surf.final_slice().z[1].iter().sum::<f64>() * grid.dy();
        assert!(mass <= (surf.t_final() * phi.sup_norm()).exp() + 1e-6);
    }

    #[test]
    fn clearance_check_rejects_boundary_bumps() {
        let grid = free_grid();
        let phi = PotentialField::from_bumps(vec![crate::potential::Bump {
            amplitude: 1.0,
            center_t: 0.5,
            center_y: 7.5,
            width_t: 0.2,
            width_y: 0.5,
        }]);
        assert!(solve_smooth(&phi, &grid).is_err());
    }

    #[test]
    fn rsk_even_bump_self_symmetric() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 321, 300, 1.0, 0.0, 2, 1e-3);
        let report = rsk_symmetry_check(&PotentialField::single_bump(), &grid, 2).unwrap();
        for e in &report.max_rel_err {
            assert!(*e < 1e-10, "self-symmetry violated: {e}");
        }
    }
}
