//! White-noise lattice solver for the stochastic heat equation with
//! shared-noise multi-start solves, determinants of the solution kernel,
//! the n=2 ratio identity, the flow property, and noise-shift
//! (Cameron–Martin) ensemble experiments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::GridSpec;
use crate::kernels::heat_kernel;
use crate::linalg;
use crate::pdesolve::{solve_smooth, DiffusionStepper, TimeSlice};
use crate::potential::PotentialField;
use crate::rngstream::stream_rng;

/// Space-time white-noise increments on the solver lattice, regenerable
/// bit-exactly from `(seed, shape)`. Rows are time steps.
pub struct NoiseField {
    pub seed: u64,
    pub n_t: usize,
    pub n_y: usize,
    pub dt: f64,
    pub dy: f64,
    data: Vec<f64>,
}

impl NoiseField {
    /// Generates the field; each row comes from its own derived stream so
    /// the result is independent of thread scheduling.
    pub fn generate(seed: u64, n_t: usize, n_y: usize, dt: f64, dy: f64) -> Self {
        let rows: Vec<Vec<f64>> = exec::map_indexed(n_t, |k| {
            let mut rng = stream_rng(seed, &[0xa015, k as u64]);
            (0..n_y).map(|_| StandardNormal.sample(&mut rng)).collect()
        });
        NoiseField {
            seed,
            n_t,
            n_y,
            dt,
            dy,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Field sized for one full solve on `grid` (one row per step,
    /// including the step past the final time).
    pub fn for_grid(seed: u64, grid: &GridSpec) -> Self {
        Self::generate(seed, grid.n_t + 1, grid.n_y, grid.dt(), grid.dy())
    }

    /// All-zero field with the same shape (the deterministic reduction).
    pub fn zeroed(grid: &GridSpec) -> Self {
        NoiseField {
            seed: 0,
            n_t: grid.n_t + 1,
            n_y: grid.n_y,
            dt: grid.dt(),
            dy: grid.dy(),
            data: vec![0.0; (grid.n_t + 1) * grid.n_y],
        }
    }

    /// The full increment array, row-major over (time step, node).
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_y..(k + 1) * self.n_y]
    }

    /// Sample mean and variance over the whole field.
    pub fn sample_moments(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        let var = self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }

    /// Writes the replay file: header `seed, n_t, n_y` as little-endian
    /// u64 and `dt, dy` as little-endian f64, then the row-major body.
    pub fn export(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.n_t as u64).to_le_bytes())?;
        w.write_all(&(self.n_y as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.dy.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut b8 = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let seed = read_u64(&mut r)?;
        let n_t = read_u64(&mut r)? as usize;
        let n_y = read_u64(&mut r)? as usize;
        let mut f8 = [0u8; 8];
        r.read_exact(&mut f8)?;
        let dt = f64::from_le_bytes(f8);
        r.read_exact(&mut f8)?;
        let dy = f64::from_le_bytes(f8);
        let mut data = vec![0.0f64; n_t * n_y];
        for v in data.iter_mut() {
            r.read_exact(&mut f8)?;
            *v = f64::from_le_bytes(f8);
        }
        if r.read(&mut f8)? != 0 {
            return Err(Error::config("replay file has trailing bytes"));
        }
        Ok(NoiseField {
            seed,
            n_t,
            n_y,
            dt,
            dy,
            data,
        })
    }
}

/// Lattice solution on the start-node pencil with the same retained
/// slices as the smooth solver.
pub struct LatticeSolution {
    pub grid: GridSpec,
    pub noise_seed: u64,
    pub slices: Vec<TimeSlice>,
    /// sites where the noise multiplier went non-positive
    pub negative_sites: usize,
}

impl LatticeSolution {
    pub fn final_slice(&self) -> &TimeSlice {
        &self.slices[1]
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.slices[1].z[ix][iy]
    }

    pub fn t_final(&self) -> f64 {
        self.slices[1].t
    }
}

fn check_noise_shape(noise: &NoiseField, grid: &GridSpec) -> Result<()> {
    if noise.n_t < grid.n_t + 1 || noise.n_y != grid.n_y {
        return Err(Error::config(format!(
            "noise shape {}x{} does not cover grid {}x{}",
            noise.n_t,
            noise.n_y,
            grid.n_t + 1,
            grid.n_y
        )));
    }
    if (noise.dt - grid.dt()).abs() > 1e-12 || (noise.dy - grid.dy()).abs() > 1e-12 {
        return Err(Error::config("noise steps do not match the grid"));
    }
    Ok(())
}

struct Evolver<'a> {
    noise: &'a NoiseField,
    grid: &'a GridSpec,
    phi: Option<&'a PotentialField>,
    stepper: DiffusionStepper,
}

impl<'a> Evolver<'a> {
    fn new(noise: &'a NoiseField, grid: &'a GridSpec, phi: Option<&'a PotentialField>) -> Self {
        Evolver {
            noise,
            grid,
            phi,
            stepper: DiffusionStepper::new(grid.n_y, grid.dy(), grid.dt() / 2.0),
        }
    }

    /// One step `D_half, noise multiply, D_half`; returns the count of
    /// non-positive multipliers.
    fn step(&self, u: &mut [f64], k: usize) -> usize {
        let dt = self.grid.dt();
        let s = (dt / self.grid.dy()).sqrt();
        let row = self.noise.row(k);
        self.stepper.apply(u);
        let mut neg = 0usize;
        let t_mid = self.grid.init_epsilon + k as f64 * dt + dt / 2.0;
        for j in 1..u.len() - 1 {
            let mut m = 1.0 + row[j] * s;
            if let Some(phi) = self.phi {
                m += phi.eval(t_mid, self.grid.y_coord(j)) * dt;
            }
            if m <= 0.0 {
                neg += 1;
            }
            u[j] *= m;
        }
        self.stepper.apply(u);
        neg
    }
}

fn evolve_inner(
    noise: &NoiseField,
    grid: &GridSpec,
    phi: Option<&PotentialField>,
    snapshot_step: Option<usize>,
) -> Result<(LatticeSolution, Option<Vec<Vec<f64>>>)> {
    grid.validate()?;
    check_noise_shape(noise, grid)?;
    let n_steps = grid.n_t + 1;
    let retain_from = grid.n_t - 2; // slices at t_final - dt, t_final, t_final + dt
    let ev = Evolver::new(noise, grid, phi);
    let results: Vec<(Vec<Vec<f64>>, Option<Vec<f64>>, usize)> =
        exec::map_indexed(grid.x_nodes.len(), |ix| {
            let x = grid.x_nodes[ix];
            let mut u: Vec<f64> = grid
                .y_coords()
                .iter()
                .map(|&y| heat_kernel(grid.init_epsilon, x, y).unwrap())
                .collect();
            u[0] = 0.0;
            u[grid.n_y - 1] = 0.0;
            let mut kept = Vec::with_capacity(3);
            let mut snap = None;
            let mut neg = 0usize;
            for k in 0..n_steps {
                neg += ev.step(&mut u, k);
                if Some(k + 1) == snapshot_step {
                    snap = Some(u.clone());
                }
                if k >= retain_from {
                    kept.push(u.clone());
                }
            }
            (kept, snap, neg)
        });
    let negative_sites: usize = results.iter().map(|r| r.2).sum();
    let budget = grid.x_nodes.len() * n_steps * grid.n_y;
    if negative_sites * 1000 > budget {
        return Err(Error::config(format!(
            "noise multiplier non-positive at {negative_sites} of {budget} sites; decrease dt"
        )));
    }
    let slices = (0..3)
        .map(|s| TimeSlice {
            t: grid.init_epsilon + (retain_from + s + 1) as f64 * grid.dt(),
            z: results.iter().map(|r| r.0[s].clone()).collect(),
        })
        .collect();
    let snapshot = snapshot_step.map(|_| {
        results
            .iter()
            .map(|r| r.1.clone().expect("snapshot step within range"))
            .collect()
    });
    Ok((
        LatticeSolution {
            grid: grid.clone(),
            noise_seed: noise.seed,
            slices,
            negative_sites,
        },
        snapshot,
    ))
}

/// Evolves the lattice equation with the Ito post-point multiplier
/// `1 + xi sqrt(dt/dy)` between the two diffusion half steps. All start
/// nodes consume the identical noise field.
pub fn evolve_she(noise: &NoiseField, grid: &GridSpec) -> Result<LatticeSolution> {
    Ok(evolve_inner(noise, grid, None, None)?.0)
}

/// Same scheme with the lattice Cameron–Martin shift: multiplier
/// `1 + xi sqrt(dt/dy) + phi dt`.
pub fn evolve_she_shifted(
    noise: &NoiseField,
    grid: &GridSpec,
    phi: &PotentialField,
) -> Result<LatticeSolution> {
    Ok(evolve_inner(noise, grid, Some(phi), None)?.0)
}

/// Exact two-point second moment `E[Z(t,x,y_a) Z(t,x,y_b)]` at the final
/// time, row-major over `(a, b)`. The pair expectation closes step by
/// step because the multipliers are independent of the past:
/// `E[m_a m_b] = 1 + (dt/dy) 1{a=b}`, so no sampling is involved.
pub fn pair_moment_exact(grid: &GridSpec, x_index: usize) -> Result<Vec<f64>> {
    grid.validate()?;
    let n = grid.n_y;
    let stepper = DiffusionStepper::new(n, grid.dy(), grid.dt() / 2.0);
    let x = grid.x_nodes[x_index];
    let mut init: Vec<f64> = grid
        .y_coords()
        .iter()
        .map(|&y| heat_kernel(grid.init_epsilon, x, y).unwrap())
        .collect();
    init[0] = 0.0;
    init[n - 1] = 0.0;
    let mut m: Vec<f64> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            m.push(init[a] * init[b]);
        }
    }
    let gain = 1.0 + grid.dt() / grid.dy();
    let transpose = |m: &mut [f64]| {
        for a in 0..n {
            for b in 0..a {
                m.swap(a * n + b, b * n + a);
            }
        }
    };
    let half = |m: &mut Vec<f64>| {
        // (D ⊗ D) via row solves on both orientations
        exec::for_each_chunk_mut(m, n, |_, row| stepper.apply(row));
        transpose(m);
        exec::for_each_chunk_mut(m, n, |_, row| stepper.apply(row));
        transpose(m);
    };
    for _ in 0..grid.n_t {
        half(&mut m);
        for j in 1..n - 1 {
            m[j * n + j] *= gain;
        }
        half(&mut m);
    }
    Ok(m)
}

/// Determinant of the solution kernel over chosen start and end nodes.
#[derive(Debug, Clone, Copy)]
pub struct KmDet {
    pub det: f64,
    /// det normalized by both Vandermondes
    pub hat_z: f64,
}

/// `det[Z(t, x_i, y_j)]` over the shared-noise solution; node index lists
/// must give strictly decreasing coordinates.
pub fn km_determinant(sol: &LatticeSolution, x_idx: &[usize], y_idx: &[usize]) -> Result<KmDet> {
    let n = x_idx.len();
    if y_idx.len() != n || n == 0 {
        return Err(Error::domain("index lists must be equal and non-empty"));
    }
    let xs: Vec<f64> = x_idx.iter().map(|&i| sol.grid.x_nodes[i]).collect();
    let ys: Vec<f64> = y_idx.iter().map(|&j| sol.grid.y_coord(j)).collect();
    if xs.windows(2).any(|w| w[0] <= w[1]) || ys.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("coordinates must be strictly decreasing"));
    }
    let mut mat = vec![0.0; n * n];
    for (a, &ix) in x_idx.iter().enumerate() {
        for (b, &jy) in y_idx.iter().enumerate() {
            mat[a * n + b] = sol.value(ix, jy);
        }
    }
    let det = linalg::det(&mat, n);
    let norm = crate::kernels::vandermonde(&xs) * crate::kernels::vandermonde(&ys);
    Ok(KmDet {
        det,
        hat_z: det / norm,
    })
}

/// Outcome of the n=2 ratio identity on one ensemble.
#[derive(Debug, Clone)]
pub struct RatioIdentityReport {
    /// per surviving realization: |LHS - RHS| / |LHS| with the squared
    /// denominator convention (the continuum integrand)
    pub rel_diff: Vec<f64>,
    /// same with the product denominator (telescopes exactly)
    pub rel_diff_exact: Vec<f64>,
    pub median_rel: f64,
    pub skipped: usize,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        f64::NAN
    } else {
        v[v.len() / 2]
    }
}

/// Checks, per realization, that the x-difference of the ratio
/// `Z(x+h, y)/Z(x, y)` between `y_2` and `y_1` equals the step-sum of the
/// normalized 2x2 confluent determinants over `[y_2, y_1]`.
pub fn ratio_identity_check(
    grid: &GridSpec,
    x_index: usize,
    i_y1: usize,
    i_y2: usize,
    n_real: usize,
    seed: u64,
) -> Result<RatioIdentityReport> {
    if x_index + 1 >= grid.x_nodes.len() {
        return Err(Error::domain("x_index needs a right pencil neighbor"));
    }
    if i_y2 >= i_y1 {
        return Err(Error::domain("need i_y1 > i_y2 (y1 > y2)"));
    }
    let x = grid.x_nodes[x_index];
    let y1 = grid.y_coord(i_y1);
    let y2 = grid.y_coord(i_y2);
    if !grid.in_trust_region(x, y1) || !grid.in_trust_region(x, y2) {
        return Err(Error::domain("probe interval outside the trust region"));
    }
    let h = grid.x_nodes[x_index + 1] - grid.x_nodes[x_index];
    let dy = grid.dy();
    let floor = 1e-300;
    let per_real: Vec<Option<(f64, f64)>> = exec::map_indexed(n_real, |r| {
        let noise = NoiseField::for_grid(seed.wrapping_add(r as u64), grid);
        let sol = evolve_she(&noise, grid).ok()?;
        let z = |ix: usize, jy: usize| sol.value(ix, jy);
        for j in i_y2..=i_y1 {
            if z(x_index, j) < floor || z(x_index + 1, j) < floor {
                return None;
            }
        }
        let ratio = |j: usize| z(x_index + 1, j) / z(x_index, j);
        let lhs = (ratio(i_y1) - ratio(i_y2)) / (h * (y1 - y2));
        let mut rhs = 0.0;
        let mut rhs_exact = 0.0;
        for j in i_y2..i_y1 {
            let det = z(x_index + 1, j + 1) * z(x_index, j) - z(x_index + 1, j) * z(x_index, j + 1);
            let hat = det / (h * dy);
            rhs += dy * hat / (z(x_index, j) * z(x_index, j));
            rhs_exact += dy * hat / (z(x_index, j) * z(x_index, j + 1));
        }
        rhs /= y1 - y2;
        rhs_exact /= y1 - y2;
        let scale = lhs.abs().max(1e-300);
        Some(((lhs - rhs).abs() / scale, (lhs - rhs_exact).abs() / scale))
    });
    let skipped = per_real.iter().filter(|o| o.is_none()).count();
    let mut rel_diff = Vec::new();
    let mut rel_diff_exact = Vec::new();
    for o in per_real.into_iter().flatten() {
        rel_diff.push(o.0);
        rel_diff_exact.push(o.1);
    }
    if rel_diff.is_empty() {
        return Err(Error::Infeasible("all realizations skipped".into()));
    }
    let median_rel = median(&mut rel_diff.clone());
    Ok(RatioIdentityReport {
        rel_diff,
        rel_diff_exact,
        median_rel,
        skipped,
    })
}

/// Relative error of the semigroup composition per start node.
#[derive(Debug, Clone)]
pub struct FlowReport {
    pub rel_err: Vec<f64>,
    pub t_split: f64,
}

/// Splits the march at step `k_split`, re-solves the second segment from
/// every lattice node (discrete delta data, same noise rows), and
/// compares the composition against the direct solution at the final
/// time on the trust region.
pub fn flow_property_check(noise: &NoiseField, grid: &GridSpec, k_split: usize) -> Result<FlowReport> {
    if k_split == 0 || k_split >= grid.n_t {
        return Err(Error::domain("split step must be inside the march"));
    }
    let (sol, snap) = evolve_inner(noise, grid, None, Some(k_split))?;
    let snap = snap.expect("snapshot requested");
    let n_y = grid.n_y;
    let dy = grid.dy();
    let ev = Evolver::new(noise, grid, None);
    // Green columns of the second segment: one march per start node z
    let green: Vec<Vec<f64>> = exec::map_indexed(n_y, |z| {
        let mut u = vec![0.0; n_y];
        if z > 0 && z + 1 < n_y {
            u[z] = 1.0 / dy;
        }
        for k in k_split..grid.n_t {
            ev.step(&mut u, k);
        }
        u
    });
    let mut rel_err = Vec::with_capacity(grid.x_nodes.len());
    for (ix, &x) in grid.x_nodes.iter().enumerate() {
        let mut worst = 0.0f64;
        for j in 0..n_y {
            let y = grid.y_coord(j);
            if !grid.in_trust_region(x, y) {
                continue;
            }
            let composed: f64 = (0..n_y).map(|z| dy * snap[ix][z] * green[z][j]).sum();
            let direct = sol.value(ix, j);
            let rel = (composed - direct).abs() / direct.abs().max(1e-300);
            worst = worst.max(rel);
        }
        rel_err.push(worst);
    }
    Ok(FlowReport {
        rel_err,
        t_split: grid.init_epsilon + k_split as f64 * grid.dt(),
    })
}

/// Ensemble means of the shifted lattice against the smooth solver.
#[derive(Debug, Clone)]
pub struct ShiftReport {
    pub y_probes: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub reference: Vec<f64>,
    pub det_mean: f64,
    pub det_stderr: f64,
    pub det_reference: f64,
}

/// Averages the noise-shifted solution (and a 2x2 determinant probe) over
/// independent realizations and compares with the deterministic solve at
/// potential `phi`.
pub fn noise_shift_mean(
    phi: &PotentialField,
    grid: &GridSpec,
    y_probes: &[usize],
    n_real: usize,
    seed: u64,
) -> Result<ShiftReport> {
    if grid.x_nodes.len() < 2 {
        return Err(Error::domain("pencil needs at least two start nodes"));
    }
    let ix = grid.x_nodes.len() / 2;
    let x_pair = [ix, ix - 1]; // decreasing coordinates
    let c = grid.nearest_y_index((grid.x_nodes[ix] + grid.x_nodes[ix - 1]) / 2.0);
    let y_pair = [c + 4, c.saturating_sub(4).max(1)];
    let per_real: Vec<(Vec<f64>, f64)> = exec::map_indexed(n_real, |r| {
        let noise = NoiseField::for_grid(seed.wrapping_add(r as u64), grid);
        let sol = evolve_she_shifted(&noise, grid, phi).expect("shifted evolve");
        let probes: Vec<f64> = y_probes.iter().map(|&j| sol.value(ix, j)).collect();
        let det = km_determinant(&sol, &x_pair, &y_pair).expect("det probe").det;
        (probes, det)
    });
    let reference_surf = solve_smooth(phi, grid)?;
    let reference: Vec<f64> = y_probes
        .iter()
        .map(|&j| reference_surf.value(ix, j))
        .collect();
    let det_reference = {
        let z = |a: usize, b: usize| reference_surf.value(x_pair[a], y_pair[b]);
        z(0, 0) * z(1, 1) - z(0, 1) * z(1, 0)
    };
    let mut mean = Vec::new();
    let mut stderr = Vec::new();
    for (p, _) in y_probes.iter().enumerate() {
        let vals: Vec<f64> = per_real.iter().map(|r| r.0[p]).collect();
        let (m, se) = exec::mean_stderr(&vals);
        mean.push(m);
        stderr.push(se);
    }
    let dets: Vec<f64> = per_real.iter().map(|r| r.1).collect();
    let (det_mean, det_stderr) = exec::mean_stderr(&dets);
    Ok(ShiftReport {
        y_probes: y_probes.to_vec(),
        mean,
        stderr,
        reference,
        det_mean,
        det_stderr,
        det_reference,
    })
}

/// Positivity diagnostics for the confluent determinant ratios.
#[derive(Debug, Clone)]
pub struct LineEnsembleReport {
    /// fraction of (realization, trust node) pairs with positive U_n
    pub positive_fraction: Vec<f64>,
    pub nodes_checked: usize,
}

/// Forms confluent normalized determinants from adjacent pencil and grid
/// nodes, extracts the ratios `U_n = hatZ_n / hatZ_{n-1}`, and reports the
/// fraction of positive values in the trust region per layer.
pub fn line_ensemble_diagnostics(
    grid: &GridSpec,
    x_index: usize,
    n_max: usize,
    n_real: usize,
    seed: u64,
) -> Result<LineEnsembleReport> {
    if n_max > 3 {
        return Err(Error::domain("diagnostics limited to n <= 3"));
    }
    if x_index + n_max > grid.x_nodes.len() {
        return Err(Error::domain("pencil too narrow for the requested n"));
    }
    let counts: Vec<(Vec<usize>, usize)> = exec::map_indexed(n_real, |r| {
        let noise = NoiseField::for_grid(seed.wrapping_add(r as u64), grid);
        let sol = evolve_she(&noise, grid).expect("evolve");
        let x = grid.x_nodes[x_index];
        let mut pos = vec![0usize; n_max];
        let mut checked = 0usize;
        for j in 1..grid.n_y - n_max {
            if !grid.in_trust_region(x, grid.y_coord(j)) {
                continue;
            }
            checked += 1;
            let mut prev_hat = 1.0;
            for n in 1..=n_max {
                // decreasing coordinate order: higher index first
                let xi: Vec<usize> = (0..n).map(|a| x_index + n - 1 - a).collect();
                let yi: Vec<usize> = (0..n).map(|b| j + n - 1 - b).collect();
                let hat = km_determinant(&sol, &xi, &yi).expect("confluent det").hat_z;
                if hat / prev_hat > 0.0 {
                    pos[n - 1] += 1;
                }
                prev_hat = hat;
            }
        }
        (pos, checked)
    });
    let total: usize = counts.iter().map(|c| c.1).sum();
    let positive_fraction = (0..n_max)
        .map(|n| counts.iter().map(|c| c.0[n]).sum::<usize>() as f64 / total.max(1) as f64)
        .collect();
    Ok(LineEnsembleReport {
        positive_fraction,
        nodes_checked: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice_grid() -> GridSpec {
        // noise factor sqrt(dt/dy) kept small enough that negative
        // multipliers are rare; init_epsilon resolves the starting kernel
        GridSpec::with_pencil(-8.0, 8.0, 401, 600, 1.0, 0.0, 2, 1e-2)
    }

    #[test]
    fn noise_regenerates_bit_exactly() {
        let a = NoiseField::generate(77, 12, 9, 0.01, 0.1);
        let b = NoiseField::generate(77, 12, 9, 0.01, 0.1);
        assert_eq!(a.data, b.data);
        let c = NoiseField::generate(78, 12, 9, 0.01, 0.1);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn noise_moments() {
        let f = NoiseField::generate(3, 200, 200, 0.01, 0.1);
        let (m, v) = f.sample_moments();
        let tol = 4.0 / (200.0f64 * 200.0).sqrt();
        assert!(m.abs() < tol, "mean {m}");
        assert!((v - 1.0).abs() < 3.0 * tol, "var {v}");
    }

    #[test]
    fn replay_round_trip() {
        let dir = std::env::temp_dir().join("mlshe_noise_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("replay.bin");
        let f = NoiseField::generate(99, 7, 5, 0.02, 0.25);
        f.export(&path).unwrap();
        let g = NoiseField::import(&path).unwrap();
        assert_eq!(g.seed, 99);
        assert_eq!(g.n_t, 7);
        assert_eq!(g.n_y, 5);
        assert_eq!(g.dt, 0.02);
        assert_eq!(g.dy, 0.25);
        assert_eq!(g.data, f.data);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn zero_noise_matches_smooth_solver() {
        let grid = lattice_grid();
        let sol = evolve_she(&NoiseField::zeroed(&grid), &grid).unwrap();
        let surf = solve_smooth(&PotentialField::zero(), &grid).unwrap();
        for ix in 0..grid.x_nodes.len() {
            for j in 0..grid.n_y {
                assert!(
                    (sol.value(ix, j) - surf.value(ix, j)).abs() < 1e-10,
                    "mismatch at ({ix}, {j})"
                );
            }
        }
    }

    #[test]
    fn solution_reproducible() {
        let grid = lattice_grid();
        let a = evolve_she(&NoiseField::for_grid(5, &grid), &grid).unwrap();
        let b = evolve_she(&NoiseField::for_grid(5, &grid), &grid).unwrap();
        for ix in 0..grid.x_nodes.len() {
            assert_eq!(a.slices[1].z[ix], b.slices[1].z[ix]);
        }
    }

    #[test]
    fn ensemble_mean_is_heat_kernel() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 321, 200, 0.5, 0.0, 1, 5e-3);
        let n_real = 400;
        let j0 = grid.nearest_y_index(0.0);
        let j1 = grid.nearest_y_index(0.5);
        let vals: Vec<(f64, f64)> = exec::map_indexed(n_real, |r| {
            let noise = NoiseField::for_grid(1000 + r as u64, &grid);
            let sol = evolve_she(&noise, &grid).unwrap();
            (sol.value(1, j0), sol.value(1, j1))
        });
        let t = 0.5;
        for (probe, j) in [(0usize, j0), (1, j1)] {
            let v: Vec<f64> = vals.iter().map(|p| if probe == 0 { p.0 } else { p.1 }).collect();
            let (m, se) = exec::mean_stderr(&v);
            let p = heat_kernel(t, 0.0, grid.y_coord(j)).unwrap();
            assert!(
                (m - p).abs() < 3.0 * se + 0.01 * p,
                "probe {j}: mean {m} vs {p} (se {se})"
            );
        }
    }

    #[test]
    fn km_determinant_antisymmetry_and_ties() {
        let grid = lattice_grid();
        let sol = evolve_she(&NoiseField::for_grid(8, &grid), &grid).unwrap();
        let c = grid.nearest_y_index(0.0);
        let d = km_determinant(&sol, &[3, 1], &[c + 5, c - 5]).unwrap();
        // swapping rows by hand flips the sign
        let z = |a: usize, b: usize| sol.value(a, b);
        let swapped = z(1, c + 5) * z(3, c - 5) - z(1, c - 5) * z(3, c + 5);
        assert!((swapped + d.det).abs() <= 1e-14 * d.det.abs().max(1.0));
        // coincident columns rejected by the ordering check
        assert!(km_determinant(&sol, &[3, 1], &[c, c]).is_err());
    }

    #[test]
    fn zero_noise_km_matches_continuum() {
        let grid = lattice_grid();
        let sol = evolve_she(&NoiseField::zeroed(&grid), &grid).unwrap();
        let c = grid.nearest_y_index(0.0);
        let (j1, j2) = (c + 10, c - 10);
        let x = crate::kernels::WeylPoint::new(vec![grid.x_nodes[3], grid.x_nodes[1]]).unwrap();
        let y = crate::kernels::WeylPoint::new(vec![grid.y_coord(j1), grid.y_coord(j2)]).unwrap();
        let d = km_determinant(&sol, &[3, 1], &[j1, j2]).unwrap();
        // identical stencil: the smooth solver's determinant agrees to
        // machine precision
        let surf = solve_smooth(&PotentialField::zero(), &grid).unwrap();
        let zs = |a: usize, b: usize| surf.value(a, b);
        let stencil_det = zs(3, j1) * zs(1, j2) - zs(3, j2) * zs(1, j1);
        assert!((d.det - stencil_det).abs() <= 1e-12 * d.det.abs().max(1e-300));
        // continuum Karlin-McGregor density within discretization error
        let exact = crate::kernels::km_density(sol.t_final(), &x, &y).unwrap();
        assert!(
            (d.det - exact).abs() < 0.01 * exact.abs(),
            "det {} vs continuum {exact}",
            d.det
        );
    }

    #[test]
    fn shared_noise_reduces_ratio_variance() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 161, 200, 0.5, 0.0, 1, 1e-3);
        let j = grid.nearest_y_index(0.2);
        let n_real = 200;
        let mut shared = Vec::new();
        let mut indep = Vec::new();
        for r in 0..n_real {
            let na = NoiseField::for_grid(40_000 + r, &grid);
            let nb = NoiseField::for_grid(80_000 + r, &grid);
            let sa = evolve_she(&na, &grid).unwrap();
            let sb = evolve_she(&nb, &grid).unwrap();
            shared.push(sa.value(0, j) / sa.value(2, j));
            indep.push(sa.value(0, j) / sb.value(2, j));
        }
        let var = |v: &[f64]| {
            let (m, _) = exec::mean_stderr(v);
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        assert!(
            var(&shared) < var(&indep),
            "shared {} vs independent {}",
            var(&shared),
            var(&indep)
        );
    }

    #[test]
    fn ratio_identity_exact_form_telescopes() {
        let grid = lattice_grid();
        let c = grid.nearest_y_index(0.0);
        let report = ratio_identity_check(&grid, 1, c + 8, c - 8, 3, 60).unwrap();
        for &e in &report.rel_diff_exact {
            assert!(e < 1e-9, "telescoped residual {e}");
        }
    }

    #[test]
    fn ratio_identity_zero_noise_near_inverse_t() {
        // deterministic reduction: both sides approach 1/t
        let grid = lattice_grid();
        let c = grid.nearest_y_index(0.0);
        let x_index = 1;
        let sol = evolve_she(&NoiseField::zeroed(&grid), &grid).unwrap();
        let (i_y1, i_y2) = (c + 8, c - 8);
        let h = grid.x_nodes[2] - grid.x_nodes[1];
        let z = |ix: usize, jy: usize| sol.value(ix, jy);
        let ratio = |j: usize| z(x_index + 1, j) / z(x_index, j);
        let lhs = (ratio(i_y1) - ratio(i_y2))
            / (h * (grid.y_coord(i_y1) - grid.y_coord(i_y2)));
        let t = sol.t_final();
        assert!(
            (lhs - 1.0 / t).abs() < 0.05 / t,
            "lhs {lhs} vs 1/t {}",
            1.0 / t
        );
    }

    #[test]
    fn flow_property_zero_noise() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 161, 200, 1.0, 0.0, 1, 1e-3);
        let report =
            flow_property_check(&NoiseField::zeroed(&grid), &grid, grid.n_t / 2).unwrap();
        for e in &report.rel_err {
            assert!(*e < 1e-8, "composition error {e}");
        }
    }

    #[test]
    fn flow_property_generic_seed() {
        let grid = GridSpec::with_pencil(-8.0, 8.0, 161, 200, 1.0, 0.0, 2, 1e-3);
        let noise = NoiseField::for_grid(314, &grid);
        let report = flow_property_check(&noise, &grid, grid.n_t / 2).unwrap();
        for e in &report.rel_err {
            assert!(*e < 2e-2, "composition error {e}");
        }
    }

    #[test]
    fn pair_moment_matches_ensemble() {
        // coarse grid with a soft noise factor so Z^2 has workable tails
        let grid = GridSpec::with_pencil(-8.0, 8.0, 161, 800, 1.0, 0.0, 0, 1e-2);
        let iy = grid.nearest_y_index(0.0);
        let m = pair_moment_exact(&grid, 0).unwrap();
        let n = grid.n_y;
        // symmetry and positivity of the moment matrix
        for a in (10..n - 10).step_by(17) {
            for b in (10..n - 10).step_by(23) {
                assert!((m[a * n + b] - m[b * n + a]).abs() <= 1e-12 * m[a * n + b].abs());
            }
        }
        assert!(m[iy * n + iy] > 0.0);
        // Monte Carlo cross-check of the diagonal entry
        let sq: Vec<f64> = (0..4000)
            .map(|r| {
                let noise = NoiseField::for_grid(5_000 + r, &grid);
                let z = evolve_she(&noise, &grid).unwrap().value(0, iy);
                z * z
            })
            .collect();
        let (mean, stderr) = crate::exec::mean_stderr(&sq);
        assert!(
            (mean - m[iy * n + iy]).abs() < 4.0 * stderr,
            "mc {mean} +- {stderr} vs exact {}",
            m[iy * n + iy]
        );
    }

    #[test]
    fn line_ensemble_zero_noise_positive() {
        let grid = lattice_grid();
        // single zero-noise realization: U_n positive in the trust region
        let report = {
            // reuse the ensemble entry point with a single seed, then
            // overwrite with the deterministic field for the check
            let sol = evolve_she(&NoiseField::zeroed(&grid), &grid).unwrap();
            let mut pos = vec![0usize; 2];
            let mut checked = 0usize;
            for j in 1..grid.n_y - 2 {
                if !grid.in_trust_region(grid.x_nodes[1], grid.y_coord(j)) {
                    continue;
                }
                checked += 1;
                let h1 = km_determinant(&sol, &[1], &[j]).unwrap().hat_z;
                let h2 = km_determinant(&sol, &[2, 1], &[j + 1, j]).unwrap().hat_z;
                if h1 > 0.0 {
                    pos[0] += 1;
                }
                if h2 / h1 > 0.0 {
                    pos[1] += 1;
                }
            }
            (pos, checked)
        };
        assert_eq!(report.0[0], report.1);
        assert_eq!(report.0[1], report.1);
    }
}
