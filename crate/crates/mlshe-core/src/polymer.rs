//! Semi-discrete multilayer polymer: single-path partition functions by a
//! trapezoid recursion through the disorder, the multilayer partition
//! function as a Lindström–Gessel–Viennot determinant, and the
//! brute-force two-path oracle used to validate it.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg;
use crate::rngstream::stream_rng;

/// Brownian disorder on a uniform grid of `[0, t]`: `b[i][k] = B_i(s_k)`,
/// piecewise linear between grid points, `B_i(0) = 0`.
#[derive(Debug, Clone)]
pub struct DisorderPath {
    pub t: f64,
    pub b: Vec<Vec<f64>>,
}

impl DisorderPath {
    pub fn sample(seed: u64, n_levels: usize, m: usize, t: f64) -> Self {
        let dt = t / m as f64;
        let sd = dt.sqrt();
        let b = exec::map_indexed(n_levels, |i| {
            let mut rng = stream_rng(seed, &[0x9017, i as u64]);
            let mut v = 0.0;
            let mut row = Vec::with_capacity(m + 1);
            row.push(0.0);
            for _ in 0..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                v += sd * z;
                row.push(v);
            }
            row
        });
        DisorderPath { t, b }
    }

    pub fn zero(n_levels: usize, m: usize, t: f64) -> Self {
        DisorderPath {
            t,
            b: vec![vec![0.0; m + 1]; n_levels],
        }
    }

    pub fn n_levels(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.b[0].len() - 1
    }

    /// Doubles the grid by linear interpolation, keeping the disorder
    /// function fixed (for quadrature-convergence studies).
    pub fn refine(&self) -> Self {
        let m = self.m();
        let b = self
            .b
            .iter()
            .map(|row| {
                let mut out = Vec::with_capacity(2 * m + 1);
                for k in 0..m {
                    out.push(row[k]);
                    out.push(0.5 * (row[k] + row[k + 1]));
                }
                out.push(row[m]);
                out
            })
            .collect();
        DisorderPath { t: self.t, b }
    }
}

/// Full trajectory of `Z_{i,j}(s_k)` for one base level `i`: rows indexed
/// by target level `j >= i`.
fn partition_rows(path: &DisorderPath, i: usize) -> Vec<Vec<f64>> {
    let m = path.m();
    let dt = path.t / m as f64;
    let n = path.n_levels();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n - i);
    // base: Z_{i,i}(s) = e^{B_i(s)}
    rows.push(path.b[i].iter().map(|v| v.exp()).collect());
    for j in i + 1..n {
        let prev = rows.last().unwrap();
        // Z_{i,j}(s_k) = e^{B_j(s_k)} * int_0^{s_k} Z_{i,j-1}(s) e^{-B_j(s)} ds
        let g: Vec<f64> = prev
            .iter()
            .zip(&path.b[j])
            .map(|(&z, &bj)| z * (-bj).exp())
            .collect();
        let mut acc = 0.0;
        let mut row = Vec::with_capacity(m + 1);
        row.push(0.0);
        for k in 1..=m {
            acc += 0.5 * dt * (g[k - 1] + g[k]);
            row.push(acc * path.b[j][k].exp());
        }
        rows.push(row);
    }
    rows
}

/// Single-path partition function from level `i` to level `j` (0-based),
/// evaluated at the final time.
pub fn single_path_partition(path: &DisorderPath, i: usize, j: usize) -> Result<f64> {
    if i > j || j >= path.n_levels() {
        return Err(Error::domain(format!(
            "invalid level pair ({i}, {j}) for {} levels",
            path.n_levels()
        )));
    }
    Ok(partition_rows(path, i)[j - i][path.m()])
}

/// Final-time single-path partition functions for all level pairs.
pub struct HierarchyTable {
    pub n_levels: usize,
    pub t: f64,
    z: Vec<f64>,
}

impl HierarchyTable {
    pub fn build(path: &DisorderPath) -> Result<Self> {
        let n = path.n_levels();
        let m = path.m();
        let per_i: Vec<Vec<f64>> = exec::map_indexed(n, |i| {
            partition_rows(path, i).iter().map(|row| row[m]).collect()
        });
        let mut z = vec![0.0; n * n];
        for (i, vals) in per_i.iter().enumerate() {
            for (off, &v) in vals.iter().enumerate() {
                if !(v > 0.0) {
                    // positivity is structural; a violation means overflow
                    // or corrupt disorder
                    return Err(Error::Singular {
                        what: "non-positive single-path partition value",
                        layer: i,
                        node: i + off,
                    });
                }
                z[i * n + i + off] = v;
            }
        }
        Ok(HierarchyTable {
            n_levels: n,
            t: path.t,
            z,
        })
    }

    /// `Z_{i,j}` with the convention `Z_{i,j} = 0` for `j < i`.
    pub fn z(&self, i: usize, j: usize) -> f64 {
        if j < i {
            0.0
        } else {
            self.z[i * self.n_levels + j]
        }
    }
}

/// Multilayer partition function `Z_n` as the determinant
/// `det[Z_{i, N-n+j}]` over the hierarchy table.
pub fn multilayer_partition(table: &HierarchyTable, n: usize) -> Result<f64> {
    let big_n = table.n_levels;
    if n == 0 || n > big_n {
        return Err(Error::domain("layer count must satisfy 1 <= n <= N"));
    }
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            mat[i * n + j] = table.z(i, big_n - n + j);
        }
    }
    Ok(linalg::det(&mat, n))
}

/// Log increments `X_1 = log Z_1`, `X_n = log(Z_n / Z_{n-1})`.
pub fn x_increments(zs: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(zs.len());
    let mut prev = 1.0;
    for (n, &z) in zs.iter().enumerate() {
        if !(z > 0.0) {
            return Err(Error::domain(format!(
                "non-positive partition value at layer {}",
                n + 1
            )));
        }
        out.push((z / prev).ln());
        prev = z;
    }
    Ok(out)
}

/// Direct nested quadrature for two disjoint paths at `N = 3`, `n = 2`:
/// path A jumps 1->2 at `r`, path B jumps 2->3 at `s`, disjointness
/// forces `s < r`. Shares the trapezoid convention of the recursion.
pub fn brute_force_two_path(path: &DisorderPath) -> Result<f64> {
    if path.n_levels() != 3 {
        return Err(Error::domain("brute-force oracle is fixed at N = 3"));
    }
    let m = path.m();
    let dt = path.t / m as f64;
    let b = &path.b;
    // inner integrand over s: e^{B_2(s) + B_3(t) - B_3(s)}
    let b3t = b[2][m];
    let g: Vec<f64> = (0..=m).map(|k| (b[1][k] + b3t - b[2][k]).exp()).collect();
    // outer integrand over r: e^{B_1(r) + B_2(t) - B_2(r)}
    let b2t = b[1][m];
    let f: Vec<f64> = (0..=m).map(|k| (b[0][k] + b2t - b[1][k]).exp()).collect();
    let mut inner = 0.0; // cumulative trapezoid of g up to r
    let mut total = 0.0;
    let mut prev_term = 0.0; // f(0) * G(0) = 0
    for k in 1..=m {
        inner += 0.5 * dt * (g[k - 1] + g[k]);
        let term = f[k] * inner;
        total += 0.5 * dt * (prev_term + term);
        prev_term = term;
    }
    Ok(total)
}
