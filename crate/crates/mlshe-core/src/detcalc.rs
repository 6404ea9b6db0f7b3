//! Confluent determinant calculus: Wronskians of mixed partial derivatives,
//! Darboux/Sylvester chains, the interlacing-integral reduction, and
//! recursive quadrature over Gelfand–Tsetlin polytopes.

use crate::error::{Error, Result};
use crate::kernels::WeylPoint;
use crate::linalg;
use crate::rngstream::stream_rng;
use rand::Rng;

/// Second-order central finite-difference stencils for derivative orders
/// 0..=4. Returns `(coefficients, half_width)`; divide by `h^order`.
pub fn central_stencil(order: usize) -> (&'static [f64], usize) {
    match order {
        0 => (&[1.0], 0),
        1 => (&[-0.5, 0.0, 0.5], 1),
        2 => (&[1.0, -2.0, 1.0], 1),
        3 => (&[-0.5, 1.0, 0.0, -1.0, 0.5], 2),
        4 => (&[1.0, -4.0, 6.0, -4.0, 1.0], 2),
        _ => panic!("central stencils implemented for orders <= 4"),
    }
}

/// Table of mixed partials `d_x^i d_y^j g(x,y)` for `i,j = 0..m-1` at one
/// base point. `step == 0` marks exact (closed-form) entries.
#[derive(Debug, Clone)]
pub struct DerivativeTable {
    values: Vec<f64>,
    m: usize,
    pub step: f64,
}

impl DerivativeTable {
    pub fn new(values: Vec<f64>, m: usize, step: f64) -> Result<Self> {
        if m == 0 || values.len() != m * m {
            return Err(Error::domain("DerivativeTable must be square, m >= 1"));
        }
        Ok(DerivativeTable { values, m, step })
    }

    /// Fills the table by second-order central differences of `g` around
    /// `(x, y)` with step `h`.
    pub fn from_fn<G: Fn(f64, f64) -> f64>(g: &G, x: f64, y: f64, m: usize, h: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("DerivativeTable needs m >= 1"));
        }
        if m > 5 {
            return Err(Error::domain("derivative orders above 4 are not supported"));
        }
        if h <= 0.0 {
            return Err(Error::domain("finite-difference step must be positive"));
        }
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            let (cx, wx) = central_stencil(i);
            for j in 0..m {
                let (cy, wy) = central_stencil(j);
                let mut acc = 0.0;
                for (a, &ca) in cx.iter().enumerate() {
                    if ca == 0.0 {
                        continue;
                    }
                    let xs = x + (a as f64 - wx as f64) * h;
                    for (b, &cb) in cy.iter().enumerate() {
                        if cb == 0.0 {
                            continue;
                        }
                        acc += ca * cb * g(xs, y + (b as f64 - wy as f64) * h);
                    }
                }
                values[i * m + j] = acc / h.powi((i + j) as i32);
            }
        }
        DerivativeTable::new(values, m, h)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }
}

/// Wronskian `W_n`: determinant of the leading n x n block of the table.
pub fn wronskian(table: &DerivativeTable, n: usize) -> Result<f64> {
    if n > table.dim() {
        return Err(Error::domain(format!(
            "wronskian order {n} exceeds table dimension {}",
            table.dim()
        )));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let m = table.dim();
    let mut block = vec![0.0; n * n];
    for i in 0..n {
        block[i * n..(i + 1) * n].copy_from_slice(&table.values[i * m..i * m + n]);
    }
    Ok(linalg::det(&block, n))
}

/// The Wronskian sequence `W_0 = 1, W_1, ..., W_N` at one point together
/// with the ratio fields `T_n = W_{n-1} W_{n+1} / W_n^2`.
#[derive(Debug, Clone)]
pub struct DarbouxChain {
    pub w: Vec<f64>,
    pub t_fields: Vec<f64>,
}

impl DarbouxChain {
    /// Builds the chain from `W_0..=W_N`; fails on a vanishing `W_n`.
    pub fn from_wronskians(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 || w[0] != 1.0 {
            return Err(Error::domain("chain needs W_0 = 1 and at least W_1"));
        }
        let n_max = w.len() - 1;
        let mut t_fields = Vec::with_capacity(n_max.saturating_sub(1));
        for n in 1..n_max {
            if w[n] == 0.0 {
                return Err(Error::Singular {
                    what: "Wronskian",
                    layer: n,
                    node: 0,
                });
            }
            t_fields.push(w[n - 1] * w[n + 1] / (w[n] * w[n]));
        }
        Ok(DarbouxChain { w, t_fields })
    }
}

/// Derivative tables on a rectangular `(x, y)` grid.
pub struct TableGrid {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    tables: Vec<DerivativeTable>,
}

impl TableGrid {
    pub fn from_fn<G: Fn(f64, f64) -> f64>(
        g: &G,
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
        nx: usize,
        ny: usize,
        m: usize,
        step: f64,
    ) -> Result<Self> {
        let mut tables = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                tables.push(DerivativeTable::from_fn(
                    g,
                    x0 + ix as f64 * hx,
                    y0 + iy as f64 * hy,
                    m,
                    step,
                )?);
            }
        }
        Ok(TableGrid {
            x0,
            y0,
            hx,
            hy,
            nx,
            ny,
            tables,
        })
    }

    /// Builds the grid from precomputed tables (row-major over `ix, iy`),
    /// for callers with exact derivative values.
    pub fn from_tables(
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
        nx: usize,
        ny: usize,
        tables: Vec<DerivativeTable>,
    ) -> Result<Self> {
        if tables.len() != nx * ny {
            return Err(Error::domain("table count must equal nx * ny"));
        }
        Ok(TableGrid {
            x0,
            y0,
            hx,
            hy,
            nx,
            ny,
            tables,
        })
    }

    pub fn table(&self, ix: usize, iy: usize) -> &DerivativeTable {
        &self.tables[ix * self.ny + iy]
    }
}

/// Wronskian and T fields over a grid, with the Sylvester-identity residual
/// `|T_n - d_xd_y log W_n|` measured by central differences.
pub struct DarbouxField {
    /// `w[n][node]` for `n = 0..=n_max`, node index `ix * ny + iy`.
    pub w: Vec<Vec<f64>>,
    /// `t[n-1][node]` for `n = 1..n_max`.
    pub t: Vec<Vec<f64>>,
    /// max over interior nodes of the residual, per `n = 1..n_max`.
    pub residual_max: Vec<f64>,
}

/// Evaluates the Darboux chain on every grid node and checks
/// `T_n = d_xd_y log W_n` against central differences of `log W_n`.
pub fn darboux_chain(grid: &TableGrid, n_max: usize) -> Result<DarbouxField> {
    let nodes = grid.nx * grid.ny;
    let mut w = vec![vec![0.0; nodes]; n_max + 1];
    for node in 0..nodes {
        let table = &grid.tables[node];
        for n in 0..=n_max {
            w[n][node] = wronskian(table, n)?;
            if n >= 1 && w[n][node] == 0.0 {
                return Err(Error::Singular {
                    what: "Wronskian",
                    layer: n,
                    node,
                });
            }
        }
    }
    let mut t = Vec::with_capacity(n_max.saturating_sub(1));
    for n in 1..n_max {
        let field: Vec<f64> = (0..nodes)
            .map(|k| w[n - 1][k] * w[n + 1][k] / (w[n][k] * w[n][k]))
            .collect();
        t.push(field);
    }
    // cross derivative of log W_n on interior nodes
    let mut residual_max = Vec::with_capacity(n_max.saturating_sub(1));
    for n in 1..n_max {
        let mut worst: f64 = 0.0;
        for ix in 1..grid.nx.saturating_sub(1) {
            for iy in 1..grid.ny.saturating_sub(1) {
                let lw = |dx: i64, dy: i64| -> f64 {
                    let node = (ix as i64 + dx) as usize * grid.ny + (iy as i64 + dy) as usize;
                    w[n][node].abs().ln()
                };
                let dxy = (lw(1, 1) - lw(1, -1) - lw(-1, 1) + lw(-1, -1))
                    / (4.0 * grid.hx * grid.hy);
                worst = worst.max((t[n - 1][ix * grid.ny + iy] - dxy).abs());
            }
        }
        residual_max.push(worst);
    }
    Ok(DarbouxField {
        w,
        t,
        residual_max,
    })
}

/// A field defined on a sub-range of a sampling grid (derivative chains
/// shrink the valid range by one node per differentiation).
#[derive(Debug, Clone)]
pub struct ChainField {
    /// index into the original grid of `values[0]`
    pub offset: usize,
    pub values: Vec<f64>,
}

/// Nested divided-difference route to `T_n`:
/// `d_y( d_y( ... d_y(d_x^n g / g) / T_1 ) / T_2 ) ... / T_{n-1} )`.
///
/// `dx_g[k][j] = d_x^k g(x, y_j)` for `k = 0..=n` on a uniform y-grid with
/// step `hy`; `t[k-1][j] = T_k(y_j)` for `k = 1..n`. Each differentiation
/// is a central difference, losing one node at each end.
pub fn divided_difference_chain(hy: f64, dx_g: &[Vec<f64>], t: &[Vec<f64>]) -> Result<ChainField> {
    if dx_g.len() < 2 {
        return Err(Error::domain("need g and at least d_x g samples"));
    }
    let n = dx_g.len() - 1;
    if t.len() + 1 != n {
        return Err(Error::domain(format!(
            "expected {} T fields for chain order {n}, got {}",
            n - 1,
            t.len()
        )));
    }
    let ny = dx_g[0].len();
    let mut f: Vec<f64> = (0..ny).map(|j| dx_g[n][j] / dx_g[0][j]).collect();
    let mut offset = 0usize;
    for k in 1..=n {
        let len = f.len();
        if len < 3 {
            return Err(Error::domain("grid too short for the derivative chain"));
        }
        let mut next = vec![0.0; len - 2];
        for j in 1..len - 1 {
            next[j - 1] = (f[j + 1] - f[j - 1]) / (2.0 * hy);
        }
        offset += 1;
        if k < n {
            for (j, v) in next.iter_mut().enumerate() {
                let tk = t[k - 1][offset + j];
                if tk.abs() < 1e-12 {
                    return Err(Error::Singular {
                        what: "T field",
                        layer: k,
                        node: offset + j,
                    });
                }
                *v /= tk;
            }
        }
        f = next;
    }
    Ok(ChainField { offset, values: f })
}

fn check_unit_first_function<F: Fn(f64) -> f64>(f1: &F, lo: f64, hi: f64) -> Result<()> {
    for k in 0..=16 {
        let z = lo + (hi - lo) * k as f64 / 16.0;
        if (f1(z) - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!(
                "first function must be identically 1, found {} at {z}",
                f1(z)
            )));
        }
    }
    Ok(())
}

/// The interlacing integral `int_{z interlacing y} det[f'_{i+1}(z_j)] dz`,
/// evaluated exactly by the Cauchy–Binet reduction to
/// `det[f_{i+1}(y_j) - f_{i+1}(y_{j+1})]`.
///
/// Requires `f[0]` identically 1. Under the decreasing-coordinate
/// convention the result equals `orientation_sign(n) * det[f_i(y_j)]`.
pub fn interlace_integral<F: Fn(f64) -> f64>(fs: &[F], y: &WeylPoint) -> Result<f64> {
    let n = fs.len();
    if n != y.len() {
        return Err(Error::domain("need as many functions as coordinates"));
    }
    if !y.is_strictly_interior() {
        return Err(Error::domain("interlace_integral needs strictly decreasing y"));
    }
    let c = y.coords();
    check_unit_first_function(&fs[0], c[n - 1], c[0])?;
    if n == 1 {
        return Ok(1.0);
    }
    let m = n - 1;
    let mut mat = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            mat[i * m + j] = fs[i + 1](c[j]) - fs[i + 1](c[j + 1]);
        }
    }
    Ok(linalg::det(&mat, m))
}

/// `det[f_i(y_j)]`, the determinant side of the interlacing identity.
pub fn interlace_determinant<F: Fn(f64) -> f64>(fs: &[F], y: &WeylPoint) -> Result<f64> {
    let n = fs.len();
    if n != y.len() {
        return Err(Error::domain("need as many functions as coordinates"));
    }
    let c = y.coords();
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            mat[i * n + j] = fs[i](c[j]);
        }
    }
    Ok(linalg::det(&mat, n))
}

/// Result of the Gelfand–Tsetlin quadrature.
#[derive(Debug, Clone)]
pub struct GtQuad {
    pub value: f64,
    pub error_estimate: f64,
    pub degenerate: bool,
}

fn simpson_nodes(a: f64, b: f64, m: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (b - a) / m as f64;
    (0..=m).map(move |k| {
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        (a + k as f64 * h, w * h / 3.0)
    })
}

fn gt_recurse<F: Fn(f64) -> f64>(s: &[F], top: &[f64], m: usize, z: &mut Vec<f64>, dim: usize) -> f64 {
    let l = top.len();
    let w_idx = s.len() + 1 - l;
    if dim == l - 1 {
        let inner = gt_level(s, z, m);
        let weight: f64 = z.iter().map(|&zi| s[w_idx](zi)).product();
        return weight * inner;
    }
    let (a, b) = (top[dim + 1], top[dim]);
    if b <= a {
        // zero-width slab: measure zero
        if b < a {
            return 0.0;
        }
    }
    let mut acc = 0.0;
    for (node, w) in simpson_nodes(a, b, m) {
        z.push(node);
        acc += w * gt_recurse(s, top, m, z, dim + 1);
        z.pop();
    }
    acc
}

fn gt_level<F: Fn(f64) -> f64>(s: &[F], top: &[f64], m: usize) -> f64 {
    if top.len() == 1 {
        return 1.0;
    }
    let mut z = Vec::with_capacity(top.len() - 1);
    gt_recurse(s, top, m, &mut z, 0)
}

/// Integral over the Gelfand–Tsetlin polytope below `y` of
/// `prod_{k=1}^{n-1} prod_i S_k(y^{n-k}_i)` by nested composite Simpson
/// with `m` intervals per coordinate; the error estimate comes from an
/// `m` vs `2m` refinement.
pub fn gt_integral<F: Fn(f64) -> f64>(s: &[F], y: &WeylPoint, m: usize) -> Result<GtQuad> {
    let n = y.len();
    if s.len() + 1 != n {
        return Err(Error::domain(format!(
            "expected {} weight functions for a top row of length {n}",
            n - 1
        )));
    }
    if m < 2 || m % 2 != 0 {
        return Err(Error::domain("node count m must be even and >= 2"));
    }
    if !y.is_strictly_interior() {
        return Ok(GtQuad {
            value: 0.0,
            error_estimate: 0.0,
            degenerate: true,
        });
    }
    let c = y.coords();
    // positivity scan over the full range
    let (lo, hi) = (c[n - 1], c[0]);
    for (k, sk) in s.iter().enumerate() {
        for q in 0..=(2 * m) {
            let zq = lo + (hi - lo) * q as f64 / (2 * m) as f64;
            if sk(zq) <= 0.0 {
                return Err(Error::domain(format!(
                    "S_{} non-positive at z = {zq}",
                    k + 1
                )));
            }
        }
    }
    if n == 1 {
        return Ok(GtQuad {
            value: 1.0,
            error_estimate: 0.0,
            degenerate: false,
        });
    }
    let coarse = gt_level(s, c, m);
    let fine = gt_level(s, c, 2 * m);
    Ok(GtQuad {
        value: fine,
        error_estimate: (fine - coarse).abs(),
        degenerate: false,
    })
}

/// Monte Carlo fallback for deep polytopes (n >= 5), sampling each level
/// uniformly in the slab below its parent and weighting by slab volume.
pub fn gt_integral_mc<F: Fn(f64) -> f64 + Sync>(
    s: &[F],
    y: &WeylPoint,
    samples: usize,
    seed: u64,
) -> Result<GtQuad> {
    let n = y.len();
    if s.len() + 1 != n {
        return Err(Error::domain("weight function count mismatch"));
    }
    if !y.is_strictly_interior() {
        return Ok(GtQuad {
            value: 0.0,
            error_estimate: 0.0,
            degenerate: true,
        });
    }
    let vals = crate::exec::map_indexed(samples, |i| {
        let mut rng = stream_rng(seed, &[i as u64]);
        let mut parent: Vec<f64> = y.coords().to_vec();
        let mut weight = 1.0;
        while parent.len() > 1 {
            let l = parent.len();
            let w_idx = s.len() + 1 - l;
            let mut level = Vec::with_capacity(l - 1);
            for i in 0..l - 1 {
                let (a, b) = (parent[i + 1], parent[i]);
                let z: f64 = a + (b - a) * rng.gen::<f64>();
                weight *= (b - a) * s[w_idx](z);
                level.push(z);
            }
            parent = level;
        }
        weight
    });
    let (mean, se) = crate::exec::mean_stderr(&vals);
    Ok(GtQuad {
        value: mean,
        error_estimate: se,
        degenerate: false,
    })
}

/// Both sides of the Gelfand–Tsetlin factorization for a smooth kernel `g`:
/// `det[d_x^{i-1} g(x, y_j)]` against `prod_i g(x, y_i) * int_GT prod T_k`.
#[derive(Debug, Clone)]
pub struct GtFactorization {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// ledger sign expected to reconcile the two sides
    pub sign: f64,
    pub quad_error: f64,
}

/// Evaluates the factorization with x-derivatives and T fields obtained by
/// central differences of step `h`, and GT quadrature with `m` intervals.
pub fn gt_factorization_check<G: Fn(f64, f64) -> f64>(
    g: &G,
    x: f64,
    y: &WeylPoint,
    h: f64,
    m: usize,
) -> Result<GtFactorization> {
    let n = y.len();
    let c = y.coords();
    // LHS: columns are x-derivative ladders of g(., y_j)
    let mut mat = vec![0.0; n * n];
    for (j, &yj) in c.iter().enumerate() {
        for i in 0..n {
            let (cx, wx) = central_stencil(i);
            let mut acc = 0.0;
            for (a, &ca) in cx.iter().enumerate() {
                if ca != 0.0 {
                    acc += ca * g(x + (a as f64 - wx as f64) * h, yj);
                }
            }
            mat[i * n + j] = acc / h.powi(i as i32);
        }
    }
    let lhs = linalg::det(&mat, n);

    let prod: f64 = c.iter().map(|&yi| g(x, yi)).product();
    if n == 1 {
        return Ok(GtFactorization {
            lhs,
            rhs: prod,
            ratio: lhs / prod,
            sign: 1.0,
            quad_error: 0.0,
        });
    }

    let t_fns: Vec<_> = (1..n)
        .map(|k| {
            move |z: f64| {
                let table = DerivativeTable::from_fn(g, x, z, k + 1, h)
                    .expect("table construction cannot fail for positive h");
                let wm = wronskian(&table, k - 1).unwrap();
                let wk = wronskian(&table, k).unwrap();
                let wp = wronskian(&table, k + 1).unwrap();
                wm * wp / (wk * wk)
            }
        })
        .collect();
    let quad = gt_integral(&t_fns, y, m)?;
    let rhs = prod * quad.value;
    Ok(GtFactorization {
        lhs,
        rhs,
        ratio: lhs / rhs,
        sign: crate::kernels::gt_orientation_sign(n),
        quad_error: prod.abs() * quad.error_estimate,
    })
}
