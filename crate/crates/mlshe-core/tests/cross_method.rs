//! Cross-module agreement checks: the same quantity computed by two
//! independent routes (quadrature vs determinant, Monte Carlo vs PDE,
//! lattice vs bridge ensemble).

use mlshe_core::bridgesim::{
    feynman_kac_confluent, feynman_kac_distinct, second_moment_check, BridgeConfig,
};
use mlshe_core::grid::GridSpec;
use mlshe_core::kernels::{
    calibrated_constant, heat_kernel, km_density, printed_constant, superfactorial, vandermonde,
    WeylPoint,
};
use mlshe_core::pdesolve::solve_smooth;
use mlshe_core::potential::PotentialField;
use mlshe_core::shelattice::{evolve_she, NoiseField};

#[test]
fn km_density_satisfies_chapman_kolmogorov() {
    // p*(s+t, x, y) = int p*(s, x, z) p*(t, z, y) dz over the chamber
    let x = WeylPoint::new(vec![0.5, -0.5]).unwrap();
    let y = WeylPoint::new(vec![0.8, -0.2]).unwrap();
    let (s, t) = (0.4, 0.6);
    let direct = km_density(s + t, &x, &y).unwrap();
    // 2d composite Simpson over z1 > z2
    let (a, b) = (-6.0f64, 6.0f64);
    let m = 240usize;
    let h = (b - a) / m as f64;
    let w1 = |k: usize| -> f64 {
        if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut acc = 0.0;
    for k1 in 0..=m {
        let z1 = a + k1 as f64 * h;
        for k2 in 0..=m {
            let z2 = a + k2 as f64 * h;
            if z2 >= z1 {
                continue;
            }
            let z = WeylPoint::new(vec![z1, z2]).unwrap();
            acc += w1(k1)
                * w1(k2)
                * km_density(s, &x, &z).unwrap()
                * km_density(t, &z, &y).unwrap();
        }
    }
    let composed = acc * h * h / 9.0;
    let rel = (composed - direct).abs() / direct;
    assert!(rel < 1e-5, "composed {composed} vs direct {direct} ({rel})");
}

#[test]
fn km_confluent_limit_recovers_calibrated_constant() {
    // det[p(t, x_i, y_j)] / (Delta(x) Delta(y)) -> c_n p(t,x,y)^n with the
    // calibrated constant; Richardson in the probe spacing
    for n in 2..=3usize {
        let t = 1.0;
        let (x, y) = (0.1, -0.2);
        let p = heat_kernel(t, x, y).unwrap();
        let probe = |d: f64| -> f64 {
            let xs: Vec<f64> = (0..n)
                .map(|i| x + d * ((n - 1) as f64 / 2.0 - i as f64))
                .collect();
            let ys: Vec<f64> = (0..n)
                .map(|i| y + d * ((n - 1) as f64 / 2.0 - i as f64))
                .collect();
            let xp = WeylPoint::new(xs.clone()).unwrap();
            let yp = WeylPoint::new(ys.clone()).unwrap();
            km_density(t, &xp, &yp).unwrap() / (vandermonde(&xs) * vandermonde(&ys))
        };
        let (d, half) = (0.05, 0.025);
        let rich = (4.0 * probe(half) - probe(d)) / 3.0;
        let expect = calibrated_constant(n, t) * p.powi(n as i32);
        let rel = (rich - expect).abs() / expect;
        assert!(rel < 1e-3, "n={n}: {rich} vs {expect} ({rel})");
        // and the printed constant differs by the squared superfactorial
        let sf = superfactorial(n);
        assert!(
            (printed_constant(n, t) - calibrated_constant(n, t) * sf * sf).abs()
                < 1e-12 * printed_constant(n, t)
        );
    }
}

#[test]
fn feynman_kac_agrees_with_pde_determinant() {
    // tilde-Z_2 with a bump potential: bridge MC vs det of the smooth solve
    let phi = PotentialField::single_bump();
    let grid = GridSpec::with_pencil(-8.0, 8.0, 1601, 400, 1.0, 0.0, 16, 1e-2);
    let surf = solve_smooth(&phi, &grid).unwrap();
    let c = grid.x_nodes.len() / 2;
    // endpoints on pencil/grid nodes, separated enough for decent
    // acceptance
    let (ix1, ix2) = (c + 12, c - 12);
    let j1 = grid.nearest_y_index(0.45);
    let j2 = grid.nearest_y_index(-0.55);
    let x = WeylPoint::new(vec![grid.x_nodes[ix1], grid.x_nodes[ix2]]).unwrap();
    let y = WeylPoint::new(vec![grid.y_coord(j1), grid.y_coord(j2)]).unwrap();
    let pde_det = surf.value(ix1, j1) * surf.value(ix2, j2)
        - surf.value(ix1, j2) * surf.value(ix2, j1);
    let cfg = BridgeConfig {
        n_steps: 200,
        n_samples: 20_000,
        seed: 2024,
    };
    let mc = feynman_kac_distinct(&phi, surf.t_final(), &x, &y, &cfg).unwrap();
    let tol = 3.0 * mc.stderr + 0.01 * pde_det.abs();
    assert!(
        (mc.mean - pde_det).abs() < tol,
        "mc {} (se {}) vs pde {pde_det}",
        mc.mean,
        mc.stderr,
    );
}

#[test]
fn confluent_mc_agrees_with_wronskian_layer() {
    // Z_2 at coincident points: splayed MC vs the calibrated Wronskian
    // from the PDE surface
    let phi = PotentialField::single_bump();
    let grid = GridSpec::with_pencil(-8.0, 8.0, 1601, 400, 1.0, 0.0, 3, 1e-2);
    let surf = solve_smooth(&phi, &grid).unwrap();
    let stack = mlshe_core::pdesolve::build_layers(&surf, 3, 2).unwrap();
    let j = grid.nearest_y_index(0.2);
    let jj = j - stack.j_lo;
    let z2_pde = stack.z_layers[1][jj];
    let cfg = BridgeConfig {
        n_steps: 200,
        n_samples: 40_000,
        seed: 7,
    };
    let est = feynman_kac_confluent(&phi, surf.t_final(), 0.0, stack.y[jj], 2, 0.4, &cfg).unwrap();
    let tol = 3.0 * est.stderr + 0.05 * z2_pde.abs();
    assert!(
        (est.richardson - z2_pde).abs() < tol,
        "mc {} (se {}) vs wronskian {z2_pde}",
        est.richardson,
        est.stderr,
    );
}

#[test]
fn lattice_second_moment_matches_bridge_pairs() {
    // E[Z(t,0,0)^2]/p^2 on the lattice vs E[e^L] from bridge pairs
    let t = 0.25;
    let grid = GridSpec::with_pencil(-6.0, 6.0, 481, 150, t, 0.0, 1, 2.5e-3);
    let j0 = grid.nearest_y_index(0.0);
    let n_real = 600usize;
    let sq: Vec<f64> = (0..n_real)
        .map(|r| {
            let noise = NoiseField::for_grid(50_000 + r as u64, &grid);
            let sol = evolve_she(&noise, &grid).unwrap();
            let z = sol.value(1, j0);
            z * z
        })
        .collect();
    let (m2, se2) = mlshe_core::exec::mean_stderr(&sq);
    let p = heat_kernel(t, 0.0, 0.0).unwrap();
    let lattice_ratio = m2 / (p * p);
    let cfg = BridgeConfig {
        n_steps: 400,
        n_samples: 20_000,
        seed: 99,
    };
    let (bridge, closed) = second_moment_check(t, 0.02, &cfg).unwrap();
    let tol = 3.0 * (se2 / (p * p) + bridge.stderr) + 0.05 * closed;
    assert!(
        (lattice_ratio - bridge.mean).abs() < tol,
        "lattice {lattice_ratio} vs bridge {} (closed form {closed})",
        bridge.mean,
    );
    assert!(
        (bridge.mean - closed).abs() < 3.0 * bridge.stderr + 0.03 * closed,
        "bridge {} vs closed {closed}",
        bridge.mean,
    );
}
