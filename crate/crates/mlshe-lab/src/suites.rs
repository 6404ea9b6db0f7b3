//! The verification suites. Each check computes a quantity two independent
//! ways (or against a closed form / refinement decay) and emits result
//! rows; parameters come from [`ExperimentConfig`].

use std::time::Instant;

use mlshe_core::bridgesim::{
    feynman_kac_confluent, feynman_kac_distinct, rayleigh_local_time_check, second_moment_check,
    BridgeConfig,
};
use mlshe_core::detcalc::{interlace_determinant, interlace_integral};
use mlshe_core::error::{Error, Result};
use mlshe_core::grid::GridSpec;
use mlshe_core::kernels::{
    calibrated_constant, confluent_constants, heat_kernel, orientation_sign, superfactorial,
    vandermonde, WeylPoint,
};
use mlshe_core::pdesolve::{
    build_layers, gt_reconstruction_check, layer_residual, rsk_symmetry_check, s_evolution_residual,
    solve_smooth, HeatSurface, LayerStack,
};
use mlshe_core::polymer::{
    brute_force_two_path, multilayer_partition, single_path_partition, x_increments, DisorderPath,
    HierarchyTable,
};
use mlshe_core::potential::{Bump, PotentialField};
use mlshe_core::rngstream::stream_rng;
use mlshe_core::shelattice::{
    flow_property_check, line_ensemble_diagnostics, noise_shift_mean, pair_moment_exact,
    ratio_identity_check, NoiseField,
};
use mlshe_core::exec;
use rand::Rng;

use crate::config::{Experiment, ExperimentConfig};
use crate::rows::{LedgerEntry, Provenance, ResultRow};

pub struct SuiteOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<(String, f64)>,
    pub ledger: Vec<LedgerEntry>,
}

struct Collector {
    experiment: String,
    seed: u64,
    rows: Vec<ResultRow>,
    timings: Vec<(String, f64)>,
}

impl Collector {
    fn new(experiment: &str, seed: u64) -> Self {
        Collector {
            experiment: experiment.to_string(),
            seed,
            rows: Vec::new(),
            timings: Vec::new(),
        }
    }

    /// Two-sided check: pass iff |value - reference| <= tolerance.
    fn push(
        &mut self,
        check_id: &str,
        quantity: &str,
        value: f64,
        error_estimate: f64,
        reference: f64,
        provenance: Provenance,
        tolerance: f64,
    ) {
        let pass = (value - reference).abs() <= tolerance && value.is_finite();
        self.push_with(check_id, quantity, value, error_estimate, reference, provenance, tolerance, pass);
    }

    /// One-sided check: pass iff value >= reference (decay factors,
    /// positivity fractions).
    fn push_at_least(
        &mut self,
        check_id: &str,
        quantity: &str,
        value: f64,
        reference: f64,
        provenance: Provenance,
    ) {
        let pass = value >= reference && value.is_finite();
        self.push_with(check_id, quantity, value, 0.0, reference, provenance, 0.0, pass);
    }

    #[allow(clippy::too_many_arguments)]
    fn push_with(
        &mut self,
        check_id: &str,
        quantity: &str,
        value: f64,
        error_estimate: f64,
        reference: f64,
        provenance: Provenance,
        tolerance: f64,
        pass: bool,
    ) {
        self.rows.push(ResultRow {
            experiment: self.experiment.clone(),
            check_id: check_id.to_string(),
            quantity: quantity.to_string(),
            value,
            error_estimate,
            reference_value: reference,
            provenance,
            tolerance,
            pass,
            seed: self.seed,
        });
    }

    fn timed<T>(&mut self, id: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.timings.push((id.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo.abs() + hi.abs());
    if mid == 0.0 {
        0.0
    } else {
        (hi - lo) / mid
    }
}

/// `det[Z(t, x_i, y_j)] / (Delta(x) Delta(y))` from surface values; the
/// finite-spacing version of the confluent determinant.
fn confluent_divided(surface: &HeatSurface, x_idx: &[usize], y_idx: &[usize]) -> Result<f64> {
    let n = x_idx.len();
    if n != y_idx.len() {
        return Err(Error::domain("need square index sets"));
    }
    let xs: Vec<f64> = x_idx.iter().map(|&i| surface.grid.x_nodes[i]).collect();
    let ys: Vec<f64> = y_idx.iter().map(|&j| surface.grid.y_coord(j)).collect();
    let mut mat = vec![0.0; n * n];
    for (a, &ix) in x_idx.iter().enumerate() {
        for (b, &jy) in y_idx.iter().enumerate() {
            mat[a * n + b] = surface.value(ix, jy);
        }
    }
    let d = mlshe_core::linalg::det(&mat, n);
    Ok(d / (vandermonde(&xs) * vandermonde(&ys)))
}

/// The three calibration potentials: free field, the configured bump
/// list, and a flipped/shifted variant.
fn calibration_potentials(cfg: &ExperimentConfig) -> Vec<(String, PotentialField)> {
    let base = cfg.potential();
    let shifted = PotentialField::from_bumps(
        base.bumps
            .iter()
            .map(|b| Bump {
                amplitude: -0.6 * b.amplitude,
                center_t: b.center_t,
                center_y: b.center_y + 0.8,
                width_t: b.width_t,
                width_y: b.width_y,
            })
            .chain(std::iter::once(Bump {
                amplitude: 0.4,
                center_t: 0.3,
                center_y: -1.2,
                width_t: 0.25,
                width_y: 0.7,
            }))
            .collect(),
    );
    vec![
        ("free".to_string(), PotentialField::zero()),
        ("bump".to_string(), base),
        ("mixed".to_string(), shifted),
    ]
}

fn layer_value(stack: &LayerStack, n: usize, y: f64) -> f64 {
    LayerStack::interp(&stack.z_layers[n - 1], &stack.y, y)
}

pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut col = Collector::new("calibrate", cfg.master_seed);
    let grid = cfg.grid();
    let t = grid.t_final;
    let n_max = cfg.n_max;
    let ix = grid.x_nodes.len() / 2;
    if ix + n_max > grid.x_nodes.len() {
        return Err(Error::config("pencil too narrow for calibration differences"));
    }

    let mut per_n: Vec<Vec<f64>> = vec![Vec::new(); n_max + 1];
    col.timed("calibration", |col| {
        for (pname, phi) in calibration_potentials(cfg) {
            let surface = solve_smooth(&phi, &grid)?;
            let stack = build_layers(&surface, ix, n_max)?;
            let x = grid.x_nodes[ix];
            for n in 2..=n_max {
                // centered node sets around (x, y0): second-order accurate
                // and wide enough that the determinant survives cancellation
                let sy: i64 = 4;
                // offsets n-1, n-3, ..., -(n-1): decreasing, centered at 0
                let offs: Vec<i64> = (0..n).map(|k| n as i64 - 1 - 2 * k as i64).collect();
                let x_idx: Vec<usize> = offs.iter().map(|&o| (ix as i64 + o) as usize).collect();
                for p in 0..cfg.calibration_probes {
                    let y0 = x + (p as f64 - (cfg.calibration_probes as f64 - 1.0) / 2.0)
                        * 0.6
                        * t.sqrt();
                    let j0 = grid.nearest_y_index(y0);
                    let y_idx: Vec<usize> = offs
                        .iter()
                        .map(|&o| (j0 as i64 + o * sy) as usize)
                        .collect();
                    let hat_d = confluent_divided(&surface, &x_idx, &y_idx)?;
                    let sf = superfactorial(n);
                    let z_n = layer_value(&stack, n, grid.y_coord(j0));
                    let c_hat = z_n / (sf * sf * hat_d);
                    per_n[n].push(c_hat);
                    col.push(
                        &format!("calibration--n{n}--{pname}-p{p}"),
                        "empirical confluent normalization",
                        c_hat,
                        0.0,
                        calibrated_constant(n, t),
                        Provenance::CrossMethod,
                        2.0 * cfg.calibration_spread * calibrated_constant(n, t),
                    );
                }
            }
        }
        for n in 2..=n_max {
            col.push(
                &format!("calibration--n{n}-spread"),
                "relative spread across potentials and probes",
                spread(&per_n[n]),
                0.0,
                0.0,
                Provenance::CrossMethod,
                cfg.calibration_spread,
            );
        }
        Ok(())
    })?;

    let mut ledger = Vec::new();
    for n in 1..=n_max {
        let c = confluent_constants(n, t)?;
        ledger.push(LedgerEntry {
            name: format!("confluent-normalization-n{n}"),
            n,
            t,
            printed_value: c.printed_constant,
            calibrated_value: c.calibrated_constant,
            orientation_sign: c.orientation_sign,
            probe_count: per_n.get(n).map_or(0, |v| v.len()),
        });
    }
    Ok(SuiteOutput {
        rows: col.rows,
        timings: col.timings,
        ledger,
    })
}

pub fn run_smooth(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut col = Collector::new("smooth-suite", cfg.master_seed);
    let t = cfg.t_final;
    let phi = cfg.potential();

    // free-field exactness and kernel powers
    col.timed("free-field", |col| {
        let grid = cfg.free_field_grid();
        let surface = solve_smooth(&PotentialField::zero(), &grid)?;
        let mut max_rel = 0.0f64;
        for (ix, &x) in grid.x_nodes.iter().enumerate() {
            for j in 0..grid.n_y {
                let y = grid.y_coord(j);
                if !grid.in_trust_region(x, y) {
                    continue;
                }
                let p = heat_kernel(surface.t_final(), x, y)?;
                max_rel = max_rel.max((surface.value(ix, j) - p).abs() / p);
            }
        }
        col.push(
            "free-field--max-rel",
            "max relative error vs heat kernel on trust region",
            max_rel,
            0.0,
            0.0,
            Provenance::ClosedForm,
            cfg.free_field_rel,
        );

        let ix = grid.x_nodes.len() / 2;
        let x = grid.x_nodes[ix];
        let stack = build_layers(&surface, ix, cfg.n_max)?;
        for n in 1..=cfg.n_max {
            let mut max_rel = 0.0f64;
            for (jj, &y) in stack.y.iter().enumerate() {
                if (y - x).abs() > 2.0 * surface.t_final().sqrt() {
                    continue;
                }
                let p = heat_kernel(surface.t_final(), x, y)?.powi(n as i32);
                max_rel = max_rel.max((stack.z_layers[n - 1][jj] - p).abs() / p);
            }
            col.push(
                &format!("kernel-power--n{n}"),
                "max relative error of layer vs kernel power",
                max_rel,
                0.0,
                0.0,
                Provenance::ClosedForm,
                cfg.kernel_power_rel,
            );
        }
        Ok(())
    })?;

    // distinct-endpoint determinant kernel vs path-integral Monte Carlo
    col.timed("fk-det", |col| {
        let wide = GridSpec::with_pencil(
            cfg.x_center - cfg.y_halfwidth,
            cfg.x_center + cfg.y_halfwidth,
            cfg.n_y,
            cfg.n_t,
            t,
            cfg.x_center,
            12,
            cfg.init_epsilon,
        );
        let surface = solve_smooth(&phi, &wide)?;
        let dy = wide.dy();
        let np = wide.x_nodes.len();
        let xi = [np - 1, 0]; // widest pencil pair, decreasing coordinates
        let x = WeylPoint::new(xi.iter().map(|&i| wide.x_nodes[i]).collect())?;
        let j1 = wide.nearest_y_index(cfg.x_center + 0.45);
        let j2 = wide.nearest_y_index(cfg.x_center - 0.55);
        let y = WeylPoint::new(vec![wide.y_coord(j1), wide.y_coord(j2)])?;
        let tf = surface.t_final();
        let det_pde = {
            let z = |a: usize, b: usize| surface.value(xi[a], [j1, j2][b]);
            z(0, 0) * z(1, 1) - z(0, 1) * z(1, 0)
        };
        let mc = feynman_kac_distinct(
            &phi,
            tf,
            &x,
            &y,
            &BridgeConfig {
                n_steps: cfg.bridge_steps,
                n_samples: cfg.mc_samples,
                seed: cfg.master_seed ^ 0x66b1,
            },
        )?;
        // PDE-side error: second order in dy, measured against the free
        // field at this resolution
        let pde_err = det_pde.abs() * (dy / 0.04).powi(2) * 2.7e-3;
        col.push(
            "fk-det--n2",
            "bridge MC estimate of the 2x2 determinant kernel",
            mc.mean,
            mc.stderr,
            det_pde,
            Provenance::CrossMethod,
            3.0 * (mc.stderr + pde_err),
        );
        col.push(
            "fk-det--n2-stderr",
            "MC relative standard error",
            mc.stderr / mc.mean.abs(),
            0.0,
            0.0,
            Provenance::CrossMethod,
            0.01,
        );
        Ok(())
    })?;

    // confluent determinant: delta-extrapolated MC vs calibrated Wronskian
    col.timed("confluent-mc", |col| {
        let grid = cfg.grid();
        let surface = solve_smooth(&phi, &grid)?;
        let ix = grid.x_nodes.len() / 2;
        let stack = build_layers(&surface, ix, 2)?;
        let y_probe = cfg.x_center + 0.2;
        let z2 = layer_value(&stack, 2, y_probe);
        let mc = feynman_kac_confluent(
            &phi,
            surface.t_final(),
            grid.x_nodes[ix],
            y_probe,
            2,
            0.4,
            &BridgeConfig {
                n_steps: cfg.bridge_steps,
                n_samples: cfg.mc_samples,
                seed: cfg.master_seed ^ 0x51c0,
            },
        )?;
        // the confluent normalization relates the raw limit to Z_2
        let scale = calibrated_constant(2, surface.t_final()) * superfactorial(2).powi(2);
        let est = mc.richardson * scale;
        let se = mc.stderr * scale;
        col.push(
            "confluent-mc--n2",
            "delta-extrapolated MC vs calibrated Wronskian layer",
            est,
            se,
            z2,
            Provenance::CrossMethod,
            3.0 * se,
        );
        Ok(())
    })?;

    // interlacing-volume reconstruction and the exact reduction identity
    col.timed("gt-ratio", |col| {
        let grid = cfg.grid();
        let surface = solve_smooth(&phi, &grid)?;
        let ix = grid.x_nodes.len() / 2;
        for n in 2..=cfg.n_max.min(3) {
            let mut ratios = Vec::new();
            for p in 0..cfg.gt_probes {
                let c = cfg.x_center + 0.25 * (p as f64 - (cfg.gt_probes as f64 - 1.0) / 2.0);
                let half = 0.35 + 0.05 * p as f64;
                let coords: Vec<f64> = (0..n)
                    .map(|k| c + half * (1.0 - 2.0 * k as f64 / (n as f64 - 1.0)))
                    .collect();
                let y = WeylPoint::new(coords)?;
                let rec = gt_reconstruction_check(&surface, ix, &y, n, cfg.gt_quad_intervals)?;
                ratios.push(rec.ratio_alt);
            }
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            for (p, r) in ratios.iter().enumerate() {
                col.push(
                    &format!("gt-ratio--n{n}-p{p}"),
                    "determinant-to-volume ratio at one probe",
                    *r,
                    0.0,
                    mean,
                    Provenance::CrossMethod,
                    cfg.gt_ratio_spread * mean.abs(),
                );
            }
            col.push(
                &format!("gt-ratio--n{n}-spread"),
                "ratio spread across probes",
                spread(&ratios),
                0.0,
                0.0,
                Provenance::CrossMethod,
                cfg.gt_ratio_spread,
            );
        }

        // exact reduction: integral over interlacing points vs signed
        // determinant, random polynomial families
        let mut rng = stream_rng(cfg.master_seed, &[0x17ace]);
        for n in 2..=3usize {
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let coeffs: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..=i + 1).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let mut ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                ys.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if (0..n - 1).any(|i| ys[i] - ys[i + 1] < 0.05) {
                    continue;
                }
                let fs: Vec<Box<dyn Fn(f64) -> f64>> = (0..n)
                    .map(|i| -> Box<dyn Fn(f64) -> f64> {
                        if i == 0 {
                            Box::new(|_| 1.0)
                        } else {
                            let c = coeffs[i].clone();
                            Box::new(move |z| {
                                c.iter().rev().fold(0.0, |acc, &ck| acc * z + ck)
                            })
                        }
                    })
                    .collect();
                let y = WeylPoint::new(ys)?;
                let lhs = interlace_integral(&fs, &y)?;
                let rhs = orientation_sign(n) * interlace_determinant(&fs, &y)?;
                let scale = lhs.abs().max(rhs.abs()).max(1e-3);
                worst = worst.max((lhs - rhs).abs() / scale);
            }
            col.push(
                &format!("interlace--n{n}"),
                "worst relative mismatch over 20 random families",
                worst,
                0.0,
                0.0,
                Provenance::ClosedForm,
                cfg.interlace_abs,
            );
        }
        Ok(())
    })?;

    // evolution-equation residuals under grid refinement
    col.timed("layer-residual", |col| {
        let coarse = GridSpec::with_pencil(
            cfg.x_center - cfg.y_halfwidth,
            cfg.x_center + cfg.y_halfwidth,
            cfg.residual_n_y,
            cfg.residual_n_t,
            t,
            cfg.x_center,
            cfg.pencil_halfwidth,
            cfg.init_epsilon,
        );
        let fine = coarse.refined();
        let sc = solve_smooth(&phi, &coarse)?;
        let sf = solve_smooth(&phi, &fine)?;
        let ix = coarse.x_nodes.len() / 2;
        let rc = layer_residual(&sc, ix, 2)?;
        let rf = layer_residual(&sf, ix, 2)?;
        for n in 1..=2usize {
            col.push(
                &format!("layer-residual--n{n}"),
                "residual decay factor per grid halving",
                rc.l2_norm[n - 1] / rf.l2_norm[n - 1],
                0.0,
                4.0,
                Provenance::Refinement,
                1.0,
            );
        }
        let ec = s_evolution_residual(&sc, ix, 2, true)?;
        let ef = s_evolution_residual(&sf, ix, 2, true)?;
        col.push(
            "s-evolution--n1",
            "cross-derivative field residual decay factor",
            ec.l2_norm[0] / ef.l2_norm[0],
            0.0,
            4.0,
            Provenance::Refinement,
            1.0,
        );
        Ok(())
    })?;

    // reflection symmetry for an off-center bump
    col.timed("rsk", |col| {
        let grid = cfg.grid();
        let mut bumps = cfg.bumps.clone();
        if bumps.is_empty() {
            bumps = PotentialField::single_bump().bumps;
        }
        for b in &mut bumps {
            b.center_y += 0.6;
        }
        let report = rsk_symmetry_check(&PotentialField::from_bumps(bumps), &grid, cfg.n_max)?;
        for (n, err) in report.max_rel_err.iter().enumerate() {
            col.push(
                &format!("rsk--n{}", n + 1),
                "max relative reflection mismatch of layer ratio",
                *err,
                0.0,
                0.0,
                Provenance::ClosedForm,
                cfg.rsk_rel,
            );
        }
        Ok(())
    })?;

    Ok(SuiteOutput {
        rows: col.rows,
        timings: col.timings,
        ledger: Vec::new(),
    })
}

pub fn run_bridges(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut col = Collector::new("bridges-suite", cfg.master_seed);
    let t = cfg.t_final;

    col.timed("rayleigh", |col| {
        let report = rayleigh_local_time_check(
            t,
            cfg.local_time_eps,
            &BridgeConfig {
                n_steps: cfg.local_time_steps,
                n_samples: cfg.mc_samples,
                seed: cfg.master_seed ^ 0x4a71,
            },
        )?;
        col.push(
            "rayleigh--ks",
            "KS distance of scaled local time from the Rayleigh law",
            report.statistic,
            0.0,
            0.0,
            Provenance::ClosedForm,
            cfg.rayleigh_ks,
        );
        Ok(())
    })?;

    col.timed("second-moment-bridge", |col| {
        for (tag, tv) in [("t025", 0.25), ("t1", t)] {
            let (mc, closed) = second_moment_check(
                tv,
                cfg.second_moment_eps,
                &BridgeConfig {
                    n_steps: cfg.local_time_steps,
                    n_samples: cfg.second_moment_samples,
                    seed: cfg.master_seed ^ 0x2b90,
                },
            )?;
            col.push(
                &format!("second-moment--bridge-{tag}"),
                "pair exponential local-time moment vs closed form",
                mc.mean,
                mc.stderr,
                closed,
                Provenance::ClosedForm,
                3.0 * mc.stderr + 0.02 * closed,
            );
        }
        Ok(())
    })?;

    Ok(SuiteOutput {
        rows: col.rows,
        timings: col.timings,
        ledger: Vec::new(),
    })
}

pub fn run_lattice(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut col = Collector::new("lattice-suite", cfg.master_seed);
    let seed = cfg.master_seed;

    // noise stream reproducibility: regeneration, replay file, moments
    col.timed("noise-replay", |col| {
        let grid = cfg.lattice_grid(cfg.t_final, 1);
        let noise = NoiseField::for_grid(seed ^ 0x7e11, &grid);
        let again = NoiseField::for_grid(seed ^ 0x7e11, &grid);
        let identical = noise.data() == again.data();
        col.push_with(
            "noise-replay--regenerate",
            "bitwise identity of regenerated noise",
            if identical { 1.0 } else { 0.0 },
            0.0,
            1.0,
            Provenance::ClosedForm,
            0.0,
            identical,
        );
        let path = std::env::temp_dir().join(format!("mlshe-noise-{}.bin", seed));
        noise.export(&path)?;
        let back = NoiseField::import(&path)?;
        let _ = std::fs::remove_file(&path);
        let round = back.data() == noise.data() && back.seed == noise.seed;
        col.push_with(
            "noise-replay--round-trip",
            "bitwise identity after export/import",
            if round { 1.0 } else { 0.0 },
            0.0,
            1.0,
            Provenance::ClosedForm,
            0.0,
            round,
        );
        let (mean, var) = noise.sample_moments();
        let bound = 4.0 / ((noise.n_t * noise.n_y) as f64).sqrt();
        col.push(
            "noise-moments--mean",
            "sample mean of the unit-variance field",
            mean,
            bound / 4.0,
            0.0,
            Provenance::ClosedForm,
            bound,
        );
        col.push(
            "noise-moments--var",
            "sample variance of the unit-variance field",
            var,
            bound / 4.0,
            1.0,
            Provenance::ClosedForm,
            2.0 * bound,
        );
        Ok(())
    })?;

    // flow composition across a split time
    col.timed("flow", |col| {
        let grid = cfg.lattice_grid(cfg.t_final, 1);
        let zero = NoiseField::zeroed(&grid);
        let rep = flow_property_check(&zero, &grid, grid.n_t / 2)?;
        let worst = rep.rel_err.iter().cloned().fold(0.0f64, f64::max);
        col.push(
            "flow--zero-noise",
            "worst relative composition error with zero noise",
            worst,
            0.0,
            0.0,
            Provenance::CrossMethod,
            1e-8,
        );
        let noise = NoiseField::for_grid(seed ^ 0x3f2a, &grid);
        let rep = flow_property_check(&noise, &grid, grid.n_t / 2)?;
        let worst = rep.rel_err.iter().cloned().fold(0.0f64, f64::max);
        col.push(
            "flow--generic",
            "worst relative composition error with sampled noise",
            worst,
            0.0,
            0.0,
            Provenance::CrossMethod,
            2e-2,
        );
        Ok(())
    })?;

    // second-moment identity against bridge pairs, via the exact moment
    // march (noise multipliers are independent across steps, so the pair
    // moment closes and needs no sampling)
    col.timed("second-moment-lattice", |col| {
        for (tag, tv) in [("t025", 0.25), ("t1", cfg.t_final)] {
            let grid = cfg.second_moment_grid(tv);
            let iy = grid.nearest_y_index(cfg.x_center);
            let moment = pair_moment_exact(&grid, 0)?;
            let p = heat_kernel(grid.t_final, cfg.x_center, grid.y_coord(iy))?;
            let ratio = moment[iy * grid.n_y + iy] / (p * p);
            let (mc, closed) = second_moment_check(
                grid.t_final,
                cfg.second_moment_eps,
                &BridgeConfig {
                    n_steps: cfg.local_time_steps,
                    n_samples: cfg.second_moment_samples,
                    seed: seed ^ 0x2b90,
                },
            )?;
            col.push(
                &format!("second-moment--lattice-{tag}"),
                "lattice second moment over squared kernel vs bridge pairs",
                ratio,
                0.0,
                mc.mean,
                Provenance::CrossMethod,
                cfg.second_moment_rel * closed + 3.0 * mc.stderr,
            );
            col.push(
                &format!("diag-second-moment--closed-{tag}"),
                "lattice second moment vs continuum closed form",
                ratio,
                0.0,
                closed,
                Provenance::ClosedForm,
                cfg.second_moment_rel * closed,
            );
        }
        Ok(())
    })?;

    // deterministic shift of the noise vs the smooth solver
    col.timed("cm-shift", |col| {
        let grid = cfg.lattice_grid(cfg.t_final, 1);
        let c = grid.nearest_y_index(cfg.x_center);
        let probes = vec![c - 8, c, c + 8];
        let rep = noise_shift_mean(&cfg.potential(), &grid, &probes, cfg.shift_realizations, seed ^ 0x9c4d)?;
        for (k, &j) in rep.y_probes.iter().enumerate() {
            col.push(
                &format!("cm-shift--probe{k}"),
                "shifted ensemble mean vs deterministic solve",
                rep.mean[k],
                rep.stderr[k],
                rep.reference[k],
                Provenance::CrossMethod,
                3.0 * rep.stderr[k],
            );
            let _ = j;
        }
        col.push(
            "cm-shift--det",
            "shifted ensemble mean of the 2x2 determinant",
            rep.det_mean,
            rep.det_stderr,
            rep.det_reference,
            Provenance::CrossMethod,
            3.0 * rep.det_stderr,
        );
        Ok(())
    })?;

    // confluent ratio identity: telescoping form and refinement decay
    col.timed("ratio-identity", |col| {
        let grid = cfg.lattice_grid(cfg.t_final, 1);
        let c = grid.nearest_y_index(cfg.x_center);
        let (i_y1, i_y2) = (c + 6, c - 6);
        let base = ratio_identity_check(&grid, 0, i_y1, i_y2, cfg.ratio_realizations, seed ^ 0x8d2e)?;
        let mut exact = base.rel_diff_exact.clone();
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let exact_med = exact[exact.len() / 2];
        col.push(
            "ratio-identity--telescoping",
            "median relative gap of the telescoping form",
            exact_med,
            0.0,
            0.0,
            Provenance::ClosedForm,
            1e-9,
        );
        let fine = grid.refined();
        let cf = fine.nearest_y_index(cfg.x_center);
        let ref_rep =
            ratio_identity_check(&fine, 0, cf + 12, cf - 12, cfg.ratio_realizations, seed ^ 0x8d2e)?;
        col.push_at_least(
            "ratio-identity--decay",
            "median mismatch decay factor per grid halving",
            base.median_rel / ref_rep.median_rel,
            cfg.ratio_decay_factor,
            Provenance::Refinement,
        );
        Ok(())
    })?;

    // layer positivity diagnostics (reported, not gating)
    col.timed("line-ensemble", |col| {
        let grid = cfg.lattice_grid(cfg.t_final, 2);
        let rep = line_ensemble_diagnostics(&grid, 1, 3, cfg.ensemble_realizations, seed ^ 0x11aa)?;
        for (n, frac) in rep.positive_fraction.iter().enumerate() {
            col.push_at_least(
                &format!("diag-line-ensemble--n{}", n + 1),
                "positive fraction of layer ratios in the trust region",
                *frac,
                0.99,
                Provenance::CrossMethod,
            );
        }
        Ok(())
    })?;

    Ok(SuiteOutput {
        rows: col.rows,
        timings: col.timings,
        ledger: Vec::new(),
    })
}

pub fn run_polymer(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut col = Collector::new("polymer-suite", cfg.master_seed);
    let t = 1.0;

    col.timed("polymer-closed-forms", |col| {
        let path = DisorderPath::zero(5, cfg.polymer_m, t);
        let table = HierarchyTable::build(&path)?;
        let mut worst = 0.0f64;
        for i in 0..5usize {
            for j in i..5usize {
                let exact = t.powi((j - i) as i32)
                    / (1..=(j - i)).map(|k| k as f64).product::<f64>();
                worst = worst.max((table.z(i, j) - exact).abs() / exact);
            }
        }
        col.push(
            "polymer--simplex-volumes",
            "zero-disorder single-path weights vs simplex volumes",
            worst,
            0.0,
            0.0,
            Provenance::ClosedForm,
            8.0 / (cfg.polymer_m as f64).powi(2),
        );
        let zn = multilayer_partition(&table, 5)?;
        col.push(
            "polymer--full-determinant",
            "zero-disorder full-hierarchy weight",
            zn,
            0.0,
            1.0,
            Provenance::ClosedForm,
            1e-9,
        );
        Ok(())
    })?;

    col.timed("polymer-lgv", |col| {
        let rels: Vec<f64> = exec::map_indexed(cfg.polymer_seeds, |s| {
            let path = DisorderPath::sample(cfg.master_seed.wrapping_add(s as u64), 3, cfg.polymer_m, t);
            let table = HierarchyTable::build(&path).expect("table");
            let det = multilayer_partition(&table, 2).expect("det");
            let brute = brute_force_two_path(&path).expect("brute");
            (det - brute).abs() / brute.abs()
        });
        let worst = rels.iter().cloned().fold(0.0f64, f64::max);
        col.push(
            "polymer--lgv-n2",
            "worst relative gap of determinant vs direct two-path quadrature",
            worst,
            0.0,
            0.0,
            Provenance::CrossMethod,
            cfg.polymer_rel,
        );
        Ok(())
    })?;

    col.timed("polymer-shift", |col| {
        let base = DisorderPath::sample(cfg.master_seed ^ 0x77, 3, cfg.polymer_m, t);
        let c = 0.37;
        let shifted = DisorderPath {
            t: base.t,
            b: base.b.iter().map(|row| row.iter().map(|v| v + c).collect()).collect(),
        };
        let zs = |p: &DisorderPath| -> Result<Vec<f64>> {
            let table = HierarchyTable::build(p)?;
            (1..=3).map(|n| multilayer_partition(&table, n)).collect()
        };
        let x0 = x_increments(&zs(&base)?)?;
        let x1 = x_increments(&zs(&shifted)?)?;
        let worst = x0
            .iter()
            .zip(&x1)
            .map(|(a, b)| ((b - a) - c).abs())
            .fold(0.0f64, f64::max);
        col.push(
            "polymer--shift-covariance",
            "worst deviation of increment shift from the disorder shift",
            worst,
            0.0,
            0.0,
            Provenance::ClosedForm,
            1e-9,
        );
        let single = single_path_partition(&base, 0, 0)?;
        let _ = single;
        Ok(())
    })?;

    Ok(SuiteOutput {
        rows: col.rows,
        timings: col.timings,
        ledger: Vec::new(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut out = SuiteOutput {
        rows: Vec::new(),
        timings: Vec::new(),
        ledger: Vec::new(),
    };
    let mut merge = |s: SuiteOutput| {
        out.rows.extend(s.rows);
        out.timings.extend(s.timings);
        out.ledger.extend(s.ledger);
    };
    match cfg.experiment {
        Experiment::Calibrate => merge(run_calibrate(cfg)?),
        Experiment::SmoothSuite => merge(run_smooth(cfg)?),
        Experiment::BridgesSuite => merge(run_bridges(cfg)?),
        Experiment::LatticeSuite => merge(run_lattice(cfg)?),
        Experiment::PolymerSuite => merge(run_polymer(cfg)?),
        Experiment::All => {
            merge(run_calibrate(cfg)?);
            merge(run_smooth(cfg)?);
            merge(run_bridges(cfg)?);
            merge(run_lattice(cfg)?);
            merge(run_polymer(cfg)?);
        }
    }
    Ok(out)
}

/// Self-audit: every claim named in the coverage map must receive at
/// least one row when the full suite runs.
pub fn covered_claims(rows: &[ResultRow]) -> Vec<&'static str> {
    let mut claims: Vec<&'static str> = rows.iter().map(|r| crate::rows::claim_for(&r.check_id)).collect();
    claims.sort();
    claims.dedup();
    claims
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn km_and_gt_constants_agree() {
        // sanity pin for the suite-level constants
        use mlshe_core::kernels::{gt_orientation_sign, km_density, printed_constant};
        let t = 1.3;
        assert!((printed_constant(2, t) / calibrated_constant(2, t) - 1.0).abs() < 1e-12);
        assert_eq!(gt_orientation_sign(3), -1.0);
        let x = WeylPoint::new(vec![0.4, -0.2]).unwrap();
        assert!(km_density(t, &x, &x).unwrap() > 0.0);
    }
}
