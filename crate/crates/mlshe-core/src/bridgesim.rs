//! Brownian-bridge Monte Carlo: non-intersecting ensembles with crossing
//! corrections, Feynman–Kac estimators for the multi-layer kernel, and
//! intersection local time with its Rayleigh law.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec;
use crate::kernels::{km_density, vandermonde, WeylPoint};
use crate::potential::PotentialField;
use crate::rngstream::stream_rng;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Sampling parameters shared by the bridge estimators.
#[derive(Debug, Clone, Copy)]
pub struct BridgeConfig {
    pub n_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
}

const CHUNKS: usize = 16;

fn check_cfg(cfg: &BridgeConfig, t: f64) -> Result<()> {
    if cfg.n_steps < 2 {
        return Err(Error::config("n_steps must be at least 2"));
    }
    if cfg.n_samples < CHUNKS {
        return Err(Error::config("n_samples too small"));
    }
    if !(t > 0.0) {
        return Err(Error::domain("time horizon must be positive"));
    }
    Ok(())
}

/// Samples a bridge from `x` at time 0 to `y` at time `t` by sequential
/// conditioning; returns `n_steps + 1` values including both endpoints.
pub fn sample_bridge<R: Rng>(rng: &mut R, x: f64, y: f64, t: f64, n_steps: usize) -> Vec<f64> {
    let dt = t / n_steps as f64;
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(x);
    let mut v = x;
    for k in 0..n_steps - 1 {
        let rem = t - k as f64 * dt;
        let mean = v + (y - v) * dt / rem;
        let var = dt * (rem - dt) / rem;
        let z: f64 = StandardNormal.sample(rng);
        v = mean + var.sqrt() * z;
        path.push(v);
    }
    path.push(y);
    path
}

/// Exact non-crossing probability for two independent bridges over `[0, t]`
/// with start gap `d0` and end gap `d1` (both positive), by the reflection
/// principle applied to the rate-2 difference bridge.
pub fn noncrossing_probability_exact(d0: f64, d1: f64, t: f64) -> Result<f64> {
    if !(d0 > 0.0 && d1 > 0.0 && t > 0.0) {
        return Err(Error::domain("gaps and horizon must be positive"));
    }
    Ok(1.0 - (-d0 * d1 / t).exp())
}

/// One ensemble draw: independent bridges with an ordering weight. The
/// weight is 0 if any adjacent pair crosses on the grid; otherwise it is
/// the product over steps and adjacent pairs of the probability that the
/// rate-2 difference bridge stays positive between grid points,
/// `1 - exp(-g_k g_{k+1} / dt)`.
pub struct EnsembleDraw {
    pub paths: Vec<Vec<f64>>,
    pub weight: f64,
}

/// Draws `n` bridges from the coordinates of `x` to those of `y` and
/// assigns the non-crossing correction weight.
pub fn sample_nonintersecting<R: Rng>(
    rng: &mut R,
    x: &WeylPoint,
    y: &WeylPoint,
    t: f64,
    n_steps: usize,
) -> EnsembleDraw {
    let n = x.len();
    let dt = t / n_steps as f64;
    let paths: Vec<Vec<f64>> = (0..n)
        .map(|i| sample_bridge(rng, x.coords()[i], y.coords()[i], t, n_steps))
        .collect();
    let mut log_w = 0.0;
    'outer: for i in 0..n.saturating_sub(1) {
        // coordinates are decreasing: gap = path_i - path_{i+1}
        for k in 0..n_steps {
            let g0 = paths[i][k] - paths[i + 1][k];
            let g1 = paths[i][k + 1] - paths[i + 1][k + 1];
            if g0 <= 0.0 || g1 <= 0.0 {
                log_w = f64::NEG_INFINITY;
                break 'outer;
            }
            log_w += (-(-g0 * g1 / dt).exp()).ln_1p();
        }
    }
    EnsembleDraw {
        paths,
        weight: if log_w.is_finite() { log_w.exp() } else { 0.0 },
    }
}

/// Estimates the probability that independent bridges stay strictly
/// ordered, as the mean correction weight.
pub fn acceptance_estimate(
    x: &WeylPoint,
    y: &WeylPoint,
    t: f64,
    cfg: &BridgeConfig,
) -> Result<McEstimate> {
    check_cfg(cfg, t)?;
    if x.len() != y.len() {
        return Err(Error::domain("endpoint vectors must have equal length"));
    }
    let per = cfg.n_samples / CHUNKS;
    let chunks: Vec<Vec<f64>> = exec::map_indexed(CHUNKS, |c| {
        let mut rng = stream_rng(cfg.seed, &[0x61cc, c as u64]);
        (0..per)
            .map(|_| sample_nonintersecting(&mut rng, x, y, t, cfg.n_steps).weight)
            .collect()
    });
    let all: Vec<f64> = chunks.into_iter().flatten().collect();
    let (mean, stderr) = exec::mean_stderr(&all);
    Ok(McEstimate {
        mean,
        stderr,
        n_samples: all.len(),
    })
}

fn path_potential_integral(phi: &PotentialField, path: &[f64], t: f64) -> f64 {
    let n_steps = path.len() - 1;
    let dt = t / n_steps as f64;
    let mut acc = 0.0;
    for (k, &v) in path.iter().enumerate() {
        let w = if k == 0 || k == n_steps { 0.5 } else { 1.0 };
        acc += w * phi.eval(k as f64 * dt, v);
    }
    acc * dt
}

fn ratio_estimate(num: &[f64], den: &[f64]) -> (f64, f64) {
    let n = num.len() as f64;
    let mn: f64 = num.iter().sum::<f64>() / n;
    let md: f64 = den.iter().sum::<f64>() / n;
    let r = mn / md;
    // linearized variance of the ratio estimator
    let var: f64 = num
        .iter()
        .zip(den)
        .map(|(&a, &b)| {
            let d = (a - r * b) / md;
            d * d
        })
        .sum::<f64>()
        / (n * (n - 1.0));
    (r, var.sqrt())
}

/// Feynman–Kac estimate of the multi-layer kernel at distinct endpoints:
/// Karlin–McGregor density times the weighted expectation of
/// `exp(sum_i int phi(s, X_i(s)) ds)` over the ordered ensemble.
pub fn feynman_kac_distinct(
    phi: &PotentialField,
    t: f64,
    x: &WeylPoint,
    y: &WeylPoint,
    cfg: &BridgeConfig,
) -> Result<McEstimate> {
    check_cfg(cfg, t)?;
    if x.len() != y.len() {
        return Err(Error::domain("endpoint vectors must have equal length"));
    }
    let density = km_density(t, x, y)?;
    let per = cfg.n_samples / CHUNKS;
    let chunks: Vec<Vec<(f64, f64)>> = exec::map_indexed(CHUNKS, |c| {
        let mut rng = stream_rng(cfg.seed, &[0xfe9c, c as u64]);
        (0..per)
            .map(|_| {
                let draw = sample_nonintersecting(&mut rng, x, y, t, cfg.n_steps);
                if draw.weight == 0.0 {
                    return (0.0, 0.0);
                }
                let s: f64 = draw
                    .paths
                    .iter()
                    .map(|p| path_potential_integral(phi, p, t))
                    .sum();
                (draw.weight * s.exp(), draw.weight)
            })
            .collect()
    });
    let all: Vec<(f64, f64)> = chunks.into_iter().flatten().collect();
    let num: Vec<f64> = all.iter().map(|p| p.0).collect();
    let den: Vec<f64> = all.iter().map(|p| p.1).collect();
    if den.iter().sum::<f64>() == 0.0 {
        return Err(Error::Infeasible(
            "no ordered ensemble draws survived; endpoints too close for this grid".into(),
        ));
    }
    let (r, se) = ratio_estimate(&num, &den);
    Ok(McEstimate {
        mean: density * r,
        stderr: density * se,
        n_samples: all.len(),
    })
}

/// Confluent-limit estimate at coincident endpoints via splayed probes at
/// spacing `delta` and `delta / 2` with Richardson extrapolation.
#[derive(Debug, Clone, Copy)]
pub struct ConfluentEstimate {
    pub coarse: f64,
    pub fine: f64,
    pub richardson: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

fn splay(center: f64, n: usize, delta: f64) -> Result<WeylPoint> {
    let v: Vec<f64> = (0..n)
        .map(|i| center + delta * ((n - 1) as f64 / 2.0 - i as f64))
        .collect();
    WeylPoint::new(v)
}

/// Estimates the n-layer kernel at coincident points `x`, `y`:
/// `det[p(t, x_i, y_j)] E[exp(sum phi)] / (Delta(x) Delta(y))` at probe
/// spacings `delta` and `delta/2`, extrapolated at second order.
pub fn feynman_kac_confluent(
    phi: &PotentialField,
    t: f64,
    x: f64,
    y: f64,
    n: usize,
    delta: f64,
    cfg: &BridgeConfig,
) -> Result<ConfluentEstimate> {
    if n < 2 {
        return Err(Error::domain("confluent estimate needs n >= 2"));
    }
    if !(delta > 0.0) {
        return Err(Error::domain("probe spacing must be positive"));
    }
    let eval = |d: f64, salt: u64| -> Result<(f64, f64)> {
        let xs = splay(x, n, d)?;
        let ys = splay(y, n, d)?;
        let mut c = *cfg;
        c.seed = cfg.seed.wrapping_add(salt);
        let est = feynman_kac_distinct(phi, t, &xs, &ys, &c)?;
        let norm = vandermonde(xs.coords()) * vandermonde(ys.coords());
        Ok((est.mean / norm, est.stderr / norm))
    };
    let (coarse, _) = eval(delta, 1)?;
    let (fine, se_f) = eval(delta / 2.0, 2)?;
    Ok(ConfluentEstimate {
        coarse,
        fine,
        richardson: (4.0 * fine - coarse) / 3.0,
        stderr: se_f,
        n_samples: cfg.n_samples,
    })
}

/// Discretized intersection local time `int_0^t delta(a_s - b_s) ds`,
/// counted on a band of half width `eps`. Errors if `eps` is below the
/// step resolution `sqrt(dt) / 2`.
pub fn intersection_local_time(a: &[f64], b: &[f64], dt: f64, eps: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain("paths must share a grid"));
    }
    if eps < dt.sqrt() / 2.0 {
        return Err(Error::config(format!(
            "band width {eps} below step resolution {}",
            dt.sqrt() / 2.0
        )));
    }
    let hits = a
        .iter()
        .zip(b)
        .skip(1)
        .filter(|(&u, &v)| (u - v).abs() < eps)
        .count();
    Ok(hits as f64 * dt / (2.0 * eps))
}

/// Kolmogorov–Smirnov comparison of a sample against a reference CDF.
#[derive(Debug, Clone, Copy)]
pub struct KsReport {
    pub statistic: f64,
    pub threshold: f64,
    pub n_samples: usize,
}

impl KsReport {
    pub fn passed(&self) -> bool {
        self.statistic < self.threshold
    }
}

fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Samples intersection local times of pinned bridge pairs over `[0, t]`
/// and tests `sqrt(2) L / sqrt(t)` against the standard Rayleigh law.
pub fn rayleigh_local_time_check(t: f64, eps: f64, cfg: &BridgeConfig) -> Result<KsReport> {
    check_cfg(cfg, t)?;
    let dt = t / cfg.n_steps as f64;
    if eps < dt.sqrt() / 2.0 {
        return Err(Error::config("band width below step resolution"));
    }
    let per = cfg.n_samples / CHUNKS;
    let chunks: Vec<Vec<f64>> = exec::map_indexed(CHUNKS, |c| {
        let mut rng = stream_rng(cfg.seed, &[0x4a7e, c as u64]);
        (0..per)
            .map(|_| {
                let a = sample_bridge(&mut rng, 0.0, 0.0, t, cfg.n_steps);
                let b = sample_bridge(&mut rng, 0.0, 0.0, t, cfg.n_steps);
                let l = intersection_local_time(&a, &b, dt, eps).unwrap();
                l * std::f64::consts::SQRT_2 / t.sqrt()
            })
            .collect()
    });
    let mut all: Vec<f64> = chunks.into_iter().flatten().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stat = ks_statistic(&all, |r| {
        if r <= 0.0 {
            0.0
        } else {
            1.0 - (-0.5 * r * r).exp()
        }
    });
    // allowance for the discretization bias of the band-count estimator
    let threshold = 1.63 / (all.len() as f64).sqrt() + 0.35 * eps / t.sqrt();
    Ok(KsReport {
        statistic: stat,
        threshold,
        n_samples: all.len(),
    })
}

/// Error-function approximation (Abramowitz–Stegun 7.1.26, |err| < 1.5e-7).
pub fn erf(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    s * (1.0 - poly * (-x * x).exp())
}

/// Second-moment identity for the single-layer kernel: the Monte Carlo
/// mean of `exp(L)` over pinned bridge pairs against the closed form
/// `1 + (sqrt(pi t)/2) e^{t/4} (1 + erf(sqrt(t)/2))`.
pub fn second_moment_check(t: f64, eps: f64, cfg: &BridgeConfig) -> Result<(McEstimate, f64)> {
    check_cfg(cfg, t)?;
    let dt = t / cfg.n_steps as f64;
    let per = cfg.n_samples / CHUNKS;
    let chunks: Vec<Vec<f64>> = exec::map_indexed(CHUNKS, |c| {
        let mut rng = stream_rng(cfg.seed, &[0x2d0e, c as u64]);
        (0..per)
            .map(|_| {
                let a = sample_bridge(&mut rng, 0.0, 0.0, t, cfg.n_steps);
                let b = sample_bridge(&mut rng, 0.0, 0.0, t, cfg.n_steps);
                intersection_local_time(&a, &b, dt, eps).unwrap().exp()
            })
            .collect()
    });
    let all: Vec<f64> = chunks.into_iter().flatten().collect();
    let (mean, stderr) = exec::mean_stderr(&all);
    let closed = 1.0
        + (std::f64::consts::PI * t).sqrt() / 2.0 * (t / 4.0).exp() * (1.0 + erf(t.sqrt() / 2.0));
    Ok((
        McEstimate {
            mean,
            stderr,
            n_samples: all.len(),
        },
        closed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialField;

    fn cfg(n_samples: usize, n_steps: usize, seed: u64) -> BridgeConfig {
        BridgeConfig {
            n_steps,
            n_samples,
            seed,
        }
    }

    #[test]
    fn bridge_hits_endpoints() {
        let mut rng = stream_rng(7, &[1]);
        let p = sample_bridge(&mut rng, 0.3, -1.2, 2.0, 50);
        assert_eq!(p.len(), 51);
        assert_eq!(p[0], 0.3);
        assert_eq!(p[50], -1.2);
    }

    #[test]
    fn bridge_midpoint_statistics() {
        // midpoint of a 0->0 bridge on [0,1]: mean 0, var 1/4
        let mut rng = stream_rng(11, &[2]);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let p = sample_bridge(&mut rng, 0.0, 0.0, 1.0, 16);
            let m = p[8];
            sum += m;
            sum2 += m * m;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 0.25).abs() < 0.02, "var {var}");
    }

    #[test]
    fn corrected_acceptance_matches_reflection_formula() {
        let x = WeylPoint::new(vec![0.4, -0.4]).unwrap();
        let y = WeylPoint::new(vec![0.5, -0.5]).unwrap();
        let est = acceptance_estimate(&x, &y, 1.0, &cfg(40_000, 64, 42)).unwrap();
        let exact = noncrossing_probability_exact(0.8, 1.0, 1.0).unwrap();
        assert!(
            (est.mean - exact).abs() < 4.0 * est.stderr.max(2e-3),
            "mc {} vs exact {exact} (se {})",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn zero_potential_recovers_km_density() {
        let x = WeylPoint::new(vec![0.6, -0.6]).unwrap();
        let y = WeylPoint::new(vec![0.7, -0.7]).unwrap();
        let est =
            feynman_kac_distinct(&PotentialField::zero(), 1.0, &x, &y, &cfg(4_000, 32, 5)).unwrap();
        let exact = km_density(1.0, &x, &y).unwrap();
        assert!((est.mean - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn confluent_zero_potential_near_kernel_power() {
        // Z_2(1, 0, 0) = p(1,0,0)^2 at zero potential
        let est = feynman_kac_confluent(
            &PotentialField::zero(),
            1.0,
            0.0,
            0.0,
            2,
            0.4,
            &cfg(60_000, 64, 99),
        )
        .unwrap();
        let p = crate::kernels::heat_kernel(1.0, 0.0, 0.0).unwrap();
        let expect = p * p;
        let err = (est.richardson - expect).abs() / expect;
        assert!(err < 0.08, "richardson {} vs {expect}", est.richardson);
    }

    #[test]
    fn local_time_band_width_guard() {
        let a = vec![0.0; 11];
        let b = vec![0.0; 11];
        assert!(intersection_local_time(&a, &b, 0.1, 0.01).is_err());
        let l = intersection_local_time(&a, &b, 0.1, 0.2).unwrap();
        assert!((l - 10.0 * 0.1 / 0.4).abs() < 1e-12);
    }

    #[test]
    fn local_time_mean_matches_rayleigh_mean() {
        // sqrt(2) L ~ Rayleigh(1) at t = 1, so E[L] = sqrt(pi/2)/sqrt(2)
        let c = cfg(8_000, 400, 17);
        let dt = 1.0 / c.n_steps as f64;
        let eps = 0.06;
        let per = c.n_samples;
        let mut rng = stream_rng(c.seed, &[3]);
        let mut sum = 0.0;
        for _ in 0..per {
            let a = sample_bridge(&mut rng, 0.0, 0.0, 1.0, c.n_steps);
            let b = sample_bridge(&mut rng, 0.0, 0.0, 1.0, c.n_steps);
            sum += intersection_local_time(&a, &b, dt, eps).unwrap();
        }
        let mean = sum / per as f64;
        let expect = (std::f64::consts::PI / 2.0).sqrt() / std::f64::consts::SQRT_2;
        assert!((mean - expect).abs() < 0.05, "mean {mean} vs {expect}");
    }

    #[test]
    fn rayleigh_ks() {
        let report = rayleigh_local_time_check(1.0, 0.03, &cfg(4_000, 1600, 23)).unwrap();
        assert!(
            report.passed(),
            "ks {} >= {}",
            report.statistic,
            report.threshold
        );
    }

    #[test]
    fn second_moment_against_closed_form() {
        let (est, closed) = second_moment_check(1.0, 0.06, &cfg(8_000, 400, 31)).unwrap();
        assert!(
            (est.mean - closed).abs() < 4.0 * est.stderr + 0.05 * closed,
            "mc {} vs closed {closed} (se {})",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.0)).abs() < 1e-7);
        assert!((erf(1.0) - 0.8427007929).abs() < 1e-6);
        assert!((erf(-1.0) + 0.8427007929).abs() < 1e-6);
        assert!((erf(3.0) - 0.9999779095).abs() < 1e-6);
    }
}
