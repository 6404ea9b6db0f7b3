//! Plain-text sectioned `key = value` experiment configuration. Every key
//! has a default; unknown sections or keys are rejected so that typos
//! cannot silently fall back to defaults.

use std::fmt;
use std::path::Path;

use mlshe_core::error::{Error, Result};
use mlshe_core::grid::GridSpec;
use mlshe_core::potential::{Bump, PotentialField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Calibrate,
    SmoothSuite,
    BridgesSuite,
    LatticeSuite,
    PolymerSuite,
    All,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "calibrate" => Experiment::Calibrate,
            "smooth-suite" => Experiment::SmoothSuite,
            "bridges-suite" => Experiment::BridgesSuite,
            "lattice-suite" => Experiment::LatticeSuite,
            "polymer-suite" => Experiment::PolymerSuite,
            "all" => Experiment::All,
            other => {
                return Err(Error::config(format!(
                    "unknown experiment `{other}` (expected calibrate, smooth-suite, \
                     bridges-suite, lattice-suite, polymer-suite, or all)"
                )))
            }
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Calibrate => "calibrate",
            Experiment::SmoothSuite => "smooth-suite",
            Experiment::BridgesSuite => "bridges-suite",
            Experiment::LatticeSuite => "lattice-suite",
            Experiment::PolymerSuite => "polymer-suite",
            Experiment::All => "all",
        };
        f.write_str(s)
    }
}

/// Fully resolved runner configuration; one flat struct per section.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub out_dir: String,

    // [grid] — the smooth-solver reference grid
    pub y_halfwidth: f64,
    pub n_y: usize,
    pub n_t: usize,
    pub t_final: f64,
    pub x_center: f64,
    pub pencil_halfwidth: usize,
    pub init_epsilon: f64,

    // [potential]
    pub bumps: Vec<Bump>,

    // [smooth]
    pub free_field_n_y: usize,
    pub residual_n_y: usize,
    pub residual_n_t: usize,
    pub calibration_probes: usize,
    pub gt_probes: usize,
    pub gt_quad_intervals: usize,
    pub n_max: usize,

    // [bridges]
    pub mc_samples: usize,
    pub bridge_steps: usize,
    pub local_time_eps: f64,
    pub local_time_steps: usize,
    pub second_moment_samples: usize,
    pub second_moment_eps: f64,

    // [lattice]
    pub lattice_n_y: usize,
    pub lattice_n_t: usize,
    pub second_moment_n_y: usize,
    pub second_moment_n_t: usize,
    pub shift_realizations: usize,
    pub ratio_realizations: usize,
    pub ensemble_realizations: usize,

    // [polymer]
    pub polymer_seeds: usize,
    pub polymer_m: usize,
    pub polymer_levels: usize,

    // [tolerances]
    pub free_field_rel: f64,
    pub kernel_power_rel: f64,
    pub calibration_spread: f64,
    pub gt_ratio_spread: f64,
    pub interlace_abs: f64,
    pub rayleigh_ks: f64,
    pub second_moment_rel: f64,
    pub ratio_decay_factor: f64,
    pub polymer_rel: f64,
    pub rsk_rel: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::All,
            master_seed: 20260801,
            out_dir: "results".to_string(),

            y_halfwidth: 8.0,
            n_y: 1601,
            n_t: 400,
            t_final: 1.0,
            x_center: 0.0,
            pencil_halfwidth: 2,
            init_epsilon: 0.01,

            bumps: vec![Bump {
                amplitude: 1.0,
                center_t: 0.5,
                center_y: 0.0,
                width_t: 0.2,
                width_y: 0.5,
            }],

            free_field_n_y: 6401,
            residual_n_y: 161,
            residual_n_t: 50,
            calibration_probes: 3,
            gt_probes: 5,
            gt_quad_intervals: 64,
            n_max: 3,

            mc_samples: 100_000,
            bridge_steps: 200,
            local_time_eps: 0.02,
            local_time_steps: 3200,
            second_moment_samples: 20_000,
            second_moment_eps: 0.02,

            lattice_n_y: 401,
            lattice_n_t: 600,
            second_moment_n_y: 961,
            second_moment_n_t: 2667,
            shift_realizations: 10_000,
            ratio_realizations: 200,
            ensemble_realizations: 200,

            polymer_seeds: 50,
            polymer_m: 1024,
            polymer_levels: 3,

            free_field_rel: 1e-4,
            kernel_power_rel: 5e-3,
            calibration_spread: 5e-3,
            gt_ratio_spread: 2e-2,
            interlace_abs: 1e-10,
            rayleigh_ks: 0.02,
            second_moment_rel: 5e-2,
            ratio_decay_factor: 1.5,
            polymer_rel: 1e-3,
            rsk_rel: 1e-3,
        }
    }
}

impl ExperimentConfig {
    /// The smooth-solver grid described by the `[grid]` section.
    pub fn grid(&self) -> GridSpec {
        GridSpec::with_pencil(
            self.x_center - self.y_halfwidth,
            self.x_center + self.y_halfwidth,
            self.n_y,
            self.n_t,
            self.t_final,
            self.x_center,
            self.pencil_halfwidth,
            self.init_epsilon,
        )
    }

    /// Same span as [`grid`](Self::grid) at the free-field node count.
    pub fn free_field_grid(&self) -> GridSpec {
        GridSpec::with_pencil(
            self.x_center - self.y_halfwidth,
            self.x_center + self.y_halfwidth,
            self.free_field_n_y,
            self.n_t,
            self.t_final,
            self.x_center,
            self.pencil_halfwidth,
            self.init_epsilon,
        )
    }

    /// The noisy-lattice grid described by the `[lattice]` section.
    pub fn lattice_grid(&self, t_final: f64, pencil_halfwidth: usize) -> GridSpec {
        // keep dt/dy fixed as t varies so the multiplier stays safely positive
        let n_t = ((self.lattice_n_t as f64) * t_final / self.t_final).ceil() as usize;
        GridSpec::with_pencil(
            self.x_center - self.y_halfwidth,
            self.x_center + self.y_halfwidth,
            self.lattice_n_y,
            n_t.max(2),
            t_final,
            self.x_center,
            pencil_halfwidth,
            self.init_epsilon.min(t_final / 100.0),
        )
    }

    /// Fine grid for the exact pair-moment march. The start kernel width
    /// `sqrt(t/800)` stays a few spacings wide, and the domain keeps the
    /// start node at least `6 sqrt(t)` from the boundary.
    pub fn second_moment_grid(&self, t: f64) -> GridSpec {
        let half_full = 6.0 * self.t_final.sqrt();
        let half = (6.0 * t.sqrt()).max(2.0 / 3.0 * half_full);
        let n_y = ((self.second_moment_n_y - 1) as f64 * half / half_full).round() as usize + 1;
        let n_t = ((self.second_moment_n_t as f64) * t / self.t_final).ceil() as usize;
        GridSpec::with_pencil(
            self.x_center - half,
            self.x_center + half,
            n_y.max(3),
            n_t.max(2),
            t,
            self.x_center,
            0,
            t / 800.0,
        )
    }

    pub fn potential(&self) -> PotentialField {
        PotentialField::from_bumps(self.bumps.clone())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut bumps: Vec<Bump> = Vec::new();
        let mut saw_bump = false;
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                match section.as_str() {
                    "run" | "grid" | "potential" | "smooth" | "bridges" | "lattice"
                    | "polymer" | "tolerances" => {}
                    other => {
                        return Err(Error::config(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad_key = || {
                Error::config(format!(
                    "line {}: unknown key `{key}` in section [{section}]",
                    lineno + 1
                ))
            };
            let fval = || -> Result<f64> {
                value.parse::<f64>().map_err(|_| {
                    Error::config(format!("line {}: `{key}` needs a number", lineno + 1))
                })
            };
            let uval = || -> Result<usize> {
                value.parse::<usize>().map_err(|_| {
                    Error::config(format!("line {}: `{key}` needs a count", lineno + 1))
                })
            };
            match (section.as_str(), key) {
                ("run", "experiment") => cfg.experiment = Experiment::parse(value)?,
                ("run", "master_seed") => {
                    cfg.master_seed = value.parse().map_err(|_| {
                        Error::config(format!("line {}: `master_seed` needs a u64", lineno + 1))
                    })?
                }
                ("run", "out") => cfg.out_dir = value.to_string(),

                ("grid", "y_halfwidth") => cfg.y_halfwidth = fval()?,
                ("grid", "n_y") => cfg.n_y = uval()?,
                ("grid", "n_t") => cfg.n_t = uval()?,
                ("grid", "t_final") => cfg.t_final = fval()?,
                ("grid", "x_center") => cfg.x_center = fval()?,
                ("grid", "pencil_halfwidth") => cfg.pencil_halfwidth = uval()?,
                ("grid", "init_epsilon") => cfg.init_epsilon = fval()?,

                ("potential", "bump") => {
                    saw_bump = true;
                    let parts: Vec<f64> = value
                        .split_whitespace()
                        .map(|p| p.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| {
                            Error::config(format!(
                                "line {}: bump needs five numbers: \
                                 amplitude center_t center_y width_t width_y",
                                lineno + 1
                            ))
                        })?;
                    if parts.len() != 5 {
                        return Err(Error::config(format!(
                            "line {}: bump needs five numbers, got {}",
                            lineno + 1,
                            parts.len()
                        )));
                    }
                    bumps.push(Bump {
                        amplitude: parts[0],
                        center_t: parts[1],
                        center_y: parts[2],
                        width_t: parts[3],
                        width_y: parts[4],
                    });
                }
                ("potential", "none") => {
                    saw_bump = true;
                    bumps.clear();
                }

                ("smooth", "free_field_n_y") => cfg.free_field_n_y = uval()?,
                ("smooth", "residual_n_y") => cfg.residual_n_y = uval()?,
                ("smooth", "residual_n_t") => cfg.residual_n_t = uval()?,
                ("smooth", "calibration_probes") => cfg.calibration_probes = uval()?,
                ("smooth", "gt_probes") => cfg.gt_probes = uval()?,
                ("smooth", "gt_quad_intervals") => cfg.gt_quad_intervals = uval()?,
                ("smooth", "n_max") => cfg.n_max = uval()?,

                ("bridges", "mc_samples") => cfg.mc_samples = uval()?,
                ("bridges", "bridge_steps") => cfg.bridge_steps = uval()?,
                ("bridges", "local_time_eps") => cfg.local_time_eps = fval()?,
                ("bridges", "local_time_steps") => cfg.local_time_steps = uval()?,
                ("bridges", "second_moment_samples") => cfg.second_moment_samples = uval()?,
                ("bridges", "second_moment_eps") => cfg.second_moment_eps = fval()?,

                ("lattice", "n_y") => cfg.lattice_n_y = uval()?,
                ("lattice", "n_t") => cfg.lattice_n_t = uval()?,
                ("lattice", "second_moment_n_y") => cfg.second_moment_n_y = uval()?,
                ("lattice", "second_moment_n_t") => {
                    cfg.second_moment_n_t = uval()?
                }
                ("lattice", "shift_realizations") => cfg.shift_realizations = uval()?,
                ("lattice", "ratio_realizations") => cfg.ratio_realizations = uval()?,
                ("lattice", "ensemble_realizations") => cfg.ensemble_realizations = uval()?,

                ("polymer", "seeds") => cfg.polymer_seeds = uval()?,
                ("polymer", "m") => cfg.polymer_m = uval()?,
                ("polymer", "levels") => cfg.polymer_levels = uval()?,

                ("tolerances", "free_field_rel") => cfg.free_field_rel = fval()?,
                ("tolerances", "kernel_power_rel") => cfg.kernel_power_rel = fval()?,
                ("tolerances", "calibration_spread") => cfg.calibration_spread = fval()?,
                ("tolerances", "gt_ratio_spread") => cfg.gt_ratio_spread = fval()?,
                ("tolerances", "interlace_abs") => cfg.interlace_abs = fval()?,
                ("tolerances", "rayleigh_ks") => cfg.rayleigh_ks = fval()?,
                ("tolerances", "second_moment_rel") => cfg.second_moment_rel = fval()?,
                ("tolerances", "ratio_decay_factor") => cfg.ratio_decay_factor = fval()?,
                ("tolerances", "polymer_rel") => cfg.polymer_rel = fval()?,
                ("tolerances", "rsk_rel") => cfg.rsk_rel = fval()?,

                _ => return Err(bad_key()),
            }
        }
        if saw_bump {
            cfg.bumps = bumps;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().validate()?;
        if self.n_max < 2 || self.n_max > 3 {
            return Err(Error::config("n_max must be 2 or 3"));
        }
        if self.polymer_levels != 3 {
            return Err(Error::config(
                "the two-path brute-force reference requires levels = 3",
            ));
        }
        Ok(())
    }

    /// The fully resolved configuration in its own file format; persisted
    /// next to the results for reproducibility.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[run]\n");
        s.push_str(&format!("experiment = {}\n", self.experiment));
        s.push_str(&format!("master_seed = {}\n", self.master_seed));
        s.push_str(&format!("out = {}\n\n", self.out_dir));
        s.push_str("[grid]\n");
        s.push_str(&format!("y_halfwidth = {}\n", self.y_halfwidth));
        s.push_str(&format!("n_y = {}\n", self.n_y));
        s.push_str(&format!("n_t = {}\n", self.n_t));
        s.push_str(&format!("t_final = {}\n", self.t_final));
        s.push_str(&format!("x_center = {}\n", self.x_center));
        s.push_str(&format!("pencil_halfwidth = {}\n", self.pencil_halfwidth));
        s.push_str(&format!("init_epsilon = {}\n\n", self.init_epsilon));
        s.push_str("[potential]\n");
        if self.bumps.is_empty() {
            s.push_str("none = true\n");
        }
        for b in &self.bumps {
            s.push_str(&format!(
                "bump = {} {} {} {} {}\n",
                b.amplitude, b.center_t, b.center_y, b.width_t, b.width_y
            ));
        }
        s.push('\n');
        s.push_str("[smooth]\n");
        s.push_str(&format!("free_field_n_y = {}\n", self.free_field_n_y));
        s.push_str(&format!("residual_n_y = {}\n", self.residual_n_y));
        s.push_str(&format!("residual_n_t = {}\n", self.residual_n_t));
        s.push_str(&format!("calibration_probes = {}\n", self.calibration_probes));
        s.push_str(&format!("gt_probes = {}\n", self.gt_probes));
        s.push_str(&format!("gt_quad_intervals = {}\n", self.gt_quad_intervals));
        s.push_str(&format!("n_max = {}\n\n", self.n_max));
        s.push_str("[bridges]\n");
        s.push_str(&format!("mc_samples = {}\n", self.mc_samples));
        s.push_str(&format!("bridge_steps = {}\n", self.bridge_steps));
        s.push_str(&format!("local_time_eps = {}\n", self.local_time_eps));
        s.push_str(&format!("local_time_steps = {}\n", self.local_time_steps));
        s.push_str(&format!(
            "second_moment_samples = {}\n",
            self.second_moment_samples
        ));
        s.push_str(&format!("second_moment_eps = {}\n\n", self.second_moment_eps));
        s.push_str("[lattice]\n");
        s.push_str(&format!("n_y = {}\n", self.lattice_n_y));
        s.push_str(&format!("n_t = {}\n", self.lattice_n_t));
        s.push_str(&format!(
            "second_moment_n_y = {}\n",
            self.second_moment_n_y
        ));
        s.push_str(&format!(
            "second_moment_n_t = {}\n",
            self.second_moment_n_t
        ));
        s.push_str(&format!("shift_realizations = {}\n", self.shift_realizations));
        s.push_str(&format!("ratio_realizations = {}\n", self.ratio_realizations));
        s.push_str(&format!(
            "ensemble_realizations = {}\n\n",
            self.ensemble_realizations
        ));
        s.push_str("[polymer]\n");
        s.push_str(&format!("seeds = {}\n", self.polymer_seeds));
        s.push_str(&format!("m = {}\n", self.polymer_m));
        s.push_str(&format!("levels = {}\n\n", self.polymer_levels));
        s.push_str("[tolerances]\n");
        s.push_str(&format!("free_field_rel = {}\n", self.free_field_rel));
        s.push_str(&format!("kernel_power_rel = {}\n", self.kernel_power_rel));
        s.push_str(&format!("calibration_spread = {}\n", self.calibration_spread));
        s.push_str(&format!("gt_ratio_spread = {}\n", self.gt_ratio_spread));
        s.push_str(&format!("interlace_abs = {}\n", self.interlace_abs));
        s.push_str(&format!("rayleigh_ks = {}\n", self.rayleigh_ks));
        s.push_str(&format!("second_moment_rel = {}\n", self.second_moment_rel));
        s.push_str(&format!("ratio_decay_factor = {}\n", self.ratio_decay_factor));
        s.push_str(&format!("polymer_rel = {}\n", self.polymer_rel));
        s.push_str(&format!("rsk_rel = {}\n", self.rsk_rel));
        s
    }
}
