//! Flat key-value experiment configuration (TOML).
//!
//! Keys omitted from a file take the defaults of the file's `benchmark`.

use std::fmt::Write as _;
use std::path::PathBuf;

use hybrid_kf::filters::{CovarianceUpdate, JacobianMode};
use hybrid_kf::models::{GapController, MaglevConstants, TimeSeriesParams};
use hybrid_kf::{FilterOptions, UtParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::filter_id::FilterId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    /// Scalar time series with Gamma process noise.
    A,
    /// Maglev suspension with mass estimation.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub filters: Vec<FilterId>,
    pub mc_runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub particles: usize,
    pub timing_runs: usize,
    pub trace_run: usize,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub ut_lambda: Option<f64>,
    pub ut_simplex_w0: f64,
    pub covariance_update: CovarianceUpdate,
    pub jacobians: JacobianMode,

    pub ts_omega: f64,
    pub ts_phi: f64,
    pub ts_gamma_shape: f64,
    pub ts_gamma_scale: f64,
    pub ts_obs_noise_var: f64,
    pub ts_switch_time: u64,
    pub ts_noise_free: bool,
    pub ts_x0: f64,
    pub ts_p0: f64,
    pub pf_p0: f64,

    pub ml_mu0: f64,
    pub ml_a_ag: f64,
    pub ml_n_turns: f64,
    pub ml_h_c: f64,
    pub ml_l_pm: f64,
    pub ml_mu_r: f64,
    pub ml_a_pm: f64,
    pub ml_r_c: f64,
    pub ml_h_geom: f64,
    pub ml_r_l: f64,
    pub ml_r_coil: f64,
    pub ml_k_coeff: f64,
    pub ml_g_gravity: f64,
    pub ml_dt: f64,
    pub ml_q_gap: f64,
    pub ml_q_vel: f64,
    pub ml_q_cur: f64,
    pub ml_q_mass: f64,
    pub ml_gap_noise_var: f64,
    pub ml_gap0: f64,
    pub ml_mass_initial: f64,
    pub ml_mass_final: f64,
    pub ml_mass_step_time: f64,
    pub ml_mass_guess: f64,
    pub ml_p0_gap: f64,
    pub ml_p0_vel: f64,
    pub ml_p0_cur: f64,
    pub ml_p0_mass: f64,
    pub ctrl_gap_ref: f64,
    pub ctrl_kp: f64,
    pub ctrl_kd: f64,
    pub ctrl_current_gain: f64,
    pub ctrl_nominal_mass: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

/// One-line description of every key, in file order.
pub const KEY_DOCS: &[(&str, &str)] = &[
    ("benchmark", "\"a\" (time series) or \"b\" (maglev)"),
    (
        "filters",
        "EKF, SSUKF, SPUKF, UKF, NewKF, PF, PF-EKF, PF-UKF, PF-NewKF",
    ),
    ("mc_runs", "Monte-Carlo runs"),
    ("horizon", "time steps per run"),
    (
        "seed",
        "master seed; run r uses streams derived from (seed, r)",
    ),
    ("particles", "particles per particle filter"),
    ("timing_runs", "runs re-executed single-threaded for timing"),
    ("trace_run", "run index used by `bench trace`"),
    ("ut_lambda", "sigma-point spread lambda; omit for 3 - n"),
    (
        "ut_simplex_w0",
        "center weight of the spherical-simplex set",
    ),
    ("covariance_update", "\"joseph\" or \"simple\" ((I - KH)P)"),
    (
        "jacobians",
        "\"model\" (closed form where available) or \"numeric\"",
    ),
    ("ts_omega", "time series: frequency omega"),
    ("ts_phi", "time series: phi"),
    ("ts_gamma_shape", "time series: Gamma process-noise shape"),
    ("ts_gamma_scale", "time series: Gamma process-noise scale"),
    (
        "ts_obs_noise_var",
        "time series: measurement-noise variance",
    ),
    (
        "ts_switch_time",
        "time series: last index of the quadratic measurement",
    ),
    ("ts_noise_free", "time series: drop both noise sources"),
    ("ts_x0", "time series: initial state and filter mean"),
    ("ts_p0", "time series: initial filter variance"),
    ("pf_p0", "per-particle covariance for Kalman proposals"),
    ("ml_mu0", "maglev: vacuum permeability (H/m)"),
    ("ml_a_ag", "maglev: air-gap pole area (m^2)"),
    ("ml_n_turns", "maglev: coil turns"),
    ("ml_h_c", "maglev: magnet coercivity (A/m)"),
    ("ml_l_pm", "maglev: magnet length (m)"),
    ("ml_mu_r", "maglev: magnet relative permeability"),
    ("ml_a_pm", "maglev: magnet cross-section (m^2)"),
    ("ml_r_c", "maglev: core reluctance coefficient"),
    ("ml_h_geom", "maglev: geometric height (m)"),
    ("ml_r_l", "maglev: leakage reluctance coefficient"),
    ("ml_r_coil", "maglev: coil resistance (ohm)"),
    (
        "ml_k_coeff",
        "maglev: inductance coefficient K, L = K / gap (H m)",
    ),
    ("ml_g_gravity", "maglev: gravitational acceleration (m/s^2)"),
    ("ml_dt", "maglev: RK4 step (s)"),
    ("ml_q_gap", "maglev: process-noise variance, gap"),
    ("ml_q_vel", "maglev: process-noise variance, velocity"),
    ("ml_q_cur", "maglev: process-noise variance, current"),
    (
        "ml_q_mass",
        "maglev: filter random-walk variance of the mass state",
    ),
    (
        "ml_gap_noise_var",
        "maglev: gap measurement-noise variance (m^2)",
    ),
    ("ml_gap0", "maglev: initial gap (m)"),
    (
        "ml_mass_initial",
        "maglev: true mass before the load step (kg)",
    ),
    (
        "ml_mass_final",
        "maglev: true mass after the load step (kg)",
    ),
    ("ml_mass_step_time", "maglev: load-step time (s)"),
    ("ml_mass_guess", "maglev: initial filter mass estimate (kg)"),
    ("ml_p0_gap", "maglev: initial filter variance, gap"),
    ("ml_p0_vel", "maglev: initial filter variance, velocity"),
    ("ml_p0_cur", "maglev: initial filter variance, current"),
    ("ml_p0_mass", "maglev: initial filter variance, mass"),
    ("ctrl_gap_ref", "maglev controller: gap set-point (m)"),
    (
        "ctrl_kp",
        "maglev controller: current demand per metre of gap error",
    ),
    ("ctrl_kd", "maglev controller: current demand per m/s"),
    (
        "ctrl_current_gain",
        "maglev controller: current-loop bandwidth (1/s)",
    ),
    (
        "ctrl_nominal_mass",
        "maglev controller: feed-forward mass (kg)",
    ),
    ("out", "output path; omit for stdout"),
    ("format", "\"csv\", \"json\" or \"md\""),
];

impl ExperimentConfig {
    /// Defaults for the given benchmark.
    pub fn defaults(benchmark: Benchmark) -> Self {
        let ts = TimeSeriesParams::default();
        let ml = MaglevConstants::default();
        let ctrl = GapController::default();
        let mut cfg = Self {
            benchmark,
            filters: FilterId::ALL.to_vec(),
            mc_runs: 1000,
            horizon: 60,
            seed: 1,
            particles: 200,
            timing_runs: 100,
            trace_run: 0,
            ut_lambda: None,
            ut_simplex_w0: UtParams::default().w0_simplex,
            covariance_update: CovarianceUpdate::Joseph,
            jacobians: JacobianMode::Model,
            ts_omega: ts.omega,
            ts_phi: ts.phi,
            ts_gamma_shape: ts.gamma_shape,
            ts_gamma_scale: ts.gamma_scale,
            ts_obs_noise_var: ts.obs_noise_var,
            ts_switch_time: ts.switch_time,
            ts_noise_free: ts.noise_free,
            ts_x0: 1.0,
            ts_p0: 1e-3,
            pf_p0: 1e-3,
            ml_mu0: ml.mu0,
            ml_a_ag: ml.a_ag,
            ml_n_turns: ml.n_turns,
            ml_h_c: ml.h_c,
            ml_l_pm: ml.l_pm,
            ml_mu_r: ml.mu_r,
            ml_a_pm: ml.a_pm,
            ml_r_c: ml.r_c,
            ml_h_geom: ml.h_geom,
            ml_r_l: ml.r_l,
            ml_r_coil: ml.r_coil,
            ml_k_coeff: ml.k_coeff,
            ml_g_gravity: ml.g_gravity,
            ml_dt: 1e-3,
            ml_q_gap: 1e-14,
            ml_q_vel: 1e-10,
            ml_q_cur: 1e-8,
            ml_q_mass: 1e-3,
            ml_gap_noise_var: 1e-10,
            ml_gap0: ctrl.gap_ref,
            ml_mass_initial: 20.0,
            ml_mass_final: 25.0,
            ml_mass_step_time: 1.5,
            ml_mass_guess: 15.0,
            ml_p0_gap: 1e-10,
            ml_p0_vel: 1e-8,
            ml_p0_cur: 1e-6,
            ml_p0_mass: 25.0,
            ctrl_gap_ref: ctrl.gap_ref,
            ctrl_kp: ctrl.kp,
            ctrl_kd: ctrl.kd,
            ctrl_current_gain: ctrl.current_gain,
            ctrl_nominal_mass: ctrl.nominal_mass,
            out: None,
            format: OutputFormat::Csv,
        };
        if benchmark == Benchmark::B {
            cfg.filters = vec![
                FilterId::Kalman(hybrid_kf::FilterKind::Ekf),
                FilterId::Kalman(hybrid_kf::FilterKind::Ukf),
                FilterId::Kalman(hybrid_kf::FilterKind::NewKf),
            ];
            cfg.mc_runs = 100;
            cfg.horizon = 3000;
            cfg.timing_runs = 10;
        }
        cfg
    }

    /// Parses a config file, filling omitted keys from the defaults of its
    /// `benchmark` (benchmark A when that key is absent too).
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let user: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        let benchmark = match user.get("benchmark") {
            None => Benchmark::A,
            Some(v) => v
                .clone()
                .try_into::<Benchmark>()
                .map_err(|e| CliError::Config(format!("benchmark: {e}")))?,
        };
        let mut merged = toml::Table::try_from(Self::defaults(benchmark))
            .map_err(|e| CliError::Config(e.to_string()))?;
        for (k, v) in user {
            merged.insert(k, v);
        }
        let cfg: Self = merged
            .try_into()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Defaults as a commented TOML file.
    pub fn documented_toml(&self) -> String {
        let table = toml::Table::try_from(self).expect("config serializes");
        let mut out = String::new();
        for (key, doc) in KEY_DOCS {
            let _ = writeln!(out, "# {doc}");
            match table.get(*key) {
                Some(v) => {
                    let mut single = toml::Table::new();
                    single.insert((*key).to_string(), v.clone());
                    out.push_str(&toml::to_string(&single).expect("value serializes"));
                }
                None => {
                    let _ = writeln!(out, "# {key} =");
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical serialization, output settings excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.format = OutputFormat::Csv;
        hex::encode(Sha256::digest(canonical.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.mc_runs == 0 {
            return bad("mc_runs must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.filters.is_empty() {
            return bad("no filters configured".into());
        }
        for (i, f) in self.filters.iter().enumerate() {
            if self.filters[..i].contains(f) {
                return bad(format!("filter {f} listed twice"));
            }
        }
        if self.filters.iter().any(|f| f.is_particle()) && self.particles == 0 {
            return bad("particles must be at least 1".into());
        }
        if self.trace_run >= self.mc_runs {
            return bad(format!(
                "trace_run {} is not below mc_runs {}",
                self.trace_run, self.mc_runs
            ));
        }
        let n = match self.benchmark {
            Benchmark::A => 1.0,
            Benchmark::B => 4.0,
        };
        if let Some(l) = self.ut_lambda {
            if n + l <= 0.0 || l.is_nan() {
                return bad(format!("ut_lambda {l} makes n + lambda non-positive"));
            }
        }
        if !(0.0..1.0).contains(&self.ut_simplex_w0) {
            return bad("ut_simplex_w0 must lie in [0, 1)".into());
        }
        let positive = [
            ("ts_p0", self.ts_p0),
            ("pf_p0", self.pf_p0),
            ("ml_dt", self.ml_dt),
            ("ml_gap_noise_var", self.ml_gap_noise_var),
            ("ml_gap0", self.ml_gap0),
            ("ml_mass_initial", self.ml_mass_initial),
            ("ml_mass_final", self.ml_mass_final),
            ("ml_mass_guess", self.ml_mass_guess),
            ("ml_p0_gap", self.ml_p0_gap),
            ("ml_p0_vel", self.ml_p0_vel),
            ("ml_p0_cur", self.ml_p0_cur),
            ("ml_p0_mass", self.ml_p0_mass),
            ("ctrl_gap_ref", self.ctrl_gap_ref),
            ("ctrl_nominal_mass", self.ctrl_nominal_mass),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("ml_q_gap", self.ml_q_gap),
            ("ml_q_vel", self.ml_q_vel),
            ("ml_q_cur", self.ml_q_cur),
            ("ml_q_mass", self.ml_q_mass),
            ("ml_mass_step_time", self.ml_mass_step_time),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        self.time_series_params().validate()?;
        self.maglev_constants().validate()?;
        Ok(())
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            ut: UtParams {
                lambda: self.ut_lambda,
                w0_simplex: self.ut_simplex_w0,
            },
            covariance_update: self.covariance_update,
            jacobians: self.jacobians,
        }
    }

    pub fn time_series_params(&self) -> TimeSeriesParams {
        TimeSeriesParams {
            omega: self.ts_omega,
            phi: self.ts_phi,
            gamma_shape: self.ts_gamma_shape,
            gamma_scale: self.ts_gamma_scale,
            obs_noise_var: self.ts_obs_noise_var,
            switch_time: self.ts_switch_time,
            noise_free: self.ts_noise_free,
        }
    }

    pub fn maglev_constants(&self) -> MaglevConstants {
        MaglevConstants {
            mu0: self.ml_mu0,
            a_ag: self.ml_a_ag,
            n_turns: self.ml_n_turns,
            h_c: self.ml_h_c,
            l_pm: self.ml_l_pm,
            mu_r: self.ml_mu_r,
            a_pm: self.ml_a_pm,
            r_c: self.ml_r_c,
            h_geom: self.ml_h_geom,
            r_l: self.ml_r_l,
            r_coil: self.ml_r_coil,
            k_coeff: self.ml_k_coeff,
            g_gravity: self.ml_g_gravity,
        }
    }

    pub fn controller(&self) -> GapController {
        GapController {
            gap_ref: self.ctrl_gap_ref,
            kp: self.ctrl_kp,
            kd: self.ctrl_kd,
            current_gain: self.ctrl_current_gain,
            nominal_mass: self.ctrl_nominal_mass,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::defaults(Benchmark::A)
    }
}
