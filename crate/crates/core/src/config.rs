//! Run configuration: parsing (flat key=value files or JSON), validation
//! with line-precise errors, and resolution of every "auto" parameter into
//! the concrete scene, codebooks, plan, schedule and grid of a run.
//!
//! Angles enter in degrees and noise power in dBm; everything is SI
//! internally. Unknown keys are rejected.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{
    auto_reflection_center, auto_reflection_width, periods_and_module_size,
    reflection_sampling_bound, sweep_sampling_bound, DesignReport, ReflectionCodebook,
    SweepCodebook,
};
use crate::error::{Error, Result};
use crate::forward::{narrowband_ratio, AcquisitionConfig, SweepSchedule};
use crate::imaging::ImageGrid;
use crate::metasurface::{ModuleLayout, PhaseLaw, PhasePlan};
use crate::scene::{PlaneGeometry, Roi, Scene, Target};

/// Acquisition mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Space-time varying plane, one sweep per reflection angle by default.
    Multiview,
    /// Space-varying but time-frozen plane, single sweep by default.
    MultiviewStatic,
    /// Constant angular difference over the whole plane (mirror baseline).
    Mirror,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "multiview" => Ok(Mode::Multiview),
            "multiview-static" => Ok(Mode::MultiviewStatic),
            "mirror" => Ok(Mode::Mirror),
            other => Err(format!(
                "unknown mode '{other}' (expected multiview, multiview-static or mirror)"
            )),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Multiview => "multiview",
            Mode::MultiviewStatic => "multiview-static",
            Mode::Mirror => "mirror",
        })
    }
}

/// Fast-time representation of the synthesized echoes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EchoMode {
    Analytic,
    Sampled,
}

/// One point scatterer in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetConfig {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default = "one")]
    pub reflectivity_re: f64,
    #[serde(default)]
    pub reflectivity_im: f64,
}

fn one() -> f64 {
    1.0
}

/// Raw run configuration. `None` means "auto" wherever a derivation rule
/// exists. The default value set reproduces the reference acquisition
/// (28 GHz, 400 MHz, source 5 m above the plane, 10 deg sweep around
/// 30 deg, 15 reflection angles, 5 m x 5 m ROI centred at (9.5, -14)).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Scene.
    pub source_height_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub element_count: Option<usize>,
    pub element_spacing_m: Option<f64>,
    pub plane_offset_m: Option<f64>,
    pub bs_antenna_count: Option<usize>,
    pub bs_aperture_m: Option<f64>,
    pub roi_center_x_m: f64,
    pub roi_center_y_m: f64,
    pub roi_extent_x_m: f64,
    pub roi_extent_y_m: f64,
    // Sweep codebook.
    pub theta_i_center_deg: f64,
    pub theta_i_width_deg: f64,
    pub dtheta_i_deg: Option<f64>,
    pub dwell_s: Option<f64>,
    // Reflection codebook.
    pub theta_o_center_deg: Option<f64>,
    pub theta_o_width_deg: Option<f64>,
    pub n_reflect: Option<usize>,
    pub dtheta_o_deg: Option<f64>,
    // Plane law.
    pub lambda_x_m: Option<f64>,
    pub lambda_tau_s: Option<f64>,
    pub n_mod: Option<usize>,
    /// Cosine phase at the aperture centre at tau = 0, degrees. 0 starts at
    /// the codebook edge; -90 points the centre module at the ROI centre.
    pub spatial_phase_deg: f64,
    // Run.
    pub mode: Mode,
    pub sweeps: Option<usize>,
    pub seed: u64,
    pub noise: bool,
    pub sigma_w_dbm: f64,
    pub tx_scale: f64,
    pub echo_mode: EchoMode,
    pub oversample: f64,
    // Imaging window (defaults to the ROI).
    pub pixel_m: Option<f64>,
    pub image_center_x_m: Option<f64>,
    pub image_center_y_m: Option<f64>,
    pub image_extent_x_m: Option<f64>,
    pub image_extent_y_m: Option<f64>,
    // The bound search samples the ROI corners plus this interior grid.
    pub grid_n: usize,
    pub emit: Vec<String>,
    pub targets: Vec<TargetConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source_height_m: 5.0,
            carrier_hz: 28.0e9,
            bandwidth_hz: 400.0e6,
            element_count: None,
            element_spacing_m: None,
            plane_offset_m: None,
            bs_antenna_count: None,
            bs_aperture_m: None,
            roi_center_x_m: 9.5,
            roi_center_y_m: -14.0,
            roi_extent_x_m: 5.0,
            roi_extent_y_m: 5.0,
            theta_i_center_deg: 30.0,
            theta_i_width_deg: 10.0,
            dtheta_i_deg: None,
            dwell_s: None,
            theta_o_center_deg: None,
            theta_o_width_deg: None,
            n_reflect: None,
            dtheta_o_deg: None,
            lambda_x_m: None,
            lambda_tau_s: None,
            n_mod: None,
            spatial_phase_deg: 0.0,
            mode: Mode::Multiview,
            sweeps: None,
            seed: 0,
            noise: false,
            sigma_w_dbm: -87.0,
            tx_scale: 1.0,
            echo_mode: EchoMode::Analytic,
            oversample: 8.0,
            pixel_m: None,
            image_center_x_m: None,
            image_center_y_m: None,
            image_extent_x_m: None,
            image_extent_y_m: None,
            grid_n: 9,
            emit: vec!["csv".into(), "pgm".into(), "json".into()],
            targets: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parse a config file: JSON when the first non-blank byte is '{',
    /// otherwise flat `key = value` lines with '#' comments.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
                path: path.to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
            return Ok(cfg);
        }
        Self::parse_kv(text, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn parse_kv(text: &str, path: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.targets.clear();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_err(path, lineno, "expected 'key = value'"));
            };
            let key = key.trim();
            let value = value.trim();
            if key != "target" {
                if seen.iter().any(|k| k == key) {
                    return Err(parse_err(path, lineno, &format!("duplicate key '{key}'")));
                }
                seen.push(key.to_string());
            }
            apply_kv(&mut cfg, key, value, path, lineno)?;
        }
        Ok(cfg)
    }
}

fn parse_err(path: &str, line: usize, message: &str) -> Error {
    Error::ConfigParse {
        path: path.to_string(),
        line,
        message: message.to_string(),
    }
}

fn apply_kv(cfg: &mut RunConfig, key: &str, value: &str, path: &str, line: usize) -> Result<()> {
    fn num(path: &str, line: usize, key: &str, value: &str) -> Result<f64> {
        value.parse::<f64>().map_err(|_| Error::ConfigParse {
            path: path.to_string(),
            line,
            message: format!("key '{key}': '{value}' is not a number"),
        })
    }
    fn int(path: &str, line: usize, key: &str, value: &str) -> Result<usize> {
        value.parse::<usize>().map_err(|_| Error::ConfigParse {
            path: path.to_string(),
            line,
            message: format!("key '{key}': '{value}' is not a non-negative integer"),
        })
    }
    fn opt_num(path: &str, line: usize, key: &str, value: &str) -> Result<Option<f64>> {
        if value == "auto" {
            Ok(None)
        } else {
            num(path, line, key, value).map(Some)
        }
    }
    fn opt_int(path: &str, line: usize, key: &str, value: &str) -> Result<Option<usize>> {
        if value == "auto" {
            Ok(None)
        } else {
            int(path, line, key, value).map(Some)
        }
    }
    fn flag(path: &str, line: usize, key: &str, value: &str) -> Result<bool> {
        match value {
            "on" | "true" | "1" => Ok(true),
            "off" | "false" | "0" => Ok(false),
            _ => Err(parse_err(
                path,
                line,
                &format!("key '{key}': expected on/off, got '{value}'"),
            )),
        }
    }

    match key {
        "source_height_m" => cfg.source_height_m = num(path, line, key, value)?,
        "carrier_hz" => cfg.carrier_hz = num(path, line, key, value)?,
        "bandwidth_hz" => cfg.bandwidth_hz = num(path, line, key, value)?,
        "element_count" => cfg.element_count = opt_int(path, line, key, value)?,
        "element_spacing_m" => cfg.element_spacing_m = opt_num(path, line, key, value)?,
        "plane_offset_m" => cfg.plane_offset_m = opt_num(path, line, key, value)?,
        "bs_antenna_count" => cfg.bs_antenna_count = opt_int(path, line, key, value)?,
        "bs_aperture_m" => cfg.bs_aperture_m = opt_num(path, line, key, value)?,
        "roi_center_x_m" => cfg.roi_center_x_m = num(path, line, key, value)?,
        "roi_center_y_m" => cfg.roi_center_y_m = num(path, line, key, value)?,
        "roi_extent_x_m" => cfg.roi_extent_x_m = num(path, line, key, value)?,
        "roi_extent_y_m" => cfg.roi_extent_y_m = num(path, line, key, value)?,
        "theta_i_center_deg" => cfg.theta_i_center_deg = num(path, line, key, value)?,
        "theta_i_width_deg" => cfg.theta_i_width_deg = num(path, line, key, value)?,
        "dtheta_i_deg" => cfg.dtheta_i_deg = opt_num(path, line, key, value)?,
        "dwell_s" => cfg.dwell_s = opt_num(path, line, key, value)?,
        "theta_o_center_deg" => cfg.theta_o_center_deg = opt_num(path, line, key, value)?,
        "theta_o_width_deg" => cfg.theta_o_width_deg = opt_num(path, line, key, value)?,
        "n_reflect" => cfg.n_reflect = opt_int(path, line, key, value)?,
        "dtheta_o_deg" => cfg.dtheta_o_deg = opt_num(path, line, key, value)?,
        "lambda_x_m" => cfg.lambda_x_m = opt_num(path, line, key, value)?,
        "lambda_tau_s" => cfg.lambda_tau_s = opt_num(path, line, key, value)?,
        "n_mod" => cfg.n_mod = opt_int(path, line, key, value)?,
        "spatial_phase_deg" => cfg.spatial_phase_deg = num(path, line, key, value)?,
        "mode" => {
            cfg.mode = value
                .parse::<Mode>()
                .map_err(|e| parse_err(path, line, &e))?
        }
        "sweeps" => cfg.sweeps = opt_int(path, line, key, value)?,
        "seed" => {
            cfg.seed = value
                .parse::<u64>()
                .map_err(|_| parse_err(path, line, &format!("seed '{value}' is not a u64")))?
        }
        "noise" => cfg.noise = flag(path, line, key, value)?,
        "sigma_w_dbm" => cfg.sigma_w_dbm = num(path, line, key, value)?,
        "tx_scale" => cfg.tx_scale = num(path, line, key, value)?,
        "echo_mode" => {
            cfg.echo_mode = match value {
                "analytic" => EchoMode::Analytic,
                "sampled" => EchoMode::Sampled,
                _ => {
                    return Err(parse_err(
                        path,
                        line,
                        &format!("echo_mode '{value}' (expected analytic or sampled)"),
                    ))
                }
            }
        }
        "oversample" => cfg.oversample = num(path, line, key, value)?,
        "pixel_m" => cfg.pixel_m = opt_num(path, line, key, value)?,
        "image_center_x_m" => cfg.image_center_x_m = opt_num(path, line, key, value)?,
        "image_center_y_m" => cfg.image_center_y_m = opt_num(path, line, key, value)?,
        "image_extent_x_m" => cfg.image_extent_x_m = opt_num(path, line, key, value)?,
        "image_extent_y_m" => cfg.image_extent_y_m = opt_num(path, line, key, value)?,
        "grid_n" => cfg.grid_n = int(path, line, key, value)?,
        "emit" => {
            cfg.emit = value
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        }
        "target" => {
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            if parts.len() < 2 || parts.len() > 4 {
                return Err(parse_err(
                    path,
                    line,
                    "target expects 'x_m, y_m[, re[, im]]'",
                ));
            }
            let mut nums = Vec::new();
            for p in &parts {
                nums.push(num(path, line, key, p)?);
            }
            cfg.targets.push(TargetConfig {
                x_m: nums[0],
                y_m: nums[1],
                reflectivity_re: nums.get(2).copied().unwrap_or(1.0),
                reflectivity_im: nums.get(3).copied().unwrap_or(0.0),
            });
        }
        other => {
            return Err(parse_err(path, line, &format!("unknown key '{other}'")));
        }
    }
    Ok(())
}

/// Every parameter after auto-resolution, in SI units. Serialised (in field
/// order) and hashed for the run manifest, so the hash changes exactly when
/// an effective parameter changes.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveParams {
    pub source_height_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub wavelength_m: f64,
    pub element_count: usize,
    pub element_spacing_m: f64,
    pub plane_offset_m: f64,
    pub bs_aperture_m: f64,
    pub roi_center_m: (f64, f64),
    pub roi_extent_m: (f64, f64),
    pub theta_i_center_rad: f64,
    pub theta_i_width_rad: f64,
    pub dtheta_i_rad: f64,
    pub n_sweep_angles: usize,
    pub dwell_s: f64,
    pub theta_o_center_rad: f64,
    pub theta_o_width_rad: f64,
    pub dtheta_o_rad: f64,
    pub n_reflect: usize,
    pub lambda_x_m: f64,
    pub lambda_tau_s: Option<f64>,
    pub n_mod: usize,
    pub spatial_phase_rad: f64,
    pub mode: Mode,
    pub sweeps: usize,
    pub seed: u64,
    pub sigma_w2_watts: f64,
    pub tx_scale: f64,
    pub echo_mode: EchoMode,
    pub oversample: f64,
    pub pixel_m: f64,
    pub image_center_m: (f64, f64),
    pub image_extent_m: (f64, f64),
    pub targets: Vec<(f64, f64, f64, f64)>,
}

/// A fully resolved run: everything the pipeline needs.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub scene: Scene,
    pub sweep_codebook: SweepCodebook,
    pub plan: PhasePlan,
    pub schedule: SweepSchedule,
    pub report: DesignReport,
    pub grid: ImageGrid,
    pub targets: Vec<Target>,
    pub acquisition: AcquisitionConfig,
    pub mode: Mode,
    pub emit: Vec<String>,
    pub effective: EffectiveParams,
    /// Design and model warnings (bound violations, period overrides,
    /// narrowband audit). Non-fatal unless the caller runs strict.
    pub warnings: Vec<String>,
}

pub fn resolve(cfg: &RunConfig) -> Result<ResolvedRun> {
    let mut warnings = Vec::new();

    if cfg.carrier_hz <= 0.0 || cfg.bandwidth_hz <= 0.0 {
        return Err(Error::ConfigValue(
            "carrier_hz and bandwidth_hz must be positive".into(),
        ));
    }
    let lambda0 = crate::SPEED_OF_LIGHT / cfg.carrier_hz;
    let spacing = cfg.element_spacing_m.unwrap_or(lambda0 / 2.0);
    if spacing <= 0.0 {
        return Err(Error::ConfigValue(
            "element_spacing_m must be positive".into(),
        ));
    }

    let theta_i_center = cfg.theta_i_center_deg.to_radians();
    let theta_i_width = cfg.theta_i_width_deg.to_radians();
    if theta_i_width < 0.0 {
        return Err(Error::ConfigValue("theta_i_width_deg must be >= 0".into()));
    }
    if theta_i_center.abs() + theta_i_width / 2.0 >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::ConfigValue(
            "sweep codebook spans beyond +-90 deg".into(),
        ));
    }

    let offset = cfg
        .plane_offset_m
        .unwrap_or(cfg.source_height_m * theta_i_center.tan());

    let bs_aperture = match (cfg.bs_aperture_m, cfg.bs_antenna_count) {
        (Some(_), Some(_)) => {
            return Err(Error::ConfigValue(
                "give bs_aperture_m or bs_antenna_count, not both".into(),
            ))
        }
        (Some(a), None) => a,
        (None, Some(k)) => k as f64 * spacing,
        (None, None) => 53.0 * spacing,
    };

    // Plane length: cover the footprints of the extreme sweep angles (with
    // their own beamwidths) unless pinned explicitly.
    let element_count = match cfg.element_count {
        Some(n) => n,
        None => {
            let bw_margin = |theta: f64| lambda0 / (bs_aperture * theta.cos());
            let lo = theta_i_center - theta_i_width / 2.0;
            let hi = theta_i_center + theta_i_width / 2.0;
            let x_lo = cfg.source_height_m * (lo - bw_margin(lo) / 2.0).tan();
            let x_hi = cfg.source_height_m * (hi + bw_margin(hi) / 2.0).tan();
            let half_span = (x_hi - offset).abs().max((x_lo - offset).abs());
            2 * ((half_span / spacing).ceil() as usize + 2)
        }
    };

    let scene = Scene {
        source_height: cfg.source_height_m,
        plane: PlaneGeometry {
            element_count,
            spacing,
            offset,
        },
        roi: Roi {
            center: (cfg.roi_center_x_m, cfg.roi_center_y_m),
            extent: (cfg.roi_extent_x_m, cfg.roi_extent_y_m),
        },
        carrier_freq: cfg.carrier_hz,
        bandwidth: cfg.bandwidth_hz,
        bs_aperture,
    };
    scene.validate()?;

    // Sweep sampling: the anti-ambiguity bound unless pinned.
    let bound = sweep_sampling_bound(
        scene.source_height,
        lambda0,
        &scene.roi,
        theta_i_width,
        cfg.grid_n,
    )?;
    let dtheta_i = match cfg.dtheta_i_deg {
        Some(d) => {
            let step = d.to_radians();
            if step <= 0.0 {
                return Err(Error::ConfigValue("dtheta_i_deg must be positive".into()));
            }
            if step > bound.max_step {
                warnings.push(format!(
                    "sweep sampling {:.4} deg exceeds the ambiguity bound {:.4} deg",
                    step.to_degrees(),
                    bound.max_step.to_degrees()
                ));
            }
            step
        }
        None => {
            if theta_i_width == 0.0 {
                0.0
            } else if !bound.max_step.is_finite() {
                warnings.push(
                    "sweep sampling bound is unbounded (degenerate ROI); using a single angle"
                        .into(),
                );
                theta_i_width
            } else {
                // Exact-endpoint grid with step at or below the bound.
                let n_steps = (theta_i_width / bound.max_step).ceil().max(1.0);
                theta_i_width / n_steps
            }
        }
    };
    let sweep_count = if theta_i_width == 0.0 {
        1
    } else {
        (theta_i_width / dtheta_i + 1e-9).floor() as usize + 1
    };
    let dwell = match cfg.dwell_s {
        Some(d) if d > 0.0 => d,
        Some(_) => return Err(Error::ConfigValue("dwell_s must be positive".into())),
        // Default sweep duration of 10 ms split across the codebook.
        None => 0.010 / sweep_count as f64,
    };
    let sweep_codebook = SweepCodebook::new(theta_i_center, theta_i_width, dtheta_i, dwell)?;
    debug_assert_eq!(sweep_codebook.len(), sweep_count);

    // Reflection codebook.
    let theta_o_center = match cfg.theta_o_center_deg {
        Some(d) => d.to_radians(),
        None => auto_reflection_center(&scene)?,
    };
    let theta_o_width = match cfg.theta_o_width_deg {
        Some(d) => d.to_radians(),
        None => auto_reflection_width(&scene, theta_i_center, theta_i_width, theta_o_center)?,
    };
    let reflection_codebook = match (cfg.dtheta_o_deg, cfg.n_reflect) {
        (Some(_), Some(_)) => {
            return Err(Error::ConfigValue(
                "give dtheta_o_deg or n_reflect, not both".into(),
            ))
        }
        (Some(d), None) => ReflectionCodebook::new(theta_o_center, theta_o_width, d.to_radians())?,
        (None, n) => {
            ReflectionCodebook::with_count(theta_o_center, theta_o_width, n.unwrap_or(15))?
        }
    };
    let n_reflect = reflection_codebook.len();

    // Periods and module size.
    let a_inf = scene.asymptotic_aperture(theta_i_center, theta_i_width)?;
    let sweep_duration = sweep_codebook.sweep_duration();
    let (lambda_x, lambda_tau_auto, n_mod_auto) = if a_inf > 0.0 {
        periods_and_module_size(a_inf, n_reflect, sweep_duration, spacing, cfg.lambda_x_m)?
    } else {
        // Degenerate zero-width sweep: fall back to the plane length.
        let lx = cfg.lambda_x_m.unwrap_or(scene.plane.length());
        (
            lx,
            n_reflect as f64 * sweep_duration,
            cfg.n_mod.unwrap_or(1),
        )
    };
    if let Some(lx) = cfg.lambda_x_m {
        if a_inf > 0.0 && (lx - 2.0 * a_inf).abs() > 1e-6 * (2.0 * a_inf) {
            warnings.push(format!(
                "lambda_x override {:.4} m differs from 2*A_inf = {:.4} m",
                lx,
                2.0 * a_inf
            ));
        }
    }
    let n_mod = cfg.n_mod.unwrap_or(n_mod_auto);
    if n_mod == 0 {
        return Err(Error::ConfigValue("n_mod must be >= 1".into()));
    }
    let lambda_tau = match cfg.mode {
        Mode::MultiviewStatic | Mode::Mirror => None,
        Mode::Multiview => Some(match cfg.lambda_tau_s {
            Some(lt) if lt > 0.0 => lt,
            Some(_) => return Err(Error::ConfigValue("lambda_tau_s must be positive".into())),
            None => lambda_tau_auto,
        }),
    };

    if a_inf > scene.plane.length() {
        warnings.push(format!(
            "asymptotic aperture {:.3} m exceeds the plane length {:.3} m",
            a_inf,
            scene.plane.length()
        ));
    }

    let refl_bound = reflection_sampling_bound(&reflection_codebook, n_mod, spacing, lambda0);
    if reflection_codebook.step > refl_bound {
        warnings.push(format!(
            "reflection sampling {:.4} deg exceeds the overlap bound {:.4} deg",
            reflection_codebook.step.to_degrees(),
            refl_bound.to_degrees()
        ));
    }

    let report = DesignReport {
        lambda_x_m: lambda_x,
        lambda_tau_s: lambda_tau.unwrap_or(f64::INFINITY),
        n_mod,
        a_inf_m: a_inf,
        dtheta_i_max_rad: bound.max_step,
        dtheta_o_max_rad: refl_bound,
        warnings: warnings.clone(),
    };

    // Phase plan.
    let plan = match cfg.mode {
        Mode::Mirror => PhasePlan::mirror(
            &scene.plane,
            theta_i_center,
            theta_o_center,
            lambda0,
            sweep_duration,
        )?,
        Mode::Multiview | Mode::MultiviewStatic => {
            let law = PhaseLaw {
                theta_i_center,
                theta_o_center,
                theta_o_width,
                lambda_x,
                lambda_tau,
                x_ref: offset,
                spatial_phase: cfg.spatial_phase_deg.to_radians(),
                codebook: reflection_codebook.clone(),
            };
            PhasePlan::new(
                law,
                ModuleLayout::new(&scene.plane, n_mod),
                lambda0,
                sweep_duration,
            )
        }
    };

    let sweeps = cfg.sweeps.unwrap_or(match cfg.mode {
        Mode::Multiview => n_reflect,
        Mode::MultiviewStatic | Mode::Mirror => 1,
    });
    if sweeps == 0 {
        return Err(Error::ConfigValue("sweeps must be >= 1".into()));
    }
    let schedule = SweepSchedule::new(&sweep_codebook, sweeps);

    // Spatial narrowband audit over the schedule.
    let max_sin_out = reflection_codebook
        .angles()
        .map(|a| a.sin().abs())
        .fold(0.0f64, f64::max);
    let nb = narrowband_ratio(&scene, &schedule, max_sin_out)?;
    if nb > 1.0 {
        warnings.push(format!(
            "spatial narrowband condition violated: residual aperture delay is {:.2}x the 0.1/B budget",
            nb
        ));
    }

    // Imaging window.
    let pixel = cfg.pixel_m.unwrap_or(lambda0 / 4.0);
    let image_center = (
        cfg.image_center_x_m.unwrap_or(scene.roi.center.0),
        cfg.image_center_y_m.unwrap_or(scene.roi.center.1),
    );
    let image_extent = (
        cfg.image_extent_x_m.unwrap_or(scene.roi.extent.0),
        cfg.image_extent_y_m.unwrap_or(scene.roi.extent.1),
    );
    let grid = ImageGrid::covering(image_center, image_extent, pixel)?;

    // Targets.
    let mut targets = Vec::with_capacity(cfg.targets.len());
    for (i, t) in cfg.targets.iter().enumerate() {
        let pos = (t.x_m, t.y_m);
        if !scene.roi.contains(pos) {
            return Err(Error::ConfigValue(format!(
                "target {} at ({}, {}) lies outside the ROI",
                i, t.x_m, t.y_m
            )));
        }
        targets.push(Target {
            position: pos,
            reflectivity: Complex64::new(t.reflectivity_re, t.reflectivity_im),
        });
    }

    let sigma_w2 = if cfg.noise {
        10f64.powf((cfg.sigma_w_dbm - 30.0) / 10.0)
    } else {
        0.0
    };
    if cfg.noise && cfg.echo_mode != EchoMode::Sampled {
        return Err(Error::ConfigValue(
            "noise = on requires echo_mode = sampled".into(),
        ));
    }
    if cfg.oversample < 2.0 {
        return Err(Error::ConfigValue("oversample must be >= 2".into()));
    }
    let acquisition = AcquisitionConfig {
        tx_scale: cfg.tx_scale,
        sampled: cfg.echo_mode == EchoMode::Sampled,
        oversample: cfg.oversample,
        sigma_w2,
        seed: cfg.seed,
    };

    for e in &cfg.emit {
        match e.as_str() {
            "csv" | "pgm" | "json" | "plan" | "cube" => {}
            other => {
                return Err(Error::ConfigValue(format!(
                    "unknown emit format '{other}' (expected csv, pgm, json, plan, cube)"
                )))
            }
        }
    }

    let effective = EffectiveParams {
        source_height_m: scene.source_height,
        carrier_hz: scene.carrier_freq,
        bandwidth_hz: scene.bandwidth,
        wavelength_m: lambda0,
        element_count,
        element_spacing_m: spacing,
        plane_offset_m: offset,
        bs_aperture_m: bs_aperture,
        roi_center_m: scene.roi.center,
        roi_extent_m: scene.roi.extent,
        theta_i_center_rad: theta_i_center,
        theta_i_width_rad: theta_i_width,
        dtheta_i_rad: sweep_codebook.grid.step,
        n_sweep_angles: sweep_codebook.len(),
        dwell_s: dwell,
        theta_o_center_rad: theta_o_center,
        theta_o_width_rad: theta_o_width,
        dtheta_o_rad: reflection_codebook.step,
        n_reflect,
        lambda_x_m: lambda_x,
        lambda_tau_s: lambda_tau,
        n_mod,
        spatial_phase_rad: cfg.spatial_phase_deg.to_radians(),
        mode: cfg.mode,
        sweeps,
        seed: cfg.seed,
        sigma_w2_watts: sigma_w2,
        tx_scale: cfg.tx_scale,
        echo_mode: cfg.echo_mode,
        oversample: cfg.oversample,
        pixel_m: pixel,
        image_center_m: image_center,
        image_extent_m: image_extent,
        targets: cfg
            .targets
            .iter()
            .map(|t| (t.x_m, t.y_m, t.reflectivity_re, t.reflectivity_im))
            .collect(),
    };

    Ok(ResolvedRun {
        scene,
        sweep_codebook,
        plan,
        schedule,
        report,
        grid,
        targets,
        acquisition,
        mode: cfg.mode,
        emit: cfg.emit.clone(),
        effective,
        warnings,
    })
}
