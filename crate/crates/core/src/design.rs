//! Construction of the sweep and reflection codebooks and the anti-aliasing
//! sampling bounds that size them, plus the spatial/temporal periods and the
//! module size of the reflection plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Point, Roi, Scene};

/// Uniformly sampled closed angular interval, generated by index so the
/// angles carry no cumulative summation drift.
#[derive(Debug, Clone)]
pub struct AngleGrid {
    /// Centre angle, rad.
    pub center: f64,
    /// Full width, rad (0 collapses the grid to the centre angle).
    pub width: f64,
    /// Sampling step, rad (0 when the grid is a single angle).
    pub step: f64,
    count: usize,
}

impl AngleGrid {
    pub fn new(center: f64, width: f64, step: f64) -> Result<Self> {
        if width < 0.0 {
            return Err(Error::Design("codebook width must be >= 0".into()));
        }
        if center.abs() + width / 2.0 >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Design(format!(
                "codebook [{:.3}, {:.3}] deg spans beyond +-90 deg",
                (center - width / 2.0).to_degrees(),
                (center + width / 2.0).to_degrees()
            )));
        }
        if width == 0.0 {
            return Ok(Self {
                center,
                width,
                step: 0.0,
                count: 1,
            });
        }
        if step <= 0.0 {
            return Err(Error::Design("codebook step must be positive".into()));
        }
        let count = (width / step + 1e-9).floor() as usize + 1;
        Ok(Self {
            center,
            width,
            step,
            count,
        })
    }

    /// Grid with exactly `count` angles and both endpoints included.
    pub fn with_count(center: f64, width: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Design("codebook cannot be empty".into()));
        }
        if count == 1 || width == 0.0 {
            return Self::new(center, 0.0, 0.0);
        }
        Self::new(center, width, width / (count - 1) as f64)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// angle(i) = center - width/2 + i*step, computed from the index.
    pub fn angle(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        self.center - self.width / 2.0 + i as f64 * self.step
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.angle(i))
    }

    pub fn first(&self) -> f64 {
        self.angle(0)
    }

    pub fn last(&self) -> f64 {
        self.angle(self.count - 1)
    }
}

/// Beam sweep codebook of the source, with its dwell time.
#[derive(Debug, Clone)]
pub struct SweepCodebook {
    pub grid: AngleGrid,
    /// Dwell per snapshot, seconds.
    pub dwell: f64,
}

impl SweepCodebook {
    pub fn new(center: f64, width: f64, step: f64, dwell: f64) -> Result<Self> {
        if dwell <= 0.0 {
            return Err(Error::Design("dwell must be positive".into()));
        }
        Ok(Self {
            grid: AngleGrid::new(center, width, step)?,
            dwell,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sweep duration T = |codebook| * dwell.
    pub fn sweep_duration(&self) -> f64 {
        self.grid.len() as f64 * self.dwell
    }
}

/// Reflection codebook realised by the plane modules.
pub type ReflectionCodebook = AngleGrid;

/// Two-way propagation phase (4 pi / lambda0) * (D_i + D_o) for a beam at
/// `theta_i` and a target at `r`.
pub fn two_way_phase(theta_i: f64, r: Point, source_height: f64, lambda0: f64) -> f64 {
    let d_i = source_height / theta_i.cos();
    let px = source_height * theta_i.tan();
    let d_o = ((r.0 - px).powi(2) + r.1 * r.1).sqrt();
    4.0 * std::f64::consts::PI / lambda0 * (d_i + d_o)
}

/// Analytic derivative of the two-way propagation phase with respect to the
/// sweep angle:
///
/// (4 pi D)/(lambda0 cos^2 t) * [sin t - (r_x - D tan t)/sqrt(r_y^2 + (r_x - D tan t)^2)]
pub fn propagation_phase_derivative(
    theta_i: f64,
    r: Point,
    source_height: f64,
    lambda0: f64,
) -> Result<f64> {
    if theta_i.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::AngleOutOfRange(theta_i));
    }
    if r.1 == 0.0 {
        return Err(Error::Geometry("target on the plane (r_y = 0)".into()));
    }
    let cos = theta_i.cos();
    let dx = r.0 - source_height * theta_i.tan();
    let hyp = (r.1 * r.1 + dx * dx).sqrt();
    let coeff = 4.0 * std::f64::consts::PI * source_height / (lambda0 * cos * cos);
    Ok(coeff * (theta_i.sin() - dx / hyp))
}

/// Result of the sweep sampling-bound search.
#[derive(Debug, Clone, Copy)]
pub struct SweepBound {
    /// Upper bound on the sweep sampling step, rad. `f64::INFINITY` when the
    /// derivative spread is degenerate.
    pub max_step: f64,
    pub degenerate: bool,
}

/// Largest sweep sampling step that avoids spatial ambiguities inside the
/// ROI: pi over the spread between the extreme phase derivatives, evaluated
/// at the two ends +-width/2 of the swept interval. The extrema are searched
/// over the ROI corners plus an interior grid of `grid_n` x `grid_n` points.
pub fn sweep_sampling_bound(
    source_height: f64,
    lambda0: f64,
    roi: &Roi,
    sweep_width: f64,
    grid_n: usize,
) -> Result<SweepBound> {
    let theta_hi = sweep_width / 2.0;
    let theta_lo = -sweep_width / 2.0;
    let mut max_hi = f64::NEG_INFINITY;
    let mut min_lo = f64::INFINITY;
    for r in roi_sample_points(roi, grid_n) {
        max_hi = max_hi.max(propagation_phase_derivative(
            theta_hi,
            r,
            source_height,
            lambda0,
        )?);
        min_lo = min_lo.min(propagation_phase_derivative(
            theta_lo,
            r,
            source_height,
            lambda0,
        )?);
    }
    let spread = (max_hi - min_lo).abs();
    if spread == 0.0 {
        return Ok(SweepBound {
            max_step: f64::INFINITY,
            degenerate: true,
        });
    }
    Ok(SweepBound {
        max_step: std::f64::consts::PI / spread,
        degenerate: false,
    })
}

/// ROI corners plus an n x n interior grid (n >= 2 spans the rectangle).
fn roi_sample_points(roi: &Roi, grid_n: usize) -> Vec<Point> {
    let mut pts = roi.corners().to_vec();
    let n = grid_n.max(2);
    let (cx, cy) = roi.center;
    let (hx, hy) = (roi.extent.0 / 2.0, roi.extent.1 / 2.0);
    for i in 0..n {
        for j in 0..n {
            let fx = i as f64 / (n - 1) as f64;
            let fy = j as f64 / (n - 1) as f64;
            pts.push((cx - hx + 2.0 * hx * fx, cy - hy + 2.0 * hy * fy));
        }
    }
    pts
}

/// Largest reflection sampling step that keeps the beams of adjacent modules
/// overlapped: half the narrowest module beamwidth over the codebook.
pub fn reflection_sampling_bound(
    codebook: &ReflectionCodebook,
    n_mod: usize,
    spacing: f64,
    lambda0: f64,
) -> f64 {
    let mut min_bw = f64::INFINITY;
    for theta in codebook.angles() {
        min_bw = min_bw.min(lambda0 / (n_mod as f64 * spacing * theta.cos()));
    }
    0.5 * min_bw
}

/// Spatial period, temporal period and module element count:
/// lambda_x = 2*A_inf (unless overridden), lambda_tau = |codebook|*T,
/// n_mod = round(lambda_x / (2 d |codebook|)).
pub fn periods_and_module_size(
    a_inf: f64,
    n_reflect: usize,
    sweep_duration: f64,
    spacing: f64,
    lambda_x_override: Option<f64>,
) -> Result<(f64, f64, usize)> {
    if a_inf <= 0.0 || n_reflect == 0 || sweep_duration <= 0.0 || spacing <= 0.0 {
        return Err(Error::Design(
            "aperture, codebook size, sweep duration and spacing must be positive".into(),
        ));
    }
    let lambda_x = lambda_x_override.unwrap_or(2.0 * a_inf);
    if lambda_x <= 0.0 {
        return Err(Error::Design("spatial period must be positive".into()));
    }
    let lambda_tau = n_reflect as f64 * sweep_duration;
    let n_mod = (lambda_x / (2.0 * spacing * n_reflect as f64)).round() as usize;
    if n_mod == 0 {
        return Err(Error::Design(format!(
            "module size rounds to zero (lambda_x = {lambda_x:.3} m, d = {spacing:.4} m, |codebook| = {n_reflect})"
        )));
    }
    Ok((lambda_x, lambda_tau, n_mod))
}

/// Summary of the resolved design, serialised as design_report.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignReport {
    pub lambda_x_m: f64,
    pub lambda_tau_s: f64,
    pub n_mod: usize,
    pub a_inf_m: f64,
    pub dtheta_i_max_rad: f64,
    pub dtheta_o_max_rad: f64,
    pub warnings: Vec<String>,
}

/// Automatic reflection-codebook centre: the direction from the plane offset
/// to the ROI centre.
pub fn auto_reflection_center(scene: &Scene) -> Result<f64> {
    crate::scene::required_reflection_angle((scene.plane.offset, 0.0), scene.roi.center)
}

/// Automatic reflection-codebook width: the angular span of the ROI as seen
/// from the two ends of the illuminated plane segment, symmetrised around
/// the codebook centre.
pub fn auto_reflection_width(
    scene: &Scene,
    sweep_center: f64,
    sweep_width: f64,
    reflection_center: f64,
) -> Result<f64> {
    let ends = [
        scene.incidence_point(sweep_center - sweep_width / 2.0)?,
        scene.incidence_point(sweep_center + sweep_width / 2.0)?,
    ];
    let mut half = 0.0f64;
    for end in ends {
        for corner in scene.roi.corners() {
            let angle = crate::scene::required_reflection_angle(end, corner)?;
            half = half.max((angle - reflection_center).abs());
        }
    }
    Ok(2.0 * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{PlaneGeometry, Roi, Scene};
    use crate::SPEED_OF_LIGHT;

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    fn lambda28() -> f64 {
        SPEED_OF_LIGHT / 28.0e9
    }

    #[test]
    fn sweep_codebook_grid() {
        let cb = SweepCodebook::new(deg(30.0), deg(10.0), deg(1.0), 1e-3).unwrap();
        assert_eq!(cb.len(), 11);
        assert!((cb.grid.first().to_degrees() - 25.0).abs() < 1e-12);
        assert!((cb.grid.last().to_degrees() - 35.0).abs() < 1e-12);
        // Angles are exactly start + k*step.
        for (i, a) in cb.grid.angles().enumerate() {
            assert_eq!(a, cb.grid.first() + i as f64 * cb.grid.step);
        }
        assert!((cb.sweep_duration() - 11.0e-3).abs() < 1e-15);
    }

    #[test]
    fn sweep_codebook_degenerate_and_invalid() {
        let cb = SweepCodebook::new(deg(30.0), 0.0, 0.0, 1e-3).unwrap();
        assert_eq!(cb.len(), 1);
        assert_eq!(cb.grid.angle(0), deg(30.0));
        assert!(SweepCodebook::new(deg(85.0), deg(20.0), deg(1.0), 1e-3).is_err());
        assert!(SweepCodebook::new(deg(30.0), deg(10.0), -1.0, 1e-3).is_err());
    }

    #[test]
    fn derivative_vanishes_by_symmetry() {
        let d = propagation_phase_derivative(0.0, (0.0, -10.0), 5.0, lambda28()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn derivative_vanishes_on_stationary_direction() {
        // Target placed so the plane->target direction equals theta_i.
        let theta = deg(20.0);
        let p = 5.0 * theta.tan();
        let ry = -7.0;
        let r = (p + 7.0 * theta.tan(), ry);
        let d = propagation_phase_derivative(theta, r, 5.0, lambda28()).unwrap();
        let scale = 4.0 * std::f64::consts::PI * 5.0 / (lambda28() * theta.cos().powi(2));
        assert!(d.abs() < 1e-9 * scale);
    }

    #[test]
    fn derivative_reference_value() {
        // 570.3 rad/rad for the reference target, with lambda0 = 0.010707 m.
        let d = propagation_phase_derivative(deg(30.0), (9.5, -14.0), 5.0, 0.010707).unwrap();
        assert!((d - 570.27).abs() < 0.5, "derivative {d}");
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // Central finite differences of the two-way phase, step 1e-6 rad,
        // over a deterministic pseudo-random draw of (theta_i, r).
        let lambda0 = lambda28();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let theta = deg(-60.0 + 120.0 * rand01());
            let r = (-20.0 + 40.0 * rand01(), -1.0 - 29.0 * rand01());
            let h = 1e-6;
            let fd = (two_way_phase(theta + h, r, 5.0, lambda0)
                - two_way_phase(theta - h, r, 5.0, lambda0))
                / (2.0 * h);
            let an = propagation_phase_derivative(theta, r, 5.0, lambda0).unwrap();
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-6, "theta {theta} r {r:?} an {an} fd {fd}");
        }
    }

    #[test]
    fn sweep_bound_reference_and_scaling() {
        let roi = Roi {
            center: (9.5, -14.0),
            extent: (5.0, 5.0),
        };
        let b = sweep_sampling_bound(5.0, lambda28(), &roi, deg(10.0), 9).unwrap();
        assert!(!b.degenerate);
        // Exhaustive oracle on a 0.1 m grid; the extrema sit on the ROI
        // boundary so the default corner-seeded grid finds the same values.
        let mut max_hi = f64::NEG_INFINITY;
        let mut min_lo = f64::INFINITY;
        let mut x = 7.0;
        while x <= 12.0 + 1e-9 {
            let mut y = -16.5;
            while y <= -11.5 + 1e-9 {
                max_hi = max_hi
                    .max(propagation_phase_derivative(deg(5.0), (x, y), 5.0, lambda28()).unwrap());
                min_lo = min_lo
                    .min(propagation_phase_derivative(deg(-5.0), (x, y), 5.0, lambda28()).unwrap());
                y += 0.1;
            }
            x += 0.1;
        }
        let oracle = std::f64::consts::PI / (max_hi - min_lo).abs();
        assert!(
            (b.max_step - oracle).abs() / oracle < 0.02,
            "bound {} oracle {}",
            b.max_step,
            oracle
        );
        // Doubling the wavelength doubles the bound.
        let b2 = sweep_sampling_bound(5.0, 2.0 * lambda28(), &roi, deg(10.0), 9).unwrap();
        assert!((b2.max_step / b.max_step - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_bound_degenerate_roi() {
        // A point ROI with zero sweep width has zero derivative spread.
        let roi = Roi {
            center: (9.5, -14.0),
            extent: (0.0, 0.0),
        };
        let b = sweep_sampling_bound(5.0, lambda28(), &roi, 0.0, 9).unwrap();
        assert!(b.degenerate);
        assert!(b.max_step.is_infinite());
    }

    #[test]
    fn reflection_codebook_examples() {
        let cb = ReflectionCodebook::with_count(deg(25.28), deg(29.57), 15).unwrap();
        assert_eq!(cb.len(), 15);
        assert!((cb.first().to_degrees() - (25.28 - 29.57 / 2.0)).abs() < 1e-9);
        assert!((cb.last().to_degrees() - (25.28 + 29.57 / 2.0)).abs() < 1e-9);
        let single = ReflectionCodebook::new(deg(10.0), 0.0, 0.0).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn auto_reflection_center_matches_roi() {
        let lambda0 = lambda28();
        let scene = Scene {
            source_height: 5.0,
            plane: PlaneGeometry {
                element_count: 300,
                spacing: lambda0 / 2.0,
                offset: 5.0 * deg(30.0).tan(),
            },
            roi: Roi {
                center: (9.5, -14.0),
                extent: (5.0, 5.0),
            },
            carrier_freq: 28.0e9,
            bandwidth: 400.0e6,
            bs_aperture: 53.0 * lambda0 / 2.0,
        };
        let c = auto_reflection_center(&scene).unwrap();
        assert!((c.to_degrees() - 25.284_87).abs() < 1e-3);
    }

    #[test]
    fn reflection_bound_examples() {
        let lambda0 = 0.010707;
        let broadside = ReflectionCodebook::new(0.0, 0.0, 0.0).unwrap();
        let b = reflection_sampling_bound(&broadside, 40, 0.005, lambda0);
        assert!((b - lambda0 / (2.0 * 40.0 * 0.005)).abs() < 1e-12);
        // Beam steered to 40 deg with n_mod*d = 0.2 m: half its beamwidth is
        // 0.03494 rad (~2 deg).
        let steered = ReflectionCodebook::new(deg(40.0), 0.0, 0.0).unwrap();
        let b = reflection_sampling_bound(&steered, 40, 0.005, lambda0);
        assert!((b - 0.034_94).abs() < 1e-4);
        let b2 = reflection_sampling_bound(&steered, 80, 0.005, lambda0);
        assert!((b / b2 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_bound_takes_narrowest_beam() {
        // The binding pair is the one with the narrowest beams, i.e. the
        // codebook angle closest to broadside.
        let lambda0 = lambda28();
        let wide = ReflectionCodebook::with_count(0.0, deg(80.0), 5).unwrap();
        let broadside_only = ReflectionCodebook::new(0.0, 0.0, 0.0).unwrap();
        let b_wide = reflection_sampling_bound(&wide, 37, 0.005, lambda0);
        let b_bs = reflection_sampling_bound(&broadside_only, 37, 0.005, lambda0);
        assert!((b_wide - b_bs).abs() < 1e-15);
        // Larger modules always tighten the bound.
        let mut prev = f64::INFINITY;
        for n_mod in [10usize, 20, 40, 80] {
            let b = reflection_sampling_bound(&wide, n_mod, 0.005, lambda0);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn periods_reference_values() {
        // lambda_x defaults to twice the asymptotic aperture.
        let (lx, _, _) = periods_and_module_size(1.1695, 15, 0.01, 0.0053534, None).unwrap();
        assert!((lx - 2.339).abs() < 1e-3);
        // The 6 m override with 15 reflection angles gives 37-element
        // modules, about 0.2 m wide.
        let (lx, ltau, n_mod) =
            periods_and_module_size(1.1695, 15, 0.01, 0.0053533, Some(6.0)).unwrap();
        assert_eq!(lx, 6.0);
        assert_eq!(n_mod, 37);
        assert!((n_mod as f64 * 0.0053533 - 0.198).abs() < 0.001);
        assert!((ltau - 0.15).abs() < 1e-12);
        // Module size rounding to zero is an error.
        assert!(periods_and_module_size(0.001, 15, 0.01, 1.0, None).is_err());
    }
}
