//! Geometry of the source, the reflection plane, the region of interest and
//! the point targets, plus the footprint/angle computations every other
//! module builds on.
//!
//! Conventions: the plane lies along y = 0, the source at (0, +D), the
//! region of interest strictly below (y < 0). Angles are measured from the
//! plane normal pointing towards -y, positive towards +x, and are stored in
//! radians.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::SweepSchedule;
use crate::metasurface::PhasePlan;
use crate::SPEED_OF_LIGHT;

/// A 2-D point or vector in metres.
pub type Point = (f64, f64);

/// Uniform linear metasurface along y = 0.
#[derive(Debug, Clone)]
pub struct PlaneGeometry {
    /// Number of elements N (even). Element n sits at `offset + n*spacing`
    /// for n = -N/2+1 ..= N/2.
    pub element_count: usize,
    /// Element pitch d in metres.
    pub spacing: f64,
    /// Deployment offset x0 of the element grid in metres.
    pub offset: f64,
}

impl PlaneGeometry {
    /// Inclusive element index range (-N/2+1, N/2).
    pub fn index_range(&self) -> (i64, i64) {
        let half = self.element_count as i64 / 2;
        (-half + 1, half)
    }

    /// Position of element n on the x axis.
    pub fn element_x(&self, n: i64) -> f64 {
        self.offset + n as f64 * self.spacing
    }

    /// Total plane length L = N*d.
    pub fn length(&self) -> f64 {
        self.element_count as f64 * self.spacing
    }

    /// x positions of the first and last element.
    pub fn extent(&self) -> (f64, f64) {
        let (lo, hi) = self.index_range();
        (self.element_x(lo), self.element_x(hi))
    }
}

/// Rectangular region of interest, strictly below the plane.
#[derive(Debug, Clone)]
pub struct Roi {
    /// Centre (x, y) in metres, y < 0.
    pub center: Point,
    /// Full extents (dx, dy) in metres.
    pub extent: Point,
}

impl Roi {
    pub fn corners(&self) -> [Point; 4] {
        let (cx, cy) = self.center;
        let (hx, hy) = (self.extent.0 / 2.0, self.extent.1 / 2.0);
        [
            (cx - hx, cy - hy),
            (cx - hx, cy + hy),
            (cx + hx, cy - hy),
            (cx + hx, cy + hy),
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        let (cx, cy) = self.center;
        let (hx, hy) = (self.extent.0 / 2.0, self.extent.1 / 2.0);
        (p.0 - cx).abs() <= hx + 1e-12 && (p.1 - cy).abs() <= hy + 1e-12
    }
}

/// Point scatterer with complex reflectivity.
#[derive(Debug, Clone)]
pub struct Target {
    pub position: Point,
    pub reflectivity: Complex64,
}

/// Contiguous run of illuminated element indices (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementSpan {
    pub first: i64,
    pub last: i64,
}

impl ElementSpan {
    pub fn len(&self) -> usize {
        (self.last - self.first + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.first && n <= self.last
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.first..=self.last
    }
}

/// Full static geometry of an acquisition.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Source height D above the plane, metres.
    pub source_height: f64,
    pub plane: PlaneGeometry,
    pub roi: Roi,
    /// Carrier frequency f0, Hz.
    pub carrier_freq: f64,
    /// Signal bandwidth B, Hz.
    pub bandwidth: f64,
    /// Source array aperture A = K*d, metres.
    pub bs_aperture: f64,
}

impl Scene {
    /// Carrier wavelength lambda0 = c/f0.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_height <= 0.0 {
            return Err(Error::Geometry("source height must be positive".into()));
        }
        if self.plane.spacing <= 0.0 {
            return Err(Error::Geometry("element spacing must be positive".into()));
        }
        if self.plane.element_count < 2 || !self.plane.element_count.is_multiple_of(2) {
            return Err(Error::Geometry(format!(
                "element count must be even and >= 2, got {}",
                self.plane.element_count
            )));
        }
        if self.carrier_freq <= 0.0 || self.bandwidth <= 0.0 {
            return Err(Error::Geometry(
                "carrier frequency and bandwidth must be positive".into(),
            ));
        }
        if self.bs_aperture <= 0.0 {
            return Err(Error::Geometry("source aperture must be positive".into()));
        }
        if self.roi.extent.0 <= 0.0 || self.roi.extent.1 <= 0.0 {
            return Err(Error::Geometry("ROI extents must be positive".into()));
        }
        // The ROI must sit strictly on the far side of the plane.
        if self.roi.center.1 + self.roi.extent.1 / 2.0 >= 0.0 {
            return Err(Error::Geometry(
                "ROI must lie strictly below the plane (y < 0)".into(),
            ));
        }
        Ok(())
    }

    /// Where the beam pointed at `theta_i` meets the plane: (D tan(theta), 0).
    pub fn incidence_point(&self, theta_i: f64) -> Result<Point> {
        check_angle(theta_i)?;
        Ok((self.source_height * theta_i.tan(), 0.0))
    }

    /// Distance from the source (0, D) to the incidence point.
    pub fn source_to_plane_distance(&self, theta_i: f64) -> Result<f64> {
        check_angle(theta_i)?;
        Ok(self.source_height / theta_i.cos())
    }

    /// Half-power beamwidth of the source array, lambda0/(A cos(theta_i)).
    pub fn beamwidth(&self, theta_i: f64) -> f64 {
        self.wavelength() / (self.bs_aperture * theta_i.cos())
    }

    /// Exact beam footprint on the plane for a beam of width `theta_bw`
    /// centred on `theta_i`: the tangent interval
    /// [D tan(theta_i - bw/2), D tan(theta_i + bw/2)].
    pub fn footprint(&self, theta_i: f64, theta_bw: f64) -> Result<(f64, f64)> {
        let lo = theta_i - theta_bw / 2.0;
        let hi = theta_i + theta_bw / 2.0;
        check_angle(lo)?;
        check_angle(hi)?;
        Ok((self.source_height * lo.tan(), self.source_height * hi.tan()))
    }

    /// Elements whose position falls inside the exact beam footprint.
    /// An empty intersection yields an empty span, not an error.
    pub fn illuminated_set(&self, theta_i: f64, theta_bw: f64) -> Result<ElementSpan> {
        let (x_lo, x_hi) = self.footprint(theta_i, theta_bw)?;
        let (n_min, n_max) = self.plane.index_range();
        if theta_bw == 0.0 {
            // Degenerate footprint: the single element nearest the beam centre.
            let n = ((x_lo - self.plane.offset) / self.plane.spacing).round() as i64;
            let n = n.clamp(n_min, n_max);
            return Ok(ElementSpan { first: n, last: n });
        }
        let d = self.plane.spacing;
        let first = ((x_lo - self.plane.offset) / d - 1e-12).ceil() as i64;
        let last = ((x_hi - self.plane.offset) / d + 1e-12).floor() as i64;
        let first = first.max(n_min);
        let last = last.min(n_max);
        Ok(ElementSpan { first, last })
    }

    /// Illuminated-element count estimate D*bw/(d sin(theta) cos(theta)).
    ///
    /// Reported for reference only: it diverges as theta_i -> 0 and can be
    /// far from the exact tangent-interval count at moderate angles; the
    /// exact [`Scene::illuminated_set`] is the ground truth everywhere.
    pub fn illuminated_count_estimate(&self, theta_i: f64, theta_bw: f64) -> f64 {
        let denom = self.plane.spacing * theta_i.sin() * theta_i.cos();
        self.source_height * theta_bw / denom
    }

    /// Aperture asymptotically covered by a sweep of width `width` centred
    /// on `center`: D*[tan(c + w/2) - tan(c - w/2)].
    pub fn asymptotic_aperture(&self, center: f64, width: f64) -> Result<f64> {
        let lo = center - width / 2.0;
        let hi = center + width / 2.0;
        check_angle(lo)?;
        check_angle(hi)?;
        Ok(self.source_height * (hi.tan() - lo.tan()))
    }

    /// Number of distinct illumination episodes of target `r` over the
    /// schedule: maximal runs of consecutive snapshots in which at least one
    /// illuminated module's reflected beam footprint contains the target.
    /// A target parked in one beam for several dwells counts once.
    pub fn view_count(&self, r: Point, schedule: &SweepSchedule, plan: &PhasePlan) -> usize {
        let lambda0 = self.wavelength();
        let mut runs = 0usize;
        let mut in_run = false;
        for snap in &schedule.snapshots {
            let seen = self.target_in_reflected_beam(r, snap.theta_i, snap.tau, plan, lambda0);
            if seen && !in_run {
                runs += 1;
            }
            in_run = seen;
        }
        runs
    }

    /// True when some illuminated module points its reflected beam at `r`.
    pub fn target_in_reflected_beam(
        &self,
        r: Point,
        theta_i: f64,
        tau: f64,
        plan: &PhasePlan,
        lambda0: f64,
    ) -> bool {
        let bw = self.beamwidth(theta_i);
        let Ok(span) = self.illuminated_set(theta_i, bw) else {
            return false;
        };
        if span.is_empty() {
            return false;
        }
        let sin_in = theta_i.sin();
        for state in plan.module_states(tau) {
            let module = &plan.layout.modules[state.module_index];
            if module.last < span.first || module.first > span.last {
                continue;
            }
            // Grating relation for a module blazed for the sweep centre.
            let sin_out = sin_in + (plan.law.theta_i_center + state.delta_mod).sin()
                - plan.law.theta_i_center.sin();
            if sin_out.abs() >= 1.0 {
                continue;
            }
            let theta_out = sin_out.asin();
            let Ok(theta_target) = required_reflection_angle((module.center_x, 0.0), r) else {
                continue;
            };
            let n_eff = module.last.min(span.last) - module.first.max(span.first) + 1;
            let module_bw = lambda0 / (n_eff as f64 * self.plane.spacing * theta_out.cos());
            if (theta_target - theta_out).abs() <= module_bw / 2.0 {
                return true;
            }
        }
        false
    }
}

/// Reflection angle that sends a ray from plane point `p` to target `r`:
/// atan((r_x - p_x)/|r_y|), positive towards +x. The ROI convention fixes
/// targets below the plane, so the magnitude of r_y is used.
pub fn required_reflection_angle(p: Point, r: Point) -> Result<f64> {
    if r.1 == 0.0 {
        return Err(Error::Geometry(
            "target on the plane (r_y = 0) has no reflection angle".into(),
        ));
    }
    Ok(((r.0 - p.0) / r.1.abs()).atan())
}

fn check_angle(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::AngleOutOfRange(theta));
    }
    Ok(())
}
