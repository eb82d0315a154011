//! Space-time reflection law of the plane, its quantization onto the
//! reflection codebook, and the per-element phase profiles that realise it.
//!
//! The plane is a sequence of constant-gradient modules. At any instant each
//! module applies the linear phase that deflects a beam arriving from the
//! sweep centre by the module's current quantized angular difference. The
//! law is sampled at the module centre and the phase is referenced to the
//! module centre, which keeps the per-module profile bounded and minimises
//! worst-case pointing error inside the module.

use num_complex::Complex64;

use crate::design::ReflectionCodebook;
use crate::error::Result;
use crate::scene::PlaneGeometry;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Parameters of the periodic angular-difference law.
#[derive(Debug, Clone)]
pub struct PhaseLaw {
    /// Sweep codebook centre, rad.
    pub theta_i_center: f64,
    /// Reflection codebook centre, rad.
    pub theta_o_center: f64,
    /// Reflection codebook width, rad.
    pub theta_o_width: f64,
    /// Spatial period, metres.
    pub lambda_x: f64,
    /// Temporal period, seconds. `None` freezes the law in time.
    pub lambda_tau: Option<f64>,
    /// Spatial reference: the law's cosine argument is measured from this x
    /// coordinate (the illuminated-aperture centre), so the design does not
    /// depend on where the plane sits relative to the coordinate origin.
    pub x_ref: f64,
    /// Phase of the cosine at (x_ref, tau = 0). Zero starts the aperture
    /// centre at the codebook edge; -90 deg starts it boresight on the ROI
    /// centre.
    pub spatial_phase: f64,
    pub codebook: ReflectionCodebook,
}

impl PhaseLaw {
    /// Continuous angular difference
    /// center_o - center_i
    ///   + (width/2) * cos(2 pi (x - x_ref)/lambda_x - 2 pi tau/lambda_tau + phase).
    pub fn angular_difference(&self, x: f64, tau: f64) -> f64 {
        let mut cycles = (x - self.x_ref) / self.lambda_x;
        if let Some(lt) = self.lambda_tau {
            cycles -= tau / lt;
        }
        let base = self.theta_o_center - self.theta_i_center;
        base + 0.5
            * self.theta_o_width
            * (TWO_PI * cycles.rem_euclid(1.0) + self.spatial_phase).cos()
    }

    /// Nearest-neighbour quantization of the angular difference onto the
    /// grid induced by the reflection codebook, so the reflected directions
    /// land exactly on codebook angles. Ties break toward the smaller angle.
    pub fn quantized_angular_difference(&self, x: f64, tau: f64) -> f64 {
        let value = self.angular_difference(x, tau);
        self.quantize_difference(value)
    }

    /// Quantize an arbitrary angular difference onto {q - center_i}.
    pub fn quantize_difference(&self, value: f64) -> f64 {
        let cb = &self.codebook;
        if cb.len() == 1 || cb.step == 0.0 {
            return cb.angle(0) - self.theta_i_center;
        }
        let first = cb.first() - self.theta_i_center;
        let t = (value - first) / cb.step;
        let k = t.floor();
        let frac = t - k;
        let mut idx = if frac > 0.5 { k as i64 + 1 } else { k as i64 };
        idx = idx.clamp(0, cb.len() as i64 - 1);
        cb.angle(idx as usize) - self.theta_i_center
    }
}

/// Phase gradient that deflects a beam from `theta_i_center` by `delta_mod`:
/// (2 pi / lambda0) * [sin(center) - sin(center + delta_mod)], rad per metre.
pub fn phase_slope(theta_i_center: f64, delta_mod: f64, lambda0: f64) -> f64 {
    TWO_PI / lambda0 * (theta_i_center.sin() - (theta_i_center + delta_mod).sin())
}

/// Linear module phase before wrapping; `x` is measured from the module
/// centre.
pub fn phase_profile_unwrapped(x: f64, delta_mod: f64, theta_i_center: f64, lambda0: f64) -> f64 {
    phase_slope(theta_i_center, delta_mod, lambda0) * x
}

/// Module phase wrapped to [0, 2 pi).
pub fn phase_profile(x: f64, delta_mod: f64, theta_i_center: f64, lambda0: f64) -> f64 {
    wrap_2pi(phase_profile_unwrapped(
        x,
        delta_mod,
        theta_i_center,
        lambda0,
    ))
}

pub fn wrap_2pi(phase: f64) -> f64 {
    phase.rem_euclid(TWO_PI)
}

/// One constant-gradient block of elements.
#[derive(Debug, Clone)]
pub struct Module {
    /// First and last element index (inclusive).
    pub first: i64,
    pub last: i64,
    /// x coordinate of the module centre.
    pub center_x: f64,
}

/// Partition of the plane into contiguous modules of `n_mod` elements; the
/// trailing module may be shorter.
#[derive(Debug, Clone)]
pub struct ModuleLayout {
    pub plane: PlaneGeometry,
    pub modules: Vec<Module>,
}

impl ModuleLayout {
    pub fn new(plane: &PlaneGeometry, n_mod: usize) -> Self {
        let n_mod = n_mod.max(1) as i64;
        let (lo, hi) = plane.index_range();
        let mut modules = Vec::new();
        let mut first = lo;
        while first <= hi {
            let last = (first + n_mod - 1).min(hi);
            let center_x = (plane.element_x(first) + plane.element_x(last)) / 2.0;
            modules.push(Module {
                first,
                last,
                center_x,
            });
            first = last + 1;
        }
        Self {
            plane: plane.clone(),
            modules,
        }
    }

    /// A single module spanning the whole plane (continuous gradient, no
    /// modular quantization): the mirror construction.
    pub fn whole_plane(plane: &PlaneGeometry) -> Self {
        Self::new(plane, plane.element_count)
    }

    /// Index of the module containing element `n`.
    pub fn module_of(&self, n: i64) -> Option<usize> {
        self.modules
            .iter()
            .position(|m| n >= m.first && n <= m.last)
    }
}

/// Snapshot state of one module.
#[derive(Debug, Clone, Copy)]
pub struct ModuleState {
    pub module_index: usize,
    /// Quantized angular difference currently applied, rad.
    pub delta_mod: f64,
    /// Phase gradient realising it, rad/m.
    pub slope: f64,
}

/// Pure description of the plane configuration over time. Phases at any
/// (sweep, snapshot) follow from the law alone; there is no hidden state.
#[derive(Debug, Clone)]
pub struct PhasePlan {
    pub law: PhaseLaw,
    pub layout: ModuleLayout,
    /// Carrier wavelength, metres.
    pub lambda0: f64,
    /// Sweep duration T, seconds; sweep s shifts the law time by s*T.
    pub sweep_duration: f64,
}

impl PhasePlan {
    pub fn new(law: PhaseLaw, layout: ModuleLayout, lambda0: f64, sweep_duration: f64) -> Self {
        Self {
            law,
            layout,
            lambda0,
            sweep_duration,
        }
    }

    /// Time-invariant plan with constant angular difference
    /// `theta_o_center - theta_i_center` over the whole plane: an ideal
    /// (possibly anomalous) mirror. With equal centres every phase is zero.
    pub fn mirror(
        plane: &PlaneGeometry,
        theta_i_center: f64,
        theta_o_center: f64,
        lambda0: f64,
        sweep_duration: f64,
    ) -> Result<Self> {
        let codebook = ReflectionCodebook::new(theta_o_center, 0.0, 0.0)?;
        let law = PhaseLaw {
            theta_i_center,
            theta_o_center,
            theta_o_width: 0.0,
            lambda_x: 1.0,
            lambda_tau: None,
            x_ref: plane.offset,
            spatial_phase: 0.0,
            codebook,
        };
        Ok(Self::new(
            law,
            ModuleLayout::whole_plane(plane),
            lambda0,
            sweep_duration,
        ))
    }

    /// Quantized state of every module at absolute law time `tau`.
    pub fn module_states(&self, tau: f64) -> Vec<ModuleState> {
        self.layout
            .modules
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let delta = self.law.quantized_angular_difference(m.center_x, tau);
                ModuleState {
                    module_index: i,
                    delta_mod: delta,
                    slope: phase_slope(self.law.theta_i_center, delta, self.lambda0),
                }
            })
            .collect()
    }

    /// Wrapped phase of every element at absolute law time `tau`, in element
    /// index order. The whole plane is materialised; illumination only
    /// selects which elements contribute to the echo.
    pub fn element_phases(&self, tau: f64) -> Vec<f64> {
        let states = self.module_states(tau);
        let mut phases = Vec::with_capacity(self.layout.plane.element_count);
        for state in &states {
            let module = &self.layout.modules[state.module_index];
            for n in module.first..=module.last {
                let x_rel = self.layout.plane.element_x(n) - module.center_x;
                phases.push(wrap_2pi(state.slope * x_rel));
            }
        }
        phases
    }

    /// Element phases for the snapshot at `tau_in_sweep` of sweep
    /// `sweep_index` (law time tau + sweep_index * T).
    pub fn snapshot_phases(&self, tau_in_sweep: f64, sweep_index: usize) -> Vec<f64> {
        self.element_phases(tau_in_sweep + sweep_index as f64 * self.sweep_duration)
    }
}

/// Discrete array factor of a set of elements with phases `phases` at
/// positions `positions` (metres, relative to the caller's phase reference):
/// sum of exp(j phi_m) * exp(-j (2 pi / lambda0) x_m (sin in - sin out)).
/// Dense scans of this response verify that a module's gain peaks at the
/// designed reflection angle.
pub fn array_response(
    phases: &[f64],
    positions: &[f64],
    theta_in: f64,
    theta_out: f64,
    lambda0: f64,
) -> Complex64 {
    debug_assert_eq!(phases.len(), positions.len());
    let u = theta_in.sin() - theta_out.sin();
    let k = TWO_PI / lambda0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (phi, x) in phases.iter().zip(positions) {
        acc += Complex64::from_polar(1.0, phi - k * x * u);
    }
    acc
}
