//! Synthesis of the received echo over the full sweep schedule.
//!
//! Per snapshot and target the echo is a single matched-filtered pulse with
//! complex amplitude
//!
//!   amp = tx * Gamma * (lambda0/(4 pi D_i))^2 * (lambda0/(4 pi D_o))^2
//!         * exp(-j (4 pi / lambda0) (D_i + D_o)) * S^2
//!
//! where the double sum over illuminated element pairs factorises into the
//! square of the single array sum
//!
//!   S = sum_{m in M} exp(j phi_m) exp(-j (2 pi d / lambda0) m (sin ti - sin to)),
//!
//! with distances taken at the beam-centre incidence point and `to` the
//! target-specific reflection angle from that point. Delay is the two-way
//! time 2 (D_i + D_o) / c.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::design::SweepCodebook;
use crate::error::{Error, Result};
use crate::metasurface::PhasePlan;
use crate::scene::{required_reflection_angle, ElementSpan, Scene, Target};
use crate::SPEED_OF_LIGHT;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One dwell of the source at a fixed pointing angle.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot {
    pub sweep: usize,
    /// Snapshot index within the sweep.
    pub index: usize,
    /// Pointing angle, rad.
    pub theta_i: f64,
    /// Absolute slow time, seconds.
    pub tau: f64,
}

/// Ordered acquisition schedule: `n_sweeps` passes over the sweep codebook.
#[derive(Debug, Clone)]
pub struct SweepSchedule {
    pub snapshots: Vec<Snapshot>,
    pub dwell: f64,
    /// Duration of one sweep, T = |codebook| * dwell.
    pub sweep_duration: f64,
    pub n_sweeps: usize,
    pub snapshots_per_sweep: usize,
}

impl SweepSchedule {
    pub fn new(codebook: &SweepCodebook, n_sweeps: usize) -> Self {
        let t = codebook.sweep_duration();
        let mut snapshots = Vec::with_capacity(n_sweeps * codebook.len());
        for sweep in 0..n_sweeps {
            for (index, theta_i) in codebook.grid.angles().enumerate() {
                snapshots.push(Snapshot {
                    sweep,
                    index,
                    theta_i,
                    tau: sweep as f64 * t + index as f64 * codebook.dwell,
                });
            }
        }
        Self {
            snapshots,
            dwell: codebook.dwell,
            sweep_duration: t,
            n_sweeps,
            snapshots_per_sweep: codebook.len(),
        }
    }

    /// Schedule restricted to one sweep (sweep indices are preserved).
    pub fn sweep(&self, sweep: usize) -> Self {
        Self {
            snapshots: self
                .snapshots
                .iter()
                .copied()
                .filter(|s| s.sweep == sweep)
                .collect(),
            dwell: self.dwell,
            sweep_duration: self.sweep_duration,
            n_sweeps: 1,
            snapshots_per_sweep: self.snapshots_per_sweep,
        }
    }
}

/// Unit-peak matched-filter pulse: sinc(B dt) = sin(pi B dt)/(pi B dt).
pub fn matched_pulse(dt: f64, bandwidth: f64) -> f64 {
    let x = std::f64::consts::PI * bandwidth * dt;
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Free-space two-hop amplitude with reflectivity and transmit scale.
pub fn radiometric_amplitude(
    reflectivity: Complex64,
    d_i: f64,
    d_o: f64,
    lambda0: f64,
    tx_scale: f64,
) -> Complex64 {
    let four_pi = 4.0 * std::f64::consts::PI;
    let h_i = (lambda0 / (four_pi * d_i)).powi(2);
    let h_o = (lambda0 / (four_pi * d_o)).powi(2);
    reflectivity * (tx_scale * h_i * h_o)
}

/// Constant-gradient run of illuminated elements, ready for the closed-form
/// array sum. Element m of the run carries phase
/// `grad_d * (m - center_index)`, i.e. `ref_phase + grad_d * m`.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub first: i64,
    pub last: i64,
    /// Phase step between adjacent elements, rad.
    pub grad_d: f64,
    /// Phase at (virtual) element 0, rad.
    pub ref_phase: f64,
}

/// Per-snapshot geometry and plane state needed to evaluate the array sum
/// for any reflection direction. Shared by the forward model and the
/// back-projection matched filter so both sides see bit-identical sums.
#[derive(Debug, Clone)]
pub struct SnapshotKernel {
    pub theta_i: f64,
    pub tau: f64,
    pub sin_in: f64,
    /// Beam-centre incidence point x coordinate.
    pub p_x: f64,
    /// Source to beam-centre distance.
    pub d_i: f64,
    pub span: ElementSpan,
    pub segments: Vec<Segment>,
    /// 2 pi d / lambda0.
    pub k_d: f64,
}

impl SnapshotKernel {
    pub fn new(scene: &Scene, plan: &PhasePlan, snapshot: &Snapshot) -> Result<Self> {
        let theta_i = snapshot.theta_i;
        let bw = scene.beamwidth(theta_i);
        let span = scene.illuminated_set(theta_i, bw)?;
        let p = scene.incidence_point(theta_i)?;
        let d_i = scene.source_to_plane_distance(theta_i)?;
        let lambda0 = plan.lambda0;
        let d = scene.plane.spacing;
        let mut segments = Vec::new();
        if !span.is_empty() {
            for state in plan.module_states(snapshot.tau) {
                let module = &plan.layout.modules[state.module_index];
                let first = module.first.max(span.first);
                let last = module.last.min(span.last);
                if first > last {
                    continue;
                }
                // phi_m = slope * (x_m - center) = slope*d*(m - c) with
                // c the module-centre position in element units.
                let c = (module.center_x - scene.plane.offset) / d;
                segments.push(Segment {
                    first,
                    last,
                    grad_d: state.slope * d,
                    ref_phase: -state.slope * d * c,
                });
            }
        }
        Ok(Self {
            theta_i,
            tau: snapshot.tau,
            sin_in: theta_i.sin(),
            p_x: p.0,
            d_i,
            span,
            segments,
            k_d: TWO_PI * d / lambda0,
        })
    }

    /// Array sum S for a reflection direction with sine `sin_out`.
    pub fn array_sum(&self, sin_out: f64) -> Complex64 {
        let gamma = self.k_d * (self.sin_in - sin_out);
        let mut acc = Complex64::new(0.0, 0.0);
        for seg in &self.segments {
            acc += segment_sum(seg, gamma);
        }
        acc
    }

    /// Geometry of a scatterer at `r` as seen from the beam centre:
    /// (distance, sin of the required reflection angle).
    pub fn target_geometry(&self, r: (f64, f64)) -> (f64, f64) {
        let dx = r.0 - self.p_x;
        let d_o = (dx * dx + r.1 * r.1).sqrt();
        (d_o, dx / d_o)
    }
}

/// Closed-form sum of exp(j (ref_phase + grad_d*m - gamma*m)) over the run;
/// falls back to the direct sum near the Dirichlet singularities.
fn segment_sum(seg: &Segment, gamma: f64) -> Complex64 {
    let psi = seg.grad_d - gamma;
    let n = (seg.last - seg.first + 1) as f64;
    let half = 0.5 * psi;
    let denom = half.sin();
    let mid_phase = seg.ref_phase + 0.5 * (seg.first + seg.last) as f64 * psi;
    if denom.abs() < 1e-9 {
        if half.abs() < 1e-6 {
            // psi ~ 0: every term is in phase.
            return Complex64::from_polar(n, mid_phase);
        }
        // psi near a 2 pi multiple: sum directly.
        let mut acc = Complex64::new(0.0, 0.0);
        for m in seg.first..=seg.last {
            acc += Complex64::from_polar(1.0, seg.ref_phase + psi * m as f64);
        }
        return acc;
    }
    let ratio = (n * half).sin() / denom;
    Complex64::from_polar(1.0, mid_phase) * ratio
}

/// Echo of one target at one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct TargetEcho {
    pub amplitude: Complex64,
    /// Two-way delay, seconds.
    pub delay: f64,
}

/// Per-target echoes for a snapshot, from explicit element phases. The
/// element sum is evaluated directly; this is the reference path, also used
/// to cross-check the factorised kernel.
pub fn snapshot_echo(
    scene: &Scene,
    theta_i: f64,
    phases: &[f64],
    span: ElementSpan,
    targets: &[Target],
    tx_scale: f64,
) -> Result<Vec<TargetEcho>> {
    if span.is_empty() {
        return Err(Error::Geometry("illuminated set is empty".into()));
    }
    let lambda0 = scene.wavelength();
    let p = scene.incidence_point(theta_i)?;
    let d_i = scene.source_to_plane_distance(theta_i)?;
    let k_d = TWO_PI * scene.plane.spacing / lambda0;
    let (n_min, _) = scene.plane.index_range();
    let mut echoes = Vec::with_capacity(targets.len());
    for target in targets {
        let theta_o = required_reflection_angle(p, target.position)?;
        let d_o = {
            let dx = target.position.0 - p.0;
            (dx * dx + target.position.1 * target.position.1).sqrt()
        };
        let u = theta_i.sin() - theta_o.sin();
        let mut s = Complex64::new(0.0, 0.0);
        for m in span.iter() {
            let phi = phases[(m - n_min) as usize];
            s += Complex64::from_polar(1.0, phi - k_d * m as f64 * u);
        }
        let alpha = radiometric_amplitude(target.reflectivity, d_i, d_o, lambda0, tx_scale);
        let carrier = Complex64::from_polar(1.0, -2.0 * TWO_PI / lambda0 * (d_i + d_o));
        echoes.push(TargetEcho {
            amplitude: alpha * carrier * s * s,
            delay: 2.0 * (d_i + d_o) / SPEED_OF_LIGHT,
        });
    }
    Ok(echoes)
}

/// Per-target echoes for a snapshot using the factorised kernel (identical
/// results to [`snapshot_echo`], closed-form per module).
pub fn snapshot_echo_from_kernel(
    kernel: &SnapshotKernel,
    targets: &[Target],
    lambda0: f64,
    tx_scale: f64,
) -> Vec<TargetEcho> {
    let mut echoes = Vec::with_capacity(targets.len());
    for target in targets {
        let (d_o, sin_out) = kernel.target_geometry(target.position);
        let s = kernel.array_sum(sin_out);
        let alpha = radiometric_amplitude(target.reflectivity, kernel.d_i, d_o, lambda0, tx_scale);
        let carrier = Complex64::from_polar(1.0, -2.0 * TWO_PI / lambda0 * (kernel.d_i + d_o));
        echoes.push(TargetEcho {
            amplitude: alpha * carrier * s * s,
            delay: 2.0 * (kernel.d_i + d_o) / SPEED_OF_LIGHT,
        });
    }
    echoes
}

/// Fast-time sample grid of a sampled acquisition.
#[derive(Debug, Clone)]
pub struct SampledCube {
    /// Window start, seconds.
    pub t_start: f64,
    /// Sample rate, Hz.
    pub sample_rate: f64,
    pub n_samples: usize,
    /// Snapshot-major samples: snapshot i occupies
    /// `[i*n_samples, (i+1)*n_samples)`.
    pub samples: Vec<Complex64>,
}

impl SampledCube {
    pub fn sample(&self, snapshot: usize, k: usize) -> Complex64 {
        self.samples[snapshot * self.n_samples + k]
    }

    /// Linear interpolation at query time `t`; `None` outside the window.
    pub fn interpolate(&self, snapshot: usize, t: f64) -> Option<Complex64> {
        let pos = (t - self.t_start) * self.sample_rate;
        if pos < 0.0 || pos > (self.n_samples - 1) as f64 {
            return None;
        }
        let k = (pos.floor() as usize).min(self.n_samples - 2);
        let frac = pos - k as f64;
        let a = self.sample(snapshot, k);
        let b = self.sample(snapshot, k + 1);
        Some(a * (1.0 - frac) + b * frac)
    }
}

/// Received echoes over a schedule. The per-target analytic tuples are the
/// reference representation; the sampled grid (when rendered) adds pulse
/// shaping and noise on top of the same tuples.
#[derive(Debug, Clone)]
pub struct EchoCube {
    /// Per snapshot (schedule order), per target.
    pub analytic: Vec<Vec<TargetEcho>>,
    pub sampled: Option<SampledCube>,
    /// Noise power per sample, watts (0 for noiseless).
    pub sigma_w2: f64,
    pub seed: u64,
}

impl EchoCube {
    pub fn n_snapshots(&self) -> usize {
        self.analytic.len()
    }
}

/// Acquisition settings beyond the geometry.
#[derive(Debug, Clone)]
pub struct AcquisitionConfig {
    pub tx_scale: f64,
    /// Render a fast-time sample grid in addition to the analytic tuples.
    pub sampled: bool,
    /// Sample rate as a multiple of the bandwidth.
    pub oversample: f64,
    /// Noise power per sample, watts; requires `sampled`.
    pub sigma_w2: f64,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            tx_scale: 1.0,
            sampled: false,
            oversample: 8.0,
            sigma_w2: 0.0,
            seed: 0,
        }
    }
}

/// Simulate the full acquisition. Snapshots are independent work units; the
/// noise generator is keyed by (seed, sweep, snapshot, sample), so the
/// result is bit-identical for any thread count or schedule order.
pub fn simulate_acquisition(
    scene: &Scene,
    schedule: &SweepSchedule,
    plan: &PhasePlan,
    targets: &[Target],
    cfg: &AcquisitionConfig,
) -> Result<EchoCube> {
    if cfg.sigma_w2 > 0.0 && !cfg.sampled {
        return Err(Error::ConfigValue(
            "noise requires the sampled echo mode".into(),
        ));
    }
    if cfg.sigma_w2 < 0.0 {
        return Err(Error::ConfigValue("noise power must be >= 0".into()));
    }
    let lambda0 = scene.wavelength();

    // Fast-time window: all ROI-corner delays over the schedule plus a 4/B
    // guard on each side. Resolved before any rendering so a misconfigured
    // window fails early.
    let window = if cfg.sampled {
        Some(sample_window(scene, schedule)?)
    } else {
        None
    };

    let kernels: Vec<SnapshotKernel> = schedule
        .snapshots
        .iter()
        .map(|snap| SnapshotKernel::new(scene, plan, snap))
        .collect::<Result<_>>()?;

    let analytic: Vec<Vec<TargetEcho>> = kernels
        .par_iter()
        .map(|kernel| snapshot_echo_from_kernel(kernel, targets, lambda0, cfg.tx_scale))
        .collect();

    let sampled = match window {
        None => None,
        Some((t_start, t_end)) => {
            let sample_rate = cfg.oversample * scene.bandwidth;
            let n_samples = ((t_end - t_start) * sample_rate).ceil() as usize + 1;
            let bandwidth = scene.bandwidth;
            let samples: Vec<Complex64> = schedule
                .snapshots
                .par_iter()
                .zip(analytic.par_iter())
                .flat_map_iter(|(snap, echoes)| {
                    let seed = cfg.seed;
                    let sigma = cfg.sigma_w2;
                    (0..n_samples).map(move |k| {
                        let t = t_start + k as f64 / sample_rate;
                        let mut y = Complex64::new(0.0, 0.0);
                        for echo in echoes {
                            y += echo.amplitude * matched_pulse(t - echo.delay, bandwidth);
                        }
                        if sigma > 0.0 {
                            y += noise_sample(
                                seed,
                                snap.sweep as u64,
                                snap.index as u64,
                                k as u64,
                                sigma,
                            );
                        }
                        y
                    })
                })
                .collect();
            Some(SampledCube {
                t_start,
                sample_rate,
                n_samples,
                samples,
            })
        }
    };

    Ok(EchoCube {
        analytic,
        sampled,
        sigma_w2: cfg.sigma_w2,
        seed: cfg.seed,
    })
}

/// Fast-time window covering all ROI-corner delays with a 4/B guard.
fn sample_window(scene: &Scene, schedule: &SweepSchedule) -> Result<(f64, f64)> {
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for snap in &schedule.snapshots {
        let p = scene.incidence_point(snap.theta_i)?;
        let d_i = scene.source_to_plane_distance(snap.theta_i)?;
        for corner in scene.roi.corners() {
            let dx = corner.0 - p.0;
            let d_o = (dx * dx + corner.1 * corner.1).sqrt();
            let t = 2.0 * (d_i + d_o) / SPEED_OF_LIGHT;
            t_min = t_min.min(t);
            t_max = t_max.max(t);
        }
    }
    if !(t_min.is_finite() && t_max.is_finite()) || t_max < t_min {
        return Err(Error::CubeMismatch("empty fast-time window".into()));
    }
    let guard = 4.0 / scene.bandwidth;
    Ok((t_min - guard, t_max + guard))
}

/// Worst residual propagation delay across the illuminated aperture relative
/// to the pulse duration: M(tau)*d*max(|sin in|, |sin out|)/c versus 0.1/B.
/// Returns the worst ratio (> 1 violates the spatial narrowband condition).
pub fn narrowband_ratio(
    scene: &Scene,
    schedule: &SweepSchedule,
    max_abs_sin_out: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for snap in &schedule.snapshots {
        let bw = scene.beamwidth(snap.theta_i);
        let span = scene.illuminated_set(snap.theta_i, bw)?;
        if span.is_empty() {
            continue;
        }
        let extent = span.len() as f64 * scene.plane.spacing;
        let s = snap.theta_i.sin().abs().max(max_abs_sin_out);
        let residual = extent * s / SPEED_OF_LIGHT;
        worst = worst.max(residual / (0.1 / scene.bandwidth));
    }
    Ok(worst)
}

/// Circular complex Gaussian noise sample with total variance `sigma_w2`,
/// deterministically derived from (seed, sweep, snapshot, sample).
pub fn noise_sample(seed: u64, sweep: u64, snapshot: u64, sample: u64, sigma_w2: f64) -> Complex64 {
    let mut s = splitmix64(seed ^ 0x517c_c1b7_2722_0a95);
    s = splitmix64(s ^ sweep);
    s = splitmix64(s ^ snapshot);
    s = splitmix64(s ^ sample);
    let u1 = to_unit_open(splitmix64(s));
    let u2 = to_unit_open(splitmix64(s.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    let r = (-sigma_w2 * u1.ln()).sqrt();
    Complex64::from_polar(r, TWO_PI * u2)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Map to (0, 1]: never 0, so ln() stays finite.
fn to_unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{ReflectionCodebook, SweepCodebook};
    use crate::metasurface::{ModuleLayout, PhaseLaw, PhasePlan};
    use crate::scene::{PlaneGeometry, Roi};

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    fn small_scene() -> Scene {
        let lambda0 = SPEED_OF_LIGHT / 28.0e9;
        Scene {
            source_height: 5.0,
            plane: PlaneGeometry {
                element_count: 300,
                spacing: lambda0 / 2.0,
                offset: 5.0 * deg(30.0).tan(),
            },
            roi: Roi {
                center: (9.5, -14.0),
                extent: (1.0, 1.0),
            },
            carrier_freq: 28.0e9,
            bandwidth: 400.0e6,
            bs_aperture: 53.0 * lambda0 / 2.0,
        }
    }

    fn small_plan(scene: &Scene) -> PhasePlan {
        let codebook = ReflectionCodebook::with_count(deg(25.28), deg(29.57), 15).unwrap();
        let law = PhaseLaw {
            theta_i_center: deg(30.0),
            theta_o_center: deg(25.28),
            theta_o_width: deg(29.57),
            lambda_x: 2.339,
            lambda_tau: Some(0.15),
            x_ref: scene.plane.offset,
            spatial_phase: 0.0,
            codebook,
        };
        PhasePlan::new(
            law,
            ModuleLayout::new(&scene.plane, 15),
            scene.wavelength(),
            0.01,
        )
    }

    fn schedule(scene: &Scene, n_sweeps: usize) -> SweepSchedule {
        let _ = scene;
        let cb = SweepCodebook::new(deg(30.0), deg(10.0), deg(0.5), 0.01 / 21.0).unwrap();
        SweepSchedule::new(&cb, n_sweeps)
    }

    #[test]
    fn matched_pulse_examples() {
        let b = 400.0e6;
        assert_eq!(matched_pulse(0.0, b), 1.0);
        for k in 1..=5 {
            assert!(matched_pulse(k as f64 / b, b).abs() < 1e-12);
        }
        let v = matched_pulse(0.5 / b, b);
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn schedule_counts_and_times() {
        let s = small_scene();
        let sched = schedule(&s, 3);
        assert_eq!(sched.snapshots.len(), 3 * 21);
        // Strictly increasing absolute time.
        for w in sched.snapshots.windows(2) {
            assert!(w[1].tau > w[0].tau);
        }
        let one = sched.sweep(1);
        assert_eq!(one.snapshots.len(), 21);
        assert!(one.snapshots.iter().all(|s| s.sweep == 1));
    }

    #[test]
    fn kernel_matches_elementwise_sum() {
        let scene = small_scene();
        let plan = small_plan(&scene);
        let sched = schedule(&scene, 2);
        for snap in sched.snapshots.iter().step_by(7) {
            let kernel = SnapshotKernel::new(&scene, &plan, snap).unwrap();
            let phases = plan.element_phases(snap.tau);
            let (n_min, _) = scene.plane.index_range();
            for sin_out in [-0.3, 0.0, 0.42, 0.7] {
                let fast = kernel.array_sum(sin_out);
                let mut slow = Complex64::new(0.0, 0.0);
                let gamma = kernel.k_d * (kernel.sin_in - sin_out);
                for m in kernel.span.iter() {
                    let phi = phases[(m - n_min) as usize];
                    slow += Complex64::from_polar(1.0, phi - gamma * m as f64);
                }
                assert!(
                    (fast - slow).norm() <= 1e-9 * slow.norm().max(1.0),
                    "sin_out {sin_out}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn factorization_matches_double_sum() {
        // Brute-force double sum over (m, m') equals S^2 for random runs of
        // phases (|M| <= 64).
        let mut state = 42u64;
        let mut rand01 = move || {
            state = splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..50 {
            let count = 2 + (rand01() * 62.0) as i64;
            let first = -40 + (rand01() * 80.0) as i64;
            let span = ElementSpan {
                first,
                last: first + count - 1,
            };
            let phases: Vec<f64> = (0..count).map(|_| rand01() * TWO_PI).collect();
            let gamma = (rand01() - 0.5) * 2.0 * std::f64::consts::PI;
            let mut s = Complex64::new(0.0, 0.0);
            for (i, m) in span.iter().enumerate() {
                s += Complex64::from_polar(1.0, phases[i] - gamma * m as f64);
            }
            let mut double = Complex64::new(0.0, 0.0);
            for (i, m) in span.iter().enumerate() {
                for (i2, m2) in span.iter().enumerate() {
                    double += Complex64::from_polar(
                        1.0,
                        phases[i] + phases[i2] - gamma * (m + m2) as f64,
                    );
                }
            }
            let s2 = s * s;
            let rel = (double - s2).norm() / s2.norm().max(1e-6);
            assert!(rel < 1e-12, "case {case}: rel {rel}");
        }
    }

    #[test]
    fn single_element_echo_is_bare_carrier() {
        // One illuminated element with zero phase at the module centre:
        // amplitude reduces to alpha * exp(-j 4 pi (D_i + D_o)/lambda0).
        let mut scene = small_scene();
        scene.plane.element_count = 2; // elements 0 and 1
        let targets = [Target {
            position: (9.5, -14.0),
            reflectivity: Complex64::new(1.0, 0.0),
        }];
        // Aim the beam exactly at element 0 with a vanishing footprint.
        let theta_at_0 = (scene.plane.element_x(0) / scene.source_height).atan();
        let span = ElementSpan { first: 0, last: 0 };
        let phases = vec![0.0, 0.0];
        let echoes = snapshot_echo(&scene, theta_at_0, &phases, span, &targets, 1.0).unwrap();
        let lambda0 = scene.wavelength();
        let d_i = scene.source_to_plane_distance(theta_at_0).unwrap();
        let p = scene.incidence_point(theta_at_0).unwrap();
        let dx = 9.5 - p.0;
        let d_o = (dx * dx + 196.0).sqrt();
        let alpha = radiometric_amplitude(Complex64::new(1.0, 0.0), d_i, d_o, lambda0, 1.0);
        let want =
            alpha * Complex64::from_polar(1.0, -4.0 * std::f64::consts::PI / lambda0 * (d_i + d_o));
        assert!((echoes[0].amplitude - want).norm() < 1e-12 * want.norm());
        assert!((echoes[0].delay - 2.0 * (d_i + d_o) / SPEED_OF_LIGHT).abs() < 1e-18);
    }

    #[test]
    fn destructive_pair_cancels() {
        let mut scene = small_scene();
        scene.plane.element_count = 2;
        scene.plane.offset = 0.0;
        // Target straight below the pair midpoint => theta_o == theta_i == 0
        // at broadside, and a pi phase offset between the two elements kills
        // the sum. Element positions are 0 and d, so aim at their midpoint.
        let targets = [Target {
            position: (scene.plane.spacing / 2.0, -10.0),
            reflectivity: Complex64::new(1.0, 0.0),
        }];
        let theta = (scene.plane.spacing / 2.0 / scene.source_height).atan();
        let span = ElementSpan { first: 0, last: 1 };
        let echoes = snapshot_echo(
            &scene,
            theta,
            &[0.0, std::f64::consts::PI],
            span,
            &targets,
            1.0,
        )
        .unwrap();
        assert!(echoes[0].amplitude.norm() < 1e-20);
    }

    #[test]
    fn zero_targets_zero_contributions() {
        let scene = small_scene();
        let plan = small_plan(&scene);
        let sched = schedule(&scene, 1);
        let cube = simulate_acquisition(&scene, &sched, &plan, &[], &AcquisitionConfig::default())
            .unwrap();
        assert!(cube.analytic.iter().all(|e| e.is_empty()));
    }

    #[test]
    fn echo_linearity_in_targets() {
        let scene = small_scene();
        let plan = small_plan(&scene);
        let sched = schedule(&scene, 1);
        let t1 = Target {
            position: (9.3, -13.8),
            reflectivity: Complex64::new(1.0, 0.0),
        };
        let t2 = Target {
            position: (9.7, -14.2),
            reflectivity: Complex64::new(0.0, 2.0),
        };
        let cfg = AcquisitionConfig::default();
        let both =
            simulate_acquisition(&scene, &sched, &plan, &[t1.clone(), t2.clone()], &cfg).unwrap();
        let one = simulate_acquisition(&scene, &sched, &plan, &[t1], &cfg).unwrap();
        let two = simulate_acquisition(&scene, &sched, &plan, &[t2], &cfg).unwrap();
        for i in 0..both.analytic.len() {
            let sum = one.analytic[i][0].amplitude + two.analytic[i][0].amplitude;
            let direct = both.analytic[i][0].amplitude + both.analytic[i][1].amplitude;
            assert!((sum - direct).norm() <= 1e-12 * sum.norm().max(1e-30));
        }
    }

    #[test]
    fn sampled_matches_analytic_when_noiseless() {
        let scene = small_scene();
        let plan = small_plan(&scene);
        let sched = schedule(&scene, 1);
        let targets = [Target {
            position: (9.5, -14.0),
            reflectivity: Complex64::new(1.0, 0.0),
        }];
        let cfg = AcquisitionConfig {
            sampled: true,
            ..Default::default()
        };
        let cube = simulate_acquisition(&scene, &sched, &plan, &targets, &cfg).unwrap();
        let sampled = cube.sampled.as_ref().unwrap();
        for (i, echoes) in cube.analytic.iter().enumerate() {
            for k in (0..sampled.n_samples).step_by(17) {
                let t = sampled.t_start + k as f64 / sampled.sample_rate;
                let mut want = Complex64::new(0.0, 0.0);
                for e in echoes {
                    want += e.amplitude * matched_pulse(t - e.delay, scene.bandwidth);
                }
                let got = sampled.sample(i, k);
                assert!((got - want).norm() <= 1e-15 * want.norm().max(1e-30));
            }
        }
        // Window covers every echo delay with the 4/B guard.
        let t_end = sampled.t_start + (sampled.n_samples - 1) as f64 / sampled.sample_rate;
        for echoes in &cube.analytic {
            for e in echoes {
                assert!(e.delay >= sampled.t_start && e.delay <= t_end);
            }
        }
    }

    #[test]
    fn noise_is_reproducible_and_calibrated() {
        let a = noise_sample(7, 3, 11, 1234, 2.5);
        let b = noise_sample(7, 3, 11, 1234, 2.5);
        assert_eq!(a, b);
        let c = noise_sample(8, 3, 11, 1234, 2.5);
        assert!(a != c);
        // Mean ~ 0 and E|w|^2 ~ sigma^2 over a large draw.
        let sigma2 = 2.5;
        let n = 200_000u64;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = 0.0;
        for i in 0..n {
            let w = noise_sample(1, 0, 0, i, sigma2);
            sum += w;
            pow += w.norm_sqr();
        }
        let mean = sum / n as f64;
        let avg_pow = pow / n as f64;
        assert!(mean.norm() < 0.02, "mean {mean}");
        assert!((avg_pow / sigma2 - 1.0).abs() < 0.02, "power {avg_pow}");
    }

    #[test]
    fn identical_seeds_identical_cubes() {
        let scene = small_scene();
        let plan = small_plan(&scene);
        let sched = schedule(&scene, 1);
        let targets = [Target {
            position: (9.5, -14.0),
            reflectivity: Complex64::new(1.0, 0.0),
        }];
        let cfg = AcquisitionConfig {
            sampled: true,
            sigma_w2: 1e-20,
            seed: 9,
            ..Default::default()
        };
        let a = simulate_acquisition(&scene, &sched, &plan, &targets, &cfg).unwrap();
        let b = simulate_acquisition(&scene, &sched, &plan, &targets, &cfg).unwrap();
        assert_eq!(
            a.sampled.as_ref().unwrap().samples,
            b.sampled.as_ref().unwrap().samples
        );
    }

    #[test]
    fn noise_without_sampling_is_rejected() {
        let scene = small_scene();
        let plan = small_plan(&scene);
        let sched = schedule(&scene, 1);
        let cfg = AcquisitionConfig {
            sigma_w2: 1e-12,
            ..Default::default()
        };
        assert!(simulate_acquisition(&scene, &sched, &plan, &[], &cfg).is_err());
    }

    #[test]
    fn narrowband_audit_flags_reference_setup() {
        // The reference geometry mildly violates the narrowband condition
        // (residual aperture delay ~ 0.25 of the 0.1/B budget threshold).
        let scene = small_scene();
        let sched = schedule(&scene, 1);
        let ratio = narrowband_ratio(&scene, &sched, deg(40.0).sin()).unwrap();
        assert!(ratio > 1.0 && ratio < 10.0, "ratio {ratio}");
    }

    #[test]
    fn noiseless_peak_equals_alpha_s2() {
        // Single target, delay aligned with the sample grid: the peak sample
        // magnitude equals |alpha| |S|^2.
        let scene = small_scene();
        let plan = small_plan(&scene);
        let cb = SweepCodebook::new(deg(30.0), 0.0, 0.0, 0.01).unwrap();
        let sched = SweepSchedule::new(&cb, 1);
        let targets = [Target {
            position: (9.5, -14.0),
            reflectivity: Complex64::new(1.0, 0.0),
        }];
        let cfg = AcquisitionConfig {
            sampled: true,
            oversample: 16.0,
            ..Default::default()
        };
        let cube = simulate_acquisition(&scene, &sched, &plan, &targets, &cfg).unwrap();
        let sampled = cube.sampled.as_ref().unwrap();
        let echo = cube.analytic[0][0];
        let at_delay = {
            // Evaluate the rendering at the exact delay.
            let mut y = Complex64::new(0.0, 0.0);
            y += echo.amplitude * matched_pulse(0.0, scene.bandwidth);
            y
        };
        assert!((at_delay.norm() - echo.amplitude.norm()).abs() <= 1e-9 * echo.amplitude.norm());
        let peak = (0..sampled.n_samples)
            .map(|k| sampled.sample(0, k).norm())
            .fold(0.0f64, f64::max);
        assert!(peak <= echo.amplitude.norm() * (1.0 + 1e-9));
        assert!(peak >= echo.amplitude.norm() * 0.98);
    }
}
