//! Artifact serialization: image CSV/PGM, metrics and design-report JSON,
//! phase-plan CSV, the echo-cube binary layout, and atomic file writes.
//!
//! Echo cube layout (little-endian):
//!
//! | offset | type      | field                         |
//! |--------|-----------|-------------------------------|
//! | 0      | [u8; 8]   | magic "NLOSCUBE"              |
//! | 8      | u32       | version (1)                   |
//! | 12     | u32       | snapshot count                |
//! | 16     | u32       | samples per snapshot          |
//! | 20     | u32       | reserved (0)                  |
//! | 24     | f64       | sample rate, Hz               |
//! | 32     | f64       | window start, s               |
//! | 40     | f64       | noise power per sample, W     |
//! | 48     | u64       | seed                          |
//! | 56     | f64 pairs | re/im samples, snapshot-major |

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{EchoCube, SampledCube, SweepSchedule};
use crate::imaging::{ComplexImage, ImageMetrics};
use crate::metasurface::PhasePlan;

const CUBE_MAGIC: &[u8; 8] = b"NLOSCUBE";
const CUBE_VERSION: u32 = 1;
/// Floor applied to normalized dB values so CSV stays finite.
const DB_FLOOR: f64 = -400.0;

/// Write a file atomically: the content lands under a temporary name in the
/// same directory and is renamed into place, so the target is either fully
/// written or absent.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = PathBuf::from(dir);
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "artifact".into());
    tmp.push(format!(".{stem}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Image magnitude in dB normalized to the peak, one CSV row per grid row
/// (y ascending), columns x ascending. Values are floored at -400 dB.
pub fn image_db_csv(image: &ComplexImage) -> String {
    let peak = image
        .data
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut out = String::with_capacity(image.data.len() * 12);
    for j in 0..image.grid.ny {
        for i in 0..image.grid.nx {
            if i > 0 {
                out.push(',');
            }
            let db = 20.0 * (image.at(i, j).norm() / peak).log10();
            let db = if db.is_finite() {
                db.max(DB_FLOOR)
            } else {
                DB_FLOOR
            };
            out.push_str(&format!("{db:.6}"));
        }
        out.push('\n');
    }
    out
}

/// 8-bit binary PGM heatmap with a 40 dB display range; values below -40 dB
/// clip to black. Row 0 is the top of the picture (largest y).
pub fn image_pgm(image: &ComplexImage) -> Vec<u8> {
    let peak = image
        .data
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut out = format!("P5\n{} {}\n255\n", image.grid.nx, image.grid.ny).into_bytes();
    for j in (0..image.grid.ny).rev() {
        for i in 0..image.grid.nx {
            let db = 20.0 * (image.at(i, j).norm() / peak).log10();
            let level = (255.0 * (1.0 + db / 40.0)).round().clamp(0.0, 255.0);
            out.push(level as u8);
        }
    }
    out
}

/// metrics.json payload. A missing sidelobe (-inf PSLR) serializes as null.
pub fn metrics_json(metrics: &ImageMetrics, image: &ComplexImage) -> serde_json::Value {
    serde_json::json!({
        "peak_x_m": metrics.peak_position.0,
        "peak_y_m": metrics.peak_position.1,
        "peak_magnitude": metrics.peak_magnitude,
        "width_x_m": metrics.width_x,
        "width_y_m": metrics.width_y,
        "pslr_db": if metrics.pslr_db.is_finite() { Some(metrics.pslr_db) } else { None },
        "sweeps_used": image.sweeps_used,
        "seed": image.seed,
        "out_of_window_queries": image.out_of_window,
    })
}

/// phase_plan.csv: one row per (sweep, snapshot, element).
pub fn plan_csv(plan: &PhasePlan, schedule: &SweepSchedule) -> String {
    let (n_min, _) = plan.layout.plane.index_range();
    let mut out = String::from("sweep,snapshot,element,phase_rad\n");
    for snap in &schedule.snapshots {
        let phases = plan.element_phases(snap.tau);
        for (k, phi) in phases.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.9}\n",
                snap.sweep,
                snap.index,
                n_min + k as i64,
                phi
            ));
        }
    }
    out
}

/// Serialize a sampled echo cube to the flat binary layout.
pub fn cube_bytes(cube: &EchoCube) -> Result<Vec<u8>> {
    let sampled = cube
        .sampled
        .as_ref()
        .ok_or_else(|| Error::CubeMismatch("only sampled cubes serialize to binary".into()))?;
    let n_snapshots = cube.analytic.len();
    let mut out = Vec::with_capacity(56 + sampled.samples.len() * 16);
    out.extend_from_slice(CUBE_MAGIC);
    out.extend_from_slice(&CUBE_VERSION.to_le_bytes());
    out.extend_from_slice(&(n_snapshots as u32).to_le_bytes());
    out.extend_from_slice(&(sampled.n_samples as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&sampled.sample_rate.to_le_bytes());
    out.extend_from_slice(&sampled.t_start.to_le_bytes());
    out.extend_from_slice(&cube.sigma_w2.to_le_bytes());
    out.extend_from_slice(&cube.seed.to_le_bytes());
    for v in &sampled.samples {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

/// Parse the flat binary layout back into a sampled cube (the analytic
/// tuples are not stored; the result carries empty per-target lists).
pub fn cube_from_bytes(bytes: &[u8]) -> Result<EchoCube> {
    let bad = |m: &str| Error::CubeMismatch(m.into());
    if bytes.len() < 56 || &bytes[0..8] != CUBE_MAGIC {
        return Err(bad("missing cube magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != CUBE_VERSION {
        return Err(bad("unsupported cube version"));
    }
    let n_snapshots = u32_at(12) as usize;
    let n_samples = u32_at(16) as usize;
    let sample_rate = f64_at(24);
    let t_start = f64_at(32);
    let sigma_w2 = f64_at(40);
    let seed = u64::from_le_bytes(bytes[48..56].try_into().unwrap());
    let expected = 56 + n_snapshots * n_samples * 16;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "cube payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut samples = Vec::with_capacity(n_snapshots * n_samples);
    let mut o = 56;
    for _ in 0..n_snapshots * n_samples {
        samples.push(Complex64::new(f64_at(o), f64_at(o + 8)));
        o += 16;
    }
    Ok(EchoCube {
        analytic: vec![Vec::new(); n_snapshots],
        sampled: Some(SampledCube {
            t_start,
            sample_rate,
            n_samples,
            samples,
        }),
        sigma_w2,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::ImageGrid;

    fn tiny_image() -> ComplexImage {
        let grid = ImageGrid::covering((0.0, -5.0), (0.04, 0.04), 0.01).unwrap();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
        data[12] = Complex64::new(2.0, 0.0);
        data[0] = Complex64::new(0.2, 0.0);
        ComplexImage {
            grid,
            data,
            sweeps_used: 1,
            seed: 7,
            out_of_window: 0,
        }
    }

    #[test]
    fn csv_is_normalized_db() {
        let img = tiny_image();
        let csv = image_db_csv(&img);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), img.grid.ny);
        let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first.len(), img.grid.nx);
        assert!((first[0] - 20.0 * (0.1f64).log10()).abs() < 1e-6);
        // Peak cell reads exactly 0 dB.
        let flat: Vec<f64> = csv
            .split([',', '\n'])
            .filter(|s| !s.is_empty())
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(flat.iter().cloned().fold(f64::MIN, f64::max).abs() < 1e-9);
        assert!(flat.iter().all(|&v| v >= DB_FLOOR));
    }

    #[test]
    fn pgm_has_header_and_clipping() {
        let img = tiny_image();
        let pgm = image_pgm(&img);
        let header = format!("P5\n{} {}\n255\n", img.grid.nx, img.grid.ny);
        assert!(pgm.starts_with(header.as_bytes()));
        assert_eq!(pgm.len(), header.len() + img.grid.len());
        let body = &pgm[header.len()..];
        assert!(body.contains(&255u8)); // peak
        assert!(body.contains(&0u8)); // zeros clip to black
    }

    #[test]
    fn cube_roundtrip() {
        let sampled = SampledCube {
            t_start: 1.2e-7,
            sample_rate: 3.2e9,
            n_samples: 3,
            samples: vec![
                Complex64::new(1.0, -2.0),
                Complex64::new(0.5, 0.25),
                Complex64::new(-1.5, 3.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(4.0, 4.0),
                Complex64::new(-0.125, 2.5),
            ],
        };
        let cube = EchoCube {
            analytic: vec![Vec::new(), Vec::new()],
            sampled: Some(sampled),
            sigma_w2: 2e-12,
            seed: 99,
        };
        let bytes = cube_bytes(&cube).unwrap();
        let back = cube_from_bytes(&bytes).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.sigma_w2, 2e-12);
        let s = back.sampled.unwrap();
        assert_eq!(s.n_samples, 3);
        assert_eq!(s.samples, cube.sampled.as_ref().unwrap().samples);
        // Truncated payloads are rejected.
        assert!(cube_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        // No temp files left behind.
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
