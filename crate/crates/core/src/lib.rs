//! Simulation of NLOS radar imaging through a large reflection plane that is
//! phase-configured in space and time.
//!
//! A base station sweeps a narrow beam over a passive metasurface deployed
//! along the x axis. The surface is partitioned into constant-gradient
//! modules whose reflection angles follow a periodic space-time law, so that
//! every point of a region of interest behind the corner is observed from
//! many distinct spots on the plane. Coherent back-projection of the swept
//! echoes then reaches the cross-range resolution of the whole illuminated
//! aperture instead of the (much smaller) base-station array.
//!
//! The crate is organised along the processing chain:
//!
//! - [`scene`]: geometry of source, plane, region of interest and targets
//! - [`design`]: sweep/reflection codebooks and their sampling bounds
//! - [`metasurface`]: space-time reflection law and per-element phase plans
//! - [`forward`]: echo synthesis (analytic and sampled, with seeded noise)
//! - [`imaging`]: back-projection, sweep accumulation and image metrics
//! - [`config`] / [`pipeline`] / [`export`]: run configuration, orchestration
//!   and artifact output for the `nlos-sim` binary

pub mod config;
pub mod design;
pub mod error;
pub mod export;
pub mod forward;
pub mod imaging;
pub mod metasurface;
pub mod pipeline;
pub mod scene;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
