//! Deterministic indoor terahertz propagation simulator.
//!
//! Surfaces of a furnished room are tessellated into small patches that
//! re-radiate according to measured or parametric material responses. From
//! the traced paths the crate builds power delay profiles, link budgets and
//! SNR/capacity coverage maps.
//!
//! ```no_run
//! use terasim::analysis::{laptop_link, LinkMode};
//! use terasim::config::Scenario;
//!
//! let scenario = Scenario::preset("ieee")?;
//! let link = laptop_link(&scenario, LinkMode::Los)?;
//! println!("{:.1} Gbit/s", link.capacity_bps / 1e9);
//! # Ok::<(), terasim::Error>(())
//! ```

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod materials;
pub mod propagation;
pub mod raytracer;
pub mod scene;

pub use error::{Error, Result};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
