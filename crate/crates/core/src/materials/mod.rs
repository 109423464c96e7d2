//! Angle- and frequency-resolved reflection data for surface materials.

mod kernel;
mod library;
mod parametric;
mod profile;

pub use kernel::{observation_for_deviation, ReradiationKernel};
pub use library::{MaterialLibrary, DEFAULT_MATERIALS_TOML, DEFAULT_MATERIAL_NAMES};
pub use parametric::{parametric_profile, LobeAnchor, ParametricLobe};
pub use profile::{
    energy_fraction, load_profile, load_profile_path, MaterialProfile, ProfileKind, MATERIAL_CSV_HEADER,
};
