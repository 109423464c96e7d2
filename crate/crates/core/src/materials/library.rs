use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use super::kernel::ReradiationKernel;
use super::parametric::{parametric_profile, LobeAnchor};
use super::profile::MaterialProfile;
use crate::error::{Error, Result};

/// Bundled parametric defaults.
pub const DEFAULT_MATERIALS_TOML: &str = include_str!("../../data/materials.toml");

pub const DEFAULT_MATERIAL_NAMES: [&str; 5] = ["aluminium", "glass", "plastic", "hardboard", "concrete"];

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialsFile {
    format_version: u32,
    angular_step_deg: f64,
    materials: Vec<MaterialEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    name: String,
    anchors: Vec<LobeAnchor>,
}

/// Named material responses together with their re-radiation kernels.
/// Cloning is cheap; kernels are shared.
#[derive(Debug, Clone, Default)]
pub struct MaterialLibrary {
    entries: BTreeMap<String, Arc<ReradiationKernel>>,
}

impl MaterialLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// The five bundled parametric materials.
    pub fn defaults() -> Result<Self> {
        Self::from_toml_str(DEFAULT_MATERIALS_TOML)
    }

    /// Parses a parametric materials file (same layout as the bundled one).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MaterialsFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("materials file: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "materials file: unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        let mut lib = MaterialLibrary::new();
        for entry in file.materials {
            if lib.contains(&entry.name) {
                return Err(Error::Config(format!(
                    "materials file: duplicate material `{}`",
                    entry.name
                )));
            }
            lib.insert(parametric_profile(&entry.name, &entry.anchors, file.angular_step_deg)?);
        }
        Ok(lib)
    }

    /// Adds or replaces a material under the profile's name.
    pub fn insert(&mut self, profile: MaterialProfile) {
        let name = profile.name().to_string();
        self.entries.insert(name, Arc::new(ReradiationKernel::new(profile)));
    }

    /// Adds every material of `other`, replacing same-named entries.
    pub fn extend(&mut self, other: MaterialLibrary) {
        self.entries.extend(other.entries);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn kernel(&self, name: &str) -> Result<&Arc<ReradiationKernel>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn profile(&self, name: &str) -> Result<&MaterialProfile> {
        self.kernel(name).map(|k| k.profile())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{energy_fraction, ProfileKind};

    #[test]
    fn defaults_contain_the_five_materials() {
        let lib = MaterialLibrary::defaults().unwrap();
        for name in DEFAULT_MATERIAL_NAMES {
            let p = lib.profile(name).unwrap();
            assert_eq!(p.kind(), ProfileKind::Parametric);
            let (lo, hi) = p.frequency_span_ghz();
            assert!(lo <= 100.0 && hi >= 3000.0, "{name}: {lo}..{hi}");
        }
        assert!(matches!(lib.profile("wood"), Err(Error::UnknownMaterial(_))));
    }

    #[test]
    fn rejects_wrong_version_and_duplicates() {
        let text = DEFAULT_MATERIALS_TOML.replace("format_version = 1", "format_version = 2");
        assert!(MaterialLibrary::from_toml_str(&text).is_err());
        let dup = format!(
            "{DEFAULT_MATERIALS_TOML}\n[[materials]]\nname = \"glass\"\nanchors = [{{ frequency_ghz = 100.0, specular_amplitude = 0.1, lobe_width_deg = 1.0, diffuse_floor = 0.0 }}]\n"
        );
        assert!(MaterialLibrary::from_toml_str(&dup).is_err());
    }

    #[test]
    fn aluminium_beats_concrete_at_specular() {
        let lib = MaterialLibrary::defaults().unwrap();
        let al = energy_fraction(lib.profile("aluminium").unwrap(), 45.0, 45.0, 3000.0).unwrap();
        let co = energy_fraction(lib.profile("concrete").unwrap(), 45.0, 45.0, 3000.0).unwrap();
        assert!(al > co);
    }
}
