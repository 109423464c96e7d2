//! Scenario files: geometry, radio parameters, antennas, data sources and
//! analysis settings in one versioned TOML document.
//!
//! The bundled presets (`ieee`, `thz`) are ordinary scenario files. A user
//! file is deep-merged onto a preset: tables merge key by key, every other
//! value (including arrays such as `surfaces` and `nodes`) replaces the
//! preset's value wholesale. Paths under `[data]` are resolved relative to
//! the file that names them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::CoverageSettings;
use crate::error::{Error, Result};
use crate::materials::{load_profile_path, MaterialLibrary};
use crate::propagation::{AbsorptionTable, AntennaSpec, RadioConfig};
use crate::raytracer::TraceOptions;
use crate::scene::{Node, Obstacle, Role, Scene, Surface, Vec3};

pub const FORMAT_VERSION: u32 = 1;
pub const PRESET_NAMES: [&str; 2] = ["ieee", "thz"];
pub const DEFAULT_ABSORPTION_CSV: &str = include_str!("../data/absorption.csv");

const IEEE_PRESET: &str = include_str!("../presets/ieee.toml");
const THZ_PRESET: &str = include_str!("../presets/thz.toml");

/// Source text of a bundled preset.
pub fn preset_source(name: &str) -> Result<&'static str> {
    match name {
        "ieee" => Ok(IEEE_PRESET),
        "thz" => Ok(THZ_PRESET),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: u32,
    name: String,
    #[serde(default)]
    description: String,
    /// Preset the file was written against; informational once merged.
    #[serde(default)]
    base: Option<String>,
    room: RoomSection,
    radio: RadioConfig,
    #[serde(default)]
    tracing: TraceOptions,
    #[serde(default)]
    pdp: PdpSettings,
    coverage: CoverageSettings,
    links: LinkSettings,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    surfaces: Vec<Surface>,
    #[serde(default)]
    obstacles: Vec<Obstacle>,
    #[serde(default)]
    nodes: Vec<NodeEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomSection {
    dims_m: Vec3,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    name: String,
    role: Role,
    position: Vec3,
    antenna: AntennaEntry,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AntennaEntry {
    Preset { preset: String },
    Spec(AntennaSpec),
}

impl AntennaEntry {
    fn resolve(&self) -> Result<AntennaSpec> {
        match self {
            AntennaEntry::Preset { preset } => AntennaSpec::preset(preset),
            AntennaEntry::Spec(s) => {
                s.validate()?;
                Ok(*s)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    /// Parametric materials file; its entries replace same-named defaults.
    materials: Option<PathBuf>,
    /// Absorption CSV replacing the bundled table.
    absorption: Option<PathBuf>,
    /// Measured material CSVs keyed by material name.
    #[serde(default)]
    measured: std::collections::BTreeMap<String, PathBuf>,
}

/// Power-delay-profile settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdpSettings {
    pub bin_width_ns: f64,
    pub frequencies_ghz: Vec<f64>,
}

impl Default for PdpSettings {
    fn default() -> Self {
        PdpSettings {
            bin_width_ns: 0.1,
            frequencies_ghz: vec![300.0, 1000.0, 3000.0],
        }
    }
}

/// Node names playing the plug and laptop roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSettings {
    pub plug: String,
    pub laptop: String,
}

/// A fully resolved, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub scene: Scene,
    pub radio: RadioConfig,
    pub tracing: TraceOptions,
    pub pdp: PdpSettings,
    pub coverage: CoverageSettings,
    pub links: LinkSettings,
    pub materials: MaterialLibrary,
    pub absorption: AbsorptionTable,
}

impl Scenario {
    /// A bundled preset, unmodified.
    pub fn preset(name: &str) -> Result<Scenario> {
        Scenario::load(name, None)
    }

    /// Preset `preset` with the optional user file merged on top.
    pub fn load(preset: &str, config: Option<&Path>) -> Result<Scenario> {
        let mut merged = parse_table(preset_source(preset)?, &format!("preset `{preset}`"))?;
        let mut base_dir = None;
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let overlay = parse_table(&text, &path.display().to_string())?;
            merge(&mut merged, overlay);
            base_dir = path.parent().map(Path::to_path_buf);
        }
        Scenario::from_table(merged, base_dir.as_deref())
    }

    /// Parses a complete scenario document (no preset underneath).
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
        Scenario::from_table(parse_table(text, "scenario")?, base_dir)
    }

    fn from_table(table: toml::Table, base_dir: Option<&Path>) -> Result<Scenario> {
        let file: ScenarioFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        let _ = file.base;
        let resolve = |p: &Path| match base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        };

        let mut materials = MaterialLibrary::defaults()?;
        if let Some(p) = &file.data.materials {
            let p = resolve(p);
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            materials.extend(MaterialLibrary::from_toml_str(&text)?);
        }
        for (name, p) in &file.data.measured {
            let p = resolve(p);
            let profile = load_profile_path(&p)?.renamed(name);
            materials.insert(profile);
        }
        let absorption = match &file.data.absorption {
            Some(p) => AbsorptionTable::from_path(&resolve(p))?,
            None => AbsorptionTable::from_csv_str(DEFAULT_ABSORPTION_CSV)?,
        };

        let nodes = file
            .nodes
            .iter()
            .map(|n| {
                Ok(Node {
                    name: n.name.clone(),
                    role: n.role,
                    position: n.position,
                    antenna: n.antenna.resolve()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scene = Scene::new(file.room.dims_m, file.surfaces, file.obstacles, nodes)?;
        for s in scene.surfaces() {
            if !materials.contains(&s.material) {
                return Err(Error::UnknownMaterial(s.material.clone()));
            }
        }
        for name in [&file.links.plug, &file.links.laptop, &file.coverage.receiver] {
            scene.node(name)?;
        }
        file.radio.validate()?;
        file.tracing.validate()?;
        file.coverage.validate()?;
        if !(file.pdp.bin_width_ns > 0.0) || file.pdp.frequencies_ghz.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config(
                "pdp needs a positive bin width and positive frequencies".into(),
            ));
        }
        Ok(Scenario {
            name: file.name,
            description: file.description,
            scene,
            radio: file.radio,
            tracing: file.tracing,
            pdp: file.pdp,
            coverage: file.coverage,
            links: file.links,
            materials,
            absorption,
        })
    }

    pub fn plug(&self) -> &Node {
        self.scene.node(&self.links.plug).expect("validated at load")
    }

    pub fn laptop(&self) -> &Node {
        self.scene.node(&self.links.laptop).expect("validated at load")
    }

    /// Node whose antenna the coverage receiver uses.
    pub fn mobile(&self) -> &Node {
        self.scene.node(&self.coverage.receiver).expect("validated at load")
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Deep merge: nested tables merge, anything else is replaced.
pub(crate) fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load() {
        for name in PRESET_NAMES {
            let s = Scenario::preset(name).unwrap();
            assert_eq!(s.scene.room_dims(), Vec3::new(6.0, 4.0, 3.0));
        }
        assert!(matches!(Scenario::preset("wifi"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn presets_share_geometry() {
        let a = Scenario::preset("ieee").unwrap();
        let b = Scenario::preset("thz").unwrap();
        assert_eq!(a.scene.surfaces(), b.scene.surfaces());
        assert_eq!(a.plug().position, b.plug().position);
        assert_eq!(a.laptop().position, b.laptop().position);
        assert_eq!(a.radio.center_frequency_ghz, 300.0);
        assert_eq!(b.radio.center_frequency_ghz, 1250.0);
        assert_eq!(b.radio.bandwidth_ghz, 500.0);
    }

    #[test]
    fn merge_replaces_leaves_and_arrays() {
        let mut base: toml::Table = "a = 1\n[t]\nx = 1\ny = [1, 2]\n".parse().unwrap();
        let over: toml::Table = "[t]\ny = [3]\nz = 2\n".parse().unwrap();
        merge(&mut base, over);
        assert_eq!(base["a"].as_integer(), Some(1));
        assert_eq!(base["t"]["x"].as_integer(), Some(1));
        assert_eq!(base["t"]["y"].as_array().unwrap().len(), 1);
        assert_eq!(base["t"]["z"].as_integer(), Some(2));
    }

    #[test]
    fn user_file_overrides_radio() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[radio]\ntx_power_dbm = 3.0\n").unwrap();
        let s = Scenario::load("ieee", Some(&path)).unwrap();
        assert_eq!(s.radio.tx_power_dbm, 3.0);
        assert_eq!(s.radio.bandwidth_ghz, 50.0);
    }

    #[test]
    fn unknown_keys_and_materials_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[radio]\ntx_power = 3.0\n").unwrap();
        assert!(matches!(Scenario::load("ieee", Some(&path)), Err(Error::Config(_))));
        std::fs::write(
            &path,
            "[[surfaces]]\nid = \"s\"\nname = \"s\"\ncorner = [0, 0, 0]\nedge_u = [1, 0, 0]\nedge_v = [0, 1, 0]\nmaterial = \"oak\"\n",
        )
        .unwrap();
        assert!(matches!(Scenario::load("ieee", Some(&path)), Err(Error::UnknownMaterial(_))));
    }

    #[test]
    fn antenna_presets_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let nodes = r#"
[[nodes]]
name = "plug"
role = "transmitter"
position = [2.5, 0.8, 0.95]
antenna = { preset = "extremely_directive" }

[[nodes]]
name = "laptop"
role = "receiver"
position = [2.5, 0.3, 0.85]
antenna = { boresight_gain_dbi = 0.0, half_beamwidth_deg = 180.0 }

[[nodes]]
name = "mobile"
role = "receiver"
position = [3.0, 2.0, 1.0]
antenna = { preset = "isotropic" }
"#;
        std::fs::write(&path, nodes).unwrap();
        let s = Scenario::load("ieee", Some(&path)).unwrap();
        assert_eq!(s.plug().antenna.boresight_gain, 50.0);
        assert_eq!(s.laptop().antenna.floor_gain, AntennaSpec::DEFAULT_FLOOR_DBI);
    }
}
