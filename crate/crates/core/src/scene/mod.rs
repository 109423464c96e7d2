//! Office geometry: room shell, material-tagged planar surfaces, opaque
//! obstacles and transceiver nodes, plus tessellation and line-of-sight
//! queries used by the ray tracer.

mod geometry;
mod occlusion;
mod tessellation;

pub use geometry::{angle_between_deg, Vec3};
pub use occlusion::is_occluded;
pub use tessellation::tessellate;
pub(crate) use tessellation::tessellate_indexed;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::AntennaSpec;

/// Slack allowed when checking that geometry lies inside the room.
const BOUNDS_TOLERANCE: f64 = 1e-9;

/// Planar parallelogram (in practice a rectangle) spanned by two edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub id: String,
    pub name: String,
    pub corner: Vec3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
    pub material: String,
}

impl Surface {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        corner: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        material: impl Into<String>,
    ) -> Self {
        Surface {
            id: id.into(),
            name: name.into(),
            corner,
            edge_u,
            edge_v,
            material: material.into(),
        }
    }

    pub fn area(&self) -> f64 {
        self.edge_u.cross(self.edge_v).norm()
    }

    pub fn normal(&self) -> Vec3 {
        self.edge_u.cross(self.edge_v).normalized()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.corner.is_finite() && self.edge_u.is_finite() && self.edge_v.is_finite();
        let scale = self.edge_u.norm() * self.edge_v.norm();
        if !finite || scale == 0.0 || self.area() <= 1e-12 * scale {
            return Err(Error::InvalidGeometry(format!(
                "surface `{}` is degenerate (edges must be finite and non-parallel)",
                self.id
            )));
        }
        Ok(())
    }

    fn corners(&self) -> [Vec3; 4] {
        [
            self.corner,
            self.corner + self.edge_u,
            self.corner + self.edge_v,
            self.corner + self.edge_u + self.edge_v,
        ]
    }
}

/// Opaque axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min: Vec3,
    pub max: Vec3,
    #[serde(default)]
    pub label: String,
}

impl Obstacle {
    pub fn new(min: Vec3, max: Vec3, label: impl Into<String>) -> Self {
        Obstacle {
            min,
            max,
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.x < self.max.x && self.min.y < self.max.y && self.min.z < self.max.z) {
            return Err(Error::InvalidGeometry(format!(
                "obstacle `{}` needs min < max on every axis",
                self.label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Transmitter,
    Receiver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub role: Role,
    pub position: Vec3,
    pub antenna: AntennaSpec,
}

/// Surface patch treated as a point re-radiator at its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub center: Vec3,
    pub normal: Vec3,
    pub area: f64,
    /// Index of the owning surface in [`Scene::surfaces`].
    pub surface_id: usize,
    /// Patch extent along the surface's `edge_u` / `edge_v` directions, meters.
    pub extent_u: f64,
    pub extent_v: f64,
}

/// Precomputed plane data for fast segment/surface intersection.
#[derive(Debug, Clone)]
pub(crate) struct PlanePatch {
    pub corner: Vec3,
    pub normal: Vec3,
    /// Dual basis: `(p - corner) · dual_u` gives the `edge_u` coordinate in [0, 1].
    pub dual_u: Vec3,
    pub dual_v: Vec3,
}

impl PlanePatch {
    fn new(s: &Surface) -> Self {
        let n = s.edge_u.cross(s.edge_v);
        let nn = n.norm_squared();
        PlanePatch {
            corner: s.corner,
            normal: n.normalized(),
            dual_u: s.edge_v.cross(n) * (1.0 / nn),
            dual_v: n.cross(s.edge_u) * (1.0 / nn),
        }
    }
}

/// Immutable room description. Construct with [`Scene::new`], which validates
/// every invariant and caches plane data for occlusion queries.
#[derive(Debug, Clone)]
pub struct Scene {
    room_dims: Vec3,
    surfaces: Vec<Surface>,
    obstacles: Vec<Obstacle>,
    nodes: Vec<Node>,
    planes: Vec<PlanePatch>,
}

impl Scene {
    pub fn new(
        room_dims: Vec3,
        surfaces: Vec<Surface>,
        obstacles: Vec<Obstacle>,
        nodes: Vec<Node>,
    ) -> Result<Self> {
        if !(room_dims.x > 0.0 && room_dims.y > 0.0 && room_dims.z > 0.0) || !room_dims.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "room dimensions must be positive, got {room_dims:?}"
            )));
        }
        let scene = Scene {
            room_dims,
            planes: surfaces.iter().map(PlanePatch::new).collect(),
            surfaces,
            obstacles,
            nodes,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Empty room of the given size: no surfaces, obstacles or nodes.
    pub fn empty(room_dims: Vec3) -> Result<Self> {
        Scene::new(room_dims, Vec::new(), Vec::new(), Vec::new())
    }

    fn validate(&self) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.surfaces {
            s.validate()?;
            if !ids.insert(s.id.as_str()) {
                return Err(Error::InvalidGeometry(format!("duplicate surface id `{}`", s.id)));
            }
            if let Some(c) = s.corners().into_iter().find(|c| !self.contains(*c)) {
                return Err(Error::InvalidGeometry(format!(
                    "surface `{}` extends outside the room (corner {:?})",
                    s.id,
                    c.to_array()
                )));
            }
        }
        for o in &self.obstacles {
            o.validate()?;
            if !self.contains(o.min) || !self.contains(o.max) {
                return Err(Error::InvalidGeometry(format!(
                    "obstacle `{}` extends outside the room",
                    o.label
                )));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for n in &self.nodes {
            n.antenna.validate()?;
            if !names.insert(n.name.as_str()) {
                return Err(Error::InvalidGeometry(format!("duplicate node `{}`", n.name)));
            }
            if !self.contains(n.position) {
                return Err(Error::InvalidGeometry(format!(
                    "node `{}` at {:?} is outside the room",
                    n.name,
                    n.position.to_array()
                )));
            }
        }
        Ok(())
    }

    pub fn room_dims(&self) -> Vec3 {
        self.room_dims
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Result<&Node> {
        self.nodes
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::MissingNode(name.to_string()))
    }

    pub fn surface_index(&self, id: &str) -> Option<usize> {
        self.surfaces.iter().position(|s| s.id == id)
    }

    pub(crate) fn planes(&self) -> &[PlanePatch] {
        &self.planes
    }

    /// Closed containment test against the room box.
    pub fn contains(&self, p: Vec3) -> bool {
        let t = BOUNDS_TOLERANCE;
        p.is_finite()
            && (-t..=self.room_dims.x + t).contains(&p.x)
            && (-t..=self.room_dims.y + t).contains(&p.y)
            && (-t..=self.room_dims.z + t).contains(&p.z)
    }

    /// True when `p` lies strictly inside an obstacle.
    pub fn inside_obstacle(&self, p: Vec3) -> bool {
        self.obstacles.iter().any(|o| {
            (0..3).all(|a| o.min.component(a) < p.component(a) && p.component(a) < o.max.component(a))
        })
    }

    /// Tessellates every surface; segment `surface_id`s index into [`Scene::surfaces`].
    pub fn tessellate_all(&self, segment_size: f64) -> Result<Vec<Segment>> {
        let mut out = Vec::new();
        for (i, s) in self.surfaces.iter().enumerate() {
            out.extend(tessellate_indexed(s, i, segment_size)?);
        }
        Ok(out)
    }

    /// Scene with the same shell and nodes, but different surfaces.
    pub fn with_surfaces(&self, surfaces: Vec<Surface>) -> Result<Scene> {
        Scene::new(self.room_dims, surfaces, self.obstacles.clone(), self.nodes.clone())
    }

    pub fn with_obstacles(&self, obstacles: Vec<Obstacle>) -> Result<Scene> {
        Scene::new(self.room_dims, self.surfaces.clone(), obstacles, self.nodes.clone())
    }
}

/// Loads the geometry of a named office preset (`"ieee"` or `"thz"`).
///
/// Both presets share the 6 x 4 x 3 m office; they differ in radio
/// parameters and antennas, which live alongside the geometry in the preset
/// file (see [`crate::config::Scenario`]).
pub fn build_office_scene(preset: &str) -> Result<Scene> {
    Ok(crate::config::Scenario::preset(preset)?.scene)
}

/// Six axis-aligned walls of an empty rectangular room, normals facing inward,
/// all with the same material. Useful for image-method comparisons.
pub fn box_room_surfaces(dims: Vec3, material: &str) -> Vec<Surface> {
    let (x, y, z) = (dims.x, dims.y, dims.z);
    let ex = Vec3::new(x, 0.0, 0.0);
    let ey = Vec3::new(0.0, y, 0.0);
    let ez = Vec3::new(0.0, 0.0, z);
    vec![
        Surface::new("floor", "floor", Vec3::ZERO, ex, ey, material),
        Surface::new("ceiling", "ceiling", Vec3::new(0.0, 0.0, z), ey, ex, material),
        Surface::new("wall_x0", "wall", Vec3::ZERO, ey, ez, material),
        Surface::new("wall_x1", "wall", Vec3::new(x, 0.0, 0.0), ez, ey, material),
        Surface::new("wall_y0", "wall", Vec3::ZERO, ez, ex, material),
        Surface::new("wall_y1", "wall", Vec3::new(0.0, y, 0.0), ex, ez, material),
    ]
}
