//! Link budgets, SNR/capacity coverage maps and the laptop link.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::propagation::{
    db_to_linear, linear_to_db, noise_power_dbm, shannon_capacity_bps, throughput_bps, AbsorptionTable,
    RadioConfig, ReceivedSignal,
};
use crate::raytracer::{best_path, build_pdp, Endpoint, PowerDelayProfile, PropagationPath, TraceOptions, Tracer};
use crate::scene::Vec3;

pub const COVERAGE_CSV_HEADER: &str = "x_m,y_m,snr_db,capacity_gbps,throughput_gbps,mode,selected_surface";

/// Cell coordinates are snapped to this resolution so refined grids share
/// bit-identical centers with coarser ones.
const COORD_QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// Best path, direct path included.
    Los,
    /// Best reflected path; the direct path is treated as blocked.
    Nlos,
}

impl LinkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkMode::Los => "los",
            LinkMode::Nlos => "nlos",
        }
    }
}

impl std::str::FromStr for LinkMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(LinkMode::Los),
            "nlos" => Ok(LinkMode::Nlos),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}` (expected los or nlos)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSettings {
    pub step_m: f64,
    pub height_m: f64,
    /// First cell center (x, y).
    pub origin_m: [f64; 2],
    /// Interaction order traced per cell.
    pub max_order: u8,
    /// Node supplying the mobile receiver's antenna.
    pub receiver: String,
}

impl CoverageSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_m > 0.0 && self.step_m.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {}", self.step_m)));
        }
        if self.max_order > 2 {
            return Err(Error::UnsupportedOrder(self.max_order));
        }
        if !self.origin_m.iter().chain([&self.height_m]).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("coverage origin and height must be finite".into()));
        }
        Ok(())
    }
}

/// Link budget outcome for one receiver position.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub x_m: f64,
    pub y_m: f64,
    /// Total signal over total noise across the band, dB; `-inf` without a path.
    pub snr_db: f64,
    pub capacity_bps: f64,
    pub throughput_bps: f64,
    pub mode: LinkMode,
    /// Surface trace of the selected path (`LOS` for the direct path), if any.
    pub selected_surface: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub origin: [f64; 2],
    pub step: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the origin: index `j * nx + i` is cell `(i, j)`.
    pub cells: Vec<CellResult>,
}

impl CoverageGrid {
    pub fn cell(&self, i: usize, j: usize) -> &CellResult {
        &self.cells[j * self.nx + i]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COVERAGE_CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_sig(c.x_m),
                fmt_sig(c.y_m),
                fmt_sig(c.snr_db),
                fmt_sig(c.capacity_bps / 1e9),
                fmt_sig(c.throughput_bps / 1e9),
                c.mode.as_str(),
                c.selected_surface.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

/// Budget over the band for a single selected path.
pub fn link_budget(
    radio: &RadioConfig,
    absorption: &AbsorptionTable,
    path: Option<&PropagationPath>,
) -> Result<(f64, f64)> {
    let Some(path) = path else {
        return Ok((f64::NEG_INFINITY, 0.0));
    };
    let width = radio.subband_width_hz();
    let p_sub = radio.subband_tx_power_dbm();
    let centers = radio.subband_centers_ghz();
    let mut snr = Vec::with_capacity(radio.subband_count);
    let (mut sig, mut noise) = (0.0, 0.0);
    for (g, f) in path.gain.gains_db.iter().zip(&centers) {
        let rx_dbm = p_sub + g;
        let received = if radio.molecular_noise_enabled {
            Some(ReceivedSignal::from_path(rx_dbm, absorption.k_at(*f)?, path.length_m))
        } else {
            None
        };
        let n_dbm = noise_power_dbm(radio, width, received)?;
        let (s_lin, n_lin) = (db_to_linear(rx_dbm), db_to_linear(n_dbm));
        sig += s_lin;
        noise += n_lin;
        snr.push(s_lin / n_lin);
    }
    Ok((linear_to_db(sig / noise), shannon_capacity_bps(radio, &snr)?))
}

fn select(paths: &[PropagationPath], mode: LinkMode) -> Option<&PropagationPath> {
    best_path(paths, mode == LinkMode::Nlos).ok()
}

fn cell_result(
    scenario: &Scenario,
    radio: &RadioConfig,
    grouped: &[PropagationPath],
    mode: LinkMode,
    at: Vec3,
) -> Result<CellResult> {
    let chosen = select(grouped, mode);
    let (snr_db, capacity_bps) = link_budget(radio, &scenario.absorption, chosen)?;
    Ok(CellResult {
        x_m: at.x,
        y_m: at.y,
        snr_db,
        capacity_bps,
        throughput_bps: throughput_bps(radio, capacity_bps),
        mode,
        selected_surface: chosen.map(|p| p.trace_label(&scenario.scene)),
    })
}

fn snap(v: f64) -> f64 {
    (v / COORD_QUANTUM).round() * COORD_QUANTUM
}

/// Cell centers along one axis: `origin + i·step` strictly inside `(0, extent)`.
fn axis_points(origin: f64, step: f64, extent: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let v = snap(origin + i as f64 * step);
        if v >= extent - COORD_QUANTUM {
            break;
        }
        if v > COORD_QUANTUM {
            out.push(v);
        }
        i += 1;
    }
    out
}

/// SNR/capacity map at `settings.height_m` with the plug transmitting and a
/// perfectly steered mobile receiver in every cell. The direct path is used
/// only in [`LinkMode::Los`].
pub fn coverage(scenario: &Scenario, mode: LinkMode, settings: &CoverageSettings) -> Result<CoverageGrid> {
    let mut grids = coverage_modes(scenario, &[mode], settings)?;
    Ok(grids.remove(0))
}

/// One map per entry of `modes`, sharing a single trace per cell.
pub fn coverage_modes(
    scenario: &Scenario,
    modes: &[LinkMode],
    settings: &CoverageSettings,
) -> Result<Vec<CoverageGrid>> {
    settings.validate()?;
    let dims = scenario.scene.room_dims();
    let xs = axis_points(settings.origin_m[0], settings.step_m, dims.x);
    let ys = axis_points(settings.origin_m[1], settings.step_m, dims.y);
    if xs.is_empty() || ys.is_empty() || !(settings.height_m > 0.0 && settings.height_m < dims.z) {
        return Err(Error::InvalidArgument("coverage grid does not intersect the room".into()));
    }
    let opts = TraceOptions {
        max_order: settings.max_order,
        ..scenario.tracing.clone()
    };
    let radio = &scenario.radio;
    let tracer = Tracer::new(&scenario.scene, &scenario.materials, &scenario.absorption, radio, &opts)?;
    let plug = scenario.plug();
    let field = tracer.illuminate(Endpoint::steered(plug.position, plug.antenna), radio.tx_power_dbm);
    let rx_antenna = scenario.scene.node(&settings.receiver)?.antenna;
    let points: Vec<Vec3> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Vec3::new(x, y, settings.height_m)))
        .collect();
    let per_point = points
        .par_iter()
        .map(|&at| {
            let grouped = if at == plug.position || scenario.scene.inside_obstacle(at) {
                Vec::new()
            } else {
                field.trace_grouped(&Endpoint::steered(at, rx_antenna))?
            };
            modes
                .iter()
                .map(|&mode| cell_result(scenario, radio, &grouped, mode, at))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..modes.len())
        .map(|k| CoverageGrid {
            origin: settings.origin_m,
            step: settings.step_m,
            height: settings.height_m,
            nx: xs.len(),
            ny: ys.len(),
            cells: per_point.iter().map(|cells| cells[k].clone()).collect(),
        })
        .collect())
}

/// Plug-to-laptop budget with both antennas steered onto the selected path.
pub fn laptop_link(scenario: &Scenario, mode: LinkMode) -> Result<CellResult> {
    let (plug, laptop) = (scenario.plug(), scenario.laptop());
    let radio = &scenario.radio;
    let tracer = Tracer::new(
        &scenario.scene,
        &scenario.materials,
        &scenario.absorption,
        radio,
        &scenario.tracing,
    )?;
    let grouped = tracer
        .illuminate(Endpoint::steered(plug.position, plug.antenna), radio.tx_power_dbm)
        .trace_grouped(&Endpoint::steered(laptop.position, laptop.antenna))?;
    cell_result(scenario, radio, &grouped, mode, laptop.position)
}

/// Laptop-case power delay profile at `frequency_ghz`: the scenario's radio
/// re-centered there, plug and laptop antennas aimed at each other.
pub fn laptop_pdp(scenario: &Scenario, frequency_ghz: f64, opts: &TraceOptions) -> Result<PowerDelayProfile> {
    let (plug, laptop) = (scenario.plug(), scenario.laptop());
    let radio = scenario.radio.recentered(frequency_ghz);
    let tracer = Tracer::new(&scenario.scene, &scenario.materials, &scenario.absorption, &radio, opts)?;
    let tx = Endpoint::aimed_at(plug.position, plug.antenna, laptop.position);
    let rx = Endpoint::aimed_at(laptop.position, laptop.antenna, plug.position);
    let paths = tracer.illuminate(tx, radio.tx_power_dbm).trace(&rx)?;
    build_pdp(
        &paths,
        &scenario.scene,
        radio.tx_power_dbm,
        scenario.pdp.bin_width_ns * 1e-9,
        frequency_ghz,
    )
}
