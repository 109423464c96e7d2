use std::collections::BTreeMap;

use super::PropagationPath;
use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::propagation::{db_to_linear, linear_to_db};
use crate::scene::Scene;

/// Surface key used for the direct path.
pub const LOS_KEY: &str = "LOS";
/// Surface key of aggregate rows in the CSV export.
pub const AGGREGATE_KEY: &str = "ALL";

pub const PDP_CSV_HEADER: &str = "delay_ns,surface,power_dbm";

/// Received power binned by delay, in total and split by the first surface a
/// path touches. Powers are stored in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub bin_width_s: f64,
    pub frequency_ghz: f64,
    pub bins: BTreeMap<u64, f64>,
    /// Keyed by surface id; the direct path is under [`LOS_KEY`].
    pub per_surface: BTreeMap<String, BTreeMap<u64, f64>>,
}

/// Bins path powers by delay. Each path contributes its subband-averaged
/// power `tx_power_dbm + mean gain`. Paths are summed in (delay, surface
/// trace) order whatever order they are passed in.
pub fn build_pdp(
    paths: &[PropagationPath],
    scene: &Scene,
    tx_power_dbm: f64,
    bin_width_s: f64,
    frequency_ghz: f64,
) -> Result<PowerDelayProfile> {
    if !(bin_width_s > 0.0 && bin_width_s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive, got {bin_width_s}"
        )));
    }
    let mut sorted: Vec<&PropagationPath> = paths.iter().collect();
    sorted.sort_by(|a, b| super::path_order(a, b));
    let mut pdp = PowerDelayProfile {
        bin_width_s,
        frequency_ghz,
        bins: BTreeMap::new(),
        per_surface: BTreeMap::new(),
    };
    for p in sorted {
        let mw = db_to_linear(p.received_power_dbm(tx_power_dbm));
        let bin = (p.delay_s / bin_width_s).floor() as u64;
        let key = match p.surface_trace.first() {
            None => LOS_KEY.to_string(),
            Some(&s) => scene.surfaces()[s].id.clone(),
        };
        *pdp.bins.entry(bin).or_insert(0.0) += mw;
        *pdp.per_surface.entry(key).or_default().entry(bin).or_insert(0.0) += mw;
    }
    Ok(pdp)
}

impl PowerDelayProfile {
    pub fn bin_delay_ns(&self, bin: u64) -> f64 {
        bin as f64 * self.bin_width_s * 1e9
    }

    /// Aggregate power of a bin, dBm (`-inf` for empty bins).
    pub fn bin_power_dbm(&self, bin: u64) -> f64 {
        linear_to_db(self.bins.get(&bin).copied().unwrap_or(0.0))
    }

    /// Strongest aggregate bin and its power in dBm.
    pub fn peak(&self) -> Option<(u64, f64)> {
        peak_of(&self.bins)
    }

    /// Strongest bin of one surface series.
    pub fn surface_peak(&self, key: &str) -> Option<(u64, f64)> {
        self.per_surface.get(key).and_then(peak_of)
    }

    /// CSV in the `delay_ns,surface,power_dbm` schema: one row per non-empty
    /// bin per surface plus `ALL` rows, ordered by delay then surface key.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(u64, &str, f64)> = Vec::new();
        for (&bin, &mw) in &self.bins {
            rows.push((bin, AGGREGATE_KEY, mw));
        }
        for (key, series) in &self.per_surface {
            for (&bin, &mw) in series {
                rows.push((bin, key.as_str(), mw));
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let mut out = String::from(PDP_CSV_HEADER);
        out.push('\n');
        for (bin, key, mw) in rows {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_sig(self.bin_delay_ns(bin)),
                key,
                fmt_sig(linear_to_db(mw))
            ));
        }
        out
    }
}

fn peak_of(series: &BTreeMap<u64, f64>) -> Option<(u64, f64)> {
    series
        .iter()
        .fold(None, |best: Option<(u64, f64)>, (&b, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((b, p)),
        })
        .map(|(b, p)| (b, linear_to_db(p)))
}
