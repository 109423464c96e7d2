//! Link-physics kernel: spreading loss, molecular absorption, antenna gains,
//! noise, and capacity. Everything here is a pure function of its inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// 10·log10(e): converts a Napierian optical depth to decibels.
const DB_PER_NEPER_POWER: f64 = 4.342_944_819_032_518;

pub const ABSORPTION_CSV_HEADER: &str = "frequency_ghz,k_per_m";

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Sectored (cone) antenna: boresight gain inside the cone, floor gain outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaSpec {
    #[serde(rename = "boresight_gain_dbi")]
    pub boresight_gain: f64,
    #[serde(rename = "half_beamwidth_deg")]
    pub half_beamwidth: f64,
    #[serde(rename = "floor_gain_dbi", default = "default_floor_gain")]
    pub floor_gain: f64,
}

fn default_floor_gain() -> f64 {
    AntennaSpec::DEFAULT_FLOOR_DBI
}

impl AntennaSpec {
    pub const DEFAULT_FLOOR_DBI: f64 = -10.0;

    pub fn new(boresight_gain: f64, half_beamwidth: f64, floor_gain: f64) -> Result<Self> {
        let spec = AntennaSpec {
            boresight_gain,
            half_beamwidth,
            floor_gain,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isotropic() -> Self {
        AntennaSpec {
            boresight_gain: 0.0,
            half_beamwidth: 180.0,
            floor_gain: 0.0,
        }
    }

    /// Directivity classes of the IEEE 802.15.3d application table, realised
    /// as lossless cones: the half-beamwidth is the one whose solid angle
    /// concentrates all radiated power at the class gain.
    ///
    /// Names: `extremely_directive` (50 dBi), `highly_directive` (20 dBi),
    /// `directive` (10 dBi), `isotropic`.
    pub fn preset(name: &str) -> Result<Self> {
        let gain = match name {
            "extremely_directive" => 50.0,
            "highly_directive" => 20.0,
            "directive" => 10.0,
            "isotropic" => return Ok(AntennaSpec::isotropic()),
            other => {
                return Err(Error::Config(format!("unknown antenna preset `{other}`")));
            }
        };
        AntennaSpec::new(gain, cone_half_angle_for_gain(gain), Self::DEFAULT_FLOOR_DBI)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.boresight_gain.is_finite()
            && self.floor_gain.is_finite()
            && self.boresight_gain >= self.floor_gain
            && self.half_beamwidth > 0.0
            && self.half_beamwidth <= 180.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "antenna needs boresight >= floor gain and 0 < half-beamwidth <= 180 deg, got {self:?}"
            )))
        }
    }
}

/// Half-angle (degrees) of a cone whose solid angle equals 4π / G.
fn cone_half_angle_for_gain(gain_dbi: f64) -> f64 {
    let g = db_to_linear(gain_dbi);
    (1.0 - 2.0 / g).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Molecular absorption coefficient versus frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    frequencies_ghz: Vec<f64>,
    k_per_m: Vec<f64>,
}

impl AbsorptionTable {
    pub fn new(frequencies_ghz: Vec<f64>, k_per_m: Vec<f64>) -> Result<Self> {
        if frequencies_ghz.is_empty() || frequencies_ghz.len() != k_per_m.len() {
            return Err(Error::InvalidArgument(
                "absorption table needs matching, non-empty frequency and k columns".into(),
            ));
        }
        if frequencies_ghz.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "absorption table frequencies must be strictly increasing".into(),
            ));
        }
        if let Some(k) = k_per_m.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "absorption coefficient must be finite and >= 0, got {k}"
            )));
        }
        Ok(AbsorptionTable {
            frequencies_ghz,
            k_per_m,
        })
    }

    /// Frequency-flat table over `[min_ghz, max_ghz]`.
    pub fn constant(k_per_m: f64, min_ghz: f64, max_ghz: f64) -> Result<Self> {
        AbsorptionTable::new(vec![min_ghz, max_ghz], vec![k_per_m, k_per_m])
    }

    /// Parses the `frequency_ghz,k_per_m` CSV schema.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end_matches('\r') == ABSORPTION_CSV_HEADER => {}
            other => {
                return Err(Error::Row {
                    row: 1,
                    message: format!(
                        "expected header `{ABSORPTION_CSV_HEADER}`, found `{}`",
                        other.map(|(_, h)| h).unwrap_or("")
                    ),
                })
            }
        }
        let mut freqs = Vec::new();
        let mut ks = Vec::new();
        for (i, line) in lines {
            let row = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 {
                return Err(Error::Row {
                    row,
                    message: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Row {
                    row,
                    message: format!("cannot parse {what} `{s}`"),
                })
            };
            let f = parse(fields[0], "frequency_ghz")?;
            let k = parse(fields[1], "k_per_m")?;
            if let Some(&last) = freqs.last() {
                if !(f > last) {
                    return Err(Error::Row {
                        row,
                        message: format!("frequency {f} GHz is not above the previous row"),
                    });
                }
            }
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::Row {
                    row,
                    message: format!("k_per_m must be >= 0, got {k}"),
                });
            }
            freqs.push(f);
            ks.push(k);
        }
        AbsorptionTable::new(freqs, ks)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn span_ghz(&self) -> (f64, f64) {
        (self.frequencies_ghz[0], *self.frequencies_ghz.last().unwrap())
    }

    /// Absorption coefficient at `f_ghz`, linearly interpolated.
    pub fn k_at(&self, f_ghz: f64) -> Result<f64> {
        let (lo, hi) = self.span_ghz();
        if !(f_ghz >= lo && f_ghz <= hi) {
            return Err(Error::OutOfBand {
                frequency_ghz: f_ghz,
                min_ghz: lo,
                max_ghz: hi,
            });
        }
        let f = &self.frequencies_ghz;
        if f.len() == 1 {
            return Ok(self.k_per_m[0]);
        }
        let j = f.partition_point(|x| *x <= f_ghz).clamp(1, f.len() - 1);
        let w = (f_ghz - f[j - 1]) / (f[j] - f[j - 1]);
        Ok(self.k_per_m[j - 1] + w * (self.k_per_m[j] - self.k_per_m[j - 1]))
    }
}

/// Wideband radio parameters shared by both link ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub center_frequency_ghz: f64,
    pub bandwidth_ghz: f64,
    pub subband_count: usize,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    pub mac_efficiency: f64,
    #[serde(default)]
    pub molecular_noise_enabled: bool,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.center_frequency_ghz > 0.0
            && self.bandwidth_ghz > 0.0
            && self.bandwidth_ghz < 2.0 * self.center_frequency_ghz
            && self.subband_count >= 1
            && self.mac_efficiency > 0.0
            && self.mac_efficiency <= 1.0
            && self.temperature_k > 0.0
            && self.tx_power_dbm.is_finite()
            && self.noise_figure_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid radio configuration {self:?}")))
        }
    }

    pub fn subband_width_hz(&self) -> f64 {
        self.bandwidth_ghz * 1e9 / self.subband_count as f64
    }

    pub fn subband_centers_ghz(&self) -> Vec<f64> {
        let n = self.subband_count as f64;
        let lo = self.center_frequency_ghz - 0.5 * self.bandwidth_ghz;
        (0..self.subband_count)
            .map(|i| lo + (i as f64 + 0.5) * self.bandwidth_ghz / n)
            .collect()
    }

    /// Same radio re-centered at another carrier frequency.
    pub fn recentered(&self, center_frequency_ghz: f64) -> RadioConfig {
        RadioConfig {
            center_frequency_ghz,
            ..self.clone()
        }
    }

    /// Transmit power allotted to each subband (equal split), dBm.
    pub fn subband_tx_power_dbm(&self) -> f64 {
        self.tx_power_dbm - linear_to_db(self.subband_count as f64)
    }
}

/// Per-subband channel gain of one path, aligned with
/// [`RadioConfig::subband_centers_ghz`].
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainSpectrum {
    pub gains_db: Vec<f64>,
    pub delay_s: f64,
}

impl PathGainSpectrum {
    /// Sum of linear gains over all subbands.
    pub fn total_linear(&self) -> f64 {
        self.gains_db.iter().map(|g| db_to_linear(*g)).sum()
    }

    /// Subband-averaged gain in dB.
    pub fn mean_db(&self) -> f64 {
        linear_to_db(self.total_linear() / self.gains_db.len() as f64)
    }
}

/// Free-space spreading loss between isotropic antennas, dB.
pub fn fspl_db(distance_m: f64, frequency_ghz: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !(frequency_ghz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "free-space loss needs positive distance and frequency, got d = {distance_m} m, f = {frequency_ghz} GHz"
        )));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance_m * frequency_ghz * 1e9 / SPEED_OF_LIGHT).log10())
}

/// Beer-Lambert molecular absorption over `distance_m`, dB.
pub fn absorption_db(distance_m: f64, frequency_ghz: f64, table: &AbsorptionTable) -> Result<f64> {
    if !(distance_m >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "absorption distance must be >= 0, got {distance_m}"
        )));
    }
    Ok(DB_PER_NEPER_POWER * table.k_at(frequency_ghz)? * distance_m)
}

pub fn antenna_gain_db(spec: &AntennaSpec, off_boresight_deg: f64) -> f64 {
    if off_boresight_deg <= spec.half_beamwidth {
        spec.boresight_gain
    } else {
        spec.floor_gain
    }
}

/// Received signal feeding the molecular-noise term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedSignal {
    pub power_dbm: f64,
    /// Fraction of power absorbed along the path, 1 − e^(−k·d).
    pub absorbance: f64,
}

impl ReceivedSignal {
    pub fn from_path(power_dbm: f64, k_per_m: f64, length_m: f64) -> Self {
        ReceivedSignal {
            power_dbm,
            absorbance: -(-k_per_m * length_m).exp_m1(),
        }
    }
}

/// Thermal noise (kTB + noise figure) in one subband, plus the optional
/// molecular re-radiation term proportional to the received power.
pub fn noise_power_dbm(
    cfg: &RadioConfig,
    subband_width_hz: f64,
    received: Option<ReceivedSignal>,
) -> Result<f64> {
    if !(subband_width_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "subband width must be positive, got {subband_width_hz}"
        )));
    }
    let thermal_dbm =
        linear_to_db(BOLTZMANN * cfg.temperature_k * subband_width_hz * 1000.0) + cfg.noise_figure_db;
    if !cfg.molecular_noise_enabled {
        return Ok(thermal_dbm);
    }
    let rx = received.ok_or(Error::MissingReceivedPower)?;
    let molecular_mw = rx.absorbance * db_to_linear(rx.power_dbm);
    Ok(linear_to_db(db_to_linear(thermal_dbm) + molecular_mw))
}

/// Shannon capacity summed over equal-width subbands; `snr_per_subband` is linear.
pub fn shannon_capacity_bps(cfg: &RadioConfig, snr_per_subband: &[f64]) -> Result<f64> {
    if snr_per_subband.len() != cfg.subband_count {
        return Err(Error::InvalidArgument(format!(
            "expected {} subband SNRs, got {}",
            cfg.subband_count,
            snr_per_subband.len()
        )));
    }
    if let Some(s) = snr_per_subband.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidArgument(format!("SNR must be >= 0 (linear), got {s}")));
    }
    let width = cfg.subband_width_hz();
    Ok(snr_per_subband.iter().map(|s| width * s.ln_1p() / std::f64::consts::LN_2).sum())
}

pub fn throughput_bps(cfg: &RadioConfig, capacity_bps: f64) -> f64 {
    cfg.mac_efficiency * capacity_bps
}
