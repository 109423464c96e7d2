use serde::{Deserialize, Serialize};

use super::profile::{MaterialProfile, ProfileKind};
use crate::error::{Error, Result};

/// Gaussian specular lobe on top of a constant diffuse floor:
/// `E(θi, θo) = specular_amplitude · exp(-((θo - θi) / lobe_width)²) + diffuse_floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricLobe {
    pub specular_amplitude: f64,
    #[serde(rename = "lobe_width_deg")]
    pub lobe_width: f64,
    pub diffuse_floor: f64,
}

impl ParametricLobe {
    pub fn validate(&self) -> Result<()> {
        let ok = self.specular_amplitude >= 0.0
            && self.diffuse_floor >= 0.0
            && self.specular_amplitude + self.diffuse_floor <= 1.0
            && self.lobe_width > 0.0
            && self.lobe_width.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProfile(format!(
                "lobe needs amplitude, floor >= 0, amplitude + floor <= 1 and width > 0, got {self:?}"
            )))
        }
    }

    pub fn energy(&self, incidence_deg: f64, observation_deg: f64) -> f64 {
        let x = (observation_deg - incidence_deg) / self.lobe_width;
        self.specular_amplitude * (-x * x).exp() + self.diffuse_floor
    }
}

/// Lobe parameters pinned to one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeAnchor {
    pub frequency_ghz: f64,
    #[serde(flatten)]
    pub lobe: ParametricLobe,
}

/// Samples the lobe model on a regular angular grid over [0°, 90°] at each
/// anchor frequency. Between anchors the profile interpolates linearly.
pub fn parametric_profile(
    name: &str,
    anchors: &[LobeAnchor],
    angular_step_deg: f64,
) -> Result<MaterialProfile> {
    if anchors.is_empty() {
        return Err(Error::InvalidProfile(format!("`{name}`: no frequency anchors")));
    }
    if anchors.windows(2).any(|w| !(w[0].frequency_ghz < w[1].frequency_ghz)) {
        return Err(Error::InvalidProfile(format!(
            "`{name}`: anchor frequencies must be strictly increasing"
        )));
    }
    for a in anchors {
        a.lobe.validate()?;
    }
    if !(angular_step_deg > 0.0 && angular_step_deg <= 90.0) {
        return Err(Error::InvalidArgument(format!(
            "angular step must be in (0, 90], got {angular_step_deg}"
        )));
    }
    let n = (90.0 / angular_step_deg).round() as usize;
    let angles: Vec<f64> = (0..=n).map(|k| k as f64 * 90.0 / n as f64).collect();
    let mut values = Vec::with_capacity(anchors.len() * angles.len() * angles.len());
    for a in anchors {
        for &ti in &angles {
            for &to in &angles {
                values.push(a.lobe.energy(ti, to).min(1.0));
            }
        }
    }
    MaterialProfile::from_grid(
        name,
        ProfileKind::Parametric,
        angles.clone(),
        angles,
        anchors.iter().map(|a| a.frequency_ghz).collect(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::energy_fraction;

    fn anchor(f: f64, a: f64, w: f64, b: f64) -> LobeAnchor {
        LobeAnchor {
            frequency_ghz: f,
            lobe: ParametricLobe {
                specular_amplitude: a,
                lobe_width: w,
                diffuse_floor: b,
            },
        }
    }

    #[test]
    fn mirror_peaks_at_specular() {
        let p = parametric_profile("mirror", &[anchor(100.0, 1.0, 0.5, 0.0), anchor(200.0, 1.0, 0.5, 0.0)], 1.0)
            .unwrap();
        for ti in [0.0, 30.0, 45.0, 80.0] {
            assert!((energy_fraction(&p, ti, ti, 150.0).unwrap() - 1.0).abs() < 1e-15);
            assert!(energy_fraction(&p, ti, ti + 5.0, 150.0).unwrap() < 1e-20);
        }
    }

    #[test]
    fn pure_diffuser_is_flat() {
        let p = parametric_profile("diffuser", &[anchor(100.0, 0.0, 10.0, 0.1)], 5.0).unwrap();
        for (ti, to) in [(0.0, 0.0), (10.0, 80.0), (45.0, 3.0), (90.0, 90.0)] {
            assert!((energy_fraction(&p, ti, to, 100.0).unwrap() - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_lobes() {
        assert!(parametric_profile("x", &[anchor(100.0, 0.8, 5.0, 0.3)], 1.0).is_err());
        assert!(parametric_profile("x", &[anchor(100.0, 0.5, 0.0, 0.1)], 1.0).is_err());
        assert!(parametric_profile("x", &[anchor(200.0, 0.5, 2.0, 0.1), anchor(100.0, 0.5, 2.0, 0.1)], 1.0).is_err());
        assert!(parametric_profile("x", &[], 1.0).is_err());
    }
}
