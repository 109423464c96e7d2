use std::f64::consts::PI;

use super::profile::{MaterialProfile, Site};
use crate::error::{Error, Result};

/// Quadrature steps over the deviation angle δ ∈ [0°, 180°] (0.05° each).
const DEVIATION_STEPS: usize = 3600;

/// Observation angle used to look up a profile for an outgoing direction that
/// deviates by `deviation_deg` from the mirror direction of a ray incident at
/// `incidence_deg`. Prefers the grazing side of the lobe (θi + δ), folds to
/// the normal side (θi − δ) once that leaves [0°, 90°], and saturates at 90°.
#[inline]
pub fn observation_for_deviation(incidence_deg: f64, deviation_deg: f64) -> f64 {
    let forward = incidence_deg + deviation_deg;
    if forward <= 90.0 {
        forward
    } else if incidence_deg >= deviation_deg {
        incidence_deg - deviation_deg
    } else {
        90.0
    }
}

/// ∫₀^{2π} max(0, n·ω) dψ over the cone of directions at angle δ from a
/// mirror direction that makes angle θ with the normal.
fn projected_ring(theta: f64, delta: f64) -> f64 {
    let a = theta.cos() * delta.cos();
    let b = theta.sin() * delta.sin();
    if a >= b {
        2.0 * PI * a
    } else if a <= -b {
        0.0
    } else {
        let psi0 = (-a / b).clamp(-1.0, 1.0).acos();
        2.0 * (a * psi0 + b * psi0.sin())
    }
}

/// Bistatic re-radiation pattern derived from a [`MaterialProfile`].
///
/// The profile's angular shape is normalised over the hemisphere so that a
/// patch re-emits the fraction `R(θi) = max_θo E(θi, θo)` of the power it
/// intercepts, distributed as `E · cos θo`. The pattern returned by
/// [`ReradiationKernel::brdf`] is the mean of the two one-sided patterns,
/// which makes it reciprocal in its two directions.
#[derive(Debug, Clone)]
pub struct ReradiationKernel {
    profile: MaterialProfile,
    /// `R / Z` per stored frequency and incidence sample.
    scale: Vec<Vec<f64>>,
    shape: Vec<LobeShape>,
}

/// Maximum slope, relative to the peak and per degree, treated as flat.
const FLAT_SLOPE: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
struct LobeShape {
    extent_deg: f64,
    feature_deg: f64,
}

impl ReradiationKernel {
    pub fn new(profile: MaterialProfile) -> Self {
        let inc = profile.incidence_axis().values().to_vec();
        let n_obs = profile.observation_axis().len();
        let scale = (0..profile.frequency_axis().len())
            .map(|k| {
                inc.iter()
                    .enumerate()
                    .map(|(i, &theta)| {
                        let peak = (0..n_obs).map(|o| profile.sample(k, i, o)).fold(0.0, f64::max);
                        let norm = hemisphere_integral(&profile, k, theta);
                        if norm > 0.0 {
                            peak / norm
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let mut kernel = ReradiationKernel {
            profile,
            scale,
            shape: Vec::new(),
        };
        kernel.shape = (0..kernel.profile.frequency_axis().len())
            .map(|k| kernel.lobe_shape(k))
            .collect();
        kernel
    }

    /// Scans the one-sided pattern over deviation at every incidence sample.
    fn lobe_shape(&self, freq_idx: usize) -> LobeShape {
        let step = self.angular_resolution_deg();
        let n = (180.0 / step).ceil() as usize;
        let mut shape = LobeShape {
            extent_deg: 0.0,
            feature_deg: f64::INFINITY,
        };
        let mut values = Vec::with_capacity(n + 1);
        for &theta in self.profile.incidence_axis().values() {
            values.clear();
            values.extend((0..=n).map(|j| self.one_sided(freq_idx, theta, (j as f64 * step).min(180.0))));
            let peak = values.iter().copied().fold(0.0, f64::max);
            let low = values.iter().copied().fold(f64::INFINITY, f64::min);
            let mut max_slope: f64 = 0.0;
            for (j, w) in values.windows(2).enumerate() {
                // Where the deviation folds onto the horizon the observation
                // angle jumps; that step is not part of the lobe.
                let (d0, d1) = (j as f64 * step, ((j + 1) as f64 * step).min(180.0));
                let jump = observation_for_deviation(theta, d1) - observation_for_deviation(theta, d0);
                if jump.abs() > 1.5 * step {
                    continue;
                }
                let slope = (w[1] - w[0]).abs() / step;
                max_slope = max_slope.max(slope);
                if slope > FLAT_SLOPE * peak {
                    shape.extent_deg = shape.extent_deg.max((j + 1) as f64 * step);
                }
            }
            if max_slope > 0.0 {
                shape.feature_deg = shape.feature_deg.min((peak - low) / max_slope);
            }
        }
        shape
    }

    /// Deviation from the mirror direction beyond which the pattern at
    /// stored frequency `freq_idx` is flat (slope below 0.1 % of its peak
    /// per degree).
    pub fn lobe_extent_deg(&self, freq_idx: usize) -> f64 {
        self.shape[freq_idx].extent_deg
    }

    /// Angular scale of the pattern's variation at stored frequency
    /// `freq_idx`: its dynamic range divided by its steepest slope (about
    /// 1.2 lobe widths for a Gaussian lobe; infinite for a flat pattern).
    pub fn feature_scale_deg(&self, freq_idx: usize) -> f64 {
        self.shape[freq_idx].feature_deg
    }

    pub fn profile(&self) -> &MaterialProfile {
        &self.profile
    }

    /// Finest observation-angle spacing of the underlying samples, degrees.
    pub fn angular_resolution_deg(&self) -> f64 {
        self.profile.observation_axis().min_step().min(90.0)
    }

    /// Stored-frequency bracket `(k0, k1, w)` for `f`: value = (1-w)·v[k0] + w·v[k1].
    pub fn frequency_bracket(&self, frequency_ghz: f64) -> Result<(usize, usize, f64)> {
        let (lo, hi) = self.profile.frequency_span_ghz();
        if !(frequency_ghz >= lo && frequency_ghz <= hi) {
            return Err(Error::OutOfBand {
                frequency_ghz,
                min_ghz: lo,
                max_ghz: hi,
            });
        }
        let axis = self.profile.frequency_axis();
        let (k, w) = axis.locate(frequency_ghz);
        Ok((k, (k + 1).min(axis.len() - 1), w))
    }

    /// One-sided pattern `R/Z · E(θ, θo(δ))`, per steradian.
    #[inline]
    fn one_sided(&self, freq_idx: usize, theta_deg: f64, deviation_deg: f64) -> f64 {
        let site = self.profile.site(theta_deg, observation_for_deviation(theta_deg, deviation_deg));
        self.one_sided_at(freq_idx, &site)
    }

    #[inline]
    fn one_sided_at(&self, freq_idx: usize, site: &Site) -> f64 {
        let row = &self.scale[freq_idx];
        let s0 = row[site.i];
        let s = s0 + site.wi * (row[site.i1] - s0);
        if s == 0.0 {
            return 0.0;
        }
        s * self.profile.slice_at(freq_idx, site)
    }

    /// Reciprocal bidirectional pattern (sr⁻¹) at a stored frequency for a
    /// patch seen at `theta_a_deg` and `theta_b_deg` from its normal by the
    /// two hops, with `deviation_deg` between the outgoing direction and the
    /// mirror image of the incoming one.
    #[inline]
    pub fn brdf(&self, freq_idx: usize, theta_a_deg: f64, theta_b_deg: f64, deviation_deg: f64) -> f64 {
        0.5 * (self.one_sided(freq_idx, theta_a_deg, deviation_deg)
            + self.one_sided(freq_idx, theta_b_deg, deviation_deg))
    }

    /// Adds `weight · brdf(k, ..)` to `acc[slot]` for each `(slot, k)` of
    /// `freq_indices`.
    #[inline]
    pub fn accumulate_brdf(
        &self,
        freq_indices: &[usize],
        theta_a_deg: f64,
        theta_b_deg: f64,
        deviation_deg: f64,
        weight: f64,
        acc: &mut [f64],
    ) {
        let a = self.profile.site(theta_a_deg, observation_for_deviation(theta_a_deg, deviation_deg));
        let b = self.profile.site(theta_b_deg, observation_for_deviation(theta_b_deg, deviation_deg));
        let half = 0.5 * weight;
        for (slot, &k) in freq_indices.iter().enumerate() {
            acc[slot] += half * (self.one_sided_at(k, &a) + self.one_sided_at(k, &b));
        }
    }
}

/// Z(θ) = ∫_hemisphere E(θ, θo(δ)) cos θo dω, by midpoint rule in δ with the
/// azimuthal integral done in closed form.
fn hemisphere_integral(profile: &MaterialProfile, freq_idx: usize, theta_deg: f64) -> f64 {
    let theta = theta_deg.to_radians();
    let h = PI / DEVIATION_STEPS as f64;
    (0..DEVIATION_STEPS)
        .map(|j| {
            let delta = (j as f64 + 0.5) * h;
            let ring = projected_ring(theta, delta);
            if ring == 0.0 {
                return 0.0;
            }
            let e = profile.slice_value(
                freq_idx,
                theta_deg,
                observation_for_deviation(theta_deg, delta.to_degrees()),
            );
            e * ring * delta.sin() * h
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{parametric_profile, LobeAnchor, ParametricLobe};

    fn lobe_profile(a: f64, w: f64, b: f64) -> MaterialProfile {
        let lobe = ParametricLobe {
            specular_amplitude: a,
            lobe_width: w,
            diffuse_floor: b,
        };
        parametric_profile(
            "t",
            &[
                LobeAnchor { frequency_ghz: 100.0, lobe },
                LobeAnchor { frequency_ghz: 1000.0, lobe },
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn projected_ring_integrates_to_pi() {
        for theta_deg in [0.0, 20.0, 45.0, 70.0, 89.0] {
            let theta = f64::to_radians(theta_deg);
            let n = 20_000;
            let h = PI / n as f64;
            let total: f64 = (0..n)
                .map(|j| {
                    let d = (j as f64 + 0.5) * h;
                    projected_ring(theta, d) * d.sin() * h
                })
                .sum();
            assert!((total - PI).abs() < 1e-6, "{theta_deg}: {total}");
        }
    }

    #[test]
    fn flat_profile_is_lambertian() {
        let k = ReradiationKernel::new(lobe_profile(0.0, 5.0, 0.2));
        for (a, b, d) in [(0.0, 0.0, 0.0), (30.0, 60.0, 40.0), (80.0, 10.0, 100.0)] {
            assert!((k.brdf(0, a, b, d) - 0.2 / PI).abs() < 1e-6);
        }
    }

    /// Oracle: brute-force 2-D hemisphere quadrature in the surface frame,
    /// computing the deviation from explicit direction vectors.
    fn reradiated_fraction(k: &ReradiationKernel, theta_in_deg: f64) -> f64 {
        let ti = theta_in_deg.to_radians();
        let mirror = [ti.sin(), 0.0, ti.cos()];
        let (nt, np) = (900, 720);
        let (ht, hp) = (0.5 * PI / nt as f64, 2.0 * PI / np as f64);
        let mut sum = 0.0;
        for a in 0..nt {
            let t = (a as f64 + 0.5) * ht;
            for b in 0..np {
                let p = (b as f64 + 0.5) * hp;
                let w = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                let c = (w[0] * mirror[0] + w[1] * mirror[1] + w[2] * mirror[2]).clamp(-1.0, 1.0);
                let dev = c.acos().to_degrees();
                sum += k.one_sided(0, theta_in_deg, dev) * t.cos() * t.sin() * ht * hp;
            }
        }
        sum
    }

    #[test]
    fn one_sided_pattern_reradiates_peak_fraction() {
        let k = ReradiationKernel::new(lobe_profile(0.6, 8.0, 0.01));
        for theta in [0.0, 30.0, 60.0] {
            let got = reradiated_fraction(&k, theta);
            assert!((got - 0.61).abs() / 0.61 < 5e-3, "θ = {theta}: {got}");
        }
    }

    #[test]
    fn pattern_is_symmetric_in_its_two_directions() {
        let k = ReradiationKernel::new(lobe_profile(0.5, 6.0, 0.02));
        assert_eq!(k.brdf(0, 20.0, 55.0, 7.0), k.brdf(0, 55.0, 20.0, 7.0));
    }

    #[test]
    fn lobe_shape_tracks_lobe_width() {
        let narrow = ReradiationKernel::new(lobe_profile(0.5, 3.0, 0.01));
        let wide = ReradiationKernel::new(lobe_profile(0.5, 12.0, 0.01));
        assert!(narrow.lobe_extent_deg(0) < wide.lobe_extent_deg(0));
        assert!(narrow.feature_scale_deg(0) < wide.feature_scale_deg(0));
        // A Gaussian of width w has range / max slope = w·sqrt(e/2).
        let f = wide.feature_scale_deg(0);
        assert!(f > 0.8 * 12.0 && f < 1.5 * 12.0, "{f}");
        let flat = ReradiationKernel::new(lobe_profile(0.0, 5.0, 0.2));
        assert_eq!(flat.lobe_extent_deg(0), 0.0);
        assert_eq!(flat.feature_scale_deg(0), f64::INFINITY);
    }

    #[test]
    fn deviation_mapping() {
        assert_eq!(observation_for_deviation(30.0, 10.0), 40.0);
        assert_eq!(observation_for_deviation(80.0, 20.0), 60.0);
        assert_eq!(observation_for_deviation(10.0, 95.0), 90.0);
    }

    #[test]
    fn frequency_bracket_rejects_out_of_band() {
        let k = ReradiationKernel::new(lobe_profile(0.5, 6.0, 0.02));
        assert!(k.frequency_bracket(50.0).is_err());
        let (a, b, w) = k.frequency_bracket(550.0).unwrap();
        assert_eq!((a, b), (0, 1));
        assert!((w - 0.5).abs() < 1e-15);
    }
}
