use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

pub const MATERIAL_CSV_HEADER: [&str; 4] =
    ["incidence_deg", "observation_deg", "frequency_ghz", "energy_fraction"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Measured,
    Parametric,
}

/// Sorted sample axis with O(1) lookup when uniformly spaced.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Axis {
    values: Vec<f64>,
    uniform: Option<(f64, f64)>,
}

impl Axis {
    pub(crate) fn new(values: Vec<f64>) -> Self {
        let uniform = if values.len() >= 2 {
            let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
            let regular = values
                .iter()
                .enumerate()
                .all(|(i, v)| (values[0] + i as f64 * step - v).abs() <= 1e-12 * step.max(v.abs()));
            regular.then_some((values[0], step))
        } else {
            None
        };
        Axis { values, uniform }
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn first(&self) -> f64 {
        self.values[0]
    }

    pub(crate) fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub(crate) fn min_step(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Cell index `j` and weight `w` such that `x ≈ (1-w)·v[j] + w·v[j+1]`.
    /// `x` is clamped to the axis range. Singleton axes return `(0, 0.0)`.
    #[inline]
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len();
        if n == 1 {
            return (0, 0.0);
        }
        let x = x.clamp(self.values[0], self.values[n - 1]);
        let j = match self.uniform {
            Some((start, step)) => (((x - start) / step) as usize).min(n - 2),
            None => self.values.partition_point(|v| *v <= x).clamp(1, n - 1) - 1,
        };
        let (a, b) = (self.values[j], self.values[j + 1]);
        (j, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Site {
    pub(crate) i: usize,
    pub(crate) i1: usize,
    pub(crate) wi: f64,
    o: usize,
    o1: usize,
    wo: f64,
}

/// Normalized reflected/scattered energy over (incidence, observation,
/// frequency). Values are stored frequency-major: `[f][θi][θo]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialProfile {
    name: String,
    kind: ProfileKind,
    incidence: Axis,
    observation: Axis,
    frequency: Axis,
    values: Vec<f64>,
}

impl MaterialProfile {
    /// Builds a profile from axes and a `[f][θi][θo]` value block.
    pub fn from_grid(
        name: impl Into<String>,
        kind: ProfileKind,
        incidence_deg: Vec<f64>,
        observation_deg: Vec<f64>,
        frequency_ghz: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        for (label, axis) in [
            ("incidence", &incidence_deg),
            ("observation", &observation_deg),
            ("frequency", &frequency_ghz),
        ] {
            if axis.is_empty() || axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidProfile(format!(
                    "`{name}`: {label} axis must be non-empty and strictly increasing"
                )));
            }
            if kind == ProfileKind::Measured && axis.len() < 2 {
                return Err(Error::InvalidProfile(format!(
                    "`{name}`: measured profiles need at least 2 {label} samples"
                )));
            }
        }
        for axis in [&incidence_deg, &observation_deg] {
            if axis[0] < 0.0 || axis[axis.len() - 1] > 90.0 {
                return Err(Error::InvalidProfile(format!(
                    "`{name}`: angles must lie in [0, 90] degrees"
                )));
            }
        }
        if frequency_ghz[0] <= 0.0 {
            return Err(Error::InvalidProfile(format!("`{name}`: frequencies must be positive")));
        }
        let expected = incidence_deg.len() * observation_deg.len() * frequency_ghz.len();
        if values.len() != expected {
            return Err(Error::InvalidProfile(format!(
                "`{name}`: expected {expected} samples, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidProfile(format!(
                "`{name}`: energy fraction {v} outside [0, 1]"
            )));
        }
        Ok(MaterialProfile {
            name,
            kind,
            incidence: Axis::new(incidence_deg),
            observation: Axis::new(observation_deg),
            frequency: Axis::new(frequency_ghz),
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The same data under another name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn incidence_deg(&self) -> &[f64] {
        self.incidence.values()
    }

    pub fn observation_deg(&self) -> &[f64] {
        self.observation.values()
    }

    pub fn frequency_ghz(&self) -> &[f64] {
        self.frequency.values()
    }

    pub fn sample_count(&self) -> usize {
        self.values.len()
    }

    pub fn frequency_span_ghz(&self) -> (f64, f64) {
        (self.frequency.first(), self.frequency.last())
    }

    pub(crate) fn incidence_axis(&self) -> &Axis {
        &self.incidence
    }

    pub(crate) fn observation_axis(&self) -> &Axis {
        &self.observation
    }

    pub(crate) fn frequency_axis(&self) -> &Axis {
        &self.frequency
    }

    /// Stored sample at grid indices.
    pub fn sample(&self, freq_idx: usize, inc_idx: usize, obs_idx: usize) -> f64 {
        self.values[self.flat(freq_idx, inc_idx, obs_idx)]
    }

    #[inline]
    fn flat(&self, f: usize, i: usize, o: usize) -> usize {
        (f * self.incidence.len() + i) * self.observation.len() + o
    }

    /// Bilinear lookup in angle at one stored frequency. Angles are clamped to
    /// the sampled range.
    #[inline]
    pub(crate) fn slice_value(&self, freq_idx: usize, incidence_deg: f64, observation_deg: f64) -> f64 {
        self.slice_at(freq_idx, &self.site(incidence_deg, observation_deg))
    }

    /// Interpolation cell for an angle pair, reusable across frequencies.
    #[inline]
    pub(crate) fn site(&self, incidence_deg: f64, observation_deg: f64) -> Site {
        let (i, wi) = self.incidence.locate(incidence_deg);
        let (o, wo) = self.observation.locate(observation_deg);
        Site {
            i,
            i1: (i + 1).min(self.incidence.len() - 1),
            wi,
            o,
            o1: (o + 1).min(self.observation.len() - 1),
            wo,
        }
    }

    #[inline]
    pub(crate) fn slice_at(&self, freq_idx: usize, site: &Site) -> f64 {
        let base = freq_idx * self.incidence.len();
        let row = |ii: usize| {
            let r = (base + ii) * self.observation.len();
            let a = self.values[r + site.o];
            a + site.wo * (self.values[r + site.o1] - a)
        };
        let a = row(site.i);
        a + site.wi * (row(site.i1) - a)
    }

    /// Iterates `(θi, θo, f, E)` in CSV row order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let (ni, no, nf) = (self.incidence.len(), self.observation.len(), self.frequency.len());
        (0..ni).flat_map(move |i| {
            (0..no).flat_map(move |o| {
                (0..nf).map(move |f| {
                    (
                        self.incidence.values()[i],
                        self.observation.values()[o],
                        self.frequency.values()[f],
                        self.sample(f, i, o),
                    )
                })
            })
        })
    }

    /// Serializes in the material CSV schema.
    pub fn to_csv(&self) -> String {
        let mut out = MATERIAL_CSV_HEADER.join(",");
        out.push('\n');
        for (i, o, f, e) in self.samples() {
            out.push_str(&format!("{i},{o},{f},{e:.6e}\n"));
        }
        out
    }
}

/// Trilinear interpolation of a profile. Angles must lie in [0, 90] degrees
/// (they are then clamped to the sampled angular range); the frequency must
/// lie inside the sampled span.
pub fn energy_fraction(
    profile: &MaterialProfile,
    incidence_deg: f64,
    observation_deg: f64,
    frequency_ghz: f64,
) -> Result<f64> {
    for a in [incidence_deg, observation_deg] {
        if !(0.0..=90.0).contains(&a) {
            return Err(Error::InvalidArgument(format!("angle {a} deg outside [0, 90]")));
        }
    }
    let (lo, hi) = profile.frequency_span_ghz();
    if !(frequency_ghz >= lo && frequency_ghz <= hi) {
        return Err(Error::OutOfBand {
            frequency_ghz,
            min_ghz: lo,
            max_ghz: hi,
        });
    }
    let (f, wf) = profile.frequency.locate(frequency_ghz);
    let a = profile.slice_value(f, incidence_deg, observation_deg);
    if wf == 0.0 {
        return Ok(a);
    }
    let b = profile.slice_value(f + 1, incidence_deg, observation_deg);
    Ok(a + wf * (b - a))
}

fn row_error(row: usize, message: impl Into<String>) -> Error {
    Error::Row {
        row,
        message: message.into(),
    }
}

/// Parses a measured profile from the material CSV schema. Row numbers in
/// errors are 1-based file line numbers (the header is row 1).
pub fn load_profile(name: &str, source: impl Read) -> Result<MaterialProfile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(source);
    let header = reader.headers().map_err(|e| row_error(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != MATERIAL_CSV_HEADER {
        return Err(row_error(
            1,
            format!(
                "expected header `{}`, found `{}`",
                MATERIAL_CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let key = |x: f64| x.to_bits();
    let mut cells: BTreeMap<(u64, u64, u64), (usize, f64)> = BTreeMap::new();
    let mut inc = BTreeMap::new();
    let mut obs = BTreeMap::new();
    let mut freq = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            row_error(row, format!("malformed row: {e}"))
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 4 {
            return Err(row_error(row, format!("expected 4 fields, found {}", record.len())));
        }
        let mut vals = [0.0; 4];
        for (k, field) in record.iter().enumerate() {
            vals[k] = field.parse::<f64>().map_err(|_| {
                row_error(row, format!("cannot parse {} `{field}`", MATERIAL_CSV_HEADER[k]))
            })?;
            if !vals[k].is_finite() {
                return Err(row_error(row, format!("{} is not finite", MATERIAL_CSV_HEADER[k])));
            }
        }
        let [ti, to, f, e] = vals;
        if !(0.0..=90.0).contains(&ti) || !(0.0..=90.0).contains(&to) {
            return Err(row_error(row, "angles must lie in [0, 90] degrees"));
        }
        if f <= 0.0 {
            return Err(row_error(row, "frequency_ghz must be positive"));
        }
        if !(0.0..=1.0).contains(&e) {
            return Err(row_error(row, format!("energy_fraction {e} outside [0, 1]")));
        }
        // Normalise -0.0 so it keys with 0.0.
        let (ti, to, f) = (ti + 0.0, to + 0.0, f + 0.0);
        inc.insert(key(ti), ti);
        obs.insert(key(to), to);
        freq.insert(key(f), f);
        if let Some((first, _)) = cells.insert((key(f), key(ti), key(to)), (row, e)) {
            return Err(row_error(
                row,
                format!("duplicate grid point ({ti}, {to}, {f}) first seen on row {first}"),
            ));
        }
    }

    let sorted = |m: BTreeMap<u64, f64>| {
        let mut v: Vec<f64> = m.into_values().collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (inc, obs, freq) = (sorted(inc), sorted(obs), sorted(freq));
    let mut values = Vec::with_capacity(inc.len() * obs.len() * freq.len());
    for &f in &freq {
        for &ti in &inc {
            for &to in &obs {
                match cells.get(&(key(f), key(ti), key(to))) {
                    Some(&(_, e)) => values.push(e),
                    None => {
                        return Err(Error::InvalidProfile(format!(
                            "`{name}`: non-rectangular grid, no sample for incidence {ti}, observation {to}, frequency {f}"
                        )))
                    }
                }
            }
        }
    }
    MaterialProfile::from_grid(name, ProfileKind::Measured, inc, obs, freq, values)
}

/// Loads a measured profile from a file; the profile is named after the file stem.
pub fn load_profile_path(path: &Path) -> Result<MaterialProfile> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "measured".into());
    load_profile(&name, std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "incidence_deg,observation_deg,frequency_ghz,energy_fraction\n";

    fn cube_csv() -> String {
        let mut s = HEADER.to_string();
        for (ti, to, f, e) in [
            (0, 0, 100, 0.1),
            (0, 0, 200, 0.2),
            (0, 90, 100, 0.3),
            (0, 90, 200, 0.4),
            (90, 0, 100, 0.5),
            (90, 0, 200, 0.6),
            (90, 90, 100, 0.7),
            (90, 90, 200, 0.8),
        ] {
            s.push_str(&format!("{ti},{to},{f},{e}\n"));
        }
        s
    }

    #[test]
    fn parses_two_by_two_by_two() {
        let p = load_profile("cube", cube_csv().as_bytes()).unwrap();
        assert_eq!(p.sample_count(), 8);
        assert_eq!(p.kind(), ProfileKind::Measured);
        assert_eq!(energy_fraction(&p, 90.0, 0.0, 200.0).unwrap(), 0.6);
    }

    #[test]
    fn out_of_range_energy_names_row() {
        let csv = cube_csv().replace("90,90,200,0.8", "90,90,200,1.2");
        let err = load_profile("bad", csv.as_bytes()).unwrap_err();
        match err {
            Error::Row { row, message } => {
                assert_eq!(row, 9);
                assert!(message.contains("1.2"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_cell_is_non_rectangular() {
        let csv: String = cube_csv().lines().filter(|l| *l != "0,90,200,0.4").map(|l| format!("{l}\n")).collect();
        let err = load_profile("holey", csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile(ref m) if m.contains("non-rectangular")), "{err}");
    }

    #[test]
    fn duplicate_point_rejected() {
        let csv = cube_csv() + "0,0,100,0.1\n";
        let err = load_profile("dup", csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Row { row: 10, ref message } if message.contains("duplicate")), "{err}");
    }

    #[test]
    fn malformed_rows_rejected() {
        let csv = cube_csv() + "0,0,abc,0.1\n";
        assert!(matches!(load_profile("m", csv.as_bytes()), Err(Error::Row { row: 10, .. })));
        let csv = cube_csv() + "0,0\n";
        assert!(matches!(load_profile("m", csv.as_bytes()), Err(Error::Row { .. })));
        let csv = cube_csv().replacen("energy_fraction", "energy", 1);
        assert!(matches!(load_profile("m", csv.as_bytes()), Err(Error::Row { row: 1, .. })));
    }

    #[test]
    fn grid_point_query_is_identity() {
        let p = load_profile("cube", cube_csv().as_bytes()).unwrap();
        for (ti, to, f, e) in p.samples().collect::<Vec<_>>() {
            assert_eq!(energy_fraction(&p, ti, to, f).unwrap(), e);
        }
    }

    #[test]
    fn frequency_midpoint() {
        let p = MaterialProfile::from_grid(
            "mid",
            ProfileKind::Measured,
            vec![0.0, 90.0],
            vec![0.0, 90.0],
            vec![100.0, 200.0],
            vec![0.2, 0.2, 0.2, 0.2, 0.4, 0.4, 0.4, 0.4],
        )
        .unwrap();
        assert!((energy_fraction(&p, 0.0, 90.0, 150.0).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn out_of_band_query() {
        let p = load_profile("cube", cube_csv().as_bytes()).unwrap();
        assert!(matches!(energy_fraction(&p, 10.0, 10.0, 250.0), Err(Error::OutOfBand { .. })));
        assert!(energy_fraction(&p, 95.0, 10.0, 150.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = load_profile("cube", cube_csv().as_bytes()).unwrap();
        let again = load_profile("cube", p.to_csv().as_bytes()).unwrap();
        assert_eq!(p, again);
    }
}
