use super::{Segment, Surface};
use crate::error::{Error, Result};

/// Number of cells of width `size` needed to cover `length`, tolerant of
/// floating-point noise in exact multiples (3.0 / 0.1 is 30.000000000000004).
pub(crate) fn cell_count(length: f64, size: f64) -> usize {
    let ratio = length / size;
    let n = (ratio * (1.0 - 1e-9)).ceil();
    (n as usize).max(1)
}

/// Splits a surface into a grid of small patches. The last row and column are
/// shrunk so the patches tile the surface exactly.
pub fn tessellate(surface: &Surface, segment_size: f64) -> Result<Vec<Segment>> {
    tessellate_indexed(surface, 0, segment_size)
}

pub(crate) fn tessellate_indexed(
    surface: &Surface,
    surface_index: usize,
    segment_size: f64,
) -> Result<Vec<Segment>> {
    if !(segment_size > 0.0) || !segment_size.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "segment size must be positive, got {segment_size}"
        )));
    }
    surface.validate()?;

    let len_u = surface.edge_u.norm();
    let len_v = surface.edge_v.norm();
    let nu = cell_count(len_u, segment_size);
    let nv = cell_count(len_v, segment_size);
    let normal = surface.normal();
    let area = surface.area();

    // Parameter-space breakpoints; the final one is pinned to 1 so edge
    // cells absorb the remainder.
    let breaks = |n: usize, len: f64| -> Vec<f64> {
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * segment_size / len).min(1.0)).collect();
        b.push(1.0);
        b
    };
    let bu = breaks(nu, len_u);
    let bv = breaks(nv, len_v);

    let mut segments = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        let (v0, v1) = (bv[j], bv[j + 1]);
        for i in 0..nu {
            let (u0, u1) = (bu[i], bu[i + 1]);
            let center = surface.corner
                + surface.edge_u * (0.5 * (u0 + u1))
                + surface.edge_v * (0.5 * (v0 + v1));
            segments.push(Segment {
                center,
                normal,
                area: area * (u1 - u0) * (v1 - v0),
                surface_id: surface_index,
                extent_u: len_u * (u1 - u0),
                extent_v: len_v * (v1 - v0),
            });
        }
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Vec3;

    fn square(side_u: f64, side_v: f64) -> Surface {
        Surface::new(
            "s",
            "test",
            Vec3::ZERO,
            Vec3::new(side_u, 0.0, 0.0),
            Vec3::new(0.0, side_v, 0.0),
            "concrete",
        )
    }

    #[test]
    fn unit_square_tenth() {
        let segs = tessellate(&square(1.0, 1.0), 0.1).unwrap();
        assert_eq!(segs.len(), 100);
        for s in &segs {
            assert!((s.area - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn wall_six_by_three() {
        let segs = tessellate(&square(6.0, 3.0), 0.05).unwrap();
        assert_eq!(segs.len(), 120 * 60);
    }

    #[test]
    fn shrunk_edges_conserve_area() {
        let segs = tessellate(&square(1.0, 1.0), 0.3).unwrap();
        assert_eq!(segs.len(), 16);
        // Summation oracle: 3 full cells of 0.3 plus a 0.1 remainder per axis.
        let mut expected = 0.0;
        for wu in [0.3, 0.3, 0.3, 0.1] {
            for wv in [0.3, 0.3, 0.3, 0.1] {
                expected += wu * wv;
            }
        }
        let total: f64 = segs.iter().map(|s| s.area).sum();
        assert!((total - expected).abs() < 1e-12);
        assert!((total - 1.0).abs() < 1e-9);
        let smallest = segs.iter().map(|s| s.area).fold(f64::INFINITY, f64::min);
        assert!((smallest - 0.01).abs() < 1e-12);
    }

    #[test]
    fn centers_on_plane() {
        let s = Surface::new(
            "tilted",
            "t",
            Vec3::new(1.0, 0.5, 0.2),
            Vec3::new(0.7, 0.3, 0.1),
            Vec3::new(-0.1, 0.4, 0.9),
            "glass",
        );
        let n = s.normal();
        for seg in tessellate(&s, 0.07).unwrap() {
            assert!((seg.center - s.corner).dot(n).abs() < 1e-12);
            assert!((seg.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_surface_rejected() {
        let s = Surface::new(
            "flat",
            "f",
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            "glass",
        );
        assert!(matches!(tessellate(&s, 0.1), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn non_positive_size_rejected() {
        assert!(tessellate(&square(1.0, 1.0), 0.0).is_err());
        assert!(tessellate(&square(1.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn exact_multiples_do_not_gain_a_sliver_row() {
        assert_eq!(cell_count(3.0, 0.1), 30);
        assert_eq!(cell_count(0.3, 0.1), 3);
        assert_eq!(cell_count(6.0, 0.05), 120);
        assert_eq!(cell_count(1.0, 0.3), 4);
    }
}
