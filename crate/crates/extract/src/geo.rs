//! Small-distance geometry on a local equirectangular projection; accurate
//! to well under a metre at the tens-of-metres scale used for matching.

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Projects `(lat, lon)` to metres east/north of `origin`.
fn project(origin: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let mut dlon = p.1 - origin.1;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    (dlon * k * origin.0.to_radians().cos(), (p.0 - origin.0) * k)
}

/// Distance in metres from `p` to the segment `a`–`b`, all `(lat, lon)`.
pub fn point_segment_distance_m(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ax, ay) = project(p, a);
    let (bx, by) = project(p, b);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    (cx * cx + cy * cy).sqrt()
}

/// Distance in metres from `p` to a polyline; a single vertex counts as a
/// point. `None` for an empty polyline.
pub fn point_polyline_distance_m(p: (f64, f64), polyline: &[[f64; 2]]) -> Option<f64> {
    match polyline {
        [] => None,
        [only] => Some(point_segment_distance_m(p, (only[0], only[1]), (only[0], only[1]))),
        _ => polyline
            .windows(2)
            .map(|w| point_segment_distance_m(p, (w[0][0], w[0][1]), (w[1][0], w[1][1])))
            .min_by(f64::total_cmp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // one degree of latitude on the mean sphere
    const DEG_M: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

    #[test]
    fn north_offset() {
        let d = point_segment_distance_m((0.0001, 0.0), (0.0, -1.0), (0.0, 1.0));
        assert!((d - 1e-4 * DEG_M).abs() < 1e-6);
    }

    #[test]
    fn beyond_segment_end_measures_to_endpoint() {
        // 3-4-5 triangle in metres at the equator
        let m = 1.0 / DEG_M;
        let d = point_segment_distance_m((4.0 * m, 3.0 * m), (0.0, 0.0), (0.0, -10.0 * m));
        assert!((d - 5.0).abs() < 1e-6);
    }

    #[test]
    fn longitude_shrinks_with_latitude() {
        let d = point_segment_distance_m((60.0, 0.0), (60.0, 0.001), (60.0, 0.001));
        assert!((d - 0.001 * DEG_M * 0.5).abs() < 1e-3);
    }

    #[test]
    fn polyline_takes_nearest_segment() {
        let line = [[0.0, 0.0], [0.0, 0.01], [0.01, 0.01]];
        let d = point_polyline_distance_m((0.005, 0.0101), &line).unwrap();
        assert!(d < 0.0002 * DEG_M);
        assert!(point_polyline_distance_m((0.0, 0.0), &[]).is_none());
        assert_eq!(point_polyline_distance_m((0.0, 0.0), &[[0.0, 0.0]]), Some(0.0));
    }

    #[test]
    fn antimeridian_wraps() {
        let d = point_segment_distance_m((0.0, 179.9999), (0.0, -179.9999), (0.0, -179.9999));
        assert!((d - 0.0002 * DEG_M).abs() < 1e-3);
    }
}
