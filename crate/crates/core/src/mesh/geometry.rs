use super::Point;

#[inline]
pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    let d = sub(a, b);
    dot3(&d, &d).sqrt()
}

/// Signed volume; positive when `(p1-p0, p2-p0, p3-p0)` is right-handed.
pub fn tet_volume(p: &[Point; 4]) -> f64 {
    let a = sub(&p[1], &p[0]);
    let b = sub(&p[2], &p[0]);
    let c = sub(&p[3], &p[0]);
    dot3(&a, &cross(&b, &c)) / 6.0
}

/// The six interior dihedral angles (radians).
pub fn dihedral_angles(p: &[Point; 4]) -> [f64; 6] {
    // outward-agnostic normal of the face opposite vertex i
    let normal = |i: usize| {
        let f: Vec<&Point> = (0..4).filter(|&j| j != i).map(|j| &p[j]).collect();
        let n = cross(&sub(f[1], f[0]), &sub(f[2], f[0]));
        // orient towards the opposite vertex, i.e. inward
        let s = if dot3(&n, &sub(&p[i], f[0])) > 0.0 { 1.0 } else { -1.0 };
        let len = dot3(&n, &n).sqrt();
        [s * n[0] / len, s * n[1] / len, s * n[2] / len]
    };
    let n: Vec<Point> = (0..4).map(normal).collect();
    let mut out = [0.0; 6];
    let mut k = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            // angle along the edge shared by faces i and j
            out[k] = std::f64::consts::PI - dot3(&n[i], &n[j]).clamp(-1.0, 1.0).acos();
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_tet_dihedral() {
        let p = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        for a in dihedral_angles(&p) {
            assert!((a - (1.0f64 / 3.0).acos()).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_volume() {
        let p = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!((tet_volume(&p) - 1.0 / 6.0).abs() < 1e-16);
        // faces opposite vertices 1, 2, 3 are the coordinate planes
        for a in dihedral_angles(&p)[3..].iter() {
            assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
    }
}
