//! Quadrature on tetrahedra, expressed in barycentric coordinates with
//! weights normalised to sum to one (multiply by the element volume).

use crate::mesh::Point;

pub type Bary = [f64; 4];

const KEAST_A: f64 = 0.399_403_576_166_799_2;
const KEAST_B: f64 = 0.100_596_423_833_200_8;

/// Keast's 11-point rule, exact for polynomials of degree <= 4.
pub const KEAST4: [(Bary, f64); 11] = [
    ([0.25, 0.25, 0.25, 0.25], -444.0 / 5625.0),
    ([11.0 / 14.0, 1.0 / 14.0, 1.0 / 14.0, 1.0 / 14.0], 343.0 / 7500.0),
    ([1.0 / 14.0, 11.0 / 14.0, 1.0 / 14.0, 1.0 / 14.0], 343.0 / 7500.0),
    ([1.0 / 14.0, 1.0 / 14.0, 11.0 / 14.0, 1.0 / 14.0], 343.0 / 7500.0),
    ([1.0 / 14.0, 1.0 / 14.0, 1.0 / 14.0, 11.0 / 14.0], 343.0 / 7500.0),
    ([KEAST_A, KEAST_A, KEAST_B, KEAST_B], 56.0 / 375.0),
    ([KEAST_A, KEAST_B, KEAST_A, KEAST_B], 56.0 / 375.0),
    ([KEAST_A, KEAST_B, KEAST_B, KEAST_A], 56.0 / 375.0),
    ([KEAST_B, KEAST_A, KEAST_A, KEAST_B], 56.0 / 375.0),
    ([KEAST_B, KEAST_A, KEAST_B, KEAST_A], 56.0 / 375.0),
    ([KEAST_B, KEAST_B, KEAST_A, KEAST_A], 56.0 / 375.0),
];

/// How element integrals are evaluated.
#[derive(Clone, Copy)]
pub enum Integration<'a> {
    /// Degree-4 Keast rule.
    Keast,
    /// Recursive red subdivision (eight children) down to `depth` levels,
    /// descending only into sub-tets on which `detector` is not constant at
    /// the sample points. Keast rule on the leaves.
    Subdivided {
        depth: u32,
        detector: &'a (dyn Fn(&Point) -> f64 + Sync),
    },
}

#[inline]
pub fn to_physical(points: &[Point; 4], b: &Bary) -> Point {
    let mut x = [0.0; 3];
    for (p, &w) in points.iter().zip(b) {
        for d in 0..3 {
            x[d] += w * p[d];
        }
    }
    x
}

fn mid(a: &Bary, b: &Bary) -> Bary {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
        0.5 * (a[3] + b[3]),
    ]
}

/// The eight children of the red refinement of a tet given by its vertices.
pub(crate) fn red_children<T: Copy>(v: &[T; 4], mid: impl Fn(&T, &T) -> T) -> [[T; 4]; 8] {
    let m01 = mid(&v[0], &v[1]);
    let m02 = mid(&v[0], &v[2]);
    let m03 = mid(&v[0], &v[3]);
    let m12 = mid(&v[1], &v[2]);
    let m13 = mid(&v[1], &v[3]);
    let m23 = mid(&v[2], &v[3]);
    [
        [v[0], m01, m02, m03],
        [m01, v[1], m12, m13],
        [m02, m12, v[2], m23],
        [m03, m13, m23, v[3]],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]
}

/// Calls `f(bary, x, weight)` for every quadrature point of the element with
/// vertices `points` and volume `volume`; weights sum to `volume`.
pub fn for_each_point(
    points: &[Point; 4],
    volume: f64,
    integration: Integration<'_>,
    mut f: impl FnMut(&Bary, &Point, f64),
) {
    const CORNERS: [Bary; 4] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    match integration {
        Integration::Keast => keast_on(points, &CORNERS, volume, &mut f),
        Integration::Subdivided { depth, detector } => {
            subdivide(points, &CORNERS, volume, depth, detector, &mut f)
        }
    }
}

fn keast_on(points: &[Point; 4], sub: &[Bary; 4], volume: f64, f: &mut impl FnMut(&Bary, &Point, f64)) {
    for (q, w) in KEAST4.iter() {
        let mut b = [0.0; 4];
        for (k, &qk) in q.iter().enumerate() {
            for i in 0..4 {
                b[i] += qk * sub[k][i];
            }
        }
        let x = to_physical(points, &b);
        f(&b, &x, w * volume);
    }
}

fn subdivide(
    points: &[Point; 4],
    sub: &[Bary; 4],
    volume: f64,
    depth: u32,
    detector: &(dyn Fn(&Point) -> f64 + Sync),
    f: &mut impl FnMut(&Bary, &Point, f64),
) {
    if depth > 0 {
        let v0 = detector(&to_physical(points, &sub[0]));
        let mut cut = sub[1..]
            .iter()
            .any(|b| detector(&to_physical(points, b)) != v0);
        if !cut {
            cut = KEAST4.iter().any(|(q, _)| {
                let mut b = [0.0; 4];
                for (k, &qk) in q.iter().enumerate() {
                    for i in 0..4 {
                        b[i] += qk * sub[k][i];
                    }
                }
                detector(&to_physical(points, &b)) != v0
            });
        }
        if cut {
            for child in red_children(sub, mid) {
                subdivide(points, &child, volume / 8.0, depth - 1, detector, f);
            }
            return;
        }
    }
    keast_on(points, sub, volume, f);
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Tensor Gauss rule on the reference tet through the Duffy collapse, with
/// `n` points per direction; exact for degree <= 2n - 3.
pub fn duffy_rule(n: usize) -> Vec<(Bary, f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(w, ww) in &g {
                let x = u;
                let y = (1.0 - u) * v;
                let z = (1.0 - u) * (1.0 - v) * w;
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                // normalised by the reference volume 1/6
                out.push(([1.0 - x - y - z, x, y, z], 6.0 * wu * wv * ww * jac));
            }
        }
    }
    out
}
