//! Planar hulls, minimum-width slabs and principal directions.

use nalgebra::{DMatrix, SymmetricEigen};

pub type P2 = [f64; 2];

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull, counter-clockwise, without collinear vertices (monotone chain).
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &P2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Thinnest slab containing a planar point set: `offset <= normal . x <= offset + width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub normal: P2,
    pub offset: f64,
    pub width: f64,
}

/// Minimum width by rotating calipers over the hull edges.
pub fn min_width(points: &[P2]) -> Slab {
    let hull = convex_hull(points);
    match hull.len() {
        0 => Slab {
            normal: [1.0, 0.0],
            offset: 0.0,
            width: 0.0,
        },
        1 => Slab {
            normal: [1.0, 0.0],
            offset: hull[0][0],
            width: 0.0,
        },
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let normal = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
            slab_along(points, normal)
        }
        h => {
            let mut best: Option<Slab> = None;
            let mut far = 1;
            for i in 0..h {
                let (a, b) = (hull[i], hull[(i + 1) % h]);
                let area = |p: P2| cross(a, b, p).abs();
                if i == 0 {
                    far = 1;
                }
                while area(hull[(far + 1) % h]) > area(hull[far]) {
                    far = (far + 1) % h;
                }
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let width = area(hull[far]) / len;
                if best.is_none_or(|s| width < s.width) {
                    let normal = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
                    let s = slab_along(points, normal);
                    best = Some(Slab { width, ..s });
                }
            }
            best.expect("hull has edges")
        }
    }
}

/// Extent of `points` along the unit vector `normal`.
pub fn slab_along(points: &[P2], normal: P2) -> Slab {
    let proj = points.iter().map(|p| p[0] * normal[0] + p[1] * normal[1]);
    let (lo, hi) = proj.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Slab {
        normal,
        offset: lo,
        width: hi - lo,
    }
}

/// Unit eigenvector of the sample covariance with the smallest eigenvalue.
pub fn smallest_principal_direction(points: &[&[f64]]) -> Vec<f64> {
    let d = points[0].len();
    let m = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / m).collect();
    let cov = DMatrix::from_fn(d, d, |r, c| {
        points.iter().map(|p| (p[r] - mean[r]) * (p[c] - mean[c])).sum::<f64>() / m
    });
    let eig = SymmetricEigen::new(cov);
    let idx = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(idx);
    let norm = v.norm();
    v.iter().map(|x| x / norm).collect()
}

/// Projection of `p` onto `dir`.
pub fn dot(p: &[f64], dir: &[f64]) -> f64 {
    p.iter().zip(dir).map(|(a, b)| a * b).sum()
}
