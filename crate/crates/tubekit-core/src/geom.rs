//! Small dense vector/matrix helpers for low-dimensional Euclidean geometry.
//!
//! Everything here works on `&[f64]` slices so hot loops never allocate.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Volume of the unit m-ball, by the two-step recurrence.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(m - 2) * 2.0 * std::f64::consts::PI / m as f64,
    }
}

/// Surface measure of the direction quotient S^{m-1}/{±1}.
pub fn quotient_sphere_measure(m: usize) -> f64 {
    // |S^{m-1}| = m * omega_m, halved by the ±1 identification.
    m as f64 * unit_ball_volume(m) / 2.0
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `e`,
/// built from a Householder reflection mapping e1 to ±e. Deterministic.
pub fn orthonormal_complement(e: &[f64]) -> Vec<Vec<f64>> {
    let n = e.len();
    let s = if e[0] >= 0.0 { 1.0 } else { -1.0 };
    // v = e + s*e1; H(x) = x - 2 (v·x)/(v·v) v maps ±e1 to -(±)..., columns 2..n span e⊥.
    let mut v = e.to_vec();
    v[0] += s;
    let vv = dot(&v, &v);
    let mut basis = Vec::with_capacity(n - 1);
    for j in 1..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        let coef = 2.0 * v[j] / vv;
        for i in 0..n {
            col[i] -= coef * v[i];
        }
        basis.push(col);
    }
    basis
}

/// Minimum distance between two segments [a0,a1], [b0,b1] in R^n.
pub fn segment_distance(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> f64 {
    let u = sub(a1, a0);
    let v = sub(b1, b0);
    let w = sub(a0, b0);
    let a = dot(&u, &u);
    let b = dot(&u, &v);
    let c = dot(&v, &v);
    let d = dot(&u, &w);
    let e = dot(&v, &w);
    let den = a * c - b * b;
    let mut s = if den > 1e-14 * a.max(c).max(1e-300) {
        (b * e - c * d) / den
    } else {
        0.0 // near-parallel: fix s and project
    };
    s = s.clamp(0.0, 1.0);
    let mut t = if c > 0.0 {
        ((b * s + e) / c).clamp(0.0, 1.0)
    } else {
        0.0
    };
    t = t.clamp(0.0, 1.0);
    s = if a > 0.0 {
        ((b * t - d) / a).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut p = a0.to_vec();
    axpy(&mut p, s, &u);
    let mut q = b0.to_vec();
    axpy(&mut q, t, &v);
    dist(&p, &q)
}

/// Area of a convex polygon given in order (shoelace, absolute value).
pub fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let j = (i + 1) % pts.len();
        acc += pts[i][0] * pts[j][1] - pts[j][0] * pts[i][1];
    }
    acc.abs() / 2.0
}

/// Clip a convex polygon by the half-plane { x : n·x <= off }.
fn clip_halfplane(poly: &[[f64; 2]], nx: f64, ny: f64, off: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let m = poly.len();
    for i in 0..m {
        let p = poly[i];
        let q = poly[(i + 1) % m];
        let dp = nx * p[0] + ny * p[1] - off;
        let dq = nx * q[0] + ny * q[1] - off;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Exact intersection area of two convex polygons (Sutherland–Hodgman).
/// The clip polygon must be convex and given in counter-clockwise order.
pub fn convex_intersection_area(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> f64 {
    let mut poly = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if poly.is_empty() {
            return 0.0;
        }
        let p = clip[i];
        let q = clip[(i + 1) % m];
        // inward normal for CCW clip polygon: left of edge pq
        let ex = q[0] - p[0];
        let ey = q[1] - p[1];
        // half-plane: (x-p) x e >= 0  <=>  -ey*x + ex*y <= -ey*px + ex*py
        poly = clip_halfplane(&poly, ey, -ex, ey * p[0] - ex * p[1]);
    }
    polygon_area(&poly)
}

/// Volume of a spherical cap of the m-ball: { x in B_m(R) : x_1 >= R - h }.
/// Deterministic adaptive Simpson quadrature on the slice integral.
pub fn ball_cap_volume(m: usize, radius: f64, height: f64) -> f64 {
    let h = height.clamp(0.0, 2.0 * radius);
    if h <= 0.0 {
        return 0.0;
    }
    if m == 1 {
        return h.min(2.0 * radius);
    }
    let slice = unit_ball_volume(m - 1);
    let f = |x: f64| slice * (radius * radius - x * x).max(0.0).powf((m as f64 - 1.0) / 2.0);
    simpson(&f, radius - h, radius, 4096)
}

/// Intersection volume of two m-balls with radii r1, r2 at center distance d (the "lens").
pub fn ball_lens_volume(m: usize, r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d + r1 <= r2 {
        return unit_ball_volume(m) * r1.powi(m as i32);
    }
    if d + r2 <= r1 {
        return unit_ball_volume(m) * r2.powi(m as i32);
    }
    if m == 1 {
        return (r1 + r2 - d).min(2.0 * r1).min(2.0 * r2);
    }
    // radical coordinate along the center line
    let x = (d * d - r2 * r2 + r1 * r1) / (2.0 * d);
    ball_cap_volume(m, r1, r1 - x) + ball_cap_volume(m, r2, r2 - (d - x))
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Overlap length of the intervals [c1-h1/2, c1+h1/2] and [c2-h2/2, c2+h2/2].
pub fn interval_overlap(c1: f64, h1: f64, c2: f64, h2: f64) -> f64 {
    let lo = (c1 - h1 / 2.0).max(c2 - h2 / 2.0);
    let hi = (c1 + h1 / 2.0).min(c2 + h2 / 2.0);
    (hi - lo).max(0.0)
}

/// 2-D convex hull (Andrew monotone chain), returns hull points in CCW order.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Diameter of a 2-D point set via its hull.
pub fn diameter_2d(points: &[[f64; 2]]) -> f64 {
    let hull = convex_hull_2d(points);
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in (i + 1)..hull.len() {
            let dx = hull[i][0] - hull[j][0];
            let dy = hull[i][1] - hull[j][1];
            best = best.max((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Eigen-decomposition of a small symmetric matrix (Jacobi sweeps).
/// Returns (eigenvalues, eigenvectors as rows), sorted by descending eigenvalue.
pub fn symmetric_eigen(mat: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (vals, vecs)
}

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
