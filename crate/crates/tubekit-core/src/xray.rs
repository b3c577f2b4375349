//! Discretized X-ray transform over the line space Ω_m and the convexity
//! index c(E) = 2/(m(m+1)|E|²) · ∫_Ω |E_ℓ|^{m+1}.
//!
//! Lines are sampled from the product measure on S^{m-1}/{±1} × ξ^⊥;
//! section lengths |E_ℓ| are computed by exact cell traversal of the voxel
//! grid, so the only stochastic error is the Monte Carlo one, reported as a
//! 95% confidence half-width.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Kahan};
use crate::rng::{block_rng, unit_ball, unit_sphere, BLOCK};
use crate::voxel::VoxelSet;

/// A line ℓ ∈ Ω_m as (direction, offset in ξ^⊥) plus its quadrature weight.
#[derive(Debug, Clone)]
pub struct LineSample {
    /// Unit direction (canonical representative of {±ξ}).
    pub xi: Vec<f64>,
    /// Offset point with offset·ξ = 0; the line is { offset + t·ξ }.
    pub offset: Vec<f64>,
    /// Weight such that the weights of a budget sum to the sampled window's measure.
    pub weight: f64,
}

/// Exact length of E ∩ ℓ for a voxel set: every traversed active cell
/// contributes its chord length.
pub fn xray_line(e: &VoxelSet, line: &LineSample) -> f64 {
    let boxes = e.active_boxes();
    xray_line_in_boxes(e, line, &boxes)
}

/// Same as [`xray_line`] with the support boxes precomputed by the caller
/// (they only depend on the mask, so estimators hoist them out of the loop).
pub fn xray_line_in_boxes(
    e: &VoxelSet,
    line: &LineSample,
    boxes: &[(Vec<f64>, Vec<f64>)],
) -> f64 {
    let mut total = 0.0;
    for (lo, hi) in boxes {
        total += traverse_box(e, &line.offset, &line.xi, lo, hi);
    }
    total
}

/// Amanatides–Woo traversal of the grid clipped to one support box.
fn traverse_box(e: &VoxelSet, p0: &[f64], xi: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let m = e.m;
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..m {
        if xi[i].abs() < 1e-15 {
            if p0[i] < lo[i] || p0[i] > hi[i] {
                return 0.0;
            }
        } else {
            let a = (lo[i] - p0[i]) / xi[i];
            let b = (hi[i] - p0[i]) / xi[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t0 >= t1 {
        return 0.0;
    }
    // nudge inside so the starting cell is well defined
    let eps = 1e-12 * (1.0 + t0.abs().max(t1.abs()));
    let start = t0 + eps;
    let mut cell = [0i64; 3];
    for i in 0..m {
        let x = p0[i] + start * xi[i];
        let c = ((x - e.origin[i]) / e.h).floor() as i64;
        cell[i] = c.clamp(0, e.dims[i] as i64 - 1);
    }
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let mut step = [0i64; 3];
    for i in 0..m {
        if xi[i] > 1e-15 {
            step[i] = 1;
            let next = e.origin[i] + (cell[i] + 1) as f64 * e.h;
            t_max[i] = (next - p0[i]) / xi[i];
            t_delta[i] = e.h / xi[i];
        } else if xi[i] < -1e-15 {
            step[i] = -1;
            let next = e.origin[i] + cell[i] as f64 * e.h;
            t_max[i] = (next - p0[i]) / xi[i];
            t_delta[i] = -e.h / xi[i];
        }
    }
    let mut t_cur = t0;
    let mut total = 0.0;
    let mut idx = [0usize; 3];
    loop {
        let mut axis = 0;
        for i in 1..m {
            if t_max[i] < t_max[axis] {
                axis = i;
            }
        }
        let t_exit = t_max[axis].min(t1);
        if t_exit > t_cur {
            for i in 0..m {
                idx[i] = cell[i] as usize;
            }
            if e.get_index(&idx[..m]) {
                total += t_exit - t_cur;
            }
            t_cur = t_exit;
        }
        if t_max[axis] >= t1 {
            break;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= e.dims[axis] as i64 {
            break;
        }
        t_max[axis] += t_delta[axis];
    }
    total
}

/// Convexity index report; `index` recomputes exactly from its own fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub index: f64,
    pub abs_error_95: f64,
    pub line_samples: u64,
    pub volume: f64,
    /// Estimate of ∫_Ω |E_ℓ|^{m+1}.
    pub power_integral: f64,
}

/// Geometry of the sampled line window around the support.
struct LineWindow {
    center: Vec<f64>,
    radius: f64,
    /// product measure of the window: |S^{m-1}/±| · ω_{m-1} R^{m-1}
    total_measure: f64,
}

fn line_window(e: &VoxelSet) -> Result<LineWindow> {
    let (lo, hi) = e
        .active_bbox()
        .ok_or_else(|| Error::EmptySet("line sampling over an empty set".into()))?;
    let m = e.m;
    let center: Vec<f64> = (0..m).map(|i| (lo[i] + hi[i]) / 2.0).collect();
    let radius = (0..m)
        .map(|i| (hi[i] - lo[i]) / 2.0)
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        + e.h;
    let total_measure = geom::quotient_sphere_measure(m)
        * geom::unit_ball_volume(m - 1)
        * radius.powi(m as i32 - 1);
    Ok(LineWindow {
        center,
        radius,
        total_measure,
    })
}

/// Draw one line uniformly from the window's product measure (weight filled
/// by the caller as total_measure / budget).
fn sample_line<R: Rng>(rng: &mut R, w: &LineWindow, m: usize) -> LineSample {
    let mut xi = unit_sphere(rng, m);
    for x in xi.iter() {
        if x.abs() > 1e-12 {
            if *x < 0.0 {
                for y in xi.iter_mut() {
                    *y = -*y;
                }
            }
            break;
        }
    }
    let basis = geom::orthonormal_complement(&xi);
    let u = unit_ball(rng, m - 1);
    let mut q = w.center.clone();
    for (j, b) in basis.iter().enumerate() {
        geom::axpy(&mut q, u[j] * w.radius, b);
    }
    let s = geom::dot(&q, &xi);
    for i in 0..m {
        q[i] -= s * xi[i];
    }
    LineSample {
        xi,
        offset: q,
        weight: 0.0,
    }
}

/// Monte Carlo estimate of ∫_Ω |E_ℓ|^p with a 95% half-width; deterministic
/// for a fixed seed regardless of thread scheduling (pre-partitioned blocks).
fn power_integral(e: &VoxelSet, p: f64, budget: u64, seed: u64) -> Result<(f64, f64, u64)> {
    let w = line_window(e)?;
    let m = e.m;
    let boxes = e.active_boxes();
    let blocks = budget.div_ceil(BLOCK).max(1);
    let samples = blocks * BLOCK;
    let partials: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, 0x11ae, b);
            let mut s = Kahan::default();
            let mut s2 = Kahan::default();
            for _ in 0..BLOCK {
                let line = sample_line(&mut rng, &w, m);
                let chord = xray_line_in_boxes(e, &line, &boxes);
                let g = chord.powf(p);
                s.add(g);
                s2.add(g * g);
            }
            (s.value(), s2.value())
        })
        .collect();
    let mut sum = Kahan::default();
    let mut sum2 = Kahan::default();
    for (a, b) in partials {
        sum.add(a);
        sum2.add(b);
    }
    let k = samples as f64;
    let mean = sum.value() / k;
    let var = (sum2.value() / k - mean * mean).max(0.0);
    let estimate = w.total_measure * mean;
    let err95 = 1.96 * w.total_measure * (var / k).sqrt();
    Ok((estimate, err95, samples))
}

/// Convexity index of a voxel set with Monte Carlo confidence bound.
///
/// Rejected for m = 1 (the index does not measure convexity there) and for
/// empty sets (the normalization is undefined).
pub fn convexity_index(e: &VoxelSet, budget: u64, seed: u64) -> Result<ConvexityReport> {
    if e.m < 2 {
        return Err(Error::UnsupportedDimension {
            dim: e.m,
            why: "the convexity index is undefined for m = 1".into(),
        });
    }
    if e.is_empty() {
        return Err(Error::EmptySet("convexity index of an empty set".into()));
    }
    let m = e.m as f64;
    let vol = e.volume();
    let (integral, err, samples) = power_integral(e, m + 1.0, budget, seed)?;
    let scale = 2.0 / (m * (m + 1.0) * vol * vol);
    Ok(ConvexityReport {
        index: scale * integral,
        abs_error_95: scale * err,
        line_samples: samples,
        volume: vol,
        power_integral: integral,
    })
}

/// Ren identity check: ∫|E_ℓ|^{m+1} against m(m+1)|E|²/2.
/// Returns (lhs estimate, rhs, ratio).
pub fn ren_identity_check(e: &VoxelSet, budget: u64, seed: u64) -> Result<(f64, f64, f64)> {
    if e.m < 2 {
        return Err(Error::UnsupportedDimension {
            dim: e.m,
            why: "the Ren identity needs m >= 2".into(),
        });
    }
    let m = e.m as f64;
    let (lhs, _err, _) = power_integral(e, m + 1.0, budget, seed)?;
    let rhs = m * (m + 1.0) / 2.0 * e.volume() * e.volume();
    Ok((lhs, rhs, lhs / rhs))
}

// ---------------------------------------------------------------------------
// Affine maps
// ---------------------------------------------------------------------------

/// A dense affine map x ↦ Lx + t, m <= 3.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl AffineMap {
    pub fn identity(m: usize) -> Self {
        AffineMap {
            linear: (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            translation: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| geom::dot(&self.linear[i], x) + self.translation[i])
            .collect()
    }

    pub fn det(&self) -> f64 {
        let l = &self.linear;
        match self.dim() {
            1 => l[0][0],
            2 => l[0][0] * l[1][1] - l[0][1] * l[1][0],
            3 => {
                l[0][0] * (l[1][1] * l[2][2] - l[1][2] * l[2][1])
                    - l[0][1] * (l[1][0] * l[2][2] - l[1][2] * l[2][0])
                    + l[0][2] * (l[1][0] * l[2][1] - l[1][1] * l[2][0])
            }
            _ => unreachable!("affine maps limited to m <= 3"),
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let m = self.dim();
        let mut a: Vec<Vec<f64>> = self
            .linear
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            if a[pivot][col].abs() < 1e-12 {
                return Err(Error::InvalidGeometry("singular affine map".into()));
            }
            a.swap(col, pivot);
            let p = a[col][col];
            for x in a[col].iter_mut() {
                *x /= p;
            }
            for i in 0..m {
                if i != col {
                    let f = a[i][col];
                    for j in 0..2 * m {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
        let linear: Vec<Vec<f64>> = a.iter().map(|r| r[m..].to_vec()).collect();
        let translation = (0..m)
            .map(|i| -geom::dot(&linear[i], &self.translation))
            .collect();
        Ok(AffineMap {
            linear,
            translation,
        })
    }
}

/// Revoxelizes A(E) on a grid of comparable cell count and reports both
/// convexity indices; singular maps are rejected.
pub fn affine_invariance_check(
    e: &VoxelSet,
    a: &AffineMap,
    budget: u64,
    seed: u64,
) -> Result<(ConvexityReport, ConvexityReport)> {
    if a.dim() != e.m {
        return Err(Error::DimensionMismatch {
            expected: e.m,
            got: a.dim(),
        });
    }
    let det = a.det();
    if det.abs() < 1e-12 {
        return Err(Error::InvalidGeometry("singular affine map".into()));
    }
    let inv = a.inverse()?;
    let (lo, hi) = e
        .active_bbox()
        .ok_or_else(|| Error::EmptySet("affine check on empty set".into()))?;
    let m = e.m;
    let mut img_lo = vec![f64::INFINITY; m];
    let mut img_hi = vec![f64::NEG_INFINITY; m];
    for mask in 0..(1usize << m) {
        let corner: Vec<f64> = (0..m)
            .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
            .collect();
        let y = a.apply(&corner);
        for i in 0..m {
            img_lo[i] = img_lo[i].min(y[i]);
            img_hi[i] = img_hi[i].max(y[i]);
        }
    }
    // cell size scaled by the smallest singular value so the squeezed
    // direction keeps the original resolution (thin images otherwise pick up
    // a downward staircase bias that dwarfs the Monte Carlo error)
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = (0..m).map(|k| a.linear[k][i] * a.linear[k][j]).sum();
        }
    }
    let (eigs, _) = geom::symmetric_eigen(&gram);
    let s_min = eigs
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .sqrt();
    let h2 = e.h * (s_min / 2.0).max(det.abs().powf(1.0 / m as f64) / 64.0);
    for i in 0..m {
        img_lo[i] -= h2;
        img_hi[i] += h2;
    }
    let cells: f64 = (0..m).map(|i| (img_hi[i] - img_lo[i]) / h2).product();
    if cells > 2e8 {
        return Err(Error::PreconditionFailed(format!(
            "affine image would need {cells:.2e} cells"
        )));
    }
    let image = VoxelSet::from_fn(&img_lo, &img_hi, h2, |c| e.contains_point(&inv.apply(c)))?;
    let r1 = convexity_index(e, budget, seed)?;
    let r2 = convexity_index(&image, budget, seed.wrapping_add(1))?;
    Ok((r1, r2))
}

// ---------------------------------------------------------------------------
// Convex core search
// ---------------------------------------------------------------------------

/// A candidate convex core: a box in a rotated frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexCore {
    /// Orthonormal rows mapping world to frame coordinates.
    pub basis: Vec<Vec<f64>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// |F∩E| / |F|
    pub purity: f64,
    /// |F∩E| / |E|
    pub coverage: f64,
}

impl ConvexCore {
    pub fn score(&self) -> f64 {
        self.purity.min(self.coverage)
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.lo.len()).map(|i| self.hi[i] - self.lo[i]).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        for (i, b) in self.basis.iter().enumerate() {
            let t = geom::dot(b, x);
            if t < self.lo[i] || t > self.hi[i] {
                return false;
            }
        }
        true
    }
}

fn eval_core(coords: &[Vec<f64>], cell_vol: f64, e_vol: f64, lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let m = lo.len();
    let mut count = 0usize;
    'pts: for p in coords {
        for i in 0..m {
            if p[i] < lo[i] || p[i] > hi[i] {
                continue 'pts;
            }
        }
        count += 1;
    }
    let inter = count as f64 * cell_vol;
    let fvol: f64 = (0..m).map(|i| (hi[i] - lo[i]).max(1e-300)).product();
    (inter / fvol, inter / e_vol)
}

/// Searches axis-aligned and PCA-aligned boxes F maximizing
/// min(|F∩E|/|F|, |F∩E|/|E|) by coordinate descent on the 2m bounds.
///
/// Gated on `convexity_index(E) >= c_min`; the returned box is a practical
/// certificate of the almost-convexity, not an exact optimum.
pub fn find_convex_core(e: &VoxelSet, c_min: f64) -> Result<ConvexCore> {
    if e.m > 3 {
        return Err(Error::UnsupportedDimension {
            dim: e.m,
            why: "convex core search supports m <= 3".into(),
        });
    }
    let gate = convexity_index(e, 200_000, 0xc04e)?;
    if gate.index + gate.abs_error_95 < c_min {
        return Err(Error::PreconditionFailed(format!(
            "convexity index {:.3} below c_min {:.3}",
            gate.index, c_min
        )));
    }
    Ok(search_core_box(e))
}

/// The box search itself, exposed for callers that gate differently.
pub fn search_core_box(e: &VoxelSet) -> ConvexCore {
    let centers = e.active_centers();
    let e_vol = e.volume();
    let cell_vol = e.h.powi(e.m as i32);
    let m = e.m;

    let mut frames: Vec<Vec<Vec<f64>>> = vec![AffineMap::identity(m).linear];
    if centers.len() >= 2 {
        let mean: Vec<f64> = (0..m)
            .map(|i| centers.iter().map(|c| c[i]).sum::<f64>() / centers.len() as f64)
            .collect();
        let mut cov = vec![vec![0.0; m]; m];
        for c in &centers {
            for i in 0..m {
                for j in 0..m {
                    cov[i][j] += (c[i] - mean[i]) * (c[j] - mean[j]);
                }
            }
        }
        let (_vals, vecs) = geom::symmetric_eigen(&cov);
        frames.push(vecs);
    }

    let mut best: Option<ConvexCore> = None;
    for frame in frames {
        let coords: Vec<Vec<f64>> = centers
            .iter()
            .map(|c| frame.iter().map(|b| geom::dot(b, c)).collect())
            .collect();
        let mut lo = vec![0.0; m];
        let mut hi = vec![0.0; m];
        for i in 0..m {
            let mut xs: Vec<f64> = coords.iter().map(|c| c[i]).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q = |f: f64| xs[((xs.len() - 1) as f64 * f) as usize];
            lo[i] = q(0.005) - e.h / 2.0;
            hi[i] = q(0.995) + e.h / 2.0;
        }
        let (mut purity, mut coverage) = eval_core(&coords, cell_vol, e_vol, &lo, &hi);
        let mut score = purity.min(coverage);
        let span: f64 = (0..m).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        let mut step = span / 4.0;
        while step > e.h / 2.0 {
            let mut improved = false;
            for i in 0..m {
                for (which, dir) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
                    let mut l = lo.clone();
                    let mut hh = hi.clone();
                    if which == 0 {
                        l[i] += dir * step;
                    } else {
                        hh[i] += dir * step;
                    }
                    if hh[i] - l[i] < e.h {
                        continue;
                    }
                    let (p, c) = eval_core(&coords, cell_vol, e_vol, &l, &hh);
                    if p.min(c) > score + 1e-12 {
                        lo = l;
                        hi = hh;
                        purity = p;
                        coverage = c;
                        score = p.min(c);
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        let cand = ConvexCore {
            basis: frame,
            lo,
            hi,
            purity,
            coverage,
        };
        if best.as_ref().map_or(true, |b| cand.score() > b.score()) {
            best = Some(cand);
        }
    }
    best.expect("at least the identity frame")
}

// ---------------------------------------------------------------------------
// Shifted-intersection inequality
// ---------------------------------------------------------------------------

/// Grid quadrature of ∫_R |E ∩ ⋂_i (E + t e_i)| dt against the bound
/// 2 (d^{n-1} |E|^{2n})^{1/(2n-1)} with d = diam(E). Returns (lhs, rhs).
pub fn shifted_intersection_check(e: &VoxelSet) -> Result<(f64, f64)> {
    if e.is_empty() {
        return Err(Error::EmptySet("shifted intersection of empty set".into()));
    }
    let m = e.m;
    let n = m as f64;
    let (lo, hi) = e.active_bbox().unwrap();
    let span = (0..m).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let kmax = (span / e.h).ceil() as i64 + 1;
    // |E_t| at lattice shifts t = k h (exact on the grid), trapezoid between
    let vol_at = |k: i64| -> f64 {
        let mut count = 0usize;
        'cells: for idx in e.active_cells() {
            for i in 0..m {
                // x ∈ E + t e_i  <=>  x − t e_i ∈ E
                let v = idx[i] as i64 - k;
                if v < 0 || v >= e.dims[i] as i64 {
                    continue 'cells;
                }
                let mut nb = idx.clone();
                nb[i] = v as usize;
                if !e.get_index(&nb) {
                    continue 'cells;
                }
            }
            count += 1;
        }
        count as f64 * e.h.powi(m as i32)
    };
    let values: Vec<f64> = (-kmax..=kmax).map(vol_at).collect();
    let mut lhs = 0.0;
    for w in values.windows(2) {
        lhs += e.h * (w[0] + w[1]) / 2.0;
    }
    let d = diameter(e);
    let rhs = 2.0 * (d.powf(n - 1.0) * e.volume().powf(2.0 * n)).powf(1.0 / (2.0 * n - 1.0));
    Ok((lhs, rhs))
}

/// Diameter of the active region (hull-based for m <= 2, boundary scan for m = 3).
pub fn diameter(e: &VoxelSet) -> f64 {
    let half_diag = e.h * (e.m as f64).sqrt();
    match e.m {
        1 => {
            let (lo, hi) = e.active_bbox().unwrap_or((vec![0.0], vec![0.0]));
            hi[0] - lo[0]
        }
        2 => {
            let pts: Vec<[f64; 2]> = e
                .active_centers()
                .into_iter()
                .map(|c| [c[0], c[1]])
                .collect();
            geom::diameter_2d(&pts) + half_diag
        }
        _ => {
            let mut boundary: Vec<Vec<f64>> = Vec::new();
            for idx in e.active_cells() {
                let mut is_boundary = false;
                for i in 0..e.m {
                    for d in [-1i64, 1] {
                        let v = idx[i] as i64 + d;
                        if v < 0 || v >= e.dims[i] as i64 {
                            is_boundary = true;
                            break;
                        }
                        let mut nb = idx.clone();
                        nb[i] = v as usize;
                        if !e.get_index(&nb) {
                            is_boundary = true;
                            break;
                        }
                    }
                    if is_boundary {
                        break;
                    }
                }
                if is_boundary {
                    boundary.push(e.center_of(&idx));
                }
            }
            let stride = (boundary.len() / 4000).max(1);
            let pts: Vec<&Vec<f64>> = boundary.iter().step_by(stride).collect();
            let mut best: f64 = 0.0;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    best = best.max(geom::dist(pts[i], pts[j]));
                }
            }
            best + half_diag
        }
    }
}

/// Longest interval in which the 1-D set A (a union of intervals) has density
/// at least λ: m(A, λ) = sup{ |I| : |I ∩ A| >= λ|I| }.
///
/// Exact over candidate intervals with endpoints among A's interval
/// endpoints, where the piecewise-linear density attains its supremum.
pub fn interval_density_sup(intervals: &[(f64, f64)], lambda: f64) -> f64 {
    interval_density_arg(intervals, lambda).map_or(0.0, |(a, b)| b - a)
}

/// As [`interval_density_sup`] but returns the maximizing interval.
///
/// Writing M for the cumulative mass of A and g(x) = λx − M(x), the interval
/// [a, b] qualifies iff g(b) <= g(a), so the supremum is attained at a level
/// y where a is the first crossing of y and b the last; the extremal levels
/// sit at the breakpoints of the piecewise-linear g.
pub fn interval_density_arg(intervals: &[(f64, f64)], lambda: f64) -> Option<(f64, f64)> {
    let mut ivs: Vec<(f64, f64)> = intervals
        .iter()
        .filter(|(a, b)| b > a)
        .copied()
        .collect();
    if ivs.is_empty() || !(0.0 < lambda && lambda <= 1.0) {
        return None;
    }
    ivs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in ivs {
        match merged.last_mut() {
            Some((_, e)) if a <= *e => *e = e.max(b),
            _ => merged.push((a, b)),
        }
    }
    // breakpoints of g and its values there
    let mut xs: Vec<f64> = Vec::new();
    for &(a, b) in &merged {
        xs.push(a);
        xs.push(b);
    }
    let mut mass = 0.0;
    let mut gvals: Vec<f64> = Vec::with_capacity(xs.len());
    for (k, &x) in xs.iter().enumerate() {
        if k % 2 == 1 {
            mass += x - xs[k - 1];
        }
        gvals.push(lambda * x - mass);
    }
    let first_crossing = |y: f64| -> f64 {
        // g(x) = λx for x <= xs[0]
        if y <= gvals[0] {
            return y / lambda;
        }
        for k in 1..xs.len() {
            let (g0, g1) = (gvals[k - 1], gvals[k]);
            if (g0 < y && y <= g1) || (g0 >= y && y > g1) {
                if g0 < y && y <= g1 {
                    let t = (y - g0) / (g1 - g0);
                    return xs[k - 1] + t * (xs[k] - xs[k - 1]);
                }
            }
            if g0 >= y {
                return xs[k - 1];
            }
        }
        xs[xs.len() - 1]
    };
    let last_crossing = |y: f64| -> f64 {
        let glast = gvals[xs.len() - 1];
        if y >= glast {
            // beyond the hull g rises with slope λ
            return xs[xs.len() - 1] + (y - glast) / lambda;
        }
        for k in (1..xs.len()).rev() {
            let (g0, g1) = (gvals[k - 1], gvals[k]);
            if g1 <= y {
                return xs[k];
            }
            if (g0 <= y && y < g1) || (g0 > y && y >= g1) {
                let t = (y - g0) / (g1 - g0);
                return xs[k - 1] + t * (xs[k] - xs[k - 1]);
            }
        }
        xs[0]
    };
    let mut best: Option<(f64, f64)> = None;
    let mut best_len = f64::NEG_INFINITY;
    for &y in &gvals {
        let a = first_crossing(y);
        let b = last_crossing(y);
        if b - a > best_len {
            best_len = b - a;
            best = Some((a, b));
        }
    }
    best
}
