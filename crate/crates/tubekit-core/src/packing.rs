//! Constructive packer: given a convex 9δ-discretized E ⊂ R^{n−1} with
//! |E| = √N·δ^{n−1} and diam(E) ≤ 1, place ~N essentially distinct δ-tubes
//! into E × [0, 2] by the direction/slice counting argument.
//!
//! For each direction ê = sinθ·ξ + cosθ·e_n the horizontal space splits into
//! slices of thickness δ orthogonal to ξ; a slice whose central line meets
//! the eroded set E′ in a section of length >= θ accepts a vertical ladder of
//! ⌊c·θ/δ⌋ tubes. The vertical direction instead takes a 2δ-pitch lattice.

use crate::error::{Error, Result};
use crate::geom;
use crate::tube::{Direction, Tube, TubeFamily, DEFAULT_C0};
use crate::voxel::VoxelSet;
use crate::xray::{self, LineSample};

/// Stacking constant: ladder pitch is `STACK_PITCH_FACTOR`·δ/sinθ, which
/// yields ⌊c·θ/δ⌋ tubes per qualifying slice with c = 1/STACK_PITCH_FACTOR.
/// The default keeps parallel tubes radially 4δ apart, certifying
/// distinctness without intersection measurements.
pub const STACK_PITCH_FACTOR: f64 = 4.0;

/// A kδ-discretized set: the union of radius-`dilation` balls at `centers`,
/// voxelized on `voxels`.
#[derive(Debug, Clone)]
pub struct DiscretizedSet {
    pub voxels: VoxelSet,
    pub centers: Vec<Vec<f64>>,
    pub dilation: f64,
}

impl DiscretizedSet {
    /// Builds the voxelization of ∪ B(c, dilation) at cell size `h`.
    pub fn from_centers(centers: Vec<Vec<f64>>, dilation: f64, h: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptySet("discretized set needs centers".into()));
        }
        let m = centers[0].len();
        if centers.iter().any(|c| c.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: centers.iter().find(|c| c.len() != m).unwrap().len(),
            });
        }
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for c in &centers {
            for i in 0..m {
                lo[i] = lo[i].min(c[i] - dilation - 2.0 * h);
                hi[i] = hi[i].max(c[i] + dilation + 2.0 * h);
            }
        }
        let r2 = dilation * dilation;
        let voxels = VoxelSet::from_fn(&lo, &hi, h, |x| {
            centers.iter().any(|c| {
                let mut acc = 0.0;
                for i in 0..m {
                    let d = x[i] - c[i];
                    acc += d * d;
                }
                acc <= r2
            })
        })?;
        Ok(DiscretizedSet {
            voxels,
            centers,
            dilation,
        })
    }

    /// Accepts a raw voxel mask as a kδ-discretized set if it equals its own
    /// morphological opening at radius `dilation` (i.e. it is a union of
    /// radius-`dilation` balls on the grid); the eroded cells become the
    /// recorded centers.
    pub fn from_voxels(voxels: VoxelSet, dilation: f64) -> Result<Self> {
        let eroded = voxels.erode(dilation);
        if eroded.is_empty() {
            return Err(Error::PreconditionFailed(format!(
                "mask is not {dilation}-discretized: erosion is empty"
            )));
        }
        let opened = eroded.dilate(dilation);
        // every active cell must be recovered by the opening
        let lost = voxels.active_count() as i64 - opened.active_count() as i64;
        if lost.unsigned_abs() as f64 > 0.02 * voxels.active_count() as f64 {
            return Err(Error::PreconditionFailed(format!(
                "mask is not {dilation}-discretized: opening loses {lost} of {} cells",
                voxels.active_count()
            )));
        }
        let centers = eroded.active_centers();
        Ok(DiscretizedSet {
            voxels,
            centers,
            dilation,
        })
    }

    pub fn dim(&self) -> usize {
        self.voxels.m
    }

    pub fn volume(&self) -> f64 {
        self.voxels.volume()
    }

    /// Exact diameter of the ball representation: max center distance + 2r.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        let stride = (self.centers.len() / 3000).max(1);
        let pts: Vec<&Vec<f64>> = self.centers.iter().step_by(stride).collect();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                best = best.max(geom::dist(pts[i], pts[j]));
            }
        }
        best + 2.0 * self.dilation
    }

    /// True if a ball of radius `margin` around `x` stays inside the set
    /// (tested against the ball representation).
    pub fn contains_ball(&self, x: &[f64], margin: f64) -> bool {
        self.centers
            .iter()
            .any(|c| geom::dist(c, x) <= self.dilation - margin)
    }

    /// Convexity gate: exact hull fill ratio for m <= 2, convexity index
    /// otherwise.
    pub fn convexity_fill(&self) -> Result<f64> {
        let v = &self.voxels;
        match v.m {
            1 => {
                let (lo, hi) = v
                    .active_bbox()
                    .ok_or_else(|| Error::EmptySet("empty set".into()))?;
                Ok(v.volume() / (hi[0] - lo[0]))
            }
            2 => {
                let pts: Vec<[f64; 2]> = v
                    .active_centers()
                    .into_iter()
                    .map(|c| [c[0], c[1]])
                    .collect();
                let hull = geom::convex_hull_2d(&pts);
                let hull_area = geom::polygon_area(&hull);
                if hull_area <= 0.0 {
                    return Ok(0.0);
                }
                Ok(v.volume() / hull_area)
            }
            _ => {
                let rep = xray::convexity_index(v, 200_000, 0x9ac4)?;
                Ok(rep.index)
            }
        }
    }
}

/// Per-direction placement produced by the packer.
struct DirectionPlan {
    tubes: Vec<Tube>,
}

/// Tubes the packer realizes in one direction.
///
/// For the vertical direction this is the 2δ-pitch lattice count inside E′;
/// for a tilted direction it is the sum over qualifying slices of the ladder
/// size ⌊span·sinθ/(`STACK_PITCH_FACTOR`·δ)⌋+1.
pub fn direction_count(e_set: &DiscretizedSet, e: &Direction, delta: f64) -> Result<usize> {
    let n = e.dim();
    if e_set.dim() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: e_set.dim(),
        });
    }
    let eroded = e_set.voxels.erode(2.0 * delta);
    Ok(plan_direction(&eroded, e, delta)?.tubes.len())
}

/// The full packer. Checks convexity, the 9δ-discretization, the diameter
/// bound, and |E| >= δ^{n−1}; then realizes tubes over a 4.2δ-pitch
/// direction net out to the maximal usable tilt.
pub fn pack_tubes(e_set: &DiscretizedSet, delta: f64, n: usize) -> Result<TubeFamily> {
    if e_set.dim() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: e_set.dim(),
        });
    }
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension {
            dim: n,
            why: "the packer supports n = 2 and n = 3".into(),
        });
    }
    let fill = e_set.convexity_fill()?;
    if fill < 0.9 {
        return Err(Error::NonConvex { fill_ratio: fill });
    }
    if e_set.diameter() > 1.0 + 1e-9 {
        return Err(Error::PreconditionFailed(format!(
            "diam(E) = {} exceeds 1",
            e_set.diameter()
        )));
    }
    let sqrt_n_target = e_set.volume() / delta.powi(n as i32 - 1);
    if sqrt_n_target < 1.0 {
        return Err(Error::PreconditionFailed(format!(
            "|E| = {} is below the one-tube scale δ^{{n-1}} = {}",
            e_set.volume(),
            delta.powi(n as i32 - 1)
        )));
    }
    let eroded = e_set.voxels.erode(2.0 * delta);
    if eroded.is_empty() {
        return Err(Error::PreconditionFailed(
            "E erodes to nothing at margin 2δ".into(),
        ));
    }
    let (lo, hi) = eroded.active_bbox().unwrap();
    let m = n - 1;
    let theta_max = (0..m)
        .map(|i| hi[i] - lo[i])
        .fold(0.0f64, f64::max)
        .min(std::f64::consts::FRAC_PI_4);
    let pitch = crate::constructions::NET_SEP_FACTOR * delta;

    // direction net over (ξ, θ): θ on a pitch grid; ξ over ±1 for n = 2 and a
    // ring of pitch/ sinθ for n = 3; θ = 0 handled once
    let mut plans: Vec<DirectionPlan> = Vec::new();
    let mut vertical = vec![0.0; n];
    vertical[n - 1] = 1.0;
    plans.push(plan_direction(
        &eroded,
        &Direction::from_canonical_unit(vertical),
        delta,
    )?);
    let rings = (theta_max / pitch).floor() as usize;
    for i in 1..=rings {
        let theta = i as f64 * pitch;
        let xis: Vec<Vec<f64>> = match m {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => {
                let count = ((2.0 * std::f64::consts::PI * theta.sin() / pitch).floor() as usize)
                    .max(1);
                (0..count)
                    .map(|j| {
                        let phi = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                        vec![phi.cos(), phi.sin()]
                    })
                    .collect()
            }
            _ => unreachable!(),
        };
        for xi in xis {
            let mut unit = vec![0.0; n];
            for (k, x) in xi.iter().enumerate() {
                unit[k] = theta.sin() * x;
            }
            unit[n - 1] = theta.cos();
            let e = Direction::new(&unit)?;
            plans.push(plan_direction(&eroded, &e, delta)?);
        }
    }
    let mut fam = TubeFamily::new(n, delta, DEFAULT_C0)?;
    for p in plans {
        for t in p.tubes {
            fam.push(t)?;
        }
    }
    Ok(fam)
}

/// Realizes the tubes of one direction inside E′ × [0, 2].
fn plan_direction(eroded: &VoxelSet, e: &Direction, delta: f64) -> Result<DirectionPlan> {
    let n = e.dim();
    let m = n - 1;
    // place along the upward representative; the tube set itself is
    // symmetric in ±ê, so the stored canonical direction is unaffected
    let unit: Vec<f64> = if e.as_slice()[n - 1] >= 0.0 {
        e.as_slice().to_vec()
    } else {
        e.as_slice().iter().map(|x| -x).collect()
    };
    let unit = &unit[..];
    let cos_theta = unit[n - 1];
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let mut tubes = Vec::new();

    if sin_theta < 1e-12 {
        // vertical: 2δ-pitch lattice of positions whose cell sits in E′
        let (lo, hi) = match eroded.active_bbox() {
            Some(b) => b,
            None => return Ok(DirectionPlan { tubes }),
        };
        let counts: Vec<usize> = (0..m)
            .map(|i| ((hi[i] - lo[i]) / (2.0 * delta)).floor() as usize + 1)
            .collect();
        let mut idx = vec![0usize; m];
        loop {
            let p: Vec<f64> = (0..m)
                .map(|i| lo[i] + idx[i] as f64 * 2.0 * delta)
                .collect();
            if eroded.contains_point(&p) {
                let mut c = p.clone();
                c.push(1.0);
                tubes.push(Tube::unit(c, e.clone(), delta)?);
            }
            let mut i = 0;
            loop {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
                i += 1;
                if i == m {
                    return Ok(DirectionPlan { tubes });
                }
            }
        }
    }

    // horizontal part ξ of the direction
    let xi: Vec<f64> = (0..m).map(|i| unit[i] / sin_theta).collect();
    let theta = sin_theta.asin();
    // slices orthogonal to ξ in the horizontal space (none for m = 1)
    let slice_lines: Vec<LineSample> = if m == 1 {
        vec![LineSample {
            xi: xi.clone(),
            offset: vec![0.0],
            weight: 1.0,
        }]
    } else {
        // η spans ξ⊥ in R²; slice t has central line at η·((t+1/2)δ)
        let eta = [-xi[1], xi[0]];
        let (lo, hi) = match eroded.active_bbox() {
            Some(b) => b,
            None => return Ok(DirectionPlan { tubes }),
        };
        // project bbox corners onto η to find the slice index range
        let mut smin = f64::INFINITY;
        let mut smax = f64::NEG_INFINITY;
        for mask in 0..4usize {
            let corner = [
                if mask & 1 == 1 { hi[0] } else { lo[0] },
                if mask & 2 == 2 { hi[1] } else { lo[1] },
            ];
            let s = corner[0] * eta[0] + corner[1] * eta[1];
            smin = smin.min(s);
            smax = smax.max(s);
        }
        let t0 = (smin / delta).floor() as i64;
        let t1 = (smax / delta).ceil() as i64;
        (t0..t1)
            .map(|t| {
                let off = (t as f64 + 0.5) * delta;
                LineSample {
                    xi: xi.clone(),
                    offset: vec![eta[0] * off, eta[1] * off],
                    weight: 1.0,
                }
            })
            .collect()
    };
    let boxes = eroded.active_boxes();
    let zpitch = STACK_PITCH_FACTOR * delta / sin_theta;
    for line in &slice_lines {
        // longest contiguous active run along the slice's central line
        let run = longest_run(eroded, line, &boxes);
        let (a, b) = match run {
            Some(r) => r,
            None => continue,
        };
        if b - a < theta {
            continue;
        }
        // axis bottom at the run start, top drifting sinθ along ξ
        let base_h: Vec<f64> = (0..m).map(|i| line.offset[i] + a * line.xi[i]).collect();
        let z_lo = delta;
        let z_hi = 2.0 - cos_theta - delta;
        if z_hi < z_lo {
            continue;
        }
        let ladder = ((z_hi - z_lo) / zpitch).floor() as usize + 1;
        for k in 0..ladder {
            let z_bottom = z_lo + k as f64 * zpitch;
            // center = bottom endpoint + (height/2)·ê
            let mut c = vec![0.0; n];
            for i in 0..m {
                c[i] = base_h[i] + 0.5 * unit[i];
            }
            c[n - 1] = z_bottom + 0.5 * unit[n - 1];
            tubes.push(Tube::unit(c, e.clone(), delta)?);
        }
    }
    Ok(DirectionPlan { tubes })
}

/// Longest contiguous interval of active cells along a line, as axis
/// parameters (t_start, t_end) relative to the line's offset point.
fn longest_run(
    e: &VoxelSet,
    line: &LineSample,
    boxes: &[(Vec<f64>, Vec<f64>)],
) -> Option<(f64, f64)> {
    // walk the grid collecting active intervals, then merge adjacent ones
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in boxes {
        collect_runs(e, &line.offset, &line.xi, lo, hi, &mut intervals);
    }
    if intervals.is_empty() {
        return None;
    }
    intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = intervals[0];
    let mut cur = intervals[0];
    for &(a, b) in &intervals[1..] {
        if a <= cur.1 + 1e-9 {
            cur.1 = cur.1.max(b);
        } else {
            if cur.1 - cur.0 > best.1 - best.0 {
                best = cur;
            }
            cur = (a, b);
        }
    }
    if cur.1 - cur.0 > best.1 - best.0 {
        best = cur;
    }
    Some(best)
}

fn collect_runs(
    e: &VoxelSet,
    p0: &[f64],
    xi: &[f64],
    lo: &[f64],
    hi: &[f64],
    out: &mut Vec<(f64, f64)>,
) {
    let m = e.m;
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..m {
        if xi[i].abs() < 1e-15 {
            if p0[i] < lo[i] || p0[i] > hi[i] {
                return;
            }
        } else {
            let a = (lo[i] - p0[i]) / xi[i];
            let b = (hi[i] - p0[i]) / xi[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t0 >= t1 {
        return;
    }
    let eps = 1e-12 * (1.0 + t0.abs().max(t1.abs()));
    let start = t0 + eps;
    let mut cell = [0i64; 3];
    for i in 0..m {
        let c = ((p0[i] + start * xi[i] - e.origin[i]) / e.h).floor() as i64;
        cell[i] = c.clamp(0, e.dims[i] as i64 - 1);
    }
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let mut step = [0i64; 3];
    for i in 0..m {
        if xi[i] > 1e-15 {
            step[i] = 1;
            t_max[i] = (e.origin[i] + (cell[i] + 1) as f64 * e.h - p0[i]) / xi[i];
            t_delta[i] = e.h / xi[i];
        } else if xi[i] < -1e-15 {
            step[i] = -1;
            t_max[i] = (e.origin[i] + cell[i] as f64 * e.h - p0[i]) / xi[i];
            t_delta[i] = -e.h / xi[i];
        }
    }
    let mut t_cur = t0;
    let mut run_start: Option<f64> = None;
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
                if run_start.is_none() {
                    run_start = Some(t_cur);
                }
            } else if let Some(s) = run_start.take() {
                out.push((s, t_cur));
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
    if let Some(s) = run_start.take() {
        out.push((s, t_cur));
    }
}

/// Exact containment of a family in E × [0, 2]: both end disks of every tube
/// stay inside (tested against E's ball representation with margin δ/2).
pub fn all_in_prism(f: &TubeFamily, e_set: &DiscretizedSet) -> bool {
    let n = f.n;
    for t in &f.tubes {
        let (a, b) = t.axis_endpoints();
        for p in [&a, &b] {
            let horiz = &p[..n - 1];
            if !e_set.contains_ball(horiz, t.delta / 2.0) {
                return false;
            }
            let sin_theta =
                (1.0 - t.direction.as_slice()[n - 1].powi(2)).max(0.0).sqrt();
            let z_reach = t.delta / 2.0 * sin_theta;
            if p[n - 1] - z_reach < -1e-9 || p[n - 1] + z_reach > 2.0 + 1e-9 {
                return false;
            }
        }
    }
    true
}

/// E = an interval of length `len` (m = 1), 9δ-discretized.
pub fn interval_set(len: f64, delta: f64, h: f64) -> Result<DiscretizedSet> {
    let r = 9.0 * delta;
    if len < 2.0 * r {
        return Err(Error::PreconditionFailed(
            "interval shorter than its discretization balls".into(),
        ));
    }
    let k = ((len - 2.0 * r) / (h / 2.0)).ceil() as usize + 1;
    let centers: Vec<Vec<f64>> = (0..=k)
        .map(|i| vec![r + (len - 2.0 * r) * i as f64 / k as f64])
        .collect();
    DiscretizedSet::from_centers(centers, r, h)
}

/// E = a square of side `side` (m = 2), 9δ-discretized.
pub fn square_set(side: f64, delta: f64, h: f64) -> Result<DiscretizedSet> {
    let r = 9.0 * delta;
    if side < 2.0 * r {
        return Err(Error::PreconditionFailed(
            "square smaller than its discretization balls".into(),
        ));
    }
    let k = ((side - 2.0 * r) / (h / 2.0)).ceil() as usize + 1;
    let mut centers = Vec::new();
    for i in 0..=k {
        for j in 0..=k {
            centers.push(vec![
                r + (side - 2.0 * r) * i as f64 / k as f64,
                r + (side - 2.0 * r) * j as f64 / k as f64,
            ]);
        }
    }
    DiscretizedSet::from_centers(centers, r, h)
}

/// E = a disk of radius `radius` (m = 2), 9δ-discretized.
pub fn disk_set(radius: f64, delta: f64, h: f64) -> Result<DiscretizedSet> {
    let r = 9.0 * delta;
    if radius < r {
        return Err(Error::PreconditionFailed(
            "disk smaller than its discretization balls".into(),
        ));
    }
    let inner = radius - r;
    let pitch = h / 2.0;
    let k = (inner / pitch).ceil() as i64;
    let mut centers = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let x = i as f64 * pitch;
            let y = j as f64 * pitch;
            if x * x + y * y <= inner * inner {
                centers.push(vec![x, y]);
            }
        }
    }
    DiscretizedSet::from_centers(centers, r, h)
}
