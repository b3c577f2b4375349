//! Exact geometry of δ-tubes: membership, angles, distances, pairwise
//! intersection volume, and the separation/distinctness predicates.
//!
//! A δ-tube with center `a` and direction `e` is the solid cylinder
//! `{ x : |(x-a)·ê| <= height/2, |(x-a) - ((x-a)·ê)ê| <= δ/2 }` with flat caps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;

/// Upper end of the asymptotic regime for the cross-section diameter.
pub const DELTA_REGIME_MAX: f64 = 0.01;

/// Default essential-distinctness constant. The source material never fixes
/// it numerically beyond "smaller than a half of a single δ-tube", so 1/2 is
/// the default and every family carries its own value.
pub const DEFAULT_C0: f64 = 0.5;

/// A direction in S^{n-1}/{±1}, stored as the canonical representative whose
/// first nonzero component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    unit: Vec<f64>,
}

impl Direction {
    pub fn new(v: &[f64]) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::UnsupportedDimension {
                dim: v.len(),
                why: "directions need dimension >= 2".into(),
            });
        }
        let n = geom::norm(v);
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::InvalidGeometry(
                "direction vector must be nonzero and finite".into(),
            ));
        }
        // keep already-unit vectors bit-stable across save/load cycles
        let mut unit: Vec<f64> = if (n - 1.0).abs() <= 1e-12 {
            v.to_vec()
        } else {
            v.iter().map(|x| x / n).collect()
        };
        canonicalize(&mut unit);
        Ok(Direction { unit })
    }

    /// Builds from an exactly-unit canonical vector; used by constructors that
    /// produce direction grids analytically.
    pub(crate) fn from_canonical_unit(unit: Vec<f64>) -> Self {
        debug_assert!((geom::norm(&unit) - 1.0).abs() < 1e-9);
        let mut u = unit;
        canonicalize(&mut u);
        Direction { unit: u }
    }

    pub fn dim(&self) -> usize {
        self.unit.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.unit
    }

    pub fn angle_to(&self, other: &Direction) -> f64 {
        angle(self, other)
    }

    /// Exact equality of the canonical representatives (used for grouping).
    pub fn same_canonical(&self, other: &Direction) -> bool {
        self.unit == other.unit
    }
}

fn canonicalize(unit: &mut [f64]) {
    for x in unit.iter() {
        if x.abs() > 1e-12 {
            if *x < 0.0 {
                for y in unit.iter_mut() {
                    *y = -*y;
                }
            }
            break;
        }
    }
    // normalize -0.0 so canonical vectors compare bitwise
    for y in unit.iter_mut() {
        if *y == 0.0 {
            *y = 0.0;
        }
    }
}

/// Angle between two directions: arccos |ê1·ê2|, in [0, π/2].
pub fn angle(e1: &Direction, e2: &Direction) -> f64 {
    let c = geom::dot(&e1.unit, &e2.unit).abs().min(1.0);
    c.acos()
}

/// A solid δ-tube.
#[derive(Debug, Clone)]
pub struct Tube {
    pub center: Vec<f64>,
    pub direction: Direction,
    pub delta: f64,
    pub height: f64,
}

impl Tube {
    pub fn new(center: Vec<f64>, direction: Direction, delta: f64, height: f64) -> Result<Self> {
        if center.len() != direction.dim() {
            return Err(Error::DimensionMismatch {
                expected: direction.dim(),
                got: center.len(),
            });
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidGeometry("delta must be positive".into()));
        }
        if !(height.is_finite() && height > 0.0) {
            return Err(Error::InvalidGeometry("height must be positive".into()));
        }
        Ok(Tube {
            center,
            direction,
            delta,
            height,
        })
    }

    /// Unit-height tube, the default of the tube model.
    pub fn unit(center: Vec<f64>, direction: Direction, delta: f64) -> Result<Self> {
        Tube::new(center, direction, delta, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Axial coordinate of `x` relative to the center.
    pub fn axial(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc += (x[i] - self.center[i]) * self.direction.unit[i];
        }
        acc
    }

    /// Squared radial distance of `x` from the axis.
    pub fn radial_sq(&self, x: &[f64]) -> f64 {
        let s = self.axial(x);
        let mut acc = 0.0;
        for i in 0..x.len() {
            let r = (x[i] - self.center[i]) - s * self.direction.unit[i];
            acc += r * r;
        }
        acc
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let s = self.axial(x);
        if s.abs() > self.height / 2.0 {
            return false;
        }
        self.radial_sq(x) <= (self.delta / 2.0) * (self.delta / 2.0)
    }

    pub fn volume(&self) -> f64 {
        tube_volume(self)
    }

    pub fn axis_endpoints(&self) -> (Vec<f64>, Vec<f64>) {
        let mut a = self.center.clone();
        let mut b = self.center.clone();
        geom::axpy(&mut a, -self.height / 2.0, &self.direction.unit);
        geom::axpy(&mut b, self.height / 2.0, &self.direction.unit);
        (a, b)
    }

    /// Point on the axis at fraction `t` in [-1/2, 1/2] of the height.
    pub fn axis_point(&self, t: f64) -> Vec<f64> {
        let mut p = self.center.clone();
        geom::axpy(&mut p, t * self.height, &self.direction.unit);
        p
    }

    /// Radius of the smallest ball at the center containing the tube.
    pub fn circumradius(&self) -> f64 {
        let h = self.height / 2.0;
        let r = self.delta / 2.0;
        (h * h + r * r).sqrt()
    }
}

/// Closed-form cylinder volume ω_{n-1}·(δ/2)^{n-1}·height.
pub fn tube_volume(t: &Tube) -> f64 {
    let m = t.dim() - 1;
    geom::unit_ball_volume(m) * (t.delta / 2.0).powi(m as i32) * t.height
}

/// Vertical and horizontal distance between a tube and a point:
/// the axial and radial components of the center-to-point displacement.
pub fn vertical_horizontal_distance(t: &Tube, point: &[f64]) -> (f64, f64) {
    let w = geom::sub(&t.center, point);
    let s = geom::dot(&w, t.direction.as_slice());
    let mut rad = 0.0;
    for i in 0..w.len() {
        let r = w[i] - s * t.direction.unit[i];
        rad += r * r;
    }
    (s.abs(), rad.sqrt())
}

/// An ordered family of tubes sharing dimension and δ.
#[derive(Debug, Clone)]
pub struct TubeFamily {
    pub n: usize,
    pub delta: f64,
    pub c0: f64,
    pub tubes: Vec<Tube>,
}

impl TubeFamily {
    pub fn new(n: usize, delta: f64, c0: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::UnsupportedDimension {
                dim: n,
                why: "tube families need n >= 2".into(),
            });
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidGeometry("delta must be positive".into()));
        }
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::InvalidGeometry("c0 must lie in (0,1)".into()));
        }
        Ok(TubeFamily {
            n,
            delta,
            c0,
            tubes: Vec::new(),
        })
    }

    pub fn from_tubes(n: usize, delta: f64, c0: f64, tubes: Vec<Tube>) -> Result<Self> {
        let mut fam = TubeFamily::new(n, delta, c0)?;
        for (i, t) in tubes.iter().enumerate() {
            if t.dim() != n {
                return Err(Error::Schema {
                    location: format!("tubes[{i}]"),
                    message: format!("dimension {} does not match family n = {n}", t.dim()),
                });
            }
            if (t.delta - delta).abs() > 1e-12 * delta {
                return Err(Error::Schema {
                    location: format!("tubes[{i}]"),
                    message: "tube delta does not match family delta".into(),
                });
            }
        }
        fam.tubes = tubes;
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    pub fn push(&mut self, tube: Tube) -> Result<()> {
        if tube.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: tube.dim(),
            });
        }
        self.tubes.push(tube);
        Ok(())
    }

    /// Axis-aligned bounding box of the family, inflated by `pad`.
    pub fn bounding_box(&self, pad: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for t in &self.tubes {
            let (a, b) = t.axis_endpoints();
            for i in 0..n {
                lo[i] = lo[i].min(a[i].min(b[i]) - t.delta / 2.0);
                hi[i] = hi[i].max(a[i].max(b[i]) + t.delta / 2.0);
            }
        }
        for i in 0..n {
            lo[i] -= pad;
            hi[i] += pad;
        }
        (lo, hi)
    }

    pub fn total_tube_volume(&self) -> f64 {
        self.tubes.iter().map(tube_volume).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FamilyDto::from(self)).expect("family serialization")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&FamilyDto::from(self)).expect("family serialization")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let dto: FamilyDto = serde_json::from_str(s)?;
        dto.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct TubeDto {
    center: Vec<f64>,
    direction: Vec<f64>,
    height: f64,
}

#[derive(Serialize, Deserialize)]
struct FamilyDto {
    n: usize,
    delta: f64,
    c0: f64,
    tubes: Vec<TubeDto>,
}

impl From<&TubeFamily> for FamilyDto {
    fn from(f: &TubeFamily) -> Self {
        FamilyDto {
            n: f.n,
            delta: f.delta,
            c0: f.c0,
            tubes: f
                .tubes
                .iter()
                .map(|t| TubeDto {
                    center: t.center.clone(),
                    direction: t.direction.as_slice().to_vec(),
                    height: t.height,
                })
                .collect(),
        }
    }
}

impl TryFrom<FamilyDto> for TubeFamily {
    type Error = Error;

    fn try_from(dto: FamilyDto) -> Result<Self> {
        let mut fam = TubeFamily::new(dto.n, dto.delta, dto.c0)?;
        for (i, t) in dto.tubes.into_iter().enumerate() {
            if t.center.len() != dto.n || t.direction.len() != dto.n {
                return Err(Error::Schema {
                    location: format!("tubes[{i}]"),
                    message: format!(
                        "center/direction dimension must equal n = {} (got {}/{})",
                        dto.n,
                        t.center.len(),
                        t.direction.len()
                    ),
                });
            }
            let dir = Direction::new(&t.direction).map_err(|e| Error::Schema {
                location: format!("tubes[{i}].direction"),
                message: e.to_string(),
            })?;
            fam.tubes
                .push(Tube::new(t.center, dir, dto.delta, t.height)?);
        }
        Ok(fam)
    }
}

// ---------------------------------------------------------------------------
// Pairwise intersection volume
// ---------------------------------------------------------------------------

// acos of a dot product one ulp below 1 is ~1.5e-8, so the parallel branch
// must absorb that much angle noise; the closed form stays exact at this scale
const PARALLEL_EPS: f64 = 1e-7;

/// Exact intersection volume of two parallel tubes: cross-section lens times
/// axial overlap.
fn parallel_intersection_volume(t1: &Tube, t2: &Tube) -> f64 {
    let e = t1.direction.as_slice();
    let w = geom::sub(&t2.center, &t1.center);
    let s = geom::dot(&w, e);
    let mut rad = 0.0;
    for i in 0..w.len() {
        let r = w[i] - s * e[i];
        rad += r * r;
    }
    let rad = rad.sqrt();
    let overlap = geom::interval_overlap(0.0, t1.height, s, t2.height);
    if overlap <= 0.0 {
        return 0.0;
    }
    let m = t1.dim() - 1;
    geom::ball_lens_volume(m, t1.delta / 2.0, t2.delta / 2.0, rad) * overlap
}

/// Corners of a 2-D tube (a δ×height rectangle) in CCW order.
fn rect_corners(t: &Tube) -> [[f64; 2]; 4] {
    let e = t.direction.as_slice();
    let perp = [-e[1], e[0]];
    let h = t.height / 2.0;
    let r = t.delta / 2.0;
    let c = &t.center;
    [
        [c[0] - h * e[0] - r * perp[0], c[1] - h * e[1] - r * perp[1]],
        [c[0] + h * e[0] - r * perp[0], c[1] + h * e[1] - r * perp[1]],
        [c[0] + h * e[0] + r * perp[0], c[1] + h * e[1] + r * perp[1]],
        [c[0] - h * e[0] + r * perp[0], c[1] - h * e[1] + r * perp[1]],
    ]
}

/// Exact rectangle–rectangle intersection area for n = 2.
fn planar_intersection_area(t1: &Tube, t2: &Tube) -> f64 {
    let a = rect_corners(t1);
    let b = rect_corners(t2);
    geom::convex_intersection_area(&a, &b)
}

/// Monte Carlo estimate inside the smaller tube's bounding box, stratified
/// along the box's longest axis. Returns (estimate, abs_err_95, samples);
/// with zero hits the error is the one-sided rule-of-three bound.
fn mc_intersection_volume(
    t1: &Tube,
    t2: &Tube,
    tol: f64,
    max_samples: u64,
) -> (f64, f64, u64) {
    use rand::Rng;
    let (small, other) = if tube_volume(t1) <= tube_volume(t2) {
        (t1, t2)
    } else {
        (t2, t1)
    };
    let n = small.dim();
    let (a, b) = small.axis_endpoints();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        lo[i] = a[i].min(b[i]) - small.delta / 2.0;
        hi[i] = a[i].max(b[i]) + small.delta / 2.0;
    }
    let box_vol: f64 = (0..n).map(|i| hi[i] - lo[i]).product();
    let axis = (0..n)
        .max_by(|&i, &j| (hi[i] - lo[i]).partial_cmp(&(hi[j] - lo[j])).unwrap())
        .unwrap();
    const STRATA: usize = 64;
    let seed = 0x70b3_u64;

    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    let mut block = 0u64;
    let mut estimate = 0.0;
    let mut abs_err = f64::INFINITY;
    while total < max_samples {
        let mut rng = crate::rng::block_rng(seed, 101, block);
        block += 1;
        let per = crate::rng::BLOCK as usize;
        let mut x = vec![0.0; n];
        for k in 0..per {
            let stratum = k % STRATA;
            for i in 0..n {
                let u: f64 = rng.gen();
                let u = if i == axis {
                    (stratum as f64 + u) / STRATA as f64
                } else {
                    u
                };
                x[i] = lo[i] + u * (hi[i] - lo[i]);
            }
            if small.contains(&x) && other.contains(&x) {
                hits += 1;
            }
        }
        total += per as u64;
        let p = hits as f64 / total as f64;
        estimate = box_vol * p;
        if hits > 0 {
            abs_err = estimate * 1.96 * ((1.0 - p) / (hits as f64)).sqrt();
            if abs_err <= tol * estimate {
                break;
            }
        } else {
            abs_err = 3.0 * box_vol / total as f64;
        }
    }
    (estimate, abs_err, total)
}

/// Volume of T1 ∩ T2 within relative tolerance `tol`.
///
/// Parallel pairs use the exact lens × overlap form; n = 2 uses exact convex
/// polygon clipping; n >= 3 falls back to stratified Monte Carlo in the
/// smaller tube's bounding box and reports failure if the tolerance is not
/// reached within the sample budget.
pub fn pair_intersection_volume(t1: &Tube, t2: &Tube, tol: f64) -> Result<f64> {
    if t1.dim() != t2.dim() {
        return Err(Error::DimensionMismatch {
            expected: t1.dim(),
            got: t2.dim(),
        });
    }
    if (t1.delta - t2.delta).abs() > 1e-12 * t1.delta {
        return Err(Error::InvalidGeometry(
            "pair intersection requires equal delta".into(),
        ));
    }
    let theta = angle(&t1.direction, &t2.direction);
    if theta < PARALLEL_EPS {
        return Ok(parallel_intersection_volume(t1, t2));
    }
    // axes further apart than the sum of radii: disjoint
    let (a0, a1) = t1.axis_endpoints();
    let (b0, b1) = t2.axis_endpoints();
    if geom::segment_distance(&a0, &a1, &b0, &b1) > (t1.delta + t2.delta) / 2.0 {
        return Ok(0.0);
    }
    if t1.dim() == 2 {
        return Ok(planar_intersection_area(t1, t2));
    }
    let (estimate, abs_err, _) = mc_intersection_volume(t1, t2, tol, 40_000_000);
    let achieved = if estimate > 0.0 {
        abs_err / estimate
    } else {
        f64::INFINITY
    };
    if achieved > tol {
        return Err(Error::ToleranceNotAchieved {
            estimate,
            achieved,
            requested: tol,
        });
    }
    Ok(estimate)
}

// ---------------------------------------------------------------------------
// Distinctness and separation predicates
// ---------------------------------------------------------------------------

/// Outcome of the essential-distinctness check.
#[derive(Debug, Clone)]
pub struct DistinctnessReport {
    pub distinct: bool,
    /// Indices of the first violating pair, if any.
    pub witness: Option<(usize, usize)>,
    pub pairs_checked: u64,
    pub pairs_certified: u64,
    pub pairs_measured: u64,
}

/// Rigorous per-pair upper bound on |T1∩T2| / min(|T1|,|T2|) from the angle
/// alone: any two points of the intersection have axial separation at most
/// 2δ/sinθ along either axis, so the intersection sits inside a slab of that
/// width cut from the (smaller) cylinder.
fn angle_ratio_bound(delta: f64, theta: f64, min_height: f64) -> f64 {
    if theta <= 0.0 {
        return 1.0;
    }
    (2.0 * delta / theta.sin() / min_height).min(1.0)
}

/// Decide a single pair against the threshold c0·min(|T1|,|T2|).
/// Returns Ok(true) if the pair satisfies the bound, Ok(false) otherwise.
fn pair_is_distinct(t1: &Tube, t2: &Tube, delta: f64, c0: f64) -> Result<bool> {
    // far apart: centers beyond any possible contact
    if geom::dist(&t1.center, &t2.center) > t1.circumradius() + t2.circumradius() + delta {
        return Ok(true);
    }
    let theta = angle(&t1.direction, &t2.direction);
    if theta < PARALLEL_EPS {
        let v = parallel_intersection_volume(t1, t2);
        return Ok(v <= c0 * tube_volume(t1).min(tube_volume(t2)));
    }
    if angle_ratio_bound(delta, theta, t1.height.min(t2.height)) <= c0 {
        return Ok(true);
    }
    let (a0, a1) = t1.axis_endpoints();
    let (b0, b1) = t2.axis_endpoints();
    if geom::segment_distance(&a0, &a1, &b0, &b1) > delta {
        return Ok(true);
    }
    let threshold = c0 * tube_volume(t1).min(tube_volume(t2));
    if t1.dim() == 2 {
        return Ok(planar_intersection_area(t1, t2) <= threshold);
    }
    // Monte Carlo with a confidence band; ambiguous pairs count as violations.
    let (est, err, _) = mc_intersection_volume(t1, t2, 0.02, 4_000_000);
    Ok(est + err <= threshold)
}

/// Checks |Ti ∩ Tj| <= c0·|Ti| for every pair, using the family's own c0.
///
/// Pairs are resolved by rigorous certificates wherever possible (parallel
/// closed form, angle bound, axis separation); only ambiguous close pairs in
/// n >= 3 are measured numerically.
pub fn is_essentially_distinct(f: &TubeFamily) -> Result<DistinctnessReport> {
    let mut report = DistinctnessReport {
        distinct: true,
        witness: None,
        pairs_checked: 0,
        pairs_certified: 0,
        pairs_measured: 0,
    };
    // group indices by canonical direction so whole group pairs can be
    // certified with one angle computation
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    'outer: for (i, t) in f.tubes.iter().enumerate() {
        for g in groups.iter_mut() {
            if f.tubes[g.0].direction.same_canonical(&t.direction) {
                g.1.push(i);
                continue 'outer;
            }
        }
        groups.push((i, vec![i]));
    }
    let min_height = f
        .tubes
        .iter()
        .map(|t| t.height)
        .fold(f64::INFINITY, f64::min);

    for gi in 0..groups.len() {
        for gj in gi..groups.len() {
            let (ri, members_i) = &groups[gi];
            let (rj, members_j) = &groups[gj];
            if gi != gj {
                let theta = angle(&f.tubes[*ri].direction, &f.tubes[*rj].direction);
                let pair_count = (members_i.len() * members_j.len()) as u64;
                report.pairs_checked += pair_count;
                if angle_ratio_bound(f.delta, theta, min_height) <= f.c0 {
                    report.pairs_certified += pair_count;
                    continue;
                }
                for &i in members_i {
                    for &j in members_j {
                        report.pairs_measured += 1;
                        if !pair_is_distinct(&f.tubes[i], &f.tubes[j], f.delta, f.c0)? {
                            report.distinct = false;
                            report.witness = Some((i.min(j), i.max(j)));
                            return Ok(report);
                        }
                    }
                }
            } else {
                for a in 0..members_i.len() {
                    for b in (a + 1)..members_i.len() {
                        let (i, j) = (members_i[a], members_i[b]);
                        report.pairs_checked += 1;
                        report.pairs_measured += 1;
                        if !pair_is_distinct(&f.tubes[i], &f.tubes[j], f.delta, f.c0)? {
                            report.distinct = false;
                            report.witness = Some((i.min(j), i.max(j)));
                            return Ok(report);
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Outcome of the δ-separation check.
#[derive(Debug, Clone)]
pub struct SeparationReport {
    pub separated: bool,
    pub witness: Option<(usize, usize)>,
    pub min_angle: f64,
}

/// True iff all pairwise direction angles exceed the family's delta.
pub fn is_delta_separated(f: &TubeFamily) -> SeparationReport {
    let mut min_angle = f64::INFINITY;
    for i in 0..f.tubes.len() {
        for j in (i + 1)..f.tubes.len() {
            let th = angle(&f.tubes[i].direction, &f.tubes[j].direction);
            if th < min_angle {
                min_angle = th;
            }
            if th <= f.delta {
                return SeparationReport {
                    separated: false,
                    witness: Some((i, j)),
                    min_angle: th,
                };
            }
        }
    }
    SeparationReport {
        separated: true,
        witness: None,
        min_angle,
    }
}
