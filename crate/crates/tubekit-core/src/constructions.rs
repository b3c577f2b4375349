//! Constructors for the explicit sharp examples: the large-N standard
//! configuration, the small-N cap configuration, the lifted (embedded)
//! example, the slab example, and the geometric cascade.
//!
//! Direction nets are spaced `NET_SEP_FACTOR`·δ apart. With c0 = 1/2 the
//! angle certificate |T∩T'| <= |T|·2δ/(h·sinθ) resolves every cross-direction
//! pair as soon as sinθ >= 4δ, so 4.2δ keeps the whole output rigorously
//! essentially distinct without numeric intersection checks; within a
//! direction, offsets keep parallel tubes radially separated by more than δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::tube::{Direction, Tube, TubeFamily, DEFAULT_C0, DELTA_REGIME_MAX};

/// Direction-net spacing in units of δ.
pub const NET_SEP_FACTOR: f64 = 4.2;

/// Host-tube radius of the standard configuration.
pub const HOST_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    Standard,
    SmallCap,
    Embedded,
    Slab,
    Cascade,
}

/// Parsed construction request used by the CLI and the sweep harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionSpec {
    pub kind: ConstructionKind,
    pub n: usize,
    pub delta: f64,
    #[serde(default)]
    pub n_target: Option<u64>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

/// Desk-scale gate for the constructors. The asymptotic theory assumes
/// δ < 1/100 ([`DELTA_REGIME_MAX`]), but the interesting experiments run at
/// δ ∈ {1/16, ..., 1/64}; the geometry stays valid as long as net pitches
/// and tilts remain small angles, which caps δ at 1/8 here.
pub const DELTA_DESK_MAX: f64 = 0.125;

fn check_regime_delta(delta: f64) -> Result<()> {
    let _ = DELTA_REGIME_MAX;
    if !(delta > 0.0 && delta <= DELTA_DESK_MAX + 1e-15) {
        return Err(Error::RegimeViolation {
            what: format!("delta = {delta} outside the constructor regime (0, 1/8]"),
            crossover: DELTA_DESK_MAX,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Direction nets
// ---------------------------------------------------------------------------

/// Maximal `sep`-separated direction net on S^{n-1}/{±1}, optionally
/// restricted to a cap around `cap_center` of angular radius `cap_radius`.
///
/// n = 2 uses exact angle grids; n = 3 uses spherical ring grids; the result
/// is greedily filtered so the pairwise-angle invariant holds by
/// construction. Deterministic.
pub fn direction_net(
    n: usize,
    sep: f64,
    cap: Option<(&Direction, f64)>,
) -> Result<Vec<Direction>> {
    if !(sep > 0.0 && sep < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidGeometry("net separation out of range".into()));
    }
    let pitch = sep * 1.02;
    let candidates: Vec<Vec<f64>> = match (n, cap) {
        (2, None) => {
            let k = (std::f64::consts::PI / pitch).floor().max(1.0) as usize;
            let step = std::f64::consts::PI / k as f64;
            (0..k)
                .map(|j| {
                    let th = j as f64 * step;
                    vec![th.cos(), th.sin()]
                })
                .collect()
        }
        (2, Some((base, radius))) => {
            let b = base.as_slice();
            let base_angle = b[1].atan2(b[0]);
            let jmax = (radius / pitch).floor() as i64;
            (-jmax..=jmax)
                .map(|j| {
                    let th = base_angle + j as f64 * pitch;
                    vec![th.cos(), th.sin()]
                })
                .collect()
        }
        (3, maybe_cap) => {
            let theta_max = maybe_cap.map_or(std::f64::consts::FRAC_PI_2, |(_, r)| r);
            let mut pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0, 1.0]];
            let rings = (theta_max / pitch).floor() as usize;
            for i in 1..=rings {
                let theta = i as f64 * pitch;
                let count = ((2.0 * std::f64::consts::PI * theta.sin() / pitch).floor() as usize)
                    .max(1);
                // the equator ring of the quotient only covers half the circle
                let phi_span = if (theta - std::f64::consts::FRAC_PI_2).abs() < pitch / 2.0 {
                    std::f64::consts::PI
                } else {
                    2.0 * std::f64::consts::PI
                };
                let count = ((count as f64 * phi_span / (2.0 * std::f64::consts::PI)).ceil()
                    as usize)
                    .max(1);
                for j in 0..count {
                    let phi = phi_span * j as f64 / count as f64;
                    pts.push(vec![
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ]);
                }
            }
            match maybe_cap {
                None => pts,
                Some((base, _)) => {
                    // rotate the polar grid so the pole lands on the base direction
                    let b = base.as_slice();
                    let rot = rotation_to(&[0.0, 0.0, 1.0], b);
                    pts.iter().map(|p| apply3(&rot, p)).collect()
                }
            }
        }
        (n, maybe_cap) => {
            // seeded greedy packing for higher dimensions
            let mut rng = crate::rng::block_rng(0xd14e, n as u64, 0);
            let budget = 4000usize;
            let mut pts = Vec::with_capacity(budget);
            for _ in 0..budget {
                let v = crate::rng::unit_sphere(&mut rng, n);
                if let Some((base, radius)) = maybe_cap {
                    let c = geom::dot(&v, base.as_slice()).abs().min(1.0);
                    if c.acos() > radius {
                        continue;
                    }
                }
                pts.push(v);
            }
            pts
        }
    };
    // greedy filter guarantees pairwise separation regardless of grid details
    let mut net: Vec<Direction> = Vec::new();
    for c in candidates {
        let d = Direction::new(&c)?;
        if net.iter().all(|e| e.angle_to(&d) > sep) {
            net.push(d);
        }
    }
    Ok(net)
}

/// Rotation matrix (rows) taking unit vector `from` to unit vector `to` in R^3.
fn rotation_to(from: &[f64], to: &[f64]) -> [[f64; 3]; 3] {
    let c = geom::dot(from, to);
    let vx = from[1] * to[2] - from[2] * to[1];
    let vy = from[2] * to[0] - from[0] * to[2];
    let vz = from[0] * to[1] - from[1] * to[0];
    let s2 = vx * vx + vy * vy + vz * vz;
    if s2 < 1e-24 {
        if c > 0.0 {
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        }
        // antipodal: any half-turn works; pick the x-axis
        return [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    }
    let k = (1.0 - c) / s2;
    [
        [c + k * vx * vx, k * vx * vy - vz, k * vx * vz + vy],
        [k * vx * vy + vz, c + k * vy * vy, k * vy * vz - vx],
        [k * vx * vz - vy, k * vy * vz + vx, c + k * vz * vz],
    ]
}

fn apply3(m: &[[f64; 3]; 3], v: &[f64]) -> Vec<f64> {
    (0..3)
        .map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
        .collect()
}

/// Cross-section offsets on a lattice of pitch `pitch` inside the (n−1)-ball
/// of radius `radius` in the plane orthogonal to `e`. Offsets are returned as
/// full n-vectors orthogonal to `e`, in deterministic lexicographic order.
fn cross_section_offsets(e: &Direction, radius: f64, pitch: f64) -> Vec<Vec<f64>> {
    let n = e.dim();
    let basis = geom::orthonormal_complement(e.as_slice());
    let kmax = (radius / pitch).floor() as i64;
    let mut out = Vec::new();
    let m = n - 1;
    let mut idx = vec![-kmax; m];
    loop {
        let r2: f64 = idx.iter().map(|&k| (k as f64 * pitch).powi(2)).sum();
        if r2.sqrt() <= radius {
            let mut u = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                geom::axpy(&mut u, idx[j] as f64 * pitch, b);
            }
            out.push(u);
        }
        let mut i = 0;
        loop {
            idx[i] += 1;
            if idx[i] <= kmax {
                break;
            }
            idx[i] = -kmax;
            i += 1;
            if i == m {
                return out;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Standard configuration (large N)
// ---------------------------------------------------------------------------

/// The large-N sharp example: a full direction net, each direction filled
/// with disjoint parallel δ-tubes packing a host tube of radius ~1/2 through
/// the common center `center`.
pub fn standard_configuration(n: usize, delta: f64, center: &[f64]) -> Result<TubeFamily> {
    check_regime_delta(delta)?;
    if center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: center.len(),
        });
    }
    let net = direction_net(n, NET_SEP_FACTOR * delta, None)?;
    let mut fam = TubeFamily::new(n, delta, DEFAULT_C0)?;
    for e in &net {
        for u in cross_section_offsets(e, HOST_RADIUS - delta / 2.0, 2.0 * delta) {
            let c = geom::add(center, &u);
            fam.push(Tube::unit(c, e.clone(), delta)?)?;
        }
    }
    Ok(fam)
}

// ---------------------------------------------------------------------------
// Small-cap configuration (small N)
// ---------------------------------------------------------------------------

/// The small-N sharp example: ~√N directions δ-separated inside a cap of
/// radius N^{1/(2n−2)}·δ, each filled with ~√N disjoint tubes sharing the
/// common center (the origin).
pub fn small_cap_configuration(n: usize, delta: f64, n_target: u64) -> Result<TubeFamily> {
    check_regime_delta(delta)?;
    if n_target == 0 {
        return Err(Error::InvalidGeometry("need N >= 1".into()));
    }
    let rho = (n_target as f64).powf(1.0 / (2.0 * (n as f64 - 1.0))) * delta;
    if rho > 1.0 {
        return Err(Error::RegimeViolation {
            what: format!(
                "N = {n_target} exceeds the small-N regime for delta = {delta}"
            ),
            crossover: delta.powi(2 - 2 * n as i32),
        });
    }
    let mut base = vec![0.0; n];
    base[n - 1] = 1.0;
    let base = Direction::from_canonical_unit(base);
    let net = if rho <= NET_SEP_FACTOR * delta {
        vec![base.clone()]
    } else {
        direction_net(n, NET_SEP_FACTOR * delta, Some((&base, rho)))?
    };
    let host = (rho / 2.0 - delta / 2.0).max(0.0);
    let mut fam = TubeFamily::new(n, delta, DEFAULT_C0)?;
    for e in &net {
        for u in cross_section_offsets(e, host, 2.0 * delta) {
            fam.push(Tube::unit(u, e.clone(), delta)?)?;
        }
    }
    Ok(fam)
}

// ---------------------------------------------------------------------------
// Embedded configuration
// ---------------------------------------------------------------------------

/// Lifts the d-dimensional small-N sharp example into R^n with centers and
/// directions in R^d × {0}^{n−d}.
pub fn embedded_configuration(n: usize, d: usize, delta: f64, n_target: u64) -> Result<TubeFamily> {
    if !(2..=n).contains(&d) {
        return Err(Error::InvalidGeometry(format!(
            "need 2 <= d <= n (got d = {d}, n = {n})"
        )));
    }
    let inner = small_cap_configuration(d, delta, n_target)?;
    if d == n {
        return Ok(inner);
    }
    let mut fam = TubeFamily::new(n, delta, DEFAULT_C0)?;
    for t in &inner.tubes {
        let mut center = t.center.clone();
        center.resize(n, 0.0);
        let mut dirv = t.direction.as_slice().to_vec();
        dirv.resize(n, 0.0);
        fam.push(Tube::unit(center, Direction::new(&dirv)?, delta)?)?;
    }
    Ok(fam)
}

// ---------------------------------------------------------------------------
// Slab configuration
// ---------------------------------------------------------------------------

/// The slab E ⊂ R^{n−1} a slab family lives over: [0,s]^d × [0,δ]^{n−1−d}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlabBox {
    pub side: f64,
    pub d: usize,
    pub delta: f64,
    /// dimension of the ambient horizontal space, n − 1
    pub m: usize,
}

impl SlabBox {
    pub fn hi(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| if i < self.d { self.side } else { self.delta })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.d as i32) * self.delta.powi((self.m - self.d) as i32)
    }
}

/// Packs ~√N near-vertical directions × ~√N tubes into E×[0,2] where
/// E = [0, N^{1/2d}δ]^d × [0, δ]^{n−1−d}. Returns the family and E.
///
/// Directions are ê ∝ (v, 0, 1) with v on a d-dimensional grid of pitch
/// `NET_SEP_FACTOR`·δ; within a direction, tubes sit on a 2δ horizontal
/// lattice and a vertical ladder centered at z = 1 whose pitch keeps parallel
/// tubes radially separated. A final greedy filter drops any offset whose
/// parallel-pair separation certificate fails.
pub fn slab_configuration(
    n: usize,
    d: usize,
    delta: f64,
    n_target: u64,
) -> Result<(TubeFamily, SlabBox)> {
    check_regime_delta(delta)?;
    if !(2..=n.saturating_sub(1)).contains(&d) {
        return Err(Error::InvalidGeometry(format!(
            "slab needs 2 <= d <= n−1 (got d = {d}, n = {n})"
        )));
    }
    let side = (n_target as f64).powf(1.0 / (2.0 * d as f64)) * delta;
    if side > 1.0 {
        return Err(Error::RegimeViolation {
            what: format!("N = {n_target} exceeds the slab regime for delta = {delta}"),
            crossover: delta.powi(-2 * d as i32),
        });
    }
    let slab = SlabBox {
        side,
        d,
        delta,
        m: n - 1,
    };
    let pitch = NET_SEP_FACTOR * delta;
    let tilt_max = (side - 2.0 * delta).max(0.0);
    let jmax = (tilt_max / pitch).floor() as i64;
    // direction grid: v in (pitch·Z)^d, |v_i| <= tilt_max
    let mut dirs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // (v, unit direction)
    let mut idx = vec![-jmax; d];
    loop {
        let v: Vec<f64> = idx.iter().map(|&k| k as f64 * pitch).collect();
        let mut full = vec![0.0; n];
        full[..d].copy_from_slice(&v);
        full[n - 1] = 1.0;
        let norm = geom::norm(&full);
        let unit: Vec<f64> = full.iter().map(|x| x / norm).collect();
        dirs.push((v, unit));
        let mut i = 0;
        loop {
            idx[i] += 1;
            if idx[i] <= jmax {
                break;
            }
            idx[i] = -jmax;
            i += 1;
            if i == d {
                break;
            }
        }
        if idx.iter().all(|&k| k == -jmax) {
            break;
        }
    }
    let mut fam = TubeFamily::new(n, delta, DEFAULT_C0)?;
    for (v, unit) in dirs {
        let e = Direction::new(&unit)?;
        let sin_theta = (1.0 - unit[n - 1] * unit[n - 1]).max(0.0).sqrt();
        // horizontal center positions: the tube's shadow spans |v_i| + δ along
        // slab axis i, so centers stay in [margin_i, side − margin_i]
        let mut per_axis: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            let margin = (v[i].abs() + delta) / 2.0 + delta / 4.0;
            let span = side - 2.0 * margin;
            if span < 0.0 {
                per_axis.push(vec![]);
                break;
            }
            let count = (span / (2.0 * delta)).floor() as usize + 1;
            per_axis.push((0..count).map(|k| margin + k as f64 * 2.0 * delta).collect());
        }
        if per_axis.len() < d || per_axis.iter().any(|a| a.is_empty()) {
            continue;
        }
        // vertical ladder centered at 1.0; pitch keeps parallel radial offsets > δ
        let z_vals: Vec<f64> = if sin_theta < 1e-12 {
            vec![1.0]
        } else {
            let zpitch = 1.5 * delta / sin_theta;
            let cos_theta = unit[n - 1];
            let z_margin = cos_theta / 2.0 + delta;
            let kmax = ((1.0 - z_margin) / zpitch).floor().max(0.0) as i64;
            (-kmax..=kmax).map(|k| 1.0 + k as f64 * zpitch).collect()
        };
        // enumerate offsets, filter for certified parallel separation
        let mut kept: Vec<Tube> = Vec::new();
        let mut combo = vec![0usize; d];
        'combos: loop {
            let mut horiz = vec![0.0; n];
            for i in 0..d {
                horiz[i] = per_axis[i][combo[i]];
            }
            for i in d..n - 1 {
                horiz[i] = delta / 2.0;
            }
            for &z in &z_vals {
                let mut c = horiz.clone();
                c[n - 1] = z;
                let t = Tube::unit(c, e.clone(), delta)?;
                let ok = kept.iter().all(|s| {
                    let w = geom::sub(&t.center, &s.center);
                    let a = geom::dot(&w, e.as_slice());
                    let rad2 = geom::dot(&w, &w) - a * a;
                    rad2.sqrt() > 1.05 * delta || a.abs() >= 1.0
                });
                if ok {
                    kept.push(t);
                }
            }
            let mut i = 0;
            loop {
                combo[i] += 1;
                if combo[i] < per_axis[i].len() {
                    break;
                }
                combo[i] = 0;
                i += 1;
                if i == d {
                    break 'combos;
                }
            }
        }
        for t in kept {
            fam.push(t)?;
        }
    }
    Ok((fam, slab))
}

/// Containment check for slab output: every tube inside E×[0,2].
pub fn tube_in_slab(t: &Tube, slab: &SlabBox) -> bool {
    let n = t.dim();
    let (a, b) = t.axis_endpoints();
    let hi = slab.hi();
    for p in [&a, &b] {
        for i in 0..n - 1 {
            if p[i] - t.delta / 2.0 < -1e-12 || p[i] + t.delta / 2.0 > hi[i] + 1e-12 {
                return false;
            }
        }
        if p[n - 1] - t.delta / 2.0 < -1e-12 || p[n - 1] + t.delta / 2.0 > 2.0 + 1e-12 {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Cascade
// ---------------------------------------------------------------------------

/// Geometrically shrinking small-N configurations translated far apart:
/// component k holds ~N₀/2^k tubes, N₀ ~ δ^{2−2n}. Union volume is Θ(1).
pub fn cascade_example(n: usize, delta: f64) -> Result<Vec<TubeFamily>> {
    check_regime_delta(delta)?;
    let n0 = delta.powi(2 - 2 * n as i32).floor() as u64;
    let mut out = Vec::new();
    let mut target = n0;
    let mut k = 0u32;
    while target >= 1 {
        let mut fam = small_cap_configuration(n, delta, target)?;
        // component spacing 12 along the first axis keeps center distances > 10
        let shift = 12.0 * k as f64;
        for t in fam.tubes.iter_mut() {
            t.center[0] += shift;
        }
        out.push(fam);
        if target == 1 {
            break;
        }
        target /= 2;
        k += 1;
    }
    Ok(out)
}

/// Merges cascade components into a single family (they share n, δ, c0).
pub fn merge_families(parts: &[TubeFamily]) -> Result<TubeFamily> {
    let first = parts
        .first()
        .ok_or_else(|| Error::EmptySet("no families to merge".into()))?;
    let mut fam = TubeFamily::new(first.n, first.delta, first.c0)?;
    for p in parts {
        if p.n != first.n || (p.delta - first.delta).abs() > 1e-15 {
            return Err(Error::InvalidGeometry(
                "merge requires equal n and delta".into(),
            ));
        }
        for t in &p.tubes {
            fam.push(t.clone())?;
        }
    }
    Ok(fam)
}

/// Builds the family (or merged family) a spec describes.
pub fn build(spec: &ConstructionSpec) -> Result<TubeFamily> {
    match spec.kind {
        ConstructionKind::Standard => {
            let center = spec.center.clone().unwrap_or_else(|| vec![0.0; spec.n]);
            standard_configuration(spec.n, spec.delta, &center)
        }
        ConstructionKind::SmallCap => {
            let n_target = spec.n_target.ok_or_else(|| {
                Error::PreconditionFailed("small_cap requires a target N".into())
            })?;
            small_cap_configuration(spec.n, spec.delta, n_target)
        }
        ConstructionKind::Embedded => {
            let n_target = spec.n_target.ok_or_else(|| {
                Error::PreconditionFailed("embedded requires a target N".into())
            })?;
            let d = spec
                .d
                .ok_or_else(|| Error::PreconditionFailed("embedded requires d".into()))?;
            embedded_configuration(spec.n, d, spec.delta, n_target)
        }
        ConstructionKind::Slab => {
            let n_target = spec
                .n_target
                .ok_or_else(|| Error::PreconditionFailed("slab requires a target N".into()))?;
            let d = spec
                .d
                .ok_or_else(|| Error::PreconditionFailed("slab requires d".into()))?;
            slab_configuration(spec.n, d, spec.delta, n_target).map(|(f, _)| f)
        }
        ConstructionKind::Cascade => {
            let parts = cascade_example(spec.n, spec.delta)?;
            merge_families(&parts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{multiplicity_at, union_volume, VolumeMethod};
    use crate::tube::{is_delta_separated, is_essentially_distinct};

    #[test]
    fn net_is_separated_and_maximal_scale() {
        for delta in [1.0 / 16.0, 1.0 / 32.0] {
            let net = direction_net(2, delta, None).unwrap();
            for i in 0..net.len() {
                for j in (i + 1)..net.len() {
                    assert!(net[i].angle_to(&net[j]) > delta);
                }
            }
            let expect = std::f64::consts::PI / delta;
            assert!(
                net.len() as f64 >= 0.5 * expect && net.len() as f64 <= 1.5 * expect,
                "n=2 net size {} vs scale {expect}",
                net.len()
            );
        }
        let delta = 1.0 / 16.0;
        let net3 = direction_net(3, delta, None).unwrap();
        for i in 0..net3.len() {
            for j in (i + 1)..net3.len() {
                assert!(net3[i].angle_to(&net3[j]) > delta);
            }
        }
        // ~ 2π/(π (δ/2)²)-ish up to packing constants
        let scale = 1.0 / (delta * delta);
        assert!(
            net3.len() as f64 >= 0.5 * scale && net3.len() as f64 <= 8.0 * scale,
            "n=3 net size {} vs scale {scale}",
            net3.len()
        );
    }

    #[test]
    fn standard_counts_and_distinctness() {
        let delta = 1.0 / 16.0;
        let fam = standard_configuration(2, delta, &[0.0, 0.0]).unwrap();
        let scale = delta.powi(-2);
        let n = fam.len() as f64;
        assert!(
            n >= scale / 8.0 && n <= 4.0 * scale,
            "standard N = {n} vs δ^-2 = {scale}"
        );
        // all inside B(O, 2)
        for t in &fam.tubes {
            assert!(geom::norm(&t.center) + t.circumradius() <= 2.0);
        }
        assert!(is_essentially_distinct(&fam).unwrap().distinct);
        assert!(is_delta_separated(&fam).min_angle > delta || !is_delta_separated(&fam).separated);
    }

    #[test]
    fn standard_translation_equivariance() {
        // far outside any sensible regime
        assert!(standard_configuration(2, 0.3, &[0.0, 0.0]).is_err());
        let delta = 1.0 / 128.0;
        let a = standard_configuration(2, delta, &[0.0, 0.0]).unwrap();
        let b = standard_configuration(2, delta, &[0.25, -0.5]).unwrap();
        assert_eq!(a.len(), b.len());
        for (ta, tb) in a.tubes.iter().zip(&b.tubes) {
            assert!((ta.center[0] + 0.25 - tb.center[0]).abs() < 1e-12);
            assert!((ta.center[1] - 0.5 - tb.center[1]).abs() < 1e-12);
            assert!(ta.direction.same_canonical(&tb.direction));
        }
    }

    #[test]
    fn standard_multiplicity_at_center() {
        let delta = 1.0 / 16.0;
        let fam = standard_configuration(2, delta, &[0.0, 0.0]).unwrap();
        let mu = multiplicity_at(&fam, &[0.0, 0.0]);
        let scale = 16.0;
        assert!(
            mu as f64 >= scale / 4.0 && mu as f64 <= 4.0 * scale,
            "mu(O) = {mu}"
        );
    }

    #[test]
    fn small_cap_examples() {
        let delta = 1.0 / 64.0;
        let fam = small_cap_configuration(2, delta, 256).unwrap();
        // ~√N directions and ~√N per direction up to net constants
        let mut dirs: Vec<&Direction> = Vec::new();
        'outer: for t in &fam.tubes {
            for d in &dirs {
                if d.same_canonical(&t.direction) {
                    continue 'outer;
                }
            }
            dirs.push(&t.direction);
        }
        assert!(
            dirs.len() >= 3 && dirs.len() <= 32,
            "directions {}",
            dirs.len()
        );
        assert!(fam.len() >= 24 && fam.len() <= 512, "N = {}", fam.len());
        assert!(is_essentially_distinct(&fam).unwrap().distinct);
        // union fits inside a tube of radius ~ρ = √N δ around the vertical axis
        let rho = 16.0 * delta;
        for t in &fam.tubes {
            let (a, b) = t.axis_endpoints();
            for p in [a, b] {
                assert!(p[0].abs() <= 1.5 * rho, "horizontal reach {}", p[0]);
            }
        }
    }

    #[test]
    fn small_cap_degenerate_single() {
        let fam = small_cap_configuration(2, 1.0 / 64.0, 1).unwrap();
        assert_eq!(fam.len(), 1);
        let fam3 = small_cap_configuration(3, 1.0 / 32.0, 1).unwrap();
        assert_eq!(fam3.len(), 1);
    }

    #[test]
    fn small_cap_regime_rejection() {
        let delta = 1.0f64 / 64.0;
        let too_big = (delta.powi(-2) as u64) * 2;
        let err = small_cap_configuration(2, delta, too_big).unwrap_err();
        match err {
            Error::RegimeViolation { crossover, .. } => {
                assert!((crossover - delta.powi(-2)).abs() < 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn embedded_is_lifted() {
        let delta = 1.0 / 32.0;
        let fam = embedded_configuration(3, 2, delta, 256).unwrap();
        assert!(!fam.is_empty());
        for t in &fam.tubes {
            assert_eq!(t.direction.as_slice()[2], 0.0);
            assert_eq!(t.center[2], 0.0);
        }
        assert!(is_essentially_distinct(&fam).unwrap().distinct);
        // d = n reduces to the plain constructor
        let a = embedded_configuration(2, 2, delta, 64).unwrap();
        let b = small_cap_configuration(2, delta, 64).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(embedded_configuration(3, 1, delta, 4).is_err());
        assert!(embedded_configuration(3, 4, delta, 4).is_err());
    }

    #[test]
    fn slab_counts_and_containment() {
        let delta = 1.0 / 32.0;
        let (fam, slab) = slab_configuration(3, 2, delta, 4096).unwrap();
        assert!((slab.side - 0.25).abs() < 1e-12, "side {}", slab.side);
        let n = fam.len() as f64;
        assert!(
            n >= 4096.0 / 64.0 && n <= 4096.0,
            "slab count {n} out of [N/64, N]"
        );
        for t in &fam.tubes {
            assert!(tube_in_slab(t, &slab), "tube escapes the slab");
        }
        assert!(is_essentially_distinct(&fam).unwrap().distinct);
        // n = 2, d = 2 violates d <= n-1
        assert!(slab_configuration(2, 2, delta, 64).is_err());
    }

    #[test]
    fn slab_scale_invariance() {
        // the construction in δ-units is identical across δ for fixed N
        let (a, _) = slab_configuration(3, 2, 1.0 / 32.0, 4096).unwrap();
        let (b, _) = slab_configuration(3, 2, 1.0 / 64.0, 4096).unwrap();
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn cascade_component_counts() {
        let delta = 1.0 / 32.0;
        let parts = cascade_example(2, delta).unwrap();
        assert!(parts.len() >= 9, "components {}", parts.len());
        // counts decrease geometrically and end at one tube
        for w in parts.windows(2) {
            assert!(w[1].len() <= w[0].len());
        }
        assert_eq!(parts.last().unwrap().len(), 1);
        // pairwise component center distance along x exceeds 10
        for (i, p) in parts.iter().enumerate() {
            for (j, q) in parts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let dx = (p.tubes[0].center[0] - q.tubes[0].center[0]).abs();
                assert!(dx > 10.0, "components {i},{j} too close: {dx}");
            }
        }
    }

    #[test]
    fn cascade_union_volume_is_order_one() {
        let delta = 1.0 / 32.0;
        let parts = cascade_example(2, delta).unwrap();
        let merged = merge_families(&parts).unwrap();
        let est = union_volume(&merged, VolumeMethod::MonteCarlo, 400_000, 5, None).unwrap();
        assert!(
            est.value > 0.2 && est.value < 10.0,
            "cascade union volume {}",
            est.value
        );
    }
}
