//! Volume and multiplicity estimation for tube unions: μ = Σ 1_T, its
//! maximum ν, the union volume, the two-regime lower bound, and the bush
//! argument as a checkable report.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{block_rng, BLOCK};
use crate::tube::{angle, tube_volume, TubeFamily};

/// max(√N·δ^{n−1}, N·δ^{2n−2}) with constant 1: the two-regime lower bound
/// shape. Empirical constants are measured by the sweep harness, not asserted
/// here.
pub fn lower_bound(n_tubes: u64, delta: f64, dim: usize) -> f64 {
    let n = n_tubes as f64;
    let small = n.sqrt() * delta.powi(dim as i32 - 1);
    let large = n * delta.powi(2 * dim as i32 - 2);
    small.max(large)
}

/// Exact count of tubes containing `x`.
pub fn multiplicity_at(f: &TubeFamily, x: &[f64]) -> usize {
    f.tubes.iter().filter(|t| t.contains(x)).count()
}

// ---------------------------------------------------------------------------
// Spatial index
// ---------------------------------------------------------------------------

/// Uniform-grid index over tube axes; queries return candidate tube ids.
pub struct TubeIndex<'a> {
    family: &'a TubeFamily,
    lo: Vec<f64>,
    cell: f64,
    dims: Vec<usize>,
    buckets: Vec<Vec<u32>>,
}

impl<'a> TubeIndex<'a> {
    pub fn build(family: &'a TubeFamily) -> Self {
        let n = family.n;
        let (lo, hi) = if family.is_empty() {
            (vec![0.0; n], vec![1.0; n])
        } else {
            family.bounding_box(family.delta)
        };
        let max_height = family
            .tubes
            .iter()
            .map(|t| t.height)
            .fold(1.0f64, f64::max);
        let cell = (max_height / 8.0).max(family.delta);
        let dims: Vec<usize> = (0..n)
            .map(|i| (((hi[i] - lo[i]) / cell).ceil() as usize).max(1))
            .collect();
        let total: usize = dims.iter().product();
        let mut buckets = vec![Vec::new(); total];
        let flat = |idx: &[usize]| -> usize {
            let mut acc = 0usize;
            for d in (0..n).rev() {
                acc = acc * dims[d] + idx[d];
            }
            acc
        };
        // rasterize each axis with a reach of tube radius + half cell diagonal
        let mut stamp = vec![u32::MAX; total];
        for (id, t) in family.tubes.iter().enumerate() {
            let reach = t.delta / 2.0 + cell * (n as f64).sqrt() / 2.0;
            let r_cells = (reach / cell).ceil() as i64;
            let steps = ((t.height / cell).ceil() as usize * 2).max(2);
            for s in 0..=steps {
                let frac = s as f64 / steps as f64 - 0.5;
                let p = t.axis_point(frac);
                let base: Vec<i64> = (0..n)
                    .map(|i| ((p[i] - lo[i]) / cell).floor() as i64)
                    .collect();
                // mark the neighborhood around the axis point
                let mut off = vec![-r_cells; n];
                'offs: loop {
                    let mut idx = vec![0usize; n];
                    let mut ok = true;
                    for i in 0..n {
                        let v = base[i] + off[i];
                        if v < 0 || v >= dims[i] as i64 {
                            ok = false;
                            break;
                        }
                        idx[i] = v as usize;
                    }
                    if ok {
                        let fidx = flat(&idx);
                        if stamp[fidx] != id as u32 {
                            stamp[fidx] = id as u32;
                            buckets[fidx].push(id as u32);
                        }
                    }
                    let mut i = 0;
                    loop {
                        off[i] += 1;
                        if off[i] <= r_cells {
                            break;
                        }
                        off[i] = -r_cells;
                        i += 1;
                        if i == n {
                            break 'offs;
                        }
                    }
                }
            }
        }
        TubeIndex {
            family,
            lo,
            cell,
            dims,
            buckets,
        }
    }

    fn bucket_of(&self, x: &[f64]) -> Option<usize> {
        let n = self.family.n;
        let mut acc = 0usize;
        for d in (0..n).rev() {
            let v = ((x[d] - self.lo[d]) / self.cell).floor();
            if v < 0.0 || v >= self.dims[d] as f64 {
                return None;
            }
            acc = acc * self.dims[d] + v as usize;
        }
        Some(acc)
    }

    /// Exact multiplicity at `x`, scanning only indexed candidates.
    pub fn multiplicity_at(&self, x: &[f64]) -> usize {
        match self.bucket_of(x) {
            Some(b) => self.buckets[b]
                .iter()
                .filter(|&&id| self.family.tubes[id as usize].contains(x))
                .count(),
            None => 0,
        }
    }

    pub fn covered(&self, x: &[f64]) -> bool {
        match self.bucket_of(x) {
            Some(b) => self.buckets[b]
                .iter()
                .any(|&id| self.family.tubes[id as usize].contains(x)),
            None => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Union volume
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    MonteCarlo,
    Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    /// 95% confidence half-width for Monte Carlo; deterministic bracketing
    /// half-width for the grid method.
    pub abs_error_95: f64,
    pub method: VolumeMethod,
    pub samples: u64,
    /// False when a requested target error was not reached in budget.
    pub converged: bool,
}

/// Estimate |∪T| within the family's bounding box inflated by δ.
///
/// Monte Carlo splits the budget into deterministic pre-seeded blocks (the
/// result is bit-identical for a fixed seed regardless of threading); the
/// grid method counts cell centers at resolution `h <= δ/4` and brackets by
/// testing against tubes dilated/eroded by half the cell diagonal.
pub fn union_volume(
    f: &TubeFamily,
    method: VolumeMethod,
    budget: u64,
    seed: u64,
    target_rel_error: Option<f64>,
) -> Result<VolumeEstimate> {
    if f.is_empty() {
        return Err(Error::EmptySet("union volume of an empty family".into()));
    }
    match method {
        VolumeMethod::MonteCarlo => mc_union_volume(f, budget, seed, target_rel_error),
        VolumeMethod::Grid => grid_union_volume(f),
    }
}

fn mc_union_volume(
    f: &TubeFamily,
    budget: u64,
    seed: u64,
    target_rel_error: Option<f64>,
) -> Result<VolumeEstimate> {
    let (lo, hi) = f.bounding_box(f.delta);
    let n = f.n;
    let box_vol: f64 = (0..n).map(|i| hi[i] - lo[i]).product();
    let index = TubeIndex::build(f);
    let blocks = budget.div_ceil(BLOCK).max(1);
    let samples = blocks * BLOCK;
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, 0x0b07, b);
            let mut x = vec![0.0; n];
            let mut h = 0u64;
            for _ in 0..BLOCK {
                for i in 0..n {
                    x[i] = lo[i] + rng.gen::<f64>() * (hi[i] - lo[i]);
                }
                if index.covered(&x) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    // Wilson interval for the coverage probability
    let k = samples as f64;
    let p = hits as f64 / k;
    let z = 1.96f64;
    let denom = 1.0 + z * z / k;
    let center = (p + z * z / (2.0 * k)) / denom;
    let half = (z / denom) * ((p * (1.0 - p) / k + z * z / (4.0 * k * k)).sqrt());
    let value = box_vol * p;
    let abs_error_95 = box_vol * (half + (center - p).abs());
    let converged = match target_rel_error {
        Some(t) => value > 0.0 && abs_error_95 / value <= t,
        None => true,
    };
    Ok(VolumeEstimate {
        value,
        abs_error_95,
        method: VolumeMethod::MonteCarlo,
        samples,
        converged,
    })
}

fn grid_union_volume(f: &TubeFamily) -> Result<VolumeEstimate> {
    let h = f.delta / 4.0;
    let (lo, hi) = f.bounding_box(h);
    let n = f.n;
    let dims: Vec<usize> = (0..n)
        .map(|i| (((hi[i] - lo[i]) / h).ceil() as usize).max(1))
        .collect();
    let cells: usize = dims.iter().product();
    if cells > 200_000_000 {
        return Err(Error::PreconditionFailed(format!(
            "grid method would need {cells} cells; use Monte Carlo"
        )));
    }
    let index = TubeIndex::build(f);
    let slack = h * (n as f64).sqrt() / 2.0;
    // parallel over the last axis, deterministic merge
    let outer = dims[n - 1];
    let inner: usize = dims[..n - 1].iter().product();
    let counts: Vec<(u64, u64, u64)> = (0..outer)
        .into_par_iter()
        .map(|last| {
            let mut mid = 0u64;
            let mut lo_count = 0u64;
            let mut hi_count = 0u64;
            let mut idx = vec![0usize; n];
            idx[n - 1] = last;
            let mut x = vec![0.0; n];
            for flat in 0..inner {
                let mut rem = flat;
                for i in 0..n - 1 {
                    idx[i] = rem % dims[i];
                    rem /= dims[i];
                }
                for i in 0..n {
                    x[i] = lo[i] + h * (idx[i] as f64 + 0.5);
                }
                if let Some(b) = index.bucket_of(&x) {
                    let mut in_union = false;
                    let mut in_eroded = false;
                    let mut in_dilated = false;
                    for &id in &index.buckets[b] {
                        let t = &f.tubes[id as usize];
                        let s = t.axial(&x).abs();
                        let r = t.radial_sq(&x).sqrt();
                        if !in_dilated
                            && s <= t.height / 2.0 + slack
                            && r <= t.delta / 2.0 + slack
                        {
                            in_dilated = true;
                        }
                        if !in_union && s <= t.height / 2.0 && r <= t.delta / 2.0 {
                            in_union = true;
                        }
                        if !in_eroded
                            && s <= (t.height / 2.0 - slack).max(0.0)
                            && r <= (t.delta / 2.0 - slack).max(0.0)
                        {
                            in_eroded = true;
                        }
                        if in_eroded && in_union && in_dilated {
                            break;
                        }
                    }
                    if in_union {
                        mid += 1;
                    }
                    if in_eroded {
                        lo_count += 1;
                    }
                    if in_dilated {
                        hi_count += 1;
                    }
                }
            }
            (mid, lo_count, hi_count)
        })
        .collect();
    let (mid, locnt, hicnt) = counts
        .iter()
        .fold((0u64, 0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let cell_vol = h.powi(n as i32);
    let value = mid as f64 * cell_vol;
    let err = cell_vol * ((mid - locnt).max(hicnt - mid)) as f64;
    Ok(VolumeEstimate {
        value,
        abs_error_95: err,
        method: VolumeMethod::Grid,
        samples: cells as u64,
        converged: true,
    })
}

// ---------------------------------------------------------------------------
// Multiplicity profile
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplicityProfile {
    /// Observed maximum of μ over the probe set.
    pub nu_max: usize,
    pub argmax_point: Vec<f64>,
    /// histogram[k] = number of probe points with μ = k.
    pub histogram: Vec<u64>,
}

/// Probes μ on per-tube axis points plus seeded uniform samples and reports
/// the observed maximum and level histogram.
pub fn multiplicity_profile(f: &TubeFamily, samples: u64, seed: u64) -> Result<MultiplicityProfile> {
    if f.is_empty() {
        return Err(Error::EmptySet("multiplicity of an empty family".into()));
    }
    let index = TubeIndex::build(f);
    let mut nu_max = 0usize;
    let mut argmax = f.tubes[0].center.clone();
    let mut histogram: Vec<u64> = Vec::new();
    let mut record = |mu: usize, x: &[f64], nu_max: &mut usize, argmax: &mut Vec<f64>| {
        if histogram.len() <= mu {
            histogram.resize(mu + 1, 0);
        }
        histogram[mu] += 1;
        if mu > *nu_max {
            *nu_max = mu;
            *argmax = x.to_vec();
        }
    };
    // stratified axis probes: multiplicity peaks sit on tubes
    const AXIS_PROBES: usize = 9;
    for t in &f.tubes {
        for s in 0..AXIS_PROBES {
            let frac = s as f64 / (AXIS_PROBES - 1) as f64 - 0.5;
            let p = t.axis_point(frac);
            let mu = index.multiplicity_at(&p);
            record(mu, &p, &mut nu_max, &mut argmax);
        }
    }
    // uniform probes in the bounding box
    let (lo, hi) = f.bounding_box(f.delta);
    let mut rng = block_rng(seed, 0x3b1e, 0);
    let n = f.n;
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for i in 0..n {
            x[i] = lo[i] + rng.gen::<f64>() * (hi[i] - lo[i]);
        }
        let mu = index.multiplicity_at(&x);
        record(mu, &x, &mut nu_max, &mut argmax);
    }
    Ok(MultiplicityProfile {
        nu_max,
        argmax_point: argmax,
        histogram,
    })
}

// ---------------------------------------------------------------------------
// Bush argument
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BushReport {
    /// Point of (approximately) maximal multiplicity.
    pub center: Vec<f64>,
    /// Observed multiplicity at the center.
    pub nu: usize,
    /// Size of the extracted Cδ-separated sub-bush.
    pub k: usize,
    /// Indices of the sub-bush tubes.
    pub members: Vec<usize>,
    /// Lower bound on Σ |T_i \ B(center, r)| with r = max height / 4.
    pub tail_volume_bound: f64,
    /// True when every pair of the sub-bush provably has disjoint tails
    /// outside B(center, r): sin θ > 2δ/(r − δ).
    pub certified: bool,
}

/// Locates an approximate multiplicity maximum, extracts a Cδ-separated
/// sub-bush through it, and certifies the disjoint-tail volume bound.
pub fn bush_check(f: &TubeFamily, sep_constant: f64) -> Result<BushReport> {
    if f.is_empty() {
        return Err(Error::EmptySet("bush check on an empty family".into()));
    }
    let profile = multiplicity_profile(f, 4096, 0xb054)?;
    let x = profile.argmax_point.clone();
    let through: Vec<usize> = (0..f.len())
        .filter(|&i| f.tubes[i].contains(&x))
        .collect();
    let nu = through.len();
    // greedy Cδ-separated subset in index order
    let mut members: Vec<usize> = Vec::new();
    for &i in &through {
        let ok = members.iter().all(|&j| {
            angle(&f.tubes[i].direction, &f.tubes[j].direction) > sep_constant * f.delta
        });
        if ok {
            members.push(i);
        }
    }
    if members.is_empty() {
        if let Some(&i) = through.first() {
            members.push(i);
        } else {
            // sampling missed every tube; fall back to the first tube's center
            members.push(0);
        }
    }
    let max_height = f
        .tubes
        .iter()
        .map(|t| t.height)
        .fold(f64::NEG_INFINITY, f64::max);
    let r = max_height / 4.0;
    let mut bound = 0.0;
    for &i in &members {
        let t = &f.tubes[i];
        // |T ∩ B(x,r)| <= cross-section · 2r, so the tail keeps the rest
        let tail_fraction = (1.0 - 2.0 * r / t.height).max(0.0);
        bound += tube_volume(t) * tail_fraction;
    }
    let mut certified = true;
    'pairs: for a in 0..members.len() {
        for b in (a + 1)..members.len() {
            let th = angle(
                &f.tubes[members[a]].direction,
                &f.tubes[members[b]].direction,
            );
            if th.sin() <= 2.0 * f.delta / (r - f.delta) {
                certified = false;
                break 'pairs;
            }
        }
    }
    Ok(BushReport {
        center: x,
        nu,
        k: members.len(),
        members,
        tail_volume_bound: bound,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tube::{Direction, Tube};

    fn dir2(theta: f64) -> Direction {
        Direction::new(&[theta.cos(), theta.sin()]).unwrap()
    }

    fn disjoint_parallel(k: usize, delta: f64) -> TubeFamily {
        let e = Direction::new(&[0.0, 1.0]).unwrap();
        let tubes: Vec<Tube> = (0..k)
            .map(|i| Tube::unit(vec![i as f64 * 3.0 * delta, 0.0], e.clone(), delta).unwrap())
            .collect();
        TubeFamily::from_tubes(2, delta, 0.5, tubes).unwrap()
    }

    #[test]
    fn lower_bound_examples() {
        // single tube scale
        assert!((lower_bound(1, 0.25, 2) - 0.25).abs() < 1e-15);
        // crossover: both branches agree at N = δ^{2-2n}
        let delta: f64 = 1.0 / 64.0;
        let n_cross = delta.powi(-2) as u64;
        let small = (n_cross as f64).sqrt() * delta;
        let large = n_cross as f64 * delta * delta;
        assert!((small - large).abs() < 1e-12);
        // direct evaluation
        assert!((lower_bound(1024, 1.0 / 64.0, 2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multiplicity_examples() {
        let delta = 1.0 / 64.0;
        let k = 8;
        let tubes: Vec<Tube> = (0..k)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / k as f64;
                Tube::unit(vec![0.0, 0.0], dir2(th), delta).unwrap()
            })
            .collect();
        let f = TubeFamily::from_tubes(2, delta, 0.5, tubes).unwrap();
        assert_eq!(multiplicity_at(&f, &[0.0, 0.0]), k);
        assert_eq!(multiplicity_at(&f, &[50.0, 50.0]), 0);
        let idx = TubeIndex::build(&f);
        assert_eq!(idx.multiplicity_at(&[0.0, 0.0]), k);
        assert_eq!(idx.multiplicity_at(&[50.0, 50.0]), 0);
    }

    #[test]
    fn union_volume_single_tube() {
        let delta = 0.1;
        let f = disjoint_parallel(1, delta);
        let est = union_volume(&f, VolumeMethod::MonteCarlo, 200_000, 1, None).unwrap();
        assert!(
            (est.value - 0.1).abs() < 3.0 * est.abs_error_95 + 0.002,
            "value {} err {}",
            est.value,
            est.abs_error_95
        );
        let grid = union_volume(&f, VolumeMethod::Grid, 0, 0, None).unwrap();
        assert!((grid.value - 0.1).abs() < grid.abs_error_95 + 1e-9);
    }

    #[test]
    fn union_volume_additive_on_disjoint() {
        let delta = 0.05;
        let f = disjoint_parallel(5, delta);
        let est = union_volume(&f, VolumeMethod::MonteCarlo, 400_000, 2, None).unwrap();
        let expect = 5.0 * delta;
        assert!(
            (est.value - expect).abs() < 3.0 * est.abs_error_95 + 0.003,
            "value {} expect {expect}",
            est.value
        );
        // subadditivity with noise margin
        assert!(est.value <= f.total_tube_volume() + 3.0 * est.abs_error_95);
    }

    #[test]
    fn union_volume_inclusion_exclusion() {
        // two perpendicular crossing tubes: 0.2 − 0.01 = 0.19
        let delta = 0.1;
        let t1 = Tube::unit(vec![0.0, 0.0], Direction::new(&[1.0, 0.0]).unwrap(), delta).unwrap();
        let t2 = Tube::unit(vec![0.0, 0.0], Direction::new(&[0.0, 1.0]).unwrap(), delta).unwrap();
        let f = TubeFamily::from_tubes(2, delta, 0.5, vec![t1, t2]).unwrap();
        let mc = union_volume(&f, VolumeMethod::MonteCarlo, 400_000, 3, None).unwrap();
        assert!(
            (mc.value - 0.19).abs() < 3.0 * mc.abs_error_95 + 0.002,
            "mc {}",
            mc.value
        );
        let grid = union_volume(&f, VolumeMethod::Grid, 0, 0, None).unwrap();
        assert!((grid.value - 0.19).abs() < grid.abs_error_95 + 1e-9, "grid {}", grid.value);
        // methods agree within combined brackets
        assert!((mc.value - grid.value).abs() < mc.abs_error_95 + grid.abs_error_95 + 0.002);
    }

    #[test]
    fn union_volume_is_deterministic() {
        let f = disjoint_parallel(3, 0.05);
        let a = union_volume(&f, VolumeMethod::MonteCarlo, 100_000, 9, None).unwrap();
        let b = union_volume(&f, VolumeMethod::MonteCarlo, 100_000, 9, None).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.abs_error_95.to_bits(), b.abs_error_95.to_bits());
    }

    #[test]
    fn non_converged_flagged() {
        let f = disjoint_parallel(1, 0.05);
        let est = union_volume(&f, VolumeMethod::MonteCarlo, 16_384, 4, Some(1e-6)).unwrap();
        assert!(!est.converged);
    }

    #[test]
    fn bush_on_disjoint_family() {
        let f = disjoint_parallel(6, 0.01);
        let rep = bush_check(&f, 4.0).unwrap();
        assert_eq!(rep.k, 1);
        assert!(rep.tail_volume_bound > 0.0);
    }

    #[test]
    fn bush_of_sixteen() {
        // explicit bush: 16 tubes through the origin with pairwise angles > 4δ
        let delta = 1.0 / 64.0;
        let k = 16;
        let tubes: Vec<Tube> = (0..k)
            .map(|i| {
                let th = 5.0 * delta * i as f64;
                Tube::unit(vec![0.0, 0.0], dir2(th), delta).unwrap()
            })
            .collect();
        let f = TubeFamily::from_tubes(2, delta, 0.5, tubes).unwrap();
        let rep = bush_check(&f, 4.0).unwrap();
        assert_eq!(rep.nu, 16);
        assert_eq!(rep.k, 16);
        // at 5δ separation the rigorous tail certificate needs sinθ > 2δ/(1/4−δ),
        // i.e. θ ≳ 8.5δ; the greedy 9δ extraction certifies
        let rep9 = bush_check(&f, 9.0).unwrap();
        assert!(rep9.certified, "9δ-separated bush should certify");
        assert!(rep9.k >= 8);
        assert!(rep9.tail_volume_bound >= rep9.k as f64 * delta / 2.0 - 1e-12);
    }
}
