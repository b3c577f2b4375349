//! Combinatorial toolbox: the simplex-selection procedure over a finite
//! weighted measure surrogate, and the sumset bound #G <= M^{1/6}·N₀^{11/6}
//! as an exhaustive checker.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;

// ---------------------------------------------------------------------------
// Assignment instances (simplex selection)
// ---------------------------------------------------------------------------

/// A finite surrogate of the measure-space hypothesis: a weighted point
/// cloud S ⊂ R^n, a weighted ground set E, and per-point subsets E_x with
/// weight(E_x) >= c·weight(E).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentInstance {
    pub dim: usize,
    /// S as (point, weight) cells.
    pub s_points: Vec<Vec<f64>>,
    pub s_weights: Vec<f64>,
    /// Ground-set weights; element identity is the index.
    pub e_weights: Vec<f64>,
    /// assignment[i] lists the ground-set indices of E_{x_i}.
    pub assignment: Vec<Vec<usize>>,
    pub c: f64,
}

impl AssignmentInstance {
    pub fn total_e_weight(&self) -> f64 {
        self.e_weights.iter().sum()
    }

    pub fn total_s_weight(&self) -> f64 {
        self.s_weights.iter().sum()
    }

    /// Validates the structural and the weight(E_x) >= c·weight(E) hypotheses.
    pub fn validate(&self) -> Result<()> {
        if self.s_points.len() != self.s_weights.len()
            || self.s_points.len() != self.assignment.len()
        {
            return Err(Error::Schema {
                location: "instance".into(),
                message: "s_points, s_weights and assignment must have equal length".into(),
            });
        }
        if self.s_points.is_empty() {
            return Err(Error::EmptySet("instance has no S cells".into()));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::Schema {
                location: "c".into(),
                message: "c must lie in (0,1)".into(),
            });
        }
        for (i, p) in self.s_points.iter().enumerate() {
            if p.len() != self.dim {
                return Err(Error::Schema {
                    location: format!("s_points[{i}]"),
                    message: format!("dimension {} != {}", p.len(), self.dim),
                });
            }
        }
        let mu_e = self.total_e_weight();
        for (i, subset) in self.assignment.iter().enumerate() {
            let mut w = 0.0;
            for &k in subset {
                if k >= self.e_weights.len() {
                    return Err(Error::Schema {
                        location: format!("assignment[{i}]"),
                        message: format!("ground index {k} out of range"),
                    });
                }
                w += self.e_weights[k];
            }
            if w < self.c * mu_e - 1e-12 * mu_e {
                return Err(Error::PreconditionFailed(format!(
                    "weight(E_x) = {w} below c·weight(E) = {} at cell {i}",
                    self.c * mu_e
                )));
            }
        }
        Ok(())
    }

    fn subset_bits(&self, i: usize) -> Vec<u64> {
        let words = (self.e_weights.len() + 63) / 64;
        let mut bits = vec![0u64; words];
        for &k in &self.assignment[i] {
            bits[k / 64] |= 1 << (k % 64);
        }
        bits
    }

    fn weight_of_bits(&self, bits: &[u64]) -> f64 {
        let mut acc = 0.0;
        for (w, word) in bits.iter().enumerate() {
            let mut v = *word;
            while v != 0 {
                let b = v.trailing_zeros() as usize;
                acc += self.e_weights[w * 64 + b];
                v &= v - 1;
            }
        }
        acc
    }
}

/// Result of the selection process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexSelection {
    /// Indices into the instance's S cells, n+1 of them.
    pub vertices: Vec<usize>,
    /// μ(⋂ E_{x_i}) over the original assignment.
    pub common_weight: f64,
    /// Volume of the simplex spanned by the chosen points.
    pub simplex_volume: f64,
    /// Realized constants: common_weight / μ(E) and volume / |S|.
    pub realized_c: f64,
    pub realized_lambda: f64,
    /// Steps of the outer process that ran.
    pub steps: usize,
    /// True when the process stalled (degenerate S) and the output was
    /// completed by repetition; the volume guarantee is vacuous then.
    pub degenerate: bool,
}

/// Nested-square denominator ((..((1+i₁)²+i₂)²+..+i_k)²+i_{k+1}) for the
/// multi-index prefix of length k+1.
fn nested_denominator(index: &[u32], upto: usize) -> f64 {
    let mut acc = 1.0 + index[0] as f64;
    for &i in index.iter().take(upto).skip(1) {
        acc = acc * acc + i as f64;
    }
    acc
}

/// Distance from a point to the affine span of `pts` (0 <= k <= n-1 points
/// span a k-flat; a single point gives plain distance).
fn distance_to_flat(x: &[f64], pts: &[&[f64]]) -> f64 {
    let base = pts[0];
    let mut diff = geom::sub(x, base);
    // Gram-Schmidt on the span of (pts[j] - base)
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in &pts[1..] {
        let mut v = geom::sub(p, base);
        for b in &basis {
            let t = geom::dot(&v, b);
            geom::axpy(&mut v, -t, b);
        }
        let n = geom::norm(&v);
        if n > 1e-12 {
            basis.push(v.iter().map(|y| y / n).collect());
        }
    }
    for b in &basis {
        let t = geom::dot(&diff, b);
        geom::axpy(&mut diff, -t, b);
    }
    geom::norm(&diff)
}

fn simplex_volume(points: &[&[f64]]) -> f64 {
    let n = points.len() - 1;
    if n == 0 {
        return 0.0;
    }
    // Gram determinant of the edge matrix / n!
    let edges: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| geom::sub(p, points[0]))
        .collect();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = geom::dot(&edges[i], &edges[j]);
        }
    }
    // Cholesky-free determinant by Gaussian elimination
    let mut det: f64 = 1.0;
    let mut a = g;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for i in (col + 1)..n {
            let f = a[i][col] / a[col][col];
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
        }
    }
    let mut fact = 1.0;
    for k in 2..=n {
        fact *= k as f64;
    }
    det.max(0.0).sqrt() / fact
}

/// The explicit selection process: step/substep structure with multi-index I,
/// weighted-median halving radii, the nested-square intersection threshold,
/// and the (1 − 1/D²) survival update. Returns n+1 cells of S with the
/// realized common weight and simplex volume; both postconditions are
/// recomputed from the original instance, never from process state.
pub fn select_simplex(inst: &AssignmentInstance) -> Result<SimplexSelection> {
    inst.validate()?;
    let n = inst.dim;
    let mu_e = inst.total_e_weight();
    let words = (inst.e_weights.len() + 63) / 64;

    // process state
    let mut index: Vec<u32> = vec![1; n];
    let mut e_cur: Vec<u64> = vec![!0u64; words]; // E^I as a bitset over ground indices
    trim_bits(&mut e_cur, inst.e_weights.len());
    let mut s_cur: Vec<usize> = (0..inst.s_points.len()).collect();
    let mut c_cur = inst.c;
    let mut steps = 0usize;
    const MAX_STEPS: usize = 100_000;

    let subset_bits: Vec<Vec<u64>> = (0..inst.s_points.len())
        .map(|i| inst.subset_bits(i))
        .collect();

    loop {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::PreconditionFailed(
                "selection exceeded its step budget; the bounded-step argument excludes this"
                    .into(),
            ));
        }
        if s_cur.is_empty() {
            // degenerate exhaustion (measure-zero analog of S)
            return Ok(finish_degenerate(inst, steps));
        }
        // x0: maximum-weight surviving cell, lexicographic tie-break
        let x0 = *s_cur
            .iter()
            .max_by(|&&a, &&b| {
                inst.s_weights[a]
                    .partial_cmp(&inst.s_weights[b])
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        let mut chosen = vec![x0];
        // intersection of E^I ∩ E_{x0}
        let mut inter: Vec<u64> = e_cur
            .iter()
            .zip(&subset_bits[x0])
            .map(|(a, b)| a & b)
            .collect();
        // candidate pool: survivors inside all previous neighborhoods
        let mut pool: Vec<usize> = s_cur.clone();
        let mut failed_at: Option<usize> = None;
        for k in 0..n {
            // r_{k+1}: weighted median of distances to the k-flat of chosen
            let flat: Vec<&[f64]> = chosen.iter().map(|&i| inst.s_points[i].as_slice()).collect();
            let mut dists: Vec<(f64, usize)> = pool
                .iter()
                .map(|&i| (distance_to_flat(&inst.s_points[i], &flat), i))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let total_w: f64 = dists.iter().map(|&(_, i)| inst.s_weights[i]).sum();
            let mut acc = 0.0;
            let mut r = 0.0;
            let mut split = dists.len();
            for (j, &(d, i)) in dists.iter().enumerate() {
                acc += inst.s_weights[i];
                if acc >= total_w / 2.0 {
                    r = d;
                    split = j + 1;
                    break;
                }
            }
            // D is a closed neighborhood: ties at distance r stay inner
            while split < dists.len() && dists[split].0 <= r + 1e-15 {
                split += 1;
            }
            let inner: Vec<usize> = dists[..split].iter().map(|&(_, i)| i).collect();
            let outer: Vec<usize> = dists[split..].iter().map(|&(_, i)| i).collect();
            // search the outer half for a cell passing the intersection gate
            let gate = c_cur * mu_e / nested_denominator(&index, k + 1).powi(2);
            let mut found: Option<usize> = None;
            let mut scratch = vec![0u64; words];
            for &cand in &outer {
                for w in 0..words {
                    scratch[w] = inter[w] & subset_bits[cand][w];
                }
                if inst.weight_of_bits(&scratch) >= gate {
                    found = Some(cand);
                    break;
                }
            }
            match found {
                Some(cand) => {
                    chosen.push(cand);
                    for w in 0..words {
                        inter[w] &= subset_bits[cand][w];
                    }
                    pool = inner;
                }
                None => {
                    failed_at = Some(k);
                    // E^{I'} = E^I \ inter; survivors = outer; c' update
                    let dsq = nested_denominator(&index, k + 1).powi(2);
                    for w in 0..words {
                        e_cur[w] &= !inter[w];
                    }
                    // subsets shrink implicitly through e_cur in later masks
                    s_cur = outer;
                    c_cur *= 1.0 - 1.0 / dsq;
                    // bump index position k (0-based) i.e. i_{k+1} += 1, reset tail
                    index[k] += 1;
                    for t in (k + 1)..n {
                        index[t] = 1;
                    }
                    break;
                }
            }
        }
        if failed_at.is_none() {
            // success: chosen has n+1 cells
            return Ok(finish(inst, &chosen, steps));
        }
        // on failure the subtraction is carried by e_cur; the next step's
        // intersections re-mask each E_x against it
    }
}

fn trim_bits(bits: &mut [u64], len: usize) {
    let full = len / 64;
    let rem = len % 64;
    for (i, word) in bits.iter_mut().enumerate() {
        if i > full || (i == full && rem == 0) {
            *word = 0;
        } else if i == full {
            *word &= (1u64 << rem) - 1;
        }
    }
}

fn finish(inst: &AssignmentInstance, chosen: &[usize], steps: usize) -> SimplexSelection {
    // evaluate both postconditions on the ORIGINAL assignment
    let words = (inst.e_weights.len() + 63) / 64;
    let mut inter = vec![!0u64; words];
    trim_bits(&mut inter, inst.e_weights.len());
    for &i in chosen {
        let bits = inst.subset_bits(i);
        for w in 0..words {
            inter[w] &= bits[w];
        }
    }
    let common_weight = inst.weight_of_bits(&inter);
    let pts: Vec<&[f64]> = chosen.iter().map(|&i| inst.s_points[i].as_slice()).collect();
    let vol = simplex_volume(&pts);
    let mu_e = inst.total_e_weight();
    let s_total = inst.total_s_weight();
    SimplexSelection {
        vertices: chosen.to_vec(),
        common_weight,
        simplex_volume: vol,
        realized_c: common_weight / mu_e,
        realized_lambda: vol / s_total,
        steps,
        degenerate: false,
    }
}

fn finish_degenerate(inst: &AssignmentInstance, steps: usize) -> SimplexSelection {
    // pad by repeating the heaviest cell: volume 0, common weight still valid
    let heaviest = (0..inst.s_points.len())
        .max_by(|&a, &b| inst.s_weights[a].partial_cmp(&inst.s_weights[b]).unwrap())
        .unwrap();
    let chosen = vec![heaviest; inst.dim + 1];
    let mut out = finish(inst, &chosen, steps);
    out.degenerate = true;
    out
}

// ---------------------------------------------------------------------------
// Sumset instances
// ---------------------------------------------------------------------------

/// A finite instance over Z^k: point sets A, B, a relation G ⊆ A×B, the
/// derived sumset C = {a+b} and the maximal difference fiber M.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SumsetInstance {
    pub rank: usize,
    pub a: Vec<Vec<i64>>,
    pub b: Vec<Vec<i64>>,
    /// pairs as (index into a, index into b)
    pub g: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SumsetCheck {
    pub g_size: u64,
    pub a_size: u64,
    pub b_size: u64,
    pub c_size: u64,
    pub n0: u64,
    pub max_fiber: u64,
    pub fiber_witness: Vec<i64>,
    pub rhs: f64,
    pub holds: bool,
}

/// Exact maximum fiber of (a, b) ↦ a − b over a pair list. Ties between
/// maximizing differences break toward the smallest squared norm, then
/// lexicographically, so the reported witness is canonical.
pub fn max_difference_fiber(pairs: &[(Vec<i64>, Vec<i64>)]) -> (u64, Vec<i64>) {
    let mut fibers: HashMap<Vec<i64>, u64> = HashMap::new();
    for (a, b) in pairs {
        let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        *fibers.entry(diff).or_insert(0) += 1;
    }
    let norm2 = |d: &[i64]| -> i64 { d.iter().map(|x| x * x).sum() };
    let mut best: Option<(&Vec<i64>, u64)> = None;
    for (d, count) in &fibers {
        best = match best {
            None => Some((d, *count)),
            Some((bd, bc)) => {
                let better = *count > bc
                    || (*count == bc
                        && (norm2(d) < norm2(bd)
                            || (norm2(d) == norm2(bd) && d.as_slice() < bd.as_slice())));
                if better {
                    Some((d, *count))
                } else {
                    Some((bd, bc))
                }
            }
        };
    }
    match best {
        Some((d, c)) => (c, d.clone()),
        None => (0, Vec::new()),
    }
}

/// Exhaustive evaluation of the bound #G <= M^{1/6}·N₀^{11/6} with
/// N₀ = max(#A, #B, #C); the derived quantities are enumerated exactly.
pub fn sumset_bound_check(inst: &SumsetInstance) -> Result<SumsetCheck> {
    for (i, p) in inst.a.iter().chain(inst.b.iter()).enumerate() {
        if p.len() != inst.rank {
            return Err(Error::Schema {
                location: format!("points[{i}]"),
                message: format!("rank {} != {}", p.len(), inst.rank),
            });
        }
    }
    let mut c_set: std::collections::HashSet<Vec<i64>> = std::collections::HashSet::new();
    let mut pairs: Vec<(Vec<i64>, Vec<i64>)> = Vec::with_capacity(inst.g.len());
    for &(ia, ib) in &inst.g {
        if ia >= inst.a.len() || ib >= inst.b.len() {
            return Err(Error::Schema {
                location: "g".into(),
                message: format!("pair ({ia},{ib}) out of range"),
            });
        }
        let a = &inst.a[ia];
        let b = &inst.b[ib];
        c_set.insert(a.iter().zip(b).map(|(x, y)| x + y).collect());
        pairs.push((a.clone(), b.clone()));
    }
    let (max_fiber, fiber_witness) = max_difference_fiber(&pairs);
    let a_size = inst.a.len() as u64;
    let b_size = inst.b.len() as u64;
    let c_size = c_set.len() as u64;
    let n0 = a_size.max(b_size).max(c_size);
    let rhs = (max_fiber as f64).powf(1.0 / 6.0) * (n0 as f64).powf(11.0 / 6.0);
    let g_size = inst.g.len() as u64;
    Ok(SumsetCheck {
        g_size,
        a_size,
        b_size,
        c_size,
        n0,
        max_fiber,
        fiber_witness,
        rhs,
        holds: (g_size as f64) <= rhs + 1e-9,
    })
}

/// Seeded random instance over Z^rank with #A, #B <= 30 and a ~35% dense
/// relation, for randomized checking of the sumset bound.
pub fn random_sumset_instance(rank: usize, seed: u64) -> SumsetInstance {
    use rand::Rng;
    let mut rng = crate::rng::block_rng(seed, 0x53a1, 0);
    let na = rng.gen_range(1..=30);
    let nb = rng.gen_range(1..=30);
    let mut gen_pts = |k: usize| -> Vec<Vec<i64>> {
        let mut set = std::collections::HashSet::new();
        while set.len() < k {
            let p: Vec<i64> = (0..rank).map(|_| rng.gen_range(-25..25)).collect();
            set.insert(p);
        }
        let mut v: Vec<Vec<i64>> = set.into_iter().collect();
        v.sort();
        v
    };
    let a = gen_pts(na);
    let b = gen_pts(nb);
    let mut g = Vec::new();
    for i in 0..na {
        for j in 0..nb {
            if rng.gen::<f64>() < 0.35 {
                g.push((i, j));
            }
        }
    }
    SumsetInstance { rank, a, b, g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn grid_instance(cells: usize, ground: usize, keep: f64, c: f64, seed: u64) -> AssignmentInstance {
        let mut rng = crate::rng::block_rng(seed, 0x51e7, 0);
        let side = (cells as f64).sqrt().ceil() as usize;
        let mut s_points = Vec::new();
        let mut s_weights = Vec::new();
        for i in 0..side {
            for j in 0..side {
                if s_points.len() == cells {
                    break;
                }
                s_points.push(vec![
                    (i as f64 + 0.5) / side as f64,
                    (j as f64 + 0.5) / side as f64,
                ]);
                s_weights.push(1.0 / cells as f64);
            }
        }
        let e_weights = vec![1.0; ground];
        let min_size = (c * ground as f64).ceil() as usize;
        let target = ((keep * ground as f64) as usize).max(min_size);
        let assignment: Vec<Vec<usize>> = (0..s_points.len())
            .map(|_| {
                // random subset of fixed size >= c·ground
                let mut idx: Vec<usize> = (0..ground).collect();
                for i in 0..ground {
                    let j = rng.gen_range(i..ground);
                    idx.swap(i, j);
                }
                let mut sub = idx[..target].to_vec();
                sub.sort_unstable();
                sub
            })
            .collect();
        AssignmentInstance {
            dim: 2,
            s_points,
            s_weights,
            e_weights,
            assignment,
            c,
        }
    }

    #[test]
    fn full_assignment_never_shrinks() {
        // E_x = E for all x: intersections stay full
        let ground = 32;
        let mut inst = grid_instance(100, ground, 1.0, 0.5, 1);
        for sub in inst.assignment.iter_mut() {
            *sub = (0..ground).collect();
        }
        let sel = select_simplex(&inst).unwrap();
        assert_eq!(sel.vertices.len(), 3);
        assert!((sel.common_weight - ground as f64).abs() < 1e-9);
        assert!(sel.simplex_volume > 0.0);
        assert!(!sel.degenerate);
        assert!(sel.realized_lambda > 0.0);
    }

    #[test]
    fn random_instances_satisfy_postconditions() {
        for seed in 0..20 {
            let inst = grid_instance(100, 64, 0.8, 0.5, seed);
            let sel = select_simplex(&inst).unwrap();
            assert_eq!(sel.vertices.len(), 3);
            // (a) exhaustive recomputation equals the reported weight
            let mut common = 0.0;
            'ground: for k in 0..inst.e_weights.len() {
                for &v in &sel.vertices {
                    if !inst.assignment[v].contains(&k) {
                        continue 'ground;
                    }
                }
                common += inst.e_weights[k];
            }
            assert!((common - sel.common_weight).abs() < 1e-9);
            assert!(sel.realized_c > 0.0, "realized c' must be positive");
            // (b) volume vs |S|
            assert!(sel.simplex_volume >= 0.0);
            if !sel.degenerate {
                assert!(sel.realized_lambda > 0.0);
            }
        }
    }

    #[test]
    fn degenerate_segment_instance() {
        // one row of cells: all distances to the first flat vanish
        let cells = 20;
        let inst = AssignmentInstance {
            dim: 2,
            s_points: (0..cells)
                .map(|i| vec![i as f64 / cells as f64, 0.5])
                .collect(),
            s_weights: vec![1.0 / cells as f64; cells],
            e_weights: vec![1.0; 16],
            assignment: (0..cells).map(|_| (0..16).collect()).collect(),
            c: 0.5,
        };
        let sel = select_simplex(&inst).unwrap();
        // the simplex volume collapses to the cell floor (zero for point cells)
        assert!(sel.simplex_volume <= 1e-12);
        assert!(sel.common_weight > 0.0);
    }

    #[test]
    fn precondition_violation_rejected() {
        let mut inst = grid_instance(16, 32, 0.8, 0.5, 3);
        inst.assignment[0] = vec![0]; // weight 1 < 16 = c·32
        assert!(select_simplex(&inst).is_err());
    }

    #[test]
    fn fiber_examples() {
        // all distinct differences
        let pairs: Vec<(Vec<i64>, Vec<i64>)> =
            (0..5).map(|i| (vec![2 * i], vec![i])).collect();
        let (m, _) = max_difference_fiber(&pairs);
        assert_eq!(m, 1);
        // constant difference
        let pairs: Vec<(Vec<i64>, Vec<i64>)> = (0..7).map(|i| (vec![i], vec![i])).collect();
        let (m, w) = max_difference_fiber(&pairs);
        assert_eq!(m, 7);
        assert_eq!(w, vec![0]);
    }

    #[test]
    fn singleton_sumset() {
        let inst = SumsetInstance {
            rank: 1,
            a: vec![vec![0]],
            b: vec![vec![0]],
            g: vec![(0, 0)],
        };
        let chk = sumset_bound_check(&inst).unwrap();
        assert_eq!(chk.g_size, 1);
        assert!((chk.rhs - 1.0).abs() < 1e-12);
        assert!(chk.holds);
    }

    #[test]
    fn triangular_instance_reproduced() {
        // A = B = {0..9}, G = {(a,b): a+b <= 9}
        let pts: Vec<Vec<i64>> = (0..10).map(|i| vec![i]).collect();
        let mut g = Vec::new();
        for i in 0..10usize {
            for j in 0..10usize {
                if i + j <= 9 {
                    g.push((i, j));
                }
            }
        }
        let inst = SumsetInstance {
            rank: 1,
            a: pts.clone(),
            b: pts,
            g,
        };
        let chk = sumset_bound_check(&inst).unwrap();
        assert_eq!(chk.g_size, 55);
        assert_eq!(chk.c_size, 10);
        assert_eq!(chk.max_fiber, 5);
        assert_eq!(chk.fiber_witness, vec![0]);
        assert_eq!(chk.n0, 10);
        let expect = 5f64.powf(1.0 / 6.0) * 10f64.powf(11.0 / 6.0);
        assert!((chk.rhs - expect).abs() < 1e-9);
        assert!((chk.rhs - 89.09).abs() < 0.05, "rhs {}", chk.rhs);
        assert!(chk.holds);
    }

    #[test]
    fn random_rank2_instances_never_violate() {
        let mut rng = crate::rng::block_rng(9, 0x5e7, 0);
        for _ in 0..200 {
            let na = rng.gen_range(1..=30);
            let nb = rng.gen_range(1..=30);
            let a: Vec<Vec<i64>> = (0..na)
                .map(|_| vec![rng.gen_range(-20..20), rng.gen_range(-20..20)])
                .collect();
            let b: Vec<Vec<i64>> = (0..nb)
                .map(|_| vec![rng.gen_range(-20..20), rng.gen_range(-20..20)])
                .collect();
            let mut g = Vec::new();
            for i in 0..na {
                for j in 0..nb {
                    if rng.gen::<f64>() < 0.4 {
                        g.push((i, j));
                    }
                }
            }
            let inst = SumsetInstance { rank: 2, a, b, g };
            let chk = sumset_bound_check(&inst).unwrap();
            assert!(chk.holds, "violation: {chk:?}");
            // pigeonhole consistency: M · #differences >= #G
            let pairs: Vec<(Vec<i64>, Vec<i64>)> = inst
                .g
                .iter()
                .map(|&(i, j)| (inst.a[i].clone(), inst.b[j].clone()))
                .collect();
            let mut diffs: std::collections::HashSet<Vec<i64>> = Default::default();
            for (x, y) in &pairs {
                diffs.insert(x.iter().zip(y).map(|(p, q)| p - q).collect());
            }
            assert!(chk.max_fiber * diffs.len() as u64 >= chk.g_size);
        }
    }
}
