//! Axis-aligned binary voxel grids and the VOX1 file format.
//!
//! A `VoxelSet` represents a bounded subset of R^m (m = 1, 2, 3) as the union
//! of the cells whose mask bit is set. Cell `(i_1, ..., i_m)` covers
//! `origin + h·[i_1, i_1+1] × ...`; its center is `origin + h·(i + 1/2)`.
//!
//! VOX1 is a plain ASCII format: a header line
//! `VOX1 m d1 d2 [d3] h ox oy [oz]` followed by row-major `0`/`1` characters,
//! one line per row, with a blank line between planes when m = 3. For m = 1
//! the header is `VOX1 1 d1 h ox` followed by a single row.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct VoxelSet {
    pub m: usize,
    pub dims: Vec<usize>,
    pub origin: Vec<f64>,
    pub h: f64,
    mask: Vec<u64>,
    active: usize,
}

impl VoxelSet {
    pub fn new_empty(dims: Vec<usize>, origin: Vec<f64>, h: f64) -> Result<Self> {
        let m = dims.len();
        if m == 0 || m > 3 {
            return Err(Error::UnsupportedDimension {
                dim: m,
                why: "voxel grids support m in 1..=3".into(),
            });
        }
        if origin.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: origin.len(),
            });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGeometry("cell size must be positive".into()));
        }
        let cells: usize = dims.iter().product();
        if cells == 0 {
            return Err(Error::EmptySet("voxel grid has zero cells".into()));
        }
        Ok(VoxelSet {
            m,
            dims,
            origin,
            h,
            mask: vec![0; (cells + 63) / 64],
            active: 0,
        })
    }

    /// Builds a grid covering `[lo, hi]` at cell size `h` and fills it from a
    /// predicate evaluated at cell centers.
    pub fn from_fn(lo: &[f64], hi: &[f64], h: f64, f: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let m = lo.len();
        let dims: Vec<usize> = (0..m)
            .map(|i| (((hi[i] - lo[i]) / h).ceil() as usize).max(1))
            .collect();
        let mut v = VoxelSet::new_empty(dims, lo.to_vec(), h)?;
        let mut idx = vec![0usize; m];
        let mut center = vec![0.0; m];
        loop {
            for i in 0..m {
                center[i] = v.origin[i] + v.h * (idx[i] as f64 + 0.5);
            }
            if f(&center) {
                v.set_index(&idx, true);
            }
            // odometer increment
            let mut i = 0;
            loop {
                idx[i] += 1;
                if idx[i] < v.dims[i] {
                    break;
                }
                idx[i] = 0;
                i += 1;
                if i == m {
                    return Ok(v);
                }
            }
        }
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn is_empty(&self) -> bool {
        self.active == 0
    }

    /// Lebesgue volume h^m · (number of active cells).
    pub fn volume(&self) -> f64 {
        self.h.powi(self.m as i32) * self.active as f64
    }

    fn flat(&self, idx: &[usize]) -> usize {
        // row-major with the first dimension fastest
        let mut acc = 0usize;
        for d in (0..self.m).rev() {
            acc = acc * self.dims[d] + idx[d];
        }
        acc
    }

    pub fn get_index(&self, idx: &[usize]) -> bool {
        let f = self.flat(idx);
        self.mask[f / 64] >> (f % 64) & 1 == 1
    }

    pub fn set_index(&mut self, idx: &[usize], val: bool) {
        let f = self.flat(idx);
        let word = &mut self.mask[f / 64];
        let bit = 1u64 << (f % 64);
        let was = *word & bit != 0;
        if val && !was {
            *word |= bit;
            self.active += 1;
        } else if !val && was {
            *word &= !bit;
            self.active -= 1;
        }
    }

    /// Cell index containing a point, if inside the grid.
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = vec![0usize; self.m];
        for i in 0..self.m {
            let t = (x[i] - self.origin[i]) / self.h;
            if t < 0.0 {
                return None;
            }
            let c = t.floor() as usize;
            if c >= self.dims[i] {
                return None;
            }
            idx[i] = c;
        }
        Some(idx)
    }

    /// Point membership: the cell containing x is active.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        match self.locate(x) {
            Some(idx) => self.get_index(&idx),
            None => false,
        }
    }

    pub fn center_of(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.origin[i] + self.h * (idx[i] as f64 + 0.5))
            .collect()
    }

    /// Iterates over active cell indices in row-major order.
    pub fn active_cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let dims = self.dims.clone();
        let m = self.m;
        (0..self.cell_count()).filter_map(move |f| {
            if self.mask[f / 64] >> (f % 64) & 1 == 1 {
                let mut idx = vec![0usize; m];
                let mut rem = f;
                for i in 0..m {
                    idx[i] = rem % dims[i];
                    rem /= dims[i];
                }
                Some(idx)
            } else {
                None
            }
        })
    }

    /// Centers of all active cells.
    pub fn active_centers(&self) -> Vec<Vec<f64>> {
        self.active_cells().map(|i| self.center_of(&i)).collect()
    }

    /// Morphological erosion by Euclidean radius r: a cell survives iff every
    /// cell whose center lies within r of its center is active (and in-grid).
    pub fn erode(&self, r: f64) -> VoxelSet {
        self.morph(r, true)
    }

    /// Morphological dilation by Euclidean radius r.
    pub fn dilate(&self, r: f64) -> VoxelSet {
        self.morph(r, false)
    }

    fn morph(&self, r: f64, erosion: bool) -> VoxelSet {
        let k = (r / self.h).floor() as i64;
        let mut offs: Vec<Vec<i64>> = Vec::new();
        let mut o = vec![-k; self.m];
        loop {
            let d2: f64 = o.iter().map(|&x| (x as f64) * (x as f64)).sum();
            if d2.sqrt() * self.h <= r {
                offs.push(o.clone());
            }
            let mut i = 0;
            loop {
                o[i] += 1;
                if o[i] <= k {
                    break;
                }
                o[i] = -k;
                i += 1;
                if i == self.m {
                    let mut out = VoxelSet::new_empty(
                        self.dims.clone(),
                        self.origin.clone(),
                        self.h,
                    )
                    .expect("same grid");
                    let mut idx_buf = vec![0usize; self.m];
                    'cells: for f in 0..self.cell_count() {
                        let mut rem = f;
                        for i in 0..self.m {
                            idx_buf[i] = rem % self.dims[i];
                            rem /= self.dims[i];
                        }
                        if erosion {
                            if self.mask[f / 64] >> (f % 64) & 1 == 0 {
                                continue;
                            }
                            for off in &offs {
                                let mut ok = true;
                                let mut nb = vec![0usize; self.m];
                                for i in 0..self.m {
                                    let v = idx_buf[i] as i64 + off[i];
                                    if v < 0 || v >= self.dims[i] as i64 {
                                        ok = false;
                                        break;
                                    }
                                    nb[i] = v as usize;
                                }
                                if !ok || !self.get_index(&nb) {
                                    continue 'cells;
                                }
                            }
                            out.set_index(&idx_buf, true);
                        } else {
                            if self.mask[f / 64] >> (f % 64) & 1 == 0 {
                                continue;
                            }
                            for off in &offs {
                                let mut ok = true;
                                let mut nb = vec![0usize; self.m];
                                for i in 0..self.m {
                                    let v = idx_buf[i] as i64 + off[i];
                                    if v < 0 || v >= self.dims[i] as i64 {
                                        ok = false;
                                        break;
                                    }
                                    nb[i] = v as usize;
                                }
                                if ok {
                                    out.set_index(&nb, true);
                                }
                            }
                        }
                    }
                    return out;
                }
            }
        }
    }

    /// Bounding box of the active cells (outer cell faces), or None if empty.
    pub fn active_bbox(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![usize::MAX; self.m];
        let mut hi = vec![0usize; self.m];
        for idx in self.active_cells() {
            for i in 0..self.m {
                lo[i] = lo[i].min(idx[i]);
                hi[i] = hi[i].max(idx[i]);
            }
        }
        let lo_f: Vec<f64> = (0..self.m)
            .map(|i| self.origin[i] + self.h * lo[i] as f64)
            .collect();
        let hi_f: Vec<f64> = (0..self.m)
            .map(|i| self.origin[i] + self.h * (hi[i] + 1) as f64)
            .collect();
        Some((lo_f, hi_f))
    }

    /// Splits the support into a small set of axis-aligned boxes covering all
    /// active cells, so that line traversals can skip large empty regions.
    /// Boxes are found by recursively cutting along empty slabs.
    pub fn active_boxes(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut out = Vec::new();
        if let Some((lo, hi)) = self.active_index_bbox() {
            self.split_boxes(lo, hi, 0, &mut out);
        }
        out.iter()
            .map(|(lo, hi)| {
                (
                    (0..self.m)
                        .map(|i| self.origin[i] + self.h * lo[i] as f64)
                        .collect(),
                    (0..self.m)
                        .map(|i| self.origin[i] + self.h * (hi[i] + 1) as f64)
                        .collect(),
                )
            })
            .collect()
    }

    fn active_index_bbox(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![usize::MAX; self.m];
        let mut hi = vec![0usize; self.m];
        for idx in self.active_cells() {
            for i in 0..self.m {
                lo[i] = lo[i].min(idx[i]);
                hi[i] = hi[i].max(idx[i]);
            }
        }
        Some((lo, hi))
    }

    fn slab_occupied(&self, lo: &[usize], hi: &[usize], axis: usize, pos: usize) -> bool {
        // scan the slab lo..hi with idx[axis] = pos
        let mut idx: Vec<usize> = lo.to_vec();
        idx[axis] = pos;
        loop {
            if self.get_index(&idx) {
                return true;
            }
            let mut i = 0;
            loop {
                if i == axis {
                    i += 1;
                    if i == self.m {
                        return false;
                    }
                    continue;
                }
                idx[i] += 1;
                if idx[i] <= hi[i] {
                    break;
                }
                idx[i] = lo[i];
                i += 1;
                if i == self.m {
                    return false;
                }
            }
        }
    }

    fn split_boxes(
        &self,
        lo: Vec<usize>,
        hi: Vec<usize>,
        depth: usize,
        out: &mut Vec<(Vec<usize>, Vec<usize>)>,
    ) {
        if depth >= 6 {
            out.push((lo, hi));
            return;
        }
        // find the widest empty gap along any axis
        let mut best: Option<(usize, usize, usize)> = None; // axis, gap_lo, gap_hi
        for axis in 0..self.m {
            let mut gap_start: Option<usize> = None;
            for pos in lo[axis]..=hi[axis] {
                if self.slab_occupied(&lo, &hi, axis, pos) {
                    if let Some(gs) = gap_start.take() {
                        if pos > gs {
                            let width = pos - gs;
                            if best.map_or(true, |(_, bl, bh)| width > bh - bl + 1) {
                                best = Some((axis, gs, pos - 1));
                            }
                        }
                    }
                } else if gap_start.is_none() {
                    gap_start = Some(pos);
                }
            }
        }
        match best {
            Some((axis, gl, gh)) if gh >= gl + 1 => {
                let mut hi1 = hi.clone();
                hi1[axis] = gl.saturating_sub(1).max(lo[axis]);
                let mut lo2 = lo.clone();
                lo2[axis] = gh + 1;
                // trim each side to its own active bbox along the cut axis
                self.split_boxes(lo, hi1, depth + 1, out);
                self.split_boxes(lo2, hi, depth + 1, out);
            }
            _ => out.push((lo, hi)),
        }
    }

    // -- VOX1 -------------------------------------------------------------

    pub fn to_vox1(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("VOX1 {}", self.m));
        for d in &self.dims {
            s.push_str(&format!(" {d}"));
        }
        s.push_str(&format!(" {}", self.h));
        for o in &self.origin {
            s.push_str(&format!(" {o}"));
        }
        s.push('\n');
        let d1 = self.dims[0];
        let d2 = if self.m >= 2 { self.dims[1] } else { 1 };
        let d3 = if self.m >= 3 { self.dims[2] } else { 1 };
        let mut idx = vec![0usize; self.m];
        for k in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    idx[0] = i;
                    if self.m >= 2 {
                        idx[1] = j;
                    }
                    if self.m >= 3 {
                        idx[2] = k;
                    }
                    s.push(if self.get_index(&idx) { '1' } else { '0' });
                }
                s.push('\n');
            }
            if self.m == 3 && k + 1 < d3 {
                s.push('\n');
            }
        }
        s
    }

    pub fn from_vox1(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Schema {
            location: "line 1".into(),
            message: "empty file".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.first() != Some(&"VOX1") {
            return Err(Error::Schema {
                location: "line 1".into(),
                message: "missing VOX1 magic".into(),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Schema {
                location: "line 1".into(),
                message: format!("bad {what}: {s}"),
            })
        };
        let m = parse(toks.get(1).copied().unwrap_or(""), "dimension")? as usize;
        if !(1..=3).contains(&m) {
            return Err(Error::Schema {
                location: "line 1".into(),
                message: format!("m must be 1, 2 or 3 (got {m})"),
            });
        }
        if toks.len() != 2 + 2 * m + 1 {
            return Err(Error::Schema {
                location: "line 1".into(),
                message: format!("expected {} header fields, got {}", 2 + 2 * m + 1, toks.len()),
            });
        }
        let dims: Vec<usize> = (0..m)
            .map(|i| parse(toks[2 + i], "dims").map(|v| v as usize))
            .collect::<Result<_>>()?;
        let h = parse(toks[2 + m], "cell size")?;
        let origin: Vec<f64> = (0..m)
            .map(|i| parse(toks[3 + m + i], "origin"))
            .collect::<Result<_>>()?;
        let mut v = VoxelSet::new_empty(dims, origin, h)?;
        let d1 = v.dims[0];
        let d2 = if m >= 2 { v.dims[1] } else { 1 };
        let d3 = if m >= 3 { v.dims[2] } else { 1 };
        let mut idx = vec![0usize; m];
        let mut lineno = 1usize;
        for k in 0..d3 {
            for j in 0..d2 {
                let row = loop {
                    let line = lines.next().ok_or_else(|| Error::Schema {
                        location: format!("line {}", lineno + 1),
                        message: "unexpected end of file".into(),
                    })?;
                    lineno += 1;
                    if !line.trim().is_empty() {
                        break line;
                    }
                };
                let row = row.trim_end();
                if row.len() != d1 {
                    return Err(Error::Schema {
                        location: format!("row {} (line {lineno})", j + 1),
                        message: format!("row length {} does not match d1 = {d1}", row.len()),
                    });
                }
                for (i, ch) in row.chars().enumerate() {
                    idx[0] = i;
                    if m >= 2 {
                        idx[1] = j;
                    }
                    if m >= 3 {
                        idx[2] = k;
                    }
                    match ch {
                        '1' => v.set_index(&idx, true),
                        '0' => {}
                        other => {
                            return Err(Error::Schema {
                                location: format!("row {} (line {lineno}) column {}", j + 1, i + 1),
                                message: format!("invalid character {other:?}"),
                            })
                        }
                    }
                }
            }
        }
        Ok(v)
    }
}
