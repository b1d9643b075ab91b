//! Axis-parallel cubes, dyadic lattices, the nine-lattice cover of the
//! 3-dilates, and sparse families.
//!
//! Cubes are half-open, `[a, a + s)^2`, and a grid cell belongs to a cube
//! when its centre does. All measures are cell counts times `h^2` after
//! clipping to the domain box, so children of a lattice cube partition its
//! cells exactly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{CellRect, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub lower: [f64; 2],
    pub side: f64,
}

#[inline]
fn snapped_ceil(t: f64) -> i64 {
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as i64
    } else {
        t.ceil() as i64
    }
}

impl Cube {
    pub fn new(lower: [f64; 2], side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(invalid("side", format!("cube side must be positive, got {side}")));
        }
        Ok(Self { lower, side })
    }

    pub fn centered(center: [f64; 2], side: f64) -> Result<Self> {
        Self::new([center[0] - side / 2.0, center[1] - side / 2.0], side)
    }

    pub fn center(&self) -> [f64; 2] {
        [self.lower[0] + self.side / 2.0, self.lower[1] + self.side / 2.0]
    }

    /// `λQ`: same centre, side multiplied by `λ`.
    pub fn dilate(&self, lambda: f64) -> Cube {
        let c = self.center();
        let s = self.side * lambda;
        Cube {
            lower: [c[0] - s / 2.0, c[1] - s / 2.0],
            side: s,
        }
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        (0..2).all(|a| p[a] >= self.lower[a] && p[a] < self.lower[a] + self.side)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        (0..2).all(|a| {
            other.lower[a] >= self.lower[a]
                && other.lower[a] + other.side <= self.lower[a] + self.side
        })
    }

    /// Cells of `dom` whose centres lie in the cube.
    pub fn cell_rect(&self, dom: &Domain) -> CellRect {
        let h = dom.cell_size();
        let l = dom.half_width();
        let n = dom.resolution() as i64;
        let axis = |a: usize| {
            let lo = snapped_ceil((self.lower[a] + l) / h - 0.5).clamp(0, n);
            let hi = snapped_ceil((self.lower[a] + self.side + l) / h - 0.5).clamp(0, n);
            (lo as usize, hi as usize)
        };
        let (i0, i1) = axis(0);
        let (j0, j1) = axis(1);
        let r = CellRect::new(i0, i1, j0, j1);
        if r.is_empty() {
            CellRect::empty()
        } else {
            r
        }
    }

    /// Clipped discrete measure `#cells * h^2`.
    pub fn measure(&self, dom: &Domain) -> f64 {
        self.cell_rect(dom).count() as f64 * dom.cell_area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    /// Cubes `origin + b 2^k ([0,1)^2 + m)`.
    Standard,
    /// The 3-dilates of a standard lattice that fall in one residue class:
    /// cubes of side `3 b 2^k` with lower corners `origin + b 2^k (m - 1)`,
    /// `m ≡ c_k (mod 3)` per axis. `residues` holds `c_0`; the class at the
    /// next level is `2c + 2 mod 3`, which is its own inverse.
    Third { residues: [u8; 2] },
}

/// A dyadic lattice truncated to a finite range of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicLattice {
    origin: [f64; 2],
    base_scale: f64,
    kind: LatticeKind,
    min_level: i32,
    max_level: i32,
}

/// A cube of a lattice in exact integer units of `base_scale * 2^min_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeCube {
    pub level: i32,
    pub corner: [i64; 2],
    pub side: i64,
}

#[inline]
fn next_residue(c: u8) -> u8 {
    ((2 * c as u32 + 2) % 3) as u8
}

impl DyadicLattice {
    pub fn standard(
        origin: [f64; 2],
        base_scale: f64,
        levels: std::ops::RangeInclusive<i32>,
    ) -> Result<Self> {
        if !(base_scale.is_finite() && base_scale > 0.0) {
            return Err(invalid("base_scale", "must be positive"));
        }
        if levels.is_empty() {
            return Err(invalid("levels", "empty level range"));
        }
        Ok(Self {
            origin,
            base_scale,
            kind: LatticeKind::Standard,
            min_level: *levels.start(),
            max_level: *levels.end(),
        })
    }

    /// The standard lattice of the grid: level 0 is a single cell, level
    /// `log2 N` the whole box. `extra_fine` levels below a cell are kept
    /// (their cubes hold at most one cell centre).
    pub fn for_domain(dom: &Domain, extra_fine: i32) -> Self {
        let top = dom.resolution().trailing_zeros() as i32;
        let l = dom.half_width();
        Self {
            origin: [-l, -l],
            base_scale: dom.cell_size(),
            kind: LatticeKind::Standard,
            min_level: -extra_fine,
            max_level: top,
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn base_scale(&self) -> f64 {
        self.base_scale
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<i32> {
        self.min_level..=self.max_level
    }

    fn unit(&self) -> f64 {
        self.base_scale * 2f64.powi(self.min_level)
    }

    fn step(&self, level: i32) -> i64 {
        1i64 << (level - self.min_level)
    }

    fn residues_at(&self, level: i32) -> [u8; 2] {
        match self.kind {
            LatticeKind::Standard => [0, 0],
            LatticeKind::Third { residues } if level.rem_euclid(2) == 0 => residues,
            LatticeKind::Third { residues } => residues.map(next_residue),
        }
    }

    pub fn side_units(&self, level: i32) -> i64 {
        match self.kind {
            LatticeKind::Standard => self.step(level),
            LatticeKind::Third { .. } => 3 * self.step(level),
        }
    }

    /// Side length of cubes at `level`.
    pub fn side(&self, level: i32) -> f64 {
        self.side_units(level) as f64 * self.unit()
    }

    /// Offset of the lattice grid at `level` along one axis, in units.
    fn axis_offset(&self, level: i32, axis: usize) -> i64 {
        match self.kind {
            LatticeKind::Standard => 0,
            LatticeKind::Third { .. } => {
                let c = self.residues_at(level)[axis] as i64;
                (c - 1) * self.step(level)
            }
        }
    }

    pub fn to_cube(&self, c: &LatticeCube) -> Cube {
        let u = self.unit();
        Cube {
            lower: [
                self.origin[0] + c.corner[0] as f64 * u,
                self.origin[1] + c.corner[1] as f64 * u,
            ],
            side: c.side as f64 * u,
        }
    }

    /// The lattice cube at `level` containing the point (given in units).
    fn containing_units(&self, p: [f64; 2], level: i32) -> LatticeCube {
        let side = self.side_units(level);
        let mut corner = [0i64; 2];
        for (a, slot) in corner.iter_mut().enumerate() {
            let off = self.axis_offset(level, a);
            let q = ((p[a] - off as f64) / side as f64).floor() as i64;
            *slot = off + q * side;
        }
        LatticeCube {
            level,
            corner,
            side,
        }
    }

    pub fn containing(&self, p: [f64; 2], level: i32) -> LatticeCube {
        let u = self.unit();
        self.containing_units(
            [(p[0] - self.origin[0]) / u, (p[1] - self.origin[1]) / u],
            level,
        )
    }

    /// Lattice cubes containing `p`, one per level, coarsest first.
    pub fn cubes_containing(&self, p: [f64; 2]) -> impl Iterator<Item = Cube> + '_ {
        (self.min_level..=self.max_level)
            .rev()
            .map(move |k| self.to_cube(&self.containing(p, k)))
    }

    pub fn children(&self, c: &LatticeCube) -> Option<[LatticeCube; 4]> {
        if c.level <= self.min_level {
            return None;
        }
        let half = c.side / 2;
        let mk = |ex: i64, ey: i64| LatticeCube {
            level: c.level - 1,
            corner: [c.corner[0] + ex * half, c.corner[1] + ey * half],
            side: half,
        };
        Some([mk(0, 0), mk(0, 1), mk(1, 0), mk(1, 1)])
    }

    pub fn parent(&self, c: &LatticeCube) -> Option<LatticeCube> {
        if c.level >= self.max_level {
            return None;
        }
        let p = [c.corner[0] as f64 + 0.25, c.corner[1] as f64 + 0.25];
        Some(self.containing_units(p, c.level + 1))
    }

    /// Every cube at `level` whose closure meets the half-open box
    /// `[0, extent)^2` (in units relative to the origin).
    fn cubes_meeting(&self, level: i32, extent: i64) -> Vec<LatticeCube> {
        let side = self.side_units(level);
        let axis = |a: usize| -> Vec<i64> {
            let off = self.axis_offset(level, a);
            let mut q = (-off - side).div_euclid(side);
            let mut out = Vec::new();
            loop {
                let corner = off + q * side;
                if corner >= extent {
                    break;
                }
                if corner + side > 0 {
                    out.push(corner);
                }
                q += 1;
            }
            out
        };
        let xs = axis(0);
        let ys = axis(1);
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                out.push(LatticeCube {
                    level,
                    corner: [x, y],
                    side,
                });
            }
        }
        out
    }

    /// Cubes at `level` that contain at least one cell of `dom`, with their
    /// clipped cell rectangles.
    pub fn cubes_in_domain(&self, dom: &Domain, level: i32) -> Vec<(LatticeCube, CellRect)> {
        let extent = ((2.0 * dom.half_width()) / self.unit()).ceil() as i64;
        self.cubes_meeting(level, extent)
            .into_iter()
            .filter_map(|c| {
                let r = self.to_cube(&c).cell_rect(dom);
                (!r.is_empty()).then_some((c, r))
            })
            .collect()
    }
}

impl DyadicLattice {
    /// Cubes at `level` that contain at least one cell centre of `rect`,
    /// with their clipped cell rectangles.
    pub fn cubes_meeting_cells(
        &self,
        dom: &Domain,
        level: i32,
        rect: &CellRect,
    ) -> Vec<(Cube, CellRect)> {
        if rect.is_empty() {
            return Vec::new();
        }
        let u = self.unit();
        let first = dom.center(rect.i0, rect.j0);
        let last = dom.center(rect.i1 - 1, rect.j1 - 1);
        let to_units = |p: [f64; 2]| [(p[0] - self.origin[0]) / u, (p[1] - self.origin[1]) / u];
        let a = self.containing_units(to_units(first), level);
        let b = self.containing_units(to_units(last), level);
        let mut out = Vec::new();
        let mut x = a.corner[0];
        while x <= b.corner[0] {
            let mut y = a.corner[1];
            while y <= b.corner[1] {
                let c = LatticeCube {
                    level,
                    corner: [x, y],
                    side: a.side,
                };
                let q = self.to_cube(&c);
                let r = q.cell_rect(dom);
                if !r.is_empty() {
                    out.push((q, r));
                }
                y += a.side;
            }
            x += a.side;
        }
        out
    }
}

/// The nine lattices whose union is the family of 3-dilates of `base`.
pub fn three_lattice_cover(base: &DyadicLattice) -> Result<Vec<DyadicLattice>> {
    if base.kind != LatticeKind::Standard {
        return Err(invalid("base", "three-lattice cover needs a standard lattice"));
    }
    let mut out = Vec::with_capacity(9);
    for cx in 0..3u8 {
        for cy in 0..3u8 {
            out.push(DyadicLattice {
                kind: LatticeKind::Third {
                    residues: [cx, cy],
                },
                ..base.clone()
            });
        }
    }
    Ok(out)
}

/// The nine cover lattices of the grid's standard lattice, refined two
/// levels below a cell so every cell is alone in some cube.
pub fn domain_lattices(dom: &Domain) -> Vec<DyadicLattice> {
    three_lattice_cover(&DyadicLattice::for_domain(dom, 2)).expect("standard base")
}

/// Every cube of `lattices` that holds at least one cell, as a cell
/// rectangle. Rectangles repeat when lattices share cubes.
pub fn cover_rects(dom: &Domain, lattices: &[DyadicLattice]) -> Vec<CellRect> {
    let mut out = Vec::new();
    for lat in lattices {
        for level in lat.levels() {
            out.extend(lat.cubes_in_domain(dom, level).into_iter().map(|(_, r)| r));
        }
    }
    out
}

/// `x ↦ sup_{Q ∋ x} value(Q)` over the cubes of `lattices`.
pub fn sup_over_cubes(
    dom: &Domain,
    lattices: &[DyadicLattice],
    value: impl Fn(&CellRect) -> f64 + Sync,
) -> Vec<f64> {
    use rayon::prelude::*;
    let rects = cover_rects(dom, lattices);
    let values: Vec<f64> = rects.par_iter().map(&value).collect();
    let n = dom.resolution();
    let mut out = vec![f64::NEG_INFINITY; dom.len()];
    for (r, v) in rects.iter().zip(values) {
        for i in r.i0..r.i1 {
            for slot in &mut out[i * n + r.j0..i * n + r.j1] {
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
    out
}

/// Sorted linear cell indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellSet(Vec<u32>);

impl CellSet {
    pub fn from_unsorted(mut v: Vec<u32>) -> Self {
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn from_rect(dom: &Domain, r: &CellRect) -> Self {
        Self(r.cells().map(|(i, j)| dom.index(i, j) as u32).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    /// `(start, length)` runs.
    pub fn runs(&self) -> Vec<[u32; 2]> {
        let mut out: Vec<[u32; 2]> = Vec::new();
        for &k in &self.0 {
            match out.last_mut() {
                Some(run) if run[0] + run[1] == k => run[1] += 1,
                _ => out.push([k, 1]),
            }
        }
        out
    }

    pub fn from_runs(runs: &[[u32; 2]]) -> Self {
        Self::from_unsorted(
            runs.iter()
                .flat_map(|&[s, len]| s..s + len)
                .collect(),
        )
    }
}

/// Cubes with pairwise disjoint witness sets `E_Q ⊂ Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFamily {
    pub domain: Domain,
    pub cubes: Vec<Cube>,
    pub witnesses: Vec<CellSet>,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseReport {
    pub ok: bool,
    pub worst_ratio: f64,
    pub overlap_count: usize,
    pub outside_count: usize,
}

/// Independent check of both sparse-family invariants at the cell level.
pub fn verify_sparse(s: &SparseFamily) -> SparseReport {
    let dom = &s.domain;
    let mut owner = vec![false; dom.len()];
    let mut overlap_count = 0;
    let mut outside_count = 0;
    let mut worst_ratio = f64::INFINITY;
    for (q, e) in s.cubes.iter().zip(&s.witnesses) {
        let rect = q.cell_rect(dom);
        let n = dom.resolution();
        for &k in e.indices() {
            let k = k as usize;
            if k >= owner.len() || !rect.contains(k / n, k % n) {
                outside_count += 1;
                continue;
            }
            if owner[k] {
                overlap_count += 1;
            }
            owner[k] = true;
        }
        let size = rect.count();
        if size > 0 {
            worst_ratio = worst_ratio.min(e.len() as f64 / size as f64);
        }
    }
    if s.cubes.is_empty() {
        worst_ratio = 1.0;
    }
    let ok = overlap_count == 0 && outside_count == 0 && worst_ratio >= s.eta;
    SparseReport {
        ok,
        worst_ratio,
        overlap_count,
        outside_count,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseCubeRecord {
    lower_corner: [f64; 2],
    side: f64,
    witness_cell_count: usize,
    witness_runs: Vec<[u32; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseFamilyRecord {
    half_width: f64,
    resolution: usize,
    eta: f64,
    cubes: Vec<SparseCubeRecord>,
}

impl SparseFamily {
    pub fn to_json(&self) -> Result<String> {
        let rec = SparseFamilyRecord {
            half_width: self.domain.half_width(),
            resolution: self.domain.resolution(),
            eta: self.eta,
            cubes: self
                .cubes
                .iter()
                .zip(&self.witnesses)
                .map(|(q, e)| SparseCubeRecord {
                    lower_corner: q.lower,
                    side: q.side,
                    witness_cell_count: e.len(),
                    witness_runs: e.runs(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: SparseFamilyRecord = serde_json::from_str(text)?;
        let domain = Domain::new(rec.half_width, rec.resolution)?;
        let mut cubes = Vec::with_capacity(rec.cubes.len());
        let mut witnesses = Vec::with_capacity(rec.cubes.len());
        for c in rec.cubes {
            let w = CellSet::from_runs(&c.witness_runs);
            if w.len() != c.witness_cell_count {
                return Err(crate::error::Error::Format(format!(
                    "witness count {} does not match runs ({} cells)",
                    c.witness_cell_count,
                    w.len()
                )));
            }
            cubes.push(Cube::new(c.lower_corner, c.side)?);
            witnesses.push(w);
        }
        Ok(Self {
            domain,
            cubes,
            witnesses,
            eta: rec.eta,
        })
    }
}
