//! Calderón–Zygmund decomposition at level `λ^{-1}` with the doubly
//! exponential splitting of the bad part.
//!
//! The stopping cubes `P` are the maximal cubes of one lattice with
//! `⟨|f|⟩_P > λ^{-1}`. Inside each `P` the cells with
//! `2^{c₁2^{l-1}}λ^{-1} < |f| ≤ 2^{c₁2^l}λ^{-1}` carry `b_P^l`, which splits
//! into its average over `P` (`b_{P,1}^l`) and a mean-zero rest
//! (`b_{P,2}^l`). Everything else is the good part `g`.
//!
//! ```
//! use roughwave::czd::{cz_decompose, Aggregate};
//! use roughwave::grid::{Domain, GridFunction};
//!
//! let dom = Domain::new(1.0, 16).unwrap();
//! let mut f = GridFunction::zeros(dom);
//! f.set(5, 9, 1000.0);
//! let dec = cz_decompose(&f, 0.5, &dom.standard_lattice(), 0.2).unwrap();
//! assert_eq!(dec.cubes().len(), 1);
//! let b = dec.aggregate(&Aggregate::Bad).unwrap();
//! let back = dec.good().lin_comb(1.0, &b, 1.0).unwrap();
//! assert!((back.get(5, 9) - 1000.0).abs() < 1e-12);
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{Cube, DyadicLattice, LatticeCube};
use crate::error::{invalid, Result};
use crate::grid::{compensated_sum, integrate, lp_norm, CellRect, Domain, GridFunction};

pub const DEFAULT_C1: f64 = 0.2;

/// A stopping cube and its level pieces.
#[derive(Debug, Clone)]
pub struct StoppingCube {
    pub cube: Cube,
    /// Lattice level; the side is `base_scale · 2^level`.
    pub level: i32,
    pub rect: CellRect,
    /// `⟨|f|⟩_P` on the clipped cube.
    pub average: f64,
    pub pieces: Vec<LevelPiece>,
}

/// `b_P^l` for one `l`: its cells and the value of `b_{P,1}^l` on `P`.
#[derive(Debug, Clone)]
pub struct LevelPiece {
    pub l: u32,
    /// Linear indices of the level-set cells inside `P`.
    pub cells: Vec<usize>,
    pub mean: f64,
}

/// Named sums of pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    /// `g`.
    Good,
    /// `b = Σ_P b_P`.
    Bad,
    /// `G^l = G₁^l + G₂^l`.
    G(u32),
    /// `G₁^l = Σ_P b_{P,1}^l`.
    G1(u32),
    /// `G₂^l = Σ_P b_{P,2}^l`.
    G2(u32),
    /// `B_j = Σ_{ℓ(P) = 2^j} b_P`, `j` the lattice level.
    B(i32),
    /// `B_j^l`.
    Bl(i32, u32),
    /// `B_{j,1}^l`.
    B1(i32, u32),
    /// `B_{j,2}^l`.
    B2(i32, u32),
}

#[derive(Debug, Clone)]
pub struct CzDecomposition {
    f: GridFunction,
    lambda: f64,
    c1: f64,
    cubes: Vec<StoppingCube>,
    good: GridFunction,
    l_max: u32,
}

/// Measured constants of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CzConstants {
    /// `max_l ‖G^l‖₂² / (2^{c₁2^l} λ^{-1} ‖f‖₁)`.
    pub ii: f64,
    /// `‖Σ_l Σ_P |b_{P,1}^l|‖_∞ / λ^{-1}`.
    pub iii: f64,
    /// `‖g‖_∞ / (2^{c₁} λ^{-1})`.
    pub iv: f64,
    /// `‖Σ_l |G₁^l|‖₁ / ‖f‖₁`.
    pub eq2_6: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzReport {
    pub lambda: f64,
    pub c1: f64,
    pub num_cubes: usize,
    pub measure_of_union: f64,
    pub constants: CzConstants,
}

impl Domain {
    /// The lattice of the grid itself: single cells up to the whole box.
    pub fn standard_lattice(&self) -> DyadicLattice {
        DyadicLattice::for_domain(self, 0)
    }
}

/// Upper threshold `2^{c₁2^l} λ^{-1}` of level `l` (`l = 0` gives the
/// lower edge `2^{c₁} λ^{-1}` of level 1).
fn level_bound(c1: f64, lambda: f64, l: u32) -> f64 {
    2f64.powf(c1 * 2f64.powi(l as i32)) / lambda
}

fn abs_sum(f: &GridFunction, r: &CellRect) -> f64 {
    let n = f.domain().resolution();
    let v = f.values();
    compensated_sum(r.cells().map(|(i, j)| v[i * n + j].abs()))
}

/// Maximal cubes of `lattice` with `⟨|f|⟩_P > threshold`, coarsest first.
fn stopping_cubes(
    f: &GridFunction,
    lattice: &DyadicLattice,
    threshold: f64,
) -> Vec<(LatticeCube, CellRect, f64)> {
    let dom = f.domain();
    let mut out = Vec::new();
    let mut stack: Vec<(LatticeCube, CellRect)> = lattice
        .cubes_in_domain(dom, *lattice.levels().end())
        .into_iter()
        .rev()
        .collect();
    while let Some((c, r)) = stack.pop() {
        let sum = abs_sum(f, &r);
        if sum == 0.0 {
            continue;
        }
        let avg = sum / r.count() as f64;
        if avg > threshold {
            out.push((c, r, avg));
        } else if let Some(kids) = lattice.children(&c) {
            for k in kids.iter().rev() {
                let kr = lattice.to_cube(k).cell_rect(dom);
                if !kr.is_empty() {
                    stack.push((*k, kr));
                }
            }
        }
    }
    out
}

/// Decomposes `f` at level `λ^{-1}` over `lattice`.
pub fn cz_decompose(
    f: &GridFunction,
    lambda: f64,
    lattice: &DyadicLattice,
    c1: f64,
) -> Result<CzDecomposition> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid("lambda", format!("need 0 < λ < 1, got {lambda}")));
    }
    if !(c1 > 0.0 && c1 < 0.25) {
        return Err(invalid("c1", format!("need 0 < c1 < 1/4, got {c1}")));
    }
    let dom = *f.domain();
    let n = dom.resolution();
    let fmax = f.max_abs();
    let mut l_max = 0;
    while level_bound(c1, lambda, l_max) < fmax {
        l_max += 1;
    }
    let found = stopping_cubes(f, lattice, 1.0 / lambda);
    let vals = f.values();
    let cubes: Vec<StoppingCube> = found
        .par_iter()
        .map(|(c, r, avg)| {
            let count = r.count() as f64;
            let mut cells: Vec<Vec<usize>> = vec![Vec::new(); l_max as usize];
            for (i, j) in r.cells() {
                let k = i * n + j;
                let a = vals[k].abs();
                if a <= level_bound(c1, lambda, 0) {
                    continue;
                }
                let l = (1..=l_max)
                    .find(|&l| a <= level_bound(c1, lambda, l))
                    .expect("l_max covers max |f|");
                cells[l as usize - 1].push(k);
            }
            let pieces = cells
                .into_iter()
                .zip(1..)
                .filter(|(c, _)| !c.is_empty())
                .map(|(cells, l)| {
                    let mean = compensated_sum(cells.iter().map(|&k| vals[k])) / count;
                    LevelPiece { l, cells, mean }
                })
                .collect();
            StoppingCube {
                cube: lattice.to_cube(c),
                level: c.level,
                rect: *r,
                average: *avg,
                pieces,
            }
        })
        .collect();
    let mut good = f.clone();
    for p in &cubes {
        for piece in &p.pieces {
            for &k in &piece.cells {
                good.set(k / n, k % n, 0.0);
            }
        }
    }
    Ok(CzDecomposition {
        f: f.clone(),
        lambda,
        c1,
        cubes,
        good,
        l_max,
    })
}

impl CzDecomposition {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn cubes(&self) -> &[StoppingCube] {
        &self.cubes
    }

    pub fn good(&self) -> &GridFunction {
        &self.good
    }

    /// Largest `l` with a possibly non-empty level set.
    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Lattice levels of the stopping cubes, ascending and deduplicated.
    pub fn cube_levels(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.cubes.iter().map(|p| p.level).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `|∪P|`.
    pub fn measure_of_union(&self) -> f64 {
        let h2 = self.f.domain().cell_area();
        self.cubes.iter().map(|p| p.rect.count() as f64 * h2).sum()
    }

    /// `b_{P,1}^l` (on all of `P`) and `b_{P,2}^l` for one piece, written
    /// into `out1`/`out2` with the given signs.
    fn add_piece(&self, p: &StoppingCube, piece: &LevelPiece, w1: f64, w2: f64, out: &mut [f64]) {
        let n = self.f.domain().resolution();
        let vals = self.f.values();
        // b_{P,2} = f χ_L − mean χ_P, so the two parts share the mean term
        let m = piece.mean * (w1 - w2);
        if m != 0.0 {
            for (i, j) in p.rect.cells() {
                out[i * n + j] += m;
            }
        }
        if w2 != 0.0 {
            for &k in &piece.cells {
                out[k] += w2 * vals[k];
            }
        }
    }

    /// `b_{P,2}^l` as a standalone function.
    pub fn b2(&self, cube: usize, l: u32) -> Result<GridFunction> {
        let p = self
            .cubes
            .get(cube)
            .ok_or_else(|| invalid("cube", "index out of range"))?;
        let mut out = vec![0.0; self.f.domain().len()];
        if let Some(piece) = p.pieces.iter().find(|q| q.l == l) {
            self.add_piece(p, piece, 0.0, 1.0, &mut out);
        }
        GridFunction::from_values(*self.f.domain(), out)
    }

    pub fn aggregate(&self, which: &Aggregate) -> Result<GridFunction> {
        let dom = *self.f.domain();
        if let Aggregate::Good = which {
            return Ok(self.good.clone());
        }
        let mut out = vec![0.0; dom.len()];
        for p in &self.cubes {
            for piece in &p.pieces {
                let (w1, w2) = match *which {
                    Aggregate::Good => unreachable!(),
                    Aggregate::Bad => (1.0, 1.0),
                    Aggregate::G(l) if l == piece.l => (1.0, 1.0),
                    Aggregate::G1(l) if l == piece.l => (1.0, 0.0),
                    Aggregate::G2(l) if l == piece.l => (0.0, 1.0),
                    Aggregate::B(j) if j == p.level => (1.0, 1.0),
                    Aggregate::Bl(j, l) if j == p.level && l == piece.l => (1.0, 1.0),
                    Aggregate::B1(j, l) if j == p.level && l == piece.l => (1.0, 0.0),
                    Aggregate::B2(j, l) if j == p.level && l == piece.l => (0.0, 1.0),
                    _ => continue,
                };
                self.add_piece(p, piece, w1, w2, &mut out);
            }
        }
        GridFunction::from_values(dom, out)
    }

    /// `‖G^l‖₂² / (2^{c₁2^l} λ^{-1} ‖f‖₁)` for one `l`.
    pub fn constant_ii(&self, l: u32) -> Result<f64> {
        let g = self.aggregate(&Aggregate::G(l))?;
        let f1 = lp_norm(&self.f, 1.0)?;
        Ok(lp_norm(&g, 2.0)?.powi(2) / (level_bound(self.c1, self.lambda, l) * f1))
    }

    pub fn constants(&self) -> Result<CzConstants> {
        let dom = *self.f.domain();
        let n = dom.resolution();
        let inv = 1.0 / self.lambda;
        let f1 = lp_norm(&self.f, 1.0)?;
        let mut ii = 0.0f64;
        for l in 1..=self.l_max {
            ii = ii.max(self.constant_ii(l)?);
        }
        // Σ_l Σ_P |b_{P,1}^l| and Σ_l |G₁^l| coincide since the P are disjoint
        let mut abs1 = vec![0.0; dom.len()];
        for p in &self.cubes {
            let s: f64 = p.pieces.iter().map(|q| q.mean.abs()).sum();
            for (i, j) in p.rect.cells() {
                abs1[i * n + j] += s;
            }
        }
        let abs1 = GridFunction::from_values(dom, abs1)?;
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        Ok(CzConstants {
            ii: ratio(ii, 1.0),
            iii: abs1.max_abs() / inv,
            iv: self.good.max_abs() / level_bound(self.c1, self.lambda, 0),
            eq2_6: ratio(integrate(&abs1), f1),
        })
    }

    pub fn report(&self) -> Result<CzReport> {
        Ok(CzReport {
            lambda: self.lambda,
            c1: self.c1,
            num_cubes: self.cubes.len(),
            measure_of_union: self.measure_of_union(),
            constants: self.constants()?,
        })
    }

    /// `|∪ s·P| / |∪ P|` within the domain, a diagnostic for the size of the
    /// exceptional set built from dilated stopping cubes.
    pub fn dilated_measure_ratio(&self, s: f64) -> f64 {
        let dom = self.f.domain();
        let mut mark = vec![false; dom.len()];
        for p in &self.cubes {
            for (i, j) in p.cube.dilate(s).cell_rect(dom).cells() {
                mark[dom.index(i, j)] = true;
            }
        }
        let u = self.measure_of_union();
        if u == 0.0 {
            return 0.0;
        }
        mark.iter().filter(|m| **m).count() as f64 * dom.cell_area() / u
    }
}
