//! Sparse families adapted to a function and an operator, and the bilinear
//! sparse forms `𝒜_{S,Φ₁,Φ₂}(f, g) = Σ_{Q∈S} ⟨f⟩_{Φ₁,Q} ⟨g⟩_{Φ₂,Q} |Q|`.
//!
//! The family is built by a stopping-time recursion. For a selected cube
//! `Q` the exceptional set is
//!
//! `E(Q) = {x ∈ Q : |f(x)| > A⟨f⟩_{Φ,3Q} or M_{λ,T}(fχ_{3Q})(x) > A·m_Q}`
//!
//! with `m_Q` the median of `M_{λ,T}(fχ_{3Q})` over `Q`. The next
//! generation consists of the maximal lattice descendants `P` of `Q` with
//! `|P ∩ E(Q)| > |P|/2`, and `Q` keeps `Q ∖ ∪P` as its witness set. If some
//! witness set falls below the target fraction, `A` is enlarged and the
//! whole family rebuilt.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{verify_sparse, CellSet, Cube, DyadicLattice, LatticeCube, SparseFamily};
use crate::error::{invalid, Error, Result};
use crate::grid::{compensated_sum, CellRect, Domain, GridFunction};
use crate::operators::{grand_maximal_on, OperatorHandle};
use crate::orlicz::{luxemburg_norm, luxemburg_on_rect, YoungFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparseBuildParams {
    /// Initial stopping multiplier `A`.
    pub threshold_multiplier: f64,
    pub eta_target: f64,
    /// Generations below the root.
    pub max_depth: usize,
    pub escalation_factor: f64,
    pub max_escalations: usize,
    /// `λ` of the grand maximal function in the stopping rule.
    pub lambda: f64,
    /// Young function of the local average of `f`.
    pub phi: YoungFunction,
}

impl Default for SparseBuildParams {
    fn default() -> Self {
        Self {
            threshold_multiplier: 16.0,
            eta_target: 0.5,
            max_depth: 16,
            escalation_factor: 2.0,
            max_escalations: 5,
            lambda: 0.25,
            phi: YoungFunction::PhiLogLog,
        }
    }
}

impl SparseBuildParams {
    fn validate(&self) -> Result<()> {
        if !(self.threshold_multiplier > 1.0) {
            return Err(invalid("threshold_multiplier", "must exceed 1"));
        }
        if !(self.eta_target > 0.0 && self.eta_target <= 0.75) {
            return Err(invalid("eta_target", "need 0 < η ≤ 3/4"));
        }
        if !(self.escalation_factor > 1.0) {
            return Err(invalid("escalation_factor", "must exceed 1"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid("lambda", "need 0 < λ < 1"));
        }
        Ok(())
    }
}

/// A built family with its construction record.
#[derive(Debug, Clone)]
pub struct SparseBuild {
    pub family: SparseFamily,
    /// Number of times `A` was enlarged.
    pub escalations: usize,
    /// The multiplier the family was finally built with.
    pub threshold_multiplier: f64,
    /// `min |E_Q| / |Q|` as found by the independent check.
    pub eta_achieved: f64,
}

#[derive(Clone)]
struct Node {
    cube: Cube,
    rect: CellRect,
    witness: Vec<u32>,
}

struct Builder<'a> {
    f: &'a GridFunction,
    op: &'a OperatorHandle,
    lattice: &'a DyadicLattice,
    lattices: &'a [DyadicLattice],
    params: &'a SparseBuildParams,
    multiplier: f64,
}

impl Builder<'_> {
    /// Cells of `Q` in the exceptional set, as a row-major mask over `rect`.
    fn exceptional(&self, cube: &Cube, rect: &CellRect) -> Result<Vec<bool>> {
        let dom = self.f.domain();
        let three = cube.dilate(3.0).cell_rect(dom);
        let local = self.f.restrict(&three);
        let avg = luxemburg_on_rect(self.f, &three, self.params.phi);
        let m = grand_maximal_on(&local, self.params.lambda, self.op, self.lattices, rect)?;
        let mut sorted = m.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[(sorted.len() - 1) / 2];
        let a = self.multiplier;
        Ok(rect
            .cells()
            .zip(&m)
            .map(|((i, j), mv)| self.f.get(i, j).abs() > a * avg || *mv > a * median)
            .collect())
    }

    /// Maximal descendants of `c` with more than half their cells in `mask`.
    fn stopping_children(&self, c: &LatticeCube, rect: &CellRect, mask: &[bool]) -> Vec<LatticeCube> {
        let dom = self.f.domain();
        let cols = rect.cols();
        let mut out = Vec::new();
        let mut stack: Vec<LatticeCube> = self.lattice.children(c).map_or(Vec::new(), |k| k.to_vec());
        stack.reverse();
        while let Some(p) = stack.pop() {
            let pr = self.lattice.to_cube(&p).cell_rect(dom).intersect(rect);
            if pr.is_empty() {
                continue;
            }
            let hits = pr
                .cells()
                .filter(|&(i, j)| mask[(i - rect.i0) * cols + (j - rect.j0)])
                .count();
            if hits == 0 {
                continue;
            }
            if 2 * hits > pr.count() {
                out.push(p);
            } else if let Some(kids) = self.lattice.children(&p) {
                stack.extend(kids.iter().rev());
            }
        }
        out
    }

    fn grow(&self, c: LatticeCube, depth: usize) -> Result<Vec<Node>> {
        let dom = self.f.domain();
        let n = dom.resolution();
        let cube = self.lattice.to_cube(&c);
        let rect = cube.cell_rect(dom);
        let children = if depth < self.params.max_depth {
            let mask = self.exceptional(&cube, &rect)?;
            self.stopping_children(&c, &rect, &mask)
        } else {
            Vec::new()
        };
        let mut taken = vec![false; rect.count()];
        let cols = rect.cols();
        for k in &children {
            let kr = self.lattice.to_cube(k).cell_rect(dom).intersect(&rect);
            for (i, j) in kr.cells() {
                taken[(i - rect.i0) * cols + (j - rect.j0)] = true;
            }
        }
        let witness = rect
            .cells()
            .zip(&taken)
            .filter(|(_, t)| !**t)
            .map(|((i, j), _)| (i * n + j) as u32)
            .collect();
        let below: Vec<Vec<Node>> = children
            .par_iter()
            .map(|k| self.grow(*k, depth + 1))
            .collect::<Result<_>>()?;
        let mut out = vec![Node {
            cube,
            rect,
            witness,
        }];
        out.extend(below.into_iter().flatten());
        Ok(out)
    }
}

/// The root cube for `support` with its lattice and ancestor chain: the
/// smallest covering cube among lattices whose chain grows to cover the
/// whole grid, or among all lattices if none does.
fn root_with_chain<'a>(
    dom: &Domain,
    support: CellRect,
    lattices: &'a [DyadicLattice],
    eta: f64,
) -> Option<(&'a DyadicLattice, LatticeCube, Vec<Node>)> {
    let full = dom.full_rect();
    let mut best: Option<((bool, f64), &DyadicLattice, LatticeCube, Vec<Node>)> = None;
    for lat in lattices {
        let Some((c, rect, side)) = lat
            .levels()
            .flat_map(|level| {
                lat.cubes_in_domain(dom, level)
                    .into_iter()
                    .map(move |(c, r)| (c, r, lat.side(level)))
            })
            .filter(|(_, r, _)| r.covers(&support))
            .min_by(|a, b| a.2.total_cmp(&b.2))
        else {
            continue;
        };
        let chain = ancestor_chain(dom, lat, c, eta);
        let top = chain.last().map_or(rect, |n| n.rect);
        let key = (!top.covers(&full), side);
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, lat, c, chain));
        }
    }
    best.map(|(_, l, c, chain)| (l, c, chain))
}

/// Ancestors of `root`, each witnessed by its cells outside the previous
/// one, while that keeps a fraction `eta` of the cube inside the grid. They
/// carry the pairing with any `g` supported away from `f`.
fn ancestor_chain(dom: &Domain, lattice: &DyadicLattice, root: LatticeCube, eta: f64) -> Vec<Node> {
    let n = dom.resolution();
    let mut out = Vec::new();
    let mut inner = lattice.to_cube(&root).cell_rect(dom);
    let mut c = root;
    while let Some(p) = lattice.parent(&c) {
        let cube = lattice.to_cube(&p);
        let rect = cube.cell_rect(dom);
        let witness: Vec<u32> = rect
            .cells()
            .filter(|&(i, j)| !inner.contains(i, j))
            .map(|(i, j)| (i * n + j) as u32)
            .collect();
        if (witness.len() as f64) < eta * rect.count() as f64 {
            break;
        }
        out.push(Node {
            cube,
            rect,
            witness,
        });
        inner = rect;
        c = p;
    }
    out
}

/// Builds a sparse family for `f` and `op`, recording escalations of the
/// stopping multiplier.
pub fn build_sparse_family_traced(
    f: &GridFunction,
    op: &OperatorHandle,
    r: f64,
    params: &SparseBuildParams,
    lattices: &[DyadicLattice],
) -> Result<SparseBuild> {
    params.validate()?;
    if !(r > 1.0) {
        return Err(invalid("r", format!("need r > 1, got {r}")));
    }
    if f.is_zero() {
        return Err(Error::Degenerate("f vanishes identically".into()));
    }
    let (lattice, root, chain) =
        root_with_chain(f.domain(), f.support_rect(), lattices, params.eta_target)
            .ok_or_else(|| invalid("lattices", "no cube contains the support"))?;
    let mut multiplier = params.threshold_multiplier;
    let mut worst = 0.0;
    for escalations in 0..=params.max_escalations {
        let builder = Builder {
            f,
            op,
            lattice,
            lattices,
            params,
            multiplier,
        };
        let mut nodes = builder.grow(root, 0)?;
        nodes.extend(chain.iter().cloned());
        let family = SparseFamily {
            domain: *f.domain(),
            cubes: nodes.iter().map(|n| n.cube).collect(),
            witnesses: nodes
                .into_iter()
                .map(|n| {
                    debug_assert!(n.rect.count() >= n.witness.len());
                    CellSet::from_unsorted(n.witness)
                })
                .collect(),
            eta: params.eta_target,
        };
        let report = verify_sparse(&family);
        if report.ok {
            return Ok(SparseBuild {
                family,
                escalations,
                threshold_multiplier: multiplier,
                eta_achieved: report.worst_ratio,
            });
        }
        worst = report.worst_ratio;
        multiplier *= params.escalation_factor;
    }
    Err(Error::SparseFailure {
        worst_ratio: worst,
        target: params.eta_target,
        escalations: params.max_escalations,
    })
}

/// A sparse family for `f` and `op` passing the independent check at
/// `params.eta_target`.
pub fn build_sparse_family(
    f: &GridFunction,
    op: &OperatorHandle,
    r: f64,
    params: &SparseBuildParams,
    lattices: &[DyadicLattice],
) -> Result<SparseFamily> {
    Ok(build_sparse_family_traced(f, op, r, params, lattices)?.family)
}

/// `𝒜_{S,Φ₁,Φ₂}(f, g)`.
pub fn bilinear_form(
    s: &SparseFamily,
    f: &GridFunction,
    g: &GridFunction,
    phi1: YoungFunction,
    phi2: YoungFunction,
) -> f64 {
    let dom = &s.domain;
    let terms: Vec<f64> = s
        .cubes
        .par_iter()
        .map(|q| {
            let a = luxemburg_norm(f, q, phi1);
            if a == 0.0 {
                return 0.0;
            }
            a * luxemburg_norm(g, q, phi2) * q.measure(dom)
        })
        .collect();
    compensated_sum(terms)
}

/// `|∫ g T^*f| / (‖Ω‖_∞ (r' 𝒜_{S,L¹,L^r}(f,g) + 𝒜_{S,L^Φ,L^r}(f,g)))`.
pub fn domination_ratio(
    f: &GridFunction,
    g: &GridFunction,
    tstar_f: &GridFunction,
    s: &SparseFamily,
    r: f64,
    omega_sup: f64,
) -> Result<f64> {
    if !(r > 1.0) {
        return Err(invalid("r", format!("need r > 1, got {r}")));
    }
    let pairing = g.zip_with(tstar_f, |a, b| a * b)?;
    let num = crate::grid::integrate(&pairing).abs();
    if num == 0.0 {
        return Ok(0.0);
    }
    let lr = YoungFunction::power(r)?;
    let r_dual = r / (r - 1.0);
    let den = omega_sup
        * (r_dual * bilinear_form(s, f, g, YoungFunction::Power(1.0), lr)
            + bilinear_form(s, f, g, YoungFunction::PhiLogLog, lr));
    if !(den > 0.0) {
        return Err(Error::Degenerate(
            "f or g vanishes on every cube of the family".into(),
        ));
    }
    Ok(num / den)
}

/// One line of a sparse run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRunReport {
    pub r: f64,
    pub num_cubes: usize,
    pub eta_achieved: f64,
    pub escalations: usize,
    pub ratio: f64,
}
