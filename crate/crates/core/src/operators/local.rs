//! Local maximal functions built from `T(f χ_{(3Q)^c})` on cubes `Q`, and
//! the non-increasing rearrangement.

use rayon::prelude::*;

use super::{Combine, OperatorHandle};
use crate::dyadic::{Cube, DyadicLattice};
use crate::error::{invalid, Result};
use crate::grid::{compensated_sum, CellRect, GridFunction};

/// Non-increasing rearrangement of a step function given as
/// `(value, measure)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rearrangement {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

pub fn rearrangement(items: &[(f64, f64)]) -> Result<Rearrangement> {
    if items.iter().any(|&(v, m)| !v.is_finite() || !(m > 0.0)) {
        return Err(invalid("items", "values must be finite and measures positive"));
    }
    let mut sorted: Vec<(f64, f64)> = items.iter().map(|&(v, m)| (v.abs(), m)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut acc = 0.0;
    let cumulative = sorted
        .iter()
        .map(|&(_, m)| {
            acc += m;
            acc
        })
        .collect();
    Ok(Rearrangement {
        values: sorted.into_iter().map(|(v, _)| v).collect(),
        cumulative,
    })
}

impl Rearrangement {
    /// `h^*(t)`, right-continuous.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c <= t);
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// `|{h^* > α}|`.
    pub fn superlevel(&self, alpha: f64) -> f64 {
        let k = self.values.partition_point(|&v| v > alpha);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

/// The `⌈(1-λ)n⌉`-th smallest entry of a sorted slice, i.e. `(gχ_Q)^*(λ|Q|)`
/// on an `n`-cell cube.
pub(crate) fn rearranged_at(sorted: &[f64], lambda: f64) -> f64 {
    let n = sorted.len();
    let exceed = ((lambda * n as f64) * (1.0 + 1e-12)).floor() as usize;
    let k = n.saturating_sub(exceed).max(1);
    sorted[k - 1]
}

/// `M_{λ,T} f` for each `λ` and `𝓜_{p,T} f` for each `p` from a single scan.
#[derive(Debug, Clone)]
pub struct LocalMaximals {
    pub grand: Vec<GridFunction>,
    pub sharp: Vec<GridFunction>,
}

fn check_params(lambdas: &[f64], ps: &[f64]) -> Result<()> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(invalid("lambda", format!("need 0 < λ < 1, got {l}")));
    }
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0)) {
        return Err(invalid("p", format!("need p > 0, got {p}")));
    }
    Ok(())
}

/// `|T(f χ_{(3R)^c})|` on the cells of `R`, one entry per cell.
fn exterior_on(
    op: &OperatorHandle,
    f: &GridFunction,
    support: &CellRect,
    full: &[Vec<f64>],
    cube: &Cube,
    rect: &CellRect,
) -> Vec<f64> {
    let dom = f.domain();
    let n = dom.resolution();
    let len = rect.count();
    let three = cube.dilate(3.0).cell_rect(dom);
    let inside = three.intersect(support);
    if !inside.is_empty() && inside == *support {
        return vec![0.0; len];
    }
    let bank = op.bank();
    let restrict = |ch: &Vec<f64>| -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        for i in rect.i0..rect.i1 {
            out.extend_from_slice(&ch[i * n + rect.j0..i * n + rect.j1]);
        }
        out
    };
    let chans: Vec<Vec<f64>> = if inside.is_empty() {
        full.iter().map(restrict).collect()
    } else if inside.count() <= support.count() - inside.count() {
        full.iter()
            .zip(&bank.channels)
            .map(|(ch, c)| {
                let mut local = vec![0.0; len];
                c.convolve_local(f, &inside, None, rect, &mut local);
                let mut out = restrict(ch);
                for (o, l) in out.iter_mut().zip(&local) {
                    *o -= l;
                }
                out
            })
            .collect()
    } else {
        bank.channels
            .iter()
            .map(|c| {
                let mut out = vec![0.0; len];
                c.convolve_local(f, support, Some(&three), rect, &mut out);
                out
            })
            .collect()
    };
    let mut merged = bank.combine.merge(&chans, len);
    if bank.combine == Combine::Linear {
        for v in &mut merged {
            *v = v.abs();
        }
    }
    merged
}

/// Per-cube statistics `stat(|T(f χ_{(3R)^c})| on R)` for every cover cube
/// `R` meeting `region`, reduced to the pointwise maximum over `region`.
fn scan(
    f: &GridFunction,
    op: &OperatorHandle,
    lattices: &[DyadicLattice],
    region: &CellRect,
    outputs: usize,
    stat: impl Fn(&mut Vec<f64>) -> Vec<f64> + Sync,
) -> Result<Vec<Vec<f64>>> {
    op.check_domain(f)?;
    let dom = *f.domain();
    let mut out = vec![vec![0.0; region.count()]; outputs];
    let support = f.support_rect();
    if support.is_empty() || region.is_empty() {
        return Ok(out);
    }
    let full = op.channel_responses(f, &support, &dom.full_rect());
    let cubes: Vec<(Cube, CellRect)> = lattices
        .iter()
        .flat_map(|lat| {
            lat.levels()
                .flat_map(move |k| lat.cubes_meeting_cells(&dom, k, region))
        })
        .collect();
    let stats: Vec<Vec<f64>> = cubes
        .par_iter()
        .map(|(q, r)| {
            let mut vals = exterior_on(op, f, &support, &full, q, r);
            stat(&mut vals)
        })
        .collect();
    let cols = region.cols();
    for ((_, r), s) in cubes.iter().zip(&stats) {
        let inter = r.intersect(region);
        for (o, v) in out.iter_mut().zip(s) {
            for i in inter.i0..inter.i1 {
                let row = &mut o[(i - region.i0) * cols..(i - region.i0 + 1) * cols];
                for slot in &mut row[inter.j0 - region.j0..inter.j1 - region.j0] {
                    if *v > *slot {
                        *slot = *v;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn sharp_stat(vals: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        vals.iter().fold(0.0, |m: f64, v| m.max(*v))
    } else {
        let mean = compensated_sum(vals.iter().map(|v| v.powf(p))) / vals.len() as f64;
        mean.powf(1.0 / p)
    }
}

/// `M_{λ,T} f` for every `λ` in `lambdas` and `𝓜_{p,T} f` for every `p` in
/// `ps` (`f64::INFINITY` gives `𝓜_T`), sharing one pass over the cubes.
pub fn local_maximals(
    f: &GridFunction,
    op: &OperatorHandle,
    lattices: &[DyadicLattice],
    lambdas: &[f64],
    ps: &[f64],
) -> Result<LocalMaximals> {
    check_params(lambdas, ps)?;
    let dom = *f.domain();
    let outs = scan(f, op, lattices, &dom.full_rect(), lambdas.len() + ps.len(), |vals| {
        let mut s: Vec<f64> = ps.iter().map(|&p| sharp_stat(vals, p)).collect();
        if !lambdas.is_empty() {
            vals.sort_by(f64::total_cmp);
            let g: Vec<f64> = lambdas.iter().map(|&l| rearranged_at(vals, l)).collect();
            s.splice(0..0, g);
        }
        s
    })?;
    let mut outs = outs.into_iter();
    let mut grab = |k: usize| -> Result<Vec<GridFunction>> {
        (0..k)
            .map(|_| GridFunction::from_values(dom, outs.next().unwrap()))
            .collect()
    };
    let grand = grab(lambdas.len())?;
    let sharp = grab(ps.len())?;
    Ok(LocalMaximals { grand, sharp })
}

/// `M_{λ,T} f(x) = sup_{Q ∋ x} (T(f χ_{(3Q)^c}) χ_Q)^*(λ|Q|)`.
pub fn grand_maximal(
    f: &GridFunction,
    lambda: f64,
    op: &OperatorHandle,
    lattices: &[DyadicLattice],
) -> Result<GridFunction> {
    Ok(local_maximals(f, op, lattices, &[lambda], &[])?.grand.remove(0))
}

/// `𝓜_{p,T} f(x) = sup_{Q ∋ x} ⟨|T(f χ_{(3Q)^c})|^p⟩_Q^{1/p}`.
pub fn sharp_maximal(
    f: &GridFunction,
    p: f64,
    op: &OperatorHandle,
    lattices: &[DyadicLattice],
) -> Result<GridFunction> {
    Ok(local_maximals(f, op, lattices, &[], &[p])?.sharp.remove(0))
}

/// `M_{λ,T} f` evaluated only on the cells of `region` (row-major).
pub fn grand_maximal_on(
    f: &GridFunction,
    lambda: f64,
    op: &OperatorHandle,
    lattices: &[DyadicLattice],
    region: &CellRect,
) -> Result<Vec<f64>> {
    check_params(&[lambda], &[])?;
    let mut outs = scan(f, op, lattices, region, 1, |vals| {
        vals.sort_by(f64::total_cmp);
        vec![rearranged_at(vals, lambda)]
    })?;
    Ok(outs.remove(0))
}
