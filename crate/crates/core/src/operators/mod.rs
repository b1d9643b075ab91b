//! The singular integral and its truncated, maximal, lacunary and mollified
//! relatives, the Hardy–Littlewood family, the local grand and sharp
//! maximal functions, and the commutator maximal operator.
//!
//! Every kernel operator is a bank of offset-table channels. Linear
//! operators sum their channels; maximal operators take
//! `max_k |Σ_{c >= k} channel_c|`, which covers truncations (channels are
//! annuli) and lacunary tails (channels are the pieces `K_j`) alike.

mod engine;
mod local;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicLattice;
use crate::error::{invalid, Error, Result};
use crate::grid::{CellRect, Domain, GridFunction};
use crate::kernel::{
    build_all_pieces, difference_kernel, full_kernel_at, mollified_kernel, mollified_pieces,
    KernelPiece, Mollifier, OffsetTable, RoughKernel,
};
use crate::orlicz::power_maximal;

pub(crate) use engine::{Channel, Combine};
pub use local::{
    grand_maximal, grand_maximal_on, local_maximals, rearrangement, sharp_maximal, LocalMaximals,
    Rearrangement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `T_Ω` with the singular cell omitted.
    Singular,
    /// `T_Ω^*` over the geometric truncation grid.
    MaximalTruncation,
    /// `T_Ω^{**}`.
    Lacunary,
    /// `T_l`.
    Mollified(i32),
    /// `T_l^{**}`.
    LacunaryMollified(i32),
    /// `H_m^{**}`.
    DifferenceSup(u32),
}

impl OperatorKind {
    pub fn is_maximal(&self) -> bool {
        !matches!(self, Self::Singular | Self::Mollified(_))
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Singular => f.write_str("singular"),
            Self::MaximalTruncation => f.write_str("maximal_truncation"),
            Self::Lacunary => f.write_str("lacunary"),
            Self::Mollified(l) => write!(f, "mollified({l})"),
            Self::LacunaryMollified(l) => write!(f, "lacunary_mollified({l})"),
            Self::DifferenceSup(m) => write!(f, "difference_sup({m})"),
        }
    }
}

/// Truncation radii `ε_0 < ε_1 < …`, all at least one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationGrid {
    epsilons: Vec<f64>,
}

impl TruncationGrid {
    pub fn new(epsilons: Vec<f64>, dom: &Domain) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(invalid("epsilons", "empty truncation grid"));
        }
        if epsilons.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("epsilons", "truncation radii must increase strictly"));
        }
        if !(epsilons[0] >= dom.cell_size()) {
            return Err(Error::ScaleRange(format!(
                "truncation radius {} below the cell size {}",
                epsilons[0],
                dom.cell_size()
            )));
        }
        Ok(Self { epsilons })
    }

    /// `h 2^k` for `k = 0, 1, …` until the domain diameter is reached.
    pub fn geometric(dom: &Domain) -> Self {
        let h = dom.cell_size();
        let diameter = 2.0 * std::f64::consts::SQRT_2 * dom.half_width();
        let mut epsilons = vec![h];
        while *epsilons.last().unwrap() < diameter {
            epsilons.push(2.0 * epsilons.last().unwrap());
        }
        Self { epsilons }
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }
}

#[derive(Debug)]
pub(crate) struct ChannelBank {
    pub(crate) channels: Vec<Channel>,
    pub(crate) combine: Combine,
}

/// A kernel operator ready to apply on one domain.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    kind: OperatorKind,
    kernel: RoughKernel,
    domain: Domain,
    bank: Arc<ChannelBank>,
}

fn full_table(kernel: &RoughKernel, dom: &Domain) -> OffsetTable {
    let h = dom.cell_size();
    OffsetTable::from_fn(dom.resolution() - 1, |di, dj| full_kernel_at(kernel, h, di, dj))
}

/// Annuli `ε_k <= |x| < ε_{k+1}` (last one unbounded) of the full kernel.
fn truncation_channels(kernel: &RoughKernel, dom: &Domain, grid: &TruncationGrid) -> Vec<Channel> {
    let h = dom.cell_size();
    let full = full_table(kernel, dom);
    let eps = grid.epsilons();
    (0..eps.len())
        .map(|k| {
            let lo = (eps[k] / h).powi(2);
            let hi = eps.get(k + 1).map_or(f64::INFINITY, |e| (e / h).powi(2));
            let table = OffsetTable::from_fn(full.radius(), |di, dj| {
                let r2 = (di * di + dj * dj) as f64;
                if r2 >= lo && r2 < hi {
                    full.get(di, dj)
                } else {
                    0.0
                }
            });
            Channel::from_table(&table, h)
        })
        .collect()
}

impl OperatorHandle {
    pub fn new(kind: OperatorKind, kernel: &RoughKernel, dom: &Domain) -> Result<Self> {
        Self::with_mollifier(kind, kernel, dom, &Mollifier::bump())
    }

    pub fn with_mollifier(
        kind: OperatorKind,
        kernel: &RoughKernel,
        dom: &Domain,
        moll: &Mollifier,
    ) -> Result<Self> {
        let h = dom.cell_size();
        let pieces = || build_all_pieces(kernel, dom);
        let from_tables = |tables: Vec<&OffsetTable>| -> Vec<Channel> {
            tables.into_iter().map(|t| Channel::from_table(t, h)).collect()
        };
        let (channels, combine) = match kind {
            OperatorKind::Singular => (
                vec![Channel::from_table(&full_table(kernel, dom), h)],
                Combine::Linear,
            ),
            OperatorKind::MaximalTruncation => (
                truncation_channels(kernel, dom, &TruncationGrid::geometric(dom)),
                Combine::SuffixSup,
            ),
            OperatorKind::Lacunary => {
                let ps = pieces()?;
                (from_tables(ps.iter().map(|p| p.table()).collect()), Combine::SuffixSup)
            }
            OperatorKind::Mollified(l) => {
                let t = mollified_kernel(&pieces()?, moll, l)?;
                (vec![Channel::from_table(&t, h)], Combine::Linear)
            }
            OperatorKind::LacunaryMollified(l) => {
                let ps = mollified_pieces(&pieces()?, moll, l)?;
                (from_tables(ps.iter().map(|p| p.table()).collect()), Combine::SuffixSup)
            }
            OperatorKind::DifferenceSup(m) => {
                let ps = difference_kernel(&pieces()?, moll, m)?;
                (from_tables(ps.iter().map(|p| p.table()).collect()), Combine::SuffixSup)
            }
        };
        Ok(Self {
            kind,
            kernel: kernel.clone(),
            domain: *dom,
            bank: Arc::new(ChannelBank { channels, combine }),
        })
    }

    /// `T^*` over an explicit truncation grid.
    pub fn maximal_truncation(
        kernel: &RoughKernel,
        dom: &Domain,
        grid: &TruncationGrid,
    ) -> Result<Self> {
        Ok(Self {
            kind: OperatorKind::MaximalTruncation,
            kernel: kernel.clone(),
            domain: *dom,
            bank: Arc::new(ChannelBank {
                channels: truncation_channels(kernel, dom, grid),
                combine: Combine::SuffixSup,
            }),
        })
    }

    /// Lacunary maximal operator over an explicit list of pieces.
    pub fn from_pieces(kernel: &RoughKernel, dom: &Domain, pieces: &[KernelPiece]) -> Self {
        let h = dom.cell_size();
        Self {
            kind: OperatorKind::Lacunary,
            kernel: kernel.clone(),
            domain: *dom,
            bank: Arc::new(ChannelBank {
                channels: pieces.iter().map(|p| Channel::from_table(p.table(), h)).collect(),
                combine: Combine::SuffixSup,
            }),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn kernel(&self) -> &RoughKernel {
        &self.kernel
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub(crate) fn bank(&self) -> &ChannelBank {
        &self.bank
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_domain(f)?;
        let full = self.domain.full_rect();
        let chans = self.channel_responses(f, &f.support_rect(), &full);
        GridFunction::from_values(self.domain, self.bank.combine.merge(&chans, full.count()))
    }

    pub(crate) fn check_domain(&self, f: &GridFunction) -> Result<()> {
        if *f.domain() != self.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub(crate) fn channel_responses(
        &self,
        f: &GridFunction,
        src: &CellRect,
        dst: &CellRect,
    ) -> Vec<Vec<f64>> {
        self.bank
            .channels
            .iter()
            .map(|c| c.convolve(f, src, dst))
            .collect()
    }
}

/// `T_Ω f` with the singular cell omitted.
pub fn singular_integral(f: &GridFunction, kernel: &RoughKernel) -> Result<GridFunction> {
    OperatorHandle::new(OperatorKind::Singular, kernel, f.domain())?.apply(f)
}

/// `h^2 Σ_{|x-y| >= ε} K(x - y) f(y)`; the boundary circle is included, so
/// `ε = h` reproduces [`singular_integral`].
pub fn truncated_integral(f: &GridFunction, kernel: &RoughKernel, eps: f64) -> Result<GridFunction> {
    let dom = *f.domain();
    let grid = TruncationGrid::new(vec![eps], &dom)?;
    let ch = &truncation_channels(kernel, &dom, &grid)[0];
    let full = dom.full_rect();
    GridFunction::from_values(dom, ch.convolve(f, &f.support_rect(), &full))
}

pub fn maximal_truncation(
    f: &GridFunction,
    kernel: &RoughKernel,
    grid: &TruncationGrid,
) -> Result<GridFunction> {
    OperatorHandle::maximal_truncation(kernel, f.domain(), grid)?.apply(f)
}

/// `h^2 Σ_y K(x - y) f(y)` for an arbitrary offset table.
pub fn convolve(table: &OffsetTable, f: &GridFunction) -> Result<GridFunction> {
    let dom = *f.domain();
    let ch = Channel::from_table(table, dom.cell_size());
    GridFunction::from_values(dom, ch.convolve(f, &f.support_rect(), &dom.full_rect()))
}

/// `M_r f = M(|f|^r)^{1/r}` over the cover lattices.
pub fn hl_maximal(f: &GridFunction, lattices: &[DyadicLattice], r: f64) -> Result<GridFunction> {
    power_maximal(f, r, lattices)
}

/// `[b, T_Ω]^* f(x) = max_ε |h^2 Σ_{|x-y| >= ε} K(x-y) (b(x) - b(y)) f(y)|`.
pub fn commutator_maximal(
    f: &GridFunction,
    b: &GridFunction,
    kernel: &RoughKernel,
    grid: &TruncationGrid,
) -> Result<GridFunction> {
    f.check_same_domain(b)?;
    let dom = *f.domain();
    let full = dom.full_rect();
    let bf = f.zip_with(b, |x, y| x * y)?;
    let src = f.support_rect();
    let chans: Vec<Vec<f64>> = truncation_channels(kernel, &dom, grid)
        .iter()
        .map(|c| {
            let tf = c.convolve(f, &src, &full);
            let tbf = c.convolve(&bf, &src, &full);
            tf.iter()
                .zip(&tbf)
                .zip(b.values())
                .map(|((a, c), bx)| bx * a - c)
                .collect()
        })
        .collect();
    GridFunction::from_values(dom, Combine::SuffixSup.merge(&chans, full.count()))
}

/// Mean oscillation seminorm `sup_Q ⟨|b - ⟨b⟩_Q|⟩_Q` over the cover cubes.
pub fn bmo_seminorm(b: &GridFunction, lattices: &[DyadicLattice]) -> f64 {
    let dom = b.domain();
    crate::dyadic::cover_rects(dom, lattices)
        .iter()
        .map(|r| {
            let n = r.count() as f64;
            let mean = b.sum_over(r) / n;
            r.cells().map(|(i, j)| (b.get(i, j) - mean).abs()).sum::<f64>() / n
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
