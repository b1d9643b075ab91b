//! Direct convolution against banks of offset tables.
//!
//! A channel is a kernel table with `h^2` folded in and the non-zero column
//! span of every row recorded, so convolution is a sequence of contiguous
//! axpy updates. Accumulation order depends only on the inputs, never on
//! the thread count.

use rayon::prelude::*;

use crate::grid::{CellRect, GridFunction};
use crate::kernel::OffsetTable;

#[derive(Debug, Clone)]
pub(crate) struct Channel {
    radius: usize,
    side: usize,
    values: Vec<f64>,
    /// Inclusive column span of non-zeros per row.
    spans: Vec<Option<(usize, usize)>>,
}

impl Channel {
    pub(crate) fn from_table(table: &OffsetTable, h: f64) -> Self {
        let side = table.side();
        let h2 = h * h;
        let values: Vec<f64> = table.values().iter().map(|v| v * h2).collect();
        let spans = values
            .chunks(side)
            .map(|row| {
                let first = row.iter().position(|v| *v != 0.0)?;
                let last = row.iter().rposition(|v| *v != 0.0)?;
                Some((first, last))
            })
            .collect();
        Self {
            radius: table.radius(),
            side,
            values,
            spans,
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.spans.iter().all(Option::is_none)
    }

    /// Adds the contribution of source cell `(a, b)` with value `v` to the
    /// output rows of `dst`; `out` is row-major over `dst`.
    #[inline]
    fn scatter(&self, a: usize, b: usize, v: f64, dst: &CellRect, out: &mut [f64]) {
        let r = self.radius as i64;
        let (a, b) = (a as i64, b as i64);
        let cols = dst.cols();
        let x0 = (a - r).max(dst.i0 as i64);
        let x1 = (a + r + 1).min(dst.i1 as i64);
        for x in x0..x1 {
            let k = (x - a + r) as usize;
            let Some((e0, e1)) = self.spans[k] else { continue };
            let y0 = (b + e0 as i64 - r).max(dst.j0 as i64);
            let y1 = (b + e1 as i64 - r + 1).min(dst.j1 as i64);
            if y0 >= y1 {
                continue;
            }
            let krow = &self.values[k * self.side..(k + 1) * self.side];
            let ks = (y0 - b + r) as usize;
            let len = (y1 - y0) as usize;
            let os = (x as usize - dst.i0) * cols + (y0 as usize - dst.j0);
            for (o, kv) in out[os..os + len].iter_mut().zip(&krow[ks..ks + len]) {
                *o += v * kv;
            }
        }
    }

    /// Sequential convolution of `f` restricted to `src` (minus `hole`)
    /// onto `dst`.
    pub(crate) fn convolve_local(
        &self,
        f: &GridFunction,
        src: &CellRect,
        hole: Option<&CellRect>,
        dst: &CellRect,
        out: &mut [f64],
    ) {
        let n = f.domain().resolution();
        let vals = f.values();
        for a in src.i0..src.i1 {
            let row = &vals[a * n..(a + 1) * n];
            let skip = hole.filter(|h| a >= h.i0 && a < h.i1);
            for b in src.j0..src.j1 {
                if let Some(h) = skip {
                    if b >= h.j0 && b < h.j1 {
                        continue;
                    }
                }
                let v = row[b];
                if v != 0.0 {
                    self.scatter(a, b, v, dst, out);
                }
            }
        }
    }

    /// Convolution of `f` on `src` onto the whole of `dst`, parallel over
    /// output rows.
    pub(crate) fn convolve(&self, f: &GridFunction, src: &CellRect, dst: &CellRect) -> Vec<f64> {
        let n = f.domain().resolution();
        let cols = dst.cols();
        let mut out = vec![0.0; dst.count()];
        if self.is_zero() || src.is_empty() || dst.is_empty() {
            return out;
        }
        let vals = f.values();
        let sources: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|a| {
                if a < src.i0 || a >= src.i1 {
                    return Vec::new();
                }
                (src.j0..src.j1)
                    .filter_map(|b| {
                        let v = vals[a * n + b];
                        (v != 0.0).then_some((b, v))
                    })
                    .collect()
            })
            .collect();
        let r = self.radius as i64;
        out.par_chunks_mut(cols).enumerate().for_each(|(row, orow)| {
            let x = (dst.i0 + row) as i64;
            for a in (x - r).max(0)..(x + r + 1).min(n as i64) {
                let srow = &sources[a as usize];
                if srow.is_empty() {
                    continue;
                }
                let k = (x - a + r) as usize;
                let Some((e0, e1)) = self.spans[k] else { continue };
                let krow = &self.values[k * self.side..(k + 1) * self.side];
                for &(b, v) in srow {
                    let b = b as i64;
                    let y0 = (b + e0 as i64 - r).max(dst.j0 as i64);
                    let y1 = (b + e1 as i64 - r + 1).min(dst.j1 as i64);
                    if y0 >= y1 {
                        continue;
                    }
                    let ks = (y0 - b + r) as usize;
                    let len = (y1 - y0) as usize;
                    let os = y0 as usize - dst.j0;
                    for (o, kv) in orow[os..os + len].iter_mut().zip(&krow[ks..ks + len]) {
                        *o += v * kv;
                    }
                }
            }
        });
        out
    }
}

/// How channel outputs are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Combine {
    /// Signed sum of all channels.
    Linear,
    /// `max_k |Σ_{c >= k} channel_c|`, channels ordered fine to coarse.
    SuffixSup,
}

impl Combine {
    /// Merges `channels[c][i]` into `out[i]`.
    pub(crate) fn merge(&self, channels: &[Vec<f64>], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        match self {
            Combine::Linear => {
                for ch in channels {
                    for (o, v) in out.iter_mut().zip(ch) {
                        *o += v;
                    }
                }
            }
            Combine::SuffixSup => {
                let mut acc = vec![0.0; len];
                for ch in channels.iter().rev() {
                    for ((a, o), v) in acc.iter_mut().zip(out.iter_mut()).zip(ch) {
                        *a += v;
                        *o = o.max(a.abs());
                    }
                }
            }
        }
        out
    }
}
