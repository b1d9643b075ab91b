//! Muckenhoupt weights and their `A_p`, `A_1` and `A_∞` constants.
//!
//! Every supremum over cubes runs over the cubes of the nine cover
//! lattices; `A_p` and `A_∞` only use cubes of side at least `4h`, below
//! which a cube holds too few cells to say anything.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::dyadic::{domain_lattices, DyadicLattice};
use crate::error::{invalid, Error, Result};
use crate::grid::{compensated_sum, CellRect, Domain, GridFunction, PrefixSum};
use crate::orlicz::power_maximal;

/// Smallest cube side, in cells, entering `A_p` and `A_∞`.
pub const MIN_SIDE_CELLS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Key {
    Ap(u64),
    A1,
    AInf,
}

#[derive(Debug)]
pub struct Weight {
    values: GridFunction,
    cache: Mutex<Vec<(Key, f64)>>,
}

impl Clone for Weight {
    fn clone(&self) -> Self {
        Self {
            values: self.values.clone(),
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl Weight {
    pub fn new(values: GridFunction) -> Result<Self> {
        if let Some(k) = values.values().iter().position(|v| !(*v > 0.0)) {
            let n = values.domain().resolution();
            return Err(Error::Degenerate(format!(
                "weight must be positive, cell ({}, {}) holds {}",
                k / n,
                k % n,
                values.values()[k]
            )));
        }
        Ok(Self {
            values,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn constant(dom: Domain, c: f64) -> Result<Self> {
        Self::new(GridFunction::constant(dom, c))
    }

    /// `(|x - x0| + h/2)^a`, `a > -2`.
    pub fn power(dom: Domain, a: f64, x0: [f64; 2]) -> Result<Self> {
        if !(a.is_finite() && a > -2.0) {
            return Err(invalid("a", format!("power weight needs a > -2, got {a}")));
        }
        let eps = dom.cell_size() / 2.0;
        Self::new(GridFunction::from_fn(dom, |x, y| {
            ((x - x0[0]).hypot(y - x0[1]) + eps).powf(a)
        }))
    }

    /// `inside` on the square of side `side` centred at `x0`, `outside`
    /// elsewhere.
    pub fn indicator_mix(
        dom: Domain,
        inside: f64,
        outside: f64,
        x0: [f64; 2],
        side: f64,
    ) -> Result<Self> {
        let half = side / 2.0;
        Self::new(GridFunction::from_fn(dom, |x, y| {
            if (x - x0[0]).abs() < half && (y - x0[1]).abs() < half {
                inside
            } else {
                outside
            }
        }))
    }

    /// `const:c`, `power:a:x0:y0` or `indicator-mix:in:out:x0:y0:side`.
    pub fn preset(dom: Domain, spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let nums = |rest: &[&str]| -> Result<Vec<f64>> {
            rest.iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| invalid("weight", format!("bad number `{s}` in `{spec}`")))
                })
                .collect()
        };
        match (parts[0], parts.len()) {
            ("const", 2) => Self::constant(dom, nums(&parts[1..])?[0]),
            ("power", 4) => {
                let v = nums(&parts[1..])?;
                Self::power(dom, v[0], [v[1], v[2]])
            }
            ("indicator-mix", 6) => {
                let v = nums(&parts[1..])?;
                Self::indicator_mix(dom, v[0], v[1], [v[2], v[3]], v[4])
            }
            _ => Err(invalid("weight", format!("unknown weight preset `{spec}`"))),
        }
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn domain(&self) -> &Domain {
        self.values.domain()
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.values.scale(c))
    }

    fn cached(&self, key: Key, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(&(_, v)) = self.cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(v);
        }
        let v = compute()?;
        self.cache.lock().unwrap().push((key, v));
        Ok(v)
    }

    /// `[w]_{A_p}` over the grid's cover lattices, cached.
    pub fn ap(&self, p: f64) -> Result<f64> {
        self.cached(Key::Ap(p.to_bits()), || {
            ap_constant(self, p, &domain_lattices(self.domain()))
        })
    }

    pub fn a1(&self) -> Result<f64> {
        self.cached(Key::A1, || a1_constant(self, &domain_lattices(self.domain())))
    }

    pub fn ainf(&self) -> Result<f64> {
        self.cached(Key::AInf, || ainf_constant(self, &domain_lattices(self.domain())))
    }
}

fn large_cube_rects(dom: &Domain, lattices: &[DyadicLattice]) -> Vec<CellRect> {
    let min_side = MIN_SIDE_CELLS * dom.cell_size() * (1.0 - 1e-12);
    let mut out = Vec::new();
    for lat in lattices {
        for level in lat.levels().filter(|&k| lat.side(k) >= min_side) {
            out.extend(lat.cubes_in_domain(dom, level).into_iter().map(|(_, r)| r));
        }
    }
    out
}

/// `sup_Q ⟨w⟩_Q ⟨w^{1-p'}⟩_Q^{p-1}`.
pub fn ap_constant(w: &Weight, p: f64, lattices: &[DyadicLattice]) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(invalid("p", format!("A_p needs p > 1, got {p}")));
    }
    let dom = *w.domain();
    let n = dom.resolution();
    let expo = 1.0 - p / (p - 1.0);
    let dual: Vec<f64> = w.values.values().iter().map(|v| v.powf(expo)).collect();
    let sw = PrefixSum::new(w.values.values(), n);
    let sd = PrefixSum::new(&dual, n);
    let best = large_cube_rects(&dom, lattices)
        .iter()
        .map(|r| {
            let c = r.count() as f64;
            (sw.rect_sum(r) / c) * (sd.rect_sum(r) / c).powf(p - 1.0)
        })
        .fold(0.0f64, f64::max);
    Ok(best)
}

/// `max_x Mw(x) / w(x)` with the cover-lattice maximal function.
pub fn a1_constant(w: &Weight, lattices: &[DyadicLattice]) -> Result<f64> {
    let m = power_maximal(&w.values, 1.0, lattices)?;
    Ok(m.values()
        .iter()
        .zip(w.values.values())
        .map(|(a, b)| a / b)
        .fold(0.0f64, f64::max))
}

/// Fujii–Wilson constant `sup_Q w(Q)^{-1} ∫_Q M(w χ_Q)`.
pub fn ainf_constant(w: &Weight, lattices: &[DyadicLattice]) -> Result<f64> {
    let dom = *w.domain();
    let n = dom.resolution();
    let sw = PrefixSum::new(w.values.values(), n);
    let qs = large_cube_rects(&dom, lattices);
    let best = qs
        .par_iter()
        .map(|q| {
            let (rows, cols) = (q.rows(), q.cols());
            let mut m = vec![0.0f64; rows * cols];
            for lat in lattices {
                for level in lat.levels() {
                    for (_, r) in lat.cubes_meeting_cells(&dom, level, q) {
                        let inter = r.intersect(q);
                        let v = sw.rect_sum(&inter).max(0.0) / r.count() as f64;
                        for i in inter.i0..inter.i1 {
                            let row = &mut m[(i - q.i0) * cols..(i - q.i0 + 1) * cols];
                            for slot in &mut row[inter.j0 - q.j0..inter.j1 - q.j0] {
                                if v > *slot {
                                    *slot = v;
                                }
                            }
                        }
                    }
                }
            }
            let wq = w.values.sum_over(q);
            compensated_sum(m.iter().copied()) / wq
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}
