//! Uniform cell-centred grids on the box `[-L, L)^2` and the functions that
//! live on them.
//!
//! Every function is treated as compactly supported inside the box and
//! identically zero outside it. Cell `(i, j)` has centre
//! `(-L + (i + 1/2) h, -L + (j + 1/2) h)`; `i` runs along the first
//! coordinate. Values are stored row-major with index `i * N + j`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

/// The discretised box `[-L, L)^2` with `N x N` cells of side `h = 2L / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    half_width: f64,
    resolution: usize,
    cell_size: f64,
}

impl Domain {
    pub fn new(half_width: f64, resolution: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        if resolution < 16 || !resolution.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "resolution must be a power of two >= 16, got {resolution}"
            )));
        }
        Ok(Self {
            half_width,
            resolution,
            cell_size: 2.0 * half_width / resolution as f64,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of the whole box.
    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    /// Centre coordinate of cell index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.cell_size
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.resolution + j
    }

    /// Cell containing the point, if it lies in the box.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let n = self.resolution as f64;
        let fi = ((p[0] + self.half_width) / self.cell_size).floor();
        let fj = ((p[1] + self.half_width) / self.cell_size).floor();
        if fi < 0.0 || fj < 0.0 || fi >= n || fj >= n {
            None
        } else {
            Some((fi as usize, fj as usize))
        }
    }

    pub fn full_rect(&self) -> CellRect {
        CellRect::new(0, self.resolution, 0, self.resolution)
    }
}

/// Half-open rectangle of cell indices `[i0, i1) x [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl CellRect {
    pub fn new(i0: usize, i1: usize, j0: usize, j1: usize) -> Self {
        Self { i0, i1, j0, j1 }
    }

    pub fn empty() -> Self {
        Self::new(0, 0, 0, 0)
    }

    pub fn is_empty(&self) -> bool {
        self.i0 >= self.i1 || self.j0 >= self.j1
    }

    pub fn rows(&self) -> usize {
        self.i1.saturating_sub(self.i0)
    }

    pub fn cols(&self) -> usize {
        self.j1.saturating_sub(self.j0)
    }

    pub fn count(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    pub fn intersect(&self, other: &CellRect) -> CellRect {
        let r = CellRect::new(
            self.i0.max(other.i0),
            self.i1.min(other.i1),
            self.j0.max(other.j0),
            self.j1.min(other.j1),
        );
        if r.is_empty() {
            CellRect::empty()
        } else {
            r
        }
    }

    /// Smallest rectangle containing both.
    pub fn hull(&self, other: &CellRect) -> CellRect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        CellRect::new(
            self.i0.min(other.i0),
            self.i1.max(other.i1),
            self.j0.min(other.j0),
            self.j1.max(other.j1),
        )
    }

    /// `true` when `other` is a subset of `self`. The empty rectangle is a
    /// subset of everything.
    pub fn covers(&self, other: &CellRect) -> bool {
        other.is_empty()
            || (self.i0 <= other.i0
                && self.i1 >= other.i1
                && self.j0 <= other.j0
                && self.j1 >= other.j1)
    }

    /// Grow by `margin` cells on every side, clipped to `[0, n)`.
    pub fn grow(&self, margin: usize, n: usize) -> CellRect {
        if self.is_empty() {
            return *self;
        }
        CellRect::new(
            self.i0.saturating_sub(margin),
            (self.i1 + margin).min(n),
            self.j0.saturating_sub(margin),
            (self.j1 + margin).min(n),
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.i0..self.i1).flat_map(move |i| (self.j0..self.j1).map(move |j| (i, j)))
    }
}

/// Real samples of a function on the cell centres of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: Domain) -> Self {
        Self {
            domain,
            values: vec![0.0; domain.len()],
        }
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        Self {
            domain,
            values: vec![c; domain.len()],
        }
    }

    pub fn from_values(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(invalid(
                "values",
                format!("expected {} samples, got {}", domain.len(), values.len()),
            ));
        }
        let n = domain.resolution();
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k / n, j: k % n });
        }
        Ok(Self { domain, values })
    }

    /// Sample `f` at every cell centre. Panics if `f` returns a non-finite
    /// value, which is a programming error in the caller.
    pub fn from_fn(domain: Domain, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = domain.resolution();
        let mut values = Vec::with_capacity(domain.len());
        for i in 0..n {
            let x = domain.coord(i);
            for j in 0..n {
                let v = f(x, domain.coord(j));
                assert!(v.is_finite(), "non-finite sample at ({i}, {j})");
                values.push(v);
            }
        }
        Self { domain, values }
    }

    /// Indicator of the cells whose centres satisfy `pred`.
    pub fn indicator(domain: Domain, pred: impl Fn(f64, f64) -> bool) -> Self {
        Self::from_fn(domain, |x, y| if pred(x, y) { 1.0 } else { 0.0 })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.domain.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite());
        let k = self.domain.index(i, j);
        self.values[k] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.domain.resolution();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn check_same_domain(&self, other: &GridFunction) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        let values = self.values.iter().map(|&v| f(v)).collect();
        GridFunction {
            domain: self.domain,
            values,
        }
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        self.check_same_domain(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridFunction {
            domain: self.domain,
            values,
        })
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Smallest rectangle containing every non-zero sample.
    pub fn support_rect(&self) -> CellRect {
        let n = self.domain.resolution();
        let (mut i0, mut i1, mut j0, mut j1) = (n, 0, n, 0);
        for i in 0..n {
            for (j, &v) in self.row(i).iter().enumerate() {
                if v != 0.0 {
                    i0 = i0.min(i);
                    i1 = i1.max(i + 1);
                    j0 = j0.min(j);
                    j1 = j1.max(j + 1);
                }
            }
        }
        if i0 >= i1 {
            CellRect::empty()
        } else {
            CellRect::new(i0, i1, j0, j1)
        }
    }

    /// Copy of `self` with every sample outside `rect` set to zero.
    pub fn restrict(&self, rect: &CellRect) -> GridFunction {
        let mut out = GridFunction::zeros(self.domain);
        for (i, j) in rect.cells() {
            let k = self.domain.index(i, j);
            out.values[k] = self.values[k];
        }
        out
    }

    /// Copy of `self` with every sample inside `rect` set to zero.
    pub fn remove(&self, rect: &CellRect) -> GridFunction {
        let mut out = self.clone();
        for (i, j) in rect.cells() {
            let k = self.domain.index(i, j);
            out.values[k] = 0.0;
        }
        out
    }

    pub fn sum_over(&self, rect: &CellRect) -> f64 {
        compensated_sum(rect.cells().map(|(i, j)| self.get(i, j)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        let n = self.domain.resolution();
        for i in 0..n {
            for j in 0..n {
                wr.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:.16e}", self.get(i, j)),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(domain: Domain, r: R) -> Result<Self> {
        let n = domain.resolution();
        let mut values = vec![f64::NAN; domain.len()];
        let mut seen = vec![false; domain.len()];
        let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Format(format!(
                    "expected `i,j,value`, got {} fields",
                    rec.len()
                )));
            }
            let parse_idx = |s: &str| -> Result<usize> {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Format(format!("bad index `{s}`: {e}")))
            };
            let i = parse_idx(&rec[0])?;
            let j = parse_idx(&rec[1])?;
            if i >= n || j >= n {
                return Err(Error::Format(format!("cell ({i}, {j}) outside {n}x{n} grid")));
            }
            let v: f64 = rec[2]
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("bad value `{}`: {e}", &rec[2])))?;
            let k = domain.index(i, j);
            if seen[k] {
                return Err(Error::Format(format!("cell ({i}, {j}) listed twice")));
            }
            seen[k] = true;
            values[k] = v;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("cell ({}, {}) missing", k / n, k % n)));
        }
        Self::from_values(domain, values)
    }

    /// Write `<stem>.csv` and the `<stem>.json` header sidecar.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let header = GridHeader {
            half_width: self.domain.half_width(),
            resolution: self.domain.resolution(),
        };
        std::fs::write(
            stem.with_extension("json"),
            serde_json::to_string_pretty(&header)?,
        )?;
        let file = std::fs::File::create(stem.with_extension("csv"))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let header: GridHeader =
            serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let domain = Domain::new(header.half_width, header.resolution)?;
        let file = std::fs::File::open(stem.with_extension("csv"))?;
        Self::read_csv(domain, std::io::BufReader::new(file))
    }
}

/// JSON sidecar describing the grid of a CSV-serialised [`GridFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub half_width: f64,
    pub resolution: usize,
}

/// `h^2 * sum(values)`.
pub fn integrate(f: &GridFunction) -> f64 {
    f.domain.cell_area() * compensated_sum(f.values.iter().copied())
}

/// `L^p` norm for `p >= 1`; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid("p", format!("need p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let s = if p == 1.0 {
        compensated_sum(f.values.iter().map(|v| v.abs()))
    } else if p == 2.0 {
        compensated_sum(f.values.iter().map(|v| v * v))
    } else {
        compensated_sum(f.values.iter().map(|v| v.abs().powf(p)))
    };
    Ok((f.domain.cell_area() * s).powf(1.0 / p))
}

/// Lebesgue measure of `{|f| > alpha}`.
pub fn superlevel_measure(f: &GridFunction, alpha: f64) -> f64 {
    let count = f.values.iter().filter(|v| v.abs() > alpha).count();
    count as f64 * f.domain.cell_area()
}

/// `w({|f| > alpha})` for a positive weight sampled on the same grid.
pub fn weighted_superlevel_measure(
    f: &GridFunction,
    alpha: f64,
    weight: &GridFunction,
) -> Result<f64> {
    f.check_same_domain(weight)?;
    let s = compensated_sum(
        f.values
            .iter()
            .zip(&weight.values)
            .filter(|(v, _)| v.abs() > alpha)
            .map(|(_, w)| *w),
    );
    Ok(s * f.domain.cell_area())
}

/// Summed-area table for constant-time rectangle sums.
#[derive(Debug, Clone)]
pub struct PrefixSum {
    n: usize,
    table: Vec<f64>,
}

impl PrefixSum {
    pub fn new(values: &[f64], n: usize) -> Self {
        let m = n + 1;
        let mut table = vec![0.0; m * m];
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += values[i * n + j];
                table[(i + 1) * m + j + 1] = table[i * m + j + 1] + row;
            }
        }
        Self { n, table }
    }

    #[inline]
    pub fn rect_sum(&self, r: &CellRect) -> f64 {
        if r.is_empty() {
            return 0.0;
        }
        let m = self.n + 1;
        let t = &self.table;
        t[r.i1 * m + r.j1] - t[r.i0 * m + r.j1] - t[r.i1 * m + r.j0] + t[r.i0 * m + r.j0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(n: usize) -> Domain {
        Domain::new(1.0, n).unwrap()
    }

    #[test]
    fn domain_rejects_bad_resolution() {
        assert!(Domain::new(1.0, 8).is_err());
        assert!(Domain::new(1.0, 48).is_err());
        assert!(Domain::new(0.0, 16).is_err());
        let d = dom(64);
        assert_eq!(d.cell_size(), 2.0 / 64.0);
    }

    #[test]
    fn integrate_constants() {
        assert_eq!(integrate(&GridFunction::constant(dom(16), 1.0)), 4.0);
        assert_eq!(integrate(&GridFunction::zeros(dom(16))), 0.0);
    }

    #[test]
    fn lp_norm_of_unit_square_indicator() {
        let d = dom(32);
        let f = GridFunction::indicator(d, |x, y| (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y));
        assert!((lp_norm(&f, 2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(lp_norm(&f, 0.5).is_err());
        let c = GridFunction::constant(d, -2.5);
        assert_eq!(lp_norm(&c, f64::INFINITY).unwrap(), 2.5);
    }

    #[test]
    fn superlevel_of_scaled_indicator() {
        let d = dom(32);
        let e = GridFunction::indicator(d, |x, y| x * x + y * y < 0.25);
        let count = e.values().iter().filter(|&&v| v > 0.0).count() as f64;
        let f = e.scale(2.0);
        assert_eq!(superlevel_measure(&f, 1.0), count * d.cell_area());
        assert_eq!(superlevel_measure(&GridFunction::zeros(d), 0.1), 0.0);
        let w = GridFunction::constant(d, 1.0);
        assert_eq!(
            weighted_superlevel_measure(&f, 1.0, &w).unwrap(),
            superlevel_measure(&f, 1.0)
        );
    }

    #[test]
    fn binary_ops_require_equal_domains() {
        let a = GridFunction::zeros(dom(16));
        let b = GridFunction::zeros(dom(32));
        assert!(matches!(a.lin_comb(1.0, &b, 1.0), Err(Error::DomainMismatch)));
    }

    #[test]
    fn rejects_non_finite_values() {
        let d = dom(16);
        let mut v = vec![0.0; d.len()];
        v[17] = f64::NAN;
        assert!(matches!(
            GridFunction::from_values(d, v),
            Err(Error::NonFinite { i: 1, j: 1 })
        ));
    }

    #[test]
    fn support_rect_and_restrict() {
        let d = dom(16);
        let mut f = GridFunction::zeros(d);
        f.set(3, 5, 1.0);
        f.set(7, 2, -1.0);
        assert_eq!(f.support_rect(), CellRect::new(3, 8, 2, 6));
        let r = f.restrict(&CellRect::new(0, 4, 0, 16));
        assert_eq!(r.get(7, 2), 0.0);
        assert_eq!(r.get(3, 5), 1.0);
        assert!(GridFunction::zeros(d).support_rect().is_empty());
    }

    fn rect() -> impl proptest::strategy::Strategy<Value = CellRect> {
        use proptest::prelude::*;
        (0usize..12, 0usize..6, 0usize..12, 0usize..6)
            .prop_map(|(i0, di, j0, dj)| CellRect::new(i0, i0 + di, j0, j0 + dj))
    }

    proptest::proptest! {
        #[test]
        fn intersect_and_hull_agree_with_cells(a in rect(), b in rect()) {
            let meet = a.intersect(&b);
            let hull = a.hull(&b);
            for i in 0..20 {
                for j in 0..20 {
                    let (ia, ib) = (a.contains(i, j), b.contains(i, j));
                    proptest::prop_assert_eq!(meet.contains(i, j), ia && ib);
                    if ia || ib {
                        proptest::prop_assert!(hull.contains(i, j));
                    }
                }
            }
            proptest::prop_assert!(hull.covers(&a) && hull.covers(&b));
            proptest::prop_assert!(a.covers(&meet) && b.covers(&meet));
        }
    }
}
