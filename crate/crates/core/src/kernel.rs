//! The rough angular profile `Ω`, the smooth dyadic partition of unity, the
//! annular kernel pieces `K_j`, and their mollifications.
//!
//! A kernel piece is tabulated on grid offsets: entry `(di, dj)` holds the
//! kernel evaluated at the displacement `x - y = (di h, dj h)`. Convolution
//! against a [`GridFunction`](crate::grid::GridFunction) happens in
//! [`crate::operators`].

use std::f64::consts::TAU;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{compensated_sum, Domain};

/// Default angular resolution of preset kernels.
pub const DEFAULT_ANGLES: usize = 512;

/// Mollifier scales may go this many octaves below the cell size; the
/// mollified kernels are evaluated by sub-cell quadrature.
pub const SUBCELL_OCTAVES: i32 = 10;

/// Angular profile `Ω` on the unit circle, sampled at `2πk/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughKernel {
    samples: Vec<f64>,
    sup_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum KernelSpec {
    Preset {
        preset: String,
        #[serde(default)]
        angles: Option<usize>,
    },
    Samples {
        angles: usize,
        values: Vec<f64>,
    },
}

impl RoughKernel {
    /// Build from angular samples; the mean is always subtracted.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 8 {
            return Err(invalid("angles", "need at least 8 angular samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "angular samples must be finite"));
        }
        let mean = compensated_sum(samples.iter().copied()) / samples.len() as f64;
        for v in &mut samples {
            *v -= mean;
        }
        let sup_norm = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { samples, sup_norm })
    }

    pub fn from_fn(angles: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(
            (0..angles)
                .map(|k| f(TAU * k as f64 / angles as f64))
                .collect(),
        )
    }

    /// Built-in profiles: `cos`, `sin`, `cos2`, `sign4` (the sign of
    /// `cos 2θ`), `odd_rough` (the sign of `cos θ`) and `zero`.
    pub fn preset(name: &str, angles: usize) -> Result<Self> {
        match name {
            "cos" => Self::from_fn(angles, f64::cos),
            "sin" => Self::from_fn(angles, f64::sin),
            "cos2" => Self::from_fn(angles, |t| (2.0 * t).cos()),
            "zero" => Self::from_samples(vec![1.0; angles]),
            "sign4" => {
                if !angles.is_multiple_of(8) {
                    return Err(invalid("angles", "sign4 needs a multiple of 8 angles"));
                }
                let q = (angles / 8) as i64;
                let m = angles as i64;
                Self::from_samples(
                    (0..m)
                        .map(|k| {
                            // shift so the positive lobe (-q, q) starts at 0
                            let s = (k + q).rem_euclid(m);
                            if s % (2 * q) == 0 {
                                0.0
                            } else if (s / (2 * q)) % 2 == 0 {
                                1.0
                            } else {
                                -1.0
                            }
                        })
                        .collect(),
                )
            }
            "odd_rough" => {
                if !angles.is_multiple_of(4) {
                    return Err(invalid("angles", "odd_rough needs a multiple of 4 angles"));
                }
                let q = (angles / 4) as i64;
                let m = angles as i64;
                Self::from_samples(
                    (0..m)
                        .map(|k| {
                            let s = (k + q).rem_euclid(m);
                            if s % (2 * q) == 0 {
                                0.0
                            } else if s < 2 * q {
                                1.0
                            } else {
                                -1.0
                            }
                        })
                        .collect(),
                )
            }
            other => Err(invalid("preset", format!("unknown kernel preset `{other}`"))),
        }
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Preset { preset, angles } => {
                Self::preset(preset, angles.unwrap_or(DEFAULT_ANGLES))
            }
            KernelSpec::Samples { angles, values } => {
                if *angles != values.len() {
                    return Err(invalid(
                        "values",
                        format!("`angles` is {angles} but {} values given", values.len()),
                    ));
                }
                Self::from_samples(values.clone())
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: KernelSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn angles(&self) -> usize {
        self.samples.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    /// `Ω` at the angle `theta` (any real), linearly interpolated.
    #[inline]
    pub fn at_angle(&self, theta: f64) -> f64 {
        let m = self.samples.len();
        let t = theta.rem_euclid(TAU) / TAU * m as f64;
        let k = t.floor();
        let frac = t - k;
        let k = (k as usize) % m;
        let a = self.samples[k];
        if frac == 0.0 {
            return a;
        }
        let b = self.samples[(k + 1) % m];
        a + frac * (b - a)
    }

    /// `Ω(v / |v|)`; the zero vector has no direction.
    pub fn evaluate(&self, direction: [f64; 2]) -> Result<f64> {
        if direction[0] == 0.0 && direction[1] == 0.0 {
            return Err(invalid("direction", "zero vector has no direction"));
        }
        Ok(self.at_angle(direction[1].atan2(direction[0])))
    }

    #[inline]
    fn at_unchecked(&self, v: [f64; 2]) -> f64 {
        self.at_angle(v[1].atan2(v[0]))
    }
}

/// Smooth step `S(u) = B(u) / (B(u) + B(1-u))` with `B(u) = exp(-1/u)`.
#[inline]
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// The annular bump `η(x) = Θ(|x|) - Θ(2|x|)` built from a cutoff `Θ` that
/// is 1 on `[0, 1]` and 0 on `[2, ∞)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PartitionBump;

impl PartitionBump {
    #[inline]
    pub fn outer(&self, t: f64) -> f64 {
        smooth_step(2.0 - t)
    }

    #[inline]
    pub fn eta(&self, r: f64) -> f64 {
        self.outer(r) - self.outer(2.0 * r)
    }

    /// `η_j(x) = η(2^{-j} x)` as a function of `r = |x|`. Both cutoffs are
    /// evaluated at exact power-of-two rescalings so consecutive scales
    /// telescope.
    #[inline]
    pub fn eta_j(&self, j: i32, r: f64) -> f64 {
        let s = r * pow2(-j);
        self.outer(s) - self.outer(pow2(1 - j) * r)
    }
}

#[inline]
pub(crate) fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// Radial mollifier: a normalised smooth bump supported in `|x| <= 1/4`, or
/// the discrete identity.
#[derive(Debug, Clone, PartialEq)]
pub enum Mollifier {
    Bump { normalization: f64, rule: Arc<QuadRule> },
    Delta,
}

/// Quadrature nodes and weights for `∫ g(z) ψ(z) dz` on the unit-scale
/// mollifier; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

const RADIAL_NODES: usize = 12;
const ANGULAR_NODES: usize = 32;

impl Mollifier {
    pub fn bump() -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(200).unwrap());
        let radial = gl.integrate(0.0, 0.25, |r| r * bump_profile(r));
        let normalization = 1.0 / (TAU * radial);

        let gl = GaussLegendre::new(NonZeroUsize::new(RADIAL_NODES).unwrap());
        let mut nodes = Vec::with_capacity(RADIAL_NODES * ANGULAR_NODES);
        let mut weights = Vec::with_capacity(RADIAL_NODES * ANGULAR_NODES);
        for &(x, w) in gl.as_node_weight_pairs() {
            let r = 0.125 * (x + 1.0);
            let radial_w = 0.125 * w * r * bump_profile(r);
            for b in 0..ANGULAR_NODES {
                let t = TAU * b as f64 / ANGULAR_NODES as f64;
                nodes.push([r * t.cos(), r * t.sin()]);
                weights.push(radial_w);
            }
        }
        let total = compensated_sum(weights.iter().copied());
        for w in &mut weights {
            *w /= total;
        }
        Mollifier::Bump {
            normalization,
            rule: Arc::new(QuadRule { nodes, weights }),
        }
    }

    /// `ψ(x)`; the delta mollifier has no pointwise profile and returns 0.
    pub fn profile(&self, x: [f64; 2]) -> f64 {
        match self {
            Mollifier::Bump { normalization, .. } => {
                normalization * bump_profile((x[0] * x[0] + x[1] * x[1]).sqrt())
            }
            Mollifier::Delta => 0.0,
        }
    }

    /// `ψ_j(x) = 2^{-2j} ψ(2^{-j} x)`.
    pub fn scaled_profile(&self, j: i32, x: [f64; 2]) -> f64 {
        let s = pow2(-j);
        s * s * self.profile([x[0] * s, x[1] * s])
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Mollifier::Delta)
    }
}

/// Unnormalised `exp(-1 / (1 - (4r)^2))` on `r < 1/4`.
#[inline]
fn bump_profile(r: f64) -> f64 {
    let u = 4.0 * r;
    if u >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Values of a kernel on the grid offsets `|di|, |dj| <= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTable {
    radius: usize,
    values: Vec<f64>,
}

impl OffsetTable {
    pub fn zeros(radius: usize) -> Self {
        let side = 2 * radius + 1;
        Self {
            radius,
            values: vec![0.0; side * side],
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, di: i64, dj: i64) -> f64 {
        let r = self.radius as i64;
        if di.abs() > r || dj.abs() > r {
            return 0.0;
        }
        self.values[((di + r) as usize) * self.side() + (dj + r) as usize]
    }

    #[inline]
    fn slot(&mut self, di: i64, dj: i64) -> &mut f64 {
        let r = self.radius as i64;
        let side = self.side();
        &mut self.values[((di + r) as usize) * side + (dj + r) as usize]
    }

    pub fn from_fn(radius: usize, f: impl Fn(i64, i64) -> f64) -> Self {
        let mut t = Self::zeros(radius);
        let r = radius as i64;
        for di in -r..=r {
            for dj in -r..=r {
                *t.slot(di, dj) = f(di, dj);
            }
        }
        t
    }

    /// Sum of two tables, widened to the larger radius.
    pub fn add(&self, other: &OffsetTable, sign: f64) -> OffsetTable {
        let radius = self.radius.max(other.radius);
        OffsetTable::from_fn(radius, |di, dj| self.get(di, dj) + sign * other.get(di, dj))
    }

    /// `h^2 Σ |K|`.
    pub fn l1(&self, h: f64) -> f64 {
        h * h * compensated_sum(self.values.iter().map(|v| v.abs()))
    }

    /// `h^2 Σ K`.
    pub fn integral(&self, h: f64) -> f64 {
        h * h * compensated_sum(self.values.iter().copied())
    }
}

/// `K_j = Ω(x') |x|^{-2} η_j(x)`, tabulated on grid offsets. After
/// mollification the same type carries `K_j * ψ_{j-l}`.
#[derive(Debug, Clone)]
pub struct KernelPiece {
    scale_index: i32,
    table: OffsetTable,
    source: Arc<PieceSource>,
}

#[derive(Debug)]
struct PieceSource {
    omega: RoughKernel,
    bump: PartitionBump,
    mean_correction: f64,
    cell_size: f64,
    reach_cells: usize,
}

impl PieceSource {
    /// Continuous `K_j` at displacement `v`.
    #[inline]
    fn eval(&self, j: i32, v: [f64; 2]) -> f64 {
        let r2 = v[0] * v[0] + v[1] * v[1];
        let r = r2.sqrt();
        let lo = pow2(j - 1);
        if r < lo || r > 4.0 * lo {
            return 0.0;
        }
        let eta = self.bump.eta_j(j, r);
        if eta == 0.0 {
            return 0.0;
        }
        (self.omega.at_unchecked(v) - self.mean_correction) * eta / r2
    }
}

impl KernelPiece {
    pub fn scale_index(&self) -> i32 {
        self.scale_index
    }

    pub fn table(&self) -> &OffsetTable {
        &self.table
    }

    pub fn cell_size(&self) -> f64 {
        self.source.cell_size
    }

    /// Discrete angular mean removed from `Ω` on this annulus.
    pub fn mean_correction(&self) -> f64 {
        self.source.mean_correction
    }

    pub fn omega_sup(&self) -> f64 {
        self.source.omega.sup_norm()
    }

    fn with_table(&self, table: OffsetTable) -> KernelPiece {
        KernelPiece {
            scale_index: self.scale_index,
            table,
            source: self.source.clone(),
        }
    }
}

/// Scales `j` with `h <= 2^{j-1}` whose annulus meets the offsets of the
/// domain.
pub fn resolvable_scales(dom: &Domain) -> std::ops::RangeInclusive<i32> {
    let h = dom.cell_size();
    let reach = (dom.resolution() - 1) as f64 * std::f64::consts::SQRT_2 * h;
    let j_min = (h.log2().ceil() as i32) + 1;
    let j_max = reach.log2().floor() as i32 + 1;
    j_min..=j_max
}

fn check_piece_scale(j: i32, dom: &Domain) -> Result<()> {
    let range = resolvable_scales(dom);
    if !range.contains(&j) {
        return Err(Error::ScaleRange(format!(
            "kernel piece j = {j} outside the resolvable range {}..={} (h = {})",
            range.start(),
            range.end(),
            dom.cell_size()
        )));
    }
    Ok(())
}

pub fn build_kernel_piece(
    omega: &RoughKernel,
    bump: PartitionBump,
    j: i32,
    dom: &Domain,
) -> Result<KernelPiece> {
    check_piece_scale(j, dom)?;
    let h = dom.cell_size();
    let n = dom.resolution();
    let radius = ((pow2(j + 1) / h).floor() as usize).min(n - 1);
    let lo = pow2(j - 1);
    let hi = pow2(j + 1);

    let radial = |di: i64, dj: i64| -> f64 {
        let r = h * ((di * di + dj * dj) as f64).sqrt();
        if r < lo || r > hi {
            0.0
        } else {
            bump.eta_j(j, r) / (r * r)
        }
    };
    // discrete angular mean on this annulus, weighted like the kernel
    let r = radius as i64;
    let mut num = crate::grid::CompensatedSum::new();
    let mut den = crate::grid::CompensatedSum::new();
    for di in -r..=r {
        for dj in -r..=r {
            let w = radial(di, dj);
            if w != 0.0 {
                num.add(w * omega.at_unchecked([di as f64, dj as f64]));
                den.add(w);
            }
        }
    }
    let mean_correction = if den.value() > 0.0 {
        num.value() / den.value()
    } else {
        0.0
    };
    let table = OffsetTable::from_fn(radius, |di, dj| {
        let w = radial(di, dj);
        if w == 0.0 {
            0.0
        } else {
            (omega.at_unchecked([di as f64, dj as f64]) - mean_correction) * w
        }
    });
    Ok(KernelPiece {
        scale_index: j,
        table,
        source: Arc::new(PieceSource {
            omega: omega.clone(),
            bump,
            mean_correction,
            cell_size: h,
            reach_cells: n - 1,
        }),
    })
}

/// Every resolvable piece `K_j` for the domain, in increasing `j`.
pub fn build_all_pieces(omega: &RoughKernel, dom: &Domain) -> Result<Vec<KernelPiece>> {
    resolvable_scales(dom)
        .map(|j| build_kernel_piece(omega, PartitionBump, j, dom))
        .collect()
}

/// Pieces with `j >= j_from`.
pub fn build_pieces_from(
    omega: &RoughKernel,
    dom: &Domain,
    j_from: i32,
) -> Result<Vec<KernelPiece>> {
    let range = resolvable_scales(dom);
    let start = j_from.max(*range.start());
    (start..=*range.end())
        .map(|j| build_kernel_piece(omega, PartitionBump, j, dom))
        .collect()
}

fn check_mollifier_scale(scale: i32, h: f64) -> Result<()> {
    if pow2(scale) < h * pow2(-SUBCELL_OCTAVES) {
        return Err(Error::ScaleRange(format!(
            "mollifier scale 2^{scale} is more than {SUBCELL_OCTAVES} octaves below h = {h}"
        )));
    }
    Ok(())
}

/// `K_j * ψ_{scale}` tabulated on the grid, by quadrature of the continuous
/// convolution over the support of `ψ_{scale}`.
pub fn mollify_piece(piece: &KernelPiece, moll: &Mollifier, scale: i32) -> Result<KernelPiece> {
    let rule = match moll {
        Mollifier::Delta => return Ok(piece.clone()),
        Mollifier::Bump { rule, .. } => rule,
    };
    let h = piece.cell_size();
    check_mollifier_scale(scale, h)?;
    let j = piece.scale_index;
    let s = pow2(scale);
    let reach = s * 0.25;
    let lo = (pow2(j - 1) - reach).max(0.0);
    let hi = pow2(j + 1) + reach;
    let max_radius = piece.table.radius().max((hi / h).ceil() as usize);
    let radius = max_radius.min(domain_reach_cells(piece));
    let src = &piece.source;
    let nodes: Vec<[f64; 2]> = rule.nodes.iter().map(|z| [z[0] * s, z[1] * s]).collect();
    let table = OffsetTable::from_fn(radius, |di, dj| {
        let x = [di as f64 * h, dj as f64 * h];
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r < lo || r > hi {
            return 0.0;
        }
        let mut acc = 0.0;
        for (z, w) in nodes.iter().zip(&rule.weights) {
            acc += w * src.eval(j, [x[0] - z[0], x[1] - z[1]]);
        }
        acc
    });
    Ok(piece.with_table(table))
}

fn domain_reach_cells(piece: &KernelPiece) -> usize {
    piece.source.reach_cells
}

/// `K^l = Σ_j K_j * ψ_{j-l}` as a single offset table.
pub fn mollified_kernel(
    pieces: &[KernelPiece],
    moll: &Mollifier,
    l: i32,
) -> Result<OffsetTable> {
    if l < 0 {
        return Err(invalid("l", format!("need l >= 0, got {l}")));
    }
    let mut total = OffsetTable::zeros(0);
    for p in pieces {
        let m = mollify_piece(p, moll, p.scale_index - l)?;
        total = total.add(m.table(), 1.0);
    }
    Ok(total)
}

/// Per-piece mollification `K_j * ψ_{j-l}`.
pub fn mollified_pieces(
    pieces: &[KernelPiece],
    moll: &Mollifier,
    l: i32,
) -> Result<Vec<KernelPiece>> {
    if l < 0 {
        return Err(invalid("l", format!("need l >= 0, got {l}")));
    }
    pieces
        .iter()
        .map(|p| mollify_piece(p, moll, p.scale_index - l))
        .collect()
}

/// `H^j_m = K_j * ψ_{j-2^m} - K_j * ψ_{j-2^{m-1}}` for every piece.
pub fn difference_kernel(
    pieces: &[KernelPiece],
    moll: &Mollifier,
    m: u32,
) -> Result<Vec<KernelPiece>> {
    if m < 1 {
        return Err(invalid("m", "need m >= 1"));
    }
    if m > 20 {
        return Err(invalid("m", format!("m = {m} is absurdly large")));
    }
    let fine = 1i32 << m;
    let coarse = 1i32 << (m - 1);
    pieces
        .iter()
        .map(|p| {
            let a = mollify_piece(p, moll, p.scale_index - fine)?;
            let b = mollify_piece(p, moll, p.scale_index - coarse)?;
            Ok(p.with_table(a.table().add(b.table(), -1.0)))
        })
        .collect()
}

/// `Ω(x') / |x|^2` at a grid offset, the target of the piece sum.
pub fn full_kernel_at(omega: &RoughKernel, h: f64, di: i64, dj: i64) -> f64 {
    if di == 0 && dj == 0 {
        return 0.0;
    }
    let r2 = h * h * (di * di + dj * dj) as f64;
    omega.at_unchecked([di as f64, dj as f64]) / r2
}
