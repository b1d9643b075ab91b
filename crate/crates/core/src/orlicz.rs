//! Young functions, Luxemburg averages over cubes and Orlicz maximal
//! functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::{sup_over_cubes, Cube, DyadicLattice};
use crate::error::{invalid, Error, Result};
use crate::grid::{compensated_sum, CellRect, GridFunction, PrefixSum};

const E2: f64 = std::f64::consts::E * std::f64::consts::E;

/// Relative width of the final bisection bracket.
const BRACKET_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungFunction {
    /// `t^p`, `p >= 1`.
    Power(f64),
    /// `t log log(e^2 + t)`.
    PhiLogLog,
    /// `t log(e + t)`.
    Psi1,
    /// `t log(e + t) log log(e^2 + t)`.
    Psi2,
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(invalid("p", format!("power Young function needs p >= 1, got {p}")));
        }
        Ok(Self::Power(p))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Power(p) => {
                if p == 1.0 {
                    t
                } else if p == 2.0 {
                    t * t
                } else {
                    t.powf(p)
                }
            }
            Self::PhiLogLog => t * (E2 + t).ln().ln(),
            Self::Psi1 => t * (std::f64::consts::E + t).ln(),
            Self::Psi2 => t * (std::f64::consts::E + t).ln() * (E2 + t).ln().ln(),
        }
    }
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power(p) => write!(f, "power:{p}"),
            Self::PhiLogLog => f.write_str("phi"),
            Self::Psi1 => f.write_str("psi1"),
            Self::Psi2 => f.write_str("psi2"),
        }
    }
}

impl FromStr for YoungFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(Self::PhiLogLog),
            "psi1" => Ok(Self::Psi1),
            "psi2" => Ok(Self::Psi2),
            _ => match s.strip_prefix("power:") {
                Some(p) => Self::power(
                    p.parse()
                        .map_err(|_| invalid("young", format!("bad exponent in `{s}`")))?,
                ),
                None => Err(invalid("young", format!("unknown Young function `{s}`"))),
            },
        }
    }
}

impl Serialize for YoungFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YoungFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Luxemburg average of `|values|` with respect to the normalised counting
/// measure, together with the achieved `avg Φ(|v|/λ)`.
pub fn luxemburg_of(values: &[f64], phi: YoungFunction) -> (f64, f64) {
    let n = values.len();
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n == 0 || max == 0.0 {
        return (0.0, 0.0);
    }
    let avg = |lambda: f64| {
        compensated_sum(values.iter().map(|v| phi.eval(v.abs() / lambda))) / n as f64
    };
    if let YoungFunction::Power(p) = phi {
        // scale out the max so large exponents cannot overflow
        let s = compensated_sum(values.iter().map(|v| (v.abs() / max).powf(p))) / n as f64;
        let lambda = max * s.powf(1.0 / p);
        return (lambda, avg(lambda));
    }
    let mut hi = max;
    while avg(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while avg(lo) <= 1.0 {
        hi = lo;
        lo /= 2.0;
    }
    // avg(lo) > 1 >= avg(hi)
    while hi / lo - 1.0 > BRACKET_TOL {
        let mid = (lo * hi).sqrt();
        if avg(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi, avg(hi))
}

fn rect_values(f: &GridFunction, r: &CellRect) -> Vec<f64> {
    let n = f.domain().resolution();
    let mut out = Vec::with_capacity(r.count());
    for i in r.i0..r.i1 {
        out.extend_from_slice(&f.values()[i * n + r.j0..i * n + r.j1]);
    }
    out
}

pub fn luxemburg_on_rect(f: &GridFunction, r: &CellRect, phi: YoungFunction) -> f64 {
    luxemburg_of(&rect_values(f, r), phi).0
}

/// `⟨|f|⟩_{Φ,Q}` over the cells of `Q`; 0 when `Q` holds no cell.
pub fn luxemburg_norm(f: &GridFunction, q: &Cube, phi: YoungFunction) -> f64 {
    luxemburg_on_rect(f, &q.cell_rect(f.domain()), phi)
}

/// `(sup_{Q ∋ x} ⟨|f|^r⟩_Q)^{1/r}` over the cubes of `lattices`, from
/// summed-area tables.
pub fn power_maximal(f: &GridFunction, r: f64, lattices: &[DyadicLattice]) -> Result<GridFunction> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(invalid("r", format!("need r >= 1, got {r}")));
    }
    let dom = *f.domain();
    let powered: Vec<f64> = f
        .values()
        .iter()
        .map(|v| if r == 1.0 { v.abs() } else { v.abs().powf(r) })
        .collect();
    let table = PrefixSum::new(&powered, dom.resolution());
    let sup = sup_over_cubes(&dom, lattices, |rect| {
        (table.rect_sum(rect) / rect.count() as f64).max(0.0)
    });
    let values = sup
        .into_iter()
        .map(|v| if r == 1.0 { v } else { v.powf(1.0 / r) })
        .collect();
    GridFunction::from_values(dom, values)
}

/// `M_Φ f(x) = sup_{Q ∋ x} ⟨|f|⟩_{Φ,Q}`.
pub fn orlicz_maximal(
    f: &GridFunction,
    phi: YoungFunction,
    lattices: &[DyadicLattice],
) -> Result<GridFunction> {
    if let YoungFunction::Power(p) = phi {
        return power_maximal(f, p, lattices);
    }
    let dom = *f.domain();
    let support = f.support_rect();
    let sup = sup_over_cubes(&dom, lattices, |rect| {
        if rect.intersect(&support).is_empty() {
            0.0
        } else {
            luxemburg_on_rect(f, rect, phi)
        }
    });
    GridFunction::from_values(dom, sup)
}

/// `⟨|f|⟩_{Φ,Q} / (log(1 + r') ⟨|f|⟩_Q + ⟨|f|⟩_{r,Q})`; 0 when `f`
/// vanishes on `Q`.
pub fn check_refinement_inequality(f: &GridFunction, q: &Cube, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(invalid("r", format!("need r > 1, got {r}")));
    }
    Ok(refinement_ratio(&rect_values(f, &q.cell_rect(f.domain())), r))
}

pub(crate) fn refinement_ratio(values: &[f64], r: f64) -> f64 {
    let num = luxemburg_of(values, YoungFunction::PhiLogLog).0;
    if num == 0.0 {
        return 0.0;
    }
    let r_conj = r / (r - 1.0);
    let one = luxemburg_of(values, YoungFunction::Power(1.0)).0;
    let rr = luxemburg_of(values, YoungFunction::Power(r)).0;
    num / ((1.0 + r_conj).ln() * one + rr)
}
