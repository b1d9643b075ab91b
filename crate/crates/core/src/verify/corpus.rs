//! Seeded test-function families.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Domain, GridFunction};

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub name: String,
    pub seed: u64,
    pub f: GridFunction,
    pub g: Option<GridFunction>,
}

/// The families a corpus can be drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// `f` a signed sum of Gaussian bumps, `g` a positive Gaussian centred
    /// inside the support of `f` and at least as wide.
    Pairs,
    /// Clusters of one- and two-cell spikes in the central eighth.
    Spikes,
    /// Sparse fields of heavy-tailed random values.
    Rough,
    /// Sums of a few smooth bumps.
    Smooth,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub domain: Domain,
    pub seed: u64,
    pub kind: CorpusKind,
    pub items: Vec<CorpusItem>,
}

fn item_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)
}

fn bump(dom: Domain, c: [f64; 2], s: f64, a: f64) -> GridFunction {
    GridFunction::from_fn(dom, |x, y| {
        let r2 = ((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (s * s);
        if r2 < 9.0 {
            a * (-r2).exp()
        } else {
            0.0
        }
    })
}

fn sign(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// One to three Gaussian bumps of either sign inside `[-0.4, 0.4]^2`.
fn bump_sum(dom: Domain, rng: &mut impl Rng) -> GridFunction {
    let mut f = GridFunction::zeros(dom);
    for _ in 0..rng.random_range(1..=3) {
        let c = [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
        let s = rng.random_range(0.03..0.15);
        let a = sign(rng) * rng.random_range(0.5..2.0);
        f = f.lin_comb(1.0, &bump(dom, c, s, a), 1.0).expect("same domain");
    }
    f
}

/// A positive Gaussian centred inside `f`'s support, whose own support
/// radius is one to two times the half-width of `f`'s.
fn companion(f: &GridFunction, rng: &mut impl Rng) -> GridFunction {
    let dom = *f.domain();
    let s = f.support_rect();
    let lo = dom.center(s.i0, s.j0);
    let hi = dom.center(s.i1 - 1, s.j1 - 1);
    let c = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
    let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]) + dom.cell_size();
    // `bump` is cut off at three widths
    bump(dom, c, half * rng.random_range(1.0..2.0) / 3.0, rng.random_range(0.5..2.0))
}

fn spikes(dom: Domain, rng: &mut impl Rng) -> GridFunction {
    let n = dom.resolution();
    let mut f = GridFunction::zeros(dom);
    // near the centre, so the 1/|x|² tails span the most decades in the box
    let (lo, hi) = (7 * n / 16, 9 * n / 16);
    for _ in 0..rng.random_range(1..=3) {
        let i = rng.random_range(lo..hi);
        let j = rng.random_range(lo..hi);
        let a = sign(rng) * rng.random_range(0.5..2.0);
        f.set(i, j, a);
        if rng.random_bool(0.5) {
            f.set(i + 1, j, 0.5 * a);
        }
    }
    f
}

fn rough(dom: Domain, rng: &mut impl Rng) -> GridFunction {
    let mut f = GridFunction::zeros(dom);
    // sparse enough that the mean of |f| over the box stays below 2
    let density = rng.random_range(0.005..0.03);
    for (i, j) in dom.full_rect().cells() {
        if rng.random_bool(density) {
            let mag = 10f64.powf(rng.random_range(-1.0..2.5));
            f.set(i, j, sign(rng) * mag);
        }
    }
    f
}

fn smooth(dom: Domain, rng: &mut impl Rng) -> GridFunction {
    let mut f = GridFunction::zeros(dom);
    for _ in 0..rng.random_range(2..=5) {
        let c = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let s = rng.random_range(0.02..0.2);
        let a = sign(rng) * rng.random_range(0.2..1.0);
        f = f.lin_comb(1.0, &bump(dom, c, s, a), 1.0).expect("same domain");
    }
    f
}

impl Corpus {
    /// `count` items drawn from `kind`, each from its own derived seed.
    pub fn generate(dom: Domain, kind: CorpusKind, seed: u64, count: usize) -> Self {
        let items = (0..count)
            .map(|k| {
                let s = item_seed(seed, k);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let (f, g) = match kind {
                    CorpusKind::Pairs => {
                        let f = bump_sum(dom, &mut rng);
                        let g = companion(&f, &mut rng);
                        (f, Some(g))
                    }
                    CorpusKind::Spikes => (spikes(dom, &mut rng), None),
                    CorpusKind::Rough => (rough(dom, &mut rng), None),
                    CorpusKind::Smooth => (smooth(dom, &mut rng), None),
                };
                CorpusItem {
                    name: format!("{}-{k}", kind.label()),
                    seed: s,
                    f,
                    g,
                }
            })
            .collect();
        Self {
            domain: dom,
            seed,
            kind,
            items,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl CorpusKind {
    pub fn label(&self) -> &'static str {
        match self {
            CorpusKind::Pairs => "pair",
            CorpusKind::Spikes => "spikes",
            CorpusKind::Rough => "rough",
            CorpusKind::Smooth => "smooth",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_bounded() {
        let d = Domain::new(1.0, 32).unwrap();
        for kind in [CorpusKind::Pairs, CorpusKind::Spikes, CorpusKind::Rough, CorpusKind::Smooth] {
            let a = Corpus::generate(d, kind, 7, 5);
            let b = Corpus::generate(d, kind, 7, 5);
            let c = Corpus::generate(d, kind, 8, 5);
            for ((x, y), z) in a.items.iter().zip(&b.items).zip(&c.items) {
                assert_eq!(x.f, y.f);
                assert_eq!(x.g, y.g);
                assert_eq!(x.g.is_some(), kind == CorpusKind::Pairs);
                assert!(x.f.values().iter().all(|v| v.is_finite()));
                assert_ne!(x.seed, z.seed);
            }
            assert!(a.items.iter().any(|i| !i.f.is_zero()));
        }
    }
}
