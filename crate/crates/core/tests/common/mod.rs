//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use roughwave::grid::{Domain, GridFunction};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// The frozen proportionality constant between `p.v. cos θ / |x|²` on the
/// grid and the multiplier `-iξ₁/|ξ|`.
pub fn riesz_constant() -> f64 {
    #[derive(serde::Deserialize)]
    struct Fixture {
        constant: f64,
    }
    let text = include_str!("../fixtures/riesz.json");
    serde_json::from_str::<Fixture>(text).expect("fixture").constant
}

fn fft2(data: &mut [Complex64], p: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(p)
    } else {
        planner.plan_fft_forward(p)
    };
    for row in data.chunks_mut(p) {
        fft.process(row);
    }
    let mut col = vec![Complex64::default(); p];
    for j in 0..p {
        for i in 0..p {
            col[i] = data[i * p + j];
        }
        fft.process(&mut col);
        for i in 0..p {
            data[i * p + j] = col[i];
        }
    }
}

/// `F⁻¹[-iξ₁/|ξ| F f]` on the grid zero-padded by `pad`, restricted back to
/// the box. The first index is the `x₁` axis.
pub fn riesz_multiplier(f: &GridFunction, pad: usize) -> GridFunction {
    let dom = *f.domain();
    let n = dom.resolution();
    let p = n * pad;
    let mut data = vec![Complex64::default(); p * p];
    for i in 0..n {
        for j in 0..n {
            data[i * p + j] = Complex64::new(f.get(i, j), 0.0);
        }
    }
    fft2(&mut data, p, false);
    let freq = |k: usize| if k <= p / 2 { k as f64 } else { k as f64 - p as f64 };
    for a in 0..p {
        for b in 0..p {
            let (x, y) = (freq(a), freq(b));
            let r = x.hypot(y);
            let m = if r == 0.0 || 2 * a == p {
                Complex64::default()
            } else {
                Complex64::new(0.0, -x / r)
            };
            data[a * p + b] *= m;
        }
    }
    fft2(&mut data, p, true);
    let scale = 1.0 / (p * p) as f64;
    let mut out = GridFunction::zeros(dom);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, data[i * p + j].re * scale);
        }
    }
    out
}

/// `exp(-|x - c|² / 2σ²)`.
pub fn gaussian(dom: Domain, c: [f64; 2], sigma: f64) -> GridFunction {
    GridFunction::from_fn(dom, |x, y| {
        (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (2.0 * sigma * sigma)).exp()
    })
}

pub fn dot(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// `‖a - c·b‖₂ / ‖a‖₂`.
pub fn relative_l2(a: &GridFunction, b: &GridFunction, c: f64) -> f64 {
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - c * y).powi(2)).sum();
    (num / dot(a, a)).sqrt()
}
