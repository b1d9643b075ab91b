use super::*;
use crate::dyadic::domain_lattices;
use crate::kernel::{build_kernel_piece, PartitionBump};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dom(n: usize) -> Domain {
    Domain::new(1.0, n).unwrap()
}

fn bump(d: Domain, c: [f64; 2], s: f64) -> GridFunction {
    GridFunction::from_fn(d, |x, y| {
        let r2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
        if r2 < 4.0 * s * s {
            (-r2 / (s * s)).exp()
        } else {
            0.0
        }
    })
}

fn random_compact(d: Domain, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = GridFunction::zeros(d);
    for (i, j) in d.full_rect().cells() {
        let [x, y] = d.center(i, j);
        if x.abs() < 0.4 && y.abs() < 0.4 {
            f.set(i, j, rng.random_range(-1.0..1.0));
        }
    }
    f
}

/// Direct double loop over all pairs with `|x - y| >= ε` per cell.
fn naive_truncated(f: &GridFunction, k: &RoughKernel, lo: f64, hi: f64) -> Vec<f64> {
    let d = f.domain();
    let n = d.resolution() as i64;
    let h = d.cell_size();
    let mut out = vec![0.0; (n * n) as usize];
    for x in 0..n {
        for y in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let v = f.get(a as usize, b as usize);
                    if v == 0.0 {
                        continue;
                    }
                    let (di, dj) = (x - a, y - b);
                    let r = h * ((di * di + dj * dj) as f64).sqrt();
                    if r >= lo * (1.0 - 1e-12) && r < hi * (1.0 - 1e-12) {
                        let theta = (dj as f64).atan2(di as f64);
                        s += k.at_angle(theta) / (r * r) * v;
                    }
                }
            }
            out[(x * n + y) as usize] = s * h * h;
        }
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_in_zero_out() {
    let d = dom(32);
    let k = RoughKernel::preset("cos", 512).unwrap();
    let z = GridFunction::zeros(d);
    let lats = domain_lattices(&d);
    for kind in [
        OperatorKind::Singular,
        OperatorKind::MaximalTruncation,
        OperatorKind::Lacunary,
        OperatorKind::Mollified(1),
        OperatorKind::LacunaryMollified(1),
        OperatorKind::DifferenceSup(1),
    ] {
        let op = OperatorHandle::new(kind, &k, &d).unwrap();
        assert!(op.apply(&z).unwrap().is_zero(), "{kind}");
        assert!(sharp_maximal(&z, 2.0, &op, &lats).unwrap().is_zero());
    }
    assert!(hl_maximal(&z, &lats, 1.0).unwrap().is_zero());
}

#[test]
fn singular_matches_naive_and_truncation_at_h() {
    let d = dom(16);
    let k = RoughKernel::preset("sign4", 512).unwrap();
    let f = random_compact(d, 3);
    let t = singular_integral(&f, &k).unwrap();
    let want = naive_truncated(&f, &k, d.cell_size(), f64::INFINITY);
    assert!(max_abs_diff(t.values(), &want) < 1e-12 * t.max_abs());
    let th = truncated_integral(&f, &k, d.cell_size()).unwrap();
    assert_eq!(th.values(), t.values());
    assert!(truncated_integral(&f, &k, 0.5 * d.cell_size()).is_err());
    let far = truncated_integral(&f, &k, 3.0).unwrap();
    assert!(far.is_zero());
}

#[test]
fn truncation_nesting_is_an_annulus_sum() {
    let d = dom(16);
    let h = d.cell_size();
    let k = RoughKernel::preset("cos", 512).unwrap();
    let f = random_compact(d, 5);
    let (e1, e2) = (2.0 * h, 5.5 * h);
    let a = truncated_integral(&f, &k, e1).unwrap();
    let b = truncated_integral(&f, &k, e2).unwrap();
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let annulus = naive_truncated(&f, &k, e1, e2);
    assert!(max_abs_diff(&diff, &annulus) <= 1e-12 * a.max_abs().max(1.0));
}

#[test]
fn maximal_truncation_properties() {
    let d = dom(32);
    let k = RoughKernel::preset("odd_rough", 512).unwrap();
    let f = bump(d, [0.1, -0.2], 0.15);
    let grid = TruncationGrid::geometric(&d);
    assert_eq!(grid.epsilons()[0], d.cell_size());
    assert!(*grid.epsilons().last().unwrap() >= 2.0 * 2f64.sqrt());
    let ts = maximal_truncation(&f, &k, &grid).unwrap();
    let tf = singular_integral(&f, &k).unwrap();
    // T^* sums the annuli separately, so agreement with T is up to round-off
    let tol = 1e-12 * tf.max_abs();
    for (a, b) in ts.values().iter().zip(tf.values()) {
        assert!(*a >= b.abs() - tol);
    }
    let scaled = maximal_truncation(&f.scale(-2.0), &k, &grid).unwrap();
    assert_eq!(scaled.values(), ts.scale(2.0).values());

    let eps = 3.0 * d.cell_size();
    let single = TruncationGrid::new(vec![eps], &d).unwrap();
    let m = maximal_truncation(&f, &k, &single).unwrap();
    let t = truncated_integral(&f, &k, eps).unwrap();
    assert_eq!(m.values(), t.abs().values());
    assert!(TruncationGrid::new(vec![0.3, 0.2], &d).is_err());
}

#[test]
fn lacunary_single_piece() {
    let d = dom(32);
    let k = RoughKernel::preset("cos", 512).unwrap();
    let f = bump(d, [0.0, 0.0], 0.2);
    let j = *crate::kernel::resolvable_scales(&d).start() + 2;
    let piece = build_kernel_piece(&k, PartitionBump, j, &d).unwrap();
    let op = OperatorHandle::from_pieces(&k, &d, std::slice::from_ref(&piece));
    let got = op.apply(&f).unwrap();
    let want = convolve(piece.table(), &f).unwrap().abs();
    assert_eq!(got.values(), want.values());
}

#[test]
fn delta_mollifier_gives_piece_sum() {
    let d = dom(32);
    let k = RoughKernel::preset("sign4", 512).unwrap();
    let f = random_compact(d, 9);
    let op = OperatorHandle::with_mollifier(OperatorKind::Mollified(2), &k, &d, &Mollifier::Delta)
        .unwrap();
    let mut sum = OffsetTable::zeros(0);
    for p in build_all_pieces(&k, &d).unwrap() {
        sum = sum.add(p.table(), 1.0);
    }
    assert_eq!(op.apply(&f).unwrap().values(), convolve(&sum, &f).unwrap().values());
}

#[test]
fn hardy_littlewood_family() {
    let d = dom(32);
    let lats = domain_lattices(&d);
    let c = GridFunction::constant(d, -1.5);
    assert!(hl_maximal(&c, &lats, 1.0).unwrap().values().iter().all(|v| (v - 1.5).abs() < 1e-12));
    let f = random_compact(d, 11);
    let m1 = hl_maximal(&f, &lats, 1.0).unwrap();
    let m2 = hl_maximal(&f, &lats, 2.0).unwrap();
    let m3 = hl_maximal(&f, &lats, 3.5).unwrap();
    for k in 0..d.len() {
        let v = f.values()[k].abs();
        assert!(m1.values()[k] >= v * (1.0 - 1e-12));
        assert!(m1.values()[k] <= m2.values()[k] * (1.0 + 1e-12));
        assert!(m2.values()[k] <= m3.values()[k] * (1.0 + 1e-12));
    }
}

#[test]
fn rearrangement_conventions() {
    let r = rearrangement(&[(1.0, 0.5), (0.0, 1.0), (1.0, 0.25)]).unwrap();
    assert_eq!(r.eval(0.0), 1.0);
    assert_eq!(r.eval(0.74), 1.0);
    assert_eq!(r.eval(0.75), 0.0);
    assert_eq!(r.eval(5.0), 0.0);
    assert!(rearrangement(&[(1.0, 0.0)]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vals: Vec<f64> = (0..37).map(|_| rng.random_range(-3.0..3.0)).collect();
    let items: Vec<(f64, f64)> = vals.iter().map(|&v| (v, 1.0)).collect();
    let r = rearrangement(&items).unwrap();
    for alpha in [0.0, 0.5, 1.0, 2.9, 4.0] {
        let direct = vals.iter().filter(|v| v.abs() > alpha).count() as f64;
        assert_eq!(r.superlevel(alpha), direct);
    }
    let mut sorted: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    for lambda in [0.1f64, 0.25, 0.5, 0.9] {
        let k = ((1.0 - lambda) * 37.0).ceil() as usize;
        assert_eq!(r.eval(lambda * 37.0), sorted[k - 1]);
        assert_eq!(super::local::rearranged_at(&sorted, lambda), sorted[k - 1]);
    }
}

#[test]
fn grand_and_sharp_maximal() {
    let d = dom(32);
    let lats = domain_lattices(&d);
    let k = RoughKernel::preset("cos", 512).unwrap();
    let f = bump(d, [0.05, 0.1], 0.12);
    for kind in [OperatorKind::Singular, OperatorKind::Lacunary] {
        let op = OperatorHandle::new(kind, &k, &d).unwrap();
        let lm = local_maximals(&f, &op, &lats, &[0.125, 0.25, 0.5], &[1.0, 2.0, 4.0, f64::INFINITY])
            .unwrap();
        let lambdas = [0.125f64, 0.25, 0.5];
        for c in 0..d.len() {
            let g: Vec<f64> = lm.grand.iter().map(|m| m.values()[c]).collect();
            let s: Vec<f64> = lm.sharp.iter().map(|m| m.values()[c]).collect();
            assert!(g[0] >= g[1] && g[1] >= g[2]);
            assert!(s[0] <= s[1] * (1.0 + 1e-12) && s[1] <= s[2] * (1.0 + 1e-12));
            assert!(s[2] <= s[3] * (1.0 + 1e-12));
            for (gi, l) in g.iter().zip(lambdas) {
                assert!(*gi <= l.powf(-0.5) * s[1], "{kind}");
            }
        }
        let one = grand_maximal(&f, 0.25, &op, &lats).unwrap();
        assert_eq!(one.values(), lm.grand[1].values());
        let region = CellRect::new(4, 20, 10, 30);
        let on = grand_maximal_on(&f, 0.25, &op, &lats, &region).unwrap();
        let mut k = 0;
        for (i, j) in region.cells() {
            assert_eq!(on[k], one.get(i, j));
            k += 1;
        }
    }
}

#[test]
fn exterior_response_matches_direct_removal() {
    let d = dom(16);
    let k = RoughKernel::preset("sign4", 512).unwrap();
    let f = random_compact(d, 21);
    let op = OperatorHandle::new(OperatorKind::Singular, &k, &d).unwrap();
    let lats = domain_lattices(&d);
    // brute-force sup over cubes of the rearranged |T(f χ_{(3R)^c})|
    let mut want = vec![0.0f64; d.len()];
    for lat in &lats {
        for level in lat.levels() {
            for (c, rect) in lat.cubes_in_domain(&d, level) {
                let cube = lat.to_cube(&c);
                let three = cube.dilate(3.0).cell_rect(&d);
                let g = f.remove(&three);
                let tg = singular_integral(&g, &k).unwrap();
                let mut v: Vec<f64> = rect.cells().map(|(i, j)| tg.get(i, j).abs()).collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                let kth = n - (0.5 * n as f64).floor() as usize;
                let val = v[kth.max(1) - 1];
                for (i, j) in rect.cells() {
                    let slot = &mut want[d.index(i, j)];
                    *slot = slot.max(val);
                }
            }
        }
    }
    let got = grand_maximal(&f, 0.5, &op, &lats).unwrap();
    let scale = got.max_abs();
    assert!(max_abs_diff(got.values(), &want) <= 1e-12 * scale);
}

#[test]
fn grand_maximal_vanishes_when_dilates_cover_support() {
    let d = dom(32);
    let lats = domain_lattices(&d);
    let k = RoughKernel::preset("cos", 512).unwrap();
    let op = OperatorHandle::new(OperatorKind::Singular, &k, &d).unwrap();
    // a single-cell spike: any cube within one cell of it has 3R ⊇ supp f
    let mut f = GridFunction::zeros(d);
    f.set(16, 16, 1.0);
    let m = grand_maximal(&f, 0.5, &op, &lats).unwrap();
    assert!(m.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    let zero = GridFunction::zeros(d);
    assert!(grand_maximal(&zero, 0.5, &op, &lats).unwrap().is_zero());
    assert!(grand_maximal(&f, 1.0, &op, &lats).is_err());
}

#[test]
fn commutator_against_double_loop() {
    let d = dom(64);
    let h = d.cell_size();
    let k = RoughKernel::preset("cos", 512).unwrap();
    let grid = TruncationGrid::geometric(&d);
    let f = bump(d, [0.1, 0.0], 0.1);
    let x0 = [0.2, -0.1];
    let b = GridFunction::from_fn(d, |x, y| ((x - x0[0]).hypot(y - x0[1]) + h / 2.0).ln());
    let got = commutator_maximal(&f, &b, &k, &grid).unwrap();

    let n = d.resolution() as i64;
    let eps = grid.epsilons();
    let support: Vec<(i64, i64, f64)> = (0..n)
        .flat_map(|a| (0..n).map(move |c| (a, c)))
        .filter_map(|(a, c)| {
            let v = f.get(a as usize, c as usize);
            (v != 0.0).then_some((a, c, v))
        })
        .collect();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let bx = b.get(x as usize, y as usize);
            let mut bins = vec![0.0; eps.len()];
            for &(a, c, v) in &support {
                let (di, dj) = (x - a, y - c);
                if di == 0 && dj == 0 {
                    continue;
                }
                let r = h * ((di * di + dj * dj) as f64).sqrt();
                let kv = k.at_angle((dj as f64).atan2(di as f64)) / (r * r);
                let bin = eps.iter().rposition(|e| r >= e * (1.0 - 1e-12)).unwrap();
                bins[bin] += kv * (bx - b.get(a as usize, c as usize)) * v * h * h;
            }
            let mut acc = 0.0f64;
            let mut best = 0.0f64;
            for v in bins.iter().rev() {
                acc += v;
                best = best.max(acc.abs());
            }
            worst = worst.max((best - got.get(x as usize, y as usize)).abs());
        }
    }
    assert!(worst <= 1e-10 * got.max_abs(), "{worst}");

    let constant = GridFunction::constant(d, 3.0);
    let zero = commutator_maximal(&f, &constant, &k, &grid).unwrap();
    assert!(zero.max_abs() <= 1e-12 * got.max_abs());
    let doubled = commutator_maximal(&f.scale(2.0), &b, &k, &grid).unwrap();
    assert_eq!(doubled.values(), got.scale(2.0).values());
}

#[test]
fn bmo_of_constant_is_zero() {
    let d = dom(16);
    let lats = domain_lattices(&d);
    assert_eq!(bmo_seminorm(&GridFunction::constant(d, 2.0), &lats), 0.0);
    let b = GridFunction::from_fn(d, |x, _| x.signum());
    assert!(bmo_seminorm(&b, &lats) > 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_and_sublinear(seed_f in 0u64..1000, seed_g in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let d = dom(16);
        let k = RoughKernel::preset("sign4", 512).unwrap();
        let f = random_compact(d, seed_f);
        let g = random_compact(d, seed_g);
        let fg = f.lin_comb(a, &g, b).unwrap();
        for kind in [OperatorKind::Singular, OperatorKind::Mollified(1)] {
            let op = OperatorHandle::new(kind, &k, &d).unwrap();
            let lhs = op.apply(&fg).unwrap();
            let rhs = op.apply(&f).unwrap().lin_comb(a, &op.apply(&g).unwrap(), b).unwrap();
            prop_assert!(max_abs_diff(lhs.values(), rhs.values()) <= 1e-10 * lhs.max_abs().max(1.0));
        }
        let sum = f.lin_comb(1.0, &g, 1.0).unwrap();
        for kind in [OperatorKind::MaximalTruncation, OperatorKind::Lacunary, OperatorKind::DifferenceSup(1)] {
            let op = OperatorHandle::new(kind, &k, &d).unwrap();
            let (s, tf, tg) = (op.apply(&sum).unwrap(), op.apply(&f).unwrap(), op.apply(&g).unwrap());
            for c in 0..d.len() {
                prop_assert!(s.values()[c] >= 0.0);
                prop_assert!(s.values()[c] <= tf.values()[c] + tg.values()[c] + 1e-9);
            }
        }
    }
}
