mod common;

use common::{dot, gaussian, relative_l2, riesz_constant, riesz_multiplier};
use roughwave::grid::Domain;
use roughwave::kernel::RoughKernel;
use roughwave::operators::singular_integral;

fn kernel() -> RoughKernel {
    RoughKernel::preset("cos", 1024).unwrap()
}

/// Least-squares constant on the reference pair; run with `--ignored` to
/// regenerate the fixture.
#[test]
#[ignore]
fn fit_reference_constant() {
    let d = Domain::new(1.0, 256).unwrap();
    let f = gaussian(d, [0.0, 0.0], 0.06);
    let t = singular_integral(&f, &kernel()).unwrap();
    let r = riesz_multiplier(&f, 4);
    let c = dot(&t, &r) / dot(&r, &r);
    println!("{{\n  \"constant\": {c}\n}}");
}

#[test]
fn coarse_grid_within_ten_percent() {
    let d = Domain::new(1.0, 128).unwrap();
    let c = riesz_constant();
    for (centre, sigma) in [([0.0, 0.0], 0.08), ([0.15, -0.1], 0.1)] {
        let f = gaussian(d, centre, sigma);
        let t = singular_integral(&f, &kernel()).unwrap();
        let err = relative_l2(&t, &riesz_multiplier(&f, 4), c);
        assert!(err <= 0.10, "{centre:?} {sigma}: {err}");
    }
}

