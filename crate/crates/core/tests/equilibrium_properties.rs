use hierstab_core::equilibrium::{net_reproduction, solve_equilibrium, survival};
use hierstab_core::expr::parse;
use hierstab_core::{Grid, GridFunction, ModelSpec, Quadrature};
use proptest::prelude::*;

const DECLINING_BETA: &str = "(480/997)*(1+s)*(3-2*Q)";

fn declining(n: usize) -> ModelSpec {
    ModelSpec::from_sources(1.0, 0.5, n, "1", DECLINING_BETA, "1 - s/2", "1").unwrap()
}

fn samples(grid: Grid, coeffs: &[f64]) -> GridFunction {
    GridFunction::from_fn(grid, |s| {
        coeffs.iter().enumerate().map(|(k, c)| c * (s * (k as f64 + 1.0)).sin()).sum::<f64>() + coeffs[0].abs() + 2.0
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn environment_is_linear(
        a in -3.0f64..3.0, b in -3.0f64..3.0, alpha in 0.0f64..=1.0,
        c1 in proptest::collection::vec(-1.0f64..1.0, 4), c2 in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        let grid = Grid::new(2.0, 128).unwrap();
        let w = GridFunction::from_fn(grid, |s| 1.0 + 0.5 * s).unwrap();
        let (u1, u2) = (samples(grid, &c1), samples(grid, &c2));
        let mix = u1.zip_with(&u2, |x, y| a * x + b * y).unwrap();
        for rule in [Quadrature::Trapezoid, Quadrature::EndCorrected] {
            let q1 = rule.environment(&u1, alpha, &w).unwrap();
            let q2 = rule.environment(&u2, alpha, &w).unwrap();
            let qm = rule.environment(&mix, alpha, &w).unwrap();
            for i in 0..grid.len() {
                let lin = a * q1.values()[i] + b * q2.values()[i];
                prop_assert!((qm.values()[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
            }
        }
    }

    #[test]
    fn environment_decreases_for_nonnegative_density(
        alpha in 0.0f64..1.0, c in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        let grid = Grid::new(1.0, 256).unwrap();
        let w = GridFunction::constant(grid, 1.0).unwrap();
        let u = samples(grid, &c);
        let q = Quadrature::Trapezoid.environment(&u, alpha, &w).unwrap();
        for pair in q.values().windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        let total = Quadrature::Trapezoid.integral(&u);
        prop_assert!((q.values()[0] - total).abs() <= 1e-13 * total);
        prop_assert!((q.values()[grid.n()] - alpha * total).abs() <= 1e-13 * total);
    }

    #[test]
    fn survival_is_monotone_in_mortality(bump in 0.0f64..2.0, q in 0.0f64..1.0) {
        let base = declining(256);
        let harsher = ModelSpec::from_sources(
            1.0, 0.5, 256, "1", DECLINING_BETA, "1 - s/2", &format!("1 + {bump}*s*s"),
        ).unwrap();
        let q = GridFunction::constant(base.grid(), q).unwrap();
        let p0 = survival(&base, &q).unwrap();
        let p1 = survival(&harsher, &q).unwrap();
        for (a, b) in p0.values().iter().zip(p1.values()) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn reproduction_scales_with_fertility(k in 0.1f64..5.0, q in 0.0f64..1.0) {
        let base = declining(256);
        let scaled = base.with_beta(parse(&format!("{k}*({DECLINING_BETA})")).unwrap()).unwrap();
        let q = GridFunction::constant(base.grid(), q).unwrap();
        let r0 = net_reproduction(&base, &q).unwrap();
        let r1 = net_reproduction(&scaled, &q).unwrap();
        prop_assert!((r1 - k * r0).abs() <= 1e-12 * r1.abs().max(1.0));
    }
}

fn smooth_error(rule: Quadrature, n: usize) -> f64 {
    let grid = Grid::new(1.0, n).unwrap();
    let f = GridFunction::from_fn(grid, |s| (2.0 * s).exp() * (3.0 * s).cos()).unwrap();
    let exact = {
        // int_0^1 e^{2s} cos 3s ds
        let e2 = 2f64.exp();
        (e2 * (2.0 * 3f64.cos() + 3.0 * 3f64.sin()) - 2.0) / 13.0
    };
    (rule.integral(&f) - exact).abs()
}

#[test]
fn trapezoid_error_quarters_when_h_halves() {
    for n in [32, 64, 128, 256] {
        let ratio = smooth_error(Quadrature::Trapezoid, n) / smooth_error(Quadrature::Trapezoid, 2 * n);
        assert!((3.5..=4.5).contains(&ratio), "n = {n}: ratio {ratio}");
    }
}

#[test]
fn end_correction_is_fourth_order() {
    for n in [128, 256] {
        let ratio = smooth_error(Quadrature::EndCorrected, n) / smooth_error(Quadrature::EndCorrected, 2 * n);
        assert!((12.0..=20.0).contains(&ratio), "n = {n}: ratio {ratio}");
    }
}

#[test]
fn converged_equilibrium_is_self_consistent() {
    let model = declining(1024);
    let eqs = solve_equilibrium(&model, [0.5, 2.0]).unwrap();
    let eq = eqs.iter().find(|e| !e.is_trivial()).unwrap();
    let w = GridFunction::constant(model.grid(), 1.0).unwrap();
    let q = model.quadrature.environment(&eq.u_star, model.alpha(), &w).unwrap();
    assert!(q.max_diff(&eq.q_star).unwrap() <= 1e-9);
    let pi = survival(&model, &eq.q_star).unwrap();
    let shaped = pi.map(|p| eq.b * p).unwrap();
    assert!(shaped.max_diff(&eq.u_star).unwrap() <= 1e-9);
}

#[test]
fn trapezoid_birth_level_converges_at_second_order() {
    // exact stationary solution has u*(0) = 1
    let err = |n: usize| {
        let model = declining(n).with_quadrature(Quadrature::Trapezoid);
        let eqs = solve_equilibrium(&model, [0.5, 2.0]).unwrap();
        (eqs.iter().find(|e| !e.is_trivial()).unwrap().b - 1.0).abs()
    };
    let (e1, e2) = (err(64), err(128));
    let ratio = e1 / e2;
    assert!((3.0..=5.0).contains(&ratio), "{e1} / {e2} = {ratio}");
}
