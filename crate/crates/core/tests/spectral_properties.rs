use hierstab_core::conditions::check_dissipativity;
use hierstab_core::equilibrium::{equilibrium_at, solve_equilibrium};
use hierstab_core::linearization::{linearize, LinearizedCoefficients};
use hierstab_core::spectral::{
    classify_special, count_roots, dominant_root, find_roots, k_prime, k_value, Determinant, Rect, Verdict,
};
use hierstab_core::ModelSpec;
use num_complex::Complex64;
use proptest::prelude::*;

fn coefficients(beta: &str, n: usize) -> LinearizedCoefficients {
    let model = ModelSpec::from_sources(1.0, 0.5, n, "1", beta, "1 - s/2", "1").unwrap();
    let eq = solve_equilibrium(&model, [0.5, 2.0])
        .unwrap()
        .into_iter()
        .find(|e| !e.is_trivial())
        .unwrap();
    linearize(&model, &eq).unwrap()
}

fn declining(n: usize) -> LinearizedCoefficients {
    coefficients("(480/997)*(1+s)*(3-2*Q)", n)
}

fn dissipative(n: usize) -> LinearizedCoefficients {
    coefficients("(160/159)*(1+s)*(2-2*Q)", n)
}

/// Growth and mortality depend on the environment, so the coupling coefficient is nonzero.
fn coupled(n: usize) -> LinearizedCoefficients {
    let model = ModelSpec::from_sources(
        1.0, 0.4, n, "1 + s/2", "(1+s)*exp(-Q)", "(1 - s/4)/(1 + Q/2)", "0.5 + Q*Q/4",
    )
    .unwrap();
    let eq = equilibrium_at(&model, 0.9).unwrap();
    linearize(&model, &eq).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinant_is_conjugate_symmetric(re in -6.0f64..3.0, im in -15.0f64..15.0) {
        let z = Complex64::new(re, im);
        for c in [declining(256), coupled(256)] {
            let det = Determinant::new(&c);
            let a = det.eval(z).unwrap();
            let b = det.eval(z.conj()).unwrap();
            prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn root_counts_add_over_partitions(f1 in 0.2f64..0.8, f2 in 0.2f64..0.8) {
        let c = coupled(256);
        let whole = Rect::new(-4.0, 1.0, -12.0, 12.0).unwrap();
        let x = -4.0 + 5.0 * f1;
        let y = -12.0 + 24.0 * f2;
        let a = Rect::new(-4.0, x, -12.0, 12.0).unwrap();
        let b1 = Rect::new(x, 1.0, -12.0, y).unwrap();
        let b2 = Rect::new(x, 1.0, y, 12.0).unwrap();
        let n = count_roots(&c, &whole).unwrap();
        let parts = count_roots(&c, &a).unwrap() + count_roots(&c, &b1).unwrap() + count_roots(&c, &b2).unwrap();
        prop_assert_eq!(n, parts);
    }
}

/// Every sign change of `K - 1` on a fine scan of `[lo, hi]`, refined by bisection.
fn real_roots_of_k(c: &LinearizedCoefficients, lo: f64, hi: f64) -> Vec<f64> {
    let g = |x: f64| k_value(c, x).unwrap() - 1.0;
    let steps = 2000;
    let dx = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    for i in 0..steps {
        let (mut a, mut b) = (lo + dx * i as f64, lo + dx * (i + 1) as f64);
        let (mut ga, gb) = (g(a), g(b));
        if ga * gb > 0.0 {
            continue;
        }
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            let gm = g(mid);
            if ga * gm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                ga = gm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

#[test]
fn determinant_and_characteristic_function_share_real_roots() {
    for c in [declining(2048), dissipative(2048)] {
        let strip = Rect::new(-5.0, 5.0, -0.5, 0.5).unwrap();
        let report = find_roots(&c, &strip, 16).unwrap();
        assert!(!report.incomplete);
        let mut real: Vec<f64> = report.roots.iter().filter(|r| r.im.abs() < 1e-8).map(|r| r.re).collect();
        real.sort_by(f64::total_cmp);
        let from_k = real_roots_of_k(&c, -5.0, 5.0);
        assert_eq!(real.len(), from_k.len(), "{real:?} vs {from_k:?}");
        for (a, b) in real.iter().zip(&from_k) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
        let top = dominant_root(&c, [-5.0, 5.0]).unwrap().unwrap();
        assert!((top - from_k.last().unwrap()).abs() <= 1e-6);
    }
}

#[test]
fn k_is_monotone_when_the_positivity_kernel_is_nonnegative() {
    let c = declining(1024);
    assert!(c.positivity_kernel().iter().all(|&b| b >= 0.0));
    for i in 0..=40 {
        assert!(k_prime(&c, -5.0 + 0.25 * i as f64).unwrap() < 0.0);
    }
}

#[test]
fn dominant_root_is_grid_converged() {
    let coarse = dominant_root(&declining(1024), [-5.0, 5.0]).unwrap().unwrap();
    let fine = dominant_root(&declining(2048), [-5.0, 5.0]).unwrap().unwrap();
    assert!((coarse - fine).abs() <= 1e-7, "{coarse} vs {fine}");
    assert!((fine - (-1.0597232203)).abs() <= 1e-6);
}

#[test]
fn stable_branch_has_decreasing_k_below_one() {
    let c = declining(2048);
    assert_eq!(classify_special(&c).unwrap().verdict, Verdict::Stable);
    let k0 = k_value(&c, 0.0).unwrap();
    assert!(k0 < 1.0);
    let mut prev = k0;
    for i in 1..=200 {
        let k = k_value(&c, 0.25 * i as f64).unwrap();
        assert!(k <= prev);
        prev = k;
    }
}

#[test]
fn dissipativity_bounds_the_spectrum() {
    let c = dissipative(2048);
    let d = check_dissipativity(&c).unwrap();
    assert!(d.holds);
    let rect = Rect::new(-5.0, 1.0, -10.0, 10.0).unwrap();
    let report = find_roots(&c, &rect, 32).unwrap();
    let bound = report.spectral_bound_estimate.unwrap();
    assert!(bound <= -d.margin + 0.05, "{bound} vs kappa {}", d.margin);
}

#[test]
fn coupled_model_roots_come_in_conjugate_pairs() {
    let c = coupled(512);
    let rect = Rect::new(-4.0, 1.0, -12.0, 12.0).unwrap();
    let report = find_roots(&c, &rect, 32).unwrap();
    assert!(!report.incomplete);
    for r in &report.roots {
        assert!(r.residual <= 1e-8 * report.scale.max(1.0));
        assert!(report
            .roots
            .iter()
            .any(|o| (o.re - r.re).abs() < 1e-7 && (o.im + r.im).abs() < 1e-7));
    }
}

#[test]
fn complex_pair_matches_closed_form_oracle() {
    // zeros of 1 - K(lambda) from arbitrary-precision quadrature of the
    // closed-form integrand; the argument principle gives 3 in this rectangle
    let oracle = [(-1.0597232203066584, 0.0), (-2.1807024845009789, 5.4301616938471250)];
    let c = declining(2048);
    let rect = Rect::new(-3.0, 1.0, -10.0, 10.0).unwrap();
    assert_eq!(count_roots(&c, &rect).unwrap(), 3);
    let report = find_roots(&c, &rect, 8).unwrap();
    for (re, im) in oracle {
        for im in [im, -im] {
            assert!(
                report.roots.iter().any(|r| (r.re - re).abs() < 1e-6 && (r.im - im).abs() < 1e-6),
                "{re}{im:+}i missing from {:?}",
                report.roots
            );
        }
    }
}
