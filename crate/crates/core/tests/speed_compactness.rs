use nldisp_core::compactness::{
    make_ensemble_on, proxy_from_distances, verify_linear_ingredients, EnsembleSpec,
};
use nldisp_core::speed::{homogeneous_rate, periodic_principal_eigenvalue};
use nldisp_core::{
    diameter_proxy, dispersion_rate, linear_speed, make_kernel, Cap, Extension, Grid,
    IngredientOptions, Kernel, Model, Profile, Reaction, Window,
};
use proptest::prelude::*;

fn gaussian(h: f64) -> Kernel {
    make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, h).unwrap()
}

fn homogeneous(d: f64, r: f64) -> Model {
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    Model::new(
        gaussian(0.05),
        d,
        Reaction::logistic(r).unwrap(),
        Cap::Constant(r),
        grid,
        Extension::Constant,
    )
    .unwrap()
}

fn periodic(r0: f64, r1: f64) -> Model {
    let grid = Grid::periodic(0.0, 16.0, 320).unwrap();
    let f = Reaction::periodic_kpp(r0, r1, 2.0).unwrap();
    Model::new(
        gaussian(0.05),
        1.0,
        f,
        Cap::Constant(r0 + r1.abs()),
        grid,
        Extension::Periodic,
    )
    .unwrap()
}

#[test]
fn speed_blows_up_near_zero() {
    let m = homogeneous(1.0, 1.0);
    let c_star = linear_speed(&m, 0.2, 3.0, 1e-8).unwrap().c_star;
    assert!(dispersion_rate(&m, 0.01).unwrap().c > 10.0 * c_star);
}

#[test]
fn periodic_rate_is_even_in_mu() {
    let m = periodic(1.0, 0.5);
    for mu in [0.3, 0.8, 1.5] {
        let (p, n) = (
            periodic_principal_eigenvalue(&m, mu).unwrap(),
            periodic_principal_eigenvalue(&m, -mu).unwrap(),
        );
        assert!(
            (p.value - n.value).abs() <= 1e-8,
            "mu {mu}: {} vs {}",
            p.value,
            n.value
        );
    }
}

#[test]
fn principal_eigenvector_is_positive() {
    let m = periodic(1.0, 0.8);
    for mu in [0.2, 1.0, 2.0] {
        let e = periodic_principal_eigenvalue(&m, mu).unwrap();
        assert!(e.vector.iter().all(|v| *v > 0.0));
        assert!((e.vector.iter().fold(0.0f64, |a, v| a.max(*v)) - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn periodic_rate_lies_between_the_extremes_of_the_growth() {
    // lambda is bracketed by the rates of the constant reactions r0 - r1 and r0 + r1
    let m = periodic(1.0, 0.5);
    for mu in [0.5, 1.0] {
        let lam = dispersion_rate(&m, mu).unwrap().lambda;
        let lo = homogeneous_rate(&homogeneous(1.0, 0.5), mu).unwrap();
        let hi = homogeneous_rate(&homogeneous(1.0, 1.5), mu).unwrap();
        assert!(lo < lam && lam < hi, "{lo} < {lam} < {hi}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rate_is_affine_in_dispersal_and_growth(d in 0.2..3.0f64, r in 0.2..3.0f64, mu in 0.1..2.0f64) {
        let base = dispersion_rate(&homogeneous(1.0, 1.0), mu).unwrap().lambda;
        let scaled = dispersion_rate(&homogeneous(d, r), mu).unwrap().lambda;
        let m = gaussian(0.05).exp_moment(mu).unwrap();
        prop_assert!((scaled - (d * (base - 1.0) + r)).abs() <= 1e-12 * (1.0 + scaled.abs()));
        prop_assert!((base - m).abs() <= 1e-12 * m);
    }

    #[test]
    fn periodic_solver_reduces_to_the_homogeneous_rate(r0 in 0.3..2.0f64, mu in 0.1..2.0f64) {
        let p = dispersion_rate(&periodic(r0, 0.0), mu).unwrap().lambda;
        let h = homogeneous_rate(&homogeneous(1.0, r0), mu).unwrap();
        prop_assert!((p - h).abs() <= 1e-8);
    }

    #[test]
    fn minimal_speed_is_below_sampled_speeds(d in 0.3..2.0f64, r in 0.3..2.0f64, mu in 0.2..3.0f64) {
        let m = homogeneous(d, r);
        let s = linear_speed(&m, 0.05, 4.0, 1e-9).unwrap();
        prop_assert!(s.c_star <= dispersion_rate(&m, mu).unwrap().c + 1e-9);
    }
}

fn sup_points(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64], n)
}

fn distances(p: &[[f64; 3]]) -> Vec<f64> {
    let n = p.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (0..3)
                .map(|c| (p[i][c] - p[j][c]).abs())
                .fold(0.0, f64::max);
        }
    }
    d
}

fn optimum(d: &[f64], n: usize, k: usize) -> f64 {
    fn rec(
        i: usize,
        n: usize,
        k: usize,
        d: &[f64],
        labels: &mut Vec<usize>,
        cur: f64,
        best: &mut f64,
    ) {
        if cur >= *best {
            return;
        }
        if i == n {
            *best = cur;
            return;
        }
        let used = labels.iter().max().map_or(0, |m| m + 1);
        for c in 0..(used + 1).min(k) {
            let next = labels
                .iter()
                .enumerate()
                .filter(|(_, l)| **l == c)
                .fold(cur, |m, (j, _)| m.max(d[i * n + j]));
            labels.push(c);
            rec(i + 1, n, k, d, labels, next, best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(0, n, k, d, &mut Vec::new(), 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn proxy_is_monotone_and_a_two_approximation(p in (2usize..=8).prop_flat_map(sup_points)) {
        let n = p.len();
        let d = distances(&p);
        let mut prev = f64::INFINITY;
        for k in 1..=n {
            let v = proxy_from_distances(&d, n, k).unwrap();
            let opt = optimum(&d, n, k);
            prop_assert!(v <= prev);
            prop_assert!(v >= opt - 1e-15);
            prop_assert!(v <= 2.0 * opt + 1e-15);
            prev = v;
        }
        prop_assert_eq!(proxy_from_distances(&d, n, n).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn proxy_grows_with_the_window(seed in 0u64..1000, n in 2usize..7, k in 1usize..4, a in 1.0..4.0f64, b in 4.0..9.0f64) {
        let grid = Grid::with_step(-10.0, 10.0, 0.05).unwrap();
        let spec = EnsembleSpec::RandomFourier { modes: 5, seed };
        let e = make_ensemble_on(&spec, n, grid, Extension::Constant, vec![1.0; grid.len()]).unwrap();
        let k = k.min(n);
        let small = diameter_proxy(&e, &Window::new(-a, a).unwrap(), k).unwrap();
        let large = diameter_proxy(&e, &Window::new(-b, b).unwrap(), k).unwrap();
        // nested windows can only raise every pairwise distance, and the
        // clustering sees the same order of farthest points only up to the
        // factor-two bound
        prop_assert!(small <= 2.0 * large + 1e-15);
        prop_assert!(diameter_proxy(&e, &Window::new(-b, b).unwrap(), 1).unwrap()
            >= diameter_proxy(&e, &Window::new(-a, a).unwrap(), 1).unwrap());
    }
}

fn kernels(h: f64) -> Vec<(&'static str, Kernel)> {
    vec![
        (
            "uniform",
            make_kernel(Profile::Uniform { half_width: 1.0 }, 1e-12, h).unwrap(),
        ),
        ("gaussian", gaussian(h)),
        (
            "laplace",
            make_kernel(Profile::Laplace { rate: 2.0 }, 1e-12, h).unwrap(),
        ),
        (
            "triangle",
            make_kernel(
                Profile::Tabulated {
                    xs: vec![-1.0, 0.0, 1.0],
                    values: vec![0.0, 1.0, 0.0],
                },
                1e-12,
                h,
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn ingredient_matrix_passes() {
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    let window = Window::new(-8.0, 8.0).unwrap();
    let specs = [
        EnsembleSpec::Translates {
            amplitude: 1.0,
            width: 3.0,
            start: -3.0,
            spacing: 2.0,
        },
        EnsembleSpec::RandomFourier { modes: 6, seed: 4 },
    ];
    for (name, k) in kernels(0.05) {
        for spec in &specs {
            let e = make_ensemble_on(spec, 4, grid, Extension::Constant, vec![1.0; grid.len()])
                .unwrap();
            for t in [0.5, 1.0, 2.0] {
                let rep =
                    verify_linear_ingredients(&k, &e, &window, t, &IngredientOptions::default())
                        .unwrap();
                for c in &rep.checks {
                    assert!(
                        c.passed,
                        "{name} / {} / t = {t}: {} slack {}",
                        spec.tag(),
                        c.name,
                        c.worst_slack
                    );
                }
            }
        }
    }
}

#[test]
fn modulus_check_detects_a_quartered_modulus_but_not_a_halved_one() {
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    let window = Window::new(-8.0, 8.0).unwrap();
    let spec = EnsembleSpec::Translates {
        amplitude: 1.0,
        width: 3.0,
        start: -3.0,
        spacing: 2.0,
    };
    let e = make_ensemble_on(&spec, 4, grid, Extension::Constant, vec![1.0; grid.len()]).unwrap();
    for (name, k) in kernels(0.05) {
        let run = |scale: f64| {
            let opts = IngredientOptions {
                modulus_scale: scale,
                ..IngredientOptions::default()
            };
            verify_linear_ingredients(&k, &e, &window, 1.0, &opts)
                .unwrap()
                .checks[1]
                .clone()
        };
        assert!(run(0.5).passed, "{name}: halved modulus should hold");
        let q = run(0.25);
        assert!(
            !q.passed,
            "{name}: quartered modulus should fail, slack {}",
            q.worst_slack
        );
    }
}
