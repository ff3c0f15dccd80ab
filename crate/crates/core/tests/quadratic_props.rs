use lazylab::quadratic::{build_problem, convergence_time, linear_mode, nonlinear_mode, random_problem, Regime};
use lazylab::Matrix;
use proptest::prelude::*;

fn between(v: f64, a: f64, b: f64, tol: f64) -> bool {
    v >= a.min(b) - tol && v <= a.max(b) + tol
}

proptest! {
    #[test]
    fn modes_move_monotonically_from_init_to_target(
        theta0 in 1e-4f64..2.0,
        theta_star in 1e-3f64..5.0,
        mu in 0.1f64..5.0,
        c in 0.5f64..2.0,
        mut times in prop::collection::vec(0.0f64..50.0, 2..20),
    ) {
        times.sort_by(f64::total_cmp);
        // θ⁰ − (θ⁰ − θ*) cancels when θ* ≪ θ⁰
        let tol = 1e-14 * theta0.max(theta_star) * (1.0 + theta0 / theta_star);
        for regime in [Regime::Nonlinear, Regime::Linearized] {
            let value = |t: f64| match regime {
                Regime::Nonlinear => nonlinear_mode(theta0, theta_star, mu, t).0,
                Regime::Linearized => linear_mode(theta0, theta_star, mu, c, t).0,
            };
            prop_assert!((value(0.0) - theta0).abs() <= tol);
            let vals: Vec<f64> = times.iter().map(|&t| value(t)).collect();
            for &v in &vals {
                prop_assert!(between(v, theta0, theta_star, tol), "{v} outside [{theta0}, {theta_star}]");
            }
            for w in vals.windows(2) {
                let step = (w[1] - w[0]) * (theta_star - theta0).signum();
                prop_assert!(step >= -tol, "{regime:?} moved backwards: {w:?}");
            }
        }
    }

    #[test]
    fn label_components_are_nonnegative(n in 1usize..8, d in 1usize..8, seed in any::<u64>()) {
        let p = random_problem(n, d, seed, 0.05).unwrap();
        for &y in p.y_mode() {
            prop_assert!(y >= 0.0);
        }
    }

    #[test]
    fn flipping_an_example_leaves_the_mode_picture_unchanged(
        n in 2usize..7,
        d in 1usize..7,
        seed in any::<u64>(),
        flip in 0usize..7,
    ) {
        // negating (x_i, y_i) together is a relabelling of the same regression
        let p = random_problem(n, d, seed, 0.05).unwrap();
        let i = flip % n;
        let mut rows: Vec<Vec<f64>> = p.inputs().iter_rows().map(|r| r.to_vec()).collect();
        let mut y = p.labels().to_vec();
        rows[i].iter_mut().for_each(|v| *v = -*v);
        y[i] = -y[i];
        let q = build_problem(&Matrix::from_rows(&rows).unwrap(), &y, p.w0()).unwrap();
        for (a, b) in p.mu().iter().zip(q.mu()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
        for (a, b) in p.y_mode().iter().zip(q.y_mode()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        let ta = p.to_ambient(p.theta_star());
        let tb = q.to_ambient(q.theta_star());
        for (a, b) in ta.iter().zip(&tb) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn tighter_tolerances_take_longer(seed in 0u64..500, e in 1e-6f64..1e-3) {
        let p = random_problem(4, 3, seed, 0.05).unwrap();
        let mode = (0..p.rank()).max_by(|&a, &b| p.y_mode()[a].total_cmp(&p.y_mode()[b])).unwrap();
        let gap = (p.theta_star()[mode] - p.theta0()[mode]).abs();
        prop_assume!(p.theta_star()[mode] != 0.0 && 2.0 * e < gap);
        for regime in [Regime::Nonlinear, Regime::Linearized] {
            let loose = convergence_time(&p, mode, 2.0 * e, regime).unwrap();
            let tight = convergence_time(&p, mode, e, regime).unwrap();
            prop_assert!(tight > loose, "{regime:?}: {tight} vs {loose}");
        }
    }
}
