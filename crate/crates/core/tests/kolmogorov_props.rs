use levyflow::kolmogorov::{
    resolvent_mc, stable_density_1d, DensityGrid, ResolventSetup, ScalarFn,
};
use levyflow::{DriftSpec, LevyModel};

#[test]
fn densities_are_symmetric() {
    for (alpha, t) in [(0.8, 0.3), (1.5, 1.0), (2.0, 0.5)] {
        let d = stable_density_1d(alpha, 1.0, t, DensityGrid::default_for(alpha, 1.0, t)).unwrap();
        let n = d.grid.n_points;
        // x_j = −W + j·dx, so x_{n−j} = −x_j
        for j in 1..n / 2 {
            assert!((d.density[j] - d.density[n - j]).abs() < 1e-10);
            assert!((d.derivative[j] + d.derivative[n - j]).abs() < 1e-10);
        }
    }
}

#[test]
fn densities_compose_as_a_semigroup() {
    let grid = DensityGrid::new(20.0, 1 << 14).unwrap();
    let dx = grid.dx();
    let n = grid.n_points;
    for alpha in [1.5, 2.0] {
        let p = stable_density_1d(alpha, 1.0, 0.5, grid).unwrap();
        let q = stable_density_1d(alpha, 1.0, 1.0, grid).unwrap();
        for i in (n / 2 - 1600..=n / 2 + 1600).step_by(200) {
            let conv: f64 = (0..n)
                .map(|j| p.density[j] * shifted(&p.density, i, j, n))
                .sum::<f64>()
                * dx;
            assert!((conv - q.density[i]).abs() < 1e-5, "alpha {alpha} x {}", grid.x(i));
        }
    }
}

/// `p(x_i − x_j)` read off the table, zero outside the window.
fn shifted(density: &[f64], i: usize, j: usize, n: usize) -> f64 {
    // x_i − x_j = −W + (i − j + n/2)·dx
    let k = i as isize - j as isize + (n / 2) as isize;
    if k >= 0 && (k as usize) < n {
        density[k as usize]
    } else {
        0.0
    }
}

#[test]
fn resolvent_is_monotone_in_lambda_and_bounded() {
    let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
    let b = DriftSpec::bump(vec![0.0], 1.0, 0.8).unwrap();
    let f = ScalarFn::DriftComponent { index: 0 };
    let probes = vec![vec![-0.3], vec![0.0], vec![0.4]];
    let mut prev: Option<levyflow::kolmogorov::ResolventEstimate> = None;
    for lambda in [1.0, 2.0, 4.0] {
        let mut s = ResolventSetup::new(lambda, 400, 3);
        s.n_steps = 512;
        let e = resolvent_mc(&b, f, &m, &probes, &s).unwrap();
        for (i, u) in e.u_values.iter().enumerate() {
            assert!(*u >= 0.0);
            assert!(*u <= b.sup_norm / lambda + s.tail_tol);
            if let Some(p) = &prev {
                let se = (p.u_se[i].powi(2) + e.u_se[i].powi(2)).sqrt();
                assert!(*u <= p.u_values[i] + 3.0 * se, "lambda {lambda} probe {i}");
            }
        }
        prev = Some(e);
    }
}

#[test]
fn finite_difference_step_halving_is_stable() {
    let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
    let b = DriftSpec::holder_power(1, 0.6, 1.0).unwrap();
    let f = ScalarFn::DriftComponent { index: 0 };
    let probes = vec![vec![0.0], vec![0.5]];
    let mut s = ResolventSetup::new(4.0, 400, 8);
    s.n_steps = 512;
    let coarse = resolvent_mc(&b, f, &m, &probes, &s).unwrap();
    s.h_fd /= 2.0;
    let fine = resolvent_mc(&b, f, &m, &probes, &s).unwrap();
    for i in 0..probes.len() {
        let gap = (coarse.du_values[i][0] - fine.du_values[i][0]).abs();
        let sigma = coarse.du_se[i][0].max(fine.du_se[i][0]);
        assert!(gap <= (4.0 * sigma).max(1e-3), "probe {i}: {gap} vs {sigma}");
    }
}
