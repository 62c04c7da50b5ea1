use std::sync::Arc;

use proptest::prelude::*;

use levyflow::config::{ExperimentConfig, ExperimentTag};
use levyflow::path_sampler::{sample_path, sample_path_with};
use levyflow::pathwise_solver::solve_frozen;
use levyflow::rng::{CounterRng, StreamTag};
use levyflow::{DriftSpec, LevyModel, LevyPath, SamplerOptions, SolverConfig, TimeGrid};

fn models() -> Vec<LevyModel> {
    vec![
        LevyModel::isotropic_stable(2, 1.3, 0.7).unwrap(),
        LevyModel::isotropic_stable(1, 0.6, 1.0).unwrap(),
        LevyModel::relativistic_stable(2, 1.5, 0.8, 1.0).unwrap(),
        LevyModel::tempered_stable(1, 0.9, 1.0).unwrap(),
        LevyModel::truncated_stable(1, 1.1, 1.0, 3.0).unwrap(),
        LevyModel::brownian(&[0.5, 2.0]).unwrap(),
        LevyModel::compound_poisson(2, 3.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_is_hermitian_with_nonnegative_real_part(
        which in 0usize..7,
        h in prop::collection::vec(-30.0f64..30.0, 2),
    ) {
        let m = &models()[which];
        let h = &h[..m.dim];
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        let a = m.exponent(h).unwrap();
        let b = m.exponent(&neg).unwrap();
        prop_assert!(a.re >= -1e-12 * (1.0 + a.norm()));
        prop_assert!((a - b.conj()).norm() <= 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn stable_exponent_is_homogeneous(
        alpha in 0.2f64..2.0,
        lam in 0.1f64..10.0,
        h in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let m = LevyModel::isotropic_stable(3, alpha, 1.3).unwrap();
        let scaled: Vec<f64> = h.iter().map(|v| v * lam).collect();
        let lhs = m.exponent(&scaled).unwrap().re;
        let rhs = lam.powf(alpha) * m.exponent(&h).unwrap().re;
        prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1e-300));
    }

    #[test]
    fn moment_integral_grows_with_theta(alpha in 0.3f64..1.9, t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let m = LevyModel::isotropic_stable(1, alpha, 1.0).unwrap();
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = m.moment_check(lo * alpha).unwrap();
        let b = m.moment_check(hi * alpha).unwrap();
        prop_assert!(a.finite && b.finite);
        prop_assert!(a.integral_estimate <= b.integral_estimate);
        prop_assert!(!m.moment_check(alpha).unwrap().finite);
    }

    #[test]
    fn archive_round_trip(seed in any::<u64>(), n in 1usize..200, dim in 1usize..4, alpha in 0.5f64..2.0) {
        let m = LevyModel::isotropic_stable(dim, alpha, 1.0).unwrap();
        let grid = Arc::new(TimeGrid::uniform(1.0, n).unwrap());
        let p = sample_path(&m, &grid, seed).unwrap();
        let mut buf = Vec::new();
        p.write_archive(&mut buf).unwrap();
        prop_assert_eq!(&buf[..4], b"LVYP");
        let q = LevyPath::read_archive(&buf[..]).unwrap();
        prop_assert_eq!(q.values(), p.values());
        prop_assert_eq!(q.grid.times(), p.grid.times());
        prop_assert_eq!(q.dim, p.dim);
    }

    #[test]
    fn paths_start_at_zero_and_are_reproducible(seed in any::<u64>(), idx in 0u64..1000) {
        let m = LevyModel::isotropic_stable(2, 1.4, 1.0).unwrap();
        let grid = Arc::new(TimeGrid::uniform(1.0, 32).unwrap());
        let opts = SamplerOptions::default();
        let a = sample_path_with(&m, &grid, seed, idx, &opts).unwrap();
        let b = sample_path_with(&m, &grid, seed, idx, &opts).unwrap();
        prop_assert_eq!(a.node(0), &[0.0, 0.0]);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn counter_stream_is_seekable(seed in any::<u64>(), idx in any::<u64>(), skip in 0u64..500) {
        let mut a = CounterRng::new(seed, idx, StreamTag::Gaussian);
        for _ in 0..skip {
            a.open01();
        }
        let mut b = CounterRng::new(seed, idx, StreamTag::Gaussian);
        b.set_position(a.position());
        prop_assert_eq!(a.open01(), b.open01());
    }

    #[test]
    fn solution_obeys_a_priori_bound(seed in 0u64..10_000, x in -2.0f64..2.0, s in 0.0f64..0.9, beta in 0.3f64..1.0) {
        let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
        let grid = Arc::new(TimeGrid::uniform(1.0, 256).unwrap());
        let p = sample_path(&m, &grid, seed).unwrap();
        let b = DriftSpec::holder_power(1, beta, 1.0).unwrap();
        let c = solve_frozen(&b, &p, s, &[x], &SolverConfig::default()).unwrap();
        prop_assert!(c.residual <= c.tol);
        for (i, t) in grid.times().iter().enumerate() {
            let dev = (c.y(i)[0] - x).abs();
            prop_assert!(dev <= b.sup_norm * (t - s).max(0.0) + 1e-12);
        }
    }

    #[test]
    fn config_toml_round_trip(
        tag in 0usize..10,
        master in any::<u64>(),
        shards in 1usize..5,
        tol in 1e-12f64..1e-4,
        alpha in 0.1f64..2.0,
    ) {
        let mut c = ExperimentConfig::new(ExperimentTag::ALL[tag]);
        c.seeds.master = master;
        c.seeds.shards = shards;
        c.solver.tol = tol;
        c.model = Some(toml::from_str(&format!("family = \"isotropic_stable\"\nalpha = {alpha}\n")).unwrap());
        let c = c.normalized();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.normalized(), c);
    }
}
