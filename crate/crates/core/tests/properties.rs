use proptest::prelude::*;

use uclt_core::entropy::{covering_profile, greedy_upper, packing_lower, CoverEstimator, FiniteMetricSpace};
use uclt_core::psi::{log_space, tail_bound, GridConfig, PsiFunction};
use uclt_core::ustat::{u_stat, KernelFamily, KernelSpec, Link, UStatMode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn u_stat_ignores_data_order(mut data in prop::collection::vec(-3.0f64..3.0, 5..10), rot in 0usize..10) {
        let k = KernelSpec::parametric(
            KernelFamily::ParametricSum { degree: 3, link: Link::Tanh },
            vec![0.3, 1.7],
        ).unwrap();
        let a = u_stat(&k, &data, UStatMode::Exact).unwrap();
        let r = rot % data.len();
        data.rotate_left(r);
        data.reverse();
        let b = u_stat(&k, &data, UStatMode::Exact).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_bound_is_nonincreasing(m in 0.5f64..4.0, r in 0.0f64..2.0, g in 0.1f64..5.0) {
        let psi = PsiFunction::power_log(m, r).unwrap();
        let cfg = GridConfig::default();
        let ys = log_space(0.1 * g, 100.0 * g, 40);
        let b: Vec<f64> = ys.iter().map(|&y| tail_bound(&psi, g, y, &cfg)).collect();
        prop_assert!(b.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        prop_assert!(b.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn covering_profile_is_monotone(pts in prop::collection::vec(0.0f64..1.0, 2..30)) {
        let space = FiniteMetricSpace::from_line(&pts, 1.0).unwrap();
        let eps = log_space(0.005, 1.0, 25);
        let prof = covering_profile(&space, &eps, CoverEstimator::Greedy);
        prop_assert!(prof.windows(2).all(|w| w[1] <= w[0]));
        for &e in &eps {
            prop_assert!(packing_lower(&space, e) <= greedy_upper(&space, e));
        }
    }
}
