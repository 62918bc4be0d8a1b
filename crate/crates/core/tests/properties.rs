use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robustrisk::bounds::{lower_bound_rvar, upper_bound_rvar, Direction};
use robustrisk::oracle::{
    discretize_all, exhaustive_extreme_grids, ra_inf_rvar, ra_sup_rvar, random_coupling, RaConfig, SampleFunctional,
};
use robustrisk::sharing::{
    allocation_sequence, distortion_value, evaluate_allocation_exact, inf_convolution_exact, optimal_allocation,
    stop_loss_exact, Allocation, AllocationMeta, DistortionParams, Rational, SharingProblem,
};
use robustrisk::simplex::{project, SearchConfig, SimplexConstraint};
use robustrisk::{avg_quantile, rvar, Distribution, IntervalSet};

fn family() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-2.0..2.0f64, 0.1..3.0f64).prop_map(|(a, w)| Distribution::uniform(a, a + w).unwrap()),
        (0.2..4.0f64).prop_map(|l| Distribution::exponential(l).unwrap()),
        (2.1..6.0f64).prop_map(|a| Distribution::pareto(a, 1.0).unwrap()),
        (-1.0..1.0f64, 0.2..2.0f64).prop_map(|(m, s)| Distribution::normal(m, s).unwrap()),
        (-0.5..0.5f64, 0.1..0.8f64).prop_map(|(m, s)| Distribution::lognormal(m, s).unwrap()),
        (0.3..4.0f64).prop_map(|k| Distribution::power_law(k).unwrap()),
        proptest::collection::vec(-5.0..5.0f64, 1..12).prop_map(|v| Distribution::empirical(v).unwrap()),
    ]
}

fn window() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.9f64, 0.05..1.0f64).prop_map(|(r, frac)| (r, ((1.0 - r) * frac).max(1e-3)))
}

fn quick() -> SearchConfig {
    SearchConfig { lhs_samples: 500, ..SearchConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantiles_are_ordered(d in family(), a in 0.001..0.999f64, b in 0.001..0.999f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.quantile_left(lo).unwrap() <= d.quantile_left(hi).unwrap());
        prop_assert!(d.quantile_left(lo).unwrap() <= d.quantile_right(lo).unwrap());
    }

    #[test]
    fn negation_reflects_windows(d in family(), (r, s) in window()) {
        let a = rvar(&d, r, s).unwrap();
        let b = rvar(&d.negate(), (1.0 - r - s).max(0.0), s).unwrap();
        prop_assert!((a + b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        prop_assert_eq!(d.negate().negate(), d);
    }

    #[test]
    fn union_average_is_weighted(d in family(), a in 0.0..0.4f64, b in 0.5..0.9f64) {
        let set = IntervalSet::new(&[(0.0, a.max(0.01)), (b, 1.0)]).unwrap();
        let whole = avg_quantile(&d, &set).unwrap();
        let l1 = a.max(0.01);
        let l2 = 1.0 - b;
        let parts = (l1 * rvar(&d, 0.0, l1).unwrap() + l2 * rvar(&d, b, l2).unwrap()) / (l1 + l2);
        prop_assert!((whole - parts).abs() <= 1e-8 * (1.0 + whole.abs()));
    }

    #[test]
    fn rvar_between_quantiles(d in family(), (r, s) in window()) {
        let v = rvar(&d, r, s).unwrap();
        if r > 0.0 && r + s < 1.0 {
            prop_assert!(v >= d.quantile_left(r).unwrap() - 1e-9);
            prop_assert!(v <= d.quantile_right(r + s).unwrap() + 1e-9);
        }
    }

    #[test]
    fn tail_transform_matches_window(d in family(), r in 0.05..0.9f64, f in 0.1..1.0f64) {
        let up = d.tail_upper(r).unwrap();
        let a = rvar(&up, 0.0, f).unwrap();
        let b = rvar(&d, r, (1.0 - r) * f).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
    }

    #[test]
    fn projection_is_feasible(raw in proptest::collection::vec(-3.0..3.0f64, 3..6), scale in 0.1..1.0f64, lo in 0.0..0.5f64) {
        let n = raw.len() - 1;
        let c = SimplexConstraint::new(n, scale, lo * scale, false).unwrap();
        let p = project(&raw, &c).unwrap();
        prop_assert!(p.satisfies(&c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bounds_sandwich_random_couplings(a in family(), b in family(), (r, s) in window(), seed in any::<u64>()) {
        let ms = vec![a, b];
        let ub = upper_bound_rvar(&ms, r, s, &quick()).unwrap().value;
        let lb = lower_bound_rvar(&ms, r, s, &quick()).unwrap().value;
        prop_assert!(lb <= ub + 1e-9);
        let grids = discretize_all(&ms, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = SampleFunctional::Rvar { r, s };
        // midpoint discretisation costs O(1/m) at the edges of the window
        let slack = 0.05 * (1.0 + ub.abs().max(lb.abs()));
        for _ in 0..50 {
            let c = random_coupling(&grids, &mut rng);
            prop_assert!(c.preserves_marginals(&grids));
            let v = c.evaluate(&f);
            prop_assert!(v <= ub + slack && v >= lb - slack, "{v} not in [{lb}, {ub}]");
        }
    }

    #[test]
    fn ra_within_exhaustive(a in family(), b in family(), k in 0usize..5) {
        let m = 5;
        let ms = vec![a, b];
        let grids = discretize_all(&ms, m).unwrap();
        let r = k as f64 / m as f64;
        let s = (1.0 - r).min(0.4);
        let f = SampleFunctional::Rvar { r, s };
        let (ex_sup, _) = exhaustive_extreme_grids(&grids, &f, Direction::Sup).unwrap();
        let (ex_inf, _) = exhaustive_extreme_grids(&grids, &f, Direction::Inf).unwrap();
        let cfg = RaConfig { m, ..RaConfig::default() };
        let (sup, c) = ra_sup_rvar(&ms, r, s, &cfg).unwrap();
        let (inf, _) = ra_inf_rvar(&ms, r, s, &cfg).unwrap();
        prop_assert!(c.preserves_marginals(&grids));
        prop_assert!(sup <= ex_sup + 1e-12 && inf >= ex_inf - 1e-12);
    }

    #[test]
    fn distortion_routes_agree(d in family(), lambda in 0.0..1.0f64, beta in 0.05..0.95f64, frac in 0.05..0.95f64) {
        let p = DistortionParams::new(lambda, beta * frac, beta).unwrap();
        let v = distortion_value(&d, &p).unwrap();
        prop_assert!((v.identity - v.direct).abs() <= 1e-10 * (1.0 + v.identity.abs()), "{v:?}");
    }
}

fn sharing_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..4, 1usize..4).prop_flat_map(|(n, unit)| {
        let m = 10 * unit;
        (
            proptest::collection::vec((-20i32..20).prop_map(|x| x as f64 / 4.0), m),
            proptest::collection::vec(1usize..=unit * 2, n),
        )
            .prop_map(move |(x, ks)| {
                let betas = ks.iter().map(|&k| k as f64 / m as f64).collect();
                (x, betas)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_allocations_dominate((x, betas) in sharing_case(), seed in any::<u64>()) {
        let p = SharingProblem::new(x, &betas).unwrap();
        let inf = inf_convolution_exact(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        for _ in 0..20 {
            let mut parts: Vec<Vec<Rational>> = Vec::new();
            let mut rest: Vec<Rational> = p.total().iter().map(|&v| Rational::from_float(v).unwrap()).collect();
            for _ in 1..p.n() {
                let part: Vec<Rational> = (0..p.m())
                    .map(|_| Rational::new(rng.random_range(-40i64..40).into(), 4.into()))
                    .collect();
                for (r, v) in rest.iter_mut().zip(&part) {
                    *r -= v;
                }
                parts.push(part);
            }
            parts.push(rest);
            let a = Allocation::from_exact_parts(&p, parts, AllocationMeta::Custom).unwrap();
            prop_assert!(evaluate_allocation_exact(&p, &a).unwrap() >= inf);
        }
    }

    #[test]
    fn optimal_allocation_is_exact_and_t_invariant((x, betas) in sharing_case(), dt in 0u32..50) {
        let p = SharingProblem::new(x, &betas).unwrap();
        let inf = inf_convolution_exact(&p);
        let t0 = p.total().iter().cloned().fold(0.0, f64::max);
        for t in [t0, t0 + dt as f64 + 0.5] {
            let a = optimal_allocation(&p, Some(t)).unwrap();
            prop_assert_eq!(evaluate_allocation_exact(&p, &a).unwrap(), inf.clone());
        }
    }

    #[test]
    fn sequence_follows_stop_loss_law((x, betas) in sharing_case(), steps in proptest::collection::vec(0.0..3.0f64, 3)) {
        let p = SharingProblem::new(x, &betas).unwrap();
        let start = robustrisk::sharing::sequence_threshold(&p);
        let mut mu = start;
        let mut last: Option<Rational> = None;
        for st in steps {
            mu += st;
            let s = allocation_sequence(&p, mu).unwrap();
            let beta = Rational::new(
                (p.betas().iter().map(|b| (b * p.m() as f64).round() as i64).sum::<i64>()).into(),
                (p.m() as i64).into(),
            );
            prop_assert_eq!(&s.exposure - inf_convolution_exact(&p), stop_loss_exact(&p, &s.a_m) / beta);
            if let Some(prev) = &last {
                prop_assert!(s.exposure <= *prev);
            }
            last = Some(s.exposure);
        }
    }
}
