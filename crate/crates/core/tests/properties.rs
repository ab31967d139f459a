use morrey_lab::conditions::{condition_value, hardy_transform, supremal_transform, ConditionInput, Flavor, RadialProfile};
use morrey_lab::grid::{build_domain, sample_function, GridFunction, Point, TestFunctionSpec};
use morrey_lab::operators::{frac_integral, frac_maximal, OperatorRequest};
use morrey_lab::plan::{LogLadder, SamplingPlan};
use morrey_lab::spaces::{lp_norm, morrey_norm, weak_lp_quasinorm, weak_morrey_norm, PhiSpec};
use morrey_lab::weights::{ExponentConfig, WeightSpec, WeightVector};
use proptest::prelude::*;

fn bump(c: f64, s: f64, n: usize) -> GridFunction {
    let dom = build_domain(1, 2.0, n).unwrap();
    sample_function(
        &TestFunctionSpec::Gaussian {
            center: Point::x(c),
            scale: s,
        },
        &dom,
    )
    .unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_multilinear_homogeneous(
        c1 in 0.1f64..10.0, c2 in 0.1f64..10.0,
        x1 in -1.0f64..1.0, x2 in -1.0f64..1.0,
        alpha in 0.2f64..1.8,
    ) {
        let f = bump(x1, 0.3, 64);
        let g = bump(x2, 0.5, 64);
        let base = OperatorRequest::new(vec![f.clone(), g.clone()], alpha).unwrap();
        let scaled = OperatorRequest::new(vec![f.scale(c1), g.scale(-c2)], alpha).unwrap();
        let (m0, m1) = (frac_maximal(&base).unwrap().values, frac_maximal(&scaled).unwrap().values);
        let (i0, i1) = (frac_integral(&base).unwrap().values, frac_integral(&scaled).unwrap().values);
        for k in 0..m0.len() {
            prop_assert!(close(m1[k], c1 * c2 * m0[k], 1e-12));
            prop_assert!(close(i1[k], -c1 * c2 * i0[k], 1e-12));
        }
    }

    #[test]
    fn hardy_is_linear_and_monotone(
        a in 0.0f64..5.0, b in 0.0f64..5.0,
        s1 in -1.0f64..1.0, s2 in -1.0f64..1.0,
        j in 0usize..30, k in 0u32..3,
    ) {
        let ladder = LogLadder::octaves(0.03125, 10, 4).unwrap();
        let nodes = ladder.nodes();
        let g1: Vec<f64> = nodes.iter().map(|t| t.powf(s1)).collect();
        let g2: Vec<f64> = nodes.iter().map(|t| (1.0 + t).powf(s2)).collect();
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let tab = |v: Vec<f64>| RadialProfile::Tabulated { ladder, values: v };
        let w = RadialProfile::power(-0.5);
        // quadrature nodes on the table nodes, where interpolation is exact
        let t_max = ladder.end();
        let r = nodes[j];
        let h1 = hardy_transform(&tab(g1.clone()), &w, r, k, t_max, 4).unwrap();
        let h2 = hardy_transform(&tab(g2.clone()), &w, r, k, t_max, 4).unwrap();
        let hm = hardy_transform(&tab(mix), &w, r, k, t_max, 4).unwrap();
        prop_assert!(close(hm, a * h1 + b * h2, 1e-10));
        let bigger: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x + y).collect();
        let hb = hardy_transform(&tab(bigger.clone()), &w, r, k, t_max, 4).unwrap();
        prop_assert!(hb >= h1);
        let s_small = supremal_transform(&tab(g1), &w, r, t_max, 8).unwrap();
        let s_big = supremal_transform(&tab(bigger), &w, r, t_max, 8).unwrap();
        prop_assert!(s_big >= s_small);
    }

    #[test]
    fn condition_scales_with_constant_factors_in_phi(
        eps in -0.2f64..0.0, c1 in 0.1f64..10.0, c2 in 0.1f64..10.0, c3 in 0.1f64..10.0,
        b_flavor in any::<bool>(),
    ) {
        let dom = build_domain(1, 4.0, 64).unwrap();
        let plan = SamplingPlan::centered(1, 0.25, 2.0, 2).unwrap().with_outer(4.0, 8.0);
        let cfg = ExponentConfig::from_alphas(1, vec![2.0, 2.0], vec![0.25, 0.25]).unwrap();
        let phi1: Vec<PhiSpec> = cfg.p().iter().map(|p| PhiSpec::power(-1.0 / p - eps)).collect();
        let phi2 = PhiSpec::power(-1.0 / cfg.q_total() - 2.0 * eps);
        let scale = |c: f64, phi: &PhiSpec| PhiSpec::product(PhiSpec::Power { beta: 0.0, scale: c }, phi.clone());
        let flavor = if b_flavor { Flavor::B } else { Flavor::A };
        let base = ConditionInput::new(phi1.clone(), phi2.clone(), WeightVector::unit(2), cfg.clone(), plan.clone(), dom)
            .with_flavor(flavor, 1);
        let scaled = ConditionInput::new(
            vec![scale(c1, &phi1[0]), scale(c2, &phi1[1])],
            scale(c3, &phi2),
            WeightVector::unit(2),
            cfg,
            plan,
            dom,
        )
        .with_flavor(flavor, 1);
        let a = condition_value(&base).unwrap().value;
        let b = condition_value(&scaled).unwrap().value;
        prop_assert!(close(b, a * c1 * c2 / c3, 1e-12), "{} vs {}", a, b);
        let matched = ConditionInput { phi2: scale(c1 * c2, &phi2), ..scaled };
        prop_assert!(close(condition_value(&matched).unwrap().value, a, 1e-12));
    }

    #[test]
    fn weak_norms_never_exceed_strong(
        c in -1.5f64..1.5, s in 0.05f64..1.0, amp in 0.01f64..100.0,
        p in 1.0f64..5.0, a in -0.5f64..0.5, beta in 0.0f64..0.5,
    ) {
        let f = bump(c, s, 128).scale(amp);
        let dom = *f.domain();
        let omega = WeightSpec::power(Point::x(0.0), a);
        let plan = SamplingPlan::default_for(&dom, 2).unwrap();
        for b in plan.balls() {
            prop_assert!(weak_lp_quasinorm(&f, p, &omega, &b).unwrap() <= lp_norm(&f, p, &omega, &b).unwrap());
        }
        let phi = PhiSpec::power(-beta);
        prop_assert!(
            weak_morrey_norm(&f, p, &phi, &omega, &plan).unwrap().value
                <= morrey_norm(&f, p, &phi, &omega, &plan).unwrap().value
        );
    }

    #[test]
    fn indicator_norms_agree(c in -1.0f64..1.0, r in 0.05f64..1.0, p in 1.0f64..4.0) {
        let dom = build_domain(1, 2.0, 128).unwrap();
        let f = sample_function(&TestFunctionSpec::BallIndicator { center: Point::x(c), radius: r }, &dom).unwrap();
        let plan = SamplingPlan::default_for(&dom, 2).unwrap();
        let phi = PhiSpec::power(-1.0 / p);
        let w = weak_morrey_norm(&f, p, &phi, &WeightSpec::unit(), &plan).unwrap().value;
        let s = morrey_norm(&f, p, &phi, &WeightSpec::unit(), &plan).unwrap().value;
        prop_assert_eq!(w, s);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let f = bump(0.2, 0.4, 256);
    let g = bump(-0.3, 0.2, 256);
    let req = OperatorRequest::new(vec![f.clone(), g], 0.8).unwrap();
    let plan = SamplingPlan::default_for(f.domain(), 4).unwrap();
    let run = |k: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap().install(|| {
            (
                frac_maximal(&req).unwrap(),
                frac_integral(&req).unwrap(),
                morrey_norm(&f, 2.0, &PhiSpec::power(-0.25), &WeightSpec::unit(), &plan).unwrap(),
            )
        })
    };
    assert_eq!(run(1), run(5));
}
