use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqchsh::povm::{
    effect, effect_sqrt, luders_nonselective, luders_selective, outcome_probability,
    pointer_model_update, pointer_outcome_probability, quality_of, UnsharpMeasurement,
};
use seqchsh::qops::{
    dir_op, expectation, hermitian_sqrt, kron, singlet, BlochDirection, DensityMatrix4, Operator2,
    Outcome, Wing,
};
use seqchsh::scenario::{chsh_all, closed_form_chsh, default_config, TSIRELSON};

fn direction() -> impl Strategy<Value = BlochDirection> {
    (0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU).prop_map(|(t, p)| {
        BlochDirection::normalized(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()).unwrap()
    })
}

fn state() -> impl Strategy<Value = DensityMatrix4> {
    any::<u64>().prop_map(|s| DensityMatrix4::random(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn wing() -> impl Strategy<Value = Wing> {
    prop_oneof![Just(Wing::Alice), Just(Wing::Bob)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn singlet_correlation_is_minus_dot(a in direction(), b in direction()) {
        let e = expectation(&singlet(), &kron(&dir_op(&a), &dir_op(&b))).unwrap();
        prop_assert!((e + a.dot(&b)).abs() <= 1e-12);
    }

    #[test]
    fn sqrt_squares_back(a0 in 0.0f64..2.0, r in 0.0f64..1.0, n in direction()) {
        let op = Operator2::from_pauli_components(a0, n.components().map(|c| c * r * a0));
        let root = hermitian_sqrt(&op).unwrap();
        prop_assert!((root * root).max_abs_diff(&op) <= 1e-12);
        prop_assert!(root.is_psd(1e-12));
    }

    #[test]
    fn effects_are_complete_and_roots_match(n in direction(), lambda in 0.0f64..=1.0) {
        let m = UnsharpMeasurement::new(n, lambda).unwrap();
        let sum = effect(&m, Outcome::Plus) + effect(&m, Outcome::Minus);
        prop_assert!(sum.max_abs_diff(&Operator2::identity()) <= 1e-12);
        for o in Outcome::BOTH {
            let r = effect_sqrt(&m, o);
            prop_assert!((r * r).max_abs_diff(&effect(&m, o)) <= 1e-12);
            prop_assert!(effect(&m, o).is_psd(1e-12));
        }
    }

    #[test]
    fn selective_branches_decompose_nonselective(
        rho in state(), n in direction(), lambda in 0.0f64..1.0, w in wing()
    ) {
        let m = UnsharpMeasurement::new(n, lambda).unwrap();
        let mut mix = nalgebra::Matrix4::zeros();
        let mut total = 0.0;
        for o in Outcome::BOTH {
            let (p, post) = luders_selective(&rho, w, &m, o).unwrap();
            total += p;
            mix += post.matrix() * nalgebra::Complex::new(p, 0.0);
        }
        let avg = luders_nonselective(&rho, w, &m);
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!((mix - avg.matrix()).iter().all(|z| z.norm() <= 1e-12));
    }

    #[test]
    fn pointer_model_reproduces_luders(
        rho in state(), n in direction(), lambda in 0.0f64..=1.0, w in wing()
    ) {
        let m = UnsharpMeasurement::new(n, lambda).unwrap();
        let pq = quality_of(lambda).unwrap();
        prop_assert!(pointer_model_update(&rho, w, &n, &pq)
            .max_abs_diff(&luders_nonselective(&rho, w, &m)) <= 1e-12);
        let born = outcome_probability(&rho, w, &m);
        let pointer = pointer_outcome_probability(&rho, w, &n, &pq);
        prop_assert!((born.p_plus - pointer.p_plus).abs() <= 1e-12);
        prop_assert!((born.p_plus + born.p_minus - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn nonselective_update_keeps_the_other_wing(rho in state(), n in direction(), lambda in 0.0f64..=1.0) {
        let m = UnsharpMeasurement::new(n, lambda).unwrap();
        let after = luders_nonselective(&rho, Wing::Bob, &m);
        prop_assert!(after.reduced(Wing::Alice).max_abs_diff(&rho.reduced(Wing::Alice)) <= 1e-12);
    }

    #[test]
    fn chain_respects_tsirelson_and_closed_form(lambdas in proptest::collection::vec(0.01f64..=1.0, 1..5)) {
        let cfg = default_config(&lambdas).unwrap();
        for r in chsh_all(&cfg).unwrap() {
            prop_assert!(r.chsh_value <= TSIRELSON + 1e-12);
            let c = closed_form_chsh(&lambdas, r.bob_index).unwrap();
            prop_assert!((r.chsh_value - c).abs() <= 1e-10);
        }
    }
}
