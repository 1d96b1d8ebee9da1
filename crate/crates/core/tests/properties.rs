use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use cclab::counterexamples::{pairing_verdict, Case2, Verdict, VerdictCriteria};
use cclab::decompose::helmholtz;
use cclab::extension::poisson_extend_trig;
use cclab::field::{fft, ifft, GridField, TrigPoly};
use cclab::fit::power_fit;
use cclab::norms::{lebesgue_norm, luxemburg_norm, YoungFunction};
use cclab::quasiaffine::Integrand;
use cclab::rng::keyed_rng;
use cclab::symbol::divcurl2;
use cclab::truncate::{data_sup, lipschitz_truncate, random_spikes};

fn grid8(values: Vec<f64>) -> GridField {
    GridField::new(vec![8, 8], vec![1.0, 1.0], 1, values).unwrap()
}

fn values64() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lebesgue_norm_is_homogeneous(v in values64(), c in -5.0f64..5.0, p in 1.0f64..6.0) {
        let f = grid8(v);
        let a = lebesgue_norm(&f.scale(c), p).unwrap();
        let b = c.abs() * lebesgue_norm(&f, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn lebesgue_norm_obeys_triangle_inequality(u in values64(), v in values64(), p in 1.0f64..6.0) {
        let (f, g) = (grid8(u), grid8(v));
        let lhs = lebesgue_norm(&f.add(&g).unwrap(), p).unwrap();
        let rhs = lebesgue_norm(&f, p).unwrap() + lebesgue_norm(&g, p).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn luxemburg_norm_of_power_is_lebesgue(v in values64(), p in 1.0f64..4.0) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let f = grid8(v);
        let a = luxemburg_norm(&f, &YoungFunction::power(p), 1e-12).unwrap();
        let b = lebesgue_norm(&f, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
    }

    #[test]
    fn fft_round_trip_is_identity(v in values64()) {
        let f = grid8(v);
        let g = ifft(&fft(&f));
        prop_assert!(g.sub(&f).unwrap().max_abs() <= 1e-12 * (1.0 + f.max_abs()));
    }

    #[test]
    fn det2_gradient_matches_cofactors(v in prop::array::uniform4(-3.0f64..3.0)) {
        let d = Integrand::Det2;
        prop_assert!((d.eval(&v) - (v[0] * v[3] - v[1] * v[2])).abs() < 1e-12);
        let g = d.gradient(&v);
        let want = [v[3], -v[2], -v[1], v[0]];
        for (a, b) in g.iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn power_fit_recovers_exact_exponent(e in -3.0f64..3.0, c in 0.01f64..100.0) {
        let xs: Vec<f64> = (0..6).map(|i| 2f64.powi(i + 2)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(e)).collect();
        let fit = power_fit(&xs, &ys).unwrap();
        prop_assert!((fit.exponent - e).abs() < 1e-10);
        prop_assert!((fit.log_prefactor - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn sequences_settled_at_their_limit_converge(limit in -5.0f64..5.0, jitter in 0.0f64..1e-3, len in 4usize..10) {
        let vals: Vec<f64> = (0..len).map(|i| limit + jitter / (i + 1) as f64).collect();
        let v = pairing_verdict(&vals, limit, 1.0, &VerdictCriteria::default());
        prop_assert_eq!(v.verdict, Verdict::Converges);
    }

    #[test]
    fn geometric_growth_fails(start in 0.1f64..5.0, ratio in 1.2f64..3.0, len in 4usize..10) {
        let vals: Vec<f64> = (0..len).map(|i| start * ratio.powi(i as i32)).collect();
        let v = pairing_verdict(&vals, 0.0, 1.0, &VerdictCriteria::default());
        prop_assert!(v.escapes);
        prop_assert_eq!(v.verdict, Verdict::Fails);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn helmholtz_splits_random_fields_exactly(seed in any::<u64>(), band in 1i64..6) {
        let mut rng = keyed_rng(seed, "prop_helmholtz", 0);
        let v = TrigPoly::random_bandlimited(2, 4, band, &mut rng).render(&[32, 32]).unwrap();
        let h = helmholtz(&v, &divcurl2()).unwrap();
        prop_assert!(h.residuals.reconstruction < 1e-12);
        prop_assert!(h.residuals.constraint < 1e-12);
        prop_assert!(h.residuals.orthogonality < 1e-12);
        prop_assert!(h.residuals.idempotence < 1e-12);
    }

    #[test]
    fn poisson_extension_is_a_semigroup(seed in any::<u64>(), s in 0.0f64..0.5, t in 0.0f64..0.5) {
        let mut rng = keyed_rng(seed, "prop_poisson", 0);
        let f = TrigPoly::random_bandlimited(2, 1, 4, &mut rng);
        let a = poisson_extend_trig(&poisson_extend_trig(&f, s), t);
        let b = poisson_extend_trig(&f, s + t);
        for _ in 0..5 {
            let x = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
            prop_assert!((a.eval(&x)[0] - b.eval(&x)[0]).abs() < 1e-10);
        }
        // Heights only damp: the sup never grows.
        let g0 = f.render(&[16, 16]).unwrap().max_abs();
        let g1 = b.render(&[16, 16]).unwrap().max_abs();
        prop_assert!(g1 <= g0 + 1e-12 || f.len() == 0);
    }

    #[test]
    fn keyed_streams_are_reproducible_and_separated(seed in any::<u64>(), idx in 0u64..1000) {
        let a: [u64; 4] = keyed_rng(seed, "x", idx).random();
        let b: [u64; 4] = keyed_rng(seed, "x", idx).random();
        let c: [u64; 4] = keyed_rng(seed, "x", idx + 1).random();
        let d: [u64; 4] = keyed_rng(seed, "y", idx).random();
        prop_assert_eq!(a, b);
        prop_assert_ne!(a, c);
        prop_assert_ne!(a, d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn truncation_keeps_good_set_and_chain(seed in any::<u64>(), frac in 0.01f64..0.3) {
        let v = random_spikes(seed, 0, 2).unwrap();
        let r = lipschitz_truncate(&v, frac * data_sup(&v, 1).unwrap(), 1, 1.0).unwrap();
        prop_assert_eq!(r.good_set_max_diff, 0.0);
        prop_assert!(r.chain_inclusion);
        prop_assert!(r.measured_deriv_bound.is_finite());
        let bad = r.bad_set.iter().filter(|b| **b).count();
        prop_assert!(bad > 0 && bad < r.bad_set.len());
    }
}

#[test]
fn case2_torus_pairing_matches_closed_form() {
    let c = Case2::default();
    for k in [2usize, 3, 5, 8, 13, 21, 34] {
        let got = c.torus_pairing(k).unwrap();
        let want = c.closed_form(k);
        assert!((got - want).abs() <= 1e-9 * want.abs(), "k={k}: {got} vs {want}");
    }
    let other = Case2 {
        n: 3,
        alpha: 0.3,
        beta: 0.2,
        p: 4.0,
        beta1: None,
    };
    other.validate().unwrap();
    for k in [2usize, 4, 8] {
        let got = other.torus_pairing(k).unwrap();
        let want = other.closed_form(k);
        assert!((got - want).abs() <= 1e-9 * want.abs(), "n=3 k={k}: {got} vs {want}");
    }
}

#[test]
fn case2_rejects_parameters_outside_its_range() {
    assert!(Case2 { p: 1.5, ..Case2::default() }.validate().is_err());
    assert!(Case2 { beta: 0.9, ..Case2::default() }.validate().is_err());
    assert!(Case2 { beta1: Some(0.1), ..Case2::default() }.validate().is_err());
}

#[test]
fn random_generators_are_seed_deterministic() {
    let a = random_spikes(3, 1, 1).unwrap();
    let b = random_spikes(3, 1, 1).unwrap();
    assert_eq!(a.values, b.values);
    let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let p = TrigPoly::random_bandlimited(2, 2, 3, &mut r1);
    let q = TrigPoly::random_bandlimited(2, 2, 3, &mut r2);
    assert_eq!(p.terms, q.terms);
    assert!(p.hermitian_defect() < 1e-14);
}
