use nahmq::bailey::*;
use nahmq::expr::parse_rhs;
use nahmq::products::{eval_product_sum, theta_triple};
use nahmq::series::{rat, Monomial, QExp, QSeries};
use nahmq::poch_infinite;
use proptest::prelude::*;

const D: i64 = 4;

fn q(e: i64) -> Monomial {
    Monomial::qi(e)
}

fn qf(n: i64, m: i64) -> Monomial {
    Monomial::q(QExp::new(n, m))
}

#[test]
fn builtins_to_n25_order60() {
    for name in ["G1", "G2", "G3", "G1star"] {
        let p = builtin_pair(name, 25, D, 60 * D).unwrap();
        let r = verify_pair(&p, 25, 60 * D).unwrap();
        assert!(r.pass(), "{name}: {:?}", r.first_failure());
        assert_eq!(r.results.len(), 26);
    }
}

#[test]
fn g2_and_g3_beta_shapes() {
    let g2 = builtin_pair("G2", 3, D, 20 * D).unwrap();
    assert_eq!(g2.a, q(1));
    let b3 = nahmq::poch_finite(&q(2), QExp::from_integer(2), 3, D, 20 * D)
        .unwrap()
        .mul_trunc(&nahmq::poch_finite(&qf(3, 2).neg(), QExp::from_integer(1), 3, D, 20 * D).unwrap(), 20 * D);
    assert_eq!(g2.beta[3].mul_trunc(&b3, 20 * D), QSeries::one(D, 20 * D));
    let g3 = builtin_pair("G3", 2, D, 20 * D).unwrap();
    assert_eq!(g3.a, Monomial::one());
    assert_eq!(g3.beta[1].min_exp(), Some(D));
}

#[test]
fn unknown_pair_rejected() {
    assert!(matches!(builtin_pair("G9", 3, D, 10), Err(BaileyError::UnknownPair(_))));
}

#[test]
fn s1_twice_on_unit() {
    let p = BaileyPair::unit(q(1), 15, D, 40 * D).unwrap();
    let p2 = chain(&p, &[TransformStep::S1, TransformStep::S1]).unwrap();
    assert!(verify_pair(&p2, 15, 40 * D).unwrap().pass());
    assert_eq!(p2.alpha[0], QSeries::one(D, 40 * D));
    assert!(p2.alpha[1].is_empty());
}

#[test]
fn empty_chain_is_identity() {
    let p = builtin_pair("G1", 6, D, 20 * D).unwrap();
    assert_eq!(chain(&p, &[]).unwrap(), p);
}

#[test]
fn s3_s5_on_g1star_alpha_exponent() {
    let p = build_chain("G1star |> S3 |> S5", 10, D, 120 * D).unwrap();
    for n in 0..=10usize {
        let want = djk_shape_alpha(&qf(7, 2), n, D, 120 * D).unwrap();
        assert!(p.alpha[n].equal_up_to(&want, 120 * D).unwrap().is_equal(), "n={n}");
    }
    assert!(verify_pair(&p, 10, 40 * D).unwrap().pass());
}

#[test]
fn djk_limit_g1star_is_g3_n20() {
    let p = build_chain("G1star |> DJKLIM(q^(3/2))", 20, D, 60 * D).unwrap();
    let g3 = builtin_pair("G3", 20, D, 60 * D).unwrap();
    assert_eq!(p.a, g3.a);
    assert_eq!(p.alpha, g3.alpha);
    assert_eq!(p.beta, g3.beta);
}

#[test]
fn djk_limit_rejects_wrong_shape() {
    let p = builtin_pair("G2", 5, D, 20 * D).unwrap();
    let e = apply_transform(&p, &TransformStep::DjkLimit(qf(3, 2))).unwrap_err();
    assert!(matches!(e, BaileyError::Shape(_)));
}

#[test]
fn djk_finite_b_is_pair_relative_to_a_over_q() {
    let p = builtin_pair("G1star", 12, D, 40 * D).unwrap();
    for b in [q(2), qf(1, 2).neg(), q(-1).neg()] {
        let out = apply_transform(&p, &TransformStep::Djk(b.clone())).unwrap();
        assert_eq!(out.a, Monomial::one());
        let r = verify_pair(&out, 12, 40 * D).unwrap();
        assert!(r.pass(), "b={b}: {:?}", r.first_failure());
    }
}

#[test]
fn djk_needs_positive_a() {
    let p = builtin_pair("G1", 4, D, 20 * D).unwrap();
    assert!(apply_transform(&p, &TransformStep::Djk(q(2))).is_err());
}

#[test]
fn s5_rejects_odd_root() {
    let p = BaileyPair::unit(qf(1, 4), 4, D, 20 * D).unwrap();
    assert!(apply_transform(&p, &TransformStep::S5).is_err());
}

#[test]
fn general_lemma_examples() {
    let u = BaileyPair::unit(q(1), 6, D, 30 * D).unwrap();
    let (_, _, c) = general_bailey_check(&u, &q(1), &q(1), 3, 30 * D).unwrap();
    assert!(c.is_equal());
    let g1 = builtin_pair("G1", 6, D, 80 * D).unwrap();
    let (_, _, c) = general_bailey_check(&g1, &q(2), &q(3), 5, 40 * D).unwrap();
    assert!(c.is_equal());
    let (l, r, c) = general_bailey_check(&g1, &q(2), &q(3), 0, 40 * D).unwrap();
    assert!(c.is_equal());
    assert_eq!(l, QSeries::one(D, 40 * D));
    assert_eq!(r, QSeries::one(D, 40 * D));
}

fn poch(a: &Monomial, n: usize, order: i64) -> QSeries {
    nahmq::poch_finite(a, QExp::from_integer(1), n as i64, D, order).unwrap()
}

#[test]
fn large_rho2_approaches_rho1_limit() {
    // beta' with rho2 = 1/x written as a polynomial in x = q^big
    let order = 30 * D;
    let big = 20;
    let p = builtin_pair("G1", 8, D, order).unwrap();
    let r1 = qf(1, 2).neg();
    let lim = apply_transform(&p, &TransformStep::Rho1(r1.clone())).unwrap();
    let aq = p.a.shift(QExp::from_integer(1));
    let b1 = aq.div(&r1);
    let x = q(big);
    for n in 0..=6usize {
        let mut acc = QSeries::zero(D, order);
        for r in 0..=n {
            let mut t = poch(&r1, r, order).mul_monomial(&b1.pow(r as i64)).unwrap().truncate(order);
            for j in 0..r as i64 {
                let f = QSeries::from_terms(D, order, [(big * D, rat(1)), (j * D, rat(-1))]);
                t = t.mul_trunc(&f, order);
            }
            let c = poch(&b1.mul(&x), n - r, order);
            let iq = poch(&q(1), n - r, order).invert_unit(order).unwrap();
            t = t.mul_trunc(&c, order).mul_trunc(&iq, order).mul_trunc(&p.beta[r], order);
            acc = &acc + &t;
        }
        let den = poch(&b1, n, order).mul_trunc(&poch(&aq.mul(&x), n, order), order);
        let g = acc.mul_trunc(&den.invert_unit(order).unwrap(), order);
        let cut = big * D - 1;
        assert!(g.equal_up_to(&lim.beta[n], cut).unwrap().is_equal(), "n={n}");
        if n > 0 {
            assert!(!g.equal_up_to(&lim.beta[n], order).unwrap().is_equal(), "n={n}");
        }
    }
}

#[test]
fn limit_identity_unit_and_order_zero() {
    let p = BaileyPair::unit(Monomial::one(), 12, D, 40 * D).unwrap();
    let (l, r) = limit_identity(&p, 40 * D).unwrap();
    assert!(l.equal_up_to(&r, 40 * D).unwrap().is_equal());
    let (l, r) = limit_identity(&p, 0).unwrap();
    assert_eq!(l, QSeries::one(D, 0));
    assert_eq!(r, QSeries::one(D, 0));
}

#[test]
fn limit_identity_needs_enough_terms() {
    let p = builtin_pair("G1", 3, D, 40 * D).unwrap();
    assert!(limit_identity(&p, 40 * D).is_err());
}

#[test]
fn s3_g1_in_base_q2_gives_nine_modulus() {
    let order = 30 * D;
    let p = build_chain("G1 |> S3", limit_n_max(order, D), D, order).unwrap();
    let (_, r) = limit_identity(&p, order).unwrap();
    let r2 = r.substitute_power(QExp::from_integer(2)).unwrap();
    let rhs = eval_product_sum(&parse_rhs("TP(4,5,9;9) / P(2;2)").unwrap(), D, 2 * order).unwrap();
    let c = r2.equal_up_to(&rhs, 2 * order).unwrap();
    assert!(c.is_equal(), "{c:?}");
}

#[test]
fn thm11_chain_k2_i2() {
    let order = 30 * D;
    let p = build_chain(&thm11_chain(2, 2), limit_n_max(order, D), D, order).unwrap();
    assert_eq!(p.a, Monomial::one());
    let (l, r) = limit_identity(&p, order).unwrap();
    let th = theta_triple(QExp::from_integer(2), QExp::new(11, 2), D, order).unwrap();
    let inv = poch_infinite(&q(1), QExp::from_integer(1), D, order).unwrap().invert_unit(order).unwrap();
    let want = th.mul_trunc(&inv, order);
    assert!(l.equal_up_to(&r, order).unwrap().is_equal());
    assert!(r.equal_up_to(&want, order).unwrap().is_equal());
}

#[test]
fn g1star_lemma_k_to_25() {
    for k in 0..=25 {
        let (l, r) = g1star_lemma(k, D, 60 * D).unwrap();
        assert!(l.equal_up_to(&r, 60 * D).unwrap().is_equal(), "k={k}");
    }
}

#[test]
fn chain_parser_round_trip() {
    let (name, steps) = parse_chain("G2 |> S5 |> GEN(-1, q^(1/2)) |> RHO1(-q^(1/2)) |> DJK(q^2)").unwrap();
    assert_eq!(name, "G2");
    let shown: Vec<String> = steps.iter().map(|s| s.to_string()).collect();
    assert_eq!(shown, ["S5", "GEN(-1, q^(1/2))", "RHO1(-q^(1/2))", "DJK(q^2)"]);
    assert!(parse_chain("").is_err());
    assert!(parse_chain("G1 |> GEN(q)").is_err());
}

fn step_strategy() -> impl Strategy<Value = TransformStep> {
    let rho = prop_oneof![
        Just(Monomial::one().neg()),
        Just(qf(1, 2)),
        Just(qf(1, 2).neg()),
        Just(qf(1, 4).neg()),
        Just(q(1).neg()),
    ];
    prop_oneof![
        Just(TransformStep::S1),
        Just(TransformStep::S3),
        Just(TransformStep::S5),
        (rho.clone(), rho.clone()).prop_map(|(a, b)| TransformStep::General(a, b)),
        rho.prop_map(TransformStep::Rho1),
        prop_oneof![Just(q(2)), Just(qf(1, 2).neg()), Just(q(1).neg())].prop_map(TransformStep::Djk),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn random_chains_stay_pairs(
        seed in prop_oneof![Just("G1"), Just("G2"), Just("G3"), Just("G1star")],
        steps in proptest::collection::vec(step_strategy(), 0..=3),
    ) {
        let order = 40 * D;
        let mut p = builtin_pair(seed, 15, D, order).unwrap();
        for s in &steps {
            match apply_transform(&p, s) {
                Ok(next) => p = next,
                Err(BaileyError::Incompatible { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        let r = verify_pair(&p, 15, order).unwrap();
        prop_assert!(r.pass(), "{}: {:?}", p.name, r.first_failure());
    }
}
