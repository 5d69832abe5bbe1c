use nahmq::catalog::*;
use nahmq::series::{rat, QExp, QSeries};

fn qe(n: i64) -> QExp {
    QExp::from_integer(n)
}

const MANIFEST: &[(&str, usize)] = &[
    ("rr", 2),
    ("example1", 2),
    ("example2", 3),
    ("example3", 5),
    ("example4", 5),
    ("example5", 3),
    ("example6", 2),
    ("example7", 2),
    ("example8", 3),
    ("example9", 5),
    ("example10", 2),
    ("example11", 5),
    ("example12", 4),
    ("example13", 5),
    ("example14", 3),
    ("example15", 4),
    ("example16", 3),
    ("example17", 3),
    ("example18", 3),
    ("example19", 3),
];

const FAMILY_MANIFEST: &[&str] = &[
    "AG", "And1", "And2", "Bressoud", "BressoudSum", "Warnaar", "corgen13", "corgen13last", "exam9gen",
    "exam9genb", "gen1", "gen10", "gen14", "gen15a", "gen15b", "gen17", "gen3", "gen3b", "gen5-8a", "gen5-8b",
    "gen6", "gen7", "thm1.1", "thm1.2",
];

#[test]
fn manifest_is_complete() {
    let c = Catalog::builtin();
    let mut total = 0;
    for (tag, n) in MANIFEST {
        assert_eq!(c.list(Some(tag)).len(), *n, "{}", tag);
        total += n;
    }
    assert_eq!(c.identities.len(), total);
    assert_eq!(c.list(Some("table2")).len(), total - 2);
    assert_eq!(c.list(Some("family")), FAMILY_MANIFEST);
    for f in FAMILY_MANIFEST {
        let any = (1..=5).any(|k| !family_indices(f, k).unwrap().is_empty());
        assert!(any, "{} has no members", f);
    }
}

#[test]
fn list_is_sorted_and_ids_resolve() {
    let c = Catalog::builtin();
    let all = c.list(None);
    let fixed = &all[..c.identities.len()];
    let mut sorted = fixed.to_vec();
    sorted.sort();
    assert_eq!(fixed, &sorted[..]);
    for id in fixed {
        assert_eq!(&c.resolve(id).unwrap().id, id);
    }
    assert_eq!(c.resolve("AG(3,2)").unwrap().id, "AG(3,2)");
    assert_eq!(c.resolve("thm1.2(3)").unwrap().id, "thm1.2(3)");
    assert!(matches!(c.resolve("nosuch"), Err(CatalogError::UnknownId(_))));
    assert!(matches!(c.resolve("nosuch(2,1)"), Err(CatalogError::UnknownFamily(_))));
    assert!(matches!(c.resolve("AG(3,4)"), Err(CatalogError::Domain { .. })));
}

#[test]
fn every_fixed_identity_at_order_30() {
    let c = Catalog::builtin();
    for id in c.identities.keys() {
        let r = c.verify(id, 30, 4).unwrap();
        assert!(r.equal, "{} {:?}", id, r.first_mismatch);
        assert_eq!(r.lhs_digest, r.rhs_digest, "{}", id);
    }
}

#[test]
fn table2_sum_sides_are_nonnegative_integers() {
    let c = Catalog::builtin();
    for id in c.list(Some("table2")) {
        let x = c.get(&id).unwrap();
        let s = x.lhs_series(4, 120).unwrap();
        assert!(s.is_integral() && s.nonnegative(), "{}", id);
    }
}

#[test]
fn rr_report_fields() {
    let c = Catalog::builtin();
    let r = c.verify("R.R.1", 50, 4).unwrap();
    assert!(r.equal && r.first_mismatch.is_none());
    assert_eq!((r.order, r.d), (200, 4));
    assert_eq!(r.lattice_box, [7]);
    assert_eq!(r.lhs_terms, 51);
}

#[test]
fn table2_13_1_against_brute_force() {
    let order = 30;
    let mut want = vec![0i64; order + 1];
    let parts = |step: usize, n: usize| {
        let mut s = vec![0i64; order + 1];
        s[0] = 1;
        for t in 1..=n {
            for x in step * t..=order {
                s[x] += s[x - step * t];
            }
        }
        s
    };
    for i in 0..=6usize {
        for j in 0..=4usize {
            for k in 0..=3usize {
                let e = i * i + 2 * j * j + 4 * k * k + 2 * i * k + 4 * j * k;
                if e > order {
                    continue;
                }
                let (a, b, cc) = (parts(2, i), parts(2, j), parts(4, k));
                for x in 0..=order - e {
                    for y in 0..=order - e - x {
                        if a[x] == 0 || b[y] == 0 {
                            continue;
                        }
                        for z in 0..=order - e - x - y {
                            want[e + x + y + z] += a[x] * b[y] * cc[z];
                        }
                    }
                }
            }
        }
    }
    assert_eq!(&want[..4], &[1, 1, 1, 2]);
    let id = Catalog::builtin().resolve("table2.13.1").unwrap();
    let l = id.lhs_series(1, order as i64).unwrap();
    let r = id.rhs_series(1, order as i64).unwrap();
    for (e, w) in want.iter().enumerate() {
        assert_eq!(l.coefficient(e as i64).unwrap(), rat(*w), "lhs q^{}", e);
        assert_eq!(r.coefficient(e as i64).unwrap(), rat(*w), "rhs q^{}", e);
    }
}

#[test]
fn printed_variants_fail() {
    let c = Catalog::builtin();
    let cases = [
        ("table2.2.1", 14),
        ("table2.2.2", 14),
        ("table2.2.3", 14),
        ("table2.3.2", 2),
        ("table2.3.3", 2),
    ];
    for (id, at) in cases {
        let x = c.get(id).unwrap();
        let alt = x.with_rhs(x.rhs_alt.as_deref().unwrap()).unwrap();
        let r = verify_identity(&alt, 4, 120).unwrap();
        assert!(!r.equal, "{}", id);
        assert_eq!(r.first_mismatch.unwrap().exp, qe(at), "{}", id);
    }
    let with_alt: Vec<&String> = c.identities.values().filter(|x| x.rhs_alt.is_some()).map(|x| &x.id).collect();
    assert_eq!(with_alt.len(), cases.len());
}

#[test]
fn negative_controls() {
    let c = Catalog::builtin();
    let cases = [
        ("table2.13.1", "TP(4,6,11;11) / (P(1;2)*P(4;4))", 4),
        ("R.R.1", "1 / TP(1,5;5)", 4),
        ("R.R.2", "1 / TP(2,4;5)", 3),
        ("table2.3.5", "1 / TP(4,4,5;8)", 3),
        ("table2.14.1", "TP(4,4,7;7) / P(1;1)", 3),
    ];
    for (id, rhs, at) in cases {
        let x = c.get(id).unwrap().with_rhs(rhs).unwrap();
        let r = verify_identity(&x, 4, 120).unwrap();
        let m = r.first_mismatch.expect(id);
        assert!(!r.equal);
        assert_eq!(m.exp, qe(at), "{}", id);
        assert_ne!(m.lhs, m.rhs);
    }
}

#[test]
fn reduction_routes_agree() {
    let c = Catalog::builtin();
    let mut examples: Vec<String> = (1..=10).chain(14..=19).map(|n| format!("example{}", n)).collect();
    examples.extend(["example12".to_string(), "example13".to_string()]);
    for tag in examples {
        for id in c.list(Some(&tag)) {
            let r = c.cross_check_reduction(&id, 30, 4).unwrap();
            assert!(r.pass(), "{:?}", r);
            assert!(!r.routes.is_empty());
        }
    }
    assert!(matches!(c.cross_check_reduction("R.R.1", 30, 4), Err(CatalogError::NoRoute(_))));
}

#[test]
fn automatic_reduction_for_rank_three_examples() {
    let c = Catalog::builtin();
    for n in [3, 6, 9, 10, 14, 17, 18, 19] {
        for id in c.list(Some(&format!("example{}", n))) {
            let r = c.cross_check_reduction(&id, 30, 4).unwrap();
            assert_eq!(r.automatic, Some(None), "{}", id);
        }
    }
}

#[test]
fn example15_swap_symmetry() {
    let c = Catalog::builtin();
    for (a, b) in [("table2.15.1", "table2.15.2"), ("table2.15.3", "table2.15.4")] {
        let x = c.get(a).unwrap().lhs_series(4, 160).unwrap();
        let y = c.get(b).unwrap().lhs_series(4, 160).unwrap();
        assert_eq!(x.dump(), y.dump());
    }
}

fn dump_in_base(name: &str, k: i64, i: i64, subst: i64, order: i64) -> String {
    let f = instantiate_family(name, k, i).unwrap();
    let s = f.lhs_series(4, order * 4 / subst).unwrap();
    s.substitute_power(qe(subst)).unwrap().dump()
}

#[test]
fn corollary_instances_give_example13() {
    let c = Catalog::builtin();
    for (i, id) in [(3, "table2.13.1"), (2, "table2.13.2"), (1, "table2.13.3")] {
        let want = c.get(id).unwrap().lhs_series(4, 160).unwrap().dump();
        assert_eq!(dump_in_base("corgen13", 2, i, 2, 40), want, "{}", id);
    }
    let want = c.get("table2.13.4").unwrap().lhs_series(4, 160).unwrap().dump();
    assert_eq!(dump_in_base("corgen13last", 2, 0, 2, 40), want);
}

#[test]
fn corollary_reversed_pairing_differs() {
    let c = Catalog::builtin();
    for (i, id) in [(3, "table2.13.3"), (1, "table2.13.1")] {
        let want = c.get(id).unwrap().lhs_series(4, 160).unwrap().dump();
        assert_ne!(dump_in_base("corgen13", 2, i, 2, 40), want, "{}", id);
    }
}

#[test]
fn ag2_is_rogers_ramanujan() {
    let c = Catalog::builtin();
    for (i, id) in [(2, "R.R.1"), (1, "R.R.2")] {
        let want = c.get(id).unwrap().lhs_series(4, 240).unwrap().dump();
        assert_eq!(dump_in_base("AG", 2, i, 1, 60), want);
        let f = instantiate_family("AG", 2, i).unwrap();
        assert_eq!(f.rhs_series(4, 240).unwrap().dump(), c.get(id).unwrap().rhs_series(4, 240).unwrap().dump());
    }
    let rr1 = c.get("R.R.1").unwrap().lhs_series(4, 240).unwrap();
    let ag21 = instantiate_family("AG", 2, 1).unwrap().lhs_series(4, 240).unwrap();
    let m = rr1.equal_up_to(&ag21, 240).unwrap();
    assert!(!m.is_equal());
}

#[test]
fn families_reproduce_other_fixed_identities() {
    let c = Catalog::builtin();
    let same = |fam: &str, k: i64, i: i64, subst: i64, id: &str| {
        let want = c.get(id).unwrap().lhs_series(4, 120).unwrap().dump();
        assert_eq!(dump_in_base(fam, k, i, subst, 30), want, "{}({},{}) vs {}", fam, k, i, id);
    };
    same("BressoudSum", 4, 1, 1, "exam11-1");
    for (i, id) in [(4, "exam11-2"), (3, "exam11-3"), (2, "exam11-4"), (1, "exam11-5")] {
        same("Bressoud", 4, i, 1, id);
    }
    same("gen3", 2, 1, 1, "table2.3.5");
    same("gen3b", 2, 2, 1, "table2.3.4");
    same("gen3", 2, 3, 1, "table2.3.1");
    same("exam9gen", 3, 1, 1, "table2.9.8");
    same("exam9genb", 3, 2, 1, "table2.9.6");
    same("exam9gen", 3, 3, 1, "table2.9.2");
    let w = instantiate_family("Warnaar", 4, 3).unwrap();
    let want = c.get("eq-13-sum").unwrap().lhs_series(4, 120).unwrap();
    let route = c.get("eq-13-sum").unwrap().routes[0].clone();
    let via_route = route_series(&route, 4, 120).unwrap();
    assert_eq!(via_route.dump(), want.dump());
    assert_eq!(w.lhs_series(4, 60).unwrap().substitute_power(qe(2)).unwrap().dump(), want.dump());
}

#[test]
fn families_hold_for_k_up_to_4() {
    for f in FAMILY_MANIFEST {
        for k in 1..=4 {
            for i in family_indices(f, k).unwrap() {
                let x = instantiate_family(f, k, i).unwrap();
                let r = verify_identity(&x, 4, 100).unwrap();
                assert!(r.equal, "{} {:?}", x.id, r.first_mismatch);
            }
        }
    }
}

#[test]
fn family_bailey_routes() {
    for f in ["thm1.1", "corgen13", "corgen13last"] {
        for k in 1..=3 {
            for i in family_indices(f, k).unwrap() {
                let x = instantiate_family(f, k, i).unwrap();
                let r = cross_check(&x, 4, 100).unwrap();
                assert!(r.pass(), "{:?}", r);
            }
        }
    }
    assert!(instantiate_family("thm1.2", 2, 0).unwrap().routes.is_empty());
}

#[test]
fn family_domains() {
    assert_eq!(family_indices("AG", 2).unwrap(), [1, 2]);
    assert!(family_indices("AG", 1).unwrap().is_empty());
    assert_eq!(family_indices("thm1.1", 3).unwrap(), [1, 2, 3, 4]);
    assert_eq!(family_indices("thm1.2", 3).unwrap(), [0]);
    assert_eq!(family_indices("BressoudSum", 4).unwrap(), [0, 1, 2, 3]);
    assert_eq!(family_indices("Warnaar", 5).unwrap(), [1, 2, 3, 4, 5]);
    assert_eq!(family_indices("And1", 5).unwrap(), [1, 3, 5]);
    assert!(family_indices("And2", 2).unwrap().is_empty());
    assert!(family_indices("gen3b", 3).unwrap().is_empty());
    for (f, k, i) in [("And2", 4, 2), ("And1", 4, 1), ("thm1.1", 2, 4), ("AG", 1, 1), ("thm1.2", 2, 1)] {
        assert!(matches!(instantiate_family(f, k, i), Err(CatalogError::Domain { .. })), "{}({},{})", f, k, i);
    }
}

#[test]
fn bressoud_2_1_product_side() {
    let x = instantiate_family("Bressoud", 2, 1).unwrap();
    assert_eq!(x.rhs_text, "TP(1,3,4;4) / P(1;1)");
    let y = instantiate_family("BressoudSum", 3, 2).unwrap();
    assert_eq!(y.rhs.len(), 3);
}

#[test]
fn warnaar_exponent_matches_direct_loop() {
    for k in 2..=5i64 {
        for i in 1..=k {
            let x = instantiate_family("Warnaar", k, i).unwrap();
            let q = &x.spec.exponent;
            let pts: Vec<Vec<i64>> = (0..40).map(|s| (0..k).map(|j| (s * 7 + j * 3 + s * j) % 4).collect()).collect();
            for n in pts {
                let big: Vec<i64> = (0..k as usize).map(|j| n[j..].iter().sum()).collect();
                let mut want = QExp::from_integer(0);
                for b in &big {
                    want += QExp::new(b * b, 2);
                }
                let mut j = i;
                while j <= k {
                    want += QExp::from_integer(big[(j - 1) as usize]);
                    j += 2;
                }
                assert_eq!(q.eval(&n), want, "k={} i={} n={:?}", k, i, n);
            }
        }
    }
}

#[test]
fn nahm_families_are_nahm_sums() {
    for (f, k, i) in [("AG", 3, 2), ("Bressoud", 3, 1), ("Warnaar", 3, 2)] {
        assert!(matches!(instantiate_family(f, k, i).unwrap().lhs, Lhs::Nahm(_)), "{}", f);
    }
    assert!(matches!(instantiate_family("thm1.1", 2, 1).unwrap().lhs, Lhs::Multi(_)));
}

#[test]
fn catalog_from_path_and_errors() {
    let dir = std::env::temp_dir().join(format!("nahmq-cat-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("small.cat");
    std::fs::write(
        &p,
        "# two entries\n[identity rr]\ntags = a\nA = [[2]]\nd = [1]\nb = [0]\nvars = n\nexponent = \"n^2\"\ndenoms = [q]\nrhs = \"1 / TP(1,4;5)\"\n\n[identity euler]\nlhs.kind = multisum\nvars = n\nexponent = \"n^2/2+n/2\"\ndenoms = [q]\nrhs = \"P(-q;1)\"\n",
    )
    .unwrap();
    let c = Catalog::from_path(&p).unwrap();
    assert_eq!(c.list(Some("a")), ["rr"]);
    assert!(c.verify("rr", 40, 4).unwrap().equal);
    assert!(c.verify("euler", 40, 2).unwrap().equal);
    assert!(matches!(Catalog::from_path(&dir.join("missing.cat")), Err(CatalogError::Io(_))));
    let dup = "[identity x]\nlhs.kind = multisum\nvars = n\nexponent = \"n\"\ndenoms = [q]\nrhs = \"1\"\n[identity x]\n";
    assert!(matches!(Catalog::parse(dup), Err(CatalogError::Syntax { line: 7, .. })));
    let bad_rhs = "[identity x]\nlhs.kind = multisum\nvars = n\nexponent = \"n^2\"\ndenoms = [q]\nrhs = \"TP(1,4\"\n";
    assert!(matches!(Catalog::parse(bad_rhs), Err(CatalogError::Expr { .. })));
    let bad_route = "[identity x]\nlhs.kind = multisum\nvars = n\nexponent = \"n^2\"\ndenoms = [q]\nrhs = \"1\"\nroute.1.kind = bailey\nroute.1.chain = \"NOPE\"\n";
    assert!(matches!(Catalog::parse(bad_route), Err(CatalogError::Bailey(_))));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn order_zero_and_digest_stability() {
    let c = Catalog::builtin();
    let r = c.verify("table2.13.1", 0, 4).unwrap();
    assert!(r.equal);
    assert_eq!(r.lhs_terms, 1);
    let a = c.verify("table2.4.3", 20, 4).unwrap();
    let b = c.verify("table2.4.3", 20, 4).unwrap();
    assert_eq!(a.lhs_digest, b.lhs_digest);
    let one = QSeries::one(4, 0);
    assert_eq!(digest(&one).len(), 16);
}
