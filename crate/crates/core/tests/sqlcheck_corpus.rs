mod common;

use proptest::prelude::*;
use pvsql::sqlcheck::{check_all, check_constraint, derive_constraints_from_sql, parse_sql};
use pvsql::ConstraintKind;

#[test]
fn verifier_corpus_outcomes() {
    let cases = common::verifier_cases();
    assert_eq!(cases.len(), 59);
    for (c, sql, expected) in &cases {
        let ast = parse_sql(sql).unwrap_or_else(|e| panic!("{sql}: {e}"));
        let got = check_constraint(&ast, c).is_none();
        assert_eq!(got, *expected, "{c} on {sql}");
        // check_all agrees with the single check
        assert_eq!(check_all(&ast, std::slice::from_ref(c)).is_empty(), *expected);
    }
}

#[test]
fn every_kind_has_a_satisfying_and_a_violating_case() {
    let cases = common::verifier_cases();
    for kind in ConstraintKind::ALL {
        for want in [true, false] {
            assert!(
                cases.iter().any(|(c, _, s)| c.kind == kind && *s == want),
                "{kind} lacks a case with satisfied={want}"
            );
        }
    }
}

#[test]
fn derive_round_trips_on_corpus() {
    for (_, sql, _) in common::verifier_cases() {
        let ast = parse_sql(&sql).unwrap();
        let derived = derive_constraints_from_sql(&ast);
        assert!(check_all(&ast, &derived).is_empty(), "{sql}");
    }
}

#[test]
fn seeded_random_sql_is_self_consistent() {
    for seed in 0..200 {
        let sql = common::random_sql(seed);
        let ast = parse_sql(&sql).unwrap_or_else(|e| panic!("{sql}: {e}"));
        let v = check_all(&ast, &derive_constraints_from_sql(&ast));
        assert!(v.is_empty(), "{sql}: {v:?}");
    }
}

#[test]
fn random_generator_is_deterministic_and_varied() {
    assert_eq!(common::random_sql(7), common::random_sql(7));
    let distinct: std::collections::BTreeSet<_> = (0..200).map(common::random_sql).collect();
    assert!(distinct.len() > 190);
}

proptest! {
    #[test]
    fn self_consistency(seed in any::<u64>()) {
        let sql = common::random_sql(seed);
        let ast = parse_sql(&sql).unwrap();
        prop_assert!(check_all(&ast, &derive_constraints_from_sql(&ast)).is_empty());
    }

    #[test]
    fn parse_never_panics(s in "\\PC{0,80}") {
        let _ = parse_sql(&s);
    }
}
