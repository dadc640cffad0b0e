mod common;

use bisim_core::games::{
    check_wbisim, divergence, left_product, order_n_bisim, right_product, star_product, verify_closed,
    verify_wbisim, Divergence, PairSpace, WordRelation,
};
use bisim_core::series::{parse_series, parse_vector};
use bisim_core::{Grammar, SeriesMatrix, SeriesVector};
use common::oracles::*;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn scalar(g: &Grammar, s: &str) -> SeriesVector {
    SeriesVector::scalar(parse_series(s, g.variables()).unwrap())
}

#[test]
fn game_agrees_with_brute_force() {
    let mut r = rng(2024);
    let mut agree = 0;
    let mut positives = 0;
    while agree < 240 {
        let g = small_grammar(&mut r);
        g.check_strict_deterministic().unwrap();
        let s = random_det_vector(&mut r, g.variables(), 1, 4);
        let t = random_det_vector(&mut r, g.variables(), 1, 4);
        for n in 0..=3 {
            let game = order_n_bisim(&g, &s, &t, n).unwrap();
            assert_eq!(game.is_some(), brute_force(&g, &s, &t, n), "{s} vs {t} at {n}\n{g}");
            if let Some(rel) = game {
                check_wbisim(&g, &rel, &s, &t, n).unwrap();
                positives += 1;
            }
            agree += 1;
        }
    }
    assert!(positives > 20);
}

#[test]
fn divergence_examples() {
    let g = Grammar::parse("terminals: x y\nclass: A B\nA -> x\nB -> y\nC -> x C | y\nD -> x D | y\n").unwrap();
    assert_eq!(divergence(&g, &scalar(&g, "A"), &scalar(&g, "B"), 6).unwrap(), Divergence::Finite(1));
    assert_eq!(divergence(&g, &scalar(&g, "C"), &scalar(&g, "D"), 6).unwrap(), Divergence::Infinite);
    assert_eq!(divergence(&g, &scalar(&g, "C C"), &scalar(&g, "C"), 6).unwrap(), Divergence::Finite(1));
    let psi = Grammar::parse("terminals: x y\npsi: x->x y->x\nclass: A B\nA -> x\nB -> y\n").unwrap();
    assert_eq!(divergence(&psi, &scalar(&psi, "A"), &scalar(&psi, "B"), 6).unwrap(), Divergence::Infinite);
}

#[test]
fn unbounded_game_reports_lower_bound() {
    // `A^k` grows forever, the pair space never closes
    let g = Grammar::parse("terminals: x y z\nclass: A B\nA -> x A A | y\nB -> x B B | y\nC -> z\n").unwrap();
    let mut space = PairSpace::new(&g);
    let p = space.pair_of(&scalar(&g, "A"), &scalar(&g, "B"));
    assert_eq!(space.divergence(p, 4, 50), Divergence::AtLeast(4));
    let p = space.pair_of(&scalar(&g, "A"), &scalar(&g, "A A"));
    assert_eq!(space.divergence(p, 8, 50), Divergence::Finite(1));
}

#[test]
fn closed_certificates_verify() {
    let mut r = rng(5);
    let mut found = 0;
    for _ in 0..400 {
        let g = small_grammar(&mut r);
        let s = random_det_vector(&mut r, g.variables(), 1, 4);
        let t = random_det_vector(&mut r, g.variables(), 1, 4);
        if s == t {
            continue;
        }
        let mut space = PairSpace::new(&g);
        let p = space.pair_of(&s, &t);
        if let Some(cert) = space.closed_certificate(p, 200) {
            assert!(verify_closed(&g, &cert));
            for n in 0..5 {
                assert!(order_n_bisim(&g, &s, &t, n).unwrap().is_some());
            }
            found += 1;
        }
    }
    assert!(found > 5, "{found}");
}

#[test]
fn right_product_certifies() {
    let mut r = rng(9);
    let mut checked = 0;
    for _ in 0..300 {
        let g = small_grammar(&mut r);
        let s = random_det_vector(&mut r, g.variables(), 2, 3);
        let s2 = random_det_vector(&mut r, g.variables(), 2, 3);
        let m = SeriesMatrix::from_rows(
            g.variables().clone(),
            (0..2).map(|_| random_det_vector(&mut r, g.variables(), 1, 3)).collect(),
            1,
        )
        .unwrap();
        let (a, b) = (s.mul(&m).unwrap(), s2.mul(&m).unwrap());
        if !a.is_deterministic() || !b.is_deterministic() {
            continue;
        }
        for n in 0..=3 {
            if let Some(rel) = order_n_bisim(&g, &s, &s2, n).unwrap() {
                let out = right_product(&g, &s, &rel, n);
                check_wbisim(&g, &out, &a, &b, n).unwrap();
                checked += 1;
            }
        }
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn left_product_certifies() {
    let mut r = rng(13);
    let mut checked = 0;
    for _ in 0..300 {
        let g = small_grammar(&mut r);
        let s = random_det_vector(&mut r, g.variables(), 2, 3);
        let rows: Vec<(SeriesVector, SeriesVector)> = (0..2)
            .map(|_| {
                let t = random_det_vector(&mut r, g.variables(), 1, 3);
                let t2 = if r.gen_bool(0.5) { t.clone() } else { random_det_vector(&mut r, g.variables(), 1, 3) };
                (t, t2)
            })
            .collect();
        let m = SeriesMatrix::from_rows(g.variables().clone(), rows.iter().map(|p| p.0.clone()).collect(), 1).unwrap();
        let m2 = SeriesMatrix::from_rows(g.variables().clone(), rows.iter().map(|p| p.1.clone()).collect(), 1).unwrap();
        for n in 0..=3 {
            let family: Option<Vec<WordRelation>> =
                rows.iter().map(|(t, t2)| order_n_bisim(&g, t, t2, n).unwrap()).collect();
            if let Some(family) = family {
                let out = left_product(&g, &s, &family, n).unwrap();
                check_wbisim(&g, &out, &s.mul(&m).unwrap(), &s.mul(&m2).unwrap(), n).unwrap();
                checked += 1;
            }
        }
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn star_product_certifies() {
    let g = Grammar::parse("terminals: x y\nclass: C D\nC -> x\nD -> y\nA -> x A | y\n").unwrap();
    let a = g.variables();
    let s1 = parse_series("C", a).unwrap();
    let s = scalar(&g, "D");
    let t = scalar(&g, "A");
    let target = scalar(&g, "C* D");
    let lhs = scalar(&g, "C A + D");
    for n in 0..=5 {
        let rel = order_n_bisim(&g, &lhs, &t, n).unwrap().unwrap();
        let out = star_product(&g, &s1, &s, &t, &rel, n).unwrap();
        check_wbisim(&g, &out, &target, &t, n).unwrap();
    }
}

#[test]
fn composition_certifies() {
    let g = Grammar::parse("terminals: x y\nclass: A B E\nA -> x A | y\nB -> x B | y\nE -> x E | y\n").unwrap();
    let (a, b, e) = (scalar(&g, "A"), scalar(&g, "B"), scalar(&g, "E"));
    for n in 0..=4 {
        let r1 = order_n_bisim(&g, &a, &b, n).unwrap().unwrap();
        let r2 = order_n_bisim(&g, &b, &e, n).unwrap().unwrap();
        assert!(verify_wbisim(&g, &r1.compose(&r2), &a, &e, n));
        assert!(verify_wbisim(&g, &r1.inverse(), &b, &a, n));
    }
}

#[test]
fn width_mismatch_is_an_error() {
    let g = Grammar::parse("terminals: x\nA -> x\n").unwrap();
    let v = parse_vector("[A, A]", g.variables(), 1, 2).unwrap();
    assert!(order_n_bisim(&g, &v, &scalar(&g, "A"), 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certificates_are_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = small_grammar(&mut r);
        let s = random_det_vector(&mut r, g.variables(), 1, 4);
        let t = random_det_vector(&mut r, g.variables(), 1, 4);
        let mut last = true;
        for n in 0..=4 {
            let now = order_n_bisim(&g, &s, &t, n).unwrap();
            if let Some(rel) = &now {
                prop_assert!(verify_wbisim(&g, rel, &s, &t, n));
                prop_assert!(verify_wbisim(&g, &rel.truncate(n.saturating_sub(1)), &s, &t, n.saturating_sub(1)));
            }
            prop_assert!(last || now.is_none());
            last = now.is_some();
        }
        match divergence(&g, &s, &t, 4).unwrap() {
            Divergence::Finite(d) => {
                prop_assert!(order_n_bisim(&g, &s, &t, d).unwrap().is_none());
                if d > 0 {
                    prop_assert!(order_n_bisim(&g, &s, &t, d - 1).unwrap().is_some());
                }
            }
            _ => prop_assert!(order_n_bisim(&g, &s, &t, 4).unwrap().is_some()),
        }
    }

    #[test]
    fn divergence_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = small_grammar(&mut r);
        let s = random_det_vector(&mut r, g.variables(), 1, 4);
        let t = random_det_vector(&mut r, g.variables(), 1, 4);
        prop_assert_eq!(divergence(&g, &s, &t, 5).unwrap(), divergence(&g, &t, &s, 5).unwrap());
    }
}
