mod common;

use std::collections::HashSet;

use bisim_core::grammar::{reduce_grammar, PdaPipeline};
use bisim_core::series::parse_series;
use bisim_core::{Letter, Pda, Series, SeriesVector};
use common::*;
use proptest::prelude::*;

fn pipeline(text: &str) -> PdaPipeline {
    PdaPipeline::new(Pda::parse(text).unwrap().with_coroot().unwrap()).unwrap()
}

fn closure_count(v: &SeriesVector) -> usize {
    let mut seen: HashSet<SeriesVector> = HashSet::new();
    let mut todo = vec![v.clone()];
    seen.insert(v.clone());
    while let Some(t) = todo.pop() {
        for l in v.alphabet().letters() {
            let n = t.residual_letter(l);
            if seen.insert(n.clone()) {
                todo.push(n);
            }
        }
    }
    seen.len()
}

#[test]
fn theta_preserves_languages() {
    for text in [ANBN, DYCK, PSI3] {
        let p = pipeline(text);
        let qbar = p.qbar();
        let k = p.pda.input.len();
        for c in reachable_configs(&p.pda, 3) {
            let s = p.theta(&c);
            assert!(SeriesVector::scalar(s.clone()).is_deterministic());
            for w in all_words(k, 6) {
                let pw: Vec<u32> = w.iter().map(|l| l.0).collect();
                let accepted = p.pda.run(&c, &pw).is_some_and(|e| e.state == qbar && e.stack.is_empty());
                assert_eq!(p.g.generates(&s, &p.terminal_word(&pw)), accepted, "{}", p.pda.format_config(&c));
            }
        }
    }
}

#[test]
fn theta_base_cases() {
    let p = pipeline(ANBN);
    let qbar = bisim_core::Config { state: p.qbar(), stack: vec![] };
    assert!(p.theta(&qbar).is_epsilon());
    let f = p.pda.state_index("f").unwrap();
    let z = p.pda.stack_index("Z").unwrap();
    // `f Z $` can only move by `#`
    let fz = p.pda.lift_to_coroot(&bisim_core::Config { state: f, stack: vec![z] });
    assert!(!p.theta(&fz).is_empty());
    let stuck = PdaPipeline::new(Pda::parse(&format!("{ANBN}final: f\np Z c -> g Z\ng Z c -> g Z Z\n")).unwrap())
        .unwrap();
    let g = stuck.pda.state_index("g").unwrap();
    assert!(stuck.theta0(&bisim_core::Config { state: g, stack: vec![z] }).is_empty());
}

#[test]
fn morphism_property_small() {
    for text in [ANBN, PSI3] {
        let p = pipeline(text);
        let k = p.g.terminals().len();
        for c in reachable_configs(&p.pda, 2) {
            let s = SeriesVector::scalar(p.theta(&c));
            for u in all_words(k, 2) {
                let su = p.g.action(&s, &u).unwrap();
                for w in all_words(k, 4) {
                    let uw: Vec<Letter> = u.iter().chain(&w).copied().collect();
                    assert_eq!(p.g.generates(su.get(0), &w), p.g.generates(s.get(0), &uw));
                }
            }
        }
    }
}

#[test]
fn pda_grammars_are_strict_deterministic() {
    for text in [ANBN, DYCK, PSI3] {
        let p = pipeline(text);
        p.gm.check_strict_deterministic().unwrap();
        p.g0().check_strict_deterministic().unwrap();
        p.g.check_strict_deterministic().unwrap();
        assert_eq!(p.g.productions().len(), 2 * p.g0().productions().len());
    }
}

#[test]
fn k0_matches_residual_closure() {
    for text in [ANBN, DYCK, PSI3] {
        let p = pipeline(text);
        let g = &p.g;
        let mut brute = 0;
        for class in g.variables().classes() {
            for x in g.terminals().letters() {
                let entries = class
                    .iter()
                    .map(|&v| {
                        let words: Vec<String> = g
                            .rhs(v, x)
                            .iter()
                            .map(|w| {
                                if w.is_empty() {
                                    "1".to_string()
                                } else {
                                    w.iter().map(|&l| g.variables().name(l)).collect::<Vec<_>>().join(" ")
                                }
                            })
                            .collect();
                        let expr = if words.is_empty() { "0".to_string() } else { words.join(" + ") };
                        parse_series(&expr, g.variables()).unwrap()
                    })
                    .collect();
                brute = brute.max(closure_count(&SeriesVector::from_entries(g.variables().clone(), entries)));
            }
        }
        assert_eq!(g.compute_k0(), brute);
    }
}

#[test]
fn reduction_preserves_languages() {
    let mut r = rng(7);
    for _ in 0..20 {
        let m = random_dpda(&mut r, 3, 2, &[vec!["a"], vec!["b"]]).with_coroot().unwrap();
        let gm = bisim_core::grammar::pda_to_grammar(&m).unwrap();
        let red = reduce_grammar(&gm).unwrap();
        let g0 = &red.grammar;
        let qbar = m.final_state().unwrap();
        for c in reachable_configs(&m, 2) {
            let poly = bisim_core::grammar::config_polynomial(&m, gm.variables(), c.state, &c.stack, qbar);
            let s0 = red.apply(&poly);
            for w in all_words(m.input.len(), 5) {
                let pw: Vec<u32> = w.iter().map(|l| l.0).collect();
                let tw: Vec<Letter> =
                    pw.iter().map(|&x| g0.terminals().lookup(&m.input[x as usize]).unwrap()).collect();
                let accepted = m.run(&c, &pw).is_some_and(|e| e.state == qbar && e.stack.is_empty());
                assert_eq!(g0.generates(&s0, &tw), accepted);
            }
        }
    }
}

#[test]
fn random_dpda_grammars_are_strict_deterministic() {
    let mut r = rng(11);
    for _ in 0..30 {
        let m = random_dpda(&mut r, 3, 3, &[vec!["a", "b"], vec!["c"]]).with_coroot().unwrap();
        let p = PdaPipeline::new(m).unwrap();
        p.gm.check_strict_deterministic().unwrap();
        p.g0().check_strict_deterministic().unwrap();
        p.g.check_strict_deterministic().unwrap();
    }
}

#[test]
fn stacking_examples() {
    let g = bisim_core::Grammar::parse("terminals: x y\nclass: A B\nA -> x A | y\nB -> x B | y\n").unwrap();
    let a = g.variables().clone();
    let s = SeriesVector::from_entries(a.clone(), vec![parse_series("A A + B", &a).unwrap()]);
    assert!(g.is_stacking(&s, &[]).unwrap());
    let x = g.terminals().letter("x").unwrap();
    let y = g.terminals().letter("y").unwrap();
    assert!(g.is_stacking(&s, &[x, x]).unwrap());
    assert!(!g.is_stacking(&s, &[y]).unwrap());
    let unit = SeriesVector::scalar(Series::epsilon(&a));
    assert!(g.is_stacking(&unit, &[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_laws(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = pipeline([ANBN, DYCK, PSI3][(seed % 3) as usize]);
        let g = &p.g;
        let k0 = g.compute_k0();
        let s = random_det_vector(&mut r, g.variables(), 2, 6);
        let u = random_word(&mut r, g.terminals(), 4);
        let v = random_word(&mut r, g.terminals(), 3);
        let su = g.action(&s, &u).unwrap();
        prop_assert!(su.is_deterministic());
        prop_assert!(su.norm() <= s.norm() + k0 * u.len());
        let uv: Vec<Letter> = u.iter().chain(&v).copied().collect();
        prop_assert_eq!(g.action(&su, &v).unwrap(), g.action(&s, &uv).unwrap());
        prop_assert_eq!(su.erase_marks().unwrap(), g.action(&s.erase_marks().unwrap(), &u).unwrap());
    }

    #[test]
    fn stacking_along_flat_words(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = pipeline(ANBN);
        let g = &p.g;
        let s = random_det_vector(&mut r, g.variables(), 1, 5);
        let u = random_word(&mut r, g.terminals(), 3);
        if s.is_loop_free() && matches!(s.left_det_type(), bisim_core::LeftDetType::Class(_)) {
            let norms: Vec<usize> = (0..=u.len()).map(|i| g.action(&s, &u[..i]).unwrap().norm()).collect();
            if norms.windows(2).all(|w| w[0] <= w[1]) && !g.action(&s, &u).unwrap().is_empty_vector() {
                let su = g.action(&s, &u).unwrap();
                if su.unit_index().is_none() {
                    prop_assert!(g.is_stacking(&s, &u).unwrap());
                }
            }
        }
    }
}
