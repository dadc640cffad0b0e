//! Independent oracles shared by the property tests and the acceptance run.

use std::collections::{BTreeSet, HashMap};

use bisim_core::games::PairSpace;
use bisim_core::graphs::{bounded_2graph_bisim, computation_graph, Graph};
use bisim_core::series::parse_vector;
use bisim_core::{Grammar, Letter, PdaPipeline, SeriesVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

type Pair = (Vec<Letter>, Vec<Letter>);

/// Independent oracle: every admissible relation sits inside the greatest
/// one, obtained by pruning all coherent ψ̄ pairs until prefix closure and
/// both extension clauses hold. Valid relations are closed under union, so
/// a certificate exists iff the greatest one contains the root.
pub fn brute_force(g: &Grammar, s: &SeriesVector, t: &SeriesVector, n: usize) -> bool {
    let x = g.terminals();
    let words = all_words(x.len(), n);
    let unit = |v: &SeriesVector, w: &Vec<Letter>| g.action(v, w).unwrap().unit_index();
    let us: HashMap<&Vec<Letter>, Option<usize>> = words.iter().map(|w| (w, unit(s, w))).collect();
    let ut: HashMap<&Vec<Letter>, Option<usize>> = words.iter().map(|w| (w, unit(t, w))).collect();
    let mut rel: BTreeSet<Pair> = BTreeSet::new();
    for u in &words {
        for v in &words {
            if u.len() == v.len() && u.iter().zip(v).all(|(a, b)| x.class_of(*a) == x.class_of(*b)) && us[u] == ut[v] {
                rel.insert((u.clone(), v.clone()));
            }
        }
    }
    loop {
        let keep: BTreeSet<Pair> = rel
            .iter()
            .filter(|(u, v)| {
                let prefix = u.is_empty() || rel.contains(&(u[..u.len() - 1].to_vec(), v[..v.len() - 1].to_vec()));
                let ext = u.len() == n
                    || x.letters().all(|a| {
                        let cls = x.class(x.class_of(a));
                        let has = |p: Letter, q: Letter| {
                            let mut u2 = u.clone();
                            u2.push(p);
                            let mut v2 = v.clone();
                            v2.push(q);
                            rel.contains(&(u2, v2))
                        };
                        cls.iter().any(|&b| has(a, b)) && cls.iter().any(|&b| has(b, a))
                    });
                prefix && ext
            })
            .cloned()
            .collect();
        if keep.len() == rel.len() {
            return rel.contains(&(vec![], vec![]));
        }
        rel = keep;
    }
}

pub fn small_grammar(r: &mut ChaCha8Rng) -> Grammar {
    let terms: Vec<Vec<&str>> = if r.gen_bool(0.5) { vec![vec!["a", "b"]] } else { vec![vec!["a"], vec!["b"]] };
    let nclasses = r.gen_range(1..=3);
    let sizes: Vec<usize> = (0..nclasses).map(|_| r.gen_range(1..=2)).collect();
    random_grammar(r, &terms, &sizes)
}

/// Depth of each vertex from the first source.
pub fn depths(g: &Graph) -> Vec<usize> {
    let mut d = vec![usize::MAX; g.num_vertices()];
    let mut q = std::collections::VecDeque::new();
    for &s in g.sources() {
        if d[s as usize] == usize::MAX {
            d[s as usize] = 0;
            q.push_back(s);
        }
    }
    while let Some(v) = q.pop_front() {
        for &(_, w) in g.succ(v) {
            if d[w as usize] == usize::MAX {
                d[w as usize] = d[v as usize] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

/// Random dpdas with at most 3 states and `max_stack` stack symbols. For
/// every pair of vertices of the depth-`depth` truncation, the 2-graph
/// game and the series game agree at each order `≤ max_n`. Returns the
/// number of pairs compared.
pub fn graph_series_agreement(r: &mut ChaCha8Rng, trials: usize, depth: usize, max_n: usize, max_stack: usize) -> usize {
    let mut compared = 0;
    for _ in 0..trials {
        let classes: Vec<Vec<&str>> =
            if r.gen_bool(0.5) { vec![vec!["a", "b"], vec!["c"]] } else { vec![vec!["a"], vec!["b"]] };
        let (states, stack) = (r.gen_range(1..=3), r.gen_range(1..=max_stack));
        let m = random_dpda(r, states, stack, &classes).with_coroot().unwrap();
        let p = PdaPipeline::new(m).unwrap();
        let (g, configs) = computation_graph(&p.pda, depth + max_n);
        let d = depths(&g);
        let class_of: Vec<usize> = {
            let t = p.g.terminals();
            (0..p.pda.input.len() as u32).map(|x| t.class_of(p.terminal(x))).collect()
        };
        let verts: Vec<u32> = (0..g.num_vertices() as u32).filter(|&v| d[v as usize] <= depth).collect();
        let mut space = PairSpace::new(&p.g);
        let theta: Vec<SeriesVector> = configs.iter().map(|c| SeriesVector::scalar(p.theta(c))).collect();
        for &v in &verts {
            for &w in &verts {
                let pair = space.pair_of(&theta[v as usize], &theta[w as usize]);
                for n in 0..=max_n {
                    if d[v as usize] + n > depth + max_n || d[w as usize] + n > depth + max_n {
                        continue;
                    }
                    let graph = bounded_2graph_bisim(&g, &class_of, v, w, n);
                    assert_eq!(
                        graph,
                        space.alive(pair, n),
                        "{} vs {} at {n}\n{}",
                        g.name(v),
                        g.name(w),
                        p.pda.to_text()
                    );
                    compared += 1;
                }
            }
        }
    }
    compared
}

pub const AB: &str = "terminals: x y\nclass: A B\nA -> x A | y\nB -> x B | y\n";

/// Hand-built bisimilar sets: grammar text, pairs (as `left ~ right`).
pub const SETS: &[(&str, &[&str])] = &[
    (AB, &["A ~ B"]),
    ("terminals: x y\nclass: C D\nC -> x C C | y\nD -> x D D | y\n", &["C ~ D"]),
    ("terminals: x y\npsi: x->x y->x\nclass: A B\nA -> x\nB -> y\n", &["A ~ B"]),
    ("terminals: x y\nclass: E F G\nE -> x E | y\nF -> x G | y\nG -> x F | y\n", &["E ~ F", "E ~ G"]),
    ("terminals: x y\nclass: C D\nC -> x\nD -> y\nA -> x A | y\n", &["C* D ~ A"]),
    (
        "terminals: x y z\nclass: A B\nclass: P Q\nA -> x A P | y\nB -> x B Q | y\nP -> z\nQ -> z\n",
        &["A ~ B", "P ~ Q"],
    ),
];

pub fn vec_of(g: &Grammar, s: &str) -> SeriesVector {
    parse_vector(s, g.variables(), 1, 1).unwrap()
}

pub fn pairs_of(g: &Grammar, pairs: &[&str]) -> Vec<(SeriesVector, SeriesVector)> {
    pairs
        .iter()
        .map(|p| {
            let (a, b) = p.split_once('~').unwrap();
            (vec_of(g, a), vec_of(g, b))
        })
        .collect()
}

pub fn file_text(grammar: &str, pairs: &[&str], goal: &str) -> String {
    let mut t = grammar.to_string();
    for p in pairs {
        t.push_str(&format!("pair: {p}\n"));
    }
    t.push_str(&format!("goal: {goal}\n"));
    t
}

