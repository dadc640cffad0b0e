#![allow(dead_code)]

use std::sync::Arc;

use bisim_core::{Alphabet, Letter, Series, SeriesMatrix, SeriesVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub mod oracles;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Alphabet with `n` letters `a0..` split into classes of random sizes.
pub fn random_alphabet(rng: &mut ChaCha8Rng, n: usize, marks: bool) -> Arc<Alphabet> {
    let mut classes: Vec<Vec<String>> = Vec::new();
    let mut i = 0;
    while i < n {
        let size = rng.gen_range(1..=(n - i).min(3));
        classes.push((i..i + size).map(|j| format!("a{j}")).collect());
        i += size;
    }
    Arc::new(if marks { Alphabet::with_marks(&classes) } else { Alphabet::from_classes(&classes) }.unwrap())
}

/// Arbitrary series from a random complete automaton.
pub fn random_series(rng: &mut ChaCha8Rng, alphabet: &Arc<Alphabet>, max_states: usize) -> Series {
    let n = rng.gen_range(1..=max_states);
    let k = alphabet.len();
    let trans: Vec<u32> = (0..n * k).map(|_| rng.gen_range(0..n as u32)).collect();
    let accept: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
    Series::from_dfa(alphabet.clone(), &trans, &accept)
}

pub fn random_word(rng: &mut ChaCha8Rng, alphabet: &Alphabet, max_len: usize) -> Vec<Letter> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| Letter(rng.gen_range(0..alphabet.len() as u32))).collect()
}

#[derive(Clone)]
enum Kind {
    Empty,
    Unit(usize),
    Class(Vec<(Letter, usize)>),
}

/// A random deterministic row vector: a typed automaton whose states are
/// empty, a unit, or headed by a single class, read off componentwise.
pub fn random_det_vector(
    rng: &mut ChaCha8Rng,
    alphabet: &Arc<Alphabet>,
    width: usize,
    max_states: usize,
) -> SeriesVector {
    let n = rng.gen_range(1..=max_states);
    let classes = alphabet.classes();
    let mut kinds = Vec::with_capacity(n);
    for _ in 0..n {
        let roll = rng.gen_range(0..10);
        let kind = if roll == 0 {
            Kind::Empty
        } else if roll < 3 || n == 1 {
            Kind::Unit(rng.gen_range(0..width))
        } else {
            let c = &classes[rng.gen_range(0..classes.len())];
            let mut moves = Vec::new();
            for &l in c {
                if rng.gen_bool(0.7) {
                    moves.push((l, rng.gen_range(0..n)));
                }
            }
            if moves.is_empty() {
                moves.push((c[0], rng.gen_range(0..n)));
            }
            Kind::Class(moves)
        };
        kinds.push(kind);
    }
    let sink = n;
    let entries = (0..width)
        .map(|i| {
            let kinds = &kinds;
            bisim_core::series::explore(
                alphabet,
                0usize,
                move |&s, l| {
                    if s == sink {
                        return sink;
                    }
                    match &kinds[s] {
                        Kind::Class(m) => m.iter().find(|(x, _)| *x == l).map_or(sink, |&(_, t)| t),
                        _ => sink,
                    }
                },
                move |&s| s != sink && matches!(kinds[s], Kind::Unit(j) if j == i),
            )
        })
        .collect();
    SeriesVector::from_entries(alphabet.clone(), entries)
}

pub fn random_det_matrix(
    rng: &mut ChaCha8Rng,
    alphabet: &Arc<Alphabet>,
    rows: usize,
    cols: usize,
    max_states: usize,
) -> SeriesMatrix {
    let rs = (0..rows).map(|_| random_det_vector(rng, alphabet, cols, max_states)).collect();
    SeriesMatrix::from_rows(alphabet.clone(), rs, cols).unwrap()
}

/// All words over the alphabet up to `max_len`, length-lexicographic.
pub fn all_words(k: usize, max_len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<Letter>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for l in 0..k {
                let mut w2 = w.clone();
                w2.push(Letter(l as u32));
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Hand-built deterministic pdas used across test targets.
pub const ANBN: &str = "\
states: p q f
stack: Z A
input: a b
initial: p Z
p Z a -> p A Z
p A a -> p A A
p A b -> q
q A b -> q
q Z eps -> f
";

pub const DYCK: &str = "\
states: p
stack: Z A B
input: a b c d
initial: p Z
p Z a -> p A Z
p A a -> p A A
p B a -> p A B
p Z b -> p B Z
p A b -> p B A
p B b -> p B B
p A c -> p
p B d -> p
";

pub const PSI3: &str = "\
states: p q r
stack: Z A
input: a b c
initial: p Z
psi: a->a b->a
p Z a -> p A Z
p A a -> p A A
p A b -> q
q A b -> q
q Z c -> r
p A c -> r A
r A eps -> r
r Z b -> p Z
";

/// Random normalized deterministic pda: every mode is either an ε-pop or a
/// set of input rules pushing at most two symbols.
pub fn random_dpda(
    rng: &mut ChaCha8Rng,
    states: usize,
    stack: usize,
    classes: &[Vec<&str>],
) -> bisim_core::Pda {
    random_pda(rng, states, stack, classes, false)
}

/// As `random_dpda`, but with `nondet` a mode may have two rules per letter.
pub fn random_pda(
    rng: &mut ChaCha8Rng,
    states: usize,
    stack: usize,
    classes: &[Vec<&str>],
    nondet: bool,
) -> bisim_core::Pda {
    let mut text = String::new();
    let qs: Vec<String> = (0..states).map(|i| format!("q{i}")).collect();
    let zs: Vec<String> = (0..stack).map(|i| format!("Z{i}")).collect();
    let xs: Vec<&str> = classes.iter().flatten().copied().collect();
    text.push_str(&format!("states: {}\nstack: {}\ninput: {}\n", qs.join(" "), zs.join(" "), xs.join(" ")));
    text.push_str("initial: q0 Z0\n");
    let psi: Vec<String> = classes.iter().flat_map(|c| c.iter().map(move |x| format!("{x}->{}", c[0]))).collect();
    text.push_str(&format!("psi: {}\n", psi.join(" ")));
    for q in 0..states {
        for z in 0..stack {
            let initial = q == 0 && z == 0;
            if !initial && rng.gen_bool(0.2) {
                text.push_str(&format!("{} {} eps -> {}\n", qs[q], zs[z], qs[rng.gen_range(0..states)]));
                continue;
            }
            for x in &xs {
                let count = if nondet { rng.gen_range(0..=2) } else { rng.gen_bool(0.6) as usize };
                for _ in 0..count {
                let len = rng.gen_range(0..=2);
                let push: Vec<&str> = (0..len).map(|_| zs[rng.gen_range(0..stack)].as_str()).collect();
                text.push_str(&format!(
                    "{} {} {} -> {} {}\n",
                    qs[q],
                    zs[z],
                    x,
                    qs[rng.gen_range(0..states)],
                    push.join(" ")
                ));
                }
            }
        }
    }
    bisim_core::Pda::parse(&text).unwrap()
}

/// Configurations reachable from the initial one within `depth` moves.
pub fn reachable_configs(pda: &bisim_core::Pda, depth: usize) -> Vec<bisim_core::Config> {
    let start = pda.eps_closure(&pda.initial);
    let mut seen = vec![start.clone()];
    let mut layer = vec![start];
    for _ in 0..depth {
        let mut next = Vec::new();
        for c in &layer {
            for x in 0..pda.input.len() as u32 {
                for n in pda.successors(c, x) {
                    if !seen.contains(&n) {
                        seen.push(n.clone());
                        next.push(n);
                    }
                }
            }
        }
        layer = next;
    }
    seen
}

/// Random strict-deterministic grammar: per class and terminal, the rules
/// present share one right-hand class sequence and have distinct words.
pub fn random_grammar(rng: &mut ChaCha8Rng, terminals: &[Vec<&str>], classes: &[usize]) -> bisim_core::Grammar {
    let mut text = String::new();
    let xs: Vec<&str> = terminals.iter().flatten().copied().collect();
    text.push_str(&format!("terminals: {}\n", xs.join(" ")));
    let psi: Vec<String> = terminals.iter().flat_map(|c| c.iter().map(move |x| format!("{x}->{}", c[0]))).collect();
    text.push_str(&format!("psi: {}\n", psi.join(" ")));
    let names: Vec<Vec<String>> = classes
        .iter()
        .enumerate()
        .map(|(c, &n)| (0..n).map(|i| format!("V{c}{}", (b'a' + i as u8) as char)).collect())
        .collect();
    for class in &names {
        text.push_str(&format!("class: {}\n", class.join(" ")));
    }
    let mut rules: Vec<Vec<String>> = names.iter().flatten().map(|_| Vec::new()).collect();
    let mut offset = 0;
    for class in &names {
        for x in &xs {
            let len = rng.gen_range(0..=2);
            if len == 0 {
                if rng.gen_bool(0.7) {
                    rules[offset + rng.gen_range(0..class.len())].push(x.to_string());
                }
                continue;
            }
            let seq: Vec<usize> = (0..len).map(|_| rng.gen_range(0..names.len())).collect();
            let mut used: Vec<Vec<String>> = Vec::new();
            for i in 0..class.len() {
                if !rng.gen_bool(0.6) {
                    continue;
                }
                let w: Vec<String> =
                    seq.iter().map(|&c| names[c][rng.gen_range(0..names[c].len())].clone()).collect();
                if used.contains(&w) {
                    continue;
                }
                rules[offset + i].push(format!("{x} {}", w.join(" ")));
                used.push(w);
            }
        }
        offset += class.len();
    }
    for (v, rs) in names.iter().flatten().zip(&rules) {
        if !rs.is_empty() {
            text.push_str(&format!("{v} -> {}\n", rs.join(" | ")));
        }
    }
    bisim_core::Grammar::parse(&text).unwrap()
}
