//! Conversion of a canonical automaton back to expression text by state
//! elimination.

use super::Series;
use crate::alphabet::{Alphabet, Letter};

#[derive(Clone, Debug, PartialEq)]
enum Re {
    Zero,
    One,
    Sym(Letter),
    Sum(Vec<Re>),
    Cat(Vec<Re>),
    Star(Box<Re>),
}

fn sum(a: Re, b: Re) -> Re {
    let mut parts = Vec::new();
    for r in [a, b] {
        match r {
            Re::Zero => {}
            Re::Sum(v) => parts.extend(v),
            other => parts.push(other),
        }
    }
    let mut uniq: Vec<Re> = Vec::new();
    for p in parts {
        if !uniq.contains(&p) {
            uniq.push(p);
        }
    }
    match uniq.len() {
        0 => Re::Zero,
        1 => uniq.pop().unwrap(),
        _ => Re::Sum(uniq),
    }
}

fn cat(a: Re, b: Re) -> Re {
    if a == Re::Zero || b == Re::Zero {
        return Re::Zero;
    }
    let mut parts = Vec::new();
    for r in [a, b] {
        match r {
            Re::One => {}
            Re::Cat(v) => parts.extend(v),
            other => parts.push(other),
        }
    }
    match parts.len() {
        0 => Re::One,
        1 => parts.pop().unwrap(),
        _ => Re::Cat(parts),
    }
}

fn star(a: Re) -> Re {
    match a {
        Re::Zero | Re::One => Re::One,
        s @ Re::Star(_) => s,
        other => Re::Star(Box::new(other)),
    }
}

fn render(r: &Re, a: &Alphabet, out: &mut String) {
    match r {
        Re::Zero => out.push('0'),
        Re::One => out.push('1'),
        Re::Sym(l) => out.push_str(a.name(*l)),
        Re::Sum(v) => {
            for (i, p) in v.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                render(p, a, out);
            }
        }
        Re::Cat(v) => {
            for (i, p) in v.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                if matches!(p, Re::Sum(_)) {
                    out.push('(');
                    render(p, a, out);
                    out.push(')');
                } else {
                    render(p, a, out);
                }
            }
        }
        Re::Star(inner) => {
            if matches!(**inner, Re::Sym(_)) {
                render(inner, a, out);
            } else {
                out.push('(');
                render(inner, a, out);
                out.push(')');
            }
            out.push('*');
        }
    }
}

pub(super) fn to_expr(s: &Series) -> String {
    let n = s.num_states();
    let alpha = s.alphabet();
    let live: Vec<usize> = (0..n).filter(|&q| !s.is_dead_state(q as u32)).collect();
    if live.is_empty() {
        return "0".into();
    }
    let pos = |q: usize| live.iter().position(|&x| x == q);
    let m = live.len();
    let mut coef = vec![vec![Re::Zero; m]; m];
    let mut tail = vec![Re::Zero; m];
    for (i, &q) in live.iter().enumerate() {
        if s.accepts_at(q as u32) {
            tail[i] = Re::One;
        }
        for l in alpha.letters() {
            let t = s.next(q as u32, l) as usize;
            if let Some(j) = pos(t) {
                coef[i][j] = sum(std::mem::replace(&mut coef[i][j], Re::Zero), Re::Sym(l));
            }
        }
    }
    for k in (1..m).rev() {
        let lp = star(std::mem::replace(&mut coef[k][k], Re::Zero));
        for j in 0..m {
            let c = std::mem::replace(&mut coef[k][j], Re::Zero);
            coef[k][j] = cat(lp.clone(), c);
        }
        tail[k] = cat(lp, std::mem::replace(&mut tail[k], Re::Zero));
        for i in 0..k {
            let f = std::mem::replace(&mut coef[i][k], Re::Zero);
            if f == Re::Zero {
                continue;
            }
            for j in 0..k {
                let add = cat(f.clone(), coef[k][j].clone());
                coef[i][j] = sum(std::mem::replace(&mut coef[i][j], Re::Zero), add);
            }
            let add = cat(f, tail[k].clone());
            tail[i] = sum(std::mem::replace(&mut tail[i], Re::Zero), add);
        }
    }
    let root = cat(star(coef[0][0].clone()), tail[0].clone());
    let mut out = String::new();
    render(&root, alpha, &mut out);
    out
}
