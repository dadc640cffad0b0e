//! From a normalized pda to its grammar, the reduced grammar and the
//! marked grammar, plus configuration polynomials and θ.

use std::sync::Arc;

use super::pda::{Config, Pda};
use super::{Grammar, Production};
use crate::alphabet::{Alphabet, Letter};
use crate::error::{Error, Result};
use crate::series::{explore, Series, Subst};

/// Terminal alphabet of a pda: classes are the ψ-fibres, letters keep the
/// pda's input order inside each class.
pub(crate) fn terminal_alphabet(pda: &Pda) -> Result<Arc<Alphabet>> {
    let mut classes: Vec<(String, Vec<String>)> = Vec::new();
    for (x, y) in pda.input.iter().zip(&pda.psi) {
        match classes.iter_mut().find(|(img, _)| img == y) {
            Some((_, c)) => c.push(x.clone()),
            None => classes.push((y.clone(), vec![x.clone()])),
        }
    }
    let classes: Vec<Vec<String>> = classes.into_iter().map(|(_, c)| c).collect();
    Ok(Arc::new(Alphabet::from_classes(&classes)?))
}

fn var_index(pda: &Pda, p: u32, z: u32, q: u32) -> Letter {
    let nq = pda.states.len() as u32;
    let nz = pda.stack_symbols.len() as u32;
    Letter((p * nz + z) * nq + q)
}

/// The grammar with variables `<p,z,q>`, classed by `(p,z)`.
pub fn pda_to_grammar(pda: &Pda) -> Result<Grammar> {
    let report = pda.check_normalized();
    if !report.is_normalized() {
        return Err(Error::NotNormalized(report.to_string().trim_end().replace('\n', "; ")));
    }
    let nq = pda.states.len() as u32;
    let mut classes = Vec::new();
    for p in 0..nq {
        for z in 0..pda.stack_symbols.len() as u32 {
            classes.push(
                (0..nq)
                    .map(|q| {
                        format!(
                            "<{},{},{}>",
                            pda.states[p as usize], pda.stack_symbols[z as usize], pda.states[q as usize]
                        )
                    })
                    .collect::<Vec<_>>(),
            );
        }
    }
    let vars = Arc::new(Alphabet::from_classes(&classes)?);
    let terms = terminal_alphabet(pda)?;
    let v = |p, z, q| var_index(pda, p, z, q);
    let mut prods = Vec::new();
    for r in &pda.rules {
        let x = match r.input {
            Some(x) => Some(terms.letter(&pda.input[x as usize])?),
            None => None,
        };
        match r.push.as_slice() {
            [] => prods.push(Production { lhs: v(r.from, r.top, r.to), terminal: x, rhs: vec![] }),
            [z1] => {
                for q in 0..nq {
                    prods.push(Production { lhs: v(r.from, r.top, q), terminal: x, rhs: vec![v(r.to, *z1, q)] });
                }
            }
            [z1, z2] => {
                for q in 0..nq {
                    for mid in 0..nq {
                        prods.push(Production {
                            lhs: v(r.from, r.top, q),
                            terminal: x,
                            rhs: vec![v(r.to, *z1, mid), v(mid, *z2, q)],
                        });
                    }
                }
            }
            _ => unreachable!("normalized pdas push at most two symbols"),
        }
    }
    Grammar::new(terms, vars, prods)
}

/// A reduced grammar together with the substitution `φ0` from the original
/// variables: kept, erased (nullable) or killed (unproductive).
#[derive(Clone, Debug)]
pub struct Reduced {
    pub grammar: Grammar,
    pub phi0: Vec<Subst>,
    source: Arc<Alphabet>,
}

impl Reduced {
    /// `φ0(S)` for a series over the original variables.
    pub fn apply(&self, s: &Series) -> Series {
        s.substitute(self.grammar.variables(), |l| self.phi0[l.index()])
    }

    pub fn source(&self) -> &Arc<Alphabet> {
        &self.source
    }
}

/// Keeps the variables deriving a nonempty terminal word; nullable variables
/// are erased and the rest annihilated. ε-productions of kept variables are
/// dropped.
pub fn reduce_grammar(g: &Grammar) -> Result<Reduced> {
    let vars = g.variables();
    let n = vars.len();
    let nullable: Vec<bool> = {
        let mut nl = vec![false; n];
        for p in g.productions() {
            if p.terminal.is_none() {
                nl[p.lhs.index()] = true;
            }
        }
        nl
    };
    let mut productive = vec![false; n];
    loop {
        let mut changed = false;
        for p in g.productions() {
            if p.terminal.is_some()
                && !productive[p.lhs.index()]
                && p.rhs.iter().all(|v| productive[v.index()] || nullable[v.index()])
            {
                productive[p.lhs.index()] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let classes: Vec<Vec<&str>> = vars
        .classes()
        .iter()
        .map(|c| c.iter().filter(|v| productive[v.index()]).map(|&v| vars.name(v)).collect::<Vec<_>>())
        .filter(|c: &Vec<&str>| !c.is_empty())
        .collect();
    let v0 = Arc::new(Alphabet::from_classes(&classes)?);
    let phi0: Vec<Subst> = vars
        .letters()
        .map(|v| {
            if productive[v.index()] {
                Subst::To(v0.lookup(vars.name(v)).expect("kept variable"))
            } else if nullable[v.index()] {
                Subst::Epsilon
            } else {
                Subst::Kill
            }
        })
        .collect();
    let mut prods = Vec::new();
    'outer: for p in g.productions() {
        let (Some(x), Subst::To(lhs)) = (p.terminal, phi0[p.lhs.index()]) else { continue };
        let mut rhs = Vec::new();
        for v in &p.rhs {
            match phi0[v.index()] {
                Subst::To(w) => rhs.push(w),
                Subst::Epsilon => {}
                Subst::Kill => continue 'outer,
            }
        }
        let prod = Production { lhs, terminal: Some(x), rhs };
        if !prods.contains(&prod) {
            prods.push(prod);
        }
    }
    let grammar = Grammar::new(g.terminals().clone(), v0, prods)?;
    Ok(Reduced { grammar, phi0, source: vars.clone() })
}

/// Adds a marked copy of every variable and every production.
pub fn with_marked_copies(g0: &Grammar) -> Result<Grammar> {
    let v0 = g0.variables();
    if v0.has_marks() {
        return Err(Error::Marked);
    }
    let classes: Vec<Vec<&str>> =
        v0.classes().iter().map(|c| c.iter().map(|&v| v0.name(v)).collect()).collect();
    let v = Arc::new(Alphabet::with_marks(&classes)?);
    let n = v0.len() as u32;
    let mut prods: Vec<Production> = g0.productions().to_vec();
    for p in g0.productions() {
        prods.push(Production {
            lhs: Letter(p.lhs.0 + n),
            terminal: p.terminal,
            rhs: p.rhs.iter().map(|l| Letter(l.0 + n)).collect(),
        });
    }
    Grammar::new(g0.terminals().clone(), v, prods)
}

/// `[p ω q]` over the variables of `pda_to_grammar(pda)`.
pub fn config_polynomial(pda: &Pda, vars: &Arc<Alphabet>, p: u32, stack: &[u32], q: u32) -> Series {
    let nq = pda.states.len() as u32;
    let nz = pda.stack_symbols.len() as u32;
    // key: (symbols read, current state) or dead
    explore(
        vars,
        Some((0usize, p)),
        |key, l| {
            let (k, r) = (*key)?;
            let z = *stack.get(k)?;
            let (from, top, to) = (l.0 / (nz * nq), (l.0 / nq) % nz, l.0 % nq);
            (from == r && top == z).then_some((k + 1, to))
        },
        |key| *key == Some((stack.len(), q)),
    )
}

/// A bi-rooted normalized deterministic pda with its grammars.
#[derive(Clone, Debug)]
pub struct PdaPipeline {
    pub pda: Pda,
    pub gm: Grammar,
    pub reduced: Reduced,
    pub g: Grammar,
    qbar: u32,
}

impl PdaPipeline {
    pub fn new(pda: Pda) -> Result<PdaPipeline> {
        let qbar = pda.final_state().ok_or_else(|| Error::NotBirooted("need exactly one final state".into()))?;
        if pda.rules.iter().any(|r| r.from == qbar && r.input.is_some()) {
            return Err(Error::NotBirooted("the final state has input moves".into()));
        }
        let gm = pda_to_grammar(&pda)?;
        let reduced = reduce_grammar(&gm)?;
        let g = with_marked_copies(&reduced.grammar)?;
        Ok(PdaPipeline { pda, gm, reduced, g, qbar })
    }

    pub fn g0(&self) -> &Grammar {
        &self.reduced.grammar
    }

    pub fn qbar(&self) -> u32 {
        self.qbar
    }

    /// `θ(qω) = φ0([q ω q̄])` over the unmarked variables of `g0`.
    pub fn theta0(&self, c: &Config) -> Series {
        let poly = config_polynomial(&self.pda, self.gm.variables(), c.state, &c.stack, self.qbar);
        self.reduced.apply(&poly)
    }

    /// `θ` viewed over the variables of the marked grammar `g`.
    pub fn theta(&self, c: &Config) -> Series {
        self.theta0(c).substitute(self.g.variables(), |l| Subst::To(l))
    }

    /// Terminal letter of a pda input letter.
    pub fn terminal(&self, x: u32) -> Letter {
        self.g.terminals().lookup(&self.pda.input[x as usize]).expect("pda input letter")
    }

    pub fn terminal_word(&self, w: &[u32]) -> Vec<Letter> {
        w.iter().map(|&x| self.terminal(x)).collect()
    }
}
