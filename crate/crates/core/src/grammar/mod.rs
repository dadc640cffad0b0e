//! Greibach-normal-form grammars over a structured variable alphabet, the
//! right action of terminal words on series, and pushdown automata.

mod build;
pub mod pda;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::alphabet::{Alphabet, Letter};
use crate::error::{Error, Result};
use crate::series::{Series, SeriesVector};

pub use build::{config_polynomial, pda_to_grammar, reduce_grammar, with_marked_copies, PdaPipeline, Reduced};
pub use pda::{Condition, ConditionCheck, Config, NormalReport, Pda, Rule};

/// `lhs -> terminal rhs`; `terminal == None` only for the ε-productions of
/// a pda grammar before reduction, whose `rhs` is then empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Production {
    pub lhs: Letter,
    pub terminal: Option<Letter>,
    pub rhs: Vec<Letter>,
}

#[derive(Clone, Debug)]
pub struct Grammar {
    terminals: Arc<Alphabet>,
    variables: Arc<Alphabet>,
    productions: Vec<Production>,
    /// `v * |X| + x` -> right-hand sides of `v -> x rhs`.
    rhs_index: Vec<Vec<Vec<Letter>>>,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        *self.terminals == *other.terminals
            && *self.variables == *other.variables
            && self.productions == other.productions
    }
}

impl Grammar {
    /// The terminal alphabet's classes are the fibres of ψ.
    pub fn new(terminals: Arc<Alphabet>, variables: Arc<Alphabet>, productions: Vec<Production>) -> Result<Grammar> {
        let nx = terminals.len();
        let mut rhs_index = vec![Vec::new(); variables.len() * nx];
        for p in &productions {
            let bad = p.lhs.index() >= variables.len()
                || p.rhs.iter().any(|v| v.index() >= variables.len())
                || p.terminal.is_some_and(|x| x.index() >= nx);
            if bad {
                return Err(Error::Input("production refers to an unknown symbol".into()));
            }
            if p.terminal.is_none() && !p.rhs.is_empty() {
                return Err(Error::Input("ε-productions must have an empty right-hand side".into()));
            }
            if let Some(x) = p.terminal {
                rhs_index[p.lhs.index() * nx + x.index()].push(p.rhs.clone());
            }
        }
        Ok(Grammar { terminals, variables, productions, rhs_index })
    }

    pub fn terminals(&self) -> &Arc<Alphabet> {
        &self.terminals
    }

    pub fn variables(&self) -> &Arc<Alphabet> {
        &self.variables
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    /// Right-hand sides `w` of the productions `v -> x w`.
    pub fn rhs(&self, v: Letter, x: Letter) -> &[Vec<Letter>] {
        &self.rhs_index[v.index() * self.terminals.len() + x.index()]
    }

    pub fn has_eps_productions(&self) -> bool {
        self.productions.iter().any(|p| p.terminal.is_none())
    }

    /// `H_{v,x} = Σ_{(v,h)∈P} h • x`.
    pub fn h(&self, v: Letter, x: Letter) -> Series {
        let a = &self.variables;
        self.rhs(v, x).iter().fold(Series::empty(a), |acc, w| acc.sum(&Series::word(a, w)))
    }

    /// Vectors `(H_{E_1,x}, …, H_{E_m,x})` for every class and terminal.
    pub fn class_vectors(&self) -> Vec<(usize, Letter, SeriesVector)> {
        let mut out = Vec::new();
        for (c, class) in self.variables.classes().iter().enumerate() {
            for x in self.terminals.letters() {
                let entries = class.iter().map(|&v| self.h(v, x)).collect();
                out.push((c, x, SeriesVector::from_entries(self.variables.clone(), entries)));
            }
        }
        out
    }

    /// Strict determinism with respect to the variable alphabet's partition.
    pub fn check_strict_deterministic(&self) -> Result<()> {
        for (c, x, v) in self.class_vectors() {
            if !v.is_deterministic() {
                let class = self.variables.class(c);
                let names: Vec<&str> = class.iter().map(|&l| self.variables.name(l)).collect();
                return Err(Error::Input(format!(
                    "class {{{}}} on `{}` gives the non-deterministic vector {v}",
                    names.join(", "),
                    self.terminals.name(x)
                )));
            }
        }
        Ok(())
    }

    pub fn is_strict_deterministic(&self) -> bool {
        self.check_strict_deterministic().is_ok()
    }

    /// Maximal norm of `(E_1..E_m) ⊙ x` over classes and terminals.
    pub fn compute_k0(&self) -> usize {
        self.class_vectors().iter().map(|(_, _, v)| v.norm()).max().unwrap_or(1)
    }

    /// `S ⊙ x = Σ_v H_{v,x} · (S • v)`.
    pub fn act_letter(&self, s: &Series, x: Letter) -> Series {
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        enum Item {
            Word { v: u32, k: u32, pos: u32 },
            At(u32),
        }
        let after = |v: u32| s.next(0, Letter(v));
        let norm = |it: Item| -> Option<Item> {
            match it {
                Item::Word { v, k, pos } => {
                    let w = &self.rhs(Letter(v), x)[k as usize];
                    if pos as usize == w.len() {
                        let q = after(v);
                        (!s.is_dead_state(q)).then_some(Item::At(q))
                    } else {
                        Some(it)
                    }
                }
                Item::At(q) => (!s.is_dead_state(q)).then_some(it),
            }
        };
        let mut start = BTreeSet::new();
        for v in self.variables.letters() {
            if s.is_dead_state(after(v.0)) {
                continue;
            }
            for k in 0..self.rhs(v, x).len() {
                if let Some(it) = norm(Item::Word { v: v.0, k: k as u32, pos: 0 }) {
                    start.insert(it);
                }
            }
        }
        crate::series::explore(
            &self.variables,
            start,
            |set, l| {
                set.iter()
                    .filter_map(|it| match *it {
                        Item::Word { v, k, pos } => {
                            let w = &self.rhs(Letter(v), x)[k as usize];
                            (w[pos as usize] == l).then(|| norm(Item::Word { v, k, pos: pos + 1 })).flatten()
                        }
                        Item::At(q) => norm(Item::At(s.next(q, l))),
                    })
                    .collect()
            },
            |set| set.iter().any(|it| matches!(*it, Item::At(q) if s.accepts_at(q))),
        )
    }

    pub fn act_series(&self, s: &Series, u: &[Letter]) -> Series {
        u.iter().fold(s.clone(), |acc, &x| if acc.is_empty() { acc } else { self.act_letter(&acc, x) })
    }

    /// `S ⊙ u`, entrywise.
    pub fn action(&self, s: &SeriesVector, u: &[Letter]) -> Result<SeriesVector> {
        if let Some(x) = u.iter().find(|x| x.index() >= self.terminals.len()) {
            return Err(Error::UnknownTerminal(format!("#{}", x.0)));
        }
        Ok(s.map(|e| self.act_series(e, u)))
    }

    /// Action of a terminal word given by names.
    pub fn action_str(&self, s: &SeriesVector, word: &[&str]) -> Result<SeriesVector> {
        let u = word
            .iter()
            .map(|n| self.terminals.lookup(n).ok_or_else(|| Error::UnknownTerminal(n.to_string())))
            .collect::<Result<Vec<_>>>()?;
        self.action(s, &u)
    }

    /// Whether `w ∈ φ(S)`, for an ε-free grammar.
    pub fn generates(&self, s: &Series, w: &[Letter]) -> bool {
        let mut memo: HashMap<(u32, usize), Vec<usize>> = HashMap::new();
        let mut seen: BTreeSet<(u32, usize)> = BTreeSet::new();
        let mut stack = vec![(0u32, 0usize)];
        seen.insert((0, 0));
        while let Some((q, i)) = stack.pop() {
            if i == w.len() && s.accepts_at(q) {
                return true;
            }
            if i == w.len() {
                continue;
            }
            for v in s.live_letters(q).collect::<Vec<_>>() {
                let q2 = s.next(q, v);
                for j in self.span(v, i, w, &mut memo) {
                    if seen.insert((q2, j)) {
                        stack.push((q2, j));
                    }
                }
            }
        }
        false
    }

    /// Positions `j` with `v ⇒* w[i..j]`.
    fn span(&self, v: Letter, i: usize, w: &[Letter], memo: &mut HashMap<(u32, usize), Vec<usize>>) -> Vec<usize> {
        if let Some(r) = memo.get(&(v.0, i)) {
            return r.clone();
        }
        let mut out = BTreeSet::new();
        if i < w.len() {
            for rhs in self.rhs(v, w[i]).to_vec() {
                let mut ends: BTreeSet<usize> = [i + 1].into_iter().collect();
                for &u in &rhs {
                    let mut next = BTreeSet::new();
                    for &e in &ends {
                        next.extend(self.span(u, e, w, memo));
                    }
                    ends = next;
                    if ends.is_empty() {
                        break;
                    }
                }
                out.extend(ends);
            }
        }
        let r: Vec<usize> = out.into_iter().collect();
        memo.insert((v.0, i), r.clone());
        r
    }

    /// `S ↑(u) S ⊙ u`: every head letter survives `u` as a non-unit.
    pub fn is_stacking(&self, s: &SeriesVector, u: &[Letter]) -> Result<bool> {
        let (head, phi) = s.decompose_head()?;
        let mut sum = SeriesVector::empty(self.variables(), s.width());
        for (k, &e) in head.iter().enumerate() {
            let eu = self.act_series(&Series::letter(&self.variables, e), u);
            if eu.is_empty() || eu.is_epsilon() {
                return Ok(false);
            }
            sum = sum.sum(&phi.row(k).left_scale(&eu))?;
        }
        Ok(sum == self.action(s, u)?)
    }

    /// Parses the grammar block format:
    ///
    /// ```text
    /// terminals: x y
    /// psi: x->a y->a
    /// class: A B
    /// A -> x A B | y
    /// ```
    pub fn parse(text: &str) -> Result<Grammar> {
        Self::parse_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
    }

    pub(crate) fn parse_lines<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Grammar> {
        let mut terminals: Vec<String> = Vec::new();
        let mut psi: HashMap<String, String> = HashMap::new();
        let mut classes: Vec<Vec<String>> = Vec::new();
        let mut rules: Vec<(usize, String, Vec<Vec<String>>)> = Vec::new();
        let mut order: Vec<String> = Vec::new();
        for (ln, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") || line.starts_with("# ") || line == "#" {
                continue;
            }
            if let Some((lhs, rhs)) = line.split_once("->").filter(|(l, _)| !l.contains(':')) {
                let lhs = lhs.trim();
                if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                    return Err(Error::parse(ln, 1, "expected a single variable before `->`"));
                }
                let alts: Vec<Vec<String>> = rhs
                    .split('|')
                    .map(|a| a.split_whitespace().map(str::to_string).collect::<Vec<_>>())
                    .collect();
                if let Some(pos) = alts.iter().position(Vec::is_empty) {
                    return Err(Error::parse(ln, 1, format!("alternative {} is empty (write `eps`)", pos + 1)));
                }
                order.push(lhs.to_string());
                rules.push((ln, lhs.to_string(), alts));
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(ln, 1, "expected `key: ...` or a production"))?;
            let toks = rest.split_whitespace().map(str::to_string);
            match key.trim() {
                "terminals" => terminals.extend(toks),
                "class" => classes.push(toks.collect()),
                "psi" => {
                    for t in toks {
                        let (x, y) =
                            t.split_once("->").ok_or_else(|| Error::parse(ln, 1, "psi entries look like x->y"))?;
                        psi.insert(x.to_string(), y.to_string());
                    }
                }
                other => return Err(Error::parse(ln, 1, format!("unknown header `{other}`"))),
            }
        }
        let term_set: BTreeSet<&String> = terminals.iter().collect();
        // variables: declared classes first, then singletons by first appearance
        let mut declared: BTreeSet<String> = classes.iter().flatten().cloned().collect();
        for (_, _, alts) in &rules {
            for a in alts {
                for t in a.iter().skip(1) {
                    order.push(t.clone());
                }
            }
        }
        for v in order {
            if term_set.contains(&v) || v == "eps" {
                continue;
            }
            if declared.insert(v.clone()) {
                classes.push(vec![v]);
            }
        }
        let mut tclasses: Vec<(String, Vec<String>)> = Vec::new();
        for t in &terminals {
            let img = psi.get(t).cloned().unwrap_or_else(|| t.clone());
            match tclasses.iter_mut().find(|(y, _)| *y == img) {
                Some((_, c)) => c.push(t.clone()),
                None => tclasses.push((img, vec![t.clone()])),
            }
        }
        if let Some(x) = psi.keys().find(|x| !term_set.contains(x)) {
            return Err(Error::UnknownTerminal(x.clone()));
        }
        let talpha = Arc::new(Alphabet::from_classes(
            &tclasses.into_iter().map(|(_, c)| c).collect::<Vec<_>>(),
        )?);
        let valpha = Arc::new(Alphabet::from_classes(&classes)?);
        let mut prods = Vec::new();
        for (ln, lhs, alts) in rules {
            let l = valpha.letter(&lhs)?;
            for a in alts {
                if a.len() == 1 && a[0] == "eps" {
                    prods.push(Production { lhs: l, terminal: None, rhs: vec![] });
                    continue;
                }
                let x = talpha
                    .lookup(&a[0])
                    .ok_or_else(|| Error::parse(ln, 1, format!("`{}` is not a terminal", a[0])))?;
                let rhs = a[1..]
                    .iter()
                    .map(|n| {
                        if term_set.contains(n) {
                            Err(Error::parse(ln, 1, format!("terminal `{n}` after the first position")))
                        } else {
                            valpha.letter(n)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                prods.push(Production { lhs: l, terminal: Some(x), rhs });
            }
        }
        Grammar::new(talpha, valpha, prods)
    }

    /// ψ-image name of a terminal: the first letter of its class.
    pub fn psi_class(&self, x: Letter) -> usize {
        self.terminals.class_of(x)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let t: Vec<&str> = self.terminals.letters().map(|x| self.terminals.name(x)).collect();
        out.push_str(&format!("terminals: {}\n", t.join(" ")));
        let psi: Vec<String> = self
            .terminals
            .classes()
            .iter()
            .filter(|c| c.len() > 1)
            .flat_map(|c| c.iter().map(move |&x| (x, c[0])))
            .map(|(x, r)| format!("{}->{}", self.terminals.name(x), self.terminals.name(r)))
            .collect();
        if !psi.is_empty() {
            out.push_str(&format!("psi: {}\n", psi.join(" ")));
        }
        for c in self.variables.classes() {
            let names: Vec<&str> = c.iter().map(|&v| self.variables.name(v)).collect();
            out.push_str(&format!("class: {}\n", names.join(" ")));
        }
        for v in self.variables.letters() {
            let alts: Vec<String> = self
                .productions
                .iter()
                .filter(|p| p.lhs == v)
                .map(|p| self.format_alt(p))
                .collect();
            if !alts.is_empty() {
                out.push_str(&format!("{} -> {}\n", self.variables.name(v), alts.join(" | ")));
            }
        }
        out
    }

    fn format_alt(&self, p: &Production) -> String {
        match p.terminal {
            None => "eps".into(),
            Some(x) => {
                let mut s = self.terminals.name(x).to_string();
                for &v in &p.rhs {
                    s.push(' ');
                    s.push_str(self.variables.name(v));
                }
                s
            }
        }
    }

    pub fn format_production(&self, p: &Production) -> String {
        format!("{} -> {}", self.variables.name(p.lhs), self.format_alt(p))
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
