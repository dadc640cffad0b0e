//! Bounded bisimulation games between deterministic series vectors under
//! the action of a grammar, with explicit word-relation certificates.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::alphabet::{Alphabet, Letter};
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::series::{Series, SeriesVector};

pub type Word = Vec<Letter>;

/// A finite relation on terminal words.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordRelation {
    pub pairs: BTreeSet<(Word, Word)>,
}

impl WordRelation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Word, Word)>) -> Self {
        WordRelation { pairs: pairs.into_iter().collect() }
    }

    /// `Id ∩ X^{≤n} × X^{≤n}`.
    pub fn identity(terminals: &Alphabet, n: usize) -> Self {
        Self::from_pairs(words_up_to(terminals, n).into_iter().map(|w| (w.clone(), w)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, u: &[Letter], v: &[Letter]) -> bool {
        self.pairs.contains(&(u.to_vec(), v.to_vec()))
    }

    pub fn truncate(&self, n: usize) -> Self {
        Self::from_pairs(self.pairs.iter().filter(|(u, v)| u.len() <= n && v.len() <= n).cloned())
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_pairs(self.pairs.iter().chain(&other.pairs).cloned())
    }

    /// `{(u, w) | (u, v) ∈ self, (v, w) ∈ other}`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut by_left: HashMap<&Word, Vec<&Word>> = HashMap::new();
        for (v, w) in &other.pairs {
            by_left.entry(v).or_default().push(w);
        }
        let mut out = BTreeSet::new();
        for (u, v) in &self.pairs {
            if let Some(ws) = by_left.get(v) {
                for w in ws {
                    out.insert((u.clone(), (*w).clone()));
                }
            }
        }
        WordRelation { pairs: out }
    }

    pub fn inverse(&self) -> Self {
        Self::from_pairs(self.pairs.iter().map(|(u, v)| (v.clone(), u.clone())))
    }

    /// One pair per line, `u ~ u'`, letters separated by spaces, `.` for ε.
    pub fn to_text(&self, terminals: &Alphabet) -> String {
        let w = |u: &Word| {
            if u.is_empty() {
                ".".to_string()
            } else {
                u.iter().map(|&l| terminals.name(l)).collect::<Vec<_>>().join(" ")
            }
        };
        self.pairs.iter().map(|(u, v)| format!("{} ~ {}\n", w(u), w(v))).collect()
    }

    pub fn parse(text: &str, terminals: &Alphabet) -> Result<Self> {
        let mut out = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line.split_once('~').ok_or_else(|| Error::parse(i + 1, 1, "expected `u ~ u'`"))?;
            let word = |s: &str| -> Result<Word> {
                s.split_whitespace().filter(|t| *t != ".").map(|t| terminals.letter(t)).collect()
            };
            out.insert((word(a)?, word(b)?));
        }
        Ok(WordRelation { pairs: out })
    }
}

/// All words of length at most `n`, length-lexicographic.
pub fn words_up_to(terminals: &Alphabet, n: usize) -> Vec<Word> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Word> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &layer {
            for x in terminals.letters() {
                let mut w2 = w.clone();
                w2.push(x);
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// `ψ̄(x)`, with `x` first.
fn partners(terminals: &Alphabet, x: Letter) -> Vec<Letter> {
    let mut v = vec![x];
    v.extend(terminals.class(terminals.class_of(x)).iter().copied().filter(|&y| y != x));
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Divergence {
    Finite(usize),
    Infinite,
    /// No refutation up to this order; the game space did not close.
    AtLeast(usize),
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(n) => write!(f, "{n}"),
            Divergence::Infinite => write!(f, "infinite"),
            Divergence::AtLeast(n) => write!(f, "> {n}"),
        }
    }
}

/// A finite set of vector pairs closed under the game moves.
#[derive(Clone, Debug)]
pub struct ClosedCertificate {
    pub pairs: Vec<(SeriesVector, SeriesVector)>,
    /// Per pair: `(x, x', successor)` for forth moves and `(x'', x, successor)`
    /// for back moves.
    pub moves: Vec<Vec<(Letter, Letter, usize)>>,
}

impl ClosedCertificate {
    pub fn to_text(&self, terminals: &Alphabet) -> String {
        let mut out = String::new();
        for (i, (s, t)) in self.pairs.iter().enumerate() {
            out.push_str(&format!("pair {i}: {s} ~ {t}\n"));
            for &(x, y, j) in &self.moves[i] {
                out.push_str(&format!("  ({}, {}) -> {j}\n", terminals.name(x), terminals.name(y)));
            }
        }
        out
    }
}

/// Explored pairs of canonical vectors with monotone liveness bounds.
pub struct PairSpace<'g> {
    g: &'g Grammar,
    vecs: Vec<SeriesVector>,
    vec_ids: HashMap<SeriesVector, u32>,
    vec_succ: Vec<Vec<Option<u32>>>,
    pairs: Vec<(u32, u32)>,
    pair_ids: HashMap<(u32, u32), u32>,
    /// Alive at every order `≤ alive_to`.
    alive_to: Vec<usize>,
    /// Dead at every order `≥ dead_at`.
    dead_at: Vec<usize>,
}

impl<'g> PairSpace<'g> {
    pub fn new(g: &'g Grammar) -> Self {
        PairSpace {
            g,
            vecs: Vec::new(),
            vec_ids: HashMap::new(),
            vec_succ: Vec::new(),
            pairs: Vec::new(),
            pair_ids: HashMap::new(),
            alive_to: Vec::new(),
            dead_at: Vec::new(),
        }
    }

    pub fn grammar(&self) -> &Grammar {
        self.g
    }

    pub fn intern(&mut self, v: SeriesVector) -> u32 {
        if let Some(&id) = self.vec_ids.get(&v) {
            return id;
        }
        let id = self.vecs.len() as u32;
        self.vec_ids.insert(v.clone(), id);
        self.vecs.push(v);
        self.vec_succ.push(vec![None; self.g.terminals().len()]);
        id
    }

    pub fn vector(&self, id: u32) -> &SeriesVector {
        &self.vecs[id as usize]
    }

    fn succ_vec(&mut self, id: u32, x: Letter) -> u32 {
        if let Some(s) = self.vec_succ[id as usize][x.index()] {
            return s;
        }
        let v = self.vecs[id as usize].map(|e| self.g.act_letter(e, x));
        let s = self.intern(v);
        self.vec_succ[id as usize][x.index()] = Some(s);
        s
    }

    pub fn pair(&mut self, a: u32, b: u32) -> u32 {
        if let Some(&p) = self.pair_ids.get(&(a, b)) {
            return p;
        }
        let p = self.pairs.len() as u32;
        self.pairs.push((a, b));
        self.pair_ids.insert((a, b), p);
        let coherent = self.vecs[a as usize].unit_index() == self.vecs[b as usize].unit_index();
        self.alive_to.push(if a == b { usize::MAX } else if coherent { 0 } else { 0 });
        self.dead_at.push(if coherent { usize::MAX } else { 0 });
        p
    }

    pub fn pair_of(&mut self, s: &SeriesVector, t: &SeriesVector) -> u32 {
        let a = self.intern(s.clone());
        let b = self.intern(t.clone());
        self.pair(a, b)
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn coherent(&self, p: u32) -> bool {
        self.dead_at[p as usize] != 0
    }

    fn succ_pair(&mut self, p: u32, x: Letter, y: Letter) -> u32 {
        let (a, b) = self.pairs[p as usize];
        let a2 = self.succ_vec(a, x);
        let b2 = self.succ_vec(b, y);
        self.pair(a2, b2)
    }

    /// Whether an order-`k` certificate exists for pair `p`.
    pub fn alive(&mut self, p: u32, k: usize) -> bool {
        if k <= self.alive_to[p as usize] && self.dead_at[p as usize] > 0 {
            return true;
        }
        if k >= self.dead_at[p as usize] {
            return false;
        }
        let terms: Vec<Letter> = self.g.terminals().letters().collect();
        let mut ok = true;
        'outer: for &x in &terms {
            for back in [false, true] {
                let mut found = false;
                for y in partners(self.g.terminals(), x) {
                    let q = if back { self.succ_pair(p, y, x) } else { self.succ_pair(p, x, y) };
                    if self.alive(q, k - 1) {
                        found = true;
                        break;
                    }
                }
                if !found {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            self.alive_to[p as usize] = self.alive_to[p as usize].max(k);
        } else {
            self.dead_at[p as usize] = self.dead_at[p as usize].min(k);
        }
        ok
    }

    /// All game moves `(x, x', target)` and `(x'', x, target)` of pair `p`.
    fn all_moves(&mut self, p: u32) -> Vec<(Letter, Letter, u32)> {
        let terms: Vec<Letter> = self.g.terminals().letters().collect();
        let mut out = Vec::new();
        for &x in &terms {
            for y in partners(self.g.terminals(), x) {
                let q = self.succ_pair(p, x, y);
                out.push((x, y, q));
            }
        }
        out
    }

    /// The pairs reachable from `p`, if there are at most `limit` and no
    /// vector exceeds `CLOSURE_NORM_LIMIT`.
    pub fn closure(&mut self, p: u32, limit: usize) -> Option<Vec<u32>> {
        let mut seen: HashSet<u32> = [p].into_iter().collect();
        let mut order = vec![p];
        let mut i = 0;
        while i < order.len() {
            let q = order[i];
            i += 1;
            if !self.coherent(q) {
                continue;
            }
            for (_, _, r) in self.all_moves(q) {
                if seen.insert(r) {
                    let (a, b) = self.pairs[r as usize];
                    if order.len() >= limit
                        || self.vecs[a as usize].norm().max(self.vecs[b as usize].norm()) > CLOSURE_NORM_LIMIT
                    {
                        return None;
                    }
                    order.push(r);
                }
            }
        }
        Some(order)
    }

    /// Exact status on a closed pair set: survivors of the greatest fixpoint
    /// and, for the others, the least order at which they die.
    fn solve_closed(&mut self, set: &[u32]) -> HashMap<u32, Option<usize>> {
        let moves: HashMap<u32, Vec<(Letter, Letter, u32)>> =
            set.iter().map(|&q| (q, if self.coherent(q) { self.all_moves(q) } else { vec![] })).collect();
        let terms: Vec<Letter> = self.g.terminals().letters().collect();
        let mut alive: HashSet<u32> = set.iter().copied().filter(|&q| self.coherent(q)).collect();
        let mut died: HashMap<u32, Option<usize>> = HashMap::new();
        for &q in set {
            if !alive.contains(&q) {
                died.insert(q, Some(0));
            }
        }
        let mut k = 0;
        loop {
            k += 1;
            let dying: Vec<u32> = alive
                .iter()
                .copied()
                .filter(|q| {
                    let m = &moves[q];
                    !terms.iter().all(|&x| {
                        m.iter().any(|&(a, _, r)| a == x && alive.contains(&r))
                            && m.iter().any(|&(_, b, r)| b == x && alive.contains(&r))
                    })
                })
                .collect();
            if dying.is_empty() {
                break;
            }
            for q in dying {
                alive.remove(&q);
                died.insert(q, Some(k));
            }
        }
        for q in alive {
            died.insert(q, None);
        }
        for (&q, &d) in &died {
            match d {
                Some(n) => {
                    self.dead_at[q as usize] = self.dead_at[q as usize].min(n);
                    if n > 0 {
                        self.alive_to[q as usize] = self.alive_to[q as usize].max(n - 1);
                    }
                }
                None => self.alive_to[q as usize] = usize::MAX,
            }
        }
        died
    }

    pub fn divergence(&mut self, p: u32, cap: usize, closure_limit: usize) -> Divergence {
        for n in 0..=cap {
            if !self.alive(p, n) {
                return Divergence::Finite(n);
            }
        }
        match self.closure(p, closure_limit) {
            Some(set) => match self.solve_closed(&set)[&p] {
                Some(n) => Divergence::Finite(n),
                None => Divergence::Infinite,
            },
            None => Divergence::AtLeast(cap),
        }
    }

    /// Closed certificate for `p` when its reachable set closes and survives.
    pub fn closed_certificate(&mut self, p: u32, limit: usize) -> Option<ClosedCertificate> {
        let set = self.closure(p, limit)?;
        let status = self.solve_closed(&set);
        status[&p].is_none().then_some(())?;
        let keep: Vec<u32> = {
            let mut seen: HashSet<u32> = [p].into_iter().collect();
            let mut order = vec![p];
            let mut i = 0;
            while i < order.len() {
                let q = order[i];
                i += 1;
                for (_, _, r) in self.chosen_moves(q, &status) {
                    if seen.insert(r) {
                        order.push(r);
                    }
                }
            }
            order
        };
        let index: HashMap<u32, usize> = keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut pairs = Vec::new();
        let mut moves = Vec::new();
        for &q in &keep {
            let (a, b) = self.pairs[q as usize];
            pairs.push((self.vecs[a as usize].clone(), self.vecs[b as usize].clone()));
            moves.push(self.chosen_moves(q, &status).into_iter().map(|(x, y, r)| (x, y, index[&r])).collect());
        }
        Some(ClosedCertificate { pairs, moves })
    }

    fn chosen_moves(&mut self, q: u32, status: &HashMap<u32, Option<usize>>) -> Vec<(Letter, Letter, u32)> {
        let m = self.all_moves(q);
        let ok = |r: &u32| status.get(r) == Some(&None);
        let mut out = Vec::new();
        for x in self.g.terminals().letters() {
            if let Some(&mv) = m.iter().find(|(a, _, r)| *a == x && ok(r)) {
                out.push(mv);
            }
            if let Some(&mv) = m.iter().find(|(_, b, r)| *b == x && ok(r)) {
                if !out.contains(&mv) {
                    out.push(mv);
                }
            }
        }
        out
    }

    /// Materializes an order-`n` word certificate for `p`, if one exists.
    pub fn certificate(&mut self, p: u32, n: usize) -> Option<WordRelation> {
        if !self.alive(p, n) {
            return None;
        }
        let mut rel = BTreeSet::new();
        let mut seen: HashSet<(Word, Word)> = HashSet::new();
        let mut queue: VecDeque<(Word, Word, u32)> = VecDeque::new();
        queue.push_back((vec![], vec![], p));
        seen.insert((vec![], vec![]));
        let terms: Vec<Letter> = self.g.terminals().letters().collect();
        while let Some((u, v, q)) = queue.pop_front() {
            let depth = u.len();
            rel.insert((u.clone(), v.clone()));
            if depth == n {
                continue;
            }
            for &x in &terms {
                for back in [false, true] {
                    for y in partners(self.g.terminals(), x) {
                        let (a, b) = if back { (y, x) } else { (x, y) };
                        let r = self.succ_pair(q, a, b);
                        if self.alive(r, n - depth - 1) {
                            let mut u2 = u.clone();
                            u2.push(a);
                            let mut v2 = v.clone();
                            v2.push(b);
                            if seen.insert((u2.clone(), v2.clone())) {
                                queue.push_back((u2, v2, r));
                            }
                            break;
                        }
                    }
                }
            }
        }
        Some(WordRelation { pairs: rel })
    }
}

fn check_widths(s: &SeriesVector, t: &SeriesVector) -> Result<()> {
    if s.width() != t.width() {
        return Err(Error::Dimension(format!("widths {} and {}", s.width(), t.width())));
    }
    Ok(())
}

/// Order-`n` w-ψ̄-bisimulation between `s` and `t`, if one exists.
pub fn order_n_bisim(g: &Grammar, s: &SeriesVector, t: &SeriesVector, n: usize) -> Result<Option<WordRelation>> {
    check_widths(s, t)?;
    let mut space = PairSpace::new(g);
    let p = space.pair_of(s, t);
    Ok(space.certificate(p, n))
}

pub const DEFAULT_CLOSURE_LIMIT: usize = 600;

/// Closure gives up once a pair's vectors exceed this norm.
pub const CLOSURE_NORM_LIMIT: usize = 48;

/// Least order without a certificate, `Infinite` when the reachable pair
/// space closes and survives, `AtLeast(cap)` otherwise.
pub fn divergence(g: &Grammar, s: &SeriesVector, t: &SeriesVector, cap: usize) -> Result<Divergence> {
    check_widths(s, t)?;
    let mut space = PairSpace::new(g);
    let p = space.pair_of(s, t);
    Ok(space.divergence(p, cap, DEFAULT_CLOSURE_LIMIT))
}

/// Checks the σ-bisimulation clauses literally on every pair.
pub fn verify_closed(g: &Grammar, cert: &ClosedCertificate) -> bool {
    let index: HashMap<(&SeriesVector, &SeriesVector), usize> =
        cert.pairs.iter().enumerate().map(|(i, (a, b))| ((a, b), i)).collect();
    cert.pairs.iter().all(|(s, t)| {
        if s.unit_index() != t.unit_index() {
            return false;
        }
        g.terminals().letters().all(|x| {
            let part = partners(g.terminals(), x);
            let sx = g.action(s, &[x]).expect("terminal");
            let tx = g.action(t, &[x]).expect("terminal");
            let forth = part.iter().any(|&y| {
                let ty = g.action(t, &[y]).expect("terminal");
                index.contains_key(&(&sx, &ty))
            });
            let back = part.iter().any(|&y| {
                let sy = g.action(s, &[y]).expect("terminal");
                index.contains_key(&(&sy, &tx))
            });
            forth && back
        })
    })
}

/// Checks conditions (1′)(2′)(3)(4) and `R ⊆ ψ̄` at order `n`; returns the
/// first violated condition.
pub fn check_wbisim(g: &Grammar, r: &WordRelation, s: &SeriesVector, t: &SeriesVector, n: usize) -> std::result::Result<(), String> {
    let term = g.terminals();
    for (u, v) in &r.pairs {
        if u.len() != v.len() || u.iter().zip(v).any(|(&a, &b)| !term.same_class(a, b)) {
            return Err(format!("pair ({}, {}) is not in ψ̄", term.format_word(u), term.format_word(v)));
        }
        if u.len() > n {
            return Err(format!("pair ({}, {}) is longer than {n}", term.format_word(u), term.format_word(v)));
        }
    }
    let dom: HashSet<&Word> = r.pairs.iter().map(|(u, _)| u).collect();
    let im: HashSet<&Word> = r.pairs.iter().map(|(_, v)| v).collect();
    for w in words_up_to(term, n) {
        if !dom.contains(&w) || !im.contains(&w) {
            return Err(format!("totality fails at {}", term.format_word(&w)));
        }
    }
    for (u, v) in &r.pairs {
        if !u.is_empty() && !r.contains(&u[..u.len() - 1], &v[..v.len() - 1]) {
            return Err(format!("prefix fails at ({}, {})", term.format_word(u), term.format_word(v)));
        }
        if u.len() < n {
            for x in term.letters() {
                let part = partners(term, x);
                let ext = |a: Letter, b: Letter| {
                    let mut u2 = u.clone();
                    u2.push(a);
                    let mut v2 = v.clone();
                    v2.push(b);
                    r.contains(&u2, &v2)
                };
                if !part.iter().any(|&y| ext(x, y)) || !part.iter().any(|&y| ext(y, x)) {
                    return Err(format!(
                        "extension fails at ({}, {}) on {}",
                        term.format_word(u),
                        term.format_word(v),
                        term.name(x)
                    ));
                }
            }
        }
    }
    let mut memo_s: HashMap<&Word, Option<usize>> = HashMap::new();
    let mut memo_t: HashMap<&Word, Option<usize>> = HashMap::new();
    for (u, v) in &r.pairs {
        let a = *memo_s.entry(u).or_insert_with(|| g.action(s, u).expect("terminal").unit_index());
        let b = *memo_t.entry(v).or_insert_with(|| g.action(t, v).expect("terminal").unit_index());
        if a != b {
            return Err(format!("coherence fails at ({}, {})", term.format_word(u), term.format_word(v)));
        }
    }
    Ok(())
}

pub fn verify_wbisim(g: &Grammar, r: &WordRelation, s: &SeriesVector, t: &SeriesVector, n: usize) -> bool {
    check_wbisim(g, r, s, t, n).is_ok()
}

/// Unit index reached along each prefix of `u`: the first prefix length
/// `i` with `S ⊙ u[..i]` a unit, and that unit.
fn first_unit(g: &Grammar, s: &SeriesVector, u: &[Letter]) -> Option<(usize, usize)> {
    let mut cur = s.clone();
    for i in 0..=u.len() {
        if let Some(j) = cur.unit_index() {
            return Some((i, j));
        }
        if i < u.len() {
            cur = g.action(&cur, &u[i..i + 1]).expect("terminal");
        }
    }
    None
}

/// `<S|R>`, a certificate for `(S·T, S′·T)` from one for `(S, S′)`.
pub fn right_product(g: &Grammar, s: &SeriesVector, r: &WordRelation, n: usize) -> WordRelation {
    let mut out = BTreeSet::new();
    let suffixes = words_up_to(g.terminals(), n);
    for (u, v) in &r.pairs {
        match first_unit(g, s, u) {
            None => {
                out.insert((u.clone(), v.clone()));
            }
            Some((i, _)) if i == u.len() => {
                for w in suffixes.iter().take_while(|w| u.len() + w.len() <= n) {
                    let mut u2 = u.clone();
                    u2.extend(w);
                    let mut v2 = v.clone();
                    v2.extend(w);
                    out.insert((u2, v2));
                }
            }
            Some(_) => {}
        }
    }
    WordRelation { pairs: out }.truncate(n)
}

/// `<S,R>`, a certificate for `(S·T, S·T′)` from certificates `family[i]`
/// for the rows `(T_i, T′_i)`.
pub fn left_product(g: &Grammar, s: &SeriesVector, family: &[WordRelation], n: usize) -> Result<WordRelation> {
    if family.len() != s.width() {
        return Err(Error::Dimension(format!("{} relations for width {}", family.len(), s.width())));
    }
    let mut out = BTreeSet::new();
    for u in words_up_to(g.terminals(), n) {
        match first_unit(g, s, &u) {
            None => {
                out.insert((u.clone(), u.clone()));
            }
            Some((i, j)) if i == u.len() => {
                for (w, w2) in &family[j].pairs {
                    if u.len() + w.len() <= n {
                        let mut a = u.clone();
                        a.extend(w);
                        let mut b = u.clone();
                        b.extend(w2);
                        out.insert((a, b));
                    }
                }
            }
            Some(_) => {}
        }
    }
    Ok(WordRelation { pairs: out })
}

/// `R^{<S1,*>}`: from a certificate for `(S1·T + S, T)` one for `(S1*·S, T)`.
/// Returns the truncated union when it verifies, else `R_n`, which is
/// itself an order-`n` certificate because `S1` has no ε.
pub fn star_product(
    g: &Grammar,
    s1: &Series,
    s: &SeriesVector,
    t: &SeriesVector,
    r: &WordRelation,
    n: usize,
) -> Result<WordRelation> {
    if s1.has_epsilon() {
        return Err(Error::Input("S1 must not contain ε".into()));
    }
    check_widths(s, t)?;
    let a = g.variables();
    let mut head = vec![s1.clone()];
    head.extend(s.entries().iter().cloned());
    let s1s = SeriesVector::from_entries(a.clone(), head);
    let mut rk = r.clone();
    let mut ks = vec![rk.clone()];
    for _ in 0..n {
        let family = vec![rk.clone(); s.width() + 1];
        rk = left_product(g, &s1s, &family, n)?.compose(r);
        ks.push(rk.clone());
    }
    let mut union = WordRelation::new();
    for (k, rel) in ks.iter().enumerate() {
        union = union.union(&rel.truncate(k));
    }
    let target = SeriesVector::scalar(s1.star()).mul(&crate::series::SeriesMatrix::from_rows(
        a.clone(),
        vec![s.clone()],
        s.width(),
    )?)?;
    if verify_wbisim(g, &union, &target, t, n) {
        Ok(union)
    } else {
        Ok(ks.pop().expect("at least R_0"))
    }
}

/// The greatest order-`n` relation obtained by pruning every word pair of
/// `ψ̄ ∩ X^{≤n}²` that violates coherence, prefix or extension. An order-`n`
/// certificate exists iff the result contains `(ε, ε)`.
pub fn greatest_relation(g: &Grammar, s: &SeriesVector, t: &SeriesVector, n: usize) -> WordRelation {
    let term = g.terminals();
    let words = words_up_to(term, n);
    let unit_s: HashMap<&Word, Option<usize>> =
        words.iter().map(|w| (w, g.action(s, w).expect("terminal").unit_index())).collect();
    let unit_t: HashMap<&Word, Option<usize>> =
        words.iter().map(|w| (w, g.action(t, w).expect("terminal").unit_index())).collect();
    let mut rel: BTreeSet<(Word, Word)> = BTreeSet::new();
    for u in &words {
        for v in &words {
            if u.len() == v.len() && u.iter().zip(v).all(|(&a, &b)| term.same_class(a, b)) && unit_s[u] == unit_t[v] {
                rel.insert((u.clone(), v.clone()));
            }
        }
    }
    loop {
        let r = WordRelation { pairs: rel.clone() };
        let bad: Vec<(Word, Word)> = rel
            .iter()
            .filter(|(u, v)| {
                let prefix_ok = u.is_empty() || r.contains(&u[..u.len() - 1], &v[..v.len() - 1]);
                let ext_ok = u.len() >= n
                    || term.letters().all(|x| {
                        let part = partners(term, x);
                        let ext = |a: Letter, b: Letter| {
                            let mut u2 = u.clone();
                            u2.push(a);
                            let mut v2 = v.clone();
                            v2.push(b);
                            r.contains(&u2, &v2)
                        };
                        part.iter().any(|&y| ext(x, y)) && part.iter().any(|&y| ext(y, x))
                    });
                !(prefix_ok && ext_ok)
            })
            .cloned()
            .collect();
        if bad.is_empty() {
            return r;
        }
        for b in bad {
            rel.remove(&b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::parse_vector;

    fn ab() -> Grammar {
        Grammar::parse("terminals: x y\nclass: A B\nA -> x A | y\nB -> x B | y\nC -> x\nD -> y\n").unwrap()
    }

    fn vec(g: &Grammar, s: &str) -> SeriesVector {
        parse_vector(s, g.variables(), 1, 1).unwrap()
    }

    #[test]
    fn identical_pairs_are_infinite() {
        let g = ab();
        let a = vec(&g, "A");
        assert_eq!(divergence(&g, &a, &a, 5).unwrap(), Divergence::Infinite);
        let r = order_n_bisim(&g, &a, &a, 3).unwrap().unwrap();
        assert_eq!(r, WordRelation::identity(g.terminals(), 3));
    }

    #[test]
    fn bisimilar_loops() {
        let g = ab();
        let (a, b) = (vec(&g, "A"), vec(&g, "B"));
        assert_eq!(divergence(&g, &a, &b, 5).unwrap(), Divergence::Infinite);
        let mut space = PairSpace::new(&g);
        let p = space.pair_of(&a, &b);
        let cert = space.closed_certificate(p, 100).unwrap();
        assert!(verify_closed(&g, &cert));
    }

    #[test]
    fn unit_against_move() {
        let g = ab();
        let one = vec(&g, "1");
        let a = vec(&g, "A");
        assert_eq!(divergence(&g, &one, &a, 5).unwrap(), Divergence::Finite(0));
        assert!(order_n_bisim(&g, &one, &a, 0).unwrap().is_none());
    }

    #[test]
    fn different_letters_diverge_at_one() {
        let g = ab();
        let (c, d) = (vec(&g, "C"), vec(&g, "D"));
        assert_eq!(divergence(&g, &c, &d, 5).unwrap(), Divergence::Finite(1));
    }

    #[test]
    fn verifier_rejects_missing_root() {
        let g = ab();
        let a = vec(&g, "A");
        let mut r = WordRelation::identity(g.terminals(), 2);
        assert!(verify_wbisim(&g, &r, &a, &a, 2));
        r.pairs.remove(&(vec![], vec![]));
        assert!(!verify_wbisim(&g, &r, &a, &a, 2));
    }

    #[test]
    fn text_round_trip() {
        let g = ab();
        let r = WordRelation::identity(g.terminals(), 2);
        assert_eq!(WordRelation::parse(&r.to_text(g.terminals()), g.terminals()).unwrap(), r);
    }
}
