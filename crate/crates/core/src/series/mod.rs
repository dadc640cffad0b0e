//! Rational boolean series stored as canonical minimal complete residual
//! automata. Every constructor canonicalizes, so `==` is language equality.

mod expr;
mod parse;
mod vector;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::alphabet::{Alphabet, Letter};
use crate::error::Result;

pub use parse::{parse_series, parse_vector, parse_vector_list};
pub use vector::{LeftDetType, SeriesMatrix, SeriesVector};

/// Image of a letter under a substitution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subst {
    To(Letter),
    Epsilon,
    Kill,
}

/// State 0 is the root; states are numbered in breadth-first discovery order
/// with letters taken in alphabet order.
#[derive(Clone)]
pub struct Series {
    alphabet: Arc<Alphabet>,
    trans: Arc<[u32]>,
    accept: Arc<[bool]>,
    dead: Option<u32>,
}

impl PartialEq for Series {
    fn eq(&self, other: &Self) -> bool {
        self.accept == other.accept && self.trans == other.trans
    }
}

impl Eq for Series {}

impl Hash for Series {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.accept.hash(state);
        self.trans.hash(state);
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series({})", self.to_expr())
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_expr())
    }
}

/// Explores a deterministic automaton whose states are keys of type `K`, then
/// minimizes and canonicalizes it.
pub fn explore<K, F, A>(alphabet: &Arc<Alphabet>, start: K, step: F, accept: A) -> Series
where
    K: Clone + Eq + Hash,
    F: FnMut(&K, Letter) -> K,
    A: FnMut(&K) -> bool,
{
    explore_within(alphabet, start, step, accept, usize::MAX).expect("unbounded")
}

/// As [`explore`], giving up once more than `limit` states are discovered.
pub fn explore_within<K, F, A>(
    alphabet: &Arc<Alphabet>,
    start: K,
    mut step: F,
    mut accept: A,
    limit: usize,
) -> Option<Series>
where
    K: Clone + Eq + Hash,
    F: FnMut(&K, Letter) -> K,
    A: FnMut(&K) -> bool,
{
    let k = alphabet.len();
    let mut ids: FxHashMap<K, u32> = FxHashMap::default();
    let mut keys = vec![start.clone()];
    ids.insert(start, 0);
    let mut trans = Vec::new();
    let mut acc = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        acc.push(accept(&keys[i]));
        let succ: Vec<K> = (0..k).map(|l| step(&keys[i], Letter(l as u32))).collect();
        for next in succ {
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    if keys.len() >= limit {
                        return None;
                    }
                    let id = keys.len() as u32;
                    ids.insert(next.clone(), id);
                    keys.push(next);
                    id
                }
            };
            trans.push(id);
        }
        i += 1;
    }
    Some(Series::from_dfa(alphabet.clone(), &trans, &acc))
}

/// Language-equivalence classes of the states of a complete DFA.
fn hopcroft(trans: &[u32], accept: &[bool], k: usize) -> (Vec<u32>, usize) {
    let n = accept.len();
    let mut inv_start = vec![0usize; n * k + 1];
    for (i, &t) in trans.iter().enumerate() {
        inv_start[t as usize * k + i % k + 1] += 1;
    }
    for i in 0..n * k {
        inv_start[i + 1] += inv_start[i];
    }
    let mut inv = vec![0u32; trans.len()];
    let mut fill = inv_start.clone();
    for (i, &t) in trans.iter().enumerate() {
        let slot = t as usize * k + i % k;
        inv[fill[slot]] = (i / k) as u32;
        fill[slot] += 1;
    }
    // blocks are contiguous ranges of `elems`; `mid` separates marked states
    let mut elems: Vec<u32> = (0..n as u32).filter(|&s| !accept[s as usize]).collect();
    let split = elems.len();
    elems.extend((0..n as u32).filter(|&s| accept[s as usize]));
    let mut loc = vec![0usize; n];
    for (i, &s) in elems.iter().enumerate() {
        loc[s as usize] = i;
    }
    let (mut start, mut end) = (Vec::new(), Vec::new());
    for (a, b) in [(0, split), (split, n)] {
        if a < b {
            start.push(a);
            end.push(b);
        }
    }
    let mut blk = vec![0u32; n];
    for (b, (&a, &e)) in start.iter().zip(&end).enumerate() {
        for &s in &elems[a..e] {
            blk[s as usize] = b as u32;
        }
    }
    let mut mid = start.clone();
    let mut work: Vec<u32> = (0..start.len() as u32).collect();
    let mut in_work = vec![true; start.len()];
    let mut touched = Vec::new();
    while let Some(b) = work.pop() {
        in_work[b as usize] = false;
        let splitter: Vec<u32> = elems[start[b as usize]..end[b as usize]].to_vec();
        for a in 0..k {
            for &t in &splitter {
                let slot = t as usize * k + a;
                for &s in &inv[inv_start[slot]..inv_start[slot + 1]] {
                    let c = blk[s as usize] as usize;
                    let (i, j) = (loc[s as usize], mid[c]);
                    if i < j {
                        continue;
                    }
                    elems.swap(i, j);
                    loc[elems[i] as usize] = i;
                    loc[s as usize] = j;
                    if mid[c] == start[c] {
                        touched.push(c);
                    }
                    mid[c] += 1;
                }
            }
            for c in touched.drain(..) {
                if mid[c] == end[c] {
                    mid[c] = start[c];
                    continue;
                }
                let nb = start.len();
                start.push(start[c]);
                end.push(mid[c]);
                mid.push(start[c]);
                start[c] = end[nb];
                mid[c] = start[c];
                for &s in &elems[start[nb]..end[nb]] {
                    blk[s as usize] = nb as u32;
                }
                in_work.push(false);
                let x = if in_work[c] || end[nb] - start[nb] <= end[c] - start[c] { nb } else { c };
                in_work[x] = true;
                work.push(x as u32);
            }
        }
    }
    (blk, start.len())
}

fn dedup_sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Right operands with a state count in this range get their subset states
/// canonicalized once a plain construction passes `PLAIN_LIMIT` states.
const CANONICAL_RANGE: std::ops::RangeInclusive<usize> = 32..=2048;
const PLAIN_LIMIT: usize = 4096;

/// Language inclusion between the states of a complete DFA, `n × n` row-major.
fn inclusion(trans: &[u32], accept: &[bool], k: usize) -> Vec<bool> {
    let n = accept.len();
    let mut incl = vec![true; n * n];
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n * k];
    for q in 0..n {
        for l in 0..k {
            preds[trans[q * k + l] as usize * k + l].push(q as u32);
        }
    }
    let mut work = Vec::new();
    for q in 0..n {
        for p in 0..n {
            if accept[q] && !accept[p] {
                incl[q * n + p] = false;
                work.push((q as u32, p as u32));
            }
        }
    }
    while let Some((q, p)) = work.pop() {
        for l in 0..k {
            for &q2 in &preds[q as usize * k + l] {
                for &p2 in &preds[p as usize * k + l] {
                    let i = q2 as usize * n + p2 as usize;
                    if incl[i] {
                        incl[i] = false;
                        work.push((q2, p2));
                    }
                }
            }
        }
    }
    incl
}

fn bits(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &x)| {
        let mut x = x;
        std::iter::from_fn(move || {
            (x != 0).then(|| {
                let b = x.trailing_zeros() as usize;
                x &= x - 1;
                w * 64 + b
            })
        })
    })
}

/// States of the reverse determinization of a complete DFA, at most `limit`
/// of them: for each state `q`, the bitset of reverse states containing `q`.
/// Two sets of states accept the same union language iff the unions of their
/// masks agree.
fn reverse_masks(trans: &[u32], accept: &[bool], k: usize, limit: usize) -> Option<Vec<Vec<u64>>> {
    let n = accept.len();
    let words = n.div_ceil(64);
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n * k];
    for q in 0..n {
        for l in 0..k {
            preds[trans[q * k + l] as usize * k + l].push(q as u32);
        }
    }
    let mut start = vec![0u64; words];
    for q in (0..n).filter(|&q| accept[q]) {
        start[q / 64] |= 1 << (q % 64);
    }
    let mut ids: FxHashMap<Vec<u64>, usize> = FxHashMap::default();
    ids.insert(start.clone(), 0);
    let mut sets = vec![start];
    let mut i = 0;
    while i < sets.len() {
        for l in 0..k {
            let mut next = vec![0u64; words];
            for q in bits(&sets[i]) {
                for &p in &preds[q * k + l] {
                    next[p as usize / 64] |= 1 << (p % 64);
                }
            }
            if !ids.contains_key(&next) {
                if sets.len() >= limit {
                    return None;
                }
                ids.insert(next.clone(), sets.len());
                sets.push(next);
            }
        }
        i += 1;
    }
    let m = sets.len().div_ceil(64);
    let mut masks = vec![vec![0u64; m]; n];
    for (c, set) in sets.iter().enumerate() {
        for q in bits(set) {
            masks[q][c / 64] |= 1 << (c % 64);
        }
    }
    Some(masks)
}

/// Reverse-determinization size up to which subset states are canonicalized.
const REVERSE_LIMIT: usize = 8192;

/// Drops states whose language is contained in another member's.
fn prune(set: Vec<u32>, incl: Option<&[bool]>, n: usize) -> Vec<u32> {
    let set = dedup_sorted(set);
    let Some(incl) = incl else { return set };
    set.iter().copied().filter(|&q| !set.iter().any(|&p| p != q && incl[q as usize * n + p as usize])).collect()
}

impl Series {
    /// Builds the canonical form of an arbitrary complete DFA rooted at state 0.
    pub fn from_dfa(alphabet: Arc<Alphabet>, trans: &[u32], accept: &[bool]) -> Series {
        let k = alphabet.len();
        let n = accept.len();
        let (block, count) = hopcroft(trans, accept, k);
        let mut rep = vec![u32::MAX; count];
        for s in (0..n).rev() {
            rep[block[s] as usize] = s as u32;
        }
        let mut order = vec![u32::MAX; count];
        let mut queue = vec![block[0]];
        order[block[0] as usize] = 0;
        let mut new_trans = Vec::new();
        let mut new_acc = Vec::new();
        let mut i = 0;
        while i < queue.len() {
            let b = queue[i] as usize;
            let s = rep[b] as usize;
            new_acc.push(accept[s]);
            for a in 0..k {
                let t = block[trans[s * k + a] as usize] as usize;
                if order[t] == u32::MAX {
                    order[t] = queue.len() as u32;
                    queue.push(t as u32);
                }
                new_trans.push(order[t]);
            }
            i += 1;
        }
        Self::assemble(alphabet, new_trans, new_acc)
    }

    fn assemble(alphabet: Arc<Alphabet>, trans: Vec<u32>, accept: Vec<bool>) -> Series {
        let k = alphabet.len();
        let dead = (0..accept.len()).find(|&s| {
            !accept[s] && (0..k).all(|a| trans[s * k + a] as usize == s)
        });
        Series { alphabet, trans: trans.into(), accept: accept.into(), dead: dead.map(|d| d as u32) }
    }

    pub fn empty(alphabet: &Arc<Alphabet>) -> Series {
        let k = alphabet.len();
        Self::assemble(alphabet.clone(), vec![0; k], vec![false])
    }

    pub fn epsilon(alphabet: &Arc<Alphabet>) -> Series {
        Self::word(alphabet, &[])
    }

    pub fn letter(alphabet: &Arc<Alphabet>, l: Letter) -> Series {
        Self::word(alphabet, &[l])
    }

    pub fn word(alphabet: &Arc<Alphabet>, w: &[Letter]) -> Series {
        let len = w.len();
        // positions 0..=len, then len+1 is the sink
        explore(
            alphabet,
            0usize,
            |&p, l| if p < len && w[p] == l { p + 1 } else { len + 1 },
            |&p| p == len,
        )
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.accept.len()
    }

    /// Row-major transition table, one row of `alphabet.len()` targets per state.
    pub fn transition_table(&self) -> &[u32] {
        &self.trans
    }

    pub fn accepting(&self) -> &[bool] {
        &self.accept
    }

    /// Number of distinct residuals.
    pub fn norm(&self) -> usize {
        self.num_states()
    }

    pub(crate) fn next(&self, q: u32, l: Letter) -> u32 {
        self.trans[q as usize * self.alphabet.len() + l.index()]
    }

    pub(crate) fn accepts_at(&self, q: u32) -> bool {
        self.accept[q as usize]
    }

    pub(crate) fn is_dead_state(&self, q: u32) -> bool {
        self.dead == Some(q)
    }

    pub fn is_empty(&self) -> bool {
        self.dead == Some(0)
    }

    pub fn has_epsilon(&self) -> bool {
        self.accept[0]
    }

    /// Support is exactly {ε}.
    pub fn is_epsilon(&self) -> bool {
        self.accept[0] && self.alphabet.letters().all(|l| self.is_dead_state(self.next(0, l)))
    }

    pub fn contains(&self, w: &[Letter]) -> bool {
        let q = w.iter().fold(0, |q, &l| self.next(q, l));
        self.accept[q as usize]
    }

    /// Letters leading out of state `q` to a non-dead state.
    pub(crate) fn live_letters(&self, q: u32) -> impl Iterator<Item = Letter> + '_ {
        self.alphabet.letters().filter(move |&l| !self.is_dead_state(self.next(q, l)))
    }

    /// The residual rooted at state `q`, canonically renumbered.
    pub(crate) fn rerooted(&self, q: u32) -> Series {
        if q == 0 {
            return self.clone();
        }
        let k = self.alphabet.len();
        let mut order: HashMap<u32, u32> = HashMap::new();
        let mut queue = vec![q];
        order.insert(q, 0);
        let mut trans = Vec::new();
        let mut acc = Vec::new();
        let mut i = 0;
        while i < queue.len() {
            let s = queue[i];
            acc.push(self.accept[s as usize]);
            for a in 0..k {
                let t = self.trans[s as usize * k + a];
                let len = queue.len() as u32;
                let id = *order.entry(t).or_insert_with(|| {
                    queue.push(t);
                    len
                });
                trans.push(id);
            }
            i += 1;
        }
        Self::assemble(self.alphabet.clone(), trans, acc)
    }

    pub fn residual(&self, w: &[Letter]) -> Series {
        let q = w.iter().fold(0, |q, &l| self.next(q, l));
        self.rerooted(q)
    }

    pub fn residual_letter(&self, l: Letter) -> Series {
        self.rerooted(self.next(0, l))
    }

    /// All residuals, indexed by state.
    pub fn residuals(&self) -> Vec<Series> {
        (0..self.num_states() as u32).map(|q| self.rerooted(q)).collect()
    }

    pub fn sum(&self, other: &Series) -> Series {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        explore(
            &self.alphabet,
            (0u32, 0u32),
            |&(p, q), l| (self.next(p, l), other.next(q, l)),
            |&(p, q)| self.accept[p as usize] || other.accept[q as usize],
        )
    }

    pub fn product(&self, other: &Series) -> Series {
        self.product_within(other, usize::MAX).expect("unbounded")
    }

    /// The product, or `None` if the subset construction exceeds `limit` states.
    pub fn product_within(&self, other: &Series, limit: usize) -> Option<Series> {
        if self.is_empty() || other.is_empty() {
            return Some(Series::empty(&self.alphabet));
        }
        if self.is_epsilon() {
            return Some(other.clone());
        }
        if other.is_epsilon() {
            return Some(self.clone());
        }
        let on = other.num_states();
        if !CANONICAL_RANGE.contains(&on) {
            return self.subset_product(other, None, None, limit);
        }
        if let Some(p) = self.subset_product(other, None, None, limit.min(PLAIN_LIMIT)) {
            return Some(p);
        }
        if limit <= PLAIN_LIMIT {
            return None;
        }
        let k = self.alphabet.len();
        match reverse_masks(&other.trans, &other.accept, k, REVERSE_LIMIT) {
            Some(masks) => self.subset_product(other, None, Some(&masks), limit),
            None => self.subset_product(other, Some(&inclusion(&other.trans, &other.accept, k)), None, limit),
        }
    }

    /// Subset construction for `self · other`. Sets are pruned with `incl`
    /// (inclusion between states of `other`) and, given `masks` from
    /// [`reverse_masks`], replaced by one representative per union language.
    fn subset_product(
        &self,
        other: &Series,
        incl: Option<&[bool]>,
        masks: Option<&[Vec<u64>]>,
        limit: usize,
    ) -> Option<Series> {
        let odead = other.dead;
        let on = other.num_states();
        let mut reps: FxHashMap<Vec<u64>, Vec<u32>> = FxHashMap::default();
        let start = (0u32, if self.accept[0] { vec![0u32] } else { vec![] });
        explore_within(
            &self.alphabet,
            start,
            |(p, set), l| {
                let p2 = self.next(*p, l);
                let mut s2: Vec<u32> =
                    set.iter().map(|&q| other.next(q, l)).filter(|&q| Some(q) != odead).collect();
                if self.accept[p2 as usize] {
                    s2.push(0);
                }
                let s2 = prune(s2, incl, on);
                let Some(masks) = masks else { return (p2, s2) };
                let mut sig = vec![0u64; masks.first().map_or(0, Vec::len)];
                for &q in &s2 {
                    for (w, m) in sig.iter_mut().zip(&masks[q as usize]) {
                        *w |= m;
                    }
                }
                (p2, reps.entry(sig).or_insert(s2).clone())
            },
            |(_, set)| set.iter().any(|&q| other.accept[q as usize]),
            limit,
        )
    }

    pub fn star(&self) -> Series {
        let dead = self.dead;
        // (is the initial ε-state, current states)
        explore(
            &self.alphabet,
            (true, vec![0u32]),
            |(_, set), l| {
                let mut s2: Vec<u32> =
                    set.iter().map(|&q| self.next(q, l)).filter(|&q| Some(q) != dead).collect();
                if s2.iter().any(|&q| self.accept[q as usize]) {
                    s2.push(0);
                }
                (false, dedup_sorted(s2))
            },
            |(init, set)| *init || set.iter().any(|&q| self.accept[q as usize]),
        )
    }

    /// Letter substitution into `target`, where letters may also be erased
    /// (mapped to ε) or killed (mapped to ∅).
    pub fn substitute(&self, target: &Arc<Alphabet>, f: impl Fn(Letter) -> Subst) -> Series {
        let images: Vec<Subst> = self.alphabet.letters().map(&f).collect();
        let mut by_target: Vec<Vec<Letter>> = vec![Vec::new(); target.len()];
        let mut erased = Vec::new();
        for l in self.alphabet.letters() {
            match images[l.index()] {
                Subst::To(m) => by_target[m.index()].push(l),
                Subst::Epsilon => erased.push(l),
                Subst::Kill => {}
            }
        }
        let dead = self.dead;
        let closure = |mut set: Vec<u32>| {
            let mut i = 0;
            while i < set.len() {
                let q = set[i];
                for &l in &erased {
                    let t = self.next(q, l);
                    if Some(t) != dead && !set.contains(&t) {
                        set.push(t);
                    }
                }
                i += 1;
            }
            dedup_sorted(set)
        };
        let start = closure(if self.is_empty() { vec![] } else { vec![0] });
        explore(
            target,
            start,
            |set, m| {
                let s2: Vec<u32> = set
                    .iter()
                    .flat_map(|&q| by_target[m.index()].iter().map(move |&l| self.next(q, l)))
                    .filter(|&q| Some(q) != dead)
                    .collect();
                closure(s2)
            },
            |set| set.iter().any(|&q| self.accept[q as usize]),
        )
    }

    /// Same series viewed over another alphabet with identical letter names.
    pub fn transport(&self, target: &Arc<Alphabet>) -> Result<Series> {
        let mut map = Vec::new();
        for l in self.alphabet.letters() {
            map.push(target.letter(self.alphabet.name(l))?);
        }
        Ok(self.substitute(target, |l| Subst::To(map[l.index()])))
    }

    pub fn erase_marks(&self) -> Result<Series> {
        let a = &self.alphabet;
        if !a.has_marks() {
            return Err(crate::Error::NoMarks);
        }
        Ok(self.substitute(a, |l| Subst::To(a.erase(l).expect("marks present"))))
    }

    pub fn add_marks(&self) -> Result<Series> {
        let a = &self.alphabet;
        if !a.has_marks() {
            return Err(crate::Error::NoMarks);
        }
        Ok(self.substitute(a, |l| Subst::To(a.mark(l).expect("marks present"))))
    }

    /// True when no marked letter occurs in any support word.
    pub fn is_unmarked(&self) -> bool {
        let a = &self.alphabet;
        (0..self.num_states() as u32)
            .all(|q| self.live_letters(q).all(|l| !a.is_marked(l)))
    }

    /// No nonempty word `u` with `S•u = S`.
    pub fn is_loop_free(&self) -> bool {
        SeriesVector::from_entries(self.alphabet.clone(), vec![self.clone()]).is_loop_free()
    }

    /// Words of the support up to length `max_len`, in length-lexicographic order.
    pub fn support_up_to(&self, max_len: usize) -> Vec<Vec<Letter>> {
        let mut out = Vec::new();
        let mut layer: Vec<(Vec<Letter>, u32)> = vec![(vec![], 0)];
        for len in 0..=max_len {
            for (w, q) in &layer {
                if self.accept[*q as usize] {
                    out.push(w.clone());
                }
            }
            if len == max_len {
                break;
            }
            let mut next = Vec::new();
            for (w, q) in &layer {
                for l in self.live_letters(*q) {
                    let mut w2 = w.clone();
                    w2.push(l);
                    next.push((w2, self.next(*q, l)));
                }
            }
            layer = next;
        }
        out
    }

    pub fn to_expr(&self) -> String {
        expr::to_expr(self)
    }
}
