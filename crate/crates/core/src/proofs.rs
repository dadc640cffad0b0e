//! Deduction systems over pairs of deterministic vectors: the weighted
//! system B1 (without R5), its unweighted version B2 and the unmarked
//! system B3. Congruence closure with replayable traces, self-generating
//! sets, proof files and a budgeted proof search.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use crate::alphabet::Letter;
use crate::error::{Error, Result};
use crate::games::PairSpace;
use crate::grammar::Grammar;
use crate::series::{explore, parse_vector, Series, SeriesMatrix, SeriesVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum System {
    B1,
    B2,
    B3,
}

/// Rule names of the three systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleId {
    R0,
    R1,
    R2,
    R3,
    R3p,
    R4,
    R5,
    R6,
    R7,
    R8,
    R21,
    R22,
    R23,
    R23p,
    R24,
    R25,
    R26,
    R27,
    R31,
    R32,
    R33,
    R34,
    R35,
    R36,
    R37,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Schema {
    Weaken,
    Sym,
    Trans,
    Refl,
    Rho,
    Split,
    Arden,
    RightProd,
    LeftProd,
}

impl RuleId {
    pub fn system(self) -> System {
        use RuleId::*;
        match self {
            R0 | R1 | R2 | R3 | R3p | R4 | R5 | R6 | R7 | R8 => System::B1,
            R21 | R22 | R23 | R23p | R24 | R25 | R26 | R27 => System::B2,
            _ => System::B3,
        }
    }

    fn schema(self) -> Option<Schema> {
        use RuleId::*;
        Some(match self {
            R0 => Schema::Weaken,
            R1 | R21 | R31 => Schema::Sym,
            R2 | R22 | R32 => Schema::Trans,
            R3 | R23 | R33 => Schema::Refl,
            R3p | R23p => Schema::Rho,
            R4 | R24 | R34 => Schema::Split,
            R6 | R25 | R35 => Schema::Arden,
            R7 | R26 | R36 => Schema::RightProd,
            R8 | R27 | R37 => Schema::LeftProd,
            R5 => return None,
        })
    }

    fn of(system: System, schema: Schema) -> Option<RuleId> {
        use RuleId::*;
        let all = [R0, R1, R2, R3, R3p, R4, R6, R7, R8, R21, R22, R23, R23p, R24, R25, R26, R27, R31, R32, R33, R34, R35, R36, R37];
        all.into_iter().find(|r| r.system() == system && r.schema() == Some(schema))
    }

    pub fn parse(name: &str) -> Option<RuleId> {
        use RuleId::*;
        Some(match name {
            "R0" => R0,
            "R1" => R1,
            "R2" => R2,
            "R3" => R3,
            "R'3" => R3p,
            "R4" => R4,
            "R5" => R5,
            "R6" => R6,
            "R7" => R7,
            "R8" => R8,
            "R21" => R21,
            "R22" => R22,
            "R23" => R23,
            "R'23" => R23p,
            "R24" => R24,
            "R25" => R25,
            "R26" => R26,
            "R27" => R27,
            "R31" => R31,
            "R32" => R32,
            "R33" => R33,
            "R34" => R34,
            "R35" => R35,
            "R36" => R36,
            "R37" => R37,
            _ => return None,
        })
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleId::R3p => write!(f, "R'3"),
            RuleId::R23p => write!(f, "R'23"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// A (possibly weighted) equation between two vectors of equal width.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assertion {
    pub weight: Option<u64>,
    pub left: SeriesVector,
    pub right: SeriesVector,
}

impl Assertion {
    pub fn new(left: SeriesVector, right: SeriesVector) -> Self {
        Assertion { weight: None, left, right }
    }

    pub fn weighted(p: u64, left: SeriesVector, right: SeriesVector) -> Self {
        Assertion { weight: Some(p), left, right }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.weight {
            Some(p) => write!(f, "({p}, {}, {})", self.left, self.right),
            None => write!(f, "({}, {})", self.left, self.right),
        }
    }
}

/// Data a rule needs beyond its premises.
#[derive(Clone, Debug)]
pub enum Side {
    None,
    /// `S` for R3/R'3 and their copies.
    Vector(SeriesVector),
    /// `S`, `T` and the letter pairs of `R1` (the pair `(ε, ε)` is implicit).
    Split { left: SeriesVector, right: SeriesVector, r1: Vec<(Letter, Letter)> },
    Arden { s1: Series, s: SeriesVector },
    /// Right factor `T`.
    Matrix(SeriesMatrix),
    /// Left factor `S`.
    Prefix(SeriesVector),
}

#[derive(Clone, Debug)]
pub struct RuleInstance {
    pub rule: RuleId,
    pub premises: Vec<Assertion>,
    pub conclusion: Assertion,
    pub side: Side,
}

fn fail<T>(rule: RuleId, msg: impl Into<String>) -> Result<T> {
    Err(Error::rule(rule, msg))
}

fn weight_of(rule: RuleId, a: &Assertion) -> Result<u64> {
    let weighted = rule.system() == System::B1;
    match (weighted, a.weight) {
        (true, Some(p)) => Ok(p),
        (false, None) => Ok(0),
        (true, None) => fail(rule, format!("assertion {a} lacks a weight")),
        (false, Some(_)) => fail(rule, format!("assertion {a} carries a weight")),
    }
}

fn check_vector(rule: RuleId, v: &SeriesVector) -> Result<()> {
    if !v.is_deterministic() {
        return fail(rule, format!("{v} is not deterministic"));
    }
    if rule.system() == System::B3 && !v.is_unmarked() {
        return fail(rule, format!("{v} has marked variables"));
    }
    Ok(())
}

fn make(rule: RuleId, p: u64, left: SeriesVector, right: SeriesVector) -> Result<Assertion> {
    if left.width() != right.width() {
        return fail(rule, format!("widths {} and {} differ", left.width(), right.width()));
    }
    check_vector(rule, &left)?;
    check_vector(rule, &right)?;
    let weight = (rule.system() == System::B1).then_some(p);
    Ok(Assertion { weight, left, right })
}

/// Admissible order-1 relation: `R1 ⊆ ψ̄` and total in both directions.
pub fn check_r1(g: &Grammar, r1: &[(Letter, Letter)]) -> std::result::Result<(), String> {
    let t = g.terminals();
    for &(x, y) in r1 {
        if !t.same_class(x, y) {
            return Err(format!("({}, {}) is not in ψ̄", t.name(x), t.name(y)));
        }
    }
    for x in t.letters() {
        if !r1.iter().any(|&(a, _)| a == x) || !r1.iter().any(|&(_, b)| b == x) {
            return Err(format!("not total on {}", t.name(x)));
        }
    }
    Ok(())
}

/// Computes the conclusion of `rule` from its premises and side data.
pub fn derive(g: &Grammar, rule: RuleId, premises: &[Assertion], side: &Side) -> Result<Assertion> {
    let Some(schema) = rule.schema() else {
        return fail(rule, "R5 is not a rule of B1");
    };
    for a in premises {
        weight_of(rule, a)?;
        if a.left.width() != a.right.width() {
            return fail(rule, format!("premise {a} has sides of different widths"));
        }
        check_vector(rule, &a.left)?;
        check_vector(rule, &a.right)?;
    }
    let arity = |n: usize| -> Result<()> {
        if premises.len() != n {
            return fail(rule, format!("expected {n} premises, got {}", premises.len()));
        }
        Ok(())
    };
    match schema {
        Schema::Weaken => {
            arity(1)?;
            let a = &premises[0];
            make(rule, weight_of(rule, a)? + 1, a.left.clone(), a.right.clone())
        }
        Schema::Sym => {
            arity(1)?;
            let a = &premises[0];
            make(rule, weight_of(rule, a)?, a.right.clone(), a.left.clone())
        }
        Schema::Trans => {
            arity(2)?;
            let (a, b) = (&premises[0], &premises[1]);
            let (pa, pb) = (weight_of(rule, a)?, weight_of(rule, b)?);
            if pa != pb {
                return fail(rule, format!("weights {pa} and {pb} differ"));
            }
            if a.right == b.left {
                make(rule, pa, a.left.clone(), b.right.clone())
            } else if b.right == a.left {
                make(rule, pa, b.left.clone(), a.right.clone())
            } else {
                fail(rule, "premises do not share a middle term")
            }
        }
        Schema::Refl => {
            arity(0)?;
            let Side::Vector(s) = side else { return fail(rule, "missing vector") };
            make(rule, 0, s.clone(), s.clone())
        }
        Schema::Rho => {
            arity(0)?;
            let Side::Vector(s) = side else { return fail(rule, "missing vector") };
            if rule == RuleId::R3p && s.width() != 1 {
                return fail(rule, "R'3 applies to scalars only");
            }
            make(rule, 0, s.clone(), s.erase_marks()?)
        }
        Schema::Split => {
            let Side::Split { left, right, r1 } = side else { return fail(rule, "missing R1 data") };
            if left.unit_index().is_some() || right.unit_index().is_some() {
                return fail(rule, "side condition S ≢ ε ∧ T ≢ ε fails");
            }
            check_r1(g, r1).map_err(|m| Error::rule(rule, m))?;
            let p = match premises.first() {
                Some(a) => weight_of(rule, a)?,
                None => 1,
            };
            if rule.system() == System::B1 && p == 0 {
                return fail(rule, "premises must have weight ≥ 1");
            }
            let mut expected: HashSet<(SeriesVector, SeriesVector)> = HashSet::new();
            for &(x, y) in r1 {
                expected.insert((g.action(left, &[x])?, g.action(right, &[y])?));
            }
            let mut got: HashSet<(SeriesVector, SeriesVector)> = HashSet::new();
            for a in premises {
                if weight_of(rule, a)? != p {
                    return fail(rule, "premise weights differ");
                }
                got.insert((a.left.clone(), a.right.clone()));
            }
            if got != expected {
                return fail(rule, "premises are not the R1-successors of the conclusion");
            }
            make(rule, p.saturating_sub(1), left.clone(), right.clone())
        }
        Schema::Arden => {
            arity(1)?;
            let Side::Arden { s1, s } = side else { return fail(rule, "missing S1 and S") };
            if s1.is_epsilon() || s1.has_epsilon() {
                return fail(rule, "side condition S1 ≢ ε fails");
            }
            let mut head = vec![s1.clone()];
            head.extend(s.entries().iter().cloned());
            let joined = SeriesVector::from_entries(s.alphabet().clone(), head);
            if !joined.is_deterministic() {
                return fail(rule, "(S1, S) is not deterministic");
            }
            let a = &premises[0];
            let t = &a.right;
            if t.width() != s.width() {
                return fail(rule, "S and T differ in width");
            }
            if a.left != t.left_scale(s1).sum(s)? {
                return fail(rule, "premise left side is not S1·T + S");
            }
            make(rule, weight_of(rule, a)?, s.left_scale(&s1.star()), t.clone())
        }
        Schema::RightProd => {
            arity(1)?;
            let Side::Matrix(t) = side else { return fail(rule, "missing right factor") };
            if !t.is_deterministic() {
                return fail(rule, "right factor is not deterministic");
            }
            let a = &premises[0];
            make(rule, weight_of(rule, a)?, a.left.mul(t)?, a.right.mul(t)?)
        }
        Schema::LeftProd => {
            let Side::Prefix(s) = side else { return fail(rule, "missing left factor") };
            check_vector(rule, s)?;
            arity(s.width())?;
            let p = match premises.first() {
                Some(a) => weight_of(rule, a)?,
                None => return fail(rule, "no premises"),
            };
            if premises.iter().any(|a| weight_of(rule, a).ok() != Some(p)) {
                return fail(rule, "premise weights differ");
            }
            let lam = premises[0].left.width();
            let alphabet = s.alphabet().clone();
            let t = SeriesMatrix::from_rows(alphabet.clone(), premises.iter().map(|a| a.left.clone()).collect(), lam)
                .map_err(|e| Error::rule(rule, e.to_string()))?;
            let t2 = SeriesMatrix::from_rows(alphabet, premises.iter().map(|a| a.right.clone()).collect(), lam)
                .map_err(|e| Error::rule(rule, e.to_string()))?;
            make(rule, p, s.mul(&t)?, s.mul(&t2)?)
        }
    }
}

/// Validates a rule instance and returns its conclusion.
pub fn apply_rule(g: &Grammar, inst: &RuleInstance) -> Result<Assertion> {
    let got = derive(g, inst.rule, &inst.premises, &inst.side)?;
    if got != inst.conclusion {
        return fail(inst.rule, format!("conclusion {} does not match the schema's {got}", inst.conclusion));
    }
    Ok(got)
}

/// A derivation in the congruence rules, checked by `replay`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    Hyp(usize),
    Refl(SeriesVector),
    Rho(SeriesVector),
    Sym(Box<Derivation>),
    Trans(Box<Derivation>, Box<Derivation>),
    Arden { premise: Box<Derivation>, s1: Series, s: SeriesVector },
    RightProd { premise: Box<Derivation>, t: SeriesMatrix },
    LeftProd { s: SeriesVector, premises: Vec<Derivation> },
    /// `n` applications of R0.
    Weaken(u64, Box<Derivation>),
}

impl Derivation {
    pub fn size(&self) -> usize {
        match self {
            Derivation::Hyp(_) | Derivation::Refl(_) | Derivation::Rho(_) => 1,
            Derivation::Sym(d) | Derivation::Weaken(_, d) => 1 + d.size(),
            Derivation::Trans(a, b) => 1 + a.size() + b.size(),
            Derivation::Arden { premise, .. } | Derivation::RightProd { premise, .. } => 1 + premise.size(),
            Derivation::LeftProd { premises, .. } => 1 + premises.iter().map(Derivation::size).sum::<usize>(),
        }
    }

    fn lift(self, p: u64, hyps: &[Assertion]) -> Derivation {
        let leaf = |d: Derivation, w: u64| if p > w { Derivation::Weaken(p - w, Box::new(d)) } else { d };
        match self {
            Derivation::Hyp(i) => {
                let w = hyps[i].weight.unwrap_or(0);
                leaf(Derivation::Hyp(i), w)
            }
            d @ (Derivation::Refl(_) | Derivation::Rho(_)) => leaf(d, 0),
            Derivation::Sym(d) => Derivation::Sym(Box::new(d.lift(p, hyps))),
            Derivation::Trans(a, b) => Derivation::Trans(Box::new(a.lift(p, hyps)), Box::new(b.lift(p, hyps))),
            Derivation::Arden { premise, s1, s } => Derivation::Arden { premise: Box::new(premise.lift(p, hyps)), s1, s },
            Derivation::RightProd { premise, t } => Derivation::RightProd { premise: Box::new(premise.lift(p, hyps)), t },
            Derivation::LeftProd { s, premises } => {
                Derivation::LeftProd { s, premises: premises.into_iter().map(|d| d.lift(p, hyps)).collect() }
            }
            d @ Derivation::Weaken(..) => d,
        }
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Derivation::Hyp(i) => write!(f, "hyp {i}"),
            Derivation::Refl(_) => write!(f, "refl"),
            Derivation::Rho(_) => write!(f, "rho"),
            Derivation::Sym(d) => write!(f, "sym({d})"),
            Derivation::Trans(a, b) => write!(f, "trans({a}, {b})"),
            Derivation::Arden { premise, .. } => write!(f, "arden({premise})"),
            Derivation::RightProd { premise, .. } => write!(f, "right({premise})"),
            Derivation::LeftProd { premises, .. } => {
                let parts: Vec<String> = premises.iter().map(ToString::to_string).collect();
                write!(f, "left({})", parts.join(", "))
            }
            Derivation::Weaken(n, d) => write!(f, "weaken{n}({d})"),
        }
    }
}

/// Replays a derivation through `apply_rule`, returning its conclusion.
pub fn replay(g: &Grammar, system: System, hyps: &[Assertion], d: &Derivation) -> Result<Assertion> {
    let rule = |s: Schema| RuleId::of(system, s).ok_or_else(|| Error::rule(format!("{system:?}"), format!("no {s:?} rule")));
    let step = |r: RuleId, premises: Vec<Assertion>, side: Side| -> Result<Assertion> {
        let conclusion = derive(g, r, &premises, &side)?;
        apply_rule(g, &RuleInstance { rule: r, premises, conclusion, side })
    };
    match d {
        Derivation::Hyp(i) => hyps
            .get(*i)
            .cloned()
            .ok_or_else(|| Error::Certificate(format!("hypothesis {i} does not exist"))),
        Derivation::Refl(s) => step(rule(Schema::Refl)?, vec![], Side::Vector(s.clone())),
        Derivation::Rho(s) => step(rule(Schema::Rho)?, vec![], Side::Vector(s.clone())),
        Derivation::Sym(a) => step(rule(Schema::Sym)?, vec![replay(g, system, hyps, a)?], Side::None),
        Derivation::Trans(a, b) => {
            let premises = vec![replay(g, system, hyps, a)?, replay(g, system, hyps, b)?];
            if premises[0].right != premises[1].left {
                return Err(Error::rule(rule(Schema::Trans)?, "premises do not chain left to right"));
            }
            step(rule(Schema::Trans)?, premises, Side::None)
        }
        Derivation::Arden { premise, s1, s } => step(
            rule(Schema::Arden)?,
            vec![replay(g, system, hyps, premise)?],
            Side::Arden { s1: s1.clone(), s: s.clone() },
        ),
        Derivation::RightProd { premise, t } => {
            step(rule(Schema::RightProd)?, vec![replay(g, system, hyps, premise)?], Side::Matrix(t.clone()))
        }
        Derivation::LeftProd { s, premises } => {
            let ps = premises.iter().map(|p| replay(g, system, hyps, p)).collect::<Result<Vec<_>>>()?;
            step(rule(Schema::LeftProd)?, ps, Side::Prefix(s.clone()))
        }
        Derivation::Weaken(n, a) => {
            let mut cur = replay(g, system, hyps, a)?;
            for _ in 0..*n {
                cur = step(rule(Schema::Weaken)?, vec![cur], Side::None)?;
            }
            Ok(cur)
        }
    }
}

/// Shortest variable word `w` with `s • w = ε_i`, per unit index `i`.
fn unit_words(s: &SeriesVector) -> Vec<Option<Vec<Letter>>> {
    let mut out = vec![None; s.width()];
    let mut seen: HashSet<SeriesVector> = HashSet::new();
    let mut queue: VecDeque<(SeriesVector, Vec<Letter>)> = VecDeque::new();
    seen.insert(s.clone());
    queue.push_back((s.clone(), vec![]));
    while let Some((v, w)) = queue.pop_front() {
        if let Some(i) = v.unit_index() {
            if out[i].is_none() {
                out[i] = Some(w.clone());
            }
            continue;
        }
        if v.is_empty_vector() {
            continue;
        }
        for l in s.alphabet().letters() {
            let r = v.residual_letter(l);
            if seen.insert(r.clone()) {
                let mut w2 = w.clone();
                w2.push(l);
                queue.push_back((r, w2));
            }
        }
    }
    out
}

/// `u = S·T` with `T_i = u • w_i` for the unit words of `S`; rows of `S`
/// that never reach a unit take `fallback[i]`.
fn right_factor(s: &SeriesVector, u: &SeriesVector, fallback: &[Option<SeriesVector>]) -> Option<Vec<Option<SeriesVector>>> {
    let words = unit_words(s);
    let rows: Vec<Option<SeriesVector>> =
        words.iter().enumerate().map(|(i, w)| w.as_ref().map(|w| u.residual(w)).or_else(|| fallback[i].clone())).collect();
    Some(rows)
}

/// `u = S1*·S` where `S1` collects first returns of `u` to itself.
fn loop_decomposition(u: &SeriesVector) -> Option<(Series, SeriesVector)> {
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Key {
        At(SeriesVector, bool),
        Returned,
        Dead,
    }
    let step = |k: &Key, l: Letter| match k {
        Key::At(v, _) => {
            let r = v.residual_letter(l);
            if &r == u {
                Key::Returned
            } else if r.is_empty_vector() {
                Key::Dead
            } else {
                Key::At(r, true)
            }
        }
        _ => Key::Dead,
    };
    let a = u.alphabet();
    let s1 = explore(a, Key::At(u.clone(), false), step, |k| *k == Key::Returned);
    if s1.is_empty() {
        return None;
    }
    let entries = (0..u.width())
        .map(|j| explore(a, Key::At(u.clone(), false), step, |k| matches!(k, Key::At(v, _) if v.get(j).has_epsilon())))
        .collect();
    Some((s1, SeriesVector::from_entries(a.clone(), entries)))
}

/// Budgets for congruence search.
#[derive(Clone, Copy, Debug)]
pub struct CongBudget {
    pub depth: usize,
    pub steps: usize,
}

impl CongBudget {
    pub fn new(budget: usize) -> Self {
        CongBudget { depth: budget.clamp(1, 8), steps: 200 * budget.max(1) }
    }
}

struct CongSearch<'a> {
    hyps: Vec<(SeriesVector, SeriesVector)>,
    allow_rho: bool,
    scalar_rho: bool,
    steps: usize,
    limit: usize,
    adjacency: HashMap<SeriesVector, Vec<(SeriesVector, Derivation)>>,
    failed: HashMap<(SeriesVector, SeriesVector), usize>,
    _g: &'a Grammar,
}

impl<'a> CongSearch<'a> {
    fn new(g: &'a Grammar, system: System, hyps: Vec<(SeriesVector, SeriesVector)>, budget: CongBudget) -> Self {
        let mut adjacency: HashMap<SeriesVector, Vec<(SeriesVector, Derivation)>> = HashMap::new();
        for (i, (a, b)) in hyps.iter().enumerate() {
            adjacency.entry(a.clone()).or_default().push((b.clone(), Derivation::Hyp(i)));
            adjacency.entry(b.clone()).or_default().push((a.clone(), Derivation::Sym(Box::new(Derivation::Hyp(i)))));
        }
        CongSearch {
            hyps,
            allow_rho: system != System::B3,
            scalar_rho: system == System::B1,
            steps: 0,
            limit: budget.steps,
            adjacency,
            failed: HashMap::new(),
            _g: g,
        }
    }

    /// Chain of hypotheses from `u` to `v` (R31/R32 closure of P).
    fn chain(&self, u: &SeriesVector, v: &SeriesVector) -> Option<Derivation> {
        if !self.adjacency.contains_key(u) {
            return None;
        }
        let mut prev: HashMap<SeriesVector, (SeriesVector, Derivation)> = HashMap::new();
        let mut queue = VecDeque::from([u.clone()]);
        let mut seen: HashSet<SeriesVector> = [u.clone()].into_iter().collect();
        while let Some(x) = queue.pop_front() {
            if &x == v {
                let mut steps = Vec::new();
                let mut cur = x;
                while let Some((p, d)) = prev.get(&cur) {
                    steps.push(d.clone());
                    cur = p.clone();
                }
                steps.reverse();
                let mut it = steps.into_iter();
                let first = it.next()?;
                return Some(it.fold(first, |acc, d| Derivation::Trans(Box::new(acc), Box::new(d))));
            }
            for (y, d) in self.adjacency.get(&x).into_iter().flatten() {
                if seen.insert(y.clone()) {
                    prev.insert(y.clone(), (x.clone(), d.clone()));
                    queue.push_back(y.clone());
                }
            }
        }
        None
    }

    fn prove(&mut self, u: &SeriesVector, v: &SeriesVector, depth: usize) -> Option<Derivation> {
        self.steps += 1;
        if u.width() != v.width() {
            return None;
        }
        if u == v {
            return Some(Derivation::Refl(u.clone()));
        }
        if let Some(d) = self.chain(u, v) {
            return Some(d);
        }
        if self.allow_rho && (!self.scalar_rho || u.width() == 1) {
            if let (Ok(a), Ok(b)) = (u.erase_marks(), v.erase_marks()) {
                if a == b {
                    return Some(Derivation::Trans(
                        Box::new(Derivation::Rho(u.clone())),
                        Box::new(Derivation::Sym(Box::new(Derivation::Rho(v.clone())))),
                    ));
                }
            }
        }
        if depth == 0 || self.steps > self.limit {
            return None;
        }
        let key = (u.clone(), v.clone());
        if self.failed.get(&key).is_some_and(|&d| d >= depth) {
            return None;
        }
        let found = self
            .split_by_hyp(u, v, depth)
            .or_else(|| self.split_by_head(u, v, depth))
            .or_else(|| self.arden(u, v, depth))
            .or_else(|| self.interpolate(u, v, depth));
        if found.is_none() {
            let e = self.failed.entry(key).or_insert(0);
            *e = (*e).max(depth);
        }
        found
    }

    fn rows(&mut self, t: &[SeriesVector], t2: &[SeriesVector], depth: usize) -> Option<Vec<Derivation>> {
        let mut out = Vec::new();
        for (a, b) in t.iter().zip(t2) {
            out.push(self.prove(a, b, depth)?);
        }
        Some(out)
    }

    /// `u = a·T`, `v = b·T'` for a pair `(a, b)` derivable from P, then
    /// R36 on `(a, b)` and R37 on the rows `(T_i, T'_i)`.
    fn split_by_hyp(&mut self, u: &SeriesVector, v: &SeriesVector, depth: usize) -> Option<Derivation> {
        let lam = u.width();
        let alphabet = u.alphabet().clone();
        let cands: Vec<(SeriesVector, SeriesVector, Derivation)> = self
            .hyps
            .iter()
            .enumerate()
            .flat_map(|(i, (a, b))| {
                [
                    (a.clone(), b.clone(), Derivation::Hyp(i)),
                    (b.clone(), a.clone(), Derivation::Sym(Box::new(Derivation::Hyp(i)))),
                ]
            })
            .filter(|(a, b, _)| {
                a.unit_index().is_none()
                    && b.unit_index().is_none()
                    && !a.is_empty_vector()
                    && a.left_det_type() == u.left_det_type()
                    && b.left_det_type() == v.left_det_type()
            })
            .collect();
        for (a, b, d) in cands {
            if self.steps > self.limit {
                return None;
            }
            let delta = a.width();
            let none = vec![None; delta];
            let tu = right_factor(&a, u, &none)?;
            let tv = right_factor(&b, v, &tu)?;
            let tu: Vec<SeriesVector> = tu
                .iter()
                .zip(&tv)
                .map(|(x, y)| x.clone().or_else(|| y.clone()).unwrap_or_else(|| SeriesVector::empty(&alphabet, lam)))
                .collect();
            let tv: Vec<SeriesVector> = tv.into_iter().zip(&tu).map(|(y, x)| y.unwrap_or_else(|| x.clone())).collect();
            if tu.iter().chain(&tv).any(|r| r.width() != lam) {
                continue;
            }
            let (Ok(mt), Ok(mt2)) = (
                SeriesMatrix::from_rows(alphabet.clone(), tu.clone(), lam),
                SeriesMatrix::from_rows(alphabet.clone(), tv.clone(), lam),
            ) else {
                continue;
            };
            if !mt.is_deterministic() || !mt2.is_deterministic() {
                continue;
            }
            let (Ok(au), Ok(bv)) = (a.mul(&mt), b.mul(&mt2)) else { continue };
            let Some(into_u) = self.regroup(u, &au, &a, &tu, depth) else { continue };
            let Some(into_v) = self.regroup(v, &bv, &b, &tv, depth) else { continue };
            let mut d = Derivation::RightProd { premise: Box::new(d), t: mt.clone() };
            if tu != tv {
                let Some(rows) = self.rows(&tu, &tv, depth - 1) else { continue };
                let left = Derivation::LeftProd { s: b.clone(), premises: rows };
                d = Derivation::Trans(Box::new(d), Box::new(left));
            }
            if let Some(e) = into_u {
                d = Derivation::Trans(Box::new(e), Box::new(d));
            }
            if let Some(e) = into_v {
                d = Derivation::Trans(Box::new(d), Box::new(Derivation::Sym(Box::new(e))));
            }
            return Some(d);
        }
        None
    }

    /// `x ~ head·T` (`= target`) when `head` sums letters of `x`'s head
    /// class: R37 over the class row of `x`, each column taking the row of
    /// the `head` entry containing it. `Some(None)` when `x == target`.
    fn regroup(
        &mut self,
        x: &SeriesVector,
        target: &SeriesVector,
        head: &SeriesVector,
        t: &[SeriesVector],
        depth: usize,
    ) -> Option<Option<Derivation>> {
        if x == target {
            return Some(None);
        }
        if depth < 2 {
            return None;
        }
        let (hx, mx) = x.decompose_head().ok()?;
        let a = x.alphabet();
        let mut goals = Vec::new();
        for &l in &hx {
            let at: Vec<usize> = (0..head.width()).filter(|&i| head.entries()[i].residual_letter(l).has_epsilon()).collect();
            goals.push(match at.as_slice() {
                [] => SeriesVector::empty(a, x.width()),
                [i] => t[*i].clone(),
                _ => return None,
            });
        }
        let s = SeriesVector::from_entries(a.clone(), hx.iter().map(|&l| Series::letter(a, l)).collect());
        let m = SeriesMatrix::from_rows(a.clone(), goals.clone(), x.width()).ok()?;
        if s.mul(&m).ok().as_ref() != Some(target) {
            return None;
        }
        let premises = self.rows(mx.rows(), &goals, depth - 1)?;
        Some(Some(Derivation::LeftProd { s, premises }))
    }

    /// Common head class: `u = H·M`, `v = H·M'` with `H` the class row.
    fn split_by_head(&mut self, u: &SeriesVector, v: &SeriesVector, depth: usize) -> Option<Derivation> {
        let (Ok((hu, mu)), Ok((hv, mv))) = (u.decompose_head(), v.decompose_head()) else {
            return None;
        };
        if hu != hv {
            return None;
        }
        let a = u.alphabet();
        let h = SeriesVector::from_entries(a.clone(), hu.iter().map(|&l| Series::letter(a, l)).collect());
        let rows = self.rows(mu.rows(), mv.rows(), depth - 1)?;
        Some(Derivation::LeftProd { s: h, premises: rows })
    }

    /// Backward Arden: `u = S1*·S` and `(S1·v + S, v)` derivable.
    fn arden(&mut self, u: &SeriesVector, v: &SeriesVector, depth: usize) -> Option<Derivation> {
        for (x, y, flip) in [(u, v, false), (v, u, true)] {
            if x.is_loop_free() {
                continue;
            }
            let Some((s1, s)) = loop_decomposition(x) else { continue };
            if s.left_scale(&s1.star()) != *x {
                continue;
            }
            let mut head = vec![s1.clone()];
            head.extend(s.entries().iter().cloned());
            if !SeriesVector::from_entries(x.alphabet().clone(), head).is_deterministic() {
                continue;
            }
            let Ok(lhs) = y.left_scale(&s1).sum(&s) else { continue };
            if !lhs.is_deterministic() {
                continue;
            }
            if let Some(d) = self.prove(&lhs, y, depth - 1) {
                let out = Derivation::Arden { premise: Box::new(d), s1, s };
                return Some(if flip { Derivation::Sym(Box::new(out)) } else { out });
            }
        }
        None
    }

    fn interpolate(&mut self, u: &SeriesVector, v: &SeriesVector, depth: usize) -> Option<Derivation> {
        if depth < 2 {
            return None;
        }
        let mids: Vec<SeriesVector> = self
            .adjacency
            .keys()
            .filter(|m| m.width() == u.width() && *m != u && *m != v)
            .cloned()
            .collect();
        for m in mids {
            if self.steps > self.limit {
                return None;
            }
            if let Some(a) = self.prove(u, &m, depth - 1) {
                if let Some(b) = self.prove(&m, v, depth - 1) {
                    return Some(Derivation::Trans(Box::new(a), Box::new(b)));
                }
            }
        }
        None
    }
}

/// A derivation of `goal` from `hyps` in the congruence rules of `system`,
/// if one is found within `budget`. `None` is not a refutation.
pub fn cong_member(
    g: &Grammar,
    system: System,
    goal: &Assertion,
    hyps: &[Assertion],
    budget: CongBudget,
) -> Option<Derivation> {
    let p = goal.weight;
    let usable: Vec<usize> =
        (0..hyps.len()).filter(|&i| p.is_none() || hyps[i].weight.unwrap_or(0) <= p.unwrap_or(0)).collect();
    let pairs = usable.iter().map(|&i| (hyps[i].left.clone(), hyps[i].right.clone())).collect();
    let mut search = CongSearch::new(g, system, pairs, budget);
    let d = search.prove(&goal.left, &goal.right, budget.depth)?;
    let d = renumber(d, &usable);
    Some(match p {
        Some(p) => d.lift(p, hyps),
        None => d,
    })
}

fn renumber(d: Derivation, map: &[usize]) -> Derivation {
    match d {
        Derivation::Hyp(i) => Derivation::Hyp(map[i]),
        Derivation::Sym(a) => Derivation::Sym(Box::new(renumber(*a, map))),
        Derivation::Trans(a, b) => Derivation::Trans(Box::new(renumber(*a, map)), Box::new(renumber(*b, map))),
        Derivation::Arden { premise, s1, s } => Derivation::Arden { premise: Box::new(renumber(*premise, map)), s1, s },
        Derivation::RightProd { premise, t } => Derivation::RightProd { premise: Box::new(renumber(*premise, map)), t },
        Derivation::LeftProd { s, premises } => {
            Derivation::LeftProd { s, premises: premises.into_iter().map(|d| renumber(d, map)).collect() }
        }
        Derivation::Weaken(n, a) => Derivation::Weaken(n, Box::new(renumber(*a, map))),
        other => other,
    }
}

/// How one pair of a self-generating set is justified.
#[derive(Clone, Debug)]
pub enum PairWitness {
    /// Both sides are the same unit, or both are `∅`.
    Closed,
    /// Letter pairs of `R1` with a derivation of each successor pair.
    Moves(Vec<(Letter, Letter, Derivation)>),
}

#[derive(Clone, Debug)]
pub struct SelfGenWitness {
    pub pairs: Vec<PairWitness>,
}

/// Why a pair of a candidate set is not justified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairFailure {
    pub pair: usize,
    pub reason: String,
    pub successor: Option<(SeriesVector, SeriesVector)>,
}

impl fmt::Display for PairFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pair {}: {}", self.pair, self.reason)?;
        if let Some((a, b)) = &self.successor {
            write!(f, " (successor {a} ~ {b})")?;
        }
        Ok(())
    }
}

fn closed_pair(s: &SeriesVector, t: &SeriesVector) -> Option<bool> {
    match (s.unit_index(), t.unit_index()) {
        (Some(i), Some(j)) => Some(i == j),
        (None, None) if s.is_empty_vector() && t.is_empty_vector() => Some(true),
        (None, None) => None,
        _ => Some(false),
    }
}

fn partners(g: &Grammar, x: Letter) -> Vec<Letter> {
    let t = g.terminals();
    let mut v = vec![x];
    v.extend(t.class(t.class_of(x)).iter().copied().filter(|&y| y != x));
    v
}

/// Checks the self-generating condition pair by pair; `hints[i]` fixes the
/// letter pairs of `R1` for pair `i`.
pub fn check_self_generating(
    g: &Grammar,
    system: System,
    pairs: &[(SeriesVector, SeriesVector)],
    hints: &[Option<Vec<(Letter, Letter)>>],
    budget: CongBudget,
) -> Result<std::result::Result<SelfGenWitness, Vec<PairFailure>>> {
    check_pairs(g, system, pairs, pairs, hints, budget)
}

/// Successors of each of `targets` must be derivable from `hyps`.
fn check_pairs(
    g: &Grammar,
    system: System,
    hyps: &[(SeriesVector, SeriesVector)],
    targets: &[(SeriesVector, SeriesVector)],
    hints: &[Option<Vec<(Letter, Letter)>>],
    budget: CongBudget,
) -> Result<std::result::Result<SelfGenWitness, Vec<PairFailure>>> {
    for (s, t) in hyps.iter().chain(targets) {
        if s.width() != t.width() {
            return Err(Error::Dimension(format!("{s} and {t}")));
        }
        if system == System::B3 && (!s.is_unmarked() || !t.is_unmarked()) {
            return Err(Error::Marked);
        }
    }
    let mut search = CongSearch::new(g, system, hyps.to_vec(), budget);
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    for (i, (s, t)) in targets.iter().enumerate() {
        match closed_pair(s, t) {
            Some(true) => {
                witnesses.push(PairWitness::Closed);
                continue;
            }
            Some(false) => {
                failures.push(PairFailure { pair: i, reason: "unit against non-unit or different units".into(), successor: None });
                continue;
            }
            None => {}
        }
        let succ = |x: Letter, y: Letter, search: &mut CongSearch| -> Result<(Option<Derivation>, (SeriesVector, SeriesVector))> {
            let a = g.action(s, &[x])?;
            let b = g.action(t, &[y])?;
            search.steps = 0;
            let d = search.prove(&a, &b, budget.depth);
            Ok((d, (a, b)))
        };
        let mut moves: Vec<(Letter, Letter, Derivation)> = Vec::new();
        let mut failure = None;
        match hints.get(i).cloned().flatten() {
            Some(r1) => {
                if let Err(m) = check_r1(g, &r1) {
                    failure = Some(PairFailure { pair: i, reason: format!("R1 hint is not admissible: {m}"), successor: None });
                } else {
                    for (x, y) in r1 {
                        let (d, pair) = succ(x, y, &mut search)?;
                        match d {
                            Some(d) => moves.push((x, y, d)),
                            None => {
                                failure = Some(PairFailure {
                                    pair: i,
                                    reason: format!(
                                        "successor on ({}, {}) not derivable",
                                        g.terminals().name(x),
                                        g.terminals().name(y)
                                    ),
                                    successor: Some(pair),
                                });
                                break;
                            }
                        }
                    }
                }
            }
            None => {
                'letters: for x in g.terminals().letters() {
                    for back in [false, true] {
                        if moves.iter().any(|&(a, b, _)| if back { b == x } else { a == x }) {
                            continue;
                        }
                        let mut first = None;
                        let mut done = false;
                        for y in partners(g, x) {
                            let (a, b) = if back { (y, x) } else { (x, y) };
                            let (d, pair) = succ(a, b, &mut search)?;
                            if let Some(d) = d {
                                moves.push((a, b, d));
                                done = true;
                                break;
                            }
                            first.get_or_insert(((a, b), pair));
                        }
                        if !done {
                            let ((a, b), pair) = first.expect("ψ̄(x) contains x");
                            failure = Some(PairFailure {
                                pair: i,
                                reason: format!(
                                    "no derivable successor for {} {}; tried ({}, {})",
                                    if back { "back move on" } else { "letter" },
                                    g.terminals().name(x),
                                    g.terminals().name(a),
                                    g.terminals().name(b)
                                ),
                                successor: Some(pair),
                            });
                            break 'letters;
                        }
                    }
                }
            }
        }
        match failure {
            Some(f) => failures.push(f),
            None => witnesses.push(PairWitness::Moves(moves)),
        }
    }
    Ok(if failures.is_empty() { Ok(SelfGenWitness { pairs: witnesses }) } else { Err(failures) })
}

pub fn is_self_generating(
    g: &Grammar,
    system: System,
    pairs: &[(SeriesVector, SeriesVector)],
    budget: CongBudget,
) -> Result<Option<SelfGenWitness>> {
    Ok(check_self_generating(g, system, pairs, &[], budget)?.ok())
}

/// Independent check of a witness: R1 admissibility and trace replay.
pub fn verify_witness(
    g: &Grammar,
    system: System,
    pairs: &[(SeriesVector, SeriesVector)],
    w: &SelfGenWitness,
) -> std::result::Result<(), String> {
    if w.pairs.len() != pairs.len() {
        return Err("witness size differs from the pair set".into());
    }
    let hyps: Vec<Assertion> = pairs.iter().map(|(a, b)| Assertion::new(a.clone(), b.clone())).collect();
    for (i, ((s, t), pw)) in pairs.iter().zip(&w.pairs).enumerate() {
        match pw {
            PairWitness::Closed => {
                if closed_pair(s, t) != Some(true) {
                    return Err(format!("pair {i} is not closed"));
                }
            }
            PairWitness::Moves(moves) => {
                if s.unit_index().is_some() || t.unit_index().is_some() {
                    return Err(format!("pair {i}: a side is a unit"));
                }
                let r1: Vec<(Letter, Letter)> = moves.iter().map(|&(x, y, _)| (x, y)).collect();
                check_r1(g, &r1).map_err(|m| format!("pair {i}: {m}"))?;
                for (x, y, d) in moves {
                    let got = replay(g, system, &hyps, d).map_err(|e| format!("pair {i}: {e}"))?;
                    let want = (g.action(s, &[*x]).map_err(|e| e.to_string())?, g.action(t, &[*y]).map_err(|e| e.to_string())?);
                    if (got.left, got.right) != want {
                        return Err(format!("pair {i}: trace proves a different successor"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// A proof file: a grammar followed by `pair:`, `r1:` and `goal:` lines.
#[derive(Clone, Debug)]
pub struct ProofFile {
    pub grammar: Grammar,
    pub pairs: Vec<(SeriesVector, SeriesVector)>,
    pub hints: Vec<Option<Vec<(Letter, Letter)>>>,
    pub goals: Vec<(SeriesVector, SeriesVector)>,
}

fn parse_pair(g: &Grammar, text: &str, line: usize, col: usize) -> Result<(SeriesVector, SeriesVector)> {
    let (a, b) = text.split_once('~').ok_or_else(|| Error::parse(line, col, "expected `left ~ right`"))?;
    let left = parse_vector(a, g.variables(), line, col)?;
    let right = parse_vector(b, g.variables(), line, col + a.len() + 1)?;
    if left.width() != right.width() {
        return Err(Error::parse(line, col, "sides have different widths"));
    }
    Ok((left, right))
}

fn parse_r1(g: &Grammar, text: &str, line: usize, col: usize) -> Result<Vec<(Letter, Letter)>> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = col;
    while let Some(start) = rest.find('(') {
        let end = rest[start..].find(')').ok_or_else(|| Error::parse(line, offset + start, "unclosed `(`"))? + start;
        let inner = &rest[start + 1..end];
        let (x, y) = inner.split_once(',').ok_or_else(|| Error::parse(line, offset + start, "expected `(x,x')`"))?;
        let t = g.terminals();
        let lx = t.lookup(x.trim()).ok_or_else(|| Error::parse(line, offset + start + 1, format!("unknown terminal `{}`", x.trim())))?;
        let ly = t.lookup(y.trim()).ok_or_else(|| Error::parse(line, offset + start + 1, format!("unknown terminal `{}`", y.trim())))?;
        out.push((lx, ly));
        offset += end + 1;
        rest = &rest[end + 1..];
    }
    if !rest.trim().is_empty() {
        return Err(Error::parse(line, offset, "unexpected text after R1 pairs"));
    }
    Ok(out)
}

impl ProofFile {
    pub fn parse(text: &str) -> Result<ProofFile> {
        let mut grammar_lines = Vec::new();
        let mut rest = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim_start();
            if t.starts_with("pair:") || t.starts_with("r1:") || t.starts_with("goal:") {
                rest.push((i + 1, line));
            } else {
                grammar_lines.push((i + 1, line));
            }
        }
        let grammar = Grammar::parse_lines(grammar_lines.into_iter())?;
        let mut pairs = Vec::new();
        let mut hints: Vec<Option<Vec<(Letter, Letter)>>> = Vec::new();
        let mut goals = Vec::new();
        for (ln, line) in rest {
            let indent = line.len() - line.trim_start().len();
            let t = line.trim_start();
            let (key, body) = t.split_once(':').expect("key checked above");
            let col = indent + key.len() + 2;
            match key {
                "pair" => {
                    pairs.push(parse_pair(&grammar, body, ln, col)?);
                    hints.push(None);
                }
                "goal" => goals.push(parse_pair(&grammar, body, ln, col)?),
                _ => {
                    let last = hints.last_mut().ok_or_else(|| Error::parse(ln, 1, "`r1:` before any `pair:`"))?;
                    *last = Some(parse_r1(&grammar, body, ln, col)?);
                }
            }
        }
        Ok(ProofFile { grammar, pairs, hints, goals })
    }

    pub fn to_text(&self) -> String {
        let mut out = self.grammar.to_text();
        let t = self.grammar.terminals();
        for ((a, b), hint) in self.pairs.iter().zip(&self.hints) {
            out.push_str(&format!("pair: {a} ~ {b}\n"));
            if let Some(r1) = hint {
                let parts: Vec<String> = r1.iter().map(|&(x, y)| format!("({},{})", t.name(x), t.name(y))).collect();
                out.push_str(&format!("r1: {}\n", parts.join(" ")));
            }
        }
        for (a, b) in &self.goals {
            out.push_str(&format!("goal: {a} ~ {b}\n"));
        }
        out
    }
}

/// Outcome of checking a proof file.
#[derive(Clone, Debug)]
pub struct ProofReport {
    pub failures: Vec<PairFailure>,
    pub num_pairs: usize,
    /// Per goal: whether it is in P or derivable from P.
    pub goals: Vec<bool>,
    /// For uncovered goals: a successor of the goal not derivable from P.
    pub goal_failures: Vec<PairFailure>,
    pub witness: Option<SelfGenWitness>,
}

impl ProofReport {
    pub fn accepted(&self) -> bool {
        self.failures.is_empty() && self.goals.iter().all(|&c| c) && self.witness.is_some()
    }
}

impl fmt::Display for ProofReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs: {}", self.num_pairs)?;
        for fl in &self.failures {
            writeln!(f, "rejected {fl}")?;
        }
        for (i, c) in self.goals.iter().enumerate() {
            writeln!(f, "goal {i}: {}", if *c { "covered" } else { "not covered" })?;
        }
        for fl in &self.goal_failures {
            writeln!(f, "goal {}: {}", fl.pair, fl.reason)?;
            if let Some((a, b)) = &fl.successor {
                writeln!(f, "  successor {a} ~ {b}")?;
            }
        }
        write!(f, "{}", if self.accepted() { "ACCEPTED" } else { "REJECTED" })
    }
}

pub fn verify_proof(file: &ProofFile, budget: CongBudget) -> Result<ProofReport> {
    let g = &file.grammar;
    let result = check_self_generating(g, System::B3, &file.pairs, &file.hints, budget)?;
    let (failures, witness) = match result {
        Ok(w) => match verify_witness(g, System::B3, &file.pairs, &w) {
            Ok(()) => (vec![], Some(w)),
            Err(m) => (vec![PairFailure { pair: 0, reason: format!("trace replay failed: {m}"), successor: None }], None),
        },
        Err(f) => (f, None),
    };
    let hyps: Vec<Assertion> = file.pairs.iter().map(|(a, b)| Assertion::new(a.clone(), b.clone())).collect();
    let goals = file
        .goals
        .iter()
        .map(|(a, b)| {
            let goal = Assertion::new(a.clone(), b.clone());
            match cong_member(g, System::B3, &goal, &hyps, budget) {
                Some(d) => replay(g, System::B3, &hyps, &d).is_ok_and(|c| c == goal),
                None => false,
            }
        })
        .collect::<Vec<bool>>();
    let mut goal_failures = Vec::new();
    for (i, goal) in file.goals.iter().enumerate() {
        if goals[i] {
            continue;
        }
        match check_pairs(g, System::B3, &file.pairs, std::slice::from_ref(goal), &[], budget)? {
            Err(fs) => goal_failures.extend(fs.into_iter().map(|f| PairFailure { pair: i, ..f })),
            Ok(_) => goal_failures.push(PairFailure {
                pair: i,
                reason: "not derivable from P, though its successors are".into(),
                successor: Some(goal.clone()),
            }),
        }
    }
    Ok(ProofReport { failures, num_pairs: file.pairs.len(), goals, goal_failures, witness })
}

pub fn verify_proof_file(text: &str, budget: CongBudget) -> Result<ProofReport> {
    verify_proof(&ProofFile::parse(text)?, budget)
}

/// Limits for `search_proof`.
#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub max_pairs: usize,
    pub max_norm: usize,
    pub cong: CongBudget,
    /// Game order used to choose partners.
    pub lookahead: usize,
}

impl SearchBudget {
    /// Step `k` of the default schedule.
    pub fn step(k: usize) -> Self {
        SearchBudget { max_pairs: k, max_norm: 8 + 2 * k, cong: CongBudget::new(4 * k), lookahead: 2 * k }
    }
}

#[derive(Clone, Debug)]
pub struct ProofSet {
    pub pairs: Vec<(SeriesVector, SeriesVector)>,
    pub witness: SelfGenWitness,
}

/// Head classes matched for generalization, at most this wide.
const MAX_HEAD_MATCH: usize = 6;

/// `u = H·M`, `v = H'·M'` over their nonempty rows. Each column of the wider
/// side is matched to a column of the narrower one (onto), every matched row
/// pair and the resulting head pair surviving the game to `lookahead`;
/// matched columns are summed into one head entry. Returns the head pair
/// followed by the open row pairs.
fn generalize(
    space: &mut PairSpace,
    u: &SeriesVector,
    v: &SeriesVector,
    lookahead: usize,
) -> Option<Vec<(SeriesVector, SeriesVector)>> {
    let nonempty = |x: &SeriesVector| -> Option<Vec<(Letter, SeriesVector)>> {
        let (h, m) = x.decompose_head().ok()?;
        Some(h.iter().zip(m.rows()).filter(|(_, r)| !r.is_empty_vector()).map(|(&l, r)| (l, r.clone())).collect())
    };
    let (cu, cv) = (nonempty(u)?, nonempty(v)?);
    let flip = cu.len() > cv.len();
    let (narrow, wide) = if flip { (&cv, &cu) } else { (&cu, &cv) };
    if narrow.is_empty() || wide.len() > MAX_HEAD_MATCH {
        return None;
    }
    let oriented = |x: &SeriesVector, y: &SeriesVector| if flip { (y.clone(), x.clone()) } else { (x.clone(), y.clone()) };
    let a = u.alphabet().clone();
    let letters_sum = |ls: &[Letter]| ls.iter().fold(Series::empty(&a), |acc, &l| acc.sum(&Series::letter(&a, l)));
    let head_n = SeriesVector::from_entries(a.clone(), narrow.iter().map(|(l, _)| letters_sum(&[*l])).collect());

    struct Ctx<'c> {
        narrow: &'c [(Letter, SeriesVector)],
        wide: &'c [(Letter, SeriesVector)],
        lookahead: usize,
        flip: bool,
    }
    fn assign(
        cx: &Ctx,
        space: &mut PairSpace,
        to: &mut Vec<usize>,
        done: &mut dyn FnMut(&mut PairSpace, &[usize]) -> bool,
    ) -> bool {
        let j = to.len();
        if j == cx.wide.len() {
            return (0..cx.narrow.len()).all(|i| to.contains(&i)) && done(space, to);
        }
        let missing = (0..cx.narrow.len()).filter(|i| !to.contains(i)).count();
        if missing > cx.wide.len() - j {
            return false;
        }
        for i in 0..cx.narrow.len() {
            let (x, y) = (&cx.narrow[i].1, &cx.wide[j].1);
            if closed_pair(x, y) == Some(false) {
                continue;
            }
            let p = if cx.flip { space.pair_of(y, x) } else { space.pair_of(x, y) };
            if !space.alive(p, cx.lookahead) {
                continue;
            }
            to.push(i);
            if assign(cx, space, to, done) {
                return true;
            }
            to.pop();
        }
        false
    }
    let cx = Ctx { narrow, wide, lookahead, flip };
    let mut found = None;
    let mut done = |space: &mut PairSpace, to: &[usize]| {
        let entries = (0..narrow.len())
            .map(|i| {
                let ls: Vec<Letter> = to.iter().enumerate().filter(|&(_, &k)| k == i).map(|(j, _)| wide[j].0).collect();
                letters_sum(&ls)
            })
            .collect();
        let head_w = SeriesVector::from_entries(a.clone(), entries);
        if !head_w.is_deterministic() {
            return false;
        }
        let (x, y) = oriented(&head_n, &head_w);
        let p = space.pair_of(&x, &y);
        if !space.alive(p, lookahead) {
            return false;
        }
        found = Some((head_w, to.to_vec()));
        true
    };
    if !assign(&cx, space, &mut Vec::new(), &mut done) {
        return None;
    }
    let (head_w, to) = found?;
    let mut out = vec![oriented(&head_n, &head_w)];
    for (j, &i) in to.iter().enumerate() {
        let (x, y) = (&narrow[i].1, &wide[j].1);
        if x != y && closed_pair(x, y).is_none() {
            let pair = oriented(x, y);
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    Some(out)
}

/// Frontier expansion: successors not derivable from the current set are
/// added to it. Only sets confirmed by `is_self_generating` are returned.
pub fn search_proof(g: &Grammar, s: &SeriesVector, t: &SeriesVector, budget: SearchBudget) -> Result<Option<ProofSet>> {
    if s.width() != t.width() {
        return Err(Error::Dimension(format!("{s} and {t}")));
    }
    let unmark = |v: &SeriesVector| if v.alphabet().has_marks() { v.erase_marks() } else { Ok(v.clone()) };
    let mut pairs = vec![(unmark(s)?, unmark(t)?)];
    let mut space = PairSpace::new(g);
    let mut i = 0;
    while i < pairs.len() {
        let (a, b) = pairs[i].clone();
        i += 1;
        match closed_pair(&a, &b) {
            Some(true) => continue,
            Some(false) => return Ok(None),
            None => {}
        }
        for x in g.terminals().letters() {
            for back in [false, true] {
                let mut search = CongSearch::new(g, System::B3, pairs.clone(), budget.cong);
                let mut cands = Vec::new();
                let mut derivable = false;
                for y in partners(g, x) {
                    let (l1, l2) = if back { (y, x) } else { (x, y) };
                    let succ = (g.action(&a, &[l1])?, g.action(&b, &[l2])?);
                    search.steps = 0;
                    if search.prove(&succ.0, &succ.1, budget.cong.depth).is_some() {
                        derivable = true;
                        break;
                    }
                    cands.push(succ);
                }
                if derivable {
                    continue;
                }
                let pick = cands.into_iter().find(|(u, v)| {
                    let p = space.pair_of(u, v);
                    space.alive(p, budget.lookahead)
                });
                let Some((u, v)) = pick else { return Ok(None) };
                let adds = generalize(&mut space, &u, &v, budget.lookahead).unwrap_or_else(|| vec![(u, v)]);
                for (u, v) in adds {
                    if pairs.contains(&(u.clone(), v.clone())) {
                        continue;
                    }
                    if pairs.len() >= budget.max_pairs || u.norm().max(v.norm()) > budget.max_norm {
                        return Ok(None);
                    }
                    pairs.push((u, v));
                }
            }
        }
    }
    Ok(is_self_generating(g, System::B3, &pairs, budget.cong)?.map(|witness| ProofSet { pairs, witness }))
}
