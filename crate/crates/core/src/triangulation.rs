//! Weighted linear systems over a basis of deterministic vectors and the
//! triangulation transform INV, with the oracle replaced by bounded games.

use std::fmt;

use crate::alphabet::Letter;
use crate::error::{Error, Result};
use crate::games::{check_wbisim, divergence, order_n_bisim, Divergence, WordRelation};
use crate::grammar::Grammar;
use crate::proofs::{replay, Assertion, Derivation, System};
use crate::series::{parse_vector, parse_vector_list, SeriesMatrix, SeriesVector};

/// `(p, Σ α_j S_j, Σ β_j S_j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub weight: u64,
    pub alpha: SeriesVector,
    pub beta: SeriesVector,
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub basis: Vec<SeriesVector>,
    pub equations: Vec<Equation>,
    /// Index of the first equation.
    pub m: usize,
}

impl LinearSystem {
    pub fn new(basis: Vec<SeriesVector>, equations: Vec<Equation>, m: usize) -> Result<Self> {
        let sys = LinearSystem { basis, equations, m };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<()> {
        let d = self.basis.len();
        let lam = self.basis.first().ok_or_else(|| Error::System("empty basis".into()))?.width();
        for (j, s) in self.basis.iter().enumerate() {
            if s.width() != lam {
                return Err(Error::System(format!("basis vector {} has width {}, expected {lam}", j + 1, s.width())));
            }
            if s.is_empty_vector() {
                return Err(Error::System(format!("basis vector {} is ∅", j + 1)));
            }
            if !s.is_deterministic() {
                return Err(Error::System(format!("basis vector {} is not deterministic", j + 1)));
            }
        }
        if self.equations.is_empty() {
            return Err(Error::System("no equations".into()));
        }
        for (k, e) in self.equations.iter().enumerate() {
            let i = self.m + k;
            if e.weight == 0 {
                return Err(Error::System(format!("equation {i} has weight 0")));
            }
            for (side, row) in [("α", &e.alpha), ("β", &e.beta)] {
                if row.width() != d {
                    return Err(Error::System(format!("equation {i}: {side} row has width {}, expected {d}", row.width())));
                }
                if !row.is_deterministic() {
                    return Err(Error::System(format!("equation {i}: {side} row is not deterministic")));
                }
            }
        }
        Ok(())
    }

    pub fn basis_matrix(&self) -> SeriesMatrix {
        let a = self.basis[0].alphabet().clone();
        SeriesMatrix::from_rows(a, self.basis.clone(), self.basis[0].width()).expect("validated widths")
    }

    /// The equation as an assertion between vectors of width λ.
    pub fn assertion(&self, e: &Equation) -> Result<Assertion> {
        let s = self.basis_matrix();
        Ok(Assertion::weighted(e.weight, e.alpha.mul(&s)?, e.beta.mul(&s)?))
    }

    /// Parses grammar lines followed by `basis:` and `eq: p | [α] | [β]`
    /// lines; an optional `m: k` line sets the first index.
    pub fn parse(text: &str) -> Result<(Grammar, LinearSystem)> {
        let mut grammar_lines = Vec::new();
        let mut rest = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim_start();
            if t.starts_with("basis:") || t.starts_with("eq:") || t.starts_with("m:") {
                rest.push((i + 1, line));
            } else {
                grammar_lines.push((i + 1, line));
            }
        }
        let g = Grammar::parse_lines(grammar_lines.into_iter())?;
        let vars = g.variables();
        let mut basis = None;
        let mut equations = Vec::new();
        let mut m = 1;
        for (ln, line) in rest {
            let indent = line.len() - line.trim_start().len();
            let (key, body) = line.trim_start().split_once(':').expect("key checked");
            let col = indent + key.len() + 2;
            match key {
                "basis" => basis = Some(parse_vector_list(body, vars, ln, col)?),
                "m" => m = body.trim().parse().map_err(|_| Error::parse(ln, col, "expected an index"))?,
                _ => {
                    let parts: Vec<&str> = body.split('|').collect();
                    if parts.len() != 3 {
                        return Err(Error::parse(ln, col, "expected `p | [α] | [β]`"));
                    }
                    let weight = parts[0].trim().parse().map_err(|_| Error::parse(ln, col, "expected a weight"))?;
                    let c1 = col + parts[0].len() + 1;
                    let alpha = parse_vector(parts[1], vars, ln, c1)?;
                    let beta = parse_vector(parts[2], vars, ln, c1 + parts[1].len() + 1)?;
                    equations.push(Equation { weight, alpha, beta });
                }
            }
        }
        let basis = basis.ok_or_else(|| Error::System("missing `basis:` line".into()))?;
        Ok((g, LinearSystem::new(basis, equations, m)?))
    }

    pub fn to_text(&self) -> String {
        let basis: Vec<String> = self.basis.iter().map(ToString::to_string).collect();
        let mut out = format!("m: {}\nbasis: {}\n", self.m, basis.join(", "));
        for e in &self.equations {
            out.push_str(&format!("eq: {} | {} | {}\n", e.weight, e.alpha, e.beta));
        }
        out
    }

    /// Indices `j` whose column is not `∅` in some row.
    pub fn support(&self) -> Vec<usize> {
        (0..self.basis.len())
            .filter(|&j| self.equations.iter().any(|e| !e.alpha.get(j).is_empty() || !e.beta.get(j).is_empty()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    Case1,
    Case2Sub1,
    Case2Sub2,
    Case3,
    Case4,
    Exhausted,
}

/// One step of the recursion.
#[derive(Clone, Debug)]
pub struct InvStep {
    /// Index of the equation the step looked at.
    pub index: usize,
    pub case: Case,
    pub divergence: Divergence,
    /// Present on Case 2 steps.
    pub elimination: Option<Elimination>,
    pub note: Option<String>,
}

/// Data of a Case-2 step: `E'_m = (weight, S_{j0}, Σ c_j S_j)`.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub u: Vec<Letter>,
    pub u2: Vec<Letter>,
    pub j0: usize,
    pub c: SeriesVector,
    pub weight: u64,
    pub certificate: WordRelation,
    /// System before the step.
    pub before: LinearSystem,
    /// `(‖α'_i‖, ‖α_i‖ + ‖γ_m‖ + K0·|u|)` per transformed row, both sides.
    pub norms: Vec<(usize, usize)>,
    pub support: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvOutcome {
    Equation(Equation),
    Bottom,
    OracleExhausted(usize),
}

#[derive(Clone, Debug)]
pub struct InvResult {
    pub outcome: InvOutcome,
    /// Weak codimension.
    pub d: usize,
    pub log: Vec<InvStep>,
}

impl InvResult {
    pub fn weight(&self) -> Option<u64> {
        match &self.outcome {
            InvOutcome::Equation(e) => Some(e.weight),
            _ => None,
        }
    }

    /// Every logged Case-2 step keeps within the norm bound.
    pub fn norm_bounds_hold(&self) -> bool {
        self.log.iter().filter_map(|s| s.elimination.as_ref()).all(|e| e.norms.iter().all(|&(a, b)| a <= b))
    }

    pub fn support_shrinks(&self) -> bool {
        self.log.iter().filter_map(|s| s.elimination.as_ref()).all(|e| e.support.1 < e.support.0)
    }
}

impl fmt::Display for InvResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.log {
            write!(f, "E{}: {:?}, Div = {}", s.index, s.case, s.divergence)?;
            if let Some(e) = &s.elimination {
                write!(f, ", j0 = {}, |u| = {}, E' weight {}", e.j0 + 1, e.u.len(), e.weight)?;
            }
            if let Some(n) = &s.note {
                write!(f, " ({n})")?;
            }
            writeln!(f)?;
        }
        match &self.outcome {
            InvOutcome::Equation(e) => write!(f, "INV = ({}, {}, {}), D = {}", e.weight, e.alpha, e.beta, self.d),
            InvOutcome::Bottom => write!(f, "INV = ⊥"),
            InvOutcome::OracleExhausted(cap) => write!(f, "oracle exhausted at cap {cap}"),
        }
    }
}

/// Minimal `(v, v')` of `r` (length-lexicographic) where the two rows
/// disagree on some unit.
fn choose_pair(
    g: &Grammar,
    r: &WordRelation,
    alpha: &SeriesVector,
    beta: &SeriesVector,
    nu: usize,
) -> Result<Option<(Vec<Letter>, Vec<Letter>, usize)>> {
    let mut pairs: Vec<&(Vec<Letter>, Vec<Letter>)> = r.pairs.iter().filter(|(u, v)| u.len() <= nu && v.len() <= nu).collect();
    pairs.sort_by(|a, b| (a.0.len(), &a.0, &a.1).cmp(&(b.0.len(), &b.0, &b.1)));
    for (u, v) in pairs {
        let (a, b) = (g.action(alpha, u)?, g.action(beta, v)?);
        for j in 0..alpha.width() {
            if (a.unit_index() == Some(j)) != (b.unit_index() == Some(j)) {
                return Ok(Some((u.clone(), v.clone(), j)));
            }
        }
    }
    Ok(None)
}

/// The INV transform with the oracle replaced by games capped at `cap`.
pub fn inv_transform(g: &Grammar, sys: &LinearSystem, cap: usize) -> Result<InvResult> {
    sys.validate()?;
    let k0 = g.compute_k0();
    let mut cur = sys.clone();
    let mut log = Vec::new();
    let mut d = 0;
    loop {
        let e = cur.equations[0].clone();
        let div = divergence(g, &e.alpha, &e.beta, cap)?;
        let mut step = InvStep { index: cur.m, case: Case::Exhausted, divergence: div, elimination: None, note: None };
        let nu = match div {
            Divergence::Infinite => {
                step.case = Case::Case1;
                log.push(step);
                let w = Equation { weight: e.weight - 1, alpha: e.alpha, beta: e.beta };
                return Ok(InvResult { outcome: InvOutcome::Equation(w), d, log });
            }
            Divergence::AtLeast(c) => {
                log.push(step);
                return Ok(InvResult { outcome: InvOutcome::OracleExhausted(c), d, log });
            }
            Divergence::Finite(nu) => nu,
        };
        if cur.equations.len() == 1 {
            step.case = Case::Case3;
            log.push(step);
            return Ok(InvResult { outcome: InvOutcome::Bottom, d: 0, log });
        }
        let next_weight = cur.equations[1].weight;
        if next_weight < e.weight + 2 * nu as u64 + 1 {
            step.case = Case::Case4;
            log.push(step);
            return Ok(InvResult { outcome: InvOutcome::Bottom, d: 0, log });
        }
        let side = cur.assertion(&e)?;
        let Some(cert) = order_n_bisim(g, &side.left, &side.right, nu)? else {
            step.case = Case::Case4;
            step.note = Some(format!("the sides of E{} are not {nu}-bisimilar", cur.m));
            log.push(step);
            return Ok(InvResult { outcome: InvOutcome::Bottom, d: 0, log });
        };
        let Some((u, u2, j0)) = choose_pair(g, &cert, &e.alpha, &e.beta, nu)? else {
            step.note = Some("no pair of the certificate separates the rows".into());
            log.push(step);
            return Ok(InvResult { outcome: InvOutcome::OracleExhausted(cap), d, log });
        };
        let (au, bu) = (g.action(&e.alpha, &u)?, g.action(&e.beta, &u2)?);
        let (case, gamma, pivot_norm) = if au.unit_index() == Some(j0) {
            (Case::Case2Sub1, bu, e.beta.norm())
        } else {
            (Case::Case2Sub2, au, e.alpha.norm())
        };
        let c = gamma.nabla_star(j0)?;
        let before = cur.clone();
        let mut equations = Vec::new();
        let mut norms = Vec::new();
        for eq in &cur.equations[1..] {
            let alpha = eq.alpha.nabla(&c, j0)?;
            let beta = eq.beta.nabla(&c, j0)?;
            norms.push((alpha.norm(), eq.alpha.norm() + pivot_norm + k0 * u.len()));
            norms.push((beta.norm(), eq.beta.norm() + pivot_norm + k0 * u.len()));
            equations.push(Equation { weight: eq.weight, alpha, beta });
        }
        let next = LinearSystem { basis: cur.basis.clone(), equations, m: cur.m + 1 };
        let support = (cur.support().len(), next.support().len());
        step.case = case;
        step.elimination = Some(Elimination {
            weight: e.weight + 2 * u.len() as u64,
            u,
            u2,
            j0,
            c,
            certificate: cert,
            before,
            norms,
            support,
        });
        log.push(step);
        d += 1;
        cur = next;
    }
}

/// A named step of the replayed deduction.
#[derive(Clone, Debug)]
pub struct T1Step {
    pub name: String,
    pub conclusion: Assertion,
}

/// Failure of `check_t1`, naming the step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct T1Failure {
    pub step: String,
    pub msg: String,
}

impl fmt::Display for T1Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.msg)
    }
}

struct T1Replay<'a> {
    g: &'a Grammar,
    hyps: Vec<Assertion>,
    steps: Vec<T1Step>,
}

impl T1Replay<'_> {
    /// Replays `d` and records its conclusion as a new hypothesis.
    fn run(&mut self, name: String, d: &Derivation, expect: &Assertion) -> std::result::Result<usize, T1Failure> {
        let got = replay(self.g, System::B1, &self.hyps, d).map_err(|e| T1Failure { step: name.clone(), msg: e.to_string() })?;
        if &got != expect {
            return Err(T1Failure { step: name, msg: format!("derived {got}, expected {expect}") });
        }
        self.hyps.push(got.clone());
        self.steps.push(T1Step { name, conclusion: got });
        Ok(self.hyps.len() - 1)
    }

    fn add_hyp(&mut self, a: Assertion) -> usize {
        self.hyps.push(a);
        self.hyps.len() - 1
    }
}

fn lift(d: Derivation, from: u64, to: u64) -> Derivation {
    if to > from {
        Derivation::Weaken(to - from, Box::new(d))
    } else {
        d
    }
}

/// `(row·S, row·S')` where `S'` replaces basis row `j0` by `c·S`, at
/// weight `p`, using `E'` (hypothesis `ep`, weight `q`).
fn substitution(
    basis: &SeriesMatrix,
    row: &SeriesVector,
    j0: usize,
    ep: usize,
    q: u64,
    p: u64,
) -> Derivation {
    let premises = (0..basis.num_rows())
        .map(|j| if j == j0 { lift(Derivation::Hyp(ep), q, p) } else { lift(Derivation::Refl(basis.row(j).clone()), 0, p) })
        .collect();
    Derivation::LeftProd { s: row.clone(), premises }
}

fn err(step: &str) -> impl Fn(Error) -> T1Failure + '_ {
    move |e| T1Failure { step: step.into(), msg: e.to_string() }
}

fn trans(a: Derivation, b: Derivation) -> Derivation {
    Derivation::Trans(Box::new(a), Box::new(b))
}

fn sym(a: Derivation) -> Derivation {
    Derivation::Sym(Box::new(a))
}

/// Replays the deduction `{INV} ∪ {E_i | i < m + D} ⊢ E_{m+D}` through the
/// B1 checker. The step `E_m ⊢ E'_m` enters as an oracle hypothesis: the
/// pair `(u, u')` is checked against a verified certificate of `E_m` and
/// the rest of that step is an Arden application.
pub fn check_t1(g: &Grammar, sys: &LinearSystem, result: &InvResult) -> std::result::Result<Vec<T1Step>, T1Failure> {
    let fail = |step: &str, msg: String| T1Failure { step: step.into(), msg };
    let InvOutcome::Equation(inv) = &result.outcome else {
        return Err(fail("input", "the result is not an equation".into()));
    };
    let d = result.d;
    if d >= sys.equations.len() {
        return Err(fail("input", format!("codimension {d} exceeds the system")));
    }
    let elims: Vec<&Elimination> = result.log.iter().filter_map(|s| s.elimination.as_ref()).collect();
    if elims.len() != d {
        return Err(fail("input", "log does not match the codimension".into()));
    }
    let basis = sys.basis_matrix();
    let assertion = |p: u64, a: &SeriesVector, b: &SeriesVector, step: &str| -> std::result::Result<Assertion, T1Failure> {
        Ok(Assertion::weighted(p, a.mul(&basis).map_err(err(step))?, b.mul(&basis).map_err(err(step))?))
    };
    let mut rp = T1Replay { g, hyps: Vec::new(), steps: Vec::new() };
    let inv_h = rp.add_hyp(Assertion::weighted(inv.weight, inv.alpha.clone(), inv.beta.clone()));
    let top = sys.m + d;
    // hypothesis indices of the current level's equations E^{(k)}_i, i < m + D
    let mut level: Vec<usize> = Vec::new();
    for e in &sys.equations[..d] {
        let a = sys.assertion(e).map_err(err("input"))?;
        level.push(rp.add_hyp(a));
    }
    let mut rows: Vec<Equation> = sys.equations.clone();
    let mut eprimes: Vec<(usize, u64)> = Vec::new();
    for (k, el) in elims.iter().enumerate() {
        let i_m = sys.m + k;
        let em = &rows[k];
        let name = format!("E{i_m}⊢E'{i_m}");
        let sides = assertion(em.weight, &em.alpha, &em.beta, &name)?;
        if check_wbisim(g, &el.certificate.truncate(el.u.len()), &sides.left, &sides.right, el.u.len()).is_err() {
            return Err(fail(&name, "certificate does not verify for the sides".into()));
        }
        if !el.certificate.contains(&el.u, &el.u2) {
            return Err(fail(&name, "(u, u') is not in the certificate".into()));
        }
        let l = g.action(&sides.left, &el.u).map_err(err(&name))?;
        let r = g.action(&sides.right, &el.u2).map_err(err(&name))?;
        let q = em.weight + 2 * el.u.len() as u64;
        if q != el.weight {
            return Err(fail(&name, format!("E' weight {} differs from p + 2|u| = {q}", el.weight)));
        }
        let au = g.action(&em.alpha, &el.u).map_err(err(&name))?;
        let bu = g.action(&em.beta, &el.u2).map_err(err(&name))?;
        let sub1 = au.unit_index() == Some(el.j0);
        let gamma = if sub1 { &bu } else { &au };
        if (if sub1 { bu.unit_index() } else { au.unit_index() }) == Some(el.j0) {
            return Err(fail(&name, "both sides reach the pivot unit".into()));
        }
        if l != au.mul(&basis).map_err(err(&name))? || r != bu.mul(&basis).map_err(err(&name))? {
            return Err(fail(&name, "action does not commute with the basis".into()));
        }
        let oracle = rp.add_hyp(Assertion::weighted(q, l, r));
        let s1 = gamma.get(el.j0).clone();
        let mut rest = gamma.clone().into_entries();
        rest[el.j0] = crate::series::Series::empty(g.variables());
        let s_rest = SeriesVector::from_entries(g.variables().clone(), rest).mul(&basis).map_err(err(&name))?;
        let eq_side = if sub1 { sym(Derivation::Hyp(oracle)) } else { Derivation::Hyp(oracle) };
        let arden = Derivation::Arden { premise: Box::new(eq_side), s1, s: s_rest };
        let expect = Assertion::weighted(q, basis.row(el.j0).clone(), el.c.mul(&basis).map_err(err(&name))?);
        let ep = rp.run(name, &sym(arden), &expect)?;
        eprimes.push((ep, q));
        // E^{(k)}_i ⊢ E^{(k+1)}_i for the remaining rows below m + D
        let mut next_rows = vec![rows[0].clone(); k + 1];
        let mut next_level = level.clone();
        for (idx, eq) in rows.iter().enumerate().skip(k + 1) {
            let alpha = eq.alpha.nabla(&el.c, el.j0).map_err(err("nabla"))?;
            let beta = eq.beta.nabla(&el.c, el.j0).map_err(err("nabla"))?;
            let neq = Equation { weight: eq.weight, alpha, beta };
            if idx < d {
                let name = format!("E{},E'{i_m}⊢E'{}", sys.m + idx, sys.m + idx);
                let p = eq.weight;
                let left = substitution(&basis, &eq.alpha, el.j0, ep, q, p);
                let right = substitution(&basis, &eq.beta, el.j0, ep, q, p);
                let chain = trans(trans(sym(left), Derivation::Hyp(level[idx])), right);
                let expect = assertion(p, &neq.alpha, &neq.beta, &name)?;
                next_level[idx] = rp.run(name, &chain, &expect)?;
            }
            next_rows.push(neq);
        }
        rows = next_rows;
        level = next_level;
    }
    // base: INV ⊢ τ_{-1}(E^{(D)}_{m+D}) by R7
    let last = &rows[d];
    let p1 = inv.weight;
    if inv.alpha != last.alpha || inv.beta != last.beta {
        return Err(fail("R7", "INV rows differ from the transformed equation".into()));
    }
    let base = Derivation::RightProd { premise: Box::new(Derivation::Hyp(inv_h)), t: basis.clone() };
    let expect = assertion(p1, &last.alpha, &last.beta, "R7")?;
    let mut cur = rp.run(format!("INV⊢τ(E{top})"), &base, &expect)?;
    // unwind the levels
    let mut level_rows: Vec<Equation> = Vec::new();
    {
        let mut r = sys.equations[d].clone();
        level_rows.push(r.clone());
        for el in &elims {
            r = Equation { weight: r.weight, alpha: r.alpha.nabla(&el.c, el.j0).map_err(err("nabla"))?, beta: r.beta.nabla(&el.c, el.j0).map_err(err("nabla"))? };
            level_rows.push(r.clone());
        }
    }
    for k in (0..d).rev() {
        let el = elims[k];
        let (ep, q) = eprimes[k];
        let below = &level_rows[k];
        let name = format!("E'{},τ(E'{top})⊢τ(E{top})", sys.m + k);
        let left = substitution(&basis, &below.alpha, el.j0, ep, q, p1);
        let right = substitution(&basis, &below.beta, el.j0, ep, q, p1);
        let chain = trans(trans(left, Derivation::Hyp(cur)), sym(right));
        let expect = assertion(p1, &below.alpha, &below.beta, &name)?;
        cur = rp.run(name, &chain, &expect)?;
    }
    let target = sys.assertion(&sys.equations[d]).map_err(err("R0"))?;
    rp.run("R0".into(), &Derivation::Weaken(1, Box::new(Derivation::Hyp(cur))), &target)?;
    Ok(rp.steps)
}
