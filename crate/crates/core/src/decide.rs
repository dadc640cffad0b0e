//! The semi-decision driver: pda ingestion, reduction to a pair of
//! deterministic series and the interleaved refutation/proof schedule.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::games::{divergence, order_n_bisim, Divergence, WordRelation};
use crate::grammar::{Config, Grammar, Pda, PdaPipeline};
use crate::graphs::determinize_pda;
use crate::proofs::{search_proof, verify_proof, CongBudget, ProofFile, ProofReport, ProofSet, SearchBudget};
use crate::series::SeriesVector;

/// Step `k` (from 1) uses refutation cap `cap·k`, at most `pairs·k` proof
/// pairs of norm `≤ 8 + 2k` and congruence budget `4k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub steps: usize,
    pub cap: usize,
    pub pairs: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { steps: 8, cap: 2, pairs: 1 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.cap == 0 || self.pairs == 0 {
            return Err(Error::Input("schedule parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn cap_at(&self, k: usize) -> usize {
        self.cap * k
    }

    pub fn search_at(&self, k: usize) -> SearchBudget {
        SearchBudget {
            max_pairs: self.pairs * k,
            max_norm: 8 + 2 * k,
            cong: CongBudget::new(4 * k),
            lookahead: self.cap_at(k),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} steps; step k: cap {}k, {}k pairs of norm <= 8+2k, congruence budget 4k",
            self.steps, self.cap, self.pairs
        )
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Bisimilar(ProofSet),
    /// Divergence `order`; `certificate` is an order-`(order − 1)` relation.
    NotBisimilar { order: usize, certificate: Option<WordRelation> },
    Undecided { steps: usize },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Bisimilar(_) => "BISIMILAR",
            Verdict::NotBisimilar { .. } => "NOT-BISIMILAR",
            Verdict::Undecided { .. } => "UNDECIDED",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decision {
    pub grammar: Grammar,
    pub left: SeriesVector,
    pub right: SeriesVector,
    pub verdict: Verdict,
    pub schedule: Schedule,
    /// Step at which the verdict was reached.
    pub step: usize,
    pub log: Vec<String>,
}

impl Decision {
    /// The proof file of a BISIMILAR verdict.
    pub fn proof_file(&self) -> Option<ProofFile> {
        let Verdict::Bisimilar(p) = &self.verdict else { return None };
        Some(ProofFile {
            grammar: self.grammar.clone(),
            pairs: p.pairs.clone(),
            hints: vec![None; p.pairs.len()],
            goals: vec![(self.left.clone(), self.right.clone())],
        })
    }

    /// Re-checks the verdict independently of the search that produced it.
    pub fn reverify(&self) -> std::result::Result<(), String> {
        match &self.verdict {
            Verdict::Bisimilar(_) => {
                let file = self.proof_file().expect("bisimilar");
                let report: ProofReport = verify_proof(&file, CongBudget::new(4 * self.step.max(1))).map_err(|e| e.to_string())?;
                if report.accepted() {
                    Ok(())
                } else {
                    Err(report.to_string())
                }
            }
            Verdict::NotBisimilar { order, .. } => {
                let g = &self.grammar;
                let at = order_n_bisim(g, &self.left, &self.right, *order).map_err(|e| e.to_string())?;
                if at.is_some() {
                    return Err(format!("a certificate exists at order {order}"));
                }
                if *order > 0 && order_n_bisim(g, &self.left, &self.right, order - 1).map_err(|e| e.to_string())?.is_none() {
                    return Err(format!("no certificate at order {}", order - 1));
                }
                Ok(())
            }
            Verdict::Undecided { .. } => Ok(()),
        }
    }
}

/// Runs the schedule on two vectors of `g`.
pub fn decide_series(g: &Grammar, s: &SeriesVector, t: &SeriesVector, schedule: Schedule) -> Result<Decision> {
    schedule.validate()?;
    if s.width() != t.width() {
        return Err(Error::Dimension(format!("{s} and {t}")));
    }
    let mut log = Vec::new();
    let done = |verdict, step, log| Decision {
        grammar: g.clone(),
        left: s.clone(),
        right: t.clone(),
        verdict,
        schedule,
        step,
        log,
    };
    for k in 1..=schedule.steps {
        let cap = schedule.cap_at(k);
        let div = divergence(g, s, t, cap)?;
        log.push(format!("step {k}: divergence with cap {cap}: {div}"));
        if let Divergence::Finite(n) = div {
            let certificate = if n > 0 { order_n_bisim(g, s, t, n - 1)? } else { None };
            return Ok(done(Verdict::NotBisimilar { order: n, certificate }, k, log));
        }
        let budget = schedule.search_at(k);
        match search_proof(g, s, t, budget)? {
            Some(p) => {
                log.push(format!("step {k}: proof with {} pairs", p.pairs.len()));
                return Ok(done(Verdict::Bisimilar(p), k, log));
            }
            None => log.push(format!("step {k}: no proof within {} pairs", budget.max_pairs)),
        }
    }
    Ok(done(Verdict::Undecided { steps: schedule.steps }, schedule.steps, log))
}

/// Configurations reachable from `start`, searched up to `limit` of them.
fn reachable(pda: &Pda, start: &Config, target: &Config, limit: usize) -> bool {
    let start = pda.eps_closure(start);
    let target = pda.eps_closure(target);
    let mut seen: HashSet<Config> = HashSet::new();
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    while let Some(c) = queue.pop_front() {
        if c == target {
            return true;
        }
        if seen.len() > limit {
            return false;
        }
        for x in 0..pda.input.len() as u32 {
            for n in pda.successors(&c, x) {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

/// Configurations visited by the reachability check.
pub const REACH_LIMIT: usize = 100_000;

/// A pda prepared for deciding: co-root, determinization, grammars.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub source: Pda,
    pub coroot: Pda,
    pub pipeline: PdaPipeline,
}

impl Prepared {
    /// Letters are first replaced by their ψ-images, so the result decides
    /// ψ-bisimilarity of `pda`.
    pub fn new(pda: &Pda) -> Result<Prepared> {
        let source = pda.project().split_pushes()?;
        let coroot = source.with_coroot()?;
        let det = determinize_pda(&coroot)?;
        let pipeline = PdaPipeline::new(det)?;
        Ok(Prepared { source, coroot, pipeline })
    }

    pub fn grammar(&self) -> &Grammar {
        self.pipeline.g0()
    }

    /// `θ` of a configuration of the source pda, after checking it is
    /// reachable from the initial configuration.
    pub fn theta_of(&self, c: &Config) -> Result<SeriesVector> {
        if !reachable(&self.source, &self.source.initial, c, REACH_LIMIT) {
            return Err(Error::Input(format!("configuration {} is not reachable", self.source.format_config(c))));
        }
        let lifted = self.coroot.lift_to_coroot(c);
        Ok(SeriesVector::scalar(self.pipeline.theta0(&lifted)))
    }
}

/// Decides `v ~ v'` for two configurations of one pda.
pub fn decide_configs(pda: &Pda, v: &Config, v2: &Config, schedule: Schedule) -> Result<Decision> {
    let p = Prepared::new(pda)?;
    let (s, t) = (p.theta_of(v)?, p.theta_of(v2)?);
    decide_series(p.grammar(), &s, &t, schedule)
}

/// Renames a configuration of one side of `Pda::union` into the union.
pub fn config_in_union(union: &Pda, side: &Pda, prefix: &str, c: &Config) -> Result<Config> {
    let mut text = format!("{prefix}{}", side.states[c.state as usize]);
    for &z in &c.stack {
        text.push_str(&format!(" {prefix}{}", side.stack_symbols[z as usize]));
    }
    union.parse_config(&text)
}

/// Grammar and `θ` vectors of configurations of two pdas (initial ones by
/// default), built on their union.
pub fn union_series(
    left: &Pda,
    right: &Pda,
    v: Option<&Config>,
    v2: Option<&Config>,
) -> Result<(Grammar, SeriesVector, SeriesVector)> {
    let v = v.unwrap_or(&left.initial);
    let v2 = v2.unwrap_or(&right.initial);
    for (pda, c) in [(left, v), (right, v2)] {
        if !reachable(pda, &pda.initial, c, REACH_LIMIT) {
            return Err(Error::Input(format!("configuration {} is not reachable", pda.format_config(c))));
        }
    }
    let (u, _, _) = left.union(right)?;
    let a = config_in_union(&u, left, "l.", v)?;
    let b = config_in_union(&u, right, "r.", v2)?;
    let p = Prepared::new(&u)?;
    let s = SeriesVector::scalar(p.pipeline.theta0(&p.coroot.lift_to_coroot(&a)));
    let t = SeriesVector::scalar(p.pipeline.theta0(&p.coroot.lift_to_coroot(&b)));
    Ok((p.grammar().clone(), s, t))
}

/// Decides `v ~ v'` for configurations of two pdas (initial ones by default).
pub fn decide_pdas(
    left: &Pda,
    right: &Pda,
    v: Option<&Config>,
    v2: Option<&Config>,
    schedule: Schedule,
) -> Result<Decision> {
    let (g, s, t) = union_series(left, right, v, v2)?;
    decide_series(&g, &s, &t, schedule)
}
