//! Pushdown automata in the line-oriented text format:
//!
//! ```text
//! states: p q
//! stack: Z A
//! input: a b
//! initial: p Z
//! final: q
//! psi: a->x
//! p Z a -> p A Z
//! p A b -> q
//! q Z eps -> q
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub from: u32,
    pub top: u32,
    /// `None` for an ε-rule.
    pub input: Option<u32>,
    pub to: u32,
    /// Replaces `top`; leftmost symbol ends on top.
    pub push: Vec<u32>,
}

/// A configuration `q ω` with the top of the stack at index 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    pub state: u32,
    pub stack: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pda {
    pub states: Vec<String>,
    pub stack_symbols: Vec<String>,
    pub input: Vec<String>,
    /// ψ-image name of every input letter.
    pub psi: Vec<String>,
    pub rules: Vec<Rule>,
    pub initial: Config,
    /// Final configurations are `q ε` for these states.
    pub finals: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Determinism0,
    Determinism1,
    Determinism2,
    Normalization0,
    Normalization1,
    Normalization2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub offending: Vec<String>,
}

impl ConditionCheck {
    pub fn passed(&self) -> bool {
        self.offending.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalReport {
    pub checks: Vec<ConditionCheck>,
}

impl NormalReport {
    pub fn passed(&self, c: Condition) -> bool {
        self.checks.iter().find(|k| k.condition == c).is_none_or(ConditionCheck::passed)
    }

    /// Conditions determinism0/1 and normalization0–2.
    pub fn is_normalized(&self) -> bool {
        use Condition::*;
        [Determinism0, Determinism1, Normalization0, Normalization1, Normalization2]
            .iter()
            .all(|&c| self.passed(c))
    }

    pub fn is_deterministic(&self) -> bool {
        use Condition::*;
        [Determinism0, Determinism1, Determinism2].iter().all(|&c| self.passed(c))
    }

    pub fn failures(&self) -> Vec<&ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }
}

impl fmt::Display for NormalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed() {
                writeln!(f, "{:?}: pass", c.condition)?;
            } else {
                writeln!(f, "{:?}: FAIL ({})", c.condition, c.offending.join("; "))?;
            }
        }
        Ok(())
    }
}

struct Names {
    list: Vec<String>,
    index: HashMap<String, u32>,
}

impl Names {
    fn new() -> Self {
        Names { list: Vec::new(), index: HashMap::new() }
    }

    fn get(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.list.len() as u32;
        self.list.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }
}

impl Pda {
    pub fn parse(text: &str) -> Result<Pda> {
        let mut states = Names::new();
        let mut stack = Names::new();
        let mut input = Names::new();
        let mut psi: BTreeMap<u32, String> = BTreeMap::new();
        let mut rules = Vec::new();
        let mut initial = None;
        let mut finals = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") || line.starts_with("# ") || line == "#" {
                continue;
            }
            if let Some((key, rest)) = line.split_once(':') {
                let key = key.trim();
                let toks: Vec<&str> = rest.split_whitespace().collect();
                match key {
                    "states" => toks.iter().for_each(|t| {
                        states.get(t);
                    }),
                    "stack" => toks.iter().for_each(|t| {
                        stack.get(t);
                    }),
                    "input" => toks.iter().for_each(|t| {
                        input.get(t);
                    }),
                    "initial" => {
                        if toks.len() < 2 {
                            return Err(Error::parse(line_no, 1, "initial needs a state and a stack word"));
                        }
                        let q = states.get(toks[0]);
                        let w = toks[1..].iter().map(|t| stack.get(t)).collect();
                        initial = Some(Config { state: q, stack: w });
                    }
                    "final" => toks.iter().for_each(|t| finals.push(states.get(t))),
                    "psi" => {
                        for t in toks {
                            let (x, y) = t
                                .split_once("->")
                                .ok_or_else(|| Error::parse(line_no, 1, "psi entries look like x->y"))?;
                            let xi = input.get(x);
                            psi.insert(xi, y.to_string());
                        }
                    }
                    other => return Err(Error::parse(line_no, 1, format!("unknown header `{other}`"))),
                }
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| Error::parse(line_no, 1, "expected `p z x -> q w`"))?;
            let l: Vec<&str> = lhs.split_whitespace().collect();
            let r: Vec<&str> = rhs.split_whitespace().collect();
            if l.len() != 3 || r.is_empty() {
                return Err(Error::parse(line_no, 1, "expected `p z x -> q w`"));
            }
            let from = states.get(l[0]);
            let top = stack.get(l[1]);
            let inp = if l[2] == "eps" { None } else { Some(input.get(l[2])) };
            let to = states.get(r[0]);
            let push = r[1..].iter().map(|t| stack.get(t)).collect();
            rules.push(Rule { from, top, input: inp, to, push });
        }
        let initial = initial.ok_or_else(|| Error::parse(1, 1, "missing `initial:` line"))?;
        let psi_names = (0..input.list.len() as u32)
            .map(|x| psi.get(&x).cloned().unwrap_or_else(|| input.list[x as usize].clone()))
            .collect();
        Ok(Pda {
            states: states.list,
            stack_symbols: stack.list,
            input: input.list,
            psi: psi_names,
            rules,
            initial,
            finals,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("states: {}\n", self.states.join(" ")));
        out.push_str(&format!("stack: {}\n", self.stack_symbols.join(" ")));
        out.push_str(&format!("input: {}\n", self.input.join(" ")));
        out.push_str(&format!("initial: {}\n", self.format_config(&self.initial)));
        if !self.finals.is_empty() {
            let f: Vec<&str> = self.finals.iter().map(|&q| self.states[q as usize].as_str()).collect();
            out.push_str(&format!("final: {}\n", f.join(" ")));
        }
        let psi: Vec<String> = self
            .input
            .iter()
            .zip(&self.psi)
            .filter(|(x, y)| x != y)
            .map(|(x, y)| format!("{x}->{y}"))
            .collect();
        if !psi.is_empty() {
            out.push_str(&format!("psi: {}\n", psi.join(" ")));
        }
        for r in &self.rules {
            out.push_str(&self.format_rule(r));
            out.push('\n');
        }
        out
    }

    pub fn format_rule(&self, r: &Rule) -> String {
        let x = r.input.map_or("eps", |x| self.input[x as usize].as_str());
        let mut s = format!(
            "{} {} {} -> {}",
            self.states[r.from as usize], self.stack_symbols[r.top as usize], x, self.states[r.to as usize]
        );
        for &z in &r.push {
            s.push(' ');
            s.push_str(&self.stack_symbols[z as usize]);
        }
        s
    }

    pub fn format_config(&self, c: &Config) -> String {
        let mut s = self.states[c.state as usize].clone();
        for &z in &c.stack {
            s.push(' ');
            s.push_str(&self.stack_symbols[z as usize]);
        }
        s
    }

    /// Parses `q z1 z2 ...`.
    pub fn parse_config(&self, text: &str) -> Result<Config> {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let state = self
            .state_index(toks.first().copied().unwrap_or(""))
            .ok_or_else(|| Error::Input(format!("unknown state in configuration `{text}`")))?;
        let stack = toks[1..]
            .iter()
            .map(|t| {
                self.stack_index(t).ok_or_else(|| Error::Input(format!("unknown stack symbol `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Config { state, stack })
    }

    pub fn state_index(&self, name: &str) -> Option<u32> {
        self.states.iter().position(|s| s == name).map(|i| i as u32)
    }

    pub fn stack_index(&self, name: &str) -> Option<u32> {
        self.stack_symbols.iter().position(|s| s == name).map(|i| i as u32)
    }

    pub fn input_index(&self, name: &str) -> Option<u32> {
        self.input.iter().position(|s| s == name).map(|i| i as u32)
    }

    pub fn rules_at(&self, q: u32, z: u32, input: Option<u32>) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.from == q && r.top == z && r.input == input)
    }

    pub fn eps_rule(&self, q: u32, z: u32) -> Option<&Rule> {
        self.rules_at(q, z, None).next()
    }

    pub fn is_eps_free(&self, c: &Config) -> bool {
        c.stack.first().is_none_or(|&z| self.eps_rule(c.state, z).is_none())
    }

    pub fn apply(&self, c: &Config, r: &Rule) -> Config {
        let mut stack = r.push.clone();
        stack.extend_from_slice(&c.stack[1..]);
        Config { state: r.to, stack }
    }

    /// Applies ε-rules until the configuration is ε-free or the stack is empty.
    pub fn eps_closure(&self, c: &Config) -> Config {
        let mut c = c.clone();
        let mut guard = 0usize;
        while let Some(&z) = c.stack.first() {
            match self.eps_rule(c.state, z) {
                Some(r) => {
                    c = self.apply(&c, r);
                    guard += 1;
                    if guard > 10_000 {
                        break;
                    }
                }
                None => break,
            }
        }
        c
    }

    /// One `x`-move followed by ε-closure, from an ε-free configuration.
    pub fn successors(&self, c: &Config, x: u32) -> Vec<Config> {
        let Some(&z) = c.stack.first() else { return vec![] };
        self.rules_at(c.state, z, Some(x)).map(|r| self.eps_closure(&self.apply(c, r))).collect()
    }

    /// Deterministic run of `word` from `c`; `None` when some step is blocked.
    pub fn run(&self, c: &Config, word: &[u32]) -> Option<Config> {
        let mut cur = self.eps_closure(c);
        for &x in word {
            cur = self.successors(&cur, x).into_iter().next()?;
        }
        Some(cur)
    }

    pub fn check_normalized(&self) -> NormalReport {
        use Condition::*;
        let mut groups: BTreeMap<(u32, u32), (Vec<&Rule>, BTreeMap<u32, Vec<&Rule>>)> = BTreeMap::new();
        for r in &self.rules {
            let g = groups.entry((r.from, r.top)).or_default();
            match r.input {
                None => g.0.push(r),
                Some(x) => g.1.entry(x).or_default().push(r),
            }
        }
        let mut d0 = Vec::new();
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for ((q, z), (eps, by_x)) in &groups {
            let mode = format!("{} {}", self.states[*q as usize], self.stack_symbols[*z as usize]);
            if eps.len() > 1 {
                d0.push(format!("{mode}: {} ε-rules", eps.len()));
            }
            if !eps.is_empty() && !by_x.is_empty() {
                d1.push(format!("{mode}: ε-rule together with input rules"));
            }
            if eps.is_empty() {
                for (x, rs) in by_x {
                    if rs.len() > 1 {
                        d2.push(format!("{mode} on {}: {} rules", self.input[*x as usize], rs.len()));
                    }
                }
            }
        }
        let n0 = if self.initial.stack.is_empty() || !self.is_eps_free(&self.initial) {
            vec![format!("initial configuration `{}` is not ε-free", self.format_config(&self.initial))]
        } else {
            vec![]
        };
        let n1 = self
            .rules
            .iter()
            .filter(|r| r.input.is_some() && r.push.len() > 2)
            .map(|r| self.format_rule(r))
            .collect();
        let n2 = self
            .rules
            .iter()
            .filter(|r| r.input.is_none() && !r.push.is_empty())
            .map(|r| self.format_rule(r))
            .collect();
        let mk = |condition, offending| ConditionCheck { condition, offending };
        NormalReport {
            checks: vec![
                mk(Determinism0, d0),
                mk(Determinism1, d1),
                mk(Determinism2, d2),
                mk(Normalization0, n0),
                mk(Normalization1, n1),
                mk(Normalization2, n2),
            ],
        }
    }

    /// Renames every letter to its ψ-image and drops duplicate rules; the
    /// result has the identity ψ.
    pub fn project(&self) -> Pda {
        let mut input: Vec<String> = Vec::new();
        for y in &self.psi {
            if !input.contains(y) {
                input.push(y.clone());
            }
        }
        let image = |x: u32| input.iter().position(|y| *y == self.psi[x as usize]).expect("ψ-image") as u32;
        let mut rules: Vec<Rule> = Vec::new();
        for r in &self.rules {
            let r = Rule { input: r.input.map(image), ..r.clone() };
            if !rules.contains(&r) {
                rules.push(r);
            }
        }
        Pda { psi: input.clone(), input, rules, ..self.clone() }
    }

    /// Replaces input pushes longer than two by chains through fresh compound
    /// stack symbols. Non-popping ε-rules are rejected.
    pub fn split_pushes(&self) -> Result<Pda> {
        if let Some(r) = self.rules.iter().find(|r| r.input.is_none() && !r.push.is_empty()) {
            return Err(Error::NotNormalized(format!("ε-rule does not pop: {}", self.format_rule(r))));
        }
        if self.rules.iter().all(|r| r.push.len() <= 2) && self.initial.stack.len() <= 2 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        let mut compounds: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut pending: Vec<Vec<u32>> = Vec::new();
        // a push word of length ≤ 2 denoting `w`
        fn encode(
            w: &[u32],
            out: &mut Pda,
            compounds: &mut HashMap<Vec<u32>, u32>,
            pending: &mut Vec<Vec<u32>>,
            names: &[String],
        ) -> Vec<u32> {
            if w.len() <= 2 {
                return w.to_vec();
            }
            let rest = w[1..].to_vec();
            let id = *compounds.entry(rest.clone()).or_insert_with(|| {
                let name =
                    format!("[{}]", rest.iter().map(|&z| names[z as usize].as_str()).collect::<Vec<_>>().join("."));
                out.stack_symbols.push(name);
                pending.push(rest.clone());
                (out.stack_symbols.len() - 1) as u32
            });
            vec![w[0], id]
        }
        let names = self.stack_symbols.clone();
        let old_rules = std::mem::take(&mut out.rules);
        for r in &old_rules {
            let push = encode(&r.push, &mut out, &mut compounds, &mut pending, &names);
            out.rules.push(Rule { push, ..r.clone() });
        }
        let init = self.initial.stack.clone();
        if init.len() > 2 {
            out.initial.stack = encode(&init, &mut out, &mut compounds, &mut pending, &names);
        }
        let mut done: HashSet<Vec<u32>> = HashSet::new();
        while let Some(seq) = pending.pop() {
            if !done.insert(seq.clone()) {
                continue;
            }
            let id = compounds[&seq];
            for q in 0..self.states.len() as u32 {
                // static ε-closure inside the compound
                let mut state = q;
                let mut pos = 0;
                while pos < seq.len() {
                    match self.eps_rule(state, seq[pos]) {
                        Some(r) => {
                            state = r.to;
                            pos += 1;
                        }
                        None => break,
                    }
                }
                if pos == seq.len() {
                    if pos > 0 {
                        out.rules.push(Rule { from: q, top: id, input: None, to: state, push: vec![] });
                    }
                    continue;
                }
                let rules: Vec<Rule> = self.rules_at(state, seq[pos], None).cloned().collect();
                debug_assert!(rules.is_empty());
                let moves: Vec<Rule> =
                    self.rules.iter().filter(|r| r.from == state && r.top == seq[pos] && r.input.is_some()).cloned().collect();
                for r in moves {
                    let mut w = r.push.clone();
                    w.extend_from_slice(&seq[pos + 1..]);
                    let push = encode(&w, &mut out, &mut compounds, &mut pending, &names);
                    out.rules.push(Rule { from: q, top: id, input: r.input, to: r.to, push });
                }
            }
        }
        Ok(out)
    }

    /// Disjoint union; states and stack symbols of `other` get the prefix
    /// `r.`, those of `self` the prefix `l.`, input letters are merged by name.
    pub fn union(&self, other: &Pda) -> Result<(Pda, Config, Config)> {
        let mut input = self.input.clone();
        let mut psi = self.psi.clone();
        for (x, y) in other.input.iter().zip(&other.psi) {
            match input.iter().position(|i| i == x) {
                Some(i) if psi[i] != *y => {
                    return Err(Error::Input(format!("letter `{x}` has different ψ-images")));
                }
                Some(_) => {}
                None => {
                    input.push(x.clone());
                    psi.push(y.clone());
                }
            }
        }
        let ns = self.states.len() as u32;
        let nz = self.stack_symbols.len() as u32;
        let remap_in = |p: &Pda, x: u32| input.iter().position(|i| *i == p.input[x as usize]).unwrap() as u32;
        let mut rules = Vec::new();
        for r in &self.rules {
            rules.push(Rule { input: r.input.map(|x| remap_in(self, x)), ..r.clone() });
        }
        for r in &other.rules {
            rules.push(Rule {
                from: r.from + ns,
                top: r.top + nz,
                input: r.input.map(|x| remap_in(other, x)),
                to: r.to + ns,
                push: r.push.iter().map(|z| z + nz).collect(),
            });
        }
        let states = self
            .states
            .iter()
            .map(|s| format!("l.{s}"))
            .chain(other.states.iter().map(|s| format!("r.{s}")))
            .collect();
        let stack_symbols = self
            .stack_symbols
            .iter()
            .map(|s| format!("l.{s}"))
            .chain(other.stack_symbols.iter().map(|s| format!("r.{s}")))
            .collect();
        let right = Config {
            state: other.initial.state + ns,
            stack: other.initial.stack.iter().map(|z| z + nz).collect(),
        };
        let left = self.initial.clone();
        let finals = self.finals.iter().copied().chain(other.finals.iter().map(|q| q + ns)).collect();
        let pda = Pda { states, stack_symbols, input, psi, rules, initial: left.clone(), finals };
        Ok((pda, left, right))
    }

    /// Pda-level co-root: a fresh bottom marker `$` under every stack, a
    /// fresh letter `#` from every ε-free mode to a fresh state `qbar` that
    /// pops everything. Returns the new pda and a map lifting old
    /// configurations (append `$`).
    pub fn with_coroot(&self) -> Result<Pda> {
        let fresh = |names: &[String], base: &str| {
            let mut n = base.to_string();
            while names.contains(&n) {
                n.push('\'');
            }
            n
        };
        let mut out = self.clone();
        let bottom = fresh(&out.stack_symbols, "$");
        let hash = fresh(&out.input, "#");
        let qbar = fresh(&out.states, "qbar");
        out.stack_symbols.push(bottom);
        let bot = (out.stack_symbols.len() - 1) as u32;
        out.input.push(hash.clone());
        out.psi.push(fresh(&self.psi, &hash));
        let h = (out.input.len() - 1) as u32;
        out.states.push(qbar);
        let qb = (out.states.len() - 1) as u32;
        for q in 0..self.states.len() as u32 {
            for z in 0..out.stack_symbols.len() as u32 {
                if self.eps_rule(q, z).is_none() {
                    out.rules.push(Rule { from: q, top: z, input: Some(h), to: qb, push: vec![] });
                }
            }
        }
        for z in 0..out.stack_symbols.len() as u32 {
            out.rules.push(Rule { from: qb, top: z, input: None, to: qb, push: vec![] });
        }
        out.initial.stack.push(bot);
        out.finals = vec![qb];
        Ok(out)
    }

    /// Lifts a configuration of the pda before `with_coroot` into it.
    pub fn lift_to_coroot(&self, c: &Config) -> Config {
        let bot = self.stack_index(self.stack_symbols.last().map(String::as_str).unwrap_or("")).unwrap_or(0);
        let mut stack = c.stack.clone();
        stack.push(bot);
        Config { state: c.state, stack }
    }

    pub fn final_state(&self) -> Option<u32> {
        match self.finals.as_slice() {
            [q] => Some(*q),
            _ => None,
        }
    }

    /// Checks a single final state without input moves, and that every
    /// ε-free configuration reachable within `depth` steps can still reach
    /// the final configuration `qbar ε`.
    pub fn check_birooted(&self, depth: usize) -> Result<()> {
        let qb = self.final_state().ok_or_else(|| Error::NotBirooted("need exactly one final state".into()))?;
        if self.rules.iter().any(|r| r.from == qb && r.input.is_some()) {
            return Err(Error::NotBirooted("the final state has input moves".into()));
        }
        let pops = self.pop_summaries();
        let hits = self.hit_summaries(qb, &pops);
        let mut seen: HashSet<Config> = HashSet::new();
        let mut layer = vec![self.eps_closure(&self.initial)];
        seen.insert(layer[0].clone());
        for d in 0..=depth {
            for c in &layer {
                if !self.reaches(c, qb, &pops, &hits) {
                    return Err(Error::NotBirooted(format!(
                        "`{}` cannot reach the final configuration",
                        self.format_config(c)
                    )));
                }
            }
            if d == depth {
                break;
            }
            let mut next = Vec::new();
            for c in &layer {
                for x in 0..self.input.len() as u32 {
                    for n in self.successors(c, x) {
                        if seen.insert(n.clone()) {
                            next.push(n);
                        }
                    }
                }
            }
            layer = next;
        }
        Ok(())
    }

    /// `pops[(q,z)]`: states `r` with `q z ⇒* r ε`.
    fn pop_summaries(&self) -> HashMap<(u32, u32), HashSet<u32>> {
        let mut pops: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
        loop {
            let mut changed = false;
            for r in &self.rules {
                let mut targets: Vec<u32> = vec![r.to];
                for &z in &r.push {
                    let mut next = Vec::new();
                    for &s in &targets {
                        if let Some(ps) = pops.get(&(s, z)) {
                            next.extend(ps.iter().copied());
                        }
                    }
                    targets = next;
                }
                let e = pops.entry((r.from, r.top)).or_default();
                for t in targets {
                    changed |= e.insert(t);
                }
            }
            if !changed {
                return pops;
            }
        }
    }

    /// `hits`: modes `(q,z)` from which state `qb` is entered before `z` is popped.
    fn hit_summaries(&self, qb: u32, pops: &HashMap<(u32, u32), HashSet<u32>>) -> HashSet<(u32, u32)> {
        let mut hits: HashSet<(u32, u32)> = HashSet::new();
        loop {
            let mut changed = false;
            for r in &self.rules {
                if hits.contains(&(r.from, r.top)) {
                    continue;
                }
                let mut ok = r.to == qb;
                let mut states = vec![r.to];
                for &z in &r.push {
                    if ok {
                        break;
                    }
                    if states.iter().any(|&s| hits.contains(&(s, z))) {
                        ok = true;
                        break;
                    }
                    let mut next = Vec::new();
                    for &s in &states {
                        if let Some(ps) = pops.get(&(s, z)) {
                            next.extend(ps.iter().copied());
                        }
                    }
                    states = next;
                    if states.contains(&qb) {
                        ok = true;
                    }
                }
                if ok {
                    hits.insert((r.from, r.top));
                    changed = true;
                }
            }
            if !changed {
                return hits;
            }
        }
    }

    fn reaches(
        &self,
        c: &Config,
        qb: u32,
        pops: &HashMap<(u32, u32), HashSet<u32>>,
        hits: &HashSet<(u32, u32)>,
    ) -> bool {
        // every state reachable at the moment the stack shrinks to each suffix
        let mut states: HashSet<u32> = [c.state].into_iter().collect();
        for &z in &c.stack {
            if states.contains(&qb) || states.iter().any(|&s| hits.contains(&(s, z))) {
                return true;
            }
            states = states.iter().filter_map(|&s| pops.get(&(s, z))).flatten().copied().collect();
        }
        states.contains(&qb)
    }
}
