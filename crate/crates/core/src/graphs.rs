//! Finite edge-labelled n-graphs, truncated computation graphs of pdas and
//! bisimulation checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::grammar::{Config, Pda, Rule};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<String>,
    names: Vec<String>,
    succ: Vec<Vec<(u32, u32)>>,
    sources: Vec<u32>,
    truncated: Vec<bool>,
}

impl Graph {
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Graph {
        Graph {
            labels: labels.iter().map(|s| s.as_ref().to_string()).collect(),
            names: Vec::new(),
            succ: Vec::new(),
            sources: Vec::new(),
            truncated: Vec::new(),
        }
    }

    pub fn add_vertex(&mut self, name: impl Into<String>) -> u32 {
        self.names.push(name.into());
        self.succ.push(Vec::new());
        self.truncated.push(false);
        (self.names.len() - 1) as u32
    }

    pub fn add_edge(&mut self, v: u32, x: u32, w: u32) {
        let s = &mut self.succ[v as usize];
        if let Err(i) = s.binary_search(&(x, w)) {
            s.insert(i, (x, w));
        }
    }

    pub fn set_sources(&mut self, sources: Vec<u32>) {
        self.sources = sources;
    }

    pub fn set_truncated(&mut self, v: u32, t: bool) {
        self.truncated[v as usize] = t;
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, name: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == name).map(|i| i as u32)
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn name(&self, v: u32) -> &str {
        &self.names[v as usize]
    }

    pub fn vertex(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    /// Outgoing `(label, target)` pairs, sorted.
    pub fn succ(&self, v: u32) -> &[(u32, u32)] {
        &self.succ[v as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.succ.iter().enumerate().flat_map(|(v, s)| s.iter().map(move |&(x, w)| (v as u32, x, w)))
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn is_truncated(&self, v: u32) -> bool {
        self.truncated[v as usize]
    }

    pub fn has_truncated(&self) -> bool {
        self.truncated.iter().any(|&t| t)
    }

    pub fn out_labels(&self, v: u32) -> BTreeSet<u32> {
        self.succ(v).iter().map(|&(x, _)| x).collect()
    }

    /// Vertices reachable from the sources.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_vertices()];
        let mut todo: Vec<u32> = self.sources.clone();
        for &s in &todo {
            seen[s as usize] = true;
        }
        while let Some(v) = todo.pop() {
            for &(_, w) in self.succ(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    todo.push(w);
                }
            }
        }
        seen
    }

    /// Subgraph induced by the source-reachable vertices; also returns the
    /// number of dropped vertices.
    pub fn restrict_reachable(&self) -> (Graph, usize) {
        let keep = self.reachable();
        let mut map = vec![u32::MAX; self.num_vertices()];
        let mut g = Graph::new(&self.labels);
        for v in 0..self.num_vertices() {
            if keep[v] {
                map[v] = g.add_vertex(self.names[v].clone());
                g.truncated[map[v] as usize] = self.truncated[v];
            }
        }
        for (v, x, w) in self.edges() {
            if keep[v as usize] {
                g.add_edge(map[v as usize], x, map[w as usize]);
            }
        }
        g.sources = self.sources.iter().map(|&s| map[s as usize]).collect();
        let dropped = keep.iter().filter(|&&k| !k).count();
        (g, dropped)
    }

    /// One line per edge `v -x-> w`, preceded by `source i: v` headers.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, &s) in self.sources.iter().enumerate() {
            out.push_str(&format!("source {}: {}\n", i + 1, self.name(s)));
        }
        for (v, x, w) in self.edges() {
            out.push_str(&format!("{} -{}-> {}\n", self.name(v), self.labels[x as usize], self.name(w)));
        }
        out
    }

    /// Whether every vertex enables either all or none of the letters of
    /// each class (`class_of` per label). Truncated vertices are skipped.
    pub fn is_saturated(&self, class_of: &[usize]) -> bool {
        (0..self.num_vertices() as u32).filter(|&v| !self.is_truncated(v)).all(|v| {
            let out = self.out_labels(v);
            (0..self.labels.len()).all(|x| {
                (0..self.labels.len())
                    .filter(|&y| class_of[y] == class_of[x])
                    .all(|y| out.contains(&(x as u32)) == out.contains(&(y as u32)))
            })
        })
    }
}

/// Vertices are the ε-free configurations reachable within `depth` moves
/// from the ε-closures of `starts`; the final configuration `qbar ε` of a
/// bi-rooted pda is always a vertex. Frontier vertices with a possible move
/// are flagged as truncated.
pub fn computation_graph_from(pda: &Pda, starts: &[Config], depth: usize) -> (Graph, Vec<Config>) {
    let mut g = Graph::new(&pda.input);
    let mut ids: HashMap<Config, u32> = HashMap::new();
    let mut configs = Vec::new();
    let mut intern = |c: Config, g: &mut Graph, configs: &mut Vec<Config>| -> (u32, bool) {
        if let Some(&id) = ids.get(&c) {
            return (id, false);
        }
        let id = g.add_vertex(pda.format_config(&c));
        ids.insert(c.clone(), id);
        configs.push(c);
        (id, true)
    };
    let mut sources = Vec::new();
    let mut layer = Vec::new();
    for s in starts {
        let (id, new) = intern(pda.eps_closure(s), &mut g, &mut configs);
        sources.push(id);
        if new {
            layer.push(id);
        }
    }
    let coroot = pda
        .final_state()
        .filter(|&q| !pda.rules.iter().any(|r: &Rule| r.from == q && r.input.is_some()));
    if let Some(q) = coroot {
        let (id, new) = intern(Config { state: q, stack: vec![] }, &mut g, &mut configs);
        sources.push(id);
        if new {
            layer.push(id);
        }
    }
    for d in 0..=depth {
        let mut next = Vec::new();
        for &v in &layer {
            let c = configs[v as usize].clone();
            let moves: Vec<(u32, Config)> = (0..pda.input.len() as u32)
                .flat_map(|x| pda.successors(&c, x).into_iter().map(move |n| (x, n)))
                .collect();
            if d == depth {
                if !moves.is_empty() {
                    g.set_truncated(v, true);
                }
                continue;
            }
            for (x, n) in moves {
                let (w, new) = intern(n, &mut g, &mut configs);
                g.add_edge(v, x, w);
                if new {
                    next.push(w);
                }
            }
        }
        layer = next;
    }
    g.set_sources(sources);
    (g, configs)
}

pub fn computation_graph(pda: &Pda, depth: usize) -> (Graph, Vec<Config>) {
    computation_graph_from(pda, std::slice::from_ref(&pda.initial), depth)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BisimResult {
    pub related: bool,
    /// Greatest bisimulation between the reachable parts, as
    /// `(vertex of g1, vertex of g2)` in the restricted numbering.
    pub relation: Vec<(u32, u32)>,
    /// First source index whose pair is unrelated.
    pub failing_source: Option<usize>,
    /// Unreachable vertices dropped from each graph.
    pub dropped: (usize, usize),
}

/// Block numbers of the coarsest stable partition of the disjoint union.
fn refine(g1: &Graph, g2: &Graph) -> Vec<u32> {
    let n1 = g1.num_vertices();
    let n = n1 + g2.num_vertices();
    let succ = |v: usize| -> Vec<(u32, usize)> {
        if v < n1 {
            g1.succ(v as u32).iter().map(|&(x, w)| (x, w as usize)).collect()
        } else {
            g2.succ((v - n1) as u32).iter().map(|&(x, w)| (x, w as usize + n1)).collect()
        }
    };
    let succs: Vec<Vec<(u32, usize)>> = (0..n).map(succ).collect();
    let mut block = vec![0u32; n];
    let mut count = 1;
    loop {
        let mut sigs: HashMap<(u32, BTreeSet<(u32, u32)>), u32> = HashMap::new();
        let mut next = vec![0u32; n];
        for v in 0..n {
            let sig: BTreeSet<(u32, u32)> = succs[v].iter().map(|&(x, w)| (x, block[w])).collect();
            let len = sigs.len() as u32;
            next[v] = *sigs.entry((block[v], sig)).or_insert(len);
        }
        let new_count = sigs.len();
        block = next;
        if new_count == count {
            return block;
        }
        count = new_count;
    }
}

/// Greatest bisimulation between complete finite graphs by partition
/// refinement; related iff every source pair is related.
pub fn finite_bisim(g1: &Graph, g2: &Graph) -> Result<BisimResult> {
    if g1.has_truncated() || g2.has_truncated() {
        return Err(Error::Truncated);
    }
    if g1.sources.len() != g2.sources.len() {
        return Err(Error::Input("graphs have different numbers of sources".into()));
    }
    let (a, d1) = g1.restrict_reachable();
    let (b, d2) = g2.restrict_reachable();
    let (a, b) = align_labels(&a, &b);
    let block = refine(&a, &b);
    let n1 = a.num_vertices();
    let mut relation = Vec::new();
    for v in 0..n1 {
        for w in 0..b.num_vertices() {
            if block[v] == block[n1 + w] {
                relation.push((v as u32, w as u32));
            }
        }
    }
    let failing_source =
        (0..a.sources.len()).find(|&i| block[a.sources[i] as usize] != block[n1 + b.sources[i] as usize]);
    let total_left = (0..n1).all(|v| relation.iter().any(|&(x, _)| x as usize == v));
    let total_right = (0..b.num_vertices()).all(|w| relation.iter().any(|&(_, y)| y as usize == w));
    Ok(BisimResult {
        related: failing_source.is_none() && total_left && total_right,
        relation,
        failing_source,
        dropped: (d1, d2),
    })
}

/// Both graphs over the union of their labels, matched by name.
fn align_labels(g1: &Graph, g2: &Graph) -> (Graph, Graph) {
    if g1.labels == g2.labels {
        return (g1.clone(), g2.clone());
    }
    let mut labels = g1.labels.clone();
    for l in &g2.labels {
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    let remap = |g: &Graph| {
        let mut h = g.clone();
        h.labels = labels.clone();
        let idx: Vec<u32> = g.labels.iter().map(|l| labels.iter().position(|m| m == l).unwrap() as u32).collect();
        for s in &mut h.succ {
            for e in s.iter_mut() {
                e.0 = idx[e.0 as usize];
            }
            s.sort_unstable();
        }
        h
    };
    (remap(g1), remap(g2))
}

/// Checks Def-style bisimulation clauses for an explicit relation between
/// complete graphs: sources related, total both ways, closed both ways.
pub fn is_bisimulation(g1: &Graph, g2: &Graph, rel: &[(u32, u32)]) -> bool {
    let (g1, g2) = align_labels(g1, g2);
    let set: BTreeSet<(u32, u32)> = rel.iter().copied().collect();
    let sources = g1.sources.iter().zip(&g2.sources).all(|(&a, &b)| set.contains(&(a, b)));
    let total = (0..g1.num_vertices() as u32).all(|v| set.iter().any(|&(a, _)| a == v))
        && (0..g2.num_vertices() as u32).all(|w| set.iter().any(|&(_, b)| b == w));
    let closed = set.iter().all(|&(v, w)| {
        g1.succ(v).iter().all(|&(x, v2)| g2.succ(w).iter().any(|&(y, w2)| y == x && set.contains(&(v2, w2))))
            && g2.succ(w).iter().all(|&(y, w2)| g1.succ(v).iter().any(|&(x, v2)| x == y && set.contains(&(v2, w2))))
    });
    sources && total && closed
}

/// `{(a, c) | (a, b) ∈ r1, (b, c) ∈ r2}`.
pub fn compose(r1: &[(u32, u32)], r2: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut out = BTreeSet::new();
    for &(a, b) in r1 {
        for &(b2, c) in r2 {
            if b == b2 {
                out.insert((a, c));
            }
        }
    }
    out.into_iter().collect()
}

/// n-step bisimilarity of `v` (in `g1`) and `w` (in `g2`); pairs involving a
/// truncated vertex count as related.
pub fn bounded_bisim(g1: &Graph, g2: &Graph, v: u32, w: u32, n: usize) -> bool {
    let (g1, g2) = align_labels(g1, g2);
    let mut memo = HashMap::new();
    bounded_rec(&g1, &g2, v, w, n, &|x, y| x == y, &mut memo)
}

fn bounded_rec(
    g1: &Graph,
    g2: &Graph,
    v: u32,
    w: u32,
    n: usize,
    eta: &dyn Fn(u32, u32) -> bool,
    memo: &mut HashMap<(u32, u32, usize), bool>,
) -> bool {
    if n == 0 || g1.is_truncated(v) || g2.is_truncated(w) {
        return true;
    }
    if let Some(&r) = memo.get(&(v, w, n)) {
        return r;
    }
    let forth = g1.succ(v).to_vec().iter().all(|&(x, v2)| {
        g2.succ(w).to_vec().iter().any(|&(y, w2)| eta(x, y) && bounded_rec(g1, g2, v2, w2, n - 1, eta, memo))
    });
    let r = forth
        && g2.succ(w).to_vec().iter().all(|&(y, w2)| {
            g1.succ(v).to_vec().iter().any(|&(x, v2)| eta(x, y) && bounded_rec(g1, g2, v2, w2, n - 1, eta, memo))
        });
    memo.insert((v, w, n), r);
    r
}

/// n-step game on one bi-rooted 2-graph where missing edges lead to a sink
/// `⊥` that loops on every letter, letters match when `class_of` agrees,
/// and every visited pair must agree on being the co-root (source 2).
/// Vertices whose game would read past a truncated vertex make the result
/// unreliable; callers must truncate deep enough.
pub fn bounded_2graph_bisim(g: &Graph, class_of: &[usize], v: u32, w: u32, n: usize) -> bool {
    let coroot = *g.sources().get(1).expect("a 2-graph");
    let sink = u32::MAX;
    let nl = g.labels.len() as u32;
    let step = |v: u32, x: u32| -> u32 {
        if v == sink {
            return sink;
        }
        g.succ(v).iter().find(|&&(y, _)| y == x).map_or(sink, |&(_, t)| t)
    };
    let mut memo: HashMap<(u32, u32, usize), bool> = HashMap::new();
    fn rec(
        v: u32,
        w: u32,
        n: usize,
        ctx: &(&dyn Fn(u32, u32) -> u32, u32, u32, &[usize], u32),
        memo: &mut HashMap<(u32, u32, usize), bool>,
    ) -> bool {
        let (step, coroot, nl, class_of, sink) = *ctx;
        if (v == coroot) != (w == coroot) {
            return false;
        }
        if n == 0 || v == w {
            return true;
        }
        if let Some(&r) = memo.get(&(v, w, n)) {
            return r;
        }
        let _ = sink;
        let mut ok = true;
        for x in 0..nl {
            let forth = (0..nl)
                .filter(|&y| class_of[y as usize] == class_of[x as usize])
                .any(|y| rec(step(v, x), step(w, y), n - 1, ctx, memo));
            let back = (0..nl)
                .filter(|&y| class_of[y as usize] == class_of[x as usize])
                .any(|y| rec(step(v, y), step(w, x), n - 1, ctx, memo));
            if !forth || !back {
                ok = false;
                break;
            }
        }
        memo.insert((v, w, n), ok);
        ok
    }
    let ctx: (&dyn Fn(u32, u32) -> u32, u32, u32, &[usize], u32) = (&step, coroot, nl, class_of, sink);
    rec(v, w, n, &ctx, &mut memo)
}

/// Adds a fresh vertex `v̄` with an edge labelled `hash` from every vertex;
/// the sources become `(root, v̄)`.
pub fn add_coroot(g: &Graph, hash: &str) -> Result<Graph> {
    if g.labels.iter().any(|l| l == hash) {
        return Err(Error::LabelClash(hash.to_string()));
    }
    let root = *g.sources.first().ok_or_else(|| Error::Input("graph has no root".into()))?;
    let mut h = g.clone();
    h.labels.push(hash.to_string());
    let x = (h.labels.len() - 1) as u32;
    let mut name = "vbar".to_string();
    while h.vertex(&name).is_some() {
        name.push('\'');
    }
    let bar = h.add_vertex(name);
    for v in 0..g.num_vertices() as u32 {
        h.add_edge(v, x, bar);
    }
    h.sources = vec![root, bar];
    Ok(h)
}

/// Renames every edge label through `psi`, merging duplicates.
pub fn relabel(g: &Graph, psi: &BTreeMap<String, String>) -> Result<Graph> {
    let mut labels: Vec<String> = Vec::new();
    let mut map = Vec::new();
    for l in &g.labels {
        let img = psi.get(l).ok_or_else(|| Error::UnmappedLabel(l.clone()))?;
        let i = match labels.iter().position(|m| m == img) {
            Some(i) => i,
            None => {
                labels.push(img.clone());
                labels.len() - 1
            }
        };
        map.push(i as u32);
    }
    let mut h = Graph::new(&labels);
    for v in 0..g.num_vertices() {
        h.add_vertex(g.names[v].clone());
        h.truncated[v] = g.truncated[v];
    }
    for (v, x, w) in g.edges() {
        h.add_edge(v, map[x as usize], w);
    }
    h.sources = g.sources.clone();
    Ok(h)
}

/// Splits every letter `y` into `y/1..y/t̄` where `t̄` is the largest number
/// of `y`-rules of a mode; missing indices repeat the first rule. Letter
/// names are kept when `t̄ = 1`. The result carries `ψ(y/i) = ψ(y)`.
pub fn determinize_pda(pda: &Pda) -> Result<Pda> {
    let rep = pda.check_normalized();
    if !rep.is_normalized() {
        return Err(Error::NotNormalized(rep.to_string().trim_end().replace('\n', "; ")));
    }
    let qbar = pda.final_state().ok_or_else(|| Error::NotBirooted("need exactly one final state".into()))?;
    if pda.rules.iter().any(|r| r.from == qbar && r.input.is_some()) {
        return Err(Error::NotBirooted("the final state has input moves".into()));
    }
    let mut groups: BTreeMap<(u32, u32, u32), Vec<&Rule>> = BTreeMap::new();
    for r in &pda.rules {
        if let Some(y) = r.input {
            groups.entry((r.from, r.top, y)).or_default().push(r);
        }
    }
    let tbar = groups.values().map(Vec::len).max().unwrap_or(1).max(1);
    let mut out = pda.clone();
    if tbar == 1 {
        return Ok(out);
    }
    out.input = Vec::new();
    out.psi = Vec::new();
    for (y, name) in pda.input.iter().enumerate() {
        for i in 1..=tbar {
            out.input.push(format!("{name}/{i}"));
            out.psi.push(pda.psi[y].clone());
        }
    }
    let letter = |y: u32, i: usize| y * tbar as u32 + (i as u32 - 1);
    out.rules = pda.rules.iter().filter(|r| r.input.is_none()).cloned().collect();
    for ((_, _, y), rules) in &groups {
        for i in 1..=tbar {
            let r = if i <= rules.len() { rules[i - 1] } else { rules[0] };
            out.rules.push(Rule { input: Some(letter(*y, i)), ..r.clone() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(labels: &[&str], n: usize, edges: &[(u32, u32, u32)], sources: Vec<u32>) -> Graph {
        let mut g = Graph::new(labels);
        for i in 0..n {
            g.add_vertex(format!("v{i}"));
        }
        for &(v, x, w) in edges {
            g.add_edge(v, x, w);
        }
        g.set_sources(sources);
        g
    }

    #[test]
    fn loop_versus_cycle() {
        let a = graph(&["a"], 1, &[(0, 0, 0)], vec![0]);
        let b = graph(&["a"], 2, &[(0, 0, 1), (1, 0, 0)], vec![0]);
        let r = finite_bisim(&a, &b).unwrap();
        assert!(r.related);
        assert!(is_bisimulation(&a, &b, &r.relation));
        let c = graph(&["a"], 2, &[(0, 0, 1)], vec![0]);
        assert!(!finite_bisim(&a, &c).unwrap().related);
    }

    #[test]
    fn coroot_shape() {
        let a = graph(&["a"], 2, &[(0, 0, 1)], vec![0]);
        let h = add_coroot(&a, "#").unwrap();
        assert_eq!(h.num_vertices(), 3);
        assert_eq!(h.num_edges(), 3);
        assert!(h.succ(2).is_empty());
        assert!(add_coroot(&a, "a").is_err());
    }

    #[test]
    fn relabel_merges() {
        let a = graph(&["a", "b"], 2, &[(0, 0, 1), (0, 1, 1)], vec![0]);
        let psi: BTreeMap<String, String> = [("a", "c"), ("b", "c")].iter().map(|(x, y)| (x.to_string(), y.to_string())).collect();
        assert_eq!(relabel(&a, &psi).unwrap().num_edges(), 1);
    }

    #[test]
    fn bounded_zero_and_one() {
        let a = graph(&["a", "b"], 2, &[(0, 0, 1)], vec![0]);
        let b = graph(&["a", "b"], 2, &[(0, 1, 1)], vec![0]);
        assert!(bounded_bisim(&a, &b, 0, 0, 0));
        assert!(!bounded_bisim(&a, &b, 0, 0, 1));
    }

    #[test]
    fn computation_graph_depths() {
        let m = Pda::parse("initial: p Z\np Z a -> p A Z\np A a -> p A A\np A b -> q\nq A b -> q\nq Z eps -> f\n").unwrap();
        let (g, _) = computation_graph(&m, 0);
        assert_eq!((g.num_vertices(), g.num_edges()), (1, 0));
        assert!(g.is_truncated(0));
        // p Z -a-> p A Z -a-> p A A Z, p A Z -b-> q Z
        let (g, _) = computation_graph(&m, 2);
        assert_eq!(g.num_vertices(), 4);
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn determinize_splits_branching() {
        let m = Pda::parse("initial: p Z\nfinal: f\np Z y -> p\np Z y -> p Z\np Z z -> f\n").unwrap();
        let d = determinize_pda(&m).unwrap();
        assert_eq!(d.input, vec!["y/1", "y/2", "z/1", "z/2"]);
        assert!(d.check_normalized().is_deterministic());
        let y1 = d.input_index("y/1").unwrap();
        let y2 = d.input_index("y/2").unwrap();
        let first = d.rules.iter().find(|r| r.input == Some(y1)).unwrap();
        let second = d.rules.iter().find(|r| r.input == Some(y2)).unwrap();
        assert!(first.push.is_empty());
        assert_eq!(second.push.len(), 1);
    }
}
