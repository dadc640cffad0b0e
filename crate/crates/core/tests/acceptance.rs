//! The ten acceptance criteria, one PASS/FAIL line each.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use bisim_core::decide::{decide_pdas, Schedule, Verdict};
use bisim_core::games::{check_wbisim, order_n_bisim};
use bisim_core::graphs::{computation_graph, determinize_pda, finite_bisim, relabel, Graph};
use bisim_core::proofs::{verify_proof_file, CongBudget};
use bisim_core::triangulation::{check_t1, inv_transform, InvOutcome, LinearSystem};
use bisim_core::{Grammar, Letter, Pda, PdaPipeline, Series, SeriesVector};
use common::oracles::*;
use common::*;
use rand::Rng;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(data(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn pda(name: &str) -> Pda {
    Pda::parse(&read(&format!("pda/{name}.pda"))).unwrap()
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Subset-construction states allowed per product in criterion 1.
const PRODUCT_LIMIT: usize = 10_000;

/// The product laws of one triple, or `None` when some product exceeds
/// [`PRODUCT_LIMIT`] states.
fn product_laws(x: &Series, y: &Series, z: &Series) -> Option<[bool; 5]> {
    let m = |a: &Series, b: &Series| a.product_within(b, PRODUCT_LIMIT);
    let a = x.alphabet();
    let (zero, one) = (Series::empty(a), Series::epsilon(a));
    let (xy, yz, ys) = (m(x, y)?, m(y, z)?, y.sum(z));
    Some([
        m(&xy, z)? == m(x, &yz)?,
        m(x, &one)? == *x && m(&one, x)? == *x,
        m(x, &zero)?.is_empty() && m(&zero, x)?.is_empty(),
        m(x, &ys)? == xy.sum(&m(x, z)?),
        m(&ys, x)? == m(y, x)?.sum(&m(z, x)?),
    ])
}

/// 1. Semiring identities, right-action law, canonical-form idempotence.
fn series_laws() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(101);
    let n = 1000;
    let (mut done, mut skipped) = (0, 0);
    while done < n {
        let a = random_alphabet(&mut r, 1 + done % 6, false);
        let x = random_series(&mut r, &a, 12);
        let y = random_series(&mut r, &a, 12);
        let z = random_series(&mut r, &a, 12);
        let zero = Series::empty(&a);
        let sums = [
            x.sum(&y).sum(&z) == x.sum(&y.sum(&z)),
            x.sum(&y) == y.sum(&x),
            x.sum(&zero) == x,
            x.sum(&x) == x,
        ];
        check(sums.iter().all(|&b| b), || format!("sum law fails on instance {done}: {sums:?}"))?;
        let u = random_word(&mut r, &a, 4);
        let v = random_word(&mut r, &a, 4);
        let uv: Vec<Letter> = u.iter().chain(&v).copied().collect();
        check(x.residual(&u).residual(&v) == x.residual(&uv), || format!("right action fails on instance {done}"))?;
        let again = Series::from_dfa(a.clone(), x.transition_table(), x.accepting());
        check(again == x, || format!("canonical form not idempotent on instance {done}"))?;
        let Some(products) = product_laws(&x, &y, &z) else {
            skipped += 1;
            continue;
        };
        check(products.iter().all(|&b| b), || format!("product law fails on instance {done}: {products:?}"))?;
        done += 1;
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(30), || format!("took {t:?}, {skipped} redrawn"))?;
    Ok(format!("{n} instances ({skipped} redrawn: a product exceeded {PRODUCT_LIMIT} subset states)"))
}

/// 2. Norm bounds for product, action, ∇, ∇* and mark erasure.
fn norm_bounds() -> Result<String, String> {
    let mut r = rng(202);
    let n = 1000;
    let grammars: Vec<PdaPipeline> = [ANBN, DYCK, PSI3]
        .iter()
        .map(|t| PdaPipeline::new(Pda::parse(t).unwrap().with_coroot().unwrap()).unwrap())
        .collect();
    for i in 0..n {
        let al = random_alphabet(&mut r, 2 + i % 4, false);
        let s = random_det_vector(&mut r, &al, 2, 6);
        let t = random_det_matrix(&mut r, &al, 2, 2, 6);
        let p = s.mul(&t).unwrap();
        check(p.norm() <= s.norm() + t.norm(), || format!("product: {s} · T"))?;

        let p3 = &grammars[i % 3];
        let g = &p3.g;
        let k0 = g.compute_k0();
        let v = random_det_vector(&mut r, g.variables(), 2, 6);
        let u = random_word(&mut r, g.terminals(), 5);
        let vu = g.action(&v, &u).unwrap();
        check(vu.norm() <= v.norm() + k0 * u.len(), || format!("action: {v} by a word of length {}", u.len()))?;

        let w = 1 + i % 3;
        let a = random_det_vector(&mut r, &al, w, 6);
        let b = random_det_vector(&mut r, &al, w, 6);
        let j0 = r.gen_range(0..w);
        let c = a.nabla(&b, j0).unwrap();
        check(c.norm() <= a.norm() + b.norm(), || format!("nabla: {a}, {b}, {j0}"))?;
        let st = a.nabla_star(j0).unwrap();
        check(st.norm() <= a.norm(), || format!("nabla star: {a}, {j0}"))?;

        let marked = random_alphabet(&mut r, 2 + i % 3, true);
        let m = random_det_vector(&mut r, &marked, 2, 6);
        check(m.erase_marks().unwrap().norm() <= m.norm(), || format!("rho: {m}"))?;
    }
    Ok(format!("{n} instances per bound, 0 violations"))
}

/// 3. Determinism preservation.
fn determinism() -> Result<String, String> {
    let mut r = rng(303);
    let n = 1000;
    let grammars: Vec<PdaPipeline> = [ANBN, DYCK, PSI3]
        .iter()
        .map(|t| PdaPipeline::new(Pda::parse(t).unwrap().with_coroot().unwrap()).unwrap())
        .collect();
    for i in 0..n {
        let al = random_alphabet(&mut r, 2 + i % 4, false);
        let s = random_det_vector(&mut r, &al, 2, 6);
        let t = random_det_matrix(&mut r, &al, 2, 2, 6);
        check(s.is_deterministic() && t.is_deterministic(), || "generator produced a non-deterministic input".into())?;
        check(s.mul(&t).unwrap().is_deterministic(), || format!("product of {s}"))?;
        let u = random_word(&mut r, &al, 4);
        check(s.residual(&u).is_deterministic(), || format!("residual of {s}"))?;
        let g = &grammars[i % 3].g;
        let v = random_det_vector(&mut r, g.variables(), 2, 6);
        let x = random_word(&mut r, g.terminals(), 4);
        check(g.action(&v, &x).unwrap().is_deterministic(), || format!("action on {v}"))?;
        let w = 1 + i % 3;
        let a = random_det_vector(&mut r, &al, w, 6);
        let b = random_det_vector(&mut r, &al, w, 6);
        let j0 = r.gen_range(0..w);
        check(a.nabla(&b, j0).unwrap().is_deterministic(), || format!("nabla of {a}, {b}"))?;
        check(a.nabla_star(j0).unwrap().is_deterministic(), || format!("nabla star of {a}"))?;
        let marked = random_alphabet(&mut r, 2 + i % 3, true);
        let m = random_det_vector(&mut r, &marked, 2, 6);
        check(m.erase_marks().unwrap().is_deterministic(), || format!("rho of {m}"))?;
    }
    Ok(format!("{n} instances per operation"))
}

/// 4. `generates(S⊙u, w) ⇔ generates(S, u·w)` for |u| ≤ 4, |w| ≤ 6.
fn morphism() -> Result<String, String> {
    let mut checked = 0usize;
    for name in ["anbn", "ab_cycle", "counter_psi"] {
        let p = PdaPipeline::new(pda(name).project().with_coroot().unwrap()).unwrap();
        let g = &p.g;
        let k = g.terminals().len();
        let s = SeriesVector::scalar(p.theta(&p.pda.initial));
        let mut full: HashMap<Vec<Letter>, bool> = HashMap::new();
        let ws = all_words(k, 6);
        for u in all_words(k, 4) {
            let su = g.action(&s, &u).unwrap();
            for w in &ws {
                let uw: Vec<Letter> = u.iter().chain(w).copied().collect();
                let whole = *full.entry(uw.clone()).or_insert_with(|| g.generates(s.get(0), &uw));
                check(g.generates(su.get(0), w) == whole, || format!("{name}: differs at {uw:?}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("3 grammars, {checked} (u, w) pairs"))
}

/// 5. The game against exhaustive enumeration of word relations.
fn game_vs_brute_force() -> Result<String, String> {
    let mut r = rng(505);
    let mut pairs = 0;
    let mut positive = 0;
    while pairs < 200 {
        let g = small_grammar(&mut r);
        let s = random_det_vector(&mut r, g.variables(), 1, 4);
        let t = random_det_vector(&mut r, g.variables(), 1, 4);
        for n in 0..=3 {
            let game = order_n_bisim(&g, &s, &t, n).unwrap();
            check(game.is_some() == brute_force(&g, &s, &t, n), || format!("{s} vs {t} at order {n}\n{g}"))?;
            if let Some(rel) = game {
                check_wbisim(&g, &rel, &s, &t, n).map_err(|e| format!("certificate rejected: {e}"))?;
                positive += 1;
            }
        }
        pairs += 1;
    }
    Ok(format!("{pairs} pairs at orders 0..=3 ({positive} related), exact agreement"))
}

/// 6. Bounded graph bisimilarity against the series game.
fn graph_series() -> Result<String, String> {
    let mut r = rng(606);
    let compared = graph_series_agreement(&mut r, 100, 6, 5, 3);
    Ok(format!("{compared} (vertex pair, order) comparisons, exact agreement"))
}

/// 7. Self-generating checker on the shipped file and hand-built sets.
fn self_generating() -> Result<String, String> {
    let limit = Duration::from_secs(5);
    let start = Instant::now();
    let ab = read("proofs/ab.proof");
    let report = verify_proof_file(&ab, CongBudget::new(3)).map_err(|e| e.to_string())?;
    check(report.accepted(), || format!("ab.proof: {report}"))?;
    let mut deletions = 0;
    for skip in 0..ab.lines().filter(|l| l.starts_with("pair:")).count() {
        let report = verify_proof_file(&without_pair(&ab, skip), CongBudget::new(3)).map_err(|e| e.to_string())?;
        check(!report.accepted(), || format!("ab.proof without pair {skip} accepted"))?;
        let named = report.failures.iter().chain(&report.goal_failures).any(|f| f.successor.is_some());
        check(named, || format!("ab.proof without pair {skip}: no successor named\n{report}"))?;
        deletions += 1;
    }
    for (grammar, pairs) in SETS {
        let start = Instant::now();
        let report = verify_proof_file(&file_text(grammar, pairs, pairs[0]), CongBudget::new(3)).unwrap();
        check(report.accepted(), || format!("{grammar}\n{report}"))?;
        let g = Grammar::parse(grammar).unwrap();
        for (skip, pair) in pairs_of(&g, pairs).iter().enumerate() {
            if pair.0.unit_index().is_some() || pair.1.unit_index().is_some() {
                continue;
            }
            let kept: Vec<&str> = pairs.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, p)| *p).collect();
            let report = verify_proof_file(&file_text(grammar, &kept, pairs[0]), CongBudget::new(3)).unwrap();
            check(!report.accepted(), || format!("deleting {} accepted", pairs[skip]))?;
            let named = report.failures.iter().chain(&report.goal_failures).any(|f| f.successor.is_some());
            check(named, || format!("deleting {}: no successor named\n{report}", pairs[skip]))?;
            deletions += 1;
        }
        check(start.elapsed() < limit, || format!("{grammar}: {:?}", start.elapsed()))?;
    }
    let proof = read("proofs/anbn_split.proof");
    let report = verify_proof_file(&proof, CongBudget::new(8)).map_err(|e| e.to_string())?;
    check(report.accepted(), || format!("anbn_split.proof: {report}"))?;
    Ok(format!("ab.proof, anbn_split.proof and {} sets accepted; {deletions} deletions rejected; {:.1?}", SETS.len(), start.elapsed()))
}

/// `text` without its `skip`-th pair and that pair's hint lines.
fn without_pair(text: &str, skip: usize) -> String {
    let mut out = String::new();
    let (mut seen, mut dropping) = (0, false);
    for line in text.lines() {
        if line.starts_with("pair:") {
            dropping = seen == skip;
            seen += 1;
        } else if !(line.starts_with('r') && line.split(':').next().is_some_and(|h| h[1..].parse::<u32>().is_ok())) {
            dropping = false;
        }
        if !dropping {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn psi_graph(pda: &Pda, depth: usize) -> Graph {
    let (g, _) = computation_graph(pda, depth);
    let psi = pda.input.iter().cloned().zip(pda.psi.iter().cloned()).collect();
    relabel(&g, &psi).unwrap()
}

/// 8. End-to-end decisions, re-verified, against finite_bisim when finite.
fn end_to_end() -> Result<String, String> {
    let cases: &[(&str, &str, bool)] = &[
        ("anbn", "anbn_split", true),
        ("anbn", "anbn_split_push", true),
        ("anbn", "anbn_alt", true),
        ("ab_cycle", "ab_cycle4", true),
        ("branch_dup", "branch_single", true),
        ("counter_psi", "anbn", true),
        ("anbn", "anbn1", false),
        ("branch_late", "branch_early", false),
        ("ab_cycle", "aab_cycle", false),
    ];
    let mut finite = 0;
    let mut lines = Vec::new();
    for &(a, b, expect) in cases {
        let (l, r) = (pda(a), pda(b));
        let start = Instant::now();
        let d = decide_pdas(&l, &r, None, None, Schedule::default()).map_err(|e| format!("{a}/{b}: {e}"))?;
        let t = start.elapsed();
        check(t < Duration::from_secs(60), || format!("{a}/{b}: {t:?}"))?;
        let got = match &d.verdict {
            Verdict::Bisimilar(_) => true,
            Verdict::NotBisimilar { .. } => false,
            Verdict::Undecided { .. } => return Err(format!("{a}/{b}: undecided\n{}", d.log.join("\n"))),
        };
        check(got == expect, || format!("{a}/{b}: {}", d.verdict.label()))?;
        d.reverify().map_err(|e| format!("{a}/{b}: re-verification failed: {e}"))?;
        let (ga, gb) = (psi_graph(&l, 64), psi_graph(&r, 64));
        if !ga.has_truncated() && !gb.has_truncated() {
            let fb = finite_bisim(&ga, &gb).map_err(|e| e.to_string())?;
            check(fb.related == got, || format!("{a}/{b}: finite_bisim says {}", fb.related))?;
            finite += 1;
        }
        lines.push(format!("{a}/{b} {} in {t:.1?}", d.verdict.label()));
    }
    check(finite >= 3, || format!("only {finite} finite cases"))?;
    Ok(format!("{} pairs decided and re-verified, {finite} cross-checked with finite_bisim [{}]", cases.len(), lines.join("; ")))
}

/// 9. Determinization: determinism, identity as ψ-bisimulation, saturation.
fn determinization() -> Result<String, String> {
    let mut r = rng(909);
    let mut vertices = 0;
    let trials = 60;
    for _ in 0..trials {
        let m = random_pda(&mut r, 3, 2, &[vec!["a", "b"], vec!["c"]], true).with_coroot().unwrap();
        let d = determinize_pda(&m).unwrap();
        let rep = d.check_normalized();
        check(rep.is_deterministic(), || format!("{rep}\n{}", d.to_text()))?;
        let (gd, _) = computation_graph(&d, 5);
        let class_of: Vec<usize> =
            d.input.iter().map(|l| m.input_index(l.split('/').next().unwrap()).unwrap() as usize).collect();
        check(gd.is_saturated(&class_of), || format!("not saturated\n{}", d.to_text()))?;
        let (gm, _) = computation_graph(&m, 4);
        let names: HashMap<&str, u32> = (0..gm.num_vertices() as u32).map(|v| (gm.name(v), v)).collect();
        let (gd4, _) = computation_graph(&d, 4);
        let image = |g: &Graph, v: u32, pda: &Pda, strip: bool| -> BTreeSet<(String, String)> {
            g.succ(v)
                .iter()
                .map(|&(x, w)| {
                    let l = &g.labels()[x as usize];
                    let l = if strip { l.split('/').next().unwrap() } else { l.as_str() };
                    (pda.psi[pda.input_index(l).unwrap() as usize].clone(), g.name(w).to_string())
                })
                .collect()
        };
        for v in 0..gd4.num_vertices() as u32 {
            let w = *names.get(gd4.name(v)).ok_or_else(|| format!("vertex {} missing", gd4.name(v)))?;
            if gd4.is_truncated(v) {
                continue;
            }
            check(image(&gd4, v, &m, true) == image(&gm, w, &m, false), || format!("moves differ at {}", gd4.name(v)))?;
            vertices += 1;
        }
    }
    Ok(format!("{trials} random pdas, {vertices} vertices matched under the identity"))
}

/// 10. Triangulation outcomes on the shipped systems.
fn triangulation() -> Result<String, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(data("systems"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sys"))
        .collect();
    files.sort();
    check(files.len() >= 5, || format!("only {} systems", files.len()))?;
    let mut replayed = 0;
    for f in &files {
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        let (g, sys) = LinearSystem::parse(&std::fs::read_to_string(f).unwrap()).map_err(|e| format!("{name}: {e}"))?;
        let res = inv_transform(&g, &sys, 6).map_err(|e| format!("{name}: {e}"))?;
        check(res.norm_bounds_hold(), || format!("{name}: norm bound\n{res}"))?;
        if let InvOutcome::Equation(e) = &res.outcome {
            check(e.alpha.is_deterministic() && e.beta.is_deterministic(), || format!("{name}: not deterministic"))?;
            check_t1(&g, &sys, &res).map_err(|e| format!("{name}: {e}"))?;
            replayed += 1;
        }
    }
    check(replayed >= 4, || format!("only {replayed} equations"))?;
    Ok(format!("{} systems, {replayed} equations replayed", files.len()))
}

/// Written to the stderr handle directly, so the lines survive output capture.
fn report(line: String) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Result<String, String>);
    let criteria: [Criterion; 10] = [
        ("series-algebra laws", series_laws),
        ("norm bounds", norm_bounds),
        ("determinism preservation", determinism),
        ("morphism property", morphism),
        ("game vs brute force", game_vs_brute_force),
        ("graph/series agreement", graph_series),
        ("self-generating checker", self_generating),
        ("end-to-end decide", end_to_end),
        ("determinization", determinization),
        ("triangulation", triangulation),
    ];
    let mut failed = Vec::new();
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(msg) => report(format!("criterion {:>2} PASS {name}: {msg} ({:.1?})", i + 1, start.elapsed())),
            Err(msg) => {
                report(format!("criterion {:>2} FAIL {name}: {msg}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
