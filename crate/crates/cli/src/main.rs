use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bisim_core::decide::{decide_series, union_series, Prepared, Schedule, Verdict};
use bisim_core::games::order_n_bisim;
use bisim_core::graphs::{computation_graph, determinize_pda};
use bisim_core::proofs::{verify_proof_file, CongBudget};
use bisim_core::series::parse_vector;
use bisim_core::triangulation::{check_t1, inv_transform, InvOutcome, LinearSystem};
use bisim_core::{Config, Grammar, Pda, PdaPipeline, SeriesVector};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const EXIT_YES: u8 = 0;
const EXIT_NO: u8 = 1;
const EXIT_UNDECIDED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "pdbisim", version, about = "Bisimilarity of pushdown processes and deterministic series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the refutation/proof schedule on two configurations or vectors.
    Decide {
        #[command(flatten)]
        input: PairInput,
        /// Number of schedule steps.
        #[arg(long, default_value_t = 8)]
        schedule: usize,
        /// Refutation cap multiplier: step k searches divergence up to cap·k.
        #[arg(long, default_value_t = 2)]
        cap: usize,
        /// Proof-pair multiplier: step k allows budget·k pairs.
        #[arg(long, default_value_t = 1)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the proof file of a BISIMILAR verdict here.
        #[arg(long)]
        proof_out: Option<PathBuf>,
    },
    /// Whether an order-n w-bisimulation relates the two sides.
    CheckOrder {
        #[command(flatten)]
        input: PairInput,
        #[arg(short, long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check a self-generating proof file.
    Verify {
        proof: PathBuf,
        /// Congruence search budget.
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write the depth-bounded computation graph of a pda.
    ExportGraph {
        pda: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the stages of the reduction pipeline for a pda.
    Grammar { pda: PathBuf },
    /// Run the elimination procedure on a linear system file.
    Triangulate {
        system: PathBuf,
        #[arg(long, default_value_t = 6)]
        cap: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// One pda (two configurations), two pdas, or a grammar with two vectors.
#[derive(Args)]
struct PairInput {
    /// A pda, or a grammar whose vectors are given by --left/--right.
    file: PathBuf,
    /// A second pda; its initial configuration is the right side by default.
    file2: Option<PathBuf>,
    /// Left configuration (`state Z1 Z2 ...`) or vector (`[A B, C]`).
    #[arg(long)]
    left: Option<String>,
    /// Right configuration or vector.
    #[arg(long)]
    right: Option<String>,
}

enum Source {
    Pda(Pda),
    Grammar(Grammar),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path) -> Result<Source> {
    let text = read(path)?;
    let is_pda = text.lines().any(|l| l.trim_start().starts_with("initial:"));
    if is_pda {
        Ok(Source::Pda(Pda::parse(&text).with_context(|| format!("parsing pda {}", path.display()))?))
    } else {
        Ok(Source::Grammar(Grammar::parse(&text).with_context(|| format!("parsing grammar {}", path.display()))?))
    }
}

fn load_pda(path: &Path) -> Result<Pda> {
    match load(path)? {
        Source::Pda(p) => Ok(p),
        Source::Grammar(_) => bail!("{} is not a pda", path.display()),
    }
}

/// The grammar and the two vectors named by a `PairInput`.
fn resolve(input: &PairInput) -> Result<Resolved> {
    let first = load(&input.file)?;
    match (first, &input.file2) {
        (Source::Pda(left), Some(path2)) => {
            let right = load_pda(path2)?;
            let v = input.left.as_deref().map(|c| left.parse_config(c)).transpose()?;
            let v2 = input.right.as_deref().map(|c| right.parse_config(c)).transpose()?;
            Ok(Resolved::Pdas { left, right, v, v2 })
        }
        (Source::Pda(pda), None) => {
            let v = match &input.left {
                Some(c) => pda.parse_config(c)?,
                None => pda.initial.clone(),
            };
            let Some(r) = &input.right else { bail!("one pda needs --right (and optionally --left)") };
            let v2 = pda.parse_config(r)?;
            let p = Prepared::new(&pda)?;
            let (s, t) = (p.theta_of(&v)?, p.theta_of(&v2)?);
            Ok(Resolved::Series { g: p.grammar().clone(), s, t })
        }
        (Source::Grammar(g), None) => {
            let (Some(l), Some(r)) = (&input.left, &input.right) else {
                bail!("a grammar input needs --left and --right vectors")
            };
            let s = parse_vector(l, g.variables(), 1, 1).context("--left")?;
            let t = parse_vector(r, g.variables(), 1, 1).context("--right")?;
            Ok(Resolved::Series { g, s, t })
        }
        (Source::Grammar(_), Some(_)) => bail!("a second input file only goes with a pda"),
    }
}

enum Resolved {
    Series { g: Grammar, s: SeriesVector, t: SeriesVector },
    Pdas { left: Pda, right: Pda, v: Option<Config>, v2: Option<Config> },
}

impl Resolved {
    fn series(self) -> Result<(Grammar, SeriesVector, SeriesVector)> {
        match self {
            Resolved::Series { g, s, t } => Ok((g, s, t)),
            Resolved::Pdas { left, right, v, v2 } => Ok(union_series(&left, &right, v.as_ref(), v2.as_ref())?),
        }
    }
}

fn run_decide(input: PairInput, schedule: Schedule, format: Format, proof_out: Option<PathBuf>) -> Result<u8> {
    schedule.validate()?;
    let (g, s, t) = resolve(&input)?.series()?;
    let decision = decide_series(&g, &s, &t, schedule)?;
    let recheck = decision.reverify();
    if let (Some(path), Some(file)) = (&proof_out, decision.proof_file()) {
        fs::write(path, file.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    let g = &decision.grammar;
    match format {
        Format::Text => {
            println!("schedule: {}", decision.schedule);
            println!("left:  {}", decision.left);
            println!("right: {}", decision.right);
            for line in &decision.log {
                println!("{line}");
            }
            match &decision.verdict {
                Verdict::Bisimilar(p) => {
                    println!("proof set ({} pairs):", p.pairs.len());
                    for (a, b) in &p.pairs {
                        println!("  {a} ~ {b}");
                    }
                }
                Verdict::NotBisimilar { order, certificate } => {
                    println!("divergence: {order}");
                    if let Some(c) = certificate {
                        println!("order-{} certificate ({} pairs):", order.saturating_sub(1), c.len());
                        print!("{}", c.to_text(g.terminals()));
                    }
                }
                Verdict::Undecided { steps } => println!("no verdict within {steps} steps"),
            }
            match &recheck {
                Ok(()) => println!("re-verified: yes"),
                Err(e) => println!("re-verified: NO ({e})"),
            }
            println!("{}", decision.verdict.label());
        }
        Format::Json => {
            let mut out = json!({
                "verdict": decision.verdict.label(),
                "step": decision.step,
                "schedule": {"steps": schedule.steps, "cap": schedule.cap, "pairs": schedule.pairs},
                "left": decision.left.to_string(),
                "right": decision.right.to_string(),
                "log": decision.log,
                "reverified": recheck.is_ok(),
            });
            match &decision.verdict {
                Verdict::Bisimilar(p) => {
                    out["proof_set"] =
                        p.pairs.iter().map(|(a, b)| json!([a.to_string(), b.to_string()])).collect();
                }
                Verdict::NotBisimilar { order, certificate } => {
                    out["divergence"] = json!(order);
                    if let Some(c) = certificate {
                        out["certificate"] = json!(c.to_text(g.terminals()).lines().collect::<Vec<_>>());
                    }
                }
                Verdict::Undecided { .. } => {}
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    if let Err(e) = recheck {
        bail!("verdict failed re-verification: {e}");
    }
    Ok(match decision.verdict {
        Verdict::Bisimilar(_) => EXIT_YES,
        Verdict::NotBisimilar { .. } => EXIT_NO,
        Verdict::Undecided { .. } => EXIT_UNDECIDED,
    })
}

fn run_check_order(input: PairInput, n: usize, format: Format) -> Result<u8> {
    let (g, s, t) = resolve(&input)?.series()?;
    let rel = order_n_bisim(&g, &s, &t, n)?;
    match format {
        Format::Text => {
            println!("left:  {s}");
            println!("right: {t}");
            match &rel {
                Some(r) => {
                    println!("order-{n} certificate ({} pairs):", r.len());
                    print!("{}", r.to_text(g.terminals()));
                    println!("RELATED");
                }
                None => println!("NOT RELATED at order {n}"),
            }
        }
        Format::Json => {
            let out = json!({
                "order": n,
                "related": rel.is_some(),
                "certificate": rel.as_ref().map(|r| r.to_text(g.terminals()).lines().map(String::from).collect::<Vec<_>>()),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(if rel.is_some() { EXIT_YES } else { EXIT_NO })
}

fn run_verify(path: &Path, budget: usize, format: Format) -> Result<u8> {
    if budget == 0 {
        bail!("--budget must be positive");
    }
    let report = verify_proof_file(&read(path)?, CongBudget::new(budget))?;
    match format {
        Format::Text => println!("{report}"),
        Format::Json => {
            let out = json!({
                "accepted": report.accepted(),
                "pairs": report.num_pairs,
                "goals": report.goals,
                "failures": report.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
                "goal_failures": report.goal_failures.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(if report.accepted() { EXIT_YES } else { EXIT_NO })
}

fn run_export(path: &Path, depth: usize, output: Option<PathBuf>) -> Result<u8> {
    let pda = load_pda(path)?;
    let (g, _) = computation_graph(&pda, depth);
    let text = g.export();
    match output {
        Some(out) => {
            fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {}", out.display());
        }
        None => print!("{text}"),
    }
    let truncated = (0..g.num_vertices() as u32).filter(|&v| g.is_truncated(v)).count();
    eprintln!("vertices: {} edges: {} truncated: {truncated}", g.num_vertices(), g.num_edges());
    Ok(EXIT_YES)
}

fn run_grammar(path: &Path) -> Result<u8> {
    let pda = load_pda(path)?;
    println!("== normalization");
    print!("{}", pda.check_normalized());
    let split = pda.split_pushes()?;
    let coroot = split.with_coroot()?;
    println!("== with co-root\n{}", coroot.to_text());
    let det = determinize_pda(&coroot)?;
    println!("== determinized\n{}", det.to_text());
    let p = PdaPipeline::new(det)?;
    println!("== triple grammar\n{}", p.gm.to_text());
    println!("== reduced\n{}", p.g0().to_text());
    println!("== marked\n{}", p.g.to_text());
    let prepared = Prepared::new(&pda)?;
    println!("== initial configuration\ntheta({}) = {}", pda.format_config(&pda.initial), prepared.theta_of(&pda.initial)?);
    Ok(EXIT_YES)
}

fn run_triangulate(path: &Path, cap: usize, format: Format) -> Result<u8> {
    let (g, sys) = LinearSystem::parse(&read(path)?)?;
    let res = inv_transform(&g, &sys, cap)?;
    let t1 = match res.outcome {
        InvOutcome::Equation(_) => Some(check_t1(&g, &sys, &res)),
        _ => None,
    };
    match format {
        Format::Text => {
            println!("{res}");
            match &t1 {
                Some(Ok(steps)) => println!("replay: {} steps ok", steps.len()),
                Some(Err(f)) => println!("replay FAILED: {f}"),
                None => {}
            }
        }
        Format::Json => {
            let out = json!({
                "outcome": match &res.outcome {
                    InvOutcome::Equation(_) => "equation".to_string(),
                    InvOutcome::Bottom => "bottom".to_string(),
                    InvOutcome::OracleExhausted(c) => format!("exhausted at cap {c}"),
                },
                "weight": res.weight(),
                "d": res.d,
                "norm_bounds": res.norm_bounds_hold(),
                "replay": t1.as_ref().map(|r| r.is_ok()),
                "log": res.log.iter().map(|s| format!("{:?}", s.case)).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(match (&res.outcome, &t1) {
        (_, Some(Err(_))) => EXIT_NO,
        (InvOutcome::Equation(_), _) => EXIT_YES,
        (InvOutcome::Bottom, _) => EXIT_NO,
        (InvOutcome::OracleExhausted(_), _) => EXIT_UNDECIDED,
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Decide { input, schedule, cap, budget, format, proof_out } => {
            run_decide(input, Schedule { steps: schedule, cap, pairs: budget }, format, proof_out)
        }
        Command::CheckOrder { input, n, format } => run_check_order(input, n, format),
        Command::Verify { proof, budget, format } => run_verify(&proof, budget, format),
        Command::ExportGraph { pda, depth, output } => run_export(&pda, depth, output),
        Command::Grammar { pda } => run_grammar(&pda),
        Command::Triangulate { system, cap, format } => run_triangulate(&system, cap, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_YES });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
