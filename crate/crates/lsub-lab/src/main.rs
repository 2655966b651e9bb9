use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lsub_core::calculi::{self, CalculusId, SimBounds, SimKind};
use lsub_core::campaign::{self, Params, Summary};
use lsub_core::confluence::DEFAULT_FANOUT;
use lsub_core::lsub::{self, Strategy, Verdict};
use lsub_core::measures::Measure;
use lsub_core::par::Mode;
use lsub_core::typing::{self, System};
use lsub_core::{parse, Term};

#[derive(Parser)]
#[command(name = "lsub-lab", version, about = "Explore the λsub-calculus: traces, normal forms, translations, types and property campaigns")]
struct Cli {
    /// Emit JSON lines instead of text.
    #[arg(long, global = true)]
    jsonl: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Term (or derivation) given inline.
    term: Option<String>,
    /// Read the input from a file instead (`-` for stdin).
    #[arg(long)]
    file: Option<PathBuf>,
}

impl Input {
    fn text(&self) -> Result<String> {
        match (&self.term, &self.file) {
            (Some(t), None) => Ok(t.clone()),
            (None, Some(f)) if f.as_os_str() == "-" => {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s).context("reading stdin")?;
                Ok(s)
            }
            (None, Some(f)) => std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display())),
            _ => Err(Usage("give exactly one of a term or --file".into()).into()),
        }
    }

    fn term(&self) -> Result<Term> {
        let src = self.text()?;
        parse(src.trim()).map_err(|e| Usage(format!("parse error: {e}")).into())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Leftmost,
    Random,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Les,
    LparEmbed,
    Lambda,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Add,
    Mul,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Confluence,
    FullComposition,
    Simulation,
    Psn,
    Measures,
    Diamond,
    CriticalPairs,
    Typing,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimArg {
    LesSim,
    LparToLsub,
    LsubToLpar,
    LdefIff,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and print a term with its free variables.
    Parse(Input),
    /// Print a reduction trace.
    Reduce {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "lsub")]
        calculus: CalculusId,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = StrategyArg::Leftmost)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// State bound for the exhaustive strategy.
        #[arg(long, default_value_t = 5000)]
        states: usize,
        /// Depth bound for the exhaustive strategy.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Print the normal form in a calculus.
    Normalize {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "sub")]
        calculus: CalculusId,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
    },
    /// Translate between calculi.
    Translate {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        to: Target,
    },
    /// Print the measure `s` and the nonzero multiplicities.
    Measure(Input),
    /// Simple type inference, or intersection derivation checking with --inter.
    Typecheck {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        system: SystemArg,
        #[arg(long)]
        inter: bool,
    },
    /// Run a seeded property campaign.
    PropTest {
        #[arg(value_enum)]
        property: Property,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Term size bound; the maximal enumerated size for psn.
        #[arg(long)]
        size: Option<usize>,
        /// Sample metaterms rather than Λ-terms (confluence).
        #[arg(long)]
        metaterms: bool,
        /// Only one simulation.
        #[arg(long, value_enum)]
        kind: Option<SimArg>,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_FANOUT)]
        fanout: usize,
        /// Free variables of the enumerated terms (psn).
        #[arg(long, value_delimiter = ',', default_value = "a")]
        free: Vec<String>,
        /// Run instances on one thread.
        #[arg(long)]
        sequential: bool,
    },
}

/// Bad input rather than a failed property.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

struct Out {
    jsonl: bool,
    w: io::BufWriter<io::Stdout>,
}

impl Out {
    fn text(&mut self, line: impl std::fmt::Display) -> Result<()> {
        if !self.jsonl {
            writeln!(self.w, "{line}")?;
        }
        Ok(())
    }

    fn json(&mut self, v: impl Serialize) -> Result<()> {
        if self.jsonl {
            writeln!(self.w, "{}", serde_json::to_string(&v)?)?;
        }
        Ok(())
    }

    fn summary(&mut self, s: &Summary) -> Result<()> {
        self.text(s)?;
        self.json(s)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Out { jsonl: cli.jsonl, w: io::BufWriter::new(io::stdout()) };
    let res = run(cli.command, &mut out);
    let flushed = out.w.flush();
    match res {
        Ok(true) if flushed.is_ok() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Ok(false) when a checked property does not hold.
fn run(command: Command, out: &mut Out) -> Result<bool> {
    match command {
        Command::Parse(input) => {
            let t = input.term()?;
            let fv: Vec<String> = t.free_vars().iter().map(|x| x.to_string()).collect();
            out.text(&t)?;
            out.text(format!("free: {}", fv.join(" ")))?;
            out.json(json!({ "term": t, "free": fv, "size": t.size() }))?;
            Ok(true)
        }
        Command::Reduce { input, calculus, steps, strategy, seed, states, depth } => {
            let t = input.term()?;
            calculus.check_syntax(&t).map_err(|e| Usage(e.to_string()))?;
            match strategy {
                StrategyArg::Exhaustive => exhaustive(out, &t, calculus, states, depth.unwrap_or(usize::MAX)),
                StrategyArg::Leftmost | StrategyArg::Random => {
                    let s = match strategy {
                        StrategyArg::Random => Strategy::Random(seed),
                        _ => Strategy::LeftmostOutermost,
                    };
                    let tr = calculi::reduce(calculus, &t, s, steps)?;
                    for step in &tr.steps {
                        out.text(step)?;
                        out.json(step.to_json())?;
                    }
                    let label = if tr.normal { "normal form" } else { "stopped at" };
                    out.text(format!("{label}: {}", tr.last()))?;
                    out.json(json!({ "result": tr.last(), "normal": tr.normal, "steps": tr.steps.len() }))?;
                    Ok(true)
                }
            }
        }
        Command::Normalize { input, calculus, steps } => {
            let t = input.term()?;
            calculus.check_syntax(&t).map_err(|e| Usage(e.to_string()))?;
            let tr = calculi::reduce(calculus, &t, Strategy::LeftmostOutermost, steps)?;
            let nf = tr.normal.then(|| tr.last().clone());
            match nf {
                Some(nf) => {
                    out.text(&nf)?;
                    out.json(json!({ "term": t, "normal_form": nf }))?;
                    Ok(true)
                }
                None => {
                    out.text(format!("no {calculus} normal form within {steps} steps"))?;
                    out.json(json!({ "term": t, "normal_form": null }))?;
                    Ok(false)
                }
            }
        }
        Command::Translate { input, to } => {
            let t = input.term()?;
            let r = match to {
                Target::Les => calculi::tra(&t),
                Target::LparEmbed => calculi::parlm(&t),
                Target::Lambda => calculi::lmpar(&t),
            }
            .map_err(|e| Usage(e.to_string()))?;
            out.text(&r)?;
            out.json(json!({ "term": t, "translation": r }))?;
            Ok(true)
        }
        Command::Measure(input) => {
            let t = input.term()?;
            let m = Measure::of(&t);
            let mut line = format!("s={}", m.s);
            for (x, n) in m.mul.iter().filter(|(_, n)| **n > 0) {
                line.push_str(&format!(" mul({x})={n}"));
            }
            out.text(line)?;
            out.json(json!({ "term": t, "s": m.s, "mul": m.mul }))?;
            Ok(true)
        }
        Command::Typecheck { input, system, inter } => typecheck(out, &input, system, inter),
        Command::PropTest { property, seed, count, size, metaterms, kind, states, fanout, free, sequential } => {
            let mode = if sequential { Mode::Sequential } else { Mode::default() };
            let p = |default_size| Params { seed, count, size: size.unwrap_or(default_size), mode };
            let summaries = match property {
                Property::Confluence => vec![campaign::confluence(p(8), metaterms, states.unwrap_or(2000))],
                Property::FullComposition => {
                    vec![campaign::full_composition(p(10)), campaign::snf_uniqueness(p(10))]
                }
                Property::Measures => vec![campaign::measure_steps(p(10)), campaign::measure_swaps(p(8))],
                Property::Diamond => vec![campaign::diamond(p(8), fanout), campaign::projection(p(8), fanout)],
                Property::CriticalPairs => vec![campaign::critical_pairs()],
                Property::Simulation => {
                    let kinds = match kind {
                        Some(k) => vec![sim_kind(k)],
                        None => vec![SimKind::LesSim, SimKind::LparToLsub, SimKind::LsubToLpar, SimKind::LdefIff],
                    };
                    kinds.into_iter().map(|k| campaign::simulation(p(6), k, 3, SimBounds::default())).collect()
                }
                Property::Psn => {
                    let free: Vec<&str> = free.iter().map(String::as_str).collect();
                    campaign::sn_transfers(size.unwrap_or(7), &free, states.unwrap_or(5000), mode)
                }
                Property::Typing => {
                    let q = p(8);
                    let mut v = typing::sn_typability_campaign(seed, count, q.size, states.unwrap_or(5000), mode);
                    v.push(campaign::derivations(q));
                    v.push(campaign::translation_typability(q));
                    v.push(campaign::ll_bruteforce(3));
                    v
                }
            };
            let mut ok = true;
            for s in &summaries {
                out.summary(s)?;
                ok &= s.passed();
            }
            Ok(ok)
        }
    }
}

fn sim_kind(k: SimArg) -> SimKind {
    match k {
        SimArg::LesSim => SimKind::LesSim,
        SimArg::LparToLsub => SimKind::LparToLsub,
        SimArg::LsubToLpar => SimKind::LsubToLpar,
        SimArg::LdefIff => SimKind::LdefIff,
    }
}

fn exhaustive(out: &mut Out, t: &Term, calculus: CalculusId, states: usize, depth: usize) -> Result<bool> {
    let g = lsub::Graph::explore(t, calculus.rules(), states, depth);
    let r = g.report();
    let nfs: Vec<String> = g.normal_forms().iter().map(|t| t.to_string()).collect();
    out.text(format!("verdict: {:?}", r.verdict))?;
    out.text(format!("states: {}", r.distinct_states))?;
    if let Some(n) = r.max_length {
        out.text(format!("longest reduction: {n}"))?;
    }
    if let Some(w) = &r.witness {
        let what = if r.verdict == Verdict::NotSN { "cycle through" } else { "frontier" };
        out.text(format!("{what}: {w}"))?;
    }
    for nf in &nfs {
        out.text(format!("normal form: {nf}"))?;
    }
    out.json(json!({
        "verdict": r.verdict,
        "states": r.distinct_states,
        "max_length": r.max_length,
        "witness": r.witness,
        "normal_forms": nfs,
    }))?;
    Ok(true)
}

fn typecheck(out: &mut Out, input: &Input, system: SystemArg, inter: bool) -> Result<bool> {
    let additive = matches!(system, SystemArg::Add);
    let src = input.text()?;
    let as_term = parse(src.trim());
    let derivation = if inter && as_term.is_err() && src.trim_start().starts_with('(') {
        let d = typing::parse_derivation(&src, System::AddILm).map_err(|e| Usage(e.to_string()))?;
        let sys = System::new(additive, true, !d.term.is_pure());
        let d = d.in_system(sys);
        if let Err(e) = typing::check_derivation(&d) {
            out.text(format!("invalid in {sys}: {e}"))?;
            out.json(json!({ "system": sys.to_string(), "valid": false, "error": e.to_string() }))?;
            return Ok(false);
        }
        d
    } else {
        let t = as_term.map_err(|e| Usage(format!("parse error: {e}")))?;
        let found = if inter {
            typing::type_normal_form(&t).map_err(|e| anyhow!("{e}; intersection witnesses are built for β-normal λ-terms"))
        } else {
            let sys = System::new(true, false, !t.is_pure());
            typing::infer_simple(&t, sys).map(|ty| ty.derivation).ok_or_else(|| anyhow!("{t} is not typable in {sys}"))
        };
        let d = match found {
            Ok(d) => d,
            Err(e) => {
                out.text(&e)?;
                out.json(json!({ "term": t, "valid": false, "error": e.to_string() }))?;
                return Ok(false);
            }
        };
        if additive {
            d
        } else {
            typing::add_mul_transfer(&d)?
        }
    };
    if !typing::is_valid(&derivation) {
        bail!("internal: constructed derivation is invalid");
    }
    out.text(format!("{}: {}", derivation.system, derivation.judgement()))?;
    out.text(derivation.to_string().trim_end())?;
    out.json(json!({
        "system": derivation.system.to_string(),
        "valid": true,
        "env": derivation.env,
        "term": derivation.term,
        "type": derivation.ty,
        "derivation": derivation.to_sexpr(),
    }))?;
    Ok(true)
}
