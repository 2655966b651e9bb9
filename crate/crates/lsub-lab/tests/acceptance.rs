//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lsub_core::calculi::{SimBounds, SimKind};
use lsub_core::campaign::{self, Params, Summary};
use lsub_core::lsub::{explore_sn, Verdict, BETA, LSUB};
use lsub_core::par::Mode;
use lsub_core::typing::{self, System};
use lsub_core::parse;

const SEED: u64 = 20;
const LIMIT: Duration = Duration::from_secs(60);

struct Criterion {
    id: usize,
    name: &'static str,
    ok: bool,
    detail: Vec<String>,
    elapsed: Duration,
}

fn run(id: usize, name: &'static str, f: impl FnOnce(&mut Vec<String>) -> bool) -> Criterion {
    let start = Instant::now();
    let mut detail = Vec::new();
    let ok = f(&mut detail);
    Criterion { id, name, ok, detail, elapsed: start.elapsed() }
}

fn params(count: usize, size: usize) -> Params {
    Params { mode: Mode::Parallel, ..Params::new(SEED, count, size) }
}

/// Zero failures, zero inconclusive, nothing skipped.
fn exact(s: &Summary, out: &mut Vec<String>) -> bool {
    out.push(s.to_string());
    s.failures == 0 && s.inconclusive == 0 && s.skipped == 0
}

fn timed(ok: bool, start: Instant, out: &mut Vec<String>) -> bool {
    let e = start.elapsed();
    out.push(format!("elapsed {:.1}s (limit {}s)", e.as_secs_f64(), LIMIT.as_secs()));
    ok && e < LIMIT
}

fn full_composition(out: &mut Vec<String>) -> bool {
    let start = Instant::now();
    let s = campaign::full_composition(params(1000, 10));
    let ok = exact(&s, out) && s.instances == 1000;
    timed(ok, start, out)
}

fn snf_uniqueness(out: &mut Vec<String>) -> bool {
    let start = Instant::now();
    let s = campaign::snf_uniqueness(params(1000, 10));
    let ok = exact(&s, out) && s.instances == 1000;
    timed(ok, start, out)
}

fn measures(out: &mut Vec<String>) -> bool {
    let start = Instant::now();
    let steps = campaign::measure_steps(params(1000, 10));
    let swaps = campaign::measure_swaps(params(500, 8));
    let ok = exact(&steps, out) & exact(&swaps, out) && steps.instances == 1000 && swaps.instances == 500;
    timed(ok, start, out)
}

fn diamond(out: &mut Vec<String>) -> bool {
    let d = campaign::diamond(params(300, 8), lsub_core::confluence::DEFAULT_FANOUT);
    let p = campaign::projection(params(1000, 8), lsub_core::confluence::DEFAULT_FANOUT);
    out.push(d.to_string());
    out.push(p.to_string());
    d.instances == 300 && d.failures == 0 && d.skipped == 0 && exact(&p, &mut Vec::new()) && p.instances == 1000
}

fn confluence(out: &mut Vec<String>) -> bool {
    let s = campaign::confluence(params(600, 8), true, 2000);
    out.push(s.to_string());
    out.push(format!("{} SN instances checked (need 500)", s.decided()));
    s.failures == 0 && s.decided() >= 500
}

fn critical_pairs(out: &mut Vec<String>) -> bool {
    let s = campaign::critical_pairs();
    exact(&s, out) && s.instances > 0
}

fn simulations(out: &mut Vec<String>) -> bool {
    let mut ok = true;
    for kind in [SimKind::LesSim, SimKind::LparToLsub, SimKind::LsubToLpar, SimKind::LdefIff] {
        let s = campaign::simulation(params(500, 6), kind, 3, SimBounds::default());
        let attempted = s.instances - s.skipped;
        let rate = s.inconclusive as f64 / attempted.max(1) as f64;
        out.push(format!("{s} (inconclusive {:.2}%)", 100.0 * rate));
        ok &= s.instances == 500 && s.failures == 0 && rate < 0.05 && attempted > 0;
    }
    ok
}

fn sn_transfers(out: &mut Vec<String>) -> bool {
    let mut ok = true;
    for s in campaign::sn_transfers(7, &["a"], 5000, Mode::Parallel) {
        ok &= exact(&s, out) && s.instances > 0;
    }
    ok
}

const DELTA: &str = r#"
(app ((x (& (-> A B) A))) "x x" B
  (inter-e ((x (& (-> A B) A))) "x" (-> A B)
    (ax ((x (& (-> A B) A))) "x" (& (-> A B) A)))
  (inter-e ((x (& (-> A B) A))) "x" A
    (ax ((x (& (-> A B) A))) "x" (& (-> A B) A))))
"#;

fn typing_checks(out: &mut Vec<String>) -> bool {
    let mut ok = true;
    let summaries = typing::sn_typability_campaign(SEED, 700, 8, 5000, Mode::Parallel);
    let simple = &summaries[0];
    let typable = simple.instances - simple.skipped;
    out.push(format!("{typable} simply typable samples (need 500)"));
    for s in &summaries {
        ok &= s.failures == 0;
        out.push(s.to_string());
    }
    ok &= typable >= 500 && simple.inconclusive == 0;

    let d = campaign::derivations(params(200, 8));
    ok &= exact(&d, out) && d.instances == 200;

    let delta = typing::parse_derivation(DELTA, System::AddILambda).expect("δ derivation parses");
    let delta_ok = typing::is_valid(&delta)
        && delta.size() == 5
        && campaign::derivation_checks(&delta).is_ok()
        && typing::type_normal_form(&parse("\\x. x x").unwrap()).is_ok();
    out.push(format!("δ derivation valid and transferable: {delta_ok}"));

    let omega = parse("(\\x. x x) (\\x. x x)").unwrap();
    let omega_ok = typing::infer_simple(&omega, System::AddLambda).is_none()
        && typing::type_normal_form(&omega).is_err()
        && explore_sn(&omega, LSUB, 5000, usize::MAX).verdict == Verdict::NotSN
        && explore_sn(&omega, BETA, 5000, usize::MAX).verdict == Verdict::NotSN;
    out.push(format!("Ω untypable and not SN: {omega_ok}"));

    let ll = campaign::ll_bruteforce(3);
    ok & delta_ok & omega_ok & exact(&ll, out)
}

fn lab(args: &[&str]) -> (Vec<u8>, Option<i32>) {
    let o = Command::new(env!("CARGO_BIN_EXE_lsub-lab")).args(args).output().expect("run lsub-lab");
    (o.stdout, o.status.code())
}

fn determinism(out: &mut Vec<String>) -> bool {
    let runs: &[&[&str]] = &[
        &["reduce", "--strategy", "random", "--seed", "11", "--steps", "40", "(\\x. x x) ((\\y. y) z)[z/w]"],
        &["reduce", "--strategy", "exhaustive", "--calculus", "les", "(\\x. x x) y"],
        &["--jsonl", "reduce", "--strategy", "random", "--seed", "3", "((\\a. ?X{a,x}) (x y))[x/\\b. b]"],
        &["prop-test", "confluence", "--seed", "7", "--count", "100", "--size", "8"],
        &["--jsonl", "prop-test", "simulation", "--seed", "5", "--count", "60"],
        &["prop-test", "typing", "--seed", "9", "--count", "60"],
        &["typecheck", "--system", "mul", "--inter", "\\x. x (\\y. y) x"],
    ];
    let mut ok = true;
    for args in runs {
        let (a, ca) = lab(args);
        let (b, cb) = lab(args);
        let same = a == b && ca == cb && ca == Some(0) && !a.is_empty();
        out.push(format!("{} run twice: {}", args.join(" "), if same { "identical" } else { "DIFFERENT" }));
        ok &= same;
    }
    let (par, _) = lab(&["prop-test", "diamond", "--seed", "4", "--count", "80"]);
    let (seq, _) = lab(&["prop-test", "diamond", "--seed", "4", "--count", "80", "--sequential"]);
    out.push(format!("parallel and sequential campaigns identical: {}", par == seq));
    ok && par == seq
}

fn main() -> ExitCode {
    let criteria = [
        run(1, "full composition", full_composition),
        run(2, "snf uniqueness", snf_uniqueness),
        run(3, "measures", measures),
        run(4, "diamond and projection", diamond),
        run(5, "end-to-end confluence", confluence),
        run(6, "critical pairs", critical_pairs),
        run(7, "simulations", simulations),
        run(8, "SN transfers", sn_transfers),
        run(9, "typing", typing_checks),
        run(10, "determinism", determinism),
    ];
    let mut failed = 0;
    for c in &criteria {
        let verdict = if c.ok { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {:>2} {} ({:.1}s)", c.id, c.name, c.elapsed.as_secs_f64());
        for d in &c.detail {
            println!("       {}", d.replace('\n', "\n       "));
        }
        failed += usize::from(!c.ok);
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
