//! Seeded property campaigns shared by the CLI and the acceptance suite.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::calculi::{self, SimBounds, SimKind};
use crate::confluence::{self, Diamond, FuzzConfig};
use crate::gen::{self, instance_rng, GenConfig, Rng8};
use crate::lsub::{self, Outcome, RuleId, Step, Strategy, Verdict, BETA, LSUB, SUB};
use crate::measures;
use crate::par::{self, Mode};
use crate::syntax::{Name, Term};
use crate::typing::{self, Env, System, TRule, TypeExpr};

const MAX_COUNTEREXAMPLES: usize = 10;
/// Draws per instance before a precondition is given up on.
const RETRIES: usize = 64;

/// Outcome of one campaign instance; `None` when its precondition failed.
#[derive(Clone, Debug)]
pub struct Inst {
    pub outcome: Outcome,
    /// Number of atomic checks behind the outcome.
    pub checks: usize,
    pub witness: Option<String>,
}

impl Inst {
    pub fn new(outcome: Outcome, checks: usize, witness: impl FnOnce() -> String) -> Inst {
        let witness = (outcome != Outcome::Holds).then(witness);
        Inst { outcome, checks, witness }
    }

    pub fn holds(ok: bool, witness: impl FnOnce() -> String) -> Inst {
        Inst::new(if ok { Outcome::Holds } else { Outcome::Fails }, 1, witness)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub property: String,
    pub instances: usize,
    pub checks: usize,
    pub failures: usize,
    pub inconclusive: usize,
    pub skipped: usize,
    pub counterexamples: Vec<String>,
}

impl Summary {
    pub fn tally(property: &str, results: impl IntoIterator<Item = Option<Inst>>) -> Summary {
        let mut s = Summary { property: property.to_string(), ..Summary::default() };
        for r in results {
            s.instances += 1;
            let Some(r) = r else {
                s.skipped += 1;
                continue;
            };
            s.checks += r.checks;
            match r.outcome {
                Outcome::Holds => {}
                Outcome::Fails => {
                    s.failures += 1;
                    if s.counterexamples.len() < MAX_COUNTEREXAMPLES {
                        s.counterexamples.extend(r.witness);
                    }
                }
                Outcome::Inconclusive => s.inconclusive += 1,
            }
        }
        s
    }

    /// Instances that reached a verdict.
    pub fn decided(&self) -> usize {
        self.instances - self.skipped - self.inconclusive
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} instances, {} checks, {} failures, {} inconclusive, {} skipped",
            self.property, self.instances, self.checks, self.failures, self.inconclusive, self.skipped
        )?;
        for c in &self.counterexamples {
            write!(f, "\n  counterexample: {c}")?;
        }
        Ok(())
    }
}

/// Common parameters of the random campaigns.
#[derive(Clone, Copy, Debug)]
pub struct Params {
    pub seed: u64,
    pub count: usize,
    pub size: usize,
    pub mode: Mode,
}

impl Params {
    pub fn new(seed: u64, count: usize, size: usize) -> Params {
        Params { seed, count, size, mode: Mode::default() }
    }

    fn run<F>(&self, property: &str, f: F) -> Summary
    where
        F: Fn(&mut Rng8) -> Option<Inst> + Sync,
    {
        let results = par::map_range(self.mode, self.count, |i| f(&mut instance_rng(self.seed, i)));
        Summary::tally(property, results)
    }
}

fn pick<'a, T>(rng: &mut Rng8, items: &'a [T]) -> Option<&'a T> {
    items.choose(rng)
}

// Substitution calculus

/// `sub(t[x/u]) = sub(t{x/u})` with metavariable leaves at probability 0.3.
pub fn full_composition(p: Params) -> Summary {
    let cfg = GenConfig { meta_leaf: 0.3, ..GenConfig::metaterms(p.size) };
    p.run("full-composition", |rng| {
        let t = gen::term(rng, &cfg);
        let u = gen::term(rng, &cfg);
        let x = pick(rng, &cfg.vars).expect("vars").clone();
        Some(Inst::holds(lsub::full_composition_check(&t, &x, &u), || format!("t = {t}, x = {x}, u = {u}")))
    })
}

/// Leftmost and random sub-normalisation reach E_s-equal results, both equal
/// to the compositional normal form.
pub fn snf_uniqueness(p: Params) -> Summary {
    let cfg = GenConfig::metaterms(p.size);
    p.run("snf-uniqueness", |rng| {
        let t = gen::term(rng, &cfg);
        let a = lsub::normalize_sub_with(&t, Strategy::LeftmostOutermost);
        let b = lsub::normalize_sub_with(&t, Strategy::Random(rng.gen()));
        let ok = lsub::c_equal(&a, &b) && lsub::c_equal(&a, &lsub::snf(&t)) && lsub::is_sub_normal(&a);
        Some(Inst::holds(ok, || format!("{t}: {a} vs {b}")))
    })
}

/// Every R, Gc and RX step (raw and modulo E_s) lowers `s` and no `mul_z`.
pub fn measure_steps(p: Params) -> Summary {
    let cfg = GenConfig::metaterms(p.size);
    p.run("measures-decrease", |rng| {
        let t = gen::term(rng, &cfg);
        let mut steps = lsub::redexes(&t, SUB);
        steps.extend(lsub::steps_modulo(&t, SUB));
        let bad = steps.iter().find(|s| measures::check_decrease(s) != Ok(true));
        let n = steps.len();
        Some(Inst::new(if bad.is_some() { Outcome::Fails } else { Outcome::Holds }, n, || {
            bad.map(|s| s.to_string()).unwrap_or_default()
        }))
    })
}

fn swap_instance(rng: &mut Rng8, cfg: &GenConfig) -> Option<Step> {
    for _ in 0..RETRIES {
        let xy: Vec<Name> = cfg.vars.choose_multiple(rng, 2).cloned().collect();
        let (x, y) = (&xy[0], &xy[1]);
        let u = gen::term(rng, cfg);
        let v = gen::term(rng, cfg);
        if u.has_free(y) || v.has_free(x) {
            continue;
        }
        let b = if rng.gen_bool(0.5) {
            let mut support = vec![if rng.gen_bool(0.5) { x.clone() } else { y.clone() }];
            support.extend(cfg.vars.choose(rng).cloned());
            support.sort();
            support.dedup();
            Term::Meta(cfg.metas.choose(rng).expect("metas").clone(), support)
        } else {
            gen::term(rng, cfg)
        };
        let clo = |b: Term, x: &Name, u: &Term| Term::Closure(b.into(), x.clone(), u.clone().into());
        let before = clo(clo(b.clone(), x, &u), y, &v);
        let after = clo(clo(b, y, &v), x, &u);
        return Some(Step { rule: RuleId::C, position: Vec::new(), occurrence: None, before, after });
    }
    None
}

/// Swapping two independent substitutions preserves `s` and every `mul_z`.
pub fn measure_swaps(p: Params) -> Summary {
    let cfg = GenConfig::metaterms(p.size);
    p.run("measures-invariance", |rng| {
        let s = swap_instance(rng, &cfg)?;
        Some(Inst::holds(measures::check_decrease(&s) == Ok(true), || s.to_string()))
    })
}

// Confluence

/// The diamond property of parallel reduction on sub-normal forms.
pub fn diamond(p: Params, fanout: usize) -> Summary {
    let cfg = GenConfig::metaterms(p.size);
    p.run("diamond", |rng| {
        let t = lsub::snf(&gen::term(rng, &cfg));
        match confluence::diamond_check(&t, fanout) {
            Ok(Diamond::Holds) => Some(Inst::holds(true, String::new)),
            Ok(Diamond::Inconclusive) => Some(Inst::new(Outcome::Inconclusive, 1, || t.to_string())),
            Ok(Diamond::Fails(a, b)) => Some(Inst::holds(false, || format!("{t}: {a} and {b} do not join"))),
            Err(e) => Some(Inst::holds(false, || format!("{t}: {e}"))),
        }
    })
}

fn random_step(rng: &mut Rng8, cfg: &GenConfig, rules: &[RuleId]) -> Option<(Term, Term)> {
    for _ in 0..RETRIES {
        let t = gen::term(rng, cfg);
        if let Some(t2) = pick(rng, &lsub::step_modulo(&t, rules)) {
            return Some((t, t2.clone()));
        }
    }
    None
}

/// A step `t → t'` projects to `sub(t) ⫴ sub(t')`.
pub fn projection(p: Params, fanout: usize) -> Summary {
    let cfg = GenConfig::metaterms(p.size);
    p.run("projection", |rng| {
        let (t, t2) = random_step(rng, &cfg, LSUB)?;
        let w = || format!("{t} → {t2}");
        Some(match confluence::project_and_check(&t, &t2, fanout) {
            Ok(o) => Inst::new(o, 1, w),
            Err(e) => Inst::holds(false, || format!("{}: {e}", w())),
        })
    })
}

/// Two random maximal reductions of an SN metaterm rejoin modulo E_s.
pub fn confluence(p: Params, metaterms: bool, state_bound: usize) -> Summary {
    let cfg = FuzzConfig { metaterms, state_bound, mode: p.mode, ..FuzzConfig::new(p.seed, p.count, p.size) };
    let rep = confluence::confluence_fuzz(&cfg);
    Summary {
        property: "confluence".to_string(),
        instances: rep.instances,
        checks: rep.checked,
        failures: rep.failures.len(),
        inconclusive: rep.bound_exceeded,
        skipped: rep.not_sn,
        counterexamples: rep
            .failures
            .iter()
            .take(MAX_COUNTEREXAMPLES)
            .map(|f| format!("{} ({} normal forms)", f.term, f.normal_forms))
            .collect(),
    }
}

pub fn critical_pairs() -> Summary {
    let reports = confluence::critical_pairs_check();
    Summary::tally(
        "critical-pairs",
        reports.iter().map(|r| {
            Some(Inst::holds(r.passed(), || {
                let show = |t: &Option<Term>| t.as_ref().map(|t| t.to_string()).unwrap_or_else(|| "-".into());
                format!("{}: {} / {} from {}", r.name, show(&r.left), show(&r.right), r.peak)
            }))
        }),
    )
}

// Sister calculi

fn source_rules(kind: SimKind) -> &'static [RuleId] {
    match kind {
        SimKind::LparToLsub => calculi::LPAR,
        SimKind::LdefIff => calculi::LDEF,
        SimKind::LsubToLpar | SimKind::LesSim => LSUB,
    }
}

pub fn sim_name(kind: SimKind) -> &'static str {
    match kind {
        SimKind::LparToLsub => "simulation lpar-to-lsub",
        SimKind::LsubToLpar => "simulation lsub-to-lpar",
        SimKind::LdefIff => "simulation ldef-iff",
        SimKind::LesSim => "simulation les-sim",
    }
}

/// One-step source reductions `t → t'` where `t` is reached from a random
/// pure term by up to `walk` source steps.
pub fn simulation(p: Params, kind: SimKind, walk: usize, bounds: SimBounds) -> Summary {
    let cfg = GenConfig::pure(p.size);
    let rules = source_rules(kind);
    p.run(sim_name(kind), |rng| {
        let (t, t2) = (0..RETRIES).find_map(|_| {
            let mut t = gen::term(rng, &cfg);
            for _ in 0..rng.gen_range(0..=walk) {
                match pick(rng, &lsub::redexes(&t, rules)) {
                    Some(s) => t = s.after.clone(),
                    None => break,
                }
            }
            let s = pick(rng, &lsub::redexes(&t, rules))?.after.clone();
            Some((t, s))
        })?;
        let w = || format!("{t} → {t2}");
        Some(match calculi::simulate_check(kind, &t, &t2, bounds) {
            Ok(o) => Inst::new(o, 1, w),
            Err(e) => Inst::holds(false, || format!("{}: {e}", w())),
        })
    })
}

/// Exhaustive SN comparisons over all pure terms up to `max_size`:
/// PSN, λsub against λpar, λsub against λdef.
pub fn sn_transfers(max_size: usize, free: &[&str], state_bound: usize, mode: Mode) -> Vec<Summary> {
    let terms = gen::all_pure_terms(max_size, free);
    let profiles = par::map(mode, &terms, |t| calculi::sn_profile(t, state_bound));
    let decided = |v: Verdict| v != Verdict::BoundExceeded;
    let iff = |a: Verdict, b: Verdict, t: &Term| {
        Some(if decided(a) && decided(b) {
            Inst::holds(a == b, || format!("{t}: {a:?} vs {b:?}"))
        } else {
            Inst::new(Outcome::Inconclusive, 1, || t.to_string())
        })
    };
    let psn = terms.iter().zip(&profiles).map(|(t, p)| match (p.beta, p.lsub) {
        (Verdict::NotSN, _) => None,
        (Verdict::SN, Verdict::SN) => Some(Inst::holds(true, String::new)),
        (Verdict::SN, Verdict::NotSN) => Some(Inst::holds(false, || t.to_string())),
        _ => Some(Inst::new(Outcome::Inconclusive, 1, || t.to_string())),
    });
    vec![
        Summary::tally("psn", psn),
        Summary::tally("sn lsub-iff-lpar", terms.iter().zip(&profiles).map(|(t, p)| iff(p.lsub, p.lpar, t))),
        Summary::tally("sn lsub-iff-ldef", terms.iter().zip(&profiles).map(|(t, p)| iff(p.lsub, p.ldef, t))),
    ]
}

// Typing

/// A valid derivation built from a random term: a simple `add_Λ` typing on
/// even instances, an `add^i_λ` normal-form witness on odd ones.
pub fn random_derivation(rng: &mut Rng8, size: usize, intersection: bool) -> Option<typing::Derivation> {
    for _ in 0..RETRIES {
        if intersection {
            let t = gen::term(rng, &GenConfig::pure(size));
            let tr = lsub::reduce(&t, BETA, Strategy::LeftmostOutermost, 200);
            if tr.normal && tr.last().size() <= 4 * size {
                return typing::type_normal_form(tr.last()).ok();
            }
        } else {
            let t = gen::term(rng, &GenConfig::terms(size));
            if let Some(ty) = typing::infer_simple(&t, System::AddLm) {
                return Some(ty.derivation);
            }
        }
    }
    None
}

fn nodes(d: &typing::Derivation) -> Vec<&typing::Derivation> {
    let mut out = vec![d];
    let mut i = 0;
    while i < out.len() {
        out.extend(out[i].premises.iter());
        i += 1;
    }
    out
}

/// Every property of the typing module on one additive derivation; the
/// first failure is returned.
pub fn derivation_checks(d: &typing::Derivation) -> Result<usize, String> {
    let mut checks = 0;
    let mut ensure = |ok: bool, what: &str| {
        checks += 1;
        if ok {
            Ok(())
        } else {
            Err(format!("{what} for {}", d.judgement()))
        }
    };
    ensure(typing::is_valid(d), "invalid input")?;
    let m = typing::add_mul_transfer(d).map_err(|e| e.to_string())?;
    ensure(typing::is_valid(&m), "add→mul invalid")?;
    ensure(m.env.keys().all(|x| d.term.has_free(x)), "add→mul keeps a non-free name")?;
    let extra: Env = d.env.iter().filter(|(x, _)| !m.env.contains_key(*x)).map(|(x, t)| (x.clone(), t.clone())).collect();
    let back = typing::add_mul_transfer_with(&m, &extra).map_err(|e| e.to_string())?;
    ensure(typing::is_valid(&back) && back.same_conclusion(d), "mul→add not an involution")?;

    let names = d.term.all_names();
    let z = crate::syntax::fresh_name(&Name::new("w"), &names);
    let weak: Env = [(z, TypeExpr::base("W"))].into_iter().collect();
    let w = typing::weaken(d, &weak).map_err(|e| e.to_string())?;
    ensure(typing::is_valid(&w) && typing::add_mul_transfer(&w).is_ok_and(|w2| w2 == m), "weakening")?;

    for root in [d, &m] {
        for n in nodes(root) {
            if matches!(n.rule, TRule::InterI | TRule::InterE) {
                continue;
            }
            let r = typing::recompose(&typing::decompose(n));
            ensure(r.is_ok_and(|r| typing::is_valid(&r) && r.same_conclusion(n)), "generation round trip")?;
        }
    }

    let inter = d.in_system(System::new(true, true, d.system.closures()));
    ensure(typing::is_valid(&inter), "simple derivation is not intersection-valid")?;
    if let Some((x, b)) = inter.env.iter().next() {
        for c in [TypeExpr::inter(TypeExpr::base("W"), b.clone()), TypeExpr::inter(b.clone(), b.clone())] {
            let s = typing::strengthen(&inter, x, &c);
            ensure(s.is_ok_and(|s| typing::is_valid(&s) && s.env[x] == c && s.ty == inter.ty), "≪ stability")?;
        }
    }
    Ok(checks)
}

/// Generation round trips, add↔mul transfers, weakening and ≪ stability on
/// constructed derivations.
pub fn derivations(p: Params) -> Summary {
    let results = par::map_range(p.mode, p.count, |i| {
        let d = random_derivation(&mut instance_rng(p.seed, i), p.size, i % 2 == 1)?;
        Some(match derivation_checks(&d) {
            Ok(n) => Inst::new(Outcome::Holds, n, String::new),
            Err(e) => Inst::holds(false, || e),
        })
    });
    Summary::tally("typing derivations", results)
}

/// `ll_check` against the closure of the ≪ axioms on all types of depth at
/// most `depth` over two bases.
pub fn ll_bruteforce(depth: usize) -> Summary {
    let universe = typing::types_up_to_depth(&["A", "B"], depth);
    let rel = typing::ll_closure(&universe);
    let n = universe.len();
    Summary::tally(
        "ll brute force",
        (0..n * n).map(|k| {
            let (i, j) = (k / n, k % n);
            Some(Inst::holds(rel[i][j] == typing::ll_check(&universe[i], &universe[j]), || {
                format!("{} ≪ {}", universe[i], universe[j])
            }))
        }),
    )
}

/// Simple typability is kept by both λpar translations.
pub fn translation_typability(p: Params) -> Summary {
    let cfg = GenConfig::terms(p.size);
    p.run("typability under translations", |rng| {
        let t = gen::term(rng, &cfg);
        let typable = |t: &Term, sys| typing::infer_simple(t, sys).is_some();
        let lm = calculi::lmpar(&t).ok()?;
        let mut ok = typable(&t, System::AddLm) == typable(&lm, System::AddLambda);
        if t.is_pure() {
            let pl = calculi::parlm(&t).ok()?;
            ok &= typable(&t, System::AddLambda) == typable(&pl, System::AddLm);
        }
        Some(Inst::holds(ok, || t.to_string()))
    })
}
