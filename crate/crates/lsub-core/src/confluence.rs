//! Parallel reduction on sub-normal forms, the diamond property, projection
//! of λsub steps, confluence fuzzing and the critical-pair families of the
//! substitution rules.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::calculi::{ALC, ES};
use crate::gen::{self, instance_rng, GenConfig};
use crate::lsub::{
    self, c_equal, es_canonical, is_sub_normal, redexes, snf, step_modulo, Graph, Outcome,
    RuleId, Strategy, Trace, Verdict, LSUB, SUB,
};
use crate::par::{self, Mode};
use crate::syntax::{barendregt, canonicalize_alpha, chain_of, parse, Term};

pub const DEFAULT_FANOUT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfluenceError {
    #[error("{0} is not in sub-normal form")]
    NotSubNormal(Term),
    #[error("{1} is not one λsub step away from {0}")]
    NotOneStep(Term, Term),
}

/// The parallel reducts of a sub-normal form, E_s-canonical and sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reducts {
    pub terms: Vec<Term>,
    /// Some clause produced more than the fanout bound and was cut.
    pub truncated: bool,
}

impl Reducts {
    pub fn contains(&self, t: &Term) -> bool {
        self.terms.binary_search(&es_canonical(t)).is_ok()
    }
}

pub fn parallel_reducts(t: &Term, fanout: usize) -> Result<Reducts, ConfluenceError> {
    if !is_sub_normal(t) {
        return Err(ConfluenceError::NotSubNormal(t.clone()));
    }
    let mut truncated = false;
    let set = pr(&barendregt(t), fanout, &mut truncated);
    let terms: BTreeSet<Term> = set.iter().map(es_canonical).collect();
    Ok(Reducts { terms: terms.into_iter().collect(), truncated })
}

fn cap(mut v: Vec<Term>, fanout: usize, truncated: &mut bool) -> Vec<Term> {
    v.sort();
    v.dedup();
    if v.len() > fanout {
        v.truncate(fanout);
        *truncated = true;
    }
    v
}

fn pr(t: &Term, fanout: usize, truncated: &mut bool) -> Vec<Term> {
    match t {
        Term::Var(_) | Term::Meta(..) => vec![t.clone()],
        Term::Abs(x, b) => pr(b, fanout, truncated)
            .into_iter()
            .map(|b2| Term::Abs(x.clone(), Arc::new(b2)))
            .collect(),
        Term::App(f, u) => {
            let fs = pr(f, fanout, truncated);
            let us = pr(u, fanout, truncated);
            let mut out = Vec::new();
            for f2 in &fs {
                for u2 in &us {
                    out.push(Term::app(f2.clone(), u2.clone()));
                }
            }
            if let Term::Abs(x, b) = &**f {
                let bs = pr(b, fanout, truncated);
                for b2 in &bs {
                    for u2 in &us {
                        out.push(snf(&Term::Closure(Arc::new(b2.clone()), x.clone(), Arc::new(u2.clone()))));
                    }
                }
            }
            cap(out, fanout, truncated)
        }
        Term::Closure(..) => {
            let (items, base) = chain_of(t);
            let mut acc = vec![base.clone()];
            for (x, u) in items.iter().rev() {
                let us = pr(u, fanout, truncated);
                let mut next = Vec::new();
                for b in &acc {
                    for u2 in &us {
                        next.push(Term::Closure(Arc::new(b.clone()), x.clone(), Arc::new(u2.clone())));
                    }
                }
                acc = cap(next, fanout, truncated);
            }
            acc
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Diamond {
    Holds,
    /// Two parallel reducts with no common parallel reduct.
    Fails(Term, Term),
    Inconclusive,
}

/// Every two parallel reducts of `t` have a common parallel reduct.
pub fn diamond_check(t: &Term, fanout: usize) -> Result<Diamond, ConfluenceError> {
    let top = parallel_reducts(t, fanout)?;
    let mut truncated = top.truncated;
    let mut next = Vec::with_capacity(top.terms.len());
    for r in &top.terms {
        let rr = parallel_reducts(r, fanout).expect("parallel reducts are sub-normal");
        truncated |= rr.truncated;
        next.push(rr.terms);
    }
    for i in 0..next.len() {
        for j in i + 1..next.len() {
            if !sorted_intersect(&next[i], &next[j]) {
                if truncated {
                    return Ok(Diamond::Inconclusive);
                }
                return Ok(Diamond::Fails(top.terms[i].clone(), top.terms[j].clone()));
            }
        }
    }
    Ok(Diamond::Holds)
}

fn sorted_intersect(a: &[Term], b: &[Term]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// For a step `t →λsub t'`: `sub(t) ⫴ sub(t')`, or `sub(t) =E_s sub(t')`.
pub fn project_and_check(t: &Term, t2: &Term, fanout: usize) -> Result<Outcome, ConfluenceError> {
    let target = es_canonical(t2);
    if !step_modulo(t, LSUB).contains(&target) {
        return Err(ConfluenceError::NotOneStep(t.clone(), t2.clone()));
    }
    let (a, b) = (snf(t), snf(t2));
    if a == b {
        return Ok(Outcome::Holds);
    }
    let rs = parallel_reducts(&a, fanout).expect("snf is sub-normal");
    Ok(if rs.contains(&b) {
        Outcome::Holds
    } else if rs.truncated {
        Outcome::Inconclusive
    } else {
        Outcome::Fails
    })
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub seed: u64,
    pub count: usize,
    pub size: usize,
    pub metaterms: bool,
    pub state_bound: usize,
    pub mode: Mode,
}

impl FuzzConfig {
    pub fn new(seed: u64, count: usize, size: usize) -> FuzzConfig {
        FuzzConfig { seed, count, size, metaterms: true, state_bound: 2000, mode: Mode::default() }
    }

    fn gen(&self) -> GenConfig {
        if self.metaterms {
            GenConfig::metaterms(self.size)
        } else {
            GenConfig::terms(self.size)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FuzzFailure {
    pub index: usize,
    pub term: Term,
    pub left: Vec<String>,
    pub right: Vec<String>,
    /// Number of normal forms in the reduction graph.
    pub normal_forms: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FuzzReport {
    pub instances: usize,
    pub checked: usize,
    pub not_sn: usize,
    pub bound_exceeded: usize,
    pub failures: Vec<FuzzFailure>,
}

enum Instance {
    Checked(Option<FuzzFailure>),
    NotSn,
    Bound,
}

fn trace_lines(tr: &Trace) -> Vec<String> {
    tr.steps.iter().map(|s| s.to_string()).collect()
}

/// Random SN instances reduced by two independent random strategies must
/// reach E_s-equal normal forms, and their graphs must have one normal form.
pub fn confluence_fuzz(cfg: &FuzzConfig) -> FuzzReport {
    let gcfg = cfg.gen();
    let results = par::map_range(cfg.mode, cfg.count, |i| {
        let mut rng = instance_rng(cfg.seed, i);
        let t = gen::term(&mut rng, &gcfg);
        fuzz_one(i, &t, rng.gen(), rng.gen(), cfg.state_bound)
    });
    let mut rep = FuzzReport { instances: cfg.count, ..FuzzReport::default() };
    for r in results {
        match r {
            Instance::Checked(f) => {
                rep.checked += 1;
                rep.failures.extend(f);
            }
            Instance::NotSn => rep.not_sn += 1,
            Instance::Bound => rep.bound_exceeded += 1,
        }
    }
    rep
}

fn fuzz_one(index: usize, t: &Term, s1: u64, s2: u64, state_bound: usize) -> Instance {
    let g = Graph::explore_with(t, LSUB, state_bound, usize::MAX, Mode::Sequential);
    let report = g.report();
    match report.verdict {
        Verdict::NotSN => return Instance::NotSn,
        Verdict::BoundExceeded => return Instance::Bound,
        Verdict::SN => {}
    }
    let limit = report.max_length.unwrap_or(0) + 1;
    let a = lsub::reduce(t, LSUB, Strategy::Random(s1), limit);
    let b = lsub::reduce(t, LSUB, Strategy::Random(s2), limit);
    let nfs = g.normal_forms().len();
    if a.normal && b.normal && c_equal(a.last(), b.last()) && nfs == 1 {
        return Instance::Checked(None);
    }
    Instance::Checked(Some(FuzzFailure {
        index,
        term: t.clone(),
        left: trace_lines(&a),
        right: trace_lines(&b),
        normal_forms: nfs,
    }))
}

// ---------------------------------------------------------------------------
// Critical pairs

#[derive(Clone, Copy, Debug)]
pub enum Side {
    /// The unique contraction of a rule at a position.
    Rule(RuleId, &'static [u8]),
    /// The contraction of a rule at a position that is α-equal to a term.
    RuleTo(RuleId, &'static [u8], &'static str),
    /// Swapping the two substitutions of the closure at a position.
    Swap(&'static [u8]),
}

#[derive(Clone, Debug)]
pub struct Family {
    pub name: &'static str,
    pub peak: &'static str,
    pub left: Side,
    pub right: Side,
    pub closing: &'static [RuleId],
    /// A term both sides are expected to reach.
    pub join: Option<&'static str>,
}

const fn fam(
    name: &'static str,
    peak: &'static str,
    left: Side,
    right: Side,
    closing: &'static [RuleId],
) -> Family {
    Family { name, peak, left, right, closing, join: None }
}

const fn fam_join(
    name: &'static str,
    peak: &'static str,
    left: Side,
    right: Side,
    closing: &'static [RuleId],
    join: &'static str,
) -> Family {
    Family { name, peak, left, right, closing, join: Some(join) }
}

const ROOT: &[u8] = &[];
const IN: &[u8] = &[0];

use RuleId::*;
use Side::{Rule, RuleTo, Swap};

pub fn lsub_families() -> Vec<Family> {
    vec![
        fam_join("Gc/R", "y[z/x][x/u]", Rule(Gc, IN), RuleTo(R, ROOT, "y[z/u][x/u]"), SUB, "y[x/u]"),
        fam("R/R", "(x x)[x/u]", RuleTo(R, ROOT, "(u x)[x/u]"), RuleTo(R, ROOT, "(x u)[x/u]"), SUB),
        fam("R/Gc", "x[z/w][x/u]", RuleTo(R, ROOT, "u[z/w][x/u]"), Rule(Gc, IN), SUB),
        fam(
            "RX/RX",
            "(f ?X{x} ?Y{x})[x/u]",
            RuleTo(RX, ROOT, "(f ?X{x}[x/u] ?Y{x})[x/u]"),
            RuleTo(RX, ROOT, "(f ?X{x} ?Y{x}[x/u])[x/u]"),
            SUB,
        ),
        fam("R/RX", "(x ?X{x})[x/u]", RuleTo(R, ROOT, "(u ?X{x})[x/u]"), Rule(RX, ROOT), SUB),
        fam("RX/Gc", "y[z/?X{x}][x/u]", Rule(RX, ROOT), Rule(Gc, IN), SUB),
        fam_join("R/R nested", "x[y/x][x/u]", RuleTo(R, ROOT, "x[y/u][x/u]"), Rule(Gc, IN), SUB, "u[x/u]"),
        fam("Gc/C", "y[x/a][z/b]", Rule(Gc, IN), Swap(ROOT), SUB),
        fam("Gc outer/C", "(x y)[x/a][z/b]", Rule(Gc, ROOT), Swap(ROOT), SUB),
        fam("R/C", "(x z)[x/a][z/b]", RuleTo(R, IN, "(a z)[x/a][z/b]"), Swap(ROOT), SUB),
        fam("R outer/C", "(x z)[x/a][z/b]", RuleTo(R, ROOT, "(x b)[x/a][z/b]"), Swap(ROOT), SUB),
        fam("RX/C", "(f ?X{x})[x/a][z/b]", Rule(RX, IN), Swap(ROOT), SUB),
        fam("RX outer/C", "(f ?X{x,z})[x/a][z/b]", Rule(RX, ROOT), Swap(ROOT), SUB),
    ]
}

pub fn les_families() -> Vec<Family> {
    vec![
        fam("Comp2/App1", "(x x)[x/y][y/b]", Rule(Comp2, ROOT), Rule(App1, IN), ALC),
        fam("Comp2/App2", "(a x)[x/y][y/b]", Rule(Comp2, ROOT), Rule(App2, IN), ALC),
        fam("Comp2/App3", "(x a)[x/y][y/b]", Rule(Comp2, ROOT), Rule(App3, IN), ALC),
        fam("Comp2/Lamb", "(\\z. x z)[x/y][y/b]", Rule(Comp2, ROOT), Rule(Lamb, IN), ALC),
        fam("Comp1/App1 both", "((x y) (x y))[x/y][y/b]", Rule(Comp1, ROOT), Rule(App1, IN), ALC),
        fam("Comp1/App1 right", "(x (x y))[x/y][y/b]", Rule(Comp1, ROOT), Rule(App1, IN), ALC),
        fam("Comp1/App1 left", "((x y) x)[x/y][y/b]", Rule(Comp1, ROOT), Rule(App1, IN), ALC),
        fam("Comp1/App2 both", "(y (x y))[x/y][y/b]", Rule(Comp1, ROOT), Rule(App2, IN), ALC),
        fam("Comp1/App2 right", "(a (x y))[x/y][y/b]", Rule(Comp1, ROOT), Rule(App2, IN), ALC),
        fam("Comp1/App2 left", "(y x)[x/y][y/b]", Rule(Comp1, ROOT), Rule(App2, IN), ALC),
        fam("Comp1/App3 both", "((x y) y)[x/y][y/b]", Rule(Comp1, ROOT), Rule(App3, IN), ALC),
        fam("Comp1/App3 left", "((x y) a)[x/y][y/b]", Rule(Comp1, ROOT), Rule(App3, IN), ALC),
        fam("Comp1/App3 right", "(x y)[x/y][y/b]", Rule(Comp1, ROOT), Rule(App3, IN), ALC),
        fam("Comp1/Lamb", "(\\z. x y)[x/y][y/b]", Rule(Comp1, ROOT), Rule(Lamb, IN), ALC),
        fam("Comp2/Comp2", "x[x/y][y/z][z/c]", Rule(Comp2, ROOT), Rule(Comp2, IN), ALC),
        fam("Comp1/Comp2 tu", "(x z)[x/y z][y/z][z/c]", Rule(Comp1, ROOT), Rule(Comp2, IN), ALC),
        fam("Comp1/Comp2 u", "x[x/y z][y/z][z/c]", Rule(Comp1, ROOT), Rule(Comp2, IN), ALC),
        fam("Comp1/Comp2 t", "(x z)[x/y][y/z][z/c]", Rule(Comp1, ROOT), Rule(Comp2, IN), ALC),
        fam("Comp2/Comp1", "(x y)[x/y][y/z][z/c]", Rule(Comp2, ROOT), Rule(Comp1, IN), ALC),
        fam("Comp1/Comp1 u", "(x y)[x/y z][y/z][z/c]", Rule(Comp1, ROOT), Rule(Comp1, IN), ALC),
        fam("Comp1/Comp1 t", "(x y z)[x/y][y/z][z/c]", Rule(Comp1, ROOT), Rule(Comp1, IN), ALC),
        fam("App1/C both", "((x y) (x y))[x/a][y/b]", Rule(App1, IN), Swap(ROOT), ALC),
        fam("App1/C right", "(x (x y))[x/a][y/b]", Rule(App1, IN), Swap(ROOT), ALC),
        fam("App1/C left", "((x y) x)[x/a][y/b]", Rule(App1, IN), Swap(ROOT), ALC),
        fam("App1/C none", "(x x)[x/a][y/b]", Rule(App1, IN), Swap(ROOT), ES),
        fam("App2/C both", "(y (x y))[x/a][y/b]", Rule(App2, IN), Swap(ROOT), ALC),
        fam("App2/C right", "(c (x y))[x/a][y/b]", Rule(App2, IN), Swap(ROOT), ALC),
        fam("App2/C left", "(y x)[x/a][y/b]", Rule(App2, IN), Swap(ROOT), ALC),
        fam("App2/C none", "(c x)[x/a][y/b]", Rule(App2, IN), Swap(ROOT), ES),
        fam("App3/C both", "((x y) y)[x/a][y/b]", Rule(App3, IN), Swap(ROOT), ALC),
        fam("App3/C right", "(x y)[x/a][y/b]", Rule(App3, IN), Swap(ROOT), ALC),
        fam("App3/C left", "((x y) c)[x/a][y/b]", Rule(App3, IN), Swap(ROOT), ALC),
        fam("App3/C none", "(x c)[x/a][y/b]", Rule(App3, IN), Swap(ROOT), ES),
        fam("Lamb/C", "(\\z. x y)[x/a][y/b]", Rule(Lamb, IN), Swap(ROOT), ALC),
        fam("Comp2/C outer tu", "(x z)[x/y z][y/a][z/c]", Rule(Comp2, IN), Swap(ROOT), ALC),
        fam("Comp2/C outer u", "x[x/y z][y/a][z/c]", Rule(Comp2, IN), Swap(ROOT), ALC),
        fam("Comp2/C outer t", "(x z)[x/y][y/a][z/c]", Rule(Comp2, IN), Swap(ROOT), ALC),
        fam("Comp1/C outer tu", "(x y z)[x/y z][y/a][z/c]", Rule(Comp1, IN), Swap(ROOT), ALC),
        fam("Comp1/C outer u", "(x y)[x/y z][y/a][z/c]", Rule(Comp1, IN), Swap(ROOT), ALC),
        fam("Comp1/C outer t", "(x y z)[x/y][y/a][z/c]", Rule(Comp1, IN), Swap(ROOT), ALC),
        fam("Comp2/C inner", "(x y)[x/a][y/z][z/c]", Rule(Comp2, ROOT), Swap(IN), ALC),
        fam("Comp1/C inner tu", "(x y z)[x/z][y/z][z/c]", Rule(Comp1, ROOT), Swap(IN), ALC),
        fam("Comp1/C inner u", "(x y)[x/z][y/z][z/c]", Rule(Comp1, ROOT), Swap(IN), ALC),
        fam("Comp1/C inner t", "(x y z)[x/a][y/z][z/c]", Rule(Comp1, ROOT), Swap(IN), ALC),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub name: &'static str,
    pub peak: Term,
    /// `None` when a side could not be formed from the peak.
    pub left: Option<Term>,
    pub right: Option<Term>,
    /// Common reduct modulo E_s, if any.
    pub join: Option<Term>,
    /// Joinable by plain rewriting, comparing modulo E_s only at the end.
    pub joins_plain: bool,
    /// The expected join, when given, is reached from both sides.
    pub expected_join: Option<bool>,
    pub complete: bool,
}

impl PairReport {
    pub fn passed(&self) -> bool {
        self.join.is_some() && self.joins_plain && self.expected_join != Some(false)
    }
}

fn apply_side(peak: &Term, side: Side) -> Option<Term> {
    match side {
        Rule(rule, pos) => {
            let sub = peak.subterm(pos)?;
            let rs = lsub::contract(sub, rule);
            match rs.as_slice() {
                [(_, r)] => Some(peak.replace_at(pos, r.clone())),
                _ => None,
            }
        }
        RuleTo(rule, pos, expected) => {
            let expected = parse(expected).ok()?;
            let sub = peak.subterm(pos)?;
            lsub::contract(sub, rule)
                .into_iter()
                .map(|(_, r)| peak.replace_at(pos, r))
                .find(|r| crate::syntax::alpha_eq(r, &expected))
        }
        Swap(pos) => {
            let Term::Closure(inner, y, v) = peak.subterm(pos)? else { return None };
            let Term::Closure(b, x, u) = &**inner else { return None };
            if u.has_free(y) || v.has_free(x) || x == y {
                return None;
            }
            let swapped = Term::Closure(
                Arc::new(Term::Closure(b.clone(), y.clone(), v.clone())),
                x.clone(),
                u.clone(),
            );
            Some(peak.replace_at(pos, swapped))
        }
    }
}

const REACH_BOUND: usize = 5000;

/// Terms reachable by plain rewriting (no reordering of substitutions),
/// as E_s-canonical terms.
fn plain_reach(t: &Term, rules: &[RuleId]) -> (BTreeSet<Term>, bool) {
    let start = canonicalize_alpha(t);
    let mut seen: HashSet<Term> = HashSet::from([start.clone()]);
    let mut stack = vec![start];
    let mut complete = true;
    while let Some(cur) = stack.pop() {
        for s in redexes(&cur, rules) {
            if seen.len() >= REACH_BOUND {
                complete = false;
                break;
            }
            let n = canonicalize_alpha(&s.after);
            if seen.insert(n.clone()) {
                stack.push(n);
            }
        }
    }
    (seen.iter().map(es_canonical).collect(), complete)
}

pub fn check_family(f: &Family) -> PairReport {
    let peak = parse(f.peak).expect("family peak parses");
    let left = apply_side(&peak, f.left);
    let right = apply_side(&peak, f.right);
    let mut rep = PairReport {
        name: f.name,
        peak: peak.clone(),
        left: left.clone(),
        right: right.clone(),
        join: None,
        joins_plain: false,
        expected_join: None,
        complete: true,
    };
    let (Some(l), Some(r)) = (left, right) else { return rep };
    let gl = Graph::explore_with(&l, f.closing, REACH_BOUND, usize::MAX, Mode::Sequential);
    let gr = Graph::explore_with(&r, f.closing, REACH_BOUND, usize::MAX, Mode::Sequential);
    rep.complete = gl.complete && gr.complete;
    let rset: HashSet<&Term> = gr.states.iter().collect();
    rep.join = gl.states.iter().find(|s| rset.contains(s)).cloned();
    if let Some(j) = f.join {
        let j = es_canonical(&parse(j).expect("family join parses"));
        rep.expected_join = Some(gl.states.contains(&j) && rset.contains(&j));
    }
    let (pl, cl) = plain_reach(&l, f.closing);
    let (pr, cr) = plain_reach(&r, f.closing);
    rep.complete &= cl && cr;
    rep.joins_plain = !pl.is_disjoint(&pr);
    rep
}

pub fn critical_pairs_check() -> Vec<PairReport> {
    lsub_families().iter().chain(les_families().iter()).map(check_family).collect()
}
