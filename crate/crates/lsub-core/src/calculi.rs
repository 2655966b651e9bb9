//! Sister calculi (λpar, λdef, λes and its ALC fragment) and the
//! translations relating them to λsub.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::lsub::{self, es_canonical, redexes, step_modulo, Outcome, RuleId, Strategy, Trace, Verdict};
use crate::syntax::{alpha_eq, Name, Term};

use RuleId::*;

pub const LPAR: &[RuleId] = &[BGc, BetaP];
pub const LDEF: &[RuleId] = &[Gc, R, B, Beta];
pub const LES: &[RuleId] = &[Gc, Var, App1, App2, App3, Lamb, Comp1, Comp2, B];
pub const ES: &[RuleId] = &[Gc, Var, App1, App2, App3, Lamb, Comp1, Comp2];
pub const ALC: &[RuleId] = &[App1, App2, App3, Lamb, Comp1, Comp2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CalculusId {
    LSub,
    Sub,
    LPar,
    LDef,
    LEs,
    Es,
    Alc,
}

impl CalculusId {
    pub fn rules(self) -> &'static [RuleId] {
        match self {
            CalculusId::LSub => lsub::LSUB,
            CalculusId::Sub => lsub::SUB,
            CalculusId::LPar => LPAR,
            CalculusId::LDef => LDEF,
            CalculusId::LEs => LES,
            CalculusId::Es => ES,
            CalculusId::Alc => ALC,
        }
    }

    pub fn check_syntax(self, t: &Term) -> Result<(), CalculusError> {
        match self {
            CalculusId::LSub | CalculusId::Sub => Ok(()),
            CalculusId::LPar if !t.is_pure() => Err(CalculusError::NotPure(self, t.clone())),
            _ if t.has_meta() => Err(CalculusError::Metavariable(self, t.clone())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for CalculusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CalculusId::LSub => "lsub",
            CalculusId::Sub => "sub",
            CalculusId::LPar => "lpar",
            CalculusId::LDef => "ldef",
            CalculusId::LEs => "les",
            CalculusId::Es => "es",
            CalculusId::Alc => "alc",
        };
        f.write_str(s)
    }
}

impl FromStr for CalculusId {
    type Err = String;

    fn from_str(s: &str) -> Result<CalculusId, String> {
        Ok(match s {
            "lsub" => CalculusId::LSub,
            "sub" => CalculusId::Sub,
            "lpar" => CalculusId::LPar,
            "ldef" => CalculusId::LDef,
            "les" => CalculusId::LEs,
            "es" => CalculusId::Es,
            "alc" => CalculusId::Alc,
            _ => return Err(format!("unknown calculus `{s}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalculusError {
    #[error("{0} works on pure λ-terms, got {1}")]
    NotPure(CalculusId, Term),
    #[error("{0} does not accept metavariables, got {1}")]
    Metavariable(CalculusId, Term),
    #[error("{0} is not one {1} step away from {2}")]
    NotOneStep(Term, &'static str, Term),
}

pub fn reduce(
    calculus: CalculusId,
    t: &Term,
    strategy: Strategy,
    max_steps: usize,
) -> Result<Trace, CalculusError> {
    calculus.check_syntax(t)?;
    Ok(lsub::reduce(t, calculus.rules(), strategy, max_steps))
}

/// ALC-normal form keeping the input's names where possible.
fn alc_nf(t: &Term) -> Term {
    lsub::reduce(t, ALC, Strategy::LeftmostOutermost, usize::MAX).last().clone()
}

/// The ALC-normal form, as an E_s-canonical term.
pub fn alc_normalize(t: &Term) -> Result<Term, CalculusError> {
    CalculusId::Alc.check_syntax(t)?;
    Ok(es_canonical(&alc_nf(t)))
}

pub fn is_alc_normal(t: &Term) -> bool {
    lsub::steps_modulo(t, ALC).is_empty()
}

/// Translation of Λ-terms into ALC-normal λes-terms. Idle substitutions bind
/// the marked names `#g0, #g1, …`, allocated left to right.
pub fn tra(t: &Term) -> Result<Term, CalculusError> {
    CalculusId::LEs.check_syntax(t)?;
    let mut fresh = Fresh { next: 0, avoid: t.all_names() };
    Ok(tra_rec(t, &mut fresh))
}

struct Fresh {
    next: usize,
    avoid: BTreeSet<Name>,
}

impl Fresh {
    fn name(&mut self) -> Name {
        loop {
            let n = Name::new(&format!("#g{}", self.next));
            self.next += 1;
            if !self.avoid.contains(&n) {
                return n;
            }
        }
    }
}

fn clo(b: Term, x: Name, u: Term) -> Term {
    Term::Closure(Arc::new(b), x, Arc::new(u))
}

fn tra_rec(t: &Term, fresh: &mut Fresh) -> Term {
    match t {
        Term::Var(_) | Term::Meta(..) => t.clone(),
        Term::Abs(x, b) => Term::Abs(x.clone(), Arc::new(tra_rec(b, fresh))),
        Term::App(a, b) => {
            let ta = tra_rec(a, fresh);
            let tb = tra_rec(b, fresh);
            let g = fresh.name();
            clo(Term::app(ta, tb.clone()), g, tb)
        }
        Term::Closure(b, y, u) => {
            let tb = tra_rec(b, fresh);
            let tu = tra_rec(u, fresh);
            let inner = clo(tb, y.clone(), tu.clone());
            if b.has_free(y) {
                let g = fresh.name();
                alc_nf(&clo(inner, g, tu))
            } else {
                alc_nf(&inner)
            }
        }
    }
}

/// λ-terms to Λ-terms: β-redexes become closures.
pub fn parlm(t: &Term) -> Result<Term, CalculusError> {
    CalculusId::LPar.check_syntax(t)?;
    Ok(parlm_rec(t))
}

fn parlm_rec(t: &Term) -> Term {
    match t {
        Term::App(f, u) => match &**f {
            Term::Abs(x, v) => clo(parlm_rec(v), x.clone(), parlm_rec(u)),
            _ => Term::App(Arc::new(parlm_rec(f)), Arc::new(parlm_rec(u))),
        },
        Term::Abs(x, b) => Term::Abs(x.clone(), Arc::new(parlm_rec(b))),
        _ => t.clone(),
    }
}

/// Λ-terms to λ-terms: closures become β-redexes.
pub fn lmpar(t: &Term) -> Result<Term, CalculusError> {
    CalculusId::LDef.check_syntax(t)?;
    Ok(lmpar_rec(t))
}

fn lmpar_rec(t: &Term) -> Term {
    match t {
        Term::Closure(b, x, u) => {
            Term::app(Term::Abs(x.clone(), Arc::new(lmpar_rec(b))), lmpar_rec(u))
        }
        Term::App(a, b) => Term::app(lmpar_rec(a), lmpar_rec(b)),
        Term::Abs(x, b) => Term::Abs(x.clone(), Arc::new(lmpar_rec(b))),
        _ => t.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SimKind {
    /// `t →λpar t'` gives `parlm(t) →+λsub parlm(t')`.
    LparToLsub,
    /// `t →B t'` gives `lmpar(t) = lmpar(t')`; `t →sub t'` gives `lmpar(t) →+λpar lmpar(t')`.
    LsubToLpar,
    /// `t →λdef t'` gives `t →+λsub t'` and `t →λsub t'` gives `t →+λdef t'`.
    LdefIff,
    /// `t →λsub t'` gives `tra(t) →+λes tra(t')`.
    LesSim,
}

impl FromStr for SimKind {
    type Err = String;

    fn from_str(s: &str) -> Result<SimKind, String> {
        Ok(match s {
            "lpar_to_lsub" | "lpar-to-lsub" => SimKind::LparToLsub,
            "lsub_to_lpar" | "lsub-to-lpar" => SimKind::LsubToLpar,
            "ldef_iff" | "ldef-iff" => SimKind::LdefIff,
            "les_sim" | "les-sim" => SimKind::LesSim,
            _ => return Err(format!("unknown simulation `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimBounds {
    pub max_steps: usize,
    pub max_states: usize,
}

impl Default for SimBounds {
    fn default() -> SimBounds {
        SimBounds { max_steps: 64, max_states: 20_000 }
    }
}

/// Whether `to` is reachable from `from` in one or more steps modulo E_s.
pub fn reaches_plus(from: &Term, to: &Term, rules: &[RuleId], bounds: SimBounds) -> Outcome {
    let goal = es_canonical(to);
    let mut seen: HashSet<Term> = HashSet::new();
    let mut frontier = vec![es_canonical(from)];
    let mut truncated = false;
    for _ in 0..bounds.max_steps {
        let mut next = Vec::new();
        for t in &frontier {
            for s in step_modulo(t, rules) {
                if s == goal {
                    return Outcome::Holds;
                }
                if seen.len() >= bounds.max_states {
                    truncated = true;
                    continue;
                }
                if seen.insert(s.clone()) {
                    next.push(s);
                }
            }
        }
        if next.is_empty() {
            return if truncated { Outcome::Inconclusive } else { Outcome::Fails };
        }
        frontier = next;
    }
    Outcome::Inconclusive
}

/// The rule of a raw step `t → t'` among `rules`, if any.
pub fn step_rule(t: &Term, t2: &Term, rules: &[RuleId]) -> Option<RuleId> {
    redexes(t, rules).into_iter().find(|s| alpha_eq(&s.after, t2)).map(|s| s.rule)
}

pub fn simulate_check(
    kind: SimKind,
    t: &Term,
    t2: &Term,
    bounds: SimBounds,
) -> Result<Outcome, CalculusError> {
    let not_step = |calc| CalculusError::NotOneStep(t2.clone(), calc, t.clone());
    match kind {
        SimKind::LparToLsub => {
            step_rule(t, t2, LPAR).ok_or_else(|| not_step("λpar"))?;
            Ok(reaches_plus(&parlm(t)?, &parlm(t2)?, lsub::LSUB, bounds))
        }
        SimKind::LsubToLpar => {
            let rule = step_rule(t, t2, lsub::LSUB).ok_or_else(|| not_step("λsub"))?;
            let (a, b) = (lmpar(t)?, lmpar(t2)?);
            if rule == B {
                Ok(if alpha_eq(&a, &b) { Outcome::Holds } else { Outcome::Fails })
            } else {
                Ok(reaches_plus(&a, &b, LPAR, bounds))
            }
        }
        SimKind::LdefIff => {
            CalculusId::LDef.check_syntax(t)?;
            let rule = step_rule(t, t2, LDEF).ok_or_else(|| not_step("λdef"))?;
            let to_lsub = reaches_plus(t, t2, lsub::LSUB, bounds);
            if rule == Beta {
                Ok(to_lsub)
            } else {
                Ok(to_lsub.and(reaches_plus(t, t2, LDEF, bounds)))
            }
        }
        SimKind::LesSim => {
            step_rule(t, t2, lsub::LSUB).ok_or_else(|| not_step("λsub"))?;
            Ok(reaches_plus(&tra(t)?, &tra(t2)?, LES, bounds))
        }
    }
}

/// SN verdicts of one λ-term in the four calculi compared by the transfer
/// results.
#[derive(Clone, Debug, Serialize)]
pub struct SnProfile {
    pub beta: Verdict,
    pub lsub: Verdict,
    pub lpar: Verdict,
    pub ldef: Verdict,
}

pub fn sn_profile(t: &Term, state_bound: usize) -> SnProfile {
    let v = |rules: &[RuleId]| lsub::explore_sn(t, rules, state_bound, usize::MAX).verdict;
    SnProfile { beta: v(lsub::BETA), lsub: v(lsub::LSUB), lpar: v(LPAR), ldef: v(LDEF) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn p(s: &str) -> Term {
        parse(s).unwrap()
    }

    #[test]
    fn lpar_steps() {
        let t = p("(\\x. x y) z");
        let s = redexes(&t, LPAR);
        assert_eq!(s.len(), 1);
        assert!(alpha_eq(&s[0].after, &p("(\\x. z y) z")));
        let s = redexes(&s[0].after, LPAR);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].rule, BGc);
        assert_eq!(s[0].after, p("z y"));
    }

    #[test]
    fn alc_examples() {
        let t = p("(x y)[z/w]");
        assert_eq!(alc_normalize(&t).unwrap(), es_canonical(&t));
        assert!(alpha_eq(&alc_normalize(&p("(x z)[z/w]")).unwrap(), &p("x z[z/w]")));
        assert!(alpha_eq(&alc_normalize(&p("(\\y. y x)[x/v]")).unwrap(), &p("\\y. y x[x/v]")));
        assert!(alc_normalize(&p("?X{x}")).is_err());
        let s = redexes(&p("(t u)[x/v]"), &[App3]);
        assert!(s.is_empty());
        let s = redexes(&p("(x u)[x/v]"), &[App3]);
        assert_eq!(s[0].after, p("x[x/v] u"));
    }

    #[test]
    fn translations() {
        assert_eq!(tra(&p("x")).unwrap(), p("x"));
        assert_eq!(tra(&p("f a")).unwrap(), p("(f a)[#g0/a]"));
        let t = tra(&p("z[y/a]")).unwrap();
        assert!(alpha_eq(&t, &p("z[y/a]")));
        assert_eq!(parlm(&p("(\\x.v) u")).unwrap(), p("v[x/u]"));
        assert_eq!(parlm(&p("x y")).unwrap(), p("x y"));
        assert_eq!(parlm(&p("\\x. (\\y.y) z")).unwrap(), p("\\x. y[y/z]"));
        assert_eq!(lmpar(&p("t[x/u]")).unwrap(), p("(\\x. t) u"));
        assert!(parlm(&p("x[y/z]")).is_err());
    }

    #[test]
    fn simulation_examples() {
        let b = SimBounds::default();
        let t = p("(\\x. x) y");
        let t2 = p("x[x/y]");
        assert_eq!(simulate_check(SimKind::LsubToLpar, &t, &t2, b), Ok(Outcome::Holds));
        assert_eq!(simulate_check(SimKind::LesSim, &t, &t2, b), Ok(Outcome::Holds));
        let beta = p("(\\x. x x) y");
        assert_eq!(simulate_check(SimKind::LdefIff, &beta, &p("y y"), b), Ok(Outcome::Holds));
        assert!(simulate_check(SimKind::LdefIff, &beta, &p("y"), b).is_err());
    }
}
