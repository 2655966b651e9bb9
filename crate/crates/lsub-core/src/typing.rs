//! Simple and intersection type systems, the ≪ preorder, explicit typing
//! derivations and the strong-normalisation correspondence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::campaign::{Inst, Summary};
use crate::gen::{self, GenConfig};
use crate::lsub::{self, Outcome, Strategy, Verdict, BETA, LSUB};
use crate::par::{self, Mode};
use crate::syntax::{barendregt, parse, Name, Term};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeExpr {
    Base(Name),
    Arrow(Arc<TypeExpr>, Arc<TypeExpr>),
    Inter(Arc<TypeExpr>, Arc<TypeExpr>),
}

impl TypeExpr {
    pub fn base(a: &str) -> TypeExpr {
        TypeExpr::Base(Name::new(a))
    }

    pub fn arrow(a: TypeExpr, b: TypeExpr) -> TypeExpr {
        TypeExpr::Arrow(Arc::new(a), Arc::new(b))
    }

    pub fn inter(a: TypeExpr, b: TypeExpr) -> TypeExpr {
        TypeExpr::Inter(Arc::new(a), Arc::new(b))
    }

    /// Nesting depth; base types have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            TypeExpr::Base(_) => 1,
            TypeExpr::Arrow(a, b) | TypeExpr::Inter(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// The non-intersection conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&TypeExpr> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a TypeExpr, out: &mut Vec<&'a TypeExpr>) {
            match t {
                TypeExpr::Inter(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                _ => out.push(t),
            }
        }
        go(self, &mut out);
        out
    }

    fn sexpr(&self) -> String {
        match self {
            TypeExpr::Base(a) => a.to_string(),
            TypeExpr::Arrow(a, b) => format!("(-> {} {})", a.sexpr(), b.sexpr()),
            TypeExpr::Inter(a, b) => format!("(& {} {})", a.sexpr(), b.sexpr()),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // prec 0: top, 1: left of an arrow or operand of ∩, 2: left operand of ∩
        match self {
            TypeExpr::Base(a) => write!(f, "{a}"),
            TypeExpr::Arrow(a, b) => {
                if prec > 0 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 1)?;
                write!(f, " -> ")?;
                b.fmt_prec(f, 0)?;
                if prec > 0 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::Inter(a, b) => {
                if prec > 1 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 2)?;
                write!(f, " & ")?;
                b.fmt_prec(f, 1)?;
                if prec > 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Debug for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for TypeExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub type Env = BTreeMap<Name, TypeExpr>;

/// `Γ ⊎ Δ`.
pub fn env_union(a: &Env, b: &Env) -> Result<Env, TypingError> {
    let mut out = a.clone();
    for (x, t) in b {
        match out.get(x) {
            Some(s) if s != t => return Err(TypingError::Incompatible(x.clone())),
            _ => {
                out.insert(x.clone(), t.clone());
            }
        }
    }
    Ok(out)
}

fn env_with(env: &Env, x: &Name, t: &TypeExpr) -> Env {
    let mut out = env.clone();
    out.insert(x.clone(), t.clone());
    out
}

fn env_without(env: &Env, x: &Name) -> Env {
    let mut out = env.clone();
    out.remove(x);
    out
}

fn env_restrict(env: &Env, names: &BTreeSet<Name>) -> Env {
    env.iter().filter(|(x, _)| names.contains(*x)).map(|(x, t)| (x.clone(), t.clone())).collect()
}

pub fn format_env(env: &Env) -> String {
    env.iter().map(|(x, t)| format!("{x}:{t}")).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum System {
    AddLambda,
    AddLm,
    MulLambda,
    MulLm,
    AddILambda,
    AddILm,
    MulILambda,
    MulILm,
}

impl System {
    pub const ALL: [System; 8] = [
        System::AddLambda,
        System::AddLm,
        System::MulLambda,
        System::MulLm,
        System::AddILambda,
        System::AddILm,
        System::MulILambda,
        System::MulILm,
    ];

    pub fn new(additive: bool, intersection: bool, closures: bool) -> System {
        use System::*;
        match (additive, intersection, closures) {
            (true, false, false) => AddLambda,
            (true, false, true) => AddLm,
            (false, false, false) => MulLambda,
            (false, false, true) => MulLm,
            (true, true, false) => AddILambda,
            (true, true, true) => AddILm,
            (false, true, false) => MulILambda,
            (false, true, true) => MulILm,
        }
    }

    pub fn additive(self) -> bool {
        matches!(self, System::AddLambda | System::AddLm | System::AddILambda | System::AddILm)
    }

    pub fn intersection(self) -> bool {
        matches!(self, System::AddILambda | System::AddILm | System::MulILambda | System::MulILm)
    }

    /// Whether the system types closures.
    pub fn closures(self) -> bool {
        matches!(self, System::AddLm | System::MulLm | System::AddILm | System::MulILm)
    }

    /// The additive/multiplicative counterpart.
    pub fn dual(self) -> System {
        System::new(!self.additive(), self.intersection(), self.closures())
    }

    pub fn allows(self, rule: TRule) -> bool {
        let split = !self.additive() && self.intersection();
        match rule {
            TRule::Ax | TRule::App => true,
            TRule::Abs => !split,
            TRule::Abs1 | TRule::Abs2 => split,
            TRule::Subs => self.closures() && !split,
            TRule::Subs1 | TRule::Subs2 => self.closures() && split,
            TRule::InterI | TRule::InterE => self.intersection(),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.additive() { "add" } else { "mul" };
        let i = if self.intersection() { "^i" } else { "" };
        let lang = if self.closures() { "Λ" } else { "λ" };
        write!(f, "{kind}{i}_{lang}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TRule {
    Ax,
    App,
    Abs,
    Abs1,
    Abs2,
    Subs,
    Subs1,
    Subs2,
    InterI,
    InterE,
}

impl TRule {
    const ALL: [TRule; 10] = [
        TRule::Ax,
        TRule::App,
        TRule::Abs,
        TRule::Abs1,
        TRule::Abs2,
        TRule::Subs,
        TRule::Subs1,
        TRule::Subs2,
        TRule::InterI,
        TRule::InterE,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TRule::Ax => "ax",
            TRule::App => "app",
            TRule::Abs => "abs",
            TRule::Abs1 => "abs1",
            TRule::Abs2 => "abs2",
            TRule::Subs => "subs",
            TRule::Subs1 => "subs1",
            TRule::Subs2 => "subs2",
            TRule::InterI => "inter-i",
            TRule::InterE => "inter-e",
        }
    }

    fn arity(self) -> usize {
        match self {
            TRule::Ax => 0,
            TRule::Abs | TRule::Abs1 | TRule::Abs2 | TRule::InterE => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for TRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TRule {
    type Err = TypingError;

    fn from_str(s: &str) -> Result<TRule, TypingError> {
        TRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| TypingError::Syntax(format!("unknown rule `{s}`")))
    }
}

/// A node `Γ ⊢ t : A` together with the rule that concludes it.
#[derive(Clone, PartialEq, Eq)]
pub struct Derivation {
    pub system: System,
    pub env: Env,
    pub term: Term,
    pub ty: TypeExpr,
    pub rule: TRule,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn judgement(&self) -> String {
        format!("{} ⊢ {} : {}", format_env(&self.env), self.term, self.ty)
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// The same tree read in another system.
    pub fn in_system(&self, system: System) -> Derivation {
        Derivation {
            system,
            premises: self.premises.iter().map(|p| p.in_system(system)).collect(),
            ..self.clone()
        }
    }

    pub fn same_conclusion(&self, other: &Derivation) -> bool {
        self.env == other.env && self.term == other.term && self.ty == other.ty
    }

    /// The s-expression `(rule (env) "term" type premises…)`.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(&mut out, 0);
        out
    }

    fn write_sexpr(&self, out: &mut String, indent: usize) {
        let env: Vec<String> = self.env.iter().map(|(x, t)| format!("({x} {})", t.sexpr())).collect();
        let term = self.term.to_string().replace('\\', "\\\\").replace('"', "\\\"");
        out.push_str(&format!("({} ({}) \"{}\" {}", self.rule, env.join(" "), term, self.ty.sexpr()));
        for p in &self.premises {
            out.push('\n');
            out.push_str(&" ".repeat(indent + 2));
            p.write_sexpr(out, indent + 2);
        }
        out.push(')');
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(d: &Derivation, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
            writeln!(f, "{}{}  ({})", "  ".repeat(depth), d.judgement(), d.rule)?;
            d.premises.iter().try_for_each(|p| go(p, f, depth + 1))
        }
        go(self, f, 0)
    }
}

impl fmt::Debug for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node {} ({rule}): {reason}", show_node(path))]
pub struct DerivationError {
    /// Premise indices from the root.
    pub path: Vec<usize>,
    pub rule: TRule,
    pub reason: String,
}

fn show_node(path: &[usize]) -> String {
    if path.is_empty() {
        return "root".to_string();
    }
    path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypingError {
    #[error("invalid derivation at {0}")]
    Invalid(#[from] DerivationError),
    #[error("not a pure λ-term")]
    NotPure,
    #[error("not in β-normal form")]
    NotBetaNormal,
    #[error("{0} has no intersection rules")]
    NotIntersection(System),
    #[error("environments disagree on {0}")]
    Incompatible(Name),
    #[error("{0} clashes with a name of the term")]
    Clash(Name),
    #[error("{0} ≪ {1} does not hold")]
    NotBelow(TypeExpr, TypeExpr),
    #[error("derivation syntax: {0}")]
    Syntax(String),
}

// ≪

/// `a ≪ b`: every conjunct of `b` is a conjunct of `a`.
pub fn ll_check(a: &TypeExpr, b: &TypeExpr) -> bool {
    let left = a.conjuncts();
    b.conjuncts().iter().all(|c| left.contains(c))
}

/// All types over `bases` of depth at most `depth`.
pub fn types_up_to_depth(bases: &[&str], depth: usize) -> Vec<TypeExpr> {
    if depth == 0 {
        return Vec::new();
    }
    let smaller = types_up_to_depth(bases, depth - 1);
    let mut out: Vec<TypeExpr> = bases.iter().map(|b| TypeExpr::base(b)).collect();
    for a in &smaller {
        for b in &smaller {
            out.push(TypeExpr::arrow(a.clone(), b.clone()));
            out.push(TypeExpr::inter(a.clone(), b.clone()));
        }
    }
    out
}

/// The least relation on `universe` closed under the five ≪ axioms;
/// `rel[i][j]` means `universe[i] ≪ universe[j]`.
pub fn ll_closure(universe: &[TypeExpr]) -> Vec<Vec<bool>> {
    let n = universe.len();
    let index: BTreeMap<&TypeExpr, usize> = universe.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut rel = vec![vec![false; n]; n];
    let mut pairs = Vec::new();
    for (i, t) in universe.iter().enumerate() {
        rel[i][i] = true;
        if let TypeExpr::Inter(a, b) = t {
            for c in [a, b] {
                if let Some(&j) = index.get(&**c) {
                    rel[i][j] = true;
                }
            }
            if let (Some(&j), Some(&k)) = (index.get(&**a), index.get(&**b)) {
                pairs.push((i, j, k));
            }
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i != j && rel[i][j] {
                    let via = rel[j].clone();
                    for (k, _) in via.iter().enumerate().filter(|(_, &r)| r) {
                        if !rel[i][k] {
                            rel[i][k] = true;
                            changed = true;
                        }
                    }
                }
            }
            for &(t, a, b) in &pairs {
                if rel[i][a] && rel[i][b] && !rel[i][t] {
                    rel[i][t] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return rel;
        }
    }
}

// Checking

pub fn check_derivation(d: &Derivation) -> Result<(), DerivationError> {
    fn go(d: &Derivation, system: System, path: &mut Vec<usize>) -> Result<(), DerivationError> {
        check_node(d, system).map_err(|reason| DerivationError { path: path.clone(), rule: d.rule, reason })?;
        for (i, p) in d.premises.iter().enumerate() {
            path.push(i);
            go(p, system, path)?;
            path.pop();
        }
        Ok(())
    }
    go(d, d.system, &mut Vec::new())
}

pub fn is_valid(d: &Derivation) -> bool {
    check_derivation(d).is_ok()
}

fn require(cond: bool, reason: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(reason())
    }
}

fn check_node(d: &Derivation, system: System) -> Result<(), String> {
    require(d.system == system, || format!("system {} differs from the root's {system}", d.system))?;
    require(system.allows(d.rule), || format!("not a rule of {system}"))?;
    require(d.premises.len() == d.rule.arity(), || {
        format!("expects {} premises, found {}", d.rule.arity(), d.premises.len())
    })?;
    require(!d.term.has_meta(), || "metavariables are not typable".to_string())?;
    let p = &d.premises;
    let additive = system.additive();
    let union = |a: &Env, b: &Env| env_union(a, b).map_err(|e| e.to_string());
    let same_env = |e: &Env, what: &str| require(*e == d.env, || format!("{what} environment differs from the conclusion's"));
    let subject = |q: &Derivation, t: &Term| require(q.term == *t, || format!("premise is about {}, expected {t}", q.term));
    match (d.rule, &d.term) {
        (TRule::Ax, Term::Var(x)) => {
            if additive {
                require(d.env.get(x) == Some(&d.ty), || format!("{x}:{} is not in the environment", d.ty))
            } else {
                let single: Env = [(x.clone(), d.ty.clone())].into_iter().collect();
                require(d.env == single, || format!("environment must be exactly {x}:{}", d.ty))
            }
        }
        (TRule::App, Term::App(a, b)) => {
            subject(&p[0], a)?;
            subject(&p[1], b)?;
            let TypeExpr::Arrow(dom, cod) = &p[0].ty else {
                return Err(format!("function premise has non-arrow type {}", p[0].ty));
            };
            require(**cod == d.ty, || format!("function returns {cod}, conclusion says {}", d.ty))?;
            require(**dom == p[1].ty, || format!("argument has type {}, function expects {dom}", p[1].ty))?;
            if additive {
                same_env(&p[0].env, "function")?;
                same_env(&p[1].env, "argument")
            } else {
                same_env(&union(&p[0].env, &p[1].env)?, "⊎ of premise")
            }
        }
        (TRule::Abs | TRule::Abs1 | TRule::Abs2, Term::Abs(x, b)) => {
            subject(&p[0], b)?;
            let TypeExpr::Arrow(dom, cod) = &d.ty else {
                return Err(format!("abstraction typed by non-arrow {}", d.ty));
            };
            require(**cod == p[0].ty, || format!("body has type {}, expected {cod}", p[0].ty))?;
            match d.rule {
                TRule::Abs if !additive => {
                    if let Some(t) = p[0].env.get(x) {
                        require(**dom == *t, || format!("{x}:{t} in the premise, domain is {dom}"))?;
                    }
                    same_env(&env_without(&p[0].env, x), "premise minus the binder")
                }
                TRule::Abs | TRule::Abs1 => {
                    require(!d.env.contains_key(x), || format!("{x} already in the environment"))?;
                    same_env(&env_without(&p[0].env, x), "premise minus the binder")?;
                    require(p[0].env.get(x) == Some(dom), || format!("premise must bind {x}:{dom}"))
                }
                _ => {
                    require(!d.env.contains_key(x), || format!("side condition {x} ∉ Γ fails"))?;
                    same_env(&p[0].env, "premise")
                }
            }
        }
        (TRule::Subs | TRule::Subs1 | TRule::Subs2, Term::Closure(t, x, u)) => {
            subject(&p[0], u)?;
            subject(&p[1], t)?;
            require(p[1].ty == d.ty, || format!("body has type {}, conclusion says {}", p[1].ty, d.ty))?;
            let b = &p[0].ty;
            let bound = p[1].env.get(x);
            match d.rule {
                TRule::Subs if additive => {
                    require(!d.env.contains_key(x), || format!("{x} already in the environment"))?;
                    same_env(&p[0].env, "substituted term's")?;
                    require(bound == Some(b), || format!("body premise must bind {x}:{b}"))?;
                    same_env(&env_without(&p[1].env, x), "body premise minus the binder")
                }
                TRule::Subs => {
                    if let Some(t) = bound {
                        require(t == b, || format!("{x}:{t} in the body premise, substituted term has {b}"))?;
                    }
                    same_env(&union(&p[0].env, &env_without(&p[1].env, x))?, "⊎ of premise")
                }
                TRule::Subs1 => {
                    require(bound == Some(b), || format!("body premise must bind {x}:{b}"))?;
                    same_env(&union(&p[0].env, &env_without(&p[1].env, x))?, "⊎ of premise")
                }
                _ => {
                    require(bound.is_none(), || format!("side condition {x} ∉ Δ fails"))?;
                    same_env(&union(&p[0].env, &p[1].env)?, "⊎ of premise")
                }
            }
        }
        (TRule::InterI, _) => {
            let TypeExpr::Inter(a, b) = &d.ty else {
                return Err(format!("conclusion {} is not an intersection", d.ty));
            };
            for (q, want) in p.iter().zip([a, b]) {
                subject(q, &d.term)?;
                same_env(&q.env, "premise")?;
                require(q.ty == **want, || format!("premise has type {}, expected {want}", q.ty))?;
            }
            Ok(())
        }
        (TRule::InterE, _) => {
            subject(&p[0], &d.term)?;
            same_env(&p[0].env, "premise")?;
            match &p[0].ty {
                TypeExpr::Inter(a, b) if **a == d.ty || **b == d.ty => Ok(()),
                t => Err(format!("{} is not a component of {t}", d.ty)),
            }
        }
        (r, t) => Err(format!("rule {r} does not apply to {t}")),
    }
}

// Constructions

fn node(system: System, env: Env, term: Term, ty: TypeExpr, rule: TRule, premises: Vec<Derivation>) -> Derivation {
    Derivation { system, env, term, ty, rule, premises }
}

fn inter_e(d: Derivation, left: bool) -> Derivation {
    let TypeExpr::Inter(a, b) = &d.ty else { unreachable!("∩E on a non-intersection") };
    let ty = if left { (**a).clone() } else { (**b).clone() };
    node(d.system, d.env.clone(), d.term.clone(), ty, TRule::InterE, vec![d])
}

fn inter_i(a: Derivation, b: Derivation) -> Derivation {
    let ty = TypeExpr::inter(a.ty.clone(), b.ty.clone());
    node(a.system, a.env.clone(), a.term.clone(), ty, TRule::InterI, vec![a, b])
}

fn conjunct_path(a: &TypeExpr, target: &TypeExpr) -> Option<Vec<bool>> {
    if a == target {
        return Some(Vec::new());
    }
    let TypeExpr::Inter(l, r) = a else { return None };
    for (side, t) in [(true, l), (false, r)] {
        if let Some(mut path) = conjunct_path(t, target) {
            path.insert(0, side);
            return Some(path);
        }
    }
    None
}

/// From `Γ ⊢ t : A` and `A ≪ B`, a derivation of `Γ ⊢ t : B` by ∩E and ∩I.
pub fn coerce(d: Derivation, target: &TypeExpr) -> Result<Derivation, TypingError> {
    if d.ty == *target {
        return Ok(d);
    }
    if !d.system.intersection() {
        return Err(TypingError::NotIntersection(d.system));
    }
    if let Some(path) = conjunct_path(&d.ty, target) {
        return Ok(path.into_iter().fold(d, inter_e));
    }
    match target {
        TypeExpr::Inter(l, r) => Ok(inter_i(coerce(d.clone(), l)?, coerce(d, r)?)),
        _ => Err(TypingError::NotBelow(d.ty, target.clone())),
    }
}

/// Adds `extra` to every environment of an additive derivation; `extra` must
/// avoid every name of the term.
pub fn weaken(d: &Derivation, extra: &Env) -> Result<Derivation, TypingError> {
    if !d.system.additive() {
        return Err(TypingError::Invalid(DerivationError {
            path: Vec::new(),
            rule: d.rule,
            reason: format!("weakening does not hold in {}", d.system),
        }));
    }
    let names = d.term.all_names();
    if let Some(x) = extra.keys().find(|x| names.contains(*x)) {
        return Err(TypingError::Clash(x.clone()));
    }
    fn go(d: &Derivation, extra: &Env) -> Result<Derivation, TypingError> {
        Ok(Derivation {
            env: env_union(&d.env, extra)?,
            premises: d.premises.iter().map(|p| go(p, extra)).collect::<Result<_, _>>()?,
            ..d.clone()
        })
    }
    go(d, extra)
}

/// Additive to multiplicative (restricting every environment to the free
/// variables of its subject) or back (weakened by `extra`).
pub fn add_mul_transfer(d: &Derivation) -> Result<Derivation, TypingError> {
    add_mul_transfer_with(d, &Env::new())
}

pub fn add_mul_transfer_with(d: &Derivation, extra: &Env) -> Result<Derivation, TypingError> {
    check_derivation(d)?;
    if d.system.additive() {
        Ok(to_mul(d))
    } else {
        let ctx = env_union(&d.env, extra)?;
        to_add(d, &ctx)
    }
}

fn to_mul(d: &Derivation) -> Derivation {
    let system = d.system.dual();
    let split = system.intersection();
    let rule = match (&d.rule, &d.term) {
        (TRule::Abs, Term::Abs(x, b)) if split => {
            if b.has_free(x) {
                TRule::Abs1
            } else {
                TRule::Abs2
            }
        }
        (TRule::Subs, Term::Closure(t, x, _)) if split => {
            if t.has_free(x) {
                TRule::Subs1
            } else {
                TRule::Subs2
            }
        }
        (r, _) => *r,
    };
    node(
        system,
        env_restrict(&d.env, &d.term.free_vars()),
        d.term.clone(),
        d.ty.clone(),
        rule,
        d.premises.iter().map(to_mul).collect(),
    )
}

fn to_add(d: &Derivation, ctx: &Env) -> Result<Derivation, TypingError> {
    let system = d.system.dual();
    let env = env_union(&d.env, ctx)?;
    let bind = |x: &Name, t: &TypeExpr| {
        if env.contains_key(x) {
            Err(TypingError::Clash(x.clone()))
        } else {
            Ok(env_with(&env, x, t))
        }
    };
    let (rule, premises) = match (&d.rule, &d.term, &d.ty) {
        (TRule::Abs | TRule::Abs1 | TRule::Abs2, Term::Abs(x, _), TypeExpr::Arrow(a, _)) => {
            (TRule::Abs, vec![to_add(&d.premises[0], &bind(x, a)?)?])
        }
        (TRule::Subs | TRule::Subs1 | TRule::Subs2, Term::Closure(_, x, _), _) => {
            let inner = bind(x, &d.premises[0].ty)?;
            (TRule::Subs, vec![to_add(&d.premises[0], &env)?, to_add(&d.premises[1], &inner)?])
        }
        (r, _, _) => (*r, d.premises.iter().map(|p| to_add(p, &env)).collect::<Result<_, _>>()?),
    };
    Ok(node(system, env, d.term.clone(), d.ty.clone(), rule, premises))
}

/// From a derivation of `Γ, x:B ⊢ t : A` and `C ≪ B`, a derivation of
/// `Γ, x:C ⊢ t : A`.
pub fn strengthen(d: &Derivation, x: &Name, c: &TypeExpr) -> Result<Derivation, TypingError> {
    check_derivation(d)?;
    if !d.system.intersection() {
        return Err(TypingError::NotIntersection(d.system));
    }
    let b = d.env.get(x).ok_or_else(|| TypingError::Clash(x.clone()))?;
    if !ll_check(c, b) {
        return Err(TypingError::NotBelow(c.clone(), b.clone()));
    }
    fn go(d: &Derivation, x: &Name, c: &TypeExpr) -> Result<Derivation, TypingError> {
        if !d.env.contains_key(x) {
            return Ok(d.clone());
        }
        let env = env_with(&d.env, x, c);
        if d.rule == TRule::Ax && d.term == Term::Var(x.clone()) {
            let ax = node(d.system, env, d.term.clone(), c.clone(), TRule::Ax, Vec::new());
            return coerce(ax, &d.ty);
        }
        let premises = match &d.term {
            Term::Abs(y, _) if y == x => d.premises.clone(),
            Term::Closure(_, y, _) if y == x => vec![go(&d.premises[0], x, c)?, d.premises[1].clone()],
            _ => d.premises.iter().map(|p| go(p, x, c)).collect::<Result<_, _>>()?,
        };
        Ok(Derivation { env, premises, ..d.clone() })
    }
    go(d, x, c)
}

/// One structural rule instance found under the ∩I/∩E layer of a derivation.
#[derive(Clone, Debug)]
pub struct Part {
    pub rule: TRule,
    pub ty: TypeExpr,
    pub premises: Vec<Derivation>,
}

/// Generation data: `Γ ⊢ t : A` holds iff there are parts
/// with types `A1 … An` such that `A1 ∩ … ∩ An ≪ A`.
#[derive(Clone, Debug)]
pub struct Generation {
    pub system: System,
    pub env: Env,
    pub term: Term,
    pub target: TypeExpr,
    pub parts: Vec<Part>,
}

impl Generation {
    pub fn meet(&self) -> Option<TypeExpr> {
        let mut tys = self.parts.iter().rev().map(|p| p.ty.clone());
        let last = tys.next()?;
        Some(tys.fold(last, |acc, t| TypeExpr::inter(t, acc)))
    }
}

pub fn decompose(d: &Derivation) -> Generation {
    fn collect(d: &Derivation, out: &mut Vec<Part>) {
        match d.rule {
            TRule::InterI | TRule::InterE => d.premises.iter().for_each(|p| collect(p, out)),
            rule => {
                let part = Part { rule, ty: d.ty.clone(), premises: d.premises.clone() };
                if !out.iter().any(|q| q.ty == part.ty) {
                    out.push(part);
                }
            }
        }
    }
    let mut parts = Vec::new();
    collect(d, &mut parts);
    Generation { system: d.system, env: d.env.clone(), term: d.term.clone(), target: d.ty.clone(), parts }
}

pub fn recompose(g: &Generation) -> Result<Derivation, TypingError> {
    let meet = g.meet().ok_or_else(|| TypingError::Syntax("no structural rule instance".to_string()))?;
    if !ll_check(&meet, &g.target) {
        return Err(TypingError::NotBelow(meet, g.target.clone()));
    }
    let leaf = |p: &Part| node(g.system, g.env.clone(), g.term.clone(), p.ty.clone(), p.rule, p.premises.clone());
    let mut leaves = g.parts.iter().rev().map(leaf);
    let last = leaves.next().expect("nonempty");
    let joined = leaves.fold(last, |acc, l| inter_i(l, acc));
    let d = coerce(joined, &g.target)?;
    check_derivation(&d)?;
    Ok(d)
}

// Simple type inference

#[derive(Clone, Debug)]
enum UTy {
    Var(usize),
    Arr(Arc<UTy>, Arc<UTy>),
}

struct Unifier {
    subst: Vec<Option<UTy>>,
}

impl Unifier {
    fn fresh(&mut self) -> UTy {
        self.subst.push(None);
        UTy::Var(self.subst.len() - 1)
    }

    fn walk(&self, t: &UTy) -> UTy {
        let mut t = t.clone();
        while let UTy::Var(v) = t {
            match &self.subst[v] {
                Some(s) => t = s.clone(),
                None => break,
            }
        }
        t
    }

    fn occurs(&self, v: usize, t: &UTy) -> bool {
        match self.walk(t) {
            UTy::Var(w) => v == w,
            UTy::Arr(a, b) => self.occurs(v, &a) || self.occurs(v, &b),
        }
    }

    fn unify(&mut self, a: &UTy, b: &UTy) -> bool {
        match (self.walk(a), self.walk(b)) {
            (UTy::Var(v), UTy::Var(w)) if v == w => true,
            (UTy::Var(v), t) | (t, UTy::Var(v)) => {
                if self.occurs(v, &t) {
                    return false;
                }
                self.subst[v] = Some(t);
                true
            }
            (UTy::Arr(a1, b1), UTy::Arr(a2, b2)) => self.unify(&a1, &a2) && self.unify(&b1, &b2),
        }
    }

    fn infer(&mut self, t: &Term, vars: &mut BTreeMap<Name, UTy>) -> Option<UTy> {
        match t {
            Term::Var(x) => Some(vars[x].clone()),
            Term::App(a, b) => {
                let f = self.infer(a, vars)?;
                let u = self.infer(b, vars)?;
                let r = self.fresh();
                self.unify(&f, &UTy::Arr(Arc::new(u), Arc::new(r.clone()))).then_some(r)
            }
            Term::Abs(x, b) => {
                let v = self.fresh();
                vars.insert(x.clone(), v.clone());
                Some(UTy::Arr(Arc::new(v), Arc::new(self.infer(b, vars)?)))
            }
            Term::Closure(b, x, u) => {
                let tu = self.infer(u, vars)?;
                vars.insert(x.clone(), tu);
                self.infer(b, vars)
            }
            Term::Meta(..) => None,
        }
    }
}

struct Namer<'a> {
    unifier: &'a Unifier,
    names: BTreeMap<usize, TypeExpr>,
}

impl Namer<'_> {
    fn resolve(&mut self, t: &UTy) -> TypeExpr {
        match self.unifier.walk(t) {
            UTy::Var(v) => {
                let n = self.names.len();
                self.names.entry(v).or_insert_with(|| TypeExpr::Base(base_name(n))).clone()
            }
            UTy::Arr(a, b) => TypeExpr::arrow(self.resolve(&a), self.resolve(&b)),
        }
    }
}

fn base_name(n: usize) -> Name {
    let letter = (b'A' + (n % 26) as u8) as char;
    if n < 26 {
        Name::new(&letter.to_string())
    } else {
        Name::new(&format!("{letter}{}", n / 26))
    }
}

#[derive(Clone, Debug)]
pub struct Typing {
    pub env: Env,
    pub ty: TypeExpr,
    pub derivation: Derivation,
}

/// The principal simple typing in `add_λ` or `add_Λ`, if any. The derivation
/// is about the term with its binders made distinct.
pub fn infer_simple(t: &Term, system: System) -> Option<Typing> {
    assert!(system.additive() && !system.intersection(), "inference is for the additive simple systems");
    if t.has_meta() || (t.has_closure() && !system.closures()) {
        return None;
    }
    let t = barendregt(t);
    let mut u = Unifier { subst: Vec::new() };
    let mut vars: BTreeMap<Name, UTy> = t.free_vars().into_iter().map(|x| (x, u.fresh())).collect();
    let free: Vec<Name> = vars.keys().cloned().collect();
    let ty = u.infer(&t, &mut vars)?;
    let mut namer = Namer { unifier: &u, names: BTreeMap::new() };
    let ty = namer.resolve(&ty);
    let env: Env = free.iter().map(|x| (x.clone(), namer.resolve(&vars[x]))).collect();
    let types: BTreeMap<Name, TypeExpr> = vars.iter().map(|(x, v)| (x.clone(), namer.resolve(v))).collect();
    let derivation = simple_derivation(system, &t, &env, &types);
    debug_assert_eq!(derivation.ty, ty);
    Some(Typing { env, ty, derivation })
}

fn simple_derivation(system: System, t: &Term, env: &Env, types: &BTreeMap<Name, TypeExpr>) -> Derivation {
    let mk = |ty, rule, premises| node(system, env.clone(), t.clone(), ty, rule, premises);
    match t {
        Term::Var(x) => mk(env[x].clone(), TRule::Ax, Vec::new()),
        Term::App(a, b) => {
            let f = simple_derivation(system, a, env, types);
            let u = simple_derivation(system, b, env, types);
            let TypeExpr::Arrow(_, cod) = &f.ty else { unreachable!("unified to an arrow") };
            mk((**cod).clone(), TRule::App, vec![f, u])
        }
        Term::Abs(x, b) => {
            let a = types[x].clone();
            let body = simple_derivation(system, b, &env_with(env, x, &a), types);
            mk(TypeExpr::arrow(a, body.ty.clone()), TRule::Abs, vec![body])
        }
        Term::Closure(b, x, u) => {
            let du = simple_derivation(system, u, env, types);
            let db = simple_derivation(system, b, &env_with(env, x, &du.ty), types);
            mk(db.ty.clone(), TRule::Subs, vec![du, db])
        }
        Term::Meta(..) => unreachable!("rejected before inference"),
    }
}

// Normal forms

enum Skeleton {
    Abs(Name, Box<Skeleton>),
    /// A head variable, the type it is used at, and its arguments.
    Head(Name, TypeExpr, Vec<Skeleton>),
}

struct NfTyper {
    fresh: usize,
    uses: BTreeMap<Name, Vec<TypeExpr>>,
    bare: BTreeMap<Name, TypeExpr>,
    var_types: BTreeMap<Name, TypeExpr>,
}

impl NfTyper {
    fn fresh(&mut self) -> TypeExpr {
        self.fresh += 1;
        TypeExpr::Base(base_name(self.fresh - 1))
    }

    fn use_at(&mut self, x: &Name, ty: TypeExpr) {
        let uses = self.uses.entry(x.clone()).or_default();
        if !uses.contains(&ty) {
            uses.push(ty);
        }
    }

    /// Intersection of all uses of `x`, or a fresh base when unused.
    fn close(&mut self, x: &Name) -> TypeExpr {
        let uses = self.uses.remove(x).unwrap_or_default();
        let ty = match uses.split_last() {
            None => self.fresh(),
            Some((last, init)) => init.iter().rev().fold(last.clone(), |acc, u| TypeExpr::inter(u.clone(), acc)),
        };
        self.var_types.insert(x.clone(), ty.clone());
        ty
    }

    fn skeleton(&mut self, t: &Term) -> Result<(Skeleton, TypeExpr), TypingError> {
        match t {
            Term::Abs(x, b) => {
                let (sb, tb) = self.skeleton(b)?;
                let tx = self.close(x);
                Ok((Skeleton::Abs(x.clone(), Box::new(sb)), TypeExpr::arrow(tx, tb)))
            }
            Term::Closure(..) | Term::Meta(..) => Err(TypingError::NotPure),
            _ => {
                let mut args = Vec::new();
                let mut head = t;
                while let Term::App(f, a) = head {
                    args.push(&**a);
                    head = f;
                }
                args.reverse();
                let x = match head {
                    Term::Var(x) => x,
                    Term::Abs(..) => return Err(TypingError::NotBetaNormal),
                    _ => return Err(TypingError::NotPure),
                };
                let mut sks = Vec::new();
                let mut tys = Vec::new();
                for a in args {
                    let (s, ty) = self.skeleton(a)?;
                    sks.push(s);
                    tys.push(ty);
                }
                let result = if tys.is_empty() {
                    match self.bare.get(x) {
                        Some(b) => b.clone(),
                        None => {
                            let b = self.fresh();
                            self.bare.insert(x.clone(), b.clone());
                            b
                        }
                    }
                } else {
                    self.fresh()
                };
                let used = tys.into_iter().rev().fold(result.clone(), |acc, a| TypeExpr::arrow(a, acc));
                self.use_at(x, used.clone());
                Ok((Skeleton::Head(x.clone(), used, sks), result))
            }
        }
    }

    fn derive(&self, sk: &Skeleton, t: &Term, env: &Env) -> Derivation {
        let system = System::AddILambda;
        match (sk, t) {
            (Skeleton::Abs(x, sb), Term::Abs(_, b)) => {
                let a = self.var_types[x].clone();
                let body = self.derive(sb, b, &env_with(env, x, &a));
                let ty = TypeExpr::arrow(a, body.ty.clone());
                node(system, env.clone(), t.clone(), ty, TRule::Abs, vec![body])
            }
            (Skeleton::Head(x, used, sks), _) => {
                let mut spine = Vec::new();
                let mut head = t;
                while let Term::App(f, a) = head {
                    spine.push(&**a);
                    head = f;
                }
                spine.reverse();
                let ax = node(system, env.clone(), head.clone(), env[x].clone(), TRule::Ax, Vec::new());
                let mut d = coerce(ax, used).expect("a use is a conjunct of the variable's type");
                let mut fun = head.clone();
                for (s, a) in sks.iter().zip(spine) {
                    let arg = self.derive(s, a, env);
                    fun = Term::app(fun, a.clone());
                    let TypeExpr::Arrow(_, cod) = &d.ty else { unreachable!("head types are arrow chains") };
                    let cod = (**cod).clone();
                    d = node(system, env.clone(), fun.clone(), cod, TRule::App, vec![d, arg]);
                }
                d
            }
            _ => unreachable!("skeleton follows the term"),
        }
    }
}

/// An `add^i_λ` derivation for a β-normal pure term: each head occurrence of
/// a variable is typed by an arrow chain ending in a fresh base, and a
/// variable's type intersects all its uses.
pub fn type_normal_form(t: &Term) -> Result<Derivation, TypingError> {
    if !t.is_pure() {
        return Err(TypingError::NotPure);
    }
    let t = barendregt(t);
    let mut ty = NfTyper { fresh: 0, uses: BTreeMap::new(), bare: BTreeMap::new(), var_types: BTreeMap::new() };
    let (sk, _) = ty.skeleton(&t)?;
    let env: Env = t.free_vars().into_iter().map(|x| (x.clone(), ty.close(&x))).collect();
    let d = ty.derive(&sk, &t, &env);
    check_derivation(&d)?;
    Ok(d)
}

// S-expressions

pub fn parse_derivation(src: &str, system: System) -> Result<Derivation, TypingError> {
    let v = lexpr::from_str(src).map_err(|e| TypingError::Syntax(e.to_string()))?;
    derivation_of(&v, system)
}

fn syntax<T>(msg: impl Into<String>) -> Result<T, TypingError> {
    Err(TypingError::Syntax(msg.into()))
}

fn list_of(v: &lexpr::Value) -> Result<Vec<&lexpr::Value>, TypingError> {
    match v {
        lexpr::Value::Null | lexpr::Value::Nil => Ok(Vec::new()),
        _ => match v.list_iter() {
            Some(it) => Ok(it.collect()),
            None => syntax(format!("expected a list, found {v}")),
        },
    }
}

fn type_of(v: &lexpr::Value) -> Result<TypeExpr, TypingError> {
    if let Some(s) = v.as_symbol() {
        return Ok(TypeExpr::base(s));
    }
    let items = list_of(v)?;
    match items.as_slice() {
        [op, a, b] => match op.as_symbol() {
            Some("->") => Ok(TypeExpr::arrow(type_of(a)?, type_of(b)?)),
            Some("&") => Ok(TypeExpr::inter(type_of(a)?, type_of(b)?)),
            _ => syntax(format!("unknown type constructor {op}")),
        },
        _ => syntax(format!("malformed type {v}")),
    }
}

fn derivation_of(v: &lexpr::Value, system: System) -> Result<Derivation, TypingError> {
    let items = list_of(v)?;
    if items.len() < 4 {
        return syntax(format!("expected (rule (env) term type premises…), found {v}"));
    }
    let rule: TRule = items[0].as_symbol().ok_or_else(|| TypingError::Syntax("rule must be a symbol".into()))?.parse()?;
    let mut env = Env::new();
    for b in list_of(items[1])? {
        match list_of(b)?.as_slice() {
            [x, t] => {
                let x = x.as_symbol().ok_or_else(|| TypingError::Syntax(format!("bad variable {x}")))?;
                env.insert(Name::new(x), type_of(t)?);
            }
            _ => return syntax(format!("malformed binding {b}")),
        }
    }
    let src = items[2].as_str().ok_or_else(|| TypingError::Syntax("term must be a string".into()))?;
    let term = parse(src).map_err(|e| TypingError::Syntax(e.to_string()))?;
    let ty = type_of(items[3])?;
    let premises = items[4..].iter().map(|p| derivation_of(p, system)).collect::<Result<_, _>>()?;
    Ok(Derivation { system, env, term, ty, rule, premises })
}

// Campaigns

/// The three SN checks on one pure term; `None` where the premise fails.
#[derive(Clone, Debug)]
pub struct SnTypingCheck {
    /// Simply typable terms are λsub-SN.
    pub simple: Option<Inst>,
    /// β-SN terms are λsub-SN.
    pub psn: Option<Inst>,
    /// λsub-SN terms have a β-normal form with a valid intersection witness.
    pub normal_form: Option<Inst>,
}

pub fn sn_typability_check(t: &Term, state_bound: usize) -> SnTypingCheck {
    let lsub = lsub::explore_sn(t, LSUB, state_bound, usize::MAX).verdict;
    let beta = lsub::explore_sn(t, BETA, state_bound, usize::MAX).verdict;
    let against = |premise: Option<bool>| {
        let outcome = match (premise?, lsub) {
            (false, _) => return None,
            (true, Verdict::SN) => Outcome::Holds,
            (true, Verdict::NotSN) => Outcome::Fails,
            (true, Verdict::BoundExceeded) => Outcome::Inconclusive,
        };
        Some(Inst::new(outcome, 1, || t.to_string()))
    };
    let beta_sn = match beta {
        Verdict::SN => Some(true),
        Verdict::NotSN => Some(false),
        Verdict::BoundExceeded => None,
    };
    let normal_form = (lsub == Verdict::SN).then(|| {
        let tr = lsub::reduce(t, BETA, Strategy::LeftmostOutermost, 10_000);
        let ok = tr.normal && type_normal_form(tr.last()).is_ok();
        Inst::holds(ok, || format!("{t} with β-normal form {}", tr.last()))
    });
    SnTypingCheck {
        simple: against(Some(infer_simple(t, System::AddLambda).is_some())),
        psn: match beta_sn {
            None => Some(Inst::new(Outcome::Inconclusive, 1, || t.to_string())),
            b => against(b),
        },
        normal_form,
    }
}

/// Random pure terms checked against the SN characterisation: simple
/// typability, PSN and normal-form witnesses, in that order.
pub fn sn_typability_campaign(seed: u64, count: usize, size: usize, state_bound: usize, mode: Mode) -> Vec<Summary> {
    let cfg = GenConfig::pure(size);
    let checks = par::map_range(mode, count, |i| {
        let t = gen::term(&mut gen::instance_rng(seed, i), &cfg);
        sn_typability_check(&t, state_bound)
    });
    vec![
        Summary::tally("typable implies sn", checks.iter().map(|c| c.simple.clone())),
        Summary::tally("psn sampled", checks.iter().map(|c| c.psn.clone())),
        Summary::tally("sn has typed normal form", checks.iter().map(|c| c.normal_form.clone())),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Term {
        parse(s).unwrap()
    }

    fn b(a: &str) -> TypeExpr {
        TypeExpr::base(a)
    }

    fn delta() -> Derivation {
        let (a, bb) = (b("A"), b("B"));
        let ab = TypeExpr::arrow(a.clone(), bb.clone());
        let env: Env = [(Name::new("x"), TypeExpr::inter(ab.clone(), a.clone()))].into_iter().collect();
        let sys = System::AddILambda;
        let ax = || node(sys, env.clone(), p("x"), env[&Name::new("x")].clone(), TRule::Ax, vec![]);
        let f = inter_e(ax(), true);
        let u = inter_e(ax(), false);
        node(sys, env.clone(), p("x x"), bb, TRule::App, vec![f, u])
    }

    #[test]
    fn ll_examples() {
        let (a, bb) = (b("A"), b("B"));
        assert!(ll_check(&TypeExpr::inter(a.clone(), bb.clone()), &a));
        assert!(ll_check(&a, &TypeExpr::inter(a.clone(), a.clone())));
        assert!(!ll_check(&a, &bb));
    }

    #[test]
    fn closure_matches_small_universe() {
        let u = types_up_to_depth(&["A", "B"], 2);
        assert_eq!(u.len(), 10);
        let rel = ll_closure(&u);
        for i in 0..u.len() {
            for j in 0..u.len() {
                assert_eq!(rel[i][j], ll_check(&u[i], &u[j]), "{} ≪ {}", u[i], u[j]);
            }
        }
    }

    #[test]
    fn checker_examples() {
        let x = Name::new("x");
        let env: Env = [(x.clone(), b("A"))].into_iter().collect();
        assert!(is_valid(&node(System::AddLambda, env.clone(), p("x"), b("A"), TRule::Ax, vec![])));
        let d = delta();
        assert_eq!(d.size(), 5);
        check_derivation(&d).unwrap();

        // abs*₂ with the binder in Γ
        let sys = System::MulILambda;
        let body = node(sys, env.clone(), p("x"), b("A"), TRule::Ax, vec![]);
        let bad = node(sys, env.clone(), p("\\x.x"), TypeExpr::arrow(b("B"), b("A")), TRule::Abs2, vec![body]);
        let err = check_derivation(&bad).unwrap_err();
        assert!(err.path.is_empty() && err.reason.contains("∉"), "{err}");
    }

    #[test]
    fn inference() {
        let t = infer_simple(&p("\\x.x"), System::AddLambda).unwrap();
        assert_eq!(t.ty, TypeExpr::arrow(b("A"), b("A")));
        assert!(infer_simple(&p("\\x. x x"), System::AddLambda).is_none());
        let t = infer_simple(&p("x[y/\\z.z]"), System::AddLm).unwrap();
        assert_eq!(t.env.len(), 1);
        assert_eq!(t.derivation.rule, TRule::Subs);
        check_derivation(&t.derivation).unwrap();
        assert!(infer_simple(&p("x[y/\\z.z]"), System::AddLambda).is_none());
    }

    #[test]
    fn normal_form_witnesses() {
        let d = type_normal_form(&p("\\x.x")).unwrap();
        assert_eq!(d.ty, TypeExpr::arrow(b("A"), b("A")));
        let d = type_normal_form(&p("\\x. x (\\y.y)")).unwrap();
        let TypeExpr::Arrow(tx, _) = &d.ty else { panic!() };
        assert_eq!(**tx, TypeExpr::arrow(TypeExpr::arrow(b("A"), b("A")), b("B")));
        let d = type_normal_form(&p("x y y")).unwrap();
        let ty = d.env[&Name::new("y")].clone();
        let want = TypeExpr::arrow(ty.clone(), TypeExpr::arrow(ty, d.ty.clone()));
        assert_eq!(d.env[&Name::new("x")], want);
        let d = type_normal_form(&p("\\x. x x")).unwrap();
        check_derivation(&d).unwrap();
        assert_eq!(type_normal_form(&p("(\\x.x) y")).unwrap_err(), TypingError::NotBetaNormal);
    }

    #[test]
    fn transfers() {
        let x = Name::new("x");
        let env: Env = [(x.clone(), b("A")), (Name::new("y"), b("B"))].into_iter().collect();
        let ax = node(System::AddLambda, env, p("x"), b("A"), TRule::Ax, vec![]);
        let m = add_mul_transfer(&ax).unwrap();
        assert_eq!(m.env.len(), 1);
        assert_eq!(m.system, System::MulLambda);

        let d = delta();
        let m = add_mul_transfer(&d).unwrap();
        check_derivation(&m).unwrap();
        let back = add_mul_transfer(&m).unwrap();
        assert_eq!(back, d);

        let id = infer_simple(&p("\\x.x"), System::AddLambda).unwrap().derivation;
        let m = add_mul_transfer(&id).unwrap();
        let extra: Env = [(Name::new("z"), b("C"))].into_iter().collect();
        let w = add_mul_transfer_with(&m, &extra).unwrap();
        check_derivation(&w).unwrap();
        assert_eq!(w.env, extra);
    }

    #[test]
    fn stability_and_generation() {
        let d = delta();
        let x = Name::new("x");
        let c = TypeExpr::inter(b("C"), d.env[&x].clone());
        let s = strengthen(&d, &x, &c).unwrap();
        check_derivation(&s).unwrap();
        assert_eq!(s.env[&x], c);

        let g = decompose(&d);
        assert_eq!(g.parts.len(), 1);
        let r = recompose(&g).unwrap();
        assert!(r.same_conclusion(&d));
    }

    #[test]
    fn sexpr_round_trip() {
        let d = delta();
        let text = d.to_sexpr();
        assert_eq!(parse_derivation(&text, d.system).unwrap(), d);
        let t = infer_simple(&p("\\f. \\a. f (f a)"), System::AddLambda).unwrap().derivation;
        assert_eq!(parse_derivation(&t.to_sexpr(), t.system).unwrap(), t);
    }

    #[test]
    fn sn_examples() {
        let omega = sn_typability_check(&p("(\\x. x x) (\\x. x x)"), 2000);
        assert!(omega.simple.is_none() && omega.psn.is_none() && omega.normal_form.is_none());
        let r = sn_typability_check(&p("(\\x.y) ((\\z. z z) (\\z. z z))"), 2000);
        assert!(r.psn.is_none() && r.normal_form.is_none());
        assert_eq!(lsub::explore_sn(&p("(\\x.y) ((\\z. z z) (\\z. z z))"), LSUB, 2000, usize::MAX).verdict, Verdict::NotSN);
        let r = sn_typability_check(&p("(\\x. x x) (\\y.y)"), 2000);
        assert_eq!(r.psn.unwrap().outcome, Outcome::Holds);
        assert_eq!(r.normal_form.unwrap().outcome, Outcome::Holds);
    }
}
