//! The rewrite engine: rule schemas, redex enumeration, reduction modulo
//! α and C, sub-normal forms, full composition and the bounded
//! strong-normalisation explorer.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::gen::{instance_rng, Rng8};
use crate::par::{self, Mode};
use crate::syntax::{
    self, chain_of, format_path, fresh_name, meta_occurrences, rename_free, subst,
    var_occurrences, Context, Name, Path, Term,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RuleId {
    B,
    R,
    Gc,
    RX,
    Beta,
    BetaP,
    BGc,
    Var,
    App1,
    App2,
    App3,
    Lamb,
    Comp1,
    Comp2,
    /// A permutation of independent substitutions, recorded as a pseudo-step.
    C,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Rule sets, listed in the priority used by the leftmost strategy.
pub const LSUB: &[RuleId] = &[RuleId::Gc, RuleId::R, RuleId::RX, RuleId::B];
pub const SUB: &[RuleId] = &[RuleId::Gc, RuleId::R, RuleId::RX];
pub const BETA: &[RuleId] = &[RuleId::Beta];

/// Rules whose redexes need the substitution in a fixed slot of its chain.
fn order_sensitive(rule: RuleId) -> bool {
    use RuleId::*;
    matches!(rule, Var | App1 | App2 | App3 | Lamb | Comp1 | Comp2)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub rule: RuleId,
    pub position: Path,
    /// For occurrence rules (R, RX, β_p): the occurrence, relative to `position`.
    pub occurrence: Option<Path>,
    pub before: Term,
    pub after: Term,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {} : {} ==> {}", self.rule, format_path(&self.position), self.before, self.after)
    }
}

#[derive(Serialize)]
struct StepJson<'a> {
    rule: RuleId,
    position: &'a [u8],
    occurrence: Option<&'a [u8]>,
    before: String,
    after: String,
}

impl Step {
    pub fn to_json(&self) -> impl Serialize + '_ {
        StepJson {
            rule: self.rule,
            position: &self.position,
            occurrence: self.occurrence.as_deref(),
            before: self.before.to_string(),
            after: self.after.to_string(),
        }
    }
}

/// Renames the binder `x` of a node whose body is `body` when `x` is free in
/// `guard_term` or equal to `other`.
fn freshen_binder(x: &Name, body: &Term, guard_term: &Term, other: Option<&Name>) -> (Name, Term) {
    if !guard_term.has_free(x) && other != Some(x) {
        return (x.clone(), body.clone());
    }
    let mut avoid = body.all_names();
    avoid.extend(guard_term.all_names());
    avoid.extend(other.cloned());
    avoid.insert(x.clone());
    let x2 = fresh_name(x, &avoid);
    let b2 = rename_free(body, &BTreeMap::from([(x.clone(), x2.clone())]));
    (x2, b2)
}

fn clo(b: Term, x: Name, u: Term) -> Term {
    Term::Closure(Arc::new(b), x, Arc::new(u))
}

fn plug_guarded(body: &Term, q: &[u8], x: &Name, u: &Term, content: &Term) -> Term {
    let (ctx, _) = Context::decompose(body, q).expect("occurrence path");
    let mut guard = u.free_vars();
    guard.insert(x.clone());
    ctx.with_guard(guard).plug(content)
}

/// `C⟦X_Δ[x/u]⟧_φ`: the support of `X_Δ` follows the renamed binders of `C`.
fn plug_meta_closure(body: &Term, q: &[u8], x: &Name, u: &Term) -> Term {
    let (ctx, m) = Context::decompose(body, q).expect("occurrence path");
    let mut guard = u.free_vars();
    guard.insert(x.clone());
    let mut names = m.all_names();
    names.extend(u.all_names());
    ctx.with_guard(guard).plug_with(names, &|map| clo(rename_free(&m, map), x.clone(), u.clone()))
}

fn prefixed(prefix: &[u8], q: &[u8]) -> Path {
    prefix.iter().chain(q).copied().collect()
}

/// Contracts `rule` at the root of `t`: every (occurrence, contractum) pair.
pub fn contract(t: &Term, rule: RuleId) -> Vec<(Option<Path>, Term)> {
    use RuleId::*;
    let one = |r: Term| vec![(None, r)];
    match (rule, t) {
        (B | Beta | BetaP | BGc, Term::App(f, u)) => {
            let Term::Abs(x, b) = &**f else { return vec![] };
            match rule {
                B => one(clo((**b).clone(), x.clone(), (**u).clone())),
                Beta => one(subst(b, x, u)),
                BGc if !b.has_free(x) => one((**b).clone()),
                BetaP => {
                    let (x, b) = freshen_binder(x, b, u, None);
                    var_occurrences(&b, &x)
                        .into_iter()
                        .map(|q| {
                            let nb = plug_guarded(&b, &q, &x, u, u);
                            let r = Term::App(Arc::new(Term::Abs(x.clone(), Arc::new(nb))), u.clone());
                            (Some(prefixed(&[0, 0], &q)), r)
                        })
                        .collect()
                }
                _ => vec![],
            }
        }
        (Gc, Term::Closure(b, x, _)) if !b.has_free(x) => one((**b).clone()),
        (R, Term::Closure(b, x, u)) => {
            let (x, b) = freshen_binder(x, b, u, None);
            var_occurrences(&b, &x)
                .into_iter()
                .map(|q| {
                    let nb = plug_guarded(&b, &q, &x, u, u);
                    (Some(prefixed(&[0], &q)), clo(nb, x.clone(), (**u).clone()))
                })
                .collect()
        }
        (RX, Term::Closure(b, x, u)) => {
            let (x, b) = freshen_binder(x, b, u, None);
            meta_occurrences(&b, &x)
                .into_iter()
                .filter_map(|q| {
                    let (ctx, _) = Context::decompose(&b, &q).expect("occurrence path");
                    if ctx.is_substitution_chain() {
                        return None;
                    }
                    let nb = plug_meta_closure(&b, &q, &x, u);
                    Some((Some(prefixed(&[0], &q)), clo(nb, x.clone(), (**u).clone())))
                })
                .collect()
        }
        (Var, Term::Closure(b, x, u)) if matches!(&**b, Term::Var(y) if y == x) => one((**u).clone()),
        (App1 | App2 | App3, Term::Closure(b, x, v)) => {
            let Term::App(p, q) = &**b else { return vec![] };
            let (inp, inq) = (p.has_free(x), q.has_free(x));
            let wrap = |s: &Arc<Term>| Arc::new(clo((**s).clone(), x.clone(), (**v).clone()));
            match (rule, inp, inq) {
                (App1, true, true) => one(Term::App(wrap(p), wrap(q))),
                (App2, false, true) => one(Term::App(p.clone(), wrap(q))),
                (App3, true, false) => one(Term::App(wrap(p), q.clone())),
                _ => vec![],
            }
        }
        (Lamb, Term::Closure(b, x, v)) => {
            let Term::Abs(y, body) = &**b else { return vec![] };
            let (y, body) = freshen_binder(y, body, v, Some(x));
            one(Term::Abs(y, Arc::new(clo(body, x.clone(), (**v).clone()))))
        }
        (Comp1 | Comp2, Term::Closure(inner, y, v)) => {
            let Term::Closure(t0, x, u) = &**inner else { return vec![] };
            if !u.has_free(y) {
                return vec![];
            }
            let (x, t0) = freshen_binder(x, t0, v, Some(y));
            match (rule, t0.has_free(y)) {
                (Comp1, true) => one(clo(
                    clo(t0, y.clone(), (**v).clone()),
                    x,
                    clo((**u).clone(), y.clone(), (**v).clone()),
                )),
                (Comp2, false) => one(clo(t0, x, clo((**u).clone(), y.clone(), (**v).clone()))),
                _ => vec![],
            }
        }
        _ => vec![],
    }
}

/// All redexes of the given rules in `t`, leftmost-outermost first; at one
/// position rules follow the order of `rules`.
pub fn redexes(t: &Term, rules: &[RuleId]) -> Vec<Step> {
    let mut out = Vec::new();
    for (path, sub) in t.positions() {
        for &rule in rules {
            for (occurrence, r) in contract(sub, rule) {
                out.push(Step {
                    rule,
                    after: t.replace_at(&path, r),
                    position: path.clone(),
                    occurrence,
                    before: t.clone(),
                });
            }
        }
    }
    out
}

/// Replays one step: the contractum of `rule` at `position` selected by `occurrence`.
pub fn replay(before: &Term, rule: RuleId, position: &[u8], occurrence: Option<&[u8]>) -> Option<Term> {
    let sub = before.subterm(position)?;
    contract(sub, rule)
        .into_iter()
        .find(|(o, _)| o.as_deref() == occurrence)
        .map(|(_, r)| before.replace_at(position, r))
}

pub fn es_canonical(t: &Term) -> Term {
    syntax::canonical_modulo_c(t)
}

/// Equality modulo α and C.
pub fn c_equal(a: &Term, b: &Term) -> bool {
    es_canonical(a) == es_canonical(b)
}

/// The items of a chain may be listed outermost-first in `order` when every
/// item stays inside the items binding its free variables.
fn linear_extensions(items: &[(Name, &Term)], limit: usize) -> Vec<Vec<usize>> {
    let fvs: Vec<BTreeSet<Name>> = items.iter().map(|(_, u)| u.free_vars()).collect();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let remaining: Vec<usize> = (0..items.len()).collect();
    extend(items, &fvs, &remaining, &mut cur, &mut out, limit);
    out
}

fn extend(
    items: &[(Name, &Term)],
    fvs: &[BTreeSet<Name>],
    remaining: &[usize],
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    limit: usize,
) {
    if out.len() >= limit {
        return;
    }
    if remaining.is_empty() {
        out.push(cur.clone());
        return;
    }
    for &i in remaining {
        if remaining.iter().any(|&j| j < i && fvs[i].contains(&items[j].0)) {
            continue;
        }
        let rest: Vec<usize> = remaining.iter().copied().filter(|&j| j != i).collect();
        cur.push(i);
        extend(items, fvs, &rest, cur, out, limit);
        cur.pop();
    }
}

/// Cap on the reorderings tried per chain.
const CHAIN_ORDER_LIMIT: usize = 5040;

fn is_chain_root(t: &Term, path: &[u8]) -> bool {
    match path.split_last() {
        None => true,
        Some((&last, parent)) => {
            !(last == 0 && matches!(t.subterm(parent), Some(Term::Closure(..))))
        }
    }
}

/// `t` followed by every term obtained from `t` by reordering one maximal
/// substitution chain. `t` should satisfy the Barendregt convention.
pub fn chain_variants(t: &Term) -> Vec<Term> {
    let mut out = vec![t.clone()];
    for (path, sub) in t.positions() {
        if !matches!(sub, Term::Closure(..)) || !is_chain_root(t, &path) {
            continue;
        }
        let (items, base) = chain_of(sub);
        if items.len() < 2 {
            continue;
        }
        for order in linear_extensions(&items, CHAIN_ORDER_LIMIT) {
            if order.iter().enumerate().all(|(k, &i)| k == i) {
                continue;
            }
            let mut rebuilt = base.clone();
            for &i in order.iter().rev() {
                rebuilt = clo(rebuilt, items[i].0.clone(), items[i].1.clone());
            }
            out.push(t.replace_at(&path, rebuilt));
        }
    }
    out
}

/// The full E_s-class of `t` as explicit members (α fixed), by closing under
/// adjacent swaps. Exponential; meant as a test oracle on small terms.
pub fn es_class(t: &Term, limit: usize) -> Vec<Term> {
    let start = syntax::canonicalize_alpha(t);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = vec![start];
    while let Some(cur) = queue.pop() {
        if seen.len() >= limit {
            break;
        }
        for (path, sub) in cur.positions() {
            if let Term::Closure(inner, y, v) = sub {
                if let Term::Closure(b, x, u) = &**inner {
                    if !u.has_free(y) && !v.has_free(x) && x != y {
                        let swapped = clo(clo((**b).clone(), y.clone(), (**v).clone()), x.clone(), (**u).clone());
                        let next = cur.replace_at(&path, swapped);
                        if seen.insert(next.clone()) {
                            queue.push(next);
                        }
                    }
                }
            }
        }
    }
    seen.into_iter().collect()
}

/// Candidate steps modulo E_s: redexes of every single-chain reordering for
/// order-sensitive rules, of the term itself otherwise.
pub fn steps_modulo(t: &Term, rules: &[RuleId]) -> Vec<Step> {
    if !rules.iter().any(|&r| order_sensitive(r)) {
        return redexes(t, rules);
    }
    let base = syntax::barendregt(t);
    let sensitive: Vec<RuleId> = rules.iter().copied().filter(|&r| order_sensitive(r)).collect();
    let plain: Vec<RuleId> = rules.iter().copied().filter(|&r| !order_sensitive(r)).collect();
    let mut out = redexes(&base, &plain);
    for v in chain_variants(&base) {
        out.extend(redexes(&v, &sensitive));
    }
    out
}

/// All one-step reducts modulo E_s, as sorted, deduplicated canonical terms.
pub fn step_modulo(t: &Term, rules: &[RuleId]) -> Vec<Term> {
    let set: BTreeSet<Term> = steps_modulo(t, rules).iter().map(|s| es_canonical(&s.after)).collect();
    set.into_iter().collect()
}

/// Same as [`step_modulo`] but enumerating the whole E_s-class; test oracle.
pub fn step_modulo_bruteforce(t: &Term, rules: &[RuleId]) -> Vec<Term> {
    let mut set = BTreeSet::new();
    for m in es_class(t, 100_000) {
        for s in redexes(&m, rules) {
            set.insert(es_canonical(&s.after));
        }
    }
    set.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// First redex in leftmost-outermost order, rule order as given.
    LeftmostOutermost,
    /// Uniform choice among all candidate steps modulo E_s.
    Random(u64),
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub start: Term,
    pub steps: Vec<Step>,
    /// True when the last term has no redex left.
    pub normal: bool,
}

impl Trace {
    pub fn last(&self) -> &Term {
        self.steps.last().map(|s| &s.after).unwrap_or(&self.start)
    }
}

pub fn reduce(t: &Term, rules: &[RuleId], strategy: Strategy, max_steps: usize) -> Trace {
    let mut rng: Option<Rng8> = match strategy {
        Strategy::Random(seed) => Some(instance_rng(seed, 0)),
        Strategy::LeftmostOutermost => None,
    };
    let mut cur = t.clone();
    let mut steps = Vec::new();
    loop {
        let mut cands = steps_modulo(&cur, rules);
        if cands.is_empty() {
            return Trace { start: t.clone(), steps, normal: true };
        }
        if steps.len() >= max_steps {
            return Trace { start: t.clone(), steps, normal: false };
        }
        let k = match rng.as_mut() {
            Some(r) => r.gen_range(0..cands.len()),
            None => 0,
        };
        let step = cands.swap_remove(k);
        cur = step.after.clone();
        steps.push(step);
    }
}

/// The sub-normal form by rewriting, as an E_s-canonical term.
pub fn normalize_sub_with(t: &Term, strategy: Strategy) -> Term {
    let tr = reduce(t, SUB, strategy, usize::MAX);
    es_canonical(tr.last())
}

pub fn normalize_sub(t: &Term) -> Term {
    normalize_sub_with(t, Strategy::LeftmostOutermost)
}

/// The sub-normal form computed compositionally, `sub(t[x/u]) = sub(t){x/sub(u)}`.
pub fn snf(t: &Term) -> Term {
    es_canonical(&snf_rec(&syntax::canonicalize_alpha(t)))
}

fn snf_rec(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Meta(..) => t.clone(),
        Term::Abs(x, b) => Term::Abs(x.clone(), Arc::new(snf_rec(b))),
        Term::App(a, b) => Term::App(Arc::new(snf_rec(a)), Arc::new(snf_rec(b))),
        Term::Closure(b, x, u) => subst(&snf_rec(b), x, &snf_rec(u)),
    }
}

/// The shape of sub-normal forms: `x`, `t u`, `λy.t` with snf parts, or
/// `X_Δ[x1/u1]…[xn/un]` with each `ui` in snf, `xi ∈ Δ`, and no `xi` free in
/// any `uj`.
pub fn is_snf_shape(t: &Term) -> bool {
    shape_rec(&syntax::canonicalize_alpha(t))
}

fn shape_rec(t: &Term) -> bool {
    match t {
        Term::Var(_) | Term::Meta(..) => true,
        Term::Abs(_, b) => shape_rec(b),
        Term::App(a, b) => shape_rec(a) && shape_rec(b),
        Term::Closure(..) => {
            let (items, base) = chain_of(t);
            let Term::Meta(_, delta) = base else { return false };
            items.iter().all(|(x, u)| {
                delta.contains(x) && shape_rec(u) && items.iter().all(|(_, v)| !v.has_free(x))
            })
        }
    }
}

pub fn is_sub_normal(t: &Term) -> bool {
    redexes(&syntax::canonicalize_alpha(t), SUB).is_empty()
}

pub fn full_composition_check(t: &Term, x: &Name, u: &Term) -> bool {
    let lhs = normalize_sub(&clo(t.clone(), x.clone(), u.clone()));
    let rhs = normalize_sub(&subst(t, x, u));
    lhs == rhs
}

// ---------------------------------------------------------------------------
// Strong normalisation explorer

/// Result of a bounded check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Holds,
    Fails,
    /// A bound was hit before the question was settled.
    Inconclusive,
}

impl Outcome {
    pub fn and(self, other: Outcome) -> Outcome {
        use Outcome::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    SN,
    NotSN,
    BoundExceeded,
}

#[derive(Clone, Debug)]
pub struct SnReport {
    pub verdict: Verdict,
    /// Longest reduction sequence, when SN.
    pub max_length: Option<usize>,
    pub distinct_states: usize,
    /// A state on a cycle (NotSN) or an unexplored frontier state (BoundExceeded).
    pub witness: Option<Term>,
}

/// A reduction graph over E_s-canonical states, explored breadth first.
#[derive(Clone, Debug)]
pub struct Graph {
    pub states: Vec<Term>,
    /// Successors of expanded states; `None` when a state was not expanded.
    pub edges: Vec<Option<Vec<usize>>>,
    pub complete: bool,
}

impl Graph {
    pub fn explore(t: &Term, rules: &[RuleId], state_bound: usize, depth_bound: usize) -> Graph {
        Graph::explore_with(t, rules, state_bound, depth_bound, Mode::default())
    }

    pub fn explore_with(
        t: &Term,
        rules: &[RuleId],
        state_bound: usize,
        depth_bound: usize,
        mode: Mode,
    ) -> Graph {
        let root = es_canonical(t);
        let mut index: HashMap<Term, usize> = HashMap::from([(root.clone(), 0)]);
        let mut states = vec![root];
        let mut edges: Vec<Option<Vec<usize>>> = vec![None];
        let mut frontier = vec![0usize];
        let mut depth = 0;
        let mut complete = true;
        while !frontier.is_empty() {
            if depth >= depth_bound || states.len() > state_bound {
                complete = false;
                break;
            }
            let succs = par::map(mode, &frontier, |&i| step_modulo(&states[i], rules));
            let mut next = Vec::new();
            let mut revisits = false;
            for (&i, succ) in frontier.iter().zip(succs) {
                let mut ids = Vec::with_capacity(succ.len());
                for s in succ {
                    let id = match index.get(&s) {
                        Some(&id) => {
                            revisits = true;
                            id
                        }
                        None => {
                            let id = states.len();
                            index.insert(s.clone(), id);
                            states.push(s);
                            edges.push(None);
                            next.push(id);
                            id
                        }
                    };
                    ids.push(id);
                }
                edges[i] = Some(ids);
            }
            frontier = next;
            depth += 1;
            // a new cycle needs an edge into an already known state
            if revisits && !frontier.is_empty() {
                let g = Graph { states, edges, complete: false };
                if g.find_cycle().is_some() {
                    return g;
                }
                (states, edges) = (g.states, g.edges);
            }
        }
        Graph { states, edges, complete }
    }

    /// A state lying on a cycle among expanded states.
    pub fn find_cycle(&self) -> Option<usize> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut color = vec![0u8; self.states.len()];
        for start in 0..self.states.len() {
            if color[start] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            color[start] = 1;
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                let succ = self.edges[v].as_deref().unwrap_or(&[]);
                if *k < succ.len() {
                    let w = succ[*k];
                    *k += 1;
                    match color[w] {
                        0 => {
                            color[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => return Some(w),
                        _ => {}
                    }
                } else {
                    color[v] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Longest path from the root; the graph must be complete and acyclic.
    pub fn longest_path(&self) -> usize {
        let n = self.states.len();
        let mut memo: Vec<Option<usize>> = vec![None; n];
        // iterative post-order
        let mut stack = vec![(0usize, false)];
        while let Some((v, done)) = stack.pop() {
            if memo[v].is_some() {
                continue;
            }
            let succ = self.edges[v].as_deref().unwrap_or(&[]);
            if done {
                memo[v] = Some(succ.iter().map(|&w| memo[w].unwrap_or(0) + 1).max().unwrap_or(0));
            } else {
                stack.push((v, true));
                for &w in succ {
                    if memo[w].is_none() {
                        stack.push((w, false));
                    }
                }
            }
        }
        memo[0].unwrap_or(0)
    }

    /// Expanded states without successors.
    pub fn normal_forms(&self) -> Vec<&Term> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.as_ref().is_some_and(|s| s.is_empty()))
            .map(|(i, _)| &self.states[i])
            .collect()
    }

    pub fn report(&self) -> SnReport {
        if let Some(w) = self.find_cycle() {
            return SnReport {
                verdict: Verdict::NotSN,
                max_length: None,
                distinct_states: self.states.len(),
                witness: Some(self.states[w].clone()),
            };
        }
        if !self.complete {
            let frontier = self.edges.iter().position(|e| e.is_none()).unwrap_or(0);
            return SnReport {
                verdict: Verdict::BoundExceeded,
                max_length: None,
                distinct_states: self.states.len(),
                witness: Some(self.states[frontier].clone()),
            };
        }
        SnReport {
            verdict: Verdict::SN,
            max_length: Some(self.longest_path()),
            distinct_states: self.states.len(),
            witness: None,
        }
    }
}

pub fn explore_sn(t: &Term, rules: &[RuleId], state_bound: usize, depth_bound: usize) -> SnReport {
    Graph::explore(t, rules, state_bound, depth_bound).report()
}
