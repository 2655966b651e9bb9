//! Terms and metaterms: representation, parsing, printing, free variables,
//! implicit substitution, one-hole contexts and α-canonical forms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A variable, binder or metavariable name.
///
/// Marked names (the binders of idle substitutions) start with `#`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Name {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_marked(&self) -> bool {
        self.0.starts_with('#')
    }
}

impl serde::Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Child indices from the root: `Abs` body is 0, `App` function/argument are
/// 0/1, `Closure` body/substituted term are 0/1.
pub type Path = Vec<u8>;

pub fn format_path(p: &[u8]) -> String {
    if p.is_empty() {
        return "ε".to_string();
    }
    p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

/// A Λ-metaterm.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Name),
    Abs(Name, Arc<Term>),
    App(Arc<Term>, Arc<Term>),
    /// `t[x/u]`
    Closure(Arc<Term>, Name, Arc<Term>),
    /// `X_Δ`, support kept sorted and duplicate-free.
    Meta(Name, Vec<Name>),
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(Name::new(x))
    }

    pub fn abs(x: &str, body: Term) -> Term {
        Term::Abs(Name::new(x), Arc::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Arc::new(f), Arc::new(a))
    }

    pub fn clo(body: Term, x: &str, u: Term) -> Term {
        Term::Closure(Arc::new(body), Name::new(x), Arc::new(u))
    }

    pub fn meta(id: &str, support: &[&str]) -> Term {
        let set: BTreeSet<Name> = support.iter().map(|s| Name::new(s)).collect();
        Term::Meta(Name::new(id), set.into_iter().collect())
    }

    /// Number of constructors.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Meta(..) => 1,
            Term::Abs(_, b) => 1 + b.size(),
            Term::App(a, b) => 1 + a.size() + b.size(),
            Term::Closure(b, _, u) => 1 + b.size() + u.size(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut Vec::new(), &mut out);
        out
    }

    fn collect_fv(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Meta(_, d) => {
                for x in d {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
            }
            Term::Abs(x, b) => {
                bound.push(x.clone());
                b.collect_fv(bound, out);
                bound.pop();
            }
            Term::App(a, b) => {
                a.collect_fv(bound, out);
                b.collect_fv(bound, out);
            }
            Term::Closure(b, x, u) => {
                bound.push(x.clone());
                b.collect_fv(bound, out);
                bound.pop();
                u.collect_fv(bound, out);
            }
        }
    }

    pub fn has_free(&self, x: &Name) -> bool {
        match self {
            Term::Var(y) => y == x,
            Term::Meta(_, d) => d.contains(x),
            Term::Abs(y, b) => y != x && b.has_free(x),
            Term::App(a, b) => a.has_free(x) || b.has_free(x),
            Term::Closure(b, y, u) => (y != x && b.has_free(x)) || u.has_free(x),
        }
    }

    /// Every name occurring anywhere: free, bound, binder or support.
    pub fn all_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Meta(_, d) => out.extend(d.iter().cloned()),
            Term::Abs(x, b) => {
                out.insert(x.clone());
                b.collect_names(out);
            }
            Term::App(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            Term::Closure(b, x, u) => {
                out.insert(x.clone());
                b.collect_names(out);
                u.collect_names(out);
            }
        }
    }

    pub fn has_meta(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Meta(..) => true,
            Term::Abs(_, b) => b.has_meta(),
            Term::App(a, b) | Term::Closure(a, _, b) => a.has_meta() || b.has_meta(),
        }
    }

    pub fn has_closure(&self) -> bool {
        match self {
            Term::Var(_) | Term::Meta(..) => false,
            Term::Closure(..) => true,
            Term::Abs(_, b) => b.has_closure(),
            Term::App(a, b) => a.has_closure() || b.has_closure(),
        }
    }

    /// A pure λ-term: no closures and no metavariables.
    pub fn is_pure(&self) -> bool {
        !self.has_meta() && !self.has_closure()
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Meta(..) => vec![],
            Term::Abs(_, b) => vec![b],
            Term::App(a, b) | Term::Closure(a, _, b) => vec![a, b],
        }
    }

    pub fn subterm(&self, path: &[u8]) -> Option<&Term> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i as usize)?;
        }
        Some(cur)
    }

    /// Structural replacement of the subterm at `path`.
    pub fn replace_at(&self, path: &[u8], new: Term) -> Term {
        let Some((&i, rest)) = path.split_first() else {
            return new;
        };
        match (self, i) {
            (Term::Abs(x, b), 0) => Term::Abs(x.clone(), Arc::new(b.replace_at(rest, new))),
            (Term::App(a, b), 0) => Term::App(Arc::new(a.replace_at(rest, new)), b.clone()),
            (Term::App(a, b), 1) => Term::App(a.clone(), Arc::new(b.replace_at(rest, new))),
            (Term::Closure(b, x, u), 0) => {
                Term::Closure(Arc::new(b.replace_at(rest, new)), x.clone(), u.clone())
            }
            (Term::Closure(b, x, u), 1) => {
                Term::Closure(b.clone(), x.clone(), Arc::new(u.replace_at(rest, new)))
            }
            _ => panic!("replace_at: invalid path"),
        }
    }

    /// All subterm positions in pre-order (leftmost-outermost first).
    pub fn positions(&self) -> Vec<(Path, &Term)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk(&mut path, &mut out);
        out
    }

    fn walk<'a>(&'a self, path: &mut Path, out: &mut Vec<(Path, &'a Term)>) {
        out.push((path.clone(), self));
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i as u8);
            c.walk(path, out);
            path.pop();
        }
    }
}

pub fn free_vars(t: &Term) -> BTreeSet<Name> {
    t.free_vars()
}

/// First name `stem1, stem2, …` (stem = `base` without trailing digits) not in `avoid`.
pub fn fresh_name(base: &Name, avoid: &BTreeSet<Name>) -> Name {
    let stem = base.as_str().trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = match stem {
        "" => "v",
        "#" => "#v",
        s => s,
    };
    (1..)
        .map(|k| Name::new(&format!("{stem}{k}")))
        .find(|n| !avoid.contains(n))
        .expect("unbounded")
}

/// Renames free variables according to `map`. Targets must be fresh for `t`.
/// Metavariable supports are renamed along with the variables.
pub fn rename_free(t: &Term, map: &BTreeMap<Name, Name>) -> Term {
    if map.is_empty() {
        return t.clone();
    }
    match t {
        Term::Var(x) => match map.get(x) {
            Some(y) => Term::Var(y.clone()),
            None => t.clone(),
        },
        Term::Meta(id, d) => {
            let set: BTreeSet<Name> = d.iter().map(|x| map.get(x).unwrap_or(x).clone()).collect();
            Term::Meta(id.clone(), set.into_iter().collect())
        }
        Term::Abs(x, b) => Term::Abs(x.clone(), Arc::new(rename_free(b, &without(map, x)))),
        Term::App(a, b) => Term::App(Arc::new(rename_free(a, map)), Arc::new(rename_free(b, map))),
        Term::Closure(b, x, u) => Term::Closure(
            Arc::new(rename_free(b, &without(map, x))),
            x.clone(),
            Arc::new(rename_free(u, map)),
        ),
    }
}

fn without(map: &BTreeMap<Name, Name>, x: &Name) -> BTreeMap<Name, Name> {
    if map.contains_key(x) {
        let mut m = map.clone();
        m.remove(x);
        m
    } else {
        map.clone()
    }
}

/// Implicit capture-avoiding substitution `t{x/v}`.
///
/// On a metavariable with `x ∈ Δ` the substitution is suspended as `X_Δ[x/v]`.
pub fn subst(t: &Term, x: &Name, v: &Term) -> Term {
    let fvv = v.free_vars();
    subst_rec(t, x, v, &fvv)
}

fn subst_rec(t: &Term, x: &Name, v: &Term, fvv: &BTreeSet<Name>) -> Term {
    if !t.has_free(x) {
        return t.clone();
    }
    match t {
        Term::Var(_) => v.clone(),
        Term::Meta(..) => Term::Closure(Arc::new(t.clone()), x.clone(), Arc::new(v.clone())),
        Term::App(a, b) => Term::App(
            Arc::new(subst_rec(a, x, v, fvv)),
            Arc::new(subst_rec(b, x, v, fvv)),
        ),
        Term::Abs(y, b) => {
            let (y, b) = avoid_capture(y, b, x, v, fvv);
            Term::Abs(y, Arc::new(subst_rec(&b, x, v, fvv)))
        }
        Term::Closure(b, y, u) => {
            let u2 = subst_rec(u, x, v, fvv);
            if y == x || !b.has_free(x) {
                return Term::Closure(b.clone(), y.clone(), Arc::new(u2));
            }
            let (y, b) = avoid_capture(y, b, x, v, fvv);
            Term::Closure(Arc::new(subst_rec(&b, x, v, fvv)), y, Arc::new(u2))
        }
    }
}

fn avoid_capture(y: &Name, b: &Term, x: &Name, v: &Term, fvv: &BTreeSet<Name>) -> (Name, Term) {
    if !fvv.contains(y) {
        return (y.clone(), b.clone());
    }
    let mut avoid = b.all_names();
    avoid.extend(v.all_names());
    avoid.insert(x.clone());
    let y2 = fresh_name(y, &avoid);
    let map = BTreeMap::from([(y.clone(), y2.clone())]);
    (y2, rename_free(b, &map))
}

/// One frame of a one-hole context; the hole sits in the named position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Hole in function position; holds the argument.
    AppL(Arc<Term>),
    /// Hole in argument position; holds the function.
    AppR(Arc<Term>),
    Abs(Name),
    /// Hole in the body of `□[x/u]`.
    ClosL(Name, Arc<Term>),
    /// Hole in the substituted term of `t[x/□]`.
    ClosR(Arc<Term>, Name),
}

/// A one-hole context `C` together with the guard set φ of `C⟦u⟧_φ`.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub frames: Vec<Frame>,
    pub guard: BTreeSet<Name>,
}

impl Context {
    /// Splits `t` at `path` into a context (empty guard) and the subterm there.
    pub fn decompose(t: &Term, path: &[u8]) -> Option<(Context, Term)> {
        let mut frames = Vec::new();
        let mut cur = t;
        for &i in path {
            cur = match (cur, i) {
                (Term::Abs(x, b), 0) => {
                    frames.push(Frame::Abs(x.clone()));
                    b
                }
                (Term::App(a, b), 0) => {
                    frames.push(Frame::AppL(b.clone()));
                    a
                }
                (Term::App(a, b), 1) => {
                    frames.push(Frame::AppR(a.clone()));
                    b
                }
                (Term::Closure(b, x, u), 0) => {
                    frames.push(Frame::ClosL(x.clone(), u.clone()));
                    b
                }
                (Term::Closure(b, x, u), 1) => {
                    frames.push(Frame::ClosR(b.clone(), x.clone()));
                    u
                }
                _ => return None,
            };
        }
        Some((Context { frames, guard: BTreeSet::new() }, cur.clone()))
    }

    pub fn with_guard(mut self, guard: BTreeSet<Name>) -> Context {
        self.guard = guard;
        self
    }

    /// True when the context is `□[y1/v1]…[yn/vn]`, n ≥ 0.
    pub fn is_substitution_chain(&self) -> bool {
        self.frames.iter().all(|f| matches!(f, Frame::ClosL(..)))
    }

    /// Names bound above the hole, outermost first.
    pub fn binders(&self) -> Vec<Name> {
        self.frames
            .iter()
            .filter_map(|f| match f {
                Frame::Abs(x) | Frame::ClosL(x, _) => Some(x.clone()),
                _ => None,
            })
            .collect()
    }

    /// `C⟦u⟧_φ`: binders of the context that would capture a guard name are
    /// renamed first; `u` itself is never renamed.
    pub fn plug(&self, u: &Term) -> Term {
        self.plug_with(u.all_names(), &|_| u.clone())
    }

    /// Like [`Context::plug`], with the hole content built from the renaming
    /// of the context binders in force at the hole; `names` are the names the
    /// content may use.
    pub fn plug_with(&self, names: BTreeSet<Name>, fill: &dyn Fn(&BTreeMap<Name, Name>) -> Term) -> Term {
        let mut avoid = names;
        avoid.extend(self.guard.iter().cloned());
        for f in &self.frames {
            match f {
                Frame::AppL(t) | Frame::AppR(t) => avoid.extend(t.all_names()),
                Frame::Abs(x) => {
                    avoid.insert(x.clone());
                }
                Frame::ClosL(x, t) | Frame::ClosR(t, x) => {
                    avoid.insert(x.clone());
                    avoid.extend(t.all_names());
                }
            }
        }
        self.plug_from(0, &BTreeMap::new(), fill, &mut avoid)
    }

    fn plug_from(
        &self,
        i: usize,
        map: &BTreeMap<Name, Name>,
        fill: &dyn Fn(&BTreeMap<Name, Name>) -> Term,
        avoid: &mut BTreeSet<Name>,
    ) -> Term {
        let Some(frame) = self.frames.get(i) else {
            return fill(map);
        };
        match frame {
            Frame::AppL(a) => {
                let a = rename_free(a, map);
                Term::App(Arc::new(self.plug_from(i + 1, map, fill, avoid)), Arc::new(a))
            }
            Frame::AppR(f) => {
                let f = rename_free(f, map);
                Term::App(Arc::new(f), Arc::new(self.plug_from(i + 1, map, fill, avoid)))
            }
            Frame::Abs(x) => {
                let (x2, inner) = self.bind(x, map, avoid);
                Term::Abs(x2, Arc::new(self.plug_from(i + 1, &inner, fill, avoid)))
            }
            Frame::ClosL(x, s) => {
                let s = rename_free(s, map);
                let (x2, inner) = self.bind(x, map, avoid);
                Term::Closure(Arc::new(self.plug_from(i + 1, &inner, fill, avoid)), x2, Arc::new(s))
            }
            Frame::ClosR(b, x) => {
                let b = rename_free(b, &without(map, x));
                Term::Closure(Arc::new(b), x.clone(), Arc::new(self.plug_from(i + 1, map, fill, avoid)))
            }
        }
    }

    fn bind(
        &self,
        x: &Name,
        map: &BTreeMap<Name, Name>,
        avoid: &mut BTreeSet<Name>,
    ) -> (Name, BTreeMap<Name, Name>) {
        let mut inner = without(map, x);
        if self.guard.contains(x) {
            let x2 = fresh_name(x, avoid);
            avoid.insert(x2.clone());
            inner.insert(x.clone(), x2.clone());
            (x2, inner)
        } else {
            (x.clone(), inner)
        }
    }
}

/// Paths (relative to `t`) of the free occurrences of variable `x`.
pub fn var_occurrences(t: &Term, x: &Name) -> Vec<Path> {
    let mut out = Vec::new();
    occ_rec(t, x, &mut Vec::new(), &mut out, &|s, x| matches!(s, Term::Var(y) if y == x));
    out
}

/// Paths of metavariable occurrences whose support contains a free `x`.
pub fn meta_occurrences(t: &Term, x: &Name) -> Vec<Path> {
    let mut out = Vec::new();
    occ_rec(t, x, &mut Vec::new(), &mut out, &|s, x| {
        matches!(s, Term::Meta(_, d) if d.contains(x))
    });
    out
}

fn occ_rec(
    t: &Term,
    x: &Name,
    path: &mut Path,
    out: &mut Vec<Path>,
    pred: &dyn Fn(&Term, &Name) -> bool,
) {
    if pred(t, x) {
        out.push(path.clone());
        return;
    }
    match t {
        Term::Var(_) | Term::Meta(..) => {}
        Term::Abs(y, b) => {
            if y != x {
                path.push(0);
                occ_rec(b, x, path, out, pred);
                path.pop();
            }
        }
        Term::App(a, b) => {
            path.push(0);
            occ_rec(a, x, path, out, pred);
            path.pop();
            path.push(1);
            occ_rec(b, x, path, out, pred);
            path.pop();
        }
        Term::Closure(b, y, u) => {
            if y != x {
                path.push(0);
                occ_rec(b, x, path, out, pred);
                path.pop();
            }
            path.push(1);
            occ_rec(u, x, path, out, pred);
            path.pop();
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical forms

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Ref {
    Bound(u32),
    Free(Name),
}

/// Nameless image of a term; bound variables are de Bruijn levels.
/// Closures store the substituted term first so that, along a chain, the
/// outermost argument dominates the order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Nl {
    Var(Ref),
    Meta(Name, Vec<Ref>),
    Abs(Box<Nl>),
    App(Box<Nl>, Box<Nl>),
    Clo(Box<Nl>, Box<Nl>),
}

fn lookup(env: &[Name], x: &Name) -> Ref {
    match env.iter().rposition(|y| y == x) {
        Some(l) => Ref::Bound(l as u32),
        None => Ref::Free(x.clone()),
    }
}

fn to_nl(t: &Term, env: &mut Vec<Name>, modulo_c: bool) -> Nl {
    match t {
        Term::Var(x) => Nl::Var(lookup(env, x)),
        Term::Meta(id, d) => {
            let mut refs: Vec<Ref> = d.iter().map(|x| lookup(env, x)).collect();
            refs.sort();
            Nl::Meta(id.clone(), refs)
        }
        Term::Abs(x, b) => {
            env.push(x.clone());
            let nb = to_nl(b, env, modulo_c);
            env.pop();
            Nl::Abs(Box::new(nb))
        }
        Term::App(a, b) => Nl::App(
            Box::new(to_nl(a, env, modulo_c)),
            Box::new(to_nl(b, env, modulo_c)),
        ),
        Term::Closure(b, x, u) if !modulo_c => {
            let nu = to_nl(u, env, modulo_c);
            env.push(x.clone());
            let nb = to_nl(b, env, modulo_c);
            env.pop();
            Nl::Clo(Box::new(nu), Box::new(nb))
        }
        Term::Closure(..) => {
            let (items, base) = chain_of(t);
            let fvs: Vec<BTreeSet<Name>> = items.iter().map(|(_, u)| u.free_vars()).collect();
            let remaining: Vec<usize> = (0..items.len()).collect();
            least_chain(&items, &fvs, base, &remaining, env)
        }
    }
}

/// Splits a maximal substitution chain into its items (outermost first) and
/// its base term.
pub fn chain_of(t: &Term) -> (Vec<(Name, &Term)>, &Term) {
    let mut items = Vec::new();
    let mut cur = t;
    while let Term::Closure(b, x, u) = cur {
        items.push((x.clone(), &**u));
        cur = b;
    }
    (items, cur)
}

/// Least nameless image over all C-reorderings of a chain. Requires the
/// chain's binders to be distinct from each other and from outer names.
fn least_chain(
    items: &[(Name, &Term)],
    fvs: &[BTreeSet<Name>],
    base: &Term,
    remaining: &[usize],
    env: &mut Vec<Name>,
) -> Nl {
    if remaining.is_empty() {
        return to_nl(base, env, true);
    }
    // An item may be placed outermost when no other remaining item that is
    // currently outside it binds one of its free variables.
    let available: Vec<usize> = remaining
        .iter()
        .copied()
        .filter(|&i| !remaining.iter().any(|&j| j < i && fvs[i].contains(&items[j].0)))
        .collect();
    let keyed: Vec<(usize, Nl)> = available
        .iter()
        .map(|&i| (i, to_nl(items[i].1, env, true)))
        .collect();
    let min = keyed.iter().map(|(_, k)| k).min().expect("nonempty").clone();
    let mut tried_unused = false;
    let mut best: Option<Nl> = None;
    for (i, key) in keyed.into_iter().filter(|(_, k)| *k == min) {
        let x = &items[i].0;
        let used = base.has_free(x)
            || remaining.iter().any(|&j| j != i && fvs[j].contains(x));
        if !used {
            // Unused binders with equal arguments are interchangeable.
            if tried_unused {
                continue;
            }
            tried_unused = true;
        }
        let rest: Vec<usize> = remaining.iter().copied().filter(|&j| j != i).collect();
        env.push(x.clone());
        let body = least_chain(items, fvs, base, &rest, env);
        env.pop();
        let cand = Nl::Clo(Box::new(key), Box::new(body));
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    }
    best.expect("at least one candidate")
}

fn from_nl(n: &Nl, env: &mut Vec<Name>, counter: &mut usize, free: &BTreeSet<Name>) -> Term {
    let resolve = |r: &Ref, env: &Vec<Name>| match r {
        Ref::Bound(l) => env[*l as usize].clone(),
        Ref::Free(x) => x.clone(),
    };
    match n {
        Nl::Var(r) => Term::Var(resolve(r, env)),
        Nl::Meta(id, refs) => {
            let set: BTreeSet<Name> = refs.iter().map(|r| resolve(r, env)).collect();
            Term::Meta(id.clone(), set.into_iter().collect())
        }
        Nl::Abs(b) => {
            let x = next_binder(counter, free);
            env.push(x.clone());
            let tb = from_nl(b, env, counter, free);
            env.pop();
            Term::Abs(x, Arc::new(tb))
        }
        Nl::App(a, b) => {
            let ta = from_nl(a, env, counter, free);
            let tb = from_nl(b, env, counter, free);
            Term::App(Arc::new(ta), Arc::new(tb))
        }
        Nl::Clo(u, b) => {
            let x = next_binder(counter, free);
            env.push(x.clone());
            let tb = from_nl(b, env, counter, free);
            env.pop();
            let tu = from_nl(u, env, counter, free);
            Term::Closure(Arc::new(tb), x, Arc::new(tu))
        }
    }
}

fn next_binder(counter: &mut usize, free: &BTreeSet<Name>) -> Name {
    loop {
        let n = Name::new(&format!("v{}", *counter));
        *counter += 1;
        if !free.contains(&n) {
            return n;
        }
    }
}

fn canonical_with(t: &Term, modulo_c: bool) -> Term {
    let free = t.free_vars();
    let nl = to_nl(t, &mut Vec::new(), modulo_c);
    from_nl(&nl, &mut Vec::new(), &mut 0, &free)
}

/// Deterministic representative of the α-class: binders become `v0, v1, …`
/// in leftmost-outermost order, skipping free names.
pub fn canonicalize_alpha(t: &Term) -> Term {
    canonical_with(t, false)
}

/// Renames binders only where needed so that all binders are pairwise
/// distinct and distinct from the free variables. Names and marks are kept
/// whenever possible.
pub fn barendregt(t: &Term) -> Term {
    let mut used = t.all_names();
    let mut seen = t.free_vars();
    bar_rec(t, &BTreeMap::new(), &mut seen, &mut used)
}

fn bar_binder(
    x: &Name,
    map: &BTreeMap<Name, Name>,
    seen: &mut BTreeSet<Name>,
    used: &mut BTreeSet<Name>,
) -> (Name, BTreeMap<Name, Name>) {
    let x2 = if seen.contains(x) { fresh_name(x, used) } else { x.clone() };
    seen.insert(x2.clone());
    used.insert(x2.clone());
    let mut m = map.clone();
    m.insert(x.clone(), x2.clone());
    (x2, m)
}

fn bar_rec(
    t: &Term,
    map: &BTreeMap<Name, Name>,
    seen: &mut BTreeSet<Name>,
    used: &mut BTreeSet<Name>,
) -> Term {
    match t {
        Term::Var(x) => Term::Var(map.get(x).unwrap_or(x).clone()),
        Term::Meta(id, d) => {
            let set: BTreeSet<Name> = d.iter().map(|x| map.get(x).unwrap_or(x).clone()).collect();
            Term::Meta(id.clone(), set.into_iter().collect())
        }
        Term::Abs(x, b) => {
            let (x2, m) = bar_binder(x, map, seen, used);
            Term::Abs(x2, Arc::new(bar_rec(b, &m, seen, used)))
        }
        Term::App(a, b) => {
            let a2 = bar_rec(a, map, seen, used);
            Term::App(Arc::new(a2), Arc::new(bar_rec(b, map, seen, used)))
        }
        Term::Closure(b, x, u) => {
            let (x2, m) = bar_binder(x, map, seen, used);
            let b2 = bar_rec(b, &m, seen, used);
            Term::Closure(Arc::new(b2), x2, Arc::new(bar_rec(u, map, seen, used)))
        }
    }
}

pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    let mut env = Vec::new();
    to_nl(a, &mut env, false) == to_nl(b, &mut env, false)
}

/// Deterministic representative of the class modulo α and C.
pub(crate) fn canonical_modulo_c(t: &Term) -> Term {
    canonical_with(&canonicalize_alpha(t), true)
}

// ---------------------------------------------------------------------------
// Parsing and printing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("duplicate name `{name}` in support of ?{meta} at offset {offset}")]
    DuplicateSupport { offset: usize, meta: String, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::DuplicateSupport { offset, .. } => {
                *offset
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let t = p.term()?;
    p.ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected input after term"));
    }
    Ok(t)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.ws();
        let start = self.pos;
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => self.pos += 1,
            _ => return Err(self.err("expected identifier")),
        }
        while let Some(c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || *c == b'_' || *c == b'\'' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    /// An identifier, optionally marked with `#`.
    fn binder(&mut self) -> Result<Name, ParseError> {
        if self.peek() == Some(b'#') {
            self.pos += 1;
            if self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
                return Err(self.err("expected identifier"));
            }
            Ok(Name::new(&format!("#{}", self.ident()?)))
        } else {
            Ok(Name::new(&self.ident()?))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if self.peek() == Some(b'\\') {
            self.pos += 1;
            let x = self.binder()?;
            self.expect(b'.')?;
            let body = self.term()?;
            return Ok(Term::Abs(x, Arc::new(body)));
        }
        let mut t = self.atom()?;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || matches!(c, b'_' | b'#' | b'?' | b'(')) {
            let a = self.atom()?;
            t = Term::App(Arc::new(t), Arc::new(a));
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let mut t = match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(b')')?;
                t
            }
            Some(b'?') => {
                let at = self.pos;
                self.pos += 1;
                let id = self.ident()?;
                self.expect(b'{')?;
                let mut set = BTreeSet::new();
                loop {
                    let off = {
                        self.ws();
                        self.pos
                    };
                    let x = self.ident()?;
                    if !set.insert(Name::new(&x)) {
                        return Err(ParseError::DuplicateSupport { offset: off, meta: id, name: x });
                    }
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b'}') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected `,` or `}`")),
                    }
                }
                let _ = at;
                Term::Meta(Name::new(&id), set.into_iter().collect())
            }
            Some(_) => Term::Var(self.binder()?),
            None => return Err(self.err("unexpected end of input")),
        };
        while self.peek() == Some(b'[') {
            self.pos += 1;
            let x = self.binder()?;
            self.expect(b'/')?;
            let u = self.term()?;
            self.expect(b']')?;
            t = Term::Closure(Arc::new(t), x, Arc::new(u));
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pos {
    Top,
    Fun,
    Arg,
    ClosBody,
}

fn write_term(t: &Term, pos: Pos, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(x) => write!(f, "{x}"),
        Term::Meta(id, d) => {
            write!(f, "?{id}{{")?;
            for (i, x) in d.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("}")
        }
        Term::Abs(x, b) => {
            let paren = pos != Pos::Top;
            if paren {
                f.write_str("(")?;
            }
            write!(f, "\\{x}. ")?;
            write_term(b, Pos::Top, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::App(a, b) => {
            let paren = matches!(pos, Pos::Arg | Pos::ClosBody);
            if paren {
                f.write_str("(")?;
            }
            write_term(a, Pos::Fun, f)?;
            f.write_str(" ")?;
            write_term(b, Pos::Arg, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::Closure(b, x, u) => {
            write_term(b, Pos::ClosBody, f)?;
            write!(f, "[{x}/")?;
            write_term(u, Pos::Top, f)?;
            f.write_str("]")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, Pos::Top, f)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{self}`")
    }
}

impl serde::Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl std::str::FromStr for Term {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Term, ParseError> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Term {
        parse(s).unwrap()
    }

    #[test]
    fn parses_abstraction_body_as_far_as_possible() {
        assert_eq!(
            p("\\x. x (y y)"),
            Term::abs("x", Term::app(Term::var("x"), Term::app(Term::var("y"), Term::var("y"))))
        );
    }

    #[test]
    fn parses_closures_postfix() {
        let t = p("?X{x,y}[y/v][x/z]");
        assert_eq!(
            t,
            Term::clo(Term::clo(Term::meta("X", &["x", "y"]), "y", Term::var("v")), "x", Term::var("z"))
        );
        assert_eq!(p("f x[y/u]"), Term::app(Term::var("f"), Term::clo(Term::var("x"), "y", Term::var("u"))));
    }

    #[test]
    fn reports_error_offsets() {
        assert_eq!(parse("x[").unwrap_err().offset(), 2);
        assert!(matches!(parse("?X{x,x}"), Err(ParseError::DuplicateSupport { .. })));
        assert!(parse("\\x x").is_err());
        assert!(parse("(x").is_err());
    }

    #[test]
    fn prints_minimal_parentheses() {
        for s in ["\\x. x (y y)", "(\\x. x) y", "f (\\x. x)", "(f x)[x/y]", "x[x/\\y. y]", "f x y", "f (x y)"] {
            assert_eq!(p(s).to_string(), s);
        }
    }

    #[test]
    fn free_variables() {
        let names = |s: &str| p(s).free_vars().into_iter().map(|n| n.to_string()).collect::<Vec<_>>();
        assert_eq!(names("(\\y. x)[x/y]"), ["y"]);
        assert_eq!(names("?X{x,y}"), ["x", "y"]);
        assert!(names("\\x. x").is_empty());
    }

    #[test]
    fn alpha_equivalence() {
        assert!(alpha_eq(&p("(\\y. x)[x/y]"), &p("(\\z. w)[w/y]")));
        assert!(alpha_eq(&p("\\x. ?X{x,y}"), &p("\\z. ?X{z,y}")));
        assert!(!alpha_eq(&p("\\x. x"), &p("\\x. y")));
        assert_eq!(canonicalize_alpha(&p("\\x.x")), canonicalize_alpha(&p("\\y.y")));
        assert_eq!(
            canonicalize_alpha(&p("(\\y. x)[x/y]")),
            canonicalize_alpha(&p("(\\z. w)[w/y]"))
        );
    }

    #[test]
    fn canonical_names_avoid_free_names() {
        let t = canonicalize_alpha(&p("\\x. x v0"));
        assert_eq!(t.to_string(), "\\v1. v1 v0");
        assert_eq!(canonicalize_alpha(&t), t);
    }

    #[test]
    fn implicit_substitution() {
        let x = Name::new("x");
        assert_eq!(subst(&p("x y"), &x, &p("\\z.z")), p("(\\z.z) y"));
        assert_eq!(subst(&p("?X{x,y}"), &x, &p("v")), p("?X{x,y}[x/v]"));
        assert_eq!(subst(&p("?X{y}"), &x, &p("v")), p("?X{y}"));
        let r = subst(&p("\\y. x y"), &x, &p("y"));
        assert!(alpha_eq(&r, &p("\\z. y z")));
        let r = subst(&p("(x y)[y/x]"), &x, &p("y"));
        assert!(alpha_eq(&r, &p("(y z)[z/y]")));
    }

    #[test]
    fn plugging_renames_capturing_binders() {
        let t = p("\\y. f x y");
        let (ctx, hole) = Context::decompose(&t, &[0, 0, 1]).unwrap();
        assert_eq!(hole, p("x"));
        let u = p("y");
        let ctx = ctx.with_guard(u.free_vars());
        let r = ctx.plug(&u);
        assert!(alpha_eq(&r, &p("\\z. f y z")));
    }
}
