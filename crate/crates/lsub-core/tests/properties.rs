use std::collections::{BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;
use proptest::sample::{select, subsequence};

use lsub_core::calculi::{self, LES, LPAR};
use lsub_core::confluence::{parallel_reducts, DEFAULT_FANOUT};
use lsub_core::lsub::{
    self, c_equal, es_canonical, is_snf_shape, is_sub_normal, normalize_sub_with, redexes, replay, snf,
    step_modulo, step_modulo_bruteforce, Graph, RuleId, Strategy as Reduction, BETA, LSUB, SUB,
};
use lsub_core::measures::{check_decrease, mul_of, size_s};
use lsub_core::syntax::{alpha_eq, canonicalize_alpha, free_vars, subst};
use lsub_core::typing::{self, ll_check, Derivation, Env, System, TypeExpr};
use lsub_core::{parse, Name, Term};

// Nameless mirror of the term language, used as an independent oracle.

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Db {
    B(usize),
    F(String),
    Lam(Box<Db>),
    App(Box<Db>, Box<Db>),
    /// Body under one extra binder, then the argument.
    Clo(Box<Db>, Box<Db>),
    Meta(String, Vec<Db>),
}

fn db(t: &Term, expand: bool) -> Db {
    fn go(t: &Term, ctx: &mut Vec<String>, expand: bool) -> Db {
        let var = |x: &Name, ctx: &Vec<String>| match ctx.iter().rposition(|y| y == x.as_str()) {
            Some(i) => Db::B(ctx.len() - 1 - i),
            None => Db::F(x.as_str().to_string()),
        };
        match t {
            Term::Var(x) => var(x, ctx),
            Term::Abs(x, b) => {
                ctx.push(x.as_str().to_string());
                let b = go(b, ctx, expand);
                ctx.pop();
                Db::Lam(Box::new(b))
            }
            Term::App(a, b) => Db::App(Box::new(go(a, ctx, expand)), Box::new(go(b, ctx, expand))),
            Term::Closure(b, x, u) => {
                let u = go(u, ctx, expand);
                ctx.push(x.as_str().to_string());
                let b = go(b, ctx, expand);
                ctx.pop();
                if expand {
                    inst(&b, 0, &u)
                } else {
                    Db::Clo(Box::new(b), Box::new(u))
                }
            }
            Term::Meta(id, delta) => {
                assert!(!expand, "metavariables have no expansion");
                let mut s: Vec<Db> = delta.iter().map(|x| var(x, ctx)).collect();
                s.sort();
                Db::Meta(id.as_str().to_string(), s)
            }
        }
    }
    go(t, &mut Vec::new(), expand)
}

fn shift(t: &Db, by: isize, cut: usize) -> Db {
    match t {
        Db::B(i) if *i >= cut => Db::B((*i as isize + by) as usize),
        Db::B(_) | Db::F(_) => t.clone(),
        Db::Lam(b) => Db::Lam(Box::new(shift(b, by, cut + 1))),
        Db::App(a, b) => Db::App(Box::new(shift(a, by, cut)), Box::new(shift(b, by, cut))),
        Db::Clo(b, u) => Db::Clo(Box::new(shift(b, by, cut + 1)), Box::new(shift(u, by, cut))),
        Db::Meta(id, s) => {
            let mut s: Vec<Db> = s.iter().map(|v| shift(v, by, cut)).collect();
            s.sort();
            Db::Meta(id.clone(), s)
        }
    }
}

/// Replace index `k` by `arg`, removing that binder.
fn inst(t: &Db, k: usize, arg: &Db) -> Db {
    match t {
        Db::B(i) if *i == k => shift(arg, k as isize, 0),
        Db::B(i) if *i > k => Db::B(i - 1),
        Db::B(_) | Db::F(_) => t.clone(),
        Db::Lam(b) => Db::Lam(Box::new(inst(b, k + 1, arg))),
        Db::App(a, b) => Db::App(Box::new(inst(a, k, arg)), Box::new(inst(b, k, arg))),
        Db::Clo(b, u) => Db::Clo(Box::new(inst(b, k + 1, arg)), Box::new(inst(u, k, arg))),
        Db::Meta(..) => unreachable!("no substitution into metavariables"),
    }
}

fn uses(t: &Db, k: usize) -> bool {
    match t {
        Db::B(i) => *i == k,
        Db::F(_) => false,
        Db::Lam(b) => uses(b, k + 1),
        Db::App(a, b) => uses(a, k) || uses(b, k),
        Db::Clo(b, u) => uses(b, k + 1) || uses(u, k),
        Db::Meta(_, s) => s.iter().any(|v| uses(v, k)),
    }
}

/// Exchange indices `k` and `k + 1`.
fn swap_ix(t: &Db, k: usize) -> Db {
    match t {
        Db::B(i) if *i == k => Db::B(k + 1),
        Db::B(i) if *i == k + 1 => Db::B(k),
        Db::B(_) | Db::F(_) => t.clone(),
        Db::Lam(b) => Db::Lam(Box::new(swap_ix(b, k + 1))),
        Db::App(a, b) => Db::App(Box::new(swap_ix(a, k)), Box::new(swap_ix(b, k))),
        Db::Clo(b, u) => Db::Clo(Box::new(swap_ix(b, k + 1)), Box::new(swap_ix(u, k))),
        Db::Meta(id, s) => {
            let mut s: Vec<Db> = s.iter().map(|v| swap_ix(v, k)).collect();
            s.sort();
            Db::Meta(id.clone(), s)
        }
    }
}

/// `t[x/u][y/v] = t[y/v][x/u]` when `y ∉ fv(u)` and `x ∉ fv(v)`, at the root.
fn root_swap(t: &Db) -> Option<Db> {
    let Db::Clo(inner, v) = t else { return None };
    let Db::Clo(body, u) = &**inner else { return None };
    if uses(u, 0) {
        return None;
    }
    let u2 = shift(u, -1, 0);
    let v2 = shift(v, 1, 0);
    Some(Db::Clo(Box::new(Db::Clo(Box::new(swap_ix(body, 0)), Box::new(v2))), Box::new(u2)))
}

fn one_swaps(t: &Db) -> Vec<Db> {
    let mut out: Vec<Db> = root_swap(t).into_iter().collect();
    match t {
        Db::Lam(b) => out.extend(one_swaps(b).into_iter().map(|b| Db::Lam(Box::new(b)))),
        Db::App(a, b) => {
            out.extend(one_swaps(a).into_iter().map(|a| Db::App(Box::new(a), b.clone())));
            out.extend(one_swaps(b).into_iter().map(|b| Db::App(a.clone(), Box::new(b))));
        }
        Db::Clo(b, u) => {
            out.extend(one_swaps(b).into_iter().map(|b| Db::Clo(Box::new(b), u.clone())));
            out.extend(one_swaps(u).into_iter().map(|u| Db::Clo(b.clone(), Box::new(u))));
        }
        _ => {}
    }
    out
}

fn c_class(t: &Db, limit: usize) -> Option<HashSet<Db>> {
    let mut seen = HashSet::from([t.clone()]);
    let mut queue = VecDeque::from([t.clone()]);
    while let Some(s) = queue.pop_front() {
        for n in one_swaps(&s) {
            if seen.insert(n.clone()) {
                if seen.len() > limit {
                    return None;
                }
                queue.push_back(n);
            }
        }
    }
    Some(seen)
}

fn from_db(t: &Db) -> Term {
    fn go(t: &Db, depth: usize) -> Term {
        let name = |i: usize| format!("b{}", depth - 1 - i);
        match t {
            Db::B(i) => Term::var(&name(*i)),
            Db::F(x) => Term::var(x),
            Db::Lam(b) => Term::abs(&format!("b{depth}"), go(b, depth + 1)),
            Db::App(a, b) => Term::app(go(a, depth), go(b, depth)),
            Db::Clo(b, u) => Term::clo(go(b, depth + 1), &format!("b{depth}"), go(u, depth)),
            Db::Meta(id, s) => {
                let names: Vec<String> = s
                    .iter()
                    .map(|v| match v {
                        Db::B(i) => name(*i),
                        Db::F(x) => x.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                Term::meta(id, &refs)
            }
        }
    }
    go(t, 0)
}

fn beta_step(t: &Db) -> Option<Db> {
    match t {
        Db::App(f, a) => {
            if let Db::Lam(b) = &**f {
                return Some(inst(b, 0, a));
            }
            if let Some(f) = beta_step(f) {
                return Some(Db::App(Box::new(f), a.clone()));
            }
            beta_step(a).map(|a| Db::App(f.clone(), Box::new(a)))
        }
        Db::Lam(b) => beta_step(b).map(|b| Db::Lam(Box::new(b))),
        _ => None,
    }
}

fn beta_nf(t: &Db, fuel: usize) -> Option<Db> {
    let mut t = t.clone();
    for _ in 0..fuel {
        match beta_step(&t) {
            Some(s) => t = s,
            None => return Some(t),
        }
    }
    None
}

// Generators

fn var() -> impl Strategy<Value = &'static str> {
    select(vec!["x", "y", "z", "w"])
}

fn leaf(metas: bool) -> BoxedStrategy<Term> {
    let v = var().prop_map(Term::var);
    if metas {
        let m = (select(vec!["X", "Y"]), subsequence(vec!["x", "y", "z"], 1..=2))
            .prop_map(|(id, s)| Term::meta(id, &s));
        prop_oneof![5 => v, 1 => m].boxed()
    } else {
        v.boxed()
    }
}

fn term_of(closures: bool, metas: bool, size: u32) -> BoxedStrategy<Term> {
    leaf(metas)
        .prop_recursive(5, size, 2, move |inner| {
            let abs = (var(), inner.clone()).prop_map(|(x, b)| Term::abs(x, b));
            let app = (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app(a, b));
            if closures {
                let clo = (inner.clone(), var(), inner).prop_map(|(b, x, u)| Term::clo(b, x, u));
                prop_oneof![2 => abs, 3 => app, 2 => clo].boxed()
            } else {
                prop_oneof![2 => abs, 3 => app].boxed()
            }
        })
        .boxed()
}

fn pure() -> BoxedStrategy<Term> {
    term_of(false, false, 10)
}

fn terms() -> BoxedStrategy<Term> {
    term_of(true, false, 10)
}

fn metaterms() -> BoxedStrategy<Term> {
    term_of(true, true, 10)
}

fn ty() -> impl Strategy<Value = TypeExpr> {
    select(vec!["A", "B", "C"]).prop_map(TypeExpr::base).prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| TypeExpr::arrow(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| TypeExpr::inter(a, b)),
        ]
    })
}

fn fv_vec(t: &Term) -> BTreeSet<Name> {
    free_vars(t)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

// syntax

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn alpha_matches_nameless(a in metaterms(), b in metaterms()) {
        prop_assert_eq!(alpha_eq(&a, &b), db(&a, false) == db(&b, false));
        let renamed = from_db(&db(&a, false));
        prop_assert!(alpha_eq(&a, &renamed), "{} vs {}", a, renamed);
    }

    #[test]
    fn canonical_is_idempotent(t in metaterms()) {
        let c = canonicalize_alpha(&t);
        prop_assert_eq!(canonicalize_alpha(&c), c.clone());
        prop_assert_eq!(fv_vec(&c), fv_vec(&t));
        prop_assert_eq!(db(&c, false), db(&t, false));
        prop_assert_eq!(canonicalize_alpha(&from_db(&db(&t, false))), c);
    }

    #[test]
    fn print_parse_round_trip(t in metaterms()) {
        let back = parse(&t.to_string()).unwrap();
        prop_assert!(alpha_eq(&back, &t), "{} reparsed as {}", t, back);
    }

    #[test]
    fn subst_free_vars(t in metaterms(), x in var(), v in metaterms()) {
        let x = Name::new(x);
        let r = subst(&t, &x, &v);
        let mut bound = fv_vec(&t);
        bound.remove(&x);
        bound.extend(fv_vec(&v));
        prop_assert!(fv_vec(&r).is_subset(&bound));
        if !t.has_free(&x) {
            prop_assert!(alpha_eq(&r, &t));
        }
    }

    #[test]
    fn subst_matches_nameless(t in terms(), x in var(), v in terms()) {
        let r = subst(&t, &Name::new(x), &v);
        prop_assert_eq!(db(&r, true), db(&Term::clo(t, x, v), true));
    }
}

// lsub

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn snf_is_implicit_substitution(t in terms()) {
        let n = snf(&t);
        prop_assert!(!n.has_closure(), "{}", n);
        prop_assert_eq!(db(&n, true), db(&t, true));
    }

    #[test]
    fn step_modulo_matches_bruteforce(t in metaterms()) {
        prop_assert_eq!(step_modulo(&t, LSUB), step_modulo_bruteforce(&t, LSUB));
    }

    #[test]
    fn steps_replay_and_keep_free_vars(t in metaterms()) {
        for s in redexes(&t, LSUB) {
            let again = replay(&s.before, s.rule, &s.position, s.occurrence.as_deref());
            prop_assert_eq!(again.as_ref(), Some(&s.after));
            let (a, b) = (fv_vec(&s.before), fv_vec(&s.after));
            if s.rule == RuleId::Gc {
                prop_assert!(b.is_subset(&a));
            } else {
                prop_assert_eq!(a, b, "{}", s);
            }
        }
    }

    #[test]
    fn c_equal_matches_swap_closure(t in metaterms(), pick in any::<prop::sample::Index>(), u in metaterms()) {
        let d = db(&t, false);
        let Some(class) = c_class(&d, 2000) else { return Ok(()) };
        let mut members: Vec<&Db> = class.iter().collect();
        members.sort();
        let other = from_db(members[pick.index(members.len())]);
        prop_assert!(c_equal(&t, &other), "{} vs {}", t, other);
        prop_assert_eq!(es_canonical(&t), es_canonical(&other));
        prop_assert_eq!(c_equal(&t, &u), class.contains(&db(&u, false)));
        let e = es_canonical(&t);
        prop_assert_eq!(es_canonical(&e), e);
    }

    #[test]
    fn strategies_agree(t in metaterms(), seed in any::<u64>()) {
        let a = normalize_sub_with(&t, Reduction::LeftmostOutermost);
        let b = normalize_sub_with(&t, Reduction::Random(seed));
        prop_assert!(c_equal(&a, &b));
    }

    #[test]
    fn snf_shape_and_size(t in metaterms()) {
        let n = snf(&t);
        prop_assert!(is_snf_shape(&n), "{}", n);
        prop_assert!(is_sub_normal(&n));
        prop_assert!(size_s(&n) <= size_s(&t));
        if size_s(&n) == size_s(&t) {
            prop_assert!(is_sub_normal(&t), "{} keeps its size but is not sub-normal", t);
        }
    }

    #[test]
    fn full_composition(t in metaterms(), x in var(), u in metaterms()) {
        prop_assert!(lsub::full_composition_check(&t, &Name::new(x), &u));
    }
}

// measures

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn sub_steps_decrease(t in metaterms()) {
        for s in redexes(&t, SUB) {
            prop_assert!(check_decrease(&s).unwrap(), "{}", s);
        }
    }

    #[test]
    fn swaps_keep_measures(t in metaterms()) {
        let Some(class) = c_class(&db(&t, false), 200) else { return Ok(()) };
        let names = ["x", "y", "z", "w"].map(Name::new);
        for m in class {
            let other = from_db(&m);
            prop_assert_eq!(size_s(&other), size_s(&t));
            for x in &names {
                prop_assert_eq!(mul_of(&other, x), mul_of(&t, x));
            }
        }
    }
}

// confluence

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn parallel_reflexive_and_shrinking(t in metaterms()) {
        let n = snf(&t);
        let r = parallel_reducts(&n, DEFAULT_FANOUT).unwrap();
        prop_assert!(r.contains(&n));
        let fv = fv_vec(&n);
        for u in &r.terms {
            prop_assert!(fv_vec(u).is_subset(&fv));
        }
    }

    #[test]
    fn substitution_stability(
        t in metaterms(), u in metaterms(), x in var(),
        i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>(),
    ) {
        let (t, u) = (snf(&t), snf(&u));
        let (rt, ru) = (parallel_reducts(&t, 200).unwrap(), parallel_reducts(&u, 200).unwrap());
        let t2 = &rt.terms[i.index(rt.terms.len())];
        let u2 = &ru.terms[j.index(ru.terms.len())];
        let from = snf(&Term::clo(t, x, u));
        let to = snf(&Term::clo(t2.clone(), x, u2.clone()));
        let r = parallel_reducts(&from, DEFAULT_FANOUT).unwrap();
        prop_assert!(r.truncated || r.contains(&to), "{} does not reach {}", from, to);
    }

    #[test]
    fn parallel_star_is_lsub_star(t in metaterms()) {
        let g = Graph::explore(&t, LSUB, 200, usize::MAX);
        if !g.complete {
            return Ok(());
        }
        let via_lsub: BTreeSet<Term> = g.states.iter().map(snf).collect();
        let start = snf(&t);
        let mut via_par = BTreeSet::from([start.clone()]);
        let mut queue = vec![start];
        while let Some(s) = queue.pop() {
            let r = parallel_reducts(&s, DEFAULT_FANOUT).unwrap();
            prop_assert!(!r.truncated);
            for n in r.terms {
                if via_par.insert(n.clone()) {
                    queue.push(n);
                }
            }
        }
        prop_assert_eq!(via_par, via_lsub);
    }
}

// calculi

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn tra_is_alc_normal_with_idle_marks(t in terms()) {
        let e = calculi::tra(&t).unwrap();
        prop_assert!(calculi::is_alc_normal(&e), "{}", e);
        prop_assert_eq!(fv_vec(&e), fv_vec(&t));
        for (_, s) in e.positions() {
            if let Term::Closure(b, y, _) = s {
                if y.is_marked() {
                    prop_assert!(!b.has_free(y), "{} binds an occurrence", s);
                }
            }
        }
    }

    #[test]
    fn translations_keep_free_vars(t in terms(), p in pure()) {
        prop_assert_eq!(fv_vec(&calculi::lmpar(&t).unwrap()), fv_vec(&t));
        prop_assert_eq!(fv_vec(&calculi::parlm(&p).unwrap()), fv_vec(&p));
    }

    #[test]
    fn lmpar_commutes_with_subst(t in terms(), x in var(), u in terms()) {
        let x = Name::new(x);
        let lhs = calculi::lmpar(&subst(&t, &x, &u)).unwrap();
        let rhs = subst(&calculi::lmpar(&t).unwrap(), &x, &calculi::lmpar(&u).unwrap());
        prop_assert!(alpha_eq(&lhs, &rhs), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn beta_normal_forms_match(t in pure()) {
        let tr = lsub::reduce(&t, BETA, Reduction::LeftmostOutermost, 200);
        let oracle = beta_nf(&db(&t, false), 200);
        if tr.normal {
            prop_assert_eq!(Some(db(tr.last(), false)), oracle);
        } else {
            prop_assert!(oracle.is_none());
        }
    }

    #[test]
    fn les_and_lpar_keep_free_vars(t in terms(), p in pure()) {
        for s in redexes(&t, LES) {
            let (a, b) = (fv_vec(&s.before), fv_vec(&s.after));
            if s.rule == RuleId::Gc {
                prop_assert!(b.is_subset(&a));
            } else {
                prop_assert_eq!(a, b, "{}", s);
            }
        }
        for s in redexes(&p, LPAR) {
            prop_assert!(fv_vec(&s.after).is_subset(&fv_vec(&s.before)));
        }
    }
}

// typing

fn derivation() -> impl Strategy<Value = Derivation> {
    let simple = terms().prop_filter_map("untypable", |t| typing::infer_simple(&t, System::AddLm).map(|t| t.derivation));
    let inter = pure().prop_filter_map("no normal form", |t| {
        let tr = lsub::reduce(&t, BETA, Reduction::LeftmostOutermost, 100);
        tr.normal.then(|| typing::type_normal_form(tr.last()).ok()).flatten()
    });
    prop_oneof![simple, inter]
}

fn minus(a: &Env, b: &Env) -> Env {
    a.iter().filter(|(x, _)| !b.contains_key(*x)).map(|(x, t)| (x.clone(), t.clone())).collect()
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn ll_is_a_preorder(a in ty(), b in ty(), c in ty()) {
        prop_assert!(ll_check(&a, &a));
        let ab = TypeExpr::inter(a.clone(), b.clone());
        prop_assert!(ll_check(&ab, &a));
        prop_assert!(ll_check(&ab, &b));
        if ll_check(&a, &b) && ll_check(&b, &c) {
            prop_assert!(ll_check(&a, &c));
        }
        if ll_check(&c, &a) && ll_check(&c, &b) {
            prop_assert!(ll_check(&c, &ab));
        }
    }

    #[test]
    fn generation_round_trip(d in derivation()) {
        typing::check_derivation(&d).unwrap();
        let back = typing::recompose(&typing::decompose(&d)).unwrap();
        typing::check_derivation(&back).unwrap();
        prop_assert!(back.same_conclusion(&d));
    }

    #[test]
    fn transfer_is_an_involution_up_to_weakening(d in derivation()) {
        let m = typing::add_mul_transfer(&d).unwrap();
        typing::check_derivation(&m).unwrap();
        prop_assert_eq!(m.system, d.system.dual());
        let a = typing::add_mul_transfer(&m).unwrap();
        typing::check_derivation(&a).unwrap();
        prop_assert!(a.env.iter().all(|(x, t)| d.env.get(x) == Some(t)));
        let w = typing::weaken(&a, &minus(&d.env, &a.env)).unwrap();
        typing::check_derivation(&w).unwrap();
        prop_assert!(w.same_conclusion(&d));
    }

    #[test]
    fn strengthening_validates(d in derivation(), extra in ty(), pick in any::<prop::sample::Index>()) {
        if d.env.is_empty() || !d.system.intersection() {
            return Ok(());
        }
        let (x, b) = d.env.iter().nth(pick.index(d.env.len())).unwrap();
        let c = TypeExpr::inter(b.clone(), extra);
        let s = typing::strengthen(&d, x, &c).unwrap();
        typing::check_derivation(&s).unwrap();
        prop_assert_eq!(s.env.get(x), Some(&c));
        prop_assert_eq!(&s.ty, &d.ty);
    }

    #[test]
    fn translations_keep_simple_typability(p in pure(), t in terms()) {
        if typing::infer_simple(&p, System::AddLambda).is_some() {
            let img = calculi::parlm(&p).unwrap();
            prop_assert!(typing::infer_simple(&img, System::AddLm).is_some(), "{}", img);
        }
        if typing::infer_simple(&t, System::AddLm).is_some() {
            let img = calculi::lmpar(&t).unwrap();
            prop_assert!(typing::infer_simple(&img, System::AddLambda).is_some(), "{}", img);
        }
    }
}

// A context binder renamed away from the argument must be renamed in the
// metavariable support as well.
#[test]
fn rx_renames_support_under_binder() {
    let t = parse("(\\y. ?X{x,y})[x/(\\x. ?Y{y}) y]").unwrap();
    let steps = redexes(&t, &[RuleId::RX]);
    assert_eq!(steps.len(), 1);
    let Term::Closure(body, _, _) = &steps[0].after else { panic!("{}", steps[0].after) };
    let Term::Abs(y1, inner) = &**body else { panic!("{body}") };
    assert_ne!(y1.as_str(), "y");
    let Term::Closure(m, _, _) = &**inner else { panic!("{inner}") };
    assert_eq!(**m, Term::meta("X", &["x", y1.as_str()]));
    assert!(check_decrease(&steps[0]).unwrap());
}
