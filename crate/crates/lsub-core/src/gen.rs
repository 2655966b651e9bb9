//! Seeded random generation of terms and metaterms.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{Name, Term};

pub type Rng8 = ChaCha8Rng;

/// Independent generator for instance `i` of a campaign seeded with `seed`.
pub fn instance_rng(seed: u64, i: usize) -> Rng8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Upper bound on the number of constructors.
    pub size: usize,
    /// Probability that a leaf is a metavariable.
    pub meta_leaf: f64,
    /// Probability that an inner node is a closure.
    pub closure: f64,
    pub vars: Vec<Name>,
    pub metas: Vec<Name>,
}

impl GenConfig {
    pub fn metaterms(size: usize) -> GenConfig {
        GenConfig {
            size,
            meta_leaf: 0.15,
            closure: 0.25,
            vars: ["x", "y", "z", "w"].iter().map(|s| Name::new(s)).collect(),
            metas: ["X", "Y"].iter().map(|s| Name::new(s)).collect(),
        }
    }

    /// Λ-terms: closures but no metavariables.
    pub fn terms(size: usize) -> GenConfig {
        GenConfig { meta_leaf: 0.0, ..GenConfig::metaterms(size) }
    }

    pub fn pure(size: usize) -> GenConfig {
        GenConfig { meta_leaf: 0.0, closure: 0.0, ..GenConfig::metaterms(size) }
    }
}

pub fn term(rng: &mut Rng8, cfg: &GenConfig) -> Term {
    let n = rng.gen_range(1..=cfg.size.max(1));
    sized(rng, cfg, n)
}

/// A term with exactly `n` constructors when `n` allows it.
pub fn sized(rng: &mut Rng8, cfg: &GenConfig, n: usize) -> Term {
    if n <= 1 {
        return leaf(rng, cfg);
    }
    if n >= 3 && rng.gen_bool(cfg.closure) {
        let b = rng.gen_range(1..=n - 2);
        let x = cfg.vars.choose(rng).expect("vars").clone();
        let body = sized(rng, cfg, b);
        let u = sized(rng, cfg, n - 1 - b);
        return Term::Closure(Arc::new(body), x, Arc::new(u));
    }
    if n == 2 || rng.gen_bool(0.4) {
        let x = cfg.vars.choose(rng).expect("vars").clone();
        return Term::Abs(x, Arc::new(sized(rng, cfg, n - 1)));
    }
    let a = rng.gen_range(1..=n - 2);
    let f = sized(rng, cfg, a);
    let g = sized(rng, cfg, n - 1 - a);
    Term::App(Arc::new(f), Arc::new(g))
}

fn leaf(rng: &mut Rng8, cfg: &GenConfig) -> Term {
    if rng.gen_bool(cfg.meta_leaf) {
        let id = cfg.metas.choose(rng).expect("metas").clone();
        let k = rng.gen_range(1..=2.min(cfg.vars.len()));
        let support: BTreeSet<Name> = cfg.vars.choose_multiple(rng, k).cloned().collect();
        Term::Meta(id, support.into_iter().collect())
    } else {
        Term::Var(cfg.vars.choose(rng).expect("vars").clone())
    }
}

/// Every pure λ-term with at most `max_size` constructors, up to α, whose
/// free variables are drawn from `free`.
pub fn all_pure_terms(max_size: usize, free: &[&str]) -> Vec<Term> {
    let mut out = Vec::new();
    for n in 1..=max_size {
        out.extend(pure_of_size(n, 0, free));
    }
    out
}

fn pure_of_size(n: usize, depth: usize, free: &[&str]) -> Vec<Term> {
    let mut out = Vec::new();
    if n == 1 {
        for d in 0..depth {
            out.push(Term::var(&format!("b{d}")));
        }
        for x in free {
            out.push(Term::var(x));
        }
        return out;
    }
    for body in pure_of_size(n - 1, depth + 1, free) {
        out.push(Term::abs(&format!("b{depth}"), body));
    }
    for a in 1..n - 1 {
        let fs = pure_of_size(a, depth, free);
        let gs = pure_of_size(n - 1 - a, depth, free);
        for f in &fs {
            for g in &gs {
                out.push(Term::app(f.clone(), g.clone()));
            }
        }
    }
    out
}
