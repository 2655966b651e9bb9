//! The termination measures `s(t)` and `mul_x(t)` for the substitution rules.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::lsub::{RuleId, Step};
use crate::syntax::{canonicalize_alpha, chain_of, Name, Term};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Measure {
    pub s: u64,
    /// `mul_x` for every free variable `x`; absent names have multiplicity 0.
    pub mul: BTreeMap<Name, u64>,
}

impl Measure {
    pub fn of(t: &Term) -> Measure {
        let t = canonicalize_alpha(t);
        let mul = t.free_vars().into_iter().map(|x| (x.clone(), mul_raw(&t, &x))).collect();
        Measure { s: s_raw(&t), mul }
    }

    pub fn mul_of(&self, x: &Name) -> u64 {
        self.mul.get(x).copied().unwrap_or(0)
    }
}

/// `t = X_Δ[x1/u1]…[xn/un]` with `x ∈ Δ` (n may be 0).
fn meta_chain_over(t: &Term, x: &Name) -> bool {
    let (_, base) = chain_of(t);
    matches!(base, Term::Meta(_, delta) if delta.contains(x))
}

fn s_raw(t: &Term) -> u64 {
    match t {
        Term::Var(_) => 1,
        Term::Meta(_, delta) => delta.len() as u64,
        Term::App(a, b) => s_raw(a) + s_raw(b),
        Term::Abs(_, b) => s_raw(b),
        Term::Closure(b, x, u) => {
            let (sb, su, m) = (s_raw(b), s_raw(u), mul_raw(b, x));
            if meta_chain_over(b, x) {
                sb - 1 + m * su
            } else {
                sb + su + m * su
            }
        }
    }
}

fn mul_raw(t: &Term, x: &Name) -> u64 {
    if !t.has_free(x) {
        return 0;
    }
    match t {
        Term::Var(_) | Term::Meta(..) => 1,
        Term::App(a, b) => mul_raw(a, x) + mul_raw(b, x),
        Term::Abs(_, b) => mul_raw(b, x),
        Term::Closure(b, y, u) => {
            let extra = mul_raw(b, y) * mul_raw(u, x);
            if meta_chain_over(b, y) {
                mul_raw(b, x) + extra
            } else {
                mul_raw(b, x) + mul_raw(u, x) + extra
            }
        }
    }
}

pub fn size_s(t: &Term) -> u64 {
    s_raw(&canonicalize_alpha(t))
}

pub fn mul_of(t: &Term, x: &Name) -> u64 {
    mul_raw(&canonicalize_alpha(t), x)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("measures only decrease along R, Gc and RX steps, not {0}")]
pub struct UnsupportedRule(pub RuleId);

/// For R, Gc and RX: `s` strictly drops and no `mul_z` grows. For a C
/// pseudo-step: `s` and every `mul_z` are unchanged.
pub fn check_decrease(step: &Step) -> Result<bool, UnsupportedRule> {
    let before = Measure::of(&step.before);
    let after = Measure::of(&step.after);
    let names = before.mul.keys().chain(after.mul.keys());
    match step.rule {
        RuleId::R | RuleId::Gc | RuleId::RX => Ok(after.s < before.s
            && names.into_iter().all(|z| after.mul_of(z) <= before.mul_of(z))),
        RuleId::C => Ok(before == after),
        r => Err(UnsupportedRule(r)),
    }
}
