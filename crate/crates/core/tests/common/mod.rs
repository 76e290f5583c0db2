//! Random small terms over state variables `x`, `y` with values in 0..=4,
//! and independent reference semantics to compare the library against.
#![allow(dead_code)]

use std::collections::BTreeSet;

use bifc_core::ast::*;
use bifc_core::calculus::{successors, wp, Operations};
use bifc_core::eval::{eval_pred, Env, FiniteModel};
use bifc_core::parser::parse_machine;
use bifc_core::value::Value;
use rand::Rng;

pub const VARS: [&str; 2] = ["x", "y"];
pub const MAX: i64 = 4;

fn var(rng: &mut impl Rng) -> &'static str {
    VARS[rng.gen_range(0..VARS.len())]
}

pub fn gen_expr(rng: &mut impl Rng, depth: u32, scope: &[&str]) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return if rng.gen_bool(0.5) {
            Expr::int(rng.gen_range(0..=MAX))
        } else {
            Expr::var(scope[rng.gen_range(0..scope.len())])
        };
    }
    let op = if rng.gen_bool(0.5) { BinOp::Add } else { BinOp::Sub };
    Expr::bin(op, gen_expr(rng, depth - 1, scope), gen_expr(rng, depth - 1, scope))
}

/// A non-empty set expression.
pub fn gen_set(rng: &mut impl Rng, scope: &[&str]) -> Expr {
    if rng.gen_bool(0.5) {
        let lo = gen_expr(rng, 1, scope);
        let hi = Expr::bin(BinOp::Add, lo.clone(), Expr::int(rng.gen_range(0..=2)));
        Expr::bin(BinOp::Interval, lo, hi)
    } else {
        let n = rng.gen_range(1..=3);
        Expr::set((0..n).map(|_| gen_expr(rng, 1, scope)).collect())
    }
}

pub fn gen_pred(rng: &mut impl Rng, depth: u32, scope: &[&str]) -> Pred {
    if depth == 0 || rng.gen_bool(0.3) {
        let a = gen_expr(rng, 1, scope);
        return match rng.gen_range(0..4) {
            0 => Pred::cmp(CmpOp::Lt, a, gen_expr(rng, 1, scope)),
            1 => Pred::eq(a, gen_expr(rng, 1, scope)),
            2 => Pred::cmp(CmpOp::Le, a, gen_expr(rng, 1, scope)),
            _ => Pred::member(a, gen_set(rng, scope)),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 => Pred::not(gen_pred(rng, d, scope)),
        1 => Pred::connect(Connective::And, gen_pred(rng, d, scope), gen_pred(rng, d, scope)),
        2 => Pred::connect(Connective::Or, gen_pred(rng, d, scope), gen_pred(rng, d, scope)),
        3 => Pred::connect(Connective::Implies, gen_pred(rng, d, scope), gen_pred(rng, d, scope)),
        4 => Pred::connect(Connective::Iff, gen_pred(rng, d, scope), gen_pred(rng, d, scope)),
        _ => {
            let mut inner = scope.to_vec();
            inner.push("q");
            let body = gen_pred(rng, d, &inner);
            let range = Pred::member(Expr::var("q"), Expr::bin(BinOp::Interval, Expr::int(0), Expr::int(MAX)));
            if rng.gen_bool(0.5) {
                Pred::forall(vec!["q".into()], Pred::connect(Connective::Implies, range, body))
            } else {
                Pred::exists(vec!["q".into()], Pred::connect(Connective::And, range, body))
            }
        }
    }
}

/// The operation available to generated calls.
pub fn ops() -> Operations {
    let m = parse_machine(
        "MACHINE Ops VARIABLES x, y INVARIANT x : 0..4 & y : 0..4 INITIALISATION x, y := 0, 0 OPERATIONS
           rr <-- bump(a) = PRE a : 0..4 THEN x := x + a || rr := x END
         END",
    )
    .unwrap();
    Operations::from_machines([&m])
}

fn writes_only(rng: &mut impl Rng, depth: u32, target: &'static str, scope: &[&str]) -> Subst {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.7) {
            Subst::assign1(target, gen_expr(rng, 2, scope))
        } else {
            Subst::choice(target, gen_set(rng, scope))
        };
    }
    match rng.gen_range(0..3) {
        0 => Subst::pre(gen_pred(rng, 1, scope), writes_only(rng, depth - 1, target, scope)),
        1 => Subst::seq(writes_only(rng, depth - 1, target, scope), writes_only(rng, depth - 1, target, scope)),
        _ => Subst::block(writes_only(rng, depth - 1, target, scope)),
    }
}

pub fn gen_subst(rng: &mut impl Rng, depth: u32) -> Subst {
    let scope: &[&str] = &VARS;
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 => Subst::skip(),
            1 => Subst::assign1(var(rng), gen_expr(rng, 2, scope)),
            2 => Subst::assign(VARS.iter().map(|v| v.to_string()).collect(), vec![gen_expr(rng, 2, scope), gen_expr(rng, 2, scope)])
                .unwrap(),
            3 => Subst::choice(var(rng), gen_set(rng, scope)),
            _ => Subst::call(vec!["y".into()], "bump", vec![gen_expr(rng, 1, scope)]),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..5) {
        0 => Subst::pre(gen_pred(rng, 2, scope), gen_subst(rng, d)),
        1 => Subst::seq(gen_subst(rng, d), gen_subst(rng, d)),
        2 => Subst::parallel(writes_only(rng, d, "x", scope), writes_only(rng, d, "y", scope)).unwrap(),
        3 => {
            let inner = ["x", "y", "z"];
            let init = Subst::assign1("z", gen_expr(rng, 2, scope));
            let body = Subst::assign1(var(rng), gen_expr(rng, 2, &inner));
            Subst::local(vec!["z".into()], Subst::sequence(vec![init, body, gen_subst(rng, d)]))
        }
        _ => Subst::block(gen_subst(rng, d)),
    }
}

pub fn gen_state(rng: &mut impl Rng) -> Env {
    VARS.iter().map(|v| (v.to_string(), Value::Int(rng.gen_range(0..=MAX)))).collect()
}

/// Whether `eval(wp(s, p))` agrees with running `s` and checking `p` in
/// every final state. `Err` carries a description of the disagreement.
pub fn oracle_agrees(s: &Subst, p: &Pred, state: &Env) -> Result<(), String> {
    let m = FiniteModel::new();
    let ops = ops();
    let w = wp(s, p, &ops).map_err(|e| format!("wp: {e}"))?;
    let lhs = eval_pred(&w, &m, state).map_err(|e| format!("eval wp: {e}"))?;
    let out = successors(s, &m, state, &ops).map_err(|e| format!("successors: {e}"))?;
    let mut rhs = out.terminates;
    for post in &out.successors {
        let post: Env = post.iter().filter(|(k, _)| VARS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
        rhs &= eval_pred(p, &m, &post).map_err(|e| format!("eval post: {e}"))?;
    }
    if lhs == rhs {
        Ok(())
    } else {
        Err(format!("wp says {lhs}, successors say {rhs}"))
    }
}

// ---- naive reference evaluator for the generated predicate fragment ------

fn naive_expr(e: &Expr, env: &[(String, i64)]) -> i64 {
    match &e.kind {
        ExprKind::Int(n) => *n,
        ExprKind::Var(v) => env.iter().rev().find(|(k, _)| k == v).map(|(_, x)| *x).expect("bound"),
        ExprKind::Bin(BinOp::Add, a, b) => naive_expr(a, env) + naive_expr(b, env),
        ExprKind::Bin(BinOp::Sub, a, b) => naive_expr(a, env) - naive_expr(b, env),
        other => panic!("outside the fragment: {other:?}"),
    }
}

fn naive_set(e: &Expr, env: &[(String, i64)]) -> BTreeSet<i64> {
    match &e.kind {
        ExprKind::Bin(BinOp::Interval, a, b) => (naive_expr(a, env)..=naive_expr(b, env)).collect(),
        ExprKind::SetEnum(items) => items.iter().map(|i| naive_expr(i, env)).collect(),
        other => panic!("outside the fragment: {other:?}"),
    }
}

pub fn naive_pred(p: &Pred, env: &mut Vec<(String, i64)>) -> bool {
    match &p.kind {
        PredKind::True => true,
        PredKind::False => false,
        PredKind::Cmp(op, a, b) => match op {
            CmpOp::In => naive_set(b, env).contains(&naive_expr(a, env)),
            CmpOp::Lt => naive_expr(a, env) < naive_expr(b, env),
            CmpOp::Le => naive_expr(a, env) <= naive_expr(b, env),
            CmpOp::Eq => naive_expr(a, env) == naive_expr(b, env),
            other => panic!("outside the fragment: {other:?}"),
        },
        PredKind::Not(a) => !naive_pred(a, env),
        PredKind::Bin(c, a, b) => {
            let (a, b) = (naive_pred(a, env), naive_pred(b, env));
            match c {
                Connective::And => a && b,
                Connective::Or => a || b,
                Connective::Implies => !a || b,
                Connective::Iff => a == b,
            }
        }
        PredKind::Quant(q, xs, body) => {
            // generated quantifiers bind one variable over 0..=MAX
            let mut results = (0..=MAX).map(|v| {
                env.push((xs[0].clone(), v));
                let r = naive_pred(body, env);
                env.pop();
                r
            });
            match q {
                Quantifier::ForAll => results.all(|r| r),
                Quantifier::Exists => results.any(|r| r),
            }
        }
    }
}

/// First valuation of `x`, `y` over 0..=MAX (lexicographic) falsifying `p`.
pub fn naive_counterexample(p: &Pred) -> Option<(i64, i64)> {
    for x in 0..=MAX {
        for y in 0..=MAX {
            let mut env = vec![("x".to_string(), x), ("y".to_string(), y)];
            if !naive_pred(p, &mut env) {
                return Some((x, y));
            }
        }
    }
    None
}
