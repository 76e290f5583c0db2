//! Generalized-substitution semantics: weakest preconditions, termination
//! predicates, and the relational reading over finite models.
//!
//! Operation calls are inlined before any of the three is computed, so the
//! callee's precondition and writes are visible to the caller. A call
//! `r <-- op(a)` of `o <-- op(q) = B` becomes
//! `VAR q' IN q' := a ; B[q := q', o := r] END` with `q'` fresh.
//!
//! Parallel composition is reduced to sequencing. When `T` reads what `S`
//! writes, those values are snapshotted first:
//! `S || T  =  VAR c IN c := w ; S ; T[w := c] END`.
//!
//! Sequence termination is `trm(S;T) = trm(S) & [S]trm(T)`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::*;
use crate::eval::{Env, EvalError, FiniteModel, Scope};
use crate::names::{
    fresh_name, pred_all_names, pred_free_vars, rename_subst, subst_all_names, subst_vars, substitute, Bindings,
    Names,
};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalcError {
    #[error("call to unknown operation {0}")]
    UnknownOperation(String),
    #[error("recursive call to operation {0}")]
    Recursion(String),
    #[error("call to {op}: expected {expected} {what}, found {found}")]
    Arity { op: String, what: &'static str, expected: usize, found: usize },
    #[error("call to {op}: result variable {name} is also used inside the callee")]
    ResultCollision { op: String, name: String },
    #[error("parallel branches both write {0}")]
    OverlappingParallel(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Operations available to calls, by name.
#[derive(Clone, Debug, Default)]
pub struct Operations {
    ops: BTreeMap<String, OperationDef>,
}

impl Operations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_machines<'a>(ms: impl IntoIterator<Item = &'a MachineDef>) -> Self {
        let mut t = Operations::new();
        for m in ms {
            for op in &m.operations {
                t.insert(op.clone());
            }
        }
        t
    }

    pub fn insert(&mut self, op: OperationDef) {
        self.ops.insert(op.name.clone(), op);
    }

    pub fn get(&self, name: &str) -> Option<&OperationDef> {
        self.ops.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.ops.keys()
    }
}

// ---- inlining -----------------------------------------------------------

/// Expands every call in `s`.
pub fn inline_calls(s: &Subst, ops: &Operations) -> Result<Subst, CalcError> {
    inline(s, ops, &mut Vec::new())
}

fn inline(s: &Subst, ops: &Operations, stack: &mut Vec<String>) -> Result<Subst, CalcError> {
    let sp = s.span.clone();
    let kind = match &s.kind {
        SubstKind::Skip | SubstKind::Assign(..) | SubstKind::Choice(..) => return Ok(s.clone()),
        SubstKind::Pre(p, b) => SubstKind::Pre(p.clone(), Box::new(inline(b, ops, stack)?)),
        SubstKind::Seq(a, b) => SubstKind::Seq(Box::new(inline(a, ops, stack)?), Box::new(inline(b, ops, stack)?)),
        SubstKind::Parallel(a, b) => {
            let (a, b) = (inline(a, ops, stack)?, inline(b, ops, stack)?);
            let (wa, wb) = (subst_vars(&a).write, subst_vars(&b).write);
            if let Some(v) = wa.intersection(&wb).next() {
                return Err(CalcError::OverlappingParallel(v.clone()));
            }
            SubstKind::Parallel(Box::new(a), Box::new(b))
        }
        SubstKind::Var(xs, b) => SubstKind::Var(xs.clone(), Box::new(inline(b, ops, stack)?)),
        SubstKind::Block(b) => SubstKind::Block(Box::new(inline(b, ops, stack)?)),
        SubstKind::Call { results, op, args } => {
            if stack.contains(op) {
                return Err(CalcError::Recursion(op.clone()));
            }
            let def = ops.get(op).ok_or_else(|| CalcError::UnknownOperation(op.clone()))?;
            if def.params.len() != args.len() {
                return Err(CalcError::Arity {
                    op: op.clone(),
                    what: "arguments",
                    expected: def.params.len(),
                    found: args.len(),
                });
            }
            if def.results.len() != results.len() {
                return Err(CalcError::Arity {
                    op: op.clone(),
                    what: "results",
                    expected: def.results.len(),
                    found: results.len(),
                });
            }
            let body_names = subst_all_names(&def.body);
            if let Some(r) = results.iter().zip(&def.results).find(|(r, o)| r != o && body_names.contains(*r)) {
                return Err(CalcError::ResultCollision { op: op.clone(), name: r.0.clone() });
            }
            let mut avoid = body_names.clone();
            args.iter().for_each(|a| avoid.extend(crate::names::expr_free_vars(a)));
            avoid.extend(results.iter().cloned());
            let mut map = BTreeMap::new();
            let mut fresh_params = Vec::new();
            for q in &def.params {
                let f = fresh_name(q, &avoid);
                avoid.insert(f.clone());
                map.insert(q.clone(), f.clone());
                fresh_params.push(f);
            }
            for (o, r) in def.results.iter().zip(results) {
                map.insert(o.clone(), r.clone());
            }
            stack.push(op.clone());
            let body = inline(&rename_subst(&def.body, &map), ops, stack);
            stack.pop();
            let body = body?;
            if fresh_params.is_empty() {
                return Ok(body.with_span(sp));
            }
            let bind = Subst::assign(fresh_params.clone(), args.clone()).expect("fresh parameters are distinct");
            SubstKind::Var(fresh_params, Box::new(Subst::seq(bind, body)))
        }
    };
    Ok(Subst { kind, span: sp })
}

/// `S || T` as a sequence, snapshotting what `S` writes and `T` reads.
fn sequentialise(a: &Subst, b: &Subst, avoid: &Names) -> Subst {
    let wa = subst_vars(a).write;
    let rb = subst_vars(b).read;
    let shared: Vec<String> = wa.intersection(&rb).cloned().collect();
    if shared.is_empty() {
        return Subst::seq(a.clone(), b.clone());
    }
    let mut avoid = avoid.clone();
    avoid.extend(subst_all_names(a));
    avoid.extend(subst_all_names(b));
    let mut map = BTreeMap::new();
    let mut copies = Vec::new();
    for w in &shared {
        let c = fresh_name(w, &avoid);
        avoid.insert(c.clone());
        map.insert(w.clone(), c.clone());
        copies.push(c);
    }
    let snapshot = Subst::assign(copies.clone(), shared.iter().map(Expr::var).collect()).expect("distinct copies");
    Subst::local(copies, Subst::sequence(vec![snapshot, a.clone(), rename_subst(b, &map)]))
}

// ---- weakest precondition -----------------------------------------------

/// `[S]P`.
pub fn wp(s: &Subst, p: &Pred, ops: &Operations) -> Result<Pred, CalcError> {
    Ok(wp_core(&inline_calls(s, ops)?, p))
}

fn wp_core(s: &Subst, p: &Pred) -> Pred {
    match &s.kind {
        SubstKind::Skip => p.clone(),
        SubstKind::Assign(xs, es) => {
            let b: Bindings = xs.iter().cloned().zip(es.iter().cloned()).collect();
            substitute(p, &b)
        }
        SubstKind::Choice(v, set) => {
            let mut avoid = pred_all_names(p);
            avoid.extend(crate::names::expr_free_vars(set));
            avoid.insert(v.clone());
            let x = fresh_name("x", &avoid);
            let body = substitute(p, &Bindings::from([(v.clone(), Expr::var(&x))]));
            Pred::forall(vec![x.clone()], Pred::implies(Pred::member(Expr::var(x), set.clone()), body))
        }
        SubstKind::Pre(q, body) => Pred::and(q.clone(), wp_core(body, p)),
        SubstKind::Seq(a, b) => wp_core(a, &wp_core(b, p)),
        SubstKind::Parallel(a, b) => wp_core(&sequentialise(a, b, &pred_all_names(p)), p),
        SubstKind::Var(xs, body) => {
            let (xs, body) = freshen_locals(xs, body, p);
            let q = wp_core(&body, p);
            close_over(&xs, q)
        }
        SubstKind::Block(b) => wp_core(b, p),
        SubstKind::Call { op, .. } => unreachable!("call to {op} survived inlining"),
    }
}

/// Renames `VAR` binders that occur in `p`.
fn freshen_locals(xs: &[String], body: &Subst, p: &Pred) -> (Vec<String>, Subst) {
    let fv = pred_free_vars(p);
    if !xs.iter().any(|x| fv.contains(x)) {
        return (xs.to_vec(), body.clone());
    }
    let mut avoid = pred_all_names(p);
    avoid.extend(subst_all_names(body));
    let mut map = BTreeMap::new();
    let mut out = Vec::new();
    for x in xs {
        if fv.contains(x) {
            let f = fresh_name(x, &avoid);
            avoid.insert(f.clone());
            map.insert(x.clone(), f.clone());
            out.push(f);
        } else {
            out.push(x.clone());
        }
    }
    (out, rename_subst(body, &map))
}

/// `!xs.(q)` over those `xs` still free in `q`; `q` itself if none are.
fn close_over(xs: &[String], q: Pred) -> Pred {
    let fv = pred_free_vars(&q);
    let still: Vec<String> = xs.iter().filter(|x| fv.contains(*x)).cloned().collect();
    if still.is_empty() {
        q
    } else {
        Pred::forall(still, q)
    }
}

// ---- termination --------------------------------------------------------

pub fn trm(s: &Subst, ops: &Operations) -> Result<Pred, CalcError> {
    Ok(trm_core(&inline_calls(s, ops)?))
}

fn trm_core(s: &Subst) -> Pred {
    match &s.kind {
        SubstKind::Skip | SubstKind::Assign(..) => Pred::truth(),
        SubstKind::Choice(_, set) => Pred::cmp(CmpOp::Neq, set.clone(), Expr::empty_set()),
        SubstKind::Pre(q, body) => Pred::and(q.clone(), trm_core(body)),
        SubstKind::Seq(a, b) => Pred::and(trm_core(a), wp_core(a, &trm_core(b))),
        SubstKind::Parallel(a, b) => Pred::and(trm_core(a), trm_core(b)),
        SubstKind::Var(xs, body) => close_over(xs, trm_core(body)),
        SubstKind::Block(b) => trm_core(b),
        SubstKind::Call { op, .. } => unreachable!("call to {op} survived inlining"),
    }
}

// ---- relational semantics -----------------------------------------------

/// Result of running a substitution from one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub terminates: bool,
    /// Final environments (state and results); empty when not terminating.
    pub successors: BTreeSet<Env>,
}

impl Outcome {
    fn aborts() -> Self {
        Outcome { terminates: false, successors: BTreeSet::new() }
    }
    fn single(env: Env) -> Self {
        Outcome { terminates: true, successors: BTreeSet::from([env]) }
    }
}

pub fn successors(s: &Subst, model: &FiniteModel, state: &Env, ops: &Operations) -> Result<Outcome, CalcError> {
    run(&inline_calls(s, ops)?, model, state)
}

fn eval_expr(e: &Expr, m: &FiniteModel, env: &Env) -> Result<Value, CalcError> {
    Ok(Scope::with_env(m, env).expr(e)?)
}

fn run(s: &Subst, m: &FiniteModel, env: &Env) -> Result<Outcome, CalcError> {
    match &s.kind {
        SubstKind::Skip => Ok(Outcome::single(env.clone())),
        SubstKind::Assign(xs, es) => {
            let mut out = env.clone();
            let vals = es.iter().map(|e| eval_expr(e, m, env)).collect::<Result<Vec<_>, _>>()?;
            for (x, v) in xs.iter().zip(vals) {
                out.insert(x.clone(), v);
            }
            Ok(Outcome::single(out))
        }
        SubstKind::Choice(x, set) => {
            let v = eval_expr(set, m, env)?;
            let items = v
                .as_set()
                .ok_or_else(|| EvalError::Type(format!("choice from a non-set value {v}")))?;
            if items.is_empty() {
                return Ok(Outcome::aborts());
            }
            let successors = items
                .iter()
                .map(|i| {
                    let mut e = env.clone();
                    e.insert(x.clone(), i.clone());
                    e
                })
                .collect();
            Ok(Outcome { terminates: true, successors })
        }
        SubstKind::Pre(q, body) => {
            if !Scope::with_env(m, env).pred(q)? {
                return Ok(Outcome::aborts());
            }
            run(body, m, env)
        }
        SubstKind::Seq(a, b) => {
            let first = run(a, m, env)?;
            if !first.terminates {
                return Ok(first);
            }
            let mut successors = BTreeSet::new();
            for mid in &first.successors {
                let next = run(b, m, mid)?;
                if !next.terminates {
                    return Ok(Outcome::aborts());
                }
                successors.extend(next.successors);
            }
            Ok(Outcome { terminates: true, successors })
        }
        SubstKind::Parallel(a, b) => {
            let (oa, ob) = (run(a, m, env)?, run(b, m, env)?);
            if !oa.terminates || !ob.terminates {
                return Ok(Outcome::aborts());
            }
            let wb = subst_vars(b).write;
            let mut successors = BTreeSet::new();
            for ea in &oa.successors {
                for eb in &ob.successors {
                    let mut merged = ea.clone();
                    for w in &wb {
                        if let Some(v) = eb.get(w) {
                            merged.insert(w.clone(), v.clone());
                        }
                    }
                    successors.insert(merged);
                }
            }
            Ok(Outcome { terminates: true, successors })
        }
        SubstKind::Var(xs, body) => {
            let mut inner = env.clone();
            for x in xs {
                inner.remove(x);
            }
            let o = run(body, m, &inner)?;
            let successors = o
                .successors
                .into_iter()
                .map(|mut e| {
                    for x in xs {
                        match env.get(x) {
                            Some(v) => e.insert(x.clone(), v.clone()),
                            None => e.remove(x),
                        };
                    }
                    e
                })
                .collect();
            Ok(Outcome { terminates: o.terminates, successors })
        }
        SubstKind::Block(b) => run(b, m, env),
        SubstKind::Call { op, .. } => unreachable!("call to {op} survived inlining"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_pred;
    use crate::names::alpha_eq;
    use crate::parser::{parse_machine, parse_model, parse_pred, parse_subst};

    fn s(t: &str) -> Subst {
        parse_subst(t).unwrap()
    }
    fn p(t: &str) -> Pred {
        parse_pred(t).unwrap()
    }
    fn none() -> Operations {
        Operations::new()
    }

    #[test]
    fn assignment_substitutes() {
        assert!(alpha_eq(&wp(&s("value := 5"), &p("value > 3"), &none()).unwrap(), &p("5 > 3")));
        assert!(alpha_eq(&wp(&s("skip"), &p("a = b"), &none()).unwrap(), &p("a = b")));
    }

    #[test]
    fn choice_quantifies_fresh_x() {
        let got = wp(&s("v :: {1, 2}"), &p("v >= 1"), &none()).unwrap();
        assert!(alpha_eq(&got, &p("!x.(x : {1, 2} => x >= 1)")));
        // The bound name avoids names already in the postcondition.
        let got = wp(&s("v :: {1}"), &p("v = x"), &none()).unwrap();
        let PredKind::Quant(_, xs, _) = &got.kind else { panic!() };
        assert_eq!(xs, &["x1".to_string()]);
    }

    #[test]
    fn pre_and_sequence() {
        let got = wp(&s("PRE a > 0 THEN a := a - 1 ; b := a END"), &p("b >= 0"), &none()).unwrap();
        assert!(alpha_eq(&got, &p("a > 0 & a - 1 >= 0")));
    }

    #[test]
    fn parallel_reads_pre_state() {
        let got = wp(&s("a := b || b := a"), &p("a = 1 & b = 2"), &none()).unwrap();
        let m = FiniteModel::new();
        let env = Env::from([("a".into(), Value::Int(2)), ("b".into(), Value::Int(1))]);
        assert!(eval_pred(&got, &m, &env).unwrap());
        let env = Env::from([("a".into(), Value::Int(1)), ("b".into(), Value::Int(2))]);
        assert!(!eval_pred(&got, &m, &env).unwrap());
    }

    #[test]
    fn trm_rules() {
        let inc = s("PRE vv : JINT & sum_jint(value, vv) : JINT THEN value := sum_jint(value, vv) END");
        assert!(alpha_eq(&trm(&inc, &none()).unwrap(), &p("vv : JINT & sum_jint(value, vv) : JINT")));
        assert!(matches!(trm(&s("v := 3"), &none()).unwrap().kind, PredKind::True));
        let empty = trm(&s("v :: {}"), &none()).unwrap();
        assert!(!eval_pred(&empty, &FiniteModel::new(), &Env::new()).unwrap());
    }

    #[test]
    fn successors_enumerate_choices() {
        let m = FiniteModel::new();
        let env = Env::from([("v".into(), Value::Int(0))]);
        let o = successors(&s("v :: {1, 2}"), &m, &env, &none()).unwrap();
        assert!(o.terminates);
        let vs: Vec<_> = o.successors.iter().map(|e| e["v"].clone()).collect();
        assert_eq!(vs, vec![Value::Int(1), Value::Int(2)]);
        let o = successors(&s("v :: {}"), &m, &env, &none()).unwrap();
        assert!(!o.terminates && o.successors.is_empty());
    }

    #[test]
    fn increment_on_scaled_model() {
        let m = FiniteModel::from_spec(
            &parse_model("SETS JINT = 0..255 CONSTANTS sum_jint = %(a, b).(a : JINT & b : JINT | a + b)").unwrap(),
        )
        .unwrap();
        let body = s("PRE vv : JINT & sum_jint(value, vv) : JINT THEN value := sum_jint(value, vv) END");
        let env = Env::from([("value".into(), Value::Int(10)), ("vv".into(), Value::Int(5))]);
        let o = successors(&body, &m, &env, &none()).unwrap();
        assert_eq!(o.successors.len(), 1);
        assert_eq!(o.successors.first().unwrap()["value"], Value::Int(15));
    }

    #[test]
    fn calls_are_inlined_with_fresh_parameters() {
        let callee = parse_machine(
            "MACHINE C VARIABLES c INVARIANT c : 0..9 INITIALISATION c := 0 OPERATIONS
               inc(n) = PRE c + n <= 9 THEN c := c + n END;
               r <-- get = r := c
             END",
        )
        .unwrap();
        let ops = Operations::from_machines([&callee]);
        let body = s("VAR t IN t := 2 ; inc(t) ; out <-- get END");
        let w = wp(&body, &p("out = 5"), &ops).unwrap();
        let m = FiniteModel::new();
        assert!(eval_pred(&w, &m, &Env::from([("c".into(), Value::Int(3))])).unwrap());
        assert!(!eval_pred(&w, &m, &Env::from([("c".into(), Value::Int(8))])).unwrap());
        let t = trm(&body, &ops).unwrap();
        assert!(eval_pred(&t, &m, &Env::from([("c".into(), Value::Int(7))])).unwrap());
        assert!(!eval_pred(&t, &m, &Env::from([("c".into(), Value::Int(8))])).unwrap());
        // The argument may mention the callee's own parameter name.
        let shadow = s("VAR n IN n := 1 ; inc(n + 1) END");
        let o = successors(&shadow, &m, &Env::from([("c".into(), Value::Int(0))]), &ops).unwrap();
        assert_eq!(o.successors.first().unwrap()["c"], Value::Int(2));
    }

    #[test]
    fn call_errors() {
        let m = parse_machine("MACHINE C OPERATIONS loop = loop; r <-- get = r := 1 END").unwrap();
        let ops = Operations::from_machines([&m]);
        assert_eq!(wp(&s("loop"), &p("btrue"), &ops).unwrap_err(), CalcError::Recursion("loop".into()));
        assert!(matches!(wp(&s("nope"), &p("btrue"), &ops), Err(CalcError::UnknownOperation(_))));
        assert!(matches!(wp(&s("get"), &p("btrue"), &ops), Err(CalcError::Arity { .. })));
    }
}
