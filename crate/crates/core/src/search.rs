//! Exhaustive counterexample search.
//!
//! A formula `h1 & ... & hn => c` (nested implications are flattened) is
//! enumerated depth-first over its free variables in declaration order and
//! ascending value order, so the first refuting valuation found is the
//! lexicographically least. Hypothesis `hj` is evaluated as soon as every
//! variable of `h1..hj` is bound, preserving left-to-right evaluation order;
//! a false hypothesis prunes the whole subtree.
//!
//! When the first hypothesis to become evaluable at variable `x` has the form
//! `x = E` (or `E = x`), only the value of `E` is tried for `x`.
//!
//! Closed subexpressions are evaluated once up front. The first variable's
//! values are distributed over the rayon pool; `find_map_first` keeps the
//! reported witness identical to the sequential one.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::ast::*;
use crate::eval::{Env, EvalError, FiniteModel, Scope};
use crate::names::{expr_free_vars, pred_free_vars, Names};
use crate::value::Value;

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    pub deadline: Option<Instant>,
    /// Enumerate the first variable on the calling thread only.
    pub sequential: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Holds,
    Refuted(Env),
    /// Evaluation failed at this valuation.
    IllDefined(Env, EvalError),
    Timeout,
}

/// The first refuting valuation, if any. `Err` carries an ill-defined
/// valuation (or a carrier that does not evaluate) and a timeout.
pub fn find_counterexample(p: &Pred, m: &FiniteModel, free: &[(String, Expr)]) -> Result<Option<Env>, SearchError> {
    match search(p, m, free, &SearchOptions::default())? {
        SearchOutcome::Holds => Ok(None),
        SearchOutcome::Refuted(env) => Ok(Some(env)),
        SearchOutcome::IllDefined(env, error) => Err(SearchError::IllDefined { env, error }),
        SearchOutcome::Timeout => Err(SearchError::Timeout),
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("{error} at {}", render_env(env))]
    IllDefined { env: Env, error: EvalError },
    #[error("carrier of {name} does not evaluate to a set: {error}")]
    Carrier { name: String, error: EvalError },
    #[error("search exceeded its deadline")]
    Timeout,
}

pub fn render_env(env: &Env) -> String {
    let parts: Vec<String> = env.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

// ---- hoisting -----------------------------------------------------------

struct Hoister<'m> {
    model: FiniteModel,
    base: &'m FiniteModel,
    free: Names,
    count: usize,
}

impl Hoister<'_> {
    fn is_closed(&self, e: &Expr, bound: &[String]) -> bool {
        expr_free_vars(e).iter().all(|v| !self.free.contains(v) && !bound.contains(v))
    }

    fn expr(&mut self, e: &Expr, bound: &mut Vec<String>) -> Expr {
        let trivial = matches!(e.kind, ExprKind::Var(_) | ExprKind::Int(_) | ExprKind::Funs(..));
        if !trivial && self.is_closed(e, bound) {
            if let Ok(v) = Scope::new(self.base).expr(e) {
                let name = format!("${}", self.count);
                self.count += 1;
                self.model.insert_constant(name.clone(), v);
                return Expr::var(name).with_span(e.span.clone());
            }
        }
        let kind = match &e.kind {
            ExprKind::Var(_) | ExprKind::Int(_) => return e.clone(),
            ExprKind::Pair(a, b) => ExprKind::Pair(Box::new(self.expr(a, bound)), Box::new(self.expr(b, bound))),
            ExprKind::Bin(op, a, b) => ExprKind::Bin(*op, Box::new(self.expr(a, bound)), Box::new(self.expr(b, bound))),
            ExprKind::Un(op, a) => ExprKind::Un(*op, Box::new(self.expr(a, bound))),
            ExprKind::SetEnum(items) => ExprKind::SetEnum(items.iter().map(|i| self.expr(i, bound)).collect()),
            ExprKind::Apply(f, a) => ExprKind::Apply(Box::new(self.expr(f, bound)), Box::new(self.expr(a, bound))),
            ExprKind::Image(f, a) => ExprKind::Image(Box::new(self.expr(f, bound)), Box::new(self.expr(a, bound))),
            ExprKind::Funs(k, a, b) => ExprKind::Funs(*k, Box::new(self.expr(a, bound)), Box::new(self.expr(b, bound))),
            ExprKind::Lambda(xs, p, body) => {
                let n = bound.len();
                bound.extend(xs.iter().cloned());
                let k = ExprKind::Lambda(xs.clone(), Box::new(self.pred(p, bound)), Box::new(self.expr(body, bound)));
                bound.truncate(n);
                k
            }
        };
        Expr { kind, span: e.span.clone() }
    }

    fn pred(&mut self, p: &Pred, bound: &mut Vec<String>) -> Pred {
        let kind = match &p.kind {
            PredKind::True | PredKind::False => return p.clone(),
            PredKind::Cmp(op, a, b) => PredKind::Cmp(*op, Box::new(self.expr(a, bound)), Box::new(self.expr(b, bound))),
            PredKind::Bin(c, a, b) => PredKind::Bin(*c, Box::new(self.pred(a, bound)), Box::new(self.pred(b, bound))),
            PredKind::Not(a) => PredKind::Not(Box::new(self.pred(a, bound))),
            PredKind::Quant(q, xs, body) => {
                let n = bound.len();
                bound.extend(xs.iter().cloned());
                let k = PredKind::Quant(*q, xs.clone(), Box::new(self.pred(body, bound)));
                bound.truncate(n);
                k
            }
        };
        Pred { kind, span: p.span.clone() }
    }
}

/// Replaces closed, well-defined subexpressions by synthetic constants
/// (`$0`, `$1`, ...; not lexable) of an extended model.
pub fn hoist_closed(p: &Pred, m: &FiniteModel, free: &[String]) -> (Pred, FiniteModel) {
    let mut h = Hoister { model: m.clone(), base: m, free: free.iter().cloned().collect(), count: 0 };
    let q = h.pred(p, &mut Vec::new());
    (q, h.model)
}

// ---- search -------------------------------------------------------------

fn flatten(p: &Pred) -> (Vec<&Pred>, &Pred) {
    let mut hyps = Vec::new();
    let mut cur = p;
    while let PredKind::Bin(Connective::Implies, a, b) = &cur.kind {
        hyps.extend(a.conjuncts());
        cur = b;
    }
    (hyps, cur)
}

struct Plan<'a> {
    names: Vec<&'a str>,
    carriers: Vec<&'a Expr>,
    /// Hypotheses to evaluate once variable `i` is bound; index 0 is before any.
    at_level: Vec<Vec<&'a Pred>>,
    /// Solved equation for variable `i` (1-based level): `x_i = rhs`.
    solved: Vec<Option<&'a Expr>>,
    conclusion: &'a Pred,
}

fn make_plan<'a>(p: &'a Pred, free: &'a [(String, Expr)]) -> Plan<'a> {
    let names: Vec<&str> = free.iter().map(|(n, _)| n.as_str()).collect();
    let (hyps, conclusion) = flatten(p);
    let n = names.len();
    let mut at_level = vec![Vec::new(); n + 1];
    let mut prefix = 0usize;
    for h in hyps {
        let fv = pred_free_vars(h);
        let own = names.iter().rposition(|x| fv.contains(*x)).map_or(0, |i| i + 1);
        prefix = prefix.max(own);
        at_level[prefix].push(h);
    }
    let mut solved = vec![None; n + 1];
    for level in 1..=n {
        let x = names[level - 1];
        if let Some(first) = at_level[level].first() {
            if let PredKind::Cmp(CmpOp::Eq, a, b) = &first.kind {
                let rhs = match (a.as_var(), b.as_var()) {
                    (Some(v), _) if v == x && !expr_free_vars(b).contains(x) => Some(&**b),
                    (_, Some(v)) if v == x && !expr_free_vars(a).contains(x) => Some(&**a),
                    _ => None,
                };
                solved[level] = rhs;
            }
        }
    }
    Plan { names, carriers: free.iter().map(|(_, c)| c).collect(), at_level, solved, conclusion }
}

enum Step {
    Continue,
    Done(SearchOutcome),
}

struct Walker<'a> {
    plan: &'a Plan<'a>,
    scope: Scope<'a>,
    deadline: Option<Instant>,
    ticks: u32,
    cancelled: &'a AtomicU32,
}

impl<'a> Walker<'a> {
    fn env(&self) -> Env {
        self.scope.stack.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    /// The current partial valuation extended by the least value of each
    /// remaining carrier, when that is computable.
    fn witness(&mut self) -> Env {
        let mark = self.scope.stack.len();
        for i in mark..self.plan.names.len() {
            let Ok(Value::Set(s)) = self.scope.expr(self.plan.carriers[i]) else { break };
            let Some(first) = s.iter().next() else { break };
            self.scope.stack.push((self.plan.names[i], first.clone()));
        }
        let env = self.env();
        self.scope.stack.truncate(mark);
        env
    }

    fn check_hyps(&mut self, level: usize) -> Result<bool, SearchOutcome> {
        for h in &self.plan.at_level[level] {
            match self.scope.pred(h) {
                Ok(true) => {}
                Ok(false) => return Ok(false),
                Err(e) => return Err(SearchOutcome::IllDefined(self.witness(), e)),
            }
        }
        Ok(true)
    }

    fn timed_out(&mut self) -> bool {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks % 1024 != 0 {
            return false;
        }
        if self.cancelled.load(Ordering::Relaxed) != 0 {
            return true;
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.cancelled.store(1, Ordering::Relaxed);
            return true;
        }
        false
    }

    fn candidates(&mut self, level: usize) -> Result<Vec<Value>, SearchOutcome> {
        let carrier = match self.scope.expr(self.plan.carriers[level - 1]) {
            Ok(Value::Set(s)) => s,
            Ok(v) => {
                let e = EvalError::Type(format!("carrier of {} is not a set: {v}", self.plan.names[level - 1]));
                return Err(SearchOutcome::IllDefined(self.env(), e));
            }
            Err(e) => return Err(SearchOutcome::IllDefined(self.env(), e)),
        };
        if let Some(rhs) = self.plan.solved[level] {
            if let Ok(v) = self.scope.expr(rhs) {
                return Ok(if carrier.contains(&v) { vec![v] } else { Vec::new() });
            }
        }
        Ok(carrier.iter().cloned().collect())
    }

    /// Tries `value` for the variable at `level`, then recurses.
    fn visit(&mut self, level: usize, value: Value) -> Step {
        if self.timed_out() {
            return Step::Done(SearchOutcome::Timeout);
        }
        self.scope.stack.push((self.plan.names[level - 1], value));
        let step = match self.check_hyps(level) {
            Err(o) => Step::Done(o),
            Ok(false) => Step::Continue,
            Ok(true) => self.descend(level),
        };
        self.scope.stack.pop();
        step
    }

    /// All variables up to `level` are bound and their hypotheses hold.
    fn descend(&mut self, level: usize) -> Step {
        if level == self.plan.names.len() {
            return match self.scope.pred(self.plan.conclusion) {
                Ok(true) => Step::Continue,
                Ok(false) => Step::Done(SearchOutcome::Refuted(self.env())),
                Err(e) => Step::Done(SearchOutcome::IllDefined(self.env(), e)),
            };
        }
        let values = match self.candidates(level + 1) {
            Ok(v) => v,
            Err(o) => return Step::Done(o),
        };
        for v in values {
            if let Step::Done(o) = self.visit(level + 1, v) {
                return Step::Done(o);
            }
        }
        Step::Continue
    }
}

pub fn search(
    p: &Pred,
    m: &FiniteModel,
    free: &[(String, Expr)],
    opts: &SearchOptions,
) -> Result<SearchOutcome, SearchError> {
    if opts.deadline.is_some_and(|d| Instant::now() >= d) {
        return Ok(SearchOutcome::Timeout);
    }
    let names: Vec<String> = free.iter().map(|(n, _)| n.clone()).collect();
    // Vacuous when some closed carrier is empty.
    for (name, c) in free {
        if expr_free_vars(c).iter().any(|v| names.contains(v)) {
            continue;
        }
        match Scope::new(m).expr(c) {
            Ok(Value::Set(s)) if s.is_empty() => return Ok(SearchOutcome::Holds),
            Ok(Value::Set(_)) => {}
            Ok(v) => {
                let error = EvalError::Type(format!("{v} is not a set"));
                return Err(SearchError::Carrier { name: name.clone(), error });
            }
            Err(error) => return Err(SearchError::Carrier { name: name.clone(), error }),
        }
    }
    let (hoisted, model) = hoist_closed(p, m, &names);
    let plan = make_plan(&hoisted, free);
    let cancelled = AtomicU32::new(0);
    let walker = || Walker { plan: &plan, scope: Scope::new(&model), deadline: opts.deadline, ticks: 0, cancelled: &cancelled };

    let mut root = walker();
    match root.check_hyps(0) {
        Err(o) => return Ok(o),
        Ok(false) => return Ok(SearchOutcome::Holds),
        Ok(true) => {}
    }
    if plan.names.is_empty() {
        return Ok(match root.descend(0) {
            Step::Continue => SearchOutcome::Holds,
            Step::Done(o) => o,
        });
    }
    let first = match root.candidates(1) {
        Ok(v) => v,
        Err(o) => return Ok(o),
    };
    let run = |v: Value| {
        let mut w = walker();
        match w.visit(1, v) {
            Step::Continue => None,
            Step::Done(o) => Some(o),
        }
    };
    let found = if opts.sequential || first.len() < 2 {
        first.into_iter().find_map(run)
    } else {
        first.into_par_iter().find_map_first(run)
    };
    Ok(found.unwrap_or(SearchOutcome::Holds))
}
