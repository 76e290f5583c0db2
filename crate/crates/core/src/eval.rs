//! Extensional evaluation of expressions and predicates over finite models.
//!
//! Connectives are evaluated left to right with short-circuiting: the right
//! operand of `&` is only evaluated when the left holds, of `or` when it
//! fails, of `=>` when the antecedent holds. A guard therefore protects the
//! well-definedness of what it guards.
//!
//! Bound variables range over domains read off typing conjuncts `x : S` or
//! `(x, y) : S`: the antecedent of a `!`, the body of a `#`, the constraint
//! of a `%`. Restricting to those domains is exact for all three forms.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::*;
use crate::names::{expr_free_vars, pred_free_vars};
use crate::parser::{ModelSpec, SetDef};
use crate::value::{relation_image_of, Value, ValueSet};

pub type Env = BTreeMap<String, Value>;

/// Largest set an interval or function space may enumerate to.
pub const ENUMERATION_LIMIT: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// Well-definedness failure: partial application, checked arithmetic.
    #[error("ill-defined: {0}")]
    IllDefined(String),
    #[error("unbound name {0}")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("no finite domain for bound variable {0}: add a typing conjunct `{0} : S`")]
    NoDomain(String),
    #[error("{0} exceeds the enumeration limit")]
    TooLarge(String),
}

impl EvalError {
    pub fn is_ill_defined(&self) -> bool {
        matches!(self, EvalError::IllDefined(_))
    }
}

fn ill(msg: impl Into<String>) -> EvalError {
    EvalError::IllDefined(msg.into())
}

fn type_err(msg: impl Into<String>) -> EvalError {
    EvalError::Type(msg.into())
}

/// Carrier sets and constant values.
#[derive(Clone, Debug, Default)]
pub struct FiniteModel {
    sets: BTreeMap<String, Value>,
    constants: BTreeMap<String, Value>,
    order: Vec<String>,
}

impl FiniteModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, EvalError> {
        let mut m = FiniteModel::new();
        for d in &spec.sets {
            let v = m.set_value(&d.def)?;
            m.sets.insert(d.name.clone(), v);
            m.order.push(d.name.clone());
        }
        for c in &spec.constants {
            let v = eval_expr(c.def.expr(), &m, &Env::new())
                .map_err(|e| type_err(format!("constant {}: {e}", c.name)))?;
            m.constants.insert(c.name.clone(), v);
            m.order.push(c.name.clone());
        }
        Ok(m)
    }

    fn set_value(&self, d: &SetDef) -> Result<Value, EvalError> {
        Ok(match d {
            SetDef::Range(lo, hi) => interval(*lo, *hi)?,
            SetDef::Enum(items) => {
                let mut out = ValueSet::new();
                for e in items {
                    out.insert(eval_expr(e, self, &Env::new())?);
                }
                Value::from_set(out)
            }
            SetDef::Product(a, b) => {
                let (a, b) = (self.set_value(a)?, self.set_value(b)?);
                product(as_set(&a)?, as_set(&b)?)?
            }
            SetDef::Named(n) => self.sets.get(n).cloned().ok_or_else(|| EvalError::Unbound(n.clone()))?,
        })
    }

    pub fn with_set(mut self, name: impl Into<String>, items: ValueSet) -> Self {
        self.insert_set(name, items);
        self
    }

    pub fn with_constant(mut self, name: impl Into<String>, v: Value) -> Self {
        self.insert_constant(name, v);
        self
    }

    pub fn insert_set(&mut self, name: impl Into<String>, items: ValueSet) {
        let name = name.into();
        if !self.order.contains(&name) {
            self.order.push(name.clone());
        }
        self.sets.insert(name, Value::from_set(items));
    }

    pub fn insert_constant(&mut self, name: impl Into<String>, v: Value) {
        let name = name.into();
        if !self.order.contains(&name) {
            self.order.push(name.clone());
        }
        self.constants.insert(name, v);
    }

    pub fn set(&self, name: &str) -> Option<&ValueSet> {
        self.sets.get(name).and_then(Value::as_set)
    }

    pub fn constant(&self, name: &str) -> Option<&Value> {
        self.constants.get(name)
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        self.constants.get(name).or_else(|| self.sets.get(name))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    /// Set and constant names in declaration order.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn set_names(&self) -> impl Iterator<Item = &String> {
        self.order.iter().filter(|n| self.sets.contains_key(*n))
    }

    pub fn constant_names(&self) -> impl Iterator<Item = &String> {
        self.order.iter().filter(|n| self.constants.contains_key(*n))
    }
}

// ---- value helpers ------------------------------------------------------

fn as_set(v: &Value) -> Result<&ValueSet, EvalError> {
    v.as_set().ok_or_else(|| type_err(format!("expected a set, found {v}")))
}

fn as_int(v: &Value) -> Result<i64, EvalError> {
    v.as_int().ok_or_else(|| type_err(format!("expected an integer, found {v}")))
}

fn as_pair(v: &Value) -> Result<(&Value, &Value), EvalError> {
    v.as_pair().ok_or_else(|| type_err(format!("expected a pair, found {v}")))
}

fn interval(lo: i64, hi: i64) -> Result<Value, EvalError> {
    if hi >= lo && (hi - lo) as u64 >= ENUMERATION_LIMIT as u64 {
        return Err(EvalError::TooLarge(format!("interval {lo}..{hi}")));
    }
    Ok(Value::set((lo..=hi).map(Value::Int)))
}

fn product(a: &ValueSet, b: &ValueSet) -> Result<Value, EvalError> {
    if a.len().saturating_mul(b.len()) > ENUMERATION_LIMIT {
        return Err(EvalError::TooLarge("cartesian product".into()));
    }
    Ok(Value::set(a.iter().flat_map(|x| b.iter().map(move |y| Value::pair(x.clone(), y.clone())))))
}

fn checked(op: BinOp, a: i64, b: i64) -> Result<i64, EvalError> {
    let r = match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
        BinOp::Div | BinOp::Mod => {
            if b == 0 {
                return Err(ill(format!("{a} {} 0", op.token())));
            }
            if a < 0 || b < 0 {
                return Err(ill(format!("{a} {} {b} with a negative operand", op.token())));
            }
            Some(if op == BinOp::Div { a / b } else { a % b })
        }
        _ => unreachable!(),
    };
    r.ok_or_else(|| ill(format!("integer overflow in {a} {} {b}", op.token())))
}

/// Unique image of `x` under `f`, or an ill-definedness error.
pub fn apply_value(f: &Value, x: &Value) -> Result<Value, EvalError> {
    let rel = as_set(f)?;
    let mut img = relation_image_of(rel, x);
    match (img.next(), img.next()) {
        (Some(y), None) => Ok(y.clone()),
        (None, _) => Err(ill(format!("function applied outside its domain at {x}"))),
        (Some(_), Some(_)) => Err(ill(format!("relation is not functional at {x}"))),
    }
}

fn is_functional(rel: &ValueSet) -> Result<bool, EvalError> {
    let mut prev: Option<&Value> = None;
    for p in rel {
        let (x, _) = as_pair(p)?;
        if prev == Some(x) {
            return Ok(false);
        }
        prev = Some(x);
    }
    Ok(true)
}

/// Structural membership `f : A <op> B`.
fn in_function_space(f: &Value, kind: FunKind, a: &ValueSet, b: &ValueSet) -> Result<bool, EvalError> {
    let Some(rel) = f.as_set() else { return Ok(false) };
    let mut keys = ValueSet::new();
    let mut range = ValueSet::new();
    let mut ran_count = 0usize;
    for p in rel {
        let Some((x, y)) = p.as_pair() else { return Ok(false) };
        if !a.contains(x) || !b.contains(y) {
            return Ok(false);
        }
        keys.insert(x.clone());
        range.insert(y.clone());
        ran_count += 1;
    }
    if kind == FunKind::Relation {
        return Ok(true);
    }
    if !is_functional(rel)? {
        return Ok(false);
    }
    if kind == FunKind::Partial {
        return Ok(true);
    }
    if keys.len() != a.len() {
        return Ok(false);
    }
    let injective = range.len() == ran_count;
    let surjective = range.len() == b.len();
    Ok(match kind {
        FunKind::Total => true,
        FunKind::TotalInjection => injective,
        FunKind::TotalSurjection => surjective,
        FunKind::TotalBijection => injective && surjective,
        FunKind::Relation | FunKind::Partial => unreachable!(),
    })
}

/// Every member of `A <op> B`, ascending. Guarded by the enumeration limit.
fn function_space(kind: FunKind, a: &ValueSet, b: &ValueSet) -> Result<Value, EvalError> {
    let too_large = || EvalError::TooLarge(format!("function space of kind {}", kind.token()));
    let mut out = ValueSet::new();
    if kind == FunKind::Relation {
        let pairs: Vec<Value> = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| Value::pair(x.clone(), y.clone())))
            .collect();
        if pairs.len() >= 20 {
            return Err(too_large());
        }
        for mask in 0u32..(1 << pairs.len()) {
            out.insert(Value::set(
                pairs.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, p)| p.clone()),
            ));
        }
        return Ok(Value::from_set(out));
    }
    // Each point of `a` maps to an element of `b` or (only if partial) nowhere.
    let choices = b.len() + usize::from(kind == FunKind::Partial);
    let total = (0..a.len()).try_fold(1usize, |acc, _| acc.checked_mul(choices));
    match total {
        Some(t) if t <= ENUMERATION_LIMIT => {}
        _ => return Err(too_large()),
    }
    let xs: Vec<&Value> = a.iter().collect();
    let ys: Vec<&Value> = b.iter().collect();
    let mut digits = vec![0usize; xs.len()];
    loop {
        let f = Value::set(
            xs.iter()
                .zip(&digits)
                .filter(|(_, d)| **d < ys.len())
                .map(|(x, d)| Value::pair((*x).clone(), ys[*d].clone())),
        );
        if in_function_space(&f, kind, a, b)? {
            out.insert(f);
        }
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(Value::from_set(out));
            }
            digits[i] += 1;
            if digits[i] < choices {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

// ---- binder domains -----------------------------------------------------

/// One generator: enumerate `set`, destructuring each element by `pattern`.
struct Gen<'a> {
    pattern: &'a Expr,
    set: &'a Expr,
}

fn pattern_vars<'a>(e: &'a Expr, out: &mut Vec<&'a str>) -> bool {
    match &e.kind {
        ExprKind::Var(v) => {
            out.push(v);
            true
        }
        ExprKind::Pair(a, b) => pattern_vars(a, out) && pattern_vars(b, out),
        _ => false,
    }
}

/// Orders typing conjuncts into generators covering `binders`. A binder that
/// occurs in none of `uses`/`expr_uses` needs no domain.
fn plan<'a>(binders: &'a [String], typing: &[&'a Pred], uses: &[&'a Pred], expr_uses: &[&'a Expr]) -> Result<Vec<Gen<'a>>, EvalError> {
    let mut remaining: Vec<&str> = binders.iter().map(String::as_str).collect();
    let mut gens = Vec::new();
    loop {
        let mut progressed = false;
        for c in typing {
            let PredKind::Cmp(CmpOp::In, lhs, rhs) = &c.kind else { continue };
            let mut vars = Vec::new();
            if !pattern_vars(lhs, &mut vars) || vars.is_empty() {
                continue;
            }
            if !vars.iter().all(|v| remaining.contains(v)) {
                continue;
            }
            let mut distinct = vars.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() != vars.len() {
                continue;
            }
            let fv = expr_free_vars(rhs);
            if remaining.iter().any(|r| fv.contains(*r)) {
                continue;
            }
            remaining.retain(|r| !vars.contains(r));
            gens.push(Gen { pattern: lhs, set: rhs });
            progressed = true;
        }
        if remaining.is_empty() || !progressed {
            break;
        }
    }
    for r in remaining {
        let used = uses.iter().any(|p| pred_free_vars(p).contains(r))
            || expr_uses.iter().any(|e| expr_free_vars(e).contains(r));
        if used {
            return Err(EvalError::NoDomain(r.to_string()));
        }
    }
    Ok(gens)
}

// ---- evaluator ----------------------------------------------------------

/// Evaluation context: the model plus a binding stack searched innermost first.
pub(crate) struct Scope<'a> {
    pub model: &'a FiniteModel,
    pub stack: Vec<(&'a str, Value)>,
}

impl<'a> Scope<'a> {
    pub fn new(model: &'a FiniteModel) -> Self {
        Scope { model, stack: Vec::new() }
    }

    pub fn with_env(model: &'a FiniteModel, env: &'a Env) -> Self {
        let mut s = Scope::new(model);
        s.stack.extend(env.iter().map(|(k, v)| (k.as_str(), v.clone())));
        s
    }

    fn lookup(&self, name: &str) -> Result<Value, EvalError> {
        if let Some((_, v)) = self.stack.iter().rev().find(|(n, _)| *n == name) {
            return Ok(v.clone());
        }
        self.model.lookup(name).cloned().ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    /// Binds pattern variables to the components of `v`; false on shape mismatch.
    fn bind(&mut self, pattern: &'a Expr, v: &Value) -> bool {
        match &pattern.kind {
            ExprKind::Var(x) => {
                self.stack.push((x, v.clone()));
                true
            }
            ExprKind::Pair(a, b) => match v.as_pair() {
                Some((x, y)) => self.bind(a, x) && self.bind(b, y),
                None => false,
            },
            _ => false,
        }
    }

    /// Binds a left-nested argument tuple to `binders`.
    fn bind_args(&mut self, binders: &'a [String], v: &Value) -> bool {
        match binders.len() {
            0 => true,
            1 => {
                self.stack.push((&binders[0], v.clone()));
                true
            }
            n => match v.as_pair() {
                Some((init, last)) => {
                    if !self.bind_args(&binders[..n - 1], init) {
                        return false;
                    }
                    self.stack.push((&binders[n - 1], last.clone()));
                    true
                }
                None => false,
            },
        }
    }

    /// Calls `visit` for every valuation of the generators; stops when it
    /// returns `Some`.
    fn enumerate<T>(
        &mut self,
        gens: &[Gen<'a>],
        visit: &mut dyn FnMut(&mut Self) -> Result<Option<T>, EvalError>,
    ) -> Result<Option<T>, EvalError> {
        let Some((g, rest)) = gens.split_first() else {
            return visit(self);
        };
        let set = self.expr(g.set)?;
        let items = as_set(&set)?;
        for item in items {
            let mark = self.stack.len();
            let ok = self.bind(g.pattern, item);
            let r = if ok { self.enumerate(rest, visit)? } else { None };
            self.stack.truncate(mark);
            if r.is_some() {
                return Ok(r);
            }
        }
        Ok(None)
    }

    pub fn pred(&mut self, p: &'a Pred) -> Result<bool, EvalError> {
        match &p.kind {
            PredKind::True => Ok(true),
            PredKind::False => Ok(false),
            PredKind::Not(q) => Ok(!self.pred(q)?),
            PredKind::Bin(c, a, b) => match c {
                Connective::And => Ok(self.pred(a)? && self.pred(b)?),
                Connective::Or => Ok(self.pred(a)? || self.pred(b)?),
                Connective::Implies => Ok(!self.pred(a)? || self.pred(b)?),
                Connective::Iff => Ok(self.pred(a)? == self.pred(b)?),
            },
            PredKind::Cmp(op, a, b) => self.cmp(*op, a, b),
            PredKind::Quant(q, xs, body) => {
                let (typing, uses): (Vec<&Pred>, Vec<&Pred>) = match (q, &body.kind) {
                    (Quantifier::ForAll, PredKind::Bin(Connective::Implies, ante, _)) => {
                        (ante.conjuncts(), vec![&**body])
                    }
                    (Quantifier::ForAll, _) => (Vec::new(), vec![&**body]),
                    (Quantifier::Exists, _) => (body.conjuncts(), vec![&**body]),
                };
                let gens = plan(xs, &typing, &uses, &[])?;
                let want = *q == Quantifier::Exists;
                let found = self.enumerate(&gens, &mut |s| Ok((s.pred(body)? == want).then_some(())))?;
                Ok(found.is_some() == want)
            }
        }
    }

    fn member(&mut self, x: &Value, set: &'a Expr) -> Result<bool, EvalError> {
        match &set.kind {
            ExprKind::Funs(kind, a, b) => {
                let (av, bv) = (self.expr(a)?, self.expr(b)?);
                in_function_space(x, *kind, as_set(&av)?, as_set(&bv)?)
            }
            ExprKind::Bin(BinOp::Mul, a, b) => match x.as_pair() {
                Some((p, q)) => Ok(self.member(p, a)? && self.member(q, b)?),
                None => {
                    let s = self.expr(set)?;
                    Ok(as_set(&s)?.contains(x))
                }
            },
            ExprKind::Bin(BinOp::Interval, a, b) => {
                let (lo, hi) = (as_int(&self.expr(a)?)?, as_int(&self.expr(b)?)?);
                Ok(matches!(x, Value::Int(i) if lo <= *i && *i <= hi))
            }
            _ => {
                let s = self.expr(set)?;
                Ok(as_set(&s)?.contains(x))
            }
        }
    }

    fn cmp(&mut self, op: CmpOp, a: &'a Expr, b: &'a Expr) -> Result<bool, EvalError> {
        match op {
            CmpOp::In => {
                let x = self.expr(a)?;
                self.member(&x, b)
            }
            CmpOp::NotIn => {
                let x = self.expr(a)?;
                Ok(!self.member(&x, b)?)
            }
            CmpOp::Eq => Ok(self.expr(a)? == self.expr(b)?),
            CmpOp::Neq => Ok(self.expr(a)? != self.expr(b)?),
            CmpOp::Subset => {
                let (x, y) = (self.expr(a)?, self.expr(b)?);
                let (x, y) = (as_set(&x)?, as_set(&y)?);
                Ok(x.len() <= y.len() && x.iter().all(|v| y.contains(v)))
            }
            CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => {
                let (x, y) = (as_int(&self.expr(a)?)?, as_int(&self.expr(b)?)?);
                Ok(match op {
                    CmpOp::Lt => x < y,
                    CmpOp::Le => x <= y,
                    CmpOp::Gt => x > y,
                    _ => x >= y,
                })
            }
        }
    }

    pub fn expr(&mut self, e: &'a Expr) -> Result<Value, EvalError> {
        match &e.kind {
            ExprKind::Var(v) => self.lookup(v),
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Pair(a, b) => Ok(Value::pair(self.expr(a)?, self.expr(b)?)),
            ExprKind::Bin(op, a, b) => {
                let (x, y) = (self.expr(a)?, self.expr(b)?);
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Div | BinOp::Mod => {
                        Ok(Value::Int(checked(*op, as_int(&x)?, as_int(&y)?)?))
                    }
                    BinOp::Mul => match (&x, &y) {
                        (Value::Int(i), Value::Int(j)) => Ok(Value::Int(checked(BinOp::Mul, *i, *j)?)),
                        (Value::Set(s), Value::Set(t)) => product(s, t),
                        _ => Err(type_err(format!("`*` needs two integers or two sets, found {x} and {y}"))),
                    },
                    BinOp::Interval => interval(as_int(&x)?, as_int(&y)?),
                    BinOp::Union => {
                        let (s, t) = (as_set(&x)?, as_set(&y)?);
                        Ok(Value::from_set(s.union(t).cloned().collect()))
                    }
                    BinOp::Inter => {
                        let (s, t) = (as_set(&x)?, as_set(&y)?);
                        Ok(Value::from_set(s.intersection(t).cloned().collect()))
                    }
                    BinOp::DomRestrict => {
                        let (s, r) = (as_set(&x)?, as_set(&y)?);
                        let mut out = ValueSet::new();
                        for p in r {
                            if s.contains(as_pair(p)?.0) {
                                out.insert(p.clone());
                            }
                        }
                        Ok(Value::from_set(out))
                    }
                }
            }
            ExprKind::Un(op, a) => {
                let x = self.expr(a)?;
                match op {
                    UnOp::Neg => Ok(Value::Int(
                        as_int(&x)?.checked_neg().ok_or_else(|| ill("integer overflow in negation"))?,
                    )),
                    UnOp::Card => Ok(Value::Int(as_set(&x)?.len() as i64)),
                    UnOp::Prj1 => Ok(as_pair(&x)?.0.clone()),
                    UnOp::Prj2 => Ok(as_pair(&x)?.1.clone()),
                    UnOp::Inverse | UnOp::Dom | UnOp::Ran => {
                        let mut out = ValueSet::new();
                        for p in as_set(&x)? {
                            let (u, v) = as_pair(p)?;
                            out.insert(match op {
                                UnOp::Inverse => Value::pair(v.clone(), u.clone()),
                                UnOp::Dom => u.clone(),
                                _ => v.clone(),
                            });
                        }
                        Ok(Value::from_set(out))
                    }
                }
            }
            ExprKind::SetEnum(items) => {
                let mut out = ValueSet::new();
                for i in items {
                    out.insert(self.expr(i)?);
                }
                Ok(Value::from_set(out))
            }
            ExprKind::Apply(f, arg) => {
                let x = self.expr(arg)?;
                if let ExprKind::Lambda(xs, p, body) = &f.kind {
                    // Direct application: bind, check the constraint, evaluate.
                    let mark = self.stack.len();
                    let r = if self.bind_args(xs, &x) && self.pred(p)? {
                        self.expr(body)
                    } else {
                        Err(ill(format!("function applied outside its domain at {x}")))
                    };
                    self.stack.truncate(mark);
                    return r;
                }
                let fv = self.expr(f)?;
                apply_value(&fv, &x)
            }
            ExprKind::Image(f, s) => {
                let (r, s) = (self.expr(f)?, self.expr(s)?);
                let (r, s) = (as_set(&r)?, as_set(&s)?);
                let mut out = ValueSet::new();
                for x in s {
                    out.extend(relation_image_of(r, x).cloned());
                }
                Ok(Value::from_set(out))
            }
            ExprKind::Lambda(xs, p, body) => {
                let gens = plan(xs, &p.conjuncts(), &[&**p], &[&**body])?;
                let mut out = ValueSet::new();
                self.enumerate::<()>(&gens, &mut |s| {
                    if s.pred(p)? {
                        let mut key = Vec::with_capacity(xs.len());
                        for x in xs {
                            key.push(s.lookup(x)?);
                        }
                        let y = s.expr(body)?;
                        out.insert(Value::pair(Value::tuple(key), y));
                    }
                    Ok(None)
                })?;
                Ok(Value::from_set(out))
            }
            ExprKind::Funs(kind, a, b) => {
                let (av, bv) = (self.expr(a)?, self.expr(b)?);
                function_space(*kind, as_set(&av)?, as_set(&bv)?)
            }
        }
    }
}

pub fn eval_pred(p: &Pred, m: &FiniteModel, env: &Env) -> Result<bool, EvalError> {
    Scope::with_env(m, env).pred(p)
}

pub fn eval_expr(e: &Expr, m: &FiniteModel, env: &Env) -> Result<Value, EvalError> {
    Scope::with_env(m, env).expr(e)
}
