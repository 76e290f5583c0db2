//! Variable bookkeeping: free variables, fresh names, capture-avoiding
//! substitution, renaming inside substitutions, and alpha-equivalence.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;

pub type Names = BTreeSet<String>;
pub type Bindings = BTreeMap<String, Expr>;

/// Returns `base` if unused, otherwise `base` followed by the smallest
/// positive integer suffix not in `avoid`.
pub fn fresh_name(base: &str, avoid: &Names) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}{i}"))
        .find(|n| !avoid.contains(n))
        .unwrap()
}

// ---- free variables -----------------------------------------------------

pub fn expr_free_vars(e: &Expr) -> Names {
    let mut out = Names::new();
    collect_expr(e, &mut Vec::new(), &mut out);
    out
}

pub fn pred_free_vars(p: &Pred) -> Names {
    let mut out = Names::new();
    collect_pred(p, &mut Vec::new(), &mut out);
    out
}

fn collect_expr(e: &Expr, bound: &mut Vec<String>, out: &mut Names) {
    match &e.kind {
        ExprKind::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        ExprKind::Int(_) => {}
        ExprKind::Pair(a, b) | ExprKind::Bin(_, a, b) | ExprKind::Apply(a, b) | ExprKind::Image(a, b) | ExprKind::Funs(_, a, b) => {
            collect_expr(a, bound, out);
            collect_expr(b, bound, out);
        }
        ExprKind::Un(_, a) => collect_expr(a, bound, out),
        ExprKind::SetEnum(items) => items.iter().for_each(|i| collect_expr(i, bound, out)),
        ExprKind::Lambda(xs, p, body) => {
            let n = bound.len();
            bound.extend(xs.iter().cloned());
            collect_pred(p, bound, out);
            collect_expr(body, bound, out);
            bound.truncate(n);
        }
    }
}

fn collect_pred(p: &Pred, bound: &mut Vec<String>, out: &mut Names) {
    match &p.kind {
        PredKind::True | PredKind::False => {}
        PredKind::Cmp(_, a, b) => {
            collect_expr(a, bound, out);
            collect_expr(b, bound, out);
        }
        PredKind::Bin(_, a, b) => {
            collect_pred(a, bound, out);
            collect_pred(b, bound, out);
        }
        PredKind::Not(a) => collect_pred(a, bound, out),
        PredKind::Quant(_, xs, body) => {
            let n = bound.len();
            bound.extend(xs.iter().cloned());
            collect_pred(body, bound, out);
            bound.truncate(n);
        }
    }
}

/// Read and write sets of a substitution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubstVars {
    pub read: Names,
    pub write: Names,
}

pub fn subst_vars(s: &Subst) -> SubstVars {
    let mut v = SubstVars::default();
    match &s.kind {
        SubstKind::Skip => {}
        SubstKind::Assign(xs, es) => {
            v.write.extend(xs.iter().cloned());
            es.iter().for_each(|e| v.read.extend(expr_free_vars(e)));
        }
        SubstKind::Choice(x, set) => {
            v.write.insert(x.clone());
            v.read.extend(expr_free_vars(set));
        }
        SubstKind::Pre(p, body) => {
            v.read.extend(pred_free_vars(p));
            let b = subst_vars(body);
            v.read.extend(b.read);
            v.write.extend(b.write);
        }
        SubstKind::Seq(a, b) | SubstKind::Parallel(a, b) => {
            for part in [subst_vars(a), subst_vars(b)] {
                v.read.extend(part.read);
                v.write.extend(part.write);
            }
        }
        SubstKind::Var(xs, body) => {
            let mut b = subst_vars(body);
            for x in xs {
                b.read.remove(x);
                b.write.remove(x);
            }
            v = b;
        }
        SubstKind::Call { results, args, .. } => {
            v.write.extend(results.iter().cloned());
            args.iter().for_each(|e| v.read.extend(expr_free_vars(e)));
        }
        SubstKind::Block(body) => v = subst_vars(body),
    }
    v
}

/// Every identifier mentioned anywhere in `s`, bound or free.
pub fn subst_all_names(s: &Subst) -> Names {
    let mut out = Names::new();
    fn walk(s: &Subst, out: &mut Names) {
        match &s.kind {
            SubstKind::Skip => {}
            SubstKind::Assign(xs, es) => {
                out.extend(xs.iter().cloned());
                es.iter().for_each(|e| out.extend(expr_all_names(e)));
            }
            SubstKind::Choice(x, e) => {
                out.insert(x.clone());
                out.extend(expr_all_names(e));
            }
            SubstKind::Pre(p, b) => {
                out.extend(pred_all_names(p));
                walk(b, out);
            }
            SubstKind::Seq(a, b) | SubstKind::Parallel(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            SubstKind::Var(xs, b) => {
                out.extend(xs.iter().cloned());
                walk(b, out);
            }
            SubstKind::Call { results, args, .. } => {
                out.extend(results.iter().cloned());
                args.iter().for_each(|e| out.extend(expr_all_names(e)));
            }
            SubstKind::Block(b) => walk(b, out),
        }
    }
    walk(s, &mut out);
    out
}

pub fn expr_all_names(e: &Expr) -> Names {
    let mut out = expr_free_vars(e);
    if let ExprKind::Lambda(xs, p, b) = &e.kind {
        out.extend(xs.iter().cloned());
        out.extend(pred_all_names(p));
        out.extend(expr_all_names(b));
    } else {
        for_each_child_expr(e, |c| out.extend(expr_all_names(c)));
    }
    out
}

pub fn pred_all_names(p: &Pred) -> Names {
    let mut out = Names::new();
    match &p.kind {
        PredKind::True | PredKind::False => {}
        PredKind::Cmp(_, a, b) => {
            out.extend(expr_all_names(a));
            out.extend(expr_all_names(b));
        }
        PredKind::Bin(_, a, b) => {
            out.extend(pred_all_names(a));
            out.extend(pred_all_names(b));
        }
        PredKind::Not(a) => out.extend(pred_all_names(a)),
        PredKind::Quant(_, xs, b) => {
            out.extend(xs.iter().cloned());
            out.extend(pred_all_names(b));
        }
    }
    out
}

fn for_each_child_expr(e: &Expr, mut f: impl FnMut(&Expr)) {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::Int(_) => {}
        ExprKind::Pair(a, b) | ExprKind::Bin(_, a, b) | ExprKind::Apply(a, b) | ExprKind::Image(a, b) | ExprKind::Funs(_, a, b) => {
            f(a);
            f(b);
        }
        ExprKind::Un(_, a) => f(a),
        ExprKind::SetEnum(items) => items.iter().for_each(f),
        ExprKind::Lambda(_, _, body) => f(body),
    }
}

// ---- substitution -------------------------------------------------------

/// Simultaneous capture-avoiding substitution `p<v1 <- e1, ...>`.
pub fn substitute(p: &Pred, bindings: &Bindings) -> Pred {
    if bindings.is_empty() {
        return p.clone();
    }
    subst_pred(p, bindings)
}

pub fn substitute_expr(e: &Expr, bindings: &Bindings) -> Expr {
    if bindings.is_empty() {
        return e.clone();
    }
    subst_expr(e, bindings)
}

/// Drops bindings shadowed by `binders` and renames binders that would
/// capture a free variable of a remaining binding.
fn enter_binders(
    binders: &[String],
    bindings: &Bindings,
    body_names: Names,
) -> (Vec<String>, Bindings) {
    let mut inner: Bindings = bindings
        .iter()
        .filter(|(k, _)| !binders.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let incoming: Names = inner.values().flat_map(expr_free_vars).collect();
    let mut avoid: Names = body_names;
    avoid.extend(incoming.iter().cloned());
    avoid.extend(inner.keys().cloned());
    avoid.extend(binders.iter().cloned());
    let mut renamed = Vec::with_capacity(binders.len());
    for b in binders {
        if incoming.contains(b) {
            let fresh = fresh_name(b, &avoid);
            avoid.insert(fresh.clone());
            inner.insert(b.clone(), Expr::var(fresh.clone()));
            renamed.push(fresh);
        } else {
            renamed.push(b.clone());
        }
    }
    (renamed, inner)
}

fn subst_expr(e: &Expr, bs: &Bindings) -> Expr {
    let kind = match &e.kind {
        ExprKind::Var(v) => match bs.get(v) {
            Some(rep) => return rep.clone(),
            None => ExprKind::Var(v.clone()),
        },
        ExprKind::Int(i) => ExprKind::Int(*i),
        ExprKind::Pair(a, b) => ExprKind::Pair(Box::new(subst_expr(a, bs)), Box::new(subst_expr(b, bs))),
        ExprKind::Bin(op, a, b) => ExprKind::Bin(*op, Box::new(subst_expr(a, bs)), Box::new(subst_expr(b, bs))),
        ExprKind::Un(op, a) => ExprKind::Un(*op, Box::new(subst_expr(a, bs))),
        ExprKind::SetEnum(items) => ExprKind::SetEnum(items.iter().map(|i| subst_expr(i, bs)).collect()),
        ExprKind::Apply(a, b) => ExprKind::Apply(Box::new(subst_expr(a, bs)), Box::new(subst_expr(b, bs))),
        ExprKind::Image(a, b) => ExprKind::Image(Box::new(subst_expr(a, bs)), Box::new(subst_expr(b, bs))),
        ExprKind::Funs(k, a, b) => ExprKind::Funs(*k, Box::new(subst_expr(a, bs)), Box::new(subst_expr(b, bs))),
        ExprKind::Lambda(xs, p, body) => {
            let mut names = pred_all_names(p);
            names.extend(expr_all_names(body));
            let (xs2, inner) = enter_binders(xs, bs, names);
            if inner.is_empty() {
                ExprKind::Lambda(xs2, p.clone(), body.clone())
            } else {
                ExprKind::Lambda(xs2, Box::new(subst_pred(p, &inner)), Box::new(subst_expr(body, &inner)))
            }
        }
    };
    Expr { kind, span: e.span.clone() }
}

fn subst_pred(p: &Pred, bs: &Bindings) -> Pred {
    let kind = match &p.kind {
        PredKind::True => PredKind::True,
        PredKind::False => PredKind::False,
        PredKind::Cmp(op, a, b) => PredKind::Cmp(*op, Box::new(subst_expr(a, bs)), Box::new(subst_expr(b, bs))),
        PredKind::Bin(c, a, b) => PredKind::Bin(*c, Box::new(subst_pred(a, bs)), Box::new(subst_pred(b, bs))),
        PredKind::Not(a) => PredKind::Not(Box::new(subst_pred(a, bs))),
        PredKind::Quant(q, xs, body) => {
            let (xs2, inner) = enter_binders(xs, bs, pred_all_names(body));
            if inner.is_empty() {
                PredKind::Quant(*q, xs2, body.clone())
            } else {
                PredKind::Quant(*q, xs2, Box::new(subst_pred(body, &inner)))
            }
        }
    };
    Pred { kind, span: p.span.clone() }
}

/// Renames free variables (read and written) of a substitution.
/// `VAR` binders that would capture a target name are renamed first.
pub fn rename_subst(s: &Subst, map: &BTreeMap<String, String>) -> Subst {
    if map.is_empty() {
        return s.clone();
    }
    let bindings: Bindings = map.iter().map(|(k, v)| (k.clone(), Expr::var(v.clone()))).collect();
    rename_in(s, map, &bindings)
}

fn rename_in(s: &Subst, map: &BTreeMap<String, String>, bs: &Bindings) -> Subst {
    let ren = |x: &String| map.get(x).cloned().unwrap_or_else(|| x.clone());
    let kind = match &s.kind {
        SubstKind::Skip => SubstKind::Skip,
        SubstKind::Assign(xs, es) => SubstKind::Assign(
            xs.iter().map(ren).collect(),
            es.iter().map(|e| substitute_expr(e, bs)).collect(),
        ),
        SubstKind::Choice(x, e) => SubstKind::Choice(ren(x), substitute_expr(e, bs)),
        SubstKind::Pre(p, b) => SubstKind::Pre(substitute(p, bs), Box::new(rename_in(b, map, bs))),
        SubstKind::Seq(a, b) => SubstKind::Seq(Box::new(rename_in(a, map, bs)), Box::new(rename_in(b, map, bs))),
        SubstKind::Parallel(a, b) => {
            SubstKind::Parallel(Box::new(rename_in(a, map, bs)), Box::new(rename_in(b, map, bs)))
        }
        SubstKind::Var(xs, body) => {
            let mut inner: BTreeMap<String, String> =
                map.iter().filter(|(k, _)| !xs.contains(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
            let targets: Names = inner.values().cloned().collect();
            let mut avoid = subst_all_names(body);
            avoid.extend(targets.iter().cloned());
            avoid.extend(inner.keys().cloned());
            let mut xs2 = Vec::new();
            for x in xs {
                if targets.contains(x) {
                    let fresh = fresh_name(x, &avoid);
                    avoid.insert(fresh.clone());
                    inner.insert(x.clone(), fresh.clone());
                    xs2.push(fresh);
                } else {
                    xs2.push(x.clone());
                }
            }
            let inner_bs: Bindings = inner.iter().map(|(k, v)| (k.clone(), Expr::var(v.clone()))).collect();
            SubstKind::Var(xs2, Box::new(rename_in(body, &inner, &inner_bs)))
        }
        SubstKind::Call { results, op, args } => SubstKind::Call {
            results: results.iter().map(ren).collect(),
            op: op.clone(),
            args: args.iter().map(|e| substitute_expr(e, bs)).collect(),
        },
        SubstKind::Block(b) => SubstKind::Block(Box::new(rename_in(b, map, bs))),
    };
    Subst { kind, span: s.span.clone() }
}

// ---- alpha-equivalence --------------------------------------------------

/// Binder correspondence: pairs of (left name, right name), innermost last.
type Scope = Vec<(String, String)>;

fn same_var(a: &str, b: &str, scope: &Scope) -> bool {
    for (l, r) in scope.iter().rev() {
        if l == a || r == b {
            return l == a && r == b;
        }
    }
    a == b
}

fn push_binders(scope: &mut Scope, xs: &[String], ys: &[String]) -> bool {
    if xs.len() != ys.len() {
        return false;
    }
    scope.extend(xs.iter().cloned().zip(ys.iter().cloned()));
    true
}

pub fn alpha_eq_expr(a: &Expr, b: &Expr) -> bool {
    eq_expr(a, b, &mut Vec::new())
}

pub fn alpha_eq(a: &Pred, b: &Pred) -> bool {
    eq_pred(a, b, &mut Vec::new())
}

fn eq_expr(a: &Expr, b: &Expr, scope: &mut Scope) -> bool {
    use ExprKind::*;
    match (&a.kind, &b.kind) {
        (Var(x), Var(y)) => same_var(x, y, scope),
        (Int(x), Int(y)) => x == y,
        (Pair(a1, a2), Pair(b1, b2)) | (Apply(a1, a2), Apply(b1, b2)) | (Image(a1, a2), Image(b1, b2)) => {
            eq_expr(a1, b1, scope) && eq_expr(a2, b2, scope)
        }
        (Bin(o1, a1, a2), Bin(o2, b1, b2)) => o1 == o2 && eq_expr(a1, b1, scope) && eq_expr(a2, b2, scope),
        (Funs(k1, a1, a2), Funs(k2, b1, b2)) => k1 == k2 && eq_expr(a1, b1, scope) && eq_expr(a2, b2, scope),
        (Un(o1, x), Un(o2, y)) => o1 == o2 && eq_expr(x, y, scope),
        (SetEnum(xs), SetEnum(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| eq_expr(x, y, scope)),
        (Lambda(xs, p, e), Lambda(ys, q, f)) => {
            let n = scope.len();
            let ok = push_binders(scope, xs, ys) && eq_pred(p, q, scope) && eq_expr(e, f, scope);
            scope.truncate(n);
            ok
        }
        _ => false,
    }
}

fn eq_pred(a: &Pred, b: &Pred, scope: &mut Scope) -> bool {
    use PredKind::*;
    match (&a.kind, &b.kind) {
        (True, True) | (False, False) => true,
        (Cmp(o1, a1, a2), Cmp(o2, b1, b2)) => o1 == o2 && eq_expr(a1, b1, scope) && eq_expr(a2, b2, scope),
        (Bin(c1, a1, a2), Bin(c2, b1, b2)) => c1 == c2 && eq_pred(a1, b1, scope) && eq_pred(a2, b2, scope),
        (Not(x), Not(y)) => eq_pred(x, y, scope),
        (Quant(q1, xs, p), Quant(q2, ys, q)) => {
            let n = scope.len();
            let ok = q1 == q2 && push_binders(scope, xs, ys) && eq_pred(p, q, scope);
            scope.truncate(n);
            ok
        }
        _ => false,
    }
}

pub fn alpha_eq_subst(a: &Subst, b: &Subst) -> bool {
    eq_subst(a, b, &mut Vec::new())
}

fn eq_names(xs: &[String], ys: &[String], scope: &Scope) -> bool {
    xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| same_var(x, y, scope))
}

/// `BEGIN S END` is transparent.
fn unblock(mut s: &Subst) -> &Subst {
    while let SubstKind::Block(inner) = &s.kind {
        s = inner;
    }
    s
}

fn eq_subst(a: &Subst, b: &Subst, scope: &mut Scope) -> bool {
    use SubstKind::*;
    let (a, b) = (unblock(a), unblock(b));
    match (&a.kind, &b.kind) {
        (Skip, Skip) => true,
        (Assign(xs, es), Assign(ys, fs)) => {
            eq_names(xs, ys, scope) && es.len() == fs.len() && es.iter().zip(fs).all(|(e, f)| eq_expr(e, f, scope))
        }
        (Choice(x, e), Choice(y, f)) => same_var(x, y, scope) && eq_expr(e, f, scope),
        (Pre(p, s), Pre(q, t)) => eq_pred(p, q, scope) && eq_subst(s, t, scope),
        (Seq(a1, a2), Seq(b1, b2)) | (Parallel(a1, a2), Parallel(b1, b2)) => {
            eq_subst(a1, b1, scope) && eq_subst(a2, b2, scope)
        }
        (Var(xs, s), Var(ys, t)) => {
            let n = scope.len();
            let ok = push_binders(scope, xs, ys) && eq_subst(s, t, scope);
            scope.truncate(n);
            ok
        }
        (Call { results: r1, op: o1, args: a1 }, Call { results: r2, op: o2, args: a2 }) => {
            o1 == o2
                && eq_names(r1, r2, scope)
                && a1.len() == a2.len()
                && a1.iter().zip(a2).all(|(x, y)| eq_expr(x, y, scope))
        }
        _ => false,
    }
}

fn opt_eq<T>(a: &Option<T>, b: &Option<T>, f: impl Fn(&T, &T) -> bool) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => f(x, y),
        _ => false,
    }
}

pub fn alpha_eq_operation(a: &OperationDef, b: &OperationDef) -> bool {
    a.name == b.name
        && a.params == b.params
        && a.results == b.results
        && alpha_eq_subst(&a.body, &b.body)
        && opt_eq(&a.ramification, &b.ramification, |r, s| {
            r.lvars == s.lvars
                && opt_eq(&r.within, &s.within, alpha_eq)
                && opt_eq(&r.concedes, &s.concedes, alpha_eq)
        })
}

/// Structural equality of components up to spans and bound-variable names.
pub fn alpha_eq_machine(a: &MachineDef, b: &MachineDef) -> bool {
    a.kind == b.kind
        && a.name == b.name
        && a.target == b.target
        && a.sees == b.sees
        && a.includes == b.includes
        && a.constants == b.constants
        && opt_eq(&a.properties, &b.properties, alpha_eq)
        && a.variables == b.variables
        && opt_eq(&a.invariant, &b.invariant, alpha_eq)
        && opt_eq(&a.retrieves, &b.retrieves, alpha_eq)
        && a.assertions.len() == b.assertions.len()
        && a.assertions.iter().zip(&b.assertions).all(|(x, y)| alpha_eq(x, y))
        && opt_eq(&a.initialisation, &b.initialisation, alpha_eq_subst)
        && a.operations.len() == b.operations.len()
        && a.operations.iter().zip(&b.operations).all(|(x, y)| alpha_eq_operation(x, y))
}
