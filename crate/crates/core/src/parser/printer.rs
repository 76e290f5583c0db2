//! Pretty-printer emitting the ASCII token table. `parse(print(m))` is
//! alpha-equal to `m` for every well-formed component.

use crate::ast::*;
use super::{ModelSpec, SetDef};

// Expression precedence, loosest first.
const E_FUNS: u8 = 0;
const E_REL: u8 = 1;
const E_INTERVAL: u8 = 2;
const E_ADD: u8 = 3;
const E_MUL: u8 = 4;
const E_UNARY: u8 = 5;
const E_ATOM: u8 = 6;

fn bin_level(op: BinOp) -> u8 {
    match op {
        BinOp::DomRestrict | BinOp::Union | BinOp::Inter => E_REL,
        BinOp::Interval => E_INTERVAL,
        BinOp::Add | BinOp::Sub => E_ADD,
        BinOp::Mul | BinOp::Div | BinOp::Mod => E_MUL,
    }
}

fn expr_level(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Funs(..) => E_FUNS,
        ExprKind::Bin(op, ..) => bin_level(*op),
        ExprKind::Un(UnOp::Neg, _) => E_UNARY,
        ExprKind::Int(n) if *n < 0 => E_UNARY,
        _ => E_ATOM,
    }
}

/// Components of a left-nested tuple, outermost pair first split.
fn flatten_tuple<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match &e.kind {
        ExprKind::Pair(a, b) => {
            flatten_tuple(a, out);
            out.push(b);
        }
        _ => out.push(e),
    }
}

fn write_list(out: &mut String, items: &[&Expr]) {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, x, E_FUNS);
    }
}

fn write_binders(out: &mut String, xs: &[String]) {
    if xs.len() == 1 {
        out.push_str(&xs[0]);
    } else {
        out.push('(');
        out.push_str(&xs.join(", "));
        out.push(')');
    }
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let level = expr_level(e);
    let wrap = level < min;
    if wrap {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Int(n) => out.push_str(&n.to_string()),
        ExprKind::Pair(..) => {
            let mut items = Vec::new();
            flatten_tuple(e, &mut items);
            out.push('(');
            write_list(out, &items);
            out.push(')');
        }
        ExprKind::Bin(op, a, b) => {
            let (l, r) = if *op == BinOp::Interval { (level + 1, level + 1) } else { (level, level + 1) };
            write_expr(out, a, l);
            out.push(' ');
            out.push_str(op.token());
            out.push(' ');
            write_expr(out, b, r);
        }
        ExprKind::Funs(k, a, b) => {
            write_expr(out, a, E_FUNS);
            out.push(' ');
            out.push_str(k.token());
            out.push(' ');
            write_expr(out, b, E_REL);
        }
        ExprKind::Un(op, a) => match op {
            UnOp::Neg => {
                out.push_str("-(");
                write_expr(out, a, E_FUNS);
                out.push(')');
            }
            UnOp::Inverse => {
                write_expr(out, a, E_ATOM);
                out.push('~');
            }
            _ => {
                out.push_str(match op {
                    UnOp::Dom => "dom",
                    UnOp::Ran => "ran",
                    UnOp::Card => "card",
                    UnOp::Prj1 => "prj1",
                    _ => "prj2",
                });
                out.push('(');
                write_expr(out, a, E_FUNS);
                out.push(')');
            }
        },
        ExprKind::SetEnum(items) => {
            out.push('{');
            write_list(out, &items.iter().collect::<Vec<_>>());
            out.push('}');
        }
        ExprKind::Apply(f, arg) => {
            write_expr(out, f, E_ATOM);
            let mut items = Vec::new();
            flatten_tuple(arg, &mut items);
            out.push('(');
            write_list(out, &items);
            out.push(')');
        }
        ExprKind::Image(f, s) => {
            write_expr(out, f, E_ATOM);
            out.push('[');
            write_expr(out, s, E_FUNS);
            out.push(']');
        }
        ExprKind::Lambda(xs, p, body) => {
            out.push('%');
            write_binders(out, xs);
            out.push_str(".(");
            write_pred(out, p, P_IFF);
            out.push_str(" | ");
            write_expr(out, body, E_FUNS);
            out.push(')');
        }
    }
    if wrap {
        out.push(')');
    }
}

const P_IFF: u8 = 0;
const P_ATOM: u8 = 4;

fn conn_level(c: Connective) -> u8 {
    match c {
        Connective::Iff => 0,
        Connective::Implies => 1,
        Connective::Or => 2,
        Connective::And => 3,
    }
}

fn write_pred(out: &mut String, p: &Pred, min: u8) {
    match &p.kind {
        PredKind::True => out.push_str("btrue"),
        PredKind::False => out.push_str("bfalse"),
        PredKind::Cmp(op, a, b) => {
            write_expr(out, a, E_FUNS);
            out.push(' ');
            out.push_str(op.token());
            out.push(' ');
            write_expr(out, b, E_FUNS);
        }
        PredKind::Bin(c, a, b) => {
            let level = conn_level(*c);
            let wrap = level < min;
            if wrap {
                out.push('(');
            }
            write_pred(out, a, level);
            out.push(' ');
            out.push_str(c.token());
            out.push(' ');
            write_pred(out, b, (level + 1).min(P_ATOM));
            if wrap {
                out.push(')');
            }
        }
        PredKind::Not(q) => {
            out.push_str("not(");
            write_pred(out, q, P_IFF);
            out.push(')');
        }
        PredKind::Quant(q, xs, body) => {
            out.push(if *q == Quantifier::ForAll { '!' } else { '#' });
            write_binders(out, xs);
            out.push_str(".(");
            write_pred(out, body, P_IFF);
            out.push(')');
        }
    }
}

// Substitution precedence: `;` < `||` < atoms.
const S_SEQ: u8 = 0;
const S_PAR: u8 = 1;
const S_ATOM: u8 = 2;

fn write_subst(out: &mut String, s: &Subst, min: u8) {
    let level = match &s.kind {
        SubstKind::Seq(..) => S_SEQ,
        SubstKind::Parallel(..) => S_PAR,
        _ => S_ATOM,
    };
    let wrap = level < min;
    if wrap {
        out.push_str("BEGIN ");
    }
    match &s.kind {
        SubstKind::Skip => out.push_str("skip"),
        SubstKind::Assign(xs, es) => {
            out.push_str(&xs.join(", "));
            out.push_str(" := ");
            write_list(out, &es.iter().collect::<Vec<_>>());
        }
        SubstKind::Choice(x, e) => {
            out.push_str(x);
            out.push_str(" :: ");
            write_expr(out, e, E_FUNS);
        }
        SubstKind::Pre(p, body) => {
            out.push_str("PRE ");
            write_pred(out, p, P_IFF);
            out.push_str(" THEN ");
            write_subst(out, body, S_SEQ);
            out.push_str(" END");
        }
        SubstKind::Seq(a, b) => {
            write_subst(out, a, S_SEQ);
            out.push_str(" ; ");
            write_subst(out, b, S_PAR);
        }
        SubstKind::Parallel(a, b) => {
            write_subst(out, a, S_PAR);
            out.push_str(" || ");
            write_subst(out, b, S_ATOM);
        }
        SubstKind::Var(xs, body) => {
            out.push_str("VAR ");
            out.push_str(&xs.join(", "));
            out.push_str(" IN ");
            write_subst(out, body, S_SEQ);
            out.push_str(" END");
        }
        SubstKind::Call { results, op, args } => {
            if !results.is_empty() {
                out.push_str(&results.join(", "));
                out.push_str(" <-- ");
            }
            out.push_str(op);
            if !args.is_empty() {
                out.push('(');
                write_list(out, &args.iter().collect::<Vec<_>>());
                out.push(')');
            }
        }
        SubstKind::Block(body) => {
            out.push_str("BEGIN ");
            write_subst(out, body, S_SEQ);
            out.push_str(" END");
        }
    }
    if wrap {
        out.push_str(" END");
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, E_FUNS);
    s
}

pub fn print_pred(p: &Pred) -> String {
    let mut s = String::new();
    write_pred(&mut s, p, P_IFF);
    s
}

pub fn print_subst(x: &Subst) -> String {
    let mut s = String::new();
    write_subst(&mut s, x, S_SEQ);
    s
}

fn write_operation(out: &mut String, op: &OperationDef) {
    out.push_str("  ");
    if !op.results.is_empty() {
        out.push_str(&op.results.join(", "));
        out.push_str(" <-- ");
    }
    out.push_str(&op.name);
    if !op.params.is_empty() {
        out.push('(');
        out.push_str(&op.params.join(", "));
        out.push(')');
    }
    out.push_str(" = ");
    match &op.ramification {
        None => write_subst(out, &op.body, S_PAR),
        Some(r) => {
            out.push_str("BEGIN ");
            write_subst(out, &op.body, S_SEQ);
            if !r.lvars.is_empty() {
                out.push_str(" LVAR ");
                out.push_str(&r.lvars.join(", "));
            }
            if let Some(w) = &r.within {
                out.push_str(" WITHIN ");
                write_pred(out, w, P_IFF);
            }
            if let Some(c) = &r.concedes {
                out.push_str(" CONCEDES ");
                write_pred(out, c, P_IFF);
            }
            out.push_str(" END");
        }
    }
}

/// One clause per line; operations one per line, indented.
pub fn print_machine(m: &MachineDef) -> String {
    let mut out = String::new();
    out.push_str(m.kind.keyword());
    out.push(' ');
    out.push_str(&m.name);
    out.push('\n');
    let mut clause = |kw: &str, body: String| {
        out.push_str(kw);
        out.push(' ');
        out.push_str(&body);
        out.push('\n');
    };
    if let (Some(kw), Some(t)) = (m.kind.target_keyword(), &m.target) {
        clause(kw, t.clone());
    }
    if !m.sees.is_empty() {
        clause("SEES", m.sees.join(", "));
    }
    if !m.includes.is_empty() {
        clause("INCLUDES", m.includes.join(", "));
    }
    if !m.constants.is_empty() {
        clause("CONSTANTS", m.constants.join(", "));
    }
    if let Some(p) = &m.properties {
        clause("PROPERTIES", print_pred(p));
    }
    if !m.variables.is_empty() {
        clause("VARIABLES", m.variables.join(", "));
    }
    if let Some(p) = &m.invariant {
        clause("INVARIANT", print_pred(p));
    }
    if let Some(p) = &m.retrieves {
        clause("RETRIEVES", print_pred(p));
    }
    if !m.assertions.is_empty() {
        clause("ASSERTIONS", m.assertions.iter().map(print_pred).collect::<Vec<_>>().join(" ; "));
    }
    if let Some(s) = &m.initialisation {
        clause("INITIALISATION", print_subst(s));
    }
    if !m.operations.is_empty() {
        out.push_str("OPERATIONS\n");
        for (i, op) in m.operations.iter().enumerate() {
            write_operation(&mut out, op);
            out.push_str(if i + 1 < m.operations.len() { ";\n" } else { "\n" });
        }
    }
    out.push_str("END\n");
    out
}

pub fn pretty_print(m: &MachineDef) -> String {
    print_machine(m)
}

fn write_set_def(out: &mut String, d: &SetDef, nested: bool) {
    match d {
        SetDef::Range(lo, hi) => out.push_str(&format!("{lo}..{hi}")),
        SetDef::Enum(items) => out.push_str(&print_expr(&Expr::set(items.clone()))),
        SetDef::Named(n) => out.push_str(n),
        SetDef::Product(a, b) => {
            // `*` associates to the left
            if nested {
                out.push('(');
            }
            write_set_def(out, a, false);
            out.push_str(" * ");
            write_set_def(out, b, true);
            if nested {
                out.push(')');
            }
        }
    }
}

/// A finite model in the form `parse_model` reads.
pub fn print_model(spec: &ModelSpec) -> String {
    let mut out = String::new();
    if let Some(n) = &spec.name {
        out.push_str(&format!("MODEL {n}\n"));
    }
    if !spec.sets.is_empty() {
        out.push_str("SETS\n");
        for (i, s) in spec.sets.iter().enumerate() {
            out.push_str(&format!("  {} = ", s.name));
            write_set_def(&mut out, &s.def, false);
            out.push_str(if i + 1 < spec.sets.len() { ";\n" } else { "\n" });
        }
    }
    if !spec.constants.is_empty() {
        out.push_str("CONSTANTS\n");
        for (i, c) in spec.constants.iter().enumerate() {
            out.push_str(&format!("  {} = {}", c.name, print_expr(c.def.expr())));
            out.push_str(if i + 1 < spec.constants.len() { ";\n" } else { "\n" });
        }
    }
    if spec.name.is_some() {
        out.push_str("END\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_pred, parse_subst};

    #[test]
    fn minimal_parentheses() {
        let e = parse_expr("(a + b) * c - (d - e)").unwrap();
        assert_eq!(print_expr(&e), "(a + b) * c - (d - e)");
        let p = parse_pred("a = b & (c = d or e = f) => g : h").unwrap();
        assert_eq!(print_pred(&p), "a = b & (c = d or e = f) => g : h");
    }

    #[test]
    fn tuples_and_application() {
        let e = parse_expr("f(a, b, c) |-> g~[{x}]").unwrap();
        assert_eq!(print_expr(&e), "(f(a, b, c), g~[{x}])");
    }

    #[test]
    fn sequence_under_parallel_gets_block() {
        let s = Subst::parallel(
            Subst::seq(Subst::assign1("a", Expr::int(1)), Subst::assign1("b", Expr::int(2))),
            Subst::assign1("c", Expr::int(3)),
        )
        .unwrap();
        let text = print_subst(&s);
        assert_eq!(text, "BEGIN a := 1 ; b := 2 END || c := 3");
        assert!(crate::names::alpha_eq_subst(&s, &parse_subst(&text).unwrap()));
    }
}
