//! Concrete ASCII syntax for components (`.mch`, `.ref`, `.rtr`) and finite
//! models (`.fmod`), plus the pretty-printer.
//!
//! Token table (fixed; the printer emits exactly these):
//!
//! | math | ASCII | math | ASCII |
//! |------|-------|------|-------|
//! | ∈ | `:` | ∉ | `/:` |
//! | ⊆ | `<:` | ≠ | `/=` |
//! | ∧ | `&` | ∨ | `or` |
//! | ⇒ | `=>` | ⇔ | `<=>` |
//! | ¬P | `not(P)` | ∀x·P | `!x.(P)` |
//! | ∃x·P | `#x.(P)` | λx·(P∣E) | `%x.(P | E)` |
//! | ◁ | `<|` | f⁻¹ | `f~` |
//! | f[s] | `f[s]` | × | `*` |
//! | ∪ / ∩ | `\/` / `/\` | ↦ | `|->` or `(a, b)` |
//! | ↔ ⇸ → | `<->` `+->` `-->` | ↣ ↠ ⤖ | `>->` `-->>` `>->>` |
//! | ∥ | `||` | ← | `<--` |
//! | :∈ | `::` | ÷ | `/` |
//!
//! `*` is multiplication on integers and cartesian product on sets.
//! Comments are `/* ... */`.

mod lexer;
mod printer;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ast::*;
use crate::names::{expr_free_vars, pred_free_vars};
use lexer::{tokenize, Tok, Token};

pub use printer::{print_expr, print_machine, print_model, print_pred, print_subst, pretty_print};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    pub expected: Option<String>,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        ParseError { span, message: message.into(), expected: None }
    }
    fn expected(span: Span, message: impl Into<String>, expected: impl Into<String>) -> Self {
        ParseError { span, message: message.into(), expected: Some(expected.into()) }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if let Some(e) = &self.expected {
            write!(f, " (expected {e})")?;
        }
        Ok(())
    }
}

const CLAUSES: &[&str] = &[
    "REFINES",
    "RETRENCHES",
    "SEES",
    "INCLUDES",
    "CONSTANTS",
    "CONCRETE_CONSTANTS",
    "ABSTRACT_CONSTANTS",
    "PROPERTIES",
    "VARIABLES",
    "CONCRETE_VARIABLES",
    "ABSTRACT_VARIABLES",
    "INVARIANT",
    "RETRIEVES",
    "ASSERTIONS",
    "INITIALISATION",
    "OPERATIONS",
    "END",
];

const RESERVED: &[&str] = &[
    "MACHINE", "REFINEMENT", "RETRENCHMENT", "MODEL", "SETS", "BEGIN", "END", "PRE", "THEN", "VAR", "IN", "LVAR",
    "WITHIN", "CONCEDES", "skip", "mod", "or", "not", "btrue", "bfalse", "dom", "ran", "card", "prj1", "prj2",
    "REFINES", "RETRENCHES", "SEES", "INCLUDES", "CONSTANTS", "CONCRETE_CONSTANTS", "ABSTRACT_CONSTANTS",
    "PROPERTIES", "VARIABLES", "CONCRETE_VARIABLES", "ABSTRACT_VARIABLES", "INVARIANT", "RETRIEVES",
    "ASSERTIONS", "INITIALISATION", "OPERATIONS",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(text: &str, file: Option<Arc<str>>) -> PResult<Self> {
        Ok(Parser { toks: tokenize(text, file)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }
    fn span(&self) -> Span {
        self.toks[self.pos].span.clone()
    }
    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span.clone()
    }
    fn from(&self, start: &Span) -> Span {
        start.join(&self.prev_span())
    }
    fn advance(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }
    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }
    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }
    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.advance();
            true
        } else {
            false
        }
    }
    fn error_here(&self, what: &str) -> ParseError {
        ParseError::expected(self.span(), format!("unexpected {}", self.peek().describe()), what)
    }
    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error_here(&format!("`{s}`")))
        }
    }
    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            Err(self.error_here(&format!("`{s}`")))
        }
    }
    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error_here("identifier")),
        }
    }
    fn ident_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.ident()?];
        while self.eat_sym(",") {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    // ---- components --------------------------------------------------

    fn component(&mut self) -> PResult<MachineDef> {
        let start = self.span();
        let kind = match self.peek() {
            Tok::Ident(k) if k == "MACHINE" => ComponentKind::Machine,
            Tok::Ident(k) if k == "REFINEMENT" => ComponentKind::Refinement,
            Tok::Ident(k) if k == "RETRENCHMENT" => ComponentKind::Retrenchment,
            _ => return Err(self.error_here("MACHINE, REFINEMENT or RETRENCHMENT")),
        };
        self.advance();
        let mut m = MachineDef::new(kind, self.ident()?);
        let mut clause_spans: Vec<(&'static str, Span)> = Vec::new();
        loop {
            let cspan = self.span();
            let kw = match self.peek() {
                Tok::Ident(k) => CLAUSES.iter().find(|c| **c == k.as_str()).copied(),
                _ => None,
            };
            let Some(kw) = kw else {
                return Err(self.error_here("a clause keyword or END"));
            };
            self.advance();
            if kw == "END" {
                break;
            }
            if clause_spans.iter().any(|(k, _)| *k == kw) {
                return Err(ParseError::new(cspan, format!("duplicate {kw} clause")));
            }
            match kw {
                "REFINES" | "RETRENCHES" => {
                    if m.target.is_some() {
                        return Err(ParseError::new(cspan, "component names two targets"));
                    }
                    m.target = Some(self.ident()?);
                }
                "SEES" => m.sees = self.ident_list()?,
                "INCLUDES" => m.includes = self.ident_list()?,
                "CONSTANTS" | "CONCRETE_CONSTANTS" | "ABSTRACT_CONSTANTS" => m.constants.extend(self.ident_list()?),
                "PROPERTIES" => m.properties = Some(self.pred()?),
                "VARIABLES" | "CONCRETE_VARIABLES" | "ABSTRACT_VARIABLES" => m.variables.extend(self.ident_list()?),
                "INVARIANT" => m.invariant = Some(self.pred()?),
                "RETRIEVES" => m.retrieves = Some(self.pred()?),
                "ASSERTIONS" => {
                    m.assertions.push(self.pred()?);
                    while self.eat_sym(";") {
                        m.assertions.push(self.pred()?);
                    }
                }
                "INITIALISATION" => m.initialisation = Some(self.subst_seq()?),
                "OPERATIONS" => {
                    if !self.is_kw("END") {
                        m.operations.push(self.operation()?);
                        while self.eat_sym(";") {
                            m.operations.push(self.operation()?);
                        }
                    }
                }
                _ => unreachable!(),
            }
            clause_spans.push((kw, self.from(&cspan)));
        }
        if !matches!(self.peek(), Tok::Eof) {
            return Err(self.error_here("end of input after END"));
        }
        m.span = self.from(&start);
        m.validate().map_err(|e| {
            let find = |names: &[&str]| {
                clause_spans
                    .iter()
                    .find(|(k, _)| names.contains(k))
                    .map(|(_, s)| s.clone())
            };
            let span = match &e {
                StructureError::RetrievesOutsideRetrenchment => find(&["RETRIEVES"]),
                StructureError::UnexpectedTarget => find(&["REFINES", "RETRENCHES"]),
                StructureError::RamificationOutsideRetrenchment(op)
                | StructureError::SignatureClash { op, .. }
                | StructureError::DuplicateOperation(op) => m.operation(op).map(|o| o.span.clone()),
                _ => None,
            }
            .unwrap_or_else(|| start.clone());
            ParseError::new(span, e.to_string())
        })?;
        Ok(m)
    }

    fn operation(&mut self) -> PResult<OperationDef> {
        let start = self.span();
        let first = self.ident_list()?;
        let (results, name) = if self.eat_sym("<--") {
            (first, self.ident()?)
        } else if first.len() == 1 {
            (Vec::new(), first.into_iter().next().unwrap())
        } else {
            return Err(self.error_here("`<--`"));
        };
        let params = if self.eat_sym("(") {
            let ps = self.ident_list()?;
            self.expect_sym(")")?;
            ps
        } else {
            Vec::new()
        };
        self.expect_sym("=")?;
        let (body, ramification) = self.operation_body()?;
        Ok(OperationDef { name, params, results, body, ramification, span: self.from(&start) })
    }

    /// An operation body is a parallel-level substitution; a `BEGIN` block may
    /// end with a ramification.
    fn operation_body(&mut self) -> PResult<(Subst, Option<Ramification>)> {
        if !self.is_kw("BEGIN") {
            return Ok((self.subst_par()?, None));
        }
        let save = self.pos;
        self.advance();
        let inner = self.subst_seq()?;
        if !(self.is_kw("LVAR") || self.is_kw("WITHIN") || self.is_kw("CONCEDES")) {
            self.pos = save;
            return Ok((self.subst_par()?, None));
        }
        let mut ram = Ramification { lvars: Vec::new(), within: None, concedes: None };
        if self.eat_kw("LVAR") {
            ram.lvars = self.ident_list()?;
        }
        if self.eat_kw("WITHIN") {
            ram.within = Some(self.pred()?);
        }
        if self.eat_kw("CONCEDES") {
            ram.concedes = Some(self.pred()?);
        }
        self.expect_kw("END")?;
        Ok((inner, Some(ram)))
    }

    // ---- substitutions -----------------------------------------------

    fn subst_seq(&mut self) -> PResult<Subst> {
        let start = self.span();
        let mut s = self.subst_par()?;
        while self.eat_sym(";") {
            let t = self.subst_par()?;
            s = Subst::seq(s, t).with_span(self.from(&start));
        }
        Ok(s)
    }

    fn subst_par(&mut self) -> PResult<Subst> {
        let start = self.span();
        let mut s = self.subst_atom()?;
        while self.eat_sym("||") {
            let rhs_span = self.span();
            let t = self.subst_atom()?;
            s = Subst::parallel(s, t)
                .map_err(|e| ParseError::new(rhs_span, e.to_string()))?
                .with_span(self.from(&start));
        }
        Ok(s)
    }

    fn subst_atom(&mut self) -> PResult<Subst> {
        let start = self.span();
        if self.eat_kw("skip") {
            return Ok(Subst::skip().with_span(start));
        }
        if self.eat_kw("BEGIN") {
            let s = self.subst_seq()?;
            self.expect_kw("END")?;
            return Ok(Subst::block(s).with_span(self.from(&start)));
        }
        if self.eat_kw("PRE") {
            let p = self.pred()?;
            self.expect_kw("THEN")?;
            let s = self.subst_seq()?;
            self.expect_kw("END")?;
            return Ok(Subst::pre(p, s).with_span(self.from(&start)));
        }
        if self.eat_kw("VAR") {
            let xs = self.ident_list()?;
            self.expect_kw("IN")?;
            let s = self.subst_seq()?;
            self.expect_kw("END")?;
            return Ok(Subst::local(xs, s).with_span(self.from(&start)));
        }
        let names = self.ident_list()?;
        if self.eat_sym(":=") {
            let mut es = vec![self.expr()?];
            while self.eat_sym(",") {
                es.push(self.expr()?);
            }
            return Subst::assign(names, es)
                .map(|s| s.with_span(self.from(&start)))
                .map_err(|e| ParseError::new(self.from(&start), e.to_string()));
        }
        if self.eat_sym("::") {
            if names.len() != 1 {
                return Err(ParseError::new(self.from(&start), "`::` takes a single variable"));
            }
            let e = self.expr()?;
            return Ok(Subst::choice(names.into_iter().next().unwrap(), e).with_span(self.from(&start)));
        }
        let (results, op) = if self.eat_sym("<--") {
            (names, self.ident()?)
        } else if names.len() == 1 {
            (Vec::new(), names.into_iter().next().unwrap())
        } else {
            return Err(self.error_here("`:=`, `::` or `<--`"));
        };
        let args = if self.eat_sym("(") {
            let mut args = vec![self.expr()?];
            while self.eat_sym(",") {
                args.push(self.expr()?);
            }
            self.expect_sym(")")?;
            args
        } else {
            Vec::new()
        };
        Ok(Subst::call(results, op, args).with_span(self.from(&start)))
    }

    // ---- predicates --------------------------------------------------

    fn pred(&mut self) -> PResult<Pred> {
        self.pred_level(0)
    }

    fn pred_level(&mut self, level: usize) -> PResult<Pred> {
        const LEVELS: [(&str, Connective); 4] = [
            ("<=>", Connective::Iff),
            ("=>", Connective::Implies),
            ("or", Connective::Or),
            ("&", Connective::And),
        ];
        if level == LEVELS.len() {
            return self.pred_atom();
        }
        let start = self.span();
        let (tok, conn) = LEVELS[level];
        let mut p = self.pred_level(level + 1)?;
        loop {
            let hit = if tok == "or" { self.eat_kw("or") } else { self.eat_sym(tok) };
            if !hit {
                break;
            }
            let q = self.pred_level(level + 1)?;
            p = Pred::connect(conn, p, q).with_span(self.from(&start));
        }
        Ok(p)
    }

    fn binders(&mut self) -> PResult<Vec<String>> {
        if self.eat_sym("(") {
            let xs = self.ident_list()?;
            self.expect_sym(")")?;
            Ok(xs)
        } else {
            Ok(vec![self.ident()?])
        }
    }

    fn pred_atom(&mut self) -> PResult<Pred> {
        let start = self.span();
        if self.eat_kw("btrue") {
            return Ok(Pred::truth().with_span(start));
        }
        if self.eat_kw("bfalse") {
            return Ok(Pred::falsity().with_span(start));
        }
        if self.eat_kw("not") {
            self.expect_sym("(")?;
            let p = self.pred()?;
            self.expect_sym(")")?;
            return Ok(Pred::not(p).with_span(self.from(&start)));
        }
        if self.is_sym("!") || self.is_sym("#") {
            let q = if self.eat_sym("!") { Quantifier::ForAll } else { self.advance(); Quantifier::Exists };
            let xs = self.binders()?;
            self.expect_sym(".")?;
            self.expect_sym("(")?;
            let body = self.pred()?;
            self.expect_sym(")")?;
            return Ok(Pred::new(PredKind::Quant(q, xs, Box::new(body))).with_span(self.from(&start)));
        }
        if self.is_sym("(") {
            let save = self.pos;
            match self.comparison() {
                Ok(p) => return Ok(p),
                Err(expr_err) => {
                    self.pos = save;
                    self.advance();
                    let p = match self.pred() {
                        Ok(p) => p,
                        Err(pred_err) => {
                            // Report whichever attempt got further.
                            return Err(if pred_err.span.start >= expr_err.span.start { pred_err } else { expr_err });
                        }
                    };
                    if !self.eat_sym(")") {
                        let e = self.error_here("`)`");
                        return Err(if e.span.start >= expr_err.span.start { e } else { expr_err });
                    }
                    return Ok(p);
                }
            }
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Pred> {
        let start = self.span();
        let a = self.expr()?;
        const OPS: [(&str, CmpOp); 9] = [
            ("=", CmpOp::Eq),
            ("/=", CmpOp::Neq),
            ("<", CmpOp::Lt),
            ("<=", CmpOp::Le),
            (">", CmpOp::Gt),
            (">=", CmpOp::Ge),
            (":", CmpOp::In),
            ("/:", CmpOp::NotIn),
            ("<:", CmpOp::Subset),
        ];
        let Some(op) = OPS.iter().find(|(t, _)| self.is_sym(t)).map(|(_, o)| *o) else {
            return Err(self.error_here("a comparison operator"));
        };
        self.advance();
        let b = self.expr()?;
        Ok(Pred::cmp(op, a, b).with_span(self.from(&start)))
    }

    // ---- expressions -------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.expr_rel()?;
        loop {
            let kind = match self.peek() {
                Tok::Sym("<->") => FunKind::Relation,
                Tok::Sym("+->") => FunKind::Partial,
                Tok::Sym("-->") => FunKind::Total,
                Tok::Sym(">->") => FunKind::TotalInjection,
                Tok::Sym("-->>") => FunKind::TotalSurjection,
                Tok::Sym(">->>") => FunKind::TotalBijection,
                _ => break,
            };
            self.advance();
            let r = self.expr_rel()?;
            e = Expr::funs(kind, e, r).with_span(self.from(&start));
        }
        Ok(e)
    }

    fn expr_rel(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.expr_interval()?;
        loop {
            if self.eat_sym("|->") {
                let r = self.expr_interval()?;
                e = Expr::pair(e, r).with_span(self.from(&start));
                continue;
            }
            let op = match self.peek() {
                Tok::Sym("<|") => BinOp::DomRestrict,
                Tok::Sym("\\/") => BinOp::Union,
                Tok::Sym("/\\") => BinOp::Inter,
                _ => break,
            };
            self.advance();
            let r = self.expr_interval()?;
            e = Expr::bin(op, e, r).with_span(self.from(&start));
        }
        Ok(e)
    }

    fn expr_interval(&mut self) -> PResult<Expr> {
        let start = self.span();
        let e = self.expr_additive()?;
        if self.eat_sym("..") {
            let r = self.expr_additive()?;
            return Ok(Expr::bin(BinOp::Interval, e, r).with_span(self.from(&start)));
        }
        Ok(e)
    }

    fn expr_additive(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.expr_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let r = self.expr_mul()?;
            e = Expr::bin(op, e, r).with_span(self.from(&start));
        }
        Ok(e)
    }

    fn expr_mul(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.expr_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                Tok::Ident(k) if k == "mod" => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let r = self.expr_unary()?;
            e = Expr::bin(op, e, r).with_span(self.from(&start));
        }
        Ok(e)
    }

    fn expr_unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat_sym("-") {
            if let Tok::Int(n) = *self.peek() {
                self.advance();
                let e = Expr::int(-n).with_span(self.from(&start));
                return self.postfix(e, start);
            }
            let e = self.expr_unary()?;
            return Ok(Expr::un(UnOp::Neg, e).with_span(self.from(&start)));
        }
        let e = self.primary()?;
        self.postfix(e, start)
    }

    fn postfix(&mut self, mut e: Expr, start: Span) -> PResult<Expr> {
        loop {
            if self.eat_sym("~") {
                e = Expr::un(UnOp::Inverse, e).with_span(self.from(&start));
            } else if self.is_sym("(") {
                self.advance();
                let mut args = vec![self.expr()?];
                while self.eat_sym(",") {
                    args.push(self.expr()?);
                }
                self.expect_sym(")")?;
                e = Expr::apply(e, Expr::tuple(args)).with_span(self.from(&start));
            } else if self.eat_sym("[") {
                let s = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::image(e, s).with_span(self.from(&start));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::int(n).with_span(start))
            }
            Tok::Sym("(") => {
                self.advance();
                let mut items = vec![self.expr()?];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym(")")?;
                let sp = self.from(&start);
                if items.len() == 1 {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Expr::tuple(items).with_span(sp))
                }
            }
            Tok::Sym("{") => {
                self.advance();
                let mut items = Vec::new();
                if !self.is_sym("}") {
                    items.push(self.expr()?);
                    while self.eat_sym(",") {
                        items.push(self.expr()?);
                    }
                }
                self.expect_sym("}")?;
                Ok(Expr::set(items).with_span(self.from(&start)))
            }
            Tok::Sym("%") => {
                self.advance();
                let xs = self.binders()?;
                self.expect_sym(".")?;
                self.expect_sym("(")?;
                let p = self.pred()?;
                self.expect_sym("|")?;
                let body = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::lambda(xs, p, body).with_span(self.from(&start)))
            }
            Tok::Ident(k) if matches!(k.as_str(), "dom" | "ran" | "card" | "prj1" | "prj2") => {
                self.advance();
                let op = match k.as_str() {
                    "dom" => UnOp::Dom,
                    "ran" => UnOp::Ran,
                    "card" => UnOp::Card,
                    "prj1" => UnOp::Prj1,
                    _ => UnOp::Prj2,
                };
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::un(op, e).with_span(self.from(&start)))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                Ok(Expr::var(name).with_span(start))
            }
            _ => Err(self.error_here("an expression")),
        }
    }
}

/// Parses one component (`MACHINE`, `REFINEMENT` or `RETRENCHMENT`).
pub fn parse_machine(text: &str) -> Result<MachineDef, ParseError> {
    parse_machine_file(text, None)
}

pub fn parse_machine_file(text: &str, file: Option<&str>) -> Result<MachineDef, ParseError> {
    Parser::new(text, file.map(Arc::from))?.component()
}

pub fn parse_pred(text: &str) -> Result<Pred, ParseError> {
    let mut p = Parser::new(text, None)?;
    let out = p.pred()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error_here("end of input"));
    }
    Ok(out)
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text, None)?;
    let out = p.expr()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error_here("end of input"));
    }
    Ok(out)
}

pub fn parse_subst(text: &str) -> Result<Subst, ParseError> {
    let mut p = Parser::new(text, None)?;
    let out = p.subst_seq()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error_here("end of input"));
    }
    Ok(out)
}

// ---- finite models ------------------------------------------------------

#[derive(Clone, Debug)]
pub enum SetDef {
    Range(i64, i64),
    Enum(Vec<Expr>),
    Product(Box<SetDef>, Box<SetDef>),
    Named(String),
}

#[derive(Clone, Debug)]
pub struct SetDecl {
    pub name: String,
    pub def: SetDef,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum ConstDef {
    /// Extensional table `{(a, b), ...}`.
    Table(Expr),
    Lambda(Expr),
    /// Any other closed expression over the declared sets.
    Expr(Expr),
}

impl ConstDef {
    pub fn expr(&self) -> &Expr {
        match self {
            ConstDef::Table(e) | ConstDef::Lambda(e) | ConstDef::Expr(e) => e,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConstDecl {
    pub name: String,
    pub def: ConstDef,
    pub span: Span,
}

/// Carrier sets and constant interpretations, in declaration order.
#[derive(Clone, Debug, Default)]
pub struct ModelSpec {
    pub name: Option<String>,
    pub sets: Vec<SetDecl>,
    pub constants: Vec<ConstDecl>,
}

fn set_def_eq(a: &SetDef, b: &SetDef) -> bool {
    match (a, b) {
        (SetDef::Range(a0, a1), SetDef::Range(b0, b1)) => a0 == b0 && a1 == b1,
        (SetDef::Enum(xs), SetDef::Enum(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| crate::names::alpha_eq_expr(x, y))
        }
        (SetDef::Product(a0, a1), SetDef::Product(b0, b1)) => set_def_eq(a0, b0) && set_def_eq(a1, b1),
        (SetDef::Named(x), SetDef::Named(y)) => x == y,
        _ => false,
    }
}

/// Same declarations in the same order, constants equal up to bound names.
pub fn alpha_eq_model(a: &ModelSpec, b: &ModelSpec) -> bool {
    a.name == b.name
        && a.sets.len() == b.sets.len()
        && a.sets.iter().zip(&b.sets).all(|(x, y)| x.name == y.name && set_def_eq(&x.def, &y.def))
        && a.constants.len() == b.constants.len()
        && a.constants
            .iter()
            .zip(&b.constants)
            .all(|(x, y)| x.name == y.name && crate::names::alpha_eq_expr(x.def.expr(), y.def.expr()))
}

fn is_literal(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Int(_) => true,
        ExprKind::Pair(a, b) => is_literal(a) && is_literal(b),
        _ => false,
    }
}

fn set_def(e: &Expr, declared: &[String]) -> Result<SetDef, ParseError> {
    match &e.kind {
        ExprKind::Bin(BinOp::Interval, a, b) => match (&a.kind, &b.kind) {
            (ExprKind::Int(lo), ExprKind::Int(hi)) => {
                if lo > hi {
                    Err(ParseError::new(e.span.clone(), format!("empty range {lo}..{hi}: lower bound exceeds upper")))
                } else {
                    Ok(SetDef::Range(*lo, *hi))
                }
            }
            _ => Err(ParseError::new(e.span.clone(), "range bounds must be integer literals")),
        },
        ExprKind::SetEnum(items) => {
            if let Some(bad) = items.iter().find(|i| !is_literal(i)) {
                return Err(ParseError::new(bad.span.clone(), "set enumerations may only list literals"));
            }
            Ok(SetDef::Enum(items.clone()))
        }
        ExprKind::Bin(BinOp::Mul, a, b) => Ok(SetDef::Product(
            Box::new(set_def(a, declared)?),
            Box::new(set_def(b, declared)?),
        )),
        ExprKind::Var(n) => {
            if declared.contains(n) {
                Ok(SetDef::Named(n.clone()))
            } else {
                Err(ParseError::new(e.span.clone(), format!("undeclared set {n}")))
            }
        }
        _ => Err(ParseError::new(
            e.span.clone(),
            "a set is a range lo..hi, an enumeration, or a product of sets",
        )),
    }
}

impl Parser {
    fn model(&mut self) -> PResult<ModelSpec> {
        let mut spec = ModelSpec::default();
        let wrapped = self.eat_kw("MODEL");
        if wrapped {
            spec.name = Some(self.ident()?);
        }
        let mut declared: Vec<String> = Vec::new();
        let mut constants: Vec<String> = Vec::new();
        if self.eat_kw("SETS") {
            loop {
                let start = self.span();
                let name = self.ident()?;
                self.expect_sym("=")?;
                let e = self.expr()?;
                let def = set_def(&e, &declared)?;
                if declared.contains(&name) {
                    return Err(ParseError::new(start, format!("set {name} declared twice")));
                }
                declared.push(name.clone());
                spec.sets.push(SetDecl { name, def, span: self.from(&start) });
                if !self.eat_sym(";") {
                    break;
                }
            }
        }
        if self.eat_kw("CONSTANTS") {
            loop {
                let start = self.span();
                let name = self.ident()?;
                self.expect_sym("=")?;
                let e = self.expr()?;
                let span = self.from(&start);
                if let Some(undeclared) = expr_free_vars(&e)
                    .into_iter()
                    .find(|v| !declared.contains(v) && !constants.contains(v))
                {
                    return Err(ParseError::new(
                        span,
                        format!("constant {name} refers to undeclared set or constant {undeclared}"),
                    ));
                }
                if declared.contains(&name) || constants.contains(&name) {
                    return Err(ParseError::new(span, format!("{name} declared twice")));
                }
                let def = match &e.kind {
                    ExprKind::SetEnum(_) => ConstDef::Table(e),
                    ExprKind::Lambda(..) => ConstDef::Lambda(e),
                    _ => ConstDef::Expr(e),
                };
                constants.push(name.clone());
                spec.constants.push(ConstDecl { name, def, span });
                if !self.eat_sym(";") {
                    break;
                }
            }
        }
        if wrapped {
            self.expect_kw("END")?;
        } else {
            self.eat_kw("END");
        }
        if !matches!(self.peek(), Tok::Eof) {
            return Err(self.error_here("SETS, CONSTANTS or end of input"));
        }
        Ok(spec)
    }
}

/// Parses and validates a finite-model file.
pub fn parse_model(text: &str) -> Result<ModelSpec, ParseError> {
    Parser::new(text, None)?.model()
}

pub fn parse_model_file(text: &str, file: Option<&str>) -> Result<ModelSpec, ParseError> {
    Parser::new(text, file.map(Arc::from))?.model()
}

/// Names referenced by a predicate that are neither bound nor in `known`.
pub fn unresolved_names(p: &Pred, known: &[String]) -> Vec<String> {
    pred_free_vars(p).into_iter().filter(|n| !known.contains(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::{alpha_eq, alpha_eq_machine};

    #[test]
    fn minimal_machine() {
        let m = parse_machine("MACHINE M VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS END").unwrap();
        assert_eq!(m.kind, ComponentKind::Machine);
        assert_eq!(m.variables, vec!["v"]);
        assert!(m.operations.is_empty());
        assert!(!m.span.is_synthetic());
    }

    #[test]
    fn retrieves_in_machine_is_structural_error() {
        let err = parse_machine("MACHINE M VARIABLES v RETRIEVES v = w INITIALISATION v := 0 END").unwrap_err();
        assert!(err.message.contains("RETRIEVES requires RETRENCHMENT"), "{err}");
        assert_eq!(err.span.start, (1, 23));
    }

    #[test]
    fn refinement_needs_target() {
        let err = parse_machine("REFINEMENT R VARIABLES v END").unwrap_err();
        assert!(err.message.contains("REFINES"));
    }

    #[test]
    fn syntax_error_carries_position_and_hint() {
        let err = parse_machine("MACHINE M\nINVARIANT v : \nEND").unwrap_err();
        assert_eq!(err.span.start.0, 3);
        assert!(err.expected.is_some());
    }

    #[test]
    fn parenthesised_predicate_vs_tuple() {
        let p = parse_pred("(hi, lo) : JCINT & (value - vv) >= 0 & (a = b or c = d)").unwrap();
        assert_eq!(p.conjuncts().len(), 3);
    }

    #[test]
    fn application_packs_arguments() {
        let a = parse_expr("f(a, b)").unwrap();
        let b = parse_expr("f((a, b))").unwrap();
        assert!(crate::names::alpha_eq_expr(&a, &b));
    }

    #[test]
    fn operations_separated_by_semicolons() {
        let m = parse_machine(
            "MACHINE M VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS
               inc = PRE v < 3 THEN v := v + 1 END;
               r <-- get = r := v;
               set(x) = BEGIN v := x ; v := v END
             END",
        )
        .unwrap();
        let names: Vec<_> = m.operations.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["inc", "get", "set"]);
        assert_eq!(m.operations[1].results, vec!["r"]);
        assert_eq!(m.operations[2].params, vec!["x"]);
    }

    #[test]
    fn ramification_only_in_retrenchment() {
        let src = "MACHINE M VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS
             op(x) = BEGIN v := x WITHIN x = 1 END END";
        let err = parse_machine(src).unwrap_err();
        assert!(err.message.contains("only allowed in a RETRENCHMENT"));
        let ok = parse_machine(
            "RETRENCHMENT R RETRENCHES M VARIABLES w INVARIANT w : 0..3 RETRIEVES v = w
             INITIALISATION w := 0 OPERATIONS
             op(x) = BEGIN w := x LVAR q WITHIN q : 0..1 & x = q CONCEDES v = 0 END END",
        )
        .unwrap();
        let ram = ok.operations[0].ramification.as_ref().unwrap();
        assert_eq!(ram.lvars, vec!["q"]);
        assert!(ram.concedes.is_some());
    }

    #[test]
    fn parallel_overlap_is_rejected() {
        assert!(parse_subst("v := 1 || v := 2").is_err());
        assert!(parse_subst("v := 1 || w :: {1, 2}").is_ok());
    }

    #[test]
    fn model_with_lambda_constant() {
        let spec = parse_model(
            "SETS JINT = 0..255; JCINT = (0..15) * (0..15)
             CONSTANTS jint_of_jcint = %(hi, lo).((hi, lo) : JCINT | hi * 16 + lo)",
        )
        .unwrap();
        assert_eq!(spec.sets.len(), 2);
        assert_eq!(spec.constants.len(), 1);
        assert!(matches!(spec.constants[0].def, ConstDef::Lambda(_)));
        assert!(matches!(spec.sets[1].def, SetDef::Product(..)));
    }

    #[test]
    fn model_round_trip() {
        let text = "MODEL M SETS A = 0..3; B = {(1, 2), 5}; C = A * (A * B); D = A * A * A
                    CONSTANTS f = %(x).(x : A | x + 1); t = {(0, 1)}; k = card(C) END";
        let spec = parse_model(text).unwrap();
        let printed = print_model(&spec);
        let back = parse_model(&printed).unwrap();
        assert!(alpha_eq_model(&spec, &back), "{printed}");
        assert!(!alpha_eq_model(&spec, &parse_model("SETS A = 0..3").unwrap()));
        // anonymous models print without the wrapper
        let anon = parse_model("SETS A = 0..1").unwrap();
        assert!(alpha_eq_model(&anon, &parse_model(&print_model(&anon)).unwrap()));
    }

    #[test]
    fn empty_model_is_valid() {
        let spec = parse_model("").unwrap();
        assert!(spec.sets.is_empty() && spec.constants.is_empty());
        let spec = parse_model("/* nothing */ MODEL Empty END").unwrap();
        assert_eq!(spec.name.as_deref(), Some("Empty"));
    }

    #[test]
    fn model_rejects_undeclared_names() {
        let err = parse_model("SETS A = 0..3 CONSTANTS f = %(x).(x : FOO | x)").unwrap_err();
        assert!(err.message.contains("FOO"), "{err}");
        let err = parse_model("CONSTANTS g = f; f = {1}").unwrap_err();
        assert!(err.message.contains("undeclared set or constant f"), "{err}");
        assert!(parse_model("SETS A = 3..1").is_err());
    }

    #[test]
    fn negative_literals_fold() {
        let e = parse_expr("-3").unwrap();
        assert!(matches!(e.kind, ExprKind::Int(-3)));
        let p = parse_pred("x - -3 = y").unwrap();
        let q = parse_pred("x - (-3) = y").unwrap();
        assert!(alpha_eq(&p, &q));
    }

    #[test]
    fn roundtrip_small_machine() {
        let src = "MACHINE M SEES C VARIABLES v, w INVARIANT v : 0..3 & w <: {1, 2} & !x.(x : w => x > 0)
                   INITIALISATION v, w := 0, {} OPERATIONS
                   r <-- op(p) = PRE p : 0..3 & (v, p) : dom(f <| g~) THEN v :: {p, v} || r := f[{p}] END END";
        let m = parse_machine(src).unwrap();
        let again = parse_machine(&pretty_print(&m)).unwrap();
        assert!(alpha_eq_machine(&m, &again), "{}", pretty_print(&m));
    }
}
