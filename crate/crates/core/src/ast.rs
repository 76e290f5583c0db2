//! Syntax trees for the B subset: expressions, predicates, generalized
//! substitutions and the components (machines, refinements, retrenchments)
//! that carry them.
//!
//! Trees are immutable once built. Every node carries a [`Span`]; spans never
//! take part in [`alpha_eq`](crate::names::alpha_eq) comparisons.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A region of source text. Synthetic nodes use [`Span::synthetic`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub file: Option<Arc<str>>,
    pub start: (u32, u32),
    pub end: (u32, u32),
}

impl Span {
    pub fn synthetic() -> Self {
        Span::default()
    }

    pub fn new(file: Option<Arc<str>>, start: (u32, u32), end: (u32, u32)) -> Self {
        debug_assert!(start <= end);
        Span { file, start, end }
    }

    pub fn is_synthetic(&self) -> bool {
        self.start == (0, 0) && self.end == (0, 0)
    }

    /// Smallest span covering both.
    pub fn join(&self, other: &Span) -> Span {
        if self.is_synthetic() {
            return other.clone();
        }
        if other.is_synthetic() {
            return self.clone();
        }
        Span {
            file: self.file.clone(),
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}:{}", self.start.0, self.start.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    /// Integer multiplication, or cartesian product when both operands are sets.
    Mul,
    Div,
    Mod,
    /// `a .. b`
    Interval,
    /// `r <| s` is written `DomRestrict` with the set on the left.
    DomRestrict,
    Union,
    Inter,
}

impl BinOp {
    pub fn token(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
            BinOp::Interval => "..",
            BinOp::DomRestrict => "<|",
            BinOp::Union => "\\/",
            BinOp::Inter => "/\\",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Inverse,
    Dom,
    Ran,
    Card,
    Prj1,
    Prj2,
}

/// Families of relations between two sets, checked structurally on membership.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FunKind {
    /// `<->`
    Relation,
    /// `+->`
    Partial,
    /// `-->`
    Total,
    /// `>->`
    TotalInjection,
    /// `-->>`
    TotalSurjection,
    /// `>->>`
    TotalBijection,
}

impl FunKind {
    pub fn token(self) -> &'static str {
        match self {
            FunKind::Relation => "<->",
            FunKind::Partial => "+->",
            FunKind::Total => "-->",
            FunKind::TotalInjection => ">->",
            FunKind::TotalSurjection => "-->>",
            FunKind::TotalBijection => ">->>",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Var(String),
    Int(i64),
    Pair(Box<Expr>, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Un(UnOp, Box<Expr>),
    /// `{e1, ..., en}`; empty for `{}`.
    SetEnum(Vec<Expr>),
    /// `f(e)`; several arguments are packed into a pair first.
    Apply(Box<Expr>, Box<Expr>),
    /// `f[s]`
    Image(Box<Expr>, Box<Expr>),
    /// `%(x, y).(P | E)`
    Lambda(Vec<String>, Box<Pred>, Box<Expr>),
    /// `S <-> T`, `S --> T`, ...
    Funs(FunKind, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    /// `:`
    In,
    /// `/:`
    NotIn,
    /// `<:`
    Subset,
}

impl CmpOp {
    pub fn token(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "/=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::In => ":",
            CmpOp::NotIn => "/:",
            CmpOp::Subset => "<:",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connective {
    And,
    Or,
    Implies,
    Iff,
}

impl Connective {
    pub fn token(self) -> &'static str {
        match self {
            Connective::And => "&",
            Connective::Or => "or",
            Connective::Implies => "=>",
            Connective::Iff => "<=>",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    ForAll,
    Exists,
}

#[derive(Clone, Debug)]
pub struct Pred {
    pub kind: PredKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum PredKind {
    True,
    False,
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Bin(Connective, Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
    Quant(Quantifier, Vec<String>, Box<Pred>),
}

#[derive(Clone, Debug)]
pub struct Subst {
    pub kind: SubstKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum SubstKind {
    Skip,
    /// Simultaneous `v1, ..., vn := e1, ..., en`.
    Assign(Vec<String>, Vec<Expr>),
    /// `v :: S`
    Choice(String, Expr),
    Pre(Pred, Box<Subst>),
    Seq(Box<Subst>, Box<Subst>),
    Parallel(Box<Subst>, Box<Subst>),
    Var(Vec<String>, Box<Subst>),
    /// `r1, ..., rk <-- op(e1, ..., en)`
    Call {
        results: Vec<String>,
        op: String,
        args: Vec<Expr>,
    },
    Block(Box<Subst>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AstError {
    #[error("parallel branches both assign {0}")]
    OverlappingParallel(String),
    #[error("assignment lists {0} variables but {1} expressions")]
    AssignArity(usize, usize),
    #[error("variable {0} assigned twice in one assignment")]
    DuplicateAssign(String),
}

// ---- constructors -------------------------------------------------------

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr { kind, span: Span::synthetic() }
    }
    pub fn with_span(mut self, span: Span) -> Expr {
        self.span = span;
        self
    }
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Var(name.into()))
    }
    pub fn int(v: i64) -> Expr {
        Expr::new(ExprKind::Int(v))
    }
    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::new(ExprKind::Pair(Box::new(a), Box::new(b)))
    }
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::new(ExprKind::Bin(op, Box::new(a), Box::new(b)))
    }
    pub fn un(op: UnOp, a: Expr) -> Expr {
        Expr::new(ExprKind::Un(op, Box::new(a)))
    }
    pub fn product(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }
    pub fn set(items: Vec<Expr>) -> Expr {
        Expr::new(ExprKind::SetEnum(items))
    }
    pub fn empty_set() -> Expr {
        Expr::set(Vec::new())
    }
    pub fn apply(f: Expr, arg: Expr) -> Expr {
        Expr::new(ExprKind::Apply(Box::new(f), Box::new(arg)))
    }
    pub fn image(f: Expr, s: Expr) -> Expr {
        Expr::new(ExprKind::Image(Box::new(f), Box::new(s)))
    }
    pub fn lambda(binders: Vec<String>, constraint: Pred, body: Expr) -> Expr {
        Expr::new(ExprKind::Lambda(binders, Box::new(constraint), Box::new(body)))
    }
    pub fn funs(kind: FunKind, a: Expr, b: Expr) -> Expr {
        Expr::new(ExprKind::Funs(kind, Box::new(a), Box::new(b)))
    }

    /// Left-nested tuple `((e1, e2), e3)`, or the single element itself.
    pub fn tuple(mut items: Vec<Expr>) -> Expr {
        assert!(!items.is_empty(), "empty tuple");
        let rest = items.split_off(1);
        let mut acc = items.pop().unwrap();
        for e in rest {
            acc = Expr::pair(acc, e);
        }
        acc
    }

    /// Projection of component `index` out of a left-nested tuple of `arity`.
    pub fn tuple_component(tuple: Expr, arity: usize, index: usize) -> Expr {
        assert!(index < arity);
        if arity == 1 {
            return tuple;
        }
        // ((a, b), c): the last component is prj2, the rest sit under prj1.
        if index == arity - 1 {
            Expr::un(UnOp::Prj2, tuple)
        } else {
            Expr::tuple_component(Expr::un(UnOp::Prj1, tuple), arity - 1, index)
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl Pred {
    pub fn new(kind: PredKind) -> Pred {
        Pred { kind, span: Span::synthetic() }
    }
    pub fn with_span(mut self, span: Span) -> Pred {
        self.span = span;
        self
    }
    pub fn truth() -> Pred {
        Pred::new(PredKind::True)
    }
    pub fn falsity() -> Pred {
        Pred::new(PredKind::False)
    }
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Pred {
        Pred::new(PredKind::Cmp(op, Box::new(a), Box::new(b)))
    }
    pub fn eq(a: Expr, b: Expr) -> Pred {
        Pred::cmp(CmpOp::Eq, a, b)
    }
    pub fn member(a: Expr, b: Expr) -> Pred {
        Pred::cmp(CmpOp::In, a, b)
    }
    pub fn subset(a: Expr, b: Expr) -> Pred {
        Pred::cmp(CmpOp::Subset, a, b)
    }
    pub fn connect(c: Connective, a: Pred, b: Pred) -> Pred {
        Pred::new(PredKind::Bin(c, Box::new(a), Box::new(b)))
    }
    pub fn not(p: Pred) -> Pred {
        Pred::new(PredKind::Not(Box::new(p)))
    }
    pub fn forall(binders: Vec<String>, body: Pred) -> Pred {
        Pred::new(PredKind::Quant(Quantifier::ForAll, binders, Box::new(body)))
    }
    pub fn exists(binders: Vec<String>, body: Pred) -> Pred {
        Pred::new(PredKind::Quant(Quantifier::Exists, binders, Box::new(body)))
    }

    /// Conjunction that drops literal `btrue` operands.
    pub fn and(a: Pred, b: Pred) -> Pred {
        match (&a.kind, &b.kind) {
            (PredKind::True, _) => b,
            (_, PredKind::True) => a,
            _ => Pred::connect(Connective::And, a, b),
        }
    }

    /// Left-nested conjunction of all items; `btrue` when empty.
    pub fn conj(items: impl IntoIterator<Item = Pred>) -> Pred {
        items.into_iter().fold(Pred::truth(), Pred::and)
    }

    /// Implication that simplifies a literal `btrue` antecedent.
    pub fn implies(a: Pred, b: Pred) -> Pred {
        match a.kind {
            PredKind::True => b,
            _ => Pred::connect(Connective::Implies, a, b),
        }
    }

    pub fn or(a: Pred, b: Pred) -> Pred {
        Pred::connect(Connective::Or, a, b)
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Pred> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Pred, out: &mut Vec<&'a Pred>) {
            match &p.kind {
                PredKind::Bin(Connective::And, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                PredKind::True => {}
                _ => out.push(p),
            }
        }
        walk(self, &mut out);
        out
    }
}

impl Subst {
    pub fn new(kind: SubstKind) -> Subst {
        Subst { kind, span: Span::synthetic() }
    }
    pub fn with_span(mut self, span: Span) -> Subst {
        self.span = span;
        self
    }
    pub fn skip() -> Subst {
        Subst::new(SubstKind::Skip)
    }
    pub fn assign(vars: Vec<String>, exprs: Vec<Expr>) -> Result<Subst, AstError> {
        if vars.len() != exprs.len() {
            return Err(AstError::AssignArity(vars.len(), exprs.len()));
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(AstError::DuplicateAssign(v.clone()));
            }
        }
        Ok(Subst::new(SubstKind::Assign(vars, exprs)))
    }
    pub fn assign1(var: impl Into<String>, e: Expr) -> Subst {
        Subst::new(SubstKind::Assign(vec![var.into()], vec![e]))
    }
    pub fn choice(var: impl Into<String>, set: Expr) -> Subst {
        Subst::new(SubstKind::Choice(var.into(), set))
    }
    pub fn pre(p: Pred, s: Subst) -> Subst {
        Subst::new(SubstKind::Pre(p, Box::new(s)))
    }
    pub fn seq(a: Subst, b: Subst) -> Subst {
        Subst::new(SubstKind::Seq(Box::new(a), Box::new(b)))
    }
    /// `a || b`; rejects branches that write a common variable.
    pub fn parallel(a: Subst, b: Subst) -> Result<Subst, AstError> {
        let wa = crate::names::subst_vars(&a).write;
        let wb = crate::names::subst_vars(&b).write;
        if let Some(v) = wa.intersection(&wb).next() {
            return Err(AstError::OverlappingParallel(v.clone()));
        }
        Ok(Subst::new(SubstKind::Parallel(Box::new(a), Box::new(b))))
    }
    pub fn local(vars: Vec<String>, body: Subst) -> Subst {
        Subst::new(SubstKind::Var(vars, Box::new(body)))
    }
    pub fn call(results: Vec<String>, op: impl Into<String>, args: Vec<Expr>) -> Subst {
        Subst::new(SubstKind::Call { results, op: op.into(), args })
    }
    pub fn block(s: Subst) -> Subst {
        Subst::new(SubstKind::Block(Box::new(s)))
    }

    /// Sequence of several substitutions; `skip` when empty.
    pub fn sequence(items: Vec<Subst>) -> Subst {
        let mut it = items.into_iter();
        let Some(first) = it.next() else {
            return Subst::skip();
        };
        it.fold(first, Subst::seq)
    }

    /// The guard of a top-level `PRE` (looking through `BEGIN ... END`).
    pub fn precondition(&self) -> Pred {
        match &self.kind {
            SubstKind::Pre(p, _) => p.clone(),
            SubstKind::Block(s) => s.precondition(),
            _ => Pred::truth(),
        }
    }
}

// ---- components ---------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    Machine,
    Refinement,
    Retrenchment,
}

impl ComponentKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ComponentKind::Machine => "MACHINE",
            ComponentKind::Refinement => "REFINEMENT",
            ComponentKind::Retrenchment => "RETRENCHMENT",
        }
    }
    pub fn target_keyword(self) -> Option<&'static str> {
        match self {
            ComponentKind::Machine => None,
            ComponentKind::Refinement => Some("REFINES"),
            ComponentKind::Retrenchment => Some("RETRENCHES"),
        }
    }
    pub fn extension(self) -> &'static str {
        match self {
            ComponentKind::Machine => "mch",
            ComponentKind::Refinement => "ref",
            ComponentKind::Retrenchment => "rtr",
        }
    }
}

/// `LVAR` / `WITHIN` / `CONCEDES` of a retrenchment operation.
#[derive(Clone, Debug)]
pub struct Ramification {
    pub lvars: Vec<String>,
    pub within: Option<Pred>,
    pub concedes: Option<Pred>,
}

#[derive(Clone, Debug)]
pub struct OperationDef {
    pub name: String,
    pub params: Vec<String>,
    pub results: Vec<String>,
    pub body: Subst,
    pub ramification: Option<Ramification>,
    pub span: Span,
}

impl OperationDef {
    pub fn new(name: impl Into<String>, params: Vec<String>, results: Vec<String>, body: Subst) -> Self {
        OperationDef {
            name: name.into(),
            params,
            results,
            body,
            ramification: None,
            span: Span::synthetic(),
        }
    }

    pub fn within(&self) -> Pred {
        self.ramification
            .as_ref()
            .and_then(|r| r.within.clone())
            .unwrap_or_else(Pred::truth)
    }

    pub fn concedes(&self) -> Pred {
        self.ramification
            .as_ref()
            .and_then(|r| r.concedes.clone())
            .unwrap_or_else(Pred::falsity)
    }
}

#[derive(Clone, Debug)]
pub struct MachineDef {
    pub kind: ComponentKind,
    pub name: String,
    pub target: Option<String>,
    pub sees: Vec<String>,
    pub includes: Vec<String>,
    pub constants: Vec<String>,
    pub properties: Option<Pred>,
    pub variables: Vec<String>,
    pub invariant: Option<Pred>,
    pub retrieves: Option<Pred>,
    pub assertions: Vec<Pred>,
    pub initialisation: Option<Subst>,
    pub operations: Vec<OperationDef>,
    pub span: Span,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("{0} requires a {1} clause naming its target")]
    MissingTarget(&'static str, &'static str),
    #[error("MACHINE cannot have a REFINES or RETRENCHES clause")]
    UnexpectedTarget,
    #[error("RETRIEVES requires RETRENCHMENT")]
    RetrievesOutsideRetrenchment,
    #[error("RETRENCHMENT {0} has no RETRIEVES clause")]
    MissingRetrieves(String),
    #[error("operation {0}: LVAR/WITHIN/CONCEDES only allowed in a RETRENCHMENT")]
    RamificationOutsideRetrenchment(String),
    #[error("operation {op}: parameter or result {name} clashes with a state variable")]
    SignatureClash { op: String, name: String },
    #[error("operation {0} defined twice")]
    DuplicateOperation(String),
}

impl MachineDef {
    pub fn new(kind: ComponentKind, name: impl Into<String>) -> Self {
        MachineDef {
            kind,
            name: name.into(),
            target: None,
            sees: Vec::new(),
            includes: Vec::new(),
            constants: Vec::new(),
            properties: None,
            variables: Vec::new(),
            invariant: None,
            retrieves: None,
            assertions: Vec::new(),
            initialisation: None,
            operations: Vec::new(),
            span: Span::synthetic(),
        }
    }

    pub fn operation(&self, name: &str) -> Option<&OperationDef> {
        self.operations.iter().find(|o| o.name == name)
    }

    pub fn invariant(&self) -> Pred {
        self.invariant.clone().unwrap_or_else(Pred::truth)
    }

    pub fn initialisation(&self) -> Subst {
        self.initialisation.clone().unwrap_or_else(Subst::skip)
    }

    /// Checks clause/kind agreement. Returns the first violation.
    pub fn validate(&self) -> Result<(), StructureError> {
        match (self.kind, &self.target) {
            (ComponentKind::Machine, Some(_)) => return Err(StructureError::UnexpectedTarget),
            (ComponentKind::Refinement, None) => {
                return Err(StructureError::MissingTarget("REFINEMENT", "REFINES"))
            }
            (ComponentKind::Retrenchment, None) => {
                return Err(StructureError::MissingTarget("RETRENCHMENT", "RETRENCHES"))
            }
            _ => {}
        }
        if self.retrieves.is_some() && self.kind != ComponentKind::Retrenchment {
            return Err(StructureError::RetrievesOutsideRetrenchment);
        }
        if self.kind == ComponentKind::Retrenchment && self.retrieves.is_none() {
            return Err(StructureError::MissingRetrieves(self.name.clone()));
        }
        for (i, op) in self.operations.iter().enumerate() {
            if self.operations[..i].iter().any(|o| o.name == op.name) {
                return Err(StructureError::DuplicateOperation(op.name.clone()));
            }
            if op.ramification.is_some() && self.kind != ComponentKind::Retrenchment {
                return Err(StructureError::RamificationOutsideRetrenchment(op.name.clone()));
            }
            if let Some(n) = op
                .params
                .iter()
                .chain(&op.results)
                .find(|n| self.variables.contains(n))
            {
                return Err(StructureError::SignatureClash { op: op.name.clone(), name: n.clone() });
            }
        }
        Ok(())
    }
}
