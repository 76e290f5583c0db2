//! The signature-change refinement pattern.
//!
//! A component is abstracted to one state variable and one operation over a
//! single carrier: constants `type_X`, `inv_X`, `init_X`, `pre_X`, `stf_X`
//! and `ouf_X` for a context suffix `X`. Two such contexts joined by a pair of
//! conversion functions justify an adapter refinement that translates the
//! parameter in, calls the concrete operation, and translates the result out.
//!
//! Properties quantified over subsets are checked element-wise; images
//! distribute over unions, so this is equivalent and keeps enumeration
//! linear in the carrier.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::*;
use crate::calculus::Operations;
use crate::compile::{compile_operation, pack, valuations, CompileError};
use crate::eval::{eval_expr, eval_pred, Env, EvalError, FiniteModel};
use crate::names::fresh_name;
use crate::parser::{parse_expr, parse_machine, parse_pred};
use crate::po::{infer_carrier, CheckResult, ProofObligation, Status};
use crate::value::{Value, ValueSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("{0}")]
    Synthesis(String),
    #[error("cannot infer a carrier for {0}")]
    Untyped(String),
    #[error("{what}: {error}")]
    Eval { what: String, error: EvalError },
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// The finite sets of one schematic context.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchematicContext {
    pub suffix: String,
    pub ty: ValueSet,
    pub inv: ValueSet,
    pub init: ValueSet,
    pub pre: ValueSet,
    pub stf: ValueSet,
    pub ouf: ValueSet,
}

impl SchematicContext {
    pub fn new(suffix: impl Into<String>) -> Self {
        SchematicContext { suffix: suffix.into(), ..Default::default() }
    }

    /// Adds `type_X` as a set and the other five as constants.
    pub fn install(&self, m: &mut FiniteModel) {
        let s = &self.suffix;
        m.insert_set(format!("type_{s}"), self.ty.clone());
        for (name, v) in
            [("inv", &self.inv), ("init", &self.init), ("pre", &self.pre), ("stf", &self.stf), ("ouf", &self.ouf)]
        {
            m.insert_constant(format!("{name}_{s}"), Value::from_set(v.clone()));
        }
    }

    /// Reads a context back from a model holding its six names.
    pub fn from_model(m: &FiniteModel, suffix: &str) -> Result<Self, PatternError> {
        let get = |name: &str| -> Result<ValueSet, PatternError> {
            let full = format!("{name}_{suffix}");
            let v = m.lookup(&full).ok_or_else(|| PatternError::Eval {
                what: format!("context {suffix}"),
                error: EvalError::Unbound(full.clone()),
            })?;
            v.as_set().cloned().ok_or_else(|| PatternError::Eval {
                what: format!("context {suffix}"),
                error: EvalError::Type(format!("{full} is not a set")),
            })
        };
        Ok(SchematicContext {
            suffix: suffix.to_string(),
            ty: get("type")?,
            inv: get("inv")?,
            init: get("init")?,
            pre: get("pre")?,
            stf: get("stf")?,
            ouf: get("ouf")?,
        })
    }
}

/// Model names of the two conversion functions, and the context component
/// that declares them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConversionNames {
    pub aofc: String,
    pub cofa: String,
    pub context: Option<String>,
}

impl Default for ConversionNames {
    fn default() -> Self {
        ConversionNames { aofc: "AofC".into(), cofa: "CofA".into(), context: None }
    }
}

/// Tables of `AofC : type_C -> type_A` and `CofA : type_A -> type_C`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Conversion {
    pub aofc: ValueSet,
    pub cofa: ValueSet,
}

impl Conversion {
    pub fn install(&self, m: &mut FiniteModel, names: &ConversionNames) {
        m.insert_constant(names.aofc.clone(), Value::from_set(self.aofc.clone()));
        m.insert_constant(names.cofa.clone(), Value::from_set(self.cofa.clone()));
    }
}

/// A model holding both contexts and the conversion.
pub fn pattern_model(a: &SchematicContext, c: &SchematicContext, conv: &Conversion, names: &ConversionNames) -> FiniteModel {
    let mut m = FiniteModel::new();
    a.install(&mut m);
    c.install(&mut m);
    conv.install(&mut m, names);
    m
}

/// Replaces whole identifiers of `template` per `map`.
fn instantiate(template: &str, map: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        match map.iter().find(|(k, _)| *k == word.as_str()) {
            Some((_, v)) => out.push_str(v),
            None => out.push_str(word),
        }
        word.clear();
    };
    for ch in template.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn build(name: String, template: &str, free: &[(&str, &str)], map: &[(&str, String)], provenance: &str) -> ProofObligation {
    let formula = parse_pred(&instantiate(template, map)).expect("pattern template parses");
    let free = free
        .iter()
        .map(|(v, c)| (v.to_string(), parse_expr(&instantiate(c, map)).expect("carrier template parses")))
        .collect();
    ProofObligation { name, formula, free, provenance: provenance.to_string() }
}

fn context_map(suffix: &str) -> Vec<(&'static str, String)> {
    ["type", "inv", "init", "pre", "stf", "ouf"]
        .into_iter()
        .zip(["type_X", "inv_X", "init_X", "pre_X", "stf_X", "ouf_X"])
        .map(|(base, key)| (key, format!("{base}_{suffix}")))
        .collect()
}

const CONTEXT_PROPERTIES: [(&str, &str, &str); 9] = [
    ("x : inv_X => x : type_X", "inv_X", "inv is a subset of type"),
    ("x : init_X => x : type_X", "init_X", "init is a subset of type"),
    ("x : pre_X => x : type_X * type_X", "pre_X", "pre relates states and parameters"),
    ("x : stf_X => x : (type_X * type_X) * type_X", "stf_X", "stf relates (state, parameter) to states"),
    ("x : ouf_X => x : (type_X * type_X) * type_X", "ouf_X", "ouf relates (state, parameter) to outputs"),
    ("x : inv_X <| pre_X => x : dom(stf_X)", "pre_X", "stf is defined on valid states within pre"),
    ("x : inv_X <| pre_X => x : dom(ouf_X)", "pre_X", "ouf is defined on valid states within pre"),
    ("x : init_X => x : inv_X", "init_X", "initial states are valid"),
    ("x : stf_X & prj1(x) : inv_X <| pre_X => prj2(x) : inv_X", "stf_X", "transitions from valid states stay valid"),
];

/// The nine well-formedness properties of a schematic context, named
/// `context.P1` .. `context.P9`.
pub fn context_pos(ctx: &SchematicContext) -> Vec<ProofObligation> {
    let map = context_map(&ctx.suffix);
    CONTEXT_PROPERTIES
        .iter()
        .enumerate()
        .map(|(i, (t, carrier, prov))| build(format!("context.P{}", i + 1), t, &[("x", carrier)], &map, prov))
        .collect()
}

type Template = (&'static str, &'static [(&'static str, &'static str)], &'static str);

/// Totality and bijectivity are split per element: a relation into the
/// target whose every element has exactly one image, whose images have one
/// preimage, between carriers of equal size.
const INTERFACE_PROPERTIES: [Template; 11] = [
    (
        "AofC <: type_C * type_A & card(type_C) = card(type_A) & card(AofC[{c}]) = 1 & card(AofC~[AofC[{c}]]) = 1",
        &[("c", "type_C")],
        "AofC is a total bijection from type_C to type_A",
    ),
    (
        "CofA <: type_A * type_C & card(type_A) = card(type_C) & card(CofA[{a}]) = 1 & card(CofA~[CofA[{a}]]) = 1",
        &[("a", "type_A")],
        "CofA is a total bijection from type_A to type_C",
    ),
    ("CofA~ = AofC", &[], "the conversions are mutually inverse"),
    ("a : inv_A => CofA[{a}] <: inv_C", &[("a", "type_A")], "CofA maps valid states to valid states"),
    ("c : inv_C => AofC[{c}] <: inv_A", &[("c", "type_C")], "AofC maps valid states to valid states"),
    ("c : init_C => AofC[{c}] <: init_A", &[("c", "type_C")], "AofC maps initial states to initial states"),
    (
        "v : type_A & p : type_A & (v, p) : pre_A => CofA[{v}] * CofA[{p}] <: pre_C",
        &[("v", "type_A"), ("p", "type_A")],
        "CofA preserves the precondition, componentwise",
    ),
    (
        "v : type_A & p : type_A & (v, p) : dom(stf_A) => (CofA(v), CofA(p)) : dom(stf_C)",
        &[("v", "type_A"), ("p", "type_A")],
        "CofA preserves the domain of stf",
    ),
    (
        "v : type_A & p : type_A & (v, p) : dom(stf_A) => CofA[stf_A[{(v, p)}]] = stf_C[{(CofA(v), CofA(p))}]",
        &[("v", "type_A"), ("p", "type_A")],
        "CofA commutes with stf",
    ),
    (
        "v : type_A & p : type_A & (v, p) : dom(ouf_A) => (CofA(v), CofA(p)) : dom(ouf_C)",
        &[("v", "type_A"), ("p", "type_A")],
        "CofA preserves the domain of ouf",
    ),
    (
        "v : type_A & p : type_A & (v, p) : dom(ouf_A) => CofA[ouf_A[{(v, p)}]] = ouf_C[{(CofA(v), CofA(p))}]",
        &[("v", "type_A"), ("p", "type_A")],
        "CofA commutes with ouf",
    ),
];

const INTERFACE_ASSERTIONS: [Template; 7] = [
    ("AofC~ = CofA", &[], "AofC inverted is CofA"),
    ("dom(AofC) = type_C", &[], "AofC is total"),
    ("dom(CofA) = type_A", &[], "CofA is total"),
    (
        "a : type_A & c : type_C => (AofC(c) = a <=> c = CofA(a))",
        &[("a", "type_A"), ("c", "type_C")],
        "the conversions agree pointwise",
    ),
    (
        "v : type_A & p : type_A & (v, p) : inv_A <| pre_A => CofA[stf_A[{(v, p)}]] <: inv_C",
        &[("v", "type_A"), ("p", "type_A")],
        "converted abstract successors are valid concrete states",
    ),
    ("x : type_A => AofC[CofA[{x}]] = {x}", &[("x", "type_A")], "AofC after CofA is the identity"),
    ("x : type_C => CofA[AofC[{x}]] = {x}", &[("x", "type_C")], "CofA after AofC is the identity"),
];

/// The eleven conversion properties (`iface.P1` ..) and the seven assertions
/// that should follow from them (`iface.A1` ..).
pub fn interface_pos(a: &SchematicContext, c: &SchematicContext, conv: &ConversionNames) -> Vec<ProofObligation> {
    let mut map = Vec::new();
    for (base, key) in ["type", "inv", "init", "pre", "stf", "ouf"].into_iter().zip(["type_A", "inv_A", "init_A", "pre_A", "stf_A", "ouf_A"]) {
        map.push((key, format!("{base}_{}", a.suffix)));
    }
    for (base, key) in ["type", "inv", "init", "pre", "stf", "ouf"].into_iter().zip(["type_C", "inv_C", "init_C", "pre_C", "stf_C", "ouf_C"]) {
        map.push((key, format!("{base}_{}", c.suffix)));
    }
    map.push(("AofC", conv.aofc.clone()));
    map.push(("CofA", conv.cofa.clone()));
    let props = INTERFACE_PROPERTIES
        .iter()
        .enumerate()
        .map(|(i, (t, free, prov))| build(format!("iface.P{}", i + 1), t, free, &map, prov));
    let asserts = INTERFACE_ASSERTIONS
        .iter()
        .enumerate()
        .map(|(i, (t, free, prov))| build(format!("iface.A{}", i + 1), t, free, &map, prov));
    props.chain(asserts).collect()
}

/// Prepends `prefix.` to every obligation name.
pub fn prefixed(pos: Vec<ProofObligation>, prefix: &str) -> Vec<ProofObligation> {
    pos.into_iter().map(|mut p| { p.name = format!("{prefix}.{}", p.name); p }).collect()
}

/// Assertions refuted although every property was discharged: the
/// properties do not entail their own consequences.
pub fn internal_inconsistency(results: &[CheckResult]) -> Option<String> {
    let kind = |r: &CheckResult, k: char| {
        r.name.rsplit_once("iface.").is_some_and(|(_, tail)| tail.starts_with(k))
    };
    let props_ok = results.iter().filter(|r| kind(r, 'P')).all(|r| r.status == Status::Discharged);
    let bad: Vec<&str> =
        results.iter().filter(|r| kind(r, 'A') && r.status != Status::Discharged).map(|r| r.name.as_str()).collect();
    (props_ok && !bad.is_empty() && results.iter().any(|r| kind(r, 'P')))
        .then(|| format!("internal inconsistency: properties discharged but {} failed", bad.join(", ")))
}

// ---- adapter synthesis --------------------------------------------------

fn tuple_of(names: &[String]) -> Expr {
    Expr::tuple(names.iter().map(Expr::var).collect())
}

/// The adapter refinement `<abs>_ref` of `abs` through `conc`. Each abstract
/// operation becomes `VAR to, from IN to := CofA(p) ; from <-- op_C(to) ;
/// r := AofC(from) END`, dropping the steps (and locals) for a missing
/// parameter or result.
pub fn synthesize_adapter(
    abs: &MachineDef,
    conc: &MachineDef,
    conv: &ConversionNames,
    op_map: &BTreeMap<String, String>,
) -> Result<MachineDef, PatternError> {
    if let Some(extra) = op_map.keys().find(|k| abs.operation(k).is_none()) {
        return Err(PatternError::Synthesis(format!("operation map names unknown abstract operation {extra}")));
    }
    let mut r = MachineDef::new(ComponentKind::Refinement, format!("{}_ref", abs.name));
    r.target = Some(abs.name.clone());
    for s in abs.sees.iter().chain(&conc.sees).chain(conv.context.iter()) {
        if !r.sees.contains(s) {
            r.sees.push(s.clone());
        }
    }
    r.includes = vec![conc.name.clone()];
    if !abs.variables.is_empty() && !conc.variables.is_empty() {
        r.invariant = Some(Pred::eq(
            tuple_of(&abs.variables),
            Expr::apply(Expr::var(&conv.aofc), tuple_of(&conc.variables)),
        ));
    }
    for aop in &abs.operations {
        let cname = op_map.get(&aop.name).ok_or_else(|| {
            PatternError::Synthesis(format!("no concrete operation given for abstract operation {}", aop.name))
        })?;
        let cop = conc
            .operation(cname)
            .ok_or_else(|| PatternError::Synthesis(format!("unknown concrete operation {cname} of {}", conc.name)))?;
        for (what, a, c) in [("parameters", &aop.params, &cop.params), ("results", &aop.results, &cop.results)] {
            if a.len() > 1 || c.len() > 1 || a.len() != c.len() {
                return Err(PatternError::Synthesis(format!(
                    "{} -> {cname}: adapters need matching single {what}, found {} and {}",
                    aop.name,
                    a.len(),
                    c.len()
                )));
            }
        }
        let mut avoid: crate::names::Names = aop.params.iter().chain(&aop.results).cloned().collect();
        avoid.extend(abs.variables.iter().cloned());
        avoid.extend(conc.variables.iter().cloned());
        let mut locals = Vec::new();
        let mut steps = Vec::new();
        let mut args = Vec::new();
        let mut outs = Vec::new();
        if let Some(p) = aop.params.first() {
            let to = fresh_name("to", &avoid);
            avoid.insert(to.clone());
            steps.push(Subst::assign1(&to, Expr::apply(Expr::var(&conv.cofa), Expr::var(p))));
            args.push(Expr::var(&to));
            locals.push(to);
        }
        let mut finish = None;
        if let Some(res) = aop.results.first() {
            let from = fresh_name("from", &avoid);
            avoid.insert(from.clone());
            finish = Some(Subst::assign1(res, Expr::apply(Expr::var(&conv.aofc), Expr::var(&from))));
            outs.push(from.clone());
            locals.push(from);
        }
        steps.push(Subst::call(outs, cname.clone(), args));
        steps.extend(finish);
        let seq = Subst::sequence(steps);
        let body = if locals.is_empty() { seq } else { Subst::local(locals, seq) };
        r.operations.push(OperationDef::new(aop.name.clone(), aop.params.clone(), aop.results.clone(), body));
    }
    Ok(r)
}

const API_TEMPLATE: &str = "MACHINE API_X
VARIABLES v_X
INVARIANT v_X : type_X & v_X : inv_X
INITIALISATION v_X :: init_X
OPERATIONS
  r_X <-- operation_X(p_X) =
    PRE p_X : type_X & (v_X, p_X) : pre_X THEN
      v_X :: stf_X[{(v_X, p_X)}] || r_X :: ouf_X[{(v_X, p_X)}]
    END
END";

/// The generic component over the schematic context with `suffix`.
pub fn api_machine(suffix: &str) -> MachineDef {
    let mut map = context_map(suffix);
    for base in ["API", "v", "r", "p", "operation"] {
        let key: &'static str = match base {
            "API" => "API_X",
            "v" => "v_X",
            "r" => "r_X",
            "p" => "p_X",
            _ => "operation_X",
        };
        map.push((key, format!("{base}_{suffix}")));
    }
    parse_machine(&instantiate(API_TEMPLATE, &map)).expect("API template parses")
}

/// Refinement obligations of the adapter between `api_machine(a)` and
/// `api_machine(c)`, and the machines themselves.
pub fn api_adapter(a: &str, c: &str, conv: &ConversionNames) -> (MachineDef, MachineDef, MachineDef) {
    let abs = api_machine(a);
    let conc = api_machine(c);
    let map = BTreeMap::from([(format!("operation_{a}"), format!("operation_{c}"))]);
    let adapter = synthesize_adapter(&abs, &conc, conv, &map).expect("generic adapter");
    (abs, conc, adapter)
}

// ---- compiling a machine ------------------------------------------------

fn carrier_value(name: &str, sources: &[&Pred], m: &FiniteModel) -> Result<ValueSet, PatternError> {
    let e = infer_carrier(name, sources).ok_or_else(|| PatternError::Untyped(name.to_string()))?;
    let v = eval_expr(&e, m, &Env::new()).map_err(|error| PatternError::Eval { what: format!("carrier of {name}"), error })?;
    v.as_set().cloned().ok_or_else(|| PatternError::Eval {
        what: format!("carrier of {name}"),
        error: EvalError::Type("not a set".into()),
    })
}

/// One schematic context per operation of `mach`. States (and, by default,
/// the context carrier) are the packed valuations of its variables.
pub fn compile_machine(
    mach: &MachineDef,
    m: &FiniteModel,
    suffix: &str,
    ty: Option<&ValueSet>,
) -> Result<Vec<(String, SchematicContext)>, PatternError> {
    let inv = mach.invariant();
    let mut carriers = BTreeMap::new();
    for v in &mach.variables {
        carriers.insert(v.clone(), carrier_value(v, &[&inv], m)?);
    }
    let states = valuations(&mach.variables, &carriers)?;
    let mut base = SchematicContext::new(suffix);
    base.ty = match ty {
        Some(t) => t.clone(),
        None => states.iter().map(|s| pack(&mach.variables, s)).collect(),
    };
    for s in &states {
        let ok = eval_pred(&inv, m, s).map_err(|error| PatternError::Eval { what: "invariant".into(), error })?;
        if ok {
            base.inv.insert(pack(&mach.variables, s));
        }
    }
    let ops = Operations::new();
    let init = crate::calculus::successors(&mach.initialisation(), m, &Env::new(), &ops)
        .map_err(|e| CompileError::Eval { op: "INITIALISATION".into(), env: Env::new(), error: e })?;
    base.init = init.successors.iter().map(|s| pack(&mach.variables, s)).collect();

    let mut out = Vec::new();
    for op in &mach.operations {
        let guard = op.body.precondition();
        let mut op_carriers = carriers.clone();
        for p in &op.params {
            op_carriers.insert(p.clone(), carrier_value(p, &[&guard], m)?);
        }
        let c = compile_operation(op, m, &mach.variables, &op_carriers, &base.ty, &ops)?;
        let mut ctx = base.clone();
        ctx.pre = c.pre;
        ctx.stf = c.stf;
        ctx.ouf = c.ouf;
        out.push((op.name.clone(), ctx));
    }
    Ok(out)
}
