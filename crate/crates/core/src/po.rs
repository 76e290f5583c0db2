//! Proof obligations for machine consistency, refinement and retrenchment,
//! and their finite discharge.
//!
//! Every obligation is `h1 & ... & hn => c` over declared free variables.
//! Hypotheses are listed so that each variable's typing or defining equation
//! comes right after the variables it depends on; the search then prunes and
//! solves equations early (see [`crate::search`]).

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::ast::*;
use crate::calculus::{trm, wp, CalcError, Operations};
use crate::eval::{Env, FiniteModel};
use crate::names::{expr_free_vars, fresh_name, pred_all_names, pred_free_vars, rename_subst, subst_all_names, Names};
use crate::search::{search, SearchError, SearchOptions, SearchOutcome};

#[derive(Clone, Debug)]
pub struct ProofObligation {
    /// `component.operation.kind`
    pub name: String,
    pub formula: Pred,
    /// Free variables with their carriers, in enumeration order.
    pub free: Vec<(String, Expr)>,
    /// The rule this obligation instantiates.
    pub provenance: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoError {
    #[error("{0}")]
    Structure(String),
    #[error("{po}: cannot infer a carrier for {name}; add a typing conjunct `{name} : S`")]
    Untyped { po: String, name: String },
    #[error("{po}: {error}")]
    Calc { po: String, error: CalcError },
    #[error("{po}: name {name} is neither a variable nor a set or constant of the model")]
    Unresolved { po: String, name: String },
    #[error("{po}: {error}")]
    Carrier { po: String, error: SearchError },
}

fn calc(po: &str) -> impl Fn(CalcError) -> PoError + '_ {
    move |error| PoError::Calc { po: po.to_string(), error }
}

/// The first `name : S` conjunct among `sources` with `S` not mentioning `name`.
pub fn infer_carrier(name: &str, sources: &[&Pred]) -> Option<Expr> {
    sources.iter().flat_map(|p| p.conjuncts()).find_map(|c| match &c.kind {
        PredKind::Cmp(CmpOp::In, lhs, rhs) if lhs.as_var() == Some(name) && !expr_free_vars(rhs).contains(name) => {
            Some((**rhs).clone())
        }
        _ => None,
    })
}

/// Free-variable list for `formula`: `order` filtered to names that occur,
/// deduplicated, each typed from `sources`.
fn free_list(po: &str, formula: &Pred, order: &[String], sources: &[&Pred]) -> Result<Vec<(String, Expr)>, PoError> {
    let fv = pred_free_vars(formula);
    let mut out: Vec<(String, Expr)> = Vec::new();
    for name in order {
        if !fv.contains(name) || out.iter().any(|(n, _)| n == name) {
            continue;
        }
        let carrier =
            infer_carrier(name, sources).ok_or_else(|| PoError::Untyped { po: po.to_string(), name: name.clone() })?;
        out.push((name.clone(), carrier));
    }
    Ok(out)
}

fn obligation(
    name: String,
    hyps: Vec<Pred>,
    conclusion: Pred,
    order: &[String],
    sources: &[&Pred],
    provenance: &str,
) -> Result<ProofObligation, PoError> {
    let formula = Pred::implies(Pred::conj(hyps), conclusion);
    let free = free_list(&name, &formula, order, sources)?;
    Ok(ProofObligation { name, formula, free, provenance: provenance.to_string() })
}

fn included_of<'a>(m: &MachineDef, included: &'a [MachineDef]) -> Result<Vec<&'a MachineDef>, PoError> {
    m.includes
        .iter()
        .map(|n| {
            included
                .iter()
                .find(|c| &c.name == n)
                .ok_or_else(|| PoError::Structure(format!("{}: included machine {n} not supplied", m.name)))
        })
        .collect()
}

// ---- well-definedness of choices ----------------------------------------

enum Frame<'a> {
    Guard(&'a Pred),
    After(&'a Subst),
    Local(&'a [String]),
}

/// `V /= {}` for each choice `v :: V` in `s`, moved back to the pre-state.
fn choice_conditions(s: &Subst, ops: &Operations) -> Result<Vec<Pred>, CalcError> {
    fn walk<'a>(s: &'a Subst, ops: &Operations, ctx: &mut Vec<Frame<'a>>, out: &mut Vec<Pred>) -> Result<(), CalcError> {
        match &s.kind {
            SubstKind::Choice(_, set) => {
                let mut p = Pred::cmp(CmpOp::Neq, set.clone(), Expr::empty_set());
                for f in ctx.iter().rev() {
                    p = match f {
                        Frame::Guard(q) => Pred::implies((*q).clone(), p),
                        Frame::After(a) => wp(a, &p, ops)?,
                        Frame::Local(xs) => {
                            let fv = pred_free_vars(&p);
                            let bound: Vec<String> = xs.iter().filter(|x| fv.contains(*x)).cloned().collect();
                            if bound.is_empty() {
                                p
                            } else {
                                Pred::forall(bound, p)
                            }
                        }
                    };
                }
                out.push(p);
            }
            SubstKind::Pre(q, b) => {
                ctx.push(Frame::Guard(q));
                walk(b, ops, ctx, out)?;
                ctx.pop();
            }
            SubstKind::Seq(a, b) => {
                walk(a, ops, ctx, out)?;
                ctx.push(Frame::After(a));
                walk(b, ops, ctx, out)?;
                ctx.pop();
            }
            SubstKind::Parallel(a, b) => {
                walk(a, ops, ctx, out)?;
                walk(b, ops, ctx, out)?;
            }
            SubstKind::Var(xs, b) => {
                ctx.push(Frame::Local(xs));
                walk(b, ops, ctx, out)?;
                ctx.pop();
            }
            SubstKind::Block(b) => walk(b, ops, ctx, out)?,
            SubstKind::Skip | SubstKind::Assign(..) | SubstKind::Call { .. } => {}
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(s, ops, &mut Vec::new(), &mut out)?;
    Ok(out)
}

// ---- consistency --------------------------------------------------------

/// Initialisation establishes the invariant; each operation preserves it
/// under its guard; each choice set is non-empty where it is reached.
/// `included` must supply every machine named in `m`'s INCLUDES.
pub fn consistency_pos(m: &MachineDef, included: &[MachineDef]) -> Result<Vec<ProofObligation>, PoError> {
    let inc = included_of(m, included)?;
    let ops = Operations::from_machines(inc.iter().copied());
    let inv = m.invariant();
    let inc_invs: Vec<Pred> = inc.iter().map(|c| c.invariant()).collect();
    let mut state: Vec<String> = inc.iter().flat_map(|c| c.variables.iter().cloned()).collect();
    state.extend(m.variables.iter().cloned());

    let mut out = Vec::new();
    let init_name = format!("{}.INITIALISATION", m.name);
    let mut init_steps: Vec<Subst> = inc.iter().map(|c| c.initialisation()).collect();
    init_steps.push(m.initialisation());
    let init = Subst::sequence(init_steps);
    let concl = wp(&init, &inv, &ops).map_err(calc(&init_name))?;
    out.push(obligation(
        format!("{init_name}.consistency"),
        Vec::new(),
        concl,
        &[],
        &[],
        "initialisation establishes the invariant: [Init]Inv",
    )?);
    for (i, wd) in choice_conditions(&m.initialisation(), &ops).map_err(calc(&init_name))?.into_iter().enumerate() {
        out.push(obligation(format!("{init_name}.wd{}", i + 1), Vec::new(), wd, &[], &[], "choice set is non-empty")?);
    }

    for op in &m.operations {
        let base = format!("{}.{}", m.name, op.name);
        let guard = op.body.precondition();
        let mut hyps = inc_invs.clone();
        hyps.push(inv.clone());
        let mut order = state.clone();
        order.extend(op.params.iter().cloned());
        let mut sources: Vec<&Pred> = inc_invs.iter().collect();
        sources.push(&inv);
        sources.push(&guard);

        let mut op_hyps = hyps.clone();
        op_hyps.push(guard.clone());
        let concl = wp(&op.body, &inv, &ops).map_err(calc(&base))?;
        out.push(obligation(
            format!("{base}.consistency"),
            op_hyps,
            concl,
            &order,
            &sources,
            "operation preserves the invariant: Inv & P => [S]Inv",
        )?);
        for (i, wd) in choice_conditions(&op.body, &ops).map_err(calc(&base))?.into_iter().enumerate() {
            out.push(obligation(
                format!("{base}.wd{}", i + 1),
                hyps.clone(),
                wd,
                &order,
                &sources,
                "choice set is non-empty",
            )?);
        }
    }
    Ok(out)
}

// ---- refinement ---------------------------------------------------------

fn check_target(abs: &MachineDef, r: &MachineDef, kind: ComponentKind) -> Result<(), PoError> {
    if r.kind != kind {
        return Err(PoError::Structure(format!("{} is a {}, expected a {}", r.name, r.kind.keyword(), kind.keyword())));
    }
    if r.target.as_deref() != Some(abs.name.as_str()) {
        return Err(PoError::Structure(format!(
            "{} {} {}, not {}",
            r.name,
            kind.target_keyword().unwrap_or_default(),
            r.target.as_deref().unwrap_or("nothing"),
            abs.name
        )));
    }
    Ok(())
}

/// Operation interfaces must coincide exactly.
pub fn check_signatures(abs: &MachineDef, r: &MachineDef) -> Result<(), PoError> {
    for op in &abs.operations {
        let Some(rop) = r.operation(&op.name) else {
            return Err(PoError::Structure(format!(
                "signature mismatch: operation {} of {} has no counterpart in {}",
                op.name, abs.name, r.name
            )));
        };
        if rop.params != op.params || rop.results != op.results {
            return Err(PoError::Structure(format!(
                "signature mismatch: operation {} differs in parameters or results between {} and {}",
                op.name, abs.name, r.name
            )));
        }
    }
    if let Some(extra) = r.operations.iter().find(|o| abs.operation(&o.name).is_none()) {
        return Err(PoError::Structure(format!(
            "operation count mismatch: {} defines {} which {} lacks",
            r.name, extra.name, abs.name
        )));
    }
    Ok(())
}

/// Fresh names for `names`, avoiding `avoid`; returns the renaming.
fn freshen(names: &[String], avoid: &mut Names) -> Vec<(String, String)> {
    names
        .iter()
        .map(|n| {
            let f = fresh_name(n, avoid);
            avoid.insert(f.clone());
            (n.clone(), f)
        })
        .collect()
}

/// Applicability (`trm` of the refined operation) and behaviour
/// (`[S_ref]not([S_abs]not(J & r' = r))`) per operation, plus the
/// initialisation. Signatures are checked before anything is generated.
pub fn refinement_pos(abs: &MachineDef, r: &MachineDef, included: &[MachineDef]) -> Result<Vec<ProofObligation>, PoError> {
    check_target(abs, r, ComponentKind::Refinement)?;
    check_signatures(abs, r)?;
    let inc = included_of(r, included)?;
    let ops = Operations::from_machines(inc.iter().copied());
    let none = Operations::new();
    let glue = r.invariant();
    let inv_a = abs.invariant();
    let inc_invs: Vec<Pred> = inc.iter().map(|c| c.invariant()).collect();
    let mut concrete: Vec<String> = inc.iter().flat_map(|c| c.variables.iter().cloned()).collect();
    concrete.extend(r.variables.iter().cloned());

    let mut out = Vec::new();
    let init_name = format!("{}.INITIALISATION", r.name);
    let mut init_steps: Vec<Subst> = inc.iter().map(|c| c.initialisation()).collect();
    init_steps.push(r.initialisation());
    let inner = wp(&abs.initialisation(), &Pred::not(glue.clone()), &none).map_err(calc(&init_name))?;
    let concl = wp(&Subst::sequence(init_steps), &Pred::not(inner), &ops).map_err(calc(&init_name))?;
    out.push(obligation(
        format!("{init_name}.behaviour"),
        Vec::new(),
        concl,
        &[],
        &[],
        "refined initialisation can be matched: [Init_R]not([Init_A]not(J))",
    )?);

    for aop in &abs.operations {
        let rop = r.operation(&aop.name).expect("signatures checked");
        let base = format!("{}.{}", r.name, aop.name);
        let trm_a = trm(&aop.body, &none).map_err(calc(&base))?;
        let mut hyps = inc_invs.clone();
        hyps.push(glue.clone());
        hyps.push(inv_a.clone());
        hyps.push(trm_a.clone());
        let mut order = concrete.clone();
        order.extend(abs.variables.iter().cloned());
        order.extend(aop.params.iter().cloned());
        let guard_a = aop.body.precondition();
        let mut sources: Vec<&Pred> = inc_invs.iter().collect();
        sources.extend([&glue, &inv_a, &guard_a, &trm_a]);

        let applicability = trm(&rop.body, &ops).map_err(calc(&base))?;
        out.push(obligation(
            format!("{base}.applicability"),
            hyps.clone(),
            applicability,
            &order,
            &sources,
            "refined operation terminates where the abstract one does: trm(S_A) => trm(S_R)",
        )?);

        let mut avoid = subst_all_names(&aop.body);
        avoid.extend(subst_all_names(&rop.body));
        avoid.extend(pred_all_names(&glue));
        avoid.extend(abs.variables.iter().cloned());
        avoid.extend(concrete.iter().cloned());
        let renamed = freshen(&rop.results, &mut avoid);
        let post = Pred::conj(
            std::iter::once(glue.clone())
                .chain(renamed.iter().map(|(r, r2)| Pred::eq(Expr::var(r2), Expr::var(r)))),
        );
        let inner = wp(&aop.body, &Pred::not(post), &none).map_err(calc(&base))?;
        let s_ref = rename_subst(&rop.body, &renamed.iter().cloned().collect());
        let behaviour = wp(&s_ref, &Pred::not(inner), &ops).map_err(calc(&base))?;
        out.push(obligation(
            format!("{base}.behaviour"),
            hyps,
            behaviour,
            &order,
            &sources,
            "refined operation can be matched: [S_R]not([S_A]not(J & r' = r))",
        )?);
    }
    Ok(out)
}

// ---- retrenchment -------------------------------------------------------

/// Local consistency POs of the retrenchment, the initialisation joint PO
/// `[Init_R]not([Init_A]not(Ret))`, and per operation the joint PO
/// `Inv_R & Ret & Inv_A & trm(S_R) & W => trm(S_A) & [S_R]not([S_A]not(Ret or C))`.
pub fn retrenchment_pos(abs: &MachineDef, rtr: &MachineDef, included: &[MachineDef]) -> Result<Vec<ProofObligation>, PoError> {
    check_target(abs, rtr, ComponentKind::Retrenchment)?;
    let ret = rtr
        .retrieves
        .clone()
        .ok_or_else(|| PoError::Structure(format!("RETRENCHMENT {} has no RETRIEVES clause", rtr.name)))?;
    let mut out = consistency_pos(rtr, included)?;
    let inc = included_of(rtr, included)?;
    let ops = Operations::from_machines(inc.iter().copied());
    let none = Operations::new();
    let inv_r = rtr.invariant();
    let inv_a = abs.invariant();
    let inc_invs: Vec<Pred> = inc.iter().map(|c| c.invariant()).collect();
    let mut concrete: Vec<String> = inc.iter().flat_map(|c| c.variables.iter().cloned()).collect();
    concrete.extend(rtr.variables.iter().cloned());

    let init_name = format!("{}.INITIALISATION", rtr.name);
    let mut init_steps: Vec<Subst> = inc.iter().map(|c| c.initialisation()).collect();
    init_steps.push(rtr.initialisation());
    let inner = wp(&abs.initialisation(), &Pred::not(ret.clone()), &none).map_err(calc(&init_name))?;
    let concl = wp(&Subst::sequence(init_steps), &Pred::not(inner), &ops).map_err(calc(&init_name))?;
    out.push(obligation(
        format!("{init_name}.joint"),
        Vec::new(),
        concl,
        &[],
        &[],
        "retrenched initialisation satisfies RETRIEVES: [Init_R]not([Init_A]not(Ret))",
    )?);

    for rop in &rtr.operations {
        let base = format!("{}.{}", rtr.name, rop.name);
        let aop = abs.operation(&rop.name).ok_or_else(|| {
            PoError::Structure(format!("operation {} of {} has no counterpart in {}", rop.name, rtr.name, abs.name))
        })?;
        let within = rop.within();
        let concedes = rop.concedes();
        let lvars: Vec<String> = rop.ramification.as_ref().map(|r| r.lvars.clone()).unwrap_or_default();

        let trm_r = trm(&rop.body, &ops).map_err(calc(&base))?;
        let trm_a = trm(&aop.body, &none).map_err(calc(&base))?;
        let mut hyps = inc_invs.clone();
        hyps.extend([inv_r.clone(), ret.clone(), inv_a.clone(), trm_r.clone()]);
        hyps.extend(within.conjuncts().into_iter().cloned());

        let mut avoid = subst_all_names(&aop.body);
        avoid.extend(subst_all_names(&rop.body));
        avoid.extend(pred_all_names(&ret));
        avoid.extend(pred_all_names(&within));
        avoid.extend(pred_all_names(&concedes));
        let clashing: Vec<String> = rop.results.iter().filter(|r| aop.results.contains(r)).cloned().collect();
        let renamed = freshen(&clashing, &mut avoid);
        let s_r = rename_subst(&rop.body, &renamed.iter().cloned().collect());

        let post = Pred::or(ret.clone(), concedes);
        let inner = wp(&aop.body, &Pred::not(post), &none).map_err(calc(&base))?;
        let joint = wp(&s_r, &Pred::not(inner), &ops).map_err(calc(&base))?;
        let concl = Pred::and(trm_a.clone(), joint);

        let mut order = concrete.clone();
        order.extend(abs.variables.iter().cloned());
        order.extend(rop.params.iter().cloned());
        order.extend(aop.params.iter().cloned());
        order.extend(lvars.iter().cloned());
        let guard_r = rop.body.precondition();
        let guard_a = aop.body.precondition();
        let mut sources: Vec<&Pred> = inc_invs.iter().collect();
        sources.extend([&inv_r, &ret, &inv_a, &guard_r, &trm_r, &guard_a, &trm_a]);
        for l in &lvars {
            if infer_carrier(l, &[&within]).is_none() {
                return Err(PoError::Untyped { po: format!("{base}.joint"), name: l.clone() });
            }
        }
        sources.push(&within);
        out.push(obligation(
            format!("{base}.joint"),
            hyps,
            concl,
            &order,
            &sources,
            "retrenched operation is matched or concedes: trm(S_A) & [S_R]not([S_A]not(Ret or C))",
        )?);
    }
    Ok(out)
}

// ---- discharge ----------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Discharged,
    Refuted,
    IllDefined,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Discharged => "discharged",
            Status::Refuted => "refuted",
            Status::IllDefined => "ill-defined",
            Status::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    /// Present iff refuted or ill-defined.
    pub witness: Option<Env>,
    pub message: Option<String>,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct DischargeOptions {
    pub deadline: Option<Instant>,
    /// Discharge one obligation at a time, each on one thread.
    pub sequential: bool,
}

/// Names the obligation mentions that neither it nor the model binds.
fn unresolved(po: &ProofObligation, m: &FiniteModel) -> Option<String> {
    let mut names = pred_free_vars(&po.formula);
    for (_, c) in &po.free {
        names.extend(expr_free_vars(c));
    }
    names.into_iter().find(|n| !po.free.iter().any(|(f, _)| f == n) && !m.contains(n))
}

pub fn discharge_one(po: &ProofObligation, m: &FiniteModel, opts: &DischargeOptions) -> Result<CheckResult, PoError> {
    if let Some(name) = unresolved(po, m) {
        return Err(PoError::Unresolved { po: po.name.clone(), name });
    }
    let start = Instant::now();
    let sopts = SearchOptions { deadline: opts.deadline, sequential: opts.sequential };
    let outcome = search(&po.formula, m, &po.free, &sopts)
        .map_err(|error| PoError::Carrier { po: po.name.clone(), error })?;
    let (status, witness, message) = match outcome {
        SearchOutcome::Holds => (Status::Discharged, None, None),
        SearchOutcome::Refuted(env) => (Status::Refuted, Some(env), None),
        SearchOutcome::IllDefined(env, e) => (Status::IllDefined, Some(env), Some(e.to_string())),
        SearchOutcome::Timeout => (Status::Timeout, None, Some("deadline exceeded".into())),
    };
    Ok(CheckResult { name: po.name.clone(), status, witness, message, elapsed: start.elapsed() })
}

/// One result per obligation, in order.
pub fn discharge(pos: &[ProofObligation], m: &FiniteModel, opts: &DischargeOptions) -> Result<Vec<CheckResult>, PoError> {
    if opts.sequential {
        pos.iter().map(|p| discharge_one(p, m, opts)).collect()
    } else {
        pos.par_iter().map(|p| discharge_one(p, m, opts)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_pred;
    use crate::parser::parse_machine;
    use crate::value::Value;

    fn run(pos: &[ProofObligation]) -> Vec<CheckResult> {
        discharge(pos, &FiniteModel::new(), &DischargeOptions::default()).unwrap()
    }

    #[test]
    fn overflow_is_refuted_at_boundary() {
        let m = parse_machine(
            "MACHINE M VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS inc = v := v + 1 END",
        )
        .unwrap();
        let pos = consistency_pos(&m, &[]).unwrap();
        assert_eq!(pos.len(), 2);
        let res = run(&pos);
        assert_eq!(res[0].status, Status::Discharged);
        assert_eq!(res[1].status, Status::Refuted);
        let w = res[1].witness.clone().unwrap();
        assert_eq!(w, Env::from([("v".into(), Value::Int(3))]));
        assert!(!eval_pred(&pos[1].formula, &FiniteModel::new(), &w).unwrap());
    }

    #[test]
    fn empty_operations_give_only_init() {
        let m = parse_machine("MACHINE M VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 END").unwrap();
        let pos = consistency_pos(&m, &[]).unwrap();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].name, "M.INITIALISATION.consistency");
    }

    #[test]
    fn choice_sets_get_wd_obligations() {
        let m = parse_machine(
            "MACHINE M VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS
               pick(n) = PRE n : 0..3 THEN v :: (n + 1)..3 END
             END",
        )
        .unwrap();
        let pos = consistency_pos(&m, &[]).unwrap();
        let names: Vec<_> = pos.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["M.INITIALISATION.consistency", "M.pick.consistency", "M.pick.wd1"]);
        let res = run(&pos);
        assert_eq!(res[1].status, Status::Discharged);
        assert_eq!(res[2].status, Status::Refuted);
        assert_eq!(res[2].witness.as_ref().unwrap()["n"], Value::Int(3));
    }

    #[test]
    fn stronger_refined_precondition_fails_applicability() {
        let a = parse_machine(
            "MACHINE A VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS
               set(n) = PRE n : 0..3 THEN v := n END END",
        )
        .unwrap();
        let r = parse_machine(
            "REFINEMENT R REFINES A VARIABLES w INVARIANT w : 0..3 & w = v INITIALISATION w := 0 OPERATIONS
               set(n) = PRE n : 0..2 THEN w := n END END",
        )
        .unwrap();
        let pos = refinement_pos(&a, &r, &[]).unwrap();
        let res = run(&pos);
        let by_name = |n: &str| res.iter().find(|r| r.name == n).unwrap();
        assert_eq!(by_name("R.INITIALISATION.behaviour").status, Status::Discharged);
        assert_eq!(by_name("R.set.applicability").status, Status::Refuted);
        assert_eq!(by_name("R.set.behaviour").status, Status::Refuted);
    }

    #[test]
    fn renamed_operation_is_a_signature_error() {
        let a = parse_machine("MACHINE A VARIABLES v INVARIANT v : 0..1 INITIALISATION v := 0 OPERATIONS op = skip END").unwrap();
        let r = parse_machine("REFINEMENT R REFINES A OPERATIONS op2 = skip END").unwrap();
        let err = refinement_pos(&a, &r, &[]).unwrap_err();
        assert!(matches!(&err, PoError::Structure(m) if m.contains("op")), "{err}");
    }

    #[test]
    fn degenerate_retrenchment_discharges() {
        let a = parse_machine(
            "MACHINE A VARIABLES v INVARIANT v : 0..3 INITIALISATION v := 0 OPERATIONS
               inc = PRE v < 3 THEN v := v + 1 END END",
        )
        .unwrap();
        let r = parse_machine(
            "RETRENCHMENT R RETRENCHES A VARIABLES w INVARIANT w : 0..3 RETRIEVES v = w INITIALISATION w := 0 OPERATIONS
               inc = BEGIN PRE w < 3 THEN w := w + 1 END CONCEDES bfalse END END",
        )
        .unwrap();
        let pos = retrenchment_pos(&a, &r, &[]).unwrap();
        assert!(run(&pos).iter().all(|c| c.status == Status::Discharged));
    }

    #[test]
    fn unresolved_names_are_errors() {
        let m = parse_machine("MACHINE M VARIABLES v INVARIANT v : T INITIALISATION v := 0 END").unwrap();
        let pos = consistency_pos(&m, &[]).unwrap();
        let err = discharge(&pos, &FiniteModel::new(), &DischargeOptions::default()).unwrap_err();
        assert!(matches!(err, PoError::Unresolved { ref name, .. } if name == "T"));
        assert!(discharge(&[], &FiniteModel::new(), &DischargeOptions::default()).unwrap().is_empty());
    }
}
