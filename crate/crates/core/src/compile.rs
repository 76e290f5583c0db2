//! Compiles an operation into the single-variable schematic form: a
//! precondition relation between states and parameters, and the state
//! transition and output relations from (state, parameter) pairs.
//!
//! Several state variables, parameters or results are packed, in declaration
//! order, into left-nested pairs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::ast::OperationDef;
use crate::calculus::{successors, trm, CalcError, Operations};
use crate::eval::{eval_pred, Env, FiniteModel};
use crate::search::render_env;
use crate::value::{Value, ValueSet};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchematicOp {
    /// `(state, param)` pairs where the operation terminates.
    pub pre: ValueSet,
    /// `((state, param), state')`
    pub stf: ValueSet,
    /// `((state, param), result)`
    pub ouf: ValueSet,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("no carrier given for {0}")]
    NoCarrier(String),
    #[error("operation {op} at {}: {error}", render_env(.env))]
    Eval { op: String, env: Env, error: CalcError },
}

/// Every assignment of values from `carriers` to `names`, in lexicographic order.
pub fn valuations(names: &[String], carriers: &BTreeMap<String, ValueSet>) -> Result<Vec<Env>, CompileError> {
    let mut out = vec![Env::new()];
    for n in names {
        let set = carriers.get(n).ok_or_else(|| CompileError::NoCarrier(n.clone()))?;
        out = out
            .into_iter()
            .flat_map(|env| {
                set.iter().map(move |v| {
                    let mut e = env.clone();
                    e.insert(n.clone(), v.clone());
                    e
                })
            })
            .collect();
    }
    Ok(out)
}

/// The packed value of `names` in `env`.
pub fn pack(names: &[String], env: &Env) -> Value {
    Value::tuple(names.iter().map(|n| env[n].clone()))
}

/// With no parameters the parameter ranges over all of `ty`. With no
/// results the output is the post-state, so `ouf` coincides with `stf`.
pub fn compile_operation(
    op: &OperationDef,
    m: &FiniteModel,
    state_vars: &[String],
    carriers: &BTreeMap<String, ValueSet>,
    ty: &ValueSet,
    ops: &Operations,
) -> Result<SchematicOp, CompileError> {
    let fail = |env: &Env, error: CalcError| CompileError::Eval { op: op.name.clone(), env: env.clone(), error };
    let guard = trm(&op.body, ops).map_err(|e| fail(&Env::new(), e))?;
    let states = valuations(state_vars, carriers)?;
    let params: Vec<(Env, Value)> = if op.params.is_empty() {
        ty.iter().map(|p| (Env::new(), p.clone())).collect()
    } else {
        valuations(&op.params, carriers)?.into_iter().map(|e| { let p = pack(&op.params, &e); (e, p) }).collect()
    };

    let parts = states
        .par_iter()
        .map(|st| {
            let mut part = SchematicOp::default();
            let sigma = pack(state_vars, st);
            for (pe, p) in &params {
                let mut env = st.clone();
                env.extend(pe.iter().map(|(k, v)| (k.clone(), v.clone())));
                if !eval_pred(&guard, m, &env).map_err(|e| fail(&env, e.into()))? {
                    continue;
                }
                let key = Value::pair(sigma.clone(), p.clone());
                part.pre.insert(key.clone());
                let out = successors(&op.body, m, &env, ops).map_err(|e| fail(&env, e))?;
                for post in &out.successors {
                    part.stf.insert(Value::pair(key.clone(), pack(state_vars, post)));
                    if op.results.is_empty() {
                        part.ouf.insert(Value::pair(key.clone(), pack(state_vars, post)));
                    } else {
                        part.ouf.insert(Value::pair(key.clone(), pack(&op.results, post)));
                    }
                }
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>, CompileError>>()?;

    let mut out = SchematicOp::default();
    for p in parts {
        out.pre.extend(p.pre);
        out.stf.extend(p.stf);
        out.ouf.extend(p.ouf);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_machine;

    fn ints(r: std::ops::RangeInclusive<i64>) -> ValueSet {
        r.map(Value::Int).collect()
    }

    fn setup() -> (crate::ast::MachineDef, FiniteModel, BTreeMap<String, ValueSet>) {
        let m = parse_machine(
            "MACHINE M VARIABLES v INVARIANT v : T INITIALISATION v := 0 OPERATIONS
               inc(n) = PRE n : T & v + n : T THEN v := v + n END;
               r <-- get = r := v;
               stuck = v :: {};
               bump = v := v
             END",
        )
        .unwrap();
        let model = FiniteModel::new().with_set("T", ints(0..=3));
        let carriers = BTreeMap::from([("v".to_string(), ints(0..=3)), ("n".to_string(), ints(0..=3))]);
        (m, model, carriers)
    }

    fn pair(a: i64, b: i64) -> Value {
        Value::pair(Value::Int(a), Value::Int(b))
    }

    #[test]
    fn precondition_is_the_termination_set() {
        let (m, model, carriers) = setup();
        let ty = ints(0..=3);
        let c = compile_operation(m.operation("inc").unwrap(), &model, &["v".into()], &carriers, &ty, &Operations::new())
            .unwrap();
        let expected: ValueSet = (0..=3).flat_map(|v| (0..=3 - v).map(move |n| pair(v, n))).collect();
        assert_eq!(c.pre, expected);
        assert!(c.stf.iter().all(|t| {
            let (k, post) = t.as_pair().unwrap();
            let (v, n) = k.as_pair().unwrap();
            post.as_int() == Some(v.as_int().unwrap() + n.as_int().unwrap())
        }));
        assert_eq!(c.stf.len(), expected.len());
    }

    #[test]
    fn result_only_operation_is_identity() {
        let (m, model, carriers) = setup();
        let ty = ints(0..=3);
        let c = compile_operation(m.operation("get").unwrap(), &model, &["v".into()], &carriers, &ty, &Operations::new())
            .unwrap();
        assert_eq!(c.pre.len(), 16);
        for t in c.stf.iter().chain(&c.ouf) {
            let (k, post) = t.as_pair().unwrap();
            assert_eq!(k.as_pair().unwrap().0, post);
        }
        assert_eq!(c.ouf.len(), 16);
    }

    #[test]
    fn empty_choice_never_terminates() {
        let (m, model, carriers) = setup();
        let c = compile_operation(m.operation("stuck").unwrap(), &model, &["v".into()], &carriers, &ints(0..=3), &Operations::new())
            .unwrap();
        assert!(c.pre.is_empty() && c.stf.is_empty() && c.ouf.is_empty());
    }

    #[test]
    fn no_result_outputs_the_post_state() {
        let (m, model, carriers) = setup();
        let c = compile_operation(m.operation("bump").unwrap(), &model, &["v".into()], &carriers, &ints(0..=1), &Operations::new())
            .unwrap();
        // (v, p) for v in 0..3, p in 0..1
        assert_eq!(c.pre.len(), 8);
        assert_eq!(c.ouf, c.stf);
    }

    #[test]
    fn ill_defined_step_names_the_valuation() {
        let m = parse_machine("MACHINE M VARIABLES v INVARIANT v : T INITIALISATION v := 0 OPERATIONS halve = v := 4 / v END")
            .unwrap();
        let model = FiniteModel::new().with_set("T", ints(0..=3));
        let carriers = BTreeMap::from([("v".to_string(), ints(0..=3))]);
        let err = compile_operation(m.operation("halve").unwrap(), &model, &["v".into()], &carriers, &ints(0..=0), &Operations::new())
            .unwrap_err();
        assert!(matches!(&err, CompileError::Eval { env, .. } if env["v"] == Value::Int(0)), "{err}");
    }
}
