//! Randomised check that the signature-change pattern is sound: on every
//! finite instance whose contexts and conversion satisfy their properties,
//! the synthesized adapter refines the generic abstract component.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::po::{discharge, refinement_pos, DischargeOptions, PoError, Status};
use crate::pattern::{api_adapter, context_pos, interface_pos, pattern_model, Conversion, ConversionNames, SchematicContext};
use crate::value::{Value, ValueSet};

/// Concrete carrier values are offset so they never coincide with abstract ones.
const CONCRETE_OFFSET: i64 = 100;

#[derive(Clone, Debug)]
pub struct Instance {
    pub a: SchematicContext,
    pub c: SchematicContext,
    pub conv: Conversion,
}

fn pair(a: &Value, b: &Value) -> Value {
    Value::pair(a.clone(), b.clone())
}

fn random_subset(rng: &mut impl Rng, from: &ValueSet, density: f64) -> ValueSet {
    from.iter().filter(|_| rng.gen_bool(density)).cloned().collect()
}

fn pick(rng: &mut impl Rng, from: &ValueSet) -> Value {
    from.iter().nth(rng.gen_range(0..from.len())).expect("non-empty").clone()
}

fn keys_in(ctx: &SchematicContext) -> ValueSet {
    ctx.pre.iter().filter(|k| ctx.inv.contains(k.as_pair().unwrap().0)).cloned().collect()
}

fn has_image(rel: &ValueSet, key: &Value) -> bool {
    crate::value::relation_image_of(rel, key).next().is_some()
}

/// Samples every component at random, then repairs it into a valid context:
/// `inv` non-empty, `init` within `inv`, and from valid states within `pre`
/// at least one successor, all of them valid, and at least one output.
pub fn random_context(rng: &mut impl Rng, suffix: &str, ty: ValueSet) -> SchematicContext {
    let sq: ValueSet = ty.iter().flat_map(|v| ty.iter().map(move |p| pair(v, p))).collect();
    let cube: ValueSet = sq.iter().flat_map(|k| ty.iter().map(move |t| pair(k, t))).collect();
    let mut ctx = SchematicContext::new(suffix);
    ctx.inv = random_subset(rng, &ty, 0.6);
    if ctx.inv.is_empty() {
        ctx.inv.insert(pick(rng, &ty));
    }
    ctx.init = random_subset(rng, &ty, 0.5).intersection(&ctx.inv).cloned().collect();
    ctx.pre = random_subset(rng, &sq, 0.5);
    ctx.stf = random_subset(rng, &cube, 0.3);
    ctx.ouf = random_subset(rng, &cube, 0.3);
    ctx.ty = ty;
    for key in keys_in(&ctx) {
        let inv = &ctx.inv;
        ctx.stf.retain(|t| t.as_pair().unwrap().0 != &key || inv.contains(t.as_pair().unwrap().1));
        if !has_image(&ctx.stf, &key) {
            ctx.stf.insert(pair(&key, &pick(rng, &ctx.inv)));
        }
        if !has_image(&ctx.ouf, &key) {
            ctx.ouf.insert(pair(&key, &pick(rng, &ctx.ty)));
        }
    }
    ctx
}

fn map_value(f: &std::collections::BTreeMap<Value, Value>, v: &Value) -> Value {
    f[v].clone()
}

/// An abstract context of size 1..=`max_size`, a random bijection onto a
/// disjoint concrete carrier, and the concrete context obtained by transport
/// and then perturbed where the interface properties leave freedom: fewer
/// initial states, and extra precondition pairs with arbitrary valid
/// behaviour.
pub fn random_instance(rng: &mut impl Rng, max_size: usize) -> Instance {
    let n = rng.gen_range(1..=max_size) as i64;
    let ty_a: ValueSet = (0..n).map(Value::Int).collect();
    let a = random_context(rng, "A", ty_a);

    let mut images: Vec<i64> = (CONCRETE_OFFSET..CONCRETE_OFFSET + n).collect();
    images.shuffle(rng);
    let cofa: std::collections::BTreeMap<Value, Value> =
        (0..n).map(|i| (Value::Int(i), Value::Int(images[i as usize]))).collect();
    let conv = Conversion {
        cofa: cofa.iter().map(|(x, y)| pair(x, y)).collect(),
        aofc: cofa.iter().map(|(x, y)| pair(y, x)).collect(),
    };
    let f = |v: &Value| map_value(&cofa, v);
    let fk = |k: &Value| {
        let (v, p) = k.as_pair().unwrap();
        pair(&f(v), &f(p))
    };
    let transport = |rel: &ValueSet| -> ValueSet {
        rel.iter()
            .map(|t| {
                let (k, out) = t.as_pair().unwrap();
                pair(&fk(k), &f(out))
            })
            .collect()
    };

    let mut c = SchematicContext::new("C");
    c.ty = a.ty.iter().map(f).collect();
    c.inv = a.inv.iter().map(f).collect();
    c.init = a.init.iter().map(f).collect();
    c.pre = a.pre.iter().map(fk).collect();
    c.stf = transport(&a.stf);
    c.ouf = transport(&a.ouf);

    if c.init.len() > 1 && rng.gen_bool(0.5) {
        let drop = pick(rng, &c.init);
        c.init.remove(&drop);
    }
    // keys outside dom(stf_A) and dom(ouf_A) are unconstrained by the interface
    let stf_dom: ValueSet = a.stf.iter().map(|t| fk(t.as_pair().unwrap().0)).collect();
    let ouf_dom: ValueSet = a.ouf.iter().map(|t| fk(t.as_pair().unwrap().0)).collect();
    let candidates: Vec<Value> = c
        .ty
        .iter()
        .flat_map(|v| c.ty.iter().map(move |p| pair(v, p)))
        .filter(|k| !c.pre.contains(k) && !stf_dom.contains(k) && !ouf_dom.contains(k))
        .collect();
    for k in candidates {
        if !rng.gen_bool(0.3) {
            continue;
        }
        c.pre.insert(k.clone());
        if c.inv.contains(k.as_pair().unwrap().0) {
            c.stf.insert(pair(&k, &pick(rng, &c.inv)));
            c.ouf.insert(pair(&k, &pick(rng, &c.ty)));
        }
    }
    Instance { a, c, conv }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InstanceOutcome {
    /// Every context and interface property discharged.
    pub premises_hold: bool,
    /// Assertions that failed although the properties held.
    pub failed_assertions: Vec<String>,
    /// Adapter refinement POs that failed although the premises held.
    pub failed_refinement: Vec<String>,
}

pub fn check_instance(inst: &Instance) -> Result<InstanceOutcome, PoError> {
    let names = ConversionNames::default();
    let m = pattern_model(&inst.a, &inst.c, &inst.conv, &names);
    let opts = DischargeOptions { sequential: true, ..Default::default() };
    let failed = |pos: &[crate::po::ProofObligation]| -> Result<Vec<String>, PoError> {
        Ok(discharge(pos, &m, &opts)?.into_iter().filter(|r| r.status != Status::Discharged).map(|r| r.name).collect())
    };
    let iface = interface_pos(&inst.a, &inst.c, &names);
    let (props, asserts): (Vec<_>, Vec<_>) = iface.into_iter().partition(|p| p.name.starts_with("iface.P"));
    let mut premises = context_pos(&inst.a);
    premises.extend(context_pos(&inst.c));
    premises.extend(props);
    let mut out = InstanceOutcome { premises_hold: failed(&premises)?.is_empty(), ..Default::default() };
    if !out.premises_hold {
        return Ok(out);
    }
    out.failed_assertions = failed(&asserts)?;
    let (abs, conc, adapter) = api_adapter("A", "C", &names);
    let pos = refinement_pos(&abs, &adapter, std::slice::from_ref(&conc))?;
    out.failed_refinement = failed(&pos)?;
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    pub instances: usize,
    /// Instances whose premises all discharged.
    pub premises_held: usize,
    /// Instances (by index) where the adapter failed to refine.
    pub violations: Vec<(usize, Vec<String>)>,
    /// Instances (by index) where an assertion failed despite the properties.
    pub assertion_exceptions: Vec<(usize, Vec<String>)>,
}

/// `count` instances from a ChaCha stream seeded with `seed`, checked in parallel.
pub fn soundness_check(seed: u64, count: usize, max_size: usize) -> Result<SoundnessReport, PoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<Instance> = (0..count).map(|_| random_instance(&mut rng, max_size)).collect();
    let outcomes = instances.par_iter().map(check_instance).collect::<Result<Vec<_>, _>>()?;
    let mut report = SoundnessReport { instances: count, ..Default::default() };
    for (i, o) in outcomes.into_iter().enumerate() {
        if o.premises_hold {
            report.premises_held += 1;
        }
        if !o.failed_refinement.is_empty() {
            report.violations.push((i, o.failed_refinement));
        }
        if !o.failed_assertions.is_empty() {
            report.assertion_exceptions.push((i, o.failed_assertions));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_satisfy_their_premises() {
        let report = soundness_check(7, 20, 4).unwrap();
        assert_eq!(report.premises_held, 20);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(report.assertion_exceptions.is_empty());
    }

    #[test]
    fn same_seed_same_instances() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random_instance(&mut r1, 6), random_instance(&mut r2, 6));
        assert_eq!((a.a, a.c, a.conv), (b.a, b.c, b.conv));
    }

    #[test]
    fn broken_premises_are_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut inst = random_instance(&mut rng, 3);
        let first = inst.conv.cofa.iter().next().unwrap().clone();
        inst.conv.cofa.remove(&first);
        assert!(!check_instance(&inst).unwrap().premises_hold);
    }
}
