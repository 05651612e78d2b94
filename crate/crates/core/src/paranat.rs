//! Paranatural transformations: checking (in two formulations), composing,
//! enumerating, and converting to Struct functors.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::difun::{struct_category, Difunctor, StructCategory};
use crate::engine::{enumerate_families, BinaryConstraint, Budget, BudgetExceeded, FamilyProblem};
use crate::fincat::{FinFunctor, InputError, ObjId};
use crate::value::Value;

/// A family of diagonal component maps between two difunctors on a shared
/// base. Whether the family is paranatural is decided by
/// [`check_paranatural`]; the type itself only fixes shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Paranatural {
    pub source: Arc<Difunctor>,
    pub target: Arc<Difunctor>,
    /// Per base object, the component table diag(source) -> diag(target)
    /// as element indices.
    pub components: Vec<Vec<usize>>,
}

impl Paranatural {
    pub fn identity(d: &Arc<Difunctor>) -> Paranatural {
        Paranatural {
            source: d.clone(),
            target: d.clone(),
            components: d.base.objects().map(|i| (0..d.diag(i).len()).collect()).collect(),
        }
    }

    /// Builds a family from value-level component maps, checking that each
    /// component is a total function into the stated diagonal.
    pub fn from_value_maps(
        source: Arc<Difunctor>,
        target: Arc<Difunctor>,
        maps: &BTreeMap<String, BTreeMap<String, String>>,
    ) -> Result<Paranatural, InputError> {
        let base = &source.base;
        let mut components = Vec::new();
        for i in base.objects() {
            let label = base.object_label(i);
            let src = source.diag(i);
            let tgt = target.diag(i);
            let table = maps.get(label);
            let mut comp = Vec::with_capacity(src.len());
            for x in &src.elems {
                let key = x.to_string();
                let img = table
                    .and_then(|t| t.get(&key))
                    .ok_or_else(|| InputError::Other(format!("component at {label} missing {key}")))?;
                let img_val = crate::value::parse_value(img)
                    .map_err(InputError::Other)
                    .and_then(|v| {
                        tgt.position(&v).ok_or_else(|| {
                            InputError::Other(format!(
                                "component at {label} sends {key} to {img} outside the target diagonal"
                            ))
                        })
                    })?;
                comp.push(img_val);
            }
            components.push(comp);
        }
        Ok(Paranatural { source, target, components })
    }

    pub fn component(&self, i: ObjId) -> &[usize] {
        &self.components[i.0]
    }

    /// Applies the component at `i` to a diagonal element value.
    pub fn apply(&self, i: ObjId, v: &Value) -> &Value {
        let idx = self.source.diag(i).position(v).expect("element of source diagonal");
        &self.target.diag(i).elems[self.components[i.0][idx]]
    }

    /// Canonical serialization of the component family, object by object.
    pub fn canonical_value(&self) -> Value {
        Value::table(
            self.source
                .base
                .objects()
                .map(|i| {
                    let entries = self
                        .source
                        .diag(i)
                        .elems
                        .iter()
                        .enumerate()
                        .map(|(k, x)| {
                            (x.clone(), self.target.diag(i).elems[self.components[i.0][k]].clone())
                        })
                        .collect();
                    (Value::atom(self.source.base.object_label(i)), Value::table(entries))
                })
                .collect(),
        )
    }
}

/// The two implemented formulations of the paranaturality check: an
/// elementwise scan over spans with unit vertex, and an explicit pullback
/// construction whose two composites are compared as tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Elementwise,
    Pullback,
}

/// A failed chevron: the witness satisfies the domain condition
/// `pos(i2)(d0) = neg(i2)(d1)` in the source but breaks the target equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChevronWitness {
    pub i2: String,
    pub d0: Value,
    pub d1: Value,
    pub lhs: Value,
    pub rhs: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChevronVerdict {
    Ok,
    Violation(ChevronWitness),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChevronReport {
    pub verdict: ChevronVerdict,
    /// Number of chevron instances whose domain condition held.
    pub checked: usize,
}

impl ChevronReport {
    pub fn ok(&self) -> bool {
        matches!(self.verdict, ChevronVerdict::Ok)
    }
}

/// Checks every chevron of `phi`. Both formulations return identical
/// verdicts and witnesses; the first violation in deterministic scan order
/// (morphisms, then d0, then d1, all in canonical order) is reported.
pub fn check_paranatural(phi: &Paranatural, formulation: Formulation) -> ChevronReport {
    let src = &phi.source;
    let tgt = &phi.target;
    let base = &src.base;
    let mut checked = 0usize;
    for i2 in base.morphisms() {
        if base.is_identity(i2) {
            continue; // identity chevrons are trivially commutative
        }
        let (i0, i1) = (base.mor(i2).dom, base.mor(i2).cod);
        let spos = src.pos(i0, i2);
        let sneg = src.neg(i2, i1);
        let tpos = tgt.pos(i0, i2);
        let tneg = tgt.neg(i2, i1);
        let comp0 = phi.component(i0);
        let comp1 = phi.component(i1);
        match formulation {
            Formulation::Elementwise => {
                for d0 in 0..src.diag(i0).len() {
                    for d1 in 0..src.diag(i1).len() {
                        if spos[d0] != sneg[d1] {
                            continue;
                        }
                        checked += 1;
                        if tpos[comp0[d0]] != tneg[comp1[d1]] {
                            return ChevronReport {
                                verdict: ChevronVerdict::Violation(witness(
                                    phi, i2, i0, i1, d0, d1,
                                )),
                                checked,
                            };
                        }
                    }
                }
            }
            Formulation::Pullback => {
                // Explicit pullback of pos(i2), neg(i2) in sets, then the two
                // composites through the components compared as tables.
                let mut pullback = Vec::new();
                for d0 in 0..src.diag(i0).len() {
                    for d1 in 0..src.diag(i1).len() {
                        if spos[d0] == sneg[d1] {
                            pullback.push((d0, d1));
                        }
                    }
                }
                let via_pos: Vec<usize> = pullback.iter().map(|&(d0, _)| tpos[comp0[d0]]).collect();
                let via_neg: Vec<usize> = pullback.iter().map(|&(_, d1)| tneg[comp1[d1]]).collect();
                checked += pullback.len();
                if let Some(k) = (0..pullback.len()).find(|&k| via_pos[k] != via_neg[k]) {
                    let (d0, d1) = pullback[k];
                    return ChevronReport {
                        verdict: ChevronVerdict::Violation(witness(phi, i2, i0, i1, d0, d1)),
                        checked,
                    };
                }
            }
        }
    }
    ChevronReport { verdict: ChevronVerdict::Ok, checked }
}

fn witness(
    phi: &Paranatural,
    i2: crate::fincat::MorId,
    i0: ObjId,
    i1: ObjId,
    d0: usize,
    d1: usize,
) -> ChevronWitness {
    let src = &phi.source;
    let tgt = &phi.target;
    let base = &src.base;
    let lhs_idx = tgt.pos(i0, i2)[phi.component(i0)[d0]];
    let rhs_idx = tgt.neg(i2, i1)[phi.component(i1)[d1]];
    ChevronWitness {
        i2: base.mor_label(i2).to_string(),
        d0: src.diag(i0).elems[d0].clone(),
        d1: src.diag(i1).elems[d1].clone(),
        lhs: tgt.cell(i0, i1).elems[lhs_idx].clone(),
        rhs: tgt.cell(i0, i1).elems[rhs_idx].clone(),
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ComposeError {
    #[error("base categories differ")]
    BaseMismatch,
    #[error("inner difunctors differ: target of the first is not the source of the second")]
    MiddleMismatch,
}

/// Pointwise composition of component families.
pub fn compose_paranatural(psi: &Paranatural, phi: &Paranatural) -> Result<Paranatural, ComposeError> {
    if phi.source.base != psi.source.base {
        return Err(ComposeError::BaseMismatch);
    }
    if phi.target.as_ref() != psi.source.as_ref() {
        return Err(ComposeError::MiddleMismatch);
    }
    let components = phi
        .components
        .iter()
        .zip(&psi.components)
        .map(|(f, g)| f.iter().map(|&x| g[x]).collect())
        .collect();
    Ok(Paranatural { source: phi.source.clone(), target: psi.target.clone(), components })
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub transformations: Vec<Paranatural>,
    pub truncated: bool,
}

/// Enumerates all paranatural transformations source -> target by
/// backtracking over component choices with chevron constraints pruned after
/// each assignment. Output order is lexicographic in canonical labels.
pub fn enumerate_paranaturals(
    source: &Arc<Difunctor>,
    target: &Arc<Difunctor>,
    limit: usize,
    budget: &Budget,
) -> Result<Enumeration, BudgetExceeded> {
    let base = &source.base;
    let mut var_of = Vec::new(); // (object, diag index) per variable
    let mut var_index = vec![Vec::new(); base.object_count()];
    for i in base.objects() {
        for d in 0..source.diag(i).len() {
            var_index[i.0].push(var_of.len());
            var_of.push((i, d));
        }
    }
    let mut problem = FamilyProblem {
        domain_sizes: var_of.iter().map(|&(i, _)| target.diag(i).len()).collect(),
        constraints: Vec::new(),
    };
    for i2 in base.morphisms() {
        if base.is_identity(i2) {
            continue;
        }
        let (i0, i1) = (base.mor(i2).dom, base.mor(i2).cod);
        let spos = source.pos(i0, i2);
        let sneg = source.neg(i2, i1);
        for d0 in 0..source.diag(i0).len() {
            for d1 in 0..source.diag(i1).len() {
                if spos[d0] != sneg[d1] {
                    continue;
                }
                problem.constraints.push(BinaryConstraint {
                    v0: var_index[i0.0][d0],
                    v1: var_index[i1.0][d1],
                    table0: target.pos(i0, i2).to_vec(),
                    table1: target.neg(i2, i1).to_vec(),
                });
            }
        }
    }
    let out = enumerate_families(&problem, limit, budget)?;
    let transformations = out
        .families
        .into_iter()
        .map(|assignment| {
            let mut components: Vec<Vec<usize>> =
                base.objects().map(|i| vec![0; source.diag(i).len()]).collect();
            for (v, &(i, d)) in var_of.iter().enumerate() {
                components[i.0][d] = assignment[v];
            }
            Paranatural { source: source.clone(), target: target.clone(), components }
        })
        .collect();
    Ok(Enumeration { transformations, truncated: out.truncated })
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("family is not paranatural: the Struct morphism {morphism} would be dropped (images {lhs} vs {rhs})")]
pub struct DroppedMorphism {
    pub morphism: String,
    pub lhs: Value,
    pub rhs: Value,
}

/// Converts a checker-passing family into the corresponding functor between
/// Struct categories: identity on underlying objects and morphisms,
/// structures transformed by the components. A non-paranatural family is
/// rejected with the Struct morphism its image would drop.
pub fn as_struct_functor(phi: &Paranatural) -> Result<FinFunctor, DroppedMorphism> {
    let sc_src = struct_category(&phi.source);
    let sc_tgt = struct_category(&phi.target);
    as_struct_functor_with(phi, &sc_src, &sc_tgt)
}

/// Same as [`as_struct_functor`] but against prebuilt Struct categories.
pub fn as_struct_functor_with(
    phi: &Paranatural,
    sc_src: &StructCategory,
    sc_tgt: &StructCategory,
) -> Result<FinFunctor, DroppedMorphism> {
    let obj_map: Vec<ObjId> = sc_src
        .objects
        .iter()
        .map(|o| {
            let img = phi.components[o.base_obj.0][o.elem_idx];
            ObjId(
                sc_tgt
                    .objects
                    .iter()
                    .position(|t| t.base_obj == o.base_obj && t.elem_idx == img)
                    .expect("image structure exists"),
            )
        })
        .collect();
    let mut mor_map = Vec::with_capacity(sc_src.morphisms.len());
    for m in &sc_src.morphisms {
        let src_img = obj_map[m.src];
        let tgt_img = obj_map[m.tgt];
        let found = sc_tgt
            .morphisms
            .iter()
            .position(|t| t.base_mor == m.base_mor && t.src == src_img.0 && t.tgt == tgt_img.0);
        match found {
            Some(k) => mor_map.push(crate::fincat::MorId(k)),
            None => {
                let base = &phi.source.base;
                let g = &sc_src.objects[m.src];
                let h = &sc_src.objects[m.tgt];
                let gi = phi.components[g.base_obj.0][g.elem_idx];
                let hi = phi.components[h.base_obj.0][h.elem_idx];
                let (i, j) = (base.mor(m.base_mor).dom, base.mor(m.base_mor).cod);
                let lhs = phi.target.cell(i, j).elems[phi.target.pos(i, m.base_mor)[gi]].clone();
                let rhs = phi.target.cell(i, j).elems[phi.target.neg(m.base_mor, j)[hi]].clone();
                return Err(DroppedMorphism {
                    morphism: format!(
                        "{}:{}=>{}",
                        base.mor_label(m.base_mor),
                        sc_src.cat.object_label(ObjId(m.src)),
                        sc_src.cat.object_label(ObjId(m.tgt)),
                    ),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(FinFunctor {
        source: (*sc_src.cat).clone(),
        target: (*sc_tgt.cat).clone(),
        obj_map,
        mor_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difun::{eval_difunctor_expr, hom_difunctor, DifunctorExpr, PresheafData};
    use crate::fincat::{build_fixture, validate_functor, Fixture};

    fn arrow_base() -> Arc<crate::fincat::FinCategory> {
        Arc::new(build_fixture(&Fixture::Arrow).unwrap())
    }

    fn wi_base() -> Arc<crate::fincat::FinCategory> {
        Arc::new(build_fixture(&Fixture::WalkingIdempotent).unwrap())
    }

    /// P(0) = {x,y}, P(1) = {z}, P(u): z -> x.
    fn counterexample_presheaf() -> PresheafData {
        PresheafData {
            values: [
                ("0".to_string(), vec!["x".to_string(), "y".to_string()]),
                ("1".to_string(), vec!["z".to_string()]),
            ]
            .into_iter()
            .collect(),
            actions: [(
                "u".to_string(),
                [("z".to_string(), "x".to_string())].into_iter().collect(),
            )]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn identity_on_hom_is_paranatural() {
        let base = arrow_base();
        let h = Arc::new(hom_difunctor(base));
        let id = Paranatural::identity(&h);
        assert!(check_paranatural(&id, Formulation::Elementwise).ok());
        assert!(check_paranatural(&id, Formulation::Pullback).ok());
    }

    #[test]
    fn presheaf_counterexample_witness() {
        let base = arrow_base();
        let p = Arc::new(
            eval_difunctor_expr(&DifunctorExpr::FromPresheaf(counterexample_presheaf()), base).unwrap(),
        );
        // phi_1 = id, phi_0 swaps x and y.
        let maps: BTreeMap<String, BTreeMap<String, String>> = [
            (
                "0".to_string(),
                [("x".to_string(), "y".to_string()), ("y".to_string(), "x".to_string())]
                    .into_iter()
                    .collect(),
            ),
            ("1".to_string(), [("z".to_string(), "z".to_string())].into_iter().collect()),
        ]
        .into_iter()
        .collect();
        let phi = Paranatural::from_value_maps(p.clone(), p.clone(), &maps).unwrap();
        for form in [Formulation::Elementwise, Formulation::Pullback] {
            let report = check_paranatural(&phi, form);
            match &report.verdict {
                ChevronVerdict::Violation(w) => {
                    assert_eq!(w.i2, "u");
                    assert_eq!(w.d0, Value::atom("x"));
                    assert_eq!(w.d1, Value::atom("z"));
                    assert_eq!(w.lhs, Value::atom("y"));
                    assert_eq!(w.rhs, Value::atom("x"));
                }
                ChevronVerdict::Ok => panic!("expected a violation"),
            }
        }
    }

    #[test]
    fn constant_e_family_on_walking_idempotent() {
        let base = wi_base();
        let h = Arc::new(hom_difunctor(base));
        // phi sends both 1 and e to e.
        let e_idx = h.diag(ObjId(0)).position(&Value::mor("e")).unwrap();
        let phi = Paranatural {
            source: h.clone(),
            target: h.clone(),
            components: vec![vec![e_idx, e_idx]],
        };
        assert!(check_paranatural(&phi, Formulation::Elementwise).ok());
        assert!(check_paranatural(&phi, Formulation::Pullback).ok());
    }

    #[test]
    fn enumerate_const_over_terminal() {
        let base = Arc::new(build_fixture(&Fixture::Terminal).unwrap());
        let c = Arc::new(eval_difunctor_expr(
            &DifunctorExpr::Const(vec!["a".into(), "b".into()]),
            base,
        )
        .unwrap());
        let out = enumerate_paranaturals(&c, &c, 100, &Budget::default()).unwrap();
        assert_eq!(out.transformations.len(), 4);
        assert!(!out.truncated);
    }

    #[test]
    fn enumerate_hom_on_walking_idempotent_gives_all_functions() {
        // The absorbing element makes every nonidentity chevron vacuous, so
        // all 4 functions {1,e} -> {1,e} pass.
        let base = wi_base();
        let h = Arc::new(hom_difunctor(base));
        let out = enumerate_paranaturals(&h, &h, 100, &Budget::default()).unwrap();
        assert_eq!(out.transformations.len(), 4);
        for phi in &out.transformations {
            assert!(check_paranatural(phi, Formulation::Elementwise).ok());
        }
        // Closure under composition, re-checked.
        for a in &out.transformations {
            for b in &out.transformations {
                let ab = compose_paranatural(a, b).unwrap();
                assert!(check_paranatural(&ab, Formulation::Elementwise).ok());
            }
        }
    }

    #[test]
    fn enumeration_matches_classical_naturality_for_presheaves() {
        let base = arrow_base();
        let p = Arc::new(
            eval_difunctor_expr(&DifunctorExpr::FromPresheaf(counterexample_presheaf()), base.clone())
                .unwrap(),
        );
        let out = enumerate_paranaturals(&p, &p, 100, &Budget::default()).unwrap();
        // Natural transformations P => P: phi_1(z)=z forces phi_0(x)=x,
        // phi_0(y) free: exactly 2.
        assert_eq!(out.transformations.len(), 2);
    }

    #[test]
    fn compose_with_identity_is_identity() {
        let base = wi_base();
        let h = Arc::new(hom_difunctor(base));
        let out = enumerate_paranaturals(&h, &h, 100, &Budget::default()).unwrap();
        let id = Paranatural::identity(&h);
        for phi in &out.transformations {
            assert_eq!(compose_paranatural(&id, phi).unwrap().components, phi.components);
            assert_eq!(compose_paranatural(phi, &id).unwrap().components, phi.components);
        }
    }

    #[test]
    fn struct_functor_of_identity_and_of_constant_e() {
        let base = wi_base();
        let h = Arc::new(hom_difunctor(base));
        let id = Paranatural::identity(&h);
        let f = as_struct_functor(&id).unwrap();
        assert!(validate_functor(&f).is_empty());
        assert_eq!(f.obj_map, vec![ObjId(0), ObjId(1)]);

        let e_idx = h.diag(ObjId(0)).position(&Value::mor("e")).unwrap();
        let const_e = Paranatural {
            source: h.clone(),
            target: h.clone(),
            components: vec![vec![e_idx, e_idx]],
        };
        let f = as_struct_functor(&const_e).unwrap();
        assert!(validate_functor(&f).is_empty());
        // Both structures land on (*, e).
        assert_eq!(f.obj_map[0], f.obj_map[1]);
    }

    #[test]
    fn struct_functor_rejects_non_paranatural_family() {
        let base = arrow_base();
        let p = Arc::new(
            eval_difunctor_expr(&DifunctorExpr::FromPresheaf(counterexample_presheaf()), base).unwrap(),
        );
        let swap = Paranatural {
            source: p.clone(),
            target: p.clone(),
            components: vec![vec![1, 0], vec![0]],
        };
        let err = as_struct_functor(&swap).unwrap_err();
        assert!(err.morphism.starts_with("u:"));
        assert_ne!(err.lhs, err.rhs);
    }

    #[test]
    fn struct_functor_assignment_is_functorial() {
        let base = wi_base();
        let h = Arc::new(hom_difunctor(base));
        let out = enumerate_paranaturals(&h, &h, 100, &Budget::default()).unwrap();
        let sc = struct_category(&h);
        for a in &out.transformations {
            for b in &out.transformations {
                let ab = compose_paranatural(a, b).unwrap();
                let fa = as_struct_functor_with(a, &sc, &sc).unwrap();
                let fb = as_struct_functor_with(b, &sc, &sc).unwrap();
                let fab = as_struct_functor_with(&ab, &sc, &sc).unwrap();
                let composed_obj: Vec<ObjId> =
                    fb.obj_map.iter().map(|o| fa.obj_map[o.0]).collect();
                let composed_mor: Vec<crate::fincat::MorId> =
                    fb.mor_map.iter().map(|m| fa.mor_map[m.0]).collect();
                assert_eq!(fab.obj_map, composed_obj);
                assert_eq!(fab.mor_map, composed_mor);
            }
        }
    }
}
