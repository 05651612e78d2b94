//! Difunctors over a finite category: tabulated data, an expression grammar
//! with an evaluator, and the Struct category construction.
//!
//! A difunctor assigns a finite set to every object pair, a contravariant
//! action `neg` to its first argument and a covariant action `pos` to its
//! second. Everything is stored as index tables over canonically sorted
//! cells, so equality of difunctors is table equality.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fincat::{validate_category, FinCategory, InputError, MorId, ObjId};
use crate::poly::PolyFunctor;
use crate::value::Value;

/// Hard cap on a single cell; evaluation fails rather than building larger
/// tables.
pub const MAX_CELL: usize = 200_000;

/// One cell of a difunctor: a canonically sorted finite set with an index.
#[derive(Debug, Clone)]
pub struct Cell {
    pub elems: Vec<Value>,
    index: HashMap<Value, usize>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.elems == other.elems
    }
}

impl Cell {
    pub fn new(mut elems: Vec<Value>) -> Cell {
        elems.sort();
        elems.dedup();
        let index = elems.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        Cell { elems, index }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn position(&self, v: &Value) -> Option<usize> {
        self.index.get(v).copied()
    }
}

/// A tabulated difunctor over `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Difunctor {
    pub base: Arc<FinCategory>,
    /// Cells indexed by `i * n_obj + j` for the pair (I, J).
    cells: Vec<Cell>,
    /// `neg[m * n_obj + j]`: table cell(cod m, J) -> cell(dom m, J).
    neg: Vec<Vec<usize>>,
    /// `pos[i * n_mor + m]`: table cell(I, dom m) -> cell(I, cod m).
    pos: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("expression requires a finite-set fragment base, but {0:?} is not one")]
    NotAFragment(String),
    #[error("unknown object {0:?} in expression")]
    UnknownObject(String),
    #[error("cell would hold {size} elements, over the {max} limit")]
    TooLarge { size: usize, max: usize },
    #[error("presheaf table malformed: {0}")]
    BadPresheaf(String),
}

/// A difunctor-law violation with a (morphism, element) witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DifunViolation {
    IdentityAction { action: &'static str, object: String, at: String, elem: String },
    Functoriality { action: &'static str, g: String, f: String, at: String, elem: String },
    Interchange { neg_mor: String, pos_mor: String, elem: String },
}

impl fmt::Display for DifunViolation {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DifunViolation::IdentityAction { action, object, at, elem } => write!(
                out,
                "{action} action of identity at {object} moves {elem} (cell argument {at})"
            ),
            DifunViolation::Functoriality { action, g, f, at, elem } => write!(
                out,
                "{action}({g}∘{f}) != {action}({f} then {g}) at argument {at} on element {elem}"
            ),
            DifunViolation::Interchange { neg_mor, pos_mor, elem } => write!(
                out,
                "interchange fails for neg {neg_mor} / pos {pos_mor} on element {elem}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DifunReport {
    pub violations: Vec<DifunViolation>,
    pub checked: usize,
}

impl DifunReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Difunctor {
    /// Tabulates a difunctor from value-level actions. Panics if an action
    /// produces a value outside its codomain cell; the caller guarantees
    /// closure.
    pub fn from_parts(
        base: Arc<FinCategory>,
        cell_values: impl Fn(ObjId, ObjId) -> Vec<Value>,
        neg_value: impl Fn(MorId, ObjId, &Value) -> Value,
        pos_value: impl Fn(ObjId, MorId, &Value) -> Value,
    ) -> Difunctor {
        let n = base.object_count();
        let nm = base.morphism_count();
        let mut cells = Vec::with_capacity(n * n);
        for i in base.objects() {
            for j in base.objects() {
                cells.push(Cell::new(cell_values(i, j)));
            }
        }
        let cell_at = |i: ObjId, j: ObjId| &cells[i.0 * n + j.0];
        let mut neg = Vec::with_capacity(nm * n);
        for m in base.morphisms() {
            let (dom, cod) = (base.mor(m).dom, base.mor(m).cod);
            for j in base.objects() {
                let src = cell_at(cod, j);
                let tgt = cell_at(dom, j);
                let table = src
                    .elems
                    .iter()
                    .map(|v| {
                        let image = neg_value(m, j, v);
                        tgt.position(&image).unwrap_or_else(|| {
                            panic!(
                                "neg action of {} at {} sends {v} to {image} outside its cell",
                                base.mor_label(m),
                                base.object_label(j)
                            )
                        })
                    })
                    .collect();
                neg.push(table);
            }
        }
        let mut pos = Vec::with_capacity(n * nm);
        for i in base.objects() {
            for m in base.morphisms() {
                let (dom, cod) = (base.mor(m).dom, base.mor(m).cod);
                let src = cell_at(i, dom);
                let tgt = cell_at(i, cod);
                let table = src
                    .elems
                    .iter()
                    .map(|v| {
                        let image = pos_value(i, m, v);
                        tgt.position(&image).unwrap_or_else(|| {
                            panic!(
                                "pos action of {} at {} sends {v} to {image} outside its cell",
                                base.mor_label(m),
                                base.object_label(i)
                            )
                        })
                    })
                    .collect();
                pos.push(table);
            }
        }
        Difunctor { base, cells, neg, pos }
    }

    /// Builds directly from precomputed cells and index tables (bundle path).
    pub fn from_tables_raw(
        base: Arc<FinCategory>,
        cells: Vec<Vec<Value>>,
        neg: Vec<Vec<usize>>,
        pos: Vec<Vec<usize>>,
    ) -> Difunctor {
        Difunctor {
            base,
            cells: cells.into_iter().map(Cell::new).collect(),
            neg,
            pos,
        }
    }

    pub fn cell(&self, i: ObjId, j: ObjId) -> &Cell {
        &self.cells[i.0 * self.base.object_count() + j.0]
    }

    pub fn diag(&self, i: ObjId) -> &Cell {
        self.cell(i, i)
    }

    /// Contravariant action of `m` with second argument fixed at `j`.
    pub fn neg(&self, m: MorId, j: ObjId) -> &[usize] {
        &self.neg[m.0 * self.base.object_count() + j.0]
    }

    /// Covariant action of `m` with first argument fixed at `i`.
    pub fn pos(&self, i: ObjId, m: MorId) -> &[usize] {
        &self.pos[i.0 * self.base.morphism_count() + m.0]
    }

    pub fn neg_value(&self, m: MorId, j: ObjId, v: &Value) -> &Value {
        let src = self.cell(self.base.mor(m).cod, j);
        let idx = src.position(v).expect("element not in source cell");
        &self.cell(self.base.mor(m).dom, j).elems[self.neg(m, j)[idx]]
    }

    pub fn pos_value(&self, i: ObjId, m: MorId, v: &Value) -> &Value {
        let src = self.cell(i, self.base.mor(m).dom);
        let idx = src.position(v).expect("element not in source cell");
        &self.cell(i, self.base.mor(m).cod).elems[self.pos(i, m)[idx]]
    }

    pub fn total_size(&self) -> usize {
        self.cells.iter().map(Cell::len).sum()
    }
}

/// Exhaustive law scan: identity actions, both functorialities, interchange.
pub fn validate_difunctor(d: &Difunctor) -> DifunReport {
    let base = &d.base;
    let mut report = DifunReport::default();

    for o in base.objects() {
        let id = base.identity(o);
        for j in base.objects() {
            for (x, &img) in d.neg(id, j).iter().enumerate() {
                report.checked += 1;
                if img != x {
                    report.violations.push(DifunViolation::IdentityAction {
                        action: "neg",
                        object: base.object_label(o).to_string(),
                        at: base.object_label(j).to_string(),
                        elem: d.cell(o, j).elems[x].to_string(),
                    });
                }
            }
            for (x, &img) in d.pos(j, id).iter().enumerate() {
                report.checked += 1;
                if img != x {
                    report.violations.push(DifunViolation::IdentityAction {
                        action: "pos",
                        object: base.object_label(o).to_string(),
                        at: base.object_label(j).to_string(),
                        elem: d.cell(j, o).elems[x].to_string(),
                    });
                }
            }
        }
    }

    for g in base.morphisms() {
        for f in base.morphisms() {
            if base.mor(f).cod != base.mor(g).dom {
                continue;
            }
            let gf = base.compose(g, f);
            for j in base.objects() {
                // neg is contravariant: neg(g∘f) = neg(f) ∘ neg(g).
                let ng = d.neg(g, j);
                let nf = d.neg(f, j);
                let ngf = d.neg(gf, j);
                for x in 0..ngf.len() {
                    report.checked += 1;
                    if nf[ng[x]] != ngf[x] {
                        report.violations.push(DifunViolation::Functoriality {
                            action: "neg",
                            g: base.mor_label(g).to_string(),
                            f: base.mor_label(f).to_string(),
                            at: base.object_label(j).to_string(),
                            elem: d.cell(base.mor(g).cod, j).elems[x].to_string(),
                        });
                    }
                }
                // pos is covariant: pos(g∘f) = pos(g) ∘ pos(f).
                let pg = d.pos(j, g);
                let pf = d.pos(j, f);
                let pgf = d.pos(j, gf);
                for x in 0..pgf.len() {
                    report.checked += 1;
                    if pg[pf[x]] != pgf[x] {
                        report.violations.push(DifunViolation::Functoriality {
                            action: "pos",
                            g: base.mor_label(g).to_string(),
                            f: base.mor_label(f).to_string(),
                            at: base.object_label(j).to_string(),
                            elem: d.cell(j, base.mor(f).dom).elems[x].to_string(),
                        });
                    }
                }
            }
        }
    }

    for mi in base.morphisms() {
        let (i0, i1) = (base.mor(mi).dom, base.mor(mi).cod);
        for mj in base.morphisms() {
            let (j0, j1) = (base.mor(mj).dom, base.mor(mj).cod);
            // Both routes cell(I1,J0) -> cell(I0,J1).
            let via_neg_first = |x: usize| d.pos(i0, mj)[d.neg(mi, j0)[x]];
            let via_pos_first = |x: usize| d.neg(mi, j1)[d.pos(i1, mj)[x]];
            for x in 0..d.cell(i1, j0).len() {
                report.checked += 1;
                if via_neg_first(x) != via_pos_first(x) {
                    report.violations.push(DifunViolation::Interchange {
                        neg_mor: base.mor_label(mi).to_string(),
                        pos_mor: base.mor_label(mj).to_string(),
                        elem: d.cell(i1, j0).elems[x].to_string(),
                    });
                }
            }
        }
    }
    report
}

/// Presheaf or covariant-functor data for the `FromPresheaf` /
/// `FromCovariant` expression nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresheafData {
    /// Object label -> element labels.
    pub values: BTreeMap<String, Vec<String>>,
    /// Morphism label -> element mapping.
    pub actions: BTreeMap<String, BTreeMap<String, String>>,
}

/// Difunctor expression grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DifunctorExpr {
    Hom,
    Const(Vec<String>),
    Var,
    Prod(Box<DifunctorExpr>, Box<DifunctorExpr>),
    Sum(Box<DifunctorExpr>, Box<DifunctorExpr>),
    Arrow(Box<DifunctorExpr>, Box<DifunctorExpr>),
    /// The direpresentable difunctor; `DiYo(j, i)` has diagonal
    /// hom(j,K) x hom(K,i) at K.
    DiYo(String, String),
    FromPresheaf(PresheafData),
    FromCovariant(PresheafData),
    AlgOf(PolyFunctor),
    CoalgOf(PolyFunctor),
    ListOf(Box<DifunctorExpr>, usize),
}

impl DifunctorExpr {
    pub fn prod(a: DifunctorExpr, b: DifunctorExpr) -> DifunctorExpr {
        DifunctorExpr::Prod(Box::new(a), Box::new(b))
    }

    pub fn sum(a: DifunctorExpr, b: DifunctorExpr) -> DifunctorExpr {
        DifunctorExpr::Sum(Box::new(a), Box::new(b))
    }

    pub fn arrow(a: DifunctorExpr, b: DifunctorExpr) -> DifunctorExpr {
        DifunctorExpr::Arrow(Box::new(a), Box::new(b))
    }

    pub fn unit() -> DifunctorExpr {
        DifunctorExpr::Const(vec!["*".to_string()])
    }
}

/// The hom difunctor: cell (I,J) = hom(I,J), neg by precomposition, pos by
/// postcomposition.
pub fn hom_difunctor(base: Arc<FinCategory>) -> Difunctor {
    let b = base.clone();
    let b2 = base.clone();
    let b3 = base.clone();
    Difunctor::from_parts(
        base,
        move |i, j| {
            b.hom(i, j)
                .into_iter()
                .map(|m| Value::mor(b.mor_label(m)))
                .collect()
        },
        move |m, _j, v| match v {
            Value::Mor(l) => {
                let x = b2.mor_by_label(l).expect("hom cell element");
                Value::mor(b2.mor_label(b2.compose(x, m)))
            }
            _ => unreachable!(),
        },
        move |_i, m, v| match v {
            Value::Mor(l) => {
                let x = b3.mor_by_label(l).expect("hom cell element");
                Value::mor(b3.mor_label(b3.compose(m, x)))
            }
            _ => unreachable!(),
        },
    )
}

/// Constant difunctor at a fixed finite set; all actions are identities.
pub fn const_difunctor(base: Arc<FinCategory>, elems: Vec<Value>) -> Difunctor {
    Difunctor::from_parts(
        base,
        move |_i, _j| elems.clone(),
        |_m, _j, v| v.clone(),
        |_i, _m, v| v.clone(),
    )
}

/// The variable difunctor over a fragment: cell (I,J) = elements of J.
pub fn var_difunctor(base: Arc<FinCategory>) -> Result<Difunctor, EvalError> {
    if !base.is_fragment() {
        return Err(EvalError::NotAFragment(base.name.clone()));
    }
    let b = base.clone();
    let b2 = base.clone();
    Ok(Difunctor::from_parts(
        base,
        move |_i, j| b.elements(j).to_vec(),
        |_m, _j, v| v.clone(),
        move |_i, m, v| {
            let dom = b2.mor(m).dom;
            let idx = b2
                .elements(dom)
                .iter()
                .position(|e| e == v)
                .expect("element of fragment carrier");
            b2.elements(b2.mor(m).cod)[b2.element_table(m)[idx]].clone()
        },
    ))
}

/// Pointwise product of two difunctors over the same base.
pub fn product_difunctor(a: &Difunctor, b: &Difunctor) -> Difunctor {
    assert!(Arc::ptr_eq(&a.base, &b.base) || a.base == b.base, "base mismatch");
    let (ac, bc) = (a.clone(), b.clone());
    let (an, bn) = (a.clone(), b.clone());
    let (ap, bp) = (a.clone(), b.clone());
    Difunctor::from_parts(
        a.base.clone(),
        move |i, j| {
            let mut out = Vec::new();
            for x in &ac.cell(i, j).elems {
                for y in &bc.cell(i, j).elems {
                    out.push(Value::pair(x.clone(), y.clone()));
                }
            }
            out
        },
        move |m, j, v| match v {
            Value::Pair(x, y) => Value::pair(an.neg_value(m, j, x).clone(), bn.neg_value(m, j, y).clone()),
            _ => unreachable!(),
        },
        move |i, m, v| match v {
            Value::Pair(x, y) => Value::pair(ap.pos_value(i, m, x).clone(), bp.pos_value(i, m, y).clone()),
            _ => unreachable!(),
        },
    )
}

/// Pointwise sum (disjoint union) of two difunctors.
pub fn sum_difunctor(a: &Difunctor, b: &Difunctor) -> Difunctor {
    let (ac, bc) = (a.clone(), b.clone());
    let (an, bn) = (a.clone(), b.clone());
    let (ap, bp) = (a.clone(), b.clone());
    Difunctor::from_parts(
        a.base.clone(),
        move |i, j| {
            let mut v: Vec<Value> = ac.cell(i, j).elems.iter().cloned().map(Value::inl).collect();
            v.extend(bc.cell(i, j).elems.iter().cloned().map(Value::inr));
            v
        },
        move |m, j, v| match v {
            Value::Inl(x) => Value::inl(an.neg_value(m, j, x).clone()),
            Value::Inr(x) => Value::inr(bn.neg_value(m, j, x).clone()),
            _ => unreachable!(),
        },
        move |i, m, v| match v {
            Value::Inl(x) => Value::inl(ap.pos_value(i, m, x).clone()),
            Value::Inr(x) => Value::inr(bp.pos_value(i, m, x).clone()),
            _ => unreachable!(),
        },
    )
}

/// Internal-hom difunctor; cell (I,J) = functions e1(J,I) -> e2(I,J), with
/// the domain arguments flipped.
pub fn arrow_difunctor(e1: &Difunctor, e2: &Difunctor) -> Result<Difunctor, EvalError> {
    if !e1.base.is_fragment() {
        return Err(EvalError::NotAFragment(e1.base.name.clone()));
    }
    for i in e1.base.objects() {
        for j in e1.base.objects() {
            let d = e1.cell(j, i).len() as u32;
            let c = e2.cell(i, j).len();
            let size = c.checked_pow(d).unwrap_or(usize::MAX);
            if size > MAX_CELL {
                return Err(EvalError::TooLarge { size, max: MAX_CELL });
            }
        }
    }
    let (c1, c2) = (e1.clone(), e2.clone());
    let (n1, n2) = (e1.clone(), e2.clone());
    let (p1, p2) = (e1.clone(), e2.clone());
    Ok(Difunctor::from_parts(
        e1.base.clone(),
        move |i, j| {
            let dom = &c1.cell(j, i).elems;
            let cod = &c2.cell(i, j).elems;
            all_tables(dom, cod)
        },
        // neg m : cell(I1,J) -> cell(I0,J) for m: I0 -> I1:
        //   h |-> neg_{e2}(m) ∘ h ∘ pos_{e1}(m)  on arguments in e1(J,I0).
        move |m, j, v| {
            let i0 = n1.base.mor(m).dom;
            let dom_new = &n1.cell(j, i0).elems;
            Value::table(
                dom_new
                    .iter()
                    .map(|z| {
                        let z1 = n1.pos_value(j, m, z);
                        let hz = v.apply(z1);
                        (z.clone(), n2.neg_value(m, j, hz).clone())
                    })
                    .collect(),
            )
        },
        // pos m : cell(I,J0) -> cell(I,J1) for m: J0 -> J1:
        //   h |-> pos_{e2}(m) ∘ h ∘ neg_{e1}(m)  on arguments in e1(J1,I).
        move |i, m, v| {
            let j1 = p1.base.mor(m).cod;
            let dom_new = &p1.cell(j1, i).elems;
            Value::table(
                dom_new
                    .iter()
                    .map(|z| {
                        let z0 = p1.neg_value(m, i, z);
                        let hz = v.apply(z0);
                        (z.clone(), p2.pos_value(i, m, hz).clone())
                    })
                    .collect(),
            )
        },
    ))
}

fn all_tables(dom: &[Value], cod: &[Value]) -> Vec<Value> {
    if dom.is_empty() {
        return vec![Value::table(Vec::new())];
    }
    if cod.is_empty() {
        return Vec::new();
    }
    let mut acc: Vec<Vec<(Value, Value)>> = vec![Vec::new()];
    for d in dom {
        let mut next = Vec::with_capacity(acc.len() * cod.len());
        for partial in &acc {
            for c in cod {
                let mut p = partial.clone();
                p.push((d.clone(), c.clone()));
                next.push(p);
            }
        }
        acc = next;
    }
    acc.into_iter().map(Value::table).collect()
}

/// The direpresentable difunctor `DiYo(j, i)`: cell (K,L) =
/// hom(j,L) x hom(K,i); neg post-composes the `from` leg, pos pre-composes
/// the `into` leg.
pub fn diyo_difunctor(base: Arc<FinCategory>, j: ObjId, i: ObjId) -> Difunctor {
    let b = base.clone();
    let b2 = base.clone();
    let b3 = base.clone();
    Difunctor::from_parts(
        base,
        move |k, l| {
            let mut out = Vec::new();
            for into in b.hom(j, l) {
                for from in b.hom(k, i) {
                    out.push(Value::pair(
                        Value::mor(b.mor_label(into)),
                        Value::mor(b.mor_label(from)),
                    ));
                }
            }
            out
        },
        move |m, _l, v| match v {
            Value::Pair(into, from) => {
                let from_m = match from.as_ref() {
                    Value::Mor(l) => b2.mor_by_label(l).unwrap(),
                    _ => unreachable!(),
                };
                Value::pair(
                    into.as_ref().clone(),
                    Value::mor(b2.mor_label(b2.compose(from_m, m))),
                )
            }
            _ => unreachable!(),
        },
        move |_k, m, v| match v {
            Value::Pair(into, from) => {
                let into_m = match into.as_ref() {
                    Value::Mor(l) => b3.mor_by_label(l).unwrap(),
                    _ => unreachable!(),
                };
                Value::pair(
                    Value::mor(b3.mor_label(b3.compose(m, into_m))),
                    from.as_ref().clone(),
                )
            }
            _ => unreachable!(),
        },
    )
}

/// Presheaf as difunctor: cell (I,J) = P(I); neg from the presheaf action,
/// pos the identity.
pub fn presheaf_difunctor(base: Arc<FinCategory>, data: &PresheafData) -> Result<Difunctor, EvalError> {
    let tables = presheaf_tables(&base, data, true)?;
    let t2 = tables.clone();
    Ok(Difunctor::from_parts(
        base,
        move |i, _j| tables.0[i.0].clone(),
        move |m, _j, v| t2.1[m.0].get(v).expect("presheaf action total").clone(),
        |_i, _m, v| v.clone(),
    ))
}

/// Covariant functor as difunctor: cell (I,J) = Q(J); pos from the action,
/// neg the identity.
pub fn covariant_difunctor(base: Arc<FinCategory>, data: &PresheafData) -> Result<Difunctor, EvalError> {
    let tables = presheaf_tables(&base, data, false)?;
    let t2 = tables.clone();
    Ok(Difunctor::from_parts(
        base,
        move |_i, j| tables.0[j.0].clone(),
        |_m, _j, v| v.clone(),
        move |_i, m, v| t2.1[m.0].get(v).expect("covariant action total").clone(),
    ))
}

type ObjSetsAndActions = (Vec<Vec<Value>>, Vec<HashMap<Value, Value>>);

/// Checks shape of presheaf data and converts labels to values.
/// `contravariant` decides which way a morphism's action must point.
fn presheaf_tables(
    base: &FinCategory,
    data: &PresheafData,
    contravariant: bool,
) -> Result<ObjSetsAndActions, EvalError> {
    let mut sets: Vec<Vec<Value>> = vec![Vec::new(); base.object_count()];
    for (obj, elems) in &data.values {
        let o = base
            .object_by_label(obj)
            .ok_or_else(|| EvalError::UnknownObject(obj.clone()))?;
        sets[o.0] = elems.iter().map(Value::atom).collect();
        sets[o.0].sort();
    }
    let mut actions: Vec<HashMap<Value, Value>> = vec![HashMap::new(); base.morphism_count()];
    for m in base.morphisms() {
        let d = base.mor(m);
        let (src, tgt) = if contravariant { (d.cod, d.dom) } else { (d.dom, d.cod) };
        let label = base.mor_label(m);
        let table = if base.is_identity(m) && !data.actions.contains_key(label) {
            sets[src.0].iter().map(|v| (v.to_string(), v.to_string())).collect()
        } else {
            data.actions
                .get(label)
                .ok_or_else(|| EvalError::BadPresheaf(format!("no action table for {label:?}")))?
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect::<BTreeMap<_, _>>()
        };
        for x in &sets[src.0] {
            let key = x.to_string();
            let img = table
                .get(&key)
                .ok_or_else(|| EvalError::BadPresheaf(format!("action of {label:?} missing {key:?}")))?;
            let img = Value::atom(img.clone());
            if !sets[tgt.0].contains(&img) {
                return Err(EvalError::BadPresheaf(format!(
                    "action of {label:?} sends {key:?} outside its set"
                )));
            }
            actions[m.0].insert(x.clone(), img);
        }
    }
    Ok((sets, actions))
}

/// Algebra difunctor of `t`: cell (I,J) = functions T(I) -> J; structures on
/// the diagonal are T-algebras and structure homomorphisms are algebra
/// homomorphisms.
pub fn alg_difunctor(base: Arc<FinCategory>, t: &PolyFunctor) -> Result<Difunctor, EvalError> {
    if !base.is_fragment() {
        return Err(EvalError::NotAFragment(base.name.clone()));
    }
    for i in base.objects() {
        for j in base.objects() {
            let d = t.apply_set(base.elements(i)).len() as u32;
            let size = base.elements(j).len().checked_pow(d).unwrap_or(usize::MAX);
            if size > MAX_CELL {
                return Err(EvalError::TooLarge { size, max: MAX_CELL });
            }
        }
    }
    let (tc, tn) = (t.clone(), t.clone());
    let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
    Ok(Difunctor::from_parts(
        base,
        move |i, j| all_tables(&tc.apply_set(b1.elements(i)), b1.elements(j)),
        // neg m: u |-> u ∘ T(m) for m: I0 -> I1.
        move |m, _j, v| {
            let dom0 = tn.apply_set(b2.elements(b2.mor(m).dom));
            let apply_m = fragment_fn(&b2, m);
            Value::table(
                dom0.into_iter()
                    .map(|z| {
                        let tz = tn.apply_fn(&apply_m, &z);
                        let img = v.apply(&tz).clone();
                        (z, img)
                    })
                    .collect(),
            )
        },
        // pos m: u |-> m ∘ u.
        move |_i, m, v| {
            let apply_m = fragment_fn(&b3, m);
            Value::table(
                v.as_table()
                    .iter()
                    .map(|(k, x)| (k.clone(), apply_m(x)))
                    .collect(),
            )
        },
    ))
}

/// Coalgebra difunctor of `t`: cell (I,J) = functions I -> T(J).
pub fn coalg_difunctor(base: Arc<FinCategory>, t: &PolyFunctor) -> Result<Difunctor, EvalError> {
    if !base.is_fragment() {
        return Err(EvalError::NotAFragment(base.name.clone()));
    }
    for i in base.objects() {
        for j in base.objects() {
            let d = base.elements(i).len() as u32;
            let size = t.apply_set(base.elements(j)).len().checked_pow(d).unwrap_or(usize::MAX);
            if size > MAX_CELL {
                return Err(EvalError::TooLarge { size, max: MAX_CELL });
            }
        }
    }
    let (tc, tp) = (t.clone(), t.clone());
    let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
    Ok(Difunctor::from_parts(
        base,
        move |i, j| all_tables(b1.elements(i), &tc.apply_set(b1.elements(j))),
        // neg m: c |-> c ∘ m for m: I0 -> I1.
        move |m, _j, v| {
            let apply_m = fragment_fn(&b2, m);
            Value::table(
                b2.elements(b2.mor(m).dom)
                    .iter()
                    .map(|z| (z.clone(), v.apply(&apply_m(z)).clone()))
                    .collect(),
            )
        },
        // pos m: c |-> T(m) ∘ c.
        move |_i, m, v| {
            let apply_m = fragment_fn(&b3, m);
            Value::table(
                v.as_table()
                    .iter()
                    .map(|(k, x)| (k.clone(), tp.apply_fn(&apply_m, x)))
                    .collect(),
            )
        },
    ))
}

/// Lists of bounded length over a difunctor, mapped elementwise.
pub fn list_difunctor(e: &Difunctor, bound: usize) -> Result<Difunctor, EvalError> {
    if !e.base.is_fragment() {
        return Err(EvalError::NotAFragment(e.base.name.clone()));
    }
    for i in e.base.objects() {
        for j in e.base.objects() {
            let n = e.cell(i, j).len();
            let mut size = 1usize;
            let mut pow = 1usize;
            for _ in 0..bound {
                pow = pow.saturating_mul(n);
                size = size.saturating_add(pow);
            }
            if size > MAX_CELL {
                return Err(EvalError::TooLarge { size, max: MAX_CELL });
            }
        }
    }
    let (c, n, p) = (e.clone(), e.clone(), e.clone());
    Ok(Difunctor::from_parts(
        e.base.clone(),
        move |i, j| all_lists(&c.cell(i, j).elems, bound),
        move |m, j, v| match v {
            Value::List(items) => {
                Value::List(items.iter().map(|x| n.neg_value(m, j, x).clone()).collect())
            }
            _ => unreachable!(),
        },
        move |i, m, v| match v {
            Value::List(items) => {
                Value::List(items.iter().map(|x| p.pos_value(i, m, x).clone()).collect())
            }
            _ => unreachable!(),
        },
    ))
}

pub fn all_lists(elems: &[Value], bound: usize) -> Vec<Value> {
    let mut out = vec![Value::List(Vec::new())];
    let mut layer: Vec<Vec<Value>> = vec![Vec::new()];
    for _ in 0..bound {
        let mut next = Vec::new();
        for l in &layer {
            for e in elems {
                let mut l2 = l.clone();
                l2.push(e.clone());
                next.push(l2);
            }
        }
        out.extend(next.iter().cloned().map(Value::List));
        layer = next;
    }
    out
}

/// Evaluates an expression over a base category into a tabulated difunctor.
pub fn eval_difunctor_expr(expr: &DifunctorExpr, base: Arc<FinCategory>) -> Result<Difunctor, EvalError> {
    match expr {
        DifunctorExpr::Hom => Ok(hom_difunctor(base)),
        DifunctorExpr::Const(atoms) => {
            Ok(const_difunctor(base, atoms.iter().map(Value::atom).collect()))
        }
        DifunctorExpr::Var => var_difunctor(base),
        DifunctorExpr::Prod(a, b) => {
            let da = eval_difunctor_expr(a, base.clone())?;
            let db = eval_difunctor_expr(b, base)?;
            Ok(product_difunctor(&da, &db))
        }
        DifunctorExpr::Sum(a, b) => {
            let da = eval_difunctor_expr(a, base.clone())?;
            let db = eval_difunctor_expr(b, base)?;
            Ok(sum_difunctor(&da, &db))
        }
        DifunctorExpr::Arrow(a, b) => {
            let da = eval_difunctor_expr(a, base.clone())?;
            let db = eval_difunctor_expr(b, base)?;
            arrow_difunctor(&da, &db)
        }
        DifunctorExpr::DiYo(j, i) => {
            let jo = base
                .object_by_label(j)
                .ok_or_else(|| EvalError::UnknownObject(j.clone()))?;
            let io = base
                .object_by_label(i)
                .ok_or_else(|| EvalError::UnknownObject(i.clone()))?;
            Ok(diyo_difunctor(base, jo, io))
        }
        DifunctorExpr::FromPresheaf(data) => presheaf_difunctor(base, data),
        DifunctorExpr::FromCovariant(data) => covariant_difunctor(base, data),
        DifunctorExpr::AlgOf(t) => alg_difunctor(base, t),
        DifunctorExpr::CoalgOf(t) => coalg_difunctor(base, t),
        DifunctorExpr::ListOf(e, bound) => {
            let de = eval_difunctor_expr(e, base)?;
            list_difunctor(&de, *bound)
        }
    }
}

/// Applies a fragment morphism to an element value.
pub fn fragment_fn<'a>(base: &'a FinCategory, m: MorId) -> impl Fn(&Value) -> Value + 'a {
    move |v: &Value| {
        let dom = base.mor(m).dom;
        let idx = base
            .elements(dom)
            .iter()
            .position(|e| e == v)
            .unwrap_or_else(|| panic!("{v} not in carrier {}", base.object_label(dom)));
        base.elements(base.mor(m).cod)[base.element_table(m)[idx]].clone()
    }
}

/// An object of a Struct category: a base object with a diagonal element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructObj {
    pub base_obj: ObjId,
    pub elem_idx: usize,
    pub elem: Value,
}

/// A morphism of a Struct category, remembering its base morphism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructMor {
    pub base_mor: MorId,
    pub src: usize,
    pub tgt: usize,
}

/// The diagonal analogue of the category of elements: objects are pairs
/// (I, g) with g in the diagonal, morphisms are base morphisms f with
/// pos(f)(g) = neg(f)(g').
#[derive(Debug, Clone)]
pub struct StructCategory {
    pub cat: Arc<FinCategory>,
    pub objects: Vec<StructObj>,
    pub morphisms: Vec<StructMor>,
}

impl StructCategory {
    pub fn object_index(&self, base_obj: ObjId, elem: &Value) -> Option<usize> {
        self.objects
            .iter()
            .position(|o| o.base_obj == base_obj && &o.elem == elem)
    }
}

pub fn struct_object_label(base: &FinCategory, i: ObjId, g: &Value) -> String {
    format!("({},{g})", base.object_label(i))
}

/// Builds the Struct category of a validated difunctor.
pub fn struct_category(d: &Difunctor) -> StructCategory {
    let base = &d.base;
    let mut objects = Vec::new();
    for i in base.objects() {
        for (gi, g) in d.diag(i).elems.iter().enumerate() {
            objects.push(StructObj { base_obj: i, elem_idx: gi, elem: g.clone() });
        }
    }
    let obj_labels: Vec<String> = objects
        .iter()
        .map(|o| struct_object_label(base, o.base_obj, &o.elem))
        .collect();
    let mut obj_lookup: HashMap<(ObjId, usize), usize> = HashMap::new();
    for (k, o) in objects.iter().enumerate() {
        obj_lookup.insert((o.base_obj, o.elem_idx), k);
    }

    let mut morphisms = Vec::new();
    for f in base.morphisms() {
        let (i, j) = (base.mor(f).dom, base.mor(f).cod);
        let posf = d.pos(i, f);
        let negf = d.neg(f, j);
        for (gi, _) in d.diag(i).elems.iter().enumerate() {
            for (hi, _) in d.diag(j).elems.iter().enumerate() {
                if posf[gi] == negf[hi] {
                    morphisms.push(StructMor {
                        base_mor: f,
                        src: obj_lookup[&(i, gi)],
                        tgt: obj_lookup[&(j, hi)],
                    });
                }
            }
        }
    }
    let mor_labels: Vec<String> = morphisms
        .iter()
        .map(|m| {
            format!(
                "{}:{}=>{}",
                base.mor_label(m.base_mor),
                obj_labels[m.src],
                obj_labels[m.tgt]
            )
        })
        .collect();

    let mut mor_lookup: HashMap<(MorId, usize, usize), usize> = HashMap::new();
    for (k, m) in morphisms.iter().enumerate() {
        mor_lookup.insert((m.base_mor, m.src, m.tgt), k);
    }

    let mor_entries: Vec<(String, String, String)> = morphisms
        .iter()
        .zip(&mor_labels)
        .map(|(m, l)| (l.clone(), obj_labels[m.src].clone(), obj_labels[m.tgt].clone()))
        .collect();
    let identities: BTreeMap<String, String> = objects
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let idm = base.identity(o.base_obj);
            (obj_labels[k].clone(), mor_labels[mor_lookup[&(idm, k, k)]].clone())
        })
        .collect();
    let mut compose = Vec::new();
    for (gi, g) in morphisms.iter().enumerate() {
        for (fi, f) in morphisms.iter().enumerate() {
            if f.tgt != g.src {
                continue;
            }
            let base_gf = base.compose(g.base_mor, f.base_mor);
            let gf = mor_lookup[&(base_gf, f.src, g.tgt)];
            compose.push((mor_labels[gi].clone(), mor_labels[fi].clone(), mor_labels[gf].clone()));
        }
    }
    let cat = FinCategory::from_tables(
        &format!("Struct({})", base.name),
        obj_labels,
        mor_entries,
        &identities,
        compose,
    )
    .expect("struct category tables are well-formed");
    debug_assert!(validate_category(&cat).ok());
    StructCategory { cat: Arc::new(cat), objects, morphisms }
}

/// Decides the structure-homomorphism equality pos(f)(g) = neg(f)(g') and
/// returns the two off-diagonal values compared.
pub fn is_structure_hom(
    d: &Difunctor,
    f: MorId,
    g: &Value,
    g_prime: &Value,
) -> Result<(bool, Value, Value), InputError> {
    let (i, j) = (d.base.mor(f).dom, d.base.mor(f).cod);
    let gi = d
        .diag(i)
        .position(g)
        .ok_or_else(|| InputError::Other(format!("{g} not in diagonal at {}", d.base.object_label(i))))?;
    let hi = d
        .diag(j)
        .position(g_prime)
        .ok_or_else(|| InputError::Other(format!("{g_prime} not in diagonal at {}", d.base.object_label(j))))?;
    let lhs = d.pos(i, f)[gi];
    let rhs = d.neg(f, j)[hi];
    let cell = d.cell(i, j);
    Ok((lhs == rhs, cell.elems[lhs].clone(), cell.elems[rhs].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fincat::{build_fixture, finset_fragment, Fixture};

    fn arrow_base() -> Arc<FinCategory> {
        Arc::new(build_fixture(&Fixture::Arrow).unwrap())
    }

    fn wi_base() -> Arc<FinCategory> {
        Arc::new(build_fixture(&Fixture::WalkingIdempotent).unwrap())
    }

    #[test]
    fn hom_over_arrow_cells() {
        let base = arrow_base();
        let h = hom_difunctor(base.clone());
        let o0 = base.object_by_label("0").unwrap();
        let o1 = base.object_by_label("1").unwrap();
        assert_eq!(h.cell(o0, o0).elems, vec![Value::mor("id0")]);
        assert_eq!(h.cell(o0, o1).elems, vec![Value::mor("u")]);
        assert!(h.cell(o1, o0).is_empty());
        assert_eq!(h.cell(o1, o1).elems, vec![Value::mor("id1")]);
        assert!(validate_difunctor(&h).ok());
    }

    #[test]
    fn diyo_diagonal_over_arrow() {
        let base = arrow_base();
        let d = eval_difunctor_expr(&DifunctorExpr::DiYo("0".into(), "1".into()), base.clone()).unwrap();
        let o0 = base.object_by_label("0").unwrap();
        let o1 = base.object_by_label("1").unwrap();
        assert_eq!(d.diag(o0).elems, vec![Value::pair(Value::mor("id0"), Value::mor("u"))]);
        assert_eq!(d.diag(o1).elems, vec![Value::pair(Value::mor("u"), Value::mor("id1"))]);
        assert!(validate_difunctor(&d).ok());
    }

    #[test]
    fn arrow_expr_counts_endofunctions() {
        let base = Arc::new(finset_fragment(&[2]).unwrap());
        let d = eval_difunctor_expr(
            &DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var),
            base.clone(),
        )
        .unwrap();
        let x = base.object_by_label("s2").unwrap();
        assert_eq!(d.diag(x).len(), 4);
        assert!(validate_difunctor(&d).ok());
    }

    #[test]
    fn arrow_over_non_fragment_is_unsupported() {
        let base = arrow_base();
        let r = eval_difunctor_expr(
            &DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var),
            base,
        );
        assert!(matches!(r, Err(EvalError::NotAFragment(_))));
    }

    #[test]
    fn const_difunctor_validates() {
        let base = arrow_base();
        let d = eval_difunctor_expr(&DifunctorExpr::Const(vec!["a".into(), "b".into()]), base).unwrap();
        assert!(validate_difunctor(&d).ok());
    }

    #[test]
    fn expression_fixtures_validate() {
        let frag = Arc::new(finset_fragment(&[1, 2]).unwrap());
        let exprs = vec![
            DifunctorExpr::Hom,
            DifunctorExpr::Var,
            DifunctorExpr::prod(DifunctorExpr::Var, DifunctorExpr::Var),
            DifunctorExpr::sum(DifunctorExpr::Var, DifunctorExpr::Const(vec!["k".into()])),
            DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var),
            DifunctorExpr::arrow(
                DifunctorExpr::prod(DifunctorExpr::Var, DifunctorExpr::Var),
                DifunctorExpr::Var,
            ),
            DifunctorExpr::ListOf(Box::new(DifunctorExpr::Var), 2),
            DifunctorExpr::AlgOf(PolyFunctor::maybe()),
            DifunctorExpr::CoalgOf(PolyFunctor::Prod(
                Box::new(PolyFunctor::const_n(2)),
                Box::new(PolyFunctor::Id),
            )),
            DifunctorExpr::DiYo("s1".into(), "s2".into()),
        ];
        for e in exprs {
            let d = eval_difunctor_expr(&e, frag.clone()).unwrap();
            let report = validate_difunctor(&d);
            assert!(report.ok(), "{e:?}: {:?}", report.violations);
        }
    }

    #[test]
    fn struct_category_of_hom_over_walking_idempotent() {
        let base = wi_base();
        let h = hom_difunctor(base.clone());
        let sc = struct_category(&h);
        assert_eq!(sc.objects.len(), 2);
        assert!(validate_category(&sc.cat).ok());
        // hom((*,1),(*,1)) = {1,e}; hom((*,1),(*,e)) = {e}.
        let s1 = sc.object_index(ObjId(0), &Value::mor("1")).unwrap();
        let se = sc.object_index(ObjId(0), &Value::mor("e")).unwrap();
        let homs = |a: usize, b: usize| {
            sc.morphisms
                .iter()
                .filter(|m| m.src == a && m.tgt == b)
                .map(|m| base.mor_label(m.base_mor).to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(homs(s1, s1), vec!["1".to_string(), "e".to_string()]);
        assert_eq!(homs(s1, se), vec!["e".to_string()]);
        // Exhaustive membership: every pair checked both ways.
        assert_eq!(homs(se, s1), vec!["e".to_string()]);
        assert_eq!(homs(se, se), vec!["1".to_string(), "e".to_string()]);
    }

    #[test]
    fn wild_group_struct_object_count() {
        // (X*X -> X) * (X * (X -> X)) over carriers of sizes 1 and 2:
        // 1 + 2^4 * 2 * 2^2 = 129 structures.
        let frag = Arc::new(finset_fragment(&[1, 2]).unwrap());
        let wld = DifunctorExpr::prod(
            DifunctorExpr::arrow(
                DifunctorExpr::prod(DifunctorExpr::Var, DifunctorExpr::Var),
                DifunctorExpr::Var,
            ),
            DifunctorExpr::prod(
                DifunctorExpr::Var,
                DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var),
            ),
        );
        let d = eval_difunctor_expr(&wld, frag).unwrap();
        let sc = struct_category(&d);
        assert_eq!(sc.objects.len(), 129);
        assert!(validate_category(&sc.cat).ok());
    }

    #[test]
    fn splice_category_of_diyo_over_arrow() {
        let base = arrow_base();
        let d = eval_difunctor_expr(&DifunctorExpr::DiYo("0".into(), "1".into()), base.clone()).unwrap();
        let sc = struct_category(&d);
        assert_eq!(sc.objects.len(), 2);
        // The splice morphism u: vertex 0 -> vertex 1 exists iff both
        // triangles commute, which they do here.
        let non_id: Vec<_> = sc
            .morphisms
            .iter()
            .filter(|m| !base.is_identity(m.base_mor))
            .collect();
        assert_eq!(non_id.len(), 1);
        assert_eq!(base.mor_label(non_id[0].base_mor), "u");
    }

    #[test]
    fn structure_hom_with_witness() {
        let frag = Arc::new(finset_fragment(&[1, 2]).unwrap());
        let streams = eval_difunctor_expr(
            &DifunctorExpr::CoalgOf(PolyFunctor::Prod(
                Box::new(PolyFunctor::Const(vec!["0".into(), "1".into()])),
                Box::new(PolyFunctor::Id),
            )),
            frag.clone(),
        )
        .unwrap();
        let s1 = frag.object_by_label("s1").unwrap();
        let s2 = frag.object_by_label("s2").unwrap();
        let x0 = Value::atom("x0");
        let x1 = Value::atom("x1");
        // p |-> (0,p) on the singleton; q0 |-> (0,q1), q1 |-> (0,q0).
        let gp = Value::table(vec![(x0.clone(), Value::pair(Value::atom("0"), x0.clone()))]);
        let gq = Value::table(vec![
            (x0.clone(), Value::pair(Value::atom("0"), x1.clone())),
            (x1.clone(), Value::pair(Value::atom("0"), x0.clone())),
        ]);
        // The unique map s2 -> s1 is a structure hom q -> p.
        let f = frag
            .hom(s2, s1)
            .into_iter()
            .next()
            .expect("unique map to singleton");
        let (ok, _, _) = is_structure_hom(&streams, f, &gq, &gp).unwrap();
        assert!(ok);
        // Against r |-> (1,r) the head labels differ; witness shows it.
        let gr = Value::table(vec![(x0.clone(), Value::pair(Value::atom("1"), x0.clone()))]);
        let (ok, lhs, rhs) = is_structure_hom(&streams, f, &gq, &gr).unwrap();
        assert!(!ok);
        assert_ne!(lhs, rhs);
    }

    #[test]
    fn identity_paranatural_cells_match_spec_identity_case() {
        // struct_category(Const(1)) is isomorphic to the base.
        let base = arrow_base();
        let d = const_difunctor(base.clone(), vec![Value::atom("*")]);
        let sc = struct_category(&d);
        assert_eq!(sc.objects.len(), base.object_count());
        assert_eq!(sc.morphisms.len(), base.morphism_count());
        for m in &sc.morphisms {
            assert_eq!(sc.objects[m.src].base_obj, base.mor(m.base_mor).dom);
            assert_eq!(sc.objects[m.tgt].base_obj, base.mor(m.base_mor).cod);
        }
    }

    #[test]
    fn element_not_in_diagonal_is_input_error() {
        let base = wi_base();
        let h = hom_difunctor(base.clone());
        let f = base.mor_by_label("e").unwrap();
        let r = is_structure_hom(&h, f, &Value::mor("nope"), &Value::mor("1"));
        assert!(r.is_err());
    }
}
