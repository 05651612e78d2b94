//! The diYoneda maps, bijectivity probes, and the cartesian-closed structure
//! of the difunctor category.
//!
//! Probes report, never assert: per-cell comparisons between a difunctor and
//! the enumerated transformations out of its direpresentables are recorded
//! as data with injectivity/surjectivity flags, and left to the caller to
//! interpret.

use std::sync::Arc;

use crate::difun::{diyo_difunctor, product_difunctor, Difunctor};
use crate::engine::{Budget, BudgetExceeded};
use crate::fincat::{FinCategory, InputError, MorId, ObjId};
use crate::paranat::{check_paranatural, enumerate_paranaturals, Formulation, Paranatural};
use crate::value::Value;

/// The transformation DiYo(J,I) => Γ induced by x in Γ(I,J): a splice
/// (into: J->K, from: K->I) is sent to neg(from)(pos(into)(x)).
pub fn diyo_forward(
    gamma: &Arc<Difunctor>,
    i: ObjId,
    j: ObjId,
    x: &Value,
) -> Result<Paranatural, InputError> {
    let base = &gamma.base;
    if gamma.cell(i, j).position(x).is_none() {
        return Err(InputError::Other(format!(
            "{x} is not an element of the cell at ({},{})",
            base.object_label(i),
            base.object_label(j)
        )));
    }
    let dy = Arc::new(diyo_difunctor(base.clone(), j, i));
    let components = base
        .objects()
        .map(|k| {
            dy.diag(k)
                .elems
                .iter()
                .map(|splice| {
                    let (into, from) = match splice {
                        Value::Pair(a, b) => (as_mor(base, a), as_mor(base, b)),
                        _ => unreachable!(),
                    };
                    let moved = gamma.pos_value(i, into, x);
                    let moved = gamma.neg_value(from, k, moved);
                    gamma.diag(k).position(moved).expect("landed in the diagonal")
                })
                .collect()
        })
        .collect();
    let psi = Paranatural { source: dy, target: gamma.clone(), components };
    // Paranaturality is a consequence of the splice-morphism equations;
    // verified here rather than assumed.
    debug_assert!(check_paranatural(&psi, Formulation::Elementwise).ok());
    Ok(psi)
}

fn as_mor(base: &FinCategory, v: &Value) -> MorId {
    match v {
        Value::Mor(l) => base.mor_by_label(l).expect("splice leg is a morphism"),
        _ => unreachable!("splice leg shape"),
    }
}

/// Evaluates a transformation DiYo(I,I) => Γ at the identity splice.
pub fn diyo_reflect(psi: &Paranatural, i: ObjId) -> Value {
    let base = &psi.source.base;
    let id = base.identity(i);
    let splice = Value::pair(Value::mor(base.mor_label(id)), Value::mor(base.mor_label(id)));
    psi.apply(i, &splice).clone()
}

/// One cell of the diYoneda probe report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiYonedaCell {
    pub i: String,
    pub j: String,
    /// |Γ(I,J)|
    pub lhs: usize,
    /// Number of enumerated transformations DiYo(J,I) => Γ; `None` when the
    /// enumeration hit the limit and the cell is unknown.
    pub rhs: Option<usize>,
    pub injective: Option<bool>,
    pub surjective: Option<bool>,
    /// For diagonal cells: reflect ∘ forward = id on Γ(I,I).
    pub retraction: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiYonedaProbe {
    pub cells: Vec<DiYonedaCell>,
    pub all_bijective: bool,
    pub incomplete_cells: usize,
}

/// Compares Γ(I,J) against the enumerated transformations DiYo(J,I) => Γ
/// under the forward map, per cell.
pub fn probe_diyoneda(
    gamma: &Arc<Difunctor>,
    limit: usize,
    budget: &Budget,
) -> Result<DiYonedaProbe, BudgetExceeded> {
    let base = &gamma.base;
    let mut cells = Vec::new();
    let mut all_bijective = true;
    let mut incomplete = 0usize;
    for i in base.objects() {
        for j in base.objects() {
            let lhs_elems = &gamma.cell(i, j).elems;
            let dy = Arc::new(diyo_difunctor(base.clone(), j, i));
            let enumerated = enumerate_paranaturals(&dy, gamma, limit, budget)?;
            let mut cell = DiYonedaCell {
                i: base.object_label(i).to_string(),
                j: base.object_label(j).to_string(),
                lhs: lhs_elems.len(),
                rhs: None,
                injective: None,
                surjective: None,
                retraction: None,
            };
            if enumerated.truncated {
                incomplete += 1;
                all_bijective = false;
                cells.push(cell);
                continue;
            }
            let images: Vec<Vec<Vec<usize>>> = lhs_elems
                .iter()
                .map(|x| diyo_forward(gamma, i, j, x).expect("element of cell").components)
                .collect();
            let injective =
                (0..images.len()).all(|a| (a + 1..images.len()).all(|b| images[a] != images[b]));
            let surjective = enumerated
                .transformations
                .iter()
                .all(|t| images.contains(&t.components));
            cell.rhs = Some(enumerated.transformations.len());
            cell.injective = Some(injective);
            cell.surjective = Some(surjective);
            if i == j {
                let retraction = lhs_elems.iter().all(|x| {
                    let psi = diyo_forward(gamma, i, i, x).expect("element of diagonal");
                    diyo_reflect(&psi, i) == *x
                });
                cell.retraction = Some(retraction);
            }
            if !(injective && surjective) {
                all_bijective = false;
            }
            cells.push(cell);
        }
    }
    Ok(DiYonedaProbe { cells, all_bijective, incomplete_cells: incomplete })
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ExponentialError {
    #[error("enumeration limit exceeded in exponential cell ({i},{j})")]
    CellLimit { i: String, j: String },
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// The exponential Γ^Δ together with the enumerated families behind each
/// cell, kept in canonical order so serialization is stable across runs.
pub struct Exponential {
    pub delta: Arc<Difunctor>,
    pub gamma: Arc<Difunctor>,
    pub difunctor: Arc<Difunctor>,
}

/// Diagonal elements of DiYo(j,i) x Δ at K as values, in cell order.
fn tagged_splices(base: &FinCategory, delta: &Difunctor, j: ObjId, i: ObjId, k: ObjId) -> Vec<Value> {
    let mut out = Vec::new();
    for into in base.hom(j, k) {
        for from in base.hom(k, i) {
            for d in &delta.diag(k).elems {
                out.push(Value::pair(
                    Value::pair(Value::mor(base.mor_label(into)), Value::mor(base.mor_label(from))),
                    d.clone(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn split_tagged(v: &Value) -> (&Value, &Value, &Value) {
    match v {
        Value::Pair(splice, d) => match splice.as_ref() {
            Value::Pair(into, from) => (into, from, d),
            _ => unreachable!(),
        },
        _ => unreachable!(),
    }
}

/// Builds Γ^Δ: the cell at (I,J) is the set of transformations
/// DiYo(J,I) x Δ => Γ, stored by their canonical family serialization, with
/// actions given by precomposing splice legs.
pub fn exponential(
    delta: &Arc<Difunctor>,
    gamma: &Arc<Difunctor>,
    limit: usize,
    budget: &Budget,
) -> Result<Exponential, ExponentialError> {
    let base = &gamma.base;
    let n = base.object_count();
    let mut cell_values: Vec<Vec<Value>> = Vec::with_capacity(n * n);
    for i in base.objects() {
        for j in base.objects() {
            let dy = diyo_difunctor(base.clone(), j, i);
            let dom = Arc::new(product_difunctor(&dy, delta));
            let enumerated = enumerate_paranaturals(&dom, gamma, limit, budget)?;
            if enumerated.truncated {
                return Err(ExponentialError::CellLimit {
                    i: base.object_label(i).to_string(),
                    j: base.object_label(j).to_string(),
                });
            }
            cell_values.push(enumerated.transformations.iter().map(|f| f.canonical_value()).collect());
        }
    }
    let cv = cell_values.clone();
    let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
    let (dl1, dl2) = (delta.clone(), delta.clone());
    let difunctor = Difunctor::from_parts(
        base.clone(),
        move |i, j| cv[i.0 * n + j.0].clone(),
        // neg m: I0 -> I1 sends psi over DiYo(J,I1) to
        // psi'(into, from, d) = psi(into, m∘from, d).
        move |m, j, v| {
            let i0 = b2.mor(m).dom;
            transform_family(&b2, &dl1, v, j, i0, |into, from| {
                let f = b2.compose(as_mor(&b2, from), m);
                (into.clone(), Value::mor(b2.mor_label(f)))
            })
        },
        // pos m: J0 -> J1 sends psi over DiYo(J0,I) to
        // psi'(into, from, d) = psi(into∘m, from, d).
        move |i, m, v| {
            let j1 = b3.mor(m).cod;
            transform_family(&b3, &dl2, v, j1, i, |into, from| {
                let g = b3.compose(as_mor(&b3, into), m);
                (Value::mor(b3.mor_label(g)), from.clone())
            })
        },
    );
    let _ = b1;
    Ok(Exponential { delta: delta.clone(), gamma: gamma.clone(), difunctor: Arc::new(difunctor) })
}

/// Rebuilds a family value over DiYo(j_new, i_new) x Δ by rerouting each
/// tagged splice through `leg_map` and looking the image up in the old
/// family table.
fn transform_family(
    base: &Arc<FinCategory>,
    delta: &Difunctor,
    family: &Value,
    j_new: ObjId,
    i_new: ObjId,
    leg_map: impl Fn(&Value, &Value) -> (Value, Value),
) -> Value {
    Value::table(
        base.objects()
            .map(|k| {
                let old_table = family.apply(&Value::atom(base.object_label(k)));
                let entries = tagged_splices(base, delta, j_new, i_new, k)
                    .into_iter()
                    .map(|elem| {
                        let (into, from, d) = split_tagged(&elem);
                        let (o_into, o_from) = leg_map(into, from);
                        let old_elem = Value::pair(Value::pair(o_into, o_from), d.clone());
                        let img = old_table.apply(&old_elem).clone();
                        (elem, img)
                    })
                    .collect();
                (Value::atom(base.object_label(k)), Value::table(entries))
            })
            .collect(),
    )
}

/// Evaluation Γ^Δ x Δ => Γ at I: (psi, d) -> psi_I(id, id, d).
pub fn eval_morphism(expo: &Exponential, i: ObjId, psi: &Value, d: &Value) -> Value {
    let base = &expo.gamma.base;
    let id = Value::mor(base.mor_label(base.identity(i)));
    psi.apply(&Value::atom(base.object_label(i)))
        .apply(&Value::pair(Value::pair(id.clone(), id), d.clone()))
        .clone()
}

/// Currying report: both directions constructed explicitly, with the
/// round-trip outcome recorded rather than asserted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentialProbe {
    pub lhs_count: usize,
    pub rhs_count: usize,
    pub curry_total: bool,
    pub uncurry_total: bool,
    pub bijection: bool,
}

/// Compares Paranat(Θ x Δ, Γ) with Paranat(Θ, Γ^Δ) under explicit currying
/// and uncurrying.
pub fn probe_exponential(
    theta: &Arc<Difunctor>,
    delta: &Arc<Difunctor>,
    gamma: &Arc<Difunctor>,
    limit: usize,
    budget: &Budget,
) -> Result<ExponentialProbe, ExponentialError> {
    let base = &gamma.base;
    let expo = exponential(delta, gamma, limit, budget)?;
    let dom = Arc::new(product_difunctor(theta, delta));
    let lhs = enumerate_paranaturals(&dom, gamma, limit, budget)?;
    let rhs = enumerate_paranaturals(theta, &expo.difunctor, limit, budget)?;
    if lhs.truncated || rhs.truncated {
        return Err(ExponentialError::CellLimit { i: "*".to_string(), j: "*".to_string() });
    }

    // curry(alpha)_I(theta-elem) is the family K |-> ((into,from),d) |->
    // alpha_K(neg(from)(pos(into)(theta-elem)), d).
    let curry = |alpha: &Paranatural| -> Option<Paranatural> {
        let mut components = Vec::new();
        for i in base.objects() {
            let mut comp = Vec::new();
            for t in &theta.diag(i).elems {
                let fam = Value::table(
                    base.objects()
                        .map(|k| {
                            let entries = tagged_splices(base, delta, i, i, k)
                                .into_iter()
                                .map(|elem| {
                                    let (into, from, d) = split_tagged(&elem);
                                    let moved = theta.pos_value(i, as_mor(base, into), t);
                                    let moved = theta.neg_value(as_mor(base, from), k, moved);
                                    let v = alpha
                                        .apply(k, &Value::pair(moved.clone(), d.clone()))
                                        .clone();
                                    (elem, v)
                                })
                                .collect();
                            (Value::atom(base.object_label(k)), Value::table(entries))
                        })
                        .collect(),
                );
                comp.push(expo.difunctor.diag(i).position(&fam)?);
            }
            components.push(comp);
        }
        Some(Paranatural {
            source: theta.clone(),
            target: expo.difunctor.clone(),
            components,
        })
    };

    let uncurry = |beta: &Paranatural| -> Option<Paranatural> {
        let mut components = Vec::new();
        for i in base.objects() {
            let mut comp = Vec::new();
            for pair in &dom.diag(i).elems {
                let (t, d) = match pair {
                    Value::Pair(a, b) => (a.as_ref(), b.as_ref()),
                    _ => unreachable!(),
                };
                let fam = beta.apply(i, t);
                let v = eval_morphism(&expo, i, fam, d);
                comp.push(gamma.diag(i).position(&v)?);
            }
            components.push(comp);
        }
        Some(Paranatural { source: dom.clone(), target: gamma.clone(), components })
    };

    let mut curry_total = true;
    let mut uncurry_total = true;
    let mut bijection = lhs.transformations.len() == rhs.transformations.len();
    let mut curried = Vec::new();
    for alpha in &lhs.transformations {
        match curry(alpha) {
            Some(c) => {
                if !rhs.transformations.iter().any(|r| r.components == c.components) {
                    bijection = false;
                }
                curried.push(Some(c));
            }
            None => {
                curry_total = false;
                bijection = false;
                curried.push(None);
            }
        }
    }
    // Round trip both ways.
    for (alpha, c) in lhs.transformations.iter().zip(&curried) {
        match c {
            Some(c) => match uncurry(c) {
                Some(u) => {
                    if u.components != alpha.components {
                        bijection = false;
                    }
                }
                None => {
                    uncurry_total = false;
                    bijection = false;
                }
            },
            None => {}
        }
    }
    for beta in &rhs.transformations {
        match uncurry(beta) {
            Some(u) => match curry(&u) {
                Some(c) => {
                    if c.components != beta.components {
                        bijection = false;
                    }
                }
                None => {
                    curry_total = false;
                    bijection = false;
                }
            },
            None => {
                uncurry_total = false;
                bijection = false;
            }
        }
    }
    Ok(ExponentialProbe {
        lhs_count: lhs.transformations.len(),
        rhs_count: rhs.transformations.len(),
        curry_total,
        uncurry_total,
        bijection,
    })
}
