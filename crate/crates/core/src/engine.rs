//! Shared search machinery: backtracking enumeration of component families
//! under binary chevron constraints, resource budgets, and a
//! constraint-propagating homomorphism search between explicit structures.

use std::time::Instant;

use crate::difun::DifunctorExpr;
use crate::poly::PolyFunctor;
use crate::value::Value;

/// A soft resource budget: a step counter and an optional wall-clock
/// deadline, checked inside long-running loops.
#[derive(Debug, Clone)]
pub struct Budget {
    pub max_steps: u64,
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("resource budget exceeded: {0}")]
pub struct BudgetExceeded(pub String);

impl Default for Budget {
    fn default() -> Self {
        Budget { max_steps: 200_000_000, deadline: None }
    }
}

impl Budget {
    pub fn with_timeout_seconds(mut self, secs: Option<u64>) -> Self {
        if let Some(s) = secs {
            self.deadline = Some(Instant::now() + std::time::Duration::from_secs(s));
        }
        self
    }

    fn start(&self) -> BudgetState<'_> {
        BudgetState { budget: self, steps: 0 }
    }
}

struct BudgetState<'a> {
    budget: &'a Budget,
    steps: u64,
}

impl BudgetState<'_> {
    fn tick(&mut self) -> Result<(), BudgetExceeded> {
        self.steps += 1;
        if self.steps > self.budget.max_steps {
            return Err(BudgetExceeded(format!("{} search steps", self.steps)));
        }
        if self.steps % 4096 == 0 {
            if let Some(d) = self.budget.deadline {
                if Instant::now() > d {
                    return Err(BudgetExceeded("wall-clock deadline".to_string()));
                }
            }
        }
        Ok(())
    }
}

/// Requires `table0[val(v0)] == table1[val(v1)]`.
#[derive(Debug, Clone)]
pub struct BinaryConstraint {
    pub v0: usize,
    pub v1: usize,
    pub table0: Vec<usize>,
    pub table1: Vec<usize>,
}

/// Enumerate all assignments of `domain_sizes[i]`-valued variables subject
/// to binary constraints.
#[derive(Debug, Clone, Default)]
pub struct FamilyProblem {
    pub domain_sizes: Vec<usize>,
    pub constraints: Vec<BinaryConstraint>,
}

#[derive(Debug, Clone)]
pub struct EnumOutcome {
    pub families: Vec<Vec<usize>>,
    pub truncated: bool,
    pub nodes: u64,
}

/// Depth-first enumeration in variable order, value order ascending, so the
/// output is lexicographic in canonical labels. Constraints are checked as
/// soon as both endpoints are assigned.
pub fn enumerate_families(
    problem: &FamilyProblem,
    limit: usize,
    budget: &Budget,
) -> Result<EnumOutcome, BudgetExceeded> {
    let n = problem.domain_sizes.len();
    // Constraints indexed by the later of their two variables.
    let mut by_var: Vec<Vec<&BinaryConstraint>> = vec![Vec::new(); n.max(1)];
    for c in &problem.constraints {
        by_var[c.v0.max(c.v1)].push(c);
    }
    let mut state = budget.start();
    let mut assignment = vec![0usize; n];
    let mut families = Vec::new();
    let mut truncated = false;

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        var: usize,
        n: usize,
        problem: &FamilyProblem,
        by_var: &[Vec<&BinaryConstraint>],
        assignment: &mut Vec<usize>,
        families: &mut Vec<Vec<usize>>,
        limit: usize,
        truncated: &mut bool,
        state: &mut BudgetState<'_>,
    ) -> Result<(), BudgetExceeded> {
        if var == n {
            if families.len() < limit {
                families.push(assignment.clone());
            } else {
                *truncated = true;
            }
            return Ok(());
        }
        'values: for val in 0..problem.domain_sizes[var] {
            state.tick()?;
            assignment[var] = val;
            for c in &by_var[var] {
                let a = assignment[c.v0];
                let b = assignment[c.v1];
                if c.table0[a] != c.table1[b] {
                    continue 'values;
                }
            }
            dfs(var + 1, n, problem, by_var, assignment, families, limit, truncated, state)?;
            if *truncated {
                return Ok(());
            }
        }
        Ok(())
    }

    dfs(0, n, problem, &by_var, &mut assignment, &mut families, limit, &mut truncated, &mut state)?;
    Ok(EnumOutcome { families, truncated, nodes: state.steps })
}

/// An explicit structure for the homomorphism search: a carrier with a
/// diagonal element of a difunctor expression instantiated at that carrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitStructure {
    pub name: String,
    pub carrier: Vec<Value>,
    pub structure: Value,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum HomSearchError {
    #[error("expression node {0} is not supported in the structure-hom search")]
    Unsupported(String),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Rewrites grammar sugar down to the Const/Var/Prod/Sum/Arrow/ListOf core.
pub fn desugar(expr: &DifunctorExpr) -> Result<DifunctorExpr, HomSearchError> {
    Ok(match expr {
        DifunctorExpr::Const(_) | DifunctorExpr::Var => expr.clone(),
        DifunctorExpr::Prod(a, b) => DifunctorExpr::prod(desugar(a)?, desugar(b)?),
        DifunctorExpr::Sum(a, b) => DifunctorExpr::sum(desugar(a)?, desugar(b)?),
        DifunctorExpr::Arrow(a, b) => DifunctorExpr::arrow(desugar(a)?, desugar(b)?),
        DifunctorExpr::ListOf(e, n) => DifunctorExpr::ListOf(Box::new(desugar(e)?), *n),
        DifunctorExpr::Hom => DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var),
        DifunctorExpr::AlgOf(t) => DifunctorExpr::arrow(poly_to_expr(t), DifunctorExpr::Var),
        DifunctorExpr::CoalgOf(t) => DifunctorExpr::arrow(DifunctorExpr::Var, poly_to_expr(t)),
        DifunctorExpr::DiYo(..) | DifunctorExpr::FromPresheaf(_) | DifunctorExpr::FromCovariant(_) => {
            return Err(HomSearchError::Unsupported(format!("{expr:?}")))
        }
    })
}

/// Polynomial functors embed into the covariant fragment of the grammar.
pub fn poly_to_expr(t: &PolyFunctor) -> DifunctorExpr {
    match t {
        PolyFunctor::Const(atoms) => DifunctorExpr::Const(atoms.clone()),
        PolyFunctor::Id => DifunctorExpr::Var,
        PolyFunctor::Sum(a, b) => DifunctorExpr::sum(poly_to_expr(a), poly_to_expr(b)),
        PolyFunctor::Prod(a, b) => DifunctorExpr::prod(poly_to_expr(a), poly_to_expr(b)),
        PolyFunctor::Power(t, exp) => {
            DifunctorExpr::arrow(DifunctorExpr::Const(exp.clone()), poly_to_expr(t))
        }
    }
}

/// Evaluates the value set of a (desugared) expression at an explicit
/// carrier pair: `neg` instantiates the contravariant argument, `pos` the
/// covariant one.
pub fn sem_cell(
    expr: &DifunctorExpr,
    neg: &[Value],
    pos: &[Value],
) -> Result<Vec<Value>, HomSearchError> {
    let mut out = match expr {
        DifunctorExpr::Const(atoms) => atoms.iter().map(Value::atom).collect(),
        DifunctorExpr::Var => pos.to_vec(),
        DifunctorExpr::Prod(a, b) => {
            let xs = sem_cell(a, neg, pos)?;
            let ys = sem_cell(b, neg, pos)?;
            let mut v = Vec::with_capacity(xs.len() * ys.len());
            for x in &xs {
                for y in &ys {
                    v.push(Value::pair(x.clone(), y.clone()));
                }
            }
            v
        }
        DifunctorExpr::Sum(a, b) => {
            let mut v: Vec<Value> = sem_cell(a, neg, pos)?.into_iter().map(Value::inl).collect();
            v.extend(sem_cell(b, neg, pos)?.into_iter().map(Value::inr));
            v
        }
        DifunctorExpr::Arrow(a, b) => {
            // Domain arguments flipped.
            let dom = sem_cell(a, pos, neg)?;
            let cod = sem_cell(b, neg, pos)?;
            if dom.is_empty() {
                vec![Value::table(Vec::new())]
            } else if cod.is_empty() {
                Vec::new()
            } else {
                let mut acc: Vec<Vec<(Value, Value)>> = vec![Vec::new()];
                for d in &dom {
                    let mut next = Vec::new();
                    for partial in &acc {
                        for c in &cod {
                            let mut p = partial.clone();
                            p.push((d.clone(), c.clone()));
                            next.push(p);
                        }
                    }
                    acc = next;
                }
                acc.into_iter().map(Value::table).collect()
            }
        }
        DifunctorExpr::ListOf(e, bound) => crate::difun::all_lists(&sem_cell(e, neg, pos)?, *bound),
        other => return Err(HomSearchError::Unsupported(format!("{other:?}"))),
    };
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Neg,
    Pos,
}

/// Moves a value along the partial function `pf` at `Var` leaves on the
/// chosen side. `None` when a needed entry of `pf` is still unassigned.
fn transport(
    expr: &DifunctorExpr,
    side: Side,
    pf: &[Option<usize>],
    x_carrier: &[Value],
    y_carrier: &[Value],
    v: &Value,
) -> Option<Value> {
    match (expr, v) {
        (DifunctorExpr::Const(_), v) => Some(v.clone()),
        (DifunctorExpr::Var, v) => match side {
            Side::Neg => Some(v.clone()),
            Side::Pos => {
                let idx = x_carrier.iter().position(|e| e == v)?;
                pf[idx].map(|yi| y_carrier[yi].clone())
            }
        },
        (DifunctorExpr::Prod(a, b), Value::Pair(x, y)) => Some(Value::pair(
            transport(a, side, pf, x_carrier, y_carrier, x)?,
            transport(b, side, pf, x_carrier, y_carrier, y)?,
        )),
        (DifunctorExpr::Sum(a, _), Value::Inl(x)) => {
            Some(Value::inl(transport(a, side, pf, x_carrier, y_carrier, x)?))
        }
        (DifunctorExpr::Sum(_, b), Value::Inr(x)) => {
            Some(Value::inr(transport(b, side, pf, x_carrier, y_carrier, x)?))
        }
        (DifunctorExpr::ListOf(e, _), Value::List(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for it in items {
                out.push(transport(e, side, pf, x_carrier, y_carrier, it)?);
            }
            Some(Value::List(out))
        }
        (e, v) => panic!("transport: value {v} does not match expression {e:?}"),
    }
}

fn check_no_arrow(expr: &DifunctorExpr) -> Result<(), HomSearchError> {
    match expr {
        DifunctorExpr::Const(_) | DifunctorExpr::Var => Ok(()),
        DifunctorExpr::Prod(a, b) | DifunctorExpr::Sum(a, b) => {
            check_no_arrow(a)?;
            check_no_arrow(b)
        }
        DifunctorExpr::ListOf(e, _) => check_no_arrow(e),
        other => Err(HomSearchError::Unsupported(format!(
            "nested {other:?} inside an arrow domain"
        ))),
    }
}

#[derive(Debug, Clone)]
enum Con<'a> {
    MapsTo(usize, usize),
    Defer { e1: &'a DifunctorExpr, e2: &'a DifunctorExpr, z: Value, u: &'a Value, v: &'a Value },
}

/// Decomposes the structure-hom equality `pos(f)(gx) = neg(f)(gy)` into
/// atomic constraints on the entries of `f`. `Ok(false)` means the equality
/// is refuted without consulting `f`.
fn decompose<'a>(
    expr: &'a DifunctorExpr,
    u: &'a Value,
    v: &'a Value,
    x: &[Value],
    y: &[Value],
    out: &mut Vec<Con<'a>>,
) -> Result<bool, HomSearchError> {
    match expr {
        DifunctorExpr::Const(_) => Ok(u == v),
        DifunctorExpr::Var => {
            let xi = x.iter().position(|e| e == u).expect("element of carrier");
            let yi = y.iter().position(|e| e == v).expect("element of carrier");
            out.push(Con::MapsTo(xi, yi));
            Ok(true)
        }
        DifunctorExpr::Prod(a, b) => match (u, v) {
            (Value::Pair(u1, u2), Value::Pair(v1, v2)) => {
                Ok(decompose(a, u1, v1, x, y, out)? && decompose(b, u2, v2, x, y, out)?)
            }
            _ => panic!("product value shape mismatch"),
        },
        DifunctorExpr::Sum(a, b) => match (u, v) {
            (Value::Inl(u1), Value::Inl(v1)) => decompose(a, u1, v1, x, y, out),
            (Value::Inr(u1), Value::Inr(v1)) => decompose(b, u1, v1, x, y, out),
            _ => Ok(false),
        },
        DifunctorExpr::ListOf(e, _) => match (u, v) {
            (Value::List(us), Value::List(vs)) => {
                if us.len() != vs.len() {
                    return Ok(false);
                }
                for (a1, b1) in us.iter().zip(vs) {
                    if !decompose(e, a1, b1, x, y, out)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => panic!("list value shape mismatch"),
        },
        DifunctorExpr::Arrow(e1, e2) => {
            check_no_arrow(e1)?;
            for z in sem_cell(e1, y, x)? {
                out.push(Con::Defer { e1, e2, z, u, v });
            }
            Ok(true)
        }
        other => Err(HomSearchError::Unsupported(format!("{other:?}"))),
    }
}

/// All structure homomorphisms from `(x, gx)` to `(y, gy)`, as function
/// tables on carrier indices. Constraint propagation pins entries forced by
/// the structure before any branching, so reachable deterministic structures
/// (queues) are solved without search.
pub fn enumerate_structure_homs(
    expr: &DifunctorExpr,
    x: &[Value],
    gx: &Value,
    y: &[Value],
    gy: &Value,
    budget: &Budget,
) -> Result<Vec<Vec<usize>>, HomSearchError> {
    let expr = desugar(expr)?;
    let mut cons = Vec::new();
    if !decompose(&expr, gx, gy, x, y, &mut cons)? {
        return Ok(Vec::new());
    }
    if !x.is_empty() && y.is_empty() {
        return Ok(Vec::new());
    }
    let mut state = budget.start();
    let mut solutions = Vec::new();
    let pf = vec![None; x.len()];
    solve(cons, pf, x, y, &mut solutions, &mut state)?;
    solutions.sort();
    solutions.dedup();
    Ok(solutions)
}

type Propagated<'a> = Option<(Vec<Option<usize>>, Vec<Con<'a>>)>;

/// Runs MapsTo unification and defer expansion to a fixed point.
/// `None` means refuted.
fn propagate<'a>(
    mut cons: Vec<Con<'a>>,
    mut pf: Vec<Option<usize>>,
    x: &[Value],
    y: &[Value],
) -> Result<Propagated<'a>, HomSearchError> {
    loop {
        let mut progressed = false;
        let mut pending = Vec::new();
        for con in cons.drain(..) {
            match con {
                Con::MapsTo(xi, yi) => match pf[xi] {
                    None => {
                        pf[xi] = Some(yi);
                        progressed = true;
                    }
                    Some(cur) if cur == yi => {}
                    Some(_) => return Ok(None),
                },
                Con::Defer { e1, e2, z, u, v } => {
                    let zneg = transport(e1, Side::Neg, &pf, x, y, &z)
                        .expect("neg transport needs no assignments");
                    match transport(e1, Side::Pos, &pf, x, y, &z) {
                        Some(zpos) => {
                            let uval = u.apply(&zneg);
                            let vval = v.apply(&zpos);
                            let mut sub = Vec::new();
                            if !decompose(e2, uval, vval, x, y, &mut sub)? {
                                return Ok(None);
                            }
                            pending.extend(sub);
                            progressed = true;
                        }
                        None => pending.push(Con::Defer { e1, e2, z, u, v }),
                    }
                }
            }
        }
        cons = pending;
        if !progressed {
            return Ok(Some((pf, cons)));
        }
    }
}

fn solve<'a>(
    cons: Vec<Con<'a>>,
    pf: Vec<Option<usize>>,
    x: &[Value],
    y: &[Value],
    solutions: &mut Vec<Vec<usize>>,
    state: &mut BudgetState<'_>,
) -> Result<(), HomSearchError> {
    state.tick()?;
    let (pf, pending) = match propagate(cons, pf, x, y)? {
        Some(p) => p,
        None => return Ok(()),
    };
    match pf.iter().position(Option::is_none) {
        None => {
            // A total assignment always lets every defer expand, so nothing
            // can still be pending here.
            debug_assert!(pending.is_empty());
            solutions.push(pf.into_iter().map(Option::unwrap).collect());
            Ok(())
        }
        Some(idx) => {
            for yi in 0..y.len() {
                let mut pf2 = pf.clone();
                pf2[idx] = Some(yi);
                solve(pending.clone(), pf2, x, y, solutions, state)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_enumeration_with_constraint() {
        let p = FamilyProblem {
            domain_sizes: vec![2, 2],
            constraints: vec![BinaryConstraint {
                v0: 0,
                v1: 1,
                table0: vec![0, 1],
                table1: vec![0, 1],
            }],
        };
        let out = enumerate_families(&p, 100, &Budget::default()).unwrap();
        assert_eq!(out.families, vec![vec![0, 0], vec![1, 1]]);
        assert!(!out.truncated);
    }

    #[test]
    fn truncation_flag() {
        let p = FamilyProblem { domain_sizes: vec![3, 3], constraints: vec![] };
        let out = enumerate_families(&p, 4, &Budget::default()).unwrap();
        assert_eq!(out.families.len(), 4);
        assert!(out.truncated);
    }

    #[test]
    fn empty_domain_kills_enumeration() {
        let p = FamilyProblem { domain_sizes: vec![2, 0], constraints: vec![] };
        let out = enumerate_families(&p, 10, &Budget::default()).unwrap();
        assert!(out.families.is_empty());
    }

    #[test]
    fn hom_search_finds_coalgebra_homs() {
        // Streams: q0 |-> (0,q1), q1 |-> (0,q0) maps onto p |-> (0,p).
        let expr = DifunctorExpr::CoalgOf(PolyFunctor::Prod(
            Box::new(PolyFunctor::Const(vec!["0".into(), "1".into()])),
            Box::new(PolyFunctor::Id),
        ));
        let x = vec![Value::atom("q0"), Value::atom("q1")];
        let y = vec![Value::atom("p")];
        let gx = Value::table(vec![
            (Value::atom("q0"), Value::pair(Value::atom("0"), Value::atom("q1"))),
            (Value::atom("q1"), Value::pair(Value::atom("0"), Value::atom("q0"))),
        ]);
        let gy = Value::table(vec![(
            Value::atom("p"),
            Value::pair(Value::atom("0"), Value::atom("p")),
        )]);
        let homs = enumerate_structure_homs(&expr, &x, &gx, &y, &gy, &Budget::default()).unwrap();
        assert_eq!(homs, vec![vec![0, 0]]);
        // No hom onto a 1-headed machine.
        let gr = Value::table(vec![(
            Value::atom("p"),
            Value::pair(Value::atom("1"), Value::atom("p")),
        )]);
        let homs = enumerate_structure_homs(&expr, &x, &gx, &y, &gr, &Budget::default()).unwrap();
        assert!(homs.is_empty());
    }

    #[test]
    fn hom_search_propagates_from_pinned_point() {
        // A pointed set with a successor: Prod(Var, Arrow(Var, Var)). Homs
        // must fix the point and commute with the successor.
        let expr = DifunctorExpr::prod(
            DifunctorExpr::Var,
            DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var),
        );
        let x: Vec<Value> = (0..3).map(|i| Value::atom(format!("a{i}"))).collect();
        let gx = Value::pair(
            Value::atom("a0"),
            Value::table(vec![
                (Value::atom("a0"), Value::atom("a1")),
                (Value::atom("a1"), Value::atom("a2")),
                (Value::atom("a2"), Value::atom("a0")),
            ]),
        );
        let y: Vec<Value> = (0..3).map(|i| Value::atom(format!("b{i}"))).collect();
        let gy = Value::pair(
            Value::atom("b1"),
            Value::table(vec![
                (Value::atom("b0"), Value::atom("b1")),
                (Value::atom("b1"), Value::atom("b2")),
                (Value::atom("b2"), Value::atom("b0")),
            ]),
        );
        let homs = enumerate_structure_homs(&expr, &x, &gx, &y, &gy, &Budget::default()).unwrap();
        // Forced: a0 -> b1, then the cycle pins the rest.
        assert_eq!(homs, vec![vec![1, 2, 0]]);
    }

    #[test]
    fn empty_carrier_has_unique_hom() {
        let expr = DifunctorExpr::arrow(DifunctorExpr::Var, DifunctorExpr::Var);
        let x: Vec<Value> = Vec::new();
        let gx = Value::table(Vec::new());
        let y = vec![Value::atom("b")];
        let gy = Value::table(vec![(Value::atom("b"), Value::atom("b"))]);
        let homs = enumerate_structure_homs(&expr, &x, &gx, &y, &gy, &Budget::default()).unwrap();
        assert_eq!(homs, vec![Vec::<usize>::new()]);
    }
}
