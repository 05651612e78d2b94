//! Single-variable polymorphic types: parsing, variance splitting, symbolic
//! free-theorem emission, and brute-force checking of candidate
//! implementations against the transport condition at finite carriers.

pub mod term;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::{parse_value, Value};
use term::{empty_env, Evaluator, Term, TermError, TmVal};

// ---------------------------------------------------------------------------
// Types and their grammar
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeExpr {
    Var(String),
    Unit,
    Bool,
    Nat,
    List(Box<TypeExpr>),
    Prod(Box<TypeExpr>, Box<TypeExpr>),
    Sum(Box<TypeExpr>, Box<TypeExpr>),
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
    Forall(String, Box<TypeExpr>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("type syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("expected a forall type, got {0}")]
    NotForall(String),
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Precedence: arrow (lowest, right-assoc) < sum < prod < atoms.
        fn go(t: &TypeExpr, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
            let this = match t {
                TypeExpr::Forall(..) => 0,
                TypeExpr::Arrow(..) => 1,
                TypeExpr::Sum(..) => 2,
                TypeExpr::Prod(..) => 3,
                _ => 4,
            };
            if this < prec {
                write!(f, "(")?;
            }
            match t {
                TypeExpr::Var(a) => write!(f, "{a}")?,
                TypeExpr::Unit => write!(f, "Unit")?,
                TypeExpr::Bool => write!(f, "Bool")?,
                TypeExpr::Nat => write!(f, "Nat")?,
                TypeExpr::List(x) => {
                    write!(f, "List ")?;
                    go(x, f, 4)?;
                }
                TypeExpr::Prod(a, b) => {
                    go(a, f, 4)?;
                    write!(f, " * ")?;
                    go(b, f, 3)?;
                }
                TypeExpr::Sum(a, b) => {
                    go(a, f, 3)?;
                    write!(f, " + ")?;
                    go(b, f, 2)?;
                }
                TypeExpr::Arrow(a, b) => {
                    go(a, f, 2)?;
                    write!(f, " -> ")?;
                    go(b, f, 1)?;
                }
                TypeExpr::Forall(a, b) => {
                    write!(f, "forall {a}. ")?;
                    go(b, f, 0)?;
                }
            }
            if this < prec {
                write!(f, ")")?;
            }
            Ok(())
        }
        go(self, f, 0)
    }
}

/// Parses `forall a. T` with arrows right-associative, `*`/`+` binding
/// tighter than `->`, `List T` tightest, and parentheses. At most one type
/// variable is allowed; more is an unsupported-feature error.
pub fn parse_type(input: &str) -> Result<TypeExpr, TypeError> {
    let mut p = TyParser { src: input, pos: 0 };
    p.skip_ws();
    let t = if p.eat_word("forall") {
        let var = p.ident()?;
        if !p.eat(".") {
            return Err(p.err("expected '.' after forall variable"));
        }
        let body = p.parse_arrow()?;
        TypeExpr::Forall(var, Box::new(body))
    } else {
        p.parse_arrow()?
    };
    p.skip_ws();
    if p.pos < p.src.len() {
        if p.rest().starts_with("forall") || p.eat_word("forall") {
            return Err(TypeError::Unsupported(
                "only a single outermost type variable is supported".to_string(),
            ));
        }
        return Err(p.err("trailing input"));
    }
    check_single_variable(&t)?;
    Ok(t)
}

fn check_single_variable(t: &TypeExpr) -> Result<(), TypeError> {
    fn free_vars(t: &TypeExpr, out: &mut Vec<String>) {
        match t {
            TypeExpr::Var(a) => {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
            TypeExpr::List(x) => free_vars(x, out),
            TypeExpr::Prod(a, b) | TypeExpr::Sum(a, b) | TypeExpr::Arrow(a, b) => {
                free_vars(a, out);
                free_vars(b, out);
            }
            TypeExpr::Forall(..) => {}
            _ => {}
        }
    }
    match t {
        TypeExpr::Forall(a, body) => {
            if contains_forall(body) {
                return Err(TypeError::Unsupported(
                    "only a single outermost type variable is supported".to_string(),
                ));
            }
            let mut vs = Vec::new();
            free_vars(body, &mut vs);
            vs.retain(|v| v != a);
            if !vs.is_empty() {
                return Err(TypeError::Unsupported(format!(
                    "unbound type variable {}",
                    vs[0]
                )));
            }
            Ok(())
        }
        other => {
            if contains_forall(other) {
                return Err(TypeError::Unsupported(
                    "forall is only allowed at the outermost position".to_string(),
                ));
            }
            let mut vs = Vec::new();
            free_vars(other, &mut vs);
            if vs.len() > 1 {
                return Err(TypeError::Unsupported(format!(
                    "more than one type variable: {} and {}",
                    vs[0], vs[1]
                )));
            }
            Ok(())
        }
    }
}

fn contains_forall(t: &TypeExpr) -> bool {
    match t {
        TypeExpr::Forall(..) => true,
        TypeExpr::List(x) => contains_forall(x),
        TypeExpr::Prod(a, b) | TypeExpr::Sum(a, b) | TypeExpr::Arrow(a, b) => {
            contains_forall(a) || contains_forall(b)
        }
        _ => false,
    }
}

struct TyParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> TyParser<'a> {
    fn err(&self, msg: &str) -> TypeError {
        TypeError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn peek_word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|(_, c)| !c.is_alphanumeric() && *c != '_')
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if end == 0 {
            None
        } else {
            Some(&rest[..end])
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.peek_word() == Some(w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, TypeError> {
        match self.peek_word() {
            Some(w) => {
                self.pos += w.len();
                Ok(w.to_string())
            }
            None => Err(self.err("expected identifier")),
        }
    }

    fn parse_arrow(&mut self) -> Result<TypeExpr, TypeError> {
        let lhs = self.parse_sum()?;
        if self.eat("->") {
            let rhs = self.parse_arrow()?;
            Ok(TypeExpr::Arrow(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn parse_sum(&mut self) -> Result<TypeExpr, TypeError> {
        let mut acc = self.parse_prod()?;
        while {
            self.skip_ws();
            self.rest().starts_with('+')
        } {
            self.pos += 1;
            let rhs = self.parse_prod()?;
            acc = TypeExpr::Sum(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_prod(&mut self) -> Result<TypeExpr, TypeError> {
        let mut acc = self.parse_atom()?;
        while {
            self.skip_ws();
            self.rest().starts_with('*')
        } {
            self.pos += 1;
            let rhs = self.parse_atom()?;
            acc = TypeExpr::Prod(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_atom(&mut self) -> Result<TypeExpr, TypeError> {
        self.skip_ws();
        if self.eat("(") {
            let t = self.parse_arrow()?;
            if !self.eat(")") {
                return Err(self.err("expected ')'"));
            }
            return Ok(t);
        }
        if self.eat_word("forall") {
            return Err(TypeError::Unsupported(
                "forall is only allowed at the outermost position".to_string(),
            ));
        }
        if self.eat_word("Unit") {
            return Ok(TypeExpr::Unit);
        }
        if self.eat_word("Bool") {
            return Ok(TypeExpr::Bool);
        }
        if self.eat_word("Nat") {
            return Ok(TypeExpr::Nat);
        }
        if self.eat_word("List") {
            let inner = self.parse_atom()?;
            return Ok(TypeExpr::List(Box::new(inner)));
        }
        let w = self.ident()?;
        Ok(TypeExpr::Var(w))
    }
}

// ---------------------------------------------------------------------------
// Variance splitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Pos,
    Neg,
}

impl Polarity {
    fn flip(self) -> Polarity {
        match self {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
        }
    }
}

/// A type expression with every variable occurrence marked by the parity of
/// the arrow-domain nestings above it; variable-free subtrees collapse to
/// constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemTy {
    VarOcc(Polarity),
    Closed(TypeExpr),
    List(Box<SemTy>),
    Prod(Box<SemTy>, Box<SemTy>),
    Sum(Box<SemTy>, Box<SemTy>),
    Arrow(Box<SemTy>, Box<SemTy>),
}

fn mentions(t: &TypeExpr, alpha: &str) -> bool {
    match t {
        TypeExpr::Var(a) => a == alpha,
        TypeExpr::List(x) => mentions(x, alpha),
        TypeExpr::Prod(a, b) | TypeExpr::Sum(a, b) | TypeExpr::Arrow(a, b) => {
            mentions(a, alpha) || mentions(b, alpha)
        }
        _ => false,
    }
}

/// Marks each occurrence of `alpha` positive or negative by arrow-domain
/// parity; subtrees without `alpha` become constants.
pub fn split_variance(t: &TypeExpr, alpha: &str) -> SemTy {
    split_at(t, alpha, Polarity::Pos)
}

fn split_at(t: &TypeExpr, alpha: &str, pol: Polarity) -> SemTy {
    if !mentions(t, alpha) {
        return SemTy::Closed(t.clone());
    }
    match t {
        TypeExpr::Var(_) => SemTy::VarOcc(pol),
        TypeExpr::List(x) => SemTy::List(Box::new(split_at(x, alpha, pol))),
        TypeExpr::Prod(a, b) => SemTy::Prod(
            Box::new(split_at(a, alpha, pol)),
            Box::new(split_at(b, alpha, pol)),
        ),
        TypeExpr::Sum(a, b) => SemTy::Sum(
            Box::new(split_at(a, alpha, pol)),
            Box::new(split_at(b, alpha, pol)),
        ),
        TypeExpr::Arrow(a, b) => SemTy::Arrow(
            Box::new(split_at(a, alpha, pol.flip())),
            Box::new(split_at(b, alpha, pol)),
        ),
        TypeExpr::Forall(..) => unreachable!("forall below the binder is rejected at parse time"),
        _ => unreachable!("closed leaves are handled above"),
    }
}

/// True when no occurrence carries the given polarity.
pub fn lacks_polarity(s: &SemTy, p: Polarity) -> bool {
    match s {
        SemTy::VarOcc(q) => *q != p,
        SemTy::Closed(_) => true,
        SemTy::List(x) => lacks_polarity(x, p),
        SemTy::Prod(a, b) | SemTy::Sum(a, b) | SemTy::Arrow(a, b) => {
            lacks_polarity(a, p) && lacks_polarity(b, p)
        }
    }
}

// ---------------------------------------------------------------------------
// Finite semantics
// ---------------------------------------------------------------------------

/// Which carrier instantiates an argument position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inst {
    A,
    B,
}

/// A finite instantiation context: two carriers, a transport table
/// i2 : A -> B, and the bounds that keep Nat and List cells finite.
pub struct SemCtx<'a> {
    pub a: &'a [Value],
    pub b: &'a [Value],
    pub i2: &'a Value,
    pub nat_bound: u64,
    pub list_bound: usize,
}

impl<'a> SemCtx<'a> {
    pub fn carrier(&self, i: Inst) -> &'a [Value] {
        match i {
            Inst::A => self.a,
            Inst::B => self.b,
        }
    }
}

/// Enumerates the cell of a marked type at the given instantiation of the
/// negative and positive argument.
pub fn sem_set(s: &SemTy, ctx: &SemCtx<'_>, ni: Inst, pi: Inst) -> Vec<Value> {
    let mut out = match s {
        SemTy::VarOcc(Polarity::Pos) => ctx.carrier(pi).to_vec(),
        SemTy::VarOcc(Polarity::Neg) => ctx.carrier(ni).to_vec(),
        SemTy::Closed(t) => closed_values(t, ctx),
        SemTy::List(x) => crate::difun::all_lists(&sem_set(x, ctx, ni, pi), ctx.list_bound),
        SemTy::Prod(a, b) => {
            let xs = sem_set(a, ctx, ni, pi);
            let ys = sem_set(b, ctx, ni, pi);
            let mut v = Vec::with_capacity(xs.len() * ys.len());
            for x in &xs {
                for y in &ys {
                    v.push(Value::pair(x.clone(), y.clone()));
                }
            }
            v
        }
        SemTy::Sum(a, b) => {
            let mut v: Vec<Value> =
                sem_set(a, ctx, ni, pi).into_iter().map(Value::inl).collect();
            v.extend(sem_set(b, ctx, ni, pi).into_iter().map(Value::inr));
            v
        }
        SemTy::Arrow(a, b) => all_tables(&sem_set(a, ctx, ni, pi), &sem_set(b, ctx, ni, pi)),
    };
    out.sort();
    out.dedup();
    out
}

fn closed_values(t: &TypeExpr, ctx: &SemCtx<'_>) -> Vec<Value> {
    match t {
        TypeExpr::Unit => vec![Value::atom("unit")],
        TypeExpr::Bool => vec![Value::atom("false"), Value::atom("true")],
        // Nat is the bounded initial segment; the bound is part of the
        // report, never silent.
        TypeExpr::Nat => (0..=ctx.nat_bound).map(|n| Value::atom(n.to_string())).collect(),
        TypeExpr::List(x) => crate::difun::all_lists(&closed_values(x, ctx), ctx.list_bound),
        TypeExpr::Prod(a, b) => {
            let xs = closed_values(a, ctx);
            let ys = closed_values(b, ctx);
            let mut v = Vec::new();
            for x in &xs {
                for y in &ys {
                    v.push(Value::pair(x.clone(), y.clone()));
                }
            }
            v
        }
        TypeExpr::Sum(a, b) => {
            let mut v: Vec<Value> = closed_values(a, ctx).into_iter().map(Value::inl).collect();
            v.extend(closed_values(b, ctx).into_iter().map(Value::inr));
            v
        }
        TypeExpr::Arrow(a, b) => all_tables(&closed_values(a, ctx), &closed_values(b, ctx)),
        TypeExpr::Var(_) | TypeExpr::Forall(..) => unreachable!("closed type"),
    }
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Orient {
    Fwd,
    Bwd,
}

impl Orient {
    fn flip(self) -> Orient {
        match self {
            Orient::Fwd => Orient::Bwd,
            Orient::Bwd => Orient::Fwd,
        }
    }
}

fn move_insts(d: Polarity, o: Orient, ni: Inst, pi: Inst) -> (Inst, Inst) {
    let moved = match o {
        Orient::Fwd => Inst::B,
        Orient::Bwd => Inst::A,
    };
    match d {
        Polarity::Pos => (ni, moved),
        Polarity::Neg => (moved, pi),
    }
}

/// Moves a value along i2 at the `d`-marked occurrences. Arrow values are
/// rebuilt tables (pre/post composition); only raw occurrences apply i2
/// pointwise, and those are always forward by polarity coherence.
fn transport(
    s: &SemTy,
    ctx: &SemCtx<'_>,
    d: Polarity,
    o: Orient,
    ni: Inst,
    pi: Inst,
    v: &Value,
) -> Value {
    match s {
        SemTy::VarOcc(p) => {
            if *p == d {
                assert_eq!(o, Orient::Fwd, "backward transport at a raw occurrence");
                ctx.i2.apply(v).clone()
            } else {
                v.clone()
            }
        }
        SemTy::Closed(_) => v.clone(),
        SemTy::List(x) => match v {
            Value::List(items) => Value::List(
                items.iter().map(|it| transport(x, ctx, d, o, ni, pi, it)).collect(),
            ),
            _ => unreachable!("list value"),
        },
        SemTy::Prod(a, b) => match v {
            Value::Pair(x, y) => Value::pair(
                transport(a, ctx, d, o, ni, pi, x),
                transport(b, ctx, d, o, ni, pi, y),
            ),
            _ => unreachable!("pair value"),
        },
        SemTy::Sum(a, b) => match v {
            Value::Inl(x) => Value::inl(transport(a, ctx, d, o, ni, pi, x)),
            Value::Inr(x) => Value::inr(transport(b, ctx, d, o, ni, pi, x)),
            _ => unreachable!("sum value"),
        },
        SemTy::Arrow(a, b) => {
            let (tni, tpi) = move_insts(d, o, ni, pi);
            let dom_tgt = sem_set(a, ctx, tni, tpi);
            Value::table(
                dom_tgt
                    .into_iter()
                    .map(|z| {
                        let z_back = transport(a, ctx, d, o.flip(), tni, tpi, &z);
                        let out = v.apply(&z_back);
                        (z, transport(b, ctx, d, o, ni, pi, out))
                    })
                    .collect(),
            )
        }
    }
}

/// map⁺ i2 : ⟦s⟧(X, A) -> ⟦s⟧(X, B), with the negative side held at `ni`.
pub fn map_pos(s: &SemTy, ctx: &SemCtx<'_>, ni: Inst, v: &Value) -> Value {
    transport(s, ctx, Polarity::Pos, Orient::Fwd, ni, Inst::A, v)
}

/// map⁻ i2 : ⟦s⟧(B, Y) -> ⟦s⟧(A, Y), with the positive side held at `pi`.
pub fn map_neg(s: &SemTy, ctx: &SemCtx<'_>, pi: Inst, v: &Value) -> Value {
    transport(s, ctx, Polarity::Neg, Orient::Bwd, Inst::B, pi, v)
}

// ---------------------------------------------------------------------------
// Symbolic map terms
// ---------------------------------------------------------------------------

struct Fresh(u64);

impl Fresh {
    fn next(&mut self, base: &str) -> String {
        self.0 += 1;
        format!("{base}{}", self.0)
    }
}

fn emit(s: &SemTy, d: Polarity, o: Orient, fresh: &mut Fresh) -> Term {
    match s {
        SemTy::VarOcc(p) => {
            if *p == d {
                assert_eq!(o, Orient::Fwd);
                Term::I2
            } else {
                Term::Id
            }
        }
        SemTy::Closed(_) => Term::Id,
        SemTy::List(x) => {
            let inner = emit(x, d, o, fresh);
            if inner.is_id() {
                Term::Id
            } else {
                Term::MapList(Box::new(inner))
            }
        }
        SemTy::Prod(a, b) => {
            let ea = emit(a, d, o, fresh);
            let eb = emit(b, d, o, fresh);
            if ea.is_id() && eb.is_id() {
                Term::Id
            } else {
                let p = fresh.next("p");
                Term::lam(
                    &p,
                    Term::PairT(
                        Box::new(Term::app(ea, Term::app(Term::Fst, Term::var(&p)))),
                        Box::new(Term::app(eb, Term::app(Term::Snd, Term::var(&p)))),
                    ),
                )
            }
        }
        SemTy::Sum(a, b) => {
            let ea = emit(a, d, o, fresh);
            let eb = emit(b, d, o, fresh);
            if ea.is_id() && eb.is_id() {
                Term::Id
            } else {
                let sv = fresh.next("s");
                let l = fresh.next("l");
                let r = fresh.next("r");
                Term::lam(
                    &sv,
                    Term::Case(
                        Box::new(Term::var(&sv)),
                        l.clone(),
                        Box::new(Term::InlT(Box::new(Term::app(ea, Term::var(&l))))),
                        r.clone(),
                        Box::new(Term::InrT(Box::new(Term::app(eb, Term::var(&r))))),
                    ),
                )
            }
        }
        SemTy::Arrow(a, b) => {
            let pre = emit(a, d, o.flip(), fresh);
            let post = emit(b, d, o, fresh);
            if pre.is_id() && post.is_id() {
                Term::Id
            } else {
                let h = fresh.next("h");
                Term::lam(&h, Term::comp(post, Term::comp(Term::var(&h), pre)))
            }
        }
    }
}

/// The symbolic morphism parts of a marked type: `(map⁺ i2, map⁻ i2)` as
/// beta-normal terms over the `i2` constant.
pub fn derive_maps(s: &SemTy) -> (Term, Term) {
    let pos = emit(s, Polarity::Pos, Orient::Fwd, &mut Fresh(0));
    let neg = emit(s, Polarity::Neg, Orient::Bwd, &mut Fresh(0));
    (pos, neg)
}

/// Beta/composition normalization for display and for evaluating raw
/// theorem instances.
pub fn normalize(t: &Term) -> Term {
    let mut t = t.clone();
    for _ in 0..10_000 {
        let (next, changed) = step(&t);
        t = next;
        if !changed {
            return t;
        }
    }
    t
}

fn step(t: &Term) -> (Term, bool) {
    use Term::*;
    match t {
        App(f, a) => match f.as_ref() {
            Lam(x, b) => (subst(b, x, a), true),
            Comp(g, h) => (
                Term::app(
                    (**g).clone(),
                    Term::app((**h).clone(), (**a).clone()),
                ),
                true,
            ),
            Id => ((**a).clone(), true),
            Fst => {
                if let PairT(x, _) = a.as_ref() {
                    ((**x).clone(), true)
                } else {
                    step_under(t)
                }
            }
            Snd => {
                if let PairT(_, y) = a.as_ref() {
                    ((**y).clone(), true)
                } else {
                    step_under(t)
                }
            }
            _ => step_under(t),
        },
        _ => step_under(t),
    }
}

fn step_under(t: &Term) -> (Term, bool) {
    use Term::*;
    macro_rules! two {
        ($ctor:expr, $a:expr, $b:expr) => {{
            let (a2, c1) = step($a);
            if c1 {
                return ($ctor(Box::new(a2), Box::new((**$b).clone())), true);
            }
            let (b2, c2) = step($b);
            ($ctor(Box::new((**$a).clone()), Box::new(b2)), c2)
        }};
    }
    match t {
        App(a, b) => two!(App, a, b),
        Comp(a, b) => two!(Comp, a, b),
        PairT(a, b) => two!(PairT, a, b),
        ConsT(a, b) => two!(ConsT, a, b),
        Lam(x, b) => {
            let (b2, c) = step(b);
            (Lam(x.clone(), Box::new(b2)), c)
        }
        MapList(g) => {
            let (g2, c) = step(g);
            (MapList(Box::new(g2)), c)
        }
        InlT(a) => {
            let (a2, c) = step(a);
            (InlT(Box::new(a2)), c)
        }
        InrT(a) => {
            let (a2, c) = step(a);
            (InrT(Box::new(a2)), c)
        }
        Case(s, x, l, y, r) => {
            match s.as_ref() {
                InlT(v) => return (subst(l, x, v), true),
                InrT(v) => return (subst(r, y, v), true),
                _ => {}
            }
            let (s2, c) = step(s);
            (Case(Box::new(s2), x.clone(), l.clone(), y.clone(), r.clone()), c)
        }
        other => (other.clone(), false),
    }
}

fn subst(t: &Term, x: &str, v: &Term) -> Term {
    use Term::*;
    match t {
        Var(y) if y == x => v.clone(),
        Var(_) | Id | I2 | Fst | Snd | TrueT | FalseT | UnitT | NatT(_) | NilT => t.clone(),
        Lam(y, b) => {
            if y == x {
                t.clone()
            } else if free_in(v, y) {
                // Capture: rename the binder.
                let fresh = format!("{y}_");
                let renamed = subst(b, y, &Var(fresh.clone()));
                Lam(fresh, Box::new(subst(&renamed, x, v)))
            } else {
                Lam(y.clone(), Box::new(subst(b, x, v)))
            }
        }
        App(a, b) => App(Box::new(subst(a, x, v)), Box::new(subst(b, x, v))),
        Comp(a, b) => Comp(Box::new(subst(a, x, v)), Box::new(subst(b, x, v))),
        PairT(a, b) => PairT(Box::new(subst(a, x, v)), Box::new(subst(b, x, v))),
        InlT(a) => InlT(Box::new(subst(a, x, v))),
        InrT(a) => InrT(Box::new(subst(a, x, v))),
        Case(s, a, l, b, r) => {
            let l2 = if a == x { (**l).clone() } else { subst(l, x, v) };
            let r2 = if b == x { (**r).clone() } else { subst(r, x, v) };
            Case(Box::new(subst(s, x, v)), a.clone(), Box::new(l2), b.clone(), Box::new(r2))
        }
        If(c, a, b) => If(
            Box::new(subst(c, x, v)),
            Box::new(subst(a, x, v)),
            Box::new(subst(b, x, v)),
        ),
        ConsT(a, b) => ConsT(Box::new(subst(a, x, v)), Box::new(subst(b, x, v))),
        LRec(z, c, xs) => LRec(
            Box::new(subst(z, x, v)),
            Box::new(subst(c, x, v)),
            Box::new(subst(xs, x, v)),
        ),
        NRec(z, s, n) => NRec(
            Box::new(subst(z, x, v)),
            Box::new(subst(s, x, v)),
            Box::new(subst(n, x, v)),
        ),
        MapList(g) => MapList(Box::new(subst(g, x, v))),
        Let(y, a, b) => {
            let b2 = if y == x { (**b).clone() } else { subst(b, x, v) };
            Let(y.clone(), Box::new(subst(a, x, v)), Box::new(b2))
        }
    }
}

fn free_in(t: &Term, x: &str) -> bool {
    use Term::*;
    match t {
        Var(y) => y == x,
        Lam(y, b) => y != x && free_in(b, x),
        App(a, b) | Comp(a, b) | PairT(a, b) | ConsT(a, b) => free_in(a, x) || free_in(b, x),
        InlT(a) | InrT(a) | MapList(a) => free_in(a, x),
        Case(s, a, l, b, r) => {
            free_in(s, x) || (a != x && free_in(l, x)) || (b != x && free_in(r, x))
        }
        If(c, a, b) => free_in(c, x) || free_in(a, x) || free_in(b, x),
        LRec(z, c, xs) => free_in(z, x) || free_in(c, x) || free_in(xs, x),
        NRec(z, s, n) => free_in(z, x) || free_in(s, x) || free_in(n, x),
        Let(y, a, b) => free_in(a, x) || (y != x && free_in(b, x)),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Free theorems
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equation {
    /// Variables the equation is quantified over, in order of introduction.
    pub forall: Vec<String>,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremBody {
    pub hypotheses: Vec<Equation>,
    pub conclusion: Equation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantifiers {
    pub sets: Vec<String>,
    pub transport: String,
    pub instances: Vec<String>,
    pub domain_vars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeTheorem {
    pub r#type: String,
    pub quantifiers: Quantifiers,
    pub raw: TheoremBody,
    pub normalized: TheoremBody,
}

/// Name for a quantified variable, chosen by the shape of its type.
fn base_name(s: &SemTy) -> &'static str {
    match s {
        SemTy::List(_) => "xs",
        SemTy::Arrow(..) => "k",
        SemTy::Prod(..) => "p",
        SemTy::Closed(TypeExpr::List(_)) => "xs",
        _ => "x",
    }
}

fn sibling(name: &str) -> String {
    // xs -> ys -> zs; x -> y -> z; k -> l.
    let mut chars: Vec<char> = name.chars().collect();
    chars[0] = ((chars[0] as u8) + 1) as char;
    chars.into_iter().collect()
}

/// Fresh argument pattern for pointwise display: products split into
/// component variables.
fn arg_pattern(s: &SemTy, names: &mut Vec<String>, used: &mut Vec<String>) -> Term {
    match s {
        SemTy::Prod(a, b) => {
            let l = arg_pattern(a, names, used);
            let r = arg_pattern(b, names, used);
            Term::PairT(Box::new(l), Box::new(r))
        }
        other => {
            let mut candidate = base_name(other).to_string();
            while used.contains(&candidate) {
                candidate = sibling(&candidate);
            }
            used.push(candidate.clone());
            names.push(candidate.clone());
            Term::var(&candidate)
        }
    }
}

/// Derives the free theorem of a forall type: the raw transport condition
/// and a pointwise-normalized form. When the domain is purely covariant the
/// hypothesis is substituted away; mixed or contravariant hypotheses stay
/// conditional.
pub fn emit_free_theorem(t: &TypeExpr) -> Result<FreeTheorem, TypeError> {
    let (alpha, body) = match t {
        TypeExpr::Forall(a, b) => (a.clone(), (**b).clone()),
        other => return Err(TypeError::NotForall(other.to_string())),
    };
    // Non-arrow bodies go through Unit -> T.
    let (dom, cod) = match body {
        TypeExpr::Arrow(d, c) => ((*d).clone(), (*c).clone()),
        other => (TypeExpr::Unit, other),
    };
    let t1 = split_variance(&dom, &alpha);
    let t2 = split_variance(&cod, &alpha);
    let (m1_pos, m1_neg) = derive_maps(&t1);
    let (m2_pos, m2_neg) = derive_maps(&t2);

    let raw = TheoremBody {
        hypotheses: vec![Equation {
            forall: vec!["d0".into(), "d1".into()],
            lhs: normalize(&Term::app(m1_pos.clone(), Term::var("d0"))).to_string(),
            rhs: normalize(&Term::app(m1_neg.clone(), Term::var("d1"))).to_string(),
        }],
        conclusion: Equation {
            forall: vec![],
            lhs: normalize(&Term::app(
                m2_pos.clone(),
                Term::app(Term::var("f_A"), Term::var("d0")),
            ))
            .to_string(),
            rhs: normalize(&Term::app(
                m2_neg.clone(),
                Term::app(Term::var("f_B"), Term::var("d1")),
            ))
            .to_string(),
        },
    };

    let mut used: Vec<String> = Vec::new();
    let purely_covariant = lacks_polarity(&t1, Polarity::Neg);
    let (d0_term, d1_term, hypotheses, mut domain_vars) = if purely_covariant {
        // d1 is determined: substitute map⁺ i2 d0 for it.
        let mut names = Vec::new();
        let pat = arg_pattern(&t1, &mut names, &mut used);
        let d1 = normalize(&Term::app(m1_pos.clone(), pat.clone()));
        (pat, d1, Vec::new(), names)
    } else {
        let base = base_name(&t1);
        let d0 = format!("{base}_A");
        let d1 = format!("{base}_B");
        used.push(d0.clone());
        used.push(d1.clone());
        // Pointwise hypothesis: apply both sides through the arrows of T1.
        let mut lhs = normalize(&Term::app(m1_pos.clone(), Term::var(&d0)));
        let mut rhs = normalize(&Term::app(m1_neg.clone(), Term::var(&d1)));
        let mut foralls = Vec::new();
        let mut shape = &t1;
        while let SemTy::Arrow(s1, s2) = shape {
            let mut names = Vec::new();
            let pat = arg_pattern(s1, &mut names, &mut used);
            foralls.extend(names);
            lhs = normalize(&Term::app(lhs, pat.clone()));
            rhs = normalize(&Term::app(rhs, pat));
            shape = s2;
        }
        let hyp = Equation { forall: foralls, lhs: lhs.to_string(), rhs: rhs.to_string() };
        (Term::var(&d0), Term::var(&d1), vec![hyp], vec![d0, d1])
    };

    let mut lhs = normalize(&Term::app(m2_pos, Term::app(Term::var("f_A"), d0_term.clone())));
    let mut rhs = normalize(&Term::app(m2_neg, Term::app(Term::var("f_B"), d1_term.clone())));
    let mut conclusion_foralls = Vec::new();
    let mut shape = &t2;
    while let SemTy::Arrow(s1, s2) = shape {
        let mut names = Vec::new();
        let pat = arg_pattern(s1, &mut names, &mut used);
        conclusion_foralls.extend(names);
        lhs = normalize(&Term::app(lhs, pat.clone()));
        rhs = normalize(&Term::app(rhs, pat));
        shape = s2;
    }
    domain_vars.extend(conclusion_foralls.iter().cloned());
    let normalized = TheoremBody {
        hypotheses,
        conclusion: Equation {
            forall: conclusion_foralls,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        },
    };

    Ok(FreeTheorem {
        r#type: t.to_string(),
        quantifiers: Quantifiers {
            sets: vec!["A".into(), "B".into()],
            transport: "i2 : A -> B".into(),
            instances: vec!["f_A".into(), "f_B".into()],
            domain_vars,
        },
        raw,
        normalized,
    })
}

/// Renders a theorem as text, one clause per line.
pub fn theorem_text(thm: &FreeTheorem) -> String {
    let mut out = String::new();
    out.push_str(&format!("type: {}\n", thm.r#type));
    out.push_str("for all sets A, B, every i2 : A -> B, and instances f_A, f_B:\n");
    let eq_line = |e: &Equation| {
        if e.forall.is_empty() {
            format!("{} = {}", e.lhs, e.rhs)
        } else {
            format!("{} = {}   (for all {})", e.lhs, e.rhs, e.forall.join(", "))
        }
    };
    for h in &thm.normalized.hypotheses {
        out.push_str(&format!("  if   {}\n", eq_line(h)));
    }
    let kw = if thm.normalized.hypotheses.is_empty() { "  then " } else { "  then " };
    out.push_str(&format!("{}{}\n", kw, eq_line(&thm.normalized.conclusion)));
    out.push_str("raw instance:\n");
    for h in &thm.raw.hypotheses {
        out.push_str(&format!("  if   {}\n", eq_line(h)));
    }
    out.push_str(&format!("  then {}\n", eq_line(&thm.raw.conclusion)));
    out
}

// ---------------------------------------------------------------------------
// Candidate checking
// ---------------------------------------------------------------------------

/// A candidate implementation: a closed term, or a per-instantiation lookup
/// table keyed by carrier size and canonical argument labels ("_" matches
/// anything at that layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidate {
    Term { term: String },
    Table { table: BTreeMap<String, TableNode> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableNode {
    Leaf(String),
    Branch(BTreeMap<String, TableNode>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("step budget exceeded while evaluating the candidate")]
    Resource,
    #[error("candidate table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub size_a: usize,
    pub size_b: usize,
    pub i2: String,
    pub d0: String,
    pub d1: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub passed: bool,
    pub checked: usize,
    pub nat_bound: u64,
    pub list_bound: usize,
    pub counterexample: Option<Counterexample>,
}

/// Instantiates the type variable at all carriers of the given sizes,
/// enumerates transports and related argument pairs, evaluates the candidate
/// on both sides, and reports the first violating instance.
pub fn check_candidate(
    t: &TypeExpr,
    candidate: &Candidate,
    sizes: &[usize],
    list_bound: usize,
    step_budget: u64,
) -> Result<CheckReport, CheckError> {
    let (alpha, body) = match t {
        TypeExpr::Forall(a, b) => (a.clone(), (**b).clone()),
        other => return Err(CheckError::Type(TypeError::NotForall(other.to_string()))),
    };
    let (dom, cod) = match body {
        TypeExpr::Arrow(d, c) => ((*d).clone(), (*c).clone()),
        other => (TypeExpr::Unit, other),
    };
    let t1 = split_variance(&dom, &alpha);
    let t2 = split_variance(&cod, &alpha);
    let nat_bound = list_bound as u64;
    let mut checked = 0usize;

    for &na in sizes {
        for &nb in sizes {
            let a: Vec<Value> = (0..na).map(|i| Value::atom(format!("a{i}"))).collect();
            let b: Vec<Value> = (0..nb).map(|i| Value::atom(format!("b{i}"))).collect();
            for i2 in all_tables(&a, &b) {
                let ctx = SemCtx { a: &a, b: &b, i2: &i2, nat_bound, list_bound };
                let d0s = sem_set(&t1, &ctx, Inst::A, Inst::A);
                let d1s = sem_set(&t1, &ctx, Inst::B, Inst::B);
                // Bucket by the common image in the (A,B) cell so only pairs
                // satisfying the hypothesis get evaluated.
                let mut by_image: HashMap<Value, Vec<usize>> = HashMap::new();
                for (k, d1) in d1s.iter().enumerate() {
                    by_image.entry(map_neg(&t1, &ctx, Inst::B, d1)).or_default().push(k);
                }
                for d0 in &d0s {
                    let image = map_pos(&t1, &ctx, Inst::A, d0);
                    let Some(matching) = by_image.get(&image) else { continue };
                    let fa_d0 = apply_candidate(candidate, na, &a, d0, &t1, &t2, list_bound, step_budget)?;
                    for &k in matching {
                        let d1 = &d1s[k];
                        checked += 1;
                        let fb_d1 =
                            apply_candidate(candidate, nb, &b, d1, &t1, &t2, list_bound, step_budget)?;
                        let lhs = map_pos(&t2, &ctx, Inst::A, &fa_d0);
                        let rhs = map_neg(&t2, &ctx, Inst::B, &fb_d1);
                        if lhs != rhs {
                            return Ok(CheckReport {
                                passed: false,
                                checked,
                                nat_bound,
                                list_bound,
                                counterexample: Some(Counterexample {
                                    size_a: na,
                                    size_b: nb,
                                    i2: i2.to_string(),
                                    d0: d0.to_string(),
                                    d1: d1.to_string(),
                                    lhs: lhs.to_string(),
                                    rhs: rhs.to_string(),
                                }),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(CheckReport { passed: true, checked, nat_bound, list_bound, counterexample: None })
}

/// Evaluates the candidate at one instantiation and one argument, reifying
/// the result into the semantic codomain.
#[allow(clippy::too_many_arguments)]
fn apply_candidate(
    candidate: &Candidate,
    size: usize,
    carrier: &[Value],
    arg: &Value,
    _t1: &SemTy,
    t2: &SemTy,
    list_bound: usize,
    step_budget: u64,
) -> Result<Value, CheckError> {
    match candidate {
        Candidate::Term { term } => {
            let parsed = term::parse_term(term)?;
            let mut ev = Evaluator::new(step_budget);
            let f = ev.eval(&parsed, &empty_env()).map_err(lift_budget)?;
            let out = ev.apply(f, TmVal::Sem(arg.clone())).map_err(lift_budget)?;
            reify(&mut ev, &out, t2, carrier, list_bound).map_err(lift_budget)
        }
        Candidate::Table { table } => {
            let node = table
                .get(&size.to_string())
                .ok_or_else(|| CheckError::Table(format!("no entry for size {size}")))?;
            let looked = match node {
                TableNode::Leaf(s) => s.clone(),
                TableNode::Branch(m) => {
                    let key = arg.to_string();
                    match m.get(&key).or_else(|| m.get("_")) {
                        Some(TableNode::Leaf(s)) => s.clone(),
                        Some(TableNode::Branch(_)) => {
                            return Err(CheckError::Table(
                                "nested branches below the first argument are not supported"
                                    .to_string(),
                            ))
                        }
                        None => return Err(CheckError::Table(format!("no entry for {key}"))),
                    }
                }
            };
            parse_value(&looked).map_err(CheckError::Table)
        }
    }
}

fn lift_budget(e: TermError) -> CheckError {
    match e {
        TermError::Budget(_) => CheckError::Resource,
        other => CheckError::Term(other),
    }
}

/// Tabulates function-typed results against the semantic domain; ground
/// results convert directly.
pub fn reify(
    ev: &mut Evaluator,
    v: &TmVal,
    s: &SemTy,
    carrier: &[Value],
    list_bound: usize,
) -> Result<Value, TermError> {
    let id_table = Value::table(carrier.iter().map(|x| (x.clone(), x.clone())).collect());
    let ctx = SemCtx {
        a: carrier,
        b: carrier,
        i2: &id_table,
        nat_bound: list_bound as u64,
        list_bound,
    };
    reify_in(ev, v, s, &ctx)
}

fn reify_in(
    ev: &mut Evaluator,
    v: &TmVal,
    s: &SemTy,
    ctx: &SemCtx<'_>,
) -> Result<Value, TermError> {
    match s {
        SemTy::Arrow(s1, s2) => {
            let dom = sem_set(s1, ctx, Inst::A, Inst::A);
            let mut entries = Vec::with_capacity(dom.len());
            for z in dom {
                let out = ev.apply_val(v, TmVal::Sem(z.clone()))?;
                entries.push((z, reify_in(ev, &out, s2, ctx)?));
            }
            Ok(Value::table(entries))
        }
        SemTy::Prod(s1, s2) => match v {
            TmVal::PairV(x, y) => Ok(Value::pair(
                reify_in(ev, x, s1, ctx)?,
                reify_in(ev, y, s2, ctx)?,
            )),
            TmVal::Sem(Value::Pair(x, y)) => Ok(Value::pair(
                reify_in(ev, &TmVal::Sem((**x).clone()), s1, ctx)?,
                reify_in(ev, &TmVal::Sem((**y).clone()), s2, ctx)?,
            )),
            other => term::to_sem_value(other),
        },
        SemTy::Sum(s1, s2) => match v {
            TmVal::InlV(x) => Ok(Value::inl(reify_in(ev, x, s1, ctx)?)),
            TmVal::InrV(x) => Ok(Value::inr(reify_in(ev, x, s2, ctx)?)),
            TmVal::Sem(Value::Inl(x)) => {
                Ok(Value::inl(reify_in(ev, &TmVal::Sem((**x).clone()), s1, ctx)?))
            }
            TmVal::Sem(Value::Inr(x)) => {
                Ok(Value::inr(reify_in(ev, &TmVal::Sem((**x).clone()), s2, ctx)?))
            }
            other => term::to_sem_value(other),
        },
        SemTy::List(s1) => match v {
            TmVal::ListV(items) => Ok(Value::List(
                items
                    .iter()
                    .map(|it| reify_in(ev, it, s1, ctx))
                    .collect::<Result<_, _>>()?,
            )),
            other => term::to_sem_value(other),
        },
        SemTy::Closed(t) => reify_closed(ev, v, t, ctx),
        SemTy::VarOcc(_) => term::to_sem_value(v),
    }
}

fn reify_closed(
    ev: &mut Evaluator,
    v: &TmVal,
    t: &TypeExpr,
    ctx: &SemCtx<'_>,
) -> Result<Value, TermError> {
    match t {
        TypeExpr::Arrow(t1, t2) => {
            let dom = closed_values(t1, ctx);
            let mut entries = Vec::with_capacity(dom.len());
            for z in dom {
                let out = ev.apply_val(v, TmVal::Sem(z.clone()))?;
                entries.push((z, reify_closed(ev, &out, t2, ctx)?));
            }
            Ok(Value::table(entries))
        }
        TypeExpr::List(t1) => match v {
            TmVal::ListV(items) => Ok(Value::List(
                items
                    .iter()
                    .map(|it| reify_closed(ev, it, t1, ctx))
                    .collect::<Result<_, _>>()?,
            )),
            other => term::to_sem_value(other),
        },
        TypeExpr::Prod(t1, t2) => match v {
            TmVal::PairV(x, y) => Ok(Value::pair(
                reify_closed(ev, x, t1, ctx)?,
                reify_closed(ev, y, t2, ctx)?,
            )),
            other => term::to_sem_value(other),
        },
        TypeExpr::Sum(t1, t2) => match v {
            TmVal::InlV(x) => Ok(Value::inl(reify_closed(ev, x, t1, ctx)?)),
            TmVal::InrV(x) => Ok(Value::inr(reify_closed(ev, x, t2, ctx)?)),
            other => term::to_sem_value(other),
        },
        _ => term::to_sem_value(v),
    }
}

/// The insertion-sort candidate used by the sorting demo.
pub fn insertion_sort_term() -> String {
    "let insert = \\lt x ys. lrec (x :: []) (\\h t acc. if lt (x, h) then x :: h :: t else h :: acc) ys in \
     \\lt. \\xs. lrec [] (\\h t acc. insert lt h acc) xs"
        .to_string()
}
