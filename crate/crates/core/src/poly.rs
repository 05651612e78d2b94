//! Polynomial endofunctors on finite sets.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::value::Value;

/// Grammar of polynomial endofunctors: constants, the identity, sums,
/// products, and powers by a finite exponent set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFunctor {
    Const(Vec<String>),
    Id,
    Sum(Box<PolyFunctor>, Box<PolyFunctor>),
    Prod(Box<PolyFunctor>, Box<PolyFunctor>),
    Power(Box<PolyFunctor>, Vec<String>),
}

impl PolyFunctor {
    /// The canonical n-element constant set `c0..c{n-1}`.
    pub fn const_n(n: usize) -> PolyFunctor {
        PolyFunctor::Const((0..n).map(|i| format!("c{i}")).collect())
    }

    pub fn maybe() -> PolyFunctor {
        PolyFunctor::Sum(Box::new(PolyFunctor::const_n(1)), Box::new(PolyFunctor::Id))
    }

    /// Applies the functor to a set of elements. The result is sorted.
    pub fn apply_set(&self, xs: &[Value]) -> Vec<Value> {
        let mut out = match self {
            PolyFunctor::Const(atoms) => atoms.iter().map(Value::atom).collect(),
            PolyFunctor::Id => xs.to_vec(),
            PolyFunctor::Sum(a, b) => {
                let mut v: Vec<Value> = a.apply_set(xs).into_iter().map(Value::inl).collect();
                v.extend(b.apply_set(xs).into_iter().map(Value::inr));
                v
            }
            PolyFunctor::Prod(a, b) => {
                let bs = b.apply_set(xs);
                a.apply_set(xs)
                    .into_iter()
                    .flat_map(|x| bs.iter().map(move |y| Value::pair(x.clone(), y.clone())))
                    .collect()
            }
            PolyFunctor::Power(t, exp) => {
                let ts = t.apply_set(xs);
                let mut acc: Vec<Vec<(Value, Value)>> = vec![Vec::new()];
                for e in exp {
                    let mut next = Vec::new();
                    for partial in &acc {
                        for tv in &ts {
                            let mut p = partial.clone();
                            p.push((Value::atom(e), tv.clone()));
                            next.push(p);
                        }
                    }
                    acc = next;
                }
                acc.into_iter().map(Value::table).collect()
            }
        };
        out.sort();
        out.dedup();
        out
    }

    /// Applies the functor to a function, given as a closure on values.
    pub fn apply_fn(&self, f: &dyn Fn(&Value) -> Value, v: &Value) -> Value {
        match (self, v) {
            (PolyFunctor::Const(_), v) => v.clone(),
            (PolyFunctor::Id, v) => f(v),
            (PolyFunctor::Sum(a, _), Value::Inl(x)) => Value::inl(a.apply_fn(f, x)),
            (PolyFunctor::Sum(_, b), Value::Inr(x)) => Value::inr(b.apply_fn(f, x)),
            (PolyFunctor::Prod(a, b), Value::Pair(x, y)) => {
                Value::pair(a.apply_fn(f, x), b.apply_fn(f, y))
            }
            (PolyFunctor::Power(t, _), Value::Table(entries)) => Value::table(
                entries
                    .iter()
                    .map(|(k, x)| (k.clone(), t.apply_fn(f, x)))
                    .collect(),
            ),
            (t, v) => panic!("value {v} does not match functor shape {t}"),
        }
    }
}

impl fmt::Display for PolyFunctor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyFunctor::Const(atoms) => write!(f, "{}", atoms.len()),
            PolyFunctor::Id => write!(f, "X"),
            PolyFunctor::Sum(a, b) => write!(f, "({a}+{b})"),
            PolyFunctor::Prod(a, b) => write!(f, "({a}*{b})"),
            PolyFunctor::Power(t, e) => write!(f, "({t}^{})", e.len()),
        }
    }
}

/// Parses the textual grammar: `X`, integer constants, `+`, `*`, `^n`,
/// parentheses. `*` binds tighter than `+`; `^` tighter than both.
pub fn parse_poly(input: &str) -> Result<PolyFunctor, String> {
    let tokens = tokenize(input)?;
    let mut pos = 0;
    let t = parse_sum(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(format!("unexpected token {:?}", tokens[pos]));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    X,
    Num(usize),
    Plus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(input: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            'X' | 'x' => {
                chars.next();
                out.push(Tok::X);
            }
            '+' => {
                chars.next();
                out.push(Tok::Plus);
            }
            '*' => {
                chars.next();
                out.push(Tok::Star);
            }
            '^' => {
                chars.next();
                out.push(Tok::Caret);
            }
            '(' => {
                chars.next();
                out.push(Tok::LParen);
            }
            ')' => {
                chars.next();
                out.push(Tok::RParen);
            }
            d if d.is_ascii_digit() => {
                let mut n = 0usize;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        n = n * 10 + v as usize;
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Num(n));
            }
            other => return Err(format!("unexpected character {other:?} in functor expression")),
        }
    }
    Ok(out)
}

fn parse_sum(tokens: &[Tok], pos: &mut usize) -> Result<PolyFunctor, String> {
    let mut acc = parse_prod(tokens, pos)?;
    while tokens.get(*pos) == Some(&Tok::Plus) {
        *pos += 1;
        let rhs = parse_prod(tokens, pos)?;
        acc = PolyFunctor::Sum(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_prod(tokens: &[Tok], pos: &mut usize) -> Result<PolyFunctor, String> {
    let mut acc = parse_power(tokens, pos)?;
    while tokens.get(*pos) == Some(&Tok::Star) {
        *pos += 1;
        let rhs = parse_power(tokens, pos)?;
        acc = PolyFunctor::Prod(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_power(tokens: &[Tok], pos: &mut usize) -> Result<PolyFunctor, String> {
    let base = parse_atom(tokens, pos)?;
    if tokens.get(*pos) == Some(&Tok::Caret) {
        *pos += 1;
        match tokens.get(*pos) {
            Some(Tok::Num(n)) => {
                *pos += 1;
                let exp = (0..*n).map(|i| format!("e{i}")).collect();
                Ok(PolyFunctor::Power(Box::new(base), exp))
            }
            other => Err(format!("expected exponent after '^', got {other:?}")),
        }
    } else {
        Ok(base)
    }
}

fn parse_atom(tokens: &[Tok], pos: &mut usize) -> Result<PolyFunctor, String> {
    match tokens.get(*pos) {
        Some(Tok::X) => {
            *pos += 1;
            Ok(PolyFunctor::Id)
        }
        Some(Tok::Num(n)) => {
            *pos += 1;
            Ok(PolyFunctor::const_n(*n))
        }
        Some(Tok::LParen) => {
            *pos += 1;
            let inner = parse_sum(tokens, pos)?;
            if tokens.get(*pos) != Some(&Tok::RParen) {
                return Err("missing closing parenthesis".to_string());
            }
            *pos += 1;
            Ok(inner)
        }
        other => Err(format!("expected functor atom, got {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maybe_on_singleton() {
        let t = parse_poly("1+X").unwrap();
        let xs = vec![Value::atom("a")];
        let applied = t.apply_set(&xs);
        assert_eq!(
            applied,
            vec![Value::inl(Value::atom("c0")), Value::inr(Value::atom("a"))]
        );
    }

    #[test]
    fn constant_ignores_functions() {
        let t = PolyFunctor::const_n(2);
        let f = |_: &Value| Value::atom("z");
        let v = Value::atom("c1");
        assert_eq!(t.apply_fn(&f, &v), v);
    }

    #[test]
    fn product_maps_componentwise() {
        let t = parse_poly("X*X").unwrap();
        let f = |_: &Value| Value::atom("c");
        let v = Value::pair(Value::atom("a"), Value::atom("b"));
        assert_eq!(t.apply_fn(&f, &v), Value::pair(Value::atom("c"), Value::atom("c")));
    }

    #[test]
    fn functor_laws_small_sets() {
        // Identity and composition preservation, spot-checked exhaustively
        // for carriers of size <= 3.
        let ts = [
            parse_poly("1+X").unwrap(),
            parse_poly("X*X").unwrap(),
            parse_poly("2+X*X").unwrap(),
            parse_poly("X^2").unwrap(),
        ];
        for t in &ts {
            for n in 0..=3usize {
                let xs: Vec<Value> = (0..n).map(|i| Value::atom(format!("x{i}"))).collect();
                let id = |v: &Value| v.clone();
                for v in t.apply_set(&xs) {
                    assert_eq!(t.apply_fn(&id, &v), v);
                }
                // f doubles indices mod n, g rotates; check T(g∘f) = T(g)∘T(f).
                if n > 0 {
                    let f = |v: &Value| match v {
                        Value::Atom(s) => {
                            let i: usize = s[1..].parse().unwrap();
                            Value::atom(format!("x{}", (2 * i) % n))
                        }
                        _ => unreachable!(),
                    };
                    let g = |v: &Value| match v {
                        Value::Atom(s) => {
                            let i: usize = s[1..].parse().unwrap();
                            Value::atom(format!("x{}", (i + 1) % n))
                        }
                        _ => unreachable!(),
                    };
                    let gf = |v: &Value| g(&f(v));
                    for v in t.apply_set(&xs) {
                        assert_eq!(t.apply_fn(&gf, &v), t.apply_fn(&g, &t.apply_fn(&f, &v)));
                    }
                }
            }
        }
    }
}
