//! Canonical element values.
//!
//! Every set manipulated by the library (difunctor cells, carriers, algebra
//! structures, enumerated transformation families) stores its elements as
//! [`Value`]s. A `Value` prints in a fixed normal form, so set equality is
//! label equality and every report serializes the same way on every run.

use std::cmp::Ordering;
use std::fmt;

/// A canonical element label.
///
/// Tuples, tagged sums, lists and function tables are kept structured rather
/// than flattened to strings, which keeps actions (pairing, tagging, table
/// lookup) cheap; `Display` produces the canonical printed form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    /// An atomic element of a named finite set.
    Atom(String),
    /// A morphism of the base category, identified by label.
    Mor(String),
    /// An ordered pair.
    Pair(Box<Value>, Box<Value>),
    /// Left injection into a sum.
    Inl(Box<Value>),
    /// Right injection into a sum.
    Inr(Box<Value>),
    /// A finite list.
    List(Vec<Value>),
    /// A function table, sorted by argument.
    Table(Vec<(Value, Value)>),
}

impl Value {
    pub fn atom(s: impl Into<String>) -> Value {
        Value::Atom(s.into())
    }

    pub fn mor(s: impl Into<String>) -> Value {
        Value::Mor(s.into())
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn inl(a: Value) -> Value {
        Value::Inl(Box::new(a))
    }

    pub fn inr(a: Value) -> Value {
        Value::Inr(Box::new(a))
    }

    /// Builds a function table; entries are sorted by argument so the
    /// representation is canonical regardless of insertion order.
    pub fn table(mut entries: Vec<(Value, Value)>) -> Value {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Value::Table(entries)
    }

    /// Looks up a table entry. Panics on non-table values or missing keys;
    /// both indicate an internal invariant break, not user error.
    pub fn apply(&self, arg: &Value) -> &Value {
        match self {
            Value::Table(entries) => entries
                .binary_search_by(|e| e.0.cmp(arg))
                .map(|i| &entries[i].1)
                .unwrap_or_else(|_| panic!("table has no entry for {arg}")),
            other => panic!("applied non-table value {other}"),
        }
    }

    pub fn as_table(&self) -> &[(Value, Value)] {
        match self {
            Value::Table(entries) => entries,
            other => panic!("expected table, got {other}"),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Atom(_) => 0,
            Value::Mor(_) => 1,
            Value::Pair(..) => 2,
            Value::Inl(_) => 3,
            Value::Inr(_) => 4,
            Value::List(_) => 5,
            Value::Table(_) => 6,
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        use Value::*;
        match (self, other) {
            (Atom(a), Atom(b)) | (Mor(a), Mor(b)) => a.cmp(b),
            (Pair(a1, b1), Pair(a2, b2)) => a1.cmp(a2).then_with(|| b1.cmp(b2)),
            (Inl(a), Inl(b)) | (Inr(a), Inr(b)) => a.cmp(b),
            (List(a), List(b)) => a.cmp(b),
            (Table(a), Table(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(s) | Value::Mor(s) => write!(f, "{s}"),
            Value::Pair(a, b) => write!(f, "({a},{b})"),
            Value::Inl(a) => write!(f, "inl({a})"),
            Value::Inr(a) => write!(f, "inr({a})"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Table(entries) => {
                write!(f, "{{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}->{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Parses the canonical printed form back into a [`Value`].
///
/// Only the forms produced by `Display` are accepted. Bare identifiers parse
/// as atoms; whether an identifier denotes a morphism is decided by the
/// caller against the relevant cell, so `Atom` vs `Mor` distinctions are
/// reconciled by [`Value::shape_eq`]-style lookup in cell indexes.
pub fn parse_value(input: &str) -> Result<Value, String> {
    let mut p = ValueParser {
        src: input.as_bytes(),
        pos: 0,
    };
    let v = p.parse()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(format!("trailing input at byte {} in {input:?}", p.pos));
    }
    Ok(v)
}

struct ValueParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> ValueParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> Result<(), String> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' at byte {}", c as char, self.pos))
        }
    }

    fn parse(&mut self) -> Result<Value, String> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.eat(b'(')?;
                let a = self.parse()?;
                self.eat(b',')?;
                let b = self.parse()?;
                self.eat(b')')?;
                Ok(Value::pair(a, b))
            }
            Some(b'[') => {
                self.eat(b'[')?;
                let mut items = Vec::new();
                self.skip_ws();
                if self.peek() == Some(b']') {
                    self.eat(b']')?;
                    return Ok(Value::List(items));
                }
                loop {
                    items.push(self.parse()?);
                    self.skip_ws();
                    if self.peek() == Some(b',') {
                        self.eat(b',')?;
                    } else {
                        break;
                    }
                }
                self.eat(b']')?;
                Ok(Value::List(items))
            }
            Some(b'{') => {
                self.eat(b'{')?;
                let mut entries = Vec::new();
                self.skip_ws();
                if self.peek() == Some(b'}') {
                    self.eat(b'}')?;
                    return Ok(Value::table(entries));
                }
                loop {
                    let k = self.parse()?;
                    self.eat(b'-')?;
                    self.eat(b'>')?;
                    let v = self.parse()?;
                    entries.push((k, v));
                    self.skip_ws();
                    if self.peek() == Some(b',') {
                        self.eat(b',')?;
                    } else {
                        break;
                    }
                }
                self.eat(b'}')?;
                Ok(Value::table(entries))
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c == b','
                        || c == b')'
                        || c == b']'
                        || c == b'}'
                        || c == b'('
                        || (c == b'-' && self.src.get(self.pos + 1) == Some(&b'>'))
                    {
                        break;
                    }
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|e| e.to_string())?
                    .trim()
                    .to_string();
                if word.is_empty() {
                    return Err(format!("empty token at byte {start}"));
                }
                if let Some(rest) = word.strip_prefix("inl") {
                    if rest.is_empty() && self.peek() == Some(b'(') {
                        self.eat(b'(')?;
                        let inner = self.parse()?;
                        self.eat(b')')?;
                        return Ok(Value::inl(inner));
                    }
                }
                if let Some(rest) = word.strip_prefix("inr") {
                    if rest.is_empty() && self.peek() == Some(b'(') {
                        self.eat(b'(')?;
                        let inner = self.parse()?;
                        self.eat(b')')?;
                        return Ok(Value::inr(inner));
                    }
                }
                Ok(Value::Atom(word))
            }
            None => Err("unexpected end of input".to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_roundtrip() {
        let v = Value::table(vec![
            (Value::atom("b"), Value::pair(Value::atom("x"), Value::List(vec![]))),
            (Value::atom("a"), Value::inl(Value::atom("z"))),
        ]);
        let printed = v.to_string();
        assert_eq!(printed, "{a->inl(z),b->(x,[])}");
        let reparsed = parse_value(&printed).unwrap();
        assert_eq!(reparsed, v);
    }

    #[test]
    fn table_sorts_by_argument() {
        let t1 = Value::table(vec![
            (Value::atom("y"), Value::atom("1")),
            (Value::atom("x"), Value::atom("0")),
        ]);
        let t2 = Value::table(vec![
            (Value::atom("x"), Value::atom("0")),
            (Value::atom("y"), Value::atom("1")),
        ]);
        assert_eq!(t1, t2);
    }

    #[test]
    fn ordering_is_total_and_structural() {
        let mut vs = vec![
            Value::List(vec![Value::atom("b")]),
            Value::atom("a"),
            Value::pair(Value::atom("a"), Value::atom("b")),
            Value::atom("A"),
        ];
        vs.sort();
        assert_eq!(vs[0], Value::atom("A"));
        assert_eq!(vs[1], Value::atom("a"));
    }
}
