//! Linear priority expressions over a closed vocabulary of node features.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := sign? term (('+' | '-') term)*
//! term   := number '*' ident | ident | number
//! number := digits ('.' digits)? ([eE] [+-]? digits)?
//! ```
//!
//! A bare number is a multiple of `const`. Expressions are kept in
//! canonical form: one term per feature, sorted by feature name, zero
//! coefficients dropped. Printing a canonical expression and parsing it
//! back yields the same expression.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::GraphStats;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Node features an expression may reference. Variant order is the
/// alphabetical order of the names, which is the canonical term order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Const,
    Crit,
    Duration,
    Fanin,
    Fanout,
    Level,
    Pressure,
    Reconv,
    Slack,
}

impl Feature {
    pub const ALL: [Feature; 9] = [
        Feature::Const,
        Feature::Crit,
        Feature::Duration,
        Feature::Fanin,
        Feature::Fanout,
        Feature::Level,
        Feature::Pressure,
        Feature::Reconv,
        Feature::Slack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Const => "const",
            Feature::Crit => "crit",
            Feature::Duration => "duration",
            Feature::Fanin => "fanin",
            Feature::Fanout => "fanout",
            Feature::Level => "level",
            Feature::Pressure => "pressure",
            Feature::Reconv => "reconv",
            Feature::Slack => "slack",
        }
    }

    /// Feature value of node `v`. `pressure` is that of the node's own type.
    pub fn value<T: Real>(self, stats: &GraphStats, v: usize) -> T {
        let s = &stats.nodes[v];
        match self {
            Feature::Const => T::one(),
            Feature::Crit => T::of_u64(s.crit),
            Feature::Duration => T::of_u64(s.duration),
            Feature::Fanin => T::of_u64(s.fanin),
            Feature::Fanout => T::of_u64(s.fanout),
            Feature::Level => T::of_u64(s.level),
            Feature::Pressure => stats.node_pressure(v).value(),
            Feature::Reconv => T::of_u64(s.reconv),
            Feature::Slack => T::of_u64(s.slack),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A canonical linear priority expression `sum_i c_i * feature_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityExpr<T: Real = f64> {
    terms: Vec<(T, Feature)>,
}

impl<T: Real> PriorityExpr<T> {
    /// Builds the canonical expression from arbitrary terms: repeated
    /// features are summed and zero coefficients dropped.
    pub fn from_terms(terms: impl IntoIterator<Item = (T, Feature)>) -> Result<Self> {
        let mut acc: Vec<(T, Feature)> = Vec::new();
        for (c, f) in terms {
            if !c.is_finite() {
                return Err(Error::NonFinite);
            }
            match acc.iter_mut().find(|(_, g)| *g == f) {
                Some(slot) => slot.0 = slot.0 + c,
                None => acc.push((c, f)),
            }
        }
        if acc.iter().any(|(c, _)| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        acc.retain(|(c, _)| !c.is_zero());
        if acc.is_empty() {
            return Err(Error::EmptyExpr);
        }
        acc.sort_by_key(|&(_, f)| f);
        Ok(PriorityExpr { terms: acc })
    }

    pub fn single(feature: Feature) -> Self {
        PriorityExpr {
            terms: vec![(T::one(), feature)],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).expr()
    }

    pub fn terms(&self) -> &[(T, Feature)] {
        &self.terms
    }

    pub fn coefficient(&self, feature: Feature) -> T {
        self.terms
            .iter()
            .find(|(_, f)| *f == feature)
            .map_or_else(T::zero, |&(c, _)| c)
    }

    pub fn features(&self) -> impl Iterator<Item = Feature> + '_ {
        self.terms.iter().map(|&(_, f)| f)
    }

    /// Priority of node `v`. May overflow to infinity for extreme
    /// coefficients; the scheduler treats that as a malformed heuristic.
    pub fn eval(&self, stats: &GraphStats, v: usize) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, &(c, f)| acc + c * f.value::<T>(stats, v))
    }

    /// Term-wise sum. Fails if every term cancels.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        Self::from_terms(self.terms.iter().chain(&other.terms).copied())
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scale(&self, factor: T) -> Result<Self> {
        Self::from_terms(self.terms.iter().map(|&(c, f)| (c * factor, f)))
    }

    /// Same expression in another scalar type.
    pub fn cast<U: Real>(&self) -> Result<PriorityExpr<U>> {
        PriorityExpr::from_terms(self.terms.iter().map(|&(c, f)| (U::of(c.as_f64()), f)))
    }
}

/// The level-based reference priority, `1*level`.
pub fn baseline_priority<T: Real>() -> PriorityExpr<T> {
    PriorityExpr::single(Feature::Level)
}

impl<T: Real> fmt::Display for PriorityExpr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(c, feat)) in self.terms.iter().enumerate() {
            let neg = c.is_sign_negative();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            write!(f, "{}*{}", c.abs(), feat)?;
        }
        Ok(())
    }
}

impl<T: Real> FromStr for PriorityExpr<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl<T: Real> Serialize for PriorityExpr<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, T: Real> Deserialize<'de> for PriorityExpr<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Self::parse(&text).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn fail<R>(&self, message: impl Into<String>) -> Result<R> {
        Err(Error::Syntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr<T: Real>(&mut self) -> Result<PriorityExpr<T>> {
        let mut terms = Vec::new();
        let mut negative = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        loop {
            let (c, f) = self.term::<T>()?;
            terms.push((if negative { -c } else { c }, f));
            if self.eat('+') {
                negative = false;
            } else if self.eat('-') {
                negative = true;
            } else if self.peek().is_none() {
                break;
            } else {
                return self.fail("expected '+', '-' or end of input");
            }
        }
        PriorityExpr::from_terms(terms)
    }

    fn term<T: Real>(&mut self) -> Result<(T, Feature)> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let value = self.number::<T>()?;
                if self.eat('*') {
                    Ok((value, self.ident()?))
                } else {
                    Ok((value, Feature::Const))
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => Ok((T::one(), self.ident()?)),
            Some(c) => self.fail(format!("unexpected character '{c}'")),
            None => self.fail("unexpected end of input"),
        }
    }

    fn number<T: Real>(&mut self) -> Result<T> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        let int = digits(&mut i);
        let mut frac = false;
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            frac = digits(&mut i);
            if !frac {
                self.pos = i;
                return self.fail("expected digits after '.'");
            }
        }
        if !int && !frac {
            return self.fail("malformed number");
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
            } else {
                self.pos = i;
                return self.fail("malformed exponent");
            }
        }
        let text = &self.src[start..i];
        self.pos = i;
        let value: T = match text.parse() {
            Ok(v) => v,
            Err(_) => return self.fail(format!("malformed number `{text}`")),
        };
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(value)
    }

    fn ident(&mut self) -> Result<Feature> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 || rest.as_bytes()[0].is_ascii_digit() {
            return self.fail("expected a feature name");
        }
        self.pos += len;
        rest[..len].parse()
    }
}

/// Parses a heuristic file: one expression per line, `#` starts a comment,
/// blank lines are ignored.
pub fn parse_heuristic_file<T: Real>(text: &str) -> Result<Vec<PriorityExpr<T>>> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(PriorityExpr::parse)
        .collect()
}

pub fn write_heuristic_file<T: Real>(exprs: &[PriorityExpr<T>]) -> String {
    exprs.iter().map(|e| format!("{e}\n")).collect()
}
