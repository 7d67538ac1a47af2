//! Domain values.
//!
//! An [`Atom`] is an opaque database value: either an integer or a piece of
//! text. Atoms are totally ordered (integers before text) so they can live in
//! sorted set containers and produce deterministic output everywhere.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Int(i64),
    Text(String),
}

impl Atom {
    pub fn int(v: i64) -> Self {
        Atom::Int(v)
    }

    pub fn text(v: impl Into<String>) -> Self {
        Atom::Text(v.into())
    }

    /// Renders the atom as a SQL literal for the given quoting style.
    pub fn sql_literal(&self) -> String {
        match self {
            Atom::Int(v) => v.to_string(),
            Atom::Text(s) => format!("'{}'", s.replace('\'', "''")),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Int(v) => write!(f, "{v}"),
            Atom::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_order_before_text() {
        assert!(Atom::int(99) < Atom::text("0"));
        assert!(Atom::int(-3) < Atom::int(4));
        assert!(Atom::text("a") < Atom::text("b"));
    }

    #[test]
    fn display_quotes_text() {
        assert_eq!(Atom::int(42).to_string(), "42");
        assert_eq!(Atom::text("it's").to_string(), "'it''s'");
    }
}
