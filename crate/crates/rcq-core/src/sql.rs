//! SQL emission: one WITH clause per distinct RA subexpression, with
//! syntactically equal subexpressions merged, and anti-joins mapped to
//! LEFT JOIN with a null check.

use crate::atom::Atom;
use crate::eval::EvalError;
use crate::ra::{ranf2ra, RAExpr, SelPred};
use crate::syntax::Query;
use std::collections::HashMap;
use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    PostgreSql,
    MySql,
}

impl Dialect {
    pub fn parse(text: &str) -> Option<Dialect> {
        match text {
            "postgresql" | "postgres" => Some(Dialect::PostgreSql),
            "mysql" => Some(Dialect::MySql),
            _ => None,
        }
    }

    fn quote(&self, ident: &str) -> String {
        match self {
            Dialect::PostgreSql => format!("\"{}\"", ident.replace('"', "\"\"")),
            Dialect::MySql => format!("`{}`", ident.replace('`', "``")),
        }
    }

    // materialization hint is the only structural dialect difference
    fn cte_intro(&self) -> &'static str {
        match self {
            Dialect::PostgreSql => "AS MATERIALIZED (",
            Dialect::MySql => "AS (",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SqlOptions {
    pub dialect: Dialect,
    /// Emit a deterministic ORDER BY over all output columns.
    pub order: bool,
}

impl Default for SqlOptions {
    fn default() -> Self {
        SqlOptions {
            dialect: Dialect::PostgreSql,
            order: true,
        }
    }
}

struct Emitter {
    opts: SqlOptions,
    ctes: Vec<(String, String)>,
    seen: HashMap<RAExpr, String>,
}

impl Emitter {
    fn quote(&self, ident: &str) -> String {
        self.opts.dialect.quote(ident)
    }

    fn literal(&self, a: &Atom) -> String {
        a.sql_literal()
    }

    /// Returns the CTE name holding the expression, emitting it on first use.
    fn emit(&mut self, e: &RAExpr) -> String {
        if let Some(name) = self.seen.get(e) {
            return name.clone();
        }
        let body = self.render(e);
        let name = format!("q{}", self.ctes.len());
        self.ctes.push((name.clone(), body));
        self.seen.insert(e.clone(), name.clone());
        name
    }

    fn select_list(&self, cols: &[String], prefix: Option<&str>) -> String {
        cols.iter()
            .map(|c| match prefix {
                Some(p) => format!("{}.{}", p, self.quote(c)),
                None => self.quote(c),
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn render(&mut self, e: &RAExpr) -> String {
        match e {
            RAExpr::Rel { name, cols } => {
                let table = self.quote(name);
                let list = cols
                    .iter()
                    .enumerate()
                    .map(|(i, c)| format!("{} AS {}", self.quote(&format!("x{}", i + 1)), self.quote(c)))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("SELECT DISTINCT {list} FROM {table}")
            }
            RAExpr::AuxA { col } => {
                let table = self.quote(crate::ra::AUX_RELATION);
                format!(
                    "SELECT {} AS {} FROM {table}",
                    self.quote("x1"),
                    self.quote(col)
                )
            }
            RAExpr::Const { col, value } => {
                let table = self.quote(crate::ra::AUX_RELATION);
                format!(
                    "SELECT {} AS {} FROM {table}",
                    self.literal(value),
                    self.quote(col)
                )
            }
            RAExpr::Empty { cols } => {
                let table = self.quote(crate::ra::AUX_RELATION);
                let list = cols
                    .iter()
                    .map(|c| format!("NULL AS {}", self.quote(c)))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("SELECT {list} FROM {table} WHERE 1 = 0")
            }
            RAExpr::Project { input, cols } => {
                let src = self.emit(input);
                format!(
                    "SELECT DISTINCT {} FROM {src}",
                    self.select_list(cols, None)
                )
            }
            RAExpr::DupCol { input, from, to } => {
                let src = self.emit(input);
                let base = self.select_list(&input.columns(), None);
                format!(
                    "SELECT {base}, {} AS {} FROM {src}",
                    self.quote(from),
                    self.quote(to)
                )
            }
            RAExpr::Select { input, pred } => {
                let src = self.emit(input);
                let base = self.select_list(&input.columns(), None);
                match pred {
                    SelPred::ColEqCol(a, b) => format!(
                        "SELECT {base} FROM {src} WHERE {} = {}",
                        self.quote(a),
                        self.quote(b)
                    ),
                    SelPred::ColEqAtom(a, v) => format!(
                        "SELECT {base} FROM {src} WHERE {} = {}",
                        self.quote(a),
                        self.literal(v)
                    ),
                    SelPred::Product { result, lhs, rhs } => {
                        if input.columns().contains(result) {
                            format!(
                                "SELECT {base} FROM {src} WHERE {} = {} * {}",
                                self.quote(result),
                                self.quote(lhs),
                                self.quote(rhs)
                            )
                        } else {
                            format!(
                                "SELECT {base}, {} * {} AS {} FROM {src}",
                                self.quote(lhs),
                                self.quote(rhs),
                                self.quote(result)
                            )
                        }
                    }
                }
            }
            RAExpr::Union(a, b) => {
                let cols = a.columns();
                let left = self.emit(a);
                let right = self.emit(b);
                let list = self.select_list(&cols, None);
                format!("SELECT {list} FROM {left} UNION SELECT {list} FROM {right}")
            }
            RAExpr::Diff(a, b) => {
                let cols = a.columns();
                let left = self.emit(a);
                let right = self.emit(b);
                let list = self.select_list(&cols, None);
                format!("SELECT {list} FROM {left} EXCEPT SELECT {list} FROM {right}")
            }
            RAExpr::Join(a, b) => {
                let acols = a.columns();
                let bcols = b.columns();
                let left = self.emit(a);
                let right = self.emit(b);
                let shared: Vec<&String> =
                    acols.iter().filter(|c| bcols.contains(c)).collect();
                let mut list = self.select_list(&acols, Some("l"));
                let extras: Vec<String> = bcols
                    .iter()
                    .filter(|c| !acols.contains(*c))
                    .map(|c| format!("r.{}", self.quote(c)))
                    .collect();
                if !extras.is_empty() {
                    list = format!("{list}, {}", extras.join(", "));
                }
                if shared.is_empty() {
                    format!("SELECT {list} FROM {left} l CROSS JOIN {right} r")
                } else {
                    let on = shared
                        .iter()
                        .map(|c| format!("l.{q} = r.{q}", q = self.quote(c)))
                        .collect::<Vec<_>>()
                        .join(" AND ");
                    format!("SELECT {list} FROM {left} l JOIN {right} r ON {on}")
                }
            }
            RAExpr::AntiJoin(a, b) => {
                let acols = a.columns();
                let bcols = b.columns();
                let left = self.emit(a);
                let right = self.emit(b);
                let list = self.select_list(&acols, Some("l"));
                let on = bcols
                    .iter()
                    .map(|c| format!("l.{q} = r.{q}", q = self.quote(c)))
                    .collect::<Vec<_>>()
                    .join(" AND ");
                let probe = self.quote(&bcols[0]);
                format!(
                    "SELECT {list} FROM {left} l LEFT JOIN {right} r ON {on} WHERE r.{probe} IS NULL"
                )
            }
            RAExpr::Count {
                input,
                group,
                result,
            } => {
                let src = self.emit(input);
                if group.is_empty() {
                    format!(
                        "SELECT COUNT(*) AS {} FROM {src}",
                        self.quote(result)
                    )
                } else {
                    let list = self.select_list(group, None);
                    format!(
                        "SELECT {list}, COUNT(*) AS {} FROM {src} GROUP BY {list}",
                        self.quote(result)
                    )
                }
            }
        }
    }
}

/// Translates an RA expression into a SQL query text.
pub fn ra2sql(e: &RAExpr, opts: &SqlOptions) -> String {
    let mut emitter = Emitter {
        opts: *opts,
        ctes: Vec::new(),
        seen: HashMap::new(),
    };
    let last = emitter.emit(e);
    let cols = e.columns();
    let list = emitter.select_list(&cols, None);
    let mut out = String::new();
    out.push_str("WITH ");
    for (i, (name, body)) in emitter.ctes.iter().enumerate() {
        if i > 0 {
            out.push_str(",\n     ");
        }
        let _ = write!(out, "{name} {}{body})", opts.dialect.cte_intro());
    }
    let _ = write!(out, "\nSELECT {list} FROM {last}");
    if opts.order {
        let _ = write!(out, " ORDER BY {list}");
    }
    out.push(';');
    out
}

/// Lowers a RANF query through RA directly to SQL.
pub fn ranf2sql(q: &Query, opts: &SqlOptions) -> Result<String, EvalError> {
    Ok(ra2sql(&ranf2ra(q)?, opts))
}

/// DDL plus inserts recreating a structure, including the auxiliary
/// relation. `int_columns` switches column types from TEXT to BIGINT.
pub fn schema_sql(
    s: &crate::structure::Structure,
    sig: &crate::syntax::Signature,
    opts: &SqlOptions,
    int_columns: bool,
) -> String {
    let mut out = String::new();
    let ty = if int_columns { "BIGINT" } else { "TEXT" };
    let mut tables: Vec<(String, usize)> = sig
        .arities
        .iter()
        .map(|(n, k)| (n.clone(), *k))
        .collect();
    tables.push((crate::ra::AUX_RELATION.to_string(), 1));
    for (name, arity) in &tables {
        let table = opts.dialect.quote(name);
        let cols = (1..=*arity)
            .map(|i| format!("{} {}", opts.dialect.quote(&format!("x{i}")), ty))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "DROP TABLE IF EXISTS {table};");
        let _ = writeln!(out, "CREATE TABLE {table} ({cols});");
    }
    let aux_value = if int_columns { "0".to_string() } else { "'0'".to_string() };
    let _ = writeln!(
        out,
        "INSERT INTO {} VALUES ({aux_value});",
        opts.dialect.quote(crate::ra::AUX_RELATION)
    );
    for (name, tuples) in &s.interps {
        let table = opts.dialect.quote(name);
        for t in tuples {
            let vals = t
                .iter()
                .map(|a| match (int_columns, a) {
                    (true, Atom::Int(v)) => v.to_string(),
                    _ => a.sql_literal(),
                })
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(out, "INSERT INTO {table} VALUES ({vals});");
        }
    }
    out
}
