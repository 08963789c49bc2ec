//! Constraint verification over a parsed SQL statement, and the inverse
//! mapping that reconstructs constraints from a reference query.
//!
//! Every check looks for a construct anywhere in the statement, including
//! subqueries and CTE bodies. Nothing here touches a database.

mod ast;

pub use ast::{
    parse_sql, Comparison, FunctionCall, OrderItem, ParseError, PredicateClause, QueryBlock, SelectBlock, SqlAst,
    StatementKind,
};

use crate::types::{
    CompareOp, Constraint, ConstraintKind, ConstraintParam, Extremum, Recency, SchemaDescription, Violation,
};

const RANK_FUNCTIONS: [&str; 3] = ["RANK", "DENSE_RANK", "ROW_NUMBER"];

/// Checks one constraint using column names alone to decide date-likeness.
pub fn check_constraint(ast: &SqlAst, c: &Constraint) -> Option<Violation> {
    check_constraint_with(ast, c, None)
}

/// Checks one constraint; `schema` lets declared column types mark a
/// column as date-like for Temporal checks.
pub fn check_constraint_with(ast: &SqlAst, c: &Constraint, schema: Option<&SchemaDescription>) -> Option<Violation> {
    if satisfied(ast, c, schema) {
        None
    } else {
        Some(Violation::constraint(c.clone(), violation_message(c)))
    }
}

/// Violations for every unsatisfied constraint, ordered by kind then
/// parameter regardless of input order.
pub fn check_all(ast: &SqlAst, constraints: &[Constraint]) -> Vec<Violation> {
    check_all_with(ast, constraints, None)
}

pub fn check_all_with(ast: &SqlAst, constraints: &[Constraint], schema: Option<&SchemaDescription>) -> Vec<Violation> {
    let mut ordered: Vec<&Constraint> = constraints.iter().collect();
    ordered.sort_by(|a, b| a.key().cmp(&b.key()));
    ordered.into_iter().filter_map(|c| check_constraint_with(ast, c, schema)).collect()
}

fn satisfied(ast: &SqlAst, c: &Constraint, schema: Option<&SchemaDescription>) -> bool {
    match c.kind {
        ConstraintKind::Distinct => {
            ast.selects.iter().any(|s| s.distinct || !s.group_by.is_empty())
                || ast.functions.iter().any(|f| f.distinct_arg)
        }
        ConstraintKind::TopK => match c.limit() {
            Some(n) => ast.queries.iter().any(|q| !q.order_by.is_empty() && q.limit == Some(n as u64)),
            None => false,
        },
        ConstraintKind::Ranking => ast.window_functions().any(|f| RANK_FUNCTIONS.contains(&f.name.as_str())),
        ConstraintKind::Count => ast.has_function("COUNT"),
        ConstraintKind::Sum => ast.has_function("SUM"),
        ConstraintKind::Average => ast.has_function("AVG"),
        ConstraintKind::Percent => {
            ast.selects.iter().any(|s| s.projection_has_division || s.projection_has_times_hundred)
        }
        // Either direction is accepted; the superlative word often disagrees
        // with the sort direction the data needs ("worst" by rank number).
        ConstraintKind::Extreme => {
            ast.has_function("MAX")
                || ast.has_function("MIN")
                || ast.queries.iter().any(|q| !q.order_by.is_empty() && q.limit == Some(1))
        }
        ConstraintKind::Temporal => {
            let want = match c.param {
                Some(ConstraintParam::Recency(r)) => r,
                _ => Recency::Latest,
            };
            temporal_evidence(ast, schema).contains(&want)
        }
        ConstraintKind::Compare => match c.param {
            Some(ConstraintParam::Compare(op)) => ast.comparisons.iter().any(|cmp| cmp.op == op),
            _ => false,
        },
        ConstraintKind::LiteralPresence => match c.literal_value() {
            Some(v) => normalize_literal(&ast.raw_text).contains(&normalize_literal(v)),
            None => false,
        },
    }
}

/// Text-level normalisation for literal matching: lowercase, quotes removed.
pub fn normalize_literal(s: &str) -> String {
    s.chars().filter(|c| !matches!(c, '\'' | '"' | '`')).flat_map(char::to_lowercase).collect()
}

fn violation_message(c: &Constraint) -> String {
    let t = &c.trigger;
    match (c.kind, &c.param) {
        (ConstraintKind::Distinct, _) => "Question asks for unique values but SQL lacks DISTINCT or GROUP BY".into(),
        (ConstraintKind::TopK, Some(ConstraintParam::Limit(n))) => format!("\"{t}\" requires ORDER BY ... LIMIT {n}"),
        (ConstraintKind::Ranking, _) => {
            format!("\"{t}\" requires a ranking window function (RANK, DENSE_RANK or ROW_NUMBER with OVER)")
        }
        (ConstraintKind::Count, _) => format!("\"{t}\" requires COUNT"),
        (ConstraintKind::Percent, _) => {
            format!("\"{t}\" requires a percentage calculation (division or multiplication by 100.0 in SELECT)")
        }
        (ConstraintKind::Sum, _) => format!("\"{t}\" requires SUM"),
        (ConstraintKind::Average, _) => format!("\"{t}\" requires AVG"),
        (ConstraintKind::Extreme, _) => format!("\"{t}\" requires MAX/MIN or ORDER BY ... LIMIT 1"),
        (ConstraintKind::Temporal, Some(ConstraintParam::Recency(Recency::Earliest))) => {
            format!("\"{t}\" requires ORDER BY a date/time column ASC (or MIN over it)")
        }
        (ConstraintKind::Temporal, _) => {
            format!("\"{t}\" requires ORDER BY a date/time column DESC (or MAX over it)")
        }
        (ConstraintKind::Compare, Some(ConstraintParam::Compare(op))) => {
            format!("\"{t}\" requires a {} comparison in WHERE or HAVING", op.symbol())
        }
        (ConstraintKind::LiteralPresence, Some(ConstraintParam::Literal(v))) => format!("\"{v}\" must appear in SQL"),
        (kind, _) => format!("\"{t}\" requires a {kind} construct"),
    }
}

/// True when the column name or its declared type suggests a date/time.
pub fn is_date_like(column: &str, schema: Option<&SchemaDescription>) -> bool {
    let name = column.to_ascii_lowercase();
    if ["date", "time", "year"].iter().any(|k| name.contains(k)) {
        return true;
    }
    schema.is_some_and(|s| {
        s.declared_types(column).any(|t| {
            let t = t.to_ascii_lowercase();
            t.contains("date") || t.contains("time")
        })
    })
}

/// Recency directions the statement demonstrably implements.
fn temporal_evidence(ast: &SqlAst, schema: Option<&SchemaDescription>) -> Vec<Recency> {
    let mut out = Vec::new();
    for q in &ast.queries {
        for item in &q.order_by {
            if !item.aggregated && item.columns.iter().any(|col| is_date_like(col, schema)) {
                out.push(if item.descending { Recency::Latest } else { Recency::Earliest });
            }
        }
    }
    for f in &ast.functions {
        if (f.name == "MAX" || f.name == "MIN") && f.columns.iter().any(|col| is_date_like(col, schema)) {
            out.push(if f.name == "MAX" { Recency::Latest } else { Recency::Earliest });
        }
    }
    out
}

/// Reconstructs the constraints a reference query embodies.
pub fn derive_constraints_from_sql(ast: &SqlAst) -> Vec<Constraint> {
    derive_constraints_from_sql_with(ast, None)
}

/// Schema-aware form of [`derive_constraints_from_sql`]. The result is
/// sorted and deduplicated on (kind, param); triggers name the SQL construct.
pub fn derive_constraints_from_sql_with(ast: &SqlAst, schema: Option<&SchemaDescription>) -> Vec<Constraint> {
    let mut out = Vec::new();
    if ast.selects.iter().any(|s| s.distinct) || ast.functions.iter().any(|f| f.distinct_arg) {
        out.push(Constraint::simple(ConstraintKind::Distinct, "DISTINCT"));
    }
    for q in &ast.queries {
        if q.order_by.is_empty() {
            continue;
        }
        match q.limit {
            Some(n @ 1..=0xFFFF_FFFF) => {
                out.push(Constraint::top_k(n as u32, format!("LIMIT {n}")));
                if n == 1 {
                    let dir = if q.order_by[0].descending { Extremum::Max } else { Extremum::Min };
                    out.push(Constraint::extreme(dir, "ORDER BY ... LIMIT 1"));
                }
            }
            _ => {}
        }
    }
    if ast.window_functions().any(|f| RANK_FUNCTIONS.contains(&f.name.as_str())) {
        out.push(Constraint::simple(ConstraintKind::Ranking, "OVER"));
    }
    for (name, kind) in [("COUNT", ConstraintKind::Count), ("SUM", ConstraintKind::Sum), ("AVG", ConstraintKind::Average)] {
        if ast.has_function(name) {
            out.push(Constraint::simple(kind, name));
        }
    }
    if ast.selects.iter().any(|s| s.projection_has_division) {
        out.push(Constraint::simple(ConstraintKind::Percent, "/"));
    }
    if ast.has_function("MAX") {
        out.push(Constraint::extreme(Extremum::Max, "MAX"));
    }
    if ast.has_function("MIN") {
        out.push(Constraint::extreme(Extremum::Min, "MIN"));
    }
    for r in temporal_evidence(ast, schema) {
        let trigger = match r {
            Recency::Latest => "DESC",
            Recency::Earliest => "ASC",
        };
        out.push(Constraint::temporal(r, trigger));
    }
    for cmp in &ast.comparisons {
        out.push(Constraint::compare(cmp.op, cmp.op.symbol()));
    }
    for lit in &ast.predicate_literals {
        out.push(Constraint::literal(lit.clone(), lit.clone()));
    }
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    out.dedup_by(|a, b| a.key() == b.key());
    out
}

/// Distinct comparison operators used in predicates, in first-seen order.
pub fn predicate_ops(ast: &SqlAst) -> Vec<CompareOp> {
    let mut ops = Vec::new();
    for c in &ast.comparisons {
        if !ops.contains(&c.op) {
            ops.push(c.op);
        }
    }
    ops
}
