//! A clause-level summary of one parsed SQL statement.
//!
//! The summary covers every query level (top level, subqueries, CTE
//! bodies) so checks can look for a construct anywhere in the statement.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::LazyLock;

use regex::Regex;
use sqlparser::ast::{
    BinaryOperator, Distinct, DuplicateTreatment, Expr, FunctionArguments, GroupByExpr, LimitClause, OrderByKind,
    OrderBySort, Query, Select, SelectItem, SetExpr, Statement, TableFactor, UnaryOperator, Value, Visit, Visitor,
};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::{Parser, ParserError};
use thiserror::Error;

use crate::types::CompareOp;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error{}: {message}", position_suffix(*.line, *.column))]
pub struct ParseError {
    pub line: Option<u64>,
    pub column: Option<u64>,
    pub message: String,
}

fn position_suffix(line: Option<u64>, column: Option<u64>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        _ => String::new(),
    }
}

impl ParseError {
    fn new(message: impl Into<String>) -> Self {
        let message = message.into();
        static POS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Line: (\d+), Column: (\d+)").unwrap());
        let (line, column) = POS
            .captures(&message)
            .map(|c| (c[1].parse().ok(), c[2].parse().ok()))
            .unwrap_or((None, None));
        Self { line, column, message }
    }
}

impl From<ParserError> for ParseError {
    fn from(e: ParserError) -> Self {
        Self::new(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Select,
    With,
}

/// One ORDER BY key. `columns` lists the column names the key refers to,
/// with SELECT aliases resolved to the columns of the aliased expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: String,
    pub descending: bool,
    pub columns: Vec<String>,
    /// The key (after alias resolution) wraps an aggregate call.
    pub aggregated: bool,
}

/// Query-level clauses (one per `Query` node).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryBlock {
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

/// SELECT-level clauses (one per `SELECT` core).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectBlock {
    pub items: Vec<String>,
    pub distinct: bool,
    pub from: Vec<String>,
    pub where_clause: Option<String>,
    pub group_by: Vec<String>,
    pub having: Option<String>,
    pub projection_has_division: bool,
    pub projection_has_times_hundred: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionCall {
    /// Upper-cased unqualified name.
    pub name: String,
    pub distinct_arg: bool,
    pub windowed: bool,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateClause {
    Where,
    Having,
}

/// An ordering comparison, normalised so a lone literal sits on the right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub op: CompareOp,
    pub clause: PredicateClause,
}

/// Parsed single SELECT/WITH statement plus its clause summary.
#[derive(Debug, Clone)]
pub struct SqlAst {
    pub kind: StatementKind,
    pub raw_text: String,
    pub selects: Vec<SelectBlock>,
    pub queries: Vec<QueryBlock>,
    pub functions: Vec<FunctionCall>,
    pub comparisons: Vec<Comparison>,
    /// Literal values appearing in WHERE/HAVING predicates.
    pub predicate_literals: Vec<String>,
    pub ctes: Vec<String>,
    pub statement: Statement,
}

impl SqlAst {
    pub fn window_functions(&self) -> impl Iterator<Item = &FunctionCall> {
        self.functions.iter().filter(|f| f.windowed)
    }

    pub fn has_function(&self, name: &str) -> bool {
        self.functions.iter().any(|f| f.name == name)
    }

    /// The outermost query level.
    pub fn top_query(&self) -> &QueryBlock {
        &self.queries[0]
    }
}

/// Parses exactly one SELECT or WITH statement (SQLite grammar).
pub fn parse_sql(sql: &str) -> Result<SqlAst, ParseError> {
    if sql.trim().is_empty() {
        return Err(ParseError::new("empty SQL"));
    }
    let mut statements = Parser::parse_sql(&SQLiteDialect {}, sql)?;
    match statements.len() {
        0 => return Err(ParseError::new("empty SQL")),
        1 => {}
        n => {
            return Err(ParseError::new(format!(
                "expected a single SQL statement, found {n}"
            )))
        }
    }
    let statement = statements.pop().unwrap();
    let Statement::Query(query) = &statement else {
        return Err(ParseError::new("only SELECT or WITH statements are accepted"));
    };
    if !is_read_query(&query.body) {
        return Err(ParseError::new("only SELECT or WITH statements are accepted"));
    }
    let kind = if query.with.is_some() { StatementKind::With } else { StatementKind::Select };
    let mut collector = Collector::default();
    let _ = statement.visit(&mut collector);
    Ok(SqlAst {
        kind,
        raw_text: sql.to_string(),
        selects: collector.selects,
        queries: collector.queries,
        functions: collector.functions,
        comparisons: collector.comparisons,
        predicate_literals: collector.literals,
        ctes: collector.ctes,
        statement,
    })
}

fn is_read_query(body: &SetExpr) -> bool {
    match body {
        SetExpr::Select(_) | SetExpr::Values(_) | SetExpr::Table(_) => true,
        SetExpr::Query(q) => is_read_query(&q.body),
        SetExpr::SetOperation { left, right, .. } => is_read_query(left) && is_read_query(right),
        _ => false,
    }
}

#[derive(Default)]
struct Collector {
    selects: Vec<SelectBlock>,
    queries: Vec<QueryBlock>,
    functions: Vec<FunctionCall>,
    comparisons: Vec<Comparison>,
    literals: Vec<String>,
    ctes: Vec<String>,
}

impl Visitor for Collector {
    type Break = ();

    fn pre_visit_query(&mut self, query: &Query) -> ControlFlow<()> {
        if let Some(with) = &query.with {
            self.ctes.extend(with.cte_tables.iter().map(|c| c.alias.name.value.clone()));
        }
        self.queries.push(query_block(query));
        ControlFlow::Continue(())
    }

    fn pre_visit_select(&mut self, select: &Select) -> ControlFlow<()> {
        let mut block = SelectBlock {
            items: select.projection.iter().map(|i| i.to_string()).collect(),
            distinct: matches!(select.distinct, Some(Distinct::Distinct) | Some(Distinct::On(_))),
            from: Vec::new(),
            where_clause: select.selection.as_ref().map(|e| e.to_string()),
            group_by: match &select.group_by {
                GroupByExpr::Expressions(exprs, _) => exprs.iter().map(|e| e.to_string()).collect(),
                GroupByExpr::All(_) => vec!["ALL".into()],
            },
            having: select.having.as_ref().map(|e| e.to_string()),
            ..Default::default()
        };
        for twj in &select.from {
            block.from.push(table_name(&twj.relation));
            block.from.extend(twj.joins.iter().map(|j| table_name(&j.relation)));
        }
        for item in &select.projection {
            let expr = match item {
                SelectItem::UnnamedExpr(e) | SelectItem::ExprWithAlias { expr: e, .. } => e,
                _ => continue,
            };
            shallow_exprs(expr, |e, _| {
                if let Expr::BinaryOp { left, op, right } = e {
                    match op {
                        BinaryOperator::Divide => block.projection_has_division = true,
                        BinaryOperator::Multiply if is_hundred(left) || is_hundred(right) => {
                            block.projection_has_times_hundred = true
                        }
                        _ => {}
                    }
                }
            });
        }
        for (clause, expr) in [(PredicateClause::Where, &select.selection), (PredicateClause::Having, &select.having)] {
            let Some(expr) = expr else { continue };
            shallow_exprs(expr, |e, in_call| {
                if let Expr::BinaryOp { left, op, right } = e {
                    if let Some(mut cmp) = compare_op(op) {
                        if literal_text(left).is_some() && literal_text(right).is_none() {
                            cmp = cmp.mirrored();
                        }
                        self.comparisons.push(Comparison { op: cmp, clause });
                    }
                }
                // function arguments ('%Y', substring offsets) are not filter values
                if let (Expr::Value(v), false) = (e, in_call) {
                    if let Some(text) = value_text(&v.value) {
                        self.literals.push(text);
                    }
                }
            });
        }
        self.selects.push(block);
        ControlFlow::Continue(())
    }

    fn pre_visit_expr(&mut self, expr: &Expr) -> ControlFlow<()> {
        if let Expr::Function(f) = expr {
            let name = f.name.0.last().map(|p| p.to_string()).unwrap_or_default().to_ascii_uppercase();
            let distinct_arg = matches!(
                &f.args,
                FunctionArguments::List(l) if l.duplicate_treatment == Some(DuplicateTreatment::Distinct)
            );
            let mut columns = Vec::new();
            if let FunctionArguments::List(list) = &f.args {
                for arg in &list.args {
                    let _ = arg.visit(&mut IdentCollector(&mut columns));
                }
            }
            self.functions.push(FunctionCall { name, distinct_arg, windowed: f.over.is_some(), columns });
        }
        ControlFlow::Continue(())
    }
}

fn table_name(factor: &TableFactor) -> String {
    match factor {
        TableFactor::Table { name, .. } => name.to_string(),
        TableFactor::Derived { alias, .. } => {
            alias.as_ref().map(|a| format!("({})", a.name.value)).unwrap_or_else(|| "(subquery)".into())
        }
        other => other.to_string(),
    }
}

fn query_block(query: &Query) -> QueryBlock {
    let aliases = match query.body.as_ref() {
        SetExpr::Select(s) => alias_columns(s),
        _ => HashMap::new(),
    };
    let order_by = match &query.order_by {
        Some(ob) => match &ob.kind {
            OrderByKind::Expressions(items) => items
                .iter()
                .map(|item| {
                    let mut columns = Vec::new();
                    let _ = item.expr.visit(&mut IdentCollector(&mut columns));
                    let mut aggregated = contains_aggregate(&item.expr);
                    let mut resolved = Vec::new();
                    for c in columns {
                        match aliases.get(&c.to_ascii_lowercase()) {
                            Some((cols, agg)) => {
                                resolved.extend(cols.iter().cloned());
                                aggregated |= agg;
                            }
                            None => resolved.push(c),
                        }
                    }
                    OrderItem {
                        expr: item.expr.to_string(),
                        descending: matches!(item.options.sort, Some(OrderBySort::Desc)),
                        columns: resolved,
                        aggregated,
                    }
                })
                .collect(),
            OrderByKind::All(_) => Vec::new(),
        },
        None => Vec::new(),
    };
    let (limit, offset) = match &query.limit_clause {
        Some(LimitClause::LimitOffset { limit, offset, .. }) => {
            (limit.as_ref().and_then(expr_u64), offset.as_ref().and_then(|o| expr_u64(&o.value)))
        }
        Some(LimitClause::OffsetCommaLimit { offset, limit }) => (expr_u64(limit), expr_u64(offset)),
        None => (None, None),
    };
    QueryBlock { order_by, limit, offset }
}

fn alias_columns(select: &Select) -> HashMap<String, (Vec<String>, bool)> {
    let mut out = HashMap::new();
    for item in &select.projection {
        if let SelectItem::ExprWithAlias { expr, alias } = item {
            let mut cols = Vec::new();
            let _ = expr.visit(&mut IdentCollector(&mut cols));
            out.insert(alias.value.to_ascii_lowercase(), (cols, contains_aggregate(expr)));
        }
    }
    out
}

const AGGREGATES: [&str; 6] = ["COUNT", "SUM", "AVG", "MIN", "MAX", "TOTAL"];

fn contains_aggregate(expr: &Expr) -> bool {
    let mut found = false;
    shallow_exprs(expr, |e, _| {
        if let Expr::Function(f) = e {
            let name = f.name.0.last().map(|p| p.to_string()).unwrap_or_default().to_ascii_uppercase();
            found |= f.over.is_none() && AGGREGATES.contains(&name.as_str());
        }
    });
    found
}

fn expr_u64(e: &Expr) -> Option<u64> {
    match e {
        Expr::Value(v) => match &v.value {
            Value::Number(n, _) => n.parse().ok(),
            _ => None,
        },
        Expr::Nested(inner) => expr_u64(inner),
        _ => None,
    }
}

fn is_hundred(e: &Expr) -> bool {
    match e {
        Expr::Value(v) => matches!(&v.value, Value::Number(n, _) if n.parse::<f64>() == Ok(100.0)),
        Expr::Nested(inner) => is_hundred(inner),
        _ => false,
    }
}

fn compare_op(op: &BinaryOperator) -> Option<CompareOp> {
    match op {
        BinaryOperator::Gt => Some(CompareOp::Gt),
        BinaryOperator::GtEq => Some(CompareOp::GtEq),
        BinaryOperator::Lt => Some(CompareOp::Lt),
        BinaryOperator::LtEq => Some(CompareOp::LtEq),
        _ => None,
    }
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::Number(n, _) => Some(n.clone()),
        Value::SingleQuotedString(s) | Value::DoubleQuotedString(s) => {
            (!s.trim().is_empty()).then(|| s.clone())
        }
        _ => None,
    }
}

fn literal_text(e: &Expr) -> Option<String> {
    match e {
        Expr::Value(v) => value_text(&v.value),
        Expr::UnaryOp { op: UnaryOperator::Minus | UnaryOperator::Plus, expr } => literal_text(expr),
        Expr::Nested(inner) => literal_text(inner),
        _ => None,
    }
}

/// Calls `f` for every expression under `root` without entering
/// subqueries. The flag tells whether the expression sits inside a
/// function call's arguments.
fn shallow_exprs<F: FnMut(&Expr, bool)>(root: &Expr, f: F) {
    struct Shallow<F> {
        depth: usize,
        calls: usize,
        f: F,
    }
    impl<F: FnMut(&Expr, bool)> Visitor for Shallow<F> {
        type Break = ();
        fn pre_visit_query(&mut self, _: &Query) -> ControlFlow<()> {
            self.depth += 1;
            ControlFlow::Continue(())
        }
        fn post_visit_query(&mut self, _: &Query) -> ControlFlow<()> {
            self.depth -= 1;
            ControlFlow::Continue(())
        }
        fn pre_visit_expr(&mut self, e: &Expr) -> ControlFlow<()> {
            if self.depth == 0 {
                (self.f)(e, self.calls > 0);
            }
            if matches!(e, Expr::Function(_)) {
                self.calls += 1;
            }
            ControlFlow::Continue(())
        }
        fn post_visit_expr(&mut self, e: &Expr) -> ControlFlow<()> {
            if matches!(e, Expr::Function(_)) {
                self.calls -= 1;
            }
            ControlFlow::Continue(())
        }
    }
    let _ = root.visit(&mut Shallow { depth: 0, calls: 0, f });
}

struct IdentCollector<'a>(&'a mut Vec<String>);

impl Visitor for IdentCollector<'_> {
    type Break = ();
    fn pre_visit_expr(&mut self, e: &Expr) -> ControlFlow<()> {
        match e {
            Expr::Identifier(id) => self.0.push(id.value.clone()),
            Expr::CompoundIdentifier(parts) => {
                if let Some(last) = parts.last() {
                    self.0.push(last.value.clone());
                }
            }
            _ => {}
        }
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn select_one() {
        let ast = parse_sql("SELECT 1").unwrap();
        assert_eq!(ast.kind, StatementKind::Select);
        assert_eq!(ast.selects.len(), 1);
        assert_eq!(ast.selects[0].items, vec!["1"]);
        assert!(ast.selects[0].from.is_empty());
        assert_eq!(ast.top_query(), &QueryBlock::default());
    }

    #[test]
    fn rejects_multiple_statements() {
        let err = parse_sql("SELECT a FROM t; DROP TABLE t").unwrap_err();
        assert!(err.message.contains("single SQL statement"), "{err}");
    }

    #[test]
    fn rejects_non_queries_and_garbage() {
        assert!(parse_sql("DELETE FROM t").is_err());
        assert!(parse_sql("SELEC 1").is_err());
        assert!(parse_sql("   ").is_err());
        let err = parse_sql("SELECT FROM WHERE").unwrap_err();
        assert!(err.line.is_some());
    }

    #[test]
    fn case_study_repaired_sql() {
        let ast = parse_sql(fixtures::CASE_STUDY_REPAIRED_SQL).unwrap();
        let top = ast.top_query();
        assert_eq!(top.limit, Some(3));
        assert_eq!(top.order_by.len(), 1);
        assert!(top.order_by[0].descending);
        assert_eq!(ast.selects[0].group_by, vec!["p.category"]);
        assert!(ast.selects[0].projection_has_division);
        assert!(ast.selects[0].projection_has_times_hundred);
        assert_eq!(ast.selects[0].from, vec!["orders", "customers", "products"]);
        assert!(ast.predicate_literals.contains(&"2023".to_string()));
        assert!(ast.predicate_literals.contains(&"CA".to_string()));
        // alias resolves to the columns inside the aggregate
        assert!(top.order_by[0].columns.iter().any(|c| c == "ship_date"));
    }

    #[test]
    fn limit_forms() {
        assert_eq!(parse_sql("SELECT a FROM t LIMIT 2, 3").unwrap().top_query().limit, Some(3));
        let q = parse_sql("SELECT a FROM t LIMIT 3 OFFSET 2").unwrap();
        assert_eq!((q.top_query().limit, q.top_query().offset), (Some(3), Some(2)));
    }

    #[test]
    fn subqueries_and_ctes_are_walked() {
        let ast = parse_sql(
            "WITH best AS (SELECT id, RANK() OVER (ORDER BY s DESC) r FROM t) \
             SELECT COUNT(DISTINCT id) FROM best WHERE r <= (SELECT MAX(r) FROM best WHERE 3 < r)",
        )
        .unwrap();
        assert_eq!(ast.kind, StatementKind::With);
        assert_eq!(ast.ctes, vec!["best"]);
        assert_eq!(ast.window_functions().count(), 1);
        assert!(ast.functions.iter().any(|f| f.name == "COUNT" && f.distinct_arg));
        assert!(ast.has_function("MAX"));
        let ops: Vec<_> = ast.comparisons.iter().map(|c| c.op).collect();
        assert!(ops.contains(&CompareOp::LtEq));
        // `3 < r` normalises to `r > 3`
        assert!(ops.contains(&CompareOp::Gt));
        assert_eq!(ast.predicate_literals, vec!["3"]);
    }

    #[test]
    fn backticks_and_casts() {
        let ast = parse_sql(
            "SELECT CAST(SUM(IIF(`T1`.`x` = 'a', 1, 0)) AS REAL) * 100 / COUNT(*) FROM `my table` AS T1",
        )
        .unwrap();
        assert!(ast.selects[0].projection_has_division);
    }
}
