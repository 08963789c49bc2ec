//! Helpers shared by integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use pvsql::Constraint;

pub fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(name: &str) -> T {
    let text = std::fs::read_to_string(data_path(name)).unwrap();
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[derive(Deserialize)]
pub struct VerifierPair {
    pub constraint: Constraint,
    pub satisfying: String,
    pub violating: String,
}

#[derive(Deserialize)]
pub struct VerifierCase {
    pub constraint: Constraint,
    pub sql: String,
    pub satisfied: bool,
}

/// The pair corpus flattened to (constraint, sql, expected satisfied).
pub fn verifier_cases() -> Vec<(Constraint, String, bool)> {
    let pairs: Vec<VerifierPair> = read_json("verifier_pairs.json");
    let extras: Vec<VerifierCase> = read_json("verifier_extras.json");
    let mut out = Vec::new();
    for p in pairs {
        out.push((p.constraint.clone(), p.satisfying, true));
        out.push((p.constraint, p.violating, false));
    }
    out.extend(extras.into_iter().map(|c| (c.constraint, c.sql, c.satisfied)));
    out
}

#[derive(Deserialize)]
pub struct LabeledQuestion {
    pub question: String,
    #[serde(default)]
    pub evidence: String,
    pub expected: Vec<serde_json::Value>,
}

const TABLES: [(&str, &[&str], &[&str]); 3] = [
    ("customers", &["id", "name", "state"], &["name", "state"]),
    ("products", &["id", "category", "name"], &["category", "name"]),
    ("orders", &["id", "customer_id", "product_id", "order_date", "ship_date", "required_date"], &["order_date", "ship_date"]),
];

const TEXT_LITERALS: [&str; 6] = ["'CA'", "'Books'", "'2023'", "'O''Neil'", "'%Y'", "'2022-03-01'"];

/// Small random SELECT over the retail fixture schema. Same seed, same SQL.
pub fn random_sql(seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let (table, cols, _) = TABLES[rng.gen_range(0..TABLES.len())];
    let col = |rng: &mut StdRng| *cols.choose(rng).unwrap();

    let mut sql = String::new();
    if rng.gen_bool(0.15) {
        sql.push_str(&format!("WITH sub AS (SELECT {} FROM {table} LIMIT {}) ", col(&mut rng), rng.gen_range(1..20)));
    }
    sql.push_str("SELECT ");
    if rng.gen_bool(0.2) {
        sql.push_str("DISTINCT ");
    }
    let group_col = rng.gen_bool(0.3).then(|| col(&mut rng));
    let mut items = Vec::new();
    if let Some(g) = group_col {
        items.push(g.to_string());
    }
    for _ in 0..rng.gen_range(1..=3) {
        let c = col(&mut rng);
        let item = match rng.gen_range(0..10) {
            0 => "COUNT(*)".to_string(),
            1 => format!("COUNT(DISTINCT {c})"),
            2 => format!("SUM({c})"),
            3 => format!("AVG({c})"),
            4 => format!("MAX({c})"),
            5 => format!("MIN({c})"),
            6 => format!("CAST(SUM({c}) AS REAL) * 100 / COUNT(*)"),
            7 => format!("RANK() OVER (ORDER BY {c} DESC)"),
            8 => format!("{c} / 2"),
            _ => c.to_string(),
        };
        items.push(item);
    }
    sql.push_str(&items.join(", "));
    sql.push_str(&format!(" FROM {table}"));

    let mut preds = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let c = col(&mut rng);
        let op = ["=", ">", ">=", "<", "<=", "<>"].choose(&mut rng).unwrap();
        let lit = if rng.gen_bool(0.5) {
            rng.gen_range(0..5000).to_string()
        } else {
            TEXT_LITERALS.choose(&mut rng).unwrap().to_string()
        };
        preds.push(match rng.gen_range(0..5) {
            0 => format!("{lit} {op} {c}"),
            1 => format!("strftime('%Y', {c}) = {lit}"),
            2 => format!("{c} IN (SELECT {c} FROM {table} WHERE {c} {op} {lit})"),
            _ => format!("{c} {op} {lit}"),
        });
    }
    if !preds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&preds.join(if rng.gen_bool(0.5) { " AND " } else { " OR " }));
    }
    if let Some(g) = group_col {
        sql.push_str(&format!(" GROUP BY {g}"));
        if rng.gen_bool(0.4) {
            sql.push_str(&format!(" HAVING COUNT(*) {} {}", ["<", ">=", ">"].choose(&mut rng).unwrap(), rng.gen_range(0..4)));
        }
    }
    if rng.gen_bool(0.5) {
        let dir = ["", " ASC", " DESC"].choose(&mut rng).unwrap();
        sql.push_str(&format!(" ORDER BY {}{dir}", col(&mut rng)));
        if rng.gen_bool(0.7) {
            sql.push_str(&format!(" LIMIT {}", rng.gen_range(1..=10)));
            if rng.gen_bool(0.2) {
                sql.push_str(&format!(" OFFSET {}", rng.gen_range(1..5)));
            }
        }
    } else if rng.gen_bool(0.2) {
        sql.push_str(&format!(" LIMIT {}", rng.gen_range(1..=10)));
    }
    sql
}
