//! A small retail database and the canned scenario used by offline tests,
//! the acceptance suite and the CLI demo.
//!
//! The scenario: a question about late shipments for California customers,
//! two probes that discover the state encoding and the date format, an
//! initial SQL that misses the year filter and the top-3 limit, and the
//! repaired SQL that satisfies every extracted constraint.

use std::path::{Path, PathBuf};

use rusqlite::{params, Connection};

use crate::llm::{PromptKind, ScriptEntry};

pub const CASE_STUDY_DB_ID: &str = "retail";

pub const CASE_STUDY_QUESTION: &str = "List the top 3 unique product categories by percentage of orders from California customers that were shipped late in 2023.";

pub const CASE_STUDY_PROBE_1: &str = "SELECT DISTINCT state FROM customers LIMIT 5";

pub const CASE_STUDY_PROBE_2: &str = "SELECT ship_date, required_date FROM orders LIMIT 3";

pub const CASE_STUDY_INITIAL_SQL: &str = "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) * 100 / COUNT(*) FROM orders o JOIN customers c ON o.customer_id = c.id JOIN products p ON o.product_id = p.id WHERE c.state = 'CA' GROUP BY p.category";

pub const CASE_STUDY_REPAIRED_SQL: &str = "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) * 100 / COUNT(*) AS late_pct FROM orders o JOIN customers c ON o.customer_id = c.id JOIN products p ON o.product_id = p.id WHERE c.state = 'CA' AND strftime('%Y', o.order_date) = '2023' GROUP BY p.category ORDER BY late_pct DESC LIMIT 3";

/// Five-way cross join over `orders` (about 10^8 rows); reliably exceeds a
/// one-second timeout.
pub const SLOW_SQL: &str = "SELECT COUNT(*) FROM orders a, orders b, orders c, orders d, orders e";

const SCHEMA: &str = "
CREATE TABLE customers (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    state TEXT NOT NULL
);
CREATE TABLE products (
    id INTEGER PRIMARY KEY,
    category TEXT NOT NULL,
    name TEXT NOT NULL
);
CREATE TABLE orders (
    id INTEGER PRIMARY KEY,
    customer_id INTEGER NOT NULL REFERENCES customers(id),
    product_id INTEGER NOT NULL REFERENCES products(id),
    order_date DATE NOT NULL,
    ship_date DATE NOT NULL,
    required_date DATE NOT NULL
);
";

const CUSTOMERS: [(&str, &str); 8] = [
    ("Ana Lopez", "CA"),
    ("Ben Carter", "NY"),
    ("Cara Diaz", "TX"),
    ("Dan Moore", "CA"),
    ("Eve Kim", "WA"),
    ("Finn Ross", "CA"),
    ("Gia Patel", "NY"),
    ("Hal Stone", "TX"),
];

const PRODUCTS: [(&str, &str); 6] = [
    ("Electronics", "Headphones"),
    ("Electronics", "Charger"),
    ("Garden", "Hose"),
    ("Kitchen", "Kettle"),
    ("Books", "Atlas"),
    ("Toys", "Kite"),
];

/// Number of rows in the `orders` table.
pub const ORDER_COUNT: usize = 40;

/// Writes the retail database to `path`, replacing nothing: the file must
/// not exist yet.
pub fn create_case_study_db(path: &Path) -> rusqlite::Result<()> {
    let mut conn = Connection::open(path)?;
    conn.execute_batch(SCHEMA)?;
    let tx = conn.transaction()?;
    for (i, (name, state)) in CUSTOMERS.iter().enumerate() {
        tx.execute("INSERT INTO customers VALUES (?1, ?2, ?3)", params![i as i64 + 1, name, state])?;
    }
    for (i, (category, name)) in PRODUCTS.iter().enumerate() {
        tx.execute("INSERT INTO products VALUES (?1, ?2, ?3)", params![i as i64 + 1, category, name])?;
    }
    for (id, order_date, ship_date, required_date, customer, product) in orders() {
        tx.execute(
            "INSERT INTO orders VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![id, customer, product, order_date, ship_date, required_date],
        )?;
    }
    tx.commit()
}

type OrderRow = (i64, String, String, String, i64, i64);

// Deterministic order rows: half in 2022, half in 2023; the first row
// ships five days late.
fn orders() -> Vec<OrderRow> {
    (0..ORDER_COUNT as i64)
        .map(|i| {
            let year = if i % 2 == 0 { 2023 } else { 2022 };
            let month = 1 + (i / 2) % 12;
            let day = 5 + i % 20;
            let order_date = format!("{year}-{month:02}-{day:02}");
            let (ship, required) = if i == 0 { (15, 10) } else if i % 3 == 0 { (day + 6, day + 3) } else { (day + 2, day + 4) };
            let ship_date = format!("{year}-{month:02}-{ship:02}");
            let required_date = format!("{year}-{month:02}-{required:02}");
            let customer = 1 + i % CUSTOMERS.len() as i64;
            let product = 1 + (i * 5) % PRODUCTS.len() as i64;
            (i + 1, order_date, ship_date, required_date, customer, product)
        })
        .collect()
}

/// Creates `<root>/retail/retail.sqlite` and returns the database file path.
pub fn create_case_study_db_root(root: &Path) -> rusqlite::Result<PathBuf> {
    let dir = root.join(CASE_STUDY_DB_ID);
    std::fs::create_dir_all(&dir).map_err(|e| rusqlite::Error::ToSqlConversionFailure(Box::new(e)))?;
    let path = dir.join(format!("{CASE_STUDY_DB_ID}.sqlite"));
    if !path.exists() {
        create_case_study_db(&path)?;
    }
    Ok(path)
}

/// Scripted backend replies for the scenario: two probes, done, the
/// initial SQL, then the repair.
pub fn case_study_script() -> Vec<ScriptEntry> {
    vec![
        ScriptEntry::new(
            PromptKind::Probe,
            r#"{"action": "probe", "probe_sql": "SELECT DISTINCT state FROM customers LIMIT 5", "relevant_columns": {"customers": ["state"]}, "value_mappings": {}}"#,
            812,
            64,
        ),
        ScriptEntry::new(
            PromptKind::Probe,
            r#"States are stored as codes, so California is CA.
```json
{"action": "probe", "probe_sql": "SELECT ship_date, required_date FROM orders LIMIT 3", "relevant_columns": {"orders": ["ship_date", "required_date"]}, "value_mappings": {"California": "CA"}, "insight": "State stored as 2-letter codes"}
```"#,
            905,
            88,
        ),
        ScriptEntry::new(
            PromptKind::Probe,
            r#"{"action": "done", "insight": ["Dates as YYYY-MM-DD", "\"Late\" means ship_date > required_date"]}"#,
            1010,
            41,
        ),
        ScriptEntry::new(PromptKind::Generate, format!("```sql\n{CASE_STUDY_INITIAL_SQL}\n```"), 1187, 96),
        ScriptEntry::new(PromptKind::Repair, CASE_STUDY_REPAIRED_SQL, 1240, 118),
    ]
}
