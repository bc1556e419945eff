//! Report construction and emission: comma-separated tables with fixed
//! header rows, or one structured JSON document.

use serde_json::{json, Map, Value};

/// One table cell; numbers render with Rust's shortest round-trip float
/// formatting so reports are byte-stable.
#[derive(Clone, Debug)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => {
                if s.contains(',') || s.contains('\n') || s.contains('"') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => format!("{v}"),
            Cell::Bool(v) => format!("{v}"),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map(Value::Number)
                .unwrap_or_else(|| Value::String(format!("{v}"))),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

/// A named table with a fixed header.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }
}

/// A full command report: one or more tables.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
}

/// Output format selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Structured,
}

impl Report {
    pub fn push(&mut self, table: Table) {
        self.tables.push(table);
    }

    /// Comma-separated tables, each prefixed by `# <name>` and a header
    /// row, separated by blank lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, table) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("# {}\n", table.name));
            out.push_str(&table.header.join(","));
            out.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(Cell::render).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }

    /// One JSON object keyed by table name, each an array of row objects.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for table in &self.tables {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (key, cell) in table.header.iter().zip(row) {
                        obj.insert(key.clone(), cell.to_json());
                    }
                    Value::Object(obj)
                })
                .collect();
            root.insert(table.name.clone(), Value::Array(rows));
        }
        Value::Object(root)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.to_csv(),
            Format::Structured => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }
}
