//! Compiles a parsed pattern query to SQL and shapes the result rows.

use std::collections::HashMap;

use rusqlite::functions::{Context, FunctionFlags};
use rusqlite::types::{Value, ValueRef};
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::cypher::{format_number, parse_query, CmpOp, Direction, Literal, QueryAst, ReturnItem};
use crate::error::{Error, Result};

/// Hard ceiling on rows returned by any pattern query.
pub const ROW_CEILING: usize = 100_000;

const NODE_COLS: [&str; 8] = [
    "id",
    "label",
    "qualified_name",
    "simple_name",
    "file_path",
    "start_line",
    "end_line",
    "properties",
];
const EDGE_COLS: [&str; 6] = ["id", "src", "dst", "type", "confidence", "properties"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Json>>,
    /// Set when the row ceiling cut the result short.
    pub truncated: bool,
}

/// Scalar value as seen by the comparison semantics shared between the SQL
/// path and any in-memory evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> Option<String> {
        match self {
            Scalar::Null => None,
            Scalar::Int(i) => Some(i.to_string()),
            Scalar::Real(r) => Some(format_number(*r)),
            Scalar::Text(s) => Some(s.clone()),
        }
    }

    fn number(&self) -> Option<f64> {
        match self {
            Scalar::Null => None,
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Real(r) => Some(*r),
            Scalar::Text(s) => s.trim().parse().ok(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Scalar::Null => Json::Null,
            Scalar::Int(i) => Json::from(*i),
            Scalar::Real(r) => serde_json::Number::from_f64(*r).map(Json::Number).unwrap_or(Json::Null),
            Scalar::Text(s) => Json::String(s.clone()),
        }
    }
}

/// Comparison semantics for WHERE predicates. A missing value never
/// matches. Numeric literals compare numerically (text is parsed, and an
/// unparseable value never matches); string literals compare byte-wise
/// against the value's text form. CONTAINS is always a substring test.
pub fn compare(op: CmpOp, lhs: &Scalar, rhs: &Literal) -> bool {
    if *lhs == Scalar::Null {
        return false;
    }
    if op == CmpOp::Contains {
        return lhs.text().is_some_and(|t| t.contains(&rhs.as_text()));
    }
    let ord = match rhs {
        Literal::Num(n) => match lhs.number() {
            Some(v) => v.partial_cmp(n),
            None => return false,
        },
        Literal::Str(s) => lhs.text().map(|t| t.as_str().cmp(s.as_str())),
    };
    let Some(ord) = ord else { return false };
    match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Contains => unreachable!(),
    }
}

fn scalar_of(v: ValueRef<'_>) -> Scalar {
    match v {
        ValueRef::Null => Scalar::Null,
        ValueRef::Integer(i) => Scalar::Int(i),
        ValueRef::Real(r) => Scalar::Real(r),
        ValueRef::Text(t) | ValueRef::Blob(t) => Scalar::Text(String::from_utf8_lossy(t).into_owned()),
    }
}

fn cg_cmp(ctx: &Context<'_>) -> rusqlite::Result<bool> {
    let op: String = ctx.get(0)?;
    let Some(op) = CmpOp::parse(&op) else {
        return Ok(false);
    };
    let lhs = scalar_of(ctx.get_raw(1));
    let rhs = match ctx.get_raw(2) {
        ValueRef::Integer(i) => Literal::Num(i as f64),
        ValueRef::Real(r) => Literal::Num(r),
        other => Literal::Str(scalar_of(other).text().unwrap_or_default()),
    };
    Ok(compare(op, &lhs, &rhs))
}

/// Registers the SQL helper functions the query compiler emits.
pub fn register_functions(conn: &Connection) -> Result<()> {
    conn.create_scalar_function(
        "cg_cmp",
        3,
        FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC,
        cg_cmp,
    )?;
    Ok(())
}

/// Native column for a node property, if any. `name` is shorthand for
/// `simple_name`.
pub fn node_column(prop: &str) -> Option<&'static str> {
    Some(match prop {
        "id" => "id",
        "label" => "label",
        "qualified_name" => "qualified_name",
        "simple_name" | "name" => "simple_name",
        "file_path" => "file_path",
        "start_line" => "start_line",
        "end_line" => "end_line",
        _ => return None,
    })
}

pub fn edge_column(prop: &str) -> Option<&'static str> {
    Some(match prop {
        "id" => "id",
        "src" => "src",
        "dst" => "dst",
        "type" => "type",
        "confidence" => "confidence",
        _ => return None,
    })
}

fn is_numeric_column(col: &str) -> bool {
    matches!(col, "id" | "src" | "dst" | "start_line" | "end_line" | "confidence")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    Node,
    Edge,
}

/// Compiled form: SQL text plus positional parameters and the slot layout
/// of the selected columns.
struct Compiled {
    sql: String,
    params: Vec<Value>,
    /// (variable, kind, first column index) in ORDER BY order.
    slots: Vec<(String, SlotKind, usize)>,
}

fn json_path(key: &str) -> Result<String> {
    if key.contains('"') || key.contains('\\') {
        return Err(Error::QueryRejected(format!("unsupported property name {key:?}")));
    }
    Ok(format!("$.\"{key}\""))
}

fn compile(ast: &QueryAst, limit: Option<usize>) -> Result<Compiled> {
    let mut params: Vec<Value> = Vec::new();
    let mut slots: Vec<(String, SlotKind, usize)> = Vec::new();
    let mut aliases: HashMap<String, (String, SlotKind)> = HashMap::new();
    let mut from = Vec::new();
    let mut conds: Vec<String> = Vec::new();
    let mut cols = Vec::new();

    let mut bind = |var: &str, kind: SlotKind, slots: &mut Vec<(String, SlotKind, usize)>, cols: &mut Vec<String>, from: &mut Vec<String>| -> String {
        if let Some((a, _)) = aliases.get(var) {
            return a.clone();
        }
        let alias = format!("t{}", slots.len());
        let (table, names): (&str, &[&str]) = match kind {
            SlotKind::Node => ("nodes", &NODE_COLS),
            SlotKind::Edge => ("edges", &EDGE_COLS),
        };
        slots.push((var.to_string(), kind, cols.len()));
        for c in names {
            cols.push(format!("{alias}.{c}"));
        }
        from.push(format!("{table} {alias}"));
        aliases.insert(var.to_string(), (alias.clone(), kind));
        alias
    };

    let mut node_alias = Vec::new();
    for (i, n) in ast.nodes.iter().enumerate() {
        if i > 0 {
            let r = &ast.rels[i - 1];
            bind(&r.var, SlotKind::Edge, &mut slots, &mut cols, &mut from);
        }
        node_alias.push(bind(&n.var, SlotKind::Node, &mut slots, &mut cols, &mut from));
    }

    for (i, n) in ast.nodes.iter().enumerate() {
        let a = &node_alias[i];
        if let Some(label) = &n.label {
            params.push(Value::Text(label.clone()));
            conds.push(format!("{a}.label = ?{}", params.len()));
        }
        for (key, lit) in &n.props {
            conds.push(predicate(a, SlotKind::Node, key, CmpOp::Eq, lit, &mut params)?);
        }
    }
    for (i, r) in ast.rels.iter().enumerate() {
        let e = &aliases[&r.var].0;
        let (l, rr) = (&node_alias[i], &node_alias[i + 1]);
        conds.push(match r.direction {
            Direction::Out => format!("{e}.src = {l}.id AND {e}.dst = {rr}.id"),
            Direction::In => format!("{e}.dst = {l}.id AND {e}.src = {rr}.id"),
            Direction::Both => {
                format!("(({e}.src = {l}.id AND {e}.dst = {rr}.id) OR ({e}.dst = {l}.id AND {e}.src = {rr}.id))")
            }
        });
        if !r.types.is_empty() {
            let mut marks = Vec::new();
            for t in &r.types {
                params.push(Value::Text(t.clone()));
                marks.push(format!("?{}", params.len()));
            }
            conds.push(format!("{e}.type IN ({})", marks.join(", ")));
        }
        for prev in &ast.rels[..i] {
            conds.push(format!("{e}.id <> {}.id", aliases[&prev.var].0));
        }
    }
    for c in &ast.conditions {
        let (a, kind) = &aliases[&c.var];
        conds.push(predicate(a, *kind, &c.prop, c.op, &c.value, &mut params)?);
    }

    let order: Vec<String> = slots
        .iter()
        .map(|(v, _, _)| format!("{}.id", aliases[v].0))
        .collect();
    let mut sql = format!("SELECT {} FROM {}", cols.join(", "), from.join(", "));
    if !conds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&conds.join(" AND "));
    }
    sql.push_str(" ORDER BY ");
    sql.push_str(&order.join(", "));
    if let Some(limit) = limit {
        sql.push_str(&format!(" LIMIT {limit}"));
    }
    Ok(Compiled { sql, params, slots })
}

fn predicate(
    alias: &str,
    kind: SlotKind,
    prop: &str,
    op: CmpOp,
    lit: &Literal,
    params: &mut Vec<Value>,
) -> Result<String> {
    let native = match kind {
        SlotKind::Node => node_column(prop),
        SlotKind::Edge => edge_column(prop),
    };
    let expr = match native {
        Some(col) => format!("{alias}.{col}"),
        None => {
            params.push(Value::Text(json_path(prop)?));
            format!("json_extract({alias}.properties, ?{})", params.len())
        }
    };
    // Fast paths that the planner can serve from an index.
    if let Some(col) = native {
        match lit {
            Literal::Str(s) if op == CmpOp::Eq && !is_numeric_column(col) => {
                params.push(Value::Text(s.clone()));
                return Ok(format!("{expr} = ?{}", params.len()));
            }
            Literal::Num(n) if op != CmpOp::Contains && is_numeric_column(col) => {
                params.push(Value::Real(*n));
                return Ok(format!("{expr} {} ?{}", op.as_str(), params.len()));
            }
            _ => {}
        }
    }
    params.push(Value::Text(op.as_str().to_string()));
    let op_idx = params.len();
    params.push(match lit {
        Literal::Str(s) => Value::Text(s.clone()),
        Literal::Num(n) => Value::Real(*n),
    });
    Ok(format!("cg_cmp(?{op_idx}, {expr}, ?{}) = 1", params.len()))
}

fn parse_props_json(text: &str) -> Json {
    serde_json::from_str(text).unwrap_or_else(|_| Json::Object(Default::default()))
}

/// JSON shape of a whole node or edge in query output.
fn slot_json(kind: SlotKind, row: &[Scalar]) -> Json {
    let names: &[&str] = match kind {
        SlotKind::Node => &NODE_COLS,
        SlotKind::Edge => &EDGE_COLS,
    };
    let mut obj = serde_json::Map::new();
    for (name, v) in names.iter().zip(row) {
        let value = if *name == "properties" {
            parse_props_json(&v.text().unwrap_or_default())
        } else {
            v.to_json()
        };
        obj.insert(name.to_string(), value);
    }
    Json::Object(obj)
}

fn project(kind: SlotKind, row: &[Scalar], prop: &str) -> Json {
    let (names, col): (&[&str], Option<&str>) = match kind {
        SlotKind::Node => (&NODE_COLS, node_column(prop)),
        SlotKind::Edge => (&EDGE_COLS, edge_column(prop)),
    };
    match col {
        Some(c) => names
            .iter()
            .position(|n| *n == c)
            .map(|i| row[i].to_json())
            .unwrap_or(Json::Null),
        None => {
            let props = parse_props_json(&row[names.len() - 1].text().unwrap_or_default());
            props.get(prop).cloned().unwrap_or(Json::Null)
        }
    }
}

/// Parses and runs a pattern query with the default row ceiling.
pub fn execute_query(conn: &Connection, text: &str) -> Result<QueryResult> {
    execute_ast(conn, &parse_query(text)?, ROW_CEILING)
}

/// Runs a parsed query. At most `min(ast.limit, ceiling)` rows are returned;
/// `truncated` is set when the ceiling (not an explicit smaller LIMIT)
/// dropped rows.
pub fn execute_ast(conn: &Connection, ast: &QueryAst, ceiling: usize) -> Result<QueryResult> {
    let ceiling = ceiling.min(ROW_CEILING);
    let limit = ast.limit.unwrap_or(ceiling).min(ceiling);
    let counting = ast.returns.iter().any(|r| matches!(r, ReturnItem::Count(_)));
    let compiled = compile(ast, if counting { None } else { Some(limit + 1) })?;
    let mut stmt = conn.prepare(&compiled.sql)?;
    if !stmt.readonly() {
        return Err(Error::QueryRejected("compiled statement is not read-only".into()));
    }
    let width = stmt.column_count();
    let mut rows = stmt.query(rusqlite::params_from_iter(compiled.params.iter()))?;

    let columns: Vec<String> = ast.returns.iter().map(|r| r.column_name()).collect();
    // Every RETURN variable was validated by the parser.
    let slot_of = |var: &str| -> (SlotKind, usize) {
        compiled
            .slots
            .iter()
            .find(|(v, _, _)| v == var)
            .map(|(_, k, s)| (*k, *s))
            .unwrap_or((SlotKind::Node, 0))
    };

    let shape = |raw: &[Scalar], item: &ReturnItem| -> Json {
        match item {
            ReturnItem::Var(v) => {
                let (kind, start) = slot_of(v);
                let n = if kind == SlotKind::Node { NODE_COLS.len() } else { EDGE_COLS.len() };
                slot_json(kind, &raw[start..start + n])
            }
            ReturnItem::Prop(v, p) => {
                let (kind, start) = slot_of(v);
                let n = if kind == SlotKind::Node { NODE_COLS.len() } else { EDGE_COLS.len() };
                project(kind, &raw[start..start + n], p)
            }
            ReturnItem::Count(_) => Json::Null,
        }
    };

    let mut out: Vec<Vec<Json>> = Vec::new();
    let mut groups: HashMap<String, usize> = HashMap::new();
    let mut truncated = false;
    while let Some(row) = rows.next()? {
        let raw: Vec<Scalar> = (0..width).map(|i| scalar_of(row.get_ref_unwrap(i))).collect();
        let values: Vec<Json> = ast.returns.iter().map(|item| shape(&raw, item)).collect();
        if counting {
            let key = serde_json::to_string(&values).unwrap_or_default();
            let idx = *groups.entry(key).or_insert_with(|| {
                out.push(values.clone());
                out.len() - 1
            });
            for (i, item) in ast.returns.iter().enumerate() {
                if matches!(item, ReturnItem::Count(_)) {
                    let n = out[idx][i].as_u64().unwrap_or(0);
                    out[idx][i] = Json::from(n + 1);
                }
            }
        } else {
            if out.len() == limit {
                truncated = limit == ceiling;
                break;
            }
            out.push(values);
        }
    }
    if counting && out.len() > limit {
        truncated = limit == ceiling;
        out.truncate(limit);
    }
    Ok(QueryResult {
        columns,
        rows: out,
        truncated,
    })
}
