//! Reference implementations written from the specification alone. None of
//! them calls into the code under test except to read its inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde_json::{Map, Number, Value as Json};

// ---------------------------------------------------------------------------
// Name-resolution cascade.

#[derive(Debug, Clone)]
pub struct Def {
    pub qname: String,
    pub simple: String,
    pub module: String,
}

#[derive(Debug, Clone, Default)]
pub struct Imports {
    pub aliases: BTreeMap<String, String>,
    pub wildcards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub target: Option<String>,
    /// 1..=6, or 0 when unresolved.
    pub strategy: u8,
    pub confidence: f64,
}

fn hit(target: &str, strategy: u8, confidence: f64) -> Resolution {
    Resolution {
        target: Some(target.to_string()),
        strategy,
        confidence,
    }
}

fn segs(q: &str) -> Vec<&str> {
    q.split('.').filter(|s| !s.is_empty()).collect()
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

/// Every (alias, remainder) split, the whole text first and then shorter
/// prefixes.
fn splits(callee: &str) -> Vec<(String, String)> {
    let mut out = vec![(callee.to_string(), String::new())];
    let parts: Vec<&str> = callee.split('.').collect();
    for cut in (1..parts.len()).rev() {
        out.push((parts[..cut].join("."), parts[cut..].join(".")));
    }
    out
}

fn trailing_equal(a: &[&str], b: &[&str]) -> usize {
    let mut n = 0;
    while n < a.len() && n < b.len() && a[a.len() - 1 - n] == b[b.len() - 1 - n] {
        n += 1;
    }
    n
}

pub struct Cascade<'a> {
    pub defs: &'a [Def],
}

impl Cascade<'_> {
    fn def(&self, q: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.qname == q)
    }

    fn named(&self, simple: &str) -> Vec<&Def> {
        let mut v: Vec<&Def> = self.defs.iter().filter(|d| d.simple == simple).collect();
        v.sort_by(|a, b| a.qname.cmp(&b.qname));
        v
    }

    pub fn distance(&self, cand: &str, imports: &Imports, module: &str) -> usize {
        let cand_module = self.def(cand).map(|d| d.module.clone()).unwrap_or_default();
        let c = segs(&cand_module);
        let metric = |r: &str| {
            let r = segs(r);
            let mut lcp = 0;
            while lcp < c.len() && lcp < r.len() && c[lcp] == r[lcp] {
                lcp += 1;
            }
            c.len() + r.len() - 2 * lcp
        };
        let mut best = metric(module);
        for t in imports.aliases.values().chain(imports.wildcards.iter()) {
            if cand == t || cand_module == *t || cand.starts_with(&format!("{t}.")) {
                return 0;
            }
            best = best.min(metric(t));
        }
        best
    }

    fn nearest<'d>(&self, pool: &[&'d Def], imports: &Imports, module: &str) -> Option<&'d Def> {
        let mut best: Option<(usize, &Def)> = None;
        for d in pool {
            let k = self.distance(&d.qname, imports, module);
            let better = match best {
                None => true,
                Some((bk, bd)) => k < bk || (k == bk && d.qname < bd.qname),
            };
            if better {
                best = Some((k, d));
            }
        }
        best.map(|(_, d)| d)
    }

    pub fn resolve(&self, callee: &str, imports: &Imports, module: &str) -> Resolution {
        let none = Resolution {
            target: None,
            strategy: 0,
            confidence: 0.0,
        };
        if callee.is_empty() || self.defs.is_empty() {
            return none;
        }
        let splits = splits(callee);

        // 1: exact import target.
        let mut targets: Vec<String> = splits
            .iter()
            .filter_map(|(a, r)| imports.aliases.get(a).map(|t| join(t, r)))
            .collect();
        targets.extend(imports.wildcards.iter().map(|w| join(w, callee)));
        if let Some(t) = targets.iter().find(|t| self.def(t).is_some()) {
            return hit(t, 1, 0.95);
        }

        // 2: import target missing, matched by suffix under the same package.
        for (alias, rest) in &splits {
            let Some(target) = imports.aliases.get(alias) else { continue };
            let want = join(target, rest);
            let w = segs(&want);
            let r = segs(rest);
            let (Some(top), Some(name)) = (w.first(), w.last()) else { continue };
            let mut best: Option<(usize, &Def)> = None;
            for d in self.named(name) {
                let q = segs(&d.qname);
                if !q.contains(top) || trailing_equal(&q, &r) < r.len() {
                    continue;
                }
                let score = trailing_equal(&q, &w);
                let better = match best {
                    None => true,
                    Some((bs, bd)) => {
                        score > bs
                            || (score == bs
                                && (d.qname.len() < bd.qname.len()
                                    || (d.qname.len() == bd.qname.len() && d.qname < bd.qname)))
                    }
                };
                if better {
                    best = Some((score, d));
                }
            }
            if let Some((_, d)) = best {
                return hit(&d.qname, 2, 0.85);
            }
        }

        // 3: same module.
        let local = join(module, callee);
        if self.def(&local).is_some() {
            return hit(&local, 3, 0.90);
        }

        let simple = callee.rsplit('.').next().unwrap_or(callee);
        let all = self.named(simple);

        // 4: only one definition anywhere.
        if all.len() == 1 {
            let reachable = self.distance(&all[0].qname, imports, module) == 0;
            return hit(&all[0].qname, 4, if reachable { 0.75 } else { 0.60 });
        }

        // 5: nearest same-named definition.
        if !all.is_empty() {
            let tail = format!(".{callee}");
            let narrowed: Vec<&Def> = all.iter().copied().filter(|d| d.qname.ends_with(&tail)).collect();
            let pool = if narrowed.is_empty() { &all } else { &narrowed };
            if let Some(d) = self.nearest(pool, imports, module) {
                return hit(&d.qname, 5, 0.55);
            }
        }

        // 6: most similar name.
        let names: BTreeSet<&str> = self.defs.iter().map(|d| d.simple.as_str()).collect();
        let mut best: Option<(&str, f64)> = None;
        for n in names {
            let s = strsim::normalized_levenshtein(simple, n);
            if s + 1e-12 < 0.8 {
                continue;
            }
            if best.is_none_or(|(_, bs)| s > bs + 1e-12) {
                best = Some((n, s));
            }
        }
        let Some((name, s)) = best else { return none };
        let pool = self.named(name);
        match self.nearest(&pool, imports, module) {
            Some(d) => hit(&d.qname, 6, (0.30 + 0.10 * (s - 0.8) / 0.2).clamp(0.30, 0.40)),
            None => none,
        }
    }
}

// ---------------------------------------------------------------------------
// Pattern queries.

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

fn scalar(v: ValueRef<'_>) -> Scalar {
    match v {
        ValueRef::Null => Scalar::Null,
        ValueRef::Integer(i) => Scalar::Int(i),
        ValueRef::Real(r) => Scalar::Real(r),
        ValueRef::Text(t) | ValueRef::Blob(t) => Scalar::Text(String::from_utf8_lossy(t).into_owned()),
    }
}

fn num_text(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        (n as i64).to_string()
    } else {
        n.to_string()
    }
}

impl Scalar {
    fn text(&self) -> Option<String> {
        match self {
            Scalar::Null => None,
            Scalar::Int(i) => Some(i.to_string()),
            Scalar::Real(r) => Some(num_text(*r)),
            Scalar::Text(s) => Some(s.clone()),
        }
    }

    fn json(&self) -> Json {
        match self {
            Scalar::Null => Json::Null,
            Scalar::Int(i) => Json::from(*i),
            Scalar::Real(r) => Number::from_f64(*r).map(Json::Number).unwrap_or(Json::Null),
            Scalar::Text(s) => Json::String(s.clone()),
        }
    }
}

pub const NODE_COLUMNS: [&str; 8] =
    ["id", "label", "qualified_name", "simple_name", "file_path", "start_line", "end_line", "properties"];
pub const EDGE_COLUMNS: [&str; 6] = ["id", "src", "dst", "type", "confidence", "properties"];

/// One row of `nodes` or `edges`, keyed by column name.
#[derive(Debug, Clone)]
pub struct Row {
    pub cols: Vec<(&'static str, Scalar)>,
}

impl Row {
    fn get(&self, col: &str) -> &Scalar {
        &self.cols.iter().find(|(c, _)| *c == col).expect("column").1
    }

    pub fn id(&self) -> i64 {
        match self.get("id") {
            Scalar::Int(i) => *i,
            other => panic!("id {other:?}"),
        }
    }

    fn props(&self) -> Map<String, Json> {
        match self.get("properties").text().and_then(|t| serde_json::from_str(&t).ok()) {
            Some(Json::Object(m)) => m,
            _ => Map::new(),
        }
    }

    fn whole(&self) -> Json {
        let mut m = Map::new();
        for (c, v) in &self.cols {
            let value = if *c == "properties" { Json::Object(self.props()) } else { v.json() };
            m.insert(c.to_string(), value);
        }
        Json::Object(m)
    }
}

pub struct Tables {
    pub nodes: Vec<Row>,
    pub edges: Vec<Row>,
}

fn read_table(conn: &Connection, table: &str, cols: &'static [&'static str]) -> Vec<Row> {
    let sql = format!("SELECT {} FROM {table} ORDER BY id", cols.join(", "));
    let mut stmt = conn.prepare(&sql).unwrap();
    let mut rows = stmt.query([]).unwrap();
    let mut out = Vec::new();
    while let Some(r) = rows.next().unwrap() {
        out.push(Row {
            cols: cols.iter().enumerate().map(|(i, c)| (*c, scalar(r.get_ref_unwrap(i)))).collect(),
        });
    }
    out
}

impl Tables {
    pub fn read(conn: &Connection) -> Tables {
        Tables {
            nodes: read_table(conn, "nodes", &NODE_COLUMNS),
            edges: read_table(conn, "edges", &EDGE_COLUMNS),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Str(String),
    Num(f64),
}

impl Lit {
    fn text(&self) -> String {
        match self {
            Lit::Str(s) => s.clone(),
            Lit::Num(n) => num_text(*n),
        }
    }

    pub fn source(&self) -> String {
        match self {
            Lit::Str(s) => format!("'{s}'"),
            Lit::Num(n) => format!("{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Gt,
    Contains,
}

impl Op {
    pub fn source(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "<>",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Contains => "CONTAINS",
        }
    }
}

/// WHERE semantics: missing values never match, numeric literals compare
/// numerically, string literals compare byte-wise against the text form.
fn holds(op: Op, lhs: &Scalar, rhs: &Lit) -> bool {
    let Some(text) = lhs.text() else { return false };
    if op == Op::Contains {
        return text.contains(&rhs.text());
    }
    let ord = match rhs {
        Lit::Num(n) => {
            let v = match lhs {
                Scalar::Int(i) => *i as f64,
                Scalar::Real(r) => *r,
                _ => match text.trim().parse::<f64>() {
                    Ok(v) => v,
                    Err(_) => return false,
                },
            };
            match v.partial_cmp(n) {
                Some(o) => o,
                None => return false,
            }
        }
        Lit::Str(s) => text.as_bytes().cmp(s.as_bytes()),
    };
    match op {
        Op::Eq => ord.is_eq(),
        Op::Ne => ord.is_ne(),
        Op::Lt => ord.is_lt(),
        Op::Gt => ord.is_gt(),
        Op::Contains => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dir {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone)]
pub struct QNode {
    pub var: String,
    pub label: Option<String>,
    pub props: Vec<(String, Lit)>,
}

#[derive(Debug, Clone)]
pub struct QRel {
    /// Empty for an anonymous relationship.
    pub var: String,
    pub types: Vec<String>,
    pub dir: Dir,
}

#[derive(Debug, Clone)]
pub struct QCond {
    pub var: String,
    pub prop: String,
    pub op: Op,
    pub value: Lit,
}

#[derive(Debug, Clone)]
pub enum QRet {
    Var(String),
    Prop(String, String),
    Count(Option<String>),
}

#[derive(Debug, Clone)]
pub struct Query {
    pub nodes: Vec<QNode>,
    pub rels: Vec<QRel>,
    pub conds: Vec<QCond>,
    pub rets: Vec<QRet>,
    pub limit: Option<usize>,
}

impl Query {
    pub fn text(&self) -> String {
        let node = |n: &QNode| {
            let mut s = format!("({}", n.var);
            if let Some(l) = &n.label {
                s += &format!(":{l}");
            }
            if !n.props.is_empty() {
                let p: Vec<String> = n.props.iter().map(|(k, v)| format!("{k}: {}", v.source())).collect();
                s += &format!(" {{{}}}", p.join(", "));
            }
            s + ")"
        };
        let mut out = format!("MATCH {}", node(&self.nodes[0]));
        for (i, r) in self.rels.iter().enumerate() {
            let types = if r.types.is_empty() { String::new() } else { format!(":{}", r.types.join("|")) };
            let body = format!("[{}{types}]", r.var);
            out += &match r.dir {
                Dir::Out => format!("-{body}->"),
                Dir::In => format!("<-{body}-"),
                Dir::Both => format!("-{body}-"),
            };
            out += &node(&self.nodes[i + 1]);
        }
        if !self.conds.is_empty() {
            let c: Vec<String> = self
                .conds
                .iter()
                .map(|c| format!("{}.{} {} {}", c.var, c.prop, c.op.source(), c.value.source()))
                .collect();
            out += &format!(" WHERE {}", c.join(" AND "));
        }
        let rets: Vec<String> = self
            .rets
            .iter()
            .map(|r| match r {
                QRet::Var(v) => v.clone(),
                QRet::Prop(v, p) => format!("{v}.{p}"),
                QRet::Count(Some(v)) => format!("count({v})"),
                QRet::Count(None) => "count(*)".to_string(),
            })
            .collect();
        out += &format!(" RETURN {}", rets.join(", "));
        if let Some(l) = self.limit {
            out += &format!(" LIMIT {l}");
        }
        out
    }

    pub fn columns(&self) -> Vec<String> {
        self.rets
            .iter()
            .map(|r| match r {
                QRet::Var(v) => v.clone(),
                QRet::Prop(v, p) => format!("{v}.{p}"),
                QRet::Count(Some(v)) => format!("count({v})"),
                QRet::Count(None) => "count(*)".to_string(),
            })
            .collect()
    }
}

fn node_col(prop: &str) -> Option<&'static str> {
    Some(match prop {
        "name" | "simple_name" => "simple_name",
        "id" => "id",
        "label" => "label",
        "qualified_name" => "qualified_name",
        "file_path" => "file_path",
        "start_line" => "start_line",
        "end_line" => "end_line",
        _ => return None,
    })
}

fn edge_col(prop: &str) -> Option<&'static str> {
    Some(match prop {
        "id" => "id",
        "src" => "src",
        "dst" => "dst",
        "type" => "type",
        "confidence" => "confidence",
        _ => return None,
    })
}

fn prop_scalar(row: &Row, prop: &str, is_node: bool) -> Scalar {
    let col = if is_node { node_col(prop) } else { edge_col(prop) };
    match col {
        Some(c) => row.get(c).clone(),
        None => match row.props().get(prop) {
            None | Some(Json::Null) => Scalar::Null,
            Some(Json::String(s)) => Scalar::Text(s.clone()),
            Some(Json::Number(n)) => n.as_i64().map(Scalar::Int).unwrap_or(Scalar::Real(n.as_f64().unwrap_or(0.0))),
            Some(other) => Scalar::Text(other.to_string()),
        },
    }
}

fn prop_json(row: &Row, prop: &str, is_node: bool) -> Json {
    let col = if is_node { node_col(prop) } else { edge_col(prop) };
    match col {
        Some(c) => row.get(c).json(),
        None => row.props().get(prop).cloned().unwrap_or(Json::Null),
    }
}

pub struct Answer {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Json>>,
    pub truncated: bool,
}

/// Nested loops over every combination of edges (or every node for a
/// single-node pattern), filtered by the pattern and WHERE clause.
pub fn nested_loop(t: &Tables, q: &Query, ceiling: usize) -> Answer {
    let node_by_id: HashMap<i64, &Row> = t.nodes.iter().map(|n| (n.id(), n)).collect();
    let endpoint = |e: &Row, col: &str| match e.get(col) {
        Scalar::Int(i) => *i,
        other => panic!("{other:?}"),
    };

    // Candidate assignments: node ids per position, edge rows per rel.
    let mut assignments: Vec<(Vec<i64>, Vec<&Row>)> = Vec::new();
    if q.rels.is_empty() {
        for n in &t.nodes {
            assignments.push((vec![n.id()], Vec::new()));
        }
    } else {
        let mut stack: Vec<(Vec<i64>, Vec<&Row>)> = Vec::new();
        for e in &t.edges {
            let (s, d) = (endpoint(e, "src"), endpoint(e, "dst"));
            let mut starts: Vec<(i64, i64)> = Vec::new();
            match q.rels[0].dir {
                Dir::Out => starts.push((s, d)),
                Dir::In => starts.push((d, s)),
                Dir::Both => {
                    starts.push((s, d));
                    if s != d {
                        starts.push((d, s));
                    }
                }
            }
            for (a, b) in starts {
                stack.push((vec![a, b], vec![e]));
            }
        }
        for (i, rel) in q.rels.iter().enumerate().skip(1) {
            let mut next = Vec::new();
            for (ns, es) in &stack {
                let from = ns[i];
                for e in &t.edges {
                    let (s, d) = (endpoint(e, "src"), endpoint(e, "dst"));
                    let mut ends = Vec::new();
                    match rel.dir {
                        Dir::Out => {
                            if s == from {
                                ends.push(d)
                            }
                        }
                        Dir::In => {
                            if d == from {
                                ends.push(s)
                            }
                        }
                        Dir::Both => {
                            if s == from {
                                ends.push(d);
                            }
                            if d == from && s != d {
                                ends.push(s);
                            }
                        }
                    }
                    for b in ends {
                        let mut ns2 = ns.clone();
                        ns2.push(b);
                        let mut es2 = es.clone();
                        es2.push(e);
                        next.push((ns2, es2));
                    }
                }
            }
            stack = next;
        }
        assignments = stack;
    }

    // Filter and bind variables.
    struct Bound<'r> {
        key: Vec<i64>,
        vars: HashMap<String, (&'r Row, bool)>,
    }
    let mut matches: Vec<Bound> = Vec::new();
    'outer: for (ns, es) in assignments {
        // Pairwise distinct relationships.
        for i in 0..es.len() {
            for j in 0..i {
                if es[i].id() == es[j].id() {
                    continue 'outer;
                }
            }
        }
        let mut vars: HashMap<String, (&Row, bool)> = HashMap::new();
        let mut key = Vec::new();
        for (i, pat) in q.nodes.iter().enumerate() {
            if i > 0 {
                let rel = &q.rels[i - 1];
                let e = es[i - 1];
                if !rel.types.is_empty() && !rel.types.iter().any(|ty| e.get("type").text().as_deref() == Some(ty)) {
                    continue 'outer;
                }
                key.push(e.id());
                if !rel.var.is_empty() {
                    vars.insert(rel.var.clone(), (e, false));
                }
            }
            let Some(n) = node_by_id.get(&ns[i]) else { continue 'outer };
            match vars.get(&pat.var) {
                Some((prev, _)) if prev.id() != n.id() => continue 'outer,
                Some(_) => {}
                None => {
                    key.push(n.id());
                    vars.insert(pat.var.clone(), (n, true));
                }
            }
            if let Some(l) = &pat.label {
                if n.get("label").text().as_deref() != Some(l) {
                    continue 'outer;
                }
            }
            for (k, v) in &pat.props {
                if !holds(Op::Eq, &prop_scalar(n, k, true), v) {
                    continue 'outer;
                }
            }
        }
        for c in &q.conds {
            let (row, is_node) = vars[&c.var];
            if !holds(c.op, &prop_scalar(row, &c.prop, is_node), &c.value) {
                continue 'outer;
            }
        }
        matches.push(Bound { key, vars });
    }
    matches.sort_by(|a, b| a.key.cmp(&b.key));

    let limit = q.limit.unwrap_or(ceiling).min(ceiling);
    let counting = q.rets.iter().any(|r| matches!(r, QRet::Count(_)));
    let project = |m: &Bound| -> Vec<Json> {
        q.rets
            .iter()
            .map(|r| match r {
                QRet::Var(v) => m.vars[v].0.whole(),
                QRet::Prop(v, p) => {
                    let (row, is_node) = m.vars[v];
                    prop_json(row, p, is_node)
                }
                QRet::Count(_) => Json::Null,
            })
            .collect()
    };
    let mut rows: Vec<Vec<Json>> = Vec::new();
    let mut truncated = false;
    if counting {
        let mut index: HashMap<String, usize> = HashMap::new();
        for m in &matches {
            let values = project(m);
            let k = serde_json::to_string(&values).unwrap();
            let at = *index.entry(k).or_insert_with(|| {
                let start = values
                    .iter()
                    .zip(&q.rets)
                    .map(|(v, r)| if matches!(r, QRet::Count(_)) { Json::from(0) } else { v.clone() })
                    .collect();
                rows.push(start);
                rows.len() - 1
            });
            for (i, r) in q.rets.iter().enumerate() {
                if matches!(r, QRet::Count(_)) {
                    rows[at][i] = Json::from(rows[at][i].as_u64().unwrap() + 1);
                }
            }
        }
        if rows.len() > limit {
            truncated = limit == ceiling;
            rows.truncate(limit);
        }
    } else {
        if matches.len() > limit {
            truncated = limit == ceiling;
        }
        rows = matches.iter().take(limit).map(project).collect();
    }
    Answer {
        columns: q.columns(),
        rows,
        truncated,
    }
}

// ---------------------------------------------------------------------------
// Traversal.

/// Shortest hop count from `root` to every node within `depth` hops,
/// following `edges` as given.
pub fn bfs(edges: &[(usize, usize)], root: usize, depth: u32) -> BTreeMap<usize, u32> {
    let mut dist: BTreeMap<usize, u32> = BTreeMap::new();
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([(root, 0u32)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for &(a, b) in edges {
            if a == u && seen.insert(b) {
                dist.insert(b, d + 1);
                queue.push_back((b, d + 1));
            }
        }
    }
    dist
}

// ---------------------------------------------------------------------------
// Modularity.

/// Undirected weighted graph as a dense matrix; self-loops dropped and
/// parallel edges summed.
pub struct Dense {
    pub w: Vec<Vec<f64>>,
}

impl Dense {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Dense {
        let mut w = vec![vec![0.0; n]; n];
        for &(a, b, x) in edges {
            if a != b {
                w[a][b] += x;
                w[b][a] += x;
            }
        }
        Dense { w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.w[i].iter().sum()
    }

    pub fn total(&self) -> f64 {
        (0..self.len()).map(|i| self.degree(i)).sum::<f64>() / 2.0
    }

    /// `Q = 1/(2m) Σ_ij [A_ij - γ k_i k_j / 2m] δ(c_i, c_j)`.
    pub fn modularity(&self, c: &[usize], gamma: f64) -> f64 {
        let m = self.total();
        if m == 0.0 {
            return 0.0;
        }
        let n = self.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if c[i] == c[j] {
                    q += self.w[i][j] - gamma * self.degree(i) * self.degree(j) / (2.0 * m);
                }
            }
        }
        q / (2.0 * m)
    }
}

/// Every set partition of `0..n` as restricted-growth strings.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur[i] = c;
            rec(i + 1, max.max(c), cur, out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    rec(1, 0, &mut cur, &mut out);
    out
}

/// Canonical form of a partition: each community renamed by first
/// appearance.
pub fn canonical(c: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    c.iter()
        .map(|x| {
            let next = map.len();
            *map.entry(*x).or_insert(next)
        })
        .collect()
}
