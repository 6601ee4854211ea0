//! The six-strategy name cascade.
//!
//! Strategies run in list order and the first hit wins:
//!
//! | # | strategy        | confidence |
//! |---|-----------------|------------|
//! | 1 | ImportMap       | 0.95 |
//! | 2 | ImportMapSuffix | 0.85 |
//! | 3 | SameModule      | 0.90 |
//! | 4 | UniqueName      | 0.75, or 0.60 when not import-reachable |
//! | 5 | SuffixMatch     | 0.55 |
//! | 6 | Fuzzy           | 0.30..=0.40 |

use serde::{Deserialize, Serialize};

use super::{FunctionRegistry, ImportMap};

pub const FUZZY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    ImportMap,
    ImportMapSuffix,
    SameModule,
    UniqueName,
    SuffixMatch,
    Fuzzy,
    Unresolved,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ImportMap => "import_map",
            Strategy::ImportMapSuffix => "import_map_suffix",
            Strategy::SameModule => "same_module",
            Strategy::UniqueName => "unique_name",
            Strategy::SuffixMatch => "suffix_match",
            Strategy::Fuzzy => "fuzzy",
            Strategy::Unresolved => "unresolved",
        }
    }

    /// 1-based position in the cascade.
    pub fn rank(self) -> u8 {
        self as u8 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionResult {
    pub target_qname: Option<String>,
    pub strategy: Strategy,
    pub confidence: f64,
}

impl ResolutionResult {
    pub fn unresolved() -> Self {
        ResolutionResult {
            target_qname: None,
            strategy: Strategy::Unresolved,
            confidence: 0.0,
        }
    }

    fn hit(target: &str, strategy: Strategy, confidence: f64) -> Self {
        ResolutionResult {
            target_qname: Some(target.to_string()),
            strategy,
            confidence,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.target_qname.is_some()
    }
}

/// Runs the full cascade.
pub fn resolve_callee(
    registry: &FunctionRegistry,
    callee_text: &str,
    import_map: &ImportMap,
    enclosing_module_qname: &str,
) -> ResolutionResult {
    resolve_with(registry, callee_text, import_map, enclosing_module_qname, 6)
}

/// Runs strategies `1..=last` only.
pub fn resolve_with(
    registry: &FunctionRegistry,
    callee_text: &str,
    import_map: &ImportMap,
    module: &str,
    last: u8,
) -> ResolutionResult {
    if callee_text.is_empty() || registry.is_empty() {
        return ResolutionResult::unresolved();
    }
    let attempts: [&dyn Fn() -> Option<ResolutionResult>; 6] = [
        &|| import_exact(registry, callee_text, import_map),
        &|| import_suffix(registry, callee_text, import_map),
        &|| same_module(registry, callee_text, module),
        &|| unique_name(registry, callee_text, import_map, module),
        &|| suffix_match(registry, callee_text, import_map, module),
        &|| {
            let r = fuzzy_match(callee_text, registry, import_map, module);
            r.is_resolved().then_some(r)
        },
    ];
    attempts
        .iter()
        .take(last as usize)
        .find_map(|attempt| attempt())
        .unwrap_or_else(ResolutionResult::unresolved)
}

/// Alias prefixes of `callee`, longest first: `a.b.c` yields
/// (`a.b.c`, ""), (`a.b`, "c"), (`a`, "b.c").
fn alias_splits(callee: &str) -> impl Iterator<Item = (&str, &str)> {
    let dots: Vec<usize> = callee.match_indices('.').map(|(i, _)| i).collect();
    std::iter::once((callee, ""))
        .chain(dots.into_iter().rev().map(move |i| (&callee[..i], &callee[i + 1..])))
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

/// Candidate qualified names implied by the import map, in priority order.
fn import_targets(callee: &str, import_map: &ImportMap) -> Vec<String> {
    let mut out: Vec<String> = alias_splits(callee)
        .filter_map(|(alias, rest)| import_map.lookup(alias).map(|t| join(t, rest)))
        .collect();
    out.extend(import_map.wildcards().iter().map(|w| join(w, callee)));
    out
}

fn import_exact(reg: &FunctionRegistry, callee: &str, imports: &ImportMap) -> Option<ResolutionResult> {
    import_targets(callee, imports)
        .into_iter()
        .find(|t| reg.contains(t))
        .map(|t| ResolutionResult::hit(&t, Strategy::ImportMap, 0.95))
}

fn segments(q: &str) -> Vec<&str> {
    q.split('.').filter(|s| !s.is_empty()).collect()
}

/// Number of equal trailing segments.
fn common_suffix(a: &[&str], b: &[&str]) -> usize {
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count()
}

/// An aliased import whose exact target is missing: pick the registered
/// definition with the same simple name that lives under the import's
/// top-level package and ends with the callee remainder (re-exports,
/// source-root prefixes). Longest shared suffix wins, then the shorter
/// name, then lexicographic order.
fn import_suffix(reg: &FunctionRegistry, callee: &str, imports: &ImportMap) -> Option<ResolutionResult> {
    for (alias, rest) in alias_splits(callee) {
        let Some(target) = imports.lookup(alias) else { continue };
        let want = join(target, rest);
        let want_segs = segments(&want);
        let (Some(top), Some(name)) = (want_segs.first(), want_segs.last()) else { continue };
        let rest_segs = segments(rest);
        let best = reg
            .candidates(name)
            .iter()
            .filter_map(|q| {
                let q_segs = segments(q);
                if !q_segs.contains(top) || common_suffix(&q_segs, &rest_segs) < rest_segs.len() {
                    return None;
                }
                Some((common_suffix(&q_segs, &want_segs), q))
            })
            .min_by(|a, b| b.0.cmp(&a.0).then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(b.1)));
        if let Some((_, q)) = best {
            return Some(ResolutionResult::hit(q, Strategy::ImportMapSuffix, 0.85));
        }
    }
    None
}

fn same_module(reg: &FunctionRegistry, callee: &str, module: &str) -> Option<ResolutionResult> {
    let q = join(module, callee);
    reg.contains(&q).then(|| ResolutionResult::hit(&q, Strategy::SameModule, 0.90))
}

fn simple_of(callee: &str) -> &str {
    callee.rsplit('.').next().unwrap_or(callee)
}

fn unique_name(
    reg: &FunctionRegistry,
    callee: &str,
    imports: &ImportMap,
    module: &str,
) -> Option<ResolutionResult> {
    match reg.candidates(simple_of(callee)) {
        [only] => {
            let reachable = import_distance(reg, only, imports, module) == 0;
            let confidence = if reachable { 0.75 } else { 0.60 };
            Some(ResolutionResult::hit(only, Strategy::UniqueName, confidence))
        }
        _ => None,
    }
}

/// Nearest candidate by import distance, then lexicographic order. A dotted
/// callee first narrows to candidates ending with its full dotted form.
fn suffix_match(
    reg: &FunctionRegistry,
    callee: &str,
    imports: &ImportMap,
    module: &str,
) -> Option<ResolutionResult> {
    let all = reg.candidates(simple_of(callee));
    if all.is_empty() {
        return None;
    }
    let dotted_tail = format!(".{callee}");
    let narrowed: Vec<&String> = all.iter().filter(|q| q.ends_with(&dotted_tail)).collect();
    let pool: Vec<&String> = if narrowed.is_empty() { all.iter().collect() } else { narrowed };
    nearest(reg, pool.into_iter(), imports, module)
        .map(|q| ResolutionResult::hit(q, Strategy::SuffixMatch, 0.55))
}

fn nearest<'a>(
    reg: &FunctionRegistry,
    pool: impl Iterator<Item = &'a String>,
    imports: &ImportMap,
    module: &str,
) -> Option<&'a String> {
    pool.map(|q| (import_distance(reg, q, imports, module), q))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)))
        .map(|(_, q)| q)
}

/// Path distance between a candidate's module and the nearest of the
/// enclosing module and the imported modules: segments left over on both
/// sides after their longest common prefix. Zero when the candidate sits in
/// the enclosing module or under a directly imported module.
pub fn import_distance(
    registry: &FunctionRegistry,
    candidate_qname: &str,
    import_map: &ImportMap,
    enclosing_module_qname: &str,
) -> usize {
    let module = registry.module_of(candidate_qname);
    let cand = segments(module);
    let metric = |reference: &str| {
        let r = segments(reference);
        let lcp = cand.iter().zip(&r).take_while(|(a, b)| a == b).count();
        (cand.len() - lcp) + (r.len() - lcp)
    };
    let mut best = metric(enclosing_module_qname);
    for target in import_map.targets() {
        if candidate_qname == target
            || module == target
            || candidate_qname.strip_prefix(target).is_some_and(|r| r.starts_with('.'))
        {
            return 0;
        }
        best = best.min(metric(target));
    }
    best
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)` over chars.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let max = a.len().max(b.len());
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein_bounded(&a, &b, max).unwrap_or(max) as f64 / max as f64
}

/// Levenshtein distance, or `None` once it provably exceeds `bound`.
fn levenshtein_bounded(a: &[char], b: &[char], bound: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > bound {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > bound {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= bound).then_some(d)
}

/// Best simple name with similarity ≥ the threshold: highest similarity,
/// then lexicographically smallest name.
fn best_fuzzy_name(registry: &FunctionRegistry, name: &str) -> Option<(String, f64)> {
    let chars: Vec<char> = name.chars().collect();
    let n = chars.len();
    if n == 0 {
        return None;
    }
    let buckets = registry.fuzzy_buckets();
    // s ≥ 0.8 needs |n - m| ≤ d ≤ 0.2·max(n, m).
    let lo = (n * 4).div_ceil(5);
    let hi = n * 5 / 4;
    let mut best: Option<(String, f64)> = None;
    #[allow(clippy::needless_range_loop)]
    for len in lo..=hi.min(buckets.len().saturating_sub(1)) {
        let max = n.max(len);
        let bound = max / 5;
        for cand in &buckets[len] {
            let c: Vec<char> = cand.chars().collect();
            let Some(d) = levenshtein_bounded(&chars, &c, bound) else { continue };
            let s = 1.0 - d as f64 / max as f64;
            if s + 1e-12 < FUZZY_THRESHOLD {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bn, bs)) => s > *bs + 1e-12 || ((s - bs).abs() <= 1e-12 && cand < bn),
            };
            if better {
                best = Some((cand.clone(), s));
            }
        }
    }
    best
}

/// Last-resort similarity match over simple names.
pub fn fuzzy_match(
    callee_text: &str,
    registry: &FunctionRegistry,
    import_map: &ImportMap,
    module: &str,
) -> ResolutionResult {
    let name = simple_of(callee_text);
    let Some((best, s)) = registry.fuzzy_cached(name, || best_fuzzy_name(registry, name)) else {
        return ResolutionResult::unresolved();
    };
    let Some(target) = nearest(registry, registry.candidates(&best).iter(), import_map, module) else {
        return ResolutionResult::unresolved();
    };
    let confidence = (0.30 + 0.10 * (s - FUZZY_THRESHOLD) / (1.0 - FUZZY_THRESHOLD)).clamp(0.30, 0.40);
    ResolutionResult::hit(target, Strategy::Fuzzy, confidence)
}
