//! Mesoscopic network assembly: similarity candidates between non-overlapping
//! windows, pruning to a target average degree, and the sequence chain.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::io::{self, Write};

use rayon::prelude::*;

use crate::corpus::OrganizedText;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::vectorize::{build_windows, cosine, fit_tfidf, vectorize_window, SparseVector};

pub const DEFAULT_DELTA: usize = 1;
pub const DEFAULT_AVG_DEGREE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Similarity,
    Sequence,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Similarity => "similarity",
            EdgeKind::Sequence => "sequence",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
    /// Cosine similarity for similarity edges, `None` for sequence edges.
    pub weight: Option<f64>,
}

/// Candidate similarity edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Cosine similarity for every pair with `b - a > delta`, in `(a, b)` order.
pub fn candidate_edges(vectors: &[SparseVector], delta: usize) -> Vec<WeightedPair> {
    let n = vectors.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            (a + delta + 1..n).map(move |b| WeightedPair { a, b, weight: cosine(&vectors[a], &vectors[b]) })
        })
        .collect()
}

/// Strongest first; ties go to the smaller min index, then the smaller max index.
fn strength_order(x: &WeightedPair, y: &WeightedPair) -> Ordering {
    y.weight.total_cmp(&x.weight).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b))
}

/// Number of undirected similarity edges kept for `n` nodes at average degree `t`.
pub fn edge_budget(n: usize, t: f64) -> usize {
    (n as f64 * t / 2.0).ceil() as usize
}

/// Keeps the `⌈n·t/2⌉` strongest candidates (all of them if there are fewer),
/// returned in `(a, b)` order.
pub fn prune_to_average_degree(mut candidates: Vec<WeightedPair>, n: usize, t: f64) -> Result<Vec<WeightedPair>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("average degree must be positive, got {t}")));
    }
    for c in &mut candidates {
        if c.a > c.b {
            std::mem::swap(&mut c.a, &mut c.b);
        }
    }
    let budget = edge_budget(n, t);
    if budget < candidates.len() {
        if budget > 0 {
            candidates.select_nth_unstable_by(budget - 1, strength_order);
        }
        candidates.truncate(budget);
    }
    candidates.sort_unstable_by_key(|x| (x.a, x.b));
    Ok(candidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesoNetwork {
    pub node_count: usize,
    /// Sorted by `(a, b)`, with `a < b`.
    pub edges: Vec<Edge>,
    pub delta: usize,
    pub threshold: f64,
}

impl MesoNetwork {
    /// Adds the `n - 1` sequence edges to a pruned similarity edge set.
    pub fn assemble(node_count: usize, similarity: &[WeightedPair], delta: usize, threshold: f64) -> Self {
        let mut edges: Vec<Edge> = similarity
            .iter()
            .map(|p| Edge { a: p.a.min(p.b), b: p.a.max(p.b), kind: EdgeKind::Similarity, weight: Some(p.weight) })
            .collect();
        edges.extend((1..node_count).map(|i| Edge { a: i - 1, b: i, kind: EdgeKind::Sequence, weight: None }));
        edges.sort_by_key(|x| (x.a, x.b));
        MesoNetwork { node_count, edges, delta, threshold }
    }

    pub fn similarity_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Similarity)
    }

    pub fn similarity_edge_count(&self) -> usize {
        self.similarity_edges().count()
    }

    /// `2·|similarity edges| / n`.
    pub fn similarity_average_degree(&self) -> f64 {
        2.0 * self.similarity_edge_count() as f64 / self.node_count as f64
    }

    /// Unweighted view over all edges.
    pub fn to_graph(&self) -> Graph {
        Graph::from_edges(self.node_count, self.edges.iter().map(|e| (e.a, e.b)))
    }

    /// `true` at every node touched by at least one similarity edge.
    pub fn similarity_incidence(&self) -> Vec<bool> {
        let mut incident = vec![false; self.node_count];
        for e in self.similarity_edges() {
            incident[e.a] = true;
            incident[e.b] = true;
        }
        incident
    }

    /// `<book>.mesonet.tsv`: the `# n= delta= t=` header, any extra comment
    /// lines, then `a\tb\tkind\tweight` rows.
    pub fn to_tsv(&self, comments: &[String]) -> String {
        let mut out = format!("# n={} delta={} t={}\n", self.node_count, self.delta, self.threshold);
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        for e in &self.edges {
            match e.weight {
                Some(w) => {
                    let _ = writeln!(out, "{}\t{}\t{}\t{:.9}", e.a, e.b, e.kind, w);
                }
                None => {
                    let _ = writeln!(out, "{}\t{}\t{}\t-", e.a, e.b, e.kind);
                }
            }
        }
        out
    }

    /// Parses and validates a network file. Errors name the offending line (1-based).
    pub fn from_tsv(input: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let fail = |line: usize, message: String| Error::NetworkFormat { line, message };
        let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
        let (n, delta, t) = parse_header(header).map_err(|m| fail(1, m))?;

        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(fail(line_no, format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            let a: usize = fields[0].parse().map_err(|_| fail(line_no, format!("bad node index {:?}", fields[0])))?;
            let b: usize = fields[1].parse().map_err(|_| fail(line_no, format!("bad node index {:?}", fields[1])))?;
            if a >= n || b >= n {
                return Err(fail(line_no, format!("node index out of range for n={n}")));
            }
            if a == b {
                return Err(fail(line_no, "self-loop".into()));
            }
            let (a, b) = (a.min(b), a.max(b));
            if !seen.insert((a, b)) {
                return Err(fail(line_no, format!("duplicate edge ({a}, {b})")));
            }
            let edge = match fields[2] {
                "similarity" => {
                    let w: f64 = fields[3]
                        .parse()
                        .map_err(|_| fail(line_no, format!("bad similarity weight {:?}", fields[3])))?;
                    if b - a <= delta {
                        return Err(fail(line_no, format!("similarity edge ({a}, {b}) within delta={delta}")));
                    }
                    Edge { a, b, kind: EdgeKind::Similarity, weight: Some(w) }
                }
                "sequence" => {
                    if fields[3] != "-" {
                        return Err(fail(line_no, "sequence edges take '-' as weight".into()));
                    }
                    if b != a + 1 {
                        return Err(fail(
                            line_no,
                            format!("sequence edge ({a}, {b}) is not between consecutive nodes"),
                        ));
                    }
                    Edge { a, b, kind: EdgeKind::Sequence, weight: None }
                }
                other => return Err(fail(line_no, format!("unknown edge kind {other:?}"))),
            };
            edges.push(edge);
        }
        let sequence = edges.iter().filter(|e| e.kind == EdgeKind::Sequence).count();
        if sequence != n.saturating_sub(1) {
            return Err(fail(1, format!("expected {} sequence edges, found {sequence}", n.saturating_sub(1))));
        }
        edges.sort_by_key(|x| (x.a, x.b));
        Ok(MesoNetwork { node_count: n, edges, delta, threshold: t })
    }
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize, f64), String> {
    let rest = line.strip_prefix("# ").ok_or("header must start with '# '")?;
    let (mut n, mut delta, mut t) = (None, None, None);
    for part in rest.split_whitespace() {
        let (key, value) = part.split_once('=').ok_or_else(|| format!("malformed header field {part:?}"))?;
        match key {
            "n" => n = value.parse().ok(),
            "delta" => delta = value.parse().ok(),
            "t" => t = value.parse().ok(),
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    match (n, delta, t) {
        (Some(n), Some(d), Some(t)) => Ok((n, d, t)),
        _ => Err("header needs n=<int> delta=<int> t=<real>".into()),
    }
}

/// Window tf-idf vectors of an organized text.
pub fn window_vectors(o: &OrganizedText, delta: usize) -> Result<Vec<SparseVector>> {
    let windows = build_windows(o, delta)?;
    let model = fit_tfidf(&windows)?;
    Ok(windows.par_iter().map(|w| vectorize_window(w, &model)).collect())
}

pub fn build_network(o: &OrganizedText, delta: usize, t: f64) -> Result<MesoNetwork> {
    let vectors = window_vectors(o, delta)?;
    build_network_from_vectors(&vectors, delta, t)
}

pub fn build_network_from_vectors(vectors: &[SparseVector], delta: usize, t: f64) -> Result<MesoNetwork> {
    let n = vectors.len();
    let candidates = candidate_edges(vectors, delta);
    let kept = prune_to_average_degree(candidates, n, t)?;
    Ok(MesoNetwork::assemble(n, &kept, delta, t))
}

/// Writes the full pairwise cosine matrix as CSV with 9 decimal digits.
pub fn write_similarity_csv<W: Write>(vectors: &[SparseVector], mut out: W) -> io::Result<()> {
    let n = vectors.len();
    let header: Vec<String> = std::iter::once("node".to_string()).chain((0..n).map(|j| j.to_string())).collect();
    writeln!(out, "{}", header.join(","))?;
    for (i, u) in vectors.iter().enumerate() {
        let mut row = i.to_string();
        for v in vectors {
            let _ = write!(row, ",{:.9}", cosine(u, v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}
