//! Experiment statistics: group separation, correlations, genre projection with
//! Louvain communities, book labeling, a nearest-centroid check and a PCA
//! baseline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{mean, population_std};

pub const MEAN_K: &str = "mean_k";
pub const STD_K: &str = "std_k";
pub const MEAN_S: &str = "mean_S";
pub const RS_MEAN: &str = "rsMean";
pub const RS_STD: &str = "rsStd";

/// Network features used for discrimination.
pub const NETWORK_FEATURES: [&str; 3] = [MEAN_K, STD_K, MEAN_S];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Shuffled,
    Fiction,
    Others,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Shuffled => "shuffled",
            Label::Fiction => "fiction",
            Label::Others => "others",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub book_id: String,
    pub label: Label,
    pub features: BTreeMap<String, f64>,
}

impl FeatureRecord {
    pub fn feature(&self, name: &str) -> Result<f64> {
        self.features
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("{}: missing feature {name:?}", self.book_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separation {
    pub rmse: f64,
    /// Features with zero pooled variance; they contribute 0.
    pub flagged: Vec<String>,
}

/// Root mean squared difference between group centroids after z-standardizing
/// each feature over the pooled records (population standard deviation).
pub fn rmse_separation(a: &[FeatureRecord], b: &[FeatureRecord], names: &[&str]) -> Result<Separation> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("both groups must be non-empty".into()));
    }
    if names.is_empty() {
        return Err(Error::InvalidParameter("no features named".into()));
    }
    let mut sq = 0.0;
    let mut flagged = Vec::new();
    for &name in names {
        let xa = a.iter().map(|r| r.feature(name)).collect::<Result<Vec<_>>>()?;
        let xb = b.iter().map(|r| r.feature(name)).collect::<Result<Vec<_>>>()?;
        let pooled: Vec<f64> = xa.iter().chain(&xb).copied().collect();
        let sd = population_std(&pooled);
        if sd == 0.0 {
            flagged.push(name.to_string());
            continue;
        }
        let d = (mean(&xa) - mean(&xb)) / sd;
        sq += d * d;
    }
    Ok(Separation { rmse: (sq / names.len() as f64).sqrt(), flagged })
}

fn check_series(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation(format!("length mismatch {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!("need at least 3 points, got {}", x.len())));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_series(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_series(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Genre co-membership graph. Edge keys are `(min, max)` node indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenreGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeMap<(usize, usize), u32>,
}

impl GenreGraph {
    pub fn index_of(&self, genre: &str) -> Option<usize> {
        self.nodes.binary_search_by(|g| g.as_str().cmp(genre)).ok()
    }

    fn weighted_adjacency(&self) -> Vec<BTreeMap<usize, f64>> {
        let mut adj = vec![BTreeMap::new(); self.nodes.len()];
        for (&(a, b), &w) in &self.edges {
            *adj[a].entry(b).or_insert(0.0) += w as f64;
            *adj[b].entry(a).or_insert(0.0) += w as f64;
        }
        adj
    }
}

/// Projects the book–genre bipartite graph onto genres. Nodes are sorted; edge
/// weight counts the books listing both genres.
pub fn bipartite_project(books: &[(String, Vec<String>)]) -> GenreGraph {
    let nodes: Vec<String> =
        books.iter().flat_map(|(_, gs)| gs.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let mut edges = BTreeMap::new();
    for (_, genres) in books {
        let ids: BTreeSet<usize> = genres.iter().map(|g| index[g.as_str()]).collect();
        let ids: Vec<usize> = ids.into_iter().collect();
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                *edges.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    GenreGraph { nodes, edges }
}

/// Node → community id, ids dense from 0 in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignment: Vec<usize>,
}

impl Partition {
    pub fn from_assignment(raw: &[usize]) -> Self {
        let mut relabel = HashMap::new();
        let assignment = raw
            .iter()
            .map(|c| {
                let next = relabel.len();
                *relabel.entry(*c).or_insert(next)
            })
            .collect();
        Partition { assignment }
    }

    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.community_count()];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self, community: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&v| self.assignment[v] == community).collect()
    }
}

/// Weighted Newman modularity at resolution 1.
pub fn modularity(g: &GenreGraph, p: &Partition) -> f64 {
    modularity_of(&g.weighted_adjacency(), &p.assignment)
}

fn modularity_of(adj: &[BTreeMap<usize, f64>], community: &[usize]) -> f64 {
    let degree: Vec<f64> = adj.iter().map(|row| row.values().sum()).collect();
    let two_m: f64 = degree.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let k = community.iter().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for (v, row) in adj.iter().enumerate() {
        total[community[v]] += degree[v];
        for (&w, &a) in row {
            if community[w] == community[v] {
                internal[community[v]] += a;
            }
        }
    }
    (0..k).map(|c| internal[c] / two_m - (total[c] / two_m).powi(2)).sum()
}

/// Louvain: greedy local moves in a seeded node order, then aggregation, until
/// no node moves.
pub fn detect_communities(g: &GenreGraph, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = g.weighted_adjacency();
    let mut membership: Vec<usize> = (0..g.nodes.len()).collect();
    loop {
        let (community, moved) = local_moves(&adj, &mut rng);
        if !moved {
            break;
        }
        let relabeled = Partition::from_assignment(&community).assignment;
        for m in membership.iter_mut() {
            *m = relabeled[*m];
        }
        let k = relabeled.iter().max().map_or(0, |m| m + 1);
        let mut next = vec![BTreeMap::new(); k];
        for (v, row) in adj.iter().enumerate() {
            for (&w, &a) in row {
                *next[relabeled[v]].entry(relabeled[w]).or_insert(0.0) += a;
            }
        }
        adj = next;
    }
    Partition::from_assignment(&membership)
}

fn local_moves(adj: &[BTreeMap<usize, f64>], rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = adj.len();
    let degree: Vec<f64> = adj.iter().map(|row| row.values().sum()).collect();
    let two_m: f64 = degree.iter().sum();
    let mut community: Vec<usize> = (0..n).collect();
    if two_m == 0.0 {
        return (community, false);
    }
    let mut total = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let own = community[v];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for (&w, &a) in &adj[v] {
                if w != v {
                    *links.entry(community[w]).or_insert(0.0) += a;
                }
            }
            total[own] -= degree[v];
            let gain = |c: usize, links_to: f64| links_to - total[c] * degree[v] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
            for (&c, &l) in &links {
                let g = gain(c, l);
                if g > best_gain + 1e-12 {
                    best = c;
                    best_gain = g;
                }
            }
            total[best] += degree[v];
            if best != own {
                community[v] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, moved_any)
}

/// Fiction iff strictly more than half of the book's known genres fall in
/// `fiction`. Genres missing from `genre_community` are skipped with a warning.
pub fn label_book(genres: &[String], genre_community: &HashMap<String, usize>, fiction: &BTreeSet<usize>) -> Label {
    let mut mapped = 0;
    let mut hits = 0;
    for g in genres.iter().collect::<BTreeSet<_>>() {
        match genre_community.get(g) {
            Some(c) => {
                mapped += 1;
                if fiction.contains(c) {
                    hits += 1;
                }
            }
            None => log::warn!("genre {g:?} not in the community partition; ignored"),
        }
    }
    if mapped > 0 && 2 * hits > mapped {
        Label::Fiction
    } else {
        Label::Others
    }
}

/// Ids of the `k` largest communities, ties to the smaller id.
pub fn largest_communities(p: &Partition, k: usize) -> BTreeSet<usize> {
    let sizes = p.sizes();
    let mut ids: Vec<usize> = (0..sizes.len()).collect();
    ids.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    ids.into_iter().take(k).collect()
}

/// Leave-one-out nearest-centroid accuracy. Each held-out record is classified
/// by Euclidean distance to the class centroids of the remaining records, with
/// features z-standardized on the remaining records.
pub fn loo_nearest_centroid(records: &[FeatureRecord], names: &[&str]) -> Result<f64> {
    if records.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 records".into()));
    }
    let x: Vec<Vec<f64>> = records
        .iter()
        .map(|r| names.iter().map(|n| r.feature(n)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut correct = 0;
    for held in 0..records.len() {
        let train: Vec<usize> = (0..records.len()).filter(|&i| i != held).collect();
        let dims = names.len();
        let mut mu = vec![0.0; dims];
        let mut sd = vec![0.0; dims];
        for d in 0..dims {
            let col: Vec<f64> = train.iter().map(|&i| x[i][d]).collect();
            mu[d] = mean(&col);
            sd[d] = population_std(&col);
        }
        let z = |row: &[f64]| -> Vec<f64> {
            (0..dims).map(|d| if sd[d] > 0.0 { (row[d] - mu[d]) / sd[d] } else { 0.0 }).collect()
        };
        let mut centroids: BTreeMap<Label, (Vec<f64>, usize)> = BTreeMap::new();
        for &i in &train {
            let e = centroids.entry(records[i].label).or_insert_with(|| (vec![0.0; dims], 0));
            for (acc, v) in e.0.iter_mut().zip(z(&x[i])) {
                *acc += v;
            }
            e.1 += 1;
        }
        let q = z(&x[held]);
        let predicted = centroids
            .iter()
            .map(|(label, (sum, count))| {
                let d2: f64 = sum.iter().zip(&q).map(|(s, v)| (s / *count as f64 - v).powi(2)).sum();
                (d2, *label)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, l)| l);
        if predicted == Some(records[held].label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / records.len() as f64)
}

pub const PCA_TOLERANCE: f64 = 1e-9;
pub const PCA_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub points: Vec<[f64; 2]>,
    /// Unit principal directions.
    pub components: [Vec<f64>; 2],
    /// Variance of the projected data along each component (divides by `n`).
    pub variance: [f64; 2],
    /// Total variance of the centered data.
    pub total_variance: f64,
}

/// Projects mean-centered rows onto the two leading principal directions.
///
/// Subspace iteration on `XᵀX` (applied implicitly, so wide tf-idf rows are
/// fine); a direction has converged once its residual `‖Av − λv‖` falls below
/// `1e-9 · λ₁`. Each component's largest-magnitude
/// loading is made positive.
pub fn pca2(rows: &[Vec<f64>]) -> Result<Pca2> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("pca2 needs at least 3 records, got {n}")));
    }
    let dim = rows[0].len();
    if dim < 2 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidParameter("pca2 needs rows of equal dimension ≥ 2".into()));
    }
    let mut centre = vec![0.0; dim];
    for r in rows {
        for (c, v) in centre.iter_mut().zip(r) {
            *c += v / n as f64;
        }
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&centre).map(|(v, c)| v - c).collect()).collect();
    let total_variance = x.iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>() / n as f64;

    // A v = Xᵀ X v / n
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for r in &x {
            let s: f64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
            if s != 0.0 {
                for (o, a) in out.iter_mut().zip(r) {
                    *o += s * a;
                }
            }
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        out
    };

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let combine = |a: &[f64], b: &[f64], (ca, cb): (f64, f64)| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| ca * x + cb * y).collect()
    };

    // Two-vector subspace iteration with a Rayleigh-Ritz step on the 2x2
    // projection, so both directions converge together.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut random = |dim: usize| -> Vec<f64> { (0..dim).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect() };
    let mut basis = vec![random(dim), random(dim)];
    orthonormalize_pair(&mut basis, &mut random);
    let mut result = None;
    for _ in 0..PCA_MAX_ITERATIONS {
        let w = [apply(&basis[0]), apply(&basis[1])];
        let a = dot(&basis[0], &w[0]);
        let d = dot(&basis[1], &w[1]);
        let b = 0.5 * (dot(&basis[0], &w[1]) + dot(&basis[1], &w[0]));
        let phi = 0.5 * (2.0 * b).atan2(a - d);
        let rotations = [(phi.cos(), phi.sin()), (-phi.sin(), phi.cos())];
        let ritz: Vec<(f64, Vec<f64>, Vec<f64>)> = rotations
            .iter()
            .map(|&q| {
                let y = combine(&basis[0], &basis[1], q);
                let ay = combine(&w[0], &w[1], q);
                (dot(&y, &ay), y, ay)
            })
            .collect();
        let scale = ritz[0].0.max(ritz[1].0).max(0.0);
        let converged = ritz.iter().all(|(theta, y, ay)| {
            let residual = ay.iter().zip(y).map(|(p, q)| (p - theta * q).powi(2)).sum::<f64>().sqrt();
            residual <= PCA_TOLERANCE * scale
        });
        if converged {
            let mut pairs: Vec<(f64, Vec<f64>)> = ritz.into_iter().map(|(t, y, _)| (t.max(0.0), y)).collect();
            pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
            result = Some(pairs);
            break;
        }
        basis = w.to_vec();
        orthonormalize_pair(&mut basis, &mut random);
    }
    let mut found = result.ok_or(Error::NonConvergence { iterations: PCA_MAX_ITERATIONS })?;
    for (_, v) in &mut found {
        fix_sign(v);
    }
    let points = x
        .iter()
        .map(|r| {
            let p = |u: &[f64]| r.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
            [p(&found[0].1), p(&found[1].1)]
        })
        .collect::<Vec<_>>();
    let var = |k: usize| points.iter().map(|p: &[f64; 2]| p[k] * p[k]).sum::<f64>() / n as f64;
    let variance = [var(0), var(1)];
    let mut it = found.into_iter().map(|(_, v)| v);
    let components = [it.next().unwrap(), it.next().unwrap()];
    Ok(Pca2 { points, components, variance, total_variance })
}

/// Gram-Schmidt on two vectors. A column that vanishes (rank-deficient data)
/// is replaced by a fresh random direction.
fn orthonormalize_pair(basis: &mut [Vec<f64>], random: &mut impl FnMut(usize) -> Vec<f64>) {
    let dim = basis[0].len();
    for k in 0..2 {
        loop {
            let before = basis[k].iter().map(|x| x * x).sum::<f64>().sqrt();
            // Two passes keep the result orthogonal to working precision.
            for _ in 0..2 {
                for j in 0..k {
                    let proj: f64 = basis[j].iter().zip(&basis[k]).map(|(a, b)| a * b).sum();
                    let u = basis[j].clone();
                    basis[k].iter_mut().zip(&u).for_each(|(x, ui)| *x -= proj * ui);
                }
            }
            let norm = basis[k].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 * before && norm > 0.0 {
                basis[k].iter_mut().for_each(|x| *x /= norm);
                break;
            }
            basis[k] = random(dim);
        }
    }
}

fn fix_sign(v: &mut [f64]) {
    let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn record(id: &str, label: Label, pairs: &[(&str, f64)]) -> FeatureRecord {
        FeatureRecord { book_id: id.into(), label, features: pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect() }
    }

    #[test]
    fn rmse_identical_groups() {
        let a = vec![
            record("a", Label::Real, &[("x", 1.0), ("y", 2.0)]),
            record("b", Label::Real, &[("x", 3.0), ("y", 0.0)]),
        ];
        assert_eq!(rmse_separation(&a, &a, &["x", "y"]).unwrap().rmse, 0.0);
    }

    #[test]
    fn rmse_one_standardized_unit() {
        // Pooled x has mean 0 and sd 2; group centroids are -1 and +1, so the
        // standardized gap is 1. y is identically distributed in both groups.
        let s3 = 3f64.sqrt();
        let a = vec![
            record("a1", Label::Real, &[("x", -1.0 - s3), ("y", 0.0)]),
            record("a2", Label::Real, &[("x", -1.0 + s3), ("y", 1.0)]),
        ];
        let b = vec![
            record("b1", Label::Shuffled, &[("x", 1.0 - s3), ("y", 0.0)]),
            record("b2", Label::Shuffled, &[("x", 1.0 + s3), ("y", 1.0)]),
        ];
        let s = rmse_separation(&a, &b, &["x", "y"]).unwrap();
        assert_abs_diff_eq!(s.rmse, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.rmse, rmse_separation(&b, &a, &["x", "y"]).unwrap().rmse, epsilon = 1e-15);
    }

    #[test]
    fn rmse_flags_constant_features() {
        let a = vec![record("a", Label::Real, &[("x", 1.0), ("c", 5.0)])];
        let b = vec![record("b", Label::Shuffled, &[("x", 2.0), ("c", 5.0)])];
        let s = rmse_separation(&a, &b, &["x", "c"]).unwrap();
        assert_eq!(s.flagged, vec!["c".to_string()]);
        // x standardizes to ±1: gap 2, averaged over two features.
        assert_abs_diff_eq!(s.rmse, 2.0f64.sqrt(), epsilon = 1e-12);
        assert!(rmse_separation(&a, &[], &["x"]).is_err());
        assert!(rmse_separation(&a, &b, &["missing"]).is_err());
    }

    #[test]
    fn correlation_fixed_points() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.7 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
        let cubed: Vec<f64> = x.iter().map(|v| -v.powi(3)).collect();
        assert_abs_diff_eq!(spearman(&x, &cubed).unwrap(), -1.0, epsilon = 1e-12);
        assert!(matches!(pearson(&x, &[3.0; 8]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(spearman(&[3.0; 8], &x), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0, 2.0], &[2.0, 1.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        // Hand-computed: ranks x = [1,2,3,4,5], y = [1.5,1.5,3,5,4]
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 1.0, 2.0, 9.0, 3.0]).unwrap();
        assert_abs_diff_eq!(rho, 0.8720815992723809, epsilon = 1e-12);
    }

    fn books(list: &[&[&str]]) -> Vec<(String, Vec<String>)> {
        list.iter().enumerate().map(|(i, gs)| (format!("b{i}"), gs.iter().map(|s| s.to_string()).collect())).collect()
    }

    #[test]
    fn projection() {
        let g = bipartite_project(&books(&[&["A", "B"]]));
        assert_eq!(g.nodes, vec!["A", "B"]);
        assert_eq!(g.edges, BTreeMap::from([((0, 1), 1)]));

        let g = bipartite_project(&books(&[&["A", "B"], &["B", "A", "A"]]));
        assert_eq!(g.edges[&(0, 1)], 2);

        let g = bipartite_project(&books(&[&["A", "B"], &["C", "D"]]));
        assert_eq!(g.edges.len(), 2);
        let p = detect_communities(&g, 0);
        assert_eq!(p.community_count(), 2);
        assert_eq!(p.assignment[g.index_of("A").unwrap()], p.assignment[g.index_of("B").unwrap()]);
    }

    fn two_cliques() -> GenreGraph {
        let nodes: Vec<String> = (0..10).map(|i| format!("g{i}")).collect();
        let mut edges = BTreeMap::new();
        for block in [0..5, 5..10] {
            for a in block.clone() {
                for b in a + 1..block.end {
                    edges.insert((a, b), 1);
                }
            }
        }
        edges.insert((4, 5), 1);
        GenreGraph { nodes, edges }
    }

    /// Every set partition of `n` nodes as a restricted growth string.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = vec![0; n];
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
        rec(1, 0, &mut cur, &mut out);
        out
    }

    #[test]
    fn louvain_matches_exhaustive_optimum_on_two_cliques() {
        let g = two_cliques();
        let partitions = all_partitions(10);
        assert_eq!(partitions.len(), 115_975);
        let best = partitions
            .iter()
            .map(|p| (modularity(&g, &Partition::from_assignment(p)), p))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        let expected = Partition::from_assignment(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(Partition::from_assignment(best.1), expected);
        for seed in 0..10 {
            let p = detect_communities(&g, seed);
            assert_eq!(p, expected, "seed {seed}");
            assert_abs_diff_eq!(modularity(&g, &p), best.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn louvain_single_clique_and_determinism() {
        let nodes: Vec<String> = (0..6).map(|i| i.to_string()).collect();
        let edges = (0..6).flat_map(|a| (a + 1..6).map(move |b| ((a, b), 1))).collect();
        let g = GenreGraph { nodes, edges };
        assert_eq!(detect_communities(&g, 3).community_count(), 1);
        let g = two_cliques();
        assert_eq!(detect_communities(&g, 42), detect_communities(&g, 42));
    }

    #[test]
    fn labeling() {
        let map: HashMap<String, usize> =
            [("a", 0), ("b", 0), ("c", 1), ("d", 2)].iter().map(|&(g, c)| (g.to_string(), c)).collect();
        let fiction = BTreeSet::from([0, 1]);
        let gs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(label_book(&gs(&["a", "b", "c", "d"]), &map, &fiction), Label::Fiction);
        // Repeated genres count once: a, b of {a, b, d}.
        assert_eq!(label_book(&gs(&["a", "d", "b", "d"]), &map, &BTreeSet::from([0])), Label::Fiction);
        assert_eq!(label_book(&gs(&["a", "d"]), &map, &BTreeSet::from([0])), Label::Others);
        assert_eq!(label_book(&gs(&["zzz"]), &map, &fiction), Label::Others);
        assert_eq!(label_book(&[], &map, &fiction), Label::Others);
        assert_eq!(label_book(&gs(&["d", "c", "b", "a"]), &map, &fiction), Label::Fiction);
    }

    #[test]
    fn largest() {
        let p = Partition::from_assignment(&[0, 1, 1, 2, 2, 2, 3]);
        assert_eq!(largest_communities(&p, 2), BTreeSet::from([1, 2]));
    }

    #[test]
    fn nearest_centroid_separates_clusters() {
        let mut recs = Vec::new();
        for i in 0..6 {
            let j = i as f64 * 0.1;
            recs.push(record(&format!("r{i}"), Label::Real, &[("x", 1.0 + j), ("y", 0.0 - j)]));
            recs.push(record(&format!("s{i}"), Label::Shuffled, &[("x", 5.0 + j), ("y", 3.0 + j)]));
        }
        assert_eq!(loo_nearest_centroid(&recs, &["x", "y"]).unwrap(), 1.0);
    }

    #[test]
    fn pca_rank_one() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let p = pca2(&rows).unwrap();
        assert!(p.variance[1] <= 1e-9 * p.total_variance);
        assert_abs_diff_eq!(p.variance[0], p.total_variance, epsilon = 1e-9);
        assert!(p.components[0].iter().all(|&c| c > 0.0));
    }

    #[test]
    fn pca_preserves_planar_distances() {
        let rows = vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![-1.0, 2.0], vec![2.0, -2.0], vec![0.5, 4.0]];
        let p = pca2(&rows).unwrap();
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                let d0 = ((rows[i][0] - rows[j][0]).powi(2) + (rows[i][1] - rows[j][1]).powi(2)).sqrt();
                let d1 = ((p.points[i][0] - p.points[j][0]).powi(2) + (p.points[i][1] - p.points[j][1]).powi(2)).sqrt();
                assert_abs_diff_eq!(d0, d1, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pca_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|d| rand::Rng::gen_range(&mut rng, -1.0..1.0) * (5 - d) as f64).collect())
            .collect();
        let p = pca2(&rows).unwrap();

        let n = rows.len() as f64;
        let m = nalgebra::DMatrix::from_fn(20, 5, |i, j| rows[i][j]);
        let centered = nalgebra::DMatrix::from_fn(20, 5, |i, j| m[(i, j)] - m.column(j).mean());
        let cov = centered.transpose() * &centered / n;
        let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        assert_abs_diff_eq!(p.variance[0], eig[0], epsilon = 1e-6);
        assert_abs_diff_eq!(p.variance[1], eig[1], epsilon = 1e-6);
    }

    #[test]
    fn pca_rejects_bad_shapes() {
        assert!(pca2(&[vec![1.0, 2.0], vec![3.0, 4.0]]).is_err());
        assert!(pca2(&[vec![1.0], vec![3.0], vec![2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn correlation_invariances(
            x in proptest::collection::vec(-100.0f64..100.0, 5..20),
            seed in any::<u64>(),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|v| v * 0.5 + rand::Rng::gen_range(&mut rng, -40.0..40.0)).collect();
            if let (Ok(r), Ok(rho)) = (pearson(&x, &y), spearman(&x, &y)) {
                let xa: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
                prop_assert!((pearson(&xa, &y).unwrap() - r).abs() < 1e-9);
                let xm: Vec<f64> = x.iter().map(|v| v.powi(3) + v).collect();
                prop_assert!((spearman(&xm, &y).unwrap() - rho).abs() < 1e-12);
            }
        }

        #[test]
        fn louvain_beats_singletons(edges in proptest::collection::btree_map((0usize..9, 0usize..9), 1u32..4, 1..25), seed in any::<u64>()) {
            let edges: BTreeMap<(usize, usize), u32> =
                edges.into_iter().filter(|((a, b), _)| a != b).map(|((a, b), w)| ((a.min(b), a.max(b)), w)).collect();
            let g = GenreGraph { nodes: (0..9).map(|i| i.to_string()).collect(), edges };
            let p = detect_communities(&g, seed);
            let singletons = Partition::from_assignment(&(0..9).collect::<Vec<_>>());
            prop_assert!(modularity(&g, &p) >= modularity(&g, &singletons) - 1e-12);
        }

        #[test]
        fn label_ignores_order(mut genres in proptest::collection::vec("[a-e]", 0..8), seed in any::<u64>()) {
            let map: HashMap<String, usize> = ["a", "b", "c", "d"].iter().enumerate().map(|(i, g)| (g.to_string(), i % 3)).collect();
            let fiction = BTreeSet::from([0, 2]);
            let before = label_book(&genres, &map, &fiction);
            genres.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(before, label_book(&genres, &map, &fiction));
        }

        #[test]
        fn rmse_symmetric(xs in proptest::collection::vec(-10.0f64..10.0, 4..12)) {
            let half = xs.len() / 2;
            let rec = |i: usize, v: f64| record(&i.to_string(), Label::Real, &[("x", v), ("y", v * v)]);
            let a: Vec<_> = xs[..half].iter().enumerate().map(|(i, &v)| rec(i, v)).collect();
            let b: Vec<_> = xs[half..].iter().enumerate().map(|(i, &v)| rec(i, v)).collect();
            let ab = rmse_separation(&a, &b, &["x", "y"]).unwrap().rmse;
            let ba = rmse_separation(&b, &a, &["x", "y"]).unwrap().rmse;
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(rmse_separation(&a, &a, &["x", "y"]).unwrap().rmse < 1e-12);
        }
    }
}
