//! Concentric levels and the two scale-dependent node measures built on them.
//!
//! *Accessibility* `k_i(h)` is the exponential of the entropy of the arrival
//! distribution of an `h`-step self-avoiding random walk started at `i`,
//! restricted to nodes at distance exactly `h`. The distribution is enumerated
//! exactly and is not renormalized: mass lost to walks that dead-end or finish
//! inside the ball simply drops out.
//!
//! *Backbone symmetry* `S_i(h)` runs an outward-only walk on the radius-`h`
//! ball with intra-level edges removed. Level-`r` nodes without a successor in
//! level `r+1` are dead ends that absorb their mass; the entropy exponential of
//! the level-`h` arrivals is divided by `|levels[h]| + Σ η_r`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::graph::Graph;
use crate::stats::{entropy_exp, mean, population_std};

pub const DEFAULT_FEATURE_DEPTH: usize = 2;
pub const DEFAULT_CORRELATION_DEPTH: usize = 3;

const UNSEEN: usize = usize::MAX;

/// Breadth-first shells around `source`; `levels[r]` holds the sorted nodes at
/// distance `r`, for `r = 0..=h`. Trailing shells may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcentricLevels {
    pub source: usize,
    pub levels: Vec<Vec<usize>>,
}

impl ConcentricLevels {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn shell(&self, r: usize) -> &[usize] {
        &self.levels[r]
    }
}

/// Levels plus a dense distance table (`UNSEEN` beyond the ball).
struct Ball {
    levels: Vec<Vec<usize>>,
    dist: Vec<usize>,
}

fn ball(g: &Graph, source: usize, h: usize) -> Ball {
    let mut dist = vec![UNSEEN; g.node_count()];
    dist[source] = 0;
    let mut levels = vec![vec![source]];
    for r in 0..h {
        let mut next = Vec::new();
        for &v in &levels[r] {
            for &w in g.neighbors(v) {
                if dist[w] == UNSEEN {
                    dist[w] = r + 1;
                    next.push(w);
                }
            }
        }
        next.sort_unstable();
        levels.push(next);
    }
    Ball { levels, dist }
}

pub fn concentric_levels(g: &Graph, source: usize, h: usize) -> ConcentricLevels {
    ConcentricLevels { source, levels: ball(g, source, h).levels }
}

/// Arrival probabilities of `h`-step self-avoiding walks at level-`h` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkDistribution {
    pub source: usize,
    pub depth: usize,
    pub probs: BTreeMap<usize, f64>,
}

impl WalkDistribution {
    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }
}

struct SawState<'a> {
    g: &'a Graph,
    h: usize,
    dist: &'a [usize],
    visited: Vec<bool>,
    probs: BTreeMap<usize, f64>,
}

impl SawState<'_> {
    fn expand(&mut self, v: usize, step: usize, mass: f64) {
        if step == self.h {
            if self.dist[v] == self.h {
                *self.probs.entry(v).or_insert(0.0) += mass;
            }
            return;
        }
        let open = self.g.neighbors(v).iter().filter(|&&w| !self.visited[w]).count();
        if open == 0 {
            return;
        }
        let share = mass / open as f64;
        let g = self.g;
        for &w in g.neighbors(v) {
            if !self.visited[w] {
                self.visited[w] = true;
                self.expand(w, step + 1, share);
                self.visited[w] = false;
            }
        }
    }
}

/// Exact enumeration of the self-avoiding walk distribution at depth `h`.
pub fn saw_distribution(g: &Graph, source: usize, h: usize) -> WalkDistribution {
    assert!(h >= 1, "depth must be at least 1");
    let b = ball(g, source, h);
    let mut state = SawState { g, h, dist: &b.dist, visited: vec![false; g.node_count()], probs: BTreeMap::new() };
    if !b.levels[h].is_empty() {
        state.visited[source] = true;
        state.expand(source, 0, 1.0);
    }
    WalkDistribution { source, depth: h, probs: state.probs }
}

pub fn accessibility(g: &Graph, source: usize, h: usize) -> f64 {
    entropy_exp(saw_distribution(g, source, h).probs.values())
}

/// The radius-`h` ball with intra-level edges removed.
#[derive(Debug, Clone, PartialEq)]
pub struct BackbonePattern {
    pub levels: ConcentricLevels,
    /// Outward edges `(u, w)` with `u` on level `r` and `w` on level `r + 1`, `r < h`.
    pub edges: Vec<(usize, usize)>,
    /// `dead_ends[r]` = η_r, the level-`r` nodes (`r < h`) with no edge to level `r + 1`.
    pub dead_ends: Vec<usize>,
    /// Arrival probabilities of the outward walk at level-`h` nodes.
    pub arrivals: BTreeMap<usize, f64>,
}

impl BackbonePattern {
    pub fn dead_end_total(&self) -> usize {
        self.dead_ends.iter().sum()
    }

    /// `exp(H(arrivals)) / (|levels[h]| + Σ η_r)`, or 0 when nothing arrives.
    pub fn symmetry(&self) -> f64 {
        let h = self.levels.depth();
        let denom = self.levels.levels[h].len() + self.dead_end_total();
        if denom == 0 || self.arrivals.is_empty() {
            return 0.0;
        }
        // Mass only leaves through dead ends, each of which also enlarges the
        // denominator, so the ratio is at most 1; the cap removes rounding.
        (entropy_exp(self.arrivals.values()) / denom as f64).min(1.0)
    }
}

pub fn backbone(g: &Graph, source: usize, h: usize) -> BackbonePattern {
    assert!(h >= 1, "depth must be at least 1");
    let b = ball(g, source, h);
    let mut edges = Vec::new();
    let mut dead_ends = vec![0; h];
    let mut mass: BTreeMap<usize, f64> = BTreeMap::from([(source, 1.0)]);
    for (r, dead) in dead_ends.iter_mut().enumerate() {
        let mut next_mass: BTreeMap<usize, f64> = BTreeMap::new();
        for &u in &b.levels[r] {
            let succ: Vec<usize> = g.neighbors(u).iter().copied().filter(|&w| b.dist[w] == r + 1).collect();
            if succ.is_empty() {
                *dead += 1;
                continue;
            }
            let m = mass.get(&u).copied().unwrap_or(0.0);
            let share = m / succ.len() as f64;
            for w in succ {
                edges.push((u, w));
                *next_mass.entry(w).or_insert(0.0) += share;
            }
        }
        mass = next_mass;
    }
    mass.retain(|_, p| *p > 0.0);
    BackbonePattern { levels: ConcentricLevels { source, levels: b.levels }, edges, dead_ends, arrivals: mass }
}

pub fn symmetry(g: &Graph, source: usize, h: usize) -> f64 {
    backbone(g, source, h).symmetry()
}

/// Per-node accessibility and symmetry at one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMeasures {
    pub h: usize,
    pub accessibility: Vec<f64>,
    pub symmetry: Vec<f64>,
}

/// Computes both measures for every node, in parallel over nodes.
pub fn node_measures(g: &Graph, h: usize) -> NodeMeasures {
    let pairs: Vec<(f64, f64)> =
        (0..g.node_count()).into_par_iter().map(|i| (accessibility(g, i, h), symmetry(g, i, h))).collect();
    let (accessibility, symmetry) = pairs.into_iter().unzip();
    NodeMeasures { h, accessibility, symmetry }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub h: usize,
    pub mean_k: f64,
    pub std_k: f64,
    pub mean_s: f64,
}

impl NodeMeasures {
    pub fn summary(&self) -> LevelSummary {
        LevelSummary {
            h: self.h,
            mean_k: mean(&self.accessibility),
            std_k: population_std(&self.accessibility),
            mean_s: mean(&self.symmetry),
        }
    }
}

pub fn summarize(g: &Graph, h: usize) -> LevelSummary {
    node_measures(g, h).summary()
}
