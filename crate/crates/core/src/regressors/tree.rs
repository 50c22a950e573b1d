//! Regression trees with squared-error splits.
//!
//! One builder serves both CART (`SplitMode::Best`, every midpoint between
//! consecutive distinct values is a candidate) and extremely randomized trees
//! (`SplitMode::Random`, one uniform threshold per feature per node). Among
//! candidates the split with the smallest summed child squared error wins;
//! ties keep the lowest feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Exhaustive threshold search.
    Best,
    /// One random threshold per candidate feature.
    #[default]
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { min_samples_split: 2, min_samples_leaf: 1, max_depth: None }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_split must be >= 2 and min_samples_leaf >= 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtraTreesParams {
    pub n_trees: usize,
    pub split_mode: SplitMode,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for ExtraTreesParams {
    fn default() -> Self {
        let t = TreeParams::default();
        Self {
            n_trees: 10,
            split_mode: SplitMode::Random,
            min_samples_split: t.min_samples_split,
            min_samples_leaf: t.min_samples_leaf,
            max_depth: t.max_depth,
        }
    }
}

impl ExtraTreesParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A fitted regression tree stored as a flat node arena (root at index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// `S_L^2 / n_L + S_R^2 / n_R`; larger means lower child squared error.
    score: f64,
}

impl Tree {
    /// Grows one tree on features `x` and targets `y`.
    ///
    /// Random thresholds are a function of `seed`, the node's position in the
    /// tree, and the feature, so a change in one branch leaves the draws of
    /// every other branch untouched.
    pub fn fit(x: &Matrix, y: &[f64], params: &TreeParams, mode: SplitMode, seed: u64) -> Self {
        let n = y.len();
        let d = x.cols();
        let mut b = Builder {
            x: x.as_slice(),
            d,
            y,
            params,
            seed,
            nodes: Vec::new(),
            sorted: Vec::new(),
            goes_left: vec![false; n],
            buf: Vec::with_capacity(n),
            lo: vec![0.0; d],
            hi: vec![0.0; d],
            thresholds: vec![0.0; d],
            left_sum: vec![0.0; d],
            left_n: vec![0.0; d],
        };
        match mode {
            SplitMode::Best => {
                b.sorted = (0..d)
                    .map(|f| {
                        let mut order: Vec<u32> = (0..n as u32).collect();
                        order.sort_by(|&a, &c| x.at(a as usize, f).total_cmp(&x.at(c as usize, f)));
                        order
                    })
                    .collect();
                let mut rows: Vec<u32> = (0..n as u32).collect();
                b.grow_best(&mut rows, 0, n, 0);
            }
            SplitMode::Random => {
                let mut rows: Vec<u32> = (0..n as u32).collect();
                b.grow_random(&mut rows, 0, ROOT_KEY);
            }
        }
        Tree { nodes: b.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    k = if row[*feature] <= *threshold { *left } else { *right }
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Strictly better beyond accumulated rounding, so equal-cost partitions
/// reached through different summation orders keep the earlier candidate.
fn improves(score: f64, incumbent: f64) -> bool {
    score > incumbent + 1e-12 * incumbent.abs()
}

const ROOT_KEY: u64 = 1;

/// Uniform draw in `[0, 1)` from 53 hashed bits.
fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn child_keys(key: u64) -> (u64, u64) {
    (mix(key.wrapping_mul(2)), mix(key.wrapping_mul(2) + 1))
}

struct Builder<'a> {
    /// Row-major features.
    x: &'a [f64],
    d: usize,
    y: &'a [f64],
    params: &'a TreeParams,
    seed: u64,
    nodes: Vec<Node>,
    /// Best mode: per feature, row indices ordered by value. Each node owns
    /// the same index range in every feature's ordering.
    sorted: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    buf: Vec<u32>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    thresholds: Vec<f64>,
    left_sum: Vec<f64>,
    /// Left counts, kept as floats so the accumulation loop stays in one lane type.
    left_n: Vec<f64>,
}

impl Builder<'_> {
    #[inline]
    fn row(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Pushes a placeholder node and returns its slot, or a finished leaf
    /// when the node cannot be split. Also returns the node mean.
    fn open(&mut self, rows: &[u32], depth: usize) -> (usize, Option<f64>) {
        let slot = self.nodes.len();
        let n = rows.len();
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for &i in rows {
            let v = self.y[i as usize];
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let leaf = (sum / n as f64).clamp(lo, hi);
        self.nodes.push(Node::Leaf(leaf));
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if n < self.params.min_samples_split || lo == hi || !depth_ok {
            return (slot, None);
        }
        // Targets are centred at the node mean inside the split search.
        (slot, Some(sum / n as f64))
    }

    fn grow_random(&mut self, rows: &mut [u32], depth: usize, key: u64) -> usize {
        let (slot, centre) = self.open(rows, depth);
        let Some(centre) = centre else {
            return slot;
        };
        let Some(split) = self.random_split(rows, centre, key) else {
            return slot;
        };
        let mut k = 0;
        for m in 0..rows.len() {
            if self.row(rows[m])[split.feature] <= split.threshold {
                rows.swap(k, m);
                k += 1;
            }
        }
        let (l, r) = rows.split_at_mut(k);
        let (kl, kr) = child_keys(key);
        let left = self.grow_random(l, depth + 1, kl);
        let right = self.grow_random(r, depth + 1, kr);
        self.nodes[slot] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        slot
    }

    fn random_split(&mut self, rows: &[u32], centre: f64, key: u64) -> Option<Candidate> {
        let d = self.d;
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        self.lo.fill(f64::INFINITY);
        self.hi.fill(f64::NEG_INFINITY);
        for &i in rows {
            let start = i as usize * d;
            let row = &self.x[start..start + d];
            for ((lo, hi), &v) in self.lo.iter_mut().zip(self.hi.iter_mut()).zip(row) {
                *lo = if v < *lo { v } else { *lo };
                *hi = if v > *hi { v } else { *hi };
            }
        }
        for f in 0..d {
            let (lo, hi) = (self.lo[f], self.hi[f]);
            self.thresholds[f] = if lo < hi {
                let u = unit(mix(self.seed ^ mix(key ^ (f as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))));
                (lo + u * (hi - lo)).min(hi.next_down())
            } else {
                f64::NAN
            };
        }

        self.left_sum.fill(0.0);
        self.left_n.fill(0.0);
        let mut total = 0.0;
        for &i in rows {
            let start = i as usize * d;
            let row = &self.x[start..start + d];
            let v = self.y[i as usize] - centre;
            total += v;
            for (((s, c), &t), &x) in
                self.left_sum.iter_mut().zip(self.left_n.iter_mut()).zip(&self.thresholds).zip(row)
            {
                let go = x <= t;
                *c += if go { 1.0 } else { 0.0 };
                *s += if go { v } else { 0.0 };
            }
        }

        let mut best: Option<Candidate> = None;
        for f in 0..d {
            let n_left = self.left_n[f] as usize;
            if self.thresholds[f].is_nan() || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let ls = self.left_sum[f];
            let rs = total - ls;
            let score = ls * ls / n_left as f64 + rs * rs / (n - n_left) as f64;
            if best.as_ref().is_none_or(|b| improves(score, b.score)) {
                best = Some(Candidate { feature: f, threshold: self.thresholds[f], score });
            }
        }
        best
    }

    /// Grows the node owning positions `start..end` of every ordering. `rows`
    /// holds the same rows in arbitrary order.
    fn grow_best(&mut self, rows: &mut [u32], start: usize, end: usize, depth: usize) -> usize {
        let (slot, centre) = self.open(rows, depth);
        let Some(centre) = centre else {
            return slot;
        };
        let Some(split) = self.best_split(start, end, centre) else {
            return slot;
        };
        let mut k = 0;
        for m in 0..rows.len() {
            let go = self.row(rows[m])[split.feature] <= split.threshold;
            self.goes_left[rows[m] as usize] = go;
            if go {
                rows.swap(k, m);
                k += 1;
            }
        }
        // Stable partition of each ordering keeps both halves sorted.
        for f in 0..self.d {
            let seg = &mut self.sorted[f][start..end];
            self.buf.clear();
            let mut w = 0;
            for r in 0..seg.len() {
                let i = seg[r];
                if self.goes_left[i as usize] {
                    seg[w] = i;
                    w += 1;
                } else {
                    self.buf.push(i);
                }
            }
            seg[w..].copy_from_slice(&self.buf);
        }
        let (l, r) = rows.split_at_mut(k);
        let mid = start + k;
        let left = self.grow_best(l, start, mid, depth + 1);
        let right = self.grow_best(r, mid, end, depth + 1);
        self.nodes[slot] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        slot
    }

    fn best_split(&self, start: usize, end: usize, centre: f64) -> Option<Candidate> {
        let n = end - start;
        let d = self.d;
        let min_leaf = self.params.min_samples_leaf;
        let order0 = &self.sorted.first()?[start..end];
        let total: f64 = order0.iter().map(|&i| self.y[i as usize] - centre).sum();
        let mut best: Option<Candidate> = None;
        for f in 0..d {
            let order = &self.sorted[f][start..end];
            let value = |k: usize| self.x[order[k] as usize * d + f];
            let mut left_sum = 0.0;
            #[allow(clippy::needless_range_loop)]
            for k in 0..n - 1 {
                left_sum += self.y[order[k] as usize] - centre;
                let (xa, xb) = (value(k), value(k + 1));
                let n_left = k + 1;
                if xa == xb || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
                if best.as_ref().is_none_or(|b| improves(score, b.score)) {
                    let mid = 0.5 * (xa + xb);
                    let threshold = if mid < xb { mid } else { xa };
                    best = Some(Candidate { feature: f, threshold, score });
                }
            }
        }
        best
    }
}
