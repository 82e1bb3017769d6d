//! Gini-impurity classification trees (CART) on pre-binned features.
//!
//! Every distinct training value of a feature is its own bin, so splits are
//! exactly those of a sort-based CART; binning only avoids re-sorting at each
//! node. Shared by the random forest (unweighted bootstrap entries, random
//! feature subsets) and AdaBoost (weighted entries, depth limit).

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::scalar::Scalar;

/// Column-wise bin codes plus the sorted distinct values of every feature.
#[derive(Debug, Clone)]
pub struct BinnedMatrix<F> {
    n_rows: usize,
    codes: Vec<Vec<u32>>,
    /// Row-major copy of `codes`.
    row_codes: Vec<u32>,
    /// Start of each feature's bins in a flat histogram.
    offsets: Vec<usize>,
    values: Vec<Vec<F>>,
}

impl<F: Scalar> BinnedMatrix<F> {
    pub fn new(x: ArrayView2<F>) -> Self {
        let n_rows = x.nrows();
        let mut codes = Vec::with_capacity(x.ncols());
        let mut values = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut distinct: Vec<F> = col.to_vec();
            distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
            distinct.dedup();
            let c: Vec<u32> = col
                .iter()
                .map(|v| distinct.partition_point(|d| d < v) as u32)
                .collect();
            codes.push(c);
            values.push(distinct);
        }
        let p = codes.len();
        let mut row_codes = vec![0u32; n_rows * p];
        for (j, c) in codes.iter().enumerate() {
            for (i, &b) in c.iter().enumerate() {
                row_codes[i * p + j] = b;
            }
        }
        let mut offsets = vec![0usize; p + 1];
        for j in 0..p {
            offsets[j + 1] = offsets[j] + values[j].len();
        }
        BinnedMatrix {
            n_rows,
            codes,
            row_codes,
            offsets,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.codes.len()
    }

    /// Threshold between bins `b` and `b + 1`: the midpoint, kept strictly
    /// below the upper value.
    fn threshold(&self, feature: usize, b: usize) -> F {
        let lo = self.values[feature][b];
        let hi = self.values[feature][b + 1];
        let mid = (lo + hi) / F::lit(2.0);
        if mid < hi {
            mid
        } else {
            lo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<F> {
    Split {
        feature: usize,
        threshold: F,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Weighted fraction of PD among the training entries in the leaf.
        pd_fraction: F,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<F> {
    pub nodes: Vec<Node<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per node; `None` means all.
    pub max_features: Option<usize>,
}

/// A training entry: row index and weight. Bootstrap duplicates appear as
/// repeated entries.
#[derive(Debug, Clone, Copy)]
pub struct Entry<F> {
    pub row: u32,
    pub weight: F,
}

struct Best<F> {
    feature: usize,
    bin: u32,
    score: F,
}

impl<F: Scalar> Tree<F> {
    pub fn fit<R: Rng>(
        data: &BinnedMatrix<F>,
        y: &[Label],
        entries: Vec<Entry<F>>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Tree<F> {
        let mut nodes: Vec<Node<F>> = Vec::new();
        nodes.push(Node::Leaf { pd_fraction: F::zero() });
        // (node id, entries, depth)
        let mut stack = vec![(0usize, entries, 0usize)];
        let p = data.n_features();
        let mut features: Vec<usize> = (0..p).collect();
        let mut scratch = SplitScratch::new(data);
        let min_leaf = params.min_leaf.max(1);

        while let Some((id, entries, depth)) = stack.pop() {
            let (w_pd, w_all) = entries.iter().fold((F::zero(), F::zero()), |(a, b), e| {
                let pd = if y[e.row as usize].is_pd() { e.weight } else { F::zero() };
                (a + pd, b + e.weight)
            });
            let pd_fraction = if w_all > F::zero() { w_pd / w_all } else { F::zero() };
            nodes[id] = Node::Leaf { pd_fraction };
            let pure = w_pd == F::zero() || w_pd == w_all;
            let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_capped || entries.len() < 2 * min_leaf {
                continue;
            }

            let k = params.max_features.unwrap_or(p).clamp(1, p);
            if k < p {
                for i in 0..k {
                    let j = rng.random_range(i..p);
                    features.swap(i, j);
                }
            }
            let parent_score = (w_pd * w_pd + (w_all - w_pd) * (w_all - w_pd)) / w_all;
            let candidates = &features[..k];
            scratch.dense_splits(data, y, &entries, candidates, (w_pd, w_all), min_leaf);
            let mut best: Option<Best<F>> = None;
            for (c, &f) in candidates.iter().enumerate() {
                let found = match scratch.dense_result[c] {
                    Some(r) => Some(r),
                    None if scratch.is_dense[c] => None,
                    None => scratch.sorted_split(data, y, &entries, f, (w_pd, w_all), min_leaf),
                };
                if let Some((bin, score)) = found {
                    if best.as_ref().is_none_or(|b| score > b.score) {
                        best = Some(Best { feature: f, bin, score });
                    }
                }
            }
            let Some(best) = best else { continue };
            // require a strict impurity decrease
            if !(best.score > parent_score * (F::one() + F::epsilon() * F::lit(16.0))) {
                continue;
            }
            let codes = &data.codes[best.feature];
            let (left, right): (Vec<Entry<F>>, Vec<Entry<F>>) =
                entries.into_iter().partition(|e| codes[e.row as usize] <= best.bin);
            let l = nodes.len() as u32;
            nodes.push(Node::Leaf { pd_fraction: F::zero() });
            nodes.push(Node::Leaf { pd_fraction: F::zero() });
            nodes[id] = Node::Split {
                feature: best.feature,
                threshold: data.threshold(best.feature, best.bin as usize),
                left: l,
                right: l + 1,
            };
            stack.push((l as usize + 1, right, depth + 1));
            stack.push((l as usize, left, depth + 1));
        }
        Tree { nodes }
    }

    /// Weighted PD fraction of the leaf reached by `x`.
    pub fn leaf_fraction(&self, x: &[F]) -> F {
        let mut id = 0usize;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if x[feature] <= threshold { left } else { right } as usize;
                }
                Node::Leaf { pd_fraction } => return pd_fraction,
            }
        }
    }

    /// Class vote; an exact tie goes to PD.
    pub fn predict(&self, x: &[F]) -> Label {
        Label::from_pd(self.leaf_fraction(x) >= F::lit(0.5))
    }

    pub fn depth(&self) -> usize {
        fn go<F>(nodes: &[Node<F>], id: usize) -> usize {
            match nodes[id] {
                Node::Split { left, right, .. } => 1 + go(nodes, left as usize).max(go(nodes, right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, F)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        })
    }
}

struct SplitScratch<F> {
    hist_pd: Vec<F>,
    hist_all: Vec<F>,
    hist_cnt: Vec<u32>,
    dense: Vec<usize>,
    is_dense: Vec<bool>,
    dense_result: Vec<Option<(u32, F)>>,
    sorted: Vec<(u32, F, bool)>,
}

impl<F: Scalar> SplitScratch<F> {
    fn new(data: &BinnedMatrix<F>) -> Self {
        let total = data.offsets[data.n_features()];
        SplitScratch {
            hist_pd: vec![F::zero(); total],
            hist_all: vec![F::zero(); total],
            hist_cnt: vec![0; total],
            dense: Vec::new(),
            is_dense: Vec::new(),
            dense_result: Vec::new(),
            sorted: Vec::new(),
        }
    }

    /// Histogram search for every candidate with few bins relative to the
    /// node size, in one pass over the entries. Results land in
    /// `dense_result`, aligned with `candidates`. Split scores are
    /// `Σ_side (w_pd² + w_n²) / w_side` (larger is better).
    fn dense_splits(
        &mut self,
        data: &BinnedMatrix<F>,
        y: &[Label],
        entries: &[Entry<F>],
        candidates: &[usize],
        totals: (F, F),
        min_leaf: usize,
    ) {
        let n = entries.len();
        self.dense.clear();
        self.is_dense.clear();
        self.dense_result.clear();
        for &f in candidates {
            let bins = data.values[f].len();
            let d = bins >= 2 && n * 4 >= bins;
            self.is_dense.push(d || bins < 2);
            self.dense_result.push(None);
            if d {
                self.dense.push(f);
            }
        }
        if self.dense.is_empty() {
            return;
        }
        let p = data.n_features();
        for e in entries {
            let row = e.row as usize;
            let codes = &data.row_codes[row * p..(row + 1) * p];
            let pd = y[row].is_pd();
            for &f in &self.dense {
                let b = data.offsets[f] + codes[f] as usize;
                self.hist_cnt[b] += 1;
                self.hist_all[b] += e.weight;
                if pd {
                    self.hist_pd[b] += e.weight;
                }
            }
        }
        let (t_pd, t_all) = totals;
        for (c, &f) in candidates.iter().enumerate() {
            if !self.is_dense[c] || data.values[f].len() < 2 {
                continue;
            }
            let (lo, hi) = (data.offsets[f], data.offsets[f + 1]);
            let mut best: Option<(u32, F)> = None;
            let (mut l_pd, mut l_all, mut l_cnt) = (F::zero(), F::zero(), 0usize);
            for b in lo..hi {
                let cnt = self.hist_cnt[b] as usize;
                if cnt == 0 {
                    continue;
                }
                l_pd += self.hist_pd[b];
                l_all += self.hist_all[b];
                l_cnt += cnt;
                self.hist_pd[b] = F::zero();
                self.hist_all[b] = F::zero();
                self.hist_cnt[b] = 0;
                if l_cnt < n {
                    consider(&mut best, (b - lo) as u32, l_pd, l_all, l_cnt, t_pd, t_all, n, min_leaf);
                }
            }
            self.dense_result[c] = best;
        }
    }

    /// Sort-based search for one feature, used when the node is small
    /// relative to the feature's bin count.
    fn sorted_split(
        &mut self,
        data: &BinnedMatrix<F>,
        y: &[Label],
        entries: &[Entry<F>],
        f: usize,
        totals: (F, F),
        min_leaf: usize,
    ) -> Option<(u32, F)> {
        let codes = &data.codes[f];
        let (t_pd, t_all) = totals;
        let n = entries.len();
        self.sorted.clear();
        self.sorted.extend(
            entries
                .iter()
                .map(|e| (codes[e.row as usize], e.weight, y[e.row as usize].is_pd())),
        );
        self.sorted.sort_unstable_by_key(|t| t.0);
        let mut best: Option<(u32, F)> = None;
        let (mut l_pd, mut l_all) = (F::zero(), F::zero());
        for i in 0..n {
            let (b, w, pd) = self.sorted[i];
            l_all += w;
            if pd {
                l_pd += w;
            }
            if i + 1 < n && self.sorted[i + 1].0 != b {
                consider(&mut best, b, l_pd, l_all, i + 1, t_pd, t_all, n, min_leaf);
            }
        }
        best
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn consider<F: Scalar>(
    best: &mut Option<(u32, F)>,
    bin: u32,
    l_pd: F,
    l_all: F,
    l_cnt: usize,
    t_pd: F,
    t_all: F,
    t_cnt: usize,
    min_leaf: usize,
) {
    if l_cnt < min_leaf || t_cnt - l_cnt < min_leaf {
        return;
    }
    let r_pd = t_pd - l_pd;
    let r_all = t_all - l_all;
    if !(l_all > F::zero() && r_all > F::zero()) {
        return;
    }
    let l_n = l_all - l_pd;
    let r_n = r_all - r_pd;
    let score = (l_pd * l_pd + l_n * l_n) / l_all + (r_pd * r_pd + r_n * r_n) / r_all;
    if best.as_ref().is_none_or(|b| score > b.1) {
        *best = Some((bin, score));
    }
}
