//! Single CART tree.
//!
//! Nodes live in an arena in preorder (root at index 0). A second, compact
//! copy laid out breadth-first with siblings adjacent is used for prediction.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum LeafValue {
    /// Mean target of the training samples in the leaf.
    Mean(f64),
    /// Class proportions of the training samples in the leaf.
    Probabilities(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        /// Unweighted impurity decrease:
        /// `imp(node) - (n_left * imp(left) + n_right * imp(right)) / n`.
        gain: f64,
        instance_count: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        instance_count: usize,
        value: LeafValue,
    },
}

impl Node {
    pub fn instance_count(&self) -> usize {
        match *self {
            Node::Split { instance_count, .. } | Node::Leaf { instance_count, .. } => instance_count,
        }
    }
}

const LEAF: u32 = u32::MAX;

/// Split: `next` is the left child, the right child follows it.
/// Leaf: `feature == LEAF`, `next` is the leaf ordinal and `threshold` holds
/// the regression value.
#[derive(Clone, Copy, Debug, PartialEq)]
struct FlatNode {
    threshold: f64,
    feature: u32,
    next: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    flat: Vec<FlatNode>,
    /// Arena index of each leaf, by ordinal.
    leaf_nodes: Vec<u32>,
    /// Class probabilities by leaf ordinal, `num_classes` per leaf.
    probabilities: Vec<f64>,
    num_classes: usize,
}

impl Tree {
    /// Builds a tree from an arena, checking every structural invariant:
    /// children come after their parent, each node has exactly one parent,
    /// split counts telescope, gains are non-negative and leaf payloads match
    /// the task.
    pub fn from_nodes(nodes: Vec<Node>, num_features: usize, num_classes: Option<usize>) -> Result<Tree> {
        if nodes.is_empty() {
            return Err(Error::MalformedForest("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    gain,
                    instance_count,
                    left,
                    right,
                } => {
                    if *feature >= num_features {
                        return Err(Error::MalformedForest(format!(
                            "node {i} splits on feature {feature}, forest has {num_features}"
                        )));
                    }
                    if !threshold.is_finite() || !gain.is_finite() || *gain < 0.0 {
                        return Err(Error::MalformedForest(format!(
                            "node {i} has invalid threshold or gain"
                        )));
                    }
                    for &child in [left, right] {
                        if child <= i || child >= nodes.len() {
                            return Err(Error::MalformedForest(format!(
                                "node {i} has invalid child index {child}"
                            )));
                        }
                        parents[child] += 1;
                    }
                    let sum = nodes[*left].instance_count() + nodes[*right].instance_count();
                    if sum != *instance_count {
                        return Err(Error::MalformedForest(format!(
                            "node {i} counts {instance_count} samples, children hold {sum}"
                        )));
                    }
                }
                Node::Leaf { value, .. } => match (value, num_classes) {
                    (LeafValue::Mean(v), None) if v.is_finite() => {}
                    (LeafValue::Probabilities(p), Some(k)) if p.len() == k => {
                        let total: f64 = p.iter().sum();
                        if p.iter().any(|&q| !(q >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                            return Err(Error::MalformedForest(format!(
                                "leaf {i} probabilities do not form a distribution"
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::MalformedForest(format!(
                            "leaf {i} payload does not match the task"
                        )))
                    }
                },
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
            return Err(Error::MalformedForest("nodes do not form a single tree".into()));
        }
        Ok(Tree::assemble(nodes, num_classes.unwrap_or(0)))
    }

    fn assemble(nodes: Vec<Node>, num_classes: usize) -> Tree {
        let mut flat = vec![
            FlatNode {
                threshold: 0.0,
                feature: LEAF,
                next: 0,
            };
            nodes.len()
        ];
        let mut leaf_nodes = Vec::new();
        let mut probabilities = Vec::new();
        // (arena index, flat slot)
        let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
        let mut next_free = 1;
        while let Some((idx, slot)) = queue.pop_front() {
            flat[slot] = match &nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    queue.push_back((*left, next_free));
                    queue.push_back((*right, next_free + 1));
                    next_free += 2;
                    FlatNode {
                        threshold: *threshold,
                        feature: *feature as u32,
                        next: (next_free - 2) as u32,
                    }
                }
                Node::Leaf { value, .. } => {
                    let ordinal = leaf_nodes.len() as u32;
                    leaf_nodes.push(idx as u32);
                    let threshold = match value {
                        LeafValue::Mean(v) => *v,
                        LeafValue::Probabilities(p) => {
                            probabilities.extend_from_slice(p);
                            0.0
                        }
                    };
                    FlatNode {
                        threshold,
                        feature: LEAF,
                        next: ordinal,
                    }
                }
            };
        }
        Tree {
            nodes,
            flat,
            leaf_nodes,
            probabilities,
            num_classes,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Follows the decision path for a row whose feature values are given by
    /// `value(feature)` and returns the reached leaf's slot.
    #[inline]
    pub fn leaf_slot_with(&self, value: impl Fn(usize) -> f64) -> u32 {
        let mut slot = 0usize;
        loop {
            let node = self.flat[slot];
            if node.feature == LEAF {
                return slot as u32;
            }
            slot = node.next as usize + usize::from(value(node.feature as usize) > node.threshold);
        }
    }

    /// Leaf slots for rows `first..first + out.len()`, where `value(row, f)`
    /// reads a feature. Several rows descend in lockstep, which hides the
    /// latency of each dependent node load.
    pub fn leaf_slots_with(&self, first: usize, value: impl Fn(usize, usize) -> f64, out: &mut [u32]) {
        const LANES: usize = 8;
        for (c, chunk) in out.chunks_mut(LANES).enumerate() {
            let base = first + c * LANES;
            let mut slots = [0u32; LANES];
            let lanes = chunk.len();
            loop {
                let mut moving = false;
                for lane in 0..lanes {
                    let node = self.flat[slots[lane] as usize];
                    if node.feature != LEAF {
                        let go_right = value(base + lane, node.feature as usize) > node.threshold;
                        slots[lane] = node.next + u32::from(go_right);
                        moving = true;
                    }
                }
                if !moving {
                    break;
                }
            }
            chunk.copy_from_slice(&slots[..lanes]);
        }
    }

    #[inline]
    pub fn leaf_slot(&self, row: &[f64]) -> u32 {
        self.leaf_slot_with(|f| row[f])
    }

    /// Regression value stored at a leaf slot.
    #[inline]
    pub fn slot_mean(&self, slot: u32) -> f64 {
        self.flat[slot as usize].threshold
    }

    /// Class probabilities stored at a leaf slot.
    #[inline]
    pub fn slot_probabilities(&self, slot: u32) -> &[f64] {
        let ordinal = self.flat[slot as usize].next as usize;
        &self.probabilities[ordinal * self.num_classes..(ordinal + 1) * self.num_classes]
    }

    pub fn leaf_with(&self, value: impl Fn(usize) -> f64) -> &LeafValue {
        let slot = self.leaf_slot_with(value);
        let idx = self.leaf_nodes[self.flat[slot as usize].next as usize] as usize;
        match &self.nodes[idx] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf slots map to leaves"),
        }
    }

    pub fn leaf(&self, row: &[f64]) -> &LeafValue {
        self.leaf_with(|f| row[f])
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            max = max.max(depth[i]);
            if let Node::Split { left, right, .. } = *node {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        max
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.flat.iter().any(|n| n.feature == feature as u32)
    }
}

pub(crate) enum TargetRef<'a> {
    Regression(&'a [f64]),
    Classification { labels: &'a [u32], num_classes: usize },
}

/// Read-only per-forest training data shared by all trees.
pub(crate) struct TrainContext<'a> {
    /// Rank of each row's value among the distinct sorted values of a column.
    ranks: Vec<Vec<u32>>,
    /// Distinct sorted values per column.
    distinct: Vec<Vec<f64>>,
    /// Rows sorted by value per column.
    order: Vec<Vec<u32>>,
    target: TargetRef<'a>,
    max_depth: Option<usize>,
    min_samples_split: usize,
    max_features: usize,
}

impl<'a> TrainContext<'a> {
    pub fn new(
        columns: &[Vec<f64>],
        target: TargetRef<'a>,
        max_depth: Option<usize>,
        min_samples_split: usize,
        max_features: usize,
    ) -> Self {
        let mut ranks = Vec::with_capacity(columns.len());
        let mut distinct = Vec::with_capacity(columns.len());
        let mut orders = Vec::with_capacity(columns.len());
        for col in columns {
            let mut order: Vec<u32> = (0..col.len() as u32).collect();
            order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            let mut rank = vec![0u32; col.len()];
            let mut values = Vec::new();
            for &row in &order {
                let v = col[row as usize];
                if values.last() != Some(&v) {
                    values.push(v);
                }
                rank[row as usize] = (values.len() - 1) as u32;
            }
            ranks.push(rank);
            distinct.push(values);
            orders.push(order);
        }
        Self {
            ranks,
            distinct,
            order: orders,
            target,
            max_depth,
            min_samples_split,
            max_features,
        }
    }

    fn n_features(&self) -> usize {
        self.ranks.len()
    }

    fn n_rows(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }
}

struct Best {
    feature: usize,
    /// Number of samples sent left.
    n_left: usize,
    score: f64,
}

/// Tree growth over presorted sample lists.
///
/// `sorted` holds one segment of `m` sample rows per feature, each in value
/// order. A node owns the same `[start, end)` range in every segment; a split
/// stably partitions that range in every segment, which keeps all of them
/// sorted without re-sorting.
struct Grower<'c, 'a> {
    ctx: &'c TrainContext<'a>,
    rng: Rng,
    m: usize,
    sorted: Vec<u32>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    feature_order: Vec<usize>,
    class_left: Vec<u64>,
    class_right: Vec<u64>,
    nodes: Vec<Node>,
}

/// Grows one tree. `counts[row]` is how many times a row occurs in the
/// training sample (0 when left out).
pub(crate) fn grow(ctx: &TrainContext<'_>, counts: &[u32], rng: Rng) -> Tree {
    let m: usize = counts.iter().map(|&c| c as usize).sum();
    let p = ctx.n_features();
    let mut sorted = Vec::with_capacity(m * p);
    for order in &ctx.order {
        for &row in order {
            for _ in 0..counts[row as usize] {
                sorted.push(row);
            }
        }
    }
    let k = match ctx.target {
        TargetRef::Classification { num_classes, .. } => num_classes,
        TargetRef::Regression(_) => 0,
    };
    let mut grower = Grower {
        ctx,
        rng,
        m,
        sorted,
        goes_left: vec![false; ctx.n_rows()],
        scratch: vec![0; m],
        feature_order: (0..p).collect(),
        class_left: vec![0; k],
        class_right: vec![0; k],
        nodes: Vec::new(),
    };
    let impurity = grower.impurity(0, m);
    grower.build(0, m, 0, impurity);
    Tree::assemble(grower.nodes, k)
}

impl Grower<'_, '_> {
    #[inline]
    fn segment(&self, feature: usize, start: usize, end: usize) -> &[u32] {
        let base = feature * self.m;
        &self.sorted[base + start..base + end]
    }

    fn impurity(&self, start: usize, end: usize) -> f64 {
        let rows = self.segment(0, start, end);
        let n = rows.len() as f64;
        match self.ctx.target {
            TargetRef::Regression(y) => {
                let mean = rows.iter().map(|&s| y[s as usize]).sum::<f64>() / n;
                rows.iter()
                    .map(|&s| {
                        let d = y[s as usize] - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / n
            }
            TargetRef::Classification { labels, num_classes } => {
                let mut counts = vec![0u64; num_classes];
                for &s in rows {
                    counts[labels[s as usize] as usize] += 1;
                }
                1.0 - counts
                    .iter()
                    .map(|&c| {
                        let q = c as f64 / n;
                        q * q
                    })
                    .sum::<f64>()
            }
        }
    }

    fn is_pure(&self, start: usize, end: usize) -> bool {
        let rows = self.segment(0, start, end);
        match self.ctx.target {
            TargetRef::Regression(y) => {
                let first = y[rows[0] as usize];
                rows.iter().all(|&s| y[s as usize] == first)
            }
            TargetRef::Classification { labels, .. } => {
                let first = labels[rows[0] as usize];
                rows.iter().all(|&s| labels[s as usize] == first)
            }
        }
    }

    fn leaf_value(&self, start: usize, end: usize) -> LeafValue {
        let rows = self.segment(0, start, end);
        let n = rows.len() as f64;
        match self.ctx.target {
            TargetRef::Regression(y) => LeafValue::Mean(rows.iter().map(|&s| y[s as usize]).sum::<f64>() / n),
            TargetRef::Classification { labels, num_classes } => {
                let mut counts = vec![0.0; num_classes];
                for &s in rows {
                    counts[labels[s as usize] as usize] += 1.0;
                }
                LeafValue::Probabilities(counts.into_iter().map(|c| c / n).collect())
            }
        }
    }

    fn build(&mut self, start: usize, end: usize, depth: usize, impurity: f64) -> usize {
        let idx = self.nodes.len();
        let n = end - start;
        let stop = n < self.ctx.min_samples_split
            || self.ctx.max_depth.is_some_and(|d| depth >= d)
            || self.is_pure(start, end);
        let best = if stop { None } else { self.best_split(start, end) };
        let Some(best) = best else {
            let value = self.leaf_value(start, end);
            self.nodes.push(Node::Leaf {
                instance_count: n,
                value,
            });
            return idx;
        };

        let mid = start + best.n_left;
        let seg = self.segment(best.feature, start, end);
        let (lo_row, hi_row) = (seg[best.n_left - 1], seg[best.n_left]);
        let ranks = &self.ctx.ranks[best.feature];
        let values = &self.ctx.distinct[best.feature];
        let lo = values[ranks[lo_row as usize] as usize];
        let hi = values[ranks[hi_row as usize] as usize];
        let mut threshold = lo + (hi - lo) / 2.0;
        if !(threshold >= lo && threshold < hi) {
            threshold = lo;
        }
        self.partition(best.feature, start, mid, end);

        let imp_left = self.impurity(start, mid);
        let imp_right = self.impurity(mid, end);
        let gain = (impurity - ((mid - start) as f64 * imp_left + (end - mid) as f64 * imp_right) / n as f64).max(0.0);

        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold,
            gain,
            instance_count: n,
            left: 0,
            right: 0,
        });
        let l = self.build(start, mid, depth + 1, imp_left);
        let r = self.build(mid, end, depth + 1, imp_right);
        if let Node::Split { left, right, .. } = &mut self.nodes[idx] {
            *left = l;
            *right = r;
        }
        idx
    }

    /// Moves the samples of `[start, end)` that go left to the front of the
    /// range in every feature segment, preserving order on both sides.
    fn partition(&mut self, feature: usize, start: usize, mid: usize, end: usize) {
        let base = feature * self.m;
        for i in start..end {
            let row = self.sorted[base + i] as usize;
            self.goes_left[row] = i < mid;
        }
        for g in 0..self.ctx.n_features() {
            if g == feature {
                continue;
            }
            let seg = &mut self.sorted[g * self.m + start..g * self.m + end];
            let scratch = &mut self.scratch[..seg.len()];
            let (mut write, mut spill) = (0, 0);
            for i in 0..seg.len() {
                let row = seg[i];
                let left = self.goes_left[row as usize];
                seg[write] = row;
                scratch[spill] = row;
                write += usize::from(left);
                spill += usize::from(!left);
            }
            seg[write..].copy_from_slice(&scratch[..spill]);
        }
    }

    /// Draws features without replacement until `max_features` non-constant
    /// ones have been evaluated (or none remain) and returns the split with
    /// the highest score. Ties go to the feature drawn first, then the lower
    /// threshold.
    fn best_split(&mut self, start: usize, end: usize) -> Option<Best> {
        let p = self.feature_order.len();
        let mut visited = 0;
        let mut best: Option<Best> = None;
        for j in 0..p {
            if visited == self.ctx.max_features {
                break;
            }
            let pick = self.rng.random_range(j..p);
            self.feature_order.swap(j, pick);
            let feature = self.feature_order[j];
            let ranks = &self.ctx.ranks[feature];
            let seg = self.segment(feature, start, end);
            if ranks[seg[0] as usize] == ranks[seg[seg.len() - 1] as usize] {
                continue;
            }
            visited += 1;
            if let Some(cand) = self.scan(feature, start, end) {
                if best.as_ref().is_none_or(|b| cand.score > b.score) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    /// Scans one feature's sorted segment for the best boundary between
    /// distinct values. The score is the quantity whose maximisation
    /// minimises the weighted child impurity: `sum_l^2/n_l + sum_r^2/n_r` for
    /// variance and `sum_c l_c^2/n_l + sum_c r_c^2/n_r` for Gini.
    fn scan(&mut self, feature: usize, start: usize, end: usize) -> Option<Best> {
        let base = feature * self.m;
        let seg = &self.sorted[base + start..base + end];
        let ranks = &self.ctx.ranks[feature];
        let m = seg.len();
        let mut best: Option<Best> = None;
        let mut consider = |i: usize, score: f64| {
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(Best {
                    feature,
                    n_left: i + 1,
                    score,
                });
            }
        };
        match self.ctx.target {
            TargetRef::Regression(y) => {
                let total: f64 = seg.iter().map(|&s| y[s as usize]).sum();
                let mut left = 0.0;
                let mut rank = ranks[seg[0] as usize];
                for i in 0..m - 1 {
                    left += y[seg[i] as usize];
                    let next = ranks[seg[i + 1] as usize];
                    if rank != next {
                        let nl = (i + 1) as f64;
                        let nr = (m - i - 1) as f64;
                        let right = total - left;
                        consider(i, left * left / nl + right * right / nr);
                        rank = next;
                    }
                }
            }
            TargetRef::Classification { labels, .. } => {
                let cl = &mut self.class_left;
                let cr = &mut self.class_right;
                cl.iter_mut().for_each(|c| *c = 0);
                cr.iter_mut().for_each(|c| *c = 0);
                for &s in seg {
                    cr[labels[s as usize] as usize] += 1;
                }
                let mut sq_left: u64 = 0;
                let mut sq_right: u64 = cr.iter().map(|c| c * c).sum();
                let mut rank = ranks[seg[0] as usize];
                for i in 0..m - 1 {
                    let c = labels[seg[i] as usize] as usize;
                    sq_left += 2 * cl[c] + 1;
                    sq_right -= 2 * cr[c] - 1;
                    cl[c] += 1;
                    cr[c] -= 1;
                    let next = ranks[seg[i + 1] as usize];
                    if rank != next {
                        let nl = (i + 1) as f64;
                        let nr = (m - i - 1) as f64;
                        consider(i, sq_left as f64 / nl + sq_right as f64 / nr);
                        rank = next;
                    }
                }
            }
        }
        best
    }
}
