use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::GbtConfig;
use crate::error::{Error, Result};

/// Squared-error gradients at the current predictions: `g = pred - y`, `h = 1`.
pub fn grad_hess(pred: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if pred.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: pred.len(),
        });
    }
    let g = pred.iter().zip(y).map(|(p, t)| p - t).collect();
    Ok((g, vec![1.0; pred.len()]))
}

/// Second-order gain of splitting a node into (left, right).
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

pub(crate) fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let w = -g / (h + lambda);
    // 0/0 when lambda = 0 and the node has no hessian mass
    if w.is_finite() {
        w
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary regression tree; node 0 is the root. Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    /// Index of the leaf `row` lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] < threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Per-feature (row, rank) pairs sorted by value, then row. Equal values share
/// a rank, so the split search never touches the floats themselves.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    columns: Vec<Vec<(u32, u32)>>,
}

impl SortedColumns {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let columns = (0..x.ncols())
            .map(|f| {
                let col = x.column(f);
                let mut order: Vec<u32> = (0..col.len() as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                let mut rank = 0u32;
                let mut out = Vec::with_capacity(order.len());
                for (i, &r) in order.iter().enumerate() {
                    if i > 0 && col[r as usize] != col[order[i - 1] as usize] {
                        rank += 1;
                    }
                    out.push((r, rank));
                }
                out
            })
            .collect();
        Self { columns }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    /// Position of `feature` in the active feature list.
    slot: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
    n_left: usize,
}

/// A node awaiting a split decision; its rows occupy `start..end` of every list.
struct Open {
    node: usize,
    g: f64,
    h: f64,
    start: usize,
    end: usize,
}

/// Best split of one node: features in the given order, thresholds ascending,
/// first strictly-best candidate wins.
fn best_split(
    x: ArrayView2<'_, f64>,
    lists: &[Vec<(u32, u32)>],
    features: &[usize],
    node: &Open,
    g: &[f64],
    h: &[f64],
    cfg: &GbtConfig,
) -> Option<Candidate> {
    let lambda = cfg.lambda;
    let mut best: Option<Candidate> = None;
    // Children score GL²/(HL+λ) + GR²/(HR+λ) a candidate must reach to beat the
    // current best. Compared cross-multiplied with a little slack, so the exact
    // gain is only evaluated for plausible improvements.
    let mut bar = node.g * node.g / (node.h + lambda) + 2.0 * cfg.gamma;
    for (slot, &f) in features.iter().enumerate() {
        let seg = &lists[slot][node.start..node.end];
        let (mut gl, mut hl) = (0.0, 0.0);
        let (mut last_row, mut last) = seg[0];
        for (i, &(r, v)) in seg.iter().enumerate() {
            if v != last {
                let (gr, hr) = (node.g - gl, node.h - hl);
                if hl >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                    let (a, b) = (hl + lambda, hr + lambda);
                    let num = gl * gl * b + gr * gr * a;
                    if num >= bar * (a * b) * (1.0 - 1e-12) {
                        let gain = split_gain(gl, hl, gr, hr, lambda, cfg.gamma);
                        if gain > best.map_or(0.0, |c| c.gain) {
                            let (lo, hi) = (x[[last_row as usize, f]], x[[r as usize, f]]);
                            let mut threshold = 0.5 * (lo + hi);
                            if !(threshold > lo) {
                                threshold = hi;
                            }
                            best = Some(Candidate {
                                gain,
                                feature: f,
                                slot,
                                threshold,
                                gl,
                                hl,
                                n_left: i,
                            });
                            bar = gl * gl / a + gr * gr / b;
                        }
                    }
                }
            }
            gl += g[r as usize];
            hl += h[r as usize];
            last = v;
            last_row = r;
        }
    }
    best
}

struct UnitBuffers {
    /// `inv[k] = 1 / (k + lambda)`.
    inv: Vec<f64>,
    /// Left gradient sum before each position, NaN where no threshold fits.
    inv_right: Vec<f64>,
    prefix: Vec<f64>,
    score: Vec<f64>,
}

impl UnitBuffers {
    fn new(m: usize, lambda: f64) -> Self {
        Self {
            inv: (0..=m).map(|k| 1.0 / (k as f64 + lambda)).collect(),
            inv_right: vec![0.0; m],
            prefix: vec![0.0; m],
            score: vec![0.0; m],
        }
    }
}

/// Same result as `best_split` when every hessian is 1.
///
/// Every threshold gets an approximate children score from the reciprocal
/// table. The exact gain is then computed, in scan order, only for thresholds
/// whose approximate score is within rounding distance of the feature maximum.
/// The exact maximizers always lie in that set, so the first one wins as before.
fn best_split_unit(
    x: ArrayView2<'_, f64>,
    lists: &[Vec<(u32, u32)>],
    features: &[usize],
    node: &Open,
    g: &[f64],
    cfg: &GbtConfig,
    bufs: &mut UnitBuffers,
) -> Option<Candidate> {
    let m = node.end - node.start;
    let lambda = cfg.lambda;
    // hl = i and hr = m - i must both reach min_child_weight; i = 0 never splits.
    let need = cfg.min_child_weight.max(0.0).ceil();
    if need > m as f64 {
        return None;
    }
    let lo = (need as usize).max(1);
    let hi = (m - need as usize).min(m.saturating_sub(1));
    if lo > hi {
        return None;
    }
    let c = node.g * node.g / (node.h + lambda);
    let inv = &bufs.inv[..=m];
    // inv_right[i] = 1 / (m - i + lambda), laid out forward for the scoring loop.
    let inv_right = &mut bufs.inv_right[..m];
    for (i, v) in inv_right.iter_mut().enumerate() {
        *v = inv[m - i];
    }
    let inv_right = &*inv_right;
    let mut best: Option<Candidate> = None;
    for (slot, &f) in features.iter().enumerate() {
        let seg = &lists[slot][node.start..node.end];
        let prefix = &mut bufs.prefix[..m];
        let mut gl = 0.0;
        let mut last = seg[0].1;
        for (p, &(r, v)) in prefix.iter_mut().zip(seg) {
            *p = if v != last { gl } else { f64::NAN };
            gl += g[r as usize];
            last = v;
        }
        let score = &mut bufs.score[..m];
        let tot = node.g;
        for (((s, &gl), &a), &b) in score[lo..=hi]
            .iter_mut()
            .zip(&prefix[lo..=hi])
            .zip(&inv[lo..=hi])
            .zip(&inv_right[lo..=hi])
        {
            let gr = tot - gl;
            *s = gl * gl * a + gr * gr * b;
        }
        let mut top = [f64::NEG_INFINITY; 4];
        let chunks = score[lo..=hi].chunks_exact(4);
        let rest = chunks.remainder();
        for ch in chunks {
            for k in 0..4 {
                // NaN scores (no threshold) never win.
                top[k] = if ch[k] > top[k] { ch[k] } else { top[k] };
            }
        }
        for &v in rest {
            top[0] = if v > top[0] { v } else { top[0] };
        }
        let smax = top[0].max(top[1]).max(top[2]).max(top[3]);
        if !smax.is_finite() {
            continue;
        }
        // Far wider than the few ulps separating approximate and exact scores.
        let slack = 1e-9 * (smax.abs() + c.abs());
        if 0.5 * (smax + slack - c) - cfg.gamma + slack <= best.map_or(0.0, |b| b.gain) {
            continue;
        }
        let cut = smax - slack;
        for i in lo..=hi {
            if !(score[i] >= cut) {
                continue;
            }
            let gl = prefix[i];
            let hl = i as f64;
            let (gr, hr) = (node.g - gl, node.h - hl);
            let gain = split_gain(gl, hl, gr, hr, lambda, cfg.gamma);
            if gain > best.map_or(0.0, |b| b.gain) {
                let (lo_v, hi_v) = (x[[seg[i - 1].0 as usize, f]], x[[seg[i].0 as usize, f]]);
                let mut threshold = 0.5 * (lo_v + hi_v);
                if !(threshold > lo_v) {
                    threshold = hi_v;
                }
                best = Some(Candidate {
                    gain,
                    feature: f,
                    slot,
                    threshold,
                    gl,
                    hl,
                    n_left: i,
                });
            }
        }
    }
    best
}

/// Moves entries whose row is flagged to the front, keeping relative order on
/// both sides.
fn stable_partition(seg: &mut [(u32, u32)], flag: &[bool], scratch: &mut [(u32, u32)]) {
    let (mut w, mut rw) = (0, 0);
    for i in 0..seg.len() {
        let e = seg[i];
        let left = flag[e.0 as usize] as usize;
        seg[w] = e;
        scratch[rw] = e;
        w += left;
        rw += 1 - left;
    }
    seg[w..].copy_from_slice(&scratch[..rw]);
}

/// Exact greedy tree growth, one level at a time.
///
/// Each active feature keeps the sampled rows in ascending value order, grouped
/// into contiguous per-node segments by a stable partition after every level.
/// Ties go to the lowest feature index and then the lowest threshold. A node
/// splits only if its best gain is positive and both children carry at least
/// `min_child_weight` hessian.
pub(crate) fn grow_tree(
    x: ArrayView2<'_, f64>,
    sorted: &SortedColumns,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    cfg: &GbtConfig,
    features: &[usize],
) -> Result<RegressionTree> {
    grow_tree_impl(x, sorted, rows, g, h, cfg, features, true)
}

#[allow(clippy::too_many_arguments)]
fn grow_tree_impl(
    x: ArrayView2<'_, f64>,
    sorted: &SortedColumns,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    cfg: &GbtConfig,
    features: &[usize],
    fast: bool,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("tree needs at least one row"));
    }
    let n = x.nrows();
    let mut flag = vec![false; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for &r in rows {
        flag[r] = true;
        g0 += g[r];
        h0 += h[r];
    }
    let mut lists: Vec<Vec<(u32, u32)>> = features
        .iter()
        .map(|&f| {
            // Branchless filter: every entry is written, only kept ones advance.
            let mut out = vec![(0u32, 0u32); n + 1];
            let mut w = 0;
            for &e in &sorted.columns[f] {
                out[w] = e;
                w += flag[e.0 as usize] as usize;
            }
            out.truncate(w);
            out
        })
        .collect();
    let mut scratch: Vec<(u32, u32)> = vec![(0, 0); rows.len() + 1];

    let unit_hess = fast && rows.iter().all(|&r| h[r] == 1.0);
    let mut bufs = UnitBuffers::new(rows.len(), cfg.lambda);

    let mut nodes = vec![Node::Leaf { weight: 0.0 }];
    let mut open = vec![Open {
        node: 0,
        g: g0,
        h: h0,
        start: 0,
        end: rows.len(),
    }];
    let mut depth = 0;

    while !open.is_empty() {
        let mut next: Vec<Open> = Vec::new();
        for node in &open {
            let best = if depth < cfg.max_depth && !features.is_empty() {
                if unit_hess {
                    best_split_unit(x, &lists, features, node, g, cfg, &mut bufs)
                } else {
                    best_split(x, &lists, features, node, g, h, cfg)
                }
            } else {
                None
            };
            let Some(c) = best else {
                nodes[node.node] = Node::Leaf {
                    weight: leaf_weight(node.g, node.h, cfg.lambda),
                };
                continue;
            };
            let left = nodes.len();
            nodes.push(Node::Leaf { weight: 0.0 });
            nodes.push(Node::Leaf { weight: 0.0 });
            nodes[node.node] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right: left + 1,
            };
            let mid = node.start + c.n_left;
            // Children at the depth cap become leaves without another scan.
            if depth + 1 < cfg.max_depth {
                for (i, &(r, _)) in lists[c.slot][node.start..node.end].iter().enumerate() {
                    flag[r as usize] = i < c.n_left;
                }
                for (k, list) in lists.iter_mut().enumerate() {
                    if k != c.slot {
                        stable_partition(&mut list[node.start..node.end], &flag, &mut scratch);
                    }
                }
            }
            next.push(Open {
                node: left,
                g: c.gl,
                h: c.hl,
                start: node.start,
                end: mid,
            });
            next.push(Open {
                node: left + 1,
                g: node.g - c.gl,
                h: node.h - c.hl,
                start: mid,
                end: node.end,
            });
        }
        open = next;
        depth += 1;
    }
    Ok(RegressionTree { nodes })
}

/// Grows one tree over all rows of `x`, searching only `active_features`.
pub fn build_tree(
    x: ArrayView2<'_, f64>,
    g: &[f64],
    h: &[f64],
    cfg: &GbtConfig,
    active_features: &[usize],
) -> Result<RegressionTree> {
    if g.len() != x.nrows() || h.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: g.len().min(h.len()),
        });
    }
    if let Some(&f) = active_features.iter().find(|&&f| f >= x.ncols()) {
        return Err(Error::InvalidArgument(format!("feature {f} out of range")));
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let mut features = active_features.to_vec();
    features.sort_unstable();
    features.dedup();
    grow_tree(x, &SortedColumns::new(x), &rows, g, h, cfg, &features)
}
