use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::binning::{BinMap, BinnedMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows whose bin is at most this index go left.
        bin: u16,
        /// Raw-value form of `bin`: `x <= threshold` goes left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        support: usize,
    },
}

/// Regression tree over binned features; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, missing_left, left, right, .. } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *missing_left } else { v <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, support } => Some((*value, *support)),
            Node::Split { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn is_stump(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_leaf_nodes: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    g: f64,
    h: f64,
    n: u32,
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    bin: u16,
    missing_left: bool,
}

struct Candidate {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
    g: f64,
    h: f64,
    hist: Vec<BinStat>,
    best: Option<SplitChoice>,
}

/// Grows one tree leaf-wise (best gain first) on gradients and hessians.
pub(crate) struct TreeGrower<'a> {
    x: &'a BinnedMatrix,
    map: &'a BinMap,
    grad: &'a [f64],
    hess: &'a [f64],
    params: GrowParams,
    offsets: Vec<usize>,
    hist_len: usize,
}

impl<'a> TreeGrower<'a> {
    pub fn new(x: &'a BinnedMatrix, map: &'a BinMap, grad: &'a [f64], hess: &'a [f64], params: GrowParams) -> Self {
        // Each feature gets its value bins plus one slot for missing.
        let mut offsets = Vec::with_capacity(x.cols + 1);
        let mut acc = 0;
        for f in 0..x.cols {
            offsets.push(acc);
            acc += map.value_bins(f) + 1;
        }
        offsets.push(acc);
        TreeGrower { x, map, grad, hess, params, offsets, hist_len: acc }
    }

    fn histogram(&self, rows: &[u32]) -> Vec<BinStat> {
        let mut hist = vec![BinStat::default(); self.hist_len];
        for f in 0..self.x.cols {
            let col = self.x.column(f);
            let base = self.offsets[f];
            let nb = self.map.value_bins(f);
            for &r in rows {
                let r = r as usize;
                let b = col[r];
                let slot = if b == self.map.missing_bin { nb } else { b as usize };
                let s = &mut hist[base + slot];
                s.g += self.grad[r];
                s.h += self.hess[r];
                s.n += 1;
            }
        }
        hist
    }

    fn gain_term(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn best_split(&self, hist: &[BinStat], g: f64, h: f64, n: usize) -> Option<SplitChoice> {
        let min_leaf = self.params.min_samples_leaf;
        if n < 2 * min_leaf {
            return None;
        }
        let parent = self.gain_term(g, h);
        let mut best: Option<SplitChoice> = None;
        for f in 0..self.x.cols {
            let nb = self.map.value_bins(f);
            let bins = &hist[self.offsets[f]..self.offsets[f + 1]];
            let missing = bins[nb];
            let (mut lg, mut lh, mut ln) = (0.0, 0.0, 0usize);
            // Split after value bin `s`; the last position only separates
            // missing from present values.
            for s in 0..nb {
                lg += bins[s].g;
                lh += bins[s].h;
                ln += bins[s].n as usize;
                let directions: &[bool] = if missing.n > 0 { &[false, true] } else { &[false] };
                for &missing_left in directions {
                    let (cg, ch, cn) = if missing_left {
                        (lg + missing.g, lh + missing.h, ln + missing.n as usize)
                    } else {
                        (lg, lh, ln)
                    };
                    let rn = n - cn;
                    if cn < min_leaf || rn < min_leaf {
                        continue;
                    }
                    let gain = 0.5 * (self.gain_term(cg, ch) + self.gain_term(g - cg, h - ch) - parent);
                    if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                        best = Some(SplitChoice { gain, feature: f, bin: s as u16, missing_left });
                    }
                }
            }
        }
        best
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.lambda) * self.params.learning_rate
    }

    /// Grows a tree over `rows` and returns it together with the leaf value
    /// assigned to each training row.
    pub fn grow(&self, rows: &[u32], row_values: &mut [f64]) -> Tree {
        let mut indices: Vec<u32> = rows.to_vec();
        let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0, support: indices.len() }];
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + self.grad[r as usize], h + self.hess[r as usize]));
        let hist = self.histogram(&indices);
        let best = if self.params.max_depth == 0 { None } else { self.best_split(&hist, g, h, indices.len()) };
        let mut open = vec![Candidate { node: 0, start: 0, end: indices.len(), depth: 0, g, h, hist, best }];
        let mut done: Vec<Candidate> = Vec::new();
        let mut leaves = 1;

        while leaves < self.params.max_leaf_nodes {
            // highest gain; ties go to the earliest created node
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.best.map(|b| (i, b.gain, c.node)))
                .fold(None, |acc: Option<(usize, f64, usize)>, (i, gain, node)| match acc {
                    Some((_, g0, n0)) if g0 > gain || (g0 == gain && n0 < node) => acc,
                    _ => Some((i, gain, node)),
                });
            let Some((pos, _, _)) = pick else { break };
            let cand = open.swap_remove(pos);
            let split = cand.best.expect("picked candidates have a split");

            let threshold = self.threshold_value(split.feature, split.bin);
            let col = self.x.column(split.feature);
            let slice = &mut indices[cand.start..cand.end];
            let goes_left = |r: u32| {
                let b = col[r as usize];
                if b == self.map.missing_bin { split.missing_left } else { b <= split.bin }
            };
            // stable partition keeps row order inside each child
            let (mut left_rows, mut right_rows): (Vec<u32>, Vec<u32>) = (Vec::new(), Vec::new());
            for &r in slice.iter() {
                if goes_left(r) { left_rows.push(r) } else { right_rows.push(r) }
            }
            let mid = cand.start + left_rows.len();
            slice[..left_rows.len()].copy_from_slice(&left_rows);
            slice[left_rows.len()..].copy_from_slice(&right_rows);

            let sum = |rs: &[u32]| rs.iter().fold((0.0, 0.0), |(g, h), &r| (g + self.grad[r as usize], h + self.hess[r as usize]));
            let (lg, lh) = sum(&left_rows);
            let (rg, rh) = sum(&right_rows);
            let (small_is_left, small_rows) =
                if left_rows.len() <= right_rows.len() { (true, &left_rows) } else { (false, &right_rows) };
            let small_hist = self.histogram(small_rows);
            let large_hist: Vec<BinStat> = cand
                .hist
                .iter()
                .zip(&small_hist)
                .map(|(p, s)| BinStat { g: p.g - s.g, h: p.h - s.h, n: p.n - s.n })
                .collect();
            let (lhist, rhist) = if small_is_left { (small_hist, large_hist) } else { (large_hist, small_hist) };

            let left_id = nodes.len();
            let right_id = left_id + 1;
            nodes.push(Node::Leaf { value: 0.0, support: left_rows.len() });
            nodes.push(Node::Leaf { value: 0.0, support: right_rows.len() });
            nodes[cand.node] = Node::Split {
                feature: split.feature,
                bin: split.bin,
                threshold,
                missing_left: split.missing_left,
                left: left_id,
                right: right_id,
            };
            leaves += 1;

            let depth = cand.depth + 1;
            let can_split = depth < self.params.max_depth;
            for (node, start, end, g, h, hist) in
                [(left_id, cand.start, mid, lg, lh, lhist), (right_id, mid, cand.end, rg, rh, rhist)]
            {
                let best = if can_split { self.best_split(&hist, g, h, end - start) } else { None };
                open.push(Candidate { node, start, end, depth, g, h, hist, best });
            }
        }
        done.append(&mut open);

        for c in &done {
            let value = self.leaf_value(c.g, c.h);
            nodes[c.node] = Node::Leaf { value, support: c.end - c.start };
            for &r in &indices[c.start..c.end] {
                row_values[r as usize] = value;
            }
        }
        Tree { nodes }
    }

    fn threshold_value(&self, feature: usize, bin: u16) -> f64 {
        let t = &self.map.thresholds[feature];
        // The last value bin has no upper cut: every finite value goes left.
        t.get(bin as usize).copied().unwrap_or(f64::MAX)
    }
}
