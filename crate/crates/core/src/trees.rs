//! Second-order gradient-boosted decision trees with exact greedy splits.
//!
//! Leaf values are stored after shrinkage, so the margin of an ensemble is
//! `base_score + sum of reached leaf values`.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Logistic,
    SquaredError,
}

impl Objective {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::BinaryClassification => Objective::Logistic,
            Task::Regression => Objective::SquaredError,
        }
    }

    fn grad_hess(self, margin: f64, y: f64) -> (f64, f64) {
        match self {
            Objective::Logistic => {
                let p = sigmoid(margin);
                (p - y, (p * (1.0 - p)).max(1e-16))
            }
            Objective::SquaredError => (margin - y, 1.0),
        }
    }

    /// Per-row loss: logistic log-loss on the margin, or half squared error.
    pub fn loss(self, margin: f64, y: f64) -> f64 {
        match self {
            Objective::Logistic => margin.max(0.0) + (-margin.abs()).exp().ln_1p() - y * margin,
            Objective::SquaredError => 0.5 * (margin - y) * (margin - y),
        }
    }
}

pub fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub num_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda_l2: f64,
    pub min_child_weight: f64,
    pub min_gain: f64,
    /// Derived from the dataset task when absent.
    pub objective: Option<Objective>,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_rounds: 100,
            max_depth: 6,
            learning_rate: 0.1,
            lambda_l2: 1.0,
            min_child_weight: 1.0,
            min_gain: 0.0,
            objective: None,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.num_rounds == 0 {
            return bad("num_rounds must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda_l2 >= 0.0 && self.min_child_weight >= 0.0 && self.min_gain >= 0.0) {
            return bad("lambda_l2, min_child_weight and min_gain must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
        gain: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match *self {
            Node::Internal { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// A rooted binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    /// Single split on `feature` at `threshold` (`x < threshold` goes left).
    pub fn stump(feature: usize, threshold: f64, left: (f64, f64), right: (f64, f64), gain: f64) -> Self {
        Tree {
            nodes: vec![
                Node::Internal {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    cover: left.1 + right.1,
                    gain,
                },
                Node::Leaf {
                    value: left.0,
                    cover: left.1,
                },
                Node::Leaf {
                    value: right.0,
                    cover: right.1,
                },
            ],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value, .. } => return value,
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, id: usize) -> usize {
            match t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub objective: Objective,
    pub n_features: usize,
}

impl TreeEnsemble {
    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.margin_unchecked(x))
    }

    pub(crate) fn margin_unchecked(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if self.objective != Objective::Logistic {
            return Err(Error::InvalidArgument(
                "probabilities are only defined for the logistic objective".into(),
            ));
        }
        self.predict_margin(x).map(sigmoid)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Per-feature sum of split gains over every internal node of every tree.
    pub fn gain_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Internal { feature, gain, .. } = *node {
                    imp[feature] += gain;
                }
            }
        }
        imp
    }

    /// Total training loss of the ensemble on `ds`.
    pub fn loss(&self, ds: &Dataset) -> f64 {
        ds.rows()
            .zip(ds.target())
            .map(|(x, &y)| self.objective.loss(self.margin_unchecked(x), y))
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&dump::ModelDump::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: dump::ModelDump = serde_json::from_str(s)?;
        d.try_into()
    }
}

/// Diagnostics collected while fitting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    /// Sum of the gains of every split made.
    pub total_gain: f64,
    /// Training loss before boosting and after each round.
    pub loss_per_round: Vec<f64>,
}

/// Fits a boosted ensemble. Deterministic: the trainer draws no random
/// numbers, `_seed` is accepted for interface symmetry with the bootstrap.
pub fn fit_gbdt(ds: &Dataset, params: &GbdtParams, _seed: u64) -> Result<TreeEnsemble> {
    fit_gbdt_with_report(ds, params, false).map(|(e, _)| e)
}

pub fn fit_gbdt_with_report(
    ds: &Dataset,
    params: &GbdtParams,
    track_loss: bool,
) -> Result<(TreeEnsemble, TrainingReport)> {
    let weights = vec![1.0; ds.n_rows()];
    fit_gbdt_weighted(ds, &weights, params, track_loss)
}

/// Fits on rows of `ds` weighted by `weights` (e.g. bootstrap
/// multiplicities). A row of weight `k` is equivalent to `k` copies of it;
/// zero-weight rows are ignored.
pub fn fit_gbdt_weighted(
    ds: &Dataset,
    weights: &[f64],
    params: &GbdtParams,
    track_loss: bool,
) -> Result<(TreeEnsemble, TrainingReport)> {
    params.validate()?;
    if weights.len() != ds.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_rows(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("row weights must be finite and nonnegative".into()));
    }
    let objective = params.objective.unwrap_or(Objective::for_task(ds.task()));
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("every row has zero weight".into()));
    }
    let y: Vec<f64> = rows.iter().map(|&i| ds.target()[i]).collect();
    let w: Vec<f64> = rows.iter().map(|&i| weights[i]).collect();
    if objective == Objective::Logistic {
        if let Some((k, &value)) = y.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryTarget { row: rows[k] + 1, value });
        }
    }
    let n = rows.len();
    let total_w: f64 = w.iter().sum();
    let mean = y.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / total_w;
    let base_score = match objective {
        Objective::SquaredError => mean,
        Objective::Logistic => {
            if mean <= 0.0 || mean >= 1.0 {
                return Err(Error::SingleClass);
            }
            (mean / (1.0 - mean)).ln()
        }
    };

    let columns = SortedColumns::new(ds, &rows);
    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.num_rounds);
    let mut report = TrainingReport::default();
    let loss_of = |m: &[f64]| -> f64 {
        m.iter()
            .zip(&y)
            .zip(&w)
            .map(|((&m, &y), &w)| w * objective.loss(m, y))
            .sum()
    };
    if track_loss {
        report.loss_per_round.push(loss_of(&margins));
    }

    let mut builder = TreeBuilder::new(n, ds.n_features(), params);
    for _ in 0..params.num_rounds {
        for i in 0..n {
            let (g, h) = objective.grad_hess(margins[i], y[i]);
            grad[i] = w[i] * g;
            hess[i] = w[i] * h;
        }
        let tree = builder.build(&columns, &grad, &hess, &mut report.total_gain);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += builder.leaf_value_of_row(&tree, i);
        }
        trees.push(tree);
        if track_loss {
            report.loss_per_round.push(loss_of(&margins));
        }
    }

    Ok((
        TreeEnsemble {
            trees,
            base_score,
            learning_rate: params.learning_rate,
            objective,
            n_features: ds.n_features(),
        },
        report,
    ))
}

/// Every feature column of the training rows, pre-sorted once per fit:
/// local row ids and values in ascending value order (ties by row id).
struct SortedColumns {
    rows: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl SortedColumns {
    fn new(ds: &Dataset, rows: &[usize]) -> Self {
        let n = rows.len();
        let p = ds.n_features();
        let mut sorted_rows = Vec::with_capacity(p);
        let mut values = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|&i| ds.value(i, j)).collect();
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            values.push(order.iter().map(|&r| col[r as usize]).collect());
            sorted_rows.push(order);
        }
        SortedColumns {
            rows: sorted_rows,
            values,
        }
    }
}

/// Level-wise exact greedy tree growth. For every feature the training
/// rows are kept sorted by value and grouped into one contiguous segment
/// per node; segments are stably re-partitioned after every level, so a
/// split scan over a node touches only that node's rows.
struct TreeBuilder<'p> {
    params: &'p GbdtParams,
    n_features: usize,
    /// Node currently holding each row.
    node_of_row: Vec<u32>,
    /// Per feature: row ids, grouped by node, ascending value inside a group.
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
    scratch_rows: Vec<u32>,
    scratch_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    node: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, Copy)]
struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl<'p> TreeBuilder<'p> {
    fn new(n: usize, n_features: usize, params: &'p GbdtParams) -> Self {
        TreeBuilder {
            params,
            n_features,
            node_of_row: vec![0; n],
            order: Vec::new(),
            values: Vec::new(),
            scratch_rows: Vec::with_capacity(n),
            scratch_values: Vec::with_capacity(n),
        }
    }

    fn leaf_value_of_row(&self, tree: &Tree, row: usize) -> f64 {
        match tree.nodes[self.node_of_row[row] as usize] {
            Node::Leaf { value, .. } => value,
            Node::Internal { .. } => unreachable!("rows end in leaves"),
        }
    }

    fn build(&mut self, cols: &SortedColumns, grad: &[f64], hess: &[f64], total_gain: &mut f64) -> Tree {
        let n = grad.len();
        let lambda = self.params.lambda_l2;
        let lr = self.params.learning_rate;
        // Both children must carry positive hessian mass.
        let min_hess = self.params.min_child_weight.max(f64::MIN_POSITIVE);

        if self.order.is_empty() {
            self.order = cols.rows.clone();
            self.values = cols.values.clone();
        } else {
            for f in 0..self.n_features {
                self.order[f].copy_from_slice(&cols.rows[f]);
                self.values[f].copy_from_slice(&cols.values[f]);
            }
        }
        self.node_of_row.fill(0);

        // (grad sum, hess sum) per node; nodes are finalized level by level.
        let mut sums: Vec<(f64, f64)> = vec![(grad.iter().sum(), hess.iter().sum())];
        let mut nodes: Vec<Option<Node>> = vec![None];
        let mut frontier = vec![Segment {
            node: 0,
            start: 0,
            end: n,
        }];
        let leaf = |(g, h): (f64, f64)| Node::Leaf {
            value: -g / (h + lambda) * lr,
            cover: h,
        };

        for depth in 0..=self.params.max_depth {
            if frontier.is_empty() {
                break;
            }
            if depth == self.params.max_depth {
                for seg in &frontier {
                    nodes[seg.node] = Some(leaf(sums[seg.node]));
                }
                break;
            }

            let mut best: Vec<Best> = vec![
                Best {
                    score: f64::NEG_INFINITY,
                    feature: usize::MAX,
                    threshold: f64::NAN,
                };
                frontier.len()
            ];
            for f in 0..self.n_features {
                let rows = &self.order[f];
                let vals = &self.values[f];
                for (seg, best) in frontier.iter().zip(best.iter_mut()) {
                    let (g, h) = sums[seg.node];
                    let mut gl = 0.0;
                    let mut hl = 0.0;
                    let mut last = vals[seg.start];
                    for k in seg.start..seg.end {
                        let x = vals[k];
                        if x != last && hl >= min_hess && h - hl >= min_hess {
                            let gr = g - gl;
                            let dl = hl + lambda;
                            let dr = h - hl + lambda;
                            // score = gl^2/dl + gr^2/dr, compared without dividing.
                            let num = gl * gl * dr + gr * gr * dl;
                            let den = dl * dr;
                            if num > best.score * den {
                                best.score = num / den;
                                best.feature = f;
                                best.threshold = midpoint(last, x);
                            }
                        }
                        let r = rows[k] as usize;
                        gl += grad[r];
                        hl += hess[r];
                        last = x;
                    }
                }
            }

            // Decide splits and route rows.
            let mut next = Vec::new();
            let mut split_segments = Vec::new();
            for (seg, best) in frontier.iter().zip(&best) {
                let (g, h) = sums[seg.node];
                let gain = 0.5 * (best.score - g * g / (h + lambda));
                if best.feature == usize::MAX || !(gain > self.params.min_gain) {
                    nodes[seg.node] = Some(leaf((g, h)));
                    continue;
                }
                let left = nodes.len();
                nodes.extend([None, None]);
                sums.extend([(0.0, 0.0), (0.0, 0.0)]);
                nodes[seg.node] = Some(Node::Internal {
                    feature: best.feature,
                    threshold: best.threshold,
                    left,
                    right: left + 1,
                    cover: h,
                    gain,
                });
                *total_gain += gain;
                // Route using the split feature's own sorted segment.
                let rows = &self.order[best.feature][seg.start..seg.end];
                let vals = &self.values[best.feature][seg.start..seg.end];
                let mut n_left = 0;
                for (&r, &x) in rows.iter().zip(vals) {
                    let r = r as usize;
                    let child = if x < best.threshold {
                        n_left += 1;
                        left
                    } else {
                        left + 1
                    };
                    self.node_of_row[r] = child as u32;
                    let s = &mut sums[child];
                    s.0 += grad[r];
                    s.1 += hess[r];
                }
                let mid = seg.start + n_left;
                next.push(Segment {
                    node: left,
                    start: seg.start,
                    end: mid,
                });
                next.push(Segment {
                    node: left + 1,
                    start: mid,
                    end: seg.end,
                });
                split_segments.push((*seg, left));
            }

            if !next.is_empty() && depth + 1 < self.params.max_depth {
                self.partition(&split_segments);
            }
            frontier = next;
        }

        let mut nodes: Vec<Node> = nodes
            .into_iter()
            .map(|n| n.expect("every node finalized"))
            .collect();
        // Internal covers are re-derived from their children so additivity is exact.
        for id in (0..nodes.len()).rev() {
            if let Node::Internal { left, right, .. } = nodes[id] {
                let c = nodes[left].cover() + nodes[right].cover();
                if let Node::Internal { cover, .. } = &mut nodes[id] {
                    *cover = c;
                }
            }
        }
        Tree { nodes }
    }

    /// Stable partition of every split segment into (left child, right child)
    /// for every feature, keeping value order inside each child.
    fn partition(&mut self, split_segments: &[(Segment, usize)]) {
        for f in 0..self.n_features {
            let rows = &mut self.order[f];
            let vals = &mut self.values[f];
            for &(seg, left) in split_segments {
                self.scratch_rows.clear();
                self.scratch_values.clear();
                let mut write = seg.start;
                for k in seg.start..seg.end {
                    let r = rows[k];
                    let x = vals[k];
                    if self.node_of_row[r as usize] == left as u32 {
                        rows[write] = r;
                        vals[write] = x;
                        write += 1;
                    } else {
                        self.scratch_rows.push(r);
                        self.scratch_values.push(x);
                    }
                }
                rows[write..seg.end].copy_from_slice(&self.scratch_rows);
                vals[write..seg.end].copy_from_slice(&self.scratch_values);
            }
        }
    }
}

/// Threshold between two consecutive distinct sorted values such that
/// `lo < t <= hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

mod dump {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub(super) struct ModelDump {
        objective: Objective,
        base_score: f64,
        learning_rate: f64,
        n_features: usize,
        leaf_values: String,
        trees: Vec<TreeDump>,
    }

    #[derive(Serialize, Deserialize)]
    struct TreeDump {
        nodes: Vec<NodeDump>,
    }

    #[derive(Serialize, Deserialize)]
    struct NodeDump {
        id: usize,
        kind: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        feature: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        threshold: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        left: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        right: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        value: Option<f64>,
        cover: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        gain: Option<f64>,
    }

    impl From<&TreeEnsemble> for ModelDump {
        fn from(e: &TreeEnsemble) -> Self {
            let trees = e
                .trees
                .iter()
                .map(|t| TreeDump {
                    nodes: t
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(id, n)| match *n {
                            Node::Internal {
                                feature,
                                threshold,
                                left,
                                right,
                                cover,
                                gain,
                            } => NodeDump {
                                id,
                                kind: "split".into(),
                                feature: Some(feature),
                                threshold: Some(threshold),
                                left: Some(left),
                                right: Some(right),
                                value: None,
                                cover,
                                gain: Some(gain),
                            },
                            Node::Leaf { value, cover } => NodeDump {
                                id,
                                kind: "leaf".into(),
                                feature: None,
                                threshold: None,
                                left: None,
                                right: None,
                                value: Some(value),
                                cover,
                                gain: None,
                            },
                        })
                        .collect(),
                })
                .collect();
            ModelDump {
                objective: e.objective,
                base_score: e.base_score,
                learning_rate: e.learning_rate,
                n_features: e.n_features,
                leaf_values: "post-shrinkage".into(),
                trees,
            }
        }
    }

    impl TryFrom<ModelDump> for TreeEnsemble {
        type Error = Error;

        fn try_from(d: ModelDump) -> Result<Self> {
            let bad = |m: String| Error::InvalidArgument(format!("malformed model dump: {m}"));
            let mut trees = Vec::with_capacity(d.trees.len());
            for t in d.trees {
                let count = t.nodes.len();
                let mut nodes = Vec::with_capacity(count);
                for (pos, nd) in t.nodes.into_iter().enumerate() {
                    if nd.id != pos {
                        return Err(bad(format!("node id {} at position {pos}", nd.id)));
                    }
                    let node = match nd.kind.as_str() {
                        "split" => {
                            let (Some(feature), Some(threshold), Some(left), Some(right)) =
                                (nd.feature, nd.threshold, nd.left, nd.right)
                            else {
                                return Err(bad(format!("split node {pos} lacks fields")));
                            };
                            if left >= count || right >= count || feature >= d.n_features {
                                return Err(bad(format!("split node {pos} out of range")));
                            }
                            Node::Internal {
                                feature,
                                threshold,
                                left,
                                right,
                                cover: nd.cover,
                                gain: nd.gain.unwrap_or(0.0),
                            }
                        }
                        "leaf" => Node::Leaf {
                            value: nd.value.ok_or_else(|| bad(format!("leaf {pos} lacks value")))?,
                            cover: nd.cover,
                        },
                        other => return Err(bad(format!("unknown node kind {other:?}"))),
                    };
                    nodes.push(node);
                }
                if nodes.is_empty() {
                    return Err(bad("empty tree".into()));
                }
                trees.push(Tree { nodes });
            }
            Ok(TreeEnsemble {
                trees,
                base_score: d.base_score,
                learning_rate: d.learning_rate,
                objective: d.objective,
                n_features: d.n_features,
            })
        }
    }
}
