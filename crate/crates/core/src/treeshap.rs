//! Exact SHAP values for tree ensembles.
//!
//! [`tree_shap`] is the polynomial-time path-dependent algorithm (unique
//! decision paths extended and unwound with cover-ratio weights), costing
//! `O(T L D^2)` per instance. [`brute_force_shapley`] enumerates every
//! coalition and is kept as an independent reference.

use std::io::Write;

use crate::error::{Error, Result};
use crate::trees::{Node, Tree, TreeEnsemble};

/// Additive explanation of one prediction on the margin scale:
/// `base + phi.iter().sum() == margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base: f64,
    pub instance_id: usize,
}

impl Attribution {
    pub fn total(&self) -> f64 {
        self.base + self.phi.iter().sum::<f64>()
    }
}

/// Cover-weighted mean margin of the ensemble.
pub fn expected_value(ens: &TreeEnsemble) -> Result<f64> {
    let mut total = ens.base_score;
    for tree in &ens.trees {
        if !(tree.nodes[0].cover() > 0.0) {
            return Err(Error::Degenerate("tree root has zero cover".into()));
        }
        total += tree_expectation(tree, 0);
    }
    Ok(total)
}

fn tree_expectation(tree: &Tree, id: usize) -> f64 {
    match tree.nodes[id] {
        Node::Leaf { value, .. } => value,
        Node::Internal {
            left, right, cover, ..
        } => {
            let cl = tree.nodes[left].cover();
            let cr = tree.nodes[right].cover();
            (cl * tree_expectation(tree, left) + cr * tree_expectation(tree, right)) / cover
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

const ROOT_FEATURE: usize = usize::MAX;

fn extend_path(path: &mut [PathElement], depth: usize, zero_fraction: f64, one_fraction: f64, feature: usize) {
    path[depth] = PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / denom;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let denom = (depth + 1) as f64;
    let mut next_one_portion = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one_portion * denom / ((i + 1) as f64 * one);
            next_one_portion = tmp - path[i].weight * zero * (depth - i) as f64 / denom;
        } else {
            path[i].weight = path[i].weight * denom / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_path_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let denom = (depth + 1) as f64;
    let mut next_one_portion = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one_portion * denom / ((i + 1) as f64 * one);
            total += tmp;
            next_one_portion = path[i].weight - tmp * zero * (depth - i) as f64 / denom;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / denom);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl Walker<'_> {
    /// `buf[..depth]` holds the parent's path; this node's path is written
    /// right after it.
    fn recurse(
        &mut self,
        id: usize,
        buf: &mut [PathElement],
        mut depth: usize,
        zero_fraction: f64,
        one_fraction: f64,
        feature: usize,
    ) {
        let (parent, rest) = buf.split_at_mut(depth);
        rest[..depth].copy_from_slice(parent);
        extend_path(rest, depth, zero_fraction, one_fraction, feature);

        match self.tree.nodes[id] {
            Node::Leaf { value, .. } => {
                for i in 1..=depth {
                    let w = unwound_path_sum(rest, depth, i);
                    let el = rest[i];
                    self.phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
            Node::Internal {
                feature: split,
                threshold,
                left,
                right,
                cover,
                ..
            } => {
                let (hot, cold) = if self.x[split] < threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let hot_zero = self.tree.nodes[hot].cover() / cover;
                let cold_zero = self.tree.nodes[cold].cover() / cover;
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..=depth).find(|&k| rest[k].feature == split) {
                    incoming_zero = rest[k].zero_fraction;
                    incoming_one = rest[k].one_fraction;
                    unwind_path(rest, depth, k);
                    depth -= 1;
                }
                self.recurse(hot, rest, depth + 1, hot_zero * incoming_zero, incoming_one, split);
                self.recurse(cold, rest, depth + 1, cold_zero * incoming_zero, 0.0, split);
            }
        }
    }
}

fn path_buffer(tree: &Tree) -> Vec<PathElement> {
    let d = tree.depth() + 2;
    vec![PathElement::default(); d * (d + 1) / 2 + d]
}

/// Accumulates one tree's SHAP values for `x` into `phi`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    let mut buf = path_buffer(tree);
    let mut walker = Walker { tree, x, phi };
    walker.recurse(0, &mut buf, 0, 1.0, 1.0, ROOT_FEATURE);
}

/// Path-dependent TreeSHAP values of `x`, summed over the trees.
pub fn tree_shap(ens: &TreeEnsemble, x: &[f64]) -> Result<Attribution> {
    ens.check_dim(x)?;
    let base = expected_value(ens)?;
    let mut phi = vec![0.0; ens.n_features];
    let depth = ens.trees.iter().map(Tree::depth).max().unwrap_or(0) + 2;
    let mut buf = vec![PathElement::default(); depth * (depth + 1) / 2 + depth];
    for tree in &ens.trees {
        let mut walker = Walker {
            tree,
            x,
            phi: &mut phi,
        };
        walker.recurse(0, &mut buf, 0, 1.0, 1.0, ROOT_FEATURE);
    }
    Ok(Attribution {
        phi,
        base,
        instance_id: 0,
    })
}

/// Largest feature count [`brute_force_shapley`] accepts.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

/// Shapley values by enumerating all `2^p` coalitions of the path-dependent
/// conditional-expectation game. Exponential; a test oracle.
pub fn brute_force_shapley(ens: &TreeEnsemble, x: &[f64]) -> Result<Attribution> {
    ens.check_dim(x)?;
    let p = ens.n_features;
    if p > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "brute-force Shapley needs p <= {BRUTE_FORCE_MAX_FEATURES}, got {p}"
        )));
    }
    let n_sets = 1usize << p;
    let value: Vec<f64> = (0..n_sets).map(|mask| coalition_value(ens, x, mask)).collect();
    let weights = shapley_weights(p);
    let mut phi = vec![0.0; p];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut acc = 0.0;
        for mask in (0..n_sets).filter(|m| m & bit == 0) {
            acc += weights[mask.count_ones() as usize] * (value[mask | bit] - value[mask]);
        }
        *phi_j = acc;
    }
    Ok(Attribution {
        phi,
        base: value[0],
        instance_id: 0,
    })
}

/// `v(S)`: follow `x` at splits on features in `S`, otherwise average the
/// children by cover.
pub fn coalition_value(ens: &TreeEnsemble, x: &[f64], mask: usize) -> f64 {
    fn walk(tree: &Tree, id: usize, x: &[f64], mask: usize) -> f64 {
        match tree.nodes[id] {
            Node::Leaf { value, .. } => value,
            Node::Internal {
                feature,
                threshold,
                left,
                right,
                cover,
                ..
            } => {
                if mask >> feature & 1 == 1 {
                    walk(tree, if x[feature] < threshold { left } else { right }, x, mask)
                } else {
                    (tree.nodes[left].cover() * walk(tree, left, x, mask)
                        + tree.nodes[right].cover() * walk(tree, right, x, mask))
                        / cover
                }
            }
        }
    }
    ens.base_score + ens.trees.iter().map(|t| walk(t, 0, x, mask)).sum::<f64>()
}

/// `|S|! (p - |S| - 1)! / p!` indexed by `|S|`, reduced as exact integer
/// fractions before a single division.
fn shapley_weights(p: usize) -> Vec<f64> {
    fn factorial(k: usize) -> u128 {
        (1..=k as u128).product()
    }
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    (0..p)
        .map(|s| {
            let num = factorial(s) * factorial(p - s - 1);
            let den = factorial(p);
            let g = gcd(num, den);
            (num / g) as f64 / (den / g) as f64
        })
        .collect()
}

/// Writes `(instance_id, feature, phi)` rows plus one `__base__` row per
/// instance.
pub fn write_attributions_csv<W: Write>(
    writer: W,
    attributions: &[Attribution],
    feature_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["instance_id", "feature", "phi"])?;
    for a in attributions {
        let id = a.instance_id.to_string();
        for (name, phi) in feature_names.iter().zip(&a.phi) {
            w.write_record([id.as_str(), name, &phi.to_string()])?;
        }
        w.write_record([id.as_str(), "__base__", &a.base.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<attribution csv>", e))?;
    Ok(())
}
