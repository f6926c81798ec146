//! CART-style classification tree with axis-aligned splits.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{argmax_first, Dense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Gini,
    Entropy,
}

/// How many features are examined at each split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    /// `ceil(sqrt(d))` features drawn at random per split.
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

struct Builder<'a> {
    x: &'a Dense,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    pairs: Vec<(f64, usize)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    cost: f64,
}

#[inline]
fn xlogx(c: f64) -> f64 {
    if c > 0.0 {
        c * c.ln()
    } else {
        0.0
    }
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let votes: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        self.nodes.push(Node::Leaf {
            class: argmax_first(&votes),
        });
        self.nodes.len() - 1
    }

    /// Lowest weighted child impurity over thresholds of one feature.
    fn best_for_feature(&mut self, idx: &[usize], feature: usize, parent: &[usize]) -> Option<Split> {
        self.pairs.clear();
        self.pairs
            .extend(idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
        self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.pairs.len();
        if self.pairs[0].0 == self.pairs[n - 1].0 {
            return None;
        }
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<Split> = None;
        match self.params.criterion {
            Criterion::Gini => {
                let mut sq_left = 0.0;
                let mut sq_right: f64 = parent.iter().map(|&c| (c * c) as f64).sum();
                for i in 0..n - 1 {
                    let k = self.pairs[i].1;
                    let cl = left[k] as f64;
                    let cr = (parent[k] - left[k]) as f64;
                    sq_left += 2.0 * cl + 1.0;
                    sq_right -= 2.0 * cr - 1.0;
                    left[k] += 1;
                    let (a, b) = (self.pairs[i].0, self.pairs[i + 1].0);
                    if a == b {
                        continue;
                    }
                    let nl = (i + 1) as f64;
                    let nr = (n - i - 1) as f64;
                    let cost = (nl - sq_left / nl) + (nr - sq_right / nr);
                    if best.as_ref().is_none_or(|s| cost < s.cost) {
                        best = Some(Split { feature, threshold: midpoint(a, b), cost });
                    }
                }
            }
            Criterion::Entropy => {
                let mut sum_left = 0.0;
                let mut sum_right: f64 = parent.iter().map(|&c| xlogx(c as f64)).sum();
                for i in 0..n - 1 {
                    let k = self.pairs[i].1;
                    let cl = left[k] as f64;
                    let cr = (parent[k] - left[k]) as f64;
                    sum_left += xlogx(cl + 1.0) - xlogx(cl);
                    sum_right += xlogx(cr - 1.0) - xlogx(cr);
                    left[k] += 1;
                    let (a, b) = (self.pairs[i].0, self.pairs[i + 1].0);
                    if a == b {
                        continue;
                    }
                    let nl = (i + 1) as f64;
                    let nr = (n - i - 1) as f64;
                    let cost = (xlogx(nl) - sum_left) + (xlogx(nr) - sum_right);
                    if best.as_ref().is_none_or(|s| cost < s.cost) {
                        best = Some(Split { feature, threshold: midpoint(a, b), cost });
                    }
                }
            }
        }
        best
    }

    fn best_split(&mut self, idx: &[usize], parent: &[usize]) -> Option<Split> {
        let d = self.x.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        let wanted = match self.params.max_features {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => {
                if let Some(rng) = self.rng.as_deref_mut() {
                    order.shuffle(rng);
                }
                ((d as f64).sqrt().ceil() as usize).max(1)
            }
        };
        let mut best: Option<Split> = None;
        let mut examined = 0;
        // constant features do not count towards the budget
        for &f in &order {
            if examined >= wanted {
                break;
            }
            if let Some(s) = self.best_for_feature(idx, f, parent) {
                examined += 1;
                if best.as_ref().is_none_or(|b| s.cost < b.cost) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_hit = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_hit || idx.len() < 2 {
            return self.leaf(&counts);
        }
        let Some(split) = self.best_split(idx, &counts) else {
            return self.leaf(&counts);
        };
        let at = partition(idx, |&i| self.x.get(i, split.feature) <= split.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let (l, r) = idx.split_at_mut(at);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| pred(i));
    let n = yes.len();
    idx[..n].copy_from_slice(&yes);
    idx[n..].copy_from_slice(&no);
    n
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `sample` (repeats allowed).
    pub fn fit(
        x: &Dense,
        y: &[usize],
        n_classes: usize,
        sample: &[usize],
        params: TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            n_classes,
            params,
            rng,
            nodes: Vec::new(),
            pairs: Vec::with_capacity(sample.len()),
        };
        let mut idx = sample.to_vec();
        b.grow(&mut idx, 0);
        Self {
            nodes: b.nodes,
            n_classes,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(criterion: Criterion, max_depth: Option<usize>) -> TreeParams {
        TreeParams {
            criterion,
            max_depth,
            max_features: MaxFeatures::All,
        }
    }

    fn data(rows: &[&[f64]]) -> Dense {
        Dense::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn depth_one_stump() {
        let x = data(&[&[0.0], &[1.0], &[10.0], &[11.0]]);
        let y = [0, 0, 1, 1];
        for c in [Criterion::Gini, Criterion::Entropy] {
            let t = DecisionTree::fit(&x, &y, 2, &[0, 1, 2, 3], params(c, Some(1)), None);
            match &t.nodes()[0] {
                Node::Split { threshold, .. } => assert!(*threshold > 1.0 && *threshold < 10.0),
                other => panic!("expected split, got {other:?}"),
            }
            for (i, &label) in y.iter().enumerate() {
                assert_eq!(t.predict_row(x.row(i)), label);
            }
        }
    }

    #[test]
    fn xor_is_learnt_without_depth_limit() {
        let x = data(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let y = [0, 0, 1, 1];
        let t = DecisionTree::fit(&x, &y, 2, &[0, 1, 2, 3], params(Criterion::Gini, None), None);
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(t.predict_row(x.row(i)), label);
        }
    }

    #[test]
    fn depth_limit_respected() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..64).map(|i| i % 2).collect();
        let x = Dense::from_rows(&rows).unwrap();
        let all: Vec<usize> = (0..64).collect();
        let t = DecisionTree::fit(&x, &y, 2, &all, params(Criterion::Entropy, Some(3)), None);
        assert!(t.depth() <= 3);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let a = 1.0_f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 3.0), 2.0);
    }
}
