//! Gini random forest with leaf class-frequency payloads, plus the
//! [`Classifier`] trait the explanation engine consumes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{make_distribution, ProbabilityDistribution};

/// A black box mapping a feature vector to class probabilities.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityDistribution>;
}

/// Adapts a closure into a [`Classifier`].
pub struct FnClassifier<F> {
    features: usize,
    classes: usize,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&[f64]) -> Result<ProbabilityDistribution> + Sync,
{
    pub fn new(features: usize, classes: usize, f: F) -> Self {
        Self { features, classes, f }
    }
}

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> Result<ProbabilityDistribution> + Sync,
{
    fn n_features(&self) -> usize {
        self.features
    }

    fn n_classes(&self) -> usize {
        self.classes
    }

    fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityDistribution> {
        if x.len() != self.features {
            return Err(Error::DimensionMismatch {
                expected: self.features,
                found: x.len(),
            });
        }
        (self.f)(x)
    }
}

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    /// `None` grows until leaves are pure
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    /// features tried per split; `None` means `round(sqrt(m))`
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: Some(8),
            bootstrap: true,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        freq: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { freq } => return freq,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    classes: usize,
    max_depth: Option<usize>,
    mtry: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize], total: usize) -> usize {
        let freq = counts.iter().map(|&c| c as f64 / total as f64).collect();
        self.nodes.push(Node::Leaf { freq });
        self.nodes.len() - 1
    }

    // best (impurity, threshold) over one feature, None when constant
    fn best_threshold(&self, idx: &mut [usize], feature: usize, parent: &[usize]) -> Option<(f64, f64)> {
        idx.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
        let n = idx.len();
        let mut left = vec![0usize; self.classes];
        let mut best: Option<(f64, f64)> = None;
        for pos in 0..n - 1 {
            left[self.labels[idx[pos]]] += 1;
            let (a, b) = (self.rows[idx[pos]][feature], self.rows[idx[pos + 1]][feature]);
            if a == b {
                continue;
            }
            let nl = pos + 1;
            let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
            if best.is_none_or(|(s, _)| score < s) {
                let mut t = 0.5 * (a + b);
                // guard against the midpoint rounding onto the right value
                if t >= b {
                    t = a;
                }
                best = Some((score, t));
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(idx);
        let total = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || total < 2 || self.max_depth.is_some_and(|d| depth >= d) {
            return self.leaf(&counts, total);
        }

        let m = self.rows[0].len();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        // keep drawing features past mtry until one admits a split
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        for &f in &order {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            tried += 1;
            if let Some((score, t)) = self.best_threshold(idx, f, &counts) {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, t));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(&counts, total);
        };

        let split = partition_in_place(idx, |i| self.rows[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { freq: Vec::new() });
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

// stable in-place partition, returns the size of the `true` block
fn partition_in_place(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    seed ^ (tree as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    format_version: u32,
    params: ForestParams,
    feature_names: Vec<String>,
    feature_means: Vec<f64>,
    class_labels: Vec<String>,
    oob_accuracy: Option<f64>,
    trees: Vec<DecisionTree>,
}

pub fn fit_random_forest(data: &Dataset, params: ForestParams) -> Result<RandomForestModel> {
    if params.tree_count == 0 {
        return Err(Error::InvalidInput("tree_count must be positive".into()));
    }
    if data.len() < 2 {
        return Err(Error::InvalidInput("need at least two training rows".into()));
    }
    if data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidInput("training data contains a single class".into()));
    }
    let m = data.n_features();
    let mtry = params
        .max_features
        .unwrap_or_else(|| ((m as f64).sqrt().round() as usize).max(1))
        .clamp(1, m);
    let n = data.len();

    let fitted: Vec<(DecisionTree, Vec<bool>)> = (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
            let mut in_bag = vec![!params.bootstrap; n];
            let mut idx: Vec<usize> = if params.bootstrap {
                (0..n)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        in_bag[i] = true;
                        i
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            let mut b = TreeBuilder {
                rows: data.rows(),
                labels: data.labels(),
                classes: data.n_classes(),
                max_depth: params.max_depth,
                mtry,
                nodes: Vec::new(),
            };
            b.grow(&mut idx, 0, &mut rng);
            (DecisionTree { nodes: b.nodes }, in_bag)
        })
        .collect();

    let oob_accuracy = params.bootstrap.then(|| oob(data, &fitted)).flatten();
    Ok(RandomForestModel {
        format_version: FOREST_FORMAT_VERSION,
        params,
        feature_names: data.feature_names().to_vec(),
        feature_means: data.means().to_vec(),
        class_labels: data.class_labels().to_vec(),
        oob_accuracy,
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
    })
}

fn oob(data: &Dataset, fitted: &[(DecisionTree, Vec<bool>)]) -> Option<f64> {
    let mut scored = 0usize;
    let mut correct = 0usize;
    for (i, row) in data.rows().iter().enumerate() {
        let mut acc = vec![0.0; data.n_classes()];
        let mut votes = 0;
        for (tree, bag) in fitted {
            if !bag[i] {
                votes += 1;
                for (a, f) in acc.iter_mut().zip(tree.leaf(row)) {
                    *a += f;
                }
            }
        }
        if votes > 0 {
            scored += 1;
            let best = acc
                .iter()
                .enumerate()
                .fold(0, |b, (k, &v)| if v > acc[b] { k } else { b });
            if best == data.labels()[i] {
                correct += 1;
            }
        }
    }
    (scored > 0).then(|| correct as f64 / scored as f64)
}

impl RandomForestModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Training-set feature means, kept so a saved model carries its baseline.
    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn oob_accuracy(&self) -> Option<f64> {
        self.oob_accuracy
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut correct = 0;
        for (row, &label) in data.rows().iter().zip(data.labels()) {
            if self.predict_proba(row)?.argmax() == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported forest format version {}",
                model.format_version
            )));
        }
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let m = self.feature_names.len();
        let c = self.class_labels.len();
        if self.trees.is_empty() || self.feature_means.len() != m || c < 2 {
            return Err(Error::InvalidInput("inconsistent forest header".into()));
        }
        for tree in &self.trees {
            let len = tree.nodes.len();
            if len == 0 {
                return Err(Error::InvalidInput("empty tree".into()));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                let ok = match node {
                    Node::Leaf { freq } => freq.len() == c,
                    // children always follow their parent, which also rules out cycles
                    Node::Split {
                        feature,
                        left,
                        right,
                        threshold,
                    } => *feature < m && *left > i && *right > i && *left < len && *right < len && threshold.is_finite(),
                };
                if !ok {
                    return Err(Error::InvalidInput(format!("malformed tree node {i}")));
                }
            }
        }
        Ok(())
    }
}

impl Classifier for RandomForestModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityDistribution> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let mut acc = vec![0.0; self.n_classes()];
        for tree in &self.trees {
            for (a, f) in acc.iter_mut().zip(tree.leaf(x)) {
                *a += f;
            }
        }
        make_distribution(&acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{circle_label, generate_dataset, SyntheticKind};

    fn data(rows: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Dataset {
        let m = rows[0].len();
        Dataset::new(
            rows,
            labels,
            (0..m).map(|j| format!("f{j}")).collect(),
            (0..classes).map(|c| c.to_string()).collect(),
        )
        .unwrap()
    }

    fn single_tree() -> ForestParams {
        ForestParams {
            tree_count: 1,
            max_depth: None,
            bootstrap: false,
            max_features: None,
            seed: 0,
        }
    }

    #[test]
    fn stump_separates_one_dimensional_data() {
        let d = data(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let f = fit_random_forest(&d, ForestParams { max_depth: Some(1), ..single_tree() }).unwrap();
        assert_eq!(f.accuracy(&d).unwrap(), 1.0);
        assert_eq!(f.trees()[0].depth(), 1);
        assert_eq!(f.trees()[0].nodes()[0], Node::Split { feature: 0, threshold: 1.5, left: 1, right: 2 });
    }

    #[test]
    fn unlimited_single_tree_fits_consistent_data() {
        let d = generate_dataset(SyntheticKind::GaussRings, 9).unwrap().train;
        let f = fit_random_forest(&d, single_tree()).unwrap();
        assert_eq!(f.accuracy(&d).unwrap(), 1.0);
        // xor needs a zero-gain first split
        let x = data(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            2,
        );
        let f = fit_random_forest(&x, single_tree()).unwrap();
        assert_eq!(f.accuracy(&x).unwrap(), 1.0);
    }

    #[test]
    fn forest_respects_depth_and_is_deterministic() {
        let d = generate_dataset(SyntheticKind::Circle, 4).unwrap().train;
        let params = ForestParams { tree_count: 20, seed: 7, ..Default::default() };
        let a = fit_random_forest(&d, params).unwrap();
        let b = fit_random_forest(&d, params).unwrap();
        assert_eq!(a, b);
        assert!(a.trees().iter().all(|t| t.depth() <= 8));
        let oob = a.oob_accuracy().unwrap();
        assert!(oob > 0.9, "{oob}");
    }

    #[test]
    fn predictions_are_distributions_and_follow_geometry() {
        let split = generate_dataset(SyntheticKind::Circle, 2).unwrap();
        let f = fit_random_forest(&split.train, ForestParams { tree_count: 30, seed: 1, ..Default::default() }).unwrap();
        let deep = split
            .train
            .rows()
            .iter()
            .find(|r| ((r[0] - 2.5).powi(2) + (r[1] - 2.5).powi(2)).sqrt() < 0.4)
            .unwrap();
        assert_eq!(circle_label(deep[0], deep[1]), 0);
        assert_eq!(f.predict_proba(deep).unwrap().argmax(), 0);
        for r in split.test.rows() {
            let p = f.predict_proba(r).unwrap();
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.probs().iter().all(|&v| v >= 0.0));
        }
        assert!(f.accuracy(&split.test).unwrap() > 0.9);
        assert!(matches!(f.predict_proba(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn identical_trees_average_to_one_tree() {
        let d = generate_dataset(SyntheticKind::Clusters, 3).unwrap().train;
        let one = fit_random_forest(&d, ForestParams { max_depth: Some(4), ..single_tree() }).unwrap();
        let mut many = one.clone();
        many.trees = vec![one.trees[0].clone(); 5];
        for r in d.rows().iter().take(50) {
            let (a, b) = (one.predict_proba(r).unwrap(), many.predict_proba(r).unwrap());
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn leaves_are_never_empty() {
        let d = generate_dataset(SyntheticKind::Clusters, 8).unwrap().train;
        let f = fit_random_forest(&d, ForestParams { tree_count: 10, ..Default::default() }).unwrap();
        for t in f.trees() {
            for n in t.nodes() {
                if let Node::Leaf { freq } = n {
                    assert!((freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_single_class() {
        let d = data(vec![vec![0.0], vec![1.0]], vec![1, 1], 2);
        assert!(fit_random_forest(&d, ForestParams::default()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = generate_dataset(SyntheticKind::Circle, 5).unwrap().train;
        let f = fit_random_forest(&d, ForestParams { tree_count: 3, ..Default::default() }).unwrap();
        let back = RandomForestModel::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        let tampered = f.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":99");
        assert!(RandomForestModel::from_json(&tampered).is_err());
    }
}
