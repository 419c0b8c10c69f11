use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, ModelError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const MIN_GAIN: f64 = 1e-12;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub rng_seed: u64,
    pub k_folds: usize,
    pub test_fraction: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub max_bins: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            rng_seed: 42,
            k_folds: 10,
            test_fraction: 0.2,
            lambda: 1.0,
            max_bins: 255,
        }
    }
}

impl TrainConfig {
    /// All violations, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_trees == 0 {
            out.push("n_trees must be positive".to_string());
        }
        if self.max_depth == 0 {
            out.push("max_depth must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.min_samples_leaf == 0 {
            out.push("min_samples_leaf must be positive".to_string());
        }
        if self.k_folds < 2 {
            out.push(format!("k_folds {} must be at least 2", self.k_folds));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            out.push(format!(
                "test_fraction {} must be in (0,1)",
                self.test_fraction
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(2..=256).contains(&self.max_bins) {
            out.push(format!("max_bins {} must be in 2..=256", self.max_bins));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.problems().into_iter().next() {
            Some(p) => Err(ModelError::InvalidParameter(p)),
            None => Ok(()),
        }
    }
}

/// `x <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes in preorder; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    fn scale_leaves(&mut self, f: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= f;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub learning_rate: f64,
    pub initial_score: f64,
    pub trees: Vec<Tree>,
    /// Summed split gain per feature.
    pub feature_importance: Vec<f64>,
    /// Mean training log loss before the first tree and after each tree.
    pub train_loss: Vec<f64>,
}

impl TreeEnsemble {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.eval(row)).sum();
        self.initial_score + self.learning_rate * sum
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<TreeEnsemble, ModelError> {
        let e: TreeEnsemble =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        if e.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::FormatVersion(e.format_version));
        }
        let n = e.feature_names.len();
        if e.feature_importance.len() != n {
            return Err(ModelError::Json(
                "importance length differs from feature count".into(),
            ));
        }
        for t in &e.trees {
            for node in &t.nodes {
                let ok = match node {
                    Node::Leaf { value } => value.is_finite(),
                    Node::Split {
                        feature,
                        left,
                        right,
                        ..
                    } => *feature < n && *left < t.nodes.len() && *right < t.nodes.len(),
                };
                if !ok {
                    return Err(ModelError::Json("malformed tree node".into()));
                }
            }
        }
        Ok(e)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable `log(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_loss(raw: &[f64], y: &[f64]) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(&f, &y)| softplus(f) - y * f)
        .sum::<f64>()
        / raw.len() as f64
}

/// Cut points between consecutive distinct training values; quantile-spaced
/// when there are more distinct values than bins.
fn bin_thresholds(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut uniq = sorted.clone();
    uniq.dedup();
    let between = |a: f64, b: f64| {
        let m = a + (b - a) / 2.0;
        if m < b {
            m
        } else {
            a
        }
    };
    if uniq.len() <= max_bins {
        return uniq.windows(2).map(|w| between(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let lo = sorted[q * n / max_bins - 1];
        let next = uniq.partition_point(|&u| u <= lo);
        if next < uniq.len() {
            let t = between(lo, uniq[next]);
            if cuts.last().is_none_or(|&c| c < t) {
                cuts.push(t);
            }
        }
    }
    cuts
}

struct Binned {
    thresholds: Vec<Vec<f64>>,
    bins: Vec<Vec<u8>>,
}

fn bin_dataset(d: &Dataset, max_bins: usize) -> Binned {
    let thresholds: Vec<Vec<f64>> = d
        .columns
        .par_iter()
        .map(|c| bin_thresholds(c, max_bins))
        .collect();
    let bins = d
        .columns
        .par_iter()
        .zip(&thresholds)
        .map(|(c, t)| {
            c.iter()
                .map(|&x| t.partition_point(|&v| v < x) as u8)
                .collect()
        })
        .collect();
    Binned { thresholds, bins }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Grower<'a> {
    binned: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a TrainConfig,
    nodes: Vec<Node>,
    gains: Vec<(usize, f64)>,
}

impl Grower<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn best_for_feature(&self, f: usize, rows: &[usize], g: f64, h: f64) -> Option<Candidate> {
        let nb = self.binned.thresholds[f].len() + 1;
        if nb < 2 {
            return None;
        }
        let col = &self.binned.bins[f];
        let mut hg = vec![0.0; nb];
        let mut hh = vec![0.0; nb];
        let mut hc = vec![0usize; nb];
        for &i in rows {
            let b = col[i] as usize;
            hg[b] += self.grad[i];
            hh[b] += self.hess[i];
            hc[b] += 1;
        }
        let parent = self.score(g, h);
        let min_leaf = self.cfg.min_samples_leaf;
        let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
        let mut best: Option<Candidate> = None;
        for b in 0..nb - 1 {
            gl += hg[b];
            hl += hh[b];
            cl += hc[b];
            let cr = rows.len() - cl;
            if cl < min_leaf {
                continue;
            }
            if cr < min_leaf {
                break;
            }
            let gain = 0.5 * (self.score(gl, hl) + self.score(g - gl, h - hl) - parent);
            if gain > MIN_GAIN && best.is_none_or(|c| gain > c.gain) {
                best = Some(Candidate {
                    feature: f,
                    bin: b,
                    gain,
                });
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &i| {
            (g + self.grad[i], h + self.hess[i])
        });
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_samples_leaf {
            return id;
        }
        let per_feature: Vec<Option<Candidate>> = (0..self.binned.bins.len())
            .into_par_iter()
            .map(|f| self.best_for_feature(f, &rows, g, h))
            .collect();
        // strict > keeps the lowest feature index on ties
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        let Some(best) = best else { return id };
        let col = &self.binned.bins[best.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| col[i] as usize <= best.bin);
        self.gains.push((best.feature, best.gain));
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: self.binned.thresholds[best.feature][best.bin],
            left,
            right,
        };
        id
    }
}

/// Newton-boosted regression trees on logistic loss. A round that would
/// raise the training loss has its leaves halved, and zeroed as a last
/// resort, so the recorded loss never increases.
pub fn train_gbdt(train: &Dataset, cfg: &TrainConfig) -> Result<TreeEnsemble, ModelError> {
    cfg.validate()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    let pos = train.labels.iter().filter(|&&l| l != 0).count();
    if pos == 0 || pos == n {
        return Err(ModelError::SingleClass);
    }
    let y: Vec<f64> = train.labels.iter().map(|&l| f64::from(l != 0)).collect();
    let p = pos as f64 / n as f64;
    let initial_score = (p / (1.0 - p)).ln();
    let binned = bin_dataset(train, cfg.max_bins);
    let rows = train.rows();
    let mut raw = vec![initial_score; n];
    let mut loss = log_loss(&raw, &y);
    let mut ens = TreeEnsemble {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: train.names.clone(),
        learning_rate: cfg.learning_rate,
        initial_score,
        trees: Vec::with_capacity(cfg.n_trees),
        feature_importance: vec![0.0; train.n_cols()],
        train_loss: vec![loss],
    };
    for _ in 0..cfg.n_trees {
        let prob: Vec<f64> = raw.iter().map(|&f| sigmoid(f)).collect();
        let grad: Vec<f64> = prob.iter().zip(&y).map(|(p, y)| p - y).collect();
        let hess: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
        let mut grower = Grower {
            binned: &binned,
            grad: &grad,
            hess: &hess,
            cfg,
            nodes: Vec::new(),
            gains: Vec::new(),
        };
        grower.grow((0..n).collect(), 0);
        let Grower { nodes, gains, .. } = grower;
        let mut tree = Tree { nodes };
        let mut halvings = 0;
        let (next_raw, next_loss) = loop {
            let cand: Vec<f64> = (0..n)
                .map(|i| raw[i] + cfg.learning_rate * tree.eval(&rows[i]))
                .collect();
            let l = log_loss(&cand, &y);
            if l <= loss {
                break (cand, l);
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                tree.scale_leaves(0.0);
                break (raw.clone(), loss);
            }
            tree.scale_leaves(0.5);
        };
        for (f, g) in gains {
            ens.feature_importance[f] += g;
        }
        raw = next_raw;
        loss = next_loss;
        ens.train_loss.push(loss);
        ens.trees.push(tree);
    }
    Ok(ens)
}

/// Probability of the positive class for each row.
pub fn predict(e: &TreeEnsemble, rows: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let expected = e.feature_names.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != expected) {
        return Err(ModelError::ColumnMismatch {
            expected,
            found: bad.len(),
        });
    }
    Ok(rows.iter().map(|r| sigmoid(e.raw_score(r))).collect())
}

pub fn predict_labels(e: &TreeEnsemble, rows: &[Vec<f64>]) -> Result<Vec<u8>, ModelError> {
    Ok(predict(e, rows)?
        .into_iter()
        .map(|s| u8::from(s >= 0.5))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(columns: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        let names = (0..columns.len()).map(|i| format!("f{i}")).collect();
        Dataset {
            names,
            columns,
            labels,
        }
    }

    fn toy(n: usize) -> Dataset {
        // f0 separates at 0.5, f1 is noise
        let mut f0 = Vec::new();
        let mut f1 = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 1;
            f0.push(if pos {
                0.6 + i as f64 / n as f64 * 0.4
            } else {
                i as f64 / n as f64 * 0.4
            });
            f1.push(((i * 7919) % 101) as f64);
            labels.push(u8::from(pos));
        }
        dataset(vec![f0, f1], labels)
    }

    fn cfg(n_trees: usize) -> TrainConfig {
        TrainConfig {
            n_trees,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_feature_fits_within_ten_trees() {
        let d = toy(100);
        let e = train_gbdt(&d, &cfg(10)).unwrap();
        assert_eq!(predict_labels(&e, &d.rows()).unwrap(), d.labels);
        let total: f64 = e.feature_importance.iter().sum();
        assert!(e.feature_importance[0] / total > 0.5);
    }

    #[test]
    fn constant_features_predict_majority() {
        let d = dataset(vec![vec![3.0; 10]], vec![1, 1, 1, 1, 1, 1, 0, 0, 0, 0]);
        let e = train_gbdt(&d, &cfg(5)).unwrap();
        assert_eq!(predict_labels(&e, &d.rows()).unwrap(), vec![1; 10]);
        assert!(e.feature_importance.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_class_is_an_error() {
        let d = dataset(vec![vec![1.0, 2.0]], vec![1, 1]);
        assert_eq!(train_gbdt(&d, &cfg(5)), Err(ModelError::SingleClass));
    }

    #[test]
    fn zero_trees_scores_base_rate() {
        let d = dataset(vec![vec![0.0, 1.0, 2.0, 3.0]], vec![1, 0, 0, 0]);
        let e = TreeEnsemble {
            format_version: MODEL_FORMAT_VERSION,
            feature_names: d.names.clone(),
            learning_rate: 0.1,
            initial_score: (0.25f64 / 0.75).ln(),
            trees: vec![],
            feature_importance: vec![0.0],
            train_loss: vec![],
        };
        for s in predict(&e, &d.rows()).unwrap() {
            assert!((s - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_traced_two_tree_model() {
        let e = TreeEnsemble {
            format_version: MODEL_FORMAT_VERSION,
            feature_names: vec!["a".into(), "b".into()],
            learning_rate: 0.5,
            initial_score: 0.2,
            trees: vec![
                Tree {
                    nodes: vec![
                        Node::Split {
                            feature: 0,
                            threshold: 1.0,
                            left: 1,
                            right: 2,
                        },
                        Node::Leaf { value: -1.0 },
                        Node::Leaf { value: 2.0 },
                    ],
                },
                Tree {
                    nodes: vec![
                        Node::Split {
                            feature: 1,
                            threshold: 0.0,
                            left: 1,
                            right: 2,
                        },
                        Node::Leaf { value: 0.4 },
                        Node::Leaf { value: -0.6 },
                    ],
                },
            ],
            feature_importance: vec![1.0, 1.0],
            train_loss: vec![],
        };
        // (1.0, 5.0): left (-1.0), right (-0.6) -> 0.2 + 0.5 * -1.6 = -0.6
        // (2.0, -1.0): right (2.0), left (0.4) -> 0.2 + 0.5 * 2.4 = 1.4
        let s = predict(&e, &[vec![1.0, 5.0], vec![2.0, -1.0]]).unwrap();
        assert!((s[0] - 1.0 / (1.0 + 0.6f64.exp())).abs() < 1e-15);
        assert!((s[1] - 1.0 / (1.0 + (-1.4f64).exp())).abs() < 1e-15);
        assert_eq!(
            predict_labels(&e, &[vec![1.0, 5.0], vec![2.0, -1.0]]).unwrap(),
            vec![0, 1]
        );
        assert_eq!(
            predict(&e, &[vec![1.0]]),
            Err(ModelError::ColumnMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn json_round_trip() {
        let d = toy(60);
        let e = train_gbdt(&d, &cfg(20)).unwrap();
        let back = TreeEnsemble::from_json(&e.to_json()).unwrap();
        assert_eq!(back, e);
        let mut v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        v["format_version"] = 99.into();
        assert_eq!(
            TreeEnsemble::from_json(&v.to_string()),
            Err(ModelError::FormatVersion(99))
        );
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let d = toy(200);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| train_gbdt(&d, &cfg(30)).unwrap());
        let b = four.install(|| train_gbdt(&d, &cfg(30)).unwrap());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn thresholds_respect_bin_budget() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let t = bin_thresholds(&v, 16);
        assert!(t.len() <= 15 && t.len() >= 14);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(bin_thresholds(&[1.0, 2.0, 2.0], 255), vec![1.5]);
        assert!(bin_thresholds(&[4.0; 8], 255).is_empty());
    }

    proptest! {
        #[test]
        fn loss_never_increases(
            rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 12..80),
            depth in 1usize..5,
            lr in 0.05f64..1.5,
        ) {
            let labels: Vec<u8> = rows.iter().map(|r| u8::from(r.2)).collect();
            prop_assume!(labels.contains(&1) && labels.contains(&0));
            let d = dataset(vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()], labels);
            let c = TrainConfig { n_trees: 15, max_depth: depth, learning_rate: lr, min_samples_leaf: 2, ..TrainConfig::default() };
            let e = train_gbdt(&d, &c).unwrap();
            prop_assert!(e.train_loss.windows(2).all(|w| w[1] <= w[0]));
            for t in &e.trees {
                for n in &t.nodes {
                    match n {
                        Node::Leaf { value } => prop_assert!(value.is_finite()),
                        Node::Split { feature, .. } => prop_assert!(*feature < 2),
                    }
                }
            }
        }

        #[test]
        fn score_monotone_in_a_leaf(bump in 0.0f64..3.0, x in -2.0f64..2.0) {
            let mk = |v: f64| TreeEnsemble {
                format_version: MODEL_FORMAT_VERSION,
                feature_names: vec!["a".into()],
                learning_rate: 0.3,
                initial_score: 0.0,
                trees: vec![Tree { nodes: vec![
                    Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                    Node::Leaf { value: v },
                    Node::Leaf { value: v },
                ] }],
                feature_importance: vec![0.0],
                train_loss: vec![],
            };
            let lo = predict(&mk(0.0), &[vec![x]]).unwrap()[0];
            let hi = predict(&mk(bump), &[vec![x]]).unwrap()[0];
            prop_assert!(hi >= lo);
        }
    }
}
