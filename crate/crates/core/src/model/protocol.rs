use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

use super::{
    baseline_majority, baseline_random, evaluate, predict, stratified_kfold, stratified_split,
    train_gbdt, Imputer, Metrics, ModelError, Split, TrainConfig, TreeEnsemble,
};

/// Coin-flip draws averaged by the random baseline.
pub const RANDOM_BASELINE_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub split: Split,
    pub imputer: Imputer,
    pub ensemble: TreeEnsemble,
    /// Test-row probabilities, in `split.test` order.
    pub test_scores: Vec<f64>,
    pub metrics: Metrics,
    pub majority: Metrics,
    pub random: Metrics,
}

fn fit_on_split(
    m: &FeatureMatrix,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<(Imputer, TreeEnsemble, Vec<f64>, Metrics), ModelError> {
    let imputer = Imputer::fit(m, &split.train)?;
    let train = imputer.transform(m, &split.train);
    let test = imputer.transform(m, &split.test);
    let ensemble = train_gbdt(&train, cfg)?;
    let scores = predict(&ensemble, &test.rows())?;
    let labels: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    let metrics = evaluate(&labels, &test.labels)?;
    Ok((imputer, ensemble, scores, metrics))
}

/// Stratified hold-out, train on the larger side, score the other.
pub fn fit_evaluate(m: &FeatureMatrix, cfg: &TrainConfig) -> Result<FitOutcome, ModelError> {
    cfg.validate()?;
    let labels = m.labels();
    let split = stratified_split(&labels, cfg.test_fraction, cfg.rng_seed)?;
    let (imputer, ensemble, test_scores, metrics) = fit_on_split(m, &split, cfg)?;
    let train_labels: Vec<u8> = split.train.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<u8> = split.test.iter().map(|&i| labels[i]).collect();
    Ok(FitOutcome {
        majority: baseline_majority(&train_labels, &test_labels)?,
        random: baseline_random(&test_labels, cfg.rng_seed, RANDOM_BASELINE_DRAWS)?,
        split,
        imputer,
        ensemble,
        test_scores,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub folds: Vec<Metrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Population std of the fold F1 values.
    pub std_f1: f64,
}

/// Stratified k-fold over `rows`; each fold imputes from its own training
/// part.
pub fn cross_validate(
    m: &FeatureMatrix,
    rows: &[usize],
    cfg: &TrainConfig,
) -> Result<CvSummary, ModelError> {
    cfg.validate()?;
    let labels = m.labels();
    let folds = stratified_kfold(&labels, rows, cfg.k_folds, cfg.rng_seed)?;
    let splits: Vec<Split> = folds
        .iter()
        .map(|test| {
            let train = rows
                .iter()
                .copied()
                .filter(|i| test.binary_search(i).is_err())
                .collect();
            Split {
                train,
                test: test.clone(),
            }
        })
        .collect();
    let metrics: Vec<Metrics> = splits
        .par_iter()
        .map(|s| fit_on_split(m, s, cfg).map(|r| r.3))
        .collect::<Result<_, _>>()?;
    let k = metrics.len() as f64;
    let f1: Vec<f64> = metrics.iter().map(|x| x.f1).collect();
    let mean_f1 = f1.iter().sum::<f64>() / k;
    Ok(CvSummary {
        k: metrics.len(),
        mean_precision: metrics.iter().map(|x| x.precision).sum::<f64>() / k,
        mean_recall: metrics.iter().map(|x| x.recall).sum::<f64>() / k,
        mean_f1,
        std_f1: (f1.iter().map(|v| (v - mean_f1).powi(2)).sum::<f64>() / k).sqrt(),
        folds: metrics,
    })
}

/// Column indices by descending importance; ties keep column order.
pub fn importance_ranking(e: &TreeEnsemble) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..e.feature_importance.len()).collect();
    idx.sort_by(|&a, &b| {
        e.feature_importance[b]
            .total_cmp(&e.feature_importance[a])
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub rank: usize,
    pub feature: String,
    pub importance: f64,
}

/// Top `top_n` features with importances normalized to sum 1 over all
/// features.
pub fn feature_report(e: &TreeEnsemble, top_n: usize) -> Result<Vec<ImportanceRow>, ModelError> {
    let total: f64 = e.feature_importance.iter().sum();
    if e.trees.is_empty() || total.is_nan() || total <= 0.0 {
        return Err(ModelError::Untrained);
    }
    Ok(importance_ranking(e)
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(r, j)| ImportanceRow {
            rank: r + 1,
            feature: e.feature_names[j].clone(),
            importance: e.feature_importance[j] / total,
        })
        .collect())
}

/// F1 on the fixed hold-out after retraining on the `k` most important
/// columns, for every `k` in `ks`. Selected columns keep their original
/// order, so `k = all` reproduces the full model.
pub fn f1_growth_curve(
    m: &FeatureMatrix,
    ranking: &[usize],
    ks: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<(usize, f64)>, ModelError> {
    cfg.validate()?;
    let mut seen = vec![false; m.n_cols()];
    for &j in ranking {
        if j >= m.n_cols() || std::mem::replace(&mut seen[j], true) {
            return Err(ModelError::InvalidParameter(format!(
                "ranking entry {j} is out of range or repeated"
            )));
        }
    }
    if ranking.len() != m.n_cols() {
        return Err(ModelError::InvalidParameter(
            "ranking must cover every column".into(),
        ));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > m.n_cols()) {
        return Err(ModelError::InvalidParameter(format!(
            "k = {k} outside 1..={}",
            m.n_cols()
        )));
    }
    let split = stratified_split(&m.labels(), cfg.test_fraction, cfg.rng_seed)?;
    ks.par_iter()
        .map(|&k| {
            let mut cols = ranking[..k].to_vec();
            cols.sort_unstable();
            let sub = m.select_columns(&cols);
            fit_on_split(&sub, &split, cfg).map(|r| (k, r.3.f1))
        })
        .collect()
}
