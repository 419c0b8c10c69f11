use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Scores for the positive (conspiracy) class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Metrics {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

pub fn evaluate(predictions: &[u8], truth: &[u8]) -> Result<Metrics, ModelError> {
    if predictions.len() != truth.len() {
        return Err(ModelError::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(ModelError::Empty);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

/// Predicts the training majority label everywhere; a tie predicts the
/// positive class.
pub fn baseline_majority(train: &[u8], test: &[u8]) -> Result<Metrics, ModelError> {
    let pos = train.iter().filter(|&&l| l != 0).count();
    let label = u8::from(2 * pos >= train.len());
    evaluate(&vec![label; test.len()], test)
}

/// Uniform coin-flip predictions, averaged over `draws` independent draws
/// (precision, recall and F1 averaged; confusion counts summed).
pub fn baseline_random(test: &[u8], rng_seed: u64, draws: usize) -> Result<Metrics, ModelError> {
    if draws == 0 {
        return Err(ModelError::InvalidParameter("draws = 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut acc = Metrics::from_counts(0, 0, 0, 0);
    for _ in 0..draws {
        let preds: Vec<u8> = (0..test.len())
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let m = evaluate(&preds, test)?;
        acc.precision += m.precision;
        acc.recall += m.recall;
        acc.f1 += m.f1;
        acc.tp += m.tp;
        acc.fp += m.fp;
        acc.tn += m.tn;
        acc.fn_ += m.fn_;
    }
    let d = draws as f64;
    acc.precision /= d;
    acc.recall /= d;
    acc.f1 /= d;
    Ok(acc)
}
