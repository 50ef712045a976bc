use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{batch_loss_and_grad, digest_json, rank, Pair, RankError, RankModel, SimilarityFeatures, INITIAL_WEIGHTS};
use crate::numfmt;

/// One target with its scored candidates, exactly one of which is correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub sample_id: String,
    pub candidates: Vec<SimilarityFeatures>,
    pub positive_cve_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub seed: u64,
    /// Train/validation/test percentages.
    pub split: [u32; 3],
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 12,
            learning_rate: 0.005,
            margin: super::DEFAULT_MARGIN,
            seed,
            split: [70, 15, 15],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Top-1 accuracy per split; `None` for an empty split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub train: Option<f64>,
    pub validation: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub split: [u32; 3],
    pub dataset_digest: String,
    pub samples: usize,
    pub pairs: usize,
    #[serde(serialize_with = "numfmt::serialize_f64")]
    pub final_loss: f64,
    pub accuracy: Accuracy,
}

/// Seeded shuffle of `0..n`, cut into train/validation/test by percentage.
pub fn split_indices(n: usize, split: [u32; 3], seed: u64) -> Result<[Vec<usize>; 3], RankError> {
    if split.iter().sum::<u32>() != 100 {
        return Err(RankError::Argument(format!("split {split:?} does not sum to 100")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * split[0] as usize / 100;
    let n_val = n * split[1] as usize / 100;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok([idx, val, test])
}

fn validate(dataset: &[TrainingSample]) -> Result<(), RankError> {
    if dataset.is_empty() {
        return Err(RankError::Dataset("no samples".into()));
    }
    for s in dataset {
        let pos = s.candidates.iter().filter(|c| c.candidate_cve_id == s.positive_cve_id).count();
        if pos != 1 {
            return Err(RankError::Dataset(format!("sample {} has {pos} positive candidates, expected 1", s.sample_id)));
        }
        if s.candidates.len() < 2 {
            return Err(RankError::Dataset(format!("sample {} has no negative candidate", s.sample_id)));
        }
        if s.candidates.iter().any(|c| c.normalized.iter().any(|x| !x.is_finite())) {
            return Err(RankError::Dataset(format!("sample {} has a non-finite feature", s.sample_id)));
        }
    }
    Ok(())
}

fn pairs_of(sample: &TrainingSample) -> impl Iterator<Item = Pair> + '_ {
    let pos = sample.candidates.iter().find(|c| c.candidate_cve_id == sample.positive_cve_id).expect("validated");
    sample.candidates.iter().filter(|c| c.candidate_cve_id != sample.positive_cve_id).map(|n| (pos.normalized, n.normalized))
}

fn top1(samples: &[&TrainingSample], model: &RankModel) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let open = RankModel { no_match_threshold: None, ..model.clone() };
    let hits = samples
        .iter()
        .filter(|s| rank(&s.candidates, &open).ok().and_then(|r| r.best).is_some_and(|b| b.candidate_cve_id == s.positive_cve_id))
        .count();
    Some(hits as f64 / samples.len() as f64)
}

/// Linear-interpolation percentile of `xs` (`p` in [0, 100]).
fn percentile(xs: &mut [f64], p: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}

/// Adam over every (positive, negative) pair of the training split.
pub fn train(dataset: &[TrainingSample], config: &TrainConfig) -> Result<RankModel, RankError> {
    validate(dataset)?;
    if config.batch_size == 0 || config.epochs == 0 || !(config.learning_rate > 0.0) || !(config.margin > 0.0) {
        return Err(RankError::Argument("epochs, batch size, learning rate and margin must be positive".into()));
    }
    let [tr, va, te] = split_indices(dataset.len(), config.split, config.seed)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| &dataset[i]).collect::<Vec<_>>();
    let (train_set, val_set, test_set) = (pick(&tr), pick(&va), pick(&te));
    let mut pairs: Vec<Pair> = train_set.iter().flat_map(|s| pairs_of(s)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_ada_u64);
    let (mut w, mut m, mut v) = (INITIAL_WEIGHTS, [0.0; 4], [0.0; 4]);
    let mut t = 0i32;
    let mut epoch_loss = 0.0;
    for epoch in 0..config.epochs {
        pairs.shuffle(&mut rng);
        epoch_loss = 0.0;
        for batch in pairs.chunks(config.batch_size) {
            let (loss, g) = batch_loss_and_grad(&w, batch, config.margin);
            epoch_loss += loss;
            t += 1;
            for k in 0..4 {
                m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
                v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
                let mh = m[k] / (1.0 - config.beta1.powi(t));
                let vh = v[k] / (1.0 - config.beta2.powi(t));
                w[k] -= config.learning_rate * mh / (vh.sqrt() + config.epsilon);
            }
        }
        if !epoch_loss.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Err(RankError::Divergence { epoch });
        }
    }

    let mut model = RankModel { weights: w, margin: config.margin, no_match_threshold: None, training: None };
    let mut val_pos: Vec<f64> = val_set
        .iter()
        .map(|s| {
            let p = s.candidates.iter().find(|c| c.candidate_cve_id == s.positive_cve_id).expect("validated");
            super::unified_score(p, &model)
        })
        .collect();
    if !val_pos.is_empty() {
        model.no_match_threshold = Some(numfmt::round9(percentile(&mut val_pos, 5.0)));
    }
    let accuracy = Accuracy { train: top1(&train_set, &model), validation: top1(&val_set, &model), test: top1(&test_set, &model) };
    model.training = Some(TrainingMeta {
        seed: config.seed,
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        split: config.split,
        dataset_digest: digest_json(&dataset),
        samples: dataset.len(),
        pairs: pairs.len(),
        final_loss: epoch_loss,
        accuracy,
    });
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticKind {
    /// The positive beats every negative on every feature.
    Separable,
    /// Only feature `k` (0-based) carries signal; the rest are uniform noise.
    Informative(usize),
}

/// Synthetic ranking data. Negatives draw `J_kw ∈ [0, 0.6]` and cosines in
/// `[-1, 0.5]`; an informative positive feature is the negatives' maximum plus
/// `U(0.05, 0.25)`. Gaussian noise of `sigma` is then added to every feature.
pub fn synthetic_dataset(kind: SyntheticKind, samples: usize, negatives: usize, sigma: f64, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let n = negatives + 1;
    (0..samples)
        .map(|s| {
            let mut raw = vec![[0.0f64; 4]; n];
            let pos_idx = rng.gen_range(0..n);
            for k in 0..4 {
                let (lo, hi) = if k == 0 { (0.0, 0.6) } else { (-1.0, 0.5) };
                let informative = match kind {
                    SyntheticKind::Separable => true,
                    SyntheticKind::Informative(i) => i == k,
                };
                let mut best = f64::MIN;
                for (c, row) in raw.iter_mut().enumerate() {
                    if c != pos_idx {
                        row[k] = rng.gen_range(lo..=hi);
                        best = best.max(row[k]);
                    }
                }
                raw[pos_idx][k] = if informative { best + rng.gen_range(0.05..0.25) } else { rng.gen_range(lo..=hi) };
            }
            let candidates = raw
                .iter()
                .enumerate()
                .map(|(c, row)| {
                    let mut x = *row;
                    if sigma > 0.0 {
                        for v in &mut x {
                            *v += noise.sample(&mut rng);
                        }
                    }
                    SimilarityFeatures::new(
                        format!("CVE-2030-{:05}", c + 1),
                        x[0].clamp(0.0, 1.0),
                        x[1].clamp(-1.0, 1.0),
                        x[2].clamp(-1.0, 1.0),
                        x[3].clamp(-1.0, 1.0),
                    )
                })
                .collect();
            TrainingSample { sample_id: format!("s{s:04}"), candidates, positive_cve_id: format!("CVE-2030-{:05}", pos_idx + 1) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let [a, b, c] = split_indices(300, [70, 15, 15], 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (210, 45, 45));
        let mut all: Vec<_> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
        assert!(split_indices(10, [50, 20, 20], 1).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&mut [4.0, 1.0, 3.0, 2.0, 5.0], 5.0), 1.2);
        assert_eq!(percentile(&mut [7.0], 5.0), 7.0);
    }

    #[test]
    fn rejects_bad_samples() {
        let mut d = synthetic_dataset(SyntheticKind::Separable, 3, 2, 0.0, 4);
        d[1].positive_cve_id = "CVE-1999-0001".into();
        assert!(matches!(train(&d, &TrainConfig::new(1)), Err(RankError::Dataset(_))));
        let mut d = synthetic_dataset(SyntheticKind::Separable, 3, 2, 0.0, 4);
        let pos = d[0].positive_cve_id.clone();
        d[0].candidates.retain(|c| c.candidate_cve_id == pos);
        assert!(matches!(train(&d, &TrainConfig::new(1)), Err(RankError::Dataset(_))));
    }

    #[test]
    fn single_informative_feature_dominates() {
        let d = synthetic_dataset(SyntheticKind::Informative(2), 300, 4, 0.0, 11);
        let cfg = TrainConfig { epochs: 200, ..TrainConfig::new(3) };
        let m = train(&d, &cfg).unwrap();
        let w = m.weights;
        assert!(w[2].abs() > w[0].abs() && w[2].abs() > w[1].abs() && w[2].abs() > w[3].abs(), "{w:?}");
        assert_eq!(m.training.unwrap().accuracy.test, Some(1.0));
    }

    #[test]
    fn bit_reproducible() {
        let d = synthetic_dataset(SyntheticKind::Separable, 60, 3, 0.05, 2);
        let cfg = TrainConfig { epochs: 20, ..TrainConfig::new(9) };
        assert_eq!(train(&d, &cfg).unwrap().to_json(), train(&d, &cfg).unwrap().to_json());
    }
}
