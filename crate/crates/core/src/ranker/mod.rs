//! Unified similarity score, pairwise margin loss and candidate ranking.

mod train;

pub use train::{
    split_indices, synthetic_dataset, train, Accuracy, SyntheticKind, TrainConfig, TrainingMeta, TrainingSample,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numfmt;

pub const DEFAULT_MARGIN: f64 = 0.2;
pub const INITIAL_WEIGHTS: [f64; 4] = [0.25; 4];

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("model file: {0}")]
    Model(String),
}

/// Maps a cosine in `[-1, 1]` onto `[0, 1]`.
pub fn normalize(c: f64) -> f64 {
    (c.clamp(-1.0, 1.0) + 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawFeatures")]
pub struct SimilarityFeatures {
    pub candidate_cve_id: String,
    #[serde(serialize_with = "numfmt::serialize_f64")]
    pub j_kw: f64,
    #[serde(serialize_with = "numfmt::serialize_f64")]
    pub c_desc: f64,
    #[serde(serialize_with = "numfmt::serialize_f64")]
    pub c_var: f64,
    #[serde(serialize_with = "numfmt::serialize_f64")]
    pub c_func: f64,
    /// `(J_kw, C̃_desc, C̃_var, C̃_func)`.
    #[serde(serialize_with = "numfmt::serialize_array4")]
    pub normalized: [f64; 4],
    /// Score under the model that last ranked these features; 0 until then.
    #[serde(serialize_with = "numfmt::serialize_f64")]
    pub unified: f64,
}

/// Serialized form as read back; `normalized` is always recomputed from the raw values.
#[derive(Deserialize)]
struct RawFeatures {
    candidate_cve_id: String,
    j_kw: f64,
    c_desc: f64,
    c_var: f64,
    c_func: f64,
    #[serde(default)]
    unified: f64,
}

impl From<RawFeatures> for SimilarityFeatures {
    fn from(r: RawFeatures) -> Self {
        SimilarityFeatures { unified: r.unified, ..SimilarityFeatures::new(r.candidate_cve_id, r.j_kw, r.c_desc, r.c_var, r.c_func) }
    }
}

impl SimilarityFeatures {
    pub fn new(candidate_cve_id: impl Into<String>, j_kw: f64, c_desc: f64, c_var: f64, c_func: f64) -> Self {
        SimilarityFeatures {
            candidate_cve_id: candidate_cve_id.into(),
            j_kw,
            c_desc,
            c_var,
            c_func,
            normalized: [j_kw.clamp(0.0, 1.0), normalize(c_desc), normalize(c_var), normalize(c_func)],
            unified: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    #[serde(serialize_with = "numfmt::serialize_array4")]
    pub weights: [f64; 4],
    pub margin: f64,
    /// No-match threshold τ; `None` always returns the top candidate.
    #[serde(serialize_with = "opt_f64")]
    pub no_match_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingMeta>,
}

fn opt_f64<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => numfmt::serialize_f64(x, s),
        None => s.serialize_none(),
    }
}

impl Default for RankModel {
    fn default() -> Self {
        RankModel { weights: INITIAL_WEIGHTS, margin: DEFAULT_MARGIN, no_match_threshold: None, training: None }
    }
}

impl RankModel {
    pub fn is_trained(&self) -> bool {
        self.training.is_some()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RankError> {
        let m: RankModel = serde_json::from_str(text).map_err(|e| RankError::Model(e.to_string()))?;
        if !m.weights.iter().all(|w| w.is_finite()) {
            return Err(RankError::Model("non-finite weight".into()));
        }
        if !(m.margin > 0.0 && m.margin.is_finite()) {
            return Err(RankError::Model("margin must be positive".into()));
        }
        if m.no_match_threshold.is_some_and(|t| !t.is_finite()) {
            return Err(RankError::Model("threshold must be finite".into()));
        }
        Ok(m)
    }
}

pub fn dot(w: &[f64; 4], x: &[f64; 4]) -> f64 {
    w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3]
}

/// `S = w1·J_kw + w2·C̃_desc + w3·C̃_var + w4·C̃_func`.
pub fn unified_score(features: &SimilarityFeatures, model: &RankModel) -> f64 {
    dot(&model.weights, &features.normalized)
}

/// Hinge `max(0, m − (s⁺ − s⁻))`.
pub fn pairwise_loss(s_pos: f64, s_neg: f64, m: f64) -> f64 {
    (m - (s_pos - s_neg)).max(0.0)
}

/// A (positive, negative) pair of normalized feature vectors.
pub type Pair = ([f64; 4], [f64; 4]);

/// Summed hinge loss over `pairs` and its gradient with respect to `w`.
pub fn batch_loss_and_grad(w: &[f64; 4], pairs: &[Pair], m: f64) -> (f64, [f64; 4]) {
    let mut loss = 0.0;
    let mut grad = [0.0; 4];
    for (pos, neg) in pairs {
        let l = pairwise_loss(dot(w, pos), dot(w, neg), m);
        if l > 0.0 {
            loss += l;
            for k in 0..4 {
                grad[k] -= pos[k] - neg[k];
            }
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub best: Option<SimilarityFeatures>,
    /// Descending by unified score, ties by ascending cve_id.
    pub scored: Vec<SimilarityFeatures>,
}

pub fn rank(features: &[SimilarityFeatures], model: &RankModel) -> Result<Ranking, RankError> {
    if features.is_empty() {
        return Err(RankError::Argument("no candidates to rank".into()));
    }
    let mut scored: Vec<SimilarityFeatures> = features
        .iter()
        .map(|f| SimilarityFeatures { unified: unified_score(f, model), ..f.clone() })
        .collect();
    scored.sort_by(|a, b| b.unified.total_cmp(&a.unified).then_with(|| a.candidate_cve_id.cmp(&b.candidate_cve_id)));
    let top = &scored[0];
    let best = match model.no_match_threshold {
        Some(tau) if top.unified < tau => None,
        _ => Some(top.clone()),
    };
    Ok(Ranking { best, scored })
}

pub(crate) fn digest_json<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("value serializes")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feats(id: &str, x: [f64; 4]) -> SimilarityFeatures {
        SimilarityFeatures { normalized: x, ..SimilarityFeatures::new(id, 0.0, 0.0, 0.0, 0.0) }
    }

    #[test]
    fn normalize_endpoints() {
        assert_eq!(normalize(-1.0), 0.0);
        assert_eq!(normalize(0.0), 0.5);
        assert_eq!(normalize(1.0), 1.0);
        assert_eq!(normalize(1.0 + 1e-10), 1.0);
    }

    #[test]
    fn score_and_loss_examples() {
        let m = RankModel { weights: [1.0, 0.0, 0.0, 0.0], ..RankModel::default() };
        assert_eq!(unified_score(&SimilarityFeatures::new("a", 0.7, 0.3, -0.2, 0.9), &m), 0.7);
        assert_eq!(unified_score(&feats("a", [1.0; 4]), &RankModel::default()), 1.0);
        assert_eq!(pairwise_loss(0.9, 0.5, 0.2), 0.0);
        assert!((pairwise_loss(0.6, 0.5, 0.2) - 0.1).abs() < 1e-15);
        assert!((pairwise_loss(0.5, 0.9, 0.2) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn rank_rules() {
        let w = RankModel { weights: [1.0, 0.0, 0.0, 0.0], no_match_threshold: Some(0.5), ..RankModel::default() };
        let r = rank(&[feats("CVE-2024-0002", [0.3, 0.0, 0.0, 0.0]), feats("CVE-2024-0001", [0.8, 0.0, 0.0, 0.0])], &w).unwrap();
        assert_eq!(r.best.unwrap().candidate_cve_id, "CVE-2024-0001");

        let r = rank(&[feats("CVE-2024-0002", [0.3, 0.0, 0.0, 0.0]), feats("CVE-2024-0001", [0.2, 0.0, 0.0, 0.0])], &w).unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.scored.len(), 2);
        assert_eq!(r.scored[0].candidate_cve_id, "CVE-2024-0002");

        let tie = rank(&[feats("CVE-2024-0009", [0.6, 0.0, 0.0, 0.0]), feats("CVE-2024-0003", [0.6, 0.0, 0.0, 0.0])], &w).unwrap();
        assert_eq!(tie.best.unwrap().candidate_cve_id, "CVE-2024-0003");
        assert!(rank(&[], &w).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = RankModel { weights: [0.1, -2.5, 1.0 / 3.0, 4.0], no_match_threshold: Some(0.42), ..RankModel::default() };
        let text = m.to_json();
        assert!(text.contains("0.333333333"));
        let back = RankModel::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert!(RankModel::from_json(&text.replace("\"margin\": 0.2", "\"margin\": -1.0")).is_err());
    }

    proptest! {
        #[test]
        fn rank_is_order_independent(
            xs in proptest::collection::vec(proptest::array::uniform4(0u8..3), 1..8),
            rot in 0usize..8,
        ) {
            // Coarse values so that ties at the top are common.
            let fs: Vec<_> = xs
                .iter()
                .enumerate()
                .map(|(i, x)| feats(&format!("CVE-2024-{:04}", 7 - i), x.map(|v| f64::from(v) / 2.0)))
                .collect();
            let mut shuffled = fs.clone();
            shuffled.rotate_left(rot % fs.len());
            let m = RankModel::default();
            prop_assert_eq!(rank(&fs, &m).unwrap(), rank(&shuffled, &m).unwrap());
        }

        #[test]
        fn loss_shift_invariant(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -5.0f64..5.0) {
            prop_assert!((pairwise_loss(a, b, 0.2) - pairwise_loss(a + c, b + c, 0.2)).abs() < 1e-12);
        }
    }
}
