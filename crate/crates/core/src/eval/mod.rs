//! Verification and patching metrics, per-category breakdowns and the
//! fine-tuning cost projections.

mod cost;

pub use cost::{cost_projection, CostCurve, CostParams, CostPlan};

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kb::CweCategory;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("labeling: {0}")]
    Labeling(String),
    #[error("sampling: {0}")]
    Sampling(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample_id: String,
    #[serde(default)]
    pub code: String,
    #[serde(default)]
    pub intent: String,
    #[serde(default)]
    pub ground_truth_cve: Option<String>,
    pub is_vulnerable: bool,
    #[serde(default)]
    pub cwe_category: Option<CweCategory>,
    #[serde(default)]
    pub cot_correct: Option<bool>,
    #[serde(default)]
    pub patch_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub predicted_vulnerable: bool,
    /// Overrides the sample's `cot_correct` label when present.
    #[serde(default)]
    pub cot_ok: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    VulnOnly,
    Joint,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vuln-only" => Some(Mode::VulnOnly),
            "joint" => Some(Mode::Joint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    /// 0 when there is no positive prediction or positive sample.
    pub f1: f64,
}

impl Confusion {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let n = tp + fp + fn_ + tn;
        let accuracy = if n == 0 { 0.0 } else { (tp + tn) as f64 / n as f64 };
        let d = 2 * tp + fp + fn_;
        let f1 = if d == 0 { 0.0 } else { (2 * tp) as f64 / d as f64 };
        Confusion { tp, fp, fn_, tn, accuracy, f1 }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Tp,
    Fp,
    Fn,
    Tn,
}

/// In joint mode a correct verdict also needs a correct CoT; an incorrect CoT
/// moves a positive prediction to FP and a negative one to FN.
fn classify(predicted: bool, actual: bool, cot_ok: bool, mode: Mode) -> Cell {
    let cot = mode == Mode::VulnOnly || cot_ok;
    match (predicted, actual) {
        (true, true) if cot => Cell::Tp,
        (true, _) => Cell::Fp,
        (false, false) if cot => Cell::Tn,
        (false, _) => Cell::Fn,
    }
}

fn joined<'a>(predictions: &'a [Prediction], samples: &'a [LabeledSample]) -> Result<Vec<(&'a Prediction, &'a LabeledSample)>, EvalError> {
    let by_id: HashMap<&str, &LabeledSample> = samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    if by_id.len() != samples.len() {
        return Err(EvalError::Dataset("duplicate sample_id".into()));
    }
    predictions
        .iter()
        .map(|p| {
            by_id
                .get(p.sample_id.as_str())
                .map(|s| (p, *s))
                .ok_or_else(|| EvalError::Dataset(format!("prediction for unknown sample {}", p.sample_id)))
        })
        .collect()
}

fn cot_label(p: &Prediction, s: &LabeledSample, mode: Mode) -> Result<bool, EvalError> {
    match (mode, p.cot_ok.or(s.cot_correct)) {
        (Mode::VulnOnly, c) => Ok(c.unwrap_or(true)),
        (Mode::Joint, Some(c)) => Ok(c),
        (Mode::Joint, None) => Err(EvalError::Labeling(format!("sample {} has no CoT label", s.sample_id))),
    }
}

pub fn confusion(predictions: &[Prediction], samples: &[LabeledSample], mode: Mode) -> Result<Confusion, EvalError> {
    let mut c = [0usize; 4];
    for (p, s) in joined(predictions, samples)? {
        let cell = classify(p.predicted_vulnerable, s.is_vulnerable, cot_label(p, s, mode)?, mode);
        c[cell as usize] += 1;
    }
    Ok(Confusion::from_counts(c[0], c[1], c[2], c[3]))
}

/// One confusion table per CWE category; samples without a category are skipped.
pub fn confusion_by_category(
    predictions: &[Prediction],
    samples: &[LabeledSample],
    mode: Mode,
) -> Result<BTreeMap<CweCategory, Confusion>, EvalError> {
    let mut groups: BTreeMap<CweCategory, (Vec<Prediction>, Vec<LabeledSample>)> = BTreeMap::new();
    for (p, s) in joined(predictions, samples)? {
        if let Some(cat) = s.cwe_category {
            let g = groups.entry(cat).or_default();
            g.0.push(p.clone());
            g.1.push(s.clone());
        }
    }
    groups.into_iter().map(|(cat, (p, s))| Ok((cat, confusion(&p, &s, mode)?))).collect()
}

/// Fraction of labeled results that are correct.
pub fn patch_accuracy(results: &[(String, Option<bool>)]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Undefined("patch accuracy of an empty set".into()));
    }
    let mut ok = 0usize;
    for (id, label) in results {
        match label {
            Some(true) => ok += 1,
            Some(false) => {}
            None => return Err(EvalError::Labeling(format!("sample {id} has no patch label"))),
        }
    }
    Ok(ok as f64 / results.len() as f64)
}

/// Exactly `ratio.0` vulnerable and `ratio.1` clean samples per CVE, chosen by
/// a PRNG keyed on `(seed, cve)`. Output is grouped by ascending CVE.
pub fn sample_ratio(samples: &[LabeledSample], ratio: (usize, usize), seed: u64) -> Result<Vec<LabeledSample>, EvalError> {
    let mut by_cve: BTreeMap<&str, (Vec<&LabeledSample>, Vec<&LabeledSample>)> = BTreeMap::new();
    for s in samples {
        let cve = s.ground_truth_cve.as_deref().unwrap_or("");
        let g = by_cve.entry(cve).or_default();
        if s.is_vulnerable { g.0.push(s) } else { g.1.push(s) }
    }
    let mut out = Vec::new();
    for (cve, (vuln, clean)) in by_cve {
        let name = if cve.is_empty() { "(no CVE)" } else { cve };
        if vuln.len() < ratio.0 || clean.len() < ratio.1 {
            return Err(EvalError::Sampling(format!(
                "{name} has {} vulnerable and {} clean samples, {}:{} needs at least {} and {}",
                vuln.len(),
                clean.len(),
                ratio.0,
                ratio.1,
                ratio.0,
                ratio.1
            )));
        }
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(cve.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        out.extend(vuln.choose_multiple(&mut rng, ratio.0).map(|s| (*s).clone()));
        out.extend(clean.choose_multiple(&mut rng, ratio.1).map(|s| (*s).clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub overall: Confusion,
    pub by_category: BTreeMap<CweCategory, Confusion>,
    pub patch_accuracy: Option<f64>,
    pub patch_accuracy_by_category: BTreeMap<CweCategory, f64>,
}

impl EvalReport {
    pub fn build(predictions: &[Prediction], samples: &[LabeledSample], mode: Mode) -> Result<Self, EvalError> {
        let overall = confusion(predictions, samples, mode)?;
        let by_category = confusion_by_category(predictions, samples, mode)?;
        let labeled: Vec<&LabeledSample> = samples.iter().filter(|s| s.patch_correct.is_some()).collect();
        let acc = |set: &[&LabeledSample]| {
            let r: Vec<(String, Option<bool>)> = set.iter().map(|s| (s.sample_id.clone(), s.patch_correct)).collect();
            patch_accuracy(&r).ok()
        };
        let mut patch_accuracy_by_category = BTreeMap::new();
        for cat in CweCategory::ALL {
            let set: Vec<&LabeledSample> = labeled.iter().copied().filter(|s| s.cwe_category == Some(cat)).collect();
            if let Some(a) = acc(&set) {
                patch_accuracy_by_category.insert(cat, a);
            }
        }
        Ok(EvalReport { mode, overall, by_category, patch_accuracy: acc(&labeled), patch_accuracy_by_category })
    }

    /// Plain-text tables: overall counts, per-category accuracy/F1, patch accuracy.
    pub fn to_text(&self) -> String {
        let pct = |x: f64| format!("{:.2}%", 100.0 * x);
        let mode = match self.mode {
            Mode::VulnOnly => "vulnerability only",
            Mode::Joint => "vulnerability and CoT",
        };
        let o = &self.overall;
        let mut s = format!("Verification ({mode})\n  TP  FP  FN  TN  Acc      F1\n");
        s += &format!("  {:<3} {:<3} {:<3} {:<3} {:<8} {}\n", o.tp, o.fp, o.fn_, o.tn, pct(o.accuracy), pct(o.f1));
        if !self.by_category.is_empty() {
            s += "\nBy CWE category\n  Cat  Acc      F1\n";
            for (cat, c) in &self.by_category {
                s += &format!("  {:<4} {:<8} {}\n", cat.to_string(), pct(c.accuracy), pct(c.f1));
            }
        }
        if let Some(p) = self.patch_accuracy {
            s += &format!("\nPatch accuracy: {}\n", pct(p));
            for (cat, a) in &self.patch_accuracy_by_category {
                s += &format!("  {:<4} {}\n", cat.to_string(), pct(*a));
            }
        }
        s
    }
}
