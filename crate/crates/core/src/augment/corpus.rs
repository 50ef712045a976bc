use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{augment, AugmentError, Lexicon, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnippetClass {
    Vulnerable,
    Patched,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusInput {
    pub cve_id: String,
    pub vulnerable_code: String,
    pub patched_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub cve_id: String,
    pub class: SnippetClass,
    pub transform: Transform,
    pub seed: u64,
    pub input_digest: String,
    pub output_digest: String,
    pub noop: bool,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema: u32,
    pub seed: u64,
    pub transforms: Vec<Transform>,
    pub items: Vec<CorpusItem>,
}

fn sha(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// `per_cve.0` vulnerable and `per_cve.1` patched variants of every input. The
/// transform of each output is drawn from `transforms` by the seed.
pub fn augment_corpus(
    inputs: &[CorpusInput],
    per_cve: (usize, usize),
    transforms: &[Transform],
    seed: u64,
    lexicon: &Lexicon,
) -> Result<CorpusManifest, AugmentError> {
    let transforms = if transforms.is_empty() { Transform::ALL.to_vec() } else { transforms.to_vec() };
    let mut jobs = Vec::new();
    for input in inputs {
        for (class, n, code) in
            [(SnippetClass::Vulnerable, per_cve.0, &input.vulnerable_code), (SnippetClass::Patched, per_cve.1, &input.patched_code)]
        {
            for i in 0..n {
                jobs.push((input.cve_id.as_str(), class, i, code.as_str()));
            }
        }
    }
    let items = jobs
        .par_iter()
        .map(|&(cve, class, i, code)| {
            let tag = match class {
                SnippetClass::Vulnerable => "v",
                SnippetClass::Patched => "p",
            };
            let key = format!("{cve}/{tag}/{i}");
            let pick = Sha256::digest(format!("{seed}:{key}").as_bytes());
            let transform = transforms[usize::from(pick[0]) % transforms.len()];
            let out = augment(code, transform, seed, &key, lexicon)?;
            Ok(CorpusItem {
                id: format!("{cve}-{tag}{i}-{}", transform.as_str().to_lowercase()),
                cve_id: cve.to_string(),
                class,
                transform,
                seed,
                input_digest: sha(code),
                output_digest: sha(&out.code),
                noop: out.noop,
                code: out.code,
            })
        })
        .collect::<Result<Vec<_>, AugmentError>>()?;
    Ok(CorpusManifest { schema: 1, seed, transforms, items })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(n: usize) -> Vec<CorpusInput> {
        (0..n)
            .map(|i| CorpusInput {
                cve_id: format!("CVE-2024-{:05}", i),
                vulnerable_code: format!("int f{i}(int a) {{ int b = a * {i}; return b; }}"),
                patched_code: format!("int f{i}(int a) {{ int b = a * {i}; if (b < 0) return 0; return b; }}"),
            })
            .collect()
    }

    #[test]
    fn one_per_class_sizes() {
        let m = augment_corpus(&inputs(75), (1, 1), &[], 7, &Lexicon::builtin()).unwrap();
        assert_eq!(m.items.len(), 150);
        assert!(augment_corpus(&[], (1, 1), &[], 7, &Lexicon::builtin()).unwrap().items.is_empty());
    }

    #[test]
    fn digests_stable_under_seed() {
        let a = augment_corpus(&inputs(10), (2, 1), &[], 3, &Lexicon::builtin()).unwrap();
        let b = augment_corpus(&inputs(10), (2, 1), &[], 3, &Lexicon::builtin()).unwrap();
        assert_eq!(a, b);
        let c = augment_corpus(&inputs(10), (2, 1), &[], 4, &Lexicon::builtin()).unwrap();
        assert_ne!(a.items.iter().map(|i| &i.output_digest).collect::<Vec<_>>(), c.items.iter().map(|i| &i.output_digest).collect::<Vec<_>>());
    }
}
