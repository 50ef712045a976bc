//! Tag vocabulary and keyword extraction from free-text intent.

use std::collections::BTreeSet;
use std::path::Path;

use super::SemanticError;

pub type KeywordSet = BTreeSet<String>;

const DEFAULT_TAGS: &str = include_str!("../../data/tags.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tags: Vec<String>,
    parts: Vec<Vec<String>>,
}

impl Vocabulary {
    /// One tag per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self, SemanticError> {
        let tags: BTreeSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        if tags.is_empty() {
            return Err(SemanticError::EmptyVocabulary);
        }
        let tags: Vec<String> = tags.into_iter().collect();
        let parts = tags.iter().map(|t| t.split('-').filter(|p| !p.is_empty()).map(str::to_string).collect()).collect();
        Ok(Vocabulary { tags, parts })
    }

    pub fn load(path: &Path) -> Result<Self, SemanticError> {
        let text = std::fs::read_to_string(path).map_err(|e| SemanticError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The vocabulary shipped in `data/tags.txt`.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TAGS).expect("bundled vocabulary is non-empty")
    }

    pub fn from_tags<I: IntoIterator<Item = S>, S: AsRef<str>>(tags: I) -> Result<Self, SemanticError> {
        let text: Vec<String> = tags.into_iter().map(|t| t.as_ref().to_string()).collect();
        Self::parse(&text.join("\n"))
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Lowercased word tokens. Letters, digits, `+` and `#` form words; a `.`
/// is kept only between two word characters (`node.js`).
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let is_word = |c: char| c.is_alphanumeric() || c == '+' || c == '#';
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let inner_dot = c == '.'
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if is_word(c) || inner_dot {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Vocabulary tags whose hyphen-separated parts occur as a contiguous run of
/// description tokens.
pub fn extract_keywords(description: &str, vocabulary: &Vocabulary) -> KeywordSet {
    let tokens = tokenize(description);
    let mut found = KeywordSet::new();
    for (tag, parts) in vocabulary.tags.iter().zip(&vocabulary.parts) {
        if parts.is_empty() || parts.len() > tokens.len() {
            continue;
        }
        if tokens.windows(parts.len()).any(|w| w.iter().zip(parts).all(|(a, b)| a == b)) {
            found.insert(tag.clone());
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tags: &[&str]) -> Vocabulary {
        Vocabulary::from_tags(tags).unwrap()
    }

    /// Independent oracle: hyphen-join the normalized text and look for
    /// `-tag-` as a substring.
    fn substring_oracle(description: &str, v: &Vocabulary) -> KeywordSet {
        let joined = format!("-{}-", tokenize(description).join("-"));
        v.tags().iter().filter(|t| joined.contains(&format!("-{t}-"))).cloned().collect()
    }

    #[test]
    fn zram_example() {
        let v = vocab(&["zram", "buffer", "linux-kernel"]);
        let got = extract_keywords("allocate a zram block device buffer", &v);
        assert_eq!(got, ["buffer", "zram"].iter().map(|s| s.to_string()).collect());
        assert_eq!(got, substring_oracle("allocate a zram block device buffer", &v));
    }

    #[test]
    fn phrases_case_and_word_boundaries() {
        let v = vocab(&["use-after-free", "c++", "node.js", "free", "buffer"]);
        let got = extract_keywords("Fix a Use after free in C++ code; see node.js. Buffers!", &v);
        let want: KeywordSet = ["c++", "free", "node.js", "use-after-free"].iter().map(|s| s.to_string()).collect();
        assert_eq!(got, want);
        assert!(extract_keywords("nothing relevant here", &v).is_empty());
        assert_eq!(extract_keywords("Buffer buffer BUFFER", &v).len(), 1);
    }

    #[test]
    fn empty_vocabulary_is_rejected() {
        assert!(matches!(Vocabulary::parse("# only comments\n\n"), Err(SemanticError::EmptyVocabulary)));
        assert!(Vocabulary::builtin().contains("use-after-free"));
    }

    #[test]
    fn agrees_with_substring_oracle_on_builtin() {
        let v = Vocabulary::builtin();
        for d in [
            "allocate the zram metadata table and free it on error",
            "parse a wasm3 plugin module, register it with the runtime",
            "read user input into a fixed-size stack buffer using strcpy in C",
            "multi-threading race condition on a shared linked-list with mutex",
        ] {
            assert_eq!(extract_keywords(d, &v), substring_oracle(d, &v), "{d}");
        }
    }
}
