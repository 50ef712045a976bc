//! Fuzzy keyword-set similarity.

use std::collections::BTreeSet;

pub const DEFAULT_THRESHOLD: f64 = 0.80;

/// Normalized indel similarity: `1 - indel(a, b) / (|a| + |b|)`, which equals
/// `2 * lcs(a, b) / (|a| + |b|)`. Lengths are in characters.
pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * lcs_len(&a, &b) as f64 / total as f64
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Size of the greedy fuzzy intersection. Pairs with `ratio >= threshold`
/// are taken in order of descending ratio, then by the unordered pair of
/// strings, each element used at most once. The ordering key does not
/// depend on which set an element came from, so the count is symmetric.
pub fn fuzzy_intersection(a: &BTreeSet<String>, b: &BTreeSet<String>, threshold: f64) -> usize {
    let av: Vec<&String> = a.iter().collect();
    let bv: Vec<&String> = b.iter().collect();
    let mut pairs = Vec::new();
    for (i, x) in av.iter().enumerate() {
        for (j, y) in bv.iter().enumerate() {
            let r = ratio(x, y);
            if r >= threshold {
                let (lo, hi) = if x <= y { (*x, *y) } else { (*y, *x) };
                pairs.push((r, lo, hi, i, j));
            }
        }
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0).then_with(|| p.1.cmp(q.1)).then_with(|| p.2.cmp(q.2)));
    let mut used_a = vec![false; av.len()];
    let mut used_b = vec![false; bv.len()];
    let mut count = 0;
    for (_, _, _, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            count += 1;
        }
    }
    count
}

/// `|A ∩rf B| / (|A| + |B| - |A ∩rf B|)`; zero when both sets are empty.
pub fn fuzzy_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>, threshold: f64) -> f64 {
    assert!(threshold > 0.0 && threshold <= 1.0, "threshold must lie in (0, 1]");
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = fuzzy_intersection(a, b, threshold);
    inter as f64 / (a.len() + b.len() - inter) as f64
}
