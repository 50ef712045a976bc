//! Seeded source-level transforms that produce augmented vulnerable and
//! patched variants while keeping the original behaviour.

mod corpus;

pub use corpus::{augment_corpus, CorpusInput, CorpusItem, CorpusManifest, SnippetClass};

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataflow::ast::{Block, Item, Stmt, StmtKind};
use crate::dataflow::lexer::{tokenize, Token, TokenKind};
use crate::dataflow::parser::parse;
use crate::dataflow::DfgError;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error(transparent)]
    Parse(#[from] DfgError),
    #[error("lexicon: {0}")]
    Lexicon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Transform {
    T1,
    T2,
    T3,
    T4,
    T5,
    NT1,
    NT2,
    NT3,
    NT4,
}

impl Transform {
    pub const ALL: [Transform; 9] = [
        Transform::T1,
        Transform::T2,
        Transform::T3,
        Transform::T4,
        Transform::T5,
        Transform::NT1,
        Transform::NT2,
        Transform::NT3,
        Transform::NT4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::T1 => "T1",
            Transform::T2 => "T2",
            Transform::T3 => "T3",
            Transform::T4 => "T4",
            Transform::T5 => "T5",
            Transform::NT1 => "NT1",
            Transform::NT2 => "NT2",
            Transform::NT3 => "NT3",
            Transform::NT4 => "NT4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s))
    }

    /// Whether the transform leaves every original token in place.
    pub fn is_trivial(self) -> bool {
        matches!(self, Transform::T1 | Transform::T2 | Transform::T3 | Transform::T4 | Transform::T5)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vulnerability-flavoured identifiers and comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub names: Vec<String>,
    pub comments: Vec<String>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, AugmentError> {
        let (mut names, mut comments) = (Vec::new(), Vec::new());
        let mut section = None;
        for line in text.lines().map(str::trim) {
            match line {
                "" => {}
                "[names]" => section = Some(true),
                "[comments]" => section = Some(false),
                l if l.starts_with('#') => {}
                l => match section {
                    Some(true) => {
                        if !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || l.starts_with(|c: char| c.is_ascii_digit()) {
                            return Err(AugmentError::Lexicon(format!("`{l}` is not an identifier")));
                        }
                        names.push(l.to_string());
                    }
                    Some(false) => {
                        let ok = l.starts_with("//") || (l.starts_with("/*") && l.ends_with("*/") && !l[2..l.len() - 2].contains("*/"));
                        if !ok {
                            return Err(AugmentError::Lexicon(format!("`{l}` is not a single comment")));
                        }
                        comments.push(l.to_string());
                    }
                    None => return Err(AugmentError::Lexicon(format!("`{l}` appears before any section"))),
                },
            }
        }
        if names.is_empty() || comments.is_empty() {
            return Err(AugmentError::Lexicon("both [names] and [comments] need at least one line".into()));
        }
        Ok(Lexicon { names, comments })
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/lexicon.txt")).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AugmentError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmented {
    pub code: String,
    pub transform: Transform,
    /// Nothing eligible was found, so `code` is the input unchanged.
    pub noop: bool,
}

/// PRNG keyed by `(seed, transform, key)`; `key` is normally the CVE id.
pub fn transform_rng(seed: u64, transform: Transform, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(transform.as_str().as_bytes());
    h.update([0]);
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub fn augment(code: &str, transform: Transform, seed: u64, key: &str, lexicon: &Lexicon) -> Result<Augmented, AugmentError> {
    let mut rng = transform_rng(seed, transform, key);
    let tokens = tokenize(code)?;
    let (out, noop) = match transform {
        Transform::T1 => match t1_unreachable_block(code, &tokens, &mut rng)? {
            Some(c) => (c, false),
            None => (code.to_string(), true),
        },
        Transform::T2 => (insert_line_comments(code, &tokens, &mut rng, |r| format!("// {}", CODE_SNIPPETS.choose(r).expect("nonempty"))), false),
        Transform::T3 => (t3_whitespace(code, &tokens, &mut rng), false),
        Transform::T4 => (append(code, &t4_dead_function(&tokens, &mut rng)), false),
        Transform::T5 => (t5_blank_lines(code, &mut rng), false),
        Transform::NT1 | Transform::NT2 => match rename(code, &tokens, transform == Transform::NT2, &mut rng, lexicon)? {
            Some(c) => (c, false),
            None => (code.to_string(), true),
        },
        Transform::NT3 => (append(code, &nt3_bounded_copy(&tokens, &mut rng, lexicon)), false),
        Transform::NT4 => (insert_line_comments(code, &tokens, &mut rng, |r| lexicon.comments.choose(r).expect("nonempty").clone()), false),
    };
    Ok(Augmented { code: out, transform, noop })
}

/// Applies `transforms` left to right, each keyed by the same seed.
pub fn augment_chain(code: &str, transforms: &[Transform], seed: u64, key: &str, lexicon: &Lexicon) -> Result<Augmented, AugmentError> {
    let mut cur = Augmented { code: code.to_string(), transform: *transforms.first().unwrap_or(&Transform::T3), noop: true };
    for &t in transforms {
        let next = augment(&cur.code, t, seed, key, lexicon)?;
        cur = Augmented { code: next.code, transform: t, noop: cur.noop && next.noop };
    }
    Ok(cur)
}

const CODE_SNIPPETS: &[&str] = &[
    "len = len + 1;",
    "if (ptr == NULL) return -1;",
    "buf[i] = 0;",
    "free(tmp);",
    "count--;",
    "memset(buf, 0, size);",
    "ret = check(arg);",
    "while (n--) *dst++ = *src++;",
];

fn identifiers(tokens: &[Token]) -> BTreeSet<String> {
    tokens.iter().filter(|t| matches!(t.kind, TokenKind::Ident | TokenKind::Keyword)).map(|t| t.text.clone()).collect()
}

/// A name absent from `taken`, which it is then added to.
fn fresh(taken: &mut BTreeSet<String>, stem: &str, rng: &mut ChaCha8Rng) -> String {
    loop {
        let name = format!("{stem}_{:04x}", rng.gen::<u16>());
        if taken.insert(name.clone()) {
            return name;
        }
    }
}

fn append(code: &str, addition: &str) -> String {
    let trimmed = code.trim_end_matches(['\n', '\r', ' ', '\t']);
    format!("{trimmed}\n\n{addition}\n")
}

fn returns_in_block(b: &Block, out: &mut Vec<usize>) {
    for s in &b.stmts {
        if matches!(s.kind, StmtKind::Return(_)) {
            out.push(s.span.end);
        }
        returns_in_stmt(s, out);
    }
}

fn returns_in_stmt(s: &Stmt, out: &mut Vec<usize>) {
    match &s.kind {
        StmtKind::Compound(b) => returns_in_block(b, out),
        StmtKind::If { then, otherwise, .. } => {
            returns_in_stmt(then, out);
            if let Some(o) = otherwise {
                returns_in_stmt(o, out);
            }
        }
        StmtKind::While { body, .. }
        | StmtKind::DoWhile { body, .. }
        | StmtKind::For { body, .. }
        | StmtKind::Switch { body, .. }
        | StmtKind::Labeled { body, .. }
        | StmtKind::MacroLoop { body, .. } => returns_in_stmt(body, out),
        _ => {}
    }
}

/// Inserts a block right after a `return` that sits directly in a compound
/// statement, so the block can never execute.
fn t1_unreachable_block(code: &str, tokens: &[Token], rng: &mut ChaCha8Rng) -> Result<Option<String>, AugmentError> {
    let tu = parse(code)?;
    let mut ends = Vec::new();
    for item in &tu.items {
        if let Item::Function(f) = item {
            returns_in_block(&f.body, &mut ends);
        }
    }
    let Some(&at) = ends.choose(rng) else { return Ok(None) };
    let mut taken = identifiers(tokens);
    let v = fresh(&mut taken, "unreach", rng);
    let (a, b) = (rng.gen_range(1..100), rng.gen_range(1..10));
    let block = match rng.gen_range(0..3) {
        0 => format!(" {{ int {v} = {a}; {v} += {b}; }}"),
        1 => format!(" {{ int {v} = {a}; while ({v} > {b}) {v}--; }}"),
        _ => format!(" {{ int {v}[{b}]; {v}[0] = {a}; }}"),
    };
    Ok(Some(format!("{}{block}{}", &code[..at], &code[at..])))
}

/// Byte offsets just after a `;`, `{` or `}` that ends its line.
fn line_end_slots(tokens: &[Token]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| {
            (t.is_punct(";") || t.is_punct("{") || t.is_punct("}")) && tokens.get(i + 1).is_none_or(|n| n.line > t.line)
        })
        .map(|(_, t)| t.end)
        .collect()
}

fn insert_line_comments(code: &str, tokens: &[Token], rng: &mut ChaCha8Rng, mut comment: impl FnMut(&mut ChaCha8Rng) -> String) -> String {
    let slots = line_end_slots(tokens);
    if slots.is_empty() {
        return append(code, &comment(rng));
    }
    let k = rng.gen_range(1..=slots.len().min(3));
    let mut chosen: Vec<usize> = slots.choose_multiple(rng, k).copied().collect();
    chosen.sort_unstable();
    let mut out = String::with_capacity(code.len() + 64 * k);
    let mut last = 0;
    for at in chosen {
        out.push_str(&code[last..at]);
        out.push(' ');
        out.push_str(&comment(rng));
        last = at;
    }
    out.push_str(&code[last..]);
    out
}

fn t3_whitespace(code: &str, tokens: &[Token], rng: &mut ChaCha8Rng) -> String {
    const INDENTS: &[&str] = &["", " ", "  ", "    ", "\t", "        "];
    const GAPS: &[&str] = &[" ", "  ", "   ", "\t"];
    let mut out = String::with_capacity(code.len() * 2);
    let mut prev = 0;
    let mut changed = false;
    for t in tokens {
        let gap = &code[prev..t.start];
        let new_gap: String = if let Some(nl) = gap.rfind('\n') {
            if rng.gen_bool(0.5) {
                format!("{}{}", &gap[..=nl], INDENTS.choose(rng).expect("nonempty"))
            } else {
                gap.to_string()
            }
        } else if prev == 0 {
            gap.to_string()
        } else if gap.is_empty() {
            if rng.gen_bool(0.3) { " ".into() } else { String::new() }
        } else if rng.gen_bool(0.5) {
            GAPS.choose(rng).expect("nonempty").to_string()
        } else {
            gap.to_string()
        };
        changed |= new_gap != gap;
        out.push_str(&new_gap);
        out.push_str(&code[t.start..t.end]);
        prev = t.end;
    }
    out.push_str(&code[prev..]);
    if !changed {
        // Guarantee a visible change: widen the first in-line gap.
        if let Some(t) = tokens.iter().skip(1).find(|t| !code[..t.start].ends_with('\n')) {
            let at = out.len() - (code.len() - t.start);
            out.insert(at, ' ');
        } else {
            out.push(' ');
        }
    }
    out
}

fn t4_dead_function(tokens: &[Token], rng: &mut ChaCha8Rng) -> String {
    let mut taken = identifiers(tokens);
    let f = fresh(&mut taken, "aux", rng);
    let p = fresh(&mut taken, "arg", rng);
    let x = fresh(&mut taken, "acc", rng);
    let (k, m) = (rng.gen_range(2..9), rng.gen_range(1..50));
    format!("static int {f}(int {p})\n{{\n    int {x} = {p} * {k};\n    return {x} + {m};\n}}")
}

fn t5_blank_lines(code: &str, rng: &mut ChaCha8Rng) -> String {
    let slots: Vec<usize> = code
        .match_indices('\n')
        .filter(|(i, _)| !code[..*i].trim_end_matches('\r').ends_with('\\'))
        .map(|(i, _)| i + 1)
        .collect();
    if slots.is_empty() {
        return format!("{code}\n\n");
    }
    let k = rng.gen_range(1..=slots.len().min(3));
    let mut chosen: Vec<usize> = slots.choose_multiple(rng, k).copied().collect();
    chosen.sort_unstable();
    let mut out = String::with_capacity(code.len() + 3 * k);
    let mut last = 0;
    for at in chosen {
        out.push_str(&code[last..at]);
        out.push_str(&"\n".repeat(rng.gen_range(1..=2)));
        last = at;
    }
    out.push_str(&code[last..]);
    out
}

fn nt3_bounded_copy(tokens: &[Token], rng: &mut ChaCha8Rng, lexicon: &Lexicon) -> String {
    let mut taken = identifiers(tokens);
    let stem = lexicon.names.choose(rng).expect("nonempty").clone();
    let f = fresh(&mut taken, &format!("copy_{stem}"), rng);
    let src = fresh(&mut taken, "src", rng);
    let buf = fresh(&mut taken, &stem, rng);
    let n = [16, 32, 64, 128][rng.gen_range(0..4)];
    format!(
        "static void {f}(const char *{src})\n{{\n    char {buf}[{n}];\n    strncpy({buf}, {src}, sizeof({buf}) - 1);\n    {buf}[sizeof({buf}) - 1] = '\\0';\n}}"
    )
}

fn decl_names(s: &Stmt, out: &mut Vec<String>) {
    match &s.kind {
        StmtKind::Decl(d) if !d.is_typedef => {
            out.extend(d.declarators.iter().filter(|x| x.params.is_none()).filter_map(|x| x.name.clone()))
        }
        StmtKind::Compound(b) => b.stmts.iter().for_each(|s| decl_names(s, out)),
        StmtKind::If { then, otherwise, .. } => {
            decl_names(then, out);
            if let Some(o) = otherwise {
                decl_names(o, out);
            }
        }
        StmtKind::For { init, body, .. } => {
            if let Some(i) = init {
                decl_names(i, out);
            }
            decl_names(body, out);
        }
        StmtKind::While { body, .. }
        | StmtKind::DoWhile { body, .. }
        | StmtKind::Switch { body, .. }
        | StmtKind::Labeled { body, .. }
        | StmtKind::MacroLoop { body, .. } => decl_names(body, out),
        _ => {}
    }
}

/// Names that also appear as members, tags, labels or inside directives, where
/// a token-level rename would not be consistent.
fn unsafe_names(tokens: &[Token]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Preproc {
            out.extend(t.text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).map(str::to_string));
            continue;
        }
        if t.kind != TokenKind::Ident {
            continue;
        }
        let prev = tokens[..i].iter().rev().find(|p| !p.is_trivia());
        let next = tokens[i + 1..].iter().find(|p| !p.is_trivia());
        let member = prev.is_some_and(|p| p.is_punct(".") || p.is_punct("->"));
        let tag = prev.is_some_and(|p| p.is_keyword("struct") || p.is_keyword("union") || p.is_keyword("enum") || p.is_keyword("goto"));
        let label = next.is_some_and(|n| n.is_punct(":")) && prev.is_none_or(|p| p.is_punct(";") || p.is_punct("{") || p.is_punct("}"));
        if member || tag || label {
            out.insert(t.text.clone());
        }
    }
    out
}

fn rename(code: &str, tokens: &[Token], params: bool, rng: &mut ChaCha8Rng, lexicon: &Lexicon) -> Result<Option<String>, AugmentError> {
    let tu = parse(code)?;
    let mut names = Vec::new();
    for item in &tu.items {
        match item {
            Item::Function(f) if params => names.extend(f.params.iter().cloned()),
            Item::Function(f) => {
                if f.name != "main" {
                    names.push(f.name.clone());
                }
                f.body.stmts.iter().for_each(|s| decl_names(s, &mut names));
            }
            Item::Statement(s) if !params => decl_names(s, &mut names),
            _ => {}
        }
    }
    let blocked = unsafe_names(tokens);
    let mut seen = BTreeSet::new();
    let candidates: Vec<String> = names.into_iter().filter(|n| !blocked.contains(n) && seen.insert(n.clone())).collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let k = rng.gen_range(1..=candidates.len().min(3));
    let chosen: Vec<String> = candidates.choose_multiple(rng, k).cloned().collect();
    let mut taken = identifiers(tokens);
    let mut pool: Vec<&String> = lexicon.names.iter().collect();
    pool.shuffle(rng);
    let mut pool = pool.into_iter();
    let map: Vec<(String, String)> = chosen
        .into_iter()
        .map(|old| {
            let new = loop {
                match pool.next() {
                    Some(n) if taken.insert(n.clone()) => break n.clone(),
                    Some(_) => continue,
                    None => break fresh(&mut taken, &lexicon.names[0], rng),
                }
            };
            (old, new)
        })
        .collect();
    let mut out = String::with_capacity(code.len() + 32);
    let mut last = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Ident {
            continue;
        }
        let prev = tokens[..i].iter().rev().find(|p| !p.is_trivia());
        if prev.is_some_and(|p| p.is_punct(".") || p.is_punct("->")) {
            continue;
        }
        if let Some((_, new)) = map.iter().find(|(old, _)| *old == t.text) {
            out.push_str(&code[last..t.start]);
            out.push_str(new);
            last = t.end;
        }
    }
    out.push_str(&code[last..]);
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::lexer::significant_texts;
    use crate::dataflow::unreachable_spans;

    const CODE: &str = "int find(struct list *l, int key)\n{\n    struct node *n = l->head;\n    while (n) {\n        if (n->key == key)\n            return n->val;\n        n = n->next;\n    }\n    return -1;\n}\n";

    fn sig(code: &str) -> Vec<String> {
        significant_texts(&tokenize(code).unwrap()).into_iter().map(str::to_string).collect()
    }

    fn is_subsequence(small: &[String], big: &[String]) -> bool {
        let mut it = big.iter();
        small.iter().all(|s| it.any(|b| b == s))
    }

    #[test]
    fn trivial_transforms_keep_original_tokens() {
        let lex = Lexicon::builtin();
        for t in Transform::ALL.into_iter().filter(|t| t.is_trivial() || matches!(t, Transform::NT3 | Transform::NT4)) {
            for seed in 0..20 {
                let out = augment(CODE, t, seed, "CVE-2024-0001", &lex).unwrap();
                assert!(!out.noop, "{t}");
                assert_ne!(out.code, CODE, "{t} seed {seed}");
                assert!(is_subsequence(&sig(CODE), &sig(&out.code)), "{t} seed {seed}:\n{}", out.code);
                parse(&out.code).unwrap_or_else(|e| panic!("{t} seed {seed} broke parsing: {e}\n{}", out.code));
            }
        }
    }

    #[test]
    fn t3_only_moves_whitespace() {
        for seed in 0..20 {
            let out = augment(CODE, Transform::T3, seed, "", &Lexicon::builtin()).unwrap();
            assert_eq!(sig(&out.code), sig(CODE));
        }
    }

    #[test]
    fn t1_block_is_unreachable() {
        for seed in 0..20 {
            let out = augment(CODE, Transform::T1, seed, "k", &Lexicon::builtin()).unwrap();
            let spans = unreachable_spans(&out.code).unwrap();
            assert_eq!(spans.len(), 1, "{}", out.code);
            assert!(out.code[spans[0].start..spans[0].end].contains("unreach_"));
        }
        let none = augment("void f(int a) { a++; }", Transform::T1, 1, "", &Lexicon::builtin()).unwrap();
        assert!(none.noop);
    }

    #[test]
    fn renames_are_consistent_bijections() {
        let lex = Lexicon::builtin();
        for t in [Transform::NT1, Transform::NT2] {
            for seed in 0..20 {
                let out = augment(CODE, t, seed, "x", &lex).unwrap();
                assert!(!out.noop);
                let (a, b) = (sig(CODE), sig(&out.code));
                assert_eq!(a.len(), b.len());
                let mut fwd = std::collections::BTreeMap::new();
                let mut back = std::collections::BTreeMap::new();
                for (x, y) in a.iter().zip(&b) {
                    if x != y {
                        assert_eq!(fwd.entry(x.clone()).or_insert(y.clone()), y);
                        assert_eq!(back.entry(y.clone()).or_insert(x.clone()), x);
                    }
                }
                assert!(!fwd.is_empty());
                // Member accesses keep their field names.
                assert!(out.code.contains("->key") && out.code.contains("->next"));
            }
        }
    }

    #[test]
    fn nothing_to_rename_is_flagged() {
        let out = augment("x = y;", Transform::NT2, 3, "", &Lexicon::builtin()).unwrap();
        assert!(out.noop);
        assert_eq!(out.code, "x = y;");
    }

    #[test]
    fn deterministic_under_seed() {
        let lex = Lexicon::builtin();
        for t in Transform::ALL {
            let a = augment(CODE, t, 42, "CVE-2025-21671", &lex).unwrap();
            assert_eq!(a, augment(CODE, t, 42, "CVE-2025-21671", &lex).unwrap());
        }
    }

    #[test]
    fn lexicon_validation() {
        assert!(Lexicon::parse("[names]\nfoo\n[comments]\n// x\n").is_ok());
        assert!(Lexicon::parse("[names]\n9foo\n[comments]\n// x\n").is_err());
        assert!(Lexicon::parse("[names]\nfoo\n[comments]\nnot a comment\n").is_err());
        assert!(Lexicon::parse("[names]\nfoo\n").is_err());
    }
}
