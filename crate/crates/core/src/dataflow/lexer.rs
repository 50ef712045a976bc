//! Tokenizer for the supported C subset.
//!
//! Comments and preprocessor lines are kept as tokens so source-level
//! transforms can reason about them; the parser filters them out.

use super::DfgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword,
    Number,
    Str,
    Char,
    Punct,
    LineComment,
    BlockComment,
    Preproc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, counted in characters.
    pub col: usize,
}

impl Token {
    pub fn is_trivia(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::LineComment | TokenKind::BlockComment | TokenKind::Preproc
        )
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == k
    }
}

pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Alignof", "_Atomic",
    "_Static_assert", "_Thread_local", "__inline", "__inline__", "__restrict", "__volatile__",
    "__attribute__", "__typeof__", "typeof", "asm", "__asm__",
];

const PUNCTS: &[&str] = &[
    ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "^=", "|=", "##", "{", "}", "[", "]", "(", ")", "<", ">", ";",
    ":", ",", ".", "?", "~", "!", "+", "-", "*", "/", "%", "&", "|", "^", "=", "#",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

/// Splits `src` into tokens. Whitespace is dropped; everything else is kept.
pub fn tokenize(src: &str) -> Result<Vec<Token>, DfgError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut tokens = Vec::new();
    // Whether only whitespace has been seen since the last newline.
    let mut line_start = true;

    while let Some(c) = cur.peek() {
        if c == '\n' {
            cur.bump();
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let kind = if c == '#' && line_start {
            // Directive runs to end of line, honouring backslash continuations.
            while let Some(ch) = cur.peek() {
                if ch == '\\' && matches!(cur.peek_at(1), Some('\n')) {
                    cur.bump();
                    cur.bump();
                    continue;
                }
                if ch == '\\' && cur.rest().starts_with("\\\r\n") {
                    cur.bump();
                    cur.bump();
                    cur.bump();
                    continue;
                }
                if ch == '\n' {
                    break;
                }
                // Comments inside a directive end it only for line comments.
                if cur.rest().starts_with("/*") {
                    skip_block_comment(&mut cur, line, col)?;
                    continue;
                }
                cur.bump();
            }
            TokenKind::Preproc
        } else if cur.rest().starts_with("//") {
            while let Some(ch) = cur.peek() {
                if ch == '\n' {
                    break;
                }
                cur.bump();
            }
            TokenKind::LineComment
        } else if cur.rest().starts_with("/*") {
            skip_block_comment(&mut cur, line, col)?;
            TokenKind::BlockComment
        } else if is_string_prefix(cur.rest()) {
            while cur.peek() != Some('"') {
                cur.bump();
            }
            lex_quoted(&mut cur, '"', line, col)?;
            TokenKind::Str
        } else if is_char_prefix(cur.rest()) {
            while cur.peek() != Some('\'') {
                cur.bump();
            }
            lex_quoted(&mut cur, '\'', line, col)?;
            TokenKind::Char
        } else if c == '"' {
            lex_quoted(&mut cur, '"', line, col)?;
            TokenKind::Str
        } else if c == '\'' {
            lex_quoted(&mut cur, '\'', line, col)?;
            TokenKind::Char
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            while let Some(ch) = cur.peek() {
                if ch.is_ascii_alphanumeric() || ch == '_' || ch == '$' {
                    cur.bump();
                } else {
                    break;
                }
            }
            if is_keyword(&src[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur);
            TokenKind::Number
        } else if let Some(p) = PUNCTS.iter().find(|p| cur.rest().starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            TokenKind::Punct
        } else {
            return Err(DfgError::Parse {
                line,
                col,
                message: format!("unexpected character {c:?}"),
            });
        };
        line_start = false;
        tokens.push(Token {
            kind,
            text: src[start..cur.pos].to_string(),
            start,
            end: cur.pos,
            line,
            col,
        });
    }
    Ok(tokens)
}

fn is_string_prefix(rest: &str) -> bool {
    ["L\"", "u8\"", "u\"", "U\""].iter().any(|p| rest.starts_with(p))
}

fn is_char_prefix(rest: &str) -> bool {
    ["L'", "u'", "U'"].iter().any(|p| rest.starts_with(p))
}

fn skip_block_comment(cur: &mut Cursor<'_>, line: usize, col: usize) -> Result<(), DfgError> {
    cur.bump();
    cur.bump();
    loop {
        if cur.rest().starts_with("*/") {
            cur.bump();
            cur.bump();
            return Ok(());
        }
        if cur.bump().is_none() {
            return Err(DfgError::Parse { line, col, message: "unterminated comment".into() });
        }
    }
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char, line: usize, col: usize) -> Result<(), DfgError> {
    cur.bump();
    loop {
        match cur.bump() {
            Some('\\') => {
                cur.bump();
            }
            Some(c) if c == quote => return Ok(()),
            Some('\n') | None => {
                return Err(DfgError::Parse {
                    line,
                    col,
                    message: "unterminated literal".into(),
                })
            }
            Some(_) => {}
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    let hex = cur.rest().starts_with("0x") || cur.rest().starts_with("0X");
    while let Some(ch) = cur.peek() {
        let exp = if hex { matches!(ch, 'p' | 'P') } else { matches!(ch, 'e' | 'E') };
        if exp && matches!(cur.peek_at(1), Some('+') | Some('-')) {
            cur.bump();
            cur.bump();
        } else if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' {
            cur.bump();
        } else {
            break;
        }
    }
}

/// The significant (non-comment, non-directive) token texts, in order.
pub fn significant_texts(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().filter(|t| !t.is_trivia()).map(|t| t.text.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn splits_operators_longest_first() {
        let toks = kinds("a->b >>= c++;");
        let texts: Vec<_> = toks.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, ["a", "->", "b", ">>=", "c", "++", ";"]);
    }

    #[test]
    fn keeps_comments_and_directives() {
        let toks = kinds("#define X(a) \\\n  (a)\nint x; // hi\n/* b */");
        assert_eq!(toks[0].0, TokenKind::Preproc);
        assert!(toks[0].1.contains("(a)"));
        assert_eq!(toks[1], (TokenKind::Keyword, "int".into()));
        assert_eq!(toks[4].0, TokenKind::LineComment);
        assert_eq!(toks[5].0, TokenKind::BlockComment);
    }

    #[test]
    fn hash_inside_line_is_punct() {
        let toks = kinds("a # b");
        assert_eq!(toks[1], (TokenKind::Punct, "#".into()));
    }

    #[test]
    fn literals() {
        let toks = kinds(r#"x = "a\"b" + 'c' + 0x1Fu + 1.5e-3 + L"w";"#);
        let ks: Vec<_> = toks.iter().map(|(k, _)| *k).collect();
        assert_eq!(
            ks,
            [
                TokenKind::Ident,
                TokenKind::Punct,
                TokenKind::Str,
                TokenKind::Punct,
                TokenKind::Char,
                TokenKind::Punct,
                TokenKind::Number,
                TokenKind::Punct,
                TokenKind::Number,
                TokenKind::Punct,
                TokenKind::Str,
                TokenKind::Punct,
            ]
        );
    }

    #[test]
    fn reports_position_of_bad_input() {
        let err = tokenize("int a;\n  \"open").unwrap_err();
        match err {
            DfgError::Parse { line, col, .. } => assert_eq!((line, col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(tokenize("a @ b").is_err());
    }
}
