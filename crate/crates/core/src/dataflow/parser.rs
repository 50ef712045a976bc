//! Recursive-descent parser for the C subset.
//!
//! Typedef names are tracked as they are declared. Names that are not known
//! types are still accepted as type names in unambiguous positions
//! (`foo bar;`, `foo *bar = ...;`), which covers most kernel-style snippets
//! without a preprocessor.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::DfgError;

const BUILTIN_TYPES: &[&str] = &[
    "size_t", "ssize_t", "ptrdiff_t", "intptr_t", "uintptr_t", "off_t", "loff_t", "pid_t", "bool",
    "u8", "u16", "u32", "u64", "s8", "s16", "s32", "s64", "__u8", "__u16", "__u32", "__u64",
    "__s8", "__s16", "__s32", "__s64", "__le16", "__le32", "__le64", "__be16", "__be32", "__be64",
    "gfp_t", "atomic_t", "atomic64_t", "refcount_t", "spinlock_t", "FILE", "wchar_t", "va_list",
    "M3Result", "IM3Module", "IM3Runtime", "IM3Environment",
];

/// Annotation identifiers that may appear among declaration specifiers.
const QUALIFIER_IDENTS: &[&str] = &[
    "__user", "__iomem", "__rcu", "__percpu", "__init", "__exit", "__force", "__must_check",
    "__maybe_unused", "__always_inline", "noinline", "__packed", "__aligned", "__cold", "__hot",
    "__weak", "__noreturn", "__read_mostly", "__initdata", "__kernel", "__private",
];

const SPECIFIER_KEYWORDS: &[&str] = &[
    "const", "volatile", "static", "extern", "register", "auto", "inline", "__inline",
    "__inline__", "restrict", "__restrict", "_Atomic", "_Thread_local", "__volatile__",
];

const BASIC_TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
];

/// Identifiers that denote constants rather than program entities.
pub const LITERAL_IDENTS: &[&str] = &["NULL", "true", "false", "nullptr"];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

/// Parses `src` as a sequence of top-level items.
pub fn parse(src: &str) -> Result<TranslationUnit, DfgError> {
    let tokens: Vec<Token> = tokenize(src)?.into_iter().filter(|t| !t.is_trivia()).collect();
    let mut parser = Parser { toks: tokens, pos: 0, typedefs: HashSet::new(), src_len: src.len() };
    parser.translation_unit()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    typedefs: HashSet<String>,
    src_len: usize,
}

type PResult<T> = Result<T, DfgError>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_n(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn bump(&mut self) -> PResult<Token> {
        let tok = self.peek().cloned().ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.at_punct(p) {
            self.bump()
        } else {
            Err(self.error(&format!("expected `{p}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => Ok(self.bump()?.text),
            _ => Err(self.error("expected identifier")),
        }
    }

    fn error(&self, message: &str) -> DfgError {
        match self.peek() {
            Some(t) => DfgError::Parse {
                line: t.line,
                col: t.col,
                message: format!("{message}, found `{}`", t.text),
            },
            None => {
                let (line, col) = self.toks.last().map(|t| (t.line, t.col + t.text.chars().count())).unwrap_or((1, 1));
                DfgError::Parse { line, col, message: format!("{message}, found end of input") }
            }
        }
    }

    fn start_offset(&self) -> usize {
        self.peek().map(|t| t.start).unwrap_or(self.src_len)
    }

    fn last_end(&self) -> usize {
        self.pos.checked_sub(1).and_then(|i| self.toks.get(i)).map(|t| t.end).unwrap_or(0)
    }

    /// Skips a balanced bracket group starting at the current opening token.
    fn skip_balanced(&mut self) -> PResult<()> {
        let open = self.bump()?;
        let close = match open.text.as_str() {
            "(" => ")",
            "[" => "]",
            "{" => "}",
            _ => return Err(self.error("expected bracket")),
        };
        let mut depth = 1usize;
        while depth > 0 {
            let t = self.bump().map_err(|_| DfgError::Parse {
                line: open.line,
                col: open.col,
                message: format!("unbalanced `{}`", open.text),
            })?;
            if t.is_punct(&open.text) {
                depth += 1;
            } else if t.is_punct(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn is_known_type(&self, name: &str) -> bool {
        self.typedefs.contains(name) || BUILTIN_TYPES.contains(&name) || (name.ends_with("_t") && name.len() > 2)
    }

    fn tok_starts_specifier(&self, t: &Token) -> bool {
        match t.kind {
            TokenKind::Keyword => {
                SPECIFIER_KEYWORDS.contains(&t.text.as_str())
                    || BASIC_TYPE_KEYWORDS.contains(&t.text.as_str())
                    || matches!(
                        t.text.as_str(),
                        "struct" | "union" | "enum" | "typedef" | "__attribute__" | "typeof" | "__typeof__"
                    )
            }
            TokenKind::Ident => QUALIFIER_IDENTS.contains(&t.text.as_str()),
            _ => false,
        }
    }

    /// Decides whether the tokens at the cursor begin a declaration.
    fn looks_like_declaration(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        if self.tok_starts_specifier(t) {
            return true;
        }
        if t.kind != TokenKind::Ident {
            return false;
        }
        let next = self.peek_n(1);
        if next.is_some_and(|n| n.kind == TokenKind::Ident) {
            return true;
        }
        if next.is_some_and(|n| n.is_punct("*")) {
            if self.is_known_type(&t.text) {
                return true;
            }
            let mut i = 1;
            while self.peek_n(i).is_some_and(|n| n.is_punct("*")) {
                i += 1;
            }
            let is_name = self.peek_n(i).is_some_and(|n| n.kind == TokenKind::Ident);
            let after = self.peek_n(i + 1);
            return is_name && after.is_some_and(|a| [";", "=", ",", "[", ")"].iter().any(|p| a.is_punct(p)));
        }
        false
    }

    /// Decides whether a parenthesised type name starts at the cursor (after `(`).
    fn looks_like_type_name(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        match t.kind {
            TokenKind::Keyword => {
                BASIC_TYPE_KEYWORDS.contains(&t.text.as_str())
                    || matches!(
                        t.text.as_str(),
                        "struct" | "union" | "enum" | "const" | "volatile" | "typeof" | "__typeof__"
                    )
            }
            TokenKind::Ident => {
                if self.is_known_type(&t.text) {
                    return true;
                }
                // `(foo *)` and `(foo **)` casts.
                let mut i = 1;
                let mut stars = 0;
                while self.peek_n(i).is_some_and(|n| n.is_punct("*")) {
                    i += 1;
                    stars += 1;
                }
                stars > 0 && self.peek_n(i).is_some_and(|n| n.is_punct(")"))
            }
            _ => false,
        }
    }

    fn translation_unit(&mut self) -> PResult<TranslationUnit> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            if self.eat_punct(";") {
                continue;
            }
            if self.looks_like_declaration() {
                items.push(self.external_declaration()?);
            } else {
                items.push(Item::Statement(self.statement()?));
            }
        }
        Ok(TranslationUnit { items })
    }

    fn external_declaration(&mut self) -> PResult<Item> {
        let start = self.start_offset();
        let is_typedef = self.declaration_specifiers()?;
        if self.eat_punct(";") {
            return Ok(Item::Declaration(Declaration {
                is_typedef,
                declarators: vec![],
                span: Span { start, end: self.last_end() },
            }));
        }
        let first = self.declarator()?;
        if let Some(params) = first.params.clone() {
            if self.at_punct("{") && !is_typedef {
                let body = self.block()?;
                return Ok(Item::Function(FunctionDef {
                    name: first.name.clone().unwrap_or_default(),
                    params,
                    body,
                    span: Span { start, end: self.last_end() },
                }));
            }
        }
        let decl = self.finish_declaration(start, is_typedef, first)?;
        Ok(Item::Declaration(decl))
    }

    fn declaration(&mut self) -> PResult<Declaration> {
        let start = self.start_offset();
        let is_typedef = self.declaration_specifiers()?;
        if self.eat_punct(";") {
            return Ok(Declaration { is_typedef, declarators: vec![], span: Span { start, end: self.last_end() } });
        }
        let first = self.declarator()?;
        self.finish_declaration(start, is_typedef, first)
    }

    fn finish_declaration(&mut self, start: usize, is_typedef: bool, first: Declarator) -> PResult<Declaration> {
        let mut declarators = vec![first];
        loop {
            if self.eat_punct("=") {
                let init = self.initializer()?;
                declarators.last_mut().expect("declarator").init = Some(init);
            }
            if self.eat_punct(",") {
                declarators.push(self.declarator()?);
                continue;
            }
            break;
        }
        self.expect_punct(";")?;
        if is_typedef {
            for d in &declarators {
                if let Some(n) = &d.name {
                    self.typedefs.insert(n.clone());
                }
            }
        }
        Ok(Declaration { is_typedef, declarators, span: Span { start, end: self.last_end() } })
    }

    /// Consumes declaration specifiers; returns whether `typedef` was present.
    fn declaration_specifiers(&mut self) -> PResult<bool> {
        let mut is_typedef = false;
        let mut has_type = false;
        loop {
            let Some(t) = self.peek().cloned() else { break };
            match t.kind {
                TokenKind::Keyword if t.text == "typedef" => {
                    is_typedef = true;
                    self.pos += 1;
                }
                TokenKind::Keyword if SPECIFIER_KEYWORDS.contains(&t.text.as_str()) => self.pos += 1,
                TokenKind::Keyword if BASIC_TYPE_KEYWORDS.contains(&t.text.as_str()) => {
                    has_type = true;
                    self.pos += 1;
                }
                TokenKind::Keyword if t.text == "__attribute__" => {
                    self.pos += 1;
                    if self.at_punct("(") {
                        self.skip_balanced()?;
                    }
                }
                TokenKind::Keyword if t.text == "typeof" || t.text == "__typeof__" => {
                    self.pos += 1;
                    if self.at_punct("(") {
                        self.skip_balanced()?;
                    }
                    has_type = true;
                }
                TokenKind::Keyword if matches!(t.text.as_str(), "struct" | "union" | "enum") => {
                    self.pos += 1;
                    while self.at_keyword("__attribute__") {
                        self.pos += 1;
                        if self.at_punct("(") {
                            self.skip_balanced()?;
                        }
                    }
                    if self.peek().is_some_and(|n| n.kind == TokenKind::Ident) {
                        self.pos += 1;
                    }
                    if self.at_punct("{") {
                        self.skip_balanced()?;
                    }
                    has_type = true;
                }
                TokenKind::Ident if QUALIFIER_IDENTS.contains(&t.text.as_str()) => {
                    self.pos += 1;
                    if self.at_punct("(") {
                        self.skip_balanced()?;
                    }
                }
                TokenKind::Ident if !has_type => {
                    let next_is_declarator = self
                        .peek_n(1)
                        .is_some_and(|n| n.kind == TokenKind::Ident || n.is_punct("*") || n.is_punct("("));
                    if self.is_known_type(&t.text) || next_is_declarator {
                        has_type = true;
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        if !has_type && !is_typedef && self.pos > 0 {
            // Implicit int, e.g. `static x = 1;`; nothing to record.
        }
        Ok(is_typedef)
    }

    fn declarator(&mut self) -> PResult<Declarator> {
        loop {
            if self.eat_punct("*") {
                continue;
            }
            match self.peek() {
                Some(t) if t.kind == TokenKind::Keyword && SPECIFIER_KEYWORDS.contains(&t.text.as_str()) => self.pos += 1,
                Some(t) if t.kind == TokenKind::Ident && QUALIFIER_IDENTS.contains(&t.text.as_str()) => self.pos += 1,
                Some(t) if t.is_keyword("__attribute__") => {
                    self.pos += 1;
                    if self.at_punct("(") {
                        self.skip_balanced()?;
                    }
                }
                _ => break,
            }
        }
        let mut decl = Declarator::default();
        let mut nested = false;
        if self.peek().is_some_and(|t| t.kind == TokenKind::Ident) {
            decl.name = Some(self.bump()?.text);
        } else if self.at_punct("(") && !self.paren_starts_params() {
            self.pos += 1;
            let inner = self.declarator()?;
            self.expect_punct(")")?;
            decl.name = inner.name;
            nested = true;
        }
        let mut first_suffix = true;
        loop {
            if self.at_punct("[") {
                self.skip_balanced()?;
            } else if self.at_punct("(") {
                let params = self.parameter_list()?;
                if first_suffix && !nested && decl.name.is_some() {
                    decl.params = Some(params);
                }
            } else {
                break;
            }
            first_suffix = false;
        }
        loop {
            if self.at_keyword("__attribute__") || self.at_keyword("asm") || self.at_keyword("__asm__") {
                self.pos += 1;
                if self.at_punct("(") {
                    self.skip_balanced()?;
                }
            } else if self.peek().is_some_and(|t| t.kind == TokenKind::Ident && QUALIFIER_IDENTS.contains(&t.text.as_str())) {
                self.pos += 1;
                if self.at_punct("(") {
                    self.skip_balanced()?;
                }
            } else {
                break;
            }
        }
        if self.eat_punct(":") {
            // Bit-field width.
            self.conditional()?;
        }
        Ok(decl)
    }

    /// At `(`: does the group look like a parameter list rather than a nested declarator?
    fn paren_starts_params(&self) -> bool {
        match self.peek_n(1) {
            Some(t) if t.is_punct(")") => true,
            Some(t) if t.is_punct("*") || t.is_punct("(") => false,
            Some(t) if t.kind == TokenKind::Ident => self.is_known_type(&t.text) || self.peek_n(2).is_some_and(|n| n.kind == TokenKind::Ident || n.is_punct("*")),
            Some(_) => true,
            None => false,
        }
    }

    fn parameter_list(&mut self) -> PResult<Vec<String>> {
        self.expect_punct("(")?;
        let mut names = Vec::new();
        if self.eat_punct(")") {
            return Ok(names);
        }
        loop {
            if self.eat_punct("...") {
                self.expect_punct(")")?;
                break;
            }
            self.declaration_specifiers()?;
            let d = self.declarator()?;
            if let Some(n) = d.name {
                names.push(n);
            }
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(")")?;
            break;
        }
        Ok(names)
    }

    fn type_name(&mut self) -> PResult<()> {
        self.declaration_specifiers()?;
        self.declarator()?;
        Ok(())
    }

    fn initializer(&mut self) -> PResult<Expr> {
        if self.at_punct("{") {
            self.init_list()
        } else {
            self.assignment()
        }
    }

    fn init_list(&mut self) -> PResult<Expr> {
        self.expect_punct("{")?;
        let mut elems = Vec::new();
        while !self.at_punct("}") {
            // Designators: `.field =`, `[idx] =`.
            let mut designated = false;
            loop {
                if self.eat_punct(".") {
                    self.expect_ident()?;
                    designated = true;
                } else if self.at_punct("[") {
                    self.pos += 1;
                    let idx = self.conditional()?;
                    elems.push(idx);
                    self.expect_punct("]")?;
                    designated = true;
                } else {
                    break;
                }
            }
            if designated {
                self.expect_punct("=")?;
            }
            elems.push(self.initializer()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(Expr::InitList(elems))
    }

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                return Err(DfgError::Parse { line: open.line, col: open.col, message: "unclosed `{`".into() });
            }
            stmts.push(self.statement()?);
        }
        let close = self.bump()?;
        Ok(Block { stmts, span: Span { start: open.start, end: close.end } })
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let start = self.start_offset();
        let kind = self.statement_kind()?;
        Ok(Stmt { kind, span: Span { start, end: self.last_end() } })
    }

    fn statement_kind(&mut self) -> PResult<StmtKind> {
        let Some(t) = self.peek().cloned() else { return Err(self.error("expected statement")) };
        if t.is_punct("{") {
            return Ok(StmtKind::Compound(self.block()?));
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(StmtKind::Empty);
        }
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "if" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let then = Box::new(self.statement()?);
                    let otherwise = if self.at_keyword("else") {
                        self.pos += 1;
                        Some(Box::new(self.statement()?))
                    } else {
                        None
                    };
                    return Ok(StmtKind::If { cond, then, otherwise });
                }
                "while" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let body = Box::new(self.statement()?);
                    return Ok(StmtKind::While { cond, body });
                }
                "do" => {
                    self.pos += 1;
                    let body = Box::new(self.statement()?);
                    if !self.at_keyword("while") {
                        return Err(self.error("expected `while`"));
                    }
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::DoWhile { body, cond });
                }
                "for" => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let init = if self.eat_punct(";") {
                        None
                    } else if self.looks_like_declaration() {
                        let s = self.start_offset();
                        let d = self.declaration()?;
                        Some(Box::new(Stmt { kind: StmtKind::Decl(d), span: Span { start: s, end: self.last_end() } }))
                    } else {
                        let s = self.start_offset();
                        let e = self.expression()?;
                        self.expect_punct(";")?;
                        Some(Box::new(Stmt { kind: StmtKind::Expr(e), span: Span { start: s, end: self.last_end() } }))
                    };
                    let cond = if self.at_punct(";") { None } else { Some(self.expression()?) };
                    self.expect_punct(";")?;
                    let step = if self.at_punct(")") { None } else { Some(self.expression()?) };
                    self.expect_punct(")")?;
                    let body = Box::new(self.statement()?);
                    return Ok(StmtKind::For { init, cond, step, body });
                }
                "switch" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let body = Box::new(self.statement()?);
                    return Ok(StmtKind::Switch { cond, body });
                }
                "case" => {
                    self.pos += 1;
                    let value = self.conditional()?;
                    if self.eat_punct("...") {
                        self.conditional()?;
                    }
                    self.expect_punct(":")?;
                    return Ok(StmtKind::Labeled { label: Label::Case(value), body: Box::new(self.labeled_body()?) });
                }
                "default" => {
                    self.pos += 1;
                    self.expect_punct(":")?;
                    return Ok(StmtKind::Labeled { label: Label::Default, body: Box::new(self.labeled_body()?) });
                }
                "return" => {
                    self.pos += 1;
                    let value = if self.at_punct(";") { None } else { Some(self.expression()?) };
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Return(value));
                }
                "break" => {
                    self.pos += 1;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Break);
                }
                "continue" => {
                    self.pos += 1;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Continue);
                }
                "goto" => {
                    self.pos += 1;
                    let label = self.expect_ident()?;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Goto(label));
                }
                "asm" | "__asm__" => {
                    self.pos += 1;
                    while self.at_keyword("volatile") || self.at_keyword("__volatile__") {
                        self.pos += 1;
                    }
                    self.skip_balanced()?;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Empty);
                }
                _ => {}
            }
        }
        if t.kind == TokenKind::Ident && self.peek_n(1).is_some_and(|n| n.is_punct(":")) {
            self.pos += 2;
            return Ok(StmtKind::Labeled { label: Label::Named(t.text), body: Box::new(self.labeled_body()?) });
        }
        if self.looks_like_declaration() {
            return Ok(StmtKind::Decl(self.declaration()?));
        }
        let expr = self.expression()?;
        if self.eat_punct(";") {
            return Ok(StmtKind::Expr(expr));
        }
        if matches!(expr, Expr::Call { .. }) && self.peek().is_some() && !self.at_punct("}") {
            let body = Box::new(self.statement()?);
            return Ok(StmtKind::MacroLoop { head: expr, body });
        }
        Err(self.error("expected `;`"))
    }

    /// A label may directly precede the closing brace (`out: }` in old code).
    fn labeled_body(&mut self) -> PResult<Stmt> {
        if self.at_punct("}") {
            let s = self.start_offset();
            return Ok(Stmt { kind: StmtKind::Empty, span: Span { start: s, end: s } });
        }
        self.statement()
    }

    fn paren_expr(&mut self) -> PResult<Expr> {
        self.expect_punct("(")?;
        let e = self.expression()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn expression(&mut self) -> PResult<Expr> {
        let mut lhs = self.assignment()?;
        while self.eat_punct(",") {
            let rhs = self.assignment()?;
            lhs = Expr::Comma(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.conditional()?;
        if let Some(op) = self.peek().filter(|t| t.kind == TokenKind::Punct && ASSIGN_OPS.contains(&t.text.as_str())).map(|t| t.text.clone()) {
            self.pos += 1;
            let rhs = self.assignment()?;
            return Ok(Expr::Assign { op, lhs: Box::new(lhs), rhs: Box::new(rhs) });
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            // GNU `a ?: b`.
            let then = if self.at_punct(":") { cond.clone() } else { self.expression()? };
            self.expect_punct(":")?;
            let otherwise = self.conditional()?;
            return Ok(Expr::Ternary { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let Some((op, prec)) = self.peek().filter(|t| t.kind == TokenKind::Punct).and_then(|t| binary_prec(&t.text).map(|p| (t.text.clone(), p))) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let Some(t) = self.peek().cloned() else { return Err(self.error("expected expression")) };
        if t.kind == TokenKind::Punct && ["++", "--", "&", "*", "+", "-", "~", "!", "&&"].contains(&t.text.as_str()) {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(Expr::Unary { op: t.text, operand: Box::new(operand) });
        }
        if t.is_keyword("sizeof") || t.is_keyword("_Alignof") {
            self.pos += 1;
            if self.at_punct("(") {
                let save = self.pos;
                self.pos += 1;
                if self.looks_like_type_name() {
                    self.type_name()?;
                    self.expect_punct(")")?;
                    return Ok(Expr::Sizeof);
                }
                self.pos = save;
            }
            self.unary()?;
            return Ok(Expr::Sizeof);
        }
        if t.is_punct("(") {
            let save = self.pos;
            self.pos += 1;
            if self.looks_like_type_name() {
                self.type_name()?;
                self.expect_punct(")")?;
                if self.at_punct("{") {
                    let list = self.init_list()?;
                    return self.postfix(list);
                }
                let inner = self.unary()?;
                return Ok(Expr::Cast(Box::new(inner)));
            }
            self.pos = save;
        }
        let primary = self.primary()?;
        self.postfix(primary)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.bump().map_err(|_| self.error("expected expression"))?;
        match t.kind {
            TokenKind::Ident => Ok(Expr::Ident(t.text)),
            TokenKind::Number | TokenKind::Char => Ok(Expr::Literal),
            TokenKind::Str => {
                while self.peek().is_some_and(|n| n.kind == TokenKind::Str || (n.kind == TokenKind::Ident && n.text.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_') && self.peek_n(1).is_some_and(|m| m.kind == TokenKind::Str))) {
                    self.pos += 1;
                }
                Ok(Expr::Literal)
            }
            TokenKind::Punct if t.text == "(" => {
                let e = self.expression()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => {
                self.pos -= 1;
                Err(self.error("expected expression"))
            }
        }
    }

    fn postfix(&mut self, mut expr: Expr) -> PResult<Expr> {
        loop {
            if self.eat_punct("[") {
                let index = self.expression()?;
                self.expect_punct("]")?;
                expr = Expr::Index { base: Box::new(expr), index: Box::new(index) };
            } else if self.at_punct("(") {
                self.pos += 1;
                let mut args = Vec::new();
                if !self.at_punct(")") {
                    loop {
                        args.push(self.argument()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                expr = Expr::Call { callee: Box::new(expr), args };
            } else if self.at_punct(".") || self.at_punct("->") {
                self.pos += 1;
                let field = self.expect_ident()?;
                expr = Expr::Member { base: Box::new(expr), field };
            } else if self.at_punct("++") || self.at_punct("--") {
                let op = self.bump()?.text;
                expr = Expr::Postfix { op, operand: Box::new(expr) };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn argument(&mut self) -> PResult<Expr> {
        let is_type = match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => {
                BASIC_TYPE_KEYWORDS.contains(&t.text.as_str()) || matches!(t.text.as_str(), "struct" | "union" | "enum" | "const" | "volatile")
            }
            Some(t) if t.kind == TokenKind::Ident && self.is_known_type(&t.text) => {
                self.peek_n(1).is_some_and(|n| n.is_punct(",") || n.is_punct(")") || n.is_punct("*"))
            }
            _ => false,
        };
        if is_type {
            self.type_name()?;
            return Ok(Expr::TypeArg);
        }
        if self.at_punct("{") {
            return self.init_list();
        }
        self.assignment()
    }
}

fn binary_prec(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_function_with_params() {
        let tu = parse("static int add(int a, const char *b) { return a + *b; }").unwrap();
        match &tu.items[0] {
            Item::Function(f) => {
                assert_eq!(f.name, "add");
                assert_eq!(f.params, ["a", "b"]);
                assert!(matches!(f.body.stmts[0].kind, StmtKind::Return(Some(_))));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bare_statements_are_items() {
        let tu = parse("a = b + c; g(r);").unwrap();
        assert_eq!(tu.items.len(), 2);
        assert!(tu.items.iter().all(|i| matches!(i, Item::Statement(_))));
    }

    #[test]
    fn typedef_names_become_types() {
        let tu = parse("typedef struct node node_t2; typedef int handle; void f(void) { handle h = 1; (handle)h; }").unwrap();
        let Item::Function(f) = &tu.items[2] else { panic!() };
        assert!(matches!(f.body.stmts[0].kind, StmtKind::Decl(_)));
        assert!(matches!(f.body.stmts[1].kind, StmtKind::Expr(Expr::Cast(_))));
    }

    #[test]
    fn kernel_style_constructs() {
        let src = r#"
struct zram;
static bool zram_meta_alloc(struct zram *zram, u64 disksize)
{
    size_t num_pages, index;
    struct foo __rcu *p = rcu_dereference(zram->foo);
    num_pages = disksize >> PAGE_SHIFT;
    list_for_each_entry(p, &zram->list, node) {
        kfree(p);
    }
    x = container_of(p, struct foo, node);
    for (index = 0; index < num_pages; index++)
        spin_lock_init(&zram->table[index].lock);
    switch (x) { case 1: break; default: goto out; }
out:
    return true;
}
"#;
        let tu = parse(src).unwrap();
        assert_eq!(tu.items.len(), 2);
    }

    #[test]
    fn function_pointer_is_not_a_definition() {
        let tu = parse("int (*handler)(int) = NULL;").unwrap();
        let Item::Declaration(d) = &tu.items[0] else { panic!() };
        assert_eq!(d.declarators[0].name.as_deref(), Some("handler"));
        assert!(d.declarators[0].params.is_none());
    }

    #[test]
    fn designated_initializers() {
        parse("struct ops o = { .open = my_open, .release = my_release, [2] = 0 };").unwrap();
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse("void f(void) {\n  x = ;\n}").unwrap_err();
        match err {
            DfgError::Parse { line, col, .. } => assert_eq!((line, col), (2, 7)),
            other => panic!("{other:?}"),
        }
        assert!(parse("void f(void) { a = 1;").is_err());
    }
}
