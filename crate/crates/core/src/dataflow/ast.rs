//! Syntax tree for the supported C subset. Only what the def-use walk and the
//! structure-aware augmentations need is kept; types are parsed and dropped.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TranslationUnit {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone)]
pub enum Item {
    Function(FunctionDef),
    Declaration(Declaration),
    Statement(Stmt),
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Includes both braces.
    pub span: Span,
}

#[derive(Debug, Clone, Default)]
pub struct Declaration {
    pub is_typedef: bool,
    pub declarators: Vec<Declarator>,
    pub span: Span,
}

#[derive(Debug, Clone, Default)]
pub struct Declarator {
    pub name: Option<String>,
    /// Names of the parameters when this declares a function.
    pub params: Option<Vec<String>>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum Label {
    Named(String),
    Case(Expr),
    Default,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    Compound(Block),
    Expr(Expr),
    Decl(Declaration),
    If { cond: Expr, then: Box<Stmt>, otherwise: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, step: Option<Expr>, body: Box<Stmt> },
    Switch { cond: Expr, body: Box<Stmt> },
    Labeled { label: Label, body: Box<Stmt> },
    Return(Option<Expr>),
    Break,
    Continue,
    Goto(String),
    Empty,
    /// Iterator macro such as `list_for_each_entry(pos, head, node) { ... }`.
    MacroLoop { head: Expr, body: Box<Stmt> },
}

impl StmtKind {
    /// Unconditional transfer of control out of the enclosing block.
    pub fn is_jump(&self) -> bool {
        matches!(self, StmtKind::Return(_) | StmtKind::Break | StmtKind::Continue | StmtKind::Goto(_))
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Ident(String),
    Literal,
    /// A type used as a macro argument, e.g. `container_of(p, struct s, f)`.
    TypeArg,
    Call { callee: Box<Expr>, args: Vec<Expr> },
    Member { base: Box<Expr>, field: String },
    Index { base: Box<Expr>, index: Box<Expr> },
    Unary { op: String, operand: Box<Expr> },
    Postfix { op: String, operand: Box<Expr> },
    Sizeof,
    Cast(Box<Expr>),
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Assign { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Comma(Box<Expr>, Box<Expr>),
    InitList(Vec<Expr>),
}
