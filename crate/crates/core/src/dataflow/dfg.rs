//! Flow-insensitive, intra-procedural def-use edges.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::parser::{parse, LITERAL_IDENTS};
use super::DfgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Variable,
    Function,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "DfgDocument", try_from = "DfgDocument")]
pub struct DataFlowGraph {
    /// In order of first occurrence in the code.
    pub entities: Vec<Entity>,
    pub edges: Vec<Edge>,
}

/// Exchange document for graphs produced by external extractors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfgDocument {
    pub entities: Vec<Entity>,
    pub edges: Vec<Edge>,
    pub schema: u32,
}

impl From<DataFlowGraph> for DfgDocument {
    fn from(g: DataFlowGraph) -> Self {
        g.to_document()
    }
}

impl TryFrom<DfgDocument> for DataFlowGraph {
    type Error = DfgError;

    fn try_from(doc: DfgDocument) -> Result<Self, DfgError> {
        DataFlowGraph::from_document(doc)
    }
}

impl DataFlowGraph {
    pub fn entities_of(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.name == name)
    }

    /// All (source, target) pairs in edge order.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .flat_map(|e| e.targets.iter().map(move |t| (e.source.as_str(), t.as_str())))
            .collect()
    }

    /// `source => [a, b]` lines used in the description prompts.
    pub fn render_flow(&self) -> String {
        self.edges
            .iter()
            .map(|e| format!("{} => [{}]", e.source, e.targets.join(", ")))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_document(&self) -> DfgDocument {
        DfgDocument { entities: self.entities.clone(), edges: self.edges.clone(), schema: 1 }
    }

    pub fn from_document(doc: DfgDocument) -> Result<Self, DfgError> {
        if doc.schema != 1 {
            return Err(DfgError::Schema(format!("unsupported schema {}", doc.schema)));
        }
        let mut names = HashSet::new();
        for e in &doc.entities {
            if e.name.trim().is_empty() {
                return Err(DfgError::Schema("entity with empty name".into()));
            }
            if !names.insert(e.name.as_str()) {
                return Err(DfgError::Schema(format!("duplicate entity `{}`", e.name)));
            }
        }
        let mut seen_pairs = HashSet::new();
        let mut seen_sources = HashSet::new();
        for edge in &doc.edges {
            if !names.contains(edge.source.as_str()) {
                return Err(DfgError::UnknownEntity(edge.source.clone()));
            }
            if !seen_sources.insert(edge.source.as_str()) {
                return Err(DfgError::Schema(format!("source `{}` listed twice", edge.source)));
            }
            for t in &edge.targets {
                if !names.contains(t.as_str()) {
                    return Err(DfgError::UnknownEntity(t.clone()));
                }
                if !seen_pairs.insert((edge.source.as_str(), t.as_str())) {
                    return Err(DfgError::Schema(format!("duplicate edge {} -> {t}", edge.source)));
                }
            }
        }
        Ok(DataFlowGraph { entities: doc.entities, edges: doc.edges })
    }

    pub fn from_json(text: &str) -> Result<Self, DfgError> {
        let doc: DfgDocument = serde_json::from_str(text).map_err(|e| DfgError::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("dfg document serializes")
    }
}

/// Extracts def-use edges from `code`.
pub fn extract_dfg(code: &str) -> Result<DataFlowGraph, DfgError> {
    if code.trim().is_empty() {
        return Err(DfgError::EmptyCode);
    }
    let tu = parse(code)?;
    let mut w = Walker::default();
    for item in &tu.items {
        match item {
            Item::Function(f) => {
                w.defined.insert(f.name.clone());
                for p in &f.params {
                    w.note(p, EntityKind::Variable);
                }
                w.block(&f.body);
            }
            Item::Declaration(d) => w.declaration(d),
            Item::Statement(s) => w.stmt(s),
        }
    }
    Ok(w.finish())
}

#[derive(Default)]
struct Walker {
    order: Vec<String>,
    kinds: HashMap<String, EntityKind>,
    defined: HashSet<String>,
    edges: Vec<(String, Vec<String>)>,
    edge_index: HashMap<String, usize>,
    pairs: HashSet<(String, String)>,
}

fn is_constant_like(name: &str) -> bool {
    name.len() > 1
        && name.chars().any(|c| c.is_ascii_uppercase())
        && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

impl Walker {
    fn note(&mut self, name: &str, kind: EntityKind) {
        match self.kinds.get_mut(name) {
            Some(k) => {
                if kind == EntityKind::Function {
                    *k = EntityKind::Function;
                }
            }
            None => {
                self.kinds.insert(name.to_string(), kind);
                self.order.push(name.to_string());
            }
        }
    }

    fn edge(&mut self, source: &str, target: &str) {
        if source == target || !self.pairs.insert((source.to_string(), target.to_string())) {
            return;
        }
        match self.edge_index.get(source) {
            Some(&i) => self.edges[i].1.push(target.to_string()),
            None => {
                self.edge_index.insert(source.to_string(), self.edges.len());
                self.edges.push((source.to_string(), vec![target.to_string()]));
            }
        }
    }

    fn finish(self) -> DataFlowGraph {
        // Function definitions only become entities when something calls them.
        let entities = self
            .order
            .iter()
            .filter(|n| !(self.defined.contains(*n) && self.kinds[*n] == EntityKind::Variable))
            .map(|n| Entity { name: n.clone(), kind: self.kinds[n] })
            .collect();
        let edges = self.edges.into_iter().map(|(source, targets)| Edge { source, targets }).collect();
        DataFlowGraph { entities, edges }
    }

    fn block(&mut self, b: &Block) {
        for s in &b.stmts {
            self.stmt(s);
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        if d.is_typedef {
            return;
        }
        for decl in &d.declarators {
            let Some(name) = &decl.name else { continue };
            if decl.params.is_some() {
                // Prototype.
                continue;
            }
            self.note(name, EntityKind::Variable);
            if let Some(init) = &decl.init {
                for s in self.sources(init) {
                    self.edge(&s, name);
                }
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Compound(b) => self.block(b),
            StmtKind::Expr(e) => {
                self.sources(e);
            }
            StmtKind::Decl(d) => self.declaration(d),
            StmtKind::If { cond, then, otherwise } => {
                self.sources(cond);
                self.stmt(then);
                if let Some(o) = otherwise {
                    self.stmt(o);
                }
            }
            StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond } | StmtKind::Switch { cond, body } => {
                self.sources(cond);
                self.stmt(body);
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.sources(c);
                }
                if let Some(st) = step {
                    self.sources(st);
                }
                self.stmt(body);
            }
            StmtKind::Labeled { label, body } => {
                if let Label::Case(e) = label {
                    self.sources(e);
                }
                self.stmt(body);
            }
            StmtKind::Return(Some(e)) => {
                self.sources(e);
            }
            StmtKind::MacroLoop { head, body } => {
                self.sources(head);
                self.stmt(body);
            }
            StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue | StmtKind::Goto(_) | StmtKind::Empty => {}
        }
    }

    /// Records edges produced inside `e` and returns the entities whose values
    /// flow out of it, in first-occurrence order.
    fn sources(&mut self, e: &Expr) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(e, &mut out);
        let mut seen = HashSet::new();
        out.retain(|n| seen.insert(n.clone()));
        out
    }

    fn collect(&mut self, e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Ident(n) => {
                if LITERAL_IDENTS.contains(&n.as_str()) || is_constant_like(n) {
                    return;
                }
                self.note(n, EntityKind::Variable);
                out.push(n.clone());
            }
            Expr::Literal | Expr::TypeArg | Expr::Sizeof => {}
            Expr::Call { callee, args } => {
                let name = self.callee_name(callee);
                let arg_sources: Vec<Vec<String>> = args.iter().map(|a| self.sources(a)).collect();
                match name {
                    Some(f) => {
                        self.note(&f, EntityKind::Function);
                        for s in arg_sources.iter().flatten() {
                            self.edge(s, &f);
                        }
                        out.push(f);
                    }
                    None => {
                        out.extend(self.sources(callee));
                    }
                }
            }
            Expr::Member { base, .. } => self.collect(base, out),
            Expr::Index { base, index } => {
                self.collect(base, out);
                self.collect(index, out);
            }
            Expr::Unary { op, operand } if op == "++" || op == "--" => {
                self.collect(operand, out);
            }
            Expr::Unary { operand, .. } | Expr::Postfix { operand, .. } | Expr::Cast(operand) => {
                self.collect(operand, out)
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.collect(lhs, out);
                self.collect(rhs, out);
            }
            Expr::Assign { lhs, rhs, .. } => {
                let srcs = self.sources(rhs);
                match self.lvalue_root(lhs) {
                    Some(target) => {
                        self.note(&target, EntityKind::Variable);
                        for s in &srcs {
                            self.edge(s, &target);
                        }
                        out.push(target);
                    }
                    None => {
                        self.sources(lhs);
                    }
                }
            }
            Expr::Ternary { cond, then, otherwise } => {
                self.collect(cond, out);
                self.collect(then, out);
                self.collect(otherwise, out);
            }
            Expr::Comma(a, b) => {
                self.sources(a);
                self.collect(b, out);
            }
            Expr::InitList(items) => {
                for i in items {
                    self.collect(i, out);
                }
            }
        }
    }

    fn callee_name(&mut self, callee: &Expr) -> Option<String> {
        match callee {
            Expr::Ident(n) => Some(n.clone()),
            Expr::Member { base, field } => {
                self.sources(base);
                Some(field.clone())
            }
            Expr::Unary { op, operand } if op == "*" => self.callee_name(operand),
            _ => None,
        }
    }

    /// Root identifier of an assignment target; walks index expressions
    /// for their own edges.
    fn lvalue_root(&mut self, e: &Expr) -> Option<String> {
        match e {
            Expr::Ident(n) if !LITERAL_IDENTS.contains(&n.as_str()) => Some(n.clone()),
            Expr::Member { base, .. } => self.lvalue_root(base),
            Expr::Index { base, index } => {
                self.sources(index);
                self.lvalue_root(base)
            }
            Expr::Unary { op, operand } if op == "*" || op == "&" => self.lvalue_root(operand),
            Expr::Cast(inner) => self.lvalue_root(inner),
            _ => None,
        }
    }
}

/// Byte spans of statements that follow an unconditional jump in the same
/// block with no intervening label.
pub fn unreachable_spans(code: &str) -> Result<Vec<Span>, DfgError> {
    let tu = parse(code)?;
    let mut out = Vec::new();
    for item in &tu.items {
        if let Item::Function(f) = item {
            block_unreachable(&f.body, &mut out);
        }
    }
    Ok(out)
}

fn block_unreachable(b: &Block, out: &mut Vec<Span>) {
    let mut dead = false;
    for s in &b.stmts {
        if matches!(s.kind, StmtKind::Labeled { .. }) {
            dead = false;
        }
        if dead {
            out.push(s.span);
        }
        stmt_unreachable(s, out);
        if s.kind.is_jump() {
            dead = true;
        }
    }
}

fn stmt_unreachable(s: &Stmt, out: &mut Vec<Span>) {
    match &s.kind {
        StmtKind::Compound(b) => block_unreachable(b, out),
        StmtKind::If { then, otherwise, .. } => {
            stmt_unreachable(then, out);
            if let Some(o) = otherwise {
                stmt_unreachable(o, out);
            }
        }
        StmtKind::While { body, .. }
        | StmtKind::DoWhile { body, .. }
        | StmtKind::For { body, .. }
        | StmtKind::Switch { body, .. }
        | StmtKind::Labeled { body, .. }
        | StmtKind::MacroLoop { body, .. } => stmt_unreachable(body, out),
        _ => {}
    }
}
