//! The miniature dataflow script language: tokenizer, parser, logical plan,
//! and schema inference.
//!
//! A script is a sequence of `alias = OP ...;` statements ending in at least
//! one `STORE alias INTO 'path';`. Parsing produces a [`LogicalPlan`] DAG;
//! [`infer_schemas`] annotates every node with its output schema.

mod infer;
mod lexer;
mod parser;

use std::fmt::Write as _;

use thiserror::Error;

use crate::data_model::Schema;

pub use infer::{infer_schemas, TypeError};
pub use lexer::{tokenize_script, Keyword, Spanned, Token};
pub use parser::{parse_script, parse_script_text, parse_script_with_env};

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("lex error at {line}:{col}: {message}")]
    Lex { line: u32, col: u32, message: String },
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: u32, col: u32, message: String },
    #[error("plan error: {message}")]
    Plan { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Count,
    Sum,
    Min,
    Max,
    Avg,
    Tokenize,
    Flatten,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Count => "COUNT",
            Builtin::Sum => "SUM",
            Builtin::Min => "MIN",
            Builtin::Max => "MAX",
            Builtin::Avg => "AVG",
            Builtin::Tokenize => "TOKENIZE",
            Builtin::Flatten => "FLATTEN",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        match name.to_ascii_uppercase().as_str() {
            "COUNT" => Some(Builtin::Count),
            "SUM" => Some(Builtin::Sum),
            "MIN" => Some(Builtin::Min),
            "MAX" => Some(Builtin::Max),
            "AVG" => Some(Builtin::Avg),
            "TOKENIZE" => Some(Builtin::Tokenize),
            "FLATTEN" => Some(Builtin::Flatten),
            _ => None,
        }
    }

    /// Aggregates fold a bag into one value; TOKENIZE/FLATTEN do not.
    pub fn is_aggregate(self) -> bool {
        matches!(
            self,
            Builtin::Count | Builtin::Sum | Builtin::Min | Builtin::Max | Builtin::Avg
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    FieldRef(String),
    ConstInt(i64),
    ConstFloat(f64),
    ConstText(String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

impl Expr {
    pub fn render(&self) -> String {
        match self {
            Expr::FieldRef(name) => name.clone(),
            Expr::ConstInt(i) => i.to_string(),
            Expr::ConstFloat(x) => format!("{x:?}"),
            Expr::ConstText(s) => format!("'{s}'"),
            Expr::Binary(op, l, r) => format!("({} {} {})", l.render(), op.symbol(), r.render()),
            Expr::Call(b, args) => {
                let inner: Vec<String> = args.iter().map(|a| a.render()).collect();
                format!("{}({})", b.name(), inner.join(", "))
            }
        }
    }
}

/// One GENERATE item: an expression and its optional `AS` name.
#[derive(Debug, Clone, PartialEq)]
pub struct GenItem {
    pub expr: Expr,
    pub rename: Option<String>,
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOp {
    Load {
        path: String,
        schema: Schema,
    },
    Filter {
        input: NodeId,
        predicate: Expr,
    },
    Foreach {
        input: NodeId,
        gens: Vec<GenItem>,
    },
    Group {
        input: NodeId,
        keys: Vec<String>,
    },
    Join {
        left: NodeId,
        left_keys: Vec<String>,
        right: NodeId,
        right_keys: Vec<String>,
    },
    Order {
        input: NodeId,
        keys: Vec<String>,
        descending: bool,
    },
    Store {
        input: NodeId,
        path: String,
    },
}

impl PlanOp {
    pub fn inputs(&self) -> Vec<NodeId> {
        match self {
            PlanOp::Load { .. } => vec![],
            PlanOp::Filter { input, .. }
            | PlanOp::Foreach { input, .. }
            | PlanOp::Group { input, .. }
            | PlanOp::Order { input, .. }
            | PlanOp::Store { input, .. } => vec![*input],
            PlanOp::Join { left, right, .. } => vec![*left, *right],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub id: NodeId,
    /// Alias the statement bound; `None` for STORE statements.
    pub alias: Option<String>,
    pub op: PlanOp,
    /// Output schema, filled in by [`infer_schemas`].
    pub schema: Option<Schema>,
}

/// A parsed script: nodes in statement order, each referencing earlier nodes
/// by id. Statement order is already a topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalPlan {
    pub nodes: Vec<PlanNode>,
}

impl LogicalPlan {
    pub fn node(&self, id: NodeId) -> &PlanNode {
        &self.nodes[id]
    }

    pub fn stores(&self) -> impl Iterator<Item = &PlanNode> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, PlanOp::Store { .. }))
    }

    pub fn alias_of(&self, id: NodeId) -> &str {
        self.nodes[id].alias.as_deref().unwrap_or("?")
    }

    /// Output schema of a node; panics if inference has not run.
    pub fn schema_of(&self, id: NodeId) -> &Schema {
        self.nodes[id]
            .schema
            .as_ref()
            .expect("schema inference has not run")
    }

    /// Structural equality, ignoring inferred schema annotations.
    pub fn structurally_equal(&self, other: &LogicalPlan) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.alias == b.alias && a.op == b.op)
    }
}

/// Pretty-print a plan back to script text. `parse_script` on the result
/// yields a structurally equal plan.
pub fn render_script(plan: &LogicalPlan) -> String {
    let mut out = String::new();
    for node in &plan.nodes {
        match &node.op {
            PlanOp::Load { path, schema } => {
                let _ = writeln!(
                    out,
                    "{} = LOAD '{}' AS ({});",
                    node.alias.as_deref().unwrap_or("?"),
                    path,
                    schema
                );
            }
            PlanOp::Filter { input, predicate } => {
                let _ = writeln!(
                    out,
                    "{} = FILTER {} BY {};",
                    node.alias.as_deref().unwrap_or("?"),
                    plan.alias_of(*input),
                    predicate.render()
                );
            }
            PlanOp::Foreach { input, gens } => {
                let items: Vec<String> = gens
                    .iter()
                    .map(|g| match &g.rename {
                        Some(name) => format!("{} AS {}", g.expr.render(), name),
                        None => g.expr.render(),
                    })
                    .collect();
                let _ = writeln!(
                    out,
                    "{} = FOREACH {} GENERATE {};",
                    node.alias.as_deref().unwrap_or("?"),
                    plan.alias_of(*input),
                    items.join(", ")
                );
            }
            PlanOp::Group { input, keys } => {
                let _ = writeln!(
                    out,
                    "{} = GROUP {} BY {};",
                    node.alias.as_deref().unwrap_or("?"),
                    plan.alias_of(*input),
                    keys.join(", ")
                );
            }
            PlanOp::Join {
                left,
                left_keys,
                right,
                right_keys,
            } => {
                let _ = writeln!(
                    out,
                    "{} = JOIN {} BY {}, {} BY {};",
                    node.alias.as_deref().unwrap_or("?"),
                    plan.alias_of(*left),
                    left_keys.join(", "),
                    plan.alias_of(*right),
                    right_keys.join(", ")
                );
            }
            PlanOp::Order {
                input,
                keys,
                descending,
            } => {
                let _ = writeln!(
                    out,
                    "{} = ORDER {} BY {}{};",
                    node.alias.as_deref().unwrap_or("?"),
                    plan.alias_of(*input),
                    keys.join(", "),
                    if *descending { " DESC" } else { "" }
                );
            }
            PlanOp::Store { input, path } => {
                let _ = writeln!(out, "STORE {} INTO '{}';", plan.alias_of(*input), path);
            }
        }
    }
    out
}
