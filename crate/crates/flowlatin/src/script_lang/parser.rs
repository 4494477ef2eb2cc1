//! Recursive-descent parser building a [`LogicalPlan`] from tokens.

use std::collections::HashMap;

use crate::data_model::{parse_schema, Schema};

use super::lexer::{Keyword, Spanned, Token};
use super::{BinOp, Builtin, Expr, GenItem, LogicalPlan, NodeId, PlanNode, PlanOp, ScriptError};

struct Parser<'a> {
    tokens: &'a [Spanned],
    pos: usize,
    nodes: Vec<PlanNode>,
    aliases: HashMap<String, NodeId>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset).map(|s| &s.token)
    }

    fn next(&mut self) -> Option<&Spanned> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (u32, u32) {
        match self.tokens.get(self.pos) {
            Some(s) => (s.line, s.col),
            None => self
                .tokens
                .last()
                .map(|s| (s.line, s.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn err(&self, message: impl Into<String>) -> ScriptError {
        let (line, col) = self.here();
        ScriptError::Parse {
            line,
            col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &Token) -> Result<(), ScriptError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {want}, found {t}"))),
            None => Err(self.err(format!("expected {want}, found end of input"))),
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> Result<(), ScriptError> {
        self.expect(&Token::Kw(kw))
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ScriptError> {
        match self.peek() {
            Some(Token::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.err(format!("expected {what}, found {t}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn expect_str(&mut self, what: &str) -> Result<String, ScriptError> {
        match self.peek() {
            Some(Token::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.err(format!("expected {what}, found {t}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn resolve(&self, alias: &str) -> Result<NodeId, ScriptError> {
        self.aliases
            .get(alias)
            .copied()
            .ok_or_else(|| ScriptError::Plan {
                message: format!("undefined alias `{alias}`"),
            })
    }

    fn resolve_next_ident(&mut self) -> Result<NodeId, ScriptError> {
        let alias = self.expect_ident("relation alias")?;
        self.resolve(&alias)
    }

    /// Field list for GROUP/ORDER and each JOIN side. Inside a join, a
    /// trailing `, ident BY` belongs to the next join input, so stop there.
    fn field_list(&mut self, in_join: bool) -> Result<Vec<String>, ScriptError> {
        let mut fields = vec![self.expect_ident("field name")?];
        while self.peek() == Some(&Token::Comma) {
            if in_join {
                if let (Some(Token::Ident(_)), Some(Token::Kw(Keyword::By))) =
                    (self.peek_at(1), self.peek_at(2))
                {
                    break;
                }
            }
            self.pos += 1;
            fields.push(self.expect_ident("field name")?);
        }
        Ok(fields)
    }

    /// Schema clause between parens: consume raw tokens until `)` and feed
    /// the text to the schema parser.
    fn schema_clause(&mut self) -> Result<Schema, ScriptError> {
        let (line, col) = self.here();
        self.expect(&Token::LParen)?;
        let mut text = String::new();
        loop {
            match self.peek() {
                Some(Token::RParen) => {
                    self.pos += 1;
                    break;
                }
                Some(Token::Ident(s)) => {
                    text.push_str(s);
                    self.pos += 1;
                }
                Some(Token::Colon) => {
                    text.push(':');
                    self.pos += 1;
                }
                Some(Token::Comma) => {
                    text.push_str(", ");
                    self.pos += 1;
                }
                Some(t) => return Err(self.err(format!("unexpected {t} in schema clause"))),
                None => return Err(self.err("unterminated schema clause")),
            }
        }
        parse_schema(&text).map_err(|e| ScriptError::Parse {
            line,
            col,
            message: format!("bad schema clause: {e}"),
        })
    }

    // Expression grammar, loosest binding first: OR, AND, comparisons,
    // additive, multiplicative, unary minus, primary.

    fn expr(&mut self) -> Result<Expr, ScriptError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Token::Kw(Keyword::Or)) {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ScriptError> {
        let mut lhs = self.cmp_expr()?;
        while self.peek() == Some(&Token::Kw(Keyword::And)) {
            self.pos += 1;
            let rhs = self.cmp_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ScriptError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Some(Token::EqEq) => BinOp::Eq,
            Some(Token::Ne) => BinOp::Ne,
            Some(Token::Lt) => BinOp::Lt,
            Some(Token::Le) => BinOp::Le,
            Some(Token::Gt) => BinOp::Gt,
            Some(Token::Ge) => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.add_expr()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> Result<Expr, ScriptError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinOp::Add,
                Some(Token::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ScriptError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinOp::Mul,
                Some(Token::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ScriptError> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            return match self.peek().cloned() {
                Some(Token::Int(i)) => {
                    self.pos += 1;
                    Ok(Expr::ConstInt(-i))
                }
                Some(Token::Float(x)) => {
                    self.pos += 1;
                    Ok(Expr::ConstFloat(-x))
                }
                _ => Err(self.err("`-` must be followed by a numeric literal")),
            };
        }
        self.primary_expr()
    }

    fn primary_expr(&mut self) -> Result<Expr, ScriptError> {
        match self.peek().cloned() {
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(&Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Int(i)) => {
                self.pos += 1;
                Ok(Expr::ConstInt(i))
            }
            Some(Token::Float(x)) => {
                self.pos += 1;
                Ok(Expr::ConstFloat(x))
            }
            Some(Token::Str(s)) => {
                self.pos += 1;
                Ok(Expr::ConstText(s))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Token::LParen) {
                    let builtin = Builtin::from_name(&name)
                        .ok_or_else(|| self.err(format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Token::RParen) {
                        args.push(self.expr()?);
                        while self.peek() == Some(&Token::Comma) {
                            self.pos += 1;
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(&Token::RParen)?;
                    Ok(Expr::Call(builtin, args))
                } else {
                    Ok(Expr::FieldRef(name))
                }
            }
            // `group` the field name collides with GROUP the keyword.
            Some(Token::Kw(Keyword::Group)) => {
                self.pos += 1;
                Ok(Expr::FieldRef("group".to_string()))
            }
            Some(t) => Err(self.err(format!("expected expression, found {t}"))),
            None => Err(self.err("expected expression, found end of input")),
        }
    }

    fn gen_list(&mut self) -> Result<Vec<GenItem>, ScriptError> {
        let mut items = Vec::new();
        loop {
            let expr = self.expr()?;
            let rename = if self.peek() == Some(&Token::Kw(Keyword::As)) {
                self.pos += 1;
                Some(self.expect_ident("output field name")?)
            } else {
                None
            };
            items.push(GenItem { expr, rename });
            if self.peek() == Some(&Token::Comma) {
                self.pos += 1;
            } else {
                return Ok(items);
            }
        }
    }

    fn push_node(
        &mut self,
        alias: Option<String>,
        op: PlanOp,
    ) -> Result<NodeId, ScriptError> {
        let id = self.nodes.len();
        if let Some(name) = &alias {
            if self.aliases.contains_key(name) {
                return Err(ScriptError::Plan {
                    message: format!("alias `{name}` is already defined"),
                });
            }
            self.aliases.insert(name.clone(), id);
        }
        self.nodes.push(PlanNode {
            id,
            alias,
            op,
            schema: None,
        });
        Ok(id)
    }

    fn statement(&mut self) -> Result<(), ScriptError> {
        if self.peek() == Some(&Token::Kw(Keyword::Store)) {
            self.pos += 1;
            let input = self.resolve_next_ident()?;
            self.expect_kw(Keyword::Into)?;
            let path = self.expect_str("output path string")?;
            self.expect(&Token::Semi)?;
            self.push_node(None, PlanOp::Store { input, path })?;
            return Ok(());
        }
        let alias = self.expect_ident("alias or STORE")?;
        self.expect(&Token::Assign)?;
        let op = match self.next().map(|s| s.token.clone()) {
            Some(Token::Kw(Keyword::Load)) => {
                let path = self.expect_str("input path string")?;
                self.expect_kw(Keyword::As)?;
                let schema = self.schema_clause()?;
                PlanOp::Load { path, schema }
            }
            Some(Token::Kw(Keyword::Filter)) => {
                let input = self.resolve_next_ident()?;
                self.expect_kw(Keyword::By)?;
                let predicate = self.expr()?;
                PlanOp::Filter { input, predicate }
            }
            Some(Token::Kw(Keyword::Foreach)) => {
                let input = self.resolve_next_ident()?;
                self.expect_kw(Keyword::Generate)?;
                let gens = self.gen_list()?;
                PlanOp::Foreach { input, gens }
            }
            Some(Token::Kw(Keyword::Group)) => {
                let input = self.resolve_next_ident()?;
                self.expect_kw(Keyword::By)?;
                let keys = self.field_list(false)?;
                PlanOp::Group { input, keys }
            }
            Some(Token::Kw(Keyword::Join)) => {
                let left = self.resolve_next_ident()?;
                self.expect_kw(Keyword::By)?;
                let left_keys = self.field_list(true)?;
                self.expect(&Token::Comma)?;
                let right = self.resolve_next_ident()?;
                self.expect_kw(Keyword::By)?;
                let right_keys = self.field_list(true)?;
                PlanOp::Join {
                    left,
                    left_keys,
                    right,
                    right_keys,
                }
            }
            Some(Token::Kw(Keyword::Order)) => {
                let input = self.resolve_next_ident()?;
                self.expect_kw(Keyword::By)?;
                let keys = self.field_list(false)?;
                let descending = if self.peek() == Some(&Token::Kw(Keyword::Desc)) {
                    self.pos += 1;
                    true
                } else {
                    false
                };
                PlanOp::Order {
                    input,
                    keys,
                    descending,
                }
            }
            Some(t) => return Err(self.err(format!("expected an operator keyword, found {t}"))),
            None => return Err(self.err("expected an operator keyword, found end of input")),
        };
        self.expect(&Token::Semi)?;
        self.push_node(Some(alias), op)?;
        Ok(())
    }
}

/// Parse tokens into a logical plan.
///
/// Aliases are single-assignment and must be defined before use, so the
/// node list is a DAG in topological order.
pub fn parse_script(tokens: &[Spanned]) -> Result<LogicalPlan, ScriptError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        nodes: Vec::new(),
        aliases: HashMap::new(),
    };
    while p.peek().is_some() {
        p.statement()?;
    }
    Ok(LogicalPlan { nodes: p.nodes })
}

/// Convenience: tokenize and parse in one step.
pub fn parse_script_text(text: &str) -> Result<LogicalPlan, ScriptError> {
    let tokens = super::tokenize_script(text)?;
    parse_script(&tokens)
}

/// Parse statements against pre-bound aliases: each `(alias, path, schema)`
/// becomes a LOAD node before parsing starts. This is how the interactive
/// console threads earlier, already-materialized relations into the next
/// statement; schemas here may carry nested types no AS clause could spell.
pub fn parse_script_with_env(
    text: &str,
    env: &[(String, String, Schema)],
) -> Result<LogicalPlan, ScriptError> {
    let tokens = super::tokenize_script(text)?;
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        nodes: Vec::new(),
        aliases: HashMap::new(),
    };
    for (alias, path, schema) in env {
        p.push_node(
            Some(alias.clone()),
            PlanOp::Load {
                path: path.clone(),
                schema: schema.clone(),
            },
        )?;
    }
    while p.peek().is_some() {
        p.statement()?;
    }
    Ok(LogicalPlan { nodes: p.nodes })
}
