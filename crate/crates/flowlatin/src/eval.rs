//! Runtime evaluation of script expressions over typed rows.
//!
//! Inference has already vetted the types, so most mismatches here indicate
//! an engine bug; the exceptions are data-dependent failures (integer
//! overflow, division by zero, aggregating an empty bag) which surface as
//! record-level errors.

use std::cmp::Ordering;

use thiserror::Error;

use crate::data_model::{compare, Schema, Value};
use crate::script_lang::{BinOp, Builtin, Expr, GenItem};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("{op} cannot combine {left} and {right}")]
    TypeMismatch {
        op: &'static str,
        left: &'static str,
        right: &'static str,
    },
    #[error("integer overflow in {0}")]
    IntOverflow(&'static str),
    #[error("integer division by zero")]
    DivByZero,
    #[error("{0} over an empty bag")]
    EmptyAggregate(&'static str),
    #[error("{call} expects a bag, found {found}")]
    NotABag {
        call: &'static str,
        found: &'static str,
    },
    #[error("bag element is not a non-empty tuple")]
    MalformedBag,
}

fn flag(b: bool) -> Value {
    Value::Int(if b { 1 } else { 0 })
}

pub fn truthy(v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Int(i) => Ok(*i != 0),
        other => Err(EvalError::TypeMismatch {
            op: "predicate",
            left: other.type_name(),
            right: "int",
        }),
    }
}

fn arith(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    if op == BinOp::Add {
        if let (Value::CharArray(a), Value::CharArray(b)) = (&l, &r) {
            return Ok(Value::CharArray(format!("{a}{b}")));
        }
    }
    match (&l, &r) {
        (Value::Int(a), Value::Int(b)) => {
            let (a, b) = (*a, *b);
            let out = match op {
                BinOp::Add => a.checked_add(b).ok_or(EvalError::IntOverflow("+"))?,
                BinOp::Sub => a.checked_sub(b).ok_or(EvalError::IntOverflow("-"))?,
                BinOp::Mul => a.checked_mul(b).ok_or(EvalError::IntOverflow("*"))?,
                BinOp::Div => {
                    if b == 0 {
                        return Err(EvalError::DivByZero);
                    }
                    a.checked_div(b).ok_or(EvalError::IntOverflow("/"))?
                }
                _ => unreachable!(),
            };
            Ok(Value::Int(out))
        }
        _ => {
            let (a, b) = match (l.as_f64(), r.as_f64()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(EvalError::TypeMismatch {
                        op: op.symbol(),
                        left: l.type_name(),
                        right: r.type_name(),
                    })
                }
            };
            let out = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                _ => unreachable!(),
            };
            Ok(Value::Float(out))
        }
    }
}

/// First cell of each tuple in a bag: what aggregates fold over.
fn leading_values(call: &'static str, bag: &Value) -> Result<Vec<Value>, EvalError> {
    match bag {
        Value::Bag(tuples) => tuples
            .iter()
            .map(|t| match t {
                Value::Tuple(cells) if !cells.is_empty() => Ok(cells[0].clone()),
                _ => Err(EvalError::MalformedBag),
            })
            .collect(),
        other => Err(EvalError::NotABag {
            call,
            found: other.type_name(),
        }),
    }
}

fn sum_values(call: &'static str, vals: &[Value]) -> Result<Value, EvalError> {
    let all_int = vals.iter().all(|v| matches!(v, Value::Int(_)));
    if all_int {
        let mut acc: i64 = 0;
        for v in vals {
            if let Value::Int(i) = v {
                acc = acc.checked_add(*i).ok_or(EvalError::IntOverflow(call))?;
            }
        }
        Ok(Value::Int(acc))
    } else {
        let mut acc = 0.0f64;
        for v in vals {
            acc += v.as_f64().ok_or(EvalError::TypeMismatch {
                op: call,
                left: v.type_name(),
                right: "number",
            })?;
        }
        Ok(Value::Float(acc))
    }
}

/// Evaluate an aggregate call over an already-materialized bag value.
pub fn eval_aggregate(builtin: Builtin, bag: &Value) -> Result<Value, EvalError> {
    match builtin {
        Builtin::Count => match bag {
            Value::Bag(tuples) => Ok(Value::Int(tuples.len() as i64)),
            other => Err(EvalError::NotABag {
                call: "COUNT",
                found: other.type_name(),
            }),
        },
        Builtin::Sum => sum_values("SUM", &leading_values("SUM", bag)?),
        Builtin::Min | Builtin::Max => {
            let call = if builtin == Builtin::Min { "MIN" } else { "MAX" };
            let vals = leading_values(call, bag)?;
            let mut best: Option<Value> = None;
            for v in vals {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let keep_new = match compare(&v, &b) {
                            Ordering::Less => builtin == Builtin::Min,
                            Ordering::Greater => builtin == Builtin::Max,
                            Ordering::Equal => false,
                        };
                        if keep_new {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            best.ok_or(EvalError::EmptyAggregate(call))
        }
        Builtin::Avg => {
            let vals = leading_values("AVG", bag)?;
            if vals.is_empty() {
                return Err(EvalError::EmptyAggregate("AVG"));
            }
            let sum = match sum_values("AVG", &vals)? {
                Value::Int(i) => i as f64,
                Value::Float(f) => f,
                _ => unreachable!(),
            };
            Ok(Value::Float(sum / vals.len() as f64))
        }
        _ => unreachable!("not an aggregate"),
    }
}

pub fn tokenize_to_bag(text: &str) -> Value {
    Value::Bag(
        text.split_whitespace()
            .map(|t| Value::Tuple(vec![Value::CharArray(t.to_string())]))
            .collect(),
    )
}

/// Evaluate an expression against one row.
pub fn eval_expr(expr: &Expr, row: &[Value], schema: &Schema) -> Result<Value, EvalError> {
    eval_expr_inner(expr, row, schema, None)
}

fn eval_expr_inner(
    expr: &Expr,
    row: &[Value],
    schema: &Schema,
    finals: Option<&[(Builtin, Value)]>,
) -> Result<Value, EvalError> {
    match expr {
        Expr::FieldRef(name) => {
            let pos = schema
                .position(name)
                .ok_or_else(|| EvalError::UnknownField(name.clone()))?;
            Ok(row[pos].clone())
        }
        Expr::ConstInt(i) => Ok(Value::Int(*i)),
        Expr::ConstFloat(x) => Ok(Value::Float(*x)),
        Expr::ConstText(s) => Ok(Value::CharArray(s.clone())),
        Expr::Binary(op, lhs, rhs) => {
            let l = eval_expr_inner(lhs, row, schema, finals)?;
            let r = eval_expr_inner(rhs, row, schema, finals)?;
            match op {
                // no short-circuit surprises: both sides always evaluate
                BinOp::And => Ok(flag(truthy(&l)? && truthy(&r)?)),
                BinOp::Or => Ok(flag(truthy(&l)? || truthy(&r)?)),
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => arith(*op, l, r),
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let ord = compare(&l, &r);
                    Ok(flag(match op {
                        BinOp::Eq => ord == Ordering::Equal,
                        BinOp::Ne => ord != Ordering::Equal,
                        BinOp::Lt => ord == Ordering::Less,
                        BinOp::Le => ord != Ordering::Greater,
                        BinOp::Gt => ord == Ordering::Greater,
                        BinOp::Ge => ord != Ordering::Less,
                        _ => unreachable!(),
                    }))
                }
            }
        }
        Expr::Call(builtin, args) => {
            if builtin.is_aggregate() {
                if let Some(finals) = finals {
                    if let Some((_, v)) = finals.iter().find(|(b, _)| b == builtin) {
                        return Ok(v.clone());
                    }
                }
            }
            match builtin {
                Builtin::Tokenize => {
                    let arg = eval_expr_inner(&args[0], row, schema, finals)?;
                    match arg {
                        Value::CharArray(s) => Ok(tokenize_to_bag(&s)),
                        other => Err(EvalError::TypeMismatch {
                            op: "TOKENIZE",
                            left: other.type_name(),
                            right: "chararray",
                        }),
                    }
                }
                Builtin::Flatten => Err(EvalError::NotABag {
                    call: "FLATTEN",
                    found: "non-generate position",
                }),
                agg => {
                    let bag = eval_expr_inner(&args[0], row, schema, finals)?;
                    eval_aggregate(*agg, &bag)
                }
            }
        }
    }
}

/// Evaluate a GENERATE list against one row. FLATTEN items fan out; several
/// FLATTENs produce the cross product in item order.
pub fn eval_generate(
    gens: &[GenItem],
    row: &[Value],
    schema: &Schema,
) -> Result<Vec<Vec<Value>>, EvalError> {
    eval_generate_inner(gens, row, schema, None)
}

/// [`eval_generate`] with pre-combined aggregate values.
pub fn eval_generate_with_finals(
    gens: &[GenItem],
    row: &[Value],
    schema: &Schema,
    finals: &[(Builtin, Value)],
) -> Result<Vec<Vec<Value>>, EvalError> {
    eval_generate_inner(gens, row, schema, Some(finals))
}

fn eval_generate_inner(
    gens: &[GenItem],
    row: &[Value],
    schema: &Schema,
    finals: Option<&[(Builtin, Value)]>,
) -> Result<Vec<Vec<Value>>, EvalError> {
    enum Item {
        Single(Value),
        Spliced(Vec<Vec<Value>>),
    }
    let mut items = Vec::with_capacity(gens.len());
    for gen in gens {
        if let Expr::Call(Builtin::Flatten, args) = &gen.expr {
            let bag = eval_expr_inner(&args[0], row, schema, finals)?;
            match bag {
                Value::Bag(tuples) => {
                    let mut rows = Vec::with_capacity(tuples.len());
                    for t in tuples {
                        match t {
                            Value::Tuple(cells) => rows.push(cells),
                            _ => return Err(EvalError::MalformedBag),
                        }
                    }
                    items.push(Item::Spliced(rows));
                }
                other => {
                    return Err(EvalError::NotABag {
                        call: "FLATTEN",
                        found: other.type_name(),
                    })
                }
            }
        } else {
            items.push(Item::Single(eval_expr_inner(&gen.expr, row, schema, finals)?));
        }
    }
    let mut out: Vec<Vec<Value>> = vec![Vec::new()];
    for item in &items {
        match item {
            Item::Single(v) => {
                for row in &mut out {
                    row.push(v.clone());
                }
            }
            Item::Spliced(rows) => {
                let mut next = Vec::with_capacity(out.len() * rows.len());
                for prefix in &out {
                    for cells in rows {
                        let mut row = prefix.clone();
                        row.extend(cells.iter().cloned());
                        next.push(row);
                    }
                }
                out = next;
            }
        }
    }
    Ok(out)
}
