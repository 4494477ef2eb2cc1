//! Schema inference: annotate every plan node with its output schema and
//! reject ill-typed expressions before anything runs.

use thiserror::Error;

use crate::data_model::{Field, FieldType, Schema, SchemaError};

use super::{BinOp, Builtin, Expr, GenItem, LogicalPlan, PlanOp};

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("unknown field `{field}` (schema: {schema})")]
    UnknownField { field: String, schema: String },
    #[error("{call} expects a bag argument, found {ty} (aggregates are only valid downstream of GROUP)")]
    NeedsBag { call: &'static str, ty: String },
    #[error("{call} expects {expected} argument(s), found {actual}")]
    BadArgCount {
        call: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{call} cannot aggregate over leading field of type {ty}")]
    BadAggregateField { call: &'static str, ty: String },
    #[error("operator {op} cannot combine {left} and {right}")]
    BadOperands {
        op: &'static str,
        left: String,
        right: String,
    },
    #[error("TOKENIZE expects a chararray argument, found {ty}")]
    TokenizeArg { ty: String },
    #[error("FLATTEN is only allowed as a whole GENERATE item")]
    FlattenPosition,
    #[error("FLATTEN with AS requires a single-field bag, this one has {arity} fields")]
    FlattenRename { arity: usize },
    #[error("filter predicate must be boolean-valued (int), found {ty}")]
    BadPredicate { ty: String },
    #[error("field `{field}` of type {ty} cannot be a grouping or ordering key")]
    NotScalarKey { field: String, ty: String },
    #[error("join key lists differ in length: {left} vs {right}")]
    KeyArityMismatch { left: usize, right: usize },
    #[error("join keys `{left_key}` ({left_ty}) and `{right_key}` ({right_ty}) are not comparable")]
    KeyTypeMismatch {
        left_key: String,
        left_ty: String,
        right_key: String,
        right_ty: String,
    },
    #[error("output schema invalid: {0}")]
    BadOutputSchema(SchemaError),
}

fn lookup(schema: &Schema, field: &str) -> Result<FieldType, TypeError> {
    schema
        .field(field)
        .map(|f| f.ty.clone())
        .ok_or_else(|| TypeError::UnknownField {
            field: field.to_string(),
            schema: schema.to_string(),
        })
}

fn one_arg<'e>(call: &'static str, args: &'e [Expr]) -> Result<&'e Expr, TypeError> {
    if args.len() != 1 {
        return Err(TypeError::BadArgCount {
            call,
            expected: 1,
            actual: args.len(),
        });
    }
    Ok(&args[0])
}

/// Schema of the bag TOKENIZE produces.
pub fn tokenize_schema() -> Schema {
    Schema::new(vec![Field {
        name: "token".to_string(),
        ty: FieldType::CharArray,
    }])
    .expect("static schema")
}

/// Type of an expression over rows of `schema`.
pub fn expr_type(expr: &Expr, schema: &Schema) -> Result<FieldType, TypeError> {
    match expr {
        Expr::FieldRef(name) => lookup(schema, name),
        Expr::ConstInt(_) => Ok(FieldType::Int),
        Expr::ConstFloat(_) => Ok(FieldType::Float),
        Expr::ConstText(_) => Ok(FieldType::CharArray),
        Expr::Binary(op, lhs, rhs) => {
            let lt = expr_type(lhs, schema)?;
            let rt = expr_type(rhs, schema)?;
            let fail = || TypeError::BadOperands {
                op: op.symbol(),
                left: lt.to_string(),
                right: rt.to_string(),
            };
            match op {
                BinOp::Add if lt == FieldType::CharArray && rt == FieldType::CharArray => {
                    Ok(FieldType::CharArray)
                }
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    if lt.is_numeric() && rt.is_numeric() {
                        if lt == FieldType::Int && rt == FieldType::Int {
                            Ok(FieldType::Int)
                        } else {
                            Ok(FieldType::Float)
                        }
                    } else {
                        Err(fail())
                    }
                }
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let comparable = (lt.is_numeric() && rt.is_numeric())
                        || (lt == FieldType::CharArray && rt == FieldType::CharArray);
                    if comparable {
                        Ok(FieldType::Int)
                    } else {
                        Err(fail())
                    }
                }
                BinOp::And | BinOp::Or => {
                    if lt == FieldType::Int && rt == FieldType::Int {
                        Ok(FieldType::Int)
                    } else {
                        Err(fail())
                    }
                }
            }
        }
        Expr::Call(builtin, args) => match builtin {
            Builtin::Count => {
                let arg = one_arg("COUNT", args)?;
                match expr_type(arg, schema)? {
                    FieldType::Bag(_) => Ok(FieldType::Int),
                    other => Err(TypeError::NeedsBag {
                        call: "COUNT",
                        ty: other.to_string(),
                    }),
                }
            }
            Builtin::Sum | Builtin::Min | Builtin::Max | Builtin::Avg => {
                let call = builtin.name();
                let arg = one_arg(call, args)?;
                match expr_type(arg, schema)? {
                    FieldType::Bag(elem) => {
                        let lead = &elem.fields()[0].ty;
                        match builtin {
                            Builtin::Avg => {
                                if lead.is_numeric() {
                                    Ok(FieldType::Float)
                                } else {
                                    Err(TypeError::BadAggregateField {
                                        call,
                                        ty: lead.to_string(),
                                    })
                                }
                            }
                            Builtin::Sum => {
                                if lead.is_numeric() {
                                    Ok(lead.clone())
                                } else {
                                    Err(TypeError::BadAggregateField {
                                        call,
                                        ty: lead.to_string(),
                                    })
                                }
                            }
                            _ => {
                                if lead.is_scalar() {
                                    Ok(lead.clone())
                                } else {
                                    Err(TypeError::BadAggregateField {
                                        call,
                                        ty: lead.to_string(),
                                    })
                                }
                            }
                        }
                    }
                    other => Err(TypeError::NeedsBag {
                        call,
                        ty: other.to_string(),
                    }),
                }
            }
            Builtin::Tokenize => {
                let arg = one_arg("TOKENIZE", args)?;
                match expr_type(arg, schema)? {
                    FieldType::CharArray => Ok(FieldType::Bag(Box::new(tokenize_schema()))),
                    other => Err(TypeError::TokenizeArg {
                        ty: other.to_string(),
                    }),
                }
            }
            Builtin::Flatten => Err(TypeError::FlattenPosition),
        },
    }
}

/// Output schema of a FOREACH ... GENERATE list.
pub fn foreach_schema(gens: &[GenItem], input: &Schema) -> Result<Schema, TypeError> {
    let mut fields = Vec::new();
    for (idx, gen) in gens.iter().enumerate() {
        if let Expr::Call(Builtin::Flatten, args) = &gen.expr {
            let arg = one_arg("FLATTEN", args)?;
            match expr_type(arg, input)? {
                FieldType::Bag(elem) => match &gen.rename {
                    Some(name) => {
                        if elem.len() != 1 {
                            return Err(TypeError::FlattenRename { arity: elem.len() });
                        }
                        fields.push(Field {
                            name: name.clone(),
                            ty: elem.fields()[0].ty.clone(),
                        });
                    }
                    None => fields.extend(elem.fields().iter().cloned()),
                },
                other => {
                    return Err(TypeError::NeedsBag {
                        call: "FLATTEN",
                        ty: other.to_string(),
                    })
                }
            }
        } else {
            let ty = expr_type(&gen.expr, input)?;
            let name = gen.rename.clone().unwrap_or_else(|| match &gen.expr {
                Expr::FieldRef(n) => n.clone(),
                _ => format!("f{idx}"),
            });
            fields.push(Field { name, ty });
        }
    }
    Schema::new(fields).map_err(TypeError::BadOutputSchema)
}

fn scalar_keys(keys: &[String], schema: &Schema) -> Result<Vec<Field>, TypeError> {
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let ty = lookup(schema, key)?;
        if !ty.is_scalar() {
            return Err(TypeError::NotScalarKey {
                field: key.clone(),
                ty: ty.to_string(),
            });
        }
        out.push(Field {
            name: key.clone(),
            ty,
        });
    }
    Ok(out)
}

/// Schema of a GROUP output: (group, <input alias>: bag of input tuples).
pub fn group_schema(
    keys: &[String],
    input_schema: &Schema,
    input_alias: &str,
) -> Result<Schema, TypeError> {
    let key_fields = scalar_keys(keys, input_schema)?;
    let group_ty = if key_fields.len() == 1 {
        key_fields[0].ty.clone()
    } else {
        FieldType::Tuple(Box::new(
            Schema::new(key_fields).map_err(TypeError::BadOutputSchema)?,
        ))
    };
    Schema::new(vec![
        Field {
            name: "group".to_string(),
            ty: group_ty,
        },
        Field {
            name: input_alias.to_string(),
            ty: FieldType::Bag(Box::new(input_schema.clone())),
        },
    ])
    .map_err(TypeError::BadOutputSchema)
}

/// Schema of a JOIN output: left fields then right fields, with names that
/// collide across sides qualified as `alias::name`.
pub fn join_schema(
    left_schema: &Schema,
    left_alias: &str,
    right_schema: &Schema,
    right_alias: &str,
) -> Result<Schema, TypeError> {
    let mut fields = Vec::new();
    for f in left_schema.fields() {
        let collides = right_schema.field(&f.name).is_some();
        fields.push(Field {
            name: if collides {
                format!("{left_alias}::{}", f.name)
            } else {
                f.name.clone()
            },
            ty: f.ty.clone(),
        });
    }
    for f in right_schema.fields() {
        let collides = left_schema.field(&f.name).is_some();
        fields.push(Field {
            name: if collides {
                format!("{right_alias}::{}", f.name)
            } else {
                f.name.clone()
            },
            ty: f.ty.clone(),
        });
    }
    Schema::new(fields).map_err(TypeError::BadOutputSchema)
}

/// Annotate every node of the plan with its output schema.
pub fn infer_schemas(mut plan: LogicalPlan) -> Result<LogicalPlan, TypeError> {
    for idx in 0..plan.nodes.len() {
        let schema = match &plan.nodes[idx].op {
            PlanOp::Load { schema, .. } => schema.clone(),
            PlanOp::Filter { input, predicate } => {
                let input_schema = plan.schema_of(*input).clone();
                let ty = expr_type(predicate, &input_schema)?;
                if ty != FieldType::Int {
                    return Err(TypeError::BadPredicate { ty: ty.to_string() });
                }
                input_schema
            }
            PlanOp::Foreach { input, gens } => {
                let input_schema = plan.schema_of(*input).clone();
                foreach_schema(gens, &input_schema)?
            }
            PlanOp::Group { input, keys } => {
                let input_schema = plan.schema_of(*input).clone();
                let alias = plan.alias_of(*input).to_string();
                group_schema(keys, &input_schema, &alias)?
            }
            PlanOp::Join {
                left,
                left_keys,
                right,
                right_keys,
            } => {
                if left_keys.len() != right_keys.len() {
                    return Err(TypeError::KeyArityMismatch {
                        left: left_keys.len(),
                        right: right_keys.len(),
                    });
                }
                let ls = plan.schema_of(*left).clone();
                let rs = plan.schema_of(*right).clone();
                let lf = scalar_keys(left_keys, &ls)?;
                let rf = scalar_keys(right_keys, &rs)?;
                for (a, b) in lf.iter().zip(rf.iter()) {
                    let ok = (a.ty.is_numeric() && b.ty.is_numeric())
                        || (a.ty == FieldType::CharArray && b.ty == FieldType::CharArray);
                    if !ok {
                        return Err(TypeError::KeyTypeMismatch {
                            left_key: a.name.clone(),
                            left_ty: a.ty.to_string(),
                            right_key: b.name.clone(),
                            right_ty: b.ty.to_string(),
                        });
                    }
                }
                join_schema(
                    &ls,
                    plan.alias_of(*left),
                    &rs,
                    plan.alias_of(*right),
                )?
            }
            PlanOp::Order { input, keys, .. } => {
                let input_schema = plan.schema_of(*input).clone();
                scalar_keys(keys, &input_schema)?;
                input_schema
            }
            PlanOp::Store { input, .. } => plan.schema_of(*input).clone(),
        };
        plan.nodes[idx].schema = Some(schema);
    }
    Ok(plan)
}
