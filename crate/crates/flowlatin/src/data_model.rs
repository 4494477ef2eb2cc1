//! The dataflow value system: atoms, tuples and bags, plus the named typed
//! schemas that describe relation columns.
//!
//! Values carry a single total order (`compare`) that the shuffle stage sorts
//! by, with ints and floats unified numerically: `Int 2` equals `Float 2.0`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single dataflow value.
///
/// Bags are multisets of tuples; insertion order is preserved for rendering
/// but ignored by `compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Float(f64),
    CharArray(String),
    Tuple(Vec<Value>),
    Bag(Vec<Value>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::CharArray(_) => "chararray",
            Value::Tuple(_) => "tuple",
            Value::Bag(_) => "bag",
        }
    }

    /// Numeric view used by arithmetic and aggregates.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn is_bag(&self) -> bool {
        matches!(self, Value::Bag(_))
    }
}

/// Equality agrees with `compare`, so `Int(2) == Float(2.0)`.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        compare(self, other) == Ordering::Equal
    }
}

/// Cross-variant rank: numbers < chararray < tuple < bag.
fn rank(v: &Value) -> u8 {
    match v {
        Value::Int(_) | Value::Float(_) => 0,
        Value::CharArray(_) => 1,
        Value::Tuple(_) => 2,
        Value::Bag(_) => 3,
    }
}

/// Exact comparison of an i64 against an f64, with no precision loss for
/// magnitudes beyond 2^53. NaN sorts above every number.
fn cmp_int_float(i: i64, f: f64) -> Ordering {
    if f.is_nan() {
        return Ordering::Less;
    }
    if f == f64::INFINITY {
        return Ordering::Less;
    }
    if f == f64::NEG_INFINITY {
        return Ordering::Greater;
    }
    // 2^63 and -2^63 are exactly representable.
    if f >= 9_223_372_036_854_775_808.0 {
        return Ordering::Less;
    }
    if f < -9_223_372_036_854_775_808.0 {
        return Ordering::Greater;
    }
    let floor = f.floor();
    let floor_i = floor as i64; // exact: floor is integral and in range
    match i.cmp(&floor_i) {
        Ordering::Equal => {
            if f > floor {
                Ordering::Less // i == floor(f) < f
            } else {
                Ordering::Equal
            }
        }
        other => other,
    }
}

fn cmp_floats(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => a.partial_cmp(&b).expect("non-NaN floats compare"),
    }
}

/// Total order over values: numeric order for atoms, byte order for
/// chararrays, elementwise order for tuples, sorted-multiset order for bags.
pub fn compare(a: &Value, b: &Value) -> Ordering {
    let (ra, rb) = (rank(a), rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Float(x), Value::Float(y)) => cmp_floats(*x, *y),
        (Value::Int(x), Value::Float(y)) => cmp_int_float(*x, *y),
        (Value::Float(x), Value::Int(y)) => cmp_int_float(*y, *x).reverse(),
        (Value::CharArray(x), Value::CharArray(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Value::Tuple(x), Value::Tuple(y)) => cmp_seq(x, y),
        (Value::Bag(x), Value::Bag(y)) => {
            let mut xs: Vec<&Value> = x.iter().collect();
            let mut ys: Vec<&Value> = y.iter().collect();
            xs.sort_by(|p, q| compare(p, q));
            ys.sort_by(|p, q| compare(p, q));
            for (p, q) in xs.iter().zip(ys.iter()) {
                let ord = compare(p, q);
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            xs.len().cmp(&ys.len())
        }
        _ => unreachable!("rank dispatch covers cross-variant cases"),
    }
}

fn cmp_seq(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = compare(x, y);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// `Ord` wrapper so values can key `BTreeMap`s and sort calls.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdValue(pub Value);

impl Eq for OrdValue {}

impl PartialOrd for OrdValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdValue {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(&self.0, &other.0)
    }
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldType {
    Int,
    Float,
    CharArray,
    /// Nested tuple with named components (group keys over several fields).
    Tuple(Box<Schema>),
    /// Bag of tuples sharing the element schema.
    Bag(Box<Schema>),
}

impl FieldType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, FieldType::Int | FieldType::Float)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, FieldType::Int | FieldType::Float | FieldType::CharArray)
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldType::Int => write!(f, "int"),
            FieldType::Float => write!(f, "float"),
            FieldType::CharArray => write!(f, "chararray"),
            FieldType::Tuple(s) => write!(f, "tuple({})", s),
            FieldType::Bag(s) => write!(f, "bag({})", s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub ty: FieldType,
}

/// Ordered list of named, typed fields. Never empty; names unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self, SchemaError> {
        if fields.is_empty() {
            return Err(SchemaError::Empty);
        }
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(SchemaError::DuplicateName(f.name.clone()));
            }
        }
        Ok(Schema { fields })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fld) in self.fields.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", fld.name, fld.ty)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema clause is empty")]
    Empty,
    #[error("duplicate field name `{0}`")]
    DuplicateName(String),
    #[error("unknown type `{0}` (expected chararray, int or float)")]
    UnknownType(String),
    #[error("malformed schema field `{0}` (expected name:type)")]
    Malformed(String),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse a schema clause such as `protocol:chararray, flow:int`.
///
/// Only the three scalar types are accepted here; nested types arise from
/// schema inference, never from source text.
pub fn parse_schema(text: &str) -> Result<Schema, SchemaError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SchemaError::Empty);
    }
    let mut fields = Vec::new();
    for part in trimmed.split(',') {
        let part = part.trim();
        let (name, ty) = part
            .split_once(':')
            .ok_or_else(|| SchemaError::Malformed(part.to_string()))?;
        let name = name.trim();
        if !is_ident(name) {
            return Err(SchemaError::Malformed(part.to_string()));
        }
        let ty = match ty.trim() {
            "int" => FieldType::Int,
            "float" => FieldType::Float,
            "chararray" => FieldType::CharArray,
            other => return Err(SchemaError::UnknownType(other.to_string())),
        };
        fields.push(Field {
            name: name.to_string(),
            ty,
        });
    }
    Schema::new(fields)
}

// ---------------------------------------------------------------------------
// Cell parsing and rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoerceError {
    #[error("row has {actual} cells, schema `{schema}` expects {expected}")]
    Arity {
        schema: String,
        expected: usize,
        actual: usize,
    },
    #[error("field `{field}`: cannot parse `{cell}` as {ty}")]
    BadCell {
        field: String,
        cell: String,
        ty: String,
    },
}

/// Parse one rendered cell back into a value of the given type.
pub fn parse_cell(text: &str, ty: &FieldType) -> Result<Value, String> {
    match ty {
        FieldType::Int => text
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|e| e.to_string()),
        FieldType::Float => text
            .parse::<f64>()
            .map(Value::Float)
            .map_err(|e| e.to_string()),
        FieldType::CharArray => Ok(Value::CharArray(text.to_string())),
        FieldType::Tuple(inner) => {
            let body = text
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| format!("expected (..) tuple, got `{text}`"))?;
            let cells = split_nested(body);
            if cells.len() != inner.len() {
                return Err(format!(
                    "tuple arity {} does not match schema `{}`",
                    cells.len(),
                    inner
                ));
            }
            let mut vals = Vec::with_capacity(cells.len());
            for (cell, field) in cells.iter().zip(inner.fields()) {
                vals.push(parse_cell(cell, &field.ty)?);
            }
            Ok(Value::Tuple(vals))
        }
        FieldType::Bag(elem) => {
            let body = text
                .strip_prefix('{')
                .and_then(|t| t.strip_suffix('}'))
                .ok_or_else(|| format!("expected {{..}} bag, got `{text}`"))?;
            if body.is_empty() {
                return Ok(Value::Bag(Vec::new()));
            }
            let elem_ty = FieldType::Tuple(elem.clone());
            let mut tuples = Vec::new();
            for cell in split_nested(body) {
                tuples.push(parse_cell(&cell, &elem_ty)?);
            }
            Ok(Value::Bag(tuples))
        }
    }
}

/// Split on top-level commas, tracking () and {} nesting.
fn split_nested(body: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in body.chars() {
        match c {
            '(' | '{' => {
                depth += 1;
                current.push(c);
            }
            ')' | '}' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            ',' if depth == 0 => {
                parts.push(std::mem::take(&mut current));
            }
            _ => current.push(c),
        }
    }
    parts.push(current);
    parts
}

/// Coerce a row of raw text cells to a typed tuple under the schema.
pub fn coerce_row(raw: &[&str], schema: &Schema) -> Result<Value, CoerceError> {
    if raw.len() != schema.len() {
        return Err(CoerceError::Arity {
            schema: schema.to_string(),
            expected: schema.len(),
            actual: raw.len(),
        });
    }
    let mut vals = Vec::with_capacity(raw.len());
    for (cell, field) in raw.iter().zip(schema.fields()) {
        let v = parse_cell(cell, &field.ty).map_err(|_| CoerceError::BadCell {
            field: field.name.clone(),
            cell: (*cell).to_string(),
            ty: field.ty.to_string(),
        })?;
        vals.push(v);
    }
    Ok(Value::Tuple(vals))
}

/// Float rendering: up to six decimals, trailing zeros dropped.
pub fn render_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Render one value as a cell: bags as `{(..),(..)}`, tuples as `(..)`.
pub fn render_value(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => render_float(*f),
        Value::CharArray(s) => s.clone(),
        Value::Tuple(vals) => {
            let cells: Vec<String> = vals.iter().map(render_value).collect();
            format!("({})", cells.join(","))
        }
        Value::Bag(tuples) => {
            let cells: Vec<String> = tuples.iter().map(render_value).collect();
            format!("{{{}}}", cells.join(","))
        }
    }
}

/// Render a tuple as one tab-separated output line (no trailing newline).
pub fn render_row(row: &Value) -> String {
    match row {
        Value::Tuple(vals) => {
            let cells: Vec<String> = vals.iter().map(render_value).collect();
            cells.join("\t")
        }
        other => render_value(other),
    }
}

/// Parse one tab-separated line into a typed row.
pub fn parse_row(line: &str, schema: &Schema) -> Result<Value, CoerceError> {
    let cells: Vec<&str> = if line.is_empty() {
        Vec::new()
    } else {
        line.split('\t').collect()
    };
    coerce_row(&cells, schema)
}
