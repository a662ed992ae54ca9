//! Tree-walking renderer with strict field lookup.
//!
//! Values print the way Python's `str()` prints them, so `200000.0` stays
//! `200000.0` and a missing cell prints `None`. Error messages mention types
//! and column names only, never cell contents.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use super::ast::{CompareOp, Expr, Filter, Literal, Node};
use super::{binding_name, RenderBinding, TemplateError};
use crate::schema::Value;

#[derive(Debug)]
pub(crate) struct RowVal {
    columns: Rc<Vec<String>>,
    cells: Vec<RValue>,
}

impl RowVal {
    fn get(&self, key: &str) -> Option<&RValue> {
        self.columns
            .iter()
            .position(|c| c == key)
            .map(|i| &self.cells[i])
    }
}

#[derive(Debug)]
pub(crate) struct LoopVal {
    index0: usize,
    length: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum RValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(Rc<Vec<RValue>>),
    Row(Rc<RowVal>),
    Loop(Rc<LoopVal>),
}

impl RValue {
    fn type_name(&self) -> &'static str {
        match self {
            RValue::None => "NoneType",
            RValue::Bool(_) => "bool",
            RValue::Int(_) => "int",
            RValue::Float(_) => "float",
            RValue::Str(_) => "str",
            RValue::List(_) => "list",
            RValue::Row(_) => "row",
            RValue::Loop(_) => "loop",
        }
    }

    fn from_cell(v: &Value) -> Self {
        match v {
            Value::Null => RValue::None,
            Value::Integer(i) => RValue::Int(*i),
            Value::Real(r) => RValue::Float(*r),
            Value::Text(s) => RValue::Str(s.as_str().into()),
            Value::Boolean(b) => RValue::Bool(*b),
            Value::Date(d) => RValue::Str(d.format("%Y-%m-%d").to_string().into()),
        }
    }

    fn truthy(&self) -> bool {
        match self {
            RValue::None => false,
            RValue::Bool(b) => *b,
            RValue::Int(i) => *i != 0,
            RValue::Float(f) => *f != 0.0,
            RValue::Str(s) => !s.is_empty(),
            RValue::List(l) => !l.is_empty(),
            RValue::Row(r) => !r.cells.is_empty(),
            RValue::Loop(_) => true,
        }
    }

    fn as_number(&self) -> Option<f64> {
        match self {
            RValue::Bool(b) => Some(f64::from(u8::from(*b))),
            RValue::Int(i) => Some(*i as f64),
            RValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn equals(&self, other: &RValue) -> bool {
        match (self, other) {
            (RValue::None, RValue::None) => true,
            (RValue::Str(a), RValue::Str(b)) => a == b,
            (RValue::Int(a), RValue::Int(b)) => a == b,
            (RValue::List(a), RValue::List(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.equals(y))
            }
            (RValue::Row(a), RValue::Row(b)) => {
                a.columns == b.columns
                    && a.cells.iter().zip(b.cells.iter()).all(|(x, y)| x.equals(y))
            }
            (RValue::Loop(a), RValue::Loop(b)) => Rc::ptr_eq(a, b),
            _ => match (self.as_number(), other.as_number()) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        }
    }

    fn write_str(&self, out: &mut String) {
        match self {
            RValue::Str(s) => out.push_str(s),
            other => other.write_repr(out),
        }
    }

    fn write_repr(&self, out: &mut String) {
        match self {
            RValue::None => out.push_str("None"),
            RValue::Bool(true) => out.push_str("True"),
            RValue::Bool(false) => out.push_str("False"),
            RValue::Int(i) => {
                let _ = write!(out, "{i}");
            }
            RValue::Float(f) => out.push_str(&py_float(*f)),
            RValue::Str(s) => py_str_repr(s, out),
            RValue::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_repr(out);
                }
                out.push(']');
            }
            RValue::Row(row) => {
                out.push('{');
                for (i, (c, v)) in row.columns.iter().zip(row.cells.iter()).enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    py_str_repr(c, out);
                    out.push_str(": ");
                    v.write_repr(out);
                }
                out.push('}');
            }
            RValue::Loop(_) => out.push_str("<LoopContext>"),
        }
    }
}

/// Python `repr(float)`: shortest round-trip digits, scientific notation
/// outside `[1e-4, 1e16)`.
pub(crate) fn py_float(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = f.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        let s = format!("{f:e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let (sign, digits) = match exp.strip_prefix('-') {
            Some(d) => ('-', d),
            None => ('+', exp),
        };
        return format!("{mantissa}e{sign}{digits:0>2}");
    }
    let s = format!("{f}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn py_str_repr(s: &str, out: &mut String) {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
}

fn render_err(reason: impl Into<String>) -> TemplateError {
    TemplateError::Render(reason.into())
}

pub(crate) struct Renderer {
    scopes: Vec<HashMap<String, RValue>>,
}

impl Renderer {
    pub(crate) fn new(binding: &RenderBinding) -> Self {
        let mut globals = HashMap::new();
        for (i, result) in binding.results.iter().enumerate() {
            let columns = Rc::new(result.columns.clone());
            let rows: Vec<RValue> = result
                .rows
                .iter()
                .map(|row| {
                    RValue::Row(Rc::new(RowVal {
                        columns: Rc::clone(&columns),
                        cells: row.iter().map(RValue::from_cell).collect(),
                    }))
                })
                .collect();
            globals.insert(binding_name(i), RValue::List(Rc::new(rows)));
        }
        Self {
            scopes: vec![globals],
        }
    }

    pub(crate) fn render(&mut self, nodes: &[Node], out: &mut String) -> Result<(), TemplateError> {
        for node in nodes {
            match node {
                Node::Text(t) => out.push_str(t),
                Node::Output(e) => self.eval(e)?.write_str(out),
                Node::Set { name, value } => {
                    let v = self.eval(value)?;
                    self.scopes
                        .last_mut()
                        .expect("at least one scope")
                        .insert(name.clone(), v);
                }
                Node::If {
                    branches,
                    otherwise,
                } => {
                    let mut taken = false;
                    for (cond, body) in branches {
                        if self.eval(cond)?.truthy() {
                            self.render(body, out)?;
                            taken = true;
                            break;
                        }
                    }
                    if !taken {
                        if let Some(body) = otherwise {
                            self.render(body, out)?;
                        }
                    }
                }
                Node::For { var, iter, body } => {
                    let items = iterate(&self.eval(iter)?)?;
                    let length = items.len();
                    for (index0, item) in items.into_iter().enumerate() {
                        let mut scope = HashMap::new();
                        scope.insert(var.clone(), item);
                        scope.insert(
                            "loop".to_string(),
                            RValue::Loop(Rc::new(LoopVal { index0, length })),
                        );
                        self.scopes.push(scope);
                        let result = self.render(body, out);
                        self.scopes.pop();
                        result?;
                    }
                }
            }
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Result<RValue, TemplateError> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .cloned()
            .ok_or_else(|| render_err(format!("undefined variable `{name}`")))
    }

    fn eval(&self, e: &Expr) -> Result<RValue, TemplateError> {
        match e {
            Expr::Literal(l) => Ok(match l {
                Literal::None => RValue::None,
                Literal::Bool(b) => RValue::Bool(*b),
                Literal::Int(i) => RValue::Int(*i),
                Literal::Float(f) => RValue::Float(*f),
                Literal::Str(s) => RValue::Str(s.as_str().into()),
            }),
            Expr::Name(n) => self.lookup(n),
            Expr::Attr(target, name) => {
                let t = self.eval(target)?;
                get_attr(&t, name)
            }
            Expr::Index(target, idx) => {
                let t = self.eval(target)?;
                let i = self.eval(idx)?;
                get_item(&t, &i)
            }
            Expr::Filter(target, f) => {
                let t = self.eval(target)?;
                self.apply_filter(t, f)
            }
            Expr::Not(inner) => Ok(RValue::Bool(!self.eval(inner)?.truthy())),
            Expr::And(a, b) => {
                let l = self.eval(a)?;
                if l.truthy() {
                    self.eval(b)
                } else {
                    Ok(l)
                }
            }
            Expr::Or(a, b) => {
                let l = self.eval(a)?;
                if l.truthy() {
                    Ok(l)
                } else {
                    self.eval(b)
                }
            }
            Expr::Compare(op, a, b) => {
                let l = self.eval(a)?;
                let r = self.eval(b)?;
                compare(*op, &l, &r).map(RValue::Bool)
            }
        }
    }

    fn apply_filter(&self, v: RValue, f: &Filter) -> Result<RValue, TemplateError> {
        match f {
            Filter::Length => match &v {
                RValue::Str(s) => Ok(RValue::Int(s.chars().count() as i64)),
                RValue::List(l) => Ok(RValue::Int(l.len() as i64)),
                RValue::Row(r) => Ok(RValue::Int(r.cells.len() as i64)),
                other => Err(render_err(format!(
                    "object of type {} has no length",
                    other.type_name()
                ))),
            },
            Filter::List => Ok(RValue::List(Rc::new(iterate(&v)?))),
            Filter::Unique => {
                let items = iterate(&v)?;
                let mut seen: Vec<RValue> = Vec::new();
                for item in items {
                    let key = unique_key(&item);
                    if !seen.iter().any(|s| unique_key(s).equals(&key)) {
                        seen.push(item);
                    }
                }
                Ok(RValue::List(Rc::new(seen)))
            }
            Filter::Join(sep) => {
                let sep = match sep {
                    Some(e) => {
                        let mut s = String::new();
                        self.eval(e)?.write_str(&mut s);
                        s
                    }
                    None => String::new(),
                };
                let mut out = String::new();
                for (i, item) in iterate(&v)?.iter().enumerate() {
                    if i > 0 {
                        out.push_str(&sep);
                    }
                    item.write_str(&mut out);
                }
                Ok(RValue::Str(out.into()))
            }
            Filter::MapAttribute(attr) => {
                let items = iterate(&v)?;
                let mapped = items
                    .iter()
                    .map(|item| get_attr(item, attr))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(RValue::List(Rc::new(mapped)))
            }
        }
    }
}

/// Jinja's `unique` compares strings case-insensitively.
fn unique_key(v: &RValue) -> RValue {
    match v {
        RValue::Str(s) => RValue::Str(s.to_lowercase().into()),
        other => other.clone(),
    }
}

fn iterate(v: &RValue) -> Result<Vec<RValue>, TemplateError> {
    match v {
        RValue::List(l) => Ok(l.as_ref().clone()),
        RValue::Row(r) => Ok(r
            .columns
            .iter()
            .map(|c| RValue::Str(c.as_str().into()))
            .collect()),
        RValue::Str(s) => Ok(s
            .chars()
            .map(|c| RValue::Str(c.to_string().into()))
            .collect()),
        other => Err(render_err(format!(
            "object of type {} is not iterable",
            other.type_name()
        ))),
    }
}

fn get_attr(target: &RValue, name: &str) -> Result<RValue, TemplateError> {
    match target {
        RValue::Row(row) => row
            .get(name)
            .cloned()
            .ok_or_else(|| TemplateError::UndefinedField(name.to_string())),
        RValue::Loop(l) => Ok(match name {
            "index" => RValue::Int(l.index0 as i64 + 1),
            "index0" => RValue::Int(l.index0 as i64),
            "revindex" => RValue::Int((l.length - l.index0) as i64),
            "revindex0" => RValue::Int((l.length - l.index0 - 1) as i64),
            "first" => RValue::Bool(l.index0 == 0),
            "last" => RValue::Bool(l.index0 + 1 == l.length),
            "length" => RValue::Int(l.length as i64),
            other => return Err(render_err(format!("loop has no attribute `{other}`"))),
        }),
        other => Err(render_err(format!(
            "object of type {} has no attribute `{name}`",
            other.type_name()
        ))),
    }
}

fn get_item(target: &RValue, index: &RValue) -> Result<RValue, TemplateError> {
    match (target, index) {
        (RValue::Row(_), RValue::Str(key)) => get_attr(target, key),
        (RValue::Row(_), other) => Err(render_err(format!(
            "row fields are looked up by column name, not {}",
            other.type_name()
        ))),
        (RValue::Loop(_), RValue::Str(key)) => get_attr(target, key),
        (RValue::List(items), RValue::Int(i)) => py_index(items.len(), *i)
            .map(|i| items[i].clone())
            .ok_or_else(|| render_err("list index out of range")),
        (RValue::Str(s), RValue::Int(i)) => {
            let chars: Vec<char> = s.chars().collect();
            py_index(chars.len(), *i)
                .map(|i| RValue::Str(chars[i].to_string().into()))
                .ok_or_else(|| render_err("string index out of range"))
        }
        (t, i) => Err(render_err(format!(
            "object of type {} cannot be indexed by {}",
            t.type_name(),
            i.type_name()
        ))),
    }
}

fn py_index(len: usize, i: i64) -> Option<usize> {
    let idx = if i < 0 { len as i64 + i } else { i };
    (0..len as i64).contains(&idx).then_some(idx as usize)
}

fn compare(op: CompareOp, l: &RValue, r: &RValue) -> Result<bool, TemplateError> {
    use std::cmp::Ordering;
    let ordered = |want: &dyn Fn(Ordering) -> bool| -> Result<bool, TemplateError> {
        let ord = match (l, r) {
            (RValue::Str(a), RValue::Str(b)) => Some(a.cmp(b)),
            _ => match (l.as_number(), r.as_number()) {
                (Some(a), Some(b)) => a.partial_cmp(&b),
                _ => {
                    return Err(render_err(format!(
                        "cannot order {} against {}",
                        l.type_name(),
                        r.type_name()
                    )))
                }
            },
        };
        Ok(ord.is_some_and(want))
    };
    match op {
        CompareOp::Eq => Ok(l.equals(r)),
        CompareOp::Ne => Ok(!l.equals(r)),
        CompareOp::Lt => ordered(&|o| o == Ordering::Less),
        CompareOp::Le => ordered(&|o| o != Ordering::Greater),
        CompareOp::Gt => ordered(&|o| o == Ordering::Greater),
        CompareOp::Ge => ordered(&|o| o != Ordering::Less),
        CompareOp::In | CompareOp::NotIn => {
            let found = match (l, r) {
                (RValue::Str(needle), RValue::Str(hay)) => hay.contains(needle.as_ref()),
                (_, RValue::List(items)) => items.iter().any(|i| i.equals(l)),
                (RValue::Str(key), RValue::Row(row)) => row.get(key).is_some(),
                (_, RValue::Row(_)) => false,
                _ => {
                    return Err(render_err(format!(
                        "`in` needs a container, got {}",
                        r.type_name()
                    )))
                }
            };
            Ok(if op == CompareOp::In { found } else { !found })
        }
    }
}
