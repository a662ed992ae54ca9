//! Template source to AST.
//!
//! Two levels: [`segments`] splits the source into text and tags (applying
//! `-` whitespace control), then a recursive-descent parser turns tag
//! contents into [`Node`]s and [`Expr`]s.

use super::ast::{CompareOp, Expr, Filter, Literal, Node};
use super::TemplateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TagKind {
    Output,
    Block,
}

#[derive(Debug)]
enum Segment {
    Text(String),
    Tag {
        kind: TagKind,
        body: String,
        line: usize,
    },
}

fn syntax(line: usize, reason: impl Into<String>) -> TemplateError {
    TemplateError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn segments(source: &str) -> Result<Vec<Segment>, TemplateError> {
    // Jinja drops a single trailing newline by default.
    let source = source.strip_suffix('\n').unwrap_or(source);
    let mut out = Vec::new();
    let mut text = String::new();
    let mut rest = source;
    let mut line = 1usize;
    let mut strip_next = false;

    loop {
        let open = ["{{", "{%", "{#"]
            .iter()
            .filter_map(|o| rest.find(o).map(|i| (i, *o)))
            .min_by_key(|(i, _)| *i);
        let Some((idx, opener)) = open else {
            push_text(&mut out, &mut text, rest, strip_next);
            break;
        };
        let before = &rest[..idx];
        let after_open = &rest[idx + 2..];
        let trim_left = after_open.starts_with('-');
        let mut chunk = before.to_string();
        if strip_next {
            chunk = chunk.trim_start().to_string();
        }
        if trim_left {
            chunk = chunk.trim_end().to_string();
        }
        text.push_str(&chunk);
        line += before.matches('\n').count();
        let tag_line = line;

        let closer = match opener {
            "{{" => "}}",
            "{%" => "%}",
            _ => "#}",
        };
        let inner_start = if trim_left { 1 } else { 0 };
        let Some(close_idx) = after_open.find(closer) else {
            return Err(syntax(tag_line, format!("unclosed `{opener}`")));
        };
        let mut body = &after_open[inner_start..close_idx];
        let trim_right = body.ends_with('-') && !(opener == "{#" && body.is_empty());
        if trim_right {
            body = &body[..body.len() - 1];
        }
        line += after_open[..close_idx + 2].matches('\n').count();
        rest = &after_open[close_idx + 2..];
        strip_next = trim_right;

        if opener == "{#" {
            continue;
        }
        if !text.is_empty() {
            out.push(Segment::Text(std::mem::take(&mut text)));
        }
        out.push(Segment::Tag {
            kind: if opener == "{{" {
                TagKind::Output
            } else {
                TagKind::Block
            },
            body: body.to_string(),
            line: tag_line,
        });
    }
    Ok(out)
}

fn push_text(out: &mut Vec<Segment>, text: &mut String, rest: &str, strip: bool) {
    if strip {
        text.push_str(rest.trim_start());
    } else {
        text.push_str(rest);
    }
    if !text.is_empty() {
        out.push(Segment::Text(std::mem::take(text)));
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    Op(&'static str),
}

const OPERATORS: [&str; 20] = [
    "==", "!=", "<=", ">=", "**", "//", "<", ">", "|", "(", ")", "[", "]", ".", ",", "=", "+",
    "-", "*", "/",
];
const UNSUPPORTED_CHARS: [char; 5] = ['%', '~', '{', '}', ':'];

fn tokenize(src: &str, line: usize) -> Result<Vec<Tok>, TemplateError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                i += 1;
            }
            let mut is_float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            if is_float {
                let v = text
                    .parse()
                    .map_err(|_| syntax(line, format!("bad number `{text}`")))?;
                toks.push(Tok::Float(v));
            } else {
                let v = text
                    .parse()
                    .map_err(|_| syntax(line, format!("integer `{text}` out of range")))?;
                toks.push(Tok::Int(v));
            }
        } else if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(syntax(line, "unterminated string literal"));
                };
                i += 1;
                if ch == quote {
                    break;
                }
                if ch == '\\' {
                    let Some(&esc) = chars.get(i) else {
                        return Err(syntax(line, "unterminated string literal"));
                    };
                    i += 1;
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        other => other,
                    });
                } else {
                    s.push(ch);
                }
            }
            toks.push(Tok::Str(s));
        } else if let Some(op) = OPERATORS
            .iter()
            .find(|op| chars[i..].iter().take(op.len()).copied().eq(op.chars()))
        {
            i += op.len();
            toks.push(Tok::Op(op));
        } else if UNSUPPORTED_CHARS.contains(&c) {
            return Err(TemplateError::UnsupportedConstruct(format!("operator `{c}`")));
        } else {
            return Err(syntax(line, format!("unexpected character `{c}`")));
        }
    }
    Ok(toks)
}

struct ExprParser {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
}

impl ExprParser {
    fn new(src: &str, line: usize) -> Result<Self, TemplateError> {
        Ok(Self {
            toks: tokenize(src, line)?,
            pos: 0,
            line,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == word)
    }

    fn peek_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect_op(&mut self, op: &str) -> Result<(), TemplateError> {
        match self.next() {
            Some(Tok::Op(o)) if o == op => Ok(()),
            other => Err(syntax(
                self.line,
                format!("expected `{op}`, found {}", describe(other.as_ref())),
            )),
        }
    }

    fn expect_ident(&mut self) -> Result<String, TemplateError> {
        match self.next() {
            Some(Tok::Ident(w)) => Ok(w),
            other => Err(syntax(
                self.line,
                format!("expected a name, found {}", describe(other.as_ref())),
            )),
        }
    }

    fn finish(&self) -> Result<(), TemplateError> {
        match self.peek() {
            None => Ok(()),
            Some(Tok::Ident(w)) if w == "if" => {
                Err(TemplateError::UnsupportedConstruct("inline if expression".into()))
            }
            Some(Tok::Ident(w)) if w == "is" => {
                Err(TemplateError::UnsupportedConstruct("tests (`is`)".into()))
            }
            Some(t) => Err(syntax(
                self.line,
                format!("unexpected {} after expression", describe(Some(t))),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, TemplateError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.and_expr()?;
        while self.peek_ident("or") {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.not_expr()?;
        while self.peek_ident("and") {
            self.pos += 1;
            let rhs = self.not_expr()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, TemplateError> {
        if self.peek_ident("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.compare()
    }

    fn compare(&mut self) -> Result<Expr, TemplateError> {
        let lhs = self.postfix()?;
        let op = match self.peek() {
            Some(Tok::Op("==")) => CompareOp::Eq,
            Some(Tok::Op("!=")) => CompareOp::Ne,
            Some(Tok::Op("<")) => CompareOp::Lt,
            Some(Tok::Op("<=")) => CompareOp::Le,
            Some(Tok::Op(">")) => CompareOp::Gt,
            Some(Tok::Op(">=")) => CompareOp::Ge,
            Some(Tok::Ident(w)) if w == "in" => CompareOp::In,
            Some(Tok::Ident(w))
                if w == "not"
                    && matches!(self.toks.get(self.pos + 1), Some(Tok::Ident(n)) if n == "in") =>
            {
                self.pos += 1;
                CompareOp::NotIn
            }
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.postfix()?;
        if matches!(
            self.peek(),
            Some(Tok::Op("==" | "!=" | "<" | "<=" | ">" | ">="))
        ) {
            return Err(TemplateError::UnsupportedConstruct(
                "chained comparison".into(),
            ));
        }
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)))
    }

    fn postfix(&mut self) -> Result<Expr, TemplateError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Some(Tok::Op(".")) => {
                    self.pos += 1;
                    match self.next() {
                        Some(Tok::Ident(name)) => e = Expr::Attr(Box::new(e), name),
                        Some(Tok::Int(i)) => {
                            e = Expr::Index(Box::new(e), Box::new(Expr::Literal(Literal::Int(i))))
                        }
                        other => {
                            return Err(syntax(
                                self.line,
                                format!("expected attribute name, found {}", describe(other.as_ref())),
                            ))
                        }
                    }
                }
                Some(Tok::Op("[")) => {
                    self.pos += 1;
                    let idx = self.expr()?;
                    if self.peek_op(":") {
                        return Err(TemplateError::UnsupportedConstruct("slicing".into()));
                    }
                    self.expect_op("]")?;
                    e = Expr::Index(Box::new(e), Box::new(idx));
                }
                Some(Tok::Op("|")) => {
                    self.pos += 1;
                    let filter = self.filter()?;
                    e = Expr::Filter(Box::new(e), filter);
                }
                Some(Tok::Op("(")) => {
                    return Err(TemplateError::UnsupportedConstruct("function call".into()))
                }
                Some(Tok::Op(op @ ("+" | "-" | "*" | "/" | "**" | "//"))) => {
                    return Err(TemplateError::UnsupportedConstruct(format!(
                        "arithmetic operator `{op}`"
                    )))
                }
                _ => return Ok(e),
            }
        }
    }

    fn filter(&mut self) -> Result<Filter, TemplateError> {
        let name = self.expect_ident()?;
        let has_args = self.peek_op("(");
        match name.as_str() {
            "length" | "count" | "unique" | "list" if has_args => Err(
                TemplateError::UnsupportedConstruct(format!("arguments to filter `{name}`")),
            ),
            "length" | "count" => Ok(Filter::Length),
            "unique" => Ok(Filter::Unique),
            "list" => Ok(Filter::List),
            "join" => {
                if !has_args {
                    return Ok(Filter::Join(None));
                }
                self.pos += 1;
                if self.peek_op(")") {
                    self.pos += 1;
                    return Ok(Filter::Join(None));
                }
                if matches!(self.toks.get(self.pos + 1), Some(Tok::Op("="))) {
                    let kw = self.expect_ident()?;
                    if kw != "d" {
                        return Err(TemplateError::UnsupportedConstruct(format!(
                            "join argument `{kw}`"
                        )));
                    }
                    self.pos += 1;
                }
                let sep = self.expr()?;
                self.expect_op(")")?;
                Ok(Filter::Join(Some(Box::new(sep))))
            }
            "map" => {
                if !has_args {
                    return Err(syntax(self.line, "filter `map` needs attribute=..."));
                }
                self.pos += 1;
                match (self.next(), self.next(), self.next()) {
                    (Some(Tok::Ident(kw)), Some(Tok::Op("=")), Some(Tok::Str(attr)))
                        if kw == "attribute" =>
                    {
                        self.expect_op(")")?;
                        Ok(Filter::MapAttribute(attr))
                    }
                    _ => Err(TemplateError::UnsupportedConstruct(
                        "map without a literal attribute=\"...\"".into(),
                    )),
                }
            }
            other => Err(TemplateError::UnsupportedConstruct(format!(
                "filter `{other}`"
            ))),
        }
    }

    fn primary(&mut self) -> Result<Expr, TemplateError> {
        match self.next() {
            Some(Tok::Ident(w)) => Ok(match w.as_str() {
                "true" | "True" => Expr::Literal(Literal::Bool(true)),
                "false" | "False" => Expr::Literal(Literal::Bool(false)),
                "none" | "None" => Expr::Literal(Literal::None),
                "not" | "and" | "or" | "in" | "if" | "else" | "is" => {
                    return Err(syntax(self.line, format!("unexpected keyword `{w}`")))
                }
                _ => Expr::Name(w),
            }),
            Some(Tok::Str(s)) => Ok(Expr::Literal(Literal::Str(s))),
            Some(Tok::Int(i)) => Ok(Expr::Literal(Literal::Int(i))),
            Some(Tok::Float(f)) => Ok(Expr::Literal(Literal::Float(f))),
            Some(Tok::Op("(")) => {
                let e = self.expr()?;
                if self.peek_op(",") {
                    return Err(TemplateError::UnsupportedConstruct("tuple literal".into()));
                }
                self.expect_op(")")?;
                Ok(e)
            }
            Some(Tok::Op("[")) => Err(TemplateError::UnsupportedConstruct("list literal".into())),
            Some(Tok::Op("-")) => match self.next() {
                Some(Tok::Int(i)) => Ok(Expr::Literal(Literal::Int(-i))),
                Some(Tok::Float(f)) => Ok(Expr::Literal(Literal::Float(-f))),
                _ => Err(TemplateError::UnsupportedConstruct(
                    "arithmetic operator `-`".into(),
                )),
            },
            other => Err(syntax(
                self.line,
                format!("expected an expression, found {}", describe(other.as_ref())),
            )),
        }
    }
}

fn describe(tok: Option<&Tok>) -> String {
    match tok {
        None => "end of tag".into(),
        Some(Tok::Ident(w)) => format!("`{w}`"),
        Some(Tok::Str(_)) => "string literal".into(),
        Some(Tok::Int(_)) | Some(Tok::Float(_)) => "number".into(),
        Some(Tok::Op(o)) => format!("`{o}`"),
    }
}

fn parse_expr_tag(body: &str, line: usize) -> Result<Expr, TemplateError> {
    let mut p = ExprParser::new(body, line)?;
    if p.toks.is_empty() {
        return Err(syntax(line, "empty expression"));
    }
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// What closed a node list.
#[derive(Debug)]
enum Terminator {
    Eof,
    Tag { keyword: String, rest: String, line: usize },
}

const UNSUPPORTED_BLOCKS: [&str; 13] = [
    "macro", "call", "include", "import", "from", "extends", "block", "filter", "raw", "with",
    "autoescape", "do", "break",
];

struct Parser {
    segs: std::vec::IntoIter<Segment>,
}

fn split_keyword(body: &str) -> (String, String) {
    let body = body.trim();
    let end = body
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(body.len());
    (body[..end].to_string(), body[end..].trim().to_string())
}

impl Parser {
    fn nodes(&mut self) -> Result<(Vec<Node>, Terminator), TemplateError> {
        let mut out = Vec::new();
        while let Some(seg) = self.segs.next() {
            match seg {
                Segment::Text(t) => out.push(Node::Text(t)),
                Segment::Tag {
                    kind: TagKind::Output,
                    body,
                    line,
                } => out.push(Node::Output(parse_expr_tag(&body, line)?)),
                Segment::Tag {
                    kind: TagKind::Block,
                    body,
                    line,
                } => {
                    let (keyword, rest) = split_keyword(&body);
                    match keyword.as_str() {
                        "for" => out.push(self.for_block(&rest, line)?),
                        "if" => out.push(self.if_block(&rest, line)?),
                        "set" => out.push(parse_set(&rest, line)?),
                        "endfor" | "endif" | "elif" | "else" => {
                            return Ok((out, Terminator::Tag { keyword, rest, line }))
                        }
                        "" => return Err(syntax(line, "empty block tag")),
                        k if UNSUPPORTED_BLOCKS.contains(&k) || k == "continue" => {
                            return Err(TemplateError::UnsupportedConstruct(format!(
                                "`{{% {k} %}}` block"
                            )))
                        }
                        k => return Err(syntax(line, format!("unknown tag `{k}`"))),
                    }
                }
            }
        }
        Ok((out, Terminator::Eof))
    }

    fn for_block(&mut self, rest: &str, line: usize) -> Result<Node, TemplateError> {
        let mut p = ExprParser::new(rest, line)?;
        let var = p.expect_ident()?;
        if p.peek_op(",") {
            return Err(TemplateError::UnsupportedConstruct(
                "tuple unpacking in for".into(),
            ));
        }
        if !p.peek_ident("in") {
            return Err(syntax(line, "expected `in` in for loop"));
        }
        p.pos += 1;
        let iter = p.expr()?;
        if p.peek_ident("if") {
            return Err(TemplateError::UnsupportedConstruct("loop filter (`for ... if`)".into()));
        }
        if p.peek_ident("recursive") {
            return Err(TemplateError::UnsupportedConstruct("recursive loop".into()));
        }
        p.finish()?;
        let (body, term) = self.nodes()?;
        match term {
            Terminator::Tag { keyword, rest, line } if keyword == "endfor" => {
                no_trailing(&rest, line, "endfor")?;
                Ok(Node::For { var, iter, body })
            }
            Terminator::Tag { keyword, .. } if keyword == "else" => {
                Err(TemplateError::UnsupportedConstruct("for-else".into()))
            }
            Terminator::Tag { keyword, line, .. } => {
                Err(syntax(line, format!("unexpected `{keyword}` inside for loop")))
            }
            Terminator::Eof => Err(syntax(line, "for loop is never closed with endfor")),
        }
    }

    fn if_block(&mut self, cond: &str, line: usize) -> Result<Node, TemplateError> {
        let mut branches = Vec::new();
        let mut cond = parse_expr_tag(cond, line)?;
        loop {
            let (body, term) = self.nodes()?;
            branches.push((cond, body));
            match term {
                Terminator::Tag { keyword, rest, line } => match keyword.as_str() {
                    "endif" => {
                        no_trailing(&rest, line, "endif")?;
                        return Ok(Node::If {
                            branches,
                            otherwise: None,
                        });
                    }
                    "elif" => cond = parse_expr_tag(&rest, line)?,
                    "else" => {
                        no_trailing(&rest, line, "else")?;
                        let (body, term) = self.nodes()?;
                        return match term {
                            Terminator::Tag { keyword, rest, line } if keyword == "endif" => {
                                no_trailing(&rest, line, "endif")?;
                                Ok(Node::If {
                                    branches,
                                    otherwise: Some(body),
                                })
                            }
                            Terminator::Tag { keyword, line, .. } => Err(syntax(
                                line,
                                format!("unexpected `{keyword}` after else"),
                            )),
                            Terminator::Eof => Err(syntax(line, "if block is never closed")),
                        };
                    }
                    k => return Err(syntax(line, format!("unexpected `{k}` inside if block"))),
                },
                Terminator::Eof => return Err(syntax(line, "if block is never closed with endif")),
            }
        }
    }
}

fn no_trailing(rest: &str, line: usize, keyword: &str) -> Result<(), TemplateError> {
    if rest.is_empty() {
        Ok(())
    } else {
        Err(syntax(line, format!("unexpected text after `{keyword}`")))
    }
}

fn parse_set(rest: &str, line: usize) -> Result<Node, TemplateError> {
    let mut p = ExprParser::new(rest, line)?;
    let name = p.expect_ident()?;
    if p.peek_op(",") || p.peek_op(".") || p.peek_op("[") {
        return Err(TemplateError::UnsupportedConstruct(
            "set with a non-name target".into(),
        ));
    }
    if p.peek().is_none() {
        return Err(TemplateError::UnsupportedConstruct("block set".into()));
    }
    p.expect_op("=")?;
    let value = p.expr()?;
    p.finish()?;
    Ok(Node::Set { name, value })
}

pub(crate) fn parse(source: &str) -> Result<Vec<Node>, TemplateError> {
    let mut parser = Parser {
        segs: segments(source)?.into_iter(),
    };
    let (nodes, term) = parser.nodes()?;
    match term {
        Terminator::Eof => Ok(nodes),
        Terminator::Tag { keyword, line, .. } => {
            Err(syntax(line, format!("`{keyword}` without a matching opening tag")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(src: &str) -> TemplateError {
        parse(src).unwrap_err()
    }

    #[test]
    fn plain_text_round_trips() {
        assert_eq!(parse("hello").unwrap(), vec![Node::Text("hello".into())]);
        assert_eq!(parse("").unwrap(), vec![]);
    }

    #[test]
    fn trailing_newline_is_dropped_once() {
        assert_eq!(parse("a\n\n").unwrap(), vec![Node::Text("a\n".into())]);
    }

    #[test]
    fn whitespace_control_strips_neighbouring_text() {
        let nodes = parse("a  \n{%- if x -%}\n  b  {%- endif %}").unwrap();
        let Node::If { branches, .. } = &nodes[1] else {
            panic!("{nodes:?}")
        };
        assert_eq!(nodes[0], Node::Text("a".into()));
        assert_eq!(branches[0].1, vec![Node::Text("b".into())]);
    }

    #[test]
    fn comments_vanish() {
        assert_eq!(parse("a{# note #}b").unwrap(), vec![Node::Text("ab".into())]);
        assert_eq!(parse("a {#- x -#} b").unwrap(), vec![Node::Text("ab".into())]);
    }

    #[test]
    fn filters_bind_tighter_than_comparison() {
        let nodes = parse("{% if values|length > 0 %}y{% endif %}").unwrap();
        let Node::If { branches, .. } = &nodes[0] else {
            panic!()
        };
        assert!(matches!(
            &branches[0].0,
            Expr::Compare(CompareOp::Gt, lhs, _) if matches!(**lhs, Expr::Filter(_, Filter::Length))
        ));
    }

    #[test]
    fn set_and_map() {
        let nodes = parse(r#"{% set n = values|map(attribute="Name")|unique|list %}"#).unwrap();
        assert!(matches!(&nodes[0], Node::Set { name, .. } if name == "n"));
    }

    #[test]
    fn not_in() {
        let nodes = parse("{{ 'a' not in row }}").unwrap();
        assert!(matches!(&nodes[0], Node::Output(Expr::Compare(CompareOp::NotIn, _, _))));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        match err("a\nb\n{% for x in %}") {
            TemplateError::Syntax { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
        assert!(matches!(err("{% if x %}"), TemplateError::Syntax { line: 1, .. }));
        assert!(matches!(err("{{ x"), TemplateError::Syntax { .. }));
        assert!(matches!(err("{% endfor %}"), TemplateError::Syntax { .. }));
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for src in [
            "{{ x + 1 }}",
            "{{ x|upper }}",
            "{{ x is defined }}",
            "{% macro m() %}{% endmacro %}",
            "{% for a in b %}{% else %}{% endfor %}",
            "{{ range(3) }}",
            "{{ a if b else c }}",
            "{{ x % 2 }}",
            "{{ [1, 2] }}",
            "{% for a in b if a %}{% endfor %}",
        ] {
            assert!(
                matches!(parse(src), Err(TemplateError::UnsupportedConstruct(_))),
                "{src}: {:?}",
                parse(src)
            );
        }
    }
}
