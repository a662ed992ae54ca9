//! Static usage analysis.
//!
//! Every expression is mapped to the set of abstract kinds its runtime value
//! may have: the row list of binding `b`, a row of `b`, a list of cells taken
//! from `b`, or anything else. Sets only ever grow, so the analysis
//! over-approximates and every field the renderer could look up on a row is
//! recorded.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::{Expr, Filter, Literal, Node};
use super::binding_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Rows(usize),
    Row(usize),
    Column(usize),
    Other,
}

type Kinds = BTreeSet<Kind>;

fn other() -> Kinds {
    BTreeSet::from([Kind::Other])
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub(crate) struct Usage {
    /// Field names looked up on rows, per binding index.
    pub fields: BTreeMap<usize, BTreeSet<String>>,
    /// Bindings referenced anywhere.
    pub bindings: BTreeSet<usize>,
    /// Bindings whose rows (or cells) are iterated.
    pub iterated: BTreeSet<usize>,
    /// Bindings printed whole or indexed by position.
    pub scalar_used: BTreeSet<usize>,
    pub dynamic_access: bool,
    pub undefined_names: BTreeSet<String>,
}

struct Analyzer {
    scopes: Vec<HashMap<String, Kinds>>,
    usage: Usage,
}

pub(crate) fn analyze(nodes: &[Node]) -> Usage {
    let mut a = Analyzer {
        scopes: vec![HashMap::new()],
        usage: Usage::default(),
    };
    a.nodes(nodes);
    a.usage
}

impl Analyzer {
    fn nodes(&mut self, nodes: &[Node]) {
        for node in nodes {
            match node {
                Node::Text(_) => {}
                Node::Output(e) => {
                    for k in self.expr(e) {
                        if let Kind::Rows(b) = k {
                            self.usage.scalar_used.insert(b);
                        }
                    }
                }
                Node::Set { name, value } => {
                    let mut kinds = self.expr(value);
                    if let Some(prev) = self.visible(name) {
                        kinds.extend(prev);
                    }
                    self.scopes
                        .last_mut()
                        .expect("scope")
                        .insert(name.clone(), kinds);
                }
                Node::If {
                    branches,
                    otherwise,
                } => {
                    for (cond, body) in branches {
                        self.expr(cond);
                        self.nodes(body);
                    }
                    if let Some(body) = otherwise {
                        self.nodes(body);
                    }
                }
                Node::For { var, iter, body } => {
                    let mut item = Kinds::new();
                    for k in self.expr(iter) {
                        match k {
                            Kind::Rows(b) => {
                                self.usage.iterated.insert(b);
                                item.insert(Kind::Row(b));
                            }
                            Kind::Column(b) => {
                                self.usage.iterated.insert(b);
                                item.insert(Kind::Other);
                            }
                            Kind::Row(_) | Kind::Other => {
                                item.insert(Kind::Other);
                            }
                        }
                    }
                    let mut scope = HashMap::new();
                    scope.insert(var.clone(), item);
                    scope.insert("loop".to_string(), other());
                    self.scopes.push(scope);
                    self.nodes(body);
                    self.scopes.pop();
                }
            }
        }
    }

    fn visible(&self, name: &str) -> Option<Kinds> {
        self.scopes.iter().rev().find_map(|s| s.get(name)).cloned()
    }

    fn lookup(&mut self, name: &str) -> Kinds {
        if let Some(k) = self.visible(name) {
            for kind in &k {
                if let Kind::Rows(b) = kind {
                    self.usage.bindings.insert(*b);
                }
            }
            return k;
        }
        match binding_index(name) {
            Some(b) => {
                self.usage.bindings.insert(b);
                BTreeSet::from([Kind::Rows(b)])
            }
            None => {
                self.usage.undefined_names.insert(name.to_string());
                other()
            }
        }
    }

    fn field(&mut self, binding: usize, name: &str) {
        self.usage
            .fields
            .entry(binding)
            .or_default()
            .insert(name.to_string());
    }

    fn expr(&mut self, e: &Expr) -> Kinds {
        match e {
            Expr::Literal(_) => other(),
            Expr::Name(n) => self.lookup(n),
            Expr::Attr(target, name) => {
                for k in self.expr(target) {
                    if let Kind::Row(b) = k {
                        self.field(b, name);
                    }
                }
                other()
            }
            Expr::Index(target, idx) => {
                let targets = self.expr(target);
                self.expr(idx);
                let mut out = Kinds::new();
                for k in targets {
                    match (k, idx.as_ref()) {
                        (Kind::Row(b), Expr::Literal(Literal::Str(s))) => {
                            self.field(b, s);
                            out.insert(Kind::Other);
                        }
                        (Kind::Row(_), Expr::Literal(_)) => {
                            out.insert(Kind::Other);
                        }
                        (Kind::Row(_), _) => {
                            self.usage.dynamic_access = true;
                            out.insert(Kind::Other);
                        }
                        (Kind::Rows(b), _) => {
                            self.usage.scalar_used.insert(b);
                            out.insert(Kind::Row(b));
                        }
                        _ => {
                            out.insert(Kind::Other);
                        }
                    }
                }
                out
            }
            Expr::Filter(target, f) => {
                let targets = self.expr(target);
                match f {
                    Filter::Length => other(),
                    Filter::Join(sep) => {
                        if let Some(sep) = sep {
                            self.expr(sep);
                        }
                        other()
                    }
                    Filter::List | Filter::Unique => targets
                        .into_iter()
                        .map(|k| match k {
                            Kind::Rows(_) | Kind::Column(_) => k,
                            _ => Kind::Other,
                        })
                        .collect(),
                    Filter::MapAttribute(attr) => {
                        let mut out = Kinds::new();
                        for k in targets {
                            match k {
                                Kind::Rows(b) => {
                                    self.field(b, attr);
                                    out.insert(Kind::Column(b));
                                }
                                _ => {
                                    out.insert(Kind::Other);
                                }
                            }
                        }
                        out
                    }
                }
            }
            Expr::Not(inner) => {
                self.expr(inner);
                other()
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                let mut k = self.expr(a);
                k.extend(self.expr(b));
                k
            }
            Expr::Compare(_, a, b) => {
                self.expr(a);
                self.expr(b);
                other()
            }
        }
    }
}
