//! Binary contraction trees over diagram slots.
//!
//! Leaf `j` always has node id `j`; internal nodes use ids `m..2m-1`. The
//! local rewrites keep both the node being rewritten and its inner child in
//! place and only move the three subtrees around, so ids stay stable.

use crate::error::{Error, Result};
use std::fmt;

pub type NodeId = usize;

/// The four local associativity/commutativity rewrites.
///
/// Each rule is its own inverse when applied again at the same node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `(a*b)*c -> (c*b)*a`
    R1,
    /// `(a*b)*c -> (a*c)*b`
    R2,
    /// `a*(b*c) -> c*(b*a)`
    R3,
    /// `a*(b*c) -> b*(a*c)`
    R4,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::R1, Rule::R2, Rule::R3, Rule::R4];

    /// Rule by its 1-based number.
    pub fn from_number(n: u8) -> Option<Rule> {
        Rule::ALL.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// Whether the pattern's inner product is the left child.
    pub fn inner_is_left(self) -> bool {
        matches!(self, Rule::R1 | Rule::R2)
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    num_leaves: usize,
    children: Vec<[NodeId; 2]>,
    parent: Vec<Option<NodeId>>,
    root: NodeId,
}

impl Tree {
    /// Single-leaf tree.
    pub fn leaf() -> Tree {
        Tree {
            num_leaves: 1,
            children: Vec::new(),
            parent: vec![None],
            root: 0,
        }
    }

    /// `((X0 * X1) * X2) * ...` over `m` slots.
    pub fn left_deep(m: usize) -> Result<Tree> {
        if m == 0 {
            return Err(Error::Empty("contraction tree needs at least one slot"));
        }
        let mut tree = Tree {
            num_leaves: m,
            children: Vec::new(),
            parent: vec![None; 2 * m - 1],
            root: 0,
        };
        let mut acc = 0;
        for j in 1..m {
            acc = tree.push_inner(acc, j);
        }
        tree.root = acc;
        Ok(tree)
    }

    /// Builds a tree from internal-node children listed in creation order
    /// (node `m + i` has children `pairs[i]`). The last pair is the root.
    pub fn from_pairs(num_leaves: usize, pairs: &[[NodeId; 2]]) -> Result<Tree> {
        if num_leaves == 0 {
            return Err(Error::Empty("contraction tree needs at least one slot"));
        }
        if pairs.len() + 1 != num_leaves {
            return Err(Error::PlanMismatch(format!(
                "{} contractions for {} leaves",
                pairs.len(),
                num_leaves
            )));
        }
        let mut tree = Tree {
            num_leaves,
            children: Vec::new(),
            parent: vec![None; 2 * num_leaves - 1],
            root: 0,
        };
        for (i, &[l, r]) in pairs.iter().enumerate() {
            let id = num_leaves + i;
            for c in [l, r] {
                if c >= id || tree.parent[c].is_some() {
                    return Err(Error::PlanMismatch(format!(
                        "node {c} cannot be a child of node {id}"
                    )));
                }
            }
            tree.push_inner(l, r);
        }
        tree.root = 2 * num_leaves - 2;
        Ok(tree)
    }

    fn push_inner(&mut self, l: NodeId, r: NodeId) -> NodeId {
        let id = self.num_leaves + self.children.len();
        self.children.push([l, r]);
        self.parent[l] = Some(id);
        self.parent[r] = Some(id);
        id
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        n < self.num_leaves
    }

    pub fn children(&self, n: NodeId) -> Option<(NodeId, NodeId)> {
        if self.is_leaf(n) {
            None
        } else {
            let [l, r] = self.children[n - self.num_leaves];
            Some((l, r))
        }
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent[n]
    }

    pub fn internal_nodes(&self) -> std::ops::Range<NodeId> {
        self.num_leaves..self.num_nodes()
    }

    /// Children before parents.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.num_nodes());
        let mut stack = vec![(self.root, false)];
        while let Some((n, expanded)) = stack.pop() {
            match self.children(n) {
                Some((l, r)) if !expanded => {
                    stack.push((n, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                _ => out.push(n),
            }
        }
        out
    }

    /// Slots in the order they occur from left to right.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.postorder()
            .into_iter()
            .filter(|&n| self.is_leaf(n))
            .collect()
    }

    /// Number of leaves under every node.
    pub fn leaf_counts(&self) -> Vec<usize> {
        let mut counts = vec![1; self.num_nodes()];
        for n in self.postorder() {
            if let Some((l, r)) = self.children(n) {
                counts[n] = counts[l] + counts[r];
            }
        }
        counts
    }

    /// Inner child a rule would restructure at `n`, if the pattern matches.
    pub fn inner_for(&self, n: NodeId, rule: Rule) -> Option<NodeId> {
        let (l, r) = self.children(n)?;
        let inner = if rule.inner_is_left() { l } else { r };
        (!self.is_leaf(inner)).then_some(inner)
    }

    pub fn applicable(&self, n: NodeId, rule: Rule) -> bool {
        self.inner_for(n, rule).is_some()
    }

    /// Children of `(n, inner)` after applying `rule`, without mutating.
    pub fn rewritten(&self, n: NodeId, rule: Rule) -> Result<RewriteShape> {
        let inner = self.inner_for(n, rule).ok_or_else(|| {
            Error::RewriteNotApplicable(format!("rule {} at node {n}", rule.number()))
        })?;
        let (l, r) = self.children(n).expect("internal");
        let (il, ir) = self.children(inner).expect("internal");
        let (inner_children, outer_children) = match rule {
            // (a*b)*c -> (c*b)*a
            Rule::R1 => ([r, ir], [inner, il]),
            // (a*b)*c -> (a*c)*b
            Rule::R2 => ([il, r], [inner, ir]),
            // a*(b*c) -> c*(b*a)
            Rule::R3 => ([il, l], [ir, inner]),
            // a*(b*c) -> b*(a*c)
            Rule::R4 => ([l, ir], [il, inner]),
        };
        Ok(RewriteShape {
            node: n,
            inner,
            inner_children,
            outer_children,
        })
    }

    /// Applies `rule` at `n`; returns the restructured inner node.
    pub fn apply(&mut self, n: NodeId, rule: Rule) -> Result<NodeId> {
        let shape = self.rewritten(n, rule)?;
        self.install(&shape);
        Ok(shape.inner)
    }

    pub(crate) fn install(&mut self, s: &RewriteShape) {
        let m = self.num_leaves;
        self.children[s.inner - m] = s.inner_children;
        self.children[s.node - m] = s.outer_children;
        for c in s.inner_children {
            self.parent[c] = Some(s.inner);
        }
        for c in s.outer_children {
            self.parent[c] = Some(s.node);
        }
    }

    /// Checks parent/child consistency and that every leaf occurs once.
    pub fn validate(&self) -> Result<()> {
        let order = self.postorder();
        if order.len() != self.num_nodes() {
            return Err(Error::PlanMismatch("tree does not reach every node".into()));
        }
        let mut seen = vec![false; self.num_nodes()];
        for &n in &order {
            if std::mem::replace(&mut seen[n], true) {
                return Err(Error::PlanMismatch(format!("node {n} reached twice")));
            }
            if let Some((l, r)) = self.children(n) {
                if self.parent[l] != Some(n) || self.parent[r] != Some(n) {
                    return Err(Error::Internal("parent links out of sync"));
                }
            }
        }
        if self.parent[self.root].is_some() {
            return Err(Error::Internal("root has a parent"));
        }
        Ok(())
    }

    /// Space-separated parenthesized expression; the root's own parentheses
    /// are dropped unless the tree is a single leaf.
    pub fn to_expr(&self) -> String {
        if self.is_leaf(self.root) {
            return format!("({})", self.root);
        }
        let (l, r) = self.children(self.root).expect("internal");
        let mut s = String::new();
        self.write_item(l, &mut s);
        s.push(' ');
        self.write_item(r, &mut s);
        s
    }

    fn write_item(&self, n: NodeId, s: &mut String) {
        use std::fmt::Write;
        match self.children(n) {
            None => write!(s, "{n}").expect("string write"),
            Some((l, r)) => {
                s.push('(');
                self.write_item(l, s);
                s.push(' ');
                self.write_item(r, s);
                s.push(')');
            }
        }
    }

    /// Parses [`Tree::to_expr`] output. A parenthesized group holds one item
    /// (itself) or two items (a contraction); the outermost group may be
    /// written without parentheses.
    pub fn parse_expr(text: &str) -> Result<Tree> {
        let mut p = ExprParser {
            src: text.as_bytes(),
            pos: 0,
        };
        let items = p.items(None)?;
        let top = p.group(items, 0)?;
        let mut leaves = Vec::new();
        top.collect_leaves(&mut leaves);
        let m = leaves.len();
        let mut seen = vec![false; m];
        for &j in &leaves {
            if j >= m {
                return Err(Error::PlanSyntax {
                    pos: 0,
                    msg: format!("leaf {j} out of range for {m} leaves"),
                });
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::PlanSyntax {
                    pos: 0,
                    msg: format!("leaf {j} appears twice"),
                });
            }
        }
        let mut tree = Tree {
            num_leaves: m,
            children: Vec::new(),
            parent: vec![None; 2 * m - 1],
            root: 0,
        };
        tree.root = tree.build(&top);
        Ok(tree)
    }

    fn build(&mut self, e: &Expr) -> NodeId {
        match e {
            Expr::Leaf(j) => *j,
            Expr::Pair(l, r) => {
                let l = self.build(l);
                let r = self.build(r);
                self.push_inner(l, r)
            }
        }
    }
}

/// Structural equality: same shape with the same leaves, regardless of the
/// ids internal nodes happen to carry.
impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.num_leaves == other.num_leaves && self.to_expr() == other.to_expr()
    }
}

impl Eq for Tree {}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_expr())
    }
}

/// New children for the two nodes touched by a rewrite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewriteShape {
    pub node: NodeId,
    pub inner: NodeId,
    pub inner_children: [NodeId; 2],
    pub outer_children: [NodeId; 2],
}

enum Expr {
    Leaf(usize),
    Pair(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Leaf(j) => out.push(*j),
            Expr::Pair(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::PlanSyntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Items up to `close` (or end of input when `close` is `None`).
    fn items(&mut self, close: Option<u8>) -> Result<Vec<Expr>> {
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            let Some(&c) = self.src.get(self.pos) else {
                if close.is_some() {
                    return self.err("unclosed '('");
                }
                return Ok(items);
            };
            match c {
                b'(' => {
                    let start = self.pos;
                    self.pos += 1;
                    let inner = self.items(Some(b')'))?;
                    items.push(self.group(inner, start)?);
                }
                b')' if close == Some(b')') => {
                    self.pos += 1;
                    return Ok(items);
                }
                b')' => return self.err("unexpected ')'"),
                b'0'..=b'9' => {
                    let start = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                    match digits.parse() {
                        Ok(j) => items.push(Expr::Leaf(j)),
                        Err(_) => {
                            return Err(Error::PlanSyntax {
                                pos: start,
                                msg: "leaf index too large".into(),
                            })
                        }
                    }
                }
                other => return self.err(format!("unexpected character '{}'", other as char)),
            }
        }
    }

    fn group(&self, mut items: Vec<Expr>, start: usize) -> Result<Expr> {
        match items.len() {
            1 => Ok(items.pop().expect("one item")),
            2 => {
                let r = items.pop().expect("two items");
                let l = items.pop().expect("two items");
                Ok(Expr::Pair(Box::new(l), Box::new(r)))
            }
            0 => Err(Error::PlanSyntax {
                pos: start,
                msg: "empty group".into(),
            }),
            n => Err(Error::PlanSyntax {
                pos: start,
                msg: format!("group of {n} items; contractions are binary"),
            }),
        }
    }
}
