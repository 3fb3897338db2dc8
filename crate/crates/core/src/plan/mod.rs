//! Contraction plans: a tree over diagram slots plus the list of sliced legs,
//! and the cost model evaluated over them.

mod cost;
mod tree;

pub use cost::{
    objective_from_parts, AnnotatedPlan, CostConfig, Multiplicity, NodeCost, Proposal, Workload,
};
pub use tree::{NodeId, RewriteShape, Rule, Tree};

use crate::error::{Error, Result};
use crate::tensor::LegId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub tree: Tree,
    pub sliced: Vec<LegId>,
}

impl Plan {
    pub fn new(tree: Tree) -> Plan {
        Plan {
            tree,
            sliced: Vec::new(),
        }
    }

    pub fn left_deep(num_slots: usize) -> Result<Plan> {
        Ok(Plan::new(Tree::left_deep(num_slots)?))
    }

    /// Two-line plan file: the tree expression, then `slice:` and the sliced
    /// leg ids.
    pub fn to_text(&self) -> String {
        let mut s = self.tree.to_expr();
        s.push_str("\nslice:");
        for l in &self.sliced {
            s.push(' ');
            s.push_str(&l.to_string());
        }
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Plan> {
        let mut lines = text.lines();
        let expr = lines.next().ok_or(Error::PlanSyntax {
            pos: 0,
            msg: "empty plan".into(),
        })?;
        let tree = Tree::parse_expr(expr)?;
        let offset = expr.len() + 1;
        let mut sliced = Vec::new();
        if let Some(line) = lines.next() {
            let rest = line
                .strip_prefix("slice:")
                .ok_or_else(|| Error::PlanSyntax {
                    pos: offset,
                    msg: "expected 'slice:'".into(),
                })?;
            for tok in rest.split_whitespace() {
                let id = tok.parse().map_err(|_| Error::PlanSyntax {
                    pos: offset,
                    msg: format!("bad sliced leg '{tok}'"),
                })?;
                if sliced.contains(&id) {
                    return Err(Error::PlanSyntax {
                        pos: offset,
                        msg: format!("leg {id} sliced twice"),
                    });
                }
                sliced.push(id);
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::PlanSyntax {
                pos: offset,
                msg: "trailing content after slice line".into(),
            });
        }
        Ok(Plan { tree, sliced })
    }
}
