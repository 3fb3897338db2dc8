//! Cost, memory and objective model over annotated plans.
//!
//! All counts are exact integers in `u128` with checked arithmetic. The only
//! floating-point annotation is the per-node `m^p` term of the memory
//! heuristic.

use super::tree::{NodeId, RewriteShape, Rule, Tree};
use super::Plan;
use crate::error::{Error, Result};
use crate::network::{AssignmentSet, NetworkDiagram};
use crate::tensor::{Leg, LegId};
use fixedbitset::FixedBitSet;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig {
    /// Weight of memory traffic against arithmetic.
    pub alpha: f64,
    /// Penalty per doubling of memory over budget.
    pub beta: f64,
    /// Memory budget in bytes.
    pub m_max: f64,
    /// Exponent of the node-size norm in the memory heuristic.
    pub p: f64,
    /// Request count used by the bound multiplicities.
    pub k: u64,
    pub bytes_per_scalar: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            alpha: 16.0,
            beta: 8.0,
            m_max: (8u64 << 30) as f64,
            p: 4.0,
            k: 1,
            bytes_per_scalar: 16,
        }
    }
}

impl CostConfig {
    pub fn with_k(self, k: u64) -> Self {
        CostConfig { k, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        if !(self.m_max > 0.0 && self.m_max.is_finite()) {
            return bad("memory budget must be positive");
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad("p must be at least 1");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.bytes_per_scalar == 0 {
            return bad("bytes per scalar must be positive");
        }
        Ok(())
    }
}

/// How per-node evaluation counts `k_T` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    /// `min(|V_j|, k)` at leaves and `min(k_L k_R, k)` above.
    Bound,
    /// Number of distinct request tuples restricted to the node's slots.
    /// Requires the workload to carry request tuples.
    Exact,
}

/// What the cost model needs to know about a diagram and its requests.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    slot_legs: Vec<Vec<Leg>>,
    leg_dims: Vec<usize>,
    output: FixedBitSet,
    value_counts: Vec<u64>,
    tuples: Option<Vec<Vec<u32>>>,
}

impl Workload {
    /// `slot_legs[j]` are the legs slot `j` carries in every request;
    /// `output_legs` are the diagram's open legs, which may never be sliced.
    pub fn new(
        slot_legs: Vec<Vec<Leg>>,
        output_legs: &[LegId],
        value_counts: Vec<u64>,
        tuples: Option<Vec<Vec<u32>>>,
    ) -> Result<Workload> {
        if slot_legs.is_empty() {
            return Err(Error::Empty("workload has no slots"));
        }
        if value_counts.len() != slot_legs.len() || value_counts.contains(&0) {
            return Err(Error::PlanMismatch(
                "one positive value count per slot required".into(),
            ));
        }
        let num_legs = slot_legs
            .iter()
            .flatten()
            .map(|l| l.id as usize + 1)
            .chain(output_legs.iter().map(|&l| l as usize + 1))
            .max()
            .unwrap_or(0);
        let mut leg_dims = vec![1usize; num_legs];
        let mut seen = vec![0u8; num_legs];
        for leg in slot_legs.iter().flatten() {
            let id = leg.id as usize;
            if seen[id] > 0 && leg_dims[id] != leg.dim {
                return Err(Error::LegDimConflict {
                    leg: leg.id,
                    left: leg_dims[id],
                    right: leg.dim,
                });
            }
            seen[id] += 1;
            if seen[id] > 2 {
                return Err(Error::Hyperedge(leg.id));
            }
            leg_dims[id] = leg.dim;
        }
        let mut output = FixedBitSet::with_capacity(num_legs);
        for &l in output_legs {
            output.insert(l as usize);
        }
        if let Some(tuples) = &tuples {
            for t in tuples {
                if t.len() != slot_legs.len()
                    || t.iter().zip(&value_counts).any(|(&v, &c)| v as u64 >= c)
                {
                    return Err(Error::PlanMismatch(
                        "request tuple does not fit value counts".into(),
                    ));
                }
            }
        }
        Ok(Workload {
            slot_legs,
            leg_dims,
            output,
            value_counts,
            tuples,
        })
    }

    /// A single request with every output leg fixed.
    pub fn single(d: &NetworkDiagram) -> Result<Workload> {
        Workload::from_request_count(d, &[]).map(|w| w.with_single_request())
    }

    fn with_single_request(mut self) -> Self {
        self.value_counts.iter_mut().for_each(|c| *c = 1);
        self.tuples = Some(vec![vec![0; self.slot_legs.len()]]);
        self
    }

    /// Only the request count is known: slot `j` may take up to
    /// `prod(dims of its fixed output legs)` values.
    pub fn from_request_count(d: &NetworkDiagram, batch_legs: &[LegId]) -> Result<Workload> {
        let mut slot_legs = Vec::with_capacity(d.num_slots());
        let mut counts = Vec::with_capacity(d.num_slots());
        for slot in d.slots() {
            let fixed = |l: &LegId| slot.open_legs.contains(l) && !batch_legs.contains(l);
            slot_legs.push(
                slot.legs()
                    .iter()
                    .copied()
                    .filter(|l| !fixed(&l.id))
                    .collect(),
            );
            counts.push(
                slot.legs()
                    .iter()
                    .filter(|l| fixed(&l.id))
                    .map(|l| l.dim as u64)
                    .product(),
            );
        }
        Workload::new(slot_legs, d.open_legs(), counts, None)
    }

    /// Exact value-set sizes and request tuples.
    pub fn from_assignments(d: &NetworkDiagram, a: &AssignmentSet) -> Result<Workload> {
        a.validate(d.num_slots())?;
        let slot_legs = a.value_sets.iter().map(|v| v[0].legs().to_vec()).collect();
        let counts = a.value_sets.iter().map(|v| v.len() as u64).collect();
        Workload::new(slot_legs, d.open_legs(), counts, Some(a.tuples.clone()))
    }

    pub fn num_slots(&self) -> usize {
        self.slot_legs.len()
    }

    pub fn slot_legs(&self, j: usize) -> &[Leg] {
        &self.slot_legs[j]
    }

    pub fn value_counts(&self) -> &[u64] {
        &self.value_counts
    }

    pub fn tuples(&self) -> Option<&[Vec<u32>]> {
        self.tuples.as_deref()
    }

    pub fn num_requests(&self) -> Option<usize> {
        self.tuples.as_ref().map(Vec::len)
    }

    pub fn leg_dim(&self, id: LegId) -> usize {
        self.leg_dims.get(id as usize).copied().unwrap_or(1)
    }

    pub fn is_output(&self, id: LegId) -> bool {
        self.output.contains(id as usize)
    }

    /// Legs shared by two slots that are not outputs; the slicing candidates.
    pub fn closed_legs(&self) -> Vec<LegId> {
        let mut count = vec![0u8; self.leg_dims.len()];
        for leg in self.slot_legs.iter().flatten() {
            count[leg.id as usize] += 1;
        }
        (0..self.leg_dims.len())
            .filter(|&l| count[l] == 2 && !self.output.contains(l))
            .map(|l| l as LegId)
            .collect()
    }
}

/// Work of one contraction node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeCost {
    pub mults: u128,
    pub adds: u128,
    pub rw: u128,
}

impl NodeCost {
    /// `C = mults + adds`.
    pub fn flops(&self) -> u128 {
        self.mults + self.adds
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NodeAnn {
    legs: FixedBitSet,
    size: u128,
    k: u64,
    cost: NodeCost,
    /// Cache term `m_K` of the memory heuristic, in scalars.
    mk: u128,
    /// `size^p`.
    mp: f64,
}

/// Multiset of node sizes, sorted by size, with each size's `size^p`.
///
/// Summing `count * size^p` in size order makes the norm independent of the
/// order nodes were added and removed, so incremental and fresh annotations
/// agree bit for bit.
#[derive(Debug, Clone, Default, PartialEq)]
struct SizeCounts(Vec<(u128, u64, f64)>);

impl SizeCounts {
    fn add(&mut self, size: u128, mp: f64) {
        match self.0.binary_search_by_key(&size, |e| e.0) {
            Ok(i) => self.0[i].1 += 1,
            Err(i) => self.0.insert(i, (size, 1, mp)),
        }
    }

    fn sub(&mut self, size: u128) {
        let i = self
            .0
            .binary_search_by_key(&size, |e| e.0)
            .expect("removed size was added");
        self.0[i].1 -= 1;
        if self.0[i].1 == 0 {
            self.0.remove(i);
        }
    }

    fn power_sum(&self) -> f64 {
        self.0.iter().map(|&(_, c, mp)| c as f64 * mp).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Sums {
    mults: u128,
    adds: u128,
    rw: u128,
    mk: u128,
    sizes: SizeCounts,
}

impl Sums {
    fn add(&mut self, n: &NodeAnn) -> Result<()> {
        let k = n.k as u128;
        let term = |x: u128| x.checked_mul(k).ok_or(Error::CostOverflow);
        self.mults = self
            .mults
            .checked_add(term(n.cost.mults)?)
            .ok_or(Error::CostOverflow)?;
        self.adds = self
            .adds
            .checked_add(term(n.cost.adds)?)
            .ok_or(Error::CostOverflow)?;
        self.rw = self
            .rw
            .checked_add(term(n.cost.rw)?)
            .ok_or(Error::CostOverflow)?;
        self.mk = self.mk.checked_add(n.mk).ok_or(Error::CostOverflow)?;
        self.sizes.add(n.size, n.mp);
        Ok(())
    }

    fn sub(&mut self, n: &NodeAnn) {
        let k = n.k as u128;
        self.mults -= n.cost.mults * k;
        self.adds -= n.cost.adds * k;
        self.rw -= n.cost.rw * k;
        self.mk -= n.mk;
        self.sizes.sub(n.size);
    }
}

/// A rewrite evaluated against the current annotations but not applied.
#[derive(Debug, Clone)]
pub struct Proposal {
    shape: RewriteShape,
    inner: NodeAnn,
    outer: NodeAnn,
    inner_classes: Option<Vec<u32>>,
    sums: Sums,
}

/// A plan together with per-node annotations: result legs, sizes, `k_T`,
/// node costs and memory terms.
#[derive(Debug, Clone)]
pub struct AnnotatedPlan {
    workload: Arc<Workload>,
    cfg: CostConfig,
    mode: Multiplicity,
    plan: Plan,
    sliced: FixedBitSet,
    slices: u128,
    nodes: Vec<NodeAnn>,
    classes: Vec<Vec<u32>>,
    sums: Sums,
}

fn checked_mul(a: u128, b: u128) -> Result<u128> {
    a.checked_mul(b).ok_or(Error::CostOverflow)
}

impl AnnotatedPlan {
    pub fn new(
        workload: Arc<Workload>,
        plan: Plan,
        cfg: CostConfig,
        mode: Multiplicity,
    ) -> Result<Self> {
        cfg.validate()?;
        plan.tree.validate()?;
        if plan.tree.num_leaves() != workload.num_slots() {
            return Err(Error::PlanMismatch(format!(
                "plan has {} leaves, network has {} slots",
                plan.tree.num_leaves(),
                workload.num_slots()
            )));
        }
        if mode == Multiplicity::Exact && workload.tuples.is_none() {
            return Err(Error::InvalidConfig(
                "exact multiplicities need request tuples".into(),
            ));
        }
        let sliced_list = plan.sliced.clone();
        let mut ap = AnnotatedPlan {
            sliced: FixedBitSet::with_capacity(workload.leg_dims.len()),
            workload,
            cfg,
            mode,
            plan: Plan {
                tree: plan.tree,
                sliced: Vec::new(),
            },
            slices: 1,
            nodes: Vec::new(),
            classes: Vec::new(),
            sums: Sums::default(),
        };
        for &l in &sliced_list {
            ap.check_sliceable(l)?;
            ap.sliced.insert(l as usize);
            ap.slices = checked_mul(ap.slices, ap.workload.leg_dim(l) as u128)?;
            ap.plan.sliced.push(l);
        }
        ap.recompute()?;
        Ok(ap)
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn into_plan(self) -> Plan {
        self.plan
    }

    pub fn tree(&self) -> &Tree {
        &self.plan.tree
    }

    pub fn workload(&self) -> &Arc<Workload> {
        &self.workload
    }

    pub fn config(&self) -> &CostConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Multiplicity {
        self.mode
    }

    /// Recomputes every annotation from scratch.
    pub fn recompute(&mut self) -> Result<()> {
        let tree = &self.plan.tree;
        let mut nodes: Vec<Option<NodeAnn>> = vec![None; tree.num_nodes()];
        let mut classes = if self.mode == Multiplicity::Exact {
            vec![Vec::new(); tree.num_nodes()]
        } else {
            Vec::new()
        };
        let mut sums = Sums::default();
        for n in tree.postorder() {
            let ann = match tree.children(n) {
                None => {
                    let (ann, cls) = self.leaf_ann(n)?;
                    if let Some(c) = cls {
                        classes[n] = c;
                    }
                    ann
                }
                Some((l, r)) => {
                    let (ln, rn) = (
                        nodes[l].as_ref().expect("child first"),
                        nodes[r].as_ref().expect("child first"),
                    );
                    let k = match self.mode {
                        Multiplicity::Bound => self.bound_k(ln, rn),
                        Multiplicity::Exact => {
                            let (c, k) = merge_classes(&classes[l], &classes[r]);
                            classes[n] = c;
                            k
                        }
                    };
                    self.combine(ln, rn, k)?
                }
            };
            sums.add(&ann)?;
            nodes[n] = Some(ann);
        }
        self.nodes = nodes
            .into_iter()
            .map(|n| n.expect("every node visited"))
            .collect();
        self.classes = classes;
        self.sums = sums;
        self.total_cost()?;
        Ok(())
    }

    fn size_of(&self, legs: &FixedBitSet) -> Result<u128> {
        legs.ones()
            .filter(|&l| !self.sliced.contains(l))
            .try_fold(1u128, |acc, l| {
                checked_mul(acc, self.workload.leg_dims[l] as u128)
            })
    }

    fn leaf_ann(&self, j: usize) -> Result<(NodeAnn, Option<Vec<u32>>)> {
        let mut legs = FixedBitSet::with_capacity(self.workload.leg_dims.len());
        for l in &self.workload.slot_legs[j] {
            legs.insert(l.id as usize);
        }
        let size = self.size_of(&legs)?;
        let (k, classes) = match self.mode {
            Multiplicity::Bound => (self.workload.value_counts[j].min(self.cfg.k), None),
            Multiplicity::Exact => {
                let tuples = self.workload.tuples.as_ref().expect("checked in new");
                let col: Vec<u32> = tuples.iter().map(|t| t[j]).collect();
                let mut seen = vec![false; self.workload.value_counts[j] as usize];
                let mut k = 0;
                for &v in &col {
                    if !std::mem::replace(&mut seen[v as usize], true) {
                        k += 1;
                    }
                }
                (k.max(1), Some(col))
            }
        };
        let ann = NodeAnn {
            legs,
            size,
            k,
            cost: NodeCost::default(),
            mk: 0,
            mp: (size as f64).powf(self.cfg.p),
        };
        Ok((ann, classes))
    }

    fn bound_k(&self, l: &NodeAnn, r: &NodeAnn) -> u64 {
        l.k.saturating_mul(r.k).min(self.cfg.k)
    }

    fn combine(&self, l: &NodeAnn, r: &NodeAnn, k: u64) -> Result<NodeAnn> {
        let mut closed = l.legs.clone();
        closed.intersect_with(&r.legs);
        let mut legs = l.legs.clone();
        legs.symmetric_difference_with(&r.legs);
        let dc = self.size_of(&closed)?;
        let size = self.size_of(&legs)?;
        let mults = checked_mul(dc, size)?;
        let cost = NodeCost {
            mults,
            adds: mults - size,
            rw: l
                .size
                .checked_add(r.size)
                .and_then(|s| s.checked_add(size))
                .ok_or(Error::CostOverflow)?,
        };
        let mk = if k == 1 {
            0
        } else {
            let (kl, kr) = (l.k as u128, r.k as u128);
            let (mkl, mkr) = (checked_mul(kl, l.size)?, checked_mul(kr, r.size)?);
            if kl.min(kr) < k as u128 {
                let a = mkl.checked_add(r.size).ok_or(Error::CostOverflow)?;
                let b = l.size.checked_add(mkr).ok_or(Error::CostOverflow)?;
                a.min(b)
            } else {
                mkl.min(mkr)
            }
        };
        Ok(NodeAnn {
            legs,
            size,
            k,
            cost,
            mk,
            mp: (size as f64).powf(self.cfg.p),
        })
    }

    fn check_sliceable(&self, leg: LegId) -> Result<()> {
        let w = &self.workload;
        if w.is_output(leg) {
            return Err(Error::InvalidSlice {
                leg,
                reason: "output legs cannot be sliced",
            });
        }
        if !w.closed_legs().contains(&leg) {
            return Err(Error::InvalidSlice {
                leg,
                reason: "not a closed leg of the network",
            });
        }
        if self.sliced.contains(leg as usize) {
            return Err(Error::InvalidSlice {
                leg,
                reason: "already sliced",
            });
        }
        Ok(())
    }

    /// Adds `leg` to the slice list and recomputes all annotations.
    pub fn slice(&mut self, leg: LegId) -> Result<()> {
        self.check_sliceable(leg)?;
        let slices = checked_mul(self.slices, self.workload.leg_dim(leg) as u128)?;
        let backup = (self.sliced.clone(), self.slices);
        self.sliced.insert(leg as usize);
        self.slices = slices;
        self.plan.sliced.push(leg);
        if let Err(e) = self.recompute() {
            self.plan.sliced.pop();
            (self.sliced, self.slices) = backup;
            self.recompute()?;
            return Err(e);
        }
        Ok(())
    }

    /// Removes `leg` from the slice list and recomputes all annotations.
    pub fn unslice(&mut self, leg: LegId) -> Result<()> {
        let pos = self
            .plan
            .sliced
            .iter()
            .position(|&l| l == leg)
            .ok_or(Error::InvalidSlice {
                leg,
                reason: "not sliced",
            })?;
        self.plan.sliced.remove(pos);
        self.sliced.set(leg as usize, false);
        self.slices /= self.workload.leg_dim(leg) as u128;
        self.recompute()
    }

    /// Number of slice-value combinations.
    pub fn slices(&self) -> u128 {
        self.slices
    }

    pub fn kt(&self, n: NodeId) -> u64 {
        self.nodes[n].k
    }

    /// Result size `m(T)` in scalars, sliced legs excluded.
    pub fn size(&self, n: NodeId) -> u128 {
        self.nodes[n].size
    }

    /// Result legs of a node, ascending, sliced legs excluded.
    pub fn node_legs(&self, n: NodeId) -> Vec<LegId> {
        self.nodes[n]
            .legs
            .ones()
            .filter(|&l| !self.sliced.contains(l))
            .map(|l| l as LegId)
            .collect()
    }

    /// Legs summed over at an internal node, sliced legs excluded.
    pub fn closed_at(&self, n: NodeId) -> Vec<LegId> {
        let Some((l, r)) = self.plan.tree.children(n) else {
            return Vec::new();
        };
        let mut closed = self.nodes[l].legs.clone();
        closed.intersect_with(&self.nodes[r].legs);
        closed
            .ones()
            .filter(|&l| !self.sliced.contains(l))
            .map(|l| l as LegId)
            .collect()
    }

    /// Per-slice cost of evaluating node `n` once.
    pub fn node_cost(&self, n: NodeId) -> NodeCost {
        self.nodes[n].cost
    }

    /// `C(T, k)` of the subtree rooted at `n`, for one slice.
    pub fn cumulative_cost(&self, n: NodeId) -> u128 {
        let mut total = 0;
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            total += self.nodes[x].k as u128 * self.nodes[x].cost.flops();
            if let Some((l, r)) = self.plan.tree.children(x) {
                stack.extend([l, r]);
            }
        }
        total
    }

    /// Cache term `m_K(T)` in scalars.
    pub fn memory_term(&self, n: NodeId) -> u128 {
        self.nodes[n].mk
    }

    /// Largest node result in scalars: the single-run memory bound.
    pub fn max_node_size(&self) -> u128 {
        self.nodes.iter().map(|n| n.size).max().unwrap_or(0)
    }

    fn slice_sum_adds(&self) -> Result<u128> {
        let root = &self.nodes[self.plan.tree.root()];
        checked_mul(checked_mul(self.slices - 1, root.k as u128)?, root.size)
    }

    fn totals(&self, s: &Sums) -> Result<NodeCost> {
        let mults = checked_mul(self.slices, s.mults)?;
        let adds = checked_mul(self.slices, s.adds)?
            .checked_add(self.slice_sum_adds()?)
            .ok_or(Error::CostOverflow)?;
        let rw = checked_mul(self.slices, s.rw)?;
        mults.checked_add(adds).ok_or(Error::CostOverflow)?;
        Ok(NodeCost { mults, adds, rw })
    }

    /// Predicted multiplications, additions and element reads/writes of a
    /// full evaluation, including summing slice results.
    pub fn total_counters(&self) -> Result<NodeCost> {
        self.totals(&self.sums)
    }

    /// `C(T, k)` over all slices plus the additions merging slice results.
    pub fn total_cost(&self) -> Result<u128> {
        Ok(self.totals(&self.sums)?.flops())
    }

    /// `k_T`-weighted node reads/writes over all slices.
    pub fn total_rw(&self) -> Result<u128> {
        Ok(self.totals(&self.sums)?.rw)
    }

    fn memory_of(&self, s: &Sums) -> f64 {
        let norm = s.sizes.power_sum().powf(1.0 / self.cfg.p);
        self.cfg.bytes_per_scalar as f64 * (s.mk as f64 + 2.0 * norm)
    }

    /// Heuristic peak memory `M(T, k)` in bytes.
    pub fn memory_estimate(&self) -> f64 {
        self.memory_of(&self.sums)
    }

    fn objective_of(&self, s: &Sums) -> Result<f64> {
        let t = self.totals(s)?;
        objective_from_parts(self.memory_of(s), t.flops() as f64, t.rw as f64, &self.cfg)
    }

    pub fn objective(&self) -> Result<f64> {
        self.objective_of(&self.sums)
    }

    /// Evaluates a rewrite without applying it.
    pub fn preview(&self, n: NodeId, rule: Rule) -> Result<Proposal> {
        let shape = self.plan.tree.rewritten(n, rule)?;
        let [a, b] = shape.inner_children;
        let (inner_k, inner_classes) = match self.mode {
            Multiplicity::Bound => (self.bound_k(&self.nodes[a], &self.nodes[b]), None),
            Multiplicity::Exact => {
                let (c, k) = merge_classes(&self.classes[a], &self.classes[b]);
                (k, Some(c))
            }
        };
        let inner = self.combine(&self.nodes[a], &self.nodes[b], inner_k)?;
        let [x, y] = shape.outer_children;
        let pick = |c: NodeId| {
            if c == shape.inner {
                &inner
            } else {
                &self.nodes[c]
            }
        };
        // k_T depends only on the node's leaf set, which the rewrite keeps.
        let outer = self.combine(pick(x), pick(y), self.nodes[n].k)?;
        let mut sums = self.sums.clone();
        sums.sub(&self.nodes[shape.inner]);
        sums.sub(&self.nodes[n]);
        sums.add(&inner)?;
        sums.add(&outer)?;
        self.totals(&sums)?;
        Ok(Proposal {
            shape,
            inner,
            outer,
            inner_classes,
            sums,
        })
    }

    pub fn proposal_objective(&self, p: &Proposal) -> Result<f64> {
        self.objective_of(&p.sums)
    }

    pub fn proposal_cost(&self, p: &Proposal) -> Result<u128> {
        Ok(self.totals(&p.sums)?.flops())
    }

    pub fn commit(&mut self, p: Proposal) {
        self.plan.tree.install(&p.shape);
        self.nodes[p.shape.inner] = p.inner;
        self.nodes[p.shape.node] = p.outer;
        if let Some(c) = p.inner_classes {
            self.classes[p.shape.inner] = c;
        }
        self.sums = p.sums;
    }

    /// Applies a rewrite, updating only the two affected nodes.
    pub fn rewrite(&mut self, n: NodeId, rule: Rule) -> Result<()> {
        let p = self.preview(n, rule)?;
        self.commit(p);
        Ok(())
    }

    /// `total_cost(before) - total_cost(after)` for a rewrite.
    pub fn delta_cost(&self, n: NodeId, rule: Rule) -> Result<i128> {
        let p = self.preview(n, rule)?;
        let before = self.total_cost()? as i128;
        let after = self.proposal_cost(&p)? as i128;
        Ok(before - after)
    }
}

/// Class ids of a node from its children's per-request class ids, and the
/// number of distinct classes.
fn merge_classes(l: &[u32], r: &[u32]) -> (Vec<u32>, u64) {
    let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
    let classes = l
        .iter()
        .zip(r)
        .map(|(&a, &b)| {
            let next = ids.len() as u32;
            *ids.entry((a, b)).or_insert(next)
        })
        .collect();
    (classes, ids.len().max(1) as u64)
}

/// `beta * max(log2(M / M_max), 0) + log2(C + alpha * RW)`.
pub fn objective_from_parts(memory: f64, cost: f64, rw: f64, cfg: &CostConfig) -> Result<f64> {
    let work = cost + cfg.alpha * rw;
    if work <= 0.0 {
        return Err(Error::Empty("plan performs no contractions"));
    }
    Ok(cfg.beta * (memory / cfg.m_max).log2().max(0.0) + work.log2())
}
