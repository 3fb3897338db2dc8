//! Evaluation of one contraction plan over many requests, reusing
//! subexpression results between requests that agree on a subtree's slots.
//!
//! Requests are index tuples over the in-order leaf positions of the tree, so
//! the slots under any node form a contiguous range of each tuple. After
//! sorting the tuples, every node sees its distinct restricted tuples as
//! consecutive runs. Right subtrees are evaluated ahead of time for all their
//! distinct restricted tuples (the right cache); a left child keeps at most
//! its latest result (the left cache), and only when the next call reuses it.
//!
//! The engine is generic over [`Operand`], so the same control flow runs on
//! real tensors and on shapes ([`emulate`]).

use crate::error::{Error, Result};
use crate::network::{build_assignments, group_by_pattern, AssignmentSet, NetworkDiagram};
use crate::plan::{NodeId, Plan, Tree};
use crate::tensor::{contract_pair_counted, Leg, LegId, OpCounters, Shape, Tensor};
use num_complex::Complex64;
use rayon::prelude::*;
use std::cell::Cell;
use std::collections::HashMap;
use std::rc::Rc;

/// A value the engine can contract: a dense tensor or only its shape.
pub trait Operand: Clone + Send + Sync {
    fn legs(&self) -> &[Leg];
    fn size(&self) -> usize;
    fn contract_counted(
        &self,
        other: &Self,
        closed: &[LegId],
        counters: &mut OpCounters,
    ) -> Result<Self>;
    fn project(&self, leg: LegId, value: usize) -> Result<Self>;
    /// Elementwise `self += other`, counting one addition per element.
    fn accumulate(&mut self, other: &Self, counters: &mut OpCounters) -> Result<()>;
}

impl Operand for Tensor {
    fn legs(&self) -> &[Leg] {
        Tensor::legs(self)
    }

    fn size(&self) -> usize {
        Tensor::size(self)
    }

    fn contract_counted(
        &self,
        other: &Self,
        closed: &[LegId],
        counters: &mut OpCounters,
    ) -> Result<Self> {
        contract_pair_counted(self, other, closed, counters)
    }

    fn project(&self, leg: LegId, value: usize) -> Result<Self> {
        Tensor::project(self, leg, value)
    }

    fn accumulate(&mut self, other: &Self, counters: &mut OpCounters) -> Result<()> {
        self.add_assign_tensor(other)?;
        counters.adds += self.size() as u64;
        Ok(())
    }
}

impl Operand for Shape {
    fn legs(&self) -> &[Leg] {
        Shape::legs(self)
    }

    fn size(&self) -> usize {
        Shape::size(self)
    }

    fn contract_counted(
        &self,
        other: &Self,
        closed: &[LegId],
        counters: &mut OpCounters,
    ) -> Result<Self> {
        let (shape, cost) = self.contract(other, closed)?;
        *counters += cost;
        Ok(shape)
    }

    fn project(&self, leg: LegId, value: usize) -> Result<Self> {
        Shape::project(self, leg, value)
    }

    fn accumulate(&mut self, other: &Self, counters: &mut OpCounters) -> Result<()> {
        if self.legs() != other.legs() {
            return Err(Error::MalformedTensor(
                "cannot add tensors of different shapes".into(),
            ));
        }
        counters.adds += self.size() as u64;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Hard limit on resident intermediate bytes.
    pub memory_cap: Option<u64>,
    pub bytes_per_scalar: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            memory_cap: None,
            bytes_per_scalar: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult<V = Tensor> {
    /// One value per request, in request order. Scalars for fully fixed
    /// requests, tensors over the batch legs otherwise.
    pub values: Vec<V>,
    /// Number of distinct request tuples actually evaluated.
    pub distinct: usize,
    pub counters: OpCounters,
    /// Peak resident bytes of intermediate results (inputs excluded).
    pub peak_bytes: u64,
    /// Contractions performed at every tree node, indexed by node id.
    pub node_contractions: Vec<u64>,
}

impl<V> EvalResult<V> {
    pub fn total_contractions(&self) -> u64 {
        self.node_contractions.iter().sum()
    }
}

impl EvalResult<Tensor> {
    /// Scalar results; `None` for requests with batch legs.
    pub fn amplitudes(&self) -> Vec<Option<Complex64>> {
        self.values.iter().map(Tensor::as_scalar).collect()
    }
}

struct Tracker {
    current: Cell<u64>,
    peak: Cell<u64>,
    cap: Option<u64>,
}

/// An engine value; dropping the last reference releases its bytes.
struct Held<V> {
    value: V,
    bytes: u64,
    tracker: Option<Rc<Tracker>>,
}

impl<V> Drop for Held<V> {
    fn drop(&mut self) {
        if let Some(t) = &self.tracker {
            t.current.set(t.current.get() - self.bytes);
        }
    }
}

type Val<V> = Rc<Held<V>>;

struct Engine<'a, V> {
    tree: &'a Tree,
    leaves: Vec<Vec<Val<V>>>,
    len: Vec<usize>,
    left: Vec<Option<(Vec<u32>, Val<V>)>>,
    right: Vec<Option<HashMap<Vec<u32>, Val<V>>>>,
    tracker: Rc<Tracker>,
    bytes_per_scalar: u64,
    counters: OpCounters,
    node_contractions: Vec<u64>,
}

impl<'a, V: Operand> Engine<'a, V> {
    fn new(tree: &'a Tree, value_sets: &[Vec<V>], opts: &EvalOptions) -> Self {
        let leaves = value_sets
            .iter()
            .map(|set| {
                set.iter()
                    .map(|v| {
                        Rc::new(Held {
                            value: v.clone(),
                            bytes: 0,
                            tracker: None,
                        })
                    })
                    .collect()
            })
            .collect();
        let n = tree.num_nodes();
        Engine {
            tree,
            leaves,
            len: tree.leaf_counts(),
            left: vec![None; n],
            right: (0..n).map(|_| None).collect(),
            tracker: Rc::new(Tracker {
                current: Cell::new(0),
                peak: Cell::new(0),
                cap: opts.memory_cap,
            }),
            bytes_per_scalar: opts.bytes_per_scalar,
            counters: OpCounters::default(),
            node_contractions: vec![0; n],
        }
    }

    fn hold(&self, node: NodeId, value: V) -> Result<Val<V>> {
        let bytes = value.size() as u64 * self.bytes_per_scalar;
        let t = &self.tracker;
        let current = t.current.get() + bytes;
        t.current.set(current);
        t.peak.set(t.peak.get().max(current));
        let held = Rc::new(Held {
            value,
            bytes,
            tracker: Some(t.clone()),
        });
        match t.cap {
            Some(cap) if current > cap => Err(Error::MemoryCapExceeded {
                node,
                bytes: current,
                cap,
            }),
            _ => Ok(held),
        }
    }

    fn contract(&mut self, node: NodeId, l: &V, r: &V) -> Result<Val<V>> {
        let closed: Vec<LegId> = l
            .legs()
            .iter()
            .filter(|a| r.legs().iter().any(|b| b.id == a.id))
            .map(|a| a.id)
            .collect();
        let value = l.contract_counted(r, &closed, &mut self.counters)?;
        self.node_contractions[node] += 1;
        self.hold(node, value)
    }

    /// Evaluates `node` for sorted, distinct tuples restricted to its range.
    fn eval_all(&mut self, node: NodeId, tuples: &[Vec<u32>]) -> Result<Vec<Val<V>>> {
        (0..tuples.len())
            .map(|i| self.eval_at(node, tuples, i, i + 1))
            .collect()
    }

    /// Value of left-spine node `t` for tuple `i`; `next` is the first later
    /// tuple index at which `t` will be asked for again.
    fn eval_at(&mut self, t: NodeId, tuples: &[Vec<u32>], i: usize, next: usize) -> Result<Val<V>> {
        let Some((l, r)) = self.tree.children(t) else {
            return Ok(self.leaves[t][tuples[i][0] as usize].clone());
        };
        let n = tuples.len();
        let len = self.len[t];
        let key = &tuples[i][..len];
        let reused = next < n && tuples[next][..len] == *key;

        if let Some((k, v)) = &self.left[t] {
            if k[..] == *key {
                let v = v.clone();
                if !reused {
                    self.left[t] = None;
                }
                if next >= n {
                    self.right[t] = None;
                }
                return Ok(v);
            }
        }

        let run_end = (i + 1..n).find(|&j| tuples[j][..len] != *key).unwrap_or(n);
        let lv = self.eval_at(l, tuples, i, run_end)?;
        let split = self.len[l];
        if self.right[t].is_none() {
            let mut sub: Vec<Vec<u32>> = tuples[i..]
                .iter()
                .map(|tp| tp[split..len].to_vec())
                .collect();
            sub.sort_unstable();
            sub.dedup();
            let vals = self.eval_all(r, &sub)?;
            self.right[t] = Some(sub.into_iter().zip(vals).collect());
        }
        let rv = self.right[t].as_ref().expect("filled above")[&tuples[i][split..len]].clone();
        let u = self.contract(t, &lv.value, &rv.value)?;
        drop((lv, rv));
        if next >= n {
            self.right[t] = None;
        } else if reused {
            self.left[t] = Some((key.to_vec(), u.clone()));
        }
        Ok(u)
    }

    /// Single-cache recursive evaluation keyed by (node, restricted tuple).
    fn eval_cached(
        &mut self,
        t: NodeId,
        tuple: &[u32],
        start: usize,
        cache: &mut HashMap<(NodeId, Vec<u32>), Val<V>>,
    ) -> Result<Val<V>> {
        let Some((l, r)) = self.tree.children(t) else {
            return Ok(self.leaves[t][tuple[start] as usize].clone());
        };
        let key = (t, tuple[start..start + self.len[t]].to_vec());
        if let Some(v) = cache.get(&key) {
            return Ok(v.clone());
        }
        let lv = self.eval_cached(l, tuple, start, cache)?;
        let rv = self.eval_cached(r, tuple, start + self.len[l], cache)?;
        let u = self.contract(t, &lv.value, &rv.value)?;
        cache.insert(key, u.clone());
        Ok(u)
    }

    /// Root results that are bare inputs get copied so they count as memory.
    fn materialize(&self, v: Val<V>) -> Result<Val<V>> {
        if v.tracker.is_some() {
            Ok(v)
        } else {
            self.hold(self.tree.root(), v.value.clone())
        }
    }
}

/// Request tuples reordered to in-order leaf positions.
fn positional(tree: &Tree, tuples: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let order = tree.leaf_order();
    tuples
        .iter()
        .map(|t| order.iter().map(|&j| t[j]).collect())
        .collect()
}

fn check_inputs<V: Operand>(tree: &Tree, value_sets: &[Vec<V>], tuples: &[Vec<u32>]) -> Result<()> {
    tree.validate()?;
    if tree.num_leaves() != value_sets.len() {
        return Err(Error::PlanMismatch(format!(
            "plan has {} leaves, assignments cover {} slots",
            tree.num_leaves(),
            value_sets.len()
        )));
    }
    for (i, t) in tuples.iter().enumerate() {
        if t.len() != value_sets.len()
            || t.iter()
                .zip(value_sets)
                .any(|(&v, s)| v as usize >= s.len())
        {
            return Err(Error::PlanMismatch(format!(
                "request tuple {i} is out of range"
            )));
        }
    }
    Ok(())
}

struct Distinct {
    sorted: Vec<Vec<u32>>,
    index_of: Vec<usize>,
}

fn distinct(tuples: Vec<Vec<u32>>) -> Distinct {
    let mut sorted = tuples.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let index_of = tuples
        .iter()
        .map(|t| sorted.binary_search(t).expect("present"))
        .collect();
    Distinct { sorted, index_of }
}

enum Strategy {
    Split,
    Naive,
}

fn run<V: Operand>(
    tree: &Tree,
    value_sets: &[Vec<V>],
    tuples: &[Vec<u32>],
    opts: &EvalOptions,
    strategy: Strategy,
) -> Result<EvalResult<V>> {
    check_inputs(tree, value_sets, tuples)?;
    let d = distinct(positional(tree, tuples));
    let mut engine = Engine::new(tree, value_sets, opts);
    let root = tree.root();
    let held = match strategy {
        Strategy::Split => engine.eval_all(root, &d.sorted)?,
        Strategy::Naive => {
            let mut cache = HashMap::new();
            let out = d
                .sorted
                .iter()
                .map(|t| engine.eval_cached(root, t, 0, &mut cache))
                .collect::<Result<Vec<_>>>()?;
            drop(cache);
            out
        }
    };
    let held = held
        .into_iter()
        .map(|v| engine.materialize(v))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(
        engine.left.iter().all(Option::is_none),
        "left cache drained"
    );
    debug_assert!(
        engine.right.iter().all(Option::is_none),
        "right cache drained"
    );
    let values = d.index_of.iter().map(|&i| held[i].value.clone()).collect();
    Ok(EvalResult {
        values,
        distinct: d.sorted.len(),
        counters: engine.counters,
        peak_bytes: engine.tracker.peak.get(),
        node_contractions: engine.node_contractions,
    })
}

/// Evaluates every request with the split left/right cache protocol.
/// Sliced legs in the plan are ignored; see [`eval_sliced`].
pub fn eval_all(plan: &Plan, a: &AssignmentSet, opts: &EvalOptions) -> Result<EvalResult> {
    run(&plan.tree, &a.value_sets, &a.tuples, opts, Strategy::Split)
}

/// [`eval_all`] over arbitrary operands.
pub fn eval_all_with<V: Operand>(
    tree: &Tree,
    value_sets: &[Vec<V>],
    tuples: &[Vec<u32>],
    opts: &EvalOptions,
) -> Result<EvalResult<V>> {
    run(tree, value_sets, tuples, opts, Strategy::Split)
}

/// Reference evaluation with one unbounded cache keyed by node and tuple.
pub fn eval_naive(plan: &Plan, a: &AssignmentSet, opts: &EvalOptions) -> Result<EvalResult> {
    run(&plan.tree, &a.value_sets, &a.tuples, opts, Strategy::Naive)
}

fn slice_dims<V: Operand>(value_sets: &[Vec<V>], sliced: &[LegId]) -> Result<Vec<usize>> {
    sliced
        .iter()
        .map(|&leg| {
            let carriers: Vec<usize> = value_sets
                .iter()
                .filter_map(|set| set[0].legs().iter().find(|l| l.id == leg).map(|l| l.dim))
                .collect();
            match carriers[..] {
                [a, b] if a == b => Ok(a),
                [_, _] => Err(Error::InvalidSlice {
                    leg,
                    reason: "leg dimensions disagree",
                }),
                _ => Err(Error::InvalidSlice {
                    leg,
                    reason: "not a closed leg of the network",
                }),
            }
        })
        .collect()
}

/// Evaluates each slice of the plan's sliced legs and sums the results in
/// slice-index order, spreading slices over `workers` threads.
pub fn eval_sliced_with<V: Operand>(
    plan: &Plan,
    value_sets: &[Vec<V>],
    tuples: &[Vec<u32>],
    workers: usize,
    opts: &EvalOptions,
) -> Result<EvalResult<V>> {
    let dims = slice_dims(value_sets, &plan.sliced)?;
    if dims.is_empty() {
        return eval_all_with(&plan.tree, value_sets, tuples, opts);
    }
    let total: usize = dims.iter().product();
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|_| Error::Internal("could not start worker threads"))?;

    let run_slice = |s: usize| -> Result<EvalResult<V>> {
        let mut rest = s;
        let mut fixed = vec![0usize; dims.len()];
        for (f, &d) in fixed.iter_mut().zip(&dims).rev() {
            *f = rest % d;
            rest /= d;
        }
        let projected = value_sets
            .iter()
            .map(|set| {
                set.iter()
                    .map(|v| {
                        let mut v = v.clone();
                        for (&leg, &val) in plan.sliced.iter().zip(&fixed) {
                            if v.legs().iter().any(|l| l.id == leg) {
                                v = v.project(leg, val)?;
                            }
                        }
                        Ok(v)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        eval_all_with(&plan.tree, &projected, tuples, opts)
    };

    let mut acc: Option<EvalResult<V>> = None;
    for chunk_start in (0..total).step_by(workers) {
        let chunk: Vec<usize> = (chunk_start..total.min(chunk_start + workers)).collect();
        let results = pool.install(|| chunk.par_iter().map(|&s| run_slice(s)).collect::<Vec<_>>());
        for r in results {
            let r = r?;
            match &mut acc {
                None => acc = Some(r),
                Some(acc) => {
                    acc.counters += r.counters;
                    acc.peak_bytes = acc.peak_bytes.max(r.peak_bytes);
                    for (a, b) in acc.node_contractions.iter_mut().zip(&r.node_contractions) {
                        *a += b;
                    }
                    // Duplicate requests share one result; sum each once.
                    let mut done = vec![false; acc.values.len()];
                    let mut first: HashMap<&Vec<u32>, usize> = HashMap::new();
                    for (i, t) in tuples.iter().enumerate() {
                        first.entry(t).or_insert(i);
                    }
                    for (i, t) in tuples.iter().enumerate() {
                        let f = first[t];
                        if !done[f] {
                            acc.values[f].accumulate(&r.values[f], &mut acc.counters)?;
                            done[f] = true;
                        }
                        if f != i {
                            acc.values[i] = acc.values[f].clone();
                        }
                    }
                }
            }
        }
    }
    Ok(acc.expect("at least one slice"))
}

/// Sliced evaluation of real tensors.
pub fn eval_sliced(
    plan: &Plan,
    a: &AssignmentSet,
    workers: usize,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    eval_sliced_with(plan, &a.value_sets, &a.tuples, workers, opts)
}

/// Shape-only replay of [`eval_sliced`]: exact operation counts and peak
/// resident bytes without touching tensor data.
pub fn emulate(plan: &Plan, a: &AssignmentSet, opts: &EvalOptions) -> Result<EvalResult<Shape>> {
    let shapes: Vec<Vec<Shape>> = a
        .value_sets
        .iter()
        .map(|set| set.iter().map(Shape::from).collect())
        .collect();
    eval_sliced_with(plan, &shapes, &a.tuples, 1, opts)
}

/// Expands one request's result into `(bitstring, amplitude)` rows. Batch
/// positions (`*`) are filled in row-major order of the result's legs, which
/// are the batch legs in ascending id order.
pub fn amplitude_rows(
    bitstring: &str,
    value: &Tensor,
    open_legs: &[LegId],
) -> Result<Vec<(String, Complex64)>> {
    let value = value.canonical();
    let mut template: Vec<char> = bitstring.chars().collect();
    let positions = value
        .legs()
        .iter()
        .map(|l| {
            let q = open_legs
                .iter()
                .position(|&o| o == l.id)
                .ok_or(Error::UnknownLeg(l.id))?;
            if template.get(q) != Some(&'*') {
                return Err(Error::Bitstring {
                    index: 0,
                    msg: format!("result leg {} is not a '*' position", l.id),
                });
            }
            Ok(q)
        })
        .collect::<Result<Vec<_>>>()?;
    if template.iter().filter(|&&c| c == '*').count() != positions.len() {
        return Err(Error::PlanMismatch(
            "batch positions do not match the result legs".into(),
        ));
    }
    let mut rows = Vec::with_capacity(value.size());
    for (flat, amp) in value.data().iter().enumerate() {
        let mut rest = flat;
        for (&q, leg) in positions.iter().zip(value.legs()).rev() {
            let digit = rest % leg.dim;
            rest /= leg.dim;
            template[q] = char::from_digit(digit as u32, 36).expect("small digit");
        }
        rows.push((template.iter().collect(), *amp));
    }
    Ok(rows)
}

/// One `bitstring<TAB>re<TAB>im` line per row, 17 significant digits.
pub fn format_amplitude_tsv(rows: &[(String, Complex64)]) -> String {
    let mut s = String::new();
    for (b, a) in rows {
        s.push_str(&format!("{b}\t{:.16e}\t{:.16e}\n", a.re, a.im));
    }
    s
}

/// Evaluates `{0,1,*}` requests on a circuit network, one sliced evaluation
/// per `*` pattern. Returns every request's expanded rows, in request order.
pub fn evaluate_bitstrings<S: AsRef<str>>(
    d: &NetworkDiagram,
    plan: &Plan,
    bitstrings: &[S],
    workers: usize,
    opts: &EvalOptions,
) -> Result<Vec<Vec<(String, Complex64)>>> {
    let mut rows = vec![Vec::new(); bitstrings.len()];
    for (batch, idx) in group_by_pattern(d, bitstrings) {
        let group: Vec<&str> = idx.iter().map(|&i| bitstrings[i].as_ref()).collect();
        let a = build_assignments(d, &group, &batch).map_err(|e| match e {
            Error::Bitstring { index, msg } => Error::Bitstring {
                index: idx[index],
                msg,
            },
            e => e,
        })?;
        let r = eval_sliced(plan, &a, workers, opts)?;
        for (&i, value) in idx.iter().zip(&r.values) {
            rows[i] = amplitude_rows(bitstrings[i].as_ref(), value, d.open_legs())?;
        }
    }
    Ok(rows)
}
