//! Dense complex tensors with labeled legs and the pairwise contraction kernel.
//!
//! Tensors are stored row-major over their legs in listed order. Every
//! contraction produces a tensor whose legs are sorted by ascending leg id, so
//! `a * b` and `b * a` are bit-identical and downstream shape arithmetic is
//! deterministic.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::AddAssign;

pub type LegId = u32;

/// One index of a tensor: its label and bond dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Leg {
    pub id: LegId,
    pub dim: usize,
}

impl Leg {
    pub fn new(id: LegId, dim: usize) -> Self {
        Leg { id, dim }
    }

    /// A qubit leg (bond dimension 2).
    pub fn qubit(id: LegId) -> Self {
        Leg { id, dim: 2 }
    }
}

/// Running counts of complex multiplications, additions and element
/// reads/writes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub mults: u64,
    pub adds: u64,
    pub rw: u64,
}

impl OpCounters {
    /// Multiplications plus additions.
    pub fn flops(&self) -> u64 {
        self.mults + self.adds
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.mults += rhs.mults;
        self.adds += rhs.adds;
        self.rw += rhs.rw;
    }
}

fn check_legs(legs: &[Leg]) -> Result<()> {
    for (i, leg) in legs.iter().enumerate() {
        if leg.dim == 0 {
            return Err(Error::MalformedTensor(format!(
                "leg {} has dimension 0",
                leg.id
            )));
        }
        if legs[..i].iter().any(|l| l.id == leg.id) {
            return Err(Error::MalformedTensor(format!(
                "duplicate leg id {}",
                leg.id
            )));
        }
    }
    Ok(())
}

fn size_of(legs: &[Leg]) -> usize {
    legs.iter().map(|l| l.dim).product()
}

fn row_major_strides(legs: &[Leg]) -> Vec<usize> {
    let mut strides = vec![1; legs.len()];
    for i in (0..legs.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * legs[i + 1].dim;
    }
    strides
}

/// Leg bookkeeping shared by the numeric kernel and the shape-only path.
struct PairLayout {
    result: Vec<Leg>,
    closed: Vec<Leg>,
}

fn pair_layout(a: &[Leg], b: &[Leg], closed: &[LegId]) -> Result<PairLayout> {
    check_legs(a)?;
    check_legs(b)?;
    let find = |legs: &[Leg], id: LegId| legs.iter().find(|l| l.id == id).copied();

    let mut closed_legs = Vec::with_capacity(closed.len());
    for &id in closed {
        let (la, lb) = match (find(a, id), find(b, id)) {
            (Some(la), Some(lb)) => (la, lb),
            _ => return Err(Error::UnknownLeg(id)),
        };
        if la.dim != lb.dim {
            return Err(Error::LegDimConflict {
                leg: id,
                left: la.dim,
                right: lb.dim,
            });
        }
        if !closed_legs.iter().any(|l: &Leg| l.id == id) {
            closed_legs.push(la);
        }
    }
    closed_legs.sort_unstable();

    let mut result: Vec<Leg> = Vec::with_capacity(a.len() + b.len());
    for &la in a {
        if closed_legs.iter().any(|l| l.id == la.id) {
            continue;
        }
        if let Some(lb) = find(b, la.id) {
            if lb.dim != la.dim {
                return Err(Error::LegDimConflict {
                    leg: la.id,
                    left: la.dim,
                    right: lb.dim,
                });
            }
        }
        result.push(la);
    }
    for &lb in b {
        if closed_legs.iter().any(|l| l.id == lb.id) || result.iter().any(|l| l.id == lb.id) {
            continue;
        }
        result.push(lb);
    }
    result.sort_unstable();
    Ok(PairLayout {
        result,
        closed: closed_legs,
    })
}

/// Predicted operation counts for contracting tensors of shapes `a` and `b`
/// over `closed`, without touching any data.
///
/// `mults = D_closed * D_open`, `adds = (D_closed - 1) * D_open` and
/// `rw = size(a) + size(b) + size(result)`.
pub fn predicted_cost(a: &[Leg], b: &[Leg], closed: &[LegId]) -> Result<OpCounters> {
    let layout = pair_layout(a, b, closed)?;
    let d_closed = size_of(&layout.closed) as u64;
    let d_open = size_of(&layout.result) as u64;
    Ok(OpCounters {
        mults: d_closed * d_open,
        adds: (d_closed - 1) * d_open,
        rw: (size_of(a) + size_of(b)) as u64 + d_open,
    })
}

/// Dense complex tensor with labeled legs.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    legs: Vec<Leg>,
    data: Vec<Complex64>,
}

impl Tensor {
    pub fn new(legs: Vec<Leg>, data: Vec<Complex64>) -> Result<Self> {
        check_legs(&legs)?;
        let size = size_of(&legs);
        if data.len() != size {
            return Err(Error::MalformedTensor(format!(
                "data length {} does not match shape size {}",
                data.len(),
                size
            )));
        }
        Ok(Tensor { legs, data })
    }

    pub fn scalar(value: Complex64) -> Self {
        Tensor {
            legs: Vec::new(),
            data: vec![value],
        }
    }

    pub fn zeros(legs: Vec<Leg>) -> Result<Self> {
        let size = size_of(&legs);
        Tensor::new(legs, vec![Complex64::new(0.0, 0.0); size])
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(legs: Vec<Leg>, mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        check_legs(&legs)?;
        let size = size_of(&legs);
        let mut idx = vec![0usize; legs.len()];
        let mut data = Vec::with_capacity(size);
        for _ in 0..size {
            data.push(f(&idx));
            for d in (0..legs.len()).rev() {
                idx[d] += 1;
                if idx[d] < legs[d].dim {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Tensor { legs, data })
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn order(&self) -> usize {
        self.legs.len()
    }

    pub fn size(&self) -> usize {
        self.data.len()
    }

    pub fn dim_of(&self, id: LegId) -> Option<usize> {
        self.legs.iter().find(|l| l.id == id).map(|l| l.dim)
    }

    pub fn has_leg(&self, id: LegId) -> bool {
        self.legs.iter().any(|l| l.id == id)
    }

    /// Value of an order-0 tensor.
    pub fn as_scalar(&self) -> Option<Complex64> {
        self.legs.is_empty().then(|| self.data[0])
    }

    /// Entry at a multi-index given in leg order.
    pub fn get(&self, index: &[usize]) -> Option<Complex64> {
        if index.len() != self.legs.len() {
            return None;
        }
        let strides = row_major_strides(&self.legs);
        let mut off = 0;
        for ((&i, leg), s) in index.iter().zip(&self.legs).zip(strides) {
            if i >= leg.dim {
                return None;
            }
            off += i * s;
        }
        Some(self.data[off])
    }

    /// Copy with legs permuted into ascending id order.
    pub fn canonical(&self) -> Tensor {
        let mut order: Vec<usize> = (0..self.legs.len()).collect();
        order.sort_by_key(|&i| self.legs[i].id);
        if order.iter().enumerate().all(|(i, &j)| i == j) {
            return self.clone();
        }
        let strides = row_major_strides(&self.legs);
        let legs: Vec<Leg> = order.iter().map(|&i| self.legs[i]).collect();
        Tensor::from_fn(legs, |idx| {
            let off: usize = idx.iter().zip(&order).map(|(&v, &i)| v * strides[i]).sum();
            self.data[off]
        })
        .expect("permutation of a valid tensor")
    }

    /// Fixes `leg` to `value`, removing it from the tensor.
    pub fn project(&self, leg: LegId, value: usize) -> Result<Tensor> {
        let pos = self
            .legs
            .iter()
            .position(|l| l.id == leg)
            .ok_or(Error::UnknownLeg(leg))?;
        let dim = self.legs[pos].dim;
        if value >= dim {
            return Err(Error::IndexOutOfRange { leg, value, dim });
        }
        let inner: usize = self.legs[pos + 1..].iter().map(|l| l.dim).product();
        let outer: usize = self.legs[..pos].iter().map(|l| l.dim).product();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * dim + value) * inner;
            data.extend_from_slice(&self.data[start..start + inner]);
        }
        let mut legs = self.legs.clone();
        legs.remove(pos);
        Ok(Tensor { legs, data })
    }

    /// Elementwise sum with a tensor of identical leg list.
    pub fn add_assign_tensor(&mut self, other: &Tensor) -> Result<()> {
        if self.legs != other.legs {
            return Err(Error::MalformedTensor(
                "cannot add tensors of different shapes".into(),
            ));
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += *y;
        }
        Ok(())
    }

    /// Largest elementwise absolute difference against a tensor of the same shape.
    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f64> {
        let a = self.canonical();
        let b = other.canonical();
        if a.legs != b.legs {
            return None;
        }
        Some(
            a.data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max),
        )
    }
}

/// Contracts `a` with `b`, summing over `closed`. Legs shared by both operands
/// but absent from `closed` are matched elementwise and stay open.
pub fn contract_pair(a: &Tensor, b: &Tensor, closed: &[LegId]) -> Result<Tensor> {
    let mut counters = OpCounters::default();
    contract_pair_counted(a, b, closed, &mut counters)
}

/// [`contract_pair`] that also accumulates the work done into `counters`.
pub fn contract_pair_counted(
    a: &Tensor,
    b: &Tensor,
    closed: &[LegId],
    counters: &mut OpCounters,
) -> Result<Tensor> {
    let layout = pair_layout(&a.legs, &b.legs, closed)?;
    let a_strides = row_major_strides(&a.legs);
    let b_strides = row_major_strides(&b.legs);
    let stride_in = |legs: &[Leg], strides: &[usize], id: LegId| {
        legs.iter()
            .position(|l| l.id == id)
            .map_or(0, |p| strides[p])
    };

    // Offsets of every closed-index combination, ascending row-major order.
    let mut closed_offsets: Vec<(usize, usize)> = vec![(0, 0)];
    for leg in &layout.closed {
        let sa = stride_in(&a.legs, &a_strides, leg.id);
        let sb = stride_in(&b.legs, &b_strides, leg.id);
        closed_offsets = closed_offsets
            .iter()
            .flat_map(|&(oa, ob)| (0..leg.dim).map(move |v| (oa + v * sa, ob + v * sb)))
            .collect();
    }

    let out_geom: Vec<(usize, usize, usize)> = layout
        .result
        .iter()
        .map(|l| {
            (
                l.dim,
                stride_in(&a.legs, &a_strides, l.id),
                stride_in(&b.legs, &b_strides, l.id),
            )
        })
        .collect();
    let n_out = size_of(&layout.result);

    let mut data = Vec::with_capacity(n_out);
    let mut idx = vec![0usize; out_geom.len()];
    let (mut oa, mut ob) = (0usize, 0usize);
    let (mut mults, mut adds) = (0u64, 0u64);
    let (first, rest) = closed_offsets
        .split_first()
        .expect("at least one closed combination");
    for _ in 0..n_out {
        let mut acc = a.data[oa + first.0] * b.data[ob + first.1];
        for &(ca, cb) in rest {
            acc += a.data[oa + ca] * b.data[ob + cb];
        }
        mults += 1 + rest.len() as u64;
        adds += rest.len() as u64;
        data.push(acc);
        for d in (0..out_geom.len()).rev() {
            let (dim, sa, sb) = out_geom[d];
            idx[d] += 1;
            oa += sa;
            ob += sb;
            if idx[d] < dim {
                break;
            }
            oa -= sa * dim;
            ob -= sb * dim;
            idx[d] = 0;
        }
    }

    counters.mults += mults;
    counters.adds += adds;
    counters.rw += (a.data.len() + b.data.len() + data.len()) as u64;
    Ok(Tensor {
        legs: layout.result,
        data,
    })
}

/// Shape-only stand-in for a tensor, used when replaying an evaluation
/// without data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    legs: Vec<Leg>,
}

impl Shape {
    pub fn new(legs: Vec<Leg>) -> Result<Self> {
        check_legs(&legs)?;
        Ok(Shape { legs })
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn size(&self) -> usize {
        size_of(&self.legs)
    }

    /// Result shape of contracting over `closed`, with the predicted counts.
    pub fn contract(&self, other: &Shape, closed: &[LegId]) -> Result<(Shape, OpCounters)> {
        let cost = predicted_cost(&self.legs, &other.legs, closed)?;
        let layout = pair_layout(&self.legs, &other.legs, closed)?;
        Ok((
            Shape {
                legs: layout.result,
            },
            cost,
        ))
    }

    pub fn project(&self, leg: LegId, value: usize) -> Result<Shape> {
        let pos = self
            .legs
            .iter()
            .position(|l| l.id == leg)
            .ok_or(Error::UnknownLeg(leg))?;
        let dim = self.legs[pos].dim;
        if value >= dim {
            return Err(Error::IndexOutOfRange { leg, value, dim });
        }
        let mut legs = self.legs.clone();
        legs.remove(pos);
        Ok(Shape { legs })
    }
}

impl From<&Tensor> for Shape {
    fn from(t: &Tensor) -> Self {
        Shape {
            legs: t.legs.clone(),
        }
    }
}
