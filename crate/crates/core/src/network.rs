//! Tensor-network diagrams built from circuits, and the per-request tensor
//! assignments that turn one diagram into many concrete networks.

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::tensor::{Leg, LegId, Tensor};
use num_complex::Complex64;
use std::collections::{BTreeMap, HashMap};

/// One variable slot of a diagram together with its default tensor value.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub tensor: Tensor,
    /// Open legs carried by this slot, in open-leg order.
    pub open_legs: Vec<LegId>,
}

impl Slot {
    pub fn legs(&self) -> &[Leg] {
        self.tensor.legs()
    }
}

/// A graph tensor network with variable slots and an ordered open-leg list.
///
/// Leg ids are dense (`0..num_legs`). Every closed leg is attached to exactly
/// two slots and every open leg to exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDiagram {
    slots: Vec<Slot>,
    leg_dims: Vec<usize>,
    leg_slots: Vec<Vec<usize>>,
    open_legs: Vec<LegId>,
}

impl NetworkDiagram {
    /// Builds a diagram from slot tensors; `open_legs[q]` is the open leg for
    /// output position `q`.
    pub fn from_tensors(tensors: Vec<Tensor>, open_legs: Vec<LegId>) -> Result<Self> {
        let num_legs = tensors
            .iter()
            .flat_map(|t| t.legs().iter().map(|l| l.id as usize + 1))
            .chain(open_legs.iter().map(|&l| l as usize + 1))
            .max()
            .unwrap_or(0);
        let mut leg_dims = vec![0usize; num_legs];
        let mut leg_slots = vec![Vec::new(); num_legs];
        for (j, t) in tensors.iter().enumerate() {
            for leg in t.legs() {
                let id = leg.id as usize;
                if leg_dims[id] != 0 && leg_dims[id] != leg.dim {
                    return Err(Error::LegDimConflict {
                        leg: leg.id,
                        left: leg_dims[id],
                        right: leg.dim,
                    });
                }
                leg_dims[id] = leg.dim;
                leg_slots[id].push(j);
                if leg_slots[id].len() > 2 {
                    return Err(Error::Hyperedge(leg.id));
                }
            }
        }
        for (id, slots) in leg_slots.iter().enumerate() {
            let is_open = open_legs.contains(&(id as LegId));
            match (slots.len(), is_open) {
                (0, _) => {
                    return Err(Error::MalformedTensor(format!(
                        "leg {id} is not attached to any slot"
                    )))
                }
                (1, false) => {
                    return Err(Error::MalformedTensor(format!(
                        "dangling leg {id} is not declared open"
                    )))
                }
                (2, true) => {
                    return Err(Error::MalformedTensor(format!(
                        "open leg {id} connects two slots"
                    )))
                }
                _ => {}
            }
        }
        for (i, l) in open_legs.iter().enumerate() {
            if open_legs[..i].contains(l) {
                return Err(Error::MalformedTensor(format!("open leg {l} listed twice")));
            }
        }
        let slots = tensors
            .into_iter()
            .map(|tensor| {
                let open = open_legs
                    .iter()
                    .copied()
                    .filter(|&l| tensor.has_leg(l))
                    .collect();
                Slot {
                    tensor,
                    open_legs: open,
                }
            })
            .collect();
        Ok(NetworkDiagram {
            slots,
            leg_dims,
            leg_slots,
            open_legs,
        })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_legs(&self) -> usize {
        self.leg_dims.len()
    }

    pub fn leg_dim(&self, id: LegId) -> usize {
        self.leg_dims[id as usize]
    }

    pub fn leg_dims(&self) -> &[usize] {
        &self.leg_dims
    }

    /// Slots attached to a leg (one for open legs, two for closed legs).
    pub fn leg_slots(&self, id: LegId) -> &[usize] {
        &self.leg_slots[id as usize]
    }

    pub fn open_legs(&self) -> &[LegId] {
        &self.open_legs
    }

    pub fn is_open(&self, id: LegId) -> bool {
        self.open_legs.contains(&id)
    }

    /// Legs that connect two slots.
    pub fn closed_legs(&self) -> impl Iterator<Item = LegId> + '_ {
        (0..self.num_legs() as LegId).filter(|&l| self.leg_slots[l as usize].len() == 2)
    }

    /// Position of an open leg in the output order.
    pub fn output_position(&self, id: LegId) -> Option<usize> {
        self.open_legs.iter().position(|&l| l == id)
    }
}

/// A network element before legs are numbered.
struct Element {
    qubits: Vec<usize>,
    /// Row-major matrix, or `None` for an initial |0> state.
    matrix: Option<Vec<Complex64>>,
}

fn matmul2(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    (0..4)
        .map(|e| (0..2).map(|k| a[(e / 2) * 2 + k] * b[k * 2 + e % 2]).sum())
        .collect()
}

fn matmul4(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    (0..16)
        .map(|e| (0..4).map(|k| a[(e / 4) * 4 + k] * b[k * 4 + e % 4]).sum())
        .collect()
}

/// `a` applied to the first qubit, `b` to the second, as a 4x4 matrix.
fn kron2(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    (0..16)
        .map(|e| {
            let (r, c) = (e / 4, e % 4);
            a[(r / 2) * 2 + c / 2] * b[(r % 2) * 2 + c % 2]
        })
        .collect()
}

fn identity2() -> Vec<Complex64> {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    vec![o, z, z, o]
}

fn elements(circuit: &Circuit, fuse: bool) -> Vec<Element> {
    let n = circuit.n_qubits();
    let mut out: Vec<Element> = (0..n)
        .map(|q| Element {
            qubits: vec![q],
            matrix: None,
        })
        .collect();
    if !fuse {
        out.extend(circuit.gates().iter().map(|g| Element {
            qubits: g.qubits.clone(),
            matrix: Some(g.kind.matrix()),
        }));
        return out;
    }

    let mut pending: Vec<Option<Vec<Complex64>>> = vec![None; n];
    let mut last_two: Vec<Option<usize>> = vec![None; n];
    for g in circuit.gates() {
        let m = g.kind.matrix();
        if let [q] = g.qubits[..] {
            pending[q] = Some(match pending[q].take() {
                Some(p) => matmul2(&m, &p),
                None => m,
            });
            continue;
        }
        let (a, b) = (g.qubits[0], g.qubits[1]);
        let pa = pending[a].take().unwrap_or_else(identity2);
        let pb = pending[b].take().unwrap_or_else(identity2);
        let fused = matmul4(&m, &kron2(&pa, &pb));
        last_two[a] = Some(out.len());
        last_two[b] = Some(out.len());
        out.push(Element {
            qubits: g.qubits.clone(),
            matrix: Some(fused),
        });
    }
    for q in 0..n {
        let Some(p) = pending[q].take() else { continue };
        match last_two[q] {
            Some(e) => {
                let el = &mut out[e];
                let side = if el.qubits[0] == q {
                    kron2(&p, &identity2())
                } else {
                    kron2(&identity2(), &p)
                };
                let m = el.matrix.as_ref().expect("two-qubit element has a matrix");
                el.matrix = Some(matmul4(&side, m));
            }
            None => out.push(Element {
                qubits: vec![q],
                matrix: Some(p),
            }),
        }
    }
    out
}

/// Converts a circuit into a diagram with one slot per initial |0> state and
/// one per (optionally fused) gate.
///
/// Slots are numbered initial states first, then gates in circuit order.
/// Internal legs are numbered by the as-late-as-possible layer of the gate
/// producing them (initial states first), ties broken by qubit; the output
/// legs come last in qubit order.
pub fn to_diagram(circuit: &Circuit, fuse: bool) -> Result<NetworkDiagram> {
    let n = circuit.n_qubits();
    let els = elements(circuit, fuse);

    // Wire segments: (producer, consumer, qubit).
    struct Segment {
        producer: usize,
        consumer: Option<usize>,
        qubit: usize,
    }
    let mut segments: Vec<Segment> = Vec::new();
    let mut current: Vec<usize> = vec![usize::MAX; n];
    let mut inputs: Vec<Vec<usize>> = vec![Vec::new(); els.len()];
    let mut outputs: Vec<Vec<usize>> = vec![Vec::new(); els.len()];
    for (e, el) in els.iter().enumerate() {
        for &q in &el.qubits {
            if el.matrix.is_some() {
                let s = current[q];
                segments[s].consumer = Some(e);
                inputs[e].push(s);
            }
            current[q] = segments.len();
            outputs[e].push(segments.len());
            segments.push(Segment {
                producer: e,
                consumer: None,
                qubit: q,
            });
        }
    }

    // ASAP depth, then ALAP layers; initial states sit at layer -1.
    let mut asap = vec![-1i64; els.len()];
    for e in n..els.len() {
        asap[e] = inputs[e]
            .iter()
            .map(|&s| asap[segments[s].producer] + 1)
            .max()
            .unwrap_or(0);
    }
    let depth = asap.iter().copied().max().unwrap_or(-1) + 1;
    let mut alap = vec![-1i64; els.len()];
    for e in (n..els.len()).rev() {
        alap[e] = outputs[e]
            .iter()
            .filter_map(|&s| segments[s].consumer)
            .map(|c| alap[c] - 1)
            .min()
            .unwrap_or(depth - 1);
    }

    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by_key(|&s| {
        let seg = &segments[s];
        (
            seg.consumer.is_none(),
            if seg.consumer.is_none() {
                0
            } else {
                alap[seg.producer]
            },
            seg.qubit,
        )
    });
    let mut leg_of = vec![0 as LegId; segments.len()];
    for (id, &s) in order.iter().enumerate() {
        leg_of[s] = id as LegId;
    }

    let tensors = els
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let mut legs: Vec<Leg> = outputs[e].iter().map(|&s| Leg::qubit(leg_of[s])).collect();
            legs.extend(inputs[e].iter().map(|&s| Leg::qubit(leg_of[s])));
            let data = match &el.matrix {
                Some(m) => m.clone(),
                None => vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            };
            Tensor::new(legs, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let open_legs = (0..n).map(|q| leg_of[current[q]]).collect();
    NetworkDiagram::from_tensors(tensors, open_legs)
}

/// Per-slot value sets and per-request index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSet {
    /// `value_sets[j]` lists the distinct tensors slot `j` takes.
    pub value_sets: Vec<Vec<Tensor>>,
    /// One tuple per request; `tuples[i][j]` indexes `value_sets[j]`.
    pub tuples: Vec<Vec<u32>>,
    /// Open legs left uncontracted in every request.
    pub batch_legs: Vec<LegId>,
}

impl AssignmentSet {
    pub fn num_requests(&self) -> usize {
        self.tuples.len()
    }

    pub fn num_slots(&self) -> usize {
        self.value_sets.len()
    }

    pub fn value_counts(&self) -> Vec<usize> {
        self.value_sets.iter().map(Vec::len).collect()
    }

    /// Checks slot count and tuple ranges.
    pub fn validate(&self, num_slots: usize) -> Result<()> {
        if self.value_sets.len() != num_slots {
            return Err(Error::PlanMismatch(format!(
                "{} value sets for {} slots",
                self.value_sets.len(),
                num_slots
            )));
        }
        if let Some(j) = self.value_sets.iter().position(Vec::is_empty) {
            return Err(Error::PlanMismatch(format!("slot {j} has no values")));
        }
        for (i, t) in self.tuples.iter().enumerate() {
            if t.len() != num_slots
                || t.iter()
                    .zip(&self.value_sets)
                    .any(|(&v, set)| v as usize >= set.len())
            {
                return Err(Error::PlanMismatch(format!(
                    "request tuple {i} is out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Parses one request over `{0, 1, *}`; `*` marks a batch (open) position.
pub fn parse_bits(s: &str, n: usize, index: usize) -> Result<Vec<Option<u8>>> {
    let bits: Vec<Option<u8>> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(Some(0)),
            '1' => Ok(Some(1)),
            '*' => Ok(None),
            other => Err(Error::Bitstring {
                index,
                msg: format!("invalid character '{other}'"),
            }),
        })
        .collect::<Result<_>>()?;
    if bits.len() != n {
        return Err(Error::Bitstring {
            index,
            msg: format!("length {} != {}", bits.len(), n),
        });
    }
    Ok(bits)
}

/// Requests grouped by the open legs their `*` positions select, groups in
/// order of first appearance. Characters past the qubit count are ignored
/// here and rejected by [`build_assignments`].
pub fn group_by_pattern<S: AsRef<str>>(
    d: &NetworkDiagram,
    bitstrings: &[S],
) -> Vec<(Vec<LegId>, Vec<usize>)> {
    let mut groups: Vec<(Vec<LegId>, Vec<usize>)> = Vec::new();
    let mut index: HashMap<Vec<LegId>, usize> = HashMap::new();
    for (i, s) in bitstrings.iter().enumerate() {
        let legs: Vec<LegId> = s
            .as_ref()
            .chars()
            .zip(d.open_legs())
            .filter(|(c, _)| *c == '*')
            .map(|(_, &l)| l)
            .collect();
        let g = *index.entry(legs.clone()).or_insert_with(|| {
            groups.push((legs, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    groups
}

/// Builds value sets and tuples for a list of requests. Output position `q`
/// of each string fixes open leg `d.open_legs()[q]`; positions whose legs are
/// in `batch_legs` must be `*` and stay open.
pub fn build_assignments<S: AsRef<str>>(
    d: &NetworkDiagram,
    bitstrings: &[S],
    batch_legs: &[LegId],
) -> Result<AssignmentSet> {
    let n = d.open_legs().len();
    if let Some(&l) = batch_legs.iter().find(|&&l| !d.is_open(l)) {
        return Err(Error::UnknownLeg(l));
    }
    let requests = bitstrings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let bits = parse_bits(s.as_ref(), n, i)?;
            for (q, b) in bits.iter().enumerate() {
                let batch = batch_legs.contains(&d.open_legs()[q]);
                match (b, batch) {
                    (Some(_), true) => {
                        return Err(Error::Bitstring {
                            index: i,
                            msg: format!("position {q} is a batch leg and must be '*'"),
                        })
                    }
                    (None, false) => {
                        return Err(Error::Bitstring {
                            index: i,
                            msg: format!("'*' at position {q}, which is not a batch leg"),
                        })
                    }
                    _ => {}
                }
            }
            Ok(bits)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut value_sets = Vec::with_capacity(d.num_slots());
    let mut columns: Vec<Vec<u32>> = Vec::with_capacity(d.num_slots());
    for slot in d.slots() {
        let fixed: Vec<(LegId, usize)> = slot
            .open_legs
            .iter()
            .filter(|l| !batch_legs.contains(l))
            .map(|&l| (l, d.output_position(l).expect("open leg")))
            .collect();
        if fixed.is_empty() {
            value_sets.push(vec![slot.tensor.clone()]);
            columns.push(vec![0; requests.len()]);
            continue;
        }
        let keys: Vec<Vec<u8>> = requests
            .iter()
            .map(|bits| {
                fixed
                    .iter()
                    .map(|&(_, q)| bits[q].expect("fixed position"))
                    .collect()
            })
            .collect();
        let mut distinct: BTreeMap<Vec<u8>, u32> = keys.iter().map(|k| (k.clone(), 0)).collect();
        let mut values = Vec::with_capacity(distinct.len());
        for (idx, (key, slot_idx)) in distinct.iter_mut().enumerate() {
            *slot_idx = idx as u32;
            let mut t = slot.tensor.clone();
            for (&(leg, _), &bit) in fixed.iter().zip(key) {
                t = t.project(leg, bit as usize)?;
            }
            values.push(t);
        }
        columns.push(keys.iter().map(|k| distinct[k]).collect());
        value_sets.push(values);
    }

    let tuples = (0..requests.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let mut batch_legs = batch_legs.to_vec();
    batch_legs.sort_unstable();
    batch_legs.dedup();
    Ok(AssignmentSet {
        value_sets,
        tuples,
        batch_legs,
    })
}
