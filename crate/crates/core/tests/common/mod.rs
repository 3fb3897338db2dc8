//! Test oracles and random instance generators shared by the integration
//! tests.
#![allow(dead_code)]

use multitensor::circuit::{Circuit, Gate, GateKind};
use multitensor::network::{AssignmentSet, NetworkDiagram};
use multitensor::plan::{NodeId, Plan, Tree};
use multitensor::tensor::{contract_pair, Leg, LegId, Tensor};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::PI;

pub const FIG_CIRCUIT: &str = "3\n0 h 0\n0 t 2\n1 cx 0 1\n2 cx 1 2\n3 h 0\n3 h 1\n";
pub const FIG_PLAN: &str = "(((0 3) (1 5)) ((2 4) (6 8))) 7";

/// Dense state-vector simulation. Basis index bit `n-1-q` is qubit `q`, so
/// index order matches bitstrings read left to right.
pub fn state_vector(c: &Circuit) -> Vec<Complex64> {
    let n = c.n_qubits();
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << n];
    psi[0] = Complex64::new(1.0, 0.0);
    let bit = |q: usize| 1usize << (n - 1 - q);
    for g in c.gates() {
        let u = g.kind.matrix();
        match g.qubits[..] {
            [q] => {
                for i in 0..psi.len() {
                    if i & bit(q) == 0 {
                        let j = i | bit(q);
                        let (a0, a1) = (psi[i], psi[j]);
                        psi[i] = u[0] * a0 + u[1] * a1;
                        psi[j] = u[2] * a0 + u[3] * a1;
                    }
                }
            }
            [qa, qb] => {
                for i in 0..psi.len() {
                    if i & bit(qa) == 0 && i & bit(qb) == 0 {
                        let idx = [i, i | bit(qb), i | bit(qa), i | bit(qa) | bit(qb)];
                        let old: Vec<Complex64> = idx.iter().map(|&k| psi[k]).collect();
                        for (r, &k) in idx.iter().enumerate() {
                            psi[k] = (0..4).map(|s| u[r * 4 + s] * old[s]).sum();
                        }
                    }
                }
            }
            _ => unreachable!("gates act on one or two qubits"),
        }
    }
    psi
}

pub fn index_of(bits: &str) -> usize {
    bits.chars().fold(0, |acc, c| 2 * acc + (c == '1') as usize)
}

pub fn bits_of(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| {
            if index >> (n - 1 - q) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

fn random_kind(rng: &mut impl Rng, two: bool) -> GateKind {
    if two {
        match rng.random_range(0..3) {
            0 => GateKind::Cz,
            1 => GateKind::Cx,
            _ => GateKind::FSim {
                theta: rng.random_range(0.0..PI),
                phi: rng.random_range(0.0..2.0 * PI),
            },
        }
    } else {
        match rng.random_range(0..10) {
            0 => GateKind::H,
            1 => GateKind::X,
            2 => GateKind::Y,
            3 => GateKind::Z,
            4 => GateKind::S,
            5 => GateKind::T,
            6 => GateKind::Rz(rng.random_range(-PI..PI)),
            7 => GateKind::X12,
            8 => GateKind::Y12,
            _ => GateKind::Hz12,
        }
    }
}

/// Random circuit over the supported gate set with greedy moment packing.
pub fn random_circuit(rng: &mut impl Rng, n: usize, gates: usize) -> Circuit {
    let mut last = vec![0usize; n];
    let mut list = Vec::with_capacity(gates);
    for _ in 0..gates {
        let two = n >= 2 && rng.random_bool(0.4);
        let qubits = if two {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            vec![a, b]
        } else {
            vec![rng.random_range(0..n)]
        };
        let moment = qubits.iter().map(|&q| last[q]).max().unwrap();
        for &q in &qubits {
            last[q] = moment + 1;
        }
        list.push(Gate {
            moment,
            kind: random_kind(rng, two),
            qubits,
        });
    }
    list.sort_by_key(|g| g.moment);
    Circuit::new(n, list).expect("generated circuit is valid")
}

/// Grid circuit in the style of random-circuit-sampling experiments: each
/// cycle applies a random single-qubit gate from {X12, Y12, Hz12} to every
/// qubit, never repeating on a qubit, then fSim(pi/2, pi/6) on one of four
/// coupler patterns.
pub fn grid_circuit(rng: &mut impl Rng, rows: usize, cols: usize, cycles: usize) -> Circuit {
    let n = rows * cols;
    let q = |r: usize, c: usize| r * cols + c;
    let mut couplers: [Vec<(usize, usize)>; 4] = Default::default();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                couplers[if (r + c) % 2 == 0 { 0 } else { 1 }].push((q(r, c), q(r, c + 1)));
            }
            if r + 1 < rows {
                couplers[if (r + c) % 2 == 0 { 2 } else { 3 }].push((q(r, c), q(r + 1, c)));
            }
        }
    }
    let order = [0, 1, 2, 3, 2, 3, 0, 1];
    let mut prev = vec![usize::MAX; n];
    let mut gates = Vec::new();
    for cycle in 0..cycles {
        for (qb, p) in prev.iter_mut().enumerate() {
            let mut k = rng.random_range(0..3);
            while k == *p {
                k = rng.random_range(0..3);
            }
            *p = k;
            let kind = [GateKind::X12, GateKind::Y12, GateKind::Hz12][k];
            gates.push(Gate {
                moment: 2 * cycle,
                kind,
                qubits: vec![qb],
            });
        }
        for &(a, b) in &couplers[order[cycle % 8]] {
            gates.push(Gate {
                moment: 2 * cycle + 1,
                kind: GateKind::FSim {
                    theta: PI / 2.0,
                    phi: PI / 6.0,
                },
                qubits: vec![a, b],
            });
        }
    }
    Circuit::new(n, gates).expect("grid circuit is valid")
}

pub fn random_bitstrings(rng: &mut impl Rng, n: usize, k: usize) -> Vec<String> {
    (0..k)
        .map(|_| {
            (0..n)
                .map(|_| if rng.random_bool(0.5) { '1' } else { '0' })
                .collect()
        })
        .collect()
}

/// Uniformly random binary tree over `m` leaves built by merging random pairs.
pub fn random_tree(rng: &mut impl Rng, m: usize) -> Tree {
    let mut pool: Vec<NodeId> = (0..m).collect();
    let mut pairs = Vec::with_capacity(m.saturating_sub(1));
    while pool.len() > 1 {
        pool.shuffle(rng);
        let a = pool.pop().unwrap();
        let b = pool.pop().unwrap();
        pairs.push([a, b]);
        pool.push(m + pairs.len() - 1);
    }
    Tree::from_pairs(m, &pairs).unwrap()
}

/// Random tree that only merges subtrees sharing a leg when possible, which
/// keeps intermediate results small on circuit networks.
pub fn random_connected_tree(rng: &mut impl Rng, d: &NetworkDiagram) -> Tree {
    let m = d.num_slots();
    let mut legs_of: Vec<Vec<LegId>> = d
        .slots()
        .iter()
        .map(|s| s.legs().iter().map(|l| l.id).collect())
        .collect();
    let mut pool: Vec<NodeId> = (0..m).collect();
    let mut pairs = Vec::new();
    while pool.len() > 1 {
        let i = rng.random_range(0..pool.len());
        let a = pool[i];
        let partners: Vec<usize> = (0..pool.len())
            .filter(|&j| j != i && legs_of[pool[j]].iter().any(|l| legs_of[a].contains(l)))
            .collect();
        let j = if partners.is_empty() {
            let mut j = rng.random_range(0..pool.len() - 1);
            if j >= i {
                j += 1;
            }
            j
        } else {
            partners[rng.random_range(0..partners.len())]
        };
        let b = pool[j];
        let mut merged: Vec<LegId> = legs_of[a].iter().chain(&legs_of[b]).copied().collect();
        merged.sort_unstable();
        let shared: Vec<LegId> = merged
            .windows(2)
            .filter(|w| w[0] == w[1])
            .map(|w| w[0])
            .collect();
        merged.dedup();
        merged.retain(|l| !shared.contains(l));
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        pool.swap_remove(hi);
        pool.swap_remove(lo);
        pairs.push([a, b]);
        let id = m + pairs.len() - 1;
        legs_of.push(merged);
        pool.push(id);
    }
    Tree::from_pairs(m, &pairs).unwrap()
}

/// Evaluates one request by contracting the tree from scratch.
pub fn eval_tree(tree: &Tree, values: &[&Tensor]) -> Tensor {
    fn go(tree: &Tree, n: NodeId, values: &[&Tensor]) -> Tensor {
        match tree.children(n) {
            None => values[n].clone(),
            Some((l, r)) => {
                let a = go(tree, l, values);
                let b = go(tree, r, values);
                let closed: Vec<LegId> = a
                    .legs()
                    .iter()
                    .filter(|x| b.has_leg(x.id))
                    .map(|x| x.id)
                    .collect();
                contract_pair(&a, &b, &closed).unwrap()
            }
        }
    }
    go(tree, tree.root(), values)
}

/// Per-request independent evaluation of every request.
pub fn eval_independent(plan: &Plan, a: &AssignmentSet) -> Vec<Tensor> {
    a.tuples
        .iter()
        .map(|t| {
            let vals: Vec<&Tensor> = t
                .iter()
                .enumerate()
                .map(|(j, &v)| &a.value_sets[j][v as usize])
                .collect();
            eval_tree(&plan.tree, &vals)
        })
        .collect()
}

pub fn random_tensor(rng: &mut impl Rng, legs: Vec<Leg>) -> Tensor {
    Tensor::from_fn(legs, |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
    .unwrap()
}

/// A random connected graph network of `m` tensors with bond dims 2..=3 and
/// a few open legs, plus `variants` random values per slot and random
/// request tuples.
pub struct RandomNetwork {
    pub slot_legs: Vec<Vec<Leg>>,
    pub open_legs: Vec<LegId>,
    pub assignments: AssignmentSet,
}

pub fn random_network(
    rng: &mut impl Rng,
    m: usize,
    variants: usize,
    requests: usize,
) -> RandomNetwork {
    let mut slot_legs: Vec<Vec<Leg>> = vec![Vec::new(); m];
    let mut next: LegId = 0;
    let mut bond =
        |a: usize, b: usize, slot_legs: &mut Vec<Vec<Leg>>, rng: &mut dyn rand::RngCore| {
            let leg = Leg::new(next, rng.random_range(2..=3));
            next += 1;
            slot_legs[a].push(leg);
            slot_legs[b].push(leg);
        };
    for j in 1..m {
        let p = rng.random_range(0..j);
        bond(p, j, &mut slot_legs, rng);
    }
    for _ in 0..m {
        let a = rng.random_range(0..m);
        let b = rng.random_range(0..m);
        if a != b && slot_legs[a].len() < 4 && slot_legs[b].len() < 4 {
            bond(a, b, &mut slot_legs, rng);
        }
    }
    let mut open_legs = Vec::new();
    for legs in slot_legs.iter_mut() {
        if rng.random_bool(0.3) {
            let leg = Leg::new(next, 2);
            next += 1;
            legs.push(leg);
            open_legs.push(leg.id);
        }
    }
    let value_sets: Vec<Vec<Tensor>> = slot_legs
        .iter()
        .map(|legs| {
            (0..rng.random_range(1..=variants))
                .map(|_| random_tensor(rng, legs.clone()))
                .collect()
        })
        .collect();
    let tuples = (0..requests)
        .map(|_| {
            value_sets
                .iter()
                .map(|s| rng.random_range(0..s.len()) as u32)
                .collect()
        })
        .collect();
    RandomNetwork {
        slot_legs,
        open_legs: open_legs.clone(),
        assignments: AssignmentSet {
            value_sets,
            tuples,
            batch_legs: open_legs,
        },
    }
}

/// Samples `k` outcomes from a probability vector.
pub fn sample_from(rng: &mut impl Rng, probs: &[f64], k: usize) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    (0..k)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c < u).min(probs.len() - 1)
        })
        .collect()
}
