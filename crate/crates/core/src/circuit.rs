//! Quantum circuits and the plain-text circuit format.
//!
//! ```text
//! # comment
//! 3
//! 0 h 0
//! 1 cx 0 1
//! 2 fs 1 2 1.5707963 0.5235988
//! ```
//!
//! The first non-comment line is the qubit count; every other line is
//! `<moment> <gate> <q0> [<q1>] [<param>...]` with angles in radians.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Rz(f64),
    /// Square root of X.
    X12,
    /// Square root of Y.
    Y12,
    /// Square root of W = (X + Y) / sqrt 2.
    Hz12,
    Cz,
    /// Controlled NOT, control on the first qubit.
    Cx,
    FSim {
        theta: f64,
        phi: f64,
    },
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cz | GateKind::Cx | GateKind::FSim { .. } => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::T => "t",
            GateKind::Rz(_) => "rz",
            GateKind::X12 => "x_1_2",
            GateKind::Y12 => "y_1_2",
            GateKind::Hz12 => "hz_1_2",
            GateKind::Cz => "cz",
            GateKind::Cx => "cx",
            GateKind::FSim { .. } => "fs",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            GateKind::Rz(t) => vec![t],
            GateKind::FSim { theta, phi } => vec![theta, phi],
            _ => Vec::new(),
        }
    }

    fn from_name(name: &str, params: &[f64]) -> std::result::Result<Self, String> {
        let expect = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "gate {name} takes {n} parameter(s), got {}",
                    params.len()
                ))
            }
        };
        let kind = match name {
            "h" => GateKind::H,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "s" => GateKind::S,
            "t" => GateKind::T,
            "x_1_2" => GateKind::X12,
            "y_1_2" => GateKind::Y12,
            "hz_1_2" => GateKind::Hz12,
            "cz" => GateKind::Cz,
            "cx" => GateKind::Cx,
            "rz" => {
                expect(1)?;
                return Ok(GateKind::Rz(params[0]));
            }
            "fs" => {
                expect(2)?;
                return Ok(GateKind::FSim {
                    theta: params[0],
                    phi: params[1],
                });
            }
            other => return Err(format!("unknown gate '{other}'")),
        };
        expect(0)?;
        Ok(kind)
    }

    /// Row-major unitary, 2x2 or 4x4. For two-qubit gates the basis index is
    /// `2 * b0 + b1` with `b0` the first listed qubit.
    pub fn matrix(&self) -> Vec<Complex64> {
        let c = Complex64::new;
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let h = FRAC_1_SQRT_2;
        match *self {
            GateKind::H => vec![c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)],
            GateKind::X => vec![z, o, o, z],
            GateKind::Y => vec![z, c(0., -1.), c(0., 1.), z],
            GateKind::Z => vec![o, z, z, -o],
            GateKind::S => vec![o, z, z, c(0., 1.)],
            GateKind::T => vec![o, z, z, c(h, h)],
            GateKind::Rz(t) => {
                vec![
                    Complex64::from_polar(1.0, -t / 2.0),
                    z,
                    z,
                    Complex64::from_polar(1.0, t / 2.0),
                ]
            }
            GateKind::X12 => {
                vec![c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)]
            }
            GateKind::Y12 => {
                vec![c(0.5, 0.5), c(-0.5, -0.5), c(0.5, 0.5), c(0.5, 0.5)]
            }
            GateKind::Hz12 => vec![c(0.5, 0.5), c(0., -h), c(h, 0.), c(0.5, 0.5)],
            GateKind::Cz => {
                let mut m = vec![z; 16];
                m[0] = o;
                m[5] = o;
                m[10] = o;
                m[15] = -o;
                m
            }
            GateKind::Cx => {
                let mut m = vec![z; 16];
                m[0] = o;
                m[5] = o;
                m[11] = o;
                m[14] = o;
                m
            }
            GateKind::FSim { theta, phi } => {
                let mut m = vec![z; 16];
                m[0] = o;
                m[5] = c(theta.cos(), 0.);
                m[6] = c(0., -theta.sin());
                m[9] = c(0., -theta.sin());
                m[10] = c(theta.cos(), 0.);
                m[15] = Complex64::from_polar(1.0, -phi);
                m
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub moment: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

/// Checks one gate list; on failure returns the offending gate index (if any)
/// and a message.
fn validate(n_qubits: usize, gates: &[Gate]) -> std::result::Result<(), (Option<usize>, String)> {
    if n_qubits == 0 {
        return Err((None, "circuit needs at least one qubit".into()));
    }
    let mut last_moment = 0;
    let mut busy: Vec<usize> = Vec::new();
    for (i, g) in gates.iter().enumerate() {
        let fail = |msg: String| Err((Some(i), msg));
        if g.qubits.len() != g.kind.arity() {
            return fail(format!(
                "{} expects {} qubit(s)",
                g.kind.name(),
                g.kind.arity()
            ));
        }
        if let Some(&q) = g.qubits.iter().find(|&&q| q >= n_qubits) {
            return fail(format!("qubit {q} out of range for {n_qubits} qubits"));
        }
        if g.qubits.len() == 2 && g.qubits[0] == g.qubits[1] {
            return fail("repeated qubit in two-qubit gate".into());
        }
        if i > 0 && g.moment < last_moment {
            return fail("moments must not decrease".into());
        }
        if i == 0 || g.moment != last_moment {
            busy.clear();
        }
        if let Some(&q) = g.qubits.iter().find(|q| busy.contains(q)) {
            return fail(format!("qubit {q} used twice in moment {}", g.moment));
        }
        busy.extend_from_slice(&g.qubits);
        last_moment = g.moment;
    }
    Ok(())
}

impl Circuit {
    /// Validates qubit ranges, moment ordering and per-moment qubit overlap.
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        validate(n_qubits, &gates).map_err(|(i, msg)| match i {
            Some(i) => Error::InvalidCircuit(format!("gate {i}: {msg}")),
            None => Error::InvalidCircuit(msg),
        })?;
        Ok(Circuit { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n_qubits);
        for g in &self.gates {
            write!(out, "{} {}", g.moment, g.kind.name()).unwrap();
            for q in &g.qubits {
                write!(out, " {q}").unwrap();
            }
            for p in g.kind.params() {
                write!(out, " {p:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the text circuit format.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut n_qubits: Option<(usize, usize)> = None;
    let mut gates = Vec::new();
    let mut lines = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some(_) = n_qubits else {
            let n = content
                .parse::<usize>()
                .map_err(|_| err(line_no, format!("expected qubit count, got '{content}'")))?;
            n_qubits = Some((n, line_no));
            continue;
        };
        let mut fields = content.split_whitespace();
        let moment = fields
            .next()
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(|| err(line_no, "expected moment index".into()))?;
        let name = fields
            .next()
            .ok_or_else(|| err(line_no, "missing gate name".into()))?;
        let rest: Vec<&str> = fields.collect();
        let probe = GateKind::from_name(name, &[]).or_else(|_| match name {
            "rz" => Ok(GateKind::Rz(0.0)),
            "fs" => Ok(GateKind::FSim {
                theta: 0.0,
                phi: 0.0,
            }),
            _ => Err(format!("unknown gate '{name}'")),
        });
        let arity = probe.map_err(|m| err(line_no, m))?.arity();
        if rest.len() < arity {
            return Err(err(line_no, format!("gate {name} needs {arity} qubit(s)")));
        }
        let qubits = rest[..arity]
            .iter()
            .map(|f| {
                f.parse::<usize>()
                    .map_err(|_| err(line_no, format!("bad qubit index '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let params = rest[arity..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(line_no, format!("malformed parameter '{f}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let kind = GateKind::from_name(name, &params).map_err(|m| err(line_no, m))?;
        gates.push(Gate {
            moment,
            kind,
            qubits,
        });
        lines.push(line_no);
    }

    let (n, n_line) = n_qubits.ok_or_else(|| err(1, "missing qubit count".into()))?;
    validate(n, &gates).map_err(|(i, msg)| err(i.map_or(n_line, |i| lines[i]), msg))?;
    Ok(Circuit { n_qubits: n, gates })
}
