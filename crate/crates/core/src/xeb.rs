//! Linear cross-entropy benchmarking over computed output probabilities.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt::Write;

/// Compensated (Neumaier) sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `(2^n / k) * sum(p_i) - 1`.
pub fn linear_xeb(n: usize, probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Empty("no sample probabilities"));
    }
    if let Some((index, &value)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::InvalidProbability { index, value });
    }
    let scale = 2f64.powi(n as i32) / probs.len() as f64;
    Ok(scale * compensated_sum(probs.iter().copied()) - 1.0)
}

/// `|a|^2` for every amplitude.
pub fn probs_from_amplitudes(amps: &[Complex64]) -> Vec<f64> {
    amps.iter().map(|a| a.norm_sqr()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct XebReport {
    /// Qubit count, when known.
    pub n: Option<usize>,
    /// Samples per instance.
    pub k: usize,
    /// Fidelity of a single instance, or the mean over instances.
    pub f_xeb: f64,
    /// `1 / sqrt(k)`.
    pub sigma: f64,
    pub per_instance: Vec<(String, f64)>,
    pub mean: f64,
}

impl XebReport {
    /// Report for one instance sampled `probs.len()` times.
    pub fn from_probs(n: usize, probs: &[f64]) -> Result<XebReport> {
        let f = linear_xeb(n, probs)?;
        let k = probs.len();
        Ok(XebReport {
            n: Some(n),
            k,
            f_xeb: f,
            sigma: 1.0 / (k as f64).sqrt(),
            per_instance: vec![("0".into(), f)],
            mean: f,
        })
    }

    /// `(f - 5 sigma, f + 5 sigma)` for every instance.
    pub fn bounds(&self) -> Vec<(String, f64, f64)> {
        self.per_instance
            .iter()
            .map(|(id, f)| (id.clone(), f - 5.0 * self.sigma, f + 5.0 * self.sigma))
            .collect()
    }

    /// Header plus one row per instance and a final `mean` row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("instance\tf_xeb\tlow_5sigma\thigh_5sigma\n");
        for (id, lo, hi) in self.bounds() {
            let f = self
                .per_instance
                .iter()
                .find(|(i, _)| *i == id)
                .map_or(0.0, |(_, f)| *f);
            writeln!(s, "{id}\t{f:.6e}\t{lo:.6e}\t{hi:.6e}").expect("string write");
        }
        writeln!(
            s,
            "mean\t{:.6e}\t{:.6e}\t{:.6e}",
            self.mean,
            self.mean - 5.0 * self.sigma,
            self.mean + 5.0 * self.sigma
        )
        .expect("string write");
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        if let Some(n) = self.n {
            writeln!(s, "qubits:      {n}").expect("string write");
        }
        writeln!(s, "samples:     {}", self.k).expect("string write");
        writeln!(s, "instances:   {}", self.per_instance.len()).expect("string write");
        writeln!(
            s,
            "f_xeb:       {:.6} ({:.2}%)",
            self.f_xeb,
            100.0 * self.f_xeb
        )
        .expect("string write");
        writeln!(
            s,
            "mean:        {:.6} ({:.2}%)",
            self.mean,
            100.0 * self.mean
        )
        .expect("string write");
        writeln!(s, "sigma:       {:.7}", self.sigma).expect("string write");
        writeln!(s, "5 sigma:     {:.7}", 5.0 * self.sigma).expect("string write");
        s
    }
}

/// Mean fidelity over instances sampled `k` times each.
pub fn summarize(per_instance: &[(String, f64)], k: usize) -> Result<XebReport> {
    if per_instance.is_empty() {
        return Err(Error::Empty("no instances to summarize"));
    }
    if k == 0 {
        return Err(Error::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    let mean = compensated_sum(per_instance.iter().map(|(_, f)| *f)) / per_instance.len() as f64;
    Ok(XebReport {
        n: None,
        k,
        f_xeb: mean,
        sigma: 1.0 / (k as f64).sqrt(),
        per_instance: per_instance.to_vec(),
        mean,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad number '{tok}'"),
        })
}

/// Parses `bitstring<TAB>re<TAB>im` lines.
pub fn parse_amplitude_tsv(text: &str) -> Result<Vec<(String, Complex64)>> {
    content_lines(text)
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split('\t').collect();
            let [b, re, im] = fields[..] else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            };
            if b.is_empty() || !b.chars().all(|c| c == '0' || c == '1') {
                return Err(Error::Parse {
                    line,
                    msg: format!("bad bitstring '{b}'"),
                });
            }
            Ok((
                b.to_string(),
                Complex64::new(parse_f64(line, re)?, parse_f64(line, im)?),
            ))
        })
        .collect()
}

/// Parses one probability per line.
pub fn parse_probabilities(text: &str) -> Result<Vec<f64>> {
    content_lines(text)
        .map(|(line, l)| parse_f64(line, l))
        .collect()
}

/// Sample probabilities from either an amplitude TSV or a probability file.
pub fn parse_sample_probs(text: &str) -> Result<Vec<f64>> {
    if content_lines(text)
        .next()
        .is_some_and(|(_, l)| l.contains('\t'))
    {
        let rows = parse_amplitude_tsv(text)?;
        Ok(rows.iter().map(|(_, a)| a.norm_sqr()).collect())
    } else {
        parse_probabilities(text)
    }
}

/// Instance fidelities, one per line as `f` or `id<TAB>f`.
pub fn parse_instances(text: &str) -> Result<Vec<(String, f64)>> {
    content_lines(text)
        .enumerate()
        .map(|(i, (line, l))| match l.split_once('\t') {
            Some((id, f)) => Ok((id.trim().to_string(), parse_f64(line, f.trim())?)),
            None => Ok((i.to_string(), parse_f64(line, l)?)),
        })
        .collect()
}
