use crate::{CircuitArgs, EvalArgs, Format, Mode, OptimizeArgs, XebArgs};
use multitensor::multieval::{
    emulate as emulate_plan, evaluate_bitstrings, format_amplitude_tsv, EvalOptions,
};
use multitensor::network::group_by_pattern;
use multitensor::optimizer::anneal_from;
use multitensor::plan::{AnnotatedPlan, Multiplicity, Plan, Tree, Workload};
use multitensor::xeb::{parse_instances, parse_sample_probs, summarize, XebReport};
use multitensor::{
    build_assignments, parse_circuit, to_diagram, AssignmentSet, Error, LegId, NetworkDiagram,
};
use num_complex::Complex64;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Memory(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Memory(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::MemoryCapExceeded { .. } => CliError::Memory(e.to_string()),
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_context(path: &Path, e: Error) -> CliError {
    match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load_diagram(args: &CircuitArgs) -> Result<NetworkDiagram> {
    let circuit =
        parse_circuit(&read(&args.circuit)?).map_err(|e| with_context(&args.circuit, e))?;
    Ok(to_diagram(&circuit, args.fuse)?)
}

/// Bitstrings in engine order (qubit 0 first).
fn load_samples(path: &Path, reverse: bool) -> Result<Vec<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            if reverse {
                l.chars().rev().collect()
            } else {
                l.to_string()
            }
        })
        .collect())
}

fn load_plan(path: Option<&PathBuf>, d: &NetworkDiagram) -> Result<Plan> {
    match path {
        Some(p) => Plan::parse(&read(p)?).map_err(|e| with_context(p, e)),
        None => Ok(Plan::left_deep(d.num_slots())?),
    }
}

fn group_assignments(
    d: &NetworkDiagram,
    samples: &[String],
    mask: &[LegId],
    idx: &[usize],
) -> Result<AssignmentSet> {
    let reqs: Vec<&str> = idx.iter().map(|&i| samples[i].as_str()).collect();
    build_assignments(d, &reqs, mask).map_err(|e| match e {
        Error::Bitstring { index, msg } => Error::Bitstring {
            index: idx[index],
            msg,
        }
        .into(),
        e => e.into(),
    })
}

fn eval_options(args: &EvalArgs) -> EvalOptions {
    EvalOptions {
        memory_cap: Some(args.memory_cap),
        bytes_per_scalar: args.cost.bytes_per_scalar,
    }
}

fn objective_text(ap: &AnnotatedPlan) -> Result<String> {
    match ap.objective() {
        Ok(f) => Ok(format!("{f:.6}")),
        Err(Error::Empty(_)) => Ok("0".into()),
        Err(e) => Err(e.into()),
    }
}

pub fn optimize(args: &OptimizeArgs) -> Result<()> {
    let d = load_diagram(&args.circuit)?;
    let (workload, k) = match &args.samples {
        Some(path) => {
            let samples = load_samples(path, args.circuit.reverse_bits)?;
            if samples.is_empty() {
                return Err(CliError::Data(format!("{}: no requests", path.display())));
            }
            let groups = group_by_pattern(&d, &samples);
            if groups.len() > 1 {
                return Err(CliError::Data(
                    "optimize needs every request to share one '*' pattern".into(),
                ));
            }
            let (mask, idx) = &groups[0];
            let a = group_assignments(&d, &samples, mask, idx)?;
            (Workload::from_assignments(&d, &a)?, samples.len() as u64)
        }
        None => {
            if args.multiplicity == Mode::Exact {
                return Err(CliError::Usage(
                    "--multiplicity exact needs --samples".into(),
                ));
            }
            if args.requests == 0 {
                return Err(CliError::Usage("--requests must be at least 1".into()));
            }
            (Workload::from_request_count(&d, &[])?, args.requests)
        }
    };
    let mode = match args.multiplicity {
        Mode::Bound => Multiplicity::Bound,
        Mode::Exact => Multiplicity::Exact,
    };
    let cfg = args.cost.config(k);
    let workload = Arc::new(workload);
    let initial = AnnotatedPlan::new(workload.clone(), Plan::left_deep(d.num_slots())?, cfg, mode)?;
    let out = anneal_from(&initial, &args.search())?;
    let ap = AnnotatedPlan::new(workload, out.plan, cfg, mode)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "slots:       {}", d.num_slots());
    let _ = writeln!(summary, "requests:    {k}");
    let _ = writeln!(summary, "cost:        {}", ap.total_cost()?);
    let _ = writeln!(summary, "rw:          {}", ap.total_rw()?);
    let _ = writeln!(
        summary,
        "memory:      {:.0} bytes (estimate)",
        ap.memory_estimate()
    );
    let _ = writeln!(summary, "largest:     {} scalars", ap.max_node_size());
    let _ = writeln!(summary, "slices:      {}", ap.slices());
    let _ = writeln!(
        summary,
        "objective:   {} (initial {})",
        objective_text(&ap)?,
        objective_text(&initial)?
    );
    write_out(args.output.as_ref(), &ap.plan().to_text())?;
    if args.output.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

pub fn amplitudes(args: &EvalArgs) -> Result<()> {
    let d = load_diagram(&args.circuit)?;
    let samples = load_samples(&args.samples, args.circuit.reverse_bits)?;
    let plan = load_plan(args.plan.as_ref(), &d)?;
    let opts = eval_options(args);
    let rows = evaluate_bitstrings(&d, &plan, &samples, args.workers, &opts)?;
    let mut flat: Vec<(String, Complex64)> = rows.into_iter().flatten().collect();
    if args.circuit.reverse_bits {
        for (b, _) in flat.iter_mut() {
            *b = b.chars().rev().collect();
        }
    }
    write_out(args.output.as_ref(), &format_amplitude_tsv(&flat))
}

fn subtree_expr(t: &Tree, n: usize) -> String {
    match t.children(n) {
        None => n.to_string(),
        Some((l, r)) => format!("({} {})", subtree_expr(t, l), subtree_expr(t, r)),
    }
}

pub fn emulate(args: &EvalArgs) -> Result<()> {
    let d = load_diagram(&args.circuit)?;
    let samples = load_samples(&args.samples, args.circuit.reverse_bits)?;
    let plan = load_plan(args.plan.as_ref(), &d)?;
    let opts = eval_options(args);
    let mut out = String::new();
    for (gi, (mask, idx)) in group_by_pattern(&d, &samples).into_iter().enumerate() {
        let a = group_assignments(&d, &samples, &mask, &idx)?;
        let run = emulate_plan(&plan, &a, &opts)?;
        let w = Arc::new(Workload::from_assignments(&d, &a)?);
        let cfg = args.cost.config(idx.len() as u64);
        let exact = AnnotatedPlan::new(w.clone(), plan.clone(), cfg, Multiplicity::Exact)?;
        let bound = AnnotatedPlan::new(w, plan.clone(), cfg, Multiplicity::Bound)?;
        let predicted = exact.total_counters()?;
        let largest_input = a
            .value_sets
            .iter()
            .flatten()
            .map(|t| t.size() as u64 * opts.bytes_per_scalar)
            .max()
            .unwrap_or(0);
        let open: Vec<String> = mask.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(
            out,
            "group {gi}: {} requests, open legs [{}]",
            idx.len(),
            open.join(" ")
        );
        let _ = writeln!(out, "distinct:    {}", run.distinct);
        let _ = writeln!(
            out,
            "flops:       {} (predicted {})",
            run.counters.flops(),
            predicted.flops()
        );
        let _ = writeln!(out, "mults:       {}", run.counters.mults);
        let _ = writeln!(out, "adds:        {}", run.counters.adds);
        let _ = writeln!(
            out,
            "rw:          {} (predicted {})",
            run.counters.rw, predicted.rw
        );
        let _ = writeln!(
            out,
            "peak:        {} bytes of intermediates",
            run.peak_bytes
        );
        let _ = writeln!(out, "max input:   {largest_input} bytes");
        let _ = writeln!(out, "estimate M:  {:.0} bytes", exact.memory_estimate());
        let _ = writeln!(out, "objective:   {}", objective_text(&exact)?);
        let _ = writeln!(out, "node\tsize\tk_exact\tk_bound\tcontractions\texpr");
        for n in plan.tree.internal_nodes() {
            let _ = writeln!(
                out,
                "{n}\t{}\t{}\t{}\t{}\t{}",
                exact.size(n),
                exact.kt(n),
                bound.kt(n),
                run.node_contractions[n],
                subtree_expr(&plan.tree, n)
            );
        }
    }
    write_out(args.output.as_ref(), &out)
}

pub fn xeb(args: &XebArgs) -> Result<()> {
    let report = if let Some(path) = &args.summarize {
        let inst = parse_instances(&read(path)?).map_err(|e| with_context(path, e))?;
        summarize(&inst, args.samples.expect("clap requires --samples"))?
    } else {
        let path = args.input.as_ref().expect("clap requires a source");
        let n = args
            .qubits
            .ok_or_else(|| CliError::Usage("--qubits is required with --input".into()))?;
        let probs = parse_sample_probs(&read(path)?).map_err(|e| with_context(path, e))?;
        XebReport::from_probs(n, &probs).map_err(|e| with_context(path, e))?
    };
    let text = match args.format {
        Format::Text => report.summary_text(),
        Format::Tsv => report.to_tsv(),
    };
    write_out(args.output.as_ref(), &text)
}
