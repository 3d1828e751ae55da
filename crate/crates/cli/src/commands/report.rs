use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use spinekit::metrics::{wilcoxon_signed_rank, EvaluationReport};

use crate::output::{display, run_record_beside, write_bytes, write_json, RunRecord};
use crate::usage;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Evaluation JSON files of the first method, one per case.
    #[arg(long, num_args = 1.., required = true)]
    a: Vec<PathBuf>,
    /// Evaluation JSON files of a second method, paired with `--a` by position.
    #[arg(long, num_args = 1..)]
    b: Vec<PathBuf>,
    #[arg(long, default_value = "A")]
    name_a: String,
    #[arg(long, default_value = "B")]
    name_b: String,
    #[arg(long)]
    json: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

type Key = (String, String, String);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub section: String,
    pub structure: String,
    pub metric: String,
    /// Cases where the metric was defined.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation.
    pub sd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub section: String,
    pub structure: String,
    pub metric: String,
    /// Cases defined for both methods.
    pub pairs: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

#[derive(Debug, Serialize)]
struct MethodReport {
    name: String,
    cases: usize,
    metrics: Vec<Summary>,
}

#[derive(Debug, Serialize)]
struct Aggregate {
    methods: Vec<MethodReport>,
    comparisons: Vec<Comparison>,
}

fn load(paths: &[PathBuf]) -> Result<Vec<EvaluationReport>> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{} is not an evaluation report: {e}", p.display())))
        })
        .collect()
}

// Metric values per row key, one slot per case, in first-seen row order.
fn columns(reports: &[EvaluationReport]) -> (Vec<Key>, BTreeMap<Key, Vec<Option<f64>>>) {
    let mut order = Vec::new();
    let mut cols: BTreeMap<Key, Vec<Option<f64>>> = BTreeMap::new();
    for (case, r) in reports.iter().enumerate() {
        for row in r.rows() {
            let key = (row.section, row.structure, row.metric);
            let col = cols.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                vec![None; reports.len()]
            });
            col[case] = row.value;
        }
    }
    (order, cols)
}

pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    (Some(mean), sd)
}

fn summarize(order: &[Key], cols: &BTreeMap<Key, Vec<Option<f64>>>) -> Vec<Summary> {
    order
        .iter()
        .map(|k| {
            let vals: Vec<f64> = cols[k].iter().flatten().copied().collect();
            let (mean, sd) = mean_sd(&vals);
            Summary {
                section: k.0.clone(),
                structure: k.1.clone(),
                metric: k.2.clone(),
                n: vals.len(),
                mean,
                sd,
            }
        })
        .collect()
}

fn fmt_cell(s: Option<&Summary>) -> String {
    match s {
        Some(Summary {
            mean: Some(m),
            sd: Some(sd),
            ..
        }) => format!("{m:.3} ± {sd:.3}"),
        Some(Summary { mean: Some(m), .. }) => format!("{m:.3}"),
        _ => "n/a".into(),
    }
}

pub fn run(args: &Args, threads: Option<usize>) -> Result<()> {
    if !args.b.is_empty() && args.b.len() != args.a.len() {
        return Err(usage(format!(
            "--a has {} files but --b has {}; cases are paired by position",
            args.a.len(),
            args.b.len()
        )));
    }
    let ra = load(&args.a)?;
    let (order, cols_a) = columns(&ra);
    let mut methods = vec![MethodReport {
        name: args.name_a.clone(),
        cases: ra.len(),
        metrics: summarize(&order, &cols_a),
    }];
    let mut comparisons = Vec::new();
    if !args.b.is_empty() {
        let rb = load(&args.b)?;
        let (order_b, cols_b) = columns(&rb);
        methods.push(MethodReport {
            name: args.name_b.clone(),
            cases: rb.len(),
            metrics: summarize(&order_b, &cols_b),
        });
        for k in &order {
            let Some(vb) = cols_b.get(k) else { continue };
            let (x, y): (Vec<f64>, Vec<f64>) = cols_a[k]
                .iter()
                .zip(vb)
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            if x.is_empty() {
                continue;
            }
            let w = wilcoxon_signed_rank(&x, &y)?;
            comparisons.push(Comparison {
                section: k.0.clone(),
                structure: k.1.clone(),
                metric: k.2.clone(),
                pairs: x.len(),
                statistic: w.statistic,
                p_value: w.p_value,
                exact: w.exact,
            });
        }
    }

    let mut csv = String::from("section,structure,metric");
    for m in &methods {
        csv.push_str(&format!(",{0} mean,{0} sd", m.name));
    }
    if !comparisons.is_empty() {
        csv.push_str(",p_value");
    }
    csv.push('\n');
    let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for k in &order {
        let mut line = format!("{},{},{}", k.0, k.1, k.2);
        let mut table = format!("{:<14} {:<20} {:<5}", k.0, k.1, k.2);
        for m in &methods {
            let s = m
                .metrics
                .iter()
                .find(|s| (&s.section, &s.structure, &s.metric) == (&k.0, &k.1, &k.2));
            line.push_str(&format!(
                ",{},{}",
                num(s.and_then(|s| s.mean)),
                num(s.and_then(|s| s.sd))
            ));
            table.push_str(&format!(" {:>17}", fmt_cell(s)));
        }
        if !comparisons.is_empty() {
            let c = comparisons
                .iter()
                .find(|c| (&c.section, &c.structure, &c.metric) == (&k.0, &k.1, &k.2));
            line.push_str(&format!(",{}", num(c.map(|c| c.p_value))));
            table.push_str(&format!(
                " {:>9}",
                c.map(|c| format!("{:.4}", c.p_value)).unwrap_or_default()
            ));
        }
        csv.push_str(&line);
        csv.push('\n');
        println!("{table}");
    }

    let aggregate = Aggregate { methods, comparisons };
    let mut record = RunRecord::new("report", args);
    record.threads = threads;
    record.inputs = args.a.iter().chain(&args.b).map(|p| display(p)).collect();
    write_json(&args.json, &aggregate)?;
    record.outputs.push(display(&args.json));
    if let Some(p) = &args.csv {
        write_bytes(p, csv.as_bytes())?;
        record.outputs.push(display(p));
    }
    write_json(&run_record_beside(&args.json), &record)?;
    Ok(())
}
