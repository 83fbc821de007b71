use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::SweepResult;
use crate::classify::{Classifier, MetricReport, Prediction};
use crate::error::{Error, Result};
use crate::inference::{FitReport, ModelConfig};
use crate::network::LabelSet;

/// Everything needed to predict and re-export without refitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub config: ModelConfig,
    pub node_names: Vec<String>,
    pub class_names: Vec<String>,
    pub train_nodes: Vec<usize>,
    pub classifier: Classifier,
    pub report: FitReport,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `lines` to `path`, one per line.
fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = create(path)?;
    for line in lines {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn header(prefix: &str, count: usize) -> String {
    (0..count).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

pub fn write_pi(path: &Path, pi_hat: &[Vec<f64>]) -> Result<()> {
    write_lines(path, pi_hat.iter().map(|row| join(row)))
}

/// φ̂ transposed to one row per node, so each column sums to 1.
pub fn write_phi(path: &Path, phi_hat: &[Vec<f64>], node_names: &[String]) -> Result<()> {
    let k = phi_hat.len();
    let rows = node_names.iter().enumerate().map(|(v, name)| {
        let row: Vec<f64> = (0..k).map(|a| phi_hat[a][v]).collect();
        format!("{name},{}", join(&row))
    });
    write_lines(path, std::iter::once(format!("node,{}", header("position_", k))).chain(rows))
}

/// φ̂ rows ordered by true class (unlabelled nodes last), plus a sidecar of
/// `class,start,end` row ranges.
pub fn write_phi_by_class(
    path: &Path,
    boundaries: &Path,
    phi_hat: &[Vec<f64>],
    node_names: &[String],
    labels: &LabelSet,
) -> Result<()> {
    let k = phi_hat.len();
    let c = labels.class_count();
    let mut order: Vec<usize> = (0..node_names.len()).collect();
    order.sort_by_key(|&v| (labels.label(v).unwrap_or(c), v));
    let rows = order.iter().map(|&v| {
        let class = labels.label(v).map_or("", |y| labels.class_names()[y].as_str());
        let row: Vec<f64> = (0..k).map(|a| phi_hat[a][v]).collect();
        format!("{},{class},{}", node_names[v], join(&row))
    });
    write_lines(
        path,
        std::iter::once(format!("node,class,{}", header("position_", k))).chain(rows),
    )?;

    let mut spans = vec!["class,start,end".to_string()];
    let mut start = 0;
    for y in 0..=c {
        let count = order.iter().filter(|&&v| labels.label(v).unwrap_or(c) == y).count();
        if count > 0 {
            let name = if y < c { labels.class_names()[y].as_str() } else { "" };
            spans.push(format!("{name},{start},{}", start + count));
        }
        start += count;
    }
    write_lines(boundaries, spans)
}

/// Position pairs by descending π̂ mass, with the running total.
pub fn write_pi_summary(path: &Path, pi_hat: &[Vec<f64>], top: usize) -> Result<()> {
    let mut pairs: Vec<(usize, usize, f64)> = pi_hat
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().map(move |(b, &m)| (a, b, m)))
        .collect();
    pairs.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let mut cumulative = 0.0;
    let rows = pairs.into_iter().take(top).enumerate().map(|(rank, (a, b, m))| {
        cumulative += m;
        format!("{},{a},{b},{m},{cumulative}", rank + 1)
    });
    write_lines(
        path,
        std::iter::once("rank,from_position,to_position,mass,cumulative".to_string()).chain(rows),
    )
}

pub fn write_predictions(
    path: &Path,
    predictions: &[Prediction],
    node_names: &[String],
    classes: usize,
) -> Result<()> {
    let rows = predictions.iter().map(|p| {
        format!(
            "{},{},{},{}",
            node_names[p.node],
            p.predicted_class,
            join(&p.score_vector),
            p.fallback
        )
    });
    write_lines(
        path,
        std::iter::once(format!("node,predicted_class,{},fallback", header("score_", classes))).chain(rows),
    )
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    write_lines(
        path,
        std::iter::once("iteration,free_energy".to_string())
            .chain(trace.iter().enumerate().map(|(i, f)| format!("{},{f}", i + 1))),
    )
}

#[derive(Debug, Serialize)]
struct MetricsDocument<'a> {
    test: Option<&'a MetricReport>,
    train_macro_f1: f64,
    train_accuracy: f64,
    iterations: usize,
    converged: bool,
    final_free_energy: f64,
    line_search_failures: usize,
}

pub fn write_metrics(path: &Path, test: Option<&MetricReport>, report: &FitReport) -> Result<()> {
    let doc = MetricsDocument {
        test,
        train_macro_f1: report.train_macro_f1,
        train_accuracy: report.train_accuracy,
        iterations: report.iterations_used,
        converged: report.converged,
        final_free_energy: report.final_free_energy(),
        line_search_failures: report.line_search_failures,
    };
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// π̂, φ̂, class-ordered φ̂ with boundaries, and the top-pair summary.
pub fn export_blockmodel(
    report: &FitReport,
    node_names: &[String],
    labels: &LabelSet,
    out_dir: &Path,
) -> Result<()> {
    write_pi(&out_dir.join("pi.csv"), &report.pi_hat)?;
    write_phi(&out_dir.join("phi.csv"), &report.phi_hat, node_names)?;
    write_phi_by_class(
        &out_dir.join("phi_by_class.csv"),
        &out_dir.join("phi_by_class_boundaries.csv"),
        &report.phi_hat,
        node_names,
        labels,
    )?;
    write_pi_summary(&out_dir.join("pi_summary.csv"), &report.pi_hat, 20)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `sweep.csv` (one row per cell) and `runs.csv` (one row per run).
pub fn write_sweep(out_dir: &Path, result: &SweepResult) -> Result<()> {
    let cells = result.cells.iter().map(|c| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.k,
            c.train_fraction,
            c.accepted,
            c.rejected,
            opt(c.mean_macro_f1),
            opt(c.std_macro_f1),
            opt(c.mean_accuracy),
            opt(c.std_accuracy),
            opt(c.mean_free_energy),
            opt(c.mean_baseline_macro_f1),
            opt(c.mean_baseline_accuracy),
        )
    });
    write_lines(
        &out_dir.join("sweep.csv"),
        std::iter::once(
            "k,train_fraction,accepted,rejected,mean_macro_f1,std_macro_f1,mean_accuracy,std_accuracy,mean_free_energy,mean_baseline_macro_f1,mean_baseline_accuracy"
                .to_string(),
        )
        .chain(cells),
    )?;
    let runs = result.runs.iter().map(|r| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.train_fraction,
            r.run,
            r.split_seed,
            r.fit_seed,
            serde_json::to_value(r.mode).expect("enum").as_str().unwrap_or_default(),
            serde_json::to_value(r.init_mode).expect("enum").as_str().unwrap_or_default(),
            r.attempts,
            r.train_macro_f1,
            r.test_macro_f1,
            r.test_accuracy,
            r.accepted,
            r.iterations,
            r.converged,
            r.final_free_energy,
            r.pi_diagonal_mass,
            opt(r.baseline_macro_f1),
            opt(r.baseline_accuracy),
        )
    });
    write_lines(
        &out_dir.join("runs.csv"),
        std::iter::once(
            "k,train_fraction,run,split_seed,fit_seed,mode,init_mode,attempts,train_macro_f1,test_macro_f1,test_accuracy,accepted,iterations,converged,final_free_energy,pi_diagonal_mass,baseline_macro_f1,baseline_accuracy"
                .to_string(),
        )
        .chain(runs),
    )?;
    let timing = result
        .runs
        .iter()
        .map(|r| format!("{},{},{},{}", r.k, r.train_fraction, r.run, r.wall_seconds));
    write_lines(
        &out_dir.join("timing.csv"),
        std::iter::once("k,train_fraction,run,wall_seconds".to_string()).chain(timing),
    )
}
