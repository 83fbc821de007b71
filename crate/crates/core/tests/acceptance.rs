//! End-to-end acceptance checks on the benchmark datasets.
//!
//! Prints one PASS/FAIL line per criterion. Criteria whose dataset is absent
//! from `data/` are reported as FAIL with the missing file; the process exits
//! non-zero only when a criterion that could be evaluated fails.
//!
//! `ACCEPTANCE_RUNS` overrides the number of runs per cell for quick local checks.

mod common;

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use sbsn::inference::{FitMode, InitMode, ModelConfig};
use sbsn::network::{load_edge_list, load_labels, InteractionNetwork, LabelSet};
use sbsn::toolkit::{run_experiment_on, ExperimentSpec, SweepResult};

const TWO_THIRDS: f64 = 2.0 / 3.0;
const CITATION_KS: [usize; 4] = [7, 14, 21, 28];

struct Outcome {
    name: &'static str,
    pass: bool,
    evaluated: bool,
    detail: String,
}

impl Outcome {
    fn checked(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, pass, evaluated: true, detail }
    }

    fn missing(name: &'static str, what: &str) -> Self {
        Self {
            name,
            pass: false,
            evaluated: false,
            detail: format!("dataset not found: {what}"),
        }
    }

    fn print(&self) {
        println!("{} {:<30} {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail);
    }
}

struct Dataset {
    edges: PathBuf,
    labels_path: PathBuf,
    network: InteractionNetwork,
    labels: LabelSet,
}

fn dataset_paths(name: &str) -> (PathBuf, PathBuf) {
    let dir = common::data_dir();
    (dir.join(format!("{name}.edges")), dir.join(format!("{name}.labels")))
}

fn load(name: &str, undirected: bool) -> Result<Dataset, String> {
    let (edges, labels) = dataset_paths(name);
    if !edges.exists() || !labels.exists() {
        return Err(format!("{}, {}", edges.display(), labels.display()));
    }
    let network = load_edge_list(&edges, !undirected).map_err(|e| e.to_string())?;
    let labelled = load_labels(&labels, &network).map_err(|e| e.to_string())?;
    Ok(Dataset {
        edges,
        labels_path: labels,
        network,
        labels: labelled,
    })
}

fn runs() -> usize {
    std::env::var("ACCEPTANCE_RUNS")
        .ok()
        .and_then(|r| r.parse().ok())
        .unwrap_or(25)
}

fn sweep(data: &Dataset, ks: &[usize], fraction: f64, mode: FitMode, init: InitMode, reject: Option<f64>) -> SweepResult {
    let spec = ExperimentSpec {
        mode,
        k_values: ks.to_vec(),
        train_fractions: vec![fraction],
        runs: runs(),
        init_mode: init,
        fit_rejection_threshold: reject,
        with_baseline: true,
        model: ModelConfig::new(ks[0]),
        ..ExperimentSpec::new(&data.edges, &data.labels_path)
    };
    run_experiment_on(&data.network, &data.labels, &spec).expect("sweep runs")
}

/// Mean test macro-F1 at K over every run, rejected or not.
fn mean_over_all_runs(result: &SweepResult, k: usize) -> f64 {
    let f1: Vec<f64> = result.runs.iter().filter(|r| r.k == k).map(|r| r.test_macro_f1).collect();
    f1.iter().sum::<f64>() / f1.len() as f64
}

fn mean_diagonal_mass(result: &SweepResult, k: usize) -> f64 {
    let d: Vec<f64> = result.runs.iter().filter(|r| r.k == k).map(|r| r.pi_diagonal_mass).collect();
    d.iter().sum::<f64>() / d.len() as f64
}

fn property_suite() -> Outcome {
    let name = "property-suite";
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let started = Instant::now();
    let status = Command::new(cargo)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .args(["test", "--quiet", "-p", "sbsn", "--test", "properties", "--test", "model"])
        .status();
    let seconds = started.elapsed().as_secs_f64();
    match status {
        Ok(s) => Outcome::checked(
            name,
            s.success() && seconds <= 120.0,
            format!("tests {} in {seconds:.1}s (limit 120s)", if s.success() { "passed" } else { "failed" }),
        ),
        Err(e) => Outcome::checked(name, false, format!("could not run cargo: {e}")),
    }
}

fn words(outcomes: &mut Vec<Outcome>) -> Option<f64> {
    let data = match load("words", false) {
        Ok(d) => d,
        Err(what) => {
            outcomes.push(Outcome::missing("words-supervised-k10", &what));
            outcomes.push(Outcome::missing("words-wvrn-baseline", &what));
            return None;
        }
    };

    let started = Instant::now();
    let result = sweep(&data, &[10], TWO_THIRDS, FitMode::Supervised, InitMode::Flat, Some(0.9));
    let seconds = started.elapsed().as_secs_f64();
    let cell = result.cell(10, TWO_THIRDS).expect("cell");
    let (f1, acc) = (cell.mean_macro_f1.unwrap_or(0.0), cell.mean_accuracy.unwrap_or(0.0));
    outcomes.push(Outcome::checked(
        "words-supervised-k10",
        f1 >= 0.70 && acc >= 0.70 && seconds <= 60.0,
        format!(
            "macro-F1 {f1:.4} accuracy {acc:.4} ({} accepted, {} rejected) in {seconds:.1}s",
            cell.accepted, cell.rejected
        ),
    ));

    let baseline = cell.mean_baseline_macro_f1.expect("baseline scored");
    outcomes.push(Outcome::checked(
        "words-wvrn-baseline",
        baseline <= 0.55 && f1 - baseline >= 0.15,
        format!("wvRN macro-F1 {baseline:.4}, margin {:.4}", f1 - baseline),
    ));

    let structure = sweep(&data, &[4], TWO_THIRDS, FitMode::Supervised, InitMode::Flat, None);
    Some(mean_diagonal_mass(&structure, 4))
}

fn citation(
    name: &'static str,
    label: &'static str,
    f1_min: f64,
    acc_min: f64,
    time_limit: Option<f64>,
    outcomes: &mut Vec<Outcome>,
) -> Option<(SweepResult, SweepResult)> {
    let data = match load(name, false) {
        Ok(d) => d,
        Err(what) => {
            outcomes.push(Outcome::missing(label, &what));
            return None;
        }
    };
    let started = Instant::now();
    let supervised = sweep(&data, &CITATION_KS, TWO_THIRDS, FitMode::Supervised, InitMode::Flat, Some(0.9));
    let seconds = started.elapsed().as_secs_f64();
    let best = supervised.best_for_fraction(TWO_THIRDS).expect("at least one accepted run");
    let (f1, acc) = (best.mean_macro_f1.unwrap_or(0.0), best.mean_accuracy.unwrap_or(0.0));
    let per_k: Vec<String> = supervised
        .cells
        .iter()
        .map(|c| match c.mean_macro_f1 {
            Some(m) => format!("K={} {m:.3} ({}/{})", c.k, c.accepted, c.accepted + c.rejected),
            None => format!("K={} none accepted", c.k),
        })
        .collect();
    outcomes.push(Outcome::checked(
        label,
        f1 >= f1_min && acc >= acc_min && time_limit.is_none_or(|t| seconds <= t),
        format!(
            "best K={} macro-F1 {f1:.4} accuracy {acc:.4}; sweep {seconds:.0}s; {}",
            best.k,
            per_k.join(", ")
        ),
    ));

    let unsupervised = sweep(&data, &CITATION_KS, TWO_THIRDS, FitMode::Unsupervised, InitMode::Flat, None);
    Some((supervised, unsupervised))
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    outcomes.push(property_suite());
    outcomes.last().expect("pushed").print();

    let words_diagonal = words(&mut outcomes);
    let cora = citation("cora", "cora-supervised-best-k", 0.78, 0.80, Some(1800.0), &mut outcomes);
    let citeseer = citation("citeseer", "citeseer-supervised-best-k", 0.60, 0.65, None, &mut outcomes);

    match (&cora, &citeseer) {
        (Some(cora), Some(citeseer)) => {
            let mut pass = true;
            let mut parts = Vec::new();
            for (name, (sup, unsup)) in [("cora", cora), ("citeseer", citeseer)] {
                for &k in &CITATION_KS {
                    let (s, u) = (mean_over_all_runs(sup, k), mean_over_all_runs(unsup, k));
                    pass &= s > u;
                    parts.push(format!("{name} K={k} {s:.3}>{u:.3}"));
                }
            }
            outcomes.push(Outcome::checked("supervised-beats-unsupervised", pass, parts.join(", ")));
        }
        _ => outcomes.push(Outcome::missing("supervised-beats-unsupervised", "cora or citeseer")),
    }

    match load("cora", true) {
        Ok(data) => {
            let comm = sweep(&data, &[7], 0.05, FitMode::Supervised, InitMode::Comm, None);
            let flat = sweep(&data, &[7], 0.05, FitMode::Supervised, InitMode::Flat, None);
            let (c, f) = (mean_over_all_runs(&comm, 7), mean_over_all_runs(&flat, 7));
            outcomes.push(Outcome::checked(
                "comm-init-low-label-rate",
                c > f,
                format!("comm macro-F1 {c:.4} vs flat {f:.4}"),
            ));
        }
        Err(what) => outcomes.push(Outcome::missing("comm-init-low-label-rate", &what)),
    }

    let cora_diagonal = cora.as_ref().map(|(sup, _)| mean_diagonal_mass(sup, 7));
    match (words_diagonal, cora_diagonal) {
        (Some(w), Some(c)) => outcomes.push(Outcome::checked(
            "blockmodel-structure",
            w < 0.5 && c > 0.5,
            format!("words K=4 diagonal mass {w:.3}, cora K=7 diagonal mass {c:.3}"),
        )),
        (w, c) => {
            let mut o = Outcome::missing("blockmodel-structure", if w.is_none() { "words" } else { "cora" });
            if let Some(c) = c {
                o.detail = format!("{}; cora K=7 diagonal mass {c:.3}", o.detail);
            }
            outcomes.push(o);
        }
    }

    println!();
    for o in &outcomes {
        o.print();
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    if outcomes.iter().any(|o| o.evaluated && !o.pass) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
