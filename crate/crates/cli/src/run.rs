//! Runs the selected checks and writes their reports.
//!
//! Every report file is a pure function of the config and seed; wall-clock
//! data goes to `metadata.json` only.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use roughwave::grid::Domain;
use roughwave::kernel::RoughKernel;
use roughwave::sparse::SparseRunReport;
use roughwave::verify::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::plot;

/// One check's output before it is written.
struct Output {
    reports: Vec<FitReport>,
    /// Extra JSON documents, by file stem.
    extras: Vec<(String, serde_json::Value)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub file: String,
    pub check: String,
    pub pass: bool,
    pub max: f64,
    pub median: f64,
}

/// `summary.json`: the index `report` re-renders from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: bool,
    pub reports: Vec<SummaryEntry>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    pair: &'a str,
    #[serde(flatten)]
    run: &'a SparseRunReport,
}

pub struct Outcome {
    pub summary: Summary,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub enum RunError {
    Compute(String),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Compute(m) => write!(f, "{m}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn compute<T>(check: &str, r: roughwave::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Compute(format!("{check}: {e}")))
}

struct Inputs {
    dom: Domain,
    kernel: RoughKernel,
    seed: u64,
    corpus: crate::config::CorpusSpec,
}

impl Inputs {
    fn corpus(&self, kind: CorpusKind) -> Corpus {
        let count = match kind {
            CorpusKind::Pairs => self.corpus.pairs,
            CorpusKind::Spikes => self.corpus.spikes,
            CorpusKind::Rough => self.corpus.rough,
            CorpusKind::Smooth => self.corpus.smooth,
        };
        Corpus::generate(self.dom, kind, self.seed, count)
    }
}

type Job<'a> = Box<dyn Fn(&Inputs) -> Result<Output, RunError> + Send + Sync + 'a>;

fn jobs(config: &ExperimentConfig, seed_override: Option<u64>) -> Vec<Job<'_>> {
    let c = &config.checks;
    let mut out: Vec<Job> = Vec::new();
    if let Some(p) = &c.domination {
        out.push(Box::new(move |i| {
            let o = compute("domination", check_domination(&i.corpus(CorpusKind::Pairs), &i.kernel, p))?;
            let runs: Vec<RunRecord> = o
                .runs
                .iter()
                .map(|(pair, run)| RunRecord { pair, run })
                .collect();
            Ok(Output {
                extras: vec![("domination_runs".into(), serde_json::to_value(runs).expect("serialise"))],
                reports: vec![o.report],
            })
        }));
    }
    if let Some(p) = &c.weak_type_tstar {
        out.push(Box::new(move |i| {
            Ok(Output {
                reports: compute("weak_type_tstar", check_weak_type_tstar(&i.corpus(CorpusKind::Spikes), &i.kernel, p))?,
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.grand_maximal_endpoint {
        out.push(Box::new(move |i| {
            let r = check_grand_maximal_endpoint(&i.corpus(CorpusKind::Spikes), &i.kernel, p);
            Ok(Output {
                reports: vec![compute("grand_maximal_endpoint", r)?],
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.sharp_weak_type {
        out.push(Box::new(move |i| {
            let r = check_sharp_weak_type(&i.corpus(CorpusKind::Spikes), &i.kernel, p);
            Ok(Output {
                reports: vec![compute("sharp_weak_type", r)?],
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.coifman_fefferman {
        out.push(Box::new(move |i| {
            let r = check_coifman_fefferman(&i.corpus(CorpusKind::Smooth), &i.kernel, p);
            Ok(Output {
                reports: compute("coifman_fefferman", r)?,
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.mollification_decay {
        let mut p = p.clone();
        if let Some(s) = seed_override {
            p.seed = s;
        }
        out.push(Box::new(move |i| {
            let r = check_mollification_decay(i.dom, &i.kernel, &p);
            Ok(Output {
                reports: vec![compute("mollification_decay", r)?],
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.refinement {
        out.push(Box::new(move |i| {
            let r = check_refinement(&i.corpus(CorpusKind::Rough), p);
            Ok(Output {
                reports: vec![compute("refinement", r)?],
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.commutator {
        out.push(Box::new(move |i| {
            let r = check_commutator(&i.corpus(CorpusKind::Pairs), &i.corpus(CorpusKind::Spikes), &i.kernel, p);
            Ok(Output {
                reports: compute("commutator", r)?,
                extras: vec![],
            })
        }));
    }
    if let Some(p) = &c.cz_constants {
        out.push(Box::new(move |i| {
            let (reps, fits) = compute("cz_constants", check_cz_constants(&i.corpus(CorpusKind::Rough), p))?;
            Ok(Output {
                reports: fits,
                extras: vec![("cz_reports".into(), serde_json::to_value(reps).expect("serialise"))],
            })
        }));
    }
    out
}

/// File stem for a report: the check name plus whichever of `part` and
/// `weight` distinguish it from its siblings.
pub fn stem(r: &FitReport) -> String {
    let mut s = r.check.clone();
    for key in ["part", "weight"] {
        if let Some(v) = r.params.get(key).and_then(|v| v.as_str()) {
            s.push('-');
            s.extend(v.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }));
        }
    }
    s
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Compute(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn run(
    config: &ExperimentConfig,
    config_path: &Path,
    out_dir: PathBuf,
    seed_override: Option<u64>,
    plots: bool,
    threads: usize,
) -> Result<Outcome, RunError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let inputs = Inputs {
        dom: config.domain(),
        kernel: config.kernel(),
        seed: seed_override.unwrap_or(config.corpus.seed),
        corpus: config.corpus.clone(),
    };
    let jobs = jobs(config, seed_override);
    let outputs: Vec<Output> = jobs
        .par_iter()
        .map(|job| job(&inputs))
        .collect::<Result<_, _>>()?;

    std::fs::create_dir_all(&out_dir)?;
    let mut entries = Vec::new();
    for o in &outputs {
        for r in &o.reports {
            let stem = stem(r);
            write_json(&out_dir.join(format!("{stem}.json")), r)?;
            let csv = r.to_csv().map_err(|e| RunError::Compute(e.to_string()))?;
            std::fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
            if plots {
                std::fs::write(out_dir.join(format!("{stem}.svg")), plot::render(r))?;
            }
            entries.push(SummaryEntry {
                file: format!("{stem}.json"),
                check: r.check.clone(),
                pass: r.pass,
                max: r.max,
                median: r.median,
            });
        }
        for (name, value) in &o.extras {
            write_json(&out_dir.join(format!("{name}.json")), value)?;
        }
    }
    let summary = Summary {
        pass: entries.iter().all(|e| e.pass),
        reports: entries,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    let since_epoch = |t: SystemTime| t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    write_json(
        &out_dir.join("metadata.json"),
        &serde_json::json!({
            "config": config_path.display().to_string(),
            "version": env!("CARGO_PKG_VERSION"),
            "threads": threads,
            "seed": inputs.seed,
            "started_unix": since_epoch(started),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
        }),
    )?;
    Ok(Outcome { summary, out_dir })
}

/// Re-renders every plot listed in `summary.json` under `dir`.
pub fn rerender(dir: &Path) -> Result<usize, RunError> {
    let text = std::fs::read_to_string(dir.join("summary.json"))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| RunError::Compute(format!("summary.json: {e}")))?;
    for e in &summary.reports {
        let text = std::fs::read_to_string(dir.join(&e.file))?;
        let r = FitReport::from_json(&text).map_err(|err| RunError::Compute(format!("{}: {err}", e.file)))?;
        let svg = dir.join(&e.file).with_extension("svg");
        std::fs::write(svg, plot::render(&r))?;
    }
    Ok(summary.reports.len())
}
