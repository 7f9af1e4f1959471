//! Command-line driver.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use hydrosoc_core::behavior::DoseModel;
use hydrosoc_core::engine::{Tables, Trial};
use hydrosoc_core::metrics::ModelSummary;
use hydrosoc_core::{ModelLevel, Network, ScenarioConfig, SimulationResults};
use rayon::prelude::*;

use crate::inp::parse_network;
use crate::manifest::{InputFile, RunManifest, TrialTiming};
use crate::output::{self, DumpObserver, SummaryRow};
use crate::scenario_file::{parse_scenario, serialize_scenario};
use crate::tables::{parse_demographics, parse_meal_cdfs};

#[derive(Debug, Parser)]
#[command(
    name = "hydrosoc",
    version,
    about = "Simulate consumer exposure during a water contamination event"
)]
pub struct Args {
    /// Network in INP format.
    #[arg(long, required_unless_present = "replay")]
    pub network: Option<PathBuf>,
    /// Scenario `key = value` file.
    #[arg(long, required_unless_present = "replay")]
    pub scenario: Option<PathBuf>,
    /// Model level 1-5, or `all`. Defaults to the scenario's level.
    #[arg(long, value_parser = parse_models)]
    pub model: Option<Models>,
    /// Trials per model (default: the scenario's, normally 10).
    #[arg(long)]
    pub trials: Option<u32>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "hydrosoc-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub dump_hydraulics: bool,
    #[arg(long)]
    pub dump_quality: bool,
    /// `param=v1,v2,...` for critical_dose, critical_dose_mg_per_kg,
    /// cluster_size, cluster_intermediates, demand_multiplier, load,
    /// population or reaction_latency.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Re-run from a manifest written by an earlier run.
    #[arg(long, conflicts_with_all = ["network", "scenario", "model", "trials", "seed", "sweep", "demographics", "meals"])]
    pub replay: Option<PathBuf>,
    /// Demographic table CSV.
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    /// Meal-time CDF CSV.
    #[arg(long)]
    pub meals: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models(pub Vec<ModelLevel>);

fn parse_models(s: &str) -> Result<Models, String> {
    if s == "all" {
        return Ok(Models(ModelLevel::ALL.to_vec()));
    }
    let n: u8 = s
        .parse()
        .map_err(|_| format!("`{s}` is not 1-5 or `all`"))?;
    ModelLevel::new(n)
        .map(|m| Models(vec![m]))
        .map_err(|e| e.to_string())
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    /// One JSON object on one line.
    pub fn line(&self) -> String {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Input(m) => ("input", m),
            Failure::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Everything a run depends on.
#[derive(Debug, Clone)]
struct Plan {
    network: InputFile,
    scenario: InputFile,
    demographics: Option<InputFile>,
    meals: Option<InputFile>,
    models: Option<Vec<u8>>,
    trials: Option<u32>,
    seed: Option<u64>,
    sweep: Option<String>,
    dump_hydraulics: bool,
    dump_quality: bool,
}

impl Plan {
    fn from_args(a: &Args) -> Result<Plan, Failure> {
        let load = |p: &Option<PathBuf>| -> Result<Option<InputFile>, Failure> {
            p.as_ref()
                .map(|p| Ok(InputFile::new(p.display().to_string(), read(p)?)))
                .transpose()
        };
        Ok(Plan {
            network: load(&a.network)?.expect("required by clap"),
            scenario: load(&a.scenario)?.expect("required by clap"),
            demographics: load(&a.demographics)?,
            meals: load(&a.meals)?,
            models: a
                .model
                .as_ref()
                .map(|m| m.0.iter().map(|l| l.get()).collect()),
            trials: a.trials,
            seed: a.seed,
            sweep: a.sweep.clone(),
            dump_hydraulics: a.dump_hydraulics,
            dump_quality: a.dump_quality,
        })
    }

    fn from_manifest(m: RunManifest) -> Result<Plan, Failure> {
        for f in [
            Some(&m.network),
            Some(&m.scenario),
            m.demographics.as_ref(),
            m.meals.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !f.verify() {
                return Err(Failure::Input(format!(
                    "manifest copy of {} fails its digest",
                    f.path
                )));
            }
        }
        Ok(Plan {
            network: m.network,
            scenario: m.scenario,
            demographics: m.demographics,
            meals: m.meals,
            models: Some(m.models),
            trials: Some(m.trials),
            seed: Some(m.base_seed),
            sweep: m.sweep,
            dump_hydraulics: m.dump_hydraulics,
            dump_quality: m.dump_quality,
        })
    }
}

/// Applies `param=v1,v2,...` to the base scenario, one experiment per value.
pub fn expand_sweep(
    base: &ScenarioConfig,
    sweep: &str,
) -> Result<Vec<(String, ScenarioConfig)>, String> {
    let (param, values) = sweep
        .split_once('=')
        .ok_or_else(|| format!("sweep `{sweep}` is not param=v1,v2,..."))?;
    let param = param.trim();
    let mut out = Vec::new();
    for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let x: f64 = v
            .parse()
            .map_err(|_| format!("sweep value `{v}` is not a number"))?;
        let int = || -> Result<u32, String> {
            (x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64)
                .then_some(x as u32)
                .ok_or_else(|| format!("{param} takes whole numbers, got `{v}`"))
        };
        let mut s = base.clone();
        match param {
            "critical_dose" => {
                s.critical_dose = match s.critical_dose {
                    DoseModel::PerBodyWeight(_) => DoseModel::PerBodyWeight(x),
                    DoseModel::FixedCount(_) => DoseModel::FixedCount(x),
                }
            }
            "critical_dose_mg_per_kg" => s.critical_dose = DoseModel::PerBodyWeight(x * 1e-6),
            "cluster_size" => s.cluster = s.cluster.resized(int()?),
            "cluster_intermediates" => s.cluster = s.cluster.with_intermediates(int()?),
            "demand_multiplier" => s.demand_multiplier = x,
            "load" => s.load = x,
            "population" => s.total_population = int()?,
            "reaction_latency" => s.reaction_latency = int()?,
            _ => return Err(format!("cannot sweep `{param}`")),
        }
        out.push((format!("{param}={v}"), s));
    }
    if out.is_empty() {
        return Err(format!("sweep `{sweep}` lists no values"));
    }
    Ok(out)
}

struct Job {
    experiment: usize,
    model: ModelLevel,
    trial: u32,
    seed: u64,
}

struct Finished {
    results: SimulationResults,
    seconds: f64,
}

fn run_dir(out: &Path, label: &str, model: ModelLevel, trial: u32) -> PathBuf {
    let safe: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect();
    out.join("runs")
        .join(safe)
        .join(format!("model{model}"))
        .join(format!("trial{trial}"))
}

fn execute(plan: Plan, out: &Path, jobs: usize) -> Result<(), Failure> {
    let network: Network = parse_network(&plan.network.contents)
        .map_err(|e| Failure::Input(format!("{}: {e}", plan.network.path)))?;
    let base = parse_scenario(&plan.scenario.contents)
        .map_err(|e| Failure::Input(format!("{}: {e}", plan.scenario.path)))?;
    let mut tables = Tables::default();
    if let Some(f) = &plan.demographics {
        tables.demographics = parse_demographics(&f.contents)
            .map_err(|e| Failure::Input(format!("{}: {e}", f.path)))?;
    }
    if let Some(f) = &plan.meals {
        tables.meals =
            parse_meal_cdfs(&f.contents).map_err(|e| Failure::Input(format!("{}: {e}", f.path)))?;
    }

    let models: Vec<ModelLevel> = match &plan.models {
        Some(m) => m
            .iter()
            .map(|&l| ModelLevel::new(l).map_err(|e| Failure::Usage(e.to_string())))
            .collect::<Result<_, _>>()?,
        None => vec![base.model_level],
    };
    let trials = plan.trials.unwrap_or(base.trials);
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let base_seed = plan.seed.unwrap_or(base.seed);
    let experiments = match &plan.sweep {
        Some(s) => expand_sweep(&base, s).map_err(Failure::Usage)?,
        None => vec![("base".to_string(), base.clone())],
    };
    for (label, s) in &experiments {
        s.validate()
            .map_err(|e| Failure::Input(format!("{label}: {e}")))?;
        if network.node_by_id(&s.injection_node).is_none() {
            return Err(Failure::Input(format!(
                "injection node `{}` is not in the network",
                s.injection_node
            )));
        }
    }

    let mut queue = Vec::new();
    for e in 0..experiments.len() {
        for &model in &models {
            for trial in 0..trials {
                queue.push(Job {
                    experiment: e,
                    model,
                    trial,
                    seed: base_seed.wrapping_add(trial as u64),
                });
            }
        }
    }
    log::info!(
        "{} trials on {} nodes / {} links",
        queue.len(),
        network.nodes().len(),
        network.links().len()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let finished: Vec<Result<Finished, Failure>> = pool.install(|| {
        queue
            .par_iter()
            .map(|job| {
                let (label, scenario) = &experiments[job.experiment];
                let started = Instant::now();
                let trial = Trial::new(&network, scenario, &tables, job.model, job.seed)
                    .map_err(|e| Failure::Input(format!("{label}: {e}")))?;
                let dir = run_dir(out, label, job.model, job.trial);
                let mut obs = DumpObserver::new(&network, plan.dump_hydraulics, plan.dump_quality);
                let results = trial.run(&mut obs).map_err(|e| {
                    Failure::Runtime(format!(
                        "{label}, model {}, seed {}: {e}",
                        job.model, job.seed
                    ))
                })?;
                obs.write(&dir)
                    .map_err(|e| Failure::Runtime(e.to_string()))?;
                log::debug!(
                    "model {} seed {} done in {:?}",
                    job.model,
                    job.seed,
                    started.elapsed()
                );
                Ok(Finished {
                    results,
                    seconds: started.elapsed().as_secs_f64(),
                })
            })
            .collect()
    });

    let mut summary = Vec::new();
    let mut timings = Vec::new();
    let mut per_model: Vec<(usize, ModelLevel, Vec<SimulationResults>)> = Vec::new();
    for (job, f) in queue.iter().zip(finished) {
        let f = f?;
        let (label, _) = &experiments[job.experiment];
        let dir = run_dir(out, label, job.model, job.trial);
        output::write_results(&f.results, &network, &dir)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        summary.push(SummaryRow {
            experiment: label.clone(),
            model: job.model.get(),
            trial: job.trial,
            seed: job.seed,
            total_exposed: f.results.total_exposed(),
        });
        timings.push(TrialTiming {
            experiment: label.clone(),
            model: job.model.get(),
            trial: job.trial,
            seed: job.seed,
            seconds: f.seconds,
        });
        match per_model.last_mut() {
            Some((e, m, v)) if *e == job.experiment && *m == job.model => v.push(f.results),
            _ => per_model.push((job.experiment, job.model, vec![f.results])),
        }
    }
    let io = |e: output::OutputError| Failure::Runtime(e.to_string());
    output::write_file(&out.join("summary.csv"), &output::summary_csv(&summary)).map_err(io)?;

    let mut report = String::new();
    writeln!(report, "hydrosoc {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(
        report,
        "network  {} ({} nodes, {} links)",
        plan.network.path,
        network.nodes().len(),
        network.links().len()
    )
    .unwrap();
    writeln!(report, "scenario {}", plan.scenario.path).unwrap();
    writeln!(
        report,
        "trials   {trials} per model, seeds {base_seed}..{}",
        base_seed.wrapping_add(trials as u64 - 1)
    )
    .unwrap();
    for (e, model, results) in &per_model {
        let s = ModelSummary::from_results(*model, results);
        let informed: f64 = results
            .iter()
            .map(|r| r.total_informed() as f64)
            .sum::<f64>()
            / results.len() as f64;
        writeln!(
            report,
            "{:<24} model {}  exposed mean {:.1}  min {}  max {}  informed mean {:.1}  population {}",
            experiments[*e].0,
            model,
            s.mean,
            s.min,
            s.max,
            informed,
            results[0].population
        )
        .unwrap();
    }
    output::write_file(&out.join("report.txt"), &report).map_err(io)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        resolved_scenario: serialize_scenario(&base),
        network: plan.network,
        scenario: plan.scenario,
        demographics: plan.demographics,
        meals: plan.meals,
        models: models.iter().map(|m| m.get()).collect(),
        trials,
        base_seed,
        seeds: (0..trials)
            .map(|i| base_seed.wrapping_add(i as u64))
            .collect(),
        sweep: plan.sweep,
        dump_hydraulics: plan.dump_hydraulics,
        dump_quality: plan.dump_quality,
        timings,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    output::write_file(&out.join("manifest.json"), &json).map_err(io)?;
    Ok(())
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("{}", Failure::Usage(first).line());
            eprintln!("{}", e.render());
            return 2;
        }
    };
    let result = match &args.replay {
        Some(path) => read(path).and_then(|text| {
            serde_json::from_str::<RunManifest>(&text)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
                .and_then(Plan::from_manifest)
        }),
        None => Plan::from_args(&args),
    }
    .and_then(|plan| execute(plan, &args.out, args.jobs));
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.line());
            f.exit_code()
        }
    }
}
