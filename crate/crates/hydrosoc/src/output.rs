//! Result CSVs and optional per-step dumps.
//!
//! Per run: `exposure_series.csv`, `cpp_series.csv`, `agents.csv` (exposed
//! agents only). Per invocation: `summary.csv` with one row per trial.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hydrosoc_core::engine::{SimulationResults, StepObserver};
use hydrosoc_core::hydraulics::HydraulicSnapshot;
use hydrosoc_core::network::{Network, NodeKind};
use hydrosoc_core::quality::QualityState;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| OutputError {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| OutputError {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_text<R: serde::Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is UTF-8")
}

pub fn exposure_series_csv(r: &SimulationResults) -> String {
    csv_text(
        &["step", "exposed", "warned", "demand_changed"],
        r.steps
            .iter()
            .map(|s| (s.step, s.exposed, s.warned, s.demand_changed)),
    )
}

pub fn cpp_series_csv(r: &SimulationResults) -> String {
    csv_text(&["step", "cpp"], r.steps.iter().map(|s| (s.step, s.cpp)))
}

pub fn agents_csv(r: &SimulationResults, network: &Network) -> String {
    csv_text(
        &["id", "exposure_time_s", "node"],
        r.agents.iter().filter_map(|a| {
            Some((
                a.id,
                a.exposure_time?,
                network.node(a.exposure_node?).id.as_str(),
            ))
        }),
    )
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub experiment: String,
    pub model: u8,
    pub trial: u32,
    pub seed: u64,
    pub total_exposed: u32,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    csv_text(
        &["experiment", "model", "trial", "seed", "total_exposed"],
        rows.iter().map(|r| {
            (
                r.experiment.as_str(),
                r.model,
                r.trial,
                r.seed,
                r.total_exposed,
            )
        }),
    )
}

/// Writes the three per-run files into `dir`.
pub fn write_results(
    r: &SimulationResults,
    network: &Network,
    dir: &Path,
) -> Result<(), OutputError> {
    write_file(&dir.join("exposure_series.csv"), &exposure_series_csv(r))?;
    write_file(&dir.join("cpp_series.csv"), &cpp_series_csv(r))?;
    write_file(&dir.join("agents.csv"), &agents_csv(r, network))
}

/// Collects per-step hydraulic and quality tables.
pub struct DumpObserver<'a> {
    network: &'a Network,
    hydraulics: Option<(String, String)>,
    quality: Option<String>,
}

impl<'a> DumpObserver<'a> {
    pub fn new(network: &'a Network, hydraulics: bool, quality: bool) -> Self {
        DumpObserver {
            network,
            hydraulics: hydraulics.then(|| {
                (
                    "time_s,node,head_m,demand_lps\n".into(),
                    "time_s,link,flow_lps\n".into(),
                )
            }),
            quality: quality.then(|| "time_s,node,concentration\n".into()),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        if let Some((nodes, links)) = &self.hydraulics {
            write_file(&dir.join("hydraulics_nodes.csv"), nodes)?;
            write_file(&dir.join("hydraulics_links.csv"), links)?;
        }
        if let Some(q) = &self.quality {
            write_file(&dir.join("quality.csv"), q)?;
        }
        Ok(())
    }
}

impl StepObserver for DumpObserver<'_> {
    fn observe(&mut self, _step: usize, hyd: &HydraulicSnapshot, quality: &QualityState) {
        let net = self.network;
        if let Some((nodes, links)) = &mut self.hydraulics {
            for (i, n) in net.nodes().iter().enumerate() {
                writeln!(
                    nodes,
                    "{},{},{},{}",
                    hyd.time, n.id, hyd.heads[i], hyd.demands[i]
                )
                .unwrap();
            }
            for (k, l) in net.links().iter().enumerate() {
                writeln!(links, "{},{},{}", hyd.time, l.id, hyd.flows[k]).unwrap();
            }
        }
        if let Some(q) = &mut self.quality {
            for (i, n) in net.nodes().iter().enumerate() {
                let c = match n.kind {
                    NodeKind::Tank(_) => quality.tank_concentration(i),
                    _ => quality.concentration(i),
                };
                writeln!(q, "{},{},{}", quality.time(), n.id, c).unwrap();
            }
        }
    }
}
