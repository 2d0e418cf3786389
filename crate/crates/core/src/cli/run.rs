//! Execution of a [`RunConfig`]: computation, CSV tables and the manifest.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::config::{CommandBlock, OperatorPair, RunConfig, SteadyBlock, SteadyMode, Xi2Target};
use crate::cache::SpectralCache;
use crate::echo::EchoSystem;
use crate::error::Error;
use crate::model::{ModelParams, Parity};
use crate::otoc::OtocSystem;
use crate::output::{self, Cell, Manifest, OutputSet, Table};
use crate::quench::{
    critical_xi_from_ground_in, critical_xi_from_highest_in, linspace, quench_coefficients_in, survival_probability,
    CriticalQuench, Ldos,
};
use crate::spectra::{diagonalize, SpectralData, StateSelector};

const LDOS_GRID_POINTS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[source] Error),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Error,
    },
    #[error("verification failed:\n  {}", .0.join("\n  "))]
    Verify(Vec<String>),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical or verification failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source: Error::InvalidInput(_), .. } => 2,
            CliError::Stage { .. } | CliError::Verify(_) => 3,
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for crate::error::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: OutputSet,
    pub metadata: serde_json::Value,
    /// Lines printed to stdout.
    pub summary: Vec<String>,
}

/// What [`run`] did.
#[derive(Debug)]
pub struct RunReport {
    pub output: RunOutput,
    pub wall_time_seconds: f64,
    pub verified: bool,
}

struct Spectra {
    cache: Option<SpectralCache>,
}

impl Spectra {
    fn get(&self, params: &ModelParams) -> Result<SpectralData, CliError> {
        match &self.cache {
            Some(c) => c.load_or_compute(params).stage("spectral cache"),
            None => diagonalize(params).stage("diagonalization"),
        }
    }
}

fn resolve(spec: &SpectralData, sel: &StateSelector) -> Result<(Parity, usize, usize), CliError> {
    let i = spec.select_index(sel).stage("state selection")?;
    Ok((spec.parities[i], spec.sector_index[i], i))
}

fn series_table(header: &[&str], columns: &[&[f64]]) -> Table {
    let mut t = Table::new(header);
    for k in 0..columns[0].len() {
        let row: Vec<Cell> = columns.iter().map(|c| Cell::F(c[k])).collect();
        t.row(&row);
    }
    t
}

fn critical(spec: &SpectralData, from: &StateSelector, eps0: Option<f64>) -> Result<CriticalQuench, CliError> {
    match from {
        StateSelector::Ground => critical_xi_from_ground_in(spec).stage("tangent construction"),
        StateSelector::HighestEven => critical_xi_from_highest_in(spec, eps0).stage("tangent construction"),
        other => {
            Err(CliError::Config(Error::InvalidInput(format!("no critical construction for initial state `{other}`"))))
        }
    }
}

fn critical_summary(c: &CriticalQuench) -> Vec<String> {
    let mut lines = vec![
        format!("xi_c = {:.6}", c.xi_c),
        format!("slope = {:.6}, E/N at xi1 = {:.6}, line E/N = {:.6}", c.slope, c.energy, c.line_energy),
    ];
    if let Some(w) = &c.warning {
        lines.push(format!("warning: {w}"));
    }
    lines
}

fn ldos_table(ldos: &Ldos) -> Table {
    let mut t = Table::new(&["E_j", "eps_j", "weight", "parity"]);
    for i in 0..ldos.energies.len() {
        let p = ldos.parities[i].to_string();
        t.row(&[Cell::F(ldos.energies[i]), Cell::F(ldos.eps[i]), Cell::F(ldos.weights[i]), Cell::S(&p)]);
    }
    t
}

fn run_quench(
    cfg: &RunConfig,
    spectra: &Spectra,
    xi1: f64,
    xi2: Xi2Target,
    from: &StateSelector,
    eps0: Option<f64>,
) -> Result<(SpectralData, SpectralData, Ldos, serde_json::Value, Vec<String>), CliError> {
    let pre = spectra.get(&cfg.model.with_xi(xi1).stage("model")?)?;
    let mut summary = Vec::new();
    let (xi2, crit) = match xi2 {
        Xi2Target::Value(x) => (x, None),
        Xi2Target::Critical => {
            let c = critical(&pre, from, eps0)?;
            summary.extend(critical_summary(&c));
            if !(0.0..=1.0).contains(&c.xi_c) {
                return Err(CliError::Stage {
                    stage: "tangent construction",
                    source: Error::Unreachable { what: "critical quench", reason: format!("ξ_c = {}", c.xi_c) },
                });
            }
            (c.xi_c, Some(c))
        }
    };
    let post = spectra.get(&cfg.model.with_xi(xi2).stage("model")?)?;
    let ldos = quench_coefficients_in(&pre, &post, from).stage("quench coefficients")?;
    summary.push(format!(
        "xi2 = {xi2:.6}, total LDOS weight = {:.12}, IPR = {:.6e}",
        ldos.total_weight(),
        ldos.inverse_participation()
    ));
    let meta = json!({
        "xi2": xi2,
        "critical": crit,
        "initial_state": from.to_string(),
        "initial_index": pre.select_index(from).stage("state selection")?,
        "total_weight": ldos.total_weight(),
        "inverse_participation": ldos.inverse_participation(),
    });
    Ok((pre, post, ldos, meta, summary))
}

fn steady_values(sys: &OtocSystem, states: &[usize], steady: &SteadyBlock) -> Result<Vec<f64>, CliError> {
    match steady.mode {
        SteadyMode::Exact => states.par_iter().map(|&n| sys.steady_exact(n)).collect::<crate::Result<Vec<_>>>(),
        // each numeric average already runs in parallel over its samples
        SteadyMode::Numeric => states.iter().map(|&n| sys.steady_numeric(n, steady.horizon, steady.samples)).collect(),
    }
    .stage("OTOC steady state")
}

fn otoc_system(spec: SpectralData, ops: &OperatorPair) -> Result<OtocSystem, CliError> {
    OtocSystem::from_kinds(spec, ops.w, ops.v, ops.normalized).stage("operator transform")
}

/// Runs the computation without writing anything.
pub fn compute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let spectra = Spectra { cache: cfg.cache.as_ref().map(SpectralCache::new) };
    let mut out = RunOutput::default();
    match &cfg.block {
        CommandBlock::Spectrum => {
            let s = spectra.get(&cfg.model)?;
            let mut t = Table::new(&["index", "parity", "sector_index", "E", "E_per_N", "eps"]);
            for i in 0..s.dim() {
                let p = s.parities[i].to_string();
                t.row(&[
                    Cell::I(i),
                    Cell::S(&p),
                    Cell::I(s.sector_index[i]),
                    Cell::F(s.energies[i]),
                    Cell::F(s.energy_per_site(i)),
                    Cell::F(s.eps[i]),
                ]);
            }
            out.files.add_table("spectrum.csv", t);
            out.summary.push(format!("{} levels, E_gs = {:.12}", s.dim(), s.gs_energy));
            out.metadata = json!({ "gs_energy": s.gs_energy, "dim": s.dim() });
        }
        CommandBlock::Critical { xi1, from, eps0 } => {
            let s = spectra.get(&cfg.model.with_xi(*xi1).stage("model")?)?;
            let c = critical(&s, from, *eps0)?;
            out.summary = critical_summary(&c);
            let text = serde_json::to_string_pretty(&json!({ "initial_state": from.to_string(), "result": c }))
                .map_err(|e| CliError::Stage { stage: "serialization", source: Error::Internal(e.to_string()) })?;
            out.files.add("critical.json", format!("{text}\n").into_bytes());
            out.metadata = json!({ "critical": c });
        }
        CommandBlock::Quench { xi1, xi2, from, eps0 } => {
            let (_, _, ldos, meta, summary) = run_quench(cfg, &spectra, *xi1, *xi2, from, *eps0)?;
            let times = cfg.grid.times();
            let f = survival_probability(&ldos, &times).stage("survival probability")?;
            out.files.add_table("survival.csv", series_table(&["t", "F"], &[&f.times, &f.values]));
            out.files.add_table("ldos.csv", ldos_table(&ldos));
            out.summary = summary;
            out.metadata = meta;
        }
        CommandBlock::Ldos { xi1, xi2, from, eps0, sigma } => {
            let (_, _, ldos, meta, summary) = run_quench(cfg, &spectra, *xi1, *xi2, from, *eps0)?;
            out.files.add_table("ldos.csv", ldos_table(&ldos));
            let lo = ldos.eps.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * sigma;
            let hi = ldos.eps.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * sigma;
            let grid = linspace(lo, hi, LDOS_GRID_POINTS);
            let rho = ldos.broadened(*sigma, &grid).stage("LDOS broadening")?;
            out.files.add_table("ldos_broadened.csv", series_table(&["eps", "rho"], &[&grid, &rho]));
            out.summary = summary;
            out.metadata = meta;
        }
        CommandBlock::Echo { delta, states } => {
            let sys = EchoSystem::new(&cfg.model, *delta, 0.0).stage("echo setup")?;
            let times = cfg.grid.times();
            for sel in states {
                let (parity, j, _) = resolve(&sys.unperturbed, sel)?;
                let m = sys.echo(parity, j, &times).stage("Loschmidt echo")?;
                out.files
                    .add_table(format!("echo_{parity}_{j}.csv"), series_table(&["t", "M"], &[&m.times, &m.values]));
            }
            let mut t = Table::new(&["j", "parity", "E_j", "eps_j", "M_bar"]);
            let mut degenerate = serde_json::Map::new();
            for parity in [Parity::Even, Parity::Odd] {
                let p = parity.to_string();
                for a in sys.averages(parity).stage("echo time average")? {
                    t.row(&[Cell::I(a.j), Cell::S(&p), Cell::F(a.energy), Cell::F(a.eps), Cell::F(a.m_bar)]);
                }
                degenerate.insert(p, json!(sys.sector_has_degeneracy(parity)));
            }
            out.files.add_table("echo_avg.csv", t);
            out.summary.push(format!("{} echo series, averages for {} states", states.len(), sys.unperturbed.dim()));
            out.metadata = json!({ "delta": delta, "degenerate_perturbed_sector": degenerate });
        }
        CommandBlock::Otoc { ops, states, parity, steady, commutator } => {
            let sys = otoc_system(spectra.get(&cfg.model)?, ops)?;
            let times = cfg.grid.times();
            let mut selected = Vec::new();
            for sel in states {
                let (p, j, i) = resolve(&sys.spectrum, sel)?;
                let s = sys.series(i, &times, *commutator).stage("OTOC time series")?;
                let table = match (&s.c_values, &s.a_values) {
                    (Some(c), Some(a)) => series_table(&["t", "F", "C", "A"], &[&s.times, &s.f_values, c, a]),
                    _ => series_table(&["t", "F"], &[&s.times, &s.f_values]),
                };
                out.files.add_table(format!("otoc_{p}_{j}.csv"), table);
                selected.push(i);
            }
            if selected.is_empty() {
                selected = sys.spectrum.sector(*parity).to_vec();
            }
            let fbar = steady_values(&sys, &selected, steady)?;
            let mut t = Table::new(&["parity", "index", "E", "eps", "F_bar"]);
            for (&i, f) in selected.iter().zip(&fbar) {
                let p = sys.spectrum.parities[i].to_string();
                t.row(&[
                    Cell::S(&p),
                    Cell::I(sys.spectrum.sector_index[i]),
                    Cell::F(sys.spectrum.energies[i]),
                    Cell::F(sys.spectrum.eps[i]),
                    Cell::F(*f),
                ]);
            }
            out.files.add_table("otoc_steady.csv", t);
            out.summary.push(format!("{} OTOC series, {} steady-state values", states.len(), fbar.len()));
            out.metadata = json!({ "W": ops.w.name(), "V": ops.v.name(), "normalized": ops.normalized });
        }
        CommandBlock::Diagram { xi_grid, ops, parity, steady } => {
            let rows = xi_grid
                .par_iter()
                .map(|&xi| {
                    let sys = otoc_system(spectra.get(&cfg.model.with_xi(xi).stage("model")?)?, ops)?;
                    let states = sys.spectrum.sector(*parity).to_vec();
                    let fbar = steady_values(&sys, &states, steady)?;
                    Ok(states
                        .iter()
                        .zip(fbar)
                        .map(|(&i, f)| {
                            (xi, sys.spectrum.sector_index[i], sys.spectrum.energies[i], sys.spectrum.eps[i], f)
                        })
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let p = parity.to_string();
            let mut t = Table::new(&["xi", "index", "E", "eps", "parity", "F_bar"]);
            for (xi, j, e, eps, f) in rows.into_iter().flatten() {
                t.row(&[Cell::F(xi), Cell::I(j), Cell::F(e), Cell::F(eps), Cell::S(&p), Cell::F(f)]);
            }
            out.files.add_table("diagram.csv", t);
            out.summary.push(format!("{} ξ values", xi_grid.len()));
            out.metadata = json!({ "W": ops.w.name(), "V": ops.v.name(), "normalized": ops.normalized });
        }
    }
    Ok(out)
}

fn verify(dir: &Path, fresh: &OutputSet) -> Result<(), CliError> {
    let manifest = output::read_manifest(dir).map_err(CliError::Config)?;
    let mut problems = output::verify_against(&manifest, fresh);
    for entry in &manifest.outputs {
        let path = dir.join(&entry.file);
        match std::fs::read(&path) {
            Ok(bytes) if output::sha256_hex(&bytes) != entry.sha256 => {
                problems.push(format!("{}: file on disk does not match the manifest", entry.file))
            }
            Ok(_) => {}
            Err(e) => problems.push(format!("{}: {e}", path.display())),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(problems))
    }
}

/// Computes, then either writes the outputs followed by `manifest.json` or,
/// with `verify`, compares them against the existing manifest.
pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let output = compute(cfg)?;
    let wall_time_seconds = start.elapsed().as_secs_f64();
    if cfg.verify {
        verify(&cfg.output_dir, &output.files)?;
        return Ok(RunReport { output, wall_time_seconds, verified: true });
    }
    output.files.write_all(&cfg.output_dir).stage("writing outputs")?;
    let manifest = Manifest {
        command: cfg.command.name().to_string(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(cfg)
            .map_err(|e| CliError::Stage { stage: "serialization", source: Error::Internal(e.to_string()) })?,
        wall_time_seconds,
        outputs: output.files.entries(),
        metadata: output.metadata.clone(),
    };
    output::write_manifest(&cfg.output_dir, &manifest).stage("writing manifest")?;
    Ok(RunReport { output, wall_time_seconds, verified: false })
}
