//! Output files: `scan.csv`, `summary.json`, `basis.json`, `masses.json`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use ncgft::gauge::MassSpectrum;
use ncgft::lift::{
    class_counts, classify_directions, dof_counts, DirectionClass, Family, IndexKind, LiftedBasis,
};
use ncgft::ssbm::{Discontinuity, ScanResult, SummaryRow};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
}

impl<'a> Metadata<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `mass:label` cell, masses sorted descending.
fn mass_cells(s: &MassSpectrum) -> impl Iterator<Item = String> + '_ {
    s.masses
        .iter()
        .zip(&s.labels)
        .map(|(m, l)| format!("{m}:{l}"))
}

/// Columns: `path_param, lambda_1..lambda_r, V_min, converged, mass_1..mass_N`; each mass
/// cell is `value:label`.
pub fn write_scan_csv<W: Write>(out: W, result: &ScanResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = result.rows.first() else {
        w.flush()?;
        return Ok(());
    };
    let rank = first.lambdas.len();
    let n_mass = first.spectrum.masses.len();
    let mut header = vec!["path_param".to_string()];
    header.extend((1..=rank).map(|i| format!("lambda_{i}")));
    header.push("V_min".into());
    header.push("converged".into());
    header.extend((1..=n_mass).map(|k| format!("mass_{k}")));
    w.write_record(&header)?;
    for row in &result.rows {
        let mut rec = vec![row.param.to_string()];
        rec.extend(row.lambdas.iter().map(f64::to_string));
        rec.push(row.v_min.to_string());
        rec.push(row.converged.to_string());
        rec.extend(mass_cells(&row.spectrum));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ScanSummary<'a> {
    pub metadata: Metadata<'a>,
    /// Set when some rows did not reach the gradient tolerance.
    pub partial: bool,
    pub unconverged: Vec<f64>,
    pub warnings: Vec<String>,
    pub table: Vec<SummaryRow>,
    pub discontinuities: Vec<Discontinuity>,
}

#[derive(Debug, Serialize)]
struct BlockDump {
    m: usize,
    pad: usize,
    inherited: usize,
    complement: usize,
    kinds: Vec<IndexKind>,
    family_sizes: BTreeMap<Family, usize>,
    /// Generator matrices as rows of `[re, im]` pairs.
    generators: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Serialize)]
pub struct BasisDump<'a> {
    metadata: Metadata<'a>,
    case: String,
    n_idof: usize,
    n_ndof: usize,
    r_dof: Option<f64>,
    /// Direction classes of the lifted generators; single target block only.
    labels: Option<Vec<DirectionClass>>,
    class_counts: Option<BTreeMap<DirectionClass, usize>>,
    blocks: Vec<BlockDump>,
}

pub fn basis_dump<'a>(
    config: &'a RunConfig,
    command: &'static str,
    basis: &LiftedBasis,
) -> anyhow::Result<BasisDump<'a>> {
    let spec = basis.spec();
    let n_idof = basis.blocks().iter().map(|b| b.inherited_count()).sum();
    let n_ndof = basis.blocks().iter().map(|b| b.complement_count()).sum();
    let r_dof = dof_counts(basis).ok().map(|(_, _, r)| r);
    let labels = classify_directions(basis, spec).ok();
    let class_counts = labels.as_deref().map(class_counts);
    let blocks = basis
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, b)| BlockDump {
            m: b.m(),
            pad: spec.pad()[j],
            inherited: b.inherited_count(),
            complement: b.complement_count(),
            kinds: b.kinds().to_vec(),
            family_sizes: b.family_sizes(),
            generators: b
                .basis()
                .generators()
                .iter()
                .map(|g| {
                    (0..g.nrows())
                        .map(|r| {
                            (0..g.ncols())
                                .map(|c| [g[(r, c)].re, g[(r, c)].im])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    Ok(BasisDump {
        metadata: Metadata::new(command, config),
        case: config.case_name(),
        n_idof,
        n_ndof,
        r_dof,
        labels,
        class_counts,
        blocks,
    })
}

#[derive(Debug, Serialize)]
pub struct ClusterDump {
    pub mass: f64,
    pub mass_sq: f64,
    pub degeneracy: usize,
    pub label: DirectionClass,
}

#[derive(Debug, Serialize)]
pub struct MassesDump<'a> {
    pub metadata: Metadata<'a>,
    pub lambdas: Vec<f64>,
    pub v_min: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub masses: Vec<String>,
    pub clusters: Vec<ClusterDump>,
}

pub fn masses_dump<'a>(
    config: &'a RunConfig,
    lambdas: Vec<f64>,
    v_min: f64,
    converged: bool,
    grad_norm: f64,
    spectrum: &MassSpectrum,
) -> MassesDump<'a> {
    MassesDump {
        metadata: Metadata::new("masses", config),
        lambdas,
        v_min,
        converged,
        grad_norm,
        masses: mass_cells(spectrum).collect(),
        clusters: spectrum
            .clusters
            .iter()
            .map(|c| ClusterDump {
                mass: c.mass,
                mass_sq: c.mass_sq,
                degeneracy: c.degeneracy,
                label: c.label,
            })
            .collect(),
    }
}
