//! Command-line driver for the `ncgft` library.

pub mod check;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ncgft::afcore::{k0_pushforward, DimensionVector, EmbeddingSpec};
use ncgft::exec::set_thread_count;
use ncgft::gauge::{mass_form, mass_spectrum, probe_labels, FieldConfiguration, HiggsModel};
use ncgft::lift::{build_lifted_basis, default_source_bases, LiftedBasis};
use ncgft::ssbm::{detect_discontinuities, minimize_at, scan_path, summarize};

use crate::config::{load_config, Overrides, RunConfig};
use crate::output::{basis_dump, masses_dump, write_json, write_scan_csv, Metadata, ScanSummary};

#[derive(Debug, Parser)]
#[command(
    name = "ncgft",
    version,
    about = "Gauge fields on sums of matrix algebras: lifted bases, Higgs scans, K0 tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML or JSON run configuration (format taken from the extension)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the restart pool
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Built-in embedding: case1 (M2->M3), case2 (M2+M2->M4), case3 (M2+M2->M5), case4 (M2+M3->M5)
    #[arg(long, global = true, value_parser = ["case1", "case2", "case3", "case4"])]
    pub preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the lifted basis with labels and dof counts to basis.json
    Basis,
    /// Scan the configured path, locate discontinuities, write scan.csv and summary.json
    Scan,
    /// Minimize at a single λ point and print the mass spectrum
    Masses {
        /// Comma-separated λ values, one per source summand
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
    },
    /// Print K0 pushforwards of dimension vectors
    K0 {
        /// Comma-separated dimension vector; may be repeated
        #[arg(long, value_delimiter = ',')]
        vector: Vec<usize>,
    },
    /// Run the invariant suite; exits nonzero on any failure
    Check,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.common.preset.clone(),
            seed: self.common.seed,
            threads: self.common.threads,
            out: self.common.out.clone(),
        }
    }
}

/// Loads, overrides and validates the configuration.
pub fn resolve_config(
    config: Option<&Path>,
    overrides: &Overrides,
) -> anyhow::Result<(RunConfig, EmbeddingSpec)> {
    let base = match config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    base.resolve(overrides)
}

fn lifted(spec: &EmbeddingSpec) -> anyhow::Result<LiftedBasis> {
    Ok(build_lifted_basis(spec, &default_source_bases(spec)?)?)
}

fn out_dir(cfg: &RunConfig) -> anyhow::Result<&Path> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    let overrides = cli.overrides();
    if let Command::Check = cli.command {
        let seed = match &cli.common.config {
            Some(p) => load_config(p)?.seed,
            None => 0,
        };
        return Ok(run_check(cli.common.seed.unwrap_or(seed)));
    }
    let (cfg, spec) = resolve_config(cli.common.config.as_deref(), &overrides)?;
    if let Some(t) = cfg.threads {
        set_thread_count(t);
    }
    match &cli.command {
        Command::Basis => {
            let basis = lifted(&spec)?;
            let dump = basis_dump(&cfg, "basis", &basis)?;
            let path = out_dir(&cfg)?.join("basis.json");
            write_json(&path, &dump)?;
            println!("{}: wrote {}", cfg.case_name(), path.display());
            Ok(0)
        }
        Command::Scan => run_scan(&cfg, &spec),
        Command::Masses { lambda } => {
            let rank = spec.source().rank();
            let lambdas = lambda
                .clone()
                .or_else(|| cfg.lambdas.clone())
                .unwrap_or_else(|| vec![1.0; rank]);
            anyhow::ensure!(
                lambdas.len() == rank,
                "{} λ values for {rank} source summands",
                lambdas.len()
            );
            let basis = lifted(&spec)?;
            let model = HiggsModel::new(&basis);
            let warm = vec![
                FieldConfiguration::zeros(&basis, &lambdas).to_flat(),
                FieldConfiguration::basis_configuration(&basis, &lambdas).to_flat(),
            ];
            let r = minimize_at(&basis, &model, &lambdas, &warm, &cfg.scan_options(), 0)?;
            let s = mass_spectrum(&mass_form(&basis, &r.minimizer)?, &probe_labels(&basis)?)?;
            println!(
                "{} λ={lambdas:?} V_min={:e} converged={}",
                cfg.case_name(),
                r.v_min,
                r.converged
            );
            for c in &s.clusters {
                println!("  {:>12.8} x{} {}", c.mass, c.degeneracy, c.label);
            }
            let path = out_dir(&cfg)?.join("masses.json");
            write_json(
                &path,
                &masses_dump(&cfg, lambdas, r.v_min, r.converged, r.grad_norm, &s),
            )?;
            Ok(if r.converged { 0 } else { 1 })
        }
        Command::K0 { vector } => {
            let rank = spec.source().rank();
            let vectors: Vec<Vec<usize>> = if !vector.is_empty() {
                anyhow::ensure!(
                    vector.len() % rank == 0,
                    "--vector needs {rank} entries per vector"
                );
                vector.chunks(rank).map(<[usize]>::to_vec).collect()
            } else if !cfg.k0.is_empty() {
                cfg.k0.clone()
            } else {
                (0..rank)
                    .map(|i| (0..rank).map(|k| usize::from(k == i)).collect())
                    .collect()
            };
            println!("{}", cfg.case_name());
            for v in vectors {
                let w = k0_pushforward(&spec, &DimensionVector(v.clone()))?;
                let fmt = |x: &[usize]| {
                    x.iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                println!("({}) -> ({})", fmt(&v), fmt(w.entries()));
            }
            Ok(0)
        }
        Command::Check => unreachable!(),
    }
}

fn run_scan(cfg: &RunConfig, spec: &EmbeddingSpec) -> anyhow::Result<i32> {
    let basis = lifted(spec)?;
    let result = scan_path(&basis, &cfg.path, &cfg.scan_options())?;
    let (table, discontinuities, mut warnings) = if cfg.path.is_linear() {
        let disc = detect_discontinuities(&basis, &result)?;
        let name = cfg.case_name();
        let table = summarize(&[(name.as_str(), &basis, &disc)])?;
        let warnings = table.iter().flat_map(|r| r.warnings.clone()).collect();
        (table, disc.found, warnings)
    } else {
        (
            Vec::new(),
            Vec::new(),
            vec!["grid paths are not searched for discontinuities".to_string()],
        )
    };
    let unconverged: Vec<f64> = result
        .rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.param)
        .collect();
    if !unconverged.is_empty() {
        warnings.push(format!("{} rows did not converge", unconverged.len()));
    }
    let dir = out_dir(cfg)?;
    let file = std::fs::File::create(dir.join("scan.csv")).context("creating scan.csv")?;
    write_scan_csv(std::io::BufWriter::new(file), &result)?;
    let summary = ScanSummary {
        metadata: Metadata::new("scan", cfg),
        partial: !unconverged.is_empty(),
        unconverged,
        warnings,
        table,
        discontinuities,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("basis.json"), &basis_dump(cfg, "scan", &basis)?)?;
    for row in &summary.table {
        let cell = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{}: n_ndof={} n_idof={} r_dof={:.3} first={} second={}",
            row.case,
            row.n_ndof,
            row.n_idof,
            row.r_dof,
            cell(row.lambda_first),
            cell(row.lambda_second)
        );
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", dir.display());
    Ok(if summary.partial { 1 } else { 0 })
}

fn run_check(seed: u64) -> i32 {
    let results = check::run_checks(seed);
    let mut failed = 0;
    for r in &results {
        println!(
            "{} {} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        failed += usize::from(!r.passed);
    }
    println!("{} checks, {failed} failed", results.len());
    i32::from(failed > 0)
}
