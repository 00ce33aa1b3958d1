use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::Args;
use latent_adjust::eval::pooled_roc_auc;
use latent_adjust::simgen::{generate, SimScenario};
use latent_adjust::sweep::{replicate_seed, run_cell_with_progress, run_method, CellResult, Method, MethodSummary};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, write_csv, write_json, write_matrix};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "LATENT_ADJUST_THREADS";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Subjects per data set (even).
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Genes per data set.
    #[arg(long = "N", default_value_t = 1000)]
    pub n_genes: usize,
    /// Signal-to-noise ratios, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub snr: Vec<f64>,
    /// Latent-to-noise ratios, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub lnr: Vec<f64>,
    /// Correlations between the primary and latent variables.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub rho: Vec<f64>,
    /// Fraction of genes with an effect.
    #[arg(long, default_value_t = 0.1)]
    pub pi: f64,
    /// Latent rank, also handed to every method.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Base seed. Every grid cell uses the same replicate seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replicates per grid cell.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "oracle,leapp,raw,sva,eigenstrat")]
    pub methods: Vec<Method>,
    /// One subdirectory per grid cell is written here.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Instead of a sweep, simulate this many data sets that share their
    /// affected genes and write one p-value column per data set.
    #[arg(long)]
    pub tissues: Option<usize>,
    /// Also write each replicate's data and truth.
    #[arg(long)]
    pub write_data: bool,
    /// Report finished replicates on stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Serialize)]
struct CellSummary<'a> {
    scenario: &'a SimScenario,
    reps: usize,
    methods: BTreeMap<Method, MethodSummary>,
}

#[derive(Debug, Serialize)]
struct TissueSummary<'a> {
    scenario: &'a SimScenario,
    tissues: usize,
    /// AUC of the pooled `|T|` over all data sets.
    auc: BTreeMap<Method, f64>,
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let threads: usize = v
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::Invalid(format!("{THREADS_VAR}='{v}' is not a positive integer")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))
}

fn cell_name(sc: &SimScenario) -> String {
    format!("snr{}_lnr{}_rho{}", sc.snr, sc.lnr, sc.rho)
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    if args.methods.is_empty() {
        return Err(CliError::Invalid("--methods is empty".into()));
    }
    if args.reps == 0 {
        return Err(CliError::Invalid("--reps must be positive".into()));
    }
    let mut cells = Vec::new();
    for &snr in &args.snr {
        for &lnr in &args.lnr {
            for &rho in &args.rho {
                let sc = SimScenario {
                    n: args.n,
                    n_genes: args.n_genes,
                    snr,
                    lnr,
                    rho,
                    pi: args.pi,
                    k: args.k,
                    seed: args.seed,
                    gamma_seed: None,
                };
                sc.check()?;
                cells.push(sc);
            }
        }
    }
    let pool = thread_pool()?;
    pool.install(|| match args.tissues {
        Some(m) => cells
            .iter()
            .enumerate()
            .try_for_each(|(i, sc)| run_tissues(args, sc, m, i, cells.len())),
        None => run_sweep(args, &cells),
    })
}

fn run_sweep(args: &SimulateArgs, cells: &[SimScenario]) -> CliResult<()> {
    let mut grid_lines = Vec::new();
    for (i, sc) in cells.iter().enumerate() {
        let dir = args.out_dir.join(cell_name(sc));
        let done = AtomicUsize::new(0);
        let progress = |_rep: usize| {
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if args.progress {
                eprintln!("cell {}/{} {}: {finished}/{} replicates", i + 1, cells.len(), cell_name(sc), args.reps);
            }
        };
        let cell = run_cell_with_progress(sc, args.reps, &args.methods, &progress)?;
        write_predictions(&dir.join("predictions.csv"), &cell, &args.methods)?;
        write_json(
            &dir.join("summary.json"),
            &CellSummary {
                scenario: sc,
                reps: args.reps,
                methods: cell.summary.clone(),
            },
        )?;
        if args.write_data {
            write_replicate_data(&dir, sc, args.reps)?;
        }
        for (m, s) in &cell.summary {
            grid_lines.push(format!(
                "{},{},{},{m},{},{},{}",
                sc.snr,
                sc.lnr,
                sc.rho,
                fmt_f64(s.auc),
                fmt_f64(s.precision_at_50),
                fmt_f64(s.mean_replicate_auc)
            ));
        }
    }
    write_csv(
        &args.out_dir.join("summary.csv"),
        "snr,lnr,rho,method,auc,precision_at_50,mean_replicate_auc",
        grid_lines,
    )
}

/// One line per (replicate, gene) with the `|T|` of every method.
fn write_predictions(path: &Path, cell: &CellResult, methods: &[Method]) -> CliResult<()> {
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    let header = format!("replicate,gene,nonnull,{}", names.join(","));
    let lines = cell.replicates.iter().enumerate().flat_map(|(r, rep)| {
        (0..rep.truth.len()).map(move |i| {
            let scores: Vec<String> = rep.scores.iter().map(|(_, s)| fmt_f64(s[i])).collect();
            format!("{},{},{},{}", r + 1, i + 1, u8::from(rep.truth[i]), scores.join(","))
        })
    });
    write_csv(path, &header, lines)
}

fn write_replicate_data(dir: &Path, sc: &SimScenario, reps: usize) -> CliResult<()> {
    for r in 0..reps {
        let seed = replicate_seed(sc.seed, r);
        let (y, d, truth) = generate(&SimScenario { seed, ..sc.clone() })?;
        let rep_dir = dir.join(format!("rep{:04}", r + 1));
        let values = y.values();
        write_matrix(
            &rep_dir.join("y.csv"),
            (0..values.nrows()).map(|i| values.row(i).iter().copied().collect()),
        )?;
        write_matrix(&rep_dir.join("g.csv"), d.g.iter().map(|&v| vec![v]))?;
        let k = truth.u.ncols();
        let mut header = vec!["gamma".to_string(), "sigma".to_string(), "nonnull".to_string()];
        header.extend((1..=k).map(|c| format!("u{c}")));
        let lines = (0..truth.gamma.len()).map(|i| {
            let mut cells = vec![
                fmt_f64(truth.gamma[i]),
                fmt_f64(truth.sigma[i]),
                u8::from(truth.nonnull_mask[i]).to_string(),
            ];
            cells.extend((0..k).map(|c| fmt_f64(truth.u[(i, c)])));
            cells.join(",")
        });
        write_csv(&rep_dir.join("truth.csv"), &header.join(","), lines)?;
        write_matrix(
            &rep_dir.join("v.csv"),
            (0..truth.v.nrows()).map(|j| truth.v.row(j).iter().copied().collect()),
        )?;
        write_json(&rep_dir.join("scenario.json"), &SimScenario { seed, ..sc.clone() })?;
    }
    Ok(())
}

fn run_tissues(args: &SimulateArgs, sc: &SimScenario, m: usize, cell: usize, cells: usize) -> CliResult<()> {
    if m < 1 {
        return Err(CliError::Invalid("--tissues must be positive".into()));
    }
    let dir = args.out_dir.join(cell_name(sc));
    let done = AtomicUsize::new(0);
    // Data set j keeps the shared effects and draws everything else fresh.
    let results: Vec<_> = (0..m)
        .into_par_iter()
        .map(|j| {
            let tissue = SimScenario {
                seed: replicate_seed(sc.seed, j),
                gamma_seed: Some(sc.seed),
                ..sc.clone()
            };
            let (y, d, truth) = generate(&tissue)?;
            let fits = args
                .methods
                .iter()
                .map(|&method| run_method(method, &y, &d, sc.k, Some(&truth)))
                .collect::<latent_adjust::Result<Vec<_>>>()?;
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if args.progress {
                eprintln!("cell {}/{cells} {}: {finished}/{m} data sets", cell + 1, cell_name(sc));
            }
            Ok::<_, CliError>((truth.nonnull_mask, fits))
        })
        .collect::<CliResult<_>>()?;

    let mask = &results[0].0;
    write_csv(&dir.join("nonnull.csv"), "nonnull", mask.iter().map(|&b| u8::from(b).to_string()))?;
    let mut auc = BTreeMap::new();
    for (mi, &method) in args.methods.iter().enumerate() {
        let rows = (0..sc.n_genes).map(|i| results.iter().map(|(_, fits)| fits[mi].p_value[i]).collect());
        write_matrix(&dir.join(format!("pvals_{}.csv", method.name())), rows)?;
        let pooled: Vec<(Vec<f64>, Vec<bool>)> = results
            .iter()
            .map(|(truth, fits)| (fits[mi].scores(), truth.clone()))
            .collect();
        auc.insert(method, pooled_roc_auc(&pooled)?.auc);
    }
    write_json(
        &dir.join("summary.json"),
        &TissueSummary {
            scenario: sc,
            tissues: m,
            auc,
        },
    )
}
