use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use latent_adjust::baselines::{eigenstrat, raw_regress, sva, SvaOptions};
use latent_adjust::pipeline::estimate_rank;
use latent_adjust::rank_estimate::RankConfig;
use latent_adjust::{leapp, DataMatrix, GeneResult, LeappConfig, StudyDesign};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, read_rows, read_vector, write_csv, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzeMethod {
    Leapp,
    Raw,
    Sva,
    Eigenstrat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tau {
    /// Robust scale of the primary residuals.
    Mad,
    /// Degrees-of-freedom formula, for non-sparse effects.
    Df,
}

/// `auto` or a fixed latent rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankChoice {
    Auto,
    Fixed(usize),
}

impl FromStr for RankChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(RankChoice::Auto)
        } else {
            s.parse()
                .map(RankChoice::Fixed)
                .map_err(|_| format!("expected a non-negative integer or 'auto', got '{s}'"))
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Data CSV, one row per gene and one column per subject.
    #[arg(long)]
    pub y: PathBuf,
    /// Primary variable, one value per subject. It is centered and scaled
    /// to unit length before use.
    #[arg(long)]
    pub g: PathBuf,
    /// Covariates, one row per subject.
    #[arg(long)]
    pub x: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "leapp")]
    pub method: AnalyzeMethod,
    /// Latent rank, or `auto` for parallel analysis.
    #[arg(long, default_value = "auto")]
    pub k: RankChoice,
    /// Residual scale for the LEAPP statistics.
    #[arg(long, value_enum, default_value = "mad")]
    pub tau: Tau,
    /// Add a column of ones to the covariates.
    #[arg(long)]
    pub intercept: bool,
    /// Seed for the permutations behind `--k auto`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result CSV. Metadata goes next to it with the extension `.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Meta {
    method: AnalyzeMethod,
    n_genes: usize,
    n_subjects: usize,
    n_covariates: usize,
    intercept: bool,
    k_hat: Option<usize>,
    k_estimated: bool,
    tau_hat: Option<f64>,
    lambda: Option<f64>,
    outliers: Option<usize>,
    converged: Option<bool>,
    iterations: Option<usize>,
    /// 1-based indices of genes whose noise scale hit the floor.
    floored_genes: Vec<usize>,
}

pub fn meta_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn load(args: &AnalyzeArgs) -> CliResult<(DataMatrix, StudyDesign)> {
    let y = DataMatrix::from_rows(&read_rows(&args.y)?)?;
    let n = y.n_subjects();
    let g = read_vector(&args.g)?;
    if g.len() != n {
        return Err(CliError::Invalid(format!(
            "{}: {} values but the data have {n} subjects",
            args.g.display(),
            g.len()
        )));
    }
    let g = DVector::from_vec(g);
    let mut x = match &args.x {
        Some(path) => {
            let rows = read_rows(path)?;
            if rows.len() != n {
                return Err(CliError::Invalid(format!(
                    "{}: {} rows but the data have {n} subjects",
                    path.display(),
                    rows.len()
                )));
            }
            DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j])
        }
        None => DMatrix::zeros(n, 0),
    };
    if args.intercept {
        x = x.insert_column(0, 1.0);
    }
    let d = StudyDesign::new(g, Some(x), None)
        .centered_normalized()
        .map_err(|_| CliError::Invalid(format!("{}: primary variable is constant", args.g.display())))?;
    Ok((y, d))
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    let (y, d) = load(args)?;
    let rank_cfg = RankConfig {
        seed: args.seed,
        ..RankConfig::default()
    };
    let fixed = match args.k {
        RankChoice::Fixed(k) => Some(k),
        RankChoice::Auto => None,
    };
    let mut meta = Meta {
        method: args.method,
        n_genes: y.n_genes(),
        n_subjects: y.n_subjects(),
        n_covariates: d.n_covariates(),
        intercept: args.intercept,
        k_hat: None,
        k_estimated: false,
        tau_hat: None,
        lambda: None,
        outliers: None,
        converged: None,
        iterations: None,
        floored_genes: Vec::new(),
    };

    let genes: GeneResult = match args.method {
        AnalyzeMethod::Leapp => {
            let cfg = LeappConfig {
                k: fixed,
                rank: rank_cfg,
                sparse_gamma: args.tau == Tau::Mad,
                ..LeappConfig::default()
            };
            let fit = leapp(&y, &d, &cfg)?;
            meta.k_hat = Some(fit.k_hat);
            meta.k_estimated = fit.rank_estimated;
            meta.tau_hat = fit.genes.tau_hat;
            meta.lambda = Some(fit.ipod.lambda);
            meta.outliers = Some(fit.ipod.support_size());
            meta.converged = Some(fit.latent.converged);
            meta.iterations = Some(fit.latent.iterations);
            meta.floored_genes = fit.latent.floored.iter().map(|i| i + 1).collect();
            fit.genes
        }
        AnalyzeMethod::Raw => raw_regress(&y, &d)?,
        AnalyzeMethod::Sva | AnalyzeMethod::Eigenstrat => {
            let k = match fixed {
                Some(k) => k,
                None => {
                    meta.k_estimated = true;
                    estimate_rank(&y, &d, &rank_cfg)?
                }
            };
            if k == 0 {
                return Err(CliError::Invalid("sva and eigenstrat need a latent rank of at least 1".into()));
            }
            meta.k_hat = Some(k);
            if args.method == AnalyzeMethod::Sva {
                let fit = sva(&y, &d, k, &SvaOptions::default())?;
                meta.converged = Some(fit.converged);
                meta.iterations = Some(fit.iterations);
                fit.genes
            } else {
                eigenstrat(&y, &d, k)?
            }
        }
    };

    let gamma = genes.gamma_hat.as_ref();
    let lines = (0..genes.n_genes()).map(|i| {
        format!(
            "{},{},{},{},{}",
            i + 1,
            fmt_f64(genes.t_stat[i]),
            fmt_f64(genes.p_value[i]),
            genes.rank[i],
            gamma.map(|g| fmt_f64(g[i])).unwrap_or_default()
        )
    });
    write_csv(&args.out, "gene_index,t_stat,p_value,rank,gamma_hat", lines)?;
    write_json(&meta_path(&args.out), &meta)
}
