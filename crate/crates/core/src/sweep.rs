//! Monte Carlo runner: simulate replicates of a scenario, apply each method
//! with the true latent rank, and score the pooled predictions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{eigenstrat, oracle_regress, raw_regress, sva, SvaOptions};
use crate::error::{LeappError, Result};
use crate::eval::{pooled_roc_auc, precision_at, roc_auc};
use crate::model::{DataMatrix, GeneResult, SimTruth, StudyDesign};
use crate::pipeline::{leapp, LeappConfig};
use crate::simgen::{generate, SimScenario};

/// Number of top-ranked genes used for precision.
pub const PRECISION_DEPTH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Leapp,
    Raw,
    Sva,
    Eigenstrat,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Oracle,
        Method::Leapp,
        Method::Raw,
        Method::Sva,
        Method::Eigenstrat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Leapp => "leapp",
            Method::Raw => "raw",
            Method::Sva => "sva",
            Method::Eigenstrat => "eigenstrat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// Runs one method with latent rank `k`. The oracle needs the truth.
pub fn run_method(
    method: Method,
    y: &DataMatrix,
    d: &StudyDesign,
    k: usize,
    truth: Option<&SimTruth>,
) -> Result<GeneResult> {
    match method {
        Method::Leapp => leapp(y, d, &LeappConfig::with_rank(k)).map(|f| f.genes),
        Method::Raw => raw_regress(y, d),
        Method::Sva => sva(y, d, k, &SvaOptions::default()).map(|f| f.genes),
        Method::Eigenstrat => eigenstrat(y, d, k),
        Method::Oracle => {
            let truth = truth.ok_or_else(|| {
                LeappError::DegenerateDesign("the oracle method needs the true latent term".into())
            })?;
            oracle_regress(y, d, &truth.latent())
        }
    }
}

/// Mixes a base seed and a replicate index into a replicate seed
/// (SplitMix64 finalizer).
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    let mut z = seed ^ (rep as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Replicate {
    pub seed: u64,
    pub truth: Vec<bool>,
    /// `|T|` per method, in the order requested.
    pub scores: Vec<(Method, Vec<f64>)>,
}

/// Simulates the scenario with `sc.seed` replaced by `seed` and applies
/// every method.
pub fn run_replicate(sc: &SimScenario, seed: u64, methods: &[Method]) -> Result<Replicate> {
    let sc = SimScenario { seed, ..sc.clone() };
    let (y, d, truth) = generate(&sc)?;
    let mut scores = Vec::with_capacity(methods.len());
    for &m in methods {
        let genes = run_method(m, &y, &d, sc.k, Some(&truth))?;
        scores.push((m, genes.scores()));
    }
    Ok(Replicate {
        seed,
        truth: truth.nonnull_mask,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// AUC of the pooled predictions.
    pub auc: f64,
    /// Mean over replicates of the precision among the top 50 genes.
    pub precision_at_50: f64,
    pub mean_replicate_auc: f64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub scenario: SimScenario,
    pub replicates: Vec<Replicate>,
    pub summary: BTreeMap<Method, MethodSummary>,
}

impl CellResult {
    /// Concatenated `(scores, truth)` of one method over all replicates.
    pub fn pooled(&self, method: Method) -> Option<(Vec<f64>, Vec<bool>)> {
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for r in &self.replicates {
            let (_, s) = r.scores.iter().find(|(m, _)| *m == method)?;
            scores.extend_from_slice(s);
            truth.extend_from_slice(&r.truth);
        }
        Some((scores, truth))
    }

    pub fn auc(&self, method: Method) -> Option<f64> {
        self.summary.get(&method).map(|s| s.auc)
    }
}

pub fn run_cell(sc: &SimScenario, reps: usize, methods: &[Method]) -> Result<CellResult> {
    run_cell_with_progress(sc, reps, methods, &|_| {})
}

/// [`run_cell`] calling `progress(rep)` as each replicate finishes.
/// Replicates run on the current rayon pool; results are kept in replicate
/// order so the summary does not depend on scheduling.
pub fn run_cell_with_progress(
    sc: &SimScenario,
    reps: usize,
    methods: &[Method],
    progress: &(dyn Fn(usize) + Sync),
) -> Result<CellResult> {
    sc.check()?;
    if reps == 0 || methods.is_empty() {
        return Err(LeappError::InvalidScenario("need at least one replicate and one method".into()));
    }
    let replicates: Vec<Replicate> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let r = run_replicate(sc, replicate_seed(sc.seed, rep), methods);
            progress(rep);
            r
        })
        .collect::<Result<_>>()?;

    let mut cell = CellResult {
        scenario: sc.clone(),
        replicates,
        summary: BTreeMap::new(),
    };
    let depth = PRECISION_DEPTH.min(sc.n_genes);
    for &m in methods {
        let per_rep: Vec<(Vec<f64>, Vec<bool>)> = cell
            .replicates
            .iter()
            .map(|r| {
                let (_, s) = r.scores.iter().find(|(mm, _)| *mm == m).expect("method was run");
                (s.clone(), r.truth.clone())
            })
            .collect();
        let auc = pooled_roc_auc(&per_rep)?.auc;
        let mut precision = 0.0;
        let mut rep_auc = 0.0;
        let mut rep_auc_count = 0usize;
        for (s, t) in &per_rep {
            precision += precision_at(s, t, depth)?;
            // A replicate with no nonnull gene has no AUC of its own.
            if let Ok(r) = roc_auc(s, t) {
                rep_auc += r.auc;
                rep_auc_count += 1;
            }
        }
        cell.summary.insert(
            m,
            MethodSummary {
                auc,
                precision_at_50: precision / reps as f64,
                mean_replicate_auc: if rep_auc_count > 0 {
                    rep_auc / rep_auc_count as f64
                } else {
                    f64::NAN
                },
            },
        );
    }
    Ok(cell)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("pca".parse::<Method>().is_err());
    }

    #[test]
    fn replicate_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| replicate_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(replicate_seed(1, 0), replicate_seed(2, 0));
    }

    #[test]
    fn small_cell_is_deterministic() {
        let sc = SimScenario {
            n: 20,
            n_genes: 200,
            seed: 11,
            ..SimScenario::default()
        };
        let a = run_cell(&sc, 2, &Method::ALL).unwrap();
        let b = run_cell(&sc, 2, &Method::ALL).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.pooled(Method::Leapp).unwrap().0.len(), 400);
    }
}
