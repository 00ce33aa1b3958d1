//! Scoring helpers: ROC curves and AUC over pooled predictions, precision
//! among the top-ranked genes, the latent-direction cosine and multi-list
//! resemblance curves.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{LeappError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    /// `(fpr, tpr)` points from `(0, 0)` to `(1, 1)`, one per distinct score.
    pub curve: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Higher scores come first; NaN sorts below everything.
fn descending(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.total_cmp(&a),
    }
}

fn same_score(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// ROC curve of `scores` (larger means more likely true) against `truth`.
/// Tied scores move the curve diagonally in one step, which is the average
/// over all orderings of the tie.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<Roc> {
    if scores.len() != truth.len() {
        return Err(LeappError::IndexMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(LeappError::DegenerateTruth);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| descending(scores[a], scores[b]));

    let (p, q) = (positives as f64, negatives as f64);
    let mut curve = Vec::with_capacity(order.len() + 1);
    curve.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let (tp0, fp0) = (tp, fp);
        while end < order.len() && same_score(scores[order[end]], scores[order[start]]) {
            if truth[order[end]] {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        curve.push((fp as f64 / q, tp as f64 / p));
        start = end;
    }
    Ok(Roc {
        curve,
        auc: area / (p * q),
    })
}

/// ROC of the concatenation of several replicates' predictions.
pub fn pooled_roc_auc(replicates: &[(Vec<f64>, Vec<bool>)]) -> Result<Roc> {
    let scores: Vec<f64> = replicates.iter().flat_map(|(s, _)| s.iter().copied()).collect();
    let truth: Vec<bool> = replicates.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    roc_auc(&scores, &truth)
}

/// Average of the per-replicate AUCs.
pub fn mean_replicate_auc(replicates: &[(Vec<f64>, Vec<bool>)]) -> Result<f64> {
    if replicates.is_empty() {
        return Err(LeappError::DegenerateTruth);
    }
    let mut total = 0.0;
    for (s, t) in replicates {
        total += roc_auc(s, t)?.auc;
    }
    Ok(total / replicates.len() as f64)
}

/// Fraction of true labels among the `h` highest scores; ties go to the
/// lower index.
pub fn precision_at(scores: &[f64], truth: &[bool], h: usize) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(LeappError::IndexMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if h == 0 || h > scores.len() {
        return Err(LeappError::DimensionMismatch(format!(
            "H = {h} must lie in 1..={}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| descending(scores[a], scores[b]).then(a.cmp(&b)));
    let hits = order[..h].iter().filter(|&&i| truth[i]).count();
    Ok(hits as f64 / h as f64)
}

/// `|cos|` of the angle between two `N × 1` loading vectors.
pub fn angle_cosine(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
    if u_hat.shape() != u.shape() || u.ncols() != 1 {
        return Err(LeappError::DimensionMismatch(format!(
            "expected two N x 1 matrices, got {:?} and {:?}",
            u_hat.shape(),
            u.shape()
        )));
    }
    let (a, b) = (u_hat.norm(), u.norm());
    if a == 0.0 || b == 0.0 {
        return Err(LeappError::ZeroVector);
    }
    Ok((u_hat.dot(u).abs() / (a * b)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResemblancePoint {
    pub alpha: f64,
    /// `Σ_{j<j'} |A_j ∩ A_j'|`
    pub intersections: u64,
    /// `|∪_j A_j|`
    pub union: u64,
}

/// Running counts of how many lists call each gene significant.
struct OverlapSweep {
    /// `(p, gene)` pairs over all lists, ascending in `p`.
    events: Vec<(f64, usize)>,
    next: usize,
    hits: Vec<u64>,
    intersections: u64,
    union: u64,
}

impl OverlapSweep {
    fn new(pvals: &[Vec<f64>]) -> Result<Self> {
        if pvals.len() < 2 {
            return Err(LeappError::DimensionMismatch(format!(
                "need at least two p-value lists, got {}",
                pvals.len()
            )));
        }
        let n_genes = pvals[0].len();
        if let Some((j, list)) = pvals.iter().enumerate().find(|(_, l)| l.len() != n_genes) {
            return Err(LeappError::IndexMismatch(format!(
                "list {} has {} entries, list 1 has {n_genes}",
                j + 1,
                list.len()
            )));
        }
        let mut events: Vec<(f64, usize)> = pvals
            .iter()
            .flat_map(|l| l.iter().copied().enumerate().map(|(i, p)| (p, i)))
            .filter(|(p, _)| !p.is_nan())
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            events,
            next: 0,
            hits: vec![0; n_genes],
            intersections: 0,
            union: 0,
        })
    }

    fn advance_to(&mut self, alpha: f64) -> ResemblancePoint {
        while self.next < self.events.len() && self.events[self.next].0 <= alpha {
            let gene = self.events[self.next].1;
            // A gene already called by c lists joins c new pairs.
            self.intersections += self.hits[gene];
            if self.hits[gene] == 0 {
                self.union += 1;
            }
            self.hits[gene] += 1;
            self.next += 1;
        }
        ResemblancePoint {
            alpha,
            intersections: self.intersections,
            union: self.union,
        }
    }

    fn next_threshold(&self) -> Option<f64> {
        self.events.get(self.next).map(|e| e.0)
    }
}

/// Pairwise-overlap and union counts of the lists `{i : pⱼᵢ ≤ α}` at each
/// of the nondecreasing thresholds `alphas`.
pub fn resemblance_curve(pvals: &[Vec<f64>], alphas: &[f64]) -> Result<Vec<ResemblancePoint>> {
    if alphas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(LeappError::DimensionMismatch("alphas must be sorted ascending".into()));
    }
    let mut sweep = OverlapSweep::new(pvals)?;
    Ok(alphas.iter().map(|&a| sweep.advance_to(a)).collect())
}

/// The resemblance curve evaluated at every distinct observed p-value,
/// stopping before the union first exceeds `u_max`.
pub fn resemblance_until(pvals: &[Vec<f64>], u_max: u64) -> Result<Vec<ResemblancePoint>> {
    let mut sweep = OverlapSweep::new(pvals)?;
    let mut out = Vec::new();
    while let Some(alpha) = sweep.next_threshold() {
        let point = sweep.advance_to(alpha);
        if point.union > u_max {
            break;
        }
        out.push(point);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case_auc() {
        let r = roc_auc(&[3.0, 2.0, 1.0], &[true, false, true]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.curve, vec![(0.0, 0.0), (0.0, 0.5), (1.0, 0.5), (1.0, 1.0)]);
    }

    #[test]
    fn full_tie_is_chance() {
        let r = roc_auc(&[1.0; 4], &[true, false, true, false]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.curve.len(), 2);
    }

    #[test]
    fn perfect_and_degenerate() {
        assert_eq!(roc_auc(&[2.0, 1.0], &[true, false]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[2.0, 1.0], &[true, true]).unwrap_err(), LeappError::DegenerateTruth);
    }

    #[test]
    fn nan_scores_rank_last() {
        let r = roc_auc(&[f64::NAN, 1.0], &[false, true]).unwrap();
        assert_eq!(r.auc, 1.0);
    }

    #[test]
    fn precision_ties_break_by_index() {
        let truth = [false, true, true, false];
        assert_eq!(precision_at(&[1.0, 1.0, 0.0, 0.0], &truth, 1).unwrap(), 0.0);
        assert_eq!(precision_at(&[1.0, 1.0, 0.0, 0.0], &truth, 2).unwrap(), 0.5);
        assert_eq!(precision_at(&[0.0, 5.0, 4.0, 0.0], &truth, 2).unwrap(), 1.0);
        assert!(precision_at(&[0.0; 4], &truth, 5).is_err());
    }

    #[test]
    fn cosine_cases() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        assert!((angle_cosine(&(-&u), &u).unwrap() - 1.0).abs() < 1e-15);
        let w = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]);
        assert_eq!(angle_cosine(&w, &u).unwrap(), 0.0);
        assert_eq!(angle_cosine(&DMatrix::zeros(3, 1), &u).unwrap_err(), LeappError::ZeroVector);
    }

    #[test]
    fn identical_and_disjoint_lists() {
        let p = vec![0.01, 0.2, 0.5, 0.9];
        let same = resemblance_curve(&[p.clone(), p.clone()], &[0.1, 0.6]).unwrap();
        assert_eq!((same[0].intersections, same[0].union), (1, 1));
        assert_eq!((same[1].intersections, same[1].union), (3, 3));

        let q = vec![0.9, 0.5, 0.2, 0.01];
        let apart = resemblance_curve(&[vec![0.01, 0.9, 0.9, 0.9], q], &[0.05]).unwrap();
        assert_eq!((apart[0].intersections, apart[0].union), (0, 2));
    }

    #[test]
    fn resemblance_errors() {
        assert!(matches!(
            resemblance_curve(&[vec![0.1], vec![0.1, 0.2]], &[0.5]),
            Err(LeappError::IndexMismatch(_))
        ));
        assert!(resemblance_curve(&[vec![0.1], vec![0.1]], &[0.5, 0.1]).is_err());
    }

    #[test]
    fn stopping_rule() {
        let p = vec![0.1, 0.2, 0.3];
        assert!(resemblance_until(&[p.clone(), p.clone()], 0).unwrap().is_empty());
        let pts = resemblance_until(&[p.clone(), p], 2).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].union, 2);
    }
}
