//! Scoring against known truth, loss-weight sweeps, and synthetic benchmarks.

mod synthetic;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use synthetic::{generate_synthetic, name_vocabulary, SyntheticConfig, SyntheticData};

use crate::error::{LinkError, Result};
use crate::estimator::{DrawCounts, LossParams, MatchProbabilities, TprPpvEstimate, ESTIMATORS};
use crate::model::Matching;
use crate::sampler::PosteriorSample;

/// True partner (1-based index into B, or 0) of each record of A.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLabels {
    pub partner: Vec<u32>,
    /// Records excluded from scoring.
    pub uncertain: Vec<bool>,
}

impl TruthLabels {
    pub fn new(partner: Vec<u32>) -> Self {
        let n = partner.len();
        TruthLabels {
            partner,
            uncertain: vec![false; n],
        }
    }

    pub fn validate(&self, n_b: usize) -> Result<()> {
        if self.uncertain.len() != self.partner.len() {
            return Err(LinkError::Config("uncertain flags do not cover every record".into()));
        }
        Matching::from_vec(self.partner.clone(), n_b).map(|_| ())
    }

    /// Scored records with a true partner.
    pub fn n_true(&self) -> usize {
        self.partner
            .iter()
            .zip(&self.uncertain)
            .filter(|(&j, &u)| j > 0 && !u)
            .count()
    }
}

/// Raw counts behind [`ActualMetrics`]; counts of disjoint blocks add up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActualCounts {
    pub correct: usize,
    pub true_matches: usize,
    pub proposed: usize,
}

impl ActualCounts {
    pub fn add(&mut self, other: &ActualCounts) {
        self.correct += other.correct;
        self.true_matches += other.true_matches;
        self.proposed += other.proposed;
    }

    pub fn metrics(&self) -> ActualMetrics {
        ActualMetrics {
            tpr: (self.true_matches > 0).then(|| self.correct as f64 / self.true_matches as f64),
            ppv: (self.proposed > 0).then(|| self.correct as f64 / self.proposed as f64),
            counts: *self,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActualMetrics {
    pub tpr: Option<f64>,
    pub ppv: Option<f64>,
    pub counts: ActualCounts,
}

pub fn actual_counts(zhat: &[u32], truth: &TruthLabels) -> Result<ActualCounts> {
    if zhat.len() != truth.partner.len() {
        return Err(LinkError::Matching(format!(
            "estimate has {} records, truth has {}",
            zhat.len(),
            truth.partner.len()
        )));
    }
    let mut c = ActualCounts::default();
    for ((&z, &t), &u) in zhat.iter().zip(&truth.partner).zip(&truth.uncertain) {
        if u {
            continue;
        }
        c.correct += usize::from(z > 0 && z == t);
        c.true_matches += usize::from(t > 0);
        c.proposed += usize::from(z > 0);
    }
    Ok(c)
}

/// TPR and PPV of `zhat` against `truth`, ignoring uncertain records.
pub fn actual_tpr_ppv(zhat: &[u32], truth: &TruthLabels) -> Result<ActualMetrics> {
    Ok(actual_counts(zhat, truth)?.metrics())
}

/// Loss weights with `fm2 = 2 fm1`, scaling the false-match penalties
/// against `fnm = 1`.
pub fn default_grid() -> Vec<LossParams> {
    [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 9.0, 15.0]
        .iter()
        .map(|&s| LossParams {
            fnm: 1.0,
            fm1: s,
            fm2: 2.0 * s,
        })
        .collect()
}

/// One block's posterior.
pub struct FrontierBlock<'a> {
    pub probs: &'a MatchProbabilities,
    pub sample: &'a PosteriorSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub loss: LossParams,
    pub n_matched: usize,
    pub est_tpr: Option<f64>,
    pub est_ppv: Option<f64>,
    pub actual: Option<ActualMetrics>,
}

/// Scores the per-block estimates of one grid point against truth.
pub type Scorer<'a> = dyn Fn(&[Matching]) -> Result<ActualMetrics> + Sync + 'a;

/// Scorer for blocks whose truth is known in block-local indices.
pub fn local_truth_scorer(truths: &[TruthLabels]) -> impl Fn(&[Matching]) -> Result<ActualMetrics> + Sync + '_ {
    move |estimates: &[Matching]| {
        let mut total = ActualCounts::default();
        for (z, t) in estimates.iter().zip(truths) {
            total.add(&actual_counts(z.as_slice(), t)?);
        }
        Ok(total.metrics())
    }
}

/// Point estimates and metrics across `grid`, pooled over blocks; actual
/// metrics come from `scorer` when given.
pub fn frontier_sweep(
    blocks: &[FrontierBlock<'_>],
    grid: &[LossParams],
    scorer: Option<&Scorer<'_>>,
) -> Result<Vec<FrontierRow>> {
    let estimator = ESTIMATORS.get("auto")?();
    grid.par_iter()
        .map(|loss| {
            let mut draws: Option<DrawCounts> = None;
            let mut estimates = Vec::with_capacity(blocks.len());
            for b in blocks {
                let zhat = estimator.estimate(b.probs, loss)?;
                let tally = DrawCounts::tally(zhat.as_slice(), b.sample)?;
                match draws.as_mut() {
                    Some(d) => d.merge(&tally)?,
                    None => draws = Some(tally),
                }
                estimates.push(zhat);
            }
            let est = draws.map(|d| d.estimate()).unwrap_or(TprPpvEstimate {
                tpr: None,
                ppv: None,
                tpr_skipped: 0,
                draws: 0,
            });
            Ok(FrontierRow {
                loss: *loss,
                n_matched: estimates.iter().map(Matching::n_matched).sum(),
                est_tpr: est.tpr,
                est_ppv: est.ppv,
                actual: scorer.map(|f| f(&estimates)).transpose()?,
            })
        })
        .collect()
}
