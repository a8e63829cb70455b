//! Point estimates of the matching and posterior TPR/PPV estimates.
//!
//! The loss charges `fnm` for a missed match, `fm1` for matching a record
//! that has no true partner, and `fm2` for matching a record to the wrong
//! partner. When the loss weights satisfy the threshold conditions, the
//! record-wise rule is optimal; otherwise the estimate comes from an
//! assignment problem over the per-record expected losses.

mod hungarian;

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

pub use hungarian::solve as solve_assignment;

use crate::error::{LinkError, Result};
use crate::model::Matching;
use crate::registry::Registry;
use crate::sampler::PosteriorSample;

/// Loss weights (λ_fnm, λ_fm1, λ_fm2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub fnm: f64,
    pub fm1: f64,
    pub fm2: f64,
}

impl LossParams {
    pub fn new(fnm: f64, fm1: f64, fm2: f64) -> Result<Self> {
        let l = LossParams { fnm, fm1, fm2 };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.fnm, self.fm1, self.fm2].iter().all(|&x| x.is_finite() && x > 0.0) {
            Ok(())
        } else {
            Err(LinkError::Config(format!(
                "loss weights must be positive, got ({}, {}, {})",
                self.fnm, self.fm1, self.fm2
            )))
        }
    }
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            fnm: 1.0,
            fm1: 1.0,
            fm2: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LambdaConditions {
    /// `0 < fnm <= fm1` and `fm2 >= (3 fnm + fm1) / 2`.
    pub weak_ok: bool,
    /// `fm1 >= fnm > 0` and `fm2 >= fnm + fm1`.
    pub sadinle_ok: bool,
}

pub fn check_lambda_conditions(l: &LossParams) -> LambdaConditions {
    LambdaConditions {
        weak_ok: 0.0 < l.fnm && l.fnm <= l.fm1 && l.fm2 >= (3.0 * l.fnm + l.fm1) / 2.0,
        sadinle_ok: l.fm1 >= l.fnm && l.fnm > 0.0 && l.fm2 >= l.fnm + l.fm1,
    }
}

/// Empirical posterior of each `Z_i`: draw counts of 0 and of every observed partner.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchProbabilities {
    n_b: usize,
    n_draws: u64,
    zero: Vec<u64>,
    candidates: Vec<Vec<(u32, u64)>>,
}

impl MatchProbabilities {
    pub fn n_a(&self) -> usize {
        self.zero.len()
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn n_draws(&self) -> u64 {
        self.n_draws
    }

    /// `P(Z_i = 0)`.
    pub fn p_zero(&self, i: usize) -> f64 {
        self.zero[i] as f64 / self.n_draws as f64
    }

    /// `P(Z_i = j)` for `j >= 1`.
    pub fn prob(&self, i: usize, j: u32) -> f64 {
        if j == 0 {
            return self.p_zero(i);
        }
        self.candidates[i]
            .binary_search_by_key(&j, |c| c.0)
            .map_or(0.0, |k| self.candidates[i][k].1 as f64 / self.n_draws as f64)
    }

    /// Observed partners of record `i` with their draw counts, ascending by j.
    pub fn candidates(&self, i: usize) -> &[(u32, u64)] {
        &self.candidates[i]
    }

    pub fn zero_count(&self, i: usize) -> u64 {
        self.zero[i]
    }

    /// Most frequent partner (smallest j among ties) and its count.
    pub fn best_candidate(&self, i: usize) -> Option<(u32, u64)> {
        self.candidates[i]
            .iter()
            .copied()
            .fold(None, |best, c| match best {
                Some((_, n)) if n >= c.1 => best,
                _ => Some(c),
            })
    }
}

/// `P(Z_i = j | γ)` as draw frequencies.
pub fn posterior_match_probs(sample: &PosteriorSample) -> Result<MatchProbabilities> {
    let t = sample.n_draws();
    if t == 0 {
        return Err(LinkError::Config("posterior sample has no draws".into()));
    }
    let mut zero = vec![0u64; sample.n_a];
    let mut maps: Vec<std::collections::BTreeMap<u32, u64>> = vec![Default::default(); sample.n_a];
    for draw in sample.draws() {
        for (i, &j) in draw.iter().enumerate() {
            if j == 0 {
                zero[i] += 1;
            } else {
                *maps[i].entry(j).or_insert(0) += 1;
            }
        }
    }
    Ok(MatchProbabilities {
        n_b: sample.n_b,
        n_draws: t as u64,
        zero,
        candidates: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
    })
}

/// `E[L(Z_i, ẑ)]` for one record.
pub fn record_expected_loss(probs: &MatchProbabilities, i: usize, zhat: u32, l: &LossParams) -> f64 {
    let p0 = probs.p_zero(i);
    if zhat == 0 {
        l.fnm * (1.0 - p0)
    } else {
        let pj = probs.prob(i, zhat);
        l.fm1 * p0 + l.fm2 * (1.0 - p0 - pj)
    }
}

/// Posterior expected loss of a whole estimate.
pub fn expected_loss(probs: &MatchProbabilities, zhat: &[u32], l: &LossParams) -> f64 {
    zhat.iter()
        .enumerate()
        .map(|(i, &j)| record_expected_loss(probs, i, j, l))
        .sum()
}

/// Record-wise threshold rule; refuses loss weights outside the weak conditions.
///
/// A record takes its most probable partner j when
/// `P(j) > fm1/(fm1+fnm) + P(∉{0,j}) (fm2−fm1−fnm)/(fm1+fnm)`; equality
/// means no match.
pub fn bayes_estimate(probs: &MatchProbabilities, l: &LossParams) -> Result<Matching> {
    l.validate()?;
    if !check_lambda_conditions(l).weak_ok {
        return Err(LinkError::ConditionsNotMet(*l));
    }
    let t = probs.n_draws as f64;
    let z = (0..probs.n_a())
        .map(|i| match probs.best_candidate(i) {
            Some((j, c)) => {
                let other = t - probs.zero[i] as f64 - c as f64;
                // the rule multiplied through by T (fm1 + fnm)
                let lhs = c as f64 * (l.fm1 + l.fnm);
                let rhs = t * l.fm1 + other * (l.fm2 - l.fm1 - l.fnm);
                if lhs > rhs {
                    j
                } else {
                    0
                }
            }
            None => 0,
        })
        .collect();
    Matching::from_vec(z, probs.n_b)
}

/// Exact minimizer of the posterior expected loss over bipartite estimates,
/// for any positive loss weights.
///
/// Columns are the observed partners, up to `n_A` interchangeable
/// never-observed partners, and one private "no match" column per record.
pub fn bayes_estimate_lsap(probs: &MatchProbabilities, l: &LossParams) -> Result<Matching> {
    l.validate()?;
    let n_a = probs.n_a();
    let mut observed: Vec<u32> = probs
        .candidates
        .iter()
        .flat_map(|c| c.iter().map(|x| x.0))
        .collect();
    observed.sort_unstable();
    observed.dedup();
    let n_unobserved = (probs.n_b - observed.len()).min(n_a);
    let mut spare = Vec::with_capacity(n_unobserved);
    let mut next = observed.iter().peekable();
    for j in 1..=probs.n_b as u32 {
        if spare.len() == n_unobserved {
            break;
        }
        if next.peek() == Some(&&j) {
            next.next();
        } else {
            spare.push(j);
        }
    }
    let partners: Vec<u32> = observed.iter().chain(&spare).copied().collect();
    let cols = partners.len() + n_a;

    let row_costs: Vec<Vec<f64>> = (0..n_a)
        .map(|i| {
            let p0 = probs.p_zero(i);
            partners
                .iter()
                .map(|&j| l.fm1 * p0 + l.fm2 * (1.0 - p0 - probs.prob(i, j)))
                .collect()
        })
        .collect();
    let max_cost = row_costs
        .iter()
        .flatten()
        .copied()
        .chain((0..n_a).map(|i| l.fnm * (1.0 - probs.p_zero(i))))
        .fold(0.0, f64::max);
    // any assignment using a forbidden cell costs more than all-unmatched
    let forbidden = (max_cost + 1.0) * (n_a as f64 + 1.0) * 4.0;
    let mut cost = vec![forbidden; n_a * cols];
    for (i, row) in row_costs.iter().enumerate() {
        cost[i * cols..i * cols + partners.len()].copy_from_slice(row);
        cost[i * cols + partners.len() + i] = l.fnm * (1.0 - probs.p_zero(i));
    }
    let assignment = hungarian::solve(&cost, n_a, cols);
    let z = assignment
        .into_iter()
        .map(|c| if c < partners.len() { partners[c] } else { 0 })
        .collect();
    Matching::from_vec(z, probs.n_b)
}

/// A point-estimation strategy.
pub trait PointEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, probs: &MatchProbabilities, loss: &LossParams) -> Result<Matching>;
}

struct Threshold;
struct Assignment;
struct Auto;

impl PointEstimator for Threshold {
    fn name(&self) -> &'static str {
        "threshold"
    }
    fn estimate(&self, probs: &MatchProbabilities, loss: &LossParams) -> Result<Matching> {
        bayes_estimate(probs, loss)
    }
}

impl PointEstimator for Assignment {
    fn name(&self) -> &'static str {
        "lsap"
    }
    fn estimate(&self, probs: &MatchProbabilities, loss: &LossParams) -> Result<Matching> {
        bayes_estimate_lsap(probs, loss)
    }
}

impl PointEstimator for Auto {
    fn name(&self) -> &'static str {
        "auto"
    }
    fn estimate(&self, probs: &MatchProbabilities, loss: &LossParams) -> Result<Matching> {
        if check_lambda_conditions(loss).weak_ok {
            bayes_estimate(probs, loss)
        } else {
            bayes_estimate_lsap(probs, loss)
        }
    }
}

pub type EstimatorFactory = fn() -> Box<dyn PointEstimator>;

pub static ESTIMATORS: LazyLock<Registry<EstimatorFactory>> = LazyLock::new(|| {
    let mut reg: Registry<EstimatorFactory> = Registry::new("point estimator");
    reg.register("threshold", || Box::new(Threshold))
        .register("lsap", || Box::new(Assignment))
        .register("auto", || Box::new(Auto));
    reg
});

/// Per-draw tallies behind the TPR/PPV estimates. Tallies of independent
/// blocks add up draw by draw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DrawCounts {
    /// Per draw: records with `ẑ_i = Z_ti > 0`.
    pub correct: Vec<u64>,
    /// Per draw: `n(Z_t)`.
    pub sampled: Vec<u64>,
    /// `n(ẑ)`.
    pub proposed: u64,
}

impl DrawCounts {
    pub fn tally(zhat: &[u32], sample: &PosteriorSample) -> Result<Self> {
        if zhat.len() != sample.n_a {
            return Err(LinkError::Matching(format!(
                "estimate has {} records, sample has {}",
                zhat.len(),
                sample.n_a
            )));
        }
        let mut correct = Vec::with_capacity(sample.n_draws());
        let mut sampled = Vec::with_capacity(sample.n_draws());
        for draw in sample.draws() {
            correct.push(zhat.iter().zip(draw).filter(|(&a, &b)| a > 0 && a == b).count() as u64);
            sampled.push(draw.iter().filter(|&&j| j > 0).count() as u64);
        }
        Ok(DrawCounts {
            correct,
            sampled,
            proposed: zhat.iter().filter(|&&j| j > 0).count() as u64,
        })
    }

    /// Adds another block's tallies; both must have the same number of draws.
    pub fn merge(&mut self, other: &DrawCounts) -> Result<()> {
        if self.correct.len() != other.correct.len() {
            return Err(LinkError::Config("blocks retained different numbers of draws".into()));
        }
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.sampled.iter_mut().zip(&other.sampled) {
            *a += b;
        }
        self.proposed += other.proposed;
        Ok(())
    }

    pub fn estimate(&self) -> TprPpvEstimate {
        let mut tpr_sum = 0.0;
        let mut used = 0usize;
        for (&c, &s) in self.correct.iter().zip(&self.sampled) {
            if s > 0 {
                tpr_sum += c as f64 / s as f64;
                used += 1;
            }
        }
        let draws = self.correct.len();
        let ppv = (self.proposed > 0 && draws > 0).then(|| {
            self.correct.iter().map(|&c| c as f64).sum::<f64>() / (draws as f64 * self.proposed as f64)
        });
        TprPpvEstimate {
            tpr: (used > 0).then(|| tpr_sum / used as f64),
            ppv,
            tpr_skipped: draws - used,
            draws,
        }
    }
}

/// Posterior means of TPR and PPV of an estimate.
///
/// Draws with no matches leave TPR undefined; they are skipped and counted
/// in `tpr_skipped`. PPV is missing when the estimate proposes no match.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TprPpvEstimate {
    pub tpr: Option<f64>,
    pub ppv: Option<f64>,
    pub tpr_skipped: usize,
    pub draws: usize,
}

pub fn estimate_tpr_ppv(zhat: &[u32], sample: &PosteriorSample) -> Result<TprPpvEstimate> {
    Ok(DrawCounts::tally(zhat, sample)?.estimate())
}
