//! Step-3 kernels: redraw one coordinate of Z from its full conditional.
//!
//! Both kernels reduce the conditional to the same categorical draw over
//! "no match" and the comparison patterns of record `i`, weighted by the
//! number of *free* B records showing each pattern; a second draw then picks
//! one of those free records uniformly by rank. They differ only in how the
//! free counts and the rank lookup are obtained:
//!
//! * `dense` scans all of B;
//! * `sparse` starts from the pattern tabulation and subtracts the records
//!   currently held by other members of A, which costs O(n_A) instead of
//!   O(n_B) and pays off when A is much smaller than B.
//!
//! Because the arithmetic of the draw is shared, the two produce identical
//! chains from identical seeds.

use std::sync::LazyLock;

use rand::Rng;

use super::SamplerConfig;
use crate::comparison::ComparisonData;
use crate::error::{LinkError, Result};
use crate::model::{DisagreementParams, LinkageModel, Matching};
use crate::registry::Registry;
use crate::rng::ChainRng;

/// Weights of record `i`'s conditional, apart from the free counts.
pub struct RecordWeights<'a> {
    /// `ln(p / (1 - p))` for the record's p-slot.
    pub log_odds: f64,
    /// `Σ_f ln(m / u)` for each entry of `record_counts(i)`.
    pub log_ratio: &'a [f64],
}

pub trait MatchKernel: Send {
    fn name(&self) -> &'static str;

    /// Redraws `Z_i` given all other coordinates.
    fn update_record(
        &mut self,
        i: usize,
        z: &mut Matching,
        weights: &RecordWeights<'_>,
        rng: &mut ChainRng,
    ) -> Result<()>;
}

pub type KernelFactory = for<'a> fn(&'a ComparisonData, &SamplerConfig) -> Box<dyn MatchKernel + 'a>;

pub static KERNELS: LazyLock<Registry<KernelFactory>> = LazyLock::new(|| {
    let mut reg: Registry<KernelFactory> = Registry::new("matching kernel");
    reg.register("dense", |d, _| Box::new(DenseKernel::new(d)))
        .register("sparse", |d, _| Box::new(SparseKernel::new(d)))
        .register("auto", |d, c| {
            if use_sparse(d.n_a(), d.n_b(), c.sparse_threshold_ratio) {
                Box::new(SparseKernel::new(d))
            } else {
                Box::new(DenseKernel::new(d))
            }
        });
    reg
});

/// The fast path is engaged when `n_A < n_B / ratio`.
pub fn use_sparse(n_a: usize, n_b: usize, ratio: f64) -> bool {
    (n_a as f64) < n_b as f64 / ratio
}

/// Categorical draw over [no match, pattern 0, pattern 1, ...] in log space
/// with max subtraction. Returns the chosen pattern slot, or `None` for no match.
fn draw_slot(
    n_b: usize,
    n_other: usize,
    free: &[u32],
    weights: &RecordWeights<'_>,
    scratch: &mut Vec<f64>,
    rng: &mut ChainRng,
) -> Result<Option<usize>> {
    scratch.clear();
    scratch.push(((n_b - n_other) as f64).ln());
    for (&c, &lr) in free.iter().zip(weights.log_ratio) {
        scratch.push(if c == 0 {
            f64::NEG_INFINITY
        } else {
            (c as f64).ln() + weights.log_odds + lr
        });
    }
    let max = scratch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(LinkError::Sampler("all Step-3 weights vanish".into()));
    }
    let mut total = 0.0;
    for w in scratch.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (slot, &w) in scratch.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = slot;
            if target < acc {
                break;
            }
        }
    }
    Ok(last.checked_sub(1))
}

/// Scans all of B for free counts and for the chosen record.
pub struct DenseKernel<'a> {
    data: &'a ComparisonData,
    local: Vec<u32>,
    free: Vec<u32>,
    scratch: Vec<f64>,
}

impl<'a> DenseKernel<'a> {
    pub fn new(data: &'a ComparisonData) -> Self {
        DenseKernel {
            data,
            local: vec![u32::MAX; data.n_patterns()],
            free: Vec::new(),
            scratch: Vec::new(),
        }
    }
}

impl MatchKernel for DenseKernel<'_> {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn update_record(
        &mut self,
        i: usize,
        z: &mut Matching,
        weights: &RecordWeights<'_>,
        rng: &mut ChainRng,
    ) -> Result<()> {
        z.clear(i);
        let counts = self.data.record_counts(i);
        for (slot, &(k, _)) in counts.iter().enumerate() {
            self.local[k as usize] = slot as u32;
        }
        self.free.clear();
        self.free.resize(counts.len(), 0);
        let row = self.data.row(i);
        for (j, &k) in row.iter().enumerate() {
            if z.is_free(j) {
                self.free[self.local[k as usize] as usize] += 1;
            }
        }
        let n_other = z.n_matched();
        let Some(slot) = draw_slot(self.data.n_b(), n_other, &self.free, weights, &mut self.scratch, rng)?
        else {
            return Ok(());
        };
        let rank = rng.random_range(0..self.free[slot]);
        let target = counts[slot].0;
        let mut seen = 0;
        for (j, &k) in row.iter().enumerate() {
            if k == target && z.is_free(j) {
                if seen == rank {
                    z.set(i, j as u32 + 1);
                    return Ok(());
                }
                seen += 1;
            }
        }
        Err(LinkError::Sampler("free-count bookkeeping out of sync".into()))
    }
}

/// Works from the pattern tabulation and the records held by other members
/// of A; keeps, per record of A, its B partners grouped by pattern.
pub struct SparseKernel<'a> {
    data: &'a ComparisonData,
    /// Per record: start of each pattern slot in `members`.
    starts: Vec<Vec<usize>>,
    /// Per record: B indices grouped by pattern slot, ascending within a slot.
    members: Vec<Vec<u32>>,
    local: Vec<u32>,
    free: Vec<u32>,
    held: Vec<(u32, usize)>,
    positions: Vec<usize>,
    scratch: Vec<f64>,
}

impl<'a> SparseKernel<'a> {
    pub fn new(data: &'a ComparisonData) -> Self {
        let mut local = vec![u32::MAX; data.n_patterns()];
        let mut starts = Vec::with_capacity(data.n_a());
        let mut members = Vec::with_capacity(data.n_a());
        for i in 0..data.n_a() {
            let counts = data.record_counts(i);
            let mut st = Vec::with_capacity(counts.len() + 1);
            let mut acc = 0;
            for (slot, &(k, c)) in counts.iter().enumerate() {
                local[k as usize] = slot as u32;
                st.push(acc);
                acc += c as usize;
            }
            st.push(acc);
            let mut fill = st.clone();
            let mut m = vec![0u32; data.n_b()];
            for (j, &k) in data.row(i).iter().enumerate() {
                let slot = local[k as usize] as usize;
                m[fill[slot]] = j as u32;
                fill[slot] += 1;
            }
            starts.push(st);
            members.push(m);
        }
        SparseKernel {
            data,
            starts,
            members,
            local: vec![u32::MAX; data.n_patterns()],
            free: Vec::new(),
            held: Vec::new(),
            positions: Vec::new(),
            scratch: Vec::new(),
        }
    }
}

impl MatchKernel for SparseKernel<'_> {
    fn name(&self) -> &'static str {
        "sparse"
    }

    fn update_record(
        &mut self,
        i: usize,
        z: &mut Matching,
        weights: &RecordWeights<'_>,
        rng: &mut ChainRng,
    ) -> Result<()> {
        z.clear(i);
        let counts = self.data.record_counts(i);
        self.free.clear();
        for (slot, &(k, c)) in counts.iter().enumerate() {
            self.local[k as usize] = slot as u32;
            self.free.push(c);
        }
        self.held.clear();
        for &j in z.as_slice() {
            if j > 0 {
                let j = j - 1;
                let slot = self.local[self.data.pattern_of(i, j as usize) as usize] as usize;
                self.free[slot] -= 1;
                self.held.push((j, slot));
            }
        }
        let n_other = z.n_matched();
        let Some(slot) = draw_slot(self.data.n_b(), n_other, &self.free, weights, &mut self.scratch, rng)?
        else {
            return Ok(());
        };
        let rank = rng.random_range(0..self.free[slot]) as usize;
        let group = &self.members[i][self.starts[i][slot]..self.starts[i][slot + 1]];
        self.positions.clear();
        for &(j, s) in &self.held {
            if s == slot {
                let pos = group
                    .binary_search(&j)
                    .map_err(|_| LinkError::Sampler("held record missing from its pattern group".into()))?;
                self.positions.push(pos);
            }
        }
        self.positions.sort_unstable();
        // the rank-th free member: step over held members at or before it
        let mut idx = rank;
        for &q in &self.positions {
            if q <= idx {
                idx += 1;
            }
        }
        z.set(i, group[idx] + 1);
        Ok(())
    }
}

/// Per-record totals `Σ_j exp(Σ_f ln(m/u))` over all of B, computed from the
/// pattern tabulation.
#[derive(Clone, Debug)]
pub struct LikelihoodSums {
    /// Per record: weight of each entry of `record_counts(i)`.
    pub pattern_weights: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
}

impl LikelihoodSums {
    /// Total for record `i` once the B records in `occupied` are excluded.
    pub fn adjusted(&self, data: &ComparisonData, i: usize, occupied: &[usize]) -> f64 {
        let counts = data.record_counts(i);
        let removed: f64 = occupied
            .iter()
            .map(|&j| {
                let k = data.pattern_of(i, j);
                let slot = counts.binary_search_by_key(&k, |c| c.0).expect("pattern of record");
                self.pattern_weights[i][slot]
            })
            .sum();
        self.totals[i] - removed
    }
}

pub fn precompute_likelihood_sums(
    phi: &DisagreementParams,
    data: &ComparisonData,
    model: &LinkageModel,
) -> LikelihoodSums {
    let log_m: Vec<Vec<f64>> = phi.m.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
    let log_u: Vec<Vec<f64>> = phi.u.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
    let mut pattern_weights = Vec::with_capacity(data.n_a());
    let mut totals = Vec::with_capacity(data.n_a());
    let mut lr = Vec::new();
    for i in 0..data.n_a() {
        let g = model.partition.group_of(i);
        record_log_ratios(data, i, &log_m[model.layout.m_index(g)], &log_u[g], &mut lr);
        let w: Vec<f64> = lr.iter().map(|x| x.exp()).collect();
        totals.push(
            w.iter()
                .zip(data.record_counts(i))
                .map(|(w, &(_, c))| w * c as f64)
                .sum(),
        );
        pattern_weights.push(w);
    }
    LikelihoodSums {
        pattern_weights,
        totals,
    }
}

/// `Σ_f (ln m − ln u)` for each pattern of record `i`.
pub(crate) fn record_log_ratios(
    data: &ComparisonData,
    i: usize,
    log_m: &[f64],
    log_u: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    for &(k, _) in data.record_counts(i) {
        let mut s = 0.0;
        for (f, &level) in data.pattern(k as usize).iter().enumerate() {
            let idx = data.flat_index(f, level);
            s += log_m[idx] - log_u[idx];
        }
        out.push(s);
    }
}
