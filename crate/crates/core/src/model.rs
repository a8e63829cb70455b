//! The matching labeling, disagreement parameters, priors, sufficient
//! statistics and the (unnormalized) posterior.

use libm::lgamma;
use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonData;
use crate::error::{LinkError, Result};

/// Sentinel for a free record of B in the owner index.
const FREE: u32 = u32::MAX;

/// `Z`: for each record of A, its partner in B (1-based) or 0.
///
/// An owner index (B record → A record) is kept alongside so that the
/// bipartite constraint can be enforced in O(1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    z: Vec<u32>,
    owner: Vec<u32>,
    n_matched: usize,
}

impl Matching {
    pub fn empty(n_a: usize, n_b: usize) -> Self {
        Matching {
            z: vec![0; n_a],
            owner: vec![FREE; n_b],
            n_matched: 0,
        }
    }

    /// Builds a labeling from raw values, rejecting out-of-range or repeated partners.
    pub fn from_vec(z: Vec<u32>, n_b: usize) -> Result<Self> {
        let mut owner = vec![FREE; n_b];
        let mut n_matched = 0;
        for (i, &j) in z.iter().enumerate() {
            if j == 0 {
                continue;
            }
            let slot = owner.get_mut(j as usize - 1).ok_or_else(|| {
                LinkError::Matching(format!("record {i} points at {j}, beyond n_B = {n_b}"))
            })?;
            if *slot != FREE {
                return Err(LinkError::Matching(format!(
                    "records {} and {i} both matched to {j}",
                    *slot
                )));
            }
            *slot = i as u32;
            n_matched += 1;
        }
        Ok(Matching {
            z,
            owner,
            n_matched,
        })
    }

    pub fn n_a(&self) -> usize {
        self.z.len()
    }

    pub fn n_b(&self) -> usize {
        self.owner.len()
    }

    /// `n(Z)`.
    pub fn n_matched(&self) -> usize {
        self.n_matched
    }

    pub fn get(&self, i: usize) -> u32 {
        self.z[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.z
    }

    /// The A record holding B record `j` (0-based), if any.
    pub fn owner(&self, j: usize) -> Option<usize> {
        match self.owner[j] {
            FREE => None,
            i => Some(i as usize),
        }
    }

    pub fn is_free(&self, j: usize) -> bool {
        self.owner[j] == FREE
    }

    /// Sets `Z_i = j`. Panics if `j > 0` is held by another record.
    pub fn set(&mut self, i: usize, j: u32) {
        self.clear(i);
        if j > 0 {
            let slot = &mut self.owner[j as usize - 1];
            assert!(*slot == FREE, "record {j} of B is already matched");
            *slot = i as u32;
            self.z[i] = j;
            self.n_matched += 1;
        }
    }

    /// Sets `Z_i = 0`.
    pub fn clear(&mut self, i: usize) {
        let j = self.z[i];
        if j > 0 {
            self.owner[j as usize - 1] = FREE;
            self.z[i] = 0;
            self.n_matched -= 1;
        }
    }

    /// Full consistency check of the labeling and its owner index.
    pub fn check(&self) -> Result<()> {
        let rebuilt = Matching::from_vec(self.z.clone(), self.owner.len())?;
        if rebuilt != *self {
            return Err(LinkError::Matching("owner index out of sync".into()));
        }
        Ok(())
    }
}

/// Assignment of the records of A to subgroups `g ∈ 0..G`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupPartition {
    group_of: Vec<u32>,
    sizes: Vec<usize>,
}

impl SubgroupPartition {
    /// One group: the classic pooled model.
    pub fn single(n_a: usize) -> Self {
        SubgroupPartition {
            group_of: vec![0; n_a],
            sizes: vec![n_a],
        }
    }

    /// Every record is its own group.
    pub fn record_specific(n_a: usize) -> Self {
        SubgroupPartition {
            group_of: (0..n_a as u32).collect(),
            sizes: vec![1; n_a],
        }
    }

    /// Groups given by labels `0..G`; every label must be used.
    pub fn from_labels(labels: Vec<u32>) -> Result<Self> {
        let g = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut sizes = vec![0; g];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        if sizes.contains(&0) {
            return Err(LinkError::Config("subgroup labels must cover 0..G".into()));
        }
        Ok(SubgroupPartition {
            group_of: labels,
            sizes,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_records(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i] as usize
    }

    /// `n_{A,g}`.
    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn is_record_specific(&self) -> bool {
        self.n_groups() == self.n_records() && self.n_records() > 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha_p: f64,
    pub beta_p: f64,
    /// Dirichlet parameters per field and level; empty means all ones.
    #[serde(default)]
    pub dirichlet_alpha: Vec<Vec<f64>>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            alpha_p: 1.0,
            beta_p: 1.0,
            dirichlet_alpha: Vec::new(),
        }
    }
}

impl PriorConfig {
    pub fn validate(&self, levels_per_field: &[usize]) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.alpha_p) || !positive(self.beta_p) {
            return Err(LinkError::Config("alpha_p and beta_p must be positive".into()));
        }
        if self.dirichlet_alpha.is_empty() {
            return Ok(());
        }
        if self.dirichlet_alpha.len() != levels_per_field.len() {
            return Err(LinkError::Config(format!(
                "dirichlet_alpha has {} fields, schema has {}",
                self.dirichlet_alpha.len(),
                levels_per_field.len()
            )));
        }
        for (f, (a, &l)) in self.dirichlet_alpha.iter().zip(levels_per_field).enumerate() {
            if a.len() != l || !a.iter().all(|&x| positive(x)) {
                return Err(LinkError::Config(format!(
                    "dirichlet_alpha for field {f} needs {l} positive entries"
                )));
            }
        }
        Ok(())
    }

    /// Flattened Dirichlet parameters over all (field, level) slots.
    pub fn flat_alpha(&self, levels_per_field: &[usize]) -> Vec<f64> {
        if self.dirichlet_alpha.is_empty() {
            vec![1.0; levels_per_field.iter().sum()]
        } else {
            self.dirichlet_alpha.iter().flatten().copied().collect()
        }
    }
}

/// Thresholds deciding which parameters are shared across subgroups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutRules {
    /// Per-group m only if every group's prior expected match count exceeds this.
    pub m_min_expected_matches: f64,
    /// Per-group p only if every group has at least this many records.
    pub p_min_group_size: usize,
}

impl Default for LayoutRules {
    fn default() -> Self {
        LayoutRules {
            m_min_expected_matches: 50.0,
            p_min_group_size: 50,
        }
    }
}

/// Which subgroup owns which m and p parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterLayout {
    pub m_per_group: bool,
    pub p_per_group: bool,
}

impl ParameterLayout {
    pub fn resolve(partition: &SubgroupPartition, prior: &PriorConfig, rules: &LayoutRules) -> Self {
        let g = partition.n_groups();
        if g <= 1 || partition.is_record_specific() {
            return ParameterLayout {
                m_per_group: false,
                p_per_group: false,
            };
        }
        let prior_rate = prior.alpha_p / (prior.alpha_p + prior.beta_p);
        let sizes = (0..g).map(|k| partition.size(k));
        let m_per_group = sizes
            .clone()
            .all(|n| n as f64 * prior_rate > rules.m_min_expected_matches);
        let p_per_group = sizes.min().unwrap_or(0) >= rules.p_min_group_size;
        ParameterLayout {
            m_per_group,
            p_per_group,
        }
    }

    pub fn pooled() -> Self {
        ParameterLayout {
            m_per_group: false,
            p_per_group: false,
        }
    }

    pub fn n_m(&self, partition: &SubgroupPartition) -> usize {
        if self.m_per_group {
            partition.n_groups()
        } else {
            1
        }
    }

    pub fn n_p(&self, partition: &SubgroupPartition) -> usize {
        if self.p_per_group {
            partition.n_groups()
        } else {
            1
        }
    }

    pub fn m_index(&self, g: usize) -> usize {
        if self.m_per_group {
            g
        } else {
            0
        }
    }

    pub fn p_index(&self, g: usize) -> usize {
        if self.p_per_group {
            g
        } else {
            0
        }
    }
}

/// Φ: m simplexes (per m-slot) and u simplexes (per subgroup), each stored
/// as a flattened (field, level) row.
#[derive(Clone, Debug, PartialEq)]
pub struct DisagreementParams {
    pub levels_per_field: Vec<usize>,
    pub m: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl DisagreementParams {
    /// Every simplex uniform over its levels.
    pub fn uniform(levels_per_field: &[usize], n_m: usize, n_u: usize) -> Self {
        let row: Vec<f64> = levels_per_field
            .iter()
            .flat_map(|&l| std::iter::repeat_n(1.0 / l as f64, l))
            .collect();
        DisagreementParams {
            levels_per_field: levels_per_field.to_vec(),
            m: vec![row.clone(); n_m],
            u: vec![row; n_u],
        }
    }

    /// Checks nonnegativity and unit sums within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        for row in self.m.iter().chain(&self.u) {
            let mut off = 0;
            for &l in &self.levels_per_field {
                let s = &row[off..off + l];
                let total: f64 = s.iter().sum();
                if s.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > tol {
                    return Err(LinkError::Sampler(format!("invalid simplex {s:?}")));
                }
                off += l;
            }
        }
        Ok(())
    }
}

/// Counts of matched and unmatched pairs at each (field, level).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SufficientStats {
    /// Per m-slot, flattened over (field, level).
    pub n_m: Vec<Vec<u64>>,
    /// Per subgroup, flattened over (field, level).
    pub n_u: Vec<Vec<u64>>,
    pub n_matched: usize,
    /// Matched records per p-slot.
    pub n_matched_p: Vec<usize>,
}

/// Tabulates matched/unmatched counts from the per-record pattern
/// tabulations; pairs are never enumerated.
pub fn sufficient_stats(
    z: &Matching,
    data: &ComparisonData,
    partition: &SubgroupPartition,
    layout: &ParameterLayout,
) -> SufficientStats {
    let t = data.total_levels();
    let mut n_m = vec![vec![0u64; t]; layout.n_m(partition)];
    let mut n_u = vec![vec![0u64; t]; partition.n_groups()];
    let mut n_matched_p = vec![0usize; layout.n_p(partition)];
    for i in 0..data.n_a() {
        let g = partition.group_of(i);
        for (acc, &c) in n_u[g].iter_mut().zip(data.record_level_counts(i)) {
            *acc += u64::from(c);
        }
        let j = z.get(i);
        if j > 0 {
            let mi = layout.m_index(g);
            for (f, &level) in data.gamma(i, j as usize - 1).iter().enumerate() {
                let idx = data.flat_index(f, level);
                n_m[mi][idx] += 1;
                n_u[g][idx] -= 1;
            }
            n_matched_p[layout.p_index(g)] += 1;
        }
    }
    SufficientStats {
        n_m,
        n_u,
        n_matched: z.n_matched(),
        n_matched_p,
    }
}

/// `Σ count · ln(prob)`, with `0 · ln 0 = 0` and `c · ln 0 = -∞` for `c > 0`.
fn count_log_sum(counts: &[u64], probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| if c == 0 { 0.0 } else { c as f64 * p.ln() })
        .sum()
}

pub fn log_likelihood(
    z: &Matching,
    phi: &DisagreementParams,
    data: &ComparisonData,
    partition: &SubgroupPartition,
    layout: &ParameterLayout,
) -> f64 {
    let stats = sufficient_stats(z, data, partition, layout);
    let matched: f64 = stats
        .n_m
        .iter()
        .zip(&phi.m)
        .map(|(c, p)| count_log_sum(c, p))
        .sum();
    let unmatched: f64 = stats
        .n_u
        .iter()
        .zip(&phi.u)
        .map(|(c, p)| count_log_sum(c, p))
        .sum();
    matched + unmatched
}

/// `ln B(α)`, the log multivariate Beta function.
pub fn ln_multivariate_beta(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| lgamma(a)).sum::<f64>() - lgamma(alpha.iter().sum())
}

fn ln_dirichlet_density(theta: &[f64], alpha: &[f64], levels_per_field: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut off = 0;
    for &l in levels_per_field {
        let a = &alpha[off..off + l];
        total -= ln_multivariate_beta(a);
        for (&t, &ak) in theta[off..off + l].iter().zip(a) {
            if ak != 1.0 {
                total += (ak - 1.0) * t.ln();
            }
        }
        off += l;
    }
    total
}

/// Log prior of (Z, p): `ln((n_B - n)!/n_B!)` plus the Beta terms per p-slot.
pub fn log_prior_z_p(
    z: &Matching,
    p: &[f64],
    prior: &PriorConfig,
    partition: &SubgroupPartition,
    layout: &ParameterLayout,
) -> f64 {
    let n_b = z.n_b() as f64;
    let n = z.n_matched() as f64;
    let mut total = lgamma(n_b - n + 1.0) - lgamma(n_b + 1.0);
    let mut slot_sizes = vec![0usize; layout.n_p(partition)];
    let mut slot_matched = vec![0usize; slot_sizes.len()];
    for i in 0..z.n_a() {
        let s = layout.p_index(partition.group_of(i));
        slot_sizes[s] += 1;
        if z.get(i) > 0 {
            slot_matched[s] += 1;
        }
    }
    let ln_beta = lgamma(prior.alpha_p) + lgamma(prior.beta_p) - lgamma(prior.alpha_p + prior.beta_p);
    for ((&ps, &na), &ng) in p.iter().zip(&slot_sizes).zip(&slot_matched) {
        total += (ng as f64 + prior.alpha_p - 1.0) * ps.ln()
            + ((na - ng) as f64 + prior.beta_p - 1.0) * (1.0 - ps).ln()
            - ln_beta;
    }
    total
}

/// Log joint density of (Z, Φ, p, γ) up to a constant.
#[allow(clippy::too_many_arguments)]
pub fn log_posterior_unnormalized(
    z: &Matching,
    phi: &DisagreementParams,
    p: &[f64],
    data: &ComparisonData,
    prior: &PriorConfig,
    partition: &SubgroupPartition,
    layout: &ParameterLayout,
) -> f64 {
    let alpha = prior.flat_alpha(data.levels_per_field());
    let lpf = data.levels_per_field();
    let dirichlet: f64 = phi
        .m
        .iter()
        .chain(&phi.u)
        .map(|theta| ln_dirichlet_density(theta, &alpha, lpf))
        .sum();
    log_prior_z_p(z, p, prior, partition, layout)
        + dirichlet
        + log_likelihood(z, phi, data, partition, layout)
}

/// The model specification shared by every chain of a block.
#[derive(Clone, Debug)]
pub struct LinkageModel {
    pub partition: SubgroupPartition,
    pub prior: PriorConfig,
    pub layout: ParameterLayout,
}

impl LinkageModel {
    pub fn new(partition: SubgroupPartition, prior: PriorConfig, rules: &LayoutRules) -> Self {
        let layout = ParameterLayout::resolve(&partition, &prior, rules);
        LinkageModel {
            partition,
            prior,
            layout,
        }
    }

    /// The pooled single-group model.
    pub fn pooled(n_a: usize, prior: PriorConfig) -> Self {
        LinkageModel {
            partition: SubgroupPartition::single(n_a),
            prior,
            layout: ParameterLayout::pooled(),
        }
    }

    /// One u simplex per record, pooled m and p.
    pub fn record_specific(n_a: usize, prior: PriorConfig) -> Self {
        LinkageModel {
            partition: SubgroupPartition::record_specific(n_a),
            prior,
            layout: ParameterLayout::pooled(),
        }
    }

    pub fn n_m(&self) -> usize {
        self.layout.n_m(&self.partition)
    }

    pub fn n_p(&self) -> usize {
        self.layout.n_p(&self.partition)
    }

    pub fn n_groups(&self) -> usize {
        self.partition.n_groups()
    }

    pub fn validate(&self, data: &ComparisonData) -> Result<()> {
        self.prior.validate(data.levels_per_field())?;
        if self.partition.n_records() != data.n_a() {
            return Err(LinkError::Config(format!(
                "partition covers {} records, block has {}",
                self.partition.n_records(),
                data.n_a()
            )));
        }
        Ok(())
    }
}
