//! Three-step Gibbs sampler over (p, Φ, Z).
//!
//! Each iteration draws p from its Beta conditional, Φ from its Dirichlet
//! conditionals, then sweeps the records of A in a fresh random order,
//! redrawing each `Z_i` from its full conditional under the bipartite
//! constraint.

mod kernel;

use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kernel::{
    precompute_likelihood_sums, use_sparse, DenseKernel, KernelFactory, LikelihoodSums, MatchKernel,
    RecordWeights, SparseKernel, KERNELS,
};

use crate::blocking::MarginTable;
use crate::comparison::ComparisonData;
use crate::error::{LinkError, Result};
use crate::model::{sufficient_stats, DisagreementParams, LinkageModel, Matching, SufficientStats};
use crate::rng::{chain_streams, ChainRng};

/// Smallest probability allowed in a fixed u simplex.
const MARGIN_FLOOR: f64 = 1e-12;

/// How global margins enter the u parameters of the corrected fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum UCorrection {
    #[default]
    Off,
    /// u is set to the margins instead of being sampled.
    Fixed,
    /// The margins, scaled by `strength`, are added to the Dirichlet prior.
    Soft { strength: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    /// The sparse kernel is used by `auto` when `n_A < n_B / ratio`.
    pub sparse_threshold_ratio: f64,
    pub u_correction: UCorrection,
    pub record_specific: bool,
    /// Registered Step-3 kernel: `auto`, `dense` or `sparse`.
    pub kernel: String,
    /// Keep p and Φ draws alongside Z.
    pub store_params: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 1000,
            burn_in: 100,
            thin: 1,
            seed: 0,
            chains: 1,
            sparse_threshold_ratio: 200.0,
            u_correction: UCorrection::Off,
            record_specific: false,
            kernel: "auto".to_string(),
            store_params: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(LinkError::Config(m.to_string()));
        if self.iterations == 0 {
            return fail("iterations must be positive");
        }
        if self.burn_in >= self.iterations {
            return fail("burn_in must be below iterations");
        }
        if self.thin == 0 || self.chains == 0 {
            return fail("thin and chains must be positive");
        }
        if !(self.sparse_threshold_ratio > 0.0) {
            return fail("sparse_threshold_ratio must be positive");
        }
        if let UCorrection::Soft { strength } = self.u_correction {
            if !(strength > 0.0 && strength.is_finite()) {
                return fail("soft u-correction strength must be positive");
            }
        }
        KERNELS.get(&self.kernel)?;
        Ok(())
    }

    /// Retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Retained draws of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSample {
    pub n_a: usize,
    pub n_b: usize,
    /// Row-major `n_draws × n_a`.
    pub z: Vec<u32>,
    pub p: Option<Vec<Vec<f64>>>,
    pub phi: Option<Vec<DisagreementParams>>,
    pub seed: u64,
    /// Chain index; the draws use stream `2c`, the visit order stream `2c + 1`.
    pub chain: u32,
    pub kernel: &'static str,
}

impl PosteriorSample {
    pub fn n_draws(&self) -> usize {
        if self.n_a == 0 {
            0
        } else {
            self.z.len() / self.n_a
        }
    }

    pub fn draw(&self, t: usize) -> &[u32] {
        &self.z[t * self.n_a..(t + 1) * self.n_a]
    }

    pub fn draws(&self) -> impl Iterator<Item = &[u32]> {
        self.z.chunks_exact(self.n_a.max(1))
    }

    /// Concatenates chains into one sample (parameters are dropped).
    pub fn pool(chains: &[PosteriorSample]) -> Result<PosteriorSample> {
        let first = chains
            .first()
            .ok_or_else(|| LinkError::Config("no chains to pool".into()))?;
        if chains.iter().any(|c| c.n_a != first.n_a || c.n_b != first.n_b) {
            return Err(LinkError::Config("chains disagree on block dimensions".into()));
        }
        Ok(PosteriorSample {
            z: chains.iter().flat_map(|c| c.z.iter().copied()).collect(),
            p: None,
            phi: None,
            ..first.clone()
        })
    }

    /// Builds a sample from explicit draws (fixtures, reloaded output).
    pub fn from_draws(n_b: usize, draws: &[Vec<u32>]) -> Result<PosteriorSample> {
        let n_a = draws.first().map_or(0, Vec::len);
        for d in draws {
            if d.len() != n_a {
                return Err(LinkError::Matching("draws differ in length".into()));
            }
            Matching::from_vec(d.clone(), n_b)?;
        }
        Ok(PosteriorSample {
            n_a,
            n_b,
            z: draws.concat(),
            p: None,
            phi: None,
            seed: 0,
            chain: 0,
            kernel: "external",
        })
    }
}

/// State handed to an observer after every iteration.
pub struct IterationState<'a> {
    pub iteration: usize,
    pub z: &'a Matching,
    pub phi: &'a DisagreementParams,
    pub p: &'a [f64],
    pub stats: &'a SufficientStats,
}

/// p-slot sizes `n_{A,g}` under the model's layout.
fn p_slot_sizes(model: &LinkageModel) -> Vec<usize> {
    let mut sizes = vec![0; model.n_p()];
    for i in 0..model.partition.n_records() {
        sizes[model.layout.p_index(model.partition.group_of(i))] += 1;
    }
    sizes
}

fn draw_p(stats: &SufficientStats, sizes: &[usize], model: &LinkageModel, rng: &mut ChainRng) -> Vec<f64> {
    sizes
        .iter()
        .zip(&stats.n_matched_p)
        .map(|(&n, &k)| {
            let a = k as f64 + model.prior.alpha_p;
            let b = (n - k) as f64 + model.prior.beta_p;
            Beta::new(a, b).expect("positive Beta parameters").sample(rng)
        })
        .collect()
}

/// Step 1: `p_g ~ Beta(n_g(Z) + α_p, n_{A,g} − n_g(Z) + β_p)`.
pub fn sample_p(z: &Matching, data: &ComparisonData, model: &LinkageModel, rng: &mut ChainRng) -> Vec<f64> {
    let stats = sufficient_stats(z, data, &model.partition, &model.layout);
    draw_p(&stats, &p_slot_sizes(model), model, rng)
}

/// One Dirichlet draw per field segment of a flattened row.
fn dirichlet_row(alpha: &[f64], levels_per_field: &[usize], rng: &mut ChainRng) -> Vec<f64> {
    let mut out = Vec::with_capacity(alpha.len());
    let mut off = 0;
    for &l in levels_per_field {
        let start = out.len();
        let mut total = 0.0;
        for &a in &alpha[off..off + l] {
            let g = Gamma::new(a, 1.0).expect("positive Dirichlet parameter").sample(rng);
            total += g;
            out.push(g);
        }
        if total > 0.0 {
            for x in &mut out[start..] {
                *x /= total;
            }
        } else {
            // every gamma underflowed: fall back to the prior mean
            let s: f64 = alpha[off..off + l].iter().sum();
            for (x, &a) in out[start..].iter_mut().zip(&alpha[off..off + l]) {
                *x = a / s;
            }
        }
        off += l;
    }
    out
}

/// The margin vector used for subgroup `g` and corrected-field slot `slot`.
fn margin_for<'m>(margins: &'m MarginTable, model: &LinkageModel, g: usize, slot: usize) -> &'m [f64] {
    match &margins.per_record {
        Some(rows) if model.partition.is_record_specific() => &rows[g][slot],
        _ => &margins.pooled[slot],
    }
}

fn draw_phi(
    stats: &SufficientStats,
    data: &ComparisonData,
    model: &LinkageModel,
    correction: UCorrection,
    margins: Option<&MarginTable>,
    rng: &mut ChainRng,
) -> DisagreementParams {
    let lpf = data.levels_per_field();
    let alpha = model.prior.flat_alpha(lpf);
    let posterior = |counts: &[u64], extra: &[f64]| -> Vec<f64> {
        counts
            .iter()
            .zip(&alpha)
            .zip(extra)
            .map(|((&c, &a), &e)| c as f64 + a + e)
            .collect()
    };
    let zeros = vec![0.0; alpha.len()];
    let m = stats
        .n_m
        .iter()
        .map(|c| dirichlet_row(&posterior(c, &zeros), lpf, rng))
        .collect();
    let margins = margins.filter(|_| correction != UCorrection::Off);
    let u = stats
        .n_u
        .iter()
        .enumerate()
        .map(|(g, c)| {
            let Some(mt) = margins else {
                return dirichlet_row(&posterior(c, &zeros), lpf, rng);
            };
            match correction {
                UCorrection::Soft { strength } => {
                    let mut extra = zeros.clone();
                    for (slot, &f) in mt.fields.iter().enumerate() {
                        let off = data.field_offset(f);
                        for (l, &q) in margin_for(mt, model, g, slot).iter().enumerate() {
                            extra[off + l] = strength * q;
                        }
                    }
                    dirichlet_row(&posterior(c, &extra), lpf, rng)
                }
                _ => {
                    let mut row = dirichlet_row(&posterior(c, &zeros), lpf, rng);
                    for (slot, &f) in mt.fields.iter().enumerate() {
                        let off = data.field_offset(f);
                        let q = margin_for(mt, model, g, slot);
                        let total: f64 = q.iter().map(|&x| x.max(MARGIN_FLOOR)).sum();
                        for (l, &x) in q.iter().enumerate() {
                            row[off + l] = x.max(MARGIN_FLOOR) / total;
                        }
                    }
                    row
                }
            }
        })
        .collect();
    DisagreementParams {
        levels_per_field: lpf.to_vec(),
        m,
        u,
    }
}

/// Step 2: m and u from their Dirichlet conditionals, with u-correction applied.
pub fn sample_phi(
    z: &Matching,
    data: &ComparisonData,
    model: &LinkageModel,
    correction: UCorrection,
    margins: Option<&MarginTable>,
    rng: &mut ChainRng,
) -> DisagreementParams {
    let stats = sufficient_stats(z, data, &model.partition, &model.layout);
    draw_phi(&stats, data, model, correction, margins, rng)
}

fn check_margins(margins: &MarginTable, data: &ComparisonData, model: &LinkageModel) -> Result<()> {
    for (slot, &f) in margins.fields.iter().enumerate() {
        let l = *data
            .levels_per_field()
            .get(f)
            .ok_or_else(|| LinkError::Config(format!("margin field {f} not in block schema")))?;
        if margins.pooled[slot].len() != l {
            return Err(LinkError::Config(format!("margin for field {f} has wrong level count")));
        }
    }
    if let Some(rows) = &margins.per_record {
        if model.partition.is_record_specific() && rows.len() != data.n_a() {
            return Err(LinkError::Config(format!(
                "{} per-record margins for a block of {} records",
                rows.len(),
                data.n_a()
            )));
        }
    }
    Ok(())
}

fn clamp_log_odds(p: f64) -> f64 {
    (p.ln() - (1.0 - p).ln()).clamp(-700.0, 700.0)
}

/// Redraws every `Z_i` once, visiting records in `order`.
pub fn sample_z(
    z: &mut Matching,
    phi: &DisagreementParams,
    p: &[f64],
    data: &ComparisonData,
    model: &LinkageModel,
    kernel: &mut dyn MatchKernel,
    order: &[usize],
    rng: &mut ChainRng,
) -> Result<()> {
    let log_m: Vec<Vec<f64>> = phi.m.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
    let log_u: Vec<Vec<f64>> = phi.u.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
    let log_odds: Vec<f64> = p.iter().map(|&x| clamp_log_odds(x)).collect();
    let mut lr = Vec::new();
    for &i in order {
        let g = model.partition.group_of(i);
        kernel::record_log_ratios(data, i, &log_m[model.layout.m_index(g)], &log_u[g], &mut lr);
        let weights = RecordWeights {
            log_odds: log_odds[model.layout.p_index(g)],
            log_ratio: &lr,
        };
        kernel.update_record(i, z, &weights, rng)?;
        let j = z.get(i);
        debug_assert!(j == 0 || z.owner(j as usize - 1) == Some(i));
    }
    Ok(())
}

/// Runs one chain from the empty matching.
pub fn run_chain(
    data: &ComparisonData,
    model: &LinkageModel,
    config: &SamplerConfig,
    margins: Option<&MarginTable>,
    seed: u64,
    chain: u32,
) -> Result<PosteriorSample> {
    run_chain_observed(data, model, config, margins, seed, chain, &mut |_| {})
}

/// [`run_chain`] with a callback after every iteration (burn-in included).
pub fn run_chain_observed(
    data: &ComparisonData,
    model: &LinkageModel,
    config: &SamplerConfig,
    margins: Option<&MarginTable>,
    seed: u64,
    chain: u32,
    observer: &mut dyn FnMut(&IterationState<'_>),
) -> Result<PosteriorSample> {
    config.validate()?;
    model.validate(data)?;
    if data.n_a() > data.n_b() {
        return Err(LinkError::Config("the model's A side must be the smaller file".into()));
    }
    if let Some(mt) = margins.filter(|_| config.u_correction != UCorrection::Off) {
        check_margins(mt, data, model)?;
    }
    let mut kernel = KERNELS.get(&config.kernel)?(data, config);
    let (mut rng, mut order_rng) = chain_streams(seed, chain);
    let sizes = p_slot_sizes(model);
    let n_a = data.n_a();
    let retained = config.retained();
    let mut out = PosteriorSample {
        n_a,
        n_b: data.n_b(),
        z: Vec::with_capacity(retained * n_a),
        p: config.store_params.then(Vec::new),
        phi: config.store_params.then(Vec::new),
        seed,
        chain,
        kernel: kernel.name(),
    };
    let mut z = Matching::empty(n_a, data.n_b());
    let mut order: Vec<usize> = (0..n_a).collect();
    for it in 0..config.iterations {
        let stats = sufficient_stats(&z, data, &model.partition, &model.layout);
        let p = draw_p(&stats, &sizes, model, &mut rng);
        let phi = draw_phi(&stats, data, model, config.u_correction, margins, &mut rng);
        order.shuffle(&mut order_rng);
        sample_z(&mut z, &phi, &p, data, model, kernel.as_mut(), &order, &mut rng)?;
        z.check()?;
        let keep = it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0;
        if keep {
            out.z.extend_from_slice(z.as_slice());
            if let Some(ps) = out.p.as_mut() {
                ps.push(p.clone());
            }
            if let Some(phis) = out.phi.as_mut() {
                phis.push(phi.clone());
            }
        }
        let stats = sufficient_stats(&z, data, &model.partition, &model.layout);
        observer(&IterationState {
            iteration: it,
            z: &z,
            phi: &phi,
            p: &p,
            stats: &stats,
        });
    }
    Ok(out)
}

/// Runs `config.chains` independent chains, in parallel, ordered by chain index.
pub fn run_chains(
    data: &ComparisonData,
    model: &LinkageModel,
    config: &SamplerConfig,
    margins: Option<&MarginTable>,
    seed: u64,
) -> Result<Vec<PosteriorSample>> {
    (0..config.chains as u32)
        .into_par_iter()
        .map(|c| run_chain(data, model, config, margins, seed, c))
        .collect()
}

/// Default scalar summary for convergence checks: `n(Z)`.
pub fn matched_count(z: &[u32]) -> f64 {
    z.iter().filter(|&&j| j > 0).count() as f64
}

/// Potential scale reduction factor of `summary` across chains.
///
/// Zero within-chain variance gives 1.0 when the chains also agree with each
/// other and infinity otherwise.
pub fn gelman_rubin(chains: &[PosteriorSample], summary: fn(&[u32]) -> f64) -> Result<f64> {
    if chains.len() < 2 {
        return Err(LinkError::Config("Gelman-Rubin needs at least two chains".into()));
    }
    let n = chains[0].n_draws();
    if n < 2 || chains.iter().any(|c| c.n_draws() != n) {
        return Err(LinkError::Config("chains must have equal length of at least two draws".into()));
    }
    let series: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| c.draws().map(summary).collect())
        .collect();
    let m = series.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = series
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}
