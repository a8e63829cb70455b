//! Block orchestration: partition, per-block sampling and estimation, merge.

use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use reclink::blocking::{partition, BlockScheme, Block, Partition};
use reclink::comparison::{build_comparison_data, DataFile, FieldSpec};
use reclink::estimator::{posterior_match_probs, DrawCounts, LossParams, MatchProbabilities, TprPpvEstimate, ESTIMATORS};
use reclink::evaluation::{actual_tpr_ppv, frontier_sweep, ActualMetrics, FrontierBlock, FrontierRow, TruthLabels};
use reclink::model::{LayoutRules, LinkageModel, Matching, PriorConfig, SubgroupPartition};
use reclink::rng::derive_seed;
use reclink::sampler::{gelman_rubin, matched_count, run_chains, PosteriorSample, SamplerConfig, UCorrection};

use crate::margins::Margins;

/// Everything that shapes the per-block models and estimates.
#[derive(Clone, Debug)]
pub struct EngineSettings {
    pub scheme: BlockScheme,
    pub prior: PriorConfig,
    pub layout: LayoutRules,
    pub sampler: SamplerConfig,
    pub loss: LossParams,
    pub estimator: String,
    pub grid: Vec<LossParams>,
}

/// Output of one block, in model orientation (A side = smaller side).
pub struct BlockRun {
    pub block: Block,
    pub n_patterns: usize,
    pub kernel: &'static str,
    pub sample: PosteriorSample,
    pub probs: MatchProbabilities,
    pub estimate: Matching,
    pub psrf: Option<f64>,
    pub seconds: f64,
}

impl BlockRun {
    /// `(file-A position, file-B position)` of each proposed link.
    pub fn links(&self, z: &Matching) -> Vec<(usize, usize)> {
        let (ma, mb) = self.block.model_sides();
        z.as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &j)| j > 0)
            .map(|(k, &j)| {
                let (x, y) = (ma[k], mb[j as usize - 1]);
                if self.block.swapped() {
                    (y, x)
                } else {
                    (x, y)
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchRow {
    pub id_a: String,
    pub id_b: Option<String>,
    pub probability: f64,
    pub block: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSummary {
    pub key: String,
    pub n_a: usize,
    pub n_b: usize,
    pub swapped: bool,
    pub skipped: bool,
    pub n_patterns: usize,
    pub kernel: Option<&'static str>,
    pub n_matched: usize,
    /// Potential scale reduction of n(Z); absent with one chain or when infinite.
    pub psrf: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockTiming {
    pub key: String,
    pub seconds: f64,
    pub n_patterns: usize,
}

pub struct LinkResult {
    pub partition: Partition,
    pub runs: Vec<BlockRun>,
    pub rows: Vec<MatchRow>,
    /// Per file-A record: 1-based file-B partner or 0.
    pub global: Vec<u32>,
    pub estimate: TprPpvEstimate,
    pub actual: Option<ActualMetrics>,
    pub frontier: Vec<FrontierRow>,
}

impl LinkResult {
    pub fn summaries(&self) -> Vec<BlockSummary> {
        let mut runs = self.runs.iter().peekable();
        self.partition
            .blocks
            .iter()
            .map(|b| {
                let (na, nb) = (b.a.len(), b.b.len());
                let run = runs.next_if(|r| r.block.key == b.key);
                BlockSummary {
                    key: b.key.clone(),
                    n_a: na,
                    n_b: nb,
                    swapped: b.swapped(),
                    skipped: b.skipped(),
                    n_patterns: run.map_or(0, |r| r.n_patterns),
                    kernel: run.map(|r| r.kernel),
                    n_matched: run.map_or(0, |r| r.estimate.n_matched()),
                    psrf: run.and_then(|r| r.psrf).filter(|x| x.is_finite()),
                }
            })
            .collect()
    }

    pub fn timings(&self) -> Vec<BlockTiming> {
        self.runs
            .iter()
            .map(|r| BlockTiming {
                key: r.block.key.clone(),
                seconds: r.seconds,
                n_patterns: r.n_patterns,
            })
            .collect()
    }
}

fn run_block(
    block: &Block,
    a: &DataFile,
    b: &DataFile,
    specs: &[FieldSpec],
    settings: &EngineSettings,
    margins: Option<&Margins>,
) -> reclink::Result<BlockRun> {
    let start = Instant::now();
    let swapped = block.swapped();
    let (ma, mb) = block.model_sides();
    let (fa, fb) = if swapped { (b, a) } else { (a, b) };
    let data = build_comparison_data(&fa.subset(ma), &fb.subset(mb), specs)?;
    let n = ma.len();
    let cfg = &settings.sampler;
    let groups = if cfg.record_specific {
        SubgroupPartition::record_specific(n)
    } else {
        SubgroupPartition::single(n)
    };
    let model = LinkageModel::new(groups, settings.prior.clone(), &settings.layout);
    let table = margins
        .filter(|_| cfg.u_correction != UCorrection::Off)
        .map(|m| m.for_side(swapped).subset(ma));
    let seed = derive_seed(cfg.seed, &block.key);
    let chains = run_chains(&data, &model, cfg, table.as_ref(), seed)?;
    let psrf = if chains.len() > 1 {
        Some(gelman_rubin(&chains, matched_count)?)
    } else {
        None
    };
    let sample = PosteriorSample::pool(&chains)?;
    let probs = posterior_match_probs(&sample)?;
    let estimate = ESTIMATORS.get(&settings.estimator)?().estimate(&probs, &settings.loss)?;
    let seconds = start.elapsed().as_secs_f64();
    log::info!(
        "block {:?}: {}x{}{}, {} patterns, kernel {}, {} matched, {:.3}s",
        block.key,
        ma.len(),
        mb.len(),
        if swapped { " (swapped)" } else { "" },
        data.n_patterns(),
        sample.kernel,
        estimate.n_matched(),
        seconds
    );
    Ok(BlockRun {
        block: block.clone(),
        n_patterns: data.n_patterns(),
        kernel: sample.kernel,
        sample,
        probs,
        estimate,
        psrf,
        seconds,
    })
}

/// Output rows of one block, one per file-A record.
fn block_rows(run: &BlockRun, a: &DataFile, b: &DataFile) -> Vec<MatchRow> {
    let key = &run.block.key;
    let row = |i: usize, j: Option<usize>, p: f64| MatchRow {
        id_a: a.records[i].id.clone(),
        id_b: j.map(|j| b.records[j].id.clone()),
        probability: p.clamp(0.0, 1.0),
        block: key.clone(),
    };
    if !run.block.swapped() {
        return run
            .block
            .a
            .iter()
            .enumerate()
            .map(|(k, &i)| match run.estimate.get(k) {
                0 => row(i, None, run.probs.p_zero(k)),
                j => row(i, Some(run.block.b[j as usize - 1]), run.probs.prob(k, j)),
            })
            .collect();
    }
    // model B side is file A: a record is unmatched in the draws nobody holds it
    let mut held = vec![0u64; run.block.a.len()];
    for draw in run.sample.draws() {
        for &j in draw.iter().filter(|&&j| j > 0) {
            held[j as usize - 1] += 1;
        }
    }
    let t = run.sample.n_draws() as f64;
    run.block
        .a
        .iter()
        .enumerate()
        .map(|(k, &i)| match run.estimate.owner(k) {
            Some(owner) => row(i, Some(run.block.b[owner]), run.probs.prob(owner, k as u32 + 1)),
            None => row(i, None, 1.0 - held[k] as f64 / t),
        })
        .collect()
}

/// Places per-block links into one file-A indexed matching and checks that
/// no file-B record is used twice.
fn merge_links(n_a: usize, n_b: usize, links: impl Iterator<Item = (usize, usize)>) -> Result<Vec<u32>> {
    let mut z = vec![0u32; n_a];
    for (i, j) in links {
        if z[i] != 0 {
            bail!("record {} of A is linked twice", i + 1);
        }
        z[i] = j as u32 + 1;
    }
    Matching::from_vec(z.clone(), n_b).map_err(|e| anyhow!("merged estimate is not bipartite: {e}"))?;
    Ok(z)
}

/// Runs every block on a pool of `workers` threads and merges the results in
/// block-key order. Results do not depend on `workers`.
pub fn link_files(
    a: &DataFile,
    b: &DataFile,
    specs: &[FieldSpec],
    settings: &EngineSettings,
    margins: Option<&Margins>,
    truth: Option<&TruthLabels>,
    workers: usize,
) -> Result<LinkResult> {
    if let Some(t) = truth {
        if t.partner.len() != a.len() {
            bail!("truth covers {} records, file A has {}", t.partner.len(), a.len());
        }
        t.validate(b.len())?;
    }
    let part = partition(a, b, &settings.scheme, specs)?;
    for blk in part.blocks.iter().filter(|blk| blk.skipped()) {
        log::info!("block {:?}: one side empty, skipped", blk.key);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let runs: Vec<BlockRun> = pool.install(|| {
        part.blocks
            .par_iter()
            .filter(|blk| !blk.skipped())
            .map(|blk| {
                run_block(blk, a, b, specs, settings, margins).map_err(|e| anyhow!("block `{}`: {e}", blk.key))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::with_capacity(a.len());
    let mut by_key = runs.iter().peekable();
    for blk in &part.blocks {
        match by_key.next_if(|r| r.block.key == blk.key) {
            Some(run) => rows.extend(block_rows(run, a, b)),
            None => rows.extend(blk.a.iter().map(|&i| MatchRow {
                id_a: a.records[i].id.clone(),
                id_b: None,
                probability: 1.0,
                block: blk.key.clone(),
            })),
        }
    }
    let global = merge_links(a.len(), b.len(), runs.iter().flat_map(|r| r.links(&r.estimate)))?;

    let mut draws: Option<DrawCounts> = None;
    for r in &runs {
        let tally = DrawCounts::tally(r.estimate.as_slice(), &r.sample)?;
        match draws.as_mut() {
            Some(d) => d.merge(&tally)?,
            None => draws = Some(tally),
        }
    }
    let estimate = draws.map(|d| d.estimate()).unwrap_or(TprPpvEstimate {
        tpr: None,
        ppv: None,
        tpr_skipped: 0,
        draws: 0,
    });
    let actual = truth.map(|t| actual_tpr_ppv(&global, t)).transpose()?;

    let frontier = if settings.grid.is_empty() {
        Vec::new()
    } else {
        let blocks: Vec<FrontierBlock> = runs
            .iter()
            .map(|r| FrontierBlock {
                probs: &r.probs,
                sample: &r.sample,
            })
            .collect();
        let scorer = |estimates: &[Matching]| -> reclink::Result<ActualMetrics> {
            let t = truth.expect("scorer is only used with truth");
            let links = runs.iter().zip(estimates).flat_map(|(r, z)| r.links(z));
            let z = merge_links(a.len(), b.len(), links).map_err(|e| reclink::LinkError::Matching(e.to_string()))?;
            actual_tpr_ppv(&z, t)
        };
        pool.install(|| frontier_sweep(&blocks, &settings.grid, truth.map(|_| &scorer as _)))?
    };

    Ok(LinkResult {
        partition: part,
        runs,
        rows,
        global,
        estimate,
        actual,
        frontier,
    })
}
