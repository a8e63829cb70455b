//! The `link` subcommands.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use reclink::comparison::{DataFile, FieldSpec};
use reclink::estimator::TprPpvEstimate;
use reclink::evaluation::{actual_tpr_ppv, generate_synthetic, ActualMetrics, FrontierRow, TruthLabels};
use reclink::sampler::UCorrection;

use crate::config::{RunConfig, SynthConfig};
use crate::ingest::{ingest, Reject};
use crate::margins::Margins;
use crate::pipeline::{link_files, BlockSummary, BlockTiming, EngineSettings, LinkResult, MatchRow};
use crate::preprocess::{self, NameRules, PlaceRules};

/// Files after ingestion and preprocessing.
pub struct PreparedInput {
    pub a: DataFile,
    pub b: DataFile,
    pub specs: Vec<FieldSpec>,
    pub rejects_a: Vec<Reject>,
    pub rejects_b: Vec<Reject>,
    pub digest_a: String,
    pub digest_b: String,
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn prepare(cfg: &RunConfig) -> Result<PreparedInput> {
    let inp = &cfg.input;
    let a = ingest(&inp.a, &cfg.fields, inp.id_column_a.as_deref(), inp.delimiter)?;
    let b = ingest(&inp.b, &cfg.fields, inp.id_column_b.as_deref(), inp.delimiter)?;
    let pp = &cfg.preprocess;
    let split = pp
        .split
        .as_ref()
        .map(|s| Ok::<_, anyhow::Error>((cfg.field_position(&s.first)?, cfg.field_position(&s.last)?)))
        .transpose()?;
    let names = pp.name_fields.iter().map(|n| cfg.field_position(n)).collect::<Result<Vec<_>>>()?;
    let places = pp.place_fields.iter().map(|n| cfg.field_position(n)).collect::<Result<Vec<_>>>()?;
    let name_rules = NameRules::default().with_abbreviations(&pp.abbreviations);
    let place_rules = PlaceRules::default().with_places(&pp.places);
    let (mut fa, mut fb) = (a.file, b.file);
    for f in [&mut fa, &mut fb] {
        preprocess::apply(f, split, &names, &places, &name_rules, &place_rules);
    }
    Ok(PreparedInput {
        a: fa,
        b: fb,
        specs: cfg.specs(),
        rejects_a: a.rejects,
        rejects_b: b.rejects,
        digest_a: file_digest(&inp.a)?,
        digest_b: file_digest(&inp.b)?,
    })
}

/// Reads `id_a,id_b[,uncertain]` truth rows against the ids of both files.
/// Records of A without a row have no true partner.
pub fn read_truth(path: &Path, a: &DataFile, b: &DataFile) -> Result<TruthLabels> {
    let index = |f: &DataFile| -> HashMap<String, usize> {
        f.records.iter().enumerate().map(|(k, r)| (r.id.clone(), k)).collect()
    };
    let (ia, ib) = (index(a), index(b));
    let mut truth = TruthLabels::new(vec![0; a.len()]);
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for row in reader.records() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        let id_a = row.get(0).unwrap_or("").trim();
        let id_b = row.get(1).unwrap_or("").trim();
        // ids rejected at ingestion are not scored
        let Some(&i) = ia.get(id_a) else { continue };
        if !id_b.is_empty() && id_b != "NONE" {
            if let Some(&j) = ib.get(id_b) {
                truth.partner[i] = j as u32 + 1;
            }
        }
        truth.uncertain[i] = matches!(row.get(2).map(str::trim), Some("1" | "true" | "TRUE"));
    }
    truth
        .validate(b.len())
        .with_context(|| format!("{}: truth is not one-to-one", path.display()))?;
    Ok(truth)
}

pub fn engine_settings(cfg: &RunConfig) -> Result<EngineSettings> {
    Ok(EngineSettings {
        scheme: cfg.blocking.scheme()?,
        prior: cfg.prior.clone(),
        layout: cfg.layout,
        sampler: cfg.sampler.clone(),
        loss: cfg.estimate.loss,
        estimator: cfg.estimate.estimator.clone(),
        grid: cfg.estimate.resolved_grid(),
    })
}

fn load_or_compute_margins(cfg: &RunConfig, input: &PreparedInput) -> Result<Option<Margins>> {
    if cfg.sampler.u_correction == UCorrection::Off {
        return Ok(None);
    }
    let fields = cfg.margin_fields()?;
    let per_record = cfg.sampler.record_specific;
    if let Some(path) = cfg.margins.file.as_ref().filter(|p| p.exists()) {
        let m = Margins::read(path, &input.a, &input.b, &input.specs, &fields)?;
        if per_record && !m.has_per_record() {
            bail!("{}: record-specific runs need per-record margins", path.display());
        }
        log::info!("margins read from {}", path.display());
        return Ok(Some(m));
    }
    Ok(Some(Margins::compute(&input.a, &input.b, &input.specs, &fields, per_record)?))
}

#[derive(Serialize)]
struct InputSummary {
    sha256: String,
    records: usize,
    rejected_rows: usize,
    unblocked: usize,
}

#[derive(Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    engine_version: &'static str,
    config_digest: String,
    seed: u64,
    inputs: [InputSummary; 2],
    /// The resolved configuration minus the execution-only settings.
    config: serde_json::Value,
    blocks: Vec<BlockSummary>,
    estimated: TprPpvEstimate,
    actual: Option<ActualMetrics>,
}

/// Matches and run manifest; identical for identical inputs, config and seed.
pub struct MatchOutput {
    pub rows: Vec<MatchRow>,
    pub frontier: Vec<FrontierRow>,
    pub manifest: Manifest,
    pub rejects: Vec<(char, String, Reject)>,
    pub timing: Vec<BlockTiming>,
    pub result: LinkResult,
}

/// Config as JSON with `workers` and `output_dir` dropped; keys are sorted.
fn canonical_config(cfg: &RunConfig) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(map) = v.as_object_mut() {
        map.remove("workers");
        map.remove("output_dir");
    }
    Ok(v)
}

pub fn run_matching(cfg: &RunConfig) -> Result<MatchOutput> {
    let input = prepare(cfg)?;
    for (side, rejects) in [('A', &input.rejects_a), ('B', &input.rejects_b)] {
        for r in rejects {
            log::warn!("file {side}, line {}: {}", r.line, r.reason);
        }
    }
    let truth = cfg
        .truth
        .as_ref()
        .map(|p| read_truth(p, &input.a, &input.b))
        .transpose()?;
    let margins = load_or_compute_margins(cfg, &input)?;
    let settings = engine_settings(cfg)?;
    let result = link_files(
        &input.a,
        &input.b,
        &input.specs,
        &settings,
        margins.as_ref(),
        truth.as_ref(),
        cfg.workers,
    )?;

    let config = canonical_config(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&config)?);
    hasher.update(input.digest_a.as_bytes());
    hasher.update(input.digest_b.as_bytes());
    let manifest = Manifest {
        tool: "link",
        version: env!("CARGO_PKG_VERSION"),
        engine_version: reclink::VERSION,
        config_digest: hex::encode(hasher.finalize()),
        seed: cfg.sampler.seed,
        inputs: [
            InputSummary {
                sha256: input.digest_a.clone(),
                records: input.a.len(),
                rejected_rows: input.rejects_a.len(),
                unblocked: result.partition.rejected_a.len(),
            },
            InputSummary {
                sha256: input.digest_b.clone(),
                records: input.b.len(),
                rejected_rows: input.rejects_b.len(),
                unblocked: result.partition.rejected_b.len(),
            },
        ],
        config,
        blocks: result.summaries(),
        estimated: result.estimate,
        actual: result.actual,
    };
    let mut rejects = Vec::new();
    for (side, list, file, unblocked) in [
        ('A', &input.rejects_a, &input.a, &result.partition.rejected_a),
        ('B', &input.rejects_b, &input.b, &result.partition.rejected_b),
    ] {
        rejects.extend(list.iter().map(|r| (side, String::new(), r.clone())));
        rejects.extend(unblocked.iter().map(|&k| {
            let reject = Reject {
                line: 0,
                reason: "empty blocking value".into(),
            };
            (side, file.records[k].id.clone(), reject)
        }));
    }
    Ok(MatchOutput {
        rows: result.rows.clone(),
        frontier: result.frontier.clone(),
        timing: result.timings(),
        manifest,
        rejects,
        result,
    })
}

fn fmt_prob(p: f64) -> String {
    format!("{p:.6}")
}

fn fmt_opt(p: Option<f64>) -> String {
    p.map(fmt_prob).unwrap_or_default()
}

pub fn write_matches<W: Write>(rows: &[MatchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["record_id_a", "record_id_b", "probability", "block"])?;
    for r in rows {
        w.write_record([
            r.id_a.as_str(),
            r.id_b.as_deref().unwrap_or("NONE"),
            &fmt_prob(r.probability),
            &r.block,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_frontier<W: Write>(rows: &[FrontierRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lambda_fnm",
        "lambda_fm1",
        "lambda_fm2",
        "n_matched",
        "est_tpr",
        "est_ppv",
        "tpr",
        "ppv",
    ])?;
    for r in rows {
        w.write_record([
            r.loss.fnm.to_string(),
            r.loss.fm1.to_string(),
            r.loss.fm2.to_string(),
            r.n_matched.to_string(),
            fmt_opt(r.est_tpr),
            fmt_opt(r.est_ppv),
            fmt_opt(r.actual.and_then(|a| a.tpr)),
            fmt_opt(r.actual.and_then(|a| a.ppv)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
}

/// Writes matches.csv, manifest.json, rejects.csv, timing.json and, with a
/// grid, frontier.csv.
pub fn write_outputs(out: &MatchOutput, dir: &Path, workers: usize) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_matches(&out.rows, create(dir, "matches.csv")?)?;
    let mut m = create(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut m, &out.manifest)?;
    writeln!(m)?;
    if !out.frontier.is_empty() {
        write_frontier(&out.frontier, create(dir, "frontier.csv")?)?;
    }
    let mut w = csv::Writer::from_writer(create(dir, "rejects.csv")?);
    w.write_record(["file", "line", "record_id", "reason"])?;
    for (side, id, r) in &out.rejects {
        let line = if r.line > 0 { r.line.to_string() } else { String::new() };
        w.write_record([side.to_string(), line, id.clone(), r.reason.clone()])?;
    }
    w.flush()?;
    let mut t = create(dir, "timing.json")?;
    serde_json::to_writer_pretty(&mut t, &serde_json::json!({ "workers": workers, "blocks": out.timing }))?;
    writeln!(t)?;
    Ok(())
}

pub fn cmd_run(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = run_matching(&cfg)?;
    write_outputs(&out, &cfg.output_dir, cfg.workers)?;
    let r = &out.result;
    println!(
        "{} blocks, {} links proposed; estimated TPR {} PPV {}",
        r.runs.len(),
        r.global.iter().filter(|&&j| j > 0).count(),
        fmt_opt(r.estimate.tpr),
        fmt_opt(r.estimate.ppv)
    );
    if let Some(a) = r.actual {
        println!("actual TPR {} PPV {}", fmt_opt(a.tpr), fmt_opt(a.ppv));
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

pub fn cmd_margins(config: &Path) -> Result<PathBuf> {
    let cfg = RunConfig::load(config)?;
    let input = prepare(&cfg)?;
    let fields = cfg.margin_fields()?;
    let m = Margins::compute(&input.a, &input.b, &input.specs, &fields, cfg.sampler.record_specific)?;
    let path = match &cfg.margins.file {
        Some(p) => p.clone(),
        None => {
            fs::create_dir_all(&cfg.output_dir)?;
            cfg.output_dir.join("margins.csv")
        }
    };
    m.write(&path, &input.a, &input.b, &input.specs)?;
    println!("margins written to {}", path.display());
    Ok(path)
}

pub fn write_data_file<W: Write>(file: &DataFile, specs: &[FieldSpec], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(specs.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for r in &file.records {
        let mut row = vec![r.id.clone()];
        row.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_synth(config: &Path) -> Result<()> {
    let cfg = SynthConfig::load(config)?;
    let data = generate_synthetic(&cfg.synthetic)?;
    let specs = reclink::evaluation::SyntheticConfig::field_specs();
    fs::create_dir_all(&cfg.output_dir)?;
    write_data_file(&data.a, &specs, create(&cfg.output_dir, "a.csv")?)?;
    write_data_file(&data.b, &specs, create(&cfg.output_dir, "b.csv")?)?;
    let mut w = csv::Writer::from_writer(create(&cfg.output_dir, "truth.csv")?);
    w.write_record(["id_a", "id_b"])?;
    for (r, &j) in data.a.records.iter().zip(&data.truth.partner) {
        let id_b = if j > 0 { data.b.records[j as usize - 1].id.as_str() } else { "NONE" };
        w.write_record([r.id.as_str(), id_b])?;
    }
    w.flush()?;
    println!(
        "{} + {} records, {} true links, written to {}",
        data.a.len(),
        data.b.len(),
        data.truth.n_true(),
        cfg.output_dir.display()
    );
    Ok(())
}

/// Actual TPR and PPV of a matches file against a truth file, both keyed by
/// record ids.
pub fn evaluate_files(estimate: &Path, truth: &Path) -> Result<ActualMetrics> {
    let mut ids_a: Vec<String> = Vec::new();
    let mut pos_a: HashMap<String, usize> = HashMap::new();
    let mut pos_b: HashMap<String, u32> = HashMap::new();
    let mut slot = |id: &str, ids: &mut Vec<String>| -> usize {
        *pos_a.entry(id.to_string()).or_insert_with(|| {
            ids.push(id.to_string());
            ids.len() - 1
        })
    };
    let mut b_code = |id: &str| -> u32 {
        let n = pos_b.len() as u32 + 1;
        *pos_b.entry(id.to_string()).or_insert(n)
    };
    let mut est: Vec<(usize, u32)> = Vec::new();
    let mut tru: Vec<(usize, u32, bool)> = Vec::new();
    for (path, is_truth) in [(estimate, false), (truth, true)] {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        for row in reader.records() {
            let row = row.with_context(|| format!("reading {}", path.display()))?;
            let id_a = row.get(0).unwrap_or("").trim();
            let id_b = row.get(1).unwrap_or("").trim();
            if id_a.is_empty() {
                continue;
            }
            let i = slot(id_a, &mut ids_a);
            let j = if id_b.is_empty() || id_b == "NONE" { 0 } else { b_code(id_b) };
            if is_truth {
                let uncertain = matches!(row.get(2).map(str::trim), Some("1" | "true" | "TRUE"));
                tru.push((i, j, uncertain));
            } else {
                est.push((i, j));
            }
        }
    }
    let n = ids_a.len();
    let mut zhat = vec![0u32; n];
    for (i, j) in est {
        zhat[i] = j;
    }
    let mut truth_labels = TruthLabels::new(vec![0; n]);
    for (i, j, u) in tru {
        truth_labels.partner[i] = j;
        truth_labels.uncertain[i] = u;
    }
    let n_b = pos_b.len();
    truth_labels
        .validate(n_b)
        .with_context(|| format!("{}: truth is not one-to-one", truth.display()))?;
    reclink::model::Matching::from_vec(zhat.clone(), n_b)
        .with_context(|| format!("{}: estimate is not one-to-one", estimate.display()))?;
    Ok(actual_tpr_ppv(&zhat, &truth_labels)?)
}

pub fn cmd_eval(estimate: &Path, truth: &Path) -> Result<()> {
    let m = evaluate_files(estimate, truth)?;
    println!("tpr,ppv,correct,true_matches,proposed");
    println!(
        "{},{},{},{},{}",
        fmt_opt(m.tpr),
        fmt_opt(m.ppv),
        m.counts.correct,
        m.counts.true_matches,
        m.counts.proposed
    );
    Ok(())
}
