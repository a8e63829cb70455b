//! Global disagreement margins and their cache file.
//!
//! The cache is CSV after one version line:
//!
//! ```text
//! # reclink margins v1
//! scope,record_id,field,level,probability
//! pooled,,first,1,0.0123
//! a,A17,first,1,0.0101
//! b,B4,first,1,0.0150
//! ```
//!
//! `pooled` rows hold the margins over all pairs; `a` and `b` rows, present
//! for record-specific runs, hold one margin per record of that file over
//! every record of the other.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use reclink::blocking::{global_margins, MarginTable};
use reclink::comparison::{DataFile, FieldSpec};

const VERSION_LINE: &str = "# reclink margins v1";

/// Margins oriented from each file's side.
#[derive(Clone, Debug, PartialEq)]
pub struct Margins {
    pub a: MarginTable,
    /// Per-record margins of file B over file A.
    pub b: Option<MarginTable>,
}

impl Margins {
    pub fn compute(a: &DataFile, b: &DataFile, specs: &[FieldSpec], fields: &[usize], per_record: bool) -> Result<Self> {
        let from_a = global_margins(a, b, specs, fields, per_record)?;
        let from_b = if per_record {
            Some(global_margins(b, a, specs, fields, true)?)
        } else {
            None
        };
        Ok(Margins { a: from_a, b: from_b })
    }

    /// The table for a block whose model A side comes from file B when `swapped`.
    pub fn for_side(&self, swapped: bool) -> &MarginTable {
        match (&self.b, swapped) {
            (Some(b), true) => b,
            _ => &self.a,
        }
    }

    pub fn has_per_record(&self) -> bool {
        self.a.per_record.is_some() && self.b.is_some()
    }

    pub fn write(&self, path: &Path, a: &DataFile, b: &DataFile, specs: &[FieldSpec]) -> Result<()> {
        let mut out = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(out, "{VERSION_LINE}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scope", "record_id", "field", "level", "probability"])?;
        let fields = &self.a.fields;
        for (slot, row) in self.a.pooled.iter().enumerate() {
            for (l, p) in row.iter().enumerate() {
                let level = (l + 1).to_string();
                w.write_record(["pooled", "", &specs[fields[slot]].name, &level, &p.to_string()])?;
            }
        }
        let sides = [("a", Some(&self.a), a), ("b", self.b.as_ref(), b)];
        for (scope, table, file) in sides {
            let Some(rows) = table.and_then(|t| t.per_record.as_ref()) else {
                continue;
            };
            for (rec, per_field) in file.records.iter().zip(rows) {
                for (slot, row) in per_field.iter().enumerate() {
                    for (l, p) in row.iter().enumerate() {
                        let level = (l + 1).to_string();
                        w.write_record([scope, &rec.id, &specs[fields[slot]].name, &level, &p.to_string()])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a cache file written for the same files and fields.
    pub fn read(path: &Path, a: &DataFile, b: &DataFile, specs: &[FieldSpec], fields: &[usize]) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        if first.trim_end() != VERSION_LINE {
            bail!("{}: not a version 1 margins file", path.display());
        }
        let slot_of: HashMap<&str, usize> = fields
            .iter()
            .enumerate()
            .map(|(slot, &f)| (specs[f].name.as_str(), slot))
            .collect();
        let empty = || -> Vec<Vec<f64>> { fields.iter().map(|&f| vec![f64::NAN; specs[f].num_levels()]).collect() };
        let id_maps: [HashMap<&str, usize>; 2] = [a, b].map(|file| {
            file.records
                .iter()
                .enumerate()
                .map(|(k, r)| (r.id.as_str(), k))
                .collect()
        });
        let mut pooled = empty();
        let mut per: [Option<Vec<Vec<Vec<f64>>>>; 2] = [None, None];
        let mut csv = csv::Reader::from_reader(reader);
        for row in csv.records() {
            let row = row.with_context(|| format!("reading {}", path.display()))?;
            let bad = || format!("{}: malformed row {:?}", path.display(), row.iter().collect::<Vec<_>>());
            let (scope, id, field, level, p) = match (row.get(0), row.get(1), row.get(2), row.get(3), row.get(4)) {
                (Some(s), Some(i), Some(f), Some(l), Some(p)) => (s, i, f, l, p),
                _ => bail!(bad()),
            };
            let slot = *slot_of
                .get(field)
                .with_context(|| format!("{}: unexpected field `{field}`", path.display()))?;
            let level: usize = level.parse().with_context(bad)?;
            let p: f64 = p.parse().with_context(bad)?;
            if level == 0 || level > specs[fields[slot]].num_levels() {
                bail!("{}: level {level} out of range for `{field}`", path.display());
            }
            let target = match scope {
                "pooled" => &mut pooled,
                "a" | "b" => {
                    let side = usize::from(scope == "b");
                    let k = *id_maps[side]
                        .get(id)
                        .with_context(|| format!("{}: unknown record `{id}`; margins are stale", path.display()))?;
                    let n = [a.len(), b.len()][side];
                    let rows = per[side].get_or_insert_with(|| vec![empty(); n]);
                    &mut rows[k]
                }
                other => bail!("{}: unknown scope `{other}`", path.display()),
            };
            target[slot][level - 1] = p;
        }
        let complete = |t: &Vec<Vec<f64>>| t.iter().flatten().all(|p| p.is_finite());
        if !complete(&pooled) {
            bail!("{}: pooled margins are incomplete", path.display());
        }
        for rows in per.iter().flatten() {
            if !rows.iter().all(complete) {
                bail!("{}: per-record margins are incomplete; margins are stale", path.display());
            }
        }
        let [per_a, per_b] = per;
        let table = |per_record| MarginTable {
            fields: fields.to_vec(),
            pooled: pooled.clone(),
            per_record,
        };
        Ok(Margins {
            a: table(per_a),
            b: per_b.map(|rows| table(Some(rows))),
        })
    }
}
