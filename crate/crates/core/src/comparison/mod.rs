//! Discretized comparison data between two files, built in hashed form.
//!
//! Each field is compared once per unique pair of values; the per-field level
//! tables are then broadcast to record pairs, whose level vectors are packed
//! into a mixed-radix key and mapped to a dense pattern id.

mod comparator;
mod field;
mod jaro;

use std::collections::HashMap;

use rayon::prelude::*;

pub use comparator::{
    compare_categorical, compare_numeric, discretize_distance, relabel_common, ComparatorFactory,
    FieldComparator, FieldComparison, COMPARATORS,
};
pub use field::{DataFile, FieldKind, FieldSpec, Record, Value, MAX_COMMON_VALUES};
pub use jaro::{jaro_similarity, jaro_winkler_distance};

use crate::error::{LinkError, Result};

/// Key spaces up to this size use a direct lookup array instead of a hash map.
const DENSE_KEY_LIMIT: u64 = 1 << 22;

/// Levels of one field for every pair of unique values.
#[derive(Clone, Debug)]
pub struct FieldLevelTable {
    /// Unique-value index of each record in A / B.
    pub a_index: Vec<u32>,
    pub b_index: Vec<u32>,
    /// Occurrences of each unique value in A / B.
    pub a_counts: Vec<u64>,
    pub b_counts: Vec<u64>,
    /// Row-major `a_unique × b_unique` levels.
    pub levels: Vec<u8>,
}

impl FieldLevelTable {
    pub fn build(a: &DataFile, b: &DataFile, field: usize, spec: &FieldSpec) -> Result<Self> {
        let cmp = FieldComparison::new(spec)?;
        let (a_index, a_vals) = unique_values(a, field);
        let (b_index, b_vals) = unique_values(b, field);
        let mut a_counts = vec![0u64; a_vals.len()];
        for &u in &a_index {
            a_counts[u as usize] += 1;
        }
        let mut b_counts = vec![0u64; b_vals.len()];
        for &u in &b_index {
            b_counts[u as usize] += 1;
        }
        let levels: Vec<u8> = a_vals
            .par_iter()
            .flat_map_iter(|va| b_vals.iter().map(|vb| cmp.level(va, vb)).collect::<Vec<_>>())
            .collect();
        Ok(FieldLevelTable {
            a_index,
            b_index,
            a_counts,
            b_counts,
            levels,
        })
    }

    pub fn n_b_unique(&self) -> usize {
        self.b_counts.len()
    }

    /// Level of the pair (record `i` of A, record `j` of B), both 0-based.
    pub fn level(&self, i: usize, j: usize) -> u8 {
        self.levels[self.a_index[i] as usize * self.n_b_unique() + self.b_index[j] as usize]
    }
}

fn unique_values(file: &DataFile, field: usize) -> (Vec<u32>, Vec<&Value>) {
    let mut seen: HashMap<&Value, u32> = HashMap::new();
    let mut uniques = Vec::new();
    let index = file
        .records
        .iter()
        .map(|r| {
            let v = &r.values[field];
            *seen.entry(v).or_insert_with(|| {
                uniques.push(v);
                (uniques.len() - 1) as u32
            })
        })
        .collect();
    (index, uniques)
}

/// Hashed comparison data for one pair of files (one block).
///
/// Records are indexed from 0 here; the matching labeling adds one to a
/// B index so that 0 can mean "no match".
#[derive(Clone, Debug)]
pub struct ComparisonData {
    n_a: usize,
    n_b: usize,
    levels_per_field: Vec<usize>,
    offsets: Vec<usize>,
    /// Row-major `n_patterns × n_fields`, 1-based levels.
    patterns: Vec<u8>,
    /// Row-major `n_a × n_b` pattern ids.
    pair_patterns: Vec<u32>,
    /// Per record of A: (pattern id, number of B records), ascending by id.
    record_counts: Vec<Vec<(u32, u32)>>,
    /// Row-major `n_a × total_levels`: B records at each (field, level).
    record_level_counts: Vec<u32>,
}

impl ComparisonData {
    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn n_fields(&self) -> usize {
        self.levels_per_field.len()
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len() / self.n_fields()
    }

    /// `L_f` for each field.
    pub fn levels_per_field(&self) -> &[usize] {
        &self.levels_per_field
    }

    /// Sum of `L_f`; the length of a flattened (field, level) vector.
    pub fn total_levels(&self) -> usize {
        self.levels_per_field.iter().sum()
    }

    /// Flattened index of (field, 1-based level).
    pub fn flat_index(&self, field: usize, level: u8) -> usize {
        self.offsets[field] + level as usize - 1
    }

    pub fn field_offset(&self, field: usize) -> usize {
        self.offsets[field]
    }

    pub fn pattern(&self, k: usize) -> &[u8] {
        let f = self.n_fields();
        &self.patterns[k * f..(k + 1) * f]
    }

    /// Whether pattern `k` has `level` in `field`: an entry of the
    /// pattern × (field, level) indicator matrix.
    pub fn pattern_has_level(&self, k: usize, field: usize, level: u8) -> bool {
        self.pattern(k)[field] == level
    }

    pub fn pattern_of(&self, i: usize, j: usize) -> u32 {
        self.pair_patterns[i * self.n_b + j]
    }

    /// Pattern ids of record `i` against all of B.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.pair_patterns[i * self.n_b..(i + 1) * self.n_b]
    }

    /// Comparison vector of the pair (i, j).
    pub fn gamma(&self, i: usize, j: usize) -> &[u8] {
        self.pattern(self.pattern_of(i, j) as usize)
    }

    pub fn record_counts(&self, i: usize) -> &[(u32, u32)] {
        &self.record_counts[i]
    }

    /// Counts of B records at each flattened (field, level) for record `i`.
    pub fn record_level_counts(&self, i: usize) -> &[u32] {
        let t = self.total_levels();
        &self.record_level_counts[i * t..(i + 1) * t]
    }
}

/// Builds [`ComparisonData`] for files `a` and `b` under `specs`.
pub fn build_comparison_data(
    a: &DataFile,
    b: &DataFile,
    specs: &[FieldSpec],
) -> Result<ComparisonData> {
    if specs.is_empty() {
        return Err(LinkError::Config("no comparison fields".into()));
    }
    a.validate(specs)?;
    b.validate(specs)?;
    let tables = specs
        .iter()
        .enumerate()
        .map(|(f, s)| FieldLevelTable::build(a, b, f, s))
        .collect::<Result<Vec<_>>>()?;
    let levels_per_field: Vec<usize> = specs.iter().map(FieldSpec::num_levels).collect();
    levels_per_field
        .iter()
        .try_fold(1u64, |acc, &l| acc.checked_mul(l as u64))
        .ok_or_else(|| LinkError::Config("too many field levels to pack into a pattern key".into()))?;
    Ok(assemble(a.len(), b.len(), &tables, levels_per_field))
}

fn assemble(
    n_a: usize,
    n_b: usize,
    tables: &[FieldLevelTable],
    levels_per_field: Vec<usize>,
) -> ComparisonData {
    let n_fields = tables.len();
    let mut strides = Vec::with_capacity(n_fields);
    let mut key_space: u64 = 1;
    for &l in &levels_per_field {
        strides.push(key_space);
        key_space *= l as u64;
    }

    let strides_ref = &strides;
    let keys: Vec<u64> = (0..n_a)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows: Vec<(&[u8], &[u32])> = tables
                .iter()
                .map(|t| {
                    let nb = t.n_b_unique();
                    let ua = t.a_index[i] as usize;
                    (&t.levels[ua * nb..(ua + 1) * nb], t.b_index.as_slice())
                })
                .collect();
            (0..n_b).map(move |j| {
                rows.iter()
                    .zip(strides_ref)
                    .map(|((lv, bi), s)| (lv[bi[j] as usize] as u64 - 1) * s)
                    .sum::<u64>()
            })
        })
        .collect();

    // pattern ids in order of first appearance, scanning pairs row-major
    let mut patterns: Vec<u8> = Vec::new();
    let decode = |key: u64, patterns: &mut Vec<u8>| {
        for (s, &l) in strides.iter().zip(&levels_per_field) {
            patterns.push(((key / s) % l as u64) as u8 + 1);
        }
    };
    let mut pair_patterns = Vec::with_capacity(keys.len());
    let mut n_patterns: u32 = 0;
    if key_space <= DENSE_KEY_LIMIT {
        let mut lookup = vec![u32::MAX; key_space as usize];
        for &key in &keys {
            let slot = &mut lookup[key as usize];
            if *slot == u32::MAX {
                *slot = n_patterns;
                n_patterns += 1;
                decode(key, &mut patterns);
            }
            pair_patterns.push(*slot);
        }
    } else {
        let mut lookup: HashMap<u64, u32> = HashMap::new();
        for &key in &keys {
            let id = *lookup.entry(key).or_insert_with(|| {
                decode(key, &mut patterns);
                n_patterns += 1;
                n_patterns - 1
            });
            pair_patterns.push(id);
        }
    }

    let mut offsets = Vec::with_capacity(n_fields);
    let mut total = 0;
    for &l in &levels_per_field {
        offsets.push(total);
        total += l;
    }

    let mut record_counts = Vec::with_capacity(n_a);
    let mut record_level_counts = vec![0u32; n_a * total];
    let mut scratch = vec![0u32; n_patterns as usize];
    for i in 0..n_a {
        for &k in &pair_patterns[i * n_b..(i + 1) * n_b] {
            scratch[k as usize] += 1;
        }
        let mut counts = Vec::new();
        let rlc = &mut record_level_counts[i * total..(i + 1) * total];
        for (k, c) in scratch.iter_mut().enumerate() {
            if *c > 0 {
                counts.push((k as u32, *c));
                for f in 0..n_fields {
                    let level = patterns[k * n_fields + f] as usize;
                    rlc[offsets[f] + level - 1] += *c;
                }
                *c = 0;
            }
        }
        record_counts.push(counts);
    }

    ComparisonData {
        n_a,
        n_b,
        levels_per_field,
        offsets,
        patterns,
        pair_patterns,
        record_counts,
        record_level_counts,
    }
}
