//! Synthetic pairs of files with known truth.
//!
//! A latent population draws first and last names from power-law
//! vocabularies, a birth year and a birthplace. File A samples individuals
//! from the population; file B holds noisy copies of a fraction of them plus
//! unrelated individuals.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::TruthLabels;
use crate::comparison::{DataFile, FieldSpec, Record, Value};
use crate::error::{LinkError, Result};
use crate::rng::{derive_seed, ChainRng};

const COMMON_FIRST: &[&str] = &[
    "John", "William", "James", "George", "Charles", "Thomas", "Henry", "Joseph", "Samuel",
    "David", "Edward", "Robert", "Daniel", "Benjamin", "Andrew", "Peter", "Isaac", "Jacob",
    "Francis", "Richard", "Michael", "Frederick", "Patrick", "Albert", "Lewis", "Alexander",
    "Nathan", "Stephen", "Martin", "Hiram", "Elijah", "Levi", "Abraham", "Walter", "Edwin",
];

const COMMON_LAST: &[&str] = &[
    "Smith", "Brown", "Miller", "Johnson", "Jones", "Davis", "Wilson", "Clark", "Moore",
    "Taylor", "White", "Williams", "Thompson", "Anderson", "Martin", "Allen", "Baker", "Hall",
    "Young", "Lewis", "Walker", "Wright", "Green", "Adams", "Harris", "Jackson", "Hill", "King",
    "Scott", "Campbell", "Mitchell", "Carter", "Nelson", "Parker", "Evans", "Reed", "Stewart",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "br",
    "ch", "cl", "dr", "fr", "gr", "sh", "st", "th", "tr", "wh",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ee", "oa", "ou", "y"];
const CODAS: &[&str] = &["", "", "n", "r", "l", "s", "t", "m", "nd", "rt", "ck", "ll", "ns", "rd"];

const STATES: &[&str] = &[
    "NY", "PA", "OH", "IL", "IN", "MA", "MI", "WI", "NJ", "IA", "VT", "NH", "ME", "CT", "KY", "MO",
    "MD", "VA", "TN", "MN", "IRE", "GER", "ENG", "CAN", "SCO", "RI", "DE", "NC", "KS", "WV",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_a: usize,
    pub n_b: usize,
    /// Fraction of A that also appears (perturbed) in B.
    pub overlap: f64,
    pub first_vocabulary: usize,
    pub last_vocabulary: usize,
    /// Power-law exponents of name frequencies by rank.
    pub first_exponent: f64,
    pub last_exponent: f64,
    /// Probability that a copied name carries one typo.
    pub typo_rate: f64,
    /// Relative weights of substitution, deletion and transposition typos.
    pub typo_mix: [f64; 3],
    /// Probability that a copied birth year is shifted.
    pub year_noise: f64,
    pub year_max_shift: i64,
    pub year_range: (i64, i64),
    /// Probability that a copied birthplace is replaced.
    pub birthplace_flip: f64,
    pub n_birthplaces: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_a: 200,
            n_b: 2000,
            overlap: 0.5,
            first_vocabulary: 1000,
            last_vocabulary: 5000,
            first_exponent: 1.0,
            last_exponent: 0.8,
            typo_rate: 0.2,
            typo_mix: [0.5, 0.3, 0.2],
            year_noise: 0.3,
            year_max_shift: 2,
            year_range: (1820, 1850),
            birthplace_flip: 0.05,
            n_birthplaces: STATES.len(),
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(LinkError::Config(format!("synthetic config: {m}")));
        let rates = [self.overlap, self.typo_rate, self.year_noise, self.birthplace_flip];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return fail("rates must lie in [0, 1]".into());
        }
        if self.n_a == 0 || self.n_b == 0 {
            return fail("both files need records".into());
        }
        if self.n_overlap() > self.n_b {
            return fail(format!("{} shared records do not fit in n_b = {}", self.n_overlap(), self.n_b));
        }
        if self.first_vocabulary < 2 || self.last_vocabulary < 2 {
            return fail("vocabularies need at least two names".into());
        }
        if !(self.first_exponent >= 0.0 && self.last_exponent >= 0.0) {
            return fail("exponents must be nonnegative".into());
        }
        if self.typo_mix.iter().any(|&w| w < 0.0) || self.typo_mix.iter().sum::<f64>() <= 0.0 {
            return fail("typo_mix needs nonnegative weights with a positive sum".into());
        }
        if self.year_range.0 > self.year_range.1 || self.year_max_shift < 0 {
            return fail("bad year range or shift".into());
        }
        if self.n_birthplaces < 2 || self.n_birthplaces > STATES.len() {
            return fail(format!("n_birthplaces must be in 2..={}", STATES.len()));
        }
        Ok(())
    }

    pub fn n_overlap(&self) -> usize {
        (self.overlap * self.n_a as f64).round() as usize
    }

    /// Comparison fields of the generated files: first, last, year, birthplace.
    pub fn field_specs() -> Vec<FieldSpec> {
        vec![
            FieldSpec::string("first", &[0.05, 0.1, 0.15, 0.22, 0.3, 0.45]),
            FieldSpec::string("last", &[0.05, 0.1, 0.15, 0.22, 0.3, 0.45]),
            FieldSpec::numeric("year", &[0.5, 1.5, 2.5, 4.5]),
            FieldSpec::categorical("birthplace"),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub a: DataFile,
    pub b: DataFile,
    pub truth: TruthLabels,
}

fn invent_name(rng: &mut ChainRng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut s = String::new();
    for k in 0..syllables {
        s.push_str(ONSETS.choose(rng).unwrap());
        s.push_str(VOWELS.choose(rng).unwrap());
        if k + 1 == syllables || rng.random_bool(0.3) {
            s.push_str(CODAS.choose(rng).unwrap());
        }
    }
    let mut c = s.chars();
    let first = c.next().unwrap().to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

/// Distinct names ordered by frequency rank: well-known names first, then
/// invented ones.
pub fn name_vocabulary(size: usize, last_names: bool, seed: u64) -> Vec<String> {
    let base = if last_names { COMMON_LAST } else { COMMON_FIRST };
    let mut rng = ChainRng::seed_from_u64(derive_seed(seed, if last_names { "last" } else { "first" }));
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(size);
    for name in base.iter().map(|s| s.to_string()) {
        if out.len() == size {
            break;
        }
        seen.insert(name.clone());
        out.push(name);
    }
    while out.len() < size {
        let name = invent_name(&mut rng);
        if seen.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

fn typo(name: &str, mix: &[f64; 3], rng: &mut ChainRng) -> String {
    let mut chars: Vec<char> = name.chars().collect();
    // the first character is left alone so copies stay in their block
    if chars.len() < 3 {
        return name.to_string();
    }
    let total: f64 = mix.iter().sum();
    let r = rng.random::<f64>() * total;
    let pos = rng.random_range(1..chars.len());
    if r < mix[0] {
        let c = (b'a' + rng.random_range(0..26u8)) as char;
        chars[pos] = c;
    } else if r < mix[0] + mix[1] {
        chars.remove(pos);
    } else {
        let p = pos.min(chars.len() - 2).max(1);
        chars.swap(p, p + 1);
    }
    chars.into_iter().collect()
}

struct Person {
    first: usize,
    last: usize,
    year: i64,
    place: usize,
}

/// Builds files A and B with truth labels; identical configs give identical output.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let firsts = name_vocabulary(config.first_vocabulary, false, config.seed);
    let lasts = name_vocabulary(config.last_vocabulary, true, config.seed);
    let zf = Zipf::new(config.first_vocabulary as f64, config.first_exponent)
        .map_err(|e| LinkError::Config(format!("first-name law: {e}")))?;
    let zl = Zipf::new(config.last_vocabulary as f64, config.last_exponent)
        .map_err(|e| LinkError::Config(format!("last-name law: {e}")))?;
    let mut rng = ChainRng::seed_from_u64(derive_seed(config.seed, "population"));
    let person = |rng: &mut ChainRng| Person {
        first: zf.sample(rng) as usize - 1,
        last: zl.sample(rng) as usize - 1,
        year: rng.random_range(config.year_range.0..=config.year_range.1),
        place: rng.random_range(0..config.n_birthplaces),
    };
    let a_people: Vec<Person> = (0..config.n_a).map(|_| person(&mut rng)).collect();
    let n_shared = config.n_overlap();
    let fresh: Vec<Person> = (0..config.n_b - n_shared).map(|_| person(&mut rng)).collect();

    let record = |id: String, first: String, last: String, year: i64, place: usize| Record {
        id,
        values: vec![
            Value::Text(first),
            Value::Text(last),
            Value::Int(year),
            Value::Text(STATES[place].to_string()),
        ],
    };

    // B rows: noisy copies of the first n_shared members of A, then strangers
    let mut b_rows: Vec<(Option<usize>, Record)> = Vec::with_capacity(config.n_b);
    for (i, p) in a_people.iter().take(n_shared).enumerate() {
        let mut first = firsts[p.first].clone();
        let mut last = lasts[p.last].clone();
        if rng.random_bool(config.typo_rate) {
            first = typo(&first, &config.typo_mix, &mut rng);
        }
        if rng.random_bool(config.typo_rate) {
            last = typo(&last, &config.typo_mix, &mut rng);
        }
        let mut year = p.year;
        if config.year_max_shift > 0 && rng.random_bool(config.year_noise) {
            let shift = rng.random_range(1..=config.year_max_shift);
            year += if rng.random_bool(0.5) { shift } else { -shift };
        }
        let mut place = p.place;
        if rng.random_bool(config.birthplace_flip) {
            place = (place + rng.random_range(1..config.n_birthplaces)) % config.n_birthplaces;
        }
        b_rows.push((Some(i), record(String::new(), first, last, year, place)));
    }
    for p in &fresh {
        b_rows.push((
            None,
            record(String::new(), firsts[p.first].clone(), lasts[p.last].clone(), p.year, p.place),
        ));
    }
    b_rows.shuffle(&mut rng);

    let mut partner = vec![0u32; config.n_a];
    let b_records = b_rows
        .into_iter()
        .enumerate()
        .map(|(j, (src, mut r))| {
            if let Some(i) = src {
                partner[i] = j as u32 + 1;
            }
            r.id = format!("B{j}");
            r
        })
        .collect();

    // shuffle A so shared members are not all at the front
    let mut a_order: Vec<usize> = (0..config.n_a).collect();
    a_order.shuffle(&mut rng);
    let a_records = a_order
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let p = &a_people[i];
            record(
                format!("A{pos}"),
                firsts[p.first].clone(),
                lasts[p.last].clone(),
                p.year,
                p.place,
            )
        })
        .collect();
    let truth = TruthLabels::new(a_order.iter().map(|&i| partner[i]).collect());
    Ok(SyntheticData {
        a: DataFile::new(a_records),
        b: DataFile::new(b_records),
        truth,
    })
}
