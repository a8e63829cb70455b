//! Name and place normalization applied before comparison.

use std::collections::{BTreeMap, BTreeSet};

use reclink::comparison::{DataFile, Value};

const ABBREVIATIONS: &[(&str, &str)] = &[
    ("wm", "William"),
    ("geo", "George"),
    ("thos", "Thomas"),
    ("chas", "Charles"),
    ("jas", "James"),
    ("jno", "John"),
    ("jos", "Joseph"),
    ("benj", "Benjamin"),
    ("saml", "Samuel"),
    ("danl", "Daniel"),
    ("robt", "Robert"),
    ("richd", "Richard"),
    ("edwd", "Edward"),
    ("fredk", "Frederick"),
    ("alexr", "Alexander"),
    ("nathl", "Nathaniel"),
    ("hy", "Henry"),
];

const TITLES: &[&str] = &[
    "mr", "mrs", "miss", "ms", "dr", "rev", "hon", "capt", "col", "lt", "lieut", "gen", "maj", "sgt", "corp", "pvt",
    "jr", "sr", "esq",
];

const PLACES: &[(&str, &str)] = &[
    ("eng", "England"),
    ("england", "England"),
    ("ire", "Ireland"),
    ("ireland", "Ireland"),
    ("scot", "Scotland"),
    ("scotland", "Scotland"),
    ("ger", "Germany"),
    ("germ", "Germany"),
    ("germany", "Germany"),
    ("prussia", "Germany"),
    ("n.y.", "NY"),
    ("new york", "NY"),
    ("penn", "PA"),
    ("penna", "PA"),
    ("pennsylvania", "PA"),
    ("mass", "MA"),
    ("massachusetts", "MA"),
    ("ohio", "OH"),
    ("va", "VA"),
    ("virginia", "VA"),
    ("ky", "KY"),
    ("kentucky", "KY"),
    ("tenn", "TN"),
    ("tennessee", "TN"),
    ("conn", "CT"),
    ("connecticut", "CT"),
    ("md", "MD"),
    ("maryland", "MD"),
    ("n.c.", "NC"),
    ("north carolina", "NC"),
    ("indiana", "IN"),
    ("ind", "IN"),
    ("illinois", "IL"),
    ("ill", "IL"),
    ("vt", "VT"),
    ("vermont", "VT"),
    ("me", "ME"),
    ("maine", "ME"),
    ("nh", "NH"),
    ("new hampshire", "NH"),
    ("nj", "NJ"),
    ("new jersey", "NJ"),
];

/// Abbreviation and title tables for name cleaning. Keys are lowercase,
/// without trailing periods.
#[derive(Clone, Debug)]
pub struct NameRules {
    pub abbreviations: BTreeMap<String, String>,
    pub titles: BTreeSet<String>,
}

impl Default for NameRules {
    fn default() -> Self {
        NameRules {
            abbreviations: ABBREVIATIONS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            titles: TITLES.iter().map(|t| t.to_string()).collect(),
        }
    }
}

impl NameRules {
    pub fn with_abbreviations(mut self, extra: &BTreeMap<String, String>) -> Self {
        for (k, v) in extra {
            self.abbreviations
                .insert(k.trim_end_matches('.').to_lowercase(), title_case(v));
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameParts {
    pub first: String,
    pub last: String,
}

fn strip_parentheticals(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut depth = 0usize;
    for c in raw.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                out.push(' ');
            }
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn title_case(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut start = true;
    for c in token.chars() {
        if start {
            out.extend(c.to_uppercase());
        } else {
            out.extend(c.to_lowercase());
        }
        start = c == '-' || c == '\'';
    }
    out
}

/// Cleaned tokens: no comments, titles, abbreviations or punctuation, in
/// title case.
fn clean_tokens(raw: &str, rules: &NameRules) -> Vec<String> {
    let text = strip_parentheticals(raw).replace([',', ';', ':', '"'], " ");
    text.split(|c: char| c.is_whitespace() || c == '.')
        .filter(|t| !t.is_empty())
        .filter_map(|t| {
            let key = t.to_lowercase();
            if rules.titles.contains(&key) {
                return None;
            }
            Some(match rules.abbreviations.get(&key) {
                Some(full) => full.clone(),
                None => title_case(t),
            })
        })
        .collect()
}

fn is_initial(t: &str) -> bool {
    t.chars().count() == 1
}

/// Splits a full name into first and last name; middle names and initials
/// are dropped. Idempotent on `"{first} {last}"`.
pub fn preprocess_names(raw: &str, rules: &NameRules) -> NameParts {
    let tokens = clean_tokens(raw, rules);
    match tokens.as_slice() {
        [] => NameParts {
            first: String::new(),
            last: String::new(),
        },
        [only] => NameParts {
            first: only.clone(),
            last: String::new(),
        },
        [first, .., last] => NameParts {
            first: first.clone(),
            last: last.clone(),
        },
    }
}

/// Cleans a single name field, dropping initials after the first token.
pub fn normalize_name(raw: &str, rules: &NameRules) -> String {
    let tokens = clean_tokens(raw, rules);
    let kept: Vec<&str> = tokens
        .iter()
        .enumerate()
        .filter(|(k, t)| *k == 0 || !is_initial(t))
        .map(|(_, t)| t.as_str())
        .collect();
    kept.join(" ")
}

#[derive(Clone, Debug)]
pub struct PlaceRules {
    pub places: BTreeMap<String, String>,
}

impl Default for PlaceRules {
    fn default() -> Self {
        PlaceRules {
            places: PLACES.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl PlaceRules {
    pub fn with_places(mut self, extra: &BTreeMap<String, String>) -> Self {
        for (k, v) in extra {
            self.places.insert(k.trim().to_lowercase(), v.clone());
        }
        self
    }
}

/// Maps known spellings to one form; other values only get their whitespace
/// collapsed.
pub fn normalize_place(raw: &str, rules: &PlaceRules) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let key = collapsed.to_lowercase();
    rules
        .places
        .get(&key)
        .or_else(|| rules.places.get(key.trim_end_matches('.')))
        .cloned()
        .unwrap_or(collapsed)
}

/// Applies name splitting and normalization to text fields in place.
pub fn apply(
    file: &mut DataFile,
    split: Option<(usize, usize)>,
    name_fields: &[usize],
    place_fields: &[usize],
    names: &NameRules,
    places: &PlaceRules,
) {
    for r in &mut file.records {
        if let Some((f, l)) = split {
            if let Some(raw) = r.values[f].as_text() {
                let parts = preprocess_names(raw, names);
                r.values[f] = Value::Text(parts.first);
                r.values[l] = Value::Text(parts.last);
            }
        }
        for &k in name_fields {
            if let Value::Text(s) = &r.values[k] {
                r.values[k] = Value::Text(normalize_name(s, names));
            }
        }
        for &k in place_fields {
            if let Value::Text(s) = &r.values[k] {
                r.values[k] = Value::Text(normalize_place(s, places));
            }
        }
    }
}
