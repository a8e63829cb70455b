//! Jaro and Jaro-Winkler string distances over Unicode scalar values.

/// Maximum common-prefix length rewarded by the Winkler adjustment.
const MAX_PREFIX: usize = 4;

/// Plain Jaro similarity in `[0, 1]`.
///
/// Two empty strings are identical (similarity 1); an empty string against a
/// nonempty one has similarity 0.
pub fn jaro_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_chars(&a, &b)
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    // canonical argument order makes the result exactly symmetric
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if a == b {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }

    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_flags = vec![false; a.len()];
    let mut b_flags = vec![false; b.len()];
    let mut matches = 0usize;

    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for k in lo..hi {
            if !b_flags[k] && b[k] == *ca {
                a_flags[i] = true;
                b_flags[k] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }

    let mut half_transpositions = 0usize;
    let mut k = 0usize;
    for (i, ca) in a.iter().enumerate() {
        if !a_flags[i] {
            continue;
        }
        while !b_flags[k] {
            k += 1;
        }
        if *ca != b[k] {
            half_transpositions += 1;
        }
        k += 1;
    }

    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler distance `1 - sim`, where the Jaro similarity is boosted by
/// `prefix_weight` per shared leading character (up to four).
///
/// `prefix_weight = 0` gives the plain Jaro distance.
pub fn jaro_winkler_distance(a: &str, b: &str, prefix_weight: f64) -> f64 {
    debug_assert!((0.0..=0.25).contains(&prefix_weight));
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let sim = jaro_chars(&a, &b);
    let prefix = a
        .iter()
        .zip(b.iter())
        .take(MAX_PREFIX)
        .take_while(|(x, y)| x == y)
        .count() as f64;
    let boosted = sim + prefix * prefix_weight * (1.0 - sim);
    (1.0 - boosted).clamp(0.0, 1.0)
}
