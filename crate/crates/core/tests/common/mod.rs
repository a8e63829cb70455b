//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use libm::lgamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook Jaro similarity, written out directly.
pub fn naive_jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut used = vec![false; b.len()];
    let mut a_hits = Vec::new();
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !used[j] && b[j] == ca {
                used[j] = true;
                a_hits.push(ca);
                break;
            }
        }
    }
    let b_hits: Vec<char> = b.iter().zip(&used).filter(|(_, &u)| u).map(|(&c, _)| c).collect();
    let m = a_hits.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let half_t = a_hits.iter().zip(&b_hits).filter(|(x, y)| x != y).count() as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - half_t) / m) / 3.0
}

/// `1 − JW` with a four-character prefix bonus.
pub fn naive_jw_distance(a: &str, b: &str, w: f64) -> f64 {
    let j = naive_jaro(a, b);
    let l = a.chars().zip(b.chars()).take(4).take_while(|(x, y)| x == y).count() as f64;
    (1.0 - (j + l * w * (1.0 - j))).clamp(0.0, 1.0)
}

/// Level `1 + #{cutpoints < d}` for a distance or absolute difference.
pub fn naive_level(d: f64, cutpoints: &[f64]) -> u8 {
    1 + cutpoints.iter().filter(|&&c| d > c).count() as u8
}

/// Every bipartite labeling `Z ∈ {0..n_b}^{n_a}`.
pub fn all_matchings(n_a: usize, n_b: usize) -> Vec<Vec<u32>> {
    fn go(i: usize, n_a: usize, n_b: usize, cur: &mut Vec<u32>, used: &mut Vec<bool>, out: &mut Vec<Vec<u32>>) {
        if i == n_a {
            out.push(cur.clone());
            return;
        }
        cur.push(0);
        go(i + 1, n_a, n_b, cur, used, out);
        cur.pop();
        for j in 0..n_b {
            if !used[j] {
                used[j] = true;
                cur.push(j as u32 + 1);
                go(i + 1, n_a, n_b, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n_a, n_b, &mut Vec::new(), &mut vec![false; n_b], &mut out);
    out
}

fn ln_beta(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| lgamma(a)).sum::<f64>() - lgamma(alpha.iter().sum())
}

/// A small linkage problem with all comparison vectors spelled out.
pub struct Instance {
    pub n_a: usize,
    pub n_b: usize,
    pub levels: Vec<usize>,
    /// `gamma[i][j][f]`, 1-based levels.
    pub gamma: Vec<Vec<Vec<u8>>>,
}

impl Instance {
    /// Exact posterior over all labelings with m, u and p integrated out under
    /// flat priors; `groups[i]` is the u-subgroup of record i.
    pub fn exact_posterior(&self, groups: &[usize]) -> Vec<(Vec<u32>, f64)> {
        let zs = all_matchings(self.n_a, self.n_b);
        let n_groups = groups.iter().max().map_or(0, |g| g + 1);
        let logs: Vec<f64> = zs
            .iter()
            .map(|z| {
                let n = z.iter().filter(|&&j| j > 0).count();
                let mut lp = -(self.n_b - n + 1..=self.n_b).map(|k| (k as f64).ln()).sum::<f64>();
                lp += ln_beta(&[n as f64 + 1.0, (self.n_a - n) as f64 + 1.0]) - ln_beta(&[1.0, 1.0]);
                for (f, &l) in self.levels.iter().enumerate() {
                    let flat = vec![1.0; l];
                    let mut nm = vec![0.0; l];
                    let mut nu = vec![vec![0.0; l]; n_groups];
                    for i in 0..self.n_a {
                        for j in 0..self.n_b {
                            let lev = self.gamma[i][j][f] as usize - 1;
                            if z[i] as usize == j + 1 {
                                nm[lev] += 1.0;
                            } else {
                                nu[groups[i]][lev] += 1.0;
                            }
                        }
                    }
                    let post = |c: &Vec<f64>| ln_beta(&c.iter().map(|x| x + 1.0).collect::<Vec<_>>()) - ln_beta(&flat);
                    lp += post(&nm);
                    lp += nu.iter().map(post).sum::<f64>();
                }
                lp
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        zs.into_iter().zip(w).map(|(z, x)| (z, x / s)).collect()
    }
}

/// `P(Z_i = j)` for j in `0..=n_b` from a posterior over labelings.
pub fn cell_probs(post: &[(Vec<u32>, f64)], n_a: usize, n_b: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; n_b + 1]; n_a];
    for (z, w) in post {
        for (i, &j) in z.iter().enumerate() {
            p[i][j as usize] += w;
        }
    }
    p
}

/// Posterior expected loss of `zhat` under integer weights, scaled by the
/// number of draws so that it is an exact integer.
pub fn scaled_loss(counts: &[Vec<u64>], zhat: &[u32], l: (u64, u64, u64)) -> u64 {
    let (fnm, fm1, fm2) = l;
    let t: u64 = counts[0].iter().sum();
    let mut total = 0;
    for (i, &zi) in zhat.iter().enumerate() {
        let row = &counts[i];
        if zi == 0 {
            total += fnm * (t - row[0]);
        } else {
            let pj = row[zi as usize];
            total += fm1 * row[0] + fm2 * (t - row[0] - pj);
        }
    }
    total
}

/// Minimum of [`scaled_loss`] over every bipartite labeling.
pub fn exhaustive_min_loss(counts: &[Vec<u64>], n_b: usize, l: (u64, u64, u64)) -> u64 {
    all_matchings(counts.len(), n_b)
        .iter()
        .map(|z| scaled_loss(counts, z, l))
        .min()
        .unwrap()
}

/// A random posterior given as draws: a weighted mixture of random bipartite
/// labelings, with weights expressed as repeat counts.
pub fn random_draws(rng: &mut ChaCha8Rng, n_a: usize, n_b: usize) -> Vec<Vec<u32>> {
    let support = rng.random_range(1..=6);
    let mut draws = Vec::new();
    for _ in 0..support {
        let mut free: Vec<u32> = (1..=n_b as u32).collect();
        let z: Vec<u32> = (0..n_a)
            .map(|_| {
                if free.is_empty() || rng.random_bool(0.3) {
                    0
                } else {
                    free.swap_remove(rng.random_range(0..free.len()))
                }
            })
            .collect();
        for _ in 0..rng.random_range(1..=5) {
            draws.push(z.clone());
        }
    }
    draws
}

/// Counts of `Z_i = j` (j in `0..=n_b`) across draws.
pub fn draw_counts(draws: &[Vec<u32>], n_b: usize) -> Vec<Vec<u64>> {
    let n_a = draws[0].len();
    let mut c = vec![vec![0u64; n_b + 1]; n_a];
    for d in draws {
        for (i, &j) in d.iter().enumerate() {
            c[i][j as usize] += 1;
        }
    }
    c
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean and batch-means standard error of a correlated series.
pub fn mean_and_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let var = bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// The two-by-five example files.
pub mod toy {
    use reclink::comparison::{DataFile, FieldSpec, Record, Value};

    pub const A: [(&str, &str, i64); 2] = [("John", "Lundrigan", 1848), ("Jedediah", "Smith", 1844)];
    pub const B: [(&str, &str, i64); 5] = [
        ("John", "Lundgren", 1848),
        ("Jon", "Lundregan", 1850),
        ("Jedidiah", "Smith", 1845),
        ("John", "Smith", 1844),
        ("Jedediah", "S", 1844),
    ];

    pub fn file(rows: &[(&str, &str, i64)], prefix: &str) -> DataFile {
        DataFile::new(
            rows.iter()
                .enumerate()
                .map(|(k, (f, l, y))| Record {
                    id: format!("{prefix}{}", k + 1),
                    values: vec![Value::from(*f), Value::from(*l), Value::Int(*y)],
                })
                .collect(),
        )
    }

    pub fn a() -> DataFile {
        file(&A, "A")
    }

    pub fn b() -> DataFile {
        file(&B, "B")
    }

    /// Reference (first, last, |year difference|) for every toy pair, row-major.
    pub const DISTANCES: [(f64, f64, i64); 10] = [
        (0.0, 0.1634, 0),
        (0.0833, 0.0741, 2),
        (0.5417, 0.563, 3),
        (0.0, 0.563, 4),
        (0.5417, 1.0, 4),
        (0.5417, 1.0, 4),
        (0.5139, 1.0, 6),
        (0.131, 0.0, 1),
        (0.5417, 0.0, 0),
        (0.0, 0.2667, 0),
    ];

    pub const NAME_CUTS: [f64; 3] = [0.05, 0.2, 0.53];
    pub const YEAR_CUTS: [f64; 3] = [0.5, 2.5, 4.5];

    /// Four levels per field, no prefix bonus.
    pub fn specs() -> Vec<FieldSpec> {
        vec![
            FieldSpec::string("first", &NAME_CUTS).with_prefix_weight(0.0),
            FieldSpec::string("last", &NAME_CUTS).with_prefix_weight(0.0),
            FieldSpec::numeric("year", &YEAR_CUTS),
        ]
    }
}

/// The toy problem as an [`Instance`], with levels computed by the naive oracle.
pub fn toy_instance() -> Instance {
    let gamma = toy::A
        .iter()
        .map(|(fa, la, ya)| {
            toy::B
                .iter()
                .map(|(fb, lb, yb)| {
                    vec![
                        naive_level(naive_jw_distance(fa, fb, 0.0), &toy::NAME_CUTS),
                        naive_level(naive_jw_distance(la, lb, 0.0), &toy::NAME_CUTS),
                        naive_level((ya - yb).abs() as f64, &toy::YEAR_CUTS),
                    ]
                })
                .collect()
        })
        .collect();
    Instance {
        n_a: 2,
        n_b: 5,
        levels: vec![4, 4, 4],
        gamma,
    }
}
