mod common;

use common::{draw_counts, exhaustive_min_loss, random_draws, rng, scaled_loss};
use rand::Rng;
use reclink::estimator::{
    bayes_estimate, bayes_estimate_lsap, check_lambda_conditions, posterior_match_probs, LossParams, ESTIMATORS,
};
use reclink::evaluation::default_grid;
use reclink::sampler::PosteriorSample;

fn random_case(r: &mut rand_chacha::ChaCha8Rng) -> (usize, Vec<Vec<u32>>) {
    let n_a = r.random_range(1..=4);
    let n_b = r.random_range(n_a..=6);
    (n_b, random_draws(r, n_a, n_b))
}

fn integer_loss(r: &mut rand_chacha::ChaCha8Rng) -> (u64, u64, u64) {
    (r.random_range(1..=6), r.random_range(1..=6), r.random_range(1..=12))
}

fn as_params(l: (u64, u64, u64)) -> LossParams {
    LossParams::new(l.0 as f64, l.1 as f64, l.2 as f64).unwrap()
}

#[test]
fn threshold_and_assignment_reach_the_exhaustive_minimum() {
    let mut r = rng(2024);
    let (mut weak, mut other) = (0, 0);
    while weak < 300 || other < 100 {
        let (n_b, draws) = random_case(&mut r);
        let l = integer_loss(&mut r);
        let params = as_params(l);
        let counts = draw_counts(&draws, n_b);
        let best = exhaustive_min_loss(&counts, n_b, l);
        let probs = posterior_match_probs(&PosteriorSample::from_draws(n_b, &draws).unwrap()).unwrap();
        let lsap = bayes_estimate_lsap(&probs, &params).unwrap();
        assert_eq!(scaled_loss(&counts, lsap.as_slice(), l), best, "lsap {l:?} {draws:?}");
        if check_lambda_conditions(&params).weak_ok {
            let z = bayes_estimate(&probs, &params).unwrap();
            assert_eq!(scaled_loss(&counts, z.as_slice(), l), best, "threshold {l:?} {draws:?}");
            weak += 1;
        } else {
            assert!(bayes_estimate(&probs, &params).is_err());
            other += 1;
        }
    }
}

#[test]
fn stricter_condition_implies_weaker() {
    let mut r = rng(7);
    let mut gap = 0;
    for _ in 0..10_000 {
        let l = LossParams::new(r.random_range(0.01..5.0), r.random_range(0.01..5.0), r.random_range(0.01..10.0)).unwrap();
        let c = check_lambda_conditions(&l);
        assert!(!c.sadinle_ok || c.weak_ok, "{l:?}");
        gap += usize::from(c.weak_ok && !c.sadinle_ok);
    }
    assert!(gap > 0);
}

#[test]
fn links_shrink_along_the_default_grid() {
    let mut r = rng(31);
    for _ in 0..200 {
        let (n_b, draws) = random_case(&mut r);
        let probs = posterior_match_probs(&PosteriorSample::from_draws(n_b, &draws).unwrap()).unwrap();
        let mut prev: Option<Vec<u32>> = None;
        for l in default_grid() {
            let z = ESTIMATORS.get("auto").unwrap()().estimate(&probs, &l).unwrap();
            z.check().unwrap();
            if let Some(p) = &prev {
                for (i, &j) in z.as_slice().iter().enumerate() {
                    assert!(j == 0 || p[i] == j, "link ({i},{j}) appeared at {l:?}");
                }
            }
            prev = Some(z.as_slice().to_vec());
        }
    }
}

#[test]
fn estimators_are_selected_by_name() {
    for name in ["threshold", "lsap", "auto"] {
        assert_eq!(ESTIMATORS.get(name).unwrap()().name(), name);
    }
    assert!(ESTIMATORS.get("greedy").is_err());
}
