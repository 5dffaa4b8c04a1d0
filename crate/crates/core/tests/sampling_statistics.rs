mod common;

use pal::ddpg::{DdpgConfig, OuNoise};
use pal::replay::ReplayBuffer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{chi_square, counts, CHI2_9DF_P001};

const DRAWS: usize = 100_000;

fn ten_items(prioritized: bool) -> ReplayBuffer<usize> {
    let mut b = if prioritized { ReplayBuffer::prioritized(10) } else { ReplayBuffer::new(10) };
    for i in 0..10 {
        b.push_with_priority(i, prioritized.then_some(1.0 + i as f64)).unwrap();
    }
    b
}

#[test]
fn uniform_sampling_passes_chi_square() {
    let b = ten_items(false);
    let idx = b.sample_uniform_indices(DRAWS, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let stat = chi_square(&counts(&idx, 10), &[DRAWS as f64 / 10.0; 10]);
    assert!(stat < CHI2_9DF_P001, "chi-square {stat}");
}

#[test]
fn per_with_equal_priorities_is_uniform() {
    let mut b = ReplayBuffer::prioritized(10);
    for i in 0..10 {
        b.push_with_priority(i, Some(0.7)).unwrap();
    }
    let idx = b.sample_per_indices(DRAWS, 0.6, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let stat = chi_square(&counts(&idx, 10), &[DRAWS as f64 / 10.0; 10]);
    assert!(stat < CHI2_9DF_P001, "chi-square {stat}");
}

#[test]
fn per_with_zero_alpha_ignores_priorities() {
    let b = ten_items(true);
    let idx = b.sample_per_indices(DRAWS, 0.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let stat = chi_square(&counts(&idx, 10), &[DRAWS as f64 / 10.0; 10]);
    assert!(stat < CHI2_9DF_P001, "chi-square {stat}");
}

#[test]
fn per_follows_priority_powers() {
    let b = ten_items(true);
    let alpha = 0.6;
    let weights: Vec<f64> = (0..10).map(|i| (1.0 + i as f64).powf(alpha)).collect();
    let total: f64 = weights.iter().sum();
    let expected: Vec<f64> = weights.iter().map(|w| w / total * DRAWS as f64).collect();
    let idx = b.sample_per_indices(DRAWS, alpha, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let stat = chi_square(&counts(&idx, 10), &expected);
    assert!(stat < CHI2_9DF_P001, "chi-square {stat}");
}

#[test]
fn per_three_to_one_ratio() {
    let mut b = ReplayBuffer::prioritized(2);
    b.push_with_priority("a", Some(3.0)).unwrap();
    b.push_with_priority("b", Some(1.0)).unwrap();
    let idx = b.sample_per_indices(DRAWS, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let c = counts(&idx, 2);
    let ratio = c[0] as f64 / c[1] as f64;
    assert!((ratio - 3.0).abs() < 0.05 * 3.0, "ratio {ratio}");
}

#[test]
fn per_large_alpha_concentrates_on_top_priority() {
    let mut b = ten_items(true);
    b.update_priority(4, 50.0).unwrap();
    let idx = b.sample_per_indices(1000, 20.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert!(idx.iter().filter(|&&i| i == 4).count() > 990);
}

#[test]
fn cer_includes_newest_and_rest_is_uniform() {
    let b = ten_items(false);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rest = Vec::new();
    for _ in 0..DRAWS / 4 {
        let idx = b.sample_cer_indices(5, &mut rng).unwrap();
        assert_eq!(idx[0], 9);
        rest.extend_from_slice(&idx[1..]);
    }
    let stat = chi_square(&counts(&rest, 10), &[rest.len() as f64 / 10.0; 10]);
    assert!(stat < CHI2_9DF_P001, "chi-square {stat}");
}

#[test]
fn ou_stationary_variance() {
    let cfg = DdpgConfig::default();
    let mut ou = OuNoise::from_config(&cfg);
    let expected = cfg.ou_sigma.powi(2) / (2.0 * cfg.ou_theta - cfg.ou_theta.powi(2) * cfg.ou_dt);
    assert!((ou.stationary_variance() - expected).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        ou.sample(&mut rng);
    }
    let n = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let v = ou.sample(&mut rng);
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    assert!((var / expected - 1.0).abs() < 0.10, "variance {var}, expected {expected}");
}
