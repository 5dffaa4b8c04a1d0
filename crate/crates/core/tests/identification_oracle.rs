mod common;

use pal::identification::{IdentificationConfig, PartnerIdentifier};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{linear_partner_samples, linear_partner_trial};

#[test]
fn linear_partner_is_identified_in_most_seeds() {
    let results: Vec<(f64, f64)> = (0..5).map(linear_partner_trial).collect();
    let converged = results.iter().filter(|(rmse, _)| *rmse < 0.2).count();
    assert!(converged >= 4, "held-out RMSE per seed: {results:?}");
    let close = results.iter().filter(|(_, p)| (p + 0.2).abs() <= 0.2).count();
    assert!(close >= 4, "predictions at (0.1, 0): {results:?}");
}

#[test]
fn training_set_is_ten_percent_of_buffer() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut id = PartnerIdentifier::new(2, 1, IdentificationConfig::default(), &mut rng).unwrap();
    id.record(&[0.0, 0.0], &[0.0]);
    assert_eq!(id.train_set_size(), 1);
    assert_eq!(id.update(&mut rng).unwrap().train_size, 1);
    for e in linear_partner_samples(2499, 3) {
        id.record(&e.state, &e.partner_control);
    }
    assert_eq!(id.buffer().len(), 2000);
    assert_eq!(id.train_set_size(), 200);
}
