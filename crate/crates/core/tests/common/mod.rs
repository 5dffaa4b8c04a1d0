//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use pal::ddpg::{DdpgAgent, DdpgConfig, RlTransition};
use pal::identification::{IdExperience, IdentificationConfig, PartnerIdentifier};
use pal::nn::{BackwardSeed, LossKind, Mlp, WeightRange};
use pal::pendulum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_MIN_MAGNITUDE: f64 = 1e-8;

/// Upper 0.001 quantile of the chi-square distribution with 9 degrees of freedom.
pub const CHI2_9DF_P001: f64 = 27.877;

pub fn loss(mlp: &Mlp, x: &Array2<f64>, t: &Array2<f64>, kind: LossKind) -> f64 {
    kind.evaluate(&mlp.forward_batch(x), t).0
}

pub fn rebuild(weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Mlp {
    Mlp::from_parts(weights.to_vec(), biases.to_vec()).unwrap()
}

fn fd_close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    scale <= FD_MIN_MAGNITUDE || (analytic - numeric).abs() / scale < FD_REL_TOL
}

pub fn random_net(rng: &mut ChaCha8Rng) -> Mlp {
    let depth = rng.random_range(1..4);
    let mut sizes = vec![rng.random_range(1..5)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..6));
    }
    sizes.push(rng.random_range(1..3));
    let ranges = vec![WeightRange::symmetric(1.0); sizes.len() - 1];
    let mlp = Mlp::new(&sizes, &ranges, rng).unwrap();
    // Non-zero biases so their gradients are exercised too.
    let biases: Vec<Array1<f64>> = mlp.biases().iter().map(|b| b.mapv(|_| rng.random_range(-0.5..0.5))).collect();
    rebuild(mlp.weights(), &biases)
}

/// Compares every parameter gradient (MSE loss) and every input gradient
/// (chain-rule mode) with central differences. Returns the number of
/// components checked.
pub fn gradient_check(mlp: &Mlp, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let batch = rng.random_range(1..5);
    let x = Array2::from_shape_fn((batch, mlp.input_dim()), |_| rng.random_range(-2.0..2.0));
    let t = Array2::from_shape_fn((batch, mlp.output_dim()), |_| rng.random_range(-2.0..2.0));
    let bp = mlp.gradients(&x, BackwardSeed::Target { target: &t, loss: LossKind::Mse });
    let central = |plus: Mlp, minus: Mlp| (loss(&plus, &x, &t, LossKind::Mse) - loss(&minus, &x, &t, LossKind::Mse)) / (2.0 * FD_STEP);
    let mut checked = 0;

    for l in 0..mlp.weights().len() {
        let (rows, cols) = mlp.weights()[l].dim();
        for r in 0..rows {
            for c in 0..cols {
                let mut plus = mlp.weights().to_vec();
                let mut minus = mlp.weights().to_vec();
                plus[l][[r, c]] += FD_STEP;
                minus[l][[r, c]] -= FD_STEP;
                let numeric = central(rebuild(&plus, mlp.biases()), rebuild(&minus, mlp.biases()));
                let analytic = bp.grads.weights[l][[r, c]];
                if !fd_close(analytic, numeric) {
                    return Err(format!("weight {l}[{r},{c}]: analytic {analytic}, numeric {numeric}"));
                }
                checked += 1;
            }
        }
        for j in 0..mlp.biases()[l].len() {
            let mut plus = mlp.biases().to_vec();
            let mut minus = mlp.biases().to_vec();
            plus[l][j] += FD_STEP;
            minus[l][j] -= FD_STEP;
            let numeric = central(rebuild(mlp.weights(), &plus), rebuild(mlp.weights(), &minus));
            let analytic = bp.grads.biases[l][j];
            if !fd_close(analytic, numeric) {
                return Err(format!("bias {l}[{j}]: analytic {analytic}, numeric {numeric}"));
            }
            checked += 1;
        }
    }

    let g = Array2::from_shape_fn((batch, mlp.output_dim()), |_| rng.random_range(-1.0..1.0));
    let up = mlp.gradients(&x, BackwardSeed::Upstream(&g));
    let dot = |x: &Array2<f64>| (&mlp.forward_batch(x) * &g).sum();
    for i in 0..batch {
        for j in 0..mlp.input_dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[[i, j]] += FD_STEP;
            xm[[i, j]] -= FD_STEP;
            let numeric = (dot(&xp) - dot(&xm)) / (2.0 * FD_STEP);
            let analytic = up.input_grad[[i, j]];
            if !fd_close(analytic, numeric) {
                return Err(format!("input [{i},{j}]: analytic {analytic}, numeric {numeric}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Gradient checks on `nets` random networks; returns the component count.
pub fn gradient_check_many(nets: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0;
    for _ in 0..nets {
        let mlp = random_net(&mut rng);
        total += gradient_check(&mlp, &mut rng)?;
    }
    Ok(total)
}

pub fn chi_square(counts: &[usize], expected: &[f64]) -> f64 {
    counts.iter().zip(expected).map(|(&c, &e)| (c as f64 - e).powi(2) / e).sum()
}

pub fn counts(indices: &[usize], n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for &i in indices {
        c[i] += 1;
    }
    c
}

pub fn linear_partner(phi: f64, omega: f64) -> f64 {
    -2.0 * phi - omega
}

pub fn linear_partner_samples(n: usize, seed: u64) -> Vec<IdExperience> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = pendulum::reset(&mut rng);
            IdExperience {
                state: vec![s.angle, s.angular_velocity],
                partner_control: vec![linear_partner(s.angle, s.angular_velocity)],
            }
        })
        .collect()
}

/// 2000 reset-distribution samples of the linear partner, 500 updates.
/// Returns held-out RMSE and the prediction at (0.1, 0).
pub fn linear_partner_trial(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut id = PartnerIdentifier::new(2, 1, IdentificationConfig::default(), &mut rng).unwrap();
    for e in linear_partner_samples(2000, 1000 + seed) {
        id.record(&e.state, &e.partner_control);
    }
    for _ in 0..500 {
        id.update(&mut rng).unwrap();
    }
    let held_out = linear_partner_samples(1000, 5000 + seed);
    (id.evaluate_mse(&held_out).sqrt(), id.predict(&[0.1, 0.0])[0])
}

pub const BANDIT_OPTIMUM: f64 = 0.5;

/// One state, one action, reward -(u - 0.5)^2; 5000 explore/observe/train
/// steps. Returns the final deterministic control.
pub fn bandit_trial(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = DdpgAgent::new(1, 5.0, DdpgConfig::default(), &mut rng).unwrap();
    let s = [0.0];
    for _ in 0..5000 {
        let u = agent.act_explore(&s, &mut rng);
        agent.observe(RlTransition {
            state: s.to_vec(),
            control: u,
            reward: -(u - BANDIT_OPTIMUM).powi(2),
            next_state: s.to_vec(),
        });
        agent.train_step(&mut rng).unwrap();
    }
    agent.act(&s)
}
