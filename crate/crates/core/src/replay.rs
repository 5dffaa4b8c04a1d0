//! Bounded FIFO experience stores with uniform, combined (CER) and
//! prioritized (PER) sampling.
//!
//! The same container backs the identification buffer and the RL replay
//! buffer. Capacity is counted in items; pushing into a full buffer evicts the
//! oldest item. Uniform and CER draws are with replacement.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PalError, Result};

/// Smallest priority a prediction error is mapped to.
pub const PRIORITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingStrategy {
    Uniform,
    Cer,
    Per { alpha: f64 },
}

impl SamplingStrategy {
    pub const DEFAULT_PER_ALPHA: f64 = 0.6;

    pub fn is_prioritized(&self) -> bool {
        matches!(self, SamplingStrategy::Per { .. })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
    priorities: Option<VecDeque<f64>>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity), priorities: None }
    }

    /// Buffer that keeps one positive priority per item.
    pub fn prioritized(capacity: usize) -> Self {
        let mut buf = Self::new(capacity);
        buf.priorities = Some(VecDeque::with_capacity(capacity));
        buf
    }

    pub fn for_strategy(capacity: usize, strategy: SamplingStrategy) -> Self {
        if strategy.is_prioritized() {
            Self::prioritized(capacity)
        } else {
            Self::new(capacity)
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_prioritized(&self) -> bool {
        self.priorities.is_some()
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    pub fn newest(&self) -> Option<&T> {
        self.items.back()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &T> + '_ {
        self.items.iter()
    }

    pub fn priorities(&self) -> Option<&VecDeque<f64>> {
        self.priorities.as_ref()
    }

    pub fn push(&mut self, item: T) {
        self.push_with_priority(item, None).expect("no explicit priority given");
    }

    /// Appends `item`. In a prioritized buffer a missing priority defaults to
    /// the current maximum (1 when empty). The priority is ignored otherwise.
    pub fn push_with_priority(&mut self, item: T, priority: Option<f64>) -> Result<()> {
        if let Some(p) = priority {
            if !(p > 0.0 && p.is_finite()) {
                return Err(PalError::Contract(format!("priority must be positive, got {p}")));
            }
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
            if let Some(pr) = self.priorities.as_mut() {
                pr.pop_front();
            }
        }
        self.items.push_back(item);
        if let Some(pr) = self.priorities.as_mut() {
            let p = priority.unwrap_or_else(|| pr.iter().copied().reduce(f64::max).unwrap_or(1.0));
            pr.push_back(p);
        }
        Ok(())
    }

    /// Sets the priority of the item at `index` to `max(priority, PRIORITY_FLOOR)`.
    pub fn update_priority(&mut self, index: usize, priority: f64) -> Result<()> {
        let len = self.items.len();
        let pr = self
            .priorities
            .as_mut()
            .ok_or_else(|| PalError::Contract("buffer has no priorities".into()))?;
        if index >= len {
            return Err(PalError::Contract(format!("priority index {index} out of range {len}")));
        }
        if !priority.is_finite() || priority < 0.0 {
            return Err(PalError::Contract(format!("invalid priority {priority}")));
        }
        pr[index] = priority.max(PRIORITY_FLOOR);
        Ok(())
    }

    /// `m` indices drawn independently and uniformly.
    pub fn sample_uniform_indices<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<usize>> {
        self.check_sample(m)?;
        let n = self.items.len();
        Ok((0..m).map(|_| rng.random_range(0..n)).collect())
    }

    /// Newest index first, followed by `m - 1` uniform draws.
    pub fn sample_cer_indices<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<usize>> {
        self.check_sample(m)?;
        let n = self.items.len();
        let mut out = Vec::with_capacity(m);
        out.push(n - 1);
        out.extend((1..m).map(|_| rng.random_range(0..n)));
        Ok(out)
    }

    /// Newest index plus `m - 1` distinct others, drawn without replacement.
    /// `m` is capped at the buffer length.
    pub fn sample_cer_distinct_indices<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        self.check_sample(m)?;
        let n = self.items.len();
        let m = m.min(n);
        let mut out = Vec::with_capacity(m);
        out.push(n - 1);
        out.extend(index::sample(rng, n - 1, m - 1));
        Ok(out)
    }

    /// Proportional prioritization: index `i` with probability `p_i^alpha / sum_j p_j^alpha`.
    pub fn sample_per_indices<R: Rng + ?Sized>(
        &self,
        m: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        self.check_sample(m)?;
        let pr = self
            .priorities
            .as_ref()
            .ok_or_else(|| PalError::Contract("PER sampling needs a prioritized buffer".into()))?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(PalError::Contract(format!("PER alpha must be non-negative, got {alpha}")));
        }
        // Normalise by the maximum before exponentiation so large alpha stays finite.
        let max = pr.iter().copied().fold(0.0_f64, f64::max);
        let mut cumulative = Vec::with_capacity(pr.len());
        let mut total = 0.0;
        for &p in pr {
            total += (p / max).powf(alpha);
            cumulative.push(total);
        }
        let n = cumulative.len();
        Ok((0..m)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cumulative.partition_point(|&c| c <= u).min(n - 1)
            })
            .collect())
    }

    /// Indices according to `strategy` (with replacement).
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        strategy: SamplingStrategy,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        match strategy {
            SamplingStrategy::Uniform => self.sample_uniform_indices(m, rng),
            SamplingStrategy::Cer => self.sample_cer_indices(m, rng),
            SamplingStrategy::Per { alpha } => self.sample_per_indices(m, alpha, rng),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<&T>> {
        Ok(self.sample_uniform_indices(m, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }

    pub fn sample_cer<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<&T>> {
        Ok(self.sample_cer_indices(m, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }

    /// PER draw returning `(item, index)` pairs so priorities can be updated afterwards.
    pub fn sample_per<R: Rng + ?Sized>(
        &self,
        m: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Vec<(&T, usize)>> {
        Ok(self
            .sample_per_indices(m, alpha, rng)?
            .into_iter()
            .map(|i| (&self.items[i], i))
            .collect())
    }

    fn check_sample(&self, m: usize) -> Result<()> {
        if self.items.is_empty() {
            return Err(PalError::EmptyBuffer);
        }
        if m == 0 {
            return Err(PalError::Contract("sample size must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn filled(cap: usize, n: usize) -> ReplayBuffer<usize> {
        let mut b = ReplayBuffer::new(cap);
        for i in 1..=n {
            b.push(i);
        }
        b
    }

    #[test]
    fn fifo_eviction() {
        let b = filled(3, 4);
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
        let b = filled(3, 1);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn per_default_priority() {
        let mut b = ReplayBuffer::prioritized(4);
        b.push('a');
        assert_eq!(b.priorities().unwrap()[0], 1.0);
        b.push_with_priority('b', Some(5.0)).unwrap();
        b.push('c');
        assert_eq!(b.priorities().unwrap()[2], 5.0);
    }

    #[test]
    fn rejects_non_positive_priority() {
        let mut b = ReplayBuffer::prioritized(4);
        assert!(matches!(b.push_with_priority(1, Some(0.0)), Err(PalError::Contract(_))));
        assert!(matches!(b.push_with_priority(1, Some(-1.0)), Err(PalError::Contract(_))));
        assert!(b.is_empty());
    }

    #[test]
    fn empty_buffer_errors() {
        let b: ReplayBuffer<u8> = ReplayBuffer::prioritized(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample_uniform(1, &mut rng), Err(PalError::EmptyBuffer)));
        assert!(matches!(b.sample_cer(1, &mut rng), Err(PalError::EmptyBuffer)));
        assert!(matches!(b.sample_per(1, 0.6, &mut rng), Err(PalError::EmptyBuffer)));
    }

    #[test]
    fn per_requires_priorities() {
        let b = filled(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample_per(1, 0.6, &mut rng), Err(PalError::Contract(_))));
    }

    #[test]
    fn single_item_uniform() {
        let b = filled(5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(b.sample_uniform(5, &mut rng).unwrap(), vec![&1; 5]);
        assert_eq!(b.sample_cer(1, &mut rng).unwrap(), vec![&1]);
    }

    #[test]
    fn cer_always_contains_newest() {
        let b = filled(10, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s = b.sample_cer(2, &mut rng).unwrap();
            assert!(s.contains(&&5));
            assert_eq!(b.sample_cer(1, &mut rng).unwrap(), vec![&5]);
        }
    }

    #[test]
    fn cer_distinct_has_no_repeats() {
        let b = filled(50, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut idx = b.sample_cer_distinct_indices(10, &mut rng).unwrap();
        assert_eq!(idx[0], 29);
        idx.sort();
        idx.dedup();
        assert_eq!(idx.len(), 10);
        assert_eq!(b.sample_cer_distinct_indices(100, &mut rng).unwrap().len(), 30);
    }

    #[test]
    fn priority_update_floor_and_order() {
        let mut b = ReplayBuffer::prioritized(4);
        for i in 0..3 {
            b.push(i);
        }
        b.update_priority(1, 0.0).unwrap();
        assert_eq!(b.priorities().unwrap()[1], PRIORITY_FLOOR);
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(matches!(b.update_priority(3, 1.0), Err(PalError::Contract(_))));
    }

    #[test]
    fn large_alpha_concentrates_on_top_priority() {
        let mut b = ReplayBuffer::prioritized(8);
        for i in 0..5 {
            b.push(i);
        }
        b.update_priority(2, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = b.sample_per(1000, 50.0, &mut rng).unwrap();
        assert!(draws.iter().all(|&(&item, idx)| item == 2 && idx == 2));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let b = filled(10, 10);
        let a = b.sample_uniform_indices(64, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let c = b.sample_uniform_indices(64, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, c);
    }

    proptest! {
        #[test]
        fn contents_are_last_pushed(cap in 1usize..20, n in 0usize..60) {
            let b = filled(cap, n);
            prop_assert!(b.len() <= cap);
            let expected: Vec<usize> = (1..=n).skip(n.saturating_sub(cap)).collect();
            prop_assert_eq!(b.iter().copied().collect::<Vec<_>>(), expected);
        }

        #[test]
        fn priorities_track_items(cap in 1usize..10, ps in proptest::collection::vec(0.01f64..10.0, 0..30)) {
            let mut b = ReplayBuffer::prioritized(cap);
            for (i, p) in ps.iter().enumerate() {
                b.push_with_priority(i, Some(*p)).unwrap();
            }
            let pr = b.priorities().unwrap();
            prop_assert_eq!(pr.len(), b.len());
            prop_assert!(pr.iter().all(|&p| p > 0.0));
            let tail: Vec<f64> = ps.iter().copied().skip(ps.len().saturating_sub(cap)).collect();
            prop_assert_eq!(pr.iter().copied().collect::<Vec<_>>(), tail);
        }
    }
}
