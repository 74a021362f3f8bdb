//! Bounded FIFO experience replay.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::SimRng;

pub const DEFAULT_CAPACITY: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

impl Experience {
    pub fn new(state: Vec<f64>, action: Vec<f64>, reward: f64, next_state: Vec<f64>) -> Result<Self> {
        if state.len() != next_state.len() {
            return Err(Error::dim(
                "experience",
                format!("state {} vs next state {}", state.len(), next_state.len()),
            ));
        }
        let finite = state
            .iter()
            .chain(&action)
            .chain(&next_state)
            .chain(std::iter::once(&reward))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                context: "experience tuple".into(),
            });
        }
        Ok(Self {
            state,
            action,
            reward,
            next_state,
        })
    }
}

/// A sampled mini-batch laid out one experience per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn from_experiences(items: &[&Experience]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (s, a) = (first.state.len(), first.action.len());
        if items.iter().any(|e| e.state.len() != s || e.action.len() != a) {
            return Err(Error::dim("batch", "experiences of mixed dimension"));
        }
        let rows = |f: &dyn Fn(&Experience) -> &[f64], width: usize| {
            Array2::from_shape_fn((items.len(), width), |(i, j)| f(items[i])[j])
        };
        Ok(Self {
            states: rows(&|e| &e.state, s),
            actions: rows(&|e| &e.action, a),
            rewards: items.iter().map(|e| e.reward).collect(),
            next_states: rows(&|e| &e.next_state, s),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, exp: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
        if self.items.len() < n || n == 0 {
            return Err(Error::InsufficientSamples {
                have: self.items.len(),
                need: n.max(1),
            });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        let picked: Vec<&Experience> = idx.iter().map(|&i| &self.items[i]).collect();
        Batch::from_experiences(&picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(tag: f64) -> Experience {
        Experience::new(vec![tag, 0.0], vec![tag], tag, vec![0.0, tag]).unwrap()
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(DEFAULT_CAPACITY).unwrap();
        for i in 0..1001 {
            buf.push(exp(i as f64));
        }
        assert_eq!(buf.len(), 1000);
        assert!(buf.iter().all(|e| e.reward != 0.0));
        assert_eq!(buf.iter().next().unwrap().reward, 1.0);
        assert_eq!(buf.iter().last().unwrap().reward, 1000.0);
    }

    #[test]
    fn under_filled_sampling_fails() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        let mut rng = SimRng::new(0, 0);
        for i in 0..5 {
            buf.push(exp(i as f64));
        }
        assert!(matches!(
            buf.sample(16, &mut rng),
            Err(Error::InsufficientSamples { have: 5, need: 16 })
        ));
        let b = buf.sample(5, &mut rng).unwrap();
        assert_eq!(b.states.dim(), (5, 2));
        assert_eq!(b.actions.dim(), (5, 1));
        for i in 0..5 {
            assert_eq!(b.states[[i, 0]], b.rewards[i]);
            assert_eq!(b.next_states[[i, 1]], b.rewards[i]);
        }
    }

    #[test]
    fn rejects_malformed_experiences() {
        assert!(Experience::new(vec![0.0], vec![0.0], 0.0, vec![0.0, 1.0]).is_err());
        assert!(Experience::new(vec![0.0], vec![f64::NAN], 0.0, vec![0.0]).is_err());
        assert!(Experience::new(vec![0.0], vec![0.0], f64::INFINITY, vec![0.0]).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for i in 0..10 {
            buf.push(exp(i as f64));
        }
        let mut rng = SimRng::new(42, 0);
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[buf.sample_indices(1, &mut rng).unwrap()[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 - 1e4).abs() <= 0.05 * 1e4, "{counts:?}");
        }
    }
}
