use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentTrial, deg_to_action};

/// One stored trial in network units: per-fixation detector outputs and,
/// for every fixation but the last, the saccade taken and its reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTrial {
    pub fix_pred: Vec<[f64; 2]>,
    pub target_pred: Vec<[f64; 2]>,
    /// Whether the saccade from each fixation followed a detection.
    pub detection: Vec<bool>,
    pub actions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
}

impl StoredTrial {
    pub fn from_agent_trial(t: &AgentTrial) -> Self {
        let mut s = Self { fix_pred: Vec::new(), target_pred: Vec::new(), detection: Vec::new(), actions: Vec::new(), rewards: Vec::new() };
        for step in &t.steps {
            s.fix_pred.push(deg_to_action(step.detector.fix_loc_pred_deg));
            s.target_pred.push(deg_to_action(step.detector.target_abs_pred()));
            s.detection.push(step.detector.detected());
            if let Some(next) = step.next {
                s.actions.push(deg_to_action(next));
                s.rewards.push(step.reward);
            }
        }
        s
    }

    pub fn fixations(&self) -> usize {
        self.fix_pred.len()
    }

    pub fn transitions(&self) -> usize {
        self.actions.len()
    }
}

/// Fixed-capacity ring of trials with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<(u64, T)>,
    next: usize,
    pushed: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), next: 0, pushed: 0 }
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

    /// Number of items ever pushed.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, item: T) {
        let id = self.pushed;
        self.pushed += 1;
        if self.items.len() < self.capacity {
            self.items.push((id, item));
        } else {
            self.items[self.next] = (id, item);
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform draw; returns the item's push index alongside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(u64, &T)> {
        if self.items.is_empty() {
            return None;
        }
        let (id, item) = &self.items[rng.random_range(0..self.items.len())];
        Some((*id, item))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..7u32 {
            b.push(i);
        }
        assert_eq!(b.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (id, &v) = b.sample(&mut rng).unwrap();
            assert!(id >= 4 && v as u64 == id);
        }
    }

    #[test]
    fn empty_sample_is_none() {
        let b: ReplayBuffer<u8> = ReplayBuffer::new(2);
        assert!(b.sample(&mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }
}
