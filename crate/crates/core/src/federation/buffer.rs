use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dynamics::Segment;
use crate::envs::Transition;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub transition: Transition,
    pub episode: u64,
}

/// Bounded FIFO of transitions tagged with their episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), entries: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, transition: Transition, episode: u64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(BufferEntry { transition, episode });
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&BufferEntry> {
        self.entries.get(i)
    }

    /// Start indices of every run of `horizon` consecutive transitions from a
    /// single episode.
    pub fn segment_starts(&self, horizon: usize) -> Vec<usize> {
        if horizon == 0 || self.entries.len() < horizon {
            return Vec::new();
        }
        (0..=self.entries.len() - horizon)
            .filter(|&i| self.entries[i].episode == self.entries[i + horizon - 1].episode)
            .collect()
    }

    pub fn segment_at(&self, start: usize, horizon: usize) -> Segment {
        let first = &self.entries[start].transition;
        let run = self.entries.range(start..start + horizon);
        let (actions, next_states) = run.map(|e| (e.transition.action.clone(), e.transition.next_state.clone())).unzip();
        Segment { start: first.state.clone(), actions, next_states }
    }

    /// `n` segments drawn uniformly with replacement from `starts`.
    pub fn sample_segments(&self, starts: &[usize], horizon: usize, n: usize, rng: &mut Rng) -> Vec<Segment> {
        (0..n).map(|_| self.segment_at(starts[rng.random_range(0..starts.len())], horizon)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(x: f64) -> Transition {
        Transition { state: vec![x], action: vec![0.0], reward: 0.0, next_state: vec![x + 1.0], terminal: false }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i as f64), 0);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0).unwrap().transition.state, vec![2.0]);
    }

    #[test]
    fn segments_stay_inside_episodes() {
        let mut b = ReplayBuffer::new(10);
        for (i, ep) in [0, 0, 0, 1, 1, 2].iter().enumerate() {
            b.push(t(i as f64), *ep);
        }
        assert_eq!(b.segment_starts(2), vec![0, 1, 3]);
        assert_eq!(b.segment_starts(3), vec![0]);
        let s = b.segment_at(3, 2);
        assert_eq!(s.start, vec![3.0]);
        assert_eq!(s.next_states, vec![vec![4.0], vec![5.0]]);
    }
}
