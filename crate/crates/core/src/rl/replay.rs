use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer; once full, each push evicts the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(4096)),
            next: 0,
            inserted: 0,
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

    /// Total pushes over the buffer's lifetime.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Transition> {
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(i: usize) -> Transition {
        Transition {
            state: vec![i as f64],
            action: 0,
            reward: i as f64,
            next_state: vec![0.0],
            done: false,
        }
    }

    proptest! {
        #[test]
        fn keeps_exactly_the_latest(capacity in 1usize..50, extra in 0usize..120) {
            let mut buf = ReplayBuffer::new(capacity);
            let total = capacity + extra;
            for i in 0..total {
                buf.push(t(i));
            }
            prop_assert_eq!(buf.len(), capacity);
            let kept: Vec<usize> = buf.iter_oldest_first().map(|x| x.reward as usize).collect();
            let expected: Vec<usize> = (total - capacity..total).collect();
            prop_assert_eq!(kept, expected);
        }
    }

    #[test]
    fn partial_fill_keeps_everything() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..4 {
            buf.push(t(i));
        }
        assert_eq!(buf.len(), 4);
        assert_eq!(buf.inserted(), 4);
        let kept: Vec<usize> = buf.iter_oldest_first().map(|x| x.reward as usize).collect();
        assert_eq!(kept, vec![0, 1, 2, 3]);
    }
}
