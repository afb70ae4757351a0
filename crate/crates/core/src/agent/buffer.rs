use super::AgentError;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Mini-batch in row-major matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn from_records(records: &[TransitionRecord]) -> Result<Self, AgentError> {
        let first = records
            .first()
            .ok_or(AgentError::InsufficientData { have: 0, need: 1 })?;
        let (obs_dim, action_dim) = (first.obs.len(), first.action.len());
        let mut b = Self {
            len: 0,
            obs_dim,
            action_dim,
            obs: Vec::with_capacity(records.len() * obs_dim),
            actions: Vec::with_capacity(records.len() * action_dim),
            rewards: Vec::with_capacity(records.len()),
            next_obs: Vec::with_capacity(records.len() * obs_dim),
            terminals: Vec::with_capacity(records.len()),
        };
        for r in records {
            if r.obs.len() != obs_dim || r.next_obs.len() != obs_dim || r.action.len() != action_dim
            {
                return Err(AgentError::InvalidConfig(
                    "records in a batch differ in shape".into(),
                ));
            }
            b.obs.extend_from_slice(&r.obs);
            b.actions.extend_from_slice(&r.action);
            b.rewards.push(r.reward);
            b.next_obs.extend_from_slice(&r.next_obs);
            b.terminals.push(r.terminal);
            b.len += 1;
        }
        Ok(b)
    }
}

/// FIFO ring of transitions with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    cursor: usize,
    len: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    terminals: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self, AgentError> {
        if capacity == 0 || obs_dim == 0 || action_dim == 0 {
            return Err(AgentError::InvalidConfig(
                "buffer capacity and dimensions must be >= 1".into(),
            ));
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            cursor: 0,
            len: 0,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            terminals: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a record, overwriting the oldest one once full.
    pub fn push(&mut self, record: &TransitionRecord) -> Result<(), AgentError> {
        if record.obs.len() != self.obs_dim
            || record.next_obs.len() != self.obs_dim
            || record.action.len() != self.action_dim
        {
            return Err(AgentError::InvalidConfig(format!(
                "transition shape ({}, {}, {}) does not match buffer ({}, {})",
                record.obs.len(),
                record.action.len(),
                record.next_obs.len(),
                self.obs_dim,
                self.action_dim
            )));
        }
        let finite = record
            .obs
            .iter()
            .chain(&record.action)
            .chain(&record.next_obs)
            .all(|x| x.is_finite())
            && record.reward.is_finite();
        if !finite {
            return Err(AgentError::InvalidConfig(
                "transition has non-finite entries".into(),
            ));
        }
        if self.len < self.capacity {
            self.obs.extend_from_slice(&record.obs);
            self.actions.extend_from_slice(&record.action);
            self.rewards.push(record.reward);
            self.next_obs.extend_from_slice(&record.next_obs);
            self.terminals.push(record.terminal);
            self.len += 1;
        } else {
            let i = self.cursor;
            self.obs[i * self.obs_dim..][..self.obs_dim].copy_from_slice(&record.obs);
            self.actions[i * self.action_dim..][..self.action_dim].copy_from_slice(&record.action);
            self.rewards[i] = record.reward;
            self.next_obs[i * self.obs_dim..][..self.obs_dim].copy_from_slice(&record.next_obs);
            self.terminals[i] = record.terminal;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Record at storage slot `i` (not insertion order once wrapped).
    pub fn get(&self, i: usize) -> Option<TransitionRecord> {
        (i < self.len).then(|| TransitionRecord {
            obs: self.obs[i * self.obs_dim..][..self.obs_dim].to_vec(),
            action: self.actions[i * self.action_dim..][..self.action_dim].to_vec(),
            reward: self.rewards[i],
            next_obs: self.next_obs[i * self.obs_dim..][..self.obs_dim].to_vec(),
            terminal: self.terminals[i],
        })
    }

    /// Records from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = TransitionRecord> + '_ {
        let start = if self.len < self.capacity {
            0
        } else {
            self.cursor
        };
        (0..self.len).map(move |k| self.get((start + k) % self.len).expect("in range"))
    }

    /// `n` uniform draws with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Batch, AgentError> {
        if n == 0 || self.len < n {
            return Err(AgentError::InsufficientData {
                have: self.len,
                need: n.max(1),
            });
        }
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.len)).collect();
        Ok(self.gather(&idx))
    }

    fn gather(&self, idx: &[usize]) -> Batch {
        let (od, ad) = (self.obs_dim, self.action_dim);
        let mut b = Batch {
            len: idx.len(),
            obs_dim: od,
            action_dim: ad,
            obs: Vec::with_capacity(idx.len() * od),
            actions: Vec::with_capacity(idx.len() * ad),
            rewards: Vec::with_capacity(idx.len()),
            next_obs: Vec::with_capacity(idx.len() * od),
            terminals: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            b.obs.extend_from_slice(&self.obs[i * od..][..od]);
            b.actions.extend_from_slice(&self.actions[i * ad..][..ad]);
            b.rewards.push(self.rewards[i]);
            b.next_obs.extend_from_slice(&self.next_obs[i * od..][..od]);
            b.terminals.push(self.terminals[i]);
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(k: usize) -> TransitionRecord {
        TransitionRecord {
            obs: vec![k as f64],
            action: vec![0.0],
            reward: k as f64,
            next_obs: vec![k as f64 + 1.0],
            terminal: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(3, 1, 1).unwrap();
        buf.push(&record(1)).unwrap();
        assert_eq!(buf.len(), 1);
        for k in 2..=4 {
            buf.push(&record(k)).unwrap();
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.iter_ordered().map(|r| r.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_edge_cases() {
        let mut buf = ReplayBuffer::new(10, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample(1, &mut rng),
            Err(AgentError::InsufficientData { .. })
        ));
        buf.push(&record(7)).unwrap();
        let b = buf.sample(1, &mut rng).unwrap();
        assert_eq!(b, Batch::from_records(&[record(7)]).unwrap());
        assert!(buf.sample(2, &mut rng).is_err());
    }

    #[test]
    fn seeded_sampling_repeats() {
        let mut buf = ReplayBuffer::new(100, 1, 1).unwrap();
        for k in 0..50 {
            buf.push(&record(k)).unwrap();
        }
        let a = buf.sample(16, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = buf.sample(16, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed_records() {
        let mut buf = ReplayBuffer::new(4, 1, 1).unwrap();
        let mut r = record(0);
        r.action = vec![0.0, 1.0];
        assert!(buf.push(&r).is_err());
        let mut r = record(0);
        r.reward = f64::NAN;
        assert!(buf.push(&r).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let mut buf = ReplayBuffer::new(1000, 1, 1).unwrap();
        for k in 0..1000 {
            buf.push(&record(k)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut total = 0.0;
        for _ in 0..10 {
            total += buf
                .sample(1000, &mut rng)
                .unwrap()
                .rewards
                .iter()
                .sum::<f64>();
        }
        let mean = total / 1e4;
        // rewards are 0..999: mean 499.5, variance (1000² − 1)/12
        let sd = ((1000.0f64 * 1000.0 - 1.0) / 12.0).sqrt();
        assert!((mean - 499.5).abs() < 5.0 * sd / 100.0);
    }
}
