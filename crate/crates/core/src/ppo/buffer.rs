use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Critic value of the final observation of a truncated episode. Ignored
    /// unless `truncated` is set.
    pub truncation_value: f64,
}

/// Fixed-capacity sequence of transitions from one environment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    capacity: usize,
    transitions: Vec<Transition>,
    /// Critic value of the state following the last transition.
    pub bootstrap_value: Option<f64>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            transitions: Vec::with_capacity(capacity),
            bootstrap_value: None,
        }
    }

    pub fn from_transitions(transitions: Vec<Transition>, bootstrap_value: f64) -> Self {
        Self {
            capacity: transitions.len(),
            transitions,
            bootstrap_value: Some(bootstrap_value),
        }
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if self.is_full() {
            return Err(Error::Shape(format!("rollout buffer full at {}", self.capacity)));
        }
        if !t.log_prob.is_finite() {
            return Err(Error::NonFinite(format!("log_prob {}", t.log_prob)));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.transitions.len() == self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }
}

/// Generalized advantage estimates and returns.
///
/// A terminated step bootstraps nothing; a truncated step bootstraps from its
/// stored `truncation_value`. Either one cuts the recursion, since the next
/// transition belongs to a fresh episode.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, gae_lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !buffer.is_full() {
        return Err(Error::Shape(format!(
            "advantages need a full buffer ({} of {})",
            buffer.len(),
            buffer.capacity()
        )));
    }
    let bootstrap = buffer
        .bootstrap_value
        .ok_or_else(|| Error::Shape("rollout buffer has no bootstrap value".into()))?;
    let ts = buffer.transitions();
    let n = ts.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let tr = &ts[t];
        let next_value = if tr.terminated {
            0.0
        } else if tr.truncated {
            tr.truncation_value
        } else if t + 1 < n {
            ts[t + 1].value
        } else {
            bootstrap
        };
        let carry = if tr.terminated || tr.truncated { 0.0 } else { 1.0 };
        let delta = tr.reward + gamma * next_value - tr.value;
        next_adv = delta + gamma * gae_lambda * carry * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(ts).map(|(a, tr)| a + tr.value).collect();
    Ok((adv, returns))
}

/// Training samples from one or more buffers, concatenated in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn from_buffers(buffers: &[RolloutBuffer], gamma: f64, gae_lambda: f64) -> Result<Self> {
        let mut b = Batch::default();
        for buf in buffers {
            let (adv, ret) = compute_gae(buf, gamma, gae_lambda)?;
            for t in buf.transitions() {
                b.obs.push(t.obs.clone());
                b.actions.push(t.action.clone());
                b.log_probs.push(t.log_prob);
                b.values.push(t.value);
            }
            b.advantages.extend(adv);
            b.returns.extend(ret);
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(reward: f64, value: f64, terminated: bool) -> Transition {
        Transition {
            obs: vec![],
            action: vec![],
            log_prob: 0.0,
            reward,
            value,
            terminated,
            truncated: false,
            truncation_value: 0.0,
        }
    }

    #[test]
    fn reward_to_go() {
        let buf = RolloutBuffer::from_transitions(
            vec![tr(1.0, 0.0, false), tr(1.0, 0.0, false), tr(1.0, 0.0, true)],
            0.0,
        );
        let (adv, ret) = compute_gae(&buf, 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn zero_case() {
        let buf = RolloutBuffer::from_transitions(vec![tr(0.0, 0.0, false); 5], 0.0);
        let (adv, _) = compute_gae(&buf, 0.99, 0.95).unwrap();
        assert!(adv.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn truncation_bootstraps_stored_value() {
        let mut t0 = tr(1.0, 0.5, false);
        t0.truncated = true;
        t0.truncation_value = 2.0;
        let buf = RolloutBuffer::from_transitions(vec![t0, tr(7.0, 100.0, false)], 0.0);
        let (adv, _) = compute_gae(&buf, 0.9, 0.8).unwrap();
        assert!((adv[0] - (1.0 + 0.9 * 2.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn partial_buffer_rejected() {
        let mut buf = RolloutBuffer::new(3);
        buf.push(tr(0.0, 0.0, false)).unwrap();
        buf.bootstrap_value = Some(0.0);
        assert!(compute_gae(&buf, 0.99, 0.95).is_err());
        let mut bad = tr(0.0, 0.0, false);
        bad.log_prob = f64::NAN;
        assert!(buf.push(bad).is_err());
    }
}
