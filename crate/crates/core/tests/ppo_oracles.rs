use navgait::env::{Environment, ObservationLayout, StepInfo, StepResult, TerminationReason};
use navgait::nnet::{init_params, AdamConfig, MlpSpec, ParameterSet};
use navgait::ppo::{
    clipped_surrogate, collect_rollout, compute_gae, gaussian_log_prob, loss_gradients,
    normalize_advantages, update, AdamStates, Batch, GaussianPolicy, PpoConfig, RolloutBuffer,
    Transition,
};
use navgait::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transition(reward: f64, value: f64, terminated: bool, truncated: bool, tv: f64) -> Transition {
    Transition {
        obs: vec![],
        action: vec![],
        log_prob: 0.0,
        reward,
        value,
        terminated,
        truncated: truncated && !terminated,
        truncation_value: tv,
    }
}

fn random_buffer(rng: &mut ChaCha8Rng, len: usize) -> RolloutBuffer {
    let ts = (0..len)
        .map(|_| {
            transition(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_bool(0.2),
                rng.gen_bool(0.1),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    RolloutBuffer::from_transitions(ts, rng.gen_range(-1.0..1.0))
}

/// `A_t = Σ_l (γλ)^l δ_{t+l}` summed explicitly up to the end of the episode.
fn brute_force_gae(buf: &RolloutBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
    let ts = buf.transitions();
    let n = ts.len();
    let delta = |t: usize| {
        let tr = &ts[t];
        let next = if tr.terminated {
            0.0
        } else if tr.truncated {
            tr.truncation_value
        } else if t + 1 == n {
            buf.bootstrap_value.unwrap()
        } else {
            ts[t + 1].value
        };
        tr.reward + gamma * next - tr.value
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..(n - t) {
                sum += (gamma * lambda).powi(l as i32) * delta(t + l);
                if ts[t + l].terminated || ts[t + l].truncated {
                    break;
                }
            }
            sum
        })
        .collect()
}

#[test]
fn gae_matches_brute_force_on_random_buffers() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let len = rng.gen_range(1..=20);
        let buf = random_buffer(&mut rng, len);
        let (adv, ret) = compute_gae(&buf, 0.99, 0.95).unwrap();
        let oracle = brute_force_gae(&buf, 0.99, 0.95);
        for t in 0..len {
            assert!((adv[t] - oracle[t]).abs() < 1e-10, "{} vs {}", adv[t], oracle[t]);
            assert!((ret[t] - adv[t] - buf.transitions()[t].value).abs() < 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn clipping_is_pessimistic(ratio in 1e-3f64..5.0, adv in -5.0f64..5.0, eps in 0.01f64..0.5) {
        let s = clipped_surrogate(ratio, adv, eps);
        prop_assert!(s <= ratio * adv + 1e-15);
    }

    #[test]
    fn normalized_advantages_have_zero_mean_unit_std(
        adv in prop::collection::vec(-100.0f64..100.0, 2..300)
    ) {
        let n = adv.len() as f64;
        let m = adv.iter().sum::<f64>() / n;
        let sd = (adv.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
        prop_assume!(sd > 1e-6);
        let z = normalize_advantages(&adv);
        let zm = z.iter().sum::<f64>() / n;
        let zs = (z.iter().map(|a| (a - zm).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(zm.abs() < 1e-9);
        prop_assert!((zs - 1.0).abs() < 1e-6);
    }
}

fn small_policy() -> (GaussianPolicy, ParameterSet) {
    let mut p = GaussianPolicy::new(MlpSpec::actor(3, &[6, 5], 2).unwrap(), 11);
    // enlarge the output layer so the mean depends visibly on the weights
    for w in p.mean_net.weights_mut(2) {
        *w *= 60.0;
    }
    // nonzero biases keep ReLU pre-activations off the kink at exactly 0,
    // where central differences see half a slope
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for l in 0..2 {
        for b in p.mean_net.bias_mut(l) {
            *b = rng.gen_range(0.05..0.3);
        }
    }
    p.log_std = vec![-0.4, 0.1];
    let critic = init_params(&MlpSpec::critic(3, &[6, 5]).unwrap(), 12);
    (p, critic)
}

/// Batch sampled from the policy itself, so every ratio starts at 1.
fn on_policy_batch(policy: &GaussianPolicy, n: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Batch::default();
    for _ in 0..n {
        let obs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, lp) = policy.sample_action(&obs, &mut rng).unwrap();
        b.obs.push(obs);
        b.actions.push(a);
        b.log_probs.push(lp);
        b.values.push(0.0);
        b.advantages.push(rng.gen_range(-3.0..3.0));
        b.returns.push(rng.gen_range(-3.0..3.0));
    }
    b
}

/// `mean(Â · log π(a|s))` for the REINFORCE-with-baseline oracle.
fn pg_objective(policy: &GaussianPolicy, batch: &Batch) -> f64 {
    let adv = normalize_advantages(&batch.advantages);
    let n = batch.len() as f64;
    (0..batch.len())
        .map(|i| adv[i] * gaussian_log_prob(&policy.mean(&batch.obs[i]).unwrap(), &policy.log_std, &batch.actions[i]))
        .sum::<f64>()
        / n
}

fn check_against_policy_gradient(clip_eps: f64) {
    let (policy, critic) = small_policy();
    let batch = on_policy_batch(&policy, 40, 5);
    let config = PpoConfig {
        clip_eps,
        ..PpoConfig::default()
    };
    let all: Vec<usize> = (0..batch.len()).collect();
    let g = loss_gradients(&policy, &critic, &batch, &all, &config).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..policy.mean_net.len() {
        let mut p = policy.clone();
        p.mean_net.as_mut_slice()[i] += h;
        let mut m = policy.clone();
        m.mean_net.as_mut_slice()[i] -= h;
        let fd = (pg_objective(&p, &batch) - pg_objective(&m, &batch)) / (2.0 * h);
        // the loss descends the negated objective
        worst = worst.max((g.actor.as_slice()[i] + fd).abs());
        scale = scale.max(fd.abs());
    }
    for j in 0..policy.log_std.len() {
        let mut p = policy.clone();
        p.log_std[j] += h;
        let mut m = policy.clone();
        m.log_std[j] -= h;
        let fd = (pg_objective(&p, &batch) - pg_objective(&m, &batch)) / (2.0 * h);
        worst = worst.max((g.log_std[j] + fd).abs());
        scale = scale.max(fd.abs());
    }
    assert!(scale > 1e-3, "degenerate test: gradient scale {}", scale);
    assert!(worst < 1e-6 * scale.max(1.0), "max deviation {} (scale {})", worst, scale);
}

#[test]
fn unclipped_gradient_equals_vanilla_policy_gradient() {
    check_against_policy_gradient(1e9);
}

#[test]
fn first_minibatch_gradient_is_reinforce_with_baseline() {
    check_against_policy_gradient(0.2);
}

#[test]
fn equal_advantages_leave_only_the_entropy_gradient() {
    let (policy, critic) = small_policy();
    let mut batch = on_policy_batch(&policy, 16, 6);
    batch.advantages = vec![1.7; 16];
    let config = PpoConfig {
        entropy_coef: 0.01,
        ..PpoConfig::default()
    };
    let all: Vec<usize> = (0..16).collect();
    let g = loss_gradients(&policy, &critic, &batch, &all, &config).unwrap();
    assert!(g.actor.as_slice().iter().all(|&v| v == 0.0));
    for v in &g.log_std {
        assert!((v + 0.01).abs() < 1e-15);
    }
}

#[test]
fn updates_are_deterministic() {
    let run = || {
        let (mut policy, mut critic) = small_policy();
        let batch = on_policy_batch(&policy, 100, 7);
        let mut adam = AdamStates::new(&policy, &critic, AdamConfig::default());
        let config = PpoConfig {
            minibatch_size: 32,
            ..PpoConfig::default()
        };
        let stats = update(&mut policy, &mut critic, &batch, &config, &mut adam, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        (stats, policy, critic)
    };
    let (s1, p1, c1) = run();
    let (s2, p2, c2) = run();
    assert_eq!(s1, s2);
    assert_eq!(p1, p2);
    assert_eq!(c1, c2);
    assert!(s1.approx_kl.is_finite() && s1.value_loss.is_finite());
}

#[test]
fn update_changes_parameters_and_respects_log_std_bounds() {
    let (mut policy, mut critic) = small_policy();
    policy.log_std = vec![0.999, -4.999];
    let before = policy.clone();
    let batch = on_policy_batch(&policy, 64, 8);
    let mut adam = AdamStates::new(&policy, &critic, AdamConfig { lr: 0.1, ..AdamConfig::default() });
    update(&mut policy, &mut critic, &batch, &PpoConfig::default(), &mut adam, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_ne!(policy.mean_net, before.mean_net);
    assert!(policy.log_std.iter().all(|v| (-5.0..=1.0).contains(v)));
}

/// Observation is the step count; reward is constant; episodes end after
/// `episode_len` steps, either by termination or by truncation.
struct CountingEnv {
    layout: ObservationLayout,
    t: usize,
    episode_len: usize,
    truncate: bool,
}

impl CountingEnv {
    fn new(episode_len: usize, truncate: bool) -> Self {
        Self {
            layout: ObservationLayout::new(vec![("t", 1, 1.0)]),
            t: 0,
            episode_len,
            truncate,
        }
    }
}

impl Environment for CountingEnv {
    fn name(&self) -> &'static str {
        "counting"
    }
    fn observation_layout(&self) -> &ObservationLayout {
        &self.layout
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn reward_terms(&self) -> &'static [&'static str] {
        &["constant"]
    }
    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> StepResult {
        self.t = 0;
        StepResult {
            obs: vec![0.0],
            reward: 0.0,
            terminated: false,
            truncated: false,
            info: StepInfo::default(),
        }
    }
    fn step(&mut self, _action: &[f64]) -> Result<StepResult> {
        self.t += 1;
        let end = self.t >= self.episode_len;
        Ok(StepResult {
            obs: vec![self.t as f64],
            reward: 1.0,
            terminated: end && !self.truncate,
            truncated: end && self.truncate,
            info: StepInfo {
                terms: vec![("constant", 1.0)],
                reason: (end && !self.truncate).then_some(TerminationReason::Fell),
                ..StepInfo::default()
            },
        })
    }
    fn trace_header(&self) -> &'static [&'static str] {
        &["t"]
    }
    fn trace(&self) -> Vec<f64> {
        vec![self.t as f64]
    }
}

fn tiny_agent() -> (GaussianPolicy, ParameterSet) {
    let policy = GaussianPolicy::new(MlpSpec::actor(1, &[4], 1).unwrap(), 1);
    let critic = init_params(&MlpSpec::critic(1, &[4]).unwrap(), 2);
    (policy, critic)
}

#[test]
fn always_terminating_env_flags_every_transition() {
    let (policy, critic) = tiny_agent();
    let mut env = CountingEnv::new(1, false);
    let r = collect_rollout(&mut env, &policy, &critic, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(r.buffer.len(), 5);
    assert!(r.buffer.transitions().iter().all(|t| t.terminated));
    assert_eq!(r.episodes.len(), 5);
}

#[test]
fn constant_reward_gae_is_reward_to_go_minus_value() {
    let (policy, critic) = tiny_agent();
    let mut env = CountingEnv::new(4, false);
    let r = collect_rollout(&mut env, &policy, &critic, 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (adv, _) = compute_gae(&r.buffer, 1.0, 1.0).unwrap();
    let ts = r.buffer.transitions();
    for (t, tr) in ts.iter().enumerate() {
        let step_in_episode = t % 4;
        let to_go = if t < 8 {
            (4 - step_in_episode) as f64
        } else {
            // episode cut by the horizon: bootstrap from the critic
            (10 - t) as f64 + r.buffer.bootstrap_value.unwrap()
        };
        assert!((adv[t] - (to_go - tr.value)).abs() < 1e-12, "t = {}", t);
    }
    assert_eq!(r.episodes.len(), 2);
}

#[test]
fn truncated_steps_store_the_final_state_value() {
    let (policy, critic) = tiny_agent();
    let mut env = CountingEnv::new(3, true);
    let r = collect_rollout(&mut env, &policy, &critic, 6, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let last = &r.buffer.transitions()[2];
    assert!(last.truncated && !last.terminated);
    assert_eq!(last.truncation_value, critic.predict(&[3.0]).unwrap()[0]);
    assert_eq!(r.episodes[0].reason, None);
}

#[test]
fn collection_is_seeded() {
    let (policy, critic) = tiny_agent();
    let collect = |seed| {
        let mut env = CountingEnv::new(7, true);
        collect_rollout(&mut env, &policy, &critic, 20, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
            .buffer
    };
    assert_eq!(collect(4), collect(4));
    assert_ne!(collect(4), collect(5));
}
