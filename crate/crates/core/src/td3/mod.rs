//! Self-contained TD3 learner: small actor and twin critics, replay buffer,
//! target networks with Polyak averaging, delayed policy updates and target
//! policy smoothing. Fully sequential and deterministic for a fixed seed.

mod checkpoint;
mod replay;

pub use checkpoint::{
    load_network, load_networks, save_networks, CheckpointError, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use replay::{ReplayBuffer, Transition};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::env::{CrowdNavEnv, Terminal};
use crate::nn::{Adam, Mlp};
use crate::seeding::derive_seed;
use crate::world::{Command, MAX_ANGULAR_VEL, MAX_LINEAR_VEL};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at environment step {step} (critic1 {critic1}, critic2 {critic2})")]
    NonFiniteLoss { step: u64, critic1: f32, critic2: f32 },
}

/// Per-dimension action bounds. Networks operate in the normalized
/// `[-1, 1]` box; scaling happens at the environment boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpace {
    pub low: Vec<f32>,
    pub high: Vec<f32>,
}

impl ActionSpace {
    pub fn new(low: Vec<f32>, high: Vec<f32>) -> Self {
        assert_eq!(low.len(), high.len());
        assert!(!low.is_empty());
        assert!(low.iter().zip(&high).all(|(l, h)| l < h), "need low < high per dimension");
        Self { low, high }
    }

    /// The navigation action space: linear [0, 0.22] m/s, angular [-2, 2] rad/s.
    pub fn nav() -> Self {
        Self::new(
            vec![0.0, -(MAX_ANGULAR_VEL as f32)],
            vec![MAX_LINEAR_VEL as f32, MAX_ANGULAR_VEL as f32],
        )
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    /// Affine map from `[-1, 1]` to `[low, high]`.
    pub fn scale(&self, normalized: &[f32]) -> Vec<f32> {
        normalized
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&a, (&l, &h))| (l + (a + 1.0) * 0.5 * (h - l)).clamp(l, h))
            .collect()
    }

    pub fn unscale(&self, physical: &[f32]) -> Vec<f32> {
        physical
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&p, (&l, &h))| ((p - l) / (h - l) * 2.0 - 1.0).clamp(-1.0, 1.0))
            .collect()
    }

    pub fn contains(&self, physical: &[f32]) -> bool {
        physical.len() == self.dim()
            && physical
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(&p, (&l, &h))| p >= l - 1e-6 && p <= h + 1e-6)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Td3Config {
    pub gamma: f32,
    pub tau: f32,
    pub policy_delay: u64,
    pub target_noise: f32,
    pub target_noise_clip: f32,
    pub exploration_noise: f32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: u64,
    pub episodes: u64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            exploration_noise: 0.1,
            batch_size: 100,
            learning_rate: 3e-4,
            warmup_steps: 1000,
            episodes: 3000,
            buffer_capacity: 1_000_000,
            hidden: vec![256, 256],
            seed: 0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if self.policy_delay == 0 {
            return Err("policy_delay must be >= 1".into());
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err("need buffer_capacity >= batch_size >= 1".into());
        }
        if self.learning_rate <= 0.0 {
            return Err("learning_rate must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err("hidden layers must be non-empty and non-zero".into());
        }
        Ok(())
    }
}

/// What the learner needs from an environment. Actions arrive in physical
/// units; observations are flat `f32` vectors.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn reset(&mut self) -> Vec<f32>;
    fn step(&mut self, action: &[f32]) -> EnvStep;
}

#[derive(Clone, Debug)]
pub struct EnvStep {
    pub obs: Vec<f32>,
    pub reward: f32,
    /// Real terminal state (bootstrapping stops).
    pub terminal: bool,
    /// Episode cut off by a step cap; the value still bootstraps.
    pub truncated: bool,
    pub outcome: Option<&'static str>,
}

#[derive(Copy, Clone, Debug)]
pub struct UpdateStats {
    pub critic1_loss: f32,
    pub critic2_loss: f32,
    pub actor_loss: Option<f32>,
}

impl UpdateStats {
    pub fn finite(&self) -> bool {
        self.critic1_loss.is_finite()
            && self.critic2_loss.is_finite()
            && self.actor_loss.map_or(true, f32::is_finite)
    }
}

/// Target decomposition for one sampled transition (exposed for diagnostics).
#[derive(Copy, Clone, Debug)]
pub struct TargetSample {
    pub y: f32,
    pub min_target_q: f32,
    pub reward: f32,
    pub done: bool,
}

pub struct Td3Agent {
    actor: Mlp<f32>,
    actor_target: Mlp<f32>,
    critic1: Mlp<f32>,
    critic2: Mlp<f32>,
    critic1_target: Mlp<f32>,
    critic2_target: Mlp<f32>,
    opt_actor: Adam<f32>,
    opt_critic1: Adam<f32>,
    opt_critic2: Adam<f32>,
    space: ActionSpace,
    cfg: Td3Config,
    update_count: u64,
}

impl Td3Agent {
    pub fn new(obs_dim: usize, space: ActionSpace, cfg: Td3Config, rng: &mut ChaCha8Rng) -> Self {
        cfg.validate().expect("invalid TD3 config");
        assert!(obs_dim > 0);
        let mut actor_dims = vec![obs_dim];
        actor_dims.extend(&cfg.hidden);
        actor_dims.push(space.dim());
        let mut critic_dims = vec![obs_dim + space.dim()];
        critic_dims.extend(&cfg.hidden);
        critic_dims.push(1);

        let actor = Mlp::new(&actor_dims, rng);
        let critic1 = Mlp::new(&critic_dims, rng);
        let critic2 = Mlp::new(&critic_dims, rng);
        let opt_actor = Adam::new(&actor, cfg.learning_rate);
        let opt_critic1 = Adam::new(&critic1, cfg.learning_rate);
        let opt_critic2 = Adam::new(&critic2, cfg.learning_rate);
        Self {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            opt_actor,
            opt_critic1,
            opt_critic2,
            space,
            cfg,
            update_count: 0,
        }
    }

    pub fn actor(&self) -> &Mlp<f32> {
        &self.actor
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }

    /// Deterministic policy output plus optional Gaussian exploration noise,
    /// in physical units and always inside the action space.
    pub fn select_action(&self, obs: &[f32], noise_sigma: f32, rng: &mut ChaCha8Rng) -> Vec<f32> {
        self.space.scale(&self.select_action_normalized(obs, noise_sigma, rng))
    }

    pub fn select_action_normalized(
        &self,
        obs: &[f32],
        noise_sigma: f32,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f32> {
        let mut a: Vec<f32> = self.actor.forward(obs).iter().map(|u| u.tanh()).collect();
        if noise_sigma > 0.0 {
            let noise = Normal::new(0.0f32, noise_sigma).expect("finite sigma");
            for v in &mut a {
                *v = (*v + noise.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        a
    }

    /// Critic regression targets with clipped-double-Q and target policy
    /// smoothing: `y = r + gamma * (1 - done) * min(Q1', Q2')(s', a')`.
    pub fn target_samples(
        &self,
        batch: &[&Transition],
        rng: &mut ChaCha8Rng,
    ) -> Vec<TargetSample> {
        let noise = Normal::new(0.0f32, self.cfg.target_noise).expect("finite sigma");
        let clip = self.cfg.target_noise_clip;
        batch
            .iter()
            .map(|tr| {
                let mut input = Vec::with_capacity(tr.next_obs.len() + self.space.dim());
                input.extend_from_slice(&tr.next_obs);
                for u in self.actor_target.forward(&tr.next_obs) {
                    let n = noise.sample(rng).clamp(-clip, clip);
                    input.push((u.tanh() + n).clamp(-1.0, 1.0));
                }
                let q1 = self.critic1_target.forward(&input)[0];
                let q2 = self.critic2_target.forward(&input)[0];
                let min_target_q = q1.min(q2);
                let bootstrap = if tr.done { 0.0 } else { min_target_q };
                TargetSample {
                    y: tr.reward + self.cfg.gamma * bootstrap,
                    min_target_q,
                    reward: tr.reward,
                    done: tr.done,
                }
            })
            .collect()
    }

    /// One TD3 gradient step on a sampled batch. Every `policy_delay`-th
    /// call also updates the actor and all three target networks.
    pub fn update(&mut self, buffer: &ReplayBuffer, rng: &mut ChaCha8Rng) -> UpdateStats {
        assert!(buffer.len() >= self.cfg.batch_size, "buffer smaller than batch");
        let idx = buffer.sample_indices(rng, self.cfg.batch_size);
        let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
        let targets = self.target_samples(&batch, rng);
        let ys: Vec<f32> = targets.iter().map(|t| t.y).collect();

        let critic1_loss = regress_critic(&mut self.critic1, &mut self.opt_critic1, &batch, &ys);
        let critic2_loss = regress_critic(&mut self.critic2, &mut self.opt_critic2, &batch, &ys);

        self.update_count += 1;
        let actor_loss = if self.update_count % self.cfg.policy_delay == 0 {
            let loss = self.ascend_actor(&batch);
            self.actor_target.soft_update_from(&self.actor, self.cfg.tau);
            self.critic1_target.soft_update_from(&self.critic1, self.cfg.tau);
            self.critic2_target.soft_update_from(&self.critic2, self.cfg.tau);
            Some(loss)
        } else {
            None
        };

        UpdateStats { critic1_loss, critic2_loss, actor_loss }
    }

    /// Maximize `Q1(s, pi(s))` by descending its negation through the critic
    /// into the actor (the critic's parameters stay fixed here).
    fn ascend_actor(&mut self, batch: &[&Transition]) -> f32 {
        let inv_b = 1.0 / batch.len() as f32;
        let mut actor_grads = self.actor.zero_gradients();
        // parameter gradients of the critic are computed but discarded
        let mut scratch = self.critic1.zero_gradients();
        let mut loss = 0.0f32;
        for tr in batch {
            let atrace = self.actor.forward_trace(&tr.obs);
            let a: Vec<f32> = atrace.output().iter().map(|u| u.tanh()).collect();
            let mut cin = Vec::with_capacity(tr.obs.len() + a.len());
            cin.extend_from_slice(&tr.obs);
            cin.extend_from_slice(&a);
            let ctrace = self.critic1.forward_trace(&cin);
            loss -= ctrace.output()[0];
            let g_in = self.critic1.backward(&ctrace, &[-inv_b], &mut scratch);
            let d_pre_tanh: Vec<f32> = a
                .iter()
                .zip(&g_in[tr.obs.len()..])
                .map(|(ai, gi)| gi * (1.0 - ai * ai))
                .collect();
            self.actor.backward(&atrace, &d_pre_tanh, &mut actor_grads);
        }
        self.opt_actor.step(&mut self.actor, &actor_grads);
        loss * inv_b
    }

    /// Persist actor and both critics under their role tags.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), CheckpointError> {
        save_networks(
            path,
            &[("actor", &self.actor), ("critic1", &self.critic1), ("critic2", &self.critic2)],
        )
    }

    #[cfg(test)]
    pub(crate) fn networks_for_test(&self) -> [(&Mlp<f32>, &Mlp<f32>); 3] {
        [
            (&self.actor, &self.actor_target),
            (&self.critic1, &self.critic1_target),
            (&self.critic2, &self.critic2_target),
        ]
    }
}

fn regress_critic(
    critic: &mut Mlp<f32>,
    opt: &mut Adam<f32>,
    batch: &[&Transition],
    targets: &[f32],
) -> f32 {
    let inv_b = 1.0 / batch.len() as f32;
    let mut grads = critic.zero_gradients();
    let mut loss = 0.0f32;
    let mut input = Vec::with_capacity(critic.input_dim());
    for (tr, &y) in batch.iter().zip(targets) {
        input.clear();
        input.extend_from_slice(&tr.obs);
        input.extend_from_slice(&tr.action);
        let trace = critic.forward_trace(&input);
        let d = trace.output()[0] - y;
        loss += d * d;
        critic.backward(&trace, &[2.0 * d * inv_b], &mut grads);
    }
    opt.step(critic, &grads);
    loss * inv_b
}

/// Load just the policy network from a checkpoint.
pub fn load_actor(path: &Path) -> Result<Mlp<f32>, CheckpointError> {
    load_network(path, "actor")
}

#[derive(Clone, Debug)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub steps: u64,
    pub reward_total: f64,
    pub outcome: String,
    pub env_steps_total: u64,
}

pub struct TrainResult {
    pub agent: Td3Agent,
    pub episodes: Vec<EpisodeSummary>,
}

/// Run the TD3 training loop: uniform random warmup, then one gradient
/// update per environment step. `on_episode` fires after every episode
/// (checkpointing, logging). Fixed seeds give bit-identical runs.
pub fn train_with(
    env: &mut dyn Environment,
    cfg: &Td3Config,
    mut on_episode: impl FnMut(&EpisodeSummary, &Td3Agent),
) -> Result<TrainResult, TrainError> {
    cfg.validate().expect("invalid TD3 config");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let space = env.action_space();
    let mut agent = Td3Agent::new(env.obs_dim(), space.clone(), cfg.clone(), &mut rng);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut total_steps: u64 = 0;
    let mut episodes = Vec::with_capacity(cfg.episodes as usize);

    for episode in 0..cfg.episodes {
        let mut obs = env.reset();
        debug_assert_eq!(obs.len(), env.obs_dim());
        let mut reward_total = 0.0f64;
        let mut steps = 0u64;
        let outcome;
        loop {
            let action_norm: Vec<f32> = if total_steps < cfg.warmup_steps {
                (0..space.dim()).map(|_| rng.random_range(-1.0f32..1.0)).collect()
            } else {
                agent.select_action_normalized(&obs, cfg.exploration_noise, &mut rng)
            };
            let action_phys = space.scale(&action_norm);
            debug_assert!(space.contains(&action_phys));
            let step = env.step(&action_phys);
            total_steps += 1;
            steps += 1;
            reward_total += step.reward as f64;
            let over = step.terminal || step.truncated;
            buffer.push(Transition {
                obs,
                action: action_norm,
                reward: step.reward,
                next_obs: step.obs.clone(),
                done: step.terminal,
            });
            obs = step.obs;
            if total_steps >= cfg.warmup_steps && buffer.len() >= cfg.batch_size {
                let stats = agent.update(&buffer, &mut rng);
                if !stats.finite() {
                    return Err(TrainError::NonFiniteLoss {
                        step: total_steps,
                        critic1: stats.critic1_loss,
                        critic2: stats.critic2_loss,
                    });
                }
            }
            if over {
                outcome = step.outcome.unwrap_or(if step.terminal { "terminal" } else { "truncated" });
                break;
            }
        }
        let summary = EpisodeSummary {
            episode,
            steps,
            reward_total,
            outcome: outcome.to_string(),
            env_steps_total: total_steps,
        };
        on_episode(&summary, &agent);
        episodes.push(summary);
    }
    Ok(TrainResult { agent, episodes })
}

pub fn train(env: &mut dyn Environment, cfg: &Td3Config) -> Result<TrainResult, TrainError> {
    train_with(env, cfg, |_, _| {})
}

/// Adapter that trains the navigation policy on fresh scenario draws: every
/// `reset` rebuilds the world with a seed derived from the base scenario
/// seed and the episode counter.
pub struct NavEnvAdapter {
    env: CrowdNavEnv,
    base_seed: u64,
    episode: u64,
}

impl NavEnvAdapter {
    pub fn new(env: CrowdNavEnv) -> Self {
        let base_seed = env.scenario().seed;
        Self { env, base_seed, episode: 0 }
    }

    pub fn env(&self) -> &CrowdNavEnv {
        &self.env
    }
}

impl Environment for NavEnvAdapter {
    fn obs_dim(&self) -> usize {
        self.env.observation_len()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::nav()
    }

    fn reset(&mut self) -> Vec<f32> {
        let seed = derive_seed(self.base_seed, self.episode, 0);
        self.episode += 1;
        self.env
            .reset_with_seed(seed)
            .expect("training scenario must remain spawnable")
            .observation
            .flatten_f32()
    }

    fn step(&mut self, action: &[f32]) -> EnvStep {
        assert_eq!(action.len(), 2);
        let res = self
            .env
            .step(Command::new(action[0] as f64, action[1] as f64))
            .expect("trainer never steps a finished episode");
        let (terminal, truncated, outcome) = match res.terminal {
            Terminal::Running => (false, false, None),
            Terminal::Goal => (true, false, Some("goal")),
            Terminal::Collision => (true, false, Some("collision")),
            Terminal::Timeout => (false, true, Some("timeout")),
        };
        EnvStep {
            obs: res.observation.flatten_f32(),
            reward: res.reward.total() as f32,
            terminal,
            truncated,
            outcome,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::flatten_params;

    fn tiny_cfg() -> Td3Config {
        Td3Config {
            hidden: vec![8, 8],
            batch_size: 4,
            warmup_steps: 0,
            buffer_capacity: 64,
            ..Td3Config::default()
        }
    }

    fn filled_buffer(obs_dim: usize, act_dim: usize, n: usize) -> ReplayBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut buf = ReplayBuffer::new(256);
        for _ in 0..n {
            let draw = |rng: &mut ChaCha8Rng, d: usize| -> Vec<f32> {
                (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect()
            };
            buf.push(Transition {
                obs: draw(&mut rng, obs_dim),
                action: draw(&mut rng, act_dim),
                reward: rng.random_range(-1.0f32..1.0),
                next_obs: draw(&mut rng, obs_dim),
                done: rng.random_range(0..5) == 0,
            });
        }
        buf
    }

    #[test]
    fn action_scaling_midpoint_and_bounds() {
        let space = ActionSpace::nav();
        let mid = space.scale(&[0.0, 0.0]);
        assert!((mid[0] - 0.11).abs() < 1e-7);
        assert_eq!(mid[1], 0.0);
        assert_eq!(space.scale(&[-1.0, -1.0]), vec![0.0, -2.0]);
        assert_eq!(space.scale(&[1.0, 1.0]), vec![0.22, 2.0]);
        let back = space.unscale(&space.scale(&[0.3, -0.8]));
        assert!((back[0] - 0.3).abs() < 1e-6 && (back[1] + 0.8).abs() < 1e-6);
    }

    #[test]
    fn zeroed_actor_emits_midpoint_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = Td3Agent::new(4, ActionSpace::nav(), tiny_cfg(), &mut rng);
        agent.actor = Mlp::zeroed(&[4, 8, 8, 2]);
        let a = agent.select_action(&[0.1, 0.2, 0.3, 0.4], 0.0, &mut rng);
        assert!((a[0] - 0.11).abs() < 1e-7);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn noisy_actions_stay_in_bounds_and_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Td3Agent::new(3, ActionSpace::nav(), tiny_cfg(), &mut rng);
        let obs = [0.5, -0.5, 0.25];
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = agent.select_action(&obs, 0.5, &mut r1);
            let b = agent.select_action(&obs, 0.5, &mut r2);
            assert_eq!(a, b, "same seed, same actions");
            assert!(agent.action_space().contains(&a), "{a:?}");
        }
    }

    #[test]
    fn gamma_zero_targets_equal_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = Td3Config { gamma: 1e-12, ..tiny_cfg() };
        let agent = Td3Agent::new(3, ActionSpace::nav(), cfg, &mut rng);
        let buf = filled_buffer(3, 2, 16);
        let batch: Vec<&Transition> = (0..8).map(|i| buf.get(i)).collect();
        for (t, tr) in agent.target_samples(&batch, &mut rng).iter().zip(&batch) {
            assert!((t.y - tr.reward).abs() < 1e-6);
        }
    }

    #[test]
    fn twin_min_bounds_the_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let agent = Td3Agent::new(3, ActionSpace::nav(), tiny_cfg(), &mut rng);
        let buf = filled_buffer(3, 2, 64);
        let batch: Vec<&Transition> = (0..64).map(|i| buf.get(i)).collect();
        let gamma = agent.config().gamma;
        for t in agent.target_samples(&batch, &mut rng) {
            if !t.done {
                assert!((t.y - t.reward) / gamma <= t.min_target_q + 1e-6);
            } else {
                assert_eq!(t.y, t.reward);
            }
        }
    }

    #[test]
    fn critic_loss_decreases_on_fixed_regression_target() {
        // One stored transition and gamma ~ 0: every sampled batch is that
        // same transition with a constant target, a fixed regression problem.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = Td3Config {
            gamma: 1e-12,
            target_noise: 0.0,
            policy_delay: 1000,
            learning_rate: 1e-3,
            batch_size: 4,
            ..tiny_cfg()
        };
        let mut agent = Td3Agent::new(3, ActionSpace::nav(), cfg, &mut rng);
        let mut buf = ReplayBuffer::new(8);
        for _ in 0..4 {
            buf.push(Transition {
                obs: vec![0.3, -0.2, 0.7],
                action: vec![0.5, -0.5],
                reward: 1.0,
                next_obs: vec![0.1, 0.1, 0.1],
                done: false,
            });
        }
        let mut last = f32::INFINITY;
        for i in 0..10 {
            let stats = agent.update(&buf, &mut rng);
            assert!(stats.critic1_loss < last, "update {i}: {} !< {last}", stats.critic1_loss);
            last = stats.critic1_loss;
        }
    }

    #[test]
    fn tau_one_hard_copies_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = Td3Config { tau: 1.0, policy_delay: 1, ..tiny_cfg() };
        let mut agent = Td3Agent::new(3, ActionSpace::nav(), cfg, &mut rng);
        let buf = filled_buffer(3, 2, 16);
        agent.update(&buf, &mut rng);
        for (online, target) in agent.networks_for_test() {
            assert_eq!(flatten_params(online), flatten_params(target));
        }
    }

    #[test]
    fn soft_update_matches_polyak_formula_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = Td3Config { policy_delay: 1, ..tiny_cfg() };
        let mut agent = Td3Agent::new(3, ActionSpace::nav(), cfg.clone(), &mut rng);
        let buf = filled_buffer(3, 2, 16);
        // predict the next target parameters, then verify after one update
        let before_target = flatten_params(&agent.critic1_target);
        agent.update(&buf, &mut rng);
        let online_after = flatten_params(&agent.critic1);
        let expect: Vec<f32> = online_after
            .iter()
            .zip(&before_target)
            .map(|(o, t)| cfg.tau * o + (1.0 - cfg.tau) * t)
            .collect();
        assert_eq!(flatten_params(&agent.critic1_target), expect);
    }

    #[test]
    fn training_is_reproducible_bitwise() {
        struct Line {
            x: f32,
            steps: u32,
        }
        impl Environment for Line {
            fn obs_dim(&self) -> usize {
                1
            }
            fn action_space(&self) -> ActionSpace {
                ActionSpace::new(vec![-1.0], vec![1.0])
            }
            fn reset(&mut self) -> Vec<f32> {
                self.x = 0.5;
                self.steps = 0;
                vec![self.x]
            }
            fn step(&mut self, action: &[f32]) -> EnvStep {
                self.x = (self.x + 0.1 * action[0]).clamp(-2.0, 2.0);
                self.steps += 1;
                EnvStep {
                    obs: vec![self.x],
                    reward: -self.x.abs(),
                    terminal: false,
                    truncated: self.steps >= 20,
                    outcome: None,
                }
            }
        }
        let cfg = Td3Config {
            episodes: 3,
            warmup_steps: 10,
            batch_size: 8,
            hidden: vec![8, 8],
            buffer_capacity: 512,
            seed: 42,
            ..Td3Config::default()
        };
        let run = |cfg: &Td3Config| {
            let mut env = Line { x: 0.0, steps: 0 };
            let result = train(&mut env, cfg).unwrap();
            let rewards: Vec<f64> = result.episodes.iter().map(|e| e.reward_total).collect();
            (rewards, flatten_params(result.agent.actor()))
        };
        assert_eq!(run(&cfg), run(&cfg));
    }

    #[test]
    fn zero_episodes_yields_empty_log_and_usable_agent() {
        let mut env = {
            struct Null;
            impl Environment for Null {
                fn obs_dim(&self) -> usize {
                    1
                }
                fn action_space(&self) -> ActionSpace {
                    ActionSpace::new(vec![-1.0], vec![1.0])
                }
                fn reset(&mut self) -> Vec<f32> {
                    vec![0.0]
                }
                fn step(&mut self, _action: &[f32]) -> EnvStep {
                    unreachable!("no episodes requested")
                }
            }
            Null
        };
        let cfg = Td3Config { episodes: 0, ..tiny_cfg() };
        let result = train(&mut env, &cfg).unwrap();
        assert!(result.episodes.is_empty());
        assert!(result.agent.actor().params_finite());
        let dir = tempfile::tempdir().unwrap();
        result.agent.save_checkpoint(&dir.path().join("init.bin")).unwrap();
    }
}
