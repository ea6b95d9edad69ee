//! Robust DDPG over the adversarial state: actor/critic pair with target
//! copies, a hybrid sigmoid/tanh action head, a FIFO replay buffer, and the
//! training loop.
//!
//! The critic consumes the raw head outputs (sigmoid and tanh values) as the
//! action representation; the environment receives the decoded discrete and
//! continuous commands. The round/threshold decode is non-differentiable, so
//! keeping the policy gradient on the raw head sidesteps any relaxation
//! scheme.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{
    ActionContext, ActionVector, EnvError, EpisodeMetrics, FeatureLayout, StepInfo, VvEnv,
};
use crate::nn::{adam_step, Activation, AdamState, DenseNet, GradientSet};

/// Hybrid head: the first `n_sigmoid` components squash to (0, 1) for the
/// regulator and capacitors, the remaining `n_tanh` squash to (-1, 1) for
/// inverter setpoints.
#[derive(Debug, Clone)]
pub struct ActionHead {
    pub n_sigmoid: usize,
    pub n_tanh: usize,
}

impl ActionHead {
    pub fn for_layout(layout: &FeatureLayout) -> ActionHead {
        ActionHead {
            n_sigmoid: 1 + layout.n_caps,
            n_tanh: layout.n_inverters,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_sigmoid + self.n_tanh
    }

    pub fn squash(&self, raw: &[f64]) -> Vec<f64> {
        assert_eq!(raw.len(), self.dim());
        raw.iter()
            .enumerate()
            .map(|(i, &z)| {
                if i < self.n_sigmoid {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    z.tanh()
                }
            })
            .collect()
    }

    /// Derivative of each squash expressed through its output value.
    pub fn derivative_from_output(&self, squashed: &[f64]) -> Vec<f64> {
        squashed
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if i < self.n_sigmoid {
                    a * (1.0 - a)
                } else {
                    1.0 - a * a
                }
            })
            .collect()
    }

    fn clip(&self, i: usize, v: f64) -> f64 {
        if i < self.n_sigmoid {
            v.clamp(0.0, 1.0)
        } else {
            v.clamp(-1.0, 1.0)
        }
    }

    /// Squashed-value representation of the do-nothing action: tap decodes
    /// to 0, capacitors stay off, inverter q stays zero.
    pub fn neutral(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        out[0] = 0.5;
        out
    }
}

/// Turns squashed head values into a device command:
/// `tap = round(tap_min + s * (tap_max - tap_min))`, capacitor on iff its
/// value exceeds 0.5 (ties break to off), `q = tanh_value * limit`.
pub fn decode(head: &ActionHead, squashed: &[f64], ctx: &ActionContext) -> ActionVector {
    assert_eq!(squashed.len(), head.dim());
    let span = f64::from(ctx.tap_max - ctx.tap_min);
    let tap = (f64::from(ctx.tap_min) + squashed[0] * span).round() as i32;
    let caps = (0..ctx.n_caps)
        .map(|k| squashed[1 + k] > 0.5)
        .collect();
    let q_dg_kvar = (0..head.n_tanh)
        .map(|k| squashed[head.n_sigmoid + k] * ctx.q_limits_kvar[k])
        .collect();
    ActionVector {
        tap: tap.clamp(ctx.tap_min, ctx.tap_max),
        caps,
        q_dg_kvar,
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Finite FIFO of transitions; pushing at capacity discards the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0);
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Transition> {
        assert!(!self.items.is_empty());
        (0..batch)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub noise_sigma: f64,
    pub pretrain_steps: usize,
    pub reward_scale: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Compute critic targets with the online networks instead of the
    /// target copies (ablation of the target-network structure).
    pub literal_targets: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 200,
            gamma: 0.95,
            tau: 0.005,
            learning_rate: 0.001,
            noise_sigma: 0.07,
            pretrain_steps: 500,
            reward_scale: 5.0,
            batch_size: 64,
            buffer_capacity: 3000,
            hidden: vec![30, 40, 80],
            literal_targets: false,
            seed: 0,
        }
    }
}

/// Actor/critic pair with target copies and per-network Adam state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub target_actor: DenseNet,
    pub target_critic: DenseNet,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub head: ActionHead,
    feature_len: usize,
}

impl Agent {
    pub fn new<R: Rng>(layout: &FeatureLayout, hidden: &[usize], rng: &mut R) -> Agent {
        let head = ActionHead::for_layout(layout);
        let feature_len = layout.adversarial_len();
        let mut actor_dims = vec![feature_len];
        actor_dims.extend_from_slice(hidden);
        actor_dims.push(head.dim());
        let mut critic_dims = vec![feature_len + head.dim()];
        critic_dims.extend_from_slice(hidden);
        critic_dims.push(1);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Identity);

        let actor = DenseNet::init(&actor_dims, &acts, rng);
        let critic = DenseNet::init(&critic_dims, &acts, rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let actor_opt = AdamState::new(&actor);
        let critic_opt = AdamState::new(&critic);
        Agent {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt,
            critic_opt,
            head,
            feature_len,
        }
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    /// Squashed head values for a state, no exploration noise.
    pub fn raw_action(&self, features: &[f64]) -> Vec<f64> {
        self.head.squash(&self.actor.forward(features))
    }

    /// Policy with Gaussian exploration noise added to the squashed values,
    /// clipped back into the head ranges, then decoded.
    pub fn act<R: Rng>(
        &self,
        features: &[f64],
        ctx: &ActionContext,
        sigma: f64,
        rng: &mut R,
    ) -> (Vec<f64>, ActionVector) {
        assert_eq!(features.len(), self.feature_len, "feature length mismatch");
        let mut a = self.raw_action(features);
        if sigma > 0.0 {
            for (i, v) in a.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                *v = self.head.clip(i, *v + sigma * z);
            }
        }
        let action = decode(&self.head, &a, ctx);
        (a, action)
    }

    fn critic_input(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(state.len() + action.len());
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        input
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> f64 {
        self.critic.forward(&self.critic_input(state, action))[0]
    }

    /// Frozen greedy view of the actor for evaluation and deployment.
    pub fn policy(&self) -> GreedyPolicy {
        GreedyPolicy {
            actor: self.actor.clone(),
            head: self.head.clone(),
        }
    }
}

/// The mean-squared Bellman error of a batch under the current critic, with
/// targets from the target networks (or online networks in the literal
/// ablation). Pure; shared by the update and its finite-difference checks.
pub fn critic_loss(agent: &Agent, batch: &[&Transition], cfg: &TrainConfig) -> f64 {
    let targets = critic_targets(agent, batch, cfg);
    let mut loss = 0.0;
    for (tr, y) in batch.iter().zip(&targets) {
        let q = agent.q_value(&tr.state, &tr.action);
        loss += (q - y) * (q - y);
    }
    loss / batch.len() as f64
}

fn critic_targets(agent: &Agent, batch: &[&Transition], cfg: &TrainConfig) -> Vec<f64> {
    let (actor, critic) = if cfg.literal_targets {
        (&agent.actor, &agent.critic)
    } else {
        (&agent.target_actor, &agent.target_critic)
    };
    batch
        .iter()
        .map(|tr| {
            let scaled_r = cfg.reward_scale * tr.reward;
            if tr.done {
                return scaled_r;
            }
            let a_next = agent.head.squash(&actor.forward(&tr.next_state));
            let mut input = tr.next_state.clone();
            input.extend_from_slice(&a_next);
            scaled_r + cfg.gamma * critic.forward(&input)[0]
        })
        .collect()
}

/// One Adam step on the critic against the Bellman targets. Returns the
/// pre-step loss.
pub fn critic_update(agent: &mut Agent, batch: &[&Transition], cfg: &TrainConfig) -> f64 {
    let targets = critic_targets(agent, batch, cfg);
    let n = batch.len() as f64;
    let mut grads = GradientSet::zeros_like(&agent.critic);
    let mut loss = 0.0;
    for (tr, y) in batch.iter().zip(&targets) {
        let input = agent.critic_input(&tr.state, &tr.action);
        let q = agent.critic.forward(&input)[0];
        loss += (q - y) * (q - y) / n;
        let upstream = vec![2.0 * (q - y) / n];
        let sample = agent.critic.backward(&input, &upstream);
        grads.add_scaled(&sample, 1.0);
    }
    adam_step(&mut agent.critic, &grads, &mut agent.critic_opt, cfg.learning_rate);
    loss
}

/// Policy objective `J = mean Q(s, mu(s))` of a batch under the current
/// networks. Pure; shared by the update and its finite-difference checks.
pub fn policy_objective(agent: &Agent, batch: &[&Transition]) -> f64 {
    batch
        .iter()
        .map(|tr| {
            let a = agent.raw_action(&tr.state);
            agent.q_value(&tr.state, &a)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// One Adam ascent step on the actor along `grad_a Q . grad_theta mu`,
/// chained through the critic's input gradient and the head squash.
/// Returns the pre-step objective.
pub fn actor_update(agent: &mut Agent, batch: &[&Transition], cfg: &TrainConfig) -> f64 {
    let n = batch.len() as f64;
    let state_len = agent.feature_len;
    let mut grads = GradientSet::zeros_like(&agent.actor);
    let mut objective = 0.0;
    for tr in batch {
        let raw = agent.actor.forward(&tr.state);
        let a = agent.head.squash(&raw);
        let input = agent.critic_input(&tr.state, &a);
        objective += agent.critic.forward(&input)[0] / n;
        let through_critic = agent.critic.backward(&input, &[1.0]);
        let dq_da = &through_critic.d_input[state_len..];
        let deriv = agent.head.derivative_from_output(&a);
        let upstream: Vec<f64> = dq_da.iter().zip(&deriv).map(|(g, d)| g * d).collect();
        let sample = agent.actor.backward(&tr.state, &upstream);
        grads.add_scaled(&sample, 1.0 / n);
    }
    // Ascent: descend on the negated gradient.
    grads.scale(-1.0);
    adam_step(&mut agent.actor, &grads, &mut agent.actor_opt, cfg.learning_rate);
    objective
}

/// Soft target update: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(agent: &mut Agent, tau: f64) {
    assert!(tau > 0.0 && tau <= 1.0);
    let blend = |online: &DenseNet, target: &mut DenseNet| {
        let o = online.flatten();
        let mut t = target.flatten();
        for (t_i, o_i) in t.iter_mut().zip(&o) {
            *t_i = tau * o_i + (1.0 - tau) * *t_i;
        }
        target.load_flat(&t).expect("congruent shapes");
    };
    blend(&agent.actor, &mut agent.target_actor);
    blend(&agent.critic, &mut agent.target_critic);
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub buffer_fill: usize,
}

/// Seeds the buffer with transitions from the do-nothing policy over the
/// training days, standing in for an operator's historical log.
fn pretrain_fill(
    env: &mut VvEnv,
    buffer: &mut ReplayBuffer,
    train_days: &[usize],
    head: &ActionHead,
    steps: usize,
) -> Result<(), EnvError> {
    if steps == 0 {
        return Ok(());
    }
    let neutral_raw = head.neutral();
    let mut pushed = 0;
    let mut day_cursor = 0;
    'outer: loop {
        let day = train_days[day_cursor % train_days.len()];
        day_cursor += 1;
        let mut state = env.reset(day)?;
        loop {
            let ctx = env.action_context();
            let action = decode(head, &neutral_raw, &ctx);
            let outcome = env.step(&action)?;
            let features = state.features();
            let done = outcome.next.is_none();
            let next_features = outcome
                .next
                .as_ref()
                .map(|s| s.features())
                .unwrap_or_else(|| features.clone());
            buffer.push(Transition {
                state: features,
                action: neutral_raw.clone(),
                reward: outcome.reward,
                next_state: next_features,
                done,
            });
            pushed += 1;
            if pushed == steps {
                break 'outer;
            }
            match outcome.next {
                Some(s) => state = s,
                None => break,
            }
        }
    }
    Ok(())
}

/// The offline training loop: per episode reset, noisy rollout, FIFO buffer
/// pushes, and per-step critic, actor, and target updates once the buffer
/// holds the pre-train fill. Fully deterministic from `cfg.seed`.
pub fn train(
    env: &mut VvEnv,
    train_days: &[usize],
    cfg: &TrainConfig,
) -> Result<(Agent, Vec<EpisodeLog>), EnvError> {
    assert!(!train_days.is_empty(), "need at least one training day");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut agent = Agent::new(env.layout(), &cfg.hidden, &mut rng);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    pretrain_fill(env, &mut buffer, train_days, &agent.head, cfg.pretrain_steps)?;

    let warmup = cfg.pretrain_steps.max(cfg.batch_size);
    let mut logs = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let day = train_days[episode % train_days.len()];
        let mut state = env.reset(day)?;
        let mut rewards = Vec::new();
        let mut losses = Vec::new();
        let mut objectives = Vec::new();
        loop {
            let ctx = env.action_context();
            let features = state.features();
            let (raw, action) = agent.act(&features, &ctx, cfg.noise_sigma, &mut rng);
            let outcome = env.step(&action)?;
            let done = outcome.next.is_none();
            let next_features = outcome
                .next
                .as_ref()
                .map(|s| s.features())
                .unwrap_or_else(|| features.clone());
            buffer.push(Transition {
                state: features,
                action: raw,
                reward: outcome.reward,
                next_state: next_features,
                done,
            });
            rewards.push(outcome.reward);

            if buffer.len() >= warmup {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                losses.push(critic_update(&mut agent, &batch, cfg));
                objectives.push(actor_update(&mut agent, &batch, cfg));
                soft_update(&mut agent, cfg.tau);
            }

            match outcome.next {
                Some(s) => state = s,
                None => break,
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        logs.push(EpisodeLog {
            episode,
            mean_reward: mean(&rewards),
            critic_loss: mean(&losses),
            actor_objective: mean(&objectives),
            buffer_fill: buffer.len(),
        });
    }
    Ok((agent, logs))
}

/// Deployable actor: greedy (no noise), no learning machinery.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    pub actor: DenseNet,
    pub head: ActionHead,
}

impl GreedyPolicy {
    pub fn act(&self, features: &[f64], ctx: &ActionContext) -> ActionVector {
        let raw = self.head.squash(&self.actor.forward(features));
        decode(&self.head, &raw, ctx)
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub metrics: EpisodeMetrics,
    pub mean_reward: f64,
    pub mean_loss_mw: f64,
    pub std_loss_mw: f64,
    pub vvr: f64,
    pub mean_decision_ms: f64,
}

/// Greedy rollout of a frozen policy over held-out days. Deterministic up
/// to the reported wall-clock latency.
pub fn evaluate(
    policy: &GreedyPolicy,
    env: &mut VvEnv,
    days: &[usize],
) -> Result<EvalReport, EnvError> {
    let mut metrics = EpisodeMetrics::default();
    let mut decision_seconds = 0.0;
    let mut decisions = 0u64;
    for &day in days {
        let mut state = env.reset(day)?;
        loop {
            let ctx = env.action_context();
            let features = state.features();
            let started = Instant::now();
            let action = policy.act(&features, &ctx);
            decision_seconds += started.elapsed().as_secs_f64();
            decisions += 1;
            let outcome = env.step(&action)?;
            metrics.push(outcome.reward, outcome.info.clone());
            match outcome.next {
                Some(s) => state = s,
                None => break,
            }
        }
    }
    let n_phases = env.layout().n_buses;
    Ok(EvalReport {
        mean_reward: metrics.mean_reward(),
        mean_loss_mw: metrics.mean_loss_mw(),
        std_loss_mw: metrics.std_loss_mw(),
        vvr: crate::env::vvr(&metrics, n_phases),
        mean_decision_ms: if decisions == 0 {
            0.0
        } else {
            decision_seconds * 1000.0 / decisions as f64
        },
        metrics,
    })
}

/// Step details for evaluation logging.
pub fn step_infos(report: &EvalReport) -> impl Iterator<Item = (&f64, &StepInfo)> {
    report.metrics.rewards.iter().zip(&report.metrics.infos)
}
