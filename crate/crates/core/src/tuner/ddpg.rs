//! Deterministic policy-gradient actor-critic for one level.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::nn::{Activation, Adam, Grads, Mlp};
use super::replay::ExperienceSample;
use super::state::STATE_DIM;

/// Network shapes and learning constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgParams {
    pub state_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub tau: f64,
}

impl Default for DdpgParams {
    fn default() -> Self {
        DdpgParams {
            state_dim: STATE_DIM,
            hidden_width: 128,
            hidden_layers: 3,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.9,
            tau: 0.005,
        }
    }
}

/// A minibatch in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    /// `(n, 1)`.
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn from_samples(samples: &[&ExperienceSample]) -> Self {
        let n = samples.len();
        let d = samples.first().map_or(STATE_DIM, |s| s.state.0.len());
        let row = |f: &dyn Fn(&ExperienceSample) -> &[f64]| {
            Array2::from_shape_fn((n, d), |(i, j)| f(samples[i])[j])
        };
        Batch {
            states: row(&|s| &s.state.0),
            actions: Array2::from_shape_fn((n, 1), |(i, _)| samples[i].action),
            rewards: Array1::from_shape_fn(n, |i| samples[i].reward),
            next_states: row(&|s| &s.next_state.0),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

fn concat(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[states.view(), actions.view()]).expect("same row count")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub critic_loss: f64,
    /// Mean critic value of the actor's own actions.
    pub actor_objective: f64,
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    params: DdpgParams,
}

impl ActorCritic {
    pub fn new(params: DdpgParams, rng: &mut ChaCha8Rng) -> Self {
        let shape = |input: usize| {
            let mut s = vec![input];
            s.extend(std::iter::repeat_n(params.hidden_width, params.hidden_layers));
            s.push(1);
            s
        };
        let actor = Mlp::new(&shape(params.state_dim), Activation::Relu, Activation::Tanh, rng);
        let critic = Mlp::new(
            &shape(params.state_dim + 1),
            Activation::Relu,
            Activation::Identity,
            rng,
        );
        ActorCritic {
            actor_opt: Adam::new(&actor, params.actor_lr),
            critic_opt: Adam::new(&critic, params.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            params,
        }
    }

    pub fn params(&self) -> &DdpgParams {
        &self.params
    }

    /// Deterministic actor output in `[-1, 1]`.
    pub fn act(&self, state: &[f64]) -> f64 {
        let x = Array2::from_shape_vec((1, state.len()), state.to_vec()).expect("row vector");
        self.actor.forward(x.view())[[0, 0]]
    }

    pub fn q_value(&self, state: &[f64], action: f64) -> f64 {
        let mut row = state.to_vec();
        row.push(action);
        let x = Array2::from_shape_vec((1, row.len()), row).expect("row vector");
        self.critic.forward(x.view())[[0, 0]]
    }

    /// Bootstrapped regression targets from the target networks.
    pub fn critic_targets(&self, batch: &Batch) -> Array1<f64> {
        let next_a = self.actor_target.forward(batch.next_states.view());
        let q_next = self
            .critic_target
            .forward(concat(&batch.next_states, &next_a).view());
        &batch.rewards + &(q_next.column(0).to_owned() * self.params.discount)
    }

    /// Mean squared error against `targets`, with its parameter gradients.
    pub fn critic_loss_and_grads(&self, batch: &Batch, targets: &Array1<f64>) -> (f64, Grads) {
        let n = batch.len() as f64;
        let tr = self
            .critic
            .forward_trace(concat(&batch.states, &batch.actions).view());
        let err = tr.output().column(0).to_owned() - targets;
        let loss = err.mapv(|e| e * e).sum() / n;
        let grad = (err * (2.0 / n)).insert_axis(Axis(1));
        let (g, _) = self.critic.backward(&tr, &grad);
        (loss, g)
    }

    pub fn critic_loss(&self, batch: &Batch, targets: &Array1<f64>) -> f64 {
        let q = self
            .critic
            .forward(concat(&batch.states, &batch.actions).view());
        let err = q.column(0).to_owned() - targets;
        err.mapv(|e| e * e).sum() / batch.len() as f64
    }

    /// Actor loss `-mean Q(s, mu(s))` and its gradients for the actor.
    pub fn actor_loss_and_grads(&self, batch: &Batch) -> (f64, Grads) {
        let n = batch.len() as f64;
        let a_tr = self.actor.forward_trace(batch.states.view());
        let c_tr = self
            .critic
            .forward_trace(concat(&batch.states, a_tr.output()).view());
        let loss = -c_tr.output().sum() / n;
        let grad_q = Array2::from_elem((batch.len(), 1), -1.0 / n);
        let (_, d_input) = self.critic.backward(&c_tr, &grad_q);
        let d_action = d_input.slice(ndarray::s![.., -1..]).to_owned();
        let (g, _) = self.actor.backward(&a_tr, &d_action);
        (loss, g)
    }

    pub fn actor_loss(&self, batch: &Batch) -> f64 {
        let a = self.actor.forward(batch.states.view());
        let q = self.critic.forward(concat(&batch.states, &a).view());
        -q.sum() / batch.len() as f64
    }

    /// One update of both networks followed by a soft target update.
    pub fn train_step(&mut self, batch: &Batch) -> TrainReport {
        let targets = self.critic_targets(batch);
        let (critic_loss, cg) = self.critic_loss_and_grads(batch, &targets);
        self.critic_opt.apply(&mut self.critic, &cg);
        let (actor_loss, ag) = self.actor_loss_and_grads(batch);
        self.actor_opt.apply(&mut self.actor, &ag);
        self.soft_update(self.params.tau);
        TrainReport {
            critic_loss,
            actor_objective: -actor_loss,
        }
    }

    pub fn soft_update(&mut self, tau: f64) {
        self.actor_target.blend_from(&self.actor, tau);
        self.critic_target.blend_from(&self.critic, tau);
    }
}
