"""DiGrad and DDPG agents.

One actor emits the compound action. The critic is either a single network
with one value head per task (``single``), one network per task that only
sees that task's actions (``multi``), or, for the DDPG baseline, a single
network with one head trained on a scalar reward.

The actor update is the differential policy gradient: each task's critic
supplies the action-gradient for its own coordinates, and the shared
coordinates receive the sum over the tasks that share them, optionally
divided by their count (the averaging heuristic).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (DenseNetwork, NonFiniteError, RmsPropState, grad_norm, hard_update,
                 rmsprop_step, soft_update)
from .partition import ActionPartition
from .replay import Batch, GaussianNoise, ReplayBuffer

ALGORITHMS = {
    # tag: (critic mode, heuristic)
    "digrad-single-heuristic": ("single", True),
    "digrad-single": ("single", False),
    "digrad-multi-heuristic": ("multi", True),
    "digrad-multi": ("multi", False),
    "ddpg": ("ddpg", False),
}

# Two readings of "learning rates 0.001 and 0.0001 respectively".
LR_PRESETS = {
    "literal": {"actor_lr": 1e-3, "critic_lr": 1e-4},
    "conventional": {"actor_lr": 1e-4, "critic_lr": 1e-3},
}


@dataclass
class AgentConfig:
    hidden: tuple = (400, 300)
    actor_lr: float = 1e-3
    critic_lr: float = 1e-4
    rms_decay: float = 0.9
    rms_eps: float = 1e-8
    gamma: float = 0.99
    tau: float = 1e-3
    action_bound: float = 0.1
    # "head": y_i bootstraps from target head i; "mean": every task uses the mean over heads
    bootstrap: str = "head"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.bootstrap not in ("head", "mean"):
            raise ValueError(f"bootstrap must be 'head' or 'mean', got {self.bootstrap!r}")
        if self.action_bound <= 0:
            raise ValueError("action_bound must be positive")


@dataclass
class CriticBundle:
    mode: str  # single | multi | ddpg
    nets: list
    targets: list
    optims: list

    @property
    def n_heads(self) -> int:
        return self.nets[0].output_dim if self.mode != "multi" else len(self.nets)


@dataclass
class StepReport:
    skipped: bool
    critic_losses: np.ndarray | None = None
    actor_grad_norm: float = 0.0
    critic_grad_norm: float = 0.0
    reason: str = ""


@dataclass
class Agent:
    algorithm: str
    partition: ActionPartition
    state_dim: int
    config: AgentConfig
    actor: DenseNetwork
    actor_target: DenseNetwork
    actor_optim: RmsPropState
    critic: CriticBundle
    counters: dict = field(default_factory=lambda: {"updates": 0, "soft_updates": 0})

    @property
    def heuristic(self) -> bool:
        return ALGORITHMS[self.algorithm][1]

    @property
    def is_ddpg(self) -> bool:
        return self.algorithm == "ddpg"

    @property
    def n_tasks(self) -> int:
        return self.partition.n_tasks

    @property
    def n_values(self) -> int:
        """Width of the reward vector this agent consumes (1 for DDPG)."""
        return 1 if self.is_ddpg else self.n_tasks

    @classmethod
    def create(cls, algorithm: str, state_dim: int, partition: ActionPartition,
               config: AgentConfig | None = None, rng=None) -> "Agent":
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}")
        config = config or AgentConfig()
        rng = rng if rng is not None else np.random.default_rng()
        hidden = list(config.hidden)
        acts = ["crelu"] * len(hidden)
        a_dim = partition.compound_dim

        actor = DenseNetwork.build([state_dim, *hidden, a_dim], acts + ["tanh"], rng,
                                   output_scale=config.action_bound)
        mode = ALGORITHMS[algorithm][0]
        if mode == "multi":
            nets = [DenseNetwork.build([state_dim + partition.task_dim(i), *hidden, 1], acts + ["linear"], rng)
                    for i in range(partition.n_tasks)]
        else:
            heads = 1 if mode == "ddpg" else partition.n_tasks
            nets = [DenseNetwork.build([state_dim + a_dim, *hidden, heads], acts + ["linear"], rng)]
        critic = CriticBundle(
            mode, nets, [n.copy() for n in nets],
            [RmsPropState.for_network(n, config.critic_lr, config.rms_decay, config.rms_eps) for n in nets],
        )
        return cls(algorithm, partition, state_dim, config, actor, actor.copy(),
                   RmsPropState.for_network(actor, config.actor_lr, config.rms_decay, config.rms_eps),
                   critic)

    def networks(self) -> dict:
        """All networks by name, in a fixed order."""
        out = {"actor": self.actor, "actor_target": self.actor_target}
        for i, (net, tgt) in enumerate(zip(self.critic.nets, self.critic.targets)):
            out[f"critic{i}"] = net
            out[f"critic{i}_target"] = tgt
        return out


# -- evaluation helpers ------------------------------------------------------------

def _critic_inputs(agent: Agent, states, actions, i: int):
    if agent.critic.mode == "multi":
        actions = actions[:, agent.partition.task_view(i)]
    return np.concatenate([states, actions], axis=1)


def q_values(agent: Agent, states, actions, target: bool = False) -> np.ndarray:
    """Critic outputs, shape ``(batch, n_values)``."""
    nets = agent.critic.targets if target else agent.critic.nets
    if agent.critic.mode == "multi":
        return np.concatenate([net.forward(_critic_inputs(agent, states, actions, i))[0]
                               for i, net in enumerate(nets)], axis=1)
    return nets[0].forward(_critic_inputs(agent, states, actions, 0))[0]


def act(agent: Agent, state, noise: GaussianNoise | None = None) -> np.ndarray:
    """Actor output plus optional exploration noise, clipped to the action bound."""
    a, _ = agent.actor.forward(state)
    if noise is not None:
        a = a + noise.sample(None if a.ndim == 1 else a.shape[0])
    bound = agent.config.action_bound
    return np.clip(a, -bound, bound)


# -- critic ----------------------------------------------------------------------

def critic_targets(agent: Agent, batch: Batch) -> np.ndarray:
    """``y_i = r_i + gamma * Q'_i(s', mu'(s'))``, bootstrap dropped where task ``i`` is done."""
    next_actions, _ = agent.actor_target.forward(batch.next_states)
    q_next = q_values(agent, batch.next_states, next_actions, target=True)
    if agent.config.bootstrap == "mean":
        q_next = np.repeat(q_next.mean(axis=1, keepdims=True), q_next.shape[1], axis=1)
    if batch.rewards.shape != q_next.shape:
        raise ValueError(f"reward batch {batch.rewards.shape} does not match critic heads {q_next.shape}")
    return np.where(batch.task_done, batch.rewards, batch.rewards + agent.config.gamma * q_next)


def critic_loss_and_grads(agent: Agent, batch: Batch, y: np.ndarray):
    """Per-task mean squared errors and the parameter gradients of their sum, per network."""
    n_batch = len(batch)
    losses, grads = [], []
    for i, net in enumerate(agent.critic.nets):
        q, tape = net.forward(_critic_inputs(agent, batch.states, batch.actions, i))
        target = y[:, i:i + 1] if agent.critic.mode == "multi" else y
        err = q - target
        losses.append((err * err).mean(axis=0))
        grads.append(net.backward(tape, 2.0 * err / n_batch)[0])
    return np.concatenate(losses), grads


def _critic_step(agent: Agent, batch: Batch, y: np.ndarray):
    losses, grads = critic_loss_and_grads(agent, batch, y)
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError(f"non-finite critic loss {losses}")
    for net, opt, g in zip(agent.critic.nets, agent.critic.optims, grads):
        rmsprop_step(net, opt, g, "descend")
    return losses, float(np.sqrt(sum(grad_norm(g) ** 2 for g in grads)))


def critic_update(agent: Agent, batch: Batch, y: np.ndarray) -> np.ndarray:
    """One RMSProp descent step per critic network; returns per-task losses before the step."""
    return _critic_step(agent, batch, y)[0]


# -- actor -----------------------------------------------------------------------

def task_action_gradients(agent: Agent, states, actions) -> list:
    """``dQ_i/da`` for every task, each as a ``(batch, compound_dim)`` array.

    Entries outside task ``i``'s coordinates are exactly zero: in single-critic
    mode the head gradient w.r.t. the full compound action is masked.
    """
    part = agent.partition
    s_dim, n_batch = agent.state_dim, states.shape[0]
    out = []
    if agent.critic.mode == "multi":
        for i, net in enumerate(agent.critic.nets):
            _, tape = net.forward(_critic_inputs(agent, states, actions, i))
            _, g_in = net.backward(tape, np.ones((n_batch, 1)), param_grads=False)
            g = np.zeros((n_batch, part.compound_dim))
            g[:, part.task_view(i)] = g_in[:, s_dim:]
            out.append(g)
        return out
    net = agent.critic.nets[0]
    _, tape = net.forward(_critic_inputs(agent, states, actions, 0))
    # one backward pass for all heads: slice i of the output gradient selects head i
    heads = np.broadcast_to(np.eye(part.n_tasks)[:, None, :], (part.n_tasks, n_batch, part.n_tasks))
    _, g_in = net.backward(tape, heads, param_grads=False)
    return [np.where(part.mask(i), g_in[i, :, s_dim:], 0.0) for i in range(part.n_tasks)]


def assemble_action_gradient(partition: ActionPartition, task_grads: list, heuristic: bool) -> np.ndarray:
    """Combine per-task action-gradients into one compound action-gradient.

    Non-shared coordinates take their owning task's gradient. Shared
    coordinates take the sum over the shared tasks (ascending task order),
    scaled by ``1/k`` when ``heuristic`` is set.
    """
    g = np.zeros_like(task_grads[0])
    for i, d in enumerate(partition.disjoint):
        d = list(d)
        g[:, d] = task_grads[i][:, d]
    if partition.shared:
        shared = list(partition.shared)
        total = np.zeros((g.shape[0], len(shared)))
        for i in partition.shared_tasks:
            total = total + task_grads[i][:, shared]
        if heuristic:
            total = total * (1.0 / partition.k)
        g[:, shared] = total
    return g


def policy_action_gradient(agent: Agent, states, heuristic: bool | None = None):
    """Actor forward on ``states`` and the compound action-gradient; returns ``(g, tape)``."""
    if heuristic is None:
        heuristic = agent.heuristic
    actions, tape = agent.actor.forward(states)
    grads = task_action_gradients(agent, states, actions)
    return assemble_action_gradient(agent.partition, grads, heuristic), tape


def differential_policy_gradient(agent: Agent, batch, heuristic: bool | None = None):
    """Batch-mean gradient of the multi-task objective w.r.t. actor parameters (ascent direction)."""
    if agent.is_ddpg:
        raise ValueError("differential_policy_gradient needs a DiGrad agent")
    states = batch.states if isinstance(batch, Batch) else np.atleast_2d(batch)
    g, tape = policy_action_gradient(agent, states, heuristic)
    return agent.actor.backward(tape, g / states.shape[0])[0]


def ddpg_actor_gradient(agent: Agent, batch):
    """Standard deterministic policy gradient through one scalar critic."""
    if not agent.is_ddpg:
        raise ValueError("ddpg_actor_gradient needs an agent created with algorithm='ddpg'")
    states = batch.states if isinstance(batch, Batch) else np.atleast_2d(batch)
    actions, tape = agent.actor.forward(states)
    net = agent.critic.nets[0]
    _, c_tape = net.forward(np.concatenate([states, actions], axis=1))
    _, g_in = net.backward(c_tape, np.ones((states.shape[0], 1)), param_grads=False)
    return agent.actor.backward(tape, g_in[:, agent.state_dim:] / states.shape[0])[0]


def actor_gradient(agent: Agent, batch):
    return ddpg_actor_gradient(agent, batch) if agent.is_ddpg else differential_policy_gradient(agent, batch)


# -- training ----------------------------------------------------------------------

def update_targets(agent: Agent) -> None:
    tau = agent.config.tau
    soft_update(agent.actor_target, agent.actor, tau)
    for tgt, net in zip(agent.critic.targets, agent.critic.nets):
        soft_update(tgt, net, tau)
    agent.counters["soft_updates"] += 1


def sync_targets(agent: Agent) -> None:
    hard_update(agent.actor_target, agent.actor)
    for tgt, net in zip(agent.critic.targets, agent.critic.nets):
        hard_update(tgt, net)


def train_step(agent: Agent, buffer: ReplayBuffer, batch_size: int) -> StepReport:
    """Sample a minibatch, update critic(s), then actor, then all target networks."""
    if len(buffer) < batch_size:
        return StepReport(skipped=True, reason="warming up")
    batch = buffer.sample(batch_size)
    y = critic_targets(agent, batch)
    losses, critic_norm = _critic_step(agent, batch, y)
    grads = actor_gradient(agent, batch)
    rmsprop_step(agent.actor, agent.actor_optim, grads, "ascend")
    update_targets(agent)
    agent.counters["updates"] += 1
    return StepReport(False, losses, grad_norm(grads), critic_norm)
