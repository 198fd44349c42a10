"""The training loop, evaluation rollouts and per-run logs."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import Agent, act, train_step
from ..envs.kinematics import load_tree
from ..envs.reach import ReachEnv, scores
from ..nn import DenseNetwork, NonFiniteError, load_checkpoint, save_checkpoint
from ..replay import GaussianNoise, ReplayBuffer, Transition
from .config import TrainConfig

log = logging.getLogger(__name__)


def checkpoint_name(setting: str, seed: int, episode: int) -> str:
    return f"{setting}_{seed}_{episode}.ckpt"


def run_dir(config: TrainConfig, seed: int) -> Path:
    return Path(config.output_dir) / config.algorithm / f"seed{seed}"


def make_env(config: TrainConfig, rng=None) -> ReachEnv:
    return ReachEnv(load_tree(config.env), config.reward_spec(), max_steps=config.max_steps,
                    dt=config.dt, rng=rng)


def runlog_columns(n_tasks: int) -> list:
    cols = ["episode", "steps", "avg_reward"]
    cols += [f"score_{i}" for i in range(n_tasks)]
    cols += [f"final_error_{i}" for i in range(n_tasks)]
    cols += ["critic_loss", "actor_grad_norm", "updates"]
    return cols


def evalog_columns(n_tasks: int) -> list:
    cols = ["episode"]
    cols += [f"mean_error_{i}" for i in range(n_tasks)]
    cols += [f"median_error_{i}" for i in range(n_tasks)]
    cols += [f"mean_score_{i}" for i in range(n_tasks)]
    cols += ["success_rate"]
    return cols


@dataclass
class RunLog:
    """Per-episode training records plus periodic noiseless evaluations."""

    n_tasks: int
    records: list = field(default_factory=list)
    evals: list = field(default_factory=list)
    wall_clock: list = field(default_factory=list)
    status: str = "ok"

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        _write_csv(d / "runlog.csv", runlog_columns(self.n_tasks), self.records)
        _write_csv(d / "eval.csv", evalog_columns(self.n_tasks), self.evals)
        # kept apart so runlog.csv is reproducible bit for bit
        _write_csv(d / "timing.csv", ["episode", "wall_clock"], self.wall_clock)

    @classmethod
    def read(cls, directory) -> "RunLog":
        d = Path(directory)
        records = _read_csv(d / "runlog.csv")
        evals = _read_csv(d / "eval.csv") if (d / "eval.csv").exists() else []
        header = (d / "runlog.csv").read_text().splitlines()[0].split(",")
        n_tasks = sum(1 for c in header if c.startswith("score_"))
        return cls(n_tasks, records, evals)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _read_csv(path) -> list:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


@dataclass
class EvalStats:
    mean_error: np.ndarray
    median_error: np.ndarray
    mean_score: np.ndarray
    success_rate: float
    final_errors: np.ndarray  # (episodes, n_tasks)

    def as_record(self, episode: int) -> dict:
        rec = {"episode": episode, "success_rate": self.success_rate}
        for i in range(len(self.mean_error)):
            rec[f"mean_error_{i}"] = self.mean_error[i]
            rec[f"median_error_{i}"] = self.median_error[i]
            rec[f"mean_score_{i}"] = self.mean_score[i]
        return rec


def rollout_final_errors(actor: DenseNetwork, env: ReachEnv, episodes: int, rng) -> np.ndarray:
    """Noiseless rollouts; final end-effector errors, shape ``(episodes, n_tasks)``."""
    out = np.empty((episodes, env.n_tasks))
    bound = env.action_bound
    for k in range(episodes):
        s = env.reset(rng)
        done = False
        while not done:
            a, _ = actor.forward(s)
            res = env.step(np.clip(a, -bound, bound))
            s, done = res.observation, res.done
        out[k] = env.errors()
    return out


def summarize(final_errors: np.ndarray, tolerances) -> EvalStats:
    return EvalStats(final_errors.mean(axis=0), np.median(final_errors, axis=0),
                     scores(final_errors).mean(axis=0),
                     float(np.mean(np.all(final_errors < tolerances, axis=1))), final_errors)


def evaluate_actor(actor: DenseNetwork, env: ReachEnv, episodes: int, seed: int) -> EvalStats:
    if actor.input_dim != env.observation_dim or actor.output_dim != env.action_dim:
        raise ValueError(f"actor maps {actor.input_dim} -> {actor.output_dim}, environment needs "
                         f"{env.observation_dim} -> {env.action_dim}")
    errors = rollout_final_errors(actor, env, episodes, np.random.default_rng(seed))
    return summarize(errors, env.tolerances)


def evaluate(checkpoint, env, episodes: int = 20, seed: int = 0, max_steps: int | None = None) -> EvalStats:
    """Load the actor from ``checkpoint`` and evaluate it on ``env`` (a ReachEnv, tree name or path)."""
    networks, _ = load_checkpoint(checkpoint)
    if not isinstance(env, ReachEnv):
        env = ReachEnv(load_tree(env), max_steps=max_steps or 200)
    return evaluate_actor(networks["actor"], env, episodes, seed)


def _save(agent: Agent, config: TrainConfig, seed: int, episode: int, directory: Path, **meta) -> Path:
    return save_checkpoint(directory / checkpoint_name(config.algorithm, seed, episode), agent.networks(),
                           {"algorithm": config.algorithm, "seed": seed, "episode": episode,
                            "env": config.env, **meta})


@dataclass
class RunResult:
    seed: int
    log: RunLog
    agent: Agent
    directory: Path
    env_steps: int = 0


def run_seed(config: TrainConfig, seed: int, write: bool = True) -> RunResult:
    """Train one seed. Everything random derives from ``seed``."""
    init_ss, env_ss, noise_ss, buf_ss = np.random.SeedSequence(seed).spawn(4)
    env = make_env(config, np.random.default_rng(env_ss))
    eval_env = make_env(config)
    agent = Agent.create(config.algorithm, env.observation_dim, env.partition(),
                         config.agent_config(env.action_bound), np.random.default_rng(init_ss))
    n_values = agent.n_values
    buffer = ReplayBuffer(config.buffer_capacity, env.observation_dim, env.action_dim, n_values,
                          np.random.default_rng(buf_ss))
    noise = GaussianNoise(config.noise_sigma * env.action_bound, env.action_dim, config.noise_decay,
                          np.random.default_rng(noise_ss))
    out = run_dir(config, seed)
    ckpt_dir = out / "checkpoints"
    runlog = RunLog(env.n_tasks)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        config.replace(seeds=[seed]).dump(out / "config.yaml")
        _save(agent, config, seed, 0, ckpt_dir)

    t0 = time.perf_counter()
    env_steps = 0
    try:
        for episode in range(1, config.episodes + 1):
            noise.reset(episode - 1)
            s = env.reset()
            reward_sum = np.zeros(n_values)
            score_sum = np.zeros(env.n_tasks)
            losses, grad_norms = [], []
            steps = 0
            for _ in range(config.max_steps):
                a = act(agent, s, noise)
                res = env.step(a)
                if agent.is_ddpg:
                    rewards, task_done = [res.reward_ddpg], [bool(res.task_done.all())]
                else:
                    rewards, task_done = res.rewards, res.task_done
                buffer.add(Transition(s, a, rewards, res.observation, task_done, res.done))
                report = train_step(agent, buffer, config.batch_size)
                if not report.skipped:
                    losses.append(float(np.sum(report.critic_losses)))
                    grad_norms.append(report.actor_grad_norm)
                reward_sum += rewards
                score_sum += scores(res.errors)
                s = res.observation
                steps += 1
                env_steps += 1
                if res.done:
                    break
            rec = {"episode": episode, "steps": steps,
                   "avg_reward": float(reward_sum.mean() / steps),
                   "critic_loss": float(np.mean(losses)) if losses else 0.0,
                   "actor_grad_norm": float(np.mean(grad_norms)) if grad_norms else 0.0,
                   "updates": len(losses)}
            final = env.errors()
            for i in range(env.n_tasks):
                rec[f"score_{i}"] = score_sum[i] / steps
                rec[f"final_error_{i}"] = final[i]
            runlog.records.append(rec)
            runlog.wall_clock.append({"episode": episode, "wall_clock": time.perf_counter() - t0})

            if episode % config.eval_every == 0 or episode == config.episodes:
                stats = evaluate_actor(agent.actor, eval_env, config.eval_episodes, config.eval_seed + seed)
                runlog.evals.append(stats.as_record(episode))
                log.info("%s seed %d ep %d: eval errors %s success %.2f", config.algorithm, seed, episode,
                         np.round(stats.mean_error, 3), stats.success_rate)
                if write:
                    _save(agent, config, seed, episode, ckpt_dir)
    except NonFiniteError as exc:
        # the failed update was not applied, so the agent still holds the last good parameters
        runlog.status = f"aborted: {exc}"
        log.error("%s seed %d aborted at episode %d: %s", config.algorithm, seed, episode, exc)
        if write:
            _save(agent, config, seed, episode, ckpt_dir, aborted=True)
    if write:
        runlog.write(out)
        (out / "status.txt").write_text(runlog.status + "\n")
    return RunResult(seed, runlog, agent, out, env_steps)


def run_training(config: TrainConfig, write: bool = True) -> dict:
    """Train every seed in ``config.seeds`` sequentially; returns ``{seed: RunLog}``."""
    return {seed: run_seed(config, seed, write).log for seed in config.seeds}
