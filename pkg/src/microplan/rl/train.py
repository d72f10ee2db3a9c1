"""DQN training loop with the global/local switch.

Deterministic mode steps the parallel environments round-robin on one thread,
so one (config, seed) pair always produces the same evaluation history.
Transitions flagged ignore_transition (global phase) are never stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .env import EscapeEnv
from .net import Adam, QNet, huber_loss_and_grad, td_targets
from .replay import ReplayBuffer


@dataclass
class TrainConfig:
    seed: int = 0
    total_steps: int = 1_000_000  # environment steps across all envs
    n_env: int = 8
    batch_size: int = 256
    warmup: int = 5_000
    update_every: int = 4
    target_sync: int = 1_000
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_fraction: float = 0.4  # of total_steps
    lr_start: float = 1e-4
    eval_every_updates: int = 5_000
    eval_episodes: int = 50
    replay_capacity: int = 500_000


def epsilon_at(step, cfg: TrainConfig):
    """Linear 1 -> 0.01 over the first eps_fraction of training, then flat."""
    horizon = cfg.eps_fraction * cfg.total_steps
    if step >= horizon:
        return cfg.eps_end
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * (step / horizon)


def lr_at(step, cfg: TrainConfig):
    """Linear decay to zero across the whole run."""
    return cfg.lr_start * max(0.0, 1.0 - step / cfg.total_steps)


def evaluate(net: QNet, seed, n_episodes=50, env_kwargs=None):
    """Greedy rollouts; only episodes that actually enter a zone count."""
    env = EscapeEnv(seed=seed, **(env_kwargs or {}))
    successes = 0
    returns = []
    lengths = []
    counted = 0
    attempts = 0
    while counted < n_episodes and attempts < 40 * n_episodes:
        obs = env.reset()
        ret = 0.0
        steps = 0
        attempts += 1
        while True:
            if env.in_zone():
                q = net.forward(obs[None, :])[0]
                action = int(np.argmax(q))
            else:
                action = 0
            r = env.step(action)
            obs = r.obs
            if not r.ignore_transition:
                ret += r.reward
                steps += 1
            if r.done:
                if env.entered:
                    counted += 1
                    returns.append(ret)
                    lengths.append(steps)
                    successes += r.outcome == "success"
                break
    return {
        "episodes": counted,
        "success_rate": successes / counted if counted else 0.0,
        "mean_return": float(np.mean(returns)) if returns else 0.0,
        "mean_length": float(np.mean(lengths)) if lengths else 0.0,
    }


def evaluate_random(seed, n_episodes=500, env_kwargs=None):
    """Uniform-action baseline under the same counting rules."""
    env = EscapeEnv(seed=seed, **(env_kwargs or {}))
    rng = np.random.default_rng(seed + 1)
    successes = 0
    returns = []
    counted = 0
    while counted < n_episodes:
        env.reset()
        ret = 0.0
        while True:
            r = env.step(int(rng.integers(0, 9)))
            if not r.ignore_transition:
                ret += r.reward
            if r.done:
                if env.entered:
                    counted += 1
                    returns.append(ret)
                    successes += r.outcome == "success"
                break
    return {
        "episodes": counted,
        "success_rate": successes / counted,
        "mean_return": float(np.mean(returns)),
    }


def train(cfg: TrainConfig, log_path=None, progress=None):
    """Run the full loop; returns (net, eval history, best snapshot)."""
    rng = np.random.default_rng(cfg.seed)
    net = QNet.create(cfg.seed)
    target = net.copy()
    opt = Adam(net)
    buf = ReplayBuffer(cfg.replay_capacity)
    envs = [
        EscapeEnv(seed=int(rng.integers(0, 2**63 - 1))) for _ in range(cfg.n_env)
    ]
    observations = [env.observe() for env in envs]

    history = []
    best = None  # (success, return, snapshot)
    n_updates = 0
    log = open(log_path, "w") if log_path else None
    step = 0
    try:
        while step < cfg.total_steps:
            for e, env in enumerate(envs):
                if step >= cfg.total_steps:
                    break
                obs = observations[e]
                if env.in_zone() and rng.random() >= epsilon_at(step, cfg):
                    action = int(np.argmax(net.forward(obs[None, :])[0]))
                else:
                    action = int(rng.integers(0, 9))
                res = env.step(action)
                if not res.ignore_transition:
                    buf.add(obs, action, res.reward, res.obs, res.done)
                observations[e] = env.reset() if res.done else res.obs
                step += 1

                if step > cfg.warmup and step % cfg.update_every == 0 and len(buf):
                    o, a, r, o2, d = buf.sample(rng, cfg.batch_size)
                    q_next = target.forward(o2)
                    y = td_targets(r, d, q_next, cfg.gamma)
                    q, cache = net.forward_cached(o)
                    pred = q[np.arange(len(a)), a]
                    loss, dpred = huber_loss_and_grad(pred, y)
                    if not np.isfinite(loss).all():
                        raise FloatingPointError(
                            f"non-finite loss at step {step}"
                        )
                    dout = np.zeros_like(q)
                    dout[np.arange(len(a)), a] = dpred / len(a)
                    gw, gb = net.backward(cache, dout)
                    opt.step(gw + gb, lr_at(step, cfg))
                    n_updates += 1

                    if n_updates % cfg.eval_every_updates == 0:
                        report = evaluate(
                            net, seed=cfg.seed + 7777, n_episodes=cfg.eval_episodes
                        )
                        report["step"] = step
                        report["updates"] = n_updates
                        history.append(report)
                        key = (report["success_rate"], report["mean_return"])
                        if best is None or key > best[0]:
                            best = (key, net.copy())
                        if log:
                            log.write(json.dumps(report) + "\n")
                            log.flush()
                        if progress:
                            progress(report)

                if step % cfg.target_sync == 0:
                    target.load_from(net)
    finally:
        if log:
            log.close()
    return net, history, (best[1] if best else net.copy())
