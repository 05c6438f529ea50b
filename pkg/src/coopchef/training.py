"""PPO self-play and pool training at desk scale.

Three trainers share one rollout/update core:

- ``selfplay_train``: two separate networks in one kitchen, the hidden-reward
  seat scoring by its sampled weight vector and the task seat by plain task
  reward. Produces one biased partner candidate (plus its accomplice).
- ``build_baseline_pool``: task-reward self-play with a shared network,
  either as independent runs keeping early/middle/final checkpoints, or as a
  population whose rollout rewards carry a population-entropy bonus.
- ``train_adaptive``: a recurrent policy trained against a frozen partner
  pool, one uniformly sampled partner per worker episode, with the partner's
  identity fed to the critic only.

Everything is deterministic given (config.seed, worker count): all sampling
flows from generators derived from the config seed, and torch runs
single-threaded.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import torch
from torch import nn

from coopchef import engine, rewards
from coopchef.policies import (
    ActorCriticNet,
    ParametricPolicy,
    RecurrentActorCriticNet,
    parameter_hash,
)

logger = logging.getLogger(__name__)


class EmptyPoolError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 200_000
    rollout_workers: int = 32
    rollout_length: int = 100
    gamma: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 5e-4
    clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 10.0
    huber_delta: float = 10.0
    ppo_epochs: int = 4
    minibatches: int = 4
    hidden: int = 64
    seed: int = 0
    adam_eps: float = 1e-5
    normalize_rewards: bool = True
    population_entropy_coef: float = 0.01

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        for name in ("rollout_workers", "rollout_length", "ppo_epochs",
                     "minibatches", "hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")


@dataclass
class CurvePoint:
    step: int
    task_return: float
    hidden_return: float
    entropy: float
    episodes: int


def format_curve_table(curve: list[CurvePoint]) -> str:
    """Training curve as a plain-text table."""
    lines = [f"{'step':>10}  {'task_return':>12}  {'hidden_return':>14}  "
             f"{'entropy':>8}  {'episodes':>8}"]
    for p in curve:
        lines.append(f"{p.step:>10d}  {p.task_return:>12.2f}  "
                     f"{p.hidden_return:>14.2f}  {p.entropy:>8.3f}  {p.episodes:>8d}")
    return "\n".join(lines) + "\n"


class RunningStd:
    """Streaming standard deviation of discounted returns, for reward scaling."""

    def __init__(self):
        self.count = 1e-4
        self.mean = 0.0
        self.m2 = 1.0

    def update(self, xs: np.ndarray) -> None:
        for x in xs.ravel():
            self.count += 1
            d = x - self.mean
            self.mean += d / self.count
            self.m2 += d * (x - self.mean)

    @property
    def std(self) -> float:
        return max(math.sqrt(self.m2 / self.count), 1e-6)


class _RewardNormalizer:
    """Scales rewards by the running std of the discounted return stream."""

    def __init__(self, n_workers: int, gamma: float, enabled: bool):
        self.enabled = enabled
        self.gamma = gamma
        self.returns = np.zeros(n_workers)
        self.rms = RunningStd()

    def scale(self, raw: np.ndarray, dones: np.ndarray) -> np.ndarray:
        if not self.enabled:
            return raw
        self.returns = self.returns * self.gamma + raw
        self.rms.update(self.returns)
        self.returns[dones] = 0.0
        return raw / self.rms.std


class _Buffer:
    """Fixed-shape rollout storage for one network."""

    def __init__(self, steps: int, workers: int, obs_size: int, extra: int = 0):
        self.obs = np.zeros((steps, workers, obs_size), dtype=np.float32)
        self.actions = np.zeros((steps, workers), dtype=np.int64)
        self.logprobs = np.zeros((steps, workers), dtype=np.float32)
        self.values = np.zeros((steps, workers), dtype=np.float32)
        self.rewards = np.zeros((steps, workers), dtype=np.float32)
        self.dones = np.zeros((steps, workers), dtype=bool)
        self.extra = np.zeros((steps, workers, extra), dtype=np.float32) if extra else None
        self.h0 = None  # recurrent: hidden at step 0 of the chunk

    def compute_gae(self, last_values: np.ndarray, gamma: float, lam: float):
        steps = self.rewards.shape[0]
        adv = np.zeros_like(self.rewards)
        gae = np.zeros(self.rewards.shape[1], dtype=np.float32)
        next_values = last_values
        for t in range(steps - 1, -1, -1):
            alive = ~self.dones[t]
            delta = self.rewards[t] + gamma * next_values * alive - self.values[t]
            gae = delta + gamma * lam * gae * alive
            adv[t] = gae
            next_values = self.values[t]
        return adv, adv + self.values


def _sample_actions(logits: torch.Tensor, gen: torch.Generator):
    probs = torch.softmax(logits, dim=-1)
    actions = torch.multinomial(probs, 1, generator=gen).squeeze(-1)
    logp = torch.log_softmax(logits, dim=-1)
    taken = logp.gather(-1, actions.unsqueeze(-1)).squeeze(-1)
    return actions, taken


def _ppo_losses(logits, values, mb, cfg: TrainConfig):
    logp_all = torch.log_softmax(logits, dim=-1)
    logp = logp_all.gather(-1, mb["actions"].unsqueeze(-1)).squeeze(-1)
    ratio = torch.exp(logp - mb["logprobs"])
    adv = mb["advantages"]
    unclipped = ratio * adv
    clipped = torch.clamp(ratio, 1 - cfg.clip, 1 + cfg.clip) * adv
    policy_loss = -torch.min(unclipped, clipped).mean()
    value_loss = nn.functional.huber_loss(values, mb["returns"], delta=cfg.huber_delta)
    entropy = -(logp_all.exp() * logp_all).sum(-1).mean()
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    return loss, entropy.detach()


def _update_feedforward(net: ActorCriticNet, opt, buf: _Buffer, last_values,
                        cfg: TrainConfig, gen: torch.Generator) -> float:
    adv, ret = buf.compute_gae(last_values, cfg.gamma, cfg.gae_lambda)
    n = adv.size
    flat = {
        "obs": torch.from_numpy(buf.obs.reshape(n, -1)),
        "actions": torch.from_numpy(buf.actions.reshape(n)),
        "logprobs": torch.from_numpy(buf.logprobs.reshape(n)),
        "advantages": torch.from_numpy(adv.reshape(n)),
        "returns": torch.from_numpy(ret.reshape(n)),
    }
    if buf.extra is not None:
        flat["extra"] = torch.from_numpy(buf.extra.reshape(n, -1))
    a = flat["advantages"]
    flat["advantages"] = (a - a.mean()) / (a.std() + 1e-8)
    entropy = 0.0
    for _ in range(cfg.ppo_epochs):
        perm = torch.randperm(n, generator=gen)
        for chunk in perm.chunk(cfg.minibatches):
            mb = {k: v[chunk] for k, v in flat.items()}
            logits = net.logits(mb["obs"])
            values = net.value(mb["obs"], mb.get("extra"))
            loss, ent = _ppo_losses(logits, values, mb, cfg)
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
            opt.step()
            entropy = float(ent)
    return entropy


def _update_recurrent(net: RecurrentActorCriticNet, opt, buf: _Buffer, last_values,
                      cfg: TrainConfig, gen: torch.Generator) -> float:
    adv, ret = buf.compute_gae(last_values, cfg.gamma, cfg.gae_lambda)
    T, W = buf.actions.shape
    data = {
        "obs": torch.from_numpy(buf.obs),            # (T, W, obs)
        "actions": torch.from_numpy(buf.actions),
        "logprobs": torch.from_numpy(buf.logprobs),
        "advantages": torch.from_numpy(adv),
        "returns": torch.from_numpy(ret),
    }
    if buf.extra is not None:
        data["extra"] = torch.from_numpy(buf.extra)
    a = data["advantages"]
    data["advantages"] = (a - a.mean()) / (a.std() + 1e-8)
    dones_t = torch.from_numpy(buf.dones)
    h0 = buf.h0  # (1, W, H) hidden at chunk start, gathered at rollout time
    entropy = 0.0
    n_mb = min(cfg.minibatches, W)
    for _ in range(cfg.ppo_epochs):
        perm = torch.randperm(W, generator=gen)
        for chunk in perm.chunk(n_mb):
            mb = {k: v[:, chunk] for k, v in data.items()}
            logits, values = net.run_sequence(mb["obs"], h0[:, chunk].contiguous(),
                                              mb.get("extra"), dones_t[:, chunk])
            flat_mb = {
                "actions": mb["actions"].reshape(-1),
                "logprobs": mb["logprobs"].reshape(-1),
                "advantages": mb["advantages"].reshape(-1),
                "returns": mb["returns"].reshape(-1),
            }
            loss, ent = _ppo_losses(logits.reshape(-1, logits.shape[-1]),
                                    values.reshape(-1), flat_mb, cfg)
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
            opt.step()
            entropy = float(ent)
    return entropy


class _VecKitchens:
    """N engine instances stepped in lockstep, with per-seat observation batches."""

    def __init__(self, layout: engine.Layout, n: int, seed: int):
        self.layout = layout
        self.n = n
        self.seed = seed
        self.states = [engine.reset(layout, seed + i) for i in range(n)]
        self.episode_task = np.zeros(n)
        self.episode_hidden = np.zeros(n)
        self.finished_task: list[float] = []
        self.finished_hidden: list[float] = []
        self.event_totals = np.zeros((n, layout.n_events))
        self.finished_events: list[np.ndarray] = []

    def observations(self, seat: int) -> np.ndarray:
        return np.stack([engine.observe(s, seat) for s in self.states])

    def step(self, a0: np.ndarray, a1: np.ndarray):
        """Returns (task rewards, event matrix, dones); resets finished episodes."""
        n = self.n
        task = np.zeros(n, dtype=np.float32)
        dones = np.zeros(n, dtype=bool)
        events = np.zeros((n, self.layout.n_events), dtype=np.float32)
        zero = self.layout.zero_events
        for i in range(n):
            out = engine.step(self.states[i], int(a0[i]), int(a1[i]))
            task[i] = out.reward
            if out.events is not zero:
                events[i] = out.events
                self.event_totals[i] += events[i]
            dones[i] = out.done
            if out.done:
                self.finished_task.append(self.episode_task[i] + out.reward)
                self.finished_events.append(self.event_totals[i].copy())
                self.episode_task[i] = 0.0
                self.event_totals[i] = 0.0
                self.states[i] = engine.reset(self.layout, self.seed + self.n + i)
            else:
                self.episode_task[i] += out.reward
                self.states[i] = out.state
        return task, events, dones

    def drain_stats(self):
        task = self.finished_task
        hidden = self.finished_hidden
        ev = self.finished_events
        self.finished_task, self.finished_hidden, self.finished_events = [], [], []
        return task, hidden, ev


def _set_deterministic(seed: int) -> None:
    torch.manual_seed(seed)
    torch.set_num_threads(1)


def selfplay_train(layout: engine.Layout, weights: rewards.WeightVector,
                   config: TrainConfig):
    """Two-network self-play with asymmetric rewards.

    Seat assignment alternates by worker so neither network specializes to
    one side of the kitchen. Returns (hidden-seat policy, task-seat policy,
    curve); with ``total_steps=0`` the initial policies come back untouched.
    """
    if weights.event_names != layout.event_names:
        raise rewards.DimensionMismatchError(
            "weight vector's event list does not match the layout")
    _set_deterministic(config.seed)
    obs_size = engine.observation_size(layout)
    net_w = ActorCriticNet(obs_size, hidden=config.hidden)
    net_a = ActorCriticNet(obs_size, hidden=config.hidden)
    opt_w = torch.optim.Adam(net_w.parameters(), lr=config.lr, eps=config.adam_eps)
    opt_a = torch.optim.Adam(net_a.parameters(), lr=config.lr, eps=config.adam_eps)
    gen = torch.Generator().manual_seed(config.seed)

    n = config.rollout_workers
    vec = _VecKitchens(layout, n, config.seed)
    w_arr = weights.as_array().astype(np.float32)
    mult = weights.multiplier
    # Hidden-reward seat per worker: even workers seat 0, odd workers seat 1.
    w_seat = np.arange(n) % 2
    norm_w = _RewardNormalizer(n, config.gamma, config.normalize_rewards)
    norm_a = _RewardNormalizer(n, config.gamma, config.normalize_rewards)
    episode_hidden = np.zeros(n)
    finished_hidden: list[float] = []

    curve: list[CurvePoint] = []
    steps_done = 0
    t_start = time.monotonic()
    while steps_done < config.total_steps:
        chunk = min(config.rollout_length,
                    max(1, (config.total_steps - steps_done) // n) if n else 1)
        buf_w = _Buffer(chunk, n, obs_size)
        buf_a = _Buffer(chunk, n, obs_size)
        for t in range(chunk):
            obs0 = vec.observations(0)
            obs1 = vec.observations(1)
            # Batch each network over the workers where it plays.
            obs_w = np.where(w_seat[:, None] == 0, obs0, obs1)
            obs_a = np.where(w_seat[:, None] == 0, obs1, obs0)
            tw = torch.from_numpy(obs_w)
            ta = torch.from_numpy(obs_a)
            with torch.no_grad():
                logits_w = net_w.logits(tw)
                val_w = net_w.value(tw)
                act_w, logp_w = _sample_actions(logits_w, gen)
                logits_a = net_a.logits(ta)
                val_a = net_a.value(ta)
                act_a, logp_a = _sample_actions(logits_a, gen)
            aw = act_w.numpy()
            aa = act_a.numpy()
            a0 = np.where(w_seat == 0, aw, aa)
            a1 = np.where(w_seat == 0, aa, aw)
            task, events, dones = vec.step(a0, a1)
            hidden = events @ w_arr + mult * task
            episode_hidden += hidden
            for i in np.nonzero(dones)[0]:
                finished_hidden.append(float(episode_hidden[i]))
                episode_hidden[i] = 0.0

            buf_w.obs[t] = obs_w
            buf_w.actions[t] = aw
            buf_w.logprobs[t] = logp_w.numpy()
            buf_w.values[t] = val_w.numpy()
            buf_w.rewards[t] = norm_w.scale(hidden.astype(np.float32), dones)
            buf_w.dones[t] = dones
            buf_a.obs[t] = obs_a
            buf_a.actions[t] = aa
            buf_a.logprobs[t] = logp_a.numpy()
            buf_a.values[t] = val_a.numpy()
            buf_a.rewards[t] = norm_a.scale(task, dones)
            buf_a.dones[t] = dones
        steps_done += chunk * n

        obs0 = vec.observations(0)
        obs1 = vec.observations(1)
        obs_w = np.where(w_seat[:, None] == 0, obs0, obs1)
        obs_a = np.where(w_seat[:, None] == 0, obs1, obs0)
        with torch.no_grad():
            last_w = net_w.value(torch.from_numpy(obs_w)).numpy()
            last_a = net_a.value(torch.from_numpy(obs_a)).numpy()
        _update_feedforward(net_w, opt_w, buf_w, last_w, config, gen)
        ent = _update_feedforward(net_a, opt_a, buf_a, last_a, config, gen)

        task_eps, _, _ = vec.drain_stats()
        hid_eps, finished_hidden = finished_hidden, []
        curve.append(CurvePoint(
            step=steps_done,
            task_return=float(np.mean(task_eps)) if task_eps else float("nan"),
            hidden_return=float(np.mean(hid_eps)) if hid_eps else float("nan"),
            entropy=ent,
            episodes=len(task_eps),
        ))
        if len(curve) % 10 == 1:
            logger.info("selfplay %s: step %d/%d task %.2f hidden %.2f (%.0f s)",
                        layout.name, steps_done, config.total_steps,
                        curve[-1].task_return, curve[-1].hidden_return,
                        time.monotonic() - t_start)

    net_w.eval()
    net_a.eval()
    pol_w = ParametricPolicy(net_w, seed=config.seed, policy_id=None)
    pol_a = ParametricPolicy(net_a, seed=config.seed + 1, policy_id=None)
    return pol_w, pol_a, curve


def _selfplay_shared(layout: engine.Layout, config: TrainConfig,
                     shaping: rewards.ShapingSchedule | None,
                     population: list[ActorCriticNet] | None = None,
                     net: ActorCriticNet | None = None,
                     snapshot_at: tuple[int, ...] = ()):
    """Task-reward self-play with one shared network on both seats.

    Optional population entropy bonus: each step's reward adds
    coef * (-log mean_k pi_k(a|s)) over the population's policies.
    Returns (net, snapshots dict step->state_dict, curve).
    """
    _set_deterministic(config.seed)
    obs_size = engine.observation_size(layout)
    if net is None:
        net = ActorCriticNet(obs_size, hidden=config.hidden)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr, eps=config.adam_eps)
    gen = torch.Generator().manual_seed(config.seed)
    n = config.rollout_workers
    vec = _VecKitchens(layout, n, config.seed)
    # Both seats share the buffer, so the return stream is 2n wide.
    norm = _RewardNormalizer(2 * n, config.gamma, config.normalize_rewards)
    shape_w = shaping.as_weights(layout.event_names).astype(np.float32) if shaping else None

    snapshots: dict[int, dict] = {}
    curve: list[CurvePoint] = []
    steps_done = 0
    pending = sorted(snapshot_at)
    while pending and pending[0] <= steps_done:
        snapshots[pending.pop(0)] = {k: v.clone() for k, v in net.state_dict().items()}
    while steps_done < config.total_steps:
        chunk = config.rollout_length
        buf = _Buffer(chunk, 2 * n, obs_size)  # both seats share the network
        for t in range(chunk):
            obs0 = vec.observations(0)
            obs1 = vec.observations(1)
            both = torch.from_numpy(np.concatenate([obs0, obs1]))
            with torch.no_grad():
                logits = net.logits(both)
                values = net.value(both)
                actions, logp = _sample_actions(logits, gen)
            acts = actions.numpy()
            task, events, dones = vec.step(acts[:n], acts[n:])
            reward = task.copy()
            if shape_w is not None:
                factor = rewards.shaping_factor(steps_done + t * n, shaping)
                reward += factor * (events @ shape_w)
            if population:
                with torch.no_grad():
                    pop_probs = torch.zeros(2 * n)
                    for member in population:
                        p = torch.softmax(member.logits(both), dim=-1)
                        pop_probs += p.gather(-1, actions.unsqueeze(-1)).squeeze(-1)
                    pop_probs /= len(population)
                bonus = -torch.log(pop_probs.clamp_min(1e-8)).numpy()
                reward = reward + config.population_entropy_coef * \
                    (bonus[:n] + bonus[n:]) / 2.0
            both_rew = np.concatenate([reward, reward]).astype(np.float32)
            both_dones = np.concatenate([dones, dones])
            buf.obs[t] = both.numpy()
            buf.actions[t] = acts
            buf.logprobs[t] = logp.numpy()
            buf.values[t] = values.numpy()
            buf.rewards[t] = norm.scale(both_rew, both_dones)
            buf.dones[t] = both_dones
        steps_done += chunk * n
        both = torch.from_numpy(np.concatenate([vec.observations(0),
                                                vec.observations(1)]))
        with torch.no_grad():
            last = net.value(both).numpy()
        ent = _update_feedforward(net, opt, buf, last, config, gen)
        task_eps, _, _ = vec.drain_stats()
        curve.append(CurvePoint(
            step=steps_done,
            task_return=float(np.mean(task_eps)) if task_eps else float("nan"),
            hidden_return=float("nan"),
            entropy=ent,
            episodes=len(task_eps),
        ))
        while pending and pending[0] <= steps_done:
            snapshots[pending.pop(0)] = {k: v.clone() for k, v in net.state_dict().items()}
    for step in pending:
        snapshots[step] = {k: v.clone() for k, v in net.state_dict().items()}
    net.eval()
    return net, snapshots, curve


def build_baseline_pool(method: str, layout: engine.Layout, n_policies: int,
                        config: TrainConfig,
                        shaping: rewards.ShapingSchedule | None = None):
    """Train checkpoint pools: ``fcp`` independent runs or ``mep`` population.

    Either way each run/member contributes its initial, middle, and final
    parameters, so the result is 3 * n_policies handles (with curves).
    """
    if n_policies < 1:
        raise ValueError("n_policies must be >= 1")
    method = method.lower()
    if method not in ("fcp", "mep"):
        raise ValueError(f"method must be 'fcp' or 'mep', got {method!r}")
    obs_size = engine.observation_size(layout)
    marks = (0, config.total_steps // 2, config.total_steps)
    handles = []
    curves = []
    population: list[ActorCriticNet] = []
    if method == "mep":
        _set_deterministic(config.seed)
        population = [ActorCriticNet(obs_size, hidden=config.hidden)
                      for _ in range(n_policies)]
    for run in range(n_policies):
        run_cfg = replace(config, seed=config.seed + 1000 * run)
        net, snaps, curve = _selfplay_shared(
            layout, run_cfg, shaping,
            population=population if method == "mep" else None,
            net=population[run] if method == "mep" else None,
            snapshot_at=marks,
        )
        curves.append(curve)
        for stage, step in zip(("init", "mid", "final"), marks):
            snap_net = ActorCriticNet(obs_size, hidden=config.hidden)
            snap_net.load_state_dict(snaps[step])
            snap_net.eval()
            pid = f"{method}:run{run}:{stage}:{parameter_hash(snap_net)[:8]}"
            handles.append(ParametricPolicy(snap_net, seed=run_cfg.seed,
                                            policy_id=pid))
    return handles, curves


def train_adaptive(partner_pool: list, layout: engine.Layout, config: TrainConfig,
                   shaping: rewards.ShapingSchedule | None = None):
    """Recurrent task-reward training against a frozen partner pool.

    Each worker draws a uniform partner per episode. The critic sees the
    partner's one-hot identity; the actor sees only observations, carrying a
    GRU state across the episode to infer who it is playing with. The optional
    shaping bonus anneals away over its horizon, so late training optimizes
    the plain task return. Returns (policy handle, curve).
    """
    if not partner_pool:
        raise EmptyPoolError("partner pool is empty")
    _set_deterministic(config.seed)
    obs_size = engine.observation_size(layout)
    n_partners = len(partner_pool)
    net = RecurrentActorCriticNet(obs_size, hidden=config.hidden,
                                  critic_extra=n_partners)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr, eps=config.adam_eps)
    gen = torch.Generator().manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    n = config.rollout_workers
    vec = _VecKitchens(layout, n, config.seed)
    norm = _RewardNormalizer(n, config.gamma, config.normalize_rewards)
    shape_w = shaping.as_weights(layout.event_names).astype(np.float32) if shaping else None

    # Adaptive seat alternates by worker parity; partner takes the other seat.
    my_seat = np.arange(n) % 2
    partner_idx = rng.integers(n_partners, size=n)
    partners = [partner_pool[partner_idx[i]].reseeded(config.seed + i)
                for i in range(n)]
    hidden_state = net.initial_hidden(n)

    curve: list[CurvePoint] = []
    steps_done = 0
    while steps_done < config.total_steps:
        chunk = config.rollout_length
        buf = _Buffer(chunk, n, obs_size, extra=n_partners)
        buf.h0 = hidden_state.clone()
        for t in range(chunk):
            obs_mine = np.stack([
                engine.observe(vec.states[i], int(my_seat[i])) for i in range(n)
            ])
            onehot = np.zeros((n, n_partners), dtype=np.float32)
            onehot[np.arange(n), partner_idx] = 1.0
            tm = torch.from_numpy(obs_mine)
            with torch.no_grad():
                logits, values, hidden_state = net(tm, hidden_state,
                                                   torch.from_numpy(onehot))
                actions, logp = _sample_actions(logits, gen)
            mine = actions.numpy()
            theirs = np.array([
                partners[i](vec.states[i], int(1 - my_seat[i])) for i in range(n)
            ])
            a0 = np.where(my_seat == 0, mine, theirs)
            a1 = np.where(my_seat == 0, theirs, mine)
            task, events, dones = vec.step(a0, a1)
            reward = task.copy()
            if shape_w is not None:
                factor = rewards.shaping_factor(steps_done + t * n, shaping)
                reward += factor * (events @ shape_w)

            buf.obs[t] = obs_mine
            buf.actions[t] = mine
            buf.logprobs[t] = logp.numpy()
            buf.values[t] = values.numpy()
            buf.rewards[t] = norm.scale(reward.astype(np.float32), dones)
            buf.dones[t] = dones
            buf.extra[t] = onehot
            for i in np.nonzero(dones)[0]:
                partner_idx[i] = rng.integers(n_partners)
                partners[i] = partner_pool[partner_idx[i]].reseeded(
                    config.seed + steps_done + t * n + int(i))
                hidden_state[:, i] = 0.0
        steps_done += chunk * n
        obs_mine = np.stack([
            engine.observe(vec.states[i], int(my_seat[i])) for i in range(n)
        ])
        onehot = np.zeros((n, n_partners), dtype=np.float32)
        onehot[np.arange(n), partner_idx] = 1.0
        with torch.no_grad():
            _, last_values, _ = net(torch.from_numpy(obs_mine), hidden_state,
                                    torch.from_numpy(onehot))
        ent = _update_recurrent(net, opt, buf, last_values.numpy(), config, gen)
        task_eps, _, _ = vec.drain_stats()
        curve.append(CurvePoint(
            step=steps_done,
            task_return=float(np.mean(task_eps)) if task_eps else float("nan"),
            hidden_return=float("nan"),
            entropy=ent,
            episodes=len(task_eps),
        ))
        if len(curve) % 10 == 1:
            logger.info("adaptive %s: step %d/%d task %.2f",
                        layout.name, steps_done, config.total_steps,
                        curve[-1].task_return)
    net.eval()
    return ParametricPolicy(net, seed=config.seed), curve


# Tabular policy-gradient utilities for exact-arithmetic sanity checks on
# explicit mini-MDPs (softmax-in-logits parameterization).

def tabular_exact_return(P: np.ndarray, R: np.ndarray, gamma: float,
                         logits: np.ndarray, start: np.ndarray) -> float:
    """Exact discounted return of softmax(logits) from a start distribution."""
    z = logits - logits.max(axis=1, keepdims=True)
    pi = np.exp(z)
    pi /= pi.sum(axis=1, keepdims=True)
    S = P.shape[0]
    P_pi = np.einsum("sat,sa->st", P, pi)
    r_pi = (pi * R).sum(axis=1)
    V = np.linalg.solve(np.eye(S) - gamma * P_pi, r_pi)
    return float(start @ V)


def tabular_batch_gradient(P: np.ndarray, R: np.ndarray, gamma: float,
                           logits: np.ndarray, start: np.ndarray, horizon: int,
                           episodes: int, seed: int) -> np.ndarray:
    """Monte-Carlo policy-gradient estimate on a frozen batch of episodes.

    REINFORCE with discounted reward-to-go; returns d return / d logits as an
    (S, A) array. The batch is fully determined by the seed.
    """
    rng = np.random.default_rng(seed)
    z = logits - logits.max(axis=1, keepdims=True)
    pi = np.exp(z)
    pi /= pi.sum(axis=1, keepdims=True)
    S, A = pi.shape
    grad = np.zeros_like(logits)
    for _ in range(episodes):
        s = rng.choice(S, p=start)
        traj = []
        for t in range(horizon):
            a = rng.choice(A, p=pi[s])
            traj.append((s, a, R[s, a]))
            s = rng.choice(S, p=P[s, a])
        g = 0.0
        for t in range(horizon - 1, -1, -1):
            s, a, r = traj[t]
            g = r + gamma * g
            coeff = (gamma ** t) * g
            grad[s] -= coeff * pi[s]
            grad[s, a] += coeff
    return grad / episodes
