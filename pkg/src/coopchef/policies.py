"""Policy handles: a uniform act contract over scripted, tabular, and neural
controllers, plus versioned checkpoint files.

Every handle is callable as (state, player_index) -> action and exposes a
stable ``policy_id``. Handles own their random streams; ``reseeded(seed)``
returns an independent copy so evaluation code can pin per-episode
determinism without mutating shared instances.
"""

from __future__ import annotations

import hashlib
import io
import random

import numpy as np
import torch
from torch import nn

from coopchef import engine
from coopchef.scripted import ScriptedPolicy

CHECKPOINT_VERSION = 1


class NoOpPolicy:
    """Stands still forever."""

    policy_id = "noop"

    def __call__(self, state, player_index):
        return engine.STAY

    def reseeded(self, seed):
        return self


class RandomPolicy:
    """Uniform over all six actions, seeded."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    @property
    def policy_id(self) -> str:
        return "random"

    def reseeded(self, seed: int) -> "RandomPolicy":
        return RandomPolicy(seed)

    def __call__(self, state, player_index):
        return self.rng.randrange(engine.N_ACTIONS)


class TabularPolicy:
    """Softmax-in-logits policy over hashable state keys.

    ``key_fn`` collapses a GameState to the table key; unseen keys fall back
    to uniform. Used on mini layouts where the reachable key space is small.
    """

    def __init__(self, key_fn, n_actions: int = engine.N_ACTIONS, seed: int = 0,
                 logits: dict | None = None, policy_id: str = "tabular"):
        self.key_fn = key_fn
        self.n_actions = n_actions
        self.logits = logits if logits is not None else {}
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._id = policy_id

    @property
    def policy_id(self) -> str:
        return self._id

    def reseeded(self, seed: int) -> "TabularPolicy":
        return TabularPolicy(self.key_fn, self.n_actions, seed, self.logits, self._id)

    def distribution(self, state, player_index) -> np.ndarray:
        key = self.key_fn(state, player_index)
        z = self.logits.get(key)
        if z is None:
            return np.full(self.n_actions, 1.0 / self.n_actions)
        z = z - np.max(z)
        p = np.exp(z)
        return p / p.sum()

    def __call__(self, state, player_index):
        p = self.distribution(state, player_index)
        return int(self.rng.choice(self.n_actions, p=p))


def mlp(sizes: list[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(nn.Tanh())
    return nn.Sequential(*layers)


def orthogonal_init(module: nn.Module, gain: float = np.sqrt(2)) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.GRU)):
            for name, p in m.named_parameters():
                if "weight" in name:
                    nn.init.orthogonal_(p, gain=gain)
                elif "bias" in name:
                    nn.init.zeros_(p)


class ActorCriticNet(nn.Module):
    """Feed-forward actor-critic over flat observation features.

    The critic may take extra features (partner identity) that the actor
    never sees; pass ``critic_extra`` sized accordingly.
    """

    def __init__(self, obs_size: int, n_actions: int = engine.N_ACTIONS,
                 hidden: int = 64, critic_extra: int = 0):
        super().__init__()
        self.obs_size = obs_size
        self.n_actions = n_actions
        self.hidden = hidden
        self.critic_extra = critic_extra
        self.actor = mlp([obs_size, hidden, hidden, n_actions])
        self.critic = mlp([obs_size + critic_extra, hidden, hidden, 1])
        orthogonal_init(self)
        # Small-gain output layers keep early policies near uniform.
        nn.init.orthogonal_(self.actor[-1].weight, gain=0.01)
        nn.init.orthogonal_(self.critic[-1].weight, gain=1.0)

    def logits(self, obs: torch.Tensor) -> torch.Tensor:
        return self.actor(obs)

    def value(self, obs: torch.Tensor, extra: torch.Tensor | None = None) -> torch.Tensor:
        if self.critic_extra:
            if extra is None:
                extra = torch.zeros(*obs.shape[:-1], self.critic_extra)
            obs = torch.cat([obs, extra], dim=-1)
        return self.critic(obs).squeeze(-1)


class RecurrentActorCriticNet(nn.Module):
    """GRU actor-critic: the actor conditions on episode history.

    forward() consumes one timestep and a hidden state, returning
    (logits, value, next hidden). Sequence evaluation for updates runs the
    GRU over (T, B, obs) batches.
    """

    def __init__(self, obs_size: int, n_actions: int = engine.N_ACTIONS,
                 hidden: int = 64, critic_extra: int = 0):
        super().__init__()
        self.obs_size = obs_size
        self.n_actions = n_actions
        self.hidden = hidden
        self.critic_extra = critic_extra
        self.encoder = nn.Sequential(nn.Linear(obs_size, hidden), nn.Tanh())
        self.gru = nn.GRU(hidden, hidden)
        self.actor_head = nn.Linear(hidden, n_actions)
        self.critic_head = mlp([hidden + critic_extra, hidden, 1])
        orthogonal_init(self)
        nn.init.orthogonal_(self.actor_head.weight, gain=0.01)

    def initial_hidden(self, batch: int) -> torch.Tensor:
        return torch.zeros(1, batch, self.hidden)

    def forward(self, obs: torch.Tensor, h: torch.Tensor,
                extra: torch.Tensor | None = None):
        x = self.encoder(obs).unsqueeze(0)  # (1, B, H)
        out, h_next = self.gru(x, h)
        feat = out.squeeze(0)
        logits = self.actor_head(feat)
        if self.critic_extra:
            if extra is None:
                extra = torch.zeros(feat.shape[0], self.critic_extra)
            feat = torch.cat([feat, extra], dim=-1)
        value = self.critic_head(feat).squeeze(-1)
        return logits, value, h_next

    def run_sequence(self, obs_seq: torch.Tensor, h0: torch.Tensor,
                     extra_seq: torch.Tensor | None = None,
                     dones: torch.Tensor | None = None):
        """obs_seq (T, B, obs) -> (logits (T,B,A), values (T,B)).

        ``dones`` (T, B) marks steps after which the episode reset; the
        hidden state is zeroed there, matching what rollout collection did.
        """
        x = self.encoder(obs_seq)
        if dones is None:
            out, _ = self.gru(x, h0)
        else:
            h = h0
            outs = []
            for t in range(x.shape[0]):
                step_out, h = self.gru(x[t].unsqueeze(0), h)
                outs.append(step_out)
                h = h * (1.0 - dones[t].float()).view(1, -1, 1)
            out = torch.cat(outs, dim=0)
        logits = self.actor_head(out)
        feat = out
        if self.critic_extra:
            if extra_seq is None:
                extra_seq = torch.zeros(*out.shape[:2], self.critic_extra)
            feat = torch.cat([out, extra_seq], dim=-1)
        values = self.critic_head(feat).squeeze(-1)
        return logits, values


class ParametricPolicy:
    """Engine-facing wrapper around a trained network.

    Samples from the network's action distribution with a private torch
    generator (or acts greedily when ``greedy=True``). Recurrent networks
    carry per-episode hidden state, reset whenever the state's tick is 0.
    """

    def __init__(self, net: nn.Module, seed: int = 0, greedy: bool = False,
                 policy_id: str | None = None):
        self.net = net
        self.seed = seed
        self.greedy = greedy
        self.gen = torch.Generator().manual_seed(seed)
        self._id = policy_id or f"net:{parameter_hash(net)[:12]}"
        self._hidden = None

    @property
    def policy_id(self) -> str:
        return self._id

    def reseeded(self, seed: int) -> "ParametricPolicy":
        return ParametricPolicy(self.net, seed, self.greedy, self._id)

    def __call__(self, state: engine.GameState, player_index: int) -> int:
        obs = torch.from_numpy(engine.observe(state, player_index))
        with torch.no_grad():
            if isinstance(self.net, RecurrentActorCriticNet):
                if state.tick == 0 or self._hidden is None:
                    self._hidden = self.net.initial_hidden(1)
                logits, _, self._hidden = self.net(obs.unsqueeze(0), self._hidden)
                logits = logits.squeeze(0)
            else:
                logits = self.net.logits(obs)
            if self.greedy:
                return int(torch.argmax(logits))
            probs = torch.softmax(logits, dim=-1)
            return int(torch.multinomial(probs, 1, generator=self.gen))


def parameter_hash(net: nn.Module) -> str:
    """Stable digest of all parameters, for checkpoint ids and determinism checks."""
    h = hashlib.sha256()
    for name, p in sorted(net.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().to(torch.float32).numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(path: str, net: nn.Module, config: dict,
                    policy_id: str | None = None) -> str:
    """Write a versioned checkpoint blob; returns the policy id."""
    pid = policy_id or f"net:{parameter_hash(net)[:12]}"
    arch = {
        "recurrent": isinstance(net, RecurrentActorCriticNet),
        "obs_size": net.obs_size,
        "n_actions": net.n_actions,
        "hidden": net.hidden,
        "critic_extra": net.critic_extra,
    }
    torch.save({
        "format_version": CHECKPOINT_VERSION,
        "policy_id": pid,
        "arch": arch,
        "config": config,
        "state_dict": net.state_dict(),
    }, path)
    return pid


def load_checkpoint(path: str, seed: int = 0, greedy: bool = False) -> ParametricPolicy:
    blob = torch.load(path, weights_only=False)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint version {blob.get('format_version')} != {CHECKPOINT_VERSION}"
        )
    arch = blob["arch"]
    cls = RecurrentActorCriticNet if arch["recurrent"] else ActorCriticNet
    net = cls(arch["obs_size"], arch["n_actions"], arch["hidden"], arch["critic_extra"])
    net.load_state_dict(blob["state_dict"])
    net.eval()
    return ParametricPolicy(net, seed=seed, greedy=greedy, policy_id=blob["policy_id"])


def load_checkpoint_config(path: str) -> dict:
    blob = torch.load(path, weights_only=False)
    return blob["config"]


def resolve_policy(spec: str, seed: int = 0):
    """Turn a CLI policy spec into a handle.

    Forms: ``noop``, ``random``, ``script:<kind>``, ``ckpt:<path>`` (sampling)
    or ``greedy:<path>``.
    """
    if spec == "noop":
        return NoOpPolicy()
    if spec == "random":
        return RandomPolicy(seed)
    if spec.startswith("script:"):
        return ScriptedPolicy(spec.split(":", 1)[1], seed)
    if spec.startswith("ckpt:"):
        return load_checkpoint(spec.split(":", 1)[1], seed=seed)
    if spec.startswith("greedy:"):
        return load_checkpoint(spec.split(":", 1)[1], seed=seed, greedy=True)
    raise ValueError(f"unknown policy spec {spec!r}")
