"""Entropy-regularized planning on small explicit MDPs.

Soft value iteration finds the policy maximizing expected return plus
policy-entropy bonus scaled by a temperature. Used to verify reward
constructions and as an exact oracle in tests; never applied to full
kitchen state spaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax


class NonConvergenceError(RuntimeError):
    """Soft value iteration hit the iteration cap before reaching tolerance."""


@dataclass(frozen=True)
class FiniteMDP:
    """Explicit single-agent MDP: dense transition tensor, one discount."""

    transition: np.ndarray  # (S, A, S) row-stochastic in the last axis
    gamma: float

    def __post_init__(self):
        P = self.transition
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must be (S, A, S), got {P.shape}")
        rows = P.sum(axis=2)
        if not np.allclose(rows, 1.0, atol=1e-12):
            worst = np.unravel_index(np.argmax(np.abs(rows - 1.0)), rows.shape)
            raise ValueError(f"transition row {worst} sums to {rows[worst]}")
        if (P < -1e-15).any():
            raise ValueError("transition has negative probabilities")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class SoftPlanSolution:
    """Fixed point of the soft Bellman operator at temperature alpha."""

    V: np.ndarray        # (S,)
    Q: np.ndarray        # (S, A)
    policy: np.ndarray   # (S, A), exactly softmax(Q / alpha)
    residual: float
    iterations: int


def soft_value_iteration(mdp: FiniteMDP, R: np.ndarray, alpha: float = 1.0,
                         tol: float = 1e-10, max_iters: int = 200000) -> SoftPlanSolution:
    """Iterate V <- alpha * logsumexp((R + gamma P V) / alpha) to a fixed point.

    Converges geometrically at rate gamma; the returned residual is the final
    sup-norm Bellman update, guaranteed <= tol.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    P = mdp.transition
    R = np.asarray(R, dtype=np.float64)
    if R.shape != P.shape[:2]:
        raise ValueError(f"reward shape {R.shape} != (S, A) {P.shape[:2]}")
    V = np.zeros(mdp.n_states)
    for it in range(1, max_iters + 1):
        Q = R + mdp.gamma * (P @ V)
        V_new = alpha * logsumexp(Q / alpha, axis=1)
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if residual <= tol:
            policy = softmax(Q / alpha, axis=1)
            return SoftPlanSolution(V=V, Q=Q, policy=policy, residual=residual,
                                    iterations=it)
    raise NonConvergenceError(
        f"no fixed point within {max_iters} iterations (residual {residual:.3e})"
    )


def max_tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """max over states of the total-variation distance between policy rows."""
    return float(0.5 * np.abs(p - q).sum(axis=1).max())
