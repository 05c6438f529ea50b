"""Reverse-engineering a reward that makes a given policy soft-optimal.

Any full-support policy on a finite MDP is the unique soft-optimal policy
under some reward function, and that reward can be written down in closed
form. This module implements the construction: fold a fixed partner into
two-player dynamics to get a single-agent MDP, derive advantages from the
target policy's log-probabilities, solve a linear system for the values
along the policy's greedy action chain, and assemble the reward table. The
result is checked by planning against it and comparing the recovered policy
to the target.

Operates only on explicitly enumerated mini-MDPs; the full kitchen state
space is never materialized here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coopchef.softplan import FiniteMDP, SoftPlanSolution, max_tv_distance, soft_value_iteration


class ZeroProbabilityActionError(ValueError):
    """The construction needs pi(a|s) > 0 everywhere."""


def fold_partner(joint_transition: np.ndarray, partner_policy: np.ndarray,
                 gamma: float) -> FiniteMDP:
    """Marginalize a fixed partner out of two-player dynamics.

    ``joint_transition`` is (S, A_self, A_partner, S); ``partner_policy`` is
    (S, A_partner). Returns the single-agent MDP with
    P'(s'|s,a) = sum_b P(s'|s,a,b) * partner(b|s).
    """
    P = np.asarray(joint_transition, dtype=np.float64)
    pi = np.asarray(partner_policy, dtype=np.float64)
    if P.ndim != 4 or P.shape[0] != P.shape[3]:
        raise ValueError(f"joint transition must be (S, A, B, S), got {P.shape}")
    if pi.shape != (P.shape[0], P.shape[2]):
        raise ValueError(
            f"partner policy shape {pi.shape} != (S, B) {(P.shape[0], P.shape[2])}"
        )
    if not np.allclose(pi.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("partner policy rows must sum to 1")
    folded = np.einsum("sabt,sb->sat", P, pi)
    return FiniteMDP(transition=folded, gamma=gamma)


@dataclass(frozen=True)
class ConstructedReward:
    """Reward table making a target policy soft-optimal, with its baseline.

    ``rewards[s, greedy[s]] == baseline[s]`` exactly: the reward of the
    target policy's most likely action is a free choice.
    """

    rewards: np.ndarray   # (S, A)
    baseline: np.ndarray  # (S,)
    greedy: np.ndarray    # (S,) argmax action of the target policy
    alpha: float


def construct_hidden_reward(policy: np.ndarray, mdp: FiniteMDP, alpha: float = 1.0,
                            baseline: np.ndarray | None = None) -> ConstructedReward:
    """Build a reward table under which ``policy`` is the soft-optimal policy.

    Steps: advantages A(s,a) = alpha*(log pi(a|s) - log pi(greedy(s)|s));
    values V from the linear policy-evaluation system along the greedy chain;
    greedy values Vstar(s) = baseline(s) + gamma*E[V(s')|s,greedy(s)]; then
    R(s,a) = A(s,a) - gamma*E[V(s')|s,a] + Vstar(s).
    """
    pi = np.asarray(policy, dtype=np.float64)
    P = mdp.transition
    S, A = P.shape[:2]
    if pi.shape != (S, A):
        raise ValueError(f"policy shape {pi.shape} != (S, A) {(S, A)}")
    if (pi <= 0).any():
        s, a = np.unravel_index(np.argmin(pi), pi.shape)
        raise ZeroProbabilityActionError(
            f"policy assigns probability {pi[s, a]} to action {a} in state {s}"
        )
    if not np.allclose(pi.sum(axis=1), 1.0, atol=1e-10):
        raise ValueError("policy rows must sum to 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    b = np.zeros(S) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if b.shape != (S,):
        raise ValueError(f"baseline shape {b.shape} != ({S},)")

    log_pi = np.log(pi)
    greedy = np.argmax(pi, axis=1)
    adv = alpha * (log_pi - log_pi[np.arange(S), greedy][:, None])

    # V(s) = g(s) + gamma * P_greedy V, with g the expected advantage plus
    # baseline plus the entropy bonus of following the target policy.
    entropy = -(pi * log_pi).sum(axis=1)
    g = (pi * adv).sum(axis=1) + b + alpha * entropy
    P_greedy = P[np.arange(S), greedy]  # (S, S)
    V = np.linalg.solve(np.eye(S) - mdp.gamma * P_greedy, g)

    v_star = b + mdp.gamma * (P_greedy @ V)
    rewards = adv - mdp.gamma * (P @ V) + v_star[:, None]
    # Pin the guaranteed identity exactly against float drift.
    rewards[np.arange(S), greedy] = b
    return ConstructedReward(rewards=rewards, baseline=b, greedy=greedy, alpha=alpha)


@dataclass(frozen=True)
class VerificationReport:
    max_tv: float
    residual: float
    passed: bool
    solution: SoftPlanSolution

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"soft-optimality check: {status} "
                f"(max TV {self.max_tv:.3e}, plan residual {self.residual:.3e})")


def verify_soft_optimal(constructed: ConstructedReward, policy: np.ndarray,
                        mdp: FiniteMDP, tol: float = 1e-6) -> VerificationReport:
    """Plan against the constructed reward and compare to the target policy."""
    sol = soft_value_iteration(mdp, constructed.rewards, alpha=constructed.alpha,
                               tol=min(tol, 1e-10) * 1e-2)
    max_tv = max_tv_distance(sol.policy, np.asarray(policy, dtype=np.float64))
    return VerificationReport(max_tv=max_tv, residual=sol.residual,
                              passed=max_tv <= tol, solution=sol)


def parse_mdp_text(text: str) -> tuple[FiniteMDP, np.ndarray | None]:
    """Read a mini-MDP from a plain-text table.

    Header line ``states=S actions=A gamma=G``; then transition triples
    ``t <s> <a> <s'> <prob>`` and optional reward entries ``r <s> <a> <value>``.
    Returns the MDP and a reward table when any ``r`` lines are present.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty MDP table")
    header = dict(part.split("=", 1) for part in lines[0].split())
    S, A = int(header["states"]), int(header["actions"])
    gamma = float(header["gamma"])
    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    has_rewards = False
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "t":
            s, a, s2 = int(parts[1]), int(parts[2]), int(parts[3])
            P[s, a, s2] = float(parts[4])
        elif parts[0] == "r":
            s, a = int(parts[1]), int(parts[2])
            R[s, a] = float(parts[3])
            has_rewards = True
        else:
            raise ValueError(f"unparseable MDP line {ln!r}")
    return FiniteMDP(transition=P, gamma=gamma), (R if has_rewards else None)


def format_mdp_text(mdp: FiniteMDP, R: np.ndarray | None = None) -> str:
    """Inverse of parse_mdp_text, skipping zero entries."""
    out = [f"states={mdp.n_states} actions={mdp.n_actions} gamma={float(mdp.gamma)!r}"]
    P = mdp.transition
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            for s2 in range(mdp.n_states):
                if P[s, a, s2] != 0.0:
                    out.append(f"t {s} {a} {s2} {float(P[s, a, s2])!r}")
    if R is not None:
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                if R[s, a] != 0.0:
                    out.append(f"r {s} {a} {float(R[s, a])!r}")
    return "\n".join(out) + "\n"
