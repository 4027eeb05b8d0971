"""Network-wide posterior, alert decision, and the centralised baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import ANOMALOUS, NORMAL, log_normalize
from .topology import Topology, graph_median, shortest_path_lengths

__all__ = [
    "Decision",
    "network_posterior",
    "decide",
    "hierarchical_aggregate",
    "hierarchical_cost",
    "broadcast_cost",
    "joint_probability_note",
]


@dataclass(frozen=True)
class Decision:
    alert: bool
    log_posterior_ratio: float
    per_hypothesis_log_posterior: tuple[float, float]


def network_posterior(joint_log_likelihoods, log_priors) -> tuple[float, float]:
    """Normalised ``(log p(h_a|O), log p(h_n|O))``.

    ``log_priors`` may be a mapping keyed by hypothesis or an
    ``(anomalous, normal)`` pair.
    """
    la, ln = (float(v) for v in joint_log_likelihoods)
    if isinstance(log_priors, dict):
        pa, pn = log_priors[ANOMALOUS], log_priors[NORMAL]
    else:
        pa, pn = log_priors
    return log_normalize(pa + la, pn + ln)


def decide(posterior, tau: float = 1.0) -> Decision:
    """Raise an alert iff ``p(h_a|O) / p(h_n|O) > tau``, compared in log space.

    ``posterior`` is either a pair of log posteriors or the log ratio itself.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if np.ndim(posterior) == 0:
        ratio = float(posterior)
        pair = (math.nan, math.nan)
    else:
        pair = tuple(float(v) for v in posterior)
        ratio = pair[0] - pair[1]
    return Decision(ratio > math.log(tau), ratio, pair)


def hierarchical_cost(t: Topology, central: int) -> int:
    """Total hops for every module to ship its likelihoods to ``central``."""
    return sum(shortest_path_lengths(t, central))


def hierarchical_aggregate(local_log_likelihoods, t: Topology, central: int | None = None):
    """Exact joint log-likelihoods gathered at a central node.

    Returns ``(joint, hop_cost)`` where ``joint`` is the exact
    ``(sum_i log P(O_i|h_a), sum_i log P(O_i|h_n))``. The central node
    defaults to the graph median.
    """
    if central is None:
        central = graph_median(t)
    if not 0 <= central < t.n:
        raise IndexError(f"central node {central} out of range for n={t.n}")
    x = np.asarray(local_log_likelihoods, dtype=float).reshape(-1, 2)
    joint = (math.fsum(x[:, 0]), math.fsum(x[:, 1]))
    return joint, hierarchical_cost(t, central)


def broadcast_cost(t: Topology, central: int | None = None) -> int:
    """All-to-all distribution cost: ``h_ce * (n - 1)``."""
    if central is None:
        central = graph_median(t)
    return hierarchical_cost(t, central) * (t.n - 1)


def joint_probability_note(log_joint: float) -> tuple[float, str | None]:
    """Exponentiate a joint log-likelihood for display, noting underflow."""
    value = math.exp(log_joint) if log_joint < 709.0 else math.inf
    if value == 0.0:
        return 0.0, f"exp({log_joint:.6g}) underflows double precision"
    if math.isinf(value):
        return value, f"exp({log_joint:.6g}) overflows double precision"
    return value, None
