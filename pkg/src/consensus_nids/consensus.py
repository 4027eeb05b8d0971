"""Synchronous average consensus over per-module log-likelihood pairs.

Each node ``i`` holds two state variables (anomalous, normal) and updates
them every round from its neighbours' previous-round values::

    x_i(t+1) = x_i(t) + sum_{j in N_i} W_ij (x_j(t) - x_i(t))

One message per directed edge per round carries both values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import WeightMatrix
from .topology import Topology

__all__ = [
    "GLOBAL",
    "FREEZE",
    "ConsensusState",
    "ConsensusResult",
    "ConvergenceError",
    "Operator",
    "initialize",
    "step",
    "run_to_convergence",
    "recover_joint",
    "resolution_threshold",
]

log = logging.getLogger(__name__)

GLOBAL = "global"
FREEZE = "freeze"
DEFAULT_MAX_ROUNDS = 100_000
# residuals within this many ulps of the state magnitude count as converged
RESOLUTION_ULPS = 64

TraceFn = Callable[[int, int, float, float, float], None]


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ConsensusState:
    """Snapshot after ``round`` synchronous updates.

    ``x`` has shape ``(n, 2)``: column 0 is the anomalous-hypothesis state,
    column 1 the normal one. ``residuals`` is ``|x(t) - x(t-1)|`` per entry
    and is ``None`` before the first round.
    """

    x: np.ndarray
    round: int = 0
    residuals: np.ndarray | None = None
    frozen: np.ndarray | None = None
    hop_count: int = 0

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def x_a(self) -> np.ndarray:
        return self.x[:, 0]

    @property
    def x_n(self) -> np.ndarray:
        return self.x[:, 1]

    def node_residuals(self) -> np.ndarray:
        """Per-node criterion: the larger of the two hypotheses' residuals."""
        if self.residuals is None:
            raise ValueError("residuals are undefined before the first round")
        return self.residuals.max(axis=1)


@dataclass(frozen=True, eq=False)
class ConsensusResult:
    state: ConsensusState
    rounds_used: int
    converged: bool


def initialize(local_log_likelihoods) -> ConsensusState:
    """Start from each node's ``(log P(O_i|h_a), log P(O_i|h_n))``."""
    x = np.array(local_log_likelihoods, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(x)):
        raise ValueError("local log-likelihoods must be finite")
    return ConsensusState(x=x, frozen=np.zeros(x.shape[0], dtype=bool))


class Operator:
    """Edge weights of ``W`` restricted to the graph, prepared for repeated rounds."""

    def __init__(self, w: WeightMatrix | np.ndarray, t: Topology):
        W = np.asarray(w.entries if isinstance(w, WeightMatrix) else w, dtype=float)
        if W.shape != (t.n, t.n):
            raise ValueError(f"weight matrix shape {W.shape} does not match n={t.n}")
        mask = np.zeros_like(W, dtype=bool)
        for i, nbrs in enumerate(t.adjacency):
            mask[i, list(nbrs)] = True
        self.off = np.where(mask, W, 0.0)
        self.row = self.off.sum(axis=1)[:, None]
        self.degrees = np.array(t.degrees, dtype=np.int64)
        self.messages_per_round = int(self.degrees.sum())


def _operator(w, t: Topology) -> Operator:
    return w if isinstance(w, Operator) else Operator(w, t)


def _advance(x, frozen, op: Operator, mode: str):
    """Return ``(new_x, residuals, messages_sent)`` for one round."""
    update = op.off @ x
    update -= op.row * x
    if mode == FREEZE and frozen.any():
        active = ~frozen
        new = x.copy()
        new[active] = x[active] + update[active]
        sent = int(op.degrees[active].sum())
    else:
        new = x + update
        sent = op.messages_per_round
    return new, np.abs(new - x), sent


def _check_mode(mode: str) -> None:
    if mode not in (GLOBAL, FREEZE):
        raise ValueError(f"unknown stopping mode {mode!r}")


def step(
    state: ConsensusState, w, t: Topology, mode: str = GLOBAL, epsilon: float | None = None
) -> ConsensusState:
    """One synchronous round computed from the round-``t`` snapshot.

    In freeze mode, nodes whose residual falls below ``epsilon`` are marked
    frozen for subsequent rounds.
    """
    _check_mode(mode)
    frozen = state.frozen if state.frozen is not None else np.zeros(state.n, dtype=bool)
    new, residuals, sent = _advance(state.x, frozen, _operator(w, t), mode)
    if mode == FREEZE and epsilon is not None:
        frozen = frozen | (residuals.max(axis=1) < epsilon)
    return ConsensusState(new, state.round + 1, residuals, frozen, state.hop_count + sent)


def run_to_convergence(
    state: ConsensusState,
    w,
    t: Topology,
    epsilon: float = 1e-3,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    mode: str = GLOBAL,
    trace: TraceFn | None = None,
) -> ConsensusResult:
    """Iterate until every node's residual is below ``epsilon``.

    In ``global`` mode all nodes keep exchanging until they are all below
    ``epsilon`` in the same round. In ``freeze`` mode a node stops sending
    and updating once its own residual drops below ``epsilon``; its
    neighbours keep using its last value. Hitting ``max_rounds`` returns a
    result with ``converged=False``.

    When ``epsilon`` is finer than double precision can resolve at the
    state's magnitude (huge log-likelihoods from floored variances), the
    threshold is raised to ``RESOLUTION_ULPS`` ulps of that magnitude.

    ``trace(round, node, x_a, x_n, residual)`` is called for every node
    after every round when given.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    _check_mode(mode)
    op = _operator(w, t)
    x = state.x
    epsilon = resolution_threshold(x, epsilon)
    frozen = state.frozen.copy() if state.frozen is not None else np.zeros(state.n, dtype=bool)
    hops = state.hop_count
    residuals = state.residuals
    converged = False
    rounds = 0
    while rounds < max_rounds:
        x, residuals, sent = _advance(x, frozen, op, mode)
        hops += sent
        rounds += 1
        if trace is not None:
            node_res = residuals.max(axis=1)
            for i in range(x.shape[0]):
                trace(state.round + rounds, i, float(x[i, 0]), float(x[i, 1]), float(node_res[i]))
        if mode == FREEZE:
            frozen = frozen | (residuals.max(axis=1) < epsilon)
            converged = bool(frozen.all())
        else:
            converged = bool(residuals.max() < epsilon)
        if converged:
            break
    if not converged:
        log.warning("consensus did not converge within %d rounds", max_rounds)
    final = ConsensusState(x, state.round + rounds, residuals, frozen, hops)
    return ConsensusResult(final, rounds, converged)


def resolution_threshold(x, epsilon: float) -> float:
    """``max(epsilon, RESOLUTION_ULPS * ulp(max |x|))``."""
    scale = float(np.max(np.abs(x))) if np.size(x) else 0.0
    return max(epsilon, RESOLUTION_ULPS * float(np.spacing(scale)))


def recover_joint(state: ConsensusState, n: int | None = None) -> np.ndarray:
    """Per-node joint log-likelihood estimates ``n * x_i``, shape ``(n, 2)``."""
    n = state.n if n is None else n
    return n * state.x
