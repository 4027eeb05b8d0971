"""Consensus weight matrices and the spectral checks they rely on.

Four schemes are provided: Metropolis-Hastings, best-constant, local-degree
and max-degree. ``verify_convergence_conditions`` reports whether a matrix
can drive average consensus on a given graph.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .topology import Topology, laplacian

__all__ = [
    "EigenSolverError",
    "WeightMatrix",
    "ConditionReport",
    "SCHEMES",
    "symmetric_eigenvalues",
    "metropolis_weights",
    "best_constant_weights",
    "local_degree_weights",
    "max_degree_weights",
    "weights_for",
    "verify_convergence_conditions",
    "spectral_norm_from_mean",
    "write_weights_csv",
    "read_weights_csv",
]

OFFDIAG_TOL = 1e-10
MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-12
CONDITION_TOL = 1e-9


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    entries: np.ndarray
    scheme: str

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ConditionReport:
    sparsity: bool
    symmetric: bool
    row_stochastic: bool
    contraction: bool
    norm: float

    @property
    def ok(self) -> bool:
        return self.sparsity and self.symmetric and self.row_stochastic and self.contraction

    def failures(self) -> list[str]:
        names = ("sparsity", "symmetric", "row_stochastic", "contraction")
        return [name for name in names if not getattr(self, name)]


def _round_robin(n: int):
    """Yield n-1 (or n) rounds of disjoint index pairs covering every pair once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    for _ in range(m - 1):
        pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
        yield [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        players = [players[0], players[-1]] + players[1:-1]


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def symmetric_eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix, sorted non-increasing.

    Jacobi rotations, one round-robin tournament of disjoint pivot pairs per
    sweep so that each round's rotations commute and apply as a batch.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=SYMMETRY_TOL):
        raise ValueError("matrix is not symmetric")
    n = a.shape[0]
    a = (a + a.T) / 2
    rounds = [np.array(r, dtype=int).reshape(-1, 2) for r in _round_robin(n)]

    for _ in range(MAX_SWEEPS):
        if _off_norm(a) <= OFFDIAG_TOL:
            return np.sort(np.diag(a))[::-1].copy()
        for pairs in rounds:
            if pairs.size == 0:
                continue
            p, q = pairs[:, 0], pairs[:, 1]
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            with np.errstate(over="ignore"):
                # theta**2 overflow gives t = 0, the correct limit
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
    if _off_norm(a) <= OFFDIAG_TOL:
        return np.sort(np.diag(a))[::-1].copy()
    raise EigenSolverError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")


def _from_edge_weights(t: Topology, weight, scheme: str, diagonal=None) -> WeightMatrix:
    W = np.zeros((t.n, t.n))
    for i, j in t.edges:
        W[i, j] = W[j, i] = weight(i, j)
    for i in range(t.n):
        if diagonal is None:
            W[i, i] = 1.0 - math.fsum(W[i, j] for j in t.adjacency[i])
        else:
            W[i, i] = diagonal(i)
    return WeightMatrix(W, scheme)


def metropolis_weights(t: Topology) -> WeightMatrix:
    d = t.degrees
    return _from_edge_weights(t, lambda i, j: 1.0 / (1 + max(d[i], d[j])), "metropolis")


def local_degree_weights(t: Topology) -> WeightMatrix:
    d = t.degrees
    return _from_edge_weights(t, lambda i, j: 1.0 / max(d[i], d[j]), "local_degree")


def max_degree_weights(t: Topology) -> WeightMatrix:
    d = t.degrees
    dmax = max(d)
    return _from_edge_weights(
        t, lambda i, j: 1.0 / dmax, "max_degree", diagonal=lambda i: 1.0 - d[i] / dmax
    )


def best_constant_weights(t: Topology) -> WeightMatrix:
    """``W = I - alpha L`` with ``alpha = 2 / (lambda_max + lambda_{n-1})``.

    ``lambda_{n-1}`` is the algebraic connectivity (smallest nonzero
    Laplacian eigenvalue). A single node gets ``W = [[1]]``.
    """
    L = laplacian(t)
    if t.n == 1:
        return WeightMatrix(np.ones((1, 1)), "best_constant")
    lam = symmetric_eigenvalues(L)
    alpha = 2.0 / (lam[0] + lam[-2])
    W = np.eye(t.n) - alpha * L
    return WeightMatrix(W, "best_constant")


SCHEMES = {
    "metropolis": metropolis_weights,
    "best_constant": best_constant_weights,
    "local_degree": local_degree_weights,
    "max_degree": max_degree_weights,
}


def weights_for(t: Topology, scheme: str) -> WeightMatrix:
    key = scheme.replace("-", "_")
    if key not in SCHEMES:
        raise ValueError(f"unknown weight scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    return SCHEMES[key](t)


def spectral_norm_from_mean(W) -> float:
    """``||W - J||_2`` with ``J`` the averaging matrix ``11^T / n``."""
    W = np.asarray(W, dtype=float)
    M = W - np.full(W.shape, 1.0 / W.shape[0])
    if np.allclose(M, M.T, rtol=0.0, atol=SYMMETRY_TOL):
        lam = symmetric_eigenvalues((M + M.T) / 2)
        return float(max(abs(lam[0]), abs(lam[-1])))
    lam = symmetric_eigenvalues(M.T @ M)
    return math.sqrt(max(float(lam[0]), 0.0))


def verify_convergence_conditions(w, t: Topology, tol: float = CONDITION_TOL) -> ConditionReport:
    """Check the four average-consensus conditions; failures are reported, not raised."""
    W = np.asarray(w.entries if isinstance(w, WeightMatrix) else w, dtype=float)
    if W.shape != (t.n, t.n):
        raise ValueError(f"weight matrix shape {W.shape} does not match n={t.n}")
    mask = laplacian(t) != 0
    sparsity = bool(np.all(np.abs(W[~mask]) <= tol))
    symmetric = bool(np.all(np.abs(W - W.T) <= tol))
    row_stochastic = bool(np.all(np.abs(W.sum(axis=1) - 1.0) <= tol))
    norm = spectral_norm_from_mean(W)
    return ConditionReport(sparsity, symmetric, row_stochastic, norm < 1.0 - tol, norm)


def write_weights_csv(w, path: str | Path) -> None:
    W = np.asarray(w.entries if isinstance(w, WeightMatrix) else w, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in W:
            writer.writerow([repr(float(x)) for x in row])


def read_weights_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    W = np.array(rows, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"{path}: weight matrix must be square, got shape {W.shape}")
    return W
