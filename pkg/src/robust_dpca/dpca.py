"""Distributed PCA over simulated servers.

Each shard computes a robust covariance estimate and ships only its top-K
eigenvector block to the aggregator, which averages the projectors

    S = (1/m) sum_l V_l V_l^T

and extracts the top-K eigenvectors of S. A small transport seam counts the
values that would cross the wire (m * d * K in total), making the
communication cost observable in tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .estimators import EstimatorSpec, estimate_cov
from .linalg import EigBasis, eig_sym, SymMatrix, top_k

__all__ = [
    "Shard",
    "Transport",
    "DpcaResult",
    "local_step",
    "aggregate",
    "run_dpca",
    "eigengap_report",
]

_STRUCT_TOL = 1e-8
_EIGENGAP_WARN_LEVEL = 0.05


@dataclass(frozen=True)
class Shard:
    """One server's sample block plus its estimator configuration."""

    server_id: int
    samples: np.ndarray
    estimator: EstimatorSpec

    def __post_init__(self) -> None:
        if self.server_id < 1:
            raise ValueError(f"server_id must be >= 1, got {self.server_id}")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"shard needs an n x d block, got shape {arr.shape}")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


class Transport:
    """In-process stand-in for the server-to-center channel.

    Records how many scalar values each server ships so the m * d * K
    communication cost of the algorithm is checkable.
    """

    def __init__(self) -> None:
        self.values_sent = 0
        self.messages = 0

    def send(self, server_id: int, basis: EigBasis) -> EigBasis:
        self.values_sent += basis.dim * basis.k
        self.messages += 1
        return basis


@dataclass(frozen=True)
class DpcaResult:
    """Output of the distributed run."""

    v_tilde: EigBasis
    sigma_tilde_eigvals: np.ndarray  # leading min(K+1, d) eigenvalues of S
    values_transmitted: int
    per_server_bases: list[EigBasis] | None = field(default=None)

    @property
    def k(self) -> int:
        return self.v_tilde.k


def local_step(shard: Shard, k: int) -> EigBasis:
    """Robust covariance estimate on one shard, reduced to its top-k basis.

    Automatic tuning (theta or tau left unset in the estimator spec) runs on
    the shard's own samples, so every server picks its own level.
    """
    return top_k(eig_sym(estimate_cov(shard.samples, shard.estimator)), k)


def _check_projector_average(s: np.ndarray, k: int) -> np.ndarray:
    """Structural invariants of the averaged projector; raises on violation."""
    eigvals = np.linalg.eigvalsh(s)
    trace = float(np.trace(s))
    if abs(trace - k) > _STRUCT_TOL * max(1.0, k):
        raise RuntimeError(f"projector average trace {trace} != K={k}")
    if eigvals[0] < -_STRUCT_TOL or eigvals[-1] > 1.0 + _STRUCT_TOL:
        raise RuntimeError(
            f"projector average spectrum outside [0, 1]: "
            f"[{eigvals[0]:.3e}, {eigvals[-1]:.3e}]"
        )
    return eigvals


def aggregate(bases: list[EigBasis], k: int, keep_bases: bool = False) -> DpcaResult:
    """Average the per-server projectors and take the top-k eigenvectors.

    The average S is positive semidefinite with trace K and eigenvalues in
    [0, 1]; these facts are asserted on every call. Bases are summed in list
    order, so callers control the (fixed) reduction order.
    """
    if not bases:
        raise ValueError("need at least one basis to aggregate")
    d = bases[0].dim
    for b in bases:
        if b.dim != d or b.k != k:
            raise ValueError(
                f"basis shape mismatch: expected ({d}, {k}), got ({b.dim}, {b.k})"
            )
    s = np.zeros((d, d))
    for b in bases:
        s += b.columns @ b.columns.T
    s /= len(bases)
    _check_projector_average(s, k)
    dec = eig_sym(SymMatrix(s))
    n_lead = min(k + 1, d)
    return DpcaResult(
        v_tilde=top_k(dec, k),
        sigma_tilde_eigvals=dec.values[:n_lead].copy(),
        values_transmitted=0,
        per_server_bases=list(bases) if keep_bases else None,
    )


def run_dpca(
    shards: list[Shard],
    k: int,
    transport: Transport | None = None,
    keep_bases: bool = False,
) -> DpcaResult:
    """Full distributed run: local bases on every shard, then aggregation.

    Shards are processed in server_id order regardless of list order, so the
    result is invariant to how the shard list happens to be arranged.
    """
    if not shards:
        raise ValueError("need at least one shard")
    ordered = sorted(shards, key=lambda sh: sh.server_id)
    ids = [sh.server_id for sh in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate server ids: {ids}")
    d = ordered[0].dim
    if any(sh.dim != d for sh in ordered):
        raise ValueError("all shards must share the same dimension")

    transport = transport if transport is not None else Transport()
    bases = [transport.send(sh.server_id, local_step(sh, k)) for sh in ordered]
    result = aggregate(bases, k, keep_bases=keep_bases)

    expected = len(ordered) * d * k
    if transport.values_sent != expected:
        raise RuntimeError(
            f"transport accounted {transport.values_sent} values, expected {expected}"
        )
    return DpcaResult(
        v_tilde=result.v_tilde,
        sigma_tilde_eigvals=result.sigma_tilde_eigvals,
        values_transmitted=transport.values_sent,
        per_server_bases=result.per_server_bases,
    )


def eigengap_report(result: DpcaResult) -> float:
    """Gap between the K-th and (K+1)-th eigenvalue of the averaged projector.

    A tiny gap means the servers disagree about the K-th direction and the
    aggregated subspace is poorly determined; a warning is emitted below
    0.05. When K equals the ambient dimension the trailing eigenvalue is
    taken as 0.
    """
    vals = result.sigma_tilde_eigvals
    k = result.k
    gap = float(vals[k - 1] - vals[k]) if vals.shape[0] > k else float(vals[k - 1])
    if gap < _EIGENGAP_WARN_LEVEL:
        warnings.warn(
            f"aggregated eigengap at K={k} is {gap:.4f} (< {_EIGENGAP_WARN_LEVEL}); "
            "the returned subspace may be unstable",
            RuntimeWarning,
            stacklevel=2,
        )
    return gap
