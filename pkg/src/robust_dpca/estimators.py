"""Tail-robust covariance estimators and their tuning-parameter selection.

Four estimators share one contract (n x d samples in, SymMatrix out):

* ``sample_cov``            -- plain second-moment average, the non-robust baseline.
* ``shrinkage_cov``         -- each rank-one term is damped through a bounded,
                               nondecreasing log-style influence function ``psi_alpha``.
* ``truncation_cov``        -- each sample's squared norm is clamped at ``tau``
                               before averaging.
* ``elementwise_trunc_cov`` -- entrywise clamping of cross products at
                               per-entry thresholds derived from empirical
                               alpha-moments.

Samples are taken as mean-zero and are not centered here. All estimators sum
sample contributions in a canonical (lexicographically sorted) row order, so
results are exactly invariant to permutations of the input rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .linalg import SymMatrix, eig_sym

__all__ = [
    "EstimatorKind",
    "EstimatorSpec",
    "MomentStats",
    "TauSolve",
    "DegenerateMomentError",
    "NoRootError",
    "c_alpha",
    "psi_alpha",
    "psi_tau",
    "sample_cov",
    "shrinkage_cov",
    "truncation_cov",
    "elementwise_trunc_cov",
    "moment_stats",
    "tune_theta",
    "tune_tau_adaptive",
    "stein_trunc_estimator",
    "beta_from_stein",
    "beta_error",
    "estimate_cov",
]


class DegenerateMomentError(ValueError):
    """Raised when a moment-based tuning rule gets all-zero data."""


class NoRootError(RuntimeError):
    """Raised when the adaptive tau equation has no root in its bracket."""


class EstimatorKind(Enum):
    SAMPLE = "sample"
    SHRINKAGE = "shrinkage"
    TRUNCATION = "truncation"
    ELEMENTWISE = "elementwise"


@dataclass(frozen=True)
class EstimatorSpec:
    """Which covariance estimator to run, with its tuning parameters.

    ``theta``/``tau`` left as None means "tune from the data at hand"
    (per-shard in the distributed setting). ``theta_scale`` is the constant
    in front of the automatic theta rule; ``delta`` is the confidence level
    of the elementwise estimator.
    """

    kind: EstimatorKind
    alpha: float = 2.0
    theta: float | None = None
    tau: float | None = None
    delta: float | None = None
    theta_scale: float = 1.0

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (1, 2], got {self.alpha}")
        if self.theta is not None and self.theta <= 0:
            raise ValueError("theta must be positive when explicit")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive when explicit")
        if self.kind is EstimatorKind.ELEMENTWISE:
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise ValueError("elementwise truncation needs delta in (0, 1)")
        if self.theta_scale <= 0:
            raise ValueError("theta_scale must be positive")

    def label(self) -> str:
        """Column label used in experiment outputs."""
        return {
            EstimatorKind.SAMPLE: "DP",
            EstimatorKind.SHRINKAGE: "RDP-shrinkage",
            EstimatorKind.TRUNCATION: "RDP-truncation",
            EstimatorKind.ELEMENTWISE: "RDP-elementwise",
        }[self.kind]


@dataclass(frozen=True)
class MomentStats:
    """Empirical alpha-moment scale v_hat and the bracket constant c_alpha."""

    v_hat: float
    c_alpha: float


class TauSolve(NamedTuple):
    """Result of the adaptive tau equation solve."""

    tau: float
    no_root: bool
    residual: float
    iterations: int


def c_alpha(alpha: float) -> float:
    """Bracket constant max((alpha-1)/alpha, sqrt((2-alpha)/alpha))."""
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"alpha must be in (1, 2], got {alpha}")
    return max((alpha - 1.0) / alpha, math.sqrt((2.0 - alpha) / alpha))


def psi_alpha(x, alpha: float):
    """Bounded-growth influence function, odd and nondecreasing.

    psi_alpha(x) = log(1 + x + c_alpha |x|^alpha) for x >= 0, extended to
    negative x by odd reflection. Accepts scalars or arrays.
    """
    c = c_alpha(alpha)
    ax = np.abs(x)
    out = np.sign(x) * np.log1p(ax + c * ax**alpha)
    if np.isscalar(x):
        return float(out)
    return out


def psi_tau(x, tau: float):
    """Symmetric clamp of x to [-tau, tau]."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    out = np.clip(x, -tau, tau)
    if np.isscalar(x):
        return float(out)
    return out


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"expected an n x d sample block, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples contain non-finite values")
    return arr


def _canonical_rows(arr: np.ndarray, extra: np.ndarray | None = None) -> np.ndarray:
    """Indices sorting rows lexicographically (with ``extra`` as leading key).

    Summing sample contributions in this order makes every estimator exactly
    invariant to permutations of the input rows.
    """
    keys = [arr[:, j] for j in range(arr.shape[1] - 1, -1, -1)]
    if extra is not None:
        keys.append(extra)
    return np.lexsort(keys)


def _weighted_outer_mean(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return (x * weights[:, None]).T @ x / x.shape[0]


def sample_cov(samples) -> SymMatrix:
    """Second-moment matrix (1/n) sum_i x_i x_i^T (no centering)."""
    x = _as_samples(samples)
    x = x[_canonical_rows(x)]
    return SymMatrix(x.T @ x / x.shape[0])


def shrinkage_cov(samples, spec: EstimatorSpec) -> SymMatrix:
    """Covariance estimate with log-damped rank-one terms.

    Each sample contributes ``psi_alpha(theta ||x||^2) / (theta ||x||^2)``
    times x x^T; zero-norm samples contribute nothing. With theta -> 0 the
    weights tend to 1 and the estimate approaches ``sample_cov``.
    """
    x = _as_samples(samples)
    x = x[_canonical_rows(x)]
    theta = spec.theta
    if theta is None:
        theta = tune_theta(x, alpha=spec.alpha, scale=spec.theta_scale)
    sq = np.einsum("ij,ij->i", x, x)
    weights = np.zeros_like(sq)
    pos = sq > 0.0
    arg = theta * sq[pos]
    weights[pos] = psi_alpha(arg, spec.alpha) / arg
    return SymMatrix(_weighted_outer_mean(x, weights))


def truncation_cov(samples, spec: EstimatorSpec) -> SymMatrix:
    """Covariance estimate with squared norms clamped at tau.

    Equals ``sample_cov`` exactly once tau >= max_i ||x_i||^2. When
    ``spec.tau`` is None the clamp level is solved per call with
    ``tune_tau_adaptive``; an unsolvable tuning equation raises NoRootError.
    """
    x = _as_samples(samples)
    x = x[_canonical_rows(x)]
    tau = spec.tau
    if tau is None:
        solve = tune_tau_adaptive(x)
        if solve.no_root:
            raise NoRootError(
                f"adaptive tau equation has no root (boundary tau={solve.tau:.6g})"
            )
        tau = solve.tau
    sq = np.einsum("ij,ij->i", x, x)
    weights = np.zeros_like(sq)
    pos = sq > 0.0
    weights[pos] = np.minimum(sq[pos], tau) / sq[pos]
    return SymMatrix(_weighted_outer_mean(x, weights))


def elementwise_trunc_cov(samples, delta: float, alpha: float = 2.0) -> SymMatrix:
    """Entrywise-truncated second-moment matrix.

    Entry (k, s) averages ``psi_tau(x_k x_s)`` with a per-entry threshold

        tau_{k,s} = (n * mhat_{k,s} / (2 log d - log delta))^(1/alpha),

    where ``mhat_{k,s}`` is the empirical mean of |x_k x_s|^alpha standing in
    for the population alpha-moment. Thresholds are symmetric by construction
    since the products are.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"alpha must be in (1, 2], got {alpha}")
    x = _as_samples(samples)
    n, d = x.shape
    if n < 2:
        raise ValueError("elementwise truncation needs at least 2 samples")
    x = x[_canonical_rows(x)]

    chunk = max(1, int(4_000_000 / (d * d)))
    moment = np.zeros((d, d))
    for start in range(0, n, chunk):
        block = x[start : start + chunk]
        prods = block[:, :, None] * block[:, None, :]
        moment += np.sum(np.abs(prods) ** alpha, axis=0)
    moment /= n

    log_term = 2.0 * math.log(d) - math.log(delta)
    tau = (n * moment / log_term) ** (1.0 / alpha)

    acc = np.zeros((d, d))
    for start in range(0, n, chunk):
        block = x[start : start + chunk]
        prods = block[:, :, None] * block[:, None, :]
        acc += np.sum(np.clip(prods, -tau, tau), axis=0)
    return SymMatrix(acc / n)


def moment_stats(samples, alpha: float = 2.0, use_unsquared_norm: bool = False) -> MomentStats:
    """Empirical moment scale v_hat driving the automatic theta rule.

    v_hat = sqrt(|| (1/n) sum_i ||x_i||^2 x_i x_i^T ||_2). The
    ``use_unsquared_norm`` variant weights by ||x_i|| instead; it is kept only
    for comparison and is not used by any default code path.
    """
    x = _as_samples(samples)
    sq = np.einsum("ij,ij->i", x, x)
    weights = sq if not use_unsquared_norm else np.sqrt(sq)
    m = _weighted_outer_mean(x, weights)
    lam_max = float(np.linalg.eigvalsh(m)[-1])
    return MomentStats(v_hat=math.sqrt(max(0.0, lam_max)), c_alpha=c_alpha(alpha))


def tune_theta(
    samples,
    alpha: float = 2.0,
    scale: float = 1.0,
    use_unsquared_norm: bool = False,
) -> float:
    """Automatic shrinkage level theta = scale / (v_hat sqrt(n))."""
    x = _as_samples(samples)
    stats = moment_stats(x, alpha=alpha, use_unsquared_norm=use_unsquared_norm)
    if stats.v_hat == 0.0:
        raise DegenerateMomentError("all-zero samples: moment scale is degenerate")
    return scale / (stats.v_hat * math.sqrt(x.shape[0]))


class _ClampNormLhs:
    """Left side of the adaptive tau equation, evaluated efficiently.

    LHS(tau) = || (1/tau^2) sum_i (z_i ^ tau)^2 u_i u_i^T ||_2 with clamp
    statistics z_i > 0 and unit directions u_i. Sorting z once allows the sum
    to be split at the clamp boundary; the two partial d x d matrices are
    cached per boundary index so repeated evaluations at nearby tau are cheap.
    """

    def __init__(self, z: np.ndarray, units: np.ndarray) -> None:
        order = np.argsort(z, kind="stable")
        self.z = z[order]
        self.units = units[order]
        self._cache_j = -1
        self._low = np.empty(0)
        self._high = np.empty(0)

    def _split(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if j != self._cache_j:
            below, above = self.units[:j], self.units[j:]
            zb = self.z[:j]
            # sum_{z<=tau} z^2 u u^T  and  sum_{z>tau} u u^T
            self._low = (below * (zb**2)[:, None]).T @ below if j else 0.0
            self._high = above.T @ above if j < self.z.size else 0.0
            self._cache_j = j
        return self._low, self._high

    def __call__(self, tau: float) -> float:
        j = int(np.searchsorted(self.z, tau, side="right"))
        low, high = self._split(j)
        m = low / tau**2 + high if j else np.asarray(high, dtype=np.float64)
        if np.isscalar(m) or m.ndim == 0:  # all rows on one side, degenerate d=0
            return float(m)
        return float(np.linalg.eigvalsh(m)[-1])


def _solve_clamp_equation(
    z: np.ndarray, units: np.ndarray, rhs: float, max_iter: int = 200
) -> TauSolve:
    """Bisection for LHS(tau) = rhs; LHS is continuous and nonincreasing."""
    lhs = _ClampNormLhs(z, units)
    lo = float(np.min(z)) * 1e-6
    hi = float(np.max(z)) * 1e6
    tol = 1e-6 * rhs

    f_lo = lhs(lo)
    if f_lo < rhs:  # even the fully clamped side is below target
        return TauSolve(tau=lo, no_root=True, residual=abs(f_lo - rhs), iterations=0)
    f_hi = lhs(hi)
    if f_hi > rhs:
        return TauSolve(tau=hi, no_root=True, residual=abs(f_hi - rhs), iterations=0)

    mid, f_mid = lo, f_lo
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = lhs(mid)
        if abs(f_mid - rhs) <= tol:
            return TauSolve(tau=mid, no_root=False, residual=abs(f_mid - rhs), iterations=it)
        if f_mid > rhs:
            lo = mid
        else:
            hi = mid
    return TauSolve(tau=mid, no_root=False, residual=abs(f_mid - rhs), iterations=max_iter)


def tune_tau_adaptive(samples) -> TauSolve:
    """Solve the data-driven clamp-level equation for the truncation estimator.

    Finds tau with

        || (1/tau^2) sum_i (||x_i||^2 ^ tau)^2 x_i x_i^T / ||x_i||^2 ||_2
            = log(2d) + log(n),

    by bisection over [min positive ||x_i||^2 * 1e-6, max ||x_i||^2 * 1e6].
    The left side is nonincreasing in tau, so the root (when bracketed) is
    unique up to flat stretches. Returns the solution plus a ``no_root`` flag
    when the bracket does not straddle the target; the closest boundary is
    then reported as ``tau``.
    """
    x = _as_samples(samples)
    n, d = x.shape
    if n < 2:
        raise ValueError("adaptive tau needs at least 2 samples")
    sq = np.einsum("ij,ij->i", x, x)
    pos = sq > 0.0
    if not np.any(pos):
        raise DegenerateMomentError("all-zero samples: clamp equation is degenerate")
    units = x[pos] / np.sqrt(sq[pos])[:, None]
    rhs = math.log(2.0 * d) + math.log(n)
    return _solve_clamp_equation(sq[pos], units, rhs)


def adaptive_clamp_lhs(samples, tau: float) -> float:
    """Left side of the adaptive tau equation at a given tau (for diagnostics)."""
    x = _as_samples(samples)
    sq = np.einsum("ij,ij->i", x, x)
    pos = sq > 0.0
    units = x[pos] / np.sqrt(sq[pos])[:, None]
    return _ClampNormLhs(sq[pos], units)(tau)


def stein_trunc_estimator(y, x, tau: float | None = None) -> SymMatrix:
    """Spectrally clamped average of y_i (x_i x_i^T - I).

    Each term has the closed-form spectrum {y_i (||x_i||^2 - 1)} on the unit
    direction x_i/||x_i|| and {-y_i} on its orthogonal complement, so the
    clamp is applied to those two scalars directly and no per-sample
    eigendecomposition is needed. A zero sample contributes
    ``psi_tau(-y_i) I``. ``tau=None`` solves the adaptive clamp equation with
    the per-term spectral magnitude |y_i| max(|(||x_i||^2 - 1)|, 1) as the
    clamp statistic; ``tau=inf`` gives the plain (non-robust) average.
    """
    yv = np.asarray(y, dtype=np.float64)
    xv = _as_samples(x)
    if yv.ndim != 1 or yv.shape[0] != xv.shape[0]:
        raise ValueError(
            f"need one response per sample row, got {yv.shape} and {xv.shape}"
        )
    if not np.all(np.isfinite(yv)):
        raise ValueError("responses contain non-finite values")
    order = _canonical_rows(xv, extra=yv)
    yv, xv = yv[order], xv[order]
    n, d = xv.shape
    sq = np.einsum("ij,ij->i", xv, xv)

    if tau is None:
        pos = sq > 0.0
        z = np.abs(yv[pos]) * np.maximum(np.abs(sq[pos] - 1.0), 1.0)
        keep = z > 0.0
        if not np.any(keep):
            raise DegenerateMomentError("all spectral magnitudes are zero")
        units = xv[pos][keep] / np.sqrt(sq[pos][keep])[:, None]
        rhs = math.log(2.0 * d) + math.log(n)
        solve = _solve_clamp_equation(z[keep], units, rhs)
        if solve.no_root:
            raise NoRootError(
                f"adaptive tau equation has no root (boundary tau={solve.tau:.6g})"
            )
        tau = solve.tau

    spike = psi_tau(yv * (sq - 1.0), tau) if math.isfinite(tau) else yv * (sq - 1.0)
    flat = psi_tau(-yv, tau) if math.isfinite(tau) else -yv
    weights = np.zeros_like(sq)
    pos = sq > 0.0
    weights[pos] = (spike[pos] - flat[pos]) / sq[pos]
    m = (xv * weights[:, None]).T @ xv
    m[np.diag_indices(d)] += np.sum(flat)
    return SymMatrix(m / n)


def beta_from_stein(sigma_hat: SymMatrix) -> np.ndarray:
    """Unit eigenvector of the largest-magnitude eigenvalue.

    The population target is a rank-one matrix C beta beta^T whose constant C
    can be negative, hence the ordering by absolute value.
    """
    dec = eig_sym(sigma_hat)
    idx = int(np.argmax(np.abs(dec.values)))
    return np.ascontiguousarray(dec.vectors[:, idx])


def beta_error(beta_hat, beta_star) -> float:
    """Sign-invariant direction error min(||b - b*||, ||b + b*||), b normalized."""
    bh = np.asarray(beta_hat, dtype=np.float64)
    bs = np.asarray(beta_star, dtype=np.float64)
    norm = np.linalg.norm(bh)
    if norm == 0.0:
        raise ValueError("beta_hat has zero norm")
    bh = bh / norm
    return float(min(np.linalg.norm(bh - bs), np.linalg.norm(bh + bs)))


def estimate_cov(samples, spec: EstimatorSpec) -> SymMatrix:
    """Dispatch a sample block to the estimator selected by ``spec``."""
    if spec.kind is EstimatorKind.SAMPLE:
        return sample_cov(samples)
    if spec.kind is EstimatorKind.SHRINKAGE:
        return shrinkage_cov(samples, spec)
    if spec.kind is EstimatorKind.TRUNCATION:
        return truncation_cov(samples, spec)
    if spec.kind is EstimatorKind.ELEMENTWISE:
        return elementwise_trunc_cov(samples, spec.delta, spec.alpha)
    raise ValueError(f"unknown estimator kind: {spec.kind!r}")
