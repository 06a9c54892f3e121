"""Dense symmetric linear algebra: eigendecompositions, norms, subspace distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymMatrix",
    "EigBasis",
    "EigDecomp",
    "eig_sym",
    "top_k",
    "matrix_fn",
    "spectral_norm",
    "frobenius_norm",
    "max_norm",
    "subspace_dist",
]

_ORTHO_TOL = 1e-10


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class SymMatrix:
    """Dense symmetric d x d matrix.

    The input is symmetrized exactly as (A + A^T)/2 at construction, so
    ``data[i, j] == data[j, i]`` holds bitwise. Instances are immutable and
    safe to share between threads.
    """

    __slots__ = ("data",)

    def __init__(self, entries) -> None:
        arr = np.asarray(entries, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("matrix dimension must be >= 1")
        self.data = _freeze((arr + arr.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_diag(cls, diag) -> "SymMatrix":
        return cls(np.diag(np.asarray(diag, dtype=np.float64)))

    @classmethod
    def identity(cls, d: int) -> "SymMatrix":
        return cls(np.eye(d))

    def __repr__(self) -> str:  # pragma: no cover
        return f"SymMatrix(dim={self.dim})"


class EigBasis:
    """Orthonormal d x K matrix whose columns span an eigenspace."""

    __slots__ = ("columns",)

    def __init__(self, columns) -> None:
        arr = np.asarray(columns, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D column block, got shape {arr.shape}")
        d, k = arr.shape
        if not 1 <= k <= d:
            raise ValueError(f"need 1 <= K <= d, got K={k}, d={d}")
        gram = arr.T @ arr
        if np.max(np.abs(gram - np.eye(k))) > _ORTHO_TOL:
            raise ValueError("columns are not orthonormal within 1e-10")
        self.columns = _freeze(arr)

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def k(self) -> int:
        return self.columns.shape[1]

    def __repr__(self) -> str:  # pragma: no cover
        return f"EigBasis(dim={self.dim}, k={self.k})"


@dataclass(frozen=True)
class EigDecomp:
    """Full eigendecomposition with eigenvalues sorted descending."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so the largest-magnitude entry is positive.

    Makes the decomposition reproducible across runs; all downstream subspace
    quantities are sign-invariant anyway.
    """
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return vectors * signs


def eig_sym(a: SymMatrix) -> EigDecomp:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Raises ValueError on non-finite entries. Ties in the spectrum are kept in
    the (deterministic) order produced by the underlying solver.
    """
    if not np.all(np.isfinite(a.data)):
        raise ValueError("matrix has non-finite entries")
    vals, vecs = np.linalg.eigh(a.data)
    order = slice(None, None, -1)
    vals = np.ascontiguousarray(vals[order])
    vecs = _fix_signs(np.ascontiguousarray(vecs[:, order]))
    return EigDecomp(values=_freeze(vals), vectors=_freeze(vecs))


def top_k(dec: EigDecomp, k: int) -> EigBasis:
    """First k eigenvector columns of a decomposition."""
    if not 1 <= k <= dec.dim:
        raise ValueError(f"k must be in [1, {dec.dim}], got {k}")
    return EigBasis(dec.vectors[:, :k])


def matrix_fn(a: SymMatrix, f) -> SymMatrix:
    """Apply a scalar function to the spectrum: V f(Lambda) V^T."""
    dec = eig_sym(a)
    fvals = np.asarray(f(dec.values), dtype=np.float64)
    return SymMatrix((dec.vectors * fvals) @ dec.vectors.T)


def spectral_norm(a: SymMatrix) -> float:
    """Largest absolute eigenvalue."""
    if not np.all(np.isfinite(a.data)):
        raise ValueError("matrix has non-finite entries")
    vals = np.linalg.eigvalsh(a.data)
    return float(max(abs(vals[0]), abs(vals[-1])))


def frobenius_norm(a: SymMatrix) -> float:
    return float(np.linalg.norm(a.data, "fro"))


def max_norm(a: SymMatrix) -> float:
    return float(np.max(np.abs(a.data)))


def subspace_dist(u: EigBasis, v: EigBasis) -> float:
    """Frobenius distance between the projectors UU^T and VV^T.

    Computed via ``rho^2 = 2 (K - ||U^T V||_F^2)`` so the d x d projectors are
    never formed. The value lies in [0, sqrt(2K)] and is invariant to
    orthogonal rotations of either basis.
    """
    if u.dim != v.dim or u.k != v.k:
        raise ValueError(
            f"shape mismatch: ({u.dim}, {u.k}) vs ({v.dim}, {v.k})"
        )
    cross = float(np.sum((u.columns.T @ v.columns) ** 2))
    return float(np.sqrt(max(0.0, 2.0 * (u.k - cross))))
