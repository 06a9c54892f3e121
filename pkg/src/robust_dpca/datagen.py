"""Seeded sample generators with known ground-truth covariance structure.

Every generator is a pure function of its seed: the same seed gives bitwise
identical samples on any platform (numpy PCG64 streams). Seeds for shards and
replications are derived from a master seed with a documented 64-bit mix
(:func:`derive_seed`), so any single shard of any replication can be re-drawn
in isolation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import EigBasis, SymMatrix

__all__ = [
    "ModelKind",
    "LinkKind",
    "ModelSpec",
    "GroundTruth",
    "derive_seed",
    "spiked_diagonal",
    "gen_spiked_t",
    "gen_spiked_laplace",
    "gen_pareto",
    "gen_gaussian_outlier",
    "gen_single_index",
    "load_delimited",
]

_MASK64 = (1 << 64) - 1


class ModelKind(Enum):
    SPIKED_T = "spiked-t"
    SPIKED_LAPLACE = "spiked-laplace"
    PARETO = "pareto"
    GAUSSIAN_OUTLIER = "gaussian-outlier"
    SINGLE_INDEX = "single-index"


class LinkKind(Enum):
    SQUARE = "square"
    QUARTIC_HALF = "quartic-half"


@dataclass(frozen=True)
class ModelSpec:
    """Sampling model parameters.

    Fields not used by a given kind are simply ignored by its generator:
    ``nu`` is the t degrees of freedom (tail of the noise for the
    single-index model), ``shape_k`` the Pareto shape, ``c`` the outlier
    multiplier, ``link`` the single-index link function.
    """

    kind: ModelKind
    d: int
    lam: float = 50.0
    nu: float = 5.0
    shape_k: float = 4.1
    c: float = 2.0
    link: LinkKind = LinkKind.SQUARE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.lam <= 0:
            raise ValueError(f"spike scale must be positive, got {self.lam}")
        if self.c < 1:
            raise ValueError(f"outlier multiplier must be >= 1, got {self.c}")


@dataclass(frozen=True)
class GroundTruth:
    """Population covariance, its top-K eigenspace, and the eigengap at K."""

    population_cov: SymMatrix
    v_k: EigBasis
    eigengap: float


def _splitmix64(z: int) -> int:
    """One splitmix64 step; the standard 64-bit finalizer mix."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *stream: int) -> int:
    """Mix a master seed with nonnegative stream components (splitmix64 chain).

    Distinct component tuples give independent-looking 64-bit seeds, so shard
    and replication streams never collide and each is replayable on its own.
    """
    h = _splitmix64(master_seed & _MASK64)
    for part in stream:
        if part < 0:
            raise ValueError(f"stream components must be nonnegative, got {part}")
        h = _splitmix64(h ^ (part & _MASK64))
    return h


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def spiked_diagonal(d: int, lam: float) -> np.ndarray:
    """Spectrum (lam, lam/2, lam/4, 1, ..., 1) used by the spiked models."""
    if d < 4:
        raise ValueError(f"spiked profile needs d >= 4, got {d}")
    diag = np.ones(d)
    diag[0], diag[1], diag[2] = lam, lam / 2.0, lam / 4.0
    return diag


def _ground_truth_from_diag(diag: np.ndarray, k: int) -> GroundTruth:
    d = diag.shape[0]
    if not 1 <= k < d:
        raise ValueError(f"need 1 <= k < d for an eigengap, got k={k}, d={d}")
    order = np.argsort(-diag, kind="stable")
    basis = np.zeros((d, k))
    basis[order[:k], np.arange(k)] = 1.0
    sorted_vals = diag[order]
    return GroundTruth(
        population_cov=SymMatrix.from_diag(diag),
        v_k=EigBasis(basis),
        eigengap=float(sorted_vals[k - 1] - sorted_vals[k]),
    )


def gen_spiked_t(
    spec: ModelSpec, n: int, k: int = 3, seed: int | None = None
) -> tuple[np.ndarray, GroundTruth]:
    """Multivariate t draws with a spiked scale matrix.

    X = Z * sqrt(nu / W) with Z ~ N(0, diag(lam, lam/2, lam/4, 1, ..., 1))
    and W ~ chi-square(nu) per row. The population covariance picks up the
    nu/(nu - 2) factor (5/3 at nu = 5).
    """
    if spec.nu <= 2:
        raise ValueError(f"t model needs nu > 2 for a finite covariance, got {spec.nu}")
    rng = _rng(spec.seed if seed is None else seed)
    diag = spiked_diagonal(spec.d, spec.lam)
    z = rng.standard_normal((n, spec.d)) * np.sqrt(diag)
    w = rng.chisquare(spec.nu, size=n)
    x = z * np.sqrt(spec.nu / w)[:, None]
    return x, _ground_truth_from_diag(diag * spec.nu / (spec.nu - 2.0), k)


def gen_spiked_laplace(
    spec: ModelSpec, n: int, k: int = 3, seed: int | None = None
) -> tuple[np.ndarray, GroundTruth]:
    """Independent Laplace coordinates with the spiked scale profile.

    Coordinate j has scale sqrt(diag_j), hence variance 2 * diag_j; the
    population covariance is 2 diag(lam, lam/2, lam/4, 1, ..., 1).
    """
    rng = _rng(spec.seed if seed is None else seed)
    diag = spiked_diagonal(spec.d, spec.lam)
    x = rng.laplace(loc=0.0, scale=np.sqrt(diag), size=(n, spec.d))
    return x, _ground_truth_from_diag(2.0 * diag, k)


def gen_pareto(
    spec: ModelSpec, n: int, k: int = 3, seed: int | None = None
) -> tuple[np.ndarray, GroundTruth]:
    """Centered independent Pareto coordinates matched to the spiked profile.

    Coordinate j is Pareto(shape_k) with scale s_j solved so that the centered
    variance s^2 k / ((k-1)^2 (k-2)) equals diag_j, then shifted by its mean
    s_j k / (k-1). The population covariance is exactly
    diag(lam, lam/2, lam/4, 1, ..., 1).
    """
    shape = spec.shape_k
    if shape <= 2:
        raise ValueError(f"pareto shape must exceed 2 for finite variance, got {shape}")
    rng = _rng(spec.seed if seed is None else seed)
    diag = spiked_diagonal(spec.d, spec.lam)
    scale = np.sqrt(diag * (shape - 1.0) ** 2 * (shape - 2.0) / shape)
    raw = (rng.pareto(shape, size=(n, spec.d)) + 1.0) * scale
    x = raw - scale * shape / (shape - 1.0)
    return x, _ground_truth_from_diag(diag, k)


def outlier_diagonal(d: int) -> np.ndarray:
    """Spectrum (5, 4, 3, 2, 1, ..., 1) used by the outlier experiment."""
    if d < 5:
        raise ValueError(f"outlier profile needs d >= 5, got {d}")
    diag = np.ones(d)
    diag[:4] = [5.0, 4.0, 3.0, 2.0]
    return diag


def gen_gaussian_outlier(
    spec: ModelSpec,
    n_per_shard: int,
    m: int,
    k: int = 4,
    n_outliers: int = 100,
    seed: int | None = None,
) -> tuple[list[np.ndarray], GroundTruth]:
    """Gaussian shards with a fixed number of rows inflated by the factor c.

    Every shard draws n i.i.d. N(0, diag(5, 4, 3, 2, 1, ..., 1)) rows, then
    scales ``n_outliers`` uniformly chosen rows (without replacement) by
    ``spec.c``. Shard streams are derived from the seed so each shard is
    independently replayable.
    """
    if n_per_shard < n_outliers:
        raise ValueError(
            f"each shard needs at least {n_outliers} rows, got {n_per_shard}"
        )
    if m < 1:
        raise ValueError(f"need at least one shard, got m={m}")
    base = spec.seed if seed is None else seed
    diag = outlier_diagonal(spec.d)
    std = np.sqrt(diag)
    shards = []
    for server in range(1, m + 1):
        rng = _rng(derive_seed(base, server))
        x = rng.standard_normal((n_per_shard, spec.d)) * std
        idx = rng.choice(n_per_shard, size=n_outliers, replace=False)
        x[idx] *= spec.c
        shards.append(x)
    return shards, _ground_truth_from_diag(diag, k)


def gen_single_index(
    spec: ModelSpec,
    n: int,
    seed: int | None = None,
    beta_star: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-index responses y = f(<beta*, x>) + eps with t-distributed noise.

    X is standard normal, eps ~ t(nu) independent of X, and f is x^2 or
    x^4/2. When ``beta_star`` is not supplied a fresh direction beta/||beta||
    with beta ~ N(0, I) is drawn first (pass one in to share the direction
    across shards). Returns (y, x, beta_star).
    """
    if spec.nu <= 2:
        raise ValueError(f"noise needs nu > 2 for finite variance, got {spec.nu}")
    rng = _rng(spec.seed if seed is None else seed)
    if beta_star is None:
        beta = rng.standard_normal(spec.d)
        beta_star = beta / np.linalg.norm(beta)
    else:
        beta_star = np.asarray(beta_star, dtype=np.float64)
        if beta_star.shape != (spec.d,):
            raise ValueError(f"beta_star must have shape ({spec.d},)")
    x = rng.standard_normal((n, spec.d))
    eps = rng.standard_t(spec.nu, size=n)
    proj = x @ beta_star
    if spec.link is LinkKind.SQUARE:
        signal = proj**2
    elif spec.link is LinkKind.QUARTIC_HALF:
        signal = proj**4 / 2.0
    else:  # pragma: no cover
        raise ValueError(f"unknown link: {spec.link!r}")
    return signal + eps, x, beta_star


def load_delimited(path, delimiter: str | None = None, max_cols: int | None = None) -> np.ndarray:
    """Read a numeric matrix from a delimited text file.

    ``delimiter=None`` splits on any whitespace; pass "," for CSV. Only the
    first ``max_cols`` columns are kept. A leading non-numeric line is treated
    as a header and skipped. Rows with non-numeric cells are rejected and
    reported (with their 1-based line numbers) through a warning; rows whose
    column count disagrees with the first accepted row raise ValueError.
    """
    rows: list[list[float]] = []
    rejected: list[int] = []
    width: int | None = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc

    def parse(fields: list[str]) -> list[float] | None:
        try:
            return [float(f) for f in fields]
        except ValueError:
            return None

    first_data_line = True
    for lineno, line in enumerate(lines, start=1):
        fields = line.split(delimiter) if delimiter else line.split()
        fields = [f.strip() for f in fields if f.strip()]
        if not fields:
            continue
        if max_cols is not None:
            fields = fields[:max_cols]
        values = parse(fields)
        if values is None:
            if first_data_line:
                first_data_line = False  # header line
                continue
            rejected.append(lineno)
            continue
        first_data_line = False
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ValueError(
                f"ragged row at line {lineno}: expected {width} columns, "
                f"got {len(values)}"
            )
        rows.append(values)

    if rejected:
        warnings.warn(
            f"rejected {len(rejected)} unparseable row(s) at line(s) "
            f"{rejected}",
            UserWarning,
            stacklevel=2,
        )
    if not rows:
        raise ValueError(f"no numeric rows found in {path}")
    return np.asarray(rows, dtype=np.float64)
