"""
Numerics - Deterministic numerical kernel shared by every estimator

Linear solves, quantiles, trapezoid integration, chi-square tail probabilities and the
seeded random streams. Every stochastic routine in the package takes an explicit
RngStream; there is no global random state.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import integrate, linalg, stats

from utils.errors import NonFiniteInputError, SingularSystemError

logger = logging.getLogger(__name__)

# Relative tolerance on |R_ii| used to decide column rank after QR
RANK_TOLERANCE = 1e-10


def ensure_finite(values, name: str = "input") -> np.ndarray:
    """Return values as a float64 array, rejecting NaN/Inf eagerly"""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NonFiniteInputError(f"{name} contains {bad} non-finite value(s)")
    return arr


def column_rank_deficit(X: np.ndarray, tol: float = RANK_TOLERANCE) -> np.ndarray:
    """Indices of columns that are (numerically) linear combinations of earlier columns

    Uses the diagonal of the unpivoted QR factor, so the first column of each
    collinear group is kept and the later ones are reported.
    """
    if X.shape[1] == 0:
        return np.array([], dtype=int)
    r = np.linalg.qr(X, mode="r")
    diag = np.abs(np.diag(r))
    scale = max(float(np.max(np.linalg.norm(X, axis=0))), 1.0)
    return np.flatnonzero(diag <= tol * scale)


def ols_solve(X, Y) -> np.ndarray:
    """Least-squares coefficients of Y on the columns of X via QR

    Args:
        X: (n, k) design matrix with full column rank
        Y: (n,) or (n, m) response(s)

    Returns:
        (k,) or (k, m) coefficient array, matching the dimensionality of Y
    """
    X = ensure_finite(X, "X")
    Y = ensure_finite(Y, "Y")
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if Y.shape[0] != n:
        raise ValueError(f"X has {n} rows but Y has {Y.shape[0]}")
    if n < k:
        raise SingularSystemError(
            f"Underdetermined system: {n} rows for {k} columns", n_offending=k - n
        )

    q, r = np.linalg.qr(X, mode="reduced")
    scale = max(float(np.max(np.linalg.norm(X, axis=0))), 1.0)
    deficient = np.flatnonzero(np.abs(np.diag(r)) <= RANK_TOLERANCE * scale)
    if deficient.size:
        raise SingularSystemError(
            f"Design matrix is rank deficient: {deficient.size} of {k} columns are "
            f"collinear (indices {deficient.tolist()})",
            n_offending=int(deficient.size),
            columns=deficient.tolist(),
        )
    return linalg.solve_triangular(r, q.T @ Y, lower=False)


def sample_quantile(values, alpha: float) -> float:
    """Type-7 sample quantile (linear interpolation between order statistics)"""
    arr = ensure_finite(values, "values").ravel()
    if arr.size == 0:
        raise ValueError("Cannot take the quantile of an empty sample")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(np.quantile(arr, alpha, method="linear"))


def trapezoid_integrate(xs, ys) -> float:
    """Composite trapezoid rule on a strictly increasing grid"""
    xs = ensure_finite(xs, "xs").ravel()
    ys = ensure_finite(ys, "ys").ravel()
    if xs.size != ys.size:
        raise ValueError(f"Grid has {xs.size} points but values have {ys.size}")
    if xs.size < 2:
        raise ValueError("Need at least two grid points to integrate")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("Integration grid must be strictly increasing")
    return float(integrate.trapezoid(ys, xs))


def chi_square_sf(x: float, df: int) -> float:
    """P(chi2_df > x)"""
    if not np.isfinite(x):
        raise NonFiniteInputError(f"chi-square statistic is not finite: {x}")
    if x < 0:
        raise ValueError(f"chi-square statistic must be non-negative, got {x}")
    if int(df) != df or df < 1:
        raise ValueError(f"df must be a positive integer, got {df}")
    return float(stats.chi2.sf(x, int(df)))


# ── Random generation ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sigma: float = 1.0


@dataclass(frozen=True)
class Uniform:
    a: float = 0.0
    b: float = 1.0


@dataclass(frozen=True)
class StudentT:
    df: float = 4.0


Distribution = Union[Normal, Uniform, StudentT]


@dataclass
class RngStream:
    """Seeded PCG64 stream; owned by one consumer at a time"""

    seed: int = 0
    algorithm: str = field(default="PCG64", init=False)
    spawn_key: Tuple[int, ...] = field(default=(), init=False)
    _seed_seq: np.random.SeedSequence = field(init=False, repr=False)
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self._seed_seq = np.random.SeedSequence(int(self.seed))
        self.generator = np.random.Generator(np.random.PCG64(self._seed_seq))

    @classmethod
    def _from_seed_sequence(cls, seed: int, seq: np.random.SeedSequence) -> "RngStream":
        stream = cls.__new__(cls)
        stream.seed = seed
        stream.algorithm = "PCG64"
        stream.spawn_key = tuple(int(k) for k in seq.spawn_key)
        stream._seed_seq = seq
        stream.generator = np.random.Generator(np.random.PCG64(seq))
        return stream

    def spawn(self, n: int) -> List["RngStream"]:
        """Independent child streams, reproducible from the parent seed

        Children keep the root seed; spawn_key holds the path of child indices.
        """
        children = self._seed_seq.spawn(n)
        return [RngStream._from_seed_sequence(self.seed, child) for child in children]

    @property
    def label(self) -> str:
        """Seed plus spawn path, e.g. 3/0/2 for the third child of the first child of seed 3"""
        return "/".join(str(k) for k in (self.seed, *self.spawn_key))

    def child_seed(self) -> int:
        """A 63-bit integer drawn from this stream, for seeding config-driven components"""
        return int(self.generator.integers(0, 2 ** 63 - 1))


def draw(stream: RngStream, dist: Distribution, size: Optional[Union[int, tuple]] = None):
    """Draw from Normal, Uniform or StudentT using the supplied stream

    Student-t draws use the construction Z / sqrt(V/df) with Z standard normal and
    V chi-square(df).
    """
    gen = stream.generator
    if isinstance(dist, Normal):
        if not dist.sigma > 0:
            raise ValueError(f"Normal sigma must be positive, got {dist.sigma}")
        return gen.normal(dist.mu, dist.sigma, size)
    if isinstance(dist, Uniform):
        if not dist.a < dist.b:
            raise ValueError(f"Uniform needs a < b, got a={dist.a}, b={dist.b}")
        return gen.uniform(dist.a, dist.b, size)
    if isinstance(dist, StudentT):
        if not dist.df > 0:
            raise ValueError(f"Student-t df must be positive, got {dist.df}")
        z = gen.standard_normal(size)
        v = gen.chisquare(dist.df, size)
        return z / np.sqrt(v / dist.df)
    raise TypeError(f"Unsupported distribution: {dist!r}")
