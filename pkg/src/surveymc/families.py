"""Natural-parameter exponential families and mixed-column layouts.

Each family is defined by its cumulant function g, so that a response with
natural parameter z has density h(y) * exp(y z - g(z)), mean g'(z), and
variance g''(z):

    bernoulli    g(z) = log(1 + e^z)          domain: all reals
    poisson      g(z) = e^z                   domain: all reals
    gaussian     g(z) = sigma^2 z^2 / 2       domain: all reals
    exponential  g(z) = -log(-z)              domain: z < 0

Evaluations are elementwise over arrays and overflow-safe for |z| up to at
least 700 where the family is defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import DomainError, InvalidInput

__all__ = ["Family", "Block", "CategoryLayout", "FAMILY_NAMES",
           "mean_from_natural", "natural_from_mean"]

FAMILY_NAMES = ("bernoulli", "poisson", "gaussian", "exponential")

# exponential family: natural parameters above this value are out of domain
_EXP_DOMAIN_MAX = -1e-8

# inverse mean mapping clamp for means on a domain boundary (0 counts,
# 0/1 proportions)
_MEAN_EPS = 1e-3


@dataclass(frozen=True)
class Family:
    """One exponential family; gaussian carries its known scale sigma."""

    kind: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILY_NAMES:
            raise InvalidInput(f"unknown family {self.kind!r}, expected one of {FAMILY_NAMES}")
        if self.kind == "gaussian" and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInput(f"gaussian sigma must be positive, got {self.sigma}")

    # -- domain ---------------------------------------------------------

    def in_domain(self, z) -> np.ndarray:
        """Elementwise domain indicator."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "exponential":
            return z <= _EXP_DOMAIN_MAX
        return np.isfinite(z)

    def domain_box(self, half_width: float) -> tuple[float, float]:
        """[lo, hi] interval: the clamp box intersected with the domain."""
        if half_width <= 0:
            raise InvalidInput(f"half_width must be positive, got {half_width}")
        if self.kind == "exponential":
            return (-half_width, _EXP_DOMAIN_MAX)
        return (-half_width, half_width)

    def _check_domain(self, z: np.ndarray) -> None:
        if self.kind == "exponential" and np.any(z > _EXP_DOMAIN_MAX):
            raise DomainError("exponential family requires natural parameter < 0")

    # -- cumulant and derivatives ----------------------------------------

    def g(self, z) -> np.ndarray:
        """Cumulant function, elementwise."""
        z = np.asarray(z, dtype=np.float64)
        self._check_domain(z)
        if self.kind == "bernoulli":
            return np.logaddexp(0.0, z)
        if self.kind == "poisson":
            return np.exp(z)
        if self.kind == "gaussian":
            return 0.5 * self.sigma**2 * z**2
        return -np.log(-z)

    def g_prime(self, z) -> np.ndarray:
        """Mean function g'."""
        z = np.asarray(z, dtype=np.float64)
        self._check_domain(z)
        if self.kind == "bernoulli":
            return expit(z)
        if self.kind == "poisson":
            return np.exp(z)
        if self.kind == "gaussian":
            return self.sigma**2 * z
        return -1.0 / z

    def g_double_prime(self, z) -> np.ndarray:
        """Variance function g''; strictly positive on the domain."""
        z = np.asarray(z, dtype=np.float64)
        self._check_domain(z)
        if self.kind == "bernoulli":
            return expit(z) * expit(-z)
        if self.kind == "poisson":
            return np.exp(z)
        if self.kind == "gaussian":
            return np.full_like(z, self.sigma**2)
        return 1.0 / z**2

    def curvature_sup(self, lo: float, hi: float) -> float:
        """sup of g'' over [lo, hi] intersected with the domain."""
        if self.kind == "bernoulli":
            # peak 1/4 at z = 0
            if lo <= 0.0 <= hi:
                return 0.25
            edge = lo if lo > 0 else hi
            return float(self.g_double_prime(edge))
        if self.kind == "gaussian":
            return float(self.sigma**2)
        if self.kind == "poisson":
            return float(np.exp(hi))
        hi = min(hi, _EXP_DOMAIN_MAX)
        return float(1.0 / hi**2)

    # -- sampling and link mappings ---------------------------------------

    def sample(self, z, rng: np.random.Generator) -> np.ndarray:
        """Draw one response per natural parameter entry."""
        z = np.asarray(z, dtype=np.float64)
        self._check_domain(z)
        if self.kind == "bernoulli":
            return (rng.random(z.shape) < expit(z)).astype(np.float64)
        if self.kind == "poisson":
            return rng.poisson(np.exp(z), size=z.shape).astype(np.float64)
        if self.kind == "gaussian":
            return rng.normal(self.sigma**2 * z, self.sigma, size=z.shape)
        return rng.exponential(-1.0 / z, size=z.shape)

    def mean_to_natural(self, m) -> np.ndarray:
        """Inverse of g', clamping means on the boundary of the mean space.

        Counts below 1e-3 map through log(1e-3); proportions are pinned to
        [1e-3, 1 - 1e-3] before the logit.  Used to put mean-scale
        imputations on the natural-parameter scale.
        """
        m = np.asarray(m, dtype=np.float64)
        if self.kind == "bernoulli":
            return logit(np.clip(m, _MEAN_EPS, 1.0 - _MEAN_EPS))
        if self.kind == "poisson":
            return np.log(np.maximum(m, _MEAN_EPS))
        if self.kind == "gaussian":
            return m / self.sigma**2
        return -1.0 / np.maximum(m, _MEAN_EPS)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = {"family": self.kind}
        if self.kind == "gaussian":
            d["sigma"] = self.sigma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Family":
        return cls(kind=d["family"], sigma=float(d.get("sigma", 1.0)))


@dataclass(frozen=True)
class Block:
    """A contiguous run of columns sharing one family."""

    family: Family
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise InvalidInput(f"block must hold at least one column, got {self.count}")


@dataclass(frozen=True)
class CategoryLayout:
    """Ordered column blocks partitioning the L response columns."""

    blocks: tuple[Block, ...]

    def __post_init__(self):
        if not self.blocks:
            raise InvalidInput("layout needs at least one block")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @classmethod
    def of(cls, *specs: tuple[str, int], sigma: float = 1.0) -> "CategoryLayout":
        """Build from (kind, count) pairs; gaussian blocks take the shared sigma."""
        return cls(tuple(Block(Family(kind, sigma), count) for kind, count in specs))

    @property
    def n_cols(self) -> int:
        return sum(b.count for b in self.blocks)

    def slices(self) -> list[tuple[Family, slice]]:
        """(family, column slice) per block, in order."""
        out, start = [], 0
        for b in self.blocks:
            out.append((b.family, slice(start, start + b.count)))
            start += b.count
        return out

    def family_of_col(self, j: int) -> Family:
        if not 0 <= j < self.n_cols:
            raise InvalidInput(f"column {j} outside 0..{self.n_cols - 1}")
        for fam, sl in self.slices():
            if sl.start <= j < sl.stop:
                return fam
        raise AssertionError("unreachable")

    def block_of_col(self, j: int) -> tuple[int, int]:
        """(block index, offset within block) for global column j."""
        if not 0 <= j < self.n_cols:
            raise InvalidInput(f"column {j} outside 0..{self.n_cols - 1}")
        for s, (_, sl) in enumerate(self.slices()):
            if sl.start <= j < sl.stop:
                return s, j - sl.start
        raise AssertionError("unreachable")


def mean_from_natural(Z, layout: CategoryLayout) -> np.ndarray:
    """Blockwise mean function g' applied to a natural-parameter matrix."""
    Z = np.asarray(Z, dtype=np.float64)
    M = np.empty_like(Z)
    for fam, sl in layout.slices():
        M[:, sl] = fam.g_prime(Z[:, sl])
    return M


def natural_from_mean(M, layout: CategoryLayout, clamp: float = 30.0) -> np.ndarray:
    """Blockwise inverse mean mapping, clipped into each family's clamp box."""
    M = np.asarray(M, dtype=np.float64)
    Z = np.empty_like(M)
    for fam, sl in layout.slices():
        lo, hi = fam.domain_box(clamp)
        Z[:, sl] = np.clip(fam.mean_to_natural(M[:, sl]), lo, hi)
    return Z
