"""Gaussian sphere maps and their certified distance envelopes.

For a bandwidth r > 0 the map psi_r sends a Hilbert-space point x to a
unit vector whose inner products realize the Gaussian kernel:

    <psi_r(x), psi_r(y)> = exp(-r ||x - y||^2),
    ||psi_r(x) - psi_r(y)|| = sqrt(2 (1 - exp(-r ||x - y||^2))).

Three interchangeable realizations are provided:

* :class:`KernelExact`      -- no coordinates; pair distances evaluated
  in closed form (possible because they depend on ||x - y|| only),
* :class:`TruncatedExp`     -- explicit coordinates of the exponential
  tensor series, truncated at a fixed degree, with a computable residual
  bound, stored in the symmetric (multinomial) basis so the dimension is
  C(degree + d, d) rather than sum d^j,
* :class:`RandomFeatures`   -- random Fourier features; Monte-Carlo
  approximation of the same kernel with O(D^{-1/2}) error.

Composing psi_r with the (2, q) signed-power map yields the fundamental
block maps of the glued embeddings.  Their image distances are sandwiched
by transporting the exact psi distance through the certified signed-power
constants; :func:`phi_moduli_envelope` returns that sandwich.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .mazur import mazur_constants, mazur_map
from .metric_core import ExponentRegime

__all__ = [
    "KernelExact",
    "TruncatedExp",
    "RandomFeatures",
    "FundamentalMapSpec",
    "psi_distance_exact",
    "psi_inner_exact",
    "exp_coordinates",
    "exp_coordinates_batch",
    "rff_coordinates",
    "rff_coordinates_batch",
    "phi_map",
    "phi_distance_batch",
    "sphere_block_interval",
    "moduli_exponents",
    "delta_q",
    "phi_moduli_envelope",
    "SATURATION_LEVEL",
]

# 1 - e^{-u} >= u/e holds for 0 <= u <= 1; at the schedule thresholds
# (bandwidth * distance^2 = 1) the squared psi distance equals this level.
SATURATION_LEVEL = 2.0 * (1.0 - math.exp(-1.0))  # = 2 (e-1)/e


def psi_inner_exact(d, r: float):
    """Exact kernel value <psi_r(x), psi_r(y)> for ||x-y|| = d."""
    return np.exp(-r * np.asarray(d, dtype=float) ** 2)


def psi_distance_exact(d, r):
    """Exact image distance sqrt(2 (1 - exp(-r d^2))); lives in [0, sqrt(2))."""
    d = np.asarray(d, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    if np.any(r < 0):
        raise ValueError("bandwidth must be nonnegative")
    out = np.sqrt(2.0 * -np.expm1(-r * d ** 2))
    return out if out.shape else float(out)


@dataclass(frozen=True)
class KernelExact:
    """Distance-only realization: exact, coordinate-free."""

    r: float

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class TruncatedExp:
    """Exponential tensor coordinates up to a fixed degree.

    ``max_coords`` caps the materialized dimension C(degree + dim, dim);
    construction fails beyond the cap rather than exhausting memory.
    """

    r: float
    degree: int
    ambient_dim: int
    max_coords: int = 2_000_000

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError("bandwidth must be positive")
        if self.degree < 0 or self.ambient_dim < 1:
            raise ValueError("need degree >= 0 and ambient_dim >= 1")
        if self.n_coords > self.max_coords:
            raise ValueError(
                f"coordinate count {self.n_coords} exceeds cap {self.max_coords}"
            )

    @property
    def n_coords(self) -> int:
        return math.comb(self.degree + self.ambient_dim, self.ambient_dim)


@dataclass(frozen=True)
class RandomFeatures:
    """Random Fourier features sqrt(2/D) cos(w_i . x + b_i).

    Frequencies are Gaussian with variance 2r per coordinate (matching the
    kernel exp(-r d^2)), phases uniform on [0, 2 pi).  The whole feature
    table is a pure function of (seed, dim), drawn through a counter-based
    generator, so results never depend on evaluation order.
    """

    r: float
    n_features: int
    seed: int | tuple[int, ...]

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError("bandwidth must be positive")
        if self.n_features < 1:
            raise ValueError("need at least one feature")


@functools.lru_cache(maxsize=64)
def _multi_indices(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """All multi-indices with |m| <= degree and weights 1/sqrt(prod m_i!)."""
    rows: list[tuple[int, ...]] = []

    def rec(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            for v in range(remaining + 1):
                rows.append(tuple(prefix + [v]))
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], degree, dim)
    exps = np.array(rows, dtype=np.int64)
    log_fact = np.cumsum(np.log(np.arange(1, degree + 1))) if degree else np.array([])
    lf = np.concatenate([[0.0], log_fact])
    weights = np.exp(-0.5 * lf[exps].sum(axis=1))
    return exps, weights


@functools.lru_cache(maxsize=512)
def _rff_table(r: float, n_features: int, seed, dim: int) -> tuple[np.ndarray, np.ndarray]:
    entropy = (seed if isinstance(seed, tuple) else (seed,)) + (dim,)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
    w = rng.normal(0.0, math.sqrt(2.0 * r), size=(dim, n_features))
    b = rng.uniform(0.0, 2.0 * math.pi, size=n_features)
    return w, b


def exp_coordinates_batch(X: np.ndarray, backend: TruncatedExp) -> tuple[np.ndarray, np.ndarray]:
    """Unit-sphere coordinates and residual bounds for a batch of points.

    Returns ``(coords, residuals)`` where coords has shape
    (batch, n_coords) with unit l_2 rows, and ``residuals[i]`` bounds the
    squared norm lost to truncation *before* renormalization:
    exp(-2 r ||x||^2) * sum_{j > degree} (2 r ||x||^2)^j / j!.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != backend.ambient_dim:
        raise ValueError(f"points have dim {X.shape[1]}, backend expects {backend.ambient_dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    exps, weights = _multi_indices(backend.ambient_dim, backend.degree)
    sq = np.sum(X ** 2, axis=1)
    xs = math.sqrt(2.0 * backend.r) * X
    # Per-dimension power tables keep this at gather cost, not pow cost.
    coords = np.tile(weights, (len(X), 1))
    for i in range(backend.ambient_dim):
        table = xs[:, i, None] ** np.arange(backend.degree + 1)[None, :]
        coords *= table[:, exps[:, i]]
    coords *= np.exp(-backend.r * sq)[:, None]
    residuals = gammainc(backend.degree + 1, 2.0 * backend.r * sq)
    norms = np.linalg.norm(coords, axis=1, keepdims=True)
    coords /= norms
    return coords, residuals


def exp_coordinates(x, backend: TruncatedExp) -> tuple[np.ndarray, float]:
    """Single-point version of :func:`exp_coordinates_batch`."""
    coords, res = exp_coordinates_batch(np.asarray(x, dtype=float)[None, :], backend)
    return coords[0], float(res[0])


def rff_coordinates_batch(X: np.ndarray, backend: RandomFeatures) -> np.ndarray:
    """Renormalized random-feature coordinates, shape (batch, n_features)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    w, b = _rff_table(backend.r, backend.n_features, backend.seed, X.shape[1])
    z = np.cos(X @ w + b)
    z *= math.sqrt(2.0 / backend.n_features)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z


def rff_coordinates(x, backend: RandomFeatures) -> np.ndarray:
    return rff_coordinates_batch(np.asarray(x, dtype=float)[None, :], backend)[0]


def moduli_exponents(q: float) -> tuple[float, float]:
    """(gamma_q, xi_q): growth exponents of the block expansion / compression.

    The block maps satisfy, with bandwidth r and domain separation t,

        expansion  <= const * (r t^2)^gamma_q
        compression >= const * (r t^2)^xi_q     (valid while r t^2 <= 1)

    in the block's own distance (q-norm for q >= 1, power sum for q < 1).
    """
    if q <= 0:
        raise ValueError("q must be positive")
    if q >= 2:
        return 1.0 / q, 0.5
    if q >= 1:
        return 0.5, 1.0 / q
    return q / 2.0, 1.0


@functools.lru_cache(maxsize=None)
def _transport_constants(q: float) -> tuple[float, float, float, float]:
    """(c_lo, e_lo, c_hi, e_hi): block distance bounds c * D^e from psi distance D.

    For q >= 1 the bounds are on the q-norm of the image difference, for
    q < 1 on the q-power-sum metric.  q = 2 is the identity transport.
    """
    if q == 2.0:
        return 1.0, 1.0, 1.0, 1.0
    mc = mazur_constants(2.0, q)
    # Power-sum bounds: c_lower * (D^2)^le <= S_q <= c_upper * (D^2)^ue.
    if q >= 1:
        return (
            mc.c_lower ** (1.0 / q), 2.0 * mc.lower_exponent / q,
            mc.c_upper ** (1.0 / q), 2.0 * mc.upper_exponent / q,
        )
    return mc.c_lower, 2.0 * mc.lower_exponent, mc.c_upper, 2.0 * mc.upper_exponent


def sphere_block_interval(D, q: float):
    """Certified [lower, upper] block distance for unit-sphere pairs at l_2 distance D."""
    c_lo, e_lo, c_hi, e_hi = _transport_constants(q)
    D = np.asarray(D, dtype=float)
    return c_lo * D ** e_lo, c_hi * D ** e_hi


def delta_q(q: float) -> float:
    """Certified block-distance floor once bandwidth * separation^2 >= 1.

    At that threshold the squared psi distance is at least 2 (e-1)/e, and
    it only grows with separation; transporting the floor through the
    certified lower constant gives a uniform compression level.
    """
    lo, _ = sphere_block_interval(math.sqrt(SATURATION_LEVEL), q)
    return float(lo)


@dataclass(frozen=True)
class FundamentalMapSpec:
    """One glued block: bandwidth, target exponent, coordinate realization."""

    index: int
    r: float
    q: ExponentRegime
    backend: KernelExact | TruncatedExp | RandomFeatures

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError("bandwidth must be positive")
        if abs(self.backend.r - self.r) > 1e-12 * max(1.0, self.r):
            raise ValueError("backend bandwidth disagrees with spec bandwidth")

    @property
    def exponents(self) -> tuple[float, float]:
        return moduli_exponents(self.q.p)


def phi_map(x, spec: FundamentalMapSpec) -> np.ndarray:
    """Signed-power image of the Gaussian sphere point, on the unit q-sphere."""
    if isinstance(spec.backend, KernelExact):
        raise ValueError("KernelExact backend has no coordinates; use the envelope")
    if isinstance(spec.backend, TruncatedExp):
        psi, _ = exp_coordinates(x, spec.backend)
    else:
        psi = rff_coordinates(x, spec.backend)
    return mazur_map(psi, 2.0, spec.q.p)


def phi_distance_batch(X: np.ndarray, Y: np.ndarray, spec: FundamentalMapSpec) -> np.ndarray:
    """Block distances between phi images of paired rows of X and Y."""
    if isinstance(spec.backend, KernelExact):
        raise ValueError("KernelExact backend has no coordinates; use the envelope")
    if isinstance(spec.backend, TruncatedExp):
        px, _ = exp_coordinates_batch(X, spec.backend)
        py, _ = exp_coordinates_batch(Y, spec.backend)
    else:
        px = rff_coordinates_batch(X, spec.backend)
        py = rff_coordinates_batch(Y, spec.backend)
    q = spec.q.p
    diff_pow = np.abs(mazur_map(px, 2.0, q) - mazur_map(py, 2.0, q)) ** q
    s = diff_pow.sum(axis=1)
    return s if spec.q.is_power_sum else s ** (1.0 / q)


def phi_moduli_envelope(spec: FundamentalMapSpec, t) -> tuple[np.ndarray, np.ndarray]:
    """Certified (lower, upper) bounds on the block distance at separation t.

    Built by transporting the exact psi distance through the certified
    signed-power constants, so the sandwich holds for *every* separation.
    Three analytic regimes are embedded in it:

    * small separations: since 1 - e^{-u} <= u, the upper bound is below
      ``const * (r t^2)^gamma_q``;
    * while ``r t^2 <= 1``: since 1 - e^{-u} >= u/e, the lower bound is
      above ``const * (r t^2 / e)^xi_q``;
    * once ``r t^2 >= 1``: the lower bound is at least :func:`delta_q`.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("separations must be nonnegative")
    D = psi_distance_exact(t, spec.r)
    lo, hi = sphere_block_interval(D, spec.q.p)
    return lo, hi
