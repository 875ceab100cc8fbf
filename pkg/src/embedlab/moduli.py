"""Empirical compression/expansion moduli, exponent fits, distortion.

The lab samples pairs at prescribed separations, evaluates an embedding
on them, and reduces the image distances to two envelopes:

* ``rho_hat[j]``   -- min image distance over pairs with separation at
  least the row's left bin edge (an *upper* estimate of the true
  compression modulus there, since sampling sees a subset),
* ``omega_hat[j]`` -- max image distance over pairs with separation at
  most the row's right bin edge (a *lower* estimate of the true
  expansion modulus).

Those directions matter: certified theory bounds are checked as
``rho_hat >= certified_lower`` and ``omega_hat <= certified_upper``;
violations of these cannot be explained by sampling and are real
errors.  Both envelopes are nondecreasing by construction, and
``rho_hat <= omega_hat`` on every row whose own bin is nonempty.

All randomness is derived per pair from (seed, pair index) through a
counter-based generator, so results are identical for any evaluation
order or worker count; aggregation uses only order-independent
reductions (min, max, count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gaussian import _rff_table
from .glue import GluedEmbedding
from .mazur import mazur_map

__all__ = [
    "PairSampler",
    "ModuliEstimate",
    "ExponentFit",
    "estimate_moduli",
    "fit_exponent",
    "distortion",
    "austin_bound",
    "exact_kernel_engine",
    "coordinate_engine",
    "fast_rff_engine",
    "glued_certifier",
    "write_moduli_csv",
]


@dataclass(frozen=True)
class PairSampler:
    """Draws (x, y) pairs with prescribed log-uniform separations.

    Prescribing separations (rather than sampling two independent
    points) guarantees coverage at every scale; independent sampling
    concentrates all mass at one distance scale.  Base points are
    Gaussian, directions uniform on the sphere, and pair i consumes only
    the stream keyed by (seed, i).
    """

    t_min: float
    t_max: float
    dim: int = 16
    base_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (0 < self.t_min < self.t_max):
            raise ValueError("need 0 < t_min < t_max")
        if self.dim < 1:
            raise ValueError("need dim >= 1")

    def sample(self, n_pairs: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = np.empty((n_pairs, self.dim))
        Y = np.empty((n_pairs, self.dim))
        t = np.empty(n_pairs)
        log_ratio = math.log(self.t_max / self.t_min)
        for i in range(n_pairs):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, i))))
            base = rng.normal(0.0, self.base_scale, size=self.dim)
            direction = rng.normal(size=self.dim)
            direction /= np.linalg.norm(direction)
            t[i] = self.t_min * math.exp(rng.uniform() * log_ratio)
            X[i] = base
            Y[i] = base + t[i] * direction
        return X, Y, t


@dataclass
class ModuliEstimate:
    """Envelope estimates over log-spaced bins; row j covers [edges[j], edges[j+1])."""

    edges: np.ndarray          # len B+1
    rho_hat: np.ndarray        # len B, at left edges
    omega_hat: np.ndarray      # len B, at right edges
    counts: np.ndarray         # len B
    seed: int
    n_pairs: int
    certified_lower: np.ndarray | None = None   # at left edges
    certified_upper: np.ndarray | None = None   # at right edges
    certified_enforced: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    def validate(self) -> None:
        for name, env in (("rho_hat", self.rho_hat), ("omega_hat", self.omega_hat)):
            vals = env[np.isfinite(env)]
            if np.any(np.diff(vals) < -1e-12 * (1 + np.abs(vals[:-1]))):
                raise AssertionError(f"{name} is not nondecreasing")
        both = np.isfinite(self.rho_hat) & np.isfinite(self.omega_hat) & (self.counts > 0)
        if np.any(self.rho_hat[both] > self.omega_hat[both] * (1 + 1e-12)):
            raise AssertionError("rho_hat exceeds omega_hat on a populated bin")
        if int(self.counts.sum()) != self.n_pairs:
            raise AssertionError("bin counts do not sum to the pair count")

    def certified_violations(self, rel_tol: float = 1e-9) -> int:
        """Rows where an envelope crosses its certified bound (real errors)."""
        if self.certified_lower is None or self.certified_upper is None:
            return 0
        bad = 0
        ok = np.isfinite(self.rho_hat) & np.isfinite(self.certified_lower)
        bad += int(np.sum(self.rho_hat[ok] < self.certified_lower[ok] * (1 - rel_tol)))
        ok = np.isfinite(self.omega_hat) & np.isfinite(self.certified_upper)
        bad += int(np.sum(self.omega_hat[ok] > self.certified_upper[ok] * (1 + rel_tol)))
        return bad


def estimate_moduli(f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
                    sampler: PairSampler, bins: int = 36, pairs: int = 2000,
                    seed: int = 0, max_empty_fraction: float = 0.5,
                    certifier: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None,
                    certified_enforced: bool = False,
                    meta: dict | None = None) -> ModuliEstimate:
    """Sample pairs, evaluate ``f(X, Y, t)``, and build the envelopes.

    ``certifier(t)`` may supply certified (lower, upper) image-distance
    bounds; they are recorded per row and, when ``certified_enforced``,
    counted as violations by :meth:`ModuliEstimate.certified_violations`
    consumers.  Enforcement is only meaningful for exact engines; Monte
    Carlo backends carry the columns as reference.
    """
    if bins < 1 or pairs < 1:
        raise ValueError("need bins >= 1 and pairs >= 1")
    X, Y, t = sampler.sample(pairs, seed)
    img = np.asarray(f(X, Y, t), dtype=float)
    if img.shape != t.shape or not np.all(np.isfinite(img)) or np.any(img < 0):
        raise ValueError("engine returned invalid image distances")

    edges = np.geomspace(sampler.t_min, sampler.t_max, bins + 1)
    order = np.argsort(t, kind="stable")
    t_sorted = t[order]
    img_sorted = img[order]
    suffix_min = np.minimum.accumulate(img_sorted[::-1])[::-1]
    prefix_max = np.maximum.accumulate(img_sorted)

    pos_left = np.searchsorted(t_sorted, edges[:-1], side="left")
    pos_right = np.searchsorted(t_sorted, edges[1:], side="right")
    rho = np.where(pos_left < pairs, suffix_min[np.minimum(pos_left, pairs - 1)], np.nan)
    omega = np.where(pos_right > 0, prefix_max[np.maximum(pos_right - 1, 0)], np.nan)
    counts = pos_right - pos_left
    # Last bin is right-closed so every sampled separation lands somewhere.
    empty = float(np.mean(counts == 0))
    if empty > max_empty_fraction:
        raise ValueError(f"{empty:.0%} of bins are empty; sampler failed to cover the range")

    cert_lo = cert_hi = None
    if certifier is not None:
        cert_lo = np.asarray(certifier(edges[:-1])[0], dtype=float)
        cert_hi = np.asarray(certifier(edges[1:])[1], dtype=float)

    est = ModuliEstimate(edges=edges, rho_hat=rho, omega_hat=omega,
                         counts=counts.astype(np.int64), seed=seed, n_pairs=pairs,
                         certified_lower=cert_lo, certified_upper=cert_hi,
                         certified_enforced=certified_enforced, meta=dict(meta or {}))
    est.validate()
    return est


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares log-log slope of an envelope over a distance window.

    The slope is an *achieved* scaling of this particular embedding, not
    a modulus of the underlying space (which takes a supremum over all
    embeddings and is not observable here).
    """

    envelope: str
    slope: float
    intercept: float
    t_lo: float
    t_hi: float
    residual_rms: float
    n_bins: int

    def to_dict(self) -> dict:
        return {"envelope": self.envelope, "range": [self.t_lo, self.t_hi],
                "slope": self.slope, "intercept": self.intercept,
                "residual": self.residual_rms, "bins": self.n_bins}


def fit_exponent(m: ModuliEstimate, envelope: str, t_lo: float, t_hi: float) -> ExponentFit:
    """Fit log(envelope) against log(t) on rows inside [t_lo, t_hi]."""
    if not (0 < t_lo < t_hi):
        raise ValueError("need 0 < t_lo < t_hi")
    if envelope == "rho":
        ts, vals = m.edges[:-1], m.rho_hat
    elif envelope == "omega":
        ts, vals = m.edges[1:], m.omega_hat
    else:
        raise ValueError("envelope must be 'rho' or 'omega'")
    use = (ts >= t_lo) & (ts <= t_hi) & (m.counts > 0) & np.isfinite(vals) & (vals > 0)
    if int(use.sum()) < 5:
        raise ValueError(f"only {int(use.sum())} usable bins in range; need >= 5")
    lx = np.log(ts[use])
    ly = np.log(vals[use])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return ExponentFit(envelope=envelope, slope=float(slope), intercept=float(intercept),
                       t_lo=t_lo, t_hi=t_hi,
                       residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                       n_bins=int(use.sum()))


def distortion(f: Callable, space, image_metric: Callable | None = None) -> float:
    """(max image/domain ratio) * (max domain/image ratio) over all pairs.

    ``space`` provides ``points()`` and either ``pairwise_distances()``
    (dense matrix fast path) or ``metric(u, v)``.  Images live in
    Euclidean space unless ``image_metric`` says otherwise.  Scale-free
    by construction; an isometry (or any similarity) scores 1.
    """
    pts = space.points() if callable(getattr(space, "points", None)) else space.points
    pts = list(pts)
    n = len(pts)
    if n < 2:
        raise ValueError("space must contain at least two points")
    if hasattr(space, "pairwise_distances"):
        dom = np.asarray(space.pairwise_distances(), dtype=float)
    else:
        dom = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                dom[i, j] = dom[j, i] = space.metric(pts[i], pts[j])
    if image_metric is None:
        imgs = np.asarray([np.asarray(f(p), dtype=float) for p in pts])
        diff = imgs[:, None, :] - imgs[None, :, :]
        im = np.sqrt(np.sum(diff ** 2, axis=2))
    else:
        images = [f(p) for p in pts]
        im = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                im[i, j] = im[j, i] = image_metric(images[i], images[j])
    iu = np.triu_indices(n, k=1)
    dom_u, im_u = dom[iu], im[iu]
    if np.any(dom_u <= 0):
        raise ValueError("space contains duplicate points")
    if np.any(im_u <= 0):
        raise ValueError("map is not injective on the space (zero image distance)")
    return float(np.max(im_u / dom_u) * np.max(dom_u / im_u))


def austin_bound(eta: float) -> float:
    """Upper bound 1 - eta on the achievable compression exponent."""
    if not (0 < eta <= 1):
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return 1.0 - eta


# -- engines over glued embeddings --------------------------------------


def exact_kernel_engine(e: GluedEmbedding) -> Callable:
    """Exact pair distances for kernel-mode l_2 gluings (distance-only)."""
    if not getattr(e.family, "kernel_mode", False):
        raise ValueError("exact engine needs a kernel-mode family")
    if e.schedule.q.p != 2.0:
        raise ValueError("kernel-mode distances are exact only at q = 2; "
                         "use a coordinate backend for other exponents")

    def engine(X, Y, t):
        lo, hi = e.distance_interval(np.asarray(t, dtype=float))
        return lo

    return engine


def coordinate_engine(e: GluedEmbedding) -> Callable:
    """Float64 per-block coordinate path (exp or rff backends)."""
    if getattr(e.family, "kernel_mode", False):
        raise ValueError("coordinate engine needs a coordinate backend")

    def engine(X, Y, t):
        return e.image_distances(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))

    return engine


def fast_rff_engine(e: GluedEmbedding, dtype=np.float32, point_chunk: int = 4096) -> Callable:
    """Bulk random-feature evaluation of a glued embedding.

    Streams pair chunks through every block's cached feature table in
    reduced precision; identical tables to the float64 path, so results
    agree up to dtype rounding.  This is what makes 2e4-pair moduli runs
    over ~200 blocks affordable.
    """
    fam = e.family
    if getattr(fam, "backend", None) != "rff":
        raise ValueError("fast engine needs an rff-backed family")
    q = e.schedule.q.p
    m = e.schedule.mass_power
    power_sum = e.schedule.q.is_power_sum
    dim = fam.ambient_dim
    scale = math.sqrt(2.0 / fam.n_features)
    tables = []
    for n in e.block_ids:
        w, b = _rff_table(float(e.schedule.bandwidth(int(n))), fam.n_features,
                          (fam.base_seed, int(n)), dim)
        tables.append((w.astype(dtype), b.astype(dtype)))

    def block_coords(P, w, b):
        z = np.cos(P @ w + b)
        z *= scale
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        if q != 2.0:
            z = np.sign(z) * np.abs(z) ** (2.0 / q)
        return z

    def engine(X, Y, t):
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=dtype)
        Y = np.ascontiguousarray(np.atleast_2d(Y), dtype=dtype)
        if X.shape[1] != dim:
            raise ValueError(f"points have dim {X.shape[1]}, family expects {dim}")
        total = np.zeros(len(X), dtype=np.float64)
        for start in range(0, len(X), point_chunk):
            sl = slice(start, start + point_chunk)
            Xc, Yc = X[sl], Y[sl]
            acc = np.zeros(len(Xc), dtype=np.float64)
            for w, b in tables:
                diff = np.abs(block_coords(Xc, w, b) - block_coords(Yc, w, b))
                # Sum of q-th powers is the block's glued mass in both
                # regimes (blocks are q-powered before summation anyway).
                acc += np.sum(diff ** q, axis=1, dtype=np.float64)
            total[sl] = acc
        return total if power_sum else total ** (1.0 / m)

    return engine


def glued_certifier(e: GluedEmbedding) -> Callable:
    """Certified (lower, upper) glued distance bounds as a function of t."""

    def certifier(t):
        return e.distance_interval(np.asarray(t, dtype=float))

    return certifier


def write_moduli_csv(m: ModuliEstimate, path) -> None:
    """Deterministic CSV render (stable formatting, no timestamps)."""

    def fmt(v) -> str:
        if v is None:
            return "nan"
        return f"{v:.12g}"

    lines = ["bin_edge_t,rho_hat,omega_hat,count,certified_lower,certified_upper"]
    for j in range(m.n_bins):
        cl = m.certified_lower[j] if m.certified_lower is not None else float("nan")
        cu = m.certified_upper[j] if m.certified_upper is not None else float("nan")
        lines.append(",".join([fmt(m.edges[j]), fmt(m.rho_hat[j]), fmt(m.omega_hat[j]),
                               str(int(m.counts[j])), fmt(cl), fmt(cu)]))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
