"""Gluing countably many fundamental block maps into one embedding.

A *schedule* is the bookkeeping for the glued map
``phi(x) = (phi_n(x) - phi_n(t0))_n`` into an l_q-sum of block targets:

* ``r_n``  -- block scale (strong schedules: the Gaussian bandwidth,
  nonincreasing; coarse schedules: the range radius, nondecreasing, with
  bandwidth ``(eps_n / r_n)^2``),
* ``eps_n`` -- expansion budget of block n,
* ``mu_n``  -- compression budget of block n at small separations,
* ``s_n``   -- activation threshold: block n's distance is at least
  ``eta`` once the separation reaches s_n,
* ``gamma`` / ``xi`` -- the shared expansion / compression shape
  functions (pure powers for the presets).

The preset budgets are stored in their plain power-log form, and the
*certified* per-block bounds carry an extra multiplier (``eps_mult`` /
``mu_mult``) absorbing the exact transport constants: the sqrt(2) from
``1 - e^{-u} <= u``, the 1/e from ``1 - e^{-u} >= u/e`` on u <= 1, and
the signed-power sphere constants.  All claims audited by
:func:`per_pair_bounds_check` use the certified budgets, so a zero
violation count is an exact statement about the maps as built, with no
asymptotic slack hiding in a constant.

Writing Q for the glued power mass (Q = Delta^q for q >= 1, Q = Delta
itself for q <= 1 where the metric is already a power sum), the audited
per-pair claims are:

* strong upper:   ``Q <= (sum_n ceps_n^m) * gamma(d)^m``
* step lower:     ``Q >= k * eta^m`` where k blocks have ``s_n <= d``
* small-distance: ``Q >= (sum_n cmu_n^m) * xi(d)^m`` on the region
  ``max_n r_n * d^2 <= 1`` where the 1/e envelope is valid
* coarse upper:   ``Q <= 2^m * k + K`` for ``r_k <= d``, K the full
  certified budget mass

with m = q for q >= 1 and m = 1 for q <= 1 (block distances in the
power-sum regime are combined by plain summation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from .gaussian import (
    KernelExact,
    RandomFeatures,
    TruncatedExp,
    FundamentalMapSpec,
    delta_q,
    moduli_exponents,
    phi_distance_batch,
    phi_map,
    psi_distance_exact,
    sphere_block_interval,
    _transport_constants,
)
from .metric_core import ExponentRegime, MonotoneFunction, TruncatedVector

__all__ = [
    "PowerLogSeq",
    "GeometricSeq",
    "ParamSchedule",
    "preset_schedule",
    "GaussianBlockFamily",
    "GluedEmbedding",
    "glue",
    "truncation_tail_bound",
    "per_pair_bounds_check",
    "predicted_gap",
    "GluingCheckReport",
]


@dataclass(frozen=True)
class PowerLogSeq:
    """n -> coef * n^n_pow * ln(n)^log_pow, defined for n >= n_min."""

    coef: float
    n_pow: float
    log_pow: float
    n_min: int = 2

    def __post_init__(self) -> None:
        if self.coef <= 0:
            raise ValueError("coefficient must be positive")
        if self.log_pow != 0 and self.n_min < 2:
            raise ValueError("log powers need n_min >= 2 (log 1 = 0 degenerates)")

    @property
    def unbounded(self) -> bool:
        return self.n_pow > 0 or (self.n_pow == 0 and self.log_pow > 0)

    def value(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if np.any(n < self.n_min):
            raise ValueError(f"sequence defined for n >= {self.n_min}")
        out = self.coef * n ** self.n_pow
        if self.log_pow != 0:
            out = out * np.log(n) ** self.log_pow
        return out

    def power_tail(self, power: float, n_last: int) -> float:
        """Certified upper bound on sum_{n > n_last} value(n)^power.

        Integral comparison for the eventually decreasing summand
        x^{-a} ln(x)^{-b} with a = -power * n_pow, b = -power * log_pow;
        raises if the series diverges.
        """
        if n_last < max(self.n_min, 2):
            raise ValueError("tail start must be at or beyond the first index")
        a = -power * self.n_pow
        b = -power * self.log_pow
        c = self.coef ** power
        ln_n = math.log(n_last)
        if a > 1 and b >= 0:
            return c * n_last ** (1.0 - a) * ln_n ** (-b) / (a - 1.0)
        if a > 1 and b < 0:
            # integral_N^inf x^{-a} ln^m x dx = Gamma(m+1, (a-1) ln N) / (a-1)^{m+1}
            m = -b
            if ln_n * a < m:
                raise ValueError("tail start too small for the growing-log branch")
            z = (a - 1.0) * ln_n
            return c * gammaincc(m + 1.0, z) * math.gamma(m + 1.0) / (a - 1.0) ** (m + 1.0)
        if a == 1 and b > 1:
            return c * ln_n ** (1.0 - b) / (b - 1.0)
        raise ValueError(f"sum of value(n)^{power} diverges (a={a}, b={b})")


@dataclass(frozen=True)
class GeometricSeq:
    """n -> coef * ratio^n; exact geometric tails when ratio^power < 1."""

    coef: float
    ratio: float
    n_min: int = 1

    def __post_init__(self) -> None:
        if self.coef <= 0 or self.ratio <= 0 or self.ratio == 1.0:
            raise ValueError("need coef > 0 and positive ratio != 1")

    @property
    def unbounded(self) -> bool:
        return self.ratio > 1

    def value(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if np.any(n < self.n_min):
            raise ValueError(f"sequence defined for n >= {self.n_min}")
        with np.errstate(over="ignore"):
            return self.coef * self.ratio ** n

    def power_tail(self, power: float, n_last: int) -> float:
        rq = self.ratio ** power
        if rq >= 1:
            raise ValueError(f"sum of value(n)^{power} diverges (ratio^power >= 1)")
        return self.coef ** power * rq ** (n_last + 1) / (1.0 - rq)


_Seq = PowerLogSeq | GeometricSeq


@dataclass(frozen=True)
class ParamSchedule:
    """A gluing schedule: plain budget sequences plus certified multipliers.

    ``eps_mult`` / ``mu_mult`` rescale the stored sequences into the
    budgets actually certified for the block maps; the presets derive
    them from the transport constants, custom schedules default to 1.
    """

    name: str
    q: ExponentRegime
    kind: str                      # "strong" | "coarse"
    r_seq: _Seq
    eps_seq: _Seq
    s_seq: _Seq
    mu_seq: _Seq | None
    eta: float
    gamma: MonotoneFunction
    xi: MonotoneFunction | None
    eps_mult: float = 1.0
    mu_mult: float = 1.0
    n0: int = 2
    eta_source: str = "explicit"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("strong", "coarse"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        for seq in (self.r_seq, self.eps_seq, self.s_seq, self.mu_seq):
            if seq is not None and self.n0 < seq.n_min:
                raise ValueError("n0 below a sequence's first index")
        # Budgets must be summable at both the tail-bookkeeping power q
        # and the gluing power m; certify now so construction fails early.
        self.eps_seq.power_tail(self.q.p, max(self.n0, 2))
        if self.mass_power != self.q.p:
            self.eps_seq.power_tail(self.mass_power, max(self.n0, 2))
        if not self.s_seq.unbounded:
            raise ValueError("activation thresholds s_n must be unbounded")
        ns = np.arange(self.n0, self.n0 + 64)
        r = self.r_seq.value(ns)
        s = self.s_seq.value(ns)
        if np.any(r <= 0) or np.any(np.diff(s) < 0):
            raise ValueError("need positive r_n and nondecreasing s_n")
        # Block scales shrink in strong schedules (they are bandwidths)
        # and grow in coarse ones (they are ranges).
        if self.kind == "strong" and np.any(np.diff(r) > 0):
            raise ValueError("strong schedules need nonincreasing bandwidths")
        if self.kind == "coarse" and np.any(np.diff(r) < 0):
            raise ValueError("coarse schedules need nondecreasing ranges")

    # -- sequence access -------------------------------------------------

    def r(self, n):
        return self.r_seq.value(n)

    def eps(self, n):
        return self.eps_seq.value(n)

    def s(self, n):
        return self.s_seq.value(n)

    def mu(self, n):
        if self.mu_seq is None:
            raise ValueError(f"schedule {self.name} has no compression budget")
        return self.mu_seq.value(n)

    def bandwidth(self, n):
        """Gaussian bandwidth of block n (coarse schedules derive it)."""
        if self.kind == "coarse":
            return (self.eps(n) / self.r(n)) ** 2
        return self.r(n)

    @property
    def mass_power(self) -> float:
        """Power applied to block distances when gluing (1 in the power-sum regime)."""
        return 1.0 if self.q.is_power_sum else self.q.p

    # -- certified budgets -----------------------------------------------

    def certified_eps(self, n):
        return self.eps_mult * self.eps(n)

    def certified_mu(self, n):
        return self.mu_mult * self.mu(n)

    def eps_q_tail(self, n_terms: int) -> float:
        """Certified bound on sum_{n > last} ceps_n^q (tail bookkeeping mass)."""
        last = self.n0 + n_terms - 1
        return self.eps_mult ** self.q.p * self.eps_seq.power_tail(self.q.p, last)

    def eps_mass_partial(self, n_terms: int) -> float:
        ns = np.arange(self.n0, self.n0 + n_terms)
        return float(np.sum(self.certified_eps(ns) ** self.mass_power))

    def eps_mass_total(self, resolve_terms: int = 10_000) -> float:
        """Certified upper bound on the full budget mass sum_n ceps_n^m."""
        last = self.n0 + resolve_terms - 1
        tail = self.eps_mult ** self.mass_power * self.eps_seq.power_tail(self.mass_power, last)
        return self.eps_mass_partial(resolve_terms) + tail

    def mu_mass_partial(self, n_terms: int) -> float:
        ns = np.arange(self.n0, self.n0 + n_terms)
        return float(np.sum(self.certified_mu(ns) ** self.mass_power))

    def to_json_dict(self) -> dict:
        out = {"name": self.name, "q": self.q.p, "kind": self.kind,
               "eta": self.eta, "eta_source": self.eta_source, "n0": self.n0}
        out.update(self.params)
        return out


def preset_schedule(name: str, q: float | None = None, beta: float | None = None,
                    nu: float | None = None) -> ParamSchedule:
    """Named schedules realizing the deformation-gap constructions.

    ``warmup_l2``       q = 2, needs beta > 1
    ``strong_qge2``     q >= 2, needs beta > 1
    ``strong_1leqle2``  1 <= q <= 2, needs beta > 1
    ``strong_qle1``     0 < q <= 1, needs beta > 1
    ``coarse_l2``       q = 2, needs nu > 1/2
    """
    if name == "coarse_l2":
        if nu is None or nu <= 0.5:
            raise ValueError("coarse_l2 requires nu > 1/2")
        if q not in (None, 2.0):
            raise ValueError("coarse_l2 is an l_2 construction")
        return ParamSchedule(
            name=name, q=ExponentRegime.from_p(2.0), kind="coarse",
            r_seq=PowerLogSeq(1.0, 1.0, 0.0, n_min=1),
            eps_seq=PowerLogSeq(1.0, -nu, 0.0, n_min=1),
            s_seq=PowerLogSeq(1.0, 1.0 + nu, 0.0, n_min=1),
            mu_seq=None,
            eta=delta_q(2.0),
            gamma=MonotoneFunction.power(1.0, 1.0),
            xi=None,
            # Block distance <= sqrt(2 t_n) d = sqrt(2) eps_n (d / r_n).
            eps_mult=math.sqrt(2.0),
            n0=1,
            eta_source="derived_delta_q",
            params={"nu": nu},
        )

    if beta is None or beta <= 1:
        raise ValueError(f"{name} requires beta > 1")
    if name == "warmup_l2":
        if q not in (None, 2.0):
            raise ValueError("warmup_l2 is an l_2 construction")
        q = 2.0
    if q is None:
        raise ValueError(f"{name} requires q")
    gamma_q, xi_q = moduli_exponents(q)
    c_lo, _, c_hi, _ = _transport_constants(q)

    if name in ("warmup_l2", "strong_qge2"):
        if q < 2:
            raise ValueError(f"{name} requires q >= 2")
        r_seq = PowerLogSeq(1.0, -1.0, -beta)
        s_seq = PowerLogSeq(1.0, 0.5, beta / 2.0)
    elif name == "strong_1leqle2":
        if not (1 <= q <= 2):
            raise ValueError("strong_1leqle2 requires 1 <= q <= 2")
        r_seq = PowerLogSeq(1.0, -2.0 / q, -2.0 * beta / q)
        s_seq = PowerLogSeq(1.0, 1.0 / q, beta / q)
    elif name == "strong_qle1":
        if not (0 < q <= 1):
            raise ValueError("strong_qle1 requires 0 < q <= 1")
        r_seq = PowerLogSeq(1.0, -2.0 / q ** 2, -2.0 * beta / q ** 2)
        s_seq = PowerLogSeq(1.0, 1.0 / q ** 2, beta / q ** 2)
    else:
        raise ValueError(f"unknown schedule preset {name!r}")

    # Plain budgets: eps_n = r_n^gamma_q, mu_n = r_n^xi_q; the certified
    # multipliers lift them to bounds valid for the actual block maps.
    eps_seq = PowerLogSeq(1.0, r_seq.n_pow * gamma_q, r_seq.log_pow * gamma_q)
    mu_seq = PowerLogSeq(1.0, r_seq.n_pow * xi_q, r_seq.log_pow * xi_q)
    return ParamSchedule(
        name=name, q=ExponentRegime.from_p(q), kind="strong",
        r_seq=r_seq, eps_seq=eps_seq, s_seq=s_seq, mu_seq=mu_seq,
        eta=delta_q(q),
        gamma=MonotoneFunction.power(1.0, 2.0 * gamma_q),
        xi=MonotoneFunction.power(1.0, 2.0 * xi_q),
        eps_mult=c_hi * 2.0 ** gamma_q,
        mu_mult=c_lo * (2.0 / math.e) ** xi_q,
        eta_source="derived_delta_q",
        params={"q": q, "beta": beta},
    )


class GaussianBlockFamily:
    """Realizes a schedule's blocks with a chosen coordinate backend.

    ``backend="kernel"`` stays coordinate-free (pair geometry is then a
    certified interval, exact at q = 2); ``"exp"`` and ``"rff"``
    materialize coordinates.  rff block n draws its feature table from
    the counter-based stream keyed by (base_seed, n), so block content
    never depends on evaluation order.
    """

    def __init__(self, schedule: ParamSchedule, backend: str = "kernel",
                 base_seed: int = 0, n_features: int = 512,
                 exp_degree: int = 32, ambient_dim: int = 16):
        if backend not in ("kernel", "exp", "rff"):
            raise ValueError(f"unknown backend {backend!r}")
        self.schedule = schedule
        self.backend = backend
        self.base_seed = base_seed
        self.n_features = n_features
        self.exp_degree = exp_degree
        self.ambient_dim = ambient_dim

    @property
    def kernel_mode(self) -> bool:
        return self.backend == "kernel"

    def spec(self, n: int) -> FundamentalMapSpec:
        r = float(self.schedule.bandwidth(n))
        if self.backend == "kernel":
            be = KernelExact(r)
        elif self.backend == "exp":
            be = TruncatedExp(r, self.exp_degree, self.ambient_dim)
        else:
            be = RandomFeatures(r, self.n_features, seed=(self.base_seed, n))
        return FundamentalMapSpec(index=n, r=r, q=self.schedule.q, backend=be)


class GluedEmbedding:
    """A truncated glued embedding with ``n_terms`` blocks from index n0 on."""

    def __init__(self, family, schedule: ParamSchedule | None = None,
                 t0: np.ndarray | None = None, n_terms: int = 200):
        if n_terms < 1:
            raise ValueError("need at least one block")
        fam_sched = getattr(family, "schedule", None)
        if schedule is None:
            schedule = fam_sched
        elif fam_sched is not None and schedule is not fam_sched:
            raise ValueError("family was built for a different schedule")
        if schedule is None:
            raise ValueError("no schedule provided")
        self.family = family
        self.schedule = schedule
        self.n_terms = n_terms
        self.t0 = None if t0 is None else np.asarray(t0, dtype=float)
        self.block_ids = np.arange(schedule.n0, schedule.n0 + n_terms)
        self.bandwidths = np.asarray(schedule.bandwidth(self.block_ids), dtype=float)
        self.s_values = np.asarray(schedule.s(self.block_ids), dtype=float)

    @property
    def tail_constant(self) -> float:
        """Certified bound on the budget mass omitted by truncation."""
        return self.schedule.eps_q_tail(self.n_terms)

    # -- coordinate mode -------------------------------------------------

    def evaluate(self, x) -> TruncatedVector:
        """Concatenated block images phi_n(x) - phi_n(t0)."""
        if self.family.kernel_mode:
            raise ValueError("kernel-mode embeddings have no coordinates")
        x = np.asarray(x, dtype=float)
        base = self.t0 if self.t0 is not None else np.zeros_like(x)
        blocks = []
        for n in self.block_ids:
            spec = self.family.spec(int(n))
            blocks.append(phi_map(x, spec) - phi_map(base, spec))
        offsets = np.concatenate([[0], np.cumsum([len(b) for b in blocks])])
        return TruncatedVector(np.concatenate(blocks), offsets)

    def image_distance(self, x, y) -> float:
        d = self.image_distances(np.asarray(x, dtype=float)[None, :],
                                 np.asarray(y, dtype=float)[None, :])
        return float(d[0])

    def image_distances(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Glued distances for paired rows of X and Y (coordinate mode)."""
        if self.family.kernel_mode:
            raise ValueError("kernel-mode embeddings have interval distances; "
                             "use distance_interval")
        m = self.schedule.mass_power
        total = np.zeros(len(np.atleast_2d(X)))
        for n in self.block_ids:
            spec = self.family.spec(int(n))
            total += phi_distance_batch(X, Y, spec) ** m
        return total if self.schedule.q.is_power_sum else total ** (1.0 / m)

    # -- kernel mode -----------------------------------------------------

    def distance_interval(self, d) -> tuple[np.ndarray, np.ndarray]:
        """Certified [lower, upper] glued distance at separation d.

        Exact (lower == upper) at q = 2 where the block transport is the
        identity and pair distances are functions of the separation alone.
        """
        d = np.atleast_1d(np.asarray(d, dtype=float))
        m = self.schedule.mass_power
        D = psi_distance_exact(d[:, None], self.bandwidths[None, :])
        lo_b, hi_b = sphere_block_interval(D, self.schedule.q.p)
        lo = (lo_b ** m).sum(axis=1)
        hi = (hi_b ** m).sum(axis=1)
        if self.schedule.q.is_power_sum:
            return lo, hi
        return lo ** (1.0 / m), hi ** (1.0 / m)

    # -- shared ----------------------------------------------------------

    def step_count(self, d) -> np.ndarray:
        """Number of truncated blocks whose activation threshold s_n <= d."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        return np.searchsorted(self.s_values, d, side="right")

    def tail_bound(self, d) -> np.ndarray:
        """Certified q-power distance mass beyond the truncation, at separation d."""
        g = _shape_values(self.schedule.gamma, np.asarray(d, dtype=float))
        return self.tail_constant * g ** self.schedule.q.p


def glue(family, schedule: ParamSchedule | None = None,
         t0: np.ndarray | None = None, n_terms: int = 200) -> GluedEmbedding:
    """Assemble a truncated glued embedding from a block family."""
    return GluedEmbedding(family, schedule, t0, n_terms)


def truncation_tail_bound(e: GluedEmbedding, d: float) -> float:
    if d < 0:
        raise ValueError("separation must be nonnegative")
    return float(e.tail_bound(d))


def _shape_values(m: MonotoneFunction, arr: np.ndarray) -> np.ndarray:
    """Evaluate a monotone shape on an array (closed form for pure powers)."""
    if m.kind == "power":
        return m.params["coef"] * arr ** m.params["exponent"]
    return np.array([m(float(t)) for t in np.atleast_1d(arr)])


@dataclass
class GluingCheckReport:
    """Outcome of auditing the certified per-pair claims on sampled pairs."""

    schedule: str
    kind: str
    n_pairs: int
    n_terms: int
    upper_violations: int = 0
    step_violations: int = 0
    small_violations: int = 0
    indeterminate: int = 0
    small_checked: int = 0
    worst_upper_margin: float = math.inf
    worst_step_margin: float = math.inf
    worst_small_margin: float = math.inf
    constants: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return self.upper_violations + self.step_violations + self.small_violations

    def to_dict(self) -> dict:
        worst = {
            "upper": self.worst_upper_margin,
            "step": self.worst_step_margin,
            "small_distance": self.worst_small_margin,
        }
        return {
            "schedule": self.schedule,
            "kind": self.kind,
            "pairs": self.n_pairs,
            "terms": self.n_terms,
            "violations": self.violations,
            "violations_by_bound": {
                "upper": self.upper_violations,
                "step": self.step_violations,
                "small_distance": self.small_violations,
            },
            "indeterminate": self.indeterminate,
            "small_distance_pairs_checked": self.small_checked,
            "worst_margins": {k: (v if math.isfinite(v) else None) for k, v in worst.items()},
            "constants": self.constants,
        }


def _coarse_step_count(schedule: ParamSchedule, d: np.ndarray) -> np.ndarray:
    """#{n >= n0 : r_n <= d} over the *infinite* schedule (coarse upper k)."""
    d = np.atleast_1d(d)
    hi = float(np.max(d))
    n_max = schedule.n0 + 4
    while float(schedule.r(n_max)) <= hi:
        n_max *= 2
        if n_max > 10 ** 9:
            raise ValueError("coarse range sequence grows too slowly for these distances")
    ns = np.arange(schedule.n0, n_max + 1)
    r_vals = np.asarray(schedule.r(ns), dtype=float)
    return np.searchsorted(r_vals, d, side="right")


def per_pair_bounds_check(e: GluedEmbedding, distances: np.ndarray,
                          image_distances: np.ndarray | None = None,
                          eps_scale: float = 1.0, *, rel_tol: float = 1e-9) -> GluingCheckReport:
    """Audit every certified per-pair claim at the given separations.

    In kernel mode the glued distance is only known as a certified
    interval [L, U]; a claim counts as violated when it fails even for
    the favourable endpoint and as verified when it holds for the
    unfavourable one, anything in between landing in ``indeterminate``.
    For the presets the claims hold analytically for the unfavourable
    endpoints, so a nonzero indeterminate count is itself a red flag.
    With ``image_distances`` supplied (coordinate mode) the interval
    collapses to the measured values.

    Margins are relative slacks of the unfavourable endpoint; the worst
    (smallest) one is reported per claim.  ``eps_scale`` rescales the
    certified budget constants; values < 1 tighten the upper claims and
    feed the negative-control tests.  Aggregation is order-independent
    (counts, minima), so pair batches may be processed in any order.
    """
    d = np.atleast_1d(np.asarray(distances, dtype=float))
    if np.any(d < 0):
        raise ValueError("separations must be nonnegative")
    sched = e.schedule
    m = sched.mass_power
    rep = GluingCheckReport(schedule=sched.name, kind=sched.kind,
                            n_pairs=len(d), n_terms=e.n_terms)

    if image_distances is None:
        lo, hi = e.distance_interval(d)
    else:
        lo = hi = np.atleast_1d(np.asarray(image_distances, dtype=float))
    # Work with the glued power mass throughout.
    lo_m = lo if sched.q.is_power_sum else lo ** m
    hi_m = hi if sched.q.is_power_sum else hi ** m

    gamma_d = _shape_values(sched.gamma, d)
    if sched.kind == "strong":
        upper_claim = eps_scale ** m * sched.eps_mass_partial(e.n_terms) * gamma_d ** m
    else:
        K = eps_scale ** m * sched.eps_mass_total()
        upper_claim = 2.0 ** m * _coarse_step_count(sched, d) + K
    floor = np.maximum(upper_claim, 1e-300)
    rep.upper_violations = int(np.sum(lo_m > upper_claim + rel_tol * floor))
    rep.indeterminate += int(np.sum((hi_m > upper_claim + rel_tol * floor)
                                    & (lo_m <= upper_claim + rel_tol * floor)))
    rep.worst_upper_margin = float(np.min((upper_claim - hi_m) / floor))

    k_step = e.step_count(d)
    step_claim = k_step * sched.eta ** m
    active = step_claim > 0
    if np.any(active):
        sc = step_claim[active]
        rep.step_violations = int(np.sum(hi_m[active] < sc * (1 - rel_tol)))
        rep.indeterminate += int(np.sum((lo_m[active] < sc * (1 - rel_tol))
                                        & (hi_m[active] >= sc * (1 - rel_tol))))
        rep.worst_step_margin = float(np.min((lo_m[active] - sc) / sc))

    if sched.kind == "strong" and sched.mu_seq is not None:
        # The compression envelope needs bandwidth * d^2 <= 1 for every
        # truncated block; with nonincreasing bandwidths that pins the
        # validity region to the first block's scale.
        r_max = float(np.max(e.bandwidths))
        valid = r_max * d ** 2 <= 1.0
        rep.small_checked = int(np.sum(valid))
        if rep.small_checked:
            xi_d = _shape_values(sched.xi, d[valid])
            small_claim = sched.mu_mass_partial(e.n_terms) * xi_d ** m
            pos = small_claim > 0
            if np.any(pos):
                sc = small_claim[pos]
                rep.small_violations = int(np.sum(hi_m[valid][pos] < sc * (1 - rel_tol)))
                rep.indeterminate += int(np.sum((lo_m[valid][pos] < sc * (1 - rel_tol))
                                                & (hi_m[valid][pos] >= sc * (1 - rel_tol))))
                rep.worst_small_margin = float(np.min((lo_m[valid][pos] - sc) / sc))
        rep.constants["small_validity_t_max"] = r_max ** -0.5
        # The shared shape hypothesis xi <= gamma also only holds there.
        rep.constants["shape_order_region"] = "restricted_to_small_validity"

    rep.constants.update({
        "eta": sched.eta,
        "eps_mult": sched.eps_mult,
        "mu_mult": sched.mu_mult,
        "eps_mass_partial": sched.eps_mass_partial(e.n_terms),
        "eps_scale": eps_scale,
    })
    if sched.kind == "coarse":
        rep.constants["K"] = eps_scale ** m * sched.eps_mass_total()
    return rep


def _tabulate_finite(seq: _Seq, n0: int, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    ns = np.arange(n0, n0 + n_max, dtype=float)
    vals = np.asarray(seq.value(ns), dtype=float)
    keep = np.isfinite(vals)
    if keep.sum() < 2:
        raise ValueError("sequence overflows immediately; cannot tabulate")
    return ns[keep], vals[keep]


def predicted_gap(schedule: ParamSchedule, kind: str, n_max: int = 20_000) -> MonotoneFunction:
    """Predicted moduli envelopes (shapes; constants deliberately omitted).

    ``kind``:

    * ``"strong_large"`` / ``"coarse_lower"`` -- compression growth at
      large separations, ``s^-(t)^(1/q)`` (plain ``s^-(t)`` for q <= 1)
      with ``s^-`` the generalized inverse of the piecewise-linear
      extension of the activation thresholds;
    * ``"strong_small"`` -- the small-separation compression shape xi;
    * ``"strong_upper"`` -- the expansion shape gamma;
    * ``"coarse_upper"`` -- ``r^-(t)^(1/q)`` from the range sequence.
    """
    expo = 1.0 if schedule.q.is_power_sum else 1.0 / schedule.q.p
    if kind == "strong_small":
        if schedule.xi is None:
            raise ValueError("schedule has no compression shape")
        return schedule.xi
    if kind == "strong_upper":
        return schedule.gamma
    if kind == "coarse_upper":
        ns, vals = _tabulate_finite(schedule.r_seq, schedule.n0, n_max)
        label = "inverse_range_power"
    elif kind in ("strong_large", "coarse_lower"):
        ns, vals = _tabulate_finite(schedule.s_seq, schedule.n0, n_max)
        label = "inverse_threshold_power"
    else:
        raise ValueError(f"unknown envelope kind {kind!r}")
    if np.any(np.diff(vals) < 0):
        raise ValueError("sequence must be nondecreasing for inversion")
    fn = lambda t, _ns=ns, _vals=vals, _e=expo: float(np.interp(t, _vals, _ns)) ** _e
    return MonotoneFunction(fn, float(vals[0]), float(vals[-1]),
                            kind=label, params={"exponent": expo, "n_max": int(ns[-1])})
