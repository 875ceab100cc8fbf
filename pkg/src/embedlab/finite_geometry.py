"""Finite diagnostic spaces: Hamming cubes, k-subset spaces, and the
cube-based distortion lower bounds used to cap achievable compression.

Everything here is exact integer combinatorics at desk scale; the only
floats are the final p-th roots and ratios.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .metric_core import ExponentRegime, TruncatedVector

# Hard enumeration caps.  Pair iteration beyond ~1e6 vertices or dense
# matrices beyond 2^14 x 2^14 are out of desk-scale scope.
MAX_CUBE_PAIR_DIM = 24
MAX_CUBE_MATRIX_DIM = 14
MAX_AUDIT_PAIRS = 1 << 20


@dataclass(frozen=True)
class HammingCube:
    """Vertex set {0,1}^m under the two-regime ell_p distance.

    Vertices are bitmask integers 0..2^m-1; coordinates are the bits.
    """

    m: int
    p: ExponentRegime

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.m > MAX_CUBE_PAIR_DIM:
            raise ValueError(f"m={self.m} exceeds enumeration cap {MAX_CUBE_PAIR_DIM}")
        if not isinstance(self.p, ExponentRegime):
            object.__setattr__(self, "p", ExponentRegime.from_p(self.p))

    @property
    def n_vertices(self) -> int:
        return 1 << self.m

    def bit_matrix(self) -> np.ndarray:
        """(2^m, m) 0/1 matrix; row u holds the bits of vertex u."""
        if self.m > MAX_CUBE_MATRIX_DIM:
            raise ValueError(f"m={self.m} exceeds matrix cap {MAX_CUBE_MATRIX_DIM}")
        u = np.arange(self.n_vertices, dtype=np.int64)
        return ((u[:, None] >> np.arange(self.m)) & 1).astype(np.float64)

    def points(self):
        return self.bit_matrix()

    def pairwise_distances(self) -> np.ndarray:
        """Dense (2^m, 2^m) matrix of d_p distances."""
        b = self.bit_matrix()
        ham = b @ (1.0 - b).T
        ham += ham.T  # popcount(u xor v), exact in float64 for m <= 14
        if self.p.is_power_sum:
            return ham
        return ham ** (1.0 / self.p.p)

    def metric(self, u: int, v: int) -> float:
        return cube_distance(u, v, self)

    def diameter(self) -> float:
        return float(self.m) if self.p.is_power_sum else self.m ** (1.0 / self.p.p)


def cube_distance(u: int, v: int, cube: HammingCube) -> float:
    """d_p between two cube vertices given as bitmasks."""
    n = cube.n_vertices
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError("vertex masks out of range")
    h = (u ^ v).bit_count()
    if cube.p.is_power_sum:
        return float(h)
    return h ** (1.0 / cube.p.p) if h else 0.0


@dataclass(frozen=True)
class GkSpace:
    """All k-element subsets of {1..n} with the half-symmetric-difference
    distance.  Elements are sorted tuples."""

    k: int
    ground: int

    def __post_init__(self):
        if not (1 <= self.k <= self.ground):
            raise ValueError("need 1 <= k <= ground")
        if math.comb(self.ground, self.k) > MAX_AUDIT_PAIRS:
            raise ValueError("element count exceeds enumeration cap")

    @property
    def n_elements(self) -> int:
        return math.comb(self.ground, self.k)

    def elements(self) -> list[tuple[int, ...]]:
        return list(itertools.combinations(range(1, self.ground + 1), self.k))

    def element_matrix(self) -> np.ndarray:
        """(C(n,k), n) 0/1 incidence matrix in element order."""
        els = self.elements()
        mat = np.zeros((len(els), self.ground), dtype=np.float64)
        for i, e in enumerate(els):
            mat[i, np.asarray(e) - 1] = 1.0
        return mat


def gk_distance(a, b) -> float:
    """|A Delta B| / 2 for two equal-size sets; integer-valued."""
    sa, sb = set(a), set(b)
    if len(sa) != len(a) or len(sb) != len(b):
        raise ValueError("elements must be sets of distinct points")
    if len(sa) != len(sb):
        raise ValueError("sets must have equal size")
    return len(sa ^ sb) / 2.0


def gk_probe(u, ground: int) -> TruncatedVector:
    """Sum of standard basis vectors indexed by the k-subset u."""
    su = set(u)
    if len(su) != len(u):
        raise ValueError("subset has repeated elements")
    if not su or min(su) < 1 or max(su) > ground:
        raise ValueError("subset does not fit the ground set")
    coords = np.zeros(ground)
    coords[np.asarray(sorted(su)) - 1] = 1.0
    return TruncatedVector(coords=coords, offsets=np.array([0, ground]))


@dataclass(frozen=True)
class ProbeAuditReport:
    """Brute-force audit of the basis-sum probe on G_k."""

    k: int
    ground: int
    p: float
    n_pairs: int
    max_ratio: float          # image distance / subset distance, sup over pairs
    min_nonzero_image: float  # discreteness scale of the image
    lipschitz_violations: int
    discreteness_violations: int
    sampled: bool = False

    @property
    def violations(self) -> int:
        return self.lipschitz_violations + self.discreteness_violations


def probe_audit(k: int, ground: int, p, *, lipschitz_factor: float = 2.0,
                rel_tol: float = 1e-12) -> ProbeAuditReport:
    """Check the probe is ``lipschitz_factor``-Lipschitz and 1-discrete.

    The image difference vector has |A Delta B| entries of modulus 1, so
    image distances reduce to symmetric-difference counts; the audit is
    exact integer arithmetic over all pairs (caps permitting).
    """
    regime = p if isinstance(p, ExponentRegime) else ExponentRegime.from_p(p)
    space = GkSpace(k, ground)
    mat = space.element_matrix()
    n_el = mat.shape[0]
    if math.comb(n_el, 2) > MAX_AUDIT_PAIRS:
        raise ValueError("pair count exceeds enumeration cap")
    inter = mat @ mat.T                      # |A cap B|
    sym = 2.0 * (k - inter)                  # |A Delta B|
    iu = np.triu_indices(n_el, k=1)
    sym_u = sym[iu]
    rho = sym_u / 2.0
    image = sym_u if regime.is_power_sum else sym_u ** (1.0 / regime.p)
    nz = image[sym_u > 0]
    ratio = image[rho > 0] / rho[rho > 0]
    max_ratio = float(ratio.max()) if ratio.size else 0.0
    min_nonzero = float(nz.min()) if nz.size else math.inf
    lip_bad = int(np.sum(ratio > lipschitz_factor * (1.0 + rel_tol)))
    disc_bad = int(np.sum(nz < 1.0 - rel_tol))
    return ProbeAuditReport(
        k=k, ground=ground, p=regime.p, n_pairs=int(sym_u.size),
        max_ratio=max_ratio, min_nonzero_image=min_nonzero,
        lipschitz_violations=lip_bad, discreteness_violations=disc_bad,
    )


def enflo_lower_bound(m: int, p, q_type: float) -> float:
    """Distortion lower bound for embedding the cube into a type-q target.

    Exponent-form bound: diam^(1/p - 1/q_type) in the norm regime,
    diam^(1 - 1/q_type) in the power-sum regime, with diam the cube
    diameter in d_p.  The hidden constant is 1 for Euclidean targets
    (q_type = 2), where the diagonal-vs-edge certificate below makes the
    bound exact.
    """
    if q_type < 1:
        raise ValueError("target type must be >= 1")
    cube = HammingCube(m, p if isinstance(p, ExponentRegime) else ExponentRegime.from_p(p))
    diam = cube.diameter()
    if cube.p.is_power_sum:
        expo = 1.0 - 1.0 / q_type
    else:
        expo = 1.0 / cube.p.p - 1.0 / q_type
    return diam ** expo


@dataclass(frozen=True)
class TypeTwoCertificate:
    """Diagonal/edge quadratic sums of a map defined on cube vertices."""

    m: int
    diagonal_sum: float
    edge_sum: float
    ratio: float
    degenerate: bool

    def distortion_bound(self, p=1.0) -> float:
        """Implied Euclidean distortion bound m^(1/p - 1/2) scaled by the
        certificate ratio (ratio 1 recovers the clean bound)."""
        regime = p if isinstance(p, ExponentRegime) else ExponentRegime.from_p(p)
        base = enflo_lower_bound(self.m, regime, 2.0)
        return base * math.sqrt(self.ratio)


def enflo_type2_certificate(f, m: int) -> TypeTwoCertificate:
    """Compare antipodal-diagonal and edge energies of f on {0,1}^m.

    ``f`` is either a callable on bitmask vertices or an array of shape
    (2^m, d).  For maps into Euclidean space the ratio never exceeds 1;
    equality holds for the identity coordinates.
    """
    n = 1 << m
    if callable(f):
        imgs = np.asarray([np.asarray(f(u), dtype=float) for u in range(n)])
    else:
        imgs = np.asarray(f, dtype=float)
    if imgs.ndim == 1:
        imgs = imgs[:, None]
    if imgs.shape[0] != n:
        raise ValueError("map must be defined on all 2^m vertices")
    if not np.all(np.isfinite(imgs)):
        raise ValueError("map contains non-finite values")
    full = n - 1
    half = np.arange(n // 2)
    diag = float(np.sum((imgs[half] - imgs[half ^ full]) ** 2))
    edge = 0.0
    for j in range(m):
        lo = np.flatnonzero((np.arange(n) >> j) & 1 == 0)
        edge += float(np.sum((imgs[lo] - imgs[lo | (1 << j)]) ** 2))
    if edge == 0.0:
        return TypeTwoCertificate(m=m, diagonal_sum=diag, edge_sum=0.0,
                                  ratio=0.0, degenerate=True)
    return TypeTwoCertificate(m=m, diagonal_sum=diag, edge_sum=edge,
                              ratio=diag / edge, degenerate=False)


def cube_report(m: int, p, q_type: float = 2.0) -> dict:
    """Identity-embedding summary for one cube: bound, distortion, ratio."""
    from .moduli import distortion

    regime = p if isinstance(p, ExponentRegime) else ExponentRegime.from_p(p)
    cube = HammingCube(m, regime)
    cert = enflo_type2_certificate(cube.bit_matrix(), m)
    return {
        "m": m,
        "p": regime.p,
        "target_type": q_type,
        "bound": enflo_lower_bound(m, regime, q_type),
        "bound_exponent": (1.0 - 1.0 / q_type) if regime.is_power_sum
                          else (1.0 / regime.p - 1.0 / q_type),
        "measured_distortion": distortion(lambda v: v, cube),
        "certificate_ratio": cert.ratio,
    }
