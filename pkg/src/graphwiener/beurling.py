"""Beurling algebra norms of matrices indexed by graph vertices.

A matrix is measured through its decay profile ``h(n)``, the largest
absolute entry among pairs at distance at least ``n``. The graph norm
weights ``h(n)^r`` by ``(n+1)^(alpha r + d - 1)``; the fusion-set norm does
the same on a maximal disjoint set with distances measured in steps of
``N + 1``.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graph import DisjointSet, Graph, GrowthStats, strong_density_for
from .opnorm import inverse_of, operator_norm
from .report import VerificationReport, inequality_report

__all__ = [
    "BeurlingParams",
    "FusionMatrix",
    "LocalizedMatrix",
    "algebra_constant",
    "beurling_norm",
    "embedding_factor",
    "fusion_algebra_constant",
    "fusion_norm",
    "fusion_product_constant",
    "fusion_product_inequality_check",
    "fusion_strong_density",
    "is_critical",
    "lift_check",
    "lift_constant",
    "lift_from_fusion",
    "product_constant",
    "product_inequality_check",
    "profile_norm",
    "restrict_to_fusion",
    "restriction_check",
    "s_constant",
    "s_decay",
    "s_matrix",
    "s_matrix_check",
    "truncate",
    "truncation_constant",
    "truncation_error_check",
    "weighted_boundedness_check",
]


@dataclass(frozen=True)
class BeurlingParams:
    """Exponents of a Beurling norm: summability ``r``, decay ``alpha``, dimension ``d``."""

    r: float
    alpha: float
    d: float = 1.0

    def __post_init__(self):
        if not self.r >= 1:
            raise ValueError("r must be at least 1")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    @property
    def inv_conj(self) -> float:
        """``1/r' = 1 - 1/r``."""
        return 1.0 - 1.0 / self.r

    @property
    def inv_r(self) -> float:
        return 0.0 if math.isinf(self.r) else 1.0 / self.r

    @property
    def excess(self) -> float:
        """``alpha - d/r'``, positive exactly when the norm is an algebra norm."""
        return self.alpha - self.d * self.inv_conj

    def with_(self, **kw) -> BeurlingParams:
        vals = {"r": self.r, "alpha": self.alpha, "d": self.d, **kw}
        return BeurlingParams(**vals)

    def label(self) -> str:
        r = "inf" if math.isinf(self.r) else f"{self.r:g}"
        return f"r={r},alpha={self.alpha:g},d={self.d:g}"

    def to_dict(self):
        return {"r": "inf" if math.isinf(self.r) else self.r, "alpha": self.alpha, "d": self.d}


# ---------------------------------------------------------------------------
# profiles and norms


def profile_norm(h, prm: BeurlingParams, *, exponent_dim: float | None = None) -> float:
    """Weighted norm of a non-increasing profile ``h(0), h(1), ...``."""
    h = np.asarray(h, dtype=float)
    d = prm.d if exponent_dim is None else exponent_dim
    n1 = np.arange(1, h.size + 1, dtype=float)
    scale = h.max() if h.size else 0.0
    if scale == 0:
        return 0.0
    if math.isinf(prm.r):
        return float(np.max(h * n1 ** prm.alpha))
    r = prm.r
    terms = (h / scale) ** r * n1 ** (prm.alpha * r + d - 1)
    return float(scale * terms.sum() ** (1.0 / r))


def _sphere_max(absvals_flat, order, starts):
    return np.maximum.reduceat(absvals_flat[order], starts)


class LocalizedMatrix:
    """A dense matrix indexed by the vertices of a graph.

    The decay profile is computed once at construction; the entries are
    read-only afterwards.
    """

    def __init__(self, entries, graph: Graph, label: str = "matrix", spec: dict | None = None):
        a = np.array(entries, dtype=float)
        if a.shape != (graph.n, graph.n):
            raise ValueError(f"matrix shape {a.shape} does not match graph with {graph.n} vertices")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a.setflags(write=False)
        self.entries = a
        self.graph = graph
        self.label = label
        self.spec = dict(spec or {"kind": "explicit"})
        order, starts = graph.distance_groups
        sph = _sphere_max(np.abs(a).ravel(), order, starts)
        self.profile = np.maximum.accumulate(sph[::-1])[::-1]
        self.profile.setflags(write=False)
        self._inverse = None

    @property
    def n(self):
        return self.graph.n

    def h(self, x) -> np.ndarray:
        """Profile at real arguments, rounded up; zero beyond the diameter."""
        k = np.ceil(np.asarray(x, dtype=float) - 1e-12).astype(np.int64)
        k = np.maximum(k, 0)
        out = np.zeros(k.shape)
        inside = k < self.profile.size
        out[inside] = self.profile[k[inside]]
        return out

    def __matmul__(self, other: LocalizedMatrix) -> LocalizedMatrix:
        return LocalizedMatrix(self.entries @ other.entries, self.graph, f"({self.label})({other.label})")

    def __sub__(self, other):
        return LocalizedMatrix(self.entries - other.entries, self.graph, f"{self.label}-{other.label}")

    def scaled(self, t: float) -> LocalizedMatrix:
        return LocalizedMatrix(t * self.entries, self.graph, f"{t:g}*{self.label}")

    def inverse(self, *, max_condition=None) -> np.ndarray:
        """Cached dense inverse (raises on singular matrices)."""
        if self._inverse is None:
            self._inverse = inverse_of(self.entries, max_condition=max_condition)
        return self._inverse[0]

    @property
    def condition(self) -> float:
        self.inverse()
        return self._inverse[1]

    # serialization

    def to_json(self) -> str:
        return json.dumps({"graph_hash": self.graph.hash, "n": self.n, "label": self.label,
                           "entries": self.entries.tolist()}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str, graph: Graph) -> LocalizedMatrix:
        data = json.loads(text)
        _check_hash(data, graph)
        return cls(np.array(data["entries"], dtype=float), graph, data.get("label", "matrix"))

    def to_bytes(self) -> bytes:
        head = json.dumps({"graph_hash": self.graph.hash, "n": self.n, "label": self.label,
                           "dtype": "<f8", "order": "C"}, separators=(",", ":"))
        return head.encode() + b"\n" + self.entries.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes, graph: Graph) -> LocalizedMatrix:
        head, _, body = blob.partition(b"\n")
        data = json.loads(head)
        _check_hash(data, graph)
        n = data["n"]
        a = np.frombuffer(body, dtype="<f8").reshape(n, n)
        return cls(a, graph, data.get("label", "matrix"))

    def profile_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,h\n")
        for k, v in enumerate(self.profile):
            buf.write(f"{k},{float(v)!r}\n")
        return buf.getvalue()

    def __repr__(self):
        return f"LocalizedMatrix({self.label}, n={self.n})"


def _check_hash(data, graph):
    if data.get("graph_hash") not in (None, graph.hash):
        raise ValueError("matrix was saved for a different graph")


def beurling_norm(A: LocalizedMatrix, prm: BeurlingParams) -> float:
    """Beurling norm of ``A`` from its decay profile."""
    return profile_norm(A.profile, prm)


def truncate(A: LocalizedMatrix, K: int) -> LocalizedMatrix:
    """Band truncation: zero every entry at distance greater than ``K``."""
    if K < 1:
        raise ValueError("truncation width K must be at least 1")
    a = np.where(A.graph.dist <= K, A.entries, 0.0)
    return LocalizedMatrix(a, A.graph, f"{A.label}_K{K}")


class FusionMatrix:
    """A matrix indexed by the members of a maximal disjoint set."""

    def __init__(self, entries, vn: DisjointSet, label: str = "fusion"):
        b = np.array(entries, dtype=float)
        m = len(vn)
        if b.shape != (m, m):
            raise ValueError(f"fusion matrix shape {b.shape} does not match {m} fusion vertices")
        b.setflags(write=False)
        self.entries = b
        self.vn = vn
        self.label = label

    @cached_property
    def profile(self) -> np.ndarray:
        """``h[n]`` = largest entry over fusion pairs at distance at least ``n (N+1)``."""
        md = self.vn.member_dist
        top = int(md.max())
        sph = np.zeros(top + 1)
        np.maximum.at(sph, md.ravel(), np.abs(self.entries).ravel())
        tail = np.maximum.accumulate(sph[::-1])[::-1]
        step = self.vn.N + 1
        idx = np.arange(0, top + 1, step)
        return tail[idx]

    def __matmul__(self, other: FusionMatrix) -> FusionMatrix:
        return FusionMatrix(self.entries @ other.entries, self.vn, f"({self.label})({other.label})")

    def __add__(self, other: FusionMatrix) -> FusionMatrix:
        return FusionMatrix(self.entries + other.entries, self.vn, f"{self.label}+{other.label}")


def fusion_norm(B: FusionMatrix, r: float, alpha: float, strong_d: float) -> float:
    """Beurling norm on a fusion set, exponent ``alpha r + strong_d - 1``.

    ``alpha`` may be negative here, which happens after restriction.
    """
    h = B.profile
    n1 = np.arange(1, h.size + 1, dtype=float)
    scale = h.max() if h.size else 0.0
    if scale == 0:
        return 0.0
    if math.isinf(r):
        return float(np.max(h * n1 ** alpha))
    terms = (h / scale) ** r * n1 ** (alpha * r + strong_d - 1)
    return float(scale * terms.sum() ** (1.0 / r))


def restrict_to_fusion(A: LocalizedMatrix, vn: DisjointSet) -> FusionMatrix:
    m = vn.members
    return FusionMatrix(A.entries[np.ix_(m, m)], vn, f"{A.label}|V{vn.N}")


def lift_from_fusion(B: FusionMatrix, vn: DisjointSet | None = None) -> LocalizedMatrix:
    """Lift to the graph: sum of ``B[m, k]`` over members ``m`` within ``2N``
    of the row vertex and ``k`` within ``4N`` of the column vertex."""
    vn = vn or B.vn
    near2 = vn.near(2 * vn.N)
    near4 = vn.near(4 * vn.N)
    return LocalizedMatrix(near2 @ B.entries @ near4.T, vn.graph, f"lift({B.label})")


def s_matrix(A: LocalizedMatrix, vn: DisjointSet, d: float) -> FusionMatrix:
    """Commutator-dominating matrix on the fusion set.

    Far pairs (distance above ``12(N+1)``) get ``N^d h(dist/2)``, with the
    profile at half-integers rounded up; near pairs share the constant
    ``N^(-1) sum_{n<=2N} h(n)(n+1)^d``.
    """
    N = vn.N
    if N < 1:
        raise ValueError("the fusion matrix S needs N >= 1")
    md = vn.member_dist.astype(float)
    far = md > 12 * (N + 1)
    # the profile vanishes beyond the diameter
    ns = np.arange(min(2 * N, A.graph.diam) + 1)
    near_val = float(np.sum(A.h(ns) * (ns + 1.0) ** d) / N)
    out = np.full(md.shape, near_val)
    if far.any():
        out[far] = N ** d * A.h(md[far] / 2)
    return FusionMatrix(out, vn, f"S[{A.label},N={N}]")


# ---------------------------------------------------------------------------
# constants


def _ratio_factor(alpha, d, inv_conj):
    """``((alpha - (d-1)/r') / (alpha - d/r'))^(1/r')``."""
    if inv_conj == 0:
        return 1.0
    return ((alpha - (d - 1) * inv_conj) / (alpha - d * inv_conj)) ** inv_conj


def truncation_constant(prm: BeurlingParams) -> float:
    """Constant in the truncation estimate, ``2^(alpha+1)`` when ``r = 1``."""
    if prm.r == 1:
        return 2.0 ** (prm.alpha + 1)
    ic = prm.inv_conj
    return 2.0 ** (prm.alpha + 1 - prm.d * ic) / (prm.alpha / ic - prm.d) ** ic


def product_constant(d: float, density: float) -> float:
    """Algebra constant of the unweighted summable class."""
    return d * density * 2.0 ** (d + 1)


def embedding_factor(prm: BeurlingParams) -> float:
    return _ratio_factor(prm.alpha, prm.d, prm.inv_conj)


def algebra_constant(prm: BeurlingParams, density: float) -> float:
    return prm.d * density * 2.0 ** (prm.alpha + 1 + prm.d * prm.inv_r) * embedding_factor(prm)


def fusion_product_constant(sd: float, sdensity: float) -> float:
    return sd * sdensity * 2.0 ** (3 * sd + 1)


def fusion_algebra_constant(r: float, alpha: float, sd: float, sdensity: float) -> float:
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    return sd * sdensity * 2.0 ** (alpha + sd * (2 + inv_r) + 2) * _ratio_factor(alpha, sd, 1 - inv_r)


def lift_constant(r: float, alpha: float, sd: float, doubling: float, N: int) -> float:
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    e = alpha + sd * inv_r
    return 8.0 ** e * doubling ** 7 * float(N) ** e


def is_critical(prm: BeurlingParams) -> bool:
    """Whether ``alpha = d/r' + 1``, where logarithmic factors appear."""
    return math.isclose(prm.alpha, prm.d * prm.inv_conj + 1, rel_tol=0, abs_tol=1e-12)


def s_constant(prm: BeurlingParams) -> float:
    base = 2.0 ** (4 * prm.alpha + 4 * prm.d * prm.inv_r + 2)
    if is_critical(prm) or prm.inv_conj == 0:
        return base
    gap = abs(prm.alpha - 1 - prm.d * prm.inv_conj)
    return base * ((1 + gap) / gap) ** prm.inv_conj


def s_decay(prm: BeurlingParams, N: float) -> float:
    """``N^(-min(1, alpha - d/r'))``, or ``N^(-1) ln(N+1)^(1/r')`` at the critical exponent."""
    if is_critical(prm):
        return N ** -1.0 * math.log(N + 1) ** prm.inv_conj
    return N ** (-min(1.0, prm.excess))


def fusion_strong_density(stats: GrowthStats, vn: DisjointSet) -> float:
    """Strong density valid for this particular fusion set as well."""
    if vn.N in stats.n_values:
        return stats.strong_density
    return max(stats.strong_density, strong_density_for(vn, stats.strong_dimension))


# ---------------------------------------------------------------------------
# checks


def _inst(A, prm=None, **extra):
    out = {"graph": A.graph.label(), "matrix": A.label}
    if prm is not None:
        out.update({"r": prm.to_dict()["r"], "alpha": prm.alpha, "d": prm.d})
    out.update(extra)
    return out


def _require_algebra(prm: BeurlingParams, allow_r1_zero=False):
    if prm.r == 1 and allow_r1_zero:
        return
    if not prm.excess > 0:
        raise ValueError(f"need alpha > d(1 - 1/r); got alpha={prm.alpha}, d={prm.d}, r={prm.r}")


def truncation_error_check(A: LocalizedMatrix, prm: BeurlingParams, K: int) -> VerificationReport:
    """Compare the truncation error in the summable norm with its bound."""
    _require_algebra(prm, allow_r1_zero=True)
    lhs = beurling_norm(A - truncate(A, K), prm.with_(r=1, alpha=0.0))
    C0 = truncation_constant(prm)
    rhs = C0 * beurling_norm(A, prm) * K ** (-prm.excess)
    return inequality_report("truncation_error", "band truncation error", _inst(A, prm, K=K),
                             lhs, rhs, extracted=lhs / (beurling_norm(A, prm) * K ** (-prm.excess) or 1),
                             detail={"C0": C0})


def product_inequality_check(A: LocalizedMatrix, B: LocalizedMatrix, prm: BeurlingParams,
                             density: float, which: str = "algebra") -> VerificationReport:
    """Submultiplicativity or embedding inequality on an actual product.

    ``which`` is ``"b10"`` (summable class), ``"algebra"`` (general ``r``,
    ``alpha``) or ``"embedding"`` (summable norm against the ``(r, alpha)`` norm,
    applied to ``A``).
    """
    base = prm.with_(r=1, alpha=0.0)
    if which == "b10":
        K = product_constant(prm.d, density)
        lhs = beurling_norm(A @ B, base)
        prod = beurling_norm(A, base) * beurling_norm(B, base)
        label = "product bound, summable class"
    elif which == "algebra":
        _require_algebra(prm)
        K = algebra_constant(prm, density)
        lhs = beurling_norm(A @ B, prm)
        prod = beurling_norm(A, prm) * beurling_norm(B, prm)
        label = "product bound, Beurling class"
    elif which == "embedding":
        _require_algebra(prm)
        K = embedding_factor(prm)
        lhs = beurling_norm(A, base)
        prod = beurling_norm(A, prm)
        label = "embedding into summable class"
    else:
        raise ValueError(f"unknown inequality {which!r}")
    return inequality_report(f"product_{which}", label, _inst(A, prm, other=B.label),
                             lhs, K * prod, extracted=(lhs / prod if prod > 0 else 0.0),
                             detail={"constant": K, "density": density})


def restriction_check(A: LocalizedMatrix, vn: DisjointSet, prm: BeurlingParams,
                      stats: GrowthStats) -> VerificationReport:
    sd = stats.strong_dimension
    B = restrict_to_fusion(A, vn)
    lhs = fusion_norm(B, prm.r, prm.alpha - (sd - prm.d) * prm.inv_r, sd)
    rhs = beurling_norm(A, prm)
    return inequality_report("restriction", "restriction to fusion set", _inst(A, prm, N=vn.N),
                             lhs, rhs, extracted=(lhs / rhs if rhs > 0 else 0.0))


def lift_check(B: FusionMatrix, prm: BeurlingParams, stats: GrowthStats) -> VerificationReport:
    """Norm of the lifted matrix against the fusion norm of ``B``."""
    vn = B.vn
    sd = stats.strong_dimension
    A = lift_from_fusion(B)
    lhs = beurling_norm(A, prm.with_(alpha=prm.alpha + (sd - prm.d) * prm.inv_r))
    K = lift_constant(prm.r, prm.alpha, sd, stats.doubling_constant, vn.N)
    bn = fusion_norm(B, prm.r, prm.alpha, sd)
    return inequality_report("lift", "lift from fusion set",
                             {"graph": vn.graph.label(), "matrix": B.label, "r": prm.to_dict()["r"],
                              "alpha": prm.alpha, "d": prm.d, "N": vn.N},
                             lhs, K * bn, extracted=(lhs / (bn * vn.N ** (prm.alpha + sd * prm.inv_r))
                                                     if bn > 0 else 0.0),
                             detail={"constant": K})


def s_matrix_check(A: LocalizedMatrix, vn: DisjointSet, prm: BeurlingParams,
                   stats: GrowthStats) -> VerificationReport:
    _require_algebra(prm)
    sd = stats.strong_dimension
    S = s_matrix(A, vn, prm.d)
    lhs = fusion_norm(S, prm.r, prm.alpha - (sd - prm.d) * prm.inv_r, sd)
    an = beurling_norm(A, prm)
    decay = s_decay(prm, vn.N)
    K = s_constant(prm)
    return inequality_report("s_matrix", "fusion commutator matrix bound", _inst(A, prm, N=vn.N),
                             lhs, K * an * decay, extracted=(lhs / (an * decay) if an > 0 else 0.0),
                             detail={"constant": K, "critical": is_critical(prm),
                                     "near_only": bool(vn.member_dist.max() <= 12 * (vn.N + 1))})


def fusion_product_inequality_check(A: FusionMatrix, B: FusionMatrix, r: float, alpha: float,
                                    stats: GrowthStats, which: str = "algebra") -> VerificationReport:
    """Product and embedding inequalities for fusion-set norms."""
    vn = A.vn
    sd = stats.strong_dimension
    sD = fusion_strong_density(stats, vn)
    inv_conj = 1 - (0.0 if math.isinf(r) else 1.0 / r)
    if which != "b10" and not alpha - sd * inv_conj > 0:
        raise ValueError("need alpha > strong_d (1 - 1/r) for the fusion algebra")
    if which == "b10":
        K = fusion_product_constant(sd, sD)
        lhs = fusion_norm(A @ B, 1, 0.0, sd)
        prod = fusion_norm(A, 1, 0.0, sd) * fusion_norm(B, 1, 0.0, sd)
        label = "fusion product bound, summable class"
    elif which == "algebra":
        K = fusion_algebra_constant(r, alpha, sd, sD)
        lhs = fusion_norm(A @ B, r, alpha, sd)
        prod = fusion_norm(A, r, alpha, sd) * fusion_norm(B, r, alpha, sd)
        label = "fusion product bound, Beurling class"
    elif which == "embedding":
        K = _ratio_factor(alpha, sd, inv_conj)
        lhs = fusion_norm(A, 1, 0.0, sd)
        prod = fusion_norm(A, r, alpha, sd)
        label = "fusion embedding into summable class"
    else:
        raise ValueError(f"unknown inequality {which!r}")
    inst = {"graph": vn.graph.label(), "matrix": A.label, "other": B.label,
            "r": "inf" if math.isinf(r) else r, "alpha": alpha, "N": vn.N}
    return inequality_report(f"fusion_{which}", label, inst, lhs, K * prod,
                             extracted=(lhs / prod if prod > 0 else 0.0),
                             detail={"constant": K, "strong_density": sD})


def weighted_boundedness_check(A: LocalizedMatrix, p: float, w, stats: GrowthStats, *,
                               n_vectors: int = 500, seed: int = 0) -> VerificationReport:
    """Weighted operator norm against the summable Beurling norm.

    For ``p`` in {1, 2} the exact weighted norm is compared; otherwise the
    interpolation upper bound, and random vectors plus the Boyd lower bound
    are recorded as well.
    """
    from .weights import ap_bound, weighted_norm

    Ap = ap_bound(w, p).bound
    b10 = beurling_norm(A, BeurlingParams(1, 0.0, stats.dimension))
    K = 2.0 ** (3 * stats.dimension) * stats.density * Ap ** (1 / p)
    rhs = K * b10
    est = operator_norm(A, p, w, seed=seed)
    detail = {"A_p": Ap, "opnorm_lower": est.lower, "opnorm_upper": est.upper, "method": est.method}
    if not est.exact:
        rng = np.random.default_rng(seed)
        C = rng.standard_normal((A.n, n_vectors))
        AC = A.entries @ C
        ratios = [weighted_norm(AC[:, i], p, w) / weighted_norm(C[:, i], p, w) for i in range(n_vectors)]
        detail["random_max"] = max(ratios)
        detail["n_vectors"] = n_vectors
    inst = _inst(A, None, p=p, w=w.label())
    return inequality_report("weighted_boundedness", "weighted boundedness of summable class", inst,
                             est.upper, rhs, extracted=(est.upper / (Ap ** (1 / p) * b10) if b10 > 0 else 0.0),
                             seed=seed, detail=detail)
