"""Weighted stability: truncation operators, the localization chain and
the comparison of stability bounds across exponents and weights.

The chain runs on one *problem*: a matrix, an exponent ``p``, a weight and
Beurling parameters. For an integer ``N`` it builds a maximal disjoint set,
the smooth truncations ``Psi`` of width ``2N`` around each fusion vertex, the
fusion matrix ``S``, its Neumann-type series ``W`` and the lift ``H``. The
unspecified absolute constants are extracted from the data: ``C2`` from the
localized stability estimate, ``C3`` from powers of ``S``, ``C4``/``C5`` from
the bounds on ``H``.

Every place that needs the stability bound uses the lower end of its
certified interval, which is itself a valid lower stability bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .beurling import (
    BeurlingParams,
    FusionMatrix,
    LocalizedMatrix,
    beurling_norm,
    fusion_norm,
    is_critical,
    lift_from_fusion,
    s_decay,
    s_matrix,
    truncation_constant,
)
from .graph import DisjointSet, GrowthStats, maximal_disjoint_set
from .opnorm import StabilityEstimate, beta, operator_norm
from .report import (
    PRECONDITION,
    PreconditionError,
    VerificationReport,
    inequality_report,
    ratio_slack,
    skipped_report,
)
from .weights import Weight, ap_bound

__all__ = [
    "ChainResult",
    "Problem",
    "StabilityEstimate",
    "TruncationOperator",
    "admissible_n",
    "beta",
    "cached_beta",
    "commutator",
    "default_batch",
    "domination_check",
    "h_matrix",
    "lemma32_check",
    "norm_power_constant",
    "operator_norm",
    "psi0",
    "recipe_n",
    "run_chain",
    "sharp_truncation",
    "smooth_partition",
    "smooth_truncation",
    "theorem31_verify",
    "w_series",
]

MAX_TERMS = 64
TERM_RTOL = 1e-12
N_GROWTH = 1.25
N_CAP = 10 ** 12


def psi0(t):
    """Trapezoid: 1 on ``|t| <= 1``, 0 on ``|t| >= 3/2``, linear between."""
    return np.maximum(0.0, np.minimum(1.0, 3.0 - 2.0 * np.abs(t)))


@dataclass(frozen=True)
class TruncationOperator:
    """Diagonal localization around ``center`` at scale ``radius``."""

    center: int
    radius: int
    kind: str
    diagonal: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)

    def apply(self, c):
        return self.diagonal * np.asarray(c, float)


def sharp_truncation(g, center: int, radius: int) -> TruncationOperator:
    return TruncationOperator(center, radius, "sharp", (g.dist[center] <= radius).astype(float))


def smooth_truncation(g, center: int, radius: int) -> TruncationOperator:
    if radius < 1:
        raise ValueError("smooth truncation needs radius >= 1")
    return TruncationOperator(center, radius, "smooth", psi0(g.dist[center] / radius))


def _psi_rows(vn: DisjointSet, radius: int) -> np.ndarray:
    """Rows ``psi0(dist(v_m, .)/radius)`` for every fusion vertex."""
    return psi0(vn.graph.dist[vn.members] / radius)


def smooth_partition(vn: DisjointSet) -> np.ndarray:
    """Diagonal of the inverse of the summed smooth truncations of width ``2N``."""
    if vn.N < 1:
        raise ValueError("smooth partition needs N >= 1")
    total = _psi_rows(vn, 2 * vn.N).sum(axis=0)
    assert np.all(total > 0), "smooth truncations fail to cover the graph"
    return 1.0 / total


def commutator(psi: TruncationOperator, A: LocalizedMatrix) -> LocalizedMatrix:
    """``Psi A - A Psi``; entry ``(i, j)`` is ``(psi_i - psi_j) a_ij``."""
    d = psi.diagonal
    return LocalizedMatrix((d[:, None] - d[None, :]) * A.entries, A.graph,
                           f"[Psi{psi.center},{A.label}]")


# ---------------------------------------------------------------------------
# problem container


def cached_beta(A: LocalizedMatrix, p: float, w: Weight, seed: int = 0) -> StabilityEstimate:
    """Stability bound memoized on the matrix object."""
    cache = A.__dict__.setdefault("_beta_cache", {})
    key = (float(p), w.label(), id(w.graph), seed)
    if key not in cache:
        cache[key] = beta(A, p, w, seed=seed)
    return cache[key]


@dataclass(eq=False)
class Problem:
    """One stability instance: matrix, exponent, weight and Beurling exponents."""

    A: LocalizedMatrix
    p: float
    w: Weight
    prm: BeurlingParams
    stats: GrowthStats
    seed: int = 0

    @cached_property
    def Ap(self) -> float:
        return ap_bound(self.w, self.p).bound

    @cached_property
    def beta(self) -> StabilityEstimate:
        return cached_beta(self.A, self.p, self.w, self.seed)

    @cached_property
    def inverse_norm(self) -> StabilityEstimate:
        b = self.beta
        return StabilityEstimate(b.p, b.weight_id, 1 / b.upper, 1 / b.lower, b.method)

    @cached_property
    def norm(self) -> float:
        return beurling_norm(self.A, self.prm)

    @cached_property
    def c1(self) -> float:
        return 2.0 ** (3 * self.prm.d) * truncation_constant(self.prm) * self.stats.density

    @property
    def sd(self) -> float:
        return self.stats.strong_dimension

    @property
    def fusion_alpha(self) -> float:
        return self.prm.alpha - (self.sd - self.prm.d) * self.prm.inv_r

    def instance(self, **extra) -> dict:
        out = {"graph": self.A.graph.label(), "matrix": self.A.label, "p": self.p,
               "w": self.w.label(), "r": self.prm.to_dict()["r"], "alpha": self.prm.alpha,
               "d": self.prm.d}
        out.update(extra)
        return out

    def minimal_n(self) -> int:
        """Smallest ``N`` with ``2 C1 A_p^(1/p) |A| N^(-(alpha - d/r')) <= beta``."""
        b = self.beta.lower
        if b <= 0:
            raise PreconditionError("matrix is not stable (beta = 0)")
        ex = self.prm.excess
        if ex <= 0:
            raise PreconditionError("need alpha > d(1 - 1/r) for the localization estimate")
        x = 2 * self.c1 * self.Ap ** (1 / self.p) * self.norm / b
        n = max(1, math.ceil(x ** (1 / ex) - 1e-9))
        while 2 * self.c1 * self.Ap ** (1 / self.p) * self.norm * n ** (-ex) > b * (1 + 1e-12):
            n += 1
        return n


def default_batch(A: LocalizedMatrix, seed: int, size: int = 200) -> np.ndarray:
    """Half Gaussian vectors, half preimages ``A^{-1} g`` of Gaussian vectors."""
    rng = np.random.default_rng(seed)
    k = size // 2
    G = rng.standard_normal((A.n, size - k))
    X = rng.standard_normal((A.n, k))
    try:
        pre = A.inverse() @ X
    except np.linalg.LinAlgError:
        pre = rng.standard_normal((A.n, k))
    return np.concatenate([G, pre], axis=1)


def _scaled_local_norms(rows_p, C, p, w_vals, mass):
    """``mass_m^(-1/p) || Psi_m c ||_{p,w}`` for every fusion vertex and column."""
    scale = np.abs(C).max(axis=0)
    scale = np.where(scale == 0, 1.0, scale)
    body = rows_p @ ((np.abs(C) / scale) ** p * w_vals[:, None])
    return (body / mass[:, None]) ** (1 / p) * scale


# ---------------------------------------------------------------------------
# localized stability estimate


def lemma32_check(prob: Problem, vn: DisjointSet, batch: np.ndarray | None = None, *,
                  strict: bool = True) -> VerificationReport:
    """Localized lower stability estimate on every fusion vertex.

    For each fusion vertex ``m`` and vector ``c`` compares
    ``beta * u_m(c)`` with ``2 u_m(Ac) + C2 A_p^(2/p) sum_k S[m, k] u_k(c)``
    where ``u_m(c) = w(B(v_m, 4N))^(-1/p) ||Psi_m c||_{p,w}``, and extracts
    the smallest admissible ``C2 >= 2``.

    With ``strict`` the size condition on ``N`` is enforced; otherwise the
    constant is still extracted and the report carries status
    ``precondition``.
    """
    N = vn.N
    if N < 1:
        raise ValueError("need N >= 1")
    nmin = prob.minimal_n()
    inst = prob.instance(N=N, fusion_vertices=len(vn))
    if N < nmin and strict:
        raise PreconditionError(f"N={N} is below the smallest admissible N={nmin}", nmin)
    if batch is None:
        batch = default_batch(prob.A, prob.seed)
    c2, lhs, rhs, worst = _extract_c2(prob, vn, batch)
    ok = math.isfinite(c2)
    status = "pass" if ok else "fail"
    if N < nmin:
        status = PRECONDITION
    return VerificationReport("localized_stability", "localized lower stability estimate", inst,
                              lhs, rhs, ratio_slack(lhs, rhs), c2, ok and N >= nmin, prob.seed,
                              status, {"minimal_N": nmin, "batch": int(batch.shape[1]),
                                       "worst": worst, "beta_lower": prob.beta.lower})


def _extract_c2(prob: Problem, vn: DisjointSet, batch):
    g = prob.A.graph
    N = vn.N
    p = prob.p
    rows_p = _psi_rows(vn, 2 * N) ** p
    mass = prob.w.ball_mass[vn.members, min(4 * N, g.diam)]
    u = _scaled_local_norms(rows_p, batch, p, prob.w.values, mass)
    v = _scaled_local_norms(rows_p, prob.A.entries @ batch, p, prob.w.values, mass)
    S = s_matrix(prob.A, vn, prob.prm.d).entries
    lhs = prob.beta.lower * u
    t1 = 2 * v
    t2 = prob.Ap ** (2 / p) * (S @ u)
    excess = lhs - t1
    need = excess > 1e-12 * np.maximum(lhs, 1e-300)
    if np.any(need & (t2 <= 0)):
        return math.inf, float(np.max(lhs)), float(np.max(t1)), None
    c2 = 2.0
    if need.any():
        c2 = max(2.0, float(np.max(excess[need] / t2[need])))
    rhs = t1 + c2 * t2
    q = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), 0)
    m, j = np.unravel_index(int(np.argmax(q)), q.shape)
    return c2, float(lhs[m, j]), float(rhs[m, j]), [int(vn.members[m]), int(j)]


def norm_power_constant(prob: Problem, vn: DisjointSet, S: FusionMatrix | None = None,
                        max_power: int = MAX_TERMS) -> float:
    """Smallest ``C3`` with ``||S^l|| <= (C3 |A| decay(N))^l`` for ``l <= max_power``."""
    S = S or s_matrix(prob.A, vn, prob.prm.d)
    base = prob.norm * s_decay(prob.prm, vn.N)
    if base <= 0:
        return 0.0
    M = S.entries / base
    Q = np.eye(len(vn))
    log_scale = 0.0
    best = 0.0
    for l in range(1, max_power + 1):
        Q = Q @ M
        nrm = fusion_norm(FusionMatrix(Q, vn), prob.prm.r, prob.fusion_alpha, prob.sd)
        if nrm == 0:
            break
        # keep the running power normalized and carry its size in log form
        log_scale += math.log(nrm)
        Q = Q / nrm
        best = max(best, math.exp(log_scale / l))
    return best


def w_series(prob: Problem, vn: DisjointSet, c2: float, *, max_terms: int = MAX_TERMS):
    """``W = 2I + 2 sum_l (theta S)^l`` with ``theta = C2 A_p^(2/p) / beta``.

    Partial sums stop when a term's fusion norm falls below ``1e-12`` relative
    to the sum or after ``max_terms`` terms. A term ratio above 0.95 means the
    series does not contract and raises :class:`PreconditionError`.

    Returns ``(W, info)``.
    """
    S = s_matrix(prob.A, vn, prob.prm.d)
    theta = c2 * prob.Ap ** (2 / prob.p) / prob.beta.lower
    T = theta * S.entries
    m = len(vn)
    W = 2 * np.eye(m)
    term = np.eye(m)
    norms = []
    fa, sd, r = prob.fusion_alpha, prob.sd, prob.prm.r
    for l in range(1, max_terms + 1):
        term = term @ T
        tn = fusion_norm(FusionMatrix(2 * term, vn), r, fa, sd)
        norms.append(tn)
        W = W + 2 * term
        if l >= 2 and norms[-2] > 0 and tn / norms[-2] > 0.95:
            raise PreconditionError(f"series does not contract (term ratio {tn / norms[-2]:.3f})")
        wn = fusion_norm(FusionMatrix(W, vn), r, fa, sd)
        if tn <= TERM_RTOL * wn:
            break
    Wm = FusionMatrix(W, vn, f"W[{prob.A.label},N={vn.N}]")
    return Wm, {"terms": len(norms), "theta": theta, "last_term": norms[-1] if norms else 0.0,
                "norm": fusion_norm(Wm, r, fa, sd)}


def h_matrix(W: FusionMatrix) -> LocalizedMatrix:
    """Lift of ``W`` to the graph (inner members within ``2N`` and ``4N``)."""
    H = lift_from_fusion(W)
    H.label = W.label.replace("W", "H", 1)
    return H


def domination_check(prob: Problem, H: LocalizedMatrix, N: int, batch=None) -> VerificationReport:
    """Pointwise domination ``|c| <= C5 A_p^(1/p) beta^(-1) N^d H |Ac|``."""
    if batch is None:
        batch = default_batch(prob.A, prob.seed)
    b = prob.beta.lower
    pref = prob.Ap ** (1 / prob.p) / b * float(N) ** prob.prm.d
    lhs = np.abs(batch)
    rhs = pref * (H.entries @ np.abs(prob.A.entries @ batch))
    pos = lhs > 0
    if np.any(pos & (rhs <= 0)):
        c5 = math.inf
    else:
        c5 = float(np.max(lhs[pos] / rhs[pos])) if pos.any() else 0.0
    ok = math.isfinite(c5)
    return VerificationReport("domination", "pointwise domination by the lifted series", prob.instance(N=N),
                              float(lhs.max()), float(rhs.max()), math.nan, c5, ok, prob.seed,
                              "pass" if ok else "fail", {"batch": int(batch.shape[1])})


# ---------------------------------------------------------------------------
# admissible N and the full chain


@dataclass
class ChainResult:
    N: int
    vn: DisjointSet
    c2: float
    c3: float
    condition_lhs: float
    condition_rhs: float
    scanned: list = field(default_factory=list)


def condition_rhs(prob: Problem, N: int, c2: float, c3: float) -> float:
    """Right side of the contraction condition on ``N`` (to be at most beta)."""
    return 2 * max(prob.c1, c2 * c3) * prob.Ap ** (2 / prob.p) * prob.norm * s_decay(prob.prm, N)


def admissible_n(prob: Problem, *, start: int | None = None, batch=None, n_cap: int = N_CAP) -> ChainResult:
    """Smallest ``N`` on a geometric ladder satisfying the contraction condition.

    Starts at the size condition of the localized estimate and grows ``N``
    by 25% until ``beta >= 2 max(C1, C2 C3) A_p^(2/p) |A| decay(N)``, where
    ``C2`` and ``C3`` are extracted at each ``N``.
    """
    if batch is None:
        batch = default_batch(prob.A, prob.seed)
    N = max(prob.minimal_n(), start or 1)
    scanned = []
    b = prob.beta.lower
    g = prob.A.graph
    vn = None
    while N <= n_cap:
        if vn is not None and len(vn) == 1:
            # a single fusion vertex stays single as N grows
            vn = DisjointSet(N, vn.members, g)
        else:
            vn = maximal_disjoint_set(g, N, start=0)
        c2 = _extract_c2(prob, vn, batch)[0]
        c3 = norm_power_constant(prob, vn)
        rhs = condition_rhs(prob, N, c2, c3)
        scanned.append((N, len(vn), c2, c3, rhs))
        if rhs <= b:
            return ChainResult(N, vn, c2, c3, b, rhs, scanned)
        N = max(N + 1, math.ceil(N * N_GROWTH))
    raise PreconditionError(f"no admissible N up to {n_cap}")


def recipe_n(prob: Problem, c2: float, c3: float, inverse_norm: float | None = None) -> int:
    """The explicit ``N`` recipe evaluated with the extracted constants."""
    b = 1.0 / inverse_norm if inverse_norm is not None else prob.beta.lower
    x = 2 * max(prob.c1, c2 * c3) * prob.Ap ** (2 / prob.p) * prob.norm / b
    base = math.floor(x ** (1 / min(1.0, prob.prm.excess))) + 2
    if is_critical(prob.prm):
        return int(math.floor(2 * base * math.log(base + 1) ** prob.prm.inv_conj))
    return int(base)


def run_chain(prob: Problem, batch=None) -> dict:
    """Run the whole construction at an admissible ``N``; returns reports and objects."""
    if batch is None:
        batch = default_batch(prob.A, prob.seed)
    ch = admissible_n(prob, batch=batch)
    vn = ch.vn
    out = {"chain": ch}
    out["localized"] = lemma32_check(prob, vn, batch)
    W, info = w_series(prob, vn, ch.c2)
    out["W"], out["W_info"] = W, info
    wn = info["norm"]
    out["w_norm"] = inequality_report("series_norm", "fusion norm of the contracting series",
                                      prob.instance(N=vn.N, fusion_vertices=len(vn)), wn, 4.0,
                                      extracted=wn, seed=prob.seed, rtol=1e-9 / 4,
                                      detail={k: v for k, v in info.items() if k != "norm"})
    H = h_matrix(W)
    out["H"] = H
    hn = beurling_norm(H, prob.prm)
    c4 = hn / float(vn.N) ** (prob.prm.alpha + prob.prm.d * prob.prm.inv_r)
    c4_bound = 4 * 8.0 ** (prob.prm.alpha + prob.prm.d * prob.prm.inv_r) * prob.stats.doubling_constant ** 7
    out["h_norm"] = inequality_report("lift_norm", "Beurling norm of the lifted series",
                                      prob.instance(N=vn.N), c4, c4_bound, extracted=c4, seed=prob.seed)
    out["domination"] = domination_check(prob, H, vn.N, batch)
    return out


# ---------------------------------------------------------------------------
# comparison of stability bounds


def _exponent(prm: BeurlingParams, sd: float) -> float:
    return (sd + prm.d + 1) / min(1.0, prm.excess)


def theorem31_verify(A: LocalizedMatrix, p: float, w: Weight, q: float, w2: Weight,
                     prm: BeurlingParams, stats: GrowthStats, *, seed: int = 0,
                     chain: ChainResult | None = None) -> VerificationReport:
    """Ratio of stability bounds against its polynomial control.

    ``lhs = beta_{p,w} / beta_{q,w2}`` (upper end), ``rhs`` is the bound
    without its absolute constant evaluated at the lower end, and the
    extracted constant is ``lhs / rhs``.
    """
    sd = stats.strong_dimension
    inst = {"graph": A.graph.label(), "matrix": A.label, "p": p, "w": w.label(), "q": q,
            "w2": w2.label(), "r": prm.to_dict()["r"], "alpha": prm.alpha, "d": prm.d}
    label = "polynomial control of stability bounds"
    if not prm.alpha > sd - prm.d * prm.inv_r:
        raise ValueError("need alpha > strong_d - d/r")
    bp = cached_beta(A, p, w, seed)
    bq = cached_beta(A, q, w2, seed)
    if bp.upper == 0 or bq.upper == 0:
        return skipped_report("theorem_stability", label, inst, "singular matrix: beta = 0", seed=seed)
    Ap = ap_bound(w, p).bound
    Aq = ap_bound(w2, q).bound
    nrm = beurling_norm(A, prm)
    lhs = bp.upper / bq.lower
    X = Ap ** (2 / p) * nrm / bp.upper
    E = _exponent(prm, sd)
    rhs = Aq ** (1 / q) * Ap ** (1 / p) * X ** E
    crit = is_critical(prm)
    if crit:
        rhs *= math.log(X + 1) ** ((2 * prm.d + 1) * prm.inv_conj)
    C = lhs / rhs
    detail = {"beta_p": [bp.lower, bp.upper], "beta_q": [bq.lower, bq.upper], "A_p": Ap, "A_q": Aq,
              "norm": nrm, "X": X, "exponent": E, "critical": crit}
    if w.is_trivial and w2.is_trivial:
        detail.update(_bootstrap_column(prm, p, q, nrm, bp.upper, bq.lower))
    if chain is not None:
        prob = Problem(A, p, w, prm, stats, seed)
        detail["N0_recipe"] = recipe_n(prob, chain.c2, chain.c3)
        detail["N_admissible"] = chain.N
    ok = math.isfinite(C) and C > 0
    return VerificationReport("theorem_stability", label, inst, lhs, rhs, ratio_slack(lhs, rhs),
                              C, ok, seed, "pass" if ok else "fail", detail)


def _bootstrap_column(prm, p, q, nrm, bp, bq):
    """Older bootstrap bound for unweighted exponents, as a comparison column."""
    m = min(prm.excess, 1.0)
    K0 = math.floor(prm.d / m) + 1
    gap = prm.d * abs(1 / p - 1 / q)
    if K0 * m - gap <= 0:
        return {}
    th = gap / (K0 * m - gap)
    Y = nrm / bp
    base = Y * math.log1p(Y) if is_critical(prm) else Y
    rhs = base ** ((1 + th) ** K0)
    return {"bootstrap_rhs": rhs, "bootstrap_lhs": nrm / bq, "bootstrap_ratio": (nrm / bq) / rhs,
            "K0": K0}
