"""Norm-controlled inversion and the bidiagonal family on long cycles."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .beurling import BeurlingParams, LocalizedMatrix, beurling_norm, is_critical
from .graph import GrowthStats, build_cycle, fit_growth
from .matrices import kappa_matrix
from .opnorm import SingularMatrixError, StabilityEstimate, operator_norm
from .report import PreconditionError, VerificationReport, ratio_slack
from .stability import (
    ChainResult,
    Problem,
    admissible_n,
    cached_beta,
    h_matrix,
    recipe_n,
    w_series,
)
from .weights import Weight, ap_bound, polynomial_weight, weighted_norm

__all__ = [
    "InversionError",
    "InversionReport",
    "SlopeReport",
    "entrywise_inverse_check",
    "example43_asymptotics",
    "example43_sweep",
    "invert",
    "minimal_cycle_length",
    "theorem41_verify",
]

MAX_CONDITION = 1e12
RESIDUAL_TOL = 1e-9
WRAP_TOL = 1e-8


class InversionError(np.linalg.LinAlgError):
    def __init__(self, message, condition=math.inf):
        super().__init__(message)
        self.condition = condition


def invert(A: LocalizedMatrix) -> LocalizedMatrix:
    """Dense inverse with a conditioning guard and a residual check."""
    try:
        inv = A.inverse(max_condition=MAX_CONDITION)
    except SingularMatrixError as exc:
        raise InversionError(str(exc), exc.condition) from None
    if A.condition > MAX_CONDITION:
        raise InversionError(f"condition estimate {A.condition:.3g} exceeds {MAX_CONDITION:.0e}",
                             A.condition)
    res = np.abs(A.entries @ inv - np.eye(A.n)).sum(axis=1).max()
    if res > RESIDUAL_TOL:
        raise InversionError(f"inverse residual {res:.3g} exceeds {RESIDUAL_TOL}", A.condition)
    out = LocalizedMatrix(inv, A.graph, f"inv({A.label})")
    out.residual = float(res)
    return out


@dataclass
class InversionReport:
    """Beurling norm of the inverse against its controlling bound."""

    beurling_norm_of_inverse: float
    rhs_bound: float
    extracted_C: float
    remark42_rhs: float | None = None
    instance: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.extracted_C > 0:
            raise ValueError("extracted constant must be positive")

    def to_report(self, seed=None) -> VerificationReport:
        ok = math.isfinite(self.extracted_C)
        det = dict(self.detail)
        if self.remark42_rhs is not None:
            det["remark_l2_rhs"] = self.remark42_rhs
        return VerificationReport("theorem_inversion", "polynomial norm-controlled inversion",
                                  self.instance, self.beurling_norm_of_inverse, self.rhs_bound,
                                  ratio_slack(self.beurling_norm_of_inverse, self.rhs_bound),
                                  self.extracted_C, ok, seed, "pass" if ok else "fail", det)


def _inversion_rhs(prm: BeurlingParams, Ap: float, p: float, inv_norm: float, norm: float) -> float:
    m = min(prm.excess, 1.0)
    Y = Ap ** (2 / p) * inv_norm * norm
    rhs = Ap ** (1 / p) * inv_norm * Y ** ((prm.alpha + prm.d * (1 + prm.inv_r)) / m)
    if is_critical(prm):
        rhs *= math.log(Y + 1) ** ((2 * prm.d + 1) * prm.inv_conj)
    return rhs


def _remark_rhs(prm: BeurlingParams, inv_norm2: float, norm: float) -> float:
    m = min(prm.excess, 1.0)
    Y = inv_norm2 * norm
    rhs = inv_norm2 * Y ** ((prm.alpha + prm.d * prm.inv_r) / m)
    if is_critical(prm):
        rhs *= math.log(Y + 1) ** ((prm.d + 1) * prm.inv_conj)
    return rhs


def theorem41_verify(A: LocalizedMatrix, p: float, w: Weight, prm: BeurlingParams,
                     stats: GrowthStats, *, seed: int = 0, chain: ChainResult | None = None,
                     Ainv: LocalizedMatrix | None = None) -> InversionReport:
    """Beurling norm of ``A^{-1}`` against the bivariate polynomial bound.

    The bound drops its absolute constant and uses the lower end of the
    weighted operator norm of the inverse, so the extracted constant is an
    upper estimate.
    """
    sd = stats.strong_dimension
    if not prm.alpha > sd - prm.d * prm.inv_r:
        raise ValueError(f"need alpha > strong_d - d/r (alpha={prm.alpha}, strong_d={sd}, d={prm.d})")
    Ainv = Ainv or invert(A)
    lhs = beurling_norm(Ainv, prm)
    b = cached_beta(A, p, w, seed)
    est = StabilityEstimate(b.p, b.weight_id, 1 / b.upper, 1 / b.lower, b.method)
    Ap = ap_bound(w, p).bound
    nrm = beurling_norm(A, prm)
    rhs = _inversion_rhs(prm, Ap, p, est.lower, nrm)
    remark = None
    if p == 2 and w.is_trivial:
        remark = _remark_rhs(prm, est.lower, nrm)
    inst = {"graph": A.graph.label(), "matrix": A.label, "p": p, "w": w.label(),
            "r": prm.to_dict()["r"], "alpha": prm.alpha, "d": prm.d}
    detail = {"opnorm_inverse": [est.lower, est.upper], "A_p": Ap, "norm": nrm,
              "critical": is_critical(prm),
              "exponent": (prm.alpha + prm.d * (1 + prm.inv_r)) / min(prm.excess, 1.0)}
    if chain is not None:
        prob = Problem(A, p, w, prm, stats, seed)
        detail["N1_recipe"] = recipe_n(prob, chain.c2, chain.c3, inverse_norm=est.upper)
        detail["N_admissible"] = chain.N
    return InversionReport(lhs, rhs, lhs / rhs, remark, inst, detail)


def entrywise_inverse_check(prob: Problem, chain: ChainResult | None = None,
                            Ainv: LocalizedMatrix | None = None) -> VerificationReport:
    """Entrywise domination of the inverse by the lifted series.

    ``|A^{-1}(i, j)| <= C A_p^(1/p) ||A^{-1}|| N^d H(i, j)`` with ``H`` built
    at an admissible ``N`` using the reciprocal inverse norm as the
    stability bound; the smallest ``C`` is extracted.
    """
    Ainv = Ainv or invert(prob.A)
    chain = chain or admissible_n(prob)
    W, _ = w_series(prob, chain.vn, chain.c2)
    H = h_matrix(W)
    N = chain.N
    inv_norm = prob.inverse_norm.lower
    scale = prob.Ap ** (1 / prob.p) * inv_norm * float(N) ** prob.prm.d
    lhs = np.abs(Ainv.entries)
    rhs = scale * H.entries
    pos = lhs > 0
    if np.any(pos & (rhs <= 0)):
        C = math.inf
    else:
        C = float(np.max(lhs[pos] / rhs[pos])) if pos.any() else 0.0
    ok = math.isfinite(C)
    return VerificationReport("entrywise_inverse", "entrywise domination of the inverse",
                              prob.instance(N=N), float(lhs.max()), float(rhs.max()), math.nan, C, ok,
                              prob.seed, "pass" if ok else "fail",
                              {"fusion_vertices": len(chain.vn), "inverse_norm_lower": inv_norm})


# ---------------------------------------------------------------------------
# the bidiagonal family on a cycle


def minimal_cycle_length(kappa: float, tol: float = WRAP_TOL) -> int:
    """Smallest ``n`` with ``kappa^n < tol``."""
    return int(math.floor(math.log(tol) / math.log(kappa))) + 1


SLOPE_COLUMNS = ("kappa", "norm_A", "norm_Ainv_beurling", "opnorm_Ainv_pw", "rhs_bound", "extracted_C",
                 "opnorm_Ainv_pw_upper", "witness_c0", "witness_Ainv_c0")


@dataclass
class SlopeReport:
    """Per-kappa quantities and least-squares slopes against ``-log(1 - kappa)``."""

    r: float
    alpha: float
    p: float
    theta: float
    n: int
    rows: list
    slopes: dict
    targets: dict
    bounded_factor: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(SLOPE_COLUMNS)
        for row in self.rows:
            wr.writerow([repr(float(row[c])) for c in SLOPE_COLUMNS])
        return buf.getvalue()

    def slope_errors(self) -> dict:
        return {k: abs(self.slopes[k] - self.targets[k]) for k in self.targets}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["r"] = "inf" if math.isinf(self.r) else self.r
        return out


def _slope(x, y):
    return float(np.polyfit(x, y, 1)[0])


def example43_asymptotics(kappas, r: float = 1.0, alpha: float = 2.0, p: float = 2.0,
                          theta: float = 0.3, n: int = 4096, *, seed: int = 0) -> SlopeReport:
    """Growth of inverse norms of the bidiagonal family as ``kappa -> 1``.

    On the cycle ``C_n`` the matrix has unit diagonal and ``-kappa`` at the
    backward neighbour. For every ``kappa`` the Beurling norms of ``A`` and
    ``A^{-1}``, the weighted operator norm of ``A^{-1}`` (weight
    ``(dist(., 0)+1)^theta``), the inversion bound and the witness vector
    ``c0(i) = kappa^i`` are recorded; slopes are fitted on log-log axes.
    """
    return example43_sweep(kappas, [(r, alpha)], p, theta, n, seed=seed)[0]


def example43_sweep(kappas, params, p: float = 2.0, theta: float = 0.3, n: int = 4096, *,
                    seed: int = 0) -> list[SlopeReport]:
    """Like :func:`example43_asymptotics` for several ``(r, alpha)`` pairs,
    inverting each matrix only once."""
    kappas = [float(k) for k in kappas]
    if len(kappas) < 2:
        raise ValueError("need at least two kappa values for a slope")
    if any(not 0 < k < 1 for k in kappas):
        raise ValueError("kappa values must lie strictly between 0 and 1")
    if not -1 < theta < p - 1:
        raise ValueError(f"theta must satisfy -1 < theta < p - 1 (got theta={theta}, p={p})")
    need = minimal_cycle_length(max(kappas))
    if n < need:
        raise PreconditionError(f"cycle length {n} too short: kappa^n >= {WRAP_TOL:g}; need n >= {need}",
                                need)
    g = build_cycle(n)
    stats = fit_growth(g, n_values=(0,))
    prms = [BeurlingParams(float(r), float(a), stats.dimension) for r, a in params]
    w = polynomial_weight(g, 0, theta)
    Ap = ap_bound(w, p).bound
    rows = [[] for _ in prms]
    i = np.arange(n)
    for k in kappas:
        A = kappa_matrix(g, k)
        Ainv = invert(A)
        est = operator_norm(Ainv, p, w, seed=seed)
        c0 = k ** i
        wc0 = weighted_norm(c0, p, w)
        wic0 = weighted_norm(Ainv.entries @ c0, p, w)
        for prm, out in zip(prms, rows):
            nA = beurling_norm(A, prm)
            nI = beurling_norm(Ainv, prm)
            rhs = _inversion_rhs(prm, Ap, p, est.lower, nA)
            out.append({
                "kappa": k,
                "norm_A": nA,
                "norm_Ainv_beurling": nI,
                "opnorm_Ainv_pw": est.lower,
                "opnorm_Ainv_pw_upper": est.upper,
                "rhs_bound": rhs,
                "extracted_C": nI / rhs,
                "witness_c0": wc0,
                "witness_Ainv_c0": wic0,
            })
        del A, Ainv
    x = -np.log1p(-np.array(kappas))
    reports = []
    for prm, prows in zip(prms, rows):
        slopes = {name: _slope(x, np.log([row[name] for row in prows])) for name in
                  ("norm_Ainv_beurling", "opnorm_Ainv_pw", "witness_c0", "witness_Ainv_c0", "norm_A")}
        targets = {
            "norm_Ainv_beurling": prm.alpha + prm.inv_r,
            "opnorm_Ainv_pw": 1.0,
            "witness_c0": (theta + 1) / p,
            "witness_Ainv_c0": (theta + p + 1) / p,
        }
        norms = [row["norm_A"] for row in prows]
        factor = max(max(norms), 1 / min(norms))
        reports.append(SlopeReport(prm.r, prm.alpha, p, theta, n, prows, slopes, targets, factor))
    return reports
