"""Operator norms on weighted sequence spaces and lower stability bounds.

The norm of ``A`` on ``l^p_w`` equals the ``p -> p`` norm of the conjugated
matrix ``D^(1/p) A D^(-1/p)`` with ``D = diag(w)``. That norm is exact for
``p = 1`` (largest column sum) and ``p = 2`` (largest singular value). For
other ``p`` an interval is returned: Boyd's power method gives a lower bound
and Riesz-Thorin interpolation between exact endpoints gives an upper bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import svds

DENSE_SVD_MAX = 2048
BOYD_RESTARTS = 50
BOYD_MAXITER = 200
SINGULAR_RCOND = 1e-15

__all__ = [
    "SingularMatrixError",
    "StabilityEstimate",
    "beta",
    "boyd_lower",
    "conjugate",
    "inverse_of",
    "matrix_p_norm",
    "operator_norm",
]


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message, condition=math.inf):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class StabilityEstimate:
    """An interval ``[lower, upper]`` for an operator norm or stability bound."""

    p: float
    weight_id: str
    lower: float
    upper: float
    method: str

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper * (1 + 1e-12):
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")

    @property
    def exact(self) -> bool:
        return self.method in ("exact_p1", "exact_p2") or self.lower == self.upper

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self):
        return {"p": self.p, "weight": self.weight_id, "lower": self.lower,
                "upper": self.upper, "method": self.method}


def _as_array(A):
    return np.asarray(getattr(A, "entries", A), dtype=float)


def conjugate(A, p: float, w=None) -> np.ndarray:
    """``D^(1/p) A D^(-1/p)`` for the diagonal weight ``D``."""
    M = _as_array(A)
    if w is None or getattr(w, "is_trivial", False):
        return M
    vals = np.asarray(getattr(w, "values", w), dtype=float)
    s = (vals / np.exp(np.mean(np.log(vals)))) ** (1.0 / p)
    return (s[:, None] * M) / s[None, :]


def _norm1(B):
    return float(np.abs(B).sum(axis=0).max())


def _norminf(B):
    return float(np.abs(B).sum(axis=1).max())


def _norm2(B):
    n = B.shape[0]
    if n <= DENSE_SVD_MAX:
        return float(np.linalg.norm(B, 2))
    # deterministic start vector for ARPACK
    v0 = np.ones(min(B.shape)) / math.sqrt(min(B.shape))
    s = svds(B, k=1, which="LM", return_singular_vectors=False, tol=0, v0=v0)
    return float(s[0])


def _dual(y, p):
    """Dual direction of ``y`` in l^p, normalized in l^(p')."""
    ay = np.abs(y)
    scale = ay.max(axis=0)
    scale[scale == 0] = 1.0
    t = (ay / scale) ** (p - 1)
    out = np.sign(y) * t
    # normalize so that the l^(p') norm of the dual vector is 1
    q = p / (p - 1)
    nrm = (np.sum(np.abs(out) ** q, axis=0)) ** (1 / q)
    nrm[nrm == 0] = 1.0
    return out / nrm


def _pnorm_cols(X, p):
    scale = np.abs(X).max(axis=0)
    safe = np.where(scale == 0, 1.0, scale)
    return scale * (np.sum((np.abs(X) / safe) ** p, axis=0)) ** (1 / p)


def boyd_lower(B: np.ndarray, p: float, *, restarts=BOYD_RESTARTS, seed=0,
               maxiter=BOYD_MAXITER, tol=1e-13) -> float:
    """Lower bound on ``||B||_p`` by Boyd's power method over many starts.

    Each start vector is iterated ``x <- dual_{p'}(B^T dual_p(B x))``; every
    iterate is a feasible vector, so the best ratio seen is a lower bound.
    """
    n = B.shape[1]
    q = p / (p - 1)
    rng = np.random.default_rng(seed)
    starts = [np.ones(n)]
    j = int(np.argmax(np.abs(B).sum(axis=0)))
    e = np.zeros(n)
    e[j] = 1.0
    starts.append(e)
    i = int(np.argmax(np.abs(B).sum(axis=1)))
    starts.append(np.sign(B[i]) + (B[i] == 0))
    alt = np.ones(n)
    alt[1::2] = -1
    starts.append(alt)
    while len(starts) < restarts:
        starts.append(rng.standard_normal(n))
    X = np.stack(starts[:restarts], axis=1)
    X /= _pnorm_cols(X, p)
    best = 0.0
    prev = np.zeros(X.shape[1])
    for _ in range(maxiter):
        Y = B @ X
        est = _pnorm_cols(Y, p)
        best = max(best, float(est.max()))
        Z = B.T @ _dual(Y, p)
        if np.all(np.abs(est - prev) <= tol * np.maximum(est, 1e-300)):
            break
        prev = est
        # dual_{p'}(Z) normalized in l^p
        X = _dual(Z, q)
        X /= _pnorm_cols(X, p)
    return best


def matrix_p_norm(B: np.ndarray, p: float, *, seed=0) -> tuple[float, float, str]:
    """Interval for ``||B||_{p->p}`` with the method used."""
    if p < 1 or math.isinf(p):
        raise ValueError("p must lie in [1, inf)")
    if p == 1:
        v = _norm1(B)
        return v, v, "exact_p1"
    if p == 2:
        v = _norm2(B)
        return v, v, "exact_p2"
    n1, ninf, n2 = _norm1(B), _norminf(B), _norm2(B)
    upper = n1 ** (1 / p) * ninf ** (1 - 1 / p)
    if p < 2:
        t = 2 * (1 - 1 / p)
        upper = min(upper, n1 ** (1 - t) * n2 ** t)
    else:
        t = 1 - 2 / p
        upper = min(upper, n2 ** (1 - t) * ninf ** t)
    lower = boyd_lower(B, p, seed=seed)
    # the Boyd iterate is a genuine vector, the interpolation bound is a theorem;
    # any crossing is rounding
    lower = min(lower, upper)
    return lower, upper, "boyd_plus_interp"


def operator_norm(A, p: float, w=None, *, seed=0) -> StabilityEstimate:
    """Norm of ``A`` acting on ``l^p_w`` as an interval."""
    lo, hi, method = matrix_p_norm(conjugate(A, p, w), p, seed=seed)
    wid = "w0" if w is None else w.label()
    return StabilityEstimate(float(p), wid, lo, hi, method)


def inverse_of(A, *, max_condition=None) -> tuple[np.ndarray, float]:
    """Dense inverse and a 1-norm condition estimate.

    Raises :class:`SingularMatrixError` when the matrix is numerically
    singular or its condition estimate exceeds ``max_condition``.
    """
    M = _as_array(A)
    lu, piv, info = sla.lapack.dgetrf(M)
    if info > 0:
        raise SingularMatrixError("matrix is singular", math.inf)
    anorm = _norm1(M)
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    if rcond < SINGULAR_RCOND:
        raise SingularMatrixError(f"matrix is numerically singular (rcond={rcond:.3g})",
                                  math.inf if rcond == 0 else 1 / rcond)
    cond = 1 / rcond
    if max_condition is not None and cond > max_condition:
        raise SingularMatrixError(f"condition estimate {cond:.3g} exceeds {max_condition:.3g}", cond)
    inv, info = sla.lapack.dgetri(lu, piv)
    if info != 0:
        raise SingularMatrixError("inversion failed", cond)
    return inv, cond


def beta(A, p: float, w=None, *, seed=0) -> StabilityEstimate:
    """Optimal lower stability bound as the reciprocal inverse norm.

    Singular matrices get the interval ``[0, 0]``.
    """
    wid = "w0" if w is None else w.label()
    inv = getattr(A, "inverse", None)
    try:
        Ainv = inv() if callable(inv) else inverse_of(A)[0]
    except SingularMatrixError:
        return StabilityEstimate(float(p), wid, 0.0, 0.0, "singular")
    est = operator_norm(Ainv, p, w, seed=seed)
    return StabilityEstimate(float(p), wid, 1.0 / est.upper, 1.0 / est.lower, est.method)
