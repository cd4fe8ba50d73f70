"""Muckenhoupt weights on graph vertex sets."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .graph import Graph, ball_minima, ball_sums, doubling_constant
from .report import VerificationReport, inequality_report

UNDERFLOW = 1e-300

__all__ = [
    "ApReport",
    "Weight",
    "ap_bound",
    "ap_char_ratio",
    "polynomial_weight",
    "trivial_weight",
    "weight_from_spec",
    "weighted_doubling_check",
    "weighted_norm",
]


@dataclass(frozen=True, eq=False)
class Weight:
    """A positive function on the vertices of ``graph``."""

    values: np.ndarray
    graph: Graph
    kind: str = "explicit"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.graph.n,):
            raise ValueError(f"weight has shape {v.shape}, expected ({self.graph.n},)")
        if not np.all(np.isfinite(v)) or np.any(v < UNDERFLOW):
            raise ValueError("weight values must be finite and at least 1e-300")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @cached_property
    def ball_mass(self) -> np.ndarray:
        """``w(B(v, r))`` for all vertices and integer radii."""
        return ball_sums(self.graph, self.values)

    @property
    def is_trivial(self) -> bool:
        return bool(np.all(self.values == 1.0))

    def label(self) -> str:
        if self.kind == "trivial":
            return "w0"
        if self.kind == "polynomial":
            return f"w{self.params['theta']:g}@{self.params['base']}"
        return "w_explicit"

    def to_dict(self) -> dict:
        out = {"graph_hash": self.graph.hash, "kind": self.kind, "params": self.params}
        if self.kind == "explicit":
            out["values"] = self.values.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict, g: Graph) -> Weight:
        if data.get("graph_hash") not in (None, g.hash):
            raise ValueError("weight was saved for a different graph")
        return weight_from_spec({"kind": data["kind"], **data.get("params", {}),
                                 **({"values": data["values"]} if "values" in data else {})}, g)


def trivial_weight(g: Graph) -> Weight:
    return Weight(np.ones(g.n), g, "trivial", {})


def polynomial_weight(g: Graph, base: int | None = None, theta: float = 0.0) -> Weight:
    """``w(v) = (dist(v, base) + 1)^theta``; ``base`` defaults to the graph center."""
    if theta <= -1:
        raise ValueError("polynomial weights need theta > -1")
    if base is None:
        base = g.center
    if not 0 <= base < g.n:
        raise ValueError(f"base vertex {base} not in graph")
    if theta == 0:
        return trivial_weight(g)
    vals = (g.dist[base].astype(float) + 1.0) ** theta
    return Weight(vals, g, "polynomial", {"base": int(base), "theta": float(theta)})


def weight_from_spec(spec: dict, g: Graph) -> Weight:
    kind = spec.get("kind", "trivial")
    if kind == "trivial":
        return trivial_weight(g)
    if kind == "polynomial":
        return polynomial_weight(g, spec.get("base"), float(spec["theta"]))
    if kind == "explicit":
        return Weight(np.asarray(spec["values"], float), g, "explicit", {})
    raise ValueError(f"unknown weight kind {kind!r}")


@dataclass(frozen=True)
class ApReport:
    p: float
    bound: float
    witness_ball: tuple[int, int]


def _ap_table(w: Weight, p: float) -> np.ndarray:
    """Ball-indexed table of the Muckenhoupt quantity."""
    if p < 1:
        raise ValueError("p must be at least 1")
    g = w.graph
    # A_p is invariant under scaling; normalize to keep powers in range
    vals = w.values / np.exp(np.mean(np.log(w.values)))
    size = g.ball_sizes.astype(float)
    avg_w = ball_sums(g, vals) / size
    if p == 1:
        return avg_w / ball_minima(g, vals)
    dual = ball_sums(g, vals ** (-1.0 / (p - 1.0))) / size
    return avg_w * dual ** (p - 1.0)


def ap_bound(w: Weight, p: float) -> ApReport:
    """Exact A_p bound of ``w`` by enumerating every ball.

    For ``p > 1`` this is the largest product of the ball average of ``w``
    and the ``(p-1)``-th power of the ball average of ``w^(-1/(p-1))``; for
    ``p = 1`` the largest ratio of the ball average to the ball minimum.
    """
    key = ("ap", float(p))
    cache = w.__dict__.setdefault("_cache", {})
    if key in cache:
        return cache[key]
    if w.is_trivial:
        rep = ApReport(float(p), 1.0, (0, 0))
    else:
        table = _ap_table(w, p)
        v, r = np.unravel_index(int(np.argmax(table)), table.shape)
        # a single-point ball gives exactly 1, which also absorbs rounding
        rep = ApReport(float(p), float(max(1.0, table[v, r])), (int(v), int(r)))
    cache[key] = rep
    return rep


def ap_char_ratio(w: Weight, p: float, c) -> float:
    """Largest ratio in the vector characterization of the A_p bound.

    Over all balls, ``(avg |c|)^p * avg w`` divided by ``avg |c|^p w``; balls
    where ``c`` vanishes identically are skipped.
    """
    c = np.abs(np.asarray(c, dtype=float))
    if not np.any(c):
        raise ValueError("c must be nonzero")
    g = w.graph
    size = g.ball_sizes.astype(float)
    scale = c.max()
    c = c / scale
    num = (ball_sums(g, c) / size) ** p * (w.ball_mass / size)
    den = ball_sums(g, c ** p * w.values) / size
    ok = den > 0
    return float(np.max(num[ok] / den[ok]))


def weighted_norm(c, p: float, w: Weight | None = None) -> float:
    """``(sum |c|^p w)^(1/p)``."""
    if p < 1:
        raise ValueError("p must be at least 1")
    c = np.abs(np.asarray(c, dtype=float))
    scale = c.max() if c.size else 0.0
    if scale == 0:
        return 0.0
    vals = 1.0 if w is None else w.values
    return float(scale * (np.sum((c / scale) ** p * vals)) ** (1.0 / p))


def weighted_doubling_check(w: Weight, p: float) -> VerificationReport:
    """Check ``w(B(v, 2^j r)) <= D(mu)^(jp) A_p(w) w(B(v, r))`` exhaustively.

    Radii run over half-integers ``r = m/2`` and ``j >= 1`` with
    ``2^j r <= diam``; a ball of real radius equals the ball of its floor.
    """
    g = w.graph
    Dmu = doubling_constant(g)
    Ap = ap_bound(w, p).bound
    mass = w.ball_mass
    worst, worst_at = -np.inf, None
    lhs_w = rhs_w = 0.0
    for m in range(1, 2 * g.diam + 1):
        r = m / 2
        j = 1
        while (2 ** j) * r <= g.diam:
            big = mass[:, int(math.floor((2 ** j) * r))]
            small = mass[:, int(math.floor(r))]
            bound = Dmu ** (j * p) * Ap * small
            q = big / bound
            i = int(np.argmax(q))
            if q[i] > worst:
                worst, worst_at = float(q[i]), (i, r, j)
                lhs_w, rhs_w = float(big[i]), float(bound[i])
            j += 1
    inst = {"graph": g.label(), "w": w.label(), "p": p}
    if worst_at is None:
        return inequality_report("weighted_doubling", "weighted doubling of A_p weights", inst,
                                 0.0, 1.0, detail={"note": "no admissible radius pair"})
    return inequality_report("weighted_doubling", "weighted doubling of A_p weights", inst,
                             lhs_w, rhs_w, detail={"worst_ball": worst_at, "A_p": Ap, "D_mu": Dmu})
