"""Batch verification over an instance matrix of graphs, weights and matrices.

Each check runs once per distinct combination of the parameters it depends
on, so a check that ignores the weight is not repeated for every weight.
Combinations that violate a theorem's hypothesis are collected in an
exclusion list with the reason instead of being dropped silently.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from . import beurling as bl
from .beurling import BeurlingParams, restrict_to_fusion
from .graph import (
    Graph,
    GrowthStats,
    build_from_spec,
    covering_bound,
    covering_multiplicity,
    fit_growth,
    maximal_disjoint_set,
)
from .inversion import entrywise_inverse_check, theorem41_verify
from .matrices import matrix_from_spec
from .report import (
    PRECONDITION,
    PreconditionError,
    VerificationReport,
    inequality_report,
    skipped_report,
)
from .stability import Problem, default_batch, run_chain, theorem31_verify
from .weights import polynomial_weight, trivial_weight, weighted_doubling_check

__all__ = ["RunConfig", "SuiteResult", "default_config", "run_suite"]

INF = math.inf


def _parse_r(r):
    if isinstance(r, str) and r.lower() in ("inf", "infinity"):
        return INF
    return float(r)


@dataclass
class RunConfig:
    """Declarative description of a verification run.

    ``weights`` lists exponents ``theta`` of polynomial weights (0 is the
    trivial weight); ``second_weights`` lists ``(q, theta)`` pairs used as the
    second exponent and weight when comparing stability bounds.
    """

    graphs: list = field(default_factory=lambda: [
        {"kind": "path", "n": 33},
        {"kind": "cycle", "n": 128},
        {"kind": "cycle", "n": 256},
        {"kind": "lattice", "d": 2, "side": 8},
        {"kind": "rgg", "n": 100, "radius": 0.25, "seed": 7},
    ])
    weights: list = field(default_factory=lambda: [0.0, 0.3, -0.4])
    matrices: list = field(default_factory=lambda: [
        {"kind": "identity"},
        {"kind": "kappa", "kappa": 0.5},
        {"kind": "kappa", "kappa": 0.8},
        {"kind": "random_decay", "decay": 3.0, "seed": 11},
    ])
    params: list = field(default_factory=lambda: [[1, 2.0], [2, 2.0], ["inf", 2.0]])
    ps: list = field(default_factory=lambda: [1.0, 1.5, 2.0])
    second_weights: list = field(default_factory=lambda: [[1.0, 0.0], [2.0, 0.3]])
    truncation_widths: list = field(default_factory=lambda: [1, 2, 4, 8])
    fusion_ns: list = field(default_factory=lambda: [1, 2, 4])
    density_cap: float = 16.0
    batch_size: int = 200
    boundedness_vectors: int = 500
    seed: int = 0
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        for p in self.ps:
            if not 1 <= float(p) < INF:
                raise ValueError(f"p={p} outside [1, inf)")
        for pair in self.params:
            r, a = _parse_r(pair[0]), float(pair[1])
            if r < 1 or a < 0:
                raise ValueError(f"invalid Beurling parameters {pair}")
        for th in self.weights:
            if float(th) <= -1:
                raise ValueError(f"weight exponent {th} must exceed -1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")


def default_config() -> RunConfig:
    return RunConfig()


def weight_guard(theta: float, p: float) -> str | None:
    """Range of polynomial exponents that are A_p on the integer line."""
    if theta == 0:
        return None
    if p == 1:
        return None if -1 < theta <= 0 else "polynomial weight with theta > 0 is not A_1 on the line"
    return None if -1 < theta < p - 1 else f"polynomial weight needs -1 < theta < p - 1 = {p - 1:g}"


@dataclass
class SuiteResult:
    reports: list
    excluded: list
    stats: dict

    @property
    def failures(self) -> list:
        return [r for r in self.reports if not r.passed and r.status != "skipped"]

    @property
    def all_passed(self) -> bool:
        return not self.failures

    def jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.reports)

    def summary_rows(self) -> list:
        rows = {}
        for r in self.reports:
            row = rows.setdefault(r.check_id, {"check_id": r.check_id, "label": r.paper_eq, "total": 0,
                                                 "passed": 0, "failed": 0, "skipped": 0, "precondition": 0,
                                                 "min_slack": INF, "max_constant": 0.0})
            row["total"] += 1
            if r.status == "skipped":
                row["skipped"] += 1
            elif r.status == PRECONDITION:
                row["precondition"] += 1
            elif r.passed:
                row["passed"] += 1
            else:
                row["failed"] += 1
            if r.slack is not None and not math.isnan(r.slack):
                row["min_slack"] = min(row["min_slack"], r.slack)
            if r.extracted_constant is not None and math.isfinite(r.extracted_constant):
                row["max_constant"] = max(row["max_constant"], r.extracted_constant)
        return [rows[k] for k in rows]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        cols = ["check_id", "label", "total", "passed", "failed", "skipped", "precondition",
                "min_slack", "max_constant"]
        wr = csv.DictWriter(buf, cols, lineterminator="\n")
        wr.writeheader()
        for row in self.summary_rows():
            wr.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def excluded_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scope", "graph", "matrix", "p", "w", "r", "alpha", "reason"])
        for e in self.excluded:
            wr.writerow([e.get(k, "") for k in ("scope", "graph", "matrix", "p", "w", "r", "alpha", "reason")])
        return buf.getvalue()


def _graph_checks(g: Graph, stats: GrowthStats, cfg: RunConfig, out: list):
    for N in cfg.fusion_ns:
        if N > g.diam / 2:
            continue
        vn = maximal_disjoint_set(g, N, start=0)
        radius = 2 * N
        lo, hi = covering_multiplicity(vn, radius)
        bound = covering_bound(vn, radius, stats.doubling_constant)
        inst = {"graph": g.label(), "N": N, "radius": radius}
        rep = inequality_report("covering", "covering multiplicity of enlarged fusion balls", inst,
                                hi, bound, detail={"min": lo, "members": len(vn)})
        if lo < 1:
            rep.passed, rep.status = False, "fail"
        out.append(rep)


def _algebra_checks(A, R, prm, stats, cfg, fusion_sets, out, excluded):
    g = A.graph
    algebra_ok = prm.excess > 0
    for K in cfg.truncation_widths:
        if K >= g.diam and K != cfg.truncation_widths[0]:
            continue
        if algebra_ok or prm.r == 1:
            out.append(bl.truncation_error_check(A, prm, K))
    for B in (A, R):
        out.append(bl.product_inequality_check(A, B, prm, stats.density, "b10"))
        if algebra_ok:
            out.append(bl.product_inequality_check(A, B, prm, stats.density, "algebra"))
    if algebra_ok:
        out.append(bl.product_inequality_check(A, A, prm, stats.density, "embedding"))
    else:
        excluded.append({"scope": "algebra", "graph": g.label(), "matrix": A.label, "r": prm.r,
                         "alpha": prm.alpha, "reason": "alpha <= d(1 - 1/r)"})
    sd = stats.strong_dimension
    fa = prm.alpha - (sd - prm.d) * prm.inv_r
    for vn in fusion_sets:
        out.append(bl.restriction_check(A, vn, prm, stats))
        BA = restrict_to_fusion(A, vn)
        BR = restrict_to_fusion(R, vn)
        out.append(bl.lift_check(BA, prm.with_(alpha=max(fa, 0.0)) if fa < 0 else prm.with_(alpha=fa), stats))
        if algebra_ok:
            out.append(bl.s_matrix_check(A, vn, prm, stats))
        out.append(bl.fusion_product_inequality_check(BA, BR, prm.r, 0.0, stats, "b10"))
        if fa - sd * prm.inv_conj > 0:
            out.append(bl.fusion_product_inequality_check(BA, BR, prm.r, fa, stats, "algebra"))
            out.append(bl.fusion_product_inequality_check(BA, BA, prm.r, fa, stats, "embedding"))


CHAIN_LABELS = {
    "localized_stability": "localized lower stability estimate",
    "series_norm": "fusion norm of the contracting series",
    "lift_norm": "Beurling norm of the lifted series",
    "domination": "pointwise domination by the lifted series",
    "entrywise_inverse": "entrywise domination of the inverse",
    "theorem_stability": "polynomial control of stability bounds",
    "theorem_inversion": "polynomial norm-controlled inversion",
}


def _stability_checks(A, p, w, prm, stats, cfg, second, out):
    prob = Problem(A, p, w, prm, stats, cfg.seed)
    inst = prob.instance()
    if prob.beta.upper == 0:
        for cid, label in CHAIN_LABELS.items():
            rep = skipped_report(cid, label, inst, "singular matrix: beta = 0", seed=cfg.seed)
            rep.detail["beta"] = [0.0, 0.0]
            out.append(rep)
        return
    batch = default_batch(A, cfg.seed, cfg.batch_size)
    try:
        res = run_chain(prob, batch)
    except PreconditionError as exc:
        out.append(skipped_report("localized_stability", "localized lower stability estimate", inst,
                                  str(exc), status=PRECONDITION, minimal=exc.minimal, seed=cfg.seed))
        return
    chain = res["chain"]
    for key in ("localized", "w_norm", "h_norm", "domination"):
        out.append(res[key])
    out.append(entrywise_inverse_check(prob, chain))
    for q, w2 in second:
        out.append(theorem31_verify(A, p, w, q, w2, prm, stats, seed=cfg.seed, chain=chain))
    out.append(theorem41_verify(A, p, w, prm, stats, seed=cfg.seed, chain=chain).to_report(cfg.seed))


def run_suite(cfg: RunConfig | None = None, progress=None) -> SuiteResult:
    """Run every check of the instance matrix and collect reports in a fixed order."""
    cfg = cfg or default_config()
    cfg.validate()
    reports: list[VerificationReport] = []
    excluded: list[dict] = []
    all_stats = {}
    params = [(_parse_r(r), float(a)) for r, a in cfg.params]
    for gspec in cfg.graphs:
        g = build_from_spec(gspec)
        stats = fit_growth(g, cfg.density_cap)
        all_stats[g.label()] = stats.to_dict()
        if progress:
            progress(f"{g.label()}: d={stats.dimension:g}, strong d={stats.strong_dimension:g}")
        _graph_checks(g, stats, cfg, reports)
        weights = {th: (trivial_weight(g) if th == 0 else polynomial_weight(g, None, th))
                   for th in map(float, cfg.weights)}
        for p in map(float, cfg.ps):
            for th, w in weights.items():
                reason = weight_guard(th, p)
                if reason:
                    excluded.append({"scope": "weight", "graph": g.label(), "p": p, "w": w.label(),
                                     "reason": reason})
                    continue
                reports.append(weighted_doubling_check(w, p))
        second = []
        for q, th in cfg.second_weights:
            q, th = float(q), float(th)
            second.append((q, trivial_weight(g) if th == 0 else polynomial_weight(g, None, th)))
        R = matrix_from_spec({"kind": "random_decay", "decay": 3.0, "seed": cfg.seed + 1}, g)
        fusion_sets = [maximal_disjoint_set(g, N, start=0) for N in cfg.fusion_ns if 1 <= N <= g.diam / 2]
        for mspec in cfg.matrices:
            A = matrix_from_spec(mspec, g)
            for p in map(float, cfg.ps):
                for th, w in weights.items():
                    if weight_guard(th, p):
                        continue
                    reports.append(bl.weighted_boundedness_check(A, p, w, stats, n_vectors=cfg.boundedness_vectors,
                                                                 seed=cfg.seed))
            for r, a in params:
                prm = BeurlingParams(r, a, stats.dimension)
                _algebra_checks(A, R, prm, stats, cfg, fusion_sets, reports, excluded)
                hyp = a > stats.strong_dimension - stats.dimension * prm.inv_r and prm.excess > 0
                if not hyp:
                    excluded.append({"scope": "theorem", "graph": g.label(), "matrix": A.label,
                                     "r": prm.to_dict()["r"], "alpha": a,
                                     "reason": "alpha <= strong_d - d/r or alpha <= d(1 - 1/r)"})
                    continue
                for p in map(float, cfg.ps):
                    for th, w in weights.items():
                        if weight_guard(th, p):
                            continue
                        _stability_checks(A, p, w, prm, stats, cfg, second, reports)
            if progress:
                progress(f"  {A.label}: {len(reports)} reports so far")
    return SuiteResult(reports, excluded, all_stats)
