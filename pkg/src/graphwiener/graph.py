"""Finite connected simple graphs with their geodesic geometry.

Everything downstream indexes vertices by ``0..n-1`` and reads distances
from the dense integer matrix ``Graph.dist``. Ball statistics (sizes, sums
of vertex functions over balls, minima over balls) are computed for all
centers and all integer radii at once; real radii reduce to integer ones
because distances are integers.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

VERTEX_CAP = 10_000
GRID_STEP = 0.05

__all__ = [
    "Ahlfors",
    "ConnectivityError",
    "DisjointSet",
    "GenerationError",
    "Graph",
    "GraphSizeError",
    "GrowthStats",
    "ahlfors_check",
    "ball",
    "ball_minima",
    "ball_sums",
    "build_circulant",
    "build_complete",
    "build_cycle",
    "build_from_spec",
    "build_lattice",
    "build_path",
    "build_random_geometric",
    "covering_bound",
    "covering_multiplicity",
    "doubling_constant",
    "fit_growth",
    "maximal_disjoint_set",
    "strong_density_for",
    "strong_growth_table",
]


class GraphSizeError(ValueError):
    pass


class ConnectivityError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


def _canonical_edges(edges, n):
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ValueError("edge endpoint out of range")
    if np.any(e[:, 0] == e[:, 1]):
        raise ValueError("self-loops are not allowed in a simple graph")
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0)  # lexicographic, duplicates removed
    return e


def _all_pairs_bfs(n, edges):
    adj = coo_matrix(
        (np.ones(2 * len(edges)), (np.r_[edges[:, 0], edges[:, 1]], np.r_[edges[:, 1], edges[:, 0]])),
        shape=(n, n),
    ).tocsr()
    d = shortest_path(adj, method="D", unweighted=True, directed=False)
    if not np.all(np.isfinite(d)):
        raise ConnectivityError("graph is not connected")
    return d.astype(np.int32)


@dataclass(frozen=True, eq=False)
class Graph:
    """A connected simple graph with all-pairs geodesic distances.

    Attributes
    ----------
    n : int
        Number of vertices.
    edges : (m, 2) int ndarray
        Edge list with ``i < j``, sorted lexicographically.
    dist : (n, n) int32 ndarray
        Geodesic distance matrix.
    kind, params, seed
        Provenance of the graph, kept for serialization.
    known_dimension : float or None
        Growth exponent known from the construction (lattices, cycles). It
        overrides the grid fit in :func:`fit_growth`.
    """

    n: int
    edges: np.ndarray
    dist: np.ndarray
    kind: str = "explicit"
    params: dict = field(default_factory=dict)
    seed: int | None = None
    known_dimension: float | None = None

    @classmethod
    def from_edges(cls, n, edges, *, kind="explicit", params=None, seed=None,
                   known_dimension=None, dist=None, vertex_cap=VERTEX_CAP):
        if n < 1:
            raise ValueError("a graph needs at least one vertex")
        if n > vertex_cap:
            raise GraphSizeError(f"{n} vertices exceeds the cap of {vertex_cap}")
        e = _canonical_edges(edges, n)
        if dist is None:
            dist = _all_pairs_bfs(n, e) if n > 1 else np.zeros((1, 1), np.int32)
        dist = np.ascontiguousarray(dist, dtype=np.int32)
        dist.setflags(write=False)
        e.setflags(write=False)
        return cls(n, e, dist, kind, dict(params or {}), seed, known_dimension)

    @cached_property
    def diam(self) -> int:
        return int(self.dist.max())

    @cached_property
    def eccentricity(self) -> np.ndarray:
        return self.dist.max(axis=1)

    @cached_property
    def center(self) -> int:
        """Vertex of minimal eccentricity (smallest index on ties)."""
        return int(np.argmin(self.eccentricity))

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        out = [[] for _ in range(self.n)]
        for i, j in self.edges:
            out[i].append(j)
            out[j].append(i)
        return [np.array(sorted(v), dtype=np.int64) for v in out]

    @cached_property
    def ball_sizes(self) -> np.ndarray:
        """``ball_sizes[v, r] = mu(B(v, r))`` for integer ``0 <= r <= diam``."""
        return ball_sums(self).astype(np.int64)

    @cached_property
    def distance_groups(self):
        """Flat ordering of all vertex pairs grouped by distance.

        Returns ``(order, starts)``: ``order`` sorts ``dist.ravel()`` and
        ``starts[k]`` is the first position with distance ``k``. Used for
        per-distance maxima of matrix entries.
        """
        flat = self.dist.ravel()
        key = flat.astype(np.uint16) if self.diam < 2**16 else flat
        order = np.argsort(key, kind="stable")
        counts = np.bincount(flat, minlength=self.diam + 1)
        starts = np.r_[0, np.cumsum(counts)[:-1]]
        return order, starts

    def successor(self) -> np.ndarray:
        """A one-step shift map used by the bidiagonal test family.

        Circulant graphs containing jump 1 shift ``i -> i-1 (mod n)``; any
        other graph maps ``i`` to its smallest lower-indexed neighbour, or to
        ``-1`` when there is none. Every ``i -> succ[i]`` is an edge.
        """
        if self.kind == "circulant" and 1 in self.params.get("jumps", ()):
            return (np.arange(self.n) - 1) % self.n
        succ = np.full(self.n, -1, dtype=np.int64)
        for i, nb in enumerate(self.neighbors):
            lower = nb[nb < i]
            if lower.size:
                succ[i] = lower[0]
        return succ

    # serialization

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "edges": self.edges.tolist(),
            "kind": self.kind,
            "params": self.params,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> Graph:
        kind = data.get("kind", "explicit")
        params = data.get("params", {}) or {}
        if kind in _BUILDERS:
            # rebuild through the generator so structure-aware distances and
            # known dimensions come back
            g = build_from_spec({"kind": kind, **params, **({"seed": data["seed"]} if data.get("seed") is not None else {})})
            if g.n == data["n"] and np.array_equal(g.edges, _canonical_edges(data["edges"], data["n"])):
                return g
        return cls.from_edges(data["n"], data["edges"], kind="explicit", seed=data.get("seed"))

    @classmethod
    def from_json(cls, text: str) -> Graph:
        return cls.from_dict(json.loads(text))

    @cached_property
    def hash(self) -> str:
        payload = json.dumps({"n": int(self.n), "edges": self.edges.tolist()}, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def label(self) -> str:
        if self.kind == "lattice":
            d, side = self.params["d"], self.params["side"]
            return f"P_{side}" if d == 1 else f"lattice{d}d_{side}"
        if self.kind == "circulant":
            jumps = self.params["jumps"]
            return f"C_{self.n}" if list(jumps) == [1] else f"circ_{self.n}_{'-'.join(map(str, jumps))}"
        if self.kind == "complete":
            return f"K_{self.n}"
        if self.kind == "rgg":
            return f"rgg_{self.n}_r{self.params['radius']}_s{self.seed}"
        return f"graph_{self.n}_{self.hash[:8]}"

    def __repr__(self):
        return f"Graph({self.label()}, n={self.n}, |E|={len(self.edges)}, diam={self.diam})"


# ---------------------------------------------------------------------------
# generators


def build_lattice(d: int, side: int, *, vertex_cap=VERTEX_CAP) -> Graph:
    """Box ``{0..side-1}^d`` of the lattice graph, vertices in row-major order."""
    if d < 1 or side < 2:
        raise ValueError("need d >= 1 and side >= 2")
    if side ** d > vertex_cap:
        raise GraphSizeError(f"side^d = {side ** d} exceeds the cap of {vertex_cap}")
    n = side ** d
    coords = np.array(np.unravel_index(np.arange(n), (side,) * d)).T
    edges = []
    idx = np.arange(n).reshape((side,) * d)
    for axis in range(d):
        a = np.take(idx, np.arange(side - 1), axis=axis).ravel()
        b = np.take(idx, np.arange(1, side), axis=axis).ravel()
        edges.append(np.stack([a, b], axis=1))
    edges = np.concatenate(edges)
    dist = np.zeros((n, n), dtype=np.int32)
    for axis in range(d):
        c = coords[:, axis].astype(np.int32)
        dist += np.abs(c[:, None] - c[None, :])
    return Graph.from_edges(n, edges, kind="lattice", params={"d": d, "side": side},
                            known_dimension=float(d), dist=dist, vertex_cap=vertex_cap)


def build_path(n: int) -> Graph:
    return build_lattice(1, n)


def lattice_coords(g: Graph) -> np.ndarray:
    d, side = g.params["d"], g.params["side"]
    return np.array(np.unravel_index(np.arange(g.n), (side,) * d)).T


def build_circulant(n: int, jumps: Iterable[int], *, vertex_cap=VERTEX_CAP) -> Graph:
    """Cayley graph of the cyclic group of order ``n`` with the given jumps."""
    jumps = sorted({int(j) for j in jumps})
    if n < 3:
        raise ValueError("need n >= 3")
    if n > vertex_cap:
        raise GraphSizeError(f"{n} vertices exceeds the cap of {vertex_cap}")
    if not jumps or jumps[0] < 1 or jumps[-1] > n // 2:
        raise ValueError("jumps must be a nonempty subset of [1, n/2]")
    if math.gcd(n, *jumps) != 1:
        raise ConnectivityError(f"circulant C_{n}{jumps} is disconnected")
    i = np.arange(n)
    edges = np.concatenate([np.stack([i, (i + j) % n], axis=1) for j in jumps])
    # vertex-transitive: one BFS from 0 gives every row by translation
    e = _canonical_edges(edges, n)
    adj = coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                     shape=(n, n)).tocsr()
    d0 = shortest_path(adj, method="D", unweighted=True, directed=False, indices=0).astype(np.int32)
    dist = d0[(i[None, :] - i[:, None]) % n]
    known = 1.0 if jumps == [1] else None
    return Graph.from_edges(n, e, kind="circulant", params={"n": n, "jumps": jumps},
                            known_dimension=known, dist=dist, vertex_cap=vertex_cap)


def build_cycle(n: int) -> Graph:
    return build_circulant(n, [1])


def build_complete(n: int) -> Graph:
    if n < 2:
        raise ValueError("need n >= 2")
    i, j = np.triu_indices(n, 1)
    dist = np.ones((n, n), np.int32) - np.eye(n, dtype=np.int32)
    return Graph.from_edges(n, np.stack([i, j], 1), kind="complete", params={"n": n}, dist=dist)


def build_random_geometric(n: int, radius: float, seed: int, *, max_retries=20,
                           vertex_cap=VERTEX_CAP) -> Graph:
    """Uniform points in the unit square joined when within ``radius``.

    The radius grows by 10% per retry until the graph is connected.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if n > vertex_cap:
        raise GraphSizeError(f"{n} vertices exceeds the cap of {vertex_cap}")
    pts = np.random.default_rng(seed).random((n, 2))
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    rad = float(radius)
    for _ in range(max_retries + 1):
        i, j = np.nonzero(np.triu(sq <= rad * rad, 1))
        edges = np.stack([i, j], axis=1)
        try:
            g = Graph.from_edges(n, edges, kind="rgg",
                                 params={"n": n, "radius": radius, "effective_radius": rad},
                                 seed=seed, vertex_cap=vertex_cap)
        except ConnectivityError:
            rad *= 1.1
            continue
        return g
    raise GenerationError(f"random geometric graph still disconnected after {max_retries} retries")


_BUILDERS = {
    "lattice": lambda s: build_lattice(int(s["d"]), int(s["side"])),
    "path": lambda s: build_path(int(s["n"])),
    "cycle": lambda s: build_cycle(int(s["n"])),
    "circulant": lambda s: build_circulant(int(s["n"]), s["jumps"]),
    "complete": lambda s: build_complete(int(s["n"])),
    "rgg": lambda s: build_random_geometric(int(s["n"]), float(s["radius"]), int(s["seed"])),
}


def build_from_spec(spec: dict) -> Graph:
    """Build a graph from a dict such as ``{"kind": "cycle", "n": 128}``."""
    kind = spec.get("kind")
    if kind not in _BUILDERS:
        raise ValueError(f"unknown graph kind {kind!r}; expected one of {sorted(_BUILDERS)}")
    try:
        return _BUILDERS[kind](spec)
    except KeyError as exc:
        raise ValueError(f"graph spec {spec} is missing field {exc}") from None


# ---------------------------------------------------------------------------
# balls


def ball(g: Graph, center: int, r: float) -> np.ndarray:
    """Sorted vertex indices of the closed ball ``B(center, r)``."""
    if not 0 <= center < g.n:
        raise IndexError(f"vertex {center} not in graph")
    return np.flatnonzero(g.dist[center] <= r)


def ball_sums(g: Graph, values=None, *, chunk=512) -> np.ndarray:
    """Sums of a vertex function over every ball.

    Returns an ``(n, diam + 1)`` array whose entry ``[v, r]`` is the sum of
    ``values`` over ``B(v, r)``; ``values=None`` counts vertices.
    """
    D = g.diam
    out = np.empty((g.n, D + 1))
    vals = None if values is None else np.asarray(values, dtype=float)
    for s in range(0, g.n, chunk):
        rows = g.dist[s:s + chunk]
        m = rows.shape[0]
        key = (np.arange(m, dtype=np.int64)[:, None] * (D + 1) + rows).ravel()
        w = None if vals is None else np.broadcast_to(vals, rows.shape).ravel()
        sph = np.bincount(key, weights=w, minlength=m * (D + 1)).reshape(m, D + 1)
        np.cumsum(sph, axis=1, out=out[s:s + m])
    return out


def ball_minima(g: Graph, values) -> np.ndarray:
    """``[v, r]`` entry is the minimum of ``values`` over ``B(v, r)``."""
    D = g.diam
    vals = np.asarray(values, dtype=float)
    out = np.empty((g.n, D + 1))
    for v in range(g.n):
        sph = np.full(D + 1, np.inf)
        np.minimum.at(sph, g.dist[v], vals)
        np.minimum.accumulate(sph, out=out[v])
    return out


def doubling_constant(g: Graph) -> float:
    """Exact ``sup mu(B(v, 2r)) / mu(B(v, r))`` over vertices and real ``r > 0``.

    On ``[m/2, (m+1)/2)`` the ratio is constant, so the half-integer
    breakpoints ``r = m/2``, ``m = 1..2 diam`` suffice.
    """
    sizes = g.ball_sizes
    D = g.diam
    if D == 0:
        return 1.0
    m = np.arange(1, 2 * D + 1)
    ratio = sizes[:, np.minimum(m, D)] / sizes[:, m // 2]
    return float(max(1.0, ratio.max()))


# ---------------------------------------------------------------------------
# growth statistics


@dataclass(frozen=True)
class GrowthStats:
    """Polynomial growth constants of the counting measure.

    ``dimension``/``density`` bound ball sizes; the ``strong_`` pair bounds
    counts of fusion vertices in the enlarged balls of radius ``(N+1)R``,
    over the listed ``n_values``. ``fitted`` records whether each dimension
    came from the grid fit (True) or a known value (False).
    """

    doubling_constant: float
    dimension: float
    density: float
    strong_dimension: float
    strong_density: float
    diam: int
    n_values: tuple = ()
    fitted: bool = True
    density_cap: float = 16.0

    def to_dict(self):
        return {
            "doubling_constant": self.doubling_constant,
            "dimension": self.dimension,
            "density": self.density,
            "strong_dimension": self.strong_dimension,
            "strong_density": self.strong_density,
            "diam": self.diam,
            "n_values": list(self.n_values),
            "fitted": self.fitted,
            "density_cap": self.density_cap,
            "convention": "grid-fit with density cap; minimal constants degenerate on finite graphs",
        }


def _density(max_counts, radii, d):
    return float(np.max(max_counts / (radii + 1.0) ** d))


def strong_growth_table(g: Graph, vn: DisjointSet):
    """Max fusion-vertex counts at the breakpoints ``R = k/(N+1)``.

    Returns ``(counts, R)`` where ``counts[k]`` is the largest number of
    members of ``vn`` within distance ``k`` of a single vertex.
    """
    D = g.diam
    indicator = np.zeros(g.n)
    indicator[vn.members] = 1.0
    counts = np.rint(ball_sums(g, indicator)).max(axis=0)
    return counts, np.arange(D + 1) / (vn.N + 1.0)


def strong_density_for(vn: DisjointSet, d: float) -> float:
    counts, R = strong_growth_table(vn.graph, vn)
    return _density(counts, R, d)


def _grid(top, floor):
    pts = np.round(np.arange(0.0, top, GRID_STEP), 10)
    pts = [float(x) for x in pts if x >= floor - 1e-12 and x < top]
    if floor < top and (not pts or abs(pts[0] - floor) > 1e-12):
        pts.insert(0, float(floor))
    pts.append(float(top))
    return pts


def _fit(tables, top, floor, cap):
    for d in _grid(top, floor):
        dens = max(_density(c, R, d) for c, R in tables)
        if dens <= cap:
            return d, dens
    warnings.warn(f"no grid dimension meets density cap {cap}; using log2 D(mu) = {top:.4f}")
    return top, max(_density(c, R, top) for c, R in tables)


def default_n_values(g: Graph) -> tuple:
    return (0,) + tuple(N for N in (1, 2, 4, 8) if N <= g.diam / 4)


def fit_growth(g: Graph, density_cap: float = 16.0, *, n_values: Sequence[int] | None = None,
               dimension: float | None = None, strong_dimension: float | None = None,
               use_known: bool = True, min_dimension: float = 1.0) -> GrowthStats:
    """Fit growth exponents on the 0.05 grid under a density cap.

    ``dimension`` is the smallest grid exponent ``d >= min_dimension`` with
    ``max mu(B(v, r)) / (r+1)^d <= density_cap``; the strong pair is fitted
    the same way on fusion-vertex counts, maximized over ``n_values`` (one
    greedy disjoint set each; ``N = 0`` is always included, which forces
    ``dimension <= strong_dimension``). A graph's known dimension overrides
    both fits when ``use_known`` is set, since the known families are
    Ahlfors regular.
    """
    Dmu = doubling_constant(g)
    top = math.log2(Dmu)
    floor = min(min_dimension, top)
    radii = np.arange(g.diam + 1)
    ball_table = (g.ball_sizes.max(axis=0).astype(float), radii)
    if n_values is None:
        n_values = default_n_values(g)
    n_values = tuple(sorted({0, *map(int, n_values)}))
    strong_tables = [strong_growth_table(g, maximal_disjoint_set(g, N, start=0)) for N in n_values]

    if dimension is None and use_known and g.known_dimension is not None:
        dimension = g.known_dimension
        if strong_dimension is None:
            strong_dimension = g.known_dimension
    fitted = dimension is None
    if dimension is None:
        d, dens = _fit([ball_table], top, floor, density_cap)
    else:
        d, dens = float(dimension), _density(*ball_table, dimension)
    if strong_dimension is None:
        sd, sdens = _fit(strong_tables, top, max(floor, d), density_cap)
    else:
        sd = float(strong_dimension)
        sdens = max(_density(c, R, sd) for c, R in strong_tables)
    return GrowthStats(Dmu, d, dens, sd, sdens, g.diam, n_values, fitted, density_cap)


# ---------------------------------------------------------------------------
# maximal disjoint sets


@dataclass(frozen=True, eq=False)
class DisjointSet:
    """A maximal ``N``-disjoint set of fusion vertices."""

    N: int
    members: np.ndarray
    graph: Graph

    def __len__(self):
        return len(self.members)

    @cached_property
    def member_dist(self) -> np.ndarray:
        """Distances between fusion vertices, ``|V_N| x |V_N|``."""
        m = self.members
        return self.graph.dist[np.ix_(m, m)]

    def near(self, radius) -> np.ndarray:
        """0/1 matrix ``P[v, m] = 1`` iff member ``m`` lies in ``B(v, radius)``."""
        return (self.graph.dist[:, self.members] <= radius).astype(float)

    def verify(self):
        g, N = self.graph, self.N
        if N == 0:
            assert len(self.members) == g.n
            return
        md = self.member_dist
        off = md[~np.eye(len(md), dtype=bool)]
        assert np.all(off > 2 * N), "fusion balls are not pairwise disjoint"
        assert np.all(g.dist[self.members].min(axis=0) <= 2 * N), "fusion set is not maximal"


def maximal_disjoint_set(g: Graph, N: int, start: int = 0) -> DisjointSet:
    """Greedy maximal ``N``-disjoint set grown outward from ``start``.

    Each step picks, among vertices whose ``N``-ball misses all chosen
    balls, the one closest to ``start`` (smallest index on ties).
    """
    if not 0 <= start < g.n:
        raise ValueError(f"start vertex {start} not in graph")
    if N < 0:
        raise ValueError("N must be non-negative")
    N = int(N)
    if N == 0:
        vn = DisjointSet(0, np.arange(g.n), g)
        return vn
    from_start = g.dist[start].astype(np.int64)
    key = from_start * g.n + np.arange(g.n)
    members = [start]
    nearest = g.dist[start].copy()
    while True:
        cand = nearest > 2 * N
        if not cand.any():
            break
        nxt = int(np.flatnonzero(cand)[np.argmin(key[cand])])
        members.append(nxt)
        np.minimum(nearest, g.dist[nxt], out=nearest)
    vn = DisjointSet(N, np.array(members, dtype=np.int64), g)
    vn.verify()
    return vn


def covering_multiplicity(vn: DisjointSet, radius: float) -> tuple[int, int]:
    """Min and max number of enlarged balls ``B(v_m, radius)`` over each vertex."""
    if radius < 2 * vn.N:
        raise ValueError(f"covering radius {radius} must be at least 2N = {2 * vn.N}")
    counts = (vn.graph.dist[vn.members] <= radius).sum(axis=0)
    return int(counts.min()), int(counts.max())


def covering_bound(vn: DisjointSet, radius: float, doubling: float) -> float:
    """Upper bound ``D(mu)^ceil(log2(2 N'/N + 1))`` on the covering multiplicity."""
    if vn.N == 0:
        return float("inf")
    return doubling ** math.ceil(math.log2(2 * radius / vn.N + 1))


@dataclass(frozen=True)
class Ahlfors:
    b3: float
    b4: float

    @property
    def ratio(self) -> float:
        return self.b4 / self.b3


def ahlfors_check(g: Graph, d0: float) -> Ahlfors:
    """Best constants in ``B3 (r+1)^d0 <= mu(B(v, r)) <= B4 (r+1)^d0``, ``r <= diam``."""
    if d0 <= 0:
        raise ValueError("d0 must be positive")
    scaled = g.ball_sizes / (np.arange(g.diam + 1) + 1.0) ** d0
    return Ahlfors(float(scaled.min()), float(scaled.max()))
