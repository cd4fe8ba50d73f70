"""Test-matrix families on graphs."""
from __future__ import annotations

import numpy as np

from .beurling import LocalizedMatrix
from .graph import Graph

__all__ = ["diagonal", "identity", "kappa_matrix", "matrix_from_spec", "random_decay"]


def identity(g: Graph, scale: float = 1.0) -> LocalizedMatrix:
    label = "I" if scale == 1 else f"{scale:g}I"
    return LocalizedMatrix(scale * np.eye(g.n), g, label, {"kind": "identity", "scale": scale})


def diagonal(g: Graph, values) -> LocalizedMatrix:
    return LocalizedMatrix(np.diag(np.asarray(values, float)), g, "diag", {"kind": "diagonal"})


def kappa_matrix(g: Graph, kappa: float) -> LocalizedMatrix:
    """Unit diagonal with ``-kappa`` at each vertex's successor.

    On a cycle the successor of ``i`` is ``i - 1 (mod n)``, giving the
    circulant bidiagonal matrix whose inverse has entries
    ``kappa^m / (1 - kappa^n)`` at backward offset ``m``. On other graphs the
    successor is the smallest lower-indexed neighbour, which keeps the
    matrix unit lower triangular after a suitable ordering and hence
    invertible.
    """
    succ = g.successor()
    a = np.eye(g.n)
    rows = np.flatnonzero(succ >= 0)
    a[rows, succ[rows]] = -kappa
    return LocalizedMatrix(a, g, f"A_kappa{kappa:g}", {"kind": "kappa", "kappa": kappa})


def random_decay(g: Graph, seed: int = 0, decay: float = 3.0, mass: float = 0.5) -> LocalizedMatrix:
    """Unit diagonal plus random entries of size about ``(dist + 1)^(-decay)``.

    Off-diagonal part is rescaled so that every absolute row and column sum
    is at most ``mass``; with ``mass < 1`` the matrix is diagonally dominant
    and therefore invertible.
    """
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, (g.n, g.n))
    off = u * (g.dist + 1.0) ** (-decay)
    np.fill_diagonal(off, 0.0)
    s = max(np.abs(off).sum(axis=0).max(), np.abs(off).sum(axis=1).max())
    if s > mass:
        off *= mass / s
    return LocalizedMatrix(np.eye(g.n) + off, g, f"decay{decay:g}_s{seed}",
                           {"kind": "random_decay", "seed": seed, "decay": decay, "mass": mass})


def matrix_from_spec(spec: dict, g: Graph) -> LocalizedMatrix:
    kind = spec.get("kind")
    if kind == "identity":
        return identity(g, float(spec.get("scale", 1.0)))
    if kind == "kappa":
        return kappa_matrix(g, float(spec["kappa"]))
    if kind == "random_decay":
        return random_decay(g, int(spec.get("seed", 0)), float(spec.get("decay", 3.0)),
                            float(spec.get("mass", 0.5)))
    raise ValueError(f"unknown matrix kind {kind!r}")
