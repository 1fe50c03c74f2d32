"""Zonotopes and the exact set operations used throughout the pipeline.

A zonotope is the affine image of a unit cube,

    Z = <c, G> = { c + sum_i beta_i g_i : beta_i in [-1, 1] },

with center c in R^n and generator columns g_1..g_eta.  Minkowski sums and
linear maps are closed and exact on this representation, which is why every
set in this package (disturbance sets, reachable sets, measurement-error
sets) is a zonotope.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

__all__ = [
    "Zonotope",
    "ScaledTemplateZonotope",
    "HalfspaceSystem",
    "DegenerateZonotopeError",
    "minkowski_sum",
    "linear_map",
    "interval_norm",
    "contains_point",
    "point_distance",
    "to_halfspaces",
]

# Absolute tolerance for membership tests (double-precision LP slack).
DEFAULT_CONTAINS_TOL = 1e-9

# Normal directions closer than this are considered duplicates.
FACET_DEDUP_TOL = 1e-10

# Refuse facet enumerations larger than this (the H-representation of a
# zonotope has O(eta^(n-1)) facets; beyond this it is a modelling error).
MAX_FACET_SUBSETS = 2_000_000


class DegenerateZonotopeError(ValueError):
    """Raised when an exact H-representation of a rank-deficient zonotope
    is requested."""


class Zonotope:
    """Immutable zonotope <c, G>.

    Parameters
    ----------
    center : (n,) array_like
    generators : (n, eta) array_like, eta may be 0 for a singleton set.
    """

    __slots__ = ("c", "G")

    def __init__(self, center, generators=None):
        c = np.asarray(center, dtype=float).reshape(-1)
        if generators is None:
            G = np.zeros((c.shape[0], 0))
        else:
            G = np.asarray(generators, dtype=float)
            if G.ndim == 1:
                G = G.reshape(-1, 1)
        if G.shape[0] != c.shape[0]:
            raise ValueError(
                f"center has dimension {c.shape[0]} but generators have "
                f"{G.shape[0]} rows"
            )
        c.setflags(write=False)
        G.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)

    def __setattr__(self, name, value):
        raise AttributeError("Zonotope is immutable")

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def n_generators(self) -> int:
        return self.G.shape[1]

    def interval_bounds(self):
        """Componentwise interval hull: (lower, upper) vectors."""
        r = np.abs(self.G).sum(axis=1)
        return self.c - r, self.c + r

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        """Draw n points c + G beta with beta uniform in [-1, 1]^eta."""
        beta = rng.uniform(-1.0, 1.0, size=(n, self.n_generators))
        return self.c + beta @ self.G.T

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, n_generators={self.n_generators})"


@dataclass(frozen=True)
class ScaledTemplateZonotope:
    """Zonotope with a fixed generator template and nonnegative scales.

    The realized set is <c, template @ diag(alpha)>.  The pair (c, alpha)
    is what the synthesis LP optimizes while the template stays fixed.
    """

    c: np.ndarray
    template: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        template = np.asarray(self.template, dtype=float)
        if template.ndim == 1:
            template = template.reshape(-1, 1)
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if template.shape[0] != c.shape[0]:
            raise ValueError("template row count must match center dimension")
        if template.shape[1] != alpha.shape[0]:
            raise ValueError("alpha length must match template column count")
        if np.any(alpha < 0):
            raise ValueError("alpha must be nonnegative")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "template", template)
        object.__setattr__(self, "alpha", alpha)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def realize(self) -> Zonotope:
        return Zonotope(self.c, self.template * self.alpha)

    @staticmethod
    def zero(dim: int, template: np.ndarray | None = None) -> "ScaledTemplateZonotope":
        """Singleton {0} with an identity template by default."""
        if template is None:
            template = np.eye(dim)
        template = np.asarray(template, dtype=float)
        return ScaledTemplateZonotope(
            np.zeros(dim), template, np.zeros(template.shape[1])
        )


@dataclass(frozen=True)
class HalfspaceSystem:
    """Polyhedron { p : normals @ p <= offsets } (componentwise)."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if normals.shape[0] != offsets.shape[0]:
            raise ValueError("one offset per normal row required")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @property
    def n_halfspaces(self) -> int:
        return self.normals.shape[0]

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float).reshape(-1)
        return bool(np.all(self.normals @ p <= self.offsets + tol))


def minkowski_sum(a: Zonotope, b: Zonotope) -> Zonotope:
    """<c_a + c_b, [G_a G_b]>."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Zonotope(a.c + b.c, np.hstack([a.G, b.G]))


def linear_map(M, z: Zonotope) -> Zonotope:
    """<M c, M G>."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != z.dim:
        raise ValueError(
            f"matrix has {M.shape[1]} columns but zonotope has dimension {z.dim}"
        )
    return Zonotope(M @ z.c, M @ z.G)


def interval_norm(z: Zonotope) -> float:
    """Sum of 1-norms of the generator columns; 0 for a singleton."""
    return float(np.abs(z.G).sum())


def support(z: Zonotope, direction) -> float:
    """Support function max_{x in Z} <direction, x>."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    return float(d @ z.c + np.abs(d @ z.G).sum())


def point_distance(z: Zonotope, p) -> float:
    """Infinity-norm distance from p to the zonotope (0 if inside).

    Solves  min_{s, beta}  s  subject to  |c + G beta - p| <= s,
    |beta| <= 1, exactly via an LP.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != z.dim:
        raise ValueError("point dimension mismatch")
    r = p - z.c
    eta = z.n_generators
    if eta == 0:
        return float(np.abs(r).max(initial=0.0))
    # Cheap screen: the minimum-2-norm preimage often certifies membership.
    beta = np.linalg.lstsq(z.G, r, rcond=None)[0]
    if np.abs(beta).max() <= 1.0:
        resid = np.abs(z.G @ beta - r).max(initial=0.0)
        if resid == 0.0:
            return 0.0
    from scipy.optimize import linprog

    n = z.dim
    # variables: [beta (eta), s (1)]
    c_obj = np.zeros(eta + 1)
    c_obj[-1] = 1.0
    A = np.zeros((2 * n, eta + 1))
    A[:n, :eta] = z.G
    A[:n, -1] = -1.0
    A[n:, :eta] = -z.G
    A[n:, -1] = -1.0
    b = np.concatenate([r, -r])
    bounds = [(-1.0, 1.0)] * eta + [(0.0, None)]
    res = linprog(c_obj, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if not res.success:  # pragma: no cover - bounded feasible by construction
        raise RuntimeError(f"distance LP failed: {res.message}")
    return max(float(res.fun), 0.0)


def contains_point(z: Zonotope, p, tol: float = DEFAULT_CONTAINS_TOL) -> bool:
    """True iff some beta in [-1,1]^eta puts c + G beta within tol of p."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return point_distance(z, p) <= tol


def _facet_normals(G: np.ndarray) -> np.ndarray:
    """Candidate facet normal directions of <., G>, deduplicated.

    One direction per (n-1)-subset of generator columns with linearly
    independent span: the unit normal of that span.  For n = 1 the single
    direction is +1.
    """
    n, eta = G.shape
    if n == 1:
        return np.ones((1, 1))
    n_subsets = comb(eta, n - 1)
    if n_subsets > MAX_FACET_SUBSETS:
        raise ValueError(
            f"facet enumeration over {n_subsets} generator subsets refused; "
            "reduce the generator count or use the generator encoding"
        )
    normals = []
    for idx in combinations(range(eta), n - 1):
        S = G[:, idx]
        # Normal spans the kernel of S^T; require S full column rank.
        _, sv, vt = np.linalg.svd(S.T, full_matrices=True)
        if sv.size and sv[-1] <= 1e-12 * max(sv[0], 1.0):
            continue
        nu = vt[-1]
        norm = np.linalg.norm(nu)
        if norm <= 0.0:
            continue
        nu = nu / norm
        # Canonical sign: first component of largest magnitude positive.
        k = int(np.argmax(np.abs(nu)))
        if nu[k] < 0:
            nu = -nu
        normals.append(nu)
    if not normals:
        raise DegenerateZonotopeError("generators do not span the space")
    normals = np.array(normals)
    # Deduplicate directions.
    keep = []
    for i, nu in enumerate(normals):
        dup = False
        for j in keep:
            if np.abs(nu - normals[j]).max() <= FACET_DEDUP_TOL:
                dup = True
                break
        if not dup:
            keep.append(i)
    return normals[keep]


def to_halfspaces(z: Zonotope) -> HalfspaceSystem:
    """Exact H-representation of a full-rank zonotope.

    One halfspace pair +-nu.p <= h(+-nu) per facet direction nu, with the
    offsets given by the support function.  Requires the generators to span
    the ambient space; degenerate zonotopes are rejected.
    """
    if z.n_generators < z.dim or np.linalg.matrix_rank(z.G, tol=1e-12) < z.dim:
        raise DegenerateZonotopeError(
            "zonotope generators are rank deficient; no bounded "
            "H-representation exists"
        )
    dirs = _facet_normals(z.G)
    normals = np.vstack([dirs, -dirs])
    offsets = normals @ z.c + np.abs(normals @ z.G).sum(axis=1)
    return HalfspaceSystem(normals, offsets)
