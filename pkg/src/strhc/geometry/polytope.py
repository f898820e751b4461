"""Halfspace-represented convex polytopes and the set calculus built on them.

A :class:`Polytope` is ``{z : A z <= b}`` with unit-norm rows. Lower
dimensional sets (segments, points) are carried as pairs of opposite rows,
so every operation here must tolerate implicit equalities.
"""
from __future__ import annotations

from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import lp

TOL = 1e-7
_ZERO_ROW = 1e-12
_SAME_ROW = 1e-9


class Polytope:
    """Convex polytope ``{z : A z <= b}``.

    Rows are normalized on construction and zero rows are dropped (or turn
    the set empty when their offset is negative). Instances are immutable.
    """

    def __init__(self, A, b, dim: int | None = None):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.ndim == 1:
            A = A.reshape(1, -1) if A.size else A.reshape(0, dim or 0)
        if dim is None:
            dim = A.shape[1]
        if A.shape != (b.shape[0], dim):
            raise ValueError(f"constraint shape {A.shape} does not match offsets {b.shape} / dim {dim}")
        if dim < 1:
            raise ValueError("polytope dimension must be positive")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("constraints must be finite")
        norms = np.linalg.norm(A, axis=1)
        zero = norms < _ZERO_ROW
        self._canonical_empty = False
        if np.any(b[zero] < -TOL):
            A, b = _empty_rows(dim)
            self._canonical_empty = True
        else:
            A = A[~zero] / norms[~zero, None]
            b = b[~zero] / norms[~zero]
        A.setflags(write=False)
        b.setflags(write=False)
        self._A, self._b, self._dim = A, b, dim

    # -- constructors -----------------------------------------------------
    @classmethod
    def box(cls, lower, upper) -> "Polytope":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = lower.shape[0]
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @classmethod
    def symmetric_box(cls, half_widths) -> "Polytope":
        h = np.atleast_1d(np.asarray(half_widths, dtype=float))
        return cls.box(-h, h)

    @classmethod
    def point(cls, z) -> "Polytope":
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return cls.box(z, z)

    @classmethod
    def empty(cls, dim: int) -> "Polytope":
        A, b = _empty_rows(dim)
        P = cls(A, b)
        P._canonical_empty = True
        return P

    # -- accessors ----------------------------------------------------------
    @property
    def A(self) -> np.ndarray:
        return self._A

    @property
    def b(self) -> np.ndarray:
        return self._b

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n_constraints(self) -> int:
        return self._A.shape[0]

    def __repr__(self) -> str:
        if self.is_empty:
            return f"Polytope(dim={self.dim}, empty)"
        return f"Polytope(dim={self.dim}, rows={self.n_constraints})"

    def __contains__(self, z) -> bool:
        return contains(self, z)

    @cached_property
    def is_empty(self) -> bool:
        if self._canonical_empty:
            return True
        if self.n_constraints == 0:
            return False
        res = lp.maximize(np.zeros(self.dim), self._A, self._b)
        return res.status == lp.INFEASIBLE

    @cached_property
    def box_bounds(self):
        """``(lower, upper)`` when the rows are exactly an axis-aligned box, else ``None``."""
        if self._canonical_empty or self.n_constraints != 2 * self.dim:
            return None
        lo = np.full(self.dim, np.nan)
        hi = np.full(self.dim, np.nan)
        for a, bi in zip(self._A, self._b):
            nz = np.flatnonzero(a)
            if nz.size != 1 or abs(abs(a[nz[0]]) - 1.0) > 1e-12:
                return None
            j = nz[0]
            if a[j] > 0:
                hi[j] = bi
            else:
                lo[j] = -bi
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi + TOL):
            return None
        return lo, hi

    def translate(self, c) -> "Polytope":
        c = np.asarray(c, dtype=float).reshape(self.dim)
        if self.is_empty:
            return self
        return Polytope(self._A, self._b + self._A @ c, self.dim)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "empty": bool(self.is_empty),
            "rows": [{"a": [float(v) for v in a], "b": float(bi)} for a, bi in zip(self._A, self._b)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Polytope":
        dim = int(d["dim"])
        if d.get("empty"):
            return cls.empty(dim)
        rows = d["rows"]
        A = np.array([r["a"] for r in rows], dtype=float).reshape(len(rows), dim)
        b = np.array([r["b"] for r in rows], dtype=float)
        return cls(A, b, dim)


def _empty_rows(dim: int):
    A = np.zeros((2, dim))
    A[0, 0], A[1, 0] = 1.0, -1.0
    return A, np.array([-1.0, -1.0])


def _check_dims(P: Polytope, Q: Polytope) -> None:
    if P.dim != Q.dim:
        raise ValueError(f"dimension mismatch: {P.dim} vs {Q.dim}")


# -- primitive queries --------------------------------------------------------
def contains(P: Polytope, z, tol: float = TOL) -> bool:
    """Membership with boundary points counted in (slack up to ``tol``)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != P.dim:
        raise ValueError(f"point of length {z.shape[0]} tested against dim {P.dim}")
    if P.n_constraints == 0:
        return True
    return bool(np.all(P.A @ z - P.b <= tol))


def contains_points(P: Polytope, Z, tol: float = TOL) -> np.ndarray:
    """Vectorized :func:`contains` over the rows of ``Z``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if P.n_constraints == 0:
        return np.ones(Z.shape[0], dtype=bool)
    return np.all(Z @ P.A.T - P.b <= tol, axis=1)


def is_empty(P: Polytope) -> bool:
    return P.is_empty


def support(P: Polytope, direction) -> float:
    """``max d.z`` over ``P``; ``-inf`` for an empty set, ``inf`` if unbounded."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    if d.shape[0] != P.dim:
        raise ValueError("direction length does not match polytope dimension")
    if P.is_empty:
        return -np.inf
    if not np.any(d):
        return 0.0
    bb = P.box_bounds
    if bb is not None:
        return float(np.sum(np.where(d > 0, d * bb[1], d * bb[0])))
    return lp.maximize(d, P.A, P.b).value


def support_many(P: Polytope, directions) -> np.ndarray:
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    return np.array([support(P, d) for d in D])


def is_subset(P: Polytope, Q: Polytope, tol: float = TOL) -> bool:
    """``P ⊆ Q`` by comparing ``support(P, a_i)`` with each offset of ``Q``."""
    _check_dims(P, Q)
    if P.is_empty:
        return True
    if Q.is_empty:
        return False
    return all(support(P, a) <= bi + tol for a, bi in zip(Q.A, Q.b))


def is_singleton(P: Polytope, tol: float = 1e-12):
    """Return the point if ``P`` is a single point, else ``None``."""
    if P.is_empty or P.n_constraints == 0:
        return None
    eye = np.eye(P.dim)
    hi = support_many(P, eye)
    lo = -support_many(P, -eye)
    if np.all(np.isfinite(hi)) and np.all(np.isfinite(lo)) and np.all(hi - lo <= tol):
        return 0.5 * (hi + lo)
    return None


# -- redundancy ---------------------------------------------------------------
def _dedupe(A: np.ndarray, b: np.ndarray):
    if A.shape[0] == 0:
        return A, b
    keys = np.round(A / _SAME_ROW).astype(np.int64)
    best: dict[bytes, int] = {}
    for i, k in enumerate(keys):
        kb = k.tobytes()
        j = best.get(kb)
        if j is None or b[i] < b[j]:
            best[kb] = i
    idx = sorted(best.values())
    return A[idx], b[idx]


def remove_redundancy(P: Polytope, tol: float = TOL) -> Polytope:
    """Drop every row whose removal leaves the set unchanged.

    Full-dimensional bounded sets are pre-screened in the dual: seen from a
    strictly interior point ``z0``, the essential rows are the hull vertices
    of ``a_i / (b_i - a_i z0)``. Survivors (or every row, for thin or
    unbounded sets) then get the LP test: maximize the row's normal over the
    other rows, capped one unit past its offset so the LP stays bounded.
    """
    if P.is_empty:
        return Polytope.empty(P.dim)
    A, b = _dedupe(P.A, P.b)
    if P.dim == 1:
        return _reduce_interval(A, b)
    cand = _dual_hull_candidates(A, b)
    if cand is not None:
        A, b = A[cand], b[cand]
    keep = np.ones(A.shape[0], dtype=bool)
    for i in range(A.shape[0]):
        keep[i] = False
        others = np.vstack([A[keep], A[i : i + 1]])
        offs = np.concatenate([b[keep], [b[i] + 1.0]])
        res = lp.maximize(A[i], others, offs)
        if res.status != lp.OPTIMAL or res.value > b[i] + tol:
            keep[i] = True
    return Polytope(A[keep], b[keep], P.dim)


def _reduce_interval(A, b) -> Polytope:
    up = A[:, 0] > 0
    rows_A, rows_b = [], []
    for mask, sign in ((up, 1.0), (~up, -1.0)):
        if np.any(mask):
            rows_A.append([sign])
            rows_b.append(np.min(b[mask]))
    return Polytope(np.array(rows_A), np.array(rows_b), 1)


def _dual_hull_candidates(A, b):
    """Indices of possibly essential rows, or ``None`` when the dual screen does not apply."""
    from scipy.spatial import ConvexHull, QhullError

    if A.shape[0] <= A.shape[1] + 1:
        return None
    center, radius = chebyshev_center(Polytope(A, b, A.shape[1]))
    if center is None or radius < 1e-9 or radius >= 1e5:
        return None
    slack = b - A @ center
    D = A / slack[:, None]
    try:
        hull = ConvexHull(D)
    except (QhullError, ValueError):
        return None
    # origin strictly inside the dual hull <=> the primal set is bounded
    if np.any(hull.equations[:, -1] >= -1e-12):
        return None
    return np.sort(hull.vertices)


# -- variable elimination -------------------------------------------------------
def _find_equality(A: np.ndarray, b: np.ndarray, j: int):
    cand = np.flatnonzero(np.abs(A[:, j]) > 1e-9)
    for r in cand:
        diff = np.abs(A + A[r]).max(axis=1) + np.abs(b + b[r])
        partners = np.flatnonzero(diff < _SAME_ROW)
        partners = partners[partners != r]
        if partners.size:
            return int(r), int(partners[0])
    return None


def _eliminate(A: np.ndarray, b: np.ndarray, j: int):
    """Remove variable ``j`` from ``A z <= b`` (exact substitution or Fourier-Motzkin)."""
    eq = _find_equality(A, b, j)
    if eq is not None:
        r, s = eq
        rest = np.ones(A.shape[0], dtype=bool)
        rest[[r, s]] = False
        ratio = A[rest, j] / A[r, j]
        A_new = A[rest] - ratio[:, None] * A[r]
        b_new = b[rest] - ratio * b[r]
    else:
        col = A[:, j]
        pos = np.flatnonzero(col > 1e-12)
        neg = np.flatnonzero(col < -1e-12)
        zero = np.flatnonzero(np.abs(col) <= 1e-12)
        Ap = A[pos] / col[pos, None]
        bp = b[pos] / col[pos]
        An = A[neg] / -col[neg, None]
        bn = b[neg] / -col[neg]
        combos_A = (Ap[:, None, :] + An[None, :, :]).reshape(-1, A.shape[1])
        combos_b = (bp[:, None] + bn[None, :]).reshape(-1)
        A_new = np.vstack([A[zero], combos_A])
        b_new = np.concatenate([b[zero], combos_b])
    A_new = np.delete(A_new, j, axis=1)
    return A_new, b_new


def _normalize_rows(A, b):
    norms = np.linalg.norm(A, axis=1)
    zero = norms < _ZERO_ROW
    if np.any(b[zero] < -TOL):
        return None
    return A[~zero] / norms[~zero, None], b[~zero] / norms[~zero]


def _eliminate_many(A, b, drop: Sequence[int], dim_out: int) -> Polytope:
    for j in sorted(drop, reverse=True):
        A, b = _eliminate(A, b, j)
        rows = _normalize_rows(A, b)
        if rows is None:
            return Polytope.empty(dim_out)
        A, b = _dedupe(*rows)
        P = Polytope(A, b, A.shape[1])
        if P.is_empty:
            return Polytope.empty(dim_out)
        P = remove_redundancy(P)
        A, b = P.A, P.b
    return Polytope(A, b, dim_out)


def project(P: Polytope, keep: Iterable[int]) -> Polytope:
    """Image of ``P`` under the coordinate projection onto ``keep`` (0-based, in given order)."""
    keep = list(keep)
    if not keep:
        raise ValueError("projection needs at least one kept coordinate")
    if len(set(keep)) != len(keep) or min(keep) < 0 or max(keep) >= P.dim:
        raise ValueError(f"invalid coordinates {keep} for dim {P.dim}")
    if P.is_empty:
        return Polytope.empty(len(keep))
    drop = [j for j in range(P.dim) if j not in keep]
    Q = _eliminate_many(P.A, P.b, drop, len(keep)) if drop else remove_redundancy(P)
    if Q.is_empty:
        return Polytope.empty(len(keep))
    order = np.argsort(np.argsort(keep))
    return Polytope(Q.A[:, order], Q.b, len(keep))


# -- set operations -------------------------------------------------------------
def intersect(P: Polytope, Q: Polytope) -> Polytope:
    _check_dims(P, Q)
    if P.is_empty or Q.is_empty:
        return Polytope.empty(P.dim)
    R = Polytope(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]), P.dim)
    return remove_redundancy(R)


def affine_image(P: Polytope, M, offset=None) -> Polytope:
    """``{M z + c : z in P}``; constraint pullback when ``M`` is invertible, lift-and-project otherwise."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    k, n = M.shape
    if n != P.dim:
        raise ValueError(f"map with {n} columns applied to dim {P.dim}")
    c = np.zeros(k) if offset is None else np.asarray(offset, dtype=float).reshape(k)
    if P.is_empty:
        return Polytope.empty(k)
    if k == n and np.linalg.cond(M) < 1e10:
        Minv = np.linalg.inv(M)
        A = P.A @ Minv
        return remove_redundancy(Polytope(A, P.b + A @ c, k))
    # lifted variables (w, z): z in P, w - M z = c
    A = np.vstack([
        np.hstack([np.zeros((P.n_constraints, k)), P.A]),
        np.hstack([np.eye(k), -M]),
        np.hstack([-np.eye(k), M]),
    ])
    b = np.concatenate([P.b, c, -c])
    rows = _normalize_rows(A, b)
    return _eliminate_many(*rows, drop=list(range(k, k + n)), dim_out=k)


def minkowski_sum(P: Polytope, Q: Polytope) -> Polytope:
    """``P ⊕ Q``; translations are handled directly, general pairs by lift-and-project."""
    _check_dims(P, Q)
    if P.is_empty or Q.is_empty:
        return Polytope.empty(P.dim)
    for X, Y in ((P, Q), (Q, P)):
        pt = is_singleton(Y)
        if pt is not None:
            return X.translate(pt)
    n = P.dim
    # lifted variables (z, p): p in P, z - p in Q
    A = np.vstack([
        np.hstack([np.zeros((P.n_constraints, n)), P.A]),
        np.hstack([Q.A, -Q.A]),
    ])
    b = np.concatenate([P.b, Q.b])
    return _eliminate_many(A, b, drop=list(range(n, 2 * n)), dim_out=n)


def pontryagin_diff(P: Polytope, Q: Polytope, reduce: bool = True) -> Polytope:
    """``P ⊖ Q = {z : z + q in P for all q in Q}`` by per-row support subtraction."""
    _check_dims(P, Q)
    if Q.is_empty:
        raise ValueError("erosion by an empty set is unbounded")
    if P.is_empty:
        return Polytope.empty(P.dim)
    h = support_many(Q, P.A)
    if not np.all(np.isfinite(h)):
        return Polytope.empty(P.dim)
    R = Polytope(P.A, P.b - h, P.dim)
    if R.is_empty:
        return Polytope.empty(P.dim)
    return remove_redundancy(R) if reduce else R


def pontryagin_diff_image(P: Polytope, Q: Polytope, M, reduce: bool = True) -> Polytope:
    """``P ⊖ (M·Q)`` without materializing the image: ``support(M·Q, a) = support(Q, Mᵀa)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (P.dim, Q.dim):
        raise ValueError(f"map shape {M.shape} incompatible with dims {P.dim}, {Q.dim}")
    if Q.is_empty:
        raise ValueError("erosion by an empty set is unbounded")
    if P.is_empty:
        return Polytope.empty(P.dim)
    h = support_many(Q, P.A @ M)
    if not np.all(np.isfinite(h)):
        return Polytope.empty(P.dim)
    R = Polytope(P.A, P.b - h, P.dim)
    if R.is_empty:
        return Polytope.empty(P.dim)
    return remove_redundancy(R) if reduce else R


# -- reporting helpers (vertex based, plotting and inspection only) ----------------
def chebyshev_center(P: Polytope):
    """Center and radius of the largest inscribed ball (radius < 0 when empty)."""
    if P.is_empty:
        return None, -1.0
    n = P.dim
    A = np.hstack([P.A, np.ones((P.n_constraints, 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A = np.vstack([A, c])
    b = np.concatenate([P.b, [1e6]])
    res = lp.maximize(c, A, b)
    if res.status != lp.OPTIMAL:
        return None, -1.0
    return res.x[:n], float(res.x[-1])


def vertices_2d(P: Polytope) -> np.ndarray:
    """Counter-clockwise vertices of a bounded, full-dimensional planar polytope."""
    from scipy.spatial import HalfspaceIntersection

    if P.dim != 2:
        raise ValueError("vertices_2d needs a planar polytope")
    center, radius = chebyshev_center(P)
    if center is None or radius <= 1e-12:
        return np.zeros((0, 2))
    hs = HalfspaceIntersection(np.hstack([P.A, -P.b[:, None]]), center)
    V = hs.intersections
    ang = np.arctan2(V[:, 1] - center[1], V[:, 0] - center[0])
    V = V[np.argsort(ang)]
    keep = np.ones(len(V), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(V, axis=0), axis=1) > 1e-12
    return V[keep]


def volume(P: Polytope) -> float:
    """Lebesgue measure via vertex enumeration; 0 for lower-dimensional or empty sets."""
    from scipy.spatial import ConvexHull, HalfspaceIntersection

    center, radius = chebyshev_center(P)
    if center is None or radius <= 1e-12:
        return 0.0
    if P.dim == 1:
        return float(support(P, [1.0]) + support(P, [-1.0]))
    hs = HalfspaceIntersection(np.hstack([P.A, -P.b[:, None]]), center)
    return float(ConvexHull(hs.intersections).volume)
