"""Linear-programming seam used by every polytope operation.

All feasibility and support queries go through :func:`maximize`. The
default backend is SciPy's HiGHS interface; another solver can be installed
with :func:`set_backend` as long as it honours the same return contract.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import linprog

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LPResult(NamedTuple):
    status: str
    value: float
    x: np.ndarray | None


def _highs_maximize(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> LPResult:
    n = c.shape[0]
    res = linprog(
        -c,
        A_ub=A if A.size else None,
        b_ub=b if A.size else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status == 0:
        return LPResult(OPTIMAL, float(-res.fun), np.asarray(res.x, dtype=float))
    if res.status == 2:
        return LPResult(INFEASIBLE, -np.inf, None)
    if res.status == 3:
        return LPResult(UNBOUNDED, np.inf, None)
    # HiGHS occasionally reports "infeasible or unbounded"; settle it with a
    # zero-objective feasibility solve.
    feas = linprog(
        np.zeros(n), A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs"
    )
    if feas.status == 2:
        return LPResult(INFEASIBLE, -np.inf, None)
    if feas.status == 0 and res.status == 4:
        return LPResult(UNBOUNDED, np.inf, None)
    raise RuntimeError(f"LP backend failed: {res.message}")


_backend: Callable[[np.ndarray, np.ndarray, np.ndarray], LPResult] = _highs_maximize


def set_backend(fn: Callable[[np.ndarray, np.ndarray, np.ndarray], LPResult] | None) -> None:
    """Install ``fn(c, A, b) -> LPResult`` as the solver; ``None`` restores HiGHS."""
    global _backend
    _backend = _highs_maximize if fn is None else fn


def maximize(c, A, b) -> LPResult:
    """Maximize ``c @ z`` subject to ``A @ z <= b`` with ``z`` free."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.shape[0])
    b = np.asarray(b, dtype=float).reshape(-1)
    return _backend(c, A, b)
