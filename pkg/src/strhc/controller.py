"""Online receding-horizon law with randomized costs and the attack/re-encryption automaton."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .geometry import TOL, Polytope, chebyshev_center, contains, support_many
from .model import SystemModel
from .reach import ControllableFamily, certify_invariance

logger = logging.getLogger(__name__)

NO_ATTACK = "no_attack"
ATTACK = "attack"


class OutOfDomain(RuntimeError):
    """The measurement lies outside the largest ring; feasibility is lost."""

    def __init__(self, y, message: str | None = None):
        self.y = np.asarray(y, dtype=float)
        super().__init__(message or f"measurement {self.y.tolist()} is outside every ring")


class Infeasible(RuntimeError):
    """The per-step program has no solution at the requested level."""


# -- cost family -----------------------------------------------------------------
@dataclass(eq=False)
class CostFamily:
    """``J_j(u) = (u - c_j)ᵀ H_j (u - c_j)`` for ``j < Nj`` plus one terminal gain per index.

    Indices are 0-based throughout.
    """

    H: list[np.ndarray]
    c: list[np.ndarray]
    terminal_laws: list[np.ndarray]

    def __post_init__(self):
        if not (len(self.H) == len(self.c) == len(self.terminal_laws)) or not self.H:
            raise ValueError("H, c and terminal_laws must have the same nonzero length")
        self.H = [np.atleast_2d(np.asarray(H, dtype=float)) for H in self.H]
        self.c = [np.asarray(c, dtype=float).reshape(-1) for c in self.c]
        self.terminal_laws = [np.atleast_2d(np.asarray(K, dtype=float)) for K in self.terminal_laws]
        for H in self.H:
            if not np.allclose(H, H.T) or np.linalg.eigvalsh(H).min() <= 0:
                raise ValueError("every cost weight must be symmetric positive definite")

    @property
    def Nj(self) -> int:
        return len(self.H)

    def cost(self, j: int, u) -> float:
        d = np.asarray(u, dtype=float).reshape(-1) - self.c[j]
        return float(d @ self.H[j] @ d)

    @classmethod
    def generate(
        cls,
        model: SystemModel,
        family: ControllableFamily,
        Nj: int = 4,
        seed=None,
        offset_scale: float = 0.2,
        certify: bool = True,
    ) -> "CostFamily":
        """Draw weights and offsets from ``seed``; terminal laws cycle through the family's gains.

        Offsets are uniform in ``offset_scale`` times the input box. A gain
        that fails the invariance certificate on ``T[0]`` is replaced by the
        first gain.
        """
        if Nj < 1:
            raise ValueError("Nj must be positive")
        if not family.gains:
            raise ValueError("the family carries no terminal gains")
        rng = np.random.default_rng(seed)
        eye = np.eye(model.m)
        u_hi = support_many(model.U, eye)
        u_lo = -support_many(model.U, -eye)
        mid, half = (u_hi + u_lo) / 2, (u_hi - u_lo) / 2
        H, c, laws = [], [], []
        base = family.gains[0]
        for j in range(Nj):
            G = rng.normal(size=(model.m, model.m))
            H.append(G @ G.T + 0.5 * eye if model.m > 1 else np.array([[rng.uniform(0.5, 2.0)]]))
            c.append(mid + offset_scale * half * rng.uniform(-1.0, 1.0, size=model.m))
            K = family.gains[j % len(family.gains)]
            if certify and j > 0 and not certify_invariance(family.T[0], model, K):
                logger.warning("terminal law %d failed certification; using the base gain", j)
                K = base
            laws.append(K)
        return cls(H=H, c=c, terminal_laws=laws)

    def restricted(self, Nj: int) -> "CostFamily":
        """The first ``Nj`` members (``Nj = 1`` disables watermarking)."""
        return CostFamily(H=self.H[:Nj], c=self.c[:Nj], terminal_laws=self.terminal_laws[:Nj])


# -- per-step laws ---------------------------------------------------------------
def set_level_index(family: ControllableFamily, y) -> int:
    """Smallest ring index whose set contains ``y``; ties go to the smaller index."""
    i = family.level_of(np.asarray(y, dtype=float))
    if i is None:
        raise OutOfDomain(y)
    return i


def _feasible_inputs(family: ControllableFamily, level: int, y):
    """``(G, h)`` with ``G u <= h`` describing ``{u : (y, u) ∈ Xi^level}``."""
    Xi = family.xi(level)
    n = np.asarray(y).size
    return Xi.A[:, n:], Xi.b - Xi.A[:, :n] @ np.asarray(y, dtype=float)


def solve_command(
    family: ControllableFamily,
    model: SystemModel,
    y,
    level: int,
    costs: CostFamily,
    cost_index: int,
) -> np.ndarray:
    """Minimize ``J_{cost_index}`` over ``{u : (y, u) ∈ Xi^level}``.

    Single-input plants are solved exactly (the minimizer is the offset
    clipped to the feasible interval); otherwise SLSQP from the feasible
    Chebyshev point.
    """
    if level < 1:
        raise ValueError("solve_command needs level >= 1; use terminal_control in T[0]")
    y = np.asarray(y, dtype=float).reshape(model.n)
    G, h = _feasible_inputs(family, level, y)
    c, H = costs.c[cost_index], costs.H[cost_index]
    if model.m == 1:
        return _solve_interval(G[:, 0], h, c[0]).reshape(1)
    return _solve_qp(G, h, H, c)


def _solve_interval(g, h, target: float) -> np.ndarray:
    lo, hi = -np.inf, np.inf
    for gi, hi_ in zip(g, h):
        if abs(gi) <= 1e-14:
            if hi_ < -TOL:
                raise Infeasible("measurement violates an input-free constraint of the ring")
            continue
        bound = hi_ / gi
        if gi > 0:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    if lo > hi + TOL:
        raise Infeasible(f"empty input interval [{lo:.6g}, {hi:.6g}]")
    if lo > hi:
        return np.array((lo + hi) / 2)
    return np.array(min(max(target, lo), hi))


def _solve_qp(G, h, H, c) -> np.ndarray:
    P = Polytope(G, h)
    if P.is_empty:
        raise Infeasible("no input satisfies the ring constraints")
    x0, _ = chebyshev_center(P)
    res = minimize(
        lambda u: (u - c) @ H @ (u - c),
        x0,
        jac=lambda u: 2 * H @ (u - c),
        constraints=[{"type": "ineq", "fun": lambda u: P.b - P.A @ u, "jac": lambda u: -P.A}],
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 200},
    )
    u = res.x if res.success else x0
    if not contains(P, u, 10 * TOL):
        u = x0
    return np.asarray(u, dtype=float)


def terminal_control(costs: CostFamily, cost_index: int, y, model: SystemModel | None = None) -> np.ndarray:
    """``K_j y``, clipped to the input box when ``model`` is given."""
    u = costs.terminal_laws[cost_index] @ np.asarray(y, dtype=float).reshape(-1)
    if model is not None:
        eye = np.eye(model.m)
        u = np.clip(u, -support_many(model.U, -eye), support_many(model.U, eye))
    return u


# -- automaton -------------------------------------------------------------------
@dataclass(eq=False)
class ControllerAutomaton:
    """Attack status and re-encryption timer, plus the private cost-index stream."""

    T_encry: int
    rng: np.random.Generator
    status: str = NO_ATTACK
    timer: int = 0
    level: int | None = None

    @classmethod
    def seeded(cls, T_encry: int, seed) -> "ControllerAutomaton":
        if T_encry < 0:
            raise ValueError("T_encry must be nonnegative")
        return cls(T_encry=T_encry, rng=np.random.default_rng(seed))


@dataclass
class ControllerOutput:
    command: np.ndarray | None  # None while communications are interrupted
    level: int | None
    cost_index: int | None
    status: str
    timer: int
    reinitialized: bool = False


def controller_step(
    automaton: ControllerAutomaton,
    family: ControllableFamily,
    costs: CostFamily,
    model: SystemModel,
    detector_verdict: str | None,
    y_tilde,
) -> ControllerOutput:
    """One pass of the online algorithm.

    ``detector_verdict`` is ``None`` when no prediction is pending (first
    step, or right after re-initialization). On an attack verdict the
    controller stays silent for the detection step plus ``T_encry`` steps
    and re-initializes on the step after.
    """
    a = automaton
    reinit = False
    if a.status == NO_ATTACK:
        if detector_verdict == ATTACK:
            a.status = ATTACK
    else:
        if a.timer < a.T_encry:
            a.timer += 1
        else:
            a.status, a.timer, reinit = NO_ATTACK, 0, True
    if a.status == ATTACK:
        return ControllerOutput(None, None, None, a.status, a.timer)

    level = set_level_index(family, y_tilde)
    j = int(a.rng.integers(costs.Nj))
    if level == 0:
        u = terminal_control(costs, j, y_tilde, model)
    else:
        u = solve_command(family, model, y_tilde, level, costs, j)
    a.level = level
    return ControllerOutput(u, level, j, a.status, a.timer, reinit)
