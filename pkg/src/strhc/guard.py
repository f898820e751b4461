"""Detector on the controller side, Pre-/Post-Check firewalls and the smart actuator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import ATTACK, NO_ATTACK
from .geometry import TOL, Polytope, contains
from .reach import ControllableFamily

NORMAL = "normal"
HOLD_PREVIOUS = "hold_previous"
ZERO_INPUT = "zero_input"


def detect(last_prediction_set: Polytope | None, y_tilde_next, tol: float = TOL) -> str:
    """``attack`` unless the received measurement lies in the frozen prediction set.

    A missing packet (``None``) is an attack by convention.
    """
    if y_tilde_next is None:
        return ATTACK
    if last_prediction_set is None:
        return NO_ATTACK
    return NO_ATTACK if contains(last_prediction_set, y_tilde_next, tol) else ATTACK


def pre_check(family: ControllableFamily, i_hat: int, u_tilde, tol: float = TOL) -> bool:
    """Is ``u_tilde`` an input the controller could have sent at some level up to ``i_hat``?

    The largest level is tested first; the terminal-law images ``K_j·T[0]``
    stand in for level 0. A missing packet passes (there is nothing to check).
    """
    if u_tilde is None:
        return True
    u = np.asarray(u_tilde, dtype=float)
    for i in range(min(i_hat, family.N), 0, -1):
        if contains(family.uset(i), u, tol):
            return True
    return any(contains(P, u, tol) for P in family.terminal_inputs)


def post_check(family: ControllableFamily, i_hat: int, y, tol: float = TOL) -> bool:
    """``y ∈ T[i_hat]`` (the union of rings up to ``i_hat`` by nesting)."""
    return contains(family.T[min(max(i_hat, 0), family.N)], np.asarray(y, dtype=float), tol)


@dataclass(eq=False)
class GuardState:
    i_hat: int
    u_prev: np.ndarray
    mode: str = NORMAL
    last_prediction_set: Polytope | None = None
    last_pre: bool = True
    last_post: bool = True

    def reinitialize(self, level: int, u_c) -> None:
        """Resynchronize with the controller (start and every recovery)."""
        self.i_hat = int(level)
        self.u_prev = np.asarray(u_c, dtype=float).copy()
        self.mode = NORMAL


def actuator_step(guard: GuardState, family: ControllableFamily, incoming, y) -> np.ndarray:
    """Apply the Actuators algorithm for one step and return the input sent to the plant.

    ``incoming`` is the received command or ``None`` when nothing arrived;
    ``y`` is the actuator's local measurement used by the Post-Check.
    Zero-input mode persists until :meth:`GuardState.reinitialize`.
    """
    pre = pre_check(family, guard.i_hat, incoming)
    post = post_check(family, guard.i_hat, y)
    guard.last_pre, guard.last_post = pre, post
    if guard.mode == ZERO_INPUT:
        u = np.zeros_like(guard.u_prev)
    elif pre and post:
        if incoming is None:
            u = guard.u_prev
            guard.mode = HOLD_PREVIOUS
        else:
            u = np.asarray(incoming, dtype=float)
            guard.i_hat = max(guard.i_hat - 1, 0)
            guard.mode = NORMAL
    elif not pre:
        u = guard.u_prev
        guard.mode = HOLD_PREVIOUS
    else:
        u = np.zeros_like(guard.u_prev)
        guard.mode = ZERO_INPUT
    guard.u_prev = np.array(u, dtype=float)
    return guard.u_prev.copy()
