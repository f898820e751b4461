"""Scripted attacks on the sensor and actuator channels.

The stealthy attacker holds a copy of the model, the rings and the cost
family (everything an insider could learn), but not the defender's
private cost-index stream: :class:`AttackerKnowledge` has no field for it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import CostFamily, Infeasible, OutOfDomain, set_level_index, solve_command, terminal_control
from .geometry import support_many
from .geometry.lp import OPTIMAL, maximize
from .model import SystemModel, nominal_successor
from .reach import ControllableFamily

SENSOR = "sensor"
ACTUATOR = "actuator"
BOTH = "both"
CHANNELS = (SENSOR, ACTUATOR, BOTH)

DOS = "dos"
FDI = "fdi_additive"
STEALTHY = "stealthy"
KINDS = (DOS, FDI, STEALTHY)


class ScriptError(ValueError):
    """An attack script breaks the timing or channel rules."""


@dataclass(frozen=True)
class AttackAction:
    """One attack window ``[t_start, t_end]`` (inclusive, in steps).

    ``payload`` is the additive vector for ``fdi_additive`` (or a mapping
    ``{"sensor": ..., "actuator": ...}`` when both channels are hit); for
    ``stealthy`` it may carry ``goal_weight`` and ``assumed_cost_index``.
    """

    t_start: int
    t_end: int
    channel: str
    kind: str
    payload: object = None

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ScriptError(f"unknown channel {self.channel!r}")
        if self.kind not in KINDS:
            raise ScriptError(f"unknown attack kind {self.kind!r}")
        if self.t_end < self.t_start or self.t_start < 0:
            raise ScriptError(f"bad window [{self.t_start}, {self.t_end}]")
        if self.kind == STEALTHY and self.channel != BOTH:
            raise ScriptError("a stealthy attack reads and writes both channels")

    def active(self, t: int) -> bool:
        return self.t_start <= t <= self.t_end

    def hits(self, channel: str) -> bool:
        return self.channel in (channel, BOTH)

    def vector(self, dim: int, channel: str | None = None) -> np.ndarray:
        p = self.payload
        if isinstance(p, dict):
            p = p.get(channel)
        if p is None:
            return np.zeros(dim)
        return np.asarray(p, dtype=float).reshape(dim)

    def to_dict(self) -> dict:
        d = {"t_start": self.t_start, "t_end": self.t_end, "channel": self.channel, "kind": self.kind}
        if self.payload is not None:
            p = self.payload
            if isinstance(p, dict):
                d["payload"] = {k: (np.asarray(v, dtype=float).tolist() if k in CHANNELS else v) for k, v in p.items()}
            else:
                d["payload"] = np.asarray(p, dtype=float).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AttackAction":
        payload = d.get("payload")
        if isinstance(payload, dict):
            payload = {k: (tuple(np.atleast_1d(np.asarray(v, dtype=float)).tolist()) if k in CHANNELS else v)
                       for k, v in payload.items()}
        elif payload is not None:
            payload = tuple(np.atleast_1d(np.asarray(payload, dtype=float)).tolist())
        return cls(int(d["t_start"]), int(d["t_end"]), str(d["channel"]), str(d["kind"]), payload)


def corrupt_actuator(u_c, action: AttackAction):
    """What the actuator receives when ``action`` is live on its channel."""
    if u_c is None or action.kind == DOS:
        return None
    u_c = np.asarray(u_c, dtype=float)
    return u_c + action.vector(u_c.size, ACTUATOR)


def corrupt_sensor(y, action: AttackAction):
    """What the controller receives when ``action`` is live on the sensor channel."""
    if y is None or action.kind == DOS:
        return None
    y = np.asarray(y, dtype=float)
    return y + action.vector(y.size, SENSOR)


def validate_script(actions, horizon: int, T_encry: int, T_viol: int) -> list[AttackAction]:
    """Sort and check a script; returns the sorted actions.

    Consecutive windows must leave room for detection right after the
    earlier one ends, ``T_encry`` silent steps, and ``T_viol`` clean steps
    after the recovery: ``onset_next >= end + T_encry + T_viol + 2``. The
    first onset may not precede ``T_viol`` (channels start freshly encrypted).
    """
    acts = sorted(actions, key=lambda a: (a.t_start, a.t_end))
    prev_end = None
    for a in acts:
        if a.t_end >= horizon:
            raise ScriptError(f"window [{a.t_start}, {a.t_end}] exceeds the horizon {horizon}")
        if prev_end is None:
            if a.t_start < T_viol:
                raise ScriptError(f"first onset {a.t_start} is earlier than T_viol={T_viol}")
        elif a.t_start < prev_end + T_encry + T_viol + 2:
            raise ScriptError(
                f"onset {a.t_start} is too close to the previous window ending at {prev_end}"
            )
        prev_end = a.t_end
    return acts


def random_script(
    rng: np.random.Generator,
    horizon: int,
    model: SystemModel,
    T_encry: int,
    T_viol: int,
    max_attacks: int = 4,
    max_len: int = 12,
    fdi_scale: float = 1.0,
    kinds=KINDS,
) -> list[AttackAction]:
    """A random script that :func:`validate_script` accepts.

    Actuator payloads are uniform in ``±fdi_scale`` times the input box;
    sensor payloads in ``±fdi_scale`` times the state box.
    """
    eye_m, eye_n = np.eye(model.m), np.eye(model.n)
    u_half = support_many(model.U, eye_m)
    x_half = support_many(model.X, eye_n)
    acts: list[AttackAction] = []
    t = T_viol + int(rng.integers(0, 10))
    for _ in range(int(rng.integers(1, max_attacks + 1))):
        length = int(rng.integers(1, max_len + 1))
        end = t + length - 1
        if end >= horizon:
            break
        kind = str(rng.choice(list(kinds)))
        if kind == STEALTHY:
            acts.append(AttackAction(t, end, BOTH, STEALTHY, {"goal_weight": float(rng.uniform(0, 1))}))
        else:
            channel = str(rng.choice(list(CHANNELS)))
            payload = None
            if kind == FDI:
                u_pay = tuple(fdi_scale * u_half * rng.uniform(-1, 1, model.m))
                y_pay = tuple(fdi_scale * x_half * rng.uniform(-1, 1, model.n))
                both = {SENSOR: y_pay, ACTUATOR: u_pay}
                payload = both if channel == BOTH else both[channel]
            acts.append(AttackAction(t, end, channel, kind, payload))
        t = end + T_encry + T_viol + 2 + int(rng.integers(0, 30))
    return acts


# -- full-knowledge stealthy attacker ---------------------------------------------
@dataclass(frozen=True, eq=False)
class AttackerKnowledge:
    """Model, rings and cost family; the assumed cost index stands in for the unknown ``j(t)``."""

    model: SystemModel
    family: ControllableFamily
    costs: CostFamily
    assumed_cost_index: int = 0

    def emulate_command(self, y_view) -> np.ndarray:
        """The command the defender would send if it used the assumed cost index."""
        j = self.assumed_cost_index % self.costs.Nj
        level = set_level_index(self.family, y_view)
        if level == 0:
            return terminal_control(self.costs, j, y_view, self.model)
        return solve_command(self.family, self.model, y_view, level, self.costs, j)


def malicious_goal(knowledge: AttackerKnowledge, x) -> np.ndarray | None:
    """``argmax |A x + B u|`` over ``A x + B u ∈ T̃_1(T[0])`` and ``u`` a terminal-law input.

    Solved as two LPs along the direction of ``A x`` (or ``B`` when
    ``A x = 0``); ``None`` when no input keeps the successor in the target.
    """
    m, fam = knowledge.model, knowledge.family
    x = np.asarray(x, dtype=float).reshape(m.n)
    Ax = m.A @ x
    d = Ax if np.linalg.norm(Ax) > 1e-12 else m.B[:, 0]
    d = d / np.linalg.norm(d)
    target = fam.eroded[0][0] if fam.eroded else fam.T[0]
    rows = [target.A @ m.B]
    rhs = [target.b - target.A @ Ax]
    if fam.terminal_inputs:
        U0 = fam.terminal_inputs[knowledge.assumed_cost_index % len(fam.terminal_inputs)]
        rows.append(U0.A)
        rhs.append(U0.b)
    else:
        rows.append(m.U.A)
        rhs.append(m.U.b)
    G, h = np.vstack(rows), np.concatenate(rhs)
    best, best_norm = None, -1.0
    for sign in (1.0, -1.0):
        res = maximize(sign * (m.B.T @ d), G, h)
        if res.status != OPTIMAL:
            continue
        norm = float(np.linalg.norm(Ax + m.B @ res.x))
        if norm > best_norm:
            best, best_norm = res.x, norm
    return best


@dataclass
class StealthyOutput:
    u_attack: np.ndarray  # additive actuator term u^a
    y_forgery: np.ndarray | None  # what the controller will be shown next step
    u_hat: np.ndarray | None  # emulated defender command
    passive: bool


def stealthy_step(
    knowledge: AttackerKnowledge, y_view, y_true, goal_weight: float = 1.0, engaged: bool = True,
) -> StealthyOutput:
    """One step of the emulate-and-forge attack.

    ``y_view`` is the measurement the controller received this step (the
    previous forgery once the attack is under way); ``y_true`` is the real
    measurement the attacker intercepts. Until the attack is ``engaged`` an
    unreachable goal keeps the attacker fully passive (no forgery either);
    once forging has begun it must continue for the attack to stay hidden.
    """
    m = knowledge.model
    zero = np.zeros(m.m)
    try:
        u_hat = knowledge.emulate_command(y_view)
    except (Infeasible, OutOfDomain):
        return StealthyOutput(zero, None, None, True)
    goal = malicious_goal(knowledge, y_true)
    if goal is None:
        forgery = nominal_successor(m, y_view, u_hat) if engaged else None
        return StealthyOutput(zero, forgery, u_hat, True)
    u_a = goal_weight * (goal - u_hat)
    return StealthyOutput(u_a, nominal_successor(m, y_view, u_hat), u_hat, False)


@dataclass(eq=False)
class StealthyAttacker:
    """Runs :func:`stealthy_step` across a window and remembers the pending forgery."""

    knowledge: AttackerKnowledge
    goal_weight: float = 1.0
    pending_forgery: np.ndarray | None = None
    engaged: bool = False
    log: list = field(default_factory=list)

    def sensor(self, y):
        """Replace the measurement with the forgery prepared on the previous step."""
        return y if self.pending_forgery is None else self.pending_forgery.copy()

    def actuator(self, u_c, y_view, y_true):
        out = stealthy_step(self.knowledge, y_view, y_true, self.goal_weight, self.engaged)
        self.engaged = self.engaged or not out.passive
        self.pending_forgery = out.y_forgery
        self.log.append(out)
        if u_c is None:
            return None
        return np.asarray(u_c, dtype=float) + out.u_attack
