"""Discrete-time plant, its constraint/disturbance sets, and stepping helpers."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

from .geometry import Polytope, affine_image, contains, minkowski_sum


def discretize_forward_euler(Ac, Bc, Bdc, Ts: float):
    """Return ``(I + Ts*Ac, Ts*Bc, Ts*Bdc)``."""
    if not Ts > 0:
        raise ValueError(f"sampling time must be positive, got {Ts}")
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    if Ac.shape[0] != Ac.shape[1]:
        raise ValueError("continuous-time state matrix must be square")
    Bc = np.asarray(Bc, dtype=float).reshape(Ac.shape[0], -1)
    Bdc = np.asarray(Bdc, dtype=float).reshape(Ac.shape[0], -1)
    return np.eye(Ac.shape[0]) + Ts * Ac, Ts * Bc, Ts * Bdc


@dataclass(frozen=True, eq=False)
class SystemModel:
    A: np.ndarray
    B: np.ndarray
    Bd: np.ndarray
    X: Polytope
    U: Polytope
    Dx: Polytope
    Dy: Polytope
    Ts: float = 1.0
    # Also inflate the output prediction by (-A)·Dy; off to keep the printed prediction set.
    propagate_measurement_noise: bool = False
    name: str = "model"

    def __post_init__(self):
        for attr in ("A", "B", "Bd"):
            arr = np.atleast_2d(np.asarray(getattr(self, attr), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n or self.Bd.shape[0] != n:
            raise ValueError("B and Bd need as many rows as A")
        expected = {"X": n, "U": self.B.shape[1], "Dx": self.Bd.shape[1], "Dy": n}
        for attr, dim in expected.items():
            P = getattr(self, attr)
            if P.dim != dim:
                raise ValueError(f"{attr} has dimension {P.dim}, expected {dim}")
            if P.is_empty or not contains(P, np.zeros(dim)):
                raise ValueError(f"{attr} must be nonempty and contain the origin")
        if not self.Ts > 0:
            raise ValueError("Ts must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def noise_set(self) -> Polytope:
        """``Bd·Dx ⊕ Dy`` (optionally ``⊕ (-A)·Dy``), the shape of every prediction set."""
        W = minkowski_sum(affine_image(self.Dx, self.Bd), self.Dy)
        if self.propagate_measurement_noise:
            W = minkowski_sum(W, affine_image(self.Dy, -self.A))
        return W

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Bd": self.Bd.tolist(),
            "Ts": self.Ts,
            "X": self.X.to_dict(),
            "U": self.U.to_dict(),
            "Dx": self.Dx.to_dict(),
            "Dy": self.Dy.to_dict(),
            "propagate_measurement_noise": self.propagate_measurement_noise,
        }


def step(model: SystemModel, x, u, dx):
    """``A x + B u + Bd dx``."""
    x = np.asarray(x, dtype=float).reshape(model.n)
    u = np.asarray(u, dtype=float).reshape(model.m)
    dx = np.asarray(dx, dtype=float).reshape(model.Bd.shape[1])
    return model.A @ x + model.B @ u + model.Bd @ dx


def measure(x, dy):
    return np.asarray(x, dtype=float) + np.asarray(dy, dtype=float)


def nominal_successor(model: SystemModel, y, u):
    return model.A @ np.asarray(y, dtype=float).reshape(model.n) + model.B @ np.asarray(u, dtype=float).reshape(model.m)


def output_prediction_set(model: SystemModel, y, u) -> Polytope:
    """``{A y + B u} ⊕ Bd·Dx ⊕ Dy``: where the next honest measurement must land."""
    return model.noise_set.translate(nominal_successor(model, y, u))


def sample_uniform(P: Polytope, rng: np.random.Generator, max_tries: int = 10_000):
    """Uniform draw from a bounded polytope by bounding-box rejection.

    Degenerate directions (zero-width box sides) are fixed at their value,
    so singletons such as ``{0}`` are handled without rejection.
    """
    from .geometry import support_many

    eye = np.eye(P.dim)
    hi = support_many(P, eye)
    lo = -support_many(P, -eye)
    for _ in range(max_tries):
        z = lo + (hi - lo) * rng.random(P.dim)
        if contains(P, z):
            return z
    raise RuntimeError("rejection sampling failed; polytope too thin for its bounding box")


class DisturbanceSampler:
    """Seeded uniform sampler for process and measurement disturbances."""

    def __init__(self, model: SystemModel, seed):
        from .geometry import is_singleton, support_many

        self._rng = np.random.default_rng(seed)
        self._sets = {}
        for key, P in (("dx", model.Dx), ("dy", model.Dy)):
            eye = np.eye(P.dim)
            hi = support_many(P, eye)
            lo = -support_many(P, -eye)
            pt = is_singleton(P)
            is_box = pt is None and _is_box(P, lo, hi)
            self._sets[key] = (P, lo, hi, pt, is_box)

    def draw(self, key: str) -> np.ndarray:
        P, lo, hi, pt, is_box = self._sets[key]
        if pt is not None:
            return np.array(pt, dtype=float)
        if is_box:
            return lo + (hi - lo) * self._rng.random(P.dim)
        return sample_uniform(P, self._rng)

    def dx(self) -> np.ndarray:
        return self.draw("dx")

    def dy(self) -> np.ndarray:
        return self.draw("dy")


def _is_box(P: Polytope, lo, hi) -> bool:
    return Polytope.box(lo, hi).n_constraints == P.n_constraints and all(
        np.count_nonzero(np.abs(a) > 1e-12) == 1 for a in P.A
    )


# -- model files ---------------------------------------------------------------
def polytope_from_spec(spec, dim: int | None = None) -> Polytope:
    """Build a polytope from a file entry: ``{lower, upper}``, ``{bound}``, ``{point}`` or ``{rows}``."""
    if isinstance(spec, Polytope):
        return spec
    if "rows" in spec:
        return Polytope.from_dict({"dim": spec.get("dim", dim), "rows": spec["rows"]})
    if "bound" in spec:
        return Polytope.symmetric_box(spec["bound"])
    if "point" in spec:
        return Polytope.point(spec["point"])
    if "lower" in spec and "upper" in spec:
        return Polytope.box(spec["lower"], spec["upper"])
    raise ValueError(f"cannot interpret polytope entry {spec!r}")


def model_from_dict(d: dict) -> SystemModel:
    if "continuous" in d:
        c = d["continuous"]
        A, B, Bd = discretize_forward_euler(c["A"], c["B"], c["Bd"], float(d["Ts"]))
    else:
        A, B, Bd = (np.asarray(d[k], dtype=float) for k in ("A", "B", "Bd"))
    n = A.shape[0]
    cons = d.get("constraints", d)
    dist = d.get("disturbances", d)
    X = polytope_from_spec(cons.get("x", cons.get("X")), n)
    U = polytope_from_spec(cons.get("u", cons.get("U")), np.atleast_2d(B).shape[1])
    Dx = polytope_from_spec(dist.get("dx", dist.get("Dx")), np.atleast_2d(Bd).shape[1])
    dy_spec = dist.get("dy", dist.get("Dy"))
    Dy = Polytope.point(np.zeros(n)) if dy_spec is None else polytope_from_spec(dy_spec, n)
    return SystemModel(
        A=A, B=B, Bd=Bd, X=X, U=U, Dx=Dx, Dy=Dy,
        Ts=float(d.get("Ts", 1.0)),
        propagate_measurement_noise=bool(d.get("propagate_measurement_noise", False)),
        name=str(d.get("name", "model")),
    )


def load_model(path) -> SystemModel:
    path = Path(path)
    with path.open() as fh:
        d = yaml.safe_load(fh)
    if "X" in d and isinstance(d["X"], dict) and "rows" in d["X"] and "dim" in d["X"]:
        d = dict(d)
        for key in ("X", "U", "Dx", "Dy"):
            d[key] = Polytope.from_dict(d[key])
    return model_from_dict(d)


def bundled_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def example_model() -> SystemModel:
    """The double-integrator-like benchmark plant shipped with the package."""
    return load_model(bundled_path("example_model.yaml"))
