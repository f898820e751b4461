"""Offline synthesis: terminal set, τ-step controllable rings, and the safe index."""
from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import solve_discrete_are

from .geometry import (
    TOL,
    Polytope,
    affine_image,
    contains,
    is_subset,
    pontryagin_diff_image,
    project,
    remove_redundancy,
    support,
    support_many,
)
from .model import SystemModel

logger = logging.getLogger(__name__)

CACHE_FORMAT = "strhc-family/1"


class SynthesisError(RuntimeError):
    """Raised when an offline set computation cannot produce a usable set."""


def lqr_gain(model: SystemModel, Q=None, R=None) -> np.ndarray:
    """Discrete LQR gain ``K`` for ``u = K x`` (identity weights by default)."""
    Q = np.eye(model.n) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(model.m) if R is None else np.asarray(R, dtype=float)
    P = solve_discrete_are(model.A, model.B, Q, R)
    return -np.linalg.solve(R + model.B.T @ P @ model.B, model.B.T @ P @ model.A)


def hold_matrices(model: SystemModel, k: int):
    """``(A^k, Σ_{j<k} A^j B)``: state after holding one input for ``k`` steps."""
    Ak = np.linalg.matrix_power(model.A, k)
    Bk = sum(np.linalg.matrix_power(model.A, j) @ model.B for j in range(k))
    return Ak, Bk


def erode_targets(T_prev: Polytope, model: SystemModel, tau: int, reduce: bool = True) -> list[Polytope]:
    """Tightened targets ``[T̃_1, ..., T̃_tau]`` for holding an input ``tau`` steps.

    ``T̃_1 = T_prev ⊖ Bd·Dx ⊖ A·Dy`` and
    ``T̃_k = T̃_{k-1} ⊖ A^{k-1}·Bd·Dx ⊖ A^k·Dy``.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    if T_prev.is_empty:
        raise SynthesisError("cannot erode an empty target")
    out = []
    cur = T_prev
    for k in range(1, tau + 1):
        Ak1 = np.linalg.matrix_power(model.A, k - 1)
        cur = pontryagin_diff_image(cur, model.Dx, Ak1 @ model.Bd, reduce=False)
        if not cur.is_empty:
            cur = pontryagin_diff_image(cur, model.Dy, Ak1 @ model.A, reduce=False)
        if cur.is_empty:
            raise SynthesisError(f"erosion step k={k} emptied the target")
        if reduce:
            cur = remove_redundancy(cur)
        out.append(cur)
    return out


def _xi_rows(model: SystemModel, eroded: Sequence[Polytope]):
    n, m = model.n, model.m
    blocks_A = [
        np.hstack([model.X.A, np.zeros((model.X.n_constraints, m))]),
        np.hstack([np.zeros((model.U.n_constraints, n)), model.U.A]),
    ]
    blocks_b = [model.X.b, model.U.b]
    for k, Tk in enumerate(eroded, start=1):
        Ak, Bk = hold_matrices(model, k)
        blocks_A.append(np.hstack([Tk.A @ Ak, Tk.A @ Bk]))
        blocks_b.append(Tk.b)
    return np.vstack(blocks_A), np.concatenate(blocks_b)


def controllable_ring(T_prev: Polytope, model: SystemModel, tau: int):
    """One ring of the τ-step recursion: ``(Xi, T, Uset, eroded)``."""
    eroded = erode_targets(T_prev, model, tau)
    A, b = _xi_rows(model, eroded)
    Xi = Polytope(A, b, model.n + model.m)
    if Xi.is_empty:
        return Polytope.empty(model.n + model.m), Polytope.empty(model.n), Polytope.empty(model.m), eroded
    Xi = remove_redundancy(Xi)
    T = project(Xi, range(model.n))
    Uset = project(Xi, range(model.n, model.n + model.m))
    return Xi, T, Uset, eroded


def one_step_set(T_prev: Polytope, model: SystemModel):
    """Robust one-step controllable set of ``T_prev``: ``(Xi, T, Uset)``."""
    Xi, T, Uset, _ = controllable_ring(T_prev, model, 1)
    if T.is_empty:
        raise SynthesisError("one-step controllable set is empty")
    return Xi, T, Uset


def compute_rpi(
    model: SystemModel,
    gains,
    tau: int = 1,
    max_iter: int = 200,
    region: Polytope | None = None,
) -> Polytope:
    """Largest set in ``X`` (optionally ``∩ region``) kept invariant by every gain.

    For each gain ``K`` the set is robustly invariant under ``u = K y`` and,
    when ``tau > 1``, also under holding ``u = K y(t)`` for up to ``tau``
    steps against the same tightened targets the ring recursion uses. The
    second property is what makes the terminal set nest inside the first ring.
    """
    gains = _as_gain_list(gains, model)
    n = model.n
    rows_A = [model.X.A]
    rows_b = [model.X.b]
    if region is not None:
        rows_A.append(region.A)
        rows_b.append(region.b)
    for K in gains:
        # input admissibility of K(x + dy) for every dy
        hK = support_many(model.Dy, model.U.A @ K)
        rows_A.append(model.U.A @ K)
        rows_b.append(model.U.b - hK)
    O = Polytope(np.vstack(rows_A), np.concatenate(rows_b), n)
    if O.is_empty:
        raise SynthesisError("state/input constraints admit no terminal region")
    O = remove_redundancy(O)
    closed = [model.A + model.B @ K for K in gains]
    for it in range(max_iter):
        new_A = [O.A]
        new_b = [O.b]
        for K, Acl in zip(gains, closed):
            # one step of u = K(x + dy): x+ = Acl x + B K dy + Bd dx
            Ow = pontryagin_diff_image(O, model.Dx, model.Bd, reduce=False)
            if not Ow.is_empty:
                Ow = pontryagin_diff_image(Ow, model.Dy, model.B @ K, reduce=False)
            if Ow.is_empty:
                raise SynthesisError("disturbance erosion empties the terminal candidate")
            new_A.append(Ow.A @ Acl)
            new_b.append(Ow.b)
            if tau > 1:
                eroded = erode_targets(O, model, tau, reduce=False)
                for k, Tk in enumerate(eroded, start=1):
                    Ak, Bk = hold_matrices(model, k)
                    new_A.append(Tk.A @ (Ak + Bk @ K))
                    new_b.append(Tk.b)
        cand = Polytope(np.vstack(new_A), np.concatenate(new_b), n)
        if cand.is_empty:
            raise SynthesisError("terminal set iteration became empty")
        cand = remove_redundancy(cand)
        if is_subset(O, cand):
            logger.debug("terminal set converged after %d iterations", it + 1)
            return cand
        O = cand
    raise SynthesisError(f"terminal set iteration did not converge within {max_iter} iterations")


def _as_gain_list(gains, model: SystemModel) -> list[np.ndarray]:
    if isinstance(gains, np.ndarray) and gains.ndim == 2:
        gains = [gains]
    out = [np.asarray(K, dtype=float).reshape(model.m, model.n) for K in gains]
    if not out:
        raise ValueError("at least one terminal gain is required")
    return out


def certify_invariance(T0: Polytope, model: SystemModel, K, tol: float = TOL) -> bool:
    """One-step robust invariance of ``T0`` under ``u = K(x + dy)`` plus input admissibility."""
    K = np.asarray(K, dtype=float).reshape(model.m, model.n)
    Acl = model.A + model.B @ K
    for a, bi in zip(T0.A, T0.b):
        h = (
            support(T0, Acl.T @ a)
            + support(model.Dx, model.Bd.T @ a)
            + support(model.Dy, (model.B @ K).T @ a)
        )
        if h > bi + tol:
            return False
    for g, hi in zip(model.U.A, model.U.b):
        if support(T0, K.T @ g) + support(model.Dy, K.T @ g) > hi + tol:
            return False
    return True


@dataclass(eq=False)
class ControllableFamily:
    """Rings ``T[0] ⊆ T[1] ⊆ ... ⊆ T[N]`` with their extended-space descriptions.

    ``Xi[i-1]``, ``Uset[i-1]`` and ``eroded[i-1]`` belong to ring ``i``
    (``1 <= i <= N``); ``eroded[i-1]`` holds the tightened targets of
    ``T[i-1]`` used to build ring ``i``. ``terminal_inputs[j]`` is
    ``K_j·T[0]``, the inputs the terminal laws can emit.
    """

    tau: int
    T: list[Polytope]
    Xi: list[Polytope]
    Uset: list[Polytope]
    eroded: list[list[Polytope]]
    gains: list[np.ndarray]
    T_viol: int
    i_max: int = 0
    model_hash: str = ""
    terminal_inputs: list[Polytope] = field(default_factory=list)
    key: str = ""

    @property
    def N(self) -> int:
        return len(self.T) - 1

    def xi(self, i: int) -> Polytope:
        return self.Xi[i - 1]

    def uset(self, i: int) -> Polytope:
        return self.Uset[i - 1]

    def check_nesting(self, tol: float = TOL) -> bool:
        return all(is_subset(self.T[i - 1], self.T[i], tol) for i in range(1, self.N + 1))

    def level_of(self, y) -> int | None:
        """Smallest ring index containing ``y`` (``None`` outside ``T[N]``)."""
        for i, Ti in enumerate(self.T):
            if contains(Ti, y):
                return i
        return None

    def safe_target(self) -> int:
        return min(self.N, self.i_max + self.T_viol)

    # -- persistence -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": CACHE_FORMAT,
            "header": {
                "model_hash": self.model_hash,
                "key": self.key,
                "tau": self.tau,
                "N": self.N,
                "T_viol": self.T_viol,
                "i_max": self.i_max,
                "gains": [K.tolist() for K in self.gains],
            },
            "T": [P.to_dict() for P in self.T],
            "Xi": [P.to_dict() for P in self.Xi],
            "Uset": [P.to_dict() for P in self.Uset],
            "eroded": [[P.to_dict() for P in ring] for ring in self.eroded],
            "terminal_inputs": [P.to_dict() for P in self.terminal_inputs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControllableFamily":
        if d.get("format") != CACHE_FORMAT:
            raise ValueError(f"unsupported cache format {d.get('format')!r}")
        h = d["header"]
        return cls(
            tau=int(h["tau"]),
            T=[Polytope.from_dict(p) for p in d["T"]],
            Xi=[Polytope.from_dict(p) for p in d["Xi"]],
            Uset=[Polytope.from_dict(p) for p in d["Uset"]],
            eroded=[[Polytope.from_dict(p) for p in ring] for ring in d["eroded"]],
            gains=[np.asarray(K, dtype=float) for K in h["gains"]],
            T_viol=int(h["T_viol"]),
            i_max=int(h["i_max"]),
            model_hash=h.get("model_hash", ""),
            terminal_inputs=[Polytope.from_dict(p) for p in d.get("terminal_inputs", [])],
            key=h.get("key", ""),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ControllableFamily":
        return cls.from_dict(json.loads(Path(path).read_text()))


def tau_step_family(
    model: SystemModel,
    T0: Polytope,
    N: int,
    tau: int,
    T_viol: int | None = None,
    gains=(),
) -> ControllableFamily:
    """Grow ``N`` τ-step controllable rings around ``T0``.

    Growth stops early (with a warning) when a ring is empty or stops growing.
    ``i_max`` is left at 0; see :func:`compute_i_max`.
    """
    if N < 1 or tau < 1:
        raise ValueError("N and tau must be positive")
    T, Xis, Us, eroded_all = [T0], [], [], []
    for i in range(1, N + 1):
        try:
            Xi, Ti, Ui, eroded = controllable_ring(T[-1], model, tau)
        except SynthesisError as exc:
            warnings.warn(f"ring {i}: {exc}; truncating family at N={i - 1}")
            break
        if Ti.is_empty:
            warnings.warn(f"ring {i} is empty; truncating family at N={i - 1}")
            break
        if is_subset(Ti, T[-1]):
            warnings.warn(f"ring {i} equals ring {i - 1}; truncating family at N={i - 1}")
            break
        T.append(Ti)
        Xis.append(Xi)
        Us.append(Ui)
        eroded_all.append(eroded)
        logger.debug("ring %d: %d facets", i, Ti.n_constraints)
    if len(T) == 1:
        raise SynthesisError("no controllable ring could be built around the terminal set")
    gains = [np.asarray(K, dtype=float).reshape(model.m, model.n) for K in gains]
    fam = ControllableFamily(
        tau=tau, T=T, Xi=Xis, Uset=Us, eroded=eroded_all, gains=gains,
        T_viol=tau if T_viol is None else T_viol, model_hash=model.fingerprint(),
        terminal_inputs=[affine_image(T0, K) for K in gains],
    )
    return fam


def compute_i_max(family: ControllableFamily, model: SystemModel, tol: float = TOL) -> int:
    """Largest ``i`` whose rings all survive one unknown input plus free evolution.

    For every ring ``l <= i`` and ``k = 1..tau`` the set
    ``A^k T[l] ⊕ Σ_{j<k} A^j Bd Dx ⊕ A^{k-1} B U`` must lie in
    ``T[min(N, l + T_viol)]``; the union of target rings collapses to the
    largest one because nesting is checked first.
    """
    if not family.check_nesting():
        raise SynthesisError("family is not nested; the safe index is undefined")
    N, tau = family.N, family.tau
    powers = [np.linalg.matrix_power(model.A, k) for k in range(tau + 1)]
    i_max = 0
    for i in range(1, N + 1):
        target = family.T[min(N, i + family.T_viol)]
        ok = True
        for k in range(1, tau + 1):
            M_state = powers[k]
            M_input = powers[k - 1] @ model.B
            for g, h in zip(target.A, target.b):
                total = support(family.T[i], M_state.T @ g)
                total += sum(support(model.Dx, (powers[j] @ model.Bd).T @ g) for j in range(k))
                total += support(model.U, M_input.T @ g)
                if total > h + tol:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            break
        i_max = i
    if i_max == 0:
        logger.warning("safe index is 0: even the first ring fails the free-evolution test")
    return i_max


def family_key(model: SystemModel, tau: int, N: int, T_viol: int, gains, extra: dict | None = None) -> str:
    payload = {
        "model": model.fingerprint(),
        "tau": tau,
        "N": N,
        "T_viol": T_viol,
        "gains": [np.asarray(K, dtype=float).round(15).tolist() for K in gains],
        "extra": extra or {},
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def synthesize(
    model: SystemModel,
    tau: int,
    N: int,
    T_viol: int,
    gains,
    rpi_region: Polytope | None = None,
    max_iter: int = 200,
) -> ControllableFamily:
    """The full offline pass: terminal set, rings, safe index."""
    gains = _as_gain_list(gains, model)
    T0 = compute_rpi(model, gains, tau=tau, max_iter=max_iter, region=rpi_region)
    fam = tau_step_family(model, T0, N, tau, T_viol=T_viol, gains=gains)
    fam.i_max = compute_i_max(fam, model)
    return fam
