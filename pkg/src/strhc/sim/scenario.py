"""Scenario and synthesis configuration, loaded from YAML."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..adversary import AttackAction, validate_script
from ..geometry import Polytope, contains
from ..model import SystemModel, bundled_path, load_model, polytope_from_spec
from ..reach import ControllableFamily, family_key, lqr_gain, synthesize

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """A scenario violates its own timing or start-region requirements."""


@dataclass(frozen=True)
class SynthConfig:
    """Offline parameters. Terminal gains are ``scale * K_lqr`` for each entry of ``gain_scales``."""

    tau: int = 4
    N: int = 60
    T_viol: int = 5
    Q: tuple | None = None
    R: tuple | None = None
    gain_scales: tuple = (1.0,)
    rpi_region: dict | None = None
    max_iter: int = 200

    def gains(self, model: SystemModel) -> list[np.ndarray]:
        K = lqr_gain(model, self.Q, self.R)
        return [float(s) * K for s in self.gain_scales]

    def region(self) -> Polytope | None:
        return None if self.rpi_region is None else polytope_from_spec(self.rpi_region)

    def key(self, model: SystemModel) -> str:
        extra = {"rpi_region": self.rpi_region, "max_iter": self.max_iter}
        return family_key(model, self.tau, self.N, self.T_viol, self.gains(model), extra)

    def run(self, model: SystemModel) -> ControllableFamily:
        return synthesize(
            model, self.tau, self.N, self.T_viol, self.gains(model),
            rpi_region=self.region(), max_iter=self.max_iter,
        )

    @classmethod
    def from_dict(cls, d: dict | None) -> "SynthConfig":
        d = dict(d or {})
        gain = d.pop("gain", {}) or {}
        to_t = lambda M: None if M is None else tuple(map(tuple, np.atleast_2d(np.asarray(M, dtype=float)).tolist()))
        return cls(
            tau=int(d.get("tau", 4)),
            N=int(d.get("N", 60)),
            T_viol=int(d.get("T_viol", 5)),
            Q=to_t(gain.get("Q")),
            R=to_t(gain.get("R")),
            gain_scales=tuple(float(s) for s in gain.get("scales", (1.0,))),
            rpi_region=d.get("rpi_region"),
            max_iter=int(d.get("max_iter", 200)),
        )

    def to_dict(self) -> dict:
        return {
            "tau": self.tau, "N": self.N, "T_viol": self.T_viol,
            "gain": {"Q": self.Q, "R": self.R, "scales": list(self.gain_scales)},
            "rpi_region": self.rpi_region, "max_iter": self.max_iter,
        }


def load_or_synthesize(model: SystemModel, cfg: SynthConfig, cache: str | Path | None = None) -> ControllableFamily:
    """Reuse a cached family when its key matches, otherwise synthesize (and store it if ``cache`` is set).

    ``cache`` may be a file or a directory; a directory stores ``family-<key>.json``.
    The bundled cache is consulted before synthesizing.
    """
    key = cfg.key(model)
    candidates = []
    path = None
    if cache is not None:
        cache = Path(cache)
        path = cache / f"family-{key}.json" if cache.is_dir() or not cache.suffix else cache
        candidates.append(path)
    candidates.append(bundled_path(f"family-{key}.json"))
    for p in candidates:
        if p.is_file():
            try:
                fam = ControllableFamily.load(p)
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                logger.warning("ignoring unreadable cache %s: %s", p, exc)
                continue
            if fam.key == key and fam.model_hash == model.fingerprint():
                return fam
    fam = cfg.run(model)
    fam.key = key
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fam.save(path)
    return fam


@dataclass(eq=False)
class Scenario:
    model: SystemModel
    synth: SynthConfig
    x0: np.ndarray
    horizon: int
    T_encry: int
    T_viol: int
    attacks: list[AttackAction] = field(default_factory=list)
    Nj: int = 4
    disturbance_seed: int = 0
    watermark_seed: int = 1
    attacker_seed: int = 2
    cost_offset_scale: float = 0.2
    # "safe": x0 ∈ T[min(N, i_max + T_viol)]; "domain": x0 ∈ T[N]
    start_region: str = "safe"
    name: str = "scenario"

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(self.model.n)
        if self.horizon < 0:
            raise ScenarioError("horizon must be nonnegative")
        if self.T_viol < self.T_encry:
            raise ScenarioError(f"T_viol={self.T_viol} must be at least T_encry={self.T_encry}")
        if self.T_encry != self.synth.tau:
            raise ScenarioError(f"T_encry={self.T_encry} must equal the ring hold length tau={self.synth.tau}")
        if self.Nj < 1:
            raise ScenarioError("Nj must be positive")
        if self.start_region not in ("safe", "domain"):
            raise ScenarioError(f"start_region must be 'safe' or 'domain', got {self.start_region!r}")
        self.attacks = validate_script(self.attacks, self.horizon, self.T_encry, self.T_viol)

    def start_index(self, family: ControllableFamily) -> int:
        return family.safe_target() if self.start_region == "safe" else family.N

    def check_start(self, family: ControllableFamily) -> None:
        k = self.start_index(family)
        if not contains(family.T[k], self.x0):
            raise ScenarioError(f"x0={self.x0.tolist()} is outside the start region T^{k}")

    def with_overrides(self, **kw) -> "Scenario":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return Scenario(**d)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "Scenario":
        model_ref = d.get("model", "example_model.yaml")
        if isinstance(model_ref, dict):
            from ..model import model_from_dict

            model = model_from_dict(model_ref)
        else:
            model = load_model(_resolve(model_ref, base_dir))
        synth = SynthConfig.from_dict(d.get("synth"))
        seeds = d.get("seeds", {}) or {}
        return cls(
            model=model,
            synth=synth,
            x0=d["x0"],
            horizon=int(d.get("horizon", 300)),
            T_encry=int(d.get("T_encry", synth.tau)),
            T_viol=int(d.get("T_viol", synth.T_viol)),
            attacks=[AttackAction.from_dict(a) for a in d.get("attacks", []) or []],
            Nj=int(d.get("Nj", 4)),
            disturbance_seed=int(seeds.get("disturbance", 0)),
            watermark_seed=int(seeds.get("watermark", 1)),
            attacker_seed=int(seeds.get("attacker", 2)),
            cost_offset_scale=float(d.get("cost_offset_scale", 0.2)),
            start_region=str(d.get("start_region", "safe")),
            name=str(d.get("name", "scenario")),
        )


def _resolve(ref: str, base_dir: Path | None) -> Path:
    p = Path(ref)
    if p.is_absolute() and p.is_file():
        return p
    if base_dir is not None and (base_dir / p).is_file():
        return base_dir / p
    if p.is_file():
        return p
    return bundled_path(ref)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        bundled = bundled_path(str(path))
        if bundled.is_file():
            path = bundled
    with path.open() as fh:
        d = yaml.safe_load(fh)
    return Scenario.from_dict(d, base_dir=path.parent)


def bundled_scenario() -> Scenario:
    return load_scenario(bundled_path("scenario_four_attacks.yaml"))
