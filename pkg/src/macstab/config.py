"""Experiment configuration documents (JSON) and result records."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .coding import CodingConfig
from .errors import DomainError
from .sim import ArrivalModel, Batch


def _coding_from(d):
    if not isinstance(d, dict):
        raise DomainError("'coding' must be an object")
    unknown = set(d) - {"M", "log_M", "P", "sigma2", "rho", "pe"}
    if unknown:
        raise DomainError(f"unknown coding keys: {sorted(unknown)}")
    return CodingConfig(
        M=tuple(d["M"]) if d.get("M") is not None else None,
        log_M=tuple(d["log_M"]) if d.get("log_M") is not None else None,
        P=tuple(d.get("P", ())),
        sigma2=float(d.get("sigma2", 1.0)),
        rho=float(d.get("rho", 1.0)),
        pe=float(d.get("pe", 0.01)),
    )


def _coding_to(c: CodingConfig):
    out = {"P": list(c.P), "sigma2": c.sigma2, "rho": c.rho, "pe": c.pe}
    if c.M is not None:
        out["M"] = list(c.M)
    else:
        out["log_M"] = list(c.log_M)
    return out


@dataclass
class ExperimentConfig:
    coding: CodingConfig
    K: int = 1
    W: Optional[float] = None
    arrivals: Optional[ArrivalModel] = None
    policy: dict = field(default_factory=lambda: {"synthesize": True})
    horizon: int = 1_000_000
    seed: Optional[int] = None
    decimation: int = 10_000
    sweep: Optional[dict] = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise DomainError("K must be a positive integer")
        if self.W is not None and not self.W > 0:
            raise DomainError("bandwidth W must be positive")
        if self.arrivals is not None and len(self.arrivals.queues) != self.coding.J:
            raise DomainError("arrivals must list one distribution per transmitter")
        if "p" in self.policy:
            for entry in self.policy["p"]:
                s = tuple(entry["schedule"])
                if len(s) != self.coding.J or any(v < 0 for v in s) or sum(s) > self.K:
                    raise DomainError(f"policy schedule {list(s)} is not in S_K")
        if self.sweep is not None and self.sweep.get("param") not in ("arrival", "rho"):
            raise DomainError("sweep.param must be 'arrival' or 'rho'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "coding" not in d:
            raise DomainError("config needs a 'coding' section")
        arrivals = None
        if d.get("arrivals") is not None:
            arrivals = ArrivalModel(tuple(Batch(a["kind"], a["param"]) for a in d["arrivals"]))
        run = d.get("run", {})
        policy = d.get("policy", {"synthesize": True})
        if policy == "synthesize":
            policy = {"synthesize": True}
        return cls(
            coding=_coding_from(d["coding"]),
            K=int(d.get("K", 1)),
            W=d.get("W"),
            arrivals=arrivals,
            policy=policy,
            horizon=int(run.get("horizon", 1_000_000)),
            seed=run.get("seed"),
            decimation=int(run.get("decimation", 10_000)),
            sweep=d.get("sweep"),
        )

    def to_dict(self) -> dict:
        out = {
            "coding": _coding_to(self.coding),
            "K": self.K,
            "W": self.W,
            "arrivals": [b.to_dict() for b in self.arrivals.queues] if self.arrivals else None,
            "policy": self.policy,
            "run": {"horizon": self.horizon, "seed": self.seed, "decimation": self.decimation},
            "sweep": self.sweep,
        }
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def target(self) -> Optional[tuple]:
        """Arrival-rate target for policy synthesis (explicit or the arrival means)."""
        if "target" in self.policy:
            return tuple(float(v) for v in self.policy["target"])
        if self.arrivals is not None:
            return self.arrivals.means
        return None

    def bandwidth_rates(self) -> Optional[list]:
        """Arrival rates ``W * E[A_j]`` in messages/second, when W is set."""
        if self.W is None or self.arrivals is None:
            return None
        return [self.W * a for a in self.arrivals.means]


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


@dataclass
class ResultRecord:
    command: str
    config_digest: str
    seed: Optional[int]
    outputs: dict
    wall_clock: float = 0.0
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps({
            "command": self.command, "config_digest": self.config_digest, "seed": self.seed,
            "outputs": self.outputs, "wall_clock": round(self.wall_clock, 4),
            "version": self.version,
        }, indent=2, default=_jsonable)


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
